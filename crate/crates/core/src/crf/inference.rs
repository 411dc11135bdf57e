//! Exact inference on a linear chain, all in log space.

pub(crate) fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Emission and transition scores of one sequence.
///
/// `emissions` is row-major T × L, `transitions` is L × L indexed
/// `[prev * L + next]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainPotentials {
    pub num_labels: usize,
    pub emissions: Vec<f64>,
    pub transitions: Vec<f64>,
}

/// Forward and backward tables (T × L each) with the log partition.
#[derive(Clone, Debug)]
pub struct ForwardBackward {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub log_z: f64,
}

impl ChainPotentials {
    pub fn len(&self) -> usize {
        self.emissions.len() / self.num_labels
    }

    pub fn is_empty(&self) -> bool {
        self.emissions.is_empty()
    }

    #[inline]
    pub fn emission(&self, t: usize, y: usize) -> f64 {
        self.emissions[t * self.num_labels + y]
    }

    #[inline]
    pub fn transition(&self, prev: usize, next: usize) -> f64 {
        self.transitions[prev * self.num_labels + next]
    }

    /// Score of one labeling: emissions plus transitions between
    /// neighbouring labels.
    pub fn score(&self, labels: &[usize]) -> f64 {
        let mut total = 0.0;
        for (t, &y) in labels.iter().enumerate() {
            total += self.emission(t, y);
            if t > 0 {
                total += self.transition(labels[t - 1], y);
            }
        }
        total
    }

    pub fn forward_backward(&self) -> ForwardBackward {
        let (n, l) = (self.len(), self.num_labels);
        let mut alpha = vec![0.0; n * l];
        let mut beta = vec![0.0; n * l];
        let mut scratch = vec![0.0; l];
        alpha[..l].copy_from_slice(&self.emissions[..l]);
        for t in 1..n {
            for y in 0..l {
                for (prev, s) in scratch.iter_mut().enumerate() {
                    *s = alpha[(t - 1) * l + prev] + self.transition(prev, y);
                }
                alpha[t * l + y] = self.emission(t, y) + log_sum_exp(scratch.iter().copied());
            }
        }
        for t in (0..n.saturating_sub(1)).rev() {
            for y in 0..l {
                for (next, s) in scratch.iter_mut().enumerate() {
                    *s = self.transition(y, next) + self.emission(t + 1, next) + beta[(t + 1) * l + next];
                }
                beta[t * l + y] = log_sum_exp(scratch.iter().copied());
            }
        }
        let log_z = if n == 0 {
            0.0
        } else {
            log_sum_exp(alpha[(n - 1) * l..].iter().copied())
        };
        ForwardBackward { alpha, beta, log_z }
    }

    /// log Σ_y exp(score(y)) over all labelings.
    pub fn log_partition(&self) -> f64 {
        self.forward_backward().log_z
    }

    /// Per-position label marginals, T × L.
    pub fn marginals(&self) -> Vec<f64> {
        let fb = self.forward_backward();
        fb.alpha
            .iter()
            .zip(&fb.beta)
            .map(|(a, b)| (a + b - fb.log_z).exp())
            .collect()
    }

    /// Highest-scoring labeling. Among equal scores the lowest label index
    /// wins at every step of the backtrace.
    pub fn viterbi(&self) -> (Vec<usize>, f64) {
        let (n, l) = (self.len(), self.num_labels);
        if n == 0 {
            return (Vec::new(), 0.0);
        }
        let mut delta = vec![0.0; n * l];
        let mut back = vec![0usize; n * l];
        delta[..l].copy_from_slice(&self.emissions[..l]);
        for t in 1..n {
            for y in 0..l {
                let mut best = 0;
                let mut best_score = delta[(t - 1) * l] + self.transition(0, y);
                for prev in 1..l {
                    let s = delta[(t - 1) * l + prev] + self.transition(prev, y);
                    if s > best_score {
                        best = prev;
                        best_score = s;
                    }
                }
                delta[t * l + y] = best_score + self.emission(t, y);
                back[t * l + y] = best;
            }
        }
        let last = &delta[(n - 1) * l..];
        let mut y = 0;
        for (cand, &s) in last.iter().enumerate().skip(1) {
            if s > last[y] {
                y = cand;
            }
        }
        let mut path = vec![0; n];
        path[n - 1] = y;
        for t in (1..n).rev() {
            y = back[t * l + y];
            path[t - 1] = y;
        }
        let score = self.score(&path);
        (path, score)
    }
}
