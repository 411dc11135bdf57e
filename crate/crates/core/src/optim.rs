//! Limited-memory BFGS with a strong-Wolfe line search.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LbfgsConfig {
    pub history: usize,
    pub max_iters: usize,
    /// Stop when |f_prev − f| / max(|f_prev|, |f|, 1) falls below this.
    pub tolerance: f64,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            history: 10,
            max_iters: 100,
            tolerance: 1e-5,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 40,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    /// Objective value at the start and after every accepted step.
    pub trace: Vec<f64>,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Point {
    alpha: f64,
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
    slope: f64,
}

struct LineSearch<'a, F> {
    objective: &'a mut F,
    x0: &'a [f64],
    dir: &'a [f64],
    f0: f64,
    slope0: f64,
    cfg: &'a LbfgsConfig,
    evals: usize,
}

impl<F> LineSearch<'_, F>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    fn eval(&mut self, alpha: f64) -> Point {
        self.evals += 1;
        let x: Vec<f64> = self.x0.iter().zip(self.dir).map(|(x, d)| x + alpha * d).collect();
        let (f, g) = (self.objective)(&x);
        let slope = dot(&g, self.dir);
        Point { alpha, x, f, g, slope }
    }

    fn armijo_fails(&self, p: &Point) -> bool {
        !p.f.is_finite() || p.f > self.f0 + self.cfg.c1 * p.alpha * self.slope0
    }

    fn curvature_holds(&self, p: &Point) -> bool {
        p.slope.abs() <= -self.cfg.c2 * self.slope0
    }

    fn search(&mut self, initial: f64) -> Option<Point> {
        let mut prev = Point {
            alpha: 0.0,
            x: self.x0.to_vec(),
            f: self.f0,
            g: Vec::new(),
            slope: self.slope0,
        };
        let mut alpha = initial;
        let mut first = true;
        while self.evals < self.cfg.max_line_search {
            let p = self.eval(alpha);
            if !p.f.is_finite() {
                // Overshot into an overflow region: back off.
                alpha = prev.alpha + 0.5 * (alpha - prev.alpha);
                continue;
            }
            if self.armijo_fails(&p) || (!first && p.f >= prev.f) {
                return self.zoom(prev, p);
            }
            if self.curvature_holds(&p) {
                return Some(p);
            }
            if p.slope >= 0.0 {
                return self.zoom(p, prev);
            }
            alpha = 2.0 * p.alpha;
            prev = p;
            first = false;
        }
        None
    }

    /// Narrows a bracket whose `lo` end satisfies sufficient decrease.
    fn zoom(&mut self, mut lo: Point, mut hi: Point) -> Option<Point> {
        while self.evals < self.cfg.max_line_search {
            let alpha = interpolate(&lo, &hi);
            let p = self.eval(alpha);
            if self.armijo_fails(&p) || p.f >= lo.f {
                hi = p;
            } else {
                if self.curvature_holds(&p) {
                    return Some(p);
                }
                if p.slope * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = p;
            }
            if (hi.alpha - lo.alpha).abs() < 1e-16 * lo.alpha.abs().max(1.0) {
                break;
            }
        }
        // Accept the best sufficient-decrease point found, if it moved.
        (lo.alpha > 0.0 && !self.armijo_fails(&lo)).then_some(lo)
    }
}

/// Cubic interpolation of the bracket, safeguarded into its middle 80%.
fn interpolate(lo: &Point, hi: &Point) -> f64 {
    let (a, b) = (lo.alpha, hi.alpha);
    let mid = 0.5 * (a + b);
    let width = b - a;
    let (fa, fb, ga, gb) = (lo.f, hi.f, lo.slope, hi.slope);
    if !(fb.is_finite() && gb.is_finite()) {
        return mid;
    }
    let d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - ga * gb;
    if disc < 0.0 {
        return mid;
    }
    let d2 = width.signum() * disc.sqrt();
    let denom = gb - ga + 2.0 * d2;
    if denom == 0.0 {
        return mid;
    }
    let t = b - width * (gb + d2 - d1) / denom;
    let (low, high) = if a < b { (a, b) } else { (b, a) };
    let margin = 0.1 * (high - low);
    if t.is_finite() && t > low + margin && t < high - margin {
        t
    } else {
        mid
    }
}

/// Minimizes a smooth function given as `x ↦ (f(x), ∇f(x))`.
///
/// Every accepted step satisfies sufficient decrease, so the objective
/// never increases along the returned trace.
pub fn minimize<F>(mut objective: F, x0: Vec<f64>, cfg: &LbfgsConfig) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0;
    let (mut f, mut g) = objective(&x);
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence(format!("objective is {f} at the starting point")));
    }
    let mut trace = vec![f];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.history);
    let mut converged = false;

    for iter in 0..cfg.max_iters {
        let gnorm = norm(&g);
        if gnorm <= 1e-12 * norm(&x).max(1.0) {
            converged = true;
            break;
        }
        let dir = two_loop(&g, &history);
        let (dir, slope) = {
            let slope = dot(&g, &dir);
            if slope < 0.0 {
                (dir, slope)
            } else {
                history.clear();
                (g.iter().map(|v| -v).collect(), -gnorm * gnorm)
            }
        };
        let initial = if iter == 0 && history.is_empty() { 1.0 / gnorm } else { 1.0 };
        let mut ls = LineSearch {
            objective: &mut objective,
            x0: &x,
            dir: &dir,
            f0: f,
            slope0: slope,
            cfg,
            evals: 0,
        };
        let Some(p) = ls.search(initial) else {
            if history.is_empty() {
                log::warn!("line search failed along the steepest-descent direction; stopping");
                break;
            }
            log::debug!("line search failed; resetting curvature history");
            history.clear();
            continue;
        };
        if p.g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence("non-finite gradient".into()));
        }
        let s: Vec<f64> = p.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = p.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * norm(&s) * norm(&y) {
            if history.len() == cfg.history {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let rel = (f - p.f).abs() / f.abs().max(p.f.abs()).max(1.0);
        log::debug!("iter {iter}: f = {:.6} step = {:.3e}", p.f, p.alpha);
        x = p.x;
        f = p.f;
        g = p.g;
        trace.push(f);
        if rel < cfg.tolerance {
            converged = true;
            break;
        }
    }
    Ok(Minimum {
        x,
        value: f,
        trace,
        converged,
    })
}

/// −H·g from the stored curvature pairs.
fn two_loop(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let target = [3.0, -2.0, 0.5];
        let scales = [1.0, 10.0, 100.0];
        let f = |x: &[f64]| {
            let mut v = 0.0;
            let mut g = vec![0.0; 3];
            for i in 0..3 {
                let d = x[i] - target[i];
                v += 0.5 * scales[i] * d * d;
                g[i] = scales[i] * d;
            }
            (v, g)
        };
        let cfg = LbfgsConfig {
            tolerance: 1e-14,
            ..LbfgsConfig::default()
        };
        let min = minimize(f, vec![0.0; 3], &cfg).unwrap();
        for (x, t) in min.x.iter().zip(target) {
            assert!((x - t).abs() < 1e-5, "{:?}", min.x);
        }
        assert!(min.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            (v, g)
        };
        let cfg = LbfgsConfig {
            tolerance: 1e-15,
            max_iters: 500,
            ..LbfgsConfig::default()
        };
        let min = minimize(f, vec![-1.2, 1.0], &cfg).unwrap();
        assert!((min.x[0] - 1.0).abs() < 1e-4 && (min.x[1] - 1.0).abs() < 1e-4, "{:?}", min.x);
        assert!(min.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn non_finite_start_diverges() {
        let f = |_: &[f64]| (f64::NAN, vec![0.0]);
        assert!(matches!(
            minimize(f, vec![0.0], &LbfgsConfig::default()),
            Err(Error::Divergence(_))
        ));
    }
}
