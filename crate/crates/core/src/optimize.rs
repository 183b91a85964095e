//! Small dense optimizers: BFGS with backtracking line search and Brent's
//! bracketing root finder.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug)]
pub struct BfgsOptions {
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Stop once the accepted step's infinity norm drops below this.
    pub step_tol: Option<f64>,
    /// `|f_k - f_{k-1}|` below `stall_tol` for `stall_iters` consecutive
    /// iterations (with the gradient still above tolerance) ends the run.
    pub stall_tol: f64,
    pub stall_iters: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions { grad_tol: 1e-7, max_iter: 5000, step_tol: None, stall_tol: 1e-12, stall_iters: 3 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Gradient,
    Step,
    MaxIter,
    Stalled,
    LineSearch,
}

impl Termination {
    pub fn converged(self) -> bool {
        matches!(self, Termination::Gradient | Termination::Step)
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    /// Objective value after every accepted step, starting point first.
    pub history: Vec<f64>,
}

impl Minimum {
    pub fn grad_norm(&self) -> f64 {
        inf_norm(&self.grad)
    }
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Quasi-Newton minimization of `f`, which returns value and gradient.
pub fn bfgs<F>(mut f: F, x0: &[f64], opts: &BfgsOptions) -> Minimum
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x);
    let mut history = vec![fx];
    let identity = |scale: f64| {
        let mut h = vec![0.0; n * n];
        for i in 0..n {
            h[i * n + i] = scale;
        }
        h
    };
    let mut hinv = identity(1.0);
    let mut fresh = true;
    let mut stall = 0;
    let finish = |x, f, grad, iterations, termination, history| Minimum { x, f, grad, iterations, termination, history };

    if n == 0 || inf_norm(&g) < opts.grad_tol {
        return finish(x, fx, g, 0, Termination::Gradient, history);
    }
    for iter in 1..=opts.max_iter {
        let mut p: Vec<f64> = (0..n).map(|i| -(0..n).map(|j| hinv[i * n + j] * g[j]).sum::<f64>()).collect();
        let mut slope = dot(&g, &p);
        if slope >= 0.0 {
            hinv = identity(1.0);
            fresh = true;
            p = g.iter().map(|v| -v).collect();
            slope = dot(&g, &p);
        }
        // backtracking Armijo search
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + alpha * b).collect();
            let (fnew, gnew) = f(&xn);
            if fnew.is_finite() && fnew <= fx + 1e-4 * alpha * slope {
                accepted = Some((xn, fnew, gnew));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, fnew, gnew)) = accepted else {
            if !fresh {
                hinv = identity(1.0);
                fresh = true;
                continue;
            }
            return finish(x, fx, g, iter, Termination::LineSearch, history);
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
        let df = (fnew - fx).abs();
        x = xn;
        fx = fnew;
        g = gnew;
        history.push(fx);

        if inf_norm(&g) < opts.grad_tol {
            return finish(x, fx, g, iter, Termination::Gradient, history);
        }
        if opts.step_tol.is_some_and(|tol| inf_norm(&s) < tol) {
            return finish(x, fx, g, iter, Termination::Step, history);
        }
        stall = if df < opts.stall_tol { stall + 1 } else { 0 };
        if stall >= opts.stall_iters {
            return finish(x, fx, g, iter, Termination::Stalled, history);
        }

        let sy = dot(&s, &y);
        if sy > 1e-14 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            if fresh {
                hinv = identity(sy / dot(&y, &y));
                fresh = false;
            }
            // H <- (I - r s y^T) H (I - r y s^T) + r s s^T
            let r = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| hinv[i * n + j] * y[j]).sum()).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    hinv[i * n + j] += -r * (hy[i] * s[j] + s[i] * hy[j]) + (r * r * yhy + r) * s[i] * s[j];
                }
            }
        }
    }
    finish(x, fx, g, opts.max_iter, Termination::MaxIter, history)
}

/// Root of `f` in `[a, b]` where `f(a)` and `f(b)` differ in sign. Stops
/// when the bracket is below `xtol` or `|f| <= ftol`.
#[allow(clippy::too_many_arguments)]
pub fn brent_root<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    xtol: f64,
    ftol: f64,
    max_iter: usize,
) -> Option<f64> {
    if fa.abs() <= ftol {
        return Some(a);
    }
    if fb.abs() <= ftol {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb.abs() <= ftol {
            return Some(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Some(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bfgs_rosenbrock() {
        let rosen = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            (f, g)
        };
        let m = bfgs(rosen, &[-1.2, 1.0], &BfgsOptions { grad_tol: 1e-8, stall_tol: 0.0, ..Default::default() });
        assert_eq!(m.termination, Termination::Gradient);
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6);
        assert!(m.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn bfgs_quadratic_exits_at_start_point_when_flat() {
        let m = bfgs(|_| (3.0, vec![0.0, 0.0]), &[0.5, 0.5], &BfgsOptions::default());
        assert_eq!(m.iterations, 0);
        assert_eq!(m.x, vec![0.5, 0.5]);
    }

    #[test]
    fn brent_finds_cubic_root() {
        let f = |x: f64| x * x * x - 2.0 * x - 5.0;
        let r = brent_root(f, 2.0, 3.0, f(2.0), f(3.0), 1e-12, 0.0, 100).unwrap();
        assert!((r - 2.0945514815423265).abs() < 1e-10);
        assert!(brent_root(f, 3.0, 4.0, f(3.0), f(4.0), 1e-12, 0.0, 100).is_none());
    }
}
