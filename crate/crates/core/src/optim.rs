//! Limited-memory BFGS with a strong-Wolfe line search.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop when `|f_k - f_{k+1}|` falls below this.
    pub f_tol: f64,
    /// Stop when `‖∇f‖_∞` falls below this.
    pub g_tol: f64,
    pub c1: f64,
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self { memory: 10, max_iter: 2000, f_tol: 1e-9, g_tol: 1e-7, c1: 1e-4, c2: 0.9, max_line_search: 40 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ValueTolerance,
    GradientTolerance,
    MaxIterations,
    /// No step satisfying the Wolfe conditions was found; the incumbent is
    /// returned.
    LineSearch,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Objective after each accepted iteration, starting with `f(x0)`.
    pub history: Vec<f64>,
    pub termination: Termination,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Counted<F> {
    f: F,
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> (f64, Vec<f64>)> Counted<F> {
    fn eval(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.evaluations += 1;
        let (v, g) = (self.f)(x);
        if !v.is_finite() || g.iter().any(|z| !z.is_finite()) {
            return Err(Error::Numerical(format!("objective not finite at evaluation {}", self.evaluations)));
        }
        Ok((v, g))
    }
}

/// Minimizes `f`, which returns the value and gradient at a point.
pub fn minimize<F>(f: F, x0: &[f64], cfg: &LbfgsConfig) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut obj = Counted { f, evaluations: 0 };
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = obj.eval(&x)?;
    let mut history = vec![fx];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    if inf_norm(&g) < cfg.g_tol {
        termination = Termination::GradientTolerance;
    } else {
        while iterations < cfg.max_iter {
            // two-loop recursion
            let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
            let mut alphas = Vec::with_capacity(pairs.len());
            for (s, y, rho) in pairs.iter().rev() {
                let a = rho * dot(s, &d);
                d.iter_mut().zip(y).for_each(|(di, yi)| *di -= a * yi);
                alphas.push(a);
            }
            if let Some((s, y, _)) = pairs.back() {
                let gamma = dot(s, y) / dot(y, y);
                d.iter_mut().for_each(|di| *di *= gamma);
            }
            for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
                let b = rho * dot(y, &d);
                d.iter_mut().zip(s).for_each(|(di, si)| *di += (a - b) * si);
            }
            let mut slope = dot(&g, &d);
            if !(slope < 0.0) {
                pairs.clear();
                d = g.iter().map(|v| -v).collect();
                slope = dot(&g, &d);
            }
            let step0 = if pairs.is_empty() { (1.0 / inf_norm(&g)).min(1.0) } else { 1.0 };

            let Some((step, fnew, gnew)) = line_search(&mut obj, &x, fx, &d, slope, step0, cfg)? else {
                if pairs.is_empty() {
                    termination = Termination::LineSearch;
                    break;
                }
                pairs.clear();
                continue;
            };
            iterations += 1;
            let s: Vec<f64> = d.iter().map(|di| step * di).collect();
            let y: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
            x.iter_mut().zip(&s).for_each(|(xi, si)| *xi += si);
            let sy = dot(&s, &y);
            if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
                if pairs.len() == cfg.memory {
                    pairs.pop_front();
                }
                pairs.push_back((s, y, 1.0 / sy));
            }
            let delta = (fx - fnew).abs();
            fx = fnew;
            g = gnew;
            history.push(fx);
            if inf_norm(&g) < cfg.g_tol {
                termination = Termination::GradientTolerance;
                break;
            }
            if delta < cfg.f_tol {
                termination = Termination::ValueTolerance;
                break;
            }
        }
    }
    debug_assert_eq!(x.len(), n);
    Ok(Minimum { x, value: fx, iterations, evaluations: obj.evaluations, history, termination })
}

type Trial = (f64, f64, Vec<f64>);

fn line_search<F: FnMut(&[f64]) -> (f64, Vec<f64>)>(
    obj: &mut Counted<F>,
    x: &[f64],
    f0: f64,
    d: &[f64],
    slope0: f64,
    step0: f64,
    cfg: &LbfgsConfig,
) -> Result<Option<Trial>> {
    let mut phi = |a: f64| -> Result<(f64, f64, Vec<f64>)> {
        let xt: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + a * di).collect();
        let (v, g) = obj.eval(&xt)?;
        let s = dot(&g, d);
        Ok((v, s, g))
    };
    let (mut a_prev, mut f_prev, mut s_prev) = (0.0, f0, slope0);
    let mut a = step0;
    for i in 0..cfg.max_line_search {
        let (fa, sa, ga) = phi(a)?;
        if fa > f0 + cfg.c1 * a * slope0 || (i > 0 && fa >= f_prev) {
            return zoom(&mut phi, (a_prev, f_prev, s_prev), (a, fa, sa), f0, slope0, cfg);
        }
        if sa.abs() <= -cfg.c2 * slope0 {
            return Ok(Some((a, fa, ga)));
        }
        if sa >= 0.0 {
            return zoom(&mut phi, (a, fa, sa), (a_prev, f_prev, s_prev), f0, slope0, cfg);
        }
        a_prev = a;
        f_prev = fa;
        s_prev = sa;
        a *= 2.0;
    }
    Ok(None)
}

/// Minimizer of the cubic interpolating values and slopes at two points,
/// if it lies strictly inside the interval.
fn cubic_min(a: (f64, f64, f64), b: (f64, f64, f64)) -> Option<f64> {
    let (x0, f0, g0) = a;
    let (x1, f1, g1) = b;
    let d1 = g0 + g1 - 3.0 * (f0 - f1) / (x0 - x1);
    let disc = d1 * d1 - g0 * g1;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = (x1 - x0).signum() * disc.sqrt();
    let t = x1 - (x1 - x0) * (g1 + d2 - d1) / (g1 - g0 + 2.0 * d2);
    let (lo, hi) = if x0 < x1 { (x0, x1) } else { (x1, x0) };
    let margin = 0.1 * (hi - lo);
    (t.is_finite() && t > lo + margin && t < hi - margin).then_some(t)
}

fn zoom<P>(
    phi: &mut P,
    mut lo: (f64, f64, f64),
    mut hi: (f64, f64, f64),
    f0: f64,
    slope0: f64,
    cfg: &LbfgsConfig,
) -> Result<Option<Trial>>
where
    P: FnMut(f64) -> Result<(f64, f64, Vec<f64>)>,
{
    for _ in 0..cfg.max_line_search {
        let a = cubic_min(lo, hi).unwrap_or(0.5 * (lo.0 + hi.0));
        if (hi.0 - lo.0).abs() < 1e-16 * lo.0.abs().max(1.0) {
            break;
        }
        let (fa, sa, ga) = phi(a)?;
        if fa > f0 + cfg.c1 * a * slope0 || fa >= lo.1 {
            hi = (a, fa, sa);
        } else {
            if sa.abs() <= -cfg.c2 * slope0 {
                return Ok(Some((a, fa, ga)));
            }
            if sa * (hi.0 - lo.0) >= 0.0 {
                hi = lo;
            }
            lo = (a, fa, sa);
        }
    }
    // Accept the best sufficient-decrease point if the curvature test never
    // passed but progress is still possible.
    if lo.0 > 0.0 && lo.1 < f0 {
        let (fa, _, ga) = phi(lo.0)?;
        return Ok(Some((lo.0, fa, ga)));
    }
    Ok(None)
}
