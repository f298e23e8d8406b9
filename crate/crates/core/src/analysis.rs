//! Trace-of-product maps, correlation coefficients and one-parameter fits.

use rayon::prelude::*;
use serde::Serialize;

use crate::channels::KrausChannel;
use crate::diamond;
use crate::error::{contract_err, shape_err, Result};
use crate::optim::LbfgsConfig;
use crate::qcore::{self, DensityMatrix};
use crate::vardisc::{self, Init, StrategySpec};

/// `Tr(Φ(a)[ρ]·Φ(b)[ρ])` for qubit depolarizing channels.
pub fn trace_product(rho: &DensityMatrix, a: f64, b: f64) -> Result<f64> {
    if rho.dim() != 2 {
        return Err(shape_err!("trace product is defined on qubits, got dim {}", rho.dim()));
    }
    let ra = KrausChannel::depolarizing(a)?.apply(rho)?;
    let rb = KrausChannel::depolarizing(b)?.apply(rho)?;
    Ok(qcore::trace_of_product(ra.matrix(), rb.matrix())?.re)
}

/// `½(1 + (1 − 4a/3)(1 − 4b/3)|r|²)` for Bloch radius squared `r2`.
pub fn trace_product_closed_form(r2: f64, a: f64, b: f64) -> f64 {
    0.5 * (1.0 + (1.0 - 4.0 * a / 3.0) * (1.0 - 4.0 * b / 3.0) * r2)
}

/// Grid step used before local refinement in [`trace_product_extremum`].
pub const EXTREMUM_GRID_STEP: f64 = 0.01;

/// Minimizer of `α ↦ Tr(Φ(α)[ρ]·Φ(α+ε)[ρ])` on `[0, 1−ε]` for `ρ = |+⟩⟨+|`.
pub fn trace_product_extremum(eps: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eps) {
        return Err(contract_err!("ε must lie in [0, 1), got {eps}"));
    }
    let rho = DensityMatrix::plus();
    let f = |a: f64| trace_product(&rho, a, a + eps).expect("factors in range");
    let hi = 1.0 - eps;
    let steps = (hi / EXTREMUM_GRID_STEP).floor() as usize;
    let (best, _) = (0..=steps)
        .map(|k| (k as f64 * EXTREMUM_GRID_STEP).min(hi))
        .map(|a| (a, f(a)))
        .fold((0.0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
    let lo = (best - EXTREMUM_GRID_STEP).max(0.0);
    let up = (best + EXTREMUM_GRID_STEP).min(hi);
    Ok(golden_section(f, lo, up, 1e-12).0)
}

/// Golden-section minimization on `[lo, hi]`; returns the argmin, the value
/// there and the iteration count.
fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64, usize) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let mut iters = 0;
    while (hi - lo) > tol * (1.0 + lo.abs().max(hi.abs())) && iters < 500 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
        iters += 1;
    }
    let x = 0.5 * (lo + hi);
    (x, f(x), iters)
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(shape_err!("pearson needs equal lengths, got {} and {}", x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(contract_err!("pearson needs at least two points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(contract_err!("pearson is undefined for zero variance"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitResult {
    pub parameter: f64,
    pub residual_sum: f64,
    pub iterations: usize,
}

/// Least squares for a positive scalar parameter: a log-spaced scan over
/// `[1e-4, 1e4]` brackets the minimum, golden section refines it.
fn fit_scalar<M: Fn(f64, f64) -> f64>(ls: &[f64], vs: &[f64], model: M) -> Result<FitResult> {
    if ls.len() != vs.len() || ls.is_empty() {
        return Err(shape_err!("fit needs equal, nonempty inputs"));
    }
    if ls.iter().any(|&l| !(l > 0.0)) {
        return Err(contract_err!("fit abscissae must be positive"));
    }
    let residual = |p: f64| ls.iter().zip(vs).map(|(&l, &v)| (v - model(l, p)).powi(2)).sum::<f64>();
    let grid: Vec<f64> = (0..=320).map(|k| 10f64.powf(-4.0 + k as f64 * 0.025)).collect();
    let values: Vec<f64> = grid.iter().map(|&p| residual(p)).collect();
    let k = values
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v < values[best] { i } else { best });
    if k == 0 || k == grid.len() - 1 {
        return Err(contract_err!("no bracket: residual minimum at the edge of [1e-4, 1e4]"));
    }
    // The golden search runs on log p so the tolerance is relative.
    let (lp, res, iterations) = golden_section(|x| residual(x.exp()), grid[k - 1].ln(), grid[k + 1].ln(), 1e-14);
    Ok(FitResult { parameter: lp.exp(), residual_sum: res, iterations })
}

/// Fits `f(l) = l^(−1/a)`.
pub fn fit_power(ls: &[f64], vs: &[f64]) -> Result<FitResult> {
    fit_scalar(ls, vs, |l, a| l.powf(-1.0 / a))
}

/// Fits `g(l) = 1 − e^(−b·l)`.
pub fn fit_exp(ls: &[f64], vs: &[f64]) -> Result<FitResult> {
    fit_scalar(ls, vs, |l, b| 1.0 - (-b * l).exp())
}

/// Row-major `grid × grid` maps: `Tr(ρ₀ρ₁)` with `ρ_y = Φ(α_y)[|+⟩⟨+|]`,
/// and `p⋄` for `p` parallel uses.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMaps {
    pub grid: Vec<f64>,
    pub trace: Vec<Vec<f64>>,
    pub p_diamond: Vec<Vec<f64>>,
}

pub fn grid_maps(grid: &[f64], p: usize, restarts: usize, seed: u64) -> Result<GridMaps> {
    let rho = DensityMatrix::plus();
    let n = grid.len();
    let trace = grid
        .iter()
        .map(|&a| grid.iter().map(|&b| trace_product(&rho, a, b)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let flat: Vec<f64> = cells
        .par_iter()
        .map(|&(i, j)| {
            let c0 = KrausChannel::depolarizing(grid[i])?;
            let c1 = KrausChannel::depolarizing(grid[j])?;
            diamond::p_diamond(&c0, &c1, p, restarts, seed)
        })
        .collect::<Result<_>>()?;
    let p_diamond = flat.chunks(n).map(<[f64]>::to_vec).collect();
    Ok(GridMaps { grid: grid.to_vec(), trace, p_diamond })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationRow {
    pub l: usize,
    /// Per-pair success probability averaged over runs, in pair order.
    pub mean_success: Vec<f64>,
    pub pearson_trace: f64,
    pub pearson_diamond: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationStudy {
    pub pairs: Vec<(f64, f64)>,
    pub trace: Vec<f64>,
    pub p_diamond: Vec<f64>,
    pub rows: Vec<CorrelationRow>,
}

/// The five desk-scale pairs `(0.0,0.1), (0.2,0.3), …, (0.8,0.9)`.
pub fn desk_pairs() -> Vec<(f64, f64)> {
    (0..5).map(|k| (0.2 * k as f64, 0.2 * k as f64 + 0.1)).collect()
}

/// For each layer count, trains `runs` independent single-restart circuits
/// per pair, averages their success probabilities and correlates the means
/// with the trace-product and `p⋄` values of the pairs.
pub fn correlation_study(
    base: &StrategySpec,
    layers: &[usize],
    pairs: &[(f64, f64)],
    runs: usize,
    diamond_restarts: usize,
) -> Result<CorrelationStudy> {
    let rho = DensityMatrix::plus();
    let trace = pairs.iter().map(|&(a, b)| trace_product(&rho, a, b)).collect::<Result<Vec<_>>>()?;
    let p_diamond = pairs
        .iter()
        .map(|&(a, b)| {
            diamond::p_diamond(&KrausChannel::depolarizing(a)?, &KrausChannel::depolarizing(b)?, base.p, diamond_restarts, base.seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let cfg = LbfgsConfig::default();
    let mut rows = Vec::with_capacity(layers.len());
    for (li, &l) in layers.iter().enumerate() {
        let spec = StrategySpec { l, restarts: runs.max(1), ..*base };
        let mean_success = pairs
            .iter()
            .enumerate()
            .map(|(pi, &(a, b))| {
                let c0 = KrausChannel::depolarizing(a)?;
                let c1 = KrausChannel::depolarizing(b)?;
                let path = [li as u64, pi as u64];
                let report = vardisc::train_with(&c0, &c1, &spec, Init::Random { path: &path }, &cfg)?;
                let finished: Vec<f64> = report.per_restart.iter().filter_map(|r| r.value).collect();
                Ok(finished.iter().sum::<f64>() / finished.len() as f64)
            })
            .collect::<Result<Vec<_>>>()?;
        let pearson_trace = pearson(&trace, &mean_success)?;
        let pearson_diamond = pearson(&p_diamond, &mean_success).unwrap_or(f64::NAN);
        rows.push(CorrelationRow { l, mean_success, pearson_trace, pearson_diamond });
    }
    Ok(CorrelationStudy { pairs: pairs.to_vec(), trace, p_diamond, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn trace_product_examples() {
        let mixed = DensityMatrix::maximally_mixed(2);
        assert!((trace_product(&mixed, 0.2, 0.9).unwrap() - 0.5).abs() < 1e-15);
        let pure = DensityMatrix::basis(2, 1);
        assert!((trace_product(&pure, 0.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        let plus = DensityMatrix::plus();
        let expected = 0.5 * (1.0 + (1.0 - 0.4 / 3.0) * (1.0 - 0.8 / 3.0));
        assert!((trace_product(&plus, 0.1, 0.2).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn extremum_locations() {
        for eps in [0.0, 0.05, 0.1, 0.2] {
            let a = trace_product_extremum(eps).unwrap();
            assert!((a - (0.75 - eps / 2.0)).abs() <= EXTREMUM_GRID_STEP, "{eps}: {a}");
        }
        assert!(trace_product_extremum(1.5).is_err());
    }

    #[test]
    fn pearson_examples() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!(pearson(&x, &[1.0; 20]).is_err());
        assert!(pearson(&[1.0], &[2.0]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let a: Vec<f64> = (0..10_000).map(|_| rng.gen()).collect();
        let b: Vec<f64> = (0..10_000).map(|_| rng.gen()).collect();
        assert!(pearson(&a, &b).unwrap().abs() < 0.05);
    }

    #[test]
    fn fits_recover_model_parameters() {
        let ls: Vec<f64> = (1..=14).map(f64::from).collect();
        let vs: Vec<f64> = ls.iter().map(|l| l.powf(-0.5)).collect();
        let fit = fit_power(&ls, &vs).unwrap();
        assert!((fit.parameter - 2.0).abs() < 1e-6 && fit.residual_sum < 1e-10);
        let vs: Vec<f64> = ls.iter().map(|l| 1.0 - (-0.3 * l).exp()).collect();
        let fit = fit_exp(&ls, &vs).unwrap();
        assert!((fit.parameter - 0.3).abs() < 1e-6 && fit.residual_sum < 1e-10);
        let noisy: Vec<f64> = vs.iter().enumerate().map(|(i, v)| v + 0.01 * (i as f64).sin()).collect();
        assert!(fit_exp(&ls, &noisy).unwrap().residual_sum >= fit.residual_sum);
    }

    #[test]
    fn fit_without_bracket_is_an_error() {
        // constant 1 is approached only as a → ∞
        assert!(fit_power(&[2.0, 3.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn small_grid_maps() {
        let grid = [0.0, 0.5, 1.0];
        let maps = grid_maps(&grid, 1, 2, 0).unwrap();
        for i in 0..3 {
            assert!((maps.p_diamond[i][i] - 0.5).abs() < 1e-12);
            for j in 0..3 {
                assert!((maps.p_diamond[i][j] - maps.p_diamond[j][i]).abs() < 1e-6);
            }
        }
        assert!((maps.trace[0][1] - maps.trace[2][1]).abs() > 0.1 || (maps.trace[0][0] - maps.trace[2][2]).abs() > 0.1);
    }
}
