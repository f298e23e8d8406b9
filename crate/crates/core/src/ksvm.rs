//! Trace-product kernel classifier for intervals of depolarization factors.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::KrausChannel;
use crate::error::{contract_err, shape_err, Error, Result};
use crate::qcore::{self, random_mixed_state, DensityMatrix};

/// Default soft-margin cap (effectively hard margin).
pub const DEFAULT_C: f64 = 1e6;
/// Stop when the maximal KKT violation drops below this.
pub const KKT_TOL: f64 = 1e-6;
pub const MAX_UPDATES: usize = 100_000;
/// Threshold above which a dual variable counts as a support vector.
pub const SV_THRESHOLD: f64 = 1e-8;
const TAU: f64 = 1e-12;

/// A subinterval of `[0, 1]` with explicit endpoint conventions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "yes")]
    pub lo_closed: bool,
    #[serde(default = "yes")]
    pub hi_closed: bool,
}

fn yes() -> bool {
    true
}

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: true, hi_closed: true }
    }

    /// `[lo, hi)`
    pub fn half_open(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: true, hi_closed: false }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        !(self.hi > self.lo)
    }

    pub fn contains(&self, a: f64) -> bool {
        (a > self.lo || (self.lo_closed && a == self.lo)) && (a < self.hi || (self.hi_closed && a == self.hi))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSpec {
    /// Region of class −1.
    pub neg: Vec<Interval>,
    /// Region of class +1.
    pub pos: Vec<Interval>,
}

impl IntervalSpec {
    pub fn new(neg: Vec<Interval>, pos: Vec<Interval>) -> Result<Self> {
        let spec = Self { neg, pos };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, part) in [("neg", &self.neg), ("pos", &self.pos)] {
            if part.is_empty() {
                return Err(contract_err!("{name} region is empty"));
            }
            for iv in part {
                if iv.is_empty() || iv.lo < 0.0 || iv.hi > 1.0 {
                    return Err(contract_err!("{name} interval [{}, {}] not a nonempty subset of [0, 1]", iv.lo, iv.hi));
                }
            }
        }
        Ok(())
    }

    pub fn region(&self, label: i8) -> &[Interval] {
        if label < 0 {
            &self.neg
        } else {
            &self.pos
        }
    }

    /// Uniform over the union, weighted by subinterval length.
    pub fn sample<R: Rng + ?Sized>(&self, label: i8, rng: &mut R) -> f64 {
        let region = self.region(label);
        let total: f64 = region.iter().map(Interval::len).sum();
        let mut u = rng.gen::<f64>() * total;
        for iv in region {
            if u < iv.len() {
                return iv.lo + u;
            }
            u -= iv.len();
        }
        let last = region.last().expect("validated nonempty");
        last.lo + rng.gen::<f64>() * last.len()
    }
}

/// The four interval pairs. The fourth positive region is the union
/// `[0.25, 0.5) ∪ [0.75, 1]`.
pub fn intervals_i(k: usize) -> Result<IntervalSpec> {
    use Interval as I;
    match k {
        1 => IntervalSpec::new(vec![I::half_open(0.0, 0.5)], vec![I::closed(0.5, 1.0)]),
        2 => IntervalSpec::new(vec![I::closed(0.1, 0.2)], vec![I::closed(0.7, 0.9)]),
        3 => IntervalSpec::new(vec![I::closed(0.0, 0.75)], vec![I::closed(0.25, 1.0)]),
        4 => IntervalSpec::new(
            vec![I::half_open(0.0, 0.25), I::half_open(0.5, 0.75)],
            vec![I::half_open(0.25, 0.5), I::closed(0.75, 1.0)],
        ),
        _ => Err(contract_err!("interval set I{k} does not exist (1..4)")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputPolicy {
    /// Every item starts from `|+⟩⟨+|`.
    Plus,
    /// A fresh Hilbert-Schmidt random state per item.
    RandomMixed,
}

#[derive(Debug, Clone)]
pub struct LabeledItem {
    pub alpha: f64,
    pub state: DensityMatrix,
    pub label: i8,
}

#[derive(Debug, Clone)]
pub struct LabeledSet {
    pub items: Vec<LabeledItem>,
}

impl LabeledSet {
    pub fn states(&self) -> Vec<&DensityMatrix> {
        self.items.iter().map(|i| &i.state).collect()
    }

    pub fn labels(&self) -> Vec<i8> {
        self.items.iter().map(|i| i.label).collect()
    }
}

/// Fair-coin labels, `α` uniform over the label's region, state `Φ(α)[ρ_in]`.
/// Copies are handled by the kernel power, so items are single-copy states.
pub fn make_interval_dataset<R: Rng + ?Sized>(
    spec: &IntervalSpec,
    policy: InputPolicy,
    count: usize,
    rng: &mut R,
) -> Result<LabeledSet> {
    spec.validate()?;
    let mut items = Vec::with_capacity(count);
    for _ in 0..count {
        let label: i8 = if rng.gen_bool(0.5) { 1 } else { -1 };
        let alpha = spec.sample(label, rng);
        let input = match policy {
            InputPolicy::Plus => DensityMatrix::plus(),
            InputPolicy::RandomMixed => random_mixed_state(2, rng),
        };
        let state = KrausChannel::depolarizing(alpha)?.apply(&input)?;
        items.push(LabeledItem { alpha, state, label });
    }
    Ok(LabeledSet { items })
}

/// `[Tr(ρᵢρⱼ)]ⁿ`.
pub fn kernel(a: &DensityMatrix, b: &DensityMatrix, n: u32) -> Result<f64> {
    if n == 0 {
        return Err(contract_err!("kernel power must be at least 1"));
    }
    let t = qcore::trace_of_product(a.matrix(), b.matrix())?;
    if t.im.abs() > 1e-12 {
        return Err(Error::Numerical(format!("trace product has imaginary part {:.3e}", t.im)));
    }
    Ok(t.re.powi(n as i32))
}

pub fn gram(states: &[&DensityMatrix], n: u32) -> Result<DMatrix<f64>> {
    let m = states.len();
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| (0..m).map(|j| if j < i { Ok(0.0) } else { kernel(states[i], states[j], n) }).collect())
        .collect::<Result<_>>()?;
    let mut k = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            k[(i, j)] = rows[i][j];
            k[(j, i)] = rows[i][j];
        }
    }
    Ok(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Converged,
    IterationLimit,
    /// The dual objective grows without bound along a feasible direction
    /// (hard margin on non-separable data).
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub theta: Vec<f64>,
    pub status: SolveStatus,
    pub updates: usize,
    /// `m(θ) − M(θ)` at termination.
    pub violation: f64,
}

/// Dual objective `Σθᵢ − ½ΣθᵢθⱼKᵢⱼyᵢyⱼ`.
pub fn dual_objective(theta: &[f64], k: &DMatrix<f64>, y: &[i8]) -> f64 {
    let n = theta.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += theta[i] * theta[j] * k[(i, j)] * f64::from(y[i] * y[j]);
        }
    }
    theta.iter().sum::<f64>() - 0.5 * quad
}

/// Pairwise coordinate ascent on the dual with the maximal violating pair.
pub fn solve_dual(k: &DMatrix<f64>, y: &[i8], c: Option<f64>) -> Result<DualSolution> {
    let n = y.len();
    if k.shape() != (n, n) {
        return Err(shape_err!("Gram matrix is {}x{}, labels {n}", k.nrows(), k.ncols()));
    }
    if y.iter().any(|&v| v != 1 && v != -1) {
        return Err(contract_err!("labels must be ±1"));
    }
    if !(y.contains(&1) && y.contains(&-1)) {
        return Err(contract_err!("both classes must be present"));
    }
    let cap = c.unwrap_or(f64::INFINITY);
    if !(cap > 0.0) {
        return Err(contract_err!("cap C must be positive"));
    }
    let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let q = |i: usize, j: usize| yf[i] * yf[j] * k[(i, j)];
    let mut a = vec![0.0; n];
    let mut g = vec![-1.0; n];
    let up = |t: usize, a: &[f64]| (yf[t] > 0.0 && a[t] < cap) || (yf[t] < 0.0 && a[t] > 0.0);
    let low = |t: usize, a: &[f64]| (yf[t] < 0.0 && a[t] < cap) || (yf[t] > 0.0 && a[t] > 0.0);
    let mut updates = 0;
    loop {
        let (mut i, mut m_val) = (usize::MAX, f64::NEG_INFINITY);
        let (mut j, mut big_m) = (usize::MAX, f64::INFINITY);
        for t in 0..n {
            let v = -yf[t] * g[t];
            if up(t, &a) && v > m_val {
                (i, m_val) = (t, v);
            }
            if low(t, &a) && v < big_m {
                (j, big_m) = (t, v);
            }
        }
        let violation = m_val - big_m;
        if i == usize::MAX || j == usize::MAX || violation < KKT_TOL {
            return Ok(DualSolution { theta: a, status: SolveStatus::Converged, updates, violation: violation.max(0.0) });
        }
        if updates >= MAX_UPDATES {
            return Ok(DualSolution { theta: a, status: SolveStatus::IterationLimit, updates, violation });
        }
        let (old_i, old_j) = (a[i], a[j]);
        if yf[i] != yf[j] {
            let mut quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
            if quad <= TAU {
                if cap.is_infinite() {
                    return Ok(DualSolution { theta: a, status: SolveStatus::Unbounded, updates, violation });
                }
                quad = TAU;
            }
            let delta = (-g[i] - g[j]) / quad;
            let diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if diff > 0.0 {
                if a[j] < 0.0 {
                    a[j] = 0.0;
                    a[i] = diff;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = -diff;
            }
            if diff > 0.0 {
                if a[i] > cap {
                    a[i] = cap;
                    a[j] = cap - diff;
                }
            } else if a[j] > cap {
                a[j] = cap;
                a[i] = cap + diff;
            }
        } else {
            let mut quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
            if quad <= TAU {
                if cap.is_infinite() {
                    return Ok(DualSolution { theta: a, status: SolveStatus::Unbounded, updates, violation });
                }
                quad = TAU;
            }
            let delta = (g[i] - g[j]) / quad;
            let sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if sum > cap {
                if a[i] > cap {
                    a[i] = cap;
                    a[j] = sum - cap;
                }
                if a[j] > cap {
                    a[j] = cap;
                    a[i] = sum - cap;
                }
            } else {
                if a[j] < 0.0 {
                    a[j] = 0.0;
                    a[i] = sum;
                }
                if a[i] < 0.0 {
                    a[i] = 0.0;
                    a[j] = sum;
                }
            }
        }
        let (di, dj) = (a[i] - old_i, a[j] - old_j);
        for t in 0..n {
            g[t] += q(t, i) * di + q(t, j) * dj;
        }
        updates += 1;
    }
}

/// `b = y_m − Σᵢ θᵢ yᵢ K_im`, averaged over free support vectors
/// (`SV_THRESHOLD < θ_m < C`), or over all support vectors if none is free.
pub fn bias(theta: &[f64], k: &DMatrix<f64>, y: &[i8], c: Option<f64>) -> Result<f64> {
    let cap = c.unwrap_or(f64::INFINITY);
    let n = theta.len();
    let per_m = |m: usize| {
        let s: f64 = (0..n).map(|i| theta[i] * f64::from(y[i]) * k[(i, m)]).sum();
        f64::from(y[m]) - s
    };
    let free: Vec<usize> = (0..n).filter(|&m| theta[m] > SV_THRESHOLD && theta[m] < cap * (1.0 - 1e-12)).collect();
    let chosen = if free.is_empty() { (0..n).filter(|&m| theta[m] > SV_THRESHOLD).collect() } else { free };
    if chosen.is_empty() {
        return Err(contract_err!("no support vector with θ > {SV_THRESHOLD}"));
    }
    Ok(chosen.iter().map(|&m| per_m(m)).sum::<f64>() / chosen.len() as f64)
}

#[derive(Debug, Clone)]
pub struct KernelModel {
    pub support_states: Vec<DensityMatrix>,
    pub support_labels: Vec<i8>,
    pub theta: Vec<f64>,
    pub b: f64,
    pub n: u32,
    pub status: SolveStatus,
}

impl KernelModel {
    /// Signed score `Σ θᵢ yᵢ K(ρᵢ, ρ) + b`.
    pub fn score(&self, rho: &DensityMatrix) -> Result<f64> {
        let mut s = self.b;
        for ((st, &y), &t) in self.support_states.iter().zip(&self.support_labels).zip(&self.theta) {
            s += t * f64::from(y) * kernel(st, rho, self.n)?;
        }
        Ok(s)
    }

    /// `sgn(score)` with `sgn(0) = +1`.
    pub fn predict(&self, rho: &DensityMatrix) -> Result<i8> {
        Ok(sign(self.score(rho)?))
    }
}

pub fn sign(x: f64) -> i8 {
    if x >= 0.0 {
        1
    } else {
        -1
    }
}

pub fn train(set: &LabeledSet, n: u32, c: Option<f64>) -> Result<KernelModel> {
    let states = set.states();
    let y = set.labels();
    let k = gram(&states, n)?;
    let sol = solve_dual(&k, &y, c)?;
    if sol.status != SolveStatus::Converged {
        log::warn!("dual solver stopped with {:?} after {} updates", sol.status, sol.updates);
    }
    let b = bias(&sol.theta, &k, &y, c)?;
    let keep: Vec<usize> = (0..y.len()).filter(|&i| sol.theta[i] > 0.0).collect();
    Ok(KernelModel {
        support_states: keep.iter().map(|&i| states[i].clone()).collect(),
        support_labels: keep.iter().map(|&i| y[i]).collect(),
        theta: keep.iter().map(|&i| sol.theta[i]).collect(),
        b,
        n,
        status: sol.status,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredItem {
    pub alpha: f64,
    pub true_label: i8,
    pub score: f64,
    /// `score / max|score|` over the evaluated set.
    pub normalized: f64,
    pub pred_label: i8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub items: Vec<ScoredItem>,
}

pub fn evaluate(model: &KernelModel, set: &LabeledSet) -> Result<Evaluation> {
    let scores: Vec<f64> = set.items.par_iter().map(|it| model.score(&it.state)).collect::<Result<_>>()?;
    let scale = scores.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let items: Vec<ScoredItem> = set
        .items
        .iter()
        .zip(&scores)
        .map(|(it, &score)| ScoredItem {
            alpha: it.alpha,
            true_label: it.label,
            score,
            normalized: if scale > 0.0 { score / scale } else { 0.0 },
            pred_label: sign(score),
        })
        .collect();
    let correct = items.iter().filter(|i| i.pred_label == i.true_label).count();
    Ok(Evaluation { accuracy: correct as f64 / items.len().max(1) as f64, items })
}
