//! Variational parallel and sequential channel discrimination.
//!
//! A strategy is a pipeline of hardware-efficient unitary blocks and channel
//! uses acting on a register that starts in `|0…0⟩`. The output is measured
//! with the half-split computational-basis POVM.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{ParamCircuit, SlotKind};
use crate::channels::KrausChannel;
use crate::error::{contract_err, shape_err, Result};
use crate::optim::{self, LbfgsConfig, Termination};
use crate::qcore::{kernels, ComplexMatrix, DensityMatrix, ONE};
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Parallel,
    Sequential,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Parallel => "parallel",
            Strategy::Sequential => "sequential",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategySpec {
    pub strategy: Strategy,
    /// Channel uses.
    pub p: usize,
    /// Ancilla qubits.
    pub r: usize,
    /// Layers per unitary block.
    pub l: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl StrategySpec {
    pub fn new(strategy: Strategy, p: usize, r: usize, l: usize) -> Self {
        Self { strategy, p, r, l, restarts: 10, seed: 0 }
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    elements: Vec<ComplexMatrix>,
}

impl Povm {
    /// Checks that the elements are PSD and sum to the identity.
    pub fn new(elements: Vec<ComplexMatrix>) -> Result<Self> {
        let d = elements.first().ok_or_else(|| contract_err!("empty POVM"))?.nrows();
        let mut sum = ComplexMatrix::zeros(d, d);
        for e in &elements {
            if e.shape() != (d, d) {
                return Err(shape_err!("POVM elements disagree in shape"));
            }
            let min = crate::qcore::eigvalsh(e)?[0];
            if min < crate::qcore::TOL_PSD {
                return Err(contract_err!("POVM element has eigenvalue {min:.3e}"));
            }
            sum += e;
        }
        let defect = (sum - crate::qcore::identity(d)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if defect > 1e-10 {
            return Err(contract_err!("POVM elements do not sum to identity (defect {defect:.3e})"));
        }
        Ok(Self { elements })
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    pub fn probability(&self, outcome: usize, rho: &DensityMatrix) -> Result<f64> {
        let e = self.elements.get(outcome).ok_or_else(|| contract_err!("no POVM outcome {outcome}"))?;
        crate::qcore::expectation(rho, e)
    }
}

/// `Π₀` projects onto the first half of the computational basis (leading
/// qubit `0`), `Π₁` onto the rest.
pub fn povm_half(dim: usize) -> Result<Povm> {
    if dim == 0 || dim % 2 != 0 {
        return Err(contract_err!("half-split POVM needs an even dimension, got {dim}"));
    }
    let proj = |lo: usize, hi: usize| {
        let mut m = ComplexMatrix::zeros(dim, dim);
        (lo..hi).for_each(|j| m[(j, j)] = ONE);
        m
    };
    Povm::new(vec![proj(0, dim / 2), proj(dim / 2, dim)])
}

#[derive(Debug, Clone)]
enum Stage {
    Unitary { circuit: ParamCircuit, offset: usize },
    Channel { start: usize },
    Fresh { count: usize },
}

/// A compiled strategy for channels of a given qubit width.
#[derive(Debug, Clone)]
pub struct Discriminator {
    spec: StrategySpec,
    in_q: usize,
    out_q: usize,
    stages: Vec<Stage>,
    param_count: usize,
    output_qubits: usize,
}

impl Discriminator {
    /// Pipeline for a channel mapping `in_q` qubits to `out_q` qubits.
    pub fn new(spec: &StrategySpec, in_q: usize, out_q: usize) -> Result<Self> {
        if spec.p == 0 || spec.l == 0 {
            return Err(contract_err!("strategy needs p >= 1 and l >= 1"));
        }
        if in_q == 0 || out_q == 0 {
            return Err(contract_err!("channel must act on at least one qubit"));
        }
        let mut stages = Vec::new();
        let mut offset = 0;
        let mut push_block = |stages: &mut Vec<Stage>, q: usize| -> Result<()> {
            let circuit = ParamCircuit::hea(q, spec.l)?;
            let s = circuit.param_count();
            stages.push(Stage::Unitary { circuit, offset });
            offset += s;
            Ok(())
        };
        let output_qubits = match spec.strategy {
            Strategy::Parallel => {
                push_block(&mut stages, spec.p * in_q + spec.r)?;
                for i in 0..spec.p {
                    stages.push(Stage::Channel { start: i * out_q });
                }
                let n1 = spec.p * out_q + spec.r;
                push_block(&mut stages, n1)?;
                n1
            }
            Strategy::Sequential => {
                push_block(&mut stages, in_q + spec.r)?;
                for i in 0..spec.p {
                    stages.push(Stage::Channel { start: 0 });
                    let last = i + 1 == spec.p;
                    if !last && in_q > out_q {
                        stages.push(Stage::Fresh { count: in_q - out_q });
                    }
                    let q = if last { out_q + spec.r } else { in_q.max(out_q) + spec.r };
                    if !last && out_q > in_q {
                        return Err(contract_err!("sequential strategy needs out_q <= in_q"));
                    }
                    push_block(&mut stages, q)?;
                }
                out_q + spec.r
            }
        };
        if (1usize << output_qubits) < 2 {
            return Err(contract_err!("output register too small to measure"));
        }
        let param_count = offset;
        Ok(Self { spec: *spec, in_q, out_q, stages, param_count, output_qubits })
    }

    /// Pipeline sized for the given channel pair.
    pub fn for_channels(spec: &StrategySpec, ch0: &KrausChannel, ch1: &KrausChannel) -> Result<Self> {
        if ch0.in_dim() != ch1.in_dim() || ch0.out_dim() != ch1.out_dim() {
            return Err(shape_err!("channels to discriminate must have equal dimensions"));
        }
        let (Some(in_q), Some(out_q)) = (ch0.in_qubits(), ch0.out_qubits()) else {
            return Err(shape_err!("channel dimensions must be powers of two"));
        };
        Self::new(spec, in_q, out_q)
    }

    pub fn spec(&self) -> &StrategySpec {
        &self.spec
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    pub fn output_qubits(&self) -> usize {
        self.output_qubits
    }

    pub fn slot_kinds(&self) -> Vec<SlotKind> {
        let mut kinds = Vec::with_capacity(self.param_count);
        for st in &self.stages {
            if let Stage::Unitary { circuit, .. } = st {
                kinds.extend(circuit.slot_kinds());
            }
        }
        kinds
    }

    fn check(&self, theta: &[f64], ch: &KrausChannel) -> Result<()> {
        if theta.len() != self.param_count {
            return Err(shape_err!("expected {} parameters, got {}", self.param_count, theta.len()));
        }
        if ch.in_qubits() != Some(self.in_q) || ch.out_qubits() != Some(self.out_q) {
            return Err(shape_err!(
                "pipeline expects a {}→{} qubit channel, got dims {}→{}",
                self.in_q,
                self.out_q,
                ch.in_dim(),
                ch.out_dim()
            ));
        }
        Ok(())
    }

    /// Runs the pipeline; if `trace` is given, stores the state after each
    /// unitary block.
    fn forward(&self, theta: &[f64], ch: &KrausChannel, mut trace: Option<&mut Vec<ComplexMatrix>>) -> ComplexMatrix {
        let mut n = match &self.stages[0] {
            Stage::Unitary { circuit, .. } => circuit.qubits(),
            _ => unreachable!("pipelines start with a unitary block"),
        };
        let mut m = ComplexMatrix::zeros(1 << n, 1 << n);
        m[(0, 0)] = ONE;
        for st in &self.stages {
            match st {
                Stage::Unitary { circuit, offset } => {
                    circuit.conjugate_in_place(&theta[*offset..offset + circuit.param_count()], &mut m);
                    if let Some(t) = trace.as_deref_mut() {
                        t.push(m.clone());
                    }
                }
                Stage::Channel { start } => {
                    m = kernels::apply_kraus_local(&m, ch.kraus(), n, *start, self.in_q, self.out_q);
                    n = n - self.in_q + self.out_q;
                }
                Stage::Fresh { count } => {
                    m = kernels::prepend_zero_qubits(&m, *count);
                    n += count;
                }
            }
        }
        m
    }

    pub fn output(&self, theta: &[f64], ch: &KrausChannel) -> Result<DensityMatrix> {
        self.check(theta, ch)?;
        Ok(DensityMatrix::from_matrix_unchecked(self.forward(theta, ch, None)))
    }

    /// `½[Tr(Π₀ρ₀) + Tr(Π₁ρ₁)]`.
    pub fn success_prob(&self, theta: &[f64], ch0: &KrausChannel, ch1: &KrausChannel) -> Result<f64> {
        self.check(theta, ch0)?;
        self.check(theta, ch1)?;
        let rho0 = self.forward(theta, ch0, None);
        let rho1 = self.forward(theta, ch1, None);
        Ok(0.5 * (half_weight(&rho0, 0) + half_weight(&rho1, 1)))
    }

    /// Success probability and its gradient.
    pub fn success_prob_and_gradient(
        &self,
        theta: &[f64],
        ch0: &KrausChannel,
        ch1: &KrausChannel,
    ) -> Result<(f64, Vec<f64>)> {
        self.check(theta, ch0)?;
        self.check(theta, ch1)?;
        let mut grad = vec![0.0; self.param_count];
        let mut value = 0.0;
        for (outcome, ch) in [(0, ch0), (1, ch1)] {
            value += 0.5 * self.backprop_outcome(theta, ch, outcome, &mut grad);
        }
        Ok((value, grad))
    }

    /// Returns `Tr(Π_outcome ρ_out)` and adds half its gradient to `grad`.
    fn backprop_outcome(&self, theta: &[f64], ch: &KrausChannel, outcome: usize, grad: &mut [f64]) -> f64 {
        let mut states = Vec::new();
        let out = self.forward(theta, ch, Some(&mut states));
        let value = half_weight(&out, outcome);
        let d = out.nrows();
        let mut obs = ComplexMatrix::zeros(d, d);
        let range = if outcome == 0 { 0..d / 2 } else { d / 2..d };
        range.for_each(|j| obs[(j, j)] = crate::qcore::c(0.5, 0.0));
        let adjoint_kraus: Vec<ComplexMatrix> = ch.kraus().iter().map(|k| k.adjoint()).collect();
        let mut n = self.output_qubits;
        for st in self.stages.iter().rev() {
            match st {
                Stage::Unitary { circuit, offset } => {
                    let mut rho = states.pop().expect("one stored state per block");
                    let s = circuit.param_count();
                    circuit.backprop(&theta[*offset..offset + s], &mut rho, &mut obs, &mut grad[*offset..offset + s]);
                }
                Stage::Channel { start } => {
                    obs = kernels::apply_kraus_local(&obs, &adjoint_kraus, n, *start, self.out_q, self.in_q);
                    n = n - self.out_q + self.in_q;
                }
                Stage::Fresh { count } => {
                    obs = kernels::project_zero_front(&obs, *count);
                    n -= count;
                }
            }
        }
        value
    }
}

/// `Tr(Π_outcome ρ)` for the half-split POVM, read off the diagonal.
fn half_weight(m: &ComplexMatrix, outcome: usize) -> f64 {
    let d = m.nrows();
    let range = if outcome == 0 { 0..d / 2 } else { d / 2..d };
    range.map(|j| m[(j, j)].re).sum()
}

pub fn parallel_output(theta: &[f64], ch: &KrausChannel, p: usize, r: usize, l: usize) -> Result<DensityMatrix> {
    let spec = StrategySpec::new(Strategy::Parallel, p, r, l);
    Discriminator::for_channels(&spec, ch, ch)?.output(theta, ch)
}

pub fn sequential_output(theta: &[f64], ch: &KrausChannel, p: usize, r: usize, l: usize) -> Result<DensityMatrix> {
    let spec = StrategySpec::new(Strategy::Sequential, p, r, l);
    Discriminator::for_channels(&spec, ch, ch)?.output(theta, ch)
}

pub fn success_prob(theta: &[f64], ch0: &KrausChannel, ch1: &KrausChannel, spec: &StrategySpec) -> Result<f64> {
    Discriminator::for_channels(spec, ch0, ch1)?.success_prob(theta, ch0, ch1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartResult {
    pub restart: usize,
    /// `None` when the restart was aborted on a non-finite objective.
    pub value: Option<f64>,
    pub params: Vec<f64>,
    pub iterations: usize,
    pub termination: Option<Termination>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub best_value: f64,
    pub best_params: Vec<f64>,
    /// Success probability after each iteration of the winning restart.
    pub history: Vec<f64>,
    pub per_restart: Vec<RestartResult>,
    pub wall_time: f64,
}

/// Where each restart starts.
#[derive(Debug, Clone)]
pub enum Init<'a> {
    /// Uniform in `[0, 2π)` from the stream keyed by `(seed, path, restart)`.
    Random { path: &'a [u64] },
    /// One starting point per restart.
    Given(&'a [Vec<f64>]),
}

pub fn train(ch0: &KrausChannel, ch1: &KrausChannel, spec: &StrategySpec) -> Result<TrainReport> {
    train_with(ch0, ch1, spec, Init::Random { path: &[] }, &LbfgsConfig::default())
}

/// Multi-restart maximization of the success probability.
pub fn train_with(
    ch0: &KrausChannel,
    ch1: &KrausChannel,
    spec: &StrategySpec,
    init: Init<'_>,
    cfg: &LbfgsConfig,
) -> Result<TrainReport> {
    if spec.restarts == 0 {
        return Err(contract_err!("training needs at least one restart"));
    }
    let disc = Discriminator::for_channels(spec, ch0, ch1)?;
    let s = disc.param_count();
    let starts: Vec<Vec<f64>> = match init {
        Init::Random { path } => (0..spec.restarts)
            .map(|k| {
                let mut full = path.to_vec();
                full.push(k as u64);
                let mut rng = seeds::task_rng(spec.seed, &full);
                (0..s).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect()
            })
            .collect(),
        Init::Given(points) => {
            if points.len() != spec.restarts || points.iter().any(|p| p.len() != s) {
                return Err(shape_err!("need {} starting points of length {s}", spec.restarts));
            }
            points.to_vec()
        }
    };
    let clock = Instant::now();
    let runs: Vec<(RestartResult, Vec<f64>)> = starts
        .into_par_iter()
        .enumerate()
        .map(|(k, x0)| {
            let t0 = Instant::now();
            let objective = |x: &[f64]| {
                let (v, g) = disc.success_prob_and_gradient(x, ch0, ch1).expect("checked dimensions");
                (-v, g.into_iter().map(|z| -z).collect())
            };
            match optim::minimize(objective, &x0, cfg) {
                Ok(m) => {
                    let history = m.history.iter().map(|v| -v).collect();
                    let res = RestartResult {
                        restart: k,
                        value: Some(-m.value),
                        params: m.x,
                        iterations: m.iterations,
                        termination: Some(m.termination),
                        seconds: t0.elapsed().as_secs_f64(),
                    };
                    (res, history)
                }
                Err(e) => {
                    log::warn!("restart {k} aborted: {e}");
                    let res = RestartResult {
                        restart: k,
                        value: None,
                        params: x0,
                        iterations: 0,
                        termination: None,
                        seconds: t0.elapsed().as_secs_f64(),
                    };
                    (res, Vec::new())
                }
            }
        })
        .collect();
    let best = runs
        .iter()
        .filter_map(|(r, h)| r.value.map(|v| (v, r, h)))
        .fold(None::<(f64, &RestartResult, &Vec<f64>)>, |acc, cur| match acc {
            Some(a) if a.0 >= cur.0 => Some(a),
            _ => Some(cur),
        })
        .ok_or_else(|| crate::Error::Numerical("every restart was aborted".into()))?;
    Ok(TrainReport {
        best_value: best.0,
        best_params: best.1.params.clone(),
        history: best.2.clone(),
        wall_time: clock.elapsed().as_secs_f64(),
        per_restart: runs.iter().map(|(r, _)| r.clone()).collect(),
    })
}

/// `(0.0, 0.1), (0.1, 0.2), …, (0.4, 0.5)`.
pub fn forward_pairs() -> Vec<(f64, f64)> {
    (0..5).map(|k| (k as f64 / 10.0, (k + 1) as f64 / 10.0)).collect()
}

/// `(0.9, 1.0), (0.8, 0.9), …, (0.5, 0.6)`.
pub fn backward_pairs() -> Vec<(f64, f64)> {
    (5..10).rev().map(|k| (k as f64 / 10.0, (k + 1) as f64 / 10.0)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub alpha0: f64,
    pub alpha1: f64,
    pub report: TrainReport,
}

/// Trains on depolarizing pairs in the given order. With `warm_start`, the
/// restart `k` of each pair after the first starts from the optimum of
/// restart `k` on the previous pair; otherwise every pair starts at random.
pub fn sweep_depolarizing(spec: &StrategySpec, pairs: &[(f64, f64)], warm_start: bool) -> Result<Vec<SweepPoint>> {
    sweep_depolarizing_with(spec, pairs, warm_start, &LbfgsConfig::default())
}

pub fn sweep_depolarizing_with(
    spec: &StrategySpec,
    pairs: &[(f64, f64)],
    warm_start: bool,
    cfg: &LbfgsConfig,
) -> Result<Vec<SweepPoint>> {
    let mut out: Vec<SweepPoint> = Vec::with_capacity(pairs.len());
    for (idx, &(a0, a1)) in pairs.iter().enumerate() {
        let ch0 = KrausChannel::depolarizing(a0)?;
        let ch1 = KrausChannel::depolarizing(a1)?;
        let report = match out.last() {
            Some(prev) if warm_start => {
                let starts: Vec<Vec<f64>> = prev.report.per_restart.iter().map(|r| r.params.clone()).collect();
                train_with(&ch0, &ch1, spec, Init::Given(&starts), cfg)?
            }
            _ => train_with(&ch0, &ch1, spec, Init::Random { path: &[idx as u64] }, cfg)?,
        };
        out.push(SweepPoint { alpha0: a0, alpha1: a1, report });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::gradient;
    use crate::qcore::identity;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_theta(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect()
    }

    fn max_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn half_povm() {
        let p = povm_half(2).unwrap();
        assert_eq!(p.elements()[0][(0, 0)], ONE);
        assert_eq!(p.elements()[1][(1, 1)], ONE);
        let p = povm_half(4).unwrap();
        assert!(max_diff(&(&p.elements()[0] + &p.elements()[1]), &identity(4)) < 1e-15);
        assert_eq!(crate::qcore::trace(&p.elements()[0]).re, 2.0);
        assert!(povm_half(3).is_err());
    }

    #[test]
    fn parameter_counts_and_register_sizes() {
        let eb = KrausChannel::eb_a();
        let par = Discriminator::for_channels(&StrategySpec::new(Strategy::Parallel, 2, 0, 5), &eb, &eb).unwrap();
        assert_eq!(par.param_count(), 3 * 4 * 5 + 3 * 2 * 5);
        assert_eq!(par.output_qubits(), 2);
        let seq = Discriminator::for_channels(&StrategySpec::new(Strategy::Sequential, 2, 0, 1), &eb, &eb).unwrap();
        assert_eq!(seq.param_count(), 6 + 6 + 3);
        let dep = KrausChannel::depolarizing(0.1).unwrap();
        let seq = Discriminator::for_channels(&StrategySpec::new(Strategy::Sequential, 2, 4, 14), &dep, &dep).unwrap();
        assert_eq!(seq.param_count(), 3 * 210);
    }

    #[test]
    fn eb_parallel_output_dim() {
        let eb = KrausChannel::eb_b();
        let s = Discriminator::for_channels(&StrategySpec::new(Strategy::Parallel, 2, 0, 1), &eb, &eb).unwrap();
        let theta = vec![0.3; s.param_count()];
        let out = parallel_output(&theta, &eb, 2, 0, 1).unwrap();
        assert_eq!(out.dim(), 4);
        crate::qcore::validate_density(out.matrix()).unwrap();
    }

    #[test]
    fn identity_channel_at_zero_angles_returns_ground_state() {
        let id = KrausChannel::identity(2);
        for p in 1..=3 {
            let disc = Discriminator::for_channels(&StrategySpec::new(Strategy::Sequential, p, 1, 1), &id, &id).unwrap();
            let theta = vec![0.0; disc.param_count()];
            let out = disc.output(&theta, &id).unwrap();
            assert!(max_diff(out.matrix(), DensityMatrix::basis(4, 0).matrix()) < 1e-15);
        }
    }

    #[test]
    fn fully_depolarizing_output_is_maximally_mixed() {
        let dep = KrausChannel::depolarizing(0.75).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let theta = random_theta(6, &mut rng);
        let out = parallel_output(&theta, &dep, 1, 0, 1).unwrap();
        assert!(max_diff(out.matrix(), DensityMatrix::maximally_mixed(2).matrix()) < 1e-14);
    }

    #[test]
    fn sequential_p1_equals_parallel_p1() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for ch in [KrausChannel::eb_a(), KrausChannel::depolarizing(0.3).unwrap()] {
            let disc = Discriminator::for_channels(&StrategySpec::new(Strategy::Parallel, 1, 1, 2), &ch, &ch).unwrap();
            let theta = random_theta(disc.param_count(), &mut rng);
            let a = parallel_output(&theta, &ch, 1, 1, 2).unwrap();
            let b = sequential_output(&theta, &ch, 1, 1, 2).unwrap();
            assert!(max_diff(a.matrix(), b.matrix()) < 1e-15);
        }
    }

    #[test]
    fn pipeline_matches_dense_construction() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let eb = KrausChannel::eb_a();
        let spec = StrategySpec::new(Strategy::Sequential, 2, 1, 1);
        let disc = Discriminator::for_channels(&spec, &eb, &eb).unwrap();
        let theta = random_theta(disc.param_count(), &mut rng);
        let (u0, u1, u2) = (
            ParamCircuit::hea(3, 1).unwrap().unitary(&theta[0..9]).unwrap(),
            ParamCircuit::hea(3, 1).unwrap().unitary(&theta[9..18]).unwrap(),
            ParamCircuit::hea(2, 1).unwrap().unitary(&theta[18..24]).unwrap(),
        );
        let ext = eb.extend_identity(1).unwrap();
        let mut m = DensityMatrix::basis(8, 0).into_matrix();
        m = &u0 * m * u0.adjoint();
        m = ext.apply_matrix(&m);
        m = kernels::prepend_zero_qubits(&m, 1);
        m = &u1 * m * u1.adjoint();
        m = ext.apply_matrix(&m);
        m = &u2 * m * u2.adjoint();
        assert!(max_diff(disc.output(&theta, &eb).unwrap().matrix(), &m) < 1e-13);
    }

    #[test]
    fn identical_channels_give_one_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let dep = KrausChannel::depolarizing(0.2).unwrap();
        let spec = StrategySpec::new(Strategy::Parallel, 2, 1, 2);
        let disc = Discriminator::for_channels(&spec, &dep, &dep).unwrap();
        for _ in 0..20 {
            let theta = random_theta(disc.param_count(), &mut rng);
            assert!((disc.success_prob(&theta, &dep, &dep).unwrap() - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_matches_shift_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let cases = [
            (KrausChannel::eb_a(), KrausChannel::eb_b(), StrategySpec::new(Strategy::Sequential, 2, 1, 1)),
            (KrausChannel::eb_a(), KrausChannel::eb_b(), StrategySpec::new(Strategy::Parallel, 2, 0, 1)),
            (
                KrausChannel::depolarizing(0.1).unwrap(),
                KrausChannel::depolarizing(0.4).unwrap(),
                StrategySpec::new(Strategy::Parallel, 2, 1, 2),
            ),
        ];
        for (c0, c1, spec) in cases {
            let disc = Discriminator::for_channels(&spec, &c0, &c1).unwrap();
            let theta = random_theta(disc.param_count(), &mut rng);
            let (v, g) = disc.success_prob_and_gradient(&theta, &c0, &c1).unwrap();
            let f = |t: &[f64]| disc.success_prob(t, &c0, &c1).unwrap();
            assert!((v - f(&theta)).abs() < 1e-14);
            let oracle = gradient(f, &theta, &disc.slot_kinds());
            for (a, b) in g.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn eb_single_use_training() {
        let spec = StrategySpec::new(Strategy::Parallel, 1, 0, 1).with_restarts(4).with_seed(3);
        let report = train(&KrausChannel::eb_a(), &KrausChannel::eb_b(), &spec).unwrap();
        assert!((report.best_value - 0.9268).abs() < 5e-3, "{}", report.best_value);
        assert!(report.history.windows(2).all(|w| w[1] >= w[0] - 1e-15));
        assert_eq!(report.per_restart.len(), 4);
        let again = train(&KrausChannel::eb_a(), &KrausChannel::eb_b(), &spec).unwrap();
        assert_eq!(again.best_params, report.best_params);
    }

    #[test]
    fn pair_orders() {
        assert_eq!(forward_pairs().first(), Some(&(0.0, 0.1)));
        assert_eq!(forward_pairs().last(), Some(&(0.4, 0.5)));
        assert_eq!(backward_pairs().first(), Some(&(0.9, 1.0)));
        assert_eq!(backward_pairs().last(), Some(&(0.5, 0.6)));
    }
}
