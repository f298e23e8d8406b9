//! Variational binary classifier of depolarizing channels.

use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::ParamCircuit;
use crate::channels::KrausChannel;
use crate::error::{contract_err, shape_err, Error, Result};
use crate::optim::{self, LbfgsConfig};
use crate::qcore::{self, random_mixed_state, ComplexMatrix, DensityMatrix};
use crate::seeds;

pub const DEFAULT_RESTARTS: usize = 5;
pub const DEFAULT_SIZE: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnsatzId {
    U1,
    U2,
    U3,
}

impl AnsatzId {
    pub fn circuit(self) -> ParamCircuit {
        match self {
            AnsatzId::U1 => ParamCircuit::u1(),
            AnsatzId::U2 => ParamCircuit::u2(),
            AnsatzId::U3 => ParamCircuit::u3(),
        }
    }

    pub fn pairing(self) -> Pairing {
        match self {
            AnsatzId::U3 => Pairing::OutputOnly,
            _ => Pairing::Paired,
        }
    }

    /// `σz⊗σz` for the two-qubit circuits, `σz` for U3.
    pub fn observable(self) -> ComplexMatrix {
        match self {
            AnsatzId::U3 => qcore::pauli_z(),
            _ => qcore::tensor(&qcore::pauli_z(), &qcore::pauli_z()).expect("4x4"),
        }
    }
}

impl std::fmt::Display for AnsatzId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AnsatzId::U1 => "u1",
            AnsatzId::U2 => "u2",
            AnsatzId::U3 => "u3",
        })
    }
}

impl FromStr for AnsatzId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "u1" => Ok(AnsatzId::U1),
            "u2" => Ok(AnsatzId::U2),
            "u3" => Ok(AnsatzId::U3),
            _ => Err(contract_err!("unknown ansatz '{s}' (expected u1, u2 or u3)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pairing {
    /// `Φ(α_y)[ρ] ⊗ ρ`
    Paired,
    /// `Φ(α_y)[ρ]`
    OutputOnly,
}

#[derive(Debug, Clone)]
pub struct ClassifierDataset {
    pub items: Vec<(DensityMatrix, u8)>,
    pub pairing: Pairing,
    pub alpha0: f64,
    pub alpha1: f64,
    pub seed: u64,
}

impl ClassifierDataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.items.iter().map(|(_, y)| *y).collect()
    }
}

/// Fair-coin labels, Hilbert-Schmidt random inputs.
pub fn make_dataset(alpha0: f64, alpha1: f64, n: usize, pairing: Pairing, seed: u64) -> Result<ClassifierDataset> {
    let channels = [KrausChannel::depolarizing(alpha0)?, KrausChannel::depolarizing(alpha1)?];
    let mut rng = seeds::task_rng(seed, &[]);
    let mut items = Vec::with_capacity(n);
    for _ in 0..n {
        let y = u8::from(rng.gen_bool(0.5));
        let rho = random_mixed_state(2, &mut rng);
        let out = channels[y as usize].apply(&rho)?;
        let state = match pairing {
            Pairing::Paired => out.tensor(&rho)?,
            Pairing::OutputOnly => out,
        };
        items.push((state, y));
    }
    Ok(ClassifierDataset { items, pairing, alpha0, alpha1, seed })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedClassifier {
    pub ansatz: AnsatzId,
    pub theta: Vec<f64>,
    /// Predictions `≤ b` are labelled 0.
    pub b: f64,
    pub train_accuracy: f64,
    pub loss: f64,
}

/// `½(1 + ⟨O⟩)` on `U(θ)ρU(θ)†`.
pub fn prediction(ansatz: AnsatzId, theta: &[f64], state: &DensityMatrix) -> Result<f64> {
    let circuit = ansatz.circuit();
    if state.dim() != circuit.dim() {
        return Err(shape_err!("{ansatz} expects dim {}, got {}", circuit.dim(), state.dim()));
    }
    let out = circuit.apply(theta, state)?;
    Ok(0.5 * (1.0 + qcore::expectation(&out, &ansatz.observable())?))
}

pub fn predict_value(clf: &TrainedClassifier, state: &DensityMatrix) -> Result<f64> {
    prediction(clf.ansatz, &clf.theta, state)
}

/// Predictions for many states from a single Heisenberg-picture observable.
fn predictions_fast(circuit: &ParamCircuit, obs: &ComplexMatrix, theta: &[f64], states: &[&ComplexMatrix]) -> Vec<f64> {
    let u = circuit.unitary(theta).expect("checked length");
    let pulled = u.adjoint() * obs * &u;
    states
        .iter()
        .map(|rho| 0.5 * (1.0 + qcore::trace_of_product(&pulled, rho).expect("same dims").re))
        .collect()
}

fn check_pairing(ansatz: AnsatzId, data: &ClassifierDataset) -> Result<()> {
    if ansatz.pairing() != data.pairing {
        return Err(contract_err!("{ansatz} needs {:?} data, got {:?}", ansatz.pairing(), data.pairing));
    }
    Ok(())
}

/// Least-squares training followed by the threshold search.
pub fn train_classifier(ansatz: AnsatzId, data: &ClassifierDataset, restarts: usize, seed: u64) -> Result<TrainedClassifier> {
    check_pairing(ansatz, data)?;
    if data.is_empty() {
        return Err(contract_err!("empty training set"));
    }
    let circuit = ansatz.circuit();
    let obs = ansatz.observable();
    let states: Vec<&ComplexMatrix> = data.items.iter().map(|(s, _)| s.matrix()).collect();
    let labels: Vec<f64> = data.items.iter().map(|(_, y)| f64::from(*y)).collect();
    let d = circuit.dim();
    let loss_and_grad = |theta: &[f64]| -> (f64, Vec<f64>) {
        let preds = predictions_fast(&circuit, &obs, theta, &states);
        let mut weighted = ComplexMatrix::zeros(d, d);
        let mut loss = 0.0;
        for ((rho, y), p) in states.iter().zip(&labels).zip(&preds) {
            loss += (y - p) * (y - p);
            weighted -= rho.scale(y - p);
        }
        let (_, grad) = circuit.expectation_and_gradient(theta, &weighted, &obs).expect("checked dims");
        (loss, grad)
    };
    let cfg = LbfgsConfig::default();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for k in 0..restarts.max(1) {
        let mut rng = seeds::task_rng(seed, &[k as u64]);
        let x0: Vec<f64> = (0..circuit.param_count()).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        match optim::minimize(loss_and_grad, &x0, &cfg) {
            Ok(m) if best.as_ref().map_or(true, |b| m.value < b.0) => best = Some((m.value, m.x)),
            Ok(_) => {}
            Err(e) => log::warn!("classifier restart {k} aborted: {e}"),
        }
    }
    let (loss, theta) = best.ok_or_else(|| Error::Numerical("every classifier restart was aborted".into()))?;
    let preds = predictions_fast(&circuit, &obs, &theta, &states);
    let ys = data.labels();
    let (b, train_accuracy) = find_threshold(&preds, &ys)?;
    Ok(TrainedClassifier { ansatz, theta, b, train_accuracy, loss })
}

/// Best cut of the sorted training predictions.
///
/// Cut `t` assigns the `t` smallest predictions to class 0; only cuts between
/// distinct values are realizable. Ties go to the smallest `t`. Returns `b`
/// and the training accuracy at `b`. For `t = 0`, `b` lies just below the
/// smallest prediction.
pub fn find_threshold(predictions: &[f64], labels: &[u8]) -> Result<(f64, f64)> {
    if predictions.len() != labels.len() {
        return Err(shape_err!("{} predictions for {} labels", predictions.len(), labels.len()));
    }
    if predictions.is_empty() {
        return Err(contract_err!("no predictions"));
    }
    if predictions.iter().any(|p| !p.is_finite()) {
        return Err(Error::Numerical("non-finite prediction".into()));
    }
    let mut order: Vec<usize> = (0..predictions.len()).collect();
    order.sort_by(|&a, &b| predictions[a].total_cmp(&predictions[b]));
    let n = order.len();
    let ones_total = labels.iter().filter(|&&y| y == 1).count();
    let (mut zeros_below, mut ones_below) = (0usize, 0usize);
    let mut best = (ones_total, 0usize);
    for t in 1..=n {
        if labels[order[t - 1]] == 1 {
            ones_below += 1;
        } else {
            zeros_below += 1;
        }
        let boundary = t == n || predictions[order[t - 1]] < predictions[order[t]];
        let correct = zeros_below + ones_total - ones_below;
        if boundary && correct > best.0 {
            best = (correct, t);
        }
    }
    let b = match best.1 {
        0 => {
            let lo = predictions[order[0]];
            lo - 1e-12 * lo.abs().max(1.0)
        }
        t => predictions[order[t - 1]],
    };
    Ok((b, best.0 as f64 / n as f64))
}

pub fn accuracy(predictions: &[f64], labels: &[u8], b: f64) -> f64 {
    let correct = predictions.iter().zip(labels).filter(|(p, y)| u8::from(**p > b) == **y).count();
    correct as f64 / predictions.len().max(1) as f64
}

pub fn evaluate(clf: &TrainedClassifier, test: &ClassifierDataset) -> Result<f64> {
    check_pairing(clf.ansatz, test)?;
    let circuit = clf.ansatz.circuit();
    circuit.check_params(&clf.theta)?;
    let states: Vec<&ComplexMatrix> = test.items.iter().map(|(s, _)| s.matrix()).collect();
    let preds = predictions_fast(&circuit, &clf.ansatz.observable(), &clf.theta, &states);
    Ok(accuracy(&preds, &test.labels(), clf.b))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatmapCell {
    pub ansatz: AnsatzId,
    pub alpha0: f64,
    pub alpha1: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub b: f64,
    pub seconds: f64,
}

/// One trained and tested classifier per grid cell. Cell `(i, j)` draws its
/// data and restarts from streams keyed by `(seed, [i, j, ·])`.
pub fn classify_cell(
    ansatz: AnsatzId,
    (i, j): (usize, usize),
    (alpha0, alpha1): (f64, f64),
    n_train: usize,
    n_test: usize,
    restarts: usize,
    seed: u64,
) -> Result<HeatmapCell> {
    let t0 = Instant::now();
    let (i, j) = (i as u64, j as u64);
    let train = make_dataset(alpha0, alpha1, n_train, ansatz.pairing(), seeds::derive_seed(seed, &[i, j, 0]))?;
    let test = make_dataset(alpha0, alpha1, n_test, ansatz.pairing(), seeds::derive_seed(seed, &[i, j, 1]))?;
    let clf = train_classifier(ansatz, &train, restarts, seeds::derive_seed(seed, &[i, j, 2]))?;
    let test_acc = evaluate(&clf, &test)?;
    Ok(HeatmapCell {
        ansatz,
        alpha0,
        alpha1,
        train_acc: clf.train_accuracy,
        test_acc,
        b: clf.b,
        seconds: t0.elapsed().as_secs_f64(),
    })
}

/// Row-major over `(α0, α1) ∈ grid × grid`.
pub fn accuracy_heatmap(
    ansatz: AnsatzId,
    grid: &[f64],
    n_train: usize,
    n_test: usize,
    restarts: usize,
    seed: u64,
) -> Result<Vec<HeatmapCell>> {
    let cells: Vec<(usize, usize)> = (0..grid.len()).flat_map(|i| (0..grid.len()).map(move |j| (i, j))).collect();
    cells
        .into_par_iter()
        .map(|(i, j)| classify_cell(ansatz, (i, j), (grid[i], grid[j]), n_train, n_test, restarts, seed))
        .collect()
}

/// `0.0, 0.1, …, 1.0`.
pub fn default_grid() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}
