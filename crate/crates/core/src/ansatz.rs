//! Parameterized circuits: the hardware-efficient ansatz, the three
//! classifier circuits, and gradients.
//!
//! Rotations follow `R_σ(θ) = exp(-iθσ)`, so every bare Pauli rotation has
//! period π on the induced channel and the parameter-shift spacing is π/4.

use crate::error::{contract_err, shape_err, Error, Result};
use crate::qcore::kernels::{self, Gate2, GATE_IDENTITY};
use crate::qcore::{c, identity, ComplexMatrix, DensityMatrix, MAX_DIM, ONE, ZERO};

/// Step for central finite differences.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn pauli(self) -> Gate2 {
        match self {
            Axis::X => [[ZERO, ONE], [ONE, ZERO]],
            Axis::Y => [[ZERO, c(0.0, -1.0)], [c(0.0, 1.0), ZERO]],
            Axis::Z => [[ONE, ZERO], [ZERO, -ONE]],
        }
    }
}

/// `exp(-iθσ) = cos θ·I - i sin θ·σ`.
pub fn rotation(axis: Axis, theta: f64) -> Gate2 {
    let (s, co) = theta.sin_cos();
    let p = axis.pauli();
    let mut g = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            g[i][j] = GATE_IDENTITY[i][j] * co + p[i][j] * c(0.0, -s);
        }
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Rot { axis: Axis, target: usize, slot: usize },
    CRot { axis: Axis, control: usize, target: usize, slot: usize },
    Cx { control: usize, target: usize },
}

impl Gate {
    pub fn slot(&self) -> Option<usize> {
        match *self {
            Gate::Rot { slot, .. } | Gate::CRot { slot, .. } => Some(slot),
            Gate::Cx { .. } => None,
        }
    }
}

/// How the gradient of a parameter slot can be evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotKind {
    /// Bare Pauli rotation: exact two-term parameter shift.
    Pauli,
    /// Anything else: central finite differences.
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamCircuit {
    qubits: usize,
    gates: Vec<Gate>,
    param_count: usize,
}

impl ParamCircuit {
    /// Validates wiring and requires every slot `0..s` to be used exactly once.
    pub fn new(qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        if qubits == 0 || (1usize << qubits.min(63)) > MAX_DIM {
            return Err(Error::Size(format!("circuit on {qubits} qubits")));
        }
        let mut seen = Vec::new();
        for g in &gates {
            let (target, control) = match *g {
                Gate::Rot { target, .. } => (target, None),
                Gate::CRot { control, target, .. } | Gate::Cx { control, target } => (target, Some(control)),
            };
            if target >= qubits || control.is_some_and(|c| c >= qubits || c == target) {
                return Err(shape_err!("gate {g:?} does not fit {qubits} qubits"));
            }
            if let Some(s) = g.slot() {
                if s >= seen.len() {
                    seen.resize(s + 1, false);
                }
                if seen[s] {
                    return Err(contract_err!("parameter slot {s} used twice"));
                }
                seen[s] = true;
            }
        }
        if let Some(s) = seen.iter().position(|&b| !b) {
            return Err(contract_err!("parameter slot {s} unused"));
        }
        Ok(Self { qubits, gates, param_count: seen.len() })
    }

    /// `l` layers of per-qubit `Rx Rz Rx` followed by a CX ring.
    pub fn hea(q: usize, l: usize) -> Result<Self> {
        if q == 0 || l == 0 {
            return Err(contract_err!("hardware-efficient ansatz needs q >= 1 and l >= 1"));
        }
        let mut gates = Vec::with_capacity(l * 4 * q);
        let mut slot = 0;
        for _ in 0..l {
            for target in 0..q {
                for axis in [Axis::X, Axis::Z, Axis::X] {
                    gates.push(Gate::Rot { axis, target, slot });
                    slot += 1;
                }
            }
            match q {
                1 => {}
                2 => gates.push(Gate::Cx { control: 0, target: 1 }),
                _ => (0..q).for_each(|i| gates.push(Gate::Cx { control: i, target: (i + 1) % q })),
            }
        }
        Self::new(q, gates)
    }

    /// Local `Rx Rz Rx` on each of two qubits, then a controlled Y rotation.
    pub fn u1() -> Self {
        let mut gates = Vec::new();
        for (target, base) in [(0, 0), (1, 3)] {
            for (k, axis) in [Axis::X, Axis::Z, Axis::X].into_iter().enumerate() {
                gates.push(Gate::Rot { axis, target, slot: base + k });
            }
        }
        gates.push(Gate::CRot { axis: Axis::Y, control: 0, target: 1, slot: 6 });
        Self::new(2, gates).expect("valid circuit")
    }

    /// Local `Rx Rz` on each of two qubits.
    pub fn u2() -> Self {
        let gates = vec![
            Gate::Rot { axis: Axis::X, target: 0, slot: 0 },
            Gate::Rot { axis: Axis::Z, target: 0, slot: 1 },
            Gate::Rot { axis: Axis::X, target: 1, slot: 2 },
            Gate::Rot { axis: Axis::Z, target: 1, slot: 3 },
        ];
        Self::new(2, gates).expect("valid circuit")
    }

    /// Single-qubit `Rx Rz`.
    pub fn u3() -> Self {
        let gates = vec![
            Gate::Rot { axis: Axis::X, target: 0, slot: 0 },
            Gate::Rot { axis: Axis::Z, target: 0, slot: 1 },
        ];
        Self::new(1, gates).expect("valid circuit")
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    pub fn slot_kinds(&self) -> Vec<SlotKind> {
        let mut kinds = vec![SlotKind::Other; self.param_count];
        for g in &self.gates {
            if let Gate::Rot { slot, .. } = *g {
                kinds[slot] = SlotKind::Pauli;
            }
        }
        kinds
    }

    pub fn check_params(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.param_count {
            return Err(shape_err!("expected {} parameters, got {}", self.param_count, theta.len()));
        }
        Ok(())
    }

    pub fn unitary(&self, theta: &[f64]) -> Result<ComplexMatrix> {
        self.check_params(theta)?;
        let n = self.qubits;
        let mut u = identity(self.dim());
        for g in &self.gates {
            match *g {
                Gate::Rot { axis, target, slot } => {
                    kernels::apply_left(&mut u, n, target, None, &rotation(axis, theta[slot]))
                }
                Gate::CRot { axis, control, target, slot } => {
                    kernels::apply_left(&mut u, n, target, Some(control), &rotation(axis, theta[slot]))
                }
                Gate::Cx { control, target } => {
                    kernels::apply_left(&mut u, n, target, Some(control), &Axis::X.pauli())
                }
            }
        }
        Ok(u)
    }

    /// `m ← U(θ) m U(θ)†` in place. Panics if `theta` or `m` is mis-sized.
    pub fn conjugate_in_place(&self, theta: &[f64], m: &mut ComplexMatrix) {
        assert_eq!(theta.len(), self.param_count);
        assert_eq!(m.shape(), (self.dim(), self.dim()));
        let n = self.qubits;
        let mut i = 0;
        while i < self.gates.len() {
            match self.gates[i] {
                Gate::Rot { target, .. } => {
                    let mut fused = GATE_IDENTITY;
                    while let Some(&Gate::Rot { axis, target: t, slot }) = self.gates.get(i) {
                        if t != target {
                            break;
                        }
                        fused = kernels::gate_mul(&rotation(axis, theta[slot]), &fused);
                        i += 1;
                    }
                    kernels::conjugate(m, n, target, None, &fused);
                    continue;
                }
                Gate::CRot { axis, control, target, slot } => {
                    kernels::conjugate(m, n, target, Some(control), &rotation(axis, theta[slot]))
                }
                Gate::Cx { control, target } => kernels::conjugate_cx(m, n, control, target),
            }
            i += 1;
        }
    }

    pub fn apply(&self, theta: &[f64], rho: &DensityMatrix) -> Result<DensityMatrix> {
        self.check_params(theta)?;
        if rho.dim() != self.dim() {
            return Err(shape_err!("circuit acts on dim {}, state has dim {}", self.dim(), rho.dim()));
        }
        let mut m = rho.matrix().clone();
        self.conjugate_in_place(theta, &mut m);
        Ok(DensityMatrix::from_matrix_unchecked(m))
    }

    /// Reverse-mode sweep for `F = Tr(O·U ρ U†)`.
    ///
    /// On entry `rho` holds the circuit output and `obs` the observable at
    /// the output. On return `rho` holds the circuit input, `obs` the
    /// observable pulled back to the input, and `∂F/∂θ` has been added to
    /// `grad`. `rho` must be Hermitian.
    pub fn backprop(&self, theta: &[f64], rho: &mut ComplexMatrix, obs: &mut ComplexMatrix, grad: &mut [f64]) {
        assert_eq!(theta.len(), self.param_count);
        assert_eq!(grad.len(), self.param_count);
        let n = self.qubits;
        let mut end = self.gates.len();
        while end > 0 {
            match self.gates[end - 1] {
                Gate::Rot { target, .. } => {
                    let mut start = end - 1;
                    while start > 0
                        && matches!(self.gates[start - 1], Gate::Rot { target: t, .. } if t == target)
                    {
                        start -= 1;
                    }
                    let mut r = kernels::reduced_product(rho, obs, n, target, None);
                    let mut fused = GATE_IDENTITY;
                    for g in self.gates[start..end].iter().rev() {
                        let Gate::Rot { axis, slot, .. } = *g else { unreachable!() };
                        grad[slot] += 2.0 * kernels::gate_trace_product(&axis.pauli(), &r).im;
                        let rot = rotation(axis, theta[slot]);
                        r = kernels::gate_mul(&kernels::gate_adjoint(&rot), &kernels::gate_mul(&r, &rot));
                        fused = kernels::gate_mul(&fused, &rot);
                    }
                    kernels::conjugate_by_adjoint(rho, n, target, None, &fused);
                    kernels::conjugate_by_adjoint(obs, n, target, None, &fused);
                    end = start;
                }
                Gate::CRot { axis, control, target, slot } => {
                    let r = kernels::reduced_product(rho, obs, n, target, Some(control));
                    grad[slot] += 2.0 * kernels::gate_trace_product(&axis.pauli(), &r).im;
                    let rot = rotation(axis, theta[slot]);
                    kernels::conjugate_by_adjoint(rho, n, target, Some(control), &rot);
                    kernels::conjugate_by_adjoint(obs, n, target, Some(control), &rot);
                    end -= 1;
                }
                Gate::Cx { control, target } => {
                    kernels::conjugate_cx(rho, n, control, target);
                    kernels::conjugate_cx(obs, n, control, target);
                    end -= 1;
                }
            }
        }
    }

    /// Value and gradient of `Tr(O·U(θ) ρ U(θ)†)` by a single reverse sweep.
    pub fn expectation_and_gradient(
        &self,
        theta: &[f64],
        rho: &ComplexMatrix,
        obs: &ComplexMatrix,
    ) -> Result<(f64, Vec<f64>)> {
        self.check_params(theta)?;
        let d = self.dim();
        if rho.shape() != (d, d) || obs.shape() != (d, d) {
            return Err(shape_err!("operators must be {d}x{d}"));
        }
        let mut state = rho.clone();
        self.conjugate_in_place(theta, &mut state);
        let value = crate::qcore::trace_of_product(obs, &state)?.re;
        let mut o = obs.clone();
        let mut grad = vec![0.0; self.param_count];
        self.backprop(theta, &mut state, &mut o, &mut grad);
        Ok((value, grad))
    }
}

pub fn unitary(circuit: &ParamCircuit, theta: &[f64]) -> Result<ComplexMatrix> {
    circuit.unitary(theta)
}

fn fixed_unitary(circuit: ParamCircuit, theta: &[f64]) -> Result<ComplexMatrix> {
    circuit.unitary(theta)
}

pub fn u1(theta: &[f64]) -> Result<ComplexMatrix> {
    fixed_unitary(ParamCircuit::u1(), theta)
}

pub fn u2(theta: &[f64]) -> Result<ComplexMatrix> {
    fixed_unitary(ParamCircuit::u2(), theta)
}

pub fn u3(theta: &[f64]) -> Result<ComplexMatrix> {
    fixed_unitary(ParamCircuit::u3(), theta)
}

/// Gradient of an arbitrary objective. Slots marked [`SlotKind::Pauli`] use
/// the shift rule `f(θ+π/4) - f(θ-π/4)`; the rest use central differences.
/// Pass an empty `kinds` to use finite differences everywhere.
pub fn gradient<F: Fn(&[f64]) -> f64>(objective: F, theta: &[f64], kinds: &[SlotKind]) -> Vec<f64> {
    let mut x = theta.to_vec();
    (0..theta.len())
        .map(|k| {
            let (h, scale) = match kinds.get(k) {
                Some(SlotKind::Pauli) => (std::f64::consts::FRAC_PI_4, 1.0),
                _ => (FD_STEP, 0.5 / FD_STEP),
            };
            x[k] = theta[k] + h;
            let up = objective(&x);
            x[k] = theta[k] - h;
            let down = objective(&x);
            x[k] = theta[k];
            (up - down) * scale
        })
        .collect()
}

pub fn finite_difference<F: Fn(&[f64]) -> f64>(objective: F, theta: &[f64]) -> Vec<f64> {
    gradient(objective, theta, &[])
}
