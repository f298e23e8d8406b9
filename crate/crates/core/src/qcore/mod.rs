//! Dense complex linear algebra and quantum-state primitives.
//!
//! Qubit ordering: the leftmost tensor factor is qubit 0 and owns the most
//! significant bit of a basis index, so `|q0 q1 … q(n-1)⟩` maps to index
//! `q0·2^(n-1) + … + q(n-1)`.

pub mod kernels;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{contract_err, shape_err, Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

/// Largest matrix dimension any operation will build.
pub const MAX_DIM: usize = 1 << 12;
/// Entrywise tolerance on `|M - M†|`.
pub const TOL_HERM: f64 = 1e-10;
/// Tolerance on `|Tr ρ - 1|`.
pub const TOL_TRACE: f64 = 1e-10;
/// Smallest eigenvalue accepted for a positive semi-definite operator.
pub const TOL_PSD: f64 = -1e-9;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim, dim)
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// Computational basis ket `|index⟩` in dimension `dim`.
pub fn ket(dim: usize, index: usize) -> ComplexVector {
    let mut v = ComplexVector::zeros(dim);
    v[index] = ONE;
    v
}

/// `|a⟩⟨b|`.
pub fn outer(a: &ComplexVector, b: &ComplexVector) -> ComplexMatrix {
    a * b.adjoint()
}

fn check_dim(dim: usize, what: &str) -> Result<()> {
    if dim > MAX_DIM {
        Err(Error::Size(format!("{what} dimension {dim} exceeds cap {MAX_DIM}")))
    } else {
        Ok(())
    }
}

/// Kronecker product `a ⊗ b` (`a` is the more significant factor).
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let rows = a.nrows().checked_mul(b.nrows());
    let cols = a.ncols().checked_mul(b.ncols());
    match (rows, cols) {
        (Some(r), Some(c)) => {
            check_dim(r, "tensor row")?;
            check_dim(c, "tensor column")?;
        }
        _ => return Err(Error::Size("tensor dimensions overflow".into())),
    }
    Ok(a.kronecker(b))
}

/// Largest entrywise deviation `max |M - M†|`.
pub fn hermiticity_defect(m: &ComplexMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn is_hermitian(m: &ComplexMatrix, tol: f64) -> bool {
    hermiticity_defect(m) <= tol
}

fn require_hermitian(m: &ComplexMatrix, what: &str) -> Result<()> {
    let defect = hermiticity_defect(m);
    if defect > TOL_HERM {
        return Err(contract_err!("{what} is not Hermitian (defect {defect:.3e})"));
    }
    Ok(())
}

fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn eigvalsh(h: &ComplexMatrix) -> Result<Vec<f64>> {
    require_hermitian(h, "matrix")?;
    let eig = SymmetricEigen::new(hermitian_part(h));
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Eigendecomposition of a Hermitian matrix; eigenvectors are the columns.
pub fn eigh(h: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    require_hermitian(h, "matrix")?;
    let eig = SymmetricEigen::new(hermitian_part(h));
    Ok((eig.eigenvalues.iter().copied().collect(), eig.eigenvectors))
}

/// `‖h‖₁ = Σ |λ_i|` for Hermitian `h`.
pub fn trace_norm(h: &ComplexMatrix) -> Result<f64> {
    Ok(eigvalsh(h)?.iter().map(|v| v.abs()).sum())
}

pub fn trace(m: &ComplexMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// `Tr(a·b)` without forming the product.
pub fn trace_of_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<C64> {
    if a.ncols() != b.nrows() || a.nrows() != b.ncols() {
        return Err(shape_err!(
            "Tr(AB) with A {}x{} and B {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        ));
    }
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    Ok(acc)
}

/// Reduced operator on the subsystems in `keep` (kept in ascending order).
pub fn partial_trace(m: &ComplexMatrix, dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    let total: usize = dims.iter().product();
    if !m.is_square() || m.nrows() != total {
        return Err(shape_err!(
            "partial trace: subsystem dims {:?} do not match a {}x{} operator",
            dims,
            m.nrows(),
            m.ncols()
        ));
    }
    if let Some(&bad) = keep.iter().find(|&&k| k >= dims.len()) {
        return Err(shape_err!("partial trace: subsystem {bad} out of range"));
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    let keep_dim: usize = kept.iter().map(|&k| dims[k]).product();
    let trace_dim = total / keep_dim;

    // Split every basis index into its (kept, traced) coordinates.
    let mut split = Vec::with_capacity(total);
    for idx in 0..total {
        let mut rem = idx;
        let mut digits = vec![0usize; dims.len()];
        for s in (0..dims.len()).rev() {
            digits[s] = rem % dims[s];
            rem /= dims[s];
        }
        let (mut ki, mut ti) = (0usize, 0usize);
        for (s, &d) in digits.iter().enumerate() {
            if kept.binary_search(&s).is_ok() {
                ki = ki * dims[s] + d;
            } else {
                ti = ti * dims[s] + d;
            }
        }
        split.push((ki, ti));
    }
    let mut groups: Vec<Vec<(usize, usize)>> = vec![Vec::new(); trace_dim];
    for (idx, &(ki, ti)) in split.iter().enumerate() {
        groups[ti].push((idx, ki));
    }
    let mut out = ComplexMatrix::zeros(keep_dim, keep_dim);
    for group in &groups {
        for &(j, kj) in group {
            for &(i, ki) in group {
                out[(ki, kj)] += m[(i, j)];
            }
        }
    }
    Ok(out)
}

/// Hermitian, unit-trace, positive semi-definite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates the density-operator invariants.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        validate_density(&matrix)?;
        Ok(Self { matrix })
    }

    /// Wraps a matrix produced by a trace-preserving, positivity-preserving
    /// pipeline. Invariants are checked only in debug builds.
    pub(crate) fn from_matrix_unchecked(matrix: ComplexMatrix) -> Self {
        debug_assert!(is_hermitian(&matrix, 1e-8), "non-Hermitian state");
        debug_assert!((trace(&matrix).re - 1.0).abs() < 1e-8, "state trace drifted");
        Self { matrix }
    }

    pub fn from_pure(psi: &PureState) -> Self {
        Self { matrix: outer(&psi.amplitudes, &psi.amplitudes) }
    }

    /// `|index⟩⟨index|`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut m = ComplexMatrix::zeros(dim, dim);
        m[(index, index)] = ONE;
        Self { matrix: m }
    }

    /// `|0…0⟩⟨0…0|` on `n` qubits.
    pub fn zero_qubits(n: usize) -> Self {
        Self::basis(1 << n, 0)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { matrix: identity(dim).unscale(dim as f64) }
    }

    /// `|+⟩⟨+|`.
    pub fn plus() -> Self {
        Self::from_pure(&PureState::plus())
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    /// Number of qubits, if the dimension is a power of two.
    pub fn qubits(&self) -> Option<usize> {
        let d = self.dim();
        d.is_power_of_two().then(|| d.trailing_zeros() as usize)
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Bloch vector `(⟨σx⟩, ⟨σy⟩, ⟨σz⟩)` of a single-qubit state.
    pub fn bloch_vector(&self) -> Result<[f64; 3]> {
        if self.dim() != 2 {
            return Err(shape_err!("Bloch vector needs a qubit state, got dim {}", self.dim()));
        }
        let m = &self.matrix;
        Ok([2.0 * m[(0, 1)].re, -2.0 * m[(0, 1)].im, (m[(0, 0)] - m[(1, 1)]).re])
    }

    /// Single-qubit state `(I + r·σ)/2`.
    pub fn from_bloch(r: [f64; 3]) -> Result<Self> {
        let m = ComplexMatrix::from_row_slice(
            2,
            2,
            &[c(1.0 + r[2], 0.0), c(r[0], -r[1]), c(r[0], r[1]), c(1.0 - r[2], 0.0)],
        )
        .scale(0.5);
        Self::new(m)
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        Ok(Self { matrix: tensor(&self.matrix, &other.matrix)? })
    }

    pub fn partial_trace(&self, dims: &[usize], keep: &[usize]) -> Result<DensityMatrix> {
        Ok(Self { matrix: partial_trace(&self.matrix, dims, keep)? })
    }

    pub fn expectation(&self, obs: &ComplexMatrix) -> Result<f64> {
        expectation(self, obs)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        eigvalsh(&self.matrix).map(|v| v[0]).unwrap_or(f64::NEG_INFINITY)
    }
}

/// Checks Hermiticity, unit trace and positivity.
pub fn validate_density(m: &ComplexMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(shape_err!("density matrix must be square, got {}x{}", m.nrows(), m.ncols()));
    }
    check_dim(m.nrows(), "density matrix")?;
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(contract_err!("density matrix has non-finite entries"));
    }
    require_hermitian(m, "density matrix")?;
    let tr = trace(m).re;
    if (tr - 1.0).abs() > TOL_TRACE {
        return Err(contract_err!("density matrix trace {tr} differs from 1"));
    }
    let min = eigvalsh(m)?[0];
    if min < TOL_PSD {
        return Err(contract_err!("density matrix has negative eigenvalue {min:.3e}"));
    }
    Ok(())
}

/// Unit-norm state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: ComplexVector,
}

impl PureState {
    pub fn new(amplitudes: ComplexVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(contract_err!("state vector norm {norm} differs from 1"));
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes a nonzero vector.
    pub fn normalized(amplitudes: ComplexVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(contract_err!("cannot normalize a vector of norm {norm}"));
        }
        Ok(Self { amplitudes: amplitudes.unscale(norm) })
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        Self { amplitudes: ket(dim, index) }
    }

    pub fn plus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self { amplitudes: ComplexVector::from_vec(vec![c(h, 0.0), c(h, 0.0)]) }
    }

    pub fn minus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self { amplitudes: ComplexVector::from_vec(vec![c(h, 0.0), c(-h, 0.0)]) }
    }

    /// `Σ_i |i⟩|i⟩ / √dim` on `dim²` amplitudes.
    pub fn maximally_entangled(dim: usize) -> Self {
        let mut v = ComplexVector::zeros(dim * dim);
        let a = 1.0 / (dim as f64).sqrt();
        for i in 0..dim {
            v[i * dim + i] = c(a, 0.0);
        }
        Self { amplitudes: v }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &ComplexVector {
        &self.amplitudes
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::from_pure(self)
    }
}

/// `Tr(obs·ρ)` for Hermitian `obs`.
pub fn expectation(rho: &DensityMatrix, obs: &ComplexMatrix) -> Result<f64> {
    if obs.nrows() != rho.dim() || obs.ncols() != rho.dim() {
        return Err(shape_err!(
            "observable {}x{} does not act on dim {}",
            obs.nrows(),
            obs.ncols(),
            rho.dim()
        ));
    }
    require_hermitian(obs, "observable")?;
    let v = trace_of_product(obs, rho.matrix())?;
    if v.im.abs() > 1e-10 {
        return Err(Error::Numerical(format!("expectation has imaginary part {:.3e}", v.im)));
    }
    Ok(v.re)
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    c(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Ginibre matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim, dim, |_, _| complex_gaussian(rng))
}

/// Hilbert–Schmidt random mixed state `GG†/Tr(GG†)`.
pub fn random_mixed_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    assert!(dim >= 2, "random_mixed_state needs dim >= 2");
    let g = ginibre(dim, rng);
    let mut m = &g * g.adjoint();
    let tr = trace(&m).re;
    m.unscale_mut(tr);
    DensityMatrix { matrix: hermitian_part(&m) }
}

/// Haar-random pure state (normalized complex Gaussian vector).
pub fn random_pure_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> PureState {
    assert!(dim >= 1, "random_pure_state needs dim >= 1");
    let v = ComplexVector::from_fn(dim, |_, _| complex_gaussian(rng));
    let norm = v.norm();
    PureState { amplitudes: v.unscale(norm) }
}

/// Haar-random unitary from the QR decomposition of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let qr = ginibre(dim, rng).qr();
    let (q, r) = qr.unpack();
    // Fix column phases so the distribution is Haar.
    let mut q = q;
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn assert_close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) {
        assert_eq!(a.shape(), b.shape());
        let diff = (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff <= tol, "matrices differ by {diff}");
    }

    #[test]
    fn tensor_identity_and_paulis() {
        assert_eq!(tensor(&identity(2), &identity(2)).unwrap(), identity(4));
        let zz = tensor(&pauli_z(), &pauli_z()).unwrap();
        let expected = ComplexMatrix::from_diagonal(&ComplexVector::from_vec(vec![
            ONE, -ONE, -ONE, ONE,
        ]));
        assert_eq!(zz, expected);
    }

    #[test]
    fn tensor_basis_ordering() {
        let p0 = DensityMatrix::basis(2, 0);
        let p1 = DensityMatrix::basis(2, 1);
        let m = p0.tensor(&p1).unwrap();
        assert_eq!(m.matrix()[(1, 1)], ONE);
        assert!((trace(m.matrix()) - ONE).norm() < 1e-15);
    }

    #[test]
    fn tensor_rejects_oversized() {
        let big = identity(1 << 7);
        assert!(matches!(tensor(&big, &big), Err(Error::Size(_))));
    }

    #[test]
    fn partial_trace_bell_is_maximally_mixed() {
        let bell = PureState::maximally_entangled(2).to_density();
        let red = bell.partial_trace(&[2, 2], &[0]).unwrap();
        assert_close(red.matrix(), DensityMatrix::maximally_mixed(2).matrix(), 1e-15);
    }

    #[test]
    fn partial_trace_full_system_is_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random_mixed_state(4, &mut rng);
        let t = partial_trace(rho.matrix(), &[2, 2], &[]).unwrap();
        assert_eq!(t.shape(), (1, 1));
        assert!((t[(0, 0)] - ONE).norm() < 1e-12);
    }

    #[test]
    fn partial_trace_shape_error() {
        let rho = DensityMatrix::maximally_mixed(4);
        assert!(matches!(partial_trace(rho.matrix(), &[2, 3], &[0]), Err(Error::Shape(_))));
    }

    #[test]
    fn partial_trace_middle_subsystem() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_mixed_state(2, &mut rng);
        let b = random_mixed_state(3, &mut rng);
        let cst = random_mixed_state(2, &mut rng);
        let abc = a.tensor(&b).unwrap().tensor(&cst).unwrap();
        let rb = abc.partial_trace(&[2, 3, 2], &[1]).unwrap();
        assert_close(rb.matrix(), b.matrix(), 1e-12);
        let rac = abc.partial_trace(&[2, 3, 2], &[2, 0]).unwrap();
        assert_close(rac.matrix(), a.tensor(&cst).unwrap().matrix(), 1e-12);
    }

    #[test]
    fn trace_norm_examples() {
        assert!((trace_norm(&pauli_z()).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(trace_norm(&ComplexMatrix::zeros(3, 3)).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rho = random_mixed_state(5, &mut rng);
        assert!((trace_norm(rho.matrix()).unwrap() - 1.0).abs() < 1e-12);
        let bad = ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
        assert!(matches!(trace_norm(&bad), Err(Error::Contract(_))));
    }

    #[test]
    fn expectation_examples() {
        let z = pauli_z();
        assert!((expectation(&DensityMatrix::basis(2, 0), &z).unwrap() - 1.0).abs() < 1e-15);
        assert!(expectation(&DensityMatrix::maximally_mixed(2), &z).unwrap().abs() < 1e-15);
        assert!((expectation(&DensityMatrix::plus(), &pauli_x()).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            expectation(&DensityMatrix::maximally_mixed(4), &z),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn random_states_are_reproducible() {
        let a = random_mixed_state(4, &mut ChaCha8Rng::seed_from_u64(11));
        let b = random_mixed_state(4, &mut ChaCha8Rng::seed_from_u64(11));
        let bytes = |m: &DensityMatrix| {
            m.matrix().iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect::<Vec<_>>()
        };
        assert_eq!(bytes(&a), bytes(&b));
        let p = random_pure_state(3, &mut ChaCha8Rng::seed_from_u64(2));
        let q = random_pure_state(3, &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(p, q);
        assert!((p.amplitudes().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hilbert_schmidt_mean_bloch_vector_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut mean = [0.0; 3];
        let n = 10_000;
        for _ in 0..n {
            let r = random_mixed_state(2, &mut rng).bloch_vector().unwrap();
            for k in 0..3 {
                mean[k] += r[k] / n as f64;
            }
        }
        let norm = mean.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 0.05, "mean Bloch vector norm {norm}");
    }

    #[test]
    fn haar_pure_mean_z_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 10_000;
        let z = pauli_z();
        let mean: f64 = (0..n)
            .map(|_| expectation(&random_pure_state(2, &mut rng).to_density(), &z).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() < 0.05, "mean <Z> = {mean}");
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_unitary(6, &mut rng);
        assert_close(&(&u * u.adjoint()), &identity(6), 1e-12);
    }

    #[test]
    fn bloch_round_trip() {
        let rho = DensityMatrix::from_bloch([0.3, -0.2, 0.5]).unwrap();
        let r = rho.bloch_vector().unwrap();
        assert!((r[0] - 0.3).abs() < 1e-15 && (r[1] + 0.2).abs() < 1e-15 && (r[2] - 0.5).abs() < 1e-15);
        assert!(DensityMatrix::from_bloch([1.0, 1.0, 0.0]).is_err());
    }
}
