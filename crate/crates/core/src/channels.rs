//! Quantum channels in Kraus form and the algebra used to assemble
//! discrimination circuits from them.

use serde::{Deserialize, Serialize};

use crate::error::{contract_err, shape_err, Error, Result};
use crate::qcore::{
    self, c, identity, kernels, ComplexMatrix, DensityMatrix, PureState, C64, MAX_DIM, ZERO,
};

/// Largest Kraus set a tensor power or composition may produce.
pub const MAX_KRAUS: usize = 4096;
/// Tolerance on `Σ K†K = I`.
pub const TOL_TP: f64 = 1e-10;

/// A completely positive trace-preserving map `ρ ↦ Σ_k K_k ρ K_k†`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    in_dim: usize,
    out_dim: usize,
    kraus: Vec<ComplexMatrix>,
    label: String,
}

impl KrausChannel {
    /// Builds a channel, checking shapes and trace preservation.
    pub fn new(kraus: Vec<ComplexMatrix>, label: impl Into<String>) -> Result<Self> {
        let first = kraus.first().ok_or_else(|| contract_err!("empty Kraus set"))?;
        let (out_dim, in_dim) = first.shape();
        if in_dim == 0 || out_dim == 0 || in_dim > MAX_DIM || out_dim > MAX_DIM {
            return Err(Error::Size(format!("Kraus operator of shape {out_dim}x{in_dim}")));
        }
        if kraus.len() > MAX_KRAUS {
            return Err(Error::Size(format!("{} Kraus operators exceed cap {MAX_KRAUS}", kraus.len())));
        }
        if let Some(k) = kraus.iter().find(|k| k.shape() != (out_dim, in_dim)) {
            return Err(shape_err!(
                "Kraus operators disagree in shape: {}x{} vs {out_dim}x{in_dim}",
                k.nrows(),
                k.ncols()
            ));
        }
        let ch = Self { in_dim, out_dim, kraus, label: label.into() };
        let defect = ch.trace_preservation_defect();
        if !(defect <= TOL_TP) {
            return Err(contract_err!("Kraus set is not trace preserving (defect {defect:.3e})"));
        }
        Ok(ch)
    }

    pub fn identity(dim: usize) -> Self {
        Self { in_dim: dim, out_dim: dim, kraus: vec![identity(dim)], label: format!("id{dim}") }
    }

    pub fn from_unitary(u: ComplexMatrix, label: impl Into<String>) -> Result<Self> {
        Self::new(vec![u], label)
    }

    /// Qubit depolarizing channel
    /// `(1-α)ρ + (α/3)(σxρσx + σyρσy + σzρσz)`.
    pub fn depolarizing(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(contract_err!("depolarization factor {alpha} outside [0, 1]"));
        }
        let a = (1.0 - alpha).sqrt();
        let b = (alpha / 3.0).sqrt();
        let kraus = vec![
            identity(2).scale(a),
            qcore::pauli_x().scale(b),
            qcore::pauli_y().scale(b),
            qcore::pauli_z().scale(b),
        ];
        Self::new(kraus, format!("dep({alpha})"))
    }

    /// First entanglement-breaking two-qubit-to-one-qubit channel.
    pub fn eb_a() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let k0 = qcore::ket(2, 0);
        let k1 = qcore::ket(2, 1);
        let kraus = vec![
            qcore::outer(&k0, &qcore::ket(4, 0)),
            qcore::outer(&k0, &qcore::ket(4, 1)),
            qcore::outer(&k0, &qcore::ket(4, 2)),
            qcore::outer(&k0, &qcore::ket(4, 3)).scale(h),
            qcore::outer(&k1, &qcore::ket(4, 3)).scale(h),
        ];
        Self::new(kraus, "eb-A").expect("EB-A Kraus set is trace preserving")
    }

    /// Second entanglement-breaking two-qubit-to-one-qubit channel.
    pub fn eb_b() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = PureState::plus().amplitudes().clone();
        let minus = PureState::minus().amplitudes().clone();
        let k0 = qcore::ket(2, 0);
        let k1 = qcore::ket(2, 1);
        let one_plus = k1.kronecker(&plus);
        let one_minus = k1.kronecker(&minus);
        let kraus = vec![
            qcore::outer(&plus, &qcore::ket(4, 0)),
            qcore::outer(&plus, &qcore::ket(4, 1)),
            qcore::outer(&k1, &one_plus),
            qcore::outer(&k0, &one_minus).scale(h),
            qcore::outer(&k1, &one_minus).scale(h),
        ];
        Self::new(kraus, "eb-B").expect("EB-B Kraus set is trace preserving")
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Input width in qubits, when the input dimension is a power of two.
    pub fn in_qubits(&self) -> Option<usize> {
        self.in_dim.is_power_of_two().then(|| self.in_dim.trailing_zeros() as usize)
    }

    pub fn out_qubits(&self) -> Option<usize> {
        self.out_dim.is_power_of_two().then(|| self.out_dim.trailing_zeros() as usize)
    }

    /// `max |Σ K†K - I|`.
    pub fn trace_preservation_defect(&self) -> f64 {
        let mut sum = ComplexMatrix::zeros(self.in_dim, self.in_dim);
        for k in &self.kraus {
            sum += k.adjoint() * k;
        }
        (sum - identity(self.in_dim)).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Checks trace preservation and positivity of the Choi matrix.
    pub fn check_cptp(&self) -> Result<()> {
        let defect = self.trace_preservation_defect();
        if defect > TOL_TP {
            return Err(contract_err!("{}: trace preservation defect {defect:.3e}", self.label));
        }
        let min = qcore::eigvalsh(&self.choi())?[0];
        if min < qcore::TOL_PSD {
            return Err(contract_err!("{}: Choi matrix eigenvalue {min:.3e}", self.label));
        }
        Ok(())
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dim() != self.in_dim {
            return Err(shape_err!(
                "channel {} expects dim {}, got {}",
                self.label,
                self.in_dim,
                rho.dim()
            ));
        }
        Ok(DensityMatrix::from_matrix_unchecked(self.apply_matrix(rho.matrix())))
    }

    /// `Σ K m K†` for any operator `m` on the input space.
    pub fn apply_matrix(&self, m: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.out_dim, self.out_dim);
        for k in &self.kraus {
            out += k * m * k.adjoint();
        }
        out
    }

    /// Heisenberg-picture map `O ↦ Σ K† O K`.
    pub fn apply_adjoint(&self, obs: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.in_dim, self.in_dim);
        for k in &self.kraus {
            out += k.adjoint() * obs * k;
        }
        out
    }

    /// `Φ^{⊗p}`.
    pub fn tensor_power(&self, p: usize) -> Result<Self> {
        tensor_channels(self, p)
    }

    /// `Φ ⊗ 𝟙^{⊗r}` on `r` extra qubits.
    pub fn extend_identity(&self, r: usize) -> Result<Self> {
        extend_identity(self, r)
    }

    /// Normalized Choi state `(Φ ⊗ 𝟙)[|Ω⟩⟨Ω|]`, output factor first.
    pub fn choi(&self) -> ComplexMatrix {
        choi(self)
    }
}

/// Kraus set of `a ⊗ b`.
pub fn tensor_pair(a: &KrausChannel, b: &KrausChannel) -> Result<KrausChannel> {
    let count = a.kraus.len() * b.kraus.len();
    if count > MAX_KRAUS {
        return Err(Error::Size(format!("{count} Kraus operators exceed cap {MAX_KRAUS}")));
    }
    let mut kraus = Vec::with_capacity(count);
    for ka in &a.kraus {
        for kb in &b.kraus {
            kraus.push(qcore::tensor(ka, kb)?);
        }
    }
    Ok(KrausChannel {
        in_dim: a.in_dim * b.in_dim,
        out_dim: a.out_dim * b.out_dim,
        kraus,
        label: format!("{}⊗{}", a.label, b.label),
    })
}

/// All `p`-fold tensor products of the Kraus operators of `ch`.
pub fn tensor_channels(ch: &KrausChannel, p: usize) -> Result<KrausChannel> {
    if p == 0 {
        return Err(contract_err!("tensor power needs p >= 1"));
    }
    let count = (ch.kraus.len() as u128).checked_pow(p as u32).unwrap_or(u128::MAX);
    if count > MAX_KRAUS as u128 {
        return Err(Error::Size(format!("{count} Kraus operators exceed cap {MAX_KRAUS}")));
    }
    let mut out = ch.clone();
    for _ in 1..p {
        out = tensor_pair(&out, ch)?;
    }
    out.label = if p == 1 { ch.label.clone() } else { format!("{}^{p}", ch.label) };
    Ok(out)
}

/// `K ↦ K ⊗ I(2^r)` for every Kraus operator.
pub fn extend_identity(ch: &KrausChannel, r: usize) -> Result<KrausChannel> {
    if r == 0 {
        return Ok(ch.clone());
    }
    let id = identity(1 << r);
    let kraus = ch.kraus.iter().map(|k| qcore::tensor(k, &id)).collect::<Result<Vec<_>>>()?;
    Ok(KrausChannel {
        in_dim: ch.in_dim << r,
        out_dim: ch.out_dim << r,
        kraus,
        label: format!("{}⊗id{}", ch.label, 1 << r),
    })
}

/// `b ∘ a` with Kraus set `{B_i A_j}`.
pub fn compose(b: &KrausChannel, a: &KrausChannel) -> Result<KrausChannel> {
    if a.out_dim != b.in_dim {
        return Err(shape_err!(
            "cannot compose: inner output dim {} vs outer input dim {}",
            a.out_dim,
            b.in_dim
        ));
    }
    let count = a.kraus.len() * b.kraus.len();
    if count > MAX_KRAUS {
        return Err(Error::Size(format!("{count} Kraus operators exceed cap {MAX_KRAUS}")));
    }
    let kraus = b.kraus.iter().flat_map(|kb| a.kraus.iter().map(move |ka| kb * ka)).collect();
    Ok(KrausChannel {
        in_dim: a.in_dim,
        out_dim: b.out_dim,
        kraus,
        label: format!("{}∘{}", b.label, a.label),
    })
}

/// Normalized Choi matrix `(1/d) Σ_ij Φ(|i⟩⟨j|) ⊗ |i⟩⟨j|`.
pub fn choi(ch: &KrausChannel) -> ComplexMatrix {
    let (din, dout) = (ch.in_dim, ch.out_dim);
    let mut out = ComplexMatrix::zeros(dout * din, dout * din);
    let scale = 1.0 / din as f64;
    for k in &ch.kraus {
        // Φ(|i⟩⟨j|) = Σ_k K|i⟩⟨j|K† = Σ_k col_i(K) col_j(K)†
        for j in 0..din {
            for i in 0..din {
                for b in 0..dout {
                    let kb = k[(b, j)].conj() * scale;
                    if kb == ZERO {
                        continue;
                    }
                    for a in 0..dout {
                        out[(a * din + i, b * din + j)] += k[(a, i)] * kb;
                    }
                }
            }
        }
    }
    out
}

/// Where a fresh `|0⟩` qubit enters a register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QubitPosition {
    /// `|0⟩⟨0| ⊗ ρ`
    Front,
    /// `ρ ⊗ |0⟩⟨0|`
    Back,
}

pub fn insert_fresh_qubit(rho: &DensityMatrix, position: QubitPosition) -> DensityMatrix {
    let m = match position {
        QubitPosition::Front => kernels::prepend_zero_qubits(rho.matrix(), 1),
        QubitPosition::Back => kernels::append_zero_qubits(rho.matrix(), 1),
    };
    DensityMatrix::from_matrix_unchecked(m)
}

/// Serializable channel description, as read from config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChannelSpec {
    Depolarizing {
        alpha: f64,
    },
    #[serde(rename = "eb-a", alias = "eb-A")]
    EbA,
    #[serde(rename = "eb-b", alias = "eb-B")]
    EbB,
    Identity {
        dim: usize,
    },
    /// Explicit Kraus matrices, row-major, entries as `[re, im]`.
    Kraus {
        matrices: Vec<Vec<Vec<[f64; 2]>>>,
        #[serde(default)]
        label: Option<String>,
    },
}

impl ChannelSpec {
    pub fn build(&self) -> Result<KrausChannel> {
        match self {
            Self::Depolarizing { alpha } => KrausChannel::depolarizing(*alpha),
            Self::EbA => Ok(KrausChannel::eb_a()),
            Self::EbB => Ok(KrausChannel::eb_b()),
            Self::Identity { dim } => {
                if *dim == 0 || *dim > MAX_DIM {
                    return Err(Error::Size(format!("identity channel of dim {dim}")));
                }
                Ok(KrausChannel::identity(*dim))
            }
            Self::Kraus { matrices, label } => {
                let kraus = matrices.iter().map(|m| matrix_from_rows(m)).collect::<Result<Vec<_>>>()?;
                KrausChannel::new(kraus, label.clone().unwrap_or_else(|| "kraus".into()))
            }
        }
    }

    /// Parses the short command-line forms `eb-a`, `eb-b`, `dep:<α>`,
    /// `depolarizing:<α>` and `identity:<dim>`.
    pub fn parse_short(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (head, arg) = match lower.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (lower.as_str(), None),
        };
        let num = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(|| contract_err!("channel '{s}' needs an argument"))?
                .parse::<f64>()
                .map_err(|e| contract_err!("channel '{s}': {e}"))
        };
        match head {
            "eb-a" | "eba" => Ok(Self::EbA),
            "eb-b" | "ebb" => Ok(Self::EbB),
            "dep" | "depolarizing" => Ok(Self::Depolarizing { alpha: num(arg)? }),
            "identity" | "id" => Ok(Self::Identity { dim: num(arg)? as usize }),
            _ => Err(contract_err!("unknown channel '{s}'")),
        }
    }
}

fn matrix_from_rows(rows: &[Vec<[f64; 2]>]) -> Result<ComplexMatrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(shape_err!("Kraus matrix rows must be nonempty and of equal length"));
    }
    let entries: Vec<C64> = rows.iter().flatten().map(|&[re, im]| c(re, im)).collect();
    Ok(ComplexMatrix::from_row_slice(nrows, ncols, &entries))
}

/// Row-major `[re, im]` form of a matrix, the inverse of the config parser.
pub fn matrix_to_rows(m: &ComplexMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{random_mixed_state, DensityMatrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn max_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn identity_channel_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_mixed_state(4, &mut rng);
        let out = KrausChannel::identity(4).apply(&rho).unwrap();
        assert!(max_diff(out.matrix(), rho.matrix()) < 1e-15);
    }

    #[test]
    fn depolarizing_range_checked() {
        assert!(KrausChannel::depolarizing(-0.1).is_err());
        assert!(KrausChannel::depolarizing(1.1).is_err());
        assert!(KrausChannel::depolarizing(f64::NAN).is_err());
        assert_eq!(KrausChannel::depolarizing(0.3).unwrap().kraus().len(), 4);
    }

    #[test]
    fn depolarizing_zero_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dep = KrausChannel::depolarizing(0.0).unwrap();
        for _ in 0..10 {
            let rho = random_mixed_state(2, &mut rng);
            assert!(max_diff(dep.apply(&rho).unwrap().matrix(), rho.matrix()) < 1e-15);
        }
    }

    #[test]
    fn depolarizing_bloch_contraction() {
        for alpha in [0.0, 0.1, 0.5, 0.75, 1.0] {
            let out = KrausChannel::depolarizing(alpha)
                .unwrap()
                .apply(&DensityMatrix::basis(2, 0))
                .unwrap();
            let r = out.bloch_vector().unwrap();
            assert!(r[0].abs() < 1e-15 && r[1].abs() < 1e-15);
            assert!((r[2] - (1.0 - 4.0 * alpha / 3.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn eb_channels_on_basis_inputs() {
        let a = KrausChannel::eb_a();
        let b = KrausChannel::eb_b();
        let out = a.apply(&DensityMatrix::basis(4, 3)).unwrap();
        assert!(max_diff(out.matrix(), DensityMatrix::maximally_mixed(2).matrix()) < 1e-15);
        let out = a.apply(&DensityMatrix::basis(4, 0)).unwrap();
        assert!(max_diff(out.matrix(), DensityMatrix::basis(2, 0).matrix()) < 1e-15);
        let out = b.apply(&DensityMatrix::basis(4, 0)).unwrap();
        assert!(max_diff(out.matrix(), DensityMatrix::plus().matrix()) < 1e-15);
        assert_eq!((a.in_dim(), a.out_dim()), (4, 2));
    }

    #[test]
    fn eb_kraus_sums_to_identity() {
        for ch in [KrausChannel::eb_a(), KrausChannel::eb_b()] {
            let mut sum = ComplexMatrix::zeros(4, 4);
            for k in ch.kraus() {
                sum += k.adjoint() * k;
            }
            assert!(max_diff(&sum, &identity(4)) < 1e-15);
            ch.check_cptp().unwrap();
        }
    }

    #[test]
    fn new_rejects_non_trace_preserving() {
        let k = identity(2).scale(0.9);
        assert!(matches!(KrausChannel::new(vec![k], "bad"), Err(Error::Contract(_))));
        assert!(KrausChannel::new(vec![], "empty").is_err());
        let mixed = vec![identity(2), identity(3)];
        assert!(matches!(KrausChannel::new(mixed, "shape"), Err(Error::Shape(_))));
    }

    #[test]
    fn tensor_power_counts_and_identity() {
        let dep = KrausChannel::depolarizing(0.2).unwrap();
        assert_eq!(tensor_channels(&dep, 1).unwrap(), dep);
        assert_eq!(tensor_channels(&dep, 2).unwrap().kraus().len(), 16);
        let id2 = tensor_channels(&KrausChannel::depolarizing(0.0).unwrap(), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random_mixed_state(4, &mut rng);
        assert!(max_diff(id2.apply(&rho).unwrap().matrix(), rho.matrix()) < 1e-14);
        assert!(matches!(tensor_channels(&dep, 7), Err(Error::Size(_))));
        assert!(tensor_channels(&dep, 0).is_err());
    }

    #[test]
    fn extend_identity_properties() {
        let dep = KrausChannel::depolarizing(1.0).unwrap();
        assert_eq!(extend_identity(&dep, 0).unwrap(), dep);
        let ext = extend_identity(&dep, 1).unwrap();
        assert!(ext.trace_preservation_defect() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_mixed_state(2, &mut rng);
        let b = random_mixed_state(2, &mut rng);
        let out = ext.apply(&a.tensor(&b).unwrap()).unwrap();
        let marginal = out.partial_trace(&[2, 2], &[1]).unwrap();
        assert!(max_diff(marginal.matrix(), b.matrix()) < 1e-14);
    }

    #[test]
    fn compose_matches_sequential_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dep = KrausChannel::depolarizing(0.3).unwrap();
        let dep0 = KrausChannel::depolarizing(0.0).unwrap();
        let id = KrausChannel::identity(2);
        let c1 = compose(&id, &dep).unwrap();
        let c2 = compose(&dep, &dep0).unwrap();
        for _ in 0..50 {
            let rho = random_mixed_state(2, &mut rng);
            let direct = dep.apply(&rho).unwrap();
            assert!(max_diff(c1.apply(&rho).unwrap().matrix(), direct.matrix()) < 1e-14);
            assert!(max_diff(c2.apply(&rho).unwrap().matrix(), direct.matrix()) < 1e-14);
        }
        assert!(matches!(compose(&dep, &KrausChannel::eb_a().extend_identity(1).unwrap()), Err(Error::Shape(_))));
    }

    #[test]
    fn compose_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let u = KrausChannel::from_unitary(qcore::random_unitary(2, &mut rng), "u").unwrap();
            let d1 = KrausChannel::depolarizing(0.4).unwrap();
            let d2 = KrausChannel::depolarizing(0.7).unwrap();
            let left = compose(&compose(&d2, &u).unwrap(), &d1).unwrap();
            let right = compose(&d2, &compose(&u, &d1).unwrap()).unwrap();
            let rho = random_mixed_state(2, &mut rng);
            let diff = max_diff(left.apply(&rho).unwrap().matrix(), right.apply(&rho).unwrap().matrix());
            assert!(diff < 1e-14);
        }
    }

    #[test]
    fn choi_examples() {
        let omega = PureState::maximally_entangled(2).to_density();
        assert!(max_diff(&KrausChannel::identity(2).choi(), omega.matrix()) < 1e-15);
        let alpha = 0.3;
        let mut vals = qcore::eigvalsh(&KrausChannel::depolarizing(alpha).unwrap().choi()).unwrap();
        vals.sort_by(f64::total_cmp);
        let expected = [alpha / 3.0, alpha / 3.0, alpha / 3.0, 1.0 - alpha];
        for (v, e) in vals.iter().zip(expected) {
            assert!((v - e).abs() < 1e-14);
        }
        for ch in [KrausChannel::eb_a(), KrausChannel::depolarizing(0.6).unwrap()] {
            let j = ch.choi();
            let reduced = qcore::partial_trace(&j, &[ch.out_dim(), ch.in_dim()], &[1]).unwrap();
            let mixed = identity(ch.in_dim()).unscale(ch.in_dim() as f64);
            assert!(max_diff(&reduced, &mixed) < 1e-14);
        }
    }

    #[test]
    fn fresh_qubit_insertion() {
        let out = insert_fresh_qubit(&DensityMatrix::basis(2, 0), QubitPosition::Front);
        assert!(max_diff(out.matrix(), DensityMatrix::basis(4, 0).matrix()) < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rho = random_mixed_state(2, &mut rng);
        for (pos, keep) in [(QubitPosition::Front, 1), (QubitPosition::Back, 0)] {
            let lifted = insert_fresh_qubit(&rho, pos);
            assert!((qcore::trace(lifted.matrix()).re - 1.0).abs() < 1e-14);
            let back = lifted.partial_trace(&[2, 2], &[keep]).unwrap();
            assert!(max_diff(back.matrix(), rho.matrix()) < 1e-15);
        }
    }

    #[test]
    fn spec_parsing() {
        let dep: ChannelSpec = serde_json::from_str(r#"{"type":"depolarizing","alpha":0.3}"#).unwrap();
        let eb: ChannelSpec = serde_json::from_str(r#"{"type":"eb-A"}"#).unwrap();
        assert_eq!(eb, ChannelSpec::EbA);
        assert!(serde_json::from_str::<ChannelSpec>(r#"{"type":"depolarizing","alpha":0.3,"beta":1}"#).is_err());
        assert_eq!(dep, ChannelSpec::Depolarizing { alpha: 0.3 });
        assert_eq!(ChannelSpec::parse_short("eb-A").unwrap(), ChannelSpec::EbA);
        assert_eq!(ChannelSpec::parse_short("dep:0.25").unwrap(), ChannelSpec::Depolarizing { alpha: 0.25 });
        assert!(ChannelSpec::parse_short("nope").is_err());
        let m = KrausChannel::depolarizing(0.2).unwrap();
        let spec = ChannelSpec::Kraus { matrices: m.kraus().iter().map(matrix_to_rows).collect(), label: None };
        let rebuilt = spec.build().unwrap();
        for (a, b) in rebuilt.kraus().iter().zip(m.kraus()) {
            assert!(max_diff(a, b) < 1e-15);
        }
    }
}
