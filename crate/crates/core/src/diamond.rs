//! Diamond-norm estimates for channel differences and the success
//! probability bound they imply.
//!
//! The norm is maximized over pure inputs `|ψ⟩` on the system and an
//! equally sized reference. `|ψ⟩` is stored as a `d×d` matrix `Ψ` so that
//! `(A ⊗ 𝟙)|ψ⟩` is simply `AΨ`.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::channels::{choi, tensor_channels, KrausChannel};
use crate::error::{shape_err, Result};
use crate::optim::{self, LbfgsConfig};
use crate::qcore::{self, c, ComplexMatrix, C64};
use crate::seeds;

/// Default number of local ascents.
pub const DEFAULT_RESTARTS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct DiamondEstimate {
    pub value: f64,
    pub restarts_used: usize,
    pub per_restart_values: Vec<f64>,
    pub choi_lower_bound: f64,
}

fn check_dims(ch0: &KrausChannel, ch1: &KrausChannel) -> Result<()> {
    if ch0.in_dim() != ch1.in_dim() || ch0.out_dim() != ch1.out_dim() {
        return Err(shape_err!(
            "channel dimensions differ: {}→{} vs {}→{}",
            ch0.in_dim(),
            ch0.out_dim(),
            ch1.in_dim(),
            ch1.out_dim()
        ));
    }
    Ok(())
}

/// `‖J(Φ₀) − J(Φ₁)‖₁`, attained by the maximally entangled input.
pub fn choi_lower_bound(ch0: &KrausChannel, ch1: &KrausChannel) -> Result<f64> {
    check_dims(ch0, ch1)?;
    qcore::trace_norm(&(choi(ch0) - choi(ch1)))
}

struct Objective<'a> {
    plus: &'a [ComplexMatrix],
    minus: &'a [ComplexMatrix],
    din: usize,
    dout: usize,
}

impl Objective<'_> {
    fn psi(&self, x: &[f64]) -> ComplexMatrix {
        let n = self.din * self.din;
        ComplexMatrix::from_fn(self.din, self.din, |i, j| {
            let k = i * self.din + j;
            c(x[k], x[n + k])
        })
    }

    /// Row-major vectorization of a `dout×din` matrix, matching `out ⊗ ref`.
    fn vec(&self, y: &ComplexMatrix) -> Vec<C64> {
        let mut v = Vec::with_capacity(self.dout * self.din);
        for a in 0..self.dout {
            for j in 0..self.din {
                v.push(y[(a, j)]);
            }
        }
        v
    }

    fn output(&self, psi: &ComplexMatrix) -> (ComplexMatrix, Vec<ComplexMatrix>, Vec<ComplexMatrix>) {
        let d = self.dout * self.din;
        let mut out = ComplexMatrix::zeros(d, d);
        let mut images = |ops: &[ComplexMatrix], sign: f64| -> Vec<ComplexMatrix> {
            ops.iter()
                .map(|k| {
                    let y = k * psi;
                    let v = self.vec(&y);
                    for col in 0..d {
                        let w = v[col].conj() * sign;
                        if w == C64::new(0.0, 0.0) {
                            continue;
                        }
                        for row in 0..d {
                            out[(row, col)] += v[row] * w;
                        }
                    }
                    y
                })
                .collect()
        };
        let yp = images(self.plus, 1.0);
        let ym = images(self.minus, -1.0);
        (out, yp, ym)
    }

    /// Negated normalized trace norm and its gradient in `x`.
    fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let norm2: f64 = x.iter().map(|v| v * v).sum();
        let psi = self.psi(x);
        let (delta, yp, ym) = self.output(&psi);
        let (vals, vecs) = match qcore::eigh(&delta) {
            Ok(e) => e,
            Err(_) => return (f64::NAN, vec![f64::NAN; x.len()]),
        };
        let f = vals.iter().map(|v| v.abs()).sum::<f64>() / norm2;
        // S = sign(Δ); M x = Σ A†·S·(A x) − Σ B†·S·(B x)
        let mut sign = ComplexMatrix::zeros(vals.len(), vals.len());
        for (k, v) in vals.iter().enumerate() {
            let s = if *v >= 0.0 { 1.0 } else { -1.0 };
            let col = vecs.column(k);
            sign += (col * col.adjoint()).scale(s);
        }
        let unvec = |v: &nalgebra::DVector<C64>| ComplexMatrix::from_fn(self.dout, self.din, |a, j| v[a * self.din + j]);
        let mut mx = ComplexMatrix::zeros(self.din, self.din);
        for (ops, ys, s) in [(self.plus, &yp, 1.0), (self.minus, &ym, -1.0)] {
            for (k, y) in ops.iter().zip(ys) {
                let sy = &sign * nalgebra::DVector::from_vec(self.vec(y));
                mx += (k.adjoint() * unvec(&sy)).scale(s);
            }
        }
        let n = self.din * self.din;
        let mut g = vec![0.0; 2 * n];
        for i in 0..self.din {
            for j in 0..self.din {
                let k = i * self.din + j;
                let r = (mx[(i, j)] - psi[(i, j)] * f) * (2.0 / norm2);
                g[k] = -r.re;
                g[n + k] = -r.im;
            }
        }
        (-f, g)
    }
}

/// Multi-start local maximization of `‖((Φ₀−Φ₁)⊗𝟙)[ψψ†]‖₁`.
///
/// Restart 0 starts from the maximally entangled state, so the estimate
/// never falls below the Choi bound; the others start Haar-random.
pub fn diamond_norm(ch0: &KrausChannel, ch1: &KrausChannel, restarts: usize, seed: u64) -> Result<DiamondEstimate> {
    check_dims(ch0, ch1)?;
    let bound = choi_lower_bound(ch0, ch1)?;
    let din = ch0.in_dim();
    let obj = Objective { plus: ch0.kraus(), minus: ch1.kraus(), din, dout: ch0.out_dim() };
    let cfg = LbfgsConfig { f_tol: 1e-12, g_tol: 1e-9, max_iter: 1000, ..Default::default() };
    let n = din * din;
    let restarts = restarts.max(1);
    let per_restart_values: Vec<f64> = (0..restarts)
        .into_par_iter()
        .map(|k| {
            let x0: Vec<f64> = if k == 0 {
                let mut x = vec![0.0; 2 * n];
                (0..din).for_each(|i| x[i * din + i] = 1.0 / (din as f64).sqrt());
                x
            } else {
                let mut rng = seeds::task_rng(seed, &[k as u64]);
                (0..2 * n).map(|_| StandardNormal.sample(&mut rng)).collect()
            };
            match optim::minimize(|x: &[f64]| obj.eval(x), &x0, &cfg) {
                Ok(m) => -m.value,
                Err(e) => {
                    log::warn!("diamond restart {k} aborted: {e}");
                    f64::NAN
                }
            }
        })
        .collect();
    let best = per_restart_values.iter().copied().filter(|v| v.is_finite()).fold(bound, f64::max);
    Ok(DiamondEstimate { value: best.min(2.0), restarts_used: restarts, per_restart_values, choi_lower_bound: bound })
}

/// `½ + ¼‖Φ₀^{⊗p} − Φ₁^{⊗p}‖⋄`.
pub fn p_diamond(ch0: &KrausChannel, ch1: &KrausChannel, p: usize, restarts: usize, seed: u64) -> Result<f64> {
    Ok(p_diamond_estimate(ch0, ch1, p, restarts, seed)?.1)
}

/// The norm estimate for the `p`-fold tensor powers and the implied bound.
pub fn p_diamond_estimate(
    ch0: &KrausChannel,
    ch1: &KrausChannel,
    p: usize,
    restarts: usize,
    seed: u64,
) -> Result<(DiamondEstimate, f64)> {
    let a = tensor_channels(ch0, p)?;
    let b = tensor_channels(ch1, p)?;
    let est = diamond_norm(&a, &b, restarts, seed)?;
    let prob = (0.5 + 0.25 * est.value).clamp(0.5, 1.0);
    Ok((est, prob))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::random_unitary;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_channels() {
        let eb = KrausChannel::eb_a();
        assert!(choi_lower_bound(&eb, &eb).unwrap() < 1e-14);
        let est = diamond_norm(&eb, &eb, 3, 1).unwrap();
        assert!(est.value < 1e-12);
        assert!((p_diamond(&eb, &eb, 1, 2, 1).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn depolarizing_choi_bound() {
        let id = KrausChannel::depolarizing(0.0).unwrap();
        for alpha in [0.1, 0.4, 0.9] {
            let dep = KrausChannel::depolarizing(alpha).unwrap();
            assert!((choi_lower_bound(&id, &dep).unwrap() - 2.0 * alpha).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let r = diamond_norm(&KrausChannel::eb_a(), &KrausChannel::depolarizing(0.1).unwrap(), 1, 0);
        assert!(matches!(r, Err(crate::Error::Shape(_))));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (a, b) = (KrausChannel::eb_a(), KrausChannel::eb_b());
        let obj = Objective { plus: a.kraus(), minus: b.kraus(), din: 4, dout: 2 };
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let x: Vec<f64> = (0..32).map(|_| StandardNormal.sample(&mut rng)).collect();
        let (_, g) = obj.eval(&x);
        let fd = crate::ansatz::finite_difference(|y| obj.eval(y).0, &x);
        for (p, q) in g.iter().zip(&fd) {
            assert!((p - q).abs() < 1e-6, "{p} vs {q}");
        }
    }

    #[test]
    fn unitary_pair_reaches_two_when_perfectly_distinguishable() {
        let x = KrausChannel::from_unitary(crate::qcore::pauli_x(), "x").unwrap();
        let z = KrausChannel::from_unitary(crate::qcore::pauli_z(), "z").unwrap();
        // X and Z: orthogonal outputs exist (e.g. from the Bell input).
        let est = diamond_norm(&x, &z, 4, 2).unwrap();
        assert!((est.value - 2.0).abs() < 1e-6);
    }

    #[test]
    fn estimate_dominates_choi_bound_for_random_unitaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..20 {
            let u = KrausChannel::from_unitary(random_unitary(2, &mut rng), "u").unwrap();
            let v = KrausChannel::from_unitary(random_unitary(2, &mut rng), "v").unwrap();
            let est = diamond_norm(&u, &v, 3, 5).unwrap();
            assert!(est.value >= est.choi_lower_bound - 1e-9);
            assert!(est.per_restart_values.iter().all(|&v| v <= est.value + 1e-12));
        }
    }

    #[test]
    fn eb_single_use() {
        let p = p_diamond(&KrausChannel::eb_a(), &KrausChannel::eb_b(), 1, 8, 0).unwrap();
        assert!((p - 0.9268).abs() < 1e-3, "{p}");
    }
}
