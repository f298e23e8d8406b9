//! In-place kernels acting on qubit registers stored as dense column-major
//! matrices. All functions take the register width `n` explicitly and use
//! the crate-wide ordering (qubit 0 = most significant bit).

use super::{ComplexMatrix, C64, ONE, ZERO};

/// A single-qubit operator in row-major form: `g[row][col]`.
pub type Gate2 = [[C64; 2]; 2];

pub const GATE_IDENTITY: Gate2 = [[ONE, ZERO], [ZERO, ONE]];

pub fn gate_mul(a: &Gate2, b: &Gate2) -> Gate2 {
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn gate_adjoint(g: &Gate2) -> Gate2 {
    [[g[0][0].conj(), g[1][0].conj()], [g[0][1].conj(), g[1][1].conj()]]
}

/// `Tr(a·b)` for 2×2 operators.
pub fn gate_trace_product(a: &Gate2, b: &Gate2) -> C64 {
    a[0][0] * b[0][0] + a[0][1] * b[1][0] + a[1][0] * b[0][1] + a[1][1] * b[1][1]
}

pub fn gate_to_matrix(g: &Gate2) -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[g[0][0], g[0][1], g[1][0], g[1][1]])
}

#[inline]
fn mask(n: usize, qubit: usize) -> usize {
    debug_assert!(qubit < n);
    1 << (n - 1 - qubit)
}

/// Indices with the target bit clear and (if given) the control bit set.
fn pair_bases(n: usize, target: usize, control: Option<usize>) -> Vec<usize> {
    let tmask = mask(n, target);
    let cmask = control.map_or(0, |c| mask(n, c));
    (0..1usize << n)
        .filter(|&i| i & tmask == 0 && i & cmask == cmask)
        .collect()
}

/// `m ← G·m` with `G` acting on `target` (controlled on `control`).
pub fn apply_left(m: &mut ComplexMatrix, n: usize, target: usize, control: Option<usize>, g: &Gate2) {
    let d = 1usize << n;
    debug_assert_eq!(m.nrows(), d);
    let tmask = mask(n, target);
    let bases = pair_bases(n, target, control);
    let cols = m.ncols();
    let data = m.as_mut_slice();
    for j in 0..cols {
        let col = &mut data[j * d..(j + 1) * d];
        for &i0 in &bases {
            let i1 = i0 | tmask;
            let (a, b) = (col[i0], col[i1]);
            col[i0] = g[0][0] * a + g[0][1] * b;
            col[i1] = g[1][0] * a + g[1][1] * b;
        }
    }
}

/// `m ← m·G†` with `G` acting on `target` (controlled on `control`).
pub fn apply_right_adjoint(
    m: &mut ComplexMatrix,
    n: usize,
    target: usize,
    control: Option<usize>,
    g: &Gate2,
) {
    let d = 1usize << n;
    debug_assert_eq!(m.ncols(), d);
    let rows = m.nrows();
    let tmask = mask(n, target);
    let (c00, c01, c10, c11) = (g[0][0].conj(), g[0][1].conj(), g[1][0].conj(), g[1][1].conj());
    let data = m.as_mut_slice();
    for j0 in pair_bases(n, target, control) {
        let j1 = j0 | tmask;
        let (lo, hi) = data.split_at_mut(j1 * rows);
        let col0 = &mut lo[j0 * rows..(j0 + 1) * rows];
        let col1 = &mut hi[..rows];
        for (x, y) in col0.iter_mut().zip(col1.iter_mut()) {
            let (a, b) = (*x, *y);
            *x = a * c00 + b * c01;
            *y = a * c10 + b * c11;
        }
    }
}

/// `m ← G·m·G†`.
pub fn conjugate(m: &mut ComplexMatrix, n: usize, target: usize, control: Option<usize>, g: &Gate2) {
    apply_left(m, n, target, control, g);
    apply_right_adjoint(m, n, target, control, g);
}

/// `m ← G†·m·G`.
pub fn conjugate_by_adjoint(
    m: &mut ComplexMatrix,
    n: usize,
    target: usize,
    control: Option<usize>,
    g: &Gate2,
) {
    conjugate(m, n, target, control, &gate_adjoint(g));
}

/// `m ← CX·m·CX`, a row and column permutation.
pub fn conjugate_cx(m: &mut ComplexMatrix, n: usize, control: usize, target: usize) {
    let d = 1usize << n;
    let tmask = mask(n, target);
    let bases = pair_bases(n, target, Some(control));
    {
        let data = m.as_mut_slice();
        for j in 0..d {
            let col = &mut data[j * d..(j + 1) * d];
            for &i0 in &bases {
                col.swap(i0, i0 | tmask);
            }
        }
    }
    let data = m.as_mut_slice();
    for &j0 in &bases {
        let j1 = j0 | tmask;
        let (lo, hi) = data.split_at_mut(j1 * d);
        lo[j0 * d..(j0 + 1) * d].swap_with_slice(&mut hi[..d]);
    }
}

/// `R = Tr_{¬target}(ρ·O)` restricted to the control-set subspace.
///
/// `rho` must be Hermitian; its columns stand in for its rows.
pub fn reduced_product(
    rho: &ComplexMatrix,
    obs: &ComplexMatrix,
    n: usize,
    target: usize,
    control: Option<usize>,
) -> Gate2 {
    let d = 1usize << n;
    let tmask = mask(n, target);
    let rd = rho.as_slice();
    let od = obs.as_slice();
    let dot = |y: usize, x: usize| -> C64 {
        let a = &rd[y * d..(y + 1) * d];
        let b = &od[x * d..(x + 1) * d];
        let mut re = 0.0;
        let mut im = 0.0;
        for (p, q) in a.iter().zip(b) {
            // conj(p) * q
            re += p.re * q.re + p.im * q.im;
            im += p.re * q.im - p.im * q.re;
        }
        C64::new(re, im)
    };
    let mut r = [[ZERO; 2]; 2];
    for i0 in pair_bases(n, target, control) {
        let idx = [i0, i0 | tmask];
        for y in 0..2 {
            for x in 0..2 {
                r[y][x] += dot(idx[y], idx[x]);
            }
        }
    }
    r
}

/// `Σ_k K_k m K_k†` with each `K_k` (2^out_q × 2^in_q) acting on qubits
/// `start .. start+in_q` of an `n`-qubit register. The result lives on
/// `n - in_q + out_q` qubits, with the new block at the same position.
pub fn apply_kraus_local(
    m: &ComplexMatrix,
    kraus: &[ComplexMatrix],
    n: usize,
    start: usize,
    in_q: usize,
    out_q: usize,
) -> ComplexMatrix {
    let din = 1usize << n;
    let n_out = n - in_q + out_q;
    let dout = 1usize << n_out;
    let rest_q = n - start - in_q;
    let (na, nb) = (1usize << start, 1usize << rest_q);
    let (sin, sout) = (1usize << in_q, 1usize << out_q);
    debug_assert_eq!(m.nrows(), din);
    let idx_in = |a: usize, s: usize, b: usize| (a * sin + s) * nb + b;
    let idx_out = |a: usize, s: usize, b: usize| (a * sout + s) * nb + b;

    let mut out = ComplexMatrix::zeros(dout, dout);
    let mut tmp = ComplexMatrix::zeros(dout, din);
    for k in kraus {
        debug_assert_eq!(k.shape(), (sout, sin));
        let nz: Vec<(usize, usize, C64)> = (0..sout)
            .flat_map(|so| (0..sin).map(move |si| (so, si)))
            .map(|(so, si)| (so, si, k[(so, si)]))
            .filter(|(_, _, v)| *v != ZERO)
            .collect();
        if nz.is_empty() {
            continue;
        }
        // tmp = K_full · m
        tmp.fill(ZERO);
        {
            let md = m.as_slice();
            let td = tmp.as_mut_slice();
            for col in 0..din {
                let mc = &md[col * din..(col + 1) * din];
                let tc = &mut td[col * dout..(col + 1) * dout];
                for a in 0..na {
                    for &(so, si, v) in &nz {
                        let src = &mc[idx_in(a, si, 0)..idx_in(a, si, 0) + nb];
                        let dst = &mut tc[idx_out(a, so, 0)..idx_out(a, so, 0) + nb];
                        for (x, y) in dst.iter_mut().zip(src) {
                            *x += v * y;
                        }
                    }
                }
            }
        }
        // out += tmp · K_full†
        let td = tmp.as_slice();
        let od = out.as_mut_slice();
        for a in 0..na {
            for &(so, si, v) in &nz {
                let w = v.conj();
                for b in 0..nb {
                    let src = &td[idx_in(a, si, b) * dout..(idx_in(a, si, b) + 1) * dout];
                    let oc = idx_out(a, so, b);
                    let dst = &mut od[oc * dout..(oc + 1) * dout];
                    for (x, y) in dst.iter_mut().zip(src) {
                        *x += w * y;
                    }
                }
            }
        }
    }
    out
}

/// `|0…0⟩⟨0…0| ⊗ m` with `count` fresh qubits in front.
pub fn prepend_zero_qubits(m: &ComplexMatrix, count: usize) -> ComplexMatrix {
    let d = m.nrows();
    let mut out = ComplexMatrix::zeros(d << count, d << count);
    out.view_mut((0, 0), (d, d)).copy_from(m);
    out
}

/// `m ⊗ |0…0⟩⟨0…0|` with `count` fresh qubits at the back.
pub fn append_zero_qubits(m: &ComplexMatrix, count: usize) -> ComplexMatrix {
    let d = m.nrows();
    let stride = 1usize << count;
    let mut out = ComplexMatrix::zeros(d * stride, d * stride);
    for j in 0..d {
        for i in 0..d {
            out[(i * stride, j * stride)] = m[(i, j)];
        }
    }
    out
}

/// Adjoint of [`prepend_zero_qubits`]: `⟨0…0| m |0…0⟩` on the leading qubits.
pub fn project_zero_front(m: &ComplexMatrix, count: usize) -> ComplexMatrix {
    let d = m.nrows() >> count;
    m.view((0, 0), (d, d)).into_owned()
}

/// Adjoint of [`append_zero_qubits`].
pub fn project_zero_back(m: &ComplexMatrix, count: usize) -> ComplexMatrix {
    let stride = 1usize << count;
    let d = m.nrows() / stride;
    ComplexMatrix::from_fn(d, d, |i, j| m[(i * stride, j * stride)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{identity, random_mixed_state, random_unitary, tensor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn max_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn random_gate(rng: &mut ChaCha8Rng) -> Gate2 {
        let u = random_unitary(2, rng);
        [[u[(0, 0)], u[(0, 1)]], [u[(1, 0)], u[(1, 1)]]]
    }

    fn embed(n: usize, target: usize, g: &Gate2) -> ComplexMatrix {
        let mut m = ComplexMatrix::identity(1, 1);
        for q in 0..n {
            let f = if q == target { gate_to_matrix(g) } else { identity(2) };
            m = tensor(&m, &f).unwrap();
        }
        m
    }

    #[test]
    fn conjugate_matches_dense_embedding() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 3;
        for target in 0..n {
            let g = random_gate(&mut rng);
            let rho = random_mixed_state(8, &mut rng).into_matrix();
            let full = embed(n, target, &g);
            let expected = &full * &rho * full.adjoint();
            let mut got = rho.clone();
            conjugate(&mut got, n, target, None, &g);
            assert!(max_diff(&got, &expected) < 1e-13);
        }
    }

    #[test]
    fn controlled_gate_matches_block_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = random_gate(&mut rng);
        // control qubit 0, target qubit 1 on two qubits
        let mut full = identity(4);
        full.view_mut((2, 2), (2, 2)).copy_from(&gate_to_matrix(&g));
        let rho = random_mixed_state(4, &mut rng).into_matrix();
        let mut got = rho.clone();
        conjugate(&mut got, 2, 1, Some(0), &g);
        assert!(max_diff(&got, &(&full * &rho * full.adjoint())) < 1e-13);
    }

    #[test]
    fn cx_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let rho = random_mixed_state(8, &mut rng).into_matrix();
        let x: Gate2 = [[ZERO, ONE], [ONE, ZERO]];
        let mut a = rho.clone();
        conjugate(&mut a, 3, 0, Some(2), &x);
        let mut b = rho.clone();
        conjugate_cx(&mut b, 3, 2, 0);
        assert!(max_diff(&a, &b) < 1e-15);
    }

    #[test]
    fn reduced_product_matches_partial_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let rho = random_mixed_state(8, &mut rng).into_matrix();
        let obs = random_mixed_state(8, &mut rng).into_matrix();
        let prod = &rho * &obs;
        for t in 0..3 {
            let keep = crate::qcore::partial_trace(&prod, &[2, 2, 2], &[t]).unwrap();
            let r = reduced_product(&rho, &obs, 3, t, None);
            for y in 0..2 {
                for x in 0..2 {
                    assert!((r[y][x] - keep[(y, x)]).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn local_kraus_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        // 2 -> 1 qubit map on qubits 1..3 of a 4-qubit register
        let k1 = crate::qcore::ginibre(2, &mut rng).resize(2, 4, ZERO);
        let k2 = crate::qcore::ginibre(4, &mut rng).rows(0, 2).into_owned();
        let rho = random_mixed_state(16, &mut rng).into_matrix();
        let got = apply_kraus_local(&rho, &[k1.clone(), k2.clone()], 4, 1, 2, 1);
        let mut expected = ComplexMatrix::zeros(8, 8);
        for k in [&k1, &k2] {
            let full = tensor(&tensor(&identity(2), k).unwrap(), &identity(2)).unwrap();
            expected += &full * &rho * full.adjoint();
        }
        assert!(max_diff(&got, &expected) < 1e-12);
    }

    #[test]
    fn fresh_qubit_helpers_are_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let rho = random_mixed_state(4, &mut rng).into_matrix();
        let front = prepend_zero_qubits(&rho, 1);
        let p0 = crate::qcore::DensityMatrix::basis(2, 0).into_matrix();
        assert!(max_diff(&front, &tensor(&p0, &rho).unwrap()) < 1e-15);
        assert!(max_diff(&project_zero_front(&front, 1), &rho) < 1e-15);
        let back = append_zero_qubits(&rho, 1);
        assert!(max_diff(&back, &tensor(&rho, &p0).unwrap()) < 1e-15);
        assert!(max_diff(&project_zero_back(&back, 1), &rho) < 1e-15);
    }
}
