//! Dense complex linear algebra at small scale.
//!
//! Everything operates on `nalgebra` dynamically sized complex matrices and
//! vectors. Rank decisions are always relative to the largest singular value,
//! so the absolute scale of constraint vectors carries no meaning. A single
//! [`Tolerance`] is threaded through every call that needs a cutoff.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CVec = DVector<C64>;
pub type CMat = DMatrix<C64>;

/// Shorthand for a complex scalar.
#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Shorthand for a real scalar as complex.
#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Global tolerance policy.
///
/// * `eps_rank` — relative singular-value cutoff for rank decisions.
/// * `eps_span` — cutoff on the span distance between two subspaces.
/// * `eps_residual` — cutoff on constraint residuals `‖m·v‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub eps_rank: f64,
    pub eps_span: f64,
    pub eps_residual: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            eps_rank: 1e-9,
            eps_span: 1e-7,
            eps_residual: 1e-8,
        }
    }
}

impl Tolerance {
    pub fn new(eps_rank: f64, eps_span: f64, eps_residual: f64) -> Result<Self> {
        if !(eps_rank > 0.0 && eps_span > 0.0 && eps_residual > 0.0) {
            return Err(Error::invalid("tolerances must be strictly positive"));
        }
        Ok(Tolerance {
            eps_rank,
            eps_span,
            eps_residual,
        })
    }
}

fn check_finite_mat(m: &CMat) -> Result<()> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::invalid("matrix contains non-finite entries"));
    }
    Ok(())
}

fn check_finite_vecs(vs: &[CVec]) -> Result<()> {
    for v in vs {
        if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("vector contains non-finite entries"));
        }
    }
    Ok(())
}

/// Singular values of `m` in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return vec![];
    }
    let svd = m.clone().svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().cloned().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Number of singular values above `eps_rank` times the largest one.
/// The rank of a zero (or empty) matrix is 0.
pub fn numeric_rank(m: &CMat, tol: &Tolerance) -> Result<usize> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::invalid("numeric_rank of an empty matrix"));
    }
    check_finite_mat(m)?;
    let sv = singular_values(m);
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > tol.eps_rank * smax).count())
}

/// Orthonormal basis of the right nullspace of `m`.
///
/// Returns the empty list when `m` has full column rank. Each returned `v`
/// satisfies `‖m·v‖ ≤ eps_residual`.
pub fn nullspace(m: &CMat, tol: &Tolerance) -> Result<Vec<CVec>> {
    let n = m.ncols();
    if n == 0 {
        return Err(Error::invalid("nullspace of a matrix with no columns"));
    }
    check_finite_mat(m)?;

    // Orthonormal basis of the row space (conjugated right singular vectors
    // above the rank cutoff); the nullspace is its orthogonal complement.
    let mut rowspace: Vec<CVec> = Vec::new();
    if m.nrows() > 0 {
        let svd = m.clone().svd(false, true);
        let vt = svd
            .v_t
            .as_ref()
            .ok_or_else(|| Error::internal("svd did not return v_t"))?;
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let cutoff = tol.eps_rank * smax;
        for (i, &s) in svd.singular_values.iter().enumerate() {
            if smax > 0.0 && s > cutoff {
                rowspace.push(CVec::from_iterator(n, vt.row(i).iter().map(|z| z.conj())));
            }
        }
    }

    let kernel_dim = n - rowspace.len();
    let mut basis = complete_basis(&rowspace, n, kernel_dim)?;
    for v in &mut basis {
        phase_canonicalize(v);
        let resid = (m * &*v).norm();
        if resid > tol.eps_residual {
            return Err(Error::internal(format!(
                "nullspace residual {resid:.3e} exceeds eps_residual"
            )));
        }
    }
    Ok(basis)
}

/// Extend the orthonormal set `fixed` by `count` orthonormal vectors from the
/// complement, choosing the largest-residual computational direction each
/// round for determinism.
fn complete_basis(fixed: &[CVec], n: usize, count: usize) -> Result<Vec<CVec>> {
    let mut picked: Vec<CVec> = Vec::with_capacity(count);
    for _ in 0..count {
        let mut best: Option<(f64, CVec)> = None;
        for j in 0..n {
            let mut v = CVec::zeros(n);
            v[j] = cr(1.0);
            for w in fixed.iter().chain(picked.iter()) {
                let g = w.dotc(&v);
                v -= w * g;
            }
            // second pass guards against cancellation
            for w in fixed.iter().chain(picked.iter()) {
                let g = w.dotc(&v);
                v -= w * g;
            }
            let norm = v.norm();
            if best.as_ref().map_or(true, |(b, _)| norm > *b) {
                best = Some((norm, v));
            }
        }
        let (norm, v) = best.ok_or_else(|| Error::internal("complete_basis on empty space"))?;
        if norm < 1e-8 {
            return Err(Error::internal(
                "complete_basis could not find an independent direction",
            ));
        }
        picked.push(v / cr(norm));
    }
    Ok(picked)
}

/// Orthonormal basis of `span(vs)` via modified Gram-Schmidt with
/// reorthogonalization. Vectors whose residual after projection has norm at
/// most `eps_rank` times the input norm are dropped.
pub fn orthonormalize(vs: &[CVec], tol: &Tolerance) -> Result<Vec<CVec>> {
    check_finite_vecs(vs)?;
    if let Some(first) = vs.first() {
        if vs.iter().any(|v| v.len() != first.len()) {
            return Err(Error::invalid("orthonormalize: mixed vector dimensions"));
        }
    }
    let mut basis: Vec<CVec> = Vec::new();
    for v in vs {
        let input_norm = v.norm();
        if input_norm == 0.0 {
            continue;
        }
        let mut r = v.clone();
        for _ in 0..2 {
            for w in &basis {
                let g = w.dotc(&r);
                r -= w * g;
            }
        }
        let norm = r.norm();
        if norm > tol.eps_rank * input_norm {
            let mut u = r / cr(norm);
            phase_canonicalize(&mut u);
            basis.push(u);
        }
    }
    Ok(basis)
}

/// Frobenius norm of `P_a − P_b` where `P_x` projects onto `span(x)`.
/// Both lists are orthonormalized internally first. Zero iff equal spans.
pub fn span_distance(a: &[CVec], b: &[CVec]) -> Result<f64> {
    let tol = Tolerance::default();
    let a = orthonormalize(a, &tol)?;
    let b = orthonormalize(b, &tol)?;
    if let (Some(x), Some(y)) = (a.first(), b.first()) {
        if x.len() != y.len() {
            return Err(Error::invalid("span_distance: ambient dimension mismatch"));
        }
    }
    // ‖P_a − P_b‖_F² = Σ_x ‖x − P_b x‖² + Σ_y ‖y − P_a y‖², evaluated as
    // explicit projection residuals so equal spans cancel exactly
    let residual_mass = |from: &[CVec], onto: &[CVec]| -> f64 {
        from.iter()
            .map(|x| {
                let mut r = x.clone();
                for y in onto {
                    let g = y.dotc(&r);
                    r -= y * g;
                }
                r.norm_squared()
            })
            .sum()
    };
    let d2 = residual_mass(&a, &b) + residual_mass(&b, &a);
    Ok(d2.max(0.0).sqrt())
}

/// Multiply the vector by a global phase so its first entry of non-negligible
/// modulus becomes real positive.
pub fn phase_canonicalize(v: &mut CVec) {
    let scale = v.norm();
    if scale == 0.0 {
        return;
    }
    if let Some(z) = v.iter().find(|z| z.norm() > 1e-12 * scale) {
        let phase = z / z.norm();
        let correction = phase.conj();
        for entry in v.iter_mut() {
            *entry *= correction;
        }
    }
}

/// Kronecker product of two vectors (left factor varies slowest).
pub fn kron_vec(a: &CVec, b: &CVec) -> CVec {
    let mut out = CVec::zeros(a.len() * b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i * b.len() + j] = x * y;
        }
    }
    out
}

/// Kronecker product of two matrices.
pub fn kron_mat(a: &CMat, b: &CMat) -> CMat {
    let mut out = CMat::zeros(a.nrows() * b.nrows(), a.ncols() * b.ncols());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            for k in 0..b.nrows() {
                for l in 0..b.ncols() {
                    out[(i * b.nrows() + k, j * b.ncols() + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Matrix whose rows are the bras `⟨v_i|` of the given kets.
pub fn bras_from_kets(kets: &[CVec]) -> CMat {
    let rows = kets.len();
    let cols = kets.first().map_or(0, |v| v.len());
    CMat::from_fn(rows, cols, |i, j| kets[i][j].conj())
}

/// Computational basis state `|bits⟩` with `bits[0]` the most significant
/// qubit.
pub fn ket(bits: &[u8]) -> CVec {
    let mut idx = 0usize;
    for &b in bits {
        idx = idx * 2 + b as usize;
    }
    let mut v = CVec::zeros(1 << bits.len());
    v[idx] = cr(1.0);
    v
}

/// Inverse of a 2×2 complex matrix.
pub fn inv2(m: &CMat) -> Result<CMat> {
    debug_assert_eq!((m.nrows(), m.ncols()), (2, 2));
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    if det.norm() < 1e-300 {
        return Err(Error::invalid("singular 2x2 matrix"));
    }
    Ok(CMat::from_row_slice(
        2,
        2,
        &[
            m[(1, 1)] / det,
            -m[(0, 1)] / det,
            -m[(1, 0)] / det,
            m[(0, 0)] / det,
        ],
    ))
}

/// Condition number of a 2×2 matrix (ratio of its singular values).
pub fn cond2(m: &CMat) -> f64 {
    let sv = singular_values(m);
    if sv.len() < 2 || sv[1] == 0.0 {
        return f64::INFINITY;
    }
    sv[0] / sv[1]
}

/// State orthogonal to the given single-qubit state.
pub fn perp2(v: &CVec) -> CVec {
    debug_assert_eq!(v.len(), 2);
    let mut p = CVec::from_vec(vec![-v[1].conj(), v[0].conj()]);
    let n = p.norm();
    if n > 0.0 {
        p /= cr(n);
    }
    phase_canonicalize(&mut p);
    p
}

/// Projective overlap `|⟨u|v⟩|` of two unit vectors.
pub fn overlap(u: &CVec, v: &CVec) -> f64 {
    u.dotc(v).norm()
}

/// True when two unit vectors are parallel up to a global phase.
pub fn parallel(u: &CVec, v: &CVec, tol: &Tolerance) -> bool {
    overlap(u, v) >= 1.0 - tol.eps_rank
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cvec(rng: &mut ChaCha8Rng, n: usize) -> CVec {
        CVec::from_fn(n, |_, _| {
            c(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
        })
    }

    #[test]
    fn rank_identity_and_zero() {
        let tol = Tolerance::default();
        let id = CMat::identity(4, 4);
        assert_eq!(numeric_rank(&id, &tol).unwrap(), 4);
        let zero = CMat::zeros(4, 4);
        assert_eq!(numeric_rank(&zero, &tol).unwrap(), 0);
    }

    #[test]
    fn rank_drops_tiny_row() {
        let tol = Tolerance::default();
        let m = CMat::from_row_slice(
            2,
            4,
            &[
                cr(1.0),
                cr(0.0),
                cr(0.0),
                cr(0.0),
                cr(1e-15),
                cr(0.0),
                cr(0.0),
                cr(0.0),
            ],
        );
        assert_eq!(numeric_rank(&m, &tol).unwrap(), 1);
    }

    #[test]
    fn rank_rejects_non_finite() {
        let tol = Tolerance::default();
        let m = CMat::from_row_slice(1, 2, &[c(f64::NAN, 0.0), cr(1.0)]);
        assert!(numeric_rank(&m, &tol).is_err());
    }

    #[test]
    fn nullspace_of_zero_row() {
        let tol = Tolerance::default();
        let m = CMat::zeros(1, 4);
        let ns = nullspace(&m, &tol).unwrap();
        assert_eq!(ns.len(), 4);
        // orthonormality
        for i in 0..4 {
            for j in 0..4 {
                let g = ns[i].dotc(&ns[j]).norm();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nullspace_of_projector_bra() {
        let tol = Tolerance::default();
        // single row = ⟨00| over C⁴
        let m = bras_from_kets(&[ket(&[0, 0])]);
        let ns = nullspace(&m, &tol).unwrap();
        assert_eq!(ns.len(), 3);
        let want: Vec<CVec> = vec![ket(&[0, 1]), ket(&[1, 0]), ket(&[1, 1])];
        assert!(span_distance(&ns, &want).unwrap() < 1e-10);
    }

    #[test]
    fn nullspace_of_two_singlet_bras_is_symmetric_subspace() {
        // rows ⟨Y|₁₂⊗I₃ and ⟨Y|₁₃⊗I₂ over C⁸ leave a 4-dimensional kernel
        let tol = Tolerance::default();
        let s = 1.0 / 2.0_f64.sqrt();
        let y = {
            let mut v = CVec::zeros(4);
            v[1] = cr(s);
            v[2] = cr(-s);
            v
        };
        let id2 = CMat::identity(2, 2);
        // ⟨Y|₁₂ ⊗ I₃: rows indexed by qubit 3
        let ybra = bras_from_kets(&[y.clone()]);
        let row12 = kron_mat(&ybra, &id2);
        // ⟨Y|₁₃ ⊗ I₂: build on (1,3) then swap qubits 2 and 3
        let row13_unpermuted = kron_mat(&ybra, &id2);
        let mut row13 = CMat::zeros(2, 8);
        for r in 0..2 {
            for idx in 0..8 {
                let (b1, b2, b3) = (idx >> 2 & 1, idx >> 1 & 1, idx & 1);
                let src = (b1 << 2) | (b3 << 1) | b2; // swap roles of qubits 2,3
                row13[(r, idx)] = row13_unpermuted[(r, src)];
            }
        }
        let mut m = CMat::zeros(4, 8);
        m.rows_mut(0, 2).copy_from(&row12);
        m.rows_mut(2, 2).copy_from(&row13);
        let ns = nullspace(&m, &tol).unwrap();
        assert_eq!(ns.len(), 4);
        // the symmetric subspace of 3 qubits: |000⟩, |111⟩, W, W̄
        let w = CVec::from_vec(vec![
            cr(0.0),
            cr(1.0),
            cr(1.0),
            cr(0.0),
            cr(1.0),
            cr(0.0),
            cr(0.0),
            cr(0.0),
        ]) / cr(3.0_f64.sqrt());
        let wbar = CVec::from_vec(vec![
            cr(0.0),
            cr(0.0),
            cr(0.0),
            cr(1.0),
            cr(0.0),
            cr(1.0),
            cr(1.0),
            cr(0.0),
        ]) / cr(3.0_f64.sqrt());
        let want = vec![ket(&[0, 0, 0]), ket(&[1, 1, 1]), w, wbar];
        assert!(span_distance(&ns, &want).unwrap() < 1e-10);
    }

    #[test]
    fn orthonormalize_collapses_duplicates() {
        let tol = Tolerance::default();
        let vs = vec![ket(&[0, 0]), ket(&[0, 0])];
        let basis = orthonormalize(&vs, &tol).unwrap();
        assert_eq!(basis.len(), 1);
        assert!((basis[0][0].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthonormalize_keeps_independent_pair() {
        let tol = Tolerance::default();
        let basis = orthonormalize(&[ket(&[0, 0]), ket(&[1, 1])], &tol).unwrap();
        assert_eq!(basis.len(), 2);
    }

    #[test]
    fn orthonormalize_gram_schmidt_by_hand() {
        // {|00⟩, (|00⟩+|11⟩)/√2} → {|00⟩, |11⟩}
        let tol = Tolerance::default();
        let s = 1.0 / 2.0_f64.sqrt();
        let bell = {
            let mut v = CVec::zeros(4);
            v[0] = cr(s);
            v[3] = cr(s);
            v
        };
        let basis = orthonormalize(&[ket(&[0, 0]), bell], &tol).unwrap();
        assert_eq!(basis.len(), 2);
        assert!((basis[0].clone() - ket(&[0, 0])).norm() < 1e-12);
        assert!((basis[1].clone() - ket(&[1, 1])).norm() < 1e-12);
    }

    #[test]
    fn span_distance_phase_invariant() {
        let e0 = CVec::from_vec(vec![cr(1.0), cr(0.0)]);
        let e0_phased = CVec::from_vec(vec![c(0.6, 0.8), cr(0.0)]);
        assert!(span_distance(&[e0.clone()], &[e0_phased]).unwrap() < 1e-12);
        let e1 = CVec::from_vec(vec![cr(0.0), cr(1.0)]);
        let d = span_distance(&[e0.clone()], &[e1.clone()]).unwrap();
        assert!((d - 2.0_f64.sqrt()).abs() < 1e-12);
        // same span in a rotated basis
        let s = 1.0 / 2.0_f64.sqrt();
        let plus = CVec::from_vec(vec![cr(s), cr(s)]);
        let minus = CVec::from_vec(vec![cr(s), cr(-s)]);
        assert!(span_distance(&[e0, e1], &[plus, minus]).unwrap() < 1e-12);
    }

    #[test]
    fn nullspace_plus_rowspace_dims() {
        let tol = Tolerance::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let rows = rng.gen_range(1..6);
            let cols = rng.gen_range(1..7);
            let m = CMat::from_fn(rows, cols, |_, _| {
                c(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
            });
            let rank = numeric_rank(&m, &tol).unwrap();
            let ns = nullspace(&m, &tol).unwrap();
            assert_eq!(rank + ns.len(), cols);
        }
    }

    #[test]
    fn constructed_rank_recovered() {
        let tol = Tolerance::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = rng.gen_range(3..8);
            let r = rng.gen_range(1..=n.min(4));
            // sum of r outer products of random vectors
            let mut m = CMat::zeros(n, n);
            for _ in 0..r {
                let u = random_cvec(&mut rng, n);
                let v = random_cvec(&mut rng, n);
                m += u * v.adjoint();
            }
            assert_eq!(numeric_rank(&m, &tol).unwrap(), r);
        }
    }

    proptest! {
        #[test]
        fn span_distance_symmetric_and_reflexive(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(2..6);
            let ka = rng.gen_range(1..=n);
            let kb = rng.gen_range(1..=n);
            let a: Vec<CVec> = (0..ka).map(|_| random_cvec(&mut rng, n)).collect();
            let b: Vec<CVec> = (0..kb).map(|_| random_cvec(&mut rng, n)).collect();
            let dab = span_distance(&a, &b).unwrap();
            let dba = span_distance(&b, &a).unwrap();
            prop_assert!((dab - dba).abs() < 1e-10);
            prop_assert!(span_distance(&a, &a).unwrap() < 1e-12);
        }
    }
}
