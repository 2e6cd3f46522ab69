//! Independent ground truth: dense brute-force kernels of the stacked
//! constraint bras, classical 2-CNF model counting, and solution checking.
//!
//! Nothing in here shares code with the rewrite pipeline beyond the basic
//! linear algebra, so it can referee every rewrite step.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::instance::{Instance, Lit, Pair, QubitId};
use crate::numerics::{self, cr, CMat, CVec, C64, Tolerance};

/// Hard default cap on oracle qubit count.
pub const DEFAULT_ORACLE_CAP: usize = 12;

/// Brute-force kernel of an instance: orthonormal basis over the sorted
/// active qubits, first qubit most significant.
#[derive(Debug, Clone)]
pub struct Kernel {
    pub qubits: Vec<QubitId>,
    pub dim: usize,
    pub basis: Vec<CVec>,
}

/// Outcome of comparing a solver description against the brute-force kernel.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub dims_match: bool,
    pub solver_dim: String,
    pub oracle_dim: usize,
    pub span_dist: f64,
    pub max_residual: f64,
    /// `(pair or qubit label, residual)` per original constraint.
    pub residuals: Vec<(String, f64)>,
    pub eps_span: f64,
    pub eps_residual: f64,
}

impl CheckReport {
    pub fn pass(&self) -> bool {
        self.dims_match && self.span_dist <= self.eps_span && self.max_residual <= self.eps_residual
    }
}

// ---------------------------------------------------------------------------
// Stacked-bras route (reference construction, small instances)
// ---------------------------------------------------------------------------

/// Matrix whose rows are every constraint bra embedded into the full register
/// with identities on untouched qubits.
pub fn stacked_matrix(inst: &Instance) -> CMat {
    let qubits = inst.sorted_active();
    let k = qubits.len();
    let dim = 1usize << k;
    let pos: BTreeMap<QubitId, usize> = qubits.iter().enumerate().map(|(i, q)| (*q, i)).collect();

    let mut rows: Vec<CVec> = Vec::new();
    for (pair, block) in &inst.blocks {
        let (pa, pb) = (pos[&pair.a], pos[&pair.b]);
        let (sa, sb) = (k - 1 - pa, k - 1 - pb);
        for v in &block.vectors {
            // one row per spectator assignment
            for base in 0..dim {
                if base >> sa & 1 != 0 || base >> sb & 1 != 0 {
                    continue;
                }
                let mut row = CVec::zeros(dim);
                for pi in 0..4 {
                    let (ba, bb) = (pi >> 1, pi & 1);
                    let idx = base | ba << sa | bb << sb;
                    row[idx] = v[pi].conj();
                }
                rows.push(row);
            }
        }
    }
    for (q, u) in &inst.units {
        let s = k - 1 - pos[q];
        for base in 0..dim {
            if base >> s & 1 != 0 {
                continue;
            }
            let mut row = CVec::zeros(dim);
            row[base] = u[0].conj();
            row[base | 1 << s] = u[1].conj();
            rows.push(row);
        }
    }
    if rows.is_empty() {
        CMat::zeros(0, dim)
    } else {
        CMat::from_fn(rows.len(), dim, |i, j| rows[i][j])
    }
}

/// Kernel by the literal construction: nullspace of the stacked constraint
/// bras. Exponential in everything; used as the reference for `brute_kernel`.
pub fn stacked_kernel(inst: &Instance, tol: &Tolerance) -> Result<Kernel> {
    let qubits = inst.sorted_active();
    if qubits.len() > 8 {
        return Err(Error::ResourceCap {
            what: "stacked_kernel qubits",
            required: qubits.len().to_string(),
            cap: "8".into(),
        });
    }
    if !inst.unit_conflicts.is_empty() {
        return Ok(Kernel {
            qubits,
            dim: 0,
            basis: vec![],
        });
    }
    let m = stacked_matrix(inst);
    let basis = if m.nrows() == 0 {
        let dim = 1usize << qubits.len();
        (0..dim)
            .map(|i| {
                let mut v = CVec::zeros(dim);
                v[i] = cr(1.0);
                v
            })
            .collect()
    } else {
        numerics::nullspace(&m, tol)?
    };
    Ok(Kernel {
        qubits,
        dim: basis.len(),
        basis,
    })
}

// ---------------------------------------------------------------------------
// Incremental intersection route
// ---------------------------------------------------------------------------

/// Per-component working state: an orthonormal kernel basis over the touched
/// qubits, stored column-wise (2^t rows).
struct Register {
    qubits: Vec<QubitId>,
    basis: CMat,
}

impl Register {
    fn seed(q: QubitId) -> Self {
        Register {
            qubits: vec![q],
            basis: CMat::identity(2, 2),
        }
    }

    fn dim(&self) -> usize {
        self.basis.ncols()
    }

    fn extend(&mut self, q: QubitId) {
        let (rows, cols) = (self.basis.nrows(), self.basis.ncols());
        let mut next = CMat::zeros(rows * 2, cols * 2);
        for c in 0..cols {
            for i in 0..rows {
                let z = self.basis[(i, c)];
                next[(2 * i, 2 * c)] = z;
                next[(2 * i + 1, 2 * c + 1)] = z;
            }
        }
        self.basis = next;
        self.qubits.push(q);
    }

    fn position(&self, q: QubitId) -> usize {
        self.qubits.iter().position(|x| *x == q).unwrap()
    }

    /// Intersect the current span with the kernel of a projector, given as a
    /// closure producing the violation `Π·col` of each basis column.
    fn intersect(&mut self, violation: impl Fn(&CVec) -> CVec, tol: &Tolerance) {
        let d = self.dim();
        if d == 0 {
            return;
        }
        let cols: Vec<CVec> = (0..d).map(|c| self.basis.column(c).into_owned()).collect();

        // relative rank cutoff over the violation norms
        let mut smax = 0.0_f64;
        let norms: Vec<f64> = cols
            .iter()
            .map(|col| {
                let w = violation(col);
                let n = w.norm();
                if n > smax {
                    smax = n;
                }
                n
            })
            .collect();
        let _ = norms;
        let cutoff = (tol.eps_rank * smax).max(1e-13);

        // orthonormal basis of the violation space with coefficients
        let mut rw: Vec<CVec> = Vec::new();
        let mut coeff_rows: Vec<Vec<C64>> = Vec::new();
        for (c, col) in cols.iter().enumerate() {
            let mut w = violation(col);
            for _ in 0..2 {
                for (i, r) in rw.iter().enumerate() {
                    let g = r.dotc(&w);
                    coeff_rows[i][c] += g;
                    w -= r * g;
                }
            }
            let n = w.norm();
            if n > cutoff {
                rw.push(w / cr(n));
                let mut row = vec![C64::new(0.0, 0.0); d];
                row[c] = cr(n);
                coeff_rows.push(row);
            }
        }
        let r = rw.len();
        if r == 0 {
            return;
        }
        let coeffs = CMat::from_fn(r, d, |i, j| coeff_rows[i][j]);
        self.basis = drop_rowspace(&self.basis, &coeffs);
    }
}

/// Rotate `basis` by a unitary `Q` (built from Householder reflectors) so the
/// first `r` columns absorb the row space of `coeffs`, then drop them. The
/// remaining columns are an orthonormal basis of `span(basis) ∩ ker(coeffs)`.
fn drop_rowspace(basis: &CMat, coeffs: &CMat) -> CMat {
    let d = coeffs.ncols();
    let r = coeffs.nrows();
    let mut a = coeffs.adjoint(); // d × r
    let mut b = basis.clone();
    for j in 0..r {
        let m = d - j;
        let mut v = CVec::zeros(m);
        for i in 0..m {
            v[i] = a[(j + i, j)];
        }
        let xnorm = v.norm();
        if xnorm < 1e-300 {
            continue;
        }
        let x1 = v[0];
        let phase = if x1.norm() > 0.0 { x1 / x1.norm() } else { C64::new(1.0, 0.0) };
        let alpha = -phase * xnorm;
        v[0] = x1 - alpha;
        let vnorm2 = v.norm_squared();
        if vnorm2 < 1e-300 {
            continue;
        }
        let scale = 2.0 / vnorm2;
        // reflect the remaining columns of a
        for col in j..r {
            let mut s = C64::new(0.0, 0.0);
            for i in 0..m {
                s += v[i].conj() * a[(j + i, col)];
            }
            s *= cr(scale);
            for i in 0..m {
                let delta = v[i] * s;
                a[(j + i, col)] -= delta;
            }
        }
        // accumulate onto b: b ← b · H over coefficient indices j..d
        let rows = b.nrows();
        let mut bv = CVec::zeros(rows);
        for i in 0..m {
            let vi = v[i];
            if vi.norm() == 0.0 {
                continue;
            }
            for row in 0..rows {
                bv[row] += b[(row, j + i)] * vi;
            }
        }
        for i in 0..m {
            let f = cr(scale) * v[i].conj();
            if f.norm() == 0.0 {
                continue;
            }
            for row in 0..rows {
                let delta = bv[row] * f;
                b[(row, j + i)] -= delta;
            }
        }
    }
    b.columns(r, d - r).into_owned()
}

fn pair_projector(vectors: &[CVec]) -> CMat {
    let mut p = CMat::zeros(4, 4);
    for v in vectors {
        p += v * v.adjoint();
    }
    p
}

fn apply_pair_projector(col: &CVec, t: usize, pa: usize, pb: usize, p: &CMat) -> CVec {
    let (sa, sb) = (t - 1 - pa, t - 1 - pb);
    let dim = col.len();
    let mut out = CVec::zeros(dim);
    for base in 0..dim {
        if base >> sa & 1 != 0 || base >> sb & 1 != 0 {
            continue;
        }
        let idx = [
            base,
            base | 1 << sb,
            base | 1 << sa,
            base | 1 << sa | 1 << sb,
        ];
        for (i, &ii) in idx.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (j, &jj) in idx.iter().enumerate() {
                acc += p[(i, j)] * col[jj];
            }
            out[ii] = acc;
        }
    }
    out
}

fn apply_unit_projector(col: &CVec, t: usize, pq: usize, u: &CVec) -> CVec {
    let s = t - 1 - pq;
    let dim = col.len();
    let mut out = CVec::zeros(dim);
    for base in 0..dim {
        if base >> s & 1 != 0 {
            continue;
        }
        let hi = base | 1 << s;
        let amp = u[0].conj() * col[base] + u[1].conj() * col[hi];
        out[base] = u[0] * amp;
        out[hi] = u[1] * amp;
    }
    out
}

fn components(inst: &Instance) -> Vec<Vec<QubitId>> {
    let qubits = inst.sorted_active();
    let mut parent: BTreeMap<QubitId, QubitId> = qubits.iter().map(|q| (*q, *q)).collect();
    fn find(parent: &mut BTreeMap<QubitId, QubitId>, mut x: QubitId) -> QubitId {
        while parent[&x] != x {
            let up = parent[&parent[&x]];
            parent.insert(x, up);
            x = up;
        }
        x
    }
    for pair in inst.blocks.keys() {
        let (ra, rb) = (find(&mut parent, pair.a), find(&mut parent, pair.b));
        if ra != rb {
            parent.insert(ra.max(rb), ra.min(rb));
        }
    }
    let mut groups: BTreeMap<QubitId, Vec<QubitId>> = BTreeMap::new();
    for q in &qubits {
        let root = find(&mut parent, *q);
        groups.entry(root).or_default().push(*q);
    }
    groups.into_values().collect()
}

fn solve_component(inst: &Instance, comp: &[QubitId], tol: &Tolerance) -> Register {
    let mut reg = Register::seed(comp[0]);
    let mut blocks: Vec<(Pair, &crate::instance::PairBlock)> = inst
        .blocks
        .iter()
        .filter(|(p, _)| comp.contains(&p.a))
        .map(|(p, b)| (*p, b))
        .collect();
    let mut units: BTreeMap<QubitId, &CVec> = inst
        .units
        .iter()
        .filter(|(q, _)| comp.contains(q))
        .map(|(q, u)| (*q, u))
        .collect();

    let apply_units_of = |reg: &mut Register, q: QubitId, units: &mut BTreeMap<QubitId, &CVec>| {
        if let Some(u) = units.remove(&q) {
            let t = reg.qubits.len();
            let pq = reg.position(q);
            let u = u.clone();
            reg.intersect(|col| apply_unit_projector(col, t, pq, &u), tol);
        }
    };

    apply_units_of(&mut reg, comp[0], &mut units);

    while !blocks.is_empty() {
        // prefer a block fully inside the register, else extend by one qubit
        let idx_full = blocks
            .iter()
            .position(|(p, _)| reg.qubits.contains(&p.a) && reg.qubits.contains(&p.b));
        let idx = match idx_full {
            Some(i) => i,
            None => blocks
                .iter()
                .position(|(p, _)| reg.qubits.contains(&p.a) || reg.qubits.contains(&p.b))
                .expect("component is connected"),
        };
        let (pair, block) = blocks.remove(idx);
        for q in [pair.a, pair.b] {
            if !reg.qubits.contains(&q) {
                reg.extend(q);
                apply_units_of(&mut reg, q, &mut units);
            }
        }
        let t = reg.qubits.len();
        let (pa, pb) = (reg.position(pair.a), reg.position(pair.b));
        let p = pair_projector(&block.vectors);
        reg.intersect(|col| apply_pair_projector(col, t, pa, pb, &p), tol);
        if reg.dim() == 0 {
            return reg;
        }
    }
    reg
}

fn check_cap(inst: &Instance, cap: usize) -> Result<Vec<QubitId>> {
    let qubits = inst.sorted_active();
    if qubits.len() > cap {
        return Err(Error::ResourceCap {
            what: "oracle qubits",
            required: qubits.len().to_string(),
            cap: cap.to_string(),
        });
    }
    Ok(qubits)
}

/// Exact kernel dimension without materializing the basis:
/// component dimensions multiplied.
pub fn brute_kernel_dim(inst: &Instance, cap: usize) -> Result<usize> {
    check_cap(inst, cap)?;
    if !inst.unit_conflicts.is_empty() {
        return Ok(0);
    }
    let tol = Tolerance::default();
    let mut dim = 1usize;
    for comp in components(inst) {
        let reg = solve_component(inst, &comp, &tol);
        dim *= reg.dim();
        if dim == 0 {
            return Ok(0);
        }
    }
    Ok(dim)
}

/// Exact kernel of the stacked constraint bras, computed constraint by
/// constraint per connected component. Returns an orthonormal basis over the
/// sorted active qubits.
pub fn brute_kernel(inst: &Instance, cap: usize) -> Result<Kernel> {
    let qubits = check_cap(inst, cap)?;
    if !inst.unit_conflicts.is_empty() {
        return Ok(Kernel {
            qubits,
            dim: 0,
            basis: vec![],
        });
    }
    let tol = Tolerance::default();
    let mut registers: Vec<Register> = Vec::new();
    for comp in components(inst) {
        let reg = solve_component(inst, &comp, &tol);
        if reg.dim() == 0 {
            return Ok(Kernel {
                qubits,
                dim: 0,
                basis: vec![],
            });
        }
        registers.push(reg);
    }

    // combine components by kron, then permute rows into sorted qubit order
    let mut order: Vec<QubitId> = Vec::new();
    let mut combined: Vec<CVec> = vec![CVec::from_vec(vec![cr(1.0)])];
    for reg in &registers {
        order.extend(&reg.qubits);
        let cols: Vec<CVec> = (0..reg.dim()).map(|c| reg.basis.column(c).into_owned()).collect();
        let mut next = Vec::with_capacity(combined.len() * cols.len());
        for a in &combined {
            for b in &cols {
                next.push(numerics::kron_vec(a, b));
            }
        }
        combined = next;
    }

    let k = qubits.len();
    debug_assert_eq!(order.len(), k);
    let pos_in_sorted: BTreeMap<QubitId, usize> =
        qubits.iter().enumerate().map(|(i, q)| (*q, i)).collect();
    // src index (order bits) → dst index (sorted bits)
    let dim = 1usize << k;
    let mut remap = vec![0usize; dim];
    for src in 0..dim {
        let mut dst = 0usize;
        for (p, q) in order.iter().enumerate() {
            let bit = src >> (k - 1 - p) & 1;
            dst |= bit << (k - 1 - pos_in_sorted[q]);
        }
        remap[src] = dst;
    }
    let basis: Vec<CVec> = combined
        .into_iter()
        .map(|v| {
            let mut out = CVec::zeros(dim);
            for (src, &dst) in remap.iter().enumerate() {
                out[dst] = v[src];
            }
            out
        })
        .collect();

    Ok(Kernel {
        qubits,
        dim: basis.len(),
        basis,
    })
}

// ---------------------------------------------------------------------------
// Solution checking
// ---------------------------------------------------------------------------

/// Compare a solver description against the brute-force kernel: dimension
/// equality, span distance of the materialized basis, and the residual of
/// every original constraint on every materialized state.
pub fn check_solution(
    inst: &Instance,
    desc: &crate::ttn::GroundSpaceDescription,
    tol: &Tolerance,
    cap: usize,
) -> Result<CheckReport> {
    let kernel = brute_kernel(inst, cap)?;
    let solver_dim = desc.dimension.to_str_radix(10);
    let dims_match = solver_dim == kernel.dim.to_string();

    let mut report = CheckReport {
        dims_match,
        solver_dim,
        oracle_dim: kernel.dim,
        span_dist: 0.0,
        max_residual: 0.0,
        residuals: Vec::new(),
        eps_span: tol.eps_span,
        eps_residual: tol.eps_residual,
    };
    if desc.leaf_basis.is_none() || kernel.dim == 0 {
        return Ok(report);
    }
    let states = crate::ttn::materialize(desc, cap.max(crate::ttn::DEFAULT_MATERIALIZE_CAP))?;
    report.span_dist = numerics::span_distance(&states, &kernel.basis)?;

    let qubits = inst.sorted_active();
    let k = qubits.len();
    let pos: BTreeMap<QubitId, usize> = qubits.iter().enumerate().map(|(i, q)| (*q, i)).collect();
    for (pair, block) in &inst.blocks {
        let p = pair_projector(&block.vectors);
        let mut worst = 0.0f64;
        for state in &states {
            let w = apply_pair_projector(state, k, pos[&pair.a], pos[&pair.b], &p);
            worst = worst.max(w.norm());
        }
        report.residuals.push((pair.to_string(), worst));
        report.max_residual = report.max_residual.max(worst);
    }
    for (q, u) in &inst.units {
        let mut worst = 0.0f64;
        for state in &states {
            let w = apply_unit_projector(state, k, pos[q], u);
            worst = worst.max(w.norm());
        }
        report.residuals.push((format!("unit {q}"), worst));
        report.max_residual = report.max_residual.max(worst);
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Classical model counting
// ---------------------------------------------------------------------------

/// Exhaustive 2-CNF model count over all `2^n` assignments.
pub fn count_2cnf(clauses: &[(Lit, Lit)], n: usize) -> Result<u64> {
    if n > 24 {
        return Err(Error::ResourceCap {
            what: "count_2cnf variables",
            required: n.to_string(),
            cap: "24".into(),
        });
    }
    for (la, lb) in clauses {
        if la.var >= n || lb.var >= n {
            return Err(Error::invalid("clause variable out of range"));
        }
    }
    let mut count = 0u64;
    for assign in 0u64..1 << n {
        let sat = clauses.iter().all(|(la, lb)| {
            let a = (assign >> la.var & 1 == 1) != la.negated;
            let b = (assign >> lb.var & 1 == 1) != lb.negated;
            a || b
        });
        if sat {
            count += 1;
        }
    }
    Ok(count)
}

/// Orthonormal Dicke basis of the symmetric subspace of `k` qubits,
/// for cross-checks against product spanning sets.
pub fn dicke_basis(k: usize) -> Vec<CVec> {
    let dim = 1usize << k;
    (0..=k)
        .map(|m| {
            let mut v = CVec::zeros(dim);
            let mut count = 0usize;
            for idx in 0..dim {
                if (idx as u64).count_ones() as usize == m {
                    v[idx] = cr(1.0);
                    count += 1;
                }
            }
            v / cr((count as f64).sqrt())
        })
        .collect()
}
