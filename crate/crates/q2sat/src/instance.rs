//! Problem data model: qubit-pair projector constraints, normalization,
//! instance generators, and JSON serialization.
//!
//! Basis conventions, fixed once for the whole crate:
//! * a pair `(a, b)` is always stored with `a < b` and qubit `a` as the left
//!   tensor factor, so a two-qubit vector is indexed `2·bit_a + bit_b` over
//!   the order `|00⟩, |01⟩, |10⟩, |11⟩`;
//! * in an `n`-qubit state, qubit 0 is the most significant bit of the
//!   amplitude index.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    self, c, cr, cond2, CVec, CMat, kron_vec, orthonormalize, phase_canonicalize, Tolerance,
};

pub type QubitId = usize;

/// Unordered qubit pair, stored sorted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pair {
    pub a: QubitId,
    pub b: QubitId,
}

impl Pair {
    pub fn new(x: QubitId, y: QubitId) -> Result<Self> {
        if x == y {
            return Err(Error::invalid(format!(
                "constraint pair must join two distinct qubits, got ({x},{y})"
            )));
        }
        Ok(Pair {
            a: x.min(y),
            b: x.max(y),
        })
    }

    pub fn contains(&self, q: QubitId) -> bool {
        self.a == q || self.b == q
    }

    /// The other endpoint.
    pub fn other(&self, q: QubitId) -> QubitId {
        if q == self.a {
            self.b
        } else {
            self.a
        }
    }
}

impl std::fmt::Display for Pair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.a, self.b)
    }
}

/// Swap the two tensor factors of a two-qubit vector.
pub fn swap_factors(v: &CVec) -> CVec {
    debug_assert_eq!(v.len(), 4);
    CVec::from_vec(vec![v[0], v[2], v[1], v[3]])
}

/// The projector constraint on one qubit pair, stored as an orthonormal list
/// of constraint vectors in the two-qubit space. The rank is the list length.
#[derive(Debug, Clone)]
pub struct PairBlock {
    pub vectors: Vec<CVec>,
}

impl PairBlock {
    pub fn rank(&self) -> usize {
        self.vectors.len()
    }
}

/// A two-body frustration-free instance: pair blocks plus single-qubit
/// constraints over an active qubit set.
///
/// `n` is the id allocation bound; freshly read or generated instances are
/// active on all of `0..n`, while the rewrite pipeline shrinks `active` and
/// allocates new logical qubit ids at the top.
#[derive(Debug, Clone)]
pub struct Instance {
    pub n: usize,
    pub active: BTreeSet<QubitId>,
    pub blocks: BTreeMap<Pair, PairBlock>,
    pub units: BTreeMap<QubitId, CVec>,
    /// Qubits that accumulated two independent unit constraints; any entry
    /// means the instance is frustrated.
    pub unit_conflicts: BTreeSet<QubitId>,
}

impl Instance {
    /// Empty instance on `n` qubits, all active.
    pub fn empty(n: usize) -> Self {
        Instance {
            n,
            active: (0..n).collect(),
            blocks: BTreeMap::new(),
            units: BTreeMap::new(),
            unit_conflicts: BTreeSet::new(),
        }
    }

    /// Add a unit constraint, merging parallel duplicates and flagging
    /// conflicting (linearly independent) ones.
    pub fn add_unit(&mut self, q: QubitId, v: CVec, tol: &Tolerance) {
        let mut v = v.clone();
        let norm = v.norm();
        debug_assert!(norm > 0.0);
        v /= cr(norm);
        phase_canonicalize(&mut v);
        match self.units.get(&q) {
            Some(existing) => {
                if !numerics::parallel(existing, &v, tol) {
                    self.unit_conflicts.insert(q);
                }
            }
            None => {
                self.units.insert(q, v);
            }
        }
    }

    /// Stack constraint vectors onto a pair, keeping the block orthonormal.
    pub fn add_block_vectors(&mut self, pair: Pair, vs: &[CVec], tol: &Tolerance) -> Result<()> {
        let mut all: Vec<CVec> = self
            .blocks
            .get(&pair)
            .map(|b| b.vectors.clone())
            .unwrap_or_default();
        all.extend_from_slice(vs);
        let ortho = orthonormalize(&all, tol)?;
        if ortho.is_empty() {
            self.blocks.remove(&pair);
        } else {
            self.blocks.insert(pair, PairBlock { vectors: ortho });
        }
        Ok(())
    }

    pub fn max_block_rank(&self) -> usize {
        self.blocks.values().map(|b| b.rank()).max().unwrap_or(0)
    }

    /// Blocks and units touching qubit `q`.
    pub fn pairs_touching(&self, q: QubitId) -> Vec<Pair> {
        self.blocks
            .keys()
            .filter(|p| p.contains(q))
            .cloned()
            .collect()
    }

    pub fn sorted_active(&self) -> Vec<QubitId> {
        self.active.iter().cloned().collect()
    }

    fn check_ids(&self) -> Result<()> {
        for pair in self.blocks.keys() {
            if pair.b >= self.n {
                return Err(Error::invalid(format!(
                    "qubit index {} out of range (n = {})",
                    pair.b, self.n
                )));
            }
        }
        for q in self.units.keys() {
            if *q >= self.n {
                return Err(Error::invalid(format!(
                    "qubit index {q} out of range (n = {})",
                    self.n
                )));
            }
        }
        Ok(())
    }
}

/// Group raw two-qubit constraints per pair and orthonormalize each block.
///
/// Vectors given on a reversed pair `(b, a)` with `b > a` are reindexed by
/// swapping tensor factors. Rank-4 blocks are permitted here; they surface as
/// frustration during reduction.
pub fn normalize(n: usize, raw: &[((QubitId, QubitId), CVec)], tol: &Tolerance) -> Result<Instance> {
    let mut grouped: BTreeMap<Pair, Vec<CVec>> = BTreeMap::new();
    for ((x, y), v) in raw {
        if *x >= n || *y >= n {
            return Err(Error::invalid(format!(
                "qubit index {} out of range (n = {n})",
                x.max(y)
            )));
        }
        let pair = Pair::new(*x, *y)?;
        if v.len() != 4 {
            return Err(Error::invalid(format!(
                "pair constraint vector must live in C^4, got dimension {}",
                v.len()
            )));
        }
        if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("constraint vector has non-finite entries"));
        }
        if v.norm() == 0.0 {
            return Err(Error::invalid("zero constraint vector"));
        }
        let oriented = if *x <= *y { v.clone() } else { swap_factors(v) };
        grouped.entry(pair).or_default().push(oriented);
    }
    let mut inst = Instance::empty(n);
    for (pair, vs) in grouped {
        let ortho = orthonormalize(&vs, tol)?;
        debug_assert!(!ortho.is_empty());
        inst.blocks.insert(pair, PairBlock { vectors: ortho });
    }
    Ok(inst)
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

fn product_vec(va: &CVec, vb: &CVec) -> CVec {
    kron_vec(va, vb)
}

fn ket0() -> CVec {
    CVec::from_vec(vec![cr(1.0), cr(0.0)])
}

fn ket1() -> CVec {
    CVec::from_vec(vec![cr(0.0), cr(1.0)])
}

/// The singlet state `(|01⟩ − |10⟩)/√2`.
pub fn singlet() -> CVec {
    let s = 1.0 / 2.0_f64.sqrt();
    CVec::from_vec(vec![cr(0.0), cr(s), cr(-s), cr(0.0)])
}

/// Product constraint `|va⟩_x ⊗ |vb⟩_y` on an arbitrary (unsorted) pair.
pub fn make_product_constraint(
    x: QubitId,
    va: &CVec,
    y: QubitId,
    vb: &CVec,
) -> ((QubitId, QubitId), CVec) {
    ((x, y), product_vec(va, vb))
}

/// Alternating chain on `k` qubits: `|1⟩_i ⊗ |0⟩_{i+1}` for each chain edge.
/// Ground-space dimension is `k + 1`.
pub fn gen_chain(k: usize) -> Result<Instance> {
    if k < 2 {
        return Err(Error::invalid("chain needs at least 2 qubits"));
    }
    let raw: Vec<_> = (0..k - 1)
        .map(|i| make_product_constraint(i, &ket1(), i + 1, &ket0()))
        .collect();
    normalize(k, &raw, &Tolerance::default())
}

/// Alternating loop on `k` qubits: the chain plus a closing edge
/// `|1⟩_{k−1} ⊗ |0⟩_0`. Ground-space dimension is 2.
pub fn gen_loop(k: usize) -> Result<Instance> {
    if k < 3 {
        return Err(Error::invalid("loop needs at least 3 qubits"));
    }
    let mut raw: Vec<_> = (0..k - 1)
        .map(|i| make_product_constraint(i, &ket1(), i + 1, &ket0()))
        .collect();
    raw.push(make_product_constraint(k - 1, &ket1(), 0, &ket0()));
    normalize(k, &raw, &Tolerance::default())
}

/// Quasi-alternating loop on `k` qubits: alternating everywhere except vertex
/// 0, whose two incident directions are both `|1⟩`. The closing edge carries
/// `|1⟩_{k−1} ⊗ |1⟩_0`, so vertex 0 is forced to `|0⟩` and the dimension is
/// `k`.
pub fn gen_quasi_loop(k: usize) -> Result<Instance> {
    if k < 3 {
        return Err(Error::invalid("quasi-loop needs at least 3 qubits"));
    }
    let mut raw: Vec<_> = (0..k - 1)
        .map(|i| make_product_constraint(i, &ket1(), i + 1, &ket0()))
        .collect();
    raw.push(make_product_constraint(k - 1, &ket1(), 0, &ket1()));
    normalize(k, &raw, &Tolerance::default())
}

/// Star of singlet constraints on pairs `(0, i)`. The joint kernel is the
/// symmetric subspace, dimension `n + 1`.
pub fn gen_singlet_star(n: usize) -> Result<Instance> {
    if n < 2 {
        return Err(Error::invalid("singlet star needs at least 2 qubits"));
    }
    let raw: Vec<_> = (1..n).map(|i| ((0, i), singlet())).collect();
    normalize(n, &raw, &Tolerance::default())
}

fn random_invertible_2x2(rng: &mut ChaCha8Rng) -> CMat {
    loop {
        let m = CMat::from_fn(2, 2, |_, _| gaussian(rng));
        if cond2(&m) <= 1e3 {
            return m;
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> numerics::C64 {
    // Box-Muller, one complex Gaussian per call
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    c(r * (std::f64::consts::TAU * u2).cos(), r * (std::f64::consts::TAU * u2).sin())
}

/// Haar-like random single-qubit state.
pub fn random_state2(rng: &mut ChaCha8Rng) -> CVec {
    loop {
        let mut v = CVec::from_fn(2, |_, _| gaussian(rng));
        let n = v.norm();
        if n > 1e-6 {
            v /= cr(n);
            phase_canonicalize(&mut v);
            return v;
        }
    }
}

fn random_state4(rng: &mut ChaCha8Rng) -> CVec {
    loop {
        let mut v = CVec::from_fn(4, |_, _| gaussian(rng));
        let n = v.norm();
        if n > 1e-6 {
            v /= cr(n);
            phase_canonicalize(&mut v);
            return v;
        }
    }
}

/// Random connected graph on `n` vertices with `min(n, n(n−1)/2)` distinct
/// edges: a random attachment tree plus extra random edges.
fn random_connected_edges(n: usize, rng: &mut ChaCha8Rng) -> Vec<Pair> {
    let mut edges: BTreeSet<Pair> = BTreeSet::new();
    for i in 1..n {
        let j = rng.gen_range(0..i);
        edges.insert(Pair::new(i, j).unwrap());
    }
    let target = n.min(n * (n - 1) / 2);
    while edges.len() < target {
        let x = rng.gen_range(0..n);
        let y = rng.gen_range(0..n);
        if x != y {
            edges.insert(Pair::new(x, y).unwrap());
        }
    }
    edges.into_iter().collect()
}

/// Locally dressed singlet instance with ground-space dimension exactly
/// `n + 1`: one random invertible operator per qubit applied to singlet
/// constraints on a random connected graph.
pub fn gen_dressed_symmetric(n: usize, seed: u64) -> Result<Instance> {
    if n < 2 {
        return Err(Error::invalid("dressed instance needs at least 2 qubits"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames: Vec<CMat> = (0..n).map(|_| random_invertible_2x2(&mut rng)).collect();
    let y = singlet();
    let raw: Vec<_> = random_connected_edges(n, &mut rng)
        .into_iter()
        .map(|pair| {
            let op = numerics::kron_mat(&frames[pair.a], &frames[pair.b]);
            let mut v = &op * &y;
            let norm = v.norm();
            v /= cr(norm);
            ((pair.a, pair.b), v)
        })
        .collect();
    normalize(n, &raw, &Tolerance::default())
}

/// A 2-CNF literal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lit {
    pub var: usize,
    pub negated: bool,
}

impl Lit {
    pub fn pos(var: usize) -> Self {
        Lit { var, negated: false }
    }

    pub fn neg(var: usize) -> Self {
        Lit { var, negated: true }
    }

    /// The unique single-qubit state violating this literal.
    fn falsifying_state(&self) -> CVec {
        if self.negated {
            ket1()
        } else {
            ket0()
        }
    }
}

/// Embed a 2-CNF formula: clause `(l_a ∨ l_b)` becomes the product constraint
/// `|¬l_a⟩_a ⊗ |¬l_b⟩_b` forbidding exactly the falsifying assignment. The
/// ground-space dimension equals the classical model count.
pub fn gen_from_2cnf(clauses: &[(Lit, Lit)], n: usize) -> Result<Instance> {
    let mut raw = Vec::with_capacity(clauses.len());
    for (la, lb) in clauses {
        if la.var == lb.var {
            return Err(Error::invalid(format!(
                "clause has both literals on variable {}; not a two-qubit constraint",
                la.var
            )));
        }
        if la.var >= n || lb.var >= n {
            return Err(Error::invalid("clause variable out of range"));
        }
        raw.push(make_product_constraint(
            la.var,
            &la.falsifying_state(),
            lb.var,
            &lb.falsifying_state(),
        ));
    }
    normalize(n, &raw, &Tolerance::default())
}

/// Random product-constraint (dashed-only) instance on distinct pairs.
pub fn random_product_instance(n: usize, edges: usize, seed: u64) -> Result<Instance> {
    if n < 2 {
        return Err(Error::invalid("need at least 2 qubits"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = random_distinct_pairs(n, edges, &mut rng);
    let raw: Vec<_> = pairs
        .into_iter()
        .map(|p| {
            let va = random_state2(&mut rng);
            let vb = random_state2(&mut rng);
            make_product_constraint(p.a, &va, p.b, &vb)
        })
        .collect();
    normalize(n, &raw, &Tolerance::default())
}

/// Random mixed instance: blocks of rank 1-3 on distinct pairs, rank-1
/// constraints split between product and entangled vectors.
pub fn random_mixed_instance(n: usize, blocks: usize, seed: u64) -> Result<Instance> {
    if n < 2 {
        return Err(Error::invalid("need at least 2 qubits"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = random_distinct_pairs(n, blocks, &mut rng);
    let mut raw = Vec::new();
    for p in pairs {
        let roll: f64 = rng.gen();
        if roll < 0.6 {
            // rank 1: product or entangled
            if rng.gen::<bool>() {
                let va = random_state2(&mut rng);
                let vb = random_state2(&mut rng);
                raw.push(make_product_constraint(p.a, &va, p.b, &vb));
            } else {
                raw.push(((p.a, p.b), random_state4(&mut rng)));
            }
        } else {
            let rank = if roll < 0.85 { 2 } else { 3 };
            for _ in 0..rank {
                raw.push(((p.a, p.b), random_state4(&mut rng)));
            }
        }
    }
    normalize(n, &raw, &Tolerance::default())
}

fn random_distinct_pairs(n: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Pair> {
    let mut all: Vec<Pair> = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            all.push(Pair { a, b });
        }
    }
    // Fisher-Yates prefix shuffle
    let count = count.min(all.len());
    for i in 0..count {
        let j = rng.gen_range(i..all.len());
        all.swap(i, j);
    }
    all.truncate(count);
    all.sort();
    all
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    n: usize,
    constraints: Vec<ConstraintRec>,
    #[serde(default)]
    units: Vec<UnitRec>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintRec {
    qubits: [usize; 2],
    vectors: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UnitRec {
    qubit: usize,
    vector: Vec<[f64; 2]>,
}

pub(crate) fn cvec_to_pairs(v: &CVec) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

pub(crate) fn cvec_from_pairs(entries: &[[f64; 2]]) -> CVec {
    CVec::from_iterator(entries.len(), entries.iter().map(|[re, im]| c(*re, *im)))
}

/// Render an instance as the JSON interchange format.
pub fn to_json(inst: &Instance) -> Result<String> {
    if inst.active.len() != inst.n || inst.active.iter().cloned().ne(0..inst.n) {
        return Err(Error::precondition(
            "only instances active on all of 0..n can be serialized",
        ));
    }
    let file = InstanceFile {
        n: inst.n,
        constraints: inst
            .blocks
            .iter()
            .map(|(pair, block)| ConstraintRec {
                qubits: [pair.a, pair.b],
                vectors: block.vectors.iter().map(cvec_to_pairs).collect(),
            })
            .collect(),
        units: inst
            .units
            .iter()
            .map(|(q, v)| UnitRec {
                qubit: *q,
                vector: cvec_to_pairs(v),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).map_err(|e| Error::Parse {
        path: None,
        msg: e.to_string(),
    })
}

/// Parse an instance from the JSON interchange format, re-normalizing blocks.
pub fn from_json(text: &str) -> Result<Instance> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: None,
        msg: e.to_string(),
    })?;
    let tol = Tolerance::default();
    let mut raw = Vec::new();
    for rec in &file.constraints {
        if rec.vectors.is_empty() {
            return Err(Error::Parse {
                path: None,
                msg: format!("constraint on {:?} has no vectors", rec.qubits),
            });
        }
        for vec in &rec.vectors {
            if vec.len() != 4 {
                return Err(Error::Parse {
                    path: None,
                    msg: format!(
                        "pair constraint vector must have 4 complex entries, got {}",
                        vec.len()
                    ),
                });
            }
            raw.push(((rec.qubits[0], rec.qubits[1]), cvec_from_pairs(vec)));
        }
    }
    let mut inst = normalize(file.n, &raw, &tol).map_err(|e| Error::Parse {
        path: None,
        msg: e.to_string(),
    })?;
    for rec in &file.units {
        if rec.qubit >= file.n {
            return Err(Error::Parse {
                path: None,
                msg: format!("unit qubit {} out of range (n = {})", rec.qubit, file.n),
            });
        }
        if rec.vector.len() != 2 {
            return Err(Error::Parse {
                path: None,
                msg: "unit constraint vector must have 2 complex entries".into(),
            });
        }
        let v = cvec_from_pairs(&rec.vector);
        if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) || v.norm() == 0.0 {
            return Err(Error::Parse {
                path: None,
                msg: "unit constraint vector must be nonzero and finite".into(),
            });
        }
        inst.add_unit(rec.qubit, v, &tol);
    }
    inst.check_ids().map_err(|e| Error::Parse {
        path: None,
        msg: e.to_string(),
    })?;
    Ok(inst)
}

pub fn write_instance(inst: &Instance, path: impl AsRef<Path>) -> Result<()> {
    let text = to_json(inst)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    from_json(&text).map_err(|e| match e {
        Error::Parse { msg, .. } => Error::Parse {
            path: Some(path.display().to_string()),
            msg,
        },
        other => other,
    })
}

/// Parse a DIMACS-style 2-CNF file: `p cnf VARS CLAUSES` header, clauses of
/// exactly two non-zero literals terminated by 0.
pub fn parse_dimacs_2cnf(text: &str) -> Result<(Vec<(Lit, Lit)>, usize)> {
    let mut n = None;
    let mut clauses = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("p ") {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.len() != 3 || parts[0] != "cnf" {
                return Err(Error::Parse {
                    path: None,
                    msg: format!("line {}: malformed problem header", lineno + 1),
                });
            }
            n = Some(parts[1].parse::<usize>().map_err(|e| Error::Parse {
                path: None,
                msg: format!("line {}: {e}", lineno + 1),
            })?);
            continue;
        }
        let lits: Vec<i64> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<i64>().map_err(|e| Error::Parse {
                    path: None,
                    msg: format!("line {}: {e}", lineno + 1),
                })
            })
            .collect::<Result<_>>()?;
        if lits.last() != Some(&0) || lits.len() != 3 {
            return Err(Error::Parse {
                path: None,
                msg: format!(
                    "line {}: clauses must have exactly 2 literals terminated by 0",
                    lineno + 1
                ),
            });
        }
        let to_lit = |x: i64| Lit {
            var: (x.unsigned_abs() as usize) - 1,
            negated: x < 0,
        };
        clauses.push((to_lit(lits[0]), to_lit(lits[1])));
    }
    let n = n.ok_or_else(|| Error::Parse {
        path: None,
        msg: "missing problem header".into(),
    })?;
    Ok((clauses, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::ket;

    #[test]
    fn normalize_merges_duplicates() {
        let tol = Tolerance::default();
        let raw = vec![((0, 1), ket(&[0, 0])), ((0, 1), ket(&[0, 0]))];
        let inst = normalize(2, &raw, &tol).unwrap();
        assert_eq!(inst.blocks.len(), 1);
        assert_eq!(inst.blocks[&Pair { a: 0, b: 1 }].rank(), 1);
    }

    #[test]
    fn normalize_orthonormalizes_block() {
        let tol = Tolerance::default();
        let s = 1.0 / 2.0_f64.sqrt();
        let bell = CVec::from_vec(vec![cr(s), cr(0.0), cr(0.0), cr(s)]);
        let raw = vec![((0, 1), ket(&[0, 0])), ((0, 1), bell)];
        let inst = normalize(2, &raw, &tol).unwrap();
        assert_eq!(inst.blocks[&Pair { a: 0, b: 1 }].rank(), 2);
    }

    #[test]
    fn normalize_swaps_reversed_pairs() {
        let tol = Tolerance::default();
        let raw = vec![((1, 0), ket(&[0, 1]))];
        let inst = normalize(2, &raw, &tol).unwrap();
        let block = &inst.blocks[&Pair { a: 0, b: 1 }];
        assert_eq!(block.rank(), 1);
        assert!((block.vectors[0].clone() - ket(&[1, 0])).norm() < 1e-12);
    }

    #[test]
    fn normalize_rejects_bad_input() {
        let tol = Tolerance::default();
        assert!(normalize(2, &[((0, 1), CVec::zeros(4))], &tol).is_err());
        assert!(normalize(2, &[((0, 2), ket(&[0, 0]))], &tol).is_err());
        assert!(normalize(2, &[((1, 1), ket(&[0, 0]))], &tol).is_err());
    }

    #[test]
    fn chain_loop_quasi_shapes() {
        let chain = gen_chain(3).unwrap();
        assert_eq!(chain.blocks.len(), 2);
        assert!(gen_chain(1).is_err());

        let lp = gen_loop(4).unwrap();
        assert_eq!(lp.blocks.len(), 4);
        // closing edge reindexed onto (0, 3) with swapped factors: |0⟩_0 |1⟩_3
        let closing = &lp.blocks[&Pair { a: 0, b: 3 }];
        assert!((closing.vectors[0].clone() - ket(&[0, 1])).norm() < 1e-12);
        assert!(gen_loop(2).is_err());

        let quasi = gen_quasi_loop(3).unwrap();
        let closing = &quasi.blocks[&Pair { a: 0, b: 2 }];
        assert!((closing.vectors[0].clone() - ket(&[1, 1])).norm() < 1e-12);
        assert!(gen_quasi_loop(2).is_err());
    }

    #[test]
    fn alternation_predicate_holds_for_generators() {
        // at each interior chain/loop vertex the two incident single-qubit
        // directions must be linearly independent
        let tol = Tolerance::default();
        for inst in [gen_chain(5).unwrap(), gen_loop(5).unwrap()] {
            let mut dirs: BTreeMap<QubitId, Vec<CVec>> = BTreeMap::new();
            for (pair, block) in &inst.blocks {
                let v = &block.vectors[0];
                // product split by construction: |x⟩⊗|y⟩
                let (kind, factors) =
                    crate::graph::classify_edge(v, &tol).unwrap();
                assert_eq!(kind, crate::graph::EdgeKind::Dashed);
                let (fa, fb) = factors.unwrap();
                dirs.entry(pair.a).or_default().push(fa);
                dirs.entry(pair.b).or_default().push(fb);
            }
            for (_, ds) in dirs {
                if ds.len() == 2 {
                    assert!(numerics::overlap(&ds[0], &ds[1]) < 1.0 - 1e-9);
                }
            }
        }
    }

    #[test]
    fn star_has_singlets() {
        let star = gen_singlet_star(4).unwrap();
        assert_eq!(star.blocks.len(), 3);
        for block in star.blocks.values() {
            assert_eq!(block.rank(), 1);
        }
    }

    #[test]
    fn dressed_identity_frames_reduce_to_singlets() {
        // the generator draws random frames; with seed-specific draws the
        // instance stays rank 1 on a connected graph
        let inst = gen_dressed_symmetric(3, 42).unwrap();
        assert!(inst.blocks.len() >= 2);
        for block in inst.blocks.values() {
            assert_eq!(block.rank(), 1);
        }
    }

    #[test]
    fn cnf_embedding() {
        // (x0 ∨ x1) forbids 00
        let inst = gen_from_2cnf(&[(Lit::pos(0), Lit::pos(1))], 2).unwrap();
        let block = &inst.blocks[&Pair { a: 0, b: 1 }];
        assert!((block.vectors[0].clone() - ket(&[0, 0])).norm() < 1e-12);
        // tautology-shaped clause on one variable is rejected
        assert!(gen_from_2cnf(&[(Lit::pos(0), Lit::neg(0))], 2).is_err());
    }

    #[test]
    fn json_round_trip() {
        let inst = gen_chain(3).unwrap();
        let text = to_json(&inst).unwrap();
        let back = from_json(&text).unwrap();
        assert_eq!(back.n, 3);
        assert_eq!(back.blocks.len(), 2);
        for (pair, block) in &inst.blocks {
            let rt = &back.blocks[pair];
            assert_eq!(rt.rank(), block.rank());
            for (a, b) in block.vectors.iter().zip(&rt.vectors) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn json_rejects_malformed() {
        // qubit index out of range
        let bad = r#"{"n": 2, "constraints": [{"qubits": [0, 5], "vectors": [[[1,0],[0,0],[0,0],[0,0]]]}]}"#;
        assert!(from_json(bad).is_err());
        // zero vector
        let zero = r#"{"n": 2, "constraints": [{"qubits": [0, 1], "vectors": [[[0,0],[0,0],[0,0],[0,0]]]}]}"#;
        assert!(from_json(zero).is_err());
        // unknown fields rejected
        let unknown = r#"{"n": 2, "constraints": [], "extra": 1}"#;
        assert!(from_json(unknown).is_err());
    }

    #[test]
    fn normalize_idempotent_through_serialization() {
        let inst = random_mixed_instance(5, 6, 3).unwrap();
        let text = to_json(&inst).unwrap();
        let back = from_json(&text).unwrap();
        for (pair, block) in &inst.blocks {
            let rt = &back.blocks[pair];
            assert_eq!(rt.rank(), block.rank());
            let d = numerics::span_distance(&block.vectors, &rt.vectors).unwrap();
            assert!(d < 1e-9, "block {pair} span drifted: {d}");
        }
    }

    #[test]
    fn dimacs_parsing() {
        let text = "c comment\np cnf 3 2\n1 -2 0\n2 3 0\n";
        let (clauses, n) = parse_dimacs_2cnf(text).unwrap();
        assert_eq!(n, 3);
        assert_eq!(clauses.len(), 2);
        assert_eq!(clauses[0], (Lit::pos(0), Lit::neg(1)));
        assert!(parse_dimacs_2cnf("p cnf 2 1\n1 0\n").is_err());
    }
}
