//! Interaction graph of a homogeneous instance and its simplification.
//!
//! Every edge carries exactly one unit-norm rank-1 constraint: solid when the
//! vector is entangled, dashed when it is a product. Two sliding rewrites
//! (both ground-space preserving) reduce any such graph to a dashed backbone
//! with solid tails attached at single vertices. Stacked incompatible
//! constraints abort with a [`SimplifyOutcome::Collision`], which the caller
//! resolves by re-entering rank reduction.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::instance::{Instance, Pair, QubitId, singlet, swap_factors};
use crate::numerics::{
    self, cr, cond2, inv2, kron_mat, kron_vec, phase_canonicalize, CMat, CVec, Tolerance,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    /// Entangled constraint.
    Solid,
    /// Product constraint `|α⟩_a ⊗ |β⟩_b`.
    Dashed,
}

/// Classify a two-qubit constraint vector, returning the product factors of a
/// dashed edge. The vector `(a,b,c,d)` is solid iff `|ad − bc|` exceeds
/// `eps_rank`; otherwise the factors come from the dominant singular pair of
/// its 2×2 reshape.
pub fn classify_edge(v: &CVec, tol: &Tolerance) -> Result<(EdgeKind, Option<(CVec, CVec)>)> {
    if v.len() != 4 {
        return Err(Error::invalid("edge constraint must live in C^4"));
    }
    let det = v[0] * v[3] - v[1] * v[2];
    if det.norm() > tol.eps_rank {
        return Ok((EdgeKind::Solid, None));
    }
    let m = CMat::from_row_slice(2, 2, &[v[0], v[1], v[2], v[3]]);
    let svd = m.svd(true, true);
    let u = svd.u.as_ref().expect("2x2 svd u");
    let vt = svd.v_t.as_ref().expect("2x2 svd v_t");
    let mut alpha = CVec::from_vec(vec![u[(0, 0)], u[(1, 0)]]);
    let mut beta = CVec::from_vec(vec![vt[(0, 0)], vt[(0, 1)]]);
    let (na, nb) = (alpha.norm(), beta.norm());
    alpha /= cr(na);
    beta /= cr(nb);
    phase_canonicalize(&mut alpha);
    phase_canonicalize(&mut beta);
    Ok((EdgeKind::Dashed, Some((alpha, beta))))
}

/// Invertible `L` with `(I ⊗ L)|Y⟩ = φ` for an entangled `φ = (a,b,c,d)`:
/// columns `√2·(−c,−d)` and `√2·(a,b)`. Verified by reconstruction.
pub fn extract_local_frame(phi: &CVec, tol: &Tolerance) -> Result<CMat> {
    let (kind, _) = classify_edge(phi, tol)?;
    if kind == EdgeKind::Dashed {
        return Err(Error::precondition(
            "extract_local_frame requires an entangled constraint",
        ));
    }
    let s = 2.0_f64.sqrt();
    let l = CMat::from_row_slice(
        2,
        2,
        &[
            -phi[2] * cr(s),
            phi[0] * cr(s),
            -phi[3] * cr(s),
            phi[1] * cr(s),
        ],
    );
    let resid = (&kron_mat(&CMat::identity(2, 2), &l) * &singlet() - phi).norm();
    if resid > tol.eps_residual {
        return Err(Error::internal(format!(
            "local frame reconstruction residual {resid:.3e}"
        )));
    }
    Ok(l)
}

/// Per-qubit invertible change of frame; identity where absent.
#[derive(Debug, Clone, Default)]
pub struct LocalFrame {
    pub ops: BTreeMap<QubitId, CMat>,
}

impl LocalFrame {
    pub fn get(&self, q: QubitId) -> CMat {
        self.ops
            .get(&q)
            .cloned()
            .unwrap_or_else(|| CMat::identity(2, 2))
    }

    pub fn set(&mut self, q: QubitId, op: CMat) {
        self.ops.insert(q, op);
    }
}

/// View an edge vector with `first` as the left tensor factor.
pub fn oriented(pair: Pair, v: &CVec, first: QubitId) -> CVec {
    debug_assert!(pair.contains(first));
    if first == pair.a {
        v.clone()
    } else {
        swap_factors(v)
    }
}

/// Store a vector given with `x` as the left factor under the sorted pair.
pub fn store_oriented(x: QubitId, y: QubitId, v: &CVec) -> (Pair, CVec) {
    let pair = Pair::new(x, y).expect("distinct qubits");
    if x < y {
        (pair, v.clone())
    } else {
        (pair, swap_factors(v))
    }
}

/// Interaction graph of a homogeneous instance.
#[derive(Debug, Clone)]
pub struct InteractionGraph {
    pub n: usize,
    pub vertices: BTreeSet<QubitId>,
    pub edges: BTreeMap<Pair, CVec>,
}

/// Outcome of inserting a constraint onto a pair that may be occupied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Insert {
    Added,
    /// The pair already carried a parallel constraint; duplicate dropped.
    Collapsed,
    /// Linearly independent constraints stacked on one pair.
    Collision,
}

impl InteractionGraph {
    pub fn from_instance(inst: &Instance) -> Result<Self> {
        if !inst.units.is_empty() || !inst.unit_conflicts.is_empty() {
            return Err(Error::precondition(
                "interaction graph requires all units resolved",
            ));
        }
        if inst.max_block_rank() > 1 {
            return Err(Error::precondition(
                "interaction graph requires a homogeneous instance",
            ));
        }
        let mut edges = BTreeMap::new();
        for (pair, block) in &inst.blocks {
            let mut v = block.vectors[0].clone();
            let n = v.norm();
            v /= cr(n);
            phase_canonicalize(&mut v);
            edges.insert(*pair, v);
        }
        Ok(InteractionGraph {
            n: inst.n,
            vertices: inst.active.clone(),
            edges,
        })
    }

    /// Rebuild an instance (one rank-1 block per edge, extra stacked vectors
    /// merged in).
    pub fn to_instance(&self) -> Instance {
        let mut inst = Instance::empty(self.n);
        inst.active = self.vertices.clone();
        for (pair, v) in &self.edges {
            inst.blocks.insert(
                *pair,
                crate::instance::PairBlock {
                    vectors: vec![v.clone()],
                },
            );
        }
        inst
    }

    pub fn insert_edge(&mut self, pair: Pair, v: CVec, tol: &Tolerance) -> Insert {
        let mut v = v;
        let n = v.norm();
        debug_assert!(n > 0.0);
        v /= cr(n);
        phase_canonicalize(&mut v);
        match self.edges.get(&pair) {
            Some(existing) => {
                if numerics::parallel(existing, &v, tol) {
                    Insert::Collapsed
                } else {
                    Insert::Collision
                }
            }
            None => {
                self.edges.insert(pair, v);
                Insert::Added
            }
        }
    }

    pub fn edges_at(&self, q: QubitId) -> Vec<Pair> {
        self.edges.keys().filter(|p| p.contains(q)).cloned().collect()
    }

    fn solid_adjacency(&self, tol: &Tolerance) -> BTreeMap<QubitId, Vec<QubitId>> {
        let mut adj: BTreeMap<QubitId, Vec<QubitId>> = BTreeMap::new();
        for (pair, v) in &self.edges {
            if matches!(classify_edge(v, tol), Ok((EdgeKind::Solid, _))) {
                adj.entry(pair.a).or_default().push(pair.b);
                adj.entry(pair.b).or_default().push(pair.a);
            }
        }
        for nbrs in adj.values_mut() {
            nbrs.sort_unstable();
        }
        adj
    }

    /// Graphviz dump; solid and dashed edge styles mirror the constraint kind.
    pub fn to_dot(&self, tol: &Tolerance) -> String {
        let mut out = String::from("graph interaction {\n");
        for v in &self.vertices {
            out.push_str(&format!("  q{v};\n"));
        }
        for (pair, vec) in &self.edges {
            let style = match classify_edge(vec, tol) {
                Ok((EdgeKind::Solid, _)) => "solid",
                _ => "dashed",
            };
            out.push_str(&format!("  q{} -- q{} [style={style}];\n", pair.a, pair.b));
        }
        out.push_str("}\n");
        out
    }
}

/// A solid tail of the simplified graph: `path[0]` is the attachment vertex.
#[derive(Debug, Clone)]
pub struct Tail {
    pub attachment: QubitId,
    pub path: Vec<QubitId>,
    /// Constraint vector on `(path[i], path[i+1])`, oriented `path[i]` first.
    pub solid: Vec<CVec>,
    /// Real-from-canonical operator per tail qubit: applying it to the
    /// canonicalized (all-singlet) tail states recovers states of the actual
    /// tail. Identity at the attachment.
    pub frames: BTreeMap<QubitId, CMat>,
}

/// Simplified interaction graph: dashed backbone plus solid tails.
#[derive(Debug, Clone)]
pub struct SimplifiedGraph {
    pub n: usize,
    /// All vertices, backbone and tails alike.
    pub vertices: BTreeSet<QubitId>,
    /// Backbone vertex set (tails contribute only their attachment).
    pub backbone: BTreeSet<QubitId>,
    /// Dashed edges with per-endpoint directions (at `pair.a`, at `pair.b`).
    pub dashed: BTreeMap<Pair, (CVec, CVec)>,
    pub tails: Vec<Tail>,
    pub warnings: Vec<String>,
}

#[derive(Debug)]
pub enum SimplifyOutcome {
    Simplified(SimplifiedGraph),
    /// Independent constraints stacked on one pair; `extra` holds the
    /// vectors that must be merged onto `pair` before re-entering reduction.
    Collision {
        graph: InteractionGraph,
        pair: Pair,
        extra: Vec<CVec>,
    },
}

/// One recorded slide, as instance snapshots for oracle checks.
#[derive(Debug, Clone)]
pub struct SlideTrace {
    pub description: String,
    pub pre: Instance,
    pub post: Instance,
}

/// What a slide did: where the rewritten constraint landed and its vector
/// (inserted, collapsed into a parallel duplicate, or left stacked as a
/// collision for rank reduction).
#[derive(Debug, Clone)]
pub struct Slid {
    pub insert: Insert,
    pub pair: Pair,
    pub vector: CVec,
}

/// Type-I sliding: entangled edges `(p,q)` and `(p,r)` become `(p,q)` and
/// `(q,r)` with constraint `(L_q ⊗ L_r)|Y⟩`, where the frames are extracted
/// from the two original constraints viewed from `p`.
pub fn slide_type1(
    g: &mut InteractionGraph,
    p: QubitId,
    q: QubitId,
    r: QubitId,
    tol: &Tolerance,
) -> Result<Slid> {
    if q == r || p == q || p == r {
        return Err(Error::precondition("slide_type1 needs three distinct vertices"));
    }
    let pq = Pair::new(p, q)?;
    let pr = Pair::new(p, r)?;
    let phi = g
        .edges
        .get(&pq)
        .ok_or_else(|| Error::precondition(format!("no edge on {pq}")))?
        .clone();
    let psi = g
        .edges
        .get(&pr)
        .ok_or_else(|| Error::precondition(format!("no edge on {pr}")))?
        .clone();
    let l_q = extract_local_frame(&oriented(pq, &phi, p), tol)?;
    let l_r = extract_local_frame(&oriented(pr, &psi, p), tol)?;
    let chi_qr = &kron_mat(&l_q, &l_r) * &singlet();
    g.edges.remove(&pr);
    let (pair, mut v) = store_oriented(q, r, &chi_qr);
    let norm = v.norm();
    v /= cr(norm);
    phase_canonicalize(&mut v);
    let insert = g.insert_edge(pair, v.clone(), tol);
    Ok(Slid { insert, pair, vector: v })
}

/// Type-II sliding: entangled `(p,q)` plus product `(q,r)` becomes entangled
/// `(p,q)` plus product `(p,r)`, the direction at the moved endpoint mapped
/// through `L_q^{-1}`.
pub fn slide_type2(
    g: &mut InteractionGraph,
    p: QubitId,
    q: QubitId,
    r: QubitId,
    tol: &Tolerance,
) -> Result<Slid> {
    if p == q || q == r {
        return Err(Error::precondition("slide_type2 needs distinct slide vertices"));
    }
    let pq = Pair::new(p, q)?;
    let phi = g
        .edges
        .get(&pq)
        .ok_or_else(|| Error::precondition(format!("no edge on {pq}")))?
        .clone();
    if r == p {
        // not a slide: the product constraint already sits parallel to the
        // entangled edge; leave it stacked on (p,q)
        return Ok(Slid {
            insert: Insert::Collision,
            pair: pq,
            vector: phi,
        });
    }
    let qr = Pair::new(q, r)?;
    let dashed = g
        .edges
        .get(&qr)
        .ok_or_else(|| Error::precondition(format!("no edge on {qr}")))?
        .clone();
    let (kind, factors) = classify_edge(&oriented(qr, &dashed, q), tol)?;
    if kind != EdgeKind::Dashed {
        return Err(Error::precondition("slide_type2 requires a product edge"));
    }
    let (alpha, beta) = factors.expect("dashed factors");
    let l_q = extract_local_frame(&oriented(pq, &phi, p), tol)?;
    let mut alpha_new = &inv2(&l_q)? * &alpha;
    let norm = alpha_new.norm();
    if norm == 0.0 {
        return Err(Error::internal("type-2 slide produced a zero direction"));
    }
    alpha_new /= cr(norm);
    g.edges.remove(&qr);
    let (pair, mut v) = store_oriented(p, r, &kron_vec(&alpha_new, &beta));
    let n = v.norm();
    v /= cr(n);
    phase_canonicalize(&mut v);
    let insert = g.insert_edge(pair, v.clone(), tol);
    Ok(Slid { insert, pair, vector: v })
}

/// Simplify a homogeneous interaction graph to backbone + tails.
pub fn simplify(g: InteractionGraph, tol: &Tolerance) -> Result<SimplifyOutcome> {
    simplify_inner(g, tol, &mut None)
}

/// Like [`simplify`], recording every slide as pre/post instance snapshots.
pub fn simplify_traced(
    g: InteractionGraph,
    tol: &Tolerance,
) -> Result<(SimplifyOutcome, Vec<SlideTrace>)> {
    let mut trace = Some(Vec::new());
    let outcome = simplify_inner(g, tol, &mut trace)?;
    Ok((outcome, trace.unwrap()))
}

fn snapshot(trace: &Option<Vec<SlideTrace>>, g: &InteractionGraph) -> Option<Instance> {
    trace.as_ref().map(|_| g.to_instance())
}

/// Record a completed slide. On a collision the post snapshot carries the
/// stacked vector merged onto its pair, so it matches the instance the
/// caller re-enters reduction with. Returns whether a collision happened.
fn finish_slide(
    trace: &mut Option<Vec<SlideTrace>>,
    description: String,
    pre: Option<Instance>,
    g: &InteractionGraph,
    slid: &Slid,
    tol: &Tolerance,
) -> Result<bool> {
    if let (Some(sink), Some(pre)) = (trace.as_mut(), pre) {
        let mut post = g.to_instance();
        if slid.insert == Insert::Collision {
            post.add_block_vectors(slid.pair, std::slice::from_ref(&slid.vector), tol)?;
        }
        sink.push(SlideTrace {
            description,
            pre,
            post,
        });
    }
    Ok(slid.insert == Insert::Collision)
}

fn simplify_inner(
    mut g: InteractionGraph,
    tol: &Tolerance,
    trace: &mut Option<Vec<SlideTrace>>,
) -> Result<SimplifyOutcome> {
    let mut warnings: Vec<String> = Vec::new();
    let budget = 16 + 4 * g.edges.len() * (g.vertices.len() + 1) * (g.vertices.len() + 1);
    let mut steps = 0usize;
    let spend = |steps: &mut usize| -> Result<()> {
        *steps += 1;
        if *steps > budget {
            return Err(Error::internal("simplify exceeded its slide budget"));
        }
        Ok(())
    };

    // phase A: shrink solid cycles until every solid component is a tree
    loop {
        let Some(cycle) = find_solid_cycle(&g, tol) else {
            break;
        };
        spend(&mut steps)?;
        let pos = cycle
            .iter()
            .enumerate()
            .min_by_key(|(_, v)| **v)
            .map(|(i, _)| i)
            .unwrap();
        let len = cycle.len();
        let v = cycle[pos];
        let nb1 = cycle[(pos + len - 1) % len];
        let nb2 = cycle[(pos + 1) % len];
        let (q, r) = (nb1.min(nb2), nb1.max(nb2));
        let pre = snapshot(trace, &g);
        check_frame_condition(&g, Pair::new(v, q)?, tol, &mut warnings);
        check_frame_condition(&g, Pair::new(v, r)?, tol, &mut warnings);
        let slid = slide_type1(&mut g, v, q, r, tol)?;
        let desc = format!("type1 cycle pivot {v}: ({v},{r}) -> ({q},{r})");
        if finish_slide(trace, desc, pre, &g, &slid, tol)? {
            return Ok(SimplifyOutcome::Collision {
                graph: g,
                pair: slid.pair,
                extra: vec![slid.vector],
            });
        }
    }

    // phase B: linearize each solid component into a path by absorption
    let mut tails_paths: Vec<Vec<QubitId>> = Vec::new();
    let comps = solid_components(&g, tol);
    for comp in comps {
        if comp.len() < 2 {
            continue;
        }
        let start = comp[0];
        let mut path = vec![start];
        loop {
            spend(&mut steps)?;
            let head = *path.last().unwrap();
            let prev = if path.len() >= 2 {
                Some(path[path.len() - 2])
            } else {
                None
            };
            let adj = g.solid_adjacency(tol);
            let nbrs: Vec<QubitId> = adj
                .get(&head)
                .map(|ns| ns.iter().cloned().filter(|x| Some(*x) != prev).collect())
                .unwrap_or_default();
            match nbrs.len() {
                0 => break,
                1 => path.push(nbrs[0]),
                _ => {
                    let (x, y) = (nbrs[0], nbrs[1]);
                    let pre = snapshot(trace, &g);
                    check_frame_condition(&g, Pair::new(head, x)?, tol, &mut warnings);
                    check_frame_condition(&g, Pair::new(head, y)?, tol, &mut warnings);
                    let slid = slide_type1(&mut g, head, x, y, tol)?;
                    let desc =
                        format!("type1 linearize pivot {head}: ({head},{y}) -> ({x},{y})");
                    if finish_slide(trace, desc, pre, &g, &slid, tol)? {
                        return Ok(SimplifyOutcome::Collision {
                            graph: g,
                            pair: slid.pair,
                            extra: vec![slid.vector],
                        });
                    }
                }
            }
        }
        tails_paths.push(path);
    }

    // phase C: slide every dashed contact on a tail down to the attachment
    for path in &mut tails_paths {
        // attachment: endpoint already carrying a dashed edge, else lowest
        let is_dashed_at = |g: &InteractionGraph, v: QubitId| -> bool {
            g.edges_at(v).iter().any(|p| {
                matches!(
                    classify_edge(&g.edges[p], tol),
                    Ok((EdgeKind::Dashed, _))
                )
            })
        };
        let (e0, e1) = (path[0], *path.last().unwrap());
        let attach = match (is_dashed_at(&g, e0), is_dashed_at(&g, e1)) {
            (true, false) => e0,
            (false, true) => e1,
            _ => e0.min(e1),
        };
        if attach != path[0] {
            path.reverse();
        }
        debug_assert_eq!(path[0], attach);

        loop {
            spend(&mut steps)?;
            // deepest dashed contact first
            let mut candidate: Option<(usize, Pair)> = None;
            for i in (1..path.len()).rev() {
                let dashed_pairs: Vec<Pair> = g
                    .edges_at(path[i])
                    .into_iter()
                    .filter(|p| {
                        matches!(classify_edge(&g.edges[p], tol), Ok((EdgeKind::Dashed, _)))
                    })
                    .collect();
                if let Some(pair) = dashed_pairs.into_iter().min() {
                    candidate = Some((i, pair));
                    break;
                }
            }
            let Some((i, dashed_pair)) = candidate else {
                break;
            };
            let q = path[i];
            let p = path[i - 1];
            let r = dashed_pair.other(q);
            if r == p {
                // the sliding endpoint would land on the dashed edge's other
                // endpoint: stack on the solid tail edge instead
                let dashed_vec = g.edges.remove(&dashed_pair).unwrap();
                return Ok(SimplifyOutcome::Collision {
                    graph: g,
                    pair: Pair::new(p, q)?,
                    extra: vec![dashed_vec],
                });
            }
            let pre = snapshot(trace, &g);
            check_frame_condition(&g, Pair::new(p, q)?, tol, &mut warnings);
            let slid = slide_type2(&mut g, p, q, r, tol)?;
            let desc = format!("type2 tail {q}->{p}: dashed ({q},{r}) -> ({p},{r})");
            if finish_slide(trace, desc, pre, &g, &slid, tol)? {
                return Ok(SimplifyOutcome::Collision {
                    graph: g,
                    pair: slid.pair,
                    extra: vec![slid.vector],
                });
            }
        }
    }

    // assemble: backbone, dashed factor map, tails with frames
    let mut tail_interior: BTreeSet<QubitId> = BTreeSet::new();
    for path in &tails_paths {
        tail_interior.extend(path.iter().skip(1));
    }
    let backbone: BTreeSet<QubitId> = g
        .vertices
        .iter()
        .cloned()
        .filter(|v| !tail_interior.contains(v))
        .collect();

    let mut dashed = BTreeMap::new();
    let mut solid_seen: BTreeSet<Pair> = BTreeSet::new();
    for path in &tails_paths {
        for w in path.windows(2) {
            solid_seen.insert(Pair::new(w[0], w[1])?);
        }
    }
    for (pair, v) in &g.edges {
        match classify_edge(v, tol)? {
            (EdgeKind::Dashed, Some((alpha, beta))) => {
                if touches_tail_interior(&tail_interior, pair) {
                    return Err(Error::internal(format!(
                        "dashed edge {pair} still touches a tail interior"
                    )));
                }
                dashed.insert(*pair, (alpha, beta));
            }
            (EdgeKind::Solid, _) => {
                if !solid_seen.contains(pair) {
                    return Err(Error::internal(format!(
                        "solid edge {pair} not covered by any tail path"
                    )));
                }
            }
            _ => unreachable!(),
        }
    }

    let mut tails = Vec::new();
    for path in tails_paths {
        let tail = build_tail(&g, path, tol, &mut warnings)?;
        tails.push(tail);
    }
    tails.sort_by_key(|t| t.attachment);

    Ok(SimplifyOutcome::Simplified(SimplifiedGraph {
        n: g.n,
        vertices: g.vertices.clone(),
        backbone,
        dashed,
        tails,
        warnings,
    }))
}

fn touches_tail_interior(interior: &BTreeSet<QubitId>, pair: &Pair) -> bool {
    interior.contains(&pair.a) || interior.contains(&pair.b)
}

fn check_frame_condition(
    g: &InteractionGraph,
    pair: Pair,
    tol: &Tolerance,
    warnings: &mut Vec<String>,
) {
    if let Some(v) = g.edges.get(&pair) {
        if let Ok(l) = extract_local_frame(&oriented(pair, v, pair.a), tol) {
            let cond = cond2(&l);
            if cond > 1e8 {
                warnings.push(format!(
                    "near-singular local frame on {pair} (condition number {cond:.2e})"
                ));
            }
        }
    }
}

fn build_tail(
    g: &InteractionGraph,
    path: Vec<QubitId>,
    tol: &Tolerance,
    warnings: &mut Vec<String>,
) -> Result<Tail> {
    let attachment = path[0];
    let mut frames: BTreeMap<QubitId, CMat> = BTreeMap::new();
    frames.insert(attachment, CMat::identity(2, 2));
    let mut solid = Vec::new();
    let mut prev_a = CMat::identity(2, 2);
    for w in path.windows(2) {
        let pair = Pair::new(w[0], w[1])?;
        let v = g
            .edges
            .get(&pair)
            .ok_or_else(|| Error::internal(format!("missing tail edge {pair}")))?;
        let phi = oriented(pair, v, w[0]);
        // strip the accumulated frame on the inner endpoint
        let inv_prev = inv2(&prev_a)?;
        let phi_stripped = &kron_mat(&inv_prev, &CMat::identity(2, 2)) * &phi;
        let a_next = extract_local_frame(&phi_stripped, tol)?;
        let recon = (&kron_mat(&prev_a, &a_next) * &singlet() - &phi).norm();
        if recon > 1e-6 {
            return Err(Error::internal(format!(
                "tail frame reconstruction residual {recon:.3e} on {pair}"
            )));
        }
        if cond2(&a_next) > 1e8 {
            warnings.push(format!(
                "near-singular tail frame at qubit {} (pair {pair})",
                w[1]
            ));
        }
        // real-from-canonical operator (A†)^{-1}
        frames.insert(w[1], inv2(&a_next.adjoint())?);
        solid.push(phi);
        prev_a = a_next;
    }
    Ok(Tail {
        attachment,
        path,
        solid,
        frames,
    })
}

fn solid_components(g: &InteractionGraph, tol: &Tolerance) -> Vec<Vec<QubitId>> {
    let adj = g.solid_adjacency(tol);
    let mut seen: BTreeSet<QubitId> = BTreeSet::new();
    let mut comps = Vec::new();
    for v in adj.keys() {
        if seen.contains(v) {
            continue;
        }
        let mut comp = vec![];
        let mut stack = vec![*v];
        seen.insert(*v);
        while let Some(x) = stack.pop() {
            comp.push(x);
            for nb in adj.get(&x).into_iter().flatten() {
                if seen.insert(*nb) {
                    stack.push(*nb);
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps
}

/// Find any solid cycle, returned as the vertex sequence around the cycle.
fn find_solid_cycle(g: &InteractionGraph, tol: &Tolerance) -> Option<Vec<QubitId>> {
    let adj = g.solid_adjacency(tol);
    let mut color: BTreeMap<QubitId, u8> = BTreeMap::new();
    for start in adj.keys() {
        if color.contains_key(start) {
            continue;
        }
        // iterative DFS with parent tracking
        let mut parent: BTreeMap<QubitId, QubitId> = BTreeMap::new();
        let mut stack = vec![(*start, None::<QubitId>)];
        while let Some((v, from)) = stack.pop() {
            if color.contains_key(&v) {
                continue;
            }
            color.insert(v, 1);
            if let Some(f) = from {
                parent.insert(v, f);
            }
            for nb in adj.get(&v).into_iter().flatten() {
                if Some(*nb) == from {
                    continue;
                }
                if color.contains_key(nb) {
                    // cycle: climb from v to nb
                    let mut cycle = vec![v];
                    let mut cur = v;
                    while cur != *nb {
                        cur = *parent.get(&cur)?;
                        cycle.push(cur);
                    }
                    return Some(cycle);
                }
                stack.push((*nb, Some(v)));
            }
        }
    }
    None
}
