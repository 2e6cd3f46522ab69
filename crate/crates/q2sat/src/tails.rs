//! Solid tails of the simplified graph: extend the backbone product span
//! through each tail's symmetric subspace, or replace tails by alternating
//! chains when only the dimension is needed.


use num_bigint::BigUint;
use num_traits::Zero;

use crate::dashed::{DashedGraph, ProductFamily};
use crate::error::{Error, Result};
use crate::graph::{SimplifiedGraph, Tail};
use crate::instance::{Pair, QubitId};
use crate::numerics::{self, cr, perp2, CVec, Tolerance};

/// Backbone span partitioned by the state of one vertex: families where it
/// is free, and groups of families pinned orthogonal to each distinct
/// incident direction.
#[derive(Debug)]
pub struct SpanDecomposition {
    pub vertex: QubitId,
    /// Families where the vertex was free, the vertex stripped out.
    pub s0: Vec<ProductFamily>,
    /// `(α_j, families pinned to α_j^⊥)`, directions pairwise non-parallel.
    pub groups: Vec<(CVec, Vec<ProductFamily>)>,
}

pub fn families_dim(families: &[ProductFamily]) -> BigUint {
    families.iter().map(|f| f.dim()).fold(BigUint::zero(), |a, b| a + b)
}

impl SpanDecomposition {
    pub fn dim(&self) -> BigUint {
        families_dim(&self.s0) * 2u32
            + self
                .groups
                .iter()
                .map(|(_, fams)| families_dim(fams))
                .fold(BigUint::zero(), |a, b| a + b)
    }

    pub fn s0_dim(&self) -> BigUint {
        families_dim(&self.s0)
    }
}

/// Partition a product basis by the state of vertex `a`.
pub fn decompose_at_vertex(
    families: &[ProductFamily],
    a: QubitId,
    tol: &Tolerance,
) -> Result<SpanDecomposition> {
    let mut s0 = Vec::new();
    let mut groups: Vec<(CVec, Vec<ProductFamily>)> = Vec::new();
    for family in families {
        if family.free.contains(&a) {
            let mut stripped = family.clone();
            stripped.free.remove(&a);
            s0.push(stripped);
        } else {
            let pin = family.pins.get(&a).ok_or_else(|| {
                Error::internal(format!(
                    "basis family neither pins nor frees vertex {a}"
                ))
            })?;
            let slot = groups
                .iter()
                .position(|(alpha, _)| numerics::parallel(&perp2(alpha), pin, tol));
            match slot {
                Some(i) => groups[i].1.push(family.clone()),
                None => groups.push((perp2(pin), vec![family.clone()])),
            }
        }
    }
    Ok(SpanDecomposition { vertex: a, s0, groups })
}

/// `k + 1` equally spaced real-plane directions; their `k`-fold tensor
/// powers span the symmetric subspace of `k` qubits.
pub fn symmetric_directions(k: usize) -> Vec<CVec> {
    (0..=k)
        .map(|i| {
            let angle = std::f64::consts::PI * i as f64 / (k as f64 + 1.0);
            CVec::from_vec(vec![cr(angle.cos()), cr(angle.sin())])
        })
        .collect()
}

/// Extend a decomposed backbone span through one tail: free-vertex families
/// pick up the whole symmetric subspace as tensor powers, pinned families
/// extend by copying. Tail frames translate canonical (all-singlet) states
/// back to the actual constraints.
pub fn extend_with_tail(
    dec: SpanDecomposition,
    tail: &Tail,
    tol: &Tolerance,
) -> Result<Vec<ProductFamily>> {
    if tail.path[0] != dec.vertex {
        return Err(Error::precondition(
            "tail attachment does not match the decomposed vertex",
        ));
    }
    for family in dec.s0.iter().chain(dec.groups.iter().flat_map(|(_, f)| f)) {
        for q in tail.path.iter().skip(1) {
            if family.pins.contains_key(q) || family.free.contains(q) {
                return Err(Error::precondition(format!(
                    "tail qubit {q} already constrained by the backbone span"
                )));
            }
        }
    }
    let k = tail.path.len();
    let mut out = Vec::new();
    // free attachment: every symmetric-subspace spanning product state
    let directions = symmetric_directions(k);
    for family in &dec.s0 {
        for theta in &directions {
            let mut f = family.clone();
            for q in &tail.path {
                f.pins.insert(*q, apply_tail_frame(tail, *q, theta)?);
            }
            out.push(f);
        }
    }
    // pinned attachment: unique extension by copying the canonical state
    for (_, families) in &dec.groups {
        for family in families {
            let mut f = family.clone();
            let canonical = f.pins[&dec.vertex].clone();
            for q in tail.path.iter().skip(1) {
                f.pins.insert(*q, apply_tail_frame(tail, *q, &canonical)?);
            }
            out.push(f);
        }
    }
    let _ = tol;
    Ok(out)
}

fn apply_tail_frame(tail: &Tail, q: QubitId, canonical: &CVec) -> Result<CVec> {
    let frame = tail
        .frames
        .get(&q)
        .ok_or_else(|| Error::internal(format!("tail frame missing for qubit {q}")))?;
    let mut v = frame * canonical;
    let norm = v.norm();
    if norm == 0.0 {
        return Err(Error::internal("tail frame produced a zero state"));
    }
    v /= cr(norm);
    Ok(v)
}

/// Replace every solid tail by an alternating chain of dashed edges; the
/// chain direction at the attachment vertex is chosen non-parallel to every
/// dashed direction already present there, so the dimension is unchanged.
pub fn tail_to_chain(simplified: &SimplifiedGraph, tol: &Tolerance) -> Result<DashedGraph> {
    let mut g = DashedGraph::new(simplified.vertices.iter().cloned());
    for (pair, (alpha, beta)) in &simplified.dashed {
        g.add_edge(*pair, alpha.clone(), beta.clone(), tol)?;
    }
    let ket0 = CVec::from_vec(vec![cr(1.0), cr(0.0)]);
    let ket1 = CVec::from_vec(vec![cr(0.0), cr(1.0)]);
    for tail in &simplified.tails {
        let a = tail.attachment;
        let existing: Vec<CVec> = g
            .edges_at(a)
            .into_iter()
            .map(|p| g.direction_at(p, a).clone())
            .collect();
        let c = candidate_directions()
            .into_iter()
            .find(|c| {
                existing
                    .iter()
                    .all(|d| numerics::overlap(c, d) <= 1.0 - tol.eps_rank)
            })
            .ok_or_else(|| Error::internal("no usable chain direction at the attachment"))?;
        for (i, w) in tail.path.windows(2).enumerate() {
            let at_first = if i == 0 { c.clone() } else { ket1.clone() };
            let pair = Pair::new(w[0], w[1])?;
            let (da, db) = if w[0] == pair.a {
                (at_first, ket0.clone())
            } else {
                (ket0.clone(), at_first)
            };
            g.add_edge(pair, da, db, tol)?;
        }
    }
    Ok(g)
}

/// Fixed projective sequence of chain directions at the attachment.
fn candidate_directions() -> Vec<CVec> {
    let mut out = vec![
        CVec::from_vec(vec![cr(1.0), cr(0.0)]),
        CVec::from_vec(vec![cr(0.0), cr(1.0)]),
    ];
    for k in 1..=8u32 {
        let mut v = CVec::from_vec(vec![cr(1.0), cr(k as f64)]);
        let n = v.norm();
        v /= cr(n);
        out.push(v);
    }
    out
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;
    use super::*;
    use crate::dashed::{expand_families, solve_dashed};
    use crate::graph::{simplify, InteractionGraph, SimplifyOutcome};
    use crate::instance::{gen_chain, gen_singlet_star, normalize, singlet, Instance};
    use crate::numerics::{ket, kron_vec, overlap, CMat};
    use crate::oracle::{brute_kernel, dicke_basis};

    fn simplified_of(inst: &Instance) -> SimplifiedGraph {
        let tol = Tolerance::default();
        let g = InteractionGraph::from_instance(inst).unwrap();
        match simplify(g, &tol).unwrap() {
            SimplifyOutcome::Simplified(s) => s,
            other => panic!("unexpected {other:?}"),
        }
    }

    fn backbone_graph(s: &SimplifiedGraph, tol: &Tolerance) -> DashedGraph {
        let mut g = DashedGraph::new(s.backbone.iter().cloned());
        for (pair, (a, b)) in &s.dashed {
            g.add_edge(*pair, a.clone(), b.clone(), tol).unwrap();
        }
        g
    }

    #[test]
    fn decompose_single_free_vertex() {
        let tol = Tolerance::default();
        let families = vec![ProductFamily {
            pins: BTreeMap::new(),
            free: [7usize].into_iter().collect(),
        }];
        let dec = decompose_at_vertex(&families, 7, &tol).unwrap();
        assert_eq!(dec.s0.len(), 1);
        assert!(dec.groups.is_empty());
        assert_eq!(dec.s0_dim(), BigUint::from(1u32));
    }

    #[test]
    fn decompose_backbone_edge() {
        // edge |0⟩_0 |0⟩_1, decomposed at vertex 1:
        // S₀ = {|1⟩_0}, S₁ = {|0⟩_0} with α₁ = |0⟩
        let tol = Tolerance::default();
        let inst = normalize(2, &[((0, 1), ket(&[0, 0]))], &tol).unwrap();
        let g = DashedGraph::from_instance(&inst, &tol).unwrap();
        let sol = solve_dashed(&g, true, 64, &tol).unwrap();
        let dec = decompose_at_vertex(sol.families.as_ref().unwrap(), 1, &tol).unwrap();
        assert_eq!(dec.s0_dim(), BigUint::from(1u32));
        assert_eq!(dec.groups.len(), 1);
        let (alpha, fams) = &dec.groups[0];
        assert!(overlap(alpha, &ket(&[0])) > 1.0 - 1e-9);
        assert_eq!(families_dim(fams), BigUint::from(1u32));
        // S₀ family pins qubit 0 to |1⟩
        assert!(overlap(&dec.s0[0].pins[&0], &ket(&[1])) > 1.0 - 1e-9);
        assert!(overlap(&fams[0].pins[&0], &ket(&[0])) > 1.0 - 1e-9);
    }

    #[test]
    fn decompose_chain_endpoint_dims() {
        let tol = Tolerance::default();
        let inst = gen_chain(3).unwrap();
        let g = DashedGraph::from_instance(&inst, &tol).unwrap();
        let sol = solve_dashed(&g, true, 64, &tol).unwrap();
        let dec = decompose_at_vertex(sol.families.as_ref().unwrap(), 2, &tol).unwrap();
        assert_eq!(dec.dim(), BigUint::from(4u32));
    }

    #[test]
    fn symmetric_directions_tensor_powers_are_independent() {
        for k in 1..=12usize {
            let dirs = symmetric_directions(k);
            assert_eq!(dirs.len(), k + 1);
            let states: Vec<CVec> = dirs
                .iter()
                .map(|d| {
                    let mut v = CVec::from_vec(vec![cr(1.0)]);
                    for _ in 0..k {
                        v = kron_vec(&v, d);
                    }
                    v
                })
                .collect();
            let m = CMat::from_fn(1 << k, k + 1, |i, j| states[j][i]);
            let sv = numerics::singular_values(&m);
            assert!(
                sv[k] > 1e-8,
                "k={k}: smallest singular value {}",
                sv[k]
            );
            // and they span the symmetric subspace
            let d = numerics::span_distance(&states, &dicke_basis(k)).unwrap();
            assert!(d < 1e-7, "k={k}: distance {d}");
        }
    }

    #[test]
    fn extend_free_vertex_with_star_tail() {
        // singlet star on 3 qubits: backbone is the lone attachment, free
        let tol = Tolerance::default();
        let inst = gen_singlet_star(3).unwrap();
        let s = simplified_of(&inst);
        assert_eq!(s.tails.len(), 1);
        let backbone = backbone_graph(&s, &tol);
        let sol = solve_dashed(&backbone, true, 64, &tol).unwrap();
        let dec = decompose_at_vertex(sol.families.as_ref().unwrap(), s.tails[0].attachment, &tol)
            .unwrap();
        let families = extend_with_tail(dec, &s.tails[0], &tol).unwrap();
        assert_eq!(families_dim(&families), BigUint::from(4u32));
        // the product basis spans the oracle kernel
        let states = expand_families(&families, &sol.frames);
        let order: Vec<QubitId> = inst.sorted_active();
        let dense: Vec<CVec> = states.iter().map(|st| st.dense(&order)).collect();
        let oracle = brute_kernel(&inst, 12).unwrap();
        assert_eq!(oracle.dim, 4);
        let d = numerics::span_distance(&dense, &oracle.basis).unwrap();
        assert!(d < 1e-7, "distance {d}");
    }

    #[test]
    fn extend_pinned_and_free_mix() {
        // backbone edge |0⟩_0|0⟩_1 plus singlet tail (1,2):
        // dimension 1·3 + 1·1 = 4
        let tol = Tolerance::default();
        let inst = normalize(
            3,
            &[((0, 1), ket(&[0, 0])), ((1, 2), singlet())],
            &tol,
        )
        .unwrap();
        let s = simplified_of(&inst);
        assert_eq!(s.tails.len(), 1);
        assert_eq!(s.tails[0].attachment, 1);
        let backbone = backbone_graph(&s, &tol);
        let sol = solve_dashed(&backbone, true, 64, &tol).unwrap();
        let dec =
            decompose_at_vertex(sol.families.as_ref().unwrap(), 1, &tol).unwrap();
        assert_eq!(dec.s0_dim(), BigUint::from(1u32));
        let families = extend_with_tail(dec, &s.tails[0], &tol).unwrap();
        assert_eq!(families_dim(&families), BigUint::from(4u32));
        let states = expand_families(&families, &sol.frames);
        let order: Vec<QubitId> = inst.sorted_active();
        let dense: Vec<CVec> = states.iter().map(|st| st.dense(&order)).collect();
        let oracle = brute_kernel(&inst, 12).unwrap();
        assert_eq!(oracle.dim, 4);
        let d = numerics::span_distance(&dense, &oracle.basis).unwrap();
        assert!(d < 1e-7, "distance {d}");
    }

    #[test]
    fn extend_forced_attachment_copies() {
        // unit forces the attachment; the tail extension is a single copy
        let tol = Tolerance::default();
        let fams = vec![ProductFamily {
            pins: [(0usize, ket(&[1]))].into_iter().collect(),
            free: Default::default(),
        }];
        let dec = decompose_at_vertex(&fams, 0, &tol).unwrap();
        assert!(dec.s0.is_empty());
        // a singlet tail 0-1-2
        let tail = Tail {
            attachment: 0,
            path: vec![0, 1, 2],
            solid: vec![singlet(), singlet()],
            frames: (0..3).map(|q| (q, CMat::identity(2, 2))).collect(),
        };
        let families = extend_with_tail(dec, &tail, &tol).unwrap();
        assert_eq!(families_dim(&families), BigUint::from(1u32));
        for q in 0..3 {
            assert!(overlap(&families[0].pins[&q], &ket(&[1])) > 1.0 - 1e-9);
        }
    }

    #[test]
    fn sj_groups_jointly_independent() {
        // distinct pinned classes produce jointly independent family states
        let tol = Tolerance::default();
        let inst = gen_chain(4).unwrap();
        let g = DashedGraph::from_instance(&inst, &tol).unwrap();
        let sol = solve_dashed(&g, true, 64, &tol).unwrap();
        let dec = decompose_at_vertex(sol.families.as_ref().unwrap(), 3, &tol).unwrap();
        let mut all: Vec<CVec> = Vec::new();
        let order: Vec<QubitId> = inst.sorted_active();
        for (_, fams) in &dec.groups {
            for st in expand_families(fams, &sol.frames) {
                all.push(st.dense(&order));
            }
        }
        if all.len() > 1 {
            let m = CMat::from_fn(all[0].len(), all.len(), |i, j| all[j][i]);
            let sv = numerics::singular_values(&m);
            assert!(sv[all.len() - 1] > 1e-8);
        }
    }

    #[test]
    fn tail_to_chain_preserves_dimension() {
        let tol = Tolerance::default();
        // star: |K| = 4, both sides dimension 5
        let star = gen_singlet_star(4).unwrap();
        let s = simplified_of(&star);
        let chain_graph = tail_to_chain(&s, &tol).unwrap();
        let sol = solve_dashed(&chain_graph, false, 4096, &tol).unwrap();
        let oracle = brute_kernel(&star, 12).unwrap();
        assert_eq!(oracle.dim, 5);
        assert_eq!(sol.dim, BigUint::from(oracle.dim as u64));

        // backbone edge + singlet tail: dimension 4 preserved, chain
        // direction at the attachment avoids |0⟩
        let inst = normalize(
            3,
            &[((0, 1), ket(&[0, 0])), ((1, 2), singlet())],
            &tol,
        )
        .unwrap();
        let s = simplified_of(&inst);
        let chain_graph = tail_to_chain(&s, &tol).unwrap();
        let pair = Pair::new(1, 2).unwrap();
        let dir_at_attach = chain_graph.direction_at(pair, 1);
        assert!(overlap(dir_at_attach, &ket(&[0])) <= 1.0 - 1e-9);
        let sol = solve_dashed(&chain_graph, false, 4096, &tol).unwrap();
        assert_eq!(sol.dim, BigUint::from(4u64));

        // single-edge tail on a free vertex: |K| = 2, dimension 3
        let lone = normalize(2, &[((0, 1), singlet())], &tol).unwrap();
        let s = simplified_of(&lone);
        let chain_graph = tail_to_chain(&s, &tol).unwrap();
        let sol = solve_dashed(&chain_graph, false, 4096, &tol).unwrap();
        assert_eq!(sol.dim, BigUint::from(3u64));
    }
}
