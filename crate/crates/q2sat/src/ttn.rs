//! Final ground-space description: the forest of isometries and fixed
//! factors over a leaf product span, dense materialization by event replay,
//! and the versioned JSON interchange format.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::dashed::{BranchNode, ProductBasisState};
use crate::error::{Error, Result};
use crate::graph::LocalFrame;
use crate::instance::{cvec_from_pairs, cvec_to_pairs, QubitId};
use crate::numerics::{cr, CMat, CVec, C64};
use crate::reduction::{FixedFactor, IsometryNode, ReductionLog, RewriteEvent};

/// Default cap on the qubit count for dense materialization.
pub const DEFAULT_MATERIALIZE_CAP: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "SATISFIABLE")]
    Satisfiable,
    #[serde(rename = "FRUSTRATED")]
    Frustrated,
}

/// The rewrite events and frames whose replay maps the leaf product span
/// onto the original qubits.
#[derive(Debug, Clone)]
pub struct TTNForest {
    /// Reduction events in the order they were applied.
    pub events: ReductionLog,
    /// Per-qubit frames attached to the leaf span (orthogonality contract).
    pub frames: LocalFrame,
    /// Qubits of the leaf register, sorted.
    pub leaf_qubits: Vec<QubitId>,
}

/// Complete solver output.
#[derive(Debug, Clone)]
pub struct GroundSpaceDescription {
    pub verdict: Verdict,
    pub dimension: BigUint,
    /// Original qubit count.
    pub n: usize,
    pub forest: TTNForest,
    pub leaf_basis: Option<Vec<ProductBasisState>>,
    pub certificate: BranchNode,
}

impl GroundSpaceDescription {
    pub fn is_satisfiable(&self) -> bool {
        self.verdict == Verdict::Satisfiable
    }
}

/// Replay one rewrite event on dense states over a sorted qubit register,
/// producing states over the enlarged register.
pub fn apply_event_to_states(
    states: &[CVec],
    order: &[QubitId],
    event: &RewriteEvent,
) -> Result<(Vec<CVec>, Vec<QubitId>)> {
    match event {
        RewriteEvent::Fixed(FixedFactor { qubits, state }) => {
            for q in qubits {
                if order.contains(q) {
                    return Err(Error::internal(format!(
                        "fixed qubit {q} already in the register"
                    )));
                }
            }
            let mut new_order: Vec<QubitId> = order.to_vec();
            new_order.extend(qubits.iter().cloned());
            new_order.sort_unstable();
            let k = new_order.len();
            let dim = 1usize << k;
            let shift_of = |q: QubitId| k - 1 - new_order.iter().position(|x| *x == q).unwrap();
            let inserted: Vec<usize> = qubits.iter().map(|q| shift_of(*q)).collect();
            let kept: Vec<usize> = order.iter().map(|q| shift_of(*q)).collect();
            let out = states
                .iter()
                .map(|v| {
                    let mut w = CVec::zeros(dim);
                    for idx in 0..dim {
                        let coeff = match inserted.as_slice() {
                            [s] => state[idx >> s & 1],
                            [sa, sb] => state[2 * (idx >> sa & 1) + (idx >> sb & 1)],
                            _ => unreachable!("factors cover one or two qubits"),
                        };
                        if coeff == C64::new(0.0, 0.0) {
                            continue;
                        }
                        let mut old_idx = 0usize;
                        for (p, s) in kept.iter().enumerate() {
                            old_idx |= (idx >> s & 1) << (order.len() - 1 - p);
                        }
                        w[idx] = coeff * v[old_idx];
                    }
                    w
                })
                .collect();
            Ok((out, new_order))
        }
        RewriteEvent::Isometry(IsometryNode {
            parent,
            children,
            matrix,
        }) => {
            let d_pos = order
                .iter()
                .position(|q| q == parent)
                .ok_or_else(|| Error::internal(format!("merged qubit {parent} not in register")))?;
            let (a, b) = *children;
            if order.contains(&a) || order.contains(&b) {
                return Err(Error::internal("isometry children already in the register"));
            }
            let mut new_order: Vec<QubitId> =
                order.iter().cloned().filter(|q| q != parent).collect();
            new_order.push(a);
            new_order.push(b);
            new_order.sort_unstable();
            let k = new_order.len();
            let dim = 1usize << k;
            let shift_of = |q: QubitId| k - 1 - new_order.iter().position(|x| *x == q).unwrap();
            let (sa, sb) = (shift_of(a), shift_of(b));
            let kept: Vec<(usize, usize)> = order
                .iter()
                .enumerate()
                .filter(|(_, q)| *q != parent)
                .map(|(p, q)| (p, shift_of(*q)))
                .collect();
            let old_k = order.len();
            let out = states
                .iter()
                .map(|v| {
                    let mut w = CVec::zeros(dim);
                    for idx in 0..dim {
                        let pair_idx = 2 * (idx >> sa & 1) + (idx >> sb & 1);
                        let mut base = 0usize;
                        for (p, s) in &kept {
                            base |= (idx >> s & 1) << (old_k - 1 - p);
                        }
                        let mut amp = C64::new(0.0, 0.0);
                        for t in 0..2 {
                            let old_idx = base | t << (old_k - 1 - d_pos);
                            amp += matrix[(pair_idx, t)] * v[old_idx];
                        }
                        w[idx] = amp;
                    }
                    w
                })
                .collect();
            Ok((out, new_order))
        }
    }
}

/// Lift the leaf basis to dense states on the original `n` qubits by
/// replaying the reduction events in reverse order. Output states are
/// unit-normalized.
pub fn materialize(desc: &GroundSpaceDescription, cap: usize) -> Result<Vec<CVec>> {
    if desc.n > cap {
        return Err(Error::ResourceCap {
            what: "materialization qubits",
            required: desc.n.to_string(),
            cap: cap.to_string(),
        });
    }
    let basis = desc
        .leaf_basis
        .as_ref()
        .ok_or_else(|| Error::precondition("description carries no leaf basis"))?;
    let mut order = desc.forest.leaf_qubits.clone();
    let mut states: Vec<CVec> = basis.iter().map(|s| s.dense(&order)).collect();
    for event in desc.forest.events.iter().rev() {
        let (next_states, next_order) = apply_event_to_states(&states, &order, event)?;
        states = next_states;
        order = next_order;
    }
    if order.iter().cloned().ne(0..desc.n) {
        return Err(Error::internal(
            "event replay did not reconstruct the original register",
        ));
    }
    for v in &mut states {
        let norm = v.norm();
        if norm > 0.0 {
            *v /= cr(norm);
        }
    }
    Ok(states)
}

/// Forest shape summary: tree count, maximum depth, leaf count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForestStats {
    pub trees: usize,
    pub max_depth: usize,
    pub leaves: usize,
}

pub fn forest_stats(desc: &GroundSpaceDescription) -> ForestStats {
    let isometries: Vec<&IsometryNode> = desc
        .forest
        .events
        .iter()
        .filter_map(|e| match e {
            RewriteEvent::Isometry(node) => Some(node),
            _ => None,
        })
        .collect();
    // depth of each isometry node: 1 + max depth of isometries feeding its
    // children
    let by_parent: BTreeMap<QubitId, &IsometryNode> =
        isometries.iter().map(|n| (n.parent, *n)).collect();
    fn depth(
        node: &IsometryNode,
        by_parent: &BTreeMap<QubitId, &IsometryNode>,
        memo: &mut BTreeMap<QubitId, usize>,
    ) -> usize {
        if let Some(d) = memo.get(&node.parent) {
            return *d;
        }
        let (a, b) = node.children;
        let da = by_parent.get(&a).map_or(0, |n| depth(n, by_parent, memo));
        let db = by_parent.get(&b).map_or(0, |n| depth(n, by_parent, memo));
        let d = 1 + da.max(db);
        memo.insert(node.parent, d);
        d
    }
    let mut memo = BTreeMap::new();
    let mut max_depth = 0;
    // roots: isometry outputs never consumed by a later isometry
    let consumed: BTreeSet<QubitId> = isometries
        .iter()
        .flat_map(|n| [n.children.0, n.children.1])
        .collect();
    let mut trees = 0;
    for node in &isometries {
        if !consumed.contains(&node.parent) {
            trees += 1;
            max_depth = max_depth.max(depth(node, &by_parent, &mut memo));
        }
    }
    ForestStats {
        trees,
        max_depth,
        leaves: desc.forest.leaf_qubits.len(),
    }
}

// ---------------------------------------------------------------------------
// JSON schema v1
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DescriptionFile {
    schema: String,
    verdict: Verdict,
    dimension: String,
    n: usize,
    leaf_qubits: Vec<usize>,
    events: Vec<EventRec>,
    frames: Vec<FrameRec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    leaf_basis: Option<Vec<Vec<FactorRec>>>,
    certificate: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
enum EventRec {
    #[serde(rename = "isometry")]
    Isometry {
        parent: usize,
        children: [usize; 2],
        /// 4×2 matrix, row-major.
        matrix: Vec<[f64; 2]>,
    },
    #[serde(rename = "fixed")]
    Fixed {
        qubits: Vec<usize>,
        state: Vec<[f64; 2]>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRec {
    qubit: usize,
    /// 2×2 matrix, row-major.
    matrix: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactorRec {
    qubit: usize,
    vector: Vec<[f64; 2]>,
}

pub fn to_json(desc: &GroundSpaceDescription) -> Result<String> {
    let events = desc
        .forest
        .events
        .iter()
        .map(|e| match e {
            RewriteEvent::Isometry(node) => EventRec::Isometry {
                parent: node.parent,
                children: [node.children.0, node.children.1],
                matrix: mat_to_pairs(&node.matrix),
            },
            RewriteEvent::Fixed(f) => EventRec::Fixed {
                qubits: f.qubits.clone(),
                state: cvec_to_pairs(&f.state),
            },
        })
        .collect();
    let frames = desc
        .forest
        .frames
        .ops
        .iter()
        .map(|(q, m)| FrameRec {
            qubit: *q,
            matrix: mat_to_pairs(m),
        })
        .collect();
    let leaf_basis = desc.leaf_basis.as_ref().map(|basis| {
        basis
            .iter()
            .map(|s| {
                s.factors
                    .iter()
                    .map(|(q, v)| FactorRec {
                        qubit: *q,
                        vector: cvec_to_pairs(v),
                    })
                    .collect()
            })
            .collect()
    });
    let certificate = serde_json::from_str(&desc.certificate.to_json()).map_err(|e| {
        Error::internal(format!("certificate serialization failed: {e}"))
    })?;
    let file = DescriptionFile {
        schema: "v1".into(),
        verdict: desc.verdict,
        dimension: desc.dimension.to_str_radix(10),
        n: desc.n,
        leaf_qubits: desc.forest.leaf_qubits.clone(),
        events,
        frames,
        leaf_basis,
        certificate,
    };
    serde_json::to_string_pretty(&file).map_err(|e| Error::Parse {
        path: None,
        msg: e.to_string(),
    })
}

pub fn from_json(text: &str) -> Result<GroundSpaceDescription> {
    let file: DescriptionFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: None,
        msg: e.to_string(),
    })?;
    if file.schema != "v1" {
        return Err(Error::Parse {
            path: None,
            msg: format!("unsupported schema {}", file.schema),
        });
    }
    let events = file
        .events
        .into_iter()
        .map(|e| -> Result<RewriteEvent> {
            Ok(match e {
                EventRec::Isometry {
                    parent,
                    children,
                    matrix,
                } => RewriteEvent::Isometry(IsometryNode {
                    parent,
                    children: (children[0], children[1]),
                    matrix: mat_from_pairs(&matrix, 4, 2)?,
                }),
                EventRec::Fixed { qubits, state } => RewriteEvent::Fixed(FixedFactor {
                    qubits,
                    state: cvec_from_pairs(&state),
                }),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut frames = LocalFrame::default();
    for rec in file.frames {
        frames.set(rec.qubit, mat_from_pairs(&rec.matrix, 2, 2)?);
    }
    let leaf_basis = file
        .leaf_basis
        .map(|basis| {
            basis
                .into_iter()
                .map(|factors| ProductBasisState {
                    factors: factors
                        .into_iter()
                        .map(|f| (f.qubit, cvec_from_pairs(&f.vector)))
                        .collect(),
                })
                .collect()
        });
    let dimension = BigUint::parse_bytes(file.dimension.as_bytes(), 10).ok_or_else(|| {
        Error::Parse {
            path: None,
            msg: format!("bad dimension literal {}", file.dimension),
        }
    })?;
    let certificate = BranchNode::from_json(&serde_json::to_string(&file.certificate).unwrap())?;
    Ok(GroundSpaceDescription {
        verdict: file.verdict,
        dimension,
        n: file.n,
        forest: TTNForest {
            events,
            frames,
            leaf_qubits: file.leaf_qubits,
        },
        leaf_basis,
        certificate,
    })
}

fn mat_to_pairs(m: &CMat) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push([m[(i, j)].re, m[(i, j)].im]);
        }
    }
    out
}

fn mat_from_pairs(entries: &[[f64; 2]], rows: usize, cols: usize) -> Result<CMat> {
    if entries.len() != rows * cols {
        return Err(Error::Parse {
            path: None,
            msg: format!("matrix needs {} entries, got {}", rows * cols, entries.len()),
        });
    }
    Ok(CMat::from_fn(rows, cols, |i, j| {
        let [re, im] = entries[i * cols + j];
        C64::new(re, im)
    }))
}

/// A description declaring frustration with an empty ground space.
pub fn frustrated_description(
    n: usize,
    events: ReductionLog,
    leaf_qubits: Vec<QubitId>,
) -> GroundSpaceDescription {
    GroundSpaceDescription {
        verdict: Verdict::Frustrated,
        dimension: BigUint::zero(),
        n,
        forest: TTNForest {
            events,
            frames: LocalFrame::default(),
            leaf_qubits,
        },
        leaf_basis: None,
        certificate: BranchNode {
            kind: crate::dashed::BranchKind::DeadLeaf,
            dim: BigUint::zero(),
            children: vec![],
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{ket, overlap};
    use num_traits::One;

    fn product_state(factors: &[(QubitId, CVec)]) -> ProductBasisState {
        ProductBasisState {
            factors: factors.iter().cloned().collect(),
        }
    }

    fn trivial_certificate(dim: u64) -> BranchNode {
        BranchNode {
            kind: crate::dashed::BranchKind::FreeQubits { qubits: vec![] },
            dim: BigUint::from(dim),
            children: vec![],
        }
    }

    #[test]
    fn replay_single_isometry() {
        // |0⟩ ↦ |00⟩, |1⟩ ↦ |11⟩ over leaf basis {|0⟩, |1⟩} gives {|00⟩, |11⟩}
        let mut matrix = CMat::zeros(4, 2);
        matrix[(0, 0)] = cr(1.0);
        matrix[(3, 1)] = cr(1.0);
        let desc = GroundSpaceDescription {
            verdict: Verdict::Satisfiable,
            dimension: BigUint::from(2u32),
            n: 2,
            forest: TTNForest {
                events: vec![RewriteEvent::Isometry(IsometryNode {
                    parent: 2,
                    children: (0, 1),
                    matrix,
                })],
                frames: LocalFrame::default(),
                leaf_qubits: vec![2],
            },
            leaf_basis: Some(vec![
                product_state(&[(2, ket(&[0]))]),
                product_state(&[(2, ket(&[1]))]),
            ]),
            certificate: trivial_certificate(2),
        };
        let states = materialize(&desc, 14).unwrap();
        assert_eq!(states.len(), 2);
        assert!(overlap(&states[0], &ket(&[0, 0])) > 1.0 - 1e-12);
        assert!(overlap(&states[1], &ket(&[1, 1])) > 1.0 - 1e-12);
    }

    #[test]
    fn replay_identity_and_fixed_factor() {
        // empty forest keeps a product state as-is
        let desc = GroundSpaceDescription {
            verdict: Verdict::Satisfiable,
            dimension: BigUint::one(),
            n: 2,
            forest: TTNForest {
                events: vec![],
                frames: LocalFrame::default(),
                leaf_qubits: vec![0, 1],
            },
            leaf_basis: Some(vec![product_state(&[(0, ket(&[0])), (1, ket(&[1]))])]),
            certificate: trivial_certificate(1),
        };
        let states = materialize(&desc, 14).unwrap();
        assert!(overlap(&states[0], &ket(&[0, 1])) > 1.0 - 1e-12);

        // a fixed factor tensors back into place
        let desc = GroundSpaceDescription {
            verdict: Verdict::Satisfiable,
            dimension: BigUint::one(),
            n: 3,
            forest: TTNForest {
                events: vec![RewriteEvent::Fixed(FixedFactor {
                    qubits: vec![1],
                    state: ket(&[1]),
                })],
                frames: LocalFrame::default(),
                leaf_qubits: vec![0, 2],
            },
            leaf_basis: Some(vec![product_state(&[(0, ket(&[0])), (2, ket(&[0]))])]),
            certificate: trivial_certificate(1),
        };
        let states = materialize(&desc, 14).unwrap();
        assert!(overlap(&states[0], &ket(&[0, 1, 0])) > 1.0 - 1e-12);
    }

    #[test]
    fn replay_preserves_gram_matrix() {
        // isometry replay preserves inner products of the leaf states
        let mut matrix = CMat::zeros(4, 2);
        let s = 1.0 / 2.0_f64.sqrt();
        matrix[(1, 0)] = cr(s);
        matrix[(2, 0)] = cr(-s);
        matrix[(0, 1)] = cr(1.0);
        let leaf0 = product_state(&[(3, ket(&[0])), (2, ket(&[0]))]);
        let leaf1 = product_state(&[(3, CVec::from_vec(vec![cr(s), cr(s)])), (2, ket(&[1]))]);
        let desc = GroundSpaceDescription {
            verdict: Verdict::Satisfiable,
            dimension: BigUint::from(2u32),
            n: 3,
            forest: TTNForest {
                events: vec![RewriteEvent::Isometry(IsometryNode {
                    parent: 3,
                    children: (0, 1),
                    matrix,
                })],
                frames: LocalFrame::default(),
                leaf_qubits: vec![2, 3],
            },
            leaf_basis: Some(vec![leaf0.clone(), leaf1.clone()]),
            certificate: trivial_certificate(2),
        };
        let states = materialize(&desc, 14).unwrap();
        let leaf_dense: Vec<CVec> = [&leaf0, &leaf1]
            .iter()
            .map(|s| s.dense(&[2, 3]))
            .collect();
        let g_leaf = leaf_dense[0].dotc(&leaf_dense[1]);
        let g_out = states[0].dotc(&states[1]);
        assert!((g_leaf - g_out).norm() < 1e-8);
    }

    #[test]
    fn materialize_cap() {
        let desc = frustrated_description(20, vec![], vec![]);
        assert!(matches!(
            materialize(&desc, 14),
            Err(Error::ResourceCap { .. })
        ));
    }

    #[test]
    fn stats_on_empty_and_chained_forests() {
        let desc = frustrated_description(4, vec![], (0..4).collect());
        let stats = forest_stats(&desc);
        assert_eq!(
            (stats.trees, stats.max_depth, stats.leaves),
            (0, 0, 4)
        );

        // two chained merges: (0,1)→4, then (4,2)→5: one tree of depth 2
        let mk = |parent, children| {
            RewriteEvent::Isometry(IsometryNode {
                parent,
                children,
                matrix: CMat::identity(4, 2),
            })
        };
        let desc = GroundSpaceDescription {
            verdict: Verdict::Satisfiable,
            dimension: BigUint::one(),
            n: 4,
            forest: TTNForest {
                events: vec![mk(4, (0, 1)), mk(5, (4, 2))],
                frames: LocalFrame::default(),
                leaf_qubits: vec![3, 5],
            },
            leaf_basis: None,
            certificate: trivial_certificate(1),
        };
        let stats = forest_stats(&desc);
        assert_eq!((stats.trees, stats.max_depth, stats.leaves), (1, 2, 2));
    }

    #[test]
    fn json_round_trip() {
        let mut matrix = CMat::zeros(4, 2);
        matrix[(0, 0)] = cr(1.0);
        matrix[(3, 1)] = cr(1.0);
        let desc = GroundSpaceDescription {
            verdict: Verdict::Satisfiable,
            dimension: BigUint::from(2u32),
            n: 2,
            forest: TTNForest {
                events: vec![RewriteEvent::Isometry(IsometryNode {
                    parent: 2,
                    children: (0, 1),
                    matrix,
                })],
                frames: LocalFrame::default(),
                leaf_qubits: vec![2],
            },
            leaf_basis: Some(vec![
                product_state(&[(2, ket(&[0]))]),
                product_state(&[(2, ket(&[1]))]),
            ]),
            certificate: trivial_certificate(2),
        };
        let text = to_json(&desc).unwrap();
        assert!(text.contains("\"schema\": \"v1\""));
        let back = from_json(&text).unwrap();
        assert_eq!(back.dimension, desc.dimension);
        assert_eq!(back.n, 2);
        assert_eq!(back.forest.leaf_qubits, vec![2]);
        let states = materialize(&back, 14).unwrap();
        assert!(overlap(&states[0], &ket(&[0, 0])) > 1.0 - 1e-12);
    }
}
