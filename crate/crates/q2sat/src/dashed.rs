//! Recursive ground-space solver for product-constraint (dashed-only) graphs.
//!
//! The recursion mirrors the inductive structure of the problem: resolve
//! pending unit constraints, split connected components, branch on a vertex
//! whose incident directions all agree, otherwise find an alternating or
//! quasi-alternating loop by a deterministic walk. The recursion tree doubles
//! as a machine-checkable counting certificate, and basis mode emits the
//! ground space as product states plus per-qubit frames under which distinct
//! branches become orthogonal.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LocalFrame;
use crate::instance::{Instance, Pair, QubitId};
use crate::numerics::{self, cr, perp2, CMat, CVec, Tolerance};

/// Product-constraint graph: each edge stores its two endpoint directions.
#[derive(Debug, Clone, Default)]
pub struct DashedGraph {
    pub vertices: BTreeSet<QubitId>,
    /// Directions `(at pair.a, at pair.b)`, unit norm.
    pub edges: BTreeMap<Pair, (CVec, CVec)>,
    pub units: BTreeMap<QubitId, CVec>,
    /// Set when two linearly independent units landed on one qubit.
    pub conflict: bool,
}

impl DashedGraph {
    pub fn new(vertices: impl IntoIterator<Item = QubitId>) -> Self {
        DashedGraph {
            vertices: vertices.into_iter().collect(),
            ..Default::default()
        }
    }

    /// Build from a homogeneous instance whose edges are all product
    /// constraints.
    pub fn from_instance(inst: &Instance, tol: &Tolerance) -> Result<Self> {
        let mut g = DashedGraph::new(inst.active.iter().cloned());
        for (pair, block) in &inst.blocks {
            if block.rank() != 1 {
                return Err(Error::precondition("dashed graph requires rank-1 blocks"));
            }
            let (kind, factors) = crate::graph::classify_edge(&block.vectors[0], tol)?;
            if kind != crate::graph::EdgeKind::Dashed {
                return Err(Error::precondition(format!(
                    "edge {pair} carries an entangled constraint"
                )));
            }
            let (alpha, beta) = factors.expect("dashed factors");
            g.add_edge(*pair, alpha, beta, tol)?;
        }
        for (q, u) in &inst.units {
            g.add_unit(*q, u.clone(), tol);
        }
        if !inst.unit_conflicts.is_empty() {
            g.conflict = true;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, pair: Pair, at_a: CVec, at_b: CVec, tol: &Tolerance) -> Result<()> {
        if !self.vertices.contains(&pair.a) || !self.vertices.contains(&pair.b) {
            return Err(Error::invalid(format!("edge {pair} outside the vertex set")));
        }
        match self.edges.get(&pair) {
            Some((ea, eb)) => {
                // duplicate product constraints collapse; independent ones
                // should have been routed through rank reduction
                if numerics::parallel(ea, &at_a, tol) && numerics::parallel(eb, &at_b, tol) {
                    Ok(())
                } else {
                    Err(Error::precondition(format!(
                        "independent product constraints stacked on {pair}"
                    )))
                }
            }
            None => {
                self.edges.insert(pair, (at_a, at_b));
                Ok(())
            }
        }
    }

    /// Merge a unit constraint, flagging a conflict when directions disagree.
    pub fn add_unit(&mut self, q: QubitId, u: CVec, tol: &Tolerance) {
        let mut u = u;
        let n = u.norm();
        debug_assert!(n > 0.0);
        u /= cr(n);
        match self.units.get(&q) {
            Some(existing) => {
                if !numerics::parallel(existing, &u, tol) {
                    self.conflict = true;
                }
            }
            None => {
                self.units.insert(q, u);
            }
        }
    }

    /// Direction of the edge at one of its endpoints.
    pub fn direction_at(&self, pair: Pair, q: QubitId) -> &CVec {
        let (a, b) = self.edges.get(&pair).expect("edge exists");
        if q == pair.a {
            a
        } else {
            b
        }
    }

    pub fn edges_at(&self, q: QubitId) -> Vec<Pair> {
        self.edges.keys().filter(|p| p.contains(q)).cloned().collect()
    }

    /// Pin a vertex to a state: the vertex leaves the graph; each incident
    /// edge either dies (the pinned state annihilates its direction) or
    /// contracts to a unit on the neighbor. Returns false when the pin
    /// violates a pending unit constraint.
    pub fn pin_vertex(&mut self, q: QubitId, pin: &CVec, tol: &Tolerance) -> bool {
        if let Some(u) = self.units.remove(&q) {
            if u.dotc(pin).norm() > tol.eps_rank {
                return false;
            }
        }
        self.vertices.remove(&q);
        for pair in self.edges_at(q) {
            let (da, db) = self.edges.remove(&pair).unwrap();
            let (dq, dr) = if q == pair.a { (da, db) } else { (db, da) };
            if dq.dotc(pin).norm() > tol.eps_rank {
                self.add_unit(pair.other(q), dr, tol);
            }
        }
        true
    }
}

// ---------------------------------------------------------------------------
// Certificate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum BranchKind {
    /// All incident directions at `vertex` agree; children are the branch
    /// fixing it to the shared direction (neighbors constrained) and the
    /// branch fixing it orthogonal (edges dropped).
    UniformVertex { vertex: QubitId },
    /// Alternating loop; children are the two frame-mapped assignments.
    AltLoop { vertices: Vec<QubitId> },
    /// Deterministically forced vertex (quasi-loop special vertex or unit
    /// cascade step).
    QuasiForce { vertex: QubitId, state: CVec },
    FreeQubits { qubits: Vec<QubitId> },
    EmptyLeaf,
    DeadLeaf,
    /// Disconnected components: dimension multiplies over children.
    Product,
    /// Backbone extension by one solid tail in basis mode; `s0_dim` is the
    /// part of the child dimension where the attachment qubit was free.
    TailExtension {
        attachment: QubitId,
        tail_qubits: usize,
        s0_dim: BigUint,
    },
}

/// Node of the solver's recursion tree; the `#P`-style choice certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchNode {
    pub kind: BranchKind,
    pub dim: BigUint,
    pub children: Vec<BranchNode>,
}

impl BranchNode {
    fn leaf(kind: BranchKind, dim: BigUint) -> Self {
        BranchNode {
            kind,
            dim,
            children: vec![],
        }
    }

    /// Recompute every dimension bottom-up and compare against the stored
    /// values; the certificate check.
    pub fn validate(&self) -> Result<()> {
        for child in &self.children {
            child.validate()?;
        }
        let expect: BigUint = match &self.kind {
            BranchKind::UniformVertex { .. } | BranchKind::AltLoop { .. } => {
                if self.children.len() != 2 {
                    return Err(Error::invalid("branching node needs two children"));
                }
                &self.children[0].dim + &self.children[1].dim
            }
            BranchKind::QuasiForce { .. } => {
                if self.children.len() != 1 {
                    return Err(Error::invalid("forcing node needs one child"));
                }
                self.children[0].dim.clone()
            }
            BranchKind::FreeQubits { qubits } => BigUint::one() << qubits.len(),
            BranchKind::EmptyLeaf => BigUint::one(),
            BranchKind::DeadLeaf => BigUint::zero(),
            BranchKind::Product => self
                .children
                .iter()
                .fold(BigUint::one(), |acc, c| acc * &c.dim),
            BranchKind::TailExtension {
                tail_qubits,
                s0_dim,
                ..
            } => {
                if self.children.len() != 1 {
                    return Err(Error::invalid("tail extension needs one child"));
                }
                let child = &self.children[0].dim;
                let doubled = s0_dim * 2u32;
                if &doubled > child {
                    return Err(Error::invalid("tail extension s0 exceeds child dimension"));
                }
                let pinned = child - doubled;
                s0_dim * (*tail_qubits as u32 + 1) + pinned
            }
        };
        if expect != self.dim {
            return Err(Error::invalid(format!(
                "certificate dimension mismatch: stored {}, recomputed {expect}",
                self.dim
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&BranchNodeDto::from_node(self)).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dto: BranchNodeDto = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: None,
            msg: e.to_string(),
        })?;
        dto.into_node()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BranchNodeDto {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    vertex: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    vertices: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    qubits: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    state: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    attachment: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tail_qubits: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    s0_dim: Option<String>,
    dimension: String,
    children: Vec<BranchNodeDto>,
}

impl BranchNodeDto {
    fn from_node(node: &BranchNode) -> Self {
        let mut dto = BranchNodeDto {
            kind: String::new(),
            vertex: None,
            vertices: None,
            qubits: None,
            state: None,
            attachment: None,
            tail_qubits: None,
            s0_dim: None,
            dimension: node.dim.to_str_radix(10),
            children: node.children.iter().map(Self::from_node).collect(),
        };
        match &node.kind {
            BranchKind::UniformVertex { vertex } => {
                dto.kind = "UNIFORM_VERTEX".into();
                dto.vertex = Some(*vertex);
            }
            BranchKind::AltLoop { vertices } => {
                dto.kind = "ALT_LOOP".into();
                dto.vertices = Some(vertices.clone());
            }
            BranchKind::QuasiForce { vertex, state } => {
                dto.kind = "QUASI_FORCE".into();
                dto.vertex = Some(*vertex);
                dto.state = Some(crate::instance::cvec_to_pairs(state));
            }
            BranchKind::FreeQubits { qubits } => {
                dto.kind = "FREE_QUBITS".into();
                dto.qubits = Some(qubits.clone());
            }
            BranchKind::EmptyLeaf => dto.kind = "EMPTY_LEAF".into(),
            BranchKind::DeadLeaf => dto.kind = "DEAD_LEAF".into(),
            BranchKind::Product => dto.kind = "PRODUCT".into(),
            BranchKind::TailExtension {
                attachment,
                tail_qubits,
                s0_dim,
            } => {
                dto.kind = "TAIL_EXTENSION".into();
                dto.attachment = Some(*attachment);
                dto.tail_qubits = Some(*tail_qubits);
                dto.s0_dim = Some(s0_dim.to_str_radix(10));
            }
        }
        dto
    }

    fn into_node(self) -> Result<BranchNode> {
        let parse_dim = |s: &str| -> Result<BigUint> {
            BigUint::parse_bytes(s.as_bytes(), 10)
                .ok_or_else(|| Error::invalid(format!("bad dimension literal {s}")))
        };
        let dim = parse_dim(&self.dimension)?;
        let missing = |what: &str| Error::invalid(format!("certificate node missing {what}"));
        let kind = match self.kind.as_str() {
            "UNIFORM_VERTEX" => BranchKind::UniformVertex {
                vertex: self.vertex.ok_or_else(|| missing("vertex"))?,
            },
            "ALT_LOOP" => BranchKind::AltLoop {
                vertices: self.vertices.ok_or_else(|| missing("vertices"))?,
            },
            "QUASI_FORCE" => BranchKind::QuasiForce {
                vertex: self.vertex.ok_or_else(|| missing("vertex"))?,
                state: crate::instance::cvec_from_pairs(
                    &self.state.ok_or_else(|| missing("state"))?,
                ),
            },
            "FREE_QUBITS" => BranchKind::FreeQubits {
                qubits: self.qubits.ok_or_else(|| missing("qubits"))?,
            },
            "EMPTY_LEAF" => BranchKind::EmptyLeaf,
            "DEAD_LEAF" => BranchKind::DeadLeaf,
            "PRODUCT" => BranchKind::Product,
            "TAIL_EXTENSION" => BranchKind::TailExtension {
                attachment: self.attachment.ok_or_else(|| missing("attachment"))?,
                tail_qubits: self.tail_qubits.ok_or_else(|| missing("tail_qubits"))?,
                s0_dim: parse_dim(&self.s0_dim.ok_or_else(|| missing("s0_dim"))?)?,
            },
            other => return Err(Error::invalid(format!("unknown certificate kind {other}"))),
        };
        Ok(BranchNode {
            kind,
            dim,
            children: self
                .children
                .into_iter()
                .map(Self::into_node)
                .collect::<Result<_>>()?,
        })
    }
}

// ---------------------------------------------------------------------------
// Product families and basis states
// ---------------------------------------------------------------------------

/// A bundle of product basis states sharing pinned factors: the free qubits
/// expand to the two frame basis states each, so the bundle represents
/// `2^(#free)` states.
#[derive(Debug, Clone, Default)]
pub struct ProductFamily {
    pub pins: BTreeMap<QubitId, CVec>,
    pub free: BTreeSet<QubitId>,
}

impl ProductFamily {
    pub fn dim(&self) -> BigUint {
        BigUint::one() << self.free.len()
    }

    pub fn qubits(&self) -> impl Iterator<Item = QubitId> + '_ {
        self.pins.keys().cloned().chain(self.free.iter().cloned())
    }
}

/// One fully expanded product basis state.
#[derive(Debug, Clone)]
pub struct ProductBasisState {
    pub factors: BTreeMap<QubitId, CVec>,
}

impl ProductBasisState {
    /// Dense state over the given qubit order (first qubit most significant).
    pub fn dense(&self, order: &[QubitId]) -> CVec {
        let mut v = CVec::from_vec(vec![cr(1.0)]);
        for q in order {
            let f = self
                .factors
                .get(q)
                .unwrap_or_else(|| panic!("missing factor for qubit {q}"));
            v = numerics::kron_vec(&v, f);
        }
        v
    }
}

/// Expand families into individual product states, free qubits taking the
/// two columns of their frame (identity where unbound).
pub fn expand_families(families: &[ProductFamily], frames: &LocalFrame) -> Vec<ProductBasisState> {
    let mut out = Vec::new();
    for family in families {
        let mut states = vec![ProductBasisState {
            factors: family.pins.clone(),
        }];
        for q in &family.free {
            let frame = frames.get(*q);
            let mut next = Vec::with_capacity(states.len() * 2);
            for s in &states {
                for col in 0..2 {
                    let mut factor = frame.column(col).into_owned();
                    let norm = factor.norm();
                    factor /= cr(norm);
                    let mut t = s.clone();
                    t.factors.insert(*q, factor);
                    next.push(t);
                }
            }
            states = next;
        }
        out.extend(states);
    }
    out
}

// ---------------------------------------------------------------------------
// Frame registry
// ---------------------------------------------------------------------------

/// A diverging pair of single-qubit states registered at a branching vertex.
#[derive(Debug, Clone)]
struct FramePair(CVec, CVec);

#[derive(Debug, Clone)]
pub struct FrameConflict {
    pub vertex: QubitId,
    pub detail: String,
}

#[derive(Debug, Default)]
struct FrameRegistry {
    pairs: BTreeMap<QubitId, Vec<FramePair>>,
}

impl FrameRegistry {
    fn register(&mut self, q: QubitId, s0: CVec, s1: CVec) {
        self.pairs.entry(q).or_default().push(FramePair(s0, s1));
    }

    /// Choose one frame per vertex that maps every registered diverging pair
    /// to an orthogonal pair; report vertices where no single frame works.
    fn resolve(&self) -> (LocalFrame, Vec<FrameConflict>) {
        let mut frames = LocalFrame::default();
        let mut conflicts = Vec::new();
        for (q, pairs) in &self.pairs {
            let binding = pairs
                .iter()
                .find(|FramePair(s0, s1)| s0.dotc(s1).norm() > 1e-9);
            let frame = match binding {
                Some(FramePair(s0, s1)) => {
                    let mut f = CMat::zeros(2, 2);
                    f.column_mut(0).copy_from(s0);
                    f.column_mut(1).copy_from(s1);
                    f
                }
                None => CMat::identity(2, 2),
            };
            let inv = match numerics::inv2(&frame) {
                Ok(inv) => inv,
                Err(_) => {
                    conflicts.push(FrameConflict {
                        vertex: *q,
                        detail: "singular frame binding".into(),
                    });
                    continue;
                }
            };
            for FramePair(s0, s1) in pairs {
                let a = &inv * s0;
                let b = &inv * s1;
                let overlap = a.dotc(&b).norm() / (a.norm() * b.norm());
                if overlap > 1e-8 {
                    conflicts.push(FrameConflict {
                        vertex: *q,
                        detail: format!(
                            "no single frame orthogonalizes all diverging pairs (overlap {overlap:.3e})"
                        ),
                    });
                    break;
                }
            }
            frames.set(*q, frame);
        }
        (frames, conflicts)
    }
}

// ---------------------------------------------------------------------------
// Structure discovery
// ---------------------------------------------------------------------------

/// Lowest vertex whose incident edge directions are pairwise parallel,
/// together with that common direction.
pub fn find_uniform_vertex(g: &DashedGraph, tol: &Tolerance) -> Option<(QubitId, CVec)> {
    for v in &g.vertices {
        let pairs = g.edges_at(*v);
        if pairs.is_empty() {
            continue;
        }
        let dirs: Vec<&CVec> = pairs.iter().map(|p| g.direction_at(*p, *v)).collect();
        let uniform = dirs
            .iter()
            .skip(1)
            .all(|d| numerics::parallel(dirs[0], d, tol));
        if uniform {
            return Some((*v, dirs[0].clone()));
        }
    }
    None
}

/// A loop discovered by the alternating walk.
#[derive(Debug, Clone)]
pub struct AltStructure {
    /// Loop vertices in walk order.
    pub vertices: Vec<QubitId>,
    /// Departure direction at each loop vertex (toward the next one).
    pub departures: Vec<CVec>,
    /// Arrival direction at each loop vertex (from the previous one; for the
    /// closing vertex this is the closing edge's direction).
    pub arrivals: Vec<CVec>,
    /// Set when the closing vertex's two loop directions are parallel.
    pub special: Option<QubitId>,
}

/// Walk along edges, always departing through a direction independent of the
/// arrival, until the first vertex revisit closes a loop.
pub fn find_alternating_structure(g: &DashedGraph, tol: &Tolerance) -> Result<AltStructure> {
    let start = *g
        .vertices
        .iter()
        .find(|v| !g.edges_at(**v).is_empty())
        .ok_or_else(|| Error::precondition("graph has no edges"))?;

    // walk state: vertex, arrival direction at that vertex, departure pair
    let mut order: Vec<QubitId> = Vec::new();
    let mut index: BTreeMap<QubitId, usize> = BTreeMap::new();
    let mut departures: Vec<CVec> = Vec::new();
    let mut arrivals: Vec<Option<CVec>> = Vec::new();

    let mut current = start;
    let mut arrival: Option<CVec> = None;
    loop {
        if let Some(&i) = index.get(&current) {
            // loop closed at `current`
            let closing_arrival = arrival.expect("closing step has an arrival");
            let vertices: Vec<QubitId> = order[i..].to_vec();
            let mut deps: Vec<CVec> = departures[i..].to_vec();
            let mut arrs: Vec<CVec> = Vec::with_capacity(vertices.len());
            arrs.push(closing_arrival.clone());
            for a in arrivals[i + 1..].iter() {
                arrs.push(a.clone().expect("interior arrivals recorded"));
            }
            let special = if numerics::parallel(&deps[0], &closing_arrival, tol) {
                Some(current)
            } else {
                None
            };
            debug_assert_eq!(deps.len(), vertices.len());
            debug_assert_eq!(arrs.len(), vertices.len());
            // keep departures aligned with vertices
            let _ = &mut deps;
            return Ok(AltStructure {
                vertices,
                departures: deps,
                arrivals: arrs,
                special,
            });
        }
        index.insert(current, order.len());
        order.push(current);
        arrivals.push(arrival.clone());

        let pairs = g.edges_at(current);
        let next_pair = match &arrival {
            None => *pairs
                .first()
                .ok_or_else(|| Error::internal("walk entered an isolated vertex"))?,
            Some(delta) => *pairs
                .iter()
                .find(|p| !numerics::parallel(g.direction_at(**p, current), delta, tol))
                .ok_or_else(|| {
                    Error::internal(
                        "alternating walk stuck: vertex is uniform against its arrival",
                    )
                })?,
        };
        departures.push(g.direction_at(next_pair, current).clone());
        let next = next_pair.other(current);
        arrival = Some(g.direction_at(next_pair, next).clone());
        current = next;
    }
}

// ---------------------------------------------------------------------------
// Solver
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct DashedSolution {
    pub dim: BigUint,
    pub certificate: BranchNode,
    pub families: Option<Vec<ProductFamily>>,
    pub frames: LocalFrame,
    pub frame_conflicts: Vec<FrameConflict>,
}

struct Ctx<'a> {
    tol: &'a Tolerance,
    registry: FrameRegistry,
    want_basis: bool,
}

struct Sub {
    node: BranchNode,
    families: Vec<ProductFamily>,
}

impl Sub {
    fn dead() -> Self {
        Sub {
            node: BranchNode::leaf(BranchKind::DeadLeaf, BigUint::zero()),
            families: vec![],
        }
    }
}

/// Solve a dashed graph: exact dimension, recursion certificate, and in basis
/// mode the product families plus frames. `basis_cap` bounds the dimension
/// that may be materialized.
pub fn solve_dashed(
    g: &DashedGraph,
    want_basis: bool,
    basis_cap: u64,
    tol: &Tolerance,
) -> Result<DashedSolution> {
    let mut ctx = Ctx {
        tol,
        registry: FrameRegistry::default(),
        want_basis,
    };
    let sub = solve_rec(g.clone(), &mut ctx)?;
    let (frames, frame_conflicts) = ctx.registry.resolve();
    if want_basis && sub.node.dim > BigUint::from(basis_cap) {
        return Err(Error::BasisCapExceeded {
            dimension: sub.node.dim,
            cap: basis_cap,
        });
    }
    Ok(DashedSolution {
        dim: sub.node.dim.clone(),
        certificate: sub.node,
        families: want_basis.then_some(sub.families),
        frames,
        frame_conflicts,
    })
}

fn solve_rec(mut g: DashedGraph, ctx: &mut Ctx) -> Result<Sub> {
    if g.conflict {
        return Ok(Sub::dead());
    }

    // resolve one pending unit constraint, then recurse
    if let Some((&q, u)) = g.units.iter().next() {
        let u = u.clone();
        g.units.remove(&q);
        let pin = perp2(&u);
        if !g.pin_vertex(q, &pin, ctx.tol) {
            return Ok(Sub::dead());
        }
        // the pin itself cannot conflict (the unit was removed first), but
        // derived units may
        let child = solve_rec(g, ctx)?;
        return Ok(wrap_force(q, pin, child, ctx));
    }

    if g.vertices.is_empty() {
        return Ok(Sub {
            node: BranchNode::leaf(BranchKind::EmptyLeaf, BigUint::one()),
            families: vec![ProductFamily::default()],
        });
    }

    // split isolated vertices and connected components
    let isolated: Vec<QubitId> = g
        .vertices
        .iter()
        .cloned()
        .filter(|v| g.edges_at(*v).is_empty())
        .collect();
    let comps = edge_components(&g);
    let mut pieces: Vec<Sub> = Vec::new();
    if !isolated.is_empty() {
        pieces.push(Sub {
            node: BranchNode::leaf(
                BranchKind::FreeQubits {
                    qubits: isolated.clone(),
                },
                BigUint::one() << isolated.len(),
            ),
            families: vec![ProductFamily {
                pins: BTreeMap::new(),
                free: isolated.iter().cloned().collect(),
            }],
        });
    }
    for comp in &comps {
        let sub_graph = restrict(&g, comp);
        pieces.push(solve_component(sub_graph, ctx)?);
    }

    match pieces.len() {
        0 => Err(Error::internal("nonempty graph produced no pieces")),
        1 => Ok(pieces.pop().unwrap()),
        _ => {
            let dim = pieces
                .iter()
                .fold(BigUint::one(), |acc, p| acc * &p.node.dim);
            let families = if ctx.want_basis {
                cross_families(&pieces)
            } else {
                vec![]
            };
            Ok(Sub {
                node: BranchNode {
                    kind: BranchKind::Product,
                    dim,
                    children: pieces.into_iter().map(|p| p.node).collect(),
                },
                families,
            })
        }
    }
}

fn wrap_force(q: QubitId, pin: CVec, child: Sub, ctx: &Ctx) -> Sub {
    let families = if ctx.want_basis {
        child
            .families
            .iter()
            .map(|f| {
                let mut f = f.clone();
                f.pins.insert(q, pin.clone());
                f
            })
            .collect()
    } else {
        vec![]
    };
    Sub {
        node: BranchNode {
            kind: BranchKind::QuasiForce {
                vertex: q,
                state: pin,
            },
            dim: child.node.dim.clone(),
            children: vec![child.node],
        },
        families,
    }
}

fn solve_component(g: DashedGraph, ctx: &mut Ctx) -> Result<Sub> {
    if let Some((vertex, dir)) = find_uniform_vertex(&g, ctx.tol) {
        let dir_perp = perp2(&dir);
        ctx.registry.register(vertex, dir.clone(), dir_perp.clone());

        // branch A: vertex takes the shared direction, neighbors constrained
        let mut ga = g.clone();
        let ok_a = ga.pin_vertex(vertex, &dir, ctx.tol);
        let sub_a = if ok_a { solve_rec(ga, ctx)? } else { Sub::dead() };

        // branch B: vertex takes the orthogonal state, its edges drop
        let mut gb = g;
        let ok_b = gb.pin_vertex(vertex, &dir_perp, ctx.tol);
        let sub_b = if ok_b { solve_rec(gb, ctx)? } else { Sub::dead() };

        let dim = &sub_a.node.dim + &sub_b.node.dim;
        let families = if ctx.want_basis {
            let mut fams = pin_families(&sub_a.families, vertex, &dir);
            fams.extend(pin_families(&sub_b.families, vertex, &dir_perp));
            fams
        } else {
            vec![]
        };
        return Ok(Sub {
            node: BranchNode {
                kind: BranchKind::UniformVertex { vertex },
                dim,
                children: vec![sub_a.node, sub_b.node],
            },
            families,
        });
    }

    let looped = find_alternating_structure(&g, ctx.tol)?;
    if let Some(special) = looped.special {
        // the special vertex's constraint must be satisfied: force it
        // orthogonal to the shared direction via a unit, then recurse
        let shared = looped.departures[0].clone();
        let mut g = g;
        g.add_unit(special, shared, ctx.tol);
        return solve_rec(g, ctx);
    }

    // alternating loop: two branches, every loop vertex pinned at once
    let pins0: Vec<CVec> = looped.departures.iter().map(perp2).collect();
    let pins1: Vec<CVec> = looped.arrivals.iter().map(perp2).collect();
    for (i, v) in looped.vertices.iter().enumerate() {
        ctx.registry.register(*v, pins0[i].clone(), pins1[i].clone());
    }

    let mut subs: Vec<Sub> = Vec::with_capacity(2);
    for pins in [&pins0, &pins1] {
        let mut gb = g.clone();
        let mut alive = true;
        for (v, pin) in looped.vertices.iter().zip(pins.iter()) {
            if !gb.pin_vertex(*v, pin, ctx.tol) {
                alive = false;
                break;
            }
        }
        let child = if alive { solve_rec(gb, ctx)? } else { Sub::dead() };
        let child = if ctx.want_basis && child.node.dim > BigUint::zero() {
            let families = child
                .families
                .iter()
                .map(|f| {
                    let mut f = f.clone();
                    for (v, pin) in looped.vertices.iter().zip(pins.iter()) {
                        f.pins.insert(*v, pin.clone());
                    }
                    f
                })
                .collect();
            Sub {
                node: child.node,
                families,
            }
        } else {
            child
        };
        subs.push(child);
    }
    let sub1 = subs.pop().unwrap();
    let sub0 = subs.pop().unwrap();
    let dim = &sub0.node.dim + &sub1.node.dim;
    let mut families = sub0.families;
    families.extend(sub1.families);
    Ok(Sub {
        node: BranchNode {
            kind: BranchKind::AltLoop {
                vertices: looped.vertices,
            },
            dim,
            children: vec![sub0.node, sub1.node],
        },
        families,
    })
}

fn pin_families(families: &[ProductFamily], q: QubitId, pin: &CVec) -> Vec<ProductFamily> {
    families
        .iter()
        .map(|f| {
            let mut f = f.clone();
            f.pins.insert(q, pin.clone());
            f
        })
        .collect()
}

fn cross_families(pieces: &[Sub]) -> Vec<ProductFamily> {
    let mut acc = vec![ProductFamily::default()];
    for piece in pieces {
        let mut next = Vec::with_capacity(acc.len() * piece.families.len().max(1));
        for a in &acc {
            for b in &piece.families {
                let mut merged = a.clone();
                merged.pins.extend(b.pins.clone());
                merged.free.extend(b.free.iter().cloned());
                next.push(merged);
            }
        }
        acc = next;
    }
    acc
}

fn edge_components(g: &DashedGraph) -> Vec<Vec<QubitId>> {
    let mut adj: BTreeMap<QubitId, Vec<QubitId>> = BTreeMap::new();
    for pair in g.edges.keys() {
        adj.entry(pair.a).or_default().push(pair.b);
        adj.entry(pair.b).or_default().push(pair.a);
    }
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

fn restrict(g: &DashedGraph, vertices: &[QubitId]) -> DashedGraph {
    let set: BTreeSet<QubitId> = vertices.iter().cloned().collect();
    DashedGraph {
        vertices: set.clone(),
        edges: g
            .edges
            .iter()
            .filter(|(p, _)| set.contains(&p.a) && set.contains(&p.b))
            .map(|(p, v)| (*p, v.clone()))
            .collect(),
        units: g
            .units
            .iter()
            .filter(|(q, _)| set.contains(q))
            .map(|(q, u)| (*q, u.clone()))
            .collect(),
        conflict: false,
    }
}
