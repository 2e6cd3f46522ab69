//! Rank case analysis: eliminate rank-3 blocks by fixing two-qubit states,
//! rank-2 blocks by isometry merging, and propagate single-qubit constraints
//! to fixpoint, recording every rewrite in a log that later becomes the
//! output tensor forest.

use crate::error::{Error, Result};
use crate::instance::{Instance, Pair, QubitId};
use crate::numerics::{self, bras_from_kets, perp2, CMat, CVec, C64, Tolerance};

/// Encoding of two qubits into one fresh logical qubit: the matrix columns
/// `|ψ₀⟩, |ψ₁⟩` span the kernel of the eliminated rank-2 block.
#[derive(Debug, Clone)]
pub struct IsometryNode {
    pub parent: QubitId,
    pub children: (QubitId, QubitId),
    pub matrix: CMat,
}

/// One or two qubits frozen into a fixed state and removed from the problem.
#[derive(Debug, Clone)]
pub struct FixedFactor {
    pub qubits: Vec<QubitId>,
    pub state: CVec,
}

/// A single rewrite step of the reduction pipeline.
#[derive(Debug, Clone)]
pub enum RewriteEvent {
    Isometry(IsometryNode),
    Fixed(FixedFactor),
}

pub type ReductionLog = Vec<RewriteEvent>;

/// Instance snapshots around one rewrite, for oracle soundness checks.
#[derive(Debug, Clone)]
pub struct ReductionTrace {
    pub pre: Instance,
    pub post: Instance,
    pub event: RewriteEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Contraction {
    pub frustrated: bool,
}

/// Derived unit constraint on the spectator of a pair constraint when the
/// other endpoint is pinned: `u[j] = Σ_i v[idx]·conj(s[i])` with `v` oriented
/// so the pinned qubit is the left factor.
fn contract_vector_single(v_oriented: &CVec, s: &CVec) -> CVec {
    let mut u = CVec::zeros(2);
    for j in 0..2 {
        for i in 0..2 {
            u[j] += v_oriented[2 * i + j] * s[i].conj();
        }
    }
    u
}

/// Contract every block and unit touching the factor's qubits, deriving unit
/// constraints on the untouched endpoints. Returns a frustration flag when a
/// constraint is exactly violated by the fixed state.
pub fn contract_fixed(inst: &mut Instance, factor: &FixedFactor, tol: &Tolerance) -> Result<Contraction> {
    for q in &factor.qubits {
        if !inst.active.contains(q) {
            return Err(Error::precondition(format!(
                "contract_fixed: qubit {q} is not active"
            )));
        }
    }
    let mut frustrated = false;
    match factor.qubits.as_slice() {
        [q] => {
            let s = &factor.state;
            debug_assert_eq!(s.len(), 2);
            inst.active.remove(q);
            if let Some(u) = inst.units.remove(q) {
                if u.dotc(s).norm() > tol.eps_rank {
                    frustrated = true;
                }
            }
            for pair in inst.pairs_touching(*q) {
                let block = inst.blocks.remove(&pair).unwrap();
                let other = pair.other(*q);
                for v in &block.vectors {
                    let v_or = crate::graph::oriented(pair, v, *q);
                    let u = contract_vector_single(&v_or, s);
                    if u.norm() > tol.eps_rank {
                        inst.add_unit(other, u, tol);
                    }
                }
            }
        }
        [a, b] => {
            let chi = &factor.state;
            debug_assert_eq!(chi.len(), 4);
            debug_assert!(a < b);
            inst.active.remove(a);
            inst.active.remove(b);
            // units on the fixed pair must annihilate the state exactly
            for (q, left) in [(a, true), (b, false)] {
                if let Some(u) = inst.units.remove(q) {
                    let mut resid = 0.0;
                    for h in 0..2 {
                        let mut amp = C64::new(0.0, 0.0);
                        for g in 0..2 {
                            let idx = if left { 2 * g + h } else { 2 * h + g };
                            amp += u[g].conj() * chi[idx];
                        }
                        resid += amp.norm_sqr();
                    }
                    if resid.sqrt() > tol.eps_rank {
                        frustrated = true;
                    }
                }
            }
            for pair in inst
                .blocks
                .keys()
                .filter(|p| p.contains(*a) || p.contains(*b))
                .cloned()
                .collect::<Vec<_>>()
            {
                let block = inst.blocks.remove(&pair).unwrap();
                if pair == (Pair { a: *a, b: *b }) {
                    // a parallel block on the fixed pair itself
                    for v in &block.vectors {
                        if v.dotc(chi).norm() > tol.eps_rank {
                            frustrated = true;
                        }
                    }
                    continue;
                }
                let shared = if pair.contains(*a) { *a } else { *b };
                let shared_is_a = shared == *a;
                let spectator = pair.other(shared);
                for v in &block.vectors {
                    let v_or = crate::graph::oriented(pair, v, shared);
                    // expand over the other fixed qubit's basis
                    for h in 0..2 {
                        let mut u = CVec::zeros(2);
                        for j in 0..2 {
                            for g in 0..2 {
                                let chi_idx = if shared_is_a { 2 * g + h } else { 2 * h + g };
                                u[j] += v_or[2 * g + j] * chi[chi_idx].conj();
                            }
                        }
                        if u.norm() > tol.eps_rank {
                            inst.add_unit(spectator, u, tol);
                        }
                    }
                }
            }
        }
        _ => {
            return Err(Error::invalid(
                "fixed factors cover exactly one or two qubits",
            ))
        }
    }
    if !inst.unit_conflicts.is_empty() {
        frustrated = true;
    }
    Ok(Contraction { frustrated })
}

/// Result of resolving all pending unit constraints.
#[derive(Debug)]
pub enum Propagation {
    Done(Vec<FixedFactor>),
    Frustrated,
}

/// Fixpoint loop: each unit `|γ⟩` on `q` fixes `q` to `|γ^⊥⟩` and contracts.
/// Two linearly independent units on one qubit mean frustration.
pub fn propagate_units(inst: &mut Instance, tol: &Tolerance) -> Result<Propagation> {
    propagate_units_traced(inst, tol, &mut None)
}

fn propagate_units_traced(
    inst: &mut Instance,
    tol: &Tolerance,
    trace: &mut Option<&mut Vec<ReductionTrace>>,
) -> Result<Propagation> {
    let mut fixed = Vec::new();
    loop {
        if !inst.unit_conflicts.is_empty() {
            return Ok(Propagation::Frustrated);
        }
        let Some((&q, u)) = inst.units.iter().next() else {
            return Ok(Propagation::Done(fixed));
        };
        let u = u.clone();
        inst.units.remove(&q);
        let factor = FixedFactor {
            qubits: vec![q],
            state: perp2(&u),
        };
        let pre = trace.as_ref().map(|_| inst.clone());
        let contraction = contract_fixed(inst, &factor, tol)?;
        if let (Some(sink), Some(pre)) = (trace.as_mut(), pre) {
            sink.push(ReductionTrace {
                pre,
                post: inst.clone(),
                event: RewriteEvent::Fixed(factor.clone()),
            });
        }
        fixed.push(factor);
        if contraction.frustrated {
            return Ok(Propagation::Frustrated);
        }
    }
}

/// Fix the unique two-qubit kernel state of a rank-3 block and contract.
pub fn rank3_fix(
    inst: &mut Instance,
    pair: Pair,
    tol: &Tolerance,
) -> Result<(FixedFactor, Contraction)> {
    let block = inst
        .blocks
        .get(&pair)
        .ok_or_else(|| Error::precondition(format!("no block on {pair}")))?;
    if block.rank() != 3 {
        return Err(Error::precondition(format!(
            "rank3_fix needs a rank-3 block on {pair}, found rank {}",
            block.rank()
        )));
    }
    let kernel = numerics::nullspace(&bras_from_kets(&block.vectors), tol)?;
    if kernel.len() != 1 {
        return Err(Error::internal(format!(
            "rank-3 block on {pair} has kernel dimension {}",
            kernel.len()
        )));
    }
    inst.blocks.remove(&pair);
    let factor = FixedFactor {
        qubits: vec![pair.a, pair.b],
        state: kernel.into_iter().next().unwrap(),
    };
    let contraction = contract_fixed(inst, &factor, tol)?;
    Ok((factor, contraction))
}

/// Derived unit constraints on the fresh qubit `d` from a unit on one of the
/// merged qubits (bra through the isometry, expanded over the spectator).
fn unit_through_isometry(u: &CVec, psi: [&CVec; 2], on_left: bool) -> Vec<CVec> {
    let mut out = Vec::new();
    for h in 0..2 {
        let mut w = CVec::zeros(2);
        for (t, psi_t) in psi.iter().enumerate() {
            for g in 0..2 {
                let idx = if on_left { 2 * g + h } else { 2 * h + g };
                w[t] += u[g] * psi_t[idx].conj();
            }
        }
        if w.norm() > 1e-13 {
            out.push(w);
        }
    }
    out
}

/// Encode the two-dimensional kernel of a rank-2 block into one fresh logical
/// qubit, rewriting every constraint that touched the merged pair.
pub fn rank2_merge(inst: &mut Instance, pair: Pair, tol: &Tolerance) -> Result<IsometryNode> {
    let block = inst
        .blocks
        .get(&pair)
        .ok_or_else(|| Error::precondition(format!("no block on {pair}")))?;
    if block.rank() != 2 {
        return Err(Error::precondition(format!(
            "rank2_merge needs a rank-2 block on {pair}, found rank {}",
            block.rank()
        )));
    }
    let kernel = numerics::nullspace(&bras_from_kets(&block.vectors), tol)?;
    if kernel.len() != 2 {
        return Err(Error::internal(format!(
            "rank-2 block on {pair} has kernel dimension {}",
            kernel.len()
        )));
    }
    let (psi0, psi1) = (kernel[0].clone(), kernel[1].clone());
    let (a, b) = (pair.a, pair.b);
    let d = inst.n;
    inst.n += 1;
    inst.blocks.remove(&pair);
    inst.active.remove(&a);
    inst.active.remove(&b);
    inst.active.insert(d);

    // units on the merged qubits become units on d
    for (q, on_left) in [(a, true), (b, false)] {
        if let Some(u) = inst.units.remove(&q) {
            for w in unit_through_isometry(&u, [&psi0, &psi1], on_left) {
                if w.norm() > tol.eps_rank {
                    inst.add_unit(d, w, tol);
                }
            }
        }
    }

    // blocks on (a,c) or (b,c) become blocks on (c,d)
    for old_pair in inst
        .blocks
        .keys()
        .filter(|p| p.contains(a) || p.contains(b))
        .cloned()
        .collect::<Vec<_>>()
    {
        let old_block = inst.blocks.remove(&old_pair).unwrap();
        let merged = if old_pair.contains(a) { a } else { b };
        let merged_is_a = merged == a;
        let c = old_pair.other(merged);
        let target = Pair::new(c, d)?;
        debug_assert!(c < d);
        let mut derived = Vec::new();
        for v in &old_block.vectors {
            let v_or = crate::graph::oriented(old_pair, v, merged);
            // expand the condition ⟨v|(U ⊗ I_c) over the other merged qubit
            for h in 0..2 {
                let mut w = CVec::zeros(4);
                for t in 0..2 {
                    let psi_t = if t == 0 { &psi0 } else { &psi1 };
                    for j in 0..2 {
                        let mut acc = C64::new(0.0, 0.0);
                        for g in 0..2 {
                            let psi_idx = if merged_is_a { 2 * g + h } else { 2 * h + g };
                            acc += v_or[2 * g + j] * psi_t[psi_idx].conj();
                        }
                        // c is the left factor of (c, d)
                        w[2 * j + t] += acc;
                    }
                }
                if w.norm() > tol.eps_rank {
                    derived.push(w);
                }
            }
        }
        if !derived.is_empty() {
            inst.add_block_vectors(target, &derived, tol)?;
        }
    }

    let mut matrix = CMat::zeros(4, 2);
    matrix.column_mut(0).copy_from(&psi0);
    matrix.column_mut(1).copy_from(&psi1);
    Ok(IsometryNode {
        parent: d,
        children: (a, b),
        matrix,
    })
}

/// Outcome of the reduction driver.
#[derive(Debug)]
pub enum Reduce {
    /// All remaining blocks have rank 1 and no units are pending.
    Homogeneous(ReductionLog),
    Frustrated(ReductionLog),
}

impl Reduce {
    pub fn log(&self) -> &ReductionLog {
        match self {
            Reduce::Homogeneous(log) | Reduce::Frustrated(log) => log,
        }
    }
}

/// Driver loop, in priority order: frustration checks, unit propagation,
/// rank-3 fixing, rank-2 merging, until the instance is homogeneous.
pub fn reduce_to_homogeneous(inst: &mut Instance, tol: &Tolerance) -> Result<Reduce> {
    reduce_traced_inner(inst, tol, &mut None)
}

/// Like [`reduce_to_homogeneous`], recording pre/post snapshots per event.
pub fn reduce_to_homogeneous_traced(
    inst: &mut Instance,
    tol: &Tolerance,
) -> Result<(Reduce, Vec<ReductionTrace>)> {
    let mut trace = Vec::new();
    let mut sink = Some(&mut trace);
    let outcome = reduce_traced_inner(inst, tol, &mut sink)?;
    Ok((outcome, trace))
}

fn reduce_traced_inner(
    inst: &mut Instance,
    tol: &Tolerance,
    trace: &mut Option<&mut Vec<ReductionTrace>>,
) -> Result<Reduce> {
    let mut log = ReductionLog::new();
    let budget = 2 * inst.n + inst.blocks.len() + 4;
    for _ in 0..budget {
        if !inst.unit_conflicts.is_empty() {
            return Ok(Reduce::Frustrated(log));
        }
        if inst.blocks.values().any(|b| b.rank() >= 4) {
            return Ok(Reduce::Frustrated(log));
        }
        if !inst.units.is_empty() {
            let active_before = inst.active.len();
            match propagate_units_traced(inst, tol, trace)? {
                Propagation::Done(fixed) => {
                    log.extend(fixed.into_iter().map(RewriteEvent::Fixed));
                }
                Propagation::Frustrated => return Ok(Reduce::Frustrated(log)),
            }
            debug_assert!(inst.active.len() < active_before, "unit pass made no progress");
            continue;
        }
        if let Some(pair) = inst
            .blocks
            .iter()
            .find(|(_, b)| b.rank() == 3)
            .map(|(p, _)| *p)
        {
            let pre = trace.as_ref().map(|_| inst.clone());
            let (factor, contraction) = rank3_fix(inst, pair, tol)?;
            if let (Some(sink), Some(pre)) = (trace.as_mut(), pre) {
                sink.push(ReductionTrace {
                    pre,
                    post: inst.clone(),
                    event: RewriteEvent::Fixed(factor.clone()),
                });
            }
            log.push(RewriteEvent::Fixed(factor));
            if contraction.frustrated {
                return Ok(Reduce::Frustrated(log));
            }
            continue;
        }
        if let Some(pair) = inst
            .blocks
            .iter()
            .find(|(_, b)| b.rank() == 2)
            .map(|(p, _)| *p)
        {
            let pre = trace.as_ref().map(|_| inst.clone());
            let node = rank2_merge(inst, pair, tol)?;
            if let (Some(sink), Some(pre)) = (trace.as_mut(), pre) {
                sink.push(ReductionTrace {
                    pre,
                    post: inst.clone(),
                    event: RewriteEvent::Isometry(node.clone()),
                });
            }
            log.push(RewriteEvent::Isometry(node));
            continue;
        }
        return Ok(Reduce::Homogeneous(log));
    }
    Err(Error::internal(
        "reduction driver exceeded its iteration budget without converging",
    ))
}
