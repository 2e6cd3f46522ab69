//! Top-level orchestrator: rank reduction, graph simplification (looping on
//! collisions), dashed solving, tail handling, and assembly of the final
//! ground-space description.

use num_bigint::BigUint;
use num_traits::Zero;

use crate::dashed::{self, BranchKind, BranchNode, DashedGraph};
use crate::error::{Error, Result};
use crate::graph::{self, InteractionGraph, LocalFrame, SimplifiedGraph, SimplifyOutcome, SlideTrace};
use crate::instance::Instance;
use crate::numerics::Tolerance;
use crate::reduction::{self, Reduce, ReductionLog, ReductionTrace};
use crate::tails;
use crate::ttn::{self, GroundSpaceDescription, TTNForest, Verdict};

/// What the solver is asked to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    /// Verdict only.
    Decide,
    /// Exact ground-space dimension plus the counting certificate.
    Count,
    /// Dimension plus the full product-span basis, capped.
    Basis { cap: u64 },
}

impl SolveMode {
    pub const DEFAULT_BASIS_CAP: u64 = 4096;

    pub fn basis() -> Self {
        SolveMode::Basis {
            cap: Self::DEFAULT_BASIS_CAP,
        }
    }
}

/// One recorded rewrite of a traced solve.
#[derive(Debug, Clone)]
pub enum TraceStep {
    Reduction(ReductionTrace),
    Slide(SlideTrace),
}

impl TraceStep {
    pub fn pre(&self) -> &Instance {
        match self {
            TraceStep::Reduction(t) => &t.pre,
            TraceStep::Slide(t) => &t.pre,
        }
    }

    pub fn post(&self) -> &Instance {
        match self {
            TraceStep::Reduction(t) => &t.post,
            TraceStep::Slide(t) => &t.post,
        }
    }
}

/// Solve with the default tolerance policy.
pub fn solve(inst: &Instance, mode: SolveMode) -> Result<GroundSpaceDescription> {
    solve_with(inst, mode, &Tolerance::default())
}

pub fn solve_with(
    inst: &Instance,
    mode: SolveMode,
    tol: &Tolerance,
) -> Result<GroundSpaceDescription> {
    solve_inner(inst, mode, tol, &mut None)
}

/// Like [`solve_with`], recording every individual rewrite (reduction events
/// and slides) with pre/post instance snapshots for oracle checks.
pub fn solve_traced(
    inst: &Instance,
    mode: SolveMode,
    tol: &Tolerance,
) -> Result<(GroundSpaceDescription, Vec<TraceStep>)> {
    let mut steps = Vec::new();
    let mut sink = Some(&mut steps);
    let desc = solve_inner(inst, mode, tol, &mut sink)?;
    Ok((desc, steps))
}

/// Satisfiability verdict.
pub fn decide(inst: &Instance) -> Result<Verdict> {
    Ok(solve(inst, SolveMode::Decide)?.verdict)
}

fn solve_inner(
    input: &Instance,
    mode: SolveMode,
    tol: &Tolerance,
    trace: &mut Option<&mut Vec<TraceStep>>,
) -> Result<GroundSpaceDescription> {
    let mut inst = input.clone();
    let mut log = ReductionLog::new();
    let mut last_active = inst.active.len() + 1;

    let simplified: SimplifiedGraph = loop {
        match run_reduce(&mut inst, tol, trace)? {
            Reduce::Homogeneous(events) => log.extend(events),
            Reduce::Frustrated(events) => {
                log.extend(events);
                return Ok(ttn::frustrated_description(
                    input.n,
                    log,
                    inst.sorted_active(),
                ));
            }
        }
        // each collision re-entry merges at least one pair during the next
        // reduction, so the post-reduction active count strictly decreases
        if inst.active.len() >= last_active {
            return Err(Error::internal("pipeline iteration made no progress"));
        }
        last_active = inst.active.len();
        let g = InteractionGraph::from_instance(&inst)?;
        match run_simplify(g, tol, trace)? {
            SimplifyOutcome::Simplified(s) => break s,
            SimplifyOutcome::Collision { graph, pair, extra } => {
                inst = graph.to_instance();
                if !extra.is_empty() {
                    inst.add_block_vectors(pair, &extra, tol)?;
                }
            }
        }
    };

    match mode {
        SolveMode::Decide | SolveMode::Count => {
            let chain_graph = tails::tail_to_chain(&simplified, tol)?;
            let sol = dashed::solve_dashed(&chain_graph, false, u64::MAX, tol)?;
            Ok(assemble(
                input.n,
                log,
                inst.sorted_active(),
                sol.dim,
                sol.frames,
                None,
                sol.certificate,
            ))
        }
        SolveMode::Basis { cap } => {
            let mut backbone = DashedGraph::new(simplified.backbone.iter().cloned());
            for (pair, (a, b)) in &simplified.dashed {
                backbone.add_edge(*pair, a.clone(), b.clone(), tol)?;
            }
            let sol = dashed::solve_dashed(&backbone, true, cap, tol)?;
            let mut families = sol.families.expect("basis mode returns families");
            let mut certificate = sol.certificate;
            let mut frames = sol.frames;
            for tail in &simplified.tails {
                let dec = tails::decompose_at_vertex(&families, tail.attachment, tol)?;
                let s0_dim = dec.s0_dim();
                families = tails::extend_with_tail(dec, tail, tol)?;
                let dim = tails::families_dim(&families);
                if dim > BigUint::from(cap) {
                    return Err(Error::BasisCapExceeded {
                        dimension: dim,
                        cap,
                    });
                }
                certificate = BranchNode {
                    kind: BranchKind::TailExtension {
                        attachment: tail.attachment,
                        tail_qubits: tail.path.len(),
                        s0_dim,
                    },
                    dim,
                    children: vec![certificate],
                };
                for (q, f) in &tail.frames {
                    if *q != tail.attachment {
                        frames.set(*q, f.clone());
                    }
                }
            }
            let dim = tails::families_dim(&families);
            let basis = if dim.is_zero() {
                None
            } else {
                Some(dashed::expand_families(&families, &frames))
            };
            Ok(assemble(
                input.n,
                log,
                inst.sorted_active(),
                dim,
                frames,
                basis,
                certificate,
            ))
        }
    }
}

fn run_reduce(
    inst: &mut Instance,
    tol: &Tolerance,
    trace: &mut Option<&mut Vec<TraceStep>>,
) -> Result<Reduce> {
    if trace.is_some() {
        let (outcome, steps) = reduction::reduce_to_homogeneous_traced(inst, tol)?;
        if let Some(sink) = trace.as_mut() {
            sink.extend(steps.into_iter().map(TraceStep::Reduction));
        }
        Ok(outcome)
    } else {
        reduction::reduce_to_homogeneous(inst, tol)
    }
}

fn run_simplify(
    g: InteractionGraph,
    tol: &Tolerance,
    trace: &mut Option<&mut Vec<TraceStep>>,
) -> Result<SimplifyOutcome> {
    if trace.is_some() {
        let (outcome, steps) = graph::simplify_traced(g, tol)?;
        if let Some(sink) = trace.as_mut() {
            sink.extend(steps.into_iter().map(TraceStep::Slide));
        }
        Ok(outcome)
    } else {
        graph::simplify(g, tol)
    }
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    n: usize,
    events: ReductionLog,
    leaf_qubits: Vec<usize>,
    dim: BigUint,
    frames: LocalFrame,
    leaf_basis: Option<Vec<dashed::ProductBasisState>>,
    certificate: BranchNode,
) -> GroundSpaceDescription {
    let verdict = if dim.is_zero() {
        Verdict::Frustrated
    } else {
        Verdict::Satisfiable
    };
    GroundSpaceDescription {
        verdict,
        dimension: dim,
        n,
        forest: TTNForest {
            events,
            frames,
            leaf_qubits,
        },
        leaf_basis,
        certificate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{
        gen_chain, gen_dressed_symmetric, gen_from_2cnf, gen_loop, gen_quasi_loop,
        gen_singlet_star, normalize, random_mixed_instance, singlet, Lit,
    };
    use crate::numerics::{self, ket};
    use crate::oracle;
    use num_traits::One;

    fn dim_of(desc: &GroundSpaceDescription) -> u64 {
        use num_traits::ToPrimitive;
        desc.dimension.to_u64().expect("small dimension")
    }

    #[test]
    fn chain_count() {
        for k in [2usize, 3, 6, 9] {
            let desc = solve(&gen_chain(k).unwrap(), SolveMode::Count).unwrap();
            assert_eq!(dim_of(&desc), k as u64 + 1, "chain {k}");
            desc.certificate.validate().unwrap();
        }
    }

    #[test]
    fn loop_and_quasi_loop_count() {
        for k in [3usize, 4, 7] {
            let desc = solve(&gen_loop(k).unwrap(), SolveMode::Count).unwrap();
            assert_eq!(dim_of(&desc), 2, "loop {k}");
            let desc = solve(&gen_quasi_loop(k).unwrap(), SolveMode::Count).unwrap();
            assert_eq!(dim_of(&desc), k as u64, "quasi-loop {k}");
        }
    }

    #[test]
    fn star_basis_matches_oracle() {
        for n in [3usize, 5] {
            let inst = gen_singlet_star(n).unwrap();
            let desc = solve(&inst, SolveMode::basis()).unwrap();
            assert_eq!(dim_of(&desc), n as u64 + 1);
            let report =
                oracle::check_solution(&inst, &desc, &Tolerance::default(), 12).unwrap();
            assert!(report.pass(), "star {n}: {report:?}");
        }
    }

    #[test]
    fn dressed_instances_have_degeneracy_n_plus_1() {
        for seed in 0..6 {
            let n = 4 + (seed as usize % 3);
            let inst = gen_dressed_symmetric(n, seed).unwrap();
            let desc = solve(&inst, SolveMode::Count).unwrap();
            assert_eq!(dim_of(&desc), n as u64 + 1, "seed {seed}");
        }
    }

    #[test]
    fn rank4_block_is_frustrated() {
        let tol = Tolerance::default();
        let raw: Vec<((usize, usize), crate::numerics::CVec)> = vec![
            ((0, 1), ket(&[0, 0])),
            ((0, 1), ket(&[0, 1])),
            ((0, 1), ket(&[1, 0])),
            ((0, 1), ket(&[1, 1])),
        ];
        let inst = normalize(3, &raw, &tol).unwrap();
        let desc = solve(&inst, SolveMode::Decide).unwrap();
        assert_eq!(desc.verdict, Verdict::Frustrated);
        assert!(desc.dimension.is_zero());
    }

    #[test]
    fn unsat_cnf_embedding_is_frustrated() {
        let clauses = vec![
            (Lit::pos(0), Lit::pos(1)),
            (Lit::neg(0), Lit::pos(1)),
            (Lit::pos(0), Lit::neg(1)),
            (Lit::neg(0), Lit::neg(1)),
        ];
        let inst = gen_from_2cnf(&clauses, 2).unwrap();
        assert_eq!(decide(&inst).unwrap(), Verdict::Frustrated);
    }

    #[test]
    fn mixed_instance_with_collision_path() {
        // solid edge plus two dashed edges forcing a collision and a merge
        let tol = Tolerance::default();
        let d23 = numerics::kron_vec(&ket(&[0]), &ket(&[0]));
        let d13 = numerics::kron_vec(&ket(&[0]), &ket(&[1]));
        let inst = normalize(
            4,
            &[((1, 2), singlet()), ((2, 3), d23), ((1, 3), d13)],
            &tol,
        )
        .unwrap();
        let oracle_dim = oracle::brute_kernel(&inst, 12).unwrap().dim;
        let desc = solve(&inst, SolveMode::basis()).unwrap();
        assert_eq!(dim_of(&desc), oracle_dim as u64);
        let report = oracle::check_solution(&inst, &desc, &tol, 12).unwrap();
        assert!(report.pass(), "{report:?}");
    }

    #[test]
    fn random_mixed_end_to_end() {
        let tol = Tolerance::default();
        for seed in 0..40 {
            let n = 4 + (seed as usize % 4);
            let inst = random_mixed_instance(n, n, 4000 + seed).unwrap();
            let oracle_dim = oracle::brute_kernel_dim(&inst, 12).unwrap();
            let desc = solve(&inst, SolveMode::Count).unwrap();
            assert_eq!(
                desc.dimension,
                BigUint::from(oracle_dim as u64),
                "seed {seed}"
            );
            desc.certificate.validate().unwrap();
            if oracle_dim > 0 && oracle_dim <= 64 {
                let desc = solve(&inst, SolveMode::basis()).unwrap();
                let report = oracle::check_solution(&inst, &desc, &tol, 12).unwrap();
                assert!(report.pass(), "seed {seed}: {report:?}");
            }
        }
    }

    #[test]
    fn traced_solve_preserves_kernels_per_event() {
        use crate::reduction::RewriteEvent;
        use crate::ttn::apply_event_to_states;
        let tol = Tolerance::default();
        for seed in [1u64, 7, 13] {
            let inst = random_mixed_instance(5, 5, 7000 + seed).unwrap();
            let (_, steps) = solve_traced(&inst, SolveMode::Count, &tol).unwrap();
            for (i, step) in steps.iter().enumerate() {
                let pre_kernel = oracle::brute_kernel(step.pre(), 12).unwrap();
                let post_kernel = oracle::brute_kernel(step.post(), 12).unwrap();
                let lifted = match step {
                    TraceStep::Slide(_) => post_kernel.basis.clone(),
                    TraceStep::Reduction(t) => {
                        if post_kernel.dim == 0 {
                            assert_eq!(pre_kernel.dim, 0, "step {i}");
                            continue;
                        }
                        let event = match &t.event {
                            RewriteEvent::Isometry(n) => RewriteEvent::Isometry(n.clone()),
                            RewriteEvent::Fixed(f) => RewriteEvent::Fixed(f.clone()),
                        };
                        let (states, order) = apply_event_to_states(
                            &post_kernel.basis,
                            &post_kernel.qubits,
                            &event,
                        )
                        .unwrap();
                        assert_eq!(order, pre_kernel.qubits, "step {i}");
                        states
                    }
                };
                assert_eq!(pre_kernel.dim, lifted.len(), "step {i} dims");
                if pre_kernel.dim > 0 {
                    let d = numerics::span_distance(&pre_kernel.basis, &lifted).unwrap();
                    assert!(d <= 1e-7, "seed {seed} step {i}: span distance {d}");
                }
            }
        }
    }

    #[test]
    fn determinism_byte_identical_output() {
        let inst = gen_dressed_symmetric(5, 3).unwrap();
        let a = ttn::to_json(&solve(&inst, SolveMode::basis()).unwrap()).unwrap();
        let b = ttn::to_json(&solve(&inst, SolveMode::basis()).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_instance_dimension_is_2_pow_n() {
        let inst = Instance::empty(3);
        let desc = solve(&inst, SolveMode::Count).unwrap();
        assert_eq!(dim_of(&desc), 8);
        let desc = solve(&inst, SolveMode::basis()).unwrap();
        assert_eq!(desc.leaf_basis.as_ref().unwrap().len(), 8);
    }

    #[test]
    fn scalar_instance() {
        let inst = Instance::empty(0);
        let desc = solve(&inst, SolveMode::Count).unwrap();
        assert_eq!(desc.dimension, BigUint::one());
    }

    #[test]
    fn basis_cap_carries_dimension() {
        let inst = Instance::empty(10);
        match solve(&inst, SolveMode::Basis { cap: 16 }) {
            Err(Error::BasisCapExceeded { dimension, cap }) => {
                assert_eq!(dimension, BigUint::from(1024u32));
                assert_eq!(cap, 16);
            }
            other => panic!("expected cap error, got {other:?}"),
        }
    }
}
