//! Command-line front end: solving, checking, generating, and inspecting
//! instances, with exit codes suitable for scripting.
//!
//! Exit codes: 0 satisfiable / pass, 1 frustrated / check failure, 2 usage or
//! parse error, 3 resource cap exceeded.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::graph::{InteractionGraph, SimplifyOutcome};
use crate::instance::{self, Instance};
use crate::numerics::{cr, Tolerance};
use crate::oracle;
use crate::pipeline::{self, SolveMode};
use crate::ttn::{self, Verdict};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Parser)]
#[command(
    name = "q2sat",
    about = "Ground-space solver for two-body frustration-free qubit Hamiltonians",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve an instance: verdict, dimension, and optionally the basis.
    Solve(SolveArgs),
    /// Solve and compare against the brute-force oracle.
    Check(CheckArgs),
    /// Generate a built-in instance family.
    Gen(GenArgs),
    /// Simplify the interaction graph, dumping before/after snapshots.
    Slide(SlideArgs),
}

#[derive(Args)]
struct TolArgs {
    /// Relative singular-value cutoff for rank decisions.
    #[arg(long, default_value_t = 1e-9)]
    eps_rank: f64,
    /// Span-distance cutoff.
    #[arg(long, default_value_t = 1e-7)]
    eps_span: f64,
    /// Constraint-residual cutoff.
    #[arg(long, default_value_t = 1e-8)]
    eps_residual: f64,
}

impl TolArgs {
    fn tolerance(&self) -> Result<Tolerance> {
        Tolerance::new(self.eps_rank, self.eps_span, self.eps_residual)
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Instance file (JSON).
    file: PathBuf,
    /// Count the exact dimension (certificate mode).
    #[arg(long, conflicts_with = "basis")]
    count: bool,
    /// Emit the full product-span basis.
    #[arg(long)]
    basis: bool,
    /// Print dense basis state amplitudes (requires --basis).
    #[arg(long, requires = "basis")]
    materialize: bool,
    /// Write the ground-space description JSON here.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Maximum dimension materialized in basis mode.
    #[arg(long, default_value_t = SolveMode::DEFAULT_BASIS_CAP)]
    basis_cap: u64,
    /// Dense materialization qubit cap.
    #[arg(long, default_value_t = ttn::DEFAULT_MATERIALIZE_CAP)]
    materialize_cap: usize,
    #[command(flatten)]
    tol: TolArgs,
}

#[derive(Args)]
struct CheckArgs {
    /// Instance file (JSON).
    file: PathBuf,
    /// Override the span and residual tolerances at once.
    #[arg(long)]
    tol: Option<f64>,
    /// Corrupt the first basis state before checking (negative control).
    #[arg(long)]
    corrupt: bool,
    /// Oracle qubit cap.
    #[arg(long, default_value_t = oracle::DEFAULT_ORACLE_CAP)]
    cap: usize,
    /// Maximum dimension materialized in basis mode.
    #[arg(long, default_value_t = SolveMode::DEFAULT_BASIS_CAP)]
    basis_cap: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Family {
    Chain,
    Loop,
    Quasiloop,
    Star,
    Dressed,
    RandomProduct,
    RandomEntangled,
    Cnf,
}

#[derive(Args)]
struct GenArgs {
    /// Instance family.
    family: Family,
    /// Qubit count for chain/loop/quasiloop.
    #[arg(short, long)]
    k: Option<usize>,
    /// Qubit count for star/dressed/random families and cnf.
    #[arg(short, long)]
    n: Option<usize>,
    /// RNG seed for randomized families.
    #[arg(short, long, default_value_t = 0)]
    seed: u64,
    /// Edge count for random-product.
    #[arg(long)]
    edges: Option<usize>,
    /// Block count for random-entangled.
    #[arg(long)]
    blocks: Option<usize>,
    /// Clause count for random cnf.
    #[arg(long)]
    clauses: Option<usize>,
    /// DIMACS 2-CNF input file for the cnf family.
    #[arg(long)]
    file: Option<PathBuf>,
    /// Output instance file.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct SlideArgs {
    /// Instance file (JSON).
    file: PathBuf,
    /// Prefix for the emitted files: PREFIX_before.json, PREFIX_before.dot,
    /// PREFIX_after.json, PREFIX_after.dot.
    #[arg(long)]
    out_prefix: String,
    #[command(flatten)]
    tol: TolArgs,
}

/// Parse arguments and run; returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.cmd {
        Cmd::Solve(args) => cmd_solve(&args),
        Cmd::Check(args) => cmd_check(&args),
        Cmd::Gen(args) => cmd_gen(&args),
        Cmd::Slide(args) => cmd_slide(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::ResourceCap { .. } | Error::BasisCapExceeded { .. } => EXIT_RESOURCE,
        _ => EXIT_USAGE,
    }
}

fn cmd_solve(args: &SolveArgs) -> Result<i32> {
    let tol = args.tol.tolerance()?;
    let inst = instance::read_instance(&args.file)?;
    let mode = if args.basis {
        SolveMode::Basis {
            cap: args.basis_cap,
        }
    } else if args.count {
        SolveMode::Count
    } else {
        SolveMode::Decide
    };
    let desc = pipeline::solve_with(&inst, mode, &tol)?;
    let verdict = match desc.verdict {
        Verdict::Satisfiable => "SATISFIABLE",
        Verdict::Frustrated => "FRUSTRATED",
    };
    println!("{verdict} dim={}", desc.dimension);
    if args.materialize && desc.leaf_basis.is_some() {
        let states = ttn::materialize(&desc, args.materialize_cap)?;
        for (i, state) in states.iter().enumerate() {
            let amps: Vec<String> = state
                .iter()
                .map(|z| format!("{:+.6}{:+.6}i", z.re, z.im))
                .collect();
            println!("state {i}: [{}]", amps.join(", "));
        }
    }
    if let Some(out) = &args.output {
        std::fs::write(out, ttn::to_json(&desc)?)?;
    }
    Ok(match desc.verdict {
        Verdict::Satisfiable => EXIT_OK,
        Verdict::Frustrated => EXIT_FAIL,
    })
}

fn cmd_check(args: &CheckArgs) -> Result<i32> {
    let mut tol = Tolerance::default();
    if let Some(t) = args.tol {
        tol = Tolerance::new(tol.eps_rank, t, t)?;
    }
    let inst = instance::read_instance(&args.file)?;
    let mut desc = pipeline::solve_with(
        &inst,
        SolveMode::Basis {
            cap: args.basis_cap,
        },
        &tol,
    )?;
    if args.corrupt {
        if let Some(basis) = desc.leaf_basis.as_mut() {
            if let Some(state) = basis.first_mut() {
                if let Some((_, factor)) = state.factors.iter_mut().next() {
                    // rotate the first factor off its ray
                    let perp = crate::numerics::perp2(factor);
                    *factor = (factor.clone() * cr(0.9) + perp * cr(0.4358898943540673))
                        .normalize();
                }
            }
        }
    }
    let report = oracle::check_solution(&inst, &desc, &tol, args.cap)?;
    println!(
        "dims: solver {} vs oracle {} -> {}",
        report.solver_dim,
        report.oracle_dim,
        if report.dims_match { "match" } else { "MISMATCH" }
    );
    println!(
        "span distance: {:.3e} (cutoff {:.1e})",
        report.span_dist, report.eps_span
    );
    println!(
        "max residual:  {:.3e} (cutoff {:.1e})",
        report.max_residual, report.eps_residual
    );
    for (label, resid) in &report.residuals {
        println!("  constraint {label}: residual {resid:.3e}");
    }
    if report.pass() {
        println!("PASS");
        Ok(EXIT_OK)
    } else {
        println!("FAIL");
        Ok(EXIT_FAIL)
    }
}

fn require(opt: Option<usize>, what: &str, family: &str) -> Result<usize> {
    opt.ok_or_else(|| Error::invalid(format!("family {family} requires {what}")))
}

fn cmd_gen(args: &GenArgs) -> Result<i32> {
    let inst: Instance = match args.family {
        Family::Chain => instance::gen_chain(require(args.k, "--k", "chain")?)?,
        Family::Loop => instance::gen_loop(require(args.k, "--k", "loop")?)?,
        Family::Quasiloop => instance::gen_quasi_loop(require(args.k, "--k", "quasiloop")?)?,
        Family::Star => instance::gen_singlet_star(require(args.n, "--n", "star")?)?,
        Family::Dressed => {
            instance::gen_dressed_symmetric(require(args.n, "--n", "dressed")?, args.seed)?
        }
        Family::RandomProduct => {
            let n = require(args.n, "--n", "random-product")?;
            let edges = args.edges.unwrap_or(n);
            instance::random_product_instance(n, edges, args.seed)?
        }
        Family::RandomEntangled => {
            let n = require(args.n, "--n", "random-entangled")?;
            let blocks = args.blocks.unwrap_or(n);
            instance::random_mixed_instance(n, blocks, args.seed)?
        }
        Family::Cnf => {
            if let Some(path) = &args.file {
                let text = std::fs::read_to_string(path)?;
                let (clauses, n) = instance::parse_dimacs_2cnf(&text)?;
                instance::gen_from_2cnf(&clauses, n)?
            } else {
                let n = require(args.n, "--n (or --file)", "cnf")?;
                let m = require(args.clauses, "--clauses (or --file)", "cnf")?;
                let clauses = random_cnf(n, m, args.seed)?;
                instance::gen_from_2cnf(&clauses, n)?
            }
        }
    };
    instance::write_instance(&inst, &args.output)?;
    println!(
        "wrote {} ({} qubits, {} blocks)",
        args.output.display(),
        inst.n,
        inst.blocks.len()
    );
    Ok(EXIT_OK)
}

/// Seeded random 2-CNF with clauses over distinct variable pairs.
pub fn random_cnf(n: usize, clauses: usize, seed: u64) -> Result<Vec<(instance::Lit, instance::Lit)>> {
    use rand::{Rng, SeedableRng};
    if n < 2 {
        return Err(Error::invalid("random cnf needs at least 2 variables"));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(clauses);
    for _ in 0..clauses {
        let a = rng.gen_range(0..n);
        let b = loop {
            let b = rng.gen_range(0..n);
            if b != a {
                break b;
            }
        };
        let la = instance::Lit {
            var: a,
            negated: rng.gen(),
        };
        let lb = instance::Lit {
            var: b,
            negated: rng.gen(),
        };
        out.push((la, lb));
    }
    Ok(out)
}

fn cmd_slide(args: &SlideArgs) -> Result<i32> {
    let tol = args.tol.tolerance()?;
    let mut inst = instance::read_instance(&args.file)?;
    // the graph view needs a homogeneous instance
    match crate::reduction::reduce_to_homogeneous(&mut inst, &tol)? {
        crate::reduction::Reduce::Frustrated(_) => {
            println!("instance is frustrated before graph simplification");
            return Ok(EXIT_FAIL);
        }
        crate::reduction::Reduce::Homogeneous(events) => {
            if !events.is_empty() {
                println!("applied {} reduction events first", events.len());
            }
        }
    }
    let g = InteractionGraph::from_instance(&inst)?;
    let prefix = &args.out_prefix;
    std::fs::write(
        format!("{prefix}_before.json"),
        instance_json_lenient(&g.to_instance())?,
    )?;
    std::fs::write(format!("{prefix}_before.dot"), g.to_dot(&tol))?;
    match crate::graph::simplify(g, &tol)? {
        SimplifyOutcome::Simplified(s) => {
            let mut after = InteractionGraph {
                n: s.n,
                vertices: s.vertices.clone(),
                edges: Default::default(),
            };
            for (pair, (alpha, beta)) in &s.dashed {
                after
                    .edges
                    .insert(*pair, crate::numerics::kron_vec(alpha, beta));
            }
            for tail in &s.tails {
                for (w, phi) in tail.path.windows(2).zip(&tail.solid) {
                    let (pair, v) = crate::graph::store_oriented(w[0], w[1], phi);
                    after.edges.insert(pair, v);
                }
            }
            std::fs::write(
                format!("{prefix}_after.json"),
                instance_json_lenient(&after.to_instance())?,
            )?;
            std::fs::write(format!("{prefix}_after.dot"), after.to_dot(&tol))?;
            println!(
                "simplified: {} backbone vertices, {} dashed edges, {} tails",
                s.backbone.len(),
                s.dashed.len(),
                s.tails.len()
            );
            for w in &s.warnings {
                eprintln!("warning: {w}");
            }
            Ok(EXIT_OK)
        }
        SimplifyOutcome::Collision { graph, pair, extra } => {
            let mut merged = graph.to_instance();
            if !extra.is_empty() {
                merged.add_block_vectors(pair, &extra, &tol)?;
            }
            std::fs::write(
                format!("{prefix}_after.json"),
                instance_json_lenient(&merged)?,
            )?;
            std::fs::write(format!("{prefix}_after.dot"), graph.to_dot(&tol))?;
            println!("collision on pair {pair}; rank reduction must re-enter");
            Ok(EXIT_OK)
        }
    }
}

/// Serialize intermediate (possibly non-contiguous) instances by compacting
/// the active set onto fresh indices for inspection purposes.
fn instance_json_lenient(inst: &Instance) -> Result<String> {
    if inst.active.len() == inst.n && inst.active.iter().cloned().eq(0..inst.n) {
        return instance::to_json(inst);
    }
    let remap: std::collections::BTreeMap<usize, usize> = inst
        .active
        .iter()
        .enumerate()
        .map(|(i, q)| (*q, i))
        .collect();
    let mut compact = Instance::empty(inst.active.len());
    for (pair, block) in &inst.blocks {
        let np = crate::instance::Pair::new(remap[&pair.a], remap[&pair.b])?;
        compact.blocks.insert(
            np,
            crate::instance::PairBlock {
                vectors: block.vectors.clone(),
            },
        );
    }
    for (q, u) in &inst.units {
        compact.units.insert(remap[q], u.clone());
    }
    instance::to_json(&compact)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> i32 {
        run_from(args.iter().map(|s| s.to_string()))
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run(&["q2sat", "--help"]), EXIT_OK);
    }

    #[test]
    fn unknown_family_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("x.json");
        assert_eq!(
            run(&["q2sat", "gen", "nonsense", "-o", out.to_str().unwrap()]),
            EXIT_USAGE
        );
    }

    #[test]
    fn gen_solve_check_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("loop5.json");
        let p = path.to_str().unwrap();
        assert_eq!(run(&["q2sat", "gen", "loop", "--k", "5", "-o", p]), EXIT_OK);
        assert_eq!(run(&["q2sat", "solve", p, "--count"]), EXIT_OK);
        assert_eq!(run(&["q2sat", "check", p]), EXIT_OK);
    }

    #[test]
    fn solve_missing_file_is_usage_error() {
        assert_eq!(run(&["q2sat", "solve", "/nonexistent/file.json"]), EXIT_USAGE);
    }

    #[test]
    fn solve_frustrated_exits_one() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("unsat.json");
        let clauses = vec![
            (instance::Lit::pos(0), instance::Lit::pos(1)),
            (instance::Lit::neg(0), instance::Lit::pos(1)),
            (instance::Lit::pos(0), instance::Lit::neg(1)),
            (instance::Lit::neg(0), instance::Lit::neg(1)),
        ];
        let inst = instance::gen_from_2cnf(&clauses, 2).unwrap();
        instance::write_instance(&inst, &path).unwrap();
        assert_eq!(run(&["q2sat", "solve", path.to_str().unwrap()]), EXIT_FAIL);
    }

    #[test]
    fn check_corrupt_fails() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("star4.json");
        let p = path.to_str().unwrap();
        assert_eq!(run(&["q2sat", "gen", "star", "--n", "4", "-o", p]), EXIT_OK);
        assert_eq!(run(&["q2sat", "check", p, "--corrupt"]), EXIT_FAIL);
    }

    #[test]
    fn check_large_instance_hits_cap() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chain20.json");
        let p = path.to_str().unwrap();
        assert_eq!(run(&["q2sat", "gen", "chain", "--k", "20", "-o", p]), EXIT_OK);
        assert_eq!(run(&["q2sat", "check", p]), EXIT_RESOURCE);
    }

    #[test]
    fn solve_conflicting_modes_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        let p = path.to_str().unwrap();
        assert_eq!(run(&["q2sat", "gen", "chain", "--k", "3", "-o", p]), EXIT_OK);
        assert_eq!(run(&["q2sat", "solve", p, "--count", "--basis"]), EXIT_USAGE);
    }

    #[test]
    fn slide_emits_dumps() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("star5.json");
        let p = path.to_str().unwrap();
        assert_eq!(run(&["q2sat", "gen", "star", "--n", "5", "-o", p]), EXIT_OK);
        let prefix = dir.path().join("dump");
        let prefix = prefix.to_str().unwrap();
        assert_eq!(run(&["q2sat", "slide", p, "--out-prefix", prefix]), EXIT_OK);
        for suffix in ["_before.json", "_before.dot", "_after.json", "_after.dot"] {
            assert!(
                std::path::Path::new(&format!("{prefix}{suffix}")).exists(),
                "missing {suffix}"
            );
        }
    }

    #[test]
    fn gen_dressed_solves_to_n_plus_1() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dressed.json");
        let p = path.to_str().unwrap();
        assert_eq!(
            run(&["q2sat", "gen", "dressed", "--n", "4", "--seed", "7", "-o", p]),
            EXIT_OK
        );
        let inst = instance::read_instance(p).unwrap();
        let desc = pipeline::solve(&inst, SolveMode::Count).unwrap();
        assert_eq!(desc.dimension, num_bigint::BigUint::from(5u32));
    }

    #[test]
    fn gen_cnf_from_dimacs() {
        let dir = tempfile::tempdir().unwrap();
        let cnf = dir.path().join("f.cnf");
        std::fs::write(&cnf, "p cnf 3 2\n1 -2 0\n2 3 0\n").unwrap();
        let out = dir.path().join("cnf.json");
        assert_eq!(
            run(&[
                "q2sat",
                "gen",
                "cnf",
                "--file",
                cnf.to_str().unwrap(),
                "-o",
                out.to_str().unwrap()
            ]),
            EXIT_OK
        );
        let inst = instance::read_instance(&out).unwrap();
        assert_eq!(inst.n, 3);
        assert_eq!(inst.blocks.len(), 2);
    }
}
