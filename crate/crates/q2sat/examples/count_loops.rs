//! Exact ground-space counting on alternating and quasi-alternating loops.
//!
//! Alternating loops always have a two-dimensional ground space; a
//! quasi-alternating loop forces its special vertex and leaves a chain, so
//! its dimension grows linearly.
//!
//! ```bash
//! cargo run --example count_loops
//! ```

use q2sat::instance::{gen_loop, gen_quasi_loop};
use q2sat::{solve, SolveMode};

fn main() -> q2sat::Result<()> {
    println!("{:<22} {:>10}", "instance", "dimension");
    for k in 3..=12 {
        let desc = solve(&gen_loop(k)?, SolveMode::Count)?;
        desc.certificate.validate()?;
        println!("{:<22} {:>10}", format!("loop({k})"), desc.dimension);
    }
    for k in 3..=12 {
        let desc = solve(&gen_quasi_loop(k)?, SolveMode::Count)?;
        desc.certificate.validate()?;
        println!("{:<22} {:>10}", format!("quasi_loop({k})"), desc.dimension);
    }
    Ok(())
}
