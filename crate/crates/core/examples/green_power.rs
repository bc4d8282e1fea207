//! Power minimisation with an optional sparsity term, solved by SCA and by
//! the trust-region method from the same zero-forcing start.
//!
//!     cargo run --release --example green_power [sparsity_weight]

use proj_l2o::baselines::{sca_solve, trust_region_solve, IterSolverConfig};
use proj_l2o::harness::gen_dataset;
use proj_l2o::problem::ProblemSpec;
use proj_l2o::projection::zf_init;

fn main() -> proj_l2o::Result<()> {
    let weight: f64 = std::env::args().nth(1).map_or(Ok(0.0), |a| a.parse()).unwrap_or(0.0);
    let spec = ProblemSpec::green_power(weight);
    let cfg = IterSolverConfig {
        max_outer: 300,
        tol: 1e-9,
        ..IterSolverConfig::default()
    };
    println!("sparsity weight {weight}");
    println!("{:>8} {:>12} {:>12} {:>12}", "instance", "zf start", "sca", "trust region");
    for (i, ch) in gen_dataset(8, 4, 5, 1.0, 10.0, 9)?.instances.iter().enumerate() {
        let start = zf_init(ch, 2.0)?;
        let sca = sca_solve(ch, &spec, &start, &cfg)?;
        let tr = trust_region_solve(ch, &spec, &start, &cfg)?;
        println!(
            "{i:>8} {:>12.6} {:>12.6} {:>12.6}",
            proj_l2o::problem::objective(&start, ch, &spec),
            sca.objective(),
            tr.objective()
        );
    }
    Ok(())
}
