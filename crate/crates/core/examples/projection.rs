//! Project a random beamformer onto one instance's QoS region and check the
//! result against sampled feasible points.
//!
//!     cargo run --release --example projection

use proj_l2o::numeric::Rng;
use proj_l2o::problem::{soc_residuals, Beamformer, ChannelSet};
use proj_l2o::projection::{
    anchored_start, orthogonality_residual, phase_anchors, project, sample_feasible_points,
    ProjectorConfig,
};

fn main() -> proj_l2o::Result<()> {
    let (k, n) = (8, 4);
    let mut rng = Rng::new(7);
    let ch = proj_l2o::harness::gen_dataset(k, n, 1, 1.0, 10.0, 7)?.instances.remove(0);
    let x = Beamformer::from_flat(k, n, (0..2 * k * n).map(|_| 0.3 * rng.standard_normal()).collect())?;

    report("input", &x, &ch);
    let res = project(&x, &ch, &ProjectorConfig::default())?;
    report("projected", &res.y, &ch);
    println!(
        "distance {:.6}  newton iterations {}  converged {}",
        res.distance, res.iterations, res.converged
    );

    let anchors = phase_anchors(&x, &ch);
    let interior = anchored_start(&ch, &anchors, 2.0)?;
    let worst = sample_feasible_points(&res.y, &interior, &ch, &anchors, &mut rng, 1000)
        .iter()
        .map(|z| orthogonality_residual(&x, &res.y, z))
        .fold(f64::INFINITY, f64::min);
    println!("min <y - x, z - y> over 1000 feasible z: {worst:.3e}");

    let again = project(&res.y, &ch, &ProjectorConfig::default())?;
    println!("re-projecting moves the point by {:.1e}", again.distance);
    Ok(())
}

fn report(label: &str, w: &Beamformer, ch: &ChannelSet) {
    let margins = soc_residuals(w, ch).margins;
    let shown: Vec<String> = margins.iter().map(|m| format!("{m:+.4}")).collect();
    println!("{label:>9}: power {:.4}  margins [{}]", w.power(), shown.join(", "));
}
