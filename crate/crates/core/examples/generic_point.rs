//! Synthesizes a point whose empirical measures sweep a segment of measures,
//! then compares the tracking error with the certificate's bound.

use saturated::genericity::{stretched_schedule, synthesize_generic, tracking_error, SynthesisParams};
use saturated::measures::{make_measure, MeasureSet, MeasureSpec, SetMode};
use saturated::shift::ShiftSystem;
use saturated::tiling::{build_decomposition, build_hierarchy, default_beta};
use saturated::{Dim, FolnerSequence};

fn main() -> saturated::Result<()> {
    let system = ShiftSystem::full(2, Dim::One)?;
    let hier = build_hierarchy(Dim::One, &[2, 4, 8, 16, 32])?;
    let dec = build_decomposition(&hier, &default_beta(5), 3, 1 << 24)?;
    let bern = |p: f64| make_measure(&MeasureSpec::bernoulli_binary(p), Dim::One, 1);
    let k = MeasureSet::new(vec![bern(0.25)?, bern(0.75)?], SetMode::Polyline)?;
    let schedule = stretched_schedule(&k, &dec)?;

    let params = SynthesisParams::default();
    let syn = synthesize_generic(&system, &schedule, &dec, &params, 42)?;
    println!("region [0, {}), {} bricks", syn.certificate.region_side, syn.bricks.len());
    for layer in &syn.certificate.layers {
        println!(
            "layer {}: side {:>2}, {:>4} bricks, ξ target {:.3}, realized {:.3}, max draws {}",
            layer.k, layer.side, layer.bricks, layer.xi_target, layer.xi_realized, layer.max_draws
        );
    }

    let ns = [50, 200, 897, 3000, 14465];
    let seq = FolnerSequence::StandardBoxes(Dim::One);
    let report = tracking_error(&syn.y, &schedule, &dec, &seq, &ns, Some(&k), 0.05)?;
    for p in &report.points {
        println!(
            "n = {:>5} (level {}): D(E_n, α'_n) = {:.4}, bound {:.4}, D(E_n, K) = {:.4}",
            p.n,
            p.level,
            p.distance,
            syn.certificate.bound(&dec, p.n)?,
            p.set_distance.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
