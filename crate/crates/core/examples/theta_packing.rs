//! Θ-estimates over measure neighborhoods, and Bowen/packing critical exponents.

use saturated::estimators::{ordering_diagnostics, r_set_patterns, theta_estimate, PrefixDag};
use saturated::measures::{make_measure, MeasureSet, MeasureSpec, SetMode};
use saturated::shift::{SeparatingFamily, ShiftSystem};
use saturated::{Dim, FolnerSequence};

fn main() -> saturated::Result<()> {
    let system = ShiftSystem::full(2, Dim::One)?;
    let family = SeparatingFamily::for_system(&system);
    let seq = FolnerSequence::StandardBoxes(Dim::One);
    let quarter = MeasureSet::singleton(make_measure(&MeasureSpec::bernoulli_binary(0.25), Dim::One, 1)?);

    let est = theta_estimate(&system, &quarter, 0.05, 1, &seq, &family, 0.5, 12..=24)?;
    for (n, c) in est.ns.iter().zip(&est.counts) {
        println!("n = {n:>2}: {c:>8} words with empirical measure near B(1/4)");
    }
    let h = -(0.25f64 * 0.25f64.ln() + 0.75 * 0.75f64.ln());
    println!("slope {:.4} against h(B(1/4)) = {h:.4}", est.slope.unwrap());

    // A segment of measures gives a wider band and a larger count.
    let vs = [0.25, 0.5].iter().map(|&p| make_measure(&MeasureSpec::bernoulli_binary(p), Dim::One, 1)).collect::<saturated::Result<Vec<_>>>()?;
    let segment = MeasureSet::new(vs, SetMode::Polyline)?;
    let wide = theta_estimate(&system, &segment, 0.05, 1, &seq, &family, 0.5, 24..=24)?;
    println!("segment B(1/4)–B(1/2) at n = 24: {} words", wide.counts[0]);

    // Bowen ≤ packing ≤ upper capacity on the prefix tree of the n = 24 words.
    let dag = PrefixDag::from_depth_one(&r_set_patterns(&system, &quarter, 0.05, 1), 24)?;
    let diag = ordering_diagnostics(&dag, 1..=24, 0.02)?;
    println!(
        "bowen {:.4} ≤ packing {:.4} ≤ upper capacity {:.4} (mean slope {:.4}): {}",
        diag.bowen_critical, diag.packing_critical, diag.uc_upper, diag.uc_slope, diag.holds
    );
    Ok(())
}
