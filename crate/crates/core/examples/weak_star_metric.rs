//! The weak* metric on cylinder measures, empirical measures, and distance to a segment.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use saturated::measures::{distance_to_set, empirical_measure_of_word, make_measure, weakstar_distance, MeasureSet, MeasureSpec, SetMode};
use saturated::shift::SeparatingFamily;
use saturated::Dim;

fn main() -> saturated::Result<()> {
    let family = SeparatingFamily::new(2, Dim::One, 24)?;
    let bern = |p: f64| make_measure(&MeasureSpec::bernoulli_binary(p), Dim::One, 3);
    let (a, b) = (bern(0.25)?, bern(0.75)?);
    let d = weakstar_distance(&family, &a, &b)?;
    println!("D(B(1/4), B(3/4)) = {:.6} (+ at most {:.1e} truncation)", d.value, d.error_bound);

    // Empirical measures of a typical word approach the generating measure.
    let spec = MeasureSpec::bernoulli_binary(0.25);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [100, 1_000, 10_000] {
        let word = spec.sample_word(n, &mut rng);
        let e = empirical_measure_of_word(&word, 2, 3)?;
        println!("n = {n:>5}: D(E_n, B(1/4)) = {:.5}", weakstar_distance(&family, &e, &a)?.value);
    }

    // Distance to the segment between the two measures is exact on a polyline.
    let segment = MeasureSet::new(vec![a, b], SetMode::Polyline)?;
    let half = bern(0.5)?;
    let sd = distance_to_set(&family, &half, &segment)?;
    println!("D(B(1/2), segment) = {:.6} at weights {:?}", sd.value, sd.argmin);
    let h = segment.point(&[0.3, 0.7]).metric_entropy()?;
    println!("entropy of 0.3·B(1/4) + 0.7·B(3/4) = {h:.6}");
    Ok(())
}
