//! Separated and spanning counts on full shifts and the golden-mean shift.

use saturated::estimators::{upper_capacity_estimate, PatternSet, DEFAULT_BUDGET};
use saturated::shift::{count_admissible, max_separated_points, min_spanning_points, Configuration, SeparatingFamily, SeparationMode, ShiftSystem};
use saturated::{Dim, FiniteSubset, FolnerSequence};

fn main() -> saturated::Result<()> {
    let golden = ShiftSystem::golden_mean();
    for n in [5, 10, 20] {
        // Words of length n without "11" are counted by Fibonacci numbers.
        println!("golden mean, n = {n:>2}: {} admissible words", count_admissible(&golden, &FiniteSubset::interval(0, n))?);
    }
    let family = SeparatingFamily::for_system(&golden);
    let seq = FolnerSequence::StandardBoxes(Dim::One);
    let est = upper_capacity_estimate(&PatternSet::all(golden), &seq, &family, 0.5, 1..=30, DEFAULT_BUDGET)?;
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    println!("upper capacity slope {:.4}, ln φ = {:.4}", est.slope.unwrap(), phi.ln());

    // Explicit point sets: maximal separated versus minimal spanning subsets.
    let binary = ShiftSystem::full(2, Dim::One)?;
    let family = SeparatingFamily::for_system(&binary);
    let words: [&[u8]; 6] = [&[0, 1], &[0, 0, 1], &[1], &[0], &[0, 1, 1], &[1, 1, 0, 0]];
    let points: Vec<Configuration> = words.iter().map(|w| Configuration::periodic_word(w)).collect::<saturated::Result<_>>()?;
    let f = FiniteSubset::interval(0, 4);
    for eps in [0.3, 0.8, 0.95] {
        let s = max_separated_points(&family, &points, &f, eps, SeparationMode::Separated, 1 << 16)?;
        let r = min_spanning_points(&family, &points, &f, eps, 1 << 16)?;
        println!("ε = {eps}: separated {} ≥ spanning {}", s.count, r.count);
    }
    Ok(())
}
