//! Entropy of Birkhoff level sets for the indicator of `[x₀ = 1]`.

use saturated::genericity::{spectrum_estimate, spectrum_oracle};
use saturated::shift::{SeparatingFamily, ShiftSystem};
use saturated::{Dim, FolnerSequence};

fn main() -> saturated::Result<()> {
    let system = ShiftSystem::full(2, Dim::One)?;
    let family = SeparatingFamily::for_system(&system);
    let phi = [0.0, 1.0];
    let grid: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let est = spectrum_estimate(&system, &phi, &grid, &FolnerSequence::StandardBoxes(Dim::One), &family, 0.5, 0.04, 24..=24)?;
    println!("   a   estimate   oracle");
    for (a, e) in &est {
        let o = spectrum_oracle(&phi, *a)?;
        println!("{a:>4.1}   {:.4}     {:.4}", e.slope.unwrap_or(f64::NAN), o.entropy);
    }
    // Three symbols with weights 0, 1, 2: the spectrum peaks at the mean weight 1.
    let three = [0.0, 1.0, 2.0];
    for a in [0.5, 1.0, 1.5] {
        println!("three symbols, a = {a}: {:.4} (ln 3 = {:.4})", spectrum_oracle(&three, a)?.entropy, 3f64.ln());
    }
    Ok(())
}
