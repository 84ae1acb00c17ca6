//! Greedy quasi-tilings, their disjointification, and the dyadic decomposition.
//!
//! Run with `cargo run --example quasi_tiling`.

use num_rational::Ratio;
use saturated::tiling::{build_decomposition, build_hierarchy, default_beta, disjointify, quasi_tile};
use saturated::{Dim, FiniteSubset};

fn main() -> saturated::Result<()> {
    // Intervals of lengths 3 and 7 inside [0, 100).
    let target = FiniteSubset::interval(0, 100);
    let shapes = [FiniteSubset::interval(0, 3), FiniteSubset::interval(0, 7)];
    let qt = quasi_tile(&target, &shapes, Ratio::new(1, 10))?;
    let check = qt.validate()?;
    println!("1-D: {} tiles cover {}/{} cells, re-check {}", qt.tile_count(), check.covered, check.target_len, check.all_hold());

    let cover = disjointify(&qt)?;
    let dcheck = cover.validate();
    println!("    disjoint pieces {} cover {:.4}, (1-ε)² bound {}", cover.pieces.len(), cover.coverage(), dcheck.squared_coverage_ok);

    // The same in the plane with square shapes.
    let square = FiniteSubset::standard_box(Dim::Two, 20);
    let shapes2 = [FiniteSubset::standard_box(Dim::Two, 2), FiniteSubset::standard_box(Dim::Two, 5)];
    let qt2 = quasi_tile(&square, &shapes2, Ratio::new(1, 5))?;
    let cover2 = disjointify(&qt2)?;
    println!("2-D: {} tiles, disjoint coverage {:.4}", qt2.tile_count(), cover2.coverage());

    // Decomposition indices M(k) for dyadic sides with β_k = 2^-k.
    let hier = build_hierarchy(Dim::One, &[2, 4, 8, 16, 32])?;
    let dec = build_decomposition(&hier, &default_beta(5), 4, 1 << 24)?;
    for k in 0..=dec.kmax() {
        println!("M({k}) = {:>7}   |H({k})| = {}", dec.m(k), dec.h_len(k));
    }
    let n = 5000;
    println!("|F'_{n}| = {} of {n}", dec.fprime_len(n)?);
    Ok(())
}
