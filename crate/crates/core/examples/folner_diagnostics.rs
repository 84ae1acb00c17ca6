//! Invariance defects and growth/temperedness of the standard boxes.

use saturated::group::{boundary, folner_defect, invariance_defect, sequence_diagnostics};
use saturated::{Dim, FiniteSubset, FolnerSequence, GroupElement};

fn main() -> saturated::Result<()> {
    let k = FiniteSubset::rect(-1, 2, -1, 2);
    for n in [4, 16, 64] {
        let f = FiniteSubset::standard_box(Dim::Two, n);
        let bd = boundary(&k, &f)?;
        println!("n = {n:>2}: |∂_K F_n| = {:>4}, defect {:.4}", bd.len(), invariance_defect(&k, &f)?.value());
    }
    let g = GroupElement::d2(1, 0);
    println!("|gF △ F|/|F| at n = 32: {:.4}", folner_defect(g, &FiniteSubset::standard_box(Dim::Two, 32))?.value());

    let diag = sequence_diagnostics(&FolnerSequence::StandardBoxes(Dim::One), 64)?;
    println!("growth monotone on the tail: {}, max temperedness {:.3}", diag.growth_monotone_tail, diag.max_temperedness);
    for row in diag.rows.iter().step_by(16) {
        println!("  n = {:>2}, |F_n| = {:>2}, |F_n|/log n = {:.2}", row.n, row.size, row.growth);
    }
    Ok(())
}
