//! Floquet bands and their derivatives for `V = (0, 1, 2)` at `λ = λ₀/2`.
//!
//! `cargo run --example band_structure`

use lightcone::floquet::hermitian_bands;
use lightcone::model::PeriodicPotential;

fn main() -> lightcone::Result<()> {
    let pot = PeriodicPotential::staircase(3)?;
    let ledger = pot.constants(1.2)?;
    let lambda = ledger.lambda0 / 2.0;
    let bands = hermitian_bands(&pot, lambda, 16, &ledger)?;
    println!("lambda = {lambda:.5}");
    println!(
        "{:>8} {:>14} {:>14} {:>14} {:>12}",
        "x", "band 1 - V1", "band 2 - V2", "band 3 - V3", "d band 1"
    );
    for (i, x) in bands.grid.iter().enumerate() {
        let v = &bands.values[i];
        println!(
            "{x:>8.4} {:>14.6e} {:>14.6e} {:>14.6e} {:>12.3e}",
            v[0] - pot.v(1),
            v[1] - pot.v(2),
            v[2] - pot.v(3),
            bands.derivatives[i][0]
        );
    }
    println!("max |dζ/dx| = {:.3e}", bands.max_abs_derivative());
    Ok(())
}
