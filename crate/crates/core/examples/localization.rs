//! Eigenvalues of the complexified Floquet matrix on a circle `|z| = ρ₀`
//! stay within `λ²Ĉ/(γ/2)^{p-1}` of the on-site values.
//!
//! `cargo run --example localization`

use lightcone::floquet::{circle_samples, verify_localization};
use lightcone::model::PeriodicPotential;

fn main() -> lightcone::Result<()> {
    for p in 2..=5 {
        let pot = if p == 2 {
            PeriodicPotential::alternating()
        } else {
            PeriodicPotential::staircase(p)?
        };
        let ledger = pot.constants(1.2)?;
        let zs = circle_samples(ledger.rho0, 64);
        for scale in [1.0, 0.5, 0.1] {
            let lambda = ledger.lambda0 * scale;
            let r = verify_localization(&pot, lambda, &zs, &ledger)?;
            println!(
                "p={p} lambda={lambda:.3e}: {} roots, worst deviation/budget {:.3}, worst |Im|/budget {:.3}, {}",
                r.entries.len(),
                r.worst_ratio,
                r.worst_im_ratio,
                if r.passed { "ok" } else { "FAILED" }
            );
        }
    }
    Ok(())
}
