//! Velocity scaling with the coupling for periods two and three.
//!
//! `cargo run --release --example scaling_sweep`

use lightcone::model::PeriodicPotential;
use lightcone::velocity::{scaling_sweep, SweepOptions};

fn main() -> lightcone::Result<()> {
    for pot in [
        PeriodicPotential::alternating(),
        PeriodicPotential::staircase(3)?,
    ] {
        let ledger = pot.constants(1.2)?;
        let mus: Vec<f64> = [1.0, 2.0, 4.0, 10.0]
            .iter()
            .map(|f| f * ledger.mu0)
            .collect();
        let opts = SweepOptions {
            front: true,
            ..SweepOptions::default()
        };
        let sweep = scaling_sweep(&pot, &mus, &ledger, &opts)?;
        println!("p = {}", sweep.p);
        for r in &sweep.reports {
            println!(
                "  mu {:>8.2}: exact {:.4e}, front {:.4e}, v_LR {:.3e}",
                r.mu,
                r.v_asy_exact_a.unwrap_or(f64::NAN),
                r.v_front.unwrap_or(f64::NAN),
                r.v_lr_bound
            );
        }
        println!(
            "  exact slope {:.3} (expected {}), front slope {:.3}",
            sweep.exact_slope.slope,
            sweep.expected_slope,
            sweep.front_slope.as_ref().map_or(f64::NAN, |f| f.slope)
        );
    }
    Ok(())
}
