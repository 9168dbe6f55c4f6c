//! Light-cone profile of the block propagator, front velocity and the decay
//! of the mass outside a cone.
//!
//! `cargo run --release --example light_cone`

use lightcone::dynamics::KernelSampler;
use lightcone::model::{Coupling, PeriodicPotential};
use lightcone::velocity::{
    cone_profile, fit_front_velocity, tail_decay, transient_samples, ConeGrid,
};

fn main() -> lightcone::Result<()> {
    let pot = PeriodicPotential::alternating();
    let ledger = pot.constants(1.2)?;
    for factor in [1.0, 2.0, 4.0] {
        let mu = ledger.mu0 * factor;
        let coupling = Coupling::new(mu)?;
        let grid = ConeGrid::auto(&pot, &coupling, 20.0, 16);
        let sampler = KernelSampler::new(&pot, &coupling, grid.nodes)?;
        let profile = cone_profile(&sampler, &grid.times, grid.d_max, 1e-6)?;
        let front = fit_front_velocity(&profile, transient_samples(ledger.v_lr(mu)))?;
        let tail = tail_decay(&profile, 2.0 * front.v_front)?;
        println!(
            "mu={mu:>7.3}: v_front {:.4e} in [{:.4e}, {:.4e}], v_LR {:.3}, eta {:.3}, tail decay rate {:.3e}",
            front.v_front,
            front.interval.0,
            front.interval.1,
            ledger.v_lr(mu),
            profile.eta_fit.unwrap_or(f64::NAN),
            tail.rate
        );
    }
    Ok(())
}
