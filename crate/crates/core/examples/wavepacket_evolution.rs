//! Real-space evolution of a site-localized state with both propagators.
//!
//! `cargo run --release --example wavepacket_evolution`

use lightcone::dynamics::{evolve, position_moments, LatticeState, Method};
use lightcone::model::{Coupling, PeriodicPotential};

fn main() -> lightcone::Result<()> {
    let pot = PeriodicPotential::staircase(3)?;
    let coupling = Coupling::new(5.0)?;
    let psi0 = LatticeState::delta(801, 0)?;
    for t in [10.0, 50.0, 200.0] {
        let (cheb, stats) = evolve(&pot, &coupling, &psi0, t, Method::Chebyshev)?;
        let (eig, _) = evolve(&pot, &coupling, &psi0, t, Method::Eig)?;
        let diff = cheb
            .amps
            .iter()
            .zip(&eig.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let m = position_moments(&cheb, 3);
        println!(
            "t={t:>5}: ||X psi|| = {:.4} blocks, methods differ by {diff:.1e}, norm drift {:.1e}, edge {:.1e}",
            m.x_norm_block(),
            stats.norm_drift,
            stats.edge_amplitude
        );
    }
    Ok(())
}
