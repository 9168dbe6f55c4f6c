//! Asymptotic velocity from the band formula, its upper estimate and direct
//! real-space evolution.
//!
//! `cargo run --release --example asymptotic_velocity`

use lightcone::model::{Coupling, PeriodicPotential};
use lightcone::velocity::{v_asy_direct, v_asy_exact, v_asy_upper};

fn main() -> lightcone::Result<()> {
    let pot = PeriodicPotential::alternating();
    let ledger = pot.constants(1.2)?;
    let mu = 10.0;
    let coupling = Coupling::new(mu)?;
    let exact = v_asy_exact(&pot, &coupling, 512, &ledger)?;
    let upper = v_asy_upper(&pot, &coupling, 512, &ledger)?;
    let direct = v_asy_direct(&pot, &coupling, 2000.0, None, &ledger)?;
    println!("mu = {mu}");
    println!(
        "band formula     {:.5e} sites ({:.5e} blocks)",
        exact.variant_a, exact.variant_a_block
    );
    println!("alternative      {:.5e} sites", exact.variant_b);
    println!("upper estimate   {:.5e}", upper.v_asy_upper);
    println!("bound C3/mu^p-1  {:.5e}", upper.v_asy_bound);
    println!(
        "direct           {:.5e} sites ({:.5e} blocks), drift {:.1e}, {} sites, {:?}",
        direct.v_site, direct.v_block, direct.drift, direct.sites, direct.method
    );
    Ok(())
}
