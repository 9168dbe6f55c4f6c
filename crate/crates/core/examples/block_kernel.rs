//! Block propagators of the alternating chain from Floquet quadrature and
//! from the closed form.
//!
//! `cargo run --example block_kernel`

use lightcone::dynamics::{block_kernel, block_kernel_p2_closed};
use lightcone::linalg::max_abs_diff;
use lightcone::model::{Coupling, PeriodicPotential};

fn main() -> lightcone::Result<()> {
    let pot = PeriodicPotential::alternating();
    let (mu, t) = (3.0, 5.0);
    let coupling = Coupling::new(mu)?;
    println!("mu = {mu}, t = {t}");
    println!("{:>4} {:>12} {:>12}", "d", "||K(t,d)||", "closed diff");
    for d in 0..=12 {
        let k = block_kernel(&pot, &coupling, t, d, 512)?;
        let closed = block_kernel_p2_closed(mu, t, d)?;
        println!(
            "{d:>4} {:>12.4e} {:>12.1e}",
            k.norm(),
            max_abs_diff(&k.matrix, &closed.matrix)
        );
    }
    Ok(())
}
