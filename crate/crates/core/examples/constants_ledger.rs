//! Prints the constants ledger for the alternating chain and two staircases.
//!
//! `cargo run --example constants_ledger`

use lightcone::model::PeriodicPotential;

fn main() -> lightcone::Result<()> {
    let pots = [
        PeriodicPotential::alternating(),
        PeriodicPotential::staircase(3)?,
        PeriodicPotential::staircase(4)?,
    ];
    println!(
        "{:>3} {:>8} {:>10} {:>10} {:>10} {:>12} {:>12}",
        "p", "C", "C_hat", "lambda0", "mu0", "C2", "C3"
    );
    for pot in &pots {
        let l = pot.constants(1.2)?;
        println!(
            "{:>3} {:>8.1} {:>10.4} {:>10.5} {:>10.3} {:>12.1} {:>12.3}",
            l.p, l.c, l.c_hat, l.lambda0, l.mu0, l.c2, l.c3
        );
    }
    let l = pots[0].constants(1.2)?;
    for mu in [10.0, 20.0, 100.0] {
        println!(
            "mu = {mu:>5}: v_LR = {:.3}, velocity bound = {:.4}",
            l.v_lr(mu),
            l.v_asy_bound(mu)
        );
    }
    Ok(())
}
