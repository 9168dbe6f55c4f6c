//! The matching expansion of a tridiagonal determinant, checked against
//! brute force, and the table of matchings for six sites.
//!
//! `cargo run --example determinant_formula`

use lightcone::charpoly::{det_bruteforce, det_formula, matching_counts};
use lightcone::verify::{matching_table, random_jacobi};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> lightcone::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for p in [3, 6, 9, 12] {
        let spec = random_jacobi(&mut rng, p);
        let (a, b) = (det_formula(&spec)?, det_bruteforce(&spec));
        println!(
            "p={p:>2}: formula {a:.6}, brute force {b:.6}, rel err {:.1e}",
            (a - b).norm() / b.norm()
        );
    }
    println!("matchings of the 6-path by size: {:?}", matching_counts(6));
    for row in matching_table(6) {
        println!("  k={} {:<16} {}", row.k, row.matching, row.term);
    }
    Ok(())
}
