//! Polar factor (msign): exact SVD route against Newton–Schulz, and how the
//! iterative error falls with the iteration count.
//!
//! cargo run --release --example polar

use mcsd::linalg::{msign_exact, msign_iterative, svd, PolarMode, PolarScheme};
use mcsd::manifold::feasibility_violation;
use mcsd::rng::RngStream;

fn main() -> mcsd::Result<()> {
    let mut rng = RngStream::new(7);
    let y = rng.gaussian_matrix(200, 5);
    let s = svd(&y)?.s;
    println!("Y is 200x5 Gaussian, singular values {:.2?}", s);

    let exact = msign_exact(&y)?;
    println!("exact polar factor: |QᵀQ - I|_F = {:.2e}", feasibility_violation(&exact));

    let ns = PolarScheme::newton_schulz();
    println!("\n iters   |NS - exact|_F   |QᵀQ - I|_F");
    for k in [1, 2, 4, 6, 8, 10] {
        let q = msign_iterative(&y, &ns, k)?;
        println!("{k:>6}   {:>14.3e}   {:>11.3e}", q.sub(&exact)?.frobenius_norm(), feasibility_violation(&q));
    }

    // A badly conditioned input converges more slowly after Frobenius prescaling.
    let mut z = rng.gaussian_matrix(200, 5);
    for i in 0..200 {
        z.data_mut()[i * 5 + 4] *= 1e-2;
    }
    let zx = msign_exact(&z)?;
    println!("\nsame, last column scaled by 1e-2 (condition number ~{:.0})", {
        let s = svd(&z)?.s;
        s[0] / s[4]
    });
    for k in [8, 16, 24] {
        let q = msign_iterative(&z, &ns, k)?;
        println!("{k:>6}   {:>14.3e}", q.sub(&zx)?.frobenius_norm());
    }

    // Modes are what the optimizers take.
    for mode in [PolarMode::Exact, PolarMode::parse("iterative:12")?] {
        println!("mode {}", mode.label());
    }
    Ok(())
}
