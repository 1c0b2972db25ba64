//! Linear minimization oracles of the Frobenius and spectral unit balls, the
//! duality identity they satisfy, and a brute-force cross-check on 2x2.
//!
//! cargo run --release --example lmo_oracles

use mcsd::linalg::{DenseMatrix, PolarMode};
use mcsd::lmo::{dual_norm, lmo, NormKind};
use mcsd::rng::RngStream;
use mcsd::verify;

fn main() -> mcsd::Result<()> {
    let s = DenseMatrix::from_rows(&[&[3.0, 0.0], &[0.0, -1.0], &[0.0, 0.0]]);
    for norm in [NormKind::Frobenius, NormKind::Spectral] {
        let d = lmo(norm, &s, &PolarMode::Exact)?.expect("nonzero");
        println!(
            "{norm:>9}: d = {:?}, <s,d> = {:.4}, -{} = {:.4}",
            d.data(),
            s.inner(&d)?,
            norm.dual_name(),
            -dual_norm(norm, &s)?
        );
    }
    println!("zero input: {:?}", lmo(NormKind::Spectral, &DenseMatrix::zeros(3, 2), &PolarMode::Exact)?);

    let mut rng = RngStream::new(5);
    let rep = verify::brute_force_lmo_check(NormKind::Spectral, (2, 2), 200_000, 10, &mut rng)?;
    println!("{rep}");
    Ok(())
}
