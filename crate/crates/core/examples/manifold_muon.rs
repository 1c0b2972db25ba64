//! The tangent-restricted spectral direction of Manifold Muon next to the
//! unconstrained SPEL direction at the same point.
//!
//! cargo run --release --example manifold_muon

use mcsd::linalg::{spectral_norm, PolarMode};
use mcsd::lmo::{dual_norm, lmo, NormKind};
use mcsd::objective::{BrockettInstance, Objective};
use mcsd::optim::manifold_muon_direction;
use mcsd::rng::RngStream;

fn main() -> mcsd::Result<()> {
    let inst = BrockettInstance::generate(200, 5, 1000, 0)?;
    let x = inst.manifold()?.random_point(&mut RngStream::new(1))?;
    let g = x.riemannian_grad(&inst.euclid_grad(x.matrix())?)?;
    let mode = PolarMode::default();

    let spel = lmo(NormKind::Spectral, &g, &mode)?.unwrap();
    println!(
        "SPEL direction:  <g,d> = {:.4e}  tangency residual {:.2e}",
        g.inner(&spel)?,
        x.tangency_residual(&spel)?
    );
    println!("-|g|_nuc        = {:.4e}", -dual_norm(NormKind::Spectral, &g)?);

    for iters in [1, 3, 10, 30] {
        let d = manifold_muon_direction(&x, &g, iters, 0.1, 1e-3, &mode)?.unwrap();
        println!(
            "MM, {iters:>2} inner: <g,d> = {:.4e}  tangency {:.2e}  |d|_2 = {:.6}  fallback {}",
            d.value,
            x.tangency_residual(&d.d)?,
            spectral_norm(&d.d)?,
            d.fallback
        );
    }
    let d = manifold_muon_direction(&x, &g, 10, 0.1, 1e-3, &mode)?.unwrap();
    println!("reference -|g|_F^2/|g|_2 = {:.4e}", d.reference);
    Ok(())
}
