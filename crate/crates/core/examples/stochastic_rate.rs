//! Stochastic MCSD with momentum on noisy gradients: the theorem step and
//! momentum, the Monte-Carlo rate check over 20 seeds, and a longer run with
//! a practical step to show how noise and momentum interact.
//!
//! cargo run --release --example stochastic_rate

use mcsd::linalg::PolarMode;
use mcsd::lmo::NormKind;
use mcsd::objective::{BrockettInstance, NoiseConfig};
use mcsd::optim::{drive, Method, OptimizerRun, StepSchedule};
use mcsd::rng::RngStream;
use mcsd::verify::{self, BoundConstants};

fn main() -> mcsd::Result<()> {
    let inst = BrockettInstance::generate(50, 3, 200, 3)?;
    let x0 = inst.manifold()?.random_point(&mut RngStream::new(3))?;
    let c = BoundConstants::for_instance(&inst, NormKind::Spectral, x0.matrix())?;
    let sched = StepSchedule::theorem_stochastic(c.delta, c.lipschitz, c.norm_equiv, 400)?;
    println!("theorem schedule: {}", sched.label());

    let rep = verify::stochastic_theorem_audit(&inst, 400, 20, 1.0, 3)?;
    println!("{rep}");

    // Where along a run is the smallest gradient seen?
    let noise = NoiseConfig::gaussian_with_total_sigma(1.0, inst.n(), inst.p());
    let method = Method::StochasticMcsd {
        norm: NormKind::Spectral,
        beta: sched.beta().unwrap(),
        noise,
    };
    let mut run = OptimizerRun::new(method, sched, x0.clone(), PolarMode::Exact, 11)?;
    let t = drive(&mut run, &inst, 400, false).trace;
    let (at, min) = t.records[..400]
        .iter()
        .map(|r| (r.iter, r.grad_dual_norm))
        .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
    println!(
        "theorem step: nuclear norm of grad {:.3e} at t=0, minimum {min:.3e} at t={at}, final subspace error {:.3e}",
        t.records[0].grad_dual_norm,
        t.last().unwrap().subspace_error
    );

    println!("\npractical step 0.05 (decay every 100), sigma = 1:");
    for beta in [0.0, 0.9] {
        let m = Method::StochasticMcsd {
            norm: NormKind::Spectral,
            beta,
            noise,
        };
        let mut run = OptimizerRun::new(m, StepSchedule::periodic_decay(0.05, 0.5, 100)?, x0.clone(), PolarMode::Exact, 11)?;
        let t = drive(&mut run, &inst, 400, false).trace;
        println!("  beta {beta}: final subspace error {:.3e}", t.last().unwrap().subspace_error);
    }
    Ok(())
}
