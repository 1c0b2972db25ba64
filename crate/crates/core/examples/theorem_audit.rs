//! Checks the deterministic convergence guarantee on a (50, 3, 200) instance:
//! sampled descent-lemma inequality, then a SPEL run with the theorem step
//! audited for the telescoped bound and the min-gradient rate.
//!
//! cargo run --release --example theorem_audit

use mcsd::objective::BrockettInstance;
use mcsd::verify;

fn main() -> mcsd::Result<()> {
    let inst = BrockettInstance::generate(50, 3, 200, 1)?;
    let k = inst.smoothness_constants();
    println!("l_f = {:.3e}, G = {:.3e}, L = 4 l_f + 25 G = {:.3e}", k.l_f, k.g_bound, k.l_composed);

    let lemma = verify::check_descent_lemma(&inst, 1000, 0.2, 1)?;
    println!("{lemma}");

    let (trace, tele, rate) = verify::deterministic_theorem_audit(&inst, 100, 1)?;
    println!("{tele}\n{rate}");
    let alpha = trace.records[0].step_size;
    let first = trace.first().unwrap();
    let last = trace.last().unwrap();
    println!(
        "step {alpha:.3e} for 100 steps: f {:.4e} -> {:.4e} (optimum {:.4e})",
        first.objective,
        last.objective,
        inst.optimal_value()
    );

    // Per-step form of the same inequality.
    let steps = verify::audit_descent_steps(&trace, &tele.constants.unwrap())?;
    println!("{steps}");
    for r in [&lemma, &tele, &rate, &steps] {
        println!("{}", r.record_line());
    }
    Ok(())
}
