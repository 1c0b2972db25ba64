//! RGD, SPEL and Manifold Muon on the n = 200 weighted-PCA instance, the
//! same comparison `mcsd-bench pca-bench configs/pca_default.toml` runs.
//!
//! cargo run --release --example pca_head_to_head [-- <config.toml>]

use std::path::PathBuf;

use mcsd::bench::{self, BenchConfig};

fn main() -> mcsd::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/pca_default.toml")));
    let mut cfg = BenchConfig::load(&path)?;
    if std::env::var_os("MCSD_OUTPUT_DIR").is_none() {
        cfg.output_dir = std::env::temp_dir().join("mcsd-pca-head-to-head");
    }
    let inst = bench::load_instance(&cfg)?;
    println!("top eigenvalues of C: {:.1?}", &inst.eigenvalues()[..inst.p() + 1]);
    let report = bench::pca_bench_on(&cfg, &inst)?;
    print!("{}", bench::summary_text(&cfg, &inst, &report));

    if let (Some(spel), Some(mm)) = (report.summary("SPEL"), report.summary("MM")) {
        println!(
            "SPEL step loop is {:.1}x faster than Manifold Muon",
            mm.wall_time_median / spel.wall_time_median
        );
    }
    println!("CSV traces and subspace_error.svg in {}", cfg.output_dir.display());
    Ok(())
}
