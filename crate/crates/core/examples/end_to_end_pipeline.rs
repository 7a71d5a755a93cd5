//! Drive the command-line pipeline from a config file: a τ sweep with every
//! metric suite, then the flat CSV tables.
//!
//! ```text
//! cargo run --example end_to_end_pipeline
//! ```

use std::path::Path;

use synthpost::cli::main_with_args;

fn main() {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/pipeline.toml");
    let out = std::env::temp_dir().join("synthpost-example");
    let code = main_with_args(["synthpost", "sweep", "-c", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    println!("exit code {code}");
    for name in ["report.json", "summary_long.csv", "total_js.csv", "best_by_family.csv"] {
        println!("wrote {}", out.join(name).display());
    }
    if let Ok(text) = std::fs::read_to_string(out.join("total_js.csv")) {
        print!("{text}");
    }
}
