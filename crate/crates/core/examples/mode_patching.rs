//! Detect categorical levels a generator never emits and patch them in.

use synthpost::datasets::toy_census;
use synthpost::generators::{Generator, ReferenceGenerator, ReferenceMode};
use synthpost::modepatch::{get_mode_collapse, patch_loop, PatchConfig};
use synthpost::tabular::Table;

fn drop_level(t: &Table, column: &str, level: &str) -> synthpost::Result<Table> {
    let col = t.categorical(column)?;
    let keep: Vec<usize> = (0..t.n_rows()).filter(|&i| col.label(i) != level).collect();
    t.gather(&keep)
}

fn main() -> synthpost::Result<()> {
    let real = toy_census(1500, 4)?;
    // a generator trained without two rare levels
    let narrowed = drop_level(&drop_level(&real, "education", "Doctorate")?, "workclass", "Never-worked")?;
    let gen = ReferenceGenerator::new(&narrowed, ReferenceMode::IndependentMarginals, 5)?;

    let missing = get_mode_collapse(&real, &gen.sample(1500, 0)?)?;
    println!("missing before patching: {}", serde_json::to_string(&missing)?);

    let out = patch_loop(&gen, &real, &PatchConfig::new(1500, 9))?;
    for p in &out.patches {
        println!(
            "round {}: {}={} (slice {}, augmented {}, removed {})",
            p.round, p.column, p.level, p.slice_size, p.augmented, p.removed_level
        );
    }
    println!("{}", serde_json::to_string_pretty(&out.metrics)?);
    Ok(())
}
