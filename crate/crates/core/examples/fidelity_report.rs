//! Marginal and dependence fidelity of a synthetic table against real data.

use synthpost::datasets::toy_census;
use synthpost::fidelity::{fidelity_report, DEFAULT_Q_HIGH, DEFAULT_Q_LOW};
use synthpost::generators::{Generator, ReferenceGenerator, ReferenceMode};

fn main() -> synthpost::Result<()> {
    let real = toy_census(1000, 5)?;
    let synth = ReferenceGenerator::new(&real, ReferenceMode::IndependentMarginals, 1)?.sample(1000, 2)?;
    let rep = fidelity_report(&real, &synth, DEFAULT_Q_LOW, DEFAULT_Q_HIGH)?;

    println!("total JS {:.5} bits, mean JS distance {:.4}", rep.total_js_bits, rep.mean_js_distance.unwrap_or(0.0));
    for (name, c) in &rep.categorical {
        println!("  {name:<10} JS {:.5}", c.js_divergence_bits);
        for (level, l) in &c.levels {
            let fc = l.log2fc.map_or("-".to_string(), |v| format!("{v:+.3}"));
            println!("    {level:<14} real {:.3} synth {:.3} log2FC {fc}", l.p_real, l.p_synth);
        }
    }
    for (name, c) in &rep.numeric.columns {
        let q = &c.quantiles;
        println!(
            "  {name:<10} |d| {:.4}  shifts {:?}/{:?}/{:?}  dp_low {:+.2} dp_high {:+.2}",
            c.cohens_d_abs.unwrap_or(f64::NAN),
            q.shift_low,
            q.shift_med,
            q.shift_high,
            q.dp_low,
            q.dp_high
        );
    }
    // independent marginals break every association, which shows up here
    for (family, f) in
        [("pearson", &rep.dependence.pearson), ("cramers_v", &rep.dependence.cramers_v), ("eta2", &rep.dependence.eta2)]
    {
        if let Some(f) = f {
            println!("  {family:<9} frobenius {:.4} spearman {:?}", f.frobenius_diff, f.spearman);
        }
    }
    Ok(())
}
