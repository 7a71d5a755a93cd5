//! DCR proximity, attribution and inference attacks, and l-diversity.

use synthpost::datasets::toy_census;
use synthpost::encoder::{HeomEncoder, Weighting};
use synthpost::generators::{Generator, ReferenceGenerator, ReferenceMode};
use synthpost::privacy::{aia, cap_report, dcr_rpr, l_diversity_report};
use synthpost::tabular::{split, SplitSpec};

fn main() -> synthpost::Result<()> {
    let data = toy_census(1200, 8)?;
    let (train, test) = split(&data, SplitSpec::new(0.5, 2)?)?;
    let qis = vec!["sex".to_string(), "race".to_string(), "education".to_string()];
    let sensitive = vec!["income".to_string()];
    let enc = HeomEncoder::fit(&train, Weighting::Unweighted)?;

    for (label, mode) in [
        ("near-copies", ReferenceMode::BootstrapJitter { sigma: 0.0 }),
        ("marginals", ReferenceMode::IndependentMarginals),
    ] {
        let synth = ReferenceGenerator::new(&train, mode, 1)?.sample(train.n_rows(), 2)?;
        let dcr = dcr_rpr(&enc, &train, &test, &synth)?;
        println!("{label}");
        // 50 means synthetic rows sit no closer to train than to the holdout
        println!("  RPR {:.2}, median DCR train {:.4} test {:.4}", dcr.rpr, dcr.median_train, dcr.median_test);
        for (attr, c) in &cap_report(&test, &synth, &qis, &sensitive)?.attributes {
            println!("  CAP {attr}: {:.4} (protection {:.4}, {} unmatched)", c.cap, c.protection, c.unmatched);
        }
        for target in ["income", "hours"] {
            let e = aia(&synth, &test, &qis, target)?;
            println!("  AIA {target}: {:?} score {:.4} rmse {:?}", e.kind, e.score, e.rmse);
        }
        for (attr, l) in l_diversity_report(&train, &synth, &qis, &sensitive)? {
            println!(
                "  l-diversity {attr}: real min {} mean {:.2}, synthetic min {} mean {:.2}",
                l.real.min, l.real.mean, l.synthetic.min, l.synthetic.mean
            );
        }
    }
    Ok(())
}
