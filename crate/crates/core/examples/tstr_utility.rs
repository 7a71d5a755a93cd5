//! Train-on-synthetic / train-on-real gaps and feature-importance agreement.

use synthpost::datasets::toy_census;
use synthpost::generators::{Generator, ReferenceGenerator, ReferenceMode};
use synthpost::tabular::{split, SplitSpec};
use synthpost::utility::{default_learners, importance_agreement, tstr_trtr, LogisticLearner, Metric};

fn main() -> synthpost::Result<()> {
    let data = toy_census(1200, 6)?;
    let (train, test) = split(&data, SplitSpec::new(0.8, 1)?)?;

    for (label, mode) in [
        ("bootstrap", ReferenceMode::BootstrapJitter { sigma: 0.1 }),
        ("marginals", ReferenceMode::IndependentMarginals),
    ] {
        let synth = ReferenceGenerator::new(&train, mode, 3)?.sample(train.n_rows(), 4)?;
        let scores = tstr_trtr(&train, &test, &synth, &default_learners(), "income", 7)?;
        println!("{label}");
        for m in Metric::ALL {
            let show = |v: Option<f64>| v.map_or("n/a".into(), |v| format!("{v:.4}"));
            println!(
                "  {:<18} TRTR {}  TSTR {}  gap {}",
                m.name(),
                show(scores.mean_trtr[m.name()]),
                show(scores.mean_tstr[m.name()]),
                show(scores.gap(m))
            );
        }
        let agree = importance_agreement(
            &train,
            &test,
            &synth,
            &LogisticLearner::default(),
            "income",
            Metric::Accuracy,
            5,
            0.9,
            7,
        )?;
        println!("  real ranking      {:?}", agree.real.ranking);
        println!("  synthetic ranking {:?}", agree.synthetic.ranking);
        println!("  RBO {:.4}", agree.rbo.normalized);
    }
    Ok(())
}
