//! Encode a mixed table with HEOM and measure distances between rows.

use synthpost::datasets::toy_census;
use synthpost::encoder::{distance, HeomEncoder, Weighting};

fn main() -> synthpost::Result<()> {
    let real = toy_census(200, 1)?;

    for weighting in [Weighting::Unweighted, Weighting::entropy()] {
        let enc = HeomEncoder::fit(&real, weighting)?;
        let x = enc.encode(&real)?;
        println!(
            "{weighting:?}: {} rows x {} dims, fingerprint {}",
            x.n_rows(),
            x.n_cols(),
            &enc.fingerprint().as_str()[..12]
        );
        for (name, w) in enc.column_names().zip(enc.column_weights()) {
            println!("  {name:<10} weight {w:.4}");
        }
        println!("  d(row 0, row 1) = {:.4}", distance(x.row(0), x.row(1))?);
        println!("  d(row 0, row 0) = {:.4}", distance(x.row(0), x.row(0))?);
    }
    Ok(())
}
