//! Seeded toy data with census-like structure.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::seed;
use crate::tabular::{CategoricalColumn, ColumnData, ColumnRole, ColumnSpec, Table, TableSchema};

pub const EDUCATION: [(&str, f64); 5] =
    [("HS-grad", 0.45), ("Some-college", 0.25), ("Bachelors", 0.2), ("Masters", 0.08), ("Doctorate", 0.02)];
pub const WORKCLASS: [(&str, f64); 4] = [("Private", 0.7), ("Self-emp", 0.15), ("Gov", 0.13), ("Never-worked", 0.02)];
pub const RACE: [(&str, f64); 4] = [("White", 0.8), ("Black", 0.1), ("Asian", 0.07), ("Other", 0.03)];

pub fn census_schema() -> TableSchema {
    TableSchema::new(vec![
        ColumnSpec::numeric("age"),
        ColumnSpec::numeric("hours"),
        ColumnSpec::categorical("education"),
        ColumnSpec::categorical("workclass"),
        ColumnSpec::categorical("sex").with_role(ColumnRole::QuasiIdentifier),
        ColumnSpec::categorical("race").with_role(ColumnRole::QuasiIdentifier),
        ColumnSpec::categorical("income").with_role(ColumnRole::Target),
    ])
    .expect("static schema is valid")
}

fn pick<'a, R: Rng>(rng: &mut R, table: &[(&'a str, f64)]) -> (usize, &'a str) {
    let mut u: f64 = rng.random();
    for (i, (label, p)) in table.iter().enumerate() {
        if u < *p {
            return (i, label);
        }
        u -= p;
    }
    (table.len() - 1, table[table.len() - 1].0)
}

/// `n` rows where income depends on education, age and hours.
pub fn toy_census(n: usize, seed: u64) -> Result<Table> {
    let mut rng = seed::rng(seed);
    let age_noise = Normal::new(0.0, 9.0).expect("valid normal");
    let hours_noise = Normal::new(0.0, 6.0).expect("valid normal");
    let mut cols: [Vec<String>; 5] = Default::default();
    let mut age = Vec::with_capacity(n);
    let mut hours = Vec::with_capacity(n);
    for _ in 0..n {
        let (edu, edu_label) = pick(&mut rng, &EDUCATION);
        let (_, work) = pick(&mut rng, &WORKCLASS);
        let (_, race) = pick(&mut rng, &RACE);
        let sex = if rng.random::<f64>() < 0.52 { "Male" } else { "Female" };
        let a = (38.0 + 2.5 * edu as f64 + age_noise.sample(&mut rng)).clamp(17.0, 90.0).round();
        let h = if work == "Never-worked" {
            0.0
        } else {
            (40.0 + 1.5 * edu as f64 + hours_noise.sample(&mut rng)).clamp(1.0, 99.0).round()
        };
        let logit = -4.0 + 0.9 * edu as f64 + 0.04 * (a - 38.0) + 0.06 * (h - 40.0);
        let rich = rng.random::<f64>() < 1.0 / (1.0 + (-logit).exp());
        age.push(a);
        hours.push(h);
        for (col, v) in cols.iter_mut().zip([edu_label, work, sex, race, if rich { ">50K" } else { "<=50K" }]) {
            col.push(v.to_string());
        }
    }
    let mut data = vec![ColumnData::Numeric(age), ColumnData::Numeric(hours)];
    data.extend(cols.iter().map(|c| ColumnData::Categorical(CategoricalColumn::from_labels(c))));
    Table::new(census_schema(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let a = toy_census(300, 1).unwrap();
        assert_eq!(a.n_rows(), 300);
        assert_eq!(a, toy_census(300, 1).unwrap());
        let income = a.categorical("income").unwrap().label_counts();
        assert_eq!(income.len(), 2);
    }
}
