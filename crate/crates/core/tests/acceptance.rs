//! Acceptance criteria, one PASS/FAIL/SKIP line each.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.
//! Criterion 10 needs `ADULT_CSV` pointing at the UCI Adult file and is
//! reported but never gating.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::Rng;
use serde_json::Value;
use synthpost::cli::{self, main_with_args, EXIT_OK};
use synthpost::datasets::toy_census;
use synthpost::encoder::{EncodedMatrix, HeomEncoder, Weighting};
use synthpost::fidelity::{
    categorical_comparisons, cohens_d, correlation_ratio, cramers_v, dependence_matrices, js_categorical,
    mean_js_distance, quantile_heuristics,
};
use synthpost::filter::{Feasibility, FilterConfig, FilterSession, Variant};
use synthpost::generators::{Generator, ReferenceGenerator, ReferenceMode};
use synthpost::modepatch::{get_mode_collapse, patch_loop, PatchConfig};
use synthpost::neighbors::{self, DensityQuery, Standardizer};
use synthpost::privacy::{aia_classification, aia_regression, dcr_rpr, rpr};
use synthpost::seed;
use synthpost::tabular::{split, CategoricalColumn, ColumnData, ColumnRole, ColumnSpec, SplitSpec, Table, TableSchema};
use synthpost::utility::{self, loss_and_gradient, rbo, roc_auc, Metric};

enum Outcome {
    Pass(String),
    Skip(String),
}

type Check = Result<Outcome, String>;
type Criterion = (&'static str, bool, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !($cond) {
            return Err(format!($($fmt)+));
        }
    };
}

// written to the raw stderr handle so the lines survive libtest capture
macro_rules! report {
    ($($fmt:tt)+) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stderr(), $($fmt)+);
    }};
}

fn pass(detail: impl Into<String>) -> Check {
    Ok(Outcome::Pass(detail.into()))
}

// ---------------------------------------------------------------------------
// brute-force oracles

fn d2(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 0..a.len() {
        let t = a[k] - b[k];
        acc += t * t;
    }
    acc
}

fn oracle_radii2(x: &EncodedMatrix, k: usize) -> Vec<f64> {
    let n = x.n_rows();
    let k_eff = k.max(2).min(n);
    (0..n)
        .map(|i| {
            let mut ds: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| d2(x.row(i), x.row(j))).collect();
            ds.sort_by(f64::total_cmp);
            ds[k_eff - 2]
        })
        .collect()
}

struct OracleMargin {
    /// Over real rows inside the `R_max` ball, else nearest minus `R_max²`.
    restricted: f64,
    /// Over every real row.
    full: f64,
}

fn oracle_margin(x_r: &EncodedMatrix, r2: &[f64], q: &[f64]) -> OracleMargin {
    let rmax2 = r2.iter().copied().fold(0.0, f64::max);
    let (mut restricted, mut full, mut nearest) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for (i, &r2_i) in r2.iter().enumerate() {
        let d = d2(q, x_r.row(i));
        nearest = nearest.min(d);
        full = full.min(d - r2_i);
        if d <= rmax2 {
            restricted = restricted.min(d - r2_i);
        }
    }
    if restricted.is_infinite() {
        restricted = nearest - rmax2;
    }
    OracleMargin { restricted, full }
}

fn oracle_eps(x_r: &EncodedMatrix, r2: &[f64], x_s: &EncodedMatrix) -> f64 {
    let bad = (0..x_s.n_rows()).filter(|&i| oracle_margin(x_r, r2, x_s.row(i)).restricted < 0.0).count();
    bad as f64 / x_s.n_rows() as f64
}

// ---------------------------------------------------------------------------
// table builders

fn random_mixed_pair<R: Rng>(rng: &mut R) -> (Table, Table) {
    let n = rng.random_range(2..=200);
    let m = rng.random_range(1..=200);
    let d = rng.random_range(1..=12);
    // synthetic rows sometimes copy a real row wholesale
    let source: Vec<Option<usize>> = (0..m).map(|_| rng.random_bool(0.3).then(|| rng.random_range(0..n))).collect();
    let mut specs = Vec::new();
    let (mut real_cols, mut synth_cols) = (Vec::new(), Vec::new());
    for j in 0..d {
        if rng.random_bool(0.5) {
            let coarse = rng.random_bool(0.4);
            let draw = |rng: &mut R| {
                if coarse {
                    rng.random_range(0..4) as f64
                } else {
                    rng.random::<f64>() * 100.0 - 50.0
                }
            };
            let real: Vec<f64> = (0..n).map(|_| draw(rng)).collect();
            let synth: Vec<f64> = source
                .iter()
                .map(|s| match s {
                    Some(i) => real[*i],
                    None => draw(rng) * 1.1,
                })
                .collect();
            specs.push(ColumnSpec::numeric(format!("n{j}")));
            real_cols.push(ColumnData::Numeric(real));
            synth_cols.push(ColumnData::Numeric(synth));
        } else {
            let levels = rng.random_range(1..=5);
            let real: Vec<String> = (0..n).map(|_| format!("L{}", rng.random_range(0..levels))).collect();
            let synth: Vec<String> =
                source.iter().map(|s| real[s.unwrap_or_else(|| rng.random_range(0..n))].clone()).collect();
            specs.push(ColumnSpec::categorical(format!("c{j}")));
            real_cols.push(ColumnData::Categorical(CategoricalColumn::from_labels(&real)));
            synth_cols.push(ColumnData::Categorical(CategoricalColumn::from_labels(&synth)));
        }
    }
    let schema = TableSchema::new(specs).unwrap();
    (Table::new(schema.clone(), real_cols).unwrap(), Table::new(schema, synth_cols).unwrap())
}

fn labels(xs: &[&str]) -> ColumnData {
    ColumnData::Categorical(CategoricalColumn::from_labels(xs))
}

fn table(specs: Vec<ColumnSpec>, cols: Vec<ColumnData>) -> Table {
    Table::new(TableSchema::new(specs).unwrap(), cols).unwrap()
}

fn without_levels(t: &Table, drop: &[(&str, &str)]) -> Table {
    let keep: Vec<usize> =
        (0..t.n_rows()).filter(|&i| drop.iter().all(|(c, l)| t.categorical(c).unwrap().label(i) != *l)).collect();
    t.gather(&keep).unwrap()
}

// ---------------------------------------------------------------------------
// criteria

fn c1_oracle_equivalence() -> Check {
    let start = Instant::now();
    let mut rng = seed::rng(0xACCE_0001);
    let cases = 60;
    let mut margins_checked = 0;
    let mut negatives = 0;
    for case in 0..cases {
        let (real, synth) = random_mixed_pair(&mut rng);
        let weighting = if rng.random_bool(0.5) { Weighting::Unweighted } else { Weighting::entropy() };
        let k = rng.random_range(1..=6);
        let enc = HeomEncoder::fit(&real, weighting).map_err(|e| format!("case {case}: {e}"))?;
        let (x_r, x_s) = (enc.encode(&real).unwrap(), enc.encode(&synth).unwrap());
        let idx = neighbors::build_index(&x_r, k).map_err(|e| format!("case {case}: {e}"))?;

        let r2 = oracle_radii2(&x_r, k);
        for (i, (a, b)) in idx.squared_radii().iter().zip(&r2).enumerate() {
            ensure!(a.to_bits() == b.to_bits(), "case {case}: radius {i} {a} vs oracle {b}");
        }
        let margins = idx.margins(&x_s).unwrap();
        for (i, &got) in margins.iter().enumerate() {
            let o = oracle_margin(&x_r, &r2, x_s.row(i));
            ensure!(
                got.to_bits() == o.restricted.to_bits(),
                "case {case}: margin {i} {got} vs oracle {}",
                o.restricted
            );
            ensure!((got < 0.0) == (o.full < 0.0), "case {case}: margin {i} sign differs from the all-rows minimum");
            if o.full < 0.0 {
                ensure!(
                    got.to_bits() == o.full.to_bits(),
                    "case {case}: violating margin {i} differs from all-rows minimum"
                );
                negatives += 1;
            }
            margins_checked += 1;
        }
        let eps = neighbors::eps_any(&idx, &x_s).unwrap();
        ensure!(eps.to_bits() == oracle_eps(&x_r, &r2, &x_s).to_bits(), "case {case}: eps_any {eps}");

        let dcr = neighbors::dcr(&x_r, &x_s).unwrap();
        for (i, got) in dcr.iter().enumerate() {
            let want = (0..x_r.n_rows()).map(|j| d2(x_s.row(i), x_r.row(j))).fold(f64::INFINITY, f64::min).sqrt();
            ensure!(got.to_bits() == want.to_bits(), "case {case}: dcr {i} {got} vs {want}");
        }

        let ident = neighbors::identifiability(&idx, &x_s).unwrap();
        let hits = (0..x_r.n_rows())
            .filter(|&i| (0..x_s.n_rows()).map(|j| d2(x_r.row(i), x_s.row(j))).fold(f64::INFINITY, f64::min) < r2[i])
            .count();
        ensure!(
            ident.to_bits() == (hits as f64 / x_r.n_rows() as f64).to_bits(),
            "case {case}: identifiability {ident}"
        );
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    pass(format!("{cases} tables, {margins_checked} margins ({negatives} violating), {elapsed:.2?}"))
}

fn c2_filter_contract() -> Check {
    let mut rng = seed::rng(0xACCE_0002);
    let (mut met, mut exhausted, mut steps) = (0, 0, 0);
    for case in 0..20 {
        let real = toy_census(rng.random_range(80..=300), rng.random()).unwrap();
        let mode = if rng.random_bool(0.5) {
            ReferenceMode::IndependentMarginals
        } else {
            ReferenceMode::BootstrapJitter { sigma: rng.random_range(0.05..0.6) }
        };
        let gen = ReferenceGenerator::new(&real, mode, rng.random()).unwrap();
        let variant = [Variant::V0, Variant::V1, Variant::V2][rng.random_range(0..3)];
        let tau = rng.random_range(0.05..0.6);
        let n = rng.random_range(30..=150);
        let mut cfg = FilterConfig::new(tau, n, variant, rng.random());
        if rng.random_bool(0.3) {
            cfg = cfg.with_budget(rng.random_range(1..=5 * n));
        }
        let session = FilterSession::new(&real, variant).unwrap();
        let report = session.run(&gen, &cfg).map_err(|e| format!("case {case}: {e}"))?;

        let x_r = session.index().matrix();
        let r2 = oracle_radii2(x_r, variant.k());
        let x_s = session.encoder().encode(report.table()).unwrap();
        let eps = oracle_eps(x_r, &r2, &x_s);
        ensure!(eps == report.final_eps, "case {case}: reported eps {} vs recomputed {eps}", report.final_eps);
        match report.feasibility {
            Feasibility::MetThreshold => {
                ensure!(eps < tau, "case {case}: MetThreshold with recomputed eps {eps} >= tau {tau}");
                met += 1;
            }
            Feasibility::BudgetExhausted => exhausted += 1,
        }
        let mut violations = (report.initial_eps * n as f64).round() as usize;
        for t in &report.trace {
            let ok =
                (t.old_margin < 0.0 && t.new_margin >= 0.0) || (t.old_margin >= 0.0 && t.new_margin > t.old_margin);
            ensure!(ok, "case {case}: accepted {} -> {} at proposal {}", t.old_margin, t.new_margin, t.iteration);
            ensure!(
                t.violations <= violations,
                "case {case}: violations rose to {} at proposal {}",
                t.violations,
                t.iteration
            );
            violations = t.violations;
            steps += 1;
        }
    }
    ensure!(met > 0, "no randomized run reached its threshold");
    pass(format!("20 configs: {met} met threshold, {exhausted} exhausted, {steps} accepted steps checked"))
}

fn c3_feasibility() -> Check {
    let mut rng = seed::rng(0xACCE_0003);
    let n = 200;
    let x: Vec<f64> = (0..n).map(|i| i as f64 + rng.random::<f64>() * 0.5).collect();
    let c: Vec<&str> = (0..n).map(|_| ["a", "b", "c"][rng.random_range(0..3)]).collect();
    let real = table(
        vec![ColumnSpec::numeric("x"), ColumnSpec::categorical("c")],
        vec![ColumnData::Numeric(x.clone()), labels(&c)],
    );
    let distinct: HashSet<u64> = x.iter().map(|v| v.to_bits()).collect();
    ensure!(distinct.len() == n, "fixture has duplicate rows");
    let gen = ReferenceGenerator::new(&real, ReferenceMode::BootstrapJitter { sigma: 0.0 }, 1).unwrap();
    let report = synthpost::filter::run_filter(&real, &gen, &FilterConfig::new(0.5, 100, Variant::V1, 9)).unwrap();
    ensure!(
        report.feasibility == Feasibility::BudgetExhausted,
        "expected BudgetExhausted, got {:?} at eps {}",
        report.feasibility,
        report.final_eps
    );
    pass(format!("BudgetExhausted after {} proposals, eps {}", report.proposals, report.final_eps))
}

fn c4_mode_repair() -> Check {
    let start = Instant::now();
    let real = toy_census(2000, 11).unwrap();
    let dropped =
        [("education", "Doctorate"), ("education", "Masters"), ("workclass", "Never-worked"), ("race", "Other")];
    let train = without_levels(&real, &dropped);
    let gen = ReferenceGenerator::new(&train, ReferenceMode::IndependentMarginals, 3).unwrap();
    let pre = get_mode_collapse(&real, &gen.sample(2000, 1).unwrap()).unwrap();
    ensure!(pre.total() == 4, "constructed generator misses {} levels, expected 4", pre.total());
    let out = patch_loop(&gen, &real, &PatchConfig::new(2000, 5)).map_err(|e| e.to_string())?;
    let m = &out.metrics;
    ensure!(m.missing_pre == 4, "missing_pre {}", m.missing_pre);
    ensure!(m.srr == Some(1.0), "SRR {:?}", m.srr);
    ensure!(m.patched_levels == m.missing_pre, "patched {} of {}", m.patched_levels, m.missing_pre);
    ensure!(m.delta_mean_jsd.abs() < 0.05, "|dJSD| = {}", m.delta_mean_jsd.abs());
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    pass(format!(
        "SRR 1, {}/{} patched, MAR {:.4}, dJSD {:+.4}, {elapsed:.2?}",
        m.patched_levels, m.missing_pre, m.mar, m.delta_mean_jsd
    ))
}

fn c5_metric_identities() -> Check {
    const TOL: f64 = 1e-9;
    let census = toy_census(500, 21).unwrap();
    let other = toy_census(500, 22).unwrap();

    ensure!(mean_js_distance(&census, &census).unwrap() == Some(0.0), "JS distance on identical tables");
    let disjoint = js_categorical(&labels(&["a", "b", "a", "b"]), &labels(&["c", "d", "d", "c"])).unwrap();
    ensure!((disjoint.js_distance - 1.0).abs() < TOL, "disjoint supports JS distance {}", disjoint.js_distance);

    for (name, cmp) in categorical_comparisons(&census, &other).unwrap() {
        let sum: f64 = cmp.levels.values().map(|l| l.js_contrib).sum();
        ensure!(
            (sum - cmp.js_divergence_bits).abs() < TOL,
            "{name}: contributions {sum} vs {}",
            cmp.js_divergence_bits
        );
    }

    let (a, b) = (census.numeric("age").unwrap(), other.numeric("age").unwrap());
    let d = cohens_d(a, b).unwrap();
    let affine = |v: &[f64]| v.iter().map(|x| 3.5 * x - 17.0).collect::<Vec<_>>();
    let d2_ = cohens_d(&affine(a), &affine(b)).unwrap();
    ensure!((d - d2_).abs() < TOL, "Cohen's d {d} vs affine {d2_}");

    let x = CategoricalColumn::from_labels(&["p", "q", "p", "q", "p", "q"]);
    let y = CategoricalColumn::from_labels(&["u", "v", "u", "v", "u", "v"]);
    let v = cramers_v(&x, &y).unwrap();
    ensure!((v - 1.0).abs() < TOL, "Cramer's V {v}");

    let g = CategoricalColumn::from_labels(&["a", "a", "b", "b", "c", "c"]);
    let eta = correlation_ratio(&[1.0, 1.0, 4.0, 4.0, -2.0, -2.0], &g).unwrap();
    ensure!((eta - 1.0).abs() < TOL, "eta2 {eta}");

    let dep = dependence_matrices(&census, &census).unwrap();
    for (family, s) in [("cramers_v", &dep.cramers_v), ("eta2", &dep.eta2)] {
        let sp = s.as_ref().and_then(|f| f.spearman);
        ensure!(sp.is_some_and(|v| (v - 1.0).abs() < TOL), "{family} Spearman(M, M) = {sp:?}");
    }
    let mut rng = seed::rng(5);
    let nums: Vec<ColumnData> = (0..4).map(|_| ColumnData::Numeric((0..50).map(|_| rng.random()).collect())).collect();
    let wide = table((0..4).map(|j| ColumnSpec::numeric(format!("x{j}"))).collect(), nums);
    let sp = dependence_matrices(&wide, &wide).unwrap().pearson.and_then(|f| f.spearman);
    ensure!(sp.is_some_and(|v| (v - 1.0).abs() < TOL), "pearson Spearman(M, M) = {sp:?}");

    let items = ["age", "hours", "education", "race"];
    let r = rbo(&items, &items, 0.9).unwrap();
    ensure!((r.normalized - 1.0).abs() < TOL, "RBO(identical) {}", r.normalized);

    ensure!(rpr(3.25, 3.25) == 50.0, "rpr of equal sums");
    let enc = HeomEncoder::fit(&census, Weighting::Unweighted).unwrap();
    let sym = dcr_rpr(&enc, &census, &census, &other).unwrap();
    ensure!((sym.rpr - 50.0).abs() < TOL, "RPR with train == test: {}", sym.rpr);
    pass("JS 0/1, contributions, Cohen's d, V, eta2, Spearman, RBO, RPR")
}

fn c6_quantile_example() -> Check {
    const TOL: f64 = 1e-9;
    // n = 101 puts the 5th, 50th and 95th percentiles on order statistics
    let fill = |lo: f64, mid: f64, hi: f64| -> Vec<f64> {
        (0..101)
            .map(|i| match i {
                0..=3 => lo - 10.0 + i as f64,
                4..=6 => lo,
                7..=48 => lo + 1.0 + (i - 7) as f64 * (mid - lo - 2.0) / 41.0,
                49..=51 => mid,
                52..=93 => mid + 1.0 + (i - 52) as f64 * (hi - mid - 2.0) / 41.0,
                94..=96 => hi,
                _ => hi + (i - 96) as f64,
            })
            .collect()
    };
    let base = fill(40.0, 100.0, 200.0);
    let var = fill(44.0, 110.0, 180.0);
    let q = quantile_heuristics(&base, &var, 0.05, 0.95).unwrap();
    ensure!(q.baseline == [40.0, 100.0, 200.0], "baseline quantiles {:?}", q.baseline);
    ensure!(q.variant == [44.0, 110.0, 180.0], "variant quantiles {:?}", q.variant);
    for (name, got, want) in [("low", q.shift_low, 0.10), ("med", q.shift_med, 0.10), ("high", q.shift_high, -0.10)] {
        ensure!(got.is_some_and(|g| (g - want).abs() < TOL), "shift_{name} {got:?} vs {want}");
    }

    // tail part: 5% of the baseline and 8% of the variant at or above Q_H
    let base: Vec<f64> =
        (0..100).map(|i| if i < 95 { i as f64 * 2.0 + 11.0 } else { 219.0 + (i - 95) as f64 }).collect();
    let var: Vec<f64> = (0..100).map(|i| if i < 92 { i as f64 * 2.0 + 11.0 } else { 250.0 + i as f64 }).collect();
    let q = quantile_heuristics(&base, &var, 0.05, 0.95).unwrap();
    ensure!((q.baseline[2] - 200.0).abs() < 1e-6, "baseline Q_H {}", q.baseline[2]);
    ensure!((q.dp_high - 3.0).abs() < TOL, "dp_high {}", q.dp_high);
    pass(format!("shifts +10%/+10%/-10%, dp_high {:+.1} pp", q.dp_high))
}

fn c7_utility() -> Check {
    let data = toy_census(600, 31).unwrap();
    let (train, test) = split(&data, SplitSpec::new(0.75, 2).unwrap()).unwrap();
    let scores = utility::tstr_trtr(&train, &test, &train, &utility::default_learners(), "income", 4).unwrap();
    for m in Metric::ALL {
        ensure!(scores.gap(m) == Some(0.0), "gap {} = {:?}", m.name(), scores.gap(m));
    }

    let mut rng = seed::rng(77);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let (n, d, k) = (20, 4, 3);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
        let x = EncodedMatrix::from_rows(&rows).unwrap();
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let w: Vec<Vec<f64>> = (0..k).map(|_| (0..=d).map(|_| rng.random::<f64>() - 0.5).collect()).collect();
        let (_, g) = loss_and_gradient(&w, &x, &y, 1e-3);
        let h = 1e-6;
        for c in 0..k {
            for j in 0..=d {
                let (mut wp, mut wm) = (w.clone(), w.clone());
                wp[c][j] += h;
                wm[c][j] -= h;
                let fd = (loss_and_gradient(&wp, &x, &y, 1e-3).0 - loss_and_gradient(&wm, &x, &y, 1e-3).0) / (2.0 * h);
                let err = (fd - g[c][j]).abs();
                if err > 1e-10 {
                    worst = worst.max(err / g[c][j].abs());
                }
            }
        }
    }
    ensure!(worst < 1e-6, "gradient relative error {worst:e}");

    let s = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
    let y = [false, false, false, true, true, true];
    let inverted: Vec<bool> = y.iter().map(|b| !b).collect();
    let perfect = roc_auc(&s, &y).unwrap();
    let flipped = roc_auc(&s, &inverted).unwrap();
    let flat = roc_auc(&[0.5; 6], &y).unwrap();
    ensure!((perfect, flipped, flat) == (1.0, 0.0, 0.5), "AUC {perfect}/{flipped}/{flat}");
    pass(format!("five gaps 0, gradient rel err {worst:.1e}, AUC 1/0/0.5"))
}

fn c8_aia() -> Check {
    let mut rng = seed::rng(0xACCE_0008);
    let n = 200;
    let mut x: Vec<f64> = (0..n).map(|i| i as f64).collect();
    x.reverse();
    let y: Vec<&str> = (0..n).map(|_| ["a", "b", "c"][rng.random_range(0..3)]).collect();
    let specs = || vec![ColumnSpec::numeric("x"), ColumnSpec::categorical("y").with_role(ColumnRole::Target)];
    let t = table(specs(), vec![ColumnData::Numeric(x), labels(&y)]);
    let qi = ["x".to_string()];
    let same = aia_classification(&t, &t, &qi, "y", None).unwrap();
    ensure!(same.score == 1.0, "1-NN accuracy on synth == eval {}", same.score);

    let n = 1000;
    let draw = |rng: &mut seed::Rng| {
        let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let y: Vec<&str> = (0..n).map(|_| if rng.random_bool(0.5) { "a" } else { "b" }).collect();
        table(specs(), vec![ColumnData::Numeric(x), labels(&y)])
    };
    let (s, e) = (draw(&mut rng), draw(&mut rng));
    let indep = aia_classification(&s, &e, &qi, "y", None).unwrap();
    let sigma = (0.25 / n as f64).sqrt();
    ensure!((indep.score - 0.5).abs() <= 3.0 * sigma, "independent target accuracy {}", indep.score);

    let linear = |rng: &mut seed::Rng, lo: f64, hi: f64| {
        let a: Vec<f64> = (0..300).map(|_| rng.random_range(lo..hi)).collect();
        let b: Vec<f64> = (0..300).map(|_| rng.random_range(lo..hi)).collect();
        let c: Vec<f64> = a.iter().zip(&b).map(|(a, b)| 3.0 * a - 2.0 * b + 1.0).collect();
        table(
            vec![ColumnSpec::numeric("a"), ColumnSpec::numeric("b"), ColumnSpec::numeric("c")],
            vec![ColumnData::Numeric(a), ColumnData::Numeric(b), ColumnData::Numeric(c)],
        )
    };
    let (s, e) = (linear(&mut rng, 0.0, 10.0), linear(&mut rng, 1.0, 9.0));
    let ols = aia_regression(&s, &e, &["a".into(), "b".into()], "c").unwrap();
    ensure!((ols.score - 1.0).abs() < 1e-9, "OLS R2 {}", ols.score);
    pass(format!("1-NN 1.0, independent {:.3} (chance 0.5 +/- {:.3}), R2 {}", indep.score, 3.0 * sigma, ols.score))
}

fn census_schema_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/census.schema.toml")
}

fn c9_determinism() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let real = toy_census(300, 41).unwrap();
    real.save_csv(dir.path().join("real.csv")).unwrap();
    without_levels(&real, &[("workclass", "Never-worked")]).save_csv(dir.path().join("synth.csv")).unwrap();
    let schema = census_schema_path();
    let base = format!(
        "seed = 8\n[paths]\nreal = \"real.csv\"\nschema = {:?}\n{{extra}}\n[filter]\ntaus = [0.3, 0.15]\n\
         [privacy]\nquasi_identifiers = [\"sex\", \"race\", \"age\"]\nsensitive = [\"income\", \"hours\"]\n",
        schema.to_str().unwrap()
    );
    let write = |name: &str, extra: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, base.replace("{extra}", extra)).unwrap();
        p
    };
    let generated = write("gen.toml", "");
    let fixed = write("fixed.toml", "synthetic = \"synth.csv\"");
    let mut checked = Vec::new();
    for (cmd, cfg) in
        [("detect", &fixed), ("patch", &fixed), ("filter", &generated), ("sweep", &generated), ("eval", &fixed)]
    {
        let mut texts = Vec::new();
        for run in 0..2 {
            let out = dir.path().join(format!("{cmd}{run}"));
            let code = main_with_args(["synthpost", cmd, "-c", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
            ensure!(code == EXIT_OK || (cmd == "detect" && code == cli::EXIT_DETECTED), "{cmd} exited {code}");
            let report = std::fs::read_to_string(out.join("report.json")).map_err(|e| format!("{cmd}: {e}"))?;
            texts.push(cli::report::results_text(&report).unwrap());
        }
        ensure!(texts[0] == texts[1], "{cmd}: results blocks differ between runs");
        checked.push(cmd);
    }
    let report = dir.path().join("sweep0/report.json");
    let before = std::fs::read(dir.path().join("sweep0/summary_long.csv")).unwrap();
    ensure!(main_with_args(["synthpost", "report", report.to_str().unwrap()]) == EXIT_OK, "report command failed");
    ensure!(
        std::fs::read(dir.path().join("sweep0/summary_long.csv")).unwrap() == before,
        "report changed summary_long.csv"
    );
    checked.push("report");
    pass(format!("byte-identical results for {}", checked.join(", ")))
}

const ADULT_COLUMNS: [(&str, bool); 15] = [
    ("age", true),
    ("workclass", false),
    ("fnlwgt", true),
    ("education", false),
    ("education-num", true),
    ("marital-status", false),
    ("occupation", false),
    ("relationship", false),
    ("race", false),
    ("sex", false),
    ("capital-gain", true),
    ("capital-loss", true),
    ("hours-per-week", true),
    ("native-country", false),
    ("income", false),
];

fn load_adult(path: &Path) -> Result<Table, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'|'))
        .from_path(path)
        .map_err(|e| e.to_string())?;
    let mut rows: Vec<Vec<String>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        if rec.len() < ADULT_COLUMNS.len() {
            continue;
        }
        if rows.is_empty() && rec[0].parse::<f64>().is_err() {
            continue;
        }
        rows.push(rec.iter().take(ADULT_COLUMNS.len()).map(|s| s.trim_end_matches('.').to_string()).collect());
    }
    let mut specs = Vec::new();
    let mut cols = Vec::new();
    for (j, (name, numeric)) in ADULT_COLUMNS.iter().enumerate() {
        if *numeric {
            let v: Result<Vec<f64>, _> = rows.iter().map(|r| r[j].parse::<f64>()).collect();
            cols.push(ColumnData::Numeric(v.map_err(|e| format!("{name}: {e}"))?));
            specs.push(ColumnSpec::numeric(*name));
        } else {
            let v: Vec<&str> = rows.iter().map(|r| r[j].as_str()).collect();
            cols.push(labels(&v));
            let spec = ColumnSpec::categorical(*name);
            specs.push(match *name {
                "income" => spec.with_role(ColumnRole::Target),
                "sex" | "race" => spec.with_role(ColumnRole::QuasiIdentifier),
                _ => spec,
            });
        }
    }
    Table::new(TableSchema::new(specs).map_err(|e| e.to_string())?, cols).map_err(|e| e.to_string())
}

fn c10_adult() -> Check {
    let Some(path) = std::env::var_os("ADULT_CSV") else {
        return Ok(Outcome::Skip("ADULT_CSV not set".into()));
    };
    let adult = load_adult(Path::new(&path))?;
    let x = Standardizer::fit(&adult).unwrap().transform(&adult).unwrap();
    let density = neighbors::local_density_stats(&x, DensityQuery::Reference, 20).map_err(|e| e.to_string())?;
    let (mean_err, var_err) = ((density.mean / 6.14 - 1.0).abs(), (density.variance / 27.38 - 1.0).abs());

    let dir = tempfile::tempdir().unwrap();
    adult.save_csv(dir.path().join("adult.csv")).unwrap();
    let mut schema = String::new();
    for c in adult.schema().columns() {
        let kind = if c.kind == synthpost::tabular::ColumnKind::Numeric { "numeric" } else { "categorical" };
        let role = serde_json::to_value(c.role).unwrap();
        schema += &format!("[[columns]]\nname = \"{}\"\nkind = \"{kind}\"\nrole = {role}\n", c.name);
    }
    std::fs::write(dir.path().join("adult.schema.toml"), schema).unwrap();
    std::fs::write(
        dir.path().join("adult.toml"),
        "seed = 42\n[paths]\nreal = \"adult.csv\"\nschema = \"adult.schema.toml\"\noutput = \"out\"\n\
         [generator]\nkind = \"independent_marginals\"\n[filter]\ntaus = [0.4, 0.3, 0.2, 0.1]\n",
    )
    .unwrap();
    let cfg = dir.path().join("adult.toml");
    let code = main_with_args(["synthpost", "sweep", "-c", cfg.to_str().unwrap(), "--suites", "fidelity"]);
    ensure!(code == EXIT_OK, "sweep exited {code}");
    let out = dir.path().join("out");
    let total_js = std::fs::read_to_string(out.join("total_js.csv")).unwrap();
    let best = std::fs::read_to_string(out.join("best_by_family.csv")).unwrap();
    ensure!(total_js.lines().count() == 6, "total_js.csv has {} lines", total_js.lines().count());
    let families: Vec<&str> = best.lines().skip(1).filter_map(|l| l.split(',').next()).collect();
    ensure!(families == ["pearson", "cramers_v", "eta2"], "best_by_family families {families:?}");
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    ensure!(report["results"]["cells"].as_array().map_or(0, Vec::len) == 5, "sweep cells");
    ensure!(
        mean_err <= 0.05 && var_err <= 0.05,
        "density mean {:.3} (expected 6.14), variance {:.3} (expected 27.38)",
        density.mean,
        density.variance
    );
    pass(format!(
        "{} rows, density mean {:.3}, variance {:.3}, tables complete",
        adult.n_rows(),
        density.mean,
        density.variance
    ))
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 10] = [
        ("oracle equivalence", true, c1_oracle_equivalence),
        ("filter contract", true, c2_filter_contract),
        ("feasibility handling", true, c3_feasibility),
        ("mode repair", true, c4_mode_repair),
        ("metric identities", true, c5_metric_identities),
        ("quantile worked example", true, c6_quantile_example),
        ("utility harness", true, c7_utility),
        ("attribute inference sanity", true, c8_aia),
        ("CLI determinism", true, c9_determinism),
        ("Adult dataset (optional)", false, c10_adult),
    ];
    let mut failed = Vec::new();
    for (i, (name, gating, check)) in criteria.into_iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(Outcome::Pass(detail)) => report!("PASS [{:>2}] {name}: {detail}", i + 1),
            Ok(Outcome::Skip(detail)) => report!("SKIP [{:>2}] {name}: {detail}", i + 1),
            Err(detail) => {
                report!("FAIL [{:>2}] {name}: {detail}", i + 1);
                if gating {
                    failed.push(name);
                }
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
