//! Acceptance criteria, one PASS/FAIL line each. Run with
//! `cargo test -p lfsd-cli --test acceptance`.
//!
//! Statistical criteria use the Bretagnolle–Huber–Carol bound: for an
//! empirical distribution of n draws over k cells,
//! P(TVD > ε) ≤ δ when ε = ½·sqrt(2·ln((2^k − 2)/δ) / n).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lfsd_core::affix::AffixRule;
use lfsd_core::checks::{codes, expectation_statement, DocBundle, DocStatus, Verdict};
use lfsd_core::config::{MitigationStep, PipelineConfig};
use lfsd_core::dataset::{Cell, Column, Dataset, Day, Number};
use lfsd_core::fidelity::{compare_margin, pairwise_association};
use lfsd_core::pipeline::{apply_mitigations, FullReport, Inputs};
use lfsd_core::risk::{classify_risky_records, KeySpec, RiskClass};
use lfsd_core::schema::{infer_schema, ColumnSpec, TableSchema};
use lfsd_core::sdc::{category_counts, pool_categories, top_bottom_code, CodingMode};
use lfsd_core::synthesis::{synth_from_margins, synth_from_metadata, Method, SynthesisConfig};
use lfsd_core::transform::TransformSpec;

const DELTA: f64 = 0.01;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn epsilon(k: usize, n: usize, delta: f64) -> f64 {
    let cells = 2f64.powi(k as i32) - 2.0;
    0.5 * (2.0 * (cells / delta).ln() / n as f64).sqrt()
}

fn affix() -> AffixRule {
    AffixRule::default()
}

fn labels(name: &str, values: &[&str]) -> Column {
    Column::new(name, values.iter().map(|v| Cell::label(*v)).collect())
}

fn numbers(name: &str, values: &[f64]) -> Column {
    Column::new(name, values.iter().map(|v| Cell::number(*v)).collect())
}

// ---------------------------------------------------------------------------
// Risk oracle

/// Cell equality written independently of the library's canonical keys.
fn same_cell(a: &Cell, b: &Cell) -> bool {
    match (a, b) {
        (Cell::Missing, Cell::Missing) => true,
        (Cell::Label(x), Cell::Label(y)) => x == y,
        (Cell::Number(x), Cell::Number(y)) => x.value == y.value,
        (Cell::Date(x), Cell::Date(y)) => x == y,
        _ => false,
    }
}

fn same_row(a: &[&Cell], b: &[&Cell]) -> bool {
    a.iter().zip(b).all(|(x, y)| same_cell(x, y))
}

fn key_rows(data: &Dataset, names: &[String]) -> Vec<Vec<Cell>> {
    let cols: Vec<&Column> = names.iter().map(|n| data.column(n).expect("key column")).collect();
    (0..data.n_rows()).map(|r| cols.iter().map(|c| c.cells[r].clone()).collect()).collect()
}

struct OracleCounts {
    synth_unique: Vec<usize>,
    unique_in_original: Vec<usize>,
    replicated: Vec<usize>,
}

fn brute_force(synth: &Dataset, original: &Dataset, keys: &[String], threshold: usize) -> OracleCounts {
    let synth_keys: Vec<String> = keys.iter().map(|k| affix().apply(k)).collect();
    let s = key_rows(synth, &synth_keys);
    let o = key_rows(original, keys);
    let mut out = OracleCounts {
        synth_unique: Vec::new(),
        unique_in_original: Vec::new(),
        replicated: Vec::new(),
    };
    for (i, row) in s.iter().enumerate() {
        let r: Vec<&Cell> = row.iter().collect();
        let in_synth = s.iter().filter(|x| same_row(&x.iter().collect::<Vec<_>>(), &r)).count();
        if in_synth > threshold {
            continue;
        }
        out.synth_unique.push(i);
        let in_orig = o.iter().filter(|x| same_row(&x.iter().collect::<Vec<_>>(), &r)).count();
        if in_orig >= 1 {
            out.unique_in_original.push(i);
        }
        if in_orig == 1 {
            out.replicated.push(i);
        }
    }
    out
}

/// A cell from a small alphabet mixing kinds; numbers are written with
/// varying decimals so equal values have different text.
fn random_cell(rng: &mut ChaCha8Rng, alphabet: usize, kind: usize) -> Cell {
    if rng.gen_bool(0.08) {
        return Cell::Missing;
    }
    let v = rng.gen_range(0..alphabet);
    match kind {
        0 => Cell::label(format!("c{v}")),
        1 => Cell::Number(Number::new(v as f64, rng.gen_range(0..3))),
        _ => Cell::Date(shift(Day::from_ymd(2000, 1, 1).unwrap(), v as i64)),
    }
}

/// Random original/synthetic pair with key columns `k0..`; some synthetic
/// rows are copied from the original so every class is populated.
fn random_instance(rng: &mut ChaCha8Rng) -> (Dataset, Dataset, Vec<String>) {
    let n_keys = rng.gen_range(1..=4);
    let n_orig = rng.gen_range(1..=500);
    let n_synth = rng.gen_range(1..=500);
    let specs: Vec<(usize, usize)> = (0..n_keys).map(|_| (rng.gen_range(1..=7), rng.gen_range(0..3))).collect();
    let keys: Vec<String> = (0..n_keys).map(|i| format!("k{i}")).collect();
    let orig_rows: Vec<Vec<Cell>> = (0..n_orig)
        .map(|_| specs.iter().map(|(a, kind)| random_cell(rng, *a, *kind)).collect())
        .collect();
    let copy_rate = rng.gen_range(0.0..0.6);
    let synth_rows: Vec<Vec<Cell>> = (0..n_synth)
        .map(|_| {
            if rng.gen_bool(copy_rate) {
                let mut row = orig_rows[rng.gen_range(0..n_orig)].clone();
                // Same value, different written precision.
                for cell in &mut row {
                    if let Cell::Number(n) = cell {
                        n.decimals = rng.gen_range(0..3);
                    }
                }
                row
            } else {
                specs.iter().map(|(a, kind)| random_cell(rng, *a, *kind)).collect()
            }
        })
        .collect();
    let build = |rows: &[Vec<Cell>], names: &[String]| {
        Dataset::new(
            names
                .iter()
                .enumerate()
                .map(|(j, n)| Column::new(n.clone(), rows.iter().map(|r| r[j].clone()).collect()))
                .collect(),
        )
        .unwrap()
    };
    let synth_names: Vec<String> = keys.iter().map(|k| affix().apply(k)).collect();
    (build(&orig_rows, &keys), build(&synth_rows, &synth_names), keys)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let instances = 1000;
    let mut populated = [0usize; 3];
    for i in 0..instances {
        let (original, synth, keys) = random_instance(&mut rng);
        let threshold = if i % 4 == 3 { rng.gen_range(2..=4) } else { 1 };
        let report = classify_risky_records(&synth, &original, &KeySpec::new(&keys), &affix(), threshold).unwrap();
        let oracle = brute_force(&synth, &original, &keys, threshold);
        let agree = report.synth_unique_rows == oracle.synth_unique
            && report.unique_in_original_rows == oracle.unique_in_original
            && report.replicated_unique_rows == oracle.replicated
            && report.n_synth_unique == oracle.synth_unique.len()
            && report.n_unique_in_original == oracle.unique_in_original.len()
            && report.n_replicated_unique == oracle.replicated.len()
            && report.n_synth == synth.n_rows();
        if !agree {
            return outcome(false, format!("instance {i} disagrees with the brute-force oracle"));
        }
        for (slot, rows) in [&oracle.synth_unique, &oracle.unique_in_original, &oracle.replicated].iter().enumerate() {
            populated[slot] += usize::from(!rows.is_empty());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        secs < 60.0 && populated.iter().all(|&p| p > 0),
        format!(
            "{instances} random instances match the O(n²) oracle in {secs:.1}s (non-empty classes: {populated:?})"
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..1000 {
        let (original, synth, keys) = random_instance(&mut rng);
        let spec = KeySpec::new(&keys);
        let one = classify_risky_records(&synth, &original, &spec, &affix(), 1).unwrap();
        let three = classify_risky_records(&synth, &original, &spec, &affix(), 3).unwrap();
        let subset = |a: &[usize], b: &[usize]| a.iter().all(|x| b.binary_search(x).is_ok());
        let nested = subset(&one.replicated_unique_rows, &one.unique_in_original_rows)
            && subset(&one.unique_in_original_rows, &one.synth_unique_rows)
            && subset(&three.replicated_unique_rows, &three.unique_in_original_rows)
            && subset(&three.unique_in_original_rows, &three.synth_unique_rows);
        let monotone = subset(&one.synth_unique_rows, &three.synth_unique_rows)
            && subset(&one.unique_in_original_rows, &three.unique_in_original_rows)
            && subset(&one.replicated_unique_rows, &three.replicated_unique_rows);
        if !nested || !monotone {
            return outcome(false, format!("instance {i}: nested={nested} monotone={monotone}"));
        }
    }
    outcome(true, "replicated ⊆ unique-in-original ⊆ synth-unique; every class grows from threshold 1 to 3 (1000 instances)")
}

// ---------------------------------------------------------------------------
// Margins and independence

/// 200 rows: a skewed categorical (A:120 B:50 C:20 D:10) and a numeric
/// column concentrated on 20..29 with a sparse tail over 0..=100.
fn margin_fixture() -> Dataset {
    let mut grade = Vec::new();
    for (label, count) in [("A", 120), ("B", 50), ("C", 20), ("D", 10)] {
        grade.extend(std::iter::repeat(label).take(count));
    }
    let mut age: Vec<f64> = (0..150).map(|i| 20.0 + (i % 10) as f64).collect();
    age.extend((0..50).map(|i| (i * 2) as f64));
    age[199] = 100.0;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    age.shuffle(&mut rng);
    Dataset::new(vec![labels("grade", &grade), numbers("age", &age)]).unwrap()
}

/// Ten bins of width 10 over [0, 100]; 100 falls in the last bin.
fn age_bin(v: f64) -> usize {
    ((v / 10.0).floor() as usize).min(9)
}

fn tvd_vec(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

fn criterion_3() -> Outcome {
    let original = margin_fixture();
    let schema = infer_schema(&original).unwrap();
    let n_orig = original.n_rows() as f64;
    let n = 50 * original.n_rows();
    let seeds = 1000;

    // Exact distance between the uniform metadata draw and the original.
    let p_grade = [120.0 / n_orig, 50.0 / n_orig, 20.0 / n_orig, 10.0 / n_orig];
    let gap_grade = tvd_vec(&p_grade, &[0.25; 4]);
    let mut p_age = [0.0; 10];
    for v in original.column("age").unwrap().cells.iter().filter_map(Cell::as_f64) {
        p_age[age_bin(v)] += 1.0 / n_orig;
    }
    let mut u_age = [0.0; 10];
    for v in 0..=100 {
        u_age[age_bin(v as f64)] += 1.0 / 101.0;
    }
    let gap_age = tvd_vec(&p_age, &u_age);

    let columns = [("grade", 4, gap_grade), ("age", 10, gap_age)];
    let mut margins_ok = [0usize; 2];
    let mut metadata_ok = [0usize; 2];
    for seed in 0..seeds {
        let margins = synth_from_margins(&original, &SynthesisConfig::new(Method::FromMargins, n, seed)).unwrap();
        let metadata = synth_from_metadata(&schema, &SynthesisConfig::new(Method::FromMetadata, n, seed)).unwrap();
        for (j, (name, k, gap)) in columns.iter().enumerate() {
            let eps = epsilon(*k, n, DELTA);
            let m = compare_margin(&original, &margins, name, None, &affix()).unwrap().value;
            let u = compare_margin(&original, &metadata, name, None, &affix()).unwrap().value;
            margins_ok[j] += usize::from(m < eps);
            metadata_ok[j] += usize::from(u > gap - eps);
        }
    }
    let need = (seeds as f64 * 0.99).ceil() as usize;
    let passed = margins_ok.iter().chain(&metadata_ok).all(|&c| c >= need);
    outcome(
        passed,
        format!(
            "n={n}: from_margins under ε in {margins_ok:?}/{seeds} seeds (ε grade {:.4}, age {:.4}); \
             from_metadata above floor in {metadata_ok:?}/{seeds} (floors {:.3}, {:.3})",
            epsilon(4, n, DELTA),
            epsilon(10, n, DELTA),
            gap_grade - epsilon(4, n, DELTA),
            gap_age - epsilon(10, n, DELTA),
        ),
    )
}

fn criterion_4() -> Outcome {
    let bits: Vec<&str> = (0..200).map(|i| if i % 2 == 0 { "0" } else { "1" }).collect();
    let original = Dataset::new(vec![labels("a", &bits), labels("b", &bits)]).unwrap();
    let closed_form = pairwise_association(&original, "a", "b", None).unwrap();
    if (closed_form - 0.5).abs() > 1e-12 {
        return outcome(false, format!("diagonal joint gave {closed_form}, expected 0.5"));
    }
    // TVD(joint, product of margins) ≤ TVD(joint, truth) + TVD(a, truth) +
    // TVD(b, truth); each bound holds with probability 1 − δ/3.
    let n = 10_000;
    let bound = epsilon(4, n, DELTA / 3.0) + 2.0 * epsilon(2, n, DELTA / 3.0);
    let seeds = 1000;
    let mut below = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..seeds {
        let synth = synth_from_margins(&original, &SynthesisConfig::new(Method::FromMargins, n, seed)).unwrap();
        let value = pairwise_association(&synth, "synth_a", "synth_b", None).unwrap();
        worst = worst.max(value);
        below += usize::from(value < bound);
    }
    outcome(
        below * 100 >= seeds as usize * 99,
        format!("original a=b: 0.5; from_margins below {bound:.4} in {below}/{seeds} seeds (max {worst:.4})"),
    )
}

// ---------------------------------------------------------------------------
// Transforms

fn dates_fixture() -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let start = Day::from_ymd(2010, 1, 1).unwrap();
    let mut diagnosis = Vec::new();
    let mut death = Vec::new();
    for _ in 0..400 {
        let d = shift(start, rng.gen_range(0..1800));
        diagnosis.push(Cell::Date(d));
        death.push(if rng.gen_bool(0.2) {
            Cell::Missing
        } else {
            Cell::Date(shift(d, rng.gen_range(0..2500)))
        });
    }
    Dataset::new(vec![Column::new("diagnosis", diagnosis), Column::new("death", death)]).unwrap()
}

fn count_inverted(data: &Dataset) -> usize {
    let a = &data.column("synth_diagnosis").unwrap().cells;
    let b = &data.column("synth_death").unwrap().cells;
    a.iter()
        .zip(b)
        .filter(|(x, y)| matches!((x, y), (Cell::Date(x), Cell::Date(y)) if y < x))
        .count()
}

fn shift(day: Day, days: i64) -> Day {
    Day(day.0 + days)
}

fn criterion_5() -> Outcome {
    let original = dates_fixture();
    let n = 10_000;
    let with = SynthesisConfig::new(Method::FromMargins, n, 2024)
        .with_transforms(vec![TransformSpec::date_pair("diagnosis", "death")]);
    let inverted_with = count_inverted(&synth_from_margins(&original, &with).unwrap());

    // Independent resampling: P(death < diagnosis) over the product of the
    // two empirical margins (missing counts toward neither).
    let a = &original.column("diagnosis").unwrap().cells;
    let b = &original.column("death").unwrap().cells;
    let mut hits = 0usize;
    for x in a {
        for y in b {
            if let (Cell::Date(x), Cell::Date(y)) = (x, y) {
                hits += usize::from(y < x);
            }
        }
    }
    let p = hits as f64 / (a.len() * b.len()) as f64;
    let expected = n as f64 * p;
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    let without = SynthesisConfig::new(Method::FromMargins, n, 2024);
    let inverted_without = count_inverted(&synth_from_margins(&original, &without).unwrap());
    let within = (inverted_without as f64 - expected).abs() <= 3.0 * sigma;
    outcome(
        inverted_with == 0 && within,
        format!(
            "with transform {inverted_with}/{n} inverted; without {inverted_without} (expected {expected:.0} ± {:.0})",
            3.0 * sigma
        ),
    )
}

// ---------------------------------------------------------------------------
// Mitigations

fn nearest_rank_oracle(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((p / 100.0) * v.len() as f64).ceil() as usize;
    v[rank.max(1).min(v.len()) - 1]
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut max_passes = 0;
    for i in 0..200 {
        let (original, _, keys) = random_instance(&mut rng);
        let n_synth = rng.gen_range(1..=500);
        let synth = synth_from_margins(&original, &SynthesisConfig::new(Method::FromMargins, n_synth, i)).unwrap();
        let threshold = rng.gen_range(1..=3);
        let class = if i % 2 == 0 {
            RiskClass::ReplicatedUnique
        } else {
            RiskClass::UniqueInOriginal
        };
        let mut config = PipelineConfig::empty(Method::FromMargins, n_synth);
        config.keys = KeySpec::new(&keys);
        config.policy.synth_count_threshold = threshold;
        config.mitigations = vec![MitigationStep::RemoveRecords { class: Some(class) }];
        let inputs = Inputs {
            original_schema: infer_schema(&original).unwrap(),
            original: Some(original.clone()),
            original_reference: "fixture".into(),
        };
        let mitigated = apply_mitigations(&config, &inputs, synth).unwrap();
        let passes = mitigated.trail.len();
        max_passes = max_passes.max(passes);
        let fresh = brute_force(&mitigated.data, &original, &keys, threshold);
        let left = match class {
            RiskClass::ReplicatedUnique => fresh.replicated.len(),
            RiskClass::UniqueInOriginal => fresh.unique_in_original.len(),
        };
        if !mitigated.exhausted.is_empty() || passes > 10 || left > 0 {
            return outcome(false, format!("instance {i}: {passes} passes, {left} {class} left"));
        }
    }

    for i in 0..200 {
        let n_orig = rng.gen_range(5..300);
        let alphabet = rng.gen_range(2..40);
        let cats: Vec<String> = (0..n_orig)
            .map(|_| format!("v{}", (rng.gen_range(0.0f64..1.0).powi(3) * alphabet as f64) as usize))
            .collect();
        let refs: Vec<&str> = cats.iter().map(String::as_str).collect();
        let original = Dataset::new(vec![labels("x", &refs)]).unwrap();
        let synth = synth_from_margins(&original, &SynthesisConfig::new(Method::FromMargins, 500, i)).unwrap();
        let counts = category_counts(original.column("x").unwrap());
        let (pooled, _) = pool_categories(&synth, "synth_x", &counts, 5, "OTHER_POOLED").unwrap();
        let rare = pooled.column("synth_x").unwrap().cells.iter().find(|c| match c {
            Cell::Label(s) if s != "OTHER_POOLED" => cats.iter().filter(|x| *x == s).count() < 5,
            _ => false,
        });
        if let Some(cell) = rare {
            return outcome(false, format!("pooling instance {i} left rare category {cell}"));
        }
    }

    for i in 0..200 {
        let n = rng.gen_range(1..400);
        let values: Vec<f64> = (0..n).map(|_| (rng.gen_range(0.0f64..1.0).powi(4) * 1e5).round()).collect();
        let data = Dataset::new(vec![numbers("synth_income", &values)]).unwrap();
        let mode = CodingMode::Percentile { low: 1.0, high: 99.0 };
        let (coded, _) = top_bottom_code(&data, "synth_income", mode).unwrap();
        let (lo, hi) = (nearest_rank_oracle(&values, 1.0), nearest_rank_oracle(&values, 99.0));
        let outside = coded
            .column("synth_income")
            .unwrap()
            .cells
            .iter()
            .filter_map(Cell::as_f64)
            .filter(|v| *v < lo || *v > hi)
            .count();
        if outside > 0 {
            return outcome(false, format!("coding instance {i}: {outside} values outside [{lo}, {hi}]"));
        }
    }
    outcome(
        true,
        format!("removal reaches zero within {max_passes} pass(es); pooling at 5 and 1/99 coding hold on 200 instances each"),
    )
}

// ---------------------------------------------------------------------------
// End to end through the binary

fn lfsd(args: &[&str], cwd: &Path) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_lfsd"))
        .args(args)
        .current_dir(cwd)
        .env("LFSD_NO_COLOR", "1")
        .output()
        .expect("run lfsd");
    let text = format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
    (out.status.code().unwrap_or(-1), text)
}

/// 300 rows where every value of every column occurs at least 15 times.
fn census_csv(with_id: bool) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut out = String::from(if with_id { "id,sex,region,income,age\n" } else { "sex,region,income,age\n" });
    for i in 0..300 {
        if with_id {
            out.push_str(&format!("P{i:04},"));
        }
        let sex = ["F", "M"][i % 2];
        let region = ["north", "south", "east", "west"][(i / 2) % 4];
        let income = [20000, 30000, 40000, 50000][rng.gen_range(0..4)];
        let age = [20, 30, 40, 50, 60][i % 5];
        out.push_str(&format!("{sex},{region},{income},{age}\n"));
    }
    out
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
}

fn margins_config(data: &str, out: &str, keys: &[&str]) -> String {
    format!(
        "[paths]\noriginal_data = \"{data}\"\noutput_dir = \"{out}\"\n\n\
         [synthesis]\nmethod = \"from_margins\"\nn_synth = 1000\nseed = 11\n\n\
         [keys]\ncolumns = {keys:?}\n"
    )
}

fn metadata_schema(missing_allowed: bool) -> String {
    let schema = TableSchema::authored(
        vec![
            ColumnSpec::categorical("sex", &["F", "M"]),
            ColumnSpec::categorical("region", &["north", "south", "east", "west"]),
            ColumnSpec::numeric("income", 0.0, 100000.0, 0),
            ColumnSpec::categorical("smoker", &["yes", "no"]).with_missing(missing_allowed),
        ],
        300,
    );
    schema.to_text().unwrap()
}

fn metadata_config(metadata: &str, out: &str, missing_rate: f64) -> String {
    format!(
        "[paths]\noriginal_metadata = \"{metadata}\"\noutput_dir = \"{out}\"\n\n\
         [synthesis]\nmethod = \"from_metadata\"\nn_synth = 500\nseed = 3\nmetadata_missing_rate = {missing_rate}\n"
    )
}

fn find_file(dir: &Path, suffix: &str) -> PathBuf {
    fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok().map(|e| e.path()))
        .find(|p| p.to_string_lossy().ends_with(suffix))
        .unwrap_or_else(|| panic!("no *{suffix} in {}", dir.display()))
}

fn report_in(dir: &Path) -> FullReport {
    FullReport::from_toml(&fs::read_to_string(find_file(dir, "_report.toml")).unwrap()).unwrap()
}

fn bundle_in(dir: &Path) -> DocBundle {
    DocBundle::from_toml(&fs::read_to_string(find_file(dir, "_documentation.toml")).unwrap()).unwrap()
}

fn criterion_7() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write(&dir.join("census.csv"), &census_csv(false));
    write(&dir.join("census_ids.csv"), &census_csv(true));
    let mut notes = Vec::new();
    let mut ok = true;
    let mut expect = |cond: bool, note: String| {
        ok &= cond;
        notes.push(note);
    };

    // Passing release from margins.
    write(&dir.join("margins.toml"), &margins_config("census.csv", "good", &["sex", "region"]));
    let (code, text) = lfsd(&["pipeline", "--config", "margins.toml"], dir);
    let good = dir.join("good");
    let bundle = (code == 0).then(|| bundle_in(&good));
    let doc_ok = bundle
        .as_ref()
        .is_some_and(|b| b.expectation == expectation_statement(Method::FromMargins) && b.status == DocStatus::Final);
    expect(code == 0 && doc_ok, format!("margins exit {code}, doc ok {doc_ok}"));
    if code != 0 {
        eprintln!("{text}");
    }

    // Passing release from metadata alone.
    write(&dir.join("census_meta.schema.toml"), &metadata_schema(false));
    write(&dir.join("meta.toml"), &metadata_config("census_meta.schema.toml", "meta", 0.05));
    let (code, text) = lfsd(&["pipeline", "--config", "meta.toml"], dir);
    let doc_ok = code == 0 && bundle_in(&dir.join("meta")).expectation == expectation_statement(Method::FromMetadata);
    expect(code == 0 && doc_ok, format!("metadata exit {code}, doc ok {doc_ok}"));
    if code != 0 {
        eprintln!("{text}");
    }

    // Mislabelled artifacts: no synthetic token in the file name and an
    // unaffixed column.
    if good.exists() {
        let csv = fs::read_to_string(find_file(&good, "_synthetic.csv")).unwrap();
        let (header, body) = csv.split_once('\n').unwrap();
        write(&dir.join("census_2024.csv"), &format!("{}\n{body}", header.replace("synth_age", "age")));
        fs::copy(find_file(&good, ".schema.toml"), dir.join("census_2024.schema.toml")).unwrap();
        fs::copy(find_file(&good, "_documentation.toml"), dir.join("census_2024_documentation.toml")).unwrap();
        write(
            &dir.join("check.toml"),
            "[paths]\noriginal_data = \"census.csv\"\noutput_dir = \"bad\"\n\
             synthetic_data = \"census_2024.csv\"\nsynthetic_schema = \"census_2024.schema.toml\"\n\
             synthetic_documentation = \"census_2024_documentation.toml\"\n\n\
             [synthesis]\nmethod = \"from_margins\"\nn_synth = 1000\n\n[keys]\ncolumns = [\"sex\", \"region\"]\n",
        );
        let (code, _) = lfsd(&["check", "--config", "check.toml"], dir);
        let labelling = report_in(&dir.join("bad")).labelling;
        let codes_ok = labelling.verdict == Verdict::Fail
            && labelling.has_code(codes::LABEL_FILENAME)
            && labelling.has_code(codes::LABEL_AFFIX);
        expect(code == 2 && codes_ok, format!("mislabelled exit {code}, label codes {codes_ok}"));
    } else {
        expect(false, "mislabelled fixture skipped (no passing output)".into());
    }

    // Missingness allowed by the metadata but never generated.
    write(&dir.join("census_na.schema.toml"), &metadata_schema(true));
    write(&dir.join("na.toml"), &metadata_config("census_na.schema.toml", "na", 0.0));
    let (code, _) = lfsd(&["pipeline", "--config", "na.toml"], dir);
    let structure = report_in(&dir.join("na")).structure;
    let na_ok = structure.verdict == Verdict::Fail && structure.has_code(codes::MISSINGNESS_DISAGREE);
    expect(code == 2 && na_ok, format!("missingness exit {code}, flagged {na_ok}"));

    // A direct identifier as key.
    write(&dir.join("ids.toml"), &margins_config("census_ids.csv", "ids", &["id"]));
    let (code, _) = lfsd(&["pipeline", "--config", "ids.toml"], dir);
    let disclosure = report_in(&dir.join("ids")).disclosure;
    let id_ok = disclosure.verdict == Verdict::Fail && disclosure.has_code(codes::RISK_REPLICATED_UNIQUE);
    expect(code == 2 && id_ok, format!("id key exit {code}, disclosure fail {id_ok}"));

    outcome(ok, notes.join("; "))
}

fn criterion_8() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write(&dir.join("census.csv"), &census_csv(false));
    let mut config = margins_config("census.csv", "out", &["sex", "region"]);
    config.push_str("\n[[mitigations]]\nkind = \"top_bottom_code\"\ncolumn = \"income\"\npercentiles = [1.0, 99.0]\n");
    write(&dir.join("run.toml"), &config);
    let snapshot = |dir: &Path| -> BTreeMap<String, Vec<u8>> {
        fs::read_dir(dir)
            .unwrap()
            .map(|e| {
                let p = e.unwrap().path();
                (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
            })
            .collect()
    };
    let (first_code, _) = lfsd(&["pipeline", "--config", "run.toml"], dir);
    let first = snapshot(&dir.join("out"));
    let (second_code, _) = lfsd(&["pipeline", "--config", "run.toml"], dir);
    let second = snapshot(&dir.join("out"));
    let kinds = [".csv", ".schema.toml", "_report.toml"];
    let all_present = kinds.iter().all(|k| first.keys().any(|f| f.ends_with(k)));
    let differing: Vec<&String> = first.keys().filter(|k| first.get(*k) != second.get(*k)).collect();
    outcome(
        first_code == second_code && all_present && differing.is_empty(),
        format!("{} artifacts compared across two runs, differing: {differing:?}", first.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("risk classes match a brute-force oracle", criterion_1),
        ("risk classes nest and grow with the threshold", criterion_2),
        ("margins preserved by from_margins, not by from_metadata", criterion_3),
        ("from_margins breaks association", criterion_4),
        ("date-pair transform keeps event order", criterion_5),
        ("mitigations reach their targets", criterion_6),
        ("end-to-end exit codes and findings", criterion_7),
        ("runs are byte-identical", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let verdict = if result.passed { "PASS" } else { "FAIL" };
        failed += usize::from(!result.passed);
        println!(
            "{verdict} criterion {}: {name} — {} [{:.1}s]",
            i + 1,
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
