//! Acceptance suite. Each check prints one PASS or FAIL line; any failure
//! makes the binary exit non-zero.

#[path = "../../core/tests/common/mod.rs"]
mod common;
mod support;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::fixtures::{direct_scores, mapping_fuzz, synth_of, toy_classification, toy_regression};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tabprompt_cli::pipeline::{REPORT, SYNTHETIC};
use tabprompt_cli::{cmd_run, RunManifest};
use tabprompt_core::backend::Tokenizer;
use tabprompt_core::codec::{encode_corpus, parse_row};
use tabprompt_core::mle::{evaluate_mle, fit_tree, grid_search_cv, Criterion, Grids, ModelParams, TreeParams};
use tabprompt_core::protocols::{baseline_descriptors, build_llm_guided_query, build_novel_mapping_query};
use tabprompt_core::table::{infer_schema, split};
use tabprompt_core::{
    generate_synthetic, Backend, Bounds, ColumnOrder, FinetuneConfig, GenParams, NGramBackend, SamplingPolicy, Table, Task,
};

type Check = Result<String, String>;
type NamedCheck = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

fn codec_round_trip() -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut rows, mut parses) = (0, 0);
    for schema_no in 0..50u64 {
        let (table, schema) = common::random_table(&mut rng, 25, 200);
        let ds = baseline_descriptors(&schema).map_err(|e| e.to_string())?;
        for order in [ColumnOrder::Fixed, ColumnOrder::Permuted] {
            let corpus = encode_corpus(&table, &ds, order, schema_no).map_err(|e| e.to_string())?;
            for (row, enc) in table.rows().iter().zip(&corpus) {
                let parsed = parse_row(&enc.text, &schema, &ds);
                ensure!(parsed.to_record(&schema).as_ref() == Some(row), "{:?} did not round-trip ({:?})", enc.text, parsed.reason);
                parses += 1;
            }
        }
        rows += table.n_rows();
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:.1?}");
    Ok(format!("{rows} rows over 50 schemas, {parses} parses in both orders, {elapsed:.1?}"))
}

fn split_law() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..100 {
        let n = rng.gen_range(2..400);
        let (table, _) = common::random_table(&mut rng, 4, n);
        let seed = rng.gen();
        let parts = split(&table, 0.9, seed).map_err(|e| e.to_string())?;
        let expected_train = 9 * n / 10;
        ensure!(parts.train.n_rows() == expected_train, "case {case}: {} train rows of {n}", parts.train.n_rows());
        ensure!(parts.test.n_rows() == n - expected_train, "case {case}: {} test rows of {n}", parts.test.n_rows());
        let all: BTreeSet<usize> = parts.train_indices.iter().chain(&parts.test_indices).copied().collect();
        ensure!(all.len() == n && all.iter().all(|&i| i < n), "case {case}: indices do not partition the rows");
        for (idx, part) in [(&parts.train_indices, &parts.train), (&parts.test_indices, &parts.test)] {
            for (&i, row) in idx.iter().zip(part.rows()) {
                ensure!(&table.rows()[i] == row, "case {case}: row {i} altered");
            }
        }
        ensure!(split(&table, 0.9, seed).unwrap() == parts, "case {case}: same seed gave a different split");
    }
    Ok("100 tables: sizes floor(0.9 n) / rest, disjoint and covering, reproducible".into())
}

fn protocol_templates() -> Check {
    let golden = |name: &str| {
        std::fs::read_to_string(format!("{}/../core/tests/golden/{name}.txt", env!("CARGO_MANIFEST_DIR"))).unwrap()
    };
    let e = |e: tabprompt_core::ProtocolError| e.to_string();
    let rendered = [
        ("llm_guided_single", build_llm_guided_query("magic", &["fAlpha"]).map_err(e)?.text),
        ("llm_guided_many", build_llm_guided_query("magic", &["fLength", "fWidth", "fAlpha", "class"]).map_err(e)?.text),
        ("novel_mapping_single", build_novel_mapping_query(&["[2, 9]"], "physics").map_err(e)?.text),
        ("novel_mapping_many", build_novel_mapping_query(&["[0.5, 12]", "{a, b}", "[-3, 3]"], "life sciences").map_err(e)?.text),
    ];
    for (name, text) in &rendered {
        ensure!(*text == golden(name), "{name} differs from its golden file");
    }
    let [ok, count, dup] = mapping_fuzz(50, 31)?;
    Ok(format!("4 golden queries byte-equal; 50 mapping responses ({ok} accepted, {count} count errors, {dup} duplicates)"))
}

fn ngram_memorization() -> Check {
    let colours = ["red", "green", "blue", "amber"];
    let rows: Vec<Vec<String>> = (0..20)
        .map(|i| vec![(i * 7 % 13).to_string(), colours[i / 3 % 4].to_string(), ["yes", "no"][usize::from(i % 3 == 0)].to_string()])
        .collect();
    let table = Table::new(vec!["size".into(), "colour".into(), "label".into()], rows).unwrap();
    let schema = infer_schema(&table, "label", None).map_err(|e| e.to_string())?;
    let ds = baseline_descriptors(&schema).map_err(|e| e.to_string())?;
    let corpus: Vec<String> = encode_corpus(&table, &ds, ColumnOrder::Fixed, 0).unwrap().into_iter().map(|r| r.text).collect();
    let longest = corpus.iter().map(|l| Tokenizer::Word.tokenize(l).len()).max().unwrap();
    let mut backend = NGramBackend::new(longest + 1, Tokenizer::Word);
    backend.finetune(&corpus, &FinetuneConfig::full_default()).map_err(|e| e.to_string())?;
    let policy = SamplingPolicy::new(2000, Some(2000), Bounds::None, 3).unwrap();
    let gen = GenParams::new(4 * longest, 1.0, 1, 17).unwrap();
    let synth = generate_synthetic(&backend, &schema, &ds, ColumnOrder::Fixed, &policy, &gen, None).map_err(|e| e.to_string())?;
    ensure!(synth.stats.attempts == 2000 && synth.stats.accepted == 2000, "stats {:?}", synth.stats);
    for row in synth.table.rows() {
        ensure!(table.rows().contains(row), "{row:?} is not a training row");
    }
    let mut worst = 0.0f64;
    for j in 1..3 {
        let real = common::histogram(table.column(j));
        let fake = common::histogram(synth.table.column(j));
        worst = worst.max(common::tv_distance(&real, &fake));
    }
    ensure!(worst <= 0.1, "categorical marginal TV {worst:.3}");
    Ok(format!("2000/2000 lines parse to training rows; max categorical TV {worst:.3}"))
}

fn tree_split_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for criterion in [Criterion::Gini, Criterion::Variance] {
        let task = if criterion == Criterion::Gini { Task::Classification } else { Task::Regression };
        for case in 0..200 {
            let n = rng.gen_range(2..=10);
            let xi: Vec<Vec<i64>> = (0..n).map(|_| vec![rng.gen_range(0..4), rng.gen_range(0..4), rng.gen_range(-2..2)]).collect();
            let yi: Vec<i64> = (0..n)
                .map(|_| if task == Task::Classification { rng.gen_range(0..3) } else { rng.gen_range(-5..6) })
                .collect();
            let x: Vec<Vec<f64>> = xi.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
            let y: Vec<f64> = yi.iter().map(|&v| v as f64).collect();
            let tree = fit_tree(&x, &y, &TreeParams::new(Some(1), 2, criterion), task).map_err(|e| e.to_string())?;
            let expected = common::oracle_root_split(&xi, &yi, criterion);
            ensure!(tree.root_split() == expected, "{criterion:?} case {case}: {:?} vs oracle {expected:?}", tree.root_split());
        }
    }
    Ok("200 gini + 200 variance root splits equal exhaustive exact search".into())
}

fn xor() -> Check {
    let x = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
    let y = vec![0.0, 1.0, 1.0, 0.0];
    let tree = fit_tree(&x, &y, &TreeParams::new(Some(2), 2, Criterion::Gini), Task::Classification).map_err(|e| e.to_string())?;
    let pred = tree.predict(&x).map_err(|e| e.to_string())?;
    ensure!(pred == y, "predicted {pred:?}");
    Ok("depth-2 gini tree reproduces XOR".into())
}

fn cv_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.gen_range(0..6) as f64, rng.gen_range(0..6) as f64]).collect();
    let y: Vec<f64> = x.iter().map(|r| f64::from(u8::from(r[0] + r[1] + rng.gen_range(-2.0..2.0) > 5.0))).collect();
    let mut grid = Vec::new();
    for depth in [Some(1), Some(2), None] {
        for min_split in [2, 10] {
            grid.push(ModelParams::DecisionTree(TreeParams::new(depth, min_split, Criterion::Gini)));
        }
    }
    let mut ties = 0;
    for seed in 0..10 {
        let cv = grid_search_cv(&x, &y, &grid, 5, seed, Task::Classification).map_err(|e| e.to_string())?;
        let (winner, means) = common::oracle_grid_search(&x, &y, &grid, 5, seed, Task::Classification);
        let got: Vec<f64> = cv.table.iter().map(|r| r.mean).collect();
        ensure!(cv.best_index == winner && got == means, "seed {seed}: cell {} vs oracle {winner}", cv.best_index);
        ties += usize::from(means.iter().filter(|&&m| m == means[winner]).count() > 1);
    }
    let twin = [grid[2], grid[2], grid[0]];
    let cv = grid_search_cv(&x, &y, &twin, 5, 3, Task::Classification).map_err(|e| e.to_string())?;
    let (winner, _) = common::oracle_grid_search(&x, &y, &twin, 5, 3, Task::Classification);
    ensure!(cv.best_index == winner && winner != 1, "tied twin cells: picked {}", cv.best_index);
    Ok(format!("3x2 grid on 30 rows, 10 seeds match enumeration ({ties} with tied cells) plus a forced tie"))
}

fn end_to_end() -> Check {
    let started = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let data = support::regression_csv(tmp.path(), 500, 1);
    let cfg = support::load(tmp.path(), &support::ngram_config(&data, "y", r#"kind = "baseline""#, ""));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let manifest = cmd_run(&cfg, &a).map_err(|e| e.to_string())?;
    cmd_run(&cfg, &b).map_err(|e| e.to_string())?;
    let synthetic = tabprompt_core::table::load_csv(a.join(SYNTHETIC), true).map_err(|e| e.to_string())?;
    ensure!(synthetic.n_rows() >= 100, "only {} synthetic rows", synthetic.n_rows());
    let report: serde_json::Value = serde_json::from_str(&support::read(a.join(REPORT))).unwrap();
    ensure!(report["metric"] == "mse", "metric {}", report["metric"]);
    let stats = manifest.sampling.as_ref().ok_or("no sampling stats in manifest")?;
    ensure!(stats.attempts == stats.accepted + stats.rejected(), "stats {stats:?}");
    ensure!(RunManifest::load(&a.join("manifest.json")).unwrap().status == "ok", "manifest not ok");
    for artifact in [SYNTHETIC, REPORT] {
        ensure!(support::read(a.join(artifact)) == support::read(b.join(artifact)), "{artifact} differs between runs");
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:.1?}");
    Ok(format!(
        "500-row regression: {} rows, {}/{} accepted, mse dt {:.3} rf {:.3}, rerun byte-identical, {elapsed:.1?} for both runs",
        synthetic.n_rows(),
        stats.accepted,
        stats.attempts,
        report["models"]["decision_tree"]["score"].as_f64().unwrap_or(f64::NAN),
        report["models"]["random_forest"]["score"].as_f64().unwrap_or(f64::NAN),
    ))
}

fn identity_oracle() -> Check {
    let mut lines = Vec::new();
    for (table, target) in [(toy_classification(), "label"), (toy_regression(), "y")] {
        let parts = split(&table, 0.9, 13).unwrap();
        let schema = infer_schema(&table, target, None).unwrap();
        let grids = Grids::default_for(schema.task, 4);
        let report = evaluate_mle(&synth_of(parts.train.clone()), &parts.test, &schema, &grids, 6).map_err(|e| e.to_string())?;
        let (dt, rf) = direct_scores(&parts.train, &parts.test, target, &grids, 6);
        let (got_dt, got_rf) = (report.models.decision_tree.score, report.models.random_forest.score);
        ensure!(got_dt.to_bits() == dt.to_bits() && got_rf.to_bits() == rf.to_bits(), "{target}: ({got_dt}, {got_rf}) vs ({dt}, {rf})");
        lines.push(format!("{target} dt {dt:.4} rf {rf:.4}"));
    }
    Ok(format!("synthetic = real train is bit-identical to direct fit ({})", lines.join("; ")))
}

fn main() {
    let checks: [NamedCheck; 9] = [
        ("codec round-trip", codec_round_trip),
        ("seeded split", split_law),
        ("descriptor query templates and mapping parser", protocol_templates),
        ("n-gram memorization", ngram_memorization),
        ("tree split oracle", tree_split_oracle),
        ("XOR", xor),
        ("cross-validation oracle", cv_oracle),
        ("end-to-end run", end_to_end),
        ("identity MLE oracle", identity_oracle),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS [{}/{}] {name}: {detail}", i + 1, checks.len()),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}/{}] {name}: {why}", i + 1, checks.len());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
