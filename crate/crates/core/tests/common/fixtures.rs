//! Shared datasets, fuzz corpora and reference pipelines.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tabprompt_core::codec::sanitize_descriptor;
use tabprompt_core::mle::{grid_search_cv, score, FeatureEncoder, Grids, Metric, ModelParams};
use tabprompt_core::protocols::parse_mapping_response;
use tabprompt_core::synth::{Provenance, SamplingStats};
use tabprompt_core::table::infer_schema;
use tabprompt_core::{Bounds, ColumnOrder, GenParams, ProtocolError, ProtocolTag, SamplingPolicy, SyntheticTable, Table, Task};

const POOL: &[&str] = &[
    "gravitational redshift",
    "Gravitational  redshift",
    "photon energy",
    "spin, parity",
    "spin parity",
    "neutrino flux",
    "tidal force",
    "magnetic rigidity",
    "what is mass",
    "Hubble constant",
];

pub struct MappingCase {
    pub response: String,
    pub columns: Vec<String>,
    pub suggestions: Vec<String>,
}

/// A mapping response with random numbering, padding, blank lines and a
/// suggestion count that is sometimes off by one.
pub fn mapping_case(rng: &mut impl Rng) -> MappingCase {
    let n: usize = rng.gen_range(1..=5);
    let columns: Vec<String> = (1..=n).map(|i| format!("col{i}")).collect();
    let count = match rng.gen_range(0..4) {
        0 => n.saturating_sub(1),
        1 => n + 1,
        _ => n,
    };
    let suggestions: Vec<String> = (0..count).map(|_| POOL.choose(rng).unwrap().to_string()).collect();
    let mut lines = Vec::new();
    for (i, s) in suggestions.iter().enumerate() {
        if rng.gen_bool(0.3) {
            lines.push(String::new());
        }
        let pad = if rng.gen_bool(0.3) { "  " } else { "" };
        lines.push(if rng.gen_bool(0.5) { format!("{pad}{}. {s}{pad}", i + 1) } else { format!("{pad}{s}") });
    }
    MappingCase { response: lines.join("\n"), columns, suggestions }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MappingOutcome {
    Accepted,
    CountMismatch,
    Duplicate,
}

/// Parses one case and checks the result against what the case should produce.
pub fn check_mapping_case(case: &MappingCase) -> Result<MappingOutcome, String> {
    let keys: Vec<String> = case.suggestions.iter().map(|s| sanitize_descriptor(s)).collect();
    let unique = keys.iter().collect::<HashSet<_>>().len() == keys.len();
    let same_len = case.suggestions.len() == case.columns.len();
    match parse_mapping_response(&case.response, &case.columns) {
        Err(ProtocolError::CountMismatch { expected, got }) => {
            if (expected, got) != (case.columns.len(), case.suggestions.len()) || same_len {
                return Err(format!("bad count mismatch {expected}/{got}"));
            }
            Ok(MappingOutcome::CountMismatch)
        }
        Err(ProtocolError::Duplicate(d)) => {
            if !same_len || unique {
                return Err(format!("spurious duplicate {d:?}"));
            }
            Ok(MappingOutcome::Duplicate)
        }
        Ok(set) => {
            if !same_len || !unique {
                return Err("invalid response accepted".into());
            }
            if set.protocol() != ProtocolTag::NovelMapping
                || set.descriptors().collect::<Vec<_>>() != keys.iter().map(String::as_str).collect::<Vec<_>>()
                || set.columns().collect::<Vec<_>>() != case.columns.iter().map(String::as_str).collect::<Vec<_>>()
            {
                return Err(format!("wrong mapping {set:?}"));
            }
            Ok(MappingOutcome::Accepted)
        }
        Err(other) => Err(format!("unexpected {other:?}")),
    }
}

/// Runs `n` seeded cases; every outcome kind must show up at least once.
pub fn mapping_fuzz(n: usize, seed: u64) -> Result<[usize; 3], String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = [0; 3];
    for case_no in 0..n {
        let case = mapping_case(&mut rng);
        let outcome = check_mapping_case(&case).map_err(|e| format!("case {case_no}: {e}"))?;
        tally[outcome as usize] += 1;
    }
    if tally.contains(&0) {
        return Err(format!("corpus lacks variety: {tally:?}"));
    }
    Ok(tally)
}

pub fn toy_classification() -> Table {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let rows = (0..80)
        .map(|_| {
            let a: f64 = rng.gen_range(0.0..10.0);
            let c = ["u", "v", "w"][rng.gen_range(0..3)];
            let label = if a > 5.0 || c == "w" { "hi" } else { "lo" };
            vec![format!("{a:.2}"), c.to_string(), label.to_string()]
        })
        .collect();
    Table::new(vec!["a".into(), "c".into(), "label".into()], rows).unwrap()
}

pub fn toy_regression() -> Table {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let rows = (0..80)
        .map(|_| {
            let a: f64 = rng.gen_range(0.0..10.0);
            let b: f64 = rng.gen_range(0.0..1.0);
            vec![format!("{a:.3}"), format!("{b:.3}"), format!("{:.3}", 2.0 * a - b + rng.gen_range(-0.5..0.5))]
        })
        .collect();
    Table::new(vec!["a".into(), "b".into(), "y".into()], rows).unwrap()
}

/// Default grids cut down to keep debug builds quick.
pub fn small_grids(task: Task) -> Grids {
    let mut g = Grids::default_for(task, 4);
    g.random_forest.retain(|p| p.n_trees == 50);
    g.random_forest.truncate(3);
    for p in &mut g.random_forest {
        p.n_trees = 10;
    }
    g
}

/// Wraps real rows as if a generator had produced them.
pub fn synth_of(table: Table) -> SyntheticTable {
    SyntheticTable {
        table,
        provenance: Provenance {
            protocol: ProtocolTag::Baseline,
            backend: "identity".into(),
            finetune: None,
            gen: GenParams::new(1, 1.0, 1, 0).unwrap(),
            policy: SamplingPolicy::new(1, None, Bounds::None, 0).unwrap(),
            prompt_order: ColumnOrder::Fixed,
        },
        stats: SamplingStats::default(),
    }
}

pub fn concat(a: &Table, b: &Table) -> Table {
    let rows = a.rows().iter().chain(b.rows()).cloned().collect();
    Table::new(a.columns().to_vec(), rows).unwrap()
}

/// Direct path: encode, cross-validate, refit and score without the MLE driver.
/// Returns (decision tree, random forest) test scores.
pub fn direct_scores(train: &Table, test: &Table, target: &str, grids: &Grids, seed: u64) -> (f64, f64) {
    let schema = infer_schema(&concat(train, test), target, None).unwrap();
    let enc = FeatureEncoder::new(&schema, train).unwrap();
    let (x, y) = (enc.features(train).unwrap(), enc.targets(train).unwrap());
    let (xt, yt) = (enc.features(test).unwrap(), enc.targets(test).unwrap());
    let run = |grid: Vec<ModelParams>| {
        let cv = grid_search_cv(&x, &y, &grid, grids.cv_folds, seed, schema.task).unwrap();
        let pred = cv.best.fit_predict(&x, &y, &xt, schema.task).unwrap();
        score(Metric::for_task(schema.task), &pred, &yt)
    };
    (
        run(grids.decision_tree.iter().copied().map(ModelParams::DecisionTree).collect()),
        run(grids.random_forest.iter().copied().map(ModelParams::RandomForest).collect()),
    )
}
