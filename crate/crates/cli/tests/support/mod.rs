//! Datasets and config files for driving the pipeline end to end.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tabprompt_cli::PipelineConfig;

/// `n` rows of `x1, x2, grade, y` with a numeric target driven by all three features.
pub fn regression_csv(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::from("x1,x2,grade,y\n");
    for _ in 0..n {
        let a: f64 = rng.gen_range(0.0..10.0);
        let b: f64 = rng.gen_range(-1.0..1.0);
        let g = rng.gen_range(0..3);
        let y = 2.0 * a - 3.0 * b + 1.5 * g as f64 + rng.gen_range(-0.5..0.5);
        text.push_str(&format!("{a:.2},{b:.2},{},{y:.2}\n", ["low", "mid", "high"][g]));
    }
    let path = dir.join("regression.csv");
    std::fs::write(&path, text).unwrap();
    path
}

/// `n` rows of `size, colour, label` with a categorical target.
pub fn classification_csv(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::from("size,colour,label\n");
    for _ in 0..n {
        let size = rng.gen_range(1..20);
        let colour = ["red", "green", "blue"][rng.gen_range(0..3)];
        let label = if size > 10 || colour == "blue" { "big" } else { "small" };
        text.push_str(&format!("{size},{colour},{label}\n"));
    }
    let path = dir.join("classes.csv");
    std::fs::write(&path, text).unwrap();
    path
}

/// Config text with the n-gram backend; `protocol` is the body of the `[protocol]` table.
pub fn ngram_config(data: &Path, target: &str, protocol: &str, extra: &str) -> String {
    format!(
        r#"[data]
path = "{}"
target = "{target}"
split_seed = 11

[protocol]
{protocol}

[encode]
seed = 12

[backend]
kind = "ngram"
order_k = 4

[generate]
seed = 13

[sampling]
seed = 14

[evaluate]
cv_seed = 15
forest_seed = 16
{extra}
"#,
        data.display()
    )
}

pub fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

pub fn load(dir: &Path, text: &str) -> PipelineConfig {
    PipelineConfig::load(&write_config(dir, text)).unwrap()
}

pub fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}
