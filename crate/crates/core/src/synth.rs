//! Rejection sampling of synthetic rows.
//!
//! Attempt `i` prompts the backend with a value-free prefix and seed both
//! derived from `i`, parses the returned text, and accepts or rejects it.
//! Attempts run in parallel batches but are tallied strictly in index order, so
//! the result depends only on the seeds, never on batch size or thread count.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{Backend, BackendError, FinetuneConfig, GenParams};
use crate::codec::{leading_descriptors, make_test_prompt_among, parse_row, CodecError, ColumnOrder, DescriptorSet, ParsedRow, ProtocolTag, RejectReason};
use crate::par;
use crate::rng::mix_seed;
use crate::table::{parse_finite, ColumnKind, Table, TableSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bounds {
    /// Any complete, type-correct row is accepted.
    #[default]
    None,
    /// Numeric values must lie in the column's observed range and categorical
    /// values must be known levels.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingPolicy {
    pub n_target: usize,
    pub max_attempts: usize,
    pub bounds: Bounds,
    pub seed: u64,
}

impl SamplingPolicy {
    pub const DEFAULT_ATTEMPTS_PER_ROW: usize = 100;

    /// `max_attempts` defaults to 100 × `n_target`.
    pub fn new(n_target: usize, max_attempts: Option<usize>, bounds: Bounds, seed: u64) -> Result<Self, SynthError> {
        let p = SamplingPolicy {
            n_target,
            max_attempts: max_attempts.unwrap_or(n_target.saturating_mul(Self::DEFAULT_ATTEMPTS_PER_ROW)),
            bounds,
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_target < 1 {
            return Err(SynthError::Policy("n_target must be at least 1".into()));
        }
        if self.max_attempts < self.n_target {
            return Err(SynthError::Policy(format!(
                "max_attempts ({}) must be at least n_target ({})",
                self.max_attempts, self.n_target
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingStats {
    pub attempts: usize,
    pub accepted: usize,
    pub rejected_by_reason: BTreeMap<RejectReason, usize>,
}

impl SamplingStats {
    pub fn rejected(&self) -> usize {
        self.rejected_by_reason.values().sum()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.accepted as f64 / self.attempts as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub protocol: ProtocolTag,
    pub backend: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finetune: Option<FinetuneConfig>,
    pub gen: GenParams,
    pub policy: SamplingPolicy,
    pub prompt_order: ColumnOrder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTable {
    pub table: Table,
    pub provenance: Provenance,
    pub stats: SamplingStats,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    provenance: Provenance,
    stats: SamplingStats,
}

impl SyntheticTable {
    /// Writes the rows as CSV (source header) and provenance plus stats as JSON.
    pub fn save(&self, csv_path: impl AsRef<Path>, sidecar_path: impl AsRef<Path>) -> std::io::Result<()> {
        self.table.save_csv(csv_path)?;
        let sidecar = Sidecar { provenance: self.provenance.clone(), stats: self.stats.clone() };
        let json = serde_json::to_string_pretty(&sidecar).map_err(std::io::Error::other)?;
        std::fs::write(sidecar_path, json + "\n")
    }

    /// Reads a table written by [`SyntheticTable::save`].
    pub fn load(csv_path: impl AsRef<Path>, sidecar_path: impl AsRef<Path>) -> Result<Self, SynthError> {
        let table = crate::table::load_csv(csv_path, true).map_err(|e| SynthError::Io(e.to_string()))?;
        let text = std::fs::read_to_string(sidecar_path).map_err(|e| SynthError::Io(e.to_string()))?;
        let sidecar: Sidecar = serde_json::from_str(&text).map_err(|e| SynthError::Io(e.to_string()))?;
        Ok(SyntheticTable { table, provenance: sidecar.provenance, stats: sidecar.stats })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("sampling exhausted after {} attempts with {} of the requested rows", .stats.attempts, .stats.accepted)]
    Exhausted { stats: SamplingStats, partial: Table },
    #[error("invalid sampling policy: {0}")]
    Policy(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject(RejectReason),
}

/// Accepts complete rows; under strict bounds also checks ranges and levels.
pub fn validate_row(parsed: &ParsedRow, schema: &TableSchema, bounds: Bounds) -> Verdict {
    if !parsed.complete {
        return Verdict::Reject(parsed.reason.unwrap_or(RejectReason::MalformedSegment));
    }
    if bounds == Bounds::Strict {
        for spec in &schema.specs {
            let Some(value) = parsed.values.get(&spec.name) else {
                return Verdict::Reject(RejectReason::MissingColumn);
            };
            match &spec.kind {
                ColumnKind::Numeric { min, max } => match parse_finite(value) {
                    Some(v) if v >= *min && v <= *max => {}
                    Some(_) => return Verdict::Reject(RejectReason::OutOfRange),
                    None => return Verdict::Reject(RejectReason::NonNumericValue),
                },
                ColumnKind::Categorical { levels } => {
                    if !levels.contains(value) {
                        return Verdict::Reject(RejectReason::UnknownLevel);
                    }
                }
            }
        }
    }
    Verdict::Accept
}

/// Outcome of one generation attempt.
type AttemptOutcome = Result<Result<Vec<String>, RejectReason>, BackendError>;

fn run_attempt(
    backend: &dyn Backend,
    schema: &TableSchema,
    descriptors: &DescriptorSet,
    leading: &[usize],
    policy: &SamplingPolicy,
    gen: &GenParams,
    attempt: usize,
) -> AttemptOutcome {
    let prompt = make_test_prompt_among(descriptors, leading, mix_seed(policy.seed, attempt as u64))
        .expect("descriptor set checked nonempty");
    let params = GenParams { count: 1, seed: mix_seed(gen.seed, attempt as u64), ..gen.clone() };
    let text = backend.generate(&prompt, &params)?.into_iter().next().unwrap_or_default();
    let parsed = parse_row(&text, schema, descriptors);
    Ok(match validate_row(&parsed, schema, policy.bounds) {
        Verdict::Accept => Ok(parsed.to_record(schema).expect("accepted rows are complete")),
        Verdict::Reject(reason) => Err(reason),
    })
}

/// Samples until `policy.n_target` rows are accepted or `policy.max_attempts` are spent.
///
/// `prompt_order` must match the column order the backend was trained on: with
/// a fixed order only the first descriptor opens a line, so prompts use it alone.
pub fn generate_synthetic(
    backend: &dyn Backend,
    schema: &TableSchema,
    descriptors: &DescriptorSet,
    prompt_order: ColumnOrder,
    policy: &SamplingPolicy,
    gen: &GenParams,
    finetune: Option<&FinetuneConfig>,
) -> Result<SyntheticTable, SynthError> {
    policy.validate()?;
    gen.validate()?;
    descriptors.check_columns(&schema.column_names())?;
    let leading = leading_descriptors(descriptors, prompt_order);
    if leading.is_empty() {
        return Err(CodecError::Empty.into());
    }

    let mut stats = SamplingStats::default();
    let mut rows = Vec::with_capacity(policy.n_target);
    while stats.accepted < policy.n_target && stats.attempts < policy.max_attempts {
        let needed = policy.n_target - stats.accepted;
        let batch = needed.max(64).min(policy.max_attempts - stats.attempts);
        let first = stats.attempts;
        let outcomes = par::map_range(batch, |j| {
            run_attempt(backend, schema, descriptors, &leading, policy, gen, first + j)
        });
        for outcome in outcomes {
            stats.attempts += 1;
            match outcome? {
                Ok(record) => {
                    stats.accepted += 1;
                    rows.push(record);
                }
                Err(reason) => *stats.rejected_by_reason.entry(reason).or_insert(0) += 1,
            }
            if stats.accepted == policy.n_target {
                break;
            }
        }
    }

    let columns: Vec<String> = schema.column_names().into_iter().map(str::to_owned).collect();
    let table = Table::new(columns, rows).map_err(|e| SynthError::Io(e.to_string()))?;
    debug_assert_eq!(stats.attempts, stats.accepted + stats.rejected());
    if stats.accepted < policy.n_target {
        return Err(SynthError::Exhausted { stats, partial: table });
    }
    Ok(SyntheticTable {
        table,
        provenance: Provenance {
            protocol: descriptors.protocol(),
            backend: backend.id(),
            finetune: finetune.cloned(),
            gen: gen.clone(),
            policy: policy.clone(),
            prompt_order,
        },
        stats,
    })
}
