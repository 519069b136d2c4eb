//! Order-k n-gram language model.
//!
//! Lines are padded with `k` start sentinels and one end sentinel, and every
//! `(k-token context -> next token)` window is counted. Sampling raises the
//! normalized frequencies of the current context to `1/temperature`; an unseen
//! context ends the line. With `k` at least the longest line's token length the
//! model memorizes its corpus: every generation is a training line.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, FinetuneConfig, GenParams, TrainingReport};
use crate::par;
use crate::rng::stream_rng;

const START: u32 = 0;
const END: u32 = 1;
const FORMAT: &str = "tabprompt-ngram";
const VERSION: u32 = 1;

/// How text is cut into tokens. Concatenating the tokens always restores the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tokenizer {
    /// Words and commas, each carrying the whitespace that precedes it
    /// (`"a is 1, b"` → `["a", " is", " 1", ",", " b"]`).
    #[default]
    Word,
    /// One token per character.
    Char,
}

impl Tokenizer {
    pub fn tokenize<'a>(&self, text: &'a str) -> Vec<&'a str> {
        match self {
            Tokenizer::Char => text.char_indices().map(|(i, c)| &text[i..i + c.len_utf8()]).collect(),
            Tokenizer::Word => {
                let mut out = Vec::new();
                let bytes = text.as_bytes();
                let mut start = 0;
                let mut i = 0;
                while i < bytes.len() {
                    while i < bytes.len() && (bytes[i] as char).is_ascii_whitespace() {
                        i += 1;
                    }
                    if i == bytes.len() {
                        break;
                    }
                    if bytes[i] == b',' {
                        i += 1;
                    } else {
                        while i < bytes.len() && bytes[i] != b',' && !(bytes[i] as char).is_ascii_whitespace() {
                            i += 1;
                        }
                    }
                    out.push(&text[start..i]);
                    start = i;
                }
                if start < text.len() {
                    out.push(&text[start..]);
                }
                out
            }
        }
    }
}

/// Corpus statistics reported after training.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenStats {
    pub lines: usize,
    pub tokens: usize,
    pub vocabulary: usize,
    pub contexts: usize,
    pub max_line_tokens: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order_k: usize,
    tokenizer: Tokenizer,
    /// Token strings by id; ids 0 and 1 are the start and end sentinels.
    vocab: Vec<String>,
    index: HashMap<String, u32>,
    /// Next-token counts per context, sorted by token id.
    counts: HashMap<Vec<u32>, Vec<(u32, u32)>>,
    stats: TokenStats,
}

#[derive(Serialize, Deserialize)]
struct ContextDump {
    context: Vec<u32>,
    next: Vec<(u32, u32)>,
}

#[derive(Serialize, Deserialize)]
struct ModelDump {
    format: String,
    version: u32,
    order_k: usize,
    tokenizer: Tokenizer,
    vocab: Vec<String>,
    stats: TokenStats,
    contexts: Vec<ContextDump>,
}

/// Tabulates every context window of every line.
pub fn ngram_finetune<S: AsRef<str> + Sync>(corpus: &[S], order_k: usize, tokenizer: Tokenizer) -> Result<NGramModel, BackendError> {
    if order_k < 1 {
        return Err(BackendError::Config("n-gram order must be at least 1".into()));
    }
    if corpus.is_empty() {
        return Err(BackendError::Train("empty corpus".into()));
    }

    let mut vocab = vec!["<s>".to_owned(), "</s>".to_owned()];
    let mut index: HashMap<String, u32> = HashMap::new();
    let mut encoded = Vec::with_capacity(corpus.len());
    for line in corpus {
        let ids: Vec<u32> = tokenizer
            .tokenize(line.as_ref())
            .into_iter()
            .map(|tok| {
                *index.entry(tok.to_owned()).or_insert_with(|| {
                    vocab.push(tok.to_owned());
                    (vocab.len() - 1) as u32
                })
            })
            .collect();
        encoded.push(ids);
    }

    const CHUNK: usize = 256;
    let chunks: Vec<&[Vec<u32>]> = encoded.chunks(CHUNK).collect();
    let partials = par::map_slice(&chunks, |chunk| {
        let mut local: HashMap<Vec<u32>, HashMap<u32, u32>> = HashMap::new();
        for ids in chunk.iter() {
            let mut padded = vec![START; order_k];
            padded.extend_from_slice(ids);
            padded.push(END);
            for j in order_k..padded.len() {
                *local.entry(padded[j - order_k..j].to_vec()).or_default().entry(padded[j]).or_insert(0) += 1;
            }
        }
        local
    });
    let mut merged: HashMap<Vec<u32>, HashMap<u32, u32>> = HashMap::new();
    for part in partials {
        for (ctx, next) in part {
            let slot = merged.entry(ctx).or_default();
            for (tok, c) in next {
                *slot.entry(tok).or_insert(0) += c;
            }
        }
    }
    let counts: HashMap<Vec<u32>, Vec<(u32, u32)>> = merged
        .into_iter()
        .map(|(ctx, next)| {
            let mut v: Vec<(u32, u32)> = next.into_iter().collect();
            v.sort_unstable();
            (ctx, v)
        })
        .collect();

    let stats = TokenStats {
        lines: encoded.len(),
        tokens: encoded.iter().map(Vec::len).sum(),
        vocabulary: vocab.len() - 2,
        contexts: counts.len(),
        max_line_tokens: encoded.iter().map(Vec::len).max().unwrap_or(0),
    };
    Ok(NGramModel { order_k, tokenizer, vocab, index, counts, stats })
}

impl NGramModel {
    pub fn order_k(&self) -> usize {
        self.order_k
    }

    pub fn tokenizer(&self) -> Tokenizer {
        self.tokenizer
    }

    pub fn stats(&self) -> &TokenStats {
        &self.stats
    }

    /// Next-token counts after `context` (given as token strings, `None` for the
    /// start sentinel). `None` as a next token denotes the end sentinel.
    pub fn next_counts(&self, context: &[Option<&str>]) -> Vec<(Option<String>, u32)> {
        let ids: Option<Vec<u32>> = context
            .iter()
            .map(|t| match t {
                None => Some(START),
                Some(s) => self.index.get(*s).copied(),
            })
            .collect();
        let Some(ids) = ids else { return Vec::new() };
        self.counts
            .get(&ids)
            .map(|next| {
                next.iter()
                    .map(|&(tok, c)| ((tok != END).then(|| self.vocab[tok as usize].clone()), c))
                    .collect()
            })
            .unwrap_or_default()
    }

    fn sample_next(&self, table: &[(u32, u32)], temperature: f64, rng: &mut impl Rng) -> u32 {
        if temperature == 0.0 {
            // max_by_key keeps the last maximum; scan manually to keep the lowest id
            let mut best = table[0];
            for &entry in &table[1..] {
                if entry.1 > best.1 {
                    best = entry;
                }
            }
            return best.0;
        }
        let total: f64 = table.iter().map(|&(_, c)| c as f64).sum();
        let logs: Vec<f64> = table.iter().map(|&(_, c)| (c as f64 / total).ln() / temperature).collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let mut u = rng.gen::<f64>() * weights.iter().sum::<f64>();
        for (&(tok, _), w) in table.iter().zip(&weights) {
            if u < *w {
                return tok;
            }
            u -= w;
        }
        table[table.len() - 1].0
    }

    /// Continues `prefix` with tokens drawn from `rng`, returning only the continuation.
    fn continue_with(&self, prefix: &str, max_new_tokens: usize, temperature: f64, rng: &mut impl Rng) -> String {
        let mut history = vec![START; self.order_k];
        for tok in self.tokenizer.tokenize(prefix) {
            match self.index.get(tok) {
                Some(&id) => history.push(id),
                // unknown token: no context can match, so the line ends here
                None => return String::new(),
            }
        }
        let mut out = String::new();
        for _ in 0..max_new_tokens {
            let ctx = &history[history.len() - self.order_k..];
            let Some(table) = self.counts.get(ctx) else { break };
            let next = self.sample_next(table, temperature, rng);
            if next == END {
                break;
            }
            out.push_str(&self.vocab[next as usize]);
            history.push(next);
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), BackendError> {
        let mut contexts: Vec<ContextDump> = self
            .counts
            .iter()
            .map(|(c, n)| ContextDump { context: c.clone(), next: n.clone() })
            .collect();
        contexts.sort_by(|a, b| a.context.cmp(&b.context));
        let dump = ModelDump {
            format: FORMAT.into(),
            version: VERSION,
            order_k: self.order_k,
            tokenizer: self.tokenizer,
            vocab: self.vocab.clone(),
            stats: self.stats.clone(),
            contexts,
        };
        let file = std::fs::File::create(path.as_ref()).map_err(|e| BackendError::Io(e.to_string()))?;
        serde_json::to_writer(std::io::BufWriter::new(file), &dump).map_err(|e| BackendError::Io(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let file = std::fs::File::open(path.as_ref()).map_err(|e| BackendError::Io(e.to_string()))?;
        let dump: ModelDump =
            serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| BackendError::Io(e.to_string()))?;
        if dump.format != FORMAT || dump.version != VERSION {
            return Err(BackendError::Io(format!("unsupported model format {} v{}", dump.format, dump.version)));
        }
        let index = dump.vocab.iter().enumerate().skip(2).map(|(i, t)| (t.clone(), i as u32)).collect();
        Ok(NGramModel {
            order_k: dump.order_k,
            tokenizer: dump.tokenizer,
            vocab: dump.vocab,
            index,
            counts: dump.contexts.into_iter().map(|c| (c.context, c.next)).collect(),
            stats: dump.stats,
        })
    }
}

/// One seeded continuation of `prefix`: the prefix followed by sampled tokens.
pub fn ngram_generate(model: &NGramModel, prefix: &str, params: &GenParams) -> String {
    let mut rng = stream_rng(params.seed, 0);
    format!("{prefix}{}", model.continue_with(prefix, params.max_new_tokens, params.temperature, &mut rng))
}

/// The n-gram model behind the [`Backend`] interface.
#[derive(Debug, Clone)]
pub struct NGramBackend {
    order_k: usize,
    tokenizer: Tokenizer,
    model: Option<NGramModel>,
}

impl NGramBackend {
    pub fn new(order_k: usize, tokenizer: Tokenizer) -> Self {
        NGramBackend { order_k, tokenizer, model: None }
    }

    pub fn from_model(model: NGramModel) -> Self {
        NGramBackend { order_k: model.order_k, tokenizer: model.tokenizer, model: Some(model) }
    }

    pub fn model(&self) -> Option<&NGramModel> {
        self.model.as_ref()
    }
}

impl Backend for NGramBackend {
    fn id(&self) -> String {
        format!("ngram-k{}", self.order_k)
    }

    /// Epoch and optimizer settings have no meaning for a count model and are ignored.
    fn finetune(&mut self, corpus: &[String], _config: &FinetuneConfig) -> Result<TrainingReport, BackendError> {
        let model = ngram_finetune(corpus, self.order_k, self.tokenizer)?;
        let stats = model.stats.clone();
        self.model = Some(model);
        Ok(TrainingReport {
            status: "trained".into(),
            job_id: None,
            epoch_losses: Vec::new(),
            checkpoints: Vec::new(),
            token_stats: Some(stats),
        })
    }

    /// Text `i` is drawn from RNG stream `i` of `params.seed`.
    fn generate(&self, prefix: &str, params: &GenParams) -> Result<Vec<String>, BackendError> {
        params.validate()?;
        let model = self.model.as_ref().ok_or_else(|| BackendError::State("n-gram model is not trained".into()))?;
        Ok(par::map_range(params.count, |i| {
            let mut rng = stream_rng(params.seed, i as u64);
            format!("{prefix}{}", model.continue_with(prefix, params.max_new_tokens, params.temperature, &mut rng))
        }))
    }
}
