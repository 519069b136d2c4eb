//! Tabular data synthesis through textual row encodings.
//!
//! Rows of a table are rendered as `"<descriptor> is <value>, ..."` sentences,
//! a text-generation backend is trained on those sentences, and new rows are
//! recovered from sampled text by a schema-aware parser. The quality of the
//! synthetic rows is scored by machine-learning efficiency: decision trees and
//! random forests trained on synthetic data and tested on held-out real rows.
//!
//! Descriptors, the subject of every entry, come from one of four protocols:
//! raw column names, expert-written text, LLM-written descriptions, or names
//! mapped from another domain by an LLM given the value ranges.

pub mod backend;
pub mod codec;
pub mod endpoint;
pub mod mle;
pub mod par;
pub mod protocols;
pub mod rng;
pub mod synth;
pub mod table;

pub use backend::{Backend, BackendError, FinetuneConfig, FinetuneMode, GenParams, NGramBackend, RemoteBackend};
pub use codec::{CodecError, ColumnOrder, DescriptorSet, EncodedRow, ParsedRow, ProtocolTag, RejectReason};
pub use mle::{evaluate_mle, Grids, MleReport};
pub use protocols::{ChatEndpointConfig, DescriptorQuery, ProtocolError};
pub use synth::{generate_synthetic, Bounds, SamplingPolicy, SyntheticTable};
pub use table::{ColumnKind, ColumnSpec, SplitPair, Table, TableSchema, Task};
