//! Domain-generalization experiment engine.
//!
//! Everything between datasets and numbers lives here: stratified 8:1:1
//! splitting, the seven-row protocol table (three intra-domain, one
//! pooled inter-domain, three leave-one-domain-out cross rows), the
//! mini-batch training loop with its optional domain-adversarial head,
//! threshold and ranking metrics with full ROC curves, and an exact t-SNE
//! for looking at the learned feature space. Every entry point is
//! deterministic given its seed: identical configs produce identical
//! reports, bit for bit.

mod metrics;
mod protocol;
mod split;
mod train;
mod tsne;

pub use metrics::{compute_metrics, f1_from, MetricsReport, RocPoint};
pub use protocol::{build_protocols, ExperimentProtocol, ProtocolKind};
pub use split::{split_8_1_1, SplitSpec};
pub use train::{
    evaluate, extract_feature_matrix, protocol_splits, run_protocol, train, AdvTarget,
    DomainAdvConfig,
    EpochStats, LossKind, OptimizerKind, ProtocolOutcome, TrainConfig, TrainRun,
};
pub use tsne::{silhouette, tsne_embed, TsneResult};
