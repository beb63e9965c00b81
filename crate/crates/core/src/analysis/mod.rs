//! Ranking datasets by downstream scores and correlating diversity with
//! performance.

mod correlation;
mod rank;
mod report;
mod scores;

pub use correlation::{
    correlate_diversity, midranks, performance_means, spearman, spearman_p_value, spearman_with, CorrelationOptions,
    CorrelationResult, PValueMethod, Scaling,
};
pub use rank::{rank_datasets, rank_datasets_with, RankEntry, RankResult, Tie, TieMethod};
pub use report::emit_report;
pub use scores::{read_score_table, ScoreTable};
