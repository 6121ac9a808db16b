mod classification;
mod community;
mod export;
mod purity;
mod ranking;
mod text;

pub use classification::{macro_f1, split_macro_f1, SplitF1};
pub use community::{
    community_polarity, doc_community_heatmap, external_score_correlation, frame_scores, polarity_order, polarity_side, segregation_profile,
    subframe_polarity_scatter, CommunityView, Heatmap, RankedKind, ScatterPoint, SegregationProfile, SegregationRow,
};
pub use export::{cell, write_artifact, Artifact, Plot, PlotPoint, Table};
pub use purity::purity;
pub use ranking::{average_ranks, rank_score, spearman, spearman_joined, spearman_scores, Ranking};
pub use text::{
    article_frames_from_lexicon, article_frames_from_subframes, ideology_rank_correlations, party_context_pmi, subframe_cooccurrence,
    subframe_proxies, yearly_rank_correlations, ContextPmiParams, DfMode, IdeologyCorrelations, ParagraphIndex, RankCorrelations,
};
