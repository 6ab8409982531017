//! LLM re-ranking of the reward shortlist: prompts, providers, parsing,
//! rank fusion and α selection.

pub mod fusion;
pub mod parse;
pub mod prompt;
pub mod provider;
pub mod run;

pub use fusion::{boost_only_gate, fuse, mean_ndcg10, tune_alpha, AlphaCase, AlphaTuning};
pub use parse::{parse_ranking, render_ranking, FallbackReason, RankedResponse};
pub use prompt::{build_prompt, PersonaPrompt, PromptInputs};
pub use provider::{
    AdversaryProvider, CacheRecord, ChatCompletionProvider, LlmProvider, OracleProvider, ProviderClient, ReplayProvider,
    ResponseCache,
};
pub use run::{
    held_out_cases, prompts, record_decision, rerank_method, run_rerank, tune_provider, write_rerank_report, HeldOutCases,
    RerankOutcome, RerankRecord,
};
