//! Re-ranking a trained method's shortlists with one provider.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{Precision, ProviderConfig};
use crate::data::{ItemId, UserId};
use crate::error::{Error, Result};
use crate::eval::{evaluate, MetricsReport};
use crate::irl::{rank_of, RewardModel, ScoredShortlist};
use crate::pipeline::{
    dataset_hashes, read_manifest, write_manifest, Experiment, HeldOut, Manifest, Method, ProviderDecision,
};
use crate::rerank::fusion::{boost_only_gate, mean_ndcg10, tune_alpha, AlphaCase, AlphaTuning};
use crate::rerank::parse::{parse_ranking, FallbackReason, RankedResponse};
use crate::rerank::prompt::{build_prompt, PersonaPrompt, PromptInputs};
use crate::rerank::provider::ProviderClient;
use crate::scalar::Scalar;

/// One line of the re-ranking report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RerankRecord {
    pub user: u64,
    pub shortlist: Vec<u64>,
    pub llm: Vec<u64>,
    pub fallback_reason: Option<FallbackReason>,
    pub fused: Vec<u64>,
}

pub fn write_rerank_report(path: &Path, records: &[RerankRecord]) -> Result<()> {
    let mut out = Vec::new();
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Held-out users of one split with their provider orderings.
pub struct HeldOutCases {
    pub cases: Vec<AlphaCase>,
    pub responses: Vec<RankedResponse>,
    pub shortlists: BTreeMap<UserId, ScoredShortlist>,
}

impl HeldOutCases {
    pub fn fallback_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.responses {
            let key = r.fallback_reason.map_or("none", FallbackReason::label);
            *counts.entry(key.to_string()).or_insert(0) += 1;
        }
        counts
    }
}

pub fn prompts(
    exp: &Experiment,
    shortlists: &BTreeMap<UserId, ScoredShortlist>,
    held_out: HeldOut,
) -> Result<Vec<PersonaPrompt>> {
    let states = match held_out {
        HeldOut::Validation => &exp.states.validation,
        HeldOut::Test => &exp.states.test,
    };
    let ctx = &exp.with_graph;
    shortlists
        .iter()
        .map(|(u, sl)| {
            let state = &states[u];
            let support: Vec<f64> = sl.entries.iter().map(|e| ctx.signals(state, e.item).support).collect();
            let inputs = PromptInputs {
                mode: exp.cfg.rerank.prompt_mode,
                profile: &state.profile,
                space: &ctx.space,
                items: &ctx.items,
                support: &support,
            };
            build_prompt(&inputs, sl)
        })
        .collect()
}

pub fn held_out_cases<T: Scalar>(
    exp: &Experiment,
    model: &RewardModel<T>,
    method: Method,
    provider: &ProviderConfig,
    held_out: HeldOut,
) -> Result<HeldOutCases> {
    let shortlists = exp.shortlists(model, method.graph_features(), held_out)?;
    let positives = match held_out {
        HeldOut::Validation => exp.prepared.validation_positives(),
        HeldOut::Test => exp.prepared.test_positives(),
    };
    let labels: HashMap<UserId, ItemId> = positives.iter().map(|(u, i)| (*u, *i)).collect();
    let client = ProviderClient::from_config(provider, &labels)?;
    let prompts = prompts(exp, &shortlists, held_out)?;
    let replies = client.query_all(&prompts);
    let mut cases = Vec::with_capacity(prompts.len());
    let mut responses = Vec::with_capacity(prompts.len());
    for (prompt, reply) in prompts.iter().zip(replies) {
        let parsed = match reply {
            Ok(text) => parse_ranking(&text, &prompt.items),
            Err(e) => {
                log::warn!("user {}: {e}; using reward order", prompt.user);
                RankedResponse::fallback(&prompt.items, FallbackReason::ProviderError)
            }
        };
        let sl = &shortlists[&prompt.user];
        cases.push(AlphaCase {
            user: prompt.user,
            irl: prompt.items.clone(),
            llm: parsed.ordering.clone(),
            tail: sl.tail.clone(),
            positive: positives[&prompt.user],
        });
        responses.push(parsed);
    }
    Ok(HeldOutCases {
        cases,
        responses,
        shortlists,
    })
}

#[derive(Clone, Debug)]
pub struct RerankOutcome {
    pub method: String,
    pub decision: ProviderDecision,
    pub tuning: AlphaTuning,
    /// Test metrics of the emitted orderings.
    pub report: MetricsReport,
    /// Test fallback tags and their counts.
    pub fallbacks: BTreeMap<String, usize>,
    /// Test users whose positive moved up (helped) or down (hurt) against
    /// the reward order, at the tuned α and regardless of the gate.
    pub helped: usize,
    pub hurt: usize,
    pub records: Vec<RerankRecord>,
}

impl RerankOutcome {
    pub fn render(&self) -> String {
        let mut s = format!("re-ranking {} with provider {}\n", self.method, self.decision.provider);
        s.push_str("alpha   val NDCG@10\n");
        for (a, v) in &self.tuning.grid {
            s.push_str(&format!("{a:<7.1} {v:.4}\n"));
        }
        s.push_str(&format!(
            "alpha* {:.1}  gate {}  val NDCG@10 irl {:.4} fused {:.4}\n",
            self.decision.alpha,
            match self.decision.gate_open {
                Some(true) => "open",
                Some(false) => "closed",
                None => "off",
            },
            self.decision.validation_ndcg10_irl,
            self.decision.validation_ndcg10_fused
        ));
        let m = &self.report.metrics;
        s.push_str(&format!(
            "test HR@5 {:.4} NDCG@5 {:.4} HR@10 {:.4} NDCG@10 {:.4} MRR {:.4}",
            m.hr5, m.ndcg5, m.hr10, m.ndcg10, m.mrr
        ));
        if let Some(r) = self.report.shortlist_recall {
            s.push_str(&format!(" recall@N {r:.4}"));
        }
        s.push_str(&format!("\nhelped {} hurt {}\nfallbacks", self.helped, self.hurt));
        for (k, v) in &self.fallbacks {
            s.push_str(&format!(" {k}={v}"));
        }
        s.push('\n');
        s
    }
}

/// α search on the validation split only.
pub fn tune_provider<T: Scalar>(exp: &Experiment, method: Method, provider: &ProviderConfig) -> Result<AlphaTuning> {
    let model = exp.model::<T>(method)?;
    let val = held_out_cases(exp, &model, method, provider, HeldOut::Validation)?;
    tune_alpha(&val.cases, &exp.cfg.rerank.alpha_grid)
}

/// Tunes α on validation (unless `fixed_alpha`), applies the gate and
/// evaluates the fused test orderings.
pub fn rerank_method<T: Scalar>(
    exp: &Experiment,
    method: Method,
    provider: &ProviderConfig,
    fixed_alpha: Option<f64>,
) -> Result<RerankOutcome> {
    let model = exp.model::<T>(method)?;
    let val = held_out_cases(exp, &model, method, provider, HeldOut::Validation)?;
    let grid = match fixed_alpha {
        Some(a) => vec![a],
        None => exp.cfg.rerank.alpha_grid.clone(),
    };
    let tuning = tune_alpha(&val.cases, &grid)?;
    let irl_val = mean_ndcg10(&val.cases, 0.0)?;
    let gate = boost_only_gate(exp.cfg.rerank.boost_only_gate, irl_val, tuning.best_ndcg10);
    let applied = if gate { tuning.alpha } else { 0.0 };

    let test = held_out_cases(exp, &model, method, provider, HeldOut::Test)?;
    let mut orders = BTreeMap::new();
    let mut records = Vec::with_capacity(test.cases.len());
    let (mut helped, mut hurt) = (0, 0);
    for (case, resp) in test.cases.iter().zip(&test.responses) {
        let at_alpha = case.final_order(tuning.alpha)?;
        let irl_rank = rank_of(&case.final_order(0.0)?, case.positive);
        match rank_of(&at_alpha, case.positive).cmp(&irl_rank) {
            std::cmp::Ordering::Less => helped += 1,
            std::cmp::Ordering::Greater => hurt += 1,
            std::cmp::Ordering::Equal => {}
        }
        let order = case.final_order(applied)?;
        records.push(RerankRecord {
            user: case.user.0,
            shortlist: case.irl.iter().map(|i| i.0).collect(),
            llm: resp.ordering.iter().map(|i| i.0).collect(),
            fallback_reason: resp.fallback_reason,
            fused: order[..case.irl.len()].iter().map(|i| i.0).collect(),
        });
        orders.insert(case.user, order);
    }
    let short = test.shortlists.iter().map(|(u, s)| (*u, s.items())).collect();
    let name = format!("{}+{}", method.name(), provider.name);
    let report = evaluate(&name, &exp.cfg.hash(), &orders, &exp.prepared.test_positives(), Some(&short))?;

    Ok(RerankOutcome {
        method: name,
        decision: ProviderDecision {
            provider: provider.name.clone(),
            alpha: tuning.alpha,
            gate_open: exp.cfg.rerank.boost_only_gate.then_some(gate),
            validation_ndcg10_irl: irl_val,
            validation_ndcg10_fused: tuning.best_ndcg10,
        },
        tuning,
        report,
        fallbacks: test.fallback_counts(),
        helped,
        hurt,
        records,
    })
}

/// [`rerank_method`] at the configured precision, with its outputs written
/// to `dir` and the decision recorded in the manifest there.
pub fn run_rerank(exp: &Experiment, method: Method, provider: &str, fixed_alpha: Option<f64>, dir: &Path) -> Result<RerankOutcome> {
    let pcfg = exp.cfg.provider(provider)?.clone();
    let outcome = match exp.cfg.features.precision {
        Precision::F32 => rerank_method::<f32>(exp, method, &pcfg, fixed_alpha)?,
        Precision::F64 => rerank_method::<f64>(exp, method, &pcfg, fixed_alpha)?,
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    outcome.report.write_csv(dir)?;
    write_rerank_report(&dir.join(format!("rerank_{}.jsonl", outcome.method)), &outcome.records)?;
    let text_path = dir.join(format!("rerank_{}.txt", outcome.method));
    fs::write(&text_path, outcome.render()).map_err(|e| Error::io(&text_path, e))?;
    record_decision(exp, &outcome.decision, dir)?;
    Ok(outcome)
}

/// Inserts or replaces the provider's entry in `dir`'s manifest, creating
/// a single-seed manifest if none exists yet.
pub fn record_decision(exp: &Experiment, decision: &ProviderDecision, dir: &Path) -> Result<()> {
    let mut manifest = match read_manifest(dir) {
        Ok(m) if m.config_hash == exp.cfg.hash() => m,
        _ => Manifest {
            config_hash: exp.cfg.hash(),
            config: exp.cfg.to_toml(),
            seeds: vec![exp.cfg.seed],
            dataset_hashes: dataset_hashes(&exp.cfg.dataset)?,
            filter_stats: exp.prepared.filter_stats,
            graph_stats: exp.with_graph.graph.stats(),
            stage_hashes: [
                (format!("prepare/{}", exp.cfg.seed), exp.prepared.hash.clone()),
                (format!("context/{}", exp.cfg.seed), exp.context_hash.clone()),
            ]
            .into(),
            methods: Vec::new(),
            providers: Vec::new(),
        },
    };
    manifest.providers.retain(|p| p.provider != decision.provider);
    manifest.providers.push(decision.clone());
    manifest.providers.sort_by(|a, b| a.provider.cmp(&b.provider));
    write_manifest(&manifest, dir)
}
