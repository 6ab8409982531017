//! End-to-end orchestration: prepare, build the context, train, evaluate.
//!
//! Artifacts go under `<output_dir>/<stage>-<hash>/`, where each hash covers
//! the configuration the stage depends on plus its upstream hashes.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Precision};
use crate::data::{
    filter_dataset, load_interactions, sample_from_pool, split_leave_last_two, CandidateSet, Catalog, DatasetSource,
    FilterStats, FilteredDataset, Interaction, ItemId, Split, UserId,
};
use crate::error::{Error, Result};
use crate::eval::{
    baseline_popularity, baseline_random, evaluate, render_ablation, render_table, AblationRow, MetricsReport,
    Superadditivity,
};
use crate::features::{write_feature_dump, FeatureContext, FeatureMatrix, UserState};
use crate::graph::{build_graph, build_text_index, item_document, write_graph, GraphStats};
use crate::irl::{
    read_checkpoint, train, write_checkpoint, Architecture, Checkpoint, Objective, RewardModel, ScoredShortlist,
    TrainConfig, TrainingLog, Transition, TransitionSource,
};
use crate::retrieval::{build_profile, CategorySpace, FeedbackTable, SimilarityIndex};
use crate::scalar::Scalar;
use crate::seed::{derive_seed, sha256_hex};

/// Hash of a list of labelled parts, truncated to 16 hex digits.
pub fn stage_hash(parts: &[&str]) -> String {
    sha256_hex(parts.join("\u{1f}").as_bytes())[..16].to_string()
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serializable")
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawSummary {
    pub interactions: usize,
    pub users: usize,
    pub items: usize,
}

/// Filtered data, split and the fixed evaluation candidate sets.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub hash: String,
    pub raw: RawSummary,
    pub dataset: FilteredDataset,
    pub filter_stats: FilterStats,
    pub split: Split,
    pub catalog: Catalog,
    /// Each user's interactions ordered by `(timestamp, item)`.
    pub interactions_by_user: BTreeMap<UserId, Vec<Interaction>>,
    /// Catalog minus the user's positive history.
    pub pools: BTreeMap<UserId, Vec<ItemId>>,
    pub validation_sets: BTreeMap<UserId, CandidateSet>,
    pub test_sets: BTreeMap<UserId, CandidateSet>,
}

impl Prepared {
    pub fn test_positives(&self) -> BTreeMap<UserId, ItemId> {
        self.split.users.iter().map(|(u, s)| (*u, s.test.item)).collect()
    }

    pub fn validation_positives(&self) -> BTreeMap<UserId, ItemId> {
        self.split.users.iter().map(|(u, s)| (*u, s.validation.item)).collect()
    }

    /// Interactions of split users before their validation positive.
    pub fn training_interactions(&self) -> impl Iterator<Item = &Interaction> {
        self.split.users.iter().flat_map(move |(u, s)| {
            let log = &self.interactions_by_user[u];
            let end = log.partition_point(|i| i.timestamp < s.training_cutoff());
            &log[..end]
        })
    }

    pub fn stats_report(&self) -> String {
        let s = &self.filter_stats;
        let mut out = String::new();
        let _ = writeln!(out, "raw interactions    {}", self.raw.interactions);
        let _ = writeln!(out, "raw users           {}", self.raw.users);
        let _ = writeln!(out, "raw items           {}", self.raw.items);
        let _ = writeln!(out, "filtered users      {}", s.users);
        let _ = writeln!(out, "filtered items      {}", s.items);
        let _ = writeln!(out, "filtered ratings    {}", s.interactions);
        let _ = writeln!(out, "positives           {}", s.positives);
        let _ = writeln!(out, "filter passes       {}", s.passes);
        let _ = writeln!(out, "split users         {}", self.split.users.len());
        let _ = writeln!(out, "excluded users      {}", self.split.excluded.len());
        let transitions: usize = self.split.users.values().map(|s| s.train.len()).sum();
        let _ = writeln!(out, "train transitions   {transitions}");
        out
    }
}

pub fn prepare_hash(cfg: &ExperimentConfig) -> String {
    stage_hash(&[
        "prepare",
        &json(&cfg.dataset),
        &json(&cfg.filter),
        &cfg.evaluation.n_neg.to_string(),
        &cfg.seed.to_string(),
    ])
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let raw = load_interactions(&cfg.dataset)?;
    let summary = RawSummary {
        interactions: raw.interactions.len(),
        users: raw.user_count(),
        items: raw.interacted_item_count(),
    };
    let (dataset, filter_stats) = filter_dataset(&raw, &cfg.filter)?;
    let split = split_leave_last_two(&dataset);
    let catalog = Catalog::from_dataset(&dataset);
    let mut interactions_by_user = dataset.by_user();
    for log in interactions_by_user.values_mut() {
        log.sort_by_key(|i| (i.timestamp, i.item));
    }
    let mut pools = BTreeMap::new();
    let mut validation_sets = BTreeMap::new();
    let mut test_sets = BTreeMap::new();
    for (&user, s) in &split.users {
        // both held-out items are in the positive history, so one pool serves both
        let pool = catalog.negative_pool(user, s.test.item);
        let n = cfg.evaluation.n_neg;
        validation_sets.insert(
            user,
            sample_from_pool(&pool, user, s.validation.item, n, derive_seed(cfg.seed, "validation", user.0, 0))?,
        );
        test_sets.insert(
            user,
            sample_from_pool(&pool, user, s.test.item, n, derive_seed(cfg.seed, "test", user.0, 0))?,
        );
        pools.insert(user, pool);
    }
    Ok(Prepared {
        hash: prepare_hash(cfg),
        raw: summary,
        dataset,
        filter_stats,
        split,
        catalog,
        interactions_by_user,
        pools,
        validation_sets,
        test_sets,
    })
}

/// Writes the stats report, split and candidate sets.
pub fn write_prepared(prepared: &Prepared, dir: &Path) -> Result<()> {
    write(&dir.join("stats.txt"), prepared.stats_report())?;
    let mut split = String::from("user,role,item,timestamp\n");
    for (u, s) in &prepared.split.users {
        for i in &s.train {
            let _ = writeln!(split, "{u},train,{},{}", i.item, i.timestamp);
        }
        let _ = writeln!(split, "{u},validation,{},{}", s.validation.item, s.validation.timestamp);
        let _ = writeln!(split, "{u},test,{},{}", s.test.item, s.test.timestamp);
    }
    write(&dir.join("split.csv"), split)?;
    let mut cands = String::from("user,role,seed,positive,negatives\n");
    for (role, sets) in [("validation", &prepared.validation_sets), ("test", &prepared.test_sets)] {
        for (u, c) in sets {
            let negs: Vec<String> = c.negatives.iter().map(|i| i.to_string()).collect();
            let _ = writeln!(cands, "{u},{role},{},{},{}", c.seed, c.positive, negs.join(" "));
        }
    }
    write(&dir.join("candidates.csv"), cands)
}

pub fn context_hash(cfg: &ExperimentConfig, prepared: &Prepared) -> String {
    stage_hash(&["context", &prepared.hash, &json(&cfg.graph), &json(&cfg.retrieval)])
}

/// Graph, text index, communities and training-period statistics.
pub fn build_context(cfg: &ExperimentConfig, prepared: &Prepared) -> Result<FeatureContext> {
    let items = prepared.dataset.items.clone();
    let graph = build_graph(&items, cfg.graph.min_concept_freq);
    let space = CategorySpace::from_graph(&graph);
    let documents: BTreeMap<ItemId, String> = items
        .iter()
        .map(|(id, meta)| (*id, item_document(meta, cfg.graph.top_tags)))
        .collect();
    let text_index = build_text_index(&documents);
    let training: Vec<Interaction> = prepared.training_interactions().copied().collect();
    let mut popularity: HashMap<ItemId, u64> = HashMap::new();
    for i in &training {
        *popularity.entry(i.item).or_default() += 1;
    }
    let feedback = FeedbackTable::from_interactions(&training, prepared.dataset.positive);
    let profiles: BTreeMap<UserId, Vec<f64>> = prepared
        .split
        .users
        .iter()
        .map(|(u, s)| {
            let p = build_profile(*u, &s.train, None, cfg.retrieval.k_recent, &items, &space, &graph);
            (*u, p.category_distribution)
        })
        .collect();
    let similarity = SimilarityIndex::build(&profiles, cfg.retrieval.community_size);
    Ok(FeatureContext::new(
        cfg.features.graph_features,
        space,
        graph,
        text_index,
        items,
        documents,
        popularity,
        feedback,
        similarity,
        cfg.retrieval.k_recent,
    ))
}

pub fn write_context(ctx: &FeatureContext, key: &str, dir: &Path) -> Result<()> {
    let mut graph = Vec::new();
    write_graph(&ctx.graph, &mut graph).map_err(|e| Error::io(dir.join("graph.tsv"), e))?;
    write(&dir.join("graph.tsv"), graph)?;
    write(&dir.join("graph_stats.txt"), render_graph_stats(&ctx.graph.stats()))?;
    let mut cache = Vec::new();
    ctx.similarity
        .write_cache(key, &mut cache)
        .map_err(|e| Error::io(dir.join("communities.tsv"), e))?;
    write(&dir.join("communities.tsv"), cache)
}

pub fn render_graph_stats(s: &GraphStats) -> String {
    format!(
        "nodes               {}\n  items             {}\n  categories        {}\n  concepts          {}\n\
         edges               {}\n  item-category     {}\n  item-concept      {}\n  item-item         {}\n",
        s.nodes,
        s.item_nodes,
        s.category_nodes,
        s.concept_nodes,
        s.edges,
        s.item_category_edges,
        s.item_concept_edges,
        s.item_item_edges
    )
}

/// User states for every training transition and held-out decision.
#[derive(Clone, Debug)]
pub struct StateIndex {
    /// `(user, position in the training trajectory)` in user order.
    pub steps: Vec<(UserId, usize)>,
    pub train: Vec<UserState>,
    pub validation: BTreeMap<UserId, UserState>,
    pub test: BTreeMap<UserId, UserState>,
}

impl StateIndex {
    pub fn build(ctx: &FeatureContext, prepared: &Prepared) -> Self {
        let mut steps = Vec::new();
        let mut train = Vec::new();
        let mut validation = BTreeMap::new();
        let mut test = BTreeMap::new();
        for (&user, s) in &prepared.split.users {
            let positives = &prepared.dataset.trajectories[&user];
            let log = &prepared.interactions_by_user[&user];
            for (k, p) in s.train.iter().enumerate() {
                steps.push((user, k));
                train.push(ctx.state(user, p.timestamp, positives, log));
            }
            validation.insert(user, ctx.state(user, s.validation.timestamp, positives, log));
            test.insert(user, ctx.state(user, s.test.timestamp, positives, log));
        }
        StateIndex {
            steps,
            train,
            validation,
            test,
        }
    }
}

/// Training transitions with per-epoch resampled negatives.
pub struct PipelineSource<'a> {
    pub ctx: &'a FeatureContext,
    pub prepared: &'a Prepared,
    pub states: &'a StateIndex,
    pub seed: u64,
    pub n_neg: usize,
}

impl<'a> PipelineSource<'a> {
    pub fn candidates(&self, epoch: usize, index: usize) -> Result<CandidateSet> {
        let (user, step) = self.states.steps[index];
        let target = self.prepared.split.users[&user].train[step].item;
        let seed = derive_seed(self.seed, "train", user.0, ((epoch as u64) << 32) | step as u64);
        sample_from_pool(&self.prepared.pools[&user], user, target, self.n_neg, seed)
    }
}

impl<'a, T: Scalar> TransitionSource<T> for PipelineSource<'a> {
    fn dim(&self) -> usize {
        self.ctx.layout.dim()
    }

    fn len(&self) -> usize {
        self.states.steps.len()
    }

    fn transition(&self, epoch: usize, index: usize) -> Result<Transition<T>> {
        let set = self.candidates(epoch, index)?;
        let items = set.items();
        let features = self.ctx.matrix(&self.states.train[index], &items)?;
        Ok(Transition {
            items,
            features,
            expert: set.positive,
        })
    }

    fn validation(&self) -> Result<Vec<Transition<T>>> {
        self.prepared
            .validation_sets
            .iter()
            .map(|(u, set)| {
                let items = set.items();
                Ok(Transition {
                    features: self.ctx.matrix(&self.states.validation[u], &items)?,
                    items,
                    expert: set.positive,
                })
            })
            .collect()
    }
}

/// The trained methods of the main table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Supervised,
    SupervisedGraph,
    IrlLinear,
    IrlLinearGraph,
    IrlMlp,
    IrlMlpGraph,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Supervised,
        Method::SupervisedGraph,
        Method::IrlLinear,
        Method::IrlLinearGraph,
        Method::IrlMlp,
        Method::IrlMlpGraph,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Supervised => "supervised",
            Method::SupervisedGraph => "supervised_graph",
            Method::IrlLinear => "irl_linear",
            Method::IrlLinearGraph => "irl_linear_graph",
            Method::IrlMlp => "irl_mlp",
            Method::IrlMlpGraph => "irl_mlp_graph",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    pub fn graph_features(self) -> bool {
        matches!(self, Method::SupervisedGraph | Method::IrlLinearGraph | Method::IrlMlpGraph)
    }

    /// Method using the configured architecture and graph flag.
    pub fn from_flags(linear: bool, graph: bool) -> Self {
        match (linear, graph) {
            (true, false) => Method::IrlLinear,
            (true, true) => Method::IrlLinearGraph,
            (false, false) => Method::IrlMlp,
            (false, true) => Method::IrlMlpGraph,
        }
    }

    pub fn train_config(self, cfg: &ExperimentConfig) -> TrainConfig {
        let mut t = cfg.train.clone();
        t.seed = cfg.seed;
        match self {
            Method::Supervised | Method::SupervisedGraph => {
                t.architecture = Architecture::Linear;
                t.objective = Objective::Pointwise;
                t.l2 = cfg.supervised.l2;
                t.learning_rate = cfg.supervised.learning_rate;
            }
            Method::IrlLinear | Method::IrlLinearGraph => {
                t.architecture = Architecture::Linear;
                t.objective = Objective::Listwise;
            }
            Method::IrlMlp | Method::IrlMlpGraph => {
                if t.architecture == Architecture::Linear {
                    t.architecture = Architecture::Mlp { hidden: 64 };
                }
                t.objective = Objective::Listwise;
            }
        }
        t
    }
}

/// Everything downstream of `prepare` for one master seed.
pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub prepared: Prepared,
    pub context_hash: String,
    pub with_graph: FeatureContext,
    pub without_graph: FeatureContext,
    pub states: StateIndex,
}

impl Experiment {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let prepared = prepare(cfg)?;
        Self::from_prepared(cfg, prepared)
    }

    pub fn from_prepared(cfg: &ExperimentConfig, prepared: Prepared) -> Result<Self> {
        let with_graph = build_context(cfg, &prepared)?.with_graph_features(true);
        let without_graph = with_graph.with_graph_features(false);
        let states = StateIndex::build(&with_graph, &prepared);
        Ok(Experiment {
            context_hash: context_hash(cfg, &prepared),
            cfg: cfg.clone(),
            prepared,
            with_graph,
            without_graph,
            states,
        })
    }

    pub fn context(&self, graph_features: bool) -> &FeatureContext {
        if graph_features {
            &self.with_graph
        } else {
            &self.without_graph
        }
    }

    pub fn source(&self, graph_features: bool) -> PipelineSource<'_> {
        PipelineSource {
            ctx: self.context(graph_features),
            prepared: &self.prepared,
            states: &self.states,
            seed: self.cfg.seed,
            n_neg: self.cfg.train.n_neg,
        }
    }

    pub fn prepare_dir(&self) -> PathBuf {
        self.cfg.output_dir.join(format!("prepare-{}", self.prepared.hash))
    }

    pub fn context_dir(&self) -> PathBuf {
        self.cfg.output_dir.join(format!("context-{}", self.context_hash))
    }

    pub fn model_hash(&self, method: Method) -> String {
        stage_hash(&[
            "model",
            &self.context_hash,
            method.name(),
            &json(&method.train_config(&self.cfg)),
            &json(&self.cfg.features.precision),
        ])
    }

    pub fn model_dir(&self, method: Method) -> PathBuf {
        self.cfg
            .output_dir
            .join(format!("model-{}-{}", method.name(), self.model_hash(method)))
    }

    pub fn write_upstream(&self) -> Result<()> {
        write_prepared(&self.prepared, &self.prepare_dir())?;
        write_context(&self.with_graph, &self.context_hash, &self.context_dir())
    }

    /// Trains `method`, or loads its checkpoint when one exists for this hash.
    pub fn model<T: Scalar>(&self, method: Method) -> Result<RewardModel<T>> {
        let dir = self.model_dir(method);
        let path = dir.join("checkpoint.json");
        let hash = self.model_hash(method);
        if path.exists() {
            if let Ok(c) = read_checkpoint::<T>(&path) {
                if c.config_hash == hash {
                    log::info!("{}: reusing {}", method.name(), path.display());
                    return Ok(c.model);
                }
            }
        }
        let tc = method.train_config(&self.cfg);
        log::info!("{}: training ({} transitions)", method.name(), self.states.steps.len());
        let source = self.source(method.graph_features());
        let (model, training_log): (RewardModel<T>, TrainingLog) = train(&source, &tc)?;
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        training_log.write_csv(&dir.join("training_log.csv"), &tc)?;
        write_checkpoint(&path, &Checkpoint::new(model.clone(), &hash))?;
        if self.cfg.features.dump {
            self.dump_features::<T>(method.graph_features(), &dir.join("features.csv"))?;
        }
        Ok(model)
    }

    /// Epoch-0 training features, one row per (user, step, candidate).
    pub fn dump_features<T: Scalar>(&self, graph_features: bool, path: &Path) -> Result<()> {
        let source = self.source(graph_features);
        let names = source.ctx.layout.names(source.ctx.space.labels());
        let mut out = Vec::new();
        for index in 0..self.states.steps.len() {
            let t: Transition<T> = source.transition(0, index)?;
            let (user, step) = self.states.steps[index];
            let records = t
                .items
                .iter()
                .zip(t.features.iter())
                .map(|(item, row)| (user, step, *item, *item == t.expert, row.to_vec()));
            write_feature_dump(&mut out, &names, records, index == 0).map_err(|e| Error::io(path, e))?;
        }
        write(path, out)
    }

    /// Shortlists (and thereby full orderings) of `model` on the held-out sets.
    pub fn shortlists<T: Scalar>(
        &self,
        model: &RewardModel<T>,
        graph_features: bool,
        held_out: HeldOut,
    ) -> Result<BTreeMap<UserId, ScoredShortlist>> {
        let ctx = self.context(graph_features);
        let (sets, states) = match held_out {
            HeldOut::Validation => (&self.prepared.validation_sets, &self.states.validation),
            HeldOut::Test => (&self.prepared.test_sets, &self.states.test),
        };
        let n = self.cfg.evaluation.shortlist;
        let mut out = BTreeMap::new();
        for (u, set) in sets {
            let items = set.items();
            let x: FeatureMatrix<T> = ctx.matrix(&states[u], &items)?;
            let scores: Vec<f64> = model.score_raw(&x)?.into_iter().map(Scalar::as_f64).collect();
            out.insert(*u, ScoredShortlist::from_scores(&items, &scores, n));
        }
        Ok(out)
    }

    pub fn evaluate_model<T: Scalar>(&self, method: Method) -> Result<MetricsReport> {
        let model = self.model::<T>(method)?;
        let lists = self.shortlists(&model, method.graph_features(), HeldOut::Test)?;
        report_from_shortlists(method.name(), &self.cfg.hash(), &lists, &self.prepared.test_positives())
    }

    pub fn random_report(&self) -> Result<MetricsReport> {
        let orders = self
            .prepared
            .test_sets
            .iter()
            .map(|(u, s)| (*u, baseline_random(&s.items(), derive_seed(self.cfg.seed, "random", u.0, 0))))
            .collect();
        evaluate("random", &self.cfg.hash(), &orders, &self.prepared.test_positives(), None)
    }

    pub fn popularity_report(&self) -> Result<MetricsReport> {
        let orders = self
            .prepared
            .test_sets
            .iter()
            .map(|(u, s)| (*u, baseline_popularity(&s.items(), &self.with_graph.popularity)))
            .collect();
        evaluate("popularity", &self.cfg.hash(), &orders, &self.prepared.test_positives(), None)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeldOut {
    Validation,
    Test,
}

pub fn report_from_shortlists(
    method: &str,
    config_hash: &str,
    lists: &BTreeMap<UserId, ScoredShortlist>,
    positives: &BTreeMap<UserId, ItemId>,
) -> Result<MetricsReport> {
    let orders = lists.iter().map(|(u, s)| (*u, s.full_order())).collect();
    let short = lists.iter().map(|(u, s)| (*u, s.items())).collect();
    let report = evaluate(method, config_hash, &orders, positives, Some(&short))?;
    if let (Some(recall), Some(first)) = (report.shortlist_recall, lists.values().next()) {
        assert!(first.len() < 10 || report.metrics.hr10 <= recall + 1e-12, "HR@10 above shortlist recall");
    }
    Ok(report)
}

/// Per-seed reports of every baseline and trained method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedResults {
    pub seed: u64,
    pub reports: Vec<MetricsReport>,
}

impl SeedResults {
    pub fn get(&self, method: &str) -> Option<&MetricsReport> {
        self.reports.iter().find(|r| r.method == method)
    }
}

pub fn run_seed(cfg: &ExperimentConfig, methods: &[Method], baselines: bool) -> Result<(Experiment, SeedResults)> {
    let exp = Experiment::build(cfg)?;
    exp.write_upstream()?;
    let mut reports = Vec::new();
    if baselines {
        reports.push(exp.random_report()?);
        reports.push(exp.popularity_report()?);
    }
    for &m in methods {
        let r = match cfg.features.precision {
            Precision::F32 => exp.evaluate_model::<f32>(m)?,
            Precision::F64 => exp.evaluate_model::<f64>(m)?,
        };
        reports.push(r);
    }
    Ok((exp, SeedResults { seed: cfg.seed, reports }))
}

/// Mean of each metric across seeds, per method name (order of the first seed).
pub fn average_reports(results: &[SeedResults]) -> Vec<MetricsReport> {
    let Some(first) = results.first() else {
        return Vec::new();
    };
    first
        .reports
        .iter()
        .map(|r| {
            let all: Vec<&MetricsReport> = results.iter().filter_map(|s| s.get(&r.method)).collect();
            let n = all.len() as f64;
            let mut mean = r.clone();
            let mut v = [0.0; 5];
            for m in &all {
                for (acc, x) in v.iter_mut().zip(m.metrics.values()) {
                    *acc += x;
                }
            }
            mean.metrics.hr5 = v[0] / n;
            mean.metrics.ndcg5 = v[1] / n;
            mean.metrics.hr10 = v[2] / n;
            mean.metrics.ndcg10 = v[3] / n;
            mean.metrics.mrr = v[4] / n;
            mean.shortlist_recall = r
                .shortlist_recall
                .map(|_| all.iter().filter_map(|m| m.shortlist_recall).sum::<f64>() / n);
            mean.ranks.clear();
            mean
        })
        .collect()
}

pub fn superadditivity(reports: &[MetricsReport]) -> Option<Superadditivity> {
    let get = |m: Method| reports.iter().find(|r| r.method == m.name()).map(|r| r.metrics.ndcg10);
    Some(Superadditivity {
        base: get(Method::Supervised)?,
        listwise_only: get(Method::IrlMlp)?,
        graph_only: get(Method::SupervisedGraph)?,
        combined: get(Method::IrlMlpGraph)?,
    })
}

pub fn ablation_rows(reports: &[MetricsReport]) -> Vec<AblationRow> {
    let rows = [
        ("full (irl_mlp + graph)", Method::IrlMlpGraph),
        ("- graph features", Method::IrlMlp),
        ("- nonlinear reward", Method::IrlLinearGraph),
        ("- listwise objective", Method::SupervisedGraph),
        ("- both (supervised)", Method::Supervised),
    ];
    rows.iter()
        .filter_map(|(label, m)| {
            reports.iter().find(|r| r.method == m.name()).map(|r| AblationRow {
                configuration: label.to_string(),
                hr10: r.metrics.hr10,
                ndcg10: r.metrics.ndcg10,
            })
        })
        .collect()
}

/// Hashes of the raw input files.
pub fn dataset_hashes(source: &DatasetSource) -> Result<BTreeMap<String, String>> {
    let files: Vec<PathBuf> = match source {
        DatasetSource::Movielens(m) => ["ratings.csv", "movies.csv", "tags.csv"]
            .iter()
            .map(|f| m.dir.join(f))
            .filter(|p| p.exists())
            .collect(),
        DatasetSource::Columnar(c) => std::iter::once(c.log.clone())
            .chain(c.items.iter().map(|i| i.path.clone()))
            .collect(),
    };
    files
        .into_iter()
        .map(|p| {
            let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
            let name = p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned());
            Ok((name, sha256_hex(&bytes)))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProviderDecision {
    pub provider: String,
    pub alpha: f64,
    pub gate_open: Option<bool>,
    pub validation_ndcg10_irl: f64,
    pub validation_ndcg10_fused: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub config: String,
    pub seeds: Vec<u64>,
    pub dataset_hashes: BTreeMap<String, String>,
    pub filter_stats: FilterStats,
    pub graph_stats: GraphStats,
    pub stage_hashes: BTreeMap<String, String>,
    pub methods: Vec<String>,
    pub providers: Vec<ProviderDecision>,
}

/// Output of the evaluation over all seeds.
pub struct MainTable {
    pub per_seed: Vec<SeedResults>,
    pub mean: Vec<MetricsReport>,
    pub manifest: Manifest,
}

/// Runs `methods` (plus the baselines) for every configured seed and writes
/// `metrics_<method>.csv`, `report.txt` and `experiment_manifest.json` to `dir`.
pub fn run_main_table(cfg: &ExperimentConfig, methods: &[Method], baselines: bool, dir: &Path) -> Result<MainTable> {
    let seeds = if cfg.evaluation.seeds.is_empty() {
        vec![cfg.seed]
    } else {
        cfg.evaluation.seeds.clone()
    };
    let mut per_seed = Vec::new();
    let mut stage_hashes = BTreeMap::new();
    let mut filter_stats = None;
    let mut graph_stats = None;
    for &s in &seeds {
        let (exp, results) = run_seed(&cfg.with_seed(s), methods, baselines)?;
        stage_hashes.insert(format!("prepare/{s}"), exp.prepared.hash.clone());
        stage_hashes.insert(format!("context/{s}"), exp.context_hash.clone());
        for m in methods {
            stage_hashes.insert(format!("{}/{s}", m.name()), exp.model_hash(*m));
        }
        filter_stats.get_or_insert(exp.prepared.filter_stats);
        graph_stats.get_or_insert(exp.with_graph.graph.stats());
        per_seed.push(results);
    }
    let mean = average_reports(&per_seed);
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for r in &mean {
        let mut per_user = per_seed[0].get(&r.method).cloned().unwrap_or_else(|| r.clone());
        per_user.metrics = r.metrics;
        per_user.shortlist_recall = r.shortlist_recall;
        per_user.write_csv(dir)?;
    }
    let reference = mean.iter().any(|r| r.method == "supervised").then_some("supervised");
    let mut text = render_table(
        &format!("mean over seeds {seeds:?} (per-user rows in metrics_*.csv are for seed {})", seeds[0]),
        &mean,
        reference,
    );
    for s in &per_seed {
        text.push('\n');
        text.push_str(&render_table(&format!("seed {}", s.seed), &s.reports, reference));
    }
    let rows = ablation_rows(&mean);
    if rows.len() == 5 {
        text.push_str("\ncomponent ablation (mean over seeds)\n");
        text.push_str(&render_ablation(&rows));
    }
    if let Some(sa) = superadditivity(&mean) {
        text.push('\n');
        text.push_str(&sa.render());
    }
    let manifest = Manifest {
        config_hash: cfg.hash(),
        config: cfg.to_toml(),
        seeds: seeds.clone(),
        dataset_hashes: dataset_hashes(&cfg.dataset)?,
        filter_stats: filter_stats.expect("at least one seed"),
        graph_stats: graph_stats.expect("at least one seed"),
        stage_hashes,
        methods: mean.iter().map(|r| r.method.clone()).collect(),
        // decisions from earlier re-ranking runs of the same configuration
        providers: match read_manifest(dir) {
            Ok(m) if m.config_hash == cfg.hash() => m.providers,
            _ => Vec::new(),
        },
    };
    write(&dir.join("report.txt"), &text)?;
    write_manifest(&manifest, dir)?;
    Ok(MainTable {
        per_seed,
        mean,
        manifest,
    })
}

pub fn write_manifest(manifest: &Manifest, dir: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).map_err(|e| Error::Format(e.to_string()))?;
    write(&dir.join("experiment_manifest.json"), text + "\n")
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join("experiment_manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Directory holding the evaluation outputs of a configuration.
pub fn eval_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.join(format!("eval-{}", cfg.short_hash()))
}
