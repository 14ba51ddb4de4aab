//! End-to-end orchestration: grouping, per-attribute splits, probes, metrics
//! and report tables.
//!
//! Every command takes a [`RunConfig`]. Outputs are written in attribute
//! order and carry content fingerprints, so identical configs give
//! byte-identical files whatever the worker count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{load_embeddings, ConceptSet, DatasetBundle, EmbeddingFormat};
use crate::embedding_ops::{
    kmeans, max_similarity_rank, ClusterAssignment, DEFAULT_KMEANS_MAX_ITER, DEFAULT_TOP_PAIRS,
};
use crate::error::{Error, Result};
use crate::grouping::{
    group_clustering, group_llm_pairs, group_random, group_similarity, group_supercategory, Grouping, Hint, PairList,
    Strategy,
};
use crate::llm_client::LlmEndpointConfig;
use crate::metrics::{cs_score, f1_score, mean_selectivity, supercategory_dominance, AttributeResult, BaselineMode};
use crate::probe::{predict, train_probe, ProbeConfig};
use crate::splitter::{majority_vote, split_all, RejectReason, Side, SplitAssignment, SplitConstraints, SplitSet};
use crate::synth::SynthSpec;

pub const DEFAULT_K: usize = 100;
pub const DEFAULT_ABLATION_KS: [usize; 6] = [10, 25, 50, 100, 200, 400];

pub const GROUPING_FILE: &str = "grouping.json";
pub const CLUSTERS_FILE: &str = "clusters.json";
pub const SPLITS_FILE: &str = "splits.jsonl";
pub const SPLIT_MANIFEST_FILE: &str = "split_manifest.json";
pub const REJECTED_FILE: &str = "rejected.json";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";
pub const GLOBAL_SPLIT_FILE: &str = "global_split.json";
pub const RESULTS_FILE: &str = "results.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TABLE1_FILE: &str = "table1.csv";
pub const CS_TABLE_FILE: &str = "cs_table.csv";
pub const ABLATION_FILE: &str = "ablate_k.csv";
pub const PAIRS_FILE: &str = "pairs.csv";

/// Everything a run needs. Relative paths are resolved against the config
/// file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub embeddings: Option<PathBuf>,
    pub embeddings_format: Option<EmbeddingFormat>,
    /// Embeddings driving similarity/clustering groupings; defaults to `embeddings`.
    pub grouping_embeddings: Option<PathBuf>,
    pub attributes: Option<PathBuf>,
    pub supercategories: Option<PathBuf>,
    /// Row label in report tables; defaults to the embeddings file stem.
    pub features_label: Option<String>,
    pub strategy: Strategy,
    pub k: usize,
    pub kmeans_max_iter: usize,
    pub normalize_before_clustering: bool,
    pub top_pairs: usize,
    pub pairs_file: Option<PathBuf>,
    pub constraints: SplitConstraints,
    pub probe: ProbeConfig,
    pub baseline: BaselineMode,
    /// Master seed; overrides `constraints.master_seed` and seeds K-Means.
    pub seed: Option<u64>,
    /// Worker threads, 0 for one per core.
    pub workers: usize,
    pub out: PathBuf,
    pub splits_file: Option<PathBuf>,
    /// `summary.json` files merged by `report`.
    pub results: Vec<PathBuf>,
    pub ablation_ks: Vec<usize>,
    pub emit_global_split: bool,
    pub synth: SynthSpec,
    pub llm: LlmEndpointConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            embeddings: None,
            embeddings_format: None,
            grouping_embeddings: None,
            attributes: None,
            supercategories: None,
            features_label: None,
            strategy: Strategy::Clustering,
            k: DEFAULT_K,
            kmeans_max_iter: DEFAULT_KMEANS_MAX_ITER,
            normalize_before_clustering: false,
            top_pairs: DEFAULT_TOP_PAIRS,
            pairs_file: None,
            constraints: SplitConstraints::default(),
            probe: ProbeConfig::default(),
            baseline: BaselineMode::default(),
            seed: None,
            workers: 0,
            out: PathBuf::from("out"),
            splits_file: None,
            results: Vec::new(),
            ablation_ks: DEFAULT_ABLATION_KS.to_vec(),
            emit_global_split: false,
            synth: SynthSpec::default(),
            llm: LlmEndpointConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.embeddings,
            &mut self.grouping_embeddings,
            &mut self.attributes,
            &mut self.supercategories,
            &mut self.pairs_file,
            &mut self.splits_file,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        fix(&mut self.out);
        self.results.iter_mut().for_each(fix);
    }

    pub fn master_seed(&self) -> u64 {
        self.seed.unwrap_or(self.constraints.master_seed)
    }

    /// Constraints actually used for this strategy. The random baseline
    /// ignores the positive-rate term of the penalty.
    pub fn effective_constraints(&self) -> SplitConstraints {
        let mut c = self.constraints.clone();
        c.master_seed = self.master_seed();
        if self.strategy == Strategy::Random {
            c.penalty_weights.ratio = 1.0;
            c.penalty_weights.pos_rate = 0.0;
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.effective_constraints().validate()?;
        self.probe.validate()?;
        match self.strategy {
            Strategy::Clustering if self.k == 0 || self.kmeans_max_iter == 0 => {
                Err(Error::Config("clustering needs k >= 1 and kmeans_max_iter >= 1".into()))
            }
            Strategy::Similarity if self.top_pairs == 0 => Err(Error::Config("top_pairs must be positive".into())),
            _ => Ok(()),
        }
    }

    fn required<'a>(&self, p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        p.as_deref()
            .ok_or_else(|| Error::Config(format!("`{key}` is required for this command")))
    }

    fn features_label(&self) -> String {
        self.features_label.clone().unwrap_or_else(|| {
            self.embeddings
                .as_deref()
                .and_then(|p| p.file_stem())
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "features".into())
        })
    }

    fn thread_pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))
    }
}

/// In-memory inputs of one run.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub bundle: DatasetBundle,
    /// Separate embeddings for grouping, same concepts in the same order.
    pub grouping_set: Option<ConceptSet>,
    pub pairs: Option<PairList>,
    pub features_label: String,
}

impl Inputs {
    pub fn new(bundle: DatasetBundle, features_label: impl Into<String>) -> Self {
        Self {
            bundle,
            grouping_set: None,
            pairs: None,
            features_label: features_label.into(),
        }
    }

    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let emb = cfg.required(&cfg.embeddings, "embeddings")?;
        let attrs = cfg.required(&cfg.attributes, "attributes")?;
        match cfg.strategy {
            Strategy::Llm => {
                cfg.required(&cfg.pairs_file, "pairs_file")?;
            }
            Strategy::Supercategory => {
                cfg.required(&cfg.supercategories, "supercategories")?;
            }
            _ => {}
        }
        let format = cfg.embeddings_format.unwrap_or_else(|| EmbeddingFormat::from_path(emb));
        let bundle = DatasetBundle::load(emb, format, attrs, cfg.supercategories.as_deref())?;
        let grouping_set = match &cfg.grouping_embeddings {
            Some(p) => {
                let cs = load_embeddings(p, EmbeddingFormat::from_path(p))?;
                if cs.names() != bundle.concept_set.names() {
                    return Err(Error::Validation(format!(
                        "{} does not list the same concepts in the same order as {}",
                        p.display(),
                        emb.display()
                    )));
                }
                Some(cs)
            }
            None => None,
        };
        let pairs = match (&cfg.pairs_file, cfg.strategy) {
            (Some(p), Strategy::Llm) => Some(PairList::load(p)?),
            _ => None,
        };
        Ok(Self {
            bundle,
            grouping_set,
            pairs,
            features_label: cfg.features_label(),
        })
    }

    fn grouping_concepts(&self) -> &ConceptSet {
        self.grouping_set.as_ref().unwrap_or(&self.bundle.concept_set)
    }
}

fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

fn embeddings_hash(cs: &ConceptSet) -> String {
    let names = cs.names().join("\n");
    let values: Vec<u8> = cs.values().iter().flat_map(|v| v.to_le_bytes()).collect();
    sha256_hex(&[names.as_bytes(), &(cs.dim() as u64).to_le_bytes(), &values])
}

/// Content hashes of the inputs and of the effective configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    /// concept names, attribute labels and supercategories
    pub dataset: String,
    pub embeddings: String,
    pub grouping_embeddings: String,
    pub config: String,
}

#[derive(Serialize)]
struct ConfigDigest<'a> {
    strategy: Strategy,
    k: usize,
    kmeans_max_iter: usize,
    normalize_before_clustering: bool,
    top_pairs: usize,
    pairs: Option<&'a Vec<(String, String)>>,
    constraints: SplitConstraints,
    probe: &'a ProbeConfig,
    baseline: BaselineMode,
}

pub fn fingerprint(cfg: &RunConfig, inputs: &Inputs) -> Fingerprint {
    let b = &inputs.bundle;
    let attr_names = b.attributes.names().join("\n");
    let labels: Vec<u8> = (0..b.attributes.n_attributes())
        .flat_map(|a| b.attributes.column(a))
        .collect();
    let (sc_assign, sc_names) = match &b.supercategories {
        Some(sm) => (
            sm.assignment()
                .iter()
                .flat_map(|s| (*s as u64).to_le_bytes())
                .collect::<Vec<u8>>(),
            sm.names().join("\n"),
        ),
        None => (Vec::new(), String::new()),
    };
    let concept_names = b.concept_set.names().join("\n");
    let dataset = sha256_hex(&[
        concept_names.as_bytes(),
        attr_names.as_bytes(),
        &labels,
        &sc_assign,
        sc_names.as_bytes(),
    ]);
    let digest = ConfigDigest {
        strategy: cfg.strategy,
        k: cfg.k,
        kmeans_max_iter: cfg.kmeans_max_iter,
        normalize_before_clustering: cfg.normalize_before_clustering,
        top_pairs: cfg.top_pairs,
        pairs: inputs.pairs.as_ref().map(|p| &p.pairs),
        constraints: cfg.effective_constraints(),
        probe: &cfg.probe,
        baseline: cfg.baseline,
    };
    let embeddings = embeddings_hash(&b.concept_set);
    let grouping_embeddings = embeddings_hash(inputs.grouping_concepts());
    let config_json = serde_json::to_vec(&digest).expect("config digest serializes");
    let config = sha256_hex(&[
        &config_json,
        dataset.as_bytes(),
        embeddings.as_bytes(),
        grouping_embeddings.as_bytes(),
    ]);
    Fingerprint {
        dataset,
        embeddings,
        grouping_embeddings,
        config,
    }
}

/// Coverage and group-size statistics of a grouping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupingDiagnostics {
    pub strategy: Strategy,
    pub n_concepts: usize,
    pub n_groups: usize,
    pub n_multi_member_groups: usize,
    pub coverage: f64,
    pub ungrouped_fraction: f64,
    pub mean_group_size: f64,
    pub max_group_size: usize,
    pub size_histogram: BTreeMap<usize, usize>,
    pub force_train_concepts: usize,
    pub prefer_train_concepts: usize,
    pub kmeans_inertia: Option<f64>,
    pub kmeans_iterations: Option<usize>,
    /// Highest per-concept maximum similarities (similarity strategy only).
    pub top_max_similarity: Vec<(String, f64)>,
}

impl GroupingDiagnostics {
    fn new(g: &Grouping) -> Self {
        let count = |hint: Hint| {
            g.groups
                .iter()
                .filter(|grp| grp.hint == hint)
                .map(|grp| grp.members.len())
                .sum()
        };
        Self {
            strategy: g.strategy,
            n_concepts: g.n_concepts(),
            n_groups: g.len(),
            n_multi_member_groups: g.groups.iter().filter(|grp| grp.members.len() >= 2).count(),
            coverage: g.coverage,
            ungrouped_fraction: g.singleton_fraction(),
            mean_group_size: g.n_concepts() as f64 / g.len() as f64,
            max_group_size: g.groups.iter().map(|grp| grp.members.len()).max().unwrap_or(0),
            size_histogram: g.size_histogram(),
            force_train_concepts: count(Hint::ForceTrain),
            prefer_train_concepts: count(Hint::PreferTrain),
            kmeans_inertia: None,
            kmeans_iterations: None,
            top_max_similarity: Vec::new(),
        }
    }
}

pub struct GroupingOutcome {
    pub grouping: Grouping,
    pub diagnostics: GroupingDiagnostics,
    pub clusters: Option<ClusterAssignment>,
}

pub fn build_grouping(cfg: &RunConfig, inputs: &Inputs) -> Result<GroupingOutcome> {
    let cs = inputs.grouping_concepts();
    let mut clusters = None;
    let mut ranking = Vec::new();
    let grouping = match cfg.strategy {
        Strategy::Random => group_random(cs),
        Strategy::Llm => {
            let pairs = inputs
                .pairs
                .as_ref()
                .ok_or_else(|| Error::Config("the llm strategy needs a pair list".into()))?;
            group_llm_pairs(cs, pairs)?
        }
        Strategy::Similarity => {
            ranking = max_similarity_rank(cs)?
                .into_iter()
                .take(20)
                .map(|(i, s)| (cs.name(i).to_string(), s))
                .collect();
            group_similarity(cs, cfg.top_pairs)?
        }
        Strategy::Clustering => {
            let ca = if cfg.normalize_before_clustering {
                kmeans(&cs.l2_normalized(), cfg.k, cfg.master_seed(), cfg.kmeans_max_iter)?
            } else {
                kmeans(cs, cfg.k, cfg.master_seed(), cfg.kmeans_max_iter)?
            };
            let g = group_clustering(&ca)?;
            clusters = Some(ca);
            g
        }
        Strategy::Supercategory => group_supercategory(inputs.bundle.supercategories.as_ref())?,
    };
    let mut diagnostics = GroupingDiagnostics::new(&grouping);
    diagnostics.kmeans_inertia = clusters.as_ref().map(|c| c.inertia);
    diagnostics.kmeans_iterations = clusters.as_ref().map(|c| c.iterations);
    diagnostics.top_max_similarity = ranking;
    Ok(GroupingOutcome {
        grouping,
        diagnostics,
        clusters,
    })
}

/// One line of `splits.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub attribute: String,
    pub feasible: bool,
    pub train_ratio: f64,
    pub pos_rate_train: f64,
    pub pos_rate_test: f64,
    pub train_ids: Vec<usize>,
    pub attribute_id: usize,
    pub penalty: f64,
    pub trial_seed: u64,
}

impl SplitRecord {
    fn from_assignment(sa: &SplitAssignment, name: &str) -> Self {
        Self {
            attribute: name.to_string(),
            feasible: sa.feasible,
            train_ratio: sa.achieved_train_ratio,
            pos_rate_train: sa.pos_rate_train,
            pos_rate_test: sa.pos_rate_test,
            train_ids: sa.train_ids(),
            attribute_id: sa.attribute_id,
            penalty: sa.penalty,
            trial_seed: sa.trial_seed,
        }
    }

    fn into_assignment(self, n: usize) -> Result<SplitAssignment> {
        let mut side = vec![Side::Test; n];
        for &i in &self.train_ids {
            if i >= n {
                return Err(Error::Validation(format!(
                    "split for {:?} names concept {i}, dataset has {n}",
                    self.attribute
                )));
            }
            side[i] = Side::Train;
        }
        Ok(SplitAssignment {
            attribute_id: self.attribute_id,
            side,
            feasible: self.feasible,
            penalty: self.penalty,
            achieved_train_ratio: self.train_ratio,
            pos_rate_train: self.pos_rate_train,
            pos_rate_test: self.pos_rate_test,
            trial_seed: self.trial_seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub strategy: Strategy,
    pub fingerprint: Fingerprint,
    pub constraints: SplitConstraints,
    pub n_attributes: usize,
    pub n_splittable: usize,
}

pub struct SplitOutcome {
    pub grouping: GroupingOutcome,
    pub splits: SplitSet,
    pub fingerprint: Fingerprint,
}

pub fn run_split(cfg: &RunConfig, inputs: &Inputs) -> Result<SplitOutcome> {
    cfg.validate()?;
    let pool = cfg.thread_pool()?;
    pool.install(|| {
        let grouping = build_grouping(cfg, inputs)?;
        let splits = split_all(
            &inputs.bundle.attributes,
            &grouping.grouping,
            &cfg.effective_constraints(),
        )?;
        Ok(SplitOutcome {
            grouping,
            splits,
            fingerprint: fingerprint(cfg, inputs),
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Excluded {
    pub attribute_id: usize,
    pub attribute: String,
    pub reason: Option<RejectReason>,
}

/// Aggregate of one probe run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub strategy: Strategy,
    pub features_label: String,
    pub baseline: BaselineMode,
    /// raw [0, 1] scale
    pub mean_f1_selectivity: Option<f64>,
    pub cs: Option<f64>,
    pub n_attributes: usize,
    pub n_feasible: usize,
    pub excluded: Vec<Excluded>,
    pub fingerprint: Fingerprint,
    pub constraints: SplitConstraints,
    pub probe: ProbeConfig,
    pub results: Vec<AttributeResult>,
}

/// Trains and evaluates one probe per feasible split.
pub fn run_probes(
    cfg: &RunConfig,
    inputs: &Inputs,
    splits: &[SplitAssignment],
    rejected: &[crate::splitter::Rejection],
    fp: Fingerprint,
) -> Result<RunSummary> {
    let b = &inputs.bundle;
    let cs = &b.concept_set;
    let d = cs.dim();
    let n_attr = b.attributes.n_attributes();
    for sa in splits {
        if sa.attribute_id >= n_attr {
            return Err(Error::Validation(format!(
                "split refers to missing attribute {}",
                sa.attribute_id
            )));
        }
        if sa.side.len() != cs.len() {
            return Err(Error::Validation("split does not cover the concept set".into()));
        }
    }
    let pool = cfg.thread_pool()?;
    let results: Vec<AttributeResult> = pool.install(|| {
        splits
            .par_iter()
            .filter(|sa| sa.feasible)
            .map(|sa| probe_attribute(cfg, b, sa, d))
            .collect::<Result<Vec<_>>>()
    })?;

    let mut excluded: Vec<Excluded> = splits
        .iter()
        .filter(|sa| !sa.feasible)
        .map(|sa| Excluded {
            attribute_id: sa.attribute_id,
            attribute: b.attributes.names()[sa.attribute_id].clone(),
            reason: rejected
                .iter()
                .find(|r| r.attribute_id == sa.attribute_id)
                .map(|r| r.reason),
        })
        .collect();
    excluded.sort_by_key(|e| e.attribute_id);

    Ok(RunSummary {
        strategy: cfg.strategy,
        features_label: inputs.features_label.clone(),
        baseline: cfg.baseline,
        mean_f1_selectivity: mean_selectivity(&results),
        cs: cs_score(&results).ok(),
        n_attributes: n_attr,
        n_feasible: results.len(),
        excluded,
        fingerprint: fp,
        constraints: cfg.effective_constraints(),
        probe: cfg.probe,
        results,
    })
}

fn gather(cs: &ConceptSet, ids: &[usize]) -> Vec<f64> {
    ids.iter().flat_map(|&i| cs.row(i).iter().copied()).collect()
}

fn probe_attribute(cfg: &RunConfig, b: &DatasetBundle, sa: &SplitAssignment, d: usize) -> Result<AttributeResult> {
    let cs = &b.concept_set;
    let labels = b.attributes.column(sa.attribute_id);
    let (train, test) = (sa.train_ids(), sa.test_ids());
    let y_train: Vec<u8> = train.iter().map(|&i| labels[i]).collect();
    let y_test: Vec<u8> = test.iter().map(|&i| labels[i]).collect();
    let model = train_probe(&gather(cs, &train), d, &y_train, &cfg.probe)?;
    let pred = predict(&model, &gather(cs, &test))?;
    let f1 = f1_score(&y_test, &pred)?;
    let test_pos_rate = y_test.iter().filter(|&&v| v == 1).count() as f64 / y_test.len() as f64;
    let positives: Vec<usize> = labels
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == 1)
        .map(|(i, _)| i)
        .collect();
    let dominance = b
        .supercategories
        .as_ref()
        .map(|sm| supercategory_dominance(&positives, sm))
        .transpose()?;
    Ok(AttributeResult::new(
        sa.attribute_id,
        b.attributes.names()[sa.attribute_id].clone(),
        f1,
        test_pos_rate,
        cfg.baseline,
        dominance,
        train.len(),
        test.len(),
        model.converged,
        model.iterations_used,
    ))
}

/// Grouping, splits and probes in one go, without touching the filesystem.
pub fn run_end_to_end(cfg: &RunConfig, inputs: &Inputs) -> Result<(SplitOutcome, RunSummary)> {
    let split = run_split(cfg, inputs)?;
    let summary = run_probes(
        cfg,
        inputs,
        &split.splits.assignments,
        &split.splits.rejected,
        split.fingerprint.clone(),
    )?;
    Ok((split, summary))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

/// `split` command: writes grouping, splits, rejections and diagnostics.
pub fn cmd_split(cfg: &RunConfig) -> Result<SplitOutcome> {
    let inputs = Inputs::load(cfg)?;
    let outcome = run_split(cfg, &inputs)?;
    let names = inputs.bundle.attributes.names();
    let out = &cfg.out;

    write_json(&out.join(GROUPING_FILE), &outcome.grouping.grouping)?;
    if let Some(ca) = &outcome.grouping.clusters {
        write_json(&out.join(CLUSTERS_FILE), ca)?;
    }
    let mut lines = String::new();
    for sa in &outcome.splits.assignments {
        lines.push_str(&serde_json::to_string(&SplitRecord::from_assignment(
            sa,
            &names[sa.attribute_id],
        ))?);
        lines.push('\n');
    }
    write_text(&out.join(SPLITS_FILE), &lines)?;
    write_json(&out.join(REJECTED_FILE), &outcome.splits.rejected)?;
    write_json(&out.join(DIAGNOSTICS_FILE), &outcome.grouping.diagnostics)?;
    let splittable = outcome.splits.splittable().len();
    write_json(
        &out.join(SPLIT_MANIFEST_FILE),
        &SplitManifest {
            strategy: cfg.strategy,
            fingerprint: outcome.fingerprint.clone(),
            constraints: cfg.effective_constraints(),
            n_attributes: names.len(),
            n_splittable: splittable,
        },
    )?;
    if cfg.emit_global_split {
        let sides = majority_vote(&outcome.splits.assignments, &outcome.grouping.grouping);
        let train_ids: Vec<usize> = (0..sides.len()).filter(|&i| sides[i] == Side::Train).collect();
        write_json(
            &out.join(GLOBAL_SPLIT_FILE),
            &serde_json::json!({ "train_ids": train_ids }),
        )?;
    }
    if splittable == 0 {
        return Err(Error::Infeasible(format!(
            "no attribute could be split under the {} strategy; see {}",
            cfg.strategy,
            out.join(REJECTED_FILE).display()
        )));
    }
    Ok(outcome)
}

pub fn load_splits(path: &Path, n_concepts: usize, attribute_names: &[String]) -> Result<Vec<SplitAssignment>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: SplitRecord = serde_json::from_str(line)
            .map_err(|e| Error::format(path.display(), format!("line {}: {e}", line_no + 1)))?;
        match attribute_names.get(rec.attribute_id) {
            Some(name) if *name == rec.attribute => {}
            _ => {
                return Err(Error::Validation(format!(
                    "missing attribute column {:?} (id {}) in the attributes file",
                    rec.attribute, rec.attribute_id
                )))
            }
        }
        out.push(rec.into_assignment(n_concepts)?);
    }
    Ok(out)
}

/// `probe` command: reads a split file and writes per-attribute results and a
/// summary.
pub fn cmd_probe(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let inputs = Inputs::load(cfg)?;
    let splits_path = cfg.splits_file.clone().unwrap_or_else(|| cfg.out.join(SPLITS_FILE));
    let splits = load_splits(
        &splits_path,
        inputs.bundle.concept_set.len(),
        inputs.bundle.attributes.names(),
    )?;
    let fp = fingerprint(cfg, &inputs);

    let manifest_path = splits_path.with_file_name(SPLIT_MANIFEST_FILE);
    let mut rejected = Vec::new();
    if manifest_path.exists() {
        let manifest: SplitManifest =
            serde_json::from_str(&std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?)?;
        if manifest.fingerprint.dataset != fp.dataset {
            return Err(Error::Validation(format!(
                "{} was produced from a different dataset",
                splits_path.display()
            )));
        }
        let rejected_path = splits_path.with_file_name(REJECTED_FILE);
        if rejected_path.exists() {
            rejected = serde_json::from_str(
                &std::fs::read_to_string(&rejected_path).map_err(|e| Error::io(&rejected_path, e))?,
            )?;
        }
    }

    let summary = run_probes(cfg, &inputs, &splits, &rejected, fp)?;
    let mut lines = String::new();
    for r in &summary.results {
        lines.push_str(&serde_json::to_string(r)?);
        lines.push('\n');
    }
    write_text(&cfg.out.join(RESULTS_FILE), &lines)?;
    write_json(&cfg.out.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

/// Report tables rendered from one or more run summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub table1_csv: String,
    pub cs_table_csv: String,
    /// (file name, contents)
    pub scatter: Vec<(String, String)>,
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn build_report(summaries: &[RunSummary]) -> Result<Report> {
    let first = summaries
        .first()
        .ok_or_else(|| Error::Config("report needs at least one results file".into()))?;
    if let Some(bad) = summaries
        .iter()
        .find(|s| s.fingerprint.dataset != first.fingerprint.dataset)
    {
        return Err(Error::Validation(format!(
            "inconsistent dataset fingerprints: {} ({}) vs {} ({})",
            first.features_label, first.strategy, bad.features_label, bad.strategy
        )));
    }

    let mut labels: Vec<&str> = Vec::new();
    let mut cells: BTreeMap<(usize, Strategy), &RunSummary> = BTreeMap::new();
    for s in summaries {
        let row = match labels.iter().position(|l| *l == s.features_label) {
            Some(r) => r,
            None => {
                labels.push(&s.features_label);
                labels.len() - 1
            }
        };
        if cells.insert((row, s.strategy), s).is_some() {
            return Err(Error::Config(format!(
                "two results for features {:?} under the {} strategy",
                s.features_label, s.strategy
            )));
        }
    }
    let strategies: Vec<Strategy> = Strategy::ALL
        .into_iter()
        .filter(|st| cells.keys().any(|(_, s)| s == st))
        .collect();

    let header = std::iter::once("features".to_string())
        .chain(strategies.iter().map(|s| s.to_string()))
        .collect::<Vec<_>>()
        .join(",");

    let mut table1 = header.clone() + "\n";
    let mut cs_table = header + "\n";
    for (r, label) in labels.iter().enumerate() {
        let mut sel_row = vec![csv_cell(label)];
        let mut cs_row = vec![csv_cell(label)];
        for st in &strategies {
            let s = cells.get(&(r, *st));
            sel_row.push(
                s.and_then(|s| s.mean_f1_selectivity)
                    .map_or_else(|| "NA".into(), |v| format!("{:.1}", v * 100.0)),
            );
            cs_row.push(s.and_then(|s| s.cs).map_or_else(|| "NA".into(), |v| format!("{v:.2}")));
        }
        let _ = writeln!(table1, "{}", sel_row.join(","));
        let _ = writeln!(cs_table, "{}", cs_row.join(","));
    }
    let mut cs_row = vec!["CS mean ± std".to_string()];
    for st in &strategies {
        let values: Vec<f64> = cells
            .iter()
            .filter(|((_, s), _)| s == st)
            .filter_map(|(_, sum)| sum.cs)
            .collect();
        if values.is_empty() {
            cs_row.push("NA".into());
            continue;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        cs_row.push(format!("{mean:.2} ± {std:.2}"));
    }
    let _ = writeln!(table1, "{}", cs_row.join(","));

    let scatter = summaries
        .iter()
        .map(|s| {
            let mut text = String::from("attribute_id,attribute,dominance,f1_selectivity\n");
            for r in &s.results {
                let _ = writeln!(
                    text,
                    "{},{},{},{}",
                    r.attribute_id,
                    csv_cell(&r.attribute),
                    r.dominance.map_or_else(String::new, |d| d.to_string()),
                    r.f1_selectivity
                );
            }
            (
                format!("scatter_{}_{}.csv", sanitize(&s.features_label), s.strategy),
                text,
            )
        })
        .collect();

    Ok(Report {
        table1_csv: table1,
        cs_table_csv: cs_table,
        scatter,
    })
}

pub fn cmd_report(cfg: &RunConfig) -> Result<Report> {
    if cfg.results.is_empty() {
        return Err(Error::Config(
            "report needs at least one results file (`results`)".into(),
        ));
    }
    let summaries = cfg
        .results
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str::<RunSummary>(&text).map_err(|e| Error::format(p.display(), e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let report = build_report(&summaries)?;
    write_text(&cfg.out.join(TABLE1_FILE), &report.table1_csv)?;
    write_text(&cfg.out.join(CS_TABLE_FILE), &report.cs_table_csv)?;
    for (name, text) in &report.scatter {
        write_text(&cfg.out.join(name), text)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub k: usize,
    pub is_default: bool,
    pub n_groups: usize,
    pub n_feasible: usize,
    pub mean_f1_selectivity: Option<f64>,
    pub cs: Option<f64>,
}

pub fn run_ablation(cfg: &RunConfig, inputs: &Inputs, ks: &[usize]) -> Result<Vec<AblationRow>> {
    let n = inputs.bundle.concept_set.len();
    if let Some(&bad) = ks.iter().find(|&&k| k == 0 || k > n) {
        return Err(Error::Config(format!("k = {bad} is outside 1..={n}")));
    }
    ks.iter()
        .map(|&k| {
            let run_cfg = RunConfig {
                strategy: Strategy::Clustering,
                k,
                ..cfg.clone()
            };
            let (split, summary) = run_end_to_end(&run_cfg, inputs)?;
            Ok(AblationRow {
                k,
                is_default: k == cfg.k,
                n_groups: split.grouping.grouping.len(),
                n_feasible: summary.n_feasible,
                mean_f1_selectivity: summary.mean_f1_selectivity,
                cs: summary.cs,
            })
        })
        .collect()
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".into(), |v| v.to_string());
    let mut text = String::from("k,default,n_groups,n_feasible,mean_f1_selectivity,cs\n");
    for r in rows {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{}",
            r.k,
            r.is_default as u8,
            r.n_groups,
            r.n_feasible,
            opt(r.mean_f1_selectivity),
            opt(r.cs)
        );
    }
    text
}

pub fn cmd_ablate_k(cfg: &RunConfig, ks: &[usize]) -> Result<Vec<AblationRow>> {
    cfg.effective_constraints().validate()?;
    cfg.probe.validate()?;
    let inputs = Inputs::load(cfg)?;
    let rows = run_ablation(cfg, &inputs, ks)?;
    write_text(&cfg.out.join(ABLATION_FILE), &ablation_csv(&rows))?;
    Ok(rows)
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<crate::synth::PlantedMetadata> {
    let (bundle, planted) = crate::synth::generate(&cfg.synth)?;
    crate::synth::write_bundle(&cfg.out, &bundle, &planted)?;
    Ok(planted)
}

pub fn cmd_suggest_pairs(cfg: &RunConfig) -> Result<crate::llm_client::PairSuggestions> {
    let emb = cfg.required(&cfg.embeddings, "embeddings")?;
    let format = cfg.embeddings_format.unwrap_or_else(|| EmbeddingFormat::from_path(emb));
    let cs = load_embeddings(emb, format)?;
    let suggestions = crate::llm_client::suggest_pairs(cs.names(), &cfg.llm)?;
    let path = cfg.pairs_file.clone().unwrap_or_else(|| cfg.out.join(PAIRS_FILE));
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    suggestions.pairs.write(&path)?;
    Ok(suggestions)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_config_keys_rejected() {
        let err = serde_json::from_str::<RunConfig>(r#"{"strategy":"random","bogus":1}"#).unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn defaults_documented_values() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.k, 100);
        assert_eq!(cfg.top_pairs, 600);
        assert_eq!(cfg.probe.max_iter, 1000);
        assert_eq!(*cfg.ablation_ks.first().unwrap(), 10);
        assert_eq!(*cfg.ablation_ks.last().unwrap(), 400);
    }

    #[test]
    fn random_strategy_drops_pos_rate_term() {
        let cfg = RunConfig {
            strategy: Strategy::Random,
            ..Default::default()
        };
        let c = cfg.effective_constraints();
        assert_eq!((c.penalty_weights.ratio, c.penalty_weights.pos_rate), (1.0, 0.0));
        let cfg = RunConfig {
            strategy: Strategy::Clustering,
            ..Default::default()
        };
        assert_eq!(cfg.effective_constraints().penalty_weights.pos_rate, 2.0);
    }

    #[test]
    fn strategy_parameters_checked() {
        let cfg = RunConfig {
            strategy: Strategy::Clustering,
            k: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = RunConfig {
            strategy: Strategy::Llm,
            embeddings: Some("e.csv".into()),
            attributes: Some("a.csv".into()),
            ..Default::default()
        };
        assert!(matches!(Inputs::load(&cfg), Err(Error::Config(m)) if m.contains("pairs_file")));
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let dir = tempfile::TempDir::new().unwrap();
        let p = dir.path().join("run.json");
        std::fs::write(&p, r#"{"embeddings":"e.csv","out":"o","results":["a/summary.json"]}"#).unwrap();
        let cfg = RunConfig::load(&p).unwrap();
        assert_eq!(cfg.embeddings.unwrap(), dir.path().join("e.csv"));
        assert_eq!(cfg.out, dir.path().join("o"));
        assert_eq!(cfg.results[0], dir.path().join("a/summary.json"));
    }
}
