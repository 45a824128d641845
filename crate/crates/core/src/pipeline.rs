//! Batch runs driven by a TOML config: ingest, classify, profile, link,
//! recommend and evaluate, writing artifacts under one output directory.
//!
//! Every stage recomputes what it depends on in memory but writes only its
//! own artifacts; [`Stage::Pipeline`] writes all of them.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::classifier::{self, ClassifierError, ClassifierId, EmotionLexicon, LexiconClassifier};
use crate::emotion::EmotionVector;
use crate::evaluation::{build_report, holdout_split, EvaluationError, EvaluationReport, ReportFormat, ReportMeta};
use crate::exec::Execution;
use crate::ingest::{
    self, DatasetId, EntityId, IdMap, IngestError, ItemRecord, RatingEvent, RatingScale, Rejection, ScopedId,
};
use crate::pac::{self, CandidatePool, PacError, PacLink, PacReportRow, PoolBuilder};
use crate::profiles::{
    build_item_profile, build_user_profile, group_profile, GroupInput, GroupProfile, ItemProfile, ItemProfileSet,
    ProfileError, UserProfile,
};
use crate::recommend::{self, RatingMatrix, Recommendation, Recommender};
use crate::store::{self, StoreError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("ingest: dataset {dataset}: {source}")]
    Ingest { dataset: String, source: IngestError },
    #[error("classifier: {0}")]
    Classifier(#[from] ClassifierError),
    #[error("profiles: {0}")]
    Profile(#[from] ProfileError),
    #[error("pac: {0}")]
    Pac(#[from] PacError),
    #[error("evaluation: {0}")]
    Evaluation(#[from] EvaluationError),
    #[error("store: {0}")]
    Store(#[from] StoreError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

fn config_err(msg: impl Into<String>) -> PipelineError {
    PipelineError::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Movielens,
    Amazon,
}

/// How a dataset takes part in linking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// Its users are linked and receive recommendations.
    Probe,
    /// Its users are link candidates.
    #[default]
    Pool,
    /// Its items act as group profiles for one-to-many links.
    Group,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupInputKind {
    /// Item profiles already are distributions.
    #[default]
    Distribution,
    /// Raw item vectors are sums over voters; divide by the vote count.
    Aggregate,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    pub domain: String,
    pub format: Option<DatasetFormat>,
    #[serde(default)]
    pub role: Role,
    pub ratings: Option<PathBuf>,
    pub reviews: Option<PathBuf>,
    pub items: Option<PathBuf>,
    pub item_profiles: Option<PathBuf>,
    pub user_profiles: Option<PathBuf>,
    /// `[min, max]`; MovieLens ratings only.
    pub scale: Option<[f64; 2]>,
}

impl DatasetConfig {
    pub fn dataset_id(&self) -> DatasetId {
        DatasetId::new(self.name.clone(), self.domain.clone())
    }

    fn paths(&self) -> impl Iterator<Item = &PathBuf> {
        [&self.ratings, &self.reviews, &self.items, &self.item_profiles, &self.user_profiles].into_iter().flatten()
    }

    fn paths_mut(&mut self) -> impl Iterator<Item = &mut PathBuf> {
        [&mut self.ratings, &mut self.reviews, &mut self.items, &mut self.item_profiles, &mut self.user_profiles]
            .into_iter()
            .flatten()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierConfig {
    pub lexicon: Option<PathBuf>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    1.0
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_tau() -> f64 {
    pac::DEFAULT_TAU
}
fn default_top_n() -> usize {
    20
}
fn default_k() -> usize {
    50
}
fn default_holdout() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_top_n")]
    pub top_n: usize,
    #[serde(default = "default_k")]
    pub k_neighbors: usize,
    #[serde(default)]
    pub format: ReportFormat,
    #[serde(default = "default_holdout")]
    pub holdout_fraction: f64,
    #[serde(default)]
    pub group_input: GroupInputKind,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default, rename = "dataset")]
    pub datasets: Vec<DatasetConfig>,
}

impl RunConfig {
    /// Parse a config; relative paths are taken relative to `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, PipelineError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| config_err(e.to_string().trim_end().to_string()))?;
        cfg.output_dir = base_dir.join(&cfg.output_dir);
        if let Some(p) = cfg.classifier.lexicon.as_mut() {
            *p = base_dir.join(&*p);
        }
        for d in cfg.datasets.iter_mut() {
            for p in d.paths_mut() {
                *p = base_dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Check ranges, dataset declarations and that every path exists.
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(config_err(format!("tau must be in (0, 1], got {}", self.tau)));
        }
        if self.top_n == 0 {
            return Err(config_err("top_n must be at least 1"));
        }
        if self.k_neighbors == 0 {
            return Err(config_err("k_neighbors must be at least 1"));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(config_err(format!("holdout_fraction must be in (0, 1), got {}", self.holdout_fraction)));
        }
        if self.datasets.is_empty() {
            return Err(config_err("no datasets declared"));
        }
        if !self.datasets.iter().any(|d| d.role == Role::Probe) {
            return Err(config_err("no dataset has role = \"probe\""));
        }
        let mut names = HashSet::new();
        for d in &self.datasets {
            if d.name.is_empty() || !names.insert(d.name.as_str()) {
                return Err(config_err(format!("dataset name `{}` is empty or repeated", d.name)));
            }
            match d.format {
                Some(DatasetFormat::Movielens) if d.ratings.is_none() => {
                    return Err(config_err(format!("dataset {}: movielens format needs `ratings`", d.name)))
                }
                Some(DatasetFormat::Amazon) if d.reviews.is_none() => {
                    return Err(config_err(format!("dataset {}: amazon format needs `reviews`", d.name)))
                }
                None if d.user_profiles.is_none() && d.item_profiles.is_none() && d.items.is_none() => {
                    return Err(config_err(format!("dataset {}: needs a format, items or precomputed profiles", d.name)))
                }
                _ => {}
            }
            if let Some([min, max]) = d.scale {
                if !(min.is_finite() && max.is_finite() && min < max) {
                    return Err(config_err(format!("dataset {}: bad scale [{min}, {max}]", d.name)));
                }
            }
            for p in d.paths() {
                if !p.exists() {
                    return Err(config_err(format!("dataset {}: {} does not exist", d.name, p.display())));
                }
            }
        }
        if let Some(p) = &self.classifier.lexicon {
            if !p.exists() {
                return Err(config_err(format!("lexicon {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Classify,
    Profile,
    Pac,
    Recommend,
    Evaluate,
    Pipeline,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Classify => "classify",
            Stage::Profile => "profile",
            Stage::Pac => "pac",
            Stage::Recommend => "recommend",
            Stage::Evaluate => "evaluate",
            Stage::Pipeline => "pipeline",
        }
    }

    fn writes(self, stage: Stage) -> bool {
        self == Stage::Pipeline || self == stage
    }

    fn needs(self, stage: Stage) -> bool {
        match self {
            Stage::Pipeline => true,
            // evaluation compares single-dataset recommenders only
            Stage::Evaluate => !matches!(stage, Stage::Pac | Stage::Recommend | Stage::Pipeline),
            s => stage <= s,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Paths of the artifacts a run wrote, relative to the output directory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub artifacts: Vec<PathBuf>,
}

struct Artifacts<'a> {
    root: &'a Path,
    written: Vec<PathBuf>,
}

impl Artifacts<'_> {
    fn write<F>(&mut self, rel: impl AsRef<Path>, fill: F) -> Result<(), PipelineError>
    where
        F: FnOnce(&mut Vec<u8>) -> io::Result<()>,
    {
        let rel = rel.as_ref();
        let path = self.root.join(rel);
        let io_err = |source| PipelineError::Io { path: path.clone(), source };
        let mut buf = Vec::new();
        fill(&mut buf).map_err(io_err)?;
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err)?;
        }
        fs::write(&path, buf).map_err(io_err)?;
        log::debug!("wrote {}", path.display());
        self.written.push(rel.to_path_buf());
        Ok(())
    }
}

/// Map an entity id onto a file-name-safe stem.
pub fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '.') { c } else { '_' })
        .collect()
}

/// Assigns distinct stems even when sanitizing collapses two ids.
#[derive(Default)]
struct StemTable {
    used: HashSet<String>,
}

impl StemTable {
    fn stem(&mut self, id: &str) -> String {
        let base = file_stem(id);
        let mut stem = base.clone();
        let mut n = 1;
        while !self.used.insert(stem.clone()) {
            n += 1;
            stem = format!("{base}~{n}");
        }
        stem
    }
}

struct Dataset {
    config: DatasetConfig,
    id: DatasetId,
    events: Vec<RatingEvent>,
    items: Vec<ItemRecord>,
    user_ids: Option<IdMap>,
    rejects: Vec<(String, usize, Vec<Rejection>)>,
}

impl Dataset {
    fn name(&self) -> &str {
        &self.config.name
    }
}

fn ingest_dataset(config: &DatasetConfig) -> Result<Dataset, PipelineError> {
    let id = config.dataset_id();
    let wrap = |source| PipelineError::Ingest { dataset: config.name.clone(), source };
    let mut rejects = Vec::new();
    let mut events = Vec::new();
    let mut user_ids = None;
    let report_name = |p: &Path| format!("{}.{}", config.name, ingest::reject_report_name(p));

    match config.format {
        Some(DatasetFormat::Movielens) => {
            let path = config.ratings.as_ref().expect("validated");
            let scale = config.scale.map_or(RatingScale::MOVIELENS, |[min, max]| RatingScale { min, max });
            let read = ingest::read_ratings_table(path, &id, scale).map_err(wrap)?;
            rejects.push((report_name(path), read.records.len(), read.rejects));
            events = read.records;
        }
        Some(DatasetFormat::Amazon) => {
            let path = config.reviews.as_ref().expect("validated");
            let read = ingest::read_amazon_reviews(path, &id).map_err(wrap)?;
            rejects.push((report_name(path), read.records.len(), read.rejects));
            events = read.records;
            let mut map = IdMap::new();
            for e in &events {
                map.to_numeric_id(e.user.id.as_str());
            }
            user_ids = Some(map);
        }
        None => {}
    }

    let items = match &config.items {
        Some(path) => {
            let read = ingest::read_item_metadata(path, &id).map_err(wrap)?;
            rejects.push((report_name(path), read.records.len(), read.rejects));
            read.records
        }
        None if config.format == Some(DatasetFormat::Amazon) => ingest::items_from_reviews(&events),
        None => Vec::new(),
    };
    Ok(Dataset { config: config.clone(), id, events, items, user_ids, rejects })
}

struct Classified {
    profiles: ItemProfileSet,
    skipped: Vec<(ScopedId, String)>,
    /// Raw stored rows, kept for aggregate group input.
    raw: BTreeMap<EntityId, EmotionVector>,
}

fn file_digest(path: &Path) -> Result<String, PipelineError> {
    let bytes = fs::read(path).map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn classify_dataset(
    ds: &Dataset,
    classifier: Option<&LexiconClassifier>,
    exec: Execution,
) -> Result<Classified, PipelineError> {
    let mut out = Classified { profiles: ItemProfileSet::new(), skipped: Vec::new(), raw: BTreeMap::new() };
    if let Some(path) = &ds.config.item_profiles {
        let digest = file_digest(path)?;
        let model = ClassifierId::new("precomputed", &digest[..12]);
        out.raw = store::load_profiles(path)?;
        for (id, v) in classifier::load_precomputed(path)? {
            out.profiles.insert(ItemProfile::from_vector(ds.id.scope(id), v, model.clone(), digest.clone()))?;
        }
        return Ok(out);
    }
    if ds.items.is_empty() {
        return Ok(out);
    }
    let classifier = classifier.ok_or_else(|| {
        config_err(format!("dataset {} has item texts but no [classifier] lexicon is configured", ds.name()))
    })?;
    let built = exec.map(&ds.items, |item| build_item_profile(item, classifier));
    for (item, result) in ds.items.iter().zip(built) {
        match result {
            Ok(p) => out.profiles.insert(p)?,
            Err(e @ ProfileError::NoText(_)) => out.skipped.push((item.item.clone(), e.to_string())),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

fn user_profiles(ds: &Dataset, items: &Classified) -> Result<BTreeMap<ScopedId, UserProfile>, PipelineError> {
    let mut out = BTreeMap::new();
    if let Some(path) = &ds.config.user_profiles {
        for (id, v) in classifier::load_precomputed(path)? {
            let user = ds.id.scope(id);
            out.insert(user.clone(), UserProfile::from_vector(user, v, 1));
        }
        return Ok(out);
    }
    let mut consumed: BTreeMap<&ScopedId, Vec<&ItemProfile>> = BTreeMap::new();
    let mut unprofiled: BTreeSet<&ScopedId> = BTreeSet::new();
    for e in &ds.events {
        match items.profiles.get(&e.item) {
            Some(p) => consumed.entry(&e.user).or_default().push(p),
            None => {
                unprofiled.insert(&e.user);
            }
        }
    }
    for user in unprofiled.iter().filter(|u| !consumed.contains_key(*u)) {
        log::warn!("{user}: no consumed item has a profile, no user profile built");
    }
    for (user, list) in consumed {
        out.insert(user.clone(), build_user_profile(user, &list)?);
    }
    Ok(out)
}

fn group_profiles(ds: &Dataset, items: &Classified, kind: GroupInputKind) -> Result<Vec<GroupProfile>, PipelineError> {
    let votes: BTreeMap<&ScopedId, Option<u64>> = ds.items.iter().map(|i| (&i.item, i.vote_count)).collect();
    let mut out = Vec::new();
    match kind {
        GroupInputKind::Distribution => {
            for p in items.profiles.iter() {
                let count = votes.get(p.item()).copied().flatten().unwrap_or(1);
                match group_profile(p.item(), GroupInput::Distribution(*p.mvec()), count) {
                    Ok(g) => out.push(g),
                    Err(e @ ProfileError::ZeroVotes(_)) => log::warn!("skipping group: {e}"),
                    Err(e) => return Err(e.into()),
                }
            }
        }
        GroupInputKind::Aggregate => {
            if ds.config.item_profiles.is_none() {
                return Err(config_err(format!("dataset {}: aggregate group input needs `item_profiles`", ds.name())));
            }
            for (id, raw) in &items.raw {
                let item = ds.id.scope(id.clone());
                let Some(count) = votes.get(&item).copied().flatten() else {
                    log::warn!("skipping group {item}: no vote count");
                    continue;
                };
                match group_profile(&item, GroupInput::Aggregate(*raw.values()), count) {
                    Ok(g) => out.push(g),
                    Err(e @ ProfileError::ZeroVotes(_)) => log::warn!("skipping group: {e}"),
                    Err(e) => return Err(e.into()),
                }
            }
        }
    }
    Ok(out)
}

/// Links and report rows for every probe user.
struct Linked {
    links: Vec<PacLink>,
    report: Vec<PacReportRow>,
}

fn link_users(
    probes: &[&UserProfile],
    pools: &[CandidatePool],
    combined: Option<&CandidatePool>,
    groups: &[GroupProfile],
    tau: f64,
    exec: Execution,
) -> Result<Linked, PipelineError> {
    let per_user = exec.try_map(probes, |user| -> Result<(Vec<PacLink>, Vec<PacReportRow>), PacError> {
        let (id, v) = (user.user(), user.uvec());
        let mut links = Vec::new();
        let mut report = Vec::new();
        for pool in pools {
            links.push(pac::pac_top_match_with(id, v, pool, Execution::Sequential)?);
            report.push(pac::pac_report_row(id, v, pool)?);
        }
        links.sort_by(|a, b| pac::rank_order(a.aii, &a.target, b.aii, &b.target));
        if let Some(pool) = combined {
            links.extend(pac::pac_threshold_group_with(id, v, pool, tau, Execution::Sequential)?);
        }
        if !groups.is_empty() {
            links.extend(pac::pac_cross_domain_user_to_groups(user, groups, tau)?);
        }
        Ok((links, report))
    })?;
    let mut out = Linked { links: Vec::new(), report: Vec::new() };
    for (links, report) in per_user {
        out.links.extend(links);
        out.report.extend(report);
    }
    Ok(out)
}

/// A run over one config.
pub struct Pipeline {
    config: RunConfig,
    exec: Execution,
}

struct UserRecs {
    dataset: String,
    user: ScopedId,
    lists: Vec<(String, Vec<Recommendation>)>,
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        Ok(Self { config, exec: Execution::default() })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn run(&self, stage: Stage) -> Result<RunSummary, PipelineError> {
        let cfg = &self.config;
        let mut art = Artifacts { root: &cfg.output_dir, written: Vec::new() };
        log::info!("stage {stage}: output under {}", cfg.output_dir.display());

        let datasets = cfg.datasets.iter().map(ingest_dataset).collect::<Result<Vec<_>, _>>()?;
        if stage.writes(Stage::Ingest) {
            write_ingest(&mut art, &datasets)?;
        }
        if !stage.needs(Stage::Classify) {
            return Ok(RunSummary { artifacts: art.written });
        }

        let lexicon = match &cfg.classifier.lexicon {
            Some(path) => Some(LexiconClassifier::new(EmotionLexicon::load(path, cfg.classifier.alpha)?)),
            None => None,
        };
        let classified = datasets
            .iter()
            .map(|ds| classify_dataset(ds, lexicon.as_ref(), self.exec))
            .collect::<Result<Vec<_>, _>>()?;
        if stage.writes(Stage::Classify) {
            for (ds, c) in datasets.iter().zip(&classified) {
                write_classified(&mut art, ds, c)?;
            }
        }
        if !stage.needs(Stage::Profile) {
            return Ok(RunSummary { artifacts: art.written });
        }

        let mut users = Vec::with_capacity(datasets.len());
        let mut groups = Vec::new();
        for (ds, c) in datasets.iter().zip(&classified) {
            users.push(user_profiles(ds, c)?);
            if ds.config.role == Role::Group {
                groups.extend(group_profiles(ds, c, cfg.group_input)?);
            }
        }
        if stage.writes(Stage::Profile) {
            for (ds, u) in datasets.iter().zip(&users) {
                if !u.is_empty() {
                    let rows = u.iter().map(|(id, p)| (id.id.clone(), *p.uvec())).collect();
                    art.write(format!("{}.user_profiles.csv", ds.name()), |w| store::write_profiles(w, &rows))?;
                }
            }
            for ds in datasets.iter().filter(|d| d.config.role == Role::Group) {
                let rows = groups
                    .iter()
                    .filter(|g| g.item.dataset == ds.name())
                    .map(|g| (g.item.id.clone(), g.group_uvec))
                    .collect();
                art.write(format!("{}.group_profiles.csv", ds.name()), |w| store::write_profiles(w, &rows))?;
            }
        }

        let probes: Vec<(&Dataset, &UserProfile)> = datasets
            .iter()
            .zip(&users)
            .filter(|(ds, _)| ds.config.role == Role::Probe)
            .flat_map(|(ds, u)| u.values().map(move |p| (ds, p)))
            .collect();

        let mut links = Vec::new();
        if stage.needs(Stage::Pac) {
            let mut pools = Vec::new();
            let mut combined = PoolBuilder::new("pool");
            for (ds, u) in datasets.iter().zip(&users) {
                if ds.config.role == Role::Pool && !u.is_empty() {
                    let entries = u.iter().map(|(id, p)| (id.clone(), *p.uvec()));
                    pools.push(CandidatePool::from_entries(ds.name(), entries.clone())?);
                    for (id, v) in entries {
                        combined.push(id, v)?;
                    }
                }
            }
            if pools.is_empty() && groups.is_empty() {
                return Err(config_err("pac needs a pool dataset with user profiles or a group dataset"));
            }
            let combined = (!pools.is_empty()).then(|| combined.freeze());
            let probe_profiles: Vec<&UserProfile> = probes.iter().map(|p| p.1).collect();
            let linked = link_users(&probe_profiles, &pools, combined.as_ref(), &groups, cfg.tau, self.exec)?;
            log::info!("{} links for {} probe users", linked.links.len(), probe_profiles.len());
            if stage.writes(Stage::Pac) {
                art.write("links.csv", |w| store::write_links(w, &linked.links))?;
                art.write("pac_report.csv", |w| pac::write_pac_report(w, &linked.report))?;
            }
            links = linked.links;
        }

        let by_name: BTreeMap<&str, (&Dataset, &Classified)> =
            datasets.iter().zip(&classified).map(|(d, c)| (d.name(), (d, c))).collect();

        if stage.needs(Stage::Recommend) {
            let recs = self.recommend_all(&datasets, &classified, &users, &links, &by_name);
            if stage.writes(Stage::Recommend) {
                write_recommendations(&mut art, &recs)?;
            }
        }

        if stage.needs(Stage::Evaluate) {
            let reports = self.evaluate_all(&datasets, &classified)?;
            write_evaluation(&mut art, &reports, cfg.format)?;
        }
        Ok(RunSummary { artifacts: art.written })
    }

    fn recommend_all(
        &self,
        datasets: &[Dataset],
        classified: &[Classified],
        users: &[BTreeMap<ScopedId, UserProfile>],
        links: &[PacLink],
        by_name: &BTreeMap<&str, (&Dataset, &Classified)>,
    ) -> Vec<UserRecs> {
        let cfg = &self.config;
        let mut out = Vec::new();
        for ((ds, c), profiles) in datasets.iter().zip(classified).zip(users) {
            if ds.config.role != Role::Probe {
                continue;
            }
            let matrix = RatingMatrix::from_events(&ds.events);
            let mut ids: BTreeSet<&ScopedId> = profiles.keys().collect();
            ids.extend(matrix.users());
            let ids: Vec<&ScopedId> = ids.into_iter().collect();
            let per_user = self.exec.map(&ids, |&user| {
                let mut lists = Vec::new();
                let mut keep = |name: String, result: Result<Vec<Recommendation>, recommend::RecommendError>| match result {
                    Ok(list) => lists.push((name, list)),
                    Err(e) => log::warn!("recommend: {user}: {name}: {e}"),
                };
                if !ds.events.is_empty() {
                    keep("IBCF".into(), recommend::ibcf_recommend_with(user, &matrix, cfg.top_n, Execution::Sequential));
                    keep(
                        "UBCF".into(),
                        recommend::ubcf_recommend_with(user, &matrix, cfg.top_n, cfg.k_neighbors, Execution::Sequential),
                    );
                }
                if let Some(profile) = profiles.get(user) {
                    if !c.profiles.is_empty() {
                        let mut exclude: BTreeSet<ScopedId> = profile.consumed().clone();
                        exclude.extend(matrix.rated_items(user).into_iter().cloned());
                        keep(
                            "EAR".into(),
                            recommend::ear_recommend_with(profile, c.profiles.iter(), cfg.top_n, &exclude, Execution::Sequential),
                        );
                    }
                }
                for link in links.iter().filter(|l| &l.source == user && l.kind == pac::LinkKind::OneToOne) {
                    if let Some((target, _)) = by_name.get(link.target.dataset.as_str()) {
                        if !target.events.is_empty() {
                            keep(
                                format!("CDR.{}", target.name()),
                                recommend::cross_domain_recommend(user, link, &target.events, cfg.top_n),
                            );
                        }
                    }
                }
                UserRecs { dataset: ds.name().to_string(), user: user.clone(), lists }
            });
            out.extend(per_user);
        }
        out
    }

    fn evaluate_all(&self, datasets: &[Dataset], classified: &[Classified]) -> Result<Vec<EvaluationReport>, PipelineError> {
        let cfg = &self.config;
        let meta = ReportMeta {
            datasets: datasets.iter().map(|d| d.name().to_string()).collect(),
            tau: cfg.tau,
            n: cfg.top_n,
        };
        let mut out = Vec::new();
        for (ds, c) in datasets.iter().zip(classified) {
            if ds.config.role != Role::Probe || ds.events.is_empty() {
                continue;
            }
            let users: Vec<ScopedId> = ds.events.iter().map(|e| e.user.clone()).collect::<BTreeSet<_>>().into_iter().collect();
            let reports = self.exec.try_map(&users, |user| -> Result<Option<EvaluationReport>, PipelineError> {
                let split = match holdout_split(user, &ds.events, cfg.holdout_fraction) {
                    Ok(s) => s,
                    Err(e @ EvaluationError::InsufficientHistory { .. }) => {
                        log::warn!("evaluate: {e}");
                        return Ok(None);
                    }
                    Err(e) => return Err(e.into()),
                };
                let matrix = RatingMatrix::from_events(&split.train);
                let mut columns: Vec<(Recommender, Vec<Recommendation>)> = Vec::new();
                let mut keep = |who: Recommender, result: Result<Vec<Recommendation>, recommend::RecommendError>| match result {
                    Ok(list) if !list.is_empty() => columns.push((who, list)),
                    Ok(_) => log::warn!("evaluate: {user}: {who} returned nothing"),
                    Err(e) => log::warn!("evaluate: {user}: {who}: {e}"),
                };
                keep(Recommender::Ibcf, recommend::ibcf_recommend_with(user, &matrix, cfg.top_n, Execution::Sequential));
                keep(
                    Recommender::Ubcf,
                    recommend::ubcf_recommend_with(user, &matrix, cfg.top_n, cfg.k_neighbors, Execution::Sequential),
                );
                let history: Vec<&ItemProfile> = split
                    .train
                    .iter()
                    .filter(|e| &e.user == user)
                    .filter_map(|e| c.profiles.get(&e.item))
                    .collect();
                if !history.is_empty() {
                    let profile = build_user_profile(user, &history)?;
                    let exclude: BTreeSet<ScopedId> = matrix.rated_items(user).into_iter().cloned().collect();
                    keep(
                        Recommender::Ear,
                        recommend::ear_recommend_with(&profile, c.profiles.iter(), cfg.top_n, &exclude, Execution::Sequential),
                    );
                }
                // columns must be equally long; cut every list to the shortest
                let Some(len) = columns.iter().map(|c| c.1.len()).min() else {
                    return Ok(None);
                };
                for col in columns.iter_mut() {
                    col.1.truncate(len);
                }
                Ok(Some(build_report(user, columns, &split.relevant, meta.clone())?))
            })?;
            out.extend(reports.into_iter().flatten());
        }
        Ok(out)
    }
}

fn write_ingest(art: &mut Artifacts, datasets: &[Dataset]) -> Result<(), PipelineError> {
    art.write("ingest_summary.csv", |w| {
        writeln!(w, "dataset,source,records,rejected")?;
        for ds in datasets {
            for (report, records, rejects) in &ds.rejects {
                let source = report.strip_suffix(".rejects.txt").unwrap_or(report);
                let source = source.strip_prefix(&format!("{}.", ds.name())).unwrap_or(source);
                writeln!(w, "{},{},{},{}", ds.name(), source, records, rejects.len())?;
            }
        }
        Ok(())
    })?;
    for ds in datasets {
        for (report, _, rejects) in &ds.rejects {
            art.write(report, |w| ingest::write_reject_report(w, rejects))?;
        }
        if let Some(map) = &ds.user_ids {
            art.write(format!("{}.user_idmap.csv", ds.name()), |w| store::write_id_map(w, map))?;
        }
    }
    Ok(())
}

fn write_classified(art: &mut Artifacts, ds: &Dataset, c: &Classified) -> Result<(), PipelineError> {
    if c.profiles.is_empty() && c.skipped.is_empty() {
        return Ok(());
    }
    let rows = c.profiles.iter().map(|p| (p.item().id.clone(), *p.mvec())).collect();
    art.write(format!("{}.item_profiles.csv", ds.name()), |w| store::write_profiles(w, &rows))?;
    if !c.skipped.is_empty() {
        art.write(format!("{}.skipped_items.txt", ds.name()), |w| {
            for (item, reason) in &c.skipped {
                writeln!(w, "{}: {reason}", item.id)?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn write_recommendations(art: &mut Artifacts, recs: &[UserRecs]) -> Result<(), PipelineError> {
    let mut stems: BTreeMap<&str, StemTable> = BTreeMap::new();
    for user in recs {
        if user.lists.is_empty() {
            continue;
        }
        let stem = stems.entry(&user.dataset).or_default().stem(user.user.id.as_str());
        let dir = Path::new("recommendations").join(&user.dataset);
        let mut notes = Vec::new();
        for (name, list) in &user.lists {
            art.write(dir.join(format!("{stem}.{name}.csv")), |w| recommend::write_recommendations(w, list))?;
            for r in list {
                if let Some(text) = &r.explanation {
                    notes.push(format!("{name} {} {}: {text}", r.rank, r.item));
                }
            }
        }
        if !notes.is_empty() {
            art.write(dir.join(format!("{stem}.explanations.txt")), |w| {
                for line in &notes {
                    writeln!(w, "{line}")?;
                }
                Ok(())
            })?;
        }
    }
    Ok(())
}

fn write_evaluation(art: &mut Artifacts, reports: &[EvaluationReport], format: ReportFormat) -> Result<(), PipelineError> {
    let mut stems: BTreeMap<&str, StemTable> = BTreeMap::new();
    for report in reports {
        let stem = stems.entry(&report.user.dataset).or_default().stem(report.user.id.as_str());
        let rel = Path::new("evaluation").join(&report.user.dataset).join(format!("{stem}.{}", format.extension()));
        art.write(rel, |w| report.write(w, format))?;
    }
    art.write("evaluation/summary.csv", |w| {
        let order = [Recommender::Ibcf, Recommender::Ubcf, Recommender::Ear];
        writeln!(w, "dataset,user,rows,{}", order.map(|r| r.tag()).join(","))?;
        for report in reports {
            let cells: Vec<String> = order
                .iter()
                .map(|who| {
                    report
                        .columns
                        .iter()
                        .find(|c| c.recommender == *who)
                        .map(|c| format!("{:.6}", c.hit_rate.percent()))
                        .unwrap_or_default()
                })
                .collect();
            let mut line = csv::Writer::from_writer(Vec::new());
            let mut record = vec![report.user.dataset.clone(), report.user.id.to_string(), report.rows().to_string()];
            record.extend(cells);
            line.write_record(&record).map_err(io::Error::other)?;
            w.write_all(&line.into_inner().map_err(|e| io::Error::other(e.to_string()))?)?;
        }
        Ok(())
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_relative_paths() {
        let cfg = RunConfig::parse(
            "[[dataset]]\nname = \"a\"\ndomain = \"movies\"\nrole = \"probe\"\nuser_profiles = \"a.csv\"\n",
            Path::new("/base"),
        )
        .unwrap();
        assert_eq!(cfg.tau, 0.98);
        assert_eq!(cfg.top_n, 20);
        assert_eq!(cfg.output_dir, PathBuf::from("/base/out"));
        assert_eq!(cfg.datasets[0].user_profiles.as_deref(), Some(Path::new("/base/a.csv")));
        // the file does not exist
        assert!(matches!(cfg.validate(), Err(PipelineError::Config(_))));
    }

    #[test]
    fn config_rejects_bad_values() {
        let base = "[[dataset]]\nname = \"a\"\ndomain = \"m\"\nrole = \"probe\"\nuser_profiles = \"/\"\n";
        let ok = RunConfig::parse(base, Path::new("/")).unwrap();
        ok.validate().unwrap();
        for bad in ["tau = 0.0\n", "tau = 1.5\n", "top_n = 0\n", "holdout_fraction = 1.0\n"] {
            let cfg = RunConfig::parse(&format!("{bad}{base}"), Path::new("/")).unwrap();
            assert!(cfg.validate().is_err(), "{bad}");
        }
        assert!(RunConfig::parse("bogus = 1\n", Path::new("/")).is_err());
        let empty = RunConfig::parse("", Path::new("/")).unwrap();
        assert!(matches!(empty.validate(), Err(PipelineError::Config(m)) if m.contains("no datasets")));
    }

    #[test]
    fn stems_are_safe_and_distinct() {
        let mut t = StemTable::default();
        assert_eq!(t.stem("A1|Smith, J."), "A1_Smith__J.");
        assert_eq!(t.stem("A1_Smith__J."), "A1_Smith__J.~2");
        assert_eq!(t.stem("400"), "400");
    }

    #[test]
    fn stage_dependencies() {
        assert!(Stage::Pac.needs(Stage::Profile));
        assert!(!Stage::Classify.needs(Stage::Profile));
        assert!(!Stage::Evaluate.needs(Stage::Pac));
        assert!(Stage::Pipeline.writes(Stage::Ingest));
        assert!(!Stage::Pac.writes(Stage::Ingest));
    }
}
