//! Configured, reproducible pipeline stages.
//!
//! Every stage reads declared inputs below the output directory (or the
//! paths given in the config), writes its outputs next to them, and derives
//! its randomness from the root seed and a fixed stage tag.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::city::CityContext;
use crate::cost_model::{encode_city, save_loss_csv, train_cost, CostConfig, CostModel, TrainedCost};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, MetricReport, DEFAULT_BINS, DEFAULT_EDR_EPSILON};
use crate::preference::{
    generate, generate_random_walk, generate_uniform, train_preference, Generated,
    PreferenceConfig, PreferenceInputs, PreferenceModel,
};
use crate::road_network::{
    compute_cost_labels, load_trajectories, preprocess_trajectories, save_trajectories,
    synth_city_with, CostLabels, DemandSet, RoadNetwork, SynthConfig, Trajectory,
};
use crate::autodiff::ParamStore;
use crate::seed::{self, derive_seed};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CityPaths {
    pub network: Option<PathBuf>,
    pub trajectories: Option<PathBuf>,
    /// Generation demands; defaults to the OD pairs of the trajectories.
    pub demands: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    /// Seeds of the two synthetic cities; derived from the root seed when
    /// absent.
    pub source_seed: Option<u64>,
    pub target_seed: Option<u64>,
    pub rows: usize,
    pub cols: usize,
    pub jitter: f64,
    pub trips: usize,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            source_seed: None,
            target_seed: None,
            rows: 10,
            cols: 10,
            jitter: 0.1,
            trips: 1500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FineTuneSection {
    pub cost_epochs: usize,
    pub preference_epochs: usize,
}

impl Default for FineTuneSection {
    fn default() -> Self {
        FineTuneSection {
            cost_epochs: 20,
            preference_epochs: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub edr_epsilon: f64,
    pub bins: usize,
    /// Step cap of the random-walk baseline.
    pub random_walk_max_len: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            edr_epsilon: DEFAULT_EDR_EPSILON,
            bins: DEFAULT_BINS,
            random_walk_max_len: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
    pub output_dir: PathBuf,
    pub source: CityPaths,
    pub target: CityPaths,
    pub synth: SynthSection,
    pub cost: CostConfig,
    pub preference: PreferenceConfig,
    pub fine_tune: FineTuneSection,
    pub eval: EvalSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 42,
            threads: 0,
            output_dir: PathBuf::from("out"),
            source: CityPaths::default(),
            target: CityPaths::default(),
            synth: SynthSection::default(),
            cost: CostConfig::default(),
            preference: PreferenceConfig::default(),
            fine_tune: FineTuneSection::default(),
            eval: EvalSection::default(),
        }
    }
}

impl PipelineConfig {
    /// Parses TOML, applies `section.key=value` overrides, validates, and
    /// resolves relative paths against `base_dir`.
    pub fn from_toml(text: &str, overrides: &[String], base_dir: &Path) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: PipelineConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        cfg.resolve(base_dir);
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::Config(format!("{}: not found", path.display())),
            _ => Error::io(path, e),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        PipelineConfig::from_toml(&text, overrides, base)
    }

    pub fn validate(&self) -> Result<()> {
        self.cost.validate()?;
        self.preference.validate()?;
        if !(self.eval.edr_epsilon.is_finite() && self.eval.edr_epsilon > 0.0) {
            return Err(Error::Config("eval.edr_epsilon must be positive".into()));
        }
        if self.eval.bins == 0 || self.eval.random_walk_max_len == 0 {
            return Err(Error::Config(
                "eval.bins and eval.random_walk_max_len must be positive".into(),
            ));
        }
        if self.synth.rows < 3 || self.synth.cols < 3 || !(0.0..0.5).contains(&self.synth.jitter) {
            return Err(Error::Config(
                "synth grid must be at least 3x3 with jitter in [0, 0.5)".into(),
            ));
        }
        Ok(())
    }

    fn resolve(&mut self, base: &Path) {
        let abs = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        self.output_dir = abs(&self.output_dir);
        let out = self.output_dir.clone();
        for (city, name) in [(&mut self.source, "source"), (&mut self.target, "target")] {
            city.network = Some(
                city.network
                    .as_deref()
                    .map_or_else(|| out.join(name).join("network.json"), abs),
            );
            city.trajectories = Some(
                city.trajectories
                    .as_deref()
                    .map_or_else(|| out.join(name).join("trajectories.txt"), abs),
            );
            city.demands = city.demands.as_deref().map(abs);
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }

    fn network_path(&self, city: City) -> &Path {
        self.paths(city).network.as_deref().expect("resolved")
    }

    fn trajectories_path(&self, city: City) -> &Path {
        self.paths(city).trajectories.as_deref().expect("resolved")
    }

    fn paths(&self, city: City) -> &CityPaths {
        match city {
            City::Source => &self.source,
            City::Target => &self.target,
        }
    }

    pub fn stage_seed(&self, tag: &str) -> u64 {
        derive_seed(self.seed, tag)
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {spec:?} is not key=value")))?;
    let value: toml::Value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut parts: Vec<&str> = key.trim().split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| {
        Error::Config(format!("override {spec:?} has an empty key"))
    })?;
    let mut cur = table;
    for p in parts {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("{p} is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum City {
    Source,
    Target,
}

impl City {
    pub fn name(self) -> &'static str {
        match self {
            City::Source => "source",
            City::Target => "target",
        }
    }
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn load_context(cfg: &PipelineConfig, city: City) -> Result<CityContext> {
    let net = RoadNetwork::load(cfg.network_path(city))?;
    CityContext::prepare(
        net,
        cfg.cost.cluster_count(),
        cfg.stage_seed(&format!("{}-context", city.name())),
    )
}

fn load_clean_trajectories(cfg: &PipelineConfig, city: City, net: &RoadNetwork) -> Result<Vec<Trajectory>> {
    let raw = load_trajectories(cfg.trajectories_path(city))?;
    for t in &raw {
        t.validate(net)?;
    }
    Ok(preprocess_trajectories(&raw))
}

/// Writes a synthetic source and target city into the output directory.
pub fn stage_synth_city(cfg: &PipelineConfig) -> Result<()> {
    for (city, fixed) in [
        (City::Source, cfg.synth.source_seed),
        (City::Target, cfg.synth.target_seed),
    ] {
        let seed = fixed.unwrap_or_else(|| cfg.stage_seed(&format!("{}-city", city.name())));
        let synth = SynthConfig {
            trips: cfg.synth.trips,
            ..SynthConfig::new(seed, cfg.synth.rows, cfg.synth.cols, cfg.synth.jitter)
        };
        let c = synth_city_with(&synth)?;
        let net_path = cfg.network_path(city);
        if let Some(dir) = net_path.parent() {
            ensure_dir(dir)?;
        }
        c.network.save(net_path)?;
        let traj_path = cfg.trajectories_path(city);
        if let Some(dir) = traj_path.parent() {
            ensure_dir(dir)?;
        }
        save_trajectories(traj_path, &c.trajectories)?;
    }
    Ok(())
}

/// Feature CSVs for both cities.
pub fn stage_features(cfg: &PipelineConfig) -> Result<()> {
    ensure_dir(&cfg.output_dir)?;
    for city in [City::Source, City::Target] {
        let ctx = load_context(cfg, city)?;
        ctx.features
            .save_csv(cfg.out(&format!("{}_features.csv", city.name())))?;
    }
    Ok(())
}

/// Partition CSVs for both cities.
pub fn stage_partition(cfg: &PipelineConfig) -> Result<()> {
    ensure_dir(&cfg.output_dir)?;
    for city in [City::Source, City::Target] {
        let ctx = load_context(cfg, city)?;
        ctx.partition
            .save_csv(cfg.out(&format!("{}_partition.csv", city.name())))?;
    }
    Ok(())
}

fn load_cost(cfg: &PipelineConfig, path: &Path) -> Result<TrainedCost> {
    let mut state = TrainedCost::initialize(&cfg.cost, cfg.stage_seed("cost-init"))?;
    state.store.load(path)?;
    Ok(state)
}

fn new_preference(cfg: &PipelineConfig) -> Result<(PreferenceModel, ParamStore)> {
    let mut store = ParamStore::new();
    let model = PreferenceModel::new(
        &mut store,
        cfg.cost.latent_dim,
        &cfg.preference,
        &mut seed::rng(cfg.stage_seed("preference-init")),
    )?;
    Ok((model, store))
}

fn preference_inputs(model: &CostModel, store: &ParamStore, ctx: &CityContext) -> Result<PreferenceInputs> {
    let enc = encode_city(model, store, ctx)?;
    PreferenceInputs::from_encoding(&enc, model.label_scale(store))
}

fn labels_for(ctx: &CityContext, trajs: &[Trajectory]) -> Result<CostLabels> {
    let labels = compute_cost_labels(&ctx.network, trajs);
    if labels.is_empty() {
        return Err(Error::InvalidArgument(
            "trajectories carry no traversal times, so no cost labels".into(),
        ));
    }
    Ok(labels)
}

/// Adversarial cost-model training on the source city.
pub fn stage_train_cost(cfg: &PipelineConfig) -> Result<()> {
    ensure_dir(&cfg.output_dir)?;
    let src = load_context(cfg, City::Source)?;
    let tgt = load_context(cfg, City::Target)?;
    let labels = labels_for(&src, &load_clean_trajectories(cfg, City::Source, &src.network)?)?;
    labels.save(cfg.out("source_labels.csv"))?;
    let mut state = TrainedCost::initialize(&cfg.cost, cfg.stage_seed("cost-init"))?;
    state.fit_label_scale(&labels)?;
    train_cost(
        &mut state,
        &src,
        &labels,
        &tgt,
        cfg.cost.epochs,
        cfg.stage_seed("cost-train"),
        |e, r| log::info!("cost epoch {e}: total {:.6} mse {:.6} rank {:.6}", r.l_total, r.l_mse, r.l_rank),
    )?;
    state.store.save(cfg.out("cost_model.json"))?;
    save_loss_csv(&state.history, cfg.out("cost_loss.csv"))
}

fn save_curve(curve: &[f64], path: &Path) -> Result<()> {
    let mut out = String::from("epoch,l_pref\n");
    for (e, v) in curve.iter().enumerate() {
        out.push_str(&format!("{e},{v}\n"));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Preference training on source trajectories with the cost model frozen.
pub fn stage_train_pref(cfg: &PipelineConfig) -> Result<()> {
    let src = load_context(cfg, City::Source)?;
    let trajs = load_clean_trajectories(cfg, City::Source, &src.network)?;
    let cost = load_cost(cfg, &cfg.out("cost_model.json"))?;
    let inputs = preference_inputs(&cost.model, &cost.store, &src)?;
    let (model, mut store) = new_preference(cfg)?;
    let curve = train_preference(
        &model,
        &mut store,
        &src.network,
        &inputs,
        &trajs,
        &cfg.preference,
        cfg.preference.epochs,
        cfg.stage_seed("preference-train"),
    )?;
    store.save(cfg.out("preference.json"))?;
    save_curve(&curve.epochs, &cfg.out("pref_loss.csv"))
}

/// Continues cost and preference training on target-city trajectories.
pub fn stage_fine_tune(cfg: &PipelineConfig) -> Result<()> {
    let src = load_context(cfg, City::Source)?;
    let tgt = load_context(cfg, City::Target)?;
    let trajs = load_clean_trajectories(cfg, City::Target, &tgt.network)?;
    let labels = labels_for(&tgt, &trajs)?;
    let mut cost = load_cost(cfg, &cfg.out("cost_model.json"))?;
    train_cost(
        &mut cost,
        &tgt,
        &labels,
        &src,
        cfg.fine_tune.cost_epochs,
        cfg.stage_seed("fine-tune-cost"),
        |_, _| {},
    )?;
    cost.store.save(cfg.out("cost_model_finetuned.json"))?;
    save_loss_csv(&cost.history, cfg.out("cost_loss_finetuned.csv"))?;

    let inputs = preference_inputs(&cost.model, &cost.store, &tgt)?;
    let (model, mut store) = new_preference(cfg)?;
    store.load(cfg.out("preference.json"))?;
    let curve = train_preference(
        &model,
        &mut store,
        &tgt.network,
        &inputs,
        &trajs,
        &cfg.preference,
        cfg.fine_tune.preference_epochs,
        cfg.stage_seed("fine-tune-preference"),
    )?;
    store.save(cfg.out("preference_finetuned.json"))?;
    save_curve(&curve.epochs, &cfg.out("pref_loss_finetuned.csv"))
}

fn target_demands(cfg: &PipelineConfig, net: &RoadNetwork) -> Result<DemandSet> {
    match &cfg.target.demands {
        Some(p) => DemandSet::load(p, net),
        None => {
            let trajs = load_clean_trajectories(cfg, City::Target, net)?;
            DemandSet::from_trajectories(net, &trajs)
        }
    }
}

/// Generates target-city trajectories. `fine_tuned` selects the fine-tuned
/// checkpoints.
pub fn stage_generate(cfg: &PipelineConfig, fine_tuned: bool) -> Result<Generated> {
    let tgt = load_context(cfg, City::Target)?;
    let demands = target_demands(cfg, &tgt.network)?;
    let suffix = if fine_tuned { "_finetuned" } else { "" };
    let cost = load_cost(cfg, &cfg.out(&format!("cost_model{suffix}.json")))?;
    let inputs = preference_inputs(&cost.model, &cost.store, &tgt)?;
    let (model, mut store) = new_preference(cfg)?;
    store.load(cfg.out(&format!("preference{suffix}.json")))?;
    let prefs = model.preferences(&store, &inputs)?;
    let generated = generate(&tgt.network, &demands, &prefs)?;
    save_trajectories(cfg.out("generated.txt"), &generated.trajectories)?;
    generated.save_infeasible(cfg.out("infeasible.csv"))?;
    Ok(generated)
}

#[derive(Debug, Clone, Serialize)]
pub struct BaselineReports {
    pub model: MetricReport,
    pub uniform: MetricReport,
    pub random_walk: MetricReport,
}

/// Compares generated trajectories (and two baselines on the same demands)
/// with the real target-city trajectories.
pub fn stage_evaluate(cfg: &PipelineConfig) -> Result<MetricReport> {
    let net = RoadNetwork::load(cfg.network_path(City::Target))?;
    let real = load_clean_trajectories(cfg, City::Target, &net)?;
    let generated = load_trajectories(cfg.out("generated.txt"))?;
    let report = evaluate(&real, &generated, &net, cfg.eval.edr_epsilon, cfg.eval.bins)?;
    report.save_json(cfg.out("report.json"))?;
    report.save_pairs_csv(cfg.out("pairs.csv"))?;
    report.save_histograms_csv(cfg.out("histograms.csv"))?;

    let demands = DemandSet::from_trajectories(&net, &real)?;
    let uniform = generate_uniform(&net, &demands)?;
    let walk = generate_random_walk(
        &net,
        &demands,
        cfg.eval.random_walk_max_len,
        cfg.stage_seed("random-walk"),
    );
    let baselines = BaselineReports {
        model: report.clone(),
        uniform: evaluate(&real, &uniform.trajectories, &net, cfg.eval.edr_epsilon, cfg.eval.bins)?,
        random_walk: evaluate(&real, &walk.trajectories, &net, cfg.eval.edr_epsilon, cfg.eval.bins)?,
    };
    let path = cfg.out("baselines.json");
    let mut text = serde_json::to_string_pretty(&baselines).expect("reports serialize");
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(report)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
struct Manifest {
    version: &'static str,
    root_seed: u64,
    config_sha256: String,
    stage_seeds: BTreeMap<&'static str, u64>,
    artifacts: BTreeMap<String, String>,
}

pub const STAGE_TAGS: [&str; 9] = [
    "source-city",
    "target-city",
    "source-context",
    "target-context",
    "cost-init",
    "cost-train",
    "preference-init",
    "preference-train",
    "random-walk",
];

/// Records seeds and SHA-256 digests of every file in the output directory.
pub fn write_manifest(cfg: &PipelineConfig, config_text: &str) -> Result<()> {
    let mut artifacts = BTreeMap::new();
    collect_digests(&cfg.output_dir, &cfg.output_dir, &mut artifacts)?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        root_seed: cfg.seed,
        config_sha256: sha256_hex(config_text.as_bytes()),
        stage_seeds: STAGE_TAGS.iter().map(|&t| (t, cfg.stage_seed(t))).collect(),
        artifacts,
    };
    let path = cfg.out("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn collect_digests(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) -> Result<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect_digests(root, &path, out)?;
        } else if path.file_name().is_some_and(|n| n != "manifest.json") {
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let rel = path.strip_prefix(root).unwrap_or(&path);
            out.insert(rel.to_string_lossy().replace('\\', "/"), sha256_hex(&bytes));
        }
    }
    Ok(())
}

/// Runs `f` on a pool with the configured number of threads.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Synthetic cities (when the source network is missing), features,
/// partition, cost training, preference training, generation, evaluation
/// and the manifest.
pub fn run_all(cfg: &PipelineConfig, config_text: &str) -> Result<MetricReport> {
    ensure_dir(&cfg.output_dir)?;
    if !cfg.network_path(City::Source).exists() || !cfg.network_path(City::Target).exists() {
        stage_synth_city(cfg)?;
    }
    stage_features(cfg)?;
    stage_partition(cfg)?;
    stage_train_cost(cfg)?;
    stage_train_pref(cfg)?;
    stage_generate(cfg, false)?;
    let report = stage_evaluate(cfg)?;
    write_manifest(cfg, config_text)?;
    Ok(report)
}
