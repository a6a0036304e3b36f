//! Config-driven experiment pipelines.
//!
//! A flat `key=value` config file describes one experiment; [`run`] executes
//! the full pipeline (ingest, stage, train, forecast, evaluate, fairness)
//! and drops CSV artifacts plus a manifest into the output directory. The
//! manifest is itself a valid config: re-running it reproduces every CSV
//! byte for byte. Smaller entry points ([`stats_emit`], [`drift_emit`], ...)
//! back the individual CLI subcommands.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::dataset::{
    chrono_split, load_interactions, split_stages, IdMap, InteractionLog, LogSchema,
    PopularitySource, PopularityTable, StagedInteractions,
};
use crate::error::Error;
use crate::evaluation::{
    accuracy_metrics, build_groups, fairness_report, positives_by_user, rank_all_users,
    FairnessReport, GroupSpec, PositiveKind, RankingReport,
};
use crate::model::{
    bin_pop_factor_means, load_checkpoint, mbd_inference_score, pd_score, pda_score,
    save_checkpoint, FactorModel, ScoreParams, ScoreVariant,
};
use crate::popularity::{drift_series, forecast_from_table};
use crate::synth::{generate, SynthConfig};
use crate::training::{fit, interacted_sets, FitOutcome, OptimizerKind, TrainConfig, TrainMode, TrainedModel};
use crate::Result;

/// Experiment mode: the three trainers plus the inference-time variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentMode {
    Pd,
    Pda,
    Mbd,
    /// Multi-behavior training with both exponents forced to zero.
    EsmmEq,
    /// Multi-behavior training, ranked with the bin-mean popularity factor.
    AblationDoI,
    /// Multi-behavior training, ranked with the item's own popularity factor.
    AblationDoQ,
}

impl ExperimentMode {
    fn as_str(self) -> &'static str {
        match self {
            ExperimentMode::Pd => "PD",
            ExperimentMode::Pda => "PDA",
            ExperimentMode::Mbd => "MBD",
            ExperimentMode::EsmmEq => "ESMM-eq",
            ExperimentMode::AblationDoI => "ablation-doI",
            ExperimentMode::AblationDoQ => "ablation-doQ",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pd" => Ok(ExperimentMode::Pd),
            "pda" => Ok(ExperimentMode::Pda),
            "mbd" => Ok(ExperimentMode::Mbd),
            "esmm-eq" | "esmm" => Ok(ExperimentMode::EsmmEq),
            "ablation-doi" => Ok(ExperimentMode::AblationDoI),
            "ablation-doq" => Ok(ExperimentMode::AblationDoQ),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }

    fn is_multi_behavior(self) -> bool {
        matches!(
            self,
            ExperimentMode::Mbd
                | ExperimentMode::EsmmEq
                | ExperimentMode::AblationDoI
                | ExperimentMode::AblationDoQ
        )
    }
}

/// Data source and split settings.
#[derive(Debug, Clone)]
pub struct DataConfig {
    pub path: PathBuf,
    pub has_header: bool,
    pub labels: bool,
    pub min_interactions: u32,
    pub popularity_from: PopularitySource,
    pub stages: usize,
    pub ratios: (f64, f64, f64),
}

/// Synthetic-generator settings (used by the `synth` entry point).
#[derive(Debug, Clone)]
pub struct SynthSection {
    pub users: usize,
    pub items: usize,
    pub stages: usize,
    pub d_true: usize,
    pub gamma: f64,
    pub beta: f64,
    pub drift: f64,
    pub per_stage: usize,
    pub mbd: bool,
    pub rho_t: f64,
    pub pop_spread: f64,
}

/// Hyper-parameter grids for [`grid_search`].
#[derive(Debug, Clone)]
pub struct GridConfig {
    pub gamma: Vec<f64>,
    pub alpha: Vec<f64>,
    pub gamma_r: Vec<f64>,
    pub gamma_z: Vec<f64>,
}

/// A fully resolved experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub mode: ExperimentMode,
    pub seed: u64,
    pub out: PathBuf,
    pub threads: usize,
    pub data: DataConfig,
    pub dim: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub neg_per_pos: usize,
    pub optimizer: OptimizerKind,
    pub val_k: usize,
    pub params: ScoreParams,
    pub variant: ScoreVariant,
    pub forecast_alpha: f64,
    pub eval_ks: Vec<usize>,
    pub eval_on: PositiveKind,
    pub fairness_bins: usize,
    pub fairness_subgroups: usize,
    pub grid: GridConfig,
    pub synth: SynthSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: ExperimentMode::Pd,
            seed: 42,
            out: PathBuf::from("poprec-out"),
            threads: 1,
            data: DataConfig {
                path: PathBuf::new(),
                has_header: false,
                labels: false,
                min_interactions: 0,
                popularity_from: PopularitySource::Clicks,
                stages: 10,
                ratios: (0.8, 0.1, 0.1),
            },
            dim: 32,
            learning_rate: 0.01,
            l2: 1e-4,
            epochs: 100,
            patience: 10,
            batch_size: 1,
            neg_per_pos: 1,
            optimizer: OptimizerKind::Sgd,
            val_k: 50,
            params: ScoreParams {
                gamma: 1.0,
                gamma_tilde: 1.0,
                gamma_r: 1.0,
                gamma_z: 1.0,
                gamma_zc: 0.0,
            },
            variant: ScoreVariant::Standard,
            forecast_alpha: 0.1,
            eval_ks: vec![50, 100],
            eval_on: PositiveKind::Clicks,
            fairness_bins: 5,
            fairness_subgroups: 2,
            grid: GridConfig {
                gamma: vec![],
                alpha: vec![],
                gamma_r: vec![],
                gamma_z: vec![],
            },
            synth: SynthSection {
                users: 200,
                items: 100,
                stages: 10,
                d_true: 8,
                gamma: 1.0,
                beta: 1.0,
                drift: 0.2,
                per_stage: 2000,
                mbd: false,
                rho_t: 0.0,
                pop_spread: 1.0,
            },
        }
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true/false, got {v:?}"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn parse_list_f64(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num::<f64>(key, s))
        .collect()
}

fn parse_list_usize(key: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num::<usize>(key, s))
        .collect()
}

impl ExperimentConfig {
    /// Parse a flat `key=value` config. `#` starts a comment; `meta.*` keys
    /// are ignored so a manifest is itself a runnable config. Unknown keys
    /// are rejected.
    pub fn from_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, got {line:?}", idx + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref())?;
        Self::from_str(&text)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            k if k.starts_with("meta.") => {}
            "mode" => self.mode = ExperimentMode::parse(v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "threads" => self.threads = parse_num(key, v)?,
            "data.path" => self.data.path = PathBuf::from(v),
            "data.has_header" => self.data.has_header = parse_bool(key, v)?,
            "data.labels" => self.data.labels = parse_bool(key, v)?,
            "data.min_interactions" => self.data.min_interactions = parse_num(key, v)?,
            "data.popularity_from" => {
                self.data.popularity_from = match v {
                    "clicks" => PopularitySource::Clicks,
                    "post" => PopularitySource::PostClicks,
                    _ => return Err(Error::Config(format!("{key}: expected clicks|post, got {v:?}"))),
                }
            }
            "data.stages" => self.data.stages = parse_num(key, v)?,
            "data.train_ratio" => self.data.ratios.0 = parse_num(key, v)?,
            "data.valid_ratio" => self.data.ratios.1 = parse_num(key, v)?,
            "data.test_ratio" => self.data.ratios.2 = parse_num(key, v)?,
            "train.dim" => self.dim = parse_num(key, v)?,
            "train.lr" => self.learning_rate = parse_num(key, v)?,
            "train.l2" => self.l2 = parse_num(key, v)?,
            "train.epochs" => self.epochs = parse_num(key, v)?,
            "train.patience" => self.patience = parse_num(key, v)?,
            "train.batch_size" => self.batch_size = parse_num(key, v)?,
            "train.neg_per_pos" => self.neg_per_pos = parse_num(key, v)?,
            "train.optimizer" => {
                self.optimizer = match v {
                    "sgd" => OptimizerKind::Sgd,
                    "adam" => OptimizerKind::Adam,
                    _ => return Err(Error::Config(format!("{key}: expected sgd|adam, got {v:?}"))),
                }
            }
            "train.val_k" => self.val_k = parse_num(key, v)?,
            "score.gamma" => self.params.gamma = parse_num(key, v)?,
            "score.gamma_tilde" => self.params.gamma_tilde = parse_num(key, v)?,
            "score.gamma_r" => self.params.gamma_r = parse_num(key, v)?,
            "score.gamma_z" => self.params.gamma_z = parse_num(key, v)?,
            "score.gamma_zc" => self.params.gamma_zc = parse_num(key, v)?,
            "score.variant" => {
                self.variant = match v {
                    "standard" => ScoreVariant::Standard,
                    "both-pop" => ScoreVariant::BothPopularity,
                    _ => {
                        return Err(Error::Config(format!(
                            "{key}: expected standard|both-pop, got {v:?}"
                        )))
                    }
                }
            }
            "forecast.alpha" => self.forecast_alpha = parse_num(key, v)?,
            "eval.k" => self.eval_ks = parse_list_usize(key, v)?,
            "eval.on" => {
                self.eval_on = match v {
                    "clicks" => PositiveKind::Clicks,
                    "post" => PositiveKind::PostClicks,
                    _ => return Err(Error::Config(format!("{key}: expected clicks|post, got {v:?}"))),
                }
            }
            "fairness.bins" => self.fairness_bins = parse_num(key, v)?,
            "fairness.subgroups" => self.fairness_subgroups = parse_num(key, v)?,
            "grid.gamma" => self.grid.gamma = parse_list_f64(key, v)?,
            "grid.alpha" => self.grid.alpha = parse_list_f64(key, v)?,
            "grid.gamma_r" => self.grid.gamma_r = parse_list_f64(key, v)?,
            "grid.gamma_z" => self.grid.gamma_z = parse_list_f64(key, v)?,
            "synth.users" => self.synth.users = parse_num(key, v)?,
            "synth.items" => self.synth.items = parse_num(key, v)?,
            "synth.stages" => self.synth.stages = parse_num(key, v)?,
            "synth.d_true" => self.synth.d_true = parse_num(key, v)?,
            "synth.gamma" => self.synth.gamma = parse_num(key, v)?,
            "synth.beta" => self.synth.beta = parse_num(key, v)?,
            "synth.drift" => self.synth.drift = parse_num(key, v)?,
            "synth.per_stage" => self.synth.per_stage = parse_num(key, v)?,
            "synth.mbd" => self.synth.mbd = parse_bool(key, v)?,
            "synth.rho_t" => self.synth.rho_t = parse_num(key, v)?,
            "synth.pop_spread" => self.synth.pop_spread = parse_num(key, v)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Check every parameter that can be checked without touching the data.
    pub fn validate(&self) -> Result<()> {
        self.params.validate().map_err(config_err)?;
        self.train_config().validate().map_err(config_err)?;
        if self.data.stages == 0 {
            return Err(Error::Config("data.stages must be >= 1".into()));
        }
        if self.mode == ExperimentMode::Pda && self.data.stages < 2 {
            return Err(Error::Config("PDA needs data.stages >= 2 for the forecast".into()));
        }
        let (a, b, c) = self.data.ratios;
        if !(a > 0.0 && b > 0.0 && c > 0.0) || (a + b + c - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split ratios must be positive and sum to 1 (got {a}, {b}, {c})"
            )));
        }
        if self.eval_ks.is_empty() || self.eval_ks.iter().any(|&k| k == 0) {
            return Err(Error::Config("eval.k must list at least one positive cutoff".into()));
        }
        if self.fairness_bins == 0 || self.fairness_subgroups == 0 {
            return Err(Error::Config("fairness.bins and fairness.subgroups must be >= 1".into()));
        }
        if !(self.forecast_alpha.is_finite() && self.forecast_alpha >= 0.0) {
            return Err(Error::Config(format!(
                "forecast.alpha must be finite and >= 0 (got {})",
                self.forecast_alpha
            )));
        }
        for (name, list) in [
            ("grid.gamma", &self.grid.gamma),
            ("grid.alpha", &self.grid.alpha),
            ("grid.gamma_r", &self.grid.gamma_r),
            ("grid.gamma_z", &self.grid.gamma_z),
        ] {
            if list.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Config(format!("{name}: entries must be finite and >= 0")));
            }
        }
        let synth_cfg = self.synth_config();
        synth_cfg.validate().map_err(config_err)?;
        Ok(())
    }

    /// Effective grids: empty lists fall back to the configured point value.
    pub fn effective_grid(&self) -> GridConfig {
        let or_default = |list: &[f64], v: f64| {
            if list.is_empty() {
                vec![v]
            } else {
                list.to_vec()
            }
        };
        GridConfig {
            gamma: or_default(&self.grid.gamma, self.params.gamma),
            alpha: or_default(&self.grid.alpha, self.forecast_alpha),
            gamma_r: or_default(&self.grid.gamma_r, self.params.gamma_r),
            gamma_z: or_default(&self.grid.gamma_z, self.params.gamma_z),
        }
    }

    /// The training configuration implied by this experiment.
    pub fn train_config(&self) -> TrainConfig {
        let mut params = self.params;
        if self.mode == ExperimentMode::EsmmEq {
            params.gamma_r = 0.0;
            params.gamma_z = 0.0;
        }
        TrainConfig {
            mode: match self.mode {
                ExperimentMode::Pd => TrainMode::Pd,
                ExperimentMode::Pda => TrainMode::Pda,
                _ => TrainMode::Mbd,
            },
            dim: self.dim,
            learning_rate: self.learning_rate,
            l2: self.l2,
            epochs_max: self.epochs,
            patience: self.patience,
            batch_size: self.batch_size,
            neg_per_pos: self.neg_per_pos,
            seed: self.seed,
            params,
            optimizer: self.optimizer,
            val_k: self.val_k,
            popularity_from: self.data.popularity_from,
        }
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            num_users: self.synth.users,
            num_items: self.synth.items,
            num_stages: self.synth.stages,
            d_true: self.synth.d_true,
            gamma_true: self.synth.gamma,
            exposure_strength: self.synth.beta,
            drift_rate: self.synth.drift,
            interactions_per_stage: self.synth.per_stage,
            seed: self.seed,
            mbd_labels: self.synth.mbd,
            rho_t: self.synth.rho_t,
            pop_spread: self.synth.pop_spread,
        }
    }

    /// The fully resolved config as sorted `key=value` lines, prefixed with
    /// crate metadata. Writing this file and running it again reproduces the
    /// experiment.
    pub fn manifest(&self) -> String {
        let mut map: BTreeMap<&str, String> = BTreeMap::new();
        map.insert("mode", self.mode.as_str().to_string());
        map.insert("seed", self.seed.to_string());
        map.insert("out", self.out.display().to_string());
        map.insert("threads", self.threads.to_string());
        map.insert("data.path", self.data.path.display().to_string());
        map.insert("data.has_header", self.data.has_header.to_string());
        map.insert("data.labels", self.data.labels.to_string());
        map.insert("data.min_interactions", self.data.min_interactions.to_string());
        map.insert(
            "data.popularity_from",
            match self.data.popularity_from {
                PopularitySource::Clicks => "clicks".into(),
                PopularitySource::PostClicks => "post".into(),
            },
        );
        map.insert("data.stages", self.data.stages.to_string());
        map.insert("data.train_ratio", self.data.ratios.0.to_string());
        map.insert("data.valid_ratio", self.data.ratios.1.to_string());
        map.insert("data.test_ratio", self.data.ratios.2.to_string());
        map.insert("train.dim", self.dim.to_string());
        map.insert("train.lr", self.learning_rate.to_string());
        map.insert("train.l2", self.l2.to_string());
        map.insert("train.epochs", self.epochs.to_string());
        map.insert("train.patience", self.patience.to_string());
        map.insert("train.batch_size", self.batch_size.to_string());
        map.insert("train.neg_per_pos", self.neg_per_pos.to_string());
        map.insert(
            "train.optimizer",
            match self.optimizer {
                OptimizerKind::Sgd => "sgd".into(),
                OptimizerKind::Adam => "adam".into(),
            },
        );
        map.insert("train.val_k", self.val_k.to_string());
        map.insert("score.gamma", self.params.gamma.to_string());
        map.insert("score.gamma_tilde", self.params.gamma_tilde.to_string());
        map.insert("score.gamma_r", self.params.gamma_r.to_string());
        map.insert("score.gamma_z", self.params.gamma_z.to_string());
        map.insert("score.gamma_zc", self.params.gamma_zc.to_string());
        map.insert(
            "score.variant",
            match self.variant {
                ScoreVariant::Standard => "standard".into(),
                ScoreVariant::BothPopularity => "both-pop".into(),
            },
        );
        map.insert("forecast.alpha", self.forecast_alpha.to_string());
        map.insert(
            "eval.k",
            self.eval_ks.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(","),
        );
        map.insert(
            "eval.on",
            match self.eval_on {
                PositiveKind::Clicks => "clicks".into(),
                PositiveKind::PostClicks => "post".into(),
            },
        );
        map.insert("fairness.bins", self.fairness_bins.to_string());
        map.insert("fairness.subgroups", self.fairness_subgroups.to_string());
        let join = |list: &[f64]| {
            list.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
        };
        if !self.grid.gamma.is_empty() {
            map.insert("grid.gamma", join(&self.grid.gamma));
        }
        if !self.grid.alpha.is_empty() {
            map.insert("grid.alpha", join(&self.grid.alpha));
        }
        if !self.grid.gamma_r.is_empty() {
            map.insert("grid.gamma_r", join(&self.grid.gamma_r));
        }
        if !self.grid.gamma_z.is_empty() {
            map.insert("grid.gamma_z", join(&self.grid.gamma_z));
        }
        map.insert("synth.users", self.synth.users.to_string());
        map.insert("synth.items", self.synth.items.to_string());
        map.insert("synth.stages", self.synth.stages.to_string());
        map.insert("synth.d_true", self.synth.d_true.to_string());
        map.insert("synth.gamma", self.synth.gamma.to_string());
        map.insert("synth.beta", self.synth.beta.to_string());
        map.insert("synth.drift", self.synth.drift.to_string());
        map.insert("synth.per_stage", self.synth.per_stage.to_string());
        map.insert("synth.mbd", self.synth.mbd.to_string());
        map.insert("synth.rho_t", self.synth.rho_t.to_string());
        map.insert("synth.pop_spread", self.synth.pop_spread.to_string());

        let mut out = String::new();
        let _ = writeln!(out, "meta.crate=poprec-core");
        let _ = writeln!(out, "meta.version={}", env!("CARGO_PKG_VERSION"));
        for (k, v) in map {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }
}

fn config_err(e: Error) -> Error {
    Error::Config(e.to_string())
}

/// Everything loaded and derived before training.
pub struct PipelineData {
    pub log: InteractionLog,
    pub idmap: IdMap,
    pub staged: StagedInteractions,
    pub valid: InteractionLog,
    pub test: InteractionLog,
    pub pop: PopularityTable,
    pub click_counts: Vec<u64>,
}

/// Load the configured data file and apply the chronological splits.
pub fn load_pipeline_data(cfg: &ExperimentConfig) -> Result<PipelineData> {
    if cfg.data.path.as_os_str().is_empty() {
        return Err(Error::Config("data.path is not set".into()));
    }
    let schema = LogSchema {
        has_header: cfg.data.has_header,
        has_labels: cfg.data.labels,
        min_interactions: cfg.data.min_interactions,
    };
    let (log, idmap) = load_interactions(&cfg.data.path, &schema)?;
    let (train, valid, test) = chrono_split(&log, cfg.data.ratios)?;
    let staged = split_stages(&train, cfg.data.stages)?;
    let pop = PopularityTable::from_staged(&staged, cfg.data.popularity_from)?;
    let mut click_counts = vec![0u64; log.num_items];
    for r in staged.all() {
        if r.clicked {
            click_counts[r.item as usize] += 1;
        }
    }
    Ok(PipelineData {
        log,
        idmap,
        staged,
        valid,
        test,
        pop,
        click_counts,
    })
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(content.as_bytes())?;
    Ok(())
}

/// `stage,item,count,fraction` rows for every stage.
pub fn popularity_csv(pop: &PopularityTable) -> Result<String> {
    let mut out = String::from("stage,item,count,fraction\n");
    for t in 0..pop.num_stages() {
        let counts = pop.counts(t)?;
        let row = pop.row(t)?;
        for i in 0..pop.num_items() {
            let _ = writeln!(out, "{},{},{},{}", t + 1, i, counts[i], row[i]);
        }
    }
    Ok(out)
}

/// `item,clicks,ratio,z` rows; the ratio column is empty for items with no
/// clicks.
pub fn quality_csv(pop: &PopularityTable, click_counts: &[u64]) -> String {
    let mut out = String::from("item,clicks,ratio,z\n");
    let z = pop.normalized_popularity();
    for i in 0..pop.num_items() {
        let ratio = match pop.quality(i as u32) {
            Some(r) => r.to_string(),
            None => String::new(),
        };
        let _ = writeln!(out, "{},{},{},{}", i, click_counts[i], ratio, z[i]);
    }
    out
}

/// `stage,dp_successive,dp_accumulated` rows; header only when there are
/// fewer than two stages.
pub fn drift_csv(pop: &PopularityTable, base2: bool) -> Result<String> {
    let mut out = String::from("stage,dp_successive,dp_accumulated\n");
    if pop.num_stages() < 2 {
        return Ok(out);
    }
    let series = drift_series(pop)?;
    let scale = if base2 { std::f64::consts::LN_2 } else { 1.0 };
    for (idx, (s, a)) in series.successive.iter().zip(&series.accumulated).enumerate() {
        let _ = writeln!(out, "{},{},{}", idx + 2, s / scale, a / scale);
    }
    Ok(out)
}

/// `metric,k,value` rows in a stable order.
pub fn ranking_csv(rows: &[(String, usize, f64)]) -> String {
    let mut out = String::from("metric,k,value\n");
    for (metric, k, value) in rows {
        let _ = writeln!(out, "{metric},{k},{value}");
    }
    out
}

/// `bin,subgroup,exposure,ratio,d_r,d_l` rows; the bin-level disparities
/// repeat on each of the bin's subgroup rows.
pub fn fairness_csv(report: &FairnessReport) -> String {
    let mut out = String::from("bin,subgroup,exposure,ratio,d_r,d_l\n");
    for &(bin, sub, exposure, ratio) in &report.subgroups {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            bin, sub, exposure, ratio, report.d_r_per_bin[bin], report.d_l_per_bin[bin]
        );
    }
    out
}

/// `item\tbin\tsubgroup` assignment rows.
pub fn groups_tsv(spec: &GroupSpec) -> String {
    let mut rows: Vec<(u32, usize, usize)> = Vec::new();
    for (b, subs) in spec.subgroups.iter().enumerate() {
        for (s, members) in subs.iter().enumerate() {
            for &i in members {
                rows.push((i, b, s));
            }
        }
    }
    rows.sort_unstable();
    let mut out = String::from("item\tbin\tsubgroup\n");
    for (i, b, s) in rows {
        let _ = writeln!(out, "{i}\t{b}\t{s}");
    }
    out
}

/// The per-mode ranking scorer built from trained models.
pub struct Scorer {
    inner: Box<dyn Fn(u32, u32) -> f64 + Sync>,
}

impl Scorer {
    pub fn score(&self, user: u32, item: u32) -> f64 {
        (self.inner)(user, item)
    }
}

/// Build the inference scorer for a mode.
///
/// PD ranks by the bare matching score; PDA multiplies in the forecast
/// popularity; the multi-behavior modes rank by the deconfounded inference
/// score, with the ablations re-injecting a popularity factor (the bin mean
/// for doI, the item's own for doQ). For the ablation factor every item is
/// binned by its normalized quality, so cold items fall in the lowest bin
/// rather than erroring.
pub fn build_scorer(
    cfg: &ExperimentConfig,
    outcome: &TrainedModel,
    data: &PipelineData,
) -> Result<Scorer> {
    match (cfg.mode, outcome) {
        (ExperimentMode::Pd, TrainedModel::Matching(model)) => {
            let model = model.clone();
            Ok(Scorer {
                inner: Box::new(move |u, i| pd_score(&model, u, i).unwrap_or(f64::NEG_INFINITY)),
            })
        }
        (ExperimentMode::Pda, TrainedModel::Matching(model)) => {
            let model = model.clone();
            let forecast = forecast_from_table(&data.pop, cfg.forecast_alpha)?;
            let gamma_tilde = cfg.params.gamma_tilde;
            Ok(Scorer {
                inner: Box::new(move |u, i| {
                    pda_score(&model, u, i, forecast.m_tilde[i as usize], gamma_tilde)
                        .unwrap_or(f64::NEG_INFINITY)
                }),
            })
        }
        (mode, TrainedModel::MultiBehavior { ctr, cvr }) => {
            let ctr = ctr.clone();
            let cvr = cvr.clone();
            let quality = data.pop.normalized_quality();
            let gamma_r = if mode == ExperimentMode::EsmmEq {
                0.0
            } else {
                cfg.params.gamma_r
            };
            match mode {
                ExperimentMode::Mbd | ExperimentMode::EsmmEq => Ok(Scorer {
                    inner: Box::new(move |u, i| {
                        mbd_inference_score(&ctr, &cvr, u, i, quality[i as usize], gamma_r)
                            .unwrap_or(f64::NEG_INFINITY)
                    }),
                }),
                ExperimentMode::AblationDoI | ExperimentMode::AblationDoQ => {
                    let z = data.pop.normalized_popularity().to_vec();
                    let graded: Vec<Option<f64>> = quality.iter().map(|&q| Some(q)).collect();
                    let spec = build_groups(&graded, &data.click_counts, cfg.fairness_bins, 1)?;
                    let bin_of = spec.bin_of(data.log.num_items);
                    let gamma_z = cfg.params.gamma_z;
                    let factor: Vec<f64> = if mode == ExperimentMode::AblationDoI {
                        let means = bin_pop_factor_means(&z, &bin_of, cfg.fairness_bins, gamma_z);
                        bin_of
                            .iter()
                            .map(|b| means[b.expect("total binning")])
                            .collect()
                    } else {
                        z.iter().map(|&zi| zi.powf(gamma_z)).collect()
                    };
                    Ok(Scorer {
                        inner: Box::new(move |u, i| {
                            mbd_inference_score(&ctr, &cvr, u, i, quality[i as usize], gamma_r)
                                .map(|s| s * factor[i as usize])
                                .unwrap_or(f64::NEG_INFINITY)
                        }),
                    })
                }
                _ => unreachable!(),
            }
        }
        _ => Err(Error::InvalidParameter(
            "trained model does not match the experiment mode".into(),
        )),
    }
}

/// Artifacts produced by [`run`].
#[derive(Debug)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    /// `(metric, k, value)` rows written to `ranking.csv`.
    pub metrics: Vec<(String, usize, f64)>,
    /// Bin-level disparity means when fairness applies.
    pub fairness: Option<(f64, f64)>,
    pub trace_best_epoch: usize,
}

fn stage_result<T>(stage: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(stage))
}

/// Execute the full pipeline and write all artifacts into `cfg.out`.
///
/// On failure a `FAILED` marker naming the stage is left next to whatever
/// partial artifacts were produced.
pub fn run(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out)?;
    match run_inner(cfg) {
        Ok(artifacts) => Ok(artifacts),
        Err(e) => {
            let _ = write_file(&cfg.out.join("FAILED"), &format!("{e}\n"));
            Err(e)
        }
    }
}

fn run_inner(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_body(cfg))
}

fn run_body(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let out = &cfg.out;
    write_file(&out.join("manifest.txt"), &cfg.manifest())?;

    let data = stage_result("ingest", load_pipeline_data(cfg))?;
    {
        let mut buf = Vec::new();
        data.idmap.write_tsv(&mut buf).map_err(|e| e.in_stage("ingest"))?;
        write_file(&out.join("idmap.tsv"), &String::from_utf8(buf).expect("ascii"))?;
    }

    write_file(
        &out.join("popularity.csv"),
        &stage_result("stats", popularity_csv(&data.pop))?,
    )?;
    if cfg.data.labels {
        write_file(&out.join("quality.csv"), &quality_csv(&data.pop, &data.click_counts))?;
    }
    write_file(&out.join("drift.csv"), &stage_result("drift", drift_csv(&data.pop, false))?)?;

    let train_cfg = cfg.train_config();
    let outcome: FitOutcome = stage_result("train", fit(&train_cfg, &data.staged, &data.valid))?;
    {
        let mut buf = Vec::new();
        outcome.trace.write_csv(&mut buf).map_err(|e| e.in_stage("train"))?;
        write_file(&out.join("trace.csv"), &String::from_utf8(buf).expect("ascii"))?;
    }
    match &outcome.model {
        TrainedModel::Matching(model) => {
            stage_result(
                "train",
                save_checkpoint(out.join("model.ckpt"), model, &train_cfg.params),
            )?;
        }
        TrainedModel::MultiBehavior { ctr, cvr } => {
            stage_result(
                "train",
                save_checkpoint(out.join("model_ctr.ckpt"), ctr, &train_cfg.params),
            )?;
            stage_result(
                "train",
                save_checkpoint(out.join("model_cvr.ckpt"), cvr, &train_cfg.params),
            )?;
        }
    }

    if cfg.mode == ExperimentMode::Pda {
        let forecast = stage_result("forecast", forecast_from_table(&data.pop, cfg.forecast_alpha))?;
        let mut text = String::from("item\tm_tilde\n");
        for (i, v) in forecast.m_tilde.iter().enumerate() {
            let _ = writeln!(text, "{i}\t{v}");
        }
        write_file(&out.join("forecast.tsv"), &text)?;
    }

    let scorer = stage_result("evaluate", build_scorer(cfg, &outcome.model, &data))?;
    let excluded = interacted_sets(data.staged.all(), data.log.num_users);
    let positives = positives_by_user(&data.test, cfg.eval_on);
    let mut metric_rows = Vec::new();
    let mut first_report: Option<RankingReport> = None;
    for &k in &cfg.eval_ks {
        let report = stage_result(
            "evaluate",
            rank_all_users(
                |u, i| scorer.score(u, i),
                data.log.num_users,
                data.log.num_items,
                &excluded,
                k,
            ),
        )?;
        let m = accuracy_metrics(&report, &positives);
        metric_rows.push(("recall".to_string(), k, m.recall));
        metric_rows.push(("hit_ratio".to_string(), k, m.hit_ratio));
        metric_rows.push(("ndcg".to_string(), k, m.ndcg));
        if first_report.is_none() {
            first_report = Some(report);
        }
    }
    write_file(&out.join("ranking.csv"), &ranking_csv(&metric_rows))?;

    let mut fairness_summary = None;
    if cfg.data.labels {
        let report = first_report.as_ref().expect("at least one cutoff");
        let fairness = stage_result("fairness", || -> Result<_> {
            let spec = build_groups(
                data.pop.quality_ratios(),
                &data.click_counts,
                cfg.fairness_bins,
                cfg.fairness_subgroups,
            )?;
            let fr = fairness_report(report, &spec, data.pop.quality_ratios(), data.log.num_items)?;
            Ok((spec, fr))
        }())?;
        let (spec, fr) = fairness;
        write_file(&out.join("fairness.csv"), &fairness_csv(&fr))?;
        write_file(&out.join("groups.tsv"), &groups_tsv(&spec))?;
        fairness_summary = Some((fr.mean_d_r, fr.mean_d_l));
    }

    Ok(RunArtifacts {
        out_dir: out.clone(),
        metrics: metric_rows,
        fairness: fairness_summary,
        trace_best_epoch: outcome.trace.best_epoch,
    })
}

/// One grid point with its validation metric.
#[derive(Debug, Clone, Copy)]
pub struct GridRow {
    pub gamma: f64,
    pub alpha: f64,
    pub gamma_r: f64,
    pub gamma_z: f64,
    pub val_metric: f64,
    pub best: bool,
}

/// Exhaustive hyper-parameter search, selected by the validation metric.
///
/// PD and PDA sweep `gamma x alpha` (PD's metric ignores alpha); the
/// multi-behavior modes sweep `gamma_r x gamma_z`. The table is written to
/// `grid.csv` with the winning row flagged.
pub fn grid_search(cfg: &ExperimentConfig) -> Result<(Vec<GridRow>, usize)> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out)?;
    let data = load_pipeline_data(cfg)?;
    let grid = cfg.effective_grid();
    let mut rows: Vec<GridRow> = Vec::new();

    match cfg.mode {
        ExperimentMode::Pd | ExperimentMode::Pda => {
            for &gamma in &grid.gamma {
                let mut point = cfg.clone();
                point.params.gamma = gamma;
                point.params.gamma_tilde = gamma;
                let outcome = fit(&point.train_config(), &data.staged, &data.valid)?;
                let model = outcome
                    .model
                    .as_matching()
                    .expect("PD/PDA training yields a matching model");
                for &alpha in &grid.alpha {
                    let metric = match cfg.mode {
                        ExperimentMode::Pd => outcome.trace.epochs[outcome.trace.best_epoch].val_metric,
                        _ => pda_validation_metric(&point, &data, model, alpha)?,
                    };
                    rows.push(GridRow {
                        gamma,
                        alpha,
                        gamma_r: cfg.params.gamma_r,
                        gamma_z: cfg.params.gamma_z,
                        val_metric: metric,
                        best: false,
                    });
                }
            }
        }
        _ => {
            for &gamma_r in &grid.gamma_r {
                for &gamma_z in &grid.gamma_z {
                    let mut point = cfg.clone();
                    point.params.gamma_r = gamma_r;
                    point.params.gamma_z = gamma_z;
                    let outcome = fit(&point.train_config(), &data.staged, &data.valid)?;
                    rows.push(GridRow {
                        gamma: cfg.params.gamma,
                        alpha: cfg.forecast_alpha,
                        gamma_r,
                        gamma_z,
                        val_metric: outcome.trace.epochs[outcome.trace.best_epoch].val_metric,
                        best: false,
                    });
                }
            }
        }
    }

    let best = rows
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.val_metric.total_cmp(&b.1.val_metric))
        .map(|(idx, _)| idx)
        .expect("grid is non-empty");
    rows[best].best = true;

    let mut csv = String::from("gamma,alpha,gamma_r,gamma_z,val_metric,best\n");
    for row in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            row.gamma,
            row.alpha,
            row.gamma_r,
            row.gamma_z,
            row.val_metric,
            if row.best { 1 } else { 0 }
        );
    }
    write_file(&cfg.out.join("grid.csv"), &csv)?;
    Ok((rows, best))
}

/// Validation Recall@K + HitRatio@K of the adjusted score with a forecast at
/// strength `alpha` (used for grid selection over alpha).
fn pda_validation_metric(
    cfg: &ExperimentConfig,
    data: &PipelineData,
    model: &FactorModel,
    alpha: f64,
) -> Result<f64> {
    let forecast = forecast_from_table(&data.pop, alpha)?;
    let excluded = interacted_sets(data.staged.all(), data.log.num_users);
    let positives = positives_by_user(&data.valid, PositiveKind::Clicks);
    let gamma_tilde = cfg.params.gamma_tilde;
    let mut recall_sum = 0.0;
    let mut hit_sum = 0.0;
    let mut users = 0usize;
    for (u, pos) in positives.iter().enumerate() {
        if pos.is_empty() {
            continue;
        }
        let candidates = data.log.num_items - excluded[u].len();
        if candidates == 0 {
            continue;
        }
        let k = cfg.val_k.min(candidates);
        let list = crate::evaluation::rank_items(
            |i| {
                pda_score(model, u as u32, i, forecast.m_tilde[i as usize], gamma_tilde)
                    .unwrap_or(f64::NEG_INFINITY)
            },
            data.log.num_items,
            &excluded[u],
            k,
        )?;
        let hits = list.iter().filter(|i| pos.binary_search(i).is_ok()).count();
        recall_sum += hits as f64 / pos.len() as f64;
        hit_sum += if hits > 0 { 1.0 } else { 0.0 };
        users += 1;
    }
    if users == 0 {
        return Ok(0.0);
    }
    Ok(recall_sum / users as f64 + hit_sum / users as f64)
}

/// Generate the configured synthetic log and its ground-truth sidecars.
///
/// Writes `log.tsv` (the standard labeled format), `truth_match.tsv` (one
/// row of latent match scores per user), `truth_pop.tsv` (one row per
/// stage), `truth_quality.tsv`, and `truth_match_post.tsv` in multi-behavior
/// mode.
pub fn synth_emit(cfg: &ExperimentConfig) -> Result<PathBuf> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out)?;
    let (log, gt) = generate(&cfg.synth_config())?;
    let mut text = String::new();
    for r in &log.records {
        let _ = writeln!(
            text,
            "{}\t{}\t{}\t{}\t{}",
            r.user,
            r.item,
            r.timestamp,
            u8::from(r.clicked),
            u8::from(r.post_clicked)
        );
    }
    let log_path = cfg.out.join("log.tsv");
    write_file(&log_path, &text)?;

    let write_matrix = |path: &Path, rows: &[Vec<f64>]| -> Result<()> {
        let mut text = String::new();
        for row in rows {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(text, "{}", line.join("\t"));
        }
        write_file(path, &text)
    };
    write_matrix(&cfg.out.join("truth_match.tsv"), &gt.true_match)?;
    write_matrix(&cfg.out.join("truth_pop.tsv"), &gt.true_pop)?;
    if let Some(post) = &gt.true_match_post {
        write_matrix(&cfg.out.join("truth_match_post.tsv"), post)?;
    }
    let mut quality = String::new();
    for (i, q) in gt.true_quality.iter().enumerate() {
        let _ = writeln!(quality, "{i}\t{q}");
    }
    write_file(&cfg.out.join("truth_quality.tsv"), &quality)?;
    Ok(log_path)
}

/// Load, filter and re-index the configured data file; write the normalized
/// log and the id mapping.
pub fn ingest_emit(cfg: &ExperimentConfig) -> Result<()> {
    cfg.validate()?;
    if cfg.data.path.as_os_str().is_empty() {
        return Err(Error::Config("data.path is not set".into()));
    }
    fs::create_dir_all(&cfg.out)?;
    let schema = LogSchema {
        has_header: cfg.data.has_header,
        has_labels: cfg.data.labels,
        min_interactions: cfg.data.min_interactions,
    };
    let (log, idmap) = load_interactions(&cfg.data.path, &schema)?;
    let mut text = String::new();
    for r in &log.records {
        if cfg.data.labels {
            let _ = writeln!(
                text,
                "{}\t{}\t{}\t{}\t{}",
                r.user,
                r.item,
                r.timestamp,
                u8::from(r.clicked),
                u8::from(r.post_clicked)
            );
        } else {
            let _ = writeln!(text, "{}\t{}\t{}", r.user, r.item, r.timestamp);
        }
    }
    write_file(&cfg.out.join("log.tsv"), &text)?;
    let mut buf = Vec::new();
    idmap.write_tsv(&mut buf)?;
    write_file(&cfg.out.join("idmap.tsv"), &String::from_utf8(buf).expect("ascii"))?;
    Ok(())
}

/// Stage the whole configured log (no train/valid/test split) and compute
/// its popularity table. Backs the standalone analysis subcommands.
pub fn load_full_staged(cfg: &ExperimentConfig) -> Result<(StagedInteractions, PopularityTable)> {
    if cfg.data.path.as_os_str().is_empty() {
        return Err(Error::Config("data.path is not set".into()));
    }
    let schema = LogSchema {
        has_header: cfg.data.has_header,
        has_labels: cfg.data.labels,
        min_interactions: cfg.data.min_interactions,
    };
    let (log, _) = load_interactions(&cfg.data.path, &schema)?;
    let staged = split_stages(&log, cfg.data.stages)?;
    let pop = PopularityTable::from_staged(&staged, cfg.data.popularity_from)?;
    Ok((staged, pop))
}

/// Write the popularity table (and quality statistics for labeled data) of
/// the full staged log.
pub fn stats_emit(cfg: &ExperimentConfig) -> Result<()> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out)?;
    let (staged, pop) = load_full_staged(cfg)?;
    write_file(&cfg.out.join("popularity.csv"), &popularity_csv(&pop)?)?;
    if cfg.data.labels {
        let mut clicks = vec![0u64; pop.num_items()];
        for r in staged.all() {
            if r.clicked {
                clicks[r.item as usize] += 1;
            }
        }
        write_file(&cfg.out.join("quality.csv"), &quality_csv(&pop, &clicks))?;
    }
    Ok(())
}

/// Write the drift series CSV of the full staged log.
pub fn drift_emit(cfg: &ExperimentConfig, base2: bool) -> Result<()> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out)?;
    let (_, pop) = load_full_staged(cfg)?;
    write_file(&cfg.out.join("drift.csv"), &drift_csv(&pop, base2)?)
}

/// Write the per-item popularity forecast from the full staged log.
pub fn forecast_emit(cfg: &ExperimentConfig) -> Result<()> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out)?;
    let (_, pop) = load_full_staged(cfg)?;
    let forecast = forecast_from_table(&pop, cfg.forecast_alpha)?;
    let mut text = String::from("item\tm_tilde\n");
    for (i, v) in forecast.m_tilde.iter().enumerate() {
        let _ = writeln!(text, "{i}\t{v}");
    }
    write_file(&cfg.out.join("forecast.tsv"), &text)
}

/// Train only: checkpoints plus the trace CSV.
pub fn train_emit(cfg: &ExperimentConfig) -> Result<()> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out)?;
    let data = load_pipeline_data(cfg)?;
    let train_cfg = cfg.train_config();
    let outcome = fit(&train_cfg, &data.staged, &data.valid)?;
    let mut buf = Vec::new();
    outcome.trace.write_csv(&mut buf)?;
    write_file(&cfg.out.join("trace.csv"), &String::from_utf8(buf).expect("ascii"))?;
    match &outcome.model {
        TrainedModel::Matching(model) => {
            save_checkpoint(cfg.out.join("model.ckpt"), model, &train_cfg.params)?;
        }
        TrainedModel::MultiBehavior { ctr, cvr } => {
            save_checkpoint(cfg.out.join("model_ctr.ckpt"), ctr, &train_cfg.params)?;
            save_checkpoint(cfg.out.join("model_cvr.ckpt"), cvr, &train_cfg.params)?;
        }
    }
    Ok(())
}

fn load_trained(cfg: &ExperimentConfig) -> Result<TrainedModel> {
    if cfg.mode.is_multi_behavior() {
        let (ctr, _) = load_checkpoint(cfg.out.join("model_ctr.ckpt"))?;
        let (cvr, _) = load_checkpoint(cfg.out.join("model_cvr.ckpt"))?;
        Ok(TrainedModel::MultiBehavior { ctr, cvr })
    } else {
        let (model, _) = load_checkpoint(cfg.out.join("model.ckpt"))?;
        Ok(TrainedModel::Matching(model))
    }
}

/// Evaluate checkpoints already present in the output directory.
pub fn evaluate_emit(cfg: &ExperimentConfig) -> Result<Vec<(String, usize, f64)>> {
    cfg.validate()?;
    let data = load_pipeline_data(cfg)?;
    let model = load_trained(cfg)?;
    let scorer = build_scorer(cfg, &model, &data)?;
    let excluded = interacted_sets(data.staged.all(), data.log.num_users);
    let positives = positives_by_user(&data.test, cfg.eval_on);
    let mut rows = Vec::new();
    for &k in &cfg.eval_ks {
        let report = rank_all_users(
            |u, i| scorer.score(u, i),
            data.log.num_users,
            data.log.num_items,
            &excluded,
            k,
        )?;
        let m = accuracy_metrics(&report, &positives);
        rows.push(("recall".to_string(), k, m.recall));
        rows.push(("hit_ratio".to_string(), k, m.hit_ratio));
        rows.push(("ndcg".to_string(), k, m.ndcg));
    }
    write_file(&cfg.out.join("ranking.csv"), &ranking_csv(&rows))?;
    Ok(rows)
}

/// Compute fairness metrics from checkpoints already present in the output
/// directory.
pub fn fairness_emit(cfg: &ExperimentConfig) -> Result<(f64, f64)> {
    cfg.validate()?;
    if !cfg.data.labels {
        return Err(Error::Config("fairness needs labeled data (data.labels=true)".into()));
    }
    let data = load_pipeline_data(cfg)?;
    let model = load_trained(cfg)?;
    let scorer = build_scorer(cfg, &model, &data)?;
    let excluded = interacted_sets(data.staged.all(), data.log.num_users);
    let k = cfg.eval_ks[0];
    let report = rank_all_users(
        |u, i| scorer.score(u, i),
        data.log.num_users,
        data.log.num_items,
        &excluded,
        k,
    )?;
    let spec = build_groups(
        data.pop.quality_ratios(),
        &data.click_counts,
        cfg.fairness_bins,
        cfg.fairness_subgroups,
    )?;
    let fr = fairness_report(&report, &spec, data.pop.quality_ratios(), data.log.num_items)?;
    write_file(&cfg.out.join("fairness.csv"), &fairness_csv(&fr))?;
    write_file(&cfg.out.join("groups.tsv"), &groups_tsv(&spec))?;
    Ok((fr.mean_d_r, fr.mean_d_l))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_manifest() {
        let text = "\
mode=PDA
seed=7
threads=2
data.path=somewhere/log.tsv
data.labels=true
data.stages=4
train.dim=8
train.lr=0.05
score.gamma=0.5
score.gamma_tilde=0.25
forecast.alpha=0.3
eval.k=10,20
grid.gamma=0.5,1
grid.alpha=0,0.2
";
        let cfg = ExperimentConfig::from_str(text).unwrap();
        assert_eq!(cfg.mode, ExperimentMode::Pda);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.eval_ks, vec![10, 20]);
        assert_eq!(cfg.grid.gamma, vec![0.5, 1.0]);
        let manifest = cfg.manifest();
        let reparsed = ExperimentConfig::from_str(&manifest).unwrap();
        assert_eq!(reparsed.manifest(), manifest, "manifest must be stable");
    }

    #[test]
    fn config_rejects_unknown_keys_and_bad_values() {
        assert!(ExperimentConfig::from_str("bogus.key=1\n").is_err());
        assert!(ExperimentConfig::from_str("mode=questionable\n").is_err());
        assert!(ExperimentConfig::from_str("train.lr=-0.5\n").is_err());
        // Negative exponent is a validation error before any training.
        let err = ExperimentConfig::from_str("score.gamma=-1\n").unwrap_err();
        assert!(err.is_validation(), "{err}");
    }

    #[test]
    fn config_requires_two_stages_for_pda() {
        assert!(ExperimentConfig::from_str("mode=PDA\ndata.stages=1\n").is_err());
        assert!(ExperimentConfig::from_str("mode=PD\ndata.stages=1\n").is_ok());
    }

    #[test]
    fn esmm_mode_zeroes_exponents() {
        let cfg = ExperimentConfig::from_str("mode=esmm-eq\nscore.gamma_r=1\nscore.gamma_z=2\n").unwrap();
        let train = cfg.train_config();
        assert_eq!(train.params.gamma_r, 0.0);
        assert_eq!(train.params.gamma_z, 0.0);
    }

    #[test]
    fn effective_grid_defaults_to_point_values() {
        let cfg = ExperimentConfig::from_str("score.gamma=0.7\nforecast.alpha=0.2\n").unwrap();
        let grid = cfg.effective_grid();
        assert_eq!(grid.gamma, vec![0.7]);
        assert_eq!(grid.alpha, vec![0.2]);
    }
}
