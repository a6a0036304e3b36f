//! Embedding-based scorers.
//!
//! One [`FactorModel`] is a pair of user/item embedding tables scored by
//! inner product. The deconfounded pipeline trains the matching model with a
//! popularity factor ([`conditional_click_prob`]) and ranks without it
//! ([`pd_score`]), optionally re-injecting a forecast popularity at inference
//! ([`pda_score`]). The multi-behavior pipeline combines a CTR and a CVR
//! model with quality and popularity factors ([`mbd_ctcvr`]) and drops the
//! popularity factor for inference ([`mbd_inference_score`]).

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;

use crate::error::Error;
use crate::Result;

/// Logits are clamped to this magnitude before the sigmoid.
pub const SIGMOID_CLAMP: f64 = 30.0;

/// Which task a factor model plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelRole {
    /// Matching model `f` for the deconfounded (PD/PDA) pipeline.
    Matching,
    /// Click model `f_c`.
    Ctr,
    /// Post-click model `f_l`.
    Cvr,
}

impl ModelRole {
    fn as_str(self) -> &'static str {
        match self {
            ModelRole::Matching => "matching",
            ModelRole::Ctr => "ctr",
            ModelRole::Cvr => "cvr",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "matching" => Ok(ModelRole::Matching),
            "ctr" => Ok(ModelRole::Ctr),
            "cvr" => Ok(ModelRole::Cvr),
            other => Err(Error::Checkpoint(format!("unknown role {other:?}"))),
        }
    }
}

/// Scoring exponents shared across the pipelines.
///
/// `gamma` smooths the popularity factor during deconfounded training,
/// `gamma_tilde` the adjusted inference factor; `gamma_r` / `gamma_z` weight
/// quality and popularity in the multi-behavior scores, and `gamma_zc` is the
/// extra click-popularity exponent of the [`ScoreVariant::BothPopularity`]
/// variant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScoreParams {
    pub gamma: f64,
    pub gamma_tilde: f64,
    pub gamma_r: f64,
    pub gamma_z: f64,
    pub gamma_zc: f64,
}

impl ScoreParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma", self.gamma),
            ("gamma_tilde", self.gamma_tilde),
            ("gamma_r", self.gamma_r),
            ("gamma_z", self.gamma_z),
            ("gamma_zc", self.gamma_zc),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and >= 0 (got {v})"
                )));
            }
        }
        Ok(())
    }
}

/// Multi-behavior training-score variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreVariant {
    /// Popularity factor on the post-click side only.
    #[default]
    Standard,
    /// Additional popularity factor on the click side (`z^gamma_zc`).
    BothPopularity,
}

/// Inference-time ablation: intervene on only one of exposure or quality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationMode {
    /// Keep the quality-conditional popularity expectation: multiply by the
    /// mean popularity factor of the item's quality bin.
    DoIOnly,
    /// Keep the item's own popularity factor.
    DoQOnly,
}

/// User/item embedding tables scored by inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    user_emb: Vec<f64>,
    item_emb: Vec<f64>,
    num_users: usize,
    num_items: usize,
    dim: usize,
    role: ModelRole,
}

impl FactorModel {
    /// Zero-initialized model.
    pub fn zeros(num_users: usize, num_items: usize, dim: usize, role: ModelRole) -> Self {
        FactorModel {
            user_emb: vec![0.0; num_users * dim],
            item_emb: vec![0.0; num_items * dim],
            num_users,
            num_items,
            dim,
            role,
        }
    }

    /// Seeded uniform initialization in `[-0.5/dim, 0.5/dim]`, user table
    /// first, rows in index order.
    pub fn init<R: Rng>(
        num_users: usize,
        num_items: usize,
        dim: usize,
        role: ModelRole,
        rng: &mut R,
    ) -> Self {
        let half = 0.5 / dim as f64;
        let mut model = Self::zeros(num_users, num_items, dim, role);
        for v in model.user_emb.iter_mut() {
            *v = rng.random_range(-half..half);
        }
        for v in model.item_emb.iter_mut() {
            *v = rng.random_range(-half..half);
        }
        model
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn role(&self) -> ModelRole {
        self.role
    }

    pub fn user_row(&self, user: u32) -> &[f64] {
        let u = user as usize;
        &self.user_emb[u * self.dim..(u + 1) * self.dim]
    }

    pub fn item_row(&self, item: u32) -> &[f64] {
        let i = item as usize;
        &self.item_emb[i * self.dim..(i + 1) * self.dim]
    }

    pub fn user_row_mut(&mut self, user: u32) -> &mut [f64] {
        let u = user as usize;
        &mut self.user_emb[u * self.dim..(u + 1) * self.dim]
    }

    pub fn item_row_mut(&mut self, item: u32) -> &mut [f64] {
        let i = item as usize;
        &mut self.item_emb[i * self.dim..(i + 1) * self.dim]
    }

    pub fn all_finite(&self) -> bool {
        self.user_emb.iter().chain(&self.item_emb).all(|v| v.is_finite())
    }

    fn check(&self, user: u32, item: u32) -> Result<()> {
        if user as usize >= self.num_users {
            return Err(Error::IndexOutOfRange {
                what: "user",
                index: user as usize,
                bound: self.num_users,
            });
        }
        if item as usize >= self.num_items {
            return Err(Error::IndexOutOfRange {
                what: "item",
                index: item as usize,
                bound: self.num_items,
            });
        }
        Ok(())
    }
}

/// Positive variant of the exponential linear unit:
/// `e^x` for `x <= 0`, `x + 1` otherwise.
///
/// Strictly positive, continuous and strictly increasing, which keeps
/// multiplicative popularity factors from flipping score order.
#[inline]
pub fn elu_prime(x: f64) -> f64 {
    if x <= 0.0 {
        x.exp()
    } else {
        x + 1.0
    }
}

/// Derivative of [`elu_prime`]: `e^x` for `x <= 0`, `1` otherwise.
#[inline]
pub fn elu_prime_deriv(x: f64) -> f64 {
    if x <= 0.0 {
        x.exp()
    } else {
        1.0
    }
}

/// Sigmoid with the logit clamped to `±SIGMOID_CLAMP`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    let x = x.clamp(-SIGMOID_CLAMP, SIGMOID_CLAMP);
    1.0 / (1.0 + (-x).exp())
}

/// Inner product of the user and item embedding rows.
pub fn match_score(model: &FactorModel, user: u32, item: u32) -> Result<f64> {
    model.check(user, item)?;
    Ok(dot(model.user_row(user), model.item_row(item)))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Conditional click probability (unnormalized):
/// `ELU'(f(u, i)) * m^gamma` for a positive popularity factor `m`.
pub fn conditional_click_prob(
    model: &FactorModel,
    user: u32,
    item: u32,
    m: f64,
    gamma: f64,
) -> Result<f64> {
    if m <= 0.0 {
        return Err(Error::NonPositiveFactor(m));
    }
    Ok(elu_prime(match_score(model, user, item)?) * m.powf(gamma))
}

/// Deconfounded ranking score: the bare `ELU'(f(u, i))`.
///
/// The popularity expectation dropped here is a per-user constant, so
/// rankings are unchanged.
pub fn pd_score(model: &FactorModel, user: u32, item: u32) -> Result<f64> {
    Ok(elu_prime(match_score(model, user, item)?))
}

/// Popularity-adjusted score: `pd_score * m~^gamma_tilde` for a positive
/// forecast popularity `m~`. With `gamma_tilde = 0` this degrades to
/// [`pd_score`].
pub fn pda_score(
    model: &FactorModel,
    user: u32,
    item: u32,
    m_tilde: f64,
    gamma_tilde: f64,
) -> Result<f64> {
    if m_tilde <= 0.0 {
        return Err(Error::NonPositiveFactor(m_tilde));
    }
    Ok(pd_score(model, user, item)? * m_tilde.powf(gamma_tilde))
}

/// Click-through probability `sigmoid(f_c(u, i))`.
pub fn mbd_ctr(model_c: &FactorModel, user: u32, item: u32) -> Result<f64> {
    Ok(sigmoid(match_score(model_c, user, item)?))
}

/// Post-click conversion score `sigmoid(f_l(u, i)) * r^gamma_r * z^gamma_z`
/// for positive normalized quality `r` and popularity `z`.
pub fn mbd_cvr(
    model_l: &FactorModel,
    user: u32,
    item: u32,
    r: f64,
    z: f64,
    gamma_r: f64,
    gamma_z: f64,
) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::NonPositiveFactor(r));
    }
    if z <= 0.0 {
        return Err(Error::NonPositiveFactor(z));
    }
    Ok(sigmoid(match_score(model_l, user, item)?) * r.powf(gamma_r) * z.powf(gamma_z))
}

/// Click-and-convert probability: `mbd_cvr * mbd_ctr`, with an extra
/// `z^gamma_zc` factor under [`ScoreVariant::BothPopularity`].
pub fn mbd_ctcvr(
    model_c: &FactorModel,
    model_l: &FactorModel,
    user: u32,
    item: u32,
    r: f64,
    z: f64,
    params: &ScoreParams,
    variant: ScoreVariant,
) -> Result<f64> {
    let base = mbd_cvr(model_l, user, item, r, z, params.gamma_r, params.gamma_z)?
        * mbd_ctr(model_c, user, item)?;
    Ok(match variant {
        ScoreVariant::Standard => base,
        ScoreVariant::BothPopularity => base * z.powf(params.gamma_zc),
    })
}

/// Deconfounded inference score: `sigmoid(f_c) * sigmoid(f_l) * r^gamma_r`.
/// The popularity factor is dropped; its expectation is a constant and does
/// not change rankings.
pub fn mbd_inference_score(
    model_c: &FactorModel,
    model_l: &FactorModel,
    user: u32,
    item: u32,
    r: f64,
    gamma_r: f64,
) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::NonPositiveFactor(r));
    }
    Ok(mbd_ctr(model_c, user, item)? * sigmoid(match_score(model_l, user, item)?) * r.powf(gamma_r))
}

/// Mean popularity factor `z^gamma_z` per quality bin.
///
/// Items with no bin assignment are skipped; an empty bin yields 0.
pub fn bin_pop_factor_means(
    z: &[f64],
    bin_of: &[Option<usize>],
    n_bins: usize,
    gamma_z: f64,
) -> Vec<f64> {
    let mut sum = vec![0.0; n_bins];
    let mut count = vec![0usize; n_bins];
    for (i, bin) in bin_of.iter().enumerate() {
        if let Some(b) = *bin {
            sum[b] += z[i].powf(gamma_z);
            count[b] += 1;
        }
    }
    sum.iter()
        .zip(&count)
        .map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
        .collect()
}

/// Single-intervention ablation scores.
///
/// `DoIOnly` multiplies the inference score by the empirical mean of
/// `z^gamma_z` over the item's quality bin (the popularity expectation
/// conditional on quality); `DoQOnly` multiplies by the item's own
/// `z^gamma_z`. Items outside every bin are an error.
#[allow(clippy::too_many_arguments)]
pub fn ablation_score(
    mode: AblationMode,
    model_c: &FactorModel,
    model_l: &FactorModel,
    user: u32,
    item: u32,
    r: f64,
    z: &[f64],
    bin_of: &[Option<usize>],
    params: &ScoreParams,
) -> Result<f64> {
    let base = mbd_inference_score(model_c, model_l, user, item, r, params.gamma_r)?;
    let bin = bin_of[item as usize].ok_or(Error::ItemNotBinned(item))?;
    let factor = match mode {
        AblationMode::DoIOnly => {
            let mut sum = 0.0;
            let mut count = 0usize;
            for (j, b) in bin_of.iter().enumerate() {
                if *b == Some(bin) {
                    sum += z[j].powf(params.gamma_z);
                    count += 1;
                }
            }
            sum / count as f64
        }
        AblationMode::DoQOnly => z[item as usize].powf(params.gamma_z),
    };
    Ok(base * factor)
}

const CHECKPOINT_MAGIC: &str = "poprec-checkpoint v1";

/// Write a model and its scoring parameters.
///
/// The file is a short textual header (magic line, dimensions, role, the
/// score exponents), a `data` marker line, then the embedding tables as
/// little-endian 32-bit floats: user rows first, then item rows.
pub fn save_checkpoint<P: AsRef<Path>>(
    path: P,
    model: &FactorModel,
    params: &ScoreParams,
) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{CHECKPOINT_MAGIC}")?;
    writeln!(w, "role={}", model.role.as_str())?;
    writeln!(w, "num_users={}", model.num_users)?;
    writeln!(w, "num_items={}", model.num_items)?;
    writeln!(w, "dim={}", model.dim)?;
    writeln!(w, "gamma={}", params.gamma)?;
    writeln!(w, "gamma_tilde={}", params.gamma_tilde)?;
    writeln!(w, "gamma_r={}", params.gamma_r)?;
    writeln!(w, "gamma_z={}", params.gamma_z)?;
    writeln!(w, "gamma_zc={}", params.gamma_zc)?;
    writeln!(w, "data")?;
    for v in model.user_emb.iter().chain(&model.item_emb) {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Load a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint<P: AsRef<Path>>(path: P) -> Result<(FactorModel, ScoreParams)> {
    let file = std::fs::File::open(path.as_ref())?;
    let mut r = BufReader::new(file);
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim_end() != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic line".into()));
    }
    let mut fields: std::collections::HashMap<String, String> = std::collections::HashMap::new();
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::Checkpoint("missing data marker".into()));
        }
        let trimmed = line.trim_end();
        if trimmed == "data" {
            break;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| Error::Checkpoint(format!("bad header line {trimmed:?}")))?;
        fields.insert(key.to_string(), value.to_string());
    }
    let get = |key: &str| -> Result<&String> {
        fields
            .get(key)
            .ok_or_else(|| Error::Checkpoint(format!("missing header field {key}")))
    };
    let parse_usize = |key: &str| -> Result<usize> {
        get(key)?
            .parse()
            .map_err(|_| Error::Checkpoint(format!("bad value for {key}")))
    };
    let parse_f64 = |key: &str| -> Result<f64> {
        get(key)?
            .parse()
            .map_err(|_| Error::Checkpoint(format!("bad value for {key}")))
    };
    let role = ModelRole::parse(get("role")?)?;
    let num_users = parse_usize("num_users")?;
    let num_items = parse_usize("num_items")?;
    let dim = parse_usize("dim")?;
    let params = ScoreParams {
        gamma: parse_f64("gamma")?,
        gamma_tilde: parse_f64("gamma_tilde")?,
        gamma_r: parse_f64("gamma_r")?,
        gamma_z: parse_f64("gamma_z")?,
        gamma_zc: parse_f64("gamma_zc")?,
    };
    let mut model = FactorModel::zeros(num_users, num_items, dim, role);
    let total = (num_users + num_items) * dim;
    let mut bytes = vec![0u8; total * 4];
    r.read_exact(&mut bytes).map_err(|_| {
        Error::Checkpoint(format!("embedding block truncated (expected {total} floats)"))
    })?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after embeddings".into()));
    }
    for (k, chunk) in bytes.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as f64;
        if k < num_users * dim {
            model.user_emb[k] = v;
        } else {
            model.item_emb[k - num_users * dim] = v;
        }
    }
    if !model.all_finite() {
        return Err(Error::Checkpoint("non-finite embedding entry".into()));
    }
    Ok((model, params))
}
