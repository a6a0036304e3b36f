//! Synthetic interaction generator with known ground truth.
//!
//! The generator follows the causal structure under study: a per-item
//! popularity state drives exposure (`Z -> I`, strength `exposure_strength`)
//! and amplifies click probability (`Z -> C`, strength `gamma_true`) on top
//! of a latent user-item match. Popularity drifts across stages through a
//! multiplicative log-normal perturbation. In multi-behavior mode, clicked
//! events draw a post-click label from a second latent match times a latent
//! item quality, and an optional producer-reputation scalar couples
//! popularity and quality (the hidden-confounder path).
//!
//! Every exposure event is logged with its click label, so equal-count
//! staging of the emitted log reproduces the generator's stages exactly.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Normal;

use crate::dataset::{Interaction, InteractionLog};
use crate::error::Error;
use crate::evaluation::{rank_all_users, RankingReport};
use crate::model::{elu_prime, pd_score, FactorModel};
use crate::rng::substream;
use crate::training::interacted_sets;
use crate::Result;

/// Generator configuration.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub num_users: usize,
    pub num_items: usize,
    pub num_stages: usize,
    /// Latent dimension of the true matching model.
    pub d_true: usize,
    /// Conformity strength: exponent on popularity inside the click
    /// probability.
    pub gamma_true: f64,
    /// Exposure strength: exponent coupling exposure odds to popularity.
    pub exposure_strength: f64,
    /// Scale of the per-stage log-normal popularity perturbation.
    pub drift_rate: f64,
    /// Exposure events per stage.
    pub interactions_per_stage: usize,
    pub seed: u64,
    /// Emit post-click labels driven by latent quality.
    pub mbd_labels: bool,
    /// Producer-reputation coupling between popularity and quality, in
    /// `[0, 1]`. Zero removes the hidden-confounder path.
    pub rho_t: f64,
    /// Spread of the base log-popularity.
    pub pop_spread: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_users: 200,
            num_items: 100,
            num_stages: 10,
            d_true: 8,
            gamma_true: 1.0,
            exposure_strength: 1.0,
            drift_rate: 0.2,
            interactions_per_stage: 2000,
            seed: 42,
            mbd_labels: false,
            rho_t: 0.0,
            pop_spread: 1.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("num_users", self.num_users),
            ("num_items", self.num_items),
            ("num_stages", self.num_stages),
            ("d_true", self.d_true),
            ("interactions_per_stage", self.interactions_per_stage),
        ] {
            if v == 0 {
                return Err(Error::InvalidParameter(format!("{name} must be >= 1")));
            }
        }
        for (name, v) in [
            ("gamma_true", self.gamma_true),
            ("exposure_strength", self.exposure_strength),
            ("drift_rate", self.drift_rate),
            ("pop_spread", self.pop_spread),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and >= 0 (got {v})"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.rho_t) {
            return Err(Error::InvalidParameter(format!(
                "rho_t must lie in [0, 1] (got {})",
                self.rho_t
            )));
        }
        Ok(())
    }
}

/// The generator's hidden state, kept for oracle evaluation.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// Latent click-side match per (user, item).
    pub true_match: Vec<Vec<f64>>,
    /// Latent post-click-side match (multi-behavior mode only).
    pub true_match_post: Option<Vec<Vec<f64>>>,
    /// Per-stage popularity state (normalized).
    pub true_pop: Vec<Vec<f64>>,
    /// Per-stage exposure sampling distribution (`pop^beta`, normalized).
    pub true_exposure: Vec<Vec<f64>>,
    /// Latent item quality in (0, 1).
    pub true_quality: Vec<f64>,
}

impl GroundTruth {
    /// Popularity-free click relevance: `ELU'(true match)`.
    pub fn click_relevance(&self, user: u32, item: u32) -> f64 {
        elu_prime(self.true_match[user as usize][item as usize])
    }

    /// Popularity-free post-click relevance: click relevance times the true
    /// post-click propensity `sigmoid(match_post) * quality`.
    pub fn post_relevance(&self, user: u32, item: u32) -> f64 {
        let post = self
            .true_match_post
            .as_ref()
            .expect("post relevance needs multi-behavior ground truth");
        let m = post[user as usize][item as usize];
        self.click_relevance(user, item) * logistic(m) * self.true_quality[item as usize]
    }
}

#[inline]
fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn latent_tables<R: Rng>(
    users: usize,
    items: usize,
    dim: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    // Entry scale d^(-1/4) puts the inner products near unit variance.
    let normal = Normal::new(0.0, (dim as f64).powf(-0.25)).expect("valid std");
    let user_vecs: Vec<Vec<f64>> = (0..users)
        .map(|_| (0..dim).map(|_| normal.sample(rng)).collect())
        .collect();
    let item_vecs: Vec<Vec<f64>> = (0..items)
        .map(|_| (0..dim).map(|_| normal.sample(rng)).collect())
        .collect();
    user_vecs
        .iter()
        .map(|u| {
            item_vecs
                .iter()
                .map(|i| u.iter().zip(i).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect()
}

fn normalize(v: &mut [f64]) {
    let total: f64 = v.iter().sum();
    for x in v.iter_mut() {
        *x /= total;
    }
}

/// Generate a staged exposure log with click (and optionally post-click)
/// labels, plus the ground truth that produced it.
///
/// Click probabilities are `ELU'(match) * pop^gamma_true`, globally scaled so
/// the maximum over users, items and stages is 0.9. With
/// `exposure_strength = 0` exposure is uniform; with `drift_rate = 0` the
/// popularity state is stationary. Identical configs generate identical
/// logs.
pub fn generate(cfg: &SynthConfig) -> Result<(InteractionLog, GroundTruth)> {
    cfg.validate()?;
    let mut emb_rng = substream(cfg.seed, "synth.embeddings");
    let true_match = latent_tables(cfg.num_users, cfg.num_items, cfg.d_true, &mut emb_rng);
    let true_match_post = if cfg.mbd_labels {
        let mut post_rng = substream(cfg.seed, "synth.embeddings.post");
        Some(latent_tables(cfg.num_users, cfg.num_items, cfg.d_true, &mut post_rng))
    } else {
        None
    };

    // Producer reputation couples base popularity and quality when rho_t > 0;
    // the mixing is variance-normalized so rho only shifts where the spread
    // comes from.
    let mut item_rng = substream(cfg.seed, "synth.items");
    let std_normal = Normal::new(0.0, 1.0).expect("valid std");
    let reputation: Vec<f64> = (0..cfg.num_items).map(|_| std_normal.sample(&mut item_rng)).collect();
    let pop_noise: Vec<f64> = (0..cfg.num_items).map(|_| std_normal.sample(&mut item_rng)).collect();
    let quality_noise: Vec<f64> = (0..cfg.num_items).map(|_| std_normal.sample(&mut item_rng)).collect();
    let mix_norm = ((1.0 - cfg.rho_t).powi(2) + cfg.rho_t.powi(2)).sqrt();
    let mix = |own: f64, rep: f64| ((1.0 - cfg.rho_t) * own + cfg.rho_t * rep) / mix_norm;

    let mut base_pop: Vec<f64> = pop_noise
        .iter()
        .zip(&reputation)
        .map(|(&g, &rep)| (cfg.pop_spread * mix(g, rep)).exp())
        .collect();
    normalize(&mut base_pop);
    // Quality lives in (0.1, 0.9): the floor keeps post-click ratios
    // estimable at small sample sizes.
    let true_quality: Vec<f64> = quality_noise
        .iter()
        .zip(&reputation)
        .map(|(&h, &rep)| 0.1 + 0.8 * logistic(1.5 * mix(h, rep)))
        .collect();

    let mut drift_rng = substream(cfg.seed, "synth.drift");
    let mut true_pop = Vec::with_capacity(cfg.num_stages);
    let mut pop = base_pop;
    for t in 0..cfg.num_stages {
        if t > 0 && cfg.drift_rate > 0.0 {
            for p in pop.iter_mut() {
                *p *= (cfg.drift_rate * std_normal.sample(&mut drift_rng)).exp();
            }
            normalize(&mut pop);
        }
        true_pop.push(pop.clone());
    }
    let true_exposure: Vec<Vec<f64>> = true_pop
        .iter()
        .map(|stage| {
            let mut e: Vec<f64> = stage.iter().map(|&p| p.powf(cfg.exposure_strength)).collect();
            normalize(&mut e);
            e
        })
        .collect();

    // Global click-probability scale: cap the maximum at 0.9.
    let mut max_score = 0.0f64;
    for u in 0..cfg.num_users {
        for i in 0..cfg.num_items {
            let elu = elu_prime(true_match[u][i]);
            for stage in &true_pop {
                let s = elu * stage[i].powf(cfg.gamma_true);
                if s > max_score {
                    max_score = s;
                }
            }
        }
    }
    if !(max_score.is_finite() && max_score > 0.0) {
        return Err(Error::InfeasibleCap);
    }
    let scale = 0.9 / max_score;

    let mut events_rng = substream(cfg.seed, "synth.events");
    let mut records = Vec::with_capacity(cfg.num_stages * cfg.interactions_per_stage);
    for t in 0..cfg.num_stages {
        let sampler = WeightedIndex::new(&true_exposure[t])
            .map_err(|e| Error::InvalidParameter(format!("exposure weights: {e}")))?;
        let pow_pop: Vec<f64> = true_pop[t].iter().map(|&p| p.powf(cfg.gamma_true)).collect();
        for k in 0..cfg.interactions_per_stage {
            let user = events_rng.random_range(0..cfg.num_users) as u32;
            let item = sampler.sample(&mut events_rng) as u32;
            let p_click =
                scale * elu_prime(true_match[user as usize][item as usize]) * pow_pop[item as usize];
            let clicked = events_rng.random_bool(p_click);
            let post_clicked = if clicked {
                if let Some(post) = &true_match_post {
                    let p_post = logistic(post[user as usize][item as usize])
                        * true_quality[item as usize];
                    events_rng.random_bool(p_post)
                } else {
                    false
                }
            } else {
                false
            };
            records.push(Interaction {
                user,
                item,
                timestamp: (t * cfg.interactions_per_stage + k) as i64,
                clicked,
                post_clicked,
            });
        }
    }
    let log = InteractionLog::new(records, cfg.num_users, cfg.num_items, true)?;
    Ok((
        log,
        GroundTruth {
            true_match,
            true_match_post,
            true_pop,
            true_exposure,
            true_quality,
        },
    ))
}

/// NDCG@K of ranked lists against a graded ground-truth relevance, ideal
/// ranking taken over each user's candidate set.
pub fn ground_truth_ndcg<F>(
    report: &RankingReport,
    excluded: &[std::collections::HashSet<u32>],
    num_items: usize,
    relevance: F,
) -> f64
where
    F: Fn(u32, u32) -> f64,
{
    let mut total = 0.0;
    let mut users = 0usize;
    for (u, list) in report.lists.iter().enumerate() {
        let user = u as u32;
        let mut dcg = 0.0;
        for (rank0, &item) in list.iter().enumerate() {
            dcg += relevance(user, item) / (rank0 as f64 + 2.0).log2();
        }
        let mut rels: Vec<f64> = (0..num_items as u32)
            .filter(|i| !excluded[u].contains(i))
            .map(|i| relevance(user, i))
            .collect();
        rels.sort_by(|a, b| b.total_cmp(a));
        rels.truncate(report.k);
        let mut idcg = 0.0;
        for (rank0, rel) in rels.iter().enumerate() {
            idcg += rel / (rank0 as f64 + 2.0).log2();
        }
        if idcg > 0.0 {
            total += dcg / idcg;
            users += 1;
        }
    }
    if users == 0 {
        0.0
    } else {
        total / users as f64
    }
}

/// How strongly each model's recommendations track item popularity, and how
/// well each recovers the true preferences.
#[derive(Debug, Clone, Copy)]
pub struct AmplificationReport {
    /// Spearman between recommendation frequency and item click counts for
    /// the correlational model.
    pub spearman_correlational: f64,
    /// Same for the deconfounded model.
    pub spearman_deconfounded: f64,
    /// Ground-truth NDCG@K of the correlational model.
    pub ndcg_correlational: f64,
    /// Ground-truth NDCG@K of the deconfounded model.
    pub ndcg_deconfounded: f64,
}

/// Compare a correlational and a deconfounded model trained on the same log.
///
/// Both models are ranked by their bare matching score over the all-ranking
/// candidate sets; the report pairs each model's popularity-tracking
/// (Spearman of recommendation frequency against click counts) with its
/// ground-truth NDCG@K.
pub fn amplification_report(
    log: &InteractionLog,
    gt: &GroundTruth,
    model_correlational: &FactorModel,
    model_deconfounded: &FactorModel,
    k: usize,
) -> Result<AmplificationReport> {
    for model in [model_correlational, model_deconfounded] {
        if model.num_users() != log.num_users || model.num_items() != log.num_items {
            return Err(Error::DimensionMismatch {
                left: model.num_items(),
                right: log.num_items,
            });
        }
    }
    let excluded = interacted_sets(&log.records, log.num_users);
    let mut clicks = vec![0.0f64; log.num_items];
    for r in &log.records {
        if r.clicked {
            clicks[r.item as usize] += 1.0;
        }
    }

    let eval = |model: &FactorModel| -> Result<(f64, f64)> {
        let report = rank_all_users(
            |u, i| pd_score(model, u, i).unwrap_or(f64::NEG_INFINITY),
            log.num_users,
            log.num_items,
            &excluded,
            k,
        )?;
        let mut freq = vec![0.0f64; log.num_items];
        for list in &report.lists {
            for &i in list {
                freq[i as usize] += 1.0;
            }
        }
        let rho = crate::evaluation::spearman(&freq, &clicks)?;
        let ndcg = ground_truth_ndcg(&report, &excluded, log.num_items, |u, i| {
            gt.click_relevance(u, i)
        });
        Ok((rho, ndcg))
    };
    let (rho_corr, ndcg_corr) = eval(model_correlational)?;
    let (rho_pd, ndcg_pd) = eval(model_deconfounded)?;
    Ok(AmplificationReport {
        spearman_correlational: rho_corr,
        spearman_deconfounded: rho_pd,
        ndcg_correlational: ndcg_corr,
        ndcg_deconfounded: ndcg_pd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{split_stages, PopularitySource, PopularityTable};
    use crate::popularity::{drift_series, jsd};

    #[test]
    fn generate_is_bit_reproducible() {
        let cfg = SynthConfig {
            num_users: 20,
            num_items: 15,
            num_stages: 3,
            interactions_per_stage: 200,
            mbd_labels: true,
            rho_t: 0.5,
            ..SynthConfig::default()
        };
        let (log_a, gt_a) = generate(&cfg).unwrap();
        let (log_b, gt_b) = generate(&cfg).unwrap();
        assert_eq!(log_a.records, log_b.records);
        assert_eq!(gt_a.true_quality, gt_b.true_quality);
        assert_eq!(gt_a.true_pop, gt_b.true_pop);
    }

    #[test]
    fn generate_shapes_and_labels() {
        let cfg = SynthConfig {
            num_users: 10,
            num_items: 8,
            num_stages: 2,
            interactions_per_stage: 100,
            mbd_labels: false,
            ..SynthConfig::default()
        };
        let (log, gt) = generate(&cfg).unwrap();
        assert_eq!(log.len(), 200);
        assert!(log.records.iter().all(|r| !r.post_clicked));
        assert!(gt.true_match_post.is_none());
        assert_eq!(gt.true_pop.len(), 2);
        assert!(gt.true_quality.iter().all(|&q| q > 0.0 && q < 1.0));
        for stage in &gt.true_pop {
            assert!((stage.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        // Timestamps are the global event index, so equal-count staging
        // reproduces the generator's stages.
        let staged = split_stages(&log, 2).unwrap();
        assert_eq!(staged.stage(0).len(), 100);
        assert!(staged.stage(0).iter().all(|r| r.timestamp < 100));
    }

    #[test]
    fn mbd_labels_respect_click_implication() {
        let cfg = SynthConfig {
            num_users: 30,
            num_items: 20,
            num_stages: 2,
            interactions_per_stage: 500,
            mbd_labels: true,
            rho_t: 0.3,
            ..SynthConfig::default()
        };
        let (log, gt) = generate(&cfg).unwrap();
        assert!(log.records.iter().all(|r| r.clicked || !r.post_clicked));
        assert!(log.records.iter().any(|r| r.post_clicked));
        assert!(gt.true_match_post.is_some());
    }

    #[test]
    fn uniform_exposure_when_beta_zero() {
        let cfg = SynthConfig {
            num_users: 50,
            num_items: 20,
            num_stages: 1,
            gamma_true: 0.0,
            exposure_strength: 0.0,
            drift_rate: 0.0,
            interactions_per_stage: 100_000,
            seed: 7,
            ..SynthConfig::default()
        };
        let (log, gt) = generate(&cfg).unwrap();
        // Exposure distribution is exactly uniform.
        for &e in &gt.true_exposure[0] {
            assert!((e - 1.0 / 20.0).abs() < 1e-12);
        }
        // Chi-square of observed exposure counts against uniform.
        let mut counts = vec![0usize; 20];
        for r in &log.records {
            counts[r.item as usize] += 1;
        }
        let expected = log.len() as f64 / 20.0;
        let stat: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let crit = ChiSquared::new(19.0).unwrap().inverse_cdf(0.99);
        assert!(stat < crit, "chi-square {stat} >= {crit}");
    }

    #[test]
    fn stationary_popularity_when_drift_zero() {
        let cfg = SynthConfig {
            num_users: 100,
            num_items: 30,
            num_stages: 4,
            drift_rate: 0.0,
            interactions_per_stage: 10_000,
            seed: 11,
            ..SynthConfig::default()
        };
        let (log, gt) = generate(&cfg).unwrap();
        for t in 1..4 {
            assert_eq!(gt.true_pop[t], gt.true_pop[0]);
        }
        let staged = split_stages(&log, 4).unwrap();
        let pop = PopularityTable::from_staged(&staged, PopularitySource::Clicks).unwrap();
        let series = drift_series(&pop).unwrap();

        // Resampling baseline: pool all records, split into pseudo-stages of
        // the same size at random, and measure the same drift metric.
        use rand::seq::SliceRandom;
        let mut rng = crate::rng::substream(99, "resample");
        let mut pooled: Vec<u32> = log.records.iter().filter(|r| r.clicked).map(|r| r.item).collect();
        let mut baseline = 0.0;
        let reps = 5;
        for _ in 0..reps {
            pooled.shuffle(&mut rng);
            let half = pooled.len() / 2;
            let mut mk_dist = |slice: &[u32]| {
                let mut counts = vec![0.0f64; 30];
                for &i in slice {
                    counts[i as usize] += 1.0;
                }
                let total: f64 = counts.iter().sum();
                counts.iter().map(|c| c / total).collect::<Vec<_>>()
            };
            let a = mk_dist(&pooled[..half]);
            let b = mk_dist(&pooled[half..]);
            baseline += jsd(&a, &b).unwrap();
        }
        baseline /= reps as f64;
        let mean_dp: f64 =
            series.successive.iter().sum::<f64>() / series.successive.len() as f64;
        assert!(
            mean_dp < 3.0 * baseline,
            "mean successive DP {mean_dp} vs baseline {baseline}"
        );
    }

    #[test]
    fn drifting_generator_accumulates() {
        // Accumulated drift should trend upward for a drifting generator.
        let cfg = SynthConfig {
            num_users: 100,
            num_items: 50,
            num_stages: 8,
            drift_rate: 0.4,
            interactions_per_stage: 20_000,
            seed: 3,
            ..SynthConfig::default()
        };
        let (log, _) = generate(&cfg).unwrap();
        let staged = split_stages(&log, 8).unwrap();
        let pop = PopularityTable::from_staged(&staged, PopularitySource::Clicks).unwrap();
        let series = drift_series(&pop).unwrap();
        let t: Vec<f64> = (0..series.accumulated.len()).map(|x| x as f64).collect();
        let rho = crate::evaluation::spearman(&series.accumulated, &t).unwrap();
        assert!(rho > 0.0, "accumulated DP should trend up, rho = {rho}");
    }

    #[test]
    fn empirical_popularity_tracks_exposure_distribution() {
        // With gamma_true = 0, click probability is popularity-free, so the
        // click distribution converges to the exposure distribution.
        let cfg = SynthConfig {
            num_users: 1000,
            num_items: 30,
            num_stages: 2,
            d_true: 8,
            gamma_true: 0.0,
            exposure_strength: 1.0,
            drift_rate: 0.0,
            interactions_per_stage: 100_000,
            seed: 17,
            pop_spread: 1.0,
            ..SynthConfig::default()
        };
        let (log, gt) = generate(&cfg).unwrap();
        let staged = split_stages(&log, 2).unwrap();
        let pop = PopularityTable::from_staged(&staged, PopularitySource::Clicks).unwrap();
        for t in 0..2 {
            let row = pop.row(t).unwrap();
            let l1: f64 = row
                .iter()
                .zip(&gt.true_exposure[t])
                .map(|(a, b)| (a - b).abs())
                .sum();
            assert!(l1 < 0.05, "stage {t} L1 distance {l1}");
        }
    }

    #[test]
    fn quality_ratio_tracks_true_quality_when_uncoupled() {
        let cfg = SynthConfig {
            num_users: 500,
            num_items: 30,
            num_stages: 1,
            gamma_true: 0.0,
            exposure_strength: 0.0,
            drift_rate: 0.0,
            interactions_per_stage: 100_000,
            mbd_labels: true,
            rho_t: 0.0,
            seed: 23,
            ..SynthConfig::default()
        };
        let (log, gt) = generate(&cfg).unwrap();
        let r = crate::dataset::compute_quality_ratio(&log);
        // Mean observed ratio per true-quality quintile must rise with the
        // quintile.
        let mut order: Vec<usize> = (0..30).collect();
        order.sort_by(|&a, &b| gt.true_quality[a].total_cmp(&gt.true_quality[b]));
        let bins: Vec<&[usize]> = order.chunks(6).collect();
        let means: Vec<f64> = bins
            .iter()
            .map(|bin| {
                let vals: Vec<f64> = bin.iter().filter_map(|&i| r[i]).collect();
                vals.iter().sum::<f64>() / vals.len() as f64
            })
            .collect();
        let idx: Vec<f64> = (0..means.len()).map(|x| x as f64).collect();
        let rho = crate::evaluation::spearman(&means, &idx).unwrap();
        assert!(rho > 0.9, "bin means {means:?} give rho {rho}");
    }

    #[test]
    fn infeasible_config_rejected() {
        let cfg = SynthConfig {
            rho_t: 2.0,
            ..SynthConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SynthConfig {
            gamma_true: -1.0,
            ..SynthConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn ground_truth_ndcg_perfect_for_oracle_ranking() {
        let cfg = SynthConfig {
            num_users: 15,
            num_items: 40,
            num_stages: 1,
            interactions_per_stage: 300,
            seed: 5,
            ..SynthConfig::default()
        };
        let (log, gt) = generate(&cfg).unwrap();
        let excluded = interacted_sets(&log.records, log.num_users);
        let report = rank_all_users(
            |u, i| gt.click_relevance(u, i),
            log.num_users,
            log.num_items,
            &excluded,
            3,
        )
        .unwrap();
        let ndcg = ground_truth_ndcg(&report, &excluded, log.num_items, |u, i| {
            gt.click_relevance(u, i)
        });
        assert!((ndcg - 1.0).abs() < 1e-12, "oracle scorer must reach NDCG 1, got {ndcg}");
    }
}
