//! All-ranking top-K evaluation and the exposure fairness suite.
//!
//! Rankings are deterministic: ties break by ascending item id. Accuracy
//! metrics are macro-averaged over users with at least one test item.
//! Fairness partitions items into quality bins (by quality-ratio quantiles)
//! and popularity subgroups within each bin, then measures exposure
//! disparities between subgroups (`D_r`) and exposure-per-quality disparities
//! between bins (`D_l`).

use std::collections::HashSet;

use rayon::prelude::*;

use crate::dataset::InteractionLog;
use crate::error::Error;
use crate::Result;

/// Top-K lists for every user, produced against the all-ranking candidate
/// set (every item not in the user's training interactions).
#[derive(Debug, Clone)]
pub struct RankingReport {
    pub k: usize,
    /// One ordered list per user.
    pub lists: Vec<Vec<u32>>,
}

/// Rank the top `k` items by score, excluding `excluded`, ties broken by
/// ascending item id.
pub fn rank_items<F>(score: F, num_items: usize, excluded: &HashSet<u32>, k: usize) -> Result<Vec<u32>>
where
    F: Fn(u32) -> f64,
{
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    let available = num_items - excluded.len();
    if available < k {
        return Err(Error::InsufficientCandidates { k, available });
    }
    let mut scored: Vec<(u32, f64)> = (0..num_items as u32)
        .filter(|i| !excluded.contains(i))
        .map(|i| (i, score(i)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored.into_iter().map(|(i, _)| i).collect())
}

/// Rank every user. Per-user work fans out across the rayon pool; the output
/// order (and therefore every downstream metric) is independent of the
/// thread count.
pub fn rank_all_users<F>(
    score: F,
    num_users: usize,
    num_items: usize,
    excluded: &[HashSet<u32>],
    k: usize,
) -> Result<RankingReport>
where
    F: Fn(u32, u32) -> f64 + Sync,
{
    let lists: Result<Vec<Vec<u32>>> = (0..num_users as u32)
        .into_par_iter()
        .map(|u| rank_items(|i| score(u, i), num_items, &excluded[u as usize], k))
        .collect();
    Ok(RankingReport { k, lists: lists? })
}

/// Which label marks a test positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PositiveKind {
    #[default]
    Clicks,
    PostClicks,
}

/// Sorted positive item lists per user.
pub fn positives_by_user(log: &InteractionLog, kind: PositiveKind) -> Vec<Vec<u32>> {
    let mut sets: Vec<HashSet<u32>> = vec![HashSet::new(); log.num_users];
    for r in &log.records {
        let keep = match kind {
            PositiveKind::Clicks => r.clicked,
            PositiveKind::PostClicks => r.post_clicked,
        };
        if keep {
            sets[r.user as usize].insert(r.item);
        }
    }
    sets.into_iter()
        .map(|s| {
            let mut v: Vec<u32> = s.into_iter().collect();
            v.sort_unstable();
            v
        })
        .collect()
}

/// Macro-averaged top-K accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyMetrics {
    pub recall: f64,
    pub hit_ratio: f64,
    pub ndcg: f64,
}

/// Recall@K, HitRatio@K and NDCG@K of ranked lists against per-user positive
/// sets. Users with no positives are excluded from the averages; NDCG uses
/// binary gains with a `1 / log2(1 + rank)` discount.
pub fn accuracy_metrics(report: &RankingReport, positives: &[Vec<u32>]) -> AccuracyMetrics {
    let mut recall_sum = 0.0;
    let mut hit_sum = 0.0;
    let mut ndcg_sum = 0.0;
    let mut users = 0usize;
    for (list, pos) in report.lists.iter().zip(positives) {
        if pos.is_empty() {
            continue;
        }
        let mut hits = 0usize;
        let mut dcg = 0.0;
        for (rank0, item) in list.iter().enumerate() {
            if pos.binary_search(item).is_ok() {
                hits += 1;
                dcg += 1.0 / ((rank0 as f64 + 2.0).log2());
            }
        }
        let ideal = pos.len().min(report.k);
        let mut idcg = 0.0;
        for rank0 in 0..ideal {
            idcg += 1.0 / ((rank0 as f64 + 2.0).log2());
        }
        recall_sum += hits as f64 / pos.len() as f64;
        hit_sum += if hits > 0 { 1.0 } else { 0.0 };
        ndcg_sum += dcg / idcg;
        users += 1;
    }
    if users == 0 {
        return AccuracyMetrics {
            recall: 0.0,
            hit_ratio: 0.0,
            ndcg: 0.0,
        };
    }
    let n = users as f64;
    AccuracyMetrics {
        recall: recall_sum / n,
        hit_ratio: hit_sum / n,
        ndcg: ndcg_sum / n,
    }
}

/// Position weight of the 1-based rank `j`: `1 / log2(1 + j)`.
pub fn position_exposure(j: usize) -> Result<f64> {
    if j < 1 {
        return Err(Error::InvalidParameter("rank must be >= 1".into()));
    }
    Ok(1.0 / ((1.0 + j as f64).log2()))
}

/// Exposure of one item over the ranked lists: the position-frequency
/// estimate `sum_j P(i at j) * v_j`, positions in ascending order.
pub fn item_exposure(report: &RankingReport, item: u32) -> f64 {
    let n_users = report.lists.len();
    if n_users == 0 {
        return 0.0;
    }
    let mut counts = vec![0usize; report.k];
    for list in &report.lists {
        for (rank0, &i) in list.iter().enumerate() {
            if i == item {
                counts[rank0] += 1;
            }
        }
    }
    let mut exposure = 0.0;
    for (rank0, &c) in counts.iter().enumerate() {
        exposure += (c as f64 / n_users as f64) * position_exposure(rank0 + 1).unwrap();
    }
    exposure
}

/// Exposure of every item, computed with the same per-item summation order
/// as [`item_exposure`].
pub fn all_item_exposures(report: &RankingReport, num_items: usize) -> Vec<f64> {
    let n_users = report.lists.len();
    let mut counts = vec![vec![0usize; report.k]; num_items];
    for list in &report.lists {
        for (rank0, &i) in list.iter().enumerate() {
            counts[i as usize][rank0] += 1;
        }
    }
    let weights: Vec<f64> = (1..=report.k).map(|j| position_exposure(j).unwrap()).collect();
    counts
        .iter()
        .map(|per_pos| {
            if n_users == 0 {
                return 0.0;
            }
            let mut exposure = 0.0;
            for (rank0, &c) in per_pos.iter().enumerate() {
                exposure += (c as f64 / n_users as f64) * weights[rank0];
            }
            exposure
        })
        .collect()
}

/// Mean item exposure over a group, in the group's storage order.
pub fn group_exposure(group: &[u32], exposures: &[f64]) -> Result<f64> {
    if group.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let mut sum = 0.0;
    for &i in group {
        sum += exposures[i as usize];
    }
    Ok(sum / group.len() as f64)
}

/// Exposure disparity `|Exp(G1) - Exp(G2)|`.
pub fn disparity_exposure(g1: &[u32], g2: &[u32], exposures: &[f64]) -> Result<f64> {
    Ok((group_exposure(g1, exposures)? - group_exposure(g2, exposures)?).abs())
}

/// Mean quality ratio over a group; every member must be graded.
pub fn group_ratio(group: &[u32], r: &[Option<f64>]) -> Result<f64> {
    if group.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let mut sum = 0.0;
    for &i in group {
        sum += r[i as usize].ok_or(Error::ItemNotBinned(i))?;
    }
    Ok(sum / group.len() as f64)
}

/// Exposure-per-quality disparity
/// `|Exp(G1)/Ratio(G1) - Exp(G2)/Ratio(G2)|`.
pub fn disparity_quality(
    g1: &[u32],
    g2: &[u32],
    exposures: &[f64],
    r: &[Option<f64>],
) -> Result<f64> {
    let r1 = group_ratio(g1, r)?;
    let r2 = group_ratio(g2, r)?;
    if r1 == 0.0 || r2 == 0.0 {
        return Err(Error::ZeroRatio);
    }
    Ok((group_exposure(g1, exposures)? / r1 - group_exposure(g2, exposures)? / r2).abs())
}

/// Quality bins and popularity subgroups.
///
/// Bins partition the graded items by quality-ratio quantiles; within each
/// bin, subgroups partition by click count. Both use equal-count splits
/// (sizes differ by at most one); membership lists are stored sorted by item
/// id.
#[derive(Debug, Clone)]
pub struct GroupSpec {
    pub bins: Vec<Vec<u32>>,
    /// `subgroups[bin][subgroup]` lists the member items.
    pub subgroups: Vec<Vec<Vec<u32>>>,
}

impl GroupSpec {
    /// Per-item bin assignment (`None` for ungraded items).
    pub fn bin_of(&self, num_items: usize) -> Vec<Option<usize>> {
        let mut assignment = vec![None; num_items];
        for (b, bin) in self.bins.iter().enumerate() {
            for &i in bin {
                assignment[i as usize] = Some(b);
            }
        }
        assignment
    }
}

fn equal_count_partition(sorted: &[u32], parts: usize) -> Vec<Vec<u32>> {
    let base = sorted.len() / parts;
    let rem = sorted.len() % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0usize;
    for k in 0..parts {
        let size = if k < rem { base + 1 } else { base };
        let mut chunk = sorted[start..start + size].to_vec();
        chunk.sort_unstable();
        out.push(chunk);
        start += size;
    }
    out
}

/// Partition graded items into `n_bins` quality bins and `n_subgroups`
/// popularity subgroups per bin.
///
/// Ties (equal ratios or equal click counts) break by ascending item id, so
/// the grouping is deterministic.
pub fn build_groups(
    r: &[Option<f64>],
    click_counts: &[u64],
    n_bins: usize,
    n_subgroups: usize,
) -> Result<GroupSpec> {
    if n_bins == 0 || n_subgroups == 0 {
        return Err(Error::InvalidParameter("bins and subgroups must be >= 1".into()));
    }
    let mut graded: Vec<u32> = (0..r.len() as u32).filter(|&i| r[i as usize].is_some()).collect();
    if graded.len() < n_bins {
        return Err(Error::TooFewGraded {
            items: graded.len(),
            requested: n_bins,
        });
    }
    graded.sort_by(|&a, &b| {
        let ra = r[a as usize].unwrap();
        let rb = r[b as usize].unwrap();
        ra.total_cmp(&rb).then(a.cmp(&b))
    });
    let bins = equal_count_partition(&graded, n_bins);
    let mut subgroups = Vec::with_capacity(n_bins);
    for bin in &bins {
        if bin.len() < n_subgroups {
            return Err(Error::TooFewGraded {
                items: bin.len(),
                requested: n_subgroups,
            });
        }
        let mut by_clicks = bin.clone();
        by_clicks.sort_by(|&a, &b| {
            click_counts[a as usize]
                .cmp(&click_counts[b as usize])
                .then(a.cmp(&b))
        });
        subgroups.push(equal_count_partition(&by_clicks, n_subgroups));
    }
    Ok(GroupSpec { bins, subgroups })
}

/// Per-subgroup exposure statistics plus the bin-level disparities.
#[derive(Debug, Clone)]
pub struct FairnessReport {
    /// `(bin, subgroup, exposure, ratio)` rows in bin-major order.
    pub subgroups: Vec<(usize, usize, f64, f64)>,
    /// Average pairwise subgroup exposure disparity per bin.
    pub d_r_per_bin: Vec<f64>,
    /// Mean exposure-per-quality disparity of each bin against the others.
    pub d_l_per_bin: Vec<f64>,
    /// Population variance of item exposures within each bin.
    pub exposure_variance_per_bin: Vec<f64>,
    /// Mean of `d_r_per_bin`.
    pub mean_d_r: f64,
    /// Mean `D_l` over all bin pairs.
    pub mean_d_l: f64,
}

/// Fairness metrics of ranked lists for a grouping.
pub fn fairness_report(
    report: &RankingReport,
    spec: &GroupSpec,
    r: &[Option<f64>],
    num_items: usize,
) -> Result<FairnessReport> {
    let exposures = all_item_exposures(report, num_items);
    let mut subgroup_rows = Vec::new();
    let mut d_r_per_bin = Vec::with_capacity(spec.bins.len());
    let mut variance_per_bin = Vec::with_capacity(spec.bins.len());
    for (b, subs) in spec.subgroups.iter().enumerate() {
        for (s, members) in subs.iter().enumerate() {
            subgroup_rows.push((b, s, group_exposure(members, &exposures)?, group_ratio(members, r)?));
        }
        // Average over subgroup pairs within the bin.
        let mut sum = 0.0;
        let mut pairs = 0usize;
        for x in 0..subs.len() {
            for y in x + 1..subs.len() {
                sum += disparity_exposure(&subs[x], &subs[y], &exposures)?;
                pairs += 1;
            }
        }
        d_r_per_bin.push(if pairs == 0 { 0.0 } else { sum / pairs as f64 });

        let bin = &spec.bins[b];
        let mean = group_exposure(bin, &exposures)?;
        let mut var = 0.0;
        for &i in bin {
            let d = exposures[i as usize] - mean;
            var += d * d;
        }
        variance_per_bin.push(var / bin.len() as f64);
    }

    let n_bins = spec.bins.len();
    let mut d_l_matrix = vec![vec![0.0; n_bins]; n_bins];
    let mut d_l_sum = 0.0;
    let mut d_l_pairs = 0usize;
    for a in 0..n_bins {
        for b in a + 1..n_bins {
            let d = disparity_quality(&spec.bins[a], &spec.bins[b], &exposures, r)?;
            d_l_matrix[a][b] = d;
            d_l_matrix[b][a] = d;
            d_l_sum += d;
            d_l_pairs += 1;
        }
    }
    let d_l_per_bin: Vec<f64> = (0..n_bins)
        .map(|a| {
            if n_bins <= 1 {
                0.0
            } else {
                d_l_matrix[a].iter().sum::<f64>() / (n_bins - 1) as f64
            }
        })
        .collect();
    let mean_d_r = if d_r_per_bin.is_empty() {
        0.0
    } else {
        d_r_per_bin.iter().sum::<f64>() / d_r_per_bin.len() as f64
    };
    let mean_d_l = if d_l_pairs == 0 {
        0.0
    } else {
        d_l_sum / d_l_pairs as f64
    };
    Ok(FairnessReport {
        subgroups: subgroup_rows,
        d_r_per_bin,
        d_l_per_bin,
        exposure_variance_per_bin: variance_per_bin,
        mean_d_r,
        mean_d_l,
    })
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut idx = 0usize;
    while idx < n {
        let mut end = idx + 1;
        while end < n && values[order[end]] == values[order[idx]] {
            end += 1;
        }
        // 1-based ranks; ties share the average rank of their span.
        let avg = (idx + 1 + end) as f64 / 2.0;
        for &pos in &order[idx..end] {
            ranks[pos] = avg;
        }
        idx = end;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidParameter("need at least two points".into()));
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let n = x.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        let da = a - mean;
        let db = b - mean;
        cov += da * db;
        var_x += da * da;
        var_y += db * db;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(Error::ConstantInput);
    }
    Ok(cov / (var_x.sqrt() * var_y.sqrt()))
}
