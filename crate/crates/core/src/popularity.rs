//! Popularity drift between stages and next-stage popularity forecasting.
//!
//! Drift between two stages is the Jensen-Shannon divergence of their item
//! popularity distributions; the forecast extrapolates the last two stages
//! linearly and clamps the result to stay positive.

use crate::dataset::PopularityTable;
use crate::error::Error;
use crate::Result;

/// Jensen-Shannon divergence between two distributions, natural log.
///
/// Uses the convention `0 * ln 0 = 0`. The result lies in `[0, ln 2]`.
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let mut sums = (0.0, 0.0);
    for (idx, (&a, &b)) in p.iter().zip(q).enumerate() {
        if a < 0.0 || b < 0.0 {
            return Err(Error::NegativeEntry(idx));
        }
        sums.0 += a;
        sums.1 += b;
    }
    if (sums.0 - 1.0).abs() > 1e-6 {
        return Err(Error::NotADistribution(sums.0));
    }
    if (sums.1 - 1.0).abs() > 1e-6 {
        return Err(Error::NotADistribution(sums.1));
    }
    let mut kl_p = 0.0;
    let mut kl_q = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let mid = 0.5 * (a + b);
        if a > 0.0 {
            kl_p += a * (a / mid).ln();
        }
        if b > 0.0 {
            kl_q += b * (b / mid).ln();
        }
    }
    Ok(0.5 * kl_p + 0.5 * kl_q)
}

/// Jensen-Shannon divergence in bits (base-2 log); range `[0, 1]`.
pub fn jsd_base2(p: &[f64], q: &[f64]) -> Result<f64> {
    Ok(jsd(p, q)? / std::f64::consts::LN_2)
}

/// Popularity drift between stages `t` and `s` of a table: the JSD of their
/// popularity rows. Symmetric in its stage arguments.
pub fn drift(pop: &PopularityTable, t: usize, s: usize) -> Result<f64> {
    jsd(pop.row(t)?, pop.row(s)?)
}

/// Successive and accumulated drift across all stages of a table.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftSeries {
    /// `DP(t, t+1)` for `t = 0 .. T-2`.
    pub successive: Vec<f64>,
    /// `DP(0, t)` for `t = 1 .. T-1`.
    pub accumulated: Vec<f64>,
}

/// Compute the drift series of a table with at least two stages.
pub fn drift_series(pop: &PopularityTable) -> Result<DriftSeries> {
    let stages = pop.num_stages();
    if stages < 2 {
        return Err(Error::InvalidParameter(
            "drift series needs at least two stages".into(),
        ));
    }
    let mut successive = Vec::with_capacity(stages - 1);
    let mut accumulated = Vec::with_capacity(stages - 1);
    for t in 0..stages - 1 {
        successive.push(drift(pop, t, t + 1)?);
    }
    for t in 1..stages {
        accumulated.push(drift(pop, 0, t)?);
    }
    Ok(DriftSeries {
        successive,
        accumulated,
    })
}

/// Forecast next-stage popularity values with the drift strength that
/// produced them.
#[derive(Debug, Clone)]
pub struct PopularityForecast {
    /// Per-item forecast, clamped below at the floor supplied at creation.
    pub m_tilde: Vec<f64>,
    pub alpha: f64,
}

/// Linear next-stage forecast: `m~ = m_T + alpha * (m_T - m_{T-1})`,
/// clamped below at `floor`.
///
/// The clamp keeps decaying items positive; the forecast is a multiplicative
/// ranking factor, so a negative or zero value would be meaningless (and a
/// fractional exponent of a negative base is undefined). The vector is not
/// renormalized: a global constant does not change rankings.
pub fn forecast_popularity(
    m_last: &[f64],
    m_prev: &[f64],
    alpha: f64,
    floor: f64,
) -> Result<PopularityForecast> {
    if m_last.len() != m_prev.len() {
        return Err(Error::DimensionMismatch {
            left: m_last.len(),
            right: m_prev.len(),
        });
    }
    let m_tilde = m_last
        .iter()
        .zip(m_prev)
        .map(|(&last, &prev)| (last + alpha * (last - prev)).max(floor))
        .collect();
    Ok(PopularityForecast { m_tilde, alpha })
}

/// Forecast from the last two stages of a table, using the last stage's
/// popularity floor as the clamp.
pub fn forecast_from_table(pop: &PopularityTable, alpha: f64) -> Result<PopularityForecast> {
    let stages = pop.num_stages();
    if stages < 2 {
        return Err(Error::InvalidParameter(
            "forecast needs at least two stages".into(),
        ));
    }
    forecast_popularity(
        pop.row(stages - 1)?,
        pop.row(stages - 2)?,
        alpha,
        pop.epsilon(stages - 1)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{split_stages, Interaction, InteractionLog, PopularitySource};
    use proptest::prelude::*;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn jsd_identical_is_zero() {
        let p = [0.2, 0.3, 0.5];
        assert_eq!(jsd(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn jsd_disjoint_support_is_ln2() {
        let v = jsd(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((v - LN2).abs() < 1e-15, "{v}");
    }

    #[test]
    fn jsd_worked_example() {
        // Oracle: both KL terms against the midpoint, evaluated directly.
        let p = [0.5, 0.5];
        let q = [0.25, 0.75];
        let v = jsd(&p, &q).unwrap();
        assert!((v - 0.033822075568605205).abs() < 1e-15, "{v}");
    }

    #[test]
    fn jsd_dimension_mismatch() {
        assert!(matches!(
            jsd(&[1.0], &[0.5, 0.5]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn jsd_rejects_negative() {
        assert!(matches!(
            jsd(&[1.5, -0.5], &[0.5, 0.5]),
            Err(Error::NegativeEntry(1))
        ));
    }

    #[test]
    fn jsd_rejects_unnormalized() {
        assert!(matches!(
            jsd(&[0.5, 0.4], &[0.5, 0.5]),
            Err(Error::NotADistribution(_))
        ));
    }

    #[test]
    fn jsd_base2_bound_is_one() {
        let v = jsd_base2(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    fn staged_from_counts(counts: &[Vec<(u32, usize)>]) -> crate::dataset::StagedInteractions {
        let mut records = Vec::new();
        let mut ts = 0i64;
        let mut num_items = 0;
        for stage in counts {
            for &(item, n) in stage {
                num_items = num_items.max(item as usize + 1);
                for _ in 0..n {
                    records.push(Interaction {
                        user: 0,
                        item,
                        timestamp: ts,
                        clicked: true,
                        post_clicked: false,
                    });
                }
            }
            ts += 1;
        }
        // One timestamp per stage and per-stage record counts equal, so the
        // equal-count split reproduces the construction.
        let log = InteractionLog::new(records, 1, num_items, false).unwrap();
        split_stages(&log, counts.len()).unwrap()
    }

    #[test]
    fn drift_zero_for_same_stage_and_equal_counts() {
        let staged = staged_from_counts(&[
            vec![(0, 2), (1, 3)],
            vec![(0, 2), (1, 3)],
        ]);
        let pop = PopularityTable::from_staged(&staged, PopularitySource::Clicks).unwrap();
        assert_eq!(drift(&pop, 0, 0).unwrap(), 0.0);
        assert_eq!(drift(&pop, 0, 1).unwrap(), 0.0);
    }

    #[test]
    fn drift_disjoint_stages() {
        let staged = staged_from_counts(&[vec![(0, 4)], vec![(1, 4)]]);
        let pop = PopularityTable::from_staged(&staged, PopularitySource::Clicks).unwrap();
        let v = drift(&pop, 0, 1).unwrap();
        assert!((v - LN2).abs() < 1e-12);
        assert_eq!(drift(&pop, 0, 1).unwrap(), drift(&pop, 1, 0).unwrap());
    }

    #[test]
    fn drift_series_shapes() {
        let staged = staged_from_counts(&[
            vec![(0, 3), (1, 1)],
            vec![(0, 2), (1, 2)],
            vec![(0, 1), (1, 3)],
        ]);
        let pop = PopularityTable::from_staged(&staged, PopularitySource::Clicks).unwrap();
        let series = drift_series(&pop).unwrap();
        assert_eq!(series.successive.len(), 2);
        assert_eq!(series.accumulated.len(), 2);
        assert_eq!(series.successive[0], series.accumulated[0]);
        // Accumulated drift from stage 0 grows as the distribution moves away.
        assert!(series.accumulated[1] > series.accumulated[0]);
    }

    #[test]
    fn drift_series_t2_successive_equals_accumulated() {
        let staged = staged_from_counts(&[vec![(0, 3), (1, 1)], vec![(0, 1), (1, 3)]]);
        let pop = PopularityTable::from_staged(&staged, PopularitySource::Clicks).unwrap();
        let series = drift_series(&pop).unwrap();
        assert_eq!(series.successive.len(), 1);
        assert_eq!(series.accumulated.len(), 1);
        assert_eq!(series.successive[0], series.accumulated[0]);
    }

    #[test]
    fn drift_series_needs_two_stages() {
        let staged = staged_from_counts(&[vec![(0, 2)]]);
        let pop = PopularityTable::from_staged(&staged, PopularitySource::Clicks).unwrap();
        assert!(drift_series(&pop).is_err());
    }

    #[test]
    fn forecast_linear_extrapolation() {
        let f = forecast_popularity(&[0.5], &[0.3], 1.0, 1e-9).unwrap();
        assert!((f.m_tilde[0] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn forecast_alpha_zero_is_identity() {
        let m = [0.25, 0.5, 0.25];
        let f = forecast_popularity(&m, &[0.9, 0.05, 0.05], 0.0, 1e-9).unwrap();
        assert_eq!(f.m_tilde, m.to_vec());
    }

    #[test]
    fn forecast_clamps_negative() {
        let floor = 0.01;
        let f = forecast_popularity(&[0.1], &[0.4], 1.0, floor).unwrap();
        // Raw extrapolation is -0.2; the clamp takes over.
        assert_eq!(f.m_tilde[0], floor);
        assert!(f.m_tilde[0] > 0.0);
    }

    #[test]
    fn forecast_dimension_mismatch() {
        assert!(forecast_popularity(&[0.1], &[0.4, 0.6], 1.0, 1e-9).is_err());
    }

    #[test]
    fn forecast_from_table_uses_last_two_stages() {
        let staged = staged_from_counts(&[vec![(0, 2), (1, 2)], vec![(0, 3), (1, 1)]]);
        let pop = PopularityTable::from_staged(&staged, PopularitySource::Clicks).unwrap();
        let f = forecast_from_table(&pop, 1.0).unwrap();
        // m_T = [0.75, 0.25], m_{T-1} = [0.5, 0.5] -> [1.0, 0.0->floor].
        assert!((f.m_tilde[0] - 1.0).abs() < 1e-12);
        assert_eq!(f.m_tilde[1], pop.epsilon(1).unwrap());
    }

    proptest! {
        #[test]
        fn jsd_properties_on_random_simplex_pairs(
            raw_p in proptest::collection::vec(1e-3f64..1.0, 2..12),
            raw_q in proptest::collection::vec(1e-3f64..1.0, 2..12),
        ) {
            let n = raw_p.len().min(raw_q.len());
            let sp: f64 = raw_p[..n].iter().sum();
            let sq: f64 = raw_q[..n].iter().sum();
            let p: Vec<f64> = raw_p[..n].iter().map(|v| v / sp).collect();
            let q: Vec<f64> = raw_q[..n].iter().map(|v| v / sq).collect();
            let a = jsd(&p, &q).unwrap();
            let b = jsd(&q, &p).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!(a >= -1e-12);
            prop_assert!(a <= LN2 + 1e-9);
            prop_assert!(jsd(&p, &p).unwrap().abs() < 1e-15);
        }

        #[test]
        fn forecast_clamped_outputs_positive(
            last in proptest::collection::vec(0.0f64..1.0, 1..16),
            prev in proptest::collection::vec(0.0f64..1.0, 1..16),
            alpha in 0.0f64..4.0,
        ) {
            let n = last.len().min(prev.len());
            let f = forecast_popularity(&last[..n], &prev[..n], alpha, 1e-6).unwrap();
            prop_assert!(f.m_tilde.iter().all(|&v| v >= 1e-6));
        }
    }
}
