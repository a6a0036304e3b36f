//! Interaction logs, chronological splits, and popularity/quality statistics.
//!
//! A log is a list of `(user, item, timestamp)` records, optionally carrying
//! click / post-click labels. Logs are split two ways: into `T` chronological
//! stages (for per-stage popularity) and into train/valid/test partitions.
//! [`PopularityTable`] holds the per-stage local popularity fractions, raw
//! counts, per-item quality ratios and min-max-normalized global popularity.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::Error;
use crate::Result;

/// Shift applied by [`minmax_normalize`] so the minimum maps to a positive
/// value and constant vectors map to 1.
pub const MINMAX_DELTA: f64 = 1e-6;

/// A single user-item interaction event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interaction {
    pub user: u32,
    pub item: u32,
    pub timestamp: i64,
    pub clicked: bool,
    pub post_clicked: bool,
}

/// A user-item interaction log with dense, contiguous ids.
#[derive(Debug, Clone)]
pub struct InteractionLog {
    pub records: Vec<Interaction>,
    pub num_users: usize,
    pub num_items: usize,
    /// Whether click / post-click label columns were present. Unlabeled logs
    /// treat every record as a click.
    pub has_labels: bool,
}

impl InteractionLog {
    /// Build a log from records, checking index bounds and label consistency.
    pub fn new(
        records: Vec<Interaction>,
        num_users: usize,
        num_items: usize,
        has_labels: bool,
    ) -> Result<Self> {
        for (idx, r) in records.iter().enumerate() {
            if r.user as usize >= num_users {
                return Err(Error::IndexOutOfRange {
                    what: "user",
                    index: r.user as usize,
                    bound: num_users,
                });
            }
            if r.item as usize >= num_items {
                return Err(Error::IndexOutOfRange {
                    what: "item",
                    index: r.item as usize,
                    bound: num_items,
                });
            }
            if r.post_clicked && !r.clicked {
                return Err(Error::InvalidParameter(format!(
                    "record {idx}: post_clicked=1 requires clicked=1"
                )));
            }
        }
        Ok(InteractionLog {
            records,
            num_users,
            num_items,
            has_labels,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records sorted by timestamp, ties broken by input order.
    pub fn sorted_by_time(&self) -> Vec<Interaction> {
        let mut sorted = self.records.clone();
        sorted.sort_by_key(|r| r.timestamp);
        sorted
    }

    fn with_records(&self, records: Vec<Interaction>) -> InteractionLog {
        InteractionLog {
            records,
            num_users: self.num_users,
            num_items: self.num_items,
            has_labels: self.has_labels,
        }
    }
}

/// Which label counts as an interaction when building popularity statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PopularitySource {
    /// Count clicked records (every record of an unlabeled log).
    #[default]
    Clicks,
    /// Count post-clicked records only.
    PostClicks,
}

impl PopularitySource {
    pub fn counts(self, r: &Interaction) -> bool {
        match self {
            PopularitySource::Clicks => r.clicked,
            PopularitySource::PostClicks => r.post_clicked,
        }
    }
}

/// Input column layout for [`load_interactions`].
#[derive(Debug, Clone, Default)]
pub struct LogSchema {
    /// Skip the first line.
    pub has_header: bool,
    /// Expect five columns (`user item timestamp clicked post_clicked`)
    /// instead of three.
    pub has_labels: bool,
    /// Drop items, then users, with fewer than this many records (single
    /// pass, not an iterated k-core).
    pub min_interactions: u32,
}

/// Mapping from dense indices back to the original file ids.
#[derive(Debug, Clone)]
pub struct IdMap {
    pub users: Vec<u64>,
    pub items: Vec<u64>,
}

impl IdMap {
    /// Write the mapping as TSV (`kind, original_id, dense_index`).
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "kind\toriginal_id\tdense_index")?;
        for (idx, orig) in self.users.iter().enumerate() {
            writeln!(w, "user\t{orig}\t{idx}")?;
        }
        for (idx, orig) in self.items.iter().enumerate() {
            writeln!(w, "item\t{orig}\t{idx}")?;
        }
        Ok(())
    }
}

fn split_fields(line: &str) -> Vec<&str> {
    line.split(|c| c == '\t' || c == ',')
        .map(str::trim)
        .filter(|f| !f.is_empty())
        .collect()
}

/// Load a TSV/CSV interaction log and re-index users and items densely.
///
/// Rows are `user item timestamp` or `user item timestamp clicked
/// post_clicked`; fields may be tab- or comma-separated. Users and items keep
/// first-appearance order in the dense index; the returned [`IdMap`] records
/// the original ids.
pub fn load_interactions<P: AsRef<Path>>(path: P, schema: &LogSchema) -> Result<(InteractionLog, IdMap)> {
    let path_str = path.as_ref().display().to_string();
    let file = std::fs::File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let expected_cols = if schema.has_labels { 5 } else { 3 };

    let mut raw: Vec<(u64, u64, i64, bool, bool)> = Vec::new();
    for (line_idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = line_idx + 1;
        if line_idx == 0 && schema.has_header {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_fields(&line);
        if fields.len() != expected_cols {
            return Err(Error::MalformedRow {
                path: path_str.clone(),
                line: line_no,
                msg: format!("expected {expected_cols} columns, found {}", fields.len()),
            });
        }
        let parse_u64 = |f: &str, name: &str| -> Result<u64> {
            f.parse::<u64>().map_err(|_| Error::MalformedRow {
                path: path_str.clone(),
                line: line_no,
                msg: format!("cannot parse {name} from {f:?}"),
            })
        };
        let user = parse_u64(fields[0], "user_id")?;
        let item = parse_u64(fields[1], "item_id")?;
        let ts = fields[2].parse::<i64>().map_err(|_| Error::MalformedRow {
            path: path_str.clone(),
            line: line_no,
            msg: format!("cannot parse timestamp from {:?}", fields[2]),
        })?;
        let (clicked, post) = if schema.has_labels {
            let c = parse_u64(fields[3], "clicked")?;
            let l = parse_u64(fields[4], "post_clicked")?;
            if c > 1 || l > 1 {
                return Err(Error::MalformedRow {
                    path: path_str.clone(),
                    line: line_no,
                    msg: "labels must be 0 or 1".to_string(),
                });
            }
            if l == 1 && c == 0 {
                return Err(Error::MalformedRow {
                    path: path_str.clone(),
                    line: line_no,
                    msg: "post_clicked=1 with clicked=0".to_string(),
                });
            }
            (c == 1, l == 1)
        } else {
            (true, false)
        };
        raw.push((user, item, ts, clicked, post));
    }
    if raw.is_empty() {
        return Err(Error::EmptyLog { path: path_str });
    }

    if schema.min_interactions > 1 {
        let min = schema.min_interactions as usize;
        let mut item_counts: HashMap<u64, usize> = HashMap::new();
        for r in &raw {
            *item_counts.entry(r.1).or_insert(0) += 1;
        }
        raw.retain(|r| item_counts[&r.1] >= min);
        let mut user_counts: HashMap<u64, usize> = HashMap::new();
        for r in &raw {
            *user_counts.entry(r.0).or_insert(0) += 1;
        }
        raw.retain(|r| user_counts[&r.0] >= min);
        if raw.is_empty() {
            return Err(Error::EmptyLog { path: path_str });
        }
    }

    let mut user_index: HashMap<u64, u32> = HashMap::new();
    let mut item_index: HashMap<u64, u32> = HashMap::new();
    let mut users: Vec<u64> = Vec::new();
    let mut items: Vec<u64> = Vec::new();
    let mut records = Vec::with_capacity(raw.len());
    for (user, item, ts, clicked, post) in raw {
        let u = *user_index.entry(user).or_insert_with(|| {
            users.push(user);
            (users.len() - 1) as u32
        });
        let i = *item_index.entry(item).or_insert_with(|| {
            items.push(item);
            (items.len() - 1) as u32
        });
        records.push(Interaction {
            user: u,
            item: i,
            timestamp: ts,
            clicked,
            post_clicked: post,
        });
    }
    let log = InteractionLog::new(records, users.len(), items.len(), schema.has_labels)?;
    Ok((log, IdMap { users, items }))
}

/// An interaction log partitioned into `T` chronological stages.
///
/// The underlying records are kept sorted by timestamp (input order breaks
/// ties); stages are contiguous slices, so concatenating them reproduces the
/// sorted log exactly.
#[derive(Debug, Clone)]
pub struct StagedInteractions {
    log: InteractionLog,
    offsets: Vec<usize>,
    boundaries: Vec<i64>,
}

impl StagedInteractions {
    pub fn num_stages(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn stage(&self, t: usize) -> &[Interaction] {
        &self.log.records[self.offsets[t]..self.offsets[t + 1]]
    }

    /// All records in chronological order.
    pub fn all(&self) -> &[Interaction] {
        &self.log.records
    }

    pub fn log(&self) -> &InteractionLog {
        &self.log
    }

    /// Timestamps of the first record of stages `1..T` (cut points between
    /// consecutive stages).
    pub fn boundaries(&self) -> &[i64] {
        &self.boundaries
    }

    /// Stage index of the record at position `idx` of the sorted log.
    pub fn stage_of(&self, idx: usize) -> usize {
        match self.offsets.binary_search(&idx) {
            Ok(t) => t.min(self.num_stages() - 1),
            Err(t) => t - 1,
        }
    }
}

/// Partition sizes under the ceil-first remainder rule: the first
/// `n mod parts` partitions get `ceil(n / parts)` entries.
fn ceil_first_sizes(n: usize, parts: usize) -> Vec<usize> {
    let base = n / parts;
    let rem = n % parts;
    (0..parts).map(|k| if k < rem { base + 1 } else { base }).collect()
}

/// Split a log into `stages` chronological stages of near-equal record count.
///
/// Records are stably sorted by timestamp, then partitioned so the first
/// `N mod T` stages hold one extra record. Every stage is non-empty.
pub fn split_stages(log: &InteractionLog, stages: usize) -> Result<StagedInteractions> {
    if stages == 0 {
        return Err(Error::InvalidParameter("stage count must be >= 1".into()));
    }
    if log.is_empty() {
        return Err(Error::EmptyLog {
            path: "<memory>".into(),
        });
    }
    if stages > log.len() {
        return Err(Error::TooManyStages {
            requested: stages,
            available: log.len(),
        });
    }
    let sorted = log.sorted_by_time();
    let sizes = ceil_first_sizes(sorted.len(), stages);
    let mut offsets = Vec::with_capacity(stages + 1);
    offsets.push(0usize);
    for s in &sizes {
        offsets.push(offsets.last().unwrap() + s);
    }
    let boundaries = offsets[1..stages]
        .iter()
        .map(|&o| sorted[o].timestamp)
        .collect();
    Ok(StagedInteractions {
        log: log.with_records(sorted),
        offsets,
        boundaries,
    })
}

/// Chronologically split a log into train/valid/test partitions.
///
/// Partition sizes follow largest-remainder apportionment of
/// `N * ratio`, with ties going to the earlier partition, so no record is
/// duplicated or dropped. Errors if any partition comes out empty.
pub fn chrono_split(
    log: &InteractionLog,
    ratios: (f64, f64, f64),
) -> Result<(InteractionLog, InteractionLog, InteractionLog)> {
    let (a, b, c) = ratios;
    if !(a > 0.0 && b > 0.0 && c > 0.0) {
        return Err(Error::InvalidParameter("split ratios must be positive".into()));
    }
    if (a + b + c - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "split ratios must sum to 1 (got {})",
            a + b + c
        )));
    }
    let n = log.len();
    let exact = [a * n as f64, b * n as f64, c * n as f64];
    let mut sizes: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut short = n - sizes.iter().sum::<usize>();
    // Largest fractional remainder first; ties to the earlier partition.
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&x, &y| {
        let rx = exact[x] - exact[x].floor();
        let ry = exact[y] - exact[y].floor();
        ry.partial_cmp(&rx).unwrap().then(x.cmp(&y))
    });
    for k in order {
        if short == 0 {
            break;
        }
        sizes[k] += 1;
        short -= 1;
    }
    let names: [&'static str; 3] = ["train", "valid", "test"];
    for (k, &s) in sizes.iter().enumerate() {
        if s == 0 {
            return Err(Error::EmptyPartition { name: names[k] });
        }
    }
    let sorted = log.sorted_by_time();
    let train = sorted[..sizes[0]].to_vec();
    let valid = sorted[sizes[0]..sizes[0] + sizes[1]].to_vec();
    let test = sorted[sizes[0] + sizes[1]..].to_vec();
    Ok((
        log.with_records(train),
        log.with_records(valid),
        log.with_records(test),
    ))
}

/// Per-stage local popularity plus per-item quality statistics.
#[derive(Debug, Clone)]
pub struct PopularityTable {
    num_items: usize,
    /// Exact per-stage popularity fractions, rows sum to 1.
    m: Vec<Vec<f64>>,
    /// Raw per-stage interaction counts.
    d: Vec<Vec<u64>>,
    totals: Vec<u64>,
    /// Quality ratio `n_post / n_click`; `None` when the item has no clicks.
    r: Vec<Option<f64>>,
    /// Min-max-normalized global click counts, entries in (0, 1].
    z: Vec<f64>,
}

impl PopularityTable {
    /// Compute the table from staged interactions.
    ///
    /// `source` selects which records count toward stage popularity. Quality
    /// ratios and the normalized popularity `z` are always derived from
    /// clicks over the whole staged log.
    pub fn from_staged(staged: &StagedInteractions, source: PopularitySource) -> Result<Self> {
        let num_items = staged.log().num_items;
        let stages = staged.num_stages();
        let mut d = vec![vec![0u64; num_items]; stages];
        for t in 0..stages {
            for rec in staged.stage(t) {
                if source.counts(rec) {
                    d[t][rec.item as usize] += 1;
                }
            }
        }
        let mut m = Vec::with_capacity(stages);
        let mut totals = Vec::with_capacity(stages);
        for row in &d {
            let total: u64 = row.iter().sum();
            totals.push(total);
            if total == 0 {
                m.push(vec![0.0; num_items]);
            } else {
                m.push(row.iter().map(|&c| c as f64 / total as f64).collect());
            }
        }

        let mut clicks = vec![0u64; num_items];
        let mut posts = vec![0u64; num_items];
        for rec in staged.all() {
            if rec.clicked {
                clicks[rec.item as usize] += 1;
            }
            if rec.post_clicked {
                posts[rec.item as usize] += 1;
            }
        }
        let r = clicks
            .iter()
            .zip(&posts)
            .map(|(&c, &l)| if c == 0 { None } else { Some(l as f64 / c as f64) })
            .collect();
        let z = minmax_normalize(&clicks.iter().map(|&c| c as f64).collect::<Vec<_>>())?;
        Ok(PopularityTable {
            num_items,
            m,
            d,
            totals,
            r,
            z,
        })
    }

    pub fn num_stages(&self) -> usize {
        self.m.len()
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    /// Exact popularity fractions of stage `t`. Errors when the stage holds
    /// no counted interactions.
    pub fn row(&self, t: usize) -> Result<&[f64]> {
        self.check_stage(t)?;
        if self.totals[t] == 0 {
            return Err(Error::EmptyStage { stage: t });
        }
        Ok(&self.m[t])
    }

    /// Raw interaction counts of stage `t`.
    pub fn counts(&self, t: usize) -> Result<&[u64]> {
        self.check_stage(t)?;
        Ok(&self.d[t])
    }

    /// Laplace-style popularity floor for stage `t`:
    /// `1 / (total interactions + num_items)`.
    pub fn epsilon(&self, t: usize) -> Result<f64> {
        self.check_stage(t)?;
        Ok(1.0 / (self.totals[t] as f64 + self.num_items as f64))
    }

    /// Popularity of item `i` in stage `t` for use as a multiplicative
    /// factor: the exact fraction, floored at [`Self::epsilon`] when zero.
    pub fn factor(&self, t: usize, item: u32) -> Result<f64> {
        self.check_stage(t)?;
        let v = self.m[t][item as usize];
        if v > 0.0 {
            Ok(v)
        } else {
            self.epsilon(t)
        }
    }

    /// Raw quality ratio of an item (`None` when it has no clicks).
    pub fn quality(&self, item: u32) -> Option<f64> {
        self.r[item as usize]
    }

    pub fn quality_ratios(&self) -> &[Option<f64>] {
        &self.r
    }

    /// Quality ratios prepared for scoring: undefined entries are treated as
    /// zero, then the vector is min-max normalized into (0, 1].
    pub fn normalized_quality(&self) -> Vec<f64> {
        let raw: Vec<f64> = self.r.iter().map(|q| q.unwrap_or(0.0)).collect();
        minmax_normalize(&raw).expect("quality ratios are finite")
    }

    /// Min-max-normalized global popularity, entries in (0, 1].
    pub fn normalized_popularity(&self) -> &[f64] {
        &self.z
    }
}

impl PopularityTable {
    fn check_stage(&self, t: usize) -> Result<()> {
        if t >= self.num_stages() {
            return Err(Error::IndexOutOfRange {
                what: "stage",
                index: t,
                bound: self.num_stages(),
            });
        }
        Ok(())
    }
}

/// Per-item quality ratios `r_i = n_post / n_click` over a labeled log.
///
/// Items with zero clicks are flagged `None` and are excluded from quality
/// grouping downstream.
pub fn compute_quality_ratio(log: &InteractionLog) -> Vec<Option<f64>> {
    let mut clicks = vec![0u64; log.num_items];
    let mut posts = vec![0u64; log.num_items];
    for rec in &log.records {
        if rec.clicked {
            clicks[rec.item as usize] += 1;
        }
        if rec.post_clicked {
            posts[rec.item as usize] += 1;
        }
    }
    clicks
        .iter()
        .zip(&posts)
        .map(|(&c, &l)| if c == 0 { None } else { Some(l as f64 / c as f64) })
        .collect()
}

/// Shifted min-max normalization onto (0, 1]:
/// `x -> (x - min + delta) / (max - min + delta)` with `delta = 1e-6`.
///
/// The shift keeps the minimum strictly positive (a zero would annihilate
/// any score it multiplies) and maps constant vectors to all ones. The map
/// is monotone.
pub fn minmax_normalize(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("min-max input is empty".into()));
    }
    for &v in values {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("min-max input {v}")));
        }
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let denom = max - min + MINMAX_DELTA;
    Ok(values.iter().map(|&v| (v - min + MINMAX_DELTA) / denom).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn rec(user: u32, item: u32, ts: i64) -> Interaction {
        Interaction {
            user,
            item,
            timestamp: ts,
            clicked: true,
            post_clicked: false,
        }
    }

    fn labeled(user: u32, item: u32, ts: i64, c: bool, l: bool) -> Interaction {
        Interaction {
            user,
            item,
            timestamp: ts,
            clicked: c,
            post_clicked: l,
        }
    }

    fn log_of(records: Vec<Interaction>, users: usize, items: usize) -> InteractionLog {
        InteractionLog::new(records, users, items, false).unwrap()
    }

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_three_row_tsv() {
        let f = write_temp("0\t0\t10\n0\t1\t20\n1\t0\t30\n");
        let (log, idmap) = load_interactions(f.path(), &LogSchema::default()).unwrap();
        assert_eq!(log.num_users, 2);
        assert_eq!(log.num_items, 2);
        assert_eq!(log.len(), 3);
        assert_eq!(idmap.users, vec![0, 1]);
        assert!(log.records.iter().all(|r| r.clicked));
    }

    #[test]
    fn load_comma_separated_and_reindex() {
        let f = write_temp("7,100,1\n7,200,2\n9,100,3\n");
        let (log, idmap) = load_interactions(f.path(), &LogSchema::default()).unwrap();
        assert_eq!(log.num_users, 2);
        assert_eq!(log.num_items, 2);
        assert_eq!(idmap.users, vec![7, 9]);
        assert_eq!(idmap.items, vec![100, 200]);
        assert_eq!(log.records[2].user, 1);
        assert_eq!(log.records[2].item, 0);
    }

    #[test]
    fn load_empty_file_errors() {
        let f = write_temp("");
        let err = load_interactions(f.path(), &LogSchema::default()).unwrap_err();
        assert!(err.to_string().contains("no records"), "{err}");
    }

    #[test]
    fn load_rejects_post_without_click() {
        let f = write_temp("0\t0\t1\t1\t0\n0\t1\t2\t0\t1\n");
        let schema = LogSchema {
            has_labels: true,
            ..LogSchema::default()
        };
        let err = load_interactions(f.path(), &schema).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":2:"), "row number missing: {msg}");
        assert!(msg.contains("post_clicked=1 with clicked=0"), "{msg}");
    }

    #[test]
    fn load_reports_malformed_line() {
        let f = write_temp("0\t0\t1\nnot\ta\trow\n");
        let err = load_interactions(f.path(), &LogSchema::default()).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");
    }

    #[test]
    fn load_header_skipped() {
        let f = write_temp("user\titem\tts\n0\t0\t1\n");
        let schema = LogSchema {
            has_header: true,
            ..LogSchema::default()
        };
        let (log, _) = load_interactions(f.path(), &schema).unwrap();
        assert_eq!(log.len(), 1);
    }

    #[test]
    fn load_min_interactions_filter() {
        // item 1 appears once and is dropped; user 2 then has nothing left.
        let f = write_temp("0\t0\t1\n1\t0\t2\n2\t1\t3\n0\t0\t4\n1\t0\t5\n");
        let schema = LogSchema {
            min_interactions: 2,
            ..LogSchema::default()
        };
        let (log, idmap) = load_interactions(f.path(), &schema).unwrap();
        assert_eq!(log.num_items, 1);
        assert_eq!(log.num_users, 2);
        assert_eq!(log.len(), 4);
        assert_eq!(idmap.items, vec![0]);
    }

    #[test]
    fn split_even() {
        let log = log_of((0..10).map(|k| rec(0, 0, k)).collect(), 1, 1);
        let staged = split_stages(&log, 2).unwrap();
        assert_eq!(staged.stage(0).len(), 5);
        assert_eq!(staged.stage(1).len(), 5);
    }

    #[test]
    fn split_single_stage_is_identity() {
        let log = log_of(vec![rec(0, 0, 3), rec(0, 0, 1), rec(0, 0, 2)], 1, 1);
        let staged = split_stages(&log, 1).unwrap();
        assert_eq!(staged.num_stages(), 1);
        let ts: Vec<i64> = staged.stage(0).iter().map(|r| r.timestamp).collect();
        assert_eq!(ts, vec![1, 2, 3]);
        assert!(staged.boundaries().is_empty());
    }

    #[test]
    fn split_ceil_first_remainder() {
        // Enumeration oracle for N=10, T=3 under the ceil-first rule.
        let log = log_of((0..10).map(|k| rec(0, 0, k)).collect(), 1, 1);
        let staged = split_stages(&log, 3).unwrap();
        let sizes: Vec<usize> = (0..3).map(|t| staged.stage(t).len()).collect();
        assert_eq!(sizes, vec![4, 3, 3]);
        assert_eq!(ceil_first_sizes(10, 3), vec![4, 3, 3]);
        // Exhaustive check of the remainder rule for small N, T.
        for n in 1..40usize {
            for t in 1..=n {
                let sizes = ceil_first_sizes(n, t);
                assert_eq!(sizes.iter().sum::<usize>(), n);
                assert!(sizes.iter().all(|&s| s > 0));
                let max = *sizes.iter().max().unwrap();
                let min = *sizes.iter().min().unwrap();
                assert!(max - min <= 1);
                assert!(sizes.windows(2).all(|w| w[0] >= w[1]));
            }
        }
    }

    #[test]
    fn split_too_many_stages() {
        let log = log_of(vec![rec(0, 0, 1)], 1, 1);
        assert!(matches!(
            split_stages(&log, 2),
            Err(Error::TooManyStages { .. })
        ));
    }

    #[test]
    fn split_concat_reproduces_sorted_input() {
        let records: Vec<Interaction> = [5i64, 3, 9, 1, 7, 2, 8]
            .iter()
            .enumerate()
            .map(|(k, &ts)| rec(k as u32 % 2, k as u32 % 3, ts))
            .collect();
        let log = log_of(records, 2, 3);
        let staged = split_stages(&log, 3).unwrap();
        let concat: Vec<Interaction> = (0..3).flat_map(|t| staged.stage(t).to_vec()).collect();
        assert_eq!(concat, log.sorted_by_time());
        assert!(staged.boundaries().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn stage_of_maps_records() {
        let log = log_of((0..10).map(|k| rec(0, 0, k)).collect(), 1, 1);
        let staged = split_stages(&log, 3).unwrap();
        assert_eq!(staged.stage_of(0), 0);
        assert_eq!(staged.stage_of(3), 0);
        assert_eq!(staged.stage_of(4), 1);
        assert_eq!(staged.stage_of(9), 2);
    }

    #[test]
    fn chrono_split_paper_ratios() {
        let log = log_of((0..10).map(|k| rec(0, 0, k)).collect(), 1, 1);
        let (train, valid, test) = chrono_split(&log, (0.8, 0.1, 0.1)).unwrap();
        assert_eq!((train.len(), valid.len(), test.len()), (8, 1, 1));
        assert!(train.records.iter().all(|r| r.timestamp < 8));
        assert_eq!(test.records[0].timestamp, 9);
    }

    #[test]
    fn chrono_split_thirds() {
        let log = log_of((0..3).map(|k| rec(0, 0, k)).collect(), 1, 1);
        let r = 1.0 / 3.0;
        let (a, b, c) = chrono_split(&log, (r, r, r)).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (1, 1, 1));
    }

    #[test]
    fn chrono_split_empty_test_partition() {
        // Largest-remainder arithmetic: 5 * (0.8, 0.1, 0.1) -> (4, 1, 0).
        let log = log_of((0..5).map(|k| rec(0, 0, k)).collect(), 1, 1);
        let err = chrono_split(&log, (0.8, 0.1, 0.1)).unwrap_err();
        assert!(err.to_string().contains("empty test partition"), "{err}");
    }

    #[test]
    fn chrono_split_bad_ratios() {
        let log = log_of((0..5).map(|k| rec(0, 0, k)).collect(), 1, 1);
        assert!(chrono_split(&log, (0.5, 0.5, 0.5)).is_err());
        assert!(chrono_split(&log, (1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn popularity_fractions() {
        // Stage counts [2, 3, 5] -> fractions [0.2, 0.3, 0.5].
        let mut records = Vec::new();
        for _ in 0..2 {
            records.push(rec(0, 0, 1));
        }
        for _ in 0..3 {
            records.push(rec(0, 1, 1));
        }
        for _ in 0..5 {
            records.push(rec(0, 2, 1));
        }
        let staged = split_stages(&log_of(records, 1, 3), 1).unwrap();
        let pop = PopularityTable::from_staged(&staged, PopularitySource::Clicks).unwrap();
        let row = pop.row(0).unwrap();
        assert_eq!(row, &[0.2, 0.3, 0.5]);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn popularity_single_item() {
        let staged = split_stages(&log_of(vec![rec(0, 0, 1); 4], 1, 1), 1).unwrap();
        let pop = PopularityTable::from_staged(&staged, PopularitySource::Clicks).unwrap();
        assert_eq!(pop.row(0).unwrap(), &[1.0]);
    }

    #[test]
    fn popularity_zero_count_floor() {
        // Counts [0, 4]: stored row is exact, factor lookup applies the floor.
        let staged = split_stages(&log_of(vec![rec(0, 1, 1); 4], 1, 2), 1).unwrap();
        let pop = PopularityTable::from_staged(&staged, PopularitySource::Clicks).unwrap();
        assert_eq!(pop.row(0).unwrap(), &[0.0, 1.0]);
        let eps = pop.epsilon(0).unwrap();
        assert_eq!(eps, 1.0 / 6.0);
        assert_eq!(pop.factor(0, 0).unwrap(), eps);
        assert_eq!(pop.factor(0, 1).unwrap(), 1.0);
        assert!(pop.factor(0, 0).unwrap() >= eps);
    }

    #[test]
    fn popularity_source_post_clicks() {
        let records = vec![
            labeled(0, 0, 1, true, true),
            labeled(0, 1, 2, true, false),
            labeled(0, 1, 3, true, false),
        ];
        let log = InteractionLog::new(records, 1, 2, true).unwrap();
        let staged = split_stages(&log, 1).unwrap();
        let clicks = PopularityTable::from_staged(&staged, PopularitySource::Clicks).unwrap();
        assert_eq!(clicks.row(0).unwrap(), &[1.0 / 3.0, 2.0 / 3.0]);
        let posts = PopularityTable::from_staged(&staged, PopularitySource::PostClicks).unwrap();
        assert_eq!(posts.row(0).unwrap(), &[1.0, 0.0]);
    }

    #[test]
    fn quality_ratio_basic() {
        let mut records = Vec::new();
        for k in 0..20 {
            records.push(labeled(0, 0, k, true, k < 5));
        }
        for k in 0..10 {
            records.push(labeled(0, 1, k, true, false));
        }
        records.push(labeled(0, 2, 0, false, false));
        let log = InteractionLog::new(records, 1, 3, true).unwrap();
        let r = compute_quality_ratio(&log);
        assert_eq!(r[0], Some(0.25));
        assert_eq!(r[1], Some(0.0));
        assert_eq!(r[2], None);
    }

    #[test]
    fn minmax_shifted_formula() {
        // Oracle: evaluate (x - min + d) / (max - min + d) directly.
        let d = MINMAX_DELTA;
        let out = minmax_normalize(&[2.0, 4.0, 6.0]).unwrap();
        let oracle: Vec<f64> = [2.0f64, 4.0, 6.0]
            .iter()
            .map(|x| (x - 2.0 + d) / (4.0 + d))
            .collect();
        assert_eq!(out, oracle);
        assert!((out[0] - 2.499999375000156e-7).abs() < 1e-18);
        assert!((out[1] - 0.5000001249999688).abs() < 1e-12);
        assert_eq!(out[2], 1.0);
    }

    #[test]
    fn minmax_constant_vector() {
        let out = minmax_normalize(&[3.0, 3.0, 3.0]).unwrap();
        assert_eq!(out, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn minmax_unit_interval() {
        let out = minmax_normalize(&[0.0, 1.0]).unwrap();
        assert!((out[0] - 9.99999000001e-7).abs() < 1e-12);
        assert_eq!(out[1], 1.0);
    }

    #[test]
    fn minmax_rejects_non_finite() {
        assert!(minmax_normalize(&[1.0, f64::NAN]).is_err());
        assert!(minmax_normalize(&[1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn idmap_tsv() {
        let map = IdMap {
            users: vec![9, 7],
            items: vec![3],
        };
        let mut out = Vec::new();
        map.write_tsv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("kind\toriginal_id\tdense_index\n"));
        assert!(text.contains("user\t9\t0\n"));
        assert!(text.contains("item\t3\t0\n"));
    }
}
