//! Match refinement pipeline: merge matcher outputs, then reject global
//! (isolation forest) and local (affine consistency) outliers in that order.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::Result;
use crate::iforest::{self, detect_outliers, ForestConfig};
use crate::local_affine::{self, filter_local, LocalAffineConfig};
use crate::model::{MatchSet, OutlierMask};

#[derive(Debug, Clone, PartialEq)]
pub struct RefineConfig {
    pub forest: ForestConfig,
    pub local: LocalAffineConfig,
    /// Pairs within this distance (pixels) of an earlier kept pair at both
    /// endpoints are dropped while merging. Zero disables deduplication.
    pub dedup_radius: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            forest: ForestConfig::default(),
            local: LocalAffineConfig::default(),
            dedup_radius: 1.0,
        }
    }
}

impl RefineConfig {
    /// Same seed for both filters.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.forest.seed = seed;
        self.local.seed = seed;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreSummary {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl ScoreSummary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            min: v[0],
            median: median_sorted(&v),
            max: v[v.len() - 1],
        })
    }
}

pub(crate) fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Counts and score summaries of one refinement run.
///
/// `surviving == merged - flagged_global - flagged_local`; the local filter
/// only sees the global filter's survivors, so the two flag sets are disjoint.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RefineReport {
    pub input_per_source: Vec<usize>,
    pub merged: usize,
    pub flagged_global: usize,
    pub flagged_local: usize,
    pub surviving: usize,
    pub global_skipped: bool,
    pub local_skipped: bool,
    pub global_scores: Option<ScoreSummary>,
    pub local_scores: Option<ScoreSummary>,
}

/// Refined matches with the `(set, index)` origin of each survivor.
#[derive(Debug, Clone, PartialEq)]
pub struct Refined {
    pub matches: MatchSet,
    pub origin: Vec<(usize, usize)>,
    pub report: RefineReport,
}

/// Concatenates `sets` in order, dropping near-duplicates of earlier kept pairs.
pub fn merge(sets: &[MatchSet], dedup_radius: f64) -> MatchSet {
    merge_indexed(sets, dedup_radius).0
}

fn merge_indexed(sets: &[MatchSet], radius: f64) -> (MatchSet, Vec<(usize, usize)>) {
    let total = sets.iter().map(MatchSet::len).sum();
    let mut out = MatchSet::with_capacity(total);
    let mut origin = Vec::with_capacity(total);
    let dedup = radius > 0.0;
    let r2 = radius * radius;
    let cell = |v: f64| libm::floor(v / radius) as i64;
    let mut grid: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();

    for (s, set) in sets.iter().enumerate() {
        for (i, (pair, tag)) in set.iter().enumerate() {
            if dedup {
                let (cx, cy) = (cell(pair.src.x), cell(pair.src.y));
                let duplicate = (cx - 1..=cx + 1).any(|gx| {
                    (cy - 1..=cy + 1).any(|gy| {
                        grid.get(&(gx, gy)).is_some_and(|kept| {
                            kept.iter().any(|&k| {
                                let q = &out.pairs()[k];
                                q.src.distance_sq(&pair.src) <= r2
                                    && q.dst.distance_sq(&pair.dst) <= r2
                            })
                        })
                    })
                });
                if duplicate {
                    continue;
                }
                grid.entry((cx, cy)).or_default().push(out.len());
            }
            out.push(*pair, tag);
            origin.push((s, i));
        }
    }
    (out, origin)
}

/// Merge, then global filter, then local filter.
///
/// A stage whose input is below its minimum size passes everything through
/// and is marked skipped in the report.
pub fn refine(sets: &[MatchSet], cfg: &RefineConfig) -> Result<(MatchSet, RefineReport)> {
    let r = refine_indexed(sets, cfg)?;
    Ok((r.matches, r.report))
}

pub fn refine_indexed(sets: &[MatchSet], cfg: &RefineConfig) -> Result<Refined> {
    cfg.forest.validate()?;
    cfg.local.validate()?;
    let (merged, origin) = merge_indexed(sets, cfg.dedup_radius);
    let mut report = RefineReport {
        input_per_source: sets.iter().map(MatchSet::len).collect(),
        merged: merged.len(),
        ..RefineReport::default()
    };

    report.global_skipped = merged.len() < iforest::MIN_MATCHES;
    let global = detect_outliers(&merged, &cfg.forest)?;
    if !report.global_skipped {
        report.global_scores = ScoreSummary::of(&global.scores);
    }
    report.flagged_global = global.flagged_count();
    let (stage1, origin1) = keep(&merged, &origin, &global);

    report.local_skipped = stage1.len() < local_affine::MIN_MATCHES;
    let local = filter_local(&stage1, &cfg.local)?;
    if !report.local_skipped {
        report.local_scores = ScoreSummary::of(&local.scores);
    }
    report.flagged_local = local.flagged_count();
    let (matches, origin) = keep(&stage1, &origin1, &local);

    report.surviving = matches.len();
    Ok(Refined {
        matches,
        origin,
        report,
    })
}

fn keep(
    set: &MatchSet,
    origin: &[(usize, usize)],
    mask: &OutlierMask,
) -> (MatchSet, Vec<(usize, usize)>) {
    let kept = set.without_flagged(&mask.flags);
    let origin = origin
        .iter()
        .zip(&mask.flags)
        .filter(|(_, &f)| !f)
        .map(|(o, _)| *o)
        .collect();
    (kept, origin)
}
