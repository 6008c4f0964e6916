//! Global-consistency filter: an isolation forest over match displacements.
//!
//! Correct matches in a registration pair share a roughly consistent
//! displacement, so a match whose `(dx, dy)` is easy to isolate with random
//! axis-aligned cuts is likely wrong.

use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{DisplacementVector, MatchSet, OutlierMask};
use crate::par::map_range;
use crate::rng::{stream, DOMAIN_FOREST};

/// Euler-Mascheroni constant as used by the harmonic-number approximation.
const EULER_GAMMA: f64 = 0.577_215_664_9;

/// Fewer matches than this and the forest is not run.
pub const MIN_MATCHES: usize = 3;

/// Displacement `dst - src` of every pair, in order.
pub fn displacements(matches: &MatchSet) -> Vec<DisplacementVector> {
    matches.pairs().iter().map(|m| m.displacement()).collect()
}

/// Average path length of an unsuccessful search in a binary search tree of `n` keys.
///
/// Normalizes path lengths into anomaly scores and accounts for the
/// unexpanded subtree below a leaf holding `n` samples.
pub fn c_factor(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let n1 = (n - 1) as f64;
            2.0 * (libm::log(n1) + EULER_GAMMA) - 2.0 * n1 / n as f64
        }
    }
}

/// `ceil(log2(psi))`, the height at which tree growth stops.
pub fn height_limit(subsample: usize) -> usize {
    if subsample <= 1 {
        0
    } else {
        subsample.next_power_of_two().trailing_zeros() as usize
    }
}

/// `2^(-expected_path / c(n))`.
pub fn anomaly_score(expected_path: f64, n: usize) -> f64 {
    libm::exp2(-expected_path / c_factor(n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attribute {
    Dx,
    Dy,
}

impl Attribute {
    pub fn of(self, s: &DisplacementVector) -> f64 {
        match self {
            Attribute::Dx => s.dx,
            Attribute::Dy => s.dy,
        }
    }

    fn other(self) -> Self {
        match self {
            Attribute::Dx => Attribute::Dy,
            Attribute::Dy => Attribute::Dx,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Internal {
        attribute: Attribute,
        split: f64,
        left: usize,
        right: usize,
    },
    External {
        size: usize,
    },
}

/// One isolation tree stored as a node arena; the root is node 0.
#[derive(Debug, Clone, PartialEq)]
pub struct IsolationTree {
    nodes: Vec<Node>,
}

impl IsolationTree {
    /// Grows a tree by random axis-aligned cuts.
    ///
    /// A node becomes external when it reaches `height_limit`, holds a single
    /// sample, or all of its samples are identical in both attributes.
    pub fn build<R: Rng + ?Sized>(
        samples: &[DisplacementVector],
        height_limit: usize,
        rng: &mut R,
    ) -> Self {
        let mut work = samples.to_vec();
        let mut nodes = Vec::new();
        grow(&mut nodes, &mut work, 0, height_limit, rng);
        Self { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Number of edges from the root to `s`'s leaf, plus `c(size)` of that leaf.
    pub fn path_length(&self, s: &DisplacementVector) -> f64 {
        let mut node = 0;
        let mut edges = 0usize;
        loop {
            match self.nodes[node] {
                Node::External { size } => return edges as f64 + c_factor(size),
                Node::Internal {
                    attribute,
                    split,
                    left,
                    right,
                } => {
                    node = if attribute.of(s) < split { left } else { right };
                    edges += 1;
                }
            }
        }
    }

    /// Longest root-to-leaf edge count.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::External { .. } => 0,
                Node::Internal { left, right, .. } => {
                    1 + walk(nodes, left).max(walk(nodes, right))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

fn grow<R: Rng + ?Sized>(
    nodes: &mut Vec<Node>,
    samples: &mut [DisplacementVector],
    depth: usize,
    limit: usize,
    rng: &mut R,
) -> usize {
    let id = nodes.len();
    nodes.push(Node::External {
        size: samples.len(),
    });
    if depth >= limit || samples.len() <= 1 {
        return id;
    }

    let first = if rng.random_bool(0.5) {
        Attribute::Dx
    } else {
        Attribute::Dy
    };
    let Some((attribute, lo, hi)) = [first, first.other()].into_iter().find_map(|a| {
        let (lo, hi) = extent(samples, a);
        (lo < hi).then_some((a, lo, hi))
    }) else {
        return id;
    };

    let split = loop {
        let v = rng.random_range(lo..hi);
        if v > lo {
            break v;
        }
    };

    let mid = partition(samples, |s| attribute.of(s) < split);
    let (l, r) = samples.split_at_mut(mid);
    let left = grow(nodes, l, depth + 1, limit, rng);
    let right = grow(nodes, r, depth + 1, limit, rng);
    nodes[id] = Node::Internal {
        attribute,
        split,
        left,
        right,
    };
    id
}

fn extent(samples: &[DisplacementVector], a: Attribute) -> (f64, f64) {
    samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
        let v = a.of(s);
        (lo.min(v), hi.max(v))
    })
}

/// In-place partition; returns the count of elements satisfying `pred`, which end up first.
fn partition<T, F: Fn(&T) -> bool>(items: &mut [T], pred: F) -> usize {
    let mut mid = 0;
    for i in 0..items.len() {
        if pred(&items[i]) {
            items.swap(i, mid);
            mid += 1;
        }
    }
    mid
}

/// How scores become flags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoreRule {
    /// Flag every score strictly above the threshold.
    Threshold(f64),
    /// Flag the highest-scoring fraction `q` of matches (ties at the cutoff are all flagged).
    Contamination(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestConfig {
    /// Requested subsample size per tree; clamped to the number of samples.
    pub subsample_size: usize,
    pub tree_count: usize,
    pub rule: ScoreRule,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            subsample_size: 256,
            tree_count: 100,
            rule: ScoreRule::Threshold(0.6),
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.subsample_size < 2 {
            return Err(Error::InvalidConfig("subsample size must be at least 2"));
        }
        if self.tree_count == 0 {
            return Err(Error::InvalidConfig("tree count must be at least 1"));
        }
        match self.rule {
            ScoreRule::Threshold(t) if !(t > 0.0 && t < 1.0) => {
                Err(Error::InvalidConfig("score threshold must lie in (0, 1)"))
            }
            ScoreRule::Contamination(q) if !(q > 0.0 && q < 1.0) => {
                Err(Error::InvalidConfig("contamination must lie in (0, 1)"))
            }
            _ => Ok(()),
        }
    }
}

/// Trained ensemble of isolation trees.
#[derive(Debug, Clone)]
pub struct IsolationForest {
    trees: Vec<IsolationTree>,
    subsample: usize,
}

impl IsolationForest {
    /// Trains on `samples`.
    ///
    /// Subsamples are drawn from the samples sorted by `(dx, dy, index)`, so
    /// the trained forest does not depend on input order. Tree `i` uses its
    /// own stream derived from `(seed, i)`.
    pub fn fit(samples: &[DisplacementVector], cfg: &ForestConfig) -> Result<Self> {
        cfg.validate()?;
        if samples.len() < 2 {
            return Err(Error::TooFewMatches {
                needed: 2,
                got: samples.len(),
            });
        }
        let canonical = canonical_order(samples);
        let psi = cfg.subsample_size.min(samples.len());
        let limit = height_limit(psi);
        let trees = map_range(cfg.tree_count, |t| {
            let mut rng = stream(cfg.seed, DOMAIN_FOREST, t as u64);
            let mut picked = index::sample(&mut rng, canonical.len(), psi).into_vec();
            picked.sort_unstable();
            let sub: Vec<DisplacementVector> = picked.iter().map(|&i| canonical[i]).collect();
            IsolationTree::build(&sub, limit, &mut rng)
        });
        Ok(Self {
            trees,
            subsample: psi,
        })
    }

    pub fn trees(&self) -> &[IsolationTree] {
        &self.trees
    }

    pub fn subsample(&self) -> usize {
        self.subsample
    }

    /// Mean path length over all trees.
    pub fn expected_path(&self, s: &DisplacementVector) -> f64 {
        let total: f64 = self.trees.iter().map(|t| t.path_length(s)).sum();
        total / self.trees.len() as f64
    }

    pub fn score(&self, s: &DisplacementVector) -> f64 {
        anomaly_score(self.expected_path(s), self.subsample)
    }
}

fn canonical_order(samples: &[DisplacementVector]) -> Vec<DisplacementVector> {
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| {
        let (sa, sb) = (&samples[a], &samples[b]);
        sa.dx
            .total_cmp(&sb.dx)
            .then(sa.dy.total_cmp(&sb.dy))
            .then(a.cmp(&b))
    });
    order.into_iter().map(|i| samples[i]).collect()
}

/// Scores every match's displacement and flags the anomalous ones.
///
/// Sets with fewer than three matches are returned unflagged with zero scores.
pub fn detect_outliers(matches: &MatchSet, cfg: &ForestConfig) -> Result<OutlierMask> {
    cfg.validate()?;
    if matches.len() < MIN_MATCHES {
        return Ok(OutlierMask::clean(matches.len()));
    }
    let samples = displacements(matches);
    let forest = IsolationForest::fit(&samples, cfg)?;
    let scores = map_range(samples.len(), |i| forest.score(&samples[i]));
    let flags = apply_rule(&scores, cfg.rule);
    Ok(OutlierMask { flags, scores })
}

fn apply_rule(scores: &[f64], rule: ScoreRule) -> Vec<bool> {
    match rule {
        ScoreRule::Threshold(t) => scores.iter().map(|&s| s > t).collect(),
        ScoreRule::Contamination(q) => {
            let k = libm::floor(q * scores.len() as f64) as usize;
            if k == 0 {
                return alloc::vec![false; scores.len()];
            }
            let mut sorted = scores.to_vec();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
            let cutoff = sorted[k - 1];
            scores.iter().map(|&s| s >= cutoff).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MatchPair, Point2};
    use crate::rng::StageRng;
    use rand::SeedableRng;

    fn dv(dx: f64, dy: f64) -> DisplacementVector {
        DisplacementVector::new(dx, dy)
    }

    #[test]
    fn displacements_in_order() {
        let mut m = MatchSet::new();
        m.push(
            MatchPair::new(Point2::new(10.0, 20.0), Point2::new(12.0, 21.0)),
            "a",
        );
        m.push(
            MatchPair::new(Point2::new(5.0, 5.0), Point2::new(5.0, 5.0)),
            "a",
        );
        m.push(
            MatchPair::new(Point2::new(0.0, 0.0), Point2::new(-1.0, 3.5)),
            "a",
        );
        assert_eq!(
            displacements(&m),
            alloc::vec![dv(2.0, 1.0), dv(0.0, 0.0), dv(-1.0, 3.5)]
        );
    }

    #[test]
    fn c_factor_small_cases() {
        assert_eq!(c_factor(0), 0.0);
        assert_eq!(c_factor(1), 0.0);
        assert_eq!(c_factor(2), 1.0);
    }

    #[test]
    fn height_limit_is_ceil_log2() {
        assert_eq!(height_limit(2), 1);
        assert_eq!(height_limit(3), 2);
        assert_eq!(height_limit(210), 8);
        assert_eq!(height_limit(256), 8);
        assert_eq!(height_limit(257), 9);
    }

    #[test]
    fn anomaly_score_reference_points() {
        let n = 256;
        assert_eq!(anomaly_score(c_factor(n), n), 0.5);
        assert_eq!(anomaly_score(0.0, n), 1.0);
        assert_eq!(anomaly_score(2.0 * c_factor(n), n), 0.25);
    }

    #[test]
    fn single_sample_tree_is_one_leaf() {
        let mut rng = StageRng::seed_from_u64(1);
        let t = IsolationTree::build(&[dv(1.0, 2.0)], 8, &mut rng);
        assert_eq!(t.nodes(), &[Node::External { size: 1 }]);
        assert_eq!(t.path_length(&dv(100.0, 100.0)), 0.0);
    }

    #[test]
    fn identical_samples_stop_immediately() {
        let mut rng = StageRng::seed_from_u64(1);
        let t = IsolationTree::build(&[dv(3.0, 3.0); 5], 8, &mut rng);
        assert_eq!(t.nodes(), &[Node::External { size: 5 }]);
    }

    #[test]
    fn one_split_two_singletons() {
        let t = IsolationTree {
            nodes: alloc::vec![
                Node::Internal {
                    attribute: Attribute::Dx,
                    split: 0.5,
                    left: 1,
                    right: 2,
                },
                Node::External { size: 1 },
                Node::External { size: 1 },
            ],
        };
        assert_eq!(t.path_length(&dv(0.0, 0.0)), 1.0);
        assert_eq!(t.path_length(&dv(1.0, 0.0)), 1.0);
    }

    #[test]
    fn depth_limited_leaf_adds_c_of_size() {
        // chain of three internal nodes ending in a leaf holding 4 samples
        let nodes = alloc::vec![
            Node::Internal { attribute: Attribute::Dy, split: 10.0, left: 1, right: 2 },
            Node::Internal { attribute: Attribute::Dy, split: 10.0, left: 3, right: 4 },
            Node::External { size: 1 },
            Node::Internal { attribute: Attribute::Dy, split: 10.0, left: 5, right: 6 },
            Node::External { size: 1 },
            Node::External { size: 4 },
            Node::External { size: 1 },
        ];
        let t = IsolationTree { nodes };
        // c(4) = 2 (ln 3 + gamma) - 2 * 3 / 4, evaluated by hand
        let c4 = 2.0 * (1.098_612_288_668_109_8 + 0.577_215_664_9) - 1.5;
        assert!((t.path_length(&dv(0.0, 0.0)) - (3.0 + c4)).abs() < 1e-12);
    }

    #[test]
    fn split_values_within_routed_extent() {
        let samples: alloc::vec::Vec<_> = (0..40)
            .map(|i| dv((i * 7 % 13) as f64, (i * 3 % 11) as f64 * 0.5))
            .collect();
        let mut rng = StageRng::seed_from_u64(9);
        let t = IsolationTree::build(&samples, 6, &mut rng);
        assert!(t.depth() <= 6);
        check_extent(&t, 0, &samples);
        let leaves: usize = t
            .nodes()
            .iter()
            .map(|n| match n {
                Node::External { size } => *size,
                _ => 0,
            })
            .sum();
        assert_eq!(leaves, samples.len());
    }

    fn check_extent(t: &IsolationTree, node: usize, routed: &[DisplacementVector]) {
        if let Node::Internal {
            attribute,
            split,
            left,
            right,
        } = t.nodes()[node]
        {
            let (lo, hi) = extent(routed, attribute);
            assert!(lo < split && split < hi);
            let (l, r): (alloc::vec::Vec<_>, alloc::vec::Vec<_>) =
                routed.iter().partition(|s| attribute.of(s) < split);
            check_extent(t, left, &l);
            check_extent(t, right, &r);
        }
    }

    #[test]
    fn tree_is_deterministic_for_seed() {
        let samples = [
            dv(0.0, 1.0),
            dv(2.0, -1.0),
            dv(3.5, 0.0),
            dv(-4.0, 2.0),
            dv(1.0, 1.0),
            dv(8.0, 8.0),
            dv(0.5, 0.25),
            dv(-2.0, -3.0),
        ];
        let a = IsolationTree::build(&samples, 3, &mut StageRng::seed_from_u64(77));
        let b = IsolationTree::build(&samples, 3, &mut StageRng::seed_from_u64(77));
        assert_eq!(a, b);
    }

    #[test]
    fn two_matches_skip() {
        let mut m = MatchSet::new();
        m.push(MatchPair::default(), "a");
        m.push(
            MatchPair::new(Point2::new(0.0, 0.0), Point2::new(500.0, 0.0)),
            "a",
        );
        let mask = detect_outliers(&m, &ForestConfig::default()).unwrap();
        assert_eq!(mask.flags, alloc::vec![false, false]);
    }

    #[test]
    fn identical_displacements_not_flagged() {
        let pairs = (0..50)
            .map(|i| {
                let p = Point2::new(i as f64, 2.0 * i as f64);
                MatchPair::new(p, Point2::new(p.x + 4.0, p.y - 1.0))
            })
            .collect();
        let m = MatchSet::from_pairs(pairs, "a");
        let mask = detect_outliers(&m, &ForestConfig::default()).unwrap();
        assert_eq!(mask.flagged_count(), 0);
        // every tree is a single leaf of size psi: E[h] = c(psi), score 0.5
        assert!(mask.scores.iter().all(|&s| (s - 0.5).abs() < 1e-12));
    }

    #[test]
    fn contamination_rule_flags_top_fraction() {
        let scores = [0.1, 0.9, 0.5, 0.7, 0.3];
        assert_eq!(
            apply_rule(&scores, ScoreRule::Contamination(0.4)),
            alloc::vec![false, true, false, true, false]
        );
        assert_eq!(
            apply_rule(&scores, ScoreRule::Contamination(0.1)),
            alloc::vec![false; 5]
        );
    }

    #[test]
    fn config_validation() {
        let mut cfg = ForestConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.rule = ScoreRule::Threshold(1.0);
        assert!(cfg.validate().is_err());
        cfg = ForestConfig {
            tree_count: 0,
            ..ForestConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg = ForestConfig {
            subsample_size: 1,
            ..ForestConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
