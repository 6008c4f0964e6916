//! Relative target registration error and its cross-pair aggregates.
//!
//! Aggregate names read `<outer>-<inner>`: the inner statistic is taken over
//! the landmarks of each pair, the outer one over pairs. `Average-Median` is
//! the average over pairs of each pair's median rTRE.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{DvfRaster, ImageMeta, LandmarkSet, Point2};
use crate::refinery::median_sorted;

/// Landmark error measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorMode {
    /// `|p - t| / sqrt(w^2 + h^2)`.
    #[default]
    Euclidean,
    /// `|p - t|^2 / (w^2 + h^2)`.
    Squared,
}

pub fn rtre(predicted: Point2, truth: Point2, meta: ImageMeta) -> f64 {
    predicted.distance(&truth) / meta.diagonal()
}

pub fn rtre_with(predicted: Point2, truth: Point2, meta: ImageMeta, mode: ErrorMode) -> f64 {
    match mode {
        ErrorMode::Euclidean => rtre(predicted, truth, meta),
        ErrorMode::Squared => {
            let d2 = meta.diagonal() * meta.diagonal();
            predicted.distance_sq(&truth) / d2
        }
    }
}

/// Moves each landmark by the field sampled (bilinearly, border-clamped) at it.
pub fn transfer_landmarks(landmarks: &LandmarkSet, field: &DvfRaster) -> LandmarkSet {
    let moved = landmarks
        .points()
        .iter()
        .map(|&p| p + field.sample(p))
        .collect();
    LandmarkSet::new(moved).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub average: f64,
    pub median: f64,
    pub max: f64,
}

impl Summary {
    /// `None` for an empty list.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            average: values.iter().sum::<f64>() / values.len() as f64,
            median: median_sorted(&v),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairEvaluation {
    pub rtre: Vec<f64>,
    pub summary: Summary,
}

/// The six cross-pair aggregates, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregates {
    pub average_average: f64,
    pub average_median: f64,
    pub median_average: f64,
    pub median_median: f64,
    pub max_average: f64,
    pub max_median: f64,
}

impl Aggregates {
    pub const NAMES: [&'static str; 6] = [
        "Average-Average",
        "Average-Median",
        "Median-Average",
        "Median-Median",
        "Max-Average",
        "Max-Median",
    ];

    pub fn values(&self) -> [f64; 6] {
        [
            self.average_average,
            self.average_median,
            self.median_average,
            self.median_median,
            self.max_average,
            self.max_median,
        ]
    }

    pub fn named(&self) -> [(&'static str, f64); 6] {
        let v = self.values();
        core::array::from_fn(|i| (Self::NAMES[i], v[i]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub pairs: Vec<PairEvaluation>,
    pub aggregates: Aggregates,
}

/// One image pair: predicted and ground-truth landmarks (index-aligned) and
/// the image size used for normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPair {
    pub predicted: LandmarkSet,
    pub truth: LandmarkSet,
    pub meta: ImageMeta,
}

pub fn evaluate(pairs: &[EvalPair]) -> Result<EvaluationReport> {
    evaluate_with(pairs, ErrorMode::Euclidean)
}

pub fn evaluate_with(pairs: &[EvalPair], mode: ErrorMode) -> Result<EvaluationReport> {
    if pairs.is_empty() {
        return Err(Error::NoPairs);
    }
    let mut out = Vec::with_capacity(pairs.len());
    for (i, p) in pairs.iter().enumerate() {
        if p.predicted.len() != p.truth.len() {
            return Err(Error::LengthMismatch {
                pair: i,
                predicted: p.predicted.len(),
                truth: p.truth.len(),
            });
        }
        let rtre: Vec<f64> = p
            .predicted
            .points()
            .iter()
            .zip(p.truth.points())
            .map(|(&a, &b)| rtre_with(a, b, p.meta, mode))
            .collect();
        let summary = Summary::of(&rtre).ok_or(Error::NoLandmarks { pair: i })?;
        out.push(PairEvaluation { rtre, summary });
    }
    let outer = |f: fn(&Summary) -> f64| {
        let v: Vec<f64> = out.iter().map(|p| f(&p.summary)).collect();
        Summary::of(&v).expect("at least one pair")
    };
    let avg = outer(|s| s.average);
    let med = outer(|s| s.median);
    Ok(EvaluationReport {
        aggregates: Aggregates {
            average_average: avg.average,
            average_median: med.average,
            median_average: avg.median,
            median_median: med.median,
            max_average: avg.max,
            max_median: med.max,
        },
        pairs: out,
    })
}
