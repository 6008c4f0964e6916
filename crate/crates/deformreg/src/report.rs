//! JSON reports. Keys follow struct field order and every float is printed
//! with 9 significant digits, so equal inputs give byte-identical files.

use std::io::{self, Write};
use std::path::Path;

use deformreg_core::dvf::JacobianStats;
use deformreg_core::evaluation::{Aggregates, EvaluationReport};
use deformreg_core::multiscale::{LevelStatus, PyramidOutcome};
use deformreg_core::refinery::{RefineReport, ScoreSummary};
use deformreg_core::tps::TpsModel;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};

/// `%.9g`-style text: 9 significant digits, trailing zeros trimmed,
/// exponent form outside `1e-5 <= |v| < 1e9`. Non-finite values become `null`.
pub fn format_sig9(v: f64) -> String {
    if !v.is_finite() {
        return "null".into();
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let fixed = format!("{v:.*}", (8 - exp) as usize);
        trim_fraction(&fixed).to_string()
    } else {
        format!("{}e{exp}", trim_fraction(mantissa))
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

struct Sig9<'a>(PrettyFormatter<'a>);

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(
            fn $name<W: ?Sized + Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                self.0.$name(w $(, $arg)*)
            }
        )*
    };
}

impl Formatter for Sig9<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(format_sig9(v).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }

    delegate! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        end_object_key();
        begin_object_value();
        end_object_value();
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig9(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("report types always serialize");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Writes to `path`, or to stdout when `path` is `None`.
pub fn emit<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let text = to_json(value);
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

#[derive(Debug, Serialize)]
pub struct Scores {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl From<ScoreSummary> for Scores {
    fn from(s: ScoreSummary) -> Self {
        Self {
            min: s.min,
            median: s.median,
            max: s.max,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RefineJson {
    pub input_per_source: Vec<usize>,
    pub merged: usize,
    pub flagged_global: usize,
    pub flagged_local: usize,
    pub surviving: usize,
    pub global_skipped: bool,
    pub local_skipped: bool,
    pub global_scores: Option<Scores>,
    pub local_scores: Option<Scores>,
}

impl From<&RefineReport> for RefineJson {
    fn from(r: &RefineReport) -> Self {
        Self {
            input_per_source: r.input_per_source.clone(),
            merged: r.merged,
            flagged_global: r.flagged_global,
            flagged_local: r.flagged_local,
            surviving: r.surviving,
            global_skipped: r.global_skipped,
            local_skipped: r.local_skipped,
            global_scores: r.global_scores.map(Scores::from),
            local_scores: r.local_scores.map(Scores::from),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct JacobianJson {
    pub min: f64,
    pub mean: f64,
    pub negative_fraction: f64,
}

#[derive(Debug, Serialize)]
pub struct DvfJson {
    pub width: u32,
    pub height: u32,
    pub control_points: usize,
    pub lambda: f64,
    pub lambda_fallback: bool,
    pub subsampled: bool,
    pub jacobian: JacobianJson,
}

impl DvfJson {
    pub fn new(model: &TpsModel, width: u32, height: u32, jac: JacobianStats) -> Self {
        Self {
            width,
            height,
            control_points: model.control_points().len(),
            lambda: model.lambda(),
            lambda_fallback: model.used_fallback(),
            subsampled: model.subsampled(),
            jacobian: JacobianJson {
                min: jac.min,
                mean: jac.mean,
                negative_fraction: jac.negative_fraction,
            },
        }
    }
}

#[derive(Debug, Serialize)]
pub struct AggregatesJson {
    #[serde(rename = "Average-Average")]
    pub average_average: f64,
    #[serde(rename = "Average-Median")]
    pub average_median: f64,
    #[serde(rename = "Median-Average")]
    pub median_average: f64,
    #[serde(rename = "Median-Median")]
    pub median_median: f64,
    #[serde(rename = "Max-Average")]
    pub max_average: f64,
    #[serde(rename = "Max-Median")]
    pub max_median: f64,
}

impl From<&Aggregates> for AggregatesJson {
    fn from(a: &Aggregates) -> Self {
        Self {
            average_average: a.average_average,
            average_median: a.average_median,
            median_average: a.median_average,
            median_median: a.median_median,
            max_average: a.max_average,
            max_median: a.max_median,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct PairJson {
    pub predicted: String,
    pub truth: String,
    pub width: u32,
    pub height: u32,
    pub average: f64,
    pub median: f64,
    pub max: f64,
    pub rtre: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct EvalJson {
    pub mode: &'static str,
    pub aggregates: AggregatesJson,
    pub pairs: Vec<PairJson>,
}

impl EvalJson {
    /// `names[i]` and `sizes[i]` describe pair `i` of `report`.
    pub fn new(
        report: &EvaluationReport,
        mode: &'static str,
        names: &[(String, String)],
        sizes: &[(u32, u32)],
    ) -> Self {
        let pairs = report
            .pairs
            .iter()
            .zip(names)
            .zip(sizes)
            .map(|((p, (pred, truth)), &(width, height))| PairJson {
                predicted: pred.clone(),
                truth: truth.clone(),
                width,
                height,
                average: p.summary.average,
                median: p.summary.median,
                max: p.summary.max,
                rtre: p.rtre.clone(),
            })
            .collect();
        Self {
            mode,
            aggregates: (&report.aggregates).into(),
            pairs,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct LevelJson {
    pub level: u32,
    pub scale: f64,
    pub status: &'static str,
    pub crops: Option<usize>,
    pub returned: Option<usize>,
    pub reason: Option<String>,
    pub matches: usize,
    pub refine: Option<RefineJson>,
}

#[derive(Debug, Serialize)]
pub struct PipelineJson {
    pub levels: Vec<LevelJson>,
    pub matches: usize,
}

impl From<&PyramidOutcome> for PipelineJson {
    fn from(o: &PyramidOutcome) -> Self {
        let levels = o
            .levels
            .iter()
            .map(|l| {
                let (status, crops, returned, reason) = match &l.status {
                    LevelStatus::Matched { crops, returned } => {
                        ("matched", Some(*crops), Some(*returned), None)
                    }
                    LevelStatus::Skipped { reason, .. } => {
                        ("skipped", None, None, Some(reason.clone()))
                    }
                };
                LevelJson {
                    level: l.level,
                    scale: l.scale,
                    status,
                    crops,
                    returned,
                    reason,
                    matches: l.matches,
                    refine: l.refine.as_ref().map(RefineJson::from),
                }
            })
            .collect();
        Self {
            levels,
            matches: o.matches.len(),
        }
    }
}
