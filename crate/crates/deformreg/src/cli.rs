//! `deformreg` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 matcher failure.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use deformreg_core::dvf::{jacobian_stats, rasterize};
use deformreg_core::evaluation::{evaluate_with, transfer_landmarks, ErrorMode, EvalPair};
use deformreg_core::iforest::{ForestConfig, ScoreRule};
use deformreg_core::local_affine::{DeviationThreshold, LocalAffineConfig};
use deformreg_core::multiscale::{run_pyramid, LevelStatus, PyramidConfig, CROP_SIZE};
use deformreg_core::refinery::{refine, RefineConfig};
use deformreg_core::synth::{
    displace_landmarks, make_field, make_landmarks, make_matches, FieldKind, MatchSpec,
    SyntheticField, Texture,
};
use deformreg_core::tps::tps_fit;
use deformreg_core::warp::{checkerboard, overlay_landmarks, warp};
use deformreg_core::ImageMeta;

use crate::error::{Error, Result};
use crate::formats::{
    read_dvf, read_image, read_landmarks_csv, read_match_csv, write_dvf, write_image,
    write_labels_csv, write_landmarks_csv, write_match_csv,
};
use crate::matcher::CommandMatcher;
use crate::report::{emit, DvfJson, EvalJson, PipelineJson, RefineJson};

pub const THREADS_ENV: &str = "DEFORMREG_THREADS";

#[derive(Debug, Parser)]
#[command(name = "deformreg", version, about = "Deformable registration from sparse matches")]
#[command(arg_required_else_help = true)]
struct Cli {
    /// Worker threads; 1 runs everything sequentially. Results do not depend on it.
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Merge match files and drop global and local outliers.
    Refine(RefineArgs),
    /// Interpolate matches into a dense displacement field (DVF1).
    Dvf(DvfArgs),
    /// Resample a moving image through a displacement field.
    Warp(WarpArgs),
    /// Tile two images into a checkerboard composite.
    Checkerboard(CheckerboardArgs),
    /// Score predicted landmarks against ground truth (rTRE).
    Eval(EvalArgs),
    /// Coarse-to-fine matching with an external matcher, then refinement.
    Pipeline(PipelineArgs),
    /// Generate synthetic fields, matches and image pairs.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Debug, Args)]
struct FilterArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Isolation trees.
    #[arg(long, default_value_t = 100)]
    if_trees: usize,
    /// Subsample size per isolation tree.
    #[arg(long, default_value_t = 256)]
    if_subsample: usize,
    /// Anomaly score above which a match is dropped.
    #[arg(long, default_value_t = 0.6)]
    if_threshold: f64,
    /// Drop this fraction of highest-scoring matches instead of thresholding.
    #[arg(long, conflicts_with = "if_threshold")]
    if_contamination: Option<f64>,
    /// Local sampling rounds.
    #[arg(long, default_value_t = 10)]
    la_rounds: usize,
    /// Fraction of matches sampled as triangle vertices per round.
    #[arg(long, default_value_t = 0.25)]
    la_fraction: f64,
    /// Mean local deviation (pixels) above which a match is dropped
    /// [default: 2% of the image diagonal].
    #[arg(long)]
    la_threshold: Option<f64>,
    /// Pairs this close (pixels, both ends) to an earlier pair are merged; 0 keeps all.
    #[arg(long, default_value_t = 1.0)]
    dedup_radius: f64,
}

impl FilterArgs {
    fn config(&self, image: Option<ImageMeta>) -> RefineConfig {
        let rule = match self.if_contamination {
            Some(q) => ScoreRule::Contamination(q),
            None => ScoreRule::Threshold(self.if_threshold),
        };
        let threshold = match self.la_threshold {
            Some(px) => DeviationThreshold::Pixels(px),
            None => LocalAffineConfig::default().threshold,
        };
        RefineConfig {
            forest: ForestConfig {
                subsample_size: self.if_subsample,
                tree_count: self.if_trees,
                rule,
                seed: self.seed,
            },
            local: LocalAffineConfig {
                rounds: self.la_rounds,
                sample_fraction: self.la_fraction,
                threshold,
                image,
                seed: self.seed,
            },
            dedup_radius: self.dedup_radius,
        }
    }
}

#[derive(Debug, Args)]
struct RefineArgs {
    /// Match CSV; repeat to merge several matchers' output (earlier files win duplicates).
    #[arg(long = "matches", required = true)]
    matches: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// JSON report path [default: stdout].
    #[arg(long)]
    report: Option<PathBuf>,
    /// Moving image width; with --height, fixes the sampling grid and diagonal.
    #[arg(long, requires = "height")]
    width: Option<u32>,
    #[arg(long, requires = "width")]
    height: Option<u32>,
    #[command(flatten)]
    filter: FilterArgs,
}

#[derive(Debug, Args)]
struct DvfArgs {
    #[arg(long)]
    matches: PathBuf,
    /// Fixed image width.
    #[arg(long)]
    width: u32,
    #[arg(long)]
    height: u32,
    /// Spline regularization (0 interpolates exactly).
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long)]
    out: PathBuf,
    /// JSON report with the Jacobian-determinant summary [default: stdout].
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct WarpArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    dvf: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Fixed-image landmarks to carry into the moving frame.
    #[arg(long, requires = "landmarks_out")]
    landmarks: Option<PathBuf>,
    /// Where to write the transferred landmarks.
    #[arg(long, requires = "landmarks")]
    landmarks_out: Option<PathBuf>,
    /// Moving-image ground truth; with --overlay, drawn in blue next to the
    /// transferred landmarks in red.
    #[arg(long, requires_all = ["landmarks", "overlay"])]
    truth: Option<PathBuf>,
    #[arg(long, requires = "truth")]
    overlay: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CheckerboardArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value_t = 64)]
    tile: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Predicted landmarks; repeat once per image pair.
    #[arg(long = "pred", required = true)]
    pred: Vec<PathBuf>,
    /// Ground-truth landmarks, in the same order as --pred.
    #[arg(long = "truth", required = true)]
    truth: Vec<PathBuf>,
    /// Image width per pair, or once for all pairs.
    #[arg(long = "width", required = true)]
    width: Vec<u32>,
    #[arg(long = "height", required = true)]
    height: Vec<u32>,
    /// Use squared distance instead of Euclidean distance.
    #[arg(long)]
    squared: bool,
    /// JSON report path [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    #[arg(long)]
    moving: PathBuf,
    #[arg(long)]
    fixed: PathBuf,
    /// Matcher command; `{a}`, `{b}` and `{out}` become the moving crop,
    /// fixed crop and output CSV paths.
    #[arg(long)]
    matcher: String,
    #[arg(long)]
    out: PathBuf,
    /// JSON report path [default: stdout].
    #[arg(long)]
    report: Option<PathBuf>,
    /// Crop side length in pixels.
    #[arg(long, default_value_t = CROP_SIZE)]
    crop_size: u32,
    /// Stop after this many levels [default: until native resolution].
    #[arg(long)]
    max_levels: Option<u32>,
    #[command(flatten)]
    filter: FilterArgs,
}

#[derive(Debug, Subcommand)]
enum SynthCommand {
    /// Dense field (DVF1).
    Field {
        #[command(flatten)]
        common: SynthCommon,
        #[arg(long)]
        out: PathBuf,
    },
    /// Match CSV drawn from the field, with outlier labels.
    Matches {
        #[command(flatten)]
        common: SynthCommon,
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        out: PathBuf,
        /// `index,outlier` CSV.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Moving and fixed images, field, landmarks, matches and labels in one directory.
    Pair {
        #[command(flatten)]
        common: SynthCommon,
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=3))]
        channels: u8,
        #[arg(long, default_value_t = 50)]
        landmarks: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Translation,
    Affine,
    Sinusoidal,
    GaussianBump,
}

impl From<Kind> for FieldKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Translation => FieldKind::Translation,
            Kind::Affine => FieldKind::Affine,
            Kind::Sinusoidal => FieldKind::Sinusoidal,
            Kind::GaussianBump => FieldKind::GaussianBump,
        }
    }
}

#[derive(Debug, Args)]
struct SynthCommon {
    #[arg(long)]
    width: u32,
    #[arg(long)]
    height: u32,
    #[arg(long, value_enum, default_value_t = Kind::Sinusoidal)]
    kind: Kind,
    /// Peak displacement in pixels.
    #[arg(long, default_value_t = 10.0)]
    magnitude: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SynthCommon {
    fn build(&self) -> Result<(ImageMeta, SyntheticField)> {
        let meta = image_meta(self.width, self.height)?;
        if !self.magnitude.is_finite() {
            return Err(Error::Usage("--magnitude must be finite".into()));
        }
        let field = SyntheticField::random(self.kind.into(), meta, self.magnitude, self.seed);
        Ok((meta, field))
    }
}

#[derive(Debug, Args)]
struct SpecArgs {
    #[arg(long, default_value_t = 500)]
    count: usize,
    /// Gaussian noise on match positions (pixels).
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long, default_value_t = 0.05)]
    outlier_fraction: f64,
    /// Minimum extra offset of an outlier (pixels).
    #[arg(long, default_value_t = 50.0)]
    outlier_magnitude: f64,
}

impl SpecArgs {
    fn spec(&self) -> MatchSpec {
        MatchSpec {
            count: self.count,
            noise_sigma: self.noise,
            outlier_fraction: self.outlier_fraction,
            outlier_magnitude: self.outlier_magnitude,
        }
    }
}

fn image_meta(width: u32, height: u32) -> Result<ImageMeta> {
    ImageMeta::new(width, height).map_err(|_| Error::Usage("--width and --height must be >= 1".into()))
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.threads {
        Some(0) => Err(Error::Usage("--threads must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Usage(format!("cannot start {n} threads: {e}")))?
            .install(|| dispatch(cli.command)),
        None => dispatch(cli.command),
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Refine(a) => cmd_refine(a),
        Command::Dvf(a) => cmd_dvf(a),
        Command::Warp(a) => cmd_warp(a),
        Command::Checkerboard(a) => cmd_checkerboard(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Pipeline(a) => cmd_pipeline(a),
        Command::Synth(s) => cmd_synth(s),
    }
}

fn config_error(e: deformreg_core::Error) -> Error {
    match e {
        deformreg_core::Error::InvalidConfig(msg) => Error::Usage(msg.to_string()),
        other => Error::core("configuration", other),
    }
}

fn cmd_refine(a: RefineArgs) -> Result<()> {
    let image = match (a.width, a.height) {
        (Some(w), Some(h)) => Some(image_meta(w, h)?),
        _ => None,
    };
    let cfg = a.filter.config(image);
    cfg.forest.validate().map_err(config_error)?;
    cfg.local.validate().map_err(config_error)?;
    let sets = a
        .matches
        .iter()
        .map(|p| read_match_csv(p))
        .collect::<Result<Vec<_>>>()?;
    let (refined, report) = refine(&sets, &cfg).map_err(|e| Error::core("refine", e))?;
    log::info!("kept {} of {} merged matches", report.surviving, report.merged);
    write_match_csv(&refined, &a.out)?;
    emit(&RefineJson::from(&report), a.report.as_deref())
}

fn cmd_dvf(a: DvfArgs) -> Result<()> {
    let meta = image_meta(a.width, a.height)?;
    if !(a.lambda >= 0.0 && a.lambda.is_finite()) {
        return Err(Error::Usage("--lambda must be finite and >= 0".into()));
    }
    let matches = read_match_csv(&a.matches)?;
    let model = tps_fit(&matches, a.lambda).map_err(|e| Error::core(a.matches.display().to_string(), e))?;
    if model.subsampled() {
        log::warn!(
            "{} control points exceed the limit; fitted an evenly spaced subset",
            matches.len()
        );
    }
    if model.used_fallback() {
        log::warn!("ill-conditioned system; refitted with lambda = {}", model.lambda());
    }
    let raster = rasterize(&model, meta);
    write_dvf(&raster, &a.out)?;
    let jac = jacobian_stats(&raster);
    if jac.negative_fraction > 0.0 {
        log::warn!(
            "field folds over at {:.3}% of pixels",
            100.0 * jac.negative_fraction
        );
    }
    emit(&DvfJson::new(&model, a.width, a.height, jac), a.report.as_deref())
}

fn cmd_warp(a: WarpArgs) -> Result<()> {
    let img = read_image(&a.image)?;
    let field = read_dvf(&a.dvf)?;
    let out = warp(&img, &field).map_err(|e| Error::core("warp", e))?;
    write_image(&out, &a.out)?;
    if let (Some(src), Some(dst)) = (&a.landmarks, &a.landmarks_out) {
        let predicted = transfer_landmarks(&read_landmarks_csv(src)?, &field);
        write_landmarks_csv(&predicted, dst)?;
        if let (Some(truth), Some(path)) = (&a.truth, &a.overlay) {
            let truth = read_landmarks_csv(truth)?;
            write_image(&overlay_landmarks(&img, &predicted, &truth), path)?;
        }
    }
    Ok(())
}

fn cmd_checkerboard(a: CheckerboardArgs) -> Result<()> {
    if a.tile == 0 {
        return Err(Error::Usage("--tile must be >= 1".into()));
    }
    let (x, y) = (read_image(&a.a)?, read_image(&a.b)?);
    let out = checkerboard(&x, &y, a.tile).map_err(|e| {
        Error::core(format!("{} vs {}", a.a.display(), a.b.display()), e)
    })?;
    write_image(&out, &a.out)
}

fn per_pair(values: &[u32], n: usize, flag: &str) -> Result<Vec<u32>> {
    match values.len() {
        1 => Ok(vec![values[0]; n]),
        k if k == n => Ok(values.to_vec()),
        k => Err(Error::Usage(format!(
            "{flag} given {k} times; expected once or once per pair ({n})"
        ))),
    }
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let n = a.pred.len();
    if a.truth.len() != n {
        return Err(Error::Usage(format!(
            "{n} --pred files but {} --truth files",
            a.truth.len()
        )));
    }
    let widths = per_pair(&a.width, n, "--width")?;
    let heights = per_pair(&a.height, n, "--height")?;
    let mut pairs = Vec::with_capacity(n);
    for i in 0..n {
        pairs.push(EvalPair {
            predicted: read_landmarks_csv(&a.pred[i])?,
            truth: read_landmarks_csv(&a.truth[i])?,
            meta: image_meta(widths[i], heights[i])?,
        });
    }
    let (mode, name) = if a.squared {
        (ErrorMode::Squared, "squared")
    } else {
        (ErrorMode::Euclidean, "euclidean")
    };
    let report = evaluate_with(&pairs, mode).map_err(|e| Error::core("eval", e))?;
    let names: Vec<(String, String)> = a
        .pred
        .iter()
        .zip(&a.truth)
        .map(|(p, t)| (p.display().to_string(), t.display().to_string()))
        .collect();
    let sizes: Vec<(u32, u32)> = widths.into_iter().zip(heights).collect();
    emit(&EvalJson::new(&report, name, &names, &sizes), a.out.as_deref())
}

fn cmd_pipeline(a: PipelineArgs) -> Result<()> {
    let moving = read_image(&a.moving)?;
    let fixed = read_image(&a.fixed)?;
    if a.crop_size == 0 {
        return Err(Error::Usage("--crop-size must be >= 1".into()));
    }
    let refine_cfg = a.filter.config(Some(moving.meta()));
    refine_cfg.forest.validate().map_err(config_error)?;
    refine_cfg.local.validate().map_err(config_error)?;
    let cfg = PyramidConfig {
        refine: refine_cfg,
        crop_size: a.crop_size,
        max_levels: a.max_levels,
        margin: a.crop_size as f64 / 8.0,
    };
    let mut matcher = CommandMatcher::new(&a.matcher)?;
    let outcome = run_pyramid(&moving, &fixed, &mut matcher, &cfg)
        .map_err(|e| Error::core("pipeline", e))?;
    for l in &outcome.levels {
        if let LevelStatus::Skipped { reason, .. } = &l.status {
            log::warn!("level {} skipped: {reason}", l.level);
        }
    }
    write_match_csv(&outcome.matches, &a.out)?;
    emit(&PipelineJson::from(&outcome), a.report.as_deref())
}

fn cmd_synth(s: SynthCommand) -> Result<()> {
    match s {
        SynthCommand::Field { common, out } => {
            let (meta, field) = common.build()?;
            let raster = make_field(meta, &field).map_err(|e| Error::core("synth field", e))?;
            write_dvf(&raster, &out)
        }
        SynthCommand::Matches {
            common,
            spec,
            out,
            labels,
        } => {
            let (meta, field) = common.build()?;
            let (set, truth) = make_matches(&field, meta, &spec.spec(), common.seed)
                .map_err(config_error)?;
            write_match_csv(&set, &out)?;
            if let Some(path) = labels {
                write_labels_csv(&truth, &path)?;
            }
            Ok(())
        }
        SynthCommand::Pair {
            common,
            spec,
            channels,
            landmarks,
            out_dir,
        } => {
            if channels == 2 {
                return Err(Error::Usage("--channels must be 1 or 3".into()));
            }
            let (meta, field) = common.build()?;
            std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
            let file = |name: &str| -> PathBuf { out_dir.join(name) };
            let texture = Texture::new(common.seed);
            let moving = texture.render(meta, channels, None).map_err(config_error)?;
            let fixed = texture
                .render(meta, channels, Some(&field))
                .map_err(config_error)?;
            write_image(&moving, &file("moving.png"))?;
            write_image(&fixed, &file("fixed.png"))?;
            let raster = make_field(meta, &field).map_err(|e| Error::core("synth pair", e))?;
            write_dvf(&raster, &file("field.dvf"))?;
            let margin = 0.05 * meta.width.min(meta.height) as f64;
            let fixed_lm = make_landmarks(meta, landmarks, margin, common.seed);
            write_landmarks_csv(&fixed_lm, &file("fixed_landmarks.csv"))?;
            write_landmarks_csv(
                &displace_landmarks(&fixed_lm, &field),
                &file("moving_landmarks.csv"),
            )?;
            let (set, truth) = make_matches(&field, meta, &spec.spec(), common.seed)
                .map_err(config_error)?;
            write_match_csv(&set, &file("matches.csv"))?;
            write_labels_csv(&truth, &file("labels.csv"))
        }
    }
}
