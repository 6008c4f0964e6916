//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

mod common;

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use deformreg_core::affine::AffineTransform2D;
use deformreg_core::evaluation::{evaluate, rtre, EvalPair};
use deformreg_core::iforest::{anomaly_score, c_factor, detect_outliers, ForestConfig};
use deformreg_core::local_affine::{filter_local, LocalAffineConfig};
use deformreg_core::multiscale::{
    run_pyramid, to_global, to_local, CropRequest, CropWindow, Matcher, PyramidConfig,
};
use deformreg_core::refinery::{refine_indexed, RefineConfig};
use deformreg_core::rng::stream;
use deformreg_core::synth::{make_matches, MatchSpec, SyntheticField, Texture};
use deformreg_core::tps::tps_fit;
use deformreg_core::warp::warp;
use deformreg_core::{
    DisplacementVector, DvfRaster, ImageBuffer, ImageMeta, LandmarkSet, MatchPair, MatchSet,
    Point2,
};
use rand::Rng;
use rand_distr::{Distribution, Normal};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- iForest

fn iforest_math() -> Outcome {
    ensure(c_factor(2) == 1.0, || format!("c(2) = {}", c_factor(2)))?;
    // 2 (ln 255 + Euler-Mascheroni) - 2 * 255 / 256, evaluated with std
    let gamma = 0.577_215_664_901_532_9_f64;
    let closed = 2.0 * (255f64.ln() + gamma) - 2.0 * 255.0 / 256.0;
    let c256 = c_factor(256);
    ensure((c256 - closed).abs() <= 1e-6, || format!("c(256) = {c256}, closed form {closed}"))?;
    ensure((c256 - 10.244_770_92).abs() <= 1e-6, || format!("c(256) = {c256}"))?;
    for n in [2, 3, 10, 256, 4096] {
        let s = anomaly_score(c_factor(n), n);
        ensure(s == 0.5, || format!("s(c({n}), {n}) = {s}"))?;
    }
    Ok(format!("c(256) = {c256:.9}"))
}

/// 200 displacements ~ N((10, 10), 1) plus 10 at distance 100..200 from (10, 10).
fn displacement_fixture(seed: u64) -> (MatchSet, Vec<bool>) {
    let mut rng = stream(seed, 0xacc, 1);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut set = MatchSet::new();
    let mut labels = Vec::new();
    for i in 0..210 {
        let src = Point2::new(rng.random_range(0.0..1000.0), rng.random_range(0.0..1000.0));
        let outlier = i >= 200;
        let (dx, dy) = if outlier {
            let r = rng.random_range(100.0..200.0);
            let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            (10.0 + r * a.cos(), 10.0 + r * a.sin())
        } else {
            (10.0 + noise.sample(&mut rng), 10.0 + noise.sample(&mut rng))
        };
        set.push(MatchPair::new(src, Point2::new(src.x + dx, src.y + dy)), "fixture");
        labels.push(outlier);
    }
    (set, labels)
}

fn confusion(flags: &[bool], labels: &[bool]) -> (usize, usize) {
    let tp = flags.iter().zip(labels).filter(|(&f, &l)| f && l).count();
    let fp = flags.iter().zip(labels).filter(|(&f, &l)| f && !l).count();
    (tp, fp)
}

fn iforest_detection() -> Outcome {
    let (mut recall, mut fp) = (0.0, 0.0);
    for seed in 0..10 {
        let (set, labels) = displacement_fixture(seed);
        let cfg = ForestConfig {
            seed,
            ..ForestConfig::default()
        };
        let mask = detect_outliers(&set, &cfg).map_err(|e| e.to_string())?;
        let (t, f) = confusion(&mask.flags, &labels);
        recall += t as f64 / 10.0 / 10.0;
        fp += f as f64 / 10.0;
    }
    let detail = format!("mean recall {recall:.3}, mean false positives {fp:.2}");
    ensure(recall >= 0.9 && fp <= 5.0, || detail.clone())?;
    Ok(detail)
}

// ----------------------------------------------------------- local filter

fn sinusoid_fixture(seed: u64) -> (MatchSet, Vec<bool>, ImageMeta) {
    let meta = ImageMeta::new(1000, 1000).unwrap();
    let field = SyntheticField::Sinusoidal {
        amplitude: 10.0,
        wavelength: 1000.0,
        phase: 0.0,
    };
    let spec = MatchSpec {
        count: 1000,
        noise_sigma: 1.0,
        outlier_fraction: 0.05,
        outlier_magnitude: 50.0,
    };
    let (set, labels) = make_matches(&field, meta, &spec, seed).unwrap();
    (set, labels, meta)
}

fn local_filter() -> Outcome {
    let (mut tp, mut fp, mut pos, mut neg) = (0, 0, 0, 0);
    for seed in 0..10 {
        let (set, labels, meta) = sinusoid_fixture(seed);
        let cfg = LocalAffineConfig {
            image: Some(meta),
            seed,
            ..LocalAffineConfig::default()
        };
        let mask = filter_local(&set, &cfg).map_err(|e| e.to_string())?;
        let (t, f) = confusion(&mask.flags, &labels);
        tp += t;
        fp += f;
        pos += labels.iter().filter(|&&l| l).count();
        neg += labels.iter().filter(|&&l| !l).count();
    }
    let recall = tp as f64 / pos as f64;
    let fpr = fp as f64 / neg as f64;
    let detail = format!("recall {recall:.3}, false-positive rate {fpr:.4}");
    ensure(recall >= 0.9 && fpr <= 0.02, || detail.clone())?;
    Ok(detail)
}

fn end_to_end_refine() -> Outcome {
    let (mut worst_frac, mut worst_keep) = (0.0f64, 1.0f64);
    for seed in 0..10 {
        let (set, labels, meta) = sinusoid_fixture(seed);
        let mut cfg = RefineConfig::default().with_seed(seed);
        cfg.local.image = Some(meta);
        let out = refine_indexed(&[set], &cfg).map_err(|e| e.to_string())?;
        let planted = out.origin.iter().filter(|&&(_, i)| labels[i]).count();
        let inliers = labels.iter().filter(|&&l| !l).count();
        let frac = planted as f64 / out.origin.len() as f64;
        let keep = (out.origin.len() - planted) as f64 / inliers as f64;
        worst_frac = worst_frac.max(frac);
        worst_keep = worst_keep.min(keep);
    }
    let detail = format!(
        "worst planted fraction {:.4}%, worst inlier retention {:.2}% over 10 seeds",
        100.0 * worst_frac,
        100.0 * worst_keep
    );
    ensure(worst_frac < 0.005 && worst_keep >= 0.9, || detail.clone())?;
    Ok(detail)
}

// -------------------------------------------------------------------- TPS

fn random_points(n: usize, extent: f64, seed: u64) -> Vec<Point2> {
    let mut rng = stream(seed, 0xacc, 2);
    (0..n)
        .map(|_| Point2::new(rng.random_range(0.0..extent), rng.random_range(0.0..extent)))
        .collect()
}

fn tps() -> Outcome {
    let mut rng = stream(5, 0xacc, 3);
    let set = MatchSet::from_pairs(
        random_points(100, 1000.0, 5)
            .into_iter()
            .map(|d| {
                let off = DisplacementVector::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
                MatchPair::new(d + off, d)
            })
            .collect(),
        "r",
    );
    let model = tps_fit(&set, 0.0).map_err(|e| e.to_string())?;
    let residual = set
        .pairs()
        .iter()
        .map(|m| {
            let d = model.eval(m.dst);
            (d.dx - (m.src.x - m.dst.x)).abs().max((d.dy - (m.src.y - m.dst.y)).abs())
        })
        .fold(0.0, f64::max);
    ensure(residual <= 1e-6, || format!("control residual {residual:e}"))?;

    let map = AffineTransform2D::new([[1.03, -0.04], [0.05, 0.96]], [-7.5, 12.0]);
    let affine_set = MatchSet::from_pairs(
        random_points(50, 1000.0, 6)
            .into_iter()
            .map(|d| MatchPair::new(map.apply(d), d))
            .collect(),
        "a",
    );
    let model = tps_fit(&affine_set, 0.0).map_err(|e| e.to_string())?;
    let err = random_points(1000, 1000.0, 7)
        .into_iter()
        .map(|p| {
            let (want, got) = (map.apply(p) - p, model.eval(p));
            (got.dx - want.dx).abs().max((got.dy - want.dy).abs())
        })
        .fold(0.0, f64::max);
    ensure(err <= 1e-6, || format!("affine reproduction error {err:e}"))?;
    Ok(format!("control residual {residual:.1e} px, affine error {err:.1e} px"))
}

// ------------------------------------------------------------------- warp

fn warp_check() -> Outcome {
    let meta = ImageMeta::new(97, 61).unwrap();
    for ch in [1u8, 3] {
        let img = Texture::new(9).render(meta, ch, None).map_err(|e| e.to_string())?;
        let same = warp(&img, &DvfRaster::zeros(meta)).map_err(|e| e.to_string())?;
        ensure(same == img, || format!("zero field changed a {ch}-channel image"))?;
        for (dx, dy) in [(2i32, 0i32), (-3, 5), (0, -1)] {
            let field = DvfRaster::constant(meta, DisplacementVector::new(dx as f64, dy as f64));
            let out = warp(&img, &field).map_err(|e| e.to_string())?;
            for y in 0..meta.height as i32 {
                for x in 0..meta.width as i32 {
                    let (sx, sy) = (x + dx, y + dy);
                    if sx < 0 || sy < 0 || sx >= meta.width as i32 || sy >= meta.height as i32 {
                        continue;
                    }
                    ensure(
                        out.pixel(x as u32, y as u32) == img.pixel(sx as u32, sy as u32),
                        || format!("shift ({dx}, {dy}) differs at ({x}, {y})"),
                    )?;
                }
            }
        }
    }
    Ok("identity bit-exact; shifts (2,0) (-3,5) (0,-1) exact off the border".into())
}

// ------------------------------------------------------------- evaluation

/// Aggregates from explicit loops; medians by counting order statistics.
fn brute(lists: &[Vec<f64>]) -> [f64; 6] {
    fn median(v: &[f64]) -> f64 {
        let kth = |k: usize| -> f64 {
            *v.iter()
                .find(|&&x| {
                    let below = v.iter().filter(|&&y| y < x).count();
                    let equal = v.iter().filter(|&&y| y == x).count();
                    below <= k && k < below + equal
                })
                .unwrap()
        };
        let n = v.len();
        if n % 2 == 1 {
            kth(n / 2)
        } else {
            (kth(n / 2 - 1) + kth(n / 2)) / 2.0
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let max = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let avgs: Vec<f64> = lists.iter().map(|l| mean(l)).collect();
    let meds: Vec<f64> = lists.iter().map(|l| median(l)).collect();
    [mean(&avgs), mean(&meds), median(&avgs), median(&meds), max(&avgs), max(&meds)]
}

fn evaluation_oracle() -> Outcome {
    let mut rng = stream(11, 0xacc, 4);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let npairs = rng.random_range(1..9);
        let (mut pairs, mut lists) = (Vec::new(), Vec::new());
        for _ in 0..npairs {
            let (w, h) = (rng.random_range(64..2500u32), rng.random_range(64..2500u32));
            let meta = ImageMeta::new(w, h).unwrap();
            let n = rng.random_range(1..40);
            let truth: Vec<Point2> = (0..n)
                .map(|_| Point2::new(rng.random_range(0.0..w as f64), rng.random_range(0.0..h as f64)))
                .collect();
            let pred: Vec<Point2> = truth
                .iter()
                .map(|t| Point2::new(t.x + rng.random_range(-30.0..30.0), t.y + rng.random_range(-30.0..30.0)))
                .collect();
            let diag = ((w as f64).powi(2) + (h as f64).powi(2)).sqrt();
            lists.push(
                pred.iter()
                    .zip(&truth)
                    .map(|(p, t)| ((p.x - t.x).powi(2) + (p.y - t.y).powi(2)).sqrt() / diag)
                    .collect::<Vec<f64>>(),
            );
            pairs.push(EvalPair {
                predicted: LandmarkSet::new(pred).unwrap(),
                truth: LandmarkSet::new(truth).unwrap(),
                meta,
            });
        }
        let got = evaluate(&pairs).map_err(|e| e.to_string())?.aggregates.values();
        for (g, w) in got.iter().zip(brute(&lists)) {
            worst = worst.max((g - w).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("aggregate deviation {worst:e}"))?;

    let square = ImageMeta::new(1000, 1000).unwrap();
    let p = Point2::new(123.0, 456.0);
    ensure(rtre(p, p, square) == 0.0, || "rtre(p, p) != 0".into())?;
    let r = rtre(Point2::new(0.0, 0.0), Point2::new(14.142135, 0.0), square);
    let hand = 14.142135 / 2_000_000f64.sqrt();
    ensure(r == hand, || format!("rtre(14.142135 on 1000^2) = {r}, hand {hand}"))?;
    // 14.142135 truncates 10 sqrt(2) by 6.2e-7 px, i.e. 4.4e-10 of the diagonal
    ensure((r - 0.01).abs() <= 5e-10, || format!("rtre(14.142135 on 1000^2) = {r}"))?;
    let r = rtre(Point2::new(10.0, 20.0), Point2::new(13.0, 24.0), ImageMeta::new(300, 400).unwrap());
    ensure(r == 0.01, || format!("rtre(3-4-5 on 300x400) = {r}"))?;
    Ok(format!("50 collections, max deviation {worst:.1e}; hand cases exact"))
}

// ------------------------------------------------------------ desk scale

fn desk_scale() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = dir.path();
    let size = ["--width", "1000", "--height", "1000"];
    let mut results = Vec::new();
    let mut slowest = Duration::ZERO;
    for seed in ["1", "2", "3"] {
        let t = Instant::now();
        let mut cmds: Vec<Vec<&str>> = vec![
            vec!["synth", "pair", "--seed", seed, "--count", "500", "--outlier-fraction", "0.05", "--noise", "1", "--magnitude", "10", "--out-dir", "s"],
            vec!["refine", "--matches", "s/matches.csv", "--out", "r.csv", "--seed", seed, "--report", "r.json"],
            vec!["dvf", "--matches", "r.csv", "--out", "f.dvf", "--report", "d.json"],
            vec!["warp", "--image", "s/moving.png", "--dvf", "f.dvf", "--out", "w.png", "--landmarks", "s/fixed_landmarks.csv", "--landmarks-out", "pred.csv"],
            vec!["eval", "--pred", "pred.csv", "--truth", "s/moving_landmarks.csv", "--out", "e.json"],
        ];
        for c in [0, 1, 2, 4] {
            cmds[c].extend(size);
        }
        for args in &cmds {
            let out = common::run(p, args);
            ensure(out.status.success(), || {
                format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr))
            })?;
        }
        slowest = slowest.max(t.elapsed());
        let e: serde_json::Value =
            serde_json::from_slice(&fs::read(p.join("e.json")).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
        results.push(e["aggregates"]["Median-Median"].as_f64().unwrap_or(f64::NAN));
    }
    let detail = format!(
        "Median-Median rTRE {} (seeds 1-3), slowest run {:.1}s",
        results.iter().map(|r| format!("{r:.5}")).collect::<Vec<_>>().join(" / "),
        slowest.as_secs_f64()
    );
    ensure(results.iter().all(|&r| r <= 0.005), || detail.clone())?;
    ensure(slowest < Duration::from_secs(120), || detail.clone())?;
    Ok(detail)
}

// ------------------------------------------------------------- multiscale

/// Reports every ground-truth pair whose endpoints both fall inside the crops.
struct Oracle(Vec<MatchPair>);

impl Matcher for Oracle {
    type Error = String;

    fn match_crops(&mut self, req: &CropRequest) -> Result<MatchSet, String> {
        let inside = |q: Point2, img: &ImageBuffer| {
            q.x >= 0.0 && q.y >= 0.0 && q.x <= (img.width() - 1) as f64 && q.y <= (img.height() - 1) as f64
        };
        let mut out = MatchSet::new();
        for m in &self.0 {
            let (s, d) = (req.window_a.to_local(m.src), req.window_b.to_local(m.dst));
            if inside(s, &req.a) && inside(d, &req.b) {
                out.push(MatchPair::new(s, d), "oracle");
            }
        }
        Ok(out)
    }
}

fn multiscale() -> Outcome {
    let mut rng = stream(13, 0xacc, 5);
    let mut round_trip = 0.0f64;
    for _ in 0..10_000 {
        let win = CropWindow {
            origin: Point2::new(rng.random_range(0.0..5000.0), rng.random_range(0.0..5000.0)),
            scale: rng.random_range(0.5..64.0),
            size: 256,
        };
        let p = Point2::new(rng.random_range(-6000.0..6000.0), rng.random_range(-6000.0..6000.0));
        round_trip = round_trip.max(to_global(to_local(p, &win), &win).distance(&p));
        let q = Point2::new(rng.random_range(-50.0..300.0), rng.random_range(-50.0..300.0));
        round_trip = round_trip.max(to_local(to_global(q, &win), &win).distance(&q));
    }
    ensure(round_trip <= 1e-9, || format!("frame round trip {round_trip:e}"))?;

    let meta = ImageMeta::new(1500, 1100).unwrap();
    let field = SyntheticField::Sinusoidal {
        amplitude: 9.0,
        wavelength: 1300.0,
        phase: 0.7,
    };
    let truth: Vec<MatchPair> = (0..400)
        .map(|_| {
            let dst = Point2::new(rng.random_range(20.0..1480.0), rng.random_range(20.0..1080.0));
            MatchPair::new(dst + field.eval(dst), dst)
        })
        .collect();
    let img = ImageBuffer::filled(meta, 1, 100).unwrap();
    let out = run_pyramid(&img, &img, &mut Oracle(truth.clone()), &PyramidConfig::default())
        .map_err(|e| e.to_string())?;
    let worst = out
        .matches
        .pairs()
        .iter()
        .map(|m| {
            truth
                .iter()
                .map(|t| t.src.distance(&m.src).max(t.dst.distance(&m.dst)))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    ensure(worst <= 1e-6, || format!("pyramid match error {worst:e}"))?;
    ensure(out.matches.len() >= 390, || format!("only {} of 400 matches survive", out.matches.len()))?;
    Ok(format!(
        "round trip {round_trip:.1e}; {} levels, {}/400 matches, error {worst:.1e} px",
        out.levels.len(),
        out.matches.len()
    ))
}

// ------------------------------------------------------------ determinism

fn run_with_threads(dir: &Path, threads: &str, via_env: bool, args: &[&str]) -> Result<Vec<u8>, String> {
    let mut cmd = Command::new(common::bin());
    cmd.current_dir(dir).env_remove("RUST_LOG");
    if via_env {
        cmd.env("DEFORMREG_THREADS", threads).args(args);
    } else {
        cmd.env_remove("DEFORMREG_THREADS").arg("--threads").arg(threads).args(args);
    }
    let out = cmd.output().map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("{args:?} with {threads} threads: {}", String::from_utf8_lossy(&out.stderr))
    })?;
    Ok(out.stdout)
}

fn snapshot(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                files.push((rel, fs::read(&path).map_err(|e| e.to_string())?));
            }
        }
    }
    files.sort();
    Ok(files)
}

fn determinism() -> Outcome {
    let matcher = common::matcher_template("");
    let size = ["--width", "400", "--height", "300"];
    let mut commands: Vec<Vec<&str>> = vec![
        vec!["synth", "field", "--kind", "gaussian-bump", "--seed", "5", "--out", "field.dvf"],
        vec!["synth", "matches", "--seed", "5", "--count", "400", "--out", "m.csv", "--labels", "l.csv"],
        vec!["synth", "pair", "--seed", "5", "--channels", "3", "--count", "300", "--out-dir", "s"],
        vec!["refine", "--matches", "s/matches.csv", "--matches", "m.csv", "--seed", "5", "--out", "r.csv", "--report", "r.json"],
        vec!["refine", "--matches", "s/matches.csv", "--seed", "6", "--if-contamination", "0.1", "--out", "rc.csv"],
        vec!["dvf", "--matches", "r.csv", "--out", "f.dvf"],
        vec!["warp", "--image", "s/moving.png", "--dvf", "f.dvf", "--out", "w.png", "--landmarks", "s/fixed_landmarks.csv", "--landmarks-out", "pred.csv"],
        vec!["checkerboard", "--a", "w.png", "--b", "s/fixed.png", "--tile", "32", "--out", "cb.png"],
        vec!["eval", "--pred", "pred.csv", "--truth", "s/moving_landmarks.csv"],
        vec!["pipeline", "--moving", "s/moving.png", "--fixed", "s/fixed.png", "--matcher", &matcher, "--seed", "5", "--out", "p.csv", "--report", "p.json"],
    ];
    for (i, c) in commands.iter_mut().enumerate() {
        if !matches!(i, 3 | 4 | 6 | 7 | 9) {
            c.extend(size);
        }
    }
    let mut runs = Vec::new();
    for (threads, via_env) in [("1", false), ("4", false), ("3", true)] {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut stdout = Vec::new();
        for args in &commands {
            stdout.push(run_with_threads(dir.path(), threads, via_env, args)?);
        }
        runs.push((snapshot(dir.path())?, stdout));
    }
    let files = runs[0].0.len();
    for (i, run) in runs.iter().enumerate().skip(1) {
        for ((name, a), (other, b)) in runs[0].0.iter().zip(&run.0) {
            ensure(name == other && a == b, || format!("{name} differs in run {i}"))?;
        }
        ensure(run.0.len() == files, || "different file sets".into())?;
        ensure(run.1 == runs[0].1, || format!("stdout differs in run {i}"))?;
    }
    Ok(format!(
        "{} commands, {files} output files byte-identical for 1, 4 and 3 (env) threads",
        commands.len()
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("iforest-math", iforest_math, Duration::from_secs(1)),
        ("iforest-detection", iforest_detection, Duration::from_secs(10)),
        ("local-affine-filter", local_filter, Duration::from_secs(30)),
        ("end-to-end-refinement", end_to_end_refine, Duration::from_secs(60)),
        ("tps", tps, Duration::from_secs(30)),
        ("warp", warp_check, Duration::from_secs(30)),
        ("evaluation-oracle", evaluation_oracle, Duration::from_secs(30)),
        ("desk-scale-rtre", desk_scale, Duration::from_secs(3 * 120)),
        ("multiscale", multiscale, Duration::from_secs(60)),
        ("determinism", determinism, Duration::from_secs(300)),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check, limit) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check)
            .unwrap_or_else(|_| Err("panicked".into()))
            .and_then(|detail| {
                let t = start.elapsed();
                ensure(t <= limit, || format!("{detail}; took {:.1}s, limit {}s", t.as_secs_f64(), limit.as_secs()))
                    .map(|_| detail)
            });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name:<22} {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name:<22} {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
