//! Minimal external matcher: `block_matcher A.png B.png OUT.csv [--max-height N]`.
//!
//! Matches square patches on a regular grid of A against B by exhaustive
//! integer search of the sum of squared differences, then refines each
//! offset with a parabola through the neighbouring costs. Low-contrast
//! patches are skipped.
//!
//! `--max-height N` exits with status 1 when crop A is taller than N
//! pixels, which lets tests force a failure at a chosen pyramid level.

use std::io::Write;
use std::process::ExitCode;

const RADIUS: i64 = 7;
const SEARCH: i64 = 12;
const STRIDE: i64 = 12;
const MIN_STD: f64 = 4.0;

struct Gray {
    w: i64,
    h: i64,
    px: Vec<f64>,
}

impl Gray {
    fn load(path: &str) -> Result<Self, String> {
        let img = image::open(path).map_err(|e| format!("{path}: {e}"))?.to_luma8();
        Ok(Self {
            w: img.width() as i64,
            h: img.height() as i64,
            px: img.as_raw().iter().map(|&v| v as f64).collect(),
        })
    }

    fn at(&self, x: i64, y: i64) -> f64 {
        self.px[(y * self.w + x) as usize]
    }
}

fn ssd(a: &Gray, b: &Gray, (ax, ay): (i64, i64), (bx, by): (i64, i64)) -> f64 {
    let mut s = 0.0;
    for dy in -RADIUS..=RADIUS {
        for dx in -RADIUS..=RADIUS {
            let d = a.at(ax + dx, ay + dy) - b.at(bx + dx, by + dy);
            s += d * d;
        }
    }
    s
}

fn contrast(a: &Gray, (x, y): (i64, i64)) -> f64 {
    let n = ((2 * RADIUS + 1) * (2 * RADIUS + 1)) as f64;
    let (mut s, mut s2) = (0.0, 0.0);
    for dy in -RADIUS..=RADIUS {
        for dx in -RADIUS..=RADIUS {
            let v = a.at(x + dx, y + dy);
            s += v;
            s2 += v * v;
        }
    }
    (s2 / n - (s / n) * (s / n)).max(0.0).sqrt()
}

fn parabola(l: f64, c: f64, r: f64) -> f64 {
    let den = l - 2.0 * c + r;
    if den > 0.0 {
        (0.5 * (l - r) / den).clamp(-0.5, 0.5)
    } else {
        0.0
    }
}

fn best_match(a: &Gray, b: &Gray, p: (i64, i64)) -> Option<(f64, f64)> {
    let inside = |x: i64, y: i64| x >= RADIUS && y >= RADIUS && x < b.w - RADIUS && y < b.h - RADIUS;
    let mut best: Option<(f64, i64, i64)> = None;
    for oy in -SEARCH..=SEARCH {
        for ox in -SEARCH..=SEARCH {
            let (x, y) = (p.0 + ox, p.1 + oy);
            if !inside(x, y) {
                continue;
            }
            let c = ssd(a, b, p, (x, y));
            if best.is_none_or(|(bc, _, _)| c < bc) {
                best = Some((c, x, y));
            }
        }
    }
    let (c, x, y) = best?;
    // A minimum on the search boundary is usually a wrong basin.
    if (x - p.0).abs() == SEARCH || (y - p.1).abs() == SEARCH {
        return None;
    }
    let cost = |x, y| if inside(x, y) { ssd(a, b, p, (x, y)) } else { c };
    let fx = parabola(cost(x - 1, y), c, cost(x + 1, y));
    let fy = parabola(cost(x, y - 1), c, cost(x, y + 1));
    Some((x as f64 + fx, y as f64 + fy))
}

fn run(args: &[String]) -> Result<(), String> {
    let [a, b, out, rest @ ..] = args else {
        return Err("usage: block_matcher A B OUT [--max-height N]".into());
    };
    let (a, b) = (Gray::load(a)?, Gray::load(b)?);
    if let [flag, n] = rest {
        if flag != "--max-height" {
            return Err(format!("unknown flag {flag}"));
        }
        let n: i64 = n.parse().map_err(|_| format!("bad height {n}"))?;
        if a.h > n {
            return Err(format!("crop height {} above {n}", a.h));
        }
    }
    let mut csv = String::from("x_src,y_src,x_dst,y_dst\n");
    let mut y = RADIUS;
    while y < a.h - RADIUS {
        let mut x = RADIUS;
        while x < a.w - RADIUS {
            if contrast(&a, (x, y)) >= MIN_STD {
                if let Some((bx, by)) = best_match(&a, &b, (x, y)) {
                    csv.push_str(&format!("{x},{y},{bx},{by}\n"));
                }
            }
            x += STRIDE;
        }
        y += STRIDE;
    }
    std::fs::File::create(out)
        .and_then(|mut f| f.write_all(csv.as_bytes()))
        .map_err(|e| format!("{out}: {e}"))
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("block_matcher: {e}");
            ExitCode::FAILURE
        }
    }
}
