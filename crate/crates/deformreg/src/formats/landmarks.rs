//! Landmark CSV with header `,X,Y` and rows `index,X,Y` (X = column, Y = row,
//! origin at the top-left pixel).

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use deformreg_core::{LandmarkSet, Point2};

use crate::error::{Error, Result};

pub fn read_landmarks_csv(path: &Path) -> Result<LandmarkSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_landmarks_csv(BufReader::new(file), path)
}

pub fn parse_landmarks_csv<R: Read>(reader: R, path: &Path) -> Result<LandmarkSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let malformed = |line: u64, reason: String| Error::MalformedRow {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut records = rdr.records();
    match records.next() {
        Some(Ok(h)) if h.len() == 3 && &h[1] == "X" && &h[2] == "Y" => {}
        Some(Err(e)) => return Err(malformed(1, e.to_string())),
        _ => return Err(malformed(1, "expected header ,X,Y".into())),
    }
    let mut points = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| malformed(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(malformed(line, format!("expected 3 fields, found {}", rec.len())));
        }
        if rec[0].parse::<usize>().ok() != Some(points.len()) {
            return Err(Error::NonContiguousIndex {
                path: path.to_path_buf(),
                line,
                expected: points.len(),
                found: rec[0].to_string(),
            });
        }
        let coord = |k: usize| {
            rec[k]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| malformed(line, format!("not a finite number: {:?}", &rec[k])))
        };
        points.push(Point2::new(coord(1)?, coord(2)?));
    }
    LandmarkSet::new(points).map_err(|e| Error::core(path.display().to_string(), e))
}

pub fn write_landmarks_csv(set: &LandmarkSet, path: &Path) -> Result<()> {
    std::fs::write(path, encode_landmarks_csv(set)).map_err(|e| Error::io(path, e))
}

pub fn encode_landmarks_csv(set: &LandmarkSet) -> String {
    let mut text = String::from(",X,Y\n");
    for (i, p) in set.points().iter().enumerate() {
        text.push_str(&format!("{i},{},{}\n", p.x, p.y));
    }
    text
}
