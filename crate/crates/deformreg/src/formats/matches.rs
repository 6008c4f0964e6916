//! Match CSV: header `x_src,y_src,x_dst,y_dst[,provenance]`, one pair per row.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use deformreg_core::model::UNKNOWN_PROVENANCE;
use deformreg_core::{MatchPair, MatchSet, Point2};

use crate::error::{Error, Result};

const COLUMNS: [&str; 4] = ["x_src", "y_src", "x_dst", "y_dst"];
const PROVENANCE: &str = "provenance";

pub fn read_match_csv(path: &Path) -> Result<MatchSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_match_csv(BufReader::new(file), path)
}

/// Parses match CSV from any reader; `path` only labels errors.
pub fn parse_match_csv<R: Read>(reader: R, path: &Path) -> Result<MatchSet> {
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
    let header = match records.next() {
        None => return Err(malformed(1, "missing header".into())),
        Some(r) => r.map_err(|e| csv_error(e, path))?,
    };
    let with_tag = header.len() == 5 && header.get(4) == Some(PROVENANCE);
    let names: Vec<&str> = header.iter().take(4).collect();
    if names != COLUMNS || !(header.len() == 4 || with_tag) {
        return Err(malformed(
            1,
            format!("expected header {}[,{PROVENANCE}]", COLUMNS.join(",")),
        ));
    }
    let arity = if with_tag { 5 } else { 4 };

    let mut set = MatchSet::new();
    for rec in records {
        let rec = rec.map_err(|e| csv_error(e, path))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != arity {
            return Err(malformed(line, format!("expected {arity} fields, found {}", rec.len())));
        }
        let mut v = [0.0; 4];
        for (k, slot) in v.iter_mut().enumerate() {
            let field = &rec[k];
            *slot = field
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| malformed(line, format!("{}: not a finite number: {field:?}", COLUMNS[k])))?;
        }
        let tag = if with_tag { &rec[4] } else { UNKNOWN_PROVENANCE };
        set.push(
            MatchPair::new(Point2::new(v[0], v[1]), Point2::new(v[2], v[3])),
            if tag.is_empty() { UNKNOWN_PROVENANCE } else { tag },
        );
    }
    Ok(set)
}

fn csv_error(e: csv::Error, path: &Path) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        kind => Error::MalformedRow {
            path: path.to_path_buf(),
            line,
            reason: format!("{kind:?}"),
        },
    }
}

pub fn write_match_csv(set: &MatchSet, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    encode_match_csv(set, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Coordinates use the shortest decimal form that parses back to the same `f64`.
pub fn encode_match_csv<W: Write>(set: &MatchSet, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS.iter().chain([&PROVENANCE]))?;
    for (m, tag) in set.iter() {
        w.write_record([
            m.src.x.to_string(),
            m.src.y.to_string(),
            m.dst.x.to_string(),
            m.dst.y.to_string(),
            tag.to_string(),
        ])?;
    }
    w.flush()
}

/// Outlier labels as `index,outlier` with `0`/`1` values.
pub fn write_labels_csv(labels: &[bool], path: &Path) -> Result<()> {
    let mut text = String::from("index,outlier\n");
    for (i, &l) in labels.iter().enumerate() {
        text.push_str(&format!("{i},{}\n", u8::from(l)));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<MatchSet> {
        parse_match_csv(text.as_bytes(), Path::new("m.csv"))
    }

    #[test]
    fn single_row_without_provenance() {
        let s = parse("x_src,y_src,x_dst,y_dst\n10,20,12,21\n").unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(
            s.pairs()[0],
            MatchPair::new(Point2::new(10.0, 20.0), Point2::new(12.0, 21.0))
        );
        assert_eq!(s.provenance(), &["unknown"]);
    }

    #[test]
    fn header_only_is_empty() {
        assert!(parse("x_src,y_src,x_dst,y_dst\n").unwrap().is_empty());
        assert!(parse("x_src,y_src,x_dst,y_dst,provenance\n").unwrap().is_empty());
    }

    #[test]
    fn bad_field_reports_line() {
        match parse("x_src,y_src,x_dst,y_dst\n10,20,abc,21\n") {
            Err(Error::MalformedRow { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match parse("x_src,y_src,x_dst,y_dst\n1,2,3,4\n1,2,3\n") {
            Err(Error::MalformedRow { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("a,b,c,d\n"), Err(Error::MalformedRow { line: 1, .. })));
        assert!(matches!(parse(""), Err(Error::MalformedRow { line: 1, .. })));
        assert!(parse("x_src,y_src,x_dst,y_dst\n1,2,NaN,4\n").is_err());
    }

    #[test]
    fn round_trip_keeps_values_and_tags() {
        let mut s = MatchSet::new();
        s.push(MatchPair::new(Point2::new(0.123456789, -3.5), Point2::new(1e-7, 2.0 / 3.0)), "detector-free");
        s.push(MatchPair::new(Point2::new(5.0, 6.0), Point2::new(7.0, 8.0)), "a,b");
        s.push(MatchPair::new(Point2::new(1e300, 0.0), Point2::new(-0.0, 9.0)), "x");
        let mut buf = Vec::new();
        encode_match_csv(&s, &mut buf).unwrap();
        assert_eq!(String::from_utf8_lossy(&buf).lines().count(), 4);
        let back = parse_match_csv(buf.as_slice(), Path::new("m.csv")).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.pairs()[0].src.x, 0.123456789);
    }

    #[test]
    fn empty_set_writes_header_only() {
        let mut buf = Vec::new();
        encode_match_csv(&MatchSet::new(), &mut buf).unwrap();
        assert_eq!(buf, b"x_src,y_src,x_dst,y_dst,provenance\n");
    }
}
