//! CSV formats: long-format curves, labels, coefficients and predictions.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::smoother::{FunctionalDataset, RawCurve};

pub const CURVES_HEADER: [&str; 3] = ["curve_id", "t", "x"];
pub const LABELS_HEADER: [&str; 2] = ["curve_id", "label"];

/// Curves read from a file, plus the ids dropped for missing values.
#[derive(Debug, Clone)]
pub struct CurveIngest {
    pub curves: Vec<RawCurve>,
    pub dropped: Vec<String>,
}

fn parse_err(path: &Path, line: u64, detail: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        detail: detail.into(),
    }
}

fn open_reader(path: &Path, expected: &[&str]) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = rdr.headers().map_err(|e| parse_err(path, 1, e.to_string()))?;
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(parse_err(
            path,
            1,
            format!("expected header '{}', found '{}'", expected.join(","), got.join(",")),
        ));
    }
    Ok(rdr)
}

fn is_missing(field: &str) -> bool {
    field.is_empty() || matches!(field.to_ascii_lowercase().as_str(), "na" | "nan" | "null")
}

/// Reads `curve_id,t,x` rows. Curves keep the order of first appearance and
/// their observations are sorted by time. A curve with any missing `x` is
/// an error unless `drop_missing`, in which case it is skipped and listed.
pub fn read_curves(path: &Path, drop_missing: bool) -> Result<CurveIngest> {
    let mut rdr = open_reader(path, &CURVES_HEADER)?;
    let mut order: Vec<String> = Vec::new();
    let mut obs: HashMap<String, Vec<(f64, f64)>> = HashMap::new();
    let mut missing: BTreeMap<String, u64> = BTreeMap::new();
    let mut seen: HashMap<(String, u64), u64> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != 3 {
            return Err(parse_err(path, line, format!("expected 3 fields, found {}", rec.len())));
        }
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(parse_err(path, line, "empty curve_id"));
        }
        let t: f64 = rec[1]
            .parse()
            .map_err(|_| parse_err(path, line, format!("invalid time '{}'", &rec[1])))?;
        if !t.is_finite() {
            return Err(parse_err(path, line, format!("non-finite time '{}'", &rec[1])));
        }
        if let Some(first) = seen.insert((id.clone(), t.to_bits()), line) {
            return Err(parse_err(
                path,
                line,
                format!("duplicate observation for curve '{id}' at t = {t} (first on line {first})"),
            ));
        }
        if !obs.contains_key(&id) {
            order.push(id.clone());
        }
        let entry = obs.entry(id.clone()).or_default();
        if is_missing(&rec[2]) {
            missing.entry(id).or_insert(line);
            continue;
        }
        let x: f64 = rec[2]
            .parse()
            .map_err(|_| parse_err(path, line, format!("invalid value '{}'", &rec[2])))?;
        if !x.is_finite() {
            missing.entry(id).or_insert(line);
            continue;
        }
        entry.push((t, x));
    }
    if !missing.is_empty() && !drop_missing {
        let ids: Vec<&str> = missing.keys().map(String::as_str).collect();
        return Err(Error::Format(format!(
            "{}: curves with missing values: {} (use --drop-missing to skip them)",
            path.display(),
            ids.join(", ")
        )));
    }
    let mut curves = Vec::with_capacity(order.len());
    let mut dropped = Vec::new();
    for id in order {
        if missing.contains_key(&id) {
            dropped.push(id);
            continue;
        }
        let mut pts = obs.remove(&id).unwrap_or_default();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (times, values) = pts.into_iter().unzip();
        curves.push(RawCurve::new(id, times, values));
    }
    Ok(CurveIngest { curves, dropped })
}

/// Reads `curve_id,label` rows; an empty label marks the curve unlabeled.
pub fn read_labels(path: &Path) -> Result<Vec<(String, Option<usize>)>> {
    let mut rdr = open_reader(path, &LABELS_HEADER)?;
    let mut out = Vec::new();
    let mut seen: HashMap<String, u64> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != 2 {
            return Err(parse_err(path, line, format!("expected 2 fields, found {}", rec.len())));
        }
        let id = rec[0].to_string();
        if let Some(first) = seen.insert(id.clone(), line) {
            return Err(parse_err(path, line, format!("curve '{id}' already labeled on line {first}")));
        }
        let label = if rec[1].is_empty() {
            None
        } else {
            match rec[1].parse::<usize>() {
                Ok(l) if l >= 1 => Some(l),
                _ => {
                    return Err(parse_err(
                        path,
                        line,
                        format!("label must be a positive integer or empty, found '{}'", &rec[1]),
                    ))
                }
            }
        };
        out.push((id, label));
    }
    Ok(out)
}

/// Merges label files. A curve may appear in several files only if it is
/// unlabeled in all but at most one of them.
pub fn merge_labels(files: &[Vec<(String, Option<usize>)>]) -> Result<HashMap<String, Option<usize>>> {
    let mut out: HashMap<String, Option<usize>> = HashMap::new();
    for file in files {
        for (id, label) in file {
            match (out.get(id).copied(), *label) {
                (None, l) => {
                    out.insert(id.clone(), l);
                }
                (Some(None), l) => {
                    out.insert(id.clone(), l);
                }
                (Some(Some(_)), None) => {}
                (Some(Some(a)), Some(b)) if a == b => {}
                (Some(Some(a)), Some(b)) => {
                    return Err(Error::Format(format!("curve '{id}' labeled both {a} and {b}")))
                }
            }
        }
    }
    Ok(out)
}

/// Labels in curve order. Curves absent from the map are unlabeled; label
/// rows naming unknown curves are an error.
pub fn align_labels(curves: &[RawCurve], labels: &HashMap<String, Option<usize>>) -> Result<Vec<Option<usize>>> {
    let ids: std::collections::HashSet<&str> = curves.iter().map(|c| c.id.as_str()).collect();
    let mut unknown: Vec<&str> = labels.keys().map(String::as_str).filter(|id| !ids.contains(id)).collect();
    if !unknown.is_empty() {
        unknown.sort_unstable();
        unknown.truncate(10);
        return Err(Error::Format(format!(
            "labels given for unknown curves: {}",
            unknown.join(", ")
        )));
    }
    Ok(curves.iter().map(|c| labels.get(&c.id).copied().flatten()).collect())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_curves(path: &Path, curves: &[RawCurve]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", CURVES_HEADER.join(",")).map_err(io)?;
    for c in curves {
        for (t, x) in c.times.iter().zip(&c.values) {
            writeln!(w, "{},{t},{x}", c.id).map_err(io)?;
        }
    }
    finish(path, w)
}

pub fn write_labels(path: &Path, ids: &[String], labels: &[Option<usize>]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", LABELS_HEADER.join(",")).map_err(io)?;
    for (id, l) in ids.iter().zip(labels) {
        match l {
            Some(l) => writeln!(w, "{id},{l}"),
            None => writeln!(w, "{id},"),
        }
        .map_err(io)?;
    }
    finish(path, w)
}

/// `curve_id,zeta,w1,…,wm`.
pub fn write_coefficients(path: &Path, data: &FunctionalDataset) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    let cols: Vec<String> = (1..=data.m()).map(|k| format!("w{k}")).collect();
    writeln!(w, "curve_id,zeta,{}", cols.join(",")).map_err(io)?;
    for (a, id) in data.curve_ids.iter().enumerate() {
        let row: Vec<String> = data.coefficients.row(a).iter().map(|v| v.to_string()).collect();
        writeln!(w, "{id},{},{}", data.zetas[a], row.join(",")).map_err(io)?;
    }
    finish(path, w)
}

/// `curve_id,class,p1,…,pL`.
pub fn write_predictions(path: &Path, ids: &[String], classes: &[usize], probs: &DMatrix<f64>, n_classes: usize) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    let cols: Vec<String> = (1..=n_classes).map(|k| format!("p{k}")).collect();
    writeln!(w, "curve_id,class,{}", cols.join(",")).map_err(io)?;
    for (a, id) in ids.iter().enumerate() {
        let row: Vec<String> = probs.row(a).iter().map(|v| v.to_string()).collect();
        writeln!(w, "{id},{},{}", classes[a], row.join(",")).map_err(io)?;
    }
    finish(path, w)
}

/// Writes `contents` to `path`, creating parent directories.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))?;
    finish(path, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn curves_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let curves = vec![
            RawCurve::new("a", vec![0.0, 0.5, 1.0], vec![1.5, -2.25, 1e-17]),
            RawCurve::new("b", vec![0.1], vec![3.0]),
        ];
        let p = dir.path().join("sub/curves.csv");
        write_curves(&p, &curves).unwrap();
        let back = read_curves(&p, false).unwrap();
        assert_eq!(back.curves, curves);
        assert!(back.dropped.is_empty());
    }

    #[test]
    fn unsorted_rows_are_grouped_and_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "c.csv", "curve_id,t,x\nb,2,20\na,1,1\nb,1,10\na,0,0\n");
        let c = read_curves(&p, false).unwrap().curves;
        assert_eq!(c[0].id, "b");
        assert_eq!(c[0].times, vec![1.0, 2.0]);
        assert_eq!(c[1].values, vec![0.0, 1.0]);
    }

    #[test]
    fn missing_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "c.csv", "curve_id,t,x\na,0,1\na,1,NA\nb,0,2\nc,0,\nc,1,3\n");
        let err = read_curves(&p, false).unwrap_err().to_string();
        assert!(err.contains("a, c"), "{err}");
        let ok = read_curves(&p, true).unwrap();
        assert_eq!(ok.dropped, vec!["a", "c"]);
        assert_eq!(ok.curves.len(), 1);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "c.csv", "curve_id,t,x\na,0,1\na,zero,2\n");
        match read_curves(&p, false) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let p = write(dir.path(), "d.csv", "curve_id,t,x\na,0,1\na,0,2\n");
        match read_curves(&p, false) {
            Err(Error::Parse { line, detail, .. }) => {
                assert_eq!(line, 3);
                assert!(detail.contains("duplicate"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let p = write(dir.path(), "e.csv", "id,t,x\n");
        assert!(matches!(read_curves(&p, false), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(read_curves(&dir.path().join("none.csv"), false), Err(Error::Io { .. })));
    }

    #[test]
    fn labels_merge_and_align() {
        let dir = tempfile::tempdir().unwrap();
        let a = read_labels(&write(dir.path(), "a.csv", "curve_id,label\nx,1\ny,\n")).unwrap();
        let b = read_labels(&write(dir.path(), "b.csv", "curve_id,label\nz,\nw,2\n")).unwrap();
        let merged = merge_labels(&[a.clone(), b]).unwrap();
        assert_eq!(merged.len(), 4);
        assert_eq!(merged.values().filter(|l| l.is_some()).count(), 2);
        let curves: Vec<RawCurve> = ["w", "x", "y", "z", "v"]
            .iter()
            .map(|id| RawCurve::new(*id, vec![0.0], vec![0.0]))
            .collect();
        assert_eq!(
            align_labels(&curves, &merged).unwrap(),
            vec![Some(2), Some(1), None, None, None]
        );
        let conflict = vec![("x".to_string(), Some(2))];
        assert!(merge_labels(&[a, conflict]).is_err());
        assert!(align_labels(&curves[..1], &merged).is_err());
        assert!(read_labels(&write(dir.path(), "c.csv", "curve_id,label\nx,0\n")).is_err());
    }
}
