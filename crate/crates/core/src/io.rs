//! Dataset CSV format.
//!
//! ```text
//! # d=2 n=4 k=2
//! 1,-1.0000000000000000e0,0.0000000000000000e0
//! ...
//! ```
//!
//! Each row is `label,coord_1,...,coord_d`; `label` is the planted cluster in
//! `1..=k`, or `0` when the dataset is unlabeled. Floats carry 17 significant
//! digits so a write/read cycle is lossless.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::{ClusterAssignment, Dataset};

pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_dataset<W: Write>(data: &Dataset, mut out: W) -> Result<()> {
    writeln!(out, "# d={} n={} k={}", data.d(), data.n(), data.k())?;
    let mut line = String::new();
    for i in 0..data.n() {
        line.clear();
        let label = data.planted().map_or(0, |p| p.labels()[i] + 1);
        write!(line, "{label}").unwrap();
        for &x in data.point(i) {
            line.push(',');
            line.push_str(&format_f64(x));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn save_dataset(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_dataset(data, &mut w)?;
    w.flush()?;
    Ok(())
}

fn parse_header(line: &str) -> Result<(usize, usize, usize)> {
    let err = |msg: &str| Error::Parse { line: 1, msg: msg.to_owned() };
    let body = line.trim().strip_prefix('#').ok_or_else(|| err("missing '#' header"))?;
    let (mut d, mut n, mut k) = (None, None, None);
    for tok in body.split_whitespace() {
        let (key, val) = tok.split_once('=').ok_or_else(|| err("expected key=value"))?;
        let val: usize = val.parse().map_err(|_| err("header value is not an integer"))?;
        match key {
            "d" => d = Some(val),
            "n" => n = Some(val),
            "k" => k = Some(val),
            _ => return Err(err("unknown header key")),
        }
    }
    match (d, n, k) {
        (Some(d), Some(n), Some(k)) => Ok((d, n, k)),
        _ => Err(err("header must define d, n and k")),
    }
}

pub fn read_dataset<R: BufRead>(input: R) -> Result<Dataset> {
    let mut lines = input.lines();
    let header = lines.next().ok_or(Error::Parse { line: 1, msg: "empty input".into() })??;
    let (d, n, k) = parse_header(&header)?;

    let mut coords = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let perr = |msg: String| Error::Parse { line: lineno, msg };
        let mut fields = line.split(',');
        let label: usize = fields
            .next()
            .unwrap_or_default()
            .trim()
            .parse()
            .map_err(|_| perr("bad label".into()))?;
        if label > k {
            return Err(perr(format!("label {label} exceeds k={k}")));
        }
        labels.push(label);
        let before = coords.len();
        for f in fields {
            let v: f64 = f.trim().parse().map_err(|_| perr(format!("bad float {f:?}")))?;
            coords.push(v);
        }
        if coords.len() - before != d {
            return Err(perr(format!("expected {d} coordinates, got {}", coords.len() - before)));
        }
    }
    if labels.len() != n {
        return Err(Error::Parse {
            line: labels.len() + 1,
            msg: format!("header says n={n} but found {} rows", labels.len()),
        });
    }

    let planted = if labels.iter().all(|&l| l == 0) {
        None
    } else if labels.contains(&0) {
        return Err(Error::Parse { line: 0, msg: "mix of labeled and unlabeled rows".into() });
    } else {
        Some(ClusterAssignment::new(labels.iter().map(|l| l - 1).collect(), k)?)
    };
    let points =
        Array2::from_shape_vec((n, d), coords).map_err(|e| Error::Dimension(e.to_string()))?;
    Dataset::new(points, k, planted)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_dataset(std::io::BufReader::new(file))
}
