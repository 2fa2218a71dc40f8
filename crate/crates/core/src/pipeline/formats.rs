//! Versioned text formats for axes, fields and models, plus PGM and CSV output.
//!
//! Floats are written with 17 significant digits, which reads back to the
//! same `f64`.

use std::fmt::Write as _;
use std::path::Path;

use crate::classifier::{ClassGaussian, GaussianClassifier};
use crate::error::{Error, Result};
use crate::fem::{DesignField, NodeVector};
use crate::forest::{AxisBundle, AxisFields, AxisProvenance};

pub const AXES_HEADER: &str = "MEIP-AXES 1";
pub const FIELDS_HEADER: &str = "MEIP-FIELDS 1";
pub const MODEL_HEADER: &str = "MEIP-MODEL 1";

fn row(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v:.16e}");
    }
    out.push('\n');
}

struct Lines<'a> {
    what: &'static str,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(what: &'static str, text: &'a str) -> Self {
        Lines {
            what,
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    fn next_opt(&mut self) -> Option<&'a str> {
        for (i, l) in self.inner.by_ref() {
            self.last = i + 1;
            if !l.trim().is_empty() {
                return Some(l.trim());
            }
        }
        None
    }

    fn next(&mut self) -> Result<&'a str> {
        self.next_opt()
            .ok_or_else(|| Error::format(self.what, "unexpected end of file"))
    }

    fn err(&self, detail: impl std::fmt::Display) -> Error {
        Error::format(self.what, format!("line {}: {detail}", self.last))
    }

    fn header(&mut self, expected: &str) -> Result<()> {
        let h = self.next()?;
        if h != expected {
            return Err(self.err(format!("expected header `{expected}`, found `{h}`")));
        }
        Ok(())
    }

    fn usizes(&mut self, n: usize) -> Result<Vec<usize>> {
        let l = self.next()?;
        let v: Vec<usize> = l
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| self.err(format!("bad integer `{t}`"))))
            .collect::<Result<_>>()?;
        if v.len() != n {
            return Err(self.err(format!("expected {n} integers, found {}", v.len())));
        }
        Ok(v)
    }

    fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        let l = self.next()?;
        let v: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| self.err(format!("bad number `{t}`"))))
            .collect::<Result<_>>()?;
        if v.len() != n {
            return Err(self.err(format!("expected {n} values, found {}", v.len())));
        }
        Ok(v)
    }
}

/// Header, `n1 n2 M n_axes`, one row per axis, then optional
/// `exhausted` and `provenance` lines.
pub fn encode_axes(bundle: &AxisBundle) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{AXES_HEADER}");
    let _ = writeln!(s, "{} {} {} {}", bundle.n1, bundle.n2, bundle.node_count(), bundle.len());
    for a in &bundle.axes {
        row(&mut s, a);
    }
    if bundle.exhausted {
        s.push_str("exhausted 1\n");
    }
    for (i, p) in bundle.provenance.iter().enumerate() {
        let _ = writeln!(
            s,
            "provenance {i} {} {} {} {} {} {} {:.16e} {:.16e}",
            p.subset_size, p.m0, p.m1, p.iterations, p.converged_by, p.ref_kind, p.j_final, p.threshold
        );
    }
    s
}

pub fn decode_axes(text: &str) -> Result<AxisBundle> {
    let mut l = Lines::new("axis bundle", text);
    l.header(AXES_HEADER)?;
    let dims = l.usizes(4)?;
    let (n1, n2, m, n) = (dims[0], dims[1], dims[2], dims[3]);
    if m != (n1 + 1) * (n2 + 1) {
        return Err(l.err(format!("{m} nodes do not fit a {n1}x{n2} mesh")));
    }
    let axes = (0..n)
        .map(|_| l.floats(m).map(NodeVector))
        .collect::<Result<Vec<_>>>()?;
    let mut bundle = AxisBundle::new(n1, n2, axes)?;
    while let Some(line) = l.next_opt() {
        let t: Vec<&str> = line.split_whitespace().collect();
        match t.as_slice() {
            ["exhausted", v] => bundle.exhausted = *v == "1",
            ["provenance", i, size, m0, m1, it, conv, kind, j, th] => {
                if i.parse::<usize>().ok() != Some(bundle.provenance.len()) {
                    return Err(l.err("provenance out of order"));
                }
                let int = |s: &str| s.parse::<usize>().map_err(|_| l.err(format!("bad integer `{s}`")));
                let flt = |s: &str| s.parse::<f64>().map_err(|_| l.err(format!("bad number `{s}`")));
                bundle.provenance.push(AxisProvenance {
                    subset_size: int(size)?,
                    m0: int(m0)?,
                    m1: int(m1)?,
                    iterations: int(it)?,
                    converged_by: match *conv {
                        "EPS_J" => crate::optimizer::ConvergedBy::EpsJ,
                        "EPS_X" => crate::optimizer::ConvergedBy::EpsX,
                        "MAX_ITERS" => crate::optimizer::ConvergedBy::MaxIters,
                        other => return Err(l.err(format!("unknown stop reason `{other}`"))),
                    },
                    ref_kind: kind.parse()?,
                    j_final: flt(j)?,
                    threshold: flt(th)?,
                });
            }
            _ => return Err(l.err(format!("unexpected line `{line}`"))),
        }
    }
    if !bundle.provenance.is_empty() && bundle.provenance.len() != bundle.len() {
        return Err(Error::format("axis bundle", "provenance count differs from axis count"));
    }
    Ok(bundle)
}

/// Header, `n1 n2 n_axes`, then rows `p`, `q`, `f`, `g` per axis.
pub fn encode_fields(n1: usize, n2: usize, fields: &[AxisFields]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{FIELDS_HEADER}");
    let _ = writeln!(s, "{n1} {n2} {}", fields.len());
    for f in fields {
        row(&mut s, &f.design.p);
        row(&mut s, &f.design.q);
        row(&mut s, &f.f);
        row(&mut s, &f.g);
    }
    s
}

pub fn decode_fields(text: &str) -> Result<(usize, usize, Vec<AxisFields>)> {
    let mut l = Lines::new("fields", text);
    l.header(FIELDS_HEADER)?;
    let dims = l.usizes(3)?;
    let (n1, n2, n) = (dims[0], dims[1], dims[2]);
    let (ne, m) = (n1 * n2, (n1 + 1) * (n2 + 1));
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let p = l.floats(ne)?;
        let q = l.floats(ne)?;
        let f = NodeVector(l.floats(m)?);
        let g = NodeVector(l.floats(m)?);
        out.push(AxisFields {
            design: DesignField { p, q },
            f,
            g,
        });
    }
    Ok((n1, n2, out))
}

/// A fitted classifier with the digits its classes stand for.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub classifier: GaussianClassifier,
    pub labels: Vec<usize>,
    /// Axis bundle the features come from, relative to the model file.
    pub bundle: String,
    /// Canonical config text of the run.
    pub config: String,
}

/// Header, `C dim`, then per class the prior, the mean row and the
/// covariance rows; a metadata trailer names the labels, the bundle and the
/// config.
pub fn encode_model(m: &ModelFile) -> String {
    let c = &m.classifier;
    let d = c.dim();
    let mut s = String::new();
    let _ = writeln!(s, "{MODEL_HEADER}");
    let _ = writeln!(s, "{} {d}", c.n_classes());
    for g in c.classes() {
        let _ = writeln!(s, "{:.16e}", g.prior);
        row(&mut s, &g.mean);
        for i in 0..d {
            row(&mut s, &g.cov[i * d..(i + 1) * d]);
        }
    }
    let labels: Vec<String> = m.labels.iter().map(|l| l.to_string()).collect();
    let _ = writeln!(s, "labels {}", labels.join(" "));
    let _ = writeln!(s, "bundle {}", m.bundle);
    s.push_str("config\n");
    s.push_str(&m.config);
    s
}

pub fn decode_model(text: &str) -> Result<ModelFile> {
    let mut l = Lines::new("model", text);
    l.header(MODEL_HEADER)?;
    let dims = l.usizes(2)?;
    let (c, d) = (dims[0], dims[1]);
    let mut classes = Vec::with_capacity(c);
    for _ in 0..c {
        let prior = l.floats(1)?[0];
        let mean = l.floats(d)?;
        let mut cov = Vec::with_capacity(d * d);
        for _ in 0..d {
            cov.extend(l.floats(d)?);
        }
        classes.push(ClassGaussian::new(prior, mean, cov)?);
    }
    let classifier = GaussianClassifier::from_classes(classes)?;
    let labels_line = l.next()?;
    let labels = labels_line
        .strip_prefix("labels")
        .ok_or_else(|| l.err("expected `labels`"))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| l.err(format!("bad label `{t}`"))))
        .collect::<Result<Vec<usize>>>()?;
    if labels.len() != c {
        return Err(l.err(format!("{} labels for {c} classes", labels.len())));
    }
    let bundle = l
        .next()?
        .strip_prefix("bundle ")
        .ok_or_else(|| l.err("expected `bundle`"))?
        .to_string();
    let marker = text
        .find("\nconfig\n")
        .ok_or_else(|| Error::format("model", "missing config section"))?;
    Ok(ModelFile {
        classifier,
        labels,
        bundle,
        config: text[marker + "\nconfig\n".len()..].to_string(),
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Binary PGM of a row-major raster, min-max scaled; a constant raster is mid-gray.
pub fn encode_pgm(width: usize, height: usize, values: &[f64]) -> Vec<u8> {
    assert_eq!(values.len(), width * height);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(values.iter().map(|&v| {
        if hi > lo {
            (255.0 * (v - lo) / (hi - lo)).round() as u8
        } else {
            128
        }
    }));
    out
}

/// Row-major raster of a node vector on the `(n1+1) x (n2+1)` node grid.
pub fn node_raster(n1: usize, n2: usize, v: &[f64]) -> (usize, usize, Vec<f64>) {
    let (h, w) = (n1 + 1, n2 + 1);
    let mut r = vec![0.0; h * w];
    for c in 0..w {
        for s in 0..h {
            r[s * w + c] = v[c * h + s];
        }
    }
    (w, h, r)
}

/// Row-major raster of an element vector on the `n1 x n2` element grid.
pub fn element_raster(n1: usize, n2: usize, v: &[f64]) -> (usize, usize, Vec<f64>) {
    let mut r = vec![0.0; n1 * n2];
    for c in 0..n2 {
        for s in 0..n1 {
            r[s * n2 + c] = v[c * n1 + s];
        }
    }
    (n2, n1, r)
}

/// Writes `name.pgm` and `name.csv` for a raster.
pub fn write_raster(dir: &Path, name: &str, width: usize, height: usize, values: &[f64]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let pgm = dir.join(format!("{name}.pgm"));
    std::fs::write(&pgm, encode_pgm(width, height, values)).map_err(|e| Error::io(&pgm, e))?;
    let csv_path = dir.join(format!("{name}.csv"));
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| csv_error(&csv_path, e))?;
    for r in values.chunks(width) {
        w.write_record(r.iter().map(|v| v.to_string()))
            .map_err(|e| csv_error(&csv_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    Ok(())
}

/// Reads a headerless numeric CSV grid back into a row-major raster.
pub fn read_raster_csv(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let (mut width, mut height, mut values) = (0, 0, Vec::new());
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        width = rec.len();
        height += 1;
        for f in rec.iter() {
            values.push(
                f.parse()
                    .map_err(|_| Error::format("csv", format!("bad number `{f}`")))?,
            );
        }
    }
    Ok((width, height, values))
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format("csv", format!("{}: {other:?}", path.display())),
    }
}
