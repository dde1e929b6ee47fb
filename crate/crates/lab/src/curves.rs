//! Aggregated experiment curves and their CSV form.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub x: f64,
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CurveTable {
    pub rows: Vec<CurveRow>,
}

/// Mean and standard error of the mean. A single sample has stderr 0.
pub fn mean_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Formats `v` with 10 significant digits, `%g` style.
pub fn format_sig(v: f64) -> String {
    const DIGITS: i32 = 10;
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if exp < -5 || exp >= DIGITS {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

impl CurveTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, label: &str, x: f64, samples: &[f64]) {
        let (mean, stderr) = mean_stderr(samples);
        self.rows.push(CurveRow { x, mean, stderr, n: samples.len(), label: label.to_string() });
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows ordered by label, then by `x`.
    pub fn sorted(&self) -> Vec<CurveRow> {
        let mut rows = self.rows.clone();
        rows.sort_by(|a, b| a.label.cmp(&b.label).then(a.x.total_cmp(&b.x)));
        rows
    }

    pub fn labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = self.rows.iter().map(|r| r.label.clone()).collect();
        labels.sort();
        labels.dedup();
        labels
    }

    /// `(x, mean)` points of one curve, sorted by `x`.
    pub fn curve(&self, label: &str) -> Vec<(f64, f64)> {
        self.sorted().into_iter().filter(|r| r.label == label).map(|r| (r.x, r.mean)).collect()
    }

    pub fn row(&self, label: &str, x: f64) -> Option<&CurveRow> {
        self.rows.iter().find(|r| r.label == label && r.x == x)
    }

    pub fn to_csv_string(&self) -> Result<String> {
        if self.is_empty() {
            bail!("refusing to write an empty curve table");
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["x", "mean", "stderr", "n", "label"])?;
        for r in self.sorted() {
            w.write_record([format_sig(r.x), format_sig(r.mean), format_sig(r.stderr), r.n.to_string(), r.label])?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }

    /// Writes the table; an empty table is an error and creates no file.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let text = self.to_csv_string()?;
        let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        f.write_all(text.as_bytes())?;
        Ok(())
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header != ["x", "mean", "stderr", "n", "label"] {
            bail!("unexpected curve header {header:?}");
        }
        let mut rows = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).with_context(|| format!("row {}: missing column {i}", line + 2));
            rows.push(CurveRow {
                x: field(0)?.parse()?,
                mean: field(1)?.parse()?,
                stderr: field(2)?.parse()?,
                n: field(3)?.parse()?,
                label: field(4)?.to_string(),
            });
        }
        Ok(Self { rows })
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_csv_str(&text)
    }
}

/// Linear interpolation of a sorted curve at `x`, `None` outside its range.
pub fn interpolate(curve: &[(f64, f64)], x: f64) -> Option<f64> {
    let first = curve.first()?;
    let last = curve.last()?;
    if x < first.0 || x > last.0 {
        return None;
    }
    let j = curve.partition_point(|p| p.0 < x);
    if j < curve.len() && curve[j].0 == x {
        return Some(curve[j].1);
    }
    let (x0, y0) = curve[j - 1];
    let (x1, y1) = curve[j];
    Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
}

/// Result of comparing several curves on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Collapse {
    /// Largest vertical distance between any two curves.
    pub max_gap: f64,
    /// `max - min` over all curve values.
    pub dynamic_range: f64,
    /// Where the largest gap occurs.
    pub at_x: f64,
}

impl Collapse {
    pub fn relative_gap(&self) -> f64 {
        if self.dynamic_range > 0.0 {
            self.max_gap / self.dynamic_range
        } else {
            0.0
        }
    }
}

/// Interpolates every curve onto the union of their `x` values within the
/// common range and reports the largest vertical gap.
pub fn collapse_gap(curves: &[Vec<(f64, f64)>]) -> Option<Collapse> {
    if curves.len() < 2 || curves.iter().any(|c| c.is_empty()) {
        return None;
    }
    let lo = curves.iter().map(|c| c[0].0).fold(f64::NEG_INFINITY, f64::max);
    let hi = curves.iter().map(|c| c[c.len() - 1].0).fold(f64::INFINITY, f64::min);
    if lo > hi {
        return None;
    }
    let mut grid: Vec<f64> = curves.iter().flatten().map(|p| p.0).filter(|&x| x >= lo && x <= hi).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let values = curves.iter().flatten().map(|p| p.1);
    let dynamic_range = values.clone().fold(f64::NEG_INFINITY, f64::max) - values.fold(f64::INFINITY, f64::min);
    let mut best = Collapse { max_gap: 0.0, dynamic_range, at_x: lo };
    for &x in &grid {
        let ys: Vec<f64> = curves.iter().filter_map(|c| interpolate(c, x)).collect();
        let gap = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - ys.iter().cloned().fold(f64::INFINITY, f64::min);
        if gap > best.max_gap {
            best.max_gap = gap;
            best.at_x = x;
        }
    }
    Some(best)
}
