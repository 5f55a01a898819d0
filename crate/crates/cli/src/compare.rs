//! Deviation report between CSV series on a common time grid.

use std::path::Path;

use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TolerancePolicy {
    /// `|a - b| <= abs_tol + rel_tol · max(|a|, |b|)`.
    Analytic,
    /// `|a - b| <= 3 sqrt(sa² + sb²) + abs_tol`.
    Mc3sigma,
}

/// One column of a CSV file and its standard errors (zero when absent).
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub t: Vec<f64>,
    pub value: Vec<f64>,
    pub stderr: Vec<f64>,
}

fn aliases(column: &str) -> Vec<String> {
    match column {
        "mean" | "mean_n" => vec!["mean".into(), "mean_n".into()],
        "var" | "var_n" => vec!["var".into(), "var_n".into()],
        other => vec![other.into()],
    }
}

fn stderr_column(column: &str) -> String {
    match column {
        "mean" | "mean_n" => "stderr".into(),
        "var" | "var_n" => "stderr_var".into(),
        other => format!("stderr_{other}"),
    }
}

impl Series {
    pub fn read(path: &Path, column: &str) -> Result<Self, CliError> {
        let err = |reason: String| CliError::SeriesRead {
            path: path.to_path_buf(),
            reason,
        };
        let mut rdr = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
        let headers = rdr.headers().map_err(|e| err(e.to_string()))?.clone();
        let find = |name: &str| headers.iter().position(|h| h == name);
        let t_col = find("t").ok_or_else(|| err("no t column".into()))?;
        let v_col = aliases(column)
            .iter()
            .find_map(|c| find(c))
            .ok_or_else(|| err(format!("no {column} column")))?;
        let s_col = find(&stderr_column(column));
        let mut s = Series {
            name: path.display().to_string(),
            t: Vec::new(),
            value: Vec::new(),
            stderr: Vec::new(),
        };
        for rec in rdr.records() {
            let rec = rec.map_err(|e| err(e.to_string()))?;
            let row = s.t.len() + 1;
            let num = |i: usize| -> Result<f64, CliError> {
                rec.get(i)
                    .unwrap_or("")
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| err(format!("row {row}: {e}")))
            };
            s.t.push(num(t_col)?);
            s.value.push(num(v_col)?);
            s.stderr.push(match s_col {
                Some(i) => num(i)?,
                None => 0.0,
            });
        }
        if s.t.is_empty() {
            return Err(err("no rows".into()));
        }
        if s.t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(err("t must be strictly increasing (one row per time)".into()));
        }
        Ok(s)
    }

    fn same_grid(&self, other: &Series) -> bool {
        self.t.len() == other.t.len()
            && self
                .t
                .iter()
                .zip(&other.t)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs())))
    }

    /// Linear interpolation onto `times`; `None` outside the covered range.
    fn resample(&self, times: &[f64]) -> Option<Series> {
        let mut value = Vec::with_capacity(times.len());
        let mut stderr = Vec::with_capacity(times.len());
        for &t in times {
            let j = self.t.partition_point(|&x| x < t);
            if j < self.t.len() && (self.t[j] - t).abs() <= 1e-12 * (1.0 + t.abs()) {
                value.push(self.value[j]);
                stderr.push(self.stderr[j]);
                continue;
            }
            if j == 0 || j == self.t.len() {
                return None;
            }
            let w = (t - self.t[j - 1]) / (self.t[j] - self.t[j - 1]);
            value.push(self.value[j - 1] + w * (self.value[j] - self.value[j - 1]));
            stderr.push(self.stderr[j - 1] + w * (self.stderr[j] - self.stderr[j - 1]));
        }
        Some(Series {
            name: self.name.clone(),
            t: times.to_vec(),
            value,
            stderr,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompareOptions {
    pub policy: TolerancePolicy,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub interpolate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointDeviation {
    pub t: f64,
    pub a: f64,
    pub b: f64,
    pub abs_dev: f64,
    /// `|a - b| / sqrt(sa² + sb²)`; infinite when both errors vanish.
    pub z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairReport {
    pub a: String,
    pub b: String,
    pub interpolated: bool,
    pub max_abs_dev: f64,
    pub max_z: f64,
    pub pass: bool,
    pub points: Vec<PointDeviation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub options: CompareOptions,
    pub pairs: Vec<PairReport>,
    pub pass: bool,
}

/// Grid both series are put on: the one with fewer points, ties broken by a
/// total order on the time vectors so the choice does not depend on argument
/// order.
fn coarser<'a>(a: &'a Series, b: &'a Series) -> &'a [f64] {
    let key = |s: &Series| s.t.len();
    match key(a).cmp(&key(b)) {
        std::cmp::Ordering::Less => &a.t,
        std::cmp::Ordering::Greater => &b.t,
        std::cmp::Ordering::Equal => {
            let ord = a
                .t
                .iter()
                .zip(&b.t)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal);
            if ord.is_le() {
                &a.t
            } else {
                &b.t
            }
        }
    }
}

fn compare_pair(a: &Series, b: &Series, opts: &CompareOptions) -> Result<PairReport, CliError> {
    let mismatch = || CliError::GridMismatch {
        a: a.name.clone(),
        b: b.name.clone(),
    };
    let (ra, rb, interpolated) = if a.same_grid(b) {
        (a.clone(), b.clone(), false)
    } else if opts.interpolate {
        let grid = coarser(a, b).to_vec();
        let ra = a.resample(&grid).ok_or_else(mismatch)?;
        let rb = b.resample(&grid).ok_or_else(mismatch)?;
        (ra, rb, true)
    } else {
        return Err(mismatch());
    };
    let mut points = Vec::with_capacity(ra.t.len());
    for i in 0..ra.t.len() {
        let (x, y) = (ra.value[i], rb.value[i]);
        let d = (x - y).abs();
        let sigma = ra.stderr[i].hypot(rb.stderr[i]);
        let z = if d == 0.0 { 0.0 } else { d / sigma };
        let pass = match opts.policy {
            TolerancePolicy::Analytic => d <= opts.abs_tol + opts.rel_tol * x.abs().max(y.abs()),
            TolerancePolicy::Mc3sigma => d <= 3.0 * sigma + opts.abs_tol,
        };
        points.push(PointDeviation {
            t: ra.t[i],
            a: x,
            b: y,
            abs_dev: d,
            z,
            pass,
        });
    }
    Ok(PairReport {
        a: a.name.clone(),
        b: b.name.clone(),
        interpolated,
        max_abs_dev: points.iter().map(|p| p.abs_dev).fold(0.0, f64::max),
        max_z: points.iter().map(|p| p.z).fold(0.0, f64::max),
        pass: points.iter().all(|p| p.pass),
        points,
    })
}

/// All pairs `(i, j)`, `i < j`.
pub fn compare(series: &[Series], opts: CompareOptions) -> Result<CompareReport, CliError> {
    if series.len() < 2 {
        return Err(CliError::TooFewSeries);
    }
    let mut pairs = Vec::new();
    for i in 0..series.len() {
        for j in i + 1..series.len() {
            pairs.push(compare_pair(&series[i], &series[j], &opts)?);
        }
    }
    let pass = pairs.iter().all(|p| p.pass);
    Ok(CompareReport {
        options: opts,
        pairs,
        pass,
    })
}

impl CompareReport {
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for p in &self.pairs {
            out.push_str(&format!(
                "{} {} vs {}: max |dev| {:.3e}, max z {:.2}{}\n",
                if p.pass { "PASS" } else { "FAIL" },
                p.a,
                p.b,
                p.max_abs_dev,
                p.max_z,
                if p.interpolated { " (interpolated)" } else { "" }
            ));
        }
        out
    }

    /// Long-format table: one row per pair and time.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["a", "b", "t", "value_a", "value_b", "abs_dev", "z", "pass"])
            .expect("in-memory write");
        for p in &self.pairs {
            for d in &p.points {
                w.write_record([
                    p.a.clone(),
                    p.b.clone(),
                    format!("{:?}", d.t),
                    format!("{:?}", d.a),
                    format!("{:?}", d.b),
                    format!("{:?}", d.abs_dev),
                    format!("{:?}", d.z),
                    d.pass.to_string(),
                ])
                .expect("in-memory write");
            }
        }
        w.into_inner().expect("in-memory flush")
    }
}
