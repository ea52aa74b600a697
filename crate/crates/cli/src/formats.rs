//! Input and output file formats.
//!
//! Inputs are comma-separated with a header row. Curves, paths and study
//! rows are written as tab-separated text for plotting tools.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use lassocd_core::simgen::{ReplicateOutcome, StudySummary};
use lassocd_core::tuning::{CvCurvePoint, TuningValue};
use lassocd_core::{DesignMatrix, GroupStructure, ParameterVector};

/// Name used for the intercept row of a coefficient table.
pub const INTERCEPT: &str = "(intercept)";

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("cannot open")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("line {line}: {message}")]
    Line { line: u64, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] lassocd_core::Error),
}

pub type Result<T> = std::result::Result<T, FormatError>;

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Which input column holds the response: a header name, or a 0-based
/// index when no header matches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseColumn(pub String);

impl ResponseColumn {
    fn resolve(&self, header: &[String]) -> Result<usize> {
        if let Some(i) = header.iter().position(|h| *h == self.0) {
            return Ok(i);
        }
        match self.0.parse::<usize>() {
            Ok(i) if i < header.len() => Ok(i),
            _ => Err(FormatError::Invalid(format!("no response column '{}' in header", self.0))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub header: Vec<String>,
    pub response: String,
    /// Predictor columns in file order, named after the header.
    pub x: DesignMatrix,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn predictor_names(&self) -> &[String] {
        self.x.names().unwrap_or(&[])
    }
}

pub fn read_dataset(path: &Path, response: &ResponseColumn) -> Result<Dataset> {
    parse_dataset(open(path)?, response)
}

pub fn parse_dataset<R: Read>(reader: R, response: &ResponseColumn) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.len() < 2 {
        return Err(FormatError::Invalid("need a response and at least one predictor column".into()));
    }
    let ri = response.resolve(&header)?;
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); header.len() - 1];
    let mut y = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let mut c = 0;
        for (j, field) in record.iter().enumerate() {
            let v = parse_number(field).map_err(|message| FormatError::Line {
                line,
                message: format!("column '{}': {message}", header[j]),
            })?;
            if j == ri {
                y.push(v);
            } else {
                columns[c].push(v);
                c += 1;
            }
        }
    }
    if y.is_empty() {
        return Err(FormatError::Invalid("no data rows".into()));
    }
    let names: Vec<String> = header.iter().enumerate().filter(|&(j, _)| j != ri).map(|(_, h)| h.clone()).collect();
    let x = DesignMatrix::from_columns(columns)?.with_names(names)?;
    Ok(Dataset {
        response: header[ri].clone(),
        header,
        x,
        y,
    })
}

fn parse_number(field: &str) -> std::result::Result<f64, String> {
    if field.is_empty() {
        return Err("missing value".into());
    }
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(format!("non-finite value '{field}'")),
        Err(_) => Err(format!("not a number: '{field}'")),
    }
}

/// Reads a `predictor,group` table. Group labels are numbered in order of
/// first appearance along the predictor order. Every predictor must be
/// listed exactly once.
pub fn read_groups(path: &Path, predictors: &[String]) -> Result<GroupStructure> {
    parse_groups(open(path)?, predictors)
}

pub fn parse_groups<R: Read>(reader: R, predictors: &[String]) -> Result<GroupStructure> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let mut label_of: HashMap<String, String> = HashMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(FormatError::Line {
                line,
                message: "expected predictor,group".into(),
            });
        }
        if label_of.insert(record[0].to_string(), record[1].to_string()).is_some() {
            return Err(FormatError::Line {
                line,
                message: format!("predictor '{}' listed twice", &record[0]),
            });
        }
    }
    if let Some(extra) = label_of.keys().find(|k| !predictors.contains(k)) {
        return Err(FormatError::Invalid(format!("group file names unknown predictor '{extra}'")));
    }
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut assignment = Vec::with_capacity(predictors.len());
    for name in predictors {
        let label = label_of
            .get(name)
            .ok_or_else(|| FormatError::Invalid(format!("predictor '{name}' has no group")))?;
        let next = index.len();
        assignment.push(*index.entry(label.as_str()).or_insert(next));
    }
    Ok(GroupStructure::new(assignment)?)
}

/// Writes `name,coefficient,active` rows, intercept first.
pub fn write_coefficients<W: Write>(w: W, names: &[String], theta: &ParameterVector, active: &[bool]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["name", "coefficient", "active"])?;
    wtr.write_record([INTERCEPT, &theta.mu.to_string(), "1"])?;
    for ((name, b), &a) in names.iter().zip(&theta.beta).zip(active) {
        wtr.write_record([name.as_str(), &b.to_string(), if a { "1" } else { "0" }])?;
    }
    wtr.flush().map_err(|source| FormatError::Io {
        path: "coefficients".into(),
        source,
    })?;
    Ok(())
}

/// Reads a coefficient table back as parameters over `names`. Predictors
/// missing from the table start at 0.
pub fn read_coefficients(path: &Path, names: &[String]) -> Result<ParameterVector> {
    parse_coefficients(open(path)?, names)
}

pub fn parse_coefficients<R: Read>(reader: R, names: &[String]) -> Result<ParameterVector> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let slot: HashMap<&str, usize> = names.iter().enumerate().map(|(k, n)| (n.as_str(), k)).collect();
    let mut theta = ParameterVector::zeros(names.len());
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() < 2 {
            return Err(FormatError::Line {
                line,
                message: "expected name,coefficient".into(),
            });
        }
        let v = parse_number(&record[1]).map_err(|message| FormatError::Line { line, message })?;
        match (&record[0], slot.get(&record[0])) {
            (INTERCEPT, _) => theta.mu = v,
            (_, Some(&k)) => theta.beta[k] = v,
            (name, None) => {
                return Err(FormatError::Line {
                    line,
                    message: format!("unknown predictor '{name}'"),
                })
            }
        }
    }
    Ok(theta)
}

fn tsv<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().delimiter(b'\t').from_writer(w)
}

fn finish<W: Write>(mut wtr: csv::Writer<W>) -> Result<()> {
    wtr.flush().map_err(|source| FormatError::Io {
        path: "table".into(),
        source,
    })
}

fn lambda_header(value: TuningValue) -> Vec<String> {
    match value {
        TuningValue::Lasso(_) => vec!["lambda".into()],
        TuningValue::Group { .. } => vec!["lambda1".into(), "lambda2".into()],
    }
}

fn lambda_fields(value: TuningValue) -> Vec<String> {
    match value {
        TuningValue::Lasso(l) => vec![l.to_string()],
        TuningValue::Group { lambda1, lambda2 } => vec![lambda1.to_string(), lambda2.to_string()],
    }
}

/// Cross-validation curve: tuning constants, `cv_error`, `mean_nonzero`,
/// `unconverged_folds`, then one column per fold.
pub fn write_curve<W: Write>(w: W, points: &[CvCurvePoint]) -> Result<()> {
    let mut wtr = tsv(w);
    let Some(first) = points.first() else {
        return Err(FormatError::Invalid("empty curve".into()));
    };
    let mut header = lambda_header(first.lambda);
    header.extend(["cv_error", "mean_nonzero", "unconverged_folds"].map(String::from));
    header.extend((1..=first.per_fold_errors.len()).map(|f| format!("fold_{f}")));
    wtr.write_record(&header)?;
    for p in points {
        let mut row = lambda_fields(p.lambda);
        row.push(p.cv_error.to_string());
        row.push(p.mean_nonzero.to_string());
        row.push(p.unconverged_folds.to_string());
        row.extend(p.per_fold_errors.iter().map(f64::to_string));
        wtr.write_record(&row)?;
    }
    finish(wtr)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathRow {
    pub lambda: TuningValue,
    pub objective: f64,
    pub n_nonzero: usize,
    pub cv_error: Option<f64>,
    pub train_error: f64,
    pub converged: bool,
}

pub fn write_path<W: Write>(w: W, rows: &[PathRow]) -> Result<()> {
    let mut wtr = tsv(w);
    let Some(first) = rows.first() else {
        return Err(FormatError::Invalid("empty path".into()));
    };
    let with_cv = first.cv_error.is_some();
    let mut header = lambda_header(first.lambda);
    header.extend(["objective", "n_nonzero"].map(String::from));
    if with_cv {
        header.push("cv_error".into());
    }
    header.extend(["train_error", "converged"].map(String::from));
    wtr.write_record(&header)?;
    for r in rows {
        let mut row = lambda_fields(r.lambda);
        row.push(r.objective.to_string());
        row.push(r.n_nonzero.to_string());
        if with_cv {
            row.push(r.cv_error.map_or_else(String::new, |c| c.to_string()));
        }
        row.push(r.train_error.to_string());
        row.push(u8::from(r.converged).to_string());
        wtr.write_record(&row)?;
    }
    finish(wtr)
}

fn lambda_scalar(value: TuningValue) -> String {
    match value {
        TuningValue::Lasso(l) => l.to_string(),
        TuningValue::Group { lambda1, lambda2 } => format!("{lambda1};{lambda2}"),
    }
}

/// One row per replicate. Failed replicates keep their index and seed and
/// carry the message in the last column.
pub fn write_study<W: Write>(w: W, rows: &[ReplicateOutcome]) -> Result<()> {
    let mut wtr = tsv(w);
    wtr.write_record([
        "replicate",
        "seed",
        "lambda",
        "lambda_test_opt",
        "cv_error",
        "error_true",
        "error_fit",
        "n_nonzero",
        "n_true",
        "time",
        "converged",
        "failure",
    ])?;
    for o in rows {
        let mut row = vec![o.replicate.to_string(), o.seed.to_string()];
        match &o.result {
            Ok(r) => {
                row.extend([
                    lambda_scalar(r.lambda_star),
                    r.lambda_test_opt.map_or_else(String::new, |l| l.to_string()),
                    r.cv_error.to_string(),
                    r.test_error_true.to_string(),
                    r.test_error_fit.to_string(),
                    r.n_nonzero.to_string(),
                    r.n_true.to_string(),
                    format!("{:.6}", r.fit_seconds),
                    u8::from(r.converged).to_string(),
                    String::new(),
                ]);
            }
            Err(e) => {
                row.extend(std::iter::repeat_n(String::new(), 9));
                row.push(e.replace(['\t', '\n'], " "));
            }
        }
        wtr.write_record(&row)?;
    }
    finish(wtr)
}

/// Study summary in the layout of a results table: each statistic followed
/// by its standard error.
pub fn write_summary<W: Write>(w: W, s: &StudySummary) -> Result<()> {
    let mut wtr = tsv(w);
    let mut header: Vec<String> = ["replicates", "failed", "unconverged"].map(String::from).to_vec();
    let mut row = vec![s.replicates.to_string(), s.failed.to_string(), s.unconverged.to_string()];
    let mut stats = vec![
        ("error_true", s.test_error_true),
        ("lambda", s.lambda_star),
        ("error_fit", s.test_error_fit),
        ("n_nonzero", s.n_nonzero),
        ("n_true", s.n_true),
        ("time", s.fit_seconds),
    ];
    if let Some(t) = s.lambda_test_opt {
        stats.push(("lambda_test_opt", t));
    }
    for (name, m) in stats {
        header.push(name.into());
        header.push(format!("{name}_se"));
        row.push(m.mean.to_string());
        row.push(m.se.to_string());
    }
    wtr.write_record(&header)?;
    wtr.write_record(&row)?;
    finish(wtr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn response_by_name_or_index() {
        let text = "a,y,b\n1,2,3\n4,5,6\n";
        let d = parse_dataset(text.as_bytes(), &ResponseColumn("y".into())).unwrap();
        assert_eq!(d.y, vec![2.0, 5.0]);
        assert_eq!(d.predictor_names(), &names(&["a", "b"])[..]);
        assert_eq!(d.x.column(1), &[3.0, 6.0]);
        let d = parse_dataset(text.as_bytes(), &ResponseColumn("0".into())).unwrap();
        assert_eq!(d.response, "a");
    }

    #[test]
    fn bad_rows_are_rejected() {
        let r = ResponseColumn("y".into());
        assert!(parse_dataset("x,y\n1,2\n3\n".as_bytes(), &r).is_err());
        assert!(parse_dataset("x,y\n1,\n".as_bytes(), &r).is_err());
        assert!(parse_dataset("x,y\n1,abc\n".as_bytes(), &r).is_err());
        assert!(parse_dataset("x,y\n".as_bytes(), &r).is_err());
        assert!(parse_dataset("y\n1\n".as_bytes(), &r).is_err());
        let e = parse_dataset("x,y\n1,2\n3,nan\n".as_bytes(), &r).unwrap_err();
        assert!(e.to_string().starts_with("line 3"), "{e}");
    }

    #[test]
    fn groups_follow_predictor_order() {
        let g = parse_groups("predictor,group\nc,B\na,A\nb,B\n".as_bytes(), &names(&["a", "b", "c"])).unwrap();
        assert_eq!(g.assignment(), &[0, 1, 1]);
        assert!(parse_groups("predictor,group\na,A\n".as_bytes(), &names(&["a", "b"])).is_err());
        assert!(parse_groups("predictor,group\na,A\nz,A\n".as_bytes(), &names(&["a"])).is_err());
    }

    #[test]
    fn coefficients_round_trip() {
        let n = names(&["a", "b"]);
        let theta = ParameterVector::new(0.1 + 0.2, vec![-1.0 / 3.0, 0.0]).unwrap();
        let mut buf = Vec::new();
        write_coefficients(&mut buf, &n, &theta, &[true, false]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("name,coefficient,active\n(intercept),"));
        let back = parse_coefficients(&buf[..], &n).unwrap();
        assert_eq!(back, theta);
    }
}
