//! svmlight and dense CSV readers and writers.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{FeatureMatrix, LabeledDataset, UnlabeledDataset};
use crate::error::{Error, Result};

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SvmlightOptions {
    /// Feature count; must cover the largest index in the file.
    pub n_cols: Option<usize>,
    /// Class count; must exceed the largest label.
    pub n_classes: Option<usize>,
}

/// Parsed svmlight content before it is turned into a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmlightFile {
    pub rows: Vec<Vec<(usize, f64)>>,
    /// `None` for lines that carry features only.
    pub labels: Vec<Option<usize>>,
    /// One past the largest 0-based column index seen.
    pub min_cols: usize,
    /// Lines whose indices had to be reordered.
    pub reordered_lines: Vec<usize>,
}

fn parse_label(token: &str) -> Option<i64> {
    if let Ok(v) = token.trim_start_matches('+').parse::<i64>() {
        return Some(v);
    }
    let v: f64 = token.parse().ok()?;
    (v.fract() == 0.0 && v.abs() < 1e15).then_some(v as i64)
}

/// Parse svmlight text: `label idx:val ...` with 1-based indices, `#`
/// comments and blank lines ignored.
///
/// Labels `-1`/`+1` become classes 0/1; other labels must be non-negative
/// integers and are kept. A file mixing `-1` with anything but `1` is
/// rejected.
pub fn parse_svmlight<R: BufRead>(reader: R, origin: &Path) -> Result<SvmlightFile> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut rows = Vec::new();
    let mut raw_labels: Vec<Option<i64>> = Vec::new();
    let mut label_lines = Vec::new();
    let mut min_cols = 0;
    let mut reordered_lines = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let lineno = n + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace().peekable();
        let label = match tokens.peek() {
            Some(t) if !t.contains(':') => {
                let t = tokens.next().expect("peeked");
                Some(parse_label(t).ok_or_else(|| err(lineno, format!("bad label `{t}`")))?)
            }
            _ => None,
        };
        let mut entries = Vec::new();
        for t in tokens {
            let (idx, val) = t
                .split_once(':')
                .ok_or_else(|| err(lineno, format!("expected index:value, found `{t}`")))?;
            if idx == "qid" {
                continue;
            }
            let idx: usize = idx
                .parse()
                .map_err(|_| err(lineno, format!("bad feature index `{idx}`")))?;
            if idx == 0 {
                return Err(err(lineno, "feature indices start at 1".into()));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| err(lineno, format!("bad feature value `{val}`")))?;
            if !val.is_finite() {
                return Err(err(lineno, format!("non-finite feature value `{val}`")));
            }
            entries.push((idx - 1, val));
        }
        if entries.windows(2).any(|w| w[0].0 >= w[1].0) {
            reordered_lines.push(lineno);
        }
        if let Some(&(j, _)) = entries.iter().max_by_key(|e| e.0) {
            min_cols = min_cols.max(j + 1);
        }
        rows.push(entries);
        raw_labels.push(label);
        label_lines.push(lineno);
    }
    if !reordered_lines.is_empty() {
        log::warn!(
            "{}: {} lines had non-ascending indices and were reordered",
            origin.display(),
            reordered_lines.len()
        );
    }

    let signed = raw_labels.iter().flatten().any(|&l| l == -1);
    let mut labels = Vec::with_capacity(raw_labels.len());
    for (raw, &lineno) in raw_labels.iter().zip(&label_lines) {
        labels.push(match *raw {
            None => None,
            Some(-1) => Some(0),
            Some(1) if signed => Some(1),
            Some(l) if signed => {
                return Err(err(lineno, format!("label {l} in a file of -1/+1 labels")));
            }
            Some(l) if l >= 0 => Some(l as usize),
            Some(l) => return Err(err(lineno, format!("negative label {l}"))),
        });
    }
    Ok(SvmlightFile {
        rows,
        labels,
        min_cols,
        reordered_lines,
    })
}

impl SvmlightFile {
    fn features(&self, opts: &SvmlightOptions) -> Result<FeatureMatrix> {
        let n_cols = match opts.n_cols {
            Some(d) if d < self.min_cols => {
                return Err(Error::ColumnOutOfRange {
                    index: self.min_cols - 1,
                    n_cols: d,
                })
            }
            Some(d) => d,
            None => self.min_cols,
        };
        FeatureMatrix::sparse(n_cols, self.rows.iter().cloned())
    }

    pub fn into_labeled(self, opts: &SvmlightOptions, origin: &Path) -> Result<LabeledDataset> {
        let mut labels = Vec::with_capacity(self.labels.len());
        for (i, l) in self.labels.iter().enumerate() {
            labels.push(l.ok_or_else(|| Error::Parse {
                path: origin.to_path_buf(),
                line: 0,
                message: format!("row {} has no label", i + 1),
            })?);
        }
        let inferred = labels.iter().max().map_or(2, |&m| (m + 1).max(2));
        let n_classes = opts.n_classes.unwrap_or(inferred);
        LabeledDataset::new(self.features(opts)?, labels, n_classes)
    }

    /// Features only; any labels present are dropped.
    pub fn into_unlabeled(self, opts: &SvmlightOptions) -> Result<UnlabeledDataset> {
        Ok(UnlabeledDataset::new(self.features(opts)?))
    }
}

pub fn read_svmlight(path: &Path) -> Result<SvmlightFile> {
    parse_svmlight(open(path)?, path)
}

pub fn read_svmlight_labeled(path: &Path, opts: &SvmlightOptions) -> Result<LabeledDataset> {
    read_svmlight(path)?.into_labeled(opts, path)
}

pub fn read_svmlight_unlabeled(path: &Path, opts: &SvmlightOptions) -> Result<UnlabeledDataset> {
    read_svmlight(path)?.into_unlabeled(opts)
}

/// Write rows as svmlight with 1-based indices. Without labels, lines hold
/// features only, and an all-zero row is written as `1:0`.
pub fn write_svmlight_to<W: Write>(
    mut out: W,
    features: &FeatureMatrix,
    labels: Option<&[usize]>,
) -> std::io::Result<()> {
    for (i, row) in features.rows().enumerate() {
        let mut line = String::new();
        if let Some(l) = labels {
            line.push_str(&l[i].to_string());
        }
        row.for_each(|j, v| {
            if v != 0.0 {
                if !line.is_empty() {
                    line.push(' ');
                }
                line.push_str(&format!("{}:{}", j + 1, v));
            }
        });
        if line.is_empty() {
            // an empty line would be skipped on reading; keep the row
            line.push_str("1:0");
        }
        writeln!(out, "{line}")?;
    }
    out.flush()
}

pub fn write_svmlight(
    path: &Path,
    features: &FeatureMatrix,
    labels: Option<&[usize]>,
) -> Result<()> {
    if let Some(l) = labels {
        if l.len() != features.n_rows() {
            return Err(Error::LengthMismatch {
                expected: features.n_rows(),
                actual: l.len(),
            });
        }
    }
    write_svmlight_to(create(path)?, features, labels).map_err(|e| Error::io(path, e))
}

/// Which CSV column holds the labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CsvOptions {
    /// `None` detects a header: the first record is one if any of its
    /// feature cells is not a number.
    pub has_header: Option<bool>,
    pub label: Option<LabelColumn>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvData {
    pub features: FeatureMatrix,
    pub labels: Option<Vec<usize>>,
    /// Original label text of each class index.
    pub label_names: Vec<String>,
    pub header: Option<Vec<String>>,
}

impl CsvData {
    pub fn n_classes(&self) -> usize {
        self.label_names.len().max(2)
    }

    pub fn into_labeled(self) -> Result<LabeledDataset> {
        let k = self.n_classes();
        let labels = self
            .labels
            .ok_or_else(|| Error::invalid("CSV has no label column"))?;
        LabeledDataset::new(self.features, labels, k)
    }
}

/// Class indices for label cells: non-negative integers are kept as they
/// are, anything else is numbered by first appearance.
fn map_labels(cells: &[String]) -> (Vec<usize>, Vec<String>) {
    let numeric: Option<Vec<usize>> = cells.iter().map(|c| c.trim().parse().ok()).collect();
    if let Some(nums) = numeric {
        let k = nums.iter().max().map_or(0, |&m| m + 1);
        return (nums, (0..k).map(|c| c.to_string()).collect());
    }
    let mut names: Vec<String> = Vec::new();
    let labels = cells
        .iter()
        .map(|c| match names.iter().position(|n| n == c) {
            Some(p) => p,
            None => {
                names.push(c.clone());
                names.len() - 1
            }
        })
        .collect();
    (labels, names)
}

pub fn parse_dense_csv<R: std::io::Read>(
    reader: R,
    origin: &Path,
    opts: &CsvOptions,
) -> Result<CsvData> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        records.push((line, rec));
    }
    let Some((_, first)) = records.first() else {
        return Ok(CsvData {
            features: FeatureMatrix::empty(0),
            labels: None,
            label_names: Vec::new(),
            header: None,
        });
    };
    let width = first.len();
    let label_index = |header: Option<&csv::StringRecord>| -> Result<Option<usize>> {
        match &opts.label {
            None => Ok(None),
            Some(LabelColumn::Index(i)) if *i < width => Ok(Some(*i)),
            Some(LabelColumn::Index(i)) => Err(Error::ColumnOutOfRange {
                index: *i,
                n_cols: width,
            }),
            Some(LabelColumn::Name(name)) => header
                .and_then(|h| h.iter().position(|c| c.trim() == name))
                .map(Some)
                .ok_or_else(|| Error::invalid(format!("no column named `{name}`"))),
        }
    };
    let has_header = match opts.has_header {
        Some(h) => h,
        None => {
            let guess = match &opts.label {
                Some(LabelColumn::Index(i)) => Some(*i),
                _ => None,
            };
            matches!(opts.label, Some(LabelColumn::Name(_)))
                || first
                    .iter()
                    .enumerate()
                    .any(|(j, c)| Some(j) != guess && c.trim().parse::<f64>().is_err())
        }
    };
    let (header, body) = if has_header {
        (Some(first.clone()), &records[1..])
    } else {
        (None, &records[..])
    };
    let label_col = label_index(header.as_ref())?;
    let d = width - usize::from(label_col.is_some());
    let mut values = Vec::with_capacity(body.len() * d);
    let mut label_cells = Vec::new();
    for (line, rec) in body {
        if rec.len() != width {
            return Err(err(
                *line,
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        for (j, cell) in rec.iter().enumerate() {
            if Some(j) == label_col {
                label_cells.push(cell.trim().to_string());
                continue;
            }
            let v: f64 = cell.trim().parse().map_err(|_| {
                err(
                    *line,
                    format!("non-numeric cell `{cell}` in column {}", j + 1),
                )
            })?;
            if !v.is_finite() {
                return Err(err(
                    *line,
                    format!("non-finite cell `{cell}` in column {}", j + 1),
                ));
            }
            values.push(v);
        }
    }
    let features = FeatureMatrix::dense(body.len(), d, values)?;
    let (labels, label_names) = match label_col {
        Some(_) => {
            let (l, n) = map_labels(&label_cells);
            (Some(l), n)
        }
        None => (None, Vec::new()),
    };
    Ok(CsvData {
        features,
        labels,
        label_names,
        header: header.map(|h| h.iter().map(str::to_string).collect()),
    })
}

pub fn read_dense_csv(path: &Path, opts: &CsvOptions) -> Result<CsvData> {
    parse_dense_csv(open(path)?, path, opts)
}

/// Write features with a header `f0,f1,...` and, when labels are given, a
/// trailing `label` column holding `label_names[class]` (or the class index
/// when no names are given).
pub fn write_dense_csv_to<W: Write>(
    out: W,
    features: &FeatureMatrix,
    labels: Option<(&[usize], &[String])>,
) -> Result<()> {
    let d = features.n_cols();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
    if labels.is_some() {
        header.push("label".into());
    }
    w.write_record(&header)?;
    for (i, row) in features.rows().enumerate() {
        let mut rec: Vec<String> = row.to_dense(d).iter().map(|v| v.to_string()).collect();
        if let Some((l, names)) = labels {
            rec.push(names.get(l[i]).cloned().unwrap_or_else(|| l[i].to_string()));
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("csv output", e))?;
    Ok(())
}

pub fn write_dense_csv(
    path: &Path,
    features: &FeatureMatrix,
    labels: Option<(&[usize], &[String])>,
) -> Result<()> {
    if let Some((l, _)) = labels {
        if l.len() != features.n_rows() {
            return Err(Error::LengthMismatch {
                expected: features.n_rows(),
                actual: l.len(),
            });
        }
    }
    write_dense_csv_to(create(path)?, features, labels)
}

/// Known on-disk formats, chosen by extension: `.csv` is dense CSV, anything
/// else svmlight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Svmlight,
    Csv,
}

impl Format {
    pub fn of(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Svmlight,
        }
    }
}

/// A labeled file of either format, with the class names that were found.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedLabeled {
    pub dataset: LabeledDataset,
    pub label_names: Vec<String>,
}

pub fn load_labeled(
    path: &Path,
    label: Option<&LabelColumn>,
    n_cols: Option<usize>,
) -> Result<LoadedLabeled> {
    match Format::of(path) {
        Format::Svmlight => {
            let opts = SvmlightOptions {
                n_cols,
                n_classes: None,
            };
            let dataset = read_svmlight_labeled(path, &opts)?;
            let label_names = (0..dataset.n_classes()).map(|c| c.to_string()).collect();
            Ok(LoadedLabeled {
                dataset,
                label_names,
            })
        }
        Format::Csv => {
            let opts = CsvOptions {
                has_header: None,
                label: Some(label.cloned().unwrap_or(LabelColumn::Name("label".into()))),
            };
            let data = read_dense_csv(path, &opts)?;
            let label_names = data.label_names.clone();
            Ok(LoadedLabeled {
                dataset: data.into_labeled()?,
                label_names,
            })
        }
    }
}

/// Feature rows of either format; labels in the file, if any, are dropped.
pub fn load_unlabeled(
    path: &Path,
    label: Option<&LabelColumn>,
    n_cols: Option<usize>,
) -> Result<UnlabeledDataset> {
    match Format::of(path) {
        Format::Svmlight => read_svmlight_unlabeled(
            path,
            &SvmlightOptions {
                n_cols,
                n_classes: None,
            },
        ),
        Format::Csv => {
            let opts = CsvOptions {
                has_header: None,
                label: label.cloned(),
            };
            Ok(UnlabeledDataset::new(read_dense_csv(path, &opts)?.features))
        }
    }
}

/// One label per line (class index, or a name resolved through `names`).
pub fn read_label_file(path: &Path, names: &[String]) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (n, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let t = line.split('#').next().unwrap_or("").trim();
        if t.is_empty() {
            continue;
        }
        let label = names
            .iter()
            .position(|s| s == t)
            .or_else(|| match parse_label(t) {
                Some(-1) => Some(0),
                Some(l) if l >= 0 => Some(l as usize),
                _ => None,
            })
            .ok_or_else(|| Error::Parse {
                path: PathBuf::from(path),
                line: n + 1,
                message: format!("unknown label `{t}`"),
            })?;
        out.push(label);
    }
    Ok(out)
}

pub fn write_label_file(path: &Path, labels: &[usize]) -> Result<()> {
    let mut w = create(path)?;
    for l in labels {
        writeln!(w, "{l}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
