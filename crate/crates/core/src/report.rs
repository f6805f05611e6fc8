//! Run reports: a human-readable key/value section followed by a fenced JSON
//! block.
//!
//! The JSON block carries everything except wall-clock timings, so two runs
//! of the same task produce byte-identical blocks. Timings live only in the
//! human section and are parsed back from there.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adapt::{AdremConfig, IterationTrace};
use crate::error::{Error, Result};
use crate::preprocess::{FitPopulation, Recipe};
use crate::select::{CvPlan, CvPoint};

const FENCE_OPEN: &str = "```json\n";
const FENCE_CLOSE: &str = "```";
const TIMING_PREFIX: &str = "timing_seconds.";

/// Where the data came from and how it was prepared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEcho {
    pub source: String,
    pub target: String,
    pub target_labels: Option<String>,
    pub recipe: Recipe,
    pub fit_population: FitPopulation,
}

/// How `C` was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum CSelection {
    Fixed,
    Cv {
        plan: CvPlan,
        table: Vec<CvPoint>,
        small_classes: Vec<usize>,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub load: f64,
    pub preprocess: f64,
    pub select_c: f64,
    pub adapt: f64,
    pub total: f64,
}

impl Timings {
    fn fields(&self) -> [(&'static str, f64); 5] {
        [
            ("load", self.load),
            ("preprocess", self.preprocess),
            ("select_c", self.select_c),
            ("adapt", self.adapt),
            ("total", self.total),
        ]
    }

    fn set(&mut self, name: &str, v: f64) -> bool {
        let slot = match name {
            "load" => &mut self.load,
            "preprocess" => &mut self.preprocess,
            "select_c" => &mut self.select_c,
            "adapt" => &mut self.adapt,
            "total" => &mut self.total,
            _ => return false,
        };
        *slot = v;
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub task: TaskEcho,
    /// Configuration used for adaptation; `config.c` is the value actually used.
    pub config: AdremConfig,
    pub c_selection: CSelection,
    pub member_seeds: Vec<u64>,
    pub predictions: Vec<usize>,
    /// Original label text of each class index.
    pub label_names: Vec<String>,
    /// Fraction of target rows predicted correctly; only with true labels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    pub degenerate_members: Vec<usize>,
    pub member_traces: Option<Vec<Vec<IterationTrace>>>,
    /// Rows an instance-mean scaler left unscaled, per domain.
    pub zero_mean_rows: (Vec<usize>, Vec<usize>),
    #[serde(skip)]
    pub timings: Timings,
}

impl RunReport {
    /// The fenced machine-readable block's JSON text.
    pub fn machine_block(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_text(&self) -> Result<String> {
        let mut s = String::new();
        let on_off = |b: bool| if b { "on" } else { "off" };
        let mode = match &self.c_selection {
            CSelection::Fixed => "fixed",
            CSelection::Cv { .. } => "cv",
        };
        // writing to a String cannot fail
        let _ = writeln!(s, "# adrem run report");
        let _ = writeln!(s, "source: {}", self.task.source);
        let _ = writeln!(s, "target: {}", self.task.target);
        let _ = writeln!(
            s,
            "target_labels: {}",
            self.task.target_labels.as_deref().unwrap_or("-")
        );
        let _ = writeln!(s, "recipe: {}", self.task.recipe);
        let _ = writeln!(s, "learner: {}", self.config.learner);
        let _ = writeln!(s, "c: {} ({mode})", self.config.c);
        if let CSelection::Cv { table, .. } = &self.c_selection {
            for p in table {
                let _ = writeln!(s, "cv.c={}: {}", p.c, p.mean_accuracy);
            }
        }
        let _ = writeln!(s, "iterations: {}", self.config.iterations);
        let _ = writeln!(s, "ensemble_size: {}", self.config.ensemble_size);
        let _ = writeln!(s, "balance: {}", on_off(self.config.balance));
        let _ = writeln!(s, "base_seed: {}", self.config.base_seed);
        let _ = writeln!(s, "n_target: {}", self.predictions.len());
        if let Some(a) = self.accuracy {
            let _ = writeln!(s, "accuracy: {a}");
        }
        let _ = writeln!(s, "degenerate_members: {}", self.degenerate_members.len());
        for (name, v) in self.timings.fields() {
            let _ = writeln!(s, "{TIMING_PREFIX}{name}: {v}");
        }
        s.push('\n');
        s.push_str(FENCE_OPEN);
        s.push_str(&self.machine_block()?);
        s.push('\n');
        s.push_str(FENCE_CLOSE);
        s.push('\n');
        Ok(s)
    }

    /// Parse a report written by [`RunReport::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let start = text
            .find(FENCE_OPEN)
            .ok_or_else(|| Error::Report("no machine-readable block".into()))?;
        let body = &text[start + FENCE_OPEN.len()..];
        let end = body
            .rfind(FENCE_CLOSE)
            .ok_or_else(|| Error::Report("unterminated machine-readable block".into()))?;
        let mut report: RunReport = serde_json::from_str(&body[..end])?;
        for line in text[..start].lines() {
            let Some(rest) = line.strip_prefix(TIMING_PREFIX) else {
                continue;
            };
            let (name, value) = rest
                .split_once(':')
                .ok_or_else(|| Error::Report(format!("bad timing line `{line}`")))?;
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Report(format!("bad timing value in `{line}`")))?;
            if !report.timings.set(name.trim(), v) {
                return Err(Error::Report(format!("unknown timing `{name}`")));
            }
        }
        Ok(report)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Extract just the machine block from report text.
pub fn machine_block_of(text: &str) -> Option<&str> {
    let start = text.find(FENCE_OPEN)? + FENCE_OPEN.len();
    let body = &text[start..];
    Some(&body[..body.rfind(FENCE_CLOSE)?])
}
