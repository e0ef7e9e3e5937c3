//! Data model shared by every stage: transcripts, embedding sets, window
//! labels and the run configuration, plus their file formats.

mod io;

use std::collections::HashSet;
use std::fmt;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{
    load_embeddings, load_transcripts, parse_transcript_line, read_irad, save_embeddings,
    write_irad, EmbeddingFormat, IRAD_HEADER_LEN, IRAD_MAGIC, IRAD_VERSION,
};

/// One of the two time periods compared in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Previous,
    Current,
}

impl Window {
    pub fn as_str(self) -> &'static str {
        match self {
            Window::Previous => "previous",
            Window::Current => "current",
        }
    }

    pub(crate) fn to_byte(self) -> u8 {
        match self {
            Window::Previous => 0,
            Window::Current => 1,
        }
    }

    pub(crate) fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Window::Previous),
            1 => Some(Window::Current),
            _ => None,
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Customer,
    Agent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub speaker: Speaker,
    pub text: String,
    pub index: usize,
}

/// A customer/agent conversation. Construct through [`Transcript::new`] so
/// that `agent_first_index` always agrees with the speakers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub id: String,
    pub window: Window,
    pub sentences: Vec<Sentence>,
    pub agent_first_index: usize,
}

impl Transcript {
    /// Validates the speaker sequence and derives the agent's first sentence.
    pub fn new(id: String, window: Window, turns: Vec<(Speaker, String)>) -> Result<Self> {
        if !turns.iter().any(|(s, _)| *s == Speaker::Customer) {
            return Err(Error::NoCustomerSentence(id));
        }
        let agent_first_index = turns
            .iter()
            .position(|(s, _)| *s == Speaker::Agent)
            .ok_or_else(|| Error::NoAgentSentence(id.clone()))?;
        let sentences = turns
            .into_iter()
            .enumerate()
            .map(|(index, (speaker, text))| Sentence {
                speaker,
                text,
                index,
            })
            .collect();
        Ok(Transcript {
            id,
            window,
            sentences,
            agent_first_index,
        })
    }

    pub fn speakers(&self) -> Vec<Speaker> {
        self.sentences.iter().map(|s| s.speaker).collect()
    }
}

/// `N` labelled row vectors of dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    ids: Vec<String>,
    windows: Vec<Window>,
    matrix: Array2<f64>,
    texts: Vec<Option<String>>,
}

impl EmbeddingSet {
    pub fn new(
        ids: Vec<String>,
        windows: Vec<Window>,
        matrix: Array2<f64>,
        texts: Option<Vec<Option<String>>>,
    ) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() == 0 {
            return Err(Error::EmptySet);
        }
        if ids.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: ids.len(),
            });
        }
        if windows.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: windows.len(),
            });
        }
        let texts = match texts {
            Some(t) if t.len() != n => {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: t.len(),
                })
            }
            Some(t) => t.into_iter().map(|s| s.filter(|s| !s.is_empty())).collect(),
            None => vec![None; n],
        };
        let mut seen = HashSet::with_capacity(n);
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        for (row, id) in matrix.rows().into_iter().zip(&ids) {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue(id.clone()));
            }
        }
        let matrix = if matrix.is_standard_layout() {
            matrix
        } else {
            matrix.as_standard_layout().into_owned()
        };
        Ok(EmbeddingSet {
            ids,
            windows,
            matrix,
            texts,
        })
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn windows(&self) -> &[Window] {
        &self.windows
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.matrix.row(i)
    }

    pub fn texts(&self) -> &[Option<String>] {
        &self.texts
    }

    pub fn text(&self, i: usize) -> Option<&str> {
        self.texts[i].as_deref()
    }

    pub fn has_texts(&self) -> bool {
        self.texts.iter().any(Option::is_some)
    }

    pub fn count_window(&self, w: Window) -> usize {
        self.windows.iter().filter(|&&x| x == w).count()
    }

    /// Same labels, new coordinates. The caller guarantees `matrix` has the
    /// same number of rows.
    pub fn with_matrix(&self, matrix: Array2<f64>) -> Result<Self> {
        EmbeddingSet::new(
            self.ids.clone(),
            self.windows.clone(),
            matrix,
            Some(self.texts.clone()),
        )
    }

    /// Concatenate two sets, forcing every row of `previous` into the
    /// previous window and every row of `current` into the current one.
    pub fn from_windows(previous: EmbeddingSet, current: EmbeddingSet) -> Result<Self> {
        if previous.dim() != current.dim() {
            let id = current.ids.first().cloned().unwrap_or_default();
            return Err(Error::DimensionMismatch(id));
        }
        let matrix = ndarray::concatenate(
            ndarray::Axis(0),
            &[previous.matrix.view(), current.matrix.view()],
        )
        .expect("column counts checked above");
        let n_prev = previous.len();
        let n_cur = current.len();
        let mut ids = previous.ids;
        ids.extend(current.ids);
        let mut windows = vec![Window::Previous; n_prev];
        windows.extend(std::iter::repeat_n(Window::Current, n_cur));
        let mut texts = previous.texts;
        texts.extend(current.texts);
        EmbeddingSet::new(ids, windows, matrix, Some(texts))
    }
}

/// Hyperparameters of a detection run. Defaults reproduce the published
/// configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Cosine threshold for an edge.
    pub alpha: f64,
    /// Attenuation per extra hop.
    pub beta: f64,
    /// gamma = gamma_fraction * max matched centrality.
    pub gamma_fraction: f64,
    /// Tagging window half-width around the agent's first sentence.
    pub tag_window_n: usize,
    pub cluster_radius: u32,
    pub cluster_separation: u32,
    pub top_k: usize,
    /// `None` means unbounded BFS.
    pub max_bfs_depth: Option<u32>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            alpha: 0.7,
            beta: 0.5,
            gamma_fraction: 0.1,
            tag_window_n: 2,
            cluster_radius: 3,
            cluster_separation: 4,
            top_k: 10,
            max_bfs_depth: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad(format!("beta must lie in (0, 1), got {}", self.beta));
        }
        if !(self.gamma_fraction > 0.0 && self.gamma_fraction <= 1.0) {
            return bad(format!(
                "gamma_fraction must lie in (0, 1], got {}",
                self.gamma_fraction
            ));
        }
        if self.cluster_radius == 0 {
            return bad("cluster_radius must be positive".into());
        }
        if self.cluster_separation <= self.cluster_radius {
            return bad(format!(
                "cluster_separation ({}) must exceed cluster_radius ({})",
                self.cluster_separation, self.cluster_radius
            ));
        }
        if self.top_k == 0 {
            return bad("top_k must be positive".into());
        }
        if self.max_bfs_depth == Some(0) {
            return bad("max_bfs_depth must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn transcript_derives_agent_index() {
        let t = Transcript::new(
            "t".into(),
            Window::Current,
            vec![
                (Speaker::Customer, "a".into()),
                (Speaker::Customer, "b".into()),
                (Speaker::Agent, "c".into()),
                (Speaker::Agent, "d".into()),
            ],
        )
        .unwrap();
        assert_eq!(t.agent_first_index, 2);
        assert_eq!(t.sentences[3].index, 3);
    }

    #[test]
    fn transcript_without_agent() {
        let err = Transcript::new(
            "x".into(),
            Window::Current,
            vec![(Speaker::Customer, "a".into())],
        )
        .unwrap_err();
        assert!(matches!(err, Error::NoAgentSentence(id) if id == "x"));
    }

    #[test]
    fn set_rejects_duplicates_and_nan() {
        let m = array![[1.0, 0.0], [0.0, 1.0]];
        let w = vec![Window::Current; 2];
        let err = EmbeddingSet::new(vec!["a".into(), "a".into()], w.clone(), m, None).unwrap_err();
        assert!(matches!(err, Error::DuplicateId(_)));

        let m = array![[1.0, f64::NAN], [0.0, 1.0]];
        let err = EmbeddingSet::new(vec!["a".into(), "b".into()], w, m, None).unwrap_err();
        assert!(matches!(err, Error::NonFiniteValue(id) if id == "a"));
    }

    #[test]
    fn from_windows_relabels() {
        let a = EmbeddingSet::new(
            vec!["a".into()],
            vec![Window::Current],
            array![[1.0, 2.0]],
            None,
        )
        .unwrap();
        let b = EmbeddingSet::new(
            vec!["b".into()],
            vec![Window::Previous],
            array![[3.0, 4.0]],
            None,
        )
        .unwrap();
        let s = EmbeddingSet::from_windows(a, b).unwrap();
        assert_eq!(s.windows(), &[Window::Previous, Window::Current]);
        assert_eq!(s.row(1).to_vec(), vec![3.0, 4.0]);
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.alpha, 0.7);
        assert_eq!(cfg.beta, 0.5);
        assert_eq!(cfg.gamma_fraction, 0.1);
        assert_eq!(cfg.tag_window_n, 2);
        assert_eq!((cfg.cluster_radius, cfg.cluster_separation), (3, 4));
        cfg.validate().unwrap();

        let bad = RunConfig {
            cluster_separation: 3,
            ..RunConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = RunConfig {
            beta: 1.0,
            ..RunConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn config_json_partial() {
        let cfg: RunConfig = serde_json::from_str(r#"{"alpha": 0.8}"#).unwrap();
        assert_eq!(cfg.alpha, 0.8);
        assert_eq!(cfg.beta, 0.5);
        assert!(serde_json::from_str::<RunConfig>(r#"{"alpah": 0.8}"#).is_err());
    }
}
