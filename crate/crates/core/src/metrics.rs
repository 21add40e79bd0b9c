//! Ground-truth correspondence and window accuracy.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::trajectory::ObservationSet;

/// One-to-one correspondence between modality A and modality B ids.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<(String, String)>", into = "Vec<(String, String)>")]
pub struct GroundTruth {
    pairs: BTreeSet<(String, String)>,
}

impl TryFrom<Vec<(String, String)>> for GroundTruth {
    type Error = CoreError;

    fn try_from(v: Vec<(String, String)>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<GroundTruth> for Vec<(String, String)> {
    fn from(g: GroundTruth) -> Self {
        g.pairs.into_iter().collect()
    }
}

impl GroundTruth {
    pub fn new(pairs: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut out = BTreeSet::new();
        let mut seen_a = BTreeSet::new();
        let mut seen_b = BTreeSet::new();
        for (a, b) in pairs {
            if !seen_a.insert(a.clone()) || !seen_b.insert(b.clone()) {
                return Err(CoreError::Config(format!("ground truth is not one-to-one at ({a}, {b})")));
            }
            out.insert((a, b));
        }
        Ok(Self { pairs: out })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, a: &str, b: &str) -> bool {
        self.pairs.contains(&(a.to_string(), b.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &(String, String)> {
        self.pairs.iter()
    }

    /// B id matched to each A id.
    pub fn a_to_b(&self) -> BTreeMap<&str, &str> {
        self.pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect()
    }

    /// Pairs whose ids both occur as targets of the window.
    pub fn restrict(&self, a: &ObservationSet, b: &ObservationSet) -> Self {
        let pairs = self
            .pairs
            .iter()
            .filter(|(x, y)| a.index_of(x).is_some() && b.index_of(y).is_some())
            .cloned()
            .collect();
        Self { pairs }
    }

    /// Dense `N_A × N_B` 0/1 matrix in the windows' index order.
    pub fn matrix(&self, a: &ObservationSet, b: &ObservationSet) -> Vec<f64> {
        let mut t = vec![0.0; a.n() * b.n()];
        for (x, y) in &self.pairs {
            if let (Some(i), Some(j)) = (a.index_of(x), b.index_of(y)) {
                t[i * b.n() + j] = 1.0;
            }
        }
        t
    }
}

/// `|pred ∩ truth| / |truth| × 100`.
pub fn accuracy<'a>(pred: impl IntoIterator<Item = &'a (String, String)>, truth: &GroundTruth) -> Result<f64> {
    if truth.is_empty() {
        return Err(CoreError::EmptyTruth);
    }
    let hits = pred
        .into_iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .filter(|p| truth.pairs.contains(*p))
        .count();
    Ok(100.0 * hits as f64 / truth.len() as f64)
}
