//! Selection and estimation accuracy, and distances between selected sets.

use std::collections::BTreeSet;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionScore {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub f_measure: f64,
}

impl SelectionScore {
    pub fn total_error(&self) -> usize {
        self.fp + self.fn_
    }
}

fn set(xs: &[usize]) -> BTreeSet<usize> {
    xs.iter().copied().collect()
}

/// Counts against the true support and `F = 2TP / (2TP + FN + FP)`, taken
/// as 1 when both sets are empty.
pub fn selection_score(selected: &[usize], truth: &[usize]) -> SelectionScore {
    let (s, t) = (set(selected), set(truth));
    let tp = s.intersection(&t).count();
    let fp = s.len() - tp;
    let fn_ = t.len() - tp;
    let denom = 2 * tp + fp + fn_;
    let f_measure = if denom == 0 {
        1.0
    } else {
        2.0 * tp as f64 / denom as f64
    };
    SelectionScore {
        tp,
        fp,
        fn_,
        f_measure,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationScore {
    pub l1: f64,
    pub l2: f64,
    pub test_mse: f64,
}

/// Coefficient errors over the full length-`p` vectors.
pub fn estimation_score(estimate: &DVector<f64>, truth: &DVector<f64>, test_mse: f64) -> EstimationScore {
    let diff = estimate - truth;
    EstimationScore {
        l1: diff.lp_norm(1),
        l2: diff.norm(),
        test_mse,
    }
}

/// Size of the symmetric difference.
pub fn hamming(a: &[usize], b: &[usize]) -> usize {
    set(a).symmetric_difference(&set(b)).count()
}

/// `|A xor B| / |A u B|`, zero for two empty sets.
pub fn jaccard(a: &[usize], b: &[usize]) -> f64 {
    let (a, b) = (set(a), set(b));
    let union = a.union(&b).count();
    if union == 0 {
        0.0
    } else {
        a.symmetric_difference(&b).count() as f64 / union as f64
    }
}

/// Mean pairwise Jaccard distance between methods. `selections[r][m]` is the
/// set chosen by method `m` in repetition `r`.
pub fn disagreement_matrix(selections: &[Vec<Vec<usize>>]) -> Vec<Vec<f64>> {
    let methods = selections.first().map_or(0, Vec::len);
    let mut out = vec![vec![0.0; methods]; methods];
    if selections.is_empty() {
        return out;
    }
    for rep in selections {
        assert_eq!(rep.len(), methods, "every repetition needs one set per method");
        for a in 0..methods {
            for b in a + 1..methods {
                let d = jaccard(&rep[a], &rep[b]);
                out[a][b] += d;
                out[b][a] += d;
            }
        }
    }
    let r = selections.len() as f64;
    out.iter_mut().flatten().for_each(|v| *v /= r);
    out
}
