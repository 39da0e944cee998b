use crate::error::{domain, Result};

/// Item scores together with their descending order statistics.
///
/// Scores are expected to be normalized by the scoring function's
/// sensitivity, so one user moves each component by at most 1. Items are
/// 0-based indices; ranks are 1-based (`rank 1` is the best item). Equal
/// scores are ranked by ascending item index.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    raw: Vec<f64>,
    rank_to_index: Vec<usize>,
    index_to_rank: Vec<usize>,
    sorted: Vec<f64>,
}

impl ScoreVector {
    pub fn new(raw: Vec<f64>) -> Result<Self> {
        if raw.is_empty() {
            return domain("score vector is empty");
        }
        if let Some(i) = raw.iter().position(|x| !x.is_finite()) {
            return domain(format!("score {} at index {i} is not finite", raw[i]));
        }
        let mut rank_to_index: Vec<usize> = (0..raw.len()).collect();
        rank_to_index.sort_by(|&a, &b| raw[b].total_cmp(&raw[a]).then(a.cmp(&b)));
        let mut index_to_rank = vec![0; raw.len()];
        for (r, &i) in rank_to_index.iter().enumerate() {
            index_to_rank[i] = r + 1;
        }
        let sorted = rank_to_index.iter().map(|&i| raw[i]).collect();
        Ok(Self { raw, rank_to_index, index_to_rank, sorted })
    }

    /// Divides raw scores by `sensitivity` before ranking.
    pub fn normalized(raw: Vec<f64>, sensitivity: f64) -> Result<Self> {
        if !(sensitivity > 0.0) || !sensitivity.is_finite() {
            return domain(format!("sensitivity {sensitivity} must be positive"));
        }
        Self::new(raw.into_iter().map(|x| x / sensitivity).collect())
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    /// Scores in descending order, `sorted()[r - 1]` is the score at rank `r`.
    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn rank_to_index(&self) -> &[usize] {
        &self.rank_to_index
    }

    /// Score at 1-based rank `rank`.
    #[inline]
    pub fn order_stat(&self, rank: usize) -> f64 {
        self.sorted[rank - 1]
    }

    /// Item index holding 1-based rank `rank`.
    #[inline]
    pub fn item_at_rank(&self, rank: usize) -> usize {
        self.rank_to_index[rank - 1]
    }

    /// 1-based rank of item `index`.
    #[inline]
    pub fn rank_of(&self, index: usize) -> usize {
        self.index_to_rank[index]
    }

    /// The same vector translated by `c` in every component.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        Self::new(self.raw.iter().map(|x| x + c).collect())
    }

    /// Componentwise `raw + delta`.
    pub fn perturbed(&self, delta: &[f64]) -> Result<Self> {
        if delta.len() != self.len() {
            return domain(format!("perturbation has length {}, expected {}", delta.len(), self.len()));
        }
        Self::new(self.raw.iter().zip(delta).map(|(x, d)| x + d).collect())
    }
}
