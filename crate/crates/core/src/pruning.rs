//! Mask construction from weight statistics and fixed-mask layers.
//!
//! Scores come from plain magnitude or from magnitude weighted by per-feature
//! calibration activation norms (Wanda). Masks follow either an N:M pattern
//! over contiguous column groups of each row, or an unstructured ratio ranked
//! over the whole matrix (or per row, when requested). Ties always keep the
//! entry with the smaller `(row, col)` index.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SppError};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SparsityPattern {
    /// Zero the `⌊ratio · count⌋` lowest-scoring entries. With `per_row`, the
    /// ranking and count apply to each row separately.
    Unstructured { ratio: f64, per_row: bool },
    /// Keep `n_keep` entries in every contiguous group of `m_group` columns.
    NofM { n_keep: usize, m_group: usize },
}

impl SparsityPattern {
    pub fn unstructured(ratio: f64) -> Result<Self> {
        let p = SparsityPattern::Unstructured {
            ratio,
            per_row: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn n_of_m(n_keep: usize, m_group: usize) -> Result<Self> {
        let p = SparsityPattern::NofM { n_keep, m_group };
        p.validate()?;
        Ok(p)
    }

    pub fn two_four() -> Self {
        SparsityPattern::NofM {
            n_keep: 2,
            m_group: 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SparsityPattern::Unstructured { ratio, .. } => {
                if !(0.0..1.0).contains(&ratio) {
                    return Err(SppError::pattern(format!(
                        "unstructured ratio must lie in [0, 1), got {ratio}"
                    )));
                }
            }
            SparsityPattern::NofM { n_keep, m_group } => {
                if n_keep == 0 || n_keep >= m_group {
                    return Err(SppError::pattern(format!(
                        "N:M requires 0 < N < M, got {n_keep}:{m_group}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn validate_for(&self, _rows: usize, cols: usize) -> Result<()> {
        self.validate()?;
        if let SparsityPattern::NofM { m_group, .. } = *self {
            if !cols.is_multiple_of(m_group) {
                return Err(SppError::pattern(format!(
                    "{cols} columns are not divisible by group size {m_group}"
                )));
            }
        }
        Ok(())
    }

    /// Number of zeros the pattern prescribes for a `rows×cols` matrix.
    pub fn expected_zeros(&self, rows: usize, cols: usize) -> usize {
        match *self {
            SparsityPattern::Unstructured { ratio, per_row } => {
                if per_row {
                    rows * zero_count(ratio, cols)
                } else {
                    zero_count(ratio, rows * cols)
                }
            }
            SparsityPattern::NofM { n_keep, m_group } => {
                rows * (cols / m_group) * (m_group - n_keep)
            }
        }
    }

    pub fn sidecar(&self) -> PatternSidecar {
        match *self {
            SparsityPattern::Unstructured { ratio, per_row } => PatternSidecar {
                pattern: "unstructured".into(),
                ratio,
                scope: per_row.then(|| "row".to_string()),
            },
            SparsityPattern::NofM { n_keep, m_group } => PatternSidecar {
                pattern: format!("{n_keep}:{m_group}"),
                ratio: (m_group - n_keep) as f64 / m_group as f64,
                scope: None,
            },
        }
    }

    pub fn from_sidecar(side: &PatternSidecar) -> Result<Self> {
        if side.pattern == "unstructured" {
            let p = SparsityPattern::Unstructured {
                ratio: side.ratio,
                per_row: side.scope.as_deref() == Some("row"),
            };
            p.validate()?;
            Ok(p)
        } else {
            side.pattern.parse()
        }
    }
}

/// `⌊ratio · count⌋`, computed so that exact products such as `0.75 · 10⁴` land
/// on the integer.
fn zero_count(ratio: f64, count: usize) -> usize {
    let exact = ratio * count as f64;
    let rounded = exact.round();
    if (exact - rounded).abs() <= 1e-9 * exact.abs().max(1.0) {
        rounded as usize
    } else {
        exact.floor() as usize
    }
}

impl fmt::Display for SparsityPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SparsityPattern::Unstructured { ratio, per_row } => {
                write!(f, "unstructured {:.2}%", ratio * 100.0)?;
                if per_row {
                    write!(f, " (row-wise)")?;
                }
                Ok(())
            }
            SparsityPattern::NofM { n_keep, m_group } => write!(f, "{n_keep}:{m_group}"),
        }
    }
}

impl FromStr for SparsityPattern {
    type Err = SppError;

    /// Parses `"N:M"`. Unstructured patterns need a ratio and are built with
    /// [`SparsityPattern::unstructured`].
    fn from_str(s: &str) -> Result<Self> {
        let (n, m) = s
            .split_once(':')
            .ok_or_else(|| SppError::pattern(format!("expected N:M, got `{s}`")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| SppError::pattern(format!("bad N:M pattern `{s}`")))
        };
        SparsityPattern::n_of_m(parse(n)?, parse(m)?)
    }
}

/// JSON sidecar stored next to masks: `{"pattern": "2:4" | "unstructured", "ratio": ρ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSidecar {
    pub pattern: String,
    pub ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMask {
    mask: Matrix,
    pattern: SparsityPattern,
}

impl SparseMask {
    /// Wraps a 0/1 matrix. Pattern compliance is not checked here; see [`verify_mask`].
    pub fn new(mask: Matrix, pattern: SparsityPattern) -> Result<Self> {
        if let Some(pos) = mask.iter().position(|&v| v != 0.0 && v != 1.0) {
            return Err(SppError::argument(format!(
                "mask entry at ({}, {}) is not 0 or 1",
                pos / mask.cols(),
                pos % mask.cols()
            )));
        }
        pattern.validate()?;
        Ok(SparseMask { mask, pattern })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.mask
    }

    pub fn pattern(&self) -> SparsityPattern {
        self.pattern
    }

    pub fn shape(&self) -> (usize, usize) {
        self.mask.shape()
    }

    pub fn nnz(&self) -> usize {
        self.mask.nnz()
    }

    pub fn is_kept(&self, row: usize, col: usize) -> bool {
        self.mask.get(row, col) != 0.0
    }
}

/// A frozen sparse weight `W ⊙ M` together with its mask.
#[derive(Debug, Clone, PartialEq)]
pub struct PrunedLayer {
    weight: Matrix,
    mask: SparseMask,
}

impl PrunedLayer {
    /// Checks shapes and that the weight is zero wherever the mask is zero.
    pub fn new(weight: Matrix, mask: SparseMask) -> Result<Self> {
        let layer = Self::from_parts_unverified(weight, mask)?;
        if let Some((r, c)) = layer.first_violation() {
            return Err(SppError::Invariant(format!(
                "weight is nonzero ({}) at masked position ({r}, {c})",
                layer.weight.get(r, c)
            )));
        }
        Ok(layer)
    }

    /// Checks shapes only, for loading possibly-corrupted checkpoints that are
    /// then inspected with [`verify_mask`].
    pub fn from_parts_unverified(weight: Matrix, mask: SparseMask) -> Result<Self> {
        if weight.shape() != mask.shape() {
            return Err(SppError::shape(format!(
                "weight {:?} vs mask {:?}",
                weight.shape(),
                mask.shape()
            )));
        }
        Ok(PrunedLayer { weight, mask })
    }

    /// A layer whose mask keeps everything.
    pub fn dense(weight: Matrix) -> Self {
        let (r, c) = weight.shape();
        let mask = SparseMask {
            mask: Matrix::ones(r, c),
            pattern: SparsityPattern::Unstructured {
                ratio: 0.0,
                per_row: false,
            },
        };
        PrunedLayer { weight, mask }
    }

    pub fn weight(&self) -> &Matrix {
        &self.weight
    }

    pub fn mask(&self) -> &SparseMask {
        &self.mask
    }

    /// Output features (rows of the weight).
    pub fn out_features(&self) -> usize {
        self.weight.rows()
    }

    /// Input features (columns of the weight).
    pub fn in_features(&self) -> usize {
        self.weight.cols()
    }

    pub fn into_parts(self) -> (Matrix, SparseMask) {
        (self.weight, self.mask)
    }

    pub(crate) fn weight_mut(&mut self) -> &mut Matrix {
        &mut self.weight
    }

    fn first_violation(&self) -> Option<(usize, usize)> {
        let cols = self.weight.cols();
        self.weight
            .iter()
            .zip(self.mask.mask.iter())
            .position(|(w, m)| *m == 0.0 && *w != 0.0)
            .map(|pos| (pos / cols, pos % cols))
    }
}

/// Per-input-feature ℓ₂ norms of calibration activations, shape `1×n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationStats {
    col_norms: Matrix,
}

impl CalibrationStats {
    pub fn new(col_norms: Matrix) -> Result<Self> {
        if col_norms.rows() != 1 {
            return Err(SppError::shape(format!(
                "calibration norms must be 1xn, got {:?}",
                col_norms.shape()
            )));
        }
        if col_norms.iter().any(|&v| v < 0.0) {
            return Err(SppError::argument("calibration norms must be nonnegative"));
        }
        Ok(CalibrationStats { col_norms })
    }

    pub fn col_norms(&self) -> &Matrix {
        &self.col_norms
    }
}

pub fn score_magnitude(w: &Matrix) -> Matrix {
    w.map(f64::abs)
}

/// `|W[i][j]| · ‖X_j‖₂`.
pub fn score_wanda(w: &Matrix, stats: &CalibrationStats) -> Result<Matrix> {
    let norms = stats.col_norms();
    if norms.cols() != w.cols() {
        return Err(SppError::shape(format!(
            "weight has {} input features, calibration has {}",
            w.cols(),
            norms.cols()
        )));
    }
    Ok(Matrix::from_fn(w.rows(), w.cols(), |i, j| {
        w.get(i, j).abs() * norms.get(0, j)
    }))
}

pub fn collect_calibration(xs: &Matrix) -> CalibrationStats {
    let norms = Matrix::from_fn(1, xs.cols(), |_, j| {
        let mut acc = 0.0;
        for i in 0..xs.rows() {
            let v = xs.get(i, j);
            acc += v * v;
        }
        acc.sqrt()
    });
    CalibrationStats { col_norms: norms }
}

// Ascending by score; among equal scores the larger index sorts first, so it is
// pruned first and the smaller index survives.
fn prune_order(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(b.1.cmp(&a.1))
}

fn prune_lowest(scores: &[(f64, usize)], k: usize, out: &mut [f64]) {
    let mut ranked = scores.to_vec();
    ranked.sort_by(prune_order);
    for &(_, idx) in ranked.iter().take(k) {
        out[idx] = 0.0;
    }
}

pub fn build_mask(scores: &Matrix, pattern: SparsityPattern) -> Result<SparseMask> {
    let (rows, cols) = scores.shape();
    pattern.validate_for(rows, cols)?;
    let mut keep = vec![1.0; rows * cols];
    let s = scores.as_slice();
    match pattern {
        SparsityPattern::NofM { n_keep, m_group } => {
            for r in 0..rows {
                for g in (0..cols).step_by(m_group) {
                    let base = r * cols + g;
                    let group: Vec<(f64, usize)> =
                        (base..base + m_group).map(|idx| (s[idx], idx)).collect();
                    prune_lowest(&group, m_group - n_keep, &mut keep);
                }
            }
        }
        SparsityPattern::Unstructured { ratio, per_row } => {
            if per_row {
                let k = zero_count(ratio, cols);
                for r in 0..rows {
                    let row: Vec<(f64, usize)> = (r * cols..(r + 1) * cols)
                        .map(|idx| (s[idx], idx))
                        .collect();
                    prune_lowest(&row, k, &mut keep);
                }
            } else {
                let all: Vec<(f64, usize)> = s.iter().copied().zip(0..).collect();
                prune_lowest(&all, zero_count(ratio, rows * cols), &mut keep);
            }
        }
    }
    Ok(SparseMask {
        mask: Matrix::new(rows, cols, keep)?,
        pattern,
    })
}

/// `W ⊙ M`. Pruned entries are stored as `+0.0` whatever the sign of the weight.
pub fn apply_mask(w: &Matrix, mask: &SparseMask) -> Result<PrunedLayer> {
    if w.shape() != mask.shape() {
        return Err(SppError::shape(format!(
            "weight {:?} vs mask {:?}",
            w.shape(),
            mask.shape()
        )));
    }
    let m = mask.matrix();
    let weight = Matrix::from_fn(w.rows(), w.cols(), |i, j| {
        if m.get(i, j) == 0.0 {
            0.0
        } else {
            w.get(i, j)
        }
    });
    Ok(PrunedLayer {
        weight,
        mask: mask.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskReport {
    pub rows: usize,
    pub cols: usize,
    pub pattern: SparsityPattern,
    /// Nonzeros in the weight.
    pub nnz: usize,
    /// Ones in the mask.
    pub mask_nnz: usize,
    /// Zeros in the mask.
    pub zeros: usize,
    /// `zeros / (rows · cols)`.
    pub ratio: f64,
    /// Whether the mask itself satisfies its pattern.
    pub pattern_ok: bool,
    /// Positions where the weight is nonzero but the mask is zero.
    pub violations: Vec<(usize, usize)>,
    /// Human-readable reasons for failure, empty on pass.
    pub problems: Vec<String>,
}

impl MaskReport {
    pub fn passed(&self) -> bool {
        self.problems.is_empty()
    }
}

impl fmt::Display for MaskReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{} pattern={} nnz={} zeros={} ratio={:.4} {}",
            self.rows,
            self.cols,
            self.pattern,
            self.nnz,
            self.zeros,
            self.ratio,
            if self.passed() { "PASS" } else { "FAIL" }
        )?;
        for p in &self.problems {
            write!(f, "; {p}")?;
        }
        Ok(())
    }
}

/// Checks pattern compliance of the mask and that the weight respects it.
pub fn verify_mask(layer: &PrunedLayer) -> MaskReport {
    let mask = layer.mask.matrix();
    let (rows, cols) = mask.shape();
    let pattern = layer.mask.pattern();
    let mut problems = Vec::new();

    let mut pattern_ok = true;
    if let Err(e) = pattern.validate_for(rows, cols) {
        pattern_ok = false;
        problems.push(e.to_string());
    } else {
        match pattern {
            SparsityPattern::NofM { n_keep, m_group } => {
                'outer: for r in 0..rows {
                    for g in (0..cols).step_by(m_group) {
                        let kept = mask.row(r)[g..g + m_group]
                            .iter()
                            .filter(|v| **v != 0.0)
                            .count();
                        if kept != n_keep {
                            pattern_ok = false;
                            problems.push(format!(
                                "row {r} group at column {g} keeps {kept}, expected {n_keep}"
                            ));
                            break 'outer;
                        }
                    }
                }
            }
            SparsityPattern::Unstructured { .. } => {
                let expected = pattern.expected_zeros(rows, cols);
                let zeros = rows * cols - mask.nnz();
                if zeros != expected {
                    pattern_ok = false;
                    problems.push(format!("mask has {zeros} zeros, expected {expected}"));
                }
            }
        }
    }

    let violations: Vec<(usize, usize)> = layer
        .weight
        .iter()
        .zip(mask.iter())
        .enumerate()
        .filter(|(_, (w, m))| **m == 0.0 && **w != 0.0)
        .map(|(pos, _)| (pos / cols, pos % cols))
        .collect();
    if let Some(&(r, c)) = violations.first() {
        problems.push(format!(
            "{} nonzero weight(s) at masked positions, first at ({r}, {c}) = {:e}",
            violations.len(),
            layer.weight.get(r, c)
        ));
    }

    let mask_nnz = mask.nnz();
    let zeros = rows * cols - mask_nnz;
    MaskReport {
        rows,
        cols,
        pattern,
        nnz: layer.weight.nnz(),
        mask_nnz,
        zeros,
        ratio: zeros as f64 / (rows * cols) as f64,
        pattern_ok,
        violations,
        problems,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn magnitude_scores() {
        assert_eq!(score_magnitude(&m(&[&[-3.0, 1.0]])), m(&[&[3.0, 1.0]]));
        assert_eq!(score_magnitude(&Matrix::zeros(2, 2)), Matrix::zeros(2, 2));
        assert_eq!(
            score_magnitude(&m(&[&[2.0, -5.0, 4.0]])),
            m(&[&[2.0, 5.0, 4.0]])
        );
    }

    #[test]
    fn wanda_scores() {
        let stats = CalibrationStats::new(m(&[&[3.0, 1.0]])).unwrap();
        assert_eq!(
            score_wanda(&m(&[&[1.0, -2.0]]), &stats).unwrap(),
            m(&[&[3.0, 2.0]])
        );
        let zero_w = m(&[&[0.0, 5.0]]);
        let big = CalibrationStats::new(m(&[&[100.0, 1.0]])).unwrap();
        assert_eq!(score_wanda(&zero_w, &big).unwrap().get(0, 0), 0.0);
        let wrong = CalibrationStats::new(m(&[&[1.0, 1.0, 1.0]])).unwrap();
        assert!(matches!(
            score_wanda(&zero_w, &wrong),
            Err(SppError::Shape(_))
        ));
    }

    #[test]
    fn two_four_masks() {
        let mask = build_mask(&m(&[&[1.0, 3.0, 2.0, 4.0]]), SparsityPattern::two_four()).unwrap();
        assert_eq!(mask.matrix(), &m(&[&[0.0, 1.0, 0.0, 1.0]]));
        let tied = build_mask(&m(&[&[1.0, 1.0, 1.0, 1.0]]), SparsityPattern::two_four()).unwrap();
        assert_eq!(tied.matrix(), &m(&[&[1.0, 1.0, 0.0, 0.0]]));
    }

    #[test]
    fn unstructured_zero_ratio_keeps_all() {
        let scores = Matrix::from_fn(3, 5, |i, j| (i * j) as f64);
        let mask = build_mask(&scores, SparsityPattern::unstructured(0.0).unwrap()).unwrap();
        assert_eq!(mask.matrix(), &Matrix::ones(3, 5));
    }

    #[test]
    fn unstructured_ties_keep_earliest() {
        let mask = build_mask(
            &Matrix::ones(2, 2),
            SparsityPattern::unstructured(0.5).unwrap(),
        )
        .unwrap();
        assert_eq!(mask.matrix(), &m(&[&[1.0, 1.0], &[0.0, 0.0]]));
    }

    #[test]
    fn row_wise_unstructured() {
        let scores = m(&[&[1.0, 2.0, 3.0, 4.0], &[9.0, 8.0, 7.0, 6.0]]);
        let p = SparsityPattern::Unstructured {
            ratio: 0.5,
            per_row: true,
        };
        let mask = build_mask(&scores, p).unwrap();
        assert_eq!(
            mask.matrix(),
            &m(&[&[0.0, 0.0, 1.0, 1.0], &[1.0, 1.0, 0.0, 0.0]])
        );
        // The per-matrix ranking would instead prune the whole first row.
        let global = build_mask(&scores, SparsityPattern::unstructured(0.5).unwrap()).unwrap();
        assert_eq!(global.matrix().row(0), &[0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn indivisible_columns_rejected() {
        let err = build_mask(&Matrix::ones(2, 6), SparsityPattern::two_four()).unwrap_err();
        assert!(matches!(err, SppError::Pattern(_)));
    }

    #[test]
    fn pattern_parsing() {
        assert_eq!(
            "2:4".parse::<SparsityPattern>().unwrap(),
            SparsityPattern::two_four()
        );
        assert!("4:4".parse::<SparsityPattern>().is_err());
        assert!("0:4".parse::<SparsityPattern>().is_err());
        assert!("two:four".parse::<SparsityPattern>().is_err());
        assert!(SparsityPattern::unstructured(1.0).is_err());
    }

    #[test]
    fn apply_mask_examples() {
        let w = m(&[&[1.0, -3.0, 2.0, 4.0]]);
        let mask = build_mask(&score_magnitude(&w), SparsityPattern::two_four()).unwrap();
        let layer = apply_mask(&w, &mask).unwrap();
        assert_eq!(layer.weight(), &m(&[&[0.0, -3.0, 0.0, 4.0]]));

        let all = SparseMask::new(
            Matrix::ones(1, 4),
            SparsityPattern::unstructured(0.0).unwrap(),
        )
        .unwrap();
        assert_eq!(apply_mask(&w, &all).unwrap().weight(), &w);

        let zero_row = m(&[&[0.0, 0.0, 0.0, 0.0], &[1.0, 2.0, 3.0, 4.0]]);
        let mask = build_mask(&score_magnitude(&zero_row), SparsityPattern::two_four()).unwrap();
        assert_eq!(
            apply_mask(&zero_row, &mask).unwrap().weight().row(0),
            &[0.0; 4]
        );
    }

    #[test]
    fn calibration_norms() {
        let stats = collect_calibration(&m(&[&[3.0, 0.0], &[4.0, 0.0]]));
        assert_eq!(stats.col_norms(), &m(&[&[5.0, 0.0]]));
        assert_eq!(
            collect_calibration(&m(&[&[1.0, 1.0]])).col_norms(),
            &m(&[&[1.0, 1.0]])
        );
        assert_eq!(
            collect_calibration(&Matrix::zeros(4, 3)).col_norms(),
            &Matrix::zeros(1, 3)
        );
    }

    #[test]
    fn verify_fresh_two_four_layer() {
        let mut rng = Rng::seed_from_u64(5);
        let w = rng.uniform_matrix(-1.0, 1.0, 8, 16).unwrap();
        let mask = build_mask(&score_magnitude(&w), SparsityPattern::two_four()).unwrap();
        let report = verify_mask(&apply_mask(&w, &mask).unwrap());
        assert!(report.passed(), "{report}");
        assert_eq!(report.ratio, 0.5);
    }

    #[test]
    fn verify_detects_corruption() {
        let mut rng = Rng::seed_from_u64(6);
        let w = rng.uniform_matrix(-1.0, 1.0, 4, 8).unwrap();
        let mask = build_mask(&score_magnitude(&w), SparsityPattern::two_four()).unwrap();
        let layer = apply_mask(&w, &mask).unwrap();
        let (mut weight, mask) = layer.into_parts();
        let (r, c) = (0..4 * 8)
            .map(|p| (p / 8, p % 8))
            .find(|&(r, c)| !mask.is_kept(r, c))
            .unwrap();
        weight.set(r, c, 1e-9);
        let bad = PrunedLayer::from_parts_unverified(weight.clone(), mask.clone()).unwrap();
        let report = verify_mask(&bad);
        assert!(!report.passed());
        assert_eq!(report.violations, vec![(r, c)]);
        assert!(report.to_string().contains(&format!("({r}, {c})")));
        assert!(PrunedLayer::new(weight, mask).is_err());
    }

    #[test]
    fn verify_counts_unstructured_zeros() {
        let mut rng = Rng::seed_from_u64(9);
        let w = rng.uniform_matrix(-1.0, 1.0, 100, 100).unwrap();
        let mask = build_mask(
            &score_magnitude(&w),
            SparsityPattern::unstructured(0.75).unwrap(),
        )
        .unwrap();
        let report = verify_mask(&apply_mask(&w, &mask).unwrap());
        assert!(report.passed(), "{report}");
        assert_eq!(report.zeros, 7500);
        assert!(report.to_string().contains("ratio=0.7500"));
    }

    #[test]
    fn zero_count_floors() {
        assert_eq!(zero_count(0.75, 10_000), 7500);
        assert_eq!(zero_count(0.5, 7), 3);
        assert_eq!(zero_count(0.0, 7), 0);
        assert_eq!(zero_count(0.3, 10), 3);
    }
}
