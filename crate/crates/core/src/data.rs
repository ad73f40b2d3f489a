//! Record types for crossover and parallel trial data, plus fold splitting.
//!
//! A *2x2 crossover* subject receives both treatments in one of the two
//! sequences `(+1, -1)` or `(-1, +1)` and contributes one outcome per period;
//! a *parallel* subject receives a single treatment and contributes one
//! outcome. Datasets validate their rows on construction, so any constructed
//! dataset satisfies the documented invariants (finite values, consistent
//! covariate dimension, propensities in `(0, 1]`).

use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One of the two treatments, encoded as the sign it contributes to the
/// outcome model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Treatment {
    /// Treatment coded `-1`.
    Minus,
    /// Treatment coded `+1`.
    Plus,
}

impl Treatment {
    /// Numeric coding, `-1.0` or `+1.0`.
    #[inline]
    pub fn as_f64(self) -> f64 {
        match self {
            Treatment::Minus => -1.0,
            Treatment::Plus => 1.0,
        }
    }

    /// The other treatment.
    #[inline]
    pub fn flipped(self) -> Self {
        match self {
            Treatment::Minus => Treatment::Plus,
            Treatment::Plus => Treatment::Minus,
        }
    }

    /// Parse the numeric coding. Only exactly `-1` and `+1` are accepted.
    pub fn from_f64(v: f64) -> Result<Self, ObsError> {
        if v == 1.0 {
            Ok(Treatment::Plus)
        } else if v == -1.0 {
            Ok(Treatment::Minus)
        } else {
            Err(ObsError::BadTreatment { value: v })
        }
    }

    /// The treatment whose coding has the sign of `v`, with `sign(0) := +1`.
    #[inline]
    pub fn from_sign(v: f64) -> Self {
        if v < 0.0 {
            Treatment::Minus
        } else {
            Treatment::Plus
        }
    }
}

/// One crossover subject: covariates, period-1 treatment (period 2 receives
/// the opposite), the two period outcomes, and the probability of the
/// observed sequence given the covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossoverObservation {
    pub x: Vec<f64>,
    pub a1: Treatment,
    pub y1: f64,
    pub y2: f64,
    pub propensity: f64,
}

/// One parallel-design subject.
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelObservation {
    pub x: Vec<f64>,
    pub a: Treatment,
    pub y: f64,
    pub propensity: f64,
}

/// Why a single observation failed validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObsError {
    /// A covariate entry was NaN or infinite.
    NonFiniteCovariate { index: usize },
    /// An outcome was NaN or infinite. `which` names the field (`"y1"`, …).
    NonFiniteOutcome { which: &'static str },
    /// Propensity outside `(0, 1]` (positivity requires a strictly positive
    /// probability of every sequence).
    PropensityOutOfRange { value: f64 },
    /// Treatment coding other than `-1` / `+1`.
    BadTreatment { value: f64 },
}

impl core::fmt::Display for ObsError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ObsError::NonFiniteCovariate { index } => {
                write!(f, "covariate {index} is not finite")
            }
            ObsError::NonFiniteOutcome { which } => write!(f, "outcome {which} is not finite"),
            ObsError::PropensityOutOfRange { value } => {
                write!(f, "propensity {value} is outside (0, 1]")
            }
            ObsError::BadTreatment { value } => {
                write!(f, "treatment must be -1 or 1, got {value}")
            }
        }
    }
}

impl core::error::Error for ObsError {}

/// Why a dataset failed validation.
#[derive(Debug, Clone, PartialEq)]
pub enum DataError {
    /// No observations.
    Empty,
    /// Row `row` (0-based) has a different covariate dimension than row 0.
    DimensionMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },
    /// Row `row` (0-based) failed field validation.
    Row { row: usize, source: ObsError },
}

impl core::fmt::Display for DataError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            DataError::Empty => write!(f, "dataset has no observations"),
            DataError::DimensionMismatch {
                row,
                expected,
                found,
            } => write!(
                f,
                "row {row} has {found} covariates, expected {expected}"
            ),
            DataError::Row { row, source } => write!(f, "row {row}: {source}"),
        }
    }
}

impl core::error::Error for DataError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            DataError::Row { source, .. } => Some(source),
            _ => None,
        }
    }
}

fn validate_common(
    x: &[f64],
    outcomes: &[(&'static str, f64)],
    propensity: f64,
) -> Result<(), ObsError> {
    for (index, &v) in x.iter().enumerate() {
        if !v.is_finite() {
            return Err(ObsError::NonFiniteCovariate { index });
        }
    }
    for &(which, v) in outcomes {
        if !v.is_finite() {
            return Err(ObsError::NonFiniteOutcome { which });
        }
    }
    if !(propensity > 0.0 && propensity <= 1.0) {
        return Err(ObsError::PropensityOutOfRange { value: propensity });
    }
    Ok(())
}

impl CrossoverObservation {
    fn validate(&self) -> Result<(), ObsError> {
        validate_common(&self.x, &[("y1", self.y1), ("y2", self.y2)], self.propensity)
    }
}

impl ParallelObservation {
    fn validate(&self) -> Result<(), ObsError> {
        validate_common(&self.x, &[("y", self.y)], self.propensity)
    }
}

/// A validated list of [`CrossoverObservation`]s with a shared covariate
/// dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossoverDataset {
    p: usize,
    obs: Vec<CrossoverObservation>,
}

/// A validated list of [`ParallelObservation`]s with a shared covariate
/// dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelDataset {
    p: usize,
    obs: Vec<ParallelObservation>,
}

impl CrossoverDataset {
    /// Validate and wrap observations. Row order is preserved.
    pub fn new(obs: Vec<CrossoverObservation>) -> Result<Self, DataError> {
        if obs.is_empty() {
            return Err(DataError::Empty);
        }
        let p = obs[0].x.len();
        for (row, o) in obs.iter().enumerate() {
            if o.x.len() != p {
                return Err(DataError::DimensionMismatch {
                    row,
                    expected: p,
                    found: o.x.len(),
                });
            }
            o.validate().map_err(|source| DataError::Row { row, source })?;
        }
        Ok(CrossoverDataset { p, obs })
    }

    pub fn n(&self) -> usize {
        self.obs.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn observations(&self) -> &[CrossoverObservation] {
        &self.obs
    }

    /// Build the sub-dataset of the given rows (indices into this dataset).
    ///
    /// # Panics
    ///
    /// Panics if any index is out of range or `rows` is empty.
    pub fn subset(&self, rows: &[usize]) -> CrossoverDataset {
        assert!(!rows.is_empty(), "subset must keep at least one row");
        CrossoverDataset {
            p: self.p,
            obs: rows.iter().map(|&i| self.obs[i].clone()).collect(),
        }
    }

    /// Project to a parallel-design dataset using period-1 data only:
    /// each subject contributes `(x, a1, y1, propensity)`.
    pub fn period1_parallel(&self) -> ParallelDataset {
        ParallelDataset {
            p: self.p,
            obs: self
                .obs
                .iter()
                .map(|o| ParallelObservation {
                    x: o.x.clone(),
                    a: o.a1,
                    y: o.y1,
                    propensity: o.propensity,
                })
                .collect(),
        }
    }
}

impl ParallelDataset {
    /// Validate and wrap observations. Row order is preserved.
    pub fn new(obs: Vec<ParallelObservation>) -> Result<Self, DataError> {
        if obs.is_empty() {
            return Err(DataError::Empty);
        }
        let p = obs[0].x.len();
        for (row, o) in obs.iter().enumerate() {
            if o.x.len() != p {
                return Err(DataError::DimensionMismatch {
                    row,
                    expected: p,
                    found: o.x.len(),
                });
            }
            o.validate().map_err(|source| DataError::Row { row, source })?;
        }
        Ok(ParallelDataset { p, obs })
    }

    pub fn n(&self) -> usize {
        self.obs.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn observations(&self) -> &[ParallelObservation] {
        &self.obs
    }

    /// Build the sub-dataset of the given rows (indices into this dataset).
    ///
    /// # Panics
    ///
    /// Panics if any index is out of range or `rows` is empty.
    pub fn subset(&self, rows: &[usize]) -> ParallelDataset {
        assert!(!rows.is_empty(), "subset must keep at least one row");
        ParallelDataset {
            p: self.p,
            obs: rows.iter().map(|&i| self.obs[i].clone()).collect(),
        }
    }
}

/// Result of [`split_folds`]: `k` disjoint, exhaustive index sets.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldSplit {
    /// Fold index sets, each sorted ascending; sizes differ by at most one.
    pub folds: Vec<Vec<usize>>,
    /// True when some stratification label occurred fewer than `k` times, so
    /// that label cannot appear in every fold. A warning, not an error.
    pub poor_allocation: bool,
}

/// Why a fold split could not be constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitError {
    /// Need `1 < k <= n`.
    BadFoldCount { k: usize, n: usize },
    /// `labels`, when given, must have length `n`.
    LabelLength { expected: usize, found: usize },
}

impl core::fmt::Display for SplitError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SplitError::BadFoldCount { k, n } => {
                write!(f, "fold count {k} invalid for {n} rows (need 1 < k <= n)")
            }
            SplitError::LabelLength { expected, found } => {
                write!(f, "label list has length {found}, expected {expected}")
            }
        }
    }
}

impl core::error::Error for SplitError {}

/// Split `0..n` into `k` disjoint folds, optionally stratified.
///
/// With `labels` supplied, indices are grouped by label value and each group
/// is dealt round-robin across folds, so every value with count `>= k`
/// appears in every fold; values with smaller counts set
/// [`FoldSplit::poor_allocation`]. The split is a deterministic function of
/// `(n, k, labels, seed)`.
pub fn split_folds(
    n: usize,
    k: usize,
    labels: Option<&[f64]>,
    seed: u64,
) -> Result<FoldSplit, SplitError> {
    if k <= 1 || k > n {
        return Err(SplitError::BadFoldCount { k, n });
    }
    if let Some(l) = labels {
        if l.len() != n {
            return Err(SplitError::LabelLength {
                expected: n,
                found: l.len(),
            });
        }
    }

    // Group indices by label value (one group when unlabeled), processing
    // groups in ascending key order for determinism.
    let mut groups: Vec<Vec<usize>> = Vec::new();
    match labels {
        None => groups.push((0..n).collect()),
        Some(l) => {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&i, &j| l[i].total_cmp(&l[j]).then(i.cmp(&j)));
            for idx in order {
                let same_group = groups.last().is_some_and(|g| {
                    l[g[0]].total_cmp(&l[idx]) == core::cmp::Ordering::Equal
                });
                if same_group {
                    groups.last_mut().unwrap().push(idx);
                } else {
                    groups.push(alloc::vec![idx]);
                }
            }
        }
    }
    let poor_allocation = labels.is_some() && groups.iter().any(|g| g.len() < k);

    // Shuffle within each group, then deal every element round-robin with a
    // single running counter so overall fold sizes differ by at most one.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds: Vec<Vec<usize>> = alloc::vec![Vec::new(); k];
    let mut counter = 0usize;
    for g in &mut groups {
        g.shuffle(&mut rng);
        for &idx in g.iter() {
            folds[counter % k].push(idx);
            counter += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldSplit {
        folds,
        poor_allocation,
    })
}
