use serde::{Deserialize, Serialize};

use super::{AgreementError, RaterMatrix};

/// Landis–Koch interpretation of a kappa value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Band {
    Poor,
    Slight,
    Fair,
    Moderate,
    Substantial,
    AlmostPerfect,
}

impl Band {
    pub fn of(kappa: f64) -> Band {
        if kappa < 0.0 {
            Band::Poor
        } else if kappa <= 0.20 {
            Band::Slight
        } else if kappa <= 0.40 {
            Band::Fair
        } else if kappa <= 0.60 {
            Band::Moderate
        } else if kappa <= 0.80 {
            Band::Substantial
        } else {
            Band::AlmostPerfect
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Band::Poor => "Poor",
            Band::Slight => "Slight",
            Band::Fair => "Fair",
            Band::Moderate => "Moderate",
            Band::Substantial => "Substantial",
            Band::AlmostPerfect => "Almost perfect",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementStats {
    /// Observed agreement.
    pub p_o: f64,
    /// Chance agreement.
    pub p_e: f64,
    pub kappa: f64,
    pub n_items: usize,
    pub interpretation_band: Band,
}

impl AgreementStats {
    fn from_parts(p_o: f64, p_e: f64, n_items: usize) -> Self {
        let kappa = (p_o - p_e) / (1.0 - p_e);
        Self { p_o, p_e, kappa, n_items, interpretation_band: Band::of(kappa) }
    }
}

/// Square table of label counts, rows for the first rater and columns for
/// the second.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub categories: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.categories.len()).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }

    pub fn transpose(&self) -> Self {
        let k = self.categories.len();
        let counts = (0..k).map(|j| (0..k).map(|i| self.counts[i][j]).collect()).collect();
        Self { categories: self.categories.clone(), counts }
    }
}

fn require_raters(matrix: &RaterMatrix, ok: impl Fn(usize) -> bool, expected: &'static str) -> Result<(), AgreementError> {
    let found = matrix.raters().len();
    if !ok(found) {
        return Err(AgreementError::WrongRaterCount { expected, found });
    }
    if matrix.n_items() == 0 {
        return Err(AgreementError::NoItems);
    }
    Ok(())
}

pub fn confusion_matrix(matrix: &RaterMatrix) -> Result<ConfusionMatrix, AgreementError> {
    let found = matrix.raters().len();
    if found != 2 {
        return Err(AgreementError::WrongRaterCount { expected: "exactly 2", found });
    }
    let k = matrix.category_set().len();
    let mut counts = vec![vec![0u64; k]; k];
    for row in matrix.rows() {
        counts[row[0]][row[1]] += 1;
    }
    Ok(ConfusionMatrix { categories: matrix.category_set().to_vec(), counts })
}

/// Cohen's kappa for exactly two raters.
///
/// `p_e` is the sum over categories of the product of the two raters'
/// marginal proportions. When both raters use one and the same category for
/// every item `p_e = 1` and kappa is undefined.
pub fn cohen_kappa(matrix: &RaterMatrix) -> Result<AgreementStats, AgreementError> {
    require_raters(matrix, |n| n == 2, "exactly 2")?;
    let table = confusion_matrix(matrix)?;
    let n = table.total();
    let agree: u64 = (0..table.categories.len()).map(|i| table.counts[i][i]).sum();
    let chance: u64 = table.row_sums().iter().zip(table.col_sums()).map(|(r, c)| r * c).sum();
    let n_sq = n * n;
    if chance == n_sq {
        return Err(AgreementError::DegenerateMarginals);
    }
    let p_o = agree as f64 / n as f64;
    let p_e = chance as f64 / n_sq as f64;
    Ok(AgreementStats::from_parts(p_o, p_e, n as usize))
}

/// Fleiss' kappa for two or more raters, every item rated by all of them.
pub fn fleiss_kappa(matrix: &RaterMatrix) -> Result<AgreementStats, AgreementError> {
    require_raters(matrix, |n| n >= 2, "at least 2")?;
    let k = matrix.category_set().len();
    let m = matrix.raters().len() as u64;
    let n_items = matrix.n_items() as u64;
    let mut totals = vec![0u64; k];
    // Σ_i Σ_j n_ij²
    let mut sq_sum = 0u64;
    let mut counts = vec![0u64; k];
    for row in matrix.rows() {
        counts.iter_mut().for_each(|c| *c = 0);
        for &c in row {
            counts[c] += 1;
        }
        for (t, c) in totals.iter_mut().zip(&counts) {
            *t += c;
            sq_sum += c * c;
        }
    }
    let ratings = n_items * m;
    if totals.iter().any(|&t| t == ratings) {
        return Err(AgreementError::DegenerateMarginals);
    }
    // mean of P_i = (Σ_j n_ij² − m) / (m(m−1))
    let p_bar = (sq_sum - ratings) as f64 / (ratings * (m - 1)) as f64;
    let chance: u64 = totals.iter().map(|t| t * t).sum();
    let p_e = chance as f64 / (ratings * ratings) as f64;
    Ok(AgreementStats::from_parts(p_bar, p_e, n_items as usize))
}
