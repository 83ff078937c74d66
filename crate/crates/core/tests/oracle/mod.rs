//! Exact-arithmetic kappa written straight from the textbook formulas, with
//! no code shared with the library. Ratings are category indices,
//! `ratings[item][rater]`.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

fn q(n: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub struct Exact {
    pub p_o: BigRational,
    pub p_e: BigRational,
    pub kappa: BigRational,
}

impl Exact {
    pub fn kappa_f64(&self) -> f64 {
        self.kappa.to_f64().unwrap()
    }
}

/// Two raters: contingency table, then p_o from the diagonal and p_e from
/// the margins. `None` when p_e = 1.
pub fn cohen(ratings: &[Vec<usize>], k: usize) -> Option<Exact> {
    let n = ratings.len();
    let mut table = vec![vec![0usize; k]; k];
    for row in ratings {
        table[row[0]][row[1]] += 1;
    }
    let mut p_o = BigRational::zero();
    for (c, row) in table.iter().enumerate() {
        p_o += q(row[c]) / q(n);
    }
    let mut p_e = BigRational::zero();
    for c in 0..k {
        let row_c: usize = table[c].iter().sum();
        let col_c: usize = table.iter().map(|r| r[c]).sum();
        p_e += (q(row_c) / q(n)) * (q(col_c) / q(n));
    }
    if p_e.is_one() {
        return None;
    }
    let kappa = (p_o.clone() - p_e.clone()) / (BigRational::one() - p_e.clone());
    Some(Exact { p_o, p_e, kappa })
}

/// Any number of raters: per-item agreement P_i averaged, chance from the
/// pooled category proportions. `None` when chance agreement is 1.
pub fn fleiss(ratings: &[Vec<usize>], k: usize) -> Option<Exact> {
    let n = ratings.len();
    let m = ratings[0].len();
    let mut p_bar = BigRational::zero();
    let mut pooled = vec![0usize; k];
    for row in ratings {
        let mut n_ij = vec![0usize; k];
        for &c in row {
            n_ij[c] += 1;
        }
        let mut pairs = BigRational::zero();
        for (j, &c) in n_ij.iter().enumerate() {
            pairs += q(c) * (q(c) - q(1));
            pooled[j] += c;
        }
        p_bar += pairs / (q(m) * (q(m) - q(1)));
    }
    p_bar /= q(n);
    let mut p_e = BigRational::zero();
    for &t in &pooled {
        let p_j = q(t) / (q(n) * q(m));
        p_e += p_j.clone() * p_j;
    }
    if p_e.is_one() {
        return None;
    }
    let kappa = (p_bar.clone() - p_e.clone()) / (BigRational::one() - p_e.clone());
    Some(Exact { p_o: p_bar, p_e, kappa })
}

/// Random rating matrix: 1..=max_items items, `raters` raters, labels drawn
/// from `k` categories. Skewed draws make degenerate margins common enough
/// to exercise that path too.
pub fn random_matrix(rng: &mut impl Rng, max_items: usize, raters: usize, k: usize) -> Vec<Vec<usize>> {
    let n = rng.random_range(1..=max_items);
    let skew = rng.random_bool(0.2);
    (0..n)
        .map(|_| {
            (0..raters)
                .map(|_| if skew && rng.random_bool(0.9) { 0 } else { rng.random_range(0..k) })
                .collect()
        })
        .collect()
}
