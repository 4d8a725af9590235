//! Multinomial sampling of contingency tables.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{MllError, Result};
use crate::table::Table;

/// Counts of `n` draws from the cell probabilities proportional to `weights`,
/// generated cell by cell from conditional binomials.
pub fn multinomial<R: Rng + ?Sized>(weights: &[f64], n: u64, rng: &mut R) -> Result<Vec<f64>> {
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(MllError::Invalid("weights must be finite and non-negative".into()));
    }
    let mut rest: f64 = weights.iter().sum();
    if !(rest > 0.0) {
        return Err(MllError::Invalid("weights sum to zero".into()));
    }
    let mut left = n;
    let mut out = vec![0.0; weights.len()];
    for (o, &w) in out.iter_mut().zip(weights) {
        if left == 0 {
            break;
        }
        let p = (w / rest).clamp(0.0, 1.0);
        let k = if p >= 1.0 {
            left
        } else {
            Binomial::new(left, p).map_err(|e| MllError::Numerical(e.to_string()))?.sample(rng)
        };
        *o = k as f64;
        left -= k;
        rest -= w;
    }
    Ok(out)
}

/// Sample a count table of total `n` from the distribution proportional to `table`.
pub fn sample_table<R: Rng + ?Sized>(table: &Table, n: u64, rng: &mut R) -> Result<Table> {
    let cells = multinomial(table.cells(), n, rng)?;
    Table::counts(table.scheme().clone(), cells)
}
