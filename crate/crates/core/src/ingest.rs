//! Count-data ingestion: the log-composition transform used for sequencing
//! counts, `Y_ijk = log((C_ijk + c) / sum_j' (C_ij'k + c))` with pseudocount
//! `c` (default 0.5) added to every count before closure.

use crate::error::{Error, Result};
use crate::tensor::Tensor3;

pub const DEFAULT_PSEUDOCOUNT: f64 = 0.5;

/// Transforms a non-negative integer count tensor to log-compositions over
/// mode 2. Exponentials of the output sum to one across `j` for every
/// `(i, k)`.
pub fn log_composition(counts: &Tensor3, pseudocount: f64) -> Result<Tensor3> {
    if !(pseudocount > 0.0 && pseudocount.is_finite()) {
        return Err(Error::InvalidArgument(
            "pseudocount must be positive".into(),
        ));
    }
    let (p1, p2, n) = counts.dims();
    for k in 0..n {
        for i in 0..p1 {
            for j in 0..p2 {
                let c = counts.get(i, j, k);
                if c < 0.0 {
                    return Err(Error::Data(format!(
                        "negative count {c} at (i={}, j={}, k={})",
                        i + 1,
                        j + 1,
                        k + 1
                    )));
                }
                if c.fract() != 0.0 {
                    return Err(Error::Data(format!(
                        "non-integer count {c} at (i={}, j={}, k={})",
                        i + 1,
                        j + 1,
                        k + 1
                    )));
                }
            }
        }
    }
    Tensor3::from_fn(p1, p2, n, |i, j, k| {
        let mut denom = 0.0;
        for jp in 0..p2 {
            denom += counts.get(i, jp, k) + pseudocount;
        }
        ((counts.get(i, j, k) + pseudocount) / denom).ln()
    })
}
