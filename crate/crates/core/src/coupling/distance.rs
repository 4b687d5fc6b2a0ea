use std::cmp::Ordering;

use crate::error::{Result, SomaError};
use crate::state::State;

fn row_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Smallest number of differing positions over all reorderings of `b`.
///
/// Equals `n` minus the size of the multiset intersection of the
/// components, which sorting both sides and merging finds exactly for
/// scalar and vector components alike.
///
/// ```
/// use soma::coupling::min_permutation_distance;
/// use soma::State;
///
/// let a = State::scalar(vec![1.0, 2.0, 3.0]).unwrap();
/// let b = State::scalar(vec![3.0, 2.0, 5.0]).unwrap();
/// assert_eq!(min_permutation_distance(&a, &b).unwrap(), 1);
/// ```
pub fn min_permutation_distance(a: &State, b: &State) -> Result<usize> {
    if a.n() != b.n() || a.width() != b.width() {
        return Err(SomaError::Domain("states must have the same shape".into()));
    }
    // Signed zeros compare unequal under total_cmp but equal as values.
    let norm = |c: &[f64]| c.iter().map(|v| v + 0.0).collect::<Vec<f64>>();
    let mut ra: Vec<Vec<f64>> = a.components().map(norm).collect();
    let mut rb: Vec<Vec<f64>> = b.components().map(norm).collect();
    ra.sort_by(|x, y| row_cmp(x, y));
    rb.sort_by(|x, y| row_cmp(x, y));
    let (mut i, mut j, mut matches) = (0, 0, 0);
    while i < ra.len() && j < rb.len() {
        match row_cmp(&ra[i], &rb[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                matches += 1;
                i += 1;
                j += 1;
            }
        }
    }
    Ok(a.n() - matches)
}
