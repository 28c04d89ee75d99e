//! Dynamic time warping between two time-normalised strides.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WarpPath {
    /// `(i, j)` index pairs from `(0, 0)` to `(n-1, m-1)`.
    pub pairs: Vec<(usize, usize)>,
}

impl WarpPath {
    pub fn diagonal(n: usize) -> Self {
        WarpPath {
            pairs: (0..n).map(|i| (i, i)).collect(),
        }
    }

    /// Boundary, monotonicity and unit-step conditions for sequences of
    /// lengths `n` and `m`.
    pub fn is_valid(&self, n: usize, m: usize) -> bool {
        let p = &self.pairs;
        if p.is_empty() || p[0] != (0, 0) || *p.last().expect("non-empty") != (n - 1, m - 1) {
            return false;
        }
        p.windows(2).all(|w| {
            let (di, dj) = (w[1].0.wrapping_sub(w[0].0), w[1].1.wrapping_sub(w[0].1));
            matches!((di, dj), (1, 0) | (0, 1) | (1, 1))
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub path: WarpPath,
    /// Sum of `|a_i - b_j|` along the path.
    pub cost: f64,
}

/// Minimum-cost monotone alignment with absolute-difference local cost.
/// Among equal-cost predecessors the diagonal step is preferred, then the
/// step that advances `a`.
pub fn dtw_align(a: &[f64], b: &[f64]) -> Result<Alignment> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Err(Error::Empty("DTW input"));
    }
    let mut acc = vec![f64::INFINITY; n * m];
    let at = |i: usize, j: usize| i * m + j;
    for i in 0..n {
        for j in 0..m {
            let local = (a[i] - b[j]).abs();
            let prev = if i == 0 && j == 0 {
                0.0
            } else {
                let mut best = f64::INFINITY;
                if i > 0 && j > 0 {
                    best = acc[at(i - 1, j - 1)];
                }
                if i > 0 {
                    best = best.min(acc[at(i - 1, j)]);
                }
                if j > 0 {
                    best = best.min(acc[at(i, j - 1)]);
                }
                best
            };
            acc[at(i, j)] = local + prev;
        }
    }

    let mut pairs = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while (i, j) != (0, 0) {
        let step = if i == 0 {
            (0, j - 1)
        } else if j == 0 {
            (i - 1, 0)
        } else {
            let diag = acc[at(i - 1, j - 1)];
            let up = acc[at(i - 1, j)];
            let left = acc[at(i, j - 1)];
            if diag <= up && diag <= left {
                (i - 1, j - 1)
            } else if up <= left {
                (i - 1, j)
            } else {
                (i, j - 1)
            }
        };
        (i, j) = step;
        pairs.push(step);
    }
    pairs.reverse();
    Ok(Alignment {
        path: WarpPath { pairs },
        cost: acc[at(n - 1, m - 1)],
    })
}

/// Cost of a given path.
pub fn path_cost(a: &[f64], b: &[f64], path: &WarpPath) -> f64 {
    path.pairs.iter().map(|&(i, j)| (a[i] - b[j]).abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive enumeration of every monotone unit-step path.
    fn brute_force(a: &[f64], b: &[f64]) -> f64 {
        fn go(a: &[f64], b: &[f64], i: usize, j: usize) -> f64 {
            let here = (a[i] - b[j]).abs();
            if i + 1 == a.len() && j + 1 == b.len() {
                return here;
            }
            let mut best = f64::INFINITY;
            if i + 1 < a.len() {
                best = best.min(go(a, b, i + 1, j));
            }
            if j + 1 < b.len() {
                best = best.min(go(a, b, i, j + 1));
            }
            if i + 1 < a.len() && j + 1 < b.len() {
                best = best.min(go(a, b, i + 1, j + 1));
            }
            here + best
        }
        go(a, b, 0, 0)
    }

    #[test]
    fn identical_is_diagonal() {
        let a: Vec<f64> = (0..100).map(|i| (i as f64 * 0.1).sin()).collect();
        let r = dtw_align(&a, &a).unwrap();
        assert_eq!(r.path, WarpPath::diagonal(100));
        assert_eq!(r.cost, 0.0);
    }

    #[test]
    fn constants_tie_to_diagonal() {
        let r = dtw_align(&[1.0; 30], &[3.0; 30]).unwrap();
        assert_eq!(r.path, WarpPath::diagonal(30));
        assert_eq!(r.cost, 60.0);
    }

    #[test]
    fn empty_input() {
        assert!(dtw_align(&[], &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn matches_exhaustive_search(
            a in prop::collection::vec(0u8..=5, 1..8),
            b in prop::collection::vec(0u8..=5, 1..8),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let r = dtw_align(&a, &b).unwrap();
            prop_assert!(r.path.is_valid(a.len(), b.len()));
            prop_assert_eq!(r.cost, brute_force(&a, &b));
            prop_assert_eq!(path_cost(&a, &b, &r.path), r.cost);
        }

        #[test]
        fn path_is_always_valid(
            a in prop::collection::vec(-10.0..10.0f64, 1..60),
            b in prop::collection::vec(-10.0..10.0f64, 1..60),
        ) {
            let r = dtw_align(&a, &b).unwrap();
            prop_assert!(r.path.is_valid(a.len(), b.len()));
        }
    }
}
