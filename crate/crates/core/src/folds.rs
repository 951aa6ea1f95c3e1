//! V-fold partitioning.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Assignment of each unit to one of V folds (stored 0-based).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    fold_of: Vec<usize>,
    v: usize,
}

impl FoldAssignment {
    /// Validate an explicit assignment (0-based fold indices).
    pub fn from_indices(fold_of: Vec<usize>, v: usize) -> Result<Self> {
        let n = fold_of.len();
        if v < 2 || v > n {
            return Err(Error::BadFoldCount { v, n });
        }
        let mut sizes = vec![0usize; v];
        for &f in &fold_of {
            if f >= v {
                return Err(Error::Config(format!("fold index {f} out of range for V={v}")));
            }
            sizes[f] += 1;
        }
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        if *lo == 0 || hi - lo > 1 {
            return Err(Error::Config(format!("unbalanced folds: sizes {sizes:?}")));
        }
        Ok(Self { fold_of, v })
    }

    pub fn v(&self) -> usize {
        self.v
    }

    pub fn n(&self) -> usize {
        self.fold_of.len()
    }

    pub fn fold_of(&self, i: usize) -> usize {
        self.fold_of[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.fold_of
    }

    /// Indices in fold `v`, ascending.
    pub fn validation(&self, v: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_of[i] == v).collect()
    }

    /// Indices outside fold `v`, ascending.
    pub fn training(&self, v: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_of[i] != v).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.v];
        for &f in &self.fold_of {
            s[f] += 1;
        }
        s
    }
}

/// Simple random partition of `0..n` into `v` folds whose sizes differ by at most one.
pub fn make_folds(n: usize, v: usize, rng: &RngStream) -> Result<FoldAssignment> {
    if v < 2 || v > n {
        return Err(Error::BadFoldCount { v, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng.rng());
    let mut fold_of = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        fold_of[i] = rank % v;
    }
    Ok(FoldAssignment { fold_of, v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn even_split() {
        let f = make_folds(10, 5, &RngStream::new(1)).unwrap();
        assert_eq!(f.sizes(), vec![2; 5]);
    }

    #[test]
    fn uneven_split() {
        let f = make_folds(11, 5, &RngStream::new(1)).unwrap();
        let mut s = f.sizes();
        s.sort_unstable();
        assert_eq!(s, vec![2, 2, 2, 2, 3]);
    }

    #[test]
    fn leave_one_out() {
        let f = make_folds(6, 6, &RngStream::new(3)).unwrap();
        assert_eq!(f.sizes(), vec![1; 6]);
        for v in 0..6 {
            assert_eq!(f.validation(v).len(), 1);
        }
    }

    #[test]
    fn bad_counts() {
        let r = RngStream::new(0);
        assert_eq!(make_folds(10, 1, &r), Err(Error::BadFoldCount { v: 1, n: 10 }));
        assert_eq!(make_folds(3, 4, &r), Err(Error::BadFoldCount { v: 4, n: 3 }));
    }

    #[test]
    fn explicit_assignment_checked() {
        assert!(FoldAssignment::from_indices(vec![0, 1, 0, 1], 2).is_ok());
        assert!(FoldAssignment::from_indices(vec![0, 0, 0, 1], 2).is_err());
        assert!(FoldAssignment::from_indices(vec![0, 2, 0, 1], 2).is_err());
    }

    proptest! {
        #[test]
        fn partition_properties(n in 2usize..200, v_raw in 2usize..50, seed in any::<u64>()) {
            let v = 2 + (v_raw - 2) % (n - 1);
            let f = make_folds(n, v, &RngStream::new(seed)).unwrap();
            let sizes = f.sizes();
            prop_assert_eq!(sizes.iter().sum::<usize>(), n);
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            prop_assert!(sizes.iter().all(|&s| s > 0));
            let mut seen = vec![0; n];
            for k in 0..v {
                for i in f.validation(k) { seen[i] += 1; }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
            let again = make_folds(n, v, &RngStream::new(seed)).unwrap();
            prop_assert_eq!(f, again);
        }
    }
}
