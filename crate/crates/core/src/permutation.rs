//! Row permutations stored as index maps.
//!
//! `map[i]` is the image of `i`. Applied to a matrix, row `i` of the result is
//! row `map[i]` of the input, which is the action of the permutation matrix
//! with a one at `(i, map[i])`.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::random::seeded_rng;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        if n == 0 {
            return Err(Error::InvalidShape("empty permutation".into()));
        }
        let mut seen = vec![false; n];
        for &v in &map {
            if v >= n || std::mem::replace(&mut seen[v], true) {
                return Err(Error::InvalidShape(format!(
                    "{map:?} is not a bijection on 0..{n}"
                )));
            }
        }
        Ok(Permutation { map })
    }

    pub fn identity(n: usize) -> Self {
        assert!(n >= 1, "identity permutation needs n >= 1");
        Permutation {
            map: (0..n).collect(),
        }
    }

    /// The permutation `i ↦ n − 1 − i`.
    pub fn reversal(n: usize) -> Self {
        assert!(n >= 1);
        Permutation {
            map: (0..n).rev().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.map
    }

    #[inline]
    pub fn get(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &v)| i == v)
    }

    /// Number of positions where the two permutations disagree.
    pub fn hamming(&self, other: &Permutation) -> Result<usize> {
        self.check_len(other.len())?;
        Ok(self.map.iter().zip(&other.map).filter(|(a, b)| a != b).count())
    }

    /// The permutation whose row action is "apply `other` first, then `self`":
    /// `apply_rows(compose(a, b), M) == apply_rows(a, apply_rows(b, M))`.
    pub fn compose(&self, other: &Permutation) -> Result<Permutation> {
        self.check_len(other.len())?;
        Ok(Permutation {
            map: self.map.iter().map(|&i| other.map[i]).collect(),
        })
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.len()];
        for (i, &v) in self.map.iter().enumerate() {
            inv[v] = i;
        }
        Permutation { map: inv }
    }

    /// `M'[i, :] = M[map[i], :]`.
    ///
    /// # Panics
    /// If `m` does not have `len()` rows; use [`Permutation::try_apply_rows`]
    /// for a fallible version.
    pub fn apply_rows(&self, m: ArrayView2<'_, f64>) -> Array2<f64> {
        self.try_apply_rows(m).expect("row count must match permutation length")
    }

    pub fn try_apply_rows(&self, m: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_len(m.nrows())?;
        Ok(m.select(Axis(0), &self.map))
    }

    /// Applies the permutation to a slice: `out[i] = v[map[i]]`.
    pub fn apply_slice<T: Clone>(&self, v: &[T]) -> Vec<T> {
        self.map.iter().map(|&i| v[i].clone()).collect()
    }

    fn check_len(&self, other: usize) -> Result<()> {
        if self.len() != other {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                actual: other,
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(map: Vec<usize>) -> Result<Self> {
        Permutation::new(map)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.map
    }
}

/// A permutation at Hamming distance exactly `h` from the identity: `h`
/// positions chosen uniformly, then a uniform derangement of them (by
/// rejection).
pub fn random_with_displacement(n: usize, h: usize, seed: u64) -> Result<Permutation> {
    if n == 0 || h == 1 || h > n {
        return Err(Error::InvalidDisplacement { n, h });
    }
    let mut map: Vec<usize> = (0..n).collect();
    if h == 0 {
        return Ok(Permutation { map });
    }
    let mut rng = seeded_rng(seed);
    let mut chosen = index::sample(&mut rng, n, h).into_vec();
    chosen.sort_unstable();
    let mut images = chosen.clone();
    loop {
        images.shuffle(&mut rng);
        if images.iter().zip(&chosen).all(|(a, b)| a != b) {
            break;
        }
    }
    for (&pos, &img) in chosen.iter().zip(&images) {
        map[pos] = img;
    }
    Ok(Permutation { map })
}

/// Every permutation of `0..n` in lexicographic order. Test oracle helper;
/// only sensible for small `n`.
pub fn all_permutations(n: usize) -> Vec<Permutation> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Permutation>) {
        let n = used.len();
        if prefix.len() == n {
            out.push(Permutation { map: prefix.clone() });
            return;
        }
        for v in 0..n {
            if !used[v] {
                used[v] = true;
                prefix.push(v);
                rec(prefix, used, out);
                prefix.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}
