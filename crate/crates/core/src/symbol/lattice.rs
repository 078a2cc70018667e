//! Frequency lattices in Z^n and the uniform time grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frequencies `xi` in Z^n with Euclidean norm at most `radius`.
///
/// For `dim <= 2` every such point is enumerated. For `dim >= 3` each dyadic
/// annulus `[2^k, 2^{k+1})` is subsampled on the sublattice
/// `(2^k / 4) Z^n` (stride at least one), which keeps a bounded number of
/// points per annulus. The origin is always included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    pub dim: usize,
    pub radius: u64,
}

/// Uniform grid `t_j = 2 pi j / len` on the circle; `len` is a power of two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub len: usize,
}

impl TimeGrid {
    pub fn new(len: usize) -> Result<Self> {
        if len < 4 || !len.is_power_of_two() {
            return Err(Error::NonPowerOfTwo(len));
        }
        Ok(TimeGrid { len })
    }

    pub fn step(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.len as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len).map(|j| j as f64 * self.step()).collect()
    }
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid { len: 64 }
    }
}

/// Squared Euclidean norm, exact.
pub fn norm_sq(xi: &[i64]) -> u128 {
    xi.iter().map(|&x| (x as i128 * x as i128) as u128).sum()
}

pub fn norm(xi: &[i64]) -> f64 {
    (norm_sq(xi) as f64).sqrt()
}

/// Index `k` of the dyadic annulus `2^k <= |xi| < 2^{k+1}`; `None` at the origin.
pub fn annulus_of_norm_sq(s: u128) -> Option<u32> {
    if s == 0 {
        return None;
    }
    // 4^k <= s < 4^{k+1}
    let bits = 127 - s.leading_zeros();
    Some(bits / 2)
}

pub fn annulus_index(xi: &[i64]) -> Option<u32> {
    annulus_of_norm_sq(norm_sq(xi))
}

impl Lattice {
    pub fn new(dim: usize, radius: u64) -> Result<Self> {
        if dim == 0 || dim > 9 {
            return Err(Error::DimensionMismatch(format!("spatial dimension {dim} not in 1..=9")));
        }
        Ok(Lattice { dim, radius })
    }

    /// Smallest lattice containing all given points.
    pub fn enclosing<'a, I: IntoIterator<Item = &'a [i64]>>(dim: usize, points: I) -> Result<Self> {
        let r = points.into_iter().map(norm_sq).max().unwrap_or(0);
        Lattice::new(dim, (r as f64).sqrt().ceil() as u64)
    }

    fn r_sq(&self) -> u128 {
        self.radius as u128 * self.radius as u128
    }

    /// Whether every lattice point of annulus `k` lies within the radius.
    pub fn annulus_complete(&self, k: u32) -> bool {
        let outer = 1u128 << (k + 1);
        if self.dim == 1 {
            outer - 1 <= self.radius as u128
        } else {
            outer * outer - 1 <= self.r_sq()
        }
    }

    /// Number of complete annuli `k = 0, 1, ...`.
    pub fn complete_annuli(&self) -> u32 {
        let mut k = 0;
        while k < 62 && self.annulus_complete(k) {
            k += 1;
        }
        k
    }

    pub fn contains(&self, xi: &[i64]) -> bool {
        xi.len() == self.dim && norm_sq(xi) <= self.r_sq()
    }

    /// Visit every sampled point in lexicographic order without allocating.
    pub fn for_each<F: FnMut(&[i64])>(&self, mut f: F) {
        let r = self.radius as i64;
        match self.dim {
            1 => {
                let mut buf = [0i64; 1];
                for x in -r..=r {
                    buf[0] = x;
                    f(&buf);
                }
            }
            2 => {
                let r_sq = self.r_sq();
                let mut buf = [0i64; 2];
                for x in -r..=r {
                    for y in -r..=r {
                        buf[0] = x;
                        buf[1] = y;
                        if norm_sq(&buf) <= r_sq {
                            f(&buf);
                        }
                    }
                }
            }
            _ => {
                for p in self.subsampled_points() {
                    f(&p);
                }
            }
        }
    }

    /// All sampled points, lexicographically sorted.
    pub fn points(&self) -> Vec<Vec<i64>> {
        let mut out = Vec::new();
        self.for_each(|p| out.push(p.to_vec()));
        out
    }

    /// Parallel fold over every sampled point. Partial states built by
    /// `identity` and `visit` are combined with `merge`; the first error wins.
    pub fn try_par_fold<T, Id, V, M>(&self, identity: Id, visit: V, merge: M) -> Result<T>
    where
        T: Send,
        Id: Fn() -> T + Sync + Send,
        V: Fn(&mut T, &[i64]) -> Result<()> + Sync + Send,
        M: Fn(&mut T, T) + Sync + Send,
    {
        const CHUNK: i64 = 2048;
        let combine = |a: Result<T>, b: Result<T>| match (a, b) {
            (Ok(mut a), Ok(b)) => {
                merge(&mut a, b);
                Ok(a)
            }
            (Err(e), _) | (_, Err(e)) => Err(e),
        };
        if self.dim == 1 {
            let r = self.radius as i64;
            let chunks = (2 * r + 1 + CHUNK - 1) / CHUNK;
            (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut state = identity();
                    let lo = -r + c * CHUNK;
                    let hi = (lo + CHUNK - 1).min(r);
                    for x in lo..=hi {
                        visit(&mut state, &[x])?;
                    }
                    Ok(state)
                })
                .reduce(|| Ok(identity()), combine)
        } else {
            self.points()
                .par_chunks(CHUNK as usize)
                .map(|chunk| {
                    let mut state = identity();
                    for p in chunk {
                        visit(&mut state, p)?;
                    }
                    Ok(state)
                })
                .reduce(|| Ok(identity()), combine)
        }
    }

    fn subsampled_points(&self) -> Vec<Vec<i64>> {
        let mut out = vec![vec![0i64; self.dim]];
        let r_sq = self.r_sq();
        let mut k = 0u32;
        while (1u128 << (2 * k)) <= r_sq {
            let stride = ((1i64 << k) / 4).max(1);
            let outer = 1i64 << (k + 1);
            let m = outer / stride;
            let mut idx = vec![-m; self.dim];
            loop {
                let p: Vec<i64> = idx.iter().map(|&i| i * stride).collect();
                let s = norm_sq(&p);
                if annulus_of_norm_sq(s) == Some(k) && s <= r_sq {
                    out.push(p);
                }
                // odometer increment
                let mut d = 0;
                loop {
                    if d == self.dim {
                        break;
                    }
                    idx[d] += 1;
                    if idx[d] > m {
                        idx[d] = -m;
                        d += 1;
                    } else {
                        break;
                    }
                }
                if d == self.dim {
                    break;
                }
            }
            k += 1;
        }
        out.sort();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annulus_indices() {
        assert_eq!(annulus_index(&[0]), None);
        assert_eq!(annulus_index(&[1]), Some(0));
        assert_eq!(annulus_index(&[-3]), Some(1));
        assert_eq!(annulus_index(&[4]), Some(2));
        assert_eq!(annulus_index(&[1, 1]), Some(0));
        assert_eq!(annulus_index(&[2, 0]), Some(1));
        assert_eq!(annulus_index(&[1 << 24]), Some(24));
    }

    #[test]
    fn complete_annuli_counts() {
        assert_eq!(Lattice::new(1, 255).unwrap().complete_annuli(), 8);
        assert_eq!(Lattice::new(1, 256).unwrap().complete_annuli(), 8);
        assert_eq!(Lattice::new(1, 1 << 25).unwrap().complete_annuli(), 25);
        assert_eq!(Lattice::new(2, 16).unwrap().complete_annuli(), 4);
    }

    #[test]
    fn enumerates_boxes_and_subsamples() {
        assert_eq!(Lattice::new(1, 3).unwrap().points().len(), 7);
        assert_eq!(Lattice::new(2, 1).unwrap().points().len(), 5);
        let l = Lattice::new(3, 16).unwrap();
        let pts = l.points();
        assert!(pts.contains(&vec![0, 0, 0]));
        assert!(pts.iter().all(|p| l.contains(p)));
        for k in 0..l.complete_annuli() {
            assert!(pts.iter().any(|p| annulus_index(p) == Some(k)));
        }
    }

    #[test]
    fn grid_must_be_power_of_two() {
        assert!(TimeGrid::new(48).is_err());
        assert_eq!(TimeGrid::new(64).unwrap().len, 64);
    }
}
