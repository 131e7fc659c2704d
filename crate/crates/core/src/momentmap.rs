//! Power-sum moment maps and the matrices around them.
//!
//! `tk` is the unnormalized map `z ↦ (Σ z_i^j)_{j=1..k}` on `k` nodes, `u_matrix`
//! its Jacobian. `MultiIndexBasis` fixes the column order of multivariate
//! moment vectors: graded by total degree, and within a grade in descending
//! lexicographic order, so for `d = 2, k = 2` the order is
//! `(1,0), (0,1), (2,0), (1,1), (0,2)`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{domain, Result};
use crate::linalg::DenseMatrix;
use crate::math::{binomial, ipow, KahanSum, E};

/// Raw power sums `Σ_i x_i^j` for `j = 1..=k`, compensated.
pub fn power_sums(xs: &[f64], k: usize) -> Vec<f64> {
    let mut acc = alloc::vec![KahanSum::new(); k];
    for &x in xs {
        let mut p = 1.0;
        for a in acc.iter_mut() {
            p *= x;
            a.add(p);
        }
    }
    acc.iter().map(KahanSum::value).collect()
}

/// Normalized moments `(1/n) Σ_i x_i^j` for `j = 1..=k`.
pub fn empirical_moments(xs: &[f64], k: usize) -> Vec<f64> {
    let n = xs.len() as f64;
    power_sums(xs, k).into_iter().map(|s| s / n).collect()
}

/// `T_k(z)` with `k = z.len()`.
pub fn tk(z: &[f64]) -> Vec<f64> {
    power_sums(z, z.len())
}

/// Jacobian of `tk`: row `j` (1-based) holds `j w_i^{j-1}`.
pub fn u_matrix(w: &[f64]) -> DenseMatrix {
    let k = w.len();
    let mut u = DenseMatrix::zeros(k);
    for (i, &wi) in w.iter().enumerate() {
        let mut p = 1.0;
        for j in 0..k {
            u[(j, i)] = (j + 1) as f64 * p;
            p *= wi;
        }
    }
    u
}

/// Vandermonde matrix with rows `w_i^0, w_i^1, …` laid out as `V[j][i] = w_i^j`.
pub fn vandermonde(w: &[f64]) -> DenseMatrix {
    let k = w.len();
    let mut v = DenseMatrix::zeros(k);
    for (i, &wi) in w.iter().enumerate() {
        let mut p = 1.0;
        for j in 0..k {
            v[(j, i)] = p;
            p *= wi;
        }
    }
    v
}

/// Gautschi's closed form `‖V(w)^{-1}‖_∞ = max_i Π_{j≠i} (1 + w_j)/|w_i − w_j|`
/// for distinct nonnegative nodes.
pub fn vandermonde_inverse_norm(w: &[f64]) -> Result<f64> {
    if let Some(x) = w.iter().find(|x| !(**x >= 0.0)) {
        return Err(domain(format!(
            "Vandermonde norm needs nonnegative nodes, got {x}"
        )));
    }
    let mut best: f64 = 0.0;
    for (i, &wi) in w.iter().enumerate() {
        let mut prod = 1.0;
        for (j, &wj) in w.iter().enumerate() {
            if i == j {
                continue;
            }
            let gap = (wi - wj).abs();
            if gap == 0.0 {
                return Err(domain(format!(
                    "repeated node {wi} at positions {i} and {j}"
                )));
            }
            prod *= (1.0 + wj) / gap;
        }
        best = best.max(prod);
    }
    Ok(best)
}

/// `(1/k)(4e/sep)^{k-1}`: bound on `‖U(w)^{-1}‖_∞` for nodes in `[0,1]` whose
/// pairwise gaps are at least `sep/(k-1)`.
pub fn u_inverse_norm_bound(k: usize, sep: f64) -> f64 {
    ipow(4.0 * E / sep, (k as u32).saturating_sub(1)) / k as f64
}

/// `D(k, d) = binom(k+d, d) − 1`: the number of monomials of degree `1..=k` in `d` variables.
pub fn moment_dimension(k: u32, d: u32) -> usize {
    (binomial(k + d, d) as usize) - 1
}

/// Ordered list of multi-indices `α` with `0 < |α| <= k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndexBasis {
    k: u32,
    d: u32,
    indices: Vec<Vec<u32>>,
}

impl MultiIndexBasis {
    pub fn new(k: u32, d: u32) -> Self {
        let mut indices = Vec::with_capacity(moment_dimension(k, d));
        let mut cur = alloc::vec![0u32; d as usize];
        for g in 1..=k {
            push_grade(&mut indices, &mut cur, 0, g);
        }
        Self { k, d, indices }
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[Vec<u32>] {
        &self.indices
    }

    /// `P_k^d(x) = (x^α)_α` in basis order.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(
            x.len(),
            self.d as usize,
            "point dimension must match the basis"
        );
        // powers[c][e] = x_c^e
        let powers: Vec<Vec<f64>> = x
            .iter()
            .map(|&xc| (0..=self.k).map(|e| ipow(xc, e)).collect())
            .collect();
        self.indices
            .iter()
            .map(|a| {
                a.iter()
                    .enumerate()
                    .map(|(c, &e)| powers[c][e as usize])
                    .product()
            })
            .collect()
    }
}

fn push_grade(out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>, pos: usize, remaining: u32) {
    if pos + 1 == cur.len() {
        cur[pos] = remaining;
        out.push(cur.clone());
        return;
    }
    for e in (0..=remaining).rev() {
        cur[pos] = e;
        push_grade(out, cur, pos + 1, remaining - e);
    }
    cur[pos] = 0;
}

/// `P_k^d(x)` for a single point.
pub fn multimoment_map(x: &[f64], k: u32) -> Vec<f64> {
    MultiIndexBasis::new(k, x.len() as u32).eval(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn tk_examples() {
        assert_eq!(tk(&[0.0, 1.0]), vec![1.0, 1.0]);
        assert_eq!(tk(&[0.25, 0.75]), vec![1.0, 0.625]);
        let c = 0.3;
        let t = tk(&[c; 3]);
        for (j, v) in t.iter().enumerate() {
            assert!((v - 3.0 * ipow(c, j as u32 + 1)).abs() < 1e-15);
        }
    }

    #[test]
    fn u_matrix_examples() {
        let u = u_matrix(&[0.0, 1.0]);
        assert_eq!(u.row(0), &[1.0, 1.0]);
        assert_eq!(u.row(1), &[0.0, 2.0]);
        let u = u_matrix(&[0.3, 0.6]);
        assert_eq!(u.row(1), &[0.6, 1.2]);
    }

    #[test]
    fn u_matrix_matches_central_differences() {
        let w = [0.2, 0.7, 0.9];
        let u = u_matrix(&w);
        let h = 1e-6;
        for i in 0..3 {
            let mut wp = w;
            let mut wm = w;
            wp[i] += h;
            wm[i] -= h;
            let (tp, tm) = (tk(&wp), tk(&wm));
            for j in 0..3 {
                let fd = (tp[j] - tm[j]) / (2.0 * h);
                assert!((fd - u[(j, i)]).abs() < 1e-6 * u[(j, i)].abs().max(1.0));
            }
        }
    }

    #[test]
    fn gautschi_examples() {
        assert_eq!(vandermonde_inverse_norm(&[0.0, 1.0]).unwrap(), 2.0);
        assert_eq!(vandermonde_inverse_norm(&[0.0, 0.5, 1.0]).unwrap(), 8.0);
        assert_eq!(vandermonde_inverse_norm(&[0.37]).unwrap(), 1.0);
        assert!(vandermonde_inverse_norm(&[0.2, 0.2]).is_err());
        assert!(vandermonde_inverse_norm(&[-0.1, 0.2]).is_err());
    }

    #[test]
    fn gautschi_matches_direct_inversion() {
        let w = [0.05, 0.3, 0.55, 0.8, 1.0];
        let direct = vandermonde(&w).inverse().unwrap().norm_inf();
        let closed = vandermonde_inverse_norm(&w).unwrap();
        assert!(((direct - closed) / closed).abs() < 1e-8);
    }

    #[test]
    fn u_bound_examples() {
        assert_eq!(u_inverse_norm_bound(1, 0.3), 1.0);
        assert!((u_inverse_norm_bound(2, 1.0) - 2.0 * E).abs() < 1e-14);
    }

    #[test]
    fn multimoment_examples() {
        assert_eq!(
            multimoment_map(&[2.0, 3.0], 2),
            vec![2.0, 3.0, 4.0, 6.0, 9.0]
        );
        assert_eq!(multimoment_map(&[0.5], 3), vec![0.5, 0.25, 0.125]);
        assert_eq!(moment_dimension(2, 2), 5);
        assert_eq!(moment_dimension(3, 1), 3);
        let b = MultiIndexBasis::new(2, 2);
        assert_eq!(
            b.indices(),
            &[vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
    }
}
