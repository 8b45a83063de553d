// SPDX-License-Identifier: Apache-2.0
//! nu-one-class SVM with an RBF kernel, solved in the dual by SMO.
//!
//! Dual: minimise `0.5 a'Ka` subject to `sum a = 1`, `0 <= a_i <= 1/(nu n)`.
//! Working pairs use maximal violation for `i` and the second-order gain for
//! `j`. The decision function is `sum a_i k(x_i, z) - rho`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OcSvm {
    /// Support vectors (rows with positive coefficient).
    pub sv: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub gamma: f64,
    pub rho: f64,
    pub nu: f64,
}

/// Diagnostics of a solve over the full training set.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveInfo {
    /// Coefficients of every training row, support or not.
    pub alpha_all: Vec<f64>,
    /// `max_{i in up} -G_i - min_{j in low} -G_j` at exit.
    pub kkt_gap: f64,
    pub iterations: usize,
    pub upper: f64,
}

fn sqdist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Bandwidth `1 / (dim * mean per-dimension variance)`; `1 / dim` when the
/// data has no spread.
pub fn default_gamma(x: ArrayView2<f64>) -> f64 {
    let d = x.ncols().max(1) as f64;
    let var = x.var_axis(Axis(0), 0.0).mean().unwrap_or(0.0);
    if var > 0.0 && var.is_finite() {
        1.0 / (d * var)
    } else {
        1.0 / d
    }
}

pub fn rbf_matrix(x: ArrayView2<f64>, gamma: f64) -> Array2<f64> {
    let n = x.nrows();
    let mut k = Array2::zeros((n, n));
    for i in 0..n {
        k[[i, i]] = 1.0;
        for j in 0..i {
            let v = (-gamma * sqdist(x.row(i), x.row(j))).exp();
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    k
}

/// Solves the dual. `tol` bounds the final KKT gap.
pub fn fit(x: ArrayView2<f64>, nu: f64, gamma: f64, tol: f64, max_iter: usize) -> (OcSvm, SolveInfo) {
    let n = x.nrows();
    assert!(n > 0 && nu > 0.0 && nu <= 1.0, "fit needs rows and 0 < nu <= 1");
    let c = 1.0 / (nu * n as f64);
    let k = rbf_matrix(x, gamma);

    // Feasible start: the first floor(nu n) rows at the bound, the next one
    // takes the remainder.
    let mut alpha = vec![0.0; n];
    let full = ((nu * n as f64).floor() as usize).min(n);
    for a in alpha.iter_mut().take(full) {
        *a = c;
    }
    if full < n {
        alpha[full] = (1.0 - full as f64 * c).max(0.0);
    }
    let mut g: Array1<f64> = k.dot(&Array1::from(alpha.clone()));

    let eps_bound = 1e-12 * c;
    let at_upper = |a: f64| a >= c - eps_bound;
    let at_lower = |a: f64| a <= eps_bound;

    let mut iterations = 0;
    let mut gap;
    loop {
        // i: smallest gradient among rows that may grow.
        let mut i = usize::MAX;
        let mut gmin = f64::INFINITY;
        let mut gmax = f64::NEG_INFINITY;
        for t in 0..n {
            if !at_upper(alpha[t]) && g[t] < gmin {
                gmin = g[t];
                i = t;
            }
            if !at_lower(alpha[t]) && g[t] > gmax {
                gmax = g[t];
            }
        }
        gap = (gmax - gmin).max(0.0);
        if i == usize::MAX || gap < tol || iterations >= max_iter {
            break;
        }
        // j: best second-order gain among rows that may shrink.
        let mut j = usize::MAX;
        let mut best = 0.0;
        for t in 0..n {
            if at_lower(alpha[t]) {
                continue;
            }
            let b = g[t] - g[i];
            if b > 0.0 {
                let eta = (k[[i, i]] + k[[t, t]] - 2.0 * k[[i, t]]).max(1e-12);
                let gain = b * b / eta;
                if gain > best {
                    best = gain;
                    j = t;
                }
            }
        }
        if j == usize::MAX {
            break;
        }
        let eta = (k[[i, i]] + k[[j, j]] - 2.0 * k[[i, j]]).max(1e-12);
        let step = ((g[j] - g[i]) / eta).min(c - alpha[i]).min(alpha[j]);
        alpha[i] += step;
        alpha[j] -= step;
        if at_upper(alpha[i]) {
            alpha[i] = c;
        }
        if at_lower(alpha[j]) {
            alpha[j] = 0.0;
        }
        let (ki, kj) = (k.row(i), k.row(j));
        for t in 0..n {
            g[t] += step * (ki[t] - kj[t]);
        }
        iterations += 1;
    }

    let mut sv = Vec::new();
    let mut coef = Vec::new();
    for t in 0..n {
        if alpha[t] > 0.0 {
            sv.push(x.row(t).to_vec());
            coef.push(alpha[t]);
        }
    }
    let mut model = OcSvm { sv, alpha: coef, gamma, rho: 0.0, nu };

    // Offset: free rows sit on the boundary, so take the smallest kernel sum
    // among them, recomputed the way `decision` does. Rows repeated in the
    // data then score exactly 0 instead of picking up solver roundoff. With
    // no free rows, the middle of [max G over upper rows, min G over zero rows].
    let free: Vec<usize> = (0..n).filter(|&t| !at_upper(alpha[t]) && !at_lower(alpha[t])).collect();
    model.rho = if !free.is_empty() {
        free.iter().map(|&t| model.decision(x.row(t))).fold(f64::INFINITY, f64::min)
    } else {
        let lo = (0..n).filter(|&t| at_upper(alpha[t])).map(|t| g[t]).fold(f64::NEG_INFINITY, f64::max);
        let hi = (0..n).filter(|&t| at_lower(alpha[t])).map(|t| g[t]).fold(f64::INFINITY, f64::min);
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo,
            (false, true) => hi,
            _ => 0.0,
        }
    };
    (model, SolveInfo { alpha_all: alpha, kkt_gap: gap, iterations, upper: c })
}

impl OcSvm {
    pub fn decision(&self, z: ArrayView1<f64>) -> f64 {
        let mut s = 0.0;
        for (v, &a) in self.sv.iter().zip(&self.alpha) {
            let d: f64 = v.iter().zip(z.iter()).map(|(p, q)| (p - q) * (p - q)).sum();
            s += a * (-self.gamma * d).exp();
        }
        s - self.rho
    }

    pub fn decisions(&self, z: ArrayView2<f64>) -> Vec<f64> {
        z.rows().into_iter().map(|r| self.decision(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((n, 3), || rng.random_range(-1.0..1.0))
    }

    #[test]
    fn dual_feasible_and_converged() {
        let x = cloud(300, 1);
        let gamma = default_gamma(x.view());
        let (m, info) = fit(x.view(), 0.1, gamma, 1e-6, 1_000_000);
        let sum: f64 = info.alpha_all.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9, "{sum}");
        assert!(info.alpha_all.iter().all(|&a| (0.0..=info.upper + 1e-15).contains(&a)));
        assert!(info.kkt_gap < 1e-6, "{}", info.kkt_gap);
        let out = m.decisions(x.view()).iter().filter(|&&s| s < 0.0).count();
        assert!(out as f64 / 300.0 <= 0.1 + 0.02, "{out}");
    }

    #[test]
    fn far_point_is_outlier() {
        let x = cloud(200, 2);
        let (m, _) = fit(x.view(), 0.05, default_gamma(x.view()), 1e-6, 1_000_000);
        assert!(m.decision(ndarray::arr1(&[5.0, 5.0, 5.0]).view()) < 0.0);
        assert!(m.decision(ndarray::arr1(&[0.0, 0.0, 0.0]).view()) > 0.0);
    }

    #[test]
    fn nu_one_puts_every_row_at_the_bound() {
        let x = cloud(50, 3);
        let (_, info) = fit(x.view(), 1.0, 0.5, 1e-6, 100_000);
        assert!(info.alpha_all.iter().all(|&a| (a - 1.0 / 50.0).abs() < 1e-15));
    }
}
