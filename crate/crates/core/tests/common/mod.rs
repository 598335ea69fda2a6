//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls into the library's numerical code: basis functions,
//! likelihoods, criteria and linear algebra are recomputed from their
//! defining formulas with plain loops.

#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Vector = Vec<f64>;
pub type Matrix = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------- small dense linear algebra ----------

pub fn zeros(r: usize, c: usize) -> Matrix {
    vec![vec![0.0; c]; r]
}

pub fn transpose(a: &Matrix) -> Matrix {
    let (r, c) = (a.len(), a.first().map_or(0, Vec::len));
    (0..c).map(|j| (0..r).map(|i| a[i][j]).collect()).collect()
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let (n, k, m) = (a.len(), b.len(), b.first().map_or(0, Vec::len));
    let mut out = zeros(n, m);
    for i in 0..n {
        for l in 0..k {
            for j in 0..m {
                out[i][j] += a[i][l] * b[l][j];
            }
        }
    }
    out
}

/// Solves `A X = B` by Gauss-Jordan elimination with partial pivoting.
pub fn solve(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let m = b[0].len();
    let mut aug: Matrix = (0..n)
        .map(|i| a[i].iter().chain(b[i].iter()).copied().collect())
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| aug[x][col].abs().total_cmp(&aug[y][col].abs()))
            .unwrap();
        aug.swap(col, piv);
        let p = aug[col][col];
        assert!(p.abs() > 1e-300, "singular matrix in oracle solve");
        for v in aug[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col {
                let f = aug[r][col];
                if f != 0.0 {
                    for c in 0..n + m {
                        aug[r][c] -= f * aug[col][c];
                    }
                }
            }
        }
    }
    aug.into_iter().map(|row| row[n..].to_vec()).collect()
}

pub fn solve_vec(a: &Matrix, b: &Vector) -> Vector {
    let cols: Matrix = b.iter().map(|&v| vec![v]).collect();
    solve(a, &cols).into_iter().map(|r| r[0]).collect()
}

/// `log det` of a symmetric positive definite matrix by a loop Cholesky.
pub fn log_det_cholesky(a: &Matrix) -> f64 {
    let n = a.len();
    let mut l = zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                assert!(s > 0.0, "matrix not positive definite in oracle Cholesky");
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    (0..n).map(|i| 2.0 * l[i][i].ln()).sum()
}

pub fn max_abs(a: &Matrix) -> f64 {
    a.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

/// Largest entrywise deviation, each measured relative to
/// `max(|b_ij|, floor · max|B|)`.
pub fn max_entry_rel_err(a: &Matrix, b: &Matrix, floor: f64) -> f64 {
    let scale = max_abs(b);
    let mut worst = 0.0f64;
    for (ra, rb) in a.iter().zip(b) {
        for (x, y) in ra.iter().zip(rb) {
            let denom = y.abs().max(floor * scale).max(f64::MIN_POSITIVE);
            worst = worst.max((x - y).abs() / denom);
        }
    }
    worst
}

// ---------- finite differences and a generic optimizer ----------

/// Central differences with one Richardson extrapolation step.
pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vector {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let step = h * x[i].abs().max(1.0);
            let mut central = |s: f64| {
                xp[i] = x[i] + s;
                let a = f(&xp);
                xp[i] = x[i] - s;
                let b = f(&xp);
                xp[i] = x[i];
                (a - b) / (2.0 * s)
            };
            let d1 = central(step);
            let d2 = central(step / 2.0);
            (4.0 * d2 - d1) / 3.0
        })
        .collect()
}

/// Jacobian of a vector function by Richardson-extrapolated central
/// differences; row `i` holds the derivative of output `i`.
pub fn fd_jacobian(g: &dyn Fn(&[f64]) -> Vector, x: &[f64], h: f64) -> Matrix {
    let n = x.len();
    let m = g(x).len();
    let mut jac = zeros(m, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let step = h * x[j].abs().max(1.0);
        let mut central = |s: f64| -> Vector {
            xp[j] = x[j] + s;
            let a = g(&xp);
            xp[j] = x[j] - s;
            let b = g(&xp);
            xp[j] = x[j];
            a.iter().zip(&b).map(|(p, q)| (p - q) / (2.0 * s)).collect()
        };
        let d1 = central(step);
        let d2 = central(step / 2.0);
        for i in 0..m {
            jac[i][j] = (4.0 * d2[i] - d1[i]) / 3.0;
        }
    }
    jac
}

/// Maximizes `f` using only function values: Newton steps on
/// finite-difference derivatives with Levenberg damping and backtracking.
pub fn maximize(f: &dyn Fn(&[f64]) -> f64, x0: &[f64]) -> (Vector, f64) {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut damping = 1e-6;
    for _ in 0..500 {
        let g = fd_gradient(f, &x, 1e-5);
        let grad_fn = |y: &[f64]| fd_gradient(f, y, 1e-4);
        let h = fd_jacobian(&grad_fn, &x, 1e-3);
        let gnorm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gnorm <= 1e-10 * (1.0 + fx.abs()) {
            break;
        }
        let mut improved = false;
        for _ in 0..60 {
            // solve (−H + μ·diag) d = g
            let mut a = zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    a[i][j] = -0.5 * (h[i][j] + h[j][i]);
                }
                a[i][i] += damping * (1.0 + a[i][i].abs());
            }
            let d = solve_vec(&a, &g);
            let trial: Vector = x.iter().zip(&d).map(|(a, b)| a + b).collect();
            let ft = f(&trial);
            if ft.is_finite() && ft >= fx {
                let gain = ft - fx;
                x = trial;
                fx = ft;
                damping = (damping * 0.1).max(1e-12);
                improved = gain > 0.0;
                break;
            }
            damping *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (x, fx)
}

// ---------- Gaussian basis and smoothing objective ----------

/// Centers and width for `m` functions on `[a, b]`: knots spaced
/// `h = (b − a)/(m − 3)` starting three spacings below `a`, centers at
/// knots 3..m+2 counted from 1, width `2h/3`.
pub fn oracle_basis(a: f64, b: f64, m: usize) -> (Vector, f64) {
    let h = (b - a) / (m as f64 - 3.0);
    let knots: Vector = (0..m + 4).map(|j| a + (j as f64 - 3.0) * h).collect();
    let centers = (0..m).map(|k| knots[k + 2]).collect();
    (centers, 2.0 * h / 3.0)
}

pub fn oracle_phi(t: f64, centers: &[f64], width: f64) -> Vector {
    centers
        .iter()
        .map(|mu| (-(t - mu) * (t - mu) / (2.0 * width * width)).exp())
        .collect()
}

/// `D₂ᵀD₂` for the second-difference operator on `m` coefficients.
pub fn oracle_penalty(m: usize) -> Matrix {
    let mut d = zeros(m - 2, m);
    for r in 0..m - 2 {
        d[r][r] = 1.0;
        d[r][r + 1] = -2.0;
        d[r][r + 2] = 1.0;
    }
    matmul(&transpose(&d), &d)
}

/// Penalized smoothing log-likelihood at `(ω, σ²)`.
pub fn smooth_objective(
    times: &[f64],
    x: &[f64],
    centers: &[f64],
    width: f64,
    zeta: f64,
    omega: &[f64],
    sigma2: f64,
) -> f64 {
    let n = times.len() as f64;
    let k = oracle_penalty(centers.len());
    let mut rss = 0.0;
    for (t, xv) in times.iter().zip(x) {
        let phi = oracle_phi(*t, centers, width);
        let fit: f64 = phi.iter().zip(omega).map(|(p, w)| p * w).sum();
        rss += (xv - fit).powi(2);
    }
    let mut quad = 0.0;
    for i in 0..omega.len() {
        for j in 0..omega.len() {
            quad += omega[i] * k[i][j] * omega[j];
        }
    }
    -0.5 * n * (2.0 * PI * sigma2).ln() - rss / (2.0 * sigma2) - 0.5 * n * zeta * quad
}

/// Per-observation log density `log N(x_i; φ(t_i)ᵀω, σ²)`.
pub fn smooth_obs_loglik(t: f64, x: f64, centers: &[f64], width: f64, omega: &[f64], sigma2: f64) -> f64 {
    let phi = oracle_phi(t, centers, width);
    let fit: f64 = phi.iter().zip(omega).map(|(p, w)| p * w).sum();
    -0.5 * (2.0 * PI * sigma2).ln() - (x - fit).powi(2) / (2.0 * sigma2)
}

// ---------- multinomial logistic model ----------

/// `β` as `L−1` rows of `m+1` entries, flattened in row order.
pub fn unstack(theta: &[f64], blocks: usize) -> Matrix {
    let p = theta.len() / blocks;
    (0..blocks).map(|k| theta[k * p..(k + 1) * p].to_vec()).collect()
}

/// Log-probabilities of all `L` classes for one design row.
pub fn log_probs(z: &[f64], beta: &Matrix) -> Vector {
    let eta: Vector = beta.iter().map(|b| b.iter().zip(z).map(|(x, y)| x * y).sum()).collect();
    let top = eta.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut sum = (-top).exp();
    for e in &eta {
        sum += (e - top).exp();
    }
    let lse = top + sum.ln();
    eta.iter().map(|e| e - lse).chain(std::iter::once(-lse)).collect()
}

/// `Σ_k r_k η_k − log(1 + Σ exp η_k)` for one row with responses `r`.
pub fn row_loglik(z: &[f64], beta: &Matrix, r: &[f64]) -> f64 {
    let lp = log_probs(z, beta);
    let blocks = beta.len();
    // with r on the L−1 non-reference classes, r_L = 1 − Σ r_k
    let mut total = 0.0;
    let mut rest = 1.0;
    for k in 0..blocks {
        total += r[k] * lp[k];
        rest -= r[k];
    }
    total + rest * lp[blocks]
}

/// Penalized log-likelihood with an identity `K*`, penalty weight `n₁λ/2`.
pub fn penalized_loglik(z: &Matrix, responses: &Matrix, n1: usize, theta: &[f64], lambda: f64) -> f64 {
    let blocks = responses[0].len();
    let beta = unstack(theta, blocks);
    let mut total = 0.0;
    for (row, r) in z.iter().zip(responses) {
        total += row_loglik(row, &beta, r);
    }
    let mut pen = 0.0;
    for b in &beta {
        for v in &b[1..] {
            pen += v * v;
        }
    }
    total - 0.5 * n1 as f64 * lambda * pen
}

/// Score of the penalized log-likelihood written out with loops.
pub fn penalized_score(z: &Matrix, responses: &Matrix, n1: usize, theta: &[f64], lambda: f64) -> Vector {
    let blocks = responses[0].len();
    let p = z[0].len();
    let beta = unstack(theta, blocks);
    let mut g = vec![0.0; blocks * p];
    for (row, r) in z.iter().zip(responses) {
        let lp = log_probs(row, &beta);
        for k in 0..blocks {
            let resid = r[k] - lp[k].exp();
            for j in 0..p {
                g[k * p + j] += resid * row[j];
            }
        }
    }
    for k in 0..blocks {
        for j in 1..p {
            g[k * p + j] -= n1 as f64 * lambda * beta[k][j];
        }
    }
    g
}

/// GIC and GBIC for identity `K*` from the labeled rows, assembled as sums
/// over observations: `Q = (1/n₁) Σ_α (s_α − λEβ) s_αᵀ` with `s_α` the
/// per-observation score, and `R` the per-observation expected information
/// averaged plus `λE`.
pub fn loop_criteria(z: &Matrix, y: &Matrix, theta: &[f64], lambda: f64) -> (f64, f64) {
    let n1 = z.len();
    let blocks = y[0].len();
    let p = z[0].len();
    let dim = blocks * p;
    let beta = unstack(theta, blocks);
    let e_beta: Vector = (0..dim).map(|i| if i % p == 0 { 0.0 } else { theta[i] }).collect();
    let mut q = zeros(dim, dim);
    let mut r = zeros(dim, dim);
    let mut loglik = 0.0;
    for a in 0..n1 {
        let lp = log_probs(&z[a], &beta);
        let pi: Vector = lp.iter().map(|v| v.exp()).collect();
        loglik += row_loglik(&z[a], &beta, &y[a]);
        let s: Vector = (0..dim).map(|i| (y[a][i / p] - pi[i / p]) * z[a][i % p]).collect();
        for i in 0..dim {
            for j in 0..dim {
                q[i][j] += (s[i] - lambda * e_beta[i]) * s[j];
                let (k, l) = (i / p, j / p);
                let w = if k == l { pi[k] * (1.0 - pi[k]) } else { -pi[k] * pi[l] };
                r[i][j] += w * z[a][i % p] * z[a][j % p];
            }
        }
    }
    for i in 0..dim {
        for j in 0..dim {
            q[i][j] /= n1 as f64;
            r[i][j] /= n1 as f64;
        }
        if i % p != 0 {
            r[i][i] += lambda;
        }
    }
    let rinv_q = solve(&r, &q);
    let trace: f64 = (0..dim).map(|i| rinv_q[i][i]).sum();
    let gic = -2.0 * loglik + 2.0 * trace;

    let d = (p - 1) as f64;
    let quad: f64 = beta.iter().map(|b| b[1..].iter().map(|v| v * v).sum::<f64>()).sum();
    let lb = blocks as f64;
    // identity K* has |K|₊ = 1, so its log term vanishes
    let gbic = -2.0 * loglik + n1 as f64 * lambda * quad + log_det_cholesky(&r)
        - lb * (p as f64 - d) * lambda.ln()
        - lb * d * (2.0 * PI / n1 as f64).ln();
    (gic, gbic)
}

/// Random design rows `(1, z₁, …, z_m)` with class labels cycling through
/// `1..=L` on the first `n1` rows.
pub fn random_rows(n: usize, m: usize, seed: u64, spread: f64) -> Matrix {
    let mut g = rng(seed);
    (0..n)
        .map(|_| {
            std::iter::once(1.0)
                .chain((0..m).map(|_| g.random_range(-spread..spread)))
                .collect()
        })
        .collect()
}

pub fn one_hot(classes: &[usize], n_classes: usize) -> Matrix {
    classes
        .iter()
        .map(|&c| (1..n_classes).map(|k| if k == c { 1.0 } else { 0.0 }).collect())
        .collect()
}
