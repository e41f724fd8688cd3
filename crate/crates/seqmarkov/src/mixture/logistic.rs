//! Weighted multinomial-logistic estimation by Newton-Raphson.
//!
//! Maximizes `Σ_i Σ_k w_ik · ln softmax(x_iᵀβ)_k` over the coefficient
//! columns of the non-reference clusters, with the reference column pinned
//! to zero. The soft labels `w` are posterior cluster memberships during EM.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Reject Newton steps whose Hessian condition estimate exceeds this.
const SINGULAR_CONDITION: f64 = 1e12;
const MAX_ITERATIONS: usize = 100;
const GRADIENT_TOLERANCE: f64 = 1e-9;
const MAX_HALVINGS: usize = 10;

/// Row-wise softmax of the logits implied by `design · beta`, reference
/// cluster logit fixed at 0.
pub(crate) fn softmax_probabilities(design: &[Vec<f64>], beta: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k_count = beta.first().map(|r| r.len()).unwrap_or(1);
    design
        .iter()
        .map(|x| {
            let logits: Vec<f64> = (0..k_count)
                .map(|k| x.iter().zip(beta).map(|(xi, row)| xi * row[k]).sum())
                .collect();
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
            let total: f64 = exps.iter().sum();
            exps.iter().map(|e| e / total).collect()
        })
        .collect()
}

fn weighted_log_likelihood(design: &[Vec<f64>], beta: &[Vec<f64>], soft: &[Vec<f64>]) -> f64 {
    let k_count = beta.first().map(|r| r.len()).unwrap_or(1);
    let mut total = 0.0;
    for (x, w) in design.iter().zip(soft) {
        let logits: Vec<f64> = (0..k_count)
            .map(|k| x.iter().zip(beta).map(|(xi, row)| xi * row[k]).sum())
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        for (k, wk) in w.iter().enumerate() {
            if *wk > 0.0 {
                total += wk * (logits[k] - lse);
            }
        }
    }
    total
}

/// Observed information of the free coefficients (clusters 1..K flattened
/// column-major over design columns), evaluated at `beta`.
fn information_matrix(design: &[Vec<f64>], probs: &[Vec<f64>], p: usize, k: usize) -> DMatrix<f64> {
    let dim = p * (k - 1);
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for (x, pi) in design.iter().zip(probs) {
        for a in 1..k {
            for b in 1..k {
                let w = pi[a] * (if a == b { 1.0 - pi[b] } else { -pi[b] });
                for ia in 0..p {
                    for ib in 0..p {
                        h[((a - 1) * p + ia, (b - 1) * p + ib)] += x[ia] * x[ib] * w;
                    }
                }
            }
        }
    }
    h
}

fn gradient(design: &[Vec<f64>], probs: &[Vec<f64>], soft: &[Vec<f64>], p: usize, k: usize) -> DVector<f64> {
    let mut g = DVector::<f64>::zeros(p * (k - 1));
    for ((x, pi), w) in design.iter().zip(probs).zip(soft) {
        for a in 1..k {
            let d = w[a] - pi[a];
            for (ia, xi) in x.iter().enumerate() {
                g[(a - 1) * p + ia] += xi * d;
            }
        }
    }
    g
}

/// Solve `H · step = g`, failing when `H` is numerically singular.
fn solve_information(h: &DMatrix<f64>, g: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = h.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0f64, f64::max);
    let smin = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    if !smax.is_finite() || smax <= 0.0 || smin <= 0.0 || smax / smin > SINGULAR_CONDITION {
        return Err(Error::SingularHessian);
    }
    svd.solve(g, 0.0).map_err(|_| Error::SingularHessian)
}

/// Returns the P×K coefficient grid (reference column zero) maximizing the
/// weighted multinomial log-likelihood, starting from `start`.
pub(crate) fn fit_weighted_multinomial(
    design: &[Vec<f64>],
    soft: &[Vec<f64>],
    start: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    let p = start.len();
    let k = start.first().map(|r| r.len()).unwrap_or(0);
    if k <= 1 {
        // No free coefficients; nothing to estimate.
        return Ok(start.to_vec());
    }
    let mut beta: Vec<Vec<f64>> = start.to_vec();
    let mut ll = weighted_log_likelihood(design, &beta, soft);
    for _ in 0..MAX_ITERATIONS {
        let probs = softmax_probabilities(design, &beta);
        let h = information_matrix(design, &probs, p, k);
        let g = gradient(design, &probs, soft, p, k);
        let step = solve_information(&h, &g)?;
        if g.amax() < GRADIENT_TOLERANCE {
            return Ok(beta);
        }
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let mut candidate = beta.clone();
            for a in 1..k {
                for ia in 0..p {
                    candidate[ia][a] += scale * step[(a - 1) * p + ia];
                }
            }
            let candidate_ll = weighted_log_likelihood(design, &candidate, soft);
            if candidate_ll >= ll - 1e-12 && candidate_ll.is_finite() {
                beta = candidate;
                ll = candidate_ll;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            // The full and halved steps all decrease the objective; the
            // current point is as good as this quadratic model gets.
            return Ok(beta);
        }
    }
    Ok(beta)
}

/// Standard errors: square roots of the diagonal of the inverse observed
/// information at `beta`, shaped like the coefficient grid (reference
/// column zero).
pub(crate) fn standard_errors(design: &[Vec<f64>], beta: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let p = beta.len();
    let k = beta.first().map(|r| r.len()).unwrap_or(0);
    let mut out = vec![vec![0.0; k]; p];
    if k <= 1 {
        return Ok(out);
    }
    let probs = softmax_probabilities(design, beta);
    let h = information_matrix(design, &probs, p, k);
    let inv = h
        .clone()
        .try_inverse()
        .ok_or(Error::SingularHessian)?;
    let svd = h.svd(false, false);
    let smax = svd.singular_values.iter().copied().fold(0.0f64, f64::max);
    let smin = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    if !smax.is_finite() || smin <= 0.0 || smax / smin > SINGULAR_CONDITION {
        return Err(Error::SingularHessian);
    }
    for a in 1..k {
        for ia in 0..p {
            out[ia][a] = inv[((a - 1) * p + ia, (a - 1) * p + ia)].max(0.0).sqrt();
        }
    }
    Ok(out)
}
