//! Gaussian-kernel support vector classifier trained with sequential minimal
//! optimization.
//!
//! The dual is handled in its minimization form
//! `min 0.5 * a'Qa - e'a` subject to `0 <= a_i <= C` and `y'a = 0`, where
//! `Q_ij = y_i y_j K(x_i, x_j)`. Each iteration picks the maximal violating
//! pair with second-order selection for the second index and solves the
//! two-variable subproblem in closed form.

use super::bits::BitVector;
use crate::error::{EcoError, Result};

const TAU: f64 = 1e-12;

/// `exp(-gamma * ||u - v||^2)`.
pub fn rbf_kernel(u: &BitVector, v: &BitVector, gamma: f64) -> Result<f64> {
    Ok((-gamma * u.hamming(v)? as f64).exp())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoParams {
    pub c: f64,
    pub gamma: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl SmoParams {
    pub fn new(c: f64, gamma: f64, tol: f64) -> Self {
        SmoParams { c, gamma, tol, max_iter: 100_000 }
    }
}

/// Trained decision function `f(x) = sum_i a_i y_i K(x_i, x) + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel {
    pub points: Vec<BitVector>,
    pub labels: Vec<f64>,
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    pub iterations: usize,
}

impl SvmModel {
    pub fn decision(&self, x: &BitVector) -> Result<f64> {
        let mut f = self.bias;
        for ((p, &y), &a) in self.points.iter().zip(&self.labels).zip(&self.alphas) {
            if a > 0.0 {
                f += a * y * rbf_kernel(p, x, self.gamma)?;
            }
        }
        Ok(f)
    }

    pub fn support_count(&self) -> usize {
        self.alphas.iter().filter(|&&a| a > 0.0).count()
    }

    /// Dual objective in maximization form: `sum a - 0.5 * a'Qa`.
    pub fn dual_objective(&self) -> f64 {
        let q = gram(&self.points, &self.labels, self.gamma);
        dual_objective(&q, &self.alphas)
    }

    /// Largest violation of the KKT conditions, measured as in the stopping
    /// rule: `max_{I_up} -y G - min_{I_low} -y G`.
    pub fn kkt_gap(&self) -> f64 {
        let q = gram(&self.points, &self.labels, self.gamma);
        let n = self.alphas.len();
        let grad: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| q[i][j] * self.alphas[j]).sum::<f64>() - 1.0)
            .collect();
        let (m, big_m) = violation_bounds(&self.labels, &self.alphas, &grad, self.c);
        m - big_m
    }
}

/// Label-signed Gram matrix `Q_ij = y_i y_j K(x_i, x_j)`.
pub fn gram(points: &[BitVector], labels: &[f64], gamma: f64) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut q = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let k = (-gamma * points[i].hamming(&points[j]).expect("equal widths") as f64).exp();
            q[i][j] = labels[i] * labels[j] * k;
            q[j][i] = q[i][j];
        }
    }
    q
}

pub fn dual_objective(q: &[Vec<f64>], alphas: &[f64]) -> f64 {
    let n = alphas.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alphas[i] * alphas[j] * q[i][j];
        }
    }
    alphas.iter().sum::<f64>() - 0.5 * quad
}

fn in_up(y: f64, a: f64, c: f64) -> bool {
    (y > 0.0 && a < c) || (y < 0.0 && a > 0.0)
}

fn in_low(y: f64, a: f64, c: f64) -> bool {
    (y < 0.0 && a < c) || (y > 0.0 && a > 0.0)
}

fn violation_bounds(labels: &[f64], alphas: &[f64], grad: &[f64], c: f64) -> (f64, f64) {
    let mut m = f64::NEG_INFINITY;
    let mut big_m = f64::INFINITY;
    for t in 0..alphas.len() {
        let v = -labels[t] * grad[t];
        if in_up(labels[t], alphas[t], c) {
            m = m.max(v);
        }
        if in_low(labels[t], alphas[t], c) {
            big_m = big_m.min(v);
        }
    }
    (m, big_m)
}

pub fn smo_train(points: &[BitVector], positive: &[bool], params: &SmoParams) -> Result<SvmModel> {
    let n = points.len();
    if n == 0 {
        return Err(EcoError::EmptyTrainingSet);
    }
    if positive.iter().all(|&p| p) || positive.iter().all(|&p| !p) {
        return Err(EcoError::SingleClass);
    }
    let width = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != width) {
        return Err(EcoError::WidthMismatch { expected: width, actual: p.len() });
    }
    let c = params.c;
    let y: Vec<f64> = positive.iter().map(|&p| if p { 1.0 } else { -1.0 }).collect();
    let q = gram(points, &y, params.gamma);
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];

    let mut iterations = 0;
    while iterations < params.max_iter {
        // First index: maximal violation among I_up.
        let mut i = usize::MAX;
        let mut g_max = f64::NEG_INFINITY;
        for t in 0..n {
            if in_up(y[t], alpha[t], c) && -y[t] * grad[t] >= g_max {
                g_max = -y[t] * grad[t];
                i = t;
            }
        }
        // Second index: second-order gain among I_low.
        let mut j = usize::MAX;
        let mut g_min = f64::INFINITY;
        let mut best_gain = f64::INFINITY;
        for t in 0..n {
            if !in_low(y[t], alpha[t], c) {
                continue;
            }
            let v = -y[t] * grad[t];
            g_min = g_min.min(v);
            if i != usize::MAX && v < g_max {
                let b = g_max - v;
                let k_it = y[i] * y[t] * q[i][t];
                let mut a = q[i][i] + q[t][t] - 2.0 * k_it;
                if a <= 0.0 {
                    a = TAU;
                }
                let gain = -(b * b) / a;
                if gain <= best_gain {
                    best_gain = gain;
                    j = t;
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || g_max - g_min < params.tol {
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = q[i][i] + q[j][j] + 2.0 * q[i][j];
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = q[i][i] + q[j][j] - 2.0 * q[i][j];
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q[i][t] * di + q[j][t] * dj;
        }
    }

    // Bias from free variables, or the midpoint of the feasible interval.
    let mut upper = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free_n = 0;
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else {
            free_n += 1;
            free_sum += yg;
        }
    }
    let rho = if free_n > 0 { free_sum / free_n as f64 } else { (upper + lower) / 2.0 };

    Ok(SvmModel {
        points: points.to_vec(),
        labels: y,
        alphas: alpha,
        bias: -rho,
        gamma: params.gamma,
        c,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bv(bits: &[u8]) -> BitVector {
        BitVector::from_bools(&bits.iter().map(|&b| b == 1).collect::<Vec<_>>())
    }

    #[test]
    fn kernel_identities() {
        let u = bv(&[1, 0, 1, 1, 0, 0]);
        let v = bv(&[0, 1, 1, 0, 1, 0]);
        assert_eq!(rbf_kernel(&u, &u, 0.3).unwrap(), 1.0);
        assert_eq!(rbf_kernel(&u, &v, 0.3).unwrap(), rbf_kernel(&v, &u, 0.3).unwrap());
        assert!((rbf_kernel(&u, &v, 0.1).unwrap() - (-0.4f64).exp()).abs() < 1e-15);
        assert!((rbf_kernel(&u, &v, 0.1).unwrap() - 0.6703).abs() < 1e-4);
        assert!(rbf_kernel(&u, &bv(&[1]), 0.1).is_err());
    }

    #[test]
    fn separates_opposite_pair() {
        let a = bv(&[1, 1, 0, 0]);
        let b = bv(&[0, 0, 1, 1]);
        let m = smo_train(&[a.clone(), b.clone()], &[true, false], &SmoParams::new(1.0, 0.25, 1e-3)).unwrap();
        assert!(m.decision(&a).unwrap() > 0.0);
        assert!(m.decision(&b).unwrap() < 0.0);
    }

    #[test]
    fn single_class_rejected() {
        let a = bv(&[1, 0]);
        let b = bv(&[0, 1]);
        assert_eq!(
            smo_train(&[a, b], &[true, true], &SmoParams::new(1.0, 0.5, 1e-3)).unwrap_err(),
            EcoError::SingleClass
        );
    }

    #[test]
    fn constraints_hold() {
        let pts = vec![bv(&[1, 1, 0, 0, 1]), bv(&[1, 0, 0, 0, 1]), bv(&[0, 0, 1, 1, 0]), bv(&[0, 1, 1, 1, 0]), bv(&[1, 1, 1, 0, 0])];
        let labels = [true, true, false, false, false];
        let m = smo_train(&pts, &labels, &SmoParams::new(0.7, 0.4, 1e-8)).unwrap();
        let eq: f64 = m.alphas.iter().zip(&m.labels).map(|(a, y)| a * y).sum();
        assert!(eq.abs() < 1e-9);
        assert!(m.alphas.iter().all(|&a| (0.0..=0.7).contains(&a)));
        assert!(m.kkt_gap() < 1e-8);
    }
}
