//! Independent reference computations.
//!
//! These share no code with the closed forms they check: the CML oracle
//! minimizes the squared range residual directly over positions, the FIM
//! oracle differentiates an expected log-likelihood numerically, and the
//! CRLB oracle inverts by cofactors.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::linear_to_db;
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Global minimizer of `sum (|p - p_m| - d̂_m)^2` found by multi-start
/// Levenberg-Marquardt over positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteForceFit {
    pub position: Vec3,
    pub distances: [f64; 4],
    pub objective: f64,
}

fn residuals(p: Vector3<f64>, anchors: &[Vector3<f64>; 4], measured: &[f64; 4]) -> ([f64; 4], [Vector3<f64>; 4]) {
    let mut r = [0.0; 4];
    let mut jac = [Vector3::zeros(); 4];
    for m in 0..4 {
        let d = p - anchors[m];
        let n = d.norm();
        r[m] = n - measured[m];
        jac[m] = if n > 0.0 { d / n } else { Vector3::zeros() };
    }
    (r, jac)
}

fn cost(r: &[f64; 4]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn levenberg_marquardt(mut p: Vector3<f64>, anchors: &[Vector3<f64>; 4], measured: &[f64; 4]) -> (Vector3<f64>, f64) {
    let mut lambda = 1e-3;
    let (mut r, mut jac) = residuals(p, anchors, measured);
    let mut c = cost(&r);
    for _ in 0..2000 {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for m in 0..4 {
            jtj += jac[m] * jac[m].transpose();
            jtr += jac[m] * r[m];
        }
        let mut damped = jtj;
        for i in 0..3 {
            damped[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
        }
        let Some(step) = damped.lu().solve(&(-jtr)) else {
            break;
        };
        let trial = p + step;
        let (tr, tj) = residuals(trial, anchors, measured);
        let tc = cost(&tr);
        if tc <= c {
            let small = step.norm() <= 1e-15 * (1.0 + p.norm());
            p = trial;
            r = tr;
            jac = tj;
            c = tc;
            lambda = (lambda * 0.3).max(1e-12);
            if small {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    (p, c)
}

/// Brute-force CML in world coordinates for four coplanar anchors.
pub fn brute_force_cml(measured: [f64; 4], anchors: [Vec3; 4]) -> Result<BruteForceFit> {
    let a: [Vector3<f64>; 4] = anchors.map(|v| Vector3::new(v.x, v.y, v.z));
    let centre = (a[0] + a[1] + a[2] + a[3]) / 4.0;
    let s1 = a[1] - a[0];
    let s2 = a[3] - a[0];
    let normal = s1.cross(&s2);
    let normal = normal.try_normalize(0.0).ok_or(Error::CoincidentPoints)?;
    let scale = measured.iter().sum::<f64>() / 4.0;
    let mut best: Option<(Vector3<f64>, f64)> = None;
    for ix in 1..=5 {
        let x = scale * ix as f64 / 5.0;
        for iu in -2..=2 {
            for iv in -2..=2 {
                let u = iu as f64 * 0.5 * (s1.norm() + scale);
                let v = iv as f64 * 0.5 * (s2.norm() + scale);
                let start = centre + normal * x + s1.normalize() * u + s2.normalize() * v;
                let (p, c) = levenberg_marquardt(start, &a, &measured);
                if best.is_none_or(|(_, bc)| c < bc) {
                    best = Some((p, c));
                }
            }
        }
    }
    let (mut p, c) = best.expect("at least one start");
    // J is symmetric about the anchor plane; report the front-side point
    let off = (p - centre).dot(&normal);
    if off < 0.0 {
        p -= normal * (2.0 * off);
    }
    let position = Vec3::new(p.x, p.y, p.z);
    Ok(BruteForceFit {
        position,
        distances: anchors.map(|m| m.distance(position)),
        objective: c,
    })
}

// 7-point Gauss-Hermite rule (physicists' weight exp(-x^2))
const GH_NODES: [f64; 7] = [
    -2.651_961_356_835_233,
    -1.673_551_628_767_471_4,
    -0.816_287_882_858_964_7,
    0.0,
    0.816_287_882_858_964_7,
    1.673_551_628_767_471_4,
    2.651_961_356_835_233,
];
const GH_WEIGHTS: [f64; 7] = [
    0.000_971_781_245_099_519_2,
    0.054_515_582_819_127_03,
    0.425_607_252_610_127_8,
    0.810_264_617_556_807_3,
    0.425_607_252_610_127_8,
    0.054_515_582_819_127_03,
    0.000_971_781_245_099_519_2,
];

/// `E[ln P(d̂ | p)]` (without the constant) when `d̂` is drawn at `truth`.
pub fn expected_log_likelihood(p: Vec3, truth: Vec3, anchors: &[Vec3], variance: f64) -> f64 {
    let sigma = variance.sqrt();
    let norm = std::f64::consts::PI.sqrt();
    anchors
        .iter()
        .map(|&m| {
            let d0 = truth.distance(m);
            let d = p.distance(m);
            GH_NODES
                .iter()
                .zip(GH_WEIGHTS)
                .map(|(x, w)| {
                    let dh = d0 + std::f64::consts::SQRT_2 * sigma * x;
                    -w * (dh - d).powi(2) / (2.0 * variance)
                })
                .sum::<f64>()
                / norm
        })
        .sum()
}

/// Negative Hessian of the expected log-likelihood by central differences.
pub fn finite_difference_fim(p: Vec3, anchors: &[Vec3], variance: f64, step: f64) -> Matrix3<f64> {
    let e = [
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(0.0, 0.0, 1.0),
    ];
    let f = |q: Vec3| expected_log_likelihood(q, p, anchors, variance);
    let h = step;
    let mut out = Matrix3::zeros();
    for i in 0..3 {
        for j in i..3 {
            let v = if i == j {
                (f(p + e[i] * h) - 2.0 * f(p) + f(p - e[i] * h)) / (h * h)
            } else {
                (f(p + e[i] * h + e[j] * h) - f(p + e[i] * h - e[j] * h) - f(p - e[i] * h + e[j] * h)
                    + f(p - e[i] * h - e[j] * h))
                    / (4.0 * h * h)
            };
            out[(i, j)] = -v;
            out[(j, i)] = -v;
        }
    }
    out
}

/// Inverse by the adjugate; `None` for a zero determinant.
pub fn cofactor_inverse(m: &Matrix3<f64>) -> Option<Matrix3<f64>> {
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| m[(r0, c0)] * m[(r1, c1)] - m[(r0, c1)] * m[(r1, c0)];
    let cof = Matrix3::new(
        c(1, 2, 1, 2),
        -c(1, 2, 0, 2),
        c(1, 2, 0, 1),
        -c(0, 2, 1, 2),
        c(0, 2, 0, 2),
        -c(0, 2, 0, 1),
        c(0, 1, 1, 2),
        -c(0, 1, 0, 2),
        c(0, 1, 0, 1),
    );
    let det = m[(0, 0)] * cof[(0, 0)] + m[(0, 1)] * cof[(0, 1)] + m[(0, 2)] * cof[(0, 2)];
    (det != 0.0).then(|| cof.transpose() / det)
}

/// Coherent versus random-phase combining of `n` unit-modulus channels, dB.
/// Returns `(coherent, mean random)` powers and their ratio in dB.
pub fn array_gain(n: usize, draws: usize, seed: u64) -> (f64, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coherent = (n * n) as f64;
    let mut random = 0.0;
    for _ in 0..draws {
        let s: Complex64 = (0..n)
            .map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
            .sum();
        random += s.norm_sqr();
    }
    random /= draws as f64;
    (coherent, random, linear_to_db(coherent / random))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cofactor_matches_lu() {
        let m = Matrix3::new(4.0, 1.0, 0.5, 1.0, 3.0, -0.2, 0.5, -0.2, 2.0);
        let a = cofactor_inverse(&m).unwrap();
        let b = m.try_inverse().unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-13);
        assert!(cofactor_inverse(&Matrix3::zeros()).is_none());
    }

    #[test]
    fn gauss_hermite_moments() {
        // E[e^2] = sigma^2 for the rule
        let s: f64 = GH_NODES
            .iter()
            .zip(GH_WEIGHTS)
            .map(|(x, w)| w * 2.0 * x * x)
            .sum::<f64>()
            / std::f64::consts::PI.sqrt();
        assert_relative_eq!(s, 1.0, epsilon = 1e-13);
    }

    #[test]
    fn brute_force_recovers_exact_point() {
        let anchors = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.5),
            Vec3::new(0.0, 0.0, 0.5),
        ];
        let p = Vec3::new(3.0, 0.2, 0.9);
        let fit = brute_force_cml(anchors.map(|a| a.distance(p)), anchors).unwrap();
        assert!(fit.objective < 1e-24);
        assert!((fit.position - p).norm() < 1e-9, "{fit:?}");
    }

    #[test]
    fn array_gain_is_n() {
        let (_, _, db) = array_gain(256, 4000, 1);
        assert_relative_eq!(db, linear_to_db(256.0), epsilon = 0.3);
    }
}
