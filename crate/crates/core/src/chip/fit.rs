use nalgebra::{Matrix3, Vector3};

/// Least-squares Gaussian `A·exp(−(x−μ)²/(2s²))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFit {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    pub converged: bool,
    pub iterations: usize,
    pub rss: f64,
}

const MAX_ITER: usize = 500;
const STEP_TOL: f64 = 1e-14;

fn rss(u: &[f64], y: &[f64], p: &Vector3<f64>) -> f64 {
    u.iter()
        .zip(y)
        .map(|(&u, &y)| {
            let r = y - p[0] * (-(u - p[1]).powi(2) / (2.0 * p[2] * p[2])).exp();
            r * r
        })
        .sum()
}

/// Levenberg–Marquardt fit started from `(amplitude, center, width)`.
///
/// Works in coordinates scaled by the initial width so that all three
/// parameters are O(1).
pub fn fit_gaussian(xs: &[f64], ys: &[f64], initial: (f64, f64, f64)) -> GaussianFit {
    let (a0, mu0, s0) = initial;
    let failed = GaussianFit {
        amplitude: a0,
        center: mu0,
        width: s0,
        converged: false,
        iterations: 0,
        rss: f64::INFINITY,
    };
    if xs.len() != ys.len() || xs.len() < 3 || !(s0 > 0.0) || !(a0 > 0.0) {
        return failed;
    }
    let u: Vec<f64> = xs.iter().map(|x| (x - mu0) / s0).collect();
    let mut p = Vector3::new(a0, 0.0, 1.0);
    let mut cost = rss(&u, ys, &p);
    let mut damping = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITER {
        iterations += 1;
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (&ui, &yi) in u.iter().zip(ys) {
            let d = ui - p[1];
            let e = (-d * d / (2.0 * p[2] * p[2])).exp();
            let model = p[0] * e;
            let j = Vector3::new(
                e,
                model * d / (p[2] * p[2]),
                model * d * d / (p[2] * p[2] * p[2]),
            );
            jtj += j * j.transpose();
            jtr += j * (yi - model);
        }
        let mut accepted = false;
        while damping < 1e12 {
            let mut lhs = jtj;
            for k in 0..3 {
                lhs[(k, k)] += damping * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = lhs.lu().solve(&jtr) else {
                damping *= 10.0;
                continue;
            };
            let trial = p + step;
            let trial_cost = if trial[2] > 0.0 {
                rss(&u, ys, &trial)
            } else {
                f64::INFINITY
            };
            if trial_cost <= cost {
                let small = step[0].abs() <= STEP_TOL * p[0].abs().max(1e-300)
                    && step[1].abs() <= STEP_TOL
                    && step[2].abs() <= STEP_TOL * p[2];
                let stalled = cost - trial_cost <= 1e-15 * cost;
                p = trial;
                cost = trial_cost;
                damping = (damping / 10.0).max(1e-12);
                accepted = true;
                if small || stalled {
                    converged = true;
                }
                break;
            }
            damping *= 10.0;
        }
        if converged {
            break;
        }
        if !accepted {
            // no downhill step left: at a minimum to working precision
            converged = cost.is_finite();
            break;
        }
    }

    let ok = converged && p[0] > 0.0 && p[2] > 0.0 && p.iter().all(|v| v.is_finite());
    GaussianFit {
        amplitude: p[0],
        center: mu0 + s0 * p[1],
        width: s0 * p[2],
        converged: ok,
        iterations,
        rss: cost,
    }
}
