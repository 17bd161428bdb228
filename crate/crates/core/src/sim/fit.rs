//! Least-squares fit of `y = a t^b + c`.

use nalgebra::{Matrix3, Vector3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLawFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Standard errors from the linearized covariance at the optimum.
    pub se_a: f64,
    pub se_b: f64,
    pub se_c: f64,
    pub rss: f64,
    pub r_squared: f64,
    pub iterations: usize,
    /// False when the damped iteration stopped without meeting its tolerance.
    pub converged: bool,
}

impl PowerLawFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.a * t.powf(self.b) + self.c
    }
}

fn residuals(t: &[f64], y: &[f64], p: &Vector3<f64>) -> Vec<f64> {
    t.iter().zip(y).map(|(&t, &y)| p[0] * t.powf(p[1]) + p[2] - y).collect()
}

fn rss_of(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Fits `y = a t^b + c` by Levenberg-Marquardt. `t` must be positive; the
/// simulation series is passed with the unit shift already applied so the
/// initial state sits at `t = 1`.
///
/// A constant series yields `a = 0`, `b = 1`, `c` equal to the constant.
pub fn fit_power_law(t: &[f64], y: &[f64]) -> PowerLawFit {
    assert_eq!(t.len(), y.len(), "time and value columns differ in length");
    assert!(t.len() >= 3, "a three-parameter fit needs at least three points");
    assert!(t.iter().all(|&v| v > 0.0), "power-law times must be positive");
    let n = t.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if hi - lo <= 1e-14 * mean.abs().max(1e-300) {
        return PowerLawFit {
            a: 0.0,
            b: 1.0,
            c: mean,
            se_a: 0.0,
            se_b: 0.0,
            se_c: 0.0,
            rss: 0.0,
            r_squared: 1.0,
            iterations: 0,
            converged: true,
        };
    }

    // Start from a log-log slope of the rise above a baseline just below the data.
    let increasing = y[n - 1] >= y[0];
    let c0 = if increasing { lo - 0.05 * (hi - lo) } else { hi + 0.05 * (hi - lo) };
    let sign = if increasing { 1.0 } else { -1.0 };
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (&ti, &yi) in t.iter().zip(y) {
        let lx = ti.ln();
        let ly = (sign * (yi - c0)).ln();
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    let nf = n as f64;
    let denom = nf * sxx - sx * sx;
    let b0 = if denom.abs() > 0.0 { (nf * sxy - sx * sy) / denom } else { 1.0 };
    let b0 = if b0.is_finite() && b0 > 0.0 { b0.min(5.0) } else { 1.0 };
    let a0 = sign * ((sy - b0 * sx) / nf).exp();
    let mut p = Vector3::new(a0, b0, c0);

    let mut r = residuals(t, y, &p);
    let mut rss = rss_of(&r);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    let jacobian = |p: &Vector3<f64>| -> Vec<Vector3<f64>> {
        t.iter()
            .map(|&t| {
                let tb = t.powf(p[1]);
                Vector3::new(tb, p[0] * tb * t.ln(), 1.0)
            })
            .collect()
    };
    for it in 0..500 {
        iterations = it + 1;
        let j = jacobian(&p);
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (row, &ri) in j.iter().zip(&r) {
            jtj += row * row.transpose();
            jtr += row * ri;
        }
        let mut improved = false;
        while lambda < 1e16 {
            let mut damped = jtj;
            for k in 0..3 {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = damped.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + step;
            let rt = residuals(t, y, &trial);
            let rss_t = rss_of(&rt);
            if rss_t.is_finite() && rss_t < rss {
                let rel = (rss - rss_t) / rss.max(1e-300);
                let small_step = step.iter().zip(trial.iter()).all(|(s, v)| s.abs() <= 1e-10 * (v.abs() + 1e-10));
                p = trial;
                r = rt;
                rss = rss_t;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if rel < 1e-14 || small_step {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // No downhill step left at any damping: a stationary point.
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        log::warn!("power-law fit stopped after {iterations} iterations without converging");
    }

    let j = jacobian(&p);
    let mut jtj = Matrix3::zeros();
    for row in &j {
        jtj += row * row.transpose();
    }
    let s2 = rss / (n as f64 - 3.0).max(1.0);
    let (se_a, se_b, se_c) = match jtj.try_inverse() {
        Some(cov) => (
            (s2 * cov[(0, 0)]).max(0.0).sqrt(),
            (s2 * cov[(1, 1)]).max(0.0).sqrt(),
            (s2 * cov[(2, 2)]).max(0.0).sqrt(),
        ),
        None => (f64::NAN, f64::NAN, f64::NAN),
    };
    PowerLawFit {
        a: p[0],
        b: p[1],
        c: p[2],
        se_a,
        se_b,
        se_c,
        rss,
        r_squared: if tss > 0.0 { 1.0 - rss / tss } else { 1.0 },
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn exact_data_is_recovered() {
        let t: Vec<f64> = (0..=240).map(|k| 1.0 + 0.5 * k as f64).collect();
        let y: Vec<f64> = t.iter().map(|&t| 0.142 * t.powf(0.98) + 9.83).collect();
        let f = fit_power_law(&t, &y);
        assert!(f.converged);
        assert_relative_eq!(f.a, 0.142, max_relative = 1e-6);
        assert_relative_eq!(f.b, 0.98, max_relative = 1e-6);
        assert_relative_eq!(f.c, 9.83, max_relative = 1e-6);
        assert!(f.r_squared > 1.0 - 1e-12);
    }

    #[test]
    #[should_panic(expected = "positive")]
    fn zero_time_is_rejected() {
        fit_power_law(&[0.0, 1.0, 2.0], &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn constant_series() {
        let t: Vec<f64> = (1..=20).map(f64::from).collect();
        let f = fit_power_law(&t, &[4.25; 20]);
        assert_eq!(f.a, 0.0);
        assert_eq!(f.b, 1.0);
        assert_eq!(f.c, 4.25);
    }

    #[test]
    fn straight_line_has_unit_exponent() {
        let t: Vec<f64> = (1..=50).map(f64::from).collect();
        let y: Vec<f64> = t.iter().map(|t| 2.0 * t + 1.0).collect();
        let f = fit_power_law(&t, &y);
        assert_relative_eq!(f.b, 1.0, epsilon = 1e-6);
        assert_relative_eq!(f.a + f.c, 3.0, epsilon = 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn recovers_random_growth_laws(a in 0.05f64..2.0, b in 0.5f64..1.5, c in -5.0f64..10.0) {
            let t: Vec<f64> = (0..100).map(|k| 1.0 + k as f64).collect();
            let y: Vec<f64> = t.iter().map(|&t| a * t.powf(b) + c).collect();
            let f = fit_power_law(&t, &y);
            prop_assert!((f.b - b).abs() < 1e-5 * b.max(1.0), "b {} vs {}", f.b, b);
            prop_assert!((f.a - a).abs() < 1e-4 * a.max(1.0));
        }
    }
}
