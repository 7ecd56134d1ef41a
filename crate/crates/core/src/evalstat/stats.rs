//! Shapiro-Wilk normality test and Student/Welch t-tests.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

/// Evaluates `c[0] + c[1]·x + c[2]·x² + ...`.
fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

/// Normal quantile, AS 111 (about 7 significant digits, as the W
/// coefficients require).
fn ppnd(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.42 {
        let r = q * q;
        return q * poly(&[2.50662823884, -18.61500062529, 41.39119773534, -25.44106049637], r)
            / poly(&[1.0, -8.47351093090, 23.08336743743, -21.06224101826, 3.13082909833], r);
    }
    let r = if q > 0.0 { 1.0 - p } else { p };
    if r <= 0.0 {
        return 0.0;
    }
    let r = (-r.ln()).sqrt();
    let v = poly(&[-2.78718931138, -2.29796479134, 4.85014127135, 2.32121276858], r)
        / poly(&[1.0, 3.54388924762, 1.63706781897], r);
    if q < 0.0 {
        -v
    } else {
        v
    }
}

/// Upper normal tail `P(Z > x)`, AS 66.
fn normal_upper_tail(x: f64) -> f64 {
    let (z, upper) = if x > 0.0 { (x, true) } else { (-x, false) };
    if z > 7.0 && !(upper && z <= 38.0) {
        return if upper { 0.0 } else { 1.0 };
    }
    let y = 0.5 * z * z;
    let tail = if z <= 1.28 {
        0.5 - z
            * (0.398942280444
                - 0.399903438504 * y
                    / (y + 5.75885480458 - 29.8213557808 / (y + 2.62433121679 + 48.6959930692 / (y + 5.92885724438))))
    } else {
        0.398942280385 * (-y).exp()
            / (z - 3.8052e-8
                + 1.00000615302
                    / (z + 3.98064794e-4
                        + 1.98615381364
                            / (z - 0.151679116635
                                + 5.29330324926
                                    / (z + 4.8385912808
                                        - 15.1508972451 / (z + 0.742380924027 + 30.789933034 / (z + 3.99019417011))))))
    };
    if upper {
        tail
    } else {
        1.0 - tail
    }
}

/// Lower bound reported for p-values that underflow the approximation.
pub const P_FLOOR: f64 = 1e-19;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapiroWilk {
    pub w: f64,
    pub p: f64,
}

/// Shapiro-Wilk W with Royston's coefficient and p-value approximations,
/// valid for `3 <= n <= 5000`.
pub fn shapiro_wilk(x: &[f64]) -> Result<ShapiroWilk> {
    let n = x.len();
    if !(3..=5000).contains(&n) {
        return Err(Error::config("n", format!("{n} is outside 3..=5000")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite observation".into()));
    }
    let mut y = x.to_vec();
    y.sort_by(f64::total_cmp);
    let median = y[n / 2];
    y.iter_mut().for_each(|v| *v -= median);
    let range = y[n - 1] - y[0];
    if range < 1e-19 {
        return Err(Error::Degenerate("sample has zero range".into()));
    }

    // half-vector of coefficients a[0..n/2], a[i] applies to y[n-1-i] - y[i]
    let half = n / 2;
    let an = n as f64;
    let mut a = vec![0.0; half];
    if n == 3 {
        a[0] = std::f64::consts::FRAC_1_SQRT_2;
    } else {
        let m: Vec<f64> = (0..half)
            .map(|i| -ppnd((i as f64 + 1.0 - 0.375) / (an + 0.25)))
            .collect();
        let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
        let ssumm2 = summ2.sqrt();
        let rsn = 1.0 / an.sqrt();
        let c1 = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
        let c2 = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
        let a1 = poly(&c1, rsn) + m[0] / ssumm2;
        let (first_free, fac) = if n > 5 {
            let a2 = poly(&c2, rsn) + m[1] / ssumm2;
            let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1])
                / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
                .sqrt();
            a[1] = a2;
            (2, fac)
        } else {
            let fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
            (1, fac)
        };
        a[0] = a1;
        for i in first_free..half {
            a[i] = m[i] / fac;
        }
    }

    // W as the squared correlation between the data and the full
    // antisymmetric coefficient vector
    let coef = |i: usize| -> f64 {
        if i < half {
            -a[i]
        } else if n % 2 == 1 && i == half {
            0.0
        } else {
            a[n - 1 - i]
        }
    };
    let sa = (0..n).map(coef).sum::<f64>() / an;
    let sx = y.iter().map(|v| v / range).sum::<f64>() / an;
    let (mut ssa, mut ssx, mut sax) = (0.0, 0.0, 0.0);
    for (i, v) in y.iter().enumerate() {
        let da = coef(i) - sa;
        let dx = v / range - sx;
        ssa += da * da;
        ssx += dx * dx;
        sax += da * dx;
    }
    let ssassx = (ssa * ssx).sqrt();
    let w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
    let w = 1.0 - w1;

    if n == 3 {
        if w < 0.75 {
            return Ok(ShapiroWilk { w: 0.75, p: 0.0 });
        }
        let p = 1.0 - 6.0 / std::f64::consts::PI * w.sqrt().acos();
        return Ok(ShapiroWilk { w, p: p.clamp(0.0, 1.0) });
    }
    let y_w = w1.ln();
    let p = if n <= 11 {
        let gamma = poly(&[-2.273, 0.459], an);
        if y_w >= gamma {
            P_FLOOR
        } else {
            let t = -(gamma - y_w).ln();
            let mean = poly(&[0.5440, -0.39978, 0.025054, -6.714e-4], an);
            let sd = poly(&[1.3822, -0.77857, 0.062767, -0.0020322], an).exp();
            normal_upper_tail((t - mean) / sd)
        }
    } else {
        let ln_n = an.ln();
        let mean = poly(&[-1.5861, -0.31082, -0.083751, 0.0038915], ln_n);
        let sd = poly(&[-0.4803, -0.082676, 0.0030302], ln_n).exp();
        normal_upper_tail((y_w - mean) / sd)
    };
    Ok(ShapiroWilk {
        w,
        p: p.clamp(0.0, 1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub statistic: f64,
    pub df: f64,
    pub p: f64,
}

/// Two-sided tail of Student's t: `P(|T| >= |t|)`.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() || t.abs() == f64::MAX {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// A zero standard error: no difference at all, or an exactly constant
/// one. The latter reports the statistic as `±f64::MAX` and `p = 0`.
fn degenerate(mean: f64, df: f64) -> TTest {
    if mean == 0.0 {
        TTest { statistic: 0.0, df, p: 1.0 }
    } else {
        TTest {
            statistic: f64::MAX.copysign(mean),
            df,
            p: 0.0,
        }
    }
}

/// Paired Student t-test on `a - b`, or Welch's unpaired test.
pub fn t_test(a: &[f64], b: &[f64], paired: bool) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::config("n", "t-test needs at least 2 observations per sample"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite observation".into()));
    }
    if paired {
        if a.len() != b.len() {
            return Err(Error::shape("t_test", a.len(), b.len()));
        }
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let (mean, var) = mean_var(&d);
        let df = (d.len() - 1) as f64;
        let se = (var / d.len() as f64).sqrt();
        if se == 0.0 {
            return Ok(degenerate(mean, df));
        }
        let t = mean / se;
        Ok(TTest { statistic: t, df, p: student_t_two_sided(t, df) })
    } else {
        let (ma, va) = mean_var(a);
        let (mb, vb) = mean_var(b);
        let (qa, qb) = (va / a.len() as f64, vb / b.len() as f64);
        let se = (qa + qb).sqrt();
        if se == 0.0 {
            let df = (a.len() + b.len() - 2) as f64;
            return Ok(degenerate(ma - mb, df));
        }
        let df = (qa + qb).powi(2)
            / (qa * qa / (a.len() - 1) as f64 + qb * qb / (b.len() - 1) as f64);
        let t = (ma - mb) / se;
        Ok(TTest { statistic: t, df, p: student_t_two_sided(t, df) })
    }
}
