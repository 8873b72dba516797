use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::models::{log_sum_exp, Mixture, Schedule, Statistic};

/// Absolute tolerance of the quadrature oracles, in nats.
pub const QUADRATURE_TOLERANCE: f64 = 1e-4;

/// Half-width of the integration window around each component mean, in
/// noise standard deviations.
const WINDOW: f64 = 12.0;

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Union of `[c - w, c + w]` over `centers`, as sorted disjoint intervals
/// split into panels no wider than `panel`.
fn panels(centers: impl Iterator<Item = f64>, w: f64, panel: f64) -> Vec<(f64, f64)> {
    let mut iv: Vec<(f64, f64)> = centers.map(|c| (c - w, c + w)).collect();
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (a, b) in iv {
        match merged.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => merged.push((a, b)),
        }
    }
    let mut out = Vec::new();
    for (a, b) in merged {
        let n = ((b - a) / panel).ceil().max(1.0) as usize;
        let h = (b - a) / n as f64;
        out.extend((0..n).map(|i| (a + i as f64 * h, a + (i + 1) as f64 * h)));
    }
    out
}

fn integrate_panels<F: Fn(f64) -> f64>(f: &F, p: &[(f64, f64)], tol: f64) -> f64 {
    let per = tol / p.len() as f64;
    p.iter().map(|&(a, b)| adaptive_simpson(f, a, b, per)).sum()
}

/// `I(Y; phi)` for `Y = scale * V + std * Z` with `V` drawn from the mixture
/// and `Z` standard normal, by adaptive quadrature. Supports dimension 1
/// and 2.
pub fn channel_mi(mixture: &Mixture, statistic: &Statistic, scale: f64, std: f64, tol: f64) -> Result<f64> {
    let (labels, count) = mixture.labels(statistic)?;
    if count <= 1 {
        return Ok(0.0);
    }
    if !(std > 0.0 && std.is_finite()) {
        return Err(Error::InvalidArgument(format!("channel noise std must be > 0, got {std}")));
    }
    let n = mixture.dim();
    let means: Vec<Vec<f64>> = mixture.renderings().iter().map(|v| v.iter().map(|x| scale * x).collect()).collect();
    let mut label_w = vec![0.0; count];
    for (k, &l) in labels.iter().enumerate() {
        label_w[l as usize] += mixture.weights()[k];
    }
    let log_w: Vec<f64> = mixture.weights().iter().map(|w| w.ln()).collect();
    let norm = -0.5 * n as f64 * (2.0 * PI * std * std).ln();
    let var = std * std;
    // p(y) sum_l P(l | y) log(P(l | y) / p_l)
    let density = |y: &[f64]| -> f64 {
        let lj: Vec<f64> = means
            .iter()
            .zip(&log_w)
            .map(|(mu, lw)| lw + norm - 0.5 * y.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / var)
            .collect();
        let lp = log_sum_exp(&lj);
        if lp == f64::NEG_INFINITY {
            return 0.0;
        }
        let mut by_label = vec![f64::NEG_INFINITY; count];
        for (k, &l) in labels.iter().enumerate() {
            let b = &mut by_label[l as usize];
            *b = log_sum_exp(&[*b, lj[k]]);
        }
        by_label
            .iter()
            .zip(&label_w)
            .filter(|(lb, _)| **lb > f64::NEG_INFINITY)
            .map(|(lb, pw)| lb.exp() * (lb - lp - pw.ln()))
            .sum()
    };
    let w = WINDOW * std;
    match n {
        1 => {
            let p = panels(means.iter().map(|m| m[0]), w, std);
            Ok(integrate_panels(&|y| density(&[y]), &p, tol))
        }
        2 => {
            let p0 = panels(means.iter().map(|m| m[0]), w, std);
            let p1 = panels(means.iter().map(|m| m[1]), w, std);
            let span: f64 = p0.iter().map(|(a, b)| b - a).sum();
            let inner_tol = 0.5 * tol / span;
            let outer = |y0: f64| integrate_panels(&|y1| density(&[y0, y1]), &p1, inner_tol);
            Ok(integrate_panels(&outer, &p0, 0.5 * tol))
        }
        _ => Err(Error::InvalidArgument(format!("quadrature supports dimension 1 or 2, got {n}"))),
    }
}

/// `I(Y_t; phi)` for a one-dimensional mixture under the linear bridge,
/// where `Y_t` is the forward marginal at reversed time `T - t`.
pub fn mi_quadrature_oracle(mixture: &Mixture, schedule: &Schedule, t: f64, statistic: &Statistic) -> Result<f64> {
    if mixture.dim() != 1 {
        return Err(Error::InvalidArgument(format!(
            "the quadrature oracle is one-dimensional, got dimension {}",
            mixture.dim()
        )));
    }
    if !(0.0..schedule.horizon).contains(&t) {
        return Err(Error::TimeOutOfRange { t, horizon: schedule.horizon });
    }
    let u = schedule.horizon - t;
    channel_mi(mixture, statistic, schedule.decay(u), schedule.noise_variance(u).sqrt(), QUADRATURE_TOLERANCE)
}

/// `I(Y; V)` for `V ~ N(mu, s0 I_n)` and `Y = scale V + N(0, noise_var I_n)`.
pub fn gaussian_channel_mi(dim: usize, prior_variance: f64, scale: f64, noise_variance: f64) -> f64 {
    0.5 * dim as f64 * (scale * scale * prior_variance / noise_variance).ln_1p()
}
