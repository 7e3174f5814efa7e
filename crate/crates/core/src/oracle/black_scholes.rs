use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{CubatureError, Result};
use crate::payoff::{smoothed_call, smoothed_call_slope, Payoff};

/// Eight-point Gauss–Legendre nodes and weights on `[-1, 1]`.
const GL_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

const Z_MAX: f64 = 12.0;
const PANELS: usize = 200;

/// `∫ g(z) φ(z) dz` over `[-12, 12]` by composite Gauss–Legendre, with
/// `PANELS` equal panels between consecutive break points.
fn gaussian_integral(g: impl Fn(f64) -> f64, breaks: &[f64]) -> f64 {
    let phi = Normal::standard();
    let mut edges = vec![-Z_MAX];
    edges.extend(breaks.iter().copied().filter(|b| b.abs() < Z_MAX));
    edges.push(Z_MAX);
    edges.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for pair in edges.windows(2) {
        let h = (pair[1] - pair[0]) / PANELS as f64;
        if h <= 0.0 {
            continue;
        }
        for p in 0..PANELS {
            let mid = pair[0] + (p as f64 + 0.5) * h;
            let mut panel = 0.0;
            for (x, w) in GL_NODES.iter().zip(&GL_WEIGHTS) {
                for z in [mid - 0.5 * h * x, mid + 0.5 * h * x] {
                    panel += w * g(z) * phi.pdf(z);
                }
            }
            total += 0.5 * h * panel;
        }
    }
    total
}

/// Undiscounted price `E f(Y_t)` and delta `∂_y E f(Y_t)` under
/// `dY = rY dt + σY dB`, `Y_0 = y`.
pub fn bs_closed_form(r: f64, sigma: f64, y: f64, t: f64, payoff: &Payoff) -> Result<(f64, f64)> {
    if !(sigma > 0.0 && t > 0.0 && y > 0.0) || !r.is_finite() {
        return Err(CubatureError::Domain(format!(
            "closed form needs σ, t, y > 0 (σ = {sigma}, t = {t}, y = {y})"
        )));
    }
    let growth = (r * t).exp();
    let vol = sigma * t.sqrt();
    match *payoff {
        Payoff::Identity | Payoff::Coordinate(0) => Ok((y * growth, growth)),
        Payoff::Call { strike } => {
            if strike <= 0.0 {
                return Ok((y * growth - strike, growth));
            }
            let n = Normal::standard();
            let d1 = ((y / strike).ln() + (r + 0.5 * sigma * sigma) * t) / vol;
            let d2 = d1 - vol;
            Ok((y * growth * n.cdf(d1) - strike * n.cdf(d2), growth * n.cdf(d1)))
        }
        Payoff::SmoothedCall { strike, eps } => {
            if eps.is_nan() || eps <= 0.0 {
                return Err(CubatureError::Domain(format!("smoothing width must be positive, got {eps}")));
            }
            let drift = (r - 0.5 * sigma * sigma) * t;
            let terminal = |z: f64| y * (drift + vol * z).exp();
            // Resolve the smoothed kink: `eps` in state is about `eps / (K vol)` in z.
            let mut breaks = Vec::new();
            if strike > 0.0 {
                let kink = ((strike / y).ln() - drift) / vol;
                let width = 10.0 * eps / (strike * vol);
                breaks.extend([kink - width, kink, kink + width]);
            }
            let price = gaussian_integral(|z| smoothed_call(terminal(z), strike, eps), &breaks);
            let delta = gaussian_integral(
                |z| {
                    let yt = terminal(z);
                    smoothed_call_slope(yt, strike, eps) * yt / y
                },
                &breaks,
            );
            Ok((price, delta))
        }
        _ => Err(CubatureError::Domain(format!(
            "no closed form for payoff {payoff:?}"
        ))),
    }
}
