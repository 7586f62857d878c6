//! Statistical utilities: the standard normal distribution, goodness-of-fit
//! diagnostics, and reproducible per-replication random streams.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

// ---------------------------------------------------------------------------
// Random streams
// ---------------------------------------------------------------------------

/// An independently owned random stream.
///
/// Backed by ChaCha8, a counter-based generator, so output is identical on
/// every platform for a given `(master_seed, rep)`.
#[derive(Debug, Clone)]
pub struct RngStream(ChaCha8Rng);

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.0.try_fill_bytes(dest)
    }
}

pub(crate) fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream for replication `rep` under `master_seed`.
///
/// The 256-bit ChaCha key is expanded from the 128-bit pair
/// `(master_seed, rep)` with two interleaved SplitMix64 sequences, and the
/// ChaCha stream id is set to `rep`.
pub fn rng_for_rep(master_seed: u64, rep: u64) -> RngStream {
    let mut a = master_seed;
    let mut b = rep ^ 0xD1B5_4A32_D192_ED03;
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        let w = splitmix64(&mut a) ^ splitmix64(&mut b).rotate_left(23);
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(rep);
    RngStream(rng)
}

/// Derives a child seed from a parent seed and a list of labels. Used to key
/// experiment cells so that a cell's streams do not depend on its position.
pub fn derive_seed(parent: u64, labels: &[u64]) -> u64 {
    let mut s = parent;
    let mut out = splitmix64(&mut s);
    for &l in labels {
        let mut t = out ^ l.wrapping_mul(0xA076_1D64_78BD_642F);
        out = splitmix64(&mut t);
    }
    out
}

// ---------------------------------------------------------------------------
// Standard normal
// ---------------------------------------------------------------------------

#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Standard normal CDF via the complementary error function.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse of the standard normal CDF.
///
/// Acklam's rational approximation (relative error ~1e-9) followed by one
/// Newton step against the erfc-based CDF.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("quantile level must lie in (0, 1), got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    let x = acklam(p);
    let err = normal_cdf(x) - p;
    Ok(x - err / normal_pdf(x))
}

#[allow(clippy::excessive_precision)]
fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        let num = ((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5];
        let den = (((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0;
        num / den
    };

    if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p > 1.0 - P_LOW {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    } else {
        let q = p - 0.5;
        let r = q * q;
        let num = (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q;
        let den = ((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0;
        num / den
    }
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

/// Kolmogorov–Smirnov distance between the empirical CDF of `samples` and the
/// standard normal CDF.
pub fn ks_distance_std_normal(samples: &[f64]) -> Result<f64> {
    if samples.len() < 20 {
        return Err(Error::invalid(format!(
            "KS distance needs at least 20 samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("samples contain non-finite values"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let d = sorted.iter().enumerate().fold(0.0_f64, |d, (i, &x)| {
        let f = normal_cdf(x);
        d.max((i as f64 + 1.0) / m - f).max(f - i as f64 / m)
    });
    Ok(d)
}

/// Sample mean and sample standard deviation (n - 1 denominator).
pub fn mean_sd(samples: &[f64]) -> (f64, f64) {
    let m = samples.len() as f64;
    if samples.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / m;
    if samples.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, var.sqrt())
}

/// Shapiro–Wilk normality test p-value (Royston's AS R94 approximation).
///
/// Accepts 20 to 5000 observations.
pub fn normality_pvalue(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if !(20..=5000).contains(&n) {
        return Err(Error::invalid(format!("normality test needs 20..=5000 samples, got {n}")));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("samples contain non-finite values"));
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let range = x[n - 1] - x[0];
    if range <= 0.0 {
        return Err(Error::Degenerate("normality test on a constant sample".into()));
    }
    let a = swilk_coefficients(n)?;
    let w = swilk_w(&x, &a, range);
    Ok(royston_pvalue(w, n))
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

/// Half-vector of Shapiro–Wilk weights, 1-based (`a[0]` unused).
fn swilk_coefficients(n: usize) -> Result<Vec<f64>> {
    const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056];
    const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];

    let nn2 = n / 2;
    let an = n as f64;
    let mut a = vec![0.0; nn2 + 1];
    let mut summ2 = 0.0;
    for (i, ai) in a.iter_mut().enumerate().skip(1) {
        *ai = normal_quantile((i as f64 - 0.375) / (an + 0.25))?;
        summ2 += *ai * *ai;
    }
    summ2 *= 2.0;
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / an.sqrt();
    let a1 = poly(&C1, rsn) - a[1] / ssumm2;
    let a2 = -a[2] / ssumm2 + poly(&C2, rsn);
    let fac = ((summ2 - 2.0 * a[1] * a[1] - 2.0 * a[2] * a[2])
        / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
        .sqrt();
    a[1] = a1;
    a[2] = a2;
    for ai in a.iter_mut().skip(3) {
        *ai /= -fac;
    }
    Ok(a)
}

fn swilk_w(x: &[f64], a: &[f64], range: f64) -> f64 {
    let n = x.len();
    let weight = |i: usize| -> f64 {
        let j = n - 1 - i;
        match i.cmp(&j) {
            std::cmp::Ordering::Less => -a[i + 1],
            std::cmp::Ordering::Greater => a[j + 1],
            std::cmp::Ordering::Equal => 0.0,
        }
    };
    let sa = (0..n).map(weight).sum::<f64>() / n as f64;
    let sx = x.iter().map(|v| v / range).sum::<f64>() / n as f64;
    let (mut ssa, mut ssx, mut sax) = (0.0, 0.0, 0.0);
    for (i, xi) in x.iter().enumerate() {
        let asa = weight(i) - sa;
        let xsx = xi / range - sx;
        ssa += asa * asa;
        ssx += xsx * xsx;
        sax += asa * xsx;
    }
    let ssassx = (ssa * ssx).sqrt();
    let w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
    (1.0 - w1).clamp(0.0, 1.0)
}

fn royston_pvalue(w: f64, n: usize) -> f64 {
    const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
    const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
    if w >= 1.0 {
        return 1.0;
    }
    let ln_n = (n as f64).ln();
    let y = (1.0 - w).ln();
    let m = poly(&C5, ln_n);
    let s = poly(&C6, ln_n).exp();
    1.0 - normal_cdf((y - m) / s)
}
