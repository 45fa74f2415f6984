//! Finite-`sigma` analytics for the sequential CHSH protocol.
//!
//! With `y = exp(-1 / (2 sigma^2))` each weak measurement damps the
//! correlations of every later anticommuting observable by one factor of `y`:
//!
//! ```text
//! E(q1A q1B) = 1/sqrt2,  E(q1A q2B) = E(q2A q1B) = y/sqrt2,  E(q2A q2B) = -y^2/sqrt2
//! B_S        = (1 + y)^2 / sqrt2
//! V(B_S)     = 4 (1 + sigma^2)^2 - (1 + y)^4 / 2
//! ```
//!
//! With `n` complete CHSH sequences performed first, `B_S(n) = y^{2n} B_S`.
//! These are the reference values the Monte Carlo engine is checked against.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_8, SQRT_2};

use serde::Serialize;

use crate::error::{Error, Result};

/// CHSH value of the regular (non-sequential, precise) EPR experiment.
pub const TSIRELSON: f64 = 2.0 * SQRT_2;

const BISECTION_TOL: f64 = 1e-9;
const GOLDEN_TOL: f64 = 1e-6;

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidSigma(sigma))
    }
}

/// Damping factor `y = exp(-1 / (2 sigma^2))`; `y(0) = 0`.
pub fn damping(sigma: f64) -> f64 {
    if sigma == 0.0 {
        0.0
    } else {
        (-1.0 / (2.0 * sigma * sigma)).exp()
    }
}

pub fn bs_exact(sigma: f64) -> Result<f64> {
    bs_n(0, sigma)
}

/// `y^{2n} (1 + y)^2 / sqrt2`.
pub fn bs_n(n: u32, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    Ok(bs_n_unchecked(n, damping(sigma)))
}

fn bs_n_unchecked(n: u32, y: f64) -> f64 {
    y.powi(2 * n as i32) * (1.0 + y).powi(2) / SQRT_2
}

/// `4 (1 + sigma^2)^2 - y^{2n} (1 + y)^4 / 2`.
pub fn var_bs_n(n: u32, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    Ok(var_bs_n_unchecked(n, sigma))
}

fn var_bs_n_unchecked(n: u32, sigma: f64) -> f64 {
    let y = damping(sigma);
    4.0 * product_second_moment(sigma) - y.powi(2 * n as i32) * (1.0 + y).powi(4) / 2.0
}

pub fn var_bs(sigma: f64) -> Result<f64> {
    var_bs_n(0, sigma)
}

/// `E[(q^A_i q^B_j)^2] = (1 + sigma^2)^2`, the same for all four pairs.
pub fn product_second_moment(sigma: f64) -> f64 {
    (1.0 + sigma * sigma).powi(2)
}

/// Mixed second moments `E[(q^A_i q^B_j)(q^A_k q^B_l)]` of two different
/// pairs, which all vanish.
pub const CROSS_PAIR_SECOND_MOMENT: f64 = 0.0;

/// `(E11, E12, E21, E22)` in CHSH order.
///
/// Sign convention: the (2,2) entry is returned as `+y^2/sqrt2` in magnitude,
/// i.e. the term that enters `B_S` with a minus sign, `-E(q2A q2B)`. Use
/// [`signed_correlations`] for the raw expectation values.
pub fn exact_correlations(sigma: f64) -> Result<[f64; 4]> {
    check_sigma(sigma)?;
    let y = damping(sigma);
    Ok([FRAC_1_SQRT_2, y * FRAC_1_SQRT_2, y * FRAC_1_SQRT_2, y * y * FRAC_1_SQRT_2])
}

/// Raw `E(q^A_i q^B_j)`: `(1, y, y, -y^2) / sqrt2`.
pub fn signed_correlations(sigma: f64) -> Result<[f64; 4]> {
    let [a, b, c, d] = exact_correlations(sigma)?;
    Ok([a, b, c, -d])
}

/// `sigma` at which `B_S = 2`: `[-2 ln(2^{3/4} - 1)]^{-1/2}`.
pub fn threshold_sigma() -> f64 {
    let y = 2f64.powf(0.75) - 1.0;
    (-2.0 * y.ln()).powf(-0.5)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Setting {
    /// Every cycle measures all four observables weakly.
    Sequential,
    /// Every cycle measures one randomly chosen pair precisely.
    Regular,
}

impl std::str::FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(Setting::Sequential),
            "regular" => Ok(Setting::Regular),
            other => Err(Error::InvalidArgument(format!("unknown setting {other:?}"))),
        }
    }
}

/// Real-valued ensemble size `z^2 V / (B - 2)^2` at which the violation reaches
/// `z` standard errors; `None` when there is no violation to detect.
///
/// In the regular setting each cycle contributes to only one of the four
/// correlations, hence the extra factor 4, and `V = 4 (1 + sigma^2)^2 - 2`.
pub fn n_required_real(sigma: f64, z: f64, setting: Setting, n_prior: u32) -> Result<Option<f64>> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidSigma(sigma));
    }
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::InvalidArgument(format!("z must be positive, got {z}")));
    }
    let (b, v, factor) = match setting {
        Setting::Sequential => {
            let y = damping(sigma);
            (bs_n_unchecked(n_prior, y), var_bs_n_unchecked(n_prior, sigma), 1.0)
        }
        Setting::Regular => (TSIRELSON, 4.0 * product_second_moment(sigma) - 2.0, 4.0),
    };
    if b <= 2.0 {
        return Ok(None);
    }
    Ok(Some(factor * z * z * v / (b - 2.0).powi(2)))
}

/// Smallest integer `N` with `z sqrt(V / N) < B - 2` (strict).
pub fn n_required(sigma: f64, z: f64, setting: Setting) -> Result<Option<u64>> {
    n_required_prior(sigma, z, setting, 0)
}

pub fn n_required_prior(sigma: f64, z: f64, setting: Setting, n_prior: u32) -> Result<Option<u64>> {
    Ok(n_required_real(sigma, z, setting, n_prior)?.map(smallest_integer_above))
}

fn smallest_integer_above(x: f64) -> u64 {
    (x.floor() as u64).saturating_add(1)
}

/// Root of `B_S(n, sigma) = 2`, by bisection to `1e-9`.
pub fn sigma_min(n: u32) -> f64 {
    let f = |s: f64| bs_n_unchecked(n, damping(s)) - 2.0;
    let mut lo = 0.5;
    let mut hi = 2.0;
    while f(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    while f(lo) > 0.0 {
        lo /= 2.0;
    }
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `sigma_3(n)`: the pointer spread minimizing the required ensemble size,
/// found by golden-section search over `ln sigma` (the objective diverges at
/// `sigma_min` and grows like `sigma^4`, so it is unimodal in between).
pub fn optimal_sigma(n: u32, z: f64) -> Result<(f64, u64)> {
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::InvalidArgument(format!("z must be positive, got {z}")));
    }
    let objective = |log_s: f64| {
        n_required_real(log_s.exp(), z, Setting::Sequential, n)
            .ok()
            .flatten()
            .unwrap_or(f64::INFINITY)
    };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut lo = sigma_min(n).ln();
    let mut hi = lo + 10f64.ln();
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (objective(x1), objective(x2));
    while hi - lo > GOLDEN_TOL {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = objective(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = objective(x2);
        }
    }
    let sigma = (0.5 * (lo + hi)).exp();
    let n3 = n_required_prior(sigma, z, Setting::Sequential, n)?
        .ok_or_else(|| Error::InvalidArgument("no violation at the optimum".into()))?;
    Ok((sigma, n3))
}

/// Summary of the sequential CHSH test at one `sigma`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChshAnalytics {
    pub sigma: f64,
    pub y: f64,
    pub bs: f64,
    pub var_bs: f64,
    pub n_z: Option<u64>,
}

pub fn analytics(sigma: f64, z: f64) -> Result<ChshAnalytics> {
    Ok(ChshAnalytics {
        sigma,
        y: damping(sigma),
        bs: bs_exact(sigma)?,
        var_bs: var_bs(sigma)?,
        n_z: n_required(sigma, z, Setting::Sequential)?,
    })
}

/// One row of the `B_S(sigma)` / `N_3(sigma)` curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Fig2Point {
    pub sigma: f64,
    pub bs: f64,
    pub var_bs: f64,
    pub n3: Option<u64>,
}

/// One row of the prior-sequence curve: thresholds and optimum versus `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Fig3Point {
    pub n: u32,
    pub sigma_min: f64,
    pub sigma3: f64,
    pub n3: u64,
    pub bs_at_sigma3: f64,
}

pub fn fig2_table(sigma_grid: &[f64], z: f64) -> Result<Vec<Fig2Point>> {
    sigma_grid
        .iter()
        .map(|&sigma| {
            let a = analytics(sigma, z)?;
            Ok(Fig2Point { sigma, bs: a.bs, var_bs: a.var_bs, n3: a.n_z })
        })
        .collect()
}

pub fn fig3_table(n_grid: &[u32], z: f64) -> Result<Vec<Fig3Point>> {
    n_grid
        .iter()
        .map(|&n| {
            let (sigma3, n3) = optimal_sigma(n, z)?;
            Ok(Fig3Point { n, sigma_min: sigma_min(n), sigma3, n3, bs_at_sigma3: bs_n(n, sigma3)? })
        })
        .collect()
}

/// Least-squares fit `y = c x^2` through the origin; returns `(c, R^2)` with
/// `R^2 = 1 - SS_res / SS_tot` about the mean of `y`.
pub fn quadratic_fit(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument("need at least two points".into()));
    }
    let sxx: f64 = points.iter().map(|(x, _)| x.powi(4)).sum();
    let sxy: f64 = points.iter().map(|(x, y)| x * x * y).sum();
    let c = sxy / sxx;
    let mean = points.iter().map(|(_, y)| y).sum::<f64>() / points.len() as f64;
    let ss_res: f64 = points.iter().map(|(x, y)| (y - c * x * x).powi(2)).sum();
    let ss_tot: f64 = points.iter().map(|(_, y)| (y - mean).powi(2)).sum();
    Ok((c, 1.0 - ss_res / ss_tot))
}

/// Coefficients of the post-measurement state after A measured `sigma_x`
/// then `sigma_z` and B measured `sigma_{pi/4}`:
/// `alpha = [cos(pi/8) + sin(pi/8)] / (2 sqrt2)`, `beta = [sin(pi/8) - cos(pi/8)] / (2 sqrt2)`.
pub fn mixture_coefficients() -> (f64, f64) {
    let (s, c) = FRAC_PI_8.sin_cos();
    ((c + s) / (2.0 * SQRT_2), (s - c) / (2.0 * SQRT_2))
}

/// One term `|z_A, b> phi(q2A - z_A) phi(q1B - b) [c_plus phi(q1A - 1) + c_minus phi(q1A + 1)]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixtureBranch {
    /// `sigma_z` eigenvalue of A; centre of the `q2A` pointer.
    pub z_a: f64,
    /// `sigma_{pi/4}` eigenvalue of B; centre of the `q1B` pointer.
    pub b: f64,
    pub c_plus: f64,
    pub c_minus: f64,
}

pub fn mixture_branches() -> [MixtureBranch; 4] {
    let (alpha, beta) = mixture_coefficients();
    let branch = |z_a, b, c_plus, c_minus| MixtureBranch { z_a, b, c_plus, c_minus };
    [
        branch(1.0, 1.0, alpha, -beta),
        branch(-1.0, 1.0, alpha, beta),
        branch(1.0, -1.0, beta, alpha),
        branch(-1.0, -1.0, beta, -alpha),
    ]
}

/// `int phi(q - a) phi(q - b) dq = exp(-(a - b)^2 / (8 sigma^2))`.
pub fn pointer_overlap(a: f64, b: f64, sigma: f64) -> f64 {
    (-(a - b).powi(2) / (8.0 * sigma * sigma)).exp()
}

/// `int q phi(q - a) phi(q - b) dq = (a + b) / 2 * overlap(a, b)`.
pub fn pointer_first_moment(a: f64, b: f64, sigma: f64) -> f64 {
    0.5 * (a + b) * pointer_overlap(a, b, sigma)
}

/// Moments of the displayed three-pointer state, by closed-form Gaussian integrals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixtureMoments {
    pub norm: f64,
    pub e_a1_b1: f64,
    pub e_a2_b1: f64,
    pub e_a1_a2: f64,
}

pub fn mixture_moments(sigma: f64) -> Result<MixtureMoments> {
    check_sigma(sigma)?;
    let mut m = MixtureMoments { norm: 0.0, e_a1_b1: 0.0, e_a2_b1: 0.0, e_a1_a2: 0.0 };
    for br in mixture_branches() {
        // The system kets are orthonormal, so branches add incoherently.
        // int |f(q1A)|^2 and int q1A |f(q1A)|^2 for f = c+ phi(q-1) + c- phi(q+1):
        let weight = br.c_plus.powi(2) * pointer_overlap(1.0, 1.0, sigma)
            + br.c_minus.powi(2) * pointer_overlap(-1.0, -1.0, sigma)
            + 2.0 * br.c_plus * br.c_minus * pointer_overlap(1.0, -1.0, sigma);
        let first = br.c_plus.powi(2) * pointer_first_moment(1.0, 1.0, sigma)
            + br.c_minus.powi(2) * pointer_first_moment(-1.0, -1.0, sigma)
            + 2.0 * br.c_plus * br.c_minus * pointer_first_moment(1.0, -1.0, sigma);
        // q2A and q1B pointers are single Gaussians centred on z_a and b.
        let q2a = pointer_first_moment(br.z_a, br.z_a, sigma);
        let q1b = pointer_first_moment(br.b, br.b, sigma);
        m.norm += weight;
        m.e_a2_b1 += q2a * q1b * weight;
        m.e_a1_b1 += first * q1b;
        m.e_a1_a2 += first * q2a;
    }
    Ok(m)
}

/// `E(q2A q1B)` from the explicit Gaussian-mixture state; equals `y / sqrt2`.
pub fn mixture_state_oracle(sigma: f64) -> Result<f64> {
    Ok(mixture_moments(sigma)?.e_a2_b1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meter::{PointerSpec, SpectralDecomp};
    use crate::qcore::{chsh_observables, epr_state, mat_vec};
    use num_complex::Complex64;
    use proptest::prelude::*;

    #[test]
    fn bs_exact_examples() {
        assert!((bs_exact(1e6).unwrap() - TSIRELSON).abs() < 1e-9);
        assert!((bs_exact(1.142539).unwrap() - 2.0).abs() < 1e-3);
        let y = (-0.125f64).exp();
        assert!((bs_exact(2.0).unwrap() - (1.0 + y).powi(2) / SQRT_2).abs() < 1e-15);
        assert!((bs_exact(2.0).unwrap() - 2.50588).abs() < 1e-4);
        assert_eq!(bs_exact(0.0), Err(Error::InvalidSigma(0.0)));
        assert!(bs_exact(-1.0).is_err());
    }

    #[test]
    fn threshold_matches_root() {
        let s = threshold_sigma();
        assert!((s - 1.1425).abs() < 1e-4);
        assert!((bs_exact(s).unwrap() - 2.0).abs() < 1e-12);
        assert!((sigma_min(0) - s).abs() < 1e-8);
    }

    #[test]
    fn correlations_examples() {
        let e = exact_correlations(2.0).unwrap();
        for (got, want) in e.iter().zip([FRAC_1_SQRT_2, 0.62403, 0.62403, 0.55072]) {
            assert!((got - want).abs() < 5e-5);
        }
        let e = exact_correlations(1e6).unwrap();
        assert!(e.iter().all(|v| (v - FRAC_1_SQRT_2).abs() < 1e-9));
        let s = signed_correlations(2.0).unwrap();
        assert!((crate::qcore::chsh_signed(s) - bs_exact(2.0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn variance_examples() {
        let y = (-0.125f64).exp();
        let v = var_bs(2.0).unwrap();
        assert!((v - (100.0 - 0.5 * (1.0 + y).powi(4))).abs() < 1e-12);
        assert!((v - 93.721).abs() < 1e-3);
        assert!((var_bs(1e-3).unwrap() - 3.5).abs() < 1e-5);
        assert_eq!(product_second_moment(2.0), 25.0);
    }

    #[test]
    fn n_required_examples() {
        assert_eq!(n_required(0.0, 3.0, Setting::Regular).unwrap(), Some(105));
        assert_eq!(n_required(1.0, 3.0, Setting::Sequential).unwrap(), None);
        let (sigma, n3) = optimal_sigma(0, 3.0).unwrap();
        assert_eq!(n3, 3088);
        assert!((sigma - 1.78).abs() < 0.01);
        assert!((bs_exact(sigma).unwrap() - 2.43).abs() < 0.01);
        assert!(n_required(1.0, 0.0, Setting::Sequential).is_err());
        assert!(n_required(-1.0, 3.0, Setting::Sequential).is_err());
        assert!("weird".parse::<Setting>().is_err());
    }

    #[test]
    fn n_required_is_strict_at_integer_boundary() {
        assert_eq!(smallest_integer_above(104.0), 105);
        assert_eq!(smallest_integer_above(104.2), 105);
    }

    #[test]
    fn n_required_diverges_like_inverse_square_gap() {
        // N (B_S - 2)^2 / (z^2 V) = 1 as B_S -> 2+.
        let s0 = threshold_sigma();
        for ds in [1e-3, 1e-4, 1e-5] {
            let s = s0 + ds;
            let n = n_required_real(s, 3.0, Setting::Sequential, 0).unwrap().unwrap();
            let gap = bs_exact(s).unwrap() - 2.0;
            assert!((n * gap * gap / (9.0 * var_bs(s).unwrap()) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn bs_n_examples() {
        assert_eq!(bs_n(0, 2.0).unwrap(), bs_exact(2.0).unwrap());
        let y = (-0.125f64).exp();
        assert!((bs_n(1, 2.0).unwrap() - y * y * bs_exact(2.0).unwrap()).abs() < 1e-15);
        assert!((bs_n(1, 2.0).unwrap() - 1.9518).abs() < 1e-3);
        let b5 = bs_n(5, 16.82).unwrap();
        assert!((b5 - 2.77).abs() < 0.01 && b5 > 2.0);
        assert!(sigma_min(5) < 16.82);
        assert!((var_bs_n(0, 2.0).unwrap() - var_bs(2.0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn sigma_min_examples() {
        let s100 = sigma_min(100);
        let approx = 2f64.powf(0.75) * 10.0;
        assert!(((s100 - approx) / approx).abs() < 0.05);
        assert!((bs_n(100, s100).unwrap() - 2.0).abs() < 1e-8);
        let mut prev = sigma_min(0);
        for n in 1..50 {
            let s = sigma_min(n);
            assert!(s > prev);
            prev = s;
        }
    }

    #[test]
    fn fig2_rows() {
        let rows = fig2_table(&[1.0, 1.78, 4.0], 3.0).unwrap();
        assert_eq!(rows[0].n3, None);
        let n3 = rows[1].n3.unwrap();
        assert!((3088..3100).contains(&n3));
        assert!((rows[1].bs - 2.43).abs() < 0.01);
        assert!(fig2_table(&[], 3.0).unwrap().is_empty());
    }

    #[test]
    fn fig3_rows() {
        let grid: Vec<u32> = (10..=100).step_by(10).collect();
        let rows = fig3_table(&grid, 3.0).unwrap();
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.n3 as f64)).collect();
        let (_, r2) = quadratic_fit(&pts).unwrap();
        assert!(r2 > 0.99);
        for w in rows.windows(2) {
            assert!(w[1].bs_at_sigma3 < w[0].bs_at_sigma3);
        }
        for r in &rows {
            assert!((2.3..=2.5).contains(&r.bs_at_sigma3));
            assert!(r.sigma3 > r.sigma_min);
        }
    }

    #[test]
    fn mixture_oracle_matches_closed_form() {
        for sigma in [0.5, 1.0, 2.0, 5.0] {
            let y = damping(sigma);
            let m = mixture_moments(sigma).unwrap();
            assert!((m.norm - 1.0).abs() < 1e-12);
            assert!((m.e_a2_b1 - y * FRAC_1_SQRT_2).abs() < 1e-10);
            assert!((m.e_a1_b1 - FRAC_1_SQRT_2).abs() < 1e-12);
            assert!(m.e_a1_a2.abs() < 1e-12);
        }
        assert!((mixture_state_oracle(1.0).unwrap() - 0.42888).abs() < 1e-5);
        let (a, b) = mixture_coefficients();
        // Two z-branches per B outcome carry total weight 1/2.
        assert!((2.0 * (a * a + b * b) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mixture_state_matches_kraus_dynamics() {
        // Joint pointer density from Kraus operators vs the displayed state.
        let ([a1, a2], [b1, _]) = chsh_observables();
        for sigma in [0.7, 2.0] {
            let ptr = PointerSpec::new(sigma).unwrap();
            let (ka1, ka2, kb1) = (
                SpectralDecomp::of(&a1).unwrap(),
                SpectralDecomp::of(&a2).unwrap(),
                SpectralDecomp::of(&b1).unwrap(),
            );
            for &(q1a, q2a, q1b) in &[(0.3, -1.2, 0.8), (2.5, 0.1, -0.4), (-1.0, 1.0, 1.7)] {
                let m = ka2.kraus_operator(q2a, ptr) * kb1.kraus_operator(q1b, ptr) * ka1.kraus_operator(q1a, ptr);
                let mut out = vec![Complex64::default(); 4];
                mat_vec(&m, epr_state().amplitudes(), &mut out);
                let kraus: f64 = out.iter().map(|a| a.norm_sqr()).sum();
                let phi = |x: f64| ptr.amplitude(x);
                let displayed: f64 = mixture_branches()
                    .iter()
                    .map(|br| {
                        (phi(q2a - br.z_a) * phi(q1b - br.b) * (br.c_plus * phi(q1a - 1.0) + br.c_minus * phi(q1a + 1.0)))
                            .powi(2)
                    })
                    .sum();
                assert!((kraus - displayed).abs() < 1e-12 * kraus.max(1e-3), "{kraus} vs {displayed}");
            }
        }
    }

    #[test]
    fn quadratic_fit_recovers_exact_parabola() {
        let pts: Vec<(f64, f64)> = (1..10).map(|x| (x as f64, 3.5 * (x * x) as f64)).collect();
        let (c, r2) = quadratic_fit(&pts).unwrap();
        assert!((c - 3.5).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn bs_is_increasing(a in 0.05f64..50.0, b in 0.05f64..50.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-6);
            prop_assert!(bs_exact(lo).unwrap() < bs_exact(hi).unwrap());
        }

        #[test]
        fn signed_correlations_sum_to_bs(sigma in 0.05f64..100.0) {
            let s = signed_correlations(sigma).unwrap();
            prop_assert!((crate::qcore::chsh_signed(s) - bs_exact(sigma).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn bs_limits() {
        assert!((bs_exact(0.01).unwrap() - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((bs_exact(1e4).unwrap() - TSIRELSON).abs() < 1e-7);
    }
}
