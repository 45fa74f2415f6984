//! Statistics over record sets.
//!
//! Means and variances are accumulated by pairwise merging of fixed-size
//! blocks, which keeps 10^7-sample sums accurate and makes the result
//! independent of record order up to rounding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qcore::{spin_along, Hamiltonian, StateVector, Subsystem};
use crate::schedule::{lg_label, run_ensemble, sequential_pair_plan, Pair, RecordSet, A1, A2, A_CERT, B1, B2, B_CERT};

const LEAF: usize = 256;

/// Count, mean and sum of squared deviations of a sample.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn of(xs: &[f64]) -> Self {
        if xs.len() <= LEAF {
            let n = xs.len();
            if n == 0 {
                return Self::default();
            }
            let mean = xs.iter().sum::<f64>() / n as f64;
            let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum();
            return Self { n, mean, m2 };
        }
        let (lo, hi) = xs.split_at(xs.len() / 2);
        Self::of(lo).merge(Self::of(hi))
    }

    pub fn merge(self, other: Self) -> Self {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        Self {
            n,
            mean: self.mean + delta * w,
            m2: self.m2 + other.m2 + delta * delta * self.n as f64 * w,
        }
    }

    /// Unbiased sample variance; 0 for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PairSource {
    /// Weak readings, present in every cycle.
    Weak,
    /// Strong certificate readings, from cycles whose random choice matches.
    Certificate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CorrelationEstimate {
    pub pair: Pair,
    pub source: PairSource,
    pub mean: f64,
    pub se: f64,
    pub n_used: usize,
}

/// Sample mean of `q[first] * q[second]` over all records.
pub fn product_moments(records: &RecordSet, first: &str, second: &str) -> Result<Moments> {
    let i = records.step_index(first)?;
    let j = records.step_index(second)?;
    let products: Vec<f64> = records.rows().map(|r| r[i] * r[j]).collect();
    if products.is_empty() {
        return Err(Error::EmptySubsample(format!("{first}*{second}")));
    }
    Ok(Moments::of(&products))
}

/// `E(q^A_i q^B_j)` from the weak readings.
pub fn corr_est(records: &RecordSet, pair: Pair) -> Result<CorrelationEstimate> {
    let (a, b) = pair.weak_labels()?;
    let m = product_moments(records, a, b)?;
    Ok(CorrelationEstimate { pair, source: PairSource::Weak, mean: m.mean, se: m.std_error(), n_used: m.n })
}

/// `E(a_i b_j)` from the strong certificate readings of matching cycles.
pub fn corr_est_strong(records: &RecordSet, pair: Pair) -> Result<CorrelationEstimate> {
    let choices = records
        .certificate_choices()
        .ok_or_else(|| Error::MissingStep(format!("{A_CERT}/{B_CERT}")))?;
    let ia = records.step_index(A_CERT)?;
    let ib = records.step_index(B_CERT)?;
    let products: Vec<f64> = records
        .rows()
        .zip(choices)
        .filter(|(_, &c)| c == pair)
        .map(|(r, _)| r[ia] * r[ib])
        .collect();
    if products.is_empty() {
        return Err(Error::EmptySubsample(format!("certificate pair {pair}")));
    }
    let m = Moments::of(&products);
    Ok(CorrelationEstimate { pair, source: PairSource::Certificate, mean: m.mean, se: m.std_error(), n_used: m.n })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BsEstimate {
    /// `|mean(c_k)|`.
    pub bs_hat: f64,
    /// `mean(c_k)` before the absolute value.
    pub signed: f64,
    pub se: f64,
    /// Sample variance of the per-cycle combination `c_k`.
    pub sample_var: f64,
    pub n: usize,
}

impl BsEstimate {
    /// `(signed - 2) / se`.
    pub fn z(&self) -> Result<f64> {
        significance(self.signed, self.se)
    }
}

/// Per-cycle `c_k = q1A q1B + q1A q2B + q2A q1B - q2A q2B`.
pub fn chsh_combinations(records: &RecordSet) -> Result<Vec<f64>> {
    let [a1, a2, b1, b2] = [A1, A2, B1, B2].map(|l| records.step_index(l));
    let (a1, a2, b1, b2) = (a1?, a2?, b1?, b2?);
    Ok(records
        .rows()
        .map(|r| r[a1] * r[b1] + r[a1] * r[b2] + r[a2] * r[b1] - r[a2] * r[b2])
        .collect())
}

pub fn bs_est(records: &RecordSet) -> Result<BsEstimate> {
    let c = chsh_combinations(records)?;
    if c.is_empty() {
        return Err(Error::EmptySubsample("CHSH combination".into()));
    }
    Ok(bs_from_moments(Moments::of(&c)))
}

fn bs_from_moments(m: Moments) -> BsEstimate {
    BsEstimate { bs_hat: m.mean.abs(), signed: m.mean, se: m.std_error(), sample_var: m.variance(), n: m.n }
}

/// CHSH value of the strong certificate readings: the four matched-subsample
/// correlations combined, with their standard errors added in quadrature.
pub fn strong_bs(records: &RecordSet) -> Result<BsEstimate> {
    let est = Pair::CHSH.map(|p| corr_est_strong(records, p));
    let mut signed = 0.0;
    let mut var = 0.0;
    let mut n = 0;
    for (k, e) in est.into_iter().enumerate() {
        let e = e?;
        signed += if k == 3 { -e.mean } else { e.mean };
        var += e.se * e.se;
        n += e.n_used;
    }
    Ok(BsEstimate { bs_hat: signed.abs(), signed, se: var.sqrt(), sample_var: var * n as f64, n })
}

/// `(bs_hat - 2) / se`.
pub fn significance(bs_hat: f64, se: f64) -> Result<f64> {
    if se == 0.0 {
        return Err(Error::ZeroStandardError);
    }
    Ok((bs_hat - 2.0) / se)
}

/// Second-moment structure of the four products `q^A_i q^B_j` (CHSH order).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CovarianceReport {
    pub n: usize,
    /// `E[(q^A_i q^B_j)(q^A_k q^B_l)]`; the diagonal is `V(q^A_i q^B_j)` in
    /// the sense of a raw second moment.
    pub raw: [[f64; 4]; 4],
    pub raw_se: [[f64; 4]; 4],
    /// Sample covariance `E[xy] - E[x]E[y]` of the products.
    pub centered: [[f64; 4]; 4],
}

impl CovarianceReport {
    pub fn diagonal(&self) -> [f64; 4] {
        [0, 1, 2, 3].map(|k| self.raw[k][k])
    }

    /// Largest `|raw| / se` over the off-diagonal entries, all of which are
    /// predicted to vanish for the sequential quantum protocol.
    pub fn max_off_diagonal_z(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    worst = worst.max(self.raw[i][j].abs() / self.raw_se[i][j]);
                }
            }
        }
        worst
    }
}

pub fn cov_check(records: &RecordSet) -> Result<CovarianceReport> {
    let idx = [A1, A2, B1, B2].map(|l| records.step_index(l));
    let [a1, a2, b1, b2] = [idx[0].clone()?, idx[1].clone()?, idx[2].clone()?, idx[3].clone()?];
    let products: Vec<[f64; 4]> = records
        .rows()
        .map(|r| [r[a1] * r[b1], r[a1] * r[b2], r[a2] * r[b1], r[a2] * r[b2]])
        .collect();
    if products.is_empty() {
        return Err(Error::EmptySubsample("covariance".into()));
    }
    let means = [0, 1, 2, 3].map(|k| Moments::of(&products.iter().map(|p| p[k]).collect::<Vec<_>>()).mean);
    let mut report = CovarianceReport { n: products.len(), raw: [[0.0; 4]; 4], raw_se: [[0.0; 4]; 4], centered: [[0.0; 4]; 4] };
    let mut buf = Vec::with_capacity(products.len());
    for i in 0..4 {
        for j in i..4 {
            buf.clear();
            buf.extend(products.iter().map(|p| p[i] * p[j]));
            let m = Moments::of(&buf);
            for (r, c) in [(i, j), (j, i)] {
                report.raw[r][c] = m.mean;
                report.raw_se[r][c] = m.std_error();
                report.centered[r][c] = m.mean - means[i] * means[j];
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LgForm {
    /// `E12 + E23 - E13`.
    K3,
    /// `E12 + E23 + E34 - E14`.
    K4,
}

impl LgForm {
    fn terms(self) -> &'static [(usize, usize, f64)] {
        match self {
            LgForm::K3 => &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, -1.0)],
            LgForm::K4 => &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 3, -1.0)],
        }
    }

    fn len(self) -> usize {
        match self {
            LgForm::K3 => 3,
            LgForm::K4 => 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LgEstimate {
    pub form: LgForm,
    pub k_hat: f64,
    pub se: f64,
    pub n: usize,
}

pub fn lg_est(records: &RecordSet, form: LgForm) -> Result<LgEstimate> {
    let idx = (0..form.len())
        .map(|k| records.step_index(&lg_label(k)))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::InvalidPlan(format!("{form:?} needs readings Q1..Q{}: {e}", form.len())))?;
    let terms = form.terms();
    let c: Vec<f64> = records
        .rows()
        .map(|r| terms.iter().map(|&(i, j, s)| s * r[idx[i]] * r[idx[j]]).sum())
        .collect();
    if c.is_empty() {
        return Err(Error::EmptySubsample(format!("{form:?}")));
    }
    let m = Moments::of(&c);
    Ok(LgEstimate { form, k_hat: m.mean, se: m.std_error(), n: m.n })
}

/// One comparison of a sampled correlation with its weak-limit prediction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationCheck {
    pub first: String,
    pub second: String,
    pub estimate: f64,
    pub se: f64,
    pub predicted: f64,
}

impl CorrelationCheck {
    pub fn deviation(&self) -> f64 {
        (self.estimate - self.predicted).abs()
    }

    pub fn within(&self, bias: f64, k_se: f64) -> bool {
        self.deviation() <= bias + k_se * self.se
    }
}

/// A random instance of the weak-limit correlation theorem: a Haar-random
/// two-qubit state, four random spin directions measured in the sequential
/// CHSH order, `H0 = 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Theorem1Trial {
    pub trial: u64,
    pub checks: Vec<CorrelationCheck>,
}

impl Theorem1Trial {
    pub fn max_deviation(&self) -> f64 {
        self.checks.iter().map(CorrelationCheck::deviation).fold(0.0, f64::max)
    }

    pub fn within(&self, bias: f64, k_se: f64) -> bool {
        self.checks.iter().all(|c| c.within(bias, k_se))
    }
}

fn random_direction<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    let v: [f64; 3] = std::array::from_fn(|_| rng.sample(rand_distr::StandardNormal));
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.map(|x| x / n)
}

/// Runs trial `trial` of a reproducible series keyed by `seed`.
pub fn theorem1_trial(seed: u64, trial: u64, sigma: f64, n: usize) -> Result<Theorem1Trial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX - trial);
    let state = StateVector::random(2, &mut rng)?;
    let a = [spin_along(random_direction(&mut rng), Subsystem::A)?, spin_along(random_direction(&mut rng), Subsystem::A)?];
    let b = [spin_along(random_direction(&mut rng), Subsystem::B)?, spin_along(random_direction(&mut rng), Subsystem::B)?];
    let plan = sequential_pair_plan(state, a, b, sigma, Hamiltonian::zero(2)?)?;
    let run_seed = rng.random();
    let records = run_ensemble(&plan, n, run_seed)?;
    let pairs = [(A1, B1), (A1, B2), (A2, B1), (A2, B2), (A1, A2), (B1, B2)];
    let checks = pairs
        .iter()
        .map(|&(f, s)| {
            let m = product_moments(&records, f, s)?;
            Ok(CorrelationCheck {
                first: f.into(),
                second: s.into(),
                estimate: m.mean,
                se: m.std_error(),
                predicted: plan.weak_limit_correlation(f, s)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Theorem1Trial { trial, checks })
}
