//! Local-hidden-variable adversaries and the certificate detector.
//!
//! Both simulators emit record sets in the certified layout
//! (`A1, B1, A2, B2, As, Bs` plus per-cycle choices), so every estimator that
//! works on quantum runs applies unchanged. A strong certificate reading of a
//! hidden-variable model is the pre-set value of the chosen observable.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{corr_est, corr_est_strong, strong_bs, CorrelationEstimate};
use crate::schedule::{cycle_rng, Pair, RecordSet, A1, A2, A_CERT, B1, B2, B_CERT};

const BLOCK: usize = 4096;
const LABELS: [&str; 6] = [A1, B1, A2, B2, A_CERT, B_CERT];

/// Default rejection threshold of the certificate test.
pub const DEFAULT_Z_REJECT: f64 = 5.0;

/// Pre-set outcomes `a_1, a_2, b_1, b_2` for one value of the hidden variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Assignment {
    pub a: [i8; 2],
    pub b: [i8; 2],
}

impl Assignment {
    pub fn new(a: [i8; 2], b: [i8; 2]) -> Result<Self> {
        if a.iter().chain(&b).any(|v| v.abs() != 1) {
            return Err(Error::InvalidArgument(format!("hidden values must be +-1, got a={a:?} b={b:?}")));
        }
        Ok(Self { a, b })
    }

    /// All 16 deterministic assignments.
    pub fn all() -> impl Iterator<Item = Assignment> {
        (0..16u8).map(|bits| {
            let v = |k: u8| if bits >> k & 1 == 1 { -1 } else { 1 };
            Assignment { a: [v(0), v(1)], b: [v(2), v(3)] }
        })
    }

    /// `a1 b1 + a1 b2 + a2 b1 - a2 b2`, always `+-2`.
    pub fn chsh(&self) -> i8 {
        let [a1, a2] = self.a;
        let [b1, b2] = self.b;
        a1 * b1 + a1 * b2 + a2 * b1 - a2 * b2
    }
}

/// Discrete distribution over deterministic assignments.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HiddenStrategy {
    components: Vec<(f64, Assignment)>,
}

impl HiddenStrategy {
    pub fn new(components: Vec<(f64, Assignment)>) -> Result<Self> {
        if components.is_empty() || components.iter().any(|(w, _)| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument("weights must be finite and non-negative".into()));
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if total <= 0.0 {
            return Err(Error::InvalidArgument("weights sum to zero".into()));
        }
        Ok(Self { components: components.into_iter().map(|(w, a)| (w / total, a)).collect() })
    }

    pub fn deterministic(assignment: Assignment) -> Self {
        Self { components: vec![(1.0, assignment)] }
    }

    /// Random weights over all 16 assignments (flat Dirichlet).
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let components = Assignment::all().map(|a| (Exp1.sample(rng), a)).collect();
        Self::new(components).expect("exponential weights are positive")
    }

    pub fn components(&self) -> &[(f64, Assignment)] {
        &self.components
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Assignment {
        let mut u: f64 = rng.random();
        for &(w, a) in &self.components {
            if u < w {
                return a;
            }
            u -= w;
        }
        self.components.last().expect("non-empty").1
    }

    /// `E(a_i b_j)` in CHSH order.
    pub fn correlations(&self) -> [f64; 4] {
        let mut e = [0.0; 4];
        for &(w, x) in &self.components {
            for (k, p) in Pair::CHSH.iter().enumerate() {
                e[k] += w * f64::from(x.a[p.a as usize - 1] * x.b[p.b as usize - 1]);
            }
        }
        e
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum NoiseModel {
    /// Independent `Normal(0, sigma^2)` noise on every reading.
    Independent { sigma: f64 },
    /// One shared `g ~ Normal(0, 1)` per cycle, added as `s_i c g` to A's
    /// readings and `t_j c g` to B's.
    Malicious { c: f64, s: [f64; 2], t: [f64; 2] },
}

impl NoiseModel {
    /// The sign pattern `s = (+,+)`, `t = (+,-)`, which gives `B_S = 2 + 2c^2`.
    pub fn malicious(c: f64) -> Self {
        NoiseModel::Malicious { c, s: [1.0, 1.0], t: [1.0, -1.0] }
    }

    /// Draws the four weak readings `[A1, B1, A2, B2]` for hidden values `x`.
    fn readings<R: Rng + ?Sized>(&self, x: Assignment, rng: &mut R) -> [f64; 4] {
        let (a, b) = (x.a.map(f64::from), x.b.map(f64::from));
        match *self {
            NoiseModel::Independent { sigma } => {
                let mut n = || sigma * rng.sample::<f64, _>(StandardNormal);
                [a[0] + n(), b[0] + n(), a[1] + n(), b[1] + n()]
            }
            NoiseModel::Malicious { c, s, t } => {
                let g: f64 = rng.sample(StandardNormal);
                [a[0] + s[0] * c * g, b[0] + t[0] * c * g, a[1] + s[1] * c * g, b[1] + t[1] * c * g]
            }
        }
    }
}

fn run_lhv(strategy: &HiddenStrategy, noise: NoiseModel, n: usize, seed: u64, description: String) -> Result<RecordSet> {
    if n == 0 {
        return Err(Error::InvalidArgument("ensemble size must be at least 1".into()));
    }
    let width = LABELS.len();
    let mut readings = vec![0.0; n * width];
    let choices: Vec<Vec<Pair>> = readings
        .par_chunks_mut(BLOCK * width)
        .enumerate()
        .map(|(block, chunk)| {
            chunk
                .chunks_mut(width)
                .enumerate()
                .map(|(offset, row)| {
                    let mut rng = cycle_rng(seed, (block * BLOCK + offset) as u64);
                    let x = strategy.sample(&mut rng);
                    row[..4].copy_from_slice(&noise.readings(x, &mut rng));
                    let choice = Pair::new(rng.random_range(1..=2), rng.random_range(1..=2));
                    row[4] = f64::from(x.a[choice.a as usize - 1]);
                    row[5] = f64::from(x.b[choice.b as usize - 1]);
                    choice
                })
                .collect()
        })
        .collect();
    RecordSet::from_parts(
        LABELS.iter().map(|s| s.to_string()).collect(),
        readings,
        Some(choices.into_iter().flatten().collect()),
        description,
        seed,
    )
}

/// Honest model: `q = value + Normal(0, sigma^2)` independently per reading.
pub fn run_additive_lhv(strategy: &HiddenStrategy, sigma: f64, n: usize, seed: u64) -> Result<RecordSet> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidSigma(sigma));
    }
    run_lhv(strategy, NoiseModel::Independent { sigma }, n, seed, format!("lhv-additive sigma={sigma}"))
}

/// Malicious model: all hidden values `+1`, noise correlated through a shared
/// Gaussian so that `E(q^A_i q^B_j) = 1 + s_i t_j c^2`.
pub fn run_malicious_lhv(c: f64, n: usize, seed: u64) -> Result<RecordSet> {
    if !(c.is_finite() && c >= 0.0) {
        return Err(Error::InvalidArgument(format!("c must be non-negative, got {c}")));
    }
    let strategy = HiddenStrategy::deterministic(Assignment { a: [1, 1], b: [1, 1] });
    run_lhv(&strategy, NoiseModel::malicious(c), n, seed, format!("lhv-malicious c={c}"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Consistent,
    Interference,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Consistent => "consistent",
            Verdict::Interference => "interference detected",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateReport {
    pub verdict: Verdict,
    /// Two-sample `(weak - strong) / sqrt(se_w^2 + se_s^2)` per pair.
    pub z: Vec<(Pair, f64)>,
    pub strong_chsh: f64,
    pub strong_se: f64,
    /// Whether the strong-reading CHSH value is at most `2 + 3 se`.
    pub strong_within_bound: bool,
}

/// Compares weak and strong correlation estimates pair by pair.
pub fn certificate_test(
    weak: &[CorrelationEstimate],
    strong: &[CorrelationEstimate],
    z_reject: f64,
) -> Result<CertificateReport> {
    if z_reject.is_nan() || z_reject <= 0.0 {
        return Err(Error::InvalidArgument(format!("z_reject must be positive, got {z_reject}")));
    }
    let mut z = Vec::with_capacity(4);
    let (mut chsh, mut var) = (0.0, 0.0);
    for p in Pair::CHSH {
        let find = |set: &[CorrelationEstimate], what: &str| {
            set.iter()
                .find(|e| e.pair == p)
                .copied()
                .ok_or_else(|| Error::MissingStep(format!("{what} pair {p}")))
        };
        let (w, s) = (find(weak, "weak")?, find(strong, "strong")?);
        let diff = w.mean - s.mean;
        let denom = (w.se * w.se + s.se * s.se).sqrt();
        let zk = if diff == 0.0 { 0.0 } else { diff / denom };
        z.push((p, zk));
        chsh += if p == Pair::new(2, 2) { -s.mean } else { s.mean };
        var += s.se * s.se;
    }
    let verdict = if z.iter().any(|(_, v)| v.abs() > z_reject) { Verdict::Interference } else { Verdict::Consistent };
    let strong_se = var.sqrt();
    Ok(CertificateReport {
        verdict,
        z,
        strong_chsh: chsh.abs(),
        strong_se,
        strong_within_bound: chsh.abs() <= 2.0 + 3.0 * strong_se,
    })
}

/// Certificate test on a certified record set (quantum or hidden-variable).
pub fn certify(records: &RecordSet, z_reject: f64) -> Result<CertificateReport> {
    let weak = Pair::CHSH.map(|p| corr_est(records, p)).into_iter().collect::<Result<Vec<_>>>()?;
    let strong = Pair::CHSH.map(|p| corr_est_strong(records, p)).into_iter().collect::<Result<Vec<_>>>()?;
    let report = certificate_test(&weak, &strong, z_reject)?;
    debug_assert!((report.strong_chsh - strong_bs(records)?.bs_hat).abs() < 1e-9);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::bs_est;
    use crate::schedule::{certified_plan, run_ensemble};
    use proptest::prelude::*;

    #[test]
    fn every_assignment_has_chsh_two() {
        assert_eq!(Assignment::all().count(), 16);
        assert!(Assignment::all().all(|a| a.chsh().abs() == 2));
        assert!(Assignment::new([1, 0], [1, 1]).is_err());
    }

    #[test]
    fn deterministic_noiseless_gives_two() {
        let s = HiddenStrategy::deterministic(Assignment::new([1, 1], [1, 1]).unwrap());
        let rs = run_additive_lhv(&s, 0.0, 1000, 1).unwrap();
        let b = bs_est(&rs).unwrap();
        assert_eq!(b.bs_hat, 2.0);
        assert_eq!(b.se, 0.0);
        assert_eq!(rs.labels(), LABELS.map(String::from));
    }

    #[test]
    fn additive_correlations_are_hidden_correlations() {
        let mut rng = cycle_rng(4, 0);
        let s = HiddenStrategy::random(&mut rng);
        let rs = run_additive_lhv(&s, 2.0, 200_000, 9).unwrap();
        let want = s.correlations();
        for (k, p) in Pair::CHSH.iter().enumerate() {
            let e = corr_est(&rs, *p).unwrap();
            assert!((e.mean - want[k]).abs() < 4.0 * e.se, "{p}: {} vs {}", e.mean, want[k]);
        }
        let b = bs_est(&rs).unwrap();
        assert!(b.bs_hat <= 2.0 + 4.0 * b.se);
    }

    #[test]
    fn malicious_model_algebra() {
        let rs = run_malicious_lhv(1.0, 100_000, 2).unwrap();
        let b = bs_est(&rs).unwrap();
        assert!((b.bs_hat - 4.0).abs() < 4.0 * b.se);
        let e12 = corr_est(&rs, Pair::new(1, 2)).unwrap();
        assert!(e12.mean.abs() < 4.0 * e12.se);
        let strong = strong_bs(&rs).unwrap();
        assert_eq!(strong.bs_hat, 2.0);
        let report = certify(&rs, DEFAULT_Z_REJECT).unwrap();
        assert_eq!(report.verdict, Verdict::Interference);
        assert!(report.strong_within_bound);

        let zero = bs_est(&run_malicious_lhv(0.0, 1000, 2).unwrap()).unwrap();
        assert_eq!(zero.bs_hat, 2.0);
        assert!(run_malicious_lhv(-1.0, 10, 0).is_err());
    }

    #[test]
    fn malicious_inflation_grows_with_c() {
        let b1 = bs_est(&run_malicious_lhv(1.0, 100_000, 5).unwrap()).unwrap();
        let b2 = bs_est(&run_malicious_lhv(2.0, 100_000, 5).unwrap()).unwrap();
        assert!(b2.bs_hat - 4.0 * b2.se > b1.bs_hat + 4.0 * b1.se);
        assert!(b1.bs_hat - 4.0 * b1.se > 2.0 * std::f64::consts::SQRT_2);
    }

    #[test]
    fn identical_inputs_are_consistent() {
        let rs = run_malicious_lhv(1.0, 1000, 3).unwrap();
        let weak: Vec<_> = Pair::CHSH.iter().map(|&p| corr_est(&rs, p).unwrap()).collect();
        let report = certificate_test(&weak, &weak, DEFAULT_Z_REJECT).unwrap();
        assert_eq!(report.verdict, Verdict::Consistent);
        assert!(report.z.iter().all(|(_, z)| *z == 0.0));
        assert!(certificate_test(&weak[..3], &weak, 5.0).is_err());
    }

    #[test]
    fn quantum_certificate_in_weak_regime_is_consistent() {
        // At large sigma the weak readings barely disturb the state, so the
        // detector must not fire on quantum data.
        let rs = run_ensemble(&certified_plan(30.0).unwrap(), 40_000, 12).unwrap();
        let report = certify(&rs, DEFAULT_Z_REJECT).unwrap();
        assert_eq!(report.verdict, Verdict::Consistent, "{report:?}");
    }

    #[test]
    fn runs_are_reproducible() {
        let s = HiddenStrategy::random(&mut cycle_rng(1, 1));
        assert_eq!(run_additive_lhv(&s, 1.0, 5000, 6).unwrap(), run_additive_lhv(&s, 1.0, 5000, 6).unwrap());
        assert!(run_additive_lhv(&s, -1.0, 10, 0).is_err());
        assert!(run_additive_lhv(&s, 1.0, 0, 0).is_err());
    }

    proptest! {
        #[test]
        fn strategy_chsh_is_bounded(seed in 0u64..10_000) {
            let s = HiddenStrategy::random(&mut cycle_rng(seed, 0));
            let e = s.correlations();
            prop_assert!((e[0] + e[1] + e[2] - e[3]).abs() <= 2.0 + 1e-12);
            let total: f64 = s.components().iter().map(|(w, _)| w).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
