use weakbell::closedform::{bs_exact, n_required, optimal_sigma, threshold_sigma, Setting};
use weakbell::estimator::{bs_est, corr_est};
use weakbell::lhv::{certify, run_additive_lhv, run_malicious_lhv, Assignment, HiddenStrategy, Verdict, DEFAULT_Z_REJECT};
use weakbell::schedule::{certified_plan, chsh_sequential_plan, cycle_rng, run_ensemble, Pair};

#[test]
fn threshold_ensemble_sits_at_two() {
    let sigma = threshold_sigma();
    let rs = run_ensemble(&chsh_sequential_plan(sigma, 0).unwrap(), 10_000_000, 21).unwrap();
    let b = bs_est(&rs).unwrap();
    assert!((b.bs_hat - 2.0).abs() < 4.0 * b.se, "{b:?}");
}

#[test]
fn planner_sized_experiments_land_near_three_sigma() {
    // With N = N_3 at the optimum, z = (B - 2)/se is approximately Normal(3, 1).
    let (sigma, n) = optimal_sigma(0, 3.0).unwrap();
    let plan = chsh_sequential_plan(sigma, 0).unwrap();
    let zs: Vec<f64> = (0..100)
        .map(|k| bs_est(&run_ensemble(&plan, n as usize, 500 + k).unwrap()).unwrap().z().unwrap())
        .collect();
    let mean = zs.iter().sum::<f64>() / zs.len() as f64;
    let inside = zs.iter().filter(|z| (2.0..=4.0).contains(*z)).count();
    assert!((mean - 3.0).abs() < 0.35, "mean z {mean}");
    assert!((52..=84).contains(&inside), "{inside}/100 in [2, 4]");
}

#[test]
fn regular_setting_needs_far_fewer_cycles() {
    let regular = n_required(0.0, 3.0, Setting::Regular).unwrap().unwrap();
    let (_, sequential) = optimal_sigma(0, 3.0).unwrap();
    assert!(sequential > 25 * regular);
}

#[test]
fn additive_models_never_violate() {
    let mut rng = cycle_rng(31, 0);
    let mut strategies: Vec<HiddenStrategy> = (0..10).map(|_| HiddenStrategy::random(&mut rng)).collect();
    // Extremal deterministic strategies saturate the bound.
    strategies.extend(Assignment::all().filter(|a| a.chsh() == 2).map(HiddenStrategy::deterministic));
    for (k, s) in strategies.iter().enumerate() {
        let rs = run_additive_lhv(s, 2.0, 50_000, 40 + k as u64).unwrap();
        let b = bs_est(&rs).unwrap();
        assert!(b.bs_hat <= 2.0 + 4.0 * b.se, "strategy {k}: {b:?}");
        let e = s.correlations();
        for (j, p) in Pair::CHSH.iter().enumerate() {
            let c = corr_est(&rs, *p).unwrap();
            assert!((c.mean - e[j]).abs() < 4.5 * c.se);
        }
    }
}

#[test]
fn detector_power_and_false_positives() {
    for seed in 0..20 {
        let mal = certify(&run_malicious_lhv(1.0, 100_000, seed).unwrap(), DEFAULT_Z_REJECT).unwrap();
        assert_eq!(mal.verdict, Verdict::Interference);
    }
    // Quantum data in the weak regime, where weak and strong correlations agree.
    let plan = certified_plan(40.0).unwrap();
    for seed in 0..10 {
        let qm = certify(&run_ensemble(&plan, 100_000, 100 + seed).unwrap(), DEFAULT_Z_REJECT).unwrap();
        assert_eq!(qm.verdict, Verdict::Consistent, "{qm:?}");
    }
}

#[test]
fn quantum_certificate_at_moderate_sigma_sees_dephasing() {
    // Strong readings at the end of the cycle carry one factor y per party.
    let rs = run_ensemble(&certified_plan(2.0).unwrap(), 200_000, 77).unwrap();
    let report = certify(&rs, DEFAULT_Z_REJECT).unwrap();
    assert_eq!(report.verdict, Verdict::Interference);
    let y2 = (-0.25f64).exp();
    assert!((report.strong_chsh - y2 * 2.0 * 2f64.sqrt()).abs() < 4.0 * report.strong_se);
}

#[test]
fn malicious_violation_grows_without_bound() {
    let mut last = 2.0;
    for c in [0.5, 1.0, 2.0, 3.0] {
        let b = bs_est(&run_malicious_lhv(c, 50_000, 3).unwrap()).unwrap();
        assert!((b.bs_hat - (2.0 + 2.0 * c * c)).abs() < 4.0 * b.se);
        assert!(b.bs_hat > last);
        last = b.bs_hat;
    }
    assert!(last > bs_exact(1e9).unwrap());
}
