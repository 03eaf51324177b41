use latent_workbench::forward::{Pose, PoseOperator, Quaternion, Rotation, Translation, KERNEL_BANK};
use latent_workbench::inference::{kl_standard_normal, LatentDistribution, LinearGaussian};
use latent_workbench::selftest::{
    adjoint_checks, elbo_identity_checks, gradient_checks, kl_checks, vlt_posterior_fit, CheckResult,
};
use latent_workbench::tensor::LinearMap;
use proptest::prelude::*;

fn assert_all(checks: Vec<CheckResult>) {
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(ToString::to_string).collect();
    assert!(failed.is_empty(), "{failed:#?}");
}

#[test]
fn gradients_match_finite_differences() {
    let checks = gradient_checks().unwrap();
    assert!(checks.iter().any(|c| c.name.contains("model_loss/vlt_tomographic")));
    assert_all(checks);
}

#[test]
fn adjoints_match_dense_transposes() {
    assert_all(adjoint_checks(16).unwrap());
}

#[test]
fn analytic_kl_matches_monte_carlo() {
    assert_all(kl_checks().unwrap());
}

#[test]
fn elbo_plus_gap_is_evidence() {
    assert_all(elbo_identity_checks().unwrap());
}

#[test]
fn lookup_table_recovers_exact_posteriors() {
    for (a, s) in [(1.5, 0.8), (-0.4, 2.0)] {
        let fit = vlt_posterior_fit(a, s, 100, 3).unwrap();
        assert!(fit.passed(), "{fit:?}");
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `⟨A x, y⟩ = ⟨x, Aᵀ y⟩` up to rounding.
fn adjoint_identity(map: &dyn LinearMap, x: &[f64], y: &[f64]) -> f64 {
    let mut ax = vec![0.0; map.output_len()];
    let mut aty = vec![0.0; map.input_len()];
    map.apply(x, &mut ax);
    map.adjoint(y, &mut aty);
    let scale = 1.0 + dot(&ax, &ax).sqrt() * dot(y, y).sqrt();
    (dot(&ax, y) - dot(x, &aty)).abs() / scale
}

fn signal(len: usize, seed: u64) -> Vec<f64> {
    (0..len)
        .map(|i| ((i as u64 + 1).wrapping_mul(seed | 1).wrapping_mul(2654435761) % 1000) as f64 / 500.0 - 1.0)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pose_operator_adjoint_identity(
        size in 3usize..12,
        q in (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0),
        t in (-1.0f64..1.0, -1.0f64..1.0),
        kernel in 0usize..KERNEL_BANK.len(),
        seed in any::<u64>(),
    ) {
        let quat = Quaternion::new(q.0, q.1, q.2, q.3 + 2.0).normalized();
        let bound = size as f64 / 8.0;
        let pose = Pose { rotation: quat, translation: [t.0 * bound, t.1 * bound], ctf_kernel: kernel };
        let op = PoseOperator::new(size, &pose).unwrap();
        let x = signal(op.input_len(), seed);
        let y = signal(op.output_len(), seed ^ 0xabc);
        prop_assert!(adjoint_identity(&op, &x, &y) < 1e-12);

        let rot = Rotation::new(size, &quat).unwrap();
        let y3 = signal(rot.output_len(), seed ^ 0xdef);
        prop_assert!(adjoint_identity(&rot, &x, &y3) < 1e-12);

        let shift = Translation::new(size, [t.0 * 3.0, t.1 * 3.0]);
        let xi = signal(shift.input_len(), seed ^ 0x123);
        prop_assert!(adjoint_identity(&shift, &xi, &y) < 1e-12);
    }

    #[test]
    fn kl_is_non_negative(
        params in proptest::collection::vec((-5.0f64..5.0, -6.0f64..4.0), 1..10),
    ) {
        let (mu, ls): (Vec<f64>, Vec<f64>) = params.into_iter().unzip();
        let d = LatentDistribution::new(mu, ls).unwrap();
        prop_assert!(kl_standard_normal(&d) >= 0.0);
    }

    #[test]
    fn elbo_never_exceeds_evidence(
        a in -3.0f64..3.0,
        s in 0.1f64..3.0,
        x in -5.0f64..5.0,
        mu in -4.0f64..4.0,
        log_sigma in -3.0f64..1.5,
    ) {
        let m = LinearGaussian::new(a, s).unwrap();
        let sigma = log_sigma.exp();
        prop_assert!(m.elbo(x, mu, sigma) <= m.log_evidence(x) + 1e-10);
        let (pm, pv) = m.posterior(x).unwrap();
        prop_assert!((m.elbo(x, pm, pv.sqrt()) - m.log_evidence(x)).abs() < 1e-9);
    }
}
