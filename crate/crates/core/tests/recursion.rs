//! The simulated affine campaign and the closed-form error recursion are the
//! same sequence, noise included.

use proptest::prelude::*;

use tilc_aar::convergence::{build_augmented, iterate_recursion, NoiseSequence};
use tilc_aar::sim::{run_campaign, Scenario};
use tilc_aar::tilc::TilcGains;

fn check(sc: &Scenario) -> f64 {
    let res = run_campaign(sc).unwrap();
    let n = res.attempts.len();
    let mut noise = NoiseSequence::zero(0);
    for a in &res.attempts {
        let (v_dr, v_pr) = a.affine_noise.unwrap();
        noise.v_dr.push(v_dr);
        noise.v_pr.push(v_pr);
    }
    let it = build_augmented(&sc.disturbances.offset_map.m1, &sc.tilc).unwrap();
    let first = &res.attempts[0];
    let seq =
        iterate_recursion(&it, (first.docking_error().unwrap(), first.probe_error().unwrap()), n - 1, Some(&noise));
    res.attempts
        .iter()
        .zip(&seq.x)
        .map(|(a, (d, e))| (a.docking_error().unwrap() - d).amax().max((a.probe_error().unwrap() - e).amax()))
        .fold(0.0, f64::max)
}

#[test]
fn noisy_affine_campaign_follows_recursion() {
    let mut sc = Scenario::default_affine();
    sc.campaign.n_attempts = 30;
    assert!(check(&sc) < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn recursion_equivalence_for_any_valid_gains(
        ka in 0.0f64..0.99, kp in 0.01f64..1.0, seed in any::<u64>(),
    ) {
        let mut sc = Scenario::default_affine();
        sc.tilc = TilcGains::uniform(ka, kp);
        sc.campaign.n_attempts = 12;
        sc.campaign.master_seed = seed;
        prop_assert!(check(&sc) < 1e-10);
    }
}
