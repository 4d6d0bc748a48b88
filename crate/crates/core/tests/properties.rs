use num_bigint::BigUint;
use proptest::prelude::*;

use fep_core::dynamics::{jump_rate, simulate, Direction, RateTable};
use fep_core::estimators::{block_profile, ReplacementStat};
use fep_core::fde::{fde_step, DensityProfile, DtPolicy};
use fep_core::lattice::{classify, count_hole_isolated, count_with_window, ClassLabel, ExclusionConfig};
use fep_core::measures::{
    canonical_sample, conditioned_window_prob, periodic_gcm_prob, sample_profile, ConditionedWindow,
    GcmParams, PeriodicGcm, ProfileSampler,
};
use fep_core::profile::ProfileSpec;
use fep_core::rng::ReplicaSeed;
use fep_core::zr::{classify_zr, ex_to_zr, zr_step, ZrConfig};

fn config() -> impl Strategy<Value = ExclusionConfig> {
    proptest::collection::vec(0u8..2, 3..60).prop_map(|b| {
        let n = b.len();
        let mut c = ExclusionConfig::empty(n);
        for (i, v) in b.into_iter().enumerate() {
            c.set(i, v == 1);
        }
        c
    })
}

/// Mostly occupied configurations, so that the dynamics has moves.
fn dense_config() -> impl Strategy<Value = ExclusionConfig> {
    (proptest::collection::vec(0u8..4, 4..80)).prop_map(|b| {
        let n = b.len();
        let mut c = ExclusionConfig::empty(n);
        for (i, v) in b.into_iter().enumerate() {
            c.set(i, v != 0);
        }
        c
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rate_table_matches_the_rule(c in config()) {
        let n = c.size();
        let t = RateTable::build(&c);
        let mut active = 0;
        for x in 0..n {
            let xi = x as isize;
            let right = c.at(xi - 1) * c.at(xi) * (1 - c.at(xi + 1));
            let left = c.at(xi + 1) * c.at(xi) * (1 - c.at(xi - 1));
            prop_assert_eq!(jump_rate(&c, x, Direction::Right), right);
            prop_assert_eq!(jump_rate(&c, x, Direction::Left), left);
            active += usize::from(right) + usize::from(left);
        }
        prop_assert_eq!(t.len(), active);
        prop_assert_eq!(t.total_rate(), active as f64);
    }

    #[test]
    fn trajectories_replay_and_conserve(c in dense_config(), seed in 0u64..1000) {
        let mut rng = ReplicaSeed::new(seed, 0).rng();
        let tr = simulate(&c, 2.0 / (c.size() * c.size()) as f64 * 50.0, &mut rng);
        prop_assert_eq!(tr.replay(), tr.final_config.clone());
        prop_assert!(tr.events.windows(2).all(|w| w[0].t_micro < w[1].t_micro));
        prop_assert_eq!(tr.final_config.particle_count(), c.particle_count());
        // once ergodic, always ergodic
        if classify(&c) == ClassLabel::Ergodic {
            prop_assert_eq!(classify(&tr.final_config), ClassLabel::Ergodic);
        }
        if classify(&c) == ClassLabel::Blocked {
            prop_assert!(tr.events.is_empty());
        }
    }

    #[test]
    fn classification_survives_the_map(c in config()) {
        prop_assume!(c.hole_count() > 0);
        let zr = ex_to_zr(&c).unwrap();
        prop_assert_eq!(zr.total_particles() as usize, c.particle_count());
        prop_assert_eq!(zr.sites(), c.hole_count());
        prop_assert_eq!(classify_zr(&zr), classify(&c));
    }

    #[test]
    fn zero_range_conserves_mass(piles in proptest::collection::vec(0u32..5, 2..30), seed in 0u64..500) {
        let mut zr = ZrConfig::torus(piles).unwrap();
        let total = zr.total_particles();
        let mut rng = ReplicaSeed::new(seed, 1).rng();
        for _ in 0..200 {
            match zr_step(&mut zr, &mut rng) {
                Ok((_, _, dt)) => prop_assert!(dt >= 0.0),
                Err(_) => {
                    prop_assert!(zr.piles().iter().all(|&p| p <= 1));
                    break;
                }
            }
            prop_assert_eq!(zr.total_particles(), total);
        }
    }

    #[test]
    fn gcm_constants(rho in 0.5001f64..0.9999) {
        let p = GcmParams::new(rho).unwrap();
        prop_assert!((p.kappa * p.gamma - rho).abs() < 1e-12);
        prop_assert!((p.alpha * p.beta - (2.0 * rho - 1.0) / rho).abs() < 1e-12 * p.alpha.max(1.0));
        prop_assert!(p.kappa > 0.0 && p.alpha > 0.0 && p.beta > 0.0 && p.gamma > 0.0);
    }

    #[test]
    fn block_profiles_are_consistent(c in config(), ell in 0usize..5, m in 1usize..8) {
        prop_assume!(2 * ell + 1 <= c.size() && m <= c.size());
        let bp = block_profile(&c, ell).unwrap();
        prop_assert!(bp.values.iter().all(|v| (0.0..=1.0).contains(v)));
        // block averages keep the mean density
        let mean = bp.values.iter().sum::<f64>() / c.size() as f64;
        prop_assert!((mean - c.particle_count() as f64 / c.size() as f64).abs() < 1e-12);
        // coarse cells are averages of their sites
        let coarse = bp.coarse(m);
        let n = c.size();
        for (cell, &v) in coarse.iter().enumerate() {
            let members: Vec<f64> = (0..n)
                .filter(|i| ((i + 1) * m / n) % m == cell)
                .map(|i| bp.values[i])
                .collect();
            let avg = members.iter().sum::<f64>() / members.len() as f64;
            prop_assert!((avg - v).abs() < 1e-12);
        }
        // rotating the configuration rotates the profile
        let r = block_profile(&c.rotated(1), ell).unwrap();
        for x in 0..n {
            prop_assert!((r.values[x] - bp.values[(x + 1) % n]).abs() < 1e-12);
        }
    }

    #[test]
    fn replacement_statistic_is_bounded(c in config(), k in 0usize..6) {
        prop_assume!(2 * k + 3 <= c.size());
        let v = ReplacementStat::on_torus(&c, 0, k).unwrap().value;
        prop_assert!(v.abs() <= 2.0);
    }

    #[test]
    fn pde_steps_conserve_and_stay_in_range(
        cells in proptest::collection::vec(0.55f64..1.0, 4..64),
        steps in 1usize..200,
    ) {
        let p0 = DensityProfile::new(cells).unwrap();
        let (lo, hi, m0) = (p0.min(), p0.max(), p0.mass());
        let dt = DtPolicy::default().dt_for(&p0);
        let mut p = p0.clone();
        for _ in 0..steps {
            p = fde_step(&p, dt).unwrap();
            prop_assert!(p.min() >= lo - 1e-15 && p.max() <= hi + 1e-15);
        }
        prop_assert!((p.mass() - m0).abs() < 1e-12);
    }
}

#[test]
fn periodic_measure_translation_invariant() {
    for n in 3..=10usize {
        for rho in [0.6, 0.75, 0.9] {
            let pg = PeriodicGcm::new(GcmParams::new(rho).unwrap(), n).unwrap();
            for mask in 0u64..1 << n {
                let c = ExclusionConfig::from_mask(n, mask);
                let v = periodic_gcm_prob(&pg, &c).unwrap();
                for s in 1..n as isize {
                    let w = periodic_gcm_prob(&pg, &c.rotated(s)).unwrap();
                    assert!((v - w).abs() <= 1e-14, "{c} shift {s}");
                }
            }
        }
    }
}

#[test]
fn periodic_measure_conditionally_uniform() {
    let (n, k) = (8usize, 5usize);
    for rho in [0.6, 0.75, 0.9] {
        let pg = PeriodicGcm::new(GcmParams::new(rho).unwrap(), n).unwrap();
        let probs: Vec<f64> = (0u64..1 << n)
            .map(|m| ExclusionConfig::from_mask(n, m))
            .filter(|c| c.particle_count() == k && c.adjacent_hole_pairs() == 0)
            .map(|c| periodic_gcm_prob(&pg, &c).unwrap())
            .collect();
        let total: f64 = probs.iter().sum();
        let uniform = 1.0 / probs.len() as f64;
        for p in probs {
            assert!((p / total - uniform).abs() < 1e-12);
        }
    }
}

#[test]
fn canonical_window_marginals_are_count_ratios() {
    // pi(eta|window = sigma) * count == count_with_window, checked by brute force
    for n in 3..=14usize {
        for k in n / 2 + 1..n {
            let states: Vec<u64> = (0u64..1 << n)
                .filter(|&m| {
                    let c = ExclusionConfig::from_mask(n, m);
                    c.particle_count() == k && c.adjacent_hole_pairs() == 0
                })
                .collect();
            assert_eq!(BigUint::from(states.len()), count_hole_isolated(n, k).unwrap());
            for ell in 1..=3.min(n) {
                for w in 0u64..1 << ell {
                    let sigma: Vec<u8> = (0..ell).map(|i| ((w >> i) & 1) as u8).collect();
                    if sigma.windows(2).any(|p| p == [0, 0]) {
                        continue;
                    }
                    let hits = states.iter().filter(|&&s| s & ((1 << ell) - 1) == w).count();
                    assert_eq!(BigUint::from(hits), count_with_window(n, k, &sigma).unwrap());
                }
            }
        }
    }
}

#[test]
fn canonical_sampler_is_uniform() {
    let (n, k) = (8usize, 5usize);
    let mut rng = ReplicaSeed::new(77, 0).rng();
    let mut counts = std::collections::HashMap::new();
    let draws = 32_000;
    for _ in 0..draws {
        let c = canonical_sample(n, k, &mut rng).unwrap();
        assert_eq!(classify(&c), ClassLabel::Ergodic);
        *counts.entry(c.mask()).or_insert(0usize) += 1;
    }
    assert_eq!(counts.len(), 16);
    let expect = draws as f64 / 16.0;
    let sd = (expect * (1.0 - 1.0 / 16.0)).sqrt();
    for (_, c) in counts {
        assert!((c as f64 - expect).abs() < 5.0 * sd);
    }
}

#[test]
fn conditioned_window_examples() {
    let w = ConditionedWindow::new(1, 2).unwrap();
    let p = conditioned_window_prob(w, 0.75, &[1, 0, 1]).unwrap();
    assert!((p - 3.0 / 7.0).abs() < 1e-15);
    let full = ConditionedWindow::new(1, 3).unwrap();
    assert_eq!(conditioned_window_prob(full, 0.75, &[1, 1, 1]).unwrap(), 1.0);
    // same boundary, same probability, whatever rho
    let w = ConditionedWindow::new(3, 5).unwrap();
    for rho in [0.6, 0.9] {
        let a = conditioned_window_prob(w, rho, &[1, 0, 1, 1, 0, 1, 1]).unwrap();
        let b = conditioned_window_prob(w, rho, &[1, 1, 0, 1, 0, 1, 1]).unwrap();
        assert!((a / b - 1.0).abs() < 1e-15);
    }
    let a = conditioned_window_prob(w, 0.6, &[1, 0, 1, 1, 0, 1, 1]).unwrap();
    let b = conditioned_window_prob(w, 0.9, &[1, 0, 1, 1, 0, 1, 1]).unwrap();
    assert!((a - b).abs() > 1e-6);
    assert!(conditioned_window_prob(w, 0.75, &[1, 0, 0, 1, 1, 1, 1]).is_err());
}

#[test]
fn profile_sampling_marginals() {
    let mut rng = ReplicaSeed::new(8, 0).rng();
    let full = ProfileSampler::new(ProfileSpec::constant(1.0), 100).unwrap();
    assert_eq!(sample_profile(&full, &mut rng).unwrap().particle_count(), 100);
    let n = 10_000;
    let s = ProfileSampler::new(ProfileSpec::constant(0.75), n).unwrap();
    let c = sample_profile(&s, &mut rng).unwrap();
    let sd = (0.75 * 0.25 / n as f64).sqrt();
    assert!((c.particle_count() as f64 / n as f64 - 0.75).abs() < 3.0 * sd);
    // sinusoid: quarter blocks track the profile average
    let spec = ProfileSpec::sinusoid(0.75, 0.2);
    let s = ProfileSampler::new(spec.clone(), n).unwrap();
    let c = sample_profile(&s, &mut rng).unwrap();
    for q in 0..4 {
        let idx = q * n / 4..(q + 1) * n / 4;
        let emp = idx.clone().filter(|&i| c.get(i)).count() as f64 / (n / 4) as f64;
        let exp = idx.clone().map(|i| s.marginal(i)).sum::<f64>() / (n / 4) as f64;
        assert!((emp - exp).abs() < 4.0 * (0.25 / (n / 4) as f64).sqrt(), "quarter {q}");
    }
    assert!(ProfileSampler::new(ProfileSpec::constant(0.5), 10).is_err());
}
