//! Exact identity suites, run by the `verify` command.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::dynamics::{current_field, jump_rate, Direction, Move};
use crate::lattice::{
    adjacency_graph, binomial, classify, count_hole_isolated, count_with_window,
    enumerate_ergodic, enumerate_hole_isolated, is_ergodic_window, ExclusionConfig,
    DEFAULT_ENUMERATION_CAP,
};
use crate::measures::{
    chain_product, gcm_window_prob, gcm_window_prob_direct, GcmParams, PeriodicGcm,
};
use crate::zr::classification_commutes;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub cases: u64,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, cases: u64, failure: Option<String>) -> Self {
        Self {
            name: name.to_string(),
            passed: failure.is_none(),
            cases,
            detail: failure.unwrap_or_default(),
        }
    }
}

fn bits_of(mask: u32, len: usize) -> Vec<u8> {
    (0..len).map(|i| ((mask >> i) & 1) as u8).collect()
}

/// Enumerated counts against `C(k, m) + C(k-1, m-1)`.
pub fn check_counting(max_n: usize) -> CheckOutcome {
    let mut cases = 0;
    for n in 2..=max_n {
        for k in 1..n {
            cases += 1;
            let listed = match enumerate_hole_isolated(n, k, DEFAULT_ENUMERATION_CAP.max(max_n)) {
                Ok(it) => it.count(),
                Err(e) => return CheckOutcome::new("counting", cases, Some(e.to_string())),
            };
            let formula = count_hole_isolated(n, k).expect("valid k");
            if BigUint::from(listed) != formula {
                return CheckOutcome::new(
                    "counting",
                    cases,
                    Some(format!("N={n} k={k}: listed {listed}, formula {formula}")),
                );
            }
        }
    }
    CheckOutcome::new("counting", cases, None)
}

/// Per-window counts over the ergodic component against the binomial formula.
pub fn check_window_counting(max_n: usize, max_ell: usize) -> CheckOutcome {
    let mut cases = 0;
    for n in 2..=max_n {
        for k in n / 2 + 1..n {
            let configs: Vec<Vec<u8>> = match enumerate_ergodic(n, k, max_n.max(DEFAULT_ENUMERATION_CAP)) {
                Ok(it) => it.map(|c| c.bits()).collect(),
                Err(e) => return CheckOutcome::new("window counting", cases, Some(e.to_string())),
            };
            for ell in 1..=max_ell.min(n) {
                for mask in 0u32..1 << ell {
                    let sigma = bits_of(mask, ell);
                    if !is_ergodic_window(&sigma) {
                        continue;
                    }
                    cases += 1;
                    let listed = configs.iter().filter(|c| c[..ell] == sigma[..]).count();
                    let formula = count_with_window(n, k, &sigma).expect("valid window");
                    if BigUint::from(listed) != formula {
                        return CheckOutcome::new(
                            "window counting",
                            cases,
                            Some(format!("N={n} k={k} sigma={sigma:?}: {listed} vs {formula}")),
                        );
                    }
                }
            }
        }
    }
    CheckOutcome::new("window counting", cases, None)
}

pub fn check_irreducibility(max_n: usize) -> CheckOutcome {
    let mut cases = 0;
    for n in 2..=max_n {
        for k in n / 2 + 1..n {
            cases += 1;
            match adjacency_graph(n, k, max_n.max(DEFAULT_ENUMERATION_CAP)) {
                Ok(g) if g.is_connected() => {}
                Ok(_) => {
                    return CheckOutcome::new(
                        "irreducibility",
                        cases,
                        Some(format!("N={n} k={k} disconnected")),
                    )
                }
                Err(e) => return CheckOutcome::new("irreducibility", cases, Some(e.to_string())),
            }
        }
    }
    CheckOutcome::new("irreducibility", cases, None)
}

/// `j_{x,x+1} = h(x) - h(x+1)` and `L eta(x) = j_{x-1,x} - j_{x,x+1}` for every
/// configuration on up to `max_n` sites.
pub fn check_gradient(max_n: usize) -> CheckOutcome {
    let mut cases = 0;
    for n in 3..=max_n {
        for mask in 0u64..1 << n {
            cases += 1;
            let c = ExclusionConfig::from_mask(n, mask);
            let field = current_field(&c);
            let mut gen = vec![0i32; n];
            for x in 0..n {
                for dir in [Direction::Left, Direction::Right] {
                    if jump_rate(&c, x, dir) == 1 {
                        let y = Move { site: x, dir }.target(n);
                        gen[x] -= 1;
                        gen[y] += 1;
                    }
                }
            }
            for x in 0..n {
                let y = (x + 1) % n;
                let grad = i32::from(field.hval[x]) - i32::from(field.hval[y]);
                if i32::from(field.j[x]) != grad {
                    return CheckOutcome::new(
                        "gradient",
                        cases,
                        Some(format!("{c} edge {x}: j={} grad={grad}", field.j[x])),
                    );
                }
                let prev = (x + n - 1) % n;
                let cons = i32::from(field.j[prev]) - i32::from(field.j[x]);
                if gen[x] != cons {
                    return CheckOutcome::new(
                        "gradient",
                        cases,
                        Some(format!("{c} site {x}: L eta={} flux balance={cons}", gen[x])),
                    );
                }
            }
        }
    }
    CheckOutcome::new("gradient", cases, None)
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Cross-checks of the window formulas on all windows up to `max_ell` sites.
pub fn check_formulas(max_ell: usize, tol: f64) -> CheckOutcome {
    let rhos: Vec<f64> = (0..9).map(|i| 0.55 + 0.05 * i as f64).collect();
    let mut cases = 0;
    let mut worst = 0.0f64;
    for &rho in &rhos {
        let p = GcmParams::new(rho).expect("rho in range");
        for ell in 1..=max_ell {
            let mut total = 0.0;
            for mask in 0u32..1 << ell {
                cases += 1;
                let s = bits_of(mask, ell);
                let a = gcm_window_prob(&p, &s);
                let b = gcm_window_prob_direct(&p, &s);
                let c = chain_product(&p, &s);
                total += a;
                worst = worst.max(rel_err(a, b)).max(rel_err(a, c));
                if ell >= 2 {
                    let mut s0 = s.clone();
                    let mut s1 = s.clone();
                    s0[ell - 1] = 0;
                    s1[ell - 1] = 1;
                    let marg = gcm_window_prob(&p, &s0) + gcm_window_prob(&p, &s1);
                    worst = worst.max(rel_err(marg, gcm_window_prob(&p, &s[..ell - 1])));
                }
            }
            worst = worst.max(rel_err(total, 1.0));
        }
    }
    let failure = (worst > tol).then(|| format!("worst relative error {worst:e}"));
    let mut out = CheckOutcome::new("formulas", cases, failure);
    if out.passed {
        out.detail = format!("worst relative error {worst:e}");
    }
    out
}

/// Largest balance residual `|sum_eta' mu(eta') r(eta' -> eta) - mu(eta) out(eta)|`
/// of a measure given by `weight` over all configurations on `n` sites.
pub fn balance_residual<F: Fn(&ExclusionConfig) -> f64>(n: usize, weight: F) -> f64 {
    let states = 1usize << n;
    let mu: Vec<f64> = (0..states as u64)
        .map(|m| weight(&ExclusionConfig::from_mask(n, m)))
        .collect();
    let mut inflow = vec![0.0; states];
    let mut outflow = vec![0.0; states];
    for m in 0..states as u64 {
        let c = ExclusionConfig::from_mask(n, m);
        for x in 0..n {
            for dir in [Direction::Left, Direction::Right] {
                if jump_rate(&c, x, dir) == 1 {
                    let y = Move { site: x, dir }.target(n);
                    let mut d = c.clone();
                    d.swap(x, y);
                    inflow[d.mask() as usize] += mu[m as usize];
                    outflow[m as usize] += mu[m as usize];
                }
            }
        }
    }
    inflow
        .iter()
        .zip(&outflow)
        .map(|(i, o)| (i - o).abs())
        .fold(0.0, f64::max)
}

/// Stationarity of the periodic grand canonical measures and of the uniform
/// canonical measures.
pub fn check_balance(max_n: usize, tol: f64) -> CheckOutcome {
    let mut cases = 0;
    let mut worst = 0.0f64;
    for n in 3..=max_n {
        for rho in [0.6, 0.75, 0.9] {
            cases += 1;
            let pg = PeriodicGcm::new(GcmParams::new(rho).expect("rho"), n).expect("small N");
            let r = balance_residual(n, |c| {
                crate::measures::periodic_gcm_prob(&pg, c).expect("matching size")
            });
            worst = worst.max(r);
        }
        for k in n / 2 + 1..n {
            cases += 1;
            let count = count_hole_isolated(n, k).expect("k < N");
            let z = count.to_string().parse::<f64>().expect("small count");
            let r = balance_residual(n, |c| {
                let ergodic = c.particle_count() == k && c.adjacent_hole_pairs() == 0;
                if ergodic {
                    1.0 / z
                } else {
                    0.0
                }
            });
            worst = worst.max(r);
        }
    }
    let failure = (worst > tol).then(|| format!("worst residual {worst:e}"));
    let mut out = CheckOutcome::new("balance", cases, failure);
    if out.passed {
        out.detail = format!("worst residual {worst:e}");
    }
    out
}

pub fn check_classification(max_n: usize) -> CheckOutcome {
    let mut cases = 0;
    for n in 1..=max_n {
        for mask in 0u64..1 << n {
            let c = ExclusionConfig::from_mask(n, mask);
            cases += 1;
            let label = classify(&c);
            for s in 0..n as isize {
                if classify(&c.rotated(s)) != label {
                    return CheckOutcome::new("classification", cases, Some(format!("{c} rotation")));
                }
            }
            if classify(&c.reflected()) != label {
                return CheckOutcome::new("classification", cases, Some(format!("{c} reflection")));
            }
            if c.hole_count() > 0 && !classification_commutes(&c).unwrap_or(false) {
                return CheckOutcome::new(
                    "classification",
                    cases,
                    Some(format!("{c} zero-range label differs")),
                );
            }
        }
    }
    CheckOutcome::new("classification", cases, None)
}

/// `C(k,m) + C(k-1,m-1) = (N/k) C(k, N-k)`, checked as `k (...) = N C(k, N-k)`.
pub fn check_counting_rational(max_n: usize) -> CheckOutcome {
    let mut cases = 0;
    for n in 2..=max_n {
        for k in 1..n {
            cases += 1;
            let lhs = count_hole_isolated(n, k).expect("valid") * BigUint::from(k);
            let rhs = binomial(k as i64, (n - k) as i64) * BigUint::from(n);
            if lhs != rhs {
                return CheckOutcome::new("counting (rational form)", cases, Some(format!("N={n} k={k}")));
            }
        }
    }
    CheckOutcome::new("counting (rational form)", cases, None)
}

/// All suites at their default sizes.
pub fn run_all() -> Vec<CheckOutcome> {
    vec![
        check_counting(14),
        check_counting_rational(64),
        check_window_counting(12, 4),
        check_irreducibility(12),
        check_gradient(8),
        check_formulas(8, 1e-13),
        check_balance(10, 1e-12),
        check_classification(12),
    ]
}
