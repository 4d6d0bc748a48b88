//! Invariant measures of the facilitated exclusion process.
//!
//! The grand canonical measure `pi_rho` gives probability
//! `kappa * alpha^p * beta^l * gamma^(s(1) + s(l))` to a window `s` of length
//! `l` with `p` particles and isolated holes. Equivalently, reading a window
//! left to right is a two-state Markov chain started from Bernoulli(rho) in
//! which a hole is always followed by a particle and a particle is followed by
//! a particle with probability `(2 rho - 1) / rho`.

use num_traits::ToPrimitive;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FepError, Result};
use crate::lattice::{
    binomial, count_with_window, enumerate_ergodic, is_ergodic_window, ln_count_with_window,
    ExclusionConfig,
};
use crate::profile::ProfileSpec;

/// Largest box (in sites) handled by exact enumeration.
pub const WINDOW_ENUMERATION_CAP: usize = 25;
/// Largest torus handled by exact enumeration.
pub const TORUS_ENUMERATION_CAP: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GcmParams {
    pub rho: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub f_of_rho: f64,
}

impl GcmParams {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.5 && rho < 1.0) {
            return Err(FepError::Density {
                rho,
                range: "(1/2, 1)",
            });
        }
        let k = 2.0 * rho - 1.0;
        Ok(Self {
            rho,
            kappa: k,
            alpha: k * k / (rho * (1.0 - rho)),
            beta: (1.0 - rho) / k,
            gamma: rho / k,
            f_of_rho: f_of_rho(rho),
        })
    }

    /// Probability that a particle is followed by a particle.
    pub fn stay(&self) -> f64 {
        (2.0 * self.rho - 1.0) / self.rho
    }
}

/// `max(0, (2 rho - 1) / rho)`.
pub fn f_of_rho(rho: f64) -> f64 {
    ((2.0 * rho - 1.0) / rho).max(0.0)
}

/// Grand canonical measure including the degenerate densities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GrandCanonical {
    Regular(GcmParams),
    /// Point mass on the full configuration (`rho = 1`).
    Full,
    /// Even mixture of the two alternating configurations (`rho <= 1/2`).
    Alternating,
}

impl GrandCanonical {
    pub fn new(rho: f64) -> Result<Self> {
        if rho == 1.0 {
            Ok(GrandCanonical::Full)
        } else if rho > 0.0 && rho <= 0.5 {
            Ok(GrandCanonical::Alternating)
        } else {
            GcmParams::new(rho).map(GrandCanonical::Regular)
        }
    }

    pub fn window_prob(&self, sigma: &[u8]) -> f64 {
        match self {
            GrandCanonical::Regular(p) => gcm_window_prob(p, sigma),
            GrandCanonical::Full => sigma.iter().all(|&b| b != 0) as u8 as f64,
            GrandCanonical::Alternating => {
                let alternates = sigma.windows(2).all(|w| (w[0] != 0) != (w[1] != 0));
                if alternates {
                    0.5
                } else {
                    0.0
                }
            }
        }
    }

    pub fn sample_window<R: Rng + ?Sized>(&self, ell: usize, rng: &mut R) -> Vec<u8> {
        match self {
            GrandCanonical::Regular(p) => sample_gcm_window(p, ell, rng),
            GrandCanonical::Full => vec![1; ell],
            GrandCanonical::Alternating => {
                let first = rng.gen::<bool>() as usize;
                (0..ell).map(|i| ((first + i) % 2) as u8).collect()
            }
        }
    }
}

/// Window probability in the `kappa, alpha, beta, gamma` form.
pub fn gcm_window_prob(params: &GcmParams, sigma: &[u8]) -> f64 {
    if sigma.is_empty() || !is_ergodic_window(sigma) {
        return 0.0;
    }
    let ell = sigma.len() as i32;
    let p = sigma.iter().filter(|&&b| b != 0).count() as i32;
    let ends = i32::from(sigma[0] != 0) + i32::from(sigma[sigma.len() - 1] != 0);
    params.kappa * params.alpha.powi(p) * params.beta.powi(ell) * params.gamma.powi(ends)
}

/// Window probability in the `(1 - rho)((1 - rho)/rho)^(...)` form.
pub fn gcm_window_prob_direct(params: &GcmParams, sigma: &[u8]) -> f64 {
    if sigma.is_empty() || !is_ergodic_window(sigma) {
        return 0.0;
    }
    let rho = params.rho;
    let ell = sigma.len() as i32;
    let p = sigma.iter().filter(|&&b| b != 0).count() as i32;
    let ends = i32::from(sigma[0] != 0) + i32::from(sigma[sigma.len() - 1] != 0);
    (1.0 - rho)
        * ((1.0 - rho) / rho).powi(ell - 1 - p)
        * ((2.0 * rho - 1.0) / rho).powi(2 * p - ell + 1 - ends)
}

/// Probability of `sigma` as a path of the two-state chain.
pub fn chain_product(params: &GcmParams, sigma: &[u8]) -> f64 {
    let Some(&first) = sigma.first() else {
        return 0.0;
    };
    let stay = params.stay();
    let mut prob = if first != 0 { params.rho } else { 1.0 - params.rho };
    for w in sigma.windows(2) {
        prob *= match (w[0] != 0, w[1] != 0) {
            (true, true) => stay,
            (true, false) => 1.0 - stay,
            (false, true) => 1.0,
            (false, false) => 0.0,
        };
    }
    prob
}

/// `P_l = pi_rho(xi(0) xi(l))`.
pub fn two_point(params: &GcmParams, ell: usize) -> f64 {
    let rho = params.rho;
    rho * rho + (2.0 * rho - 1.0 - rho * rho) * (1.0 - 1.0 / rho).powi(ell as i32 - 1)
}

/// `pi_rho(h) = F(rho)` for `rho` in `[1/2, 1]`.
pub fn gcm_h_mean(rho: f64) -> Result<f64> {
    if !(0.5..=1.0).contains(&rho) {
        return Err(FepError::Density {
            rho,
            range: "[1/2, 1]",
        });
    }
    Ok(f_of_rho(rho))
}

pub fn sample_gcm_window<R: Rng + ?Sized>(params: &GcmParams, ell: usize, rng: &mut R) -> Vec<u8> {
    let stay = params.stay();
    let mut out = Vec::with_capacity(ell);
    let mut cur = rng.gen::<f64>() < params.rho;
    for i in 0..ell {
        if i > 0 {
            cur = !cur || rng.gen::<f64>() < stay;
        }
        out.push(cur as u8);
    }
    out
}

/// Uniform sample from the configurations with `k` particles and isolated
/// holes, drawn site by site from exact conditional counts.
pub fn canonical_sample<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<ExclusionConfig> {
    if 2 * k <= n || k > n {
        return Err(FepError::ParticleCount {
            n,
            k,
            reason: "canonical sampling needs N/2 < k <= N",
        });
    }
    if k == n {
        return Ok(ExclusionConfig::full(n));
    }
    let mut prefix: Vec<u8> = Vec::with_capacity(n);
    if n <= 64 {
        for _ in 0..n {
            prefix.push(1);
            let with_one = count_with_window(n, k, &prefix)?;
            prefix.pop();
            prefix.push(0);
            let with_zero = if is_ergodic_window(&prefix) {
                count_with_window(n, k, &prefix)?
            } else {
                num_bigint::BigUint::from(0u8)
            };
            prefix.pop();
            let total = &with_one + &with_zero;
            let p1 = ratio(&with_one, &total);
            prefix.push((rng.gen::<f64>() < p1) as u8);
        }
    } else {
        for _ in 0..n {
            prefix.push(1);
            let l1 = ln_count_with_window(n, k, &prefix)?;
            prefix.pop();
            prefix.push(0);
            let l0 = if is_ergodic_window(&prefix) {
                ln_count_with_window(n, k, &prefix)?
            } else {
                f64::NEG_INFINITY
            };
            prefix.pop();
            let p1 = if l1 == f64::NEG_INFINITY {
                0.0
            } else {
                1.0 / (1.0 + (l0 - l1).exp())
            };
            prefix.push((rng.gen::<f64>() < p1) as u8);
        }
    }
    Ok(ExclusionConfig::from_bits(&prefix))
}

fn ratio(a: &num_bigint::BigUint, b: &num_bigint::BigUint) -> f64 {
    // shift both down so the conversion keeps full double precision
    let shift = b.bits().saturating_sub(60);
    let a = (a >> shift).to_f64().unwrap_or(0.0);
    let b = (b >> shift).to_f64().unwrap_or(1.0);
    a / b
}

/// Iterator over linear configurations on `n` sites with `j` particles and
/// no two adjacent holes: holes are placed in distinct gaps among the
/// `j + 1` gaps around the particles.
pub fn hyperplane_configs(n: usize, j: usize) -> impl Iterator<Item = Vec<u8>> {
    let m = n.saturating_sub(j);
    let gaps = j + 1;
    let feasible = j <= n && m <= gaps;
    let mut choice: Option<Vec<usize>> = if feasible { Some((0..m).collect()) } else { None };
    std::iter::from_fn(move || {
        let current = choice.take()?;
        let mut s = Vec::with_capacity(n);
        let mut next_hole = 0;
        for g in 0..gaps {
            if next_hole < m && current[next_hole] == g {
                s.push(0);
                next_hole += 1;
            }
            if g < j {
                s.push(1);
            }
        }
        // advance to the next m-subset of 0..gaps in lexicographic order
        let mut c = current;
        let mut i = m;
        while i > 0 {
            i -= 1;
            if c[i] < gaps - m + i {
                c[i] += 1;
                for t in i + 1..m {
                    c[t] = c[t - 1] + 1;
                }
                choice = Some(c);
                break;
            }
        }
        Some(s)
    })
}

/// Box `{-l, ..., l}` conditioned to hold `j` particles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionedWindow {
    pub ell: usize,
    pub j: usize,
}

impl ConditionedWindow {
    pub fn new(ell: usize, j: usize) -> Result<Self> {
        if j < ell || j > 2 * ell + 1 {
            return Err(FepError::Invalid(format!(
                "j = {j} outside {{{ell}, ..., {}}}",
                2 * ell + 1
            )));
        }
        Ok(Self { ell, j })
    }

    pub fn sites(&self) -> usize {
        2 * self.ell + 1
    }

    pub fn rho_ell(&self) -> f64 {
        self.j as f64 / self.sites() as f64
    }

    /// Whether `rho_ell` lies in `[1/2 + delta1, 1]`.
    pub fn in_margin(&self, delta1: f64) -> bool {
        self.rho_ell() >= 0.5 + delta1
    }
}

/// Exact conditioned measure on a box, held as its weighted support.
#[derive(Debug, Clone)]
pub struct ConditionedMeasure {
    pub window: ConditionedWindow,
    pub gamma: f64,
    support: Vec<(Vec<u8>, f64)>,
}

impl ConditionedMeasure {
    /// Weights `gamma^(s(-l) + s(l))` normalized over the hyperplane. Only
    /// `gamma` depends on `rho`, so `rho = 1` gives the uniform measure.
    pub fn new(window: ConditionedWindow, rho: f64) -> Result<Self> {
        let n = window.sites();
        if n > WINDOW_ENUMERATION_CAP {
            return Err(FepError::CapExceeded {
                n,
                cap: WINDOW_ENUMERATION_CAP,
            });
        }
        let gamma = if rho == 1.0 {
            1.0
        } else {
            GcmParams::new(rho)?.gamma
        };
        let mut support: Vec<(Vec<u8>, f64)> = hyperplane_configs(n, window.j)
            .map(|s| {
                let ends = i32::from(s[0]) + i32::from(s[n - 1]);
                let w = gamma.powi(ends);
                (s, w)
            })
            .collect();
        let z: f64 = support.iter().map(|(_, w)| w).sum();
        for (_, w) in &mut support {
            *w /= z;
        }
        Ok(Self {
            window,
            gamma,
            support,
        })
    }

    pub fn support(&self) -> &[(Vec<u8>, f64)] {
        &self.support
    }

    pub fn prob(&self, sigma: &[u8]) -> Result<f64> {
        let n = self.window.sites();
        let p = sigma.iter().filter(|&&b| b != 0).count();
        if sigma.len() != n || p != self.window.j || !is_ergodic_window(sigma) {
            return Err(FepError::Invalid("configuration off the hyperplane".into()));
        }
        Ok(self
            .support
            .iter()
            .find(|(s, _)| s.as_slice() == sigma)
            .map_or(0.0, |(_, w)| *w))
    }

    /// Expectation of `f` translated to box offset `x` (in `-l..=l`).
    pub fn expect(&self, f: LocalFn, x: isize) -> Result<f64> {
        let (lo, hi) = f.support();
        let l = self.window.ell as isize;
        if x + lo < -l || x + hi > l {
            return Err(FepError::Invalid(format!("offset {x} too close to the edge")));
        }
        let a = (x + lo + l) as usize;
        let b = (x + hi + l) as usize;
        Ok(self
            .support
            .iter()
            .map(|(s, w)| w * f.eval(&s[a..=b]))
            .sum())
    }
}

pub fn conditioned_window_prob(window: ConditionedWindow, rho: f64, sigma: &[u8]) -> Result<f64> {
    ConditionedMeasure::new(window, rho)?.prob(sigma)
}

/// Local functions used by the estimators, evaluated on their support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalFn {
    /// `eta(0)`
    Occupancy,
    /// `eta(-1)eta(0) + eta(0)eta(1) - eta(-1)eta(0)eta(1)`
    H,
}

impl LocalFn {
    /// Offsets `(lo, hi)` of the support relative to the origin.
    pub fn support(self) -> (isize, isize) {
        match self {
            LocalFn::Occupancy => (0, 0),
            LocalFn::H => (-1, 1),
        }
    }

    pub fn eval(self, s: &[u8]) -> f64 {
        match self {
            LocalFn::Occupancy => f64::from(s[0]),
            LocalFn::H => {
                let (a, b, c) = (s[0], s[1], s[2]);
                f64::from(a * b + b * c - a * b * c)
            }
        }
    }

    /// Expectation under the grand canonical measure by window summation.
    pub fn gcm_expect(self, gcm: &GrandCanonical) -> f64 {
        let (lo, hi) = self.support();
        let len = (hi - lo + 1) as usize;
        (0u32..1 << len)
            .map(|mask| {
                let s: Vec<u8> = (0..len).map(|i| ((mask >> i) & 1) as u8).collect();
                gcm.window_prob(&s) * self.eval(&s)
            })
            .sum()
    }
}

/// Translation-averaged grand canonical measure on the torus, restricted to
/// the ergodic component.
#[derive(Debug, Clone)]
pub struct PeriodicGcm {
    pub params: GcmParams,
    pub n: usize,
    mass: f64,
}

impl PeriodicGcm {
    pub fn new(params: GcmParams, n: usize) -> Result<Self> {
        let mass = ergodic_set_mass(params.rho, n)?;
        Ok(Self { params, n, mass })
    }

    /// Unnormalized translation average `nu_tilde(eta)`.
    pub fn nu_tilde(&self, eta: &ExclusionConfig) -> f64 {
        let n = eta.size();
        let bits = eta.bits();
        let mut window = vec![0u8; n];
        let mut total = 0.0;
        for x in 0..n {
            for (y, w) in window.iter_mut().enumerate() {
                *w = bits[(x + y) % n];
            }
            total += gcm_window_prob(&self.params, &window);
        }
        total / n as f64
    }

    pub fn ergodic_mass(&self) -> f64 {
        self.mass
    }
}

pub fn periodic_gcm_prob(pg: &PeriodicGcm, eta: &ExclusionConfig) -> Result<f64> {
    if eta.size() != pg.n {
        return Err(FepError::Invalid(format!(
            "configuration has {} sites, measure has {}",
            eta.size(),
            pg.n
        )));
    }
    let (n, k) = (eta.size(), eta.particle_count());
    let ergodic = k == n || (2 * k > n && eta.adjacent_hole_pairs() == 0);
    if !ergodic {
        return Ok(0.0);
    }
    Ok(pg.nu_tilde(eta) / pg.mass)
}

/// `nu_tilde(E_N)` by summation over the ergodic component. Each ergodic
/// class is translation invariant, so the translation average reduces to the
/// window probability of the configuration itself.
pub fn ergodic_set_mass(rho: f64, n: usize) -> Result<f64> {
    let params = GcmParams::new(rho)?;
    if n > TORUS_ENUMERATION_CAP {
        return Err(FepError::CapExceeded {
            n,
            cap: TORUS_ENUMERATION_CAP,
        });
    }
    let mut total = 0.0;
    for k in n / 2 + 1..n {
        for eta in enumerate_ergodic(n, k, TORUS_ENUMERATION_CAP)? {
            total += gcm_window_prob(&params, &eta.bits());
        }
    }
    total += gcm_window_prob(&params, &vec![1; n]);
    Ok(total)
}

/// Large-`N` limit `rho (2 - rho)` of [`ergodic_set_mass`].
pub fn ergodic_set_mass_limit(rho: f64) -> f64 {
    rho * (2.0 - rho)
}

/// Product measure with site marginals `rho0((x + 1) / N)` at index `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSampler {
    pub profile: ProfileSpec,
    pub n: usize,
    /// Accept profiles leaving `(1/2, 1]`.
    pub allow_subcritical: bool,
}

impl ProfileSampler {
    pub fn new(profile: ProfileSpec, n: usize) -> Result<Self> {
        profile.check_supercritical()?;
        Ok(Self {
            profile,
            n,
            allow_subcritical: false,
        })
    }

    /// Exploratory sampler with no range check beyond `[0, 1]`.
    pub fn unchecked(profile: ProfileSpec, n: usize) -> Result<Self> {
        if profile.min() < 0.0 || profile.max() > 1.0 {
            return Err(FepError::Density {
                rho: profile.min(),
                range: "[0, 1]",
            });
        }
        Ok(Self {
            profile,
            n,
            allow_subcritical: true,
        })
    }

    pub fn marginal(&self, x: usize) -> f64 {
        self.profile.eval((x + 1) as f64 / self.n as f64)
    }
}

pub fn sample_profile<R: Rng + ?Sized>(ps: &ProfileSampler, rng: &mut R) -> Result<ExclusionConfig> {
    if !ps.allow_subcritical {
        ps.profile.check_supercritical()?;
    }
    let mut c = ExclusionConfig::empty(ps.n);
    for x in 0..ps.n {
        if rng.gen::<f64>() < ps.marginal(x) {
            c.set(x, true);
        }
    }
    Ok(c)
}

/// `rho,l,P_l_closed,P_l_mc,stderr` with `samples` Monte Carlo windows per row.
pub fn two_point_table_csv<R: Rng + ?Sized>(
    params: &GcmParams,
    ells: &[usize],
    samples: usize,
    rng: &mut R,
) -> String {
    let mut out = String::from("rho,l,P_l_closed,P_l_mc,stderr\n");
    for &ell in ells {
        let (mean, se) = two_point_mc(params, ell, samples, rng);
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            params.rho,
            ell,
            two_point(params, ell),
            mean,
            se
        ));
    }
    out
}

/// Monte Carlo estimate of `P_l` with its standard error.
pub fn two_point_mc<R: Rng + ?Sized>(
    params: &GcmParams,
    ell: usize,
    samples: usize,
    rng: &mut R,
) -> (f64, f64) {
    let hits = (0..samples)
        .filter(|_| {
            let s = sample_gcm_window(params, ell + 1, rng);
            s[0] == 1 && s[ell] == 1
        })
        .count();
    let p = hits as f64 / samples as f64;
    (p, (p * (1.0 - p) / samples as f64).sqrt())
}

/// `N,k,sigma,prob`: exact window marginals of the uniform measure on the
/// configurations with `k` particles and isolated holes.
pub fn canonical_window_table_csv(n: usize, k: usize, ell: usize) -> Result<String> {
    let total = crate::lattice::count_hole_isolated(n, k)?;
    let mut out = String::from("N,k,sigma,prob\n");
    if ell == 0 || ell > n || ell > 20 {
        return Err(FepError::Invalid(format!("window length {ell} outside 1..=min(N, 20)")));
    }
    for mask in 0u32..1 << ell {
        let s: Vec<u8> = (0..ell).map(|i| ((mask >> i) & 1) as u8).collect();
        if !is_ergodic_window(&s) {
            continue;
        }
        let c = count_with_window(n, k, &s)?;
        let text: String = s.iter().map(|b| char::from(b'0' + b)).collect();
        out.push_str(&format!("{n},{k},{text},{}\n", ratio(&c, &total)));
    }
    Ok(out)
}

/// Hyperplane size `C(j + 1, n - j)`.
pub fn hyperplane_size(n: usize, j: usize) -> num_bigint::BigUint {
    binomial(j as i64 + 1, n as i64 - j as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::ReplicaSeed;

    fn p(rho: f64) -> GcmParams {
        GcmParams::new(rho).unwrap()
    }

    #[test]
    fn window_examples() {
        let g = p(0.75);
        assert!((gcm_window_prob(&g, &[1]) - 0.75).abs() < 1e-15);
        assert!((gcm_window_prob(&g, &[1, 1]) - 0.5).abs() < 1e-15);
        assert_eq!(gcm_window_prob(&g, &[0, 0]), 0.0);
        assert!((gcm_window_prob(&g, &[1, 0, 1]) - 0.25).abs() < 1e-15);
        assert!((g.kappa * g.gamma - 0.75).abs() < 1e-15);
        assert!(GcmParams::new(0.5).is_err());
        assert!(GcmParams::new(1.0).is_err());
    }

    #[test]
    fn two_point_examples() {
        let g = p(0.75);
        assert!((two_point(&g, 1) - 0.5).abs() < 1e-15);
        let direct = gcm_window_prob(&g, &[1, 1, 1]) + gcm_window_prob(&g, &[1, 0, 1]);
        assert!((two_point(&g, 2) - 7.0 / 12.0).abs() < 1e-15);
        assert!((direct - 7.0 / 12.0).abs() < 1e-15);
        assert!((two_point(&g, 60) - 0.5625).abs() < 1e-15);
    }

    #[test]
    fn h_mean() {
        assert!((gcm_h_mean(0.75).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(gcm_h_mean(0.5).unwrap(), 0.0);
        assert_eq!(gcm_h_mean(1.0).unwrap(), 1.0);
        let e = LocalFn::H.gcm_expect(&GrandCanonical::new(0.75).unwrap());
        assert!((e - 2.0 / 3.0).abs() < 1e-14);
        assert_eq!(LocalFn::H.gcm_expect(&GrandCanonical::Full), 1.0);
        assert_eq!(LocalFn::H.gcm_expect(&GrandCanonical::Alternating), 0.0);
    }

    #[test]
    fn sampler_never_has_adjacent_holes() {
        let mut rng = ReplicaSeed::new(1, 0).rng();
        let g = p(0.55);
        for _ in 0..1000 {
            assert!(is_ergodic_window(&sample_gcm_window(&g, 30, &mut rng)));
        }
    }

    #[test]
    fn canonical_sampler_edge_cases() {
        let mut rng = ReplicaSeed::new(2, 0).rng();
        assert_eq!(canonical_sample(4, 4, &mut rng).unwrap(), ExclusionConfig::full(4));
        assert!(canonical_sample(6, 3, &mut rng).is_err());
        for _ in 0..100 {
            let c = canonical_sample(200, 150, &mut rng).unwrap();
            assert_eq!(c.particle_count(), 150);
            assert_eq!(c.adjacent_hole_pairs(), 0);
            let c = canonical_sample(13, 8, &mut rng).unwrap();
            assert_eq!(c.particle_count(), 8);
            assert_eq!(c.adjacent_hole_pairs(), 0);
        }
    }

    #[test]
    fn hyperplane_enumeration() {
        for n in 1..=12usize {
            for j in 0..=n {
                let mut brute = 0u64;
                for mask in 0u32..1 << n {
                    let s: Vec<u8> = (0..n).map(|i| ((mask >> i) & 1) as u8).collect();
                    if s.iter().filter(|&&b| b == 1).count() == j && is_ergodic_window(&s) {
                        brute += 1;
                    }
                }
                let listed: Vec<Vec<u8>> = hyperplane_configs(n, j).collect();
                assert_eq!(listed.len() as u64, brute, "n={n} j={j}");
                assert_eq!(hyperplane_size(n, j), brute.into());
                assert!(listed.iter().all(|s| s.len() == n && is_ergodic_window(s)));
            }
        }
    }

    #[test]
    fn conditioned_examples() {
        let w = ConditionedWindow::new(1, 2).unwrap();
        let pr = conditioned_window_prob(w, 0.75, &[1, 0, 1]).unwrap();
        assert!((pr - 3.0 / 7.0).abs() < 1e-15);
        let w3 = ConditionedWindow::new(1, 3).unwrap();
        assert_eq!(conditioned_window_prob(w3, 0.75, &[1, 1, 1]).unwrap(), 1.0);
        assert!(conditioned_window_prob(w, 0.75, &[1, 1, 1]).is_err());
        assert!(conditioned_window_prob(w, 0.75, &[0, 0, 1]).is_err());
        let a = ConditionedMeasure::new(w, 0.6).unwrap();
        let b = ConditionedMeasure::new(w, 0.9).unwrap();
        let (a1, a2) = (a.prob(&[0, 1, 1]).unwrap(), a.prob(&[1, 1, 0]).unwrap());
        let (b1, b2) = (b.prob(&[0, 1, 1]).unwrap(), b.prob(&[1, 1, 0]).unwrap());
        assert!((a1 - b1).abs() > 1e-3);
        assert!((a1 / a2 - 1.0).abs() < 1e-15 && (b1 / b2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ergodic_mass_values() {
        assert_eq!(ergodic_set_mass_limit(0.75), 0.9375);
        let m = ergodic_set_mass(0.75, 20).unwrap();
        assert!((m - 0.9375).abs() < 1e-4);
        assert!(ergodic_set_mass(0.75, 25).is_err());
    }

    #[test]
    fn periodic_gcm_properties() {
        let pg = PeriodicGcm::new(p(0.7), 8).unwrap();
        let eta: ExclusionConfig = "11001111".parse().unwrap();
        assert_eq!(periodic_gcm_prob(&pg, &eta).unwrap(), 0.0);
        let eta: ExclusionConfig = "11011101".parse().unwrap();
        let base = periodic_gcm_prob(&pg, &eta).unwrap();
        for s in 0..8 {
            let r = periodic_gcm_prob(&pg, &eta.rotated(s)).unwrap();
            assert!((r - base).abs() < 1e-14);
        }
    }

    #[test]
    fn profile_sampler() {
        let mut rng = ReplicaSeed::new(3, 0).rng();
        let full = ProfileSampler::new(ProfileSpec::constant(1.0), 50).unwrap();
        assert_eq!(sample_profile(&full, &mut rng).unwrap(), ExclusionConfig::full(50));
        assert!(ProfileSampler::new(ProfileSpec::constant(0.5), 50).is_err());
        assert!(ProfileSampler::unchecked(ProfileSpec::constant(0.3), 50).is_ok());
        let s = ProfileSampler::new(ProfileSpec::constant(0.75), 10_000).unwrap();
        let k = sample_profile(&s, &mut rng).unwrap().particle_count() as f64;
        let sd = (10_000.0f64 * 0.75 * 0.25).sqrt();
        assert!((k - 7500.0).abs() < 3.0 * sd);
    }

    #[test]
    fn csv_headers() {
        let mut rng = ReplicaSeed::new(4, 0).rng();
        let t = two_point_table_csv(&p(0.75), &[1, 2], 100, &mut rng);
        assert!(t.starts_with("rho,l,P_l_closed,P_l_mc,stderr\n"));
        let c = canonical_window_table_csv(8, 5, 2).unwrap();
        assert!(c.starts_with("N,k,sigma,prob\n"));
        assert_eq!(c.lines().count(), 4);
    }
}
