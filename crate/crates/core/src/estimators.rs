//! Observables connecting simulations, exact measures and the PDE.
//!
//! Per-replica entry points (`transience_replica`, `hydro_replica`) are
//! sequential and deterministic in their seed; callers combine them in
//! replica order with the matching `*_from_replicas` reductions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{h_at, HittingTime, Simulator};
use crate::error::{FepError, Result};
use crate::fde::{solve_fde, DensityProfile, DtPolicy};
use crate::lattice::ExclusionConfig;
use crate::measures::{
    canonical_sample, f_of_rho, sample_gcm_window, ConditionedMeasure, ConditionedWindow,
    sample_profile, GrandCanonical, LocalFn, ProfileSampler,
};
use crate::profile::ProfileSpec;
use crate::rng::ReplicaSeed;
use crate::zr::{ex_to_zr, is_regular};

/// `N^-1 sum_x phi(x/N) eta(x)` with sites numbered `1..=N`.
pub fn empirical_pairing<F: Fn(f64) -> f64>(config: &ExclusionConfig, phi: F) -> f64 {
    let n = config.size();
    (0..n)
        .filter(|&i| config.get(i))
        .map(|i| phi((i + 1) as f64 / n as f64))
        .sum::<f64>()
        / n as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalProfile {
    pub ell: usize,
    /// Block density centered at each site index.
    pub values: Vec<f64>,
    pub t: f64,
}

impl EmpiricalProfile {
    /// Average of the site values over each of `m` cells; site index `i` sits
    /// at `(i + 1) / N` and belongs to cell `floor((i + 1) m / N) mod m`.
    pub fn coarse(&self, m: usize) -> Vec<f64> {
        coarse_grain(&self.values, m)
    }
}

pub(crate) fn coarse_grain(values: &[f64], m: usize) -> Vec<f64> {
    let n = values.len();
    let mut sum = vec![0.0; m];
    let mut count = vec![0usize; m];
    for (i, v) in values.iter().enumerate() {
        let c = ((i + 1) * m / n) % m;
        sum[c] += v;
        count[c] += 1;
    }
    sum.iter()
        .zip(&count)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { f64::NAN })
        .collect()
}

/// Circular moving average over `2 l + 1` sites.
pub fn block_profile(config: &ExclusionConfig, ell: usize) -> Result<EmpiricalProfile> {
    let n = config.size();
    if 2 * ell + 1 > n {
        return Err(FepError::WindowTooLarge { ell, k: n });
    }
    let bits = config.bits();
    let width = 2 * ell + 1;
    let mut s: i64 = (0..width)
        .map(|d| i64::from(bits[(n - ell + d) % n]))
        .sum();
    let mut values = Vec::with_capacity(n);
    for x in 0..n {
        values.push(s as f64 / width as f64);
        s += i64::from(bits[(x + ell + 1) % n]) - i64::from(bits[(x + n - ell) % n]);
    }
    Ok(EmpiricalProfile { ell, values, t: 0.0 })
}

/// `V_k = (2k+1)^-1 sum_{|y|<=k} h(tau_y eta) - F(rho^k(0))` evaluated on a
/// window of `2k + 3` sites centered at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplacementStat {
    pub k: usize,
    pub value: f64,
}

impl ReplacementStat {
    pub fn of_window(window: &[u8]) -> Result<Self> {
        if window.len() < 3 || window.len() % 2 == 0 {
            return Err(FepError::Invalid("window must have 2k + 3 sites".into()));
        }
        let k = (window.len() - 3) / 2;
        let width = (2 * k + 1) as f64;
        let h: f64 = (1..=2 * k + 1)
            .map(|c| LocalFn::H.eval(&window[c - 1..=c + 1]))
            .sum();
        let p: f64 = window[1..=2 * k + 1].iter().map(|&b| f64::from(b)).sum();
        Ok(Self {
            k,
            value: h / width - f_of_rho(p / width),
        })
    }

    /// Statistic centered at site `x` of a torus configuration.
    pub fn on_torus(config: &ExclusionConfig, x: usize, k: usize) -> Result<Self> {
        let n = config.size();
        if 2 * k + 3 > n {
            return Err(FepError::WindowTooLarge { ell: k, k: n });
        }
        let w: Vec<u8> = (0..2 * k + 3)
            .map(|d| config.at(x as isize - k as isize - 1 + d as isize))
            .collect();
        Self::of_window(&w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReplacementSampler {
    GrandCanonical { rho: f64 },
    Canonical { n: usize, particles: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplacementSummary {
    pub k: usize,
    pub mean_abs: f64,
    pub stderr: f64,
    pub replicas: usize,
}

/// Monte Carlo estimate of `E|V_k|` for each `k`.
pub fn replacement_scan<R: Rng + ?Sized>(
    sampler: ReplacementSampler,
    ks: &[usize],
    replicas: usize,
    rng: &mut R,
) -> Result<Vec<ReplacementSummary>> {
    let gcm = match sampler {
        ReplacementSampler::GrandCanonical { rho } => Some(GrandCanonical::new(rho)?),
        ReplacementSampler::Canonical { n, particles } => {
            if 2 * particles <= n {
                return Err(FepError::ParticleCount {
                    n,
                    k: particles,
                    reason: "replacement scan needs k > N/2",
                });
            }
            None
        }
    };
    let mut out = Vec::with_capacity(ks.len());
    for &k in ks {
        let mut s = 0.0;
        let mut s2 = 0.0;
        for _ in 0..replicas {
            let v = match (sampler, gcm) {
                (ReplacementSampler::GrandCanonical { .. }, Some(g)) => {
                    let w = match g {
                        GrandCanonical::Regular(p) => sample_gcm_window(&p, 2 * k + 3, rng),
                        other => other.sample_window(2 * k + 3, rng),
                    };
                    ReplacementStat::of_window(&w)?.value
                }
                (ReplacementSampler::Canonical { n, particles }, _) => {
                    let c = canonical_sample(n, particles, rng)?;
                    ReplacementStat::on_torus(&c, 0, k)?.value
                }
                _ => unreachable!(),
            };
            s += v.abs();
            s2 += v * v;
        }
        let r = replicas as f64;
        let mean = s / r;
        let var = (s2 / r - mean * mean).max(0.0);
        out.push(ReplacementSummary {
            k,
            mean_abs: mean,
            stderr: (var / r).sqrt(),
            replicas,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsemblesGap {
    pub ell: usize,
    pub j: usize,
    pub rho_ell: f64,
    /// `(x, |conditioned(tau_x f) - gcm(f)|)` over the inner box.
    pub per_x: Vec<(isize, f64)>,
    pub max_gap: f64,
}

/// Exact gap between the conditioned box measure and the grand canonical
/// measure at the box density, over `|x| <= (1 - delta) l`. The conditioned
/// weights use `rho_weights`, or the box density itself when `None`.
pub fn ensembles_gap(
    ell: usize,
    j: usize,
    f: LocalFn,
    delta: f64,
    rho_weights: Option<f64>,
) -> Result<EnsemblesGap> {
    let window = ConditionedWindow::new(ell, j)?;
    let rho_ell = window.rho_ell();
    let measure = ConditionedMeasure::new(window, rho_weights.unwrap_or(rho_ell))?;
    let target = f.gcm_expect(&GrandCanonical::new(rho_ell)?);
    let (lo, hi) = f.support();
    let reach = ((1.0 - delta) * ell as f64 + 1e-9).floor() as isize;
    let l = ell as isize;
    let mut per_x = Vec::new();
    for x in -reach..=reach {
        if x + lo < -l || x + hi > l {
            continue;
        }
        per_x.push((x, (measure.expect(f, x)? - target).abs()));
    }
    let max_gap = per_x.iter().map(|&(_, g)| g).fold(0.0, f64::max);
    Ok(EnsemblesGap {
        ell,
        j,
        rho_ell,
        per_x,
        max_gap,
    })
}

/// `(log N)^8`, the regularity window of the asymptotic statement.
pub fn literal_regularity_window(n: usize) -> f64 {
    (n as f64).ln().powi(8)
}

/// Desk-scale regularity window `floor((ln N)^3 / 2)`.
pub fn desk_regularity_window(n: usize) -> usize {
    ((n as f64).ln().powi(3) / 2.0).floor() as usize
}

/// Constructive `delta` for a profile. Take `r` halfway into
/// `(1/2, min(2/3, min rho0))` and `q = r / (1 - r)`; the admissible range is
/// `1 + delta < q < (1 + delta)(1 + delta / 2)` and we return its midpoint.
pub fn default_regularity_delta(profile: &ProfileSpec) -> f64 {
    let r = 0.5 + 0.5 * (profile.min().min(2.0 / 3.0) - 0.5);
    let q = r / (1.0 - r);
    let hi = q - 1.0;
    let lo = -1.5 + (2.25 + 2.0 * (q - 1.0)).sqrt();
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransienceSettings {
    /// Horizon in macroscopic time.
    pub t_max: f64,
    pub delta: f64,
    /// Regularity window; `None` selects the desk-scale rule per `N`.
    pub ell_reg: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransienceSample {
    pub n: usize,
    pub replica: u64,
    pub particles: usize,
    pub zr_sites: usize,
    /// Macroscopic hitting time of the ergodic component, if reached.
    pub tau: Option<f64>,
    pub never_reachable: bool,
    pub ell_reg: usize,
    pub regular: bool,
    /// `K > (log N)^8`.
    pub exceeds_literal_window: bool,
}

pub fn transience_replica(
    n: usize,
    profile: &ProfileSpec,
    settings: &TransienceSettings,
    seed: ReplicaSeed,
) -> Result<TransienceSample> {
    let mut rng = seed.rng();
    let sampler = ProfileSampler::new(profile.clone(), n)?;
    let eta = sample_profile(&sampler, &mut rng)?;
    let ell = settings.ell_reg.unwrap_or_else(|| desk_regularity_window(n));
    let (zr_sites, regular) = match ex_to_zr(&eta) {
        Ok(zr) => {
            let k = zr.sites();
            (k, k > ell && is_regular(&zr, ell, settings.delta)?)
        }
        Err(_) => (0, false),
    };
    let particles = eta.particle_count();
    let n2 = (n * n) as f64;
    let mut sim = Simulator::new(eta);
    let hit = sim.run_until_ergodic(&mut rng, settings.t_max * n2);
    Ok(TransienceSample {
        n,
        replica: seed.replica,
        particles,
        zr_sites,
        tau: match hit {
            HittingTime::Reached(t) => Some(t / n2),
            _ => None,
        },
        never_reachable: hit == HittingTime::NeverReachable,
        ell_reg: ell,
        regular,
        exceeds_literal_window: zr_sites as f64 > literal_regularity_window(n),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransienceRow {
    pub n: usize,
    pub replicas: usize,
    pub reached: usize,
    pub never_reachable: usize,
    /// Quantiles of tau over all replicas, counting unreached runs as `+inf`.
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub regular_fraction: f64,
    pub literal_window_fraction: f64,
    pub ell_reg: usize,
    pub ell_literal: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransienceReport {
    pub rows: Vec<TransienceRow>,
    pub samples: Vec<TransienceSample>,
}

impl TransienceReport {
    pub fn medians_strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].median < w[0].median)
    }

    pub fn regular_fraction_non_decreasing(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].regular_fraction >= w[0].regular_fraction)
    }

    /// `n,replica,particles,zr_sites,tau,regular` for one lattice size.
    pub fn samples_csv(&self, n: usize) -> String {
        let mut out = String::from("n,replica,particles,zr_sites,tau,regular\n");
        for s in self.samples.iter().filter(|s| s.n == n) {
            let tau = s.tau.map_or_else(|| "inf".to_string(), |t| t.to_string());
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                s.n, s.replica, s.particles, s.zr_sites, tau, s.regular
            ));
        }
        out
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (i, w) = (pos.floor() as usize, pos - pos.floor());
    if i + 1 < sorted.len() {
        let (a, b) = (sorted[i], sorted[i + 1]);
        if w == 0.0 {
            a
        } else {
            a + w * (b - a)
        }
    } else {
        sorted[i]
    }
}

/// Reduce per-replica samples (grouped by `N`, in the given order).
pub fn transience_from_replicas(
    ns: &[usize],
    settings: &TransienceSettings,
    samples: Vec<TransienceSample>,
) -> TransienceReport {
    let rows = ns
        .iter()
        .map(|&n| {
            let group: Vec<&TransienceSample> = samples.iter().filter(|s| s.n == n).collect();
            let mut taus: Vec<f64> = group
                .iter()
                .map(|s| s.tau.unwrap_or(f64::INFINITY))
                .collect();
            taus.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
            let r = group.len().max(1) as f64;
            TransienceRow {
                n,
                replicas: group.len(),
                reached: group.iter().filter(|s| s.tau.is_some()).count(),
                never_reachable: group.iter().filter(|s| s.never_reachable).count(),
                median: quantile(&taus, 0.5),
                q25: quantile(&taus, 0.25),
                q75: quantile(&taus, 0.75),
                regular_fraction: group.iter().filter(|s| s.regular).count() as f64 / r,
                literal_window_fraction: group
                    .iter()
                    .filter(|s| s.exceeds_literal_window && s.regular)
                    .count() as f64
                    / r,
                ell_reg: settings
                    .ell_reg
                    .unwrap_or_else(|| desk_regularity_window(n)),
                ell_literal: literal_regularity_window(n),
                delta: settings.delta,
            }
        })
        .collect();
    TransienceReport { rows, samples }
}

/// Sequential scan; replica `r` of the `i`-th size uses
/// `ReplicaSeed::nested(master, i, r)`.
pub fn transience_scan(
    ns: &[usize],
    profile: &ProfileSpec,
    replicas: usize,
    settings: &TransienceSettings,
    master_seed: u64,
) -> Result<TransienceReport> {
    let mut samples = Vec::new();
    for (i, &n) in ns.iter().enumerate() {
        for r in 0..replicas {
            let seed = ReplicaSeed::nested(master_seed, i as u32, r as u32);
            samples.push(transience_replica(n, profile, settings, seed)?);
        }
    }
    Ok(transience_from_replicas(ns, settings, samples))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HydroSettings {
    pub n: usize,
    /// Macroscopic time.
    pub t: f64,
    pub ell: usize,
    pub m: usize,
}

impl HydroSettings {
    /// Default block half-width `floor(sqrt N)`.
    pub fn default_ell(n: usize) -> usize {
        (n as f64).sqrt().floor() as usize
    }
}

/// One replica: sample from the product measure, run to time `t`, return
/// the coarse-grained block profile on `m` cells.
pub fn hydro_replica(profile: &ProfileSpec, s: &HydroSettings, seed: ReplicaSeed) -> Result<Vec<f64>> {
    if s.m == 0 || s.m > s.n {
        return Err(FepError::Invalid(format!("grid M = {} must lie in 1..=N", s.m)));
    }
    let mut rng = seed.rng();
    let sampler = ProfileSampler::new(profile.clone(), s.n)?;
    let eta = sample_profile(&sampler, &mut rng)?;
    let mut sim = Simulator::new(eta);
    let horizon = s.t * (s.n * s.n) as f64;
    sim.advance_to(&mut rng, horizon, |_, _| {});
    let mut bp = block_profile(sim.config(), s.ell)?;
    bp.t = s.t;
    Ok(bp.coarse(s.m))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HydroRow {
    pub u: f64,
    pub rho_emp: f64,
    pub rho_pde: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydroComparison {
    pub settings: HydroSettings,
    pub replicas: usize,
    pub l1: f64,
    pub table: Vec<HydroRow>,
}

impl HydroComparison {
    pub fn table_csv(&self) -> String {
        let mut out = String::from("u,rho_emp,rho_pde\n");
        for r in &self.table {
            out.push_str(&format!("{},{},{}\n", r.u, r.rho_emp, r.rho_pde));
        }
        out
    }
}

/// Average replica profiles (in order) and compare with the PDE solution.
pub fn hydro_from_replicas(
    profile: &ProfileSpec,
    s: &HydroSettings,
    replicas: &[Vec<f64>],
) -> Result<HydroComparison> {
    if replicas.is_empty() {
        return Err(FepError::Invalid("no replicas".into()));
    }
    let mut mean = vec![0.0; s.m];
    for r in replicas {
        for (a, b) in mean.iter_mut().zip(r) {
            *a += b;
        }
    }
    for a in &mut mean {
        *a /= replicas.len() as f64;
    }
    let initial = DensityProfile::from_spec(profile, s.m)?;
    let pde = if s.t > 0.0 {
        solve_fde(&initial, s.t, DtPolicy::default())?
    } else {
        initial
    };
    let table: Vec<HydroRow> = pde
        .centers()
        .zip(pde.cells.iter().zip(&mean))
        .map(|(u, (&p, &e))| HydroRow {
            u,
            rho_emp: e,
            rho_pde: p,
        })
        .collect();
    let l1 = table.iter().map(|r| (r.rho_emp - r.rho_pde).abs()).sum::<f64>() / s.m as f64;
    Ok(HydroComparison {
        settings: *s,
        replicas: replicas.len(),
        l1,
        table,
    })
}

/// Sequential comparison; replica `r` uses `ReplicaSeed::new(master, r)`.
pub fn hydro_compare(
    profile: &ProfileSpec,
    s: &HydroSettings,
    replicas: usize,
    master_seed: u64,
) -> Result<HydroComparison> {
    profile.check_supercritical()?;
    let runs = (0..replicas as u64)
        .map(|r| hydro_replica(profile, s, ReplicaSeed::new(master_seed, r)))
        .collect::<Result<Vec<_>>>()?;
    hydro_from_replicas(profile, s, &runs)
}

/// Block average of `h` over `2 l + 1` sites centered at `x`.
pub fn block_h(config: &ExclusionConfig, x: usize, ell: usize) -> f64 {
    let n = config.size();
    (0..2 * ell + 1)
        .map(|d| f64::from(h_at(config, (x + n - ell + d) % n)))
        .sum::<f64>()
        / (2 * ell + 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairing_examples() {
        let c: ExclusionConfig = "1101101".parse().unwrap();
        assert!((empirical_pairing(&c, |_| 1.0) - 5.0 / 7.0).abs() < 1e-15);
        let full = ExclusionConfig::full(8);
        let expect: f64 = (1..=8).map(|x| (x as f64 / 8.0).powi(2)).sum::<f64>() / 8.0;
        assert!((empirical_pairing(&full, |u| u * u) - expect).abs() < 1e-15);
    }

    #[test]
    fn block_profile_examples() {
        let c: ExclusionConfig = "11011".parse().unwrap();
        let b = block_profile(&c, 1).unwrap();
        let third = 2.0 / 3.0;
        let want = [1.0, third, third, third, 1.0];
        for (a, w) in b.values.iter().zip(want) {
            assert!((a - w).abs() < 1e-15);
        }
        assert!(block_profile(&c, 3).is_err());
        let full = block_profile(&ExclusionConfig::full(9), 2).unwrap();
        assert!(full.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn block_profile_is_rotation_covariant() {
        let c: ExclusionConfig = "1101110101111011".parse().unwrap();
        let b = block_profile(&c, 2).unwrap().values;
        for s in 0..16isize {
            let r = block_profile(&c.rotated(s), 2).unwrap().values;
            for x in 0..16usize {
                let src = (x as isize + s).rem_euclid(16) as usize;
                assert_eq!(r[x], b[src]);
            }
        }
    }

    #[test]
    fn replacement_full_is_zero() {
        let w = vec![1u8; 11];
        assert_eq!(ReplacementStat::of_window(&w).unwrap().value, 0.0);
        let mut rng = ReplicaSeed::new(1, 0).rng();
        let s = replacement_scan(ReplacementSampler::GrandCanonical { rho: 1.0 }, &[4], 10, &mut rng)
            .unwrap();
        assert_eq!(s[0].mean_abs, 0.0);
    }

    #[test]
    fn ensembles_gap_full_box_is_zero() {
        let g = ensembles_gap(5, 11, LocalFn::Occupancy, 0.5, None).unwrap();
        assert_eq!(g.max_gap, 0.0);
        let g = ensembles_gap(5, 11, LocalFn::H, 0.5, Some(0.75)).unwrap();
        assert_eq!(g.max_gap, 0.0);
    }

    #[test]
    fn coarse_graining() {
        let v: Vec<f64> = (0..8).map(|i| i as f64).collect();
        // sites at (i+1)/8: cell 0 gets i = 7 (u = 1 wraps) and 0..=2
        assert_eq!(coarse_grain(&v, 2), vec![(7.0 + 0.0 + 1.0 + 2.0) / 4.0, 4.5]);
    }

    #[test]
    fn delta_default() {
        for spec in [ProfileSpec::sinusoid(0.75, 0.15), ProfileSpec::constant(0.9), ProfileSpec::constant(1.0)] {
            let d = default_regularity_delta(&spec);
            let r = 0.5 + 0.5 * (spec.min().min(2.0 / 3.0) - 0.5);
            let q = r / (1.0 - r);
            assert!(d > 0.0 && d < 1.0);
            assert!(1.0 + d < q && q < (1.0 + d) * (1.0 + d / 2.0));
        }
        let d = default_regularity_delta(&ProfileSpec::sinusoid(0.75, 0.15));
        assert!((d - 0.18185).abs() < 1e-4);
    }
}
