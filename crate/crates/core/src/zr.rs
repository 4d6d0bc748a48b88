//! Zero-range picture of the facilitated exclusion process.
//!
//! Empty sites of an exclusion configuration become the sites of a zero-range
//! torus, and the particles sitting between consecutive empty sites become the
//! pile on the left one. In this picture the exclusion dynamics is a zero-range
//! process in which every pile of height at least two sends one particle to
//! each neighbor at rate 1.
//!
//! The second half of the module deals with the processes on a segment
//! `{0, ..., l+1}` with absorbing end cells used to control transience times:
//! the stopped zero-range process (SZR), the fast zero-range process (FZR), the
//! independent random walks (IRW), and the two couplings between them.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Direction, Move};
use crate::error::{FepError, Result};
use crate::indexed::IndexedSet;
use crate::lattice::{ClassLabel, ExclusionConfig};
use crate::rng::exponential;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZrGeometry {
    /// Periodic lattice of `K` sites.
    Torus,
    /// Cells `0..=l+1`; the two end cells absorb.
    Segment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZrConfig {
    geometry: ZrGeometry,
    piles: Vec<u32>,
    total: u64,
}

impl ZrConfig {
    pub fn torus(piles: Vec<u32>) -> Result<Self> {
        if piles.is_empty() {
            return Err(FepError::Invalid("torus needs at least one site".into()));
        }
        let total = piles.iter().map(|&p| u64::from(p)).sum();
        Ok(Self {
            geometry: ZrGeometry::Torus,
            piles,
            total,
        })
    }

    /// Segment with the given interior piles `1..=l` and empty end cells.
    pub fn segment(interior: &[u32]) -> Result<Self> {
        if interior.is_empty() {
            return Err(FepError::Invalid("segment needs l >= 1".into()));
        }
        let mut piles = Vec::with_capacity(interior.len() + 2);
        piles.push(0);
        piles.extend_from_slice(interior);
        piles.push(0);
        Self::segment_with_ends(piles)
    }

    /// Segment given by all cells `0..=l+1`, end cells included.
    pub fn segment_with_ends(piles: Vec<u32>) -> Result<Self> {
        if piles.len() < 3 {
            return Err(FepError::Invalid("segment needs l >= 1".into()));
        }
        let total = piles.iter().map(|&p| u64::from(p)).sum();
        Ok(Self {
            geometry: ZrGeometry::Segment,
            piles,
            total,
        })
    }

    pub fn geometry(&self) -> ZrGeometry {
        self.geometry
    }

    /// Number of torus sites, or number of interior cells `l` of a segment.
    pub fn sites(&self) -> usize {
        match self.geometry {
            ZrGeometry::Torus => self.piles.len(),
            ZrGeometry::Segment => self.piles.len() - 2,
        }
    }

    pub fn piles(&self) -> &[u32] {
        &self.piles
    }

    pub fn total_particles(&self) -> u64 {
        self.total
    }

    pub fn get(&self, x: usize) -> u32 {
        self.piles[x]
    }

    /// Interior piles of a segment (all piles of a torus).
    pub fn interior(&self) -> &[u32] {
        match self.geometry {
            ZrGeometry::Torus => &self.piles,
            ZrGeometry::Segment => &self.piles[1..self.piles.len() - 1],
        }
    }

    /// Move one particle from pile `x` to `x + dir` (wrapping on the torus).
    pub fn apply_move(&mut self, x: usize, dir: Direction) -> Result<()> {
        if self.piles[x] == 0 {
            return Err(FepError::Invalid(format!("pile {x} is empty")));
        }
        let n = self.piles.len() as isize;
        let target = x as isize + dir.offset();
        let target = match self.geometry {
            ZrGeometry::Torus => target.rem_euclid(n) as usize,
            ZrGeometry::Segment => {
                if target < 0 || target >= n {
                    return Err(FepError::Invalid(format!("move out of segment from {x}")));
                }
                target as usize
            }
        };
        self.piles[x] -= 1;
        self.piles[target] += 1;
        Ok(())
    }
}

impl fmt::Display for ZrConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.piles.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

/// Parses a torus configuration.
impl FromStr for ZrConfig {
    type Err = FepError;

    fn from_str(s: &str) -> Result<Self> {
        let piles = s
            .trim()
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<u32>()
                    .map_err(|_| FepError::Parse(format!("bad pile height {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        ZrConfig::torus(piles)
    }
}

/// Index of the first empty site at or to the left of site 1 (index 0).
pub fn label_one_hole(config: &ExclusionConfig) -> Option<usize> {
    let n = config.size();
    if config.hole_count() == 0 {
        return None;
    }
    (0..n).map(|d| (n - d) % n).find(|&x| !config.get(x))
}

pub fn ex_to_zr(config: &ExclusionConfig) -> Result<ZrConfig> {
    let anchor = label_one_hole(config).ok_or(FepError::FullConfiguration)?;
    ex_to_zr_anchored(config, anchor)
}

/// Map with the empty site at `anchor` carrying label 1.
pub fn ex_to_zr_anchored(config: &ExclusionConfig, anchor: usize) -> Result<ZrConfig> {
    let n = config.size();
    if config.hole_count() == 0 {
        return Err(FepError::FullConfiguration);
    }
    if anchor >= n || config.get(anchor) {
        return Err(FepError::Invalid(format!("site {anchor} is not empty")));
    }
    let mut piles = Vec::with_capacity(config.hole_count());
    for d in 0..n {
        let x = (anchor + d) % n;
        if config.get(x) {
            *piles.last_mut().expect("anchor is a hole") += 1;
        } else {
            piles.push(0);
        }
    }
    ZrConfig::torus(piles)
}

/// Follows the labeled empty site along an exclusion trajectory and converts
/// each particle jump into the corresponding pile move.
#[derive(Debug, Clone)]
pub struct TrackedZrMap {
    anchor: usize,
}

impl TrackedZrMap {
    pub fn new(config: &ExclusionConfig) -> Result<Self> {
        Ok(Self {
            anchor: label_one_hole(config).ok_or(FepError::FullConfiguration)?,
        })
    }

    pub fn anchor(&self) -> usize {
        self.anchor
    }

    pub fn current(&self, config: &ExclusionConfig) -> Result<ZrConfig> {
        ex_to_zr_anchored(config, self.anchor)
    }

    /// Pile move induced by `mv`, which must be legal in `before`. Updates the
    /// label position when the labeled hole is the one exchanged.
    pub fn induced_move(&mut self, before: &ExclusionConfig, mv: Move) -> (usize, Direction) {
        let n = before.size();
        // pile index of the particle: number of holes in [anchor, site) minus one
        let mut holes = 0usize;
        let mut x = self.anchor;
        while x != mv.site {
            if !before.get(x) {
                holes += 1;
            }
            x = (x + 1) % n;
        }
        if mv.target(n) == self.anchor {
            self.anchor = mv.site;
        }
        (holes - 1, mv.dir)
    }
}

fn active_sites(zr: &ZrConfig) -> Vec<usize> {
    zr.piles
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= 2)
        .map(|(x, _)| x)
        .collect()
}

/// One jump of the zero-range dynamics on a torus; returns the moved pile,
/// direction and waiting time.
pub fn zr_step<R: Rng + ?Sized>(zr: &mut ZrConfig, rng: &mut R) -> Result<(usize, Direction, f64)> {
    if zr.geometry != ZrGeometry::Torus {
        return Err(FepError::Invalid("zr_step acts on a torus".into()));
    }
    let active = active_sites(zr);
    if active.is_empty() {
        return Err(FepError::Frozen);
    }
    let dt = exponential(rng, 2.0 * active.len() as f64);
    let x = active[rng.gen_range(0..active.len())];
    let dir = if rng.gen::<bool>() {
        Direction::Right
    } else {
        Direction::Left
    };
    zr.apply_move(x, dir)?;
    Ok((x, dir, dt))
}

pub fn classify_zr(zr: &ZrConfig) -> ClassLabel {
    let piles = zr.interior();
    let k = zr.total_particles();
    let big_k = piles.len() as u64;
    if piles.iter().all(|&p| p <= 1) {
        ClassLabel::Blocked
    } else if k > big_k {
        if piles.iter().all(|&p| p >= 1) {
            ClassLabel::Ergodic
        } else {
            ClassLabel::TransientGood
        }
    } else {
        ClassLabel::TransientBad
    }
}

pub fn classification_commutes(config: &ExclusionConfig) -> Result<bool> {
    let zr = ex_to_zr(config)?;
    Ok(crate::lattice::classify(config) == classify_zr(&zr))
}

/// `floor((1 + delta) * l)`, the particle budget of a regular window.
pub fn window_capacity(ell: usize, delta: f64) -> usize {
    ((1.0 + delta) * ell as f64 + 1e-9).floor() as usize
}

/// Upper bound on the weighted position sum in `A_l(delta)`.
pub fn z_bound(ell: usize, delta: f64) -> f64 {
    (1.0 + delta / 2.0) * window_capacity(ell, delta) as f64 * (ell as f64 + 1.0) / 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityStats {
    pub ell: usize,
    pub delta: f64,
    pub n_ell: u64,
    pub z_ell: u64,
    /// Truncated window as cells `0..=l+1`.
    pub window: Vec<u32>,
}

impl RegularityStats {
    /// Statistics of a segment configuration (cells `0..=l+1`).
    pub fn of_segment(seg: &ZrConfig, delta: f64) -> Result<Self> {
        if seg.geometry != ZrGeometry::Segment {
            return Err(FepError::Invalid("expected a segment".into()));
        }
        let ell = seg.sites();
        let (n_ell, z_ell) = moments(seg.interior());
        Ok(Self {
            ell,
            delta,
            n_ell,
            z_ell,
            window: seg.piles.clone(),
        })
    }

    /// Truncated window of length `l` to the right of torus site `x`.
    pub fn of_window(zr: &ZrConfig, x: usize, ell: usize, delta: f64) -> Result<Self> {
        let k = zr.sites();
        if zr.geometry != ZrGeometry::Torus {
            return Err(FepError::Invalid("expected a torus".into()));
        }
        if ell >= k {
            return Err(FepError::WindowTooLarge { ell, k });
        }
        let mut budget = window_capacity(ell, delta) as u64;
        let mut window = vec![0u32; ell + 2];
        for y in 1..=ell {
            let take = u64::from(zr.piles[(x + y) % k]).min(budget);
            window[y] = take as u32;
            budget -= take;
        }
        let (n_ell, z_ell) = moments(&window[1..=ell]);
        Ok(Self {
            ell,
            delta,
            n_ell,
            z_ell,
            window,
        })
    }

    pub fn in_regular_set(&self) -> bool {
        let last = self.window.len() - 1;
        self.window[0] == 0
            && self.window[last] == 0
            && self.n_ell == window_capacity(self.ell, self.delta) as u64
            && self.z_ell as f64 <= z_bound(self.ell, self.delta) + 1e-9
    }
}

fn moments(interior: &[u32]) -> (u64, u64) {
    interior.iter().enumerate().fold((0, 0), |(n, z), (i, &p)| {
        (n + u64::from(p), z + (i as u64 + 1) * u64::from(p))
    })
}

/// Membership of a segment configuration in `A_l(delta)`.
pub fn in_a_ell(seg: &ZrConfig, delta: f64) -> Result<bool> {
    Ok(RegularityStats::of_segment(seg, delta)?.in_regular_set())
}

/// Whether every truncated window of length `l` lies in `A_l(delta)`.
pub fn is_regular(zr: &ZrConfig, ell: usize, delta: f64) -> Result<bool> {
    let k = zr.sites();
    if ell >= k {
        return Err(FepError::WindowTooLarge { ell, k });
    }
    for x in 0..k {
        if !RegularityStats::of_window(zr, x, ell, delta)?.in_regular_set() {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AuxProcessKind {
    Szr,
    Fzr,
    Irw { delta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxOutcome {
    pub stop_time: f64,
    pub final_config: ZrConfig,
    pub jumps: u64,
}

fn coin<R: Rng + ?Sized>(rng: &mut R) -> isize {
    if rng.gen::<bool>() {
        1
    } else {
        -1
    }
}

fn require_segment(zr: &ZrConfig) -> Result<()> {
    if zr.geometry != ZrGeometry::Segment {
        return Err(FepError::Invalid("auxiliary processes live on a segment".into()));
    }
    Ok(())
}

/// Run one auxiliary process until its stopping condition.
pub fn simulate_aux<R: Rng + ?Sized>(
    kind: AuxProcessKind,
    initial: &ZrConfig,
    rng: &mut R,
) -> Result<AuxOutcome> {
    require_segment(initial)?;
    match kind {
        AuxProcessKind::Szr => Ok(run_pile_process(initial, 2, rng)),
        AuxProcessKind::Fzr => Ok(run_pile_process(initial, 1, rng)),
        AuxProcessKind::Irw { delta } => run_irw(initial, delta, rng),
    }
}

/// Piles with at least `threshold` particles jump at rate 1 per direction.
fn run_pile_process<R: Rng + ?Sized>(initial: &ZrConfig, threshold: u32, rng: &mut R) -> AuxOutcome {
    let mut piles = initial.piles.clone();
    let last = piles.len() - 1;
    let mut active = IndexedSet::with_universe(piles.len());
    for y in 1..last {
        active.set(y, piles[y] >= threshold);
    }
    let (mut t, mut jumps) = (0.0, 0u64);
    while !active.is_empty() {
        t += exponential(rng, 2.0 * active.len() as f64);
        let y = active.get(rng.gen_range(0..active.len()));
        let z = (y as isize + coin(rng)) as usize;
        piles[y] -= 1;
        piles[z] += 1;
        jumps += 1;
        active.set(y, piles[y] >= threshold);
        if z != 0 && z != last {
            active.set(z, piles[z] >= threshold);
        }
    }
    AuxOutcome {
        stop_time: t,
        final_config: ZrConfig {
            geometry: ZrGeometry::Segment,
            piles,
            total: initial.total,
        },
        jumps,
    }
}

fn run_irw<R: Rng + ?Sized>(initial: &ZrConfig, delta: f64, rng: &mut R) -> Result<AuxOutcome> {
    let cap = window_capacity(initial.sites(), delta);
    if cap == 0 {
        return Err(FepError::Invalid("IRW rate needs floor((1+delta)l) >= 1".into()));
    }
    let mut piles = initial.piles.clone();
    let last = piles.len() - 1;
    let mut walkers: Vec<usize> = (1..last)
        .flat_map(|y| std::iter::repeat(y).take(piles[y] as usize))
        .collect();
    let per_particle = 2.0 / cap as f64;
    let (mut t, mut jumps) = (0.0, 0u64);
    while !walkers.is_empty() {
        t += exponential(rng, per_particle * walkers.len() as f64);
        let i = rng.gen_range(0..walkers.len());
        let y = walkers[i];
        let z = (y as isize + coin(rng)) as usize;
        piles[y] -= 1;
        piles[z] += 1;
        jumps += 1;
        if z == 0 || z == last {
            walkers.swap_remove(i);
        } else {
            walkers[i] = z;
        }
    }
    Ok(AuxOutcome {
        stop_time: t,
        final_config: ZrConfig {
            geometry: ZrGeometry::Segment,
            piles,
            total: initial.total,
        },
        jumps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingRecord {
    pub event_index: u64,
    pub t_chi: f64,
    pub t_zeta: f64,
    pub invariant_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoColorRun {
    pub t_chi: f64,
    pub t_zeta: f64,
    pub jumps_chi: u64,
    pub jumps_zeta: u64,
    pub final_chi: ZrConfig,
    pub final_zeta: ZrConfig,
    pub log: Vec<CouplingRecord>,
}

impl TwoColorRun {
    pub fn invariant_held(&self) -> bool {
        self.log.iter().all(|r| r.invariant_ok)
    }

    /// Coupling log; `t_chi` is the stopping time of the SZR once reached and
    /// the current time before that.
    pub fn log_csv(&self) -> String {
        let mut out = String::from("event_index,t_chi,t_zeta,invariant_ok\n");
        for r in &self.log {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.event_index, r.t_chi, r.t_zeta, r.invariant_ok
            ));
        }
        out
    }
}

/// Two-color coupling of the SZR `chi` and the FZR `zeta` from the same start.
///
/// Every occupied interior site of `zeta` rings at rate 2. If the same site
/// has an excess particle in `chi`, that particle and a blue particle of
/// `zeta` jump together; a blue particle landing on a site empty in `chi`
/// turns red. Otherwise a red particle of `zeta` jumps alone. Blue particles
/// of `zeta` then match the excess particles of `chi` site by site.
pub fn coupled_szr_fzr<R: Rng + ?Sized>(initial: &ZrConfig, rng: &mut R) -> Result<TwoColorRun> {
    require_segment(initial)?;
    let cells = initial.piles.len();
    let last = cells - 1;
    let mut chi = initial.piles.clone();
    let mut blue: Vec<u32> = chi.iter().map(|&c| c.saturating_sub(1)).collect();
    let mut red: Vec<u32> = chi.iter().map(|&c| c.min(1)).collect();
    blue[0] = 0;
    blue[last] = 0;
    red[0] = chi[0];
    red[last] = chi[last];
    let mut excess: u64 = (1..last).map(|y| u64::from(chi[y].saturating_sub(1))).sum();
    let mut occupied = IndexedSet::with_universe(cells);
    for y in 1..last {
        occupied.set(y, chi[y] > 0);
    }

    let mut t = 0.0;
    let mut t_chi = if excess == 0 { Some(0.0) } else { None };
    let (mut jumps_chi, mut jumps_zeta) = (0u64, 0u64);
    let mut log = Vec::new();
    let mut index = 0u64;
    while !occupied.is_empty() {
        t += exponential(rng, 2.0 * occupied.len() as f64);
        let y = occupied.get(rng.gen_range(0..occupied.len()));
        let z = (y as isize + coin(rng)) as usize;
        let interior_target = z != 0 && z != last;
        let mut ok = true;
        if chi[y] >= 2 {
            let was_empty = chi[z] == 0;
            chi[y] -= 1;
            chi[z] += 1;
            jumps_chi += 1;
            if blue[y] > 0 {
                blue[y] -= 1;
            } else {
                ok = false;
                red[y] -= 1;
            }
            if interior_target && !was_empty {
                blue[z] += 1;
            } else {
                red[z] += 1;
                excess -= 1;
            }
        } else if red[y] > 0 {
            red[y] -= 1;
            red[z] += 1;
        } else {
            ok = false;
            blue[y] -= 1;
            red[z] += 1;
        }
        jumps_zeta += 1;
        occupied.set(y, red[y] + blue[y] > 0);
        if interior_target {
            occupied.insert(z);
        }
        if t_chi.is_none() && excess == 0 {
            t_chi = Some(t);
        }
        ok &= (1..last).all(|v| blue[v] == chi[v].saturating_sub(1));
        let blue_total: u64 = (1..last).map(|v| u64::from(blue[v])).sum();
        ok &= blue_total == excess;
        log.push(CouplingRecord {
            event_index: index,
            t_chi: t_chi.unwrap_or(t),
            t_zeta: t,
            invariant_ok: ok,
        });
        index += 1;
    }
    let zeta: Vec<u32> = red.iter().zip(&blue).map(|(r, b)| r + b).collect();
    Ok(TwoColorRun {
        t_chi: t_chi.unwrap_or(t),
        t_zeta: t,
        jumps_chi,
        jumps_zeta,
        final_chi: ZrConfig {
            geometry: ZrGeometry::Segment,
            piles: chi,
            total: initial.total,
        },
        final_zeta: ZrConfig {
            geometry: ZrGeometry::Segment,
            piles: zeta,
            total: initial.total,
        },
        log,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeDominationRun {
    pub t_zeta: f64,
    pub t_upsilon: f64,
    /// Update times `(t_i^zeta, t_i^upsilon)` of step `i`.
    pub steps: Vec<(f64, f64)>,
}

impl TimeDominationRun {
    pub fn dominated(&self) -> bool {
        self.steps.iter().all(|&(a, b)| a <= b) && self.t_zeta <= self.t_upsilon
    }
}

/// Path of one labeled particle; steps are drawn the first time either
/// process needs them.
struct LazyWalk {
    steps: Vec<i8>,
}

impl LazyWalk {
    fn step<R: Rng + ?Sized>(&mut self, i: usize, rng: &mut R) -> isize {
        while self.steps.len() <= i {
            self.steps.push(coin(rng) as i8);
        }
        self.steps[i] as isize
    }
}

/// Couples the FZR `zeta` with the independent walks `Upsilon` from the same
/// start in `A_l(delta)`. Both follow the same pre-drawn particle paths and
/// perform their `i`-th update with a shared uniform, so every update of
/// `zeta` happens no later than the matching update of `Upsilon`.
pub fn coupled_fzr_irw<R: Rng + ?Sized>(
    initial: &ZrConfig,
    delta: f64,
    rng: &mut R,
) -> Result<TimeDominationRun> {
    require_segment(initial)?;
    if !in_a_ell(initial, delta)? {
        return Err(FepError::NotInRegularSet(initial.to_string()));
    }
    let cells = initial.piles.len();
    let last = cells - 1;
    let cap = window_capacity(initial.sites(), delta) as f64;

    let mut start = Vec::new();
    for y in 1..last {
        for _ in 0..initial.piles[y] {
            start.push(y);
        }
    }
    let np = start.len();
    let mut walks: Vec<LazyWalk> = (0..np).map(|_| LazyWalk { steps: Vec::new() }).collect();

    // zeta: particles listed per site
    let mut site_members: Vec<Vec<usize>> = vec![Vec::new(); cells];
    let mut occupied = IndexedSet::with_universe(cells);
    let mut pos_z = start.clone();
    let mut done_z = vec![0usize; np];
    for (p, &y) in start.iter().enumerate() {
        site_members[y].push(p);
        occupied.insert(y);
    }
    // upsilon: live particles
    let mut live = IndexedSet::with_universe(np);
    for p in 0..np {
        live.insert(p);
    }
    let mut pos_u = start;
    let mut done_u = vec![0usize; np];

    let (mut tz, mut tu) = (0.0f64, 0.0f64);
    let mut steps = Vec::new();
    while !occupied.is_empty() || !live.is_empty() {
        if occupied.is_empty() || live.is_empty() {
            return Err(FepError::Invalid("coupled processes lost step alignment".into()));
        }
        let u: f64 = rng.gen();
        let e = -(1.0 - u).ln();
        tz += e / (2.0 * occupied.len() as f64);
        tu += e / (2.0 * live.len() as f64 / cap);
        steps.push((tz, tu));

        let y = occupied.get(rng.gen_range(0..occupied.len()));
        let slot = rng.gen_range(0..site_members[y].len());
        let p = site_members[y].swap_remove(slot);
        if site_members[y].is_empty() {
            occupied.remove(y);
        }
        let z = (pos_z[p] as isize + walks[p].step(done_z[p], rng)) as usize;
        done_z[p] += 1;
        pos_z[p] = z;
        if z != 0 && z != last {
            site_members[z].push(p);
            occupied.insert(z);
        }

        let q = live.get(rng.gen_range(0..live.len()));
        let z = (pos_u[q] as isize + walks[q].step(done_u[q], rng)) as usize;
        done_u[q] += 1;
        pos_u[q] = z;
        if z == 0 || z == last {
            live.remove(q);
        }
    }
    Ok(TimeDominationRun {
        t_zeta: tz,
        t_upsilon: tu,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::classify;
    use crate::rng::ReplicaSeed;

    fn ex(s: &str) -> ExclusionConfig {
        s.parse().unwrap()
    }

    #[test]
    fn mapping_examples() {
        assert_eq!(ex_to_zr(&ex("011010")).unwrap().piles(), &[2, 1, 0]);
        assert_eq!(ex_to_zr(&ex("1110")).unwrap().piles(), &[3]);
        let z = ex_to_zr(&ex("1010")).unwrap();
        assert_eq!(z.piles(), &[1, 1]);
        assert_eq!(label_one_hole(&ex("1010")), Some(3));
        assert_eq!(ex_to_zr(&ex("1111")), Err(FepError::FullConfiguration));
    }

    #[test]
    fn text_round_trip() {
        let z: ZrConfig = "2, 1,0".parse().unwrap();
        assert_eq!(z.to_string(), "2,1,0");
        assert_eq!(z.total_particles(), 3);
        assert!("1,x".parse::<ZrConfig>().is_err());
    }

    #[test]
    fn zr_step_cases() {
        let mut rng = ReplicaSeed::new(1, 0).rng();
        let mut z = ZrConfig::torus(vec![1, 1]).unwrap();
        assert_eq!(zr_step(&mut z, &mut rng), Err(FepError::Frozen));
        let mut z = ZrConfig::torus(vec![3]).unwrap();
        for _ in 0..10 {
            zr_step(&mut z, &mut rng).unwrap();
            assert_eq!(z.piles(), &[3]);
        }
        let mut z = ZrConfig::torus(vec![4, 0, 0, 1, 0]).unwrap();
        while zr_step(&mut z, &mut rng).is_ok() {
            assert_eq!(z.piles().iter().sum::<u32>(), 5);
        }
    }

    #[test]
    fn zr_classes() {
        let c = |v: Vec<u32>| classify_zr(&ZrConfig::torus(v).unwrap());
        assert_eq!(c(vec![2, 1, 1]), ClassLabel::Ergodic);
        assert_eq!(c(vec![1, 1, 0]), ClassLabel::Blocked);
        assert_eq!(c(vec![3, 0, 1]), ClassLabel::TransientGood);
        assert_eq!(c(vec![2, 1, 0]), ClassLabel::TransientBad);
    }

    #[test]
    fn classification_commutes_exhaustively() {
        for n in 1..=12usize {
            for mask in 0u64..(1 << n) {
                let c = ExclusionConfig::from_mask(n, mask);
                if c.hole_count() == 0 {
                    continue;
                }
                assert!(classification_commutes(&c).unwrap(), "{c}");
            }
        }
        assert!(classification_commutes(&ex("011010")).unwrap());
        assert_eq!(classify(&ex("1010")), ClassLabel::Blocked);
    }

    #[test]
    fn regularity_examples() {
        let z = ZrConfig::torus(vec![2; 10]).unwrap();
        let s = RegularityStats::of_window(&z, 0, 4, 0.5).unwrap();
        assert_eq!(s.window, vec![0, 2, 2, 2, 0, 0]);
        assert_eq!((s.n_ell, s.z_ell), (6, 12));
        assert!(is_regular(&z, 4, 0.5).unwrap());
        let z = ZrConfig::torus(vec![3, 0, 0, 0, 0, 3, 3, 3, 3]).unwrap();
        assert!(!is_regular(&z, 4, 0.5).unwrap());
        let z = ZrConfig::torus(vec![1; 10]).unwrap();
        assert!(!is_regular(&z, 4, 0.5).unwrap());
        assert!(matches!(
            is_regular(&z, 10, 0.5),
            Err(FepError::WindowTooLarge { .. })
        ));
    }

    #[test]
    fn aux_trivial_cases() {
        let mut rng = ReplicaSeed::new(2, 0).rng();
        let s = ZrConfig::segment(&[1, 0, 1, 1]).unwrap();
        let o = simulate_aux(AuxProcessKind::Szr, &s, &mut rng).unwrap();
        assert_eq!((o.stop_time, o.jumps), (0.0, 0));
        let s = ZrConfig::segment(&[1]).unwrap();
        let o = simulate_aux(AuxProcessKind::Fzr, &s, &mut rng).unwrap();
        assert_eq!(o.jumps, 1);
        assert_eq!(o.final_config.piles()[1], 0);
        let s = ZrConfig::segment(&[3, 0, 2]).unwrap();
        let o = simulate_aux(AuxProcessKind::Irw { delta: 0.5 }, &s, &mut rng).unwrap();
        assert_eq!(o.final_config.interior(), &[0, 0, 0]);
        assert_eq!(o.final_config.total_particles(), 5);
    }

    #[test]
    fn two_color_coupling_holds() {
        for r in 0..300 {
            let mut rng = ReplicaSeed::new(3, r).rng();
            let s = ZrConfig::segment(&[0, 4, 1, 0, 3, 2, 0, 1]).unwrap();
            let run = coupled_szr_fzr(&s, &mut rng).unwrap();
            assert!(run.invariant_held());
            assert!(run.t_chi <= run.t_zeta);
            assert!(run.jumps_chi <= run.jumps_zeta);
            assert!(run.final_chi.interior().iter().all(|&p| p <= 1));
            assert!(run.final_zeta.interior().iter().all(|&p| p == 0));
        }
        let mut rng = ReplicaSeed::new(3, 0).rng();
        let run = coupled_szr_fzr(&ZrConfig::segment(&[1, 1, 1]).unwrap(), &mut rng).unwrap();
        assert_eq!(run.t_chi, 0.0);
        assert!(run.invariant_held());
        assert!(run.log_csv().starts_with("event_index,t_chi,t_zeta,invariant_ok\n"));
    }

    #[test]
    fn time_domination_holds() {
        let s = ZrConfig::segment(&[2, 2, 1, 1]).unwrap();
        assert!(in_a_ell(&s, 0.5).unwrap());
        for r in 0..300 {
            let mut rng = ReplicaSeed::new(4, r).rng();
            let run = coupled_fzr_irw(&s, 0.5, &mut rng).unwrap();
            assert!(run.dominated());
        }
        let bad = ZrConfig::segment(&[1, 1, 1, 1]).unwrap();
        let mut rng = ReplicaSeed::new(4, 0).rng();
        assert!(matches!(
            coupled_fzr_irw(&bad, 0.5, &mut rng),
            Err(FepError::NotInRegularSet(_))
        ));
    }

    #[test]
    fn tracked_map_commutes_with_dynamics() {
        use crate::dynamics::Simulator;
        for r in 0..200u64 {
            let mut rng = ReplicaSeed::new(5, r).rng();
            let n = 6 + (r % 5) as usize;
            let mask = rand::Rng::gen_range(&mut rng, 0..(1u64 << n));
            let c = ExclusionConfig::from_mask(n, mask);
            if c.hole_count() == 0 {
                continue;
            }
            let mut map = TrackedZrMap::new(&c).unwrap();
            let mut zr = map.current(&c).unwrap();
            let mut sim = Simulator::new(c);
            for _ in 0..30 {
                let before = sim.config().clone();
                let Some(ev) = sim.step_before(&mut rng, f64::INFINITY) else {
                    break;
                };
                let (pile, dir) = map.induced_move(&before, Move { site: ev.site, dir: ev.dir });
                assert!(zr.get(pile) >= 2);
                zr.apply_move(pile, dir).unwrap();
                assert_eq!(zr, map.current(sim.config()).unwrap());
            }
        }
    }
}
