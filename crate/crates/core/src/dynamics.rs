//! Continuous-time simulation of the facilitated exclusion dynamics.
//!
//! A particle at `x` jumps to an empty neighbor `x + d` at rate 1 provided the
//! site behind it, `x - d`, is occupied. The simulator keeps an indexed set of
//! the moves with positive rate and realizes the superposition of their clocks
//! with a single exponential of the total rate followed by a uniform choice.
//! Times are kept in microscopic units; macroscopic time is `t_micro / N^2`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FepError, Result};
use crate::lattice::{classify, ClassLabel, ExclusionConfig};
use crate::rng::{exponential, ReplicaSeed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Left,
    Right,
}

impl Direction {
    #[inline]
    pub fn offset(self) -> isize {
        match self {
            Direction::Left => -1,
            Direction::Right => 1,
        }
    }

    pub fn from_offset(d: i8) -> Option<Self> {
        match d {
            1 => Some(Direction::Right),
            -1 => Some(Direction::Left),
            _ => None,
        }
    }
}

/// A particle jump from `site` towards `site + dir`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Move {
    pub site: usize,
    pub dir: Direction,
}

impl Move {
    #[inline]
    fn id(self) -> usize {
        2 * self.site + (self.dir == Direction::Left) as usize
    }

    #[inline]
    fn from_id(id: usize) -> Self {
        Move {
            site: id / 2,
            dir: if id % 2 == 0 { Direction::Right } else { Direction::Left },
        }
    }

    pub fn target(self, size: usize) -> usize {
        (self.site as isize + self.dir.offset()).rem_euclid(size as isize) as usize
    }
}

/// Indicator that the particle at `x` may jump to `x + dir`.
#[inline]
pub fn jump_rate(config: &ExclusionConfig, x: usize, dir: Direction) -> u8 {
    let x = x as isize;
    let d = dir.offset();
    config.at(x - d) * config.at(x) * (1 - config.at(x + d))
}

const ABSENT: u32 = u32::MAX;

/// Set of moves with positive rate, with O(1) insertion, removal and uniform
/// selection. Every active move has rate 1, so the total rate is the size.
#[derive(Debug, Clone)]
pub struct RateTable {
    active: Vec<u32>,
    position: Vec<u32>,
}

impl RateTable {
    pub fn build(config: &ExclusionConfig) -> Self {
        let n = config.size();
        let mut table = Self {
            active: Vec::new(),
            position: vec![ABSENT; 2 * n],
        };
        for x in 0..n {
            for dir in [Direction::Right, Direction::Left] {
                if jump_rate(config, x, dir) == 1 {
                    table.insert(Move { site: x, dir }.id());
                }
            }
        }
        table
    }

    #[inline]
    pub fn total_rate(&self) -> f64 {
        self.active.len() as f64
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.active.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn contains(&self, mv: Move) -> bool {
        self.position[mv.id()] != ABSENT
    }

    pub fn moves(&self) -> impl Iterator<Item = Move> + '_ {
        self.active.iter().map(|&id| Move::from_id(id as usize))
    }

    #[inline]
    pub fn nth(&self, i: usize) -> Move {
        Move::from_id(self.active[i] as usize)
    }

    #[inline]
    fn insert(&mut self, id: usize) {
        if self.position[id] == ABSENT {
            self.position[id] = self.active.len() as u32;
            self.active.push(id as u32);
        }
    }

    #[inline]
    fn remove(&mut self, id: usize) {
        let pos = self.position[id];
        if pos != ABSENT {
            let last = *self.active.last().expect("nonempty");
            self.active[pos as usize] = last;
            self.position[last as usize] = pos;
            self.active.pop();
            self.position[id] = ABSENT;
        }
    }

    /// Re-evaluate every move whose rate can depend on site `x` or its neighbor
    /// (all moves starting within distance 2 of `x`).
    pub fn refresh_around(&mut self, config: &ExclusionConfig, x: usize) {
        let n = config.size() as isize;
        for off in -2..=2 {
            let y = (x as isize + off).rem_euclid(n) as usize;
            for dir in [Direction::Right, Direction::Left] {
                let id = Move { site: y, dir }.id();
                if jump_rate(config, y, dir) == 1 {
                    self.insert(id);
                } else {
                    self.remove(id);
                }
            }
        }
    }

    /// Same moves as a rebuild from scratch, ignoring order.
    pub fn same_moves(&self, other: &RateTable) -> bool {
        self.active.len() == other.active.len()
            && self.active.iter().all(|&id| other.position[id as usize] != ABSENT)
    }
}

/// Perform one Gillespie step in place and return the executed move with
/// the microscopic waiting time.
pub fn step<R: Rng + ?Sized>(
    config: &mut ExclusionConfig,
    table: &mut RateTable,
    rng: &mut R,
) -> Result<(Move, f64)> {
    if table.is_empty() {
        return Err(FepError::Frozen);
    }
    let dt = exponential(rng, table.total_rate());
    let mv = table.nth(rng.gen_range(0..table.len()));
    let target = mv.target(config.size());
    config.swap(mv.site, target);
    table.refresh_around(config, mv.site);
    Ok((mv, dt))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t_micro: f64,
    pub site: usize,
    pub dir: Direction,
}

/// Running simulation state with incremental bookkeeping of the ergodicity
/// test (the number of adjacent empty pairs).
#[derive(Debug, Clone)]
pub struct Simulator {
    config: ExclusionConfig,
    table: RateTable,
    time_micro: f64,
    hole_pairs: usize,
    events: u64,
}

impl Simulator {
    pub fn new(config: ExclusionConfig) -> Self {
        let table = RateTable::build(&config);
        let hole_pairs = config.adjacent_hole_pairs();
        Self {
            config,
            table,
            time_micro: 0.0,
            hole_pairs,
            events: 0,
        }
    }

    pub fn config(&self) -> &ExclusionConfig {
        &self.config
    }

    pub fn into_config(self) -> ExclusionConfig {
        self.config
    }

    pub fn rate_table(&self) -> &RateTable {
        &self.table
    }

    pub fn time_micro(&self) -> f64 {
        self.time_micro
    }

    pub fn event_count(&self) -> u64 {
        self.events
    }

    pub fn is_frozen(&self) -> bool {
        self.table.is_empty()
    }

    #[inline]
    pub fn is_ergodic(&self) -> bool {
        let (n, k) = (self.config.size(), self.config.particle_count());
        k == n || (2 * k > n && self.hole_pairs == 0)
    }

    fn hole_pairs_near(&self, x: usize, y: usize) -> usize {
        let n = self.config.size() as isize;
        let mut edges = [x as isize - 1, x as isize, y as isize - 1, y as isize]
            .map(|e| e.rem_euclid(n) as usize);
        edges.sort_unstable();
        let mut count = 0;
        for (i, &e) in edges.iter().enumerate() {
            if i > 0 && edges[i - 1] == e {
                continue;
            }
            let f = (e + 1) % self.config.size();
            if !self.config.get(e) && !self.config.get(f) {
                count += 1;
            }
        }
        count
    }

    /// Draw the next event; `None` if frozen or if it would land after
    /// `horizon_micro`, in which case the clock is set to the horizon.
    pub fn step_before<R: Rng + ?Sized>(&mut self, rng: &mut R, horizon_micro: f64) -> Option<Event> {
        if self.table.is_empty() {
            self.time_micro = self.time_micro.max(horizon_micro);
            return None;
        }
        let dt = exponential(rng, self.table.total_rate());
        if self.time_micro + dt > horizon_micro {
            self.time_micro = horizon_micro;
            return None;
        }
        let mv = self.table.nth(rng.gen_range(0..self.table.len()));
        let target = mv.target(self.config.size());
        let before = self.hole_pairs_near(mv.site, target);
        self.config.swap(mv.site, target);
        let after = self.hole_pairs_near(mv.site, target);
        self.hole_pairs = self.hole_pairs + after - before;
        self.table.refresh_around(&self.config, mv.site);
        self.time_micro += dt;
        self.events += 1;
        Some(Event {
            t_micro: self.time_micro,
            site: mv.site,
            dir: mv.dir,
        })
    }

    /// Run until microscopic time `horizon_micro`, calling `on_event` after
    /// every executed jump.
    pub fn advance_to<R: Rng + ?Sized, F: FnMut(&Event, &ExclusionConfig)>(
        &mut self,
        rng: &mut R,
        horizon_micro: f64,
        mut on_event: F,
    ) {
        while let Some(ev) = self.step_before(rng, horizon_micro) {
            on_event(&ev, &self.config);
        }
    }

    /// Run until the ergodic component is entered or `horizon_micro` expires.
    pub fn run_until_ergodic<R: Rng + ?Sized>(&mut self, rng: &mut R, horizon_micro: f64) -> HittingTime {
        if self.is_ergodic() {
            return HittingTime::Reached(self.time_micro);
        }
        let (n, k) = (self.config.size(), self.config.particle_count());
        if 2 * k <= n {
            return HittingTime::NeverReachable;
        }
        while self.step_before(rng, horizon_micro).is_some() {
            if self.is_ergodic() {
                return HittingTime::Reached(self.time_micro);
            }
        }
        HittingTime::NotReached
    }
}

/// Recorded path of one simulation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub initial: ExclusionConfig,
    pub events: Vec<Event>,
    #[serde(rename = "final")]
    pub final_config: ExclusionConfig,
    /// Microscopic time per unit of macroscopic time, `N^2`.
    pub time_scale: f64,
    pub horizon_micro: f64,
    pub seed: Option<ReplicaSeed>,
}

impl Trajectory {
    /// Re-apply the recorded jumps to the initial configuration.
    pub fn replay(&self) -> ExclusionConfig {
        let mut c = self.initial.clone();
        let n = c.size();
        for ev in &self.events {
            let mv = Move { site: ev.site, dir: ev.dir };
            c.swap(ev.site, mv.target(n));
        }
        c
    }

    pub fn horizon_macro(&self) -> f64 {
        self.horizon_micro / self.time_scale
    }

    /// Event log as CSV `t_micro,x,dir`, with `x` the 1-based site label.
    pub fn event_log_csv(&self) -> String {
        let mut out = String::from("t_micro,x,dir\n");
        for ev in &self.events {
            out.push_str(&format!("{},{},{}\n", ev.t_micro, ev.site + 1, ev.dir.offset()));
        }
        out
    }

    pub fn summary(&self) -> TrajectorySummary {
        TrajectorySummary {
            initial: self.initial.to_string(),
            final_config: self.final_config.to_string(),
            event_count: self.events.len() as u64,
            horizon_micro: self.horizon_micro,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub initial: String,
    #[serde(rename = "final")]
    pub final_config: String,
    pub event_count: u64,
    pub horizon_micro: f64,
    pub seed: Option<ReplicaSeed>,
}

/// Simulate for `t_macro` units of macroscopic time (i.e. `t_macro * N^2`
/// microscopic time), recording every event. A frozen configuration is held
/// to the horizon.
pub fn simulate<R: Rng + ?Sized>(config: &ExclusionConfig, t_macro: f64, rng: &mut R) -> Trajectory {
    let n = config.size() as f64;
    let horizon = t_macro.max(0.0) * n * n;
    let mut sim = Simulator::new(config.clone());
    let mut events = Vec::new();
    sim.advance_to(rng, horizon, |ev, _| events.push(*ev));
    Trajectory {
        initial: config.clone(),
        events,
        final_config: sim.into_config(),
        time_scale: n * n,
        horizon_micro: horizon,
        seed: None,
    }
}

/// As [`simulate`], drawing randomness from (and recording) a replica seed.
pub fn simulate_seeded(config: &ExclusionConfig, t_macro: f64, seed: ReplicaSeed) -> Trajectory {
    let mut rng = seed.rng();
    let mut t = simulate(config, t_macro, &mut rng);
    t.seed = Some(seed);
    t
}

/// Instantaneous currents and the gradient observable at every site.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurrentField {
    /// Net current across edge `(x, x+1)`, counted positive left to right.
    pub j: Vec<i8>,
    /// `h` evaluated around each site.
    pub hval: Vec<u8>,
}

/// `h` centered at `x`: `eta(x-1) eta(x) + eta(x) eta(x+1) - eta(x-1) eta(x) eta(x+1)`.
#[inline]
pub fn h_at(config: &ExclusionConfig, x: usize) -> u8 {
    let x = x as isize;
    let (a, b, c) = (config.at(x - 1), config.at(x), config.at(x + 1));
    a * b + b * c - a * b * c
}

pub fn current_field(config: &ExclusionConfig) -> CurrentField {
    let n = config.size();
    let j = (0..n)
        .map(|x| {
            let c = crate::lattice::edge_rate(config, x) as i8;
            let y = (x + 1) % n;
            c * (config.get(x) as i8 - config.get(y) as i8)
        })
        .collect();
    let hval = (0..n).map(|x| h_at(config, x)).collect();
    CurrentField { j, hval }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HittingTime {
    Reached(f64),
    NotReached,
    NeverReachable,
}

/// Microscopic time at which the process first enters the ergodic component.
pub fn hitting_time_ergodic<R: Rng + ?Sized>(
    config: &ExclusionConfig,
    rng: &mut R,
    t_max_micro: f64,
) -> HittingTime {
    Simulator::new(config.clone()).run_until_ergodic(rng, t_max_micro)
}

/// Whether `config` is ergodic per the lattice classification; convenience for
/// callers holding only a configuration.
pub fn is_ergodic(config: &ExclusionConfig) -> bool {
    classify(config) == ClassLabel::Ergodic
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::ReplicaSeed;

    fn cfg(s: &str) -> ExclusionConfig {
        s.parse().unwrap()
    }

    #[test]
    fn jump_rate_examples() {
        let c = cfg("11011");
        // site 2 -> index 1
        assert_eq!(jump_rate(&c, 1, Direction::Right), 1);
        assert_eq!(jump_rate(&c, 0, Direction::Right), 0);
        let b = cfg("1010");
        for x in 0..4 {
            for d in [Direction::Left, Direction::Right] {
                assert_eq!(jump_rate(&b, x, d), 0);
            }
        }
    }

    #[test]
    fn blocked_configuration_is_frozen() {
        let mut c = cfg("1010");
        let mut t = RateTable::build(&c);
        let mut rng = ReplicaSeed::new(1, 0).rng();
        assert_eq!(step(&mut c, &mut t, &mut rng), Err(FepError::Frozen));
    }

    #[test]
    fn two_active_moves_are_equally_likely() {
        let start = cfg("11011");
        let table = RateTable::build(&start);
        assert_eq!(table.len(), 2);
        let mut rng = ReplicaSeed::new(2, 0).rng();
        let draws = 100_000;
        let mut right = 0;
        for _ in 0..draws {
            let mut c = start.clone();
            let mut t = table.clone();
            let (mv, _) = step(&mut c, &mut t, &mut rng).unwrap();
            assert_eq!(c.particle_count(), 4);
            if mv.dir == Direction::Right {
                assert_eq!(mv.site, 1);
                right += 1;
            } else {
                assert_eq!(mv.site, 3);
            }
        }
        let sd = (draws as f64 * 0.25).sqrt();
        assert!((right as f64 - draws as f64 / 2.0).abs() < 3.0 * sd);
    }

    #[test]
    fn incremental_table_matches_rebuild() {
        for seed in 0..20u64 {
            let mut rng = ReplicaSeed::new(seed, 0).rng();
            let n = 3 + (seed as usize % 30);
            let bits: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            let mut c = ExclusionConfig::from_bits(&bits);
            let mut t = RateTable::build(&c);
            for _ in 0..500 {
                match step(&mut c, &mut t, &mut rng) {
                    Ok(_) => assert!(t.same_moves(&RateTable::build(&c))),
                    Err(_) => break,
                }
            }
        }
    }

    #[test]
    fn simulate_keeps_blocked_configs_and_conserves_mass() {
        let mut rng = ReplicaSeed::new(3, 0).rng();
        let b = cfg("1010010");
        let t = simulate(&b, 1.0, &mut rng);
        assert_eq!(t.final_config, b);
        assert!(t.events.is_empty());

        let c = cfg("1101101111");
        let t = simulate(&c, 0.5, &mut rng);
        assert_eq!(t.final_config.particle_count(), c.particle_count());
        assert_eq!(classify(&t.final_config), ClassLabel::Ergodic);
        assert_eq!(t.replay(), t.final_config);
        assert!(t.events.windows(2).all(|w| w[0].t_micro < w[1].t_micro));
        assert!(t.events.last().map_or(true, |e| e.t_micro <= t.horizon_micro));
    }

    #[test]
    fn seeded_runs_reproduce() {
        let c = cfg("110110111011");
        let a = simulate_seeded(&c, 0.2, ReplicaSeed::new(9, 4));
        let b = simulate_seeded(&c, 0.2, ReplicaSeed::new(9, 4));
        assert_eq!(a.events, b.events);
        assert_eq!(a.summary(), b.summary());
        assert!(a.event_log_csv().starts_with("t_micro,x,dir\n"));
    }

    #[test]
    fn current_field_examples() {
        let f = current_field(&ExclusionConfig::full(6));
        assert!(f.hval.iter().all(|&h| h == 1));
        assert!(f.j.iter().all(|&j| j == 0));
        // edge (2,3): the particle at 2 may jump right, carrying one unit
        let f = current_field(&cfg("11011"));
        assert_eq!(f.j[1], 1);
        assert_eq!(f.j[2], -1);
    }

    #[test]
    fn hitting_time_examples() {
        let mut rng = ReplicaSeed::new(5, 0).rng();
        assert_eq!(hitting_time_ergodic(&cfg("11011"), &mut rng, 10.0), HittingTime::Reached(0.0));
        assert_eq!(hitting_time_ergodic(&cfg("1010"), &mut rng, 10.0), HittingTime::NeverReachable);
        assert_eq!(hitting_time_ergodic(&cfg("110100"), &mut rng, 10.0), HittingTime::NeverReachable);
        for _ in 0..10_000 {
            match hitting_time_ergodic(&cfg("11100"), &mut rng, 1e6) {
                HittingTime::Reached(t) => assert!(t > 0.0),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn hole_pair_tracking_matches_classification() {
        let mut rng = ReplicaSeed::new(8, 1).rng();
        for n in [3usize, 4, 7, 20, 70, 130] {
            let bits: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.7))).collect();
            let mut sim = Simulator::new(ExclusionConfig::from_bits(&bits));
            for _ in 0..2_000 {
                if sim.step_before(&mut rng, f64::INFINITY).is_none() {
                    break;
                }
                assert_eq!(sim.is_ergodic(), is_ergodic(sim.config()));
                assert_eq!(sim.hole_pairs, sim.config().adjacent_hole_pairs());
            }
        }
    }
}
