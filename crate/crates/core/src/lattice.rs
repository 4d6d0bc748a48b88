//! Periodic occupancy configurations on the discrete torus, their dynamical
//! classification, and exact counting/enumeration of ergodic configurations.
//!
//! Sites are stored 0-based: index `i` is site `i + 1` of the torus
//! `{1, ..., N}`, and the text encoding lists site 1 first.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{FepError, Result};

/// Default upper bound on `N` for exhaustive enumeration routines.
pub const DEFAULT_ENUMERATION_CAP: usize = 24;

/// Occupancy configuration on the periodic lattice with `N` sites.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ExclusionConfig {
    size: usize,
    words: Vec<u64>,
    particles: usize,
}

impl ExclusionConfig {
    pub fn empty(size: usize) -> Self {
        assert!(size >= 1, "lattice needs at least one site");
        Self {
            size,
            words: vec![0; size.div_ceil(64)],
            particles: 0,
        }
    }

    pub fn full(size: usize) -> Self {
        let mut c = Self::empty(size);
        for x in 0..size {
            c.set(x, true);
        }
        c
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        let mut c = Self::empty(bits.len());
        for (x, &b) in bits.iter().enumerate() {
            if b != 0 {
                c.set(x, true);
            }
        }
        c
    }

    /// Configuration whose site `i` is bit `i` of `mask` (requires `size <= 64`).
    pub fn from_mask(size: usize, mask: u64) -> Self {
        assert!((1..=64).contains(&size));
        let mask = if size == 64 { mask } else { mask & ((1u64 << size) - 1) };
        Self {
            size,
            words: vec![mask],
            particles: mask.count_ones() as usize,
        }
    }

    /// Inverse of [`from_mask`](Self::from_mask).
    pub fn mask(&self) -> u64 {
        assert!(self.size <= 64);
        self.words[0]
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn particle_count(&self) -> usize {
        self.particles
    }

    #[inline]
    pub fn hole_count(&self) -> usize {
        self.size - self.particles
    }

    #[inline]
    pub fn get(&self, x: usize) -> bool {
        (self.words[x >> 6] >> (x & 63)) & 1 == 1
    }

    /// Occupancy at a signed, cyclically reduced index.
    #[inline]
    pub fn at(&self, x: isize) -> u8 {
        self.get(self.wrap(x)) as u8
    }

    #[inline]
    pub fn wrap(&self, x: isize) -> usize {
        x.rem_euclid(self.size as isize) as usize
    }

    pub fn set(&mut self, x: usize, occupied: bool) {
        let (w, b) = (x >> 6, x & 63);
        let was = (self.words[w] >> b) & 1 == 1;
        if was != occupied {
            self.words[w] ^= 1 << b;
            if occupied {
                self.particles += 1;
            } else {
                self.particles -= 1;
            }
        }
    }

    /// Exchange the contents of sites `x` and `y`.
    #[inline]
    pub fn swap(&mut self, x: usize, y: usize) {
        let (a, b) = (self.get(x), self.get(y));
        if a != b {
            self.words[x >> 6] ^= 1 << (x & 63);
            self.words[y >> 6] ^= 1 << (y & 63);
        }
    }

    pub fn bits(&self) -> Vec<u8> {
        (0..self.size).map(|x| self.get(x) as u8).collect()
    }

    /// The configuration shifted so that new site `x` holds old site `x + shift`.
    pub fn rotated(&self, shift: isize) -> Self {
        let mut c = Self::empty(self.size);
        for x in 0..self.size {
            if self.get(self.wrap(x as isize + shift)) {
                c.set(x, true);
            }
        }
        c
    }

    pub fn reflected(&self) -> Self {
        let mut c = Self::empty(self.size);
        for x in 0..self.size {
            if self.get(self.size - 1 - x) {
                c.set(x, true);
            }
        }
        c
    }

    /// Bitset whose bit `x` is the occupancy of `x + 1` (cyclically).
    fn successor_words(&self) -> Vec<u64> {
        let n = self.size;
        let nw = self.words.len();
        let mut out = vec![0u64; nw];
        for w in 0..nw {
            let mut v = self.words[w] >> 1;
            if w + 1 < nw {
                v |= self.words[w + 1] << 63;
            }
            out[w] = v;
        }
        // bit n-1 must read site 0
        let last = n - 1;
        let (lw, lb) = (last >> 6, last & 63);
        out[lw] &= !(1u64 << lb);
        if self.get(0) {
            out[lw] |= 1u64 << lb;
        }
        out
    }

    fn valid_mask(&self, w: usize) -> u64 {
        let rem = self.size - 64 * w;
        if rem >= 64 {
            u64::MAX
        } else {
            (1u64 << rem) - 1
        }
    }

    /// Number of edges `(x, x+1)` with both sites empty.
    pub fn adjacent_hole_pairs(&self) -> usize {
        let next = self.successor_words();
        (0..self.words.len())
            .map(|w| (!self.words[w] & !next[w] & self.valid_mask(w)).count_ones() as usize)
            .sum()
    }

    /// Number of edges `(x, x+1)` with both sites occupied.
    pub fn adjacent_particle_pairs(&self) -> usize {
        let next = self.successor_words();
        (0..self.words.len())
            .map(|w| (self.words[w] & next[w]).count_ones() as usize)
            .sum()
    }
}

impl fmt::Debug for ExclusionConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ExclusionConfig({self})")
    }
}

impl fmt::Display for ExclusionConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for x in 0..self.size {
            f.write_str(if self.get(x) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for ExclusionConfig {
    type Err = FepError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(FepError::Parse("empty string".into()));
        }
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0u8),
                '1' => Ok(1u8),
                other => Err(FepError::Parse(format!("unexpected character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_bits(&bits))
    }
}

impl Serialize for ExclusionConfig {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ExclusionConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Dynamical class of a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassLabel {
    Ergodic,
    TransientGood,
    TransientBad,
    Blocked,
}

/// Classify a configuration. The empty configuration counts as blocked and
/// the full one as ergodic.
pub fn classify(config: &ExclusionConfig) -> ClassLabel {
    let n = config.size();
    let k = config.particle_count();
    if k == 0 {
        return ClassLabel::Blocked;
    }
    if k == n {
        return ClassLabel::Ergodic;
    }
    if 2 * k > n {
        if config.adjacent_hole_pairs() == 0 {
            ClassLabel::Ergodic
        } else {
            ClassLabel::TransientGood
        }
    } else if config.adjacent_particle_pairs() == 0 {
        ClassLabel::Blocked
    } else {
        ClassLabel::TransientBad
    }
}

/// Local window on consecutive sites; ergodic iff it has no two adjacent holes.
pub fn is_ergodic_window(window: &[u8]) -> bool {
    window.windows(2).all(|w| w[0] + w[1] > 0)
}

/// Binomial coefficient with the convention `C(n, r) = 0` unless `0 <= r <= n`.
pub fn binomial(n: i64, r: i64) -> BigUint {
    if n < 0 || r < 0 || r > n {
        return BigUint::zero();
    }
    let r = r.min(n - r);
    let mut acc = BigUint::one();
    for i in 0..r {
        acc *= BigUint::from((n - i) as u64);
        acc /= BigUint::from((i + 1) as u64);
    }
    acc
}

/// Natural log of `C(n, r)`, or `-inf` when the coefficient vanishes.
pub fn ln_binomial(n: i64, r: i64) -> f64 {
    if n < 0 || r < 0 || r > n {
        return f64::NEG_INFINITY;
    }
    let (n, r) = (n as f64, r as f64);
    libm::lgamma(n + 1.0) - libm::lgamma(r + 1.0) - libm::lgamma(n - r + 1.0)
}

/// Hyperplane descriptor `(N, k)`; houses the uniform measure on the ergodic
/// configurations with `k` particles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CanonicalEnsemble {
    size: usize,
    particles: usize,
}

impl CanonicalEnsemble {
    pub fn new(size: usize, particles: usize) -> Result<Self> {
        if size == 0 || particles > size {
            return Err(FepError::ParticleCount {
                n: size,
                k: particles,
                reason: "need 0 <= k <= N",
            });
        }
        Ok(Self { size, particles })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn holes(&self) -> usize {
        self.size - self.particles
    }

    pub fn is_supercritical(&self) -> bool {
        2 * self.particles > self.size
    }

    /// Number of configurations with `k` particles and isolated holes.
    pub fn count(&self) -> Result<BigUint> {
        count_hole_isolated(self.size, self.particles)
    }

    pub fn count_with_window(&self, window: &[u8]) -> Result<BigUint> {
        count_with_window(self.size, self.particles, window)
    }
}

/// `C(k, m) + C(k-1, m-1)` with `m = N - k`: the number of configurations on
/// the torus with `k` particles and no two adjacent holes.
pub fn count_hole_isolated(n: usize, k: usize) -> Result<BigUint> {
    if k == 0 || k >= n {
        return Err(FepError::ParticleCount {
            n,
            k,
            reason: "need 1 <= k <= N-1",
        });
    }
    let (k, m) = (k as i64, (n - k) as i64);
    Ok(binomial(k, m) + binomial(k - 1, m - 1))
}

/// Count of the configurations counted by [`count_hole_isolated`] that agree
/// with `window` on sites `1..=l`.
pub fn count_with_window(n: usize, k: usize, window: &[u8]) -> Result<BigUint> {
    let shape = WindowShape::of(n, k, window)?;
    Ok(binomial(shape.top(), shape.bottom()))
}

/// Log-space version of [`count_with_window`] for lattices too large for
/// exact arithmetic to be cheap. Only differences of these values are
/// meaningful.
pub fn ln_count_with_window(n: usize, k: usize, window: &[u8]) -> Result<f64> {
    let shape = WindowShape::of(n, k, window)?;
    Ok(ln_binomial(shape.top(), shape.bottom()))
}

/// The summary of a window that the counting formula depends on.
#[derive(Debug, Clone, Copy)]
pub(crate) struct WindowShape {
    pub k: i64,
    pub m: i64,
    pub p: i64,
    pub z: i64,
    pub first: i64,
    pub last: i64,
}

impl WindowShape {
    fn of(n: usize, k: usize, window: &[u8]) -> Result<Self> {
        if window.is_empty() || window.len() > n {
            return Err(FepError::Invalid(format!(
                "window length {} must lie in 1..={n}",
                window.len()
            )));
        }
        if k > n {
            return Err(FepError::ParticleCount { n, k, reason: "k > N" });
        }
        if !is_ergodic_window(window) {
            return Err(FepError::NonErgodicWindow);
        }
        let p = window.iter().filter(|&&b| b != 0).count() as i64;
        Ok(Self {
            k: k as i64,
            m: (n - k) as i64,
            p,
            z: window.len() as i64 - p,
            first: i64::from(window[0] != 0),
            last: i64::from(window[window.len() - 1] != 0),
        })
    }

    pub fn top(&self) -> i64 {
        self.k - self.p + self.first + self.last - 1
    }

    pub fn bottom(&self) -> i64 {
        self.m - self.z
    }
}

/// Iterator over all configurations on `N <= 64` sites with `k` particles whose
/// holes are pairwise non-adjacent (cyclically), in increasing mask order of
/// the hole set.
pub struct HoleIsolatedIter {
    size: usize,
    holes: usize,
    next_mask: Option<u64>,
    full: u64,
}

impl HoleIsolatedIter {
    fn new(size: usize, particles: usize) -> Self {
        let holes = size - particles;
        let full = if size == 64 { u64::MAX } else { (1u64 << size) - 1 };
        let first = match holes {
            0 => 0,
            64 => u64::MAX,
            h => (1u64 << h) - 1,
        };
        Self {
            size,
            holes,
            next_mask: Some(first),
            full,
        }
    }

    fn isolated(&self, holes: u64) -> bool {
        // rotate the hole set by one site and intersect
        let rot = ((holes >> 1) | (holes << (self.size - 1))) & self.full;
        if self.size == 1 {
            return holes == 0;
        }
        holes & rot == 0
    }
}

impl Iterator for HoleIsolatedIter {
    type Item = ExclusionConfig;

    fn next(&mut self) -> Option<ExclusionConfig> {
        loop {
            let holes = self.next_mask?;
            // Gosper's hack for the next subset of equal popcount
            self.next_mask = if holes == 0 {
                None
            } else {
                let c = holes & holes.wrapping_neg();
                let r = holes.wrapping_add(c);
                if r == 0 || r > self.full {
                    None
                } else {
                    let nxt = (((r ^ holes) >> 2) / c) | r;
                    (nxt <= self.full).then_some(nxt)
                }
            };
            if self.holes <= self.size && self.isolated(holes) {
                return Some(ExclusionConfig::from_mask(self.size, !holes & self.full));
            }
        }
    }
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap || n > 64 {
        Err(FepError::CapExceeded { n, cap: cap.min(64) })
    } else if n == 0 {
        Err(FepError::Invalid("lattice needs at least one site".into()))
    } else {
        Ok(())
    }
}

/// All configurations with `k` particles and isolated holes, for any `k`.
pub fn enumerate_hole_isolated(n: usize, k: usize, cap: usize) -> Result<HoleIsolatedIter> {
    check_cap(n, cap)?;
    if k > n {
        return Err(FepError::ParticleCount { n, k, reason: "k > N" });
    }
    Ok(HoleIsolatedIter::new(n, k))
}

/// The ergodic configurations with `k` particles. Empty when `k <= N/2`.
pub fn enumerate_ergodic(
    n: usize,
    k: usize,
    cap: usize,
) -> Result<impl Iterator<Item = ExclusionConfig>> {
    let iter = enumerate_hole_isolated(n, k, cap)?;
    let live = 2 * k > n;
    Ok(iter.filter(move |_| live))
}

/// Graph on the ergodic configurations with `k` particles joined by
/// reversible nearest-neighbor swaps.
#[derive(Debug, Clone)]
pub struct AdjacencyGraph {
    pub nodes: Vec<ExclusionConfig>,
    pub edges: Vec<(usize, usize)>,
}

impl AdjacencyGraph {
    pub fn is_connected(&self) -> bool {
        if self.nodes.is_empty() {
            return true;
        }
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    reached += 1;
                    queue.push_back(w);
                }
            }
        }
        reached == self.nodes.len()
    }
}

/// Swap rate across the edge `(x, x+1)`, i.e. the sum of the right jump from
/// `x` and the left jump from `x + 1`.
pub fn edge_rate(config: &ExclusionConfig, x: usize) -> u8 {
    let x = x as isize;
    let e = |d: isize| config.at(x + d);
    e(-1) * e(0) * (1 - e(1)) + e(2) * e(1) * (1 - e(0))
}

pub fn adjacency_graph(n: usize, k: usize, cap: usize) -> Result<AdjacencyGraph> {
    if 2 * k <= n || k > n {
        return Err(FepError::ParticleCount {
            n,
            k,
            reason: "adjacency graph needs N/2 < k <= N",
        });
    }
    let nodes: Vec<_> = enumerate_ergodic(n, k, cap)?.collect();
    let index: HashMap<u64, usize> = nodes.iter().enumerate().map(|(i, c)| (c.mask(), i)).collect();
    let mut edges = Vec::new();
    for (i, c) in nodes.iter().enumerate() {
        for x in 0..n {
            let y = (x + 1) % n;
            if c.get(x) == c.get(y) || edge_rate(c, x) == 0 {
                continue;
            }
            let mut swapped = c.clone();
            swapped.swap(x, y);
            if edge_rate(&swapped, x) == 0 {
                continue;
            }
            if let Some(&j) = index.get(&swapped.mask()) {
                if i < j {
                    edges.push((i, j));
                }
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    Ok(AdjacencyGraph { nodes, edges })
}

/// Counting table rows `N,k,count` for all `1 <= k <= N-1`.
pub fn counting_table_csv(sizes: impl IntoIterator<Item = usize>) -> String {
    let mut out = String::from("N,k,count\n");
    for n in sizes {
        for k in 1..n {
            let c = count_hole_isolated(n, k).expect("k in range");
            out.push_str(&format!("{n},{k},{c}\n"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(s: &str) -> ExclusionConfig {
        s.parse().unwrap()
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(&cfg("11011")), ClassLabel::Ergodic);
        assert_eq!(classify(&cfg("1010")), ClassLabel::Blocked);
        assert_eq!(classify(&cfg("11100")), ClassLabel::TransientGood);
        assert_eq!(classify(&cfg("100101")), ClassLabel::TransientBad);
        assert_eq!(classify(&cfg("0000")), ClassLabel::Blocked);
        assert_eq!(classify(&cfg("1111")), ClassLabel::Ergodic);
        assert_eq!(classify(&cfg("0")), ClassLabel::Blocked);
        assert_eq!(classify(&cfg("1")), ClassLabel::Ergodic);
    }

    #[test]
    fn transient_bad_example_has_a_live_move() {
        // site 1 (index 0): eta(6) eta(1) (1 - eta(2)) = 1
        let c = cfg("100101");
        assert_eq!(c.at(-1) * c.at(0) * (1 - c.at(1)), 1);
    }

    #[test]
    fn wide_configs_use_several_words() {
        let mut bits = vec![1u8; 130];
        bits[64] = 0;
        bits[65] = 0;
        let c = ExclusionConfig::from_bits(&bits);
        assert_eq!(c.particle_count(), 128);
        assert_eq!(c.adjacent_hole_pairs(), 1);
        assert_eq!(classify(&c), ClassLabel::TransientGood);
        let mut wrap = vec![1u8; 130];
        wrap[0] = 0;
        wrap[129] = 0;
        let c = ExclusionConfig::from_bits(&wrap);
        assert_eq!(c.adjacent_hole_pairs(), 1);
        assert_eq!(c.adjacent_particle_pairs(), 127);
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!("10x1".parse::<ExclusionConfig>().is_err());
        assert!("".parse::<ExclusionConfig>().is_err());
        assert_eq!(cfg("0110").to_string(), "0110");
    }

    #[test]
    fn counting_examples() {
        assert_eq!(count_hole_isolated(5, 3).unwrap(), BigUint::from(5u32));
        assert_eq!(count_hole_isolated(4, 3).unwrap(), BigUint::from(4u32));
        assert_eq!(count_hole_isolated(6, 3).unwrap(), BigUint::from(2u32));
        assert!(count_hole_isolated(5, 0).is_err());
        assert!(count_hole_isolated(5, 5).is_err());
    }

    #[test]
    fn window_counting_examples() {
        assert_eq!(count_with_window(5, 3, &[1]).unwrap(), BigUint::from(3u32));
        assert_eq!(count_with_window(5, 3, &[0]).unwrap(), BigUint::from(2u32));
        assert_eq!(
            count_with_window(5, 3, &[0, 0]),
            Err(FepError::NonErgodicWindow)
        );
    }

    #[test]
    fn log_counts_track_exact_counts() {
        let exact = count_with_window(40, 30, &[1, 0, 1]).unwrap();
        let ln = ln_count_with_window(40, 30, &[1, 0, 1]).unwrap();
        let exact_f: f64 = exact.to_string().parse().unwrap();
        assert!((ln - exact_f.ln()).abs() < 1e-9);
    }

    #[test]
    fn enumeration_examples() {
        assert_eq!(enumerate_ergodic(5, 3, 24).unwrap().count(), 5);
        let full: Vec<_> = enumerate_ergodic(4, 4, 24).unwrap().collect();
        assert_eq!(full, vec![ExclusionConfig::full(4)]);
        assert!(matches!(
            enumerate_ergodic(30, 16, 24).err(),
            Some(FepError::CapExceeded { .. })
        ));
        assert_eq!(enumerate_ergodic(6, 3, 24).unwrap().count(), 0);
        assert_eq!(enumerate_hole_isolated(6, 3, 24).unwrap().count(), 2);
    }

    #[test]
    fn adjacency_examples() {
        let g = adjacency_graph(5, 3, 24).unwrap();
        assert_eq!(g.nodes.len(), 5);
        assert!(g.is_connected());
        let g = adjacency_graph(4, 4, 24).unwrap();
        assert_eq!(g.nodes.len(), 1);
        assert!(g.edges.is_empty());
        assert!(adjacency_graph(7, 4, 24).unwrap().is_connected());
        assert!(adjacency_graph(6, 3, 24).is_err());
    }

    #[test]
    fn counting_table_has_header_and_rows() {
        let csv = counting_table_csv([4]);
        assert_eq!(csv, "N,k,count\n4,1,0\n4,2,2\n4,3,4\n");
    }

    proptest! {
        #[test]
        fn classify_is_symmetric(bits in proptest::collection::vec(0u8..2, 1..40), shift in -50isize..50) {
            let c = ExclusionConfig::from_bits(&bits);
            let label = classify(&c);
            prop_assert_eq!(classify(&c.rotated(shift)), label);
            prop_assert_eq!(classify(&c.reflected()), label);
        }

        #[test]
        fn text_encoding_round_trips(bits in proptest::collection::vec(0u8..2, 1..150)) {
            let c = ExclusionConfig::from_bits(&bits);
            let back: ExclusionConfig = c.to_string().parse().unwrap();
            prop_assert_eq!(back.bits(), bits);
            prop_assert_eq!(back.particle_count(), c.particle_count());
        }
    }
}
