//! Poisson loop representation of `e^{-beta H}` for the XXZ model.
//!
//! Each edge carries two independent Poisson processes on the imaginary-time
//! circle `[-beta/2, beta/2)`. An overpass event transposes the two spins of
//! its edge; a cul-de-sac event requires the pair to be antialigned just
//! before and just after the event, so the trajectories reflect. With
//! `u = (1 + delta) / 2` the overpass rate is `u/2` and the cul-de-sac rate
//! `(1 - u)/2`, which gives
//!
//! `tr e^{-beta H} = e^{beta |E| / 4} E_u[2^{#loops}]`.
//!
//! Loops are found by a union-find with parity over the vertical segments
//! between consecutive events at each site.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{block, Torus};

/// Number of independent chains; also the number of jackknife batches.
pub const CHAINS: usize = 32;
/// Largest number of loop components enumerated by the potential estimator.
pub const MAX_LABELED_COMPONENTS: usize = 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Overpass,
    CulDeSac,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

/// Poisson arrivals on every edge of a graph, sorted by time per edge.
#[derive(Clone, Debug, PartialEq)]
pub struct EventTimeline {
    pub beta: f64,
    pub nsites: usize,
    pub edges: Vec<(usize, usize)>,
    pub events: Vec<Vec<Event>>,
}

#[derive(Serialize, Deserialize)]
struct EventRecord {
    edge: usize,
    time: f64,
    kind: EventKind,
}

#[derive(Serialize, Deserialize)]
struct TimelineRecord {
    beta: f64,
    nsites: usize,
    edges: Vec<[usize; 2]>,
    events: Vec<EventRecord>,
}

impl EventTimeline {
    pub fn empty(torus: &Torus, beta: f64) -> Self {
        EventTimeline {
            beta,
            nsites: torus.num_sites(),
            edges: torus.edges().to_vec(),
            events: vec![Vec::new(); torus.num_edges()],
        }
    }

    pub fn num_events(&self) -> usize {
        self.events.iter().map(Vec::len).sum()
    }

    pub fn count_kind(&self, kind: EventKind) -> usize {
        self.events.iter().flatten().filter(|e| e.kind == kind).count()
    }

    fn in_range(&self, t: f64) -> bool {
        t >= -self.beta / 2.0 && t < self.beta / 2.0
    }

    /// Inserts an event, keeping the edge list sorted.
    pub fn insert(&mut self, edge: usize, event: Event) -> Result<()> {
        if edge >= self.edges.len() {
            return invalid(format!("edge {edge} out of range"));
        }
        if !self.in_range(event.time) {
            return invalid(format!("time {} outside [-beta/2, beta/2)", event.time));
        }
        let list = &mut self.events[edge];
        match list.binary_search_by(|e| e.time.total_cmp(&event.time)) {
            Ok(_) => invalid("two events on one edge at the same time"),
            Err(pos) => {
                list.insert(pos, event);
                Ok(())
            }
        }
    }

    pub fn remove(&mut self, edge: usize, index: usize) -> Event {
        self.events[edge].remove(index)
    }

    /// Checks ordering, uniqueness and range of every event time.
    pub fn validate(&self) -> Result<()> {
        if self.events.len() != self.edges.len() {
            return Err(Error::DimensionMismatch(self.events.len(), self.edges.len()));
        }
        for (e, list) in self.events.iter().enumerate() {
            for w in list.windows(2) {
                if w[0].time >= w[1].time {
                    return invalid(format!("event times on edge {e} not strictly increasing"));
                }
            }
            if let Some(ev) = list.iter().find(|ev| !self.in_range(ev.time)) {
                return invalid(format!("time {} on edge {e} out of range", ev.time));
            }
        }
        Ok(())
    }

    /// JSON debug format: edge list plus `(edge id, time, kind)` records.
    pub fn to_json(&self) -> Result<String> {
        let rec = TimelineRecord {
            beta: self.beta,
            nsites: self.nsites,
            edges: self.edges.iter().map(|&(a, b)| [a, b]).collect(),
            events: self
                .events
                .iter()
                .enumerate()
                .flat_map(|(edge, list)| {
                    list.iter().map(move |ev| EventRecord {
                        edge,
                        time: ev.time,
                        kind: ev.kind,
                    })
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&rec)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: TimelineRecord = serde_json::from_str(text)?;
        let mut tl = EventTimeline {
            beta: rec.beta,
            nsites: rec.nsites,
            edges: rec.edges.iter().map(|e| (e[0], e[1])).collect(),
            events: vec![Vec::new(); rec.edges.len()],
        };
        for r in rec.events {
            tl.insert(
                r.edge,
                Event {
                    time: r.time,
                    kind: r.kind,
                },
            )?;
        }
        Ok(tl)
    }
}

/// `u = (1 + delta) / 2`.
pub fn u_of_delta(delta: f64) -> f64 {
    (1.0 + delta) / 2.0
}

fn poisson_count<R: Rng>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as usize
}

/// Samples a timeline with overpass rate `u/2` and cul-de-sac rate `(1-u)/2` per edge.
pub fn sample_timeline_with<R: Rng>(torus: &Torus, u: f64, beta: f64, rng: &mut R) -> Result<EventTimeline> {
    if !(0.0..=1.0).contains(&u) {
        return invalid(format!(
            "u = {u} outside [0, 1]: the loop representation needs |delta| <= 1"
        ));
    }
    if beta.is_nan() || beta <= 0.0 {
        return invalid("beta must be positive");
    }
    let mut tl = EventTimeline::empty(torus, beta);
    for list in tl.events.iter_mut() {
        loop {
            let n_over = poisson_count(u / 2.0 * beta, rng);
            let n_cul = poisson_count((1.0 - u) / 2.0 * beta, rng);
            let mut evs: Vec<Event> = (0..n_over + n_cul)
                .map(|i| Event {
                    time: rng.random_range(-beta / 2.0..beta / 2.0),
                    kind: if i < n_over {
                        EventKind::Overpass
                    } else {
                        EventKind::CulDeSac
                    },
                })
                .collect();
            evs.sort_by(|a, b| a.time.total_cmp(&b.time));
            if evs.windows(2).all(|w| w[0].time < w[1].time) {
                *list = evs;
                break;
            }
        }
    }
    Ok(tl)
}

pub fn sample_timeline(torus: &Torus, u: f64, beta: f64, seed: u64) -> Result<EventTimeline> {
    sample_timeline_with(torus, u, beta, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Union-find in which every element carries a parity relative to its parent.
struct ParityUnionFind {
    parent: Vec<usize>,
    parity: Vec<bool>,
    rank: Vec<u8>,
}

impl ParityUnionFind {
    fn new(n: usize) -> Self {
        ParityUnionFind {
            parent: (0..n).collect(),
            parity: vec![false; n],
            rank: vec![0; n],
        }
    }

    fn find(&mut self, x: usize) -> (usize, bool) {
        let p = self.parent[x];
        if p == x {
            return (x, false);
        }
        let (root, pp) = self.find(p);
        self.parent[x] = root;
        self.parity[x] ^= pp;
        (root, self.parity[x])
    }

    /// Records `label(a) = label(b) xor flip`; returns false on contradiction.
    fn union(&mut self, a: usize, b: usize, flip: bool) -> bool {
        let (ra, pa) = self.find(a);
        let (rb, pb) = self.find(b);
        if ra == rb {
            return pa ^ pb == flip;
        }
        let rel = pa ^ pb ^ flip;
        let (big, small) = if self.rank[ra] >= self.rank[rb] { (ra, rb) } else { (rb, ra) };
        self.parent[small] = big;
        self.parity[small] = rel;
        if self.rank[big] == self.rank[small] {
            self.rank[big] += 1;
        }
        true
    }
}

/// A vertical piece of a loop between two consecutive events at one site.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub site: usize,
    pub start: f64,
    pub end: f64,
    pub length: f64,
    pub component: usize,
    pub flipped: bool,
}

/// Space-time loops of a timeline.
///
/// In the periodic form time wraps around; in the open form every site has
/// a bottom end at `-beta/2` and a top end at `beta/2`.
#[derive(Clone, Debug)]
pub struct LoopDecomposition {
    pub beta: f64,
    pub open: bool,
    /// Number of connected components.
    pub count: usize,
    /// False if some component demands a spin to equal its own reverse.
    pub consistent: bool,
    site_times: Vec<Vec<f64>>,
    site_offset: Vec<usize>,
    component: Vec<usize>,
    flipped: Vec<bool>,
}

fn decompose(tl: &EventTimeline, open: bool) -> LoopDecomposition {
    let n = tl.nsites;
    let mut incident: Vec<Vec<(f64, usize, usize)>> = vec![Vec::new(); n];
    for (e, list) in tl.events.iter().enumerate() {
        let (a, b) = tl.edges[e];
        for (q, ev) in list.iter().enumerate() {
            incident[a].push((ev.time, e, q));
            incident[b].push((ev.time, e, q));
        }
    }
    let mut pos: Vec<Vec<[usize; 2]>> = tl.events.iter().map(|l| vec![[0, 0]; l.len()]).collect();
    let mut site_times = Vec::with_capacity(n);
    let mut site_offset = Vec::with_capacity(n + 1);
    let mut nseg = 0;
    for (s, inc) in incident.iter_mut().enumerate() {
        inc.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        for (p, &(_, e, q)) in inc.iter().enumerate() {
            let side = usize::from(tl.edges[e].0 != s);
            pos[e][q][side] = p;
        }
        site_times.push(inc.iter().map(|x| x.0).collect::<Vec<f64>>());
        site_offset.push(nseg);
        nseg += if open { inc.len() + 1 } else { inc.len().max(1) };
    }
    site_offset.push(nseg);
    let below = |s: usize, p: usize| -> usize {
        let k = site_times[s].len();
        if open {
            site_offset[s] + p
        } else {
            site_offset[s] + (p + k - 1) % k
        }
    };
    let above = |s: usize, p: usize| -> usize {
        if open {
            site_offset[s] + p + 1
        } else {
            site_offset[s] + p
        }
    };
    let mut uf = ParityUnionFind::new(nseg);
    let mut consistent = true;
    for (e, list) in tl.events.iter().enumerate() {
        let (a, b) = tl.edges[e];
        for (q, ev) in list.iter().enumerate() {
            let [pa, pb] = pos[e][q];
            let ok = match ev.kind {
                EventKind::Overpass => {
                    uf.union(below(a, pa), above(b, pb), false) & uf.union(below(b, pb), above(a, pa), false)
                }
                EventKind::CulDeSac => {
                    uf.union(below(a, pa), below(b, pb), true) & uf.union(above(a, pa), above(b, pb), true)
                }
            };
            consistent &= ok;
        }
    }
    let mut label = vec![usize::MAX; nseg];
    let mut component = vec![0; nseg];
    let mut flipped = vec![false; nseg];
    let mut count = 0;
    for x in 0..nseg {
        let (r, p) = uf.find(x);
        if label[r] == usize::MAX {
            label[r] = count;
            count += 1;
        }
        component[x] = label[r];
        flipped[x] = p;
    }
    LoopDecomposition {
        beta: tl.beta,
        open,
        count,
        consistent,
        site_times,
        site_offset,
        component,
        flipped,
    }
}

/// Loops of the periodic (trace) representation.
pub fn decompose_loops(tl: &EventTimeline) -> LoopDecomposition {
    decompose(tl, false)
}

/// Arcs of the open (matrix element) representation.
pub fn decompose_open(tl: &EventTimeline) -> LoopDecomposition {
    decompose(tl, true)
}

/// Number of consistent labelings, as a power of two or zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LabelCount {
    pub zero: bool,
    pub log2: usize,
}

impl LabelCount {
    pub fn ln(&self) -> f64 {
        if self.zero {
            f64::NEG_INFINITY
        } else {
            self.log2 as f64 * std::f64::consts::LN_2
        }
    }

    pub fn value(&self) -> f64 {
        if self.zero {
            0.0
        } else {
            2f64.powi(self.log2 as i32)
        }
    }
}

impl LoopDecomposition {
    pub fn num_sites(&self) -> usize {
        self.site_times.len()
    }

    pub fn num_segments(&self) -> usize {
        self.component.len()
    }

    fn segments_of(&self, site: usize) -> std::ops::Range<usize> {
        self.site_offset[site]..self.site_offset[site + 1]
    }

    /// Segment containing the space-time point `(site, t)`.
    pub fn segment_at(&self, site: usize, t: f64) -> usize {
        let times = &self.site_times[site];
        let p = times.partition_point(|&x| x <= t);
        let k = times.len();
        if self.open {
            self.site_offset[site] + p
        } else if k == 0 {
            self.site_offset[site]
        } else {
            self.site_offset[site] + (p + k - 1) % k
        }
    }

    /// Component and orientation of a segment.
    pub fn label_of(&self, segment: usize) -> (usize, bool) {
        (self.component[segment], self.flipped[segment])
    }

    pub fn segments(&self) -> Vec<Segment> {
        let half = self.beta / 2.0;
        let mut out = Vec::with_capacity(self.num_segments());
        for site in 0..self.num_sites() {
            let times = &self.site_times[site];
            let k = times.len();
            for (r, id) in self.segments_of(site).enumerate() {
                let (start, end, length) = if self.open {
                    let s = if r == 0 { -half } else { times[r - 1] };
                    let e = if r == k { half } else { times[r] };
                    (s, e, e - s)
                } else if k == 0 {
                    (-half, half, self.beta)
                } else if r + 1 < k {
                    (times[r], times[r + 1], times[r + 1] - times[r])
                } else {
                    (times[k - 1], times[0], self.beta - (times[k - 1] - times[0]))
                };
                out.push(Segment {
                    site,
                    start,
                    end,
                    length,
                    component: self.component[id],
                    flipped: self.flipped[id],
                });
            }
        }
        out
    }

    /// Segment indices grouped by component.
    pub fn loops(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count];
        for (s, &c) in self.component.iter().enumerate() {
            out[c].push(s);
        }
        out
    }

    /// Components crossing time `t` at `sites`, with the orientation of each crossing.
    pub fn crossings(&self, sites: &[usize], t: f64) -> Vec<(usize, usize, bool)> {
        sites
            .iter()
            .map(|&s| {
                let (c, f) = self.label_of(self.segment_at(s, t));
                (c, s, f)
            })
            .collect()
    }

    /// Counts labelings satisfying `spin(segment) = value` for every constraint.
    pub fn count_with(&self, constraints: impl IntoIterator<Item = (usize, bool)>) -> LabelCount {
        let mut required: Vec<Option<bool>> = vec![None; self.count];
        let mut fixed = 0;
        for (seg, up) in constraints {
            let (c, f) = self.label_of(seg);
            let want = up ^ f;
            match required[c] {
                None => {
                    required[c] = Some(want);
                    fixed += 1;
                }
                Some(w) if w != want => return LabelCount { zero: true, log2: 0 },
                _ => {}
            }
        }
        LabelCount {
            zero: !self.consistent,
            log2: self.count - fixed,
        }
    }

    /// Labelings of an open decomposition with `sigma` at the bottom and `tau` at the top.
    pub fn count_pinned(&self, sigma: &[bool], tau: &[bool]) -> LabelCount {
        let bottom = (0..self.num_sites()).map(|s| (self.site_offset[s], sigma[s]));
        let top = (0..self.num_sites()).map(|s| (self.site_offset[s + 1] - 1, tau[s]));
        self.count_with(bottom.chain(top))
    }
}

/// `|E(tau, omega)|`: labelings of the periodic loops with `tau` on the block at time 0.
pub fn count_consistent_labelings(decomp: &LoopDecomposition, block_sites: &[usize], tau: &[bool]) -> LabelCount {
    decomp.count_with(
        block_sites
            .iter()
            .zip(tau)
            .map(|(&s, &up)| (decomp.segment_at(s, 0.0), up)),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    LoopRatio,
    Kernel,
    Potential,
    Partition,
}

/// A Monte Carlo estimate with its jackknife standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfpEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
    pub method: Method,
}

fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Running `ln sum exp` with a max shift.
#[derive(Clone, Copy, Debug)]
struct LogAccumulator {
    max: f64,
    scaled: f64,
}

impl LogAccumulator {
    fn new() -> Self {
        LogAccumulator {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }

    fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            self.scaled = self.scaled * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.scaled += (x - self.max).exp();
        }
    }

    fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            self.max
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// Per-chain random generator: one ChaCha stream per chain index.
fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

/// Runs `CHAINS` chains; each sample returns `(ln numerator, ln denominator)`.
/// The ratio of sums is returned with a jackknife error over the chains.
fn ratio_estimate<F>(n_samples: usize, seed: u64, sample: F) -> Result<(f64, f64)>
where
    F: Fn(&mut ChaCha8Rng) -> Result<(f64, f64)> + Sync,
{
    if n_samples < 2 * CHAINS {
        return invalid(format!("need at least {} samples", 2 * CHAINS));
    }
    let sums: Vec<(f64, f64)> = (0..CHAINS)
        .into_par_iter()
        .map(|c| {
            let mut rng = chain_rng(seed, c);
            let count = n_samples / CHAINS + usize::from(c < n_samples % CHAINS);
            let mut num = LogAccumulator::new();
            let mut den = LogAccumulator::new();
            for _ in 0..count {
                let (a, b) = sample(&mut rng)?;
                num.add(a);
                den.add(b);
            }
            Ok((num.value(), den.value()))
        })
        .collect::<Result<Vec<_>>>()?;
    let ratio = |skip: Option<usize>| -> f64 {
        let keep = || sums.iter().enumerate().filter(|(i, _)| Some(*i) != skip);
        let n = log_sum_exp(keep().map(|(_, s)| s.0));
        let d = log_sum_exp(keep().map(|(_, s)| s.1));
        if n == f64::NEG_INFINITY {
            0.0
        } else {
            (n - d).exp()
        }
    };
    let value = ratio(None);
    let loo: Vec<f64> = (0..CHAINS).map(|i| ratio(Some(i))).collect();
    let mean = loo.iter().sum::<f64>() / CHAINS as f64;
    let b = CHAINS as f64;
    let var = (b - 1.0) / b * loo.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    Ok((value, var.sqrt()))
}

fn check_delta(delta: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&delta) {
        return invalid(format!(
            "|delta| = {} > 1 has no probabilistic loop representation; use the potential estimator",
            delta.abs()
        ));
    }
    Ok(())
}

/// EFP as `E_u[|E(1_L, omega)|] / E_u[2^{#loops}]`.
pub fn estimate_efp_mc(torus: &Torus, delta: f64, beta: f64, l: usize, n_samples: usize, seed: u64) -> Result<EfpEstimate> {
    check_delta(delta)?;
    let u = u_of_delta(delta);
    let blk = block(torus, l)?;
    let tau = vec![true; blk.members.len()];
    let (value, stderr) = ratio_estimate(n_samples, seed, |rng| {
        let tl = sample_timeline_with(torus, u, beta, rng)?;
        let d = decompose_loops(&tl);
        let num = count_consistent_labelings(&d, &blk.members, &tau);
        let den = LabelCount { zero: false, log2: d.count };
        Ok((num.ln(), den.ln()))
    })?;
    Ok(EfpEstimate {
        value,
        stderr,
        samples: n_samples,
        method: Method::LoopRatio,
    })
}

/// `tr e^{-beta H}` as `e^{beta |E|/4} E_u[2^{#loops}]`.
pub fn estimate_partition_mc(torus: &Torus, delta: f64, beta: f64, n_samples: usize, seed: u64) -> Result<EfpEstimate> {
    check_delta(delta)?;
    let u = u_of_delta(delta);
    let (mean, stderr) = ratio_estimate(n_samples, seed, |rng| {
        let tl = sample_timeline_with(torus, u, beta, rng)?;
        Ok((decompose_loops(&tl).count as f64 * std::f64::consts::LN_2, 0.0))
    })?;
    let pref = (beta * torus.num_edges() as f64 / 4.0).exp();
    Ok(EfpEstimate {
        value: pref * mean,
        stderr: pref * stderr,
        samples: n_samples,
        method: Method::Partition,
    })
}

/// `<Psi(tau), e^{-beta H} Psi(sigma)>` from the open arc decomposition.
pub fn estimate_kernel_mc(
    torus: &Torus,
    delta: f64,
    beta: f64,
    sigma: &[bool],
    tau: &[bool],
    n_samples: usize,
    seed: u64,
) -> Result<EfpEstimate> {
    check_delta(delta)?;
    if sigma.len() != torus.num_sites() || tau.len() != torus.num_sites() {
        return Err(Error::DimensionMismatch(sigma.len(), torus.num_sites()));
    }
    let u = u_of_delta(delta);
    let (mean, stderr) = ratio_estimate(n_samples, seed, |rng| {
        let tl = sample_timeline_with(torus, u, beta, rng)?;
        Ok((decompose_open(&tl).count_pinned(sigma, tau).ln(), 0.0))
    })?;
    let pref = (beta * torus.num_edges() as f64 / 4.0).exp();
    Ok(EfpEstimate {
        value: pref * mean,
        stderr: pref * stderr,
        samples: n_samples,
        method: Method::Kernel,
    })
}

/// Quadratic form of `int sum_{edges} s_i(t) s_j(t) dt` in the component labels:
/// constant part plus `(a, b, w)` terms meaning `w x_a x_b`.
pub fn overlap_form(tl: &EventTimeline, d: &LoopDecomposition) -> (f64, Vec<(usize, usize, f64)>) {
    let half = tl.beta / 2.0;
    let mut constant = 0.0;
    let mut pairs: std::collections::BTreeMap<(usize, usize), f64> = Default::default();
    for &(a, b) in &tl.edges {
        let mut cuts: Vec<f64> = d.site_times[a].iter().chain(&d.site_times[b]).copied().collect();
        cuts.push(-half);
        cuts.push(half);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        for w in cuts.windows(2) {
            let len = w[1] - w[0];
            if len <= 0.0 {
                continue;
            }
            let mid = 0.5 * (w[0] + w[1]);
            let (ca, fa) = d.label_of(d.segment_at(a, mid));
            let (cb, fb) = d.label_of(d.segment_at(b, mid));
            let sign = if fa ^ fb { -1.0 } else { 1.0 };
            if ca == cb {
                constant += sign * len;
            } else {
                *pairs.entry((ca.min(cb), ca.max(cb))).or_insert(0.0) += sign * len;
            }
        }
    }
    (constant, pairs.into_iter().map(|((a, b), w)| (a, b, w)).collect())
}

/// EFP for any real `delta` via the Feynman-Kac form over the `delta = 1`
/// (pure overpass) process: each labeling is weighted by
/// `exp(((1 - delta)/4) int U dt)` with `U = -sum_{edges} s_i s_j`.
pub fn estimate_efp_potential(torus: &Torus, delta: f64, beta: f64, l: usize, n_samples: usize, seed: u64) -> Result<EfpEstimate> {
    let blk = block(torus, l)?;
    let coupling = (1.0 - delta) / 4.0;
    let (value, stderr) = ratio_estimate(n_samples, seed, |rng| {
        let tl = sample_timeline_with(torus, 1.0, beta, rng)?;
        let d = decompose_loops(&tl);
        potential_sample(&tl, &d, &blk.members, coupling)
    })?;
    Ok(EfpEstimate {
        value,
        stderr,
        samples: n_samples,
        method: Method::Potential,
    })
}

/// `tr e^{-beta H}` through the Feynman-Kac weights of [`estimate_efp_potential`].
pub fn estimate_partition_potential(torus: &Torus, delta: f64, beta: f64, n_samples: usize, seed: u64) -> Result<EfpEstimate> {
    let coupling = (1.0 - delta) / 4.0;
    let (mean, stderr) = ratio_estimate(n_samples, seed, |rng| {
        let tl = sample_timeline_with(torus, 1.0, beta, rng)?;
        let d = decompose_loops(&tl);
        Ok((potential_sample(&tl, &d, &[], coupling)?.1, 0.0))
    })?;
    let pref = (beta * torus.num_edges() as f64 / 4.0).exp();
    Ok(EfpEstimate {
        value: pref * mean,
        stderr: pref * stderr,
        samples: n_samples,
        method: Method::Partition,
    })
}

/// `(ln numerator, ln denominator)` of one potential-estimator sample.
fn potential_sample(tl: &EventTimeline, d: &LoopDecomposition, block_sites: &[usize], coupling: f64) -> Result<(f64, f64)> {
    if d.count > MAX_LABELED_COMPONENTS {
        return invalid(format!(
            "{} loop components exceed the enumeration limit {MAX_LABELED_COMPONENTS}",
            d.count
        ));
    }
    let (constant, pairs) = overlap_form(tl, d);
    let mut forced: Vec<Option<bool>> = vec![None; d.count];
    let mut feasible = true;
    for (c, _, f) in d.crossings(block_sites, 0.0) {
        let want = !f;
        match forced[c] {
            None => forced[c] = Some(want),
            Some(w) if w != want => feasible = false,
            _ => {}
        }
    }
    let mut num = LogAccumulator::new();
    let mut den = LogAccumulator::new();
    for x in 0u64..(1u64 << d.count) {
        let up = |c: usize| x >> c & 1 == 1;
        let overlap: f64 = constant
            + pairs
                .iter()
                .map(|&(a, b, w)| if up(a) == up(b) { w } else { -w })
                .sum::<f64>();
        let lw = -coupling * overlap;
        den.add(lw);
        if feasible && forced.iter().enumerate().all(|(c, f)| f.is_none_or(|v| v == up(c))) {
            num.add(lw);
        }
    }
    Ok((num.value(), den.value()))
}

/// Deterministic cul-de-sac pattern forcing a dipole around the block `B_l`
/// of a one-dimensional torus. Edge `{k-1, k}` (relative to the dipole
/// centre) receives cul-de-sacs in the unit intervals
/// `(2t, 2t+1)` and `(-2t-1, -2t)` for even `k` with `|k| <= 2t <= l-1`, and
/// `(2t-1, 2t)` and `(-2t, -2t+1)` for odd `k` with `|k| <= 2t-1 <= l-1`,
/// for `|k| <= l-1`. The pattern is translated so that the block lies on the
/// left of the centre and its mirror image on the right.
pub fn build_event_g(torus: &Torus, l: usize, beta: f64) -> Result<EventTimeline> {
    if torus.dim() != 1 {
        return invalid("the dipole construction is one-dimensional");
    }
    if l == 0 {
        return invalid("block side must be positive");
    }
    if beta < 2.0 * l as f64 {
        return invalid(format!("beta = {beta} < 2l = {}", 2 * l));
    }
    if torus.side() < 2 * l {
        return invalid(format!("torus side {} < 2l = {}", torus.side(), 2 * l));
    }
    let mut tl = EventTimeline::empty(torus, beta);
    let shift = (l / 2) as i64 + 1;
    let li = l as i64;
    for k in -(li - 1)..=(li - 1) {
        let a = torus.site_at(&[k - 1 + shift]);
        let b = torus.site_at(&[k + shift]);
        let edge = tl
            .edges
            .iter()
            .position(|&e| e == (a.min(b), a.max(b)))
            .expect("nearest neighbours share an edge");
        for (lo, hi) in dipole_intervals(k, li) {
            tl.insert(
                edge,
                Event {
                    time: 0.5 * (lo + hi) as f64,
                    kind: EventKind::CulDeSac,
                },
            )?;
        }
    }
    Ok(tl)
}

fn dipole_intervals(k: i64, l: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    if k % 2 == 0 {
        let mut t = k.abs() / 2;
        while 2 * t < l {
            out.push((2 * t, 2 * t + 1));
            out.push((-2 * t - 1, -2 * t));
            t += 1;
        }
    } else {
        let mut t = (k.abs() + 1) / 2;
        while 2 * t - 1 < l {
            out.push((2 * t - 1, 2 * t));
            out.push((-2 * t, -2 * t + 1));
            t += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_torus;

    #[test]
    fn parity_union_find_detects_contradiction() {
        let mut uf = ParityUnionFind::new(3);
        assert!(uf.union(0, 1, true));
        assert!(uf.union(1, 2, true));
        assert!(uf.union(0, 2, false));
        assert!(!uf.union(0, 2, true));
    }

    #[test]
    fn log_accumulator_matches_direct_sum() {
        let xs = [0.3, -1.0, 5.0, f64::NEG_INFINITY, 2.0];
        let mut acc = LogAccumulator::new();
        xs.iter().for_each(|&x| acc.add(x));
        let direct: f64 = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((acc.value() - direct).abs() < 1e-12);
    }

    #[test]
    fn empty_timeline_has_one_loop_per_site() {
        let t = build_torus(1, 4).unwrap();
        let d = decompose_loops(&EventTimeline::empty(&t, 1.0));
        assert_eq!(d.count, 4);
    }

    #[test]
    fn dipole_interval_counts() {
        let l = 4;
        let total: usize = (-(l - 1)..=(l - 1)).map(|k| dipole_intervals(k, l).len()).sum();
        assert!(total > 0);
    }
}
