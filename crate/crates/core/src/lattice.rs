//! Periodic hypercubic lattices, sub-blocks, the universal contour and
//! the reflection geometry used by the chessboard and reflection-positivity
//! checks.
//!
//! Sites are the points of the coordinate box `{-n/2+1, ..., n/2}^d`,
//! enumerated in row-major order (last coordinate fastest). Site `k` is bit
//! `k` of every basis-state mask used elsewhere in the crate.

use std::collections::VecDeque;

use crate::error::{invalid, Result};

/// A `d`-dimensional discrete torus of even side `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Torus {
    d: usize,
    n: usize,
    coords: Vec<Vec<i64>>,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

/// Lower end of the coordinate range `{-ceil(m/2)+1, ..., floor(m/2)}`.
fn box_low(m: usize) -> i64 {
    -(m.div_ceil(2) as i64) + 1
}

/// Builds the torus of dimension `d` and side `n`.
pub fn build_torus(d: usize, n: usize) -> Result<Torus> {
    if d == 0 {
        return invalid("d must be at least 1");
    }
    if !n.is_multiple_of(2) {
        return invalid(format!("n must be even (got n = {n})"));
    }
    if n < 4 {
        return invalid(format!(
            "n must be at least 4 (got n = {n}); at n = 2 the wraparound edge duplicates the nearest-neighbour edge"
        ));
    }
    let nsites = n.checked_pow(d as u32).ok_or_else(|| {
        crate::error::Error::InvalidArgument(format!("n^d overflows for n = {n}, d = {d}"))
    })?;
    let lo = box_low(n);
    let coords: Vec<Vec<i64>> = (0..nsites)
        .map(|s| {
            let mut c = vec![0i64; d];
            let mut rest = s;
            for k in (0..d).rev() {
                c[k] = lo + (rest % n) as i64;
                rest /= n;
            }
            c
        })
        .collect();
    let mut torus = Torus {
        d,
        n,
        coords,
        edges: Vec::with_capacity(d * nsites),
        neighbors: vec![Vec::with_capacity(2 * d); nsites],
    };
    for s in 0..nsites {
        for k in 0..d {
            let t = torus.shift(s, k, 1);
            torus.edges.push((s.min(t), s.max(t)));
            torus.neighbors[s].push(t);
            torus.neighbors[t].push(s);
        }
    }
    Ok(torus)
}

impl Torus {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn num_sites(&self) -> usize {
        self.coords.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, site: usize) -> &[usize] {
        &self.neighbors[site]
    }

    /// Coordinates of `site` in the box `{-n/2+1, ..., n/2}^d`.
    pub fn coords(&self, site: usize) -> &[i64] {
        &self.coords[site]
    }

    /// Site index of a coordinate vector, reduced modulo `n`.
    pub fn site_at(&self, coords: &[i64]) -> usize {
        let lo = box_low(self.n);
        let n = self.n as i64;
        coords
            .iter()
            .fold(0usize, |acc, &x| acc * self.n + (x - lo).rem_euclid(n) as usize)
    }

    /// Moves `site` by `step` along axis `axis`, wrapping around.
    pub fn shift(&self, site: usize, axis: usize, step: i64) -> usize {
        let mut c = self.coords[site].clone();
        c[axis] += step;
        self.site_at(&c)
    }

    /// Dimension `2^{n^d}` of the spin-1/2 Hilbert space, if it fits in a `u64`.
    pub fn hilbert_dim(&self) -> Option<u64> {
        1u64.checked_shl(self.num_sites() as u32)
    }

    /// Proper two-colouring found by breadth-first search, or `None` if the
    /// graph is not bipartite.
    pub fn two_coloring(&self) -> Option<Vec<bool>> {
        let nsites = self.num_sites();
        let mut color: Vec<Option<bool>> = vec![None; nsites];
        for start in 0..nsites {
            if color[start].is_some() {
                continue;
            }
            color[start] = Some(false);
            let mut queue = VecDeque::from([start]);
            while let Some(s) = queue.pop_front() {
                let c = color[s].unwrap();
                for &t in &self.neighbors[s] {
                    match color[t] {
                        None => {
                            color[t] = Some(!c);
                            queue.push_back(t);
                        }
                        Some(ct) if ct == c => return None,
                        _ => {}
                    }
                }
            }
        }
        Some(color.into_iter().map(|c| c.unwrap()).collect())
    }

    /// Graph distance between every site and the nearest site of `sources`.
    pub fn distances_from(&self, sources: &[usize]) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.num_sites()];
        let mut queue = VecDeque::new();
        for &s in sources {
            if dist[s] != 0 {
                dist[s] = 0;
                queue.push_back(s);
            }
        }
        while let Some(s) = queue.pop_front() {
            for &t in &self.neighbors[s] {
                if dist[t] == usize::MAX {
                    dist[t] = dist[s] + 1;
                    queue.push_back(t);
                }
            }
        }
        dist
    }

    /// Coordinate of `site` along `axis`, shifted to `0..n`.
    pub fn offset_coord(&self, site: usize, axis: usize) -> usize {
        (self.coords[site][axis] - box_low(self.n)) as usize
    }

    /// Splits the sites by the reflection plane orthogonal to `axis`:
    /// the first half has shifted coordinate `< n/2`, the second `>= n/2`.
    pub fn reflection_halves(&self, axis: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.num_sites()).partition(|&s| self.offset_coord(s, axis) < self.n / 2)
    }

    /// Mirror image of `site` under `x -> n-1-x` along `axis` (shifted coordinates).
    pub fn reflect(&self, site: usize, axis: usize) -> usize {
        let shifted = self.offset_coord(site, axis);
        let mut c = self.coords[site].clone();
        c[axis] = box_low(self.n) + (self.n - 1 - shifted) as i64;
        self.site_at(&c)
    }
}

/// Spin configuration over the sites of a torus; `true` is spin up.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpinConfig {
    pub up: Vec<bool>,
}

impl SpinConfig {
    pub fn all_up(nsites: usize) -> Self {
        SpinConfig { up: vec![true; nsites] }
    }

    pub fn from_mask(mask: u64, nsites: usize) -> Self {
        SpinConfig {
            up: (0..nsites).map(|k| mask >> k & 1 == 1).collect(),
        }
    }

    /// Basis-state mask, available when there are at most 64 sites.
    pub fn mask(&self) -> Option<u64> {
        if self.up.len() > 64 {
            return None;
        }
        Some(
            self.up
                .iter()
                .enumerate()
                .fold(0u64, |m, (k, &u)| if u { m | 1 << k } else { m }),
        )
    }

    pub fn count_up(&self) -> usize {
        self.up.iter().filter(|&&u| u).count()
    }

    /// Spin value `+1` or `-1` at `site`.
    pub fn sign(&self, site: usize) -> i8 {
        if self.up[site] {
            1
        } else {
            -1
        }
    }
}

/// The box `B_l` viewed as a subset of the torus sites.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub l: usize,
    pub members: Vec<usize>,
    pub member_mask: Vec<bool>,
}

impl Block {
    /// Bit mask of the block sites, available when there are at most 64 sites.
    pub fn bits(&self) -> Option<u64> {
        if self.member_mask.len() > 64 {
            return None;
        }
        Some(self.members.iter().fold(0u64, |m, &s| m | 1 << s))
    }
}

/// The sub-box `{-ceil(l/2)+1, ..., floor(l/2)}^d` of the torus.
pub fn block(torus: &Torus, l: usize) -> Result<Block> {
    if l > torus.side() {
        return invalid(format!("block side {l} exceeds torus side {}", torus.side()));
    }
    let lo = box_low(l);
    let hi = lo + l as i64 - 1;
    let mut member_mask = vec![false; torus.num_sites()];
    let members: Vec<usize> = (0..torus.num_sites())
        .filter(|&s| torus.coords(s).iter().all(|&x| x >= lo && x <= hi))
        .collect();
    for &s in &members {
        member_mask[s] = true;
    }
    Ok(Block {
        l,
        members,
        member_mask,
    })
}

/// Sign `(-1)^{sum_k floor((2 i_k - 1) / (2l))}` of the universal contour at `site`.
pub fn contour_sign(torus: &Torus, l: usize, site: usize) -> i8 {
    let two_l = 2 * l as i64;
    let s: i64 = torus
        .coords(site)
        .iter()
        .map(|&x| (2 * x - 1).div_euclid(two_l))
        .sum();
    if s.rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

/// Cell label `(floor((2 i_k - 1) / (2l)))_k` of the block of the contour pattern containing `site`.
pub fn contour_cell(torus: &Torus, l: usize, site: usize) -> Vec<i64> {
    let two_l = 2 * l as i64;
    torus
        .coords(site)
        .iter()
        .map(|&x| (2 * x - 1).div_euclid(two_l))
        .collect()
}

/// The universal contour: blocks of side `l` with alternating sign.
pub fn universal_contour(torus: &Torus, l: usize) -> Result<SpinConfig> {
    if l == 0 {
        return invalid("contour block side must be positive");
    }
    if l > torus.side() / 2 {
        return invalid(format!(
            "contour block side {l} exceeds n/2 = {}",
            torus.side() / 2
        ));
    }
    Ok(SpinConfig {
        up: (0..torus.num_sites())
            .map(|s| contour_sign(torus, l, s) == 1)
            .collect(),
    })
}

/// Edges whose endpoints carry different signs in `config`.
pub fn disagreeing_edges(torus: &Torus, config: &SpinConfig) -> Vec<(usize, usize)> {
    torus
        .edges()
        .iter()
        .copied()
        .filter(|&(a, b)| config.up[a] != config.up[b])
        .collect()
}
