//! Six-vertex model on the torus `T_{n,t}` and its row-to-row transfer matrix.
//!
//! Edge spins are indexed `[i][j]` with `i` the column and `j` the row. The
//! vertex `(i, j)` has west edge `h[i-1][j]`, east edge `h[i][j]`, south edge
//! `v[i][j-1]` and north edge `v[i][j]`, all indices periodic. Horizontal `+1`
//! points right, vertical `+1` points up; the ice rule reads
//! `W - E + S - N = 0`.
//!
//! Vertex types follow the standard table: 1 is all `+`, 4 is all `-`,
//! 2 and 3 are the straight-through vertices with `W = E != S = N`, and
//! 5 (`W-, E+, S+, N-`) and 6 (`W+, E-, S-, N+`) are the turning vertices,
//! which carry the weight `e^kappa`.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exact::{build_hamiltonian, check_budget, SectorBasis};
use crate::lattice::{block, build_torus};

/// Largest ring handled by the matrix-free transfer.
pub const MAX_RING: usize = 20;
/// Largest ring for which dense `2^n x 2^n` matrices are built.
pub const MAX_DENSE_RING: usize = 12;
/// Largest `n * t` for exhaustive enumeration.
pub const MAX_ENUM_CELLS: usize = 24;
const POWER_TOL: f64 = 1e-13;
const POWER_MAX_ITER: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SixVertexConfig {
    pub n: usize,
    pub t: usize,
    pub h_spins: Vec<Vec<i8>>,
    pub v_spins: Vec<Vec<i8>>,
}

/// Ice-rule check outcome.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Validation {
    pub valid: bool,
    pub violations: usize,
    pub first_violation: Option<(usize, usize)>,
}

/// Type 1..6 of a vertex from its `(W, E, S, N)` spins.
pub fn classify(w: i8, e: i8, s: i8, n: i8) -> Option<u8> {
    match (w, e, s, n) {
        (1, 1, 1, 1) => Some(1),
        (-1, -1, 1, 1) => Some(2),
        (1, 1, -1, -1) => Some(3),
        (-1, -1, -1, -1) => Some(4),
        (-1, 1, 1, -1) => Some(5),
        (1, -1, -1, 1) => Some(6),
        _ => None,
    }
}

/// `(W, E, S, N)` spins of a vertex type.
pub fn type_spins(ty: u8) -> [i8; 4] {
    match ty {
        1 => [1, 1, 1, 1],
        2 => [-1, -1, 1, 1],
        3 => [1, 1, -1, -1],
        4 => [-1, -1, -1, -1],
        5 => [-1, 1, 1, -1],
        6 => [1, -1, -1, 1],
        _ => panic!("vertex type {ty} outside 1..=6"),
    }
}

impl SixVertexConfig {
    pub fn new(n: usize, t: usize, h_spins: Vec<Vec<i8>>, v_spins: Vec<Vec<i8>>) -> Result<Self> {
        let c = SixVertexConfig { n, t, h_spins, v_spins };
        c.check_shape()?;
        Ok(c)
    }

    /// All vertical spins up and all horizontal spins right.
    pub fn reference(n: usize, t: usize) -> Self {
        SixVertexConfig {
            n,
            t,
            h_spins: vec![vec![1; t]; n],
            v_spins: vec![vec![1; t]; n],
        }
    }

    /// Every spin reversed.
    pub fn reversed(&self) -> Self {
        let flip = |a: &Vec<Vec<i8>>| a.iter().map(|r| r.iter().map(|x| -x).collect()).collect();
        SixVertexConfig {
            n: self.n,
            t: self.t,
            h_spins: flip(&self.h_spins),
            v_spins: flip(&self.v_spins),
        }
    }

    fn check_shape(&self) -> Result<()> {
        let ok = |a: &Vec<Vec<i8>>| a.len() == self.n && a.iter().all(|r| r.len() == self.t);
        if !ok(&self.h_spins) || !ok(&self.v_spins) {
            return invalid(format!("spin arrays do not have shape {} x {}", self.n, self.t));
        }
        if self.h_spins.iter().chain(&self.v_spins).flatten().any(|&x| x != 1 && x != -1) {
            return invalid("spins must be +1 or -1");
        }
        Ok(())
    }

    /// `(W, E, S, N)` at vertex `(i, j)`.
    pub fn vertex_spins(&self, i: usize, j: usize) -> [i8; 4] {
        let (n, t) = (self.n, self.t);
        [
            self.h_spins[(i + n - 1) % n][j],
            self.h_spins[i][j],
            self.v_spins[i][(j + t - 1) % t],
            self.v_spins[i][j],
        ]
    }

    pub fn vertex_type(&self, i: usize, j: usize) -> Result<u8> {
        let [w, e, s, n] = self.vertex_spins(i, j);
        classify(w, e, s, n).ok_or_else(|| Error::InvalidArgument(format!("ice rule violated at vertex ({i}, {j})")))
    }

    pub fn validate(&self) -> Result<Validation> {
        self.check_shape()?;
        let mut violations = 0;
        let mut first = None;
        for j in 0..self.t {
            for i in 0..self.n {
                let [w, e, s, n] = self.vertex_spins(i, j);
                if w - e + s - n != 0 {
                    violations += 1;
                    first.get_or_insert((i, j));
                }
            }
        }
        Ok(Validation {
            valid: violations == 0,
            violations,
            first_violation: first,
        })
    }

    fn require_valid(&self) -> Result<()> {
        let v = self.validate()?;
        match v.first_violation {
            None => Ok(()),
            Some((i, j)) => invalid(format!("ice rule violated at vertex ({i}, {j})")),
        }
    }

    /// `m_ij`: 1 on turning vertices (types 5 and 6).
    pub fn turning(&self, i: usize, j: usize) -> Result<bool> {
        Ok(matches!(self.vertex_type(i, j)?, 5 | 6))
    }

    pub fn turning_count(&self) -> Result<usize> {
        let mut m = 0;
        for j in 0..self.t {
            for i in 0..self.n {
                m += usize::from(self.turning(i, j)?);
            }
        }
        Ok(m)
    }

    /// `ln W = kappa * #turning vertices`.
    pub fn log_weight(&self, kappa: f64) -> Result<f64> {
        Ok(kappa * self.turning_count()? as f64)
    }

    pub fn weight(&self, kappa: f64) -> Result<f64> {
        Ok(self.log_weight(kappa)?.exp())
    }

    /// Vertical spins of row `j` as a bit mask (bit `i` set for `+`).
    pub fn row_mask(&self, j: usize) -> u64 {
        (0..self.n).filter(|&i| self.v_spins[i][j] == 1).fold(0, |m, i| m | 1 << i)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: SixVertexConfig = serde_json::from_str(text)?;
        c.check_shape()?;
        Ok(c)
    }
}

pub fn validate_config(config: &SixVertexConfig) -> Result<Validation> {
    config.validate()
}

/// `Delta = 1 - e^{2 kappa} / 2`.
pub fn delta_of_kappa(kappa: f64) -> f64 {
    1.0 - (2.0 * kappa).exp() / 2.0
}

/// Inverse of [`delta_of_kappa`], defined for `Delta < 1`.
pub fn kappa_of_delta(delta: f64) -> Result<f64> {
    if delta.is_nan() || delta >= 1.0 {
        return invalid(format!("Delta = {delta} has no six-vertex counterpart (needs Delta < 1)"));
    }
    Ok((2.0 * (1.0 - delta)).ln() / 2.0)
}

fn check_ring(n: usize, max: usize) -> Result<()> {
    if n < 4 || !n.is_multiple_of(2) {
        return invalid(format!("ring length must be even and at least 4 (got n = {n})"));
    }
    if n > max {
        return invalid(format!("ring length {n} exceeds the limit {max}"));
    }
    Ok(())
}

/// `A[sigma][sigma']`: 2 on the diagonal; `e^{kappa |D|}` when the spins of
/// `sigma` on the set `D` where the rows differ alternate around the ring.
pub fn transfer_entry(n: usize, kappa: f64, sigma: u64, sigma_p: u64) -> f64 {
    let d = sigma ^ sigma_p;
    if d == 0 {
        return 2.0;
    }
    let sites: Vec<usize> = (0..n).filter(|&i| d >> i & 1 == 1).collect();
    if !sites.len().is_multiple_of(2) {
        return 0.0;
    }
    let alternates = sites
        .iter()
        .zip(sites.iter().cycle().skip(1))
        .all(|(&a, &b)| (sigma >> a & 1) != (sigma >> b & 1));
    if alternates {
        (kappa * sites.len() as f64).exp()
    } else {
        0.0
    }
}

/// `y = A_{n,kappa} x` without materializing `A`.
///
/// The sweep carries the current horizontal spin: a site either keeps its
/// vertical spin (horizontal spin unchanged) or flips it, which requires the
/// incoming horizontal spin to oppose the lower vertical spin and reverses it.
pub fn apply_transfer(x: &[f64], n: usize, kappa: f64) -> Result<Vec<f64>> {
    check_ring(n, MAX_RING)?;
    let dim = 1usize << n;
    if x.len() != dim {
        return Err(Error::DimensionMismatch(x.len(), dim));
    }
    let ek = kappa.exp();
    let mut y = vec![0.0; dim];
    for tau0 in [false, true] {
        let mut cur = [vec![0.0; dim], vec![0.0; dim]];
        cur[usize::from(tau0)].copy_from_slice(x);
        for i in 0..n {
            let bit = 1usize << i;
            let mut next = cur.clone();
            for s in 0..dim {
                let up = s & bit != 0;
                next[usize::from(up)][s] += ek * cur[usize::from(!up)][s ^ bit];
            }
            cur = next;
        }
        for (yi, ci) in y.iter_mut().zip(&cur[usize::from(tau0)]) {
            *yi += ci;
        }
    }
    Ok(y)
}

/// Dense transfer matrix on the full `2^n` space.
pub fn transfer_matrix(n: usize, kappa: f64) -> Result<DMatrix<f64>> {
    check_ring(n, MAX_DENSE_RING)?;
    let dim = 1usize << n;
    check_budget((dim as u128).pow(2) * 8)?;
    Ok(DMatrix::from_fn(dim, dim, |a, b| transfer_entry(n, kappa, a as u64, b as u64)))
}

/// Transfer matrix restricted to the sector of magnetization `m2 / 2`.
pub fn transfer_sector(n: usize, kappa: f64, m2: i64) -> Result<(SectorBasis, DMatrix<f64>)> {
    check_ring(n, MAX_RING)?;
    let basis = SectorBasis::new(n, m2)?;
    let k = basis.len();
    check_budget((k as u128).pow(2) * 8)?;
    let m = DMatrix::from_fn(k, k, |a, b| transfer_entry(n, kappa, basis.states[a], basis.states[b]));
    Ok((basis, m))
}

/// Calls `visit` on every valid configuration of `T_{n,t}`.
pub fn for_each_config(n: usize, t: usize, mut visit: impl FnMut(&SixVertexConfig)) -> Result<()> {
    check_ring(n, MAX_RING)?;
    if t < 1 {
        return invalid("need at least one row");
    }
    if n * t > MAX_ENUM_CELLS {
        return invalid(format!("n * t = {} exceeds the enumeration limit {MAX_ENUM_CELLS}", n * t));
    }
    let mut c = SixVertexConfig::reference(n, t);
    for top in 0u64..1 << n {
        for i in 0..n {
            c.v_spins[i][t - 1] = if top >> i & 1 == 1 { 1 } else { -1 };
        }
        fill_row(&mut c, 0, &mut visit);
    }
    Ok(())
}

fn fill_row(c: &mut SixVertexConfig, j: usize, visit: &mut impl FnMut(&SixVertexConfig)) {
    if j == c.t {
        visit(c);
        return;
    }
    for w0 in [1i8, -1] {
        c.h_spins[c.n - 1][j] = w0;
        fill_vertex(c, 0, j, w0, visit);
    }
}

fn fill_vertex(c: &mut SixVertexConfig, i: usize, j: usize, w: i8, visit: &mut impl FnMut(&SixVertexConfig)) {
    let (n, t) = (c.n, c.t);
    if i == n {
        if w == c.h_spins[n - 1][j] {
            fill_row(c, j + 1, visit);
        }
        return;
    }
    let s = c.v_spins[i][(j + t - 1) % t];
    let choices: &[i8] = if j == t - 1 { &[0] } else { &[1, -1] };
    for &choice in choices {
        let north = if j == t - 1 { c.v_spins[i][j] } else { choice };
        let e = w + s - north;
        if e != 1 && e != -1 {
            continue;
        }
        if j != t - 1 {
            c.v_spins[i][j] = north;
        }
        let saved = c.h_spins[i][j];
        if i + 1 < n {
            c.h_spins[i][j] = e;
        }
        fill_vertex(c, i + 1, j, e, visit);
        c.h_spins[i][j] = saved;
    }
}

pub fn enumerate_configs(n: usize, t: usize) -> Result<Vec<SixVertexConfig>> {
    let mut out = Vec::new();
    for_each_config(n, t, |c| out.push(c.clone()))?;
    Ok(out)
}

/// `Z = sum over configurations of e^{kappa m}` by enumeration.
pub fn brute_force_partition(n: usize, t: usize, kappa: f64) -> Result<f64> {
    let mut z = 0.0;
    for_each_config(n, t, |c| z += c.weight(kappa).expect("enumerated configs are valid"))?;
    Ok(z)
}

/// `tr(A^t)` through repeated matrix-free application.
pub fn transfer_trace_power(n: usize, t: usize, kappa: f64) -> Result<f64> {
    check_ring(n, MAX_DENSE_RING)?;
    let dim = 1usize << n;
    let mut tr = 0.0;
    for s in 0..dim {
        let mut x = vec![0.0; dim];
        x[s] = 1.0;
        for _ in 0..t {
            x = apply_transfer(&x, n, kappa)?;
        }
        tr += x[s];
    }
    Ok(tr)
}

/// Perron eigenpair of `A` in one magnetization sector.
#[derive(Clone, Debug)]
pub struct SectorEigen {
    pub eigenvalue: f64,
    pub vector: Vec<f64>,
    pub basis: SectorBasis,
    pub iterations: usize,
}

/// Top eigenpair of `A_{n,kappa}` in sector `m2` by power iteration.
pub fn sector_top_eigenvector(n: usize, kappa: f64, m2: i64) -> Result<SectorEigen> {
    check_ring(n, MAX_RING)?;
    let basis = SectorBasis::new(n, m2)?;
    let k = basis.len();
    let dim = 1usize << n;
    let apply = |v: &[f64]| -> Result<Vec<f64>> {
        let mut full = vec![0.0; dim];
        for (a, &s) in basis.states.iter().enumerate() {
            full[s as usize] = v[a];
        }
        let y = apply_transfer(&full, n, kappa)?;
        Ok(basis.states.iter().map(|&s| y[s as usize]).collect())
    };
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut v = vec![1.0 / (k as f64).sqrt(); k];
    for it in 1..=POWER_MAX_ITER {
        let w = apply(&v)?;
        let lambda: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let resid = norm(&v.iter().zip(&w).map(|(a, b)| b - lambda * a).collect::<Vec<_>>());
        let nw = norm(&w);
        v = w.iter().map(|x| x / nw).collect();
        if resid <= POWER_TOL * lambda.abs() {
            let av = apply(&v)?;
            let eigenvalue = v.iter().zip(&av).map(|(a, b)| a * b).sum();
            return Ok(SectorEigen {
                eigenvalue,
                vector: v,
                basis,
                iterations: it,
            });
        }
    }
    Err(Error::NotConverged(format!(
        "power iteration in sector m2 = {m2} did not converge in {POWER_MAX_ITER} steps"
    )))
}

/// `||[A_{n,kappa}, H_{n,delta}]||_F`.
pub fn commutator_residual(n: usize, kappa: f64, delta: f64) -> Result<f64> {
    let a = transfer_matrix(n, kappa)?;
    let h = build_hamiltonian(&build_torus(1, n)?, delta)?.to_dense()?;
    Ok((&a * &h - &h * &a).norm())
}

/// Commutator norm at the matched anisotropy `Delta(kappa)`.
pub fn sutherland_check(n: usize, kappa: f64) -> Result<f64> {
    commutator_residual(n, kappa, delta_of_kappa(kappa))
}

fn block_bits(n: usize, l: usize) -> Result<u64> {
    if l > n {
        return invalid(format!("block length {l} exceeds ring length {n}"));
    }
    Ok(block(&build_torus(1, n)?, l)?.bits().expect("ring fits in a mask"))
}

/// Ground-sector EFP from the Perron vector of the transfer matrix.
pub fn efp_sixvertex(n: usize, kappa: f64, m2: i64, l: usize) -> Result<f64> {
    let bits = block_bits(n, l)?;
    let eig = sector_top_eigenvector(n, kappa, m2)?;
    let norm2: f64 = eig.vector.iter().map(|x| x * x).sum();
    let hit: f64 = eig
        .basis
        .states
        .iter()
        .zip(&eig.vector)
        .filter(|(&s, _)| s & bits == bits)
        .map(|(_, x)| x * x)
        .sum();
    Ok(hit / norm2)
}

/// Finite-`t` analogue: `sum_{sigma in block-up} (A^t)[sigma][sigma] / tr A^t` in one sector.
pub fn efp_finite_t(n: usize, kappa: f64, m2: i64, l: usize, t: usize) -> Result<f64> {
    let bits = block_bits(n, l)?;
    let (basis, a) = transfer_sector(n, kappa, m2)?;
    let mut p = DMatrix::identity(basis.len(), basis.len());
    for _ in 0..t {
        p = &p * &a;
        let m = p.amax();
        p /= m;
    }
    let tr = p.trace();
    let hit: f64 = basis
        .states
        .iter()
        .enumerate()
        .filter(|(_, &s)| s & bits == bits)
        .map(|(a, _)| p[(a, a)])
        .sum();
    Ok(hit / tr)
}

/// Violations of the row/column structure of a valid configuration.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StructureReport {
    /// Rows (`true`) or columns (`false`) where turning vertices of the same type are adjacent.
    pub alternation_violations: Vec<(bool, usize)>,
    /// `(row, start, length)` windows whose down-spin count jumps by more than 1 to the next row.
    pub window_violations: Vec<(usize, usize, usize)>,
    pub rows_checked: usize,
    pub windows_checked: usize,
}

impl StructureReport {
    pub fn passed(&self) -> bool {
        self.alternation_violations.is_empty() && self.window_violations.is_empty()
    }
}

fn alternates(types: &[u8]) -> bool {
    let turning: Vec<u8> = types.iter().copied().filter(|&x| x == 5 || x == 6).collect();
    turning.is_empty()
        || turning
            .iter()
            .zip(turning.iter().cycle().skip(1))
            .all(|(a, b)| a != b)
}

/// Checks cyclic alternation of types 5 and 6 along every row and column,
/// and that the number of down spins in any window of vertical edges changes
/// by at most one between consecutive rows.
pub fn row_structure_checks(config: &SixVertexConfig) -> Result<StructureReport> {
    config.require_valid()?;
    let (n, t) = (config.n, config.t);
    let mut rep = StructureReport::default();
    let mut types = vec![vec![0u8; t]; n];
    for (i, col) in types.iter_mut().enumerate() {
        for (j, ty) in col.iter_mut().enumerate() {
            *ty = config.vertex_type(i, j)?;
        }
    }
    for j in 0..t {
        let row: Vec<u8> = (0..n).map(|i| types[i][j]).collect();
        if !alternates(&row) {
            rep.alternation_violations.push((true, j));
        }
    }
    for (i, col) in types.iter().enumerate() {
        if !alternates(col) {
            rep.alternation_violations.push((false, i));
        }
    }
    for j in 0..t {
        let next = (j + 1) % t;
        for len in 1..=n {
            for start in 0..n {
                let down = |r: usize| (0..len).filter(|k| config.v_spins[(start + k) % n][r] == -1).count() as i64;
                rep.windows_checked += 1;
                if (down(j) - down(next)).abs() > 1 {
                    rep.window_violations.push((j, start, len));
                }
            }
        }
        rep.rows_checked += 1;
    }
    Ok(rep)
}

/// Horizontal spins of one row given the vertical rows below and above.
/// `None` if no consistent row exists; `choice` picks the sign when the rows agree.
pub fn horizontal_row(n: usize, below: u64, above: u64, choice: bool) -> Option<Vec<i8>> {
    let d = below ^ above;
    if d == 0 {
        return Some(vec![if choice { 1 } else { -1 }; n]);
    }
    let spin = |i: usize| if below >> i & 1 == 1 { 1i8 } else { -1 };
    let last = (0..n).rev().find(|&i| d >> i & 1 == 1)?;
    let mut cur = spin(last);
    let mut row = vec![0; n];
    for (i, slot) in row.iter_mut().enumerate() {
        if d >> i & 1 == 1 {
            if cur != -spin(i) {
                return None;
            }
            cur = spin(i);
        }
        *slot = cur;
    }
    Some(row)
}

/// Exact sampler for the Gibbs measure `prop. e^{kappa m}` on `T_{n,t}`,
/// optionally restricted to vertical rows of magnetization `m2 / 2`.
///
/// Rows are drawn one at a time from the conditional law given the previous
/// row and the last row, using precomputed (rescaled) powers of `A`.
#[derive(Clone, Debug)]
pub struct TorusSampler {
    n: usize,
    t: usize,
    states: Vec<u64>,
    a: DMatrix<f64>,
    powers: Vec<DMatrix<f64>>,
}

impl TorusSampler {
    pub fn new(n: usize, t: usize, kappa: f64, m2: Option<i64>) -> Result<Self> {
        if t < 2 {
            return invalid("need at least two rows");
        }
        let states: Vec<u64> = match m2 {
            Some(m2) => {
                check_ring(n, MAX_RING)?;
                SectorBasis::new(n, m2)?.states
            }
            None => {
                check_ring(n, MAX_DENSE_RING)?;
                (0..1u64 << n).collect()
            }
        };
        let k = states.len();
        check_budget((k as u128).pow(2) * 8 * (t as u128 + 2))?;
        let a = DMatrix::from_fn(k, k, |x, y| transfer_entry(n, kappa, states[x], states[y]));
        let mut powers = Vec::with_capacity(t + 1);
        let mut p = DMatrix::identity(k, k);
        powers.push(p.clone());
        for _ in 0..t {
            p = &p * &a;
            let m = p.amax();
            p /= m;
            powers.push(p.clone());
        }
        Ok(TorusSampler { n, t, states, a, powers })
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> SixVertexConfig {
        let (n, t, k) = (self.n, self.t, self.states.len());
        let pick = |w: &[f64], rng: &mut R| -> usize {
            let total: f64 = w.iter().sum();
            let mut r = rng.random::<f64>() * total;
            for (idx, &x) in w.iter().enumerate() {
                if r < x {
                    return idx;
                }
                r -= x;
            }
            w.iter().rposition(|&x| x > 0.0).expect("positive weight")
        };
        let mut rows = vec![0usize; t];
        let diag: Vec<f64> = (0..k).map(|s| self.powers[t][(s, s)]).collect();
        let last = pick(&diag, rng);
        rows[t - 1] = last;
        let mut prev = last;
        for j in 0..t - 1 {
            let rest = &self.powers[t - 1 - j];
            let w: Vec<f64> = (0..k).map(|s| self.a[(prev, s)] * rest[(s, last)]).collect();
            rows[j] = pick(&w, rng);
            prev = rows[j];
        }
        let mut c = SixVertexConfig::reference(n, t);
        for (j, &r) in rows.iter().enumerate() {
            let mask = self.states[r];
            for i in 0..n {
                c.v_spins[i][j] = if mask >> i & 1 == 1 { 1 } else { -1 };
            }
        }
        for j in 0..t {
            let below = self.states[rows[(j + t - 1) % t]];
            let above = self.states[rows[j]];
            let h = horizontal_row(n, below, above, rng.random::<bool>()).expect("sampled rows are compatible");
            for i in 0..n {
                c.h_spins[i][j] = h[i];
            }
        }
        c
    }
}

/// One exact sample; see [`TorusSampler`].
pub fn sample_torus_config<R: Rng>(n: usize, t: usize, kappa: f64, m2: Option<i64>, rng: &mut R) -> Result<SixVertexConfig> {
    Ok(TorusSampler::new(n, t, kappa, m2)?.sample(rng))
}
