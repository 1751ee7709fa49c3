//! Exact linear algebra on the spin-1/2 Hilbert space of a torus.
//!
//! Basis states are bit masks over the torus sites (bit set means spin up).
//! Every operator built here is real in this basis. Thermal traces use the
//! spectral decomposition of each magnetization sector; sector ground states
//! use dense diagonalization for small sectors and Lanczos otherwise.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Error, Result};
use crate::lattice::{block, universal_contour, Torus};

pub use crate::lattice::SpinConfig;

/// Largest dimension stored as a dense matrix.
pub const DENSE_MAX_DIM: usize = 4096;
/// Largest sector diagonalized densely by the ground-state solver.
pub const DENSE_SECTOR_MAX: usize = 2500;
/// Gap below which a ground state is reported as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;
/// Tolerance of the Hermiticity check.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Largest number of sites handled by the exact engine.
pub const MAX_SITES: usize = 24;

static MEMORY_BUDGET: AtomicU64 = AtomicU64::new(1 << 31);

/// Current memory budget in bytes for dense allocations.
pub fn memory_budget() -> u64 {
    MEMORY_BUDGET.load(Ordering::Relaxed)
}

pub fn set_memory_budget(bytes: u64) {
    MEMORY_BUDGET.store(bytes, Ordering::Relaxed);
}

pub(crate) fn check_budget(required_bytes: u128) -> Result<()> {
    let budget = memory_budget() as u128;
    if required_bytes > budget {
        return Err(Error::Budget {
            required_bytes,
            budget_bytes: budget,
        });
    }
    Ok(())
}

/// Compressed sparse row storage.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub dim: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row entries; entries within a row are sorted and merged.
    pub fn from_rows(dim: usize, rows: impl IntoIterator<Item = Vec<(usize, f64)>>) -> Self {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let start = cols.len();
            for (c, v) in row {
                if cols.len() > start && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        assert_eq!(row_ptr.len(), dim + 1, "row count must equal dim");
        CsrMatrix {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        check_budget((self.dim as u128).pow(2) * 8)?;
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        Ok(m)
    }
}

/// A real operator on `2^{sites}` states.
#[derive(Clone, Debug, PartialEq)]
pub enum OperatorMatrix {
    Dense(DMatrix<f64>),
    Sparse(CsrMatrix),
    Diagonal(Vec<f64>),
}

impl OperatorMatrix {
    pub fn identity(dim: usize) -> Self {
        OperatorMatrix::Diagonal(vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        match self {
            OperatorMatrix::Dense(m) => m.nrows(),
            OperatorMatrix::Sparse(m) => m.dim,
            OperatorMatrix::Diagonal(d) => d.len(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            OperatorMatrix::Dense(m) => m[(i, j)],
            OperatorMatrix::Sparse(m) => m.get(i, j),
            OperatorMatrix::Diagonal(d) => {
                if i == j {
                    d[i]
                } else {
                    0.0
                }
            }
        }
    }

    /// Nonzero entries of row `i`.
    pub fn row_entries(&self, i: usize) -> Vec<(usize, f64)> {
        match self {
            OperatorMatrix::Dense(m) => (0..m.ncols())
                .filter_map(|j| {
                    let v = m[(i, j)];
                    (v != 0.0).then_some((j, v))
                })
                .collect(),
            OperatorMatrix::Sparse(m) => m.row(i).filter(|e| e.1 != 0.0).collect(),
            OperatorMatrix::Diagonal(d) => {
                if d[i] != 0.0 {
                    vec![(i, d[i])]
                } else {
                    vec![]
                }
            }
        }
    }

    pub fn is_diagonal(&self) -> bool {
        match self {
            OperatorMatrix::Diagonal(_) => true,
            _ => (0..self.dim()).all(|i| self.row_entries(i).iter().all(|&(j, _)| j == i)),
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        match self {
            OperatorMatrix::Dense(m) => (m * DVector::from_column_slice(x)).as_slice().to_vec(),
            OperatorMatrix::Sparse(m) => m.matvec(x),
            OperatorMatrix::Diagonal(d) => d.iter().zip(x).map(|(a, b)| a * b).collect(),
        }
    }

    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        match self {
            OperatorMatrix::Dense(m) => Ok(m.clone()),
            OperatorMatrix::Sparse(m) => m.to_dense(),
            OperatorMatrix::Diagonal(d) => {
                check_budget((d.len() as u128).pow(2) * 8)?;
                Ok(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
            }
        }
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        match self {
            OperatorMatrix::Diagonal(_) => 0.0,
            OperatorMatrix::Dense(m) => (m - m.transpose()).amax(),
            OperatorMatrix::Sparse(m) => (0..m.dim)
                .flat_map(|i| m.row(i).map(move |(j, v)| (i, j, v)))
                .map(|(i, j, v)| (v - m.get(j, i)).abs())
                .fold(0.0, f64::max),
        }
    }

    /// True when every nonzero entry connects states of equal magnetization.
    pub fn conserves_magnetization(&self) -> bool {
        (0..self.dim()).all(|i| {
            self.row_entries(i)
                .iter()
                .all(|&(j, _)| (i as u64).count_ones() == (j as u64).count_ones())
        })
    }

    /// Restriction to the states listed in `states` (sorted), as a dense matrix.
    pub fn restrict(&self, states: &[u64]) -> Result<DMatrix<f64>> {
        let m = states.len();
        check_budget((m as u128).pow(2) * 8)?;
        let mut out = DMatrix::zeros(m, m);
        for (a, &s) in states.iter().enumerate() {
            for (j, v) in self.row_entries(s as usize) {
                if let Ok(b) = states.binary_search(&(j as u64)) {
                    out[(a, b)] = v;
                }
            }
        }
        Ok(out)
    }

    /// Restriction to `states` in sparse form.
    pub fn restrict_sparse(&self, states: &[u64]) -> CsrMatrix {
        CsrMatrix::from_rows(
            states.len(),
            states.iter().map(|&s| {
                self.row_entries(s as usize)
                    .into_iter()
                    .filter_map(|(j, v)| states.binary_search(&(j as u64)).ok().map(|b| (b, v)))
                    .collect::<Vec<_>>()
            }),
        )
    }
}

fn check_sites(nsites: usize) -> Result<usize> {
    // One state vector of the full space is the smallest object the engine builds.
    if nsites > MAX_SITES {
        return Err(Error::Budget {
            required_bytes: 8u128 << nsites,
            budget_bytes: 8u128 << MAX_SITES,
        });
    }
    Ok(1usize << nsites)
}

/// Nonzero entries of row `state` of the XXZ Hamiltonian on `edges`.
fn xxz_row(state: u64, edges: &[(usize, usize)], delta: f64) -> Vec<(usize, f64)> {
    let mut diag = 0.0;
    let mut row = Vec::with_capacity(edges.len() + 1);
    for &(a, b) in edges {
        let same = (state >> a & 1) == (state >> b & 1);
        if same {
            diag -= delta / 4.0;
        } else {
            diag += delta / 4.0;
            row.push(((state ^ (1 << a) ^ (1 << b)) as usize, -0.5));
        }
    }
    row.push((state as usize, diag));
    row
}

/// `-sum_{edges} (Sx Sx + Sy Sy + delta Sz Sz)` on an arbitrary edge list.
pub fn xxz_on_edges(nsites: usize, edges: &[(usize, usize)], delta: f64) -> Result<OperatorMatrix> {
    let dim = check_sites(nsites)?;
    if dim <= DENSE_MAX_DIM {
        check_budget((dim as u128).pow(2) * 8)?;
        let mut m = DMatrix::zeros(dim, dim);
        for s in 0..dim {
            for (j, v) in xxz_row(s as u64, edges, delta) {
                m[(s, j)] += v;
            }
        }
        Ok(OperatorMatrix::Dense(m))
    } else {
        check_budget(dim as u128 * (edges.len() as u128 + 1) * 16)?;
        Ok(OperatorMatrix::Sparse(CsrMatrix::from_rows(
            dim,
            (0..dim).map(|s| xxz_row(s as u64, edges, delta)),
        )))
    }
}

/// The XXZ Hamiltonian of the torus.
pub fn build_hamiltonian(torus: &Torus, delta: f64) -> Result<OperatorMatrix> {
    xxz_on_edges(torus.num_sites(), torus.edges(), delta)
}

/// Projector onto all spins up in the block `B_l`.
pub fn projector_q(torus: &Torus, l: usize) -> Result<OperatorMatrix> {
    let dim = check_sites(torus.num_sites())?;
    check_budget(dim as u128 * 8)?;
    let bits = block(torus, l)?.bits().unwrap();
    Ok(OperatorMatrix::Diagonal(
        (0..dim as u64)
            .map(|s| if s & bits == bits { 1.0 } else { 0.0 })
            .collect(),
    ))
}

/// Rank-one projector onto the universal contour configuration.
pub fn projector_contour(torus: &Torus, l: usize) -> Result<OperatorMatrix> {
    let dim = check_sites(torus.num_sites())?;
    check_budget(dim as u128 * 8)?;
    let mask = universal_contour(torus, l)?.mask().unwrap();
    let mut d = vec![0.0; dim];
    d[mask as usize] = 1.0;
    Ok(OperatorMatrix::Diagonal(d))
}

/// Total `S^z` as a diagonal operator.
pub fn spin_z_total(nsites: usize) -> Result<OperatorMatrix> {
    let dim = check_sites(nsites)?;
    Ok(OperatorMatrix::Diagonal(
        (0..dim as u64)
            .map(|s| s.count_ones() as f64 - nsites as f64 / 2.0)
            .collect(),
    ))
}

/// `S^z` at one site.
pub fn spin_z(nsites: usize, site: usize) -> Result<OperatorMatrix> {
    let dim = check_sites(nsites)?;
    Ok(OperatorMatrix::Diagonal(
        (0..dim as u64)
            .map(|s| if s >> site & 1 == 1 { 0.5 } else { -0.5 })
            .collect(),
    ))
}

/// `S^x` at one site.
pub fn spin_x(nsites: usize, site: usize) -> Result<OperatorMatrix> {
    let dim = check_sites(nsites)?;
    Ok(OperatorMatrix::Sparse(CsrMatrix::from_rows(
        dim,
        (0..dim).map(|s| vec![(s ^ (1 << site), 0.5)]),
    )))
}

/// Frobenius norm of `AB - BA`.
pub fn commutator_norm(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    if let (OperatorMatrix::Diagonal(_), OperatorMatrix::Diagonal(_)) = (a, b) {
        return Ok(0.0);
    }
    let (da, db) = (a.to_dense()?, b.to_dense()?);
    Ok((&da * &db - &db * &da).norm())
}

/// States of `nsites` spins with total `2 S^z = m2`, in increasing mask order.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorBasis {
    pub nsites: usize,
    pub m2: i64,
    pub states: Vec<u64>,
}

impl SectorBasis {
    pub fn new(nsites: usize, m2: i64) -> Result<Self> {
        check_sites(nsites)?;
        let n = nsites as i64;
        if m2.abs() > n || (m2 + n) % 2 != 0 {
            return invalid(format!("no sector with 2Sz = {m2} on {nsites} sites"));
        }
        let k = ((m2 + n) / 2) as u32;
        Ok(SectorBasis {
            nsites,
            m2,
            states: states_with_popcount(nsites, k),
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, state: u64) -> Option<usize> {
        self.states.binary_search(&state).ok()
    }
}

/// All `nsites`-bit masks with `k` bits set, ascending (Gosper's hack).
pub fn states_with_popcount(nsites: usize, k: u32) -> Vec<u64> {
    if k == 0 {
        return vec![0];
    }
    if k as usize > nsites {
        return vec![];
    }
    let limit = 1u64 << nsites;
    let mut out = Vec::new();
    let mut s: u64 = (1u64 << k) - 1;
    while s < limit {
        out.push(s);
        let c = s & s.wrapping_neg();
        let r = s + c;
        s = (((r ^ s) >> 2) / c) | r;
    }
    out
}

/// Eigen-decomposition of one invariant block of a Hamiltonian.
#[derive(Clone, Debug)]
pub struct SpectralBlock {
    pub states: Vec<u64>,
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

/// Full spectral decomposition, split into magnetization sectors when the
/// operator conserves `S^z`.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub dim: usize,
    pub blocks: Vec<SpectralBlock>,
}

/// Diagonalizes a Hermitian operator.
pub fn spectrum(h: &OperatorMatrix) -> Result<Spectrum> {
    let asym = h.max_asymmetry();
    if asym > HERMITIAN_TOL {
        return Err(Error::NotHermitian(asym));
    }
    let dim = h.dim();
    let nsites = dim.trailing_zeros() as usize;
    let groups: Vec<Vec<u64>> = if dim.is_power_of_two() && h.conserves_magnetization() {
        (0..=nsites as u32)
            .map(|k| states_with_popcount(nsites, k))
            .collect()
    } else {
        vec![(0..dim as u64).collect()]
    };
    let blocks = groups
        .into_iter()
        .map(|states| {
            check_budget((states.len() as u128).pow(2) * 24)?;
            let m = h.restrict(&states)?;
            let eig = SymmetricEigen::new(m);
            Ok(SpectralBlock {
                states,
                values: eig.eigenvalues,
                vectors: eig.eigenvectors,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Spectrum { dim, blocks })
}

impl Spectrum {
    pub fn min_energy(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| b.values.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    /// All eigenvalues in increasing order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.blocks.iter().flat_map(|b| b.values.iter().copied()).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// `ln tr e^{-beta H}`.
    pub fn log_partition(&self, beta: f64) -> f64 {
        let e0 = self.min_energy();
        let z: f64 = self
            .blocks
            .iter()
            .flat_map(|b| b.values.iter())
            .map(|&e| (-beta * (e - e0)).exp())
            .sum();
        z.ln() - beta * e0
    }

    /// `tr(X e^{-beta H}) / tr(e^{-beta H})`.
    pub fn expectation(&self, x: &OperatorMatrix, beta: f64) -> Result<f64> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch(x.dim(), self.dim));
        }
        if beta < 0.0 {
            return invalid("beta must be nonnegative");
        }
        let e0 = self.min_energy();
        let diagonal = x.is_diagonal();
        let mut num = 0.0;
        let mut den = 0.0;
        for b in &self.blocks {
            let weights: Vec<f64> = b.values.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
            den += weights.iter().sum::<f64>();
            if diagonal {
                let xd: Vec<f64> = b.states.iter().map(|&s| x.get(s as usize, s as usize)).collect();
                for (k, w) in weights.iter().enumerate() {
                    let v = b.vectors.column(k);
                    let q: f64 = v.iter().zip(&xd).map(|(a, xs)| a * a * xs).sum();
                    num += w * q;
                }
            } else {
                let xb = x.restrict(&b.states)?;
                let xv = &xb * &b.vectors;
                for (k, w) in weights.iter().enumerate() {
                    num += w * b.vectors.column(k).dot(&xv.column(k));
                }
            }
        }
        Ok(num / den)
    }

    /// Dense `e^{-t H}` in the full basis.
    pub fn exp_dense(&self, t: f64) -> Result<DMatrix<f64>> {
        check_budget((self.dim as u128).pow(2) * 8)?;
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for b in &self.blocks {
            let scaled = DMatrix::from_fn(b.vectors.nrows(), b.vectors.ncols(), |i, k| {
                b.vectors[(i, k)] * (-t * b.values[k]).exp()
            });
            let blk = &scaled * b.vectors.transpose();
            for (a, &sa) in b.states.iter().enumerate() {
                for (c, &sc) in b.states.iter().enumerate() {
                    out[(sa as usize, sc as usize)] = blk[(a, c)];
                }
            }
        }
        Ok(out)
    }
}

/// `tr(X e^{-beta H}) / tr(e^{-beta H})`.
pub fn thermal_expectation(h: &OperatorMatrix, x: &OperatorMatrix, beta: f64) -> Result<f64> {
    spectrum(h)?.expectation(x, beta)
}

/// `<Q_l>` in the tracial state, which factorizes over sites; needs no Hilbert space.
pub fn tracial_efp(torus: &Torus, l: usize) -> Result<f64> {
    let members = block(torus, l)?.members.len();
    Ok((0..members).fold(1.0, |p, _| p * 0.5))
}

/// Ground state of the Hamiltonian restricted to one magnetization sector.
#[derive(Clone, Debug)]
pub struct GroundState {
    pub energy: f64,
    pub vector: Vec<f64>,
    pub basis: SectorBasis,
    /// Distance to the next eigenvalue, when it could be resolved.
    pub gap: Option<f64>,
    pub degenerate: bool,
}

/// Ground state of `h` in the sector `2 S^z = m2`.
pub fn sector_ground_state(h: &OperatorMatrix, m2: i64) -> Result<GroundState> {
    let asym = h.max_asymmetry();
    if asym > HERMITIAN_TOL {
        return Err(Error::NotHermitian(asym));
    }
    let nsites = h.dim().trailing_zeros() as usize;
    let basis = SectorBasis::new(nsites, m2)?;
    let op = h.restrict_sparse(&basis.states);
    ground_state_of(op, basis)
}

/// Ground state of the XXZ Hamiltonian of `torus` in one sector, built
/// without materializing the full operator.
pub fn xxz_sector_ground_state(torus: &Torus, delta: f64, m2: i64) -> Result<GroundState> {
    let basis = SectorBasis::new(torus.num_sites(), m2)?;
    let op = xxz_sector_operator(torus, delta, &basis)?;
    ground_state_of(op, basis)
}

/// XXZ Hamiltonian restricted to a sector, in sparse form.
pub fn xxz_sector_operator(torus: &Torus, delta: f64, basis: &SectorBasis) -> Result<CsrMatrix> {
    check_budget(basis.len() as u128 * (torus.num_edges() as u128 + 1) * 16)?;
    Ok(CsrMatrix::from_rows(
        basis.len(),
        basis.states.iter().map(|&s| {
            xxz_row(s, torus.edges(), delta)
                .into_iter()
                .map(|(j, v)| (basis.index_of(j as u64).expect("XXZ conserves Sz"), v))
                .collect::<Vec<_>>()
        }),
    ))
}

fn ground_state_of(op: CsrMatrix, basis: SectorBasis) -> Result<GroundState> {
    if basis.is_empty() {
        return invalid("empty sector");
    }
    let (energy, mut vector, gap) = if op.dim <= DENSE_SECTOR_MAX {
        let eig = SymmetricEigen::new(op.to_dense()?);
        let mut order: Vec<usize> = (0..op.dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let e0 = eig.eigenvalues[order[0]];
        let gap = order.get(1).map(|&k| eig.eigenvalues[k] - e0);
        (e0, eig.eigenvectors.column(order[0]).iter().copied().collect(), gap)
    } else {
        lanczos_ground_state(&op)?
    };
    let sum: f64 = vector.iter().sum();
    if sum < 0.0 {
        vector.iter_mut().for_each(|x| *x = -*x);
    }
    let degenerate = gap.is_some_and(|g| g < DEGENERACY_TOL);
    Ok(GroundState {
        energy,
        vector,
        basis,
        gap,
        degenerate,
    })
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    n
}

/// Lanczos with full reorthogonalization and explicit restarts from the
/// current Ritz vector. Returns (energy, vector, gap estimate).
fn lanczos_ground_state(op: &CsrMatrix) -> Result<(f64, Vec<f64>, Option<f64>)> {
    const KRYLOV: usize = 120;
    const RESTARTS: usize = 50;
    const TOL: f64 = 1e-11;
    let dim = op.dim;
    let m = KRYLOV.min(dim);
    check_budget(dim as u128 * m as u128 * 8)?;
    let mut start: Vec<f64> = (0..dim).map(|i| 1.0 + 1e-3 * ((i * 7919) % 101) as f64).collect();
    normalize(&mut start);
    for _ in 0..RESTARTS {
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        for j in 0..m {
            let mut w = op.matvec(&basis[j]);
            let a: f64 = w.iter().zip(&basis[j]).map(|(x, y)| x * y).sum();
            alpha.push(a);
            for _ in 0..2 {
                for q in &basis {
                    let c: f64 = w.iter().zip(q).map(|(x, y)| x * y).sum();
                    w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
                }
            }
            let b = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if j + 1 == m || b < 1e-14 {
                beta.push(b);
                break;
            }
            beta.push(b);
            w.iter_mut().for_each(|x| *x /= b);
            basis.push(w);
        }
        let k = alpha.len();
        let t = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let e0 = eig.eigenvalues[order[0]];
        let y = eig.eigenvectors.column(order[0]);
        let mut ritz = vec![0.0; dim];
        for (c, q) in y.iter().zip(&basis) {
            ritz.iter_mut().zip(q).for_each(|(r, x)| *r += c * x);
        }
        normalize(&mut ritz);
        let hv = op.matvec(&ritz);
        let resid = hv
            .iter()
            .zip(&ritz)
            .map(|(h, v)| (h - e0 * v).powi(2))
            .sum::<f64>()
            .sqrt();
        let gap = order.get(1).map(|&i| eig.eigenvalues[i] - e0);
        if resid < TOL * e0.abs().max(1.0) || k == dim {
            return Ok((e0, ritz, gap));
        }
        start = ritz;
    }
    Err(Error::NotConverged("Lanczos ground state".into()))
}

/// `<psi_gs, Q_l psi_gs>` for the sector ground state of the XXZ torus.
pub fn efp_ground_sector(torus: &Torus, delta: f64, m2: i64, l: usize) -> Result<f64> {
    let gs = xxz_sector_ground_state(torus, delta, m2)?;
    if gs.degenerate {
        return Err(Error::Degenerate(gs.gap.unwrap_or(0.0)));
    }
    let bits = block(torus, l)?.bits().unwrap();
    Ok(block_weight(&gs.vector, &gs.basis.states, bits))
}

/// Sum of `v_s^2` over states `s` with all `bits` set, divided by `|v|^2`.
pub fn block_weight(vector: &[f64], states: &[u64], bits: u64) -> f64 {
    let norm: f64 = vector.iter().map(|x| x * x).sum();
    let hit: f64 = vector
        .iter()
        .zip(states)
        .filter(|(_, &s)| s & bits == bits)
        .map(|(x, _)| x * x)
        .sum();
    hit / norm
}

/// Norm of `(H_1 + |E|/4) Phi` for the uniform unit vector `Phi`.
pub fn uniform_vector_residual(torus: &Torus) -> Result<f64> {
    let h = build_hamiltonian(torus, 1.0)?;
    let dim = h.dim();
    let phi = vec![1.0 / (dim as f64).sqrt(); dim];
    let shift = torus.num_edges() as f64 / 4.0;
    Ok(h.matvec(&phi)
        .iter()
        .zip(&phi)
        .map(|(a, b)| (a + shift * b).powi(2))
        .sum::<f64>()
        .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_torus;

    fn sorted_eigs(m: &OperatorMatrix) -> Vec<f64> {
        spectrum(m).unwrap().eigenvalues()
    }

    #[test]
    fn single_edge_spectra() {
        let h = xxz_on_edges(2, &[(0, 1)], 1.0).unwrap();
        let e = sorted_eigs(&h);
        for (a, b) in e.iter().zip([-0.25, -0.25, -0.25, 0.75]) {
            assert!((a - b).abs() < 1e-12);
        }
        let h = xxz_on_edges(2, &[(0, 1)], 0.0).unwrap();
        let e = sorted_eigs(&h);
        for (a, b) in e.iter().zip([-0.5, 0.0, 0.0, 0.5]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn commutes_with_total_sz() {
        let t = build_torus(1, 6).unwrap();
        for delta in [-1.3, 0.0, 0.7] {
            let h = build_hamiltonian(&t, delta).unwrap();
            let sz = spin_z_total(6).unwrap();
            assert!(commutator_norm(&h, &sz).unwrap() < 1e-12);
        }
    }

    #[test]
    fn single_site_commutator() {
        let sx = spin_x(1, 0).unwrap();
        let sz = spin_z(1, 0).unwrap();
        let c = commutator_norm(&sx, &sz).unwrap();
        assert!((c - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(commutator_norm(&sx, &OperatorMatrix::identity(2)).unwrap(), 0.0);
    }

    #[test]
    fn projectors() {
        let t = build_torus(1, 6).unwrap();
        let q0 = projector_q(&t, 0).unwrap();
        assert_eq!(q0, OperatorMatrix::identity(64));
        let q2 = projector_q(&t, 2).unwrap();
        assert_eq!(q2.diagonal().iter().sum::<f64>(), 16.0);
        let c = projector_contour(&t, 2).unwrap();
        assert_eq!(c.diagonal().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn sector_dimensions() {
        for m2 in [-6, -4, -2, 0, 2, 4, 6] {
            let b = SectorBasis::new(6, m2).unwrap();
            let k = ((m2 + 6) / 2) as u64;
            let binom = (0..k).fold(1u64, |acc, i| acc * (6 - i) / (i + 1));
            assert_eq!(b.len() as u64, binom);
            assert!(b.states.iter().all(|s| s.count_ones() as u64 == k));
        }
        assert!(SectorBasis::new(6, 1).is_err());
    }

    #[test]
    fn sector_spectra_assemble_full_spectrum() {
        let t = build_torus(1, 6).unwrap();
        let h = build_hamiltonian(&t, -0.4).unwrap();
        let full = SymmetricEigen::new(h.to_dense().unwrap());
        let mut dense: Vec<f64> = full.eigenvalues.iter().copied().collect();
        dense.sort_by(f64::total_cmp);
        let blocked = spectrum(&h).unwrap();
        assert_eq!(blocked.blocks.len(), 7);
        for (a, b) in dense.iter().zip(blocked.eigenvalues()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn lanczos_matches_dense() {
        let t = build_torus(1, 12).unwrap();
        let basis = SectorBasis::new(12, 0).unwrap();
        let op = xxz_sector_operator(&t, 0.3, &basis).unwrap();
        let (e_l, v_l, _) = lanczos_ground_state(&op).unwrap();
        let eig = SymmetricEigen::new(op.to_dense().unwrap());
        let e_d = eig.eigenvalues.min();
        assert!((e_l - e_d).abs() < 1e-10, "{e_l} vs {e_d}");
        let hv = op.matvec(&v_l);
        let r: f64 = hv.iter().zip(&v_l).map(|(h, v)| (h - e_l * v).powi(2)).sum::<f64>().sqrt();
        assert!(r < 1e-9);
    }

    #[test]
    fn non_hermitian_is_rejected() {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 1)] = 1.0;
        let h = OperatorMatrix::Dense(m);
        assert!(matches!(spectrum(&h), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn budget_is_enforced() {
        let r = check_budget(memory_budget() as u128 + 1);
        assert!(matches!(r, Err(Error::Budget { .. })));
        let t = build_torus(1, 26).unwrap();
        assert!(build_hamiltonian(&t, 0.0).is_err());
    }
}
