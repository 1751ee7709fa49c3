//! Closed-form bounds, numerical checks of the operator inequalities behind
//! them, and the EFP scaling fit.
//!
//! Bound values are natural logarithms unless the name says otherwise.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exact::{build_hamiltonian, projector_contour, projector_q, spectrum, OperatorMatrix, Spectrum};
use crate::lattice::{universal_contour, Torus};

/// Tolerance for the inequality checks.
pub const SLACK: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub inputs: BTreeMap<String, f64>,
    /// Natural log of the bound.
    pub value: f64,
    pub valid: bool,
    pub flags: Vec<String>,
}

impl BoundReport {
    fn new(name: &str, inputs: &[(&str, f64)], value: f64) -> Self {
        BoundReport {
            name: name.to_string(),
            inputs: inputs.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            value,
            valid: true,
            flags: Vec::new(),
        }
    }

    fn flag(&mut self, msg: impl Into<String>) {
        self.valid = false;
        self.flags.push(msg.into());
    }

    /// `exp(value)` when representable.
    pub fn linear(&self) -> Option<f64> {
        let x = self.value.exp();
        (x.is_finite() && x > 0.0).then_some(x)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Chessboard exponent `K = 2^{d (log2(n/l) + 1)}`, with a `lossy` flag when
/// `n/l` is not a power of two (the logarithm is rounded up).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChessboardExponent {
    pub k: u64,
    pub lossy: bool,
}

pub fn chessboard_exponent(n: usize, l: usize, d: usize) -> Result<ChessboardExponent> {
    if l == 0 || 2 * l > n {
        return invalid(format!("need 1 <= l <= n/2 (got n = {n}, l = {l})"));
    }
    let ratio = n as f64 / l as f64;
    let exact = n.is_multiple_of(l) && (n / l).is_power_of_two();
    let log2 = if exact {
        (n / l).trailing_zeros()
    } else {
        ratio.log2().ceil() as u32
    };
    let exponent = d as u32 * (log2 + 1);
    if exponent >= 64 {
        return invalid("chessboard exponent overflows");
    }
    Ok(ChessboardExponent {
        k: 1u64 << exponent,
        lossy: !exact,
    })
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `ln(e^{-(1/64)(1-Delta) d n^d dT} + e^{[(1-Delta)/4 - (M ln M - M + 1)] d n^d dT})`
/// with `M = l / (1536 d^2 dT)`.
pub fn num_bound(delta: f64, d: usize, n: usize, l: usize, delta_t: f64) -> Result<BoundReport> {
    if delta >= 1.0 {
        return invalid("the bound needs Delta < 1");
    }
    if d == 0 || delta_t <= 0.0 {
        return invalid("need d >= 1 and dT > 0");
    }
    let scale = d as f64 * (n as f64).powi(d as i32) * delta_t;
    let m = l as f64 / (1536.0 * (d * d) as f64 * delta_t);
    let a = -(1.0 - delta) / 64.0 * scale;
    let b = ((1.0 - delta) / 4.0 - (m * m.ln() - m + 1.0)) * scale;
    let mut rep = BoundReport::new(
        "num_bound",
        &[
            ("delta", delta),
            ("d", d as f64),
            ("n", n as f64),
            ("l", l as f64),
            ("delta_t", delta_t),
            ("M", m),
            ("first_exponent", a),
            ("second_exponent", b),
        ],
        log_add_exp(a, b),
    );
    if m < 1.0 {
        rep.flag("M < 1: Poisson tail estimate does not apply");
    }
    if l < 24 {
        rep.flag("l < 24");
    }
    Ok(rep)
}

/// `-eps ln eps - (1-eps) ln(1-eps) + ln 2 / l`.
pub fn entropy_bound(epsilon: f64, l: usize) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return invalid(format!("epsilon = {epsilon} outside (0, 1)"));
    }
    if l == 0 {
        return invalid("l must be positive");
    }
    Ok(-epsilon * epsilon.ln() - (1.0 - epsilon) * (1.0 - epsilon).ln() + std::f64::consts::LN_2 / l as f64)
}

/// Number of valid six-vertex configurations on the edges incident to an
/// `l x 2 ell` block of vertices whose middle row of vertical edges is all up.
pub fn window_count(l: usize, ell: usize) -> Result<u64> {
    if l == 0 || ell == 0 {
        return invalid("need l >= 1 and ell >= 1");
    }
    let rows = 2 * ell;
    if l * rows > 24 {
        return invalid("window too large to enumerate");
    }
    // Vertical rows 0..=rows; row `ell` is the fixed all-up row.
    let mut count = 0u64;
    for bottom in 0u32..1 << l {
        let row: Vec<i8> = (0..l).map(|i| if bottom >> i & 1 == 1 { 1 } else { -1 }).collect();
        count += count_rows(l, rows, ell, 0, &row);
    }
    Ok(count)
}

fn count_rows(l: usize, rows: usize, fixed: usize, r: usize, below: &[i8]) -> u64 {
    if r == fixed && below.iter().any(|&s| s != 1) {
        return 0;
    }
    if r == rows {
        return 1;
    }
    let mut total = 0;
    for west in [1i8, -1] {
        let mut above = vec![0i8; l];
        total += fill_window_row(l, rows, fixed, r, below, &mut above, 0, west);
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn fill_window_row(l: usize, rows: usize, fixed: usize, r: usize, below: &[i8], above: &mut Vec<i8>, i: usize, west: i8) -> u64 {
    if i == l {
        let next = above.clone();
        return count_rows(l, rows, fixed, r + 1, &next);
    }
    let mut total = 0;
    for north in [1i8, -1] {
        let east = west + below[i] - north;
        if east == 1 || east == -1 {
            above[i] = north;
            total += fill_window_row(l, rows, fixed, r, below, above, i + 1, east);
        }
    }
    total
}

/// `floor(n / 2R) / n * (2 kappa + ln R)`.
pub fn pf_lower_bound(n: usize, r_tile: usize, kappa: f64) -> Result<f64> {
    if r_tile == 0 || n == 0 {
        return invalid("need n >= 1 and R >= 1");
    }
    Ok((n / (2 * r_tile)) as f64 / n as f64 * (2.0 * kappa + (r_tile as f64).ln()))
}

/// `6 d r n^d / l`.
pub fn boundary_volume_bound(d: usize, n: usize, l: usize, r: usize) -> Result<f64> {
    if r == 0 || l == 0 {
        return invalid("need r >= 1 and l >= 1");
    }
    Ok(6.0 * d as f64 * r as f64 * (n as f64).powi(d as i32) / l as f64)
}

/// Sites of the universal contour pattern within graph distance `r` of a site of opposite sign.
pub fn boundary_volume_exact(torus: &Torus, l: usize, r: usize) -> Result<usize> {
    let pattern = universal_contour(torus, l)?;
    let plus: Vec<usize> = (0..torus.num_sites()).filter(|&s| pattern.up[s]).collect();
    let minus: Vec<usize> = (0..torus.num_sites()).filter(|&s| !pattern.up[s]).collect();
    let to_plus = torus.distances_from(&plus);
    let to_minus = torus.distances_from(&minus);
    Ok((0..torus.num_sites())
        .filter(|&s| if pattern.up[s] { to_minus[s] <= r } else { to_plus[s] <= r })
        .count())
}

/// Outcome of one inequality check `lhs <= rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl Check {
    fn le(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Check {
            name: name.into(),
            lhs,
            rhs,
            pass: lhs <= rhs + SLACK,
        }
    }
}

/// Generalized Hoelder inequality
/// `|tr(A e^{-beta H})| / Z <= (tr[(E A E^2 A^T E)^m] / Z)^{1/2m}` with `E = e^{-beta H / 4m}`.
pub fn holder_verify(h: &OperatorMatrix, a: &OperatorMatrix, n_half: usize, beta: f64) -> Result<Check> {
    if h.dim() != a.dim() {
        return Err(Error::DimensionMismatch(h.dim(), a.dim()));
    }
    if n_half == 0 {
        return invalid("n_half must be positive");
    }
    let spec = spectrum(h)?;
    holder_with(&spec, &a.to_dense()?, n_half, beta)
}

fn holder_with(spec: &Spectrum, a: &DMatrix<f64>, n_half: usize, beta: f64) -> Result<Check> {
    // Shift by the ground energy; the shift cancels between numerator and Z.
    let e0 = spec.min_energy();
    let shifted = |t: f64| -> Result<DMatrix<f64>> { Ok(spec.exp_dense(t)? * (t * e0).exp()) };
    let full = shifted(beta)?;
    let z = full.trace();
    let lhs = ((a * &full).trace() / z).abs();
    let m = n_half as f64;
    let q = shifted(beta / (4.0 * m))?;
    let half = shifted(beta / (2.0 * m))?;
    let inner = &q * a * &half * a.transpose() * &q;
    let mut p = DMatrix::identity(a.nrows(), a.ncols());
    for _ in 0..n_half {
        p = &p * &inner;
    }
    let ratio = (p.trace() / z).max(0.0);
    let rhs = ratio.powf(1.0 / (2.0 * m));
    Ok(Check::le(format!("holder(n_half={n_half}, beta={beta})"), lhs, rhs))
}

/// Hoelder checks with one Hamiltonian for many operators and exponents.
pub fn holder_verify_many(h: &OperatorMatrix, ops: &[OperatorMatrix], n_halves: &[usize], beta: f64) -> Result<Vec<Check>> {
    let spec = spectrum(h)?;
    let mut out = Vec::new();
    for a in ops {
        if a.dim() != h.dim() {
            return Err(Error::DimensionMismatch(h.dim(), a.dim()));
        }
        let ad = a.to_dense()?;
        for &m in n_halves {
            out.push(holder_with(&spec, &ad, m, beta)?);
        }
    }
    Ok(out)
}

/// `<Q_l> <= <Qhat_{n,l}>^{1/K}` for `Delta <= 0`.
pub fn chessboard_verify(torus: &Torus, delta: f64, beta: f64, l: usize) -> Result<Check> {
    if delta > 0.0 {
        return invalid(format!("chessboard estimate needs Delta <= 0 (got {delta})"));
    }
    let k = chessboard_exponent(torus.side(), l, torus.dim())?;
    let spec = spectrum(&build_hamiltonian(torus, delta)?)?;
    let lhs = spec.expectation(&projector_q(torus, l)?, beta)?;
    let hat = spec.expectation(&projector_contour(torus, l)?, beta)?;
    let rhs = hat.max(0.0).powf(1.0 / k.k as f64);
    Ok(Check::le(format!("chessboard(n={}, l={l}, delta={delta}, beta={beta})", torus.side()), lhs, rhs))
}

/// `e^{-beta |E| / 4} tr e^{-beta H} >= 1`, as `1 <= Den`.
pub fn den_verify(torus: &Torus, delta: f64, beta: f64) -> Result<Check> {
    let spec = spectrum(&build_hamiltonian(torus, delta)?)?;
    let log_den = spec.log_partition(beta) - beta * torus.num_edges() as f64 / 4.0;
    Ok(Check {
        name: format!("den(n={}, delta={delta}, beta={beta})", torus.side()),
        lhs: 0.0,
        rhs: log_den,
        pass: log_den >= -SLACK,
    })
}

/// Reflection across the plane orthogonal to axis 0, in the frame where the
/// spins of the second half are flipped.
pub struct ReflectionFrame {
    dim: usize,
    minus: Vec<usize>,
    mirror: Vec<usize>,
    spec: Spectrum,
}

impl ReflectionFrame {
    pub fn new(torus: &Torus, delta: f64) -> Result<Self> {
        let (minus, plus) = torus.reflection_halves(0);
        let mirror: Vec<usize> = minus.iter().map(|&s| torus.reflect(s, 0)).collect();
        let flip: u64 = plus.iter().fold(0, |m, &s| m | 1 << s);
        let h = build_hamiltonian(torus, delta)?;
        let dim = h.dim();
        let rotated = DMatrix::from_fn(dim, dim, |a, b| h.get(a ^ flip as usize, b ^ flip as usize));
        let spec = spectrum(&OperatorMatrix::Dense(rotated))?;
        Ok(ReflectionFrame { dim, minus, mirror, spec })
    }

    pub fn half_dim(&self) -> usize {
        1 << self.minus.len()
    }

    fn local(&self, sites: &[usize], s: usize) -> usize {
        sites.iter().enumerate().fold(0, |m, (k, &x)| m | ((s >> x) & 1) << k)
    }

    /// `A (x) F(A)` on the full space for a real operator `A` on the first half.
    pub fn doubled(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |s, t| {
            a[(self.local(&self.minus, s), self.local(&self.minus, t))]
                * a[(self.local(&self.mirror, s), self.local(&self.mirror, t))]
        })
    }

    /// `<A F(A)>_beta` in the rotated frame.
    pub fn expectation(&self, a: &DMatrix<f64>, beta: f64) -> Result<f64> {
        if a.nrows() != self.half_dim() || a.ncols() != self.half_dim() {
            return Err(Error::DimensionMismatch(a.nrows(), self.half_dim()));
        }
        self.spec.expectation(&OperatorMatrix::Dense(self.doubled(a)), beta)
    }
}

fn random_real_operator<R: Rng>(dim: usize, rng: &mut R) -> DMatrix<f64> {
    let m = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    (&m + m.transpose()) * 0.5
}

/// `<A F(A)>_beta >= 0` for random real symmetric `A` on the first half.
pub fn rp_verify(torus: &Torus, delta: f64, beta: f64, trials: usize, seed: u64) -> Result<Vec<Check>> {
    if delta > 0.0 {
        return invalid(format!("reflection positivity is checked for Delta <= 0 (got {delta})"));
    }
    let frame = ReflectionFrame::new(torus, delta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(trials);
    for t in 0..trials {
        let a = random_real_operator(frame.half_dim(), &mut rng);
        let v = frame.expectation(&a, beta)?;
        out.push(Check {
            name: format!("rp(n={}, delta={delta}, beta={beta}, trial={t})", torus.side()),
            lhs: 0.0,
            rhs: v,
            pass: v >= -SLACK,
        });
    }
    Ok(out)
}

/// Fit of `ln efp = ln C - c L^nu`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub points: Vec<(f64, f64)>,
    pub log_c: f64,
    pub c: f64,
    pub nu: f64,
    pub nu_fixed: bool,
    /// Percentile bootstrap interval for `nu` (free fits only).
    pub nu_interval: Option<(f64, f64)>,
    pub residuals: Vec<f64>,
    pub decaying: bool,
    /// Points dropped because `efp <= 0`.
    pub excluded: usize,
}

impl ScalingFit {
    pub fn fitted(&self, l: f64) -> f64 {
        (self.log_c - self.c * l.powf(self.nu)).exp()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("L,efp,fitted\n");
        for &(l, log_efp) in &self.points {
            s.push_str(&format!("{l},{:e},{:e}\n", log_efp.exp(), self.fitted(l)));
        }
        s
    }
}

const NU_RANGE: (f64, f64) = (0.05, 6.0);
const BOOTSTRAP: usize = 200;

/// Least squares for `y = a - c x^nu` at fixed `nu`; returns `(a, c, rss)`.
fn linear_fit(points: &[(f64, f64)], nu: f64) -> (f64, f64, f64) {
    let k = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.powf(nu)).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(points).map(|(x, p)| (x - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - slope * mx;
    let rss = xs.iter().zip(points).map(|(x, p)| ((p.1 - my) - slope * (x - mx)).powi(2)).sum();
    (a, -slope, rss)
}

/// Derivative of the profiled residual sum of squares in `nu`.
fn rss_slope(points: &[(f64, f64)], nu: f64) -> f64 {
    let k = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.powf(nu)).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let (_, c, _) = linear_fit(points, nu);
    xs.iter()
        .zip(points)
        .map(|(x, p)| 2.0 * ((p.1 - my) + c * (x - mx)) * c * x * p.0.ln())
        .sum()
}

fn free_fit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let rss = |nu: f64| linear_fit(points, nu).2;
    // Coarse scan, then golden-section refinement around the best grid point.
    let steps = 240;
    let (lo, hi) = NU_RANGE;
    let h = (hi - lo) / steps as f64;
    let best = (0..=steps)
        .map(|i| lo + h * i as f64)
        .min_by(|a, b| rss(*a).total_cmp(&rss(*b)))
        .unwrap();
    let (mut a, mut b) = ((best - h).max(lo), (best + h).min(hi));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (rss(x1), rss(x2));
    for _ in 0..200 {
        if (b - a).abs() < 1e-12 {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = rss(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = rss(x2);
        }
    }
    let mut nu = 0.5 * (a + b);
    // Polish on the sign of the gradient, which resolves far below the flat RSS floor.
    let (mut lo, mut hi) = ((nu - 1e-6).max(NU_RANGE.0), (nu + 1e-6).min(NU_RANGE.1));
    let (glo, ghi) = (rss_slope(points, lo), rss_slope(points, hi));
    if glo < 0.0 && ghi > 0.0 {
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if rss_slope(points, mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        nu = 0.5 * (lo + hi);
    }
    let (log_c, c, _) = linear_fit(points, nu);
    (log_c, c, nu)
}

/// Fits `ln efp = ln C - c L^nu`; `nu` is held at `nu_fixed` when given,
/// otherwise fitted with a seeded bootstrap interval.
pub fn fit_scaling(points: &[(usize, f64)], nu_fixed: Option<f64>, seed: u64) -> Result<ScalingFit> {
    let kept: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.1 > 0.0)
        .map(|&(l, e)| (l as f64, e.ln()))
        .collect();
    let excluded = points.len() - kept.len();
    if kept.len() < 4 {
        return invalid(format!("need at least 4 points with efp > 0 (got {})", kept.len()));
    }
    let (log_c, c, nu) = match nu_fixed {
        Some(nu) => {
            let (a, c, _) = linear_fit(&kept, nu);
            (a, c, nu)
        }
        None => free_fit(&kept),
    };
    let nu_interval = if nu_fixed.is_none() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut nus = Vec::with_capacity(BOOTSTRAP);
        for _ in 0..BOOTSTRAP {
            let sample: Vec<(f64, f64)> = (0..kept.len()).map(|_| kept[rng.random_range(0..kept.len())]).collect();
            let mut distinct: Vec<f64> = sample.iter().map(|p| p.0).collect();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            if distinct.len() >= 3 {
                nus.push(free_fit(&sample).2);
            }
        }
        nus.sort_by(f64::total_cmp);
        (!nus.is_empty()).then(|| {
            let q = |p: f64| nus[((nus.len() - 1) as f64 * p).round() as usize];
            (q(0.025), q(0.975))
        })
    } else {
        None
    };
    let residuals = kept.iter().map(|&(l, y)| y - (log_c - c * l.powf(nu))).collect();
    Ok(ScalingFit {
        points: kept,
        log_c,
        c,
        nu,
        nu_fixed: nu_fixed.is_some(),
        nu_interval,
        residuals,
        decaying: c > 1e-9,
        excluded,
    })
}
