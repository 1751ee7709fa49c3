//! Osculating-path view of six-vertex configurations.
//!
//! An edge is black when its spin is `-1`, i.e. when it differs from the
//! reference configuration (all spins `+1`); black edges form up-right paths
//! that touch at type-4 vertices without crossing.
//!
//! On the rectangle `Gamma_{L,R}` the vertices are `(i, j)` with `1 <= i <= L`
//! and `1 <= j <= R`. The horizontal edge `h(a, b)`, `0 <= a <= L`, joins
//! `(a, b)` to `(a+1, b)`, and the vertical edge `v(i, b)`, `0 <= b <= R`,
//! joins `(i, b)` to `(i, b+1)`; edges with `a in {0, L}` or `b in {0, R}`
//! are the fixed boundary. Face `(a, b)` is the unit square with lower-left
//! corner `(a, b)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sixvertex::{classify, SixVertexConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Rectangle,
    Torus,
}

/// Black-edge masks of a rectangle or a torus; gray is the complement.
///
/// Rectangles store `h_black[a][b-1]` for `h(a, b)` and `v_black[i-1][b]`
/// for `v(i, b)`. Tori use the `[column][row]` indexing of
/// [`SixVertexConfig`] with 0-based vertices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OscPathConfig {
    pub region: Region,
    pub width: usize,
    pub height: usize,
    pub h_black: Vec<Vec<bool>>,
    pub v_black: Vec<Vec<bool>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    West,
    East,
    South,
    North,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Corner {
    /// Black bottom and right edges, gray top and left.
    Minus,
    /// Black top and left edges, gray bottom and right.
    Plus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MoveDirection {
    Up,
    Down,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Plaquette {
    pub a: usize,
    pub b: usize,
    pub corner: Corner,
}

/// Height function value on a rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct HeightRecord {
    pub value: u64,
}

fn spin(black: bool) -> i8 {
    if black {
        -1
    } else {
        1
    }
}

/// Rectangle or torus view of a six-vertex configuration.
pub fn to_opc(config: &SixVertexConfig) -> Result<OscPathConfig> {
    let v = config.validate()?;
    if let Some((i, j)) = v.first_violation {
        return invalid(format!("ice rule violated at vertex ({i}, {j})"));
    }
    let black = |a: &Vec<Vec<i8>>| a.iter().map(|r| r.iter().map(|&x| x == -1).collect()).collect();
    Ok(OscPathConfig {
        region: Region::Torus,
        width: config.n,
        height: config.t,
        h_black: black(&config.h_spins),
        v_black: black(&config.v_spins),
    })
}

/// Inverse of [`to_opc`] for torus configurations.
pub fn to_sixvertex(x: &OscPathConfig) -> Result<SixVertexConfig> {
    if x.region != Region::Torus {
        return invalid("only torus configurations convert back to a periodic six-vertex configuration");
    }
    let spins = |a: &Vec<Vec<bool>>| a.iter().map(|r| r.iter().map(|&b| spin(b)).collect()).collect();
    SixVertexConfig::new(x.width, x.height, spins(&x.h_black), spins(&x.v_black))
}

/// The `l x r` rectangle whose lower-left vertex is torus vertex `(i0, j0)`.
pub fn extract_rectangle(config: &SixVertexConfig, i0: usize, j0: usize, l: usize, r: usize) -> Result<OscPathConfig> {
    if l < 1 || r < 1 || l > config.n || r >= config.t {
        return invalid(format!("rectangle {l} x {r} does not fit in the {} x {} torus", config.n, config.t));
    }
    let (n, t) = (config.n, config.t);
    let wrap = |x: usize, k: usize, m: usize| (x + k + m - 1) % m;
    let h_black = (0..=l)
        .map(|a| (1..=r).map(|b| config.h_spins[wrap(i0, a, n)][wrap(j0, b, t)] == -1).collect())
        .collect();
    let v_black = (1..=l)
        .map(|i| (0..=r).map(|b| config.v_spins[wrap(i0, i, n)][wrap(j0, b, t)] == -1).collect())
        .collect();
    Ok(OscPathConfig {
        region: Region::Rectangle,
        width: l,
        height: r,
        h_black,
        v_black,
    })
}

impl OscPathConfig {
    /// All-gray rectangle.
    pub fn reference_rectangle(l: usize, r: usize) -> Self {
        OscPathConfig {
            region: Region::Rectangle,
            width: l,
            height: r,
            h_black: vec![vec![false; r]; l + 1],
            v_black: vec![vec![false; r + 1]; l],
        }
    }

    /// Builds a rectangle from `h_black[a][b-1]` and `v_black[i-1][b]`.
    pub fn rectangle(l: usize, r: usize, h_black: Vec<Vec<bool>>, v_black: Vec<Vec<bool>>) -> Result<Self> {
        let ok = h_black.len() == l + 1
            && h_black.iter().all(|c| c.len() == r)
            && v_black.len() == l
            && v_black.iter().all(|c| c.len() == r + 1);
        if !ok {
            return invalid(format!("edge arrays do not fit a {l} x {r} rectangle"));
        }
        Ok(OscPathConfig {
            region: Region::Rectangle,
            width: l,
            height: r,
            h_black,
            v_black,
        })
    }

    fn require_rectangle(&self) -> Result<()> {
        if self.region != Region::Rectangle {
            return invalid("operation is defined on rectangles with fixed boundary only");
        }
        Ok(())
    }

    pub fn h(&self, a: usize, b: usize) -> bool {
        match self.region {
            Region::Rectangle => self.h_black[a][b - 1],
            Region::Torus => self.h_black[a % self.width][b % self.height],
        }
    }

    pub fn v(&self, i: usize, b: usize) -> bool {
        match self.region {
            Region::Rectangle => self.v_black[i - 1][b],
            Region::Torus => self.v_black[i % self.width][b % self.height],
        }
    }

    fn set_h(&mut self, a: usize, b: usize, black: bool) {
        self.h_black[a][b - 1] = black;
    }

    fn set_v(&mut self, i: usize, b: usize, black: bool) {
        self.v_black[i - 1][b] = black;
    }

    pub fn gray_h(&self, a: usize, b: usize) -> bool {
        !self.h(a, b)
    }

    pub fn gray_v(&self, i: usize, b: usize) -> bool {
        !self.v(i, b)
    }

    pub fn num_black(&self) -> usize {
        self.h_black.iter().chain(&self.v_black).flatten().filter(|&&b| b).count()
    }

    pub fn num_edges(&self) -> usize {
        self.h_black.iter().chain(&self.v_black).map(Vec::len).sum()
    }

    /// Vertex coordinates: 1-based on rectangles, 0-based on tori.
    pub fn vertices(&self) -> Vec<(usize, usize)> {
        match self.region {
            Region::Rectangle => (1..=self.height)
                .flat_map(|j| (1..=self.width).map(move |i| (i, j)))
                .collect(),
            Region::Torus => (0..self.height)
                .flat_map(|j| (0..self.width).map(move |i| (i, j)))
                .collect(),
        }
    }

    /// Black flags `(W, E, S, N)` at a vertex.
    pub fn vertex_edges(&self, i: usize, j: usize) -> [bool; 4] {
        match self.region {
            Region::Rectangle => [self.h(i - 1, j), self.h(i, j), self.v(i, j - 1), self.v(i, j)],
            Region::Torus => {
                let (n, t) = (self.width, self.height);
                [self.h(i + n - 1, j), self.h(i, j), self.v(i, j + t - 1), self.v(i, j)]
            }
        }
    }

    /// Six-vertex type of a vertex, or `None` if the ice rule fails there.
    pub fn vertex_type(&self, i: usize, j: usize) -> Option<u8> {
        let [w, e, s, n] = self.vertex_edges(i, j);
        classify(spin(w), spin(e), spin(s), spin(n))
    }

    pub fn is_valid(&self) -> bool {
        self.vertices().into_iter().all(|(i, j)| self.vertex_type(i, j).is_some())
    }

    /// Pairs of black edges joined at a vertex. At a type-4 vertex the paths
    /// touch: west joins north and south joins east.
    pub fn connections(&self, i: usize, j: usize) -> Result<Vec<(Side, Side)>> {
        use Side::*;
        let ty = self
            .vertex_type(i, j)
            .ok_or_else(|| Error::InvalidArgument(format!("ice rule violated at vertex ({i}, {j})")))?;
        Ok(match ty {
            1 => vec![],
            2 => vec![(West, East)],
            3 => vec![(South, North)],
            4 => vec![(West, North), (South, East)],
            5 => vec![(West, North)],
            _ => vec![(South, East)],
        })
    }

    /// Black paths as lattice-point sequences, from the left or bottom
    /// boundary to the right or top boundary. Points outside the vertex set
    /// mark where a path enters or leaves.
    pub fn paths(&self) -> Result<Vec<Vec<(i64, i64)>>> {
        self.require_rectangle()?;
        let (l, r) = (self.width, self.height);
        let mut starts: Vec<(usize, usize, Side)> = Vec::new();
        for j in (1..=r).rev() {
            if self.h(0, j) {
                starts.push((1, j, Side::West));
            }
        }
        for i in 1..=l {
            if self.v(i, 0) {
                starts.push((i, 1, Side::South));
            }
        }
        let mut out = Vec::new();
        for (mut i, mut j, mut from) in starts {
            let mut pts = vec![match from {
                Side::West => (0, j as i64),
                _ => (i as i64, 0),
            }];
            loop {
                pts.push((i as i64, j as i64));
                let exit = self
                    .connections(i, j)?
                    .into_iter()
                    .find(|&(a, _)| a == from)
                    .map(|(_, b)| b)
                    .ok_or_else(|| Error::InvalidArgument(format!("path broken at vertex ({i}, {j})")))?;
                match exit {
                    Side::East if i == l => {
                        pts.push((l as i64 + 1, j as i64));
                        break;
                    }
                    Side::North if j == r => {
                        pts.push((i as i64, r as i64 + 1));
                        break;
                    }
                    Side::East => {
                        i += 1;
                        from = Side::West;
                    }
                    _ => {
                        j += 1;
                        from = Side::South;
                    }
                }
            }
            out.push(pts);
        }
        Ok(out)
    }

    /// [`paths`](Self::paths) with collinear interior points removed.
    pub fn polylines(&self) -> Result<Vec<Vec<(i64, i64)>>> {
        Ok(self
            .paths()?
            .into_iter()
            .map(|p| {
                let mut out: Vec<(i64, i64)> = Vec::new();
                for q in p {
                    if out.len() >= 2 {
                        let (a, b) = (out[out.len() - 2], out[out.len() - 1]);
                        if (a.0 == b.0 && b.0 == q.0) || (a.1 == b.1 && b.1 == q.1) {
                            out.pop();
                        }
                    }
                    out.push(q);
                }
                out
            })
            .collect())
    }

    /// Number of paths separating each face from the top-left corner,
    /// `phi[a][b]` for faces `0 <= a <= L`, `0 <= b <= R`.
    fn face_heights(&self) -> Vec<Vec<i64>> {
        let (l, r) = (self.width, self.height);
        let mut phi = vec![vec![0i64; r + 1]; l + 1];
        for a in 1..=l {
            phi[a][r] = phi[a - 1][r] + i64::from(self.v(a, r));
        }
        for a in 0..=l {
            for b in (0..r).rev() {
                phi[a][b] = phi[a][b + 1] + i64::from(self.h(a, b + 1));
            }
        }
        phi
    }

    /// Sum over paths of the number of vertices strictly to their lower right.
    pub fn height(&self) -> Result<HeightRecord> {
        self.require_rectangle()?;
        let phi = self.face_heights();
        let mut total = 0;
        for j in 1..=self.height {
            for i in 1..=self.width {
                total += phi[i - 1][j];
            }
        }
        Ok(HeightRecord { value: total as u64 })
    }

    fn corner_at(&self, a: usize, b: usize) -> Option<Corner> {
        let (bottom, top, left, right) = (self.h(a, b), self.h(a, b + 1), self.v(a, b), self.v(a + 1, b));
        match (bottom, right, top, left) {
            (true, true, false, false) => Some(Corner::Minus),
            (false, false, true, true) => Some(Corner::Plus),
            _ => None,
        }
    }

    fn interior_faces(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (1..self.height).flat_map(move |b| (1..self.width).map(move |a| (a, b)))
    }

    /// Interior faces whose edges form a movable corner, in row-major order.
    pub fn flippable_plaquettes(&self) -> Result<Vec<Plaquette>> {
        self.require_rectangle()?;
        Ok(self
            .interior_faces()
            .filter_map(|(a, b)| self.corner_at(a, b).map(|corner| Plaquette { a, b, corner }))
            .collect())
    }

    fn flip_face(&mut self, a: usize, b: usize) {
        let (bottom, top, left, right) = (self.h(a, b), self.h(a, b + 1), self.v(a, b), self.v(a + 1, b));
        self.set_h(a, b, !bottom);
        self.set_h(a, b + 1, !top);
        self.set_v(a, b, !left);
        self.set_v(a + 1, b, !right);
    }

    /// Number of `Minus` corners among interior faces.
    pub fn count_minus(&self) -> usize {
        self.interior_faces()
            .filter(|&(a, b)| self.corner_at(a, b) == Some(Corner::Minus))
            .count()
    }
}

/// `Up` turns a `Minus` corner into a `Plus` corner; `Down` reverses it.
pub fn apply_move(x: &OscPathConfig, a: usize, b: usize, dir: MoveDirection) -> Result<OscPathConfig> {
    x.require_rectangle()?;
    if a < 1 || b < 1 || a >= x.width || b >= x.height {
        return invalid(format!("face ({a}, {b}) is not an interior face"));
    }
    let need = match dir {
        MoveDirection::Up => Corner::Minus,
        MoveDirection::Down => Corner::Plus,
    };
    if x.corner_at(a, b) != Some(need) {
        return invalid(format!("face ({a}, {b}) is not a {need:?} corner"));
    }
    let mut y = x.clone();
    y.flip_face(a, b);
    Ok(y)
}

/// Applies `Up` moves until none remain, scanning faces in row-major order.
pub fn highest_opc(x: &OscPathConfig) -> Result<OscPathConfig> {
    highest_opc_by(x, |_| 0)
}

/// Applies `Up` moves until none remain; `choose` picks which of the
/// currently available faces to flip next.
pub fn highest_opc_by(x: &OscPathConfig, mut choose: impl FnMut(&[(usize, usize)]) -> usize) -> Result<OscPathConfig> {
    x.require_rectangle()?;
    if !x.is_valid() {
        return invalid("configuration violates the ice rule");
    }
    let area = x.width * x.height;
    let cap = area * area + 1;
    let mut y = x.clone();
    for _ in 0..cap {
        let avail: Vec<(usize, usize)> = y
            .interior_faces()
            .filter(|&(a, b)| y.corner_at(a, b) == Some(Corner::Minus))
            .collect();
        if avail.is_empty() {
            return Ok(y);
        }
        let (a, b) = avail[choose(&avail) % avail.len()];
        y.flip_face(a, b);
    }
    Err(Error::NotConverged(format!("no fixpoint after {cap} moves")))
}

/// Blockade statistics over the interior vertices of type 4 or 5.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BlockadeReport {
    pub checked: usize,
    /// Vertices for which neither the full row to the west nor the full
    /// column above consists of type-4 vertices.
    pub literal_violations: Vec<(usize, usize)>,
    /// Vertices with no left/up staircase of type-4 vertices reaching the
    /// left column or the top row.
    pub chain_violations: Vec<(usize, usize)>,
}

impl BlockadeReport {
    pub fn passed(&self) -> bool {
        self.literal_violations.is_empty() && self.chain_violations.is_empty()
    }
}

/// Checks the blockade structure around type 4 and 5 vertices with `i > 1`, `j < R`.
pub fn blockade_check(x: &OscPathConfig) -> Result<BlockadeReport> {
    x.require_rectangle()?;
    let (l, r) = (x.width, x.height);
    let mut ty = vec![vec![0u8; r + 1]; l + 1];
    for (i, j) in x.vertices() {
        ty[i][j] = x
            .vertex_type(i, j)
            .ok_or_else(|| Error::InvalidArgument(format!("ice rule violated at vertex ({i}, {j})")))?;
    }
    // reach[i][j]: a left/up staircase of type-4 vertices from (i, j) hits column 1 or row R.
    let mut reach = vec![vec![false; r + 1]; l + 1];
    for i in 1..=l {
        for j in (1..=r).rev() {
            reach[i][j] = ty[i][j] == 4 && (i == 1 || j == r || reach[i - 1][j] || reach[i][j + 1]);
        }
    }
    let mut rep = BlockadeReport::default();
    for (i, j) in x.vertices() {
        if !matches!(ty[i][j], 4 | 5) || i == 1 || j == r {
            continue;
        }
        rep.checked += 1;
        let west = (1..i).all(|k| ty[k][j] == 4);
        let above = (j + 1..=r).all(|k| ty[i][k] == 4);
        if !west && !above {
            rep.literal_violations.push((i, j));
        }
        if !reach[i - 1][j] && !reach[i][j + 1] {
            rep.chain_violations.push((i, j));
        }
    }
    Ok(rep)
}

/// First row `b` and start column `i` of `l` consecutive vertical edges of one colour.
pub fn aligned_run_detector(x: &OscPathConfig, l: usize) -> Result<Option<(usize, usize)>> {
    x.require_rectangle()?;
    if l == 0 || l > x.width {
        return Ok(None);
    }
    if l == 1 {
        return Ok(Some((0, 1)));
    }
    for b in 0..=x.height {
        let mut run = 1;
        for i in 2..=x.width {
            run = if x.v(i, b) == x.v(i - 1, b) { run + 1 } else { 1 };
            if run >= l {
                return Ok(Some((b, i + 1 - l)));
            }
        }
    }
    Ok(None)
}

/// Text picture, top row first: `#` black, `.` gray, `+` vertex.
pub fn render_ascii(x: &OscPathConfig) -> Result<String> {
    x.require_rectangle()?;
    let c = |b: bool| if b { '#' } else { '.' };
    let vertical_line = |b: usize| {
        let mut s = String::from(" ");
        for i in 1..=x.width {
            s.push(c(x.v(i, b)));
            s.push(' ');
        }
        s.trim_end().to_string()
    };
    let mut lines = vec![vertical_line(x.height)];
    for j in (1..=x.height).rev() {
        let mut s = String::new();
        for a in 0..=x.width {
            s.push(c(x.h(a, j)));
            if a < x.width {
                s.push('+');
            }
        }
        lines.push(s);
        lines.push(vertical_line(j - 1));
    }
    Ok(lines.join("\n") + "\n")
}

/// Random valid rectangle: random left and bottom boundary, then each vertex
/// from the bottom-left propagates straight through when its west and south
/// spins agree and turns with probability 1/2 otherwise.
pub fn random_rectangle<R: Rng>(l: usize, r: usize, rng: &mut R) -> OscPathConfig {
    let mut x = OscPathConfig::reference_rectangle(l, r);
    for j in 1..=r {
        x.set_h(0, j, rng.random());
    }
    for i in 1..=l {
        x.set_v(i, 0, rng.random());
    }
    for j in 1..=r {
        for i in 1..=l {
            let (w, s) = (x.h(i - 1, j), x.v(i, j - 1));
            let (e, n) = if w == s {
                (w, w)
            } else if rng.random::<bool>() {
                (true, false)
            } else {
                (false, true)
            };
            x.set_h(i, j, e);
            x.set_v(i, j, n);
        }
    }
    x
}
