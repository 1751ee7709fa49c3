use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xxz_efp::opc::*;
use xxz_efp::sixvertex::{SixVertexConfig, TorusSampler};

fn bools(a: &[&[i8]]) -> Vec<Vec<bool>> {
    a.iter().map(|r| r.iter().map(|&x| x == -1).collect()).collect()
}

/// The 5 x 5 rectangle of the osculating-path figure.
fn figure_rectangle() -> OscPathConfig {
    let h: [&[i8]; 6] = [
        &[1, 1, -1, -1, 1],
        &[-1, 1, -1, 1, -1],
        &[-1, -1, 1, -1, 1],
        &[-1, 1, -1, -1, 1],
        &[1, -1, -1, 1, -1],
        &[1, -1, -1, 1, -1],
    ];
    let v: [&[i8]; 5] = [
        &[-1, 1, 1, 1, -1, 1],
        &[-1, -1, 1, -1, 1, -1],
        &[1, 1, -1, 1, 1, 1],
        &[1, -1, 1, 1, -1, 1],
        &[1, 1, 1, 1, 1, 1],
    ];
    OscPathConfig::rectangle(5, 5, bools(&h), bools(&v)).unwrap()
}

fn as_set(p: Vec<Vec<(i64, i64)>>) -> HashSet<Vec<(i64, i64)>> {
    p.into_iter().collect()
}

fn figure_paths() -> HashSet<Vec<(i64, i64)>> {
    as_set(vec![
        vec![(1, 0), (1, 1), (2, 1), (2, 2), (3, 2), (3, 3), (6, 3)],
        vec![(2, 0), (2, 1), (4, 1), (4, 2), (6, 2)],
        vec![(0, 3), (2, 3), (2, 4), (4, 4), (4, 5), (6, 5)],
        vec![(0, 4), (1, 4), (1, 5), (2, 5), (2, 6)],
    ])
}

fn highest_paths() -> HashSet<Vec<(i64, i64)>> {
    as_set(vec![
        vec![(2, 0), (2, 2), (6, 2)],
        vec![(1, 0), (1, 3), (6, 3)],
        vec![(0, 3), (1, 3), (1, 4), (2, 4), (2, 5), (6, 5)],
        vec![(0, 4), (1, 4), (1, 5), (2, 5), (2, 6)],
    ])
}

/// Height by counting, for every traced path, the vertices strictly to its lower right.
fn height_by_paths(x: &OscPathConfig) -> u64 {
    let mut total = 0;
    for p in x.paths().unwrap() {
        for y in 1..=x.height as i64 {
            let max_x = p.iter().filter(|q| q.1 == y).map(|q| q.0).max();
            let above = p.iter().all(|q| q.1 > y);
            for i in 1..=x.width as i64 {
                let counts = match max_x {
                    Some(m) => i > m,
                    None => above,
                };
                total += u64::from(counts);
            }
        }
    }
    total
}

fn boundary(x: &OscPathConfig) -> Vec<bool> {
    let mut out = Vec::new();
    for b in 1..=x.height {
        out.push(x.h(0, b));
        out.push(x.h(x.width, b));
    }
    for i in 1..=x.width {
        out.push(x.v(i, 0));
        out.push(x.v(i, x.height));
    }
    out
}

fn staircase() -> OscPathConfig {
    let mut x = OscPathConfig::reference_rectangle(2, 2);
    x.h_black[0][0] = true;
    x.h_black[1][0] = true;
    x.v_black[1][1] = true;
    x.v_black[1][2] = true;
    x
}

#[test]
fn reference_rectangle_is_trivial() {
    let x = OscPathConfig::reference_rectangle(4, 6);
    assert_eq!(x.num_black(), 0);
    assert!(x.flippable_plaquettes().unwrap().is_empty());
    assert_eq!(x.height().unwrap().value, 0);
    assert!(blockade_check(&x).unwrap().passed());
    assert_eq!(aligned_run_detector(&x, 4).unwrap(), Some((0, 1)));
    assert_eq!(aligned_run_detector(&x, 5).unwrap(), None);
    assert_eq!(highest_opc(&x).unwrap(), x);
}

#[test]
fn torus_conversion() {
    let r = SixVertexConfig::reference(4, 6);
    let x = to_opc(&r).unwrap();
    assert_eq!(x.num_black(), 0);
    let y = to_opc(&r.reversed()).unwrap();
    assert_eq!(y.num_black(), y.num_edges());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let sampler = TorusSampler::new(6, 8, 0.2, None).unwrap();
    for _ in 0..50 {
        let c = sampler.sample(&mut rng);
        let x = to_opc(&c).unwrap();
        assert!(x.is_valid());
        assert_eq!(to_sixvertex(&x).unwrap(), c);
        for (i, j) in x.vertices() {
            assert_eq!(x.vertex_type(i, j).unwrap(), c.vertex_type(i, j).unwrap());
        }
    }
}

#[test]
fn figure_paths_are_reproduced() {
    let x = figure_rectangle();
    assert!(x.is_valid());
    assert_eq!(as_set(x.polylines().unwrap()), figure_paths());
    assert_eq!(x.height().unwrap().value, height_by_paths(&x));
}

#[test]
fn figure_highest_is_reproduced() {
    let x = figure_rectangle();
    let top = highest_opc(&x).unwrap();
    assert_eq!(as_set(top.polylines().unwrap()), highest_paths());
    assert_eq!(top.count_minus(), 0);
    assert_eq!(top.height().unwrap().value - x.height().unwrap().value, 8);
    assert_eq!(boundary(&top), boundary(&x));
    let rep = blockade_check(&top).unwrap();
    assert!(rep.passed(), "{rep:?}");
    println!("{}", render_ascii(&top).unwrap());
}

#[test]
fn staircase_corner() {
    let x = staircase();
    assert!(x.is_valid());
    let p = x.flippable_plaquettes().unwrap();
    assert_eq!(p, vec![Plaquette { a: 1, b: 1, corner: Corner::Minus }]);
    let y = apply_move(&x, 1, 1, MoveDirection::Up).unwrap();
    assert_eq!(y.flippable_plaquettes().unwrap(), vec![Plaquette { a: 1, b: 1, corner: Corner::Plus }]);
    assert_eq!(y.height().unwrap().value, x.height().unwrap().value + 1);
    assert_eq!(apply_move(&y, 1, 1, MoveDirection::Down).unwrap(), x);
    assert!(apply_move(&x, 1, 1, MoveDirection::Down).is_err());
    assert!(apply_move(&y, 1, 1, MoveDirection::Up).is_err());
    assert!(apply_move(&x, 0, 1, MoveDirection::Up).is_err());
}

#[test]
fn ascii_renderer() {
    let s = render_ascii(&staircase()).unwrap();
    assert_eq!(s, " . #\n.+.+.\n . #\n#+#+.\n . .\n");
}

#[test]
fn highest_is_confluent_and_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..1000 {
        let (l, r) = (rng.random_range(2..=7), rng.random_range(2..=7));
        let x = random_rectangle(l, r, &mut rng);
        assert!(x.is_valid());
        assert_eq!(x.height().unwrap().value, height_by_paths(&x));

        let mut y = x.clone();
        let mut h = y.height().unwrap().value;
        loop {
            let mut avail: Vec<Plaquette> = y
                .flippable_plaquettes()
                .unwrap()
                .into_iter()
                .filter(|p| p.corner == Corner::Minus)
                .collect();
            if avail.is_empty() {
                break;
            }
            avail.shuffle(&mut rng);
            let next = apply_move(&y, avail[0].a, avail[0].b, MoveDirection::Up).unwrap();
            assert!(next.is_valid());
            assert_eq!(boundary(&next), boundary(&x));
            let nh = next.height().unwrap().value;
            assert_eq!(nh, h + 1);
            assert_eq!(nh, height_by_paths(&next));
            y = next;
            h = nh;
        }
        let z = highest_opc(&x).unwrap();
        assert_eq!(y, z);
        let w = highest_opc_by(&x, |a| a.len() - 1).unwrap();
        assert_eq!(w, z);
        assert!(z.height().unwrap() >= x.height().unwrap());
        assert!(blockade_check(&z).unwrap().passed());
    }
}

#[test]
fn blockades_on_highest_configurations() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    let mut literal = 0;
    for _ in 0..500 {
        let z = highest_opc(&random_rectangle(8, 16, &mut rng)).unwrap();
        let rep = blockade_check(&z).unwrap();
        checked += rep.checked;
        literal += rep.literal_violations.len();
        assert!(rep.passed(), "{}", render_ascii(&z).unwrap());
    }
    println!("blockade vertices checked: {checked}, literal-form exceptions: {literal}");
    assert!(checked > 0);
}

#[test]
fn aligned_runs_in_highest_configurations() {
    let (l, r) = (4, 64);
    let sampler = TorusSampler::new(2 * l, 2 * r, 0.0, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let found = (0..200)
        .filter(|_| {
            let c = sampler.sample(&mut rng);
            let x = extract_rectangle(&c, 0, 0, 2 * l, r).unwrap();
            aligned_run_detector(&highest_opc(&x).unwrap(), l).unwrap().is_some()
        })
        .count();
    println!("aligned run found in {found}/200");
    assert!(found >= 190, "{found}/200");
}

#[test]
fn run_detector_edge_cases() {
    let x = figure_rectangle();
    assert_eq!(aligned_run_detector(&x, 6).unwrap(), None);
    assert_eq!(aligned_run_detector(&x, 1).unwrap(), Some((0, 1)));
    assert_eq!(aligned_run_detector(&x, 5).unwrap(), None);
    assert_eq!(aligned_run_detector(&x, 3).unwrap(), Some((0, 3)));
}
