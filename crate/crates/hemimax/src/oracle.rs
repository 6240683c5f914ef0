//! Floating-point cross-checks: numeric maximization of the objective,
//! finite-difference criticality, and sampling oracles. Nothing here enters a
//! certificate; these guard against implementation bugs in the exact paths.

use crate::geometry::Cube6;
use crate::search::pair_distance_upper;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The proven maximum, 4 + 4 sqrt2.
pub const OPT_VALUE: f64 = 9.65685424949238;

/// The equilateral-triangle-plus-pole value, 3 sqrt3 + 3 sqrt2.
pub const TRIANGLE_POLE_VALUE: f64 = 9.438793109825918;

#[derive(Clone, Copy, Debug)]
pub struct XY {
    pub x: f64,
    pub y: f64,
}

fn warp(p: XY, q: XY) -> f64 {
    (2.0 - 2.0 * p.x * q.x - 2.0 * p.y * q.y).max(0.0).sqrt()
}

/// Projected configuration for a parameter vector (floating point).
pub fn config_xy(p: &[f64; 4]) -> [XY; 4] {
    let [s, t, u, v] = *p;
    [
        XY { x: 0.0, y: -1.0 },
        XY {
            x: (1.0 - s * s) / (1.0 + s * s),
            y: 2.0 * s / (1.0 + s * s),
        },
        XY {
            x: -(1.0 - t * t) / (1.0 + t * t),
            y: 2.0 * t / (1.0 + t * t),
        },
        XY {
            x: 2.0 * u / (1.0 + u * u),
            y: (1.0 - v * v) / (1.0 + v * v),
        },
    ]
}

/// The six-distance objective at a parameter vector.
pub fn objective(p: &[f64; 4]) -> f64 {
    let [a, b, c, d] = config_xy(p);
    warp(a, b) + warp(a, c) + warp(b, c) + warp(a, d) + warp(b, d) + warp(c, d)
}

/// Feasibility of a parameter vector in the canonically labeled region:
/// `v >= 0`, `|u| <= v` (D in the disk), and A at least as far from D as B
/// and C are (the anchor reduction; ties allowed).
pub fn params_feasible(p: &[f64; 4]) -> bool {
    let [_, _, u, v] = *p;
    if !(0.0..=1.0).contains(&v) || u.abs() > v {
        return false;
    }
    if p[0].abs() > 1.0 || p[1].abs() > 1.0 {
        return false;
    }
    let [a, b, c, d] = config_xy(p);
    let ad = warp(a, d);
    ad + 1e-12 >= warp(b, d) && ad + 1e-12 >= warp(c, d)
}

#[derive(Clone, Copy, Debug)]
pub struct SearchOutcome {
    pub params: [f64; 4],
    pub value: f64,
}

/// Multi-start projected coordinate ascent over the parametrized feasible
/// region. Restart 0 polishes from the origin; the rest draw seeded random
/// starts (one independent stream per restart index). `v_floor` restricts
/// the search to `v >= v_floor`.
pub fn numeric_max_search_with_floor(restarts: u32, seed: u64, v_floor: f64) -> SearchOutcome {
    assert!(restarts >= 1);
    let mut best = SearchOutcome {
        params: [0.0; 4],
        value: f64::NEG_INFINITY,
    };
    for r in 0..restarts {
        let start = if r == 0 && v_floor <= 0.0 {
            [0.0; 4]
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
            let v: f64 = rng.gen_range(v_floor.max(0.0)..=1.0);
            [
                rng.gen_range(-1.0..=1.0),
                rng.gen_range(-1.0..=1.0),
                rng.gen_range(-v..=v),
                v,
            ]
        };
        let out = polish(start, v_floor);
        if out.value > best.value {
            best = out;
        }
    }
    best
}

pub fn numeric_max_search(restarts: u32, seed: u64) -> SearchOutcome {
    numeric_max_search_with_floor(restarts, seed, 0.0)
}

fn clamp_feasible(p: &mut [f64; 4], v_floor: f64) {
    p[0] = p[0].clamp(-1.0, 1.0);
    p[1] = p[1].clamp(-1.0, 1.0);
    p[3] = p[3].clamp(v_floor.max(0.0), 1.0);
    p[2] = p[2].clamp(-p[3], p[3]);
}

fn polish(start: [f64; 4], v_floor: f64) -> SearchOutcome {
    let mut p = start;
    clamp_feasible(&mut p, v_floor);
    if !params_feasible(&p) {
        // walk D toward the top of the disk until the anchor condition holds
        let mut q = p;
        q[2] *= 0.5;
        q[3] = (q[3] + 1.0) / 2.0;
        clamp_feasible(&mut q, v_floor);
        if params_feasible(&q) {
            p = q;
        } else {
            p = [0.0, 0.0, 0.0, v_floor.max(0.0)];
        }
    }
    let mut value = objective(&p);
    let steps = [0.1, 0.02, 4e-3, 8e-4, 1.6e-4, 3.2e-5, 6.4e-6, 1e-6, 1e-7];
    for &h in &steps {
        loop {
            let mut improved = false;
            for i in 0..4 {
                for sgn in [-1.0, 1.0] {
                    let mut cand = p;
                    cand[i] += sgn * h;
                    clamp_feasible(&mut cand, v_floor);
                    if !params_feasible(&cand) {
                        continue;
                    }
                    let val = objective(&cand);
                    if val > value + 1e-15 {
                        p = cand;
                        value = val;
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
    }
    SearchOutcome { params: p, value }
}

/// Finite-difference estimate of the largest absolute partial derivative at
/// `p`, stepping only into the feasible region (central differences where
/// both directions are feasible, one-sided at the boundary, zero when no
/// feasible step exists).
pub fn criticality_check(p: &[f64; 4], h: f64) -> f64 {
    assert!(h > 0.0);
    let f0 = objective(p);
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        let mut up = *p;
        up[i] += h;
        let mut dn = *p;
        dn[i] -= h;
        let up_ok = params_feasible(&up);
        let dn_ok = params_feasible(&dn);
        let est = match (up_ok, dn_ok) {
            (true, true) => (objective(&up) - objective(&dn)) / (2.0 * h),
            (true, false) => (objective(&up) - f0) / h,
            (false, true) => (f0 - objective(&dn)) / h,
            (false, false) => 0.0,
        };
        worst = worst.max(est.abs());
    }
    worst
}

/// Directional derivative estimate along one coordinate (signed, one-sided
/// where the boundary requires it).
pub fn partial_estimate(p: &[f64; 4], i: usize, h: f64) -> f64 {
    let f0 = objective(p);
    let mut up = *p;
    up[i] += h;
    let mut dn = *p;
    dn[i] -= h;
    match (params_feasible(&up), params_feasible(&dn)) {
        (true, true) => (objective(&up) - objective(&dn)) / (2.0 * h),
        (true, false) => (objective(&up) - f0) / h,
        (false, true) => (f0 - objective(&dn)) / h,
        (false, false) => 0.0,
    }
}

/// Samples floating-point feasible configurations inside a cube: circle
/// points for B and C (angle rejection into the box arcs), disk points for D.
/// Returns `None` when a factor of the cube misses the feasible set.
pub fn sample_configs_in_cube(cube: &Cube6, n: usize, seed: u64) -> Option<Vec<[XY; 4]>> {
    let [bb, cb, db] = cube.boxes();
    let fb = |r: &crate::exact::Rat| r.to_f64().unwrap();
    let boxes: [[f64; 4]; 3] = [
        [fb(&bb.x_lo), fb(&bb.x_hi), fb(&bb.y_lo), fb(&bb.y_hi)],
        [fb(&cb.x_lo), fb(&cb.x_hi), fb(&cb.y_lo), fb(&cb.y_hi)],
        [fb(&db.x_lo), fb(&db.x_hi), fb(&db.y_lo), fb(&db.y_hi)],
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let circle_in = |b: &[f64; 4], rng: &mut ChaCha8Rng| -> Option<XY> {
        for _ in 0..20000 {
            let th = rng.gen_range(0.0..std::f64::consts::TAU);
            let p = XY {
                x: th.cos(),
                y: th.sin(),
            };
            if p.x >= b[0] - 1e-12
                && p.x <= b[1] + 1e-12
                && p.y >= b[2] - 1e-12
                && p.y <= b[3] + 1e-12
            {
                return Some(p);
            }
        }
        None
    };
    let disk_in = |b: &[f64; 4], rng: &mut ChaCha8Rng| -> Option<XY> {
        for _ in 0..20000 {
            let p = XY {
                x: rng.gen_range(b[0]..=b[1]),
                y: rng.gen_range(b[2]..=b[3]),
            };
            if p.x * p.x + p.y * p.y <= 1.0 + 1e-12 {
                return Some(p);
            }
        }
        None
    };
    for _ in 0..n {
        let b = circle_in(&boxes[0], &mut rng)?;
        let c = circle_in(&boxes[1], &mut rng)?;
        let d = disk_in(&boxes[2], &mut rng)?;
        out.push([XY { x: 0.0, y: -1.0 }, b, c, d]);
    }
    Some(out)
}

fn objective_xy(cfgp: &[XY; 4]) -> f64 {
    let [a, b, c, d] = *cfgp;
    warp(a, b) + warp(a, c) + warp(b, c) + warp(a, d) + warp(b, d) + warp(c, d)
}

/// True iff every sampled feasible configuration inside the cube stays below
/// the given bound (plus floating slack).
pub fn samples_below(cube: &Cube6, bound: f64, n: usize, seed: u64) -> bool {
    match sample_configs_in_cube(cube, n, seed) {
        None => true, // no feasible configuration to violate the bound
        Some(cfgs) => cfgs.iter().all(|c| objective_xy(c) <= bound + 1e-9),
    }
}

/// Certified upper bound of the objective on the cube (sum of the six pair
/// bounds), as a float for oracle comparisons.
pub fn certified_sum_bound(cube: &Cube6, k: u32) -> f64 {
    (0..6)
        .map(|i| pair_distance_upper(cube, i, k).to_f64().unwrap())
        .sum()
}

/// Sampling soundness check of the cube's certified bound.
pub fn sample_soundness(cube: &Cube6, n: usize, seed: u64) -> bool {
    samples_below(cube, certified_sum_bound(cube, 30), n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Cell2;

    #[test]
    fn objective_reference_values() {
        assert!((objective(&[0.0; 4]) - OPT_VALUE).abs() < 1e-12);
        // equilateral triangle on the equator plus the projected pole:
        // A=(0,-1), B and C at angles +-30 degrees, D at the disk center
        let s = (std::f64::consts::PI / 12.0).tan(); // half-angle parameter for 30 degrees
        let v = objective(&[s, s, 0.0, 1.0]);
        assert!((v - TRIANGLE_POLE_VALUE).abs() < 1e-10, "{v}");
    }

    #[test]
    fn search_from_origin_stays_at_origin() {
        let out = numeric_max_search(1, 7);
        assert_eq!(out.params, [0.0; 4]);
        assert!((out.value - OPT_VALUE).abs() < 1e-12);
    }

    #[test]
    fn multistart_search_finds_the_optimum() {
        let out = numeric_max_search(100, 42);
        assert!((out.value - OPT_VALUE).abs() < 1e-6, "value {}", out.value);
        for (i, x) in out.params.iter().enumerate() {
            assert!(x.abs() < 1e-3, "param {i} = {x}");
        }
        // never exceeds the proven maximum
        assert!(out.value <= OPT_VALUE + 1e-9);
    }

    #[test]
    fn search_with_v_floor_stays_below_optimum() {
        let out = numeric_max_search_with_floor(60, 11, 0.9);
        assert!(out.value < OPT_VALUE - 1e-3, "value {}", out.value);
        assert!(out.params[3] >= 0.9);
    }

    #[test]
    fn criticality_at_origin_and_off_axis() {
        // interior partials in s and t vanish at the optimum
        assert!(partial_estimate(&[0.0; 4], 0, 1e-5).abs() < 1e-6);
        assert!(partial_estimate(&[0.0; 4], 1, 1e-5).abs() < 1e-6);
        assert!(criticality_check(&[0.0; 4], 1e-5) < 1e-4);
        // moving s away from the optimum shows a clear negative partial
        let d = partial_estimate(&[0.05, 0.0, 0.0, 0.0], 0, 1e-5);
        assert!(d < -1e-3, "{d}");
        // central differences improve quadratically as h shrinks
        let p = [0.03, -0.01, 0.0, 0.2];
        let d1 = partial_estimate(&p, 0, 1e-3);
        let d2 = partial_estimate(&p, 0, 5e-4);
        let d3 = partial_estimate(&p, 0, 2.5e-4);
        assert!((d2 - d3).abs() <= (d1 - d2).abs() + 1e-12);
    }

    #[test]
    fn sampled_objectives_stay_below_certified_bound() {
        let cubes = [
            Cube6::new(Cell2::new(7, -1), Cell2::new(-8, 0), Cell2::new(0, 7), 0),
            Cube6::new(Cell2::new(7, 0), Cell2::new(-8, -1), Cell2::new(1, 6), 0),
            Cube6::new(Cell2::new(31, 0), Cell2::new(-32, 0), Cell2::new(0, 31), 1),
        ];
        for cube in &cubes {
            assert!(sample_soundness(cube, 1000, 5), "cube {cube}");
            // mutation check: halving the bound must break it
            let half = certified_sum_bound(cube, 30) / 2.0;
            assert!(!samples_below(cube, half, 1000, 5), "cube {cube}");
        }
    }

    #[test]
    fn seeded_runs_reproduce() {
        let a = numeric_max_search(10, 123);
        let b = numeric_max_search(10, 123);
        assert_eq!(a.params, b.params);
        assert_eq!(a.value, b.value);
        let c = sample_configs_in_cube(
            &Cube6::new(Cell2::new(7, 0), Cell2::new(-8, 0), Cell2::new(0, 7), 0),
            5,
            99,
        )
        .unwrap();
        let d = sample_configs_in_cube(
            &Cube6::new(Cell2::new(7, 0), Cell2::new(-8, 0), Cell2::new(0, 7), 0),
            5,
            99,
        )
        .unwrap();
        for (x, y) in c.iter().zip(d.iter()) {
            for i in 0..4 {
                assert_eq!(x[i].x, y[i].x);
                assert_eq!(x[i].y, y[i].y);
            }
        }
    }
}
