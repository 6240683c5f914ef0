//! Global search: covers the feasible set with grid cubes, eliminates cubes
//! with the distance-order filter and the certified distance-sum test,
//! subdivides breadth-first, then refines depth-first until every remaining
//! cube is eliminated. A valid certificate establishes that the objective is
//! strictly below 4 + 4 sqrt2 outside the excluded neighborhoods.
//!
//! The cube kernel works on integer grid coordinates: radicand maxima are
//! corner products of scaled integers and the certified square roots are
//! integer square roots of shifted numerators, so no heap allocation happens
//! in the per-cube tests.

use crate::exact::{q2_sign, rat, Rat, Q2};
use crate::geometry::{edge_at_level, edge_log2, Cell2, Cube6, NeighborhoodSpec};
use num_bigint::BigInt;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SearchError {
    #[error("bad search configuration: {0}")]
    BadConfig(String),
}

/// Lower bounds on the sorted pair distances of an optimal configuration,
/// stored exactly (decimals as rationals, sqrt2 symbolically). Eliminating on
/// them trusts the stated distance-order property.
#[derive(Clone, Debug)]
pub struct DistanceBoundTable {
    pub bounds: [Q2; 6],
}

impl Default for DistanceBoundTable {
    fn default() -> Self {
        let t = DistanceBoundTable {
            bounds: [
                Q2::from_rat(rat(124, 125)),     // 0.99200
                Q2::from_rat(rat(24379, 20000)), // 1.21895
                Q2::from_rat(rat(4, 3)),
                Q2::sqrt2(),
                Q2::from_rat(rat(153137, 100000)), // 1.53137
                Q2::from_rat(rat(160947, 100000)), // 1.60947
            ],
        };
        debug_assert!(t.is_nondecreasing());
        t
    }
}

impl DistanceBoundTable {
    pub fn is_nondecreasing(&self) -> bool {
        self.bounds
            .windows(2)
            .all(|w| q2_sign(&(&w[1] - &w[0])) >= 0)
    }

    /// Compiles the entries to integer comparisons against bound numerators
    /// over 2^k, so the per-cube filter never touches heap arithmetic.
    fn compile(&self, k: u32) -> CompiledTable {
        let entries = self.bounds.clone().map(|b| {
            use num_traits::{Signed, ToPrimitive, Zero};
            if b.sqrt2.is_zero() && !b.rat.is_negative() {
                let num = (b.rat.numer() << k as usize).to_i128();
                let den = b.rat.denom().to_i128();
                if let (Some(num), Some(den)) = (num, den) {
                    return CompiledEntry::Rational { num, den };
                }
            } else if b == Q2::sqrt2() {
                return CompiledEntry::Sqrt2 {
                    scaled: 2u128 << (2 * k as usize),
                };
            }
            CompiledEntry::General { bound: b, k }
        });
        CompiledTable { entries }
    }
}

enum CompiledEntry {
    /// `u/2^k < p/q  <=>  u q < p 2^k`
    Rational { num: i128, den: i128 },
    /// `u/2^k < sqrt2  <=>  u^2 < 2 4^k`
    Sqrt2 { scaled: u128 },
    /// exact Q(sqrt2) comparison for entries outside the fast forms
    General { bound: Q2, k: u32 },
}

impl CompiledEntry {
    #[inline]
    fn exceeds(&self, upper_num: u64) -> bool {
        match self {
            CompiledEntry::Rational { num, den } => (upper_num as i128) * den < *num,
            CompiledEntry::Sqrt2 { scaled } => {
                let u = upper_num as u128;
                u * u < *scaled
            }
            CompiledEntry::General { bound, k } => {
                let uq = Q2::from_rat(Rat::new(
                    BigInt::from(upper_num),
                    BigInt::from(1u64) << *k as usize,
                ));
                q2_sign(&(bound - &uq)) > 0
            }
        }
    }
}

struct CompiledTable {
    entries: [CompiledEntry; 6],
}

impl CompiledTable {
    /// True iff some k-th smallest certified upper bound falls strictly below
    /// the k-th tabulated lower bound (the cube is then eliminable).
    #[inline]
    fn sorted_uppers_fail(&self, uppers: &[u64; 6]) -> bool {
        let mut sorted = *uppers;
        sorted.sort_unstable();
        sorted
            .iter()
            .zip(self.entries.iter())
            .any(|(u, e)| e.exceeds(*u))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecordMode {
    Off,
    FailuresOnly,
    Full,
}

/// Engine configuration. Levels index the grid: level L has edge 2^-(3+2L),
/// so 0, 1, 2, 3, 4 give edges 1/8, 1/32, 1/128, 1/512, 1/2048.
#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub bfs_levels: Vec<u8>,
    pub dfs_subdivision: u32,
    pub dfs_max_level: u8,
    pub use_bound_filter: bool,
    pub sqrt_precision: u32,
    pub worker_count: usize,
    pub exclude_neighborhood: bool,
    pub record_mode: RecordMode,
    pub fail_fast: Option<usize>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            bfs_levels: vec![0, 1],
            dfs_subdivision: 4,
            dfs_max_level: 4,
            use_bound_filter: true,
            sqrt_precision: 30,
            worker_count: 0,
            exclude_neighborhood: true,
            record_mode: RecordMode::FailuresOnly,
            fail_fast: None,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.bfs_levels.is_empty() || self.bfs_levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SearchError::BadConfig(
                "breadth-first levels must increase".into(),
            ));
        }
        if self.dfs_subdivision != 4 {
            return Err(SearchError::BadConfig(
                "only per-axis subdivision factor 4 is supported".into(),
            ));
        }
        if self.dfs_max_level <= *self.bfs_levels.last().unwrap() {
            return Err(SearchError::BadConfig(
                "depth-first limit must exceed the last breadth-first level".into(),
            ));
        }
        if self.dfs_max_level > 8 {
            return Err(SearchError::BadConfig(
                "subdivision level too deep for the integer kernel".into(),
            ));
        }
        if !(4..=30).contains(&self.sqrt_precision) {
            return Err(SearchError::BadConfig(
                "square-root precision must be in 4..=30".into(),
            ));
        }
        // the integer kernel shifts radicand numerators up by 2(k - m) bits,
        // so the precision must reach the deepest grid scale
        if self.sqrt_precision < edge_log2(self.dfs_max_level) {
            return Err(SearchError::BadConfig(
                "square-root precision below the deepest subdivision scale".into(),
            ));
        }
        Ok(())
    }

    pub fn bfs_edges(&self) -> Vec<Rat> {
        self.bfs_levels.iter().map(|&l| edge_at_level(l)).collect()
    }

    pub fn dfs_max_edge(&self) -> Rat {
        edge_at_level(self.dfs_max_level)
    }

    /// The level whose edge equals the given rational, if any.
    pub fn level_for_edge(edge: &Rat) -> Option<u8> {
        (0u8..=8).find(|&l| edge_at_level(l) == *edge)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    EliminatedByAnchorTest,
    EliminatedByBoundFilter,
    EliminatedBySumTest,
    ExcludedNeighborhood,
    Subdivided,
    ExhaustedDepth,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::EliminatedByAnchorTest => "anchor-test",
            Verdict::EliminatedByBoundFilter => "bound-filter",
            Verdict::EliminatedBySumTest => "sum-test",
            Verdict::ExcludedNeighborhood => "excluded",
            Verdict::Subdivided => "subdivided",
            Verdict::ExhaustedDepth => "exhausted-depth",
        }
    }

    pub fn from_name(name: &str) -> Option<Verdict> {
        Some(match name {
            "anchor-test" => Verdict::EliminatedByAnchorTest,
            "bound-filter" => Verdict::EliminatedByBoundFilter,
            "sum-test" => Verdict::EliminatedBySumTest,
            "excluded" => Verdict::ExcludedNeighborhood,
            "subdivided" => Verdict::Subdivided,
            "exhausted-depth" => Verdict::ExhaustedDepth,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug)]
pub struct CubeVerdict {
    pub cube: Cube6,
    pub verdict: Verdict,
    /// For sum-test verdicts: the certified upper bound of the objective on
    /// the cube, as an exact rational.
    pub bound_value: Option<Rat>,
}

// ---------------------------------------------------------------------------
// integer kernel

/// Scaled interval of a cell along one axis: `[i, i+1]` in units of the edge.
#[inline]
fn cell_x(c: &Cell2) -> (i64, i64) {
    (c.ix as i64, c.ix as i64 + 1)
}

#[inline]
fn cell_y(c: &Cell2) -> (i64, i64) {
    (c.iy as i64, c.iy as i64 + 1)
}

#[inline]
fn min_prod(a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 * b.0).min(a.0 * b.1).min(a.1 * b.0).min(a.1 * b.1)
}

#[inline]
fn max_prod(a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 * b.0).max(a.0 * b.1).max(a.1 * b.0).max(a.1 * b.1)
}

/// Maximum of the radicand `2 - 2xx' - 2yy'` over the box pair, as a
/// numerator over 4^m. The radicand is affine in each coordinate, so the
/// maximum is attained at a corner.
#[inline]
fn radicand_max_num(x1: (i64, i64), y1: (i64, i64), x2: (i64, i64), y2: (i64, i64), m: u32) -> i64 {
    2 * (1i64 << (2 * m)) - 2 * min_prod(x1, x2) - 2 * min_prod(y1, y2)
}

/// Minimum of the radicand over the box pair (farthest corner products).
#[inline]
fn radicand_min_num(x1: (i64, i64), y1: (i64, i64), x2: (i64, i64), y2: (i64, i64), m: u32) -> i64 {
    2 * (1i64 << (2 * m)) - 2 * max_prod(x1, x2) - 2 * max_prod(y1, y2)
}

/// Ceiling integer square root of `n * 4^(k-m)`: the numerator of a certified
/// upper bound on sqrt(n / 4^m) over the denominator 2^k.
#[inline]
fn sqrt_upper_num(n: i64, m: u32, k: u32) -> u64 {
    debug_assert!(k >= m);
    if n <= 0 {
        return 0;
    }
    let scaled = (n as u128) << (2 * (k - m) as usize);
    let s = scaled.isqrt();
    let s = if s * s < scaled { s + 1 } else { s };
    s as u64
}

/// Floor integer square root of `n * 4^(k-m)`: the numerator of a certified
/// lower bound on sqrt(n / 4^m) over the denominator 2^k.
#[inline]
fn sqrt_lower_num(n: i64, m: u32, k: u32) -> u64 {
    debug_assert!(k >= m);
    if n <= 0 {
        return 0;
    }
    (((n as u128) << (2 * (k - m) as usize)).isqrt()) as u64
}

/// The six per-pair radicand maxima of a cube, as numerators over 4^m,
/// in the canonical pair order AB, AC, BC, AD, BD, CD.
fn pair_radicand_nums(cube: &Cube6) -> [i64; 6] {
    let m = edge_log2(cube.level);
    let unit = 1i64 << m;
    let ax = (0i64, 0i64);
    let ay = (-unit, -unit);
    let bx = cell_x(&cube.b);
    let by = cell_y(&cube.b);
    let cx = cell_x(&cube.c);
    let cy = cell_y(&cube.c);
    let dx = cell_x(&cube.d);
    let dy = cell_y(&cube.d);
    [
        radicand_max_num(ax, ay, bx, by, m),
        radicand_max_num(ax, ay, cx, cy, m),
        radicand_max_num(bx, by, cx, cy, m),
        radicand_max_num(ax, ay, dx, dy, m),
        radicand_max_num(bx, by, dx, dy, m),
        radicand_max_num(cx, cy, dx, dy, m),
    ]
}

/// Certified upper bounds on the six pair distances, as numerators over 2^k.
fn pair_upper_nums(cube: &Cube6, k: u32) -> [u64; 6] {
    let m = edge_log2(cube.level);
    pair_radicand_nums(cube).map(|n| sqrt_upper_num(n, m, k))
}

/// Exact upper bound on one pair distance over the cube. The radicand maximum
/// is exact (corner enumeration); the square root is rounded up by at most
/// 2^-k.
pub fn pair_distance_upper(cube: &Cube6, pair: usize, k: u32) -> Rat {
    assert!(pair < 6);
    let num = pair_upper_nums(cube, k)[pair];
    Rat::new(BigInt::from(num), BigInt::from(1u64) << k as usize)
}

/// Eliminates iff the sum of certified pair bounds is strictly below
/// 4 + 4 sqrt2, decided exactly in Q(sqrt2). Returns the sum numerator over
/// 2^k alongside.
#[inline]
fn sum_test_num(uppers: &[u64; 6], k: u32) -> (bool, u64) {
    let s: u64 = uppers.iter().sum();
    // sign of (4 - s/2^k) + 4 sqrt2: a + b sqrt2 with b > 0 is positive iff
    // a >= 0 or a^2 < 2 b^2.
    let a = (4i128 << k) - s as i128;
    let eliminated = if a >= 0 {
        true
    } else {
        let b = 4i128 << k;
        a * a < 2 * b * b
    };
    (eliminated, s)
}

/// Distance-sum test against 4 + 4 sqrt2.
pub fn distance_sum_test(cube: &Cube6, k: u32) -> CubeVerdict {
    let uppers = pair_upper_nums(cube, k);
    let (eliminated, s) = sum_test_num(&uppers, k);
    CubeVerdict {
        cube: *cube,
        verdict: if eliminated {
            Verdict::EliminatedBySumTest
        } else {
            Verdict::Subdivided
        },
        bound_value: Some(Rat::new(BigInt::from(s), BigInt::from(1u64) << k as usize)),
    }
}

/// Canonical-labeling test: the covered region takes A as the equator point
/// farthest from D, so every configuration of interest satisfies
/// `AD >= BD` and `AD >= CD`. The cube is eliminated when a certified upper
/// bound on AD falls strictly below a certified lower bound on BD or CD,
/// which proves no canonically labeled configuration lies inside. Returns
/// `true` when the cube passes (must be kept).
pub fn anchor_farthest_test(cube: &Cube6, k: u32) -> bool {
    let m = edge_log2(cube.level);
    let unit = 1i64 << m;
    let ax = (0i64, 0i64);
    let ay = (-unit, -unit);
    let bx = cell_x(&cube.b);
    let by = cell_y(&cube.b);
    let cx = cell_x(&cube.c);
    let cy = cell_y(&cube.c);
    let dx = cell_x(&cube.d);
    let dy = cell_y(&cube.d);
    let ad_ub = sqrt_upper_num(radicand_max_num(ax, ay, dx, dy, m), m, k);
    let bd_lb = sqrt_lower_num(radicand_min_num(bx, by, dx, dy, m), m, k);
    let cd_lb = sqrt_lower_num(radicand_min_num(cx, cy, dx, dy, m), m, k);
    ad_ub >= bd_lb && ad_ub >= cd_lb
}

/// Distance-order filter: sorts the six certified pair upper bounds and
/// eliminates when some k-th smallest bound falls below the k-th tabulated
/// lower bound. Pointwise domination implies sorted-order domination, so no
/// configuration in the cube can satisfy the table. Returns `true` when the
/// cube passes (cannot be eliminated this way).
pub fn distance_bound_test(cube: &Cube6, table: &DistanceBoundTable, k: u32) -> bool {
    let uppers = pair_upper_nums(cube, k);
    !table.compile(k).sorted_uppers_fail(&uppers)
}

// ---------------------------------------------------------------------------
// feasibility of cells

#[inline]
fn min_sq(i: i64) -> i64 {
    if i <= 0 && i + 1 >= 0 {
        0
    } else {
        (i * i).min((i + 1) * (i + 1))
    }
}

#[inline]
fn max_sq(i: i64) -> i64 {
    (i * i).max((i + 1) * (i + 1))
}

#[inline]
fn cell_norm_range(c: &Cell2) -> (i64, i64) {
    (
        min_sq(c.ix as i64) + min_sq(c.iy as i64),
        max_sq(c.ix as i64) + max_sq(c.iy as i64),
    )
}

/// Cell meets the unit circle (exact, integer arithmetic).
pub fn cell_meets_circle(c: &Cell2, level: u8) -> bool {
    let one = 1i64 << (2 * edge_log2(level));
    let (lo, hi) = cell_norm_range(c);
    lo <= one && one <= hi
}

/// Cell meets the closed unit disk.
pub fn cell_meets_disk(c: &Cell2, level: u8) -> bool {
    let one = 1i64 << (2 * edge_log2(level));
    cell_norm_range(c).0 <= one
}

// ---------------------------------------------------------------------------
// rounds

#[derive(Clone, Debug, Default)]
pub struct RoundStats {
    pub level: u8,
    pub input: u64,
    pub children_raw: u64,
    pub feasible: u64,
    pub anchor_eliminated: u64,
    pub excluded: u64,
    pub bound_eliminated: u64,
    pub sum_eliminated: u64,
    pub survivors: u64,
    pub seconds: f64,
}

struct FactorSub {
    cell: Cell2,
    in_primary: bool,
    in_mirror: bool,
}

/// A closed rational box scaled to the integer grid of one level: the cell
/// `[i, i+1]` lies inside iff `x_lo <= i && i + 1 <= x_hi` (empty when the
/// scaled bounds cross).
#[derive(Clone, Copy)]
struct ScaledBox {
    x_lo: i64,
    x_hi: i64,
    y_lo: i64,
    y_hi: i64,
}

impl ScaledBox {
    fn from_box(b: &crate::geometry::Box2, level: u8) -> ScaledBox {
        let m = edge_log2(level);
        let scale = |r: &Rat, up: bool| -> i64 {
            let scaled = r * Rat::from_integer(BigInt::from(1i64 << m));
            let i = if up { scaled.ceil() } else { scaled.floor() };
            use num_traits::ToPrimitive;
            i.to_integer()
                .to_i64()
                .unwrap_or(if up { i64::MAX } else { i64::MIN })
        };
        ScaledBox {
            x_lo: scale(&b.x_lo, true),
            x_hi: scale(&b.x_hi, false),
            y_lo: scale(&b.y_lo, true),
            y_hi: scale(&b.y_hi, false),
        }
    }

    #[inline]
    fn contains_cell(&self, c: &Cell2) -> bool {
        self.x_lo <= c.ix as i64
            && (c.ix as i64 + 1) <= self.x_hi
            && self.y_lo <= c.iy as i64
            && (c.iy as i64 + 1) <= self.y_hi
    }
}

/// Feasible subcells of one factor cell at the next level, with neighborhood
/// containment flags. `target` is the neighborhood box this factor is tested
/// against for the primary labeling, `mirror` for the swapped labeling.
fn factor_subs(
    cell: &Cell2,
    parent_level: u8,
    child_level: u8,
    circle: bool,
    target: &ScaledBox,
    mirror: &ScaledBox,
) -> Vec<FactorSub> {
    let cells: Vec<Cell2> = if child_level == parent_level {
        vec![*cell]
    } else {
        let mut cur = vec![*cell];
        for _ in parent_level..child_level {
            cur = cur.iter().flat_map(Cube6::child_cells).collect();
        }
        cur
    };
    cells
        .into_iter()
        .filter(|c| {
            if circle {
                cell_meets_circle(c, child_level)
            } else {
                cell_meets_disk(c, child_level)
            }
        })
        .map(|c| FactorSub {
            cell: c,
            in_primary: target.contains_cell(&c),
            in_mirror: mirror.contains_cell(&c),
        })
        .collect()
}

struct PerParentOutcome {
    stats: RoundStats,
    survivors: Vec<Cube6>,
    records: Vec<CubeVerdict>,
}

struct ScaledNeighborhoods {
    u: ScaledBox,
    v: ScaledBox,
    w1: ScaledBox,
}

impl ScaledNeighborhoods {
    fn at_level(spec: &NeighborhoodSpec, level: u8) -> Self {
        ScaledNeighborhoods {
            u: ScaledBox::from_box(&spec.u_box(), level),
            v: ScaledBox::from_box(&spec.v_box(), level),
            w1: ScaledBox::from_box(&spec.w1_box(), level),
        }
    }
}

fn process_parent(
    parent: &Cube6,
    child_level: u8,
    nbhd: &ScaledNeighborhoods,
    compiled: &CompiledTable,
    cfg: &SearchConfig,
) -> PerParentOutcome {
    let k = cfg.sqrt_precision;
    let subs_b = factor_subs(&parent.b, parent.level, child_level, true, &nbhd.u, &nbhd.v);
    let subs_c = factor_subs(&parent.c, parent.level, child_level, true, &nbhd.v, &nbhd.u);
    let subs_d = factor_subs(
        &parent.d,
        parent.level,
        child_level,
        false,
        &nbhd.w1,
        &nbhd.w1,
    );
    let per_factor: u64 = if child_level == parent.level {
        1
    } else {
        16u64.pow((child_level - parent.level) as u32)
    };
    let mut stats = RoundStats {
        level: child_level,
        input: 1,
        children_raw: per_factor.pow(3),
        ..Default::default()
    };
    let mut survivors = Vec::new();
    let mut records = Vec::new();
    let m = edge_log2(child_level);
    let unit = 1i64 << m;
    let ax = (0i64, 0i64);
    let ay = (-unit, -unit);

    // per-factor and per-factor-pair certified bound numerators
    let sq = |n: i64| sqrt_upper_num(n, m, k);
    let ab: Vec<u64> = subs_b
        .iter()
        .map(|s| {
            sq(radicand_max_num(
                ax,
                ay,
                cell_x(&s.cell),
                cell_y(&s.cell),
                m,
            ))
        })
        .collect();
    let ac: Vec<u64> = subs_c
        .iter()
        .map(|s| {
            sq(radicand_max_num(
                ax,
                ay,
                cell_x(&s.cell),
                cell_y(&s.cell),
                m,
            ))
        })
        .collect();
    let ad: Vec<u64> = subs_d
        .iter()
        .map(|s| {
            sq(radicand_max_num(
                ax,
                ay,
                cell_x(&s.cell),
                cell_y(&s.cell),
                m,
            ))
        })
        .collect();
    let pair_grid = |xs: &[FactorSub], ys: &[FactorSub]| -> Vec<u64> {
        let mut out = Vec::with_capacity(xs.len() * ys.len());
        for x in xs {
            for y in ys {
                out.push(sq(radicand_max_num(
                    cell_x(&x.cell),
                    cell_y(&x.cell),
                    cell_x(&y.cell),
                    cell_y(&y.cell),
                    m,
                )));
            }
        }
        out
    };
    let bc = pair_grid(&subs_b, &subs_c);
    let bd = pair_grid(&subs_b, &subs_d);
    let cd = pair_grid(&subs_c, &subs_d);
    // lower bounds for the canonical-labeling test
    let lq = |n: i64| sqrt_lower_num(n, m, k);
    let pair_grid_lb = |xs: &[FactorSub], ys: &[FactorSub]| -> Vec<u64> {
        let mut out = Vec::with_capacity(xs.len() * ys.len());
        for x in xs {
            for y in ys {
                out.push(lq(radicand_min_num(
                    cell_x(&x.cell),
                    cell_y(&x.cell),
                    cell_x(&y.cell),
                    cell_y(&y.cell),
                    m,
                )));
            }
        }
        out
    };
    let bd_lb = pair_grid_lb(&subs_b, &subs_d);
    let cd_lb = pair_grid_lb(&subs_c, &subs_d);

    let nc = subs_c.len();
    let nd = subs_d.len();
    for (i, sb) in subs_b.iter().enumerate() {
        for (j, sc) in subs_c.iter().enumerate() {
            for (l, sd) in subs_d.iter().enumerate() {
                stats.feasible += 1;
                let cube = Cube6::new(sb.cell, sc.cell, sd.cell, child_level);
                if ad[l] < bd_lb[i * nd + l] || ad[l] < cd_lb[j * nd + l] {
                    stats.anchor_eliminated += 1;
                    if cfg.record_mode == RecordMode::Full {
                        records.push(CubeVerdict {
                            cube,
                            verdict: Verdict::EliminatedByAnchorTest,
                            bound_value: None,
                        });
                    }
                    continue;
                }
                if cfg.exclude_neighborhood
                    && ((sb.in_primary && sc.in_primary && sd.in_primary)
                        || (sb.in_mirror && sc.in_mirror && sd.in_mirror))
                {
                    stats.excluded += 1;
                    if cfg.record_mode == RecordMode::Full {
                        records.push(CubeVerdict {
                            cube,
                            verdict: Verdict::ExcludedNeighborhood,
                            bound_value: None,
                        });
                    }
                    continue;
                }
                let uppers = [
                    ab[i],
                    ac[j],
                    bc[i * nc + j],
                    ad[l],
                    bd[i * nd + l],
                    cd[j * nd + l],
                ];
                if cfg.use_bound_filter {
                    if compiled.sorted_uppers_fail(&uppers) {
                        stats.bound_eliminated += 1;
                        if cfg.record_mode == RecordMode::Full {
                            records.push(CubeVerdict {
                                cube,
                                verdict: Verdict::EliminatedByBoundFilter,
                                bound_value: None,
                            });
                        }
                        continue;
                    }
                }
                let (eliminated, s) = sum_test_num(&uppers, k);
                if eliminated {
                    stats.sum_eliminated += 1;
                    if cfg.record_mode == RecordMode::Full {
                        records.push(CubeVerdict {
                            cube,
                            verdict: Verdict::EliminatedBySumTest,
                            bound_value: Some(Rat::new(
                                BigInt::from(s),
                                BigInt::from(1u64) << k as usize,
                            )),
                        });
                    }
                } else {
                    stats.survivors += 1;
                    survivors.push(cube);
                }
            }
        }
    }
    PerParentOutcome {
        stats,
        survivors,
        records,
    }
}

fn merge_stats(mut a: RoundStats, b: &RoundStats) -> RoundStats {
    a.input += b.input;
    a.children_raw += b.children_raw;
    a.feasible += b.feasible;
    a.anchor_eliminated += b.anchor_eliminated;
    a.excluded += b.excluded;
    a.bound_eliminated += b.bound_eliminated;
    a.sum_eliminated += b.sum_eliminated;
    a.survivors += b.survivors;
    a
}

/// One breadth-first round: subdivides each cube to `child_level`, drops
/// infeasible children, removes children contained in an excluded
/// neighborhood (either labeling), applies the distance-order filter when
/// enabled, then the distance-sum test. Deterministic regardless of worker
/// count: outcomes are merged in input order.
pub fn bfs_round(
    cubes: &[Cube6],
    child_level: u8,
    nbhd: &NeighborhoodSpec,
    table: &DistanceBoundTable,
    cfg: &SearchConfig,
) -> (Vec<Cube6>, RoundStats, Vec<CubeVerdict>) {
    let start = Instant::now();
    let compiled = table.compile(cfg.sqrt_precision);
    let scaled_nbhd = ScaledNeighborhoods::at_level(nbhd, child_level);
    let outcomes: Vec<PerParentOutcome> = cubes
        .par_iter()
        .map(|c| process_parent(c, child_level, &scaled_nbhd, &compiled, cfg))
        .collect();
    let mut stats = RoundStats {
        level: child_level,
        ..Default::default()
    };
    let mut survivors = Vec::new();
    let mut records = Vec::new();
    for o in outcomes {
        stats = merge_stats(stats, &o.stats);
        survivors.extend(o.survivors);
        records.extend(o.records);
    }
    stats.seconds = start.elapsed().as_secs_f64();
    (survivors, stats, records)
}

/// The initial cover: every circle-meeting cell for B and C and every
/// disk-meeting cell for D at level 0, in lexicographic order.
pub fn build_initial_cover() -> Vec<Cube6> {
    let level = 0u8;
    let mut circle_cells = Vec::new();
    let mut disk_cells = Vec::new();
    for ix in -8..8 {
        for iy in -8..8 {
            let c = Cell2::new(ix, iy);
            if cell_meets_circle(&c, level) {
                circle_cells.push(c);
            }
            if cell_meets_disk(&c, level) {
                disk_cells.push(c);
            }
        }
    }
    let mut out = Vec::with_capacity(circle_cells.len() * circle_cells.len() * disk_cells.len());
    for b in &circle_cells {
        for c in &circle_cells {
            for d in &disk_cells {
                out.push(Cube6::new(*b, *c, *d, level));
            }
        }
    }
    out
}

#[derive(Clone, Debug, Default)]
pub struct DfsStats {
    pub roots: u64,
    /// roots resolved, keyed by the deepest level their subtree needed
    pub resolved_at: BTreeMap<u8, u64>,
    pub failures: u64,
    pub skipped: u64,
    pub leaves_eliminated: u64,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct DfsOutcome {
    pub root: Cube6,
    pub success: bool,
    pub deepest_level: u8,
    pub witness: Option<Cube6>,
    pub leaves_eliminated: u64,
}

/// Depth-first refinement of one cube with the distance-sum test (the
/// canonical-labeling reduction stays active: it defines the covered region).
/// Children are visited in lexicographic order and a failing child is pursued
/// first (the recursion descends before moving to its siblings). Fails with a
/// witness leaf when the maximum level is reached without elimination.
pub fn dfs_verify(root: &Cube6, cfg: &SearchConfig) -> DfsOutcome {
    let k = cfg.sqrt_precision;
    // the root arrives as a survivor; re-test to resolve already-eliminable
    // cubes at depth zero
    let uppers = pair_upper_nums(root, k);
    if sum_test_num(&uppers, k).0 || !anchor_farthest_test(root, k) {
        return DfsOutcome {
            root: *root,
            success: true,
            deepest_level: root.level,
            witness: None,
            leaves_eliminated: 1,
        };
    }
    let mut leaves = 0u64;
    let mut deepest = root.level;
    let witness = dfs_rec(root, cfg, &mut leaves, &mut deepest);
    DfsOutcome {
        root: *root,
        success: witness.is_none(),
        deepest_level: deepest,
        witness,
        leaves_eliminated: leaves,
    }
}

fn dfs_rec(cube: &Cube6, cfg: &SearchConfig, leaves: &mut u64, deepest: &mut u8) -> Option<Cube6> {
    let child_level = cube.level + 1;
    *deepest = (*deepest).max(child_level);
    let k = cfg.sqrt_precision;
    let subs_b: Vec<Cell2> = Cube6::child_cells(&cube.b)
        .into_iter()
        .filter(|c| cell_meets_circle(c, child_level))
        .collect();
    let subs_c: Vec<Cell2> = Cube6::child_cells(&cube.c)
        .into_iter()
        .filter(|c| cell_meets_circle(c, child_level))
        .collect();
    let subs_d: Vec<Cell2> = Cube6::child_cells(&cube.d)
        .into_iter()
        .filter(|c| cell_meets_disk(c, child_level))
        .collect();
    let m = edge_log2(child_level);
    let unit = 1i64 << m;
    let ax = (0i64, 0i64);
    let ay = (-unit, -unit);
    let sq = |n: i64| sqrt_upper_num(n, m, k);
    let ab: Vec<u64> = subs_b
        .iter()
        .map(|c| sq(radicand_max_num(ax, ay, cell_x(c), cell_y(c), m)))
        .collect();
    let ac: Vec<u64> = subs_c
        .iter()
        .map(|c| sq(radicand_max_num(ax, ay, cell_x(c), cell_y(c), m)))
        .collect();
    let ad: Vec<u64> = subs_d
        .iter()
        .map(|c| sq(radicand_max_num(ax, ay, cell_x(c), cell_y(c), m)))
        .collect();
    let grid = |xs: &[Cell2], ys: &[Cell2]| -> Vec<u64> {
        let mut out = Vec::with_capacity(xs.len() * ys.len());
        for x in xs {
            for y in ys {
                out.push(sq(radicand_max_num(
                    cell_x(x),
                    cell_y(x),
                    cell_x(y),
                    cell_y(y),
                    m,
                )));
            }
        }
        out
    };
    let bc = grid(&subs_b, &subs_c);
    let bd = grid(&subs_b, &subs_d);
    let cd = grid(&subs_c, &subs_d);
    let lq = |n: i64| sqrt_lower_num(n, m, k);
    let grid_lb = |xs: &[Cell2], ys: &[Cell2]| -> Vec<u64> {
        let mut out = Vec::with_capacity(xs.len() * ys.len());
        for x in xs {
            for y in ys {
                out.push(lq(radicand_min_num(
                    cell_x(x),
                    cell_y(x),
                    cell_x(y),
                    cell_y(y),
                    m,
                )));
            }
        }
        out
    };
    let bd_lb = grid_lb(&subs_b, &subs_d);
    let cd_lb = grid_lb(&subs_c, &subs_d);
    let nc = subs_c.len();
    let nd = subs_d.len();
    for (i, b) in subs_b.iter().enumerate() {
        for (j, c) in subs_c.iter().enumerate() {
            for (l, d) in subs_d.iter().enumerate() {
                if ad[l] < bd_lb[i * nd + l] || ad[l] < cd_lb[j * nd + l] {
                    *leaves += 1;
                    continue;
                }
                let uppers = [
                    ab[i],
                    ac[j],
                    bc[i * nc + j],
                    ad[l],
                    bd[i * nd + l],
                    cd[j * nd + l],
                ];
                if sum_test_num(&uppers, k).0 {
                    *leaves += 1;
                    continue;
                }
                let child = Cube6::new(*b, *c, *d, child_level);
                if child_level >= cfg.dfs_max_level {
                    return Some(child);
                }
                if let Some(w) = dfs_rec(&child, cfg, leaves, deepest) {
                    return Some(w);
                }
            }
        }
    }
    None
}

#[derive(Clone, Debug)]
pub struct GlobalCertificate {
    pub bound_filter: bool,
    pub exclude_neighborhood: bool,
    pub sqrt_precision: u32,
    pub worker_count: usize,
    pub bfs_levels: Vec<u8>,
    pub dfs_max_level: u8,
    pub rounds: Vec<RoundStats>,
    pub dfs: DfsStats,
    pub witnesses: Vec<Cube6>,
    pub records: Vec<CubeVerdict>,
    pub valid: bool,
    pub total_seconds: f64,
}

/// Runs the complete pipeline: the level-0 cover, breadth-first rounds at the
/// configured levels, depth-first refinement of the survivors. The
/// certificate is valid iff no witness remains.
pub fn run_global(
    cfg: &SearchConfig,
    nbhd: &NeighborhoodSpec,
) -> Result<GlobalCertificate, SearchError> {
    cfg.validate()?;
    let run = || run_global_inner(cfg, nbhd);
    if cfg.worker_count > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.worker_count)
            .build()
            .map_err(|e| SearchError::BadConfig(e.to_string()))?;
        Ok(pool.install(run))
    } else {
        Ok(run())
    }
}

fn run_global_inner(cfg: &SearchConfig, nbhd: &NeighborhoodSpec) -> GlobalCertificate {
    let start = Instant::now();
    let table = DistanceBoundTable::default();
    let mut cubes = build_initial_cover();
    let mut rounds = Vec::new();
    let mut records = Vec::new();
    for &level in &cfg.bfs_levels {
        let (surv, stats, recs) = bfs_round(&cubes, level, nbhd, &table, cfg);
        rounds.push(stats);
        records.extend(recs);
        cubes = surv;
    }

    let dfs_start = Instant::now();
    let fail_counter = AtomicUsize::new(0);
    let outcomes: Vec<Option<DfsOutcome>> = cubes
        .par_iter()
        .map(|c| {
            if let Some(limit) = cfg.fail_fast {
                if fail_counter.load(Ordering::Relaxed) >= limit {
                    return None;
                }
            }
            let o = dfs_verify(c, cfg);
            if !o.success {
                fail_counter.fetch_add(1, Ordering::Relaxed);
            }
            Some(o)
        })
        .collect();
    let mut dfs = DfsStats {
        roots: cubes.len() as u64,
        ..Default::default()
    };
    let mut witnesses = Vec::new();
    for o in outcomes {
        match o {
            None => dfs.skipped += 1,
            Some(o) => {
                dfs.leaves_eliminated += o.leaves_eliminated;
                if o.success {
                    *dfs.resolved_at.entry(o.deepest_level).or_insert(0) += 1;
                } else {
                    dfs.failures += 1;
                    if let Some(w) = o.witness {
                        if cfg.record_mode != RecordMode::Off {
                            records.push(CubeVerdict {
                                cube: w,
                                verdict: Verdict::ExhaustedDepth,
                                bound_value: None,
                            });
                        }
                        witnesses.push(w);
                    }
                }
            }
        }
    }
    dfs.seconds = dfs_start.elapsed().as_secs_f64();

    let valid = witnesses.is_empty() && dfs.skipped == 0;
    GlobalCertificate {
        bound_filter: cfg.use_bound_filter,
        exclude_neighborhood: cfg.exclude_neighborhood,
        sqrt_precision: cfg.sqrt_precision,
        worker_count: cfg.worker_count,
        bfs_levels: cfg.bfs_levels.clone(),
        dfs_max_level: cfg.dfs_max_level,
        rounds,
        dfs,
        witnesses,
        records,
        valid,
        total_seconds: start.elapsed().as_secs_f64(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{rat_int, sqrt_upper};
    use crate::geometry::{
        box_meets_circle, box_meets_disk, config_from_params, cube_in_neighborhood, radicand, Box2,
        ParamVector, Point2,
    };
    use num_traits::One;
    use num_traits::{Signed, Zero};
    use rand::{Rng, SeedableRng};

    fn optimum_cube(level: u8) -> Cube6 {
        // cells containing B = (1, 0), C = (-1, 0), D = (0, 1)
        let top = (1i64 << edge_log2(level)) as i32;
        Cube6::new(
            Cell2::new(top - 1, 0),
            Cell2::new(-top, 0),
            Cell2::new(0, top - 1),
            level,
        )
    }

    #[test]
    fn initial_cover_counts() {
        let cover = build_initial_cover();
        assert_eq!(cover.len(), 806_400);
        assert!(cover.iter().all(|c| c.edge() == rat(1, 8)));
    }

    #[test]
    fn random_feasible_config_lies_in_cover() {
        let cover = build_initial_cover();
        use std::collections::HashSet;
        let keys: HashSet<(Cell2, Cell2, Cell2)> = cover.iter().map(|c| (c.b, c.c, c.d)).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let cell_of = |x: &Rat, y: &Rat| -> Vec<Cell2> {
            // all level-0 cells containing the point (boundary points belong
            // to several)
            let mut out = Vec::new();
            for ix in -8..8i32 {
                for iy in -8..8i32 {
                    let c = Cell2::new(ix, iy);
                    let b = Cube6::cell_box(&c, 0);
                    if b.contains_point(&Point2::new(x.clone(), y.clone())) {
                        out.push(c);
                    }
                }
            }
            out
        };
        for _ in 0..300 {
            let s = rat(rng.gen_range(-999..999), 1000);
            let t = rat(rng.gen_range(-999..999), 1000);
            let v = rat(rng.gen_range(0..999), 1000);
            let vmax: i64 = (&v * rat_int(1000)).to_integer().try_into().unwrap();
            let u = rat(
                if vmax == 0 {
                    0
                } else {
                    rng.gen_range(-vmax..=vmax)
                },
                1000,
            );
            let cfg = config_from_params(&ParamVector::new(s, t, u, v)).unwrap();
            let found = cell_of(&cfg.b.x, &cfg.b.y).iter().any(|bc| {
                cell_of(&cfg.c.x, &cfg.c.y).iter().any(|cc| {
                    cell_of(&cfg.d1.x, &cfg.d1.y)
                        .iter()
                        .any(|dc| keys.contains(&(*bc, *cc, *dc)))
                })
            });
            assert!(found, "feasible configuration not covered");
        }
    }

    #[test]
    fn pair_bound_examples() {
        // the cube containing the square configuration bounds BC >= 2
        let cube = optimum_cube(0);
        let bc = pair_distance_upper(&cube, 2, 30);
        assert!(bc >= rat_int(2));
        // pair bounds dominate the distances of sampled configurations inside
        let p = ParamVector::new(rat(1, 50), rat(1, 60), rat(0, 1), rat(1, 40));
        let cfg = config_from_params(&p).unwrap();
        assert!(cube.contains_config(&cfg));
        for (i, r) in cfg.radicands().iter().enumerate() {
            let bound = pair_distance_upper(&cube, i, 30);
            // distance^2 = r <= bound^2
            assert!(r <= &(&bound * &bound), "pair {i}");
        }
    }

    #[test]
    fn pair_bound_matches_rational_route() {
        // independent route: exact corner products on rational boxes plus the
        // bignum certified square root
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for _ in 0..400 {
            let level = rng.gen_range(0..=3u8);
            let top = (1i64 << edge_log2(level)) as i32;
            let cell = |rng: &mut rand_chacha::ChaCha8Rng| {
                Cell2::new(rng.gen_range(-top..top), rng.gen_range(-top..top))
            };
            let cube = Cube6::new(cell(&mut rng), cell(&mut rng), cell(&mut rng), level);
            let [bb, cb, db] = cube.boxes();
            let a_box = Box2::new(Rat::zero(), Rat::zero(), -Rat::one(), -Rat::one());
            let boxes = [&a_box, &bb, &cb, &db];
            let pairs: [(usize, usize); 6] = [(0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (2, 3)];
            for (pi, (x, y)) in pairs.iter().enumerate() {
                let (b1, b2) = (boxes[*x], boxes[*y]);
                let xx = b1.x_interval().mul(&b2.x_interval());
                let yy = b1.y_interval().mul(&b2.y_interval());
                let rad_max = rat_int(2) - rat_int(2) * xx.lo - rat_int(2) * yy.lo;
                let got = pair_distance_upper(&cube, pi, 30);
                if rad_max.is_negative() {
                    assert!(got.is_zero(), "pair {pi} cube {cube}");
                    continue;
                }
                // sound: the bound squared dominates the exact radicand max
                assert!(&got * &got >= rad_max, "pair {pi} cube {cube}");
                // tight: within 2^-29 of a finer-grained certified bound
                let fine = sqrt_upper(&rad_max, 40).unwrap();
                assert!(&got - &fine <= rat(1, 1 << 29), "pair {pi} cube {cube}");
            }
        }
    }

    #[test]
    fn bound_test_examples() {
        let table = DistanceBoundTable::default();
        assert!(table.is_nondecreasing());
        // all three points confined next to A: every distance is tiny
        let near_a = Cell2::new(0, -8);
        let cube = Cube6::new(near_a, near_a, near_a, 0);
        assert!(!distance_bound_test(&cube, &table, 30));
        // the cube containing the square configuration passes
        assert!(distance_bound_test(&optimum_cube(0), &table, 30));
    }

    #[test]
    fn sum_test_examples() {
        // a cube far from any optimum is eliminated
        let far = Cell2::new(-1, -8); // box [-1/8, 0] x [-1, -7/8]
        let cube = Cube6::new(far, far, far, 0);
        let v = distance_sum_test(&cube, 30);
        assert_eq!(v.verdict, Verdict::EliminatedBySumTest);
        assert!(v.bound_value.unwrap() < rat_int(10));
        // cubes containing the square configuration are never eliminated
        for level in 0..=4 {
            let v = distance_sum_test(&optimum_cube(level), 30);
            assert_eq!(v.verdict, Verdict::Subdivided, "level {level}");
        }
        // the mirrored labeling is never eliminated either
        let top = 1i64 << edge_log2(2);
        let mirror = Cube6::new(
            Cell2::new(-top as i32, 0),
            Cell2::new(top as i32 - 1, 0),
            Cell2::new(0, top as i32 - 1),
            2,
        );
        assert_eq!(distance_sum_test(&mirror, 30).verdict, Verdict::Subdivided);
    }

    #[test]
    fn anchor_test_keeps_canonical_and_drops_rotated_labelings() {
        // the optimal configuration with D at the top is canonical: AD = 2 is
        // the largest of the three anchored distances
        for level in 0..=4u8 {
            assert!(
                anchor_farthest_test(&optimum_cube(level), 30),
                "level {level}"
            );
        }
        // a relabeled optimum with D at (1, 0) has AD = sqrt2 < CD = 2 and is
        // certified away once the cube is small enough
        let top = 1i64 << edge_log2(2);
        let rotated = Cube6::new(
            Cell2::new(-1, top as i32 - 1), // B near (0, 1)
            Cell2::new(-top as i32, 0),     // C near (-1, 0)
            Cell2::new(top as i32 - 1, 0),  // D near (1, 0)
            2,
        );
        assert!(!anchor_farthest_test(&rotated, 30));
        // the sum test alone can never eliminate it
        assert_eq!(distance_sum_test(&rotated, 30).verdict, Verdict::Subdivided);
        // and depth-first refinement with the reduction resolves it
        let cfg = SearchConfig {
            dfs_max_level: 4,
            ..Default::default()
        };
        let o = dfs_verify(&rotated, &cfg);
        assert!(o.success);
    }

    #[test]
    fn sum_test_monotone_in_precision() {
        let cover = build_initial_cover();
        let mut stride_sample: Vec<&Cube6> = cover.iter().step_by(1009).collect();
        stride_sample.truncate(800);
        for cube in stride_sample {
            let lo = distance_sum_test(cube, 8).verdict == Verdict::EliminatedBySumTest;
            let hi = distance_sum_test(cube, 30).verdict == Verdict::EliminatedBySumTest;
            // more precision can only eliminate more
            assert!(!lo || hi, "cube {cube}");
        }
    }

    #[test]
    fn bfs_round_structure() {
        let nbhd = NeighborhoodSpec::default();
        let table = DistanceBoundTable::default();
        let cfg = SearchConfig::default();
        let (surv, stats, _) = bfs_round(&[], 1, &nbhd, &table, &cfg);
        assert!(surv.is_empty());
        assert_eq!(stats.input, 0);

        let parent = optimum_cube(0);
        let (surv, stats, _) = bfs_round(&[parent], 1, &nbhd, &table, &cfg);
        assert_eq!(stats.input, 1);
        assert_eq!(stats.children_raw, 4096);
        assert!(stats.feasible < 4096);
        assert!(stats.excluded > 0); // children containing the optimum are excluded
                                     // survivors are children of the input
        for s in &surv {
            assert_eq!(s.level, 1);
            assert!(s.b.ix / 4 == parent.b.ix && s.b.iy / 4 == parent.b.iy);
        }
    }

    #[test]
    fn dfs_examples() {
        let cfg = SearchConfig {
            dfs_max_level: 3,
            ..Default::default()
        };
        // an already-eliminable cube resolves at its own level
        let far = Cell2::new(-1, -8);
        let cube = Cube6::new(far, far, far, 1);
        let o = dfs_verify(&cube, &cfg);
        assert!(o.success);
        assert_eq!(o.deepest_level, 1);
        // a cube containing the optimum exhausts the depth and yields a witness
        let o = dfs_verify(&optimum_cube(1), &cfg);
        assert!(!o.success);
        let w = o.witness.unwrap();
        assert_eq!(w.level, 3);
        // the witness clusters around the optimal configuration
        let [bb, cb, db] = w.boxes();
        let close = |b: &Box2, x: i64, y: i64| {
            (&b.x_lo - rat_int(x)).abs() <= rat(1, 16) && (&b.y_lo - rat_int(y)).abs() <= rat(1, 16)
        };
        assert!(
            close(&bb, 1, 0) && close(&cb, -1, 0) && close(&db, 0, 1),
            "witness {w}"
        );
    }

    #[test]
    fn compiled_table_agrees_with_exact_comparisons() {
        let table = DistanceBoundTable::default();
        let k = 30u32;
        let compiled = table.compile(k);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(52);
        let den = BigInt::from(1u64) << k as usize;
        for _ in 0..20_000 {
            let u: u64 = rng.gen_range(0..(3u64 << k));
            let uq = Q2::from_rat(Rat::new(BigInt::from(u), den.clone()));
            for (entry, bound) in compiled.entries.iter().zip(table.bounds.iter()) {
                let exact = q2_sign(&(bound - &uq)) > 0;
                assert_eq!(entry.exceeds(u), exact, "u={u}");
            }
        }
    }

    #[test]
    fn trustless_mode_skips_the_order_filter() {
        let cover = build_initial_cover();
        let sample: Vec<Cube6> = cover.iter().step_by(1777).cloned().collect();
        let nbhd = NeighborhoodSpec::default();
        let table = DistanceBoundTable::default();
        let filtered = SearchConfig::default();
        let trustless = SearchConfig {
            use_bound_filter: false,
            ..Default::default()
        };
        let (surv_f, stats_f, _) = bfs_round(&sample, 1, &nbhd, &table, &filtered);
        let (surv_t, stats_t, _) = bfs_round(&sample, 1, &nbhd, &table, &trustless);
        assert_eq!(stats_t.bound_eliminated, 0);
        assert!(stats_t.survivors >= stats_f.survivors);
        // everything the filter would have removed must fall to the sum test
        // eventually; at this level the survivors form a superset
        let set_f: std::collections::HashSet<_> = surv_f.iter().collect();
        assert!(surv_t.iter().filter(|c| set_f.contains(c)).count() == set_f.len());
    }

    #[test]
    fn deterministic_across_worker_counts() {
        let cover = build_initial_cover();
        let sample: Vec<Cube6> = cover.iter().step_by(2503).cloned().collect();
        let nbhd = NeighborhoodSpec::default();
        let table = DistanceBoundTable::default();
        let cfg = SearchConfig::default();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| bfs_round(&sample, 1, &nbhd, &table, &cfg))
        };
        let (s1, st1, _) = run(1);
        let (s2, st2, _) = run(2);
        assert_eq!(s1, s2);
        assert_eq!(st1.survivors, st2.survivors);
        assert_eq!(st1.sum_eliminated, st2.sum_eliminated);
        assert_eq!(st1.bound_eliminated, st2.bound_eliminated);
    }

    #[test]
    fn radicand_kernel_matches_rational_arithmetic() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let level = rng.gen_range(0..=4u8);
            let m = edge_log2(level);
            let top = (1i64 << m) as i32;
            let c1 = Cell2::new(rng.gen_range(-top..top), rng.gen_range(-top..top));
            let c2 = Cell2::new(rng.gen_range(-top..top), rng.gen_range(-top..top));
            let n = radicand_max_num(cell_x(&c1), cell_y(&c1), cell_x(&c2), cell_y(&c2), m);
            // reference via rational boxes and corner enumeration
            let b1 = Cube6::cell_box(&c1, level);
            let b2 = Cube6::cell_box(&c2, level);
            let mut best: Option<Rat> = None;
            for x1 in [&b1.x_lo, &b1.x_hi] {
                for y1 in [&b1.y_lo, &b1.y_hi] {
                    for x2 in [&b2.x_lo, &b2.x_hi] {
                        for y2 in [&b2.y_lo, &b2.y_hi] {
                            let r = radicand(
                                &Point2::new(x1.clone(), y1.clone()),
                                &Point2::new(x2.clone(), y2.clone()),
                            );
                            best = Some(match best {
                                None => r,
                                Some(b) => b.max(r),
                            });
                        }
                    }
                }
            }
            let den = BigInt::from(1i64) << (2 * m) as usize;
            assert_eq!(Rat::new(BigInt::from(n), den), best.unwrap());
        }
    }

    #[test]
    fn cell_predicates_match_box_predicates() {
        for level in 0..=2u8 {
            let top = (1i64 << edge_log2(level)) as i32;
            let step = (top / 4).max(1) as usize;
            for ix in (-top..top).step_by(step) {
                for iy in (-top..top).step_by(step) {
                    let c = Cell2::new(ix, iy);
                    let b = Cube6::cell_box(&c, level);
                    assert_eq!(cell_meets_circle(&c, level), box_meets_circle(&b));
                    assert_eq!(cell_meets_disk(&c, level), box_meets_disk(&b));
                }
            }
        }
    }

    #[test]
    fn excluded_cube_recognized() {
        let nbhd = NeighborhoodSpec::default();
        let cube = Cube6::new(Cell2::new(31, 0), Cell2::new(-32, 0), Cell2::new(0, 31), 1);
        assert!(cube_in_neighborhood(&cube, &nbhd));
    }

    #[test]
    fn scaled_containment_matches_rational_containment() {
        let spec = NeighborhoodSpec::default();
        for level in 0..=3u8 {
            let scaled = ScaledNeighborhoods::at_level(&spec, level);
            let top = (1i64 << edge_log2(level)) as i32;
            let step = (top / 8).max(1) as usize;
            for ix in (-top..top).step_by(step) {
                for iy in (-top..top).step_by(step) {
                    let c = Cell2::new(ix, iy);
                    let b = Cube6::cell_box(&c, level);
                    assert_eq!(
                        scaled.u.contains_cell(&c),
                        spec.u_box().contains_box(&b),
                        "U level {level} cell {c:?}"
                    );
                    assert_eq!(
                        scaled.v.contains_cell(&c),
                        spec.v_box().contains_box(&b),
                        "V level {level} cell {c:?}"
                    );
                    assert_eq!(
                        scaled.w1.contains_cell(&c),
                        spec.w1_box().contains_box(&b),
                        "W1 level {level} cell {c:?}"
                    );
                }
            }
            // the corner cells of the neighborhoods themselves
            if level >= 1 {
                let edge_cells = (1i64 << edge_log2(level)) as i32;
                let c = Cell2::new(edge_cells - 1, 0);
                assert!(scaled.u.contains_cell(&c));
                assert!(spec.u_box().contains_box(&Cube6::cell_box(&c, level)));
            }
        }
    }
}
