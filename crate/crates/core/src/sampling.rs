//! Latin-hypercube collocation points, nested training ladders, validation
//! splits and the uniform test grid.
//!
//! All randomness comes from `ChaCha8Rng` seeded with the caller's seed, so
//! datasets are reproducible across platforms.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{FieldState, Point2};
use crate::error::{PinnError, Result};
use crate::physics::{DomainSpec, ExactSolution};

/// Name of the generator backing every sampler in this module.
pub const RNG_NAME: &str = "ChaCha8Rng";

/// Domain points per boundary point.
pub const DOMAIN_TO_BOUNDARY: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Edge {
    #[serde(rename = "edge-S")]
    South,
    #[serde(rename = "edge-E")]
    East,
    #[serde(rename = "edge-N")]
    North,
    #[serde(rename = "edge-W")]
    West,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::South, Edge::East, Edge::North, Edge::West];

    pub fn tag(self) -> &'static str {
        match self {
            Edge::South => "edge-S",
            Edge::East => "edge-E",
            Edge::North => "edge-N",
            Edge::West => "edge-W",
        }
    }

    /// Point on this edge at position `s` along it (x for S/N, y for E/W).
    pub fn point(self, rect: &DomainSpec, s: f64) -> Point2 {
        match self {
            Edge::South => Point2::new(s, rect.y_min),
            Edge::North => Point2::new(s, rect.y_max),
            Edge::West => Point2::new(rect.x_min, s),
            Edge::East => Point2::new(rect.x_max, s),
        }
    }

    fn span(self, rect: &DomainSpec) -> (f64, f64) {
        match self {
            Edge::South | Edge::North => (rect.x_min, rect.x_max),
            Edge::East | Edge::West => (rect.y_min, rect.y_max),
        }
    }

    pub fn contains(self, rect: &DomainSpec, p: Point2) -> bool {
        let (lo, hi) = self.span(rect);
        match self {
            Edge::South => p.y == rect.y_min && (lo..=hi).contains(&p.x),
            Edge::North => p.y == rect.y_max && (lo..=hi).contains(&p.x),
            Edge::West => p.x == rect.x_min && (lo..=hi).contains(&p.y),
            Edge::East => p.x == rect.x_max && (lo..=hi).contains(&p.y),
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Edge {
    type Err = PinnError;

    fn from_str(s: &str) -> Result<Self> {
        Edge::ALL
            .into_iter()
            .find(|e| e.tag() == s)
            .ok_or_else(|| PinnError::Argument(format!("unknown edge tag {s:?}")))
    }
}

/// Dirichlet data `(g_Mx, g_My, g_E)` at a boundary point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Dirichlet {
    pub u: f64,
    pub v: f64,
    pub theta: f64,
}

impl Dirichlet {
    pub fn from_state(s: &FieldState) -> Self {
        Dirichlet {
            u: s.u,
            v: s.v,
            theta: s.theta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub point: Point2,
    pub edge: Edge,
    pub target: Dirichlet,
}

/// Training points: interior samples plus tagged boundary samples with
/// their Dirichlet data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollocationSet {
    pub domain_points: Vec<Point2>,
    pub boundary_points: Vec<BoundaryPoint>,
    pub level: usize,
    pub seed: u64,
}

impl CollocationSet {
    pub fn total(&self) -> usize {
        self.domain_points.len() + self.boundary_points.len()
    }

    pub fn per_edge_counts(&self) -> [usize; 4] {
        let mut counts = [0; 4];
        for b in &self.boundary_points {
            let k = Edge::ALL.iter().position(|e| *e == b.edge).unwrap();
            counts[k] += 1;
        }
        counts
    }

    /// Replace the Dirichlet data from a (possibly different) exact solution.
    pub fn with_targets(mut self, solution: &dyn ExactSolution) -> Self {
        for b in &mut self.boundary_points {
            b.target = Dirichlet::from_state(&solution.exact(b.point));
        }
        self
    }
}

fn lhs_1d<R: Rng>(n: usize, lo: f64, hi: f64, rng: &mut R) -> Vec<f64> {
    let mut strata: Vec<usize> = (0..n).collect();
    strata.shuffle(rng);
    let width = (hi - lo) / n as f64;
    strata
        .into_iter()
        .map(|s| {
            let u: f64 = rng.gen();
            lo + (s as f64 + u) * width
        })
        .collect()
}

fn lhs_2d<R: Rng>(n: usize, rect: &DomainSpec, rng: &mut R) -> Vec<Point2> {
    let xs = lhs_1d(n, rect.x_min, rect.x_max, rng);
    let ys = lhs_1d(n, rect.y_min, rect.y_max, rng);
    xs.into_iter().zip(ys).map(|(x, y)| Point2::new(x, y)).collect()
}

/// `n` Latin-hypercube points in `rect`: one sample per stratum and
/// dimension, uniform jitter inside each stratum, random pairing.
pub fn latin_hypercube(n: usize, rect: &DomainSpec, seed: u64) -> Result<Vec<Point2>> {
    if n == 0 {
        return Err(PinnError::Argument("latin hypercube needs n >= 1".into()));
    }
    rect.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(lhs_2d(n, rect, &mut rng))
}

/// Boundary points per edge at a hierarchy level.
pub fn points_per_edge(level: usize) -> usize {
    1 << level
}

/// `(domain, boundary)` sizes of a hierarchy level.
pub fn level_sizes(level: usize) -> (usize, usize) {
    let boundary = 4 * points_per_edge(level);
    (DOMAIN_TO_BOUNDARY * boundary, boundary)
}

/// Nested collocation sets: level `k` has `8·2^k` domain and `4·2^k`
/// boundary points, and contains every point of level `k-1` verbatim.
///
/// Each level adds a fresh Latin-hypercube increment in the interior and a
/// 1-D Latin-hypercube increment along each edge, so stratification holds
/// per increment.
pub fn hierarchical_datasets(
    levels: usize,
    rect: &DomainSpec,
    seed: u64,
    solution: &dyn ExactSolution,
) -> Result<Vec<CollocationSet>> {
    if levels == 0 {
        return Err(PinnError::Argument("need at least one level".into()));
    }
    if levels > 16 {
        return Err(PinnError::Argument(format!("{levels} levels is too many")));
    }
    rect.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<CollocationSet> = Vec::with_capacity(levels);
    let mut domain: Vec<Point2> = Vec::new();
    let mut boundary: Vec<BoundaryPoint> = Vec::new();
    for level in 0..levels {
        let (target_domain, target_boundary) = level_sizes(level);
        domain.extend(lhs_2d(target_domain - domain.len(), rect, &mut rng));
        let per_edge = target_boundary / 4 - boundary.len() / 4;
        for edge in Edge::ALL {
            let (lo, hi) = edge.span(rect);
            for s in lhs_1d(per_edge, lo, hi, &mut rng) {
                let point = edge.point(rect, s);
                boundary.push(BoundaryPoint {
                    point,
                    edge,
                    target: Dirichlet::from_state(&solution.exact(point)),
                });
            }
        }
        out.push(CollocationSet {
            domain_points: domain.clone(),
            boundary_points: boundary.clone(),
            level,
            seed,
        });
    }
    Ok(out)
}

/// Split into `(training, validation)`; the validation count is
/// `round_half_up(fraction · total)`, drawn without replacement from the
/// pooled domain and boundary points.
pub fn split_validation(set: &CollocationSet, fraction: f64, seed: u64) -> Result<(CollocationSet, CollocationSet)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(PinnError::Argument(format!(
            "validation fraction must lie in [0, 1), got {fraction}"
        )));
    }
    let total = set.total();
    let count = (fraction * total as f64 + 0.5).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_validation = vec![false; total];
    for i in index::sample(&mut rng, total, count) {
        is_validation[i] = true;
    }
    let nd = set.domain_points.len();
    let mut train = CollocationSet {
        domain_points: Vec::new(),
        boundary_points: Vec::new(),
        level: set.level,
        seed: set.seed,
    };
    let mut valid = train.clone();
    for (i, p) in set.domain_points.iter().enumerate() {
        let dst = if is_validation[i] { &mut valid } else { &mut train };
        dst.domain_points.push(*p);
    }
    for (i, b) in set.boundary_points.iter().enumerate() {
        let dst = if is_validation[nd + i] { &mut valid } else { &mut train };
        dst.boundary_points.push(*b);
    }
    Ok((train, valid))
}

fn lerp(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
    let t = i as f64 / (n - 1) as f64;
    lo * (1.0 - t) + hi * t
}

/// Uniform `n × n` grid including the corners, row-major with `x` fastest,
/// starting at `(x_min, y_min)`.
pub fn test_grid(rect: &DomainSpec, n_per_side: usize) -> Result<Vec<Point2>> {
    if n_per_side < 2 {
        return Err(PinnError::Argument("test grid needs at least 2 points per side".into()));
    }
    rect.validate()?;
    let n = n_per_side;
    Ok((0..n)
        .flat_map(|j| {
            let y = lerp(rect.y_min, rect.y_max, j, n);
            (0..n).map(move |i| Point2::new(lerp(rect.x_min, rect.x_max, i, n), y))
        })
        .collect())
}

/// The grid of [`test_grid`] split into interior points and boundary points
/// (with their edge), for residual estimates on unseen data.
pub fn split_grid(rect: &DomainSpec, n_per_side: usize) -> Result<(Vec<Point2>, Vec<(Point2, Edge)>)> {
    let grid = test_grid(rect, n_per_side)?;
    let n = n_per_side;
    let mut interior = Vec::new();
    let mut boundary = Vec::new();
    for (k, p) in grid.into_iter().enumerate() {
        let (i, j) = (k % n, k / n);
        let edge = if j == 0 {
            Some(Edge::South)
        } else if j == n - 1 {
            Some(Edge::North)
        } else if i == 0 {
            Some(Edge::West)
        } else if i == n - 1 {
            Some(Edge::East)
        } else {
            None
        };
        match edge {
            Some(e) => boundary.push((p, e)),
            None => interior.push(p),
        }
    }
    Ok((interior, boundary))
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    x: f64,
    y: f64,
    kind: String,
    g_u: Option<f64>,
    g_v: Option<f64>,
    g_theta: Option<f64>,
}

/// Write a collocation set as CSV (`x, y, kind, g_u, g_v, g_theta`), with
/// a leading `#` comment carrying level and seed.
pub fn write_collocation_csv<W: Write>(set: &CollocationSet, mut out: W) -> Result<()> {
    writeln!(out, "# level={} seed={} rng={}", set.level, set.seed, RNG_NAME)
        .map_err(|e| PinnError::io("<csv>", e))?;
    let mut w = csv::Writer::from_writer(out);
    for p in &set.domain_points {
        w.serialize(CsvRow {
            x: p.x,
            y: p.y,
            kind: "domain".into(),
            g_u: None,
            g_v: None,
            g_theta: None,
        })?;
    }
    for b in &set.boundary_points {
        w.serialize(CsvRow {
            x: b.point.x,
            y: b.point.y,
            kind: b.edge.tag().into(),
            g_u: Some(b.target.u),
            g_v: Some(b.target.v),
            g_theta: Some(b.target.theta),
        })?;
    }
    w.flush().map_err(|e| PinnError::io("<csv>", e))?;
    Ok(())
}

pub fn read_collocation_csv(text: &str) -> Result<CollocationSet> {
    let mut level = 0;
    let mut seed = 0;
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        for kv in line.trim_start_matches('#').split_whitespace() {
            match kv.split_once('=') {
                Some(("level", v)) => level = v.parse().map_err(|_| bad_meta(kv))?,
                Some(("seed", v)) => seed = v.parse().map_err(|_| bad_meta(kv))?,
                _ => {}
            }
        }
    }
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut set = CollocationSet {
        domain_points: Vec::new(),
        boundary_points: Vec::new(),
        level,
        seed,
    };
    for row in r.deserialize::<CsvRow>() {
        let row = row?;
        let point = Point2::new(row.x, row.y);
        if row.kind == "domain" {
            set.domain_points.push(point);
        } else {
            let edge: Edge = row.kind.parse()?;
            let missing = || PinnError::Argument(format!("boundary row at {point:?} lacks Dirichlet data"));
            set.boundary_points.push(BoundaryPoint {
                point,
                edge,
                target: Dirichlet {
                    u: row.g_u.ok_or_else(missing)?,
                    v: row.g_v.ok_or_else(missing)?,
                    theta: row.g_theta.ok_or_else(missing)?,
                },
            });
        }
    }
    Ok(set)
}

fn bad_meta(kv: &str) -> PinnError {
    PinnError::Argument(format!("malformed metadata {kv:?}"))
}

pub fn save_collocation_csv(set: &CollocationSet, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| PinnError::io(path, e))?;
    write_collocation_csv(set, std::io::BufWriter::new(file))
}

pub fn load_collocation_csv(path: &Path) -> Result<CollocationSet> {
    let text = std::fs::read_to_string(path).map_err(|e| PinnError::io(path, e))?;
    read_collocation_csv(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::Beltrami;
    use proptest::prelude::*;

    fn unit_square() -> DomainSpec {
        DomainSpec::new(0.0, 1.0, 0.0, 1.0).unwrap()
    }

    fn strata(values: impl Iterator<Item = f64>, lo: f64, hi: f64, n: usize) -> Vec<usize> {
        let mut s: Vec<usize> = values
            .map(|v| (((v - lo) / (hi - lo)) * n as f64).floor() as usize)
            .collect();
        s.sort_unstable();
        s
    }

    #[test]
    fn lhs_small_cases() {
        let pts = latin_hypercube(1, &DomainSpec::default(), 3).unwrap();
        assert_eq!(pts.len(), 1);
        assert!(DomainSpec::default().contains(pts[0]));

        let pts = latin_hypercube(4, &unit_square(), 11).unwrap();
        assert_eq!(strata(pts.iter().map(|p| p.x), 0.0, 1.0, 4), vec![0, 1, 2, 3]);
        assert_eq!(strata(pts.iter().map(|p| p.y), 0.0, 1.0, 4), vec![0, 1, 2, 3]);

        assert_eq!(pts, latin_hypercube(4, &unit_square(), 11).unwrap());
        assert!(matches!(
            latin_hypercube(0, &unit_square(), 1),
            Err(PinnError::Argument(_))
        ));
    }

    proptest! {
        #[test]
        fn lhs_is_stratified(n in 1usize..200, seed in any::<u64>()) {
            let rect = DomainSpec::default();
            let pts = latin_hypercube(n, &rect, seed).unwrap();
            let expect: Vec<usize> = (0..n).collect();
            prop_assert_eq!(strata(pts.iter().map(|p| p.x), -1.0, 1.0, n), expect.clone());
            prop_assert_eq!(strata(pts.iter().map(|p| p.y), -1.0, 1.0, n), expect);
        }

        #[test]
        fn validation_split_partitions(seed in any::<u64>(), frac in 0.0f64..0.99) {
            let sets = hierarchical_datasets(3, &DomainSpec::default(), 5, &Beltrami).unwrap();
            let set = &sets[2];
            let (train, valid) = split_validation(set, frac, seed).unwrap();
            prop_assert_eq!(valid.total(), (frac * 48.0 + 0.5).floor() as usize);
            prop_assert_eq!(train.total() + valid.total(), set.total());
            let mut d: Vec<_> = train.domain_points.iter().chain(&valid.domain_points)
                .map(|p| (p.x.to_bits(), p.y.to_bits())).collect();
            let mut orig: Vec<_> = set.domain_points.iter().map(|p| (p.x.to_bits(), p.y.to_bits())).collect();
            d.sort_unstable();
            orig.sort_unstable();
            prop_assert_eq!(d, orig);
        }
    }

    #[test]
    fn hierarchy_matches_dataset_table() {
        let sets = hierarchical_datasets(8, &DomainSpec::default(), 42, &Beltrami).unwrap();
        let totals: Vec<usize> = sets.iter().map(|s| s.total()).collect();
        assert_eq!(totals, vec![12, 24, 48, 96, 192, 384, 768, 1536]);
        assert_eq!(sets[0].domain_points.len(), 8);
        assert_eq!(sets[0].per_edge_counts(), [1; 4]);
        assert_eq!(sets[7].domain_points.len(), 1024);
        assert_eq!(sets[7].boundary_points.len(), 512);
        assert_eq!(sets[7].per_edge_counts(), [128; 4]);
        for w in sets.windows(2) {
            assert!(w[0].domain_points.iter().all(|p| w[1].domain_points.contains(p)));
            assert!(w[0].boundary_points.iter().all(|b| w[1].boundary_points.contains(b)));
            assert_eq!(w[1].domain_points.len(), 2 * w[1].boundary_points.len());
        }
        let rect = DomainSpec::default();
        for b in &sets[7].boundary_points {
            assert!(b.edge.contains(&rect, b.point));
        }
    }

    #[test]
    fn validation_count_rounds_half_up() {
        let sets = hierarchical_datasets(5, &DomainSpec::default(), 1, &Beltrami).unwrap();
        let (train, valid) = split_validation(&sets[4], 0.15, 9).unwrap();
        assert_eq!(valid.total(), 29);
        assert_eq!(train.total(), 163);
        let (_, none) = split_validation(&sets[4], 0.0, 9).unwrap();
        assert_eq!(none.total(), 0);
        assert!(split_validation(&sets[4], 1.0, 9).is_err());
    }

    #[test]
    fn grid_layout() {
        let rect = DomainSpec::default();
        let g = test_grid(&rect, 2).unwrap();
        assert_eq!(
            g,
            vec![
                Point2::new(-1.0, -1.0),
                Point2::new(1.0, -1.0),
                Point2::new(-1.0, 1.0),
                Point2::new(1.0, 1.0)
            ]
        );
        let g = test_grid(&rect, 100).unwrap();
        assert_eq!(g.len(), 10_000);
        assert_eq!(g[0], Point2::new(-1.0, -1.0));
        assert_eq!(g[9_999], Point2::new(1.0, 1.0));
        assert!((g[1].x - g[0].x - 2.0 / 99.0).abs() < 1e-15);
        assert!((g[100].y - g[0].y - 2.0 / 99.0).abs() < 1e-15);
        assert!(test_grid(&rect, 1).is_err());

        let (interior, boundary) = split_grid(&rect, 10).unwrap();
        assert_eq!(interior.len(), 64);
        assert_eq!(boundary.len(), 36);
    }

    #[test]
    fn csv_round_trip() {
        let sets = hierarchical_datasets(2, &DomainSpec::default(), 77, &Beltrami).unwrap();
        let mut buf = Vec::new();
        write_collocation_csv(&sets[1], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("x,y,kind,g_u,g_v,g_theta"));
        assert_eq!(read_collocation_csv(&text).unwrap(), sets[1]);
    }
}
