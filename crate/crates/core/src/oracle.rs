//! Grid oracle: first-arrival times by Dijkstra over an anisotropic neighbour stencil, with
//! edge costs taken from `F` at the edge midpoint.
//!
//! Only meaningful for metrics that do not depend on time. The result is an independent check
//! of the geodesic fronts; it shares the metric evaluation but none of the integration or
//! pruning code.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::front::{FireMap, Ignition};
use crate::geom::{winding_number, AerialPoint, Vec2};
use crate::metric::FireMetric;
use crate::terrain::Domain;

/// Node lattice: node `(i, j)` sits at `origin + (i, j) * cellsize`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub origin: AerialPoint,
    pub cellsize: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    /// `nx` nodes across the width of `domain`, square cells, as many rows as fit.
    pub fn covering(domain: &Domain, nx: usize) -> Self {
        let cellsize = domain.width() / (nx - 1) as f64;
        let ny = (domain.height() / cellsize + 1e-9).floor() as usize + 1;
        GridSpec {
            origin: AerialPoint::new(domain.x_min, domain.y_min),
            cellsize,
            nx,
            ny,
        }
    }

    pub fn node(&self, i: usize, j: usize) -> AerialPoint {
        self.origin + Vec2::new(i as f64, j as f64) * self.cellsize
    }
}

/// Neighbour offsets `(di, dj)` with `max(|di|, |dj|) ≤ radius` and `gcd(di, dj) = 1`.
///
/// Radius 2 gives 16 offsets, radius 3 gives 32.
pub fn stencil(radius: usize) -> Vec<(isize, isize)> {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    let r = radius as isize;
    let mut out = Vec::new();
    for dj in -r..=r {
        for di in -r..=r {
            if gcd(di.unsigned_abs(), dj.unsigned_abs()) == 1 {
                out.push((di, dj));
            }
        }
    }
    out
}

/// First-arrival time at every node, `+∞` where unreached.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalGrid {
    pub spec: GridSpec,
    times: Vec<f64>,
}

impl ArrivalGrid {
    pub fn time(&self, i: usize, j: usize) -> f64 {
        self.times[j * self.spec.nx + i]
    }

    /// Bilinear interpolation; `None` outside the grid or next to an unreached node.
    pub fn sample(&self, p: AerialPoint) -> Option<f64> {
        let s = &self.spec;
        let gx = (p.x - s.origin.x) / s.cellsize;
        let gy = (p.y - s.origin.y) / s.cellsize;
        if !(gx >= 0.0 && gy >= 0.0 && gx <= (s.nx - 1) as f64 && gy <= (s.ny - 1) as f64) {
            return None;
        }
        let i = (gx.floor() as usize).min(s.nx - 2);
        let j = (gy.floor() as usize).min(s.ny - 2);
        let (u, v) = (gx - i as f64, gy - j as f64);
        let c = [
            self.time(i, j),
            self.time(i + 1, j),
            self.time(i, j + 1),
            self.time(i + 1, j + 1),
        ];
        if c.iter().any(|t| !t.is_finite()) {
            return None;
        }
        Some((1.0 - v) * ((1.0 - u) * c[0] + u * c[1]) + v * ((1.0 - u) * c[2] + u * c[3]))
    }

    /// ESRI ASCII grid with the same header as terrain input; unreached nodes are `-9999`.
    pub fn to_dem_string(&self) -> String {
        let s = &self.spec;
        let mut out = String::new();
        let _ = writeln!(out, "ncols {}", s.nx);
        let _ = writeln!(out, "nrows {}", s.ny);
        let _ = writeln!(out, "xllcorner {:?}", s.origin.x - 0.5 * s.cellsize);
        let _ = writeln!(out, "yllcorner {:?}", s.origin.y - 0.5 * s.cellsize);
        let _ = writeln!(out, "cellsize {:?}", s.cellsize);
        let _ = writeln!(out, "NODATA_value -9999");
        for j in (0..s.ny).rev() {
            let row: Vec<String> = (0..s.nx)
                .map(|i| {
                    let t = self.time(i, j);
                    if t.is_finite() {
                        format!("{t:.9e}")
                    } else {
                        "-9999".to_string()
                    }
                })
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    t: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // min-heap on time, ties broken by node index for a deterministic order
    fn cmp(&self, other: &Self) -> Ordering {
        other.t.total_cmp(&self.t).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Travel time along the straight segment `p → q`, with the metric frozen at its midpoint.
fn segment_cost(metric: &FireMetric, p: AerialPoint, q: AerialPoint) -> f64 {
    let d = q - p;
    if d.is_zero() {
        return 0.0;
    }
    metric
        .metric_value(0.0, p.lerp(q, 0.5), d)
        .unwrap_or(f64::INFINITY)
}

/// Dijkstra first-arrival times from `ignition` for a time-independent metric.
///
/// Nodes inside a closed ignition set start at 0. Nodes within `radius` cells of the
/// ignition point (or of the ignition boundary, from outside) start at the direct segment
/// cost. `t_end` is only used to check that no field varies in time.
pub fn grid_arrival(
    metric: &FireMetric,
    ignition: &Ignition,
    spec: &GridSpec,
    radius: usize,
    t_end: f64,
) -> Result<ArrivalGrid> {
    let domain = *metric.terrain().domain();
    if let Some(name) = metric.fields().time_dependent_field(&domain, t_end)? {
        return Err(Error::TimeDependentMetric(name));
    }
    if spec.nx < 2 || spec.ny < 2 || !(spec.cellsize > 0.0) {
        return Err(Error::config("oracle.grid", "need at least 2x2 nodes and a positive cellsize"));
    }
    let (nx, ny) = (spec.nx, spec.ny);
    let offsets = stencil(radius);
    let inside = |i: isize, j: isize| i >= 0 && j >= 0 && (i as usize) < nx && (j as usize) < ny;

    // edge costs, one row of offsets per node
    let costs: Vec<f64> = (0..nx * ny)
        .into_par_iter()
        .flat_map_iter(|n| {
            let (i, j) = ((n % nx) as isize, (n / nx) as isize);
            let p = spec.node(i as usize, j as usize);
            offsets.iter().map(move |&(di, dj)| {
                let (qi, qj) = (i + di, j + dj);
                if !inside(qi, qj) {
                    return f64::INFINITY;
                }
                let q = spec.node(qi as usize, qj as usize);
                if !domain.contains(p) || !domain.contains(q) {
                    return f64::INFINITY;
                }
                segment_cost(metric, p, q)
            })
        })
        .collect();

    let mut times = vec![f64::INFINITY; nx * ny];
    let reach = radius as f64 * spec.cellsize;
    match ignition {
        Ignition::Point(p0) => {
            if !domain.contains(*p0) {
                return Err(Error::OutOfDomain { x: p0.x, y: p0.y });
            }
            for (n, t) in times.iter_mut().enumerate() {
                let q = spec.node(n % nx, n / nx);
                if (q - *p0).norm() <= reach * (1.0 + 1e-12) {
                    *t = segment_cost(metric, *p0, q);
                }
            }
        }
        closed => {
            let boundary: Vec<AerialPoint> = closed.samples(2048)?.into_iter().map(|s| s.point).collect();
            if let Some(p) = boundary.iter().find(|p| !domain.contains(**p)) {
                return Err(Error::OutOfDomain { x: p.x, y: p.y });
            }
            let (lo, hi) = boundary.iter().fold(
                (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY)),
                |(lo, hi), p| (Vec2::new(lo.x.min(p.x), lo.y.min(p.y)), Vec2::new(hi.x.max(p.x), hi.y.max(p.y))),
            );
            times.par_iter_mut().enumerate().for_each(|(n, t)| {
                let q = spec.node(n % nx, n / nx);
                if q.x < lo.x - reach || q.x > hi.x + reach || q.y < lo.y - reach || q.y > hi.y + reach {
                    return;
                }
                if winding_number(&boundary, q) != 0 {
                    *t = 0.0;
                    return;
                }
                *t = boundary
                    .iter()
                    .filter(|b| (q - **b).norm() <= reach)
                    .map(|b| segment_cost(metric, *b, q))
                    .fold(f64::INFINITY, f64::min);
            });
        }
    }

    let mut heap: BinaryHeap<Entry> = times
        .iter()
        .enumerate()
        .filter(|(_, t)| t.is_finite())
        .map(|(node, &t)| Entry { t, node })
        .collect();
    let mut done = vec![false; nx * ny];
    let m = offsets.len();
    while let Some(Entry { t, node }) = heap.pop() {
        if done[node] || t > times[node] {
            continue;
        }
        done[node] = true;
        let (i, j) = ((node % nx) as isize, (node / nx) as isize);
        for (o, &(di, dj)) in offsets.iter().enumerate() {
            let c = costs[node * m + o];
            if !c.is_finite() {
                continue;
            }
            let next = ((j + dj) as usize) * nx + (i + di) as usize;
            let tn = t + c;
            if tn < times[next] {
                times[next] = tn;
                heap.push(Entry { t: tn, node: next });
            }
        }
    }
    Ok(ArrivalGrid { spec: *spec, times })
}

/// Relative deviation statistics between a front and the arrival grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontComparison {
    pub t: f64,
    /// Front vertices that could be sampled.
    pub samples: usize,
    /// Front vertices outside the grid or next to unreached nodes.
    pub skipped: usize,
    pub median: f64,
    pub p95: f64,
    pub max: f64,
}

impl FrontComparison {
    pub fn within(&self, median: f64, p95: f64) -> bool {
        self.samples > 0 && self.median <= median && self.p95 <= p95
    }
}

/// Nearest-rank percentile of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// For each live front vertex at `t`, `|arrival(p) − t| / t`.
pub fn compare_front(arrival: &ArrivalGrid, map: &FireMap, t: f64) -> Result<FrontComparison> {
    let front = map.front_polygon(t)?;
    if front.points.is_empty() {
        return Err(Error::EmptyFront(t));
    }
    let mut dev: Vec<f64> = front
        .points
        .iter()
        .filter_map(|p| arrival.sample(*p))
        .map(|a| (a - front.t).abs() / front.t)
        .collect();
    let skipped = front.points.len() - dev.len();
    if dev.is_empty() {
        return Err(Error::EmptyFront(t));
    }
    dev.sort_by(f64::total_cmp);
    Ok(FrontComparison {
        t: front.t,
        samples: dev.len(),
        skipped,
        median: percentile(&dev, 0.5),
        p95: percentile(&dev, 0.95),
        max: dev[dev.len() - 1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{EnvironmentFields, ScalarField, WindFrame};
    use crate::front::{propagate, SolverConfig};
    use crate::terrain::Terrain;

    fn flat(fields: EnvironmentFields, half: f64) -> FireMetric {
        FireMetric::new(Terrain::flat(Domain::new(-half, half, -half, half)), fields)
    }

    #[test]
    fn stencil_sizes() {
        assert_eq!(stencil(2).len(), 16);
        assert_eq!(stencil(3).len(), 32);
        assert!(stencil(3).iter().all(|&(i, j)| (i, j) != (0, 0)));
    }

    #[test]
    fn isotropic_distance() {
        let m = flat(EnvironmentFields::slope_only(2.0, 1.0), 4.0);
        let spec = GridSpec::covering(m.terrain().domain(), 161);
        let g = grid_arrival(&m, &Ignition::Point(Vec2::ZERO), &spec, 3, 1.0).unwrap();
        assert_eq!(g.time(80, 80), 0.0);
        let mut worst: f64 = 0.0;
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                let p = spec.node(i, j);
                let r = p.norm();
                if r > 0.5 {
                    worst = worst.max((g.time(i, j) - r / 3.0).abs() / (r / 3.0));
                }
            }
        }
        assert!(worst <= 0.02, "{worst}");
    }

    #[test]
    fn wind_downwind_arrival() {
        let f = EnvironmentFields::slope_only(3.0, 1.0).with_wind(0.8, 0.0, WindFrame::Aerial);
        let m = flat(f, 8.0);
        let spec = GridSpec::covering(m.terrain().domain(), 321);
        let g = grid_arrival(&m, &Ignition::Point(Vec2::ZERO), &spec, 3, 1.0).unwrap();
        let t = g.sample(Vec2::new(6.4, 0.0)).unwrap();
        assert!((t - 1.0).abs() <= 0.02, "{t}");
    }

    #[test]
    fn refinement_and_monotone_edges() {
        let m = flat(EnvironmentFields::slope_only(1.0, 1.0).with_wind(0.5, 0.7, WindFrame::Aerial), 3.0);
        let spec = GridSpec::covering(m.terrain().domain(), 61);
        let g2 = grid_arrival(&m, &Ignition::Point(Vec2::ZERO), &spec, 2, 1.0).unwrap();
        let g3 = grid_arrival(&m, &Ignition::Point(Vec2::ZERO), &spec, 3, 1.0).unwrap();
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                assert!(g3.time(i, j) <= g2.time(i, j) + 1e-12);
                assert!(g3.time(i, j) >= 0.0);
            }
        }
    }

    #[test]
    fn rejects_time_dependence() {
        let mut f = EnvironmentFields::slope_only(1.0, 1.0);
        f.a = ScalarField::parse("1+t").unwrap();
        let m = flat(f, 3.0);
        let spec = GridSpec::covering(m.terrain().domain(), 11);
        assert_eq!(
            grid_arrival(&m, &Ignition::Point(Vec2::ZERO), &spec, 2, 2.0),
            Err(Error::TimeDependentMetric("a"))
        );
    }

    #[test]
    fn closed_ignition_interior_is_zero() {
        let m = flat(EnvironmentFields::slope_only(1.0, 1.0), 3.0);
        let spec = GridSpec::covering(m.terrain().domain(), 61);
        let ign = Ignition::Circle {
            center: Vec2::ZERO,
            radius: 1.0,
        };
        let g = grid_arrival(&m, &ign, &spec, 3, 1.0).unwrap();
        assert_eq!(g.time(30, 30), 0.0);
        let t = g.sample(Vec2::new(2.0, 0.0)).unwrap();
        assert!((t - 0.5).abs() < 0.01, "{t}");
    }

    #[test]
    fn comparator_flags_mismatch() {
        let m = flat(EnvironmentFields::slope_only(2.0, 1.0), 5.0);
        let spec = GridSpec::covering(m.terrain().domain(), 201);
        let g = grid_arrival(&m, &Ignition::Point(Vec2::ZERO), &spec, 3, 1.0).unwrap();
        let cfg = SolverConfig {
            n_trajectories: 64,
            dt: 1e-2,
            t_end: 1.0,
            output_interval: 0.5,
            ..Default::default()
        };
        let map = propagate(&m, &Ignition::Point(Vec2::ZERO), &cfg).unwrap();
        let ok = compare_front(&g, &map, 1.0).unwrap();
        assert!(ok.within(0.01, 0.02), "{ok:?}");
        let mut doubled = g.clone();
        doubled.times.iter_mut().for_each(|t| *t *= 2.0);
        let bad = compare_front(&doubled, &map, 1.0).unwrap();
        assert!((bad.median - 1.0).abs() < 0.05 && !bad.within(0.03, 0.06), "{bad:?}");
    }

    #[test]
    fn dem_export_roundtrip() {
        let m = flat(EnvironmentFields::slope_only(1.0, 1.0), 2.0);
        let spec = GridSpec::covering(m.terrain().domain(), 9);
        let g = grid_arrival(&m, &Ignition::Point(Vec2::ZERO), &spec, 2, 1.0).unwrap();
        let text = g.to_dem_string();
        let body: Vec<&str> = text.lines().skip(6).collect();
        assert_eq!(body.len(), spec.ny);
        // first written row is the northernmost
        // values carry 9 significant digits
        let v: f64 = body[0].split_whitespace().next().unwrap().parse().unwrap();
        assert!((v - g.time(0, spec.ny - 1)).abs() < 1e-8 * v);
        let dem = crate::terrain::DemGrid::parse(&text.replace("NODATA_value -9999\n", "")).unwrap();
        assert_eq!(dem.height(4, 4), 0.0);
        assert!((dem.height(1, 2) - g.time(1, 2)).abs() < 1e-8 * g.time(1, 2));
    }
}
