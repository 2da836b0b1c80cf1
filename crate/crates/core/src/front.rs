//! The discrete firemap: trajectories from an ignition set stepped in lockstep, with
//! first-arrival pruning.
//!
//! After every integration step a single-threaded barrier runs, in this order, on the
//! trajectories that were live before the step:
//!
//! 1. focal collapse: adjacent live trajectories whose closest approach during the step falls
//!    below a small fraction of the mean adjacent spacing;
//! 2. crossing: a new position strictly inside the region burned in earlier steps;
//! 3. loop excision: where the live front self-intersects, vertices that moved into the area
//!    swept during this step by the other side of the intersection.
//!
//! The swept area of each step (quads between consecutive live trajectories, split into
//! triangles) is then added to the burned region. Cut trajectories keep being integrated so
//! their full paths can be inspected; they never rejoin the front.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geodesic::{ignition_fan, orthogonal_unit, GeodesicState, Integrator};
use crate::geom::{orientation, segments_cross, signed_area, winding_number, AerialPoint, Vec2};
use crate::metric::FireMetric;
use crate::terrain::Domain;

/// Initial burned set.
#[derive(Debug, Clone, PartialEq)]
pub enum Ignition {
    Point(AerialPoint),
    Circle {
        center: AerialPoint,
        radius: f64,
    },
    Ellipse {
        center: AerialPoint,
        semi_axes: (f64, f64),
        rotation: f64,
    },
    /// Closed polygon; reversed automatically if clockwise.
    Polygon(Vec<AerialPoint>),
}

/// A point of the ignition curve with its tangent and seed parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSample {
    pub s: f64,
    pub point: AerialPoint,
    pub tangent: Vec2,
}

impl Ignition {
    pub fn is_point(&self) -> bool {
        matches!(self, Ignition::Point(_))
    }

    /// `n` samples along the boundary, counterclockwise.
    pub fn samples(&self, n: usize) -> Result<Vec<CurveSample>> {
        let tau = std::f64::consts::TAU;
        match self {
            Ignition::Point(p) => Ok((0..n)
                .map(|k| {
                    let s = tau * k as f64 / n as f64;
                    CurveSample {
                        s,
                        point: *p,
                        tangent: Vec2::from_angle(s + std::f64::consts::FRAC_PI_2),
                    }
                })
                .collect()),
            Ignition::Circle { center, radius } => {
                if !(*radius > 0.0) {
                    return Err(Error::DegenerateCurve(format!("circle radius {radius}")));
                }
                Ok((0..n)
                    .map(|k| {
                        let s = tau * k as f64 / n as f64;
                        let (sn, cs) = s.sin_cos();
                        CurveSample {
                            s,
                            point: *center + Vec2::new(cs, sn) * *radius,
                            tangent: Vec2::new(-sn, cs),
                        }
                    })
                    .collect())
            }
            Ignition::Ellipse {
                center,
                semi_axes: (ra, rb),
                rotation,
            } => {
                if !(*ra > 0.0 && *rb > 0.0) {
                    return Err(Error::DegenerateCurve(format!("ellipse semi-axes ({ra}, {rb})")));
                }
                let (sr, cr) = rotation.sin_cos();
                let rot = |v: Vec2| Vec2::new(cr * v.x - sr * v.y, sr * v.x + cr * v.y);
                Ok((0..n)
                    .map(|k| {
                        let s = tau * k as f64 / n as f64;
                        let (sn, cs) = s.sin_cos();
                        CurveSample {
                            s,
                            point: *center + rot(Vec2::new(ra * cs, rb * sn)),
                            tangent: rot(Vec2::new(-ra * sn, rb * cs)),
                        }
                    })
                    .collect())
            }
            Ignition::Polygon(pts) => polygon_samples(pts, n),
        }
    }
}

fn polygon_samples(pts: &[AerialPoint], n: usize) -> Result<Vec<CurveSample>> {
    let mut pts = pts.to_vec();
    if pts.len() > 1 && pts.first() == pts.last() {
        pts.pop();
    }
    if pts.len() < 3 {
        return Err(Error::DegenerateCurve("polygon needs at least 3 vertices".into()));
    }
    for i in 0..pts.len() {
        if pts[i] == pts[(i + 1) % pts.len()] {
            return Err(Error::DegenerateCurve(format!("repeated vertex ({}, {})", pts[i].x, pts[i].y)));
        }
    }
    let area = signed_area(&pts);
    if area == 0.0 {
        return Err(Error::DegenerateCurve("polygon has zero area".into()));
    }
    if area < 0.0 {
        log::warn!("ignition polygon is clockwise; reversing it");
        pts.reverse();
    }
    let m = pts.len();
    let lengths: Vec<f64> = (0..m).map(|i| (pts[(i + 1) % m] - pts[i]).norm()).collect();
    let total: f64 = lengths.iter().sum();
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    let mut seg_start = 0.0;
    for k in 0..n {
        let s = total * k as f64 / n as f64;
        // samples within round-off of a vertex snap onto it
        let snap = 1e-9 * total;
        while seg + 1 < m && s >= seg_start + lengths[seg] - snap {
            seg_start += lengths[seg];
            seg += 1;
        }
        let a = pts[seg];
        let b = pts[(seg + 1) % m];
        let at_vertex = s - seg_start <= snap;
        let u = if at_vertex { 0.0 } else { (s - seg_start) / lengths[seg] };
        let point = a.lerp(b, u);
        // at a vertex use the bisector of the two edge directions
        let dir = (b - a) * (1.0 / lengths[seg]);
        let tangent = if at_vertex {
            let prev = pts[(seg + m - 1) % m];
            let dprev = (a - prev) * (1.0 / (a - prev).norm());
            let bis = dprev + dir;
            if bis.norm() > 1e-12 {
                bis
            } else {
                dir
            }
        } else {
            dir
        };
        out.push(CurveSample { s, point, tangent });
    }
    Ok(out)
}

/// Why a trajectory left the front.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutKind {
    Crossing,
    Focal,
}

impl CutKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CutKind::Crossing => "crossing",
            CutKind::Focal => "focal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Status {
    Live,
    Cut { t: f64, kind: CutKind },
    LeftDomain { t: f64 },
}

impl Status {
    pub fn is_live(&self) -> bool {
        matches!(self, Status::Live)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Status::Live => "live",
            Status::Cut {
                kind: CutKind::Crossing,
                ..
            } => "cut-crossing",
            Status::Cut {
                kind: CutKind::Focal, ..
            } => "cut-focal",
            Status::LeftDomain { .. } => "left-domain",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub id: usize,
    pub seed_param: f64,
    /// One state per integration step, starting at the ignition time. Shorter than the run
    /// when the trajectory left the domain.
    pub history: Vec<GeodesicState>,
    pub status: Status,
}

impl Trajectory {
    pub fn state_at_step(&self, k: usize) -> Option<&GeodesicState> {
        self.history.get(k)
    }

    pub fn cut_time(&self) -> Option<f64> {
        match self.status {
            Status::Cut { t, .. } => Some(t),
            _ => None,
        }
    }

    /// Status as it was at time `t`.
    pub fn status_at(&self, t: f64) -> Status {
        match self.status {
            Status::Cut { t: tc, .. } | Status::LeftDomain { t: tc } if t < tc => Status::Live,
            s => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutRecord {
    pub t_cut: f64,
    pub point: AerialPoint,
    pub kind: CutKind,
    /// The cut trajectory first, then the trajectories responsible (the burner or the
    /// collapsing neighbour).
    pub ids: Vec<usize>,
}

/// Live front at one output time.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontSnapshot {
    pub step: usize,
    pub t: f64,
    /// Live trajectory ids in seed order.
    pub ids: Vec<usize>,
    pub points: Vec<AerialPoint>,
    /// `bridged[i]` is true when the edge from vertex `i` to the next skips pruned seeds.
    pub bridged: Vec<bool>,
    pub closed: bool,
    /// Area burned so far: the ignition polygon plus every area swept by the live front.
    pub burned_area: f64,
}

impl FrontSnapshot {
    /// Shoelace area of the closed front (zero for open fronts).
    pub fn area(&self) -> f64 {
        if self.closed {
            signed_area(&self.points)
        } else {
            0.0
        }
    }
}

/// Solver parameters of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub n_trajectories: usize,
    pub dt: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub output_interval: f64,
    pub renormalize: bool,
    /// Adjacent spacing below `focal_factor × mean adjacent spacing` counts as a collapse.
    pub focal_factor: f64,
    /// Seed ids left out of the computation.
    pub exclude: Vec<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            n_trajectories: 64,
            dt: 1e-2,
            t_start: 0.0,
            t_end: 1.0,
            output_interval: 1.0,
            renormalize: true,
            focal_factor: 1e-3,
            exclude: Vec::new(),
        }
    }
}

impl SolverConfig {
    pub fn n_steps(&self) -> usize {
        ((self.t_end - self.t_start) / self.dt).round() as usize
    }

    /// Output every this many steps.
    pub fn output_stride(&self) -> usize {
        ((self.output_interval / self.dt).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FireMap {
    pub trajectories: Vec<Trajectory>,
    pub snapshots: Vec<FrontSnapshot>,
    pub cuts: Vec<CutRecord>,
    pub closed: bool,
    pub dt: f64,
    pub t_start: f64,
}

impl FireMap {
    /// Front at the output time closest to `t`.
    pub fn front_polygon(&self, t: f64) -> Result<&FrontSnapshot> {
        let snap = self
            .snapshots
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .ok_or(Error::EmptyFront(t))?;
        match snap.ids.len() {
            0 => Err(Error::EmptyFront(snap.t)),
            1 => {
                log::warn!("front at t={} has a single live trajectory", snap.t);
                Ok(snap)
            }
            _ => Ok(snap),
        }
    }

    pub fn trajectory(&self, id: usize) -> Option<&Trajectory> {
        self.trajectories.iter().find(|t| t.id == id)
    }
}

/// Initial states in seed order: `(id, seed parameter, state)`.
pub fn seed(
    metric: &FireMetric,
    ignition: &Ignition,
    n: usize,
    t0: f64,
) -> Result<Vec<(usize, f64, GeodesicState)>> {
    let samples = ignition.samples(n)?;
    if let Ignition::Point(p) = ignition {
        let fan = ignition_fan(metric, t0, *p, n)?;
        return Ok(samples
            .iter()
            .zip(fan)
            .enumerate()
            .map(|(id, (s, v))| (id, s.s, GeodesicState::new(t0, *p, v)))
            .collect());
    }
    samples
        .iter()
        .enumerate()
        .map(|(id, s)| {
            let local = metric.local(t0, s.point)?;
            let v = orthogonal_unit(&local, s.tangent).map_err(|e| match e {
                Error::AmbiguousRoot(_) | Error::NoRoot(..) => Error::NonConvexMetric {
                    t: t0,
                    x: s.point.x,
                    y: s.point.y,
                    theta: s.tangent.angle(),
                },
                e => e,
            })?;
            Ok((id, s.s, GeodesicState::new(t0, s.point, v)))
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct Tri {
    a: Vec2,
    b: Vec2,
    c: Vec2,
    owners: [usize; 2],
}

impl Tri {
    fn strictly_contains(&self, p: Vec2) -> bool {
        let o1 = orientation(self.a, self.b, p);
        let o2 = orientation(self.b, self.c, p);
        let o3 = orientation(self.c, self.a, p);
        o1 != 0 && o1 == o2 && o2 == o3
    }

    fn is_degenerate(&self) -> bool {
        let area = (self.b - self.a).cross(self.c - self.a).abs();
        let scale = (self.b - self.a).norm_sq().max((self.c - self.a).norm_sq());
        area <= 1e-14 * scale || scale == 0.0
    }
}

/// Union of swept triangles, indexed by a uniform grid.
#[derive(Debug, Clone)]
struct BurnedRegion {
    x0: f64,
    y0: f64,
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
    tris: Vec<Tri>,
    initial: Option<Vec<Vec2>>,
    area: f64,
}

const INITIAL_OWNER: usize = usize::MAX;

impl BurnedRegion {
    fn new(domain: &Domain, initial: Option<Vec<Vec2>>) -> Self {
        let n = 128;
        let cell = domain.scale() / n as f64;
        let nx = (domain.width() / cell).ceil() as usize + 1;
        let ny = (domain.height() / cell).ceil() as usize + 1;
        BurnedRegion {
            x0: domain.x_min,
            y0: domain.y_min,
            cell,
            nx,
            ny,
            cells: vec![Vec::new(); nx * ny],
            tris: Vec::new(),
            area: initial.as_deref().map_or(0.0, |p| signed_area(p).abs()),
            initial,
        }
    }

    fn cell_of(&self, p: Vec2) -> (usize, usize) {
        let i = ((p.x - self.x0) / self.cell).floor().clamp(0.0, (self.nx - 1) as f64) as usize;
        let j = ((p.y - self.y0) / self.cell).floor().clamp(0.0, (self.ny - 1) as f64) as usize;
        (i, j)
    }

    fn insert(&mut self, tri: Tri) {
        if tri.is_degenerate() {
            return;
        }
        let idx = self.tris.len() as u32;
        let lo = Vec2::new(tri.a.x.min(tri.b.x).min(tri.c.x), tri.a.y.min(tri.b.y).min(tri.c.y));
        let hi = Vec2::new(tri.a.x.max(tri.b.x).max(tri.c.x), tri.a.y.max(tri.b.y).max(tri.c.y));
        let (i0, j0) = self.cell_of(lo);
        let (i1, j1) = self.cell_of(hi);
        for j in j0..=j1 {
            for i in i0..=i1 {
                self.cells[j * self.nx + i].push(idx);
            }
        }
        self.area += 0.5 * (tri.b - tri.a).cross(tri.c - tri.a).abs();
        self.tris.push(tri);
    }

    /// Owners of a burned area strictly containing `p`.
    fn owner_of(&self, p: Vec2) -> Option<[usize; 2]> {
        if let Some(poly) = &self.initial {
            if winding_number(poly, p) != 0 && !on_polygon_boundary(poly, p) {
                return Some([INITIAL_OWNER; 2]);
            }
        }
        let (i, j) = self.cell_of(p);
        self.cells[j * self.nx + i]
            .iter()
            .map(|&k| &self.tris[k as usize])
            .find(|t| t.strictly_contains(p))
            .map(|t| t.owners)
    }
}

fn on_polygon_boundary(poly: &[Vec2], p: Vec2) -> bool {
    let n = poly.len();
    (0..n).any(|i| {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        orientation(a, b, p) == 0 && (p - a).dot(p - b) <= 0.0
    })
}

/// The two triangles of the quad swept by edge `(i, j)` between steps.
fn sweep_tris(a0: Vec2, b0: Vec2, a1: Vec2, b1: Vec2, owners: [usize; 2]) -> [Tri; 2] {
    [
        Tri {
            a: a0,
            b: b0,
            c: b1,
            owners,
        },
        Tri {
            a: a0,
            b: b1,
            c: a1,
            owners,
        },
    ]
}

struct Engine<'a> {
    metric: &'a FireMetric,
    integrator: Integrator,
    domain: Domain,
    band: f64,
    trajectories: Vec<Trajectory>,
    /// Integration still possible (inside the domain).
    active: Vec<bool>,
    closed: bool,
    region: BurnedRegion,
    cuts: Vec<CutRecord>,
    focal_factor: f64,
    n_seeds: usize,
}

impl<'a> Engine<'a> {
    fn pos(&self, idx: usize, step: usize) -> Vec2 {
        self.trajectories[idx].history[step].position()
    }

    fn live(&self) -> Vec<usize> {
        (0..self.trajectories.len())
            .filter(|&i| self.trajectories[i].status.is_live())
            .collect()
    }

    fn cut(&mut self, idx: usize, t: f64, kind: CutKind, point: Vec2, others: &[usize]) {
        if !self.trajectories[idx].status.is_live() {
            return;
        }
        self.trajectories[idx].status = Status::Cut { t, kind };
        let mut ids = vec![self.trajectories[idx].id];
        for &o in others {
            if o != INITIAL_OWNER && o != self.trajectories[idx].id && !ids.contains(&o) {
                ids.push(o);
            }
        }
        self.cuts.push(CutRecord {
            t_cut: t,
            point,
            kind,
            ids,
        });
    }

    /// Consecutive index pairs of `order`, wrapping around for closed fronts.
    fn pairs(&self, order: &[usize]) -> Vec<(usize, usize)> {
        let m = order.len();
        if m < 2 {
            return Vec::new();
        }
        let mut out: Vec<(usize, usize)> = order.windows(2).map(|w| (w[0], w[1])).collect();
        if self.closed && m > 2 {
            out.push((order[m - 1], order[0]));
        }
        out
    }

    /// Advances every trajectory that is still inside the domain by one step.
    fn step(&mut self, k: usize, dt: f64, t_next: f64) -> Result<()> {
        let metric = self.metric;
        let integ = self.integrator;
        let domain = self.domain;
        let band = self.band;
        let results: Vec<Option<Result<GeodesicState>>> = self
            .trajectories
            .par_iter()
            .zip(self.active.par_iter())
            .map(|(tr, &active)| {
                if !active {
                    return None;
                }
                let s = tr.history[k];
                Some(match integ.rk4_step(metric, &s, dt) {
                    Ok(mut next) => {
                        next.t = t_next;
                        if domain.contains(next.position())
                            && domain.distance_to_boundary(next.position()) > band
                        {
                            Ok(next)
                        } else {
                            Err(Error::OutOfDomain {
                                x: next.x,
                                y: next.y,
                            })
                        }
                    }
                    Err(e) => Err(e),
                })
            })
            .collect();
        for (i, r) in results.into_iter().enumerate() {
            match r {
                None => {}
                Some(Ok(s)) => self.trajectories[i].history.push(s),
                Some(Err(Error::OutOfDomain { .. })) => {
                    self.active[i] = false;
                    if self.trajectories[i].status.is_live() {
                        log::debug!("trajectory {} left the domain at t={t_next}", self.trajectories[i].id);
                        self.trajectories[i].status = Status::LeftDomain { t: t_next };
                    }
                }
                Some(Err(e)) => {
                    if self.trajectories[i].status.is_live() {
                        return Err(e);
                    }
                    // a pruned trajectory wandering into a bad region is not fatal
                    log::debug!("stopping pruned trajectory {}: {e}", self.trajectories[i].id);
                    self.active[i] = false;
                }
            }
        }
        Ok(())
    }

    fn barrier(&mut self, before: &[usize], k: usize, t: f64) {
        let k1 = k + 1;
        // trajectories that left the domain during the step are out of the front already
        let before: Vec<usize> = before
            .iter()
            .copied()
            .filter(|&i| self.trajectories[i].status.is_live())
            .collect();

        // focal collapse: the closest approach of an adjacent pair during the step, with
        // both moving linearly, falls below the threshold while they are still converging
        if before.len() >= 3 {
            let pairs = self.pairs(&before);
            let mean = pairs
                .iter()
                .map(|&(i, j)| (self.pos(j, k) - self.pos(i, k)).norm())
                .sum::<f64>()
                / pairs.len() as f64;
            let eps = self.focal_factor * mean;
            let mut collapsed: Vec<(usize, usize, f64, Vec2)> = Vec::new();
            for &(i, j) in &pairs {
                let e0 = self.pos(j, k) - self.pos(i, k);
                let e1 = self.pos(j, k1) - self.pos(i, k1);
                let de = e1 - e0;
                let approaching = e0.dot(de) < 0.0;
                let tau = if de.is_zero() {
                    0.0
                } else {
                    (-e0.dot(de) / de.norm_sq()).clamp(0.0, 1.0)
                };
                if approaching && (e0 + de * tau).norm() < eps {
                    let pi = self.pos(i, k).lerp(self.pos(i, k1), tau);
                    let pj = self.pos(j, k).lerp(self.pos(j, k1), tau);
                    let t0 = self.trajectories[i].history[k].t;
                    collapsed.push((i, j, t0 + tau * (t - t0), pi.lerp(pj, 0.5)));
                }
            }
            for (i, j, t_meet, point) in collapsed {
                let (id_i, id_j) = (self.trajectories[i].id, self.trajectories[j].id);
                // across a bridged gap the two are distinct rays meeting, not neighbours focusing
                let kind = if (id_i + 1) % self.n_seeds == id_j {
                    CutKind::Focal
                } else {
                    CutKind::Crossing
                };
                self.cut(i, t_meet, kind, point, &[id_j]);
                self.cut(j, t_meet, kind, point, &[id_i]);
            }
        }

        // entering an area burned in earlier steps
        for &i in &before {
            if !self.trajectories[i].status.is_live() {
                continue;
            }
            let p = self.pos(i, k1);
            if let Some(owners) = self.region.owner_of(p) {
                let owners = owners.map(|o| if o == INITIAL_OWNER { o } else { self.trajectories[o].id });
                self.cut(i, t, CutKind::Crossing, p, &owners);
            }
        }

        self.excise_loops(k, t);

        // sweep of this step between the surviving neighbours
        let after = self.live();
        for (i, j) in self.pairs(&after) {
            let owners = [i, j];
            for tri in sweep_tris(self.pos(i, k), self.pos(j, k), self.pos(i, k1), self.pos(j, k1), owners) {
                self.region.insert(tri);
            }
        }
    }

    fn excise_loops(&mut self, k: usize, t: f64) {
        let k1 = k + 1;
        let mut skipped: Vec<(usize, usize)> = Vec::new();
        loop {
            let front = self.live();
            let m = front.len();
            if m < 4 {
                return;
            }
            let edges = self.pairs(&front);
            let ne = edges.len();
            let seg = |e: usize| (self.pos(edges[e].0, k1), self.pos(edges[e].1, k1));
            let mut found = None;
            'search: for a in 0..ne {
                let (p1, p2) = seg(a);
                for b in a + 2..ne {
                    if self.closed && a == 0 && b == ne - 1 {
                        continue;
                    }
                    let key = (edges[a].0, edges[b].0);
                    if skipped.contains(&key) {
                        continue;
                    }
                    let (q1, q2) = seg(b);
                    if p1.x.max(p2.x) < q1.x.min(q2.x)
                        || q1.x.max(q2.x) < p1.x.min(p2.x)
                        || p1.y.max(p2.y) < q1.y.min(q2.y)
                        || q1.y.max(q2.y) < p1.y.min(p2.y)
                    {
                        continue;
                    }
                    if segments_cross(p1, p2, q1, q2).is_some() {
                        found = Some((a, b));
                        break 'search;
                    }
                }
            }
            let Some((a, b)) = found else { return };
            // runs on either side of the two crossing edges
            let inner: Vec<usize> = front[a + 1..=b].to_vec();
            let outer: Vec<usize> = front[b + 1..].iter().chain(front[..=a].iter()).copied().collect();
            let inner_sweep = self.run_sweep(&inner, k);
            let outer_sweep = self.run_sweep(&outer, k);
            let mut to_cut = Vec::new();
            for (run, sweep) in [(&inner, &outer_sweep), (&outer, &inner_sweep)] {
                for &i in run.iter() {
                    let p = self.pos(i, k1);
                    if let Some(tri) = sweep.iter().find(|tr| tr.strictly_contains(p)) {
                        to_cut.push((i, p, tri.owners));
                    }
                }
            }
            if to_cut.is_empty() {
                skipped.push((edges[a].0, edges[b].0));
                continue;
            }
            for (i, p, owners) in to_cut {
                let owners = owners.map(|o| self.trajectories[o].id);
                self.cut(i, t, CutKind::Crossing, p, &owners);
            }
        }
    }

    fn run_sweep(&self, run: &[usize], k: usize) -> Vec<Tri> {
        run.windows(2)
            .flat_map(|w| {
                let (i, j) = (w[0], w[1]);
                sweep_tris(self.pos(i, k), self.pos(j, k), self.pos(i, k + 1), self.pos(j, k + 1), [i, j])
            })
            .filter(|t| !t.is_degenerate())
            .collect()
    }

    fn snapshot(&self, step: usize, t: f64) -> FrontSnapshot {
        let live = self.live();
        let n = self.n_seeds;
        let mut bridged = Vec::with_capacity(live.len());
        for (w, &i) in live.iter().enumerate() {
            let next = if w + 1 < live.len() {
                Some(live[w + 1])
            } else if self.closed && live.len() > 1 {
                Some(live[0])
            } else {
                None
            };
            bridged.push(match next {
                Some(j) => (self.trajectories[i].id + 1) % n != self.trajectories[j].id,
                None => false,
            });
        }
        FrontSnapshot {
            step,
            t,
            ids: live.iter().map(|&i| self.trajectories[i].id).collect(),
            points: live.iter().map(|&i| self.pos(i, step)).collect(),
            bridged,
            closed: self.closed,
            burned_area: self.region.area,
        }
    }
}

/// Computes the firemap from `ignition` until `cfg.t_end`.
pub fn propagate(metric: &FireMetric, ignition: &Ignition, cfg: &SolverConfig) -> Result<FireMap> {
    if !(cfg.dt > 0.0) || !(cfg.t_end > cfg.t_start) {
        return Err(Error::config("solver", "need dt > 0 and t_end > t_start"));
    }
    let seeds = seed(metric, ignition, cfg.n_trajectories, cfg.t_start)?;
    let trajectories: Vec<Trajectory> = seeds
        .into_iter()
        .filter(|(id, _, _)| !cfg.exclude.contains(id))
        .map(|(id, s, state)| Trajectory {
            id,
            seed_param: s,
            history: vec![state],
            status: Status::Live,
        })
        .collect();
    let terrain = metric.terrain();
    let domain = *terrain.domain();
    let initial = match ignition {
        Ignition::Point(_) => None,
        _ => Some(trajectories.iter().map(|t| t.history[0].position()).collect()),
    };
    let mut engine = Engine {
        metric,
        integrator: Integrator::new(metric).with_renormalize(cfg.renormalize),
        domain,
        band: terrain.boundary_band(),
        active: vec![true; trajectories.len()],
        trajectories,
        closed: true,
        region: BurnedRegion::new(&domain, initial),
        cuts: Vec::new(),
        focal_factor: cfg.focal_factor,
        n_seeds: cfg.n_trajectories,
    };

    let n_steps = cfg.n_steps();
    let stride = cfg.output_stride();
    let mut snapshots = vec![engine.snapshot(0, cfg.t_start)];
    for k in 0..n_steps {
        let t_next = cfg.t_start + (k + 1) as f64 * cfg.dt;
        let before = engine.live();
        engine.step(k, cfg.dt, t_next)?;
        engine.barrier(&before, k, t_next);
        if (k + 1) % stride == 0 || k + 1 == n_steps {
            if engine.live().is_empty() {
                log::warn!("no live trajectories left at t={t_next}");
            }
            snapshots.push(engine.snapshot(k + 1, t_next));
        }
    }
    Ok(FireMap {
        trajectories: engine.trajectories,
        snapshots,
        cuts: engine.cuts,
        closed: engine.closed,
        dt: cfg.dt,
        t_start: cfg.t_start,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::EnvironmentFields;
    use crate::terrain::Terrain;

    fn flat(a: f64, h: f64, half: f64) -> FireMetric {
        FireMetric::new(
            Terrain::flat(Domain::new(-half, half, -half, half)),
            EnvironmentFields::slope_only(a, h),
        )
    }

    fn cfg(n: usize, dt: f64, t_end: f64) -> SolverConfig {
        SolverConfig {
            n_trajectories: n,
            dt,
            t_end,
            output_interval: t_end,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn point_seeds_are_radial() {
        let m = flat(2.0, 1.0, 5.0);
        let seeds = seed(&m, &Ignition::Point(Vec2::ZERO), 64, 0.0).unwrap();
        assert_eq!(seeds.len(), 64);
        for (_, s, st) in seeds {
            assert!((st.velocity() - Vec2::from_angle(s) * 3.0).norm() < 1e-12);
        }
    }

    #[test]
    fn circle_seeds_point_outward() {
        let m = flat(2.0, 1.0, 5.0);
        let ign = Ignition::Circle {
            center: Vec2::new(-1.0, 1.0),
            radius: 0.2,
        };
        let samples = ign.samples(64).unwrap();
        let seeds = seed(&m, &ign, 64, 0.0).unwrap();
        for ((_, _, st), smp) in seeds.iter().zip(&samples) {
            assert!(st.velocity().cross(smp.tangent) > 0.0);
            let radial = (st.position() - Vec2::new(-1.0, 1.0)) * 15.0;
            assert!((st.velocity() - radial).norm() < 1e-8);
        }
    }

    #[test]
    fn clockwise_polygon_reversed() {
        let sq = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
        ];
        let s = Ignition::Polygon(sq).samples(8).unwrap();
        let pts: Vec<Vec2> = s.iter().map(|c| c.point).collect();
        assert!(signed_area(&pts) > 0.0);
        let dup = vec![Vec2::ZERO, Vec2::ZERO, Vec2::new(1.0, 0.0)];
        assert!(matches!(Ignition::Polygon(dup).samples(8), Err(Error::DegenerateCurve(_))));
    }

    #[test]
    fn isotropic_circle_front() {
        let m = flat(2.0, 1.0, 5.0);
        let map = propagate(&m, &Ignition::Point(Vec2::ZERO), &cfg(64, 1e-2, 1.0)).unwrap();
        let front = map.front_polygon(1.0).unwrap();
        assert_eq!(front.ids.len(), 64);
        for p in &front.points {
            assert!((p.norm() - 3.0).abs() < 1e-6);
        }
        assert!(map.cuts.is_empty());
        assert!(front.bridged.iter().all(|b| !b));
    }

    fn dist_to_boundary(poly: &[Vec2], p: Vec2) -> f64 {
        (0..poly.len())
            .map(|i| {
                let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
                let u = ((p - a).dot(b - a) / (b - a).norm_sq()).clamp(0.0, 1.0);
                (p - a.lerp(b, u)).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn crossing_toy_keeps_first_arrival() {
        // L-shaped ignition at unit speed: rays from the two walls of the notch cross, and
        // the first arrival time anywhere outside is the Euclidean distance to the polygon
        let m = flat(0.5, 0.5, 6.0);
        let l = vec![
            Vec2::new(-2.0, -2.0),
            Vec2::new(2.0, -2.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 2.0),
            Vec2::new(-2.0, 2.0),
        ];
        // 157 seeds: wall offsets are not multiples of dt, so no ray runs exactly along the
        // edges of the swept triangles (touching does not count as inside)
        let n = 157;
        let mut c = cfg(n, 1e-2, 1.5);
        c.output_interval = 0.1;
        let map = propagate(&m, &Ignition::Polygon(l.clone()), &c).unwrap();
        let crossings: Vec<_> = map.cuts.iter().filter(|r| r.kind == CutKind::Crossing).collect();
        assert!(crossings.len() > 10);
        let spacing = 16.0 / n as f64;
        for r in &crossings {
            // the cut one arrived later than the first arrival at its position; rays meeting
            // on the diagonal are declared met within the collapse threshold
            let d = dist_to_boundary(&l, r.point);
            assert!(d < r.t_cut + c.focal_factor * spacing, "{r:?} dist {d}");
            assert!(r.point.x > -1e-9 && r.point.y > -1e-9, "{r:?}");
            let start = map.trajectory(r.ids[0]).unwrap().history[0].position();
            if start.norm() == 0.0 {
                // the bisector ray of the notch corner is late from the start; it is caught
                // once it passes the crossing of its two neighbours
                assert!(r.t_cut <= spacing * 2f64.sqrt() + c.dt, "{r:?}");
            } else {
                assert!(d > r.t_cut - 2.0 * c.dt, "{r:?} dist {d}");
            }
        }
        for snap in &map.snapshots[1..] {
            for p in &snap.points {
                assert!((dist_to_boundary(&l, *p) - snap.t).abs() < 1e-9, "t={} p={p:?}", snap.t);
            }
        }
        // every ray from the horizontal notch wall is pruned right after crossing the diagonal
        let wall: Vec<_> = map
            .trajectories
            .iter()
            .filter(|t| t.history[0].y == 0.0 && t.history[0].x > 0.0 && t.history[0].x < 1.4)
            .collect();
        assert!(wall.len() > 10);
        for tr in wall {
            let x0 = tr.history[0].x;
            let tc = tr.cut_time().unwrap();
            assert!(tc >= x0 - c.focal_factor * spacing && tc <= x0 + 2.0 * c.dt, "x0={x0} cut at {tc}");
        }
    }

    #[test]
    fn concave_arc_focuses_at_center() {
        // a regular concave arc of radius 1 about (0, 1) closed by a V below; samples fall on
        // the vertices so arc rays are exactly radial and meet at the center at t = r/speed
        let m = flat(0.5, 0.5, 6.0);
        let (arc_n, half) = (12, std::f64::consts::FRAC_PI_4);
        let center = Vec2::new(0.0, 1.0);
        let step = 2.0 * (half / arc_n as f64).sin();
        let mut poly: Vec<Vec2> = (0..=arc_n)
            .map(|k| {
                let phi = -std::f64::consts::FRAC_PI_2 + half - 2.0 * half * k as f64 / arc_n as f64;
                center + Vec2::from_angle(phi)
            })
            .collect();
        let left = poly[arc_n];
        let edge = 8;
        let depth = ((edge as f64 * step).powi(2) - left.x * left.x).sqrt();
        poly.push(Vec2::new(0.0, left.y - depth));
        let n = arc_n + 2 * edge;
        let map = propagate(&m, &Ignition::Polygon(poly), &cfg(n, 1e-2, 1.2)).unwrap();
        let focal: Vec<_> = map.cuts.iter().filter(|r| r.kind == CutKind::Focal).collect();
        assert!(focal.len() >= arc_n - 1, "{:?}", map.cuts);
        for r in &focal {
            assert!((r.t_cut - 1.0).abs() <= 1e-2 + 1e-9, "{r:?}");
            assert!((r.point - center).norm() < 1e-6, "{r:?}");
            let (i, j) = (r.ids[0], r.ids[1]);
            assert!((i + 1) % n == j || (j + 1) % n == i);
        }
        assert!(map.cuts.iter().all(|r| r.t_cut >= 1.0 - 1e-9));
    }

    #[test]
    fn expanding_circle_has_no_focal_cuts() {
        let m = flat(2.0, 1.0, 8.0);
        let ign = Ignition::Circle {
            center: Vec2::ZERO,
            radius: 0.5,
        };
        let map = propagate(&m, &ign, &cfg(64, 1e-2, 1.5)).unwrap();
        assert!(map.cuts.is_empty());
    }

    #[test]
    fn burned_area_grows() {
        let m = flat(2.0, 1.0, 5.0);
        let mut c = cfg(64, 1e-2, 1.0);
        c.output_interval = 0.1;
        let map = propagate(&m, &Ignition::Point(Vec2::ZERO), &c).unwrap();
        for w in map.snapshots.windows(2) {
            assert!(w[1].area() >= w[0].area() * (1.0 - 1e-9));
            assert!(w[1].burned_area >= w[0].burned_area);
        }
        // the swept triangles tile the disc of radius 3 minus the 64-gon defect
        let last = map.snapshots.last().unwrap();
        assert!((last.burned_area - last.area()).abs() < 1e-9 * last.area());
    }

    #[test]
    fn leaves_domain() {
        let m = flat(2.0, 1.0, 1.0);
        let map = propagate(&m, &Ignition::Point(Vec2::ZERO), &cfg(16, 1e-2, 1.0)).unwrap();
        assert!(map
            .trajectories
            .iter()
            .all(|t| matches!(t.status, Status::LeftDomain { .. })));
        assert!(matches!(map.front_polygon(1.0), Err(Error::EmptyFront(_))));
    }

    #[test]
    fn excluded_seed_is_absent() {
        let m = flat(2.0, 1.0, 5.0);
        let mut c = cfg(16, 1e-2, 0.2);
        c.exclude = vec![3];
        let map = propagate(&m, &Ignition::Point(Vec2::ZERO), &c).unwrap();
        assert_eq!(map.trajectories.len(), 15);
        assert!(map.trajectory(3).is_none());
        let front = map.front_polygon(0.2).unwrap();
        let k = front.ids.iter().position(|&i| i == 2).unwrap();
        assert!(front.bridged[k]);
    }
}
