//! Lightlike geodesics of `G = dt² − F²` parametrized by time.
//!
//! In coordinates `(x⁰, x¹, x²) = (t, x, y)` the fundamental tensor of `G` at `v̂ = (1, v)` is
//! block diagonal, `diag(1, −g^F_v)`. Trajectories solve
//!
//! ```text
//! ẍᵏ = −γᵏᵢⱼ(v̂) ẋⁱẋʲ + γ⁰ᵢⱼ(v̂) ẋⁱẋʲ ẋᵏ,   ẋ = (1, vx, vy)
//! ```
//!
//! with formal Christoffel symbols: coordinate partials of `g_ij` at fixed `v̂`.

use crate::error::{Error, Result};
use crate::geom::{AerialPoint, Sym2, TangentVector, Vec2};
use crate::metric::{FireMetric, LocalMetric};

/// One point of a time-parametrized trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicState {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    /// `ln(dt/dρ)` for an affine parameter `ρ`; only needed for conservation diagnostics.
    pub log_dt_drho: f64,
}

impl GeodesicState {
    pub fn new(t: f64, p: AerialPoint, v: TangentVector) -> Self {
        GeodesicState {
            t,
            x: p.x,
            y: p.y,
            vx: v.x,
            vy: v.y,
            log_dt_drho: 0.0,
        }
    }

    pub fn position(&self) -> AerialPoint {
        Vec2::new(self.x, self.y)
    }

    pub fn velocity(&self) -> TangentVector {
        Vec2::new(self.vx, self.vy)
    }
}

/// `g_ij` and `g^ij` of `G` at one `(t, p, v̂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacetimeTensor {
    pub g: [[f64; 3]; 3],
    pub inv: [[f64; 3]; 3],
}

impl SpacetimeTensor {
    pub fn from_spatial(gf: Sym2) -> Result<Self> {
        let inv = gf.inverse().ok_or(Error::SingularTensor(gf.det()))?;
        Ok(SpacetimeTensor {
            g: [
                [1.0, 0.0, 0.0],
                [0.0, -gf.m11, -gf.m12],
                [0.0, -gf.m12, -gf.m22],
            ],
            inv: [
                [1.0, 0.0, 0.0],
                [0.0, -inv.m11, -inv.m12],
                [0.0, -inv.m12, -inv.m22],
            ],
        })
    }
}

/// `γᵏᵢⱼ` stored as `gamma[k][i][j]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Christoffel {
    pub gamma: [[[f64; 3]; 3]; 3],
}

impl Christoffel {
    /// `γᵏᵢⱼ uⁱ uʲ`
    pub fn contract(&self, k: usize, u: [f64; 3]) -> f64 {
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                acc += self.gamma[k][i][j] * u[i] * u[j];
            }
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        self.gamma
            .iter()
            .flatten()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Finite-difference steps for the coordinate derivatives of `g_ij`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdSteps {
    pub space: f64,
    pub time: f64,
}

impl FdSteps {
    /// `1e-6` of the domain scale in space, `1e-5` in time. Central differences carry an
    /// `O(h²)` bias into the trajectory ODE, so the steps sit close to the roundoff floor of
    /// the exactly differentiated tensor.
    pub fn for_metric(metric: &FireMetric) -> Self {
        FdSteps {
            space: 1e-6 * metric.terrain().domain().scale(),
            time: 1e-5,
        }
    }
}

pub fn spacetime_tensor(metric: &FireMetric, t: f64, p: AerialPoint, v: TangentVector) -> Result<SpacetimeTensor> {
    SpacetimeTensor::from_spatial(metric.fundamental_tensor_exact(t, p, v)?)
}

fn spatial_tensor_at(metric: &FireMetric, t: f64, p: AerialPoint, v: TangentVector) -> Result<Sym2> {
    metric.local(t, p)?.fundamental_tensor_exact(v)
}

/// Formal Christoffel symbols of `G` at `(t, p)` and direction `v̂ = (1, v)`.
pub fn christoffel(
    metric: &FireMetric,
    t: f64,
    p: AerialPoint,
    v: TangentVector,
    steps: FdSteps,
) -> Result<Christoffel> {
    let center = spatial_tensor_at(metric, t, p, v)?;
    let st = SpacetimeTensor::from_spatial(center)?;

    // ∂_r of the spatial block −g^F at fixed v
    let hs = steps.space;
    let ht = steps.time;
    let dt_block = if t - ht >= 0.0 {
        (spatial_tensor_at(metric, t + ht, p, v)? - spatial_tensor_at(metric, t - ht, p, v)?) * (0.5 / ht)
    } else {
        // one-sided second-order stencil at the start of the run
        let f1 = spatial_tensor_at(metric, t + ht, p, v)?;
        let f2 = spatial_tensor_at(metric, t + 2.0 * ht, p, v)?;
        (center * -3.0 + f1 * 4.0 - f2) * (0.5 / ht)
    };
    let dx_block = (spatial_tensor_at(metric, t, p + Vec2::new(hs, 0.0), v)?
        - spatial_tensor_at(metric, t, p - Vec2::new(hs, 0.0), v)?)
        * (0.5 / hs);
    let dy_block = (spatial_tensor_at(metric, t, p + Vec2::new(0.0, hs), v)?
        - spatial_tensor_at(metric, t, p - Vec2::new(0.0, hs), v)?)
        * (0.5 / hs);

    let mut dg = [[[0.0; 3]; 3]; 3];
    for (r, blk) in [dt_block, dx_block, dy_block].iter().enumerate() {
        dg[r][1][1] = -blk.m11;
        dg[r][1][2] = -blk.m12;
        dg[r][2][1] = -blk.m12;
        dg[r][2][2] = -blk.m22;
    }

    let mut gamma = [[[0.0; 3]; 3]; 3];
    for k in 0..3 {
        for i in 0..3 {
            for j in i..3 {
                let mut acc = 0.0;
                for r in 0..3 {
                    let gkr = st.inv[k][r];
                    if gkr != 0.0 {
                        acc += gkr * (dg[i][r][j] + dg[j][r][i] - dg[r][i][j]);
                    }
                }
                gamma[k][i][j] = 0.5 * acc;
                gamma[k][j][i] = 0.5 * acc;
            }
        }
    }
    Ok(Christoffel { gamma })
}

/// Right-hand side of the trajectory system: `(dv/dt, d ln(dt/dρ)/dt)`.
pub fn geodesic_rhs(metric: &FireMetric, state: &GeodesicState, steps: FdSteps) -> Result<(Vec2, f64)> {
    let v = state.velocity();
    let c = christoffel(metric, state.t, state.position(), v, steps)?;
    let u = [1.0, v.x, v.y];
    let g0 = c.contract(0, u);
    let ax = -c.contract(1, u) + g0 * v.x;
    let ay = -c.contract(2, u) + g0 * v.y;
    Ok((Vec2::new(ax, ay), -g0))
}

/// Fixed-step integrator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrator {
    pub steps: FdSteps,
    /// Project the velocity back onto the indicatrix after every step.
    pub renormalize: bool,
}

impl Integrator {
    pub fn new(metric: &FireMetric) -> Self {
        Integrator {
            steps: FdSteps::for_metric(metric),
            renormalize: true,
        }
    }

    pub fn with_renormalize(mut self, on: bool) -> Self {
        self.renormalize = on;
        self
    }

    /// Classical RK4 on `(x, y, vx, vy, ln dt/dρ)` with `t` advancing by `dt`.
    pub fn rk4_step(&self, metric: &FireMetric, s: &GeodesicState, dt: f64) -> Result<GeodesicState> {
        let deriv = |st: &GeodesicState| -> Result<[f64; 5]> {
            let (acc, dl) = geodesic_rhs(metric, st, self.steps)?;
            Ok([st.vx, st.vy, acc.x, acc.y, dl])
        };
        let shifted = |k: &[f64; 5], h: f64| GeodesicState {
            t: s.t + h,
            x: s.x + h * k[0],
            y: s.y + h * k[1],
            vx: s.vx + h * k[2],
            vy: s.vy + h * k[3],
            log_dt_drho: s.log_dt_drho + h * k[4],
        };
        let k1 = deriv(s)?;
        let k2 = deriv(&shifted(&k1, 0.5 * dt))?;
        let k3 = deriv(&shifted(&k2, 0.5 * dt))?;
        let k4 = deriv(&shifted(&k3, dt))?;
        let comb = |i: usize| (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (dt / 6.0);
        let mut next = GeodesicState {
            t: s.t + dt,
            x: s.x + comb(0),
            y: s.y + comb(1),
            vx: s.vx + comb(2),
            vy: s.vy + comb(3),
            log_dt_drho: s.log_dt_drho + comb(4),
        };
        if self.renormalize {
            let v = next.velocity();
            let f = metric.metric_value(next.t, next.position(), v)?;
            next.vx = v.x / f;
            next.vy = v.y / f;
        }
        Ok(next)
    }

    /// Integrates `n` steps of size `dt`; times are `t₀ + k·dt` to avoid drift.
    pub fn integrate(
        &self,
        metric: &FireMetric,
        start: &GeodesicState,
        dt: f64,
        n: usize,
    ) -> Result<Vec<GeodesicState>> {
        let mut out = Vec::with_capacity(n + 1);
        out.push(*start);
        let mut s = *start;
        for k in 1..=n {
            s = self.rk4_step(metric, &s, dt)?;
            s.t = start.t + k as f64 * dt;
            out.push(s);
        }
        Ok(out)
    }
}

/// Number of coarse samples of the indicatrix used to bracket F-orthogonal directions.
const ROOT_SCAN: usize = 720;

/// The `F`-unit vector `F`-orthogonal to `w` with `det[v | w] > 0`.
pub fn initial_velocity(metric: &FireMetric, t: f64, p: AerialPoint, w: Vec2) -> Result<TangentVector> {
    let local = metric.local(t, p)?;
    orthogonal_unit(&local, w)
}

pub(crate) fn orthogonal_unit(local: &LocalMetric, w: Vec2) -> Result<TangentVector> {
    if w.is_zero() || !w.is_finite() {
        return Err(Error::NoRoot(w.x, w.y));
    }
    let w = w * (1.0 / w.norm());
    let g = |theta: f64| -> Result<(f64, Vec2)> {
        let v = local.indicatrix_point(theta)?;
        Ok((local.g_product(v, w)?, v))
    };
    let step = std::f64::consts::TAU / ROOT_SCAN as f64;
    let samples: Vec<(f64, Vec2)> = (0..ROOT_SCAN)
        .map(|i| g(i as f64 * step))
        .collect::<Result<_>>()?;

    let mut roots = Vec::new();
    for i in 0..ROOT_SCAN {
        let (g0, v0) = samples[i];
        let (g1, _) = samples[(i + 1) % ROOT_SCAN];
        if g0 == 0.0 {
            roots.push(v0);
        } else if g0 * g1 < 0.0 {
            let (mut lo, mut hi) = (i as f64 * step, (i + 1) as f64 * step);
            let mut glo = g0;
            let mut root = v0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let (gm, vm) = g(mid)?;
                root = vm;
                if gm.abs() <= 1e-10 || hi - lo < 1e-15 {
                    break;
                }
                if (gm < 0.0) == (glo < 0.0) {
                    lo = mid;
                    glo = gm;
                } else {
                    hi = mid;
                }
            }
            roots.push(root);
        }
    }
    match roots.len() {
        0 | 1 => Err(Error::NoRoot(w.x, w.y)),
        2 => roots
            .into_iter()
            .find(|v| v.cross(w) > 0.0)
            .ok_or(Error::NoRoot(w.x, w.y)),
        n => Err(Error::AmbiguousRoot(n)),
    }
}

/// `n` indicatrix vectors at equally spaced angles `2πk/n`.
pub fn ignition_fan(metric: &FireMetric, t: f64, p: AerialPoint, n: usize) -> Result<Vec<TangentVector>> {
    let local = metric.local(t, p)?;
    (0..n)
        .map(|k| local.indicatrix_point(std::f64::consts::TAU * k as f64 / n as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{EnvironmentFields, WindFrame};
    use crate::terrain::{Domain, GaussianBump, Terrain, TerrainKind};
    use std::f64::consts::PI;

    fn dom() -> Domain {
        Domain::new(-5.0, 5.0, -5.0, 5.0)
    }

    fn flat_iso() -> FireMetric {
        FireMetric::new(Terrain::flat(dom()), EnvironmentFields::slope_only(2.0, 1.0))
    }

    fn windy() -> FireMetric {
        FireMetric::new(
            Terrain::flat(dom()),
            EnvironmentFields::slope_only(3.0, 1.0).with_wind(0.8, 0.0, WindFrame::Aerial),
        )
    }

    #[test]
    fn isotropic_spacetime_tensor() {
        let st = spacetime_tensor(&flat_iso(), 0.0, Vec2::ZERO, Vec2::new(3.0, 0.0)).unwrap();
        assert_eq!(st.g[0], [1.0, 0.0, 0.0]);
        assert!((st.g[1][1] + 1.0 / 9.0).abs() < 1e-15 && (st.g[2][2] + 1.0 / 9.0).abs() < 1e-15);
        assert!((st.inv[1][1] + 9.0).abs() < 1e-12 && (st.inv[2][2] + 9.0).abs() < 1e-12);
    }

    #[test]
    fn constant_metric_has_no_christoffels() {
        for m in [flat_iso(), windy()] {
            let steps = FdSteps::for_metric(&m);
            let c = christoffel(&m, 0.5, Vec2::new(0.3, 0.2), Vec2::new(1.0, 1.0), steps).unwrap();
            assert!(c.max_abs() < 1e-7);
        }
    }

    #[test]
    fn straight_steps_in_constant_metric() {
        let m = windy();
        let v = m.indicatrix_point(0.0, Vec2::ZERO, 0.4).unwrap();
        let s0 = GeodesicState::new(0.0, Vec2::ZERO, v);
        let s1 = Integrator::new(&m).rk4_step(&m, &s0, 0.01).unwrap();
        assert!((s1.position() - v * 0.01).norm() < 1e-14);
    }

    #[test]
    fn initial_velocity_isotropic() {
        let v = initial_velocity(&flat_iso(), 0.0, Vec2::ZERO, Vec2::new(0.0, 1.0)).unwrap();
        assert!((v - Vec2::new(3.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn initial_velocity_wind() {
        let m = windy();
        let w = Vec2::new(0.0, 1.0);
        let v = initial_velocity(&m, 0.0, Vec2::ZERO, w).unwrap();
        assert!(m.analytic_g_product(0.0, Vec2::ZERO, v, w).unwrap().abs() <= 1e-10);
        assert!((m.metric_value(0.0, Vec2::ZERO, v).unwrap() - 1.0).abs() < 1e-12);
        assert!(v.cross(w) > 0.0);
        // dense scan oracle: the root sits where |g_v(v, w)| is smallest on the indicatrix
        let local = m.local(0.0, Vec2::ZERO).unwrap();
        let n = 100_000;
        let best = (0..n)
            .map(|i| local.indicatrix_point(std::f64::consts::TAU * i as f64 / n as f64).unwrap())
            .filter(|u| u.cross(w) > 0.0)
            .min_by(|a, b| {
                let ga = local.g_product(*a, w).unwrap().abs();
                let gb = local.g_product(*b, w).unwrap().abs();
                ga.total_cmp(&gb)
            })
            .unwrap();
        assert!((best - v).norm() < 1e-3);
        // reflection symmetry about the wind axis puts it on the downwind vertex
        assert!((v - Vec2::new(6.4, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn fan_points() {
        let fan = ignition_fan(&flat_iso(), 0.0, Vec2::ZERO, 4).unwrap();
        let expect = [(3.0, 0.0), (0.0, 3.0), (-3.0, 0.0), (0.0, -3.0)];
        for (v, e) in fan.iter().zip(expect) {
            assert!((*v - Vec2::new(e.0, e.1)).norm() < 1e-14);
        }
        let fan = ignition_fan(&windy(), 0.0, Vec2::ZERO, 8).unwrap();
        assert!((fan[0].x - 6.4).abs() < 1e-13 && (fan[4].x + 1.6).abs() < 1e-13);
    }

    #[test]
    fn lightlike_defect_small_without_renormalization() {
        let m = FireMetric::new(
            Terrain::new(
                TerrainKind::GaussianSum(vec![GaussianBump {
                    amplitude: 3.0,
                    center: Vec2::ZERO,
                    width: Vec2::new(1.0, 1.0),
                }]),
                Domain::new(-12.0, 12.0, -12.0, 12.0),
            ),
            EnvironmentFields::slope_only(1.0, 1.0),
        );
        let integ = Integrator::new(&m).with_renormalize(false);
        let p0 = Vec2::new(-2.0, 0.3);
        let v = m.indicatrix_point(0.0, p0, 0.2).unwrap();
        let traj = integ.integrate(&m, &GeodesicState::new(0.0, p0, v), 1e-3, 5000).unwrap();
        let worst = traj
            .iter()
            .map(|s| (m.metric_value(s.t, s.position(), s.velocity()).unwrap() - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-5, "{worst}");
    }

    #[test]
    fn mirrored_wind_mirrors_fan() {
        let mk = |phi: f64| {
            FireMetric::new(
                Terrain::flat(dom()),
                EnvironmentFields::slope_only(2.0, 1.0).with_wind(0.6, phi, WindFrame::Surface),
            )
        };
        let a = ignition_fan(&mk(0.3), 0.0, Vec2::ZERO, 16).unwrap();
        let b = ignition_fan(&mk(0.3 + PI), 0.0, Vec2::ZERO, 16).unwrap();
        // v ↦ −v maps one indicatrix onto the other
        for k in 0..16 {
            assert!((a[k] + b[(k + 8) % 16]).norm() < 1e-12);
        }
    }
}
