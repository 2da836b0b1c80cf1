//! The fire Finsler metric `F` on the aerial chart.
//!
//! At a frozen `(t, p)` the metric is
//!
//! ```text
//! F(v) = α² / (α²·K/(α − εω) + hα + h′β),   K = a(1 − ε²)
//! ```
//!
//! with `β = dz(v)`, `α = ‖dẑ(v)‖` and `ω` the wind one-form. With `ε = 0` it reduces to the
//! slope-only (Matsumoto-type) metric `α²/(aα + hα + h′β)`.

use crate::error::{Error, Result};
use crate::fields::EnvironmentFields;
use crate::geom::{AerialPoint, Sym2, TangentVector, Vec2};
use crate::terrain::Terrain;

/// Relative step of the finite-difference fundamental tensor.
pub const FD_TENSOR_STEP: f64 = 1e-4;

/// Metric data frozen at one `(t, p)`. Cheap to copy; all vector operations live here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalMetric {
    /// `∇z(p)`
    pub grad: Vec2,
    pub a: f64,
    pub h: f64,
    pub h_prime: f64,
    pub eps: f64,
    /// `(cos φ̃, sin φ̃)`
    pub wind: (f64, f64),
    /// Covector of the wind one-form: `ω(v) = wind_covector · v`.
    pub wind_covector: Vec2,
}

/// Value, gradient and Hessian-derived tensor of `F` at one vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricJet {
    pub f: f64,
    pub grad: Vec2,
    /// `g = ∇F∇Fᵀ + F∇²F`, i.e. half the Hessian of `F²`.
    pub tensor: Sym2,
}

impl LocalMetric {
    pub fn new(grad: Vec2, a: f64, h: f64, h_prime: f64, eps: f64, wind: (f64, f64)) -> Self {
        let (c, s) = wind;
        let (gx, gy) = (grad.x, grad.y);
        let ex = Vec2::new(1.0 + gx * gx, gx * gy) * (c / (1.0 + gx * gx).sqrt());
        let ey = Vec2::new(gx * gy, 1.0 + gy * gy) * (s / (1.0 + gy * gy).sqrt());
        LocalMetric {
            grad,
            a,
            h,
            h_prime,
            eps,
            wind,
            wind_covector: ex + ey,
        }
    }

    #[inline]
    fn k(&self) -> f64 {
        self.a * (1.0 - self.eps * self.eps)
    }

    /// `β(v) = dz(v)`
    #[inline]
    pub fn beta(&self, v: Vec2) -> f64 {
        self.grad.dot(v)
    }

    /// `α(v) = ‖dẑ(v)‖`
    #[inline]
    pub fn alpha(&self, v: Vec2) -> f64 {
        let b = self.beta(v);
        (v.norm_sq() + b * b).sqrt()
    }

    /// `⟨dẑ(v), dẑ(u)⟩`
    #[inline]
    pub fn surface_dot(&self, v: Vec2, u: Vec2) -> f64 {
        v.dot(u) + self.beta(v) * self.beta(u)
    }

    #[inline]
    pub fn omega(&self, v: Vec2) -> f64 {
        self.wind_covector.dot(v)
    }

    fn wind_term(&self, alpha: f64, omega: f64) -> Result<f64> {
        let q = alpha - self.eps * omega;
        if q <= 0.0 {
            return Err(Error::DegenerateWindTerm(q));
        }
        Ok(q)
    }

    /// Denominator `D(v) = α²K/q + hα + h′β`, so that `F = α²/D`.
    fn denominator(&self, v: Vec2) -> Result<(f64, f64, f64)> {
        if v.is_zero() {
            return Err(Error::ZeroVector);
        }
        let alpha = self.alpha(v);
        let q = self.wind_term(alpha, self.omega(v))?;
        let d = alpha * alpha * self.k() / q + self.h * alpha + self.h_prime * self.beta(v);
        if d <= 0.0 {
            return Err(Error::NonPositiveSpeed(d));
        }
        Ok((alpha, q, d))
    }

    pub fn value(&self, v: TangentVector) -> Result<f64> {
        let (alpha, _, d) = self.denominator(v)?;
        Ok(alpha * alpha / d)
    }

    /// Fire speed measured on the surface in the aerial direction `theta`.
    pub fn fire_speed(&self, theta: f64) -> Result<f64> {
        let u = Vec2::from_angle(theta);
        let alpha = self.alpha(u);
        let q = self.wind_term(alpha, self.omega(u))?;
        // K/(1 − ε cos(θ̃−φ̃)) + h + h′ cos δ with cos(θ̃−φ̃) = ω/α and cos δ = β/α
        Ok(self.k() * alpha / q + self.h + self.h_prime * self.beta(u) / alpha)
    }

    /// The `F`-unit vector in direction `theta`.
    pub fn indicatrix_point(&self, theta: f64) -> Result<TangentVector> {
        let u = Vec2::from_angle(theta);
        Ok(u * (1.0 / self.value(u)?))
    }

    /// `Q(v) = α²(1 − K/(α − εω)) − (hα + h′β)`, zero exactly on the indicatrix.
    pub fn indicatrix_residual(&self, v: TangentVector) -> Result<f64> {
        if v.is_zero() {
            return Err(Error::ZeroVector);
        }
        let alpha = self.alpha(v);
        let q = self.wind_term(alpha, self.omega(v))?;
        Ok(alpha * alpha * (1.0 - self.k() / q) - (self.h * alpha + self.h_prime * self.beta(v)))
    }

    /// `g_v(v, u) = ½ d/dδ F(v + δu)²` from its closed form.
    pub fn g_product(&self, v: TangentVector, u: Vec2) -> Result<f64> {
        let (alpha, q, d) = self.denominator(v)?;
        let k = self.k();
        let eps = self.eps;
        let vu = self.surface_dot(v, u);
        let a2 = alpha * alpha;
        let wind_part =
            k / (q * q) * (eps * a2 * (2.0 * vu * self.omega(v) - a2 * self.omega(u)) - a2 * alpha * vu);
        let flame_part = a2 * (self.h * vu / alpha + self.h_prime * self.beta(u));
        Ok(a2 / (d * d * d) * (2.0 * vu * d + wind_part - flame_part))
    }

    /// Fundamental tensor by central differences of `F²`: second differences on the diagonal
    /// and a four-point cross stencil for the mixed entry, step `rel_step·‖v‖`.
    pub fn fundamental_tensor_fd_with_step(&self, v: TangentVector, rel_step: f64) -> Result<Sym2> {
        if v.is_zero() {
            return Err(Error::ZeroVector);
        }
        let s = rel_step * v.norm();
        let f2 = |dx: f64, dy: f64| -> Result<f64> {
            let f = self.value(v + Vec2::new(dx, dy))?;
            Ok(f * f)
        };
        let c = f2(0.0, 0.0)?;
        let g11 = (f2(s, 0.0)? - 2.0 * c + f2(-s, 0.0)?) / (2.0 * s * s);
        let g22 = (f2(0.0, s)? - 2.0 * c + f2(0.0, -s)?) / (2.0 * s * s);
        let g12 = (f2(s, s)? - f2(s, -s)? - f2(-s, s)? + f2(-s, -s)?) / (8.0 * s * s);
        Ok(Sym2::new(g11, g12, g22))
    }

    pub fn fundamental_tensor_fd(&self, v: TangentVector) -> Result<Sym2> {
        self.fundamental_tensor_fd_with_step(v, FD_TENSOR_STEP)
    }

    /// `F`, `∇F` and the fundamental tensor by exact differentiation of `α²/D`.
    pub fn jet(&self, v: TangentVector) -> Result<MetricJet> {
        let (alpha, q, d) = self.denominator(v)?;
        let k = self.k();
        let eps = self.eps;
        let b = self.grad;
        let c = self.wind_covector;
        let omega = self.omega(v);
        let a2 = alpha * alpha;

        // α = √(vᵀMv) with M = I + bbᵀ
        let m = Sym2::IDENTITY + Sym2::outer(b);
        let mv = m.apply(v);
        let da = mv * (1.0 / alpha);
        let dda = (m - Sym2::outer(da)) * (1.0 / alpha);

        // E(α, ω) = α²K/q
        let q2 = q * q;
        let q3 = q2 * q;
        let e_a = k * (2.0 * alpha / q - a2 / q2);
        let e_w = a2 * k * eps / q2;
        let e_aa = 2.0 * k * eps * eps * omega * omega / q3;
        let e_aw = -2.0 * k * alpha * eps * eps * omega / q3;
        let e_ww = 2.0 * k * a2 * eps * eps / q3;

        let dd = da * (e_a + self.h) + b * self.h_prime + c * e_w;
        let ddd = dda * (e_a + self.h)
            + Sym2::outer(da) * e_aa
            + Sym2::sym_outer(da, c) * e_aw
            + Sym2::outer(c) * e_ww;

        let f = a2 / d;
        let dn = mv * 2.0;
        let ddn = m * 2.0;
        let df = (dn - dd * f) * (1.0 / d);
        let ddf = (ddn - Sym2::sym_outer(df, dd) - ddd * f) * (1.0 / d);
        Ok(MetricJet {
            f,
            grad: df,
            tensor: Sym2::outer(df) + ddf * f,
        })
    }

    pub fn fundamental_tensor_exact(&self, v: TangentVector) -> Result<Sym2> {
        Ok(self.jet(v)?.tensor)
    }
}

/// Slope-only convexity test outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeConvexity {
    pub pass: bool,
    /// `(a + h)/h′ − 2 sin σ`; positive means strongly convex.
    pub margin: f64,
}

/// Outcome of sampling the fundamental tensor around the indicatrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityScan {
    pub pass: bool,
    /// Direction with the smallest `λ_min / trace`.
    pub worst_theta: f64,
    pub min_eigenvalue: f64,
    /// Directions failing the eigenvalue floor.
    pub failing: usize,
    /// Smallest arc `[from, to]` (radians, `to` may exceed 2π) covering the failing directions.
    pub failing_arc: Option<(f64, f64)>,
}

/// Terrain plus environment fields.
#[derive(Debug, Clone, PartialEq)]
pub struct FireMetric {
    terrain: Terrain,
    fields: EnvironmentFields,
}

impl FireMetric {
    pub fn new(terrain: Terrain, fields: EnvironmentFields) -> Self {
        FireMetric { terrain, fields }
    }

    pub fn terrain(&self) -> &Terrain {
        &self.terrain
    }

    pub fn fields(&self) -> &EnvironmentFields {
        &self.fields
    }

    /// Freezes the metric at `(t, p)`, checking field ranges.
    pub fn local(&self, t: f64, p: AerialPoint) -> Result<LocalMetric> {
        let grad = self.terrain.gradient(p)?;
        let s = self.fields.sample(&self.terrain, t, p)?;
        Ok(LocalMetric::new(grad, s.a, s.h, s.h_prime, s.eps, s.wind))
    }

    pub fn beta(&self, p: AerialPoint, v: Vec2) -> Result<f64> {
        Ok(self.terrain.gradient(p)?.dot(v))
    }

    pub fn alpha(&self, p: AerialPoint, v: Vec2) -> Result<f64> {
        let b = self.beta(p, v)?;
        Ok((v.norm_sq() + b * b).sqrt())
    }

    pub fn omega(&self, t: f64, p: AerialPoint, v: Vec2) -> Result<f64> {
        Ok(self.local(t, p)?.omega(v))
    }

    pub fn fire_speed(&self, t: f64, p: AerialPoint, theta: f64) -> Result<f64> {
        self.local(t, p)?.fire_speed(theta)
    }

    pub fn metric_value(&self, t: f64, p: AerialPoint, v: TangentVector) -> Result<f64> {
        self.local(t, p)?.value(v)
    }

    pub fn indicatrix_point(&self, t: f64, p: AerialPoint, theta: f64) -> Result<TangentVector> {
        self.local(t, p)?.indicatrix_point(theta)
    }

    pub fn indicatrix_residual(&self, t: f64, p: AerialPoint, v: TangentVector) -> Result<f64> {
        self.local(t, p)?.indicatrix_residual(v)
    }

    pub fn fundamental_tensor(&self, t: f64, p: AerialPoint, v: TangentVector) -> Result<Sym2> {
        self.local(t, p)?.fundamental_tensor_fd(v)
    }

    pub fn fundamental_tensor_exact(&self, t: f64, p: AerialPoint, v: TangentVector) -> Result<Sym2> {
        self.local(t, p)?.fundamental_tensor_exact(v)
    }

    pub fn analytic_g_product(&self, t: f64, p: AerialPoint, v: TangentVector, u: Vec2) -> Result<f64> {
        self.local(t, p)?.g_product(v, u)
    }

    /// Closed-form strong-convexity test for the windless metric: `2 sin σ < (a + h)/h′`.
    pub fn convexity_check_slope(&self, t: f64, p: AerialPoint) -> Result<SlopeConvexity> {
        let s = self.fields.sample(&self.terrain, t, p)?;
        if s.eps != 0.0 {
            return Err(Error::NotApplicable(s.eps));
        }
        let sigma = self.terrain.slant_angle(p)?;
        let margin = (s.a + s.h) / s.h_prime - 2.0 * sigma.sin();
        Ok(SlopeConvexity {
            pass: margin > 0.0,
            margin,
        })
    }

    /// Samples `n_dirs` indicatrix directions and checks that the fundamental tensor is
    /// positive definite there (`λ_min > 1e-9·trace`).
    pub fn convexity_scan_numeric(&self, t: f64, p: AerialPoint, n_dirs: usize) -> Result<ConvexityScan> {
        let local = self.local(t, p)?;
        scan_local(&local, n_dirs)
    }
}

pub(crate) fn scan_local(local: &LocalMetric, n_dirs: usize) -> Result<ConvexityScan> {
    let mut worst = ConvexityScan {
        pass: true,
        worst_theta: 0.0,
        min_eigenvalue: f64::INFINITY,
        failing: 0,
        failing_arc: None,
    };
    let mut worst_ratio = f64::INFINITY;
    let mut bad: Vec<f64> = Vec::new();
    for i in 0..n_dirs {
        let theta = std::f64::consts::TAU * i as f64 / n_dirs as f64;
        let u = Vec2::from_angle(theta);
        let g = match local.fundamental_tensor_exact(u) {
            Ok(g) => g,
            Err(Error::NonPositiveSpeed(_)) | Err(Error::DegenerateWindTerm(_)) => {
                worst.failing += 1;
                worst.pass = false;
                bad.push(theta);
                continue;
            }
            Err(e) => return Err(e),
        };
        let (lmin, _) = g.eigenvalues();
        let trace = g.trace();
        let ratio = lmin / trace.abs();
        if lmin <= 1e-9 * trace {
            worst.failing += 1;
            worst.pass = false;
            bad.push(theta);
        }
        if ratio < worst_ratio {
            worst_ratio = ratio;
            worst.worst_theta = theta;
        }
        worst.min_eigenvalue = worst.min_eigenvalue.min(lmin);
    }
    worst.failing_arc = covering_arc(&bad);
    Ok(worst)
}

/// Smallest arc containing all angles of the ascending list: the complement of the widest gap.
fn covering_arc(sorted: &[f64]) -> Option<(f64, f64)> {
    let (&first, &last) = (sorted.first()?, sorted.last()?);
    let tau = std::f64::consts::TAU;
    let mut gap = first + tau - last;
    let mut arc = (first, last);
    for w in sorted.windows(2) {
        if w[1] - w[0] > gap {
            gap = w[1] - w[0];
            arc = (w[1], w[0] + tau);
        }
    }
    Some(arc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::WindFrame;
    use crate::terrain::{Domain, TerrainKind};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const SQRT3: f64 = 1.732_050_807_568_877_2;

    fn dom() -> Domain {
        Domain::new(-5.0, 5.0, -5.0, 5.0)
    }

    fn plane(gx: f64) -> Terrain {
        Terrain::new(TerrainKind::Plane { gx, gy: 0.0 }, dom())
    }

    fn flat_iso() -> LocalMetric {
        LocalMetric::new(Vec2::ZERO, 2.0, 1.0, 1.0, 0.0, (1.0, 0.0))
    }

    fn slope() -> LocalMetric {
        LocalMetric::new(Vec2::new(SQRT3, 0.0), 2.0, 1.0, 1.0, 0.0, (1.0, 0.0))
    }

    fn windy() -> LocalMetric {
        LocalMetric::new(Vec2::ZERO, 3.0, 1.0, 1.0, 0.8, (1.0, 0.0))
    }

    #[test]
    fn alpha_beta() {
        let m = FireMetric::new(plane(SQRT3), EnvironmentFields::slope_only(2.0, 1.0));
        assert_eq!(m.beta(Vec2::ZERO, Vec2::new(1.0, 0.0)).unwrap(), SQRT3);
        assert!((m.alpha(Vec2::ZERO, Vec2::new(1.0, 0.0)).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(m.alpha(Vec2::ZERO, Vec2::new(0.0, 1.0)).unwrap(), 1.0);
        let flat = FireMetric::new(plane(0.0), EnvironmentFields::slope_only(2.0, 1.0));
        assert_eq!(flat.alpha(Vec2::ZERO, Vec2::new(3.0, 4.0)).unwrap(), 5.0);
    }

    #[test]
    fn omega_values() {
        let flat = LocalMetric::new(Vec2::ZERO, 1.0, 1.0, 1.0, 0.5, (1.0, 0.0));
        assert_eq!(flat.omega(Vec2::new(1.0, 0.0)), 1.0);
        let up = FireMetric::new(
            plane(0.0),
            EnvironmentFields::slope_only(1.0, 1.0).with_wind(0.5, PI / 2.0, WindFrame::Surface),
        );
        assert!(up.omega(0.0, Vec2::ZERO, Vec2::new(1.0, 0.0)).unwrap().abs() < 1e-16);
        let s = LocalMetric::new(Vec2::new(SQRT3, 0.0), 1.0, 1.0, 1.0, 0.5, (1.0, 0.0));
        assert!((s.omega(Vec2::new(1.0, 0.0)) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn fire_speeds() {
        assert!((flat_iso().fire_speed(0.7).unwrap() - 3.0).abs() < 1e-15);
        assert!((slope().fire_speed(0.0).unwrap() - (3.0 + SQRT3 / 2.0)).abs() < 1e-14);
        assert!((windy().fire_speed(0.0).unwrap() - 6.4).abs() < 1e-14);
        assert!((windy().fire_speed(PI).unwrap() - 1.6).abs() < 1e-14);
    }

    #[test]
    fn metric_values() {
        assert!((flat_iso().value(Vec2::new(3.0, 0.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!((slope().value(Vec2::new(1.9330, 0.0)).unwrap() - 1.0).abs() < 1e-4);
        assert_eq!(flat_iso().value(Vec2::ZERO), Err(Error::ZeroVector));
    }

    #[test]
    fn indicatrix_points() {
        let v = flat_iso().indicatrix_point(1.1).unwrap();
        assert!((v.norm() - 3.0).abs() < 1e-14);
        let v = slope().indicatrix_point(PI).unwrap();
        assert!((v.x + (3.0 - SQRT3 / 2.0) / 2.0).abs() < 1e-14 && v.y.abs() < 1e-15);
        assert!((windy().indicatrix_point(0.0).unwrap().x - 6.4).abs() < 1e-13);
        assert!((windy().indicatrix_point(PI).unwrap().x + 1.6).abs() < 1e-13);
    }

    #[test]
    fn residuals() {
        let m = flat_iso();
        assert!((m.indicatrix_residual(Vec2::new(6.0, 0.0)).unwrap() - 18.0).abs() < 1e-12);
        for th in [0.0, 1.0, 2.5, 4.0] {
            for lm in [slope(), windy()] {
                let v = lm.indicatrix_point(th).unwrap();
                assert!(lm.indicatrix_residual(v).unwrap().abs() < 1e-9);
                assert!(lm.indicatrix_residual(v * 0.5).unwrap() < 0.0);
                assert!(lm.indicatrix_residual(v * 1.5).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn isotropic_tensor() {
        let g = flat_iso().fundamental_tensor_fd(Vec2::new(0.3, -1.2)).unwrap();
        assert!((g.m11 - 1.0 / 9.0).abs() < 1e-6 / 9.0 && g.m12.abs() < 1e-6 / 9.0);
        let g = flat_iso().fundamental_tensor_exact(Vec2::new(0.3, -1.2)).unwrap();
        assert!((g.m11 - 1.0 / 9.0).abs() < 1e-15 && g.m12.abs() < 1e-15);
        assert_eq!(flat_iso().g_product(Vec2::new(3.0, 0.0), Vec2::new(0.0, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn slope_convexity() {
        let m = FireMetric::new(plane(SQRT3), EnvironmentFields::slope_only(2.0, 1.0));
        let c = m.convexity_check_slope(0.0, Vec2::ZERO).unwrap();
        assert!(c.pass && (c.margin - (3.0 - SQRT3)).abs() < 1e-12);
        let w = FireMetric::new(
            plane(0.0),
            EnvironmentFields::slope_only(1.0, 1.0).with_wind(0.2, 0.0, WindFrame::Surface),
        );
        assert!(matches!(w.convexity_check_slope(0.0, Vec2::ZERO), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn numeric_convexity() {
        let flat = FireMetric::new(plane(0.0), EnvironmentFields::slope_only(2.0, 1.0));
        let s = flat.convexity_scan_numeric(0.0, Vec2::ZERO, 64).unwrap();
        assert!(s.pass && (s.min_eigenvalue - 1.0 / 9.0).abs() < 1e-12);
        let fig9 = FireMetric::new(
            plane(1.0),
            EnvironmentFields::slope_only(1.0, 2.0).with_wind(0.9, 0.0, WindFrame::Surface),
        );
        let s = fig9.convexity_scan_numeric(0.0, Vec2::ZERO, 256).unwrap();
        assert!(!s.pass && s.failing > 0);
    }

    fn arb_local() -> impl Strategy<Value = LocalMetric> {
        (
            -1.0f64..1.0,
            -1.0f64..1.0,
            0.5f64..3.0,
            0.1f64..1.0,
            0.0f64..0.8,
            0.0f64..std::f64::consts::TAU,
        )
            .prop_map(|(gx, gy, a, h, eps, phi)| {
                LocalMetric::new(Vec2::new(gx, gy), a, h, h, eps, (phi.cos(), phi.sin()))
            })
    }

    proptest! {
        #[test]
        fn homogeneity(m in arb_local(), th in 0.0f64..6.3, r in 0.1f64..10.0, lam in 0.1f64..10.0) {
            let v = Vec2::from_angle(th) * r;
            let f = m.value(v).unwrap();
            prop_assert!(f > 0.0);
            prop_assert!((m.value(v * lam).unwrap() - lam * f).abs() <= 1e-12 * lam * f);
        }

        #[test]
        fn exact_tensor_matches_closed_form(m in arb_local(), th in 0.0f64..6.3, ph in 0.0f64..6.3) {
            let v = m.indicatrix_point(th).unwrap();
            let u = Vec2::from_angle(ph);
            let g = m.fundamental_tensor_exact(v).unwrap();
            let closed = m.g_product(v, u).unwrap();
            let scale = m.value(u).unwrap();
            prop_assert!((g.form(v, u) - closed).abs() <= 1e-12 * scale);
            prop_assert!((g.form(v, v) - 1.0).abs() <= 1e-12);
        }
    }
}
