//! Environment fields: fuel and flame terms `a`, `h`, `h′`, wind eccentricity `ε` and wind angle.

pub mod expr;

use std::sync::atomic::{AtomicBool, Ordering};

use crate::error::{Error, Result};
use crate::geom::AerialPoint;
use crate::terrain::{Domain, Terrain};

pub use expr::{EvalError, Expr, ParseError};

#[derive(Debug, Clone, PartialEq)]
pub enum ScalarField {
    Constant(f64),
    Expression(Expr),
}

impl ScalarField {
    pub fn parse(source: &str) -> std::result::Result<Self, ParseError> {
        Ok(ScalarField::Expression(Expr::parse(source)?))
    }

    pub fn eval(&self, t: f64, p: AerialPoint) -> Result<f64> {
        match self {
            ScalarField::Constant(v) => Ok(*v),
            ScalarField::Expression(e) => Ok(e.eval(t, p.x, p.y)?),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            ScalarField::Constant(v) => Some(*v),
            ScalarField::Expression(_) => None,
        }
    }
}

impl From<f64> for ScalarField {
    fn from(v: f64) -> Self {
        ScalarField::Constant(v)
    }
}

/// Whether the configured wind angle is measured in the aerial chart or on the surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindFrame {
    #[default]
    Aerial,
    Surface,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentFields {
    pub a: ScalarField,
    pub h: ScalarField,
    /// Slope coefficient of the flame term; `None` means "same as `h`".
    pub h_prime: Option<ScalarField>,
    pub eps: ScalarField,
    pub wind_angle: ScalarField,
    pub wind_frame: WindFrame,
}

/// Field values at one `(t, p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub a: f64,
    pub h: f64,
    pub h_prime: f64,
    pub eps: f64,
    /// `(cos φ̃, sin φ̃)` on the surface.
    pub wind: (f64, f64),
}

impl EnvironmentFields {
    /// No wind, `h′ = h`.
    pub fn slope_only(a: f64, h: f64) -> Self {
        EnvironmentFields {
            a: a.into(),
            h: h.into(),
            h_prime: None,
            eps: 0.0.into(),
            wind_angle: 0.0.into(),
            wind_frame: WindFrame::Aerial,
        }
    }

    pub fn with_wind(mut self, eps: f64, angle: f64, frame: WindFrame) -> Self {
        self.eps = eps.into();
        self.wind_angle = angle.into();
        self.wind_frame = frame;
        self
    }

    pub fn with_h_prime(mut self, hp: f64) -> Self {
        self.h_prime = Some(hp.into());
        self
    }

    /// Evaluates all fields and checks `a, h, h′ > 0`, `0 ≤ ε < 1`.
    pub fn sample(&self, terrain: &Terrain, t: f64, p: AerialPoint) -> Result<FieldSample> {
        let range = |field, value: f64, constraint, ok: bool| {
            if ok {
                Ok(value)
            } else {
                Err(Error::FieldRange {
                    field,
                    value,
                    constraint,
                    t,
                    x: p.x,
                    y: p.y,
                })
            }
        };
        let a = self.a.eval(t, p)?;
        let a = range("a", a, "a > 0", a > 0.0)?;
        let h = self.h.eval(t, p)?;
        let h = range("h", h, "h > 0", h > 0.0)?;
        let h_prime = match &self.h_prime {
            Some(f) => {
                let v = f.eval(t, p)?;
                range("h_prime", v, "h_prime > 0", v > 0.0)?
            }
            None => h,
        };
        let eps = self.eps.eval(t, p)?;
        let eps = range("eccentricity", eps, "0 <= eccentricity < 1", (0.0..1.0).contains(&eps))?;
        let angle = self.wind_angle.eval(t, p)?;
        // without wind the direction never enters the metric, so skip the conversion
        let wind = match self.wind_frame {
            WindFrame::Aerial if eps != 0.0 => wind_angle_to_surface(terrain, p, angle)?,
            _ => (angle.cos(), angle.sin()),
        };
        Ok(FieldSample {
            a,
            h,
            h_prime,
            eps,
            wind,
        })
    }

    fn all(&self) -> [(&'static str, Option<&ScalarField>); 5] {
        [
            ("a", Some(&self.a)),
            ("h", Some(&self.h)),
            ("h_prime", self.h_prime.as_ref()),
            ("eccentricity", Some(&self.eps)),
            ("wind.angle", Some(&self.wind_angle)),
        ]
    }

    /// Name of the first field whose values differ between `t = 0`, `t_end/2` and `t_end`
    /// on a 5×5 lattice of the domain.
    pub fn time_dependent_field(&self, domain: &Domain, t_end: f64) -> Result<Option<&'static str>> {
        for (name, field) in self.all() {
            let Some(field) = field else { continue };
            if field.as_constant().is_some() {
                continue;
            }
            for i in 0..5 {
                for j in 0..5 {
                    let p = AerialPoint::new(
                        domain.x_min + domain.width() * i as f64 / 4.0,
                        domain.y_min + domain.height() * j as f64 / 4.0,
                    );
                    let v0 = field.eval(0.0, p)?;
                    for t in [0.5 * t_end, t_end] {
                        if field.eval(t, p)? != v0 {
                            return Ok(Some(name));
                        }
                    }
                }
            }
        }
        Ok(None)
    }
}

static WIND_NORM_WARNED: AtomicBool = AtomicBool::new(false);

/// Converts an aerial wind angle `φ` to the surface pair `(cos φ̃, sin φ̃)`.
///
/// The two quotients are evaluated as written; they are not renormalized, so on steep slopes
/// with both gradient components nonzero `cos² φ̃ + sin² φ̃` may differ from 1. A warning is
/// logged once per process when that deviation exceeds `1e-3`.
pub fn wind_angle_to_surface(terrain: &Terrain, p: AerialPoint, phi: f64) -> Result<(f64, f64)> {
    let g = terrain.gradient(p)?;
    let (gx, gy) = (g.x, g.y);
    let (s, c) = phi.sin_cos();
    let lift = (1.0 + (c * gx + s * gy).powi(2)).sqrt();
    let cos_t = (c + c * gx * gx + s * gx * gy) / (lift * (1.0 + gx * gx).sqrt());
    let sin_t = (s + s * gy * gy + c * gx * gy) / (lift * (1.0 + gy * gy).sqrt());
    let dev = (cos_t * cos_t + sin_t * sin_t - 1.0).abs();
    if dev > 1e-3 && !WIND_NORM_WARNED.swap(true, Ordering::Relaxed) {
        log::warn!(
            "surface wind direction at ({}, {}) has cos²+sin² off by {dev:.2e}; using it unnormalized",
            p.x,
            p.y
        );
    }
    Ok((cos_t, sin_t))
}
