//! Scenario files: TOML with `[domain]`, `[terrain]`, `[fields]`, `[wind]`, `[ignition]`,
//! `[solver]`, `[oracle]`, `[audit]` and `[indicatrix]` sections.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fields::expr::Var;
use crate::fields::{EnvironmentFields, ScalarField, WindFrame};
use crate::front::{Ignition, SolverConfig};
use crate::geom::Vec2;
use crate::metric::FireMetric;
use crate::terrain::{DemGrid, Domain, GaussianBump, Terrain, TerrainKind};

/// Checked-in figure configurations, by name.
pub const PRESETS: [(&str, &str); 10] = [
    ("fig2", include_str!("../../presets/fig2.toml")),
    ("fig3", include_str!("../../presets/fig3.toml")),
    ("fig4", include_str!("../../presets/fig4.toml")),
    ("fig5a", include_str!("../../presets/fig5a.toml")),
    ("fig5b", include_str!("../../presets/fig5b.toml")),
    ("fig6", include_str!("../../presets/fig6.toml")),
    ("fig7", include_str!("../../presets/fig7.toml")),
    ("fig8", include_str!("../../presets/fig8.toml")),
    ("fig9", include_str!("../../presets/fig9.toml")),
    ("complex_terrain", include_str!("../../presets/complex_terrain.toml")),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSettings {
    /// Grid nodes across the domain width.
    pub nx: usize,
    pub radius: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditSettings {
    pub nx: usize,
    pub ny: usize,
    pub times: Vec<f64>,
    pub directions: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndicatrixSettings {
    pub nx: usize,
    pub ny: usize,
    /// Display factor applied to each indicatrix; `None` fits them to the lattice spacing.
    pub scale: Option<f64>,
    pub t: f64,
    /// Draw the wind ellipse and the flame circle of the no-slope decomposition.
    pub overlay: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub terrain: Terrain,
    pub fields: EnvironmentFields,
    pub ignition: Ignition,
    pub solver: SolverConfig,
    pub oracle: OracleSettings,
    pub audit: AuditSettings,
    pub indicatrix: IndicatrixSettings,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    domain: Option<RawDomain>,
    terrain: Option<RawTerrain>,
    fields: Option<RawFields>,
    wind: Option<RawWind>,
    ignition: Option<RawIgnition>,
    solver: Option<RawSolver>,
    oracle: Option<RawOracle>,
    audit: Option<RawAudit>,
    indicatrix: Option<RawIndicatrix>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    x: [f64; 2],
    y: [f64; 2],
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawTerrain {
    Flat,
    Plane {
        gx: f64,
        gy: f64,
    },
    Gaussian {
        bumps: Vec<RawBump>,
    },
    Dem {
        path: String,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBump {
    amplitude: f64,
    center: [f64; 2],
    width: RawWidth,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawWidth {
    Same(f64),
    PerAxis([f64; 2]),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawValue {
    Number(f64),
    Expr(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFields {
    a: Option<RawValue>,
    h: Option<RawValue>,
    h_prime: Option<RawValue>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWind {
    eccentricity: Option<RawValue>,
    angle: Option<RawValue>,
    frame: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawIgnition {
    Point {
        at: [f64; 2],
    },
    Circle {
        center: [f64; 2],
        radius: f64,
    },
    Ellipse {
        center: [f64; 2],
        semi_axes: [f64; 2],
        rotation: Option<RawValue>,
    },
    Polygon {
        points: Option<Vec<[f64; 2]>>,
        file: Option<String>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    n: Option<i64>,
    dt: Option<f64>,
    t_start: Option<f64>,
    t_end: Option<f64>,
    output_interval: Option<f64>,
    renormalize: Option<bool>,
    focal_factor: Option<f64>,
    exclude: Option<Vec<usize>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOracle {
    nx: Option<usize>,
    radius: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAudit {
    nx: Option<usize>,
    ny: Option<usize>,
    times: Option<Vec<f64>>,
    directions: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIndicatrix {
    nx: Option<usize>,
    ny: Option<usize>,
    scale: Option<f64>,
    t: Option<f64>,
    overlay: Option<bool>,
}

fn pair(v: [f64; 2]) -> Vec2 {
    Vec2::new(v[0], v[1])
}

fn scalar(key: &str, v: RawValue) -> Result<ScalarField> {
    match v {
        RawValue::Number(x) => Ok(ScalarField::Constant(x)),
        RawValue::Expr(s) => ScalarField::parse(&s).map_err(|e| Error::config(key, e.to_string())),
    }
}

/// A plain number for keys that do not accept fields, such as `ignition.rotation`.
fn constant(key: &str, v: RawValue) -> Result<f64> {
    match scalar(key, v)? {
        ScalarField::Constant(x) => Ok(x),
        ScalarField::Expression(e) => {
            if [Var::T, Var::X, Var::Y].into_iter().any(|v| e.mentions(v)) {
                Err(Error::config(key, "must be a constant"))
            } else {
                Ok(e.eval(0.0, 0.0, 0.0)?)
            }
        }
    }
}

fn require<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| Error::config(key, "required"))
}

fn check(ok: bool, key: &str, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(key, msg))
    }
}

fn resolve(base: Option<&Path>, file: &str) -> PathBuf {
    match base {
        Some(dir) if Path::new(file).is_relative() => dir.join(file),
        _ => PathBuf::from(file),
    }
}

/// Polygon vertices, one `x y` or `x,y` pair per line; `#` starts a comment.
pub fn parse_polyline(text: &str) -> Result<Vec<Vec2>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let nums: std::result::Result<Vec<f64>, _> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(str::parse::<f64>)
            .collect();
        match nums.as_deref() {
            Ok([x, y]) => out.push(Vec2::new(*x, *y)),
            _ => {
                return Err(Error::config(
                    "ignition.file",
                    format!("line {}: expected two numbers", n + 1),
                ))
            }
        }
    }
    Ok(out)
}

impl Scenario {
    /// Parses a scenario; relative file paths resolve against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| Error::config("config", e.message()))?;

        let terrain_raw = require(raw.terrain, "terrain")?;
        let (kind, grid_extent) = match terrain_raw {
            RawTerrain::Flat => (TerrainKind::Plane { gx: 0.0, gy: 0.0 }, None),
            RawTerrain::Plane { gx, gy } => (TerrainKind::Plane { gx, gy }, None),
            RawTerrain::Gaussian { bumps } => {
                check(!bumps.is_empty(), "terrain.bumps", "at least one bump required")?;
                let bumps = bumps
                    .into_iter()
                    .map(|b| {
                        let width = match b.width {
                            RawWidth::Same(w) => Vec2::new(w, w),
                            RawWidth::PerAxis(w) => pair(w),
                        };
                        check(width.x > 0.0 && width.y > 0.0, "terrain.bumps.width", "must be positive")?;
                        Ok(GaussianBump {
                            amplitude: b.amplitude,
                            center: pair(b.center),
                            width,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                (TerrainKind::GaussianSum(bumps), None)
            }
            RawTerrain::Dem { path } => {
                let grid = DemGrid::load(&resolve(base, &path)).map_err(|e| Error::config("terrain.path", e.to_string()))?;
                let extent = grid.extent();
                (TerrainKind::Grid(grid), Some(extent))
            }
        };
        let domain = match (raw.domain, grid_extent) {
            (Some(d), _) => {
                check(d.x[0] < d.x[1], "domain.x", "need x[0] < x[1]")?;
                check(d.y[0] < d.y[1], "domain.y", "need y[0] < y[1]")?;
                Domain::new(d.x[0], d.x[1], d.y[0], d.y[1])
            }
            (None, Some(extent)) => extent,
            (None, None) => return Err(Error::config("domain", "required")),
        };
        let terrain = Terrain::new(kind, domain);

        let f = require(raw.fields, "fields")?;
        let mut fields = EnvironmentFields::slope_only(1.0, 1.0);
        fields.a = scalar("fields.a", require(f.a, "fields.a")?)?;
        fields.h = scalar("fields.h", require(f.h, "fields.h")?)?;
        fields.h_prime = f.h_prime.map(|v| scalar("fields.h_prime", v)).transpose()?;
        if let Some(w) = raw.wind {
            if let Some(e) = w.eccentricity {
                fields.eps = scalar("wind.eccentricity", e)?;
            }
            if let Some(a) = w.angle {
                fields.wind_angle = scalar("wind.angle", a)?;
            }
            fields.wind_frame = match w.frame.as_deref() {
                None | Some("aerial") => WindFrame::Aerial,
                Some("surface") => WindFrame::Surface,
                Some(other) => {
                    return Err(Error::config(
                        "wind.frame",
                        format!("expected \"aerial\" or \"surface\", got \"{other}\""),
                    ))
                }
            };
        }

        let ignition = match require(raw.ignition, "ignition")? {
            RawIgnition::Point { at } => Ignition::Point(pair(at)),
            RawIgnition::Circle { center, radius } => {
                check(radius > 0.0, "ignition.radius", "must be positive")?;
                Ignition::Circle {
                    center: pair(center),
                    radius,
                }
            }
            RawIgnition::Ellipse {
                center,
                semi_axes,
                rotation,
            } => {
                check(semi_axes[0] > 0.0 && semi_axes[1] > 0.0, "ignition.semi_axes", "must be positive")?;
                Ignition::Ellipse {
                    center: pair(center),
                    semi_axes: (semi_axes[0], semi_axes[1]),
                    rotation: rotation.map(|r| constant("ignition.rotation", r)).transpose()?.unwrap_or(0.0),
                }
            }
            RawIgnition::Polygon { points, file } => {
                let pts = match (points, file) {
                    (Some(p), None) => p.into_iter().map(pair).collect(),
                    (None, Some(file)) => {
                        let text = std::fs::read_to_string(resolve(base, &file))
                            .map_err(|e| Error::config("ignition.file", e.to_string()))?;
                        parse_polyline(&text)?
                    }
                    _ => return Err(Error::config("ignition", "polygon needs exactly one of `points` or `file`")),
                };
                check(pts.len() >= 3, "ignition.points", "need at least 3 vertices")?;
                Ignition::Polygon(pts)
            }
        };

        let s = require(raw.solver, "solver")?;
        let defaults = SolverConfig::default();
        let t_end = require(s.t_end, "solver.t_end")?;
        let dt = s.dt.unwrap_or(defaults.dt);
        let n = s.n.unwrap_or(defaults.n_trajectories as i64);
        let solver = SolverConfig {
            n_trajectories: n.max(0) as usize,
            dt,
            t_start: s.t_start.unwrap_or(0.0),
            t_end,
            output_interval: s.output_interval.unwrap_or(t_end),
            renormalize: s.renormalize.unwrap_or(true),
            focal_factor: s.focal_factor.unwrap_or(defaults.focal_factor),
            exclude: s.exclude.unwrap_or_default(),
        };

        let o = raw.oracle;
        let oracle = OracleSettings {
            nx: o.as_ref().and_then(|o| o.nx).unwrap_or(400),
            radius: o.as_ref().and_then(|o| o.radius).unwrap_or(3),
        };
        check(oracle.nx >= 2, "oracle.nx", "need at least 2 nodes")?;
        check(matches!(oracle.radius, 2 | 3), "oracle.radius", "must be 2 or 3")?;

        let a = raw.audit;
        let audit = AuditSettings {
            nx: a.as_ref().and_then(|a| a.nx).unwrap_or(9),
            ny: a.as_ref().and_then(|a| a.ny).unwrap_or(9),
            times: a
                .as_ref()
                .and_then(|a| a.times.clone())
                .unwrap_or_else(|| vec![solver.t_start, 0.5 * (solver.t_start + t_end), t_end]),
            directions: a.as_ref().and_then(|a| a.directions).unwrap_or(360),
        };
        check(audit.nx >= 1 && audit.ny >= 1, "audit", "lattice needs at least one point per axis")?;
        check(!audit.times.is_empty(), "audit.times", "need at least one time")?;
        check(audit.directions >= 8, "audit.directions", "need at least 8 directions")?;

        let ix = raw.indicatrix;
        let indicatrix = IndicatrixSettings {
            nx: ix.as_ref().and_then(|i| i.nx).unwrap_or(7),
            ny: ix.as_ref().and_then(|i| i.ny).unwrap_or(7),
            scale: ix.as_ref().and_then(|i| i.scale),
            t: ix.as_ref().and_then(|i| i.t).unwrap_or(solver.t_start),
            overlay: ix.as_ref().and_then(|i| i.overlay).unwrap_or(false),
        };
        check(indicatrix.nx >= 1 && indicatrix.ny >= 1, "indicatrix", "lattice needs at least one point per axis")?;

        let scenario = Scenario {
            name: raw.name.unwrap_or_else(|| "scenario".into()),
            terrain,
            fields,
            ignition,
            solver,
            oracle,
            audit,
            indicatrix,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent())
    }

    pub fn preset(name: &str) -> Option<Result<Self>> {
        PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| Self::parse(text, None))
    }

    /// Checks the solver invariants; called again after command-line overrides.
    pub fn validate(&self) -> Result<()> {
        let s = &self.solver;
        check(s.t_end > s.t_start && s.t_end > 0.0, "solver.t_end", "must be positive and after t_start")?;
        check(s.dt > 0.0, "solver.dt", "must be positive")?;
        check(s.output_interval >= s.dt, "solver.output_interval", "must be at least dt")?;
        check(s.n_trajectories >= 8, "solver.n", "need at least 8 trajectories")?;
        check(s.focal_factor > 0.0, "solver.focal_factor", "must be positive")?;
        if let Some(&id) = s.exclude.iter().find(|&&id| id >= s.n_trajectories) {
            return Err(Error::config("solver.exclude", format!("seed {id} is out of range")));
        }
        Ok(())
    }

    pub fn metric(&self) -> FireMetric {
        FireMetric::new(self.terrain.clone(), self.fields.clone())
    }
}
