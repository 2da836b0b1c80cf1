//! The burning surface as a graph `(x, y) ↦ (x, y, z(x, y))` over a rectangular aerial domain.
//!
//! Everything the metric needs from the ground is the elevation gradient; the slope angle,
//! slant angle and unit surface directions are derived from it here.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{AerialPoint, Vec2};

/// Axis-aligned rectangle in aerial coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Domain {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Domain {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    /// Largest side, used to scale finite-difference steps and tolerances.
    pub fn scale(&self) -> f64 {
        self.width().max(self.height())
    }

    pub fn contains(&self, p: AerialPoint) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    /// Distance from an interior point to the nearest side.
    pub fn distance_to_boundary(&self, p: AerialPoint) -> f64 {
        (p.x - self.x_min)
            .min(self.x_max - p.x)
            .min(p.y - self.y_min)
            .min(self.y_max - p.y)
    }
}

/// One Gaussian bump `A·exp(−(x−cx)²/(2wx²) − (y−cy)²/(2wy²))`. An infinite width removes the
/// dependence on that axis (a ridge).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBump {
    pub amplitude: f64,
    pub center: Vec2,
    pub width: Vec2,
}

impl GaussianBump {
    fn inv_sq(w: f64) -> f64 {
        if w.is_infinite() {
            0.0
        } else {
            1.0 / (w * w)
        }
    }

    fn eval(&self, p: AerialPoint) -> (f64, Vec2) {
        let kx = Self::inv_sq(self.width.x);
        let ky = Self::inv_sq(self.width.y);
        let dx = p.x - self.center.x;
        let dy = p.y - self.center.y;
        let z = self.amplitude * (-0.5 * (dx * dx * kx + dy * dy * ky)).exp();
        (z, Vec2::new(-z * dx * kx, -z * dy * ky))
    }
}

/// Height grid on cell centres, row 0 southernmost.
#[derive(Debug, Clone, PartialEq)]
pub struct DemGrid {
    pub ncols: usize,
    pub nrows: usize,
    pub xll: f64,
    pub yll: f64,
    pub cellsize: f64,
    heights: Vec<f64>,
}

impl DemGrid {
    /// `heights` is row-major with the first row southernmost.
    pub fn new(
        ncols: usize,
        nrows: usize,
        xll: f64,
        yll: f64,
        cellsize: f64,
        heights: Vec<f64>,
    ) -> Result<Self> {
        if ncols < 2 || nrows < 2 {
            return Err(Error::Dem {
                line: 0,
                message: "grid needs at least 2x2 cells".into(),
            });
        }
        if !(cellsize > 0.0) {
            return Err(Error::Dem {
                line: 0,
                message: "cellsize must be positive".into(),
            });
        }
        if heights.len() != ncols * nrows {
            return Err(Error::Dem {
                line: 0,
                message: format!("expected {} heights, got {}", ncols * nrows, heights.len()),
            });
        }
        Ok(DemGrid {
            ncols,
            nrows,
            xll,
            yll,
            cellsize,
            heights,
        })
    }

    /// Samples `f` at the cell centres of the given grid geometry.
    pub fn sample(
        ncols: usize,
        nrows: usize,
        xll: f64,
        yll: f64,
        cellsize: f64,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let mut heights = Vec::with_capacity(ncols * nrows);
        for j in 0..nrows {
            for i in 0..ncols {
                let x = xll + (i as f64 + 0.5) * cellsize;
                let y = yll + (j as f64 + 0.5) * cellsize;
                heights.push(f(x, y));
            }
        }
        DemGrid::new(ncols, nrows, xll, yll, cellsize, heights)
    }

    pub fn height(&self, i: usize, j: usize) -> f64 {
        self.heights[j * self.ncols + i]
    }

    /// Extent covered by cell centres.
    pub fn extent(&self) -> Domain {
        let h = 0.5 * self.cellsize;
        Domain::new(
            self.xll + h,
            self.xll + h + (self.ncols - 1) as f64 * self.cellsize,
            self.yll + h,
            self.yll + h + (self.nrows - 1) as f64 * self.cellsize,
        )
    }

    /// Height with linear extrapolation one cell past each edge, so that the Catmull–Rom
    /// stencil reproduces planes exactly up to the boundary.
    fn ghost_height(&self, i: isize, j: isize) -> f64 {
        let (ni, nj) = (self.ncols as isize, self.nrows as isize);
        let clamp_axis = |k: isize, n: isize| -> (usize, usize, f64) {
            if k < 0 {
                (0, 1, k as f64)
            } else if k >= n {
                ((n - 1) as usize, (n - 2) as usize, (k - n + 1) as f64)
            } else {
                (k as usize, k as usize, 0.0)
            }
        };
        let (i0, i1, si) = clamp_axis(i, ni);
        let (j0, j1, sj) = clamp_axis(j, nj);
        // h(edge) + s * (h(edge) - h(inner)) along each axis
        let base = self.height(i0, j0);
        let dx = if si != 0.0 {
            si.abs() * (base - self.height(i1, j0))
        } else {
            0.0
        };
        let dy = if sj != 0.0 {
            sj.abs() * (base - self.height(i0, j1))
        } else {
            0.0
        };
        base + dx + dy
    }

    /// Catmull–Rom bicubic value and analytic gradient.
    fn interpolate(&self, p: AerialPoint) -> (f64, Vec2) {
        let gx = (p.x - self.xll) / self.cellsize - 0.5;
        let gy = (p.y - self.yll) / self.cellsize - 0.5;
        let i = (gx.floor() as isize).clamp(0, self.ncols as isize - 2);
        let j = (gy.floor() as isize).clamp(0, self.nrows as isize - 2);
        let u = gx - i as f64;
        let v = gy - j as f64;
        let (wu, du) = catmull_rom_weights(u);
        let (wv, dv) = catmull_rom_weights(v);
        let mut z = 0.0;
        let mut zx = 0.0;
        let mut zy = 0.0;
        for (b, (&wvb, &dvb)) in wv.iter().zip(dv.iter()).enumerate() {
            for (a, (&wua, &dua)) in wu.iter().zip(du.iter()).enumerate() {
                let h = self.ghost_height(i - 1 + a as isize, j - 1 + b as isize);
                z += wua * wvb * h;
                zx += dua * wvb * h;
                zy += wua * dvb * h;
            }
        }
        (z, Vec2::new(zx / self.cellsize, zy / self.cellsize))
    }

    /// Reads an ESRI ASCII grid (no NODATA support).
    pub fn parse(text: &str) -> Result<Self> {
        let mut header = [None::<f64>; 5];
        const KEYS: [&str; 5] = ["ncols", "nrows", "xllcorner", "yllcorner", "cellsize"];
        let mut lines = text.lines().enumerate().peekable();
        while let Some(&(lineno, line)) = lines.peek() {
            let mut parts = line.split_whitespace();
            let Some(key) = parts.next() else {
                lines.next();
                continue;
            };
            let key = key.to_ascii_lowercase();
            if key == "nodata_value" {
                return Err(Error::Dem {
                    line: lineno + 1,
                    message: "NODATA_value is not supported".into(),
                });
            }
            let Some(slot) = KEYS.iter().position(|k| *k == key) else {
                break;
            };
            let value: f64 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Dem {
                    line: lineno + 1,
                    message: format!("missing or invalid value for `{key}`"),
                })?;
            header[slot] = Some(value);
            lines.next();
        }
        let get = |k: usize| {
            header[k].ok_or_else(|| Error::Dem {
                line: 0,
                message: format!("missing header `{}`", KEYS[k]),
            })
        };
        let ncols = get(0)? as usize;
        let nrows = get(1)? as usize;
        let (xll, yll, cellsize) = (get(2)?, get(3)?, get(4)?);

        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(nrows);
        for (lineno, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split_whitespace().map(str::parse::<f64>).collect();
            let row = row.map_err(|e| Error::Dem {
                line: lineno + 1,
                message: e.to_string(),
            })?;
            if row.len() != ncols {
                return Err(Error::Dem {
                    line: lineno + 1,
                    message: format!("expected {ncols} values, got {}", row.len()),
                });
            }
            rows.push(row);
        }
        if rows.len() != nrows {
            return Err(Error::Dem {
                line: 0,
                message: format!("expected {nrows} rows, got {}", rows.len()),
            });
        }
        // file order is north to south
        let heights = rows.into_iter().rev().flatten().collect();
        DemGrid::new(ncols, nrows, xll, yll, cellsize, heights)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }
}

/// Catmull–Rom weights and their derivatives at parameter `u ∈ [0, 1]` for nodes −1, 0, 1, 2.
fn catmull_rom_weights(u: f64) -> ([f64; 4], [f64; 4]) {
    let u2 = u * u;
    let u3 = u2 * u;
    let w = [
        0.5 * (-u3 + 2.0 * u2 - u),
        0.5 * (3.0 * u3 - 5.0 * u2 + 2.0),
        0.5 * (-3.0 * u3 + 4.0 * u2 + u),
        0.5 * (u3 - u2),
    ];
    let d = [
        0.5 * (-3.0 * u2 + 4.0 * u - 1.0),
        0.5 * (9.0 * u2 - 10.0 * u),
        0.5 * (-9.0 * u2 + 8.0 * u + 1.0),
        0.5 * (3.0 * u2 - 2.0 * u),
    ];
    (w, d)
}

#[derive(Debug, Clone, PartialEq)]
pub enum TerrainKind {
    /// `z = gx·x + gy·y`
    Plane { gx: f64, gy: f64 },
    GaussianSum(Vec<GaussianBump>),
    Grid(DemGrid),
}

/// Image of `dẑ`: a vector of ℝ³ tangent to the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceVector(pub [f64; 3]);

impl SurfaceVector {
    pub fn norm(&self) -> f64 {
        let [a, b, c] = self.0;
        (a * a + b * b + c * c).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Terrain {
    kind: TerrainKind,
    domain: Domain,
}

impl Terrain {
    /// For grids the domain is clipped to the extent of the cell centres.
    pub fn new(kind: TerrainKind, domain: Domain) -> Self {
        let domain = match &kind {
            TerrainKind::Grid(g) => {
                let e = g.extent();
                Domain::new(
                    domain.x_min.max(e.x_min),
                    domain.x_max.min(e.x_max),
                    domain.y_min.max(e.y_min),
                    domain.y_max.min(e.y_max),
                )
            }
            _ => domain,
        };
        Terrain { kind, domain }
    }

    pub fn flat(domain: Domain) -> Self {
        Terrain::new(TerrainKind::Plane { gx: 0.0, gy: 0.0 }, domain)
    }

    pub fn kind(&self) -> &TerrainKind {
        &self.kind
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Width of the band along the boundary where trajectories are retired.
    pub fn boundary_band(&self) -> f64 {
        match &self.kind {
            TerrainKind::Grid(g) => g.cellsize,
            _ => 1e-3 * self.domain.width().max(self.domain.height()),
        }
    }

    fn check(&self, p: AerialPoint) -> Result<()> {
        if self.domain.contains(p) {
            Ok(())
        } else {
            Err(Error::OutOfDomain { x: p.x, y: p.y })
        }
    }

    fn eval(&self, p: AerialPoint) -> (f64, Vec2) {
        match &self.kind {
            TerrainKind::Plane { gx, gy } => (gx * p.x + gy * p.y, Vec2::new(*gx, *gy)),
            TerrainKind::GaussianSum(bumps) => {
                bumps.iter().fold((0.0, Vec2::ZERO), |(z, g), b| {
                    let (bz, bg) = b.eval(p);
                    (z + bz, g + bg)
                })
            }
            TerrainKind::Grid(grid) => grid.interpolate(p),
        }
    }

    pub fn elevation(&self, p: AerialPoint) -> Result<f64> {
        self.check(p)?;
        Ok(self.eval(p).0)
    }

    /// `(∂ₓz, ∂ᵧz)`
    pub fn gradient(&self, p: AerialPoint) -> Result<Vec2> {
        self.check(p)?;
        Ok(self.eval(p).1)
    }

    /// Inclination σ of the tangent plane, `cos σ = 1/√(1 + |∇z|²)`.
    pub fn slant_angle(&self, p: AerialPoint) -> Result<f64> {
        let g = self.gradient(p)?;
        Ok((1.0 / (1.0 + g.norm_sq()).sqrt()).acos())
    }

    /// Angle δ between the vertical axis and the surface direction over aerial angle `theta`.
    pub fn slope_angle(&self, p: AerialPoint, theta: f64) -> Result<f64> {
        let g = self.gradient(p)?;
        let dz = g.dot(Vec2::from_angle(theta));
        // cos δ = dz/√(1+dz²); atan2 keeps full precision near 0 and π
        Ok(FRAC_PI_2 - dz.atan())
    }

    /// `dẑ_p(v) = (v₁, v₂, dz_p(v))`
    pub fn lift(&self, p: AerialPoint, v: Vec2) -> Result<SurfaceVector> {
        let g = self.gradient(p)?;
        Ok(SurfaceVector([v.x, v.y, g.dot(v)]))
    }

    /// Unit surface vector `u_θ` over the aerial direction `theta`.
    pub fn surface_unit_dir(&self, p: AerialPoint, theta: f64) -> Result<SurfaceVector> {
        let SurfaceVector(w) = self.lift(p, Vec2::from_angle(theta))?;
        let n = (1.0 + w[2] * w[2]).sqrt();
        Ok(SurfaceVector([w[0] / n, w[1] / n, w[2] / n]))
    }
}

impl fmt::Display for Terrain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            TerrainKind::Plane { gx, gy } => write!(f, "plane z = {gx}·x + {gy}·y"),
            TerrainKind::GaussianSum(b) => write!(f, "sum of {} gaussian bumps", b.len()),
            TerrainKind::Grid(g) => write!(f, "{}x{} grid, cellsize {}", g.ncols, g.nrows, g.cellsize),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn big() -> Domain {
        Domain::new(-10.0, 10.0, -10.0, 10.0)
    }

    fn hill() -> Terrain {
        Terrain::new(
            TerrainKind::GaussianSum(vec![GaussianBump {
                amplitude: 3.0,
                center: Vec2::ZERO,
                width: Vec2::new(1.0, 1.0),
            }]),
            big(),
        )
    }

    fn plane_dem() -> Terrain {
        let g = DemGrid::sample(201, 201, -0.05, -0.05, 0.05, |x, _| x / 2.0).unwrap();
        Terrain::new(TerrainKind::Grid(g), big())
    }

    #[test]
    fn plane_elevation() {
        let t = Terrain::new(TerrainKind::Plane { gx: 0.5, gy: 0.0 }, big());
        assert_eq!(t.elevation(Vec2::new(2.0, 5.0)).unwrap(), 1.0);
    }

    #[test]
    fn gaussian_peak() {
        let t = hill();
        assert_eq!(t.elevation(Vec2::ZERO).unwrap(), 3.0);
        assert_eq!(t.gradient(Vec2::ZERO).unwrap(), Vec2::ZERO);
    }

    #[test]
    fn ridge_with_infinite_width() {
        let t = Terrain::new(
            TerrainKind::GaussianSum(vec![GaussianBump {
                amplitude: 1.0,
                center: Vec2::ZERO,
                width: Vec2::new(5f64.sqrt(), f64::INFINITY),
            }]),
            big(),
        );
        let p = Vec2::new(1.3, 7.0);
        let z = t.elevation(p).unwrap();
        assert!((z - (-1.3f64 * 1.3 / 10.0).exp()).abs() < 1e-15);
        assert_eq!(t.gradient(p).unwrap().y, 0.0);
    }

    #[test]
    fn out_of_domain() {
        let t = hill();
        assert!(matches!(
            t.elevation(Vec2::new(11.0, 0.0)),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn dem_reproduces_plane() {
        let t = plane_dem();
        let p = Vec2::new(2.0, 5.0);
        assert!((t.elevation(p).unwrap() - 1.0).abs() < 1e-6);
        let g = t.gradient(p).unwrap();
        assert!((g.x - 0.5).abs() < 1e-6 && g.y.abs() < 1e-6);
        // near the edge the ghost cells keep the plane exact
        let e = t.domain().x_min + 0.01;
        let g = t.gradient(Vec2::new(e, 3.0)).unwrap();
        assert!((g.x - 0.5).abs() < 1e-9);
    }

    #[test]
    fn slant_angles() {
        let t = Terrain::new(TerrainKind::Plane { gx: 3f64.sqrt(), gy: 0.0 }, big());
        assert!((t.slant_angle(Vec2::ZERO).unwrap() - PI / 3.0).abs() < 1e-12);
        let t = Terrain::new(TerrainKind::Plane { gx: 1.0, gy: 0.0 }, big());
        assert!((t.slant_angle(Vec2::ZERO).unwrap() - PI / 4.0).abs() < 1e-12);
        assert_eq!(Terrain::flat(big()).slant_angle(Vec2::ZERO).unwrap(), 0.0);
    }

    #[test]
    fn slope_angles() {
        let flat = Terrain::flat(big());
        assert!((flat.slope_angle(Vec2::ZERO, 1.0).unwrap() - PI / 2.0).abs() < 1e-15);
        let t = Terrain::new(TerrainKind::Plane { gx: 3f64.sqrt(), gy: 0.0 }, big());
        assert!((t.slope_angle(Vec2::ZERO, 0.0).unwrap() - PI / 6.0).abs() < 1e-12);
        assert!((t.slope_angle(Vec2::ZERO, PI).unwrap() - 5.0 * PI / 6.0).abs() < 1e-12);
    }

    #[test]
    fn unit_directions() {
        let flat = Terrain::flat(big());
        assert_eq!(flat.surface_unit_dir(Vec2::ZERO, 0.0).unwrap().0, [1.0, 0.0, 0.0]);
        let t = Terrain::new(TerrainKind::Plane { gx: 3f64.sqrt(), gy: 0.0 }, big());
        let u = t.surface_unit_dir(Vec2::ZERO, 0.0).unwrap().0;
        assert!((u[0] - 0.5).abs() < 1e-15 && u[1] == 0.0 && (u[2] - 3f64.sqrt() / 2.0).abs() < 1e-15);
        let u = t.surface_unit_dir(Vec2::ZERO, PI / 2.0).unwrap().0;
        assert!(u[0].abs() < 1e-16 && (u[1] - 1.0).abs() < 1e-15 && u[2].abs() < 1e-15);
    }

    #[test]
    fn parse_dem_text() {
        let text = "ncols 3\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3\n4 5 6\n";
        let g = DemGrid::parse(text).unwrap();
        // first file row is the northern one
        assert_eq!(g.height(0, 1), 1.0);
        assert_eq!(g.height(2, 0), 6.0);
        let bad = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 2\n3 4\n";
        assert!(matches!(DemGrid::parse(bad), Err(Error::Dem { .. })));
        let short = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n";
        assert!(DemGrid::parse(short).is_err());
    }
}
