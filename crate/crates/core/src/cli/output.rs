//! CSV tables and SVG plots of a run.

use std::fmt::Write as _;

use crate::error::Result;
use crate::front::{CutKind, FireMap};
use crate::geodesic::GeodesicState;
use crate::geom::{AerialPoint, Vec2};
use crate::metric::FireMetric;
use crate::terrain::{Domain, Terrain};

use super::scenario::IndicatrixSettings;

/// `x` with 9 significant digits, `%.9g` style.
pub fn fmt9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    // the exponent comes from the rounded %e form, so a carry into the next decade counts
    let sci = format!("{:.8e}", x);
    let (mantissa, e) = sci.split_once('e').expect("exponent");
    let e: i32 = e.parse().expect("exponent");
    let trim = |s: &str| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-5..9).contains(&e) {
        let decimals = (8 - e).max(0) as usize;
        trim(&format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim(mantissa), e)
    }
}

/// `t, trajectory_id, seed_param, x, y, z, vx, vy, status` for every trajectory that still
/// has a state at each output time.
pub fn fronts_csv(map: &FireMap, terrain: &Terrain) -> Result<String> {
    let mut out = String::from("t,trajectory_id,seed_param,x,y,z,vx,vy,status\n");
    for snap in &map.snapshots {
        for tr in &map.trajectories {
            let Some(s) = tr.state_at_step(snap.step) else { continue };
            let z = terrain.elevation(s.position())?;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                fmt9(snap.t),
                tr.id,
                fmt9(tr.seed_param),
                fmt9(s.x),
                fmt9(s.y),
                fmt9(z),
                fmt9(s.vx),
                fmt9(s.vy),
                tr.status_at(snap.t).label()
            );
        }
    }
    Ok(out)
}

/// Every integration step of every trajectory: `t, trajectory_id, x, y, z, vx, vy`.
pub fn trajectories_csv(map: &FireMap, terrain: &Terrain) -> Result<String> {
    let mut out = String::from("t,trajectory_id,x,y,z,vx,vy\n");
    for tr in &map.trajectories {
        for s in &tr.history {
            let z = terrain.elevation(s.position())?;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                fmt9(s.t),
                tr.id,
                fmt9(s.x),
                fmt9(s.y),
                fmt9(z),
                fmt9(s.vx),
                fmt9(s.vy)
            );
        }
    }
    Ok(out)
}

/// `t_cut, x, y, kind, ids` with ids joined by `;`, the cut trajectory first.
pub fn cuts_csv(map: &FireMap) -> String {
    let mut out = String::from("t_cut,x,y,kind,ids\n");
    for c in &map.cuts {
        let ids: Vec<String> = c.ids.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt9(c.t_cut),
            fmt9(c.point.x),
            fmt9(c.point.y),
            c.kind.as_str(),
            ids.join(";")
        );
    }
    out
}

/// World-to-viewport affine map with `y` pointing up.
struct View {
    domain: Domain,
    scale: f64,
    width: f64,
    height: f64,
}

const MARGIN: f64 = 20.0;

impl View {
    fn new(domain: Domain, width: f64) -> Self {
        let scale = (width - 2.0 * MARGIN) / domain.width();
        View {
            domain,
            scale,
            width,
            height: domain.height() * scale + 2.0 * MARGIN,
        }
    }

    fn px(&self, p: AerialPoint) -> (f64, f64) {
        (
            MARGIN + (p.x - self.domain.x_min) * self.scale,
            self.height - MARGIN - (p.y - self.domain.y_min) * self.scale,
        )
    }

    fn points(&self, pts: impl IntoIterator<Item = AerialPoint>) -> String {
        let mut s = String::new();
        for p in pts {
            let (x, y) = self.px(p);
            let _ = write!(s, "{x:.2},{y:.2} ");
        }
        s.trim_end().to_string()
    }

    fn open(&self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
            w = self.width,
            h = self.height
        )
    }
}

/// Blue to red as `s` goes from 0 to 1.
fn ramp(s: f64) -> String {
    let s = s.clamp(0.0, 1.0);
    let r = (40.0 + 200.0 * s) as u8;
    let b = (220.0 - 190.0 * s) as u8;
    format!("#{r:02x}30{b:02x}")
}

/// Marching-squares segments of `terrain` at `levels`.
fn contour_segments(terrain: &Terrain, levels: &[f64], n: usize) -> Result<Vec<(AerialPoint, AerialPoint)>> {
    let d = *terrain.domain();
    let node = |i: usize, j: usize| {
        AerialPoint::new(
            d.x_min + d.width() * i as f64 / n as f64,
            d.y_min + d.height() * j as f64 / n as f64,
        )
    };
    let mut z = vec![0.0; (n + 1) * (n + 1)];
    for j in 0..=n {
        for i in 0..=n {
            z[j * (n + 1) + i] = terrain.elevation(node(i, j))?;
        }
    }
    let mut segs = Vec::new();
    for &level in levels {
        for j in 0..n {
            for i in 0..n {
                let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
                let mut hits = Vec::with_capacity(4);
                for k in 0..4 {
                    let (a, b) = (corners[k], corners[(k + 1) % 4]);
                    let (za, zb) = (z[a.1 * (n + 1) + a.0], z[b.1 * (n + 1) + b.0]);
                    if (za < level) != (zb < level) {
                        let s = (level - za) / (zb - za);
                        hits.push(node(a.0, a.1).lerp(node(b.0, b.1), s));
                    }
                }
                // saddle cells pair the crossings in edge order
                for pair in hits.chunks_exact(2) {
                    segs.push((pair[0], pair[1]));
                }
            }
        }
    }
    Ok(segs)
}

/// Fronts coloured by time, bridging segments dashed, trajectories in grey and cut points
/// as markers; optional terrain contours underneath.
pub fn fronts_svg(map: &FireMap, terrain: &Terrain, contours: bool) -> Result<String> {
    let view = View::new(*terrain.domain(), 800.0);
    let mut svg = view.open();
    if contours {
        let d = *terrain.domain();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for j in 0..=32 {
            for i in 0..=32 {
                let p = AerialPoint::new(d.x_min + d.width() * i as f64 / 32.0, d.y_min + d.height() * j as f64 / 32.0);
                let z = terrain.elevation(p)?;
                lo = lo.min(z);
                hi = hi.max(z);
            }
        }
        if hi > lo {
            let levels: Vec<f64> = (1..10).map(|k| lo + (hi - lo) * k as f64 / 10.0).collect();
            svg.push_str("<g stroke=\"#b8a070\" stroke-width=\"0.6\" fill=\"none\">\n");
            for (a, b) in contour_segments(terrain, &levels, 120)? {
                let (x1, y1) = view.px(a);
                let (x2, y2) = view.px(b);
                let _ = writeln!(svg, "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\"/>");
            }
            svg.push_str("</g>\n");
        }
    }

    svg.push_str("<g fill=\"none\" stroke-width=\"0.5\">\n");
    for tr in &map.trajectories {
        let cut = tr.cut_time();
        let (before, after): (Vec<&GeodesicState>, Vec<&GeodesicState>) = tr
            .history
            .iter()
            .partition(|s| cut.map_or(true, |tc| s.t <= tc));
        let _ = writeln!(
            svg,
            "<polyline stroke=\"#888\" points=\"{}\"/>",
            view.points(before.iter().map(|s| s.position()))
        );
        if let (Some(last), false) = (before.last(), after.is_empty()) {
            let pts = std::iter::once(last.position()).chain(after.iter().map(|s| s.position()));
            let _ = writeln!(
                svg,
                "<polyline stroke=\"#ccc\" stroke-dasharray=\"2,2\" points=\"{}\"/>",
                view.points(pts)
            );
        }
    }
    svg.push_str("</g>\n");

    let t_max = map.snapshots.last().map_or(1.0, |s| s.t);
    let t_min = map.t_start;
    svg.push_str("<g fill=\"none\" stroke-width=\"1.5\">\n");
    for snap in &map.snapshots {
        let m = snap.points.len();
        if m < 2 {
            continue;
        }
        let color = ramp((snap.t - t_min) / (t_max - t_min).max(f64::MIN_POSITIVE));
        let edges = if snap.closed { m } else { m - 1 };
        for k in 0..edges {
            let (a, b) = (snap.points[k], snap.points[(k + 1) % m]);
            let (x1, y1) = view.px(a);
            let (x2, y2) = view.px(b);
            let dash = if snap.bridged[k] { " stroke-dasharray=\"4,3\"" } else { "" };
            let _ = writeln!(
                svg,
                "<line stroke=\"{color}\"{dash} x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\"/>"
            );
        }
    }
    svg.push_str("</g>\n");

    svg.push_str("<g stroke=\"black\" stroke-width=\"0.4\">\n");
    for c in &map.cuts {
        let (x, y) = view.px(c.point);
        let fill = match c.kind {
            CutKind::Crossing => "#e03020",
            CutKind::Focal => "#8020c0",
        };
        let _ = writeln!(svg, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"2.5\" fill=\"{fill}\"/>");
    }
    svg.push_str("</g>\n</svg>\n");
    Ok(svg)
}

/// Indicatrices on a lattice of the domain, 256 vertices each.
pub fn indicatrices_svg(metric: &FireMetric, settings: &IndicatrixSettings) -> Result<String> {
    let domain = *metric.terrain().domain();
    let view = View::new(domain, 800.0);
    let (nx, ny) = (settings.nx, settings.ny);
    let centre = |i: usize, n: usize, lo: f64, len: f64| lo + len * (i as f64 + 0.5) / n as f64;
    let mut lattice = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            lattice.push(AerialPoint::new(
                centre(i, nx, domain.x_min, domain.width()),
                centre(j, ny, domain.y_min, domain.height()),
            ));
        }
    }
    let t = settings.t;
    let shapes: Vec<Vec<Vec2>> = lattice
        .iter()
        .map(|&p| {
            (0..256)
                .map(|k| metric.indicatrix_point(t, p, std::f64::consts::TAU * k as f64 / 256.0))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let scale = settings.scale.unwrap_or_else(|| {
        let spacing = (domain.width() / nx as f64).min(domain.height() / ny as f64);
        let reach = shapes.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max);
        0.45 * spacing / reach.max(f64::MIN_POSITIVE)
    });

    let mut svg = view.open();
    svg.push_str("<g fill=\"none\">\n");
    for (p, shape) in lattice.iter().zip(&shapes) {
        let pts = shape.iter().map(|v| *p + *v * scale);
        let _ = writeln!(
            svg,
            "<polygon stroke=\"#c03020\" stroke-width=\"1.2\" points=\"{}\"/>",
            view.points(pts)
        );
        let (cx, cy) = view.px(*p);
        let _ = writeln!(svg, "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"1.5\" fill=\"black\"/>");
        if settings.overlay {
            let local = metric.local(t, *p)?;
            let phi = local.wind.1.atan2(local.wind.0);
            // wind ellipse with a focus at p, and the flame circle
            let ellipse = (0..256).map(|k| {
                let th = std::f64::consts::TAU * k as f64 / 256.0;
                let r = local.a * (1.0 - local.eps * local.eps) / (1.0 - local.eps * (th - phi).cos());
                *p + Vec2::from_angle(th) * (r * scale)
            });
            let circle = (0..256).map(|k| *p + Vec2::from_angle(std::f64::consts::TAU * k as f64 / 256.0) * (local.h * scale));
            let _ = writeln!(
                svg,
                "<polygon stroke=\"#2050c0\" stroke-dasharray=\"4,3\" points=\"{}\"/>",
                view.points(ellipse)
            );
            let _ = writeln!(
                svg,
                "<polygon stroke=\"#208040\" stroke-dasharray=\"2,2\" points=\"{}\"/>",
                view.points(circle)
            );
        }
    }
    svg.push_str("</g>\n</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt9(0.0), "0");
        assert_eq!(fmt9(3.0), "3");
        assert_eq!(fmt9(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt9(-2.0 / 3.0), "-0.666666667");
        assert_eq!(fmt9(6.4), "6.4");
        assert_eq!(fmt9(123456789.4), "123456789");
        assert_eq!(fmt9(1234567891.0), "1.23456789e9");
        assert_eq!(fmt9(1.5e-7), "1.5e-7");
        assert_eq!(fmt9(9.9999999999), "10");
        assert_eq!(fmt9(0.000123456789012), "0.000123456789");
    }
}
