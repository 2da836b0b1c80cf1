//! Command-line front end: `run`, `indicatrix`, `check` and `oracle` over a scenario file.

pub mod output;
pub mod scenario;

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::front::propagate;
use crate::geom::AerialPoint;
use crate::metric::{ConvexityScan, FireMetric, SlopeConvexity};
use crate::oracle::{compare_front, grid_arrival, GridSpec};

pub use scenario::{AuditSettings, Scenario, PRESETS};

#[derive(Debug, Parser)]
#[command(name = "firefront", version, about = "Wildfire fronts as lightlike geodesics of a Finsler spacetime")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Worker threads for trajectory stepping.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Run even if the convexity audit fails.
    #[arg(long, global = true)]
    pub allow_nonconvex: bool,

    /// Do not rescale velocities back onto the indicatrix after each step.
    #[arg(long, global = true)]
    pub no_renormalize: bool,

    /// Override `solver.dt`.
    #[arg(long, global = true)]
    pub dt: Option<f64>,

    /// Override `solver.n`.
    #[arg(long, global = true)]
    pub n: Option<usize>,

    /// Draw terrain contours under the fronts.
    #[arg(long, global = true)]
    pub contours: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Propagate the front and write fronts.csv, trajectories.csv, cuts.csv and fronts.svg.
    Run { config: String },
    /// Draw the indicatrix field to indicatrices.svg.
    Indicatrix { config: String },
    /// Audit strong convexity on a lattice of the domain.
    Check { config: String },
    /// Compare the geodesic fronts with the grid oracle.
    Oracle { config: String },
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONVEXITY: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonConvexMetric { .. } | Error::AmbiguousRoot(_) => EXIT_CONVEXITY,
        Error::Config { .. }
        | Error::Parse(_)
        | Error::Dem { .. }
        | Error::Io(_)
        | Error::TimeDependentMetric(_)
        | Error::DegenerateCurve(_) => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

/// A file path, or the name of a checked-in preset when no such file exists.
pub fn load_scenario(arg: &str) -> Result<Scenario> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(preset) = Scenario::preset(arg) {
            return preset;
        }
    }
    Scenario::load(path)
}

/// Result of one lattice point of the audit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditPoint {
    pub t: f64,
    pub p: AerialPoint,
    /// Closed-form slope condition; only defined without wind.
    pub slope: Option<SlopeConvexity>,
    pub scan: ConvexityScan,
}

impl AuditPoint {
    pub fn pass(&self) -> bool {
        self.scan.pass && self.slope.map_or(true, |s| s.pass)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub directions: usize,
    pub points: Vec<AuditPoint>,
}

impl AuditReport {
    pub fn pass(&self) -> bool {
        self.points.iter().all(AuditPoint::pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AuditPoint> {
        self.points.iter().filter(|p| !p.pass())
    }

    pub fn worst_margin(&self) -> Option<&AuditPoint> {
        self.points
            .iter()
            .filter(|p| p.slope.is_some())
            .min_by(|a, b| a.slope.unwrap().margin.total_cmp(&b.slope.unwrap().margin))
    }

    pub fn worst_eigenvalue(&self) -> Option<&AuditPoint> {
        self.points
            .iter()
            .min_by(|a, b| a.scan.min_eigenvalue.total_cmp(&b.scan.min_eigenvalue))
    }

    pub fn render(&self) -> String {
        let mut s = format!(
            "convexity audit: {} lattice points, {} directions each\n",
            self.points.len(),
            self.directions
        );
        if let Some(w) = self.worst_margin() {
            s += &format!(
                "worst slope margin (a+h)/h' - 2 sin(sigma) = {:.6} at t={} p=({:.4}, {:.4})\n",
                w.slope.unwrap().margin,
                w.t,
                w.p.x,
                w.p.y
            );
        }
        if let Some(w) = self.worst_eigenvalue() {
            s += &format!(
                "smallest tensor eigenvalue {:.6e} at t={} p=({:.4}, {:.4}) theta={:.2} deg\n",
                w.scan.min_eigenvalue,
                w.t,
                w.p.x,
                w.p.y,
                w.scan.worst_theta.to_degrees()
            );
        }
        for f in self.failures() {
            s += &format!("FAIL t={} p=({:.4}, {:.4})", f.t, f.p.x, f.p.y);
            if let Some((a, b)) = f.scan.failing_arc {
                s += &format!(
                    " non-convex directions theta in [{:.2}, {:.2}] deg ({} of {})",
                    a.to_degrees(),
                    b.to_degrees(),
                    f.scan.failing,
                    self.directions
                );
            }
            if let Some(m) = f.slope.filter(|m| !m.pass) {
                s += &format!(" slope margin {:.6}", m.margin);
            }
            s.push('\n');
        }
        s += if self.pass() { "result: pass\n" } else { "result: FAIL\n" };
        s
    }
}

/// Slope condition (where there is no wind) and numeric tensor scan at every lattice point.
pub fn audit(metric: &FireMetric, settings: &AuditSettings) -> Result<AuditReport> {
    let d = *metric.terrain().domain();
    let mut points = Vec::new();
    for &t in &settings.times {
        for j in 0..settings.ny {
            for i in 0..settings.nx {
                let p = AerialPoint::new(
                    d.x_min + d.width() * (i as f64 + 0.5) / settings.nx as f64,
                    d.y_min + d.height() * (j as f64 + 0.5) / settings.ny as f64,
                );
                let slope = match metric.convexity_check_slope(t, p) {
                    Ok(s) => Some(s),
                    Err(Error::NotApplicable(_)) => None,
                    Err(e) => return Err(e),
                };
                let scan = metric.convexity_scan_numeric(t, p, settings.directions)?;
                points.push(AuditPoint { t, p, slope, scan });
            }
        }
    }
    Ok(AuditReport {
        directions: settings.directions,
        points,
    })
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)?;
    Ok(())
}

fn scenario_with_overrides(cli: &Cli, config: &str) -> Result<Scenario> {
    let mut s = load_scenario(config)?;
    if let Some(dt) = cli.dt {
        s.solver.dt = dt;
    }
    if let Some(n) = cli.n {
        s.solver.n_trajectories = n;
    }
    if cli.no_renormalize {
        s.solver.renormalize = false;
    }
    s.validate()?;
    Ok(s)
}

/// Runs one command, writing human-readable output to `out`; returns the exit code.
pub fn execute(cli: &Cli, out: &mut dyn std::io::Write) -> Result<i32> {
    match &cli.command {
        Command::Run { config } => {
            let s = scenario_with_overrides(cli, config)?;
            let metric = s.metric();
            if !cli.allow_nonconvex {
                let report = audit(&metric, &s.audit)?;
                if !report.pass() {
                    write!(out, "{}", report.render())?;
                    writeln!(out, "aborting: metric is not strongly convex (use --allow-nonconvex to override)")?;
                    return Ok(EXIT_CONVEXITY);
                }
            }
            let map = propagate(&metric, &s.ignition, &s.solver)?;
            write_file(&cli.out, "fronts.csv", &output::fronts_csv(&map, &s.terrain)?)?;
            write_file(&cli.out, "trajectories.csv", &output::trajectories_csv(&map, &s.terrain)?)?;
            write_file(&cli.out, "cuts.csv", &output::cuts_csv(&map))?;
            write_file(&cli.out, "fronts.svg", &output::fronts_svg(&map, &s.terrain, cli.contours)?)?;
            writeln!(out, "{}: {} trajectories, {} output times, {} cut records", s.name, map.trajectories.len(), map.snapshots.len(), map.cuts.len())?;
            for snap in &map.snapshots {
                writeln!(
                    out,
                    "  t={:<8} live={:<4} burned area={:.6}",
                    output::fmt9(snap.t),
                    snap.ids.len(),
                    snap.burned_area
                )?;
            }
            writeln!(out, "wrote fronts.csv, trajectories.csv, cuts.csv, fronts.svg to {}", cli.out.display())?;
            Ok(EXIT_OK)
        }
        Command::Indicatrix { config } => {
            let s = scenario_with_overrides(cli, config)?;
            let svg = output::indicatrices_svg(&s.metric(), &s.indicatrix)?;
            write_file(&cli.out, "indicatrices.svg", &svg)?;
            writeln!(out, "wrote indicatrices.svg to {}", cli.out.display())?;
            Ok(EXIT_OK)
        }
        Command::Check { config } => {
            let s = scenario_with_overrides(cli, config)?;
            let report = audit(&s.metric(), &s.audit)?;
            write!(out, "{}", report.render())?;
            Ok(if report.pass() { EXIT_OK } else { EXIT_CONVEXITY })
        }
        Command::Oracle { config } => {
            let s = scenario_with_overrides(cli, config)?;
            let metric = s.metric();
            let spec = GridSpec::covering(metric.terrain().domain(), s.oracle.nx);
            let grid = grid_arrival(&metric, &s.ignition, &spec, s.oracle.radius, s.solver.t_end)?;
            let map = propagate(&metric, &s.ignition, &s.solver)?;
            write_file(&cli.out, "arrival.asc", &grid.to_dem_string())?;
            writeln!(
                out,
                "oracle: {}x{} nodes, stencil radius {}; relative deviation |arrival - t| / t",
                spec.nx, spec.ny, s.oracle.radius
            )?;
            for snap in map.snapshots.iter().skip(1) {
                match compare_front(&grid, &map, snap.t) {
                    Ok(c) => writeln!(
                        out,
                        "  t={:<8} vertices={:<4} skipped={:<3} median={:.4} p95={:.4} max={:.4}",
                        output::fmt9(c.t),
                        c.samples,
                        c.skipped,
                        c.median,
                        c.p95,
                        c.max
                    )?,
                    Err(Error::EmptyFront(_)) => writeln!(out, "  t={:<8} no live front", output::fmt9(snap.t))?,
                    Err(e) => return Err(e),
                }
            }
            writeln!(out, "wrote arrival.asc to {}", cli.out.display())?;
            Ok(EXIT_OK)
        }
    }
}

/// Entry point used by the binary: sets up threads, runs, reports errors on stderr.
pub fn main_with(cli: Cli) -> i32 {
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not set thread count: {e}");
        }
    }
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(&cli, &mut lock) {
        Ok(code) => code,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
