//! Command-line front end: rigidity reports, deformation tracking, edge
//! contraction, planar projection, and SVG rendering.
//!
//! Exit codes: 0 success, 2 input error, 3 truncated path, 4 semantic error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use motionforge::catalog;
use motionforge::flex::{find_unblocked_flex, select_flex};
use motionforge::io;
use motionforge::rigidity::second_order_verdict;
use motionforge::svg::{render_frame, SvgOptions};
use motionforge::tracking::StickyCallback;
use motionforge::{analyze, analyze_at, track_path, Error, Result, TrackerConfig};

const EXIT_INPUT: i32 = 2;
const EXIT_TRUNCATED: i32 = 3;
const EXIT_SEMANTIC: i32 = 4;

#[derive(Parser)]
#[command(
    name = "motionforge",
    version,
    about = "Rigidity analysis and deformation paths for quadratic geometric constraint systems",
    max_term_width = 100
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report rank, flex and stress dimensions, and a second-order verdict
    Analyze {
        #[command(flatten)]
        source: Source,
        /// Write the JSON report here instead of stdout
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
        /// Seed for the second-order witness search
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random restarts in the second-order witness search
        #[arg(long, default_value_t = 16)]
        restarts: usize,
        /// Singular-value threshold for rank decisions
        #[arg(long, value_name = "F")]
        rank_tol: Option<f64>,
    },
    /// Track a deformation path along a nontrivial flex
    Deform {
        #[command(flatten)]
        source: Source,
        /// Write the trajectory JSON here instead of stdout
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
        /// Also write the trajectory as CSV
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
        /// Number of tracking steps
        #[arg(long, default_value_t = 30)]
        steps: usize,
        /// Target arc length per step
        #[arg(long, default_value_t = 0.01)]
        step_size: f64,
        /// `auto` or comma-separated coefficients over the nontrivial flex basis
        #[arg(long, default_value = "auto", value_parser = parse_flex, allow_hyphen_values = true)]
        flex: FlexSpec,
        /// Seed for flex selection and randomized tracking
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Restarts when searching for an unblocked flex
        #[arg(long, default_value_t = 16)]
        restarts: usize,
        #[command(flatten)]
        tracker: TrackerArgs,
    },
    /// Contract one distance edge to a fraction of its current length
    Contract {
        #[command(flatten)]
        source: Source,
        /// Write the trajectory JSON here instead of stdout
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
        /// Also write the trajectory as CSV
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
        /// Edge to contract, as a 1-based vertex pair
        #[arg(long, value_name = "U,V", value_parser = parse_edge)]
        edge: EdgeArg,
        /// Final edge length as a fraction of the starting length
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
        /// Number of interpolation steps
        #[arg(long, default_value_t = 20)]
        steps: usize,
        #[command(flatten)]
        tracker: TrackerArgs,
    },
    /// Project trajectory frames to the plane with a seeded orthogonal map
    Project {
        /// Trajectory JSON produced by `deform` or `contract`
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Write the CSV here instead of stdout
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
        /// Projection seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Draw trajectory frames as SVG files
    Render {
        /// Trajectory JSON produced by `deform` or `contract`
        #[arg(
            long,
            value_name = "FILE",
            required_unless_present = "builtin",
            conflicts_with = "builtin"
        )]
        input: Option<PathBuf>,
        /// Render a built-in system's starting frame instead
        #[arg(long, value_name = "NAME")]
        builtin: Option<String>,
        /// Comma-separated 0-based frame indices; an empty list renders nothing
        #[arg(long, default_value = "0", value_parser = parse_frames)]
        frames: FrameList,
        /// Output SVG path; several frames get _NNNN suffixes before the extension
        #[arg(long, value_name = "FILE", default_value = "frame.svg")]
        output: PathBuf,
        /// Canvas size
        #[arg(long, value_name = "WxH", default_value = "800x600", value_parser = parse_size)]
        svg_size: SvgSize,
        /// Draw infinitesimal-flex arrows
        #[arg(long)]
        flexes: bool,
        /// Draw disks of this world-space radius instead of vertex dots
        #[arg(long, value_name = "F")]
        disk_radius: Option<f64>,
        /// Singular-value threshold when computing flex arrows
        #[arg(long, value_name = "F")]
        rank_tol: Option<f64>,
    },
    /// List built-in example systems
    Catalog,
}

/// Where the constraint system comes from.
#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Built-in example system (list them with `catalog`)
    #[arg(long, value_name = "NAME")]
    builtin: Option<String>,
    /// System JSON file
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
}

impl Source {
    fn load(&self) -> Result<motionforge::ConstraintSystem> {
        match (&self.builtin, &self.input) {
            (Some(name), _) => catalog::builtin(name),
            (_, Some(path)) => io::load_system(path),
            _ => unreachable!("clap enforces the source group"),
        }
    }

    fn packing(&self) -> Option<catalog::PackingSpec> {
        self.builtin.as_deref().and_then(catalog::builtin_packing)
    }
}

/// Tracker overrides; unset flags keep the defaults.
#[derive(Args)]
struct TrackerArgs {
    /// Corrector convergence tolerance
    #[arg(long, value_name = "F")]
    corrector_tol: Option<f64>,
    /// Newton iteration cap per corrector call
    #[arg(long, value_name = "N")]
    max_newton_iters: Option<usize>,
    /// Armijo backtracking shrink factor
    #[arg(long, value_name = "F")]
    armijo_shrink: Option<f64>,
    /// Armijo sufficient-decrease slope
    #[arg(long, value_name = "F")]
    armijo_slope: Option<f64>,
    /// Initial homotopy step
    #[arg(long, value_name = "F")]
    t_step_init: Option<f64>,
    /// Homotopy step underflow threshold
    #[arg(long, value_name = "F")]
    t_step_min: Option<f64>,
    /// Homotopy step growth factor
    #[arg(long, value_name = "F")]
    t_step_grow: Option<f64>,
    /// Homotopy step shrink factor
    #[arg(long, value_name = "F")]
    t_step_shrink: Option<f64>,
    /// Corrector failures tolerated per retraction
    #[arg(long, value_name = "N")]
    max_corrector_failures: Option<usize>,
    /// Singular-value threshold for rank decisions
    #[arg(long, value_name = "F")]
    rank_tol: Option<f64>,
}

impl TrackerArgs {
    fn config(&self) -> TrackerConfig {
        let mut c = TrackerConfig::default();
        if let Some(v) = self.corrector_tol {
            c.corrector_tol = v;
        }
        if let Some(v) = self.max_newton_iters {
            c.max_newton_iters = v;
        }
        if let Some(v) = self.armijo_shrink {
            c.armijo_shrink = v;
        }
        if let Some(v) = self.armijo_slope {
            c.armijo_slope = v;
        }
        if let Some(v) = self.t_step_init {
            c.t_step_init = v;
        }
        if let Some(v) = self.t_step_min {
            c.t_step_min = v;
        }
        if let Some(v) = self.t_step_grow {
            c.t_step_grow = v;
        }
        if let Some(v) = self.t_step_shrink {
            c.t_step_shrink = v;
        }
        if let Some(v) = self.max_corrector_failures {
            c.max_corrector_failures = v;
        }
        if let Some(v) = self.rank_tol {
            c.rank_tol = v;
        }
        c
    }
}

#[derive(Clone)]
enum FlexSpec {
    Auto,
    Coefficients(Vec<f64>),
}

fn parse_flex(s: &str) -> std::result::Result<FlexSpec, String> {
    if s == "auto" {
        return Ok(FlexSpec::Auto);
    }
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad flex coefficient `{tok}`"))
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(FlexSpec::Coefficients)
}

#[derive(Clone, Copy)]
struct EdgeArg(usize, usize);

fn parse_edge(s: &str) -> std::result::Result<EdgeArg, String> {
    let Some((u, v)) = s.split_once(',') else {
        return Err("expected two comma-separated vertex numbers, e.g. 1,4".into());
    };
    let u: usize = u.trim().parse().map_err(|_| format!("bad vertex `{u}`"))?;
    let v: usize = v.trim().parse().map_err(|_| format!("bad vertex `{v}`"))?;
    if u == 0 || v == 0 {
        return Err("vertex numbers are 1-based".into());
    }
    Ok(EdgeArg(u, v))
}

#[derive(Clone, Copy)]
struct SvgSize(u32, u32);

fn parse_size(s: &str) -> std::result::Result<SvgSize, String> {
    let Some((w, h)) = s.split_once(['x', 'X']) else {
        return Err("expected WIDTHxHEIGHT, e.g. 800x600".into());
    };
    let w: u32 = w.trim().parse().map_err(|_| format!("bad width `{w}`"))?;
    let h: u32 = h.trim().parse().map_err(|_| format!("bad height `{h}`"))?;
    if w == 0 || h == 0 {
        return Err("canvas size must be positive".into());
    }
    Ok(SvgSize(w, h))
}

#[derive(Clone)]
struct FrameList(Vec<usize>);

fn parse_frames(s: &str) -> std::result::Result<FrameList, String> {
    if s.trim().is_empty() {
        return Ok(FrameList(Vec::new()));
    }
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|_| format!("bad frame index `{tok}`"))
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(FrameList)
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MOTIONFORGE_LOG", "error"))
        .format_timestamp(None)
        .init();

    let cli = Cli::parse();
    let code = match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Io(_) | Error::Json(_) | Error::UnknownBuiltin(_) => EXIT_INPUT,
                _ => EXIT_SEMANTIC,
            }
        }
    };
    process::exit(code);
}

fn run(command: Command) -> Result<i32> {
    match command {
        Command::Analyze {
            source,
            output,
            seed,
            restarts,
            rank_tol,
        } => cmd_analyze(&source, output.as_deref(), seed, restarts, rank_tol),
        Command::Deform {
            source,
            output,
            csv,
            steps,
            step_size,
            flex,
            seed,
            restarts,
            tracker,
        } => cmd_deform(
            &source,
            output.as_deref(),
            csv.as_deref(),
            steps,
            step_size,
            &flex,
            seed,
            restarts,
            &tracker,
        ),
        Command::Contract {
            source,
            output,
            csv,
            edge,
            gamma,
            steps,
            tracker,
        } => cmd_contract(
            &source,
            output.as_deref(),
            csv.as_deref(),
            edge,
            gamma,
            steps,
            &tracker,
        ),
        Command::Project {
            input,
            output,
            seed,
        } => cmd_project(&input, output.as_deref(), seed),
        Command::Render {
            input,
            builtin,
            frames,
            output,
            svg_size,
            flexes,
            disk_radius,
            rank_tol,
        } => cmd_render(
            input.as_deref(),
            builtin.as_deref(),
            &frames,
            &output,
            svg_size,
            flexes,
            disk_radius,
            rank_tol,
        ),
        Command::Catalog => cmd_catalog(),
    }
}

fn cmd_analyze(
    source: &Source,
    output: Option<&Path>,
    seed: u64,
    restarts: usize,
    rank_tol: Option<f64>,
) -> Result<i32> {
    let system = source.load()?;
    let report = analyze(&system, rank_tol);
    let verdict = second_order_verdict(&system, &report, restarts, seed);
    let json = io::report_to_json(&report, Some(&verdict));
    emit(output, &pretty(&json)?)?;
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_deform(
    source: &Source,
    output: Option<&Path>,
    csv: Option<&Path>,
    steps: usize,
    step_size: f64,
    flex: &FlexSpec,
    seed: u64,
    restarts: usize,
    tracker: &TrackerArgs,
) -> Result<i32> {
    let system = source.load()?;
    let config = tracker.config();
    let report = analyze(&system, tracker.rank_tol);

    let choice = match flex {
        FlexSpec::Auto => match find_unblocked_flex(&system, &report, restarts, seed)? {
            Some(c) => c,
            None => {
                if report.nontrivial_dim() == 0 {
                    eprintln!("error: no nontrivial flex");
                } else {
                    eprintln!("error: every nontrivial flex is blocked at second order");
                }
                return Ok(EXIT_SEMANTIC);
            }
        },
        FlexSpec::Coefficients(c) => select_flex(&report, c)?,
    };
    log::info!(
        "tracking {steps} steps of {step_size} through a {}-dimensional flex space",
        report.nontrivial_dim()
    );

    let packing = source.packing();
    let mut cb;
    let sticky: Option<&mut StickyCallback> = match packing.as_ref() {
        Some(spec) => {
            cb = catalog::sticky_callback(spec);
            Some(&mut cb)
        }
        None => None,
    };
    let path = track_path(&system, &choice.flex, steps, step_size, &config, seed, sticky);
    log::info!("tracked {} frames, {} events", path.len(), path.events.len());

    let traj = io::trajectory_to_json(&system, &path);
    emit(output, &pretty(&traj)?)?;
    if let Some(p) = csv {
        fs::write(p, io::trajectory_csv(&traj))?;
    }
    match &path.failure {
        Some(reason) => {
            eprintln!("path truncated: {reason}");
            Ok(EXIT_TRUNCATED)
        }
        None => Ok(0),
    }
}

fn cmd_contract(
    source: &Source,
    output: Option<&Path>,
    csv: Option<&Path>,
    edge: EdgeArg,
    gamma: f64,
    steps: usize,
    tracker: &TrackerArgs,
) -> Result<i32> {
    let system = source.load()?;
    let config = tracker.config();
    let path =
        catalog::edge_contraction_path(&system, (edge.0 - 1, edge.1 - 1), gamma, steps, &config)?;

    let traj = io::trajectory_to_json(&system, &path);
    emit(output, &pretty(&traj)?)?;
    if let Some(p) = csv {
        fs::write(p, io::trajectory_csv(&traj))?;
    }
    match &path.failure {
        Some(reason) => {
            eprintln!("path truncated: {reason}");
            Ok(EXIT_TRUNCATED)
        }
        None => Ok(0),
    }
}

fn cmd_project(input: &Path, output: Option<&Path>, seed: u64) -> Result<i32> {
    let traj = io::load_trajectory(input)?;
    let csv = io::projection_csv(&traj, seed)?;
    emit(output, &csv)?;
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_render(
    input: Option<&Path>,
    builtin: Option<&str>,
    frames: &FrameList,
    output: &Path,
    size: SvgSize,
    flexes: bool,
    disk_radius: Option<f64>,
    rank_tol: Option<f64>,
) -> Result<i32> {
    let (system, frame_data, builtin_radius) = match builtin {
        Some(name) => {
            let sys = catalog::builtin(name)?;
            let frame: Vec<f64> = sys.realization.iter().copied().collect();
            let radius = catalog::builtin_packing(name).map(|p| p.radius);
            (sys, vec![frame], radius)
        }
        None => {
            let traj = io::load_trajectory(input.expect("clap requires input or builtin"))?;
            let sys = io::system_from_json(&traj.system)?;
            (sys, traj.frames, None)
        }
    };

    let opts = SvgOptions {
        width: size.0,
        height: size.1,
        show_flexes: flexes,
        disk_radius: disk_radius.or(builtin_radius),
    };

    for &idx in &frames.0 {
        let Some(frame) = frame_data.get(idx) else {
            return Err(Error::InvalidSystem(format!(
                "frame {idx} out of range: trajectory has {} frames",
                frame_data.len()
            )));
        };
        let x = DVector::from_column_slice(frame);
        let arrow = if flexes {
            let report = analyze_at(&system, &x, rank_tol);
            (report.nontrivial_dim() > 0)
                .then(|| report.nontrivial_flex_basis.column(0).into_owned())
        } else {
            None
        };
        let svg = render_frame(&system, &x, arrow.as_ref(), &opts)?;
        let target = if frames.0.len() == 1 {
            output.to_path_buf()
        } else {
            numbered(output, idx)
        };
        fs::write(&target, svg)?;
    }
    Ok(0)
}

fn cmd_catalog() -> Result<i32> {
    for name in catalog::BUILTIN_NAMES {
        let sys = catalog::builtin(name)?;
        println!(
            "{name}: dim {}, {} vertices, {} constraints, {} pinned",
            sys.dim,
            sys.n_vertices,
            sys.n_constraints(),
            sys.pinned.len()
        );
    }
    Ok(0)
}

/// frame.svg -> frame_0012.svg
fn numbered(base: &Path, idx: usize) -> PathBuf {
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("frame");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("svg");
    base.with_file_name(format!("{stem}_{idx:04}.{ext}"))
}

fn pretty<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}
