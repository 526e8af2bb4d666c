//! Command-line front end.
//!
//! A run is described by a flat `key = value` configuration file (`#` starts a
//! comment) plus `--set key=value` overrides:
//!
//! | key            | meaning                                                     | default        |
//! |----------------|-------------------------------------------------------------|----------------|
//! | `geometry`     | `rectangle` or `patch`                                      | `rectangle`    |
//! | `width`        | rectangle side along x                                      | `1`            |
//! | `height`       | rectangle side along y                                      | `1`            |
//! | `patch_file`   | patch file, required for `geometry = patch`                 |                |
//! | `degree`       | spline degree, `p` or `p1,p2`                               | `2`            |
//! | `spans`        | uniform knot spans, `n` or `n1,n2`                          | `8`            |
//! | `deformation`  | catalog name or deformation file path                      | `width_scaling`|
//! | `t`            | comma-separated amplitudes in `[0, 1)`                      | `0.1`          |
//! | `clusters`     | number of eigenvalue clusters                               | `5`            |
//! | `mc_samples`   | Monte Carlo sample count                                    | `1000`         |
//! | `seed`         | base seed of every random stream                            | `1`            |
//! | `threads`      | worker threads, `0` for all cores                           | `0`            |
//! | `grid`         | points per direction of the variance map                    | `21`           |
//! | `field_cluster`| cluster whose eigenvector variance is mapped                | `0`            |
//! | `baseline`     | `auto`, `analytic` or `mc` for `converge`                   | `auto`         |
//!
//! Catalog deformations: `none`, `width_scaling`, `height_scaling`,
//! `scaling_xy` (both scalings as two modes), `shear`, `bump`.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::eigen::{solve_reference_clusters, Spectrum};
use crate::error::Error;
use crate::fem::{write_triplets_csv, Discretization, EigenPencil, HCurlSpace};
use crate::geometry::{
    parse_deformation_file, parse_patch_file, ClosedForm, DeformationField, DeformationMode,
    GeometryMap,
};
use crate::sensitivity::{eigenpair_derivatives, SensitivityResult};
use crate::uq::{
    convergence_study, fmt_f64, monte_carlo, propagate, variance_field, write_convergence_csv,
    write_spectrum_csv, write_summary_csv, write_variance_field_csv, Baseline, RectangleOracle,
    ScalingAxis,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

pub const CATALOG: [&str; 6] = [
    "none",
    "width_scaling",
    "height_scaling",
    "scaling_xy",
    "shear",
    "bump",
];

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryKind {
    Rectangle,
    Patch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineChoice {
    Auto,
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub geometry: GeometryKind,
    pub width: f64,
    pub height: f64,
    pub patch_file: Option<PathBuf>,
    pub degree: (usize, usize),
    pub spans: (usize, usize),
    pub deformation: String,
    pub t: Vec<f64>,
    pub clusters: usize,
    pub mc_samples: usize,
    pub seed: u64,
    pub threads: usize,
    pub grid: usize,
    pub field_cluster: usize,
    pub baseline: BaselineChoice,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            geometry: GeometryKind::Rectangle,
            width: 1.0,
            height: 1.0,
            patch_file: None,
            degree: (2, 2),
            spans: (8, 8),
            deformation: "width_scaling".into(),
            t: vec![0.1],
            clusters: 5,
            mc_samples: 1000,
            seed: 1,
            threads: 0,
            grid: 21,
            field_cluster: 0,
            baseline: BaselineChoice::Auto,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> CliResult<T> {
    v.parse()
        .map_err(|_| CliError::Config(format!("invalid value `{v}` for `{key}`")))
}

fn parse_pair(key: &str, v: &str) -> CliResult<(usize, usize)> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a] => {
            let a = parse_num(key, a)?;
            Ok((a, a))
        }
        [a, b] => Ok((parse_num(key, a)?, parse_num(key, b)?)),
        _ => Err(CliError::Config(format!("invalid value `{v}` for `{key}`"))),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let v = value.trim();
        match key.trim() {
            "geometry" => {
                self.geometry = match v {
                    "rectangle" => GeometryKind::Rectangle,
                    "patch" => GeometryKind::Patch,
                    _ => return Err(CliError::Config(format!("unknown geometry `{v}`"))),
                }
            }
            "width" => self.width = parse_num("width", v)?,
            "height" => self.height = parse_num("height", v)?,
            "patch_file" => self.patch_file = Some(PathBuf::from(v)),
            "degree" => self.degree = parse_pair("degree", v)?,
            "spans" => self.spans = parse_pair("spans", v)?,
            "deformation" => self.deformation = v.to_string(),
            "t" => {
                self.t = v
                    .split(',')
                    .map(|s| parse_num("t", s.trim()))
                    .collect::<CliResult<_>>()?
            }
            "clusters" => self.clusters = parse_num("clusters", v)?,
            "mc_samples" => self.mc_samples = parse_num("mc_samples", v)?,
            "seed" => self.seed = parse_num("seed", v)?,
            "threads" => self.threads = parse_num("threads", v)?,
            "grid" => self.grid = parse_num("grid", v)?,
            "field_cluster" => self.field_cluster = parse_num("field_cluster", v)?,
            "baseline" => {
                self.baseline = match v {
                    "auto" => BaselineChoice::Auto,
                    "analytic" => BaselineChoice::Analytic,
                    "mc" => BaselineChoice::MonteCarlo,
                    _ => return Err(CliError::Config(format!("unknown baseline `{v}`"))),
                }
            }
            other => return Err(CliError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> CliResult<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected key = value", no + 1))
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut c = RunConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    /// Serializes every key; `parse(dump())` reproduces the configuration exactly.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let geometry = match self.geometry {
            GeometryKind::Rectangle => "rectangle",
            GeometryKind::Patch => "patch",
        };
        let baseline = match self.baseline {
            BaselineChoice::Auto => "auto",
            BaselineChoice::Analytic => "analytic",
            BaselineChoice::MonteCarlo => "mc",
        };
        let ts: Vec<String> = self.t.iter().map(|t| t.to_string()).collect();
        let _ = writeln!(s, "geometry = {geometry}");
        let _ = writeln!(s, "width = {}", self.width);
        let _ = writeln!(s, "height = {}", self.height);
        if let Some(p) = &self.patch_file {
            let _ = writeln!(s, "patch_file = {}", p.display());
        }
        let _ = writeln!(s, "degree = {},{}", self.degree.0, self.degree.1);
        let _ = writeln!(s, "spans = {},{}", self.spans.0, self.spans.1);
        let _ = writeln!(s, "deformation = {}", self.deformation);
        let _ = writeln!(s, "t = {}", ts.join(","));
        let _ = writeln!(s, "clusters = {}", self.clusters);
        let _ = writeln!(s, "mc_samples = {}", self.mc_samples);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "threads = {}", self.threads);
        let _ = writeln!(s, "grid = {}", self.grid);
        let _ = writeln!(s, "field_cluster = {}", self.field_cluster);
        let _ = writeln!(s, "baseline = {baseline}");
        s
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.degree.0 < 1 || self.degree.1 < 1 {
            return bad("degrees must be at least 1".into());
        }
        if self.spans.0 < 1 || self.spans.1 < 1 {
            return bad("spans must be at least 1".into());
        }
        if let Some(t) = self.t.iter().find(|t| !(**t >= 0.0 && **t < 1.0)) {
            return bad(format!("amplitude t = {t} outside [0, 1)"));
        }
        if self.t.is_empty() {
            return bad("no amplitudes given".into());
        }
        if self.clusters < 1 {
            return bad("clusters must be at least 1".into());
        }
        if self.mc_samples < 2 {
            return bad("mc_samples must be at least 2".into());
        }
        if self.grid < 2 {
            return bad("grid must be at least 2".into());
        }
        if self.field_cluster >= self.clusters {
            return bad(format!(
                "field_cluster {} but only {} clusters",
                self.field_cluster, self.clusters
            ));
        }
        match self.geometry {
            GeometryKind::Rectangle => {
                if !(self.width > 0.0 && self.height > 0.0) {
                    return bad(format!("rectangle {} x {}", self.width, self.height));
                }
            }
            GeometryKind::Patch => match &self.patch_file {
                None => return bad("geometry = patch needs patch_file".into()),
                Some(p) if !p.is_file() => {
                    return bad(format!("patch file not found: {}", p.display()))
                }
                Some(_) => {}
            },
        }
        if !CATALOG.contains(&self.deformation.as_str()) && !Path::new(&self.deformation).is_file()
        {
            return bad(format!(
                "deformation file not found: {} (catalog names: {})",
                self.deformation,
                CATALOG.join(", ")
            ));
        }
        Ok(())
    }

    /// Deformation scaling one side of a rectangle with factor 1, if any.
    fn analytic_oracle(&self) -> Option<RectangleOracle> {
        if self.geometry != GeometryKind::Rectangle {
            return None;
        }
        let axis = match self.deformation.as_str() {
            "width_scaling" => ScalingAxis::Width,
            "height_scaling" => ScalingAxis::Height,
            _ => return None,
        };
        RectangleOracle::new(self.width, self.height, axis).ok()
    }
}

fn catalog_field(name: &str) -> Option<DeformationField> {
    let cf = |c: ClosedForm| DeformationMode::ClosedForm(c);
    let modes = match name {
        "none" => vec![],
        "width_scaling" => vec![cf(ClosedForm::AxisScaling {
            axis: 0,
            factor: 1.0,
        })],
        "height_scaling" => vec![cf(ClosedForm::AxisScaling {
            axis: 1,
            factor: 1.0,
        })],
        "scaling_xy" => vec![
            cf(ClosedForm::AxisScaling {
                axis: 0,
                factor: 1.0,
            }),
            cf(ClosedForm::AxisScaling {
                axis: 1,
                factor: 1.0,
            }),
        ],
        "shear" => vec![cf(ClosedForm::Shear {
            from: 1,
            to: 0,
            factor: 1.0,
        })],
        "bump" => vec![cf(ClosedForm::Bump {
            axis: 0,
            amplitude: 1.0,
        })],
        _ => return None,
    };
    DeformationField::new(2, modes).ok()
}

fn read_file(path: &Path, what: &str) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {what} {}: {e}", path.display())))
}

fn build_discretization(cfg: &RunConfig) -> CliResult<Discretization> {
    let map = match cfg.geometry {
        GeometryKind::Rectangle => {
            GeometryMap::rectangle(cfg.width, cfg.height).map_err(config_err)?
        }
        GeometryKind::Patch => {
            let p = cfg.patch_file.as_ref().expect("validated");
            parse_patch_file(&read_file(p, "patch file")?)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
    };
    let field = match catalog_field(&cfg.deformation) {
        Some(f) => f,
        None => {
            let p = Path::new(&cfg.deformation);
            parse_deformation_file(&read_file(p, "deformation file")?)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
    };
    let space = HCurlSpace::uniform(cfg.degree, cfg.spans).map_err(config_err)?;
    Discretization::new(space, map, field).map_err(|e| match e {
        Error::NotInvertible { .. } => numerical(e),
        other => config_err(other),
    })
}

fn create(out: &Path, name: &str) -> CliResult<BufWriter<File>> {
    let path = out.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", path.display())))
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Numerical(format!("write failed: {e}"))
}

struct Prepared {
    disc: Discretization,
    pencil: EigenPencil,
    spectrum: Spectrum,
}

fn prepare(cfg: &RunConfig, out: &Path, dump_matrices: bool) -> CliResult<Prepared> {
    let disc = build_discretization(cfg)?;
    log::info!(
        "{} degrees of freedom, {} modes",
        disc.len(),
        disc.field().len()
    );
    let pencil = disc.assemble_pencil().map_err(numerical)?;
    if dump_matrices {
        for (name, m) in [("k0.csv", &pencil.k0), ("m0.csv", &pencil.m0)] {
            write_triplets_csv(m, create(out, name)?).map_err(io_err)?;
        }
        for (i, (dk, dm)) in pencil.dk.iter().zip(&pencil.dm).enumerate() {
            write_triplets_csv(dk, create(out, &format!("dk{i}.csv"))?).map_err(io_err)?;
            write_triplets_csv(dm, create(out, &format!("dm{i}.csv"))?).map_err(io_err)?;
        }
    }
    let spectrum = solve_reference_clusters(&pencil, cfg.clusters).map_err(numerical)?;
    if spectrum.clusters.len() < cfg.clusters {
        log::warn!(
            "only {} clusters available in the discrete spectrum",
            spectrum.clusters.len()
        );
    }
    log::info!(
        "{} kernel eigenvalues filtered, {} clusters",
        spectrum.kernel_count,
        spectrum.clusters.len()
    );
    Ok(Prepared {
        disc,
        pencil,
        spectrum,
    })
}

fn derivatives(p: &Prepared) -> CliResult<Vec<SensitivityResult>> {
    p.spectrum
        .clusters
        .iter()
        .map(|c| {
            eigenpair_derivatives(&p.pencil, &p.spectrum, c)
                .map(|r| r.adapted())
                .map_err(numerical)
        })
        .collect()
}

fn cmd_solve(cfg: &RunConfig, out: &Path, dump_matrices: bool) -> CliResult<()> {
    let p = prepare(cfg, out, dump_matrices)?;
    let mut f = create(out, "spectrum.csv")?;
    write_spectrum_csv(&p.spectrum, &mut f).map_err(io_err)?;
    f.flush().map_err(io_err)?;
    println!(
        "{:>6} {:>20} {:>20} {:>4}",
        "index", "lambda", "freq_hz", "m"
    );
    let mut i = 0;
    for c in &p.spectrum.clusters {
        for l in &c.eigenvalues {
            println!(
                "{i:>6} {l:>20.10} {:>20.6e} {:>4}",
                crate::eigen::frequency_hz(*l),
                c.multiplicity()
            );
            i += 1;
        }
    }
    Ok(())
}

fn cmd_uq(cfg: &RunConfig, out: &Path, dump_matrices: bool) -> CliResult<()> {
    let p = prepare(cfg, out, dump_matrices)?;
    let results = derivatives(&p)?;
    let summaries = cfg
        .t
        .iter()
        .map(|&t| propagate(&results, t).map_err(numerical))
        .collect::<CliResult<Vec<_>>>()?;
    let mut f = create(out, "summary.csv")?;
    write_summary_csv(&summaries, &mut f).map_err(io_err)?;
    f.flush().map_err(io_err)?;
    let field_result = results.get(cfg.field_cluster).ok_or_else(|| {
        CliError::Numerical(format!("cluster {} was not computed", cfg.field_cluster))
    })?;
    let field = variance_field(&p.disc, field_result, cfg.t[0], cfg.grid).map_err(numerical)?;
    let mut f = create(out, "variance_field.csv")?;
    write_variance_field_csv(&field, &mut f).map_err(io_err)?;
    f.flush().map_err(io_err)?;
    for s in &summaries {
        for c in &s.clusters {
            println!(
                "t={} cluster {} lambda {:.8} var {:?}",
                s.t, c.cluster_index, c.lambda, c.lambda_variance
            );
        }
    }
    Ok(())
}

fn cmd_mc(cfg: &RunConfig, out: &Path, dump_matrices: bool) -> CliResult<()> {
    let p = prepare(cfg, out, dump_matrices)?;
    let mut f = create(out, "mc.csv")?;
    writeln!(
        f,
        "t,cluster_id,branch,mean,mean_se,variance,variance_se,projector_mean,n_samples,n_failed"
    )
    .map_err(io_err)?;
    for &t in &cfg.t {
        let mc = monte_carlo(
            &p.disc,
            &p.spectrum,
            &p.pencil.m0,
            t,
            cfg.mc_samples,
            cfg.seed,
        )
        .map_err(numerical)?;
        for c in &mc.clusters {
            for j in 0..c.mean.len() {
                let cols = [
                    c.mean[j],
                    c.mean_se[j],
                    c.variance[j],
                    c.variance_se[j],
                    c.projector_mean,
                ]
                .map(fmt_f64);
                writeln!(
                    f,
                    "{},{},{j},{},{},{}",
                    fmt_f64(t),
                    c.cluster_index,
                    cols.join(","),
                    mc.n_samples,
                    mc.n_failed
                )
                .map_err(io_err)?;
            }
        }
        println!("t={t}: {} samples, {} skipped", mc.n_samples, mc.n_failed);
    }
    f.flush().map_err(io_err)
}

fn cmd_converge(cfg: &RunConfig, out: &Path, dump_matrices: bool) -> CliResult<()> {
    if cfg.t.len() < 4 {
        return Err(CliError::Config("need ≥ 4 amplitudes".into()));
    }
    if cfg.t.windows(2).any(|w| w[0] >= w[1]) || cfg.t[0] <= 0.0 {
        return Err(CliError::Config(
            "amplitudes must be positive and strictly increasing".into(),
        ));
    }
    let baseline = match (cfg.baseline, cfg.analytic_oracle()) {
        (BaselineChoice::Auto | BaselineChoice::Analytic, Some(o)) => Baseline::Analytic(o),
        (BaselineChoice::Analytic, None) => {
            return Err(CliError::Config(
                "analytic baseline needs a rectangle with width_scaling or height_scaling".into(),
            ))
        }
        _ => Baseline::MonteCarlo {
            n_samples: cfg.mc_samples,
            seed: cfg.seed,
        },
    };
    let p = prepare(cfg, out, dump_matrices)?;
    let study =
        convergence_study(&p.disc, &p.pencil, &p.spectrum, &cfg.t, &baseline).map_err(numerical)?;
    let mut f = create(out, "convergence.csv")?;
    write_convergence_csv(&study.rows, &mut f).map_err(io_err)?;
    f.flush().map_err(io_err)?;
    println!("cluster,lambda,mean_slope,variance_slope");
    for (s, c) in study.slopes.iter().zip(&p.spectrum.clusters) {
        println!("{},{},{},{}", s.cluster_index, c.lambda, s.mean, s.variance);
    }
    Ok(())
}

#[derive(Debug, Parser)]
#[command(
    name = "cavity-uq",
    version,
    about = "Shape uncertainty quantification for 2D cavity eigenproblems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Reference eigenvalues and frequencies (spectrum.csv).
    Solve(CommonArgs),
    /// First-order eigenvalue/eigenvector statistics (summary.csv, variance_field.csv).
    Uq(CommonArgs),
    /// Monte Carlo statistics (mc.csv).
    Mc(CommonArgs),
    /// Error of the first-order statistics against a baseline (convergence.csv).
    Converge(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Configuration file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Print the effective configuration and exit.
    #[arg(long)]
    dump_config: bool,
    /// Also write the assembled matrices as row,col,value triplets.
    #[arg(long)]
    dump_matrices: bool,
}

/// Effective configuration: defaults, then the config file, then `--set` overrides.
fn load_config(args: &CommonArgs) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        cfg.apply_text(&read_file(path, "config file")?)?;
    }
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k, v)?;
    }
    Ok(cfg)
}

type CommandFn = fn(&RunConfig, &Path, bool) -> CliResult<()>;

fn dispatch(command: &Command) -> CliResult<()> {
    let (args, run): (&CommonArgs, CommandFn) = match command {
        Command::Solve(a) => (a, cmd_solve),
        Command::Uq(a) => (a, cmd_uq),
        Command::Mc(a) => (a, cmd_mc),
        Command::Converge(a) => (a, cmd_converge),
    };
    let cfg = load_config(args)?;
    if args.dump_config {
        print!("{}", cfg.dump());
        return Ok(());
    }
    cfg.validate()?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", args.out.display())))?;
    if cfg.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(numerical)?;
        pool.install(|| run(&cfg, &args.out, args.dump_matrices))
    } else {
        run(&cfg, &args.out, args.dump_matrices)
    }
}

/// Parses `args` (including the program name) and runs the command; returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trips() {
        let mut c = RunConfig::default();
        c.set("t", "0.03125, 0.1, 0.30000000000000004").unwrap();
        c.set("degree", "3,2").unwrap();
        c.set("geometry", "patch").unwrap();
        c.set("patch_file", "some/patch.txt").unwrap();
        c.set("baseline", "mc").unwrap();
        c.set("seed", "18446744073709551615").unwrap();
        assert_eq!(RunConfig::parse(&c.dump()).unwrap(), c);
        assert_eq!(
            RunConfig::parse(&RunConfig::default().dump()).unwrap(),
            RunConfig::default()
        );
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::parse("nonsense").is_err());
        assert!(RunConfig::parse("colour = red").is_err());
        assert!(RunConfig::parse("spans = 1,2,3").is_err());
        let c = RunConfig::parse("degree = 0").unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::parse("t = 1.0").unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::parse("deformation = /no/such/field.txt").unwrap();
        match c.validate() {
            Err(CliError::Config(m)) => assert!(m.contains("/no/such/field.txt")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn comments_and_blank_lines() {
        let c = RunConfig::parse("# run\n\nspans = 4 # coarse\nwidth=2\n").unwrap();
        assert_eq!(c.spans, (4, 4));
        assert_eq!(c.width, 2.0);
    }
}
