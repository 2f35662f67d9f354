//! `kolmo`: command-line front end.
//!
//! Exit codes: 0 success, 1 domain or I/O error, 2 usage error.

mod config;
mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kolmo_core::chains;
use kolmo_core::domain::{CoefficientField, Face, OmegaBox};
use kolmo_core::group::{quasi_distance, GroupPoint};
use kolmo_core::kernel;
use kolmo_core::simulate::{self, SdeConfig};
use kolmo_core::solve::{self, Grid, SolveRegion, SolveRequest};
use kolmo_core::verify::{self, Check};

use crate::io::{Metadata, OutPath};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
}

impl CliError {
    fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Domain(format!("{}: {e}", path.display()))
    }

    fn json(e: serde_json::Error) -> Self {
        CliError::Domain(format!("json: {e}"))
    }

    fn domain<E: std::fmt::Display>(e: E) -> Self {
        CliError::Domain(e.to_string())
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(s) => write!(f, "usage: {s}"),
            CliError::Domain(s) => write!(f, "error: {s}"),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "kolmo", version, about = "Numerical lab for degenerate Kolmogorov operators")]
struct Cli {
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    force: bool,
    /// Override the seed of a config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress progress lines on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Group law, norm and quasi-distance. Points are flat records `m,x…,y…,t`.
    #[command(subcommand)]
    Geom(GeomCmd),
    /// Fundamental solution.
    #[command(subcommand)]
    Kernel(KernelCmd),
    /// Optimal admissible paths and Harnack chains.
    #[command(subcommand)]
    Chains(ChainsCmd),
    /// Stochastic simulation.
    #[command(subcommand)]
    Simulate(SimCmd),
    /// Grid solve on a box with indicator data.
    Solve(SolveArgs),
    /// Run one boundary-estimate experiment.
    Verify(VerifyArgs),
    /// Render a saved report as a CSV table.
    Report(ReportArgs),
}

#[derive(Subcommand, Debug)]
enum GeomCmd {
    Compose {
        #[arg(long, allow_hyphen_values = true)]
        p: String,
        #[arg(long, allow_hyphen_values = true)]
        q: String,
    },
    Inverse {
        #[arg(long, allow_hyphen_values = true)]
        p: String,
    },
    Norm {
        #[arg(long, allow_hyphen_values = true)]
        p: String,
    },
    Dist {
        #[arg(long, allow_hyphen_values = true)]
        p: String,
        #[arg(long, allow_hyphen_values = true)]
        q: String,
    },
    Dilate {
        #[arg(long, allow_hyphen_values = true)]
        p: String,
        #[arg(long)]
        r: f64,
    },
}

#[derive(Subcommand, Debug)]
enum KernelCmd {
    /// `Γ^λ(target, pole)`. Without `--input`, the target is `(x, y, t)`
    /// and the pole the origin unless given.
    Eval(KernelEval),
}

#[derive(Args, Debug)]
struct KernelEval {
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long, default_value_t = 2.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    t: f64,
    /// Comma-separated velocity.
    #[arg(long, allow_hyphen_values = true)]
    x: Option<String>,
    /// Comma-separated position.
    #[arg(long, allow_hyphen_values = true)]
    y: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pole: Option<String>,
    /// JSON lines `{"target": [...], "pole": [...], "lambda": ...}`.
    #[arg(long, requires = "out")]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum ChainsCmd {
    /// Optimal path between two points and its Harnack chain.
    Connect {
        #[arg(long, allow_hyphen_values = true)]
        start: String,
        #[arg(long, allow_hyphen_values = true)]
        end: String,
        #[arg(long, default_value_t = 1.0)]
        h: f64,
        #[arg(long, default_value_t = 0.5)]
        eta: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum SimCmd {
    /// First exits from `Ω_r(anchor)` started at `--start`.
    Hit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        start: String,
        /// Boundary anchor; defaults to the boundary point over the origin.
        #[arg(long, allow_hyphen_values = true)]
        anchor: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        box_r: f64,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Free-space endpoints after `horizon` with `A = c I`.
    Transition {
        #[arg(long, allow_hyphen_values = true)]
        start: String,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value_t = 1.0 / 512.0)]
        dt: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DataKind {
    /// 1 on the bottom face.
    Bottom,
    /// 1 on the cap and side walls.
    Walls,
    /// 1 on every Kolmogorov face except the lateral one.
    Far,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    anchor: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    box_r: f64,
    #[arg(long, value_enum, default_value_t = DataKind::Bottom)]
    data: DataKind,
    /// Query lattice points per axis.
    #[arg(long, default_value_t = 9)]
    lattice: usize,
    /// Finest resolved scale, as a fraction of `box_r`.
    #[arg(long, default_value_t = 0.125)]
    finest: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// carleson, backward, quotient, doubling, green-measure, kernel-function
    check: String,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write the row table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}

fn point(s: &str) -> Result<GroupPoint, CliError> {
    let rec = floats(s)?;
    GroupPoint::from_record(&rec).map_err(|e| CliError::Usage(format!("point `{s}`: {e}")))
}

fn floats(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Usage(format!("`{v}`: {e}")))
        })
        .collect()
}

fn record_line(p: &GroupPoint) -> String {
    join(&p.to_record())
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",")
}

fn point_header(m: usize, prefix: &str) -> String {
    let mut cols = vec![format!("{prefix}m")];
    cols.extend((1..=m).map(|i| format!("{prefix}x{i}")));
    cols.extend((1..=m).map(|i| format!("{prefix}y{i}")));
    cols.push(format!("{prefix}t"));
    cols.join(",")
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Geom(g) => geom(g),
        Cmd::Kernel(KernelCmd::Eval(k)) => kernel_eval(k, cli.force),
        Cmd::Chains(ChainsCmd::Connect {
            start,
            end,
            h,
            eta,
            out,
        }) => connect(&start, &end, h, eta, out, cli.force),
        Cmd::Simulate(s) => simulate_cmd(s, cli.force, cli.seed, cli.quiet),
        Cmd::Solve(s) => solve_cmd(s, cli.force, cli.seed),
        Cmd::Verify(v) => verify_cmd(v, cli.force, cli.seed, cli.quiet),
        Cmd::Report(r) => report_cmd(r, cli.force),
    }
}

fn geom(g: GeomCmd) -> Result<(), CliError> {
    let out = match g {
        GeomCmd::Compose { p, q } => record_line(&point(&p)?.compose(&point(&q)?).map_err(CliError::domain)?),
        GeomCmd::Inverse { p } => record_line(&point(&p)?.inverse()),
        GeomCmd::Norm { p } => format!("{}", point(&p)?.norm()),
        GeomCmd::Dist { p, q } => format!(
            "{}",
            quasi_distance(&point(&p)?, &point(&q)?).map_err(CliError::domain)?
        ),
        GeomCmd::Dilate { p, r } => {
            if !(r > 0.0) {
                return Err(CliError::Usage("dilation factor must be positive".into()));
            }
            record_line(&point(&p)?.dilate(r))
        }
    };
    println!("{out}");
    Ok(())
}

#[derive(serde::Deserialize)]
struct QueryRecord {
    target: GroupPoint,
    pole: GroupPoint,
    lambda: f64,
}

fn kernel_eval(k: KernelEval, force: bool) -> Result<(), CliError> {
    if !(k.lambda > 0.0) {
        return Err(CliError::Usage("lambda must be positive".into()));
    }
    if let Some(input) = &k.input {
        let out = OutPath::check(k.out.as_ref().expect("clap requires out"), force)?;
        let text = io::read_to_string(input)?;
        let mut body = String::from("id,value\n");
        for (i, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
            let q: QueryRecord = serde_json::from_str(line)
                .map_err(|e| CliError::Domain(format!("{} line {}: {e}", input.display(), i + 1)))?;
            if !(q.lambda > 0.0) {
                return Err(CliError::Domain(format!("line {}: lambda must be positive", i + 1)));
            }
            let v = kernel::gamma(&q.target, &q.pole, q.lambda).map_err(CliError::domain)?;
            body.push_str(&format!("{i},{v}\n"));
        }
        return out.write_csv(&Metadata::new("kernel eval", None, None), &body);
    }
    let vec_or_zero = |s: &Option<String>| -> Result<Vec<f64>, CliError> {
        match s {
            Some(s) => floats(s),
            None => Ok(vec![0.0; k.m]),
        }
    };
    let target =
        GroupPoint::new(vec_or_zero(&k.x)?, vec_or_zero(&k.y)?, k.t).map_err(|e| CliError::Usage(e.to_string()))?;
    if target.dim() != k.m {
        return Err(CliError::Usage(format!("--x/--y must have {} entries", k.m)));
    }
    let pole = match &k.pole {
        Some(p) => point(p)?,
        None => GroupPoint::origin(k.m),
    };
    let v = kernel::gamma(&target, &pole, k.lambda).map_err(CliError::domain)?;
    println!("{v}");
    Ok(())
}

fn connect(start: &str, end: &str, h: f64, eta: f64, out: Option<PathBuf>, force: bool) -> Result<(), CliError> {
    let out = out.map(|o| OutPath::check(&o, force)).transpose()?;
    let (s, e) = (point(start)?, point(end)?);
    let path = chains::optimal_path(&s, &e).map_err(CliError::domain)?;
    let chain = chains::segment_chain(&path, h, eta).map_err(CliError::domain)?;
    println!("cost {}", path.cost());
    println!("nodes {}", chain.len());
    if let Some(out) = out {
        let mut body = format!("node,tau,radius,cumulative_cost,{}\n", point_header(s.dim(), ""));
        for j in 0..chain.nodes.len() {
            body.push_str(&format!(
                "{j},{},{},{},{}\n",
                chain.taus[j],
                chain.radii.get(j).copied().unwrap_or(0.0),
                chain.cumulative[j],
                record_line(&chain.nodes[j])
            ));
        }
        out.write_csv(&Metadata::new("chains connect", None, None), &body)?;
    }
    Ok(())
}

fn default_anchor(domain: &kolmo_core::domain::LipschitzDomain) -> Result<GroupPoint, CliError> {
    let m = domain.m();
    domain
        .boundary_point(&vec![0.0; m - 1], &vec![0.0; m - 1], 0.0, 0.0)
        .map_err(CliError::domain)
}

fn simulate_cmd(s: SimCmd, force: bool, seed: Option<u64>, quiet: bool) -> Result<(), CliError> {
    match s {
        SimCmd::Hit {
            config,
            start,
            anchor,
            box_r,
            samples,
            out,
        } => {
            let out = OutPath::check(&out, force)?;
            let loaded = config::load(&config, seed)?;
            let (domain, a) = loaded.config.build(Some(&loaded.base_dir)).map_err(CliError::domain)?;
            let anchor = match anchor {
                Some(p) => point(&p)?,
                None => default_anchor(&domain)?,
            };
            let bx = OmegaBox::new(domain, anchor, box_r).map_err(CliError::domain)?;
            let sim = &loaded.config.simulation;
            let mut cfg = SdeConfig::new(a, sim.dt, sim.seed);
            cfg.boundary_refine = sim.boundary_refine;
            cfg.drift_mode = sim.drift_mode;
            cfg.max_steps = sim.max_steps;
            let n = samples.unwrap_or(sim.samples);
            let ens = simulate::hitting_ensemble(&point(&start)?, &bx, &cfg, n).map_err(CliError::domain)?;
            let mut buf = Vec::new();
            ens.write_csv(&mut buf).map_err(CliError::domain)?;
            let body = String::from_utf8(buf).map_err(CliError::domain)?;
            out.write_csv(
                &Metadata::new("simulate hit", Some(sim.seed), Some(loaded.sha256)),
                &body,
            )?;
            if !quiet {
                eprintln!("{} exits, discard rate {}", ens.samples.len(), ens.discard_rate());
            }
            Ok(())
        }
        SimCmd::Transition {
            start,
            horizon,
            dt,
            c,
            samples,
            out,
        } => {
            let out = OutPath::check(&out, force)?;
            let start = point(&start)?;
            let a = CoefficientField::scalar(start.dim(), c).map_err(CliError::domain)?;
            let seed = seed.unwrap_or(1);
            let cfg = SdeConfig::new(a, dt, seed);
            let ends = simulate::simulate_transition(&start, horizon, &cfg, samples).map_err(CliError::domain)?;
            let mut body = point_header(start.dim(), "") + "\n";
            for e in &ends {
                body.push_str(&record_line(e));
                body.push('\n');
            }
            out.write_csv(&Metadata::new("simulate transition", Some(seed), None), &body)
        }
    }
}

fn solve_cmd(s: SolveArgs, force: bool, seed: Option<u64>) -> Result<(), CliError> {
    let out = OutPath::check(&s.out, force)?;
    if s.lattice < 2 {
        return Err(CliError::Usage("--lattice must be at least 2".into()));
    }
    if !(s.finest > 0.0 && s.finest <= 1.0) {
        return Err(CliError::Usage("--finest must lie in (0, 1]".into()));
    }
    let loaded = config::load(&s.config, seed)?;
    let (domain, a) = loaded.config.build(Some(&loaded.base_dir)).map_err(CliError::domain)?;
    let anchor = match &s.anchor {
        Some(p) => point(p)?,
        None => default_anchor(&domain)?,
    };
    let bx = OmegaBox::new(domain, anchor, s.box_r).map_err(CliError::domain)?;
    let spec = verify::multiscale_grid_spec(s.box_r, s.finest * s.box_r, loaded.config.experiment.resolution);
    let grid = Grid::new(SolveRegion::Omega(bx.clone()), &spec, &a, None).map_err(CliError::domain)?;
    let queries = solve::omega_lattice(&bx, s.lattice);
    let kind = s.data;
    let data = move |_: &GroupPoint, f: Face| -> f64 {
        let hit = match kind {
            DataKind::Bottom => f == Face::S3,
            DataKind::Walls => matches!(f, Face::S4 | Face::S1 { .. } | Face::S2 { .. }),
            DataKind::Far => !matches!(f, Face::Delta | Face::NotKolmogorov),
        };
        hit as u8 as f64
    };
    let sol = solve::solve_dirichlet(
        &grid,
        &a,
        &data,
        &SolveRequest {
            queries: queries.clone(),
            energy_boxes: vec![],
        },
    )
    .map_err(CliError::domain)?;
    let m = bx.m();
    let mut body = format!("{},value\n", point_header(m, ""));
    for (p, v) in queries.iter().zip(&sol.query_values) {
        body.push_str(&format!("{},{v}\n", record_line(p)));
    }
    let mut meta = Metadata::new("solve", None, Some(loaded.sha256));
    meta.command = format!(
        "solve (steps {}, nodes {}, max-principle violations {})",
        sol.steps, sol.nodes, sol.violations
    );
    out.write_csv(&meta, &body)
}

fn verify_cmd(v: VerifyArgs, force: bool, seed: Option<u64>, quiet: bool) -> Result<(), CliError> {
    let check = Check::parse(&v.check).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown check `{}`; expected one of {}",
            v.check,
            Check::ALL.map(|c| c.name()).join(", ")
        ))
    })?;
    let out = OutPath::check(&v.out, force)?;
    let csv = v.csv.as_ref().map(|p| OutPath::check(p, force)).transpose()?;
    let loaded = config::load(&v.config, seed)?;
    let report = verify::run_check(check, &loaded.config, Some(&loaded.base_dir)).map_err(CliError::domain)?;
    let meta = Metadata::new(
        &format!("verify {}", check.name()),
        Some(loaded.config.simulation.seed),
        Some(loaded.sha256),
    );
    out.write_json(&meta, "report", &report)?;
    if let Some(csv) = csv {
        csv.write_csv(&meta, &report.rows_csv())?;
    }
    if !quiet {
        for c in &report.criteria {
            eprintln!(
                "  {}: {} (limit {}) {}",
                c.name,
                c.value,
                c.limit,
                if c.passed { "ok" } else { "FAIL" }
            );
        }
    }
    println!(
        "{} {} constant {} spread {}",
        check.name(),
        if report.passed { "PASS" } else { "FAIL" },
        report.constant,
        report.spread
    );
    Ok(())
}

fn report_cmd(r: ReportArgs, force: bool) -> Result<(), CliError> {
    let out = r.out.as_ref().map(|p| OutPath::check(p, force)).transpose()?;
    let text = io::read_to_string(&r.input)?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(CliError::json)?;
    let rep = v
        .get("report")
        .ok_or_else(|| CliError::Domain(format!("{} has no `report` object", r.input.display())))?;
    let get = |k: &str| rep.get(k).cloned().unwrap_or(serde_json::Value::Null);
    println!("check {}", get("check"));
    println!("passed {}", get("passed"));
    println!("constant {}", get("constant"));
    println!("spread {}", get("spread"));
    if let Some(per) = rep.get("per_scale").and_then(|p| p.as_array()) {
        for row in per {
            println!("  scale {} constant {}", row[0], row[1]);
        }
    }
    if let Some(out) = out {
        let mut body = String::from("scale,anchor,quantity,value,lo,hi\n");
        for row in rep.get("rows").and_then(|x| x.as_array()).into_iter().flatten() {
            let f = |k: &str| row.get(k).map(|x| x.to_string()).unwrap_or_default();
            let q = row.get("quantity").and_then(|x| x.as_str()).unwrap_or("");
            body.push_str(&format!(
                "{},{},{},{},{},{}\n",
                f("scale"),
                f("anchor"),
                q,
                f("value"),
                f("lo"),
                f("hi")
            ));
        }
        let md = v.get("metadata");
        let seed = md.and_then(|m| m.get("seed")).and_then(|s| s.as_u64());
        let hash = md
            .and_then(|m| m.get("config_sha256"))
            .and_then(|s| s.as_str())
            .map(str::to_string);
        out.write_csv(&Metadata::new("report", seed, hash), &body)?;
    }
    Ok(())
}
