//! `fhn-pulse`: traveling pulses of the FitzHugh-Nagumo system from the
//! command line.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure.

use clap::{Args, Parser, Subcommand};
use fhn_core::descent::Descent;
use fhn_core::io::{self, CheckpointMeta, RunConfig};
use fhn_core::parabolic::test_pulse;
use fhn_core::speed::{eta_ratio, refine_root, scan_jcurve, SpeedScan};
use fhn_core::{Error, ModelParams, Profile};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "fhn-pulse", version, about = "Traveling pulses of the FitzHugh-Nagumo system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Minimise the energy at one wave speed.
    Minimize {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        c: f64,
        /// Warm start from a checkpoint instead of the square wave.
        #[arg(long)]
        warm: Option<PathBuf>,
    },
    /// Tabulate J(c) by warm-started continuation.
    Scan {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Scan, then refine every sign change of J(c) to a wave speed.
    FindSpeed {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Propagate a stored minimiser with the parabolic solver.
    Stability {
        checkpoint: PathBuf,
        /// Overrides the value of d recorded in the checkpoint.
        #[arg(long)]
        d: Option<f64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Report 2 d c0^2 / (1 - 2 beta)^2 for a computed speed.
    Eta {
        #[arg(long)]
        c0: f64,
        #[arg(long)]
        d: f64,
        #[arg(long, default_value_t = 0.25)]
        beta: f64,
    },
    /// Run the independent verification checks.
    Verify,
}

/// Config file plus per-key overrides.
#[derive(Args, Debug, Clone, Default)]
struct ModelArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Physical strip half-width (selects the 2D problem).
    #[arg(long = "L")]
    half_width: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    domain_length: Option<f64>,
    #[arg(long)]
    n_y: Option<i64>,
    #[arg(long)]
    c_start: Option<f64>,
    #[arg(long)]
    c_end: Option<f64>,
    #[arg(long)]
    dc: Option<f64>,
    #[arg(long)]
    max_iters: Option<i64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl ModelArgs {
    fn load(&self) -> Result<RunConfig, Error> {
        let text = match &self.config {
            Some(p) => std::fs::read_to_string(p)?,
            None => String::new(),
        };
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
            line: 0,
            column: 0,
            message: e.message().to_string(),
        })?;
        let mut set = |section: &str, key: &str, value: Option<toml::Value>| {
            if let Some(v) = value {
                let entry = table
                    .entry(section)
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()));
                if let Some(t) = entry.as_table_mut() {
                    t.insert(key.to_string(), v);
                }
            }
        };
        let float = |x: Option<f64>| x.map(toml::Value::Float);
        let int = |x: Option<i64>| x.map(toml::Value::Integer);
        set("model", "d", float(self.d));
        set("model", "gamma", float(self.gamma));
        set("model", "beta", float(self.beta));
        set("model", "L", float(self.half_width));
        set("grid", "h", float(self.h));
        set("grid", "domain_length", float(self.domain_length));
        set("grid", "n_y", int(self.n_y));
        set("scan", "c_start", float(self.c_start));
        set("scan", "c_end", float(self.c_end));
        set("scan", "dc", float(self.dc));
        set("descent", "max_iters", int(self.max_iters));
        let path = self.output_dir.as_ref().map(|p| toml::Value::String(p.display().to_string()));
        set("paths", "output_dir", path);
        RunConfig::from_toml(&toml::to_string(&table).expect("table serialises"))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}

fn run(command: Command) -> Result<ExitCode, Error> {
    let done = |r: Result<(), Error>| r.map(|()| ExitCode::SUCCESS);
    match command {
        Command::Minimize { model, c, warm } => done(minimize(&model.load()?, c, warm.as_deref())),
        Command::Scan { model } => done(scan(&model.load()?).map(|_| ())),
        Command::FindSpeed { model } => done(find_speed(&model.load()?)),
        Command::Stability { checkpoint, d, output_dir } => done(stability(&checkpoint, d, output_dir)),
        Command::Eta { c0, d, beta } => {
            // gamma does not enter the ratio
            let params = ModelParams::line(d, 1.0 / 16.0, beta, c0)?;
            println!("eta = {:.6}", eta_ratio(c0, &params));
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify => verify(),
    }
}

fn checkpoint_path(cfg: &RunConfig, c: f64) -> PathBuf {
    cfg.paths.checkpoint_dir.join(format!("d{}_c{c:.4}.ckpt", cfg.model.d))
}

fn save_minimizer(cfg: &RunConfig, params: &ModelParams<f64>, w: &Profile<f64>, j: f64) -> Result<PathBuf, Error> {
    let path = checkpoint_path(cfg, params.c);
    std::fs::create_dir_all(&cfg.paths.checkpoint_dir)?;
    io::save_checkpoint(&path, w, &CheckpointMeta::from_params(params, j))?;
    let csv = cfg.paths.output_dir.join(format!("profile_d{}_c{:.4}.csv", cfg.model.d, params.c));
    io::write_file(csv, |out| io::write_profile_csv(out, w))?;
    Ok(path)
}

fn minimize(cfg: &RunConfig, c: f64, warm: Option<&Path>) -> Result<(), Error> {
    let problem = cfg.speed_problem()?;
    let params = cfg.model_params(c)?;
    let w0 = match warm {
        Some(p) => problem.transfer(&io::load_checkpoint::<f64>(p)?.profile, c)?,
        None => problem.cold_start(c)?,
    };
    let descent = Descent::new(&params, w0.grid(), cfg.descent)?;
    let result = descent.minimize_traced(&w0, |r| {
        if r.iter % 1000 == 0 {
            log::debug!("iter {} J = {:e} alpha1 = {:e}", r.iter, r.energy.total, r.alpha1);
        }
    })?;
    println!(
        "c = {c}  J = {:.10e}  max w = {:.4}  iterations = {}  stop = {:?}",
        result.j(),
        result.w.max_value(),
        result.iters,
        result.reason
    );
    let path = save_minimizer(cfg, &params, &result.w, result.j())?;
    println!("checkpoint: {}", path.display());
    Ok(())
}

fn scan(cfg: &RunConfig) -> Result<SpeedScan<f64>, Error> {
    let problem = cfg.speed_problem()?;
    let s = &cfg.scan;
    let result = scan_jcurve(&problem, s.c_start, s.c_end, s.dc, &cfg.scan_options())?;
    for sample in &result.samples {
        println!("c = {:.4}  J = {:+.8e}  converged = {}", sample.c, sample.j, sample.converged);
    }
    let out = cfg.paths.output_dir.join(format!("scan_d{}.csv", cfg.model.d));
    io::write_file(&out, |f| io::write_scan_csv(f, &result.samples))?;
    println!("{} sign change(s); samples written to {}", result.brackets().len(), out.display());
    Ok(result)
}

fn find_speed(cfg: &RunConfig) -> Result<(), Error> {
    let result = scan(cfg)?;
    let problem = cfg.speed_problem()?;
    let mut roots = Vec::new();
    for bracket in result.brackets() {
        let root = refine_root(&problem, &bracket, &cfg.root_tolerances())?;
        let params = cfg.model_params(root.c_root)?;
        let eta = eta_ratio(root.c_root, &params);
        println!("root c = {:.6}  J = {:+.3e}  eta = {eta:.4}", root.c_root, root.j_at_root);
        let path = save_minimizer(cfg, &params, &root.profile, root.j_at_root)?;
        roots.push(serde_json::json!({
            "c": root.c_root,
            "J": root.j_at_root,
            "gradient_term": root.gradient_term,
            "eta": eta,
            "evaluations": root.iterations,
            "max_w": root.profile.max_value(),
            "checkpoint": path.display().to_string(),
        }));
    }
    let record = serde_json::json!({ "d": cfg.model.d, "gamma": cfg.model.gamma, "beta": cfg.model.beta, "roots": roots });
    let out = cfg.paths.output_dir.join(format!("speeds_d{}.json", cfg.model.d));
    io::write_file(&out, |f| io::write_json(f, &record))?;
    if roots.is_empty() {
        println!("no sign change of J on the scanned range");
    }
    Ok(())
}

fn stability(checkpoint: &Path, d: Option<f64>, output_dir: Option<PathBuf>) -> Result<(), Error> {
    let ck = io::load_checkpoint::<f64>(checkpoint)?;
    let m = ck.meta;
    let d = io::resolve_d(m.d, d);
    let params = match ck.profile.grid().strip_info() {
        None => ModelParams::line(d, m.gamma, m.beta, m.c)?,
        Some(s) => ModelParams::strip(d, m.gamma, m.beta, m.c, s.half_width / m.c)?,
    };
    let (report, _, last) = test_pulse(&ck.profile, &params)?;
    let mut out = std::io::stdout();
    io::write_json(&mut out, &report)?;
    let dir = output_dir.unwrap_or_else(|| PathBuf::from("out"));
    let stem = checkpoint.file_stem().and_then(|s| s.to_str()).unwrap_or("pulse");
    io::write_file(dir.join(format!("{stem}_final_u.csv")), |f| io::write_profile_csv(f, &last.u))?;
    io::write_file(dir.join(format!("{stem}_stability.json")), |f| io::write_json(f, &report))?;
    Ok(())
}

fn verify() -> Result<ExitCode, Error> {
    let reports = fhn_core::verification::run_all()?;
    for r in &reports {
        println!("{r}");
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        eprintln!("{failed} check(s) failed");
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}
