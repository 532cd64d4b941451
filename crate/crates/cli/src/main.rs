use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use quasiloc_cli::{resolve_defaults, run, validate, CliError, ExperimentConfig};
use serde_json::json;

#[derive(Parser)]
#[command(name = "quasiloc", version, about = "Localization experiments for quasiperiodic operators with Gaussian hulls")]
struct Cli {
    /// JSON experiment file; command-line values take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for `<command>.csv` and `<command>.json`; stdout/stderr otherwise.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (QUASILOC_THREADS takes precedence).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Diophantine profile of the frequency matrix and its power-law fit.
    Dioph(Flags),
    /// Hull sample on a torus grid.
    Hull(Flags),
    /// Conditional variance of the hull against its lower bounds.
    Variance(Flags),
    /// Compactly supported bump with prescribed Fourier decay.
    Bump(Flags),
    /// Eigenvalues of the operator on a box.
    Spectrum(Flags),
    /// One column of the Green's function on a box.
    Green(Flags),
    /// Finite-window check of the multiscale hypotheses.
    Msa(Flags),
    /// Decay rates of selected eigenfunctions.
    Decay(Flags),
    /// Decay rates across a list of couplings with one hull sample.
    Sweep(Flags),
    /// Frequency of simultaneous resonances across hull seeds.
    Census(Flags),
    /// Report configuration violations and warnings without running anything.
    Validate(Flags),
}

#[derive(Args, Clone, Default)]
struct Flags {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    nu: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    alpha: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    omega: Option<Vec<f64>>,
    #[arg(long)]
    weight: Option<String>,
    #[arg(long)]
    cutoff: Option<usize>,
    #[arg(long)]
    majorant: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    g: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    g_list: Option<Vec<f64>>,
    #[arg(long, alias = "box")]
    box_side: Option<u64>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long, value_delimiter = ',', alias = "eps")]
    eps_list: Option<Vec<f64>>,
    #[arg(long, alias = "grid")]
    grid_n: Option<usize>,
    #[arg(long)]
    jitter: Option<f64>,
    #[arg(long, alias = "jcut")]
    j_cut: Option<u32>,
    #[arg(long)]
    lmax: Option<u64>,
    #[arg(long, allow_negative_numbers = true, alias = "E")]
    energy: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    energy_grid: Option<String>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    extra_omegas: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    selector: Option<String>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    source: Option<Vec<i64>>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    census_l: Option<u64>,
    #[arg(long)]
    census_k: Option<usize>,
}

impl Flags {
    fn into_config(self) -> ExperimentConfig {
        ExperimentConfig {
            d: self.d,
            nu: self.nu,
            alpha: self.alpha,
            omega: self.omega,
            weight: self.weight,
            cutoff: self.cutoff,
            majorant: self.majorant,
            g: self.g,
            g_list: self.g_list,
            box_side: self.box_side,
            samples: self.samples,
            eps_list: self.eps_list,
            grid_n: self.grid_n,
            jitter: self.jitter,
            j_cut: self.j_cut,
            lmax: self.lmax,
            energy: self.energy,
            energy_grid: self.energy_grid,
            k_max: self.k_max,
            extra_omegas: self.extra_omegas,
            selector: self.selector,
            source: self.source,
            kappa: self.kappa,
            census_l: self.census_l,
            census_k: self.census_k,
            ..ExperimentConfig::default()
        }
    }
}

impl Command {
    fn split(self) -> (&'static str, Flags) {
        match self {
            Command::Dioph(f) => ("dioph", f),
            Command::Hull(f) => ("hull", f),
            Command::Variance(f) => ("variance", f),
            Command::Bump(f) => ("bump", f),
            Command::Spectrum(f) => ("spectrum", f),
            Command::Green(f) => ("green", f),
            Command::Msa(f) => ("msa", f),
            Command::Decay(f) => ("decay", f),
            Command::Sweep(f) => ("sweep", f),
            Command::Census(f) => ("census", f),
            Command::Validate(f) => ("validate", f),
        }
    }
}

fn configure_threads(flag: Option<usize>) -> Result<(), CliError> {
    let threads = match std::env::var("QUASILOC_THREADS") {
        Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
            CliError::Validation(vec![format!("QUASILOC_THREADS must be a positive integer, got `{v}`")])
        })?),
        Err(_) => flag,
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Validation(vec!["thread count must be positive".into()]));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    configure_threads(cli.threads)?;
    let (command, flags) = cli.command.split();
    let file = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    let mut cfg = file.overlay(flags.into_config());
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.display().to_string());
    }
    let target = if command == "validate" { None } else { Some(command) };
    let cfg = resolve_defaults(cfg, target);
    let check = validate(&cfg, target);
    for w in &check.warnings {
        eprintln!("warning: {w}");
    }
    if !check.violations.is_empty() {
        return Err(CliError::Validation(check.violations));
    }
    if command == "validate" {
        return Ok(());
    }
    let artifacts = run(command, &cfg)?;
    let report = json!({
        "command": command,
        "config": cfg,
        "warnings": check.warnings,
        "report": artifacts.report,
    });
    let json_text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))? + "\n";
    match cfg.out.as_deref() {
        Some(dir) => {
            let dir = PathBuf::from(dir);
            std::fs::create_dir_all(&dir)?;
            artifacts.table.write(std::fs::File::create(dir.join(format!("{command}.csv")))?)?;
            std::fs::write(dir.join(format!("{command}.json")), json_text)?;
        }
        None => {
            artifacts.table.write(std::io::stdout().lock())?;
            std::io::stderr().lock().write_all(json_text.as_bytes())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            for m in e.messages() {
                eprintln!("error: {m}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
