use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pse_core::experiment::{run, Analysis, ExperimentConfig, ExitStatus, RunOptions, RunOutcome};
use pse_core::lattice::DEFAULT_MAX_SITES;

#[derive(Parser)]
#[command(name = "pse", version, about = "Pure skin effect experiments on directed-chain lattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the Hamiltonian of the config's model.
    Build(Common),
    /// Eigenvalues, eigenvectors and closed-form spectrum comparison.
    Spectrum(Common),
    /// Purity, decay constants and partition sums.
    Pse(Common),
    /// Boundary determinant and closed-form momentum checks (rings only).
    Gbz(Common),
    /// Compare an N = M ring to the open chain with 2*Gamma2 + 2 = Gamma1.
    ObcCompare(Common),
    /// Decay, spectrum and loop checks for a 2D lattice.
    Lattice2d(Common),
    /// Parameter sweep over rings.
    Sweep(Common),
    /// Every analysis listed in the config.
    Run(Common),
    /// Run every config in a directory.
    VerifyAll(VerifyAllArgs),
}

#[derive(Args)]
struct Tols {
    #[arg(long)]
    tol_eig: Option<f64>,
    #[arg(long)]
    tol_purity: Option<f64>,
    #[arg(long)]
    tol_det: Option<f64>,
    #[arg(long)]
    tol_match: Option<f64>,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: config `output_dir`, else `out/<name>`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    tols: Tols,
    /// Largest allowed number of sites.
    #[arg(long, env = "PSE_MAX_SITES", default_value_t = DEFAULT_MAX_SITES)]
    max_sites: usize,
}

#[derive(Args)]
struct VerifyAllArgs {
    /// Directory of JSON configs.
    #[arg(long, default_value = "configs")]
    dir: PathBuf,
    /// Parent output directory; each config writes to `<out>/<name>`.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[command(flatten)]
    tols: Tols,
    #[arg(long, env = "PSE_MAX_SITES", default_value_t = DEFAULT_MAX_SITES)]
    max_sites: usize,
}

fn apply_tols(cfg: &mut ExperimentConfig, t: &Tols) {
    let tol = &mut cfg.tolerances;
    if let Some(v) = t.tol_eig {
        tol.eig = v;
    }
    if let Some(v) = t.tol_purity {
        tol.purity = v;
    }
    if let Some(v) = t.tol_det {
        tol.det = v;
    }
    if let Some(v) = t.tol_match {
        tol.match_ = v;
    }
}

fn report(label: &str, outcome: &RunOutcome) {
    match &outcome.summary {
        Some(s) => {
            for a in &s.assertions {
                println!("[{}] {label}: {} ({})", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
            }
        }
        None => eprintln!("{label}: {}", outcome.message.as_deref().unwrap_or("failed")),
    }
    println!(
        "{label}: exit {} -> {}",
        outcome.status.code(),
        outcome.out_dir.display()
    );
}

fn load(path: &Path) -> Result<ExperimentConfig, RunOutcome> {
    ExperimentConfig::load(path).map_err(|e| RunOutcome {
        status: ExitStatus::InvalidConfig,
        out_dir: PathBuf::new(),
        summary: None,
        message: Some(format!("{}: {e}", path.display())),
    })
}

/// `None` keeps the config's analyses.
fn run_one(common: &Common, analyses: Option<Vec<Analysis>>, build_only: bool, sweep: Option<bool>) -> i32 {
    let mut cfg = match load(&common.config) {
        Ok(c) => c,
        Err(o) => {
            report("config", &o);
            return o.status.code();
        }
    };
    apply_tols(&mut cfg, &common.tols);
    if let Some(want) = sweep {
        if cfg.sweep.is_some() != want {
            eprintln!(
                "{}: this subcommand needs a config with {}",
                common.config.display(),
                if want { "`sweep`" } else { "`model`" }
            );
            return ExitStatus::InvalidConfig.code();
        }
    }
    if let Some(a) = analyses {
        cfg.analyses = a;
    }
    let opts = RunOptions {
        out_dir: common.out.clone(),
        max_sites: common.max_sites,
        build_only,
    };
    let outcome = run(&cfg, &opts);
    report(&cfg.name, &outcome);
    outcome.status.code()
}

fn verify_all(args: &VerifyAllArgs) -> i32 {
    let mut paths: Vec<PathBuf> = match std::fs::read_dir(&args.dir) {
        Ok(rd) => rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect(),
        Err(e) => {
            eprintln!("{}: {e}", args.dir.display());
            return ExitStatus::InvalidConfig.code();
        }
    };
    paths.sort();
    if paths.is_empty() {
        eprintln!("{}: no configs found", args.dir.display());
        return ExitStatus::InvalidConfig.code();
    }
    let mut worst = 0;
    for p in &paths {
        let code = match load(p) {
            Ok(mut cfg) => {
                apply_tols(&mut cfg, &args.tols);
                let opts = RunOptions {
                    out_dir: Some(args.out.join(&cfg.name)),
                    max_sites: args.max_sites,
                    build_only: false,
                };
                let outcome = run(&cfg, &opts);
                report(&cfg.name, &outcome);
                outcome.status.code()
            }
            Err(o) => {
                report("config", &o);
                o.status.code()
            }
        };
        worst = worst.max(code);
    }
    worst
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Build(c) => run_one(c, None, true, Some(false)),
        Command::Spectrum(c) => run_one(c, Some(vec![Analysis::Spectra]), false, Some(false)),
        Command::Pse(c) => run_one(c, Some(vec![Analysis::Pse]), false, Some(false)),
        Command::Gbz(c) => run_one(c, Some(vec![Analysis::Gbz]), false, Some(false)),
        Command::ObcCompare(c) => run_one(c, Some(vec![Analysis::ObcCompare]), false, Some(false)),
        Command::Lattice2d(c) => run_one(
            c,
            Some(vec![Analysis::Pse, Analysis::Spectra, Analysis::Loops2d]),
            false,
            Some(false),
        ),
        Command::Sweep(c) => run_one(c, None, false, Some(true)),
        Command::Run(c) => run_one(c, None, false, None),
        Command::VerifyAll(a) => verify_all(a),
    };
    ExitCode::from(code as u8)
}
