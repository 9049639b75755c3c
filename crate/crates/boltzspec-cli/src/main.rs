//! boltzspec: batch front end for the linearized Boltzmann spectral toolkit.
//!
//! Exit codes: 0 success, 1 invariant-check failure, 2 configuration error.

mod cache;
mod commands;
mod config;
mod output;
mod validate;

use clap::{Parser, Subcommand};
use config::RunConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "boltzspec", version, about = "Spectral analysis of the linearized hard-sphere Boltzmann operator and its Fourier modes")]
struct Cli {
    /// JSON configuration file; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for cached operator matrices.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Seed for all randomized scans.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Thread count for dense kernels (outputs are stable for a fixed value).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Velocity dimension (2 or 3).
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Maximal total polynomial degree of the trial basis.
    #[arg(long, global = true)]
    degree: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the collision frequency on a speed grid and report bounds.
    Nu {
        /// Speed grid lo:hi:steps.
        #[arg(long, default_value = "0:10:101")]
        speeds: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assemble the collision operator and cache it.
    Assemble {
        /// Per-dimension velocity quadrature order.
        #[arg(long)]
        quad_order: Option<usize>,
        /// Output path of the binary matrix.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Eigenvalues of L_xi at one frequency or over a magnitude grid.
    Spectrum {
        /// Frequency components, comma separated.
        #[arg(long)]
        xi: Option<String>,
        /// Magnitude grid lo:hi:steps (used with --direction).
        #[arg(long)]
        xi_grid: Option<String>,
        /// Unit direction for --xi-grid.
        #[arg(long)]
        direction: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trace the hydrodynamic branches over a frequency-magnitude grid.
    Branches {
        #[arg(long, default_value = "1,0,0")]
        direction: String,
        #[arg(long, default_value = "0.01:0.3:30")]
        r_grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// First- and second-order branch coefficients and their fit residuals.
    Coeffs {
        #[arg(long, default_value = "1,0,0")]
        direction: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Branch spectral projectors and their expansion diagnostics.
    Projectors {
        #[arg(long)]
        xi: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Semigroup splitting and remainder decay at one frequency.
    Semigroup {
        #[arg(long)]
        xi: String,
        /// Time grid lo:hi:steps.
        #[arg(long, default_value = "0:10:100")]
        t_grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare Gaussian-space and polynomial-space spectra.
    Enlargement {
        /// Polynomial weight exponent.
        #[arg(long)]
        k: Option<f64>,
        #[arg(long)]
        xi: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full invariant suite and report pass/fail per check.
    Validate {},
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("config error: {e}");
                return ExitCode::from(2);
            }
        },
        None => RunConfig::default(),
    };
    if let Some(d) = cli.dim {
        cfg.dimension = d;
    }
    if let Some(n) = cli.degree {
        cfg.degree = n;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if let Some(dir) = cli.cache_dir {
        cfg.cache_dir = Some(dir);
    }
    if let Err(e) = cfg.validate() {
        eprintln!("config error: {e}");
        return ExitCode::from(2);
    }
    if cfg.threads <= 1 {
        faer::set_global_parallelism(faer::Parallelism::None);
    } else {
        faer::set_global_parallelism(faer::Parallelism::Rayon(cfg.threads));
    }

    let result = match cli.command {
        Command::Nu { speeds, out } => commands::nu(&cfg, &speeds, out.as_deref()),
        Command::Assemble { quad_order, out } => {
            let mut cfg = cfg.clone();
            if let Some(q) = quad_order {
                cfg.quad_order = q;
            }
            commands::assemble(&cfg, out.as_deref())
        }
        Command::Spectrum {
            xi,
            xi_grid,
            direction,
            out,
        } => commands::spectrum_cmd(
            &cfg,
            xi.as_deref(),
            xi_grid.as_deref(),
            direction.as_deref(),
            out.as_deref(),
        ),
        Command::Branches {
            direction,
            r_grid,
            out,
        } => commands::branches(&cfg, &direction, &r_grid, out.as_deref()),
        Command::Coeffs { direction, out } => commands::coeffs(&cfg, &direction, out.as_deref()),
        Command::Projectors { xi, out } => commands::projectors(&cfg, &xi, out.as_deref()),
        Command::Semigroup { xi, t_grid, out } => {
            commands::semigroup(&cfg, &xi, &t_grid, out.as_deref())
        }
        Command::Enlargement { k, xi, out } => {
            let mut cfg = cfg.clone();
            if let Some(k) = k {
                cfg.weight_k = k;
            }
            commands::enlargement(&cfg, &xi, out.as_deref())
        }
        Command::Validate {} => validate::run(&cfg),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Command-level error with the exit-code policy.
#[derive(Debug)]
pub enum CmdError {
    Config(String),
    Check(String),
    Runtime(String),
}

impl CmdError {
    fn exit_code(&self) -> u8 {
        match self {
            CmdError::Config(_) => 2,
            CmdError::Check(_) | CmdError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CmdError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CmdError::Config(m) => write!(f, "configuration: {m}"),
            CmdError::Check(m) => write!(f, "check failed: {m}"),
            CmdError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl From<boltzspec::Error> for CmdError {
    fn from(e: boltzspec::Error) -> Self {
        CmdError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Runtime(e.to_string())
    }
}
