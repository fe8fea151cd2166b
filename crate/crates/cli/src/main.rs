use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fsvff_cli::config::{Builtin, ExperimentConfig, StepKind};
use fsvff_cli::run::{run, Command, RunError, RunOptions, EXIT_USAGE, EXIT_VALIDATION};

#[derive(Parser)]
#[command(name = "fsvff", version, about = "Variational fast forwarding of Hamiltonian simulation")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Count the eigenstates spanned by the initial state
    Neig(Common),
    /// Train the diagonalizing ansatz
    Train(Common),
    /// Compare fast-forwarded and iterated-Trotter fidelity
    #[command(name = "fastforward")]
    FastForward(Common),
    /// Read eigenvectors and relative energies off a trained ansatz
    Spectrum(Common),
    /// Phase estimation, standard or with the trained diagonal
    Qpe(Common),
    /// Hadamard-test eigenvalue estimation
    Qee(Common),
    /// Clean vs noisy cost along one parameter
    NoiseSweep(Common),
    /// Check a config and report every invalid field
    Validate(Common),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML or JSON experiment config
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in model: xy or fermi-hubbard
    #[arg(long, value_parser = parse_builtin)]
    builtin: Option<Builtin>,
    /// Chain length for the XY model
    #[arg(long)]
    n: Option<usize>,
    /// Fermi-Hubbard sites
    #[arg(long)]
    sites: Option<usize>,
    /// Pauli-sum file
    #[arg(long)]
    hamiltonian_file: Option<PathBuf>,
    /// Initial computational basis state, qubit 0 leftmost
    #[arg(long)]
    state: Option<String>,
    #[arg(long)]
    dt: Option<f64>,
    /// Use exact evolution for the step instead of a Trotter circuit
    #[arg(long)]
    exact: bool,
    /// Shots per estimate; exact probabilities when absent
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Noise model JSON; switches to density-matrix simulation
    #[arg(long)]
    noise_model: Option<PathBuf>,
    /// Use this n_eig instead of searching for it
    #[arg(long)]
    n_eig: Option<usize>,
    /// Require n_eig from the config or --n-eig
    #[arg(long)]
    skip_neig: bool,
    #[arg(long)]
    ansatz_in: Option<PathBuf>,
    #[arg(long)]
    ansatz_out: Option<PathBuf>,
    /// Fast-forward steps
    #[arg(long)]
    steps: Option<u64>,
    /// Phase-estimation precision bits
    #[arg(long)]
    bits: Option<usize>,
    #[arg(long, short = 'o')]
    output_dir: Option<PathBuf>,
}

fn parse_builtin(s: &str) -> Result<Builtin, String> {
    match s {
        "xy" => Ok(Builtin::Xy),
        "fermi-hubbard" | "fermi_hubbard" => Ok(Builtin::FermiHubbard),
        _ => Err(format!("unknown model {s:?}, expected xy or fermi-hubbard")),
    }
}

impl Common {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(b) = self.builtin {
            cfg.hamiltonian.builtin = b;
        }
        if let Some(n) = self.n {
            cfg.hamiltonian.n = n;
        }
        if let Some(s) = self.sites {
            cfg.hamiltonian.sites = s;
        }
        if let Some(f) = &self.hamiltonian_file {
            cfg.hamiltonian.file = Some(f.clone());
        }
        if let Some(s) = &self.state {
            cfg.initial_state = s.clone();
            cfg.prep_circuit = None;
        }
        if let Some(dt) = self.dt {
            cfg.delta_t = dt;
        }
        if self.exact {
            cfg.trotter.order = StepKind::Exact;
        }
        if self.shots.is_some() {
            cfg.shots = self.shots;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(p) = &self.noise_model {
            cfg.noise = Some(p.clone());
        }
        if self.n_eig.is_some() {
            cfg.n_eig = self.n_eig;
        }
        if let Some(s) = self.steps {
            cfg.fastforward.steps = s;
        }
        if let Some(b) = self.bits {
            cfg.qpe.bits = b;
        }
        if let Some(o) = &self.output_dir {
            cfg.output_dir = o.clone();
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    let (cmd, common) = match cli.command {
        Cmd::Neig(c) => (Command::Neig, c),
        Cmd::Train(c) => (Command::Train, c),
        Cmd::FastForward(c) => (Command::FastForward, c),
        Cmd::Spectrum(c) => (Command::Spectrum, c),
        Cmd::Qpe(c) => (Command::Qpe, c),
        Cmd::Qee(c) => (Command::Qee, c),
        Cmd::NoiseSweep(c) => (Command::NoiseSweep, c),
        Cmd::Validate(c) => (Command::Validate, c),
    };
    let mut cfg = match &common.config {
        Some(path) => match ExperimentConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_VALIDATION as u8);
            }
        },
        None => ExperimentConfig::default(),
    };
    common.apply(&mut cfg);
    let opts = RunOptions {
        skip_neig: common.skip_neig,
        ansatz_in: common.ansatz_in.clone(),
        ansatz_out: common.ansatz_out.clone(),
    };
    match run(cmd, &cfg, &opts) {
        Ok(()) => {
            if cmd == Command::Validate {
                println!("ok");
            } else {
                println!("wrote {}", cfg.output_dir.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(RunError::exit_code(&e) as u8)
        }
    }
}
