//! Subcommand execution and artifact writing.

use std::fmt;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use fsvff::ansatz::{givens_brickwall, hardware_xy_ansatz, DiagonalAnsatz, FsvffAnsatz};
use fsvff::cost::{self, TrainingSet};
use fsvff::evolution::{StepOperator, TimeEvolution};
use fsvff::fastforward::{fast_forward_report, SimPath};
use fsvff::gramian::{find_neig, NeigResult, OverlapMethod};
use fsvff::hamiltonian::{build_fermi_hubbard, build_xy, exact_evolution, trotter_circuit, TrotterOrder, TrotterSpec};
use fsvff::noise::{noisy_cost, resilience_sweep, SliceParam};
use fsvff::optimizer::{adaptive_structure_search, multi_start_descent, TrainingResult};
use fsvff::spectroscopy::{extract_eigvectors, qee_spectrum, qpe, QpeMode, QpeTarget, SpectrumEstimate};
use fsvff::statevector::{bitstring, parse_bitstring, Circuit, Gate};
use fsvff::{rng, Error, NoiseModel, PauliSum, State};

use crate::config::{load_noise_model, AnsatzKind, Builtin, Diagnostic, ExperimentConfig, StepKind};
use crate::prep::parse_prep_circuit;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Neig,
    Train,
    FastForward,
    Spectrum,
    Qpe,
    Qee,
    NoiseSweep,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Neig => "neig",
            Self::Train => "train",
            Self::FastForward => "fastforward",
            Self::Spectrum => "spectrum",
            Self::Qpe => "qpe",
            Self::Qee => "qee",
            Self::NoiseSweep => "noise-sweep",
            Self::Validate => "validate",
        }
    }
}

/// Run-time options that are not part of the experiment itself.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub skip_neig: bool,
    pub ansatz_in: Option<PathBuf>,
    pub ansatz_out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum RunError {
    Validation(Vec<Diagnostic>),
    Numerical(String),
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => EXIT_VALIDATION,
            Self::Numerical(_) => EXIT_NUMERICAL,
            Self::Io(_) => EXIT_IO,
        }
    }

    fn invalid(field: &str, reason: impl Into<String>) -> Self {
        Self::Validation(vec![Diagnostic {
            field: field.into(),
            reason: reason.into(),
        }])
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Validation(d) => {
                for (i, x) in d.iter().enumerate() {
                    if i > 0 {
                        writeln!(f)?;
                    }
                    write!(f, "invalid {x}")?;
                }
                Ok(())
            }
            Self::Numerical(m) => write!(f, "numerical failure: {m}"),
            Self::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::Divergence { .. } | Error::Ambiguity { .. } | Error::UnreliablePhase(_) | Error::Inconclusive { .. } | Error::Extraction(_) => {
                Self::Numerical(e.to_string())
            }
            Error::Io(_) => Self::Io(e.to_string()),
            other => Self::invalid("input", other.to_string()),
        }
    }
}

type Res<T> = Result<T, RunError>;

fn read(path: &Path, field: &str) -> Res<String> {
    std::fs::read_to_string(path).map_err(|e| RunError::invalid(field, format!("{}: {e}", path.display())))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Files written by one run, with their digests for the manifest.
struct Artifacts {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Artifacts {
    fn new(dir: &Path) -> Res<Self> {
        std::fs::create_dir_all(dir).map_err(|e| RunError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Res<()> {
        self.write_to(&self.dir.join(name), contents)
    }

    fn write_to(&mut self, path: &Path, contents: &str) -> Res<()> {
        std::fs::write(path, contents).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
        let label = path.strip_prefix(&self.dir).unwrap_or(path).display().to_string();
        self.files.push((label, sha256_hex(contents.as_bytes())));
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> Res<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| RunError::Io(e.to_string()))? + "\n";
        self.write(name, &text)
    }
}

/// Hash over the echoed config and the bytes of every input file it names.
fn input_hash(cfg: &ExperimentConfig, opts: &RunOptions) -> String {
    let mut h = Sha256::new();
    h.update(cfg.to_json().as_bytes());
    let inputs = [&cfg.hamiltonian.file, &cfg.prep_circuit, &cfg.noise, &opts.ansatz_in];
    for path in inputs.into_iter().flatten() {
        h.update(path.display().to_string().as_bytes());
        h.update(std::fs::read(path).unwrap_or_default());
    }
    hex::encode(h.finalize())
}

struct Problem {
    h: PauliSum,
    psi0: State,
    step: StepOperator<f64>,
    continuous: TimeEvolution<f64>,
}

impl Problem {
    fn build(cfg: &ExperimentConfig) -> Res<Self> {
        let h = match &cfg.hamiltonian.file {
            Some(path) => PauliSum::parse(&read(path, "hamiltonian.file")?).map_err(|e| RunError::invalid("hamiltonian.file", e.to_string()))?,
            None => match cfg.hamiltonian.builtin {
                Builtin::Xy => build_xy(cfg.hamiltonian.n)?,
                Builtin::FermiHubbard => build_fermi_hubbard(cfg.hamiltonian.sites, cfg.hamiltonian.j, cfg.hamiltonian.u)?,
            },
        };
        let psi0 = match &cfg.prep_circuit {
            Some(path) => {
                let c = parse_prep_circuit(&read(path, "prep_circuit")?).map_err(|e| RunError::invalid("prep_circuit", e.to_string()))?;
                let mut s = State::zero_state(c.n_qubits())?;
                c.apply(&mut s, &[], false)?;
                s
            }
            None => State::basis_state(&cfg.initial_state).map_err(|e| RunError::invalid("initial_state", e.to_string()))?,
        };
        let dt = cfg.delta_t;
        let substeps = cfg.trotter.n_substeps;
        let (step, continuous) = match cfg.trotter.order {
            StepKind::Exact => (StepOperator::Dense(exact_evolution(&h, dt)?), TimeEvolution::exact(&h)?),
            kind => {
                let order = if kind == StepKind::First { TrotterOrder::First } else { TrotterOrder::Second };
                let spec = TrotterSpec::new(order, dt, substeps)?;
                (StepOperator::Circuit(trotter_circuit(&h, &spec)?), TimeEvolution::trotter(&h, order, substeps)?)
            }
        };
        Ok(Self { h, psi0, step, continuous })
    }

    fn training_set(&self, n_eig: usize) -> Res<TrainingSet<f64>> {
        Ok(TrainingSet::new(self.psi0.clone(), self.step.clone(), n_eig)?.with_continuous(self.continuous.clone())?)
    }
}

fn noise_model(cfg: &ExperimentConfig) -> Res<Option<NoiseModel>> {
    cfg.noise
        .as_ref()
        .map(|p| load_noise_model(p).map_err(|e| RunError::invalid("noise", e)))
        .transpose()
}

fn sampling_seed(cfg: &ExperimentConfig) -> u64 {
    rng::derive_seed(cfg.seed, "sampling", 0)
}

fn determine_neig(cfg: &ExperimentConfig, p: &Problem, opts: &RunOptions) -> Res<(usize, Option<NeigResult>)> {
    if let Some(k) = cfg.n_eig {
        return Ok((k, None));
    }
    if opts.skip_neig {
        return Err(RunError::invalid("n_eig", "--skip-neig needs n_eig in the config"));
    }
    let method = if cfg.shots.is_some() { OverlapMethod::Hadamard } else { OverlapMethod::Exact };
    let r = find_neig(&p.step, &p.psi0, cfg.neig.k_max, cfg.neig.threshold, method, cfg.shots, sampling_seed(cfg))?;
    Ok((r.n_eig, Some(r)))
}

fn fresh_ansatz(cfg: &ExperimentConfig, n: usize) -> Res<FsvffAnsatz<f64>> {
    let dt = cfg.delta_t;
    let kind = match cfg.ansatz.kind {
        AnsatzKind::Auto if n == 2 => AnsatzKind::HardwareXy,
        AnsatzKind::Auto => AnsatzKind::GivensBrickwall,
        k => k,
    };
    let mut a = match kind {
        AnsatzKind::HardwareXy => hardware_xy_ansatz(dt),
        AnsatzKind::GivensBrickwall | AnsatzKind::Auto => {
            let w = givens_brickwall(n, cfg.ansatz.layers);
            FsvffAnsatz::new(w.clone(), DiagonalAnsatz::single_z(n, dt), vec![0.0; w.n_params()])?
        }
    };
    if !cfg.ansatz.z_strings.is_empty() {
        let masks = cfg
            .ansatz
            .z_strings
            .iter()
            .map(|z| parse_bitstring(z))
            .collect::<fsvff::Result<Vec<_>>>()
            .map_err(|e| RunError::invalid("ansatz.z_strings", e.to_string()))?;
        let d = DiagonalAnsatz::new(n, masks.clone(), vec![0.0; masks.len()], dt)?;
        a = FsvffAnsatz::new(a.w.clone(), d, a.theta.clone())?;
    }
    let mut g = rng::stream(cfg.seed, "init");
    let s = cfg.ansatz.init_scale;
    for t in a.theta.iter_mut() {
        *t = if s > 0.0 { g.random_range(-s..=s) } else { 0.0 };
    }
    Ok(a)
}

fn load_ansatz(cfg: &ExperimentConfig, opts: &RunOptions) -> Res<FsvffAnsatz<f64>> {
    let path = opts.ansatz_in.clone().unwrap_or_else(|| cfg.output_dir.join("ansatz.txt"));
    let text = read(&path, "ansatz_in")?;
    let a = FsvffAnsatz::from_text(&text).map_err(|e| RunError::invalid("ansatz_in", e.to_string()))?;
    let drift: f64 = a.delta_t() - cfg.delta_t;
    if drift.abs() > 1e-12 * cfg.delta_t.abs().max(1.0) {
        return Err(RunError::invalid(
            "ansatz_in",
            format!("ansatz was trained at delta_t = {}, config has {}", a.delta_t(), cfg.delta_t),
        ));
    }
    Ok(a)
}

fn check_width(a: &FsvffAnsatz<f64>, p: &Problem) -> Res<()> {
    if a.n_qubits() != p.psi0.n_qubits() {
        return Err(RunError::invalid(
            "ansatz",
            format!("ansatz acts on {} qubits, problem on {}", a.n_qubits(), p.psi0.n_qubits()),
        ));
    }
    Ok(())
}

fn train(cfg: &ExperimentConfig, p: &Problem, n_eig: usize, opts: &RunOptions, out: &mut Artifacts) -> Res<()> {
    let ts = p.training_set(n_eig)?;
    let start = match &opts.ansatz_in {
        Some(_) => load_ansatz(cfg, opts)?,
        None => fresh_ansatz(cfg, p.psi0.n_qubits())?,
    };
    check_width(&start, p)?;
    let mut opt = cfg.optimizer.clone();
    opt.seed = rng::derive_seed(cfg.seed, "optimizer", 0);
    opt.shots = cfg.shots;
    let r: TrainingResult<f64> = match &cfg.structure_search {
        Some(ss) => {
            let mut ss = ss.clone();
            ss.seed = rng::derive_seed(cfg.seed, "structure", 0);
            adaptive_structure_search(&ts, &start, &opt, &ss, &cfg.cost_variant)?
        }
        None if opts.ansatz_in.is_some() => fsvff::optimizer::gradient_descent(&ts, &start, &opt, &cfg.cost_variant)?,
        None => multi_start_descent(&ts, &start, &opt, &cfg.cost_variant, cfg.ansatz.restarts, cfg.ansatz.init_scale, cfg.ansatz.restart_target)?,
    };
    let text = r.ansatz.to_text()?;
    match &opts.ansatz_out {
        Some(path) => out.write_to(path, &text)?,
        None => out.write("ansatz.txt", &text)?,
    }
    out.write("trace.csv", &r.trace_csv())?;
    let noisy = match noise_model(cfg)? {
        Some(m) => Some(noisy_cost(&ts, &r.ansatz, &m, &cfg.cost_variant, opt.seed)?.value),
        None => None,
    };
    let rounds: Vec<_> = r.rounds.iter().collect();
    out.write_json(
        "train.json",
        &json!({
            "n_eig": n_eig,
            "cost_variant": cfg.cost_variant,
            "final_cost": r.final_cost,
            "final_cost_noisy": noisy,
            "global_cost": cost::cost_global(&ts, &r.ansatz, None, 0)?.value,
            "iterations": r.iterations,
            "plateaued": r.plateaued,
            "accepted_rounds": r.accepted_rounds,
            "rounds": rounds,
            "theta": r.ansatz.theta,
            "gamma": r.ansatz.d.gammas(),
        }),
    )
}

fn fastforward(cfg: &ExperimentConfig, p: &Problem, opts: &RunOptions, out: &mut Artifacts) -> Res<()> {
    let a = load_ansatz(cfg, opts)?;
    check_width(&a, p)?;
    let ts = p.training_set(1)?;
    let model = noise_model(cfg)?;
    let path = if model.is_some() { SimPath::Noisy } else { SimPath::Pure };
    let ff = &cfg.fastforward;
    let r = fast_forward_report(&a, &ts, ff.steps, ff.delta, ff.reference, path, model.as_ref())?;
    out.write("fidelity.csv", &r.curve.to_csv())?;
    out.write("trotter_fidelity.csv", &r.trotter_curve.to_csv())?;
    let min_ff = r.curve.fidelity.iter().copied().fold(1.0, f64::min);
    out.write_json(
        "fastforward.json",
        &json!({
            "steps": ff.steps,
            "reference": ff.reference,
            "path": path,
            "delta": r.delta,
            "min_fidelity": min_ff,
            "t_delta_ff": r.t_delta_ff,
            "t_delta_trot": r.t_delta_trot,
            "ratio": r.ratio,
            "bound_constant": r.bound_constant,
        }),
    )
}

fn spectrum_estimate(cfg: &ExperimentConfig, p: &Problem, a: &FsvffAnsatz<f64>) -> Res<SpectrumEstimate<f64>> {
    Ok(extract_eigvectors(a, &p.psi0, cfg.shots, sampling_seed(cfg), cfg.spectrum.threshold)?)
}

fn rayleigh(h: &fsvff::Matrix, v: &State) -> (f64, f64) {
    let hv = h.mul_vec(v.amplitudes());
    let e = fsvff::linalg::inner(v.amplitudes(), &hv).re;
    let res = hv.iter().zip(v.amplitudes()).map(|(a, b)| (a - b * e).norm_sqr()).sum::<f64>().sqrt();
    (e, res)
}

fn spectrum_json(p: &Problem, est: &SpectrumEstimate<f64>) -> Res<serde_json::Value> {
    let hm = p.h.dense_matrix()?;
    let states: Vec<_> = est
        .eigen_basis_states
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let (e, res) = rayleigh(&hm, &est.eigen_vectors[i]);
            let amps: Vec<[f64; 2]> = est.eigen_vectors[i].amplitudes().iter().map(|z| [z.re, z.im]).collect();
            json!({
                "basis_state": b,
                "weight": est.weights[i],
                "phase": est.phases[i],
                "energy_relative": est.energies_relative[i],
                "rayleigh_energy": e,
                "rayleigh_residual": res,
                "eigenvector": amps,
            })
        })
        .collect();
    Ok(json!({
        "delta_t": est.delta_t,
        "eigenstates": states,
        "degenerate_groups": est.degenerate_groups,
    }))
}

fn spectrum(cfg: &ExperimentConfig, p: &Problem, opts: &RunOptions, out: &mut Artifacts) -> Res<()> {
    let a = load_ansatz(cfg, opts)?;
    check_width(&a, p)?;
    let est = spectrum_estimate(cfg, p, &a)?;
    out.write("spectrum.csv", &est.to_csv())?;
    out.write_json("spectrum.json", &spectrum_json(p, &est)?)
}

fn qee(cfg: &ExperimentConfig, p: &Problem, opts: &RunOptions, out: &mut Artifacts) -> Res<()> {
    let a = load_ansatz(cfg, opts)?;
    check_width(&a, p)?;
    let mut est = spectrum_estimate(cfg, p, &a)?;
    qee_spectrum(&a, &mut est, cfg.shots, rng::derive_seed(cfg.seed, "qee", 0))?;
    out.write("qee.csv", &est.to_csv())?;
    out.write_json("qee.json", &spectrum_json(p, &est)?)
}

fn qpe_run(cfg: &ExperimentConfig, p: &Problem, opts: &RunOptions, out: &mut Artifacts) -> Res<()> {
    let a = load_ansatz(cfg, opts)?;
    check_width(&a, p)?;
    let n = a.n_qubits();
    let b = match &cfg.qpe.basis_state {
        Some(s) => {
            if s.len() != n {
                return Err(RunError::invalid("qpe.basis_state", format!("{} bits for {n} qubits", s.len())));
            }
            parse_bitstring(s).map_err(|e| RunError::invalid("qpe.basis_state", e.to_string()))?
        }
        None => {
            let est = spectrum_estimate(cfg, p, &a)?;
            let best = (0..est.weights.len())
                .max_by(|&i, &j| est.weights[i].total_cmp(&est.weights[j]))
                .ok_or_else(|| RunError::Numerical("no basis state above the peak threshold".into()))?;
            parse_bitstring(&est.eigen_basis_states[best])?
        }
    };
    let model = noise_model(cfg)?;
    let seed = rng::derive_seed(cfg.seed, "sampling", 1);
    let r = match cfg.qpe.mode {
        QpeMode::Enhanced => qpe(&QpeTarget::Diagonal { d: &a.d, basis_state: b }, cfg.qpe.bits, cfg.delta_t, cfg.shots, seed, model.as_ref())?,
        QpeMode::Standard => {
            // prepare the learned eigenvector W|b> and phase-estimate U itself
            let mut prep = Circuit::new(n);
            for q in 0..n {
                if b >> (n - 1 - q) & 1 == 1 {
                    prep.push(Gate::x(q))?;
                }
            }
            prep.extend(&a.w.bind(&a.theta)?)?;
            qpe(&QpeTarget::Step { step: &p.step, prep: &prep }, cfg.qpe.bits, cfg.delta_t, cfg.shots, seed, model.as_ref())?
        }
    };
    out.write("qpe.csv", &r.to_csv())?;
    let (best, prob) = r.most_likely();
    let phase = parse_bitstring(&best)? as f64 / (1u64 << cfg.qpe.bits) as f64;
    out.write_json(
        "qpe.json",
        &json!({
            "basis_state": bitstring(b, n),
            "result": r,
            "most_likely": best,
            "probability": prob,
            "phase_estimate": phase,
        }),
    )
}

fn noise_sweep(cfg: &ExperimentConfig, p: &Problem, n_eig: usize, opts: &RunOptions, out: &mut Artifacts) -> Res<()> {
    let model = noise_model(cfg)?.ok_or_else(|| RunError::invalid("noise", "noise-sweep needs a noise model"))?;
    let a = load_ansatz(cfg, opts)?;
    check_width(&a, p)?;
    let ts = p.training_set(n_eig)?;
    let sw = &cfg.noise_sweep;
    let centre = match sw.param {
        SliceParam::Theta(l) => a.theta.get(l).copied(),
        SliceParam::Gamma(l) => a.d.gammas().get(l).copied(),
    }
    .ok_or_else(|| RunError::invalid("noise_sweep.param", "index out of range for the ansatz"))?;
    let half = sw.points / 2;
    let cell = sw.span / sw.points as f64;
    let grid: Vec<f64> = (0..sw.points).map(|i| centre + (i as f64 - half as f64) * cell).collect();
    let s = resilience_sweep(&ts, &a, sw.param, &grid, &model, &cfg.cost_variant, rng::derive_seed(cfg.seed, "sampling", 2))?;
    out.write("sweep.csv", &s.to_csv())?;
    out.write_json(
        "sweep.json",
        &json!({
            "param": sw.param,
            "argmin_clean": s.argmin_clean,
            "argmin_noisy": s.argmin_noisy,
            "displacement": s.displacement(),
            "cost_clean_at_argmin": s.clean[s.argmin_clean],
            "cost_noisy_at_argmin": s.noisy[s.argmin_noisy],
        }),
    )
}

/// Runs one subcommand, writing artifacts and `manifest.json` under
/// `cfg.output_dir`. `validate` writes nothing.
pub fn run(cmd: Command, cfg: &ExperimentConfig, opts: &RunOptions) -> Res<()> {
    let diags = cfg.validate();
    if !diags.is_empty() {
        return Err(RunError::Validation(diags));
    }
    if cmd == Command::Validate {
        return Ok(());
    }
    let p = Problem::build(cfg)?;
    let mut out = Artifacts::new(&cfg.output_dir)?;
    out.write("config.json", &(cfg.to_json() + "\n"))?;
    let needs_neig = matches!(cmd, Command::Neig | Command::Train | Command::NoiseSweep);
    let n_eig = if needs_neig {
        let (k, found) = determine_neig(cfg, &p, opts)?;
        if let Some(r) = &found {
            out.write_json("n_eig.json", r)?;
        } else if cmd == Command::Neig {
            out.write_json("n_eig.json", &json!({ "n_eig": k, "source": "config" }))?;
        }
        k
    } else {
        1
    };
    match cmd {
        Command::Neig | Command::Validate => {}
        Command::Train => train(cfg, &p, n_eig, opts, &mut out)?,
        Command::FastForward => fastforward(cfg, &p, opts, &mut out)?,
        Command::Spectrum => spectrum(cfg, &p, opts, &mut out)?,
        Command::Qpe => qpe_run(cfg, &p, opts, &mut out)?,
        Command::Qee => qee(cfg, &p, opts, &mut out)?,
        Command::NoiseSweep => noise_sweep(cfg, &p, n_eig, opts, &mut out)?,
    }
    let files: Vec<_> = out.files.iter().map(|(f, h)| json!({ "file": f, "sha256": h })).collect();
    let manifest = json!({
        "subcommand": cmd.name(),
        "seed": cfg.seed,
        "input_hash": input_hash(cfg, opts),
        "versions": { "fsvff-cli": env!("CARGO_PKG_VERSION"), "fsvff-core": fsvff::VERSION },
        "config": cfg,
        "outputs": files,
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| RunError::Io(e.to_string()))? + "\n";
    let path = cfg.output_dir.join("manifest.json");
    std::fs::write(&path, text).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))
}
