//! Experiment configuration: TOML (`key = value` with sections) or JSON,
//! plus field-level validation.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use fsvff::cost::CostVariant;
use fsvff::fastforward::Reference;
use fsvff::noise::{NoiseModelSpec, SliceParam, MAX_DENSITY_QUBITS};
use fsvff::optimizer::{OptimizerConfig, StructureSearchConfig};
use fsvff::spectroscopy::{QpeMode, DEFAULT_PEAK_THRESHOLD};
use fsvff::statevector::parse_bitstring;
use fsvff::{NoiseModel, PauliSum};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    Xy,
    FermiHubbard,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HamiltonianConfig {
    pub builtin: Builtin,
    /// Chain length for `xy`.
    pub n: usize,
    /// Sites for `fermi_hubbard` (twice as many qubits).
    pub sites: usize,
    pub j: f64,
    pub u: f64,
    /// Pauli-sum text file (`coeff letters` per line); overrides `builtin`.
    pub file: Option<PathBuf>,
}

impl Default for HamiltonianConfig {
    fn default() -> Self {
        Self {
            builtin: Builtin::Xy,
            n: 2,
            sites: 2,
            j: 1.0,
            u: 2.0,
            file: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    First,
    Second,
    /// Dense `exp(-i H dt)`.
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrotterConfig {
    pub order: StepKind,
    pub n_substeps: usize,
}

impl Default for TrotterConfig {
    fn default() -> Self {
        Self {
            order: StepKind::First,
            n_substeps: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnsatzKind {
    /// `hardware_xy` on 2 qubits, `givens_brickwall` otherwise.
    Auto,
    HardwareXy,
    GivensBrickwall,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnsatzConfig {
    pub kind: AnsatzKind,
    pub layers: usize,
    /// Z-string masks of D as bitstrings; empty means one Z per qubit.
    pub z_strings: Vec<String>,
    /// Initial theta is uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
    /// Seeded restarts until the cost reaches `restart_target`.
    pub restarts: usize,
    pub restart_target: f64,
}

impl Default for AnsatzConfig {
    fn default() -> Self {
        Self {
            kind: AnsatzKind::Auto,
            layers: 2,
            z_strings: Vec::new(),
            init_scale: 0.1,
            restarts: 1,
            restart_target: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeigConfig {
    pub k_max: usize,
    pub threshold: f64,
}

impl Default for NeigConfig {
    fn default() -> Self {
        Self {
            k_max: 16,
            threshold: fsvff::gramian::DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FastForwardConfig {
    pub steps: u64,
    pub delta: f64,
    pub reference: Reference,
}

impl Default for FastForwardConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            delta: 0.1,
            reference: Reference::IteratedTrotter,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub threshold: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_PEAK_THRESHOLD,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QpeConfig {
    pub bits: usize,
    pub mode: QpeMode,
    /// Basis state of D to read; defaults to the heaviest peak of
    /// `W^dagger |psi_0>`.
    pub basis_state: Option<String>,
}

impl Default for QpeConfig {
    fn default() -> Self {
        Self {
            bits: 3,
            mode: QpeMode::Enhanced,
            basis_state: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub param: SliceParam,
    /// Grid width, centred on the current parameter value.
    pub span: f64,
    pub points: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            param: SliceParam::Gamma(0),
            span: 2.0 * std::f64::consts::PI,
            points: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub hamiltonian: HamiltonianConfig,
    /// Computational basis state, qubit 0 leftmost.
    pub initial_state: String,
    /// Preparation circuit file; overrides `initial_state`.
    pub prep_circuit: Option<PathBuf>,
    pub delta_t: f64,
    pub trotter: TrotterConfig,
    pub ansatz: AnsatzConfig,
    pub cost_variant: CostVariant,
    pub optimizer: OptimizerConfig,
    pub structure_search: Option<StructureSearchConfig>,
    /// Noise model JSON file; its presence selects the noisy path.
    pub noise: Option<PathBuf>,
    pub shots: Option<u64>,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Used instead of a Gramian search when set or when n_eig search is
    /// skipped.
    pub n_eig: Option<usize>,
    pub neig: NeigConfig,
    pub fastforward: FastForwardConfig,
    pub spectrum: SpectrumConfig,
    pub qpe: QpeConfig,
    pub noise_sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            hamiltonian: HamiltonianConfig::default(),
            initial_state: "10".into(),
            prep_circuit: None,
            delta_t: 0.5,
            trotter: TrotterConfig::default(),
            ansatz: AnsatzConfig::default(),
            cost_variant: CostVariant::Global,
            optimizer: OptimizerConfig::default(),
            structure_search: None,
            noise: None,
            shots: None,
            seed: 0,
            output_dir: PathBuf::from("out"),
            n_eig: None,
            neig: NeigConfig::default(),
            fastforward: FastForwardConfig::default(),
            spectrum: SpectrumConfig::default(),
            qpe: QpeConfig::default(),
            noise_sweep: SweepConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub field: String,
    pub reason: String,
}

impl Diagnostic {
    fn new(field: &str, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

impl ExperimentConfig {
    /// JSON when the text starts with `{`, TOML otherwise.
    pub fn parse(text: &str) -> Result<Self, String> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| e.to_string())
        } else {
            toml::from_str(text).map_err(|e| e.to_string())
        }
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Register width implied by the Hamiltonian section, if it can be read.
    pub fn n_qubits(&self) -> Option<usize> {
        match &self.hamiltonian.file {
            Some(path) => std::fs::read_to_string(path).ok().and_then(|t| PauliSum::parse(&t).ok()).map(|h| h.n_qubits()),
            None => Some(match self.hamiltonian.builtin {
                Builtin::Xy => self.hamiltonian.n,
                Builtin::FermiHubbard => 2 * self.hamiltonian.sites,
            }),
        }
    }

    /// Every problem found, each tagged with its field path. Empty iff the
    /// configuration is runnable.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let h = &self.hamiltonian;
        match &h.file {
            Some(path) => match std::fs::read_to_string(path) {
                Ok(text) => {
                    if let Err(e) = PauliSum::parse(&text) {
                        out.push(Diagnostic::new("hamiltonian.file", e.to_string()));
                    }
                }
                Err(e) => out.push(Diagnostic::new("hamiltonian.file", format!("{}: {e}", path.display()))),
            },
            None => match h.builtin {
                Builtin::Xy if h.n < 2 => out.push(Diagnostic::new("hamiltonian.n", format!("XY chain needs at least 2 qubits, got {}", h.n))),
                Builtin::FermiHubbard if h.sites < 2 => {
                    out.push(Diagnostic::new("hamiltonian.sites", format!("Fermi-Hubbard chain needs at least 2 sites, got {}", h.sites)))
                }
                _ => {}
            },
        }
        if !(h.j.is_finite() && h.u.is_finite()) {
            out.push(Diagnostic::new("hamiltonian", "j and u must be finite"));
        }
        let n = self.n_qubits();
        if let Some(n) = n {
            if n > fsvff::statevector::MAX_STATE_QUBITS {
                out.push(Diagnostic::new(
                    "hamiltonian",
                    format!("{n} qubits exceeds the state-vector limit of {}", fsvff::statevector::MAX_STATE_QUBITS),
                ));
            }
        }

        match &self.prep_circuit {
            Some(path) => match std::fs::read_to_string(path) {
                Ok(text) => match crate::prep::parse_prep_circuit(&text) {
                    Ok(c) if n.is_some_and(|n| n != c.n_qubits()) => out.push(Diagnostic::new(
                        "prep_circuit",
                        format!("circuit acts on {} qubits, Hamiltonian on {}", c.n_qubits(), n.unwrap_or(0)),
                    )),
                    Ok(_) => {}
                    Err(e) => out.push(Diagnostic::new("prep_circuit", e.to_string())),
                },
                Err(e) => out.push(Diagnostic::new("prep_circuit", format!("{}: {e}", path.display()))),
            },
            None => match parse_bitstring(&self.initial_state) {
                Err(e) => out.push(Diagnostic::new("initial_state", e.to_string())),
                Ok(_) if n.is_some_and(|n| n != self.initial_state.len()) => out.push(Diagnostic::new(
                    "initial_state",
                    format!("{} bits for a {}-qubit Hamiltonian", self.initial_state.len(), n.unwrap_or(0)),
                )),
                Ok(_) => {}
            },
        }

        if !self.delta_t.is_finite() || self.delta_t == 0.0 {
            out.push(Diagnostic::new("delta_t", format!("must be finite and nonzero, got {}", self.delta_t)));
        }
        if self.trotter.n_substeps == 0 {
            out.push(Diagnostic::new("trotter.n_substeps", "must be at least 1"));
        }

        let a = &self.ansatz;
        if a.kind == AnsatzKind::HardwareXy && n.is_some_and(|n| n != 2) {
            out.push(Diagnostic::new("ansatz.kind", format!("hardware_xy acts on 2 qubits, Hamiltonian has {}", n.unwrap_or(0))));
        }
        if a.kind != AnsatzKind::HardwareXy && a.layers == 0 {
            out.push(Diagnostic::new("ansatz.layers", "must be at least 1"));
        }
        for (i, z) in a.z_strings.iter().enumerate() {
            match parse_bitstring(z) {
                Err(e) => out.push(Diagnostic::new(&format!("ansatz.z_strings[{i}]"), e.to_string())),
                Ok(0) => out.push(Diagnostic::new(&format!("ansatz.z_strings[{i}]"), "all-zero mask is a global phase")),
                Ok(_) if n.is_some_and(|n| n != z.len()) => {
                    out.push(Diagnostic::new(&format!("ansatz.z_strings[{i}]"), format!("{} bits for {} qubits", z.len(), n.unwrap_or(0))))
                }
                Ok(_) => {}
            }
        }
        if !(a.init_scale >= 0.0 && a.init_scale.is_finite()) {
            out.push(Diagnostic::new("ansatz.init_scale", format!("must be non-negative, got {}", a.init_scale)));
        }
        if a.restarts == 0 {
            out.push(Diagnostic::new("ansatz.restarts", "must be at least 1"));
        }

        if let CostVariant::Randomized { batch, t_max, bias } = self.cost_variant {
            if batch == 0 {
                out.push(Diagnostic::new("cost_variant.batch", "must be at least 1"));
            }
            if !(t_max > 0.0 && t_max.is_finite()) {
                out.push(Diagnostic::new("cost_variant.t_max", format!("must be positive, got {t_max}")));
            }
            if !(bias > 0.0 && bias.is_finite()) {
                out.push(Diagnostic::new("cost_variant.bias", format!("must be positive, got {bias}")));
            }
        }
        if let Err(e) = self.optimizer.validate() {
            out.push(Diagnostic::new("optimizer", e.to_string()));
        }
        if let Some(ss) = &self.structure_search {
            if let Err(e) = ss.validate() {
                out.push(Diagnostic::new("structure_search", e.to_string()));
            }
        }

        if let Some(path) = &self.noise {
            match load_noise_model(path) {
                Ok(_) => {}
                Err(e) => out.push(Diagnostic::new("noise", e)),
            }
            if let Some(n) = n {
                if n > MAX_DENSITY_QUBITS {
                    out.push(Diagnostic::new(
                        "noise",
                        format!("noisy path needs a density matrix; {n} qubits exceeds the cutoff of {MAX_DENSITY_QUBITS}"),
                    ));
                }
            }
        }
        if self.shots == Some(0) {
            out.push(Diagnostic::new("shots", "must be at least 1 when set"));
        }
        if self.n_eig == Some(0) {
            out.push(Diagnostic::new("n_eig", "must be at least 1 when set"));
        }
        if self.neig.k_max == 0 {
            out.push(Diagnostic::new("neig.k_max", "must be at least 1"));
        }
        if !(self.neig.threshold > 0.0) {
            out.push(Diagnostic::new("neig.threshold", "must be positive"));
        }
        if self.fastforward.steps == 0 {
            out.push(Diagnostic::new("fastforward.steps", "must be at least 1"));
        }
        if !(self.fastforward.delta > 0.0 && self.fastforward.delta < 1.0) {
            out.push(Diagnostic::new("fastforward.delta", format!("must lie in (0, 1), got {}", self.fastforward.delta)));
        }
        if self.fastforward.reference == Reference::ExactH && self.trotter.order != StepKind::Exact {
            out.push(Diagnostic::new("fastforward.reference", "exact_h needs trotter.order = \"exact\""));
        }
        if !(self.spectrum.threshold > 0.0 && self.spectrum.threshold <= 1.0) {
            out.push(Diagnostic::new("spectrum.threshold", format!("must lie in (0, 1], got {}", self.spectrum.threshold)));
        }
        if !(1..=8).contains(&self.qpe.bits) {
            out.push(Diagnostic::new("qpe.bits", format!("must lie in 1..=8, got {}", self.qpe.bits)));
        }
        if let Some(b) = &self.qpe.basis_state {
            if let Err(e) = parse_bitstring(b) {
                out.push(Diagnostic::new("qpe.basis_state", e.to_string()));
            }
        }
        if self.noise_sweep.points < 100 {
            out.push(Diagnostic::new("noise_sweep.points", format!("needs at least 100 points, got {}", self.noise_sweep.points)));
        }
        if !(self.noise_sweep.span > 0.0 && self.noise_sweep.span.is_finite()) {
            out.push(Diagnostic::new("noise_sweep.span", "must be positive"));
        }
        out
    }
}

pub fn load_noise_model(path: &Path) -> Result<NoiseModel, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let spec = NoiseModelSpec::from_json(&text).map_err(|e| e.to_string())?;
    NoiseModel::from_spec(&spec).map_err(|e| e.to_string())
}
