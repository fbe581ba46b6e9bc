//! Run configuration.
//!
//! A run is described by a single TOML file with five required sections
//! (`model`, `time`, `experiments`, `output`, plus zero or more `[[coupling]]`
//! tables) and three optional ones (`schemes`, `tolerances`, `seed`).  Parsing
//! is total: every field is checked here, unknown keys are rejected, and any
//! problem is reported with the offending field path so a failing run never
//! starts computing.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coupling::{Coupling, Profile};
use crate::error::{Error, Result};
use crate::fock::{FockBasis, ModeGrid};
use crate::propagators::TimeGrid;

/// Experiments a run can request, in the order they execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Bounds,
    Smoothness,
    Propagate,
    Smatrix,
    Causality,
    Qcheck,
    Sweep,
    Dyson,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Bounds,
        ExperimentKind::Smoothness,
        ExperimentKind::Propagate,
        ExperimentKind::Smatrix,
        ExperimentKind::Causality,
        ExperimentKind::Qcheck,
        ExperimentKind::Sweep,
        ExperimentKind::Dyson,
    ];

    /// Stable lowercase name, used for config entries and report file stems.
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Bounds => "bounds",
            ExperimentKind::Smoothness => "smoothness",
            ExperimentKind::Propagate => "propagate",
            ExperimentKind::Smatrix => "smatrix",
            ExperimentKind::Causality => "causality",
            ExperimentKind::Qcheck => "qcheck",
            ExperimentKind::Sweep => "sweep",
            ExperimentKind::Dyson => "dyson",
        }
    }

    /// One-line description for `list-experiments`.
    pub fn summary(self) -> &'static str {
        match self {
            ExperimentKind::Bounds => {
                "kernel norm against the Young-chain bound, plus scaled sandwich norms"
            }
            ExperimentKind::Smoothness => {
                "finite-difference decay rates of the first two time derivatives"
            }
            ExperimentKind::Propagate => {
                "reference propagator: unitarity, composition, and scheme defects"
            }
            ExperimentKind::Smatrix => "scattering matrix: unitarity and shift invariance",
            ExperimentKind::Causality => {
                "factorization defect for temporally separated coupling pulses"
            }
            ExperimentKind::Qcheck => {
                "relative form operator: base-point identity, hermiticity, positivity"
            }
            ExperimentKind::Sweep => "interaction norm ratios across truncation refinements",
            ExperimentKind::Dyson => "scattering matrix against low-order series expansions",
        }
    }
}

/// Temporal or spatial profile entry.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProfileSection {
    Bump { center: f64, halfwidth: f64 },
    Gaussian { center: f64, sigma: f64 },
}

impl ProfileSection {
    fn build(&self) -> Result<Profile> {
        match *self {
            ProfileSection::Bump { center, halfwidth } => Profile::bump(center, halfwidth),
            ProfileSection::Gaussian { center, sigma } => Profile::gaussian(center, sigma),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub mass: f64,
    pub box_length: f64,
    pub mode_cutoff: i64,
    pub particle_cutoff: u32,
    /// Margin added on top of the estimated semibound when a positive shift
    /// is required.
    pub shift_c: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    pub amplitude: f64,
    pub temporal: ProfileSection,
    pub spatial: ProfileSection,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    /// Window start is `-t1`.
    pub t1: f64,
    /// Window end.
    pub t2: f64,
    /// Base step; refinement studies halve it per level.
    pub dt: f64,
    #[serde(default = "default_levels")]
    pub refinement_levels: u32,
}

fn default_levels() -> u32 {
    3
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SchemesSection {
    /// Regularization indexes swept by the `propagate` experiment.
    pub yosida_n: Vec<u32>,
    /// Slice counts swept by the `propagate` experiment.
    pub yosida_k: Vec<u32>,
}

impl Default for SchemesSection {
    fn default() -> SchemesSection {
        SchemesSection { yosida_n: vec![4, 16, 64], yosida_k: vec![8, 32] }
    }
}

/// Pass bounds applied by the experiments.  Every field has a default; a
/// config only lists the ones it overrides.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub unitarity: f64,
    pub composition: f64,
    pub shift_invariance: f64,
    pub chain_relative: f64,
    pub smoothness_slope_floor: f64,
    pub causality_defect: f64,
    pub causality_order: f64,
    pub causality_order_slack: f64,
    pub qcheck_hermiticity: f64,
    pub qcheck_eigenvalue_floor: f64,
    pub embedding_excess: f64,
    pub sweep_growth: f64,
    pub dyson_stability: f64,
    pub dyson_exponent_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Tolerances {
        Tolerances {
            unitarity: 1e-10,
            composition: 1e-8,
            shift_invariance: 1e-10,
            chain_relative: 1e-6,
            smoothness_slope_floor: 0.9,
            causality_defect: 1e-6,
            causality_order: 2.0,
            causality_order_slack: 0.3,
            qcheck_hermiticity: 1e-10,
            qcheck_eigenvalue_floor: 0.0,
            embedding_excess: 1e-10,
            sweep_growth: 2.0,
            dyson_stability: 0.2,
            dyson_exponent_slack: 0.2,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Report directory; the `--out` flag overrides it.
    pub directory: String,
}

/// Parsed and validated run description.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub coupling: Vec<CouplingSection>,
    pub time: TimeSection,
    #[serde(default)]
    pub schemes: SchemesSection,
    pub experiments: Vec<ExperimentKind>,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub output: OutputSection,
    #[serde(default)]
    pub seed: u64,
}

fn field_err(path: &str, problem: impl std::fmt::Display) -> Error {
    Error::Config(format!("{path}: {problem}"))
}

fn require_positive(path: &str, value: f64) -> Result<()> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(field_err(path, format_args!("must be positive and finite, got {value}")));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Parses and validates a config file.
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        ExperimentConfig::from_toml(&text)
    }

    /// Parses and validates config text.
    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Rejects any value the experiments cannot consume, naming the field.
    pub fn validate(&self) -> Result<()> {
        require_positive("model.mass", self.model.mass)?;
        require_positive("model.box_length", self.model.box_length)?;
        require_positive("model.shift_c", self.model.shift_c)?;
        if self.model.mode_cutoff < 0 {
            return Err(field_err(
                "model.mode_cutoff",
                format_args!("must be nonnegative, got {}", self.model.mode_cutoff),
            ));
        }

        if self.time.t1 < 0.0 || !self.time.t1.is_finite() {
            return Err(field_err(
                "time.t1",
                format_args!("must be nonnegative and finite, got {}", self.time.t1),
            ));
        }
        require_positive("time.t2", self.time.t2)?;
        require_positive("time.dt", self.time.dt)?;
        if self.time.refinement_levels < 1 {
            return Err(field_err("time.refinement_levels", "must be at least 1"));
        }

        for (i, section) in self.coupling.iter().enumerate() {
            let path = |leaf: &str| format!("coupling[{i}].{leaf}");
            if !section.amplitude.is_finite() {
                return Err(field_err(
                    &path("amplitude"),
                    format_args!("must be finite, got {}", section.amplitude),
                ));
            }
            let temporal =
                section.temporal.build().map_err(|e| field_err(&path("temporal"), e))?;
            let spatial = section.spatial.build().map_err(|e| field_err(&path("spatial"), e))?;
            if let Some((lo, hi)) = temporal.support() {
                if lo <= -self.time.t1 || hi >= self.time.t2 {
                    return Err(field_err(
                        &path("temporal"),
                        format_args!(
                            "support ({lo}, {hi}) must lie strictly inside the window ({}, {})",
                            -self.time.t1, self.time.t2
                        ),
                    ));
                }
            }
            let half = 0.5 * self.model.box_length;
            if let Some((lo, hi)) = spatial.support() {
                if lo <= -half || hi >= half {
                    return Err(field_err(
                        &path("spatial"),
                        format_args!(
                            "support ({lo}, {hi}) must lie strictly inside the box ({}, {half})",
                            -half
                        ),
                    ));
                }
            }
        }

        if self.experiments.is_empty() {
            return Err(field_err("experiments", "must name at least one experiment"));
        }
        for (i, kind) in self.experiments.iter().enumerate() {
            if self.experiments[..i].contains(kind) {
                return Err(field_err(
                    "experiments",
                    format_args!("lists \"{}\" twice", kind.name()),
                ));
            }
        }
        let selected = |kind| self.experiments.contains(&kind);
        if selected(ExperimentKind::Causality) {
            if self.coupling.len() != 2 {
                return Err(field_err(
                    "coupling",
                    format_args!(
                        "the causality experiment needs exactly two coupling terms, got {}",
                        self.coupling.len()
                    ),
                ));
            }
            if self.time.refinement_levels < 2 {
                return Err(field_err(
                    "time.refinement_levels",
                    "the causality experiment needs at least 2 levels",
                ));
            }
        }
        if selected(ExperimentKind::Dyson) && self.time.refinement_levels < 2 {
            return Err(field_err(
                "time.refinement_levels",
                "the dyson experiment needs at least 2 levels",
            ));
        }

        if selected(ExperimentKind::Propagate) {
            if self.schemes.yosida_n.is_empty() {
                return Err(field_err("schemes.yosida_n", "must list at least one index"));
            }
            if self.schemes.yosida_k.is_empty() {
                return Err(field_err("schemes.yosida_k", "must list at least one slice count"));
            }
        }
        for (i, &n) in self.schemes.yosida_n.iter().enumerate() {
            if n < 1 {
                return Err(field_err(
                    &format!("schemes.yosida_n[{i}]"),
                    "must be at least 1",
                ));
            }
        }
        for (i, &k) in self.schemes.yosida_k.iter().enumerate() {
            if k < 1 {
                return Err(field_err(
                    &format!("schemes.yosida_k[{i}]"),
                    "must be at least 1",
                ));
            }
        }

        let t = &self.tolerances;
        require_positive("tolerances.unitarity", t.unitarity)?;
        require_positive("tolerances.composition", t.composition)?;
        require_positive("tolerances.shift_invariance", t.shift_invariance)?;
        require_positive("tolerances.chain_relative", t.chain_relative)?;
        require_positive("tolerances.smoothness_slope_floor", t.smoothness_slope_floor)?;
        require_positive("tolerances.causality_defect", t.causality_defect)?;
        require_positive("tolerances.causality_order", t.causality_order)?;
        require_positive("tolerances.causality_order_slack", t.causality_order_slack)?;
        require_positive("tolerances.qcheck_hermiticity", t.qcheck_hermiticity)?;
        if !t.qcheck_eigenvalue_floor.is_finite() {
            return Err(field_err("tolerances.qcheck_eigenvalue_floor", "must be finite"));
        }
        require_positive("tolerances.embedding_excess", t.embedding_excess)?;
        if !(t.sweep_growth >= 1.0) || !t.sweep_growth.is_finite() {
            return Err(field_err(
                "tolerances.sweep_growth",
                format_args!("must be at least 1, got {}", t.sweep_growth),
            ));
        }
        require_positive("tolerances.dyson_stability", t.dyson_stability)?;
        require_positive("tolerances.dyson_exponent_slack", t.dyson_exponent_slack)?;

        if self.output.directory.is_empty() {
            return Err(field_err("output.directory", "must not be empty"));
        }

        // Exercised early so a bad window or step fails at parse time with
        // the same message the propagators would produce.
        self.grid()?;
        self.basis()?;
        Ok(())
    }

    /// Mode grid from the model section.
    pub fn mode_grid(&self) -> Result<ModeGrid> {
        ModeGrid::new(self.model.mass, self.model.box_length, self.model.mode_cutoff)
    }

    /// Enumerated Fock basis from the model section.
    pub fn basis(&self) -> Result<Arc<FockBasis>> {
        FockBasis::enumerate(self.mode_grid()?, self.model.particle_cutoff)
    }

    /// Time grid from the time section.
    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.time.t1, self.time.t2, self.time.dt)
            .map_err(|e| Error::Config(format!("time: {e}")))
    }

    /// Sum of the configured coupling terms; empty list means g = 0.
    pub fn coupling(&self) -> Result<Coupling> {
        let mut total = Coupling::zero();
        for section in &self.coupling {
            let term = Coupling::product(
                section.amplitude,
                section.temporal.build()?,
                section.spatial.build()?,
            )?;
            total = total.plus(&term);
        }
        Ok(total)
    }

    /// True when every configured term has zero amplitude.
    pub fn coupling_is_zero(&self) -> bool {
        self.coupling.iter().all(|s| s.amplitude == 0.0)
    }

    /// Digest of the resolved configuration, defaults and overrides included,
    /// recorded in the run manifest and used to key report identity.
    pub fn digest(&self) -> String {
        let canonical = toml::to_string(self).expect("config serialization cannot fail");
        let mut hasher = Sha256::new();
        hasher.update(b"phi4lab-config\n");
        hasher.update(canonical.as_bytes());
        let bytes = hasher.finalize();
        let mut out = String::with_capacity(64);
        for b in bytes {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }
}
