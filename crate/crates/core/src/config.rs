//! Versioned JSON experiment configuration.

use crate::admissibility::AdmissibilityOptions;
use crate::classical::{FlowOptions, NewtonOptions};
use crate::error::{Error, Result};
use crate::field::{Bump, FourierTerm, ScalarField};
use crate::metric::{build_torus_example, MetricFamily, SymTensorField, TorusExample};
use crate::moments::MomentBudget;
use crate::quantum::KrylovOptions;
use crate::theory::{BetaConfig, MeasureMode};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

/// A coefficient given either as a constant or as a truncated Fourier series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Constant(f64),
    Series(Vec<FourierTerm>),
}

impl Default for Coefficient {
    fn default() -> Self {
        Coefficient::Constant(0.0)
    }
}

impl Coefficient {
    pub fn field(&self) -> ScalarField {
        match self {
            Coefficient::Constant(c) => ScalarField::constant(*c),
            Coefficient::Series(t) => ScalarField::fourier(t.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtraDirection {
    #[serde(default)]
    pub xx: Coefficient,
    #[serde(default)]
    pub xy: Coefficient,
    #[serde(default)]
    pub yy: Coefficient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub epsilon: f64,
    pub k: usize,
    pub a1: Coefficient,
    pub b1: Coefficient,
    pub a2: Coefficient,
    pub b2: Coefficient,
    pub a3: Coefficient,
    #[serde(default)]
    pub bump: Option<Bump>,
    #[serde(default)]
    pub extra: Vec<ExtraDirection>,
    #[serde(default)]
    pub potential: Coefficient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    pub energy: f64,
    pub t: f64,
    pub x: [f64; 2],
    pub m: [i64; 2],
    /// Semiclassical parameter; defaults to `√(E − V̄)/|m|`.
    #[serde(default)]
    pub h: Option<f64>,
    /// Parameter point for single-state commands; defaults to `0`.
    #[serde(default)]
    pub u: Option<Vec<f64>>,
    #[serde(default = "default_indices")]
    pub uprime_indices: [usize; 2],
}

fn default_indices() -> [usize; 2] {
    [0, 1]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassicalConfig {
    pub tol: f64,
    pub s_max: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Start point and duration for the `flow` command.
    pub z0: Option<[f64; 4]>,
    pub s: f64,
    /// Shell points sampled by the `uprime` command.
    pub uprime_samples: usize,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        ClassicalConfig {
            tol: 1e-12,
            s_max: 2.0,
            newton_tol: 1e-11,
            newton_max_iter: 30,
            z0: None,
            s: 0.5,
            uprime_samples: 64,
        }
    }
}

impl ClassicalConfig {
    pub fn flow_options(&self) -> FlowOptions {
        FlowOptions { tol: self.tol, s_max: self.s_max, ..FlowOptions::default() }
    }

    pub fn newton_options(&self) -> NewtonOptions {
        NewtonOptions {
            tol: self.newton_tol,
            max_iter: self.newton_max_iter,
            flow: self.flow_options(),
            ..NewtonOptions::default()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantumConfig {
    /// Grid size; defaults to the resolution rule.
    pub grid: Option<usize>,
    pub krylov: KrylovOptions,
}


#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureConfig {
    pub profile: String,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig { profile: "plateau".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentsConfig {
    pub nodes_per_axis: usize,
    pub qmc_points: usize,
    pub qmc_replicates: usize,
    pub max_nodes: usize,
    pub p_max: u32,
}

impl Default for MomentsConfig {
    fn default() -> Self {
        let b = MomentBudget::default();
        MomentsConfig {
            nodes_per_axis: b.nodes_per_axis,
            qmc_points: b.qmc_points,
            qmc_replicates: b.qmc_replicates,
            max_nodes: b.max_nodes,
            p_max: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayConfig {
    pub lattice: Vec<[i64; 2]>,
    pub p: Vec<u32>,
}

impl Default for DecayConfig {
    fn default() -> Self {
        DecayConfig { lattice: vec![[3, 4], [5, 12], [7, 24]], p: vec![1, 3] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EchoConfig {
    pub t_max: f64,
    pub steps: usize,
}

impl Default for EchoConfig {
    fn default() -> Self {
        EchoConfig { t_max: 1.0, steps: 20 }
    }
}

impl EchoConfig {
    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| self.t_max * i as f64 / self.steps.max(1) as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BetaSection {
    pub mode: MeasureMode,
    pub patch_points: Option<usize>,
    pub n_theta: usize,
    pub urest_nodes: usize,
    /// Time used for the prediction; defaults to `physics.t`.
    pub t: Option<f64>,
}

impl Default for BetaSection {
    fn default() -> Self {
        BetaSection { mode: MeasureMode::Liouville, patch_points: None, n_theta: 64, urest_nodes: 31, t: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub family: FamilyConfig,
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub measure: MeasureConfig,
    #[serde(default)]
    pub classical: ClassicalConfig,
    #[serde(default)]
    pub quantum: QuantumConfig,
    #[serde(default)]
    pub moments: MomentsConfig,
    #[serde(default)]
    pub decay: DecayConfig,
    #[serde(default)]
    pub echo: EchoConfig,
    #[serde(default)]
    pub beta: BetaSection,
    #[serde(default)]
    pub admissibility: AdmissibilityOptions,
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(path, format!("must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::validation(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::validation(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        positive("family.epsilon", self.family.epsilon)?;
        if self.family.k != 3 + self.family.extra.len() {
            return Err(Error::validation(
                "family.k",
                format!("k = {} but the family has {} directions", self.family.k, 3 + self.family.extra.len()),
            ));
        }
        if let Some(b) = &self.family.bump {
            Bump::new(b.center, b.radius).map_err(|e| match e {
                Error::Validation { message, .. } => Error::validation("family.bump.radius", message),
                e => e,
            })?;
        }
        positive("physics.energy", self.physics.energy)?;
        if !self.physics.t.is_finite() {
            return Err(Error::validation("physics.t", "must be finite"));
        }
        if self.physics.m == [0, 0] {
            return Err(Error::validation("physics.m", "needs a nonzero lattice vector"));
        }
        if let Some(h) = self.physics.h {
            positive("physics.h", h)?;
        }
        if let Some(u) = &self.physics.u {
            if u.len() != self.family.k {
                return Err(Error::validation("physics.u", format!("expected {} values, got {}", self.family.k, u.len())));
            }
        }
        let [i, j] = self.physics.uprime_indices;
        if i == j || i >= self.family.k || j >= self.family.k {
            return Err(Error::validation("physics.uprime_indices", "need two distinct indices below k"));
        }
        if self.measure.profile != "plateau" {
            return Err(Error::validation("measure.profile", "only the plateau profile is implemented"));
        }
        positive("classical.tol", self.classical.tol)?;
        positive("classical.s_max", self.classical.s_max)?;
        positive("classical.newton_tol", self.classical.newton_tol)?;
        if let Some(n) = self.quantum.grid {
            if n < 8 || !n.is_power_of_two() {
                return Err(Error::validation("quantum.grid", format!("grid must be a power of two >= 8, got {n}")));
            }
        }
        if self.quantum.krylov.dim < 2 {
            return Err(Error::validation("quantum.krylov.dim", "needs at least 2"));
        }
        positive("quantum.krylov.tol", self.quantum.krylov.tol)?;
        if self.moments.nodes_per_axis < 3 {
            return Err(Error::validation("moments.nodes_per_axis", "needs at least 3"));
        }
        if self.echo.steps == 0 {
            return Err(Error::validation("echo.steps", "needs at least one step"));
        }
        positive("echo.t_max", self.echo.t_max)?;
        Ok(())
    }

    pub fn build_family(&self) -> Result<MetricFamily> {
        let f = &self.family;
        let example = TorusExample {
            a1: f.a1.field(),
            b1: f.b1.field(),
            a2: f.a2.field(),
            b2: f.b2.field(),
            a3: f.a3.field(),
            bump: f.bump,
            extra: f
                .extra
                .iter()
                .map(|d| SymTensorField { xx: d.xx.field(), xy: d.xy.field(), yy: d.yy.field() })
                .collect(),
            epsilon: f.epsilon,
            potential: f.potential.field(),
        };
        build_torus_example(&example)
    }

    pub fn h(&self, family: &MetricFamily) -> f64 {
        self.physics.h.unwrap_or_else(|| {
            let gap = self.physics.energy - family.potential().mean_coefficient();
            crate::moments::lattice_h(gap, self.physics.m)
        })
    }

    pub fn u(&self) -> Vec<f64> {
        self.physics.u.clone().unwrap_or_else(|| vec![0.0; self.family.k])
    }

    pub fn budget(&self) -> MomentBudget {
        MomentBudget {
            nodes_per_axis: self.moments.nodes_per_axis,
            qmc_points: self.moments.qmc_points,
            qmc_replicates: self.moments.qmc_replicates,
            max_nodes: self.moments.max_nodes,
            grid: self.quantum.grid,
            krylov: self.quantum.krylov,
        }
    }

    pub fn beta_config(&self) -> BetaConfig {
        let p = &self.physics;
        let mut cfg = BetaConfig::new(p.x, self.beta.t.unwrap_or(p.t), p.energy, p.uprime_indices, self.beta.mode);
        if let Some(n) = self.beta.patch_points {
            cfg.patch_points = n;
        }
        cfg.n_theta = self.beta.n_theta;
        cfg.urest_nodes = self.beta.urest_nodes;
        cfg.newton = self.classical.newton_options();
        cfg
    }
}
