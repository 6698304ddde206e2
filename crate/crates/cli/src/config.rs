use std::path::{Path, PathBuf};

use cnls::dynamics::EvolveConfig;
use cnls::minimize::{ConstraintSpec, MinimizeOptions};
use cnls::profiles::Family;
use cnls::stability::{BlowupConfig, FamilyKind, SweepConfig};
use cnls::{Grid, SystemParams};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
    pub output_dir: PathBuf,
    #[serde(default = "default_params", deserialize_with = "params_with_defaults")]
    pub params: SystemParams,
    pub grid: GridSpec,
    pub minimize: MinimizeOptions,
    /// Manifold for the `minimize` command.
    pub constraint: Option<ConstraintSpec>,
    pub evolve: EvolveBlock,
    pub sweep: SweepBlock,
    pub blowup: BlowupBlock,
}

fn default_params() -> SystemParams {
    SystemParams {
        p: 2.0,
        beta: 0.0,
        omega1: 1.0,
        omega2: 1.0,
    }
}

/// `[params]` with each key optional.
#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ParamsTable {
    p: f64,
    beta: f64,
    omega1: f64,
    omega2: f64,
}

impl Default for ParamsTable {
    fn default() -> Self {
        let d = default_params();
        Self {
            p: d.p,
            beta: d.beta,
            omega1: d.omega1,
            omega2: d.omega2,
        }
    }
}

fn params_with_defaults<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<SystemParams, D::Error> {
    let t = ParamsTable::deserialize(d)?;
    Ok(SystemParams {
        p: t.p,
        beta: t.beta,
        omega1: t.omega1,
        omega2: t.omega2,
    })
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: 0,
            output_dir: PathBuf::from("out"),
            params: default_params(),
            grid: GridSpec::default(),
            minimize: MinimizeOptions::default(),
            constraint: None,
            evolve: EvolveBlock::default(),
            sweep: SweepBlock::default(),
            blowup: BlowupBlock::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub points: usize,
    /// Defaults to `20/√min(ω₁, ω₂, 1)`.
    pub half_width: Option<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            dim: 1,
            points: 512,
            half_width: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum InitialData {
    /// A family member with optional per-component amplitude factors.
    Member {
        family: Family,
        #[serde(default)]
        theta1: f64,
        #[serde(default)]
        theta2: f64,
        #[serde(default)]
        shift: Vec<f64>,
        #[serde(default = "one")]
        amplitude1: f64,
        #[serde(default = "one")]
        amplitude2: f64,
    },
    /// The computed ground state.
    GroundState,
    /// A snapshot written by an earlier run.
    Snapshot { path: PathBuf },
}

fn one() -> f64 {
    1.0
}

impl Default for InitialData {
    fn default() -> Self {
        Self::Member {
            family: Family::ScalarFirst,
            theta1: 0.0,
            theta2: 0.0,
            shift: Vec::new(),
            amplitude1: 1.0,
            amplitude2: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolveBlock {
    pub initial: InitialData,
    #[serde(flatten)]
    pub run: EvolveConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepBlock {
    pub family: FamilyKind,
    #[serde(flatten)]
    pub run: SweepConfig,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            family: FamilyKind::G,
            run: SweepConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BlowupBlock {
    pub family: FamilyKind,
    /// Dilation factor (supercritical) or amplitude factor (critical), > 1.
    pub factor: f64,
    #[serde(flatten)]
    pub run: BlowupConfig,
}

impl Default for BlowupBlock {
    fn default() -> Self {
        Self {
            family: FamilyKind::G,
            factor: 1.1,
            run: BlowupConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
    }

    pub fn grid(&self) -> Result<Grid> {
        let g = &self.grid;
        if !(1..=3).contains(&g.dim) {
            return Err(CliError::Config(format!("grid.dim must be 1, 2 or 3 (got {})", g.dim)));
        }
        let half_width = g.half_width.unwrap_or_else(|| Grid::default_half_width(&self.params));
        Ok(Grid::new(g.dim, g.points, half_width)?)
    }

    /// Checks everything that does not depend on the command.
    pub fn validate(&self) -> Result<()> {
        self.params.validate_for_dim(self.grid.dim.clamp(1, 3))?;
        self.grid()?;
        let m = &self.minimize;
        if m.tol.is_nan() || m.tol <= 0.0 {
            return Err(CliError::Config(format!("minimize.tol must be > 0 (got {})", m.tol)));
        }
        if m.max_iter == 0 {
            return Err(CliError::Config("minimize.max_iter must be >= 1".into()));
        }
        if !(m.initial_step > 0.0 && m.max_step >= m.initial_step) {
            return Err(CliError::Config(format!(
                "minimize steps need 0 < initial_step <= max_step (got {}, {})",
                m.initial_step, m.max_step
            )));
        }
        Ok(())
    }
}
