use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use einfields::charts::{ChartId, MetricParams};
use einfields::eval::{Plane, Quantity};
use einfields::field::AnalyticMetric;
use einfields::gw::{Quadrature, StrainConvention};
use einfields::nn::{Activation, Arch, OutputMode};
use einfields::ode::OdeOptions;
use einfields::training::{GridAxis, GridSpec, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridConfig {
    SchwarzschildSpherical { n: usize },
    SchwarzschildSphericalLog { n: usize },
    KerrBl { n: usize },
    KerrKs { n: usize },
    Gw { nt: usize, nxy: usize, nz: usize },
    Custom { axes: [GridAxis; 4] },
}

impl GridConfig {
    pub fn spec(&self) -> GridSpec {
        match *self {
            GridConfig::SchwarzschildSpherical { n } => GridSpec::schwarzschild_spherical(n),
            GridConfig::SchwarzschildSphericalLog { n } => GridSpec::schwarzschild_spherical_log(n),
            GridConfig::KerrBl { n } => GridSpec::kerr_bl(n),
            GridConfig::KerrKs { n } => GridSpec::kerr_ks(n),
            GridConfig::Gw { nt, nxy, nz } => GridSpec::gw(nt, nxy, nz),
            GridConfig::Custom { axes } => GridSpec { axes },
        }
    }

    /// Desk-scale grid whose coordinates are valid in `chart`.
    pub fn default_for(chart: ChartId) -> Self {
        use ChartId::*;
        match chart {
            SchwarzschildSpherical | SchwarzschildEF => GridConfig::SchwarzschildSphericalLog { n: 16 },
            KerrBL | KerrEF => GridConfig::KerrBl { n: 16 },
            KerrKS => GridConfig::KerrKs { n: 16 },
            SchwarzschildKS => GridConfig::Custom {
                axes: [
                    GridAxis::fixed(0.0),
                    GridAxis::new(-10.0, 10.0, 16),
                    GridAxis::new(-10.0, 10.0, 16),
                    GridAxis::new(3.0, 10.0, 16),
                ],
            },
            GWCartesianTT | MinkowskiCartesian => GridConfig::Gw { nt: 14, nxy: 4, nz: 14 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub depth: usize,
    pub width: usize,
    pub activation: Activation,
    pub output: OutputMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { depth: 3, width: 64, activation: Activation::Silu, output: OutputMode::Packed10 }
    }
}

impl ModelConfig {
    pub fn arch(&self) -> Arch {
        Arch::new(self.depth, self.width, self.activation, self.output)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub quantities: Vec<Quantity>,
    /// Upper bound on validation points drawn from the grid midpoints.
    pub points: usize,
    pub plane: Option<Plane>,
    pub fd_orders: Vec<u32>,
    pub fd_steps: Vec<f64>,
    pub fd_points: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            quantities: Quantity::ALL.to_vec(),
            points: 500,
            plane: None,
            fd_orders: vec![4, 6],
            fd_steps: vec![1e-1, 5e-2, 2e-2, 1e-2, 5e-3, 2e-3, 1e-3, 1e-4, 1e-5],
            fd_points: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeodesicConfig {
    /// Start radius in units of the Schwarzschild radius.
    pub a0: f64,
    /// Speed parameter; the circular value when absent.
    pub b0: Option<f64>,
    pub tau_end: f64,
    /// One of the named Kerr orbits; Kerr charts only.
    pub kerr_orbit: Option<String>,
    pub samples: usize,
}

impl Default for GeodesicConfig {
    fn default() -> Self {
        GeodesicConfig { a0: 3.85, b0: None, tau_end: 2000.0, kerr_orbit: None, samples: 500 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GwConfig {
    pub params: MetricParams,
    pub ring_radius: f64,
    pub ring_points: usize,
    pub t_end: f64,
    pub t_samples: usize,
    pub z: f64,
    pub psi4_nz: usize,
    pub psi4_nt: usize,
    pub l: i64,
    pub r: f64,
    pub mass: f64,
    pub convention: StrainConvention,
    pub quadrature: Quadrature,
}

impl Default for GwConfig {
    fn default() -> Self {
        GwConfig {
            params: MetricParams::gw(1e-6, 5e-7, 1.0, true),
            ring_radius: 1.0,
            ring_points: 16,
            t_end: 4.0 * PI,
            t_samples: 64,
            z: 0.0,
            psi4_nz: 24,
            psi4_nt: 24,
            l: 2,
            r: 100.0,
            mass: 1.0,
            convention: StrainConvention::MinusCross,
            quadrature: Quadrature::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub chart: ChartId,
    pub params: MetricParams,
    pub grid: Option<GridConfig>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub ode: OdeOptions,
    pub checkpoint: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub eval: EvalConfig,
    pub geodesic: GeodesicConfig,
    pub gw: GwConfig,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            chart: ChartId::SchwarzschildSpherical,
            params: MetricParams::schwarzschild(1.0),
            grid: None,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            ode: OdeOptions::default(),
            checkpoint: None,
            dataset: None,
            eval: EvalConfig::default(),
            geodesic: GeodesicConfig::default(),
            gw: GwConfig::default(),
            seed: 0,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn grid_spec(&self) -> GridSpec {
        self.grid.clone().unwrap_or_else(|| GridConfig::default_for(self.chart)).spec()
    }

    /// Checks everything that can be checked before any compute.
    pub fn validate(&self) -> Result<(), CliError> {
        AnalyticMetric::new(self.chart, self.params).map_err(invalid)?;
        let needs_mass = !matches!(self.chart, ChartId::GWCartesianTT | ChartId::MinkowskiCartesian);
        if needs_mass && !(self.params.m > 0.0) {
            return Err(invalid(format!("chart {} needs a positive mass", self.chart)));
        }
        if !self.chart.is_kerr() && self.params.a != 0.0 {
            return Err(invalid(format!("chart {} has no spin parameter", self.chart)));
        }
        self.grid_spec().validate().map_err(invalid)?;
        self.model.arch().validate().map_err(invalid)?;
        self.train.validate().map_err(invalid)?;
        for t in [self.ode.rtol, self.ode.atol] {
            if !(1e-14..=1e-3).contains(&t) {
                return Err(invalid(format!("integrator tolerance {t:e} outside [1e-14, 1e-3]")));
            }
        }
        if !(self.geodesic.tau_end.is_finite() && self.geodesic.samples >= 2) {
            return Err(invalid("geodesic tau_end must be finite and samples >= 2"));
        }
        if self.eval.points == 0 || self.eval.fd_points == 0 {
            return Err(invalid("evaluation point counts must be positive"));
        }
        if self.eval.fd_steps.iter().any(|h| !(*h > 0.0)) {
            return Err(invalid("finite-difference steps must be positive"));
        }
        for o in &self.eval.fd_orders {
            einfields::eval::FdOrder::from_order(*o).map_err(invalid)?;
        }
        if let Some(p) = &self.eval.plane {
            p.points().map_err(invalid)?;
        }
        let g = &self.gw;
        AnalyticMetric::new(ChartId::GWCartesianTT, g.params).map_err(invalid)?;
        if g.ring_points == 0 || g.t_samples < 2 || g.psi4_nz == 0 || g.psi4_nt == 0 {
            return Err(invalid("gw sample counts must be positive (t_samples >= 2)"));
        }
        if !(g.r > 0.0 && g.mass > 0.0) || g.l < 2 {
            return Err(invalid("gw extraction needs r > 0, mass > 0 and l >= 2"));
        }
        g.quadrature.validate().map_err(invalid)?;
        Ok(())
    }
}
