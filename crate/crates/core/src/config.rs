//! TOML run configuration shared by the command-line tools.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DiffOperator, ImageGrid, Offset, Stencil};
use crate::sim::NoiseSpec;
use crate::solver::{Architecture, Schedule, DEFAULT_GROUP_SIZES};
use crate::tomo::{Geometry, DEFAULT_SUBRAYS};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub stencil: Option<StencilConfig>,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub simulate: Option<SimulateConfig>,
    #[serde(default)]
    pub reconstruct: Option<ReconstructConfig>,
    #[serde(default)]
    pub evaluate: Option<EvaluateConfig>,
    #[serde(default)]
    pub tune: Option<TuneConfig>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub width: usize,
    pub pixel_size: f64,
    pub grid_diameter: f64,
    pub roi_diameter: f64,
    pub n_bins: usize,
    pub bin_size: f64,
    pub n_angles: usize,
    #[serde(default = "default_subrays")]
    pub subrays: usize,
}

fn default_subrays() -> usize {
    DEFAULT_SUBRAYS
}

impl GeometryConfig {
    pub fn grid(&self) -> Result<ImageGrid> {
        ImageGrid::new(self.width, self.grid_diameter, self.roi_diameter, self.pixel_size)
    }

    pub fn geometry(&self) -> Result<Geometry> {
        Geometry::with_subrays(self.grid()?, self.n_bins, self.bin_size, self.n_angles, self.subrays)
    }

    /// Same detector and angles on a lattice without support restriction,
    /// used to simulate the whole object.
    pub fn full_geometry(&self) -> Result<Geometry> {
        Geometry::with_subrays(ImageGrid::full(self.width, self.pixel_size)?, self.n_bins, self.bin_size, self.n_angles, self.subrays)
    }
}

/// Offset pairs `[[dr, dc], [dr, dc]]` of the difference operators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StencilConfig {
    pub pairs: Vec<[[i32; 2]; 2]>,
}

impl StencilConfig {
    pub fn stencil(&self) -> Result<Stencil> {
        Stencil::new(
            self.pairs
                .iter()
                .map(|[a, b]| DiffOperator::new(Offset::new(a[0], a[1]), Offset::new(b[0], b[1])))
                .collect::<Result<Vec<_>>>()?,
        )
    }
}

/// A scalar applied to every block or one value per block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerBlock {
    Scalar(f64),
    List(Vec<f64>),
}

impl PerBlock {
    pub fn expand(&self, n: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            PerBlock::Scalar(v) => Ok(vec![*v; n]),
            PerBlock::List(v) if v.len() == n => Ok(v.clone()),
            PerBlock::List(v) => Err(Error::Config(format!("{what} has {} entries, expected {n}", v.len()))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepsConfig {
    /// Must be the string `"auto"`.
    Auto(String),
    Explicit { sigma: f64, tau: PerBlock },
}

impl Default for StepsConfig {
    fn default() -> Self {
        StepsConfig::Auto("auto".into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "d_beta")]
    pub beta: f64,
    #[serde(default = "d_kappa")]
    pub kappa: f64,
    #[serde(default = "d_alpha")]
    pub alpha: PerBlock,
    #[serde(default = "d_xi")]
    pub xi: f64,
    #[serde(default = "d_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub steps: StepsConfig,
    #[serde(default = "d_outer")]
    pub outer: usize,
    #[serde(default = "d_inner")]
    pub inner: usize,
    #[serde(default = "d_schedule")]
    pub schedule: Schedule,
    /// Initial data dual `-init_scale · F y`; defaults to zero for the
    /// reweighted solver and to the FBP scale for the unrolled network.
    #[serde(default)]
    pub init_scale: Option<f64>,
    #[serde(default = "d_groups")]
    pub groups: Vec<usize>,
    #[serde(default = "d_arch")]
    pub architecture: Architecture,
    /// Per-layer parameters (JSON) for the unrolled network.
    #[serde(default)]
    pub params: Option<PathBuf>,
    #[serde(default = "d_lambda")]
    pub lambda_max: f64,
    #[serde(default = "d_tv_outer")]
    pub tv_outer: usize,
    #[serde(default = "d_tv_inner")]
    pub tv_inner: usize,
}

pub const DEFAULT_BETA: f64 = 1000.0;
pub const DEFAULT_KAPPA: f64 = 0.035;
pub const DEFAULT_ALPHA: f64 = 2.0;
pub const DEFAULT_XI: f64 = 6.0;
pub const DEFAULT_LAMBDA_MAX: f64 = 0.05;

fn d_beta() -> f64 {
    DEFAULT_BETA
}
fn d_kappa() -> f64 {
    DEFAULT_KAPPA
}
fn d_alpha() -> PerBlock {
    PerBlock::Scalar(DEFAULT_ALPHA)
}
fn d_xi() -> f64 {
    DEFAULT_XI
}
fn d_gamma() -> f64 {
    1.0
}
fn d_outer() -> usize {
    6
}
fn d_inner() -> usize {
    200
}
fn d_schedule() -> Schedule {
    Schedule::group(1)
}
fn d_groups() -> Vec<usize> {
    DEFAULT_GROUP_SIZES.to_vec()
}
fn d_arch() -> Architecture {
    Architecture::A1
}
fn d_lambda() -> f64 {
    DEFAULT_LAMBDA_MAX
}
fn d_tv_outer() -> usize {
    20
}
fn d_tv_inner() -> usize {
    100
}

impl Default for SolverConfig {
    fn default() -> Self {
        toml::from_str("").expect("all solver fields have defaults")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhantomKind {
    Desk,
    DeskWire,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub out_dir: PathBuf,
    #[serde(default = "d_count")]
    pub count: usize,
    #[serde(default = "d_phantom")]
    pub phantom: PhantomKind,
}

fn d_count() -> usize {
    1
}
fn d_phantom() -> PhantomKind {
    PhantomKind::Random
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Fbp,
    TvHier,
    Rdbfb,
    Unrolled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructConfig {
    pub method: Method,
    pub sinogram: PathBuf,
    pub output: PathBuf,
    #[serde(default)]
    pub trace: Option<PathBuf>,
    #[serde(default)]
    pub png: Option<PathBuf>,
    #[serde(default)]
    pub metadata: Option<PathBuf>,
    /// Reference image for the PSNR column of the trace.
    #[serde(default)]
    pub reference: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateItem {
    pub id: String,
    pub method: String,
    pub reconstruction: PathBuf,
    pub reference: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateConfig {
    pub output: PathBuf,
    pub items: Vec<EvaluateItem>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneConfig {
    pub sinogram: PathBuf,
    pub reference: PathBuf,
    pub output: PathBuf,
    #[serde(default = "d_budget")]
    pub budget: usize,
}

fn d_budget() -> usize {
    200
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Make relative paths relative to the config file's directory.
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.solver.params.as_mut() {
            fix(p);
        }
        if let Some(s) = self.simulate.as_mut() {
            fix(&mut s.out_dir);
        }
        if let Some(r) = self.reconstruct.as_mut() {
            fix(&mut r.sinogram);
            fix(&mut r.output);
            for p in [&mut r.trace, &mut r.png, &mut r.metadata, &mut r.reference].into_iter().flatten() {
                fix(p);
            }
        }
        if let Some(e) = self.evaluate.as_mut() {
            fix(&mut e.output);
            for it in &mut e.items {
                fix(&mut it.reconstruction);
                fix(&mut it.reference);
            }
        }
        if let Some(t) = self.tune.as_mut() {
            fix(&mut t.sinogram);
            fix(&mut t.reference);
            fix(&mut t.output);
        }
    }

    pub fn stencil(&self) -> Result<Stencil> {
        match &self.stencil {
            Some(s) => s.stencil(),
            None => Ok(Stencil::semilocal()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.geometry()?;
        self.stencil()?;
        if let StepsConfig::Auto(s) = &self.solver.steps {
            if s != "auto" {
                return Err(Error::Config(format!("solver.steps must be \"auto\" or a table, got {s:?}")));
            }
        }
        if let Some(n) = &self.noise {
            n.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[geometry]
width = 32
pixel_size = 1.0
grid_diameter = 24.0
roi_diameter = 16.0
n_bins = 20
bin_size = 1.0
n_angles = 15
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = RunConfig::from_toml(MINIMAL).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.solver.groups, vec![6, 5, 5, 4, 4, 4]);
        assert_eq!(cfg.solver.steps, StepsConfig::Auto("auto".into()));
        assert_eq!(cfg.stencil().unwrap().len(), 6);
    }

    #[test]
    fn missing_key_is_named() {
        let text = MINIMAL.replace("n_bins = 20\n", "");
        match RunConfig::from_toml(&text) {
            Err(Error::Config(m)) => assert!(m.contains("n_bins"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\nbogus = 3\n");
        assert!(RunConfig::from_toml(&text).is_err());
        let text = format!("{MINIMAL}\n[solver]\nbeta = 1.0\nbetta = 2.0\n");
        assert!(RunConfig::from_toml(&text).is_err());
    }

    #[test]
    fn explicit_steps_and_per_block_alpha() {
        let text = format!("{MINIMAL}\n[solver]\nalpha = [1, 2, 3, 4, 5, 6]\nsteps = {{ sigma = 2.0, tau = 50.0 }}\nschedule = \"DRR\"\n");
        let cfg = RunConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.solver.alpha.expand(6, "alpha").unwrap()[5], 6.0);
        assert!(cfg.solver.alpha.expand(5, "alpha").is_err());
        assert!(matches!(cfg.solver.steps, StepsConfig::Explicit { .. }));
        assert_eq!(cfg.solver.schedule.len(), 3);
    }

    #[test]
    fn roundtrip_through_toml() {
        let text = format!("{MINIMAL}\n[reconstruct]\nmethod = \"tv-hier\"\nsinogram = \"s.bin\"\noutput = \"x.bin\"\n");
        let cfg = RunConfig::from_toml(&text).unwrap();
        let back = RunConfig::from_toml(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, back);
    }
}
