//! TOML run configuration and its translation into solver inputs.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::CliError;
use crate::analysis::{mms_forcing, MmsCoefficients, MmsEntry};
use crate::coefficients::{
    io, CoefficientSextet, EmbeddingConstants, Expr, FieldKind, Forcing, SliceMode, SpaceTimeField, TimeGrid,
};
use crate::kwc::{build_adjoint, build_linearized, KwcSystem, ModelFunctions, Mobility, PhaseFieldPair, Perturbation};
use crate::spatial::{Discretization, Domain};
use crate::stepper::DEFAULT_TOL;

/// A scalar field: a number, a closed-form expression, or a field file
/// (`.bin` for the binary format, text otherwise).
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ScalarSpec {
    Number(f64),
    File(PathBuf),
    Expr(Expr),
}

/// A vector or matrix field: one file, or one scalar entry per component
/// (row-major for matrices).
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ComponentsSpec {
    File(PathBuf),
    Components(Vec<ScalarSpec>),
}

#[derive(Debug, Clone, Deserialize)]
pub struct DomainConfig {
    #[serde(flatten)]
    pub domain: Domain,
    pub resolution: usize,
}

#[derive(Debug, Clone, Deserialize)]
pub struct KwcConfig {
    pub eta: ScalarSpec,
    pub theta: ScalarSpec,
    #[serde(default = "default_mobility")]
    pub mobility: Mobility,
    #[serde(default = "default_g")]
    pub g: Perturbation,
    #[serde(default = "one")]
    pub alpha0: ScalarSpec,
    pub alpha0_dt: Option<ScalarSpec>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Require `θ = 0` on the boundary.
    #[serde(default)]
    pub theta_dirichlet: bool,
}

fn default_mobility() -> Mobility {
    Mobility::Quadratic { min: 0.01 }
}
fn default_g() -> Perturbation {
    Perturbation::Linear { slope: 1.0 }
}
fn one() -> ScalarSpec {
    ScalarSpec::Number(1.0)
}
fn default_eps() -> f64 {
    0.05
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum CoefficientSource {
    /// Space-time constants.
    Constant {
        a: f64,
        #[serde(default)]
        b: f64,
        #[serde(default)]
        mu: f64,
        #[serde(default)]
        lambda: f64,
        omega: Vec<f64>,
        amat: Vec<f64>,
    },
    /// Catalog expressions and/or field files.
    #[serde(alias = "catalog", alias = "files")]
    Fields {
        a: ScalarSpec,
        b: ScalarSpec,
        mu: ScalarSpec,
        lambda: ScalarSpec,
        omega: ComponentsSpec,
        amat: ComponentsSpec,
    },
    KwcLinearized(KwcConfig),
    KwcAdjoint(KwcConfig),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum ForcingSource {
    #[default]
    Zero,
    #[serde(alias = "catalog", alias = "files")]
    Fields { h: ScalarSpec, k: ScalarSpec },
    /// Forcing of a manufactured solution; needs constant coefficients.
    Mms { solution: MmsEntry },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum InitialSource {
    #[default]
    Zero,
    /// Values at `t = 0` of the given fields.
    #[serde(alias = "catalog", alias = "files")]
    Fields { p: ScalarSpec, z: ScalarSpec },
    /// The manufactured solution at `t = 0`; needs an `mms` forcing.
    Mms,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub domain: DomainConfig,
    pub t_end: f64,
    pub nu: f64,
    pub tau: Option<f64>,
    #[serde(default)]
    pub taus: Vec<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_mode")]
    pub slice_mode: SliceMode,
    /// Intervals of the coefficient sampling grid on `[0, T]`.
    #[serde(default = "default_samples")]
    pub time_samples: usize,
    pub coefficients: CoefficientSource,
    #[serde(default)]
    pub forcing: ForcingSource,
    #[serde(default)]
    pub initial: InitialSource,
    /// Fixed embedding constants instead of computed ones.
    pub embedding: Option<EmbeddingConstants>,
    pub out: Option<PathBuf>,
}

fn default_name() -> String {
    "run".into()
}
fn default_tol() -> f64 {
    DEFAULT_TOL
}
fn default_mode() -> SliceMode {
    SliceMode::Average
}
fn default_samples() -> usize {
    16
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, PathBuf), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::parse(&text)?, base))
    }

    fn check(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return bad(format!("nu must be positive, got {}", self.nu));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if self.taus.windows(2).any(|w| w[1] >= w[0]) {
            return bad("taus must be strictly decreasing".into());
        }
        for &t in self.tau.iter().chain(&self.taus) {
            if !(t > 0.0 && t < 1.0) {
                return bad(format!("step size {t} not in (0, 1)"));
            }
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.time_samples == 0 {
            return bad("time_samples must be at least 1".into());
        }
        Ok(())
    }

    pub fn require_tau(&self) -> Result<f64, CliError> {
        self.tau.ok_or_else(|| CliError::Config("this command needs `tau`".into()))
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid::new(self.t_end, self.time_samples).expect("checked in parse")
    }
}

/// Everything a command needs, resolved from a configuration.
#[derive(Debug)]
pub struct Problem {
    pub disc: Discretization,
    pub sextet: CoefficientSextet,
    pub forcing: Forcing,
    /// Nodal initial values.
    pub initial: (Vec<f64>, Vec<f64>),
    pub exact: Option<MmsEntry>,
}

fn config_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Config(e.to_string())
}

struct Loader<'a> {
    disc: &'a Discretization,
    grid: TimeGrid,
    base: &'a Path,
}

impl Loader<'_> {
    fn read_file(&self, path: &Path, kind: FieldKind) -> Result<SpaceTimeField, CliError> {
        let full = self.base.join(path);
        let field = if full.extension().is_some_and(|e| e == "bin") {
            let f = std::fs::File::open(&full).map_err(|e| CliError::Config(format!("{}: {e}", full.display())))?;
            io::read_binary(f)
        } else {
            let text =
                std::fs::read_to_string(&full).map_err(|e| CliError::Config(format!("{}: {e}", full.display())))?;
            io::read_text(&text)
        }
        .map_err(|e| CliError::Config(format!("{}: {e}", full.display())))?;
        if field.kind() != kind || field.n_nodes() != self.disc.mesh.n_nodes() {
            return Err(CliError::Config(format!(
                "{}: expected a {} field on {} nodes",
                full.display(),
                kind.name(),
                self.disc.mesh.n_nodes()
            )));
        }
        if field.grid() != self.grid {
            return Err(CliError::Config(format!(
                "{}: time grid differs from t_end = {}, time_samples = {}",
                full.display(),
                self.grid.t_end,
                self.grid.intervals
            )));
        }
        Ok(field)
    }

    fn scalar(&self, spec: &ScalarSpec) -> Result<SpaceTimeField, CliError> {
        let mesh = &self.disc.mesh;
        match spec {
            ScalarSpec::Number(v) => SpaceTimeField::constant(FieldKind::Scalar, mesh.n_nodes(), self.grid, &[*v]).map_err(config_err),
            ScalarSpec::File(p) => self.read_file(p, FieldKind::Scalar),
            ScalarSpec::Expr(e) => {
                let e = e.clone();
                SpaceTimeField::from_fn(FieldKind::Scalar, mesh, self.grid, move |t, x, o| o[0] = e.eval(t, x))
                    .map_err(config_err)
            }
        }
    }

    fn components(&self, spec: &ComponentsSpec, kind: FieldKind) -> Result<SpaceTimeField, CliError> {
        let mesh = &self.disc.mesh;
        match spec {
            ComponentsSpec::File(p) => self.read_file(p, kind),
            ComponentsSpec::Components(parts) => {
                if parts.len() != kind.components() {
                    return Err(CliError::Config(format!(
                        "{} needs {} components, got {}",
                        kind.name(),
                        kind.components(),
                        parts.len()
                    )));
                }
                let mut exprs = Vec::with_capacity(parts.len());
                for p in parts {
                    exprs.push(match p {
                        ScalarSpec::Number(v) => Expr::constant(*v),
                        ScalarSpec::Expr(e) => e.clone(),
                        ScalarSpec::File(_) => {
                            return Err(CliError::Config("components must be numbers or expressions".into()))
                        }
                    });
                }
                SpaceTimeField::from_fn(kind, mesh, self.grid, move |t, x, o| {
                    for (v, e) in o.iter_mut().zip(&exprs) {
                        *v = e.eval(t, x);
                    }
                })
                .map_err(config_err)
            }
        }
    }

    fn kwc(&self, k: &KwcConfig, adjoint: bool) -> Result<KwcSystem, CliError> {
        let mesh = &self.disc.mesh;
        let pair = PhaseFieldPair::new(mesh, self.scalar(&k.eta)?, self.scalar(&k.theta)?).map_err(config_err)?;
        if k.theta_dirichlet {
            pair.check_dirichlet(mesh, 1e-12).map_err(|e| CliError::Validation(e.to_string()))?;
        }
        let funcs = ModelFunctions {
            mobility: k.mobility,
            g: k.g,
            alpha0: self.scalar(&k.alpha0)?,
            alpha0_dt: k.alpha0_dt.as_ref().map(|s| self.scalar(s)).transpose()?,
            eps: k.eps,
        };
        let built = if adjoint { build_adjoint(mesh, &pair, &funcs) } else { build_linearized(mesh, &pair, &funcs) };
        built.map_err(|e| CliError::Validation(e.to_string()))
    }
}

impl Problem {
    /// Resolves a configuration; relative file paths are taken from `base`.
    /// `builder` overrides which phase-field builder a `kwc-*` source uses.
    pub fn build(cfg: &RunConfig, base: &Path, builder: Option<bool>) -> Result<Self, CliError> {
        let disc = Discretization::build(cfg.domain.domain, cfg.domain.resolution).map_err(config_err)?;
        let dim = disc.mesh.dim();
        let grid = cfg.grid();
        let loader = Loader { disc: &disc, grid, base };
        let mut initial = None;
        let mut constants = None;
        let sextet = match &cfg.coefficients {
            CoefficientSource::Constant { a, b, mu, lambda, omega, amat } => {
                let c = MmsCoefficients { a: *a, b: *b, mu: *mu, lambda: *lambda, omega: omega.clone(), amat: amat.clone() };
                if omega.len() != dim || amat.len() != dim * dim {
                    return Err(CliError::Config(format!("omega needs {dim} and amat {} entries", dim * dim)));
                }
                let s = c.sextet(&disc.mesh, grid).map_err(config_err)?;
                constants = Some(c);
                s
            }
            CoefficientSource::Fields { a, b, mu, lambda, omega, amat } => CoefficientSextet::new(
                &disc.mesh,
                loader.scalar(a)?,
                loader.scalar(b)?,
                loader.scalar(mu)?,
                loader.scalar(lambda)?,
                loader.components(omega, FieldKind::Vector(dim))?,
                loader.components(amat, FieldKind::Matrix(dim))?,
            )
            .map_err(config_err)?,
            CoefficientSource::KwcLinearized(k) | CoefficientSource::KwcAdjoint(k) => {
                let adjoint = builder.unwrap_or(matches!(cfg.coefficients, CoefficientSource::KwcAdjoint(_)));
                let sys = loader.kwc(k, adjoint)?;
                initial = Some((sys.p0, sys.z0));
                sys.sextet
            }
        };
        if builder.is_some() && initial.is_none() {
            return Err(CliError::Config("a phase-field builder needs a kwc-linearized or kwc-adjoint source".into()));
        }
        let n = disc.mesh.n_nodes();
        let mut exact = None;
        let forcing = match &cfg.forcing {
            ForcingSource::Zero => Forcing::zero(n, grid),
            ForcingSource::Fields { h, k } => Forcing::densities(loader.scalar(h)?, loader.scalar(k)?),
            ForcingSource::Mms { solution } => {
                let c = constants
                    .as_ref()
                    .ok_or_else(|| CliError::Config("mms forcing needs constant coefficients".into()))?;
                exact = Some(*solution);
                mms_forcing(*solution, &disc.mesh, grid, c, cfg.nu).map_err(config_err)?
            }
        };
        let initial = match (&cfg.initial, initial) {
            (InitialSource::Zero, Some(kwc)) => kwc,
            (InitialSource::Zero, None) => (vec![0.0; n], vec![0.0; n]),
            (InitialSource::Fields { p, z }, _) => (loader.scalar(p)?.value_at(0.0), loader.scalar(z)?.value_at(0.0)),
            (InitialSource::Mms, _) => {
                let e = exact.ok_or_else(|| CliError::Config("mms initial data needs an mms forcing".into()))?;
                e.nodal(&disc.mesh, 0.0)
            }
        };
        Ok(Self { disc, sextet, forcing, initial, exact })
    }

    pub fn embedding(&self, cfg: &RunConfig, seed: u64) -> Result<EmbeddingConstants, CliError> {
        match cfg.embedding {
            Some(e) => Ok(e),
            None => EmbeddingConstants::compute(&self.disc, seed).map_err(|e| CliError::Solver(e.to_string())),
        }
    }
}
