//! Run configuration: flat `key=value` text, `#` starts a comment.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::contributions::{Contribution, ContributionKind, SignConvention};
use crate::error::SimError;
use crate::fem::{MassMode, Quadrature};
use crate::integrator::{FixedPointConfig, LlgForm, Params, BENCHMARK_EXCHANGE};
use crate::linalg::SolverConfig;
use crate::material::{Rank4Tensor, TensorLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SchemeKind {
    #[default]
    Tangent,
    Midpoint,
}

/// Pointwise matrix norm used for the `W^{1,∞}` seminorm of `∇m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientNorm {
    #[default]
    Frobenius,
    /// Maximum absolute row sum.
    RowSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PiKind {
    #[default]
    Zero,
    Applied,
    Anisotropy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Mesh level: the grid spacing is `2^-r`.
    pub r: i64,
    pub scheme: SchemeKind,
    pub k: f64,
    pub final_time: f64,
    pub alpha: f64,
    pub theta: f64,
    /// Exchange constant.
    pub c_exch: f64,
    /// Diagonal elastic constant `λ^e_1111 = λ^e_2222`.
    pub c_elastic: f64,
    /// Diagonal magnetostrictive constant `λ^m_1111 = λ^m_2222`.
    pub c_magnetic: f64,
    pub rho: f64,
    /// Initial-data sharpness.
    pub s: f64,
    pub pi_kind: PiKind,
    pub pi_f: [f64; 3],
    pub pi_axis: [f64; 3],
    pub pi_c_ani: f64,
    pub pi_sign: SignConvention,
    pub form: LlgForm,
    pub out: Option<PathBuf>,
    /// Record diagnostics every `cadence` steps.
    pub cadence: usize,
    pub midpoint: FixedPointConfig,
    pub mass: MassMode,
    pub quadrature: Quadrature,
    pub gradient_norm: GradientNorm,
    pub solver: SolverConfig,
    pub check_invariants: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            r: 4,
            scheme: SchemeKind::Tangent,
            k: 1e-5,
            final_time: 0.3,
            alpha: 1.0,
            theta: 1.0,
            c_exch: BENCHMARK_EXCHANGE,
            c_elastic: 0.0,
            c_magnetic: 0.0,
            rho: 1.0,
            s: 4.0,
            pi_kind: PiKind::Zero,
            pi_f: [0.0; 3],
            pi_axis: [0.0, 0.0, 1.0],
            pi_c_ani: 0.0,
            pi_sign: SignConvention::Literal,
            form: LlgForm::Gilbert,
            out: None,
            cadence: 10,
            midpoint: FixedPointConfig::default(),
            mass: MassMode::Lumped,
            quadrature: Quadrature::Consistent,
            gradient_norm: GradientNorm::Frobenius,
            solver: SolverConfig::default(),
            check_invariants: true,
        }
    }
}

/// All accepted keys, in the order the `Display` form writes them.
pub const CONFIG_KEYS: &[&str] = &[
    "r",
    "scheme",
    "k",
    "T",
    "alpha",
    "theta",
    "Cexch",
    "Ce",
    "Cm",
    "rho",
    "s",
    "pi.kind",
    "pi.f",
    "pi.axis",
    "pi.C_ani",
    "pi.sign",
    "llg.form",
    "out",
    "cadence",
    "midpoint.eps",
    "midpoint.max_sweeps",
    "midpoint.damping",
    "mass",
    "quadrature",
    "w1inf.norm",
    "solver.tol",
    "solver.max_iter",
    "check_invariants",
];

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, SimError> {
    value.parse().map_err(|_| SimError::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_f64(key: &str, value: &str) -> Result<f64, SimError> {
    let x: f64 = parse_num(key, value)?;
    if !x.is_finite() {
        return Err(SimError::Config(format!("{key}: value must be finite, got {value:?}")));
    }
    Ok(x)
}

fn parse_vec3(key: &str, value: &str) -> Result<[f64; 3], SimError> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(SimError::Config(format!("{key}: expected three comma-separated numbers, got {value:?}")));
    }
    Ok([parse_f64(key, parts[0])?, parse_f64(key, parts[1])?, parse_f64(key, parts[2])?])
}

fn choice<T: Copy>(key: &str, value: &str, options: &[(&str, T)]) -> Result<T, SimError> {
    options.iter().find(|(name, _)| *name == value).map(|(_, v)| *v).ok_or_else(|| {
        let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
        SimError::Config(format!("{key}: expected one of {}, got {value:?}", names.join("|")))
    })
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), SimError> {
        let value = value.trim();
        match key {
            "r" => self.r = parse_num(key, value)?,
            "scheme" => {
                self.scheme = choice(key, value, &[("tangent", SchemeKind::Tangent), ("midpoint", SchemeKind::Midpoint)])?
            }
            "k" => self.k = parse_f64(key, value)?,
            "T" => self.final_time = parse_f64(key, value)?,
            "alpha" => self.alpha = parse_f64(key, value)?,
            "theta" => self.theta = parse_f64(key, value)?,
            "Cexch" => self.c_exch = parse_f64(key, value)?,
            "Ce" => self.c_elastic = parse_f64(key, value)?,
            "Cm" => self.c_magnetic = parse_f64(key, value)?,
            "rho" => self.rho = parse_f64(key, value)?,
            "s" => self.s = parse_f64(key, value)?,
            "pi.kind" => {
                self.pi_kind = choice(
                    key,
                    value,
                    &[("zero", PiKind::Zero), ("applied", PiKind::Applied), ("anisotropy", PiKind::Anisotropy)],
                )?
            }
            "pi.f" => self.pi_f = parse_vec3(key, value)?,
            "pi.axis" => self.pi_axis = parse_vec3(key, value)?,
            "pi.C_ani" => self.pi_c_ani = parse_f64(key, value)?,
            "pi.sign" => {
                self.pi_sign =
                    choice(key, value, &[("literal", SignConvention::Literal), ("physical", SignConvention::Physical)])?
            }
            "llg.form" => {
                self.form =
                    choice(key, value, &[("gilbert", LlgForm::Gilbert), ("landau-lifshitz", LlgForm::LandauLifshitz)])?
            }
            "out" => self.out = if value.is_empty() { None } else { Some(PathBuf::from(value)) },
            "cadence" => self.cadence = parse_num(key, value)?,
            "midpoint.eps" => self.midpoint.eps = parse_f64(key, value)?,
            "midpoint.max_sweeps" => self.midpoint.max_sweeps = parse_num(key, value)?,
            "midpoint.damping" => self.midpoint.damping = parse_f64(key, value)?,
            "mass" => self.mass = choice(key, value, &[("lumped", MassMode::Lumped), ("consistent", MassMode::Consistent)])?,
            "quadrature" => {
                self.quadrature =
                    choice(key, value, &[("vertex", Quadrature::Vertex), ("consistent", Quadrature::Consistent)])?
            }
            "w1inf.norm" => {
                self.gradient_norm =
                    choice(key, value, &[("frobenius", GradientNorm::Frobenius), ("rowsum", GradientNorm::RowSum)])?
            }
            "solver.tol" => self.solver.tol_rel = parse_f64(key, value)?,
            "solver.max_iter" => {
                self.solver.max_iter = if value == "auto" { None } else { Some(parse_num(key, value)?) }
            }
            "check_invariants" => self.check_invariants = choice(key, value, &[("true", true), ("false", false)])?,
            _ => return Err(SimError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parses config text on top of the defaults.
    pub fn parse(text: &str) -> Result<RunConfig, SimError> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| SimError::Config(format!("line {}: expected key=value, got {line:?}", i + 1)))?;
            cfg.set(key.trim(), value).map_err(|e| match e {
                SimError::Config(msg) => SimError::Config(format!("line {}: {msg}", i + 1)),
                other => other,
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig, SimError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let err = |msg: String| Err(SimError::Config(msg));
        if self.r < 1 {
            return err(format!("r must be at least 1, got {}", self.r));
        }
        if !(self.k > 0.0) {
            return err(format!("k must be positive, got {}", self.k));
        }
        if !(self.final_time > 0.0) {
            return err(format!("T must be positive, got {}", self.final_time));
        }
        if self.k > self.final_time {
            return err(format!("k = {} exceeds T = {}", self.k, self.final_time));
        }
        if !(self.alpha > 0.0) {
            return err(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.s > 0.0) {
            return err(format!("s must be positive, got {}", self.s));
        }
        if self.cadence == 0 {
            return err("cadence must be at least 1".into());
        }
        if self.c_elastic < 0.0 || self.c_magnetic < 0.0 {
            return err("Ce and Cm must be non-negative".into());
        }
        self.midpoint.validate()?;
        self.params()?.validate()
    }

    /// Number of steps, `⌈T/k⌉`.
    pub fn n_steps(&self) -> usize {
        let ratio = self.final_time / self.k;
        // absorb rounding in T/k for exact multiples
        (ratio * (1.0 - 4.0 * f64::EPSILON)).ceil() as usize
    }

    pub fn contribution(&self) -> Result<Contribution, SimError> {
        let kind = match self.pi_kind {
            PiKind::Zero => ContributionKind::Zero,
            PiKind::Applied => ContributionKind::AppliedField { f: self.pi_f },
            PiKind::Anisotropy => ContributionKind::UniaxialAnisotropy { axis: self.pi_axis, c_ani: self.pi_c_ani },
        };
        Ok(Contribution::new(kind, self.pi_sign)?)
    }

    pub fn params(&self) -> Result<Params, SimError> {
        Ok(Params {
            alpha: self.alpha,
            theta: self.theta,
            c_exch: self.c_exch,
            rho: self.rho,
            lambda_e: Rank4Tensor::diagonal(2, self.c_elastic, TensorLabel::Elastic)?,
            lambda_m: Rank4Tensor::diagonal(2, self.c_magnetic, TensorLabel::Magnetic)?,
            contribution: self.contribution()?,
            form: self.form,
            mass: self.mass,
            quadrature: self.quadrature,
            solver: self.solver,
            check_invariants: self.check_invariants,
        })
    }
}

fn vec3_text(v: &[f64; 3]) -> String {
    format!("{:?},{:?},{:?}", v[0], v[1], v[2])
}

/// Writes the config in the format accepted by [`RunConfig::parse`].
impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let scheme = match self.scheme {
            SchemeKind::Tangent => "tangent",
            SchemeKind::Midpoint => "midpoint",
        };
        let pi_kind = match self.pi_kind {
            PiKind::Zero => "zero",
            PiKind::Applied => "applied",
            PiKind::Anisotropy => "anisotropy",
        };
        let pi_sign = match self.pi_sign {
            SignConvention::Literal => "literal",
            SignConvention::Physical => "physical",
        };
        let form = match self.form {
            LlgForm::Gilbert => "gilbert",
            LlgForm::LandauLifshitz => "landau-lifshitz",
        };
        let mass = match self.mass {
            MassMode::Lumped => "lumped",
            MassMode::Consistent => "consistent",
        };
        let quad = match self.quadrature {
            Quadrature::Vertex => "vertex",
            Quadrature::Consistent => "consistent",
        };
        let norm = match self.gradient_norm {
            GradientNorm::Frobenius => "frobenius",
            GradientNorm::RowSum => "rowsum",
        };
        writeln!(f, "r={}", self.r)?;
        writeln!(f, "scheme={scheme}")?;
        writeln!(f, "k={:?}", self.k)?;
        writeln!(f, "T={:?}", self.final_time)?;
        writeln!(f, "alpha={:?}", self.alpha)?;
        writeln!(f, "theta={:?}", self.theta)?;
        writeln!(f, "Cexch={:?}", self.c_exch)?;
        writeln!(f, "Ce={:?}", self.c_elastic)?;
        writeln!(f, "Cm={:?}", self.c_magnetic)?;
        writeln!(f, "rho={:?}", self.rho)?;
        writeln!(f, "s={:?}", self.s)?;
        writeln!(f, "pi.kind={pi_kind}")?;
        writeln!(f, "pi.f={}", vec3_text(&self.pi_f))?;
        writeln!(f, "pi.axis={}", vec3_text(&self.pi_axis))?;
        writeln!(f, "pi.C_ani={:?}", self.pi_c_ani)?;
        writeln!(f, "pi.sign={pi_sign}")?;
        writeln!(f, "llg.form={form}")?;
        writeln!(f, "out={}", self.out.as_ref().map(|p| p.display().to_string()).unwrap_or_default())?;
        writeln!(f, "cadence={}", self.cadence)?;
        writeln!(f, "midpoint.eps={:?}", self.midpoint.eps)?;
        writeln!(f, "midpoint.max_sweeps={}", self.midpoint.max_sweeps)?;
        writeln!(f, "midpoint.damping={:?}", self.midpoint.damping)?;
        writeln!(f, "mass={mass}")?;
        writeln!(f, "quadrature={quad}")?;
        writeln!(f, "w1inf.norm={norm}")?;
        writeln!(f, "solver.tol={:?}", self.solver.tol_rel)?;
        match self.solver.max_iter {
            Some(n) => writeln!(f, "solver.max_iter={n}")?,
            None => writeln!(f, "solver.max_iter=auto")?,
        }
        writeln!(f, "check_invariants={}", self.check_invariants)
    }
}
