//! Lower-order field contribution `π(m)` entering `H_eff = C_e Δm + h_m - π(m)`.
//!
//! With the expanded effective field `C_e Δm + h_m + C_ani DΦ(m) - f`, a literal
//! match gives `π(m) = f - C_ani DΦ(m)`; [`SignConvention::Physical`] flips it
//! so the applied field enters `H_eff` with a plus sign. The anisotropy
//! density is uniaxial, `Φ(m) = 1 - (a·m)²`, hence `DΦ(m) = -2 (a·m) a`.

use thiserror::Error;

use crate::fem::{FieldKind, NodalVectorField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContributionError {
    #[error("non-finite applied field")]
    NonFiniteField,
    #[error("anisotropy axis must be a unit vector, has norm {0}")]
    AxisNotUnit(f64),
    #[error("anisotropy constant must be finite and non-negative, got {0}")]
    BadConstant(f64),
    #[error("declared bound {declared} is below the estimate {estimate}")]
    BoundTooSmall { declared: f64, estimate: f64 },
    #[error("magnetization must have three components")]
    NotMagnetization,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ContributionKind {
    #[default]
    Zero,
    AppliedField { f: [f64; 3] },
    UniaxialAnisotropy { axis: [f64; 3], c_ani: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignConvention {
    /// `π(m) = f - C_ani DΦ(m)`.
    #[default]
    Literal,
    /// `π(m) = -f + C_ani DΦ(m)`.
    Physical,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Contribution {
    kind: ContributionKind,
    sign: SignConvention,
    /// Declared `C_π` with `‖π(n)‖²_{L²(Ω_T)} ≤ C_π`; `None` means "not declared".
    declared_bound: Option<f64>,
}

impl Contribution {
    pub fn new(kind: ContributionKind, sign: SignConvention) -> Result<Self, ContributionError> {
        match kind {
            ContributionKind::Zero => {}
            ContributionKind::AppliedField { f } => {
                if f.iter().any(|x| !x.is_finite()) {
                    return Err(ContributionError::NonFiniteField);
                }
            }
            ContributionKind::UniaxialAnisotropy { axis, c_ani } => {
                let n = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
                if !((n - 1.0).abs() <= 1e-12) {
                    return Err(ContributionError::AxisNotUnit(n));
                }
                if !(c_ani >= 0.0 && c_ani.is_finite()) {
                    return Err(ContributionError::BadConstant(c_ani));
                }
            }
        }
        Ok(Contribution { kind, sign, declared_bound: None })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn with_bound(mut self, c_pi: f64) -> Self {
        self.declared_bound = Some(c_pi);
        self
    }

    pub fn kind(&self) -> ContributionKind {
        self.kind
    }

    pub fn sign(&self) -> SignConvention {
        self.sign
    }

    pub fn is_zero(&self) -> bool {
        match self.kind {
            ContributionKind::Zero => true,
            ContributionKind::AppliedField { f } => f == [0.0; 3],
            ContributionKind::UniaxialAnisotropy { c_ani, .. } => c_ani == 0.0,
        }
    }

    /// `π(m)` at one point.
    pub fn evaluate_at(&self, m: &[f64; 3]) -> [f64; 3] {
        let s = match self.sign {
            SignConvention::Literal => 1.0,
            SignConvention::Physical => -1.0,
        };
        match self.kind {
            ContributionKind::Zero => [0.0; 3],
            ContributionKind::AppliedField { f } => [s * f[0], s * f[1], s * f[2]],
            ContributionKind::UniaxialAnisotropy { axis, c_ani } => {
                let am = axis[0] * m[0] + axis[1] * m[1] + axis[2] * m[2];
                // -C_ani DΦ(m) = 2 C_ani (a·m) a
                let g = s * 2.0 * c_ani * am;
                [g * axis[0], g * axis[1], g * axis[2]]
            }
        }
    }

    /// Nodewise `π(m)`.
    pub fn evaluate(&self, m: &NodalVectorField) -> Result<NodalVectorField, ContributionError> {
        if m.n_comp() != 3 {
            return Err(ContributionError::NotMagnetization);
        }
        let values = (0..m.n_nodes()).flat_map(|i| self.evaluate_at(&m.vec3(i))).collect();
        Ok(NodalVectorField::new(3, FieldKind::General, values).expect("finite values"))
    }

    /// Pointwise bound `sup_{|n| ≤ 1} |π(n)|`.
    pub fn sup_norm(&self) -> f64 {
        match self.kind {
            ContributionKind::Zero => 0.0,
            ContributionKind::AppliedField { f } => f.iter().map(|x| x * x).sum::<f64>().sqrt(),
            ContributionKind::UniaxialAnisotropy { c_ani, .. } => 2.0 * c_ani,
        }
    }

    /// Analytic bound `|Ω| T sup|π|²` on `‖π(n)‖²_{L²(Ω_T)}`; fails when a
    /// declared bound is smaller.
    pub fn verify_bound(&self, final_time: f64, domain_area: f64) -> Result<f64, ContributionError> {
        let sup = self.sup_norm();
        let estimate = domain_area * final_time * sup * sup;
        match self.declared_bound {
            Some(declared) if declared < estimate => Err(ContributionError::BoundTooSmall { declared, estimate }),
            _ => Ok(estimate),
        }
    }
}
