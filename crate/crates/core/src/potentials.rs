//! Target potentials `U` with analytic gradients, Hessian traces and the
//! structural constants (Lipschitz bound, dissipativity pair, asymptotic
//! quadratic part and tail moduli) used by the constant calculus.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, norm, symmetric_eigen, Mat};

/// Structural constants of a potential.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionConstants {
    /// Lipschitz constant of `∇U`.
    #[serde(rename = "L")]
    pub lipschitz: f64,
    /// Dissipativity rate in `½ q·∇U ≥ λ(U + γ²|q|²/4) − A`.
    #[serde(rename = "lambda")]
    pub drift_rate: f64,
    /// Dissipativity offset `A`.
    #[serde(rename = "A")]
    pub drift_offset: f64,
    /// Friction the dissipativity pair was certified for.
    pub gamma: f64,
    /// Quadratic part of `U` at infinity.
    #[serde(rename = "Q_infinity")]
    pub q_infinity: Mat,
    /// Radius beyond which the tail modulus bound applies.
    #[serde(rename = "C_linear")]
    pub linear_onset: f64,
    pub grad_at_zero: f64,
    #[serde(rename = "U_at_zero")]
    pub energy_at_zero: f64,
}

/// Standard Gaussian reference `U = ½|q|²`.
#[derive(Debug, Clone)]
pub struct Gaussian {
    dim: usize,
    constants: AssumptionConstants,
}

impl Gaussian {
    pub fn new(dim: usize, gamma: f64) -> Result<Self> {
        check_dim(dim)?;
        check_gamma(gamma)?;
        let lambda = (0.25_f64).min(2.0 / (2.0 + gamma * gamma));
        Ok(Self {
            dim,
            constants: AssumptionConstants {
                lipschitz: 1.0,
                drift_rate: lambda,
                drift_offset: 0.0,
                gamma,
                q_infinity: Mat::identity(dim),
                linear_onset: 1.0,
                grad_at_zero: 0.0,
                energy_at_zero: 0.0,
            },
        })
    }

    fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        let g2 = self.constants.gamma.powi(2);
        check_lambda(lambda, (0.25_f64).min(2.0 / (2.0 + g2)))?;
        self.constants.drift_rate = lambda;
        Ok(self)
    }
}

/// One-dimensional double well `v(s)`: `½(|s|−1)²` for `|s| ≥ ½`,
/// `¼ − ½s²` inside.
pub fn well(s: f64) -> f64 {
    let a = s.abs();
    if a >= 0.5 {
        0.5 * (a - 1.0) * (a - 1.0)
    } else {
        0.25 - 0.5 * s * s
    }
}

pub fn well_derivative(s: f64) -> f64 {
    if s.abs() >= 0.5 {
        s - s.signum()
    } else {
        -s
    }
}

pub fn well_second(s: f64) -> f64 {
    if s.abs() > 0.5 {
        1.0
    } else {
        -1.0
    }
}

/// Per-coordinate dissipativity offset `A₁(γ)` of the double well, valid for
/// `λ ≤ 1/(4+γ²)`.
pub fn well_offset(gamma: f64) -> f64 {
    let g2 = gamma * gamma;
    let g4 = g2 * g2;
    (g4 + 6.0 * g2 + 16.0) / (4.0 * (g4 + 10.0 * g2 + 24.0))
}

/// Exact `sup_s λ(v(s) + γ²s²/4) − ½ s v′(s)`; finite iff `λ(2+γ²) < 2`.
pub fn well_offset_exact(gamma: f64, lambda: f64) -> Result<f64> {
    let g2 = gamma * gamma;
    let outer = lambda * (2.0 + g2) / 4.0 - 0.5;
    if outer >= 0.0 {
        return Err(invalid(
            "lambda",
            format!("double well is not dissipative at λ={lambda}, γ={gamma}"),
        ));
    }
    let f_out = |t: f64| outer * t * t + (0.5 - lambda) * t + 0.5 * lambda;
    let t_star = ((0.5 - lambda) / (-2.0 * outer)).max(0.5);
    let inner = |t: f64| 0.25 * lambda + t * t * (0.5 + lambda * (g2 - 2.0) / 4.0);
    Ok(f_out(t_star).max(inner(0.0)).max(inner(0.5)))
}

/// Separable multi-well potential `U(q) = Σ v(q_i)`.
#[derive(Debug, Clone)]
pub struct MultiWell {
    dim: usize,
    constants: AssumptionConstants,
}

impl MultiWell {
    /// Default dissipativity rate `1/(4+γ²)` with offset `d·A₁(γ)`.
    pub fn new(dim: usize, gamma: f64) -> Result<Self> {
        check_dim(dim)?;
        check_gamma(gamma)?;
        let d = dim as f64;
        Ok(Self {
            dim,
            constants: AssumptionConstants {
                lipschitz: 1.0,
                drift_rate: 1.0 / (4.0 + gamma * gamma),
                drift_offset: d * well_offset(gamma),
                gamma,
                q_infinity: Mat::identity(dim),
                linear_onset: d.sqrt(),
                grad_at_zero: 0.0,
                energy_at_zero: 0.25 * d,
            },
        })
    }

    /// Smaller rates keep `d·A₁(γ)`; larger ones use the exact offset.
    fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        let gamma = self.constants.gamma;
        check_lambda(lambda, 0.25)?;
        let d = self.dim as f64;
        self.constants.drift_offset = if lambda <= 1.0 / (4.0 + gamma * gamma) {
            d * well_offset(gamma)
        } else {
            d * well_offset_exact(gamma, lambda)?
        };
        self.constants.drift_rate = lambda;
        Ok(self)
    }
}

/// Bayesian linear regression with a smoothed `L^p` prior:
/// `U = |y − Xq|²/(2σ²) + ι Σ (q_i² + ε²)^{p/2}`.
#[derive(Debug, Clone)]
pub struct LinearRegression {
    dim: usize,
    xtx: Mat,
    xty: Vec<f64>,
    y_sq: f64,
    sigma: f64,
    iota: f64,
    p: f64,
    eps: f64,
    /// `λ_min(XᵀX)` and `λ_max(XᵀX)`.
    pub gram_min: f64,
    pub gram_max: f64,
    constants: AssumptionConstants,
}

impl LinearRegression {
    pub fn new(
        x: &Mat,
        y: &[f64],
        sigma: f64,
        iota: f64,
        p: f64,
        eps: f64,
        gamma: f64,
    ) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::Dimension {
                expected: x.rows(),
                got: y.len(),
            });
        }
        check_dim(x.cols())?;
        check_gamma(gamma)?;
        positive("sigma", sigma)?;
        positive("iota", iota)?;
        positive("eps", eps)?;
        if !(p > 1.0 && p < 2.0) {
            return Err(invalid("p", format!("exponent must lie in (1, 2), got {p}")));
        }
        let xtx = x.transpose().matmul(x).symmetrize();
        let xty = x.tr_matvec(y);
        let eig = symmetric_eigen(&xtx)?;
        let (gram_min, gram_max) = (eig.min(), eig.max());
        if gram_min <= 0.0 {
            return Err(invalid("X", "XᵀX is singular"));
        }
        let dim = x.cols();
        let d = dim as f64;
        let s2 = sigma * sigma;
        let y_sq = dot(y, y);
        let constants = AssumptionConstants {
            lipschitz: gram_max / s2 + iota * p * eps.powf(p - 2.0),
            drift_rate: 0.0,
            drift_offset: 0.0,
            gamma,
            q_infinity: xtx.scale(1.0 / s2),
            linear_onset: 1.0,
            grad_at_zero: norm(&xty) / s2,
            energy_at_zero: y_sq / (2.0 * s2) + iota * d * eps.powf(p),
        };
        let mut model = Self {
            dim,
            xtx,
            xty,
            y_sq,
            sigma,
            iota,
            p,
            eps,
            gram_min,
            gram_max,
            constants,
        };
        let default = model.max_lambda().min(0.25).min(gram_min / (2.0 * s2));
        model.set_lambda(default)?;
        Ok(model)
    }

    /// Largest rate for which the quadratic coefficient of the dissipativity
    /// defect stays at least half its `λ = 0` value.
    fn max_lambda(&self) -> f64 {
        let a = self.gram_min / (4.0 * self.sigma * self.sigma);
        a / (a + self.iota + self.constants.gamma.powi(2) / 4.0)
    }

    /// Offset from completing the square in
    /// `½q·∇U − λU − λγ²|q|²/4 ≥ κ|q|² − β|q| − λ(|y|²/(2σ²) + ιd(1+ε²))`
    /// with `κ = (1−λ)m/(2σ²) − λ(ι + γ²/4)` and `β = (1−2λ)|Xᵀy|/(2σ²)`,
    /// using `x^{p/2} ≤ 1 + x`.
    fn set_lambda(&mut self, lambda: f64) -> Result<()> {
        check_lambda(lambda, 0.25)?;
        let s2 = self.sigma * self.sigma;
        let g2 = self.constants.gamma.powi(2);
        let kappa = (1.0 - lambda) * self.gram_min / (2.0 * s2) - lambda * (self.iota + g2 / 4.0);
        if kappa <= 0.0 {
            return Err(invalid(
                "lambda",
                format!("λ={lambda} leaves no quadratic dissipativity margin"),
            ));
        }
        let beta = (1.0 - 2.0 * lambda) * norm(&self.xty) / (2.0 * s2);
        let d = self.dim as f64;
        self.constants.drift_rate = lambda;
        self.constants.drift_offset = beta * beta / (4.0 * kappa)
            + lambda * (self.y_sq / (2.0 * s2) + self.iota * d * (1.0 + self.eps * self.eps));
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn iota(&self) -> f64 {
        self.iota
    }

    pub fn exponent(&self) -> f64 {
        self.p
    }

    pub fn smoothing(&self) -> f64 {
        self.eps
    }

    /// `c₀ = |Xᵀy|/σ² + ιp√d ε^{p−1}` and `c₁ = ιp d^{(2−p)/2}`.
    pub fn tail_coefficients(&self) -> (f64, f64) {
        let d = self.dim as f64;
        let c0 = norm(&self.xty) / (self.sigma * self.sigma)
            + self.iota * self.p * d.sqrt() * self.eps.powf(self.p - 1.0);
        let c1 = self.iota * self.p * d.powf((2.0 - self.p) / 2.0);
        (c0, c1)
    }

    /// `|y|²/(2σ²)`.
    pub fn response_energy(&self) -> f64 {
        self.y_sq / (2.0 * self.sigma * self.sigma)
    }

    /// `|Xᵀy|/σ²`.
    pub fn shift_norm(&self) -> f64 {
        norm(&self.xty) / (self.sigma * self.sigma)
    }

    fn prior(&self, q: &[f64]) -> f64 {
        let e2 = self.eps * self.eps;
        self.iota
            * q.iter()
                .map(|v| (v * v + e2).powf(0.5 * self.p))
                .sum::<f64>()
    }
}

/// Tukey bisquare loss with scale `t0`.
pub fn tukey(t: f64, t0: f64) -> f64 {
    if t.abs() > t0 {
        1.0
    } else {
        let u = 1.0 - (t / t0).powi(2);
        1.0 - u * u * u
    }
}

pub fn tukey_derivative(t: f64, t0: f64) -> f64 {
    if t.abs() > t0 {
        0.0
    } else {
        let u = 1.0 - (t / t0).powi(2);
        6.0 * t / (t0 * t0) * u * u
    }
}

pub fn tukey_second(t: f64, t0: f64) -> f64 {
    if t.abs() > t0 {
        0.0
    } else {
        let w = (t / t0).powi(2);
        6.0 / (t0 * t0) * (1.0 - w) * (1.0 - 5.0 * w)
    }
}

/// `sup |φ′|` of the Tukey loss, attained at `t0/√5`.
pub fn tukey_slope_bound(t0: f64) -> f64 {
    96.0 / (25.0 * 5f64.sqrt() * t0)
}

/// `sup |φ″|` of the Tukey loss, attained at 0.
pub fn tukey_curvature_bound(t0: f64) -> f64 {
    6.0 / (t0 * t0)
}

/// Robust binary classification with Tukey loss, identity link and ridge:
/// `U = (1/n) Σ φ(y_i − ⟨q, x_i⟩) + (ι/2)|q|²`.
#[derive(Debug, Clone)]
pub struct Classification {
    dim: usize,
    features: Mat,
    labels: Vec<f64>,
    iota: f64,
    t0: f64,
    /// `max_i |x_i|`.
    pub feature_bound: f64,
    constants: AssumptionConstants,
}

impl Classification {
    pub fn new(features: &Mat, labels: &[f64], iota: f64, t0: f64, gamma: f64) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Dimension {
                expected: features.rows(),
                got: labels.len(),
            });
        }
        if labels.is_empty() {
            return Err(invalid("labels", "no samples"));
        }
        check_dim(features.cols())?;
        check_gamma(gamma)?;
        positive("iota", iota)?;
        positive("t0", t0)?;
        let dim = features.cols();
        let feature_bound = (0..features.rows())
            .map(|i| norm(features.row(i)))
            .fold(0.0, f64::max);
        let n = labels.len() as f64;
        let mut grad0 = vec![0.0; dim];
        let mut u0 = 0.0;
        for (i, y) in labels.iter().enumerate() {
            u0 += tukey(*y, t0) / n;
            let s = -tukey_derivative(*y, t0) / n;
            for (g, x) in grad0.iter_mut().zip(features.row(i)) {
                *g += s * x;
            }
        }
        let mut model = Self {
            dim,
            features: features.clone(),
            labels: labels.to_vec(),
            iota,
            t0,
            feature_bound,
            constants: AssumptionConstants {
                lipschitz: iota + tukey_curvature_bound(t0) * feature_bound * feature_bound,
                drift_rate: 0.0,
                drift_offset: 0.0,
                gamma,
                q_infinity: Mat::identity(dim).scale(iota),
                linear_onset: 1.0,
                grad_at_zero: norm(&grad0),
                energy_at_zero: u0,
            },
        };
        let default = (0.25_f64).min(iota / 2.0).min(iota / (2.0 * iota + gamma * gamma));
        model.set_lambda(default)?;
        Ok(model)
    }

    /// `C₀ = Φ₁ B_x`: uniform bound on `|∇U(q) − ιq|`.
    pub fn remainder_bound(&self) -> f64 {
        tukey_slope_bound(self.t0) * self.feature_bound
    }

    /// `A_φ = |φ(0)| + Φ₁(1 + |h(0)|)` for the identity link.
    pub fn loss_offset(&self) -> f64 {
        tukey(0.0, self.t0) + tukey_slope_bound(self.t0)
    }

    pub fn iota(&self) -> f64 {
        self.iota
    }

    pub fn scale(&self) -> f64 {
        self.t0
    }

    /// Uses `½q·∇U ≥ (ι/2)|q|² − (C₀/2)|q|` and `U ≤ 1 + (ι/2)|q|²`, so the
    /// defect is at least `κ|q|² − (C₀/2)|q| − λ` with
    /// `κ = ι/2 − λ(ι/2 + γ²/4) > 0`; the offset completes the square.
    fn set_lambda(&mut self, lambda: f64) -> Result<()> {
        check_lambda(lambda, 0.25)?;
        let g2 = self.constants.gamma.powi(2);
        let kappa = self.iota / 2.0 - lambda * (self.iota / 2.0 + g2 / 4.0);
        if kappa <= 0.0 {
            return Err(invalid(
                "lambda",
                format!("λ={lambda} exceeds the ridge-controlled range"),
            ));
        }
        let c0 = self.remainder_bound();
        self.constants.drift_rate = lambda;
        self.constants.drift_offset = lambda + c0 * c0 / (16.0 * kappa);
        Ok(())
    }

    /// Predicted labels `1{⟨q, x⟩ ≥ ½}` for the rows of `features`.
    pub fn predict(features: &Mat, q: &[f64]) -> Vec<bool> {
        (0..features.rows())
            .map(|i| dot(features.row(i), q) >= 0.5)
            .collect()
    }
}

/// A target potential together with its structural constants.
#[derive(Debug, Clone)]
pub enum PotentialModel {
    Gaussian(Gaussian),
    MultiWell(MultiWell),
    LinearRegression(LinearRegression),
    Classification(Classification),
}

impl From<Gaussian> for PotentialModel {
    fn from(m: Gaussian) -> Self {
        Self::Gaussian(m)
    }
}

impl From<MultiWell> for PotentialModel {
    fn from(m: MultiWell) -> Self {
        Self::MultiWell(m)
    }
}

impl From<LinearRegression> for PotentialModel {
    fn from(m: LinearRegression) -> Self {
        Self::LinearRegression(m)
    }
}

impl From<Classification> for PotentialModel {
    fn from(m: Classification) -> Self {
        Self::Classification(m)
    }
}

impl PotentialModel {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Gaussian(_) => "gaussian",
            Self::MultiWell(_) => "multiwell",
            Self::LinearRegression(_) => "linreg",
            Self::Classification(_) => "classification",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian(m) => m.dim,
            Self::MultiWell(m) => m.dim,
            Self::LinearRegression(m) => m.dim,
            Self::Classification(m) => m.dim,
        }
    }

    pub fn constants(&self) -> &AssumptionConstants {
        match self {
            Self::Gaussian(m) => &m.constants,
            Self::MultiWell(m) => &m.constants,
            Self::LinearRegression(m) => &m.constants,
            Self::Classification(m) => &m.constants,
        }
    }

    /// Same potential with a different dissipativity rate; the offset is
    /// recomputed for the new rate.
    pub fn with_lambda(self, lambda: f64) -> Result<Self> {
        Ok(match self {
            Self::Gaussian(m) => Self::Gaussian(m.with_lambda(lambda)?),
            Self::MultiWell(m) => Self::MultiWell(m.with_lambda(lambda)?),
            Self::LinearRegression(mut m) => {
                m.set_lambda(lambda)?;
                Self::LinearRegression(m)
            }
            Self::Classification(mut m) => {
                m.set_lambda(lambda)?;
                Self::Classification(m)
            }
        })
    }

    /// `U(q)`; the caller guarantees `q.len() == dim`.
    pub fn energy(&self, q: &[f64]) -> f64 {
        match self {
            Self::Gaussian(_) => 0.5 * dot(q, q),
            Self::MultiWell(_) => q.iter().map(|s| well(*s)).sum(),
            Self::LinearRegression(m) => {
                let s2 = m.sigma * m.sigma;
                let quad = m.xtx.quad_form(q) - 2.0 * dot(q, &m.xty) + m.y_sq;
                (0.5 * quad / s2).max(0.0) + m.prior(q)
            }
            Self::Classification(m) => {
                let n = m.labels.len() as f64;
                let loss: f64 = m
                    .labels
                    .iter()
                    .enumerate()
                    .map(|(i, y)| tukey(y - dot(q, m.features.row(i)), m.t0))
                    .sum();
                loss / n + 0.5 * m.iota * dot(q, q)
            }
        }
    }

    /// `∇U(q)` written into `out`; the caller guarantees matching lengths.
    pub fn gradient_into(&self, q: &[f64], out: &mut [f64]) {
        match self {
            Self::Gaussian(_) => out.copy_from_slice(q),
            Self::MultiWell(_) => {
                for (o, s) in out.iter_mut().zip(q) {
                    *o = well_derivative(*s);
                }
            }
            Self::LinearRegression(m) => {
                let s2 = m.sigma * m.sigma;
                let e2 = m.eps * m.eps;
                for (j, o) in out.iter_mut().enumerate() {
                    let qj = q[j];
                    let prior = m.iota * m.p * qj * (qj * qj + e2).powf(0.5 * m.p - 1.0);
                    *o = (dot(m.xtx.row(j), q) - m.xty[j]) / s2 + prior;
                }
            }
            Self::Classification(m) => {
                let n = m.labels.len() as f64;
                for (o, v) in out.iter_mut().zip(q) {
                    *o = m.iota * v;
                }
                for (i, y) in m.labels.iter().enumerate() {
                    let x = m.features.row(i);
                    let s = tukey_derivative(y - dot(q, x), m.t0);
                    if s != 0.0 {
                        let w = -s / n;
                        for (o, xv) in out.iter_mut().zip(x) {
                            *o += w * xv;
                        }
                    }
                }
            }
        }
    }

    pub fn gradient(&self, q: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; q.len()];
        self.gradient_into(q, &mut g);
        g
    }

    /// Trace of the Hessian (defined almost everywhere).
    pub fn laplacian(&self, q: &[f64]) -> f64 {
        match self {
            Self::Gaussian(m) => m.dim as f64,
            Self::MultiWell(_) => q.iter().map(|s| well_second(*s)).sum(),
            Self::LinearRegression(m) => {
                let e2 = m.eps * m.eps;
                let prior: f64 = q
                    .iter()
                    .map(|v| {
                        let r = v * v + e2;
                        m.iota * m.p * (r.powf(0.5 * m.p - 1.0) + (m.p - 2.0) * v * v * r.powf(0.5 * m.p - 2.0))
                    })
                    .sum();
                m.xtx.trace() / (m.sigma * m.sigma) + prior
            }
            Self::Classification(m) => {
                let n = m.labels.len() as f64;
                let data: f64 = m
                    .labels
                    .iter()
                    .enumerate()
                    .map(|(i, y)| {
                        let x = m.features.row(i);
                        tukey_second(y - dot(q, x), m.t0) * dot(x, x)
                    })
                    .sum();
                data / n + m.iota * m.dim as f64
            }
        }
    }

    fn onset(&self) -> f64 {
        self.constants().linear_onset.max(1.0)
    }

    /// Closed-form upper bound on `ρ_∇(R) = sup_{|q|≥R} |∇U(q) − Q∞q|/|q|`.
    pub fn tail_modulus(&self, radius: f64) -> Result<f64> {
        let onset = self.onset();
        if !(radius >= onset) {
            return Err(invalid(
                "radius",
                format!("tail modulus needs R ≥ {onset}, got {radius}"),
            ));
        }
        Ok(match self {
            Self::Gaussian(_) => 0.0,
            Self::MultiWell(m) => (m.dim as f64).sqrt() / radius,
            Self::LinearRegression(m) => {
                let (c0, c1) = m.tail_coefficients();
                c0 / radius + c1 * radius.powf(m.p - 2.0)
            }
            Self::Classification(m) => m.remainder_bound() / radius,
        })
    }

    /// Closed-form upper bound on
    /// `δ_U(R) = sup_{|q|≥R} |U(q) − ½⟨Q∞q, q⟩|/(1 + |q|²)`.
    pub fn delta_u_bound(&self, radius: f64) -> Result<f64> {
        if !(radius >= 1.0) {
            return Err(invalid("radius", format!("δ_U bound needs R ≥ 1, got {radius}")));
        }
        let r2 = radius * radius;
        Ok(match self {
            Self::Gaussian(_) => 0.0,
            Self::MultiWell(m) => {
                let d = m.dim as f64;
                d.sqrt() / radius + d / (4.0 * r2)
            }
            Self::LinearRegression(m) => {
                let d = m.dim as f64;
                m.shift_norm() / radius
                    + m.iota * d.powf(1.0 - m.p / 2.0) * radius.powf(m.p - 2.0)
                    + (m.iota * d * m.eps.powf(m.p) + m.response_energy()) / r2
            }
            Self::Classification(m) => m.remainder_bound() / radius + m.loss_offset() / r2,
        })
    }

    /// `½ q·∇U − λ(U + γ²|q|²/4) + A`, non-negative under dissipativity.
    pub fn dissipativity_margin(&self, q: &[f64]) -> f64 {
        let c = self.constants();
        let g = self.gradient(q);
        0.5 * dot(q, &g) - c.drift_rate * (self.energy(q) + 0.25 * c.gamma * c.gamma * dot(q, q))
            + c.drift_offset
    }
}

fn check_len(model: &PotentialModel, q: &[f64]) -> Result<()> {
    if q.len() != model.dim() {
        return Err(Error::Dimension {
            expected: model.dim(),
            got: q.len(),
        });
    }
    Ok(())
}

/// Checked evaluation of `U(q)`.
pub fn eval_energy(model: &PotentialModel, q: &[f64]) -> Result<f64> {
    check_len(model, q)?;
    Ok(model.energy(q))
}

/// Checked evaluation of `∇U(q)`.
pub fn eval_gradient(model: &PotentialModel, q: &[f64]) -> Result<Vec<f64>> {
    check_len(model, q)?;
    Ok(model.gradient(q))
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(invalid("dim", "dimension must be positive"));
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    positive("gamma", gamma)
}

fn check_lambda(lambda: f64, upper: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda <= upper) {
        return Err(invalid("lambda", format!("must lie in (0, {upper}], got {lambda}")));
    }
    Ok(())
}

pub(crate) fn positive(name: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(invalid(name, format!("must be positive and finite, got {v}")));
    }
    Ok(())
}
