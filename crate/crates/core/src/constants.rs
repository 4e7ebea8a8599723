//! Explicit constant calculus: Lyapunov bounds, baseline drift, the quadratic
//! corrector, the master contraction rate and the acceleration ledger.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::coupling::{build_profile, gradient_constant, ProfileSpec};
use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, inverse, norm, solve_lyapunov, symmetric_eigen, symmetric_eigs_2x2, Mat};
use crate::numerics::{bisect, geomspace, golden_max, grid_golden_max};
use crate::potentials::{
    tukey_slope_bound, well_offset, Classification, LinearRegression, MultiWell, PotentialModel,
};

/// Upper end of the admissible dissipativity rates.
pub const MAX_RATE: f64 = 0.25;

fn check_rate(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda <= MAX_RATE) {
        return Err(invalid("lambda", format!("must lie in (0, 1/4], got {lambda}")));
    }
    Ok(())
}

/// Eigenvalues `(μ_min, μ_max)` of `¼[[γ²(1−λ), γ], [γ, 2]]` in closed form.
pub fn m_matrix_eigs(gamma: f64, lambda: f64) -> (f64, f64) {
    let s = gamma * gamma * (1.0 - lambda);
    let root = ((s - 2.0).powi(2) + 4.0 * gamma * gamma).sqrt();
    ((s + 2.0 - root) / 8.0, (s + 2.0 + root) / 8.0)
}

/// Quadratic comparison constants of `V₀`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LyapunovBounds {
    pub gamma: f64,
    pub lambda: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    pub c1: f64,
    pub c2: f64,
    pub c1_prime: f64,
    pub c2_prime: f64,
}

impl LyapunovBounds {
    /// `C_V` with `|z|² ≤ C_V (1 + V₀(z))`.
    pub fn moment_constant(&self) -> f64 {
        1.0 / self.c1_prime
    }
}

pub fn lyapunov_quadratic_bounds(
    gamma: f64,
    lambda: f64,
    energy_at_zero: f64,
    grad_at_zero: f64,
    lipschitz: f64,
) -> Result<LyapunovBounds> {
    check_rate(lambda)?;
    crate::potentials::positive("gamma", gamma)?;
    let (mu_min, mu_max) = m_matrix_eigs(gamma, lambda);
    let c1 = mu_min.min(1.0);
    let c2 = mu_max.max(1.0);
    Ok(LyapunovBounds {
        gamma,
        lambda,
        mu_min,
        mu_max,
        c1,
        c2,
        c1_prime: c1,
        c2_prime: c2 + energy_at_zero + 0.5 * lipschitz + 0.5 * grad_at_zero,
    })
}

fn model_bounds(model: &PotentialModel, gamma: f64, lambda: f64) -> Result<LyapunovBounds> {
    let c = model.constants();
    lyapunov_quadratic_bounds(gamma, lambda, c.energy_at_zero, c.grad_at_zero, c.lipschitz)
}

/// `V₀(q, p) = U + (γ²/4)(1−λ)|q|² + (γ/2) q·p + ½|p|²`.
pub fn v0(model: &PotentialModel, gamma: f64, lambda: f64, q: &[f64], p: &[f64]) -> f64 {
    model.energy(q) + 0.25 * gamma * gamma * (1.0 - lambda) * dot(q, q) + 0.5 * gamma * dot(q, p)
        + 0.5 * dot(p, p)
}

/// `V = V₀ + α·½ zᵀKz`; the corrector term is absent for `V₀`.
#[derive(Debug, Clone)]
pub struct LyapunovFunction {
    pub gamma: f64,
    pub lambda: f64,
    pub corrector: Option<(f64, Mat)>,
}

impl LyapunovFunction {
    pub fn baseline(gamma: f64, lambda: f64) -> Self {
        Self {
            gamma,
            lambda,
            corrector: None,
        }
    }

    pub fn corrected(gamma: f64, lambda: f64, alpha: f64, k: Mat) -> Self {
        Self {
            gamma,
            lambda,
            corrector: Some((alpha, k)),
        }
    }

    pub fn eval(&self, model: &PotentialModel, q: &[f64], p: &[f64]) -> f64 {
        let base = v0(model, self.gamma, self.lambda, q, p);
        match &self.corrector {
            None => base,
            Some((alpha, k)) => {
                let z: Vec<f64> = q.iter().chain(p).copied().collect();
                base + 0.5 * alpha * k.quad_form(&z)
            }
        }
    }
}

/// Baseline drift constants of `V₀` under the HFHR generator.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BaselineDrift {
    #[serde(rename = "K_A")]
    pub k_a: f64,
    #[serde(rename = "K_Delta")]
    pub k_delta: f64,
    #[serde(rename = "J1")]
    pub j1: f64,
    pub alpha0: f64,
    pub gamma: f64,
    pub lambda: f64,
    #[serde(rename = "A")]
    pub drift_offset: f64,
}

impl BaselineDrift {
    /// `λ̂_α = λ − (J₁/γ)α`.
    pub fn lambda_hat(&self, alpha: f64) -> f64 {
        self.lambda - self.j1 / self.gamma * alpha
    }

    /// `A_α = A + (J₁/γ)α`.
    pub fn offset(&self, alpha: f64) -> f64 {
        self.drift_offset + self.j1 / self.gamma * alpha
    }
}

pub fn baseline_drift_constants(
    gamma: f64,
    lambda: f64,
    drift_offset: f64,
    lipschitz: f64,
    dim: usize,
) -> Result<BaselineDrift> {
    let bounds = lyapunov_quadratic_bounds(gamma, lambda, 0.0, 0.0, lipschitz)?;
    let d = dim as f64;
    let g2 = gamma * gamma;
    let k_a = (g2 * g2 * (1.0 - lambda).powi(2) / 4.0 + g2 / 4.0) / bounds.c1;
    let k_delta = lipschitz * d + g2 * d * (1.0 - lambda) / 2.0;
    let j1 = k_a + k_delta;
    Ok(BaselineDrift {
        k_a,
        k_delta,
        j1,
        alpha0: gamma * lambda / (2.0 * j1),
        gamma,
        lambda,
        drift_offset,
    })
}

pub fn model_baseline(model: &PotentialModel, gamma: f64) -> Result<BaselineDrift> {
    let c = model.constants();
    baseline_drift_constants(gamma, c.drift_rate, c.drift_offset, c.lipschitz, model.dim())
}

/// `𝓛_α V₀(q, p)` with the exact Hessian trace of `U`.
pub fn generator_v0(model: &PotentialModel, gamma: f64, lambda: f64, alpha: f64, q: &[f64], p: &[f64]) -> f64 {
    let d = q.len() as f64;
    let g = model.gradient(q);
    let g2 = gamma * gamma;
    let mut value = 0.0;
    for i in 0..q.len() {
        let grad_q = g[i] + 0.5 * g2 * (1.0 - lambda) * q[i] + 0.5 * gamma * p[i];
        let grad_p = 0.5 * gamma * q[i] + p[i];
        value += (p[i] - alpha * g[i]) * grad_q + (-gamma * p[i] - g[i]) * grad_p;
    }
    let lap_q = model.laplacian(q) + 0.5 * g2 * (1.0 - lambda) * d;
    value + alpha * lap_q + gamma * d
}

/// `γ(d + A_α − λ̂_α V₀) − 𝓛_α V₀`, non-negative where the baseline drift
/// inequality holds.
pub fn baseline_drift_margin(
    model: &PotentialModel,
    baseline: &BaselineDrift,
    alpha: f64,
    q: &[f64],
    p: &[f64],
) -> f64 {
    let (gamma, lambda) = (baseline.gamma, baseline.lambda);
    let d = q.len() as f64;
    let v = v0(model, gamma, lambda, q, p);
    gamma * (d + baseline.offset(alpha) - baseline.lambda_hat(alpha) * v)
        - generator_v0(model, gamma, lambda, alpha, q, p)
}

/// How the corrector matrix was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectorKind {
    /// Solution of `BᵀK + KB = C_{B₁}`.
    LyapunovSolve,
    /// Closed-form multi-well corrector `((2+γ²)/(4γ))|q|² + (1/(2γ))|p|²`.
    ExplicitMultiWell,
}

/// Quadratic corrector `𝓜 = ½ zᵀKz` and its improvement constants.
#[derive(Debug, Clone, Serialize)]
pub struct CorrectorSpec {
    pub kind: CorrectorKind,
    pub gamma: f64,
    pub lambda: f64,
    #[serde(rename = "K")]
    pub k: Mat,
    #[serde(rename = "C_M")]
    pub c_m: f64,
    #[serde(rename = "C_Delta")]
    pub c_delta: f64,
    /// `‖BᵀK + KB − C_{B₁}‖_F`; absent for the explicit corrector, which is
    /// not a solution of that equation.
    pub residual: Option<f64>,
    #[serde(rename = "C_B1_norm")]
    pub c_b1_norm: f64,
    pub c_imp_lower: f64,
    #[serde(rename = "C_imp")]
    pub c_imp: f64,
    #[serde(rename = "R0")]
    pub r0: f64,
    pub rho_star: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub a_low: f64,
    pub a_high: f64,
    #[serde(rename = "delta_U_R0")]
    pub delta_u_r0: f64,
    /// `C̃_𝓜` with `|𝓜| ≤ C̃_𝓜 (1 + V₀)`.
    #[serde(rename = "C_M_tilde")]
    pub c_m_tilde: f64,
    /// Coefficient of `V₀` in the second-order remainder bound.
    #[serde(rename = "C2")]
    pub c2_rate: f64,
    /// Constant part of the second-order remainder bound.
    #[serde(rename = "C2_offset")]
    pub c2_offset: f64,
}

impl CorrectorSpec {
    pub fn block(&self, row: usize, col: usize) -> Mat {
        let d = self.k.rows() / 2;
        self.k.block(row * d, col * d, d, d)
    }

    /// `𝓜(q, p) = ½ zᵀKz`.
    pub fn value(&self, q: &[f64], p: &[f64]) -> f64 {
        let z: Vec<f64> = q.iter().chain(p).copied().collect();
        0.5 * self.k.quad_form(&z)
    }

    /// `𝒜₀𝓜 + 𝒜′V₀` at `(q, p)`.
    pub fn improvement(&self, model: &PotentialModel, q: &[f64], p: &[f64]) -> f64 {
        improvement_value(model, self.gamma, self.lambda, &self.k, q, p)
    }

    /// `C_imp − c_imp V₀ − (𝒜₀𝓜 + 𝒜′V₀)`, non-negative where the improvement
    /// inequality holds.
    pub fn improvement_margin(&self, model: &PotentialModel, q: &[f64], p: &[f64]) -> f64 {
        self.c_imp - self.c_imp_lower * v0(model, self.gamma, self.lambda, q, p) - self.improvement(model, q, p)
    }
}

/// Linear drift at infinity `B = [[0, I], [−Q∞, −γI]]`.
pub fn drift_matrix(q_inf: &Mat, gamma: f64) -> Mat {
    let d = q_inf.rows();
    Mat::from_blocks(
        &Mat::zeros(d, d),
        &Mat::identity(d),
        &q_inf.scale(-1.0),
        &Mat::identity(d).scale(-gamma),
    )
}

/// Hessian of `B₁`, the quadratic part of `𝒜′V₀` at infinity minus `V₀`'s
/// quadratic part.
pub fn corrector_source(q_inf: &Mat, gamma: f64, lambda: f64) -> Mat {
    let d = q_inf.rows();
    let s = 0.5 * gamma * gamma * (1.0 - lambda);
    let id = Mat::identity(d);
    let qq = q_inf
        .matmul(q_inf)
        .scale(2.0)
        .add(&q_inf.scale(2.0 * s))
        .sub(q_inf)
        .sub(&id.scale(s));
    let qp = q_inf.sub(&id).scale(0.5 * gamma);
    Mat::from_blocks(&qq, &qp, &qp.transpose(), &id.scale(-1.0)).symmetrize()
}

fn improvement_value(model: &PotentialModel, gamma: f64, lambda: f64, k: &Mat, q: &[f64], p: &[f64]) -> f64 {
    let d = q.len();
    let g = model.gradient(q);
    let z: Vec<f64> = q.iter().chain(p).copied().collect();
    let kz = k.matvec(&z);
    let (grad_q, grad_p) = kz.split_at(d);
    let mut value = 0.0;
    for i in 0..d {
        value += p[i] * grad_q[i] - (gamma * p[i] + g[i]) * grad_p[i];
    }
    value - dot(&g, &g) - 0.5 * gamma * gamma * (1.0 - lambda) * dot(&g, q) - 0.5 * gamma * dot(&g, p)
}

/// `sup_p {𝒜₀𝓜 + 𝒜′V₀ + c·V₀}` at fixed `q`, using that the expression is a
/// concave quadratic in `p` with Hessian `H`; `neg_h_inv = (−H)⁻¹`.
fn improvement_sup_p(
    model: &PotentialModel,
    gamma: f64,
    lambda: f64,
    k: &Mat,
    neg_h_inv: &Mat,
    c_imp: f64,
    q: &[f64],
) -> f64 {
    let d = q.len();
    let g = model.gradient(q);
    let kqq = k.block(0, 0, d, d);
    let kpq = k.block(d, 0, d, d);
    let kpp = k.block(d, d, d, d);
    let s = 0.5 * gamma * gamma * (1.0 - lambda);
    let a = kqq.matvec(q);
    let b1 = kpq.matvec(q);
    let c = kpp.matvec(&g);
    let lin: Vec<f64> = (0..d)
        .map(|i| a[i] - gamma * b1[i] - c[i] - 0.5 * gamma * g[i] + c_imp * 0.5 * gamma * q[i])
        .collect();
    let constant = -dot(&g, &b1) - dot(&g, &g) - s * dot(&g, q)
        + c_imp * (model.energy(q) + 0.5 * s * dot(q, q));
    constant + 0.5 * neg_h_inv.quad_form(&lin)
}

/// Search directions for the compact-region supremum.
fn search_directions(d: usize) -> Vec<Vec<f64>> {
    if d == 1 {
        return vec![vec![1.0], vec![-1.0]];
    }
    if d == 2 {
        return (0..32)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / 32.0;
                vec![t.cos(), t.sin()]
            })
            .collect();
    }
    let mut dirs = Vec::new();
    for i in 0..d {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; d];
            e[i] = s;
            dirs.push(e);
        }
    }
    let ones = vec![1.0 / (d as f64).sqrt(); d];
    let alt: Vec<f64> = (0..d)
        .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } / (d as f64).sqrt())
        .collect();
    for v in [ones, alt] {
        dirs.push(v.iter().map(|x| -x).collect());
        dirs.push(v);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..32 {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = norm(&v);
        dirs.push(v.iter().map(|x| x / n).collect());
    }
    dirs
}

/// Maximum of `f` over the ball `|q| ≤ radius`: radial × angular grid, then a
/// compass search from the best grid points. Large balls get a second,
/// geometric set of radii so the region near the origin stays resolved.
fn ball_maximum(f: &dyn Fn(&[f64]) -> f64, d: usize, radius: f64) -> (Vec<f64>, f64) {
    const RADIAL: usize = 512;
    let dirs = search_directions(d);
    let mut radii: Vec<f64> = (1..RADIAL).map(|k| radius * k as f64 / (RADIAL - 1) as f64).collect();
    if radius > RADIAL as f64 {
        radii.extend(geomspace(1e-3, radius, RADIAL));
    }
    let mut candidates: Vec<(f64, Vec<f64>)> = Vec::with_capacity(radii.len() * dirs.len() + 1);
    candidates.push((f(&vec![0.0; d]), vec![0.0; d]));
    for &r in &radii {
        for u in &dirs {
            let q: Vec<f64> = u.iter().map(|x| r * x).collect();
            candidates.push((f(&q), q));
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = candidates[0].clone();
    for (v0, q0) in candidates.into_iter().take(8) {
        let (q, v) = compass_search(f, q0, v0, radius);
        if v > best.0 {
            best = (v, q);
        }
    }
    (best.1, best.0)
}

fn compass_search(f: &dyn Fn(&[f64]) -> f64, mut q: Vec<f64>, mut value: f64, radius: f64) -> (Vec<f64>, f64) {
    let d = q.len();
    let mut step = radius / 256.0;
    while step > 1e-10 * (1.0 + norm(&q)) {
        let mut improved = false;
        for i in 0..d {
            for s in [1.0, -1.0] {
                let mut t = q.clone();
                t[i] += s * step;
                let n = norm(&t);
                if n > radius {
                    t.iter_mut().for_each(|x| *x *= radius / n);
                }
                let v = f(&t);
                if v > value {
                    value = v;
                    q = t;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (q, value)
}

/// `(−H)⁻¹` for the `p`-Hessian `H = K_qp + K_pq − 2γK_pp + c·I`, which must
/// be negative definite.
fn concavity_inverse(k: &Mat, gamma: f64, c_imp: f64) -> Result<Mat> {
    let d = k.rows() / 2;
    let kqp = k.block(0, d, d, d);
    let kpq = k.block(d, 0, d, d);
    let kpp = k.block(d, d, d, d);
    let h = kqp.add(&kpq).sub(&kpp.scale(2.0 * gamma)).add(&Mat::identity(d).scale(c_imp));
    let neg = h.scale(-1.0).symmetrize();
    let eig = symmetric_eigen(&neg)?;
    if eig.min() <= 0.0 {
        return Err(Error::Certificate(format!(
            "improvement functional is not concave in p (λ_max(H) = {:.3e})",
            -eig.min()
        )));
    }
    inverse(&neg)
}

/// Closed-form tail constants `a_low`, `a_high` of the coercivity argument.
fn coercivity(a: f64, gamma: f64, sign: f64) -> f64 {
    0.25 * (a + 1.0 + sign * ((a - 1.0).powi(2) + gamma * gamma).sqrt())
}

/// `c_imp = (3/8)·4a_low/(4a_high + 8δ_U)`.
pub fn improvement_rate(a_min: f64, a_max: f64, gamma: f64, delta_u: f64) -> f64 {
    let low = coercivity(a_min, gamma, -1.0);
    let high = coercivity(a_max, gamma, 1.0);
    0.375 * 4.0 * low / (4.0 * high + 8.0 * delta_u)
}

/// Smallest `R ≥ max(1, C_linear)` with `tail_modulus(R) ≤ ρ★`, by
/// bisection on the monotone closed-form tail bound.
fn cutoff_r0(model: &PotentialModel, rho_star: f64) -> Result<f64> {
    const R_MAX: f64 = 1e15;
    let onset = model.constants().linear_onset.max(1.0);
    let excess = |r: f64| model.tail_modulus(r).map(|t| t - rho_star);
    if excess(onset)? <= 0.0 {
        return Ok(onset);
    }
    if excess(R_MAX)? > 0.0 {
        return Err(Error::Certificate(format!(
            "tail modulus stays above ρ★ = {rho_star:.3e} for all R ≤ {R_MAX:e}"
        )));
    }
    let mut hi = onset * 2.0;
    while excess(hi)? > 0.0 {
        hi = (hi * 2.0).min(R_MAX);
    }
    let f = |r: f64| excess(r).unwrap_or(f64::INFINITY);
    let root = bisect(f, onset, hi, 1e-14)?;
    // the bisection midpoint may sit a hair below the crossing
    let mut r = root;
    while f(r) > 0.0 {
        r *= 1.0 + 1e-12;
    }
    Ok(r)
}

/// Generic corrector: Lyapunov solve, cutoff radius and improvement constants.
pub fn build_corrector(model: &PotentialModel, gamma: f64, lambda: f64) -> Result<CorrectorSpec> {
    check_rate(lambda)?;
    let consts = model.constants();
    let q_inf = &consts.q_infinity;
    let d = model.dim();
    let b = drift_matrix(q_inf, gamma);
    let source = corrector_source(q_inf, gamma, lambda);
    let sol = solve_lyapunov(&b, &source)?;
    let k = sol.k.symmetrize();
    let spec = symmetric_eigen(q_inf)?;
    let s = 0.5 * gamma * gamma * (1.0 - lambda);
    let (a_min, a_max) = (spec.min() + s, spec.max() + s);
    let a_low = coercivity(a_min, gamma, -1.0);
    let a_high = coercivity(a_max, gamma, 1.0);
    let kpq = k.block(d, 0, d, d);
    let kpp = k.block(d, d, d, d);
    let tail_coef = 2.0 * (kpq.op_norm() + kpp.op_norm())
        + 4.0 * spec.max()
        + gamma * gamma * (1.0 - lambda).abs()
        + gamma;
    let rho_star = 0.5 * (-tail_coef + (tail_coef * tail_coef + 1.25 * a_low).sqrt());
    let r0 = cutoff_r0(model, rho_star)?;
    let delta_u_r0 = model.delta_u_bound(r0)?;
    let c_imp_lower = 0.375 * 4.0 * a_low / (4.0 * a_high + 8.0 * delta_u_r0);
    let neg_h_inv = concavity_inverse(&k, gamma, c_imp_lower)?;
    let objective = |q: &[f64]| improvement_sup_p(model, gamma, lambda, &k, &neg_h_inv, c_imp_lower, q);
    let (_, sup) = ball_maximum(&objective, d, r0);
    let k_norm = k.op_norm();
    let c_m = 0.5 * k_norm;
    let bounds = model_bounds(model, gamma, lambda)?;
    let c2 = k.block(0, 0, d, d).trace().abs()
        + 3.0 * c_m * (consts.lipschitz + consts.grad_at_zero) / bounds.c1;
    Ok(CorrectorSpec {
        kind: CorrectorKind::LyapunovSolve,
        gamma,
        lambda,
        c_m,
        c_delta: 2.0 * d as f64 * k_norm,
        residual: Some(sol.residual),
        c_b1_norm: source.frobenius(),
        c_imp_lower,
        c_imp: sup.max(0.0),
        r0,
        rho_star,
        a_min,
        a_max,
        a_low,
        a_high,
        delta_u_r0,
        c_m_tilde: c_m / bounds.c1,
        c2_rate: c2,
        c2_offset: c2,
        k,
    })
}

/// `c_imp = 2√B/(2√B + γ)` with `B = 1 + (γ²/2)(1−λ)`.
pub fn multiwell_improvement_rate(gamma: f64, lambda: f64) -> f64 {
    let b = 1.0 + 0.5 * gamma * gamma * (1.0 - lambda);
    2.0 * b.sqrt() / (2.0 * b.sqrt() + gamma)
}

/// Closed-form `C_imp^{(d)} = (C_q²/(2B) + C_p²/2 + c_imp/4)·d`.
pub fn multiwell_improvement_offset(gamma: f64, lambda: f64, dim: usize) -> f64 {
    let b = 1.0 + 0.5 * gamma * gamma * (1.0 - lambda);
    let cq = 2.0 + 0.5 * gamma * gamma * (1.0 - lambda);
    let cp = 1.0 / gamma + 0.5 * gamma;
    (cq * cq / (2.0 * b) + 0.5 * cp * cp + 0.25 * multiwell_improvement_rate(gamma, lambda)) * dim as f64
}

/// Explicit multi-well corrector. `C_imp` is the exact separable supremum:
/// `d` times the one-dimensional supremum over `q ∈ ℝ`.
pub fn multiwell_corrector(model: &PotentialModel, gamma: f64, lambda: f64) -> Result<CorrectorSpec> {
    check_rate(lambda)?;
    if !matches!(model, PotentialModel::MultiWell(_)) {
        return Err(invalid("model", "explicit corrector needs the multi-well potential"));
    }
    let d = model.dim();
    let g2 = gamma * gamma;
    let kq = (2.0 + g2) / (2.0 * gamma);
    let kp = 1.0 / gamma;
    let mut diag = vec![kq; d];
    diag.extend(std::iter::repeat(kp).take(d));
    let k = Mat::diag(&diag);
    let c_imp_lower = multiwell_improvement_rate(gamma, lambda);
    let one = PotentialModel::from(MultiWell::new(1, gamma)?).with_lambda(lambda)?;
    let k1 = Mat::diag(&[kq, kp]);
    let neg_h_inv = concavity_inverse(&k1, gamma, c_imp_lower)?;
    let f = |s: f64| improvement_sup_p(&one, gamma, lambda, &k1, &neg_h_inv, c_imp_lower, &[s]);
    let (_, sup_pos) = grid_golden_max(f, 0.0, 50.0, 20_000, 1e-12);
    let (_, sup_neg) = grid_golden_max(|s| f(-s), 0.0, 50.0, 20_000, 1e-12);
    let sup = sup_pos.max(sup_neg).max(0.0) * d as f64;
    let (mu_min, _) = m_matrix_eigs(gamma, lambda);
    let c_m_tilde = (2.0 + g2) / (4.0 * gamma * mu_min);
    let source = corrector_source(&Mat::identity(d), gamma, lambda);
    let s = 0.5 * g2 * (1.0 - lambda);
    let k_norm = kq.max(kp);
    Ok(CorrectorSpec {
        kind: CorrectorKind::ExplicitMultiWell,
        gamma,
        lambda,
        c_m: 0.5 * k_norm,
        c_delta: 2.0 * d as f64 * k_norm,
        residual: None,
        c_b1_norm: source.frobenius(),
        c_imp_lower,
        c_imp: sup,
        r0: f64::INFINITY,
        rho_star: f64::NAN,
        a_min: 1.0 + s,
        a_max: 1.0 + s,
        a_low: coercivity(1.0 + s, gamma, -1.0),
        a_high: coercivity(1.0 + s, gamma, 1.0),
        delta_u_r0: 0.0,
        c_m_tilde,
        c2_rate: 2.0 * c_m_tilde,
        c2_offset: (2.0 + g2) * d as f64 / (2.0 * gamma),
        k,
    })
}

/// Which branch attains the minimum in the master rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Lyapunov,
    MetricLipschitz,
    MetricAdjust,
}

/// How `R₁` was selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffRule {
    /// Larger root of the equality case.
    EqualityRoot,
    /// The condition holds for every radius; the minimiser of its left side is used.
    Unconstrained,
}

/// Master contraction rate and its ingredients.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RateReport {
    pub lambda: f64,
    pub alpha: f64,
    pub gamma: f64,
    #[serde(rename = "L")]
    pub lipschitz: f64,
    #[serde(rename = "L_eff")]
    pub l_eff: f64,
    pub dim: usize,
    #[serde(rename = "D")]
    pub drift_offset: f64,
    pub kappa_adjust: f64,
    #[serde(rename = "R1")]
    pub r1: f64,
    pub r1_rule: CutoffRule,
    #[serde(rename = "Lambda0")]
    pub lambda0: f64,
    pub eta0: f64,
    pub theta: f64,
    #[serde(rename = "Lambda_alpha")]
    pub lambda_alpha: f64,
    pub branches: [f64; 3],
    pub active_branch: Branch,
    pub rate: f64,
    pub epsilon: f64,
    pub delta_alpha: f64,
    pub smallness_holds: bool,
    pub k1: f64,
    pub k2: f64,
}

/// `k₁ = θ/(1 + γ(1+θ))`, `k₂ = √((θ+1)² + γ⁻²)`.
pub fn equivalence_constants(theta: f64, gamma: f64) -> (f64, f64) {
    (
        theta / (1.0 + gamma * (1.0 + theta)),
        ((theta + 1.0).powi(2) + gamma.powi(-2)).sqrt(),
    )
}

/// `R₁²` from `x((1+θ(x))² + γ⁻²) ≥ K` with `θ(x) = θ∞ + b/x`.
pub fn cutoff_radius_sq(
    lambda: f64,
    gamma: f64,
    lipschitz: f64,
    l_eff: f64,
    dim: usize,
    drift_offset: f64,
) -> (f64, CutoffRule) {
    let g2 = gamma * gamma;
    let big_k = 96.0 * (dim as f64 + drift_offset) / (5.0 * lambda * (1.0 - 2.0 * lambda) * g2);
    let theta_inf = l_eff / g2;
    let b = 8.0 * l_eff / (lipschitz * g2);
    let a = (1.0 + theta_inf).powi(2) + 1.0 / g2;
    let lin = 2.0 * (1.0 + theta_inf) * b;
    let disc = (big_k - lin).powi(2) - 4.0 * a * b * b;
    if big_k > lin && disc >= 0.0 {
        ((big_k - lin + disc.sqrt()) / (2.0 * a), CutoffRule::EqualityRoot)
    } else {
        (b / a.sqrt(), CutoffRule::Unconstrained)
    }
}

pub fn contraction_rate(
    lambda: f64,
    alpha: f64,
    gamma: f64,
    lipschitz: f64,
    dim: usize,
    drift_offset: f64,
    kappa_adjust: f64,
) -> Result<RateReport> {
    check_rate(lambda)?;
    crate::potentials::positive("gamma", gamma)?;
    crate::potentials::positive("L", lipschitz)?;
    if !(alpha >= 0.0) {
        return Err(invalid("alpha", format!("must be ≥ 0, got {alpha}")));
    }
    if !(kappa_adjust > 0.0 && kappa_adjust < 1.0) {
        return Err(invalid("kappa_adjust", format!("must lie in (0, 1), got {kappa_adjust}")));
    }
    if !(dim as f64 + drift_offset > 0.0) {
        return Err(invalid("D", "need d + D > 0"));
    }
    let g2 = gamma * gamma;
    let l_eff = (1.0 + alpha * gamma) * lipschitz;
    let (x, r1_rule) = cutoff_radius_sq(lambda, gamma, lipschitz, l_eff, dim, drift_offset);
    let lambda0 = lipschitz * x / 8.0;
    let eta0 = 1.0 / lambda0;
    let theta = (1.0 + eta0) * l_eff / g2;
    let lambda_alpha = l_eff * x / 8.0;
    let bump = lambda_alpha.sqrt() * (-lambda_alpha).exp();
    let branches = [lambda * l_eff / g2, bump * l_eff / g2, kappa_adjust * bump];
    let (idx, min) = branches
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if *v < acc.1 { (i, *v) } else { acc });
    let rate = gamma / 384.0 * min;
    let ratio = eta0 / (1.0 + eta0);
    let (k1, k2) = equivalence_constants(theta, gamma);
    Ok(RateReport {
        lambda,
        alpha,
        gamma,
        lipschitz,
        l_eff,
        dim,
        drift_offset,
        kappa_adjust,
        r1: x.sqrt(),
        r1_rule,
        lambda0,
        eta0,
        theta,
        lambda_alpha,
        branches,
        active_branch: [Branch::Lyapunov, Branch::MetricLipschitz, Branch::MetricAdjust][idx],
        rate,
        epsilon: 4.0 * rate / (gamma * (dim as f64 + drift_offset)),
        delta_alpha: ratio - alpha * lipschitz / gamma,
        smallness_holds: alpha <= (1.0 - kappa_adjust) * ratio * gamma / lipschitz,
        k1,
        k2,
    })
}

/// `α_pos`: largest step keeping `λ + δα − C_λα² ≥ λ/2`, capped at 1.
pub fn alpha_pos(lambda: f64, delta: f64, c_lambda: f64) -> f64 {
    if c_lambda > 0.0 {
        ((delta + (delta * delta + 2.0 * c_lambda * lambda).sqrt()) / (2.0 * c_lambda)).min(1.0)
    } else {
        (lambda / (2.0 * delta.abs().max(1.0))).min(1.0)
    }
}

/// First-order expansion of the drift rate of `V_α = V₀ + α𝓜`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DriftExpansion {
    pub lambda: f64,
    pub gamma: f64,
    #[serde(rename = "A")]
    pub drift_offset: f64,
    #[serde(rename = "C_M_tilde")]
    pub c_m_tilde: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    #[serde(rename = "C2_offset")]
    pub c2_offset: f64,
    pub c_imp_lower: f64,
    pub delta: f64,
    #[serde(rename = "C_lambda")]
    pub c_lambda: f64,
    pub alpha0: f64,
    pub alpha_star: f64,
    pub alpha_pos: f64,
    pub alpha1: f64,
    /// `δ > 0`: a first-order gain is provable.
    pub first_order_gain: bool,
}

impl DriftExpansion {
    /// `λ + δα − C_λα²`.
    pub fn lambda_lower(&self, alpha: f64) -> f64 {
        self.lambda + self.delta * alpha - self.c_lambda * alpha * alpha
    }

    /// `A′_α`.
    pub fn offset(&self, alpha: f64) -> f64 {
        self.drift_offset
            + alpha / self.gamma
                * (self.c1 + alpha * self.c2_offset + self.c_m_tilde * (self.lambda + self.c_imp_lower))
    }
}

pub fn drift_expansion(
    model: &PotentialModel,
    corrector: &CorrectorSpec,
    baseline: &BaselineDrift,
) -> Result<DriftExpansion> {
    let gamma = corrector.gamma;
    let lambda = corrector.lambda;
    let bounds = model_bounds(model, gamma, lambda)?;
    let d = model.dim();
    let kpp = corrector.k.block(d, d, d, d);
    let c1 = corrector.c_imp + gamma * kpp.trace() + baseline.k_delta;
    let c_m_tilde = corrector.c_m_tilde;
    let delta = corrector.c_imp_lower - lambda * c_m_tilde;
    let c_lambda = corrector.c2_rate + c_m_tilde * corrector.c_imp_lower;
    let alpha_star = bounds.c1 / (2.0 * corrector.c_m);
    let a_pos = alpha_pos(lambda, delta, c_lambda);
    Ok(DriftExpansion {
        lambda,
        gamma,
        drift_offset: model.constants().drift_offset,
        c_m_tilde,
        c1,
        c2: corrector.c2_rate,
        c2_offset: corrector.c2_offset,
        c_imp_lower: corrector.c_imp_lower,
        delta,
        c_lambda,
        alpha0: baseline.alpha0,
        alpha_star,
        alpha_pos: a_pos,
        alpha1: baseline.alpha0.min(1.0).min(alpha_star).min(a_pos),
        first_order_gain: delta > 0.0,
    })
}

/// `h(Λ) = √Λ e^{−Λ}`.
pub fn bump(l: f64) -> f64 {
    l.sqrt() * (-l).exp()
}

/// `h″(Λ) = (Λ² − Λ − ¼) Λ^{−3/2} e^{−Λ}`.
pub fn bump_second(l: f64) -> f64 {
    (l * l - l - 0.25) * l.powf(-1.5) * (-l).exp()
}

/// Metric-branch acceleration constants.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MetricAcceleration {
    pub theta0: f64,
    #[serde(rename = "J2")]
    pub j2: f64,
    #[serde(rename = "Lambda0")]
    pub lambda0: f64,
    /// `D = δ − γλ`.
    #[serde(rename = "D")]
    pub gap: f64,
    #[serde(rename = "c_Lambda")]
    pub c_lambda_metric: f64,
    #[serde(rename = "M_h")]
    pub m_h: f64,
    pub c3_star: f64,
    pub c3: f64,
    pub c2: f64,
    pub alpha_3a: f64,
    pub alpha_3b: f64,
    pub alpha_metric_acc: f64,
}

/// Full acceleration ledger.
#[derive(Debug, Clone, Serialize)]
pub struct AccelerationLedger {
    pub model: &'static str,
    pub lambda: f64,
    pub gamma: f64,
    #[serde(rename = "L")]
    pub lipschitz: f64,
    pub dim: usize,
    pub kappa_adjust: f64,
    pub bounds: LyapunovBounds,
    pub baseline: BaselineDrift,
    pub corrector_kind: CorrectorKind,
    pub expansion: DriftExpansion,
    /// Rate at `α = 0` with `D = A`.
    pub c0: f64,
    pub base_rate: RateReport,
    /// `θ` of the master rate at `α = 0`.
    pub theta_master: f64,
    pub kappa: f64,
    #[serde(rename = "C_prime")]
    pub c_prime: f64,
    pub branch_gap_at_zero: f64,
    pub alpha_branch: Option<f64>,
    pub alpha_branch_acc: Option<f64>,
    pub alpha_lyapunov: f64,
    pub metric: Option<MetricAcceleration>,
    pub kappa_global: Option<f64>,
    pub alpha_global: Option<f64>,
    pub alpha_w2: Option<f64>,
    pub c0_w2: f64,
    pub kappa_w2: Option<f64>,
    #[serde(rename = "C_rho_unif")]
    pub c_rho_unif: Option<f64>,
    pub notes: Vec<String>,
}

/// Metric-acceleration constants, or the reason they do not exist.
fn metric_acceleration(
    lambda: f64,
    gamma: f64,
    lipschitz: f64,
    dim: usize,
    drift_offset: f64,
    exp: &DriftExpansion,
) -> std::result::Result<MetricAcceleration, String> {
    let theta0 = lipschitz / (gamma * gamma);
    let j2 = 12.0 / 5.0 * (1.0 + 2.0 * theta0 + 2.0 * theta0 * theta0) * (dim as f64 + drift_offset)
        / (gamma * gamma * (1.0 - 2.0 * lambda));
    let lambda0 = j2 * lipschitz / lambda;
    let gap = exp.delta - gamma * lambda;
    if gap <= 0.0 {
        return Err(format!("δ − γλ = {gap:.4e} ≤ 0: metric branch gains nothing"));
    }
    if lambda0 <= 0.5 {
        return Err(format!("Λ₀ = {lambda0:.4e} ≤ 1/2"));
    }
    let c_lambda_metric = j2 * lipschitz * gap / (8.0 * lambda * lambda);
    let (_, m_h) = grid_golden_max(|l| bump_second(l).abs(), 0.5 * lambda0, lambda0, 256, 1e-10);
    let s_h = 1.0 - 1.0 / (2.0 * lambda0);
    let c3_star = 0.5 * s_h * c_lambda_metric;
    let c3 = 0.99 * c3_star;
    let mut alpha_3a = exp.alpha1.min(1.0);
    if exp.c_lambda > 0.0 {
        alpha_3a = alpha_3a
            .min(gap / (4.0 * exp.c_lambda))
            .min((lambda / (2.0 * exp.c_lambda)).sqrt());
    }
    let alpha_3b = (4.0 * lambda / gap).min(bump(lambda0) * s_h / (m_h * c_lambda_metric));
    Ok(MetricAcceleration {
        theta0,
        j2,
        lambda0,
        gap,
        c_lambda_metric,
        m_h,
        c3_star,
        c3,
        c2: gamma + c3,
        alpha_3a,
        alpha_3b,
        alpha_metric_acc: alpha_3a.min(alpha_3b),
    })
}

/// `min(Λ̃₂, Λ̃₃) − Λ̃₁` along the improved drift path.
fn branch_gap(exp: &DriftExpansion, lipschitz: f64, dim: usize, kappa_adjust: f64, beta: f64) -> Result<f64> {
    let lam = exp.lambda_lower(beta).clamp(f64::MIN_POSITIVE, MAX_RATE);
    let r = contraction_rate(lam, beta, exp.gamma, lipschitz, dim, exp.offset(beta), kappa_adjust)?;
    Ok(r.branches[1].min(r.branches[2]) - r.branches[0])
}

/// Assembles the acceleration ledger for a model, its corrector and the
/// metric adjustment `κ_adjust`.
pub fn acceleration_report(
    model: &PotentialModel,
    corrector: &CorrectorSpec,
    kappa_adjust: f64,
) -> Result<AccelerationLedger> {
    let gamma = corrector.gamma;
    let lambda = corrector.lambda;
    let consts = model.constants();
    if (consts.drift_rate - lambda).abs() > 1e-15 {
        return Err(invalid("lambda", "corrector and model use different dissipativity rates"));
    }
    let lipschitz = consts.lipschitz;
    let dim = model.dim();
    let offset = consts.drift_offset;
    let bounds = model_bounds(model, gamma, lambda)?;
    let baseline = model_baseline(model, gamma)?;
    let exp = drift_expansion(model, corrector, &baseline)?;
    let base_rate = contraction_rate(lambda, 0.0, gamma, lipschitz, dim, offset, kappa_adjust)?;
    let c0 = base_rate.rate;
    let mut notes = Vec::new();
    if !exp.first_order_gain {
        notes.push(format!("δ = {:.4e} ≤ 0: no provable first-order gain", exp.delta));
    }

    let kappa = lipschitz * (exp.delta + gamma * lambda) / (768.0 * gamma);
    let c_prime = lipschitz / (384.0 * gamma) * (1.0 + gamma) * exp.c_lambda;
    let kappa_cap = if c_prime > 0.0 { kappa / c_prime } else { f64::INFINITY };

    let gap0 = branch_gap(&exp, lipschitz, dim, kappa_adjust, 0.0)?;
    let (alpha_branch, alpha_branch_acc) = if gap0 > 0.0 && exp.alpha1 > 0.0 {
        let grid = geomspace(exp.alpha1 * 1e-4, exp.alpha1, 256);
        let mut last = None;
        for beta in grid {
            if branch_gap(&exp, lipschitz, dim, kappa_adjust, beta)? > 0.0 {
                last = Some(beta);
            } else {
                break;
            }
        }
        match last {
            Some(b) => (Some(b), Some(b.min(1.0).min(kappa_cap))),
            None => {
                notes.push("Lyapunov branch loses activity on the whole α-grid".into());
                (None, None)
            }
        }
    } else {
        notes.push(format!(
            "Lyapunov branch not strictly active at α = 0 (gap {gap0:.4e}); α_branch,acc absent"
        ));
        (None, None)
    };
    let alpha_lyapunov = alpha_branch_acc.unwrap_or_else(|| exp.alpha1.min(1.0).min(kappa_cap));

    let metric = match metric_acceleration(lambda, gamma, lipschitz, dim, offset, &exp) {
        Ok(m) => Some(m),
        Err(reason) => {
            notes.push(format!("metric branch absent: {reason}"));
            None
        }
    };
    let kappa_global = metric.map(|m| kappa.min(c0 * m.c2).min(c0 * m.c3));
    let alpha_global = metric.map(|m| alpha_lyapunov.min(m.alpha_metric_acc));
    let alpha_w2 = alpha_global.map(|a| a.min(exp.alpha_pos));
    let c_rho_unif = match alpha_w2 {
        Some(a) if a > 0.0 && exp.first_order_gain => {
            match uniform_w2_constant(&exp, &bounds, corrector, lipschitz, dim, kappa_adjust, c0, a) {
                Ok(v) => Some(v),
                Err(e) => {
                    notes.push(format!("C_ρ^unif unavailable: {e}"));
                    None
                }
            }
        }
        _ => None,
    };
    Ok(AccelerationLedger {
        model: model.name(),
        lambda,
        gamma,
        lipschitz,
        dim,
        kappa_adjust,
        bounds,
        baseline,
        corrector_kind: corrector.kind,
        expansion: exp,
        c0,
        theta_master: base_rate.theta,
        base_rate,
        kappa,
        c_prime,
        branch_gap_at_zero: gap0,
        alpha_branch,
        alpha_branch_acc,
        alpha_lyapunov,
        metric,
        kappa_global,
        alpha_global,
        alpha_w2,
        c0_w2: 0.5 * c0,
        kappa_w2: kappa_global.map(|k| 0.5 * k),
        c_rho_unif,
        notes,
    })
}

/// Uniform `W₂` comparison constant over `α ∈ (0, α_W2]` and
/// `λ ∈ [λ/2, λ + δα_W2]`, scanned on a 9 × 9 grid.
#[allow(clippy::too_many_arguments)]
fn uniform_w2_constant(
    exp: &DriftExpansion,
    bounds: &LyapunovBounds,
    corrector: &CorrectorSpec,
    lipschitz: f64,
    dim: usize,
    kappa_adjust: f64,
    c0: f64,
    alpha_w2: f64,
) -> Result<f64> {
    let gamma = exp.gamma;
    let lo = 0.5 * exp.lambda;
    let hi = (exp.lambda + exp.delta * alpha_w2).min(MAX_RATE);
    let d = corrector.k.rows() / 2;
    let c_q_unit = corrector.k.block(d, d, d, d).op_norm() + corrector.k.block(d, 0, d, d).op_norm();
    let (mut r1_max, mut cr_min, mut g_min, mut f_min, mut k1_min) =
        (0.0_f64, f64::INFINITY, f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for i in 0..9 {
        let lam = lo + (hi - lo) * i as f64 / 8.0;
        for j in 1..=8 {
            let alpha = alpha_w2 * j as f64 / 8.0;
            let rate = contraction_rate(lam, alpha, gamma, lipschitz, dim, exp.offset(alpha), kappa_adjust)?;
            let cbar = gradient_constant(rate.theta, gamma, alpha * c_q_unit);
            let prof: ProfileSpec = build_profile(&rate, cbar, crate::coupling::DEFAULT_GRID)?;
            r1_max = r1_max.max(prof.r1);
            cr_min = cr_min.min(prof.c_r);
            g_min = g_min.min(prof.g_star);
            f_min = f_min.min(prof.c0);
            k1_min = k1_min.min(rate.k1);
        }
    }
    let eps_minus = 4.0 * c0 / (gamma * (dim as f64 + exp.offset(alpha_w2)));
    let c_v = 2.0 / bounds.c1_prime;
    Ok((r1_max / (k1_min * k1_min * g_min * cr_min)).max(4.0 * c_v / f_min) / eps_minus)
}

/// Multi-well case table (one-dimensional constants of the tensorised theory).
#[derive(Debug, Clone, Serialize)]
pub struct MultiWellTable {
    pub gamma: f64,
    pub lambda: f64,
    #[serde(rename = "A1")]
    pub a1: f64,
    pub m_q_coefficient: f64,
    pub m_p_coefficient: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub c_imp: f64,
    pub c1_mw: f64,
    #[serde(rename = "C_M_tilde_MW")]
    pub c_m_tilde: f64,
    #[serde(rename = "C2_MW")]
    pub c2: f64,
    #[serde(rename = "C2_d_MW")]
    pub c2_d: f64,
    #[serde(rename = "C_imp_d")]
    pub c_imp_d: f64,
    pub delta_mw: f64,
    #[serde(rename = "C_lambda_MW")]
    pub c_lambda: f64,
    pub lambda_star: f64,
}

/// `δ_MW(λ) = c_imp − λ C̃_𝓜^MW`.
pub fn multiwell_delta(gamma: f64, lambda: f64) -> f64 {
    let (mu_min, _) = m_matrix_eigs(gamma, lambda);
    multiwell_improvement_rate(gamma, lambda) - lambda * (2.0 + gamma * gamma) / (4.0 * gamma * mu_min)
}

/// Largest `λ★ ≤ 1/4` with `δ_MW(λ) > γλ` on all of `(0, λ★]`.
pub fn multiwell_lambda_star(gamma: f64) -> Result<f64> {
    let f = |l: f64| multiwell_delta(gamma, l) - gamma * l;
    largest_positive_prefix(f, MAX_RATE)
}

fn largest_positive_prefix(f: impl Fn(f64) -> f64, upper: f64) -> Result<f64> {
    const SCAN: usize = 1000;
    let h = upper / SCAN as f64;
    if !(f(h * 1e-6) > 0.0) {
        return Err(Error::Certificate("condition fails already as λ → 0".into()));
    }
    let mut prev = h * 1e-6;
    for i in 1..=SCAN {
        let x = h * i as f64;
        if f(x) <= 0.0 {
            let (mut lo, mut hi) = (prev, x);
            while hi - lo > 1e-15 * hi {
                let mid = 0.5 * (lo + hi);
                if f(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(lo);
        }
        prev = x;
    }
    Ok(upper)
}

pub fn multiwell_table(gamma: f64, lambda: f64) -> Result<MultiWellTable> {
    check_rate(lambda)?;
    let g2 = gamma * gamma;
    let b = 1.0 + 0.5 * g2 * (1.0 - lambda);
    let (mu_min, _) = m_matrix_eigs(gamma, lambda);
    let c_imp = multiwell_improvement_rate(gamma, lambda);
    let c_m_tilde = (2.0 + g2) / (4.0 * gamma * mu_min);
    let c2 = 2.0 * c_m_tilde;
    Ok(MultiWellTable {
        gamma,
        lambda,
        a1: well_offset(gamma),
        m_q_coefficient: (2.0 + g2) / (4.0 * gamma),
        m_p_coefficient: 1.0 / (2.0 * gamma),
        b,
        c_imp,
        c1_mw: mu_min,
        c_m_tilde,
        c2,
        c2_d: (2.0 + g2) / (2.0 * gamma),
        c_imp_d: multiwell_improvement_offset(gamma, lambda, 1),
        delta_mw: c_imp - lambda * c_m_tilde,
        c_lambda: c2 + c_m_tilde * c_imp,
        lambda_star: multiwell_lambda_star(gamma)?,
    })
}

/// Feasibility proxies shared by the regression and classification cases.
#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityProxies {
    pub lambda_bar: f64,
    #[serde(rename = "delta_U_plus")]
    pub delta_u_plus: f64,
    pub a_min_minus: f64,
    pub a_max_plus: f64,
    pub c1: f64,
    pub eta: f64,
    #[serde(rename = "C_B")]
    pub c_b: f64,
    #[serde(rename = "C_B1_plus")]
    pub c_b1_plus: f64,
    #[serde(rename = "C_M_tilde_plus")]
    pub c_m_tilde_plus: f64,
    pub c_imp_minus: f64,
    pub lambda_star: f64,
}

#[allow(clippy::too_many_arguments)]
fn feasibility(
    gamma: f64,
    lambda_bar: f64,
    m_inf: f64,
    big_m_inf: f64,
    delta_u_plus: f64,
    a_min_minus: f64,
    a_max_plus: f64,
) -> FeasibilityProxies {
    let g2 = gamma * gamma;
    let (c1, _) = m_matrix_eigs(gamma, lambda_bar);
    let eta = 0.5 * (gamma - (g2 - 4.0 * m_inf).max(0.0).sqrt());
    let c_b = 1.0 + gamma / (2.0 * m_inf.sqrt()) + big_m_inf.sqrt() + 1.0 / m_inf.sqrt();
    let c_b1_plus = 2.0 * (1.0 + gamma + big_m_inf + 0.5 * g2);
    let c_m_tilde_plus = 1.0 / (2.0 * c1) * c_b * c_b / (2.0 * eta) * c_b1_plus;
    let c_imp_minus = improvement_rate(a_min_minus, a_max_plus, gamma, delta_u_plus);
    FeasibilityProxies {
        lambda_bar,
        delta_u_plus,
        a_min_minus,
        a_max_plus,
        c1,
        eta,
        c_b,
        c_b1_plus,
        c_m_tilde_plus,
        c_imp_minus,
        lambda_star: lambda_bar.min(c_imp_minus / (gamma + c_m_tilde_plus)),
    }
}

/// Linear-regression case table.
#[derive(Debug, Clone, Serialize)]
pub struct RegressionTable {
    pub gamma: f64,
    pub lambda: f64,
    pub m_inf: f64,
    #[serde(rename = "M_inf")]
    pub big_m_inf: f64,
    pub c0_lr: f64,
    pub c1_lr: f64,
    pub rho_star: f64,
    /// `max{1, C_linear, c₀/ρ★, (c₁/ρ★)^{1/(2−p)}}`.
    #[serde(rename = "R0_closed_form")]
    pub r0_closed: f64,
    /// Smallest radius with tail bound ≤ ρ★.
    #[serde(rename = "R0")]
    pub r0: f64,
    pub k_q: f64,
    #[serde(rename = "C2_LR")]
    pub c2: f64,
    #[serde(rename = "C2_d_LR")]
    pub c2_d: f64,
    pub feasibility: FeasibilityProxies,
}

pub fn regression_table(model: &LinearRegression, gamma: f64) -> Result<RegressionTable> {
    let wrapped = PotentialModel::LinearRegression(model.clone());
    let consts = wrapped.constants();
    let lambda = consts.drift_rate;
    let corrector = build_corrector(&wrapped, gamma, lambda)?;
    let spec = symmetric_eigen(&consts.q_infinity)?;
    let (m_inf, big_m_inf) = (spec.min(), spec.max());
    let (c0, c1) = model.tail_coefficients();
    let p = model.exponent();
    let rho = corrector.rho_star;
    let r0_closed = 1f64
        .max(consts.linear_onset)
        .max(c0 / rho)
        .max((c1 / rho).powf(1.0 / (2.0 - p)));
    let d = wrapped.dim();
    let k_q = corrector.block(0, 0).op_norm() + corrector.block(0, 1).op_norm();
    let bounds = model_bounds(&wrapped, gamma, lambda)?;
    let l = consts.lipschitz;
    let b0 = consts.grad_at_zero;
    let lambda_bar = MAX_RATE.min(m_inf / 2.0);
    let r = consts.linear_onset.max(1.0);
    let delta_u_plus = wrapped.delta_u_bound(r)?;
    let g2 = gamma * gamma;
    Ok(RegressionTable {
        gamma,
        lambda,
        m_inf,
        big_m_inf,
        c0_lr: c0,
        c1_lr: c1,
        rho_star: rho,
        r0_closed,
        r0: corrector.r0,
        k_q,
        c2: k_q / bounds.c1 * (0.5 * (3.0 * l + 1.0)).max(0.5 * (l + 1.0)),
        c2_d: k_q * b0 * b0 + d as f64 * corrector.block(0, 0).op_norm(),
        feasibility: feasibility(
            gamma,
            lambda_bar,
            m_inf,
            big_m_inf,
            delta_u_plus,
            m_inf + 0.5 * g2 * (1.0 - lambda_bar),
            big_m_inf + 0.5 * g2,
        ),
    })
}

/// Classification case table.
#[derive(Debug, Clone, Serialize)]
pub struct ClassificationTable {
    pub gamma: f64,
    pub lambda: f64,
    #[serde(rename = "Phi1")]
    pub phi1: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
    #[serde(rename = "A_phi")]
    pub a_phi: f64,
    pub rho_star: f64,
    #[serde(rename = "R0_closed_form")]
    pub r0_closed: f64,
    #[serde(rename = "R0")]
    pub r0: f64,
    pub k_q: f64,
    #[serde(rename = "C2_BC")]
    pub c2: f64,
    #[serde(rename = "C2_d_BC")]
    pub c2_d: f64,
    pub a_minus: f64,
    pub feasibility: FeasibilityProxies,
}

pub fn classification_table(model: &Classification, gamma: f64) -> Result<ClassificationTable> {
    let wrapped = PotentialModel::Classification(model.clone());
    let consts = wrapped.constants();
    let lambda = consts.drift_rate;
    let corrector = build_corrector(&wrapped, gamma, lambda)?;
    let iota = model.iota();
    let c0 = model.remainder_bound();
    let rho = corrector.rho_star;
    let k_q = corrector.block(0, 0).op_norm() + corrector.block(0, 1).op_norm();
    let bounds = model_bounds(&wrapped, gamma, lambda)?;
    let l = consts.lipschitz;
    let d = wrapped.dim();
    let lambda_bar = MAX_RATE.min(iota / 2.0);
    let r = consts.linear_onset.max(1.0);
    let delta_u_plus = c0 / r + model.loss_offset() / (r * r);
    let a_minus = iota + 0.5 * gamma * gamma * (1.0 - lambda_bar);
    Ok(ClassificationTable {
        gamma,
        lambda,
        phi1: tukey_slope_bound(model.scale()),
        c0,
        a_phi: model.loss_offset(),
        rho_star: rho,
        r0_closed: 1f64.max(consts.linear_onset).max(c0 / rho),
        r0: corrector.r0,
        k_q,
        c2: k_q / bounds.c1 * (0.5 * (3.0 * l + 1.0)).max(0.5 * (l + 1.0)),
        c2_d: k_q * c0 * c0 + d as f64 * corrector.block(0, 0).op_norm(),
        a_minus,
        feasibility: feasibility(gamma, lambda_bar, iota, iota, delta_u_plus, a_minus, a_minus),
    })
}

/// Case-specific constant table.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum CaseTable {
    MultiWell(MultiWellTable),
    LinearRegression(RegressionTable),
    Classification(ClassificationTable),
}

pub fn case_study_constants(model: &PotentialModel, gamma: f64) -> Result<CaseTable> {
    match model {
        PotentialModel::MultiWell(_) => Ok(CaseTable::MultiWell(multiwell_table(
            gamma,
            model.constants().drift_rate,
        )?)),
        PotentialModel::LinearRegression(m) => Ok(CaseTable::LinearRegression(regression_table(m, gamma)?)),
        PotentialModel::Classification(m) => Ok(CaseTable::Classification(classification_table(m, gamma)?)),
        PotentialModel::Gaussian(_) => Err(invalid("model", "no case table for the Gaussian reference")),
    }
}

/// Points `z(r, φ) = (r cos φ·u, r sin φ·v)` of a radial × angular grid in a
/// fixed `(q, p)` plane; `u` and `v` are unit vectors.
pub fn phase_plane_grid(d: usize, radius: f64, radial: usize, angular: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let u = vec![1.0 / (d as f64).sqrt(); d];
    let v: Vec<f64> = if d == 1 {
        vec![1.0]
    } else {
        (0..d)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } / (d as f64).sqrt())
            .collect()
    };
    let mut pts = Vec::with_capacity(radial * angular);
    for i in 0..radial {
        let r = radius * i as f64 / (radial - 1).max(1) as f64;
        for j in 0..angular {
            let t = 2.0 * std::f64::consts::PI * j as f64 / angular as f64;
            let q = u.iter().map(|x| r * t.cos() * x).collect();
            let p = v.iter().map(|x| r * t.sin() * x).collect();
            pts.push((q, p));
        }
    }
    pts
}

/// Smallest baseline drift margin over a phase-plane grid.
pub fn certify_baseline_drift(
    model: &PotentialModel,
    baseline: &BaselineDrift,
    alpha: f64,
    radius: f64,
    radial: usize,
    angular: usize,
) -> f64 {
    use rayon::prelude::*;
    phase_plane_grid(model.dim(), radius, radial, angular)
        .par_iter()
        .map(|(q, p)| baseline_drift_margin(model, baseline, alpha, q, p))
        .reduce(|| f64::INFINITY, f64::min)
}

/// Smallest improvement margin over a phase-plane grid.
pub fn certify_improvement(
    model: &PotentialModel,
    corrector: &CorrectorSpec,
    radius: f64,
    radial: usize,
    angular: usize,
) -> f64 {
    use rayon::prelude::*;
    phase_plane_grid(model.dim(), radius, radial, angular)
        .par_iter()
        .map(|(q, p)| corrector.improvement_margin(model, q, p))
        .reduce(|| f64::INFINITY, f64::min)
}

/// Convenience: eigenvalues of the `M` matrix from the generic 2×2 solver.
pub fn m_matrix_eigs_numeric(gamma: f64, lambda: f64) -> (f64, f64) {
    let g2 = gamma * gamma;
    symmetric_eigs_2x2(0.25 * g2 * (1.0 - lambda), 0.25 * gamma, 0.5)
}

/// Golden-section helper re-exported for the CLI table.
pub fn bump_curvature_sup(lo: f64, hi: f64) -> f64 {
    golden_max(|l| bump_second(l).abs(), lo, hi, 1e-10).1
}
