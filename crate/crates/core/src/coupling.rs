//! Reflection/synchronous cutoff coupling of two HFHR copies, the concave
//! distance profile and the Lyapunov-weighted semimetric.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::constants::{equivalence_constants, LyapunovFunction, RateReport};
use crate::error::{invalid, Error, Result};
use crate::integrators::{channel_rng, csv_error, fill_normal, hfhr_update, Channel, NoiseStreams, PhasePoint, SamplerParams};
use crate::linalg::{dot, norm};
use crate::numerics::cumulative_simpson;
use crate::potentials::PotentialModel;

/// Default number of quadrature intervals for the profile tables.
pub const DEFAULT_GRID: usize = 4096;

/// Default cutoff `ξ` relative to `R₁`.
pub const DEFAULT_CUTOFF_FRACTION: f64 = 1e-4;

/// `r(z, z′) = θ|Δq| + |Δq + γ⁻¹Δp|`.
pub fn phase_distance(z: &PhasePoint, w: &PhasePoint, theta: f64, gamma: f64) -> f64 {
    let mut dq2 = 0.0;
    let mut eff2 = 0.0;
    for i in 0..z.q.len() {
        let dq = z.q[i] - w.q[i];
        let e = dq + (z.p[i] - w.p[i]) / gamma;
        dq2 += dq * dq;
        eff2 += e * e;
    }
    theta * dq2.sqrt() + eff2.sqrt()
}

/// `C̄_V = max{1, (2θ)⁻¹} + C_Q/(γk₁)`, with `C_Q = ‖A_pp‖ + ‖A_pq‖` for the
/// quadratic part of `V`.
pub fn gradient_constant(theta: f64, gamma: f64, c_q: f64) -> f64 {
    let (k1, _) = equivalence_constants(theta, gamma);
    1f64.max(0.5 / theta) + c_q / (gamma * k1)
}

/// `C_Q` of `V₀`, whose quadratic part has `A_pp = I` and `A_pq = (γ/2)I`.
pub fn baseline_quadratic_norm(gamma: f64) -> f64 {
    1.0 + 0.5 * gamma
}

/// Tabulated concave profile `f` on `[0, R₁]` with its building blocks.
#[derive(Debug, Clone, Serialize)]
pub struct ProfileSpec {
    pub r1: f64,
    pub theta: f64,
    pub gamma: f64,
    pub rate: f64,
    pub epsilon: f64,
    pub c_bar_v: f64,
    /// `φ(s) = exp(−a s²)`.
    pub exponent: f64,
    pub k1: f64,
    pub k2: f64,
    pub step: f64,
    #[serde(skip)]
    pub phi: Vec<f64>,
    #[serde(skip)]
    pub big_phi: Vec<f64>,
    #[serde(skip)]
    pub g: Vec<f64>,
    #[serde(skip)]
    pub f: Vec<f64>,
    pub c_r: f64,
    pub g_star: f64,
    /// Plateau `f(R₁)`.
    pub c0: f64,
    /// `|f_{2N}(R₁) − f_N(R₁)|`.
    pub richardson_delta: f64,
}

struct Tables {
    phi: Vec<f64>,
    big_phi: Vec<f64>,
    g: Vec<f64>,
    f: Vec<f64>,
}

fn tabulate(r1: f64, a: f64, rate: f64, gamma: f64, intervals: usize) -> Tables {
    let h = r1 / intervals as f64;
    let phi: Vec<f64> = (0..=intervals)
        .map(|i| {
            let s = h * i as f64;
            (-a * s * s).exp()
        })
        .collect();
    let big_phi = cumulative_simpson(&phi, h);
    let ratio: Vec<f64> = big_phi.iter().zip(&phi).map(|(b, p)| b / p).collect();
    let inner = cumulative_simpson(&ratio, h);
    let g: Vec<f64> = inner.iter().map(|v| 1.0 - 2.25 * rate * gamma * v).collect();
    let slope: Vec<f64> = phi.iter().zip(&g).map(|(p, g)| p * g).collect();
    let f = cumulative_simpson(&slope, h);
    Tables { phi, big_phi, g, f }
}

/// Builds the profile for the rate `c`, weight `ε` and cutoff `R₁` of a
/// [`RateReport`].
pub fn build_profile(rate: &RateReport, c_bar_v: f64, intervals: usize) -> Result<ProfileSpec> {
    if intervals < 2 || intervals % 2 == 1 {
        return Err(invalid("grid", format!("need an even number of intervals, got {intervals}")));
    }
    let gamma = rate.gamma;
    let a = (1.0 + rate.eta0) * rate.l_eff / 8.0 + 0.5 * gamma * gamma * rate.epsilon * c_bar_v;
    let t = tabulate(rate.r1, a, rate.rate, gamma, intervals);
    let fine = tabulate(rate.r1, a, rate.rate, gamma, 2 * intervals);
    let c0 = t.f[intervals];
    let richardson_delta = (fine.f[2 * intervals] - c0).abs();
    let g_star = t.g.iter().copied().fold(f64::INFINITY, f64::min);
    if !(g_star >= 0.5) {
        return Err(Error::Certificate(format!(
            "profile correction factor drops to g* = {g_star:.4} < 1/2; rate c = {:.3e} too large",
            rate.rate
        )));
    }
    let scale = c0.abs().max(1e-300);
    for w in t.f.windows(3) {
        let (d1, d2) = (w[1] - w[0], w[2] - w[1]);
        if d1 < 0.0 || d2 - d1 > 1e-12 * scale {
            return Err(Error::Numerical("tabulated profile is not increasing and concave".into()));
        }
    }
    Ok(ProfileSpec {
        r1: rate.r1,
        theta: rate.theta,
        gamma,
        rate: rate.rate,
        epsilon: rate.epsilon,
        c_bar_v,
        exponent: a,
        k1: rate.k1,
        k2: rate.k2,
        step: rate.r1 / intervals as f64,
        c_r: t.phi[intervals],
        g_star,
        c0,
        richardson_delta,
        phi: t.phi,
        big_phi: t.big_phi,
        g: t.g,
        f: t.f,
    })
}

impl ProfileSpec {
    /// `f(r)` by cubic Hermite interpolation between nodes, using
    /// `f′ = φg`; constant beyond `R₁`.
    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        if r >= self.r1 {
            return self.c0;
        }
        let h = self.step;
        let i = ((r / h) as usize).min(self.f.len() - 2);
        let t = (r - h * i as f64) / h;
        let (y0, y1) = (self.f[i], self.f[i + 1]);
        let (m0, m1) = (self.phi[i] * self.g[i] * h, self.phi[i + 1] * self.g[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1
    }

    /// `C_ρ = ε⁻¹ max{k₁⁻²R₁/(g* c_r), 4C_V/c₀}`.
    pub fn w2_constant(&self, moment_constant: f64) -> f64 {
        let local = self.r1 / (self.k1 * self.k1 * self.g_star * self.c_r);
        local.max(4.0 * moment_constant / self.c0) / self.epsilon
    }

    /// Grid abscissae.
    pub fn nodes(&self) -> Vec<f64> {
        (0..self.f.len()).map(|i| self.step * i as f64).collect()
    }
}

/// `ρ_V(z, z′) = f(r(z, z′))(1 + εV(z) + εV(z′))`.
pub fn semimetric(
    z: &PhasePoint,
    w: &PhasePoint,
    profile: &ProfileSpec,
    model: &PotentialModel,
    lyapunov: &LyapunovFunction,
    epsilon: f64,
) -> f64 {
    let r = phase_distance(z, w, profile.theta, profile.gamma);
    let f = profile.eval(r);
    if f == 0.0 {
        return 0.0;
    }
    f * (1.0 + epsilon * lyapunov.eval(model, &z.q, &z.p) + epsilon * lyapunov.eval(model, &w.q, &w.p))
}

/// Coupling parameters.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CouplingParams {
    /// Cutoff `ξ` of `χ = 1{|R| ≥ ξ}`.
    pub xi: f64,
    pub eta0: f64,
    pub kappa_adjust: f64,
    pub epsilon: f64,
    pub theta: f64,
}

impl CouplingParams {
    /// Parameters matched to a rate report; `xi` defaults to `10⁻⁴R₁`.
    /// Rejects `α` violating the drift smallness condition.
    pub fn new(rate: &RateReport, xi: Option<f64>) -> Result<Self> {
        if !rate.smallness_holds {
            return Err(invalid(
                "alpha",
                format!(
                    "α = {} exceeds (1−κ_adjust)(η₀/(1+η₀))γ/L = {:.4e}",
                    rate.alpha,
                    (1.0 - rate.kappa_adjust) * rate.eta0 / (1.0 + rate.eta0) * rate.gamma / rate.lipschitz
                ),
            ));
        }
        let xi = xi.unwrap_or(DEFAULT_CUTOFF_FRACTION * rate.r1);
        if !(xi > 0.0) {
            return Err(invalid("xi", "cutoff must be positive"));
        }
        Ok(Self {
            xi,
            eta0: rate.eta0,
            kappa_adjust: rate.kappa_adjust,
            epsilon: rate.epsilon,
            theta: rate.theta,
        })
    }
}

/// Two coupled copies with the pre-step reflection data.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPair {
    pub x: PhasePoint,
    pub y: PhasePoint,
    /// `R = Δq + γ⁻¹Δp`.
    pub velocity_gap: Vec<f64>,
    /// `R/|R|`, or `e₁` when `R = 0`.
    pub direction: Vec<f64>,
    pub reflecting: bool,
}

impl CoupledPair {
    pub fn new(x: PhasePoint, y: PhasePoint, gamma: f64, xi: f64) -> Result<Self> {
        if x.dim() != y.dim() {
            return Err(Error::Dimension {
                expected: x.dim(),
                got: y.dim(),
            });
        }
        let d = x.dim();
        let mut pair = Self {
            x,
            y,
            velocity_gap: vec![0.0; d],
            direction: vec![0.0; d],
            reflecting: false,
        };
        pair.refresh(gamma, xi);
        Ok(pair)
    }

    fn refresh(&mut self, gamma: f64, xi: f64) {
        for i in 0..self.x.dim() {
            self.velocity_gap[i] = (self.x.q[i] - self.y.q[i]) + (self.x.p[i] - self.y.p[i]) / gamma;
        }
        let r = norm(&self.velocity_gap);
        self.reflecting = r >= xi;
        if r > 0.0 {
            for (e, v) in self.direction.iter_mut().zip(&self.velocity_gap) {
                *e = v / r;
            }
        } else {
            self.direction.iter_mut().for_each(|e| *e = 0.0);
            self.direction[0] = 1.0;
        }
    }

    /// Momentum noise of the second copy, `(I − 2χ eeᵀ)ξ^p`.
    pub fn mirrored(&self, xi_p: &[f64]) -> Vec<f64> {
        if !self.reflecting {
            return xi_p.to_vec();
        }
        let s = 2.0 * dot(&self.direction, xi_p);
        xi_p.iter().zip(&self.direction).map(|(v, e)| v - s * e).collect()
    }

    /// Distance used by the metric.
    pub fn distance(&self, theta: f64, gamma: f64) -> f64 {
        phase_distance(&self.x, &self.y, theta, gamma)
    }

    fn advance(
        &mut self,
        model: &PotentialModel,
        params: &SamplerParams,
        xi: f64,
        xi_q: &[f64],
        xi_p: &[f64],
        grad: &mut [f64],
    ) {
        let mirrored = self.mirrored(xi_p);
        hfhr_update(&mut self.x, model, params, xi_q, xi_p, grad);
        hfhr_update(&mut self.y, model, params, xi_q, &mirrored, grad);
        self.refresh(params.gamma, xi);
    }
}

/// One coupled HFHR step with shared noise `(ξ^q, ξ^p)`.
pub fn coupled_step(
    pair: &CoupledPair,
    model: &PotentialModel,
    params: &SamplerParams,
    coupling: &CouplingParams,
    xi_q: &[f64],
    xi_p: &[f64],
) -> Result<CoupledPair> {
    let d = model.dim();
    if pair.x.dim() != d {
        return Err(Error::Dimension {
            expected: d,
            got: pair.x.dim(),
        });
    }
    for n in [xi_q, xi_p] {
        if n.len() != d {
            return Err(Error::Dimension { expected: d, got: n.len() });
        }
    }
    let mut next = pair.clone();
    let mut grad = vec![0.0; d];
    next.advance(model, params, coupling.xi, xi_q, xi_p, &mut grad);
    if [&next.x, &next.y]
        .iter()
        .any(|z| z.q.iter().chain(&z.p).any(|v| !v.is_finite()))
    {
        return Err(Error::Numerical("coupled step produced a non-finite state".into()));
    }
    Ok(next)
}

/// How the two copies of each pair are initialised.
#[derive(Debug, Clone, PartialEq)]
pub enum CoupledStart {
    /// Every pair starts from the same two points.
    Fixed(PhasePoint, PhasePoint),
    /// Both copies drawn independently with `N(0, σ²)` entries.
    Independent { std: f64 },
}

/// Ensemble summary of the semimetric along a schedule.
#[derive(Debug, Clone, Serialize)]
pub struct DecayCurve {
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    pub mean_rho: Vec<f64>,
    pub stderr: Vec<f64>,
    pub mean_r: Vec<f64>,
    /// `(mean |z − z′|²)^{1/2}`, an upper bound on `W₂` of the marginals.
    pub w2_proxy: Vec<f64>,
}

impl DecayCurve {
    /// Least-squares exponential rate of the mean semimetric.
    pub fn fitted_rate(&self) -> f64 {
        fit_rate(&self.times, &self.mean_rho)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
        w.write_record(["time", "mean_rho", "stderr", "mean_r", "mean_W2_proxy"])
            .map_err(csv_error)?;
        for i in 0..self.times.len() {
            w.write_record(&[
                self.times[i].to_string(),
                self.mean_rho[i].to_string(),
                self.stderr[i].to_string(),
                self.mean_r[i].to_string(),
                self.w2_proxy[i].to_string(),
            ])
            .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `−slope` of the least-squares line through `(t, log y)` over positive `y`;
/// `+∞` when every value is zero.
pub fn fit_rate(times: &[f64], values: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, v)| **v > 0.0)
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    if pts.is_empty() {
        return f64::INFINITY;
    }
    if pts.len() == 1 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(t, y)| (t - mt) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(t, _)| (t - mt).powi(2)).sum();
    -sxy / sxx
}

/// What is measured on the pairs.
pub struct Observer<'a> {
    pub profile: &'a ProfileSpec,
    pub lyapunov: &'a LyapunovFunction,
    pub epsilon: f64,
}

struct PairRecord {
    rho: Vec<f64>,
    r: Vec<f64>,
    sq: Vec<f64>,
}

fn start_pair(start: &CoupledStart, seed: u64, index: usize, dim: usize, gamma: f64, xi: f64) -> Result<CoupledPair> {
    match start {
        CoupledStart::Fixed(x, y) => CoupledPair::new(x.clone(), y.clone(), gamma, xi),
        CoupledStart::Independent { std } => {
            let draw = |stream_seed: u64| {
                let mut rng = channel_rng(stream_seed, index, Channel::Init);
                let mut v = vec![0.0; 2 * dim];
                fill_normal(&mut rng, &mut v);
                let p = v.split_off(dim);
                PhasePoint {
                    q: v.iter().map(|x| std * x).collect(),
                    p: p.iter().map(|x| std * x).collect(),
                }
            };
            let x = draw(seed);
            let y = draw(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
            CoupledPair::new(x, y, gamma, xi)
        }
    }
}

/// Runs `params.chains` coupled pairs and records the semimetric at the
/// scheduled steps.
pub fn run_coupling(
    model: &PotentialModel,
    params: &SamplerParams,
    coupling: &CouplingParams,
    start: &CoupledStart,
    schedule: &[usize],
    observer: &Observer<'_>,
) -> Result<DecayCurve> {
    params.validate()?;
    let schedule = crate::integrators::validate_schedule(schedule, params.steps)?;
    if schedule.len() < 2 {
        return Err(invalid("schedule", "need at least two snapshot times"));
    }
    let d = model.dim();
    let records: Vec<Result<PairRecord>> = (0..params.chains)
        .into_par_iter()
        .map(|i| {
            let mut pair = start_pair(start, params.seed, i, d, params.gamma, coupling.xi)?;
            if pair.x.dim() != d {
                return Err(Error::Dimension {
                    expected: d,
                    got: pair.x.dim(),
                });
            }
            let mut streams = NoiseStreams::new(params.seed, i);
            let (mut xi_q, mut xi_p, mut grad) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
            let mut rec = PairRecord {
                rho: Vec::with_capacity(schedule.len()),
                r: Vec::with_capacity(schedule.len()),
                sq: Vec::with_capacity(schedule.len()),
            };
            let mut step = 0;
            for &target in &schedule {
                while step < target {
                    if params.alpha > 0.0 {
                        streams.fill_position(&mut xi_q);
                    }
                    streams.fill_momentum(&mut xi_p);
                    pair.advance(model, params, coupling.xi, &xi_q, &xi_p, &mut grad);
                    step += 1;
                    let bad = [&pair.x, &pair.y].iter().any(|z| {
                        !(norm(&z.q) <= crate::integrators::DIVERGENCE_THRESHOLD)
                            || z.p.iter().any(|v| !v.is_finite())
                    });
                    if bad {
                        return Err(Error::Divergence { chain: i, step });
                    }
                }
                rec.rho.push(semimetric(
                    &pair.x,
                    &pair.y,
                    observer.profile,
                    model,
                    observer.lyapunov,
                    observer.epsilon,
                ));
                rec.r.push(pair.distance(observer.profile.theta, params.gamma));
                let dq: Vec<f64> = pair.x.q.iter().zip(&pair.y.q).map(|(a, b)| a - b).collect();
                let dp: Vec<f64> = pair.x.p.iter().zip(&pair.y.p).map(|(a, b)| a - b).collect();
                rec.sq.push(dot(&dq, &dq) + dot(&dp, &dp));
            }
            Ok(rec)
        })
        .collect();
    let mut ok = Vec::with_capacity(records.len());
    for r in records {
        ok.push(r?);
    }
    let n = ok.len() as f64;
    let m = schedule.len();
    let mut curve = DecayCurve {
        steps: schedule.clone(),
        times: schedule.iter().map(|&k| k as f64 * params.eta).collect(),
        mean_rho: vec![0.0; m],
        stderr: vec![0.0; m],
        mean_r: vec![0.0; m],
        w2_proxy: vec![0.0; m],
    };
    for j in 0..m {
        let mean = ok.iter().map(|r| r.rho[j]).sum::<f64>() / n;
        let var = if ok.len() > 1 {
            ok.iter().map(|r| (r.rho[j] - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        curve.mean_rho[j] = mean;
        curve.stderr[j] = (var / n).sqrt();
        curve.mean_r[j] = ok.iter().map(|r| r.r[j]).sum::<f64>() / n;
        curve.w2_proxy[j] = (ok.iter().map(|r| r.sq[j]).sum::<f64>() / n).sqrt();
    }
    Ok(curve)
}

/// Decay curve plus its fitted exponential rate.
#[derive(Debug, Clone, Serialize)]
pub struct ContractionEstimate {
    pub curve: DecayCurve,
    pub fitted_rate: f64,
}

pub fn estimate_contraction(
    model: &PotentialModel,
    params: &SamplerParams,
    coupling: &CouplingParams,
    start: &CoupledStart,
    schedule: &[usize],
    observer: &Observer<'_>,
) -> Result<ContractionEstimate> {
    let curve = run_coupling(model, params, coupling, start, schedule, observer)?;
    Ok(ContractionEstimate {
        fitted_rate: curve.fitted_rate(),
        curve,
    })
}
