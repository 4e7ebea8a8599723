//! Euler–Maruyama steppers for HFHR, kinetic Langevin (KLMC) and overdamped
//! Langevin (ULA), plus a deterministic parallel ensemble runner.
//!
//! Every chain owns independent ChaCha8 streams per noise channel, keyed by
//! `(seed, chain, channel)`, so the draws a chain sees never depend on how
//! chains are scheduled across threads.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{norm, Mat};
use crate::potentials::PotentialModel;

/// Any `|q|` above this aborts the run.
pub const DIVERGENCE_THRESHOLD: f64 = 1e8;

/// Phase-space state `z = (q, p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhasePoint {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::Dimension {
                expected: q.len(),
                got: p.len(),
            });
        }
        if q.iter().chain(&p).any(|v| !v.is_finite()) {
            return Err(invalid("z", "non-finite phase-space entry"));
        }
        Ok(Self { q, p })
    }

    pub fn origin(dim: usize) -> Self {
        Self {
            q: vec![0.0; dim],
            p: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }
}

/// Sampler choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    Hfhr,
    Klmc,
    Ula,
}

impl std::str::FromStr for Sampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hfhr" => Ok(Self::Hfhr),
            "klmc" => Ok(Self::Klmc),
            "ula" => Ok(Self::Ula),
            other => Err(invalid("sampler", format!("unknown sampler `{other}`"))),
        }
    }
}

impl std::fmt::Display for Sampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Hfhr => "hfhr",
            Self::Klmc => "klmc",
            Self::Ula => "ula",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerParams {
    /// Resolution `α ≥ 0`.
    pub alpha: f64,
    /// Friction `γ > 0`.
    pub gamma: f64,
    /// Step size `η > 0`.
    pub eta: f64,
    pub steps: usize,
    pub chains: usize,
    pub seed: u64,
}

impl SamplerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(invalid("alpha", format!("must be ≥ 0, got {}", self.alpha)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(invalid("gamma", format!("must be > 0, got {}", self.gamma)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(invalid("eta", format!("must be > 0, got {}", self.eta)));
        }
        if self.chains == 0 {
            return Err(invalid("chains", "need at least one chain"));
        }
        Ok(())
    }
}

/// Noise channel of a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Position = 0,
    Momentum = 1,
    Init = 2,
}

/// Independent Gaussian streams of one chain.
#[derive(Debug, Clone)]
pub struct NoiseStreams {
    position: ChaCha8Rng,
    momentum: ChaCha8Rng,
}

const CHANNELS: u64 = 3;

pub(crate) fn channel_rng(seed: u64, chain: usize, channel: Channel) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64 * CHANNELS + channel as u64);
    rng
}

impl NoiseStreams {
    pub fn new(seed: u64, chain: usize) -> Self {
        Self {
            position: channel_rng(seed, chain, Channel::Position),
            momentum: channel_rng(seed, chain, Channel::Momentum),
        }
    }

    pub fn fill_position(&mut self, out: &mut [f64]) {
        fill_normal(&mut self.position, out);
    }

    pub fn fill_momentum(&mut self, out: &mut [f64]) {
        fill_normal(&mut self.momentum, out);
    }
}

pub(crate) fn fill_normal(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}

fn check_point(z: &PhasePoint, model: &PotentialModel) -> Result<()> {
    if z.q.len() != model.dim() || z.p.len() != model.dim() {
        return Err(Error::Dimension {
            expected: model.dim(),
            got: z.q.len().max(z.p.len()),
        });
    }
    Ok(())
}

fn check_noise(noise: &[f64], dim: usize) -> Result<()> {
    if noise.len() != dim {
        return Err(Error::Dimension {
            expected: dim,
            got: noise.len(),
        });
    }
    Ok(())
}

fn finite_gradient(grad: &[f64]) -> Result<()> {
    if grad.iter().all(|g| g.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical("non-finite gradient".into()))
    }
}

/// In-place HFHR update with a caller-provided gradient buffer.
///
/// The `α = 0` path skips the position noise so that the result is bitwise
/// identical to [`klmc_update`].
pub(crate) fn hfhr_update(
    z: &mut PhasePoint,
    model: &PotentialModel,
    params: &SamplerParams,
    xi_q: &[f64],
    xi_p: &[f64],
    grad: &mut [f64],
) {
    model.gradient_into(&z.q, grad);
    let (alpha, gamma, eta) = (params.alpha, params.gamma, params.eta);
    let sq = (2.0 * alpha * eta).sqrt();
    let sp = (2.0 * gamma * eta).sqrt();
    for i in 0..z.q.len() {
        let (q, p, g) = (z.q[i], z.p[i], grad[i]);
        let mut qn = q + (p - alpha * g) * eta;
        if alpha > 0.0 {
            qn += sq * xi_q[i];
        }
        z.q[i] = qn;
        z.p[i] = p + (-gamma * p - g) * eta + sp * xi_p[i];
    }
}

pub(crate) fn klmc_update(
    z: &mut PhasePoint,
    model: &PotentialModel,
    params: &SamplerParams,
    xi: &[f64],
    grad: &mut [f64],
) {
    model.gradient_into(&z.q, grad);
    let (gamma, eta) = (params.gamma, params.eta);
    let sp = (2.0 * gamma * eta).sqrt();
    for i in 0..z.q.len() {
        let (x, v, g) = (z.q[i], z.p[i], grad[i]);
        z.q[i] = x + v * eta;
        z.p[i] = v + (-gamma * v - g) * eta + sp * xi[i];
    }
}

pub(crate) fn ula_update(q: &mut [f64], model: &PotentialModel, eta: f64, xi: &[f64], grad: &mut [f64]) {
    model.gradient_into(q, grad);
    let s = (2.0 * eta).sqrt();
    for i in 0..q.len() {
        q[i] = q[i] - eta * grad[i] + s * xi[i];
    }
}

/// One HFHRMC step; the gradient is evaluated once at the old `q`.
pub fn hfhr_step(
    z: &PhasePoint,
    model: &PotentialModel,
    params: &SamplerParams,
    xi_q: &[f64],
    xi_p: &[f64],
) -> Result<PhasePoint> {
    check_point(z, model)?;
    check_noise(xi_q, model.dim())?;
    check_noise(xi_p, model.dim())?;
    let mut next = z.clone();
    let mut grad = vec![0.0; model.dim()];
    hfhr_update(&mut next, model, params, xi_q, xi_p, &mut grad);
    finite_gradient(&grad)?;
    Ok(next)
}

/// One KLMC step.
pub fn klmc_step(
    z: &PhasePoint,
    model: &PotentialModel,
    params: &SamplerParams,
    xi: &[f64],
) -> Result<PhasePoint> {
    check_point(z, model)?;
    check_noise(xi, model.dim())?;
    let mut next = z.clone();
    let mut grad = vec![0.0; model.dim()];
    klmc_update(&mut next, model, params, xi, &mut grad);
    finite_gradient(&grad)?;
    Ok(next)
}

/// One ULA step.
pub fn ula_step(q: &[f64], model: &PotentialModel, params: &SamplerParams, xi: &[f64]) -> Result<Vec<f64>> {
    check_noise(q, model.dim())?;
    check_noise(xi, model.dim())?;
    let mut next = q.to_vec();
    let mut grad = vec![0.0; model.dim()];
    ula_update(&mut next, model, params.eta, xi, &mut grad);
    finite_gradient(&grad)?;
    Ok(next)
}

/// Law of the initial ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitialLaw {
    /// Every chain starts at `z = (0, 0)`.
    #[default]
    Origin,
    /// Independent `N(0, σ²)` entries for `q` and `p`.
    Gaussian { std: f64 },
}

/// Positions and momenta of all chains at one step, rows in chain order.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub step: usize,
    pub positions: Mat,
    pub momenta: Mat,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub sampler: Sampler,
    pub snapshots: Vec<Snapshot>,
}

/// `M` chains with their own noise streams and a shared step counter.
#[derive(Debug, Clone)]
pub struct ChainEnsemble {
    pub states: Vec<PhasePoint>,
    streams: Vec<NoiseStreams>,
    step: usize,
}

impl ChainEnsemble {
    pub fn new(dim: usize, params: &SamplerParams, init: InitialLaw) -> Result<Self> {
        params.validate()?;
        let states = (0..params.chains)
            .map(|chain| match init {
                InitialLaw::Origin => Ok(PhasePoint::origin(dim)),
                InitialLaw::Gaussian { std } => {
                    if !(std >= 0.0 && std.is_finite()) {
                        return Err(invalid("std", format!("must be ≥ 0, got {std}")));
                    }
                    let mut rng = channel_rng(params.seed, chain, Channel::Init);
                    let mut z = PhasePoint::origin(dim);
                    fill_normal(&mut rng, &mut z.q);
                    fill_normal(&mut rng, &mut z.p);
                    z.q.iter_mut().chain(z.p.iter_mut()).for_each(|v| *v *= std);
                    Ok(z)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let streams = (0..params.chains)
            .map(|chain| NoiseStreams::new(params.seed, chain))
            .collect();
        Ok(Self {
            states,
            streams,
            step: 0,
        })
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    /// Advance every chain by `count` steps; on divergence reports the
    /// lowest offending chain index.
    pub fn advance(
        &mut self,
        model: &PotentialModel,
        params: &SamplerParams,
        sampler: Sampler,
        count: usize,
    ) -> Result<()> {
        let start = self.step;
        let dim = model.dim();
        let outcome: Vec<Option<usize>> = self
            .states
            .par_iter_mut()
            .zip(self.streams.par_iter_mut())
            .map(|(z, streams)| advance_chain(z, streams, model, params, sampler, count, dim))
            .collect();
        if let Some((chain, offset)) = outcome
            .iter()
            .enumerate()
            .find_map(|(c, o)| o.map(|k| (c, k)))
        {
            return Err(Error::Divergence {
                chain,
                step: start + offset,
            });
        }
        self.step += count;
        Ok(())
    }

    pub fn snapshot(&self) -> Snapshot {
        let m = self.states.len();
        let d = self.states.first().map_or(0, |z| z.dim());
        let mut positions = Vec::with_capacity(m * d);
        let mut momenta = Vec::with_capacity(m * d);
        for z in &self.states {
            positions.extend_from_slice(&z.q);
            momenta.extend_from_slice(&z.p);
        }
        Snapshot {
            step: self.step,
            positions: Mat::from_vec(m, d, positions).expect("consistent shape"),
            momenta: Mat::from_vec(m, d, momenta).expect("consistent shape"),
        }
    }
}

/// Runs one chain; returns the 1-based step offset of a divergence.
fn advance_chain(
    z: &mut PhasePoint,
    streams: &mut NoiseStreams,
    model: &PotentialModel,
    params: &SamplerParams,
    sampler: Sampler,
    count: usize,
    dim: usize,
) -> Option<usize> {
    let mut grad = vec![0.0; dim];
    let mut xi_q = vec![0.0; dim];
    let mut xi_p = vec![0.0; dim];
    for k in 1..=count {
        match sampler {
            Sampler::Hfhr => {
                if params.alpha > 0.0 {
                    streams.fill_position(&mut xi_q);
                }
                streams.fill_momentum(&mut xi_p);
                hfhr_update(z, model, params, &xi_q, &xi_p, &mut grad);
            }
            Sampler::Klmc => {
                streams.fill_momentum(&mut xi_p);
                klmc_update(z, model, params, &xi_p, &mut grad);
            }
            Sampler::Ula => {
                streams.fill_position(&mut xi_q);
                ula_update(&mut z.q, model, params.eta, &xi_q, &mut grad);
            }
        }
        let r = norm(&z.q);
        if !(r <= DIVERGENCE_THRESHOLD) || z.p.iter().any(|v| !v.is_finite()) {
            return Some(k);
        }
    }
    None
}

/// Validated snapshot schedule: sorted, deduplicated, within `[0, K]`.
pub fn validate_schedule(schedule: &[usize], steps: usize) -> Result<Vec<usize>> {
    if let Some(bad) = schedule.iter().find(|&&s| s > steps) {
        return Err(invalid("schedule", format!("snapshot {bad} exceeds K={steps}")));
    }
    let mut s = schedule.to_vec();
    s.sort_unstable();
    s.dedup();
    Ok(s)
}

/// `count` log-spaced integer steps in `[1, K]`, always including `K`.
pub fn log_schedule(steps: usize, count: usize) -> Vec<usize> {
    if steps == 0 || count == 0 {
        return vec![0];
    }
    let mut s: Vec<usize> = crate::numerics::geomspace(1.0, steps as f64, count.max(2))
        .into_iter()
        .map(|t| (t.round() as usize).clamp(1, steps))
        .collect();
    s.push(steps);
    s.sort_unstable();
    s.dedup();
    s
}

/// Runs `M` chains from `init` for `K` steps, recording the scheduled steps.
pub fn run_ensemble_from(
    model: &PotentialModel,
    params: &SamplerParams,
    sampler: Sampler,
    schedule: &[usize],
    init: InitialLaw,
) -> Result<Trajectory> {
    let schedule = validate_schedule(schedule, params.steps)?;
    let mut ensemble = ChainEnsemble::new(model.dim(), params, init)?;
    let mut snapshots = Vec::with_capacity(schedule.len());
    for &target in &schedule {
        let gap = target - ensemble.step_count();
        ensemble.advance(model, params, sampler, gap)?;
        snapshots.push(ensemble.snapshot());
    }
    Ok(Trajectory { sampler, snapshots })
}

/// [`run_ensemble_from`] with every chain started at the origin.
pub fn run_ensemble(
    model: &PotentialModel,
    params: &SamplerParams,
    sampler: Sampler,
    schedule: &[usize],
) -> Result<Trajectory> {
    run_ensemble_from(model, params, sampler, schedule, InitialLaw::Origin)
}

/// Writes `(step, chain, q_1..q_d[, p_1..p_d])` rows for every snapshot.
pub fn write_snapshots_csv(path: &Path, trajectory: &Trajectory, with_momenta: bool) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    let d = trajectory.snapshots.first().map_or(0, |s| s.positions.cols());
    let mut header = vec!["step".to_string(), "chain".to_string()];
    header.extend((1..=d).map(|i| format!("q_{i}")));
    if with_momenta {
        header.extend((1..=d).map(|i| format!("p_{i}")));
    }
    w.write_record(&header).map_err(csv_error)?;
    for snap in &trajectory.snapshots {
        for chain in 0..snap.positions.rows() {
            let mut row = vec![snap.step.to_string(), chain.to_string()];
            row.extend(snap.positions.row(chain).iter().map(|v| v.to_string()));
            if with_momenta {
                row.extend(snap.momenta.row(chain).iter().map(|v| v.to_string()));
            }
            w.write_record(&row).map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Dataset(format!("{other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{Gaussian, MultiWell};

    fn params(alpha: f64) -> SamplerParams {
        SamplerParams {
            alpha,
            gamma: 2.0,
            eta: 0.1,
            steps: 10,
            chains: 3,
            seed: 7,
        }
    }

    #[test]
    fn ula_contracts_gaussian() {
        let m: PotentialModel = Gaussian::new(1, 2.0).unwrap().into();
        let q = ula_step(&[1.0], &m, &params(0.0), &[0.0]).unwrap();
        assert!((q[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn alpha_zero_matches_klmc_bitwise() {
        let m: PotentialModel = MultiWell::new(3, 2.0).unwrap().into();
        let z = PhasePoint::new(vec![0.3, -1.2, 2.0], vec![-0.4, 0.1, 0.0]).unwrap();
        let xi_q = [0.5, -1.0, 2.0];
        let xi_p = [1.1, 0.2, -0.3];
        let a = hfhr_step(&z, &m, &params(0.0), &xi_q, &xi_p).unwrap();
        let b = klmc_step(&z, &m, &params(0.0), &xi_p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_steps_returns_initial_ensemble() {
        let m: PotentialModel = MultiWell::new(2, 2.0).unwrap().into();
        let mut p = params(0.1);
        p.steps = 0;
        let t = run_ensemble(&m, &p, Sampler::Hfhr, &[0]).unwrap();
        assert_eq!(t.snapshots.len(), 1);
        assert!(t.snapshots[0].positions.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn schedule_outside_horizon_is_rejected() {
        assert!(validate_schedule(&[3, 11], 10).is_err());
        assert_eq!(validate_schedule(&[5, 3, 5], 10).unwrap(), vec![3, 5]);
        let s = log_schedule(10_000, 50);
        assert_eq!(*s.last().unwrap(), 10_000);
        assert!(s.len() > 30 && s[0] == 1);
    }

    #[test]
    fn blow_up_reports_divergence() {
        let m: PotentialModel = Gaussian::new(1, 2.0).unwrap().into();
        let mut p = params(0.0);
        p.eta = 50.0;
        p.steps = 200;
        let err = run_ensemble(&m, &p, Sampler::Ula, &[200]).unwrap_err();
        assert!(matches!(err, Error::Divergence { chain: 0, .. }), "{err}");
    }
}
