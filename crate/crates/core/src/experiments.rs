//! Config-driven experiment runner: multi-well Gibbs sampling, Bayesian
//! linear regression and Tukey-loss classification at desk scale.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::constants::{contraction_rate, lyapunov_quadratic_bounds, model_baseline, MAX_RATE};
use crate::error::{invalid, Error, Result};
use crate::integrators::{csv_error, log_schedule, validate_schedule, ChainEnsemble, InitialLaw, Sampler, SamplerParams, Snapshot};
use crate::linalg::{symmetric_eigen, Mat};
use crate::metrics::{accuracy, mse, SampleCloud};
use crate::numerics::{cumulative_simpson, simpson};
use crate::potentials::{well, Classification, LinearRegression, MultiWell, PotentialModel};

/// Ground-truth coefficients of the synthetic regression problem.
pub const DEFAULT_BETA: [f64; 6] = [1.0, -0.5, 0.7, 1.2, -3.0, 5.4];

/// Which case study an experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    Multiwell,
    Linreg,
    Classification,
}

/// One sampler of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSpec {
    pub kind: Sampler,
    #[serde(default)]
    pub alpha: f64,
    pub gamma: f64,
    /// Output label; defaults to e.g. `hfhr_a0.2_g2`.
    #[serde(default)]
    pub label: Option<String>,
}

impl SamplerSpec {
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| match self.kind {
            Sampler::Hfhr => format!("hfhr_a{}_g{}", self.alpha, self.gamma),
            Sampler::Klmc => format!("klmc_g{}", self.gamma),
            Sampler::Ula => "ula".to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiwellSettings {
    pub dim: usize,
    #[serde(default = "default_reference_size")]
    pub reference_size: usize,
    #[serde(default = "default_projections")]
    pub projections: usize,
}

fn default_reference_size() -> usize {
    20_000
}

fn default_projections() -> usize {
    128
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinregSettings {
    pub n: usize,
    pub sigma: f64,
    /// Weight of the `Lᵖ` regulariser.
    pub iota: f64,
    pub eps: f64,
    pub p: f64,
    #[serde(default = "default_beta")]
    pub beta_star: Vec<f64>,
    #[serde(default)]
    pub data_seed: u64,
}

fn default_beta() -> Vec<f64> {
    DEFAULT_BETA.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassificationSettings {
    pub dataset: PathBuf,
    #[serde(default = "default_split")]
    pub split: f64,
    pub iota: f64,
    pub t0: f64,
    #[serde(default)]
    pub split_seed: u64,
}

fn default_split() -> f64 {
    0.7
}

fn default_snapshots() -> usize {
    50
}

fn default_kappa_adjust() -> f64 {
    0.5
}

/// Experiment description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub case: Case,
    pub eta: f64,
    pub steps: usize,
    pub chains: usize,
    pub seed: u64,
    pub samplers: Vec<SamplerSpec>,
    /// Number of log-spaced checkpoints (plus step 0).
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
    /// Explicit checkpoints; overrides `snapshots`.
    #[serde(default)]
    pub schedule: Option<Vec<usize>>,
    #[serde(default)]
    pub init: InitialLaw,
    #[serde(default = "default_kappa_adjust")]
    pub kappa_adjust: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub multiwell: Option<MultiwellSettings>,
    #[serde(default)]
    pub linreg: Option<LinregSettings>,
    #[serde(default)]
    pub classification: Option<ClassificationSettings>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        // dataset paths are relative to the config file
        if let (Some(c), Some(dir)) = (cfg.classification.as_mut(), path.parent()) {
            if c.dataset.is_relative() && !c.dataset.exists() {
                c.dataset = dir.join(&c.dataset);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samplers.is_empty() {
            return Err(Error::Config("no samplers configured".into()));
        }
        for s in &self.samplers {
            self.params(s).validate().map_err(|e| Error::Config(format!("sampler {}: {e}", s.label())))?;
            if s.kind != Sampler::Hfhr && s.alpha != 0.0 {
                return Err(Error::Config(format!("sampler {}: α only applies to hfhr", s.label())));
            }
        }
        if !(self.kappa_adjust > 0.0 && self.kappa_adjust < 1.0) {
            return Err(Error::Config("kappa_adjust must lie in (0, 1)".into()));
        }
        if let Some(s) = &self.schedule {
            validate_schedule(s, self.steps).map_err(|e| Error::Config(e.to_string()))?;
        }
        match self.case {
            Case::Multiwell => {
                let m = self
                    .multiwell
                    .as_ref()
                    .ok_or_else(|| Error::Config("missing [multiwell] table".into()))?;
                if m.dim == 0 || m.reference_size == 0 || m.projections == 0 {
                    return Err(Error::Config("multiwell sizes must be positive".into()));
                }
            }
            Case::Linreg => {
                let l = self
                    .linreg
                    .as_ref()
                    .ok_or_else(|| Error::Config("missing [linreg] table".into()))?;
                if l.n == 0 || l.beta_star.is_empty() || !(l.sigma >= 0.0) {
                    return Err(Error::Config("linreg needs n > 0, σ ≥ 0 and β*".into()));
                }
            }
            Case::Classification => {
                let c = self
                    .classification
                    .as_ref()
                    .ok_or_else(|| Error::Config("missing [classification] table".into()))?;
                if !(c.split > 0.0 && c.split <= 1.0) {
                    return Err(Error::Config("split must lie in (0, 1]".into()));
                }
            }
        }
        Ok(())
    }

    pub fn params(&self, spec: &SamplerSpec) -> SamplerParams {
        SamplerParams {
            alpha: spec.alpha,
            gamma: spec.gamma,
            eta: self.eta,
            steps: self.steps,
            chains: self.chains,
            seed: self.seed,
        }
    }

    /// Checkpoints including step 0.
    pub fn resolved_schedule(&self) -> Result<Vec<usize>> {
        let mut s = match &self.schedule {
            Some(s) => s.clone(),
            None => log_schedule(self.steps, self.snapshots),
        };
        s.push(0);
        validate_schedule(&s, self.steps)
    }
}

/// Density `∝ e^{−v}` of one multi-well coordinate, tabulated on `[−8, 8]`.
#[derive(Debug, Clone)]
pub struct WellMarginal {
    pub normalizer: f64,
    pub second_moment: f64,
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

const WELL_BOX: f64 = 8.0;

fn well_tables(intervals: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let h = 2.0 * WELL_BOX / intervals as f64;
    let grid: Vec<f64> = (0..=intervals).map(|i| -WELL_BOX + h * i as f64).collect();
    let dens: Vec<f64> = grid.iter().map(|&s| (-well(s)).exp()).collect();
    let z = simpson(&dens, h);
    (grid, dens, z)
}

impl WellMarginal {
    pub fn new() -> Result<Self> {
        const N: usize = 1 << 14;
        let (grid, dens, z) = well_tables(N);
        let (_, _, z2) = well_tables(2 * N);
        if (z2 - z).abs() > 1e-10 {
            return Err(Error::Numerical(format!(
                "normalising constant unstable under grid doubling: {z} vs {z2}"
            )));
        }
        let h = grid[1] - grid[0];
        let m2: Vec<f64> = grid.iter().zip(&dens).map(|(s, d)| s * s * d).collect();
        let mut cdf = cumulative_simpson(&dens, h);
        let last = *cdf.last().expect("non-empty");
        cdf.iter_mut().for_each(|c| *c /= last);
        // enforce monotonicity against round-off
        for i in 1..cdf.len() {
            if cdf[i] < cdf[i - 1] {
                cdf[i] = cdf[i - 1];
            }
        }
        Ok(Self {
            normalizer: z,
            second_moment: simpson(&m2, h) / z,
            grid,
            cdf,
        })
    }

    /// Inverse CDF by linear interpolation of the tabulated CDF.
    pub fn quantile(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c < u);
        if i == 0 {
            return self.grid[0];
        }
        if i >= self.cdf.len() {
            return *self.grid.last().expect("non-empty");
        }
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.grid[i - 1] + t * (self.grid[i] - self.grid[i - 1])
    }
}

/// `n` exact draws from the `d`-dimensional multi-well Gibbs measure.
pub fn reference_multiwell(dim: usize, n: usize, seed: u64) -> Result<SampleCloud> {
    if dim == 0 || n == 0 {
        return Err(invalid("reference", "need d ≥ 1 and n ≥ 1"));
    }
    let marginal = WellMarginal::new()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..n * dim).map(|_| marginal.quantile(rng.random::<f64>())).collect();
    SampleCloud::new(Mat::from_vec(n, dim, data)?)
}

/// Synthetic regression data `y = Xβ* + σδ` with `x_j ~ N(0, 0.5² I)`.
pub fn generate_linreg_data(n: usize, beta_star: &[f64], sigma: f64, seed: u64) -> Result<(Mat, Vec<f64>)> {
    let d = beta_star.len();
    if n == 0 || d == 0 {
        return Err(invalid("linreg", "need n ≥ 1 and d ≥ 1"));
    }
    if !(sigma >= 0.0) {
        return Err(invalid("sigma", "must be ≥ 0"));
    }
    let feature = Normal::new(0.0, 0.5).expect("valid normal");
    for attempt in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
        let data: Vec<f64> = (0..n * d).map(|_| feature.sample(&mut rng)).collect();
        let x = Mat::from_vec(n, d, data)?;
        let eig = symmetric_eigen(&x.transpose().matmul(&x).symmetrize())?;
        if eig.min() <= 1e-12 * eig.max().max(1.0) {
            continue;
        }
        let fit = x.matvec(beta_star);
        let y = fit
            .iter()
            .map(|f| {
                let e: f64 = StandardNormal.sample(&mut rng);
                f + sigma * e
            })
            .collect();
        return Ok((x, y));
    }
    Err(Error::Dataset("design matrix stayed rank deficient after 10 draws".into()))
}

/// Features and binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Mat,
    pub labels: Vec<bool>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label_values(&self) -> Vec<f64> {
        self.labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect()
    }

    fn subset(&self, rows: &[usize]) -> Self {
        let d = self.features.cols();
        let mut data = Vec::with_capacity(rows.len() * d);
        for &i in rows {
            data.extend_from_slice(self.features.row(i));
        }
        Self {
            features: Mat::from_vec(rows.len(), d, data).expect("consistent shape"),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

fn parse_label(cell: &str, line: usize) -> Result<bool> {
    match cell.trim().parse::<f64>() {
        Ok(v) if v == 0.0 || v == 1.0 => Ok(v == 1.0),
        _ => Err(Error::Dataset(format!("line {line}: label `{cell}` is not 0 or 1"))),
    }
}

/// Reads an all-numeric CSV with a header row into a matrix.
pub fn read_numeric_csv(path: &Path) -> Result<Mat> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_error)?;
    let mut data = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (k, rec) in reader.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let line = k + 2;
        if *width.get_or_insert(rec.len()) != rec.len() {
            return Err(Error::Dataset(format!("line {line}: ragged row")));
        }
        for c in rec.iter() {
            let v = c
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Dataset(format!("line {line}: non-numeric cell `{c}`")))?;
            data.push(v);
        }
        rows += 1;
    }
    match width {
        Some(w) if w > 0 => Mat::from_vec(rows, w, data),
        _ => Err(Error::Dataset(format!("{}: no data rows", path.display()))),
    }
}

/// Regression data from a numeric CSV whose last column is the response.
pub fn load_regression_csv(path: &Path) -> Result<(Mat, Vec<f64>)> {
    let all = read_numeric_csv(path)?;
    let d = all.cols();
    if d < 2 {
        return Err(Error::Dataset("need at least one feature and a response".into()));
    }
    let mut x = Vec::with_capacity(all.rows() * (d - 1));
    let mut y = Vec::with_capacity(all.rows());
    for i in 0..all.rows() {
        let row = all.row(i);
        x.extend_from_slice(&row[..d - 1]);
        y.push(row[d - 1]);
    }
    Ok((Mat::from_vec(all.rows(), d - 1, x)?, y))
}

/// Reads a CSV (header row, last column the 0/1 label), shuffles with `seed`,
/// keeps `⌊split·n⌋` rows for training and standardises features with the
/// training mean and standard deviation.
pub fn load_dataset_csv(path: &Path, split: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(split > 0.0 && split <= 1.0) {
        return Err(invalid("split", "must lie in (0, 1]"));
    }
    let mut reader = csv::Reader::from_path(path).map_err(csv_error)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (k, rec) in reader.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let line = k + 2;
        if rec.len() < 2 {
            return Err(Error::Dataset(format!("line {line}: need features and a label")));
        }
        if *width.get_or_insert(rec.len()) != rec.len() {
            return Err(Error::Dataset(format!("line {line}: ragged row")));
        }
        let label = rec.get(rec.len() - 1).unwrap_or("");
        if label.trim().is_empty() {
            return Err(Error::Dataset(format!("line {line}: missing label")));
        }
        labels.push(parse_label(label, line)?);
        let feats = rec
            .iter()
            .take(rec.len() - 1)
            .map(|c| {
                c.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Dataset(format!("line {line}: non-numeric cell `{c}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(feats);
    }
    if labels.is_empty() {
        return Err(Error::Dataset("no data rows".into()));
    }
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(Error::Dataset("labels contain a single class".into()));
    }
    let n = labels.len();
    let d = rows[0].len();
    let all = Dataset {
        features: Mat::from_vec(n, d, rows.concat())?,
        labels,
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((split * n as f64).floor() as usize).max(1);
    let mut train = all.subset(&order[..n_train]);
    let mut test = all.subset(&order[n_train..]);
    let mean: Vec<f64> = (0..d)
        .map(|j| (0..n_train).map(|i| train.features[(i, j)]).sum::<f64>() / n_train as f64)
        .collect();
    let std: Vec<f64> = (0..d)
        .map(|j| {
            let v = (0..n_train)
                .map(|i| (train.features[(i, j)] - mean[j]).powi(2))
                .sum::<f64>()
                / n_train as f64;
            if v > 0.0 {
                v.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    for set in [&mut train, &mut test] {
        for i in 0..set.len() {
            for j in 0..d {
                set.features[(i, j)] = (set.features[(i, j)] - mean[j]) / std[j];
            }
        }
    }
    Ok((train, test))
}

/// Data an experiment needs beyond the model.
enum Workload {
    Multiwell { reference: SampleCloud, projections: usize },
    Linreg { x: Mat, y: Vec<f64> },
    Classification { train: Dataset, test: Dataset },
}

/// Summary of the certified constants for one sampler setting.
#[derive(Debug, Clone, Serialize)]
pub struct SamplerLedger {
    pub lambda: f64,
    #[serde(rename = "L")]
    pub lipschitz: f64,
    #[serde(rename = "A")]
    pub drift_offset: f64,
    pub mu_min: f64,
    pub alpha0: f64,
    /// Master rate with `V₀` at the configured `α`; absent when `λ̂_α ≤ 0`.
    pub rate: Option<f64>,
    pub active_branch: Option<crate::constants::Branch>,
    pub smallness_holds: Option<bool>,
}

/// Metric curve of one sampler.
#[derive(Debug, Clone, Serialize)]
pub struct SamplerResult {
    pub label: String,
    pub sampler: Sampler,
    pub alpha: f64,
    pub gamma: f64,
    pub steps: Vec<usize>,
    pub metric: Vec<f64>,
    pub stderr: Vec<f64>,
    pub ledger: Option<SamplerLedger>,
    pub csv: PathBuf,
}

impl SamplerResult {
    pub fn final_metric(&self) -> f64 {
        *self.metric.last().unwrap_or(&f64::NAN)
    }
}

/// Everything written to `run.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub metric: &'static str,
    pub estimator: String,
    pub rng: String,
    pub results: Vec<SamplerResult>,
    pub warnings: Vec<String>,
    pub wall_clock_seconds: f64,
    pub error: Option<String>,
}

fn build_model(config: &ExperimentConfig, work: &Workload, gamma: f64) -> Result<PotentialModel> {
    Ok(match work {
        Workload::Multiwell { .. } => {
            let dim = config.multiwell.as_ref().map_or(1, |m| m.dim);
            MultiWell::new(dim, gamma)?.into()
        }
        Workload::Linreg { x, y } => {
            let l = config.linreg.as_ref().expect("validated");
            LinearRegression::new(x, y, l.sigma, l.iota, l.p, l.eps, gamma)?.into()
        }
        Workload::Classification { train, .. } => {
            let c = config.classification.as_ref().expect("validated");
            Classification::new(&train.features, &train.label_values(), c.iota, c.t0, gamma)?.into()
        }
    })
}

fn prepare(config: &ExperimentConfig) -> Result<Workload> {
    Ok(match config.case {
        Case::Multiwell => {
            let m = config.multiwell.as_ref().expect("validated");
            Workload::Multiwell {
                reference: reference_multiwell(m.dim, m.reference_size, config.seed ^ 0x5eed_0001)?,
                projections: m.projections,
            }
        }
        Case::Linreg => {
            let l = config.linreg.as_ref().expect("validated");
            let (x, y) = generate_linreg_data(l.n, &l.beta_star, l.sigma, l.data_seed)?;
            Workload::Linreg { x, y }
        }
        Case::Classification => {
            let c = config.classification.as_ref().expect("validated");
            let (train, test) = load_dataset_csv(&c.dataset, c.split, c.split_seed)?;
            if test.is_empty() {
                return Err(Error::Config("classification needs a non-empty test split".into()));
            }
            Workload::Classification { train, test }
        }
    })
}

fn sampler_ledger(model: &PotentialModel, spec: &SamplerSpec, kappa_adjust: f64) -> Result<SamplerLedger> {
    let c = model.constants();
    let lambda = c.drift_rate.min(MAX_RATE);
    let bounds = lyapunov_quadratic_bounds(spec.gamma, lambda, c.energy_at_zero, c.grad_at_zero, c.lipschitz)?;
    let baseline = model_baseline(model, spec.gamma)?;
    let lam_hat = baseline.lambda_hat(spec.alpha).min(MAX_RATE);
    let rate = if lam_hat > 0.0 && spec.kind != Sampler::Ula {
        Some(contraction_rate(
            lam_hat,
            spec.alpha,
            spec.gamma,
            c.lipschitz,
            model.dim(),
            baseline.offset(spec.alpha),
            kappa_adjust,
        )?)
    } else {
        None
    };
    Ok(SamplerLedger {
        lambda,
        lipschitz: c.lipschitz,
        drift_offset: c.drift_offset,
        mu_min: bounds.mu_min,
        alpha0: baseline.alpha0,
        rate: rate.map(|r| r.rate),
        active_branch: rate.map(|r| r.active_branch),
        smallness_holds: rate.map(|r| r.smallness_holds),
    })
}

/// Metric value and standard error at one snapshot.
fn evaluate(work: &Workload, snap: &Snapshot, seed: u64) -> Result<(f64, f64)> {
    match work {
        Workload::Multiwell { reference, projections } => {
            let cloud = SampleCloud::new(snap.positions.clone())?;
            let per = crate::metrics::sliced_projections(&cloud, reference, *projections, seed)?;
            let n = per.len() as f64;
            let mean = per.iter().sum::<f64>() / n;
            let w = mean.sqrt();
            let var = per.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            // delta method for the square root
            let se = if w > 0.0 { (var / n).sqrt() / (2.0 * w) } else { 0.0 };
            Ok((w, se))
        }
        Workload::Linreg { x, y } => {
            let m = snap.positions.rows();
            let vals = (0..m)
                .map(|i| mse(x, y, snap.positions.row(i)))
                .collect::<Result<Vec<_>>>()?;
            Ok(mean_stderr(&vals))
        }
        Workload::Classification { test, .. } => {
            let m = snap.positions.rows();
            let d = snap.positions.cols();
            let mut mean_q = vec![0.0; d];
            for i in 0..m {
                for (a, v) in mean_q.iter_mut().zip(snap.positions.row(i)) {
                    *a += v / m as f64;
                }
            }
            let preds = Classification::predict(&test.features, &mean_q);
            let acc = accuracy(&preds, &test.labels)?;
            Ok((acc, (acc * (1.0 - acc) / test.len() as f64).sqrt()))
        }
    }
}

fn mean_stderr(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    if vals.len() < 2 {
        return (mean, 0.0);
    }
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn write_curve(path: &Path, steps: &[usize], metric: &[f64], stderr: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(["step", "metric", "stderr"]).map_err(csv_error)?;
    for i in 0..steps.len() {
        w.write_record(&[steps[i].to_string(), metric[i].to_string(), stderr[i].to_string()])
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn run_sampler(
    config: &ExperimentConfig,
    work: &Workload,
    spec: &SamplerSpec,
    schedule: &[usize],
    out_dir: &Path,
    warnings: &mut Vec<String>,
) -> Result<SamplerResult> {
    let model = build_model(config, work, spec.gamma)?;
    let params = config.params(spec);
    let ledger = match sampler_ledger(&model, spec, config.kappa_adjust) {
        Ok(l) => {
            if spec.kind == Sampler::Hfhr && l.smallness_holds == Some(false) {
                warnings.push(format!(
                    "{}: α = {} violates the drift smallness condition for κ_adjust = {}",
                    spec.label(),
                    spec.alpha,
                    config.kappa_adjust
                ));
            }
            Some(l)
        }
        Err(e) => {
            warnings.push(format!("{}: constants unavailable ({e})", spec.label()));
            None
        }
    };
    let mut ensemble = ChainEnsemble::new(model.dim(), &params, config.init)?;
    let (mut metric, mut stderr) = (Vec::new(), Vec::new());
    for (k, &target) in schedule.iter().enumerate() {
        ensemble.advance(&model, &params, spec.kind, target - ensemble.step_count())?;
        let (m, s) = evaluate(work, &ensemble.snapshot(), config.seed.wrapping_add(k as u64))?;
        metric.push(m);
        stderr.push(s);
    }
    let csv = out_dir.join(format!("{}.csv", spec.label()));
    write_curve(&csv, schedule, &metric, &stderr)?;
    Ok(SamplerResult {
        label: spec.label(),
        sampler: spec.kind,
        alpha: spec.alpha,
        gamma: spec.gamma,
        steps: schedule.to_vec(),
        metric,
        stderr,
        ledger,
        csv,
    })
}

/// Runs every configured sampler, writing one CSV per sampler and
/// `run.json` into `out_dir`. Results finished before a failure are kept on
/// disk together with the error.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<RunReport> {
    config.validate()?;
    let started = Instant::now();
    std::fs::create_dir_all(out_dir)?;
    let schedule = config.resolved_schedule()?;
    let work = prepare(config)?;
    let (metric, estimator) = match (&work, config.case) {
        (Workload::Multiwell { projections, reference }, _) => (
            "sliced_w2",
            format!(
                "sliced W2 of the position marginal, {projections} projections, against {} exact reference draws",
                reference.len()
            ),
        ),
        (_, Case::Linreg) => ("mse", "mean over chains of the training MSE of q_k".to_string()),
        _ => (
            "accuracy",
            "test accuracy of the chain-averaged coefficient, threshold 1/2".to_string(),
        ),
    };
    let mut report = RunReport {
        config: config.clone(),
        metric,
        estimator,
        rng: format!(
            "ChaCha8, seed {} with stream 3·chain + channel (0 position, 1 momentum, 2 init)",
            config.seed
        ),
        results: Vec::new(),
        warnings: Vec::new(),
        wall_clock_seconds: 0.0,
        error: None,
    };
    let mut failure = None;
    for spec in &config.samplers {
        match run_sampler(config, &work, spec, &schedule, out_dir, &mut report.warnings) {
            Ok(r) => report.results.push(r),
            Err(e) => {
                report.error = Some(format!("{}: {e}", spec.label()));
                failure = Some(e);
                break;
            }
        }
    }
    report.wall_clock_seconds = started.elapsed().as_secs_f64();
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Numerical(e.to_string()))?;
    std::fs::write(out_dir.join("run.json"), json)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_marginal_is_symmetric() {
        let m = WellMarginal::new().unwrap();
        assert!((m.quantile(0.5)).abs() < 1e-6);
        assert!((m.quantile(0.25) + m.quantile(0.75)).abs() < 1e-6);
    }

    #[test]
    fn noiseless_regression_is_exact() {
        let (x, y) = generate_linreg_data(20, &DEFAULT_BETA, 0.0, 3).unwrap();
        assert_eq!(y, x.matvec(&DEFAULT_BETA));
    }

    #[test]
    fn config_rejects_negative_alpha() {
        let text = r#"
            case = "multiwell"
            eta = 1e-3
            steps = 10
            chains = 2
            seed = 0
            [[samplers]]
            kind = "hfhr"
            alpha = -0.1
            gamma = 2.0
            [multiwell]
            dim = 1
        "#;
        assert!(matches!(ExperimentConfig::from_toml(text), Err(Error::Config(_))));
    }
}
