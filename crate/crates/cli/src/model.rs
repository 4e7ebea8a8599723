//! Case-study selection shared by the model-based subcommands.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use hfhr::experiments::{generate_linreg_data, load_dataset_csv, load_regression_csv, DEFAULT_BETA};
use hfhr::potentials::{Classification, Gaussian, LinearRegression, MultiWell};
use hfhr::PotentialModel;

use crate::CliError;

/// Synthetic regression sample size.
const SYNTHETIC_ROWS: usize = 1000;
/// Train fraction and shuffle seed of the classification split.
const BC_SPLIT: f64 = 0.7;
const BC_SPLIT_SEED: u64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CaseArg {
    /// Isotropic Gaussian, `U = |q|²/2`.
    Gaussian,
    /// Separable multi-well potential.
    Mw,
    /// Regularised linear regression.
    Lr,
    /// Tukey-loss binary classification.
    Bc,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub case: CaseArg,
    /// Dimension (Gaussian and multi-well only).
    #[arg(long = "d", visible_alias = "dim", default_value_t = 1)]
    pub dim: usize,
    /// Friction γ.
    #[arg(long)]
    pub gamma: f64,
    /// Dissipativity rate λ; the model's own value when omitted.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Data CSV with a header row: last column is the response (lr) or the
    /// 0/1 label (bc).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Generate the synthetic regression problem instead of reading a file.
    #[arg(long, conflicts_with = "dataset")]
    pub synthetic: bool,
    #[arg(long, default_value_t = 2024)]
    pub data_seed: u64,
    /// Regularisation weight (0.1 for lr, 0.05 for bc by default).
    #[arg(long)]
    pub iota: Option<f64>,
    /// Noise level of the regression likelihood.
    #[arg(long, default_value_t = 0.4)]
    pub sigma: f64,
    /// Tukey threshold.
    #[arg(long, default_value_t = 2.0)]
    pub t0: f64,
}

impl ModelArgs {
    pub fn build(&self) -> Result<PotentialModel, CliError> {
        if matches!(self.case, CaseArg::Lr | CaseArg::Bc) && self.dim != 1 {
            return Err(CliError::Usage("--d applies to the gaussian and mw cases only".into()));
        }
        if self.synthetic && self.case != CaseArg::Lr {
            return Err(CliError::Usage("--synthetic applies to --case lr only".into()));
        }
        let model: PotentialModel = match self.case {
            CaseArg::Gaussian => Gaussian::new(self.dim, self.gamma)?.into(),
            CaseArg::Mw => MultiWell::new(self.dim, self.gamma)?.into(),
            CaseArg::Lr => {
                let (x, y) = match (&self.dataset, self.synthetic) {
                    (Some(path), _) => load_regression_csv(path)?,
                    (None, true) => generate_linreg_data(SYNTHETIC_ROWS, &DEFAULT_BETA, self.sigma, self.data_seed)?,
                    (None, false) => {
                        return Err(CliError::Usage("--case lr needs --dataset <CSV> or --synthetic".into()))
                    }
                };
                LinearRegression::new(&x, &y, self.sigma, self.iota.unwrap_or(0.1), 1.2, 1e-3, self.gamma)?.into()
            }
            CaseArg::Bc => {
                let path = self
                    .dataset
                    .as_ref()
                    .ok_or_else(|| CliError::Usage("--case bc needs --dataset <CSV>".into()))?;
                let (train, _) = load_dataset_csv(path, BC_SPLIT, BC_SPLIT_SEED)?;
                Classification::new(
                    &train.features,
                    &train.label_values(),
                    self.iota.unwrap_or(0.05),
                    self.t0,
                    self.gamma,
                )?
                .into()
            }
        };
        Ok(match self.lambda {
            Some(l) => model.with_lambda(l)?,
            None => model,
        })
    }
}
