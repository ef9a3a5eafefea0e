//! End-to-end experiment description and runner shared by the command-line
//! tool and the acceptance suite.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{JacError, Result};
use crate::field::{Activation, JacobianField};
use crate::integrate::IntegratorConfig;
use crate::linalg::Vector;
use crate::model::JacNetModel;
use crate::train::{
    empirical_risk, fmt_f64, sample_dataset, train_observed, AdamConfig, AnnealConfig, Dataset,
    DatasetSpec, Target, TrainConfig, TrainState,
};

/// Seed of the reference runs for the `exp` and `abs` experiments.
pub const REFERENCE_SEED: u64 = 6;

fn default_n_train() -> usize {
    5
}
fn default_train_interval() -> [f64; 2] {
    [-1.0, 1.0]
}
fn default_n_test() -> usize {
    100
}
fn default_test_interval() -> [f64; 2] {
    [-2.0, 2.0]
}
fn default_dim() -> usize {
    1
}
fn default_hidden() -> usize {
    64
}
fn default_lr() -> f64 {
    0.01
}
fn default_iterations() -> usize {
    50
}
fn default_integrator() -> IntegratorConfig {
    IntegratorConfig::rk45(
        AnnealConfig::default().tol_init,
        AnnealConfig::default().tol_init,
    )
}
fn default_eval_tolerance() -> f64 {
    1e-8
}

/// Whole-experiment configuration, read from a single JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub target: Target,
    #[serde(default = "default_n_train")]
    pub n_train: usize,
    #[serde(default = "default_train_interval")]
    pub train_interval: [f64; 2],
    #[serde(default)]
    pub seed: u64,
    /// Parameter-initialization seed; defaults to `seed`.
    #[serde(default)]
    pub init_seed: Option<u64>,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default = "default_test_interval")]
    pub test_interval: [f64; 2],
    /// Test-set seed; defaults to `seed + 1`.
    #[serde(default)]
    pub test_seed: Option<u64>,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    pub activation: Activation,
    /// Anchor input; defaults to the origin.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    /// Anchor output; defaults to the target evaluated at `x0`.
    #[serde(default)]
    pub y0: Option<Vec<f64>>,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default)]
    pub adam: AdamConfig,
    #[serde(default)]
    pub anneal: AnnealConfig,
    /// Scheme used while training; the annealer drives its tolerance.
    #[serde(default = "default_integrator")]
    pub integrator: IntegratorConfig,
    /// Tolerance for final metrics, evaluation, and inversion.
    #[serde(default = "default_eval_tolerance")]
    pub eval_tolerance: f64,
    #[serde(default)]
    pub output_dir: Option<String>,
}

impl ExperimentConfig {
    fn preset(target: Target, activation: Activation) -> Self {
        Self {
            target,
            n_train: default_n_train(),
            train_interval: default_train_interval(),
            seed: REFERENCE_SEED,
            init_seed: None,
            n_test: default_n_test(),
            test_interval: default_test_interval(),
            test_seed: None,
            dim: 1,
            hidden: default_hidden(),
            activation,
            x0: None,
            y0: None,
            lr: default_lr(),
            iterations: default_iterations(),
            adam: AdamConfig::default(),
            anneal: AnnealConfig::default(),
            integrator: default_integrator(),
            eval_tolerance: default_eval_tolerance(),
            output_dir: None,
        }
    }

    /// Invertible experiment: learn `exp` with an SPD Jacobian.
    pub fn exp_spd() -> Self {
        Self::preset(Target::Exp, Activation::Spd { epsilon: 0.0001 })
    }

    /// Lipschitz experiment: learn `|x|` with a 1-scaled tanh Jacobian.
    pub fn abs_lipschitz() -> Self {
        Self::preset(Target::Abs, Activation::ScaledTanh { k: 1.0 })
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed.unwrap_or(self.seed)
    }

    pub fn test_seed(&self) -> u64 {
        self.test_seed.unwrap_or(self.seed.wrapping_add(1))
    }

    pub fn x0(&self) -> Result<Vector> {
        match &self.x0 {
            Some(x) => Vector::from_slice(x),
            None => Ok(Vector::zeros(self.dim)),
        }
    }

    pub fn y0(&self) -> Result<Vector> {
        match &self.y0 {
            Some(y) => Vector::from_slice(y),
            None => self.target.eval(&self.x0()?).ok_or_else(|| {
                JacError::InvalidArgument("y0 is required for a custom target".into())
            }),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            iterations: self.iterations,
            adam: self.adam,
            anneal: self.anneal,
            integrator: self.integrator,
        }
    }

    pub fn eval_integrator(&self) -> IntegratorConfig {
        self.integrator.at_tolerance(self.eval_tolerance)
    }

    pub fn train_spec(&self) -> DatasetSpec {
        DatasetSpec {
            target: self.target,
            n: self.n_train,
            interval: self.train_interval,
            seed: self.seed,
            dim: self.dim,
        }
    }

    pub fn test_spec(&self) -> DatasetSpec {
        DatasetSpec {
            target: self.target,
            n: self.n_test,
            interval: self.test_interval,
            seed: self.test_seed(),
            dim: self.dim,
        }
    }

    /// Checks every field before any compute happens.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(JacError::InvalidArgument(msg));
        if self.target == Target::Custom {
            return bad("custom targets cannot be sampled from a config file".into());
        }
        if self.dim == 0 || self.hidden == 0 || self.n_train == 0 || self.n_test == 0 {
            return bad("dim, hidden, n_train and n_test must be positive".into());
        }
        for (name, [lo, hi]) in [
            ("train_interval", self.train_interval),
            ("test_interval", self.test_interval),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return bad(format!("{name} must satisfy lo <= hi, got [{lo}, {hi}]"));
            }
        }
        self.activation.validate(self.dim, self.dim)?;
        self.train_config().validate()?;
        if !(self.eval_tolerance > 0.0 && self.eval_tolerance.is_finite()) {
            return bad("eval_tolerance must be positive".into());
        }
        let x0 = self.x0()?;
        let y0 = self.y0()?;
        if x0.dim() != self.dim || y0.dim() != self.dim {
            return bad(format!("x0 and y0 must have dimension {}", self.dim));
        }
        Ok(())
    }

    /// Copy with every defaulted field filled in.
    pub fn resolved(&self) -> Result<Self> {
        let mut out = self.clone();
        out.init_seed = Some(self.init_seed());
        out.test_seed = Some(self.test_seed());
        out.x0 = Some(self.x0()?.into_vec());
        out.y0 = Some(self.y0()?.into_vec());
        Ok(out)
    }

    /// Untrained model at the configured initialization.
    pub fn initial_model(&self) -> Result<JacNetModel> {
        let field = JacobianField::init(
            self.dim,
            self.dim,
            self.hidden,
            self.activation,
            self.init_seed(),
        )?;
        let integrator = self.integrator.at_tolerance(self.anneal.tol_init);
        JacNetModel::new(field, self.x0()?, self.y0()?, integrator)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    /// Trained model, integrating at the evaluation tolerance.
    pub model: JacNetModel,
    pub state: TrainState,
    pub train_data: Dataset,
    pub test_data: Dataset,
    pub final_train_loss: f64,
    pub test_loss: f64,
    pub wall_time: f64,
}

/// Samples the data, trains, and measures the final losses.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    run_experiment_observed(cfg, |_, _| Ok(()))
}

/// [`run_experiment`] with a hook that sees the model before every update.
pub fn run_experiment_observed<O>(cfg: &ExperimentConfig, observer: O) -> Result<ExperimentOutcome>
where
    O: FnMut(usize, &JacNetModel) -> Result<()>,
{
    cfg.validate()?;
    let start = Instant::now();
    let train_data = sample_dataset(&cfg.train_spec())?;
    let test_data = sample_dataset(&cfg.test_spec())?;
    let model0 = cfg.initial_model()?;
    let (trained, state) = train_observed(&train_data, &model0, &cfg.train_config(), observer)?;
    let model = trained.with_integrator(cfg.eval_integrator());
    let final_train_loss = empirical_risk(&model, &train_data)?;
    let test_loss = empirical_risk(&model, &test_data)?;
    Ok(ExperimentOutcome {
        model,
        state,
        train_data,
        test_data,
        final_train_loss,
        test_loss,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// `n` evenly spaced points on `[lo, hi]`; a single point sits at `lo`.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i + 1 == n {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// `x,y_target,y_pred` rows for a 1-D model over a uniform grid.
pub fn eval_csv(model: &JacNetModel, target: Target, grid: &[f64]) -> Result<String> {
    let mut out = String::from("x,y_target,y_pred\n");
    for &x in grid {
        let xv = Vector::scalar(x);
        let y_target = target.eval(&xv).map_or(f64::NAN, |v| v[0]);
        let y_pred = model.predict(&xv)?[0];
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt_f64(x),
            fmt_f64(y_target),
            fmt_f64(y_pred)
        );
    }
    Ok(out)
}

/// `y,x_true,x_pred` rows for a 1-D SPD model over a uniform grid of outputs.
pub fn invert_csv(model: &JacNetModel, target: Target, grid: &[f64]) -> Result<String> {
    if !matches!(model.field.activation(), Activation::Spd { .. }) {
        return Err(JacError::InvalidArgument(format!(
            "inversion needs an spd-activated field, found {}",
            model.field.activation().name()
        )));
    }
    let mut out = String::from("y,x_true,x_pred\n");
    for &y in grid {
        let yv = Vector::scalar(y);
        let x_true = target.inverse(&yv).map_or(f64::NAN, |v| v[0]);
        let x_pred = model.invert(&yv)?[0];
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt_f64(y),
            fmt_f64(x_true),
            fmt_f64(x_pred)
        );
    }
    Ok(out)
}
