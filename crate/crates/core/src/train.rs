//! Full-batch empirical-risk training with Adam and integrator-tolerance
//! annealing.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, JacError, Result};
use crate::integrate::{accumulate_grad_from_nodes, IntegratorConfig};
use crate::linalg::Vector;
use crate::model::JacNetModel;

/// Function the labels come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Exp,
    Abs,
    /// Labels supplied by the caller through [`Dataset::from_pairs`].
    Custom,
}

impl Target {
    /// Elementwise target value, `None` for [`Target::Custom`].
    pub fn eval(&self, x: &Vector) -> Option<Vector> {
        let f: fn(f64) -> f64 = match self {
            Target::Exp => f64::exp,
            Target::Abs => f64::abs,
            Target::Custom => return None,
        };
        Some(Vector::from_vec_unchecked(
            x.as_slice().iter().map(|&v| f(v)).collect(),
        ))
    }

    /// Elementwise inverse where one exists (`ln` for `exp`).
    pub fn inverse(&self, y: &Vector) -> Option<Vector> {
        match self {
            Target::Exp => Some(Vector::from_vec_unchecked(
                y.as_slice().iter().map(|v| v.ln()).collect(),
            )),
            Target::Abs | Target::Custom => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub target: Target,
    pub n: usize,
    pub interval: [f64; 2],
    pub seed: u64,
    #[serde(default = "one")]
    pub dim: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub pairs: Vec<(Vector, Vector)>,
    pub spec: DatasetSpec,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Dataset with caller-supplied labels.
    pub fn from_pairs(pairs: Vec<(Vector, Vector)>) -> Result<Self> {
        let first = pairs
            .first()
            .ok_or_else(|| JacError::InvalidArgument("dataset must be non-empty".into()))?;
        let (d_in, d_out) = (first.0.dim(), first.1.dim());
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in &pairs {
            check_dim("dataset input", d_in, x.dim())?;
            check_dim("dataset label", d_out, y.dim())?;
            for &v in x.as_slice() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        Ok(Self {
            spec: DatasetSpec {
                target: Target::Custom,
                n: pairs.len(),
                interval: [lo, hi],
                seed: 0,
                dim: d_in,
            },
            pairs,
        })
    }
}

/// Draws `spec.n` points i.i.d. uniform on `spec.interval` (per coordinate)
/// and labels them with the target.
pub fn sample_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    let [lo, hi] = spec.interval;
    if spec.n == 0 || spec.dim == 0 {
        return Err(JacError::InvalidArgument(
            "dataset needs n >= 1 and dim >= 1".into(),
        ));
    }
    if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
        return Err(JacError::InvalidArgument(format!(
            "invalid sampling interval [{lo}, {hi}]"
        )));
    }
    if spec.target == Target::Custom {
        return Err(JacError::InvalidArgument(
            "custom target has no generator; build the dataset from pairs".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let pairs = (0..spec.n)
        .map(|_| {
            let x: Vec<f64> = (0..spec.dim)
                .map(|_| if lo == hi { lo } else { rng.gen_range(lo..hi) })
                .collect();
            let x = Vector::from_vec_unchecked(x);
            let y = spec.target.eval(&x).expect("generated target");
            (x, y)
        })
        .collect();
    Ok(Dataset { pairs, spec: *spec })
}

/// `Σ |y_i - ŷ_i|`.
pub fn l1_loss(y: &Vector, yhat: &Vector) -> Result<f64> {
    Ok(y.sub(yhat)?.norm_l1())
}

/// Mean L1 loss of the model over the dataset and its (sub)gradient with
/// respect to the flat field parameters. Also returns field evaluations spent.
pub fn empirical_risk_and_grad(
    model: &JacNetModel,
    data: &Dataset,
) -> Result<(f64, Vector, usize)> {
    if data.is_empty() {
        return Err(JacError::InvalidArgument("empty dataset".into()));
    }
    let n = data.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; model.field.param_count()];
    let mut evals = 0;
    for (x, y) in &data.pairs {
        let (yhat, path, res) = model.predict_traced(x)?;
        evals += res.evals;
        loss += l1_loss(y, &yhat)?;
        // d|y - ŷ|/dŷ = -sign(y - ŷ), with sign(0) = 0
        let upstream = Vector::from_vec_unchecked(
            y.as_slice()
                .iter()
                .zip(yhat.as_slice())
                .map(|(a, b)| {
                    let r = a - b;
                    if r > 0.0 {
                        -1.0
                    } else if r < 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect(),
        );
        accumulate_grad_from_nodes(
            &model.field,
            &path,
            &res.nodes,
            &upstream,
            1.0 / n,
            &mut grad,
        )?;
    }
    Ok((loss / n, Vector::from_vec_unchecked(grad), evals))
}

/// Mean L1 loss only.
pub fn empirical_risk(model: &JacNetModel, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(JacError::InvalidArgument("empty dataset".into()));
    }
    let mut loss = 0.0;
    for (x, y) in &data.pairs {
        loss += l1_loss(y, &model.predict(x)?)?;
    }
    Ok(loss / data.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealConfig {
    pub tol_init: f64,
    pub factor: f64,
    pub tol_floor: f64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self {
            tol_init: 1e-1,
            factor: 0.5,
            tol_floor: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub iterations: usize,
    pub adam: AdamConfig,
    pub anneal: AnnealConfig,
    /// Scheme used during training; its tolerance is driven by the annealer.
    pub integrator: IntegratorConfig,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(JacError::InvalidArgument(msg.into()));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        let a = &self.adam;
        if !(0.0..1.0).contains(&a.beta1)
            || !(0.0..1.0).contains(&a.beta2)
            || a.eps_adam.is_nan()
            || a.eps_adam <= 0.0
        {
            return bad("adam betas must be in [0, 1) and eps_adam positive");
        }
        let an = &self.anneal;
        if !(an.factor > 0.0 && an.factor < 1.0) {
            return bad("anneal factor must be in (0, 1)");
        }
        if !(an.tol_floor > 0.0 && an.tol_init >= an.tol_floor && an.tol_init.is_finite()) {
            return bad("anneal needs 0 < tol_floor <= tol_init");
        }
        self.integrator.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub iter: usize,
    pub loss: f64,
    pub tolerance: f64,
    pub field_evals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: Vec<f64>,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
    pub iter: usize,
    pub current_tol: f64,
    pub history: Vec<HistoryRow>,
}

impl TrainState {
    pub fn new(params: Vec<f64>, tol: f64) -> Self {
        let n = params.len();
        Self {
            params,
            adam_m: vec![0.0; n],
            adam_v: vec![0.0; n],
            iter: 0,
            current_tol: tol,
            history: Vec::new(),
        }
    }

    /// How many times the tolerance was tightened.
    pub fn anneal_events(&self) -> usize {
        let mut events = 0;
        let mut tol = self.history.first().map(|r| r.tolerance);
        for row in self.history.iter().skip(1) {
            if Some(row.tolerance) != tol {
                events += 1;
                tol = Some(row.tolerance);
            }
        }
        if let Some(t) = tol {
            if self.current_tol != t {
                events += 1;
            }
        }
        events
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(state: &mut TrainState, grad: &[f64], lr: f64, cfg: &AdamConfig) -> Result<()> {
    check_dim("adam gradient", state.params.len(), grad.len())?;
    state.iter += 1;
    let t = state.iter as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (((p, m), v), &g) in state
        .params
        .iter_mut()
        .zip(&mut state.adam_m)
        .zip(&mut state.adam_v)
        .zip(grad)
    {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + cfg.eps_adam);
    }
    Ok(())
}

/// Runs `cfg.iterations` full-batch Adam steps, tightening the integrator
/// tolerance whenever the loss drops below it. `observer` sees the model at
/// every iteration before its update.
pub fn train_observed<O>(
    data: &Dataset,
    model0: &JacNetModel,
    cfg: &TrainConfig,
    mut observer: O,
) -> Result<(JacNetModel, TrainState)>
where
    O: FnMut(usize, &JacNetModel) -> Result<()>,
{
    cfg.validate()?;
    let mut state = TrainState::new(model0.field.params_flat(), cfg.anneal.tol_init);
    let mut model = model0.clone();
    for i in 0..cfg.iterations {
        model.integrator = cfg.integrator.at_tolerance(state.current_tol);
        observer(i, &model)?;
        let (loss, grad, evals) = empirical_risk_and_grad(&model, data)?;
        if !loss.is_finite() {
            return Err(JacError::NonFinite("training loss"));
        }
        state.history.push(HistoryRow {
            iter: i,
            loss,
            tolerance: state.current_tol,
            field_evals: evals,
        });
        adam_step(&mut state, grad.as_slice(), cfg.lr, &cfg.adam)?;
        model.field.set_params_flat(&state.params)?;
        if loss < state.current_tol {
            state.current_tol = (state.current_tol * cfg.anneal.factor).max(cfg.anneal.tol_floor);
        }
    }
    model.integrator = cfg.integrator.at_tolerance(state.current_tol);
    Ok((model, state))
}

pub fn train(
    data: &Dataset,
    model0: &JacNetModel,
    cfg: &TrainConfig,
) -> Result<(JacNetModel, TrainState)> {
    train_observed(data, model0, cfg, |_, _| Ok(()))
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// History as CSV: `iter,loss,tolerance,field_evals`.
pub fn history_csv(history: &[HistoryRow]) -> String {
    let mut out = String::from("iter,loss,tolerance,field_evals\n");
    for r in history {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.iter,
            fmt_f64(r.loss),
            fmt_f64(r.tolerance),
            r.field_evals
        );
    }
    out
}
