use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use jacnet_core::checks::{
    activation_cases, field_grad_suite, gradient_field_discrepancy, integral_grad_suite,
    risk_grad_suite, rotational_field_discrepancy,
};
use jacnet_core::experiment::{
    eval_csv, invert_csv, run_experiment, uniform_grid, ExperimentConfig,
};
use jacnet_core::train::history_csv;
use jacnet_core::{
    conservativity_diagnostic, Activation, IntegratorConfig, JacNetModel, JacobianField,
    JacobianFn, Target, Vector,
};

use crate::overrides::apply_override;

/// A check ran but its result exceeded the allowed tolerance.
#[derive(Debug)]
pub struct ThresholdViolation(pub Vec<String>);

impl std::fmt::Display for ThresholdViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "tolerance exceeded: {}", self.0.join("; "))
    }
}

impl std::error::Error for ThresholdViolation {}

/// Parses a config file, applies overrides, and validates it.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut doc: Value = serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let cfg: ExperimentConfig = serde_json::from_value(doc)
        .with_context(|| format!("invalid config {}", path.display()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

pub fn train(config: &Path, overrides: &[String], out: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(config, overrides)?;
    let dir = out
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(format!("runs/{}", config_stem(config))));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;

    let outcome = run_experiment(&cfg)?;
    let resolved = cfg.resolved()?;
    let meta = json!({
        "config": resolved,
        "metrics": {
            "final_train_loss": outcome.final_train_loss,
            "test_loss": outcome.test_loss,
            "wall_time": outcome.wall_time,
            "anneal_events": outcome.state.anneal_events(),
            "final_tolerance": outcome.state.current_tol,
            "iterations": outcome.state.history.len(),
        }
    });
    write(&dir, "params.json", &outcome.model.field.to_json())?;
    write(&dir, "history.csv", &history_csv(&outcome.state.history))?;
    write(&dir, "meta.json", &serde_json::to_string_pretty(&meta)?)?;
    println!(
        "trained {} / {}: final train loss {:.6}, test loss {:.6}, {} anneal events -> {}",
        target_name(cfg.target),
        cfg.activation.name(),
        outcome.final_train_loss,
        outcome.test_loss,
        outcome.state.anneal_events(),
        dir.display()
    );
    Ok(())
}

fn config_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into())
}

fn target_name(t: Target) -> &'static str {
    match t {
        Target::Exp => "exp",
        Target::Abs => "abs",
        Target::Custom => "custom",
    }
}

/// Model settings for `eval` and `invert`: read from `meta.json` next to the
/// parameters when present, then overridden by flags.
#[derive(Debug, Clone, Default)]
pub struct ModelArgs {
    pub params: PathBuf,
    pub meta: Option<PathBuf>,
    pub target: Option<Target>,
    pub x0: Option<f64>,
    pub y0: Option<f64>,
    pub tol: Option<f64>,
}

struct LoadedModel {
    model: JacNetModel,
    target: Target,
}

fn load_model(args: &ModelArgs) -> Result<LoadedModel> {
    let text = fs::read_to_string(&args.params)
        .with_context(|| format!("reading params {}", args.params.display()))?;
    let field = JacobianField::from_json(&text)?;

    let meta_path = args.meta.clone().or_else(|| {
        let p = args.params.with_file_name("meta.json");
        p.exists().then_some(p)
    });
    let meta_cfg = match meta_path {
        Some(p) => {
            let text =
                fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
            let meta: Value =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            let cfg: ExperimentConfig = serde_json::from_value(
                meta.get("config")
                    .cloned()
                    .ok_or_else(|| anyhow!("{} has no config", p.display()))?,
            )?;
            Some(cfg)
        }
        None => None,
    };

    let target = args
        .target
        .or(meta_cfg.as_ref().map(|c| c.target))
        .unwrap_or(Target::Custom);
    let d = field.d_in();
    let x0 = match (args.x0, &meta_cfg) {
        (Some(x), _) => Vector::from_slice(&vec![x; d])?,
        (None, Some(c)) => c.x0()?,
        (None, None) => Vector::zeros(d),
    };
    let y0 = match (args.y0, &meta_cfg) {
        (Some(y), _) => Vector::from_slice(&vec![y; d])?,
        (None, Some(c)) => c.y0()?,
        (None, None) => target
            .eval(&x0)
            .ok_or_else(|| anyhow!("cannot infer y0: pass --y0 or --target"))?,
    };
    let base = meta_cfg
        .as_ref()
        .map(|c| c.integrator)
        .unwrap_or_else(|| IntegratorConfig::rk45(1e-8, 1e-8));
    let tol = args
        .tol
        .or(meta_cfg.as_ref().map(|c| c.eval_tolerance))
        .unwrap_or(1e-8);
    let model = JacNetModel::new(field, x0, y0, base.at_tolerance(tol))?;
    Ok(LoadedModel { model, target })
}

fn require_1d(model: &JacNetModel) -> Result<()> {
    if model.x0.dim() != 1 || model.y0.dim() != 1 {
        bail!("grid evaluation supports 1-D models only");
    }
    Ok(())
}

pub fn eval(args: &ModelArgs, n: usize, lo: f64, hi: f64, out: &Path) -> Result<()> {
    check_grid(n, lo, hi)?;
    let loaded = load_model(args)?;
    require_1d(&loaded.model)?;
    fs::create_dir_all(out)?;
    let csv = eval_csv(&loaded.model, loaded.target, &uniform_grid(lo, hi, n))?;
    let path = write(out, "eval.csv", &csv)?;
    println!("wrote {n} rows to {}", path.display());
    Ok(())
}

pub fn invert(args: &ModelArgs, n: usize, lo: f64, hi: f64, out: &Path) -> Result<()> {
    check_grid(n, lo, hi)?;
    let loaded = load_model(args)?;
    if !matches!(loaded.model.field.activation(), Activation::Spd { .. }) {
        bail!(
            "refusing to invert a {} model: only spd-activated fields are guaranteed invertible",
            loaded.model.field.activation().name()
        );
    }
    require_1d(&loaded.model)?;
    fs::create_dir_all(out)?;
    let csv = invert_csv(&loaded.model, loaded.target, &uniform_grid(lo, hi, n))?;
    let path = write(out, "invert.csv", &csv)?;
    println!("wrote {n} rows to {}", path.display());
    Ok(())
}

fn check_grid(n: usize, lo: f64, hi: f64) -> Result<()> {
    if n == 0 || !(lo.is_finite() && hi.is_finite()) || lo > hi {
        bail!("grid needs n >= 1 and finite lo <= hi (got n={n}, [{lo}, {hi}])");
    }
    Ok(())
}

pub fn diagnose(params: Option<&Path>, pairs: usize, seed: u64) -> Result<()> {
    let cfg = IntegratorConfig::rk4(64);
    let grad = gradient_field_discrepancy(&cfg)?;
    let rot = rotational_field_discrepancy(&cfg)?;
    println!("gradient field |x|^2:  discrepancy {grad:.3e} (expect <= 1e-8)");
    println!("rotational field:      discrepancy {rot:.12} (expect 1 +/- 1e-6)");
    let mut offenders = Vec::new();
    if grad > 1e-8 {
        offenders.push(format!("gradient field discrepancy {grad:e}"));
    }
    if (rot - 1.0).abs() > 1e-6 {
        offenders.push(format!("rotational field discrepancy {rot}"));
    }

    if let Some(p) = params {
        let text =
            fs::read_to_string(p).with_context(|| format!("reading params {}", p.display()))?;
        let field = JacobianField::from_json(&text)?;
        if field.d_in() < 2 {
            bail!("path dependence needs a field with at least 2 inputs");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tight = IntegratorConfig::rk45(1e-10, 1e-10);
        let mut worst: f64 = 0.0;
        for _ in 0..pairs {
            let mut draw = || {
                Vector::new(
                    (0..field.d_in())
                        .map(|_| rng.gen_range(-1.0..1.0))
                        .collect(),
                )
            };
            let (a, b) = (draw()?, draw()?);
            worst = worst.max(conservativity_diagnostic(&field, &a, &b, &tight)?);
        }
        println!("learned field:         max discrepancy {worst:.3e} over {pairs} random pairs");
    }

    if offenders.is_empty() {
        Ok(())
    } else {
        Err(ThresholdViolation(offenders).into())
    }
}

pub fn gradcheck(seed: u64, instances: usize) -> Result<()> {
    const LIMIT: f64 = 1e-5;
    let rk4 = IntegratorConfig::rk4(32);
    let mut offenders = Vec::new();
    for (i, (act, d_in, d_out)) in activation_cases().into_iter().enumerate() {
        let s = seed.wrapping_add(i as u64 * 7919);
        let reports = [
            ("field", field_grad_suite(act, d_in, d_out, instances, s)?),
            (
                "integral",
                integral_grad_suite(act, d_in, d_out, instances, s, &rk4)?,
            ),
            ("risk", risk_grad_suite(act, instances, s, &rk4)?),
        ];
        for (suite, r) in reports {
            let ok = r.max_rel_err < LIMIT;
            println!(
                "{:<15} {:<9} instances {:>4}  max rel err {:.3e}  {}",
                r.activation,
                suite,
                r.instances,
                r.max_rel_err,
                if ok { "ok" } else { "FAIL" }
            );
            if !ok {
                offenders.push(format!("{}/{suite}: {:e}", r.activation, r.max_rel_err));
            }
        }
    }
    if offenders.is_empty() {
        Ok(())
    } else {
        Err(ThresholdViolation(offenders).into())
    }
}
