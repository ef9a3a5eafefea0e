//! Acceptance criteria for the whole crate. Each criterion prints one
//! PASS/FAIL line; the process exits non-zero if any criterion fails.

use std::f64::consts::E;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use jacnet_core::checks::{
    activation_cases, gradient_field_discrepancy, integral_grad_suite, rotational_field_discrepancy,
};
use jacnet_core::experiment::{
    run_experiment, run_experiment_observed, uniform_grid, ExperimentConfig,
};
use jacnet_core::train::history_csv;
use jacnet_core::{
    line_integrate, Activation, FnField, IntegratorConfig, JacError, JacNetModel, JacobianField,
    LinearPath, Matrix, Result, Vector,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn criterion<F>(id: u32, name: &str, budget: Duration, f: F) -> bool
where
    F: FnOnce() -> Result<Outcome>,
{
    let start = Instant::now();
    let result = f();
    let elapsed = start.elapsed();
    let (pass, detail) = match result {
        Ok(o) => (o.pass && elapsed <= budget, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    println!(
        "[{}] criterion {id}: {name} | {detail} | {:.2}s (budget {}s)",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    pass
}

fn s(x: f64) -> Vector {
    Vector::scalar(x)
}

fn gradient_correctness() -> Result<Outcome> {
    let cfg = IntegratorConfig::rk4(32);
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (i, (act, d_in, d_out)) in activation_cases().into_iter().enumerate() {
        let r = integral_grad_suite(act, d_in, d_out, 50, 1000 + i as u64, &cfg)?;
        worst = worst.max(r.max_rel_err);
        parts.push(format!("{}={:.1e}", r.activation, r.max_rel_err));
    }
    Ok(Outcome {
        pass: worst < 1e-5,
        detail: format!("max rel err {} (limit 1e-5)", parts.join(" ")),
    })
}

fn integrator_order() -> Result<Outcome> {
    let field = FnField::new(1, 1, |x: &Vector| {
        Matrix::new(1, 1, vec![x[0].exp()]).unwrap()
    });
    let path = LinearPath::new(s(0.0), s(1.0))?;
    let mut errs = Vec::new();
    for steps in [8, 16, 32, 64] {
        let v = line_integrate(&field, &path, &IntegratorConfig::rk4(steps))?.value[0];
        errs.push((v - (E - 1.0)).abs());
    }
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    Ok(Outcome {
        pass: ratios.iter().all(|r| (12.0..=20.0).contains(r)),
        detail: format!("error ratios {ratios:.3?} (want [12, 20])"),
    })
}

fn conservativity() -> Result<Outcome> {
    let cfg = IntegratorConfig::rk4(64);
    let grad = gradient_field_discrepancy(&cfg)?;
    let rot = rotational_field_discrepancy(&cfg)?;
    Ok(Outcome {
        pass: grad <= 1e-8 && (rot - 1.0).abs() <= 1e-6,
        detail: format!("gradient field {grad:.1e} (<= 1e-8), rotational {rot:.12} (1 ± 1e-6)"),
    })
}

/// Largest violation of `|ŷ(a) - ŷ(b)| <= k|a - b| + slack` over all grid pairs.
fn lipschitz_violation(preds: &[f64], grid: &[f64], k: f64, slack: f64) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for i in 0..grid.len() {
        for j in 0..grid.len() {
            let v = (preds[i] - preds[j]).abs() - k * (grid[i] - grid[j]).abs() - slack;
            worst = worst.max(v);
        }
    }
    worst
}

fn predictions(model: &JacNetModel, grid: &[f64]) -> Result<Vec<f64>> {
    grid.iter().map(|&x| Ok(model.predict(&s(x))?[0])).collect()
}

fn structural_guarantees() -> Result<Outcome> {
    let eps = 0.0001;
    let tight = IntegratorConfig::rk45(1e-10, 1e-10);
    let grid = uniform_grid(-2.0, 2.0, 21);
    let mut chol_fail = 0;
    let mut lip_worst = f64::NEG_INFINITY;
    let mut mono_fail = 0;
    for seed in 0..200u64 {
        let spd = JacobianField::init(1, 1, 64, Activation::Spd { epsilon: eps }, seed)?;
        for &x in &grid {
            if !spd.eval(&s(x))?.cholesky_check(eps)? {
                chol_fail += 1;
            }
        }
        let spd_model = JacNetModel::new(spd, s(0.0), s(1.0), tight)?;
        let p = predictions(&spd_model, &grid)?;
        mono_fail += p
            .windows(2)
            .filter(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
            .count();

        let lip = JacobianField::init(1, 1, 64, Activation::ScaledTanh { k: 1.0 }, seed)?;
        let lip_model = JacNetModel::new(lip, s(0.0), s(0.0), tight)?;
        let p = predictions(&lip_model, &grid)?;
        lip_worst = lip_worst.max(lipschitz_violation(&p, &grid, 1.0, 1e-6));
    }
    Ok(Outcome {
        pass: chol_fail == 0 && lip_worst <= 0.0 && mono_fail == 0,
        detail: format!(
            "200 seeds: cholesky failures {chol_fail}, worst Lipschitz excess {lip_worst:.1e} (<= 0), monotonicity failures {mono_fail}"
        ),
    })
}

fn invertible_experiment(cfg: &ExperimentConfig) -> Result<(Outcome, JacNetModel)> {
    let out = run_experiment(cfg)?;
    let hist = &out.state.history;
    let anneals = out.state.anneal_events();
    let (first, last) = (hist[0].loss, hist[hist.len() - 1].loss);
    Ok((
        Outcome {
            pass: out.final_train_loss <= 0.02 && anneals >= 3 && last < first,
            detail: format!(
                "final train loss {:.5} (<= 0.02), anneal events {anneals} (>= 3), loss {first:.4} -> {last:.4}",
                out.final_train_loss
            ),
        },
        out.model,
    ))
}

fn inverse_fidelity(model: &JacNetModel) -> Result<Outcome> {
    let model = model.with_integrator(IntegratorConfig::rk45(1e-8, 1e-8));
    let xs: Vec<Vector> = uniform_grid(-1.0, 1.0, 21).into_iter().map(s).collect();
    let round_trip = model.round_trip_error(&xs)?;
    let mut log_err: f64 = 0.0;
    for y in uniform_grid((-1.0f64).exp(), E, 21) {
        log_err = log_err.max((model.invert(&s(y))?[0] - y.ln()).abs());
    }
    Ok(Outcome {
        pass: round_trip <= 1e-3 && log_err <= 5e-2,
        detail: format!(
            "round trip {round_trip:.1e} (<= 1e-3), max |invert(y) - ln y| {log_err:.4} (<= 5e-2)"
        ),
    })
}

fn lipschitz_experiment() -> Result<Outcome> {
    let cfg = ExperimentConfig::abs_lipschitz();
    let grid = uniform_grid(-2.0, 2.0, 21);
    let check_cfg = IntegratorConfig::rk45(1e-10, 1e-10);
    let mut worst = f64::NEG_INFINITY;
    let mut checked = 0;
    let out = run_experiment_observed(&cfg, |_, m| {
        let p = predictions(&m.with_integrator(check_cfg), &grid)?;
        worst = worst.max(lipschitz_violation(&p, &grid, 1.0, 1e-6));
        checked += 1;
        Ok(())
    })?;
    let p = predictions(&out.model.with_integrator(check_cfg), &grid)?;
    worst = worst.max(lipschitz_violation(&p, &grid, 1.0, 1e-6));
    checked += 1;
    Ok(Outcome {
        pass: out.final_train_loss <= 0.05 && worst <= 0.0,
        detail: format!(
            "final train loss {:.5} (<= 0.05), worst Lipschitz excess {worst:.1e} over {checked} models (<= 0)",
            out.final_train_loss
        ),
    })
}

fn determinism(cfg: &ExperimentConfig) -> Result<Outcome> {
    let a = history_csv(&run_experiment(cfg)?.state.history);
    let b = history_csv(&run_experiment(cfg)?.state.history);
    Ok(Outcome {
        pass: a.as_bytes() == b.as_bytes(),
        detail: format!("history.csv {} bytes, identical: {}", a.len(), a == b),
    })
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let exp_cfg = ExperimentConfig::exp_spd();
    let mut ok = true;
    ok &= criterion(1, "gradient correctness", secs(10), gradient_correctness);
    ok &= criterion(2, "integrator order", secs(1), integrator_order);
    ok &= criterion(
        3,
        "fundamental theorem / conservativity",
        secs(1),
        conservativity,
    );
    ok &= criterion(
        4,
        "structural guarantees (untrained)",
        secs(30),
        structural_guarantees,
    );

    let mut trained = None;
    ok &= criterion(5, "invertible experiment (exp, spd)", secs(60), || {
        let (o, m) = invertible_experiment(&exp_cfg)?;
        trained = Some(m);
        Ok(o)
    });
    ok &= criterion(6, "inverse fidelity", secs(30), || {
        let m = trained
            .as_ref()
            .ok_or_else(|| JacError::InvalidArgument("criterion 5 produced no model".into()))?;
        inverse_fidelity(m)
    });
    ok &= criterion(
        7,
        "Lipschitz experiment (abs, scaled_tanh)",
        secs(60),
        lipschitz_experiment,
    );
    ok &= criterion(8, "determinism", secs(120), || determinism(&exp_cfg));

    if ok {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
