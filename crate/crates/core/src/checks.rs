//! Finite-difference gradient checks and reference conservativity checks.
//!
//! The finite-difference side only ever calls forward evaluations
//! (`eval`, `line_integrate`, `empirical_risk`), never the reverse-mode code
//! it is checking.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::field::{Activation, FnField, JacobianField};
use crate::integrate::{line_integrate, line_integrate_grad, IntegratorConfig, LinearPath};
use crate::linalg::{Matrix, Vector};
use crate::model::{conservativity_diagnostic, JacNetModel};
use crate::train::{empirical_risk, empirical_risk_and_grad, Dataset};

/// Step used by the central differences.
pub const FD_STEP: f64 = 1e-5;

/// Central differences of `f` at `theta`.
pub fn central_difference<F>(mut f: F, theta: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut probe = theta.to_vec();
    let mut out = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = f(&probe)?;
        probe[i] = orig - h;
        let down = f(&probe)?;
        probe[i] = orig;
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

/// `max_i |a_i - n_i| / max(‖a‖∞, ‖n‖∞)`; zero when both vectors vanish.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = analytic
        .iter()
        .chain(numeric)
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    analytic
        .iter()
        .zip(numeric)
        .fold(0.0f64, |acc, (a, n)| acc.max((a - n).abs()))
        / scale
}

/// The four activation kinds with their checking dimensions `(d_in, d_out)`.
pub fn activation_cases() -> [(Activation, usize, usize); 4] {
    [
        (Activation::Identity, 2, 3),
        (Activation::Spd { epsilon: 1e-4 }, 2, 2),
        (Activation::ScaledTanh { k: 1.0 }, 2, 2),
        (Activation::CauchyRiemann, 2, 2),
    ]
}

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lim: f64) -> Vector {
    Vector::from_vec_unchecked((0..n).map(|_| rng.gen_range(-lim..lim)).collect())
}

/// Field with every parameter (biases included) drawn at random.
pub fn random_field(
    act: Activation,
    d_in: usize,
    d_out: usize,
    hidden: usize,
    rng: &mut ChaCha8Rng,
) -> Result<JacobianField> {
    let f = JacobianField::init(d_in, d_out, hidden, act, rng.gen())?;
    let flat: Vec<f64> = f
        .params_flat()
        .iter()
        .map(|p| p + rng.gen_range(-0.5..0.5))
        .collect();
    f.with_params_flat(&flat)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteReport {
    pub activation: &'static str,
    pub instances: usize,
    pub max_rel_err: f64,
}

/// Checks [`JacobianField::param_grad`] against central differences of
/// `⟨U, Ĵ(x)⟩`.
pub fn field_grad_suite(
    act: Activation,
    d_in: usize,
    d_out: usize,
    instances: usize,
    seed: u64,
) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let field = random_field(act, d_in, d_out, 6, &mut rng)?;
        let x = uniform_vec(&mut rng, d_in, 1.5);
        let u = Matrix::from_vec_unchecked(
            d_out,
            d_in,
            uniform_vec(&mut rng, d_out * d_in, 1.0).into_vec(),
        );
        let analytic = field.param_grad(&x, &u)?;
        let numeric = central_difference(
            |theta| field.with_params_flat(theta)?.eval(&x)?.frobenius_dot(&u),
            &field.params_flat(),
            FD_STEP,
        )?;
        worst = worst.max(relative_error(analytic.as_slice(), &numeric));
    }
    Ok(SuiteReport {
        activation: act.name(),
        instances,
        max_rel_err: worst,
    })
}

/// Checks [`line_integrate_grad`] against central differences of the
/// integrated value.
pub fn integral_grad_suite(
    act: Activation,
    d_in: usize,
    d_out: usize,
    instances: usize,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let field = random_field(act, d_in, d_out, 6, &mut rng)?;
        let path = LinearPath::new(
            uniform_vec(&mut rng, d_in, 1.0),
            uniform_vec(&mut rng, d_in, 1.0),
        )?;
        let u = uniform_vec(&mut rng, d_out, 1.0);
        let analytic = line_integrate_grad(&field, &path, cfg, &u)?;
        let numeric = central_difference(
            |theta| {
                let f = field.with_params_flat(theta)?;
                line_integrate(&f, &path, cfg)?.value.dot(&u)
            },
            &field.params_flat(),
            FD_STEP,
        )?;
        worst = worst.max(relative_error(analytic.as_slice(), &numeric));
    }
    Ok(SuiteReport {
        activation: act.name(),
        instances,
        max_rel_err: worst,
    })
}

/// Checks the empirical-risk subgradient on random 1-D models and datasets,
/// skipping instances with a residual closer than `1e-6` to the L1 kink.
/// Activations that need square or 2×2 Jacobians are checked in 2-D.
pub fn risk_grad_suite(
    act: Activation,
    instances: usize,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = if matches!(act, Activation::CauchyRiemann) {
        2
    } else {
        1
    };
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for _ in 0..instances {
        let field = random_field(act, dim, dim, 6, &mut rng)?;
        let model = JacNetModel::new(
            field,
            uniform_vec(&mut rng, dim, 0.5),
            uniform_vec(&mut rng, dim, 1.0),
            *cfg,
        )?;
        let pairs = (0..4)
            .map(|_| {
                (
                    uniform_vec(&mut rng, dim, 1.0),
                    uniform_vec(&mut rng, dim, 2.0),
                )
            })
            .collect();
        let data = Dataset::from_pairs(pairs)?;
        let near_kink = data.pairs.iter().try_fold(false, |acc, (x, y)| {
            let r = y.sub(&model.predict(x)?)?;
            Ok::<_, crate::error::JacError>(acc || r.as_slice().iter().any(|v| v.abs() < 1e-6))
        })?;
        if near_kink {
            continue;
        }
        let (_, analytic, _) = empirical_risk_and_grad(&model, &data)?;
        let numeric = central_difference(
            |theta| {
                let mut m = model.clone();
                m.field.set_params_flat(theta)?;
                empirical_risk(&m, &data)
            },
            &model.field.params_flat(),
            FD_STEP,
        )?;
        worst = worst.max(relative_error(analytic.as_slice(), &numeric));
        checked += 1;
    }
    Ok(SuiteReport {
        activation: act.name(),
        instances: checked,
        max_rel_err: worst,
    })
}

/// Path dependence of `∇φ` with `φ(x) = |x|²` between `(0,0)` and `(1,1)`.
pub fn gradient_field_discrepancy(cfg: &IntegratorConfig) -> Result<f64> {
    let field = FnField::new(2, 1, |x: &Vector| {
        Matrix::from_vec_unchecked(1, 2, vec![2.0 * x[0], 2.0 * x[1]])
    });
    conservativity_diagnostic(
        &field,
        &Vector::zeros(2),
        &Vector::from_slice(&[1.0, 1.0])?,
        cfg,
    )
}

/// Path dependence of the rotational field with integrand `(-r_y, r_x)·ṙ`
/// between `(0,0)` and `(1,1)`. The straight path gives 0 and the staircase
/// gives 1.
pub fn rotational_field_discrepancy(cfg: &IntegratorConfig) -> Result<f64> {
    let field = FnField::new(2, 1, |x: &Vector| {
        Matrix::from_vec_unchecked(1, 2, vec![-x[1], x[0]])
    });
    conservativity_diagnostic(
        &field,
        &Vector::zeros(2),
        &Vector::from_slice(&[1.0, 1.0])?,
        cfg,
    )
}
