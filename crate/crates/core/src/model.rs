//! Prediction by integrating the learned Jacobian from an anchor point, and
//! the inverse map obtained by integrating the inverse Jacobian.

use crate::error::{check_dim, JacError, Result};
use crate::field::{Activation, JacobianField, JacobianFn};
use crate::integrate::{
    accumulate_grad_from_nodes, line_integrate, solve_ivp, IntegrationResult, IntegratorConfig,
    LinearPath,
};
use crate::linalg::Vector;

/// `ŷ(x) = y0 + ∫ Ĵ(r(t))·ṙ(t) dt` along the segment from `x0` to `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacNetModel {
    pub field: JacobianField,
    pub x0: Vector,
    pub y0: Vector,
    pub integrator: IntegratorConfig,
}

impl JacNetModel {
    pub fn new(
        field: JacobianField,
        x0: Vector,
        y0: Vector,
        integrator: IntegratorConfig,
    ) -> Result<Self> {
        check_dim("anchor x0", field.d_in(), x0.dim())?;
        check_dim("anchor y0", field.d_out(), y0.dim())?;
        integrator.validate()?;
        Ok(Self {
            field,
            x0,
            y0,
            integrator,
        })
    }

    pub fn with_integrator(&self, integrator: IntegratorConfig) -> Self {
        Self {
            integrator,
            ..self.clone()
        }
    }

    /// Prediction together with the quadrature record used to produce it.
    pub fn predict_traced(&self, x: &Vector) -> Result<(Vector, LinearPath, IntegrationResult)> {
        if !x.is_finite() {
            return Err(JacError::NonFinite("prediction input"));
        }
        let path = LinearPath::new(self.x0.clone(), x.clone())?;
        let res = line_integrate(&self.field, &path, &self.integrator)?;
        let y = self.y0.add(&res.value)?;
        Ok((y, path, res))
    }

    pub fn predict(&self, x: &Vector) -> Result<Vector> {
        Ok(self.predict_traced(x)?.0)
    }

    /// `∂⟨upstream, ŷ(x)⟩/∂θ`.
    pub fn predict_grad(&self, x: &Vector, upstream: &Vector) -> Result<Vector> {
        let (_, path, res) = self.predict_traced(x)?;
        let mut out = vec![0.0; self.field.param_count()];
        accumulate_grad_from_nodes(&self.field, &path, &res.nodes, upstream, 1.0, &mut out)?;
        Ok(Vector::from_vec_unchecked(out))
    }

    /// Preimage of `y`: integrates `x' = Ĵ(x)⁻¹·(y - y0)` from `x0`.
    pub fn invert(&self, y: &Vector) -> Result<Vector> {
        invert_with(&self.field, &self.x0, &self.y0, y, &self.integrator)
    }

    /// `max_x |invert(predict(x)) - x|∞` over the grid.
    pub fn round_trip_error(&self, xs: &[Vector]) -> Result<f64> {
        if !matches!(self.field.activation(), Activation::Spd { .. }) {
            return Err(JacError::InvalidArgument(
                "round trip requires an spd-activated field".into(),
            ));
        }
        let mut worst: f64 = 0.0;
        for x in xs {
            let back = self.invert(&self.predict(x)?)?;
            worst = worst.max(back.sub(x)?.norm_inf());
        }
        Ok(worst)
    }
}

/// [`JacNetModel::predict`] for an arbitrary Jacobian map.
pub fn predict_with<F: JacobianFn>(
    field: &F,
    x0: &Vector,
    y0: &Vector,
    x: &Vector,
    cfg: &IntegratorConfig,
) -> Result<Vector> {
    let path = LinearPath::new(x0.clone(), x.clone())?;
    y0.add(&line_integrate(field, &path, cfg)?.value)
}

/// [`JacNetModel::invert`] for an arbitrary square Jacobian map. The Jacobian
/// is evaluated at the running preimage `x(t)` while the output moves along
/// the straight segment from `y0` to `y`.
pub fn invert_with<F: JacobianFn>(
    field: &F,
    x0: &Vector,
    y0: &Vector,
    y: &Vector,
    cfg: &IntegratorConfig,
) -> Result<Vector> {
    if field.d_in() != field.d_out() {
        return Err(JacError::InvalidArgument(format!(
            "inverse needs a square Jacobian, got {}x{}",
            field.d_out(),
            field.d_in()
        )));
    }
    check_dim("anchor x0", field.d_in(), x0.dim())?;
    if !y.is_finite() {
        return Err(JacError::NonFinite("inverse input"));
    }
    let out_path = LinearPath::new(y0.clone(), y.clone())?;
    let velocity = out_path.velocity().clone();
    if velocity.norm_inf() == 0.0 {
        return Ok(x0.clone());
    }
    solve_ivp(|_, x| field.jacobian(x)?.lu_solve(&velocity), x0, cfg)
}

/// Corner of the two-segment axis-aligned path from `a` to `b`: the first
/// coordinate moves first, then the rest.
pub fn staircase_corner(a: &Vector, b: &Vector) -> Result<Vector> {
    check_dim("staircase endpoints", a.dim(), b.dim())?;
    let mut corner = a.as_slice().to_vec();
    corner[0] = b[0];
    Vector::new(corner)
}

/// Integral along `a → corner → b` (see [`staircase_corner`]).
pub fn staircase_integral<F: JacobianFn>(
    field: &F,
    a: &Vector,
    b: &Vector,
    cfg: &IntegratorConfig,
) -> Result<Vector> {
    let corner = staircase_corner(a, b)?;
    let first = line_integrate(field, &LinearPath::new(a.clone(), corner.clone())?, cfg)?;
    let second = line_integrate(field, &LinearPath::new(corner, b.clone())?, cfg)?;
    first.value.add(&second.value)
}

/// `|I_linear - I_staircase|∞`: how much the line integral between `a` and `b`
/// depends on the path. Near zero for gradient fields.
pub fn conservativity_diagnostic<F: JacobianFn>(
    field: &F,
    a: &Vector,
    b: &Vector,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    if a.dim() < 2 {
        return Err(JacError::InvalidArgument(
            "conservativity diagnostic needs at least 2 input dimensions".into(),
        ));
    }
    let linear = line_integrate(field, &LinearPath::new(a.clone(), b.clone())?, cfg)?;
    let stair = staircase_integral(field, a, b, cfg)?;
    Ok(linear.value.sub(&stair)?.norm_inf())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FnField;
    use crate::linalg::Matrix;
    use std::f64::consts::E;

    fn s(x: f64) -> Vector {
        Vector::scalar(x)
    }

    fn constant_model(
        c: f64,
        x0: f64,
        y0: f64,
        cfg: IntegratorConfig,
        act: Activation,
    ) -> JacNetModel {
        let f = JacobianField::zeros(1, 1, 4, act).unwrap();
        let mut flat = f.params_flat();
        *flat.last_mut().unwrap() = c;
        JacNetModel::new(f.with_params_flat(&flat).unwrap(), s(x0), s(y0), cfg).unwrap()
    }

    fn exp_field() -> FnField<impl Fn(&Vector) -> Matrix> {
        FnField::new(1, 1, |x: &Vector| {
            Matrix::from_vec_unchecked(1, 1, vec![x[0].exp()])
        })
    }

    #[test]
    fn predict_examples() {
        let f = JacobianField::init(1, 1, 16, Activation::Spd { epsilon: 1e-4 }, 8).unwrap();
        for cfg in [
            IntegratorConfig::rk4(16),
            IntegratorConfig::rk45(1e-6, 1e-6),
        ] {
            let m = JacNetModel::new(f.clone(), s(0.3), s(-1.25), cfg).unwrap();
            assert_eq!(m.predict(&s(0.3)).unwrap(), s(-1.25));
        }
        let m = constant_model(
            3.0,
            0.0,
            1.0,
            IntegratorConfig::rk4(4),
            Activation::Identity,
        );
        assert!((m.predict(&s(2.0)).unwrap()[0] - 7.0).abs() < 1e-12);

        let e = predict_with(
            &exp_field(),
            &s(0.0),
            &s(1.0),
            &s(1.0),
            &IntegratorConfig::rk4(64),
        )
        .unwrap();
        assert!((e[0] - E).abs() < 1e-8);
    }

    #[test]
    fn predict_grad_examples() {
        let f = JacobianField::init(1, 1, 16, Activation::Spd { epsilon: 1e-4 }, 8).unwrap();
        let m = JacNetModel::new(f, s(0.5), s(1.0), IntegratorConfig::rk4(8)).unwrap();
        assert!(m
            .predict_grad(&s(0.5), &s(1.0))
            .unwrap()
            .as_slice()
            .iter()
            .all(|&g| g == 0.0));
        assert!(m
            .predict_grad(&s(1.5), &s(0.0))
            .unwrap()
            .as_slice()
            .iter()
            .all(|&g| g == 0.0));
        assert!(m.predict_grad(&s(1.5), &s(1.0)).unwrap().norm_inf() > 0.0);
    }

    #[test]
    fn model_rejects_bad_anchor() {
        let f = JacobianField::zeros(1, 1, 4, Activation::Identity).unwrap();
        let two = Vector::from_slice(&[0.0, 0.0]).unwrap();
        assert!(
            JacNetModel::new(f.clone(), two.clone(), s(0.0), IntegratorConfig::rk4(4)).is_err()
        );
        assert!(JacNetModel::new(f, s(0.0), two, IntegratorConfig::rk4(4)).is_err());
    }

    #[test]
    fn invert_examples() {
        let f = JacobianField::init(1, 1, 16, Activation::Spd { epsilon: 1e-4 }, 1).unwrap();
        let m = JacNetModel::new(f, s(0.2), s(0.7), IntegratorConfig::rk45(1e-8, 1e-8)).unwrap();
        assert_eq!(m.invert(&s(0.7)).unwrap(), s(0.2));

        let m = constant_model(
            2.0,
            0.0,
            0.0,
            IntegratorConfig::rk4(4),
            Activation::Identity,
        );
        assert!((m.invert(&s(4.0)).unwrap()[0] - 2.0).abs() < 1e-12);

        let x = invert_with(
            &exp_field(),
            &s(0.0),
            &s(1.0),
            &s(E),
            &IntegratorConfig::rk45(1e-10, 1e-10),
        )
        .unwrap();
        assert!((x[0] - 1.0).abs() < 1e-6);
        let x = invert_with(
            &exp_field(),
            &s(0.0),
            &s(1.0),
            &s(E),
            &IntegratorConfig::rk4(200),
        )
        .unwrap();
        assert!((x[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn invert_singular_field_errors() {
        let zero = FnField::new(1, 1, |_: &Vector| Matrix::zeros(1, 1));
        let r = invert_with(&zero, &s(0.0), &s(0.0), &s(1.0), &IntegratorConfig::rk4(4));
        assert!(matches!(r, Err(JacError::Singular { .. })));
        let rect = FnField::new(2, 1, |_: &Vector| Matrix::zeros(1, 2));
        let x0 = Vector::zeros(2);
        assert!(invert_with(&rect, &x0, &s(0.0), &s(1.0), &IntegratorConfig::rk4(4)).is_err());
    }

    #[test]
    fn round_trip_examples() {
        let f = JacobianField::init(1, 1, 16, Activation::Spd { epsilon: 1e-4 }, 6).unwrap();
        let m = JacNetModel::new(f, s(0.0), s(1.0), IntegratorConfig::rk45(1e-8, 1e-8)).unwrap();
        assert!(m.round_trip_error(&[s(0.0)]).unwrap() <= 1e-12);

        let spd = Activation::Spd { epsilon: 1e-4 };
        // raw bias b with spd gives constant slope b² + ε
        let m = constant_model(2f64.sqrt(), 0.0, 0.0, IntegratorConfig::rk4(8), spd);
        let grid = [s(-1.0), s(0.0), s(1.0)];
        assert!(m.round_trip_error(&grid).unwrap() <= 1e-9);

        let m = constant_model(
            2.0,
            0.0,
            0.0,
            IntegratorConfig::rk4(8),
            Activation::Identity,
        );
        assert!(m.round_trip_error(&grid).is_err());
    }

    #[test]
    fn diagnostic_examples() {
        let cfg = IntegratorConfig::rk4(32);
        let a = Vector::zeros(2);
        let b = Vector::from_slice(&[1.0, 1.0]).unwrap();
        let grad = FnField::new(2, 1, |x: &Vector| {
            Matrix::from_vec_unchecked(1, 2, vec![2.0 * x[0], 2.0 * x[1]])
        });
        assert!(conservativity_diagnostic(&grad, &a, &b, &cfg).unwrap() <= 1e-8);

        let rot = FnField::new(2, 1, |x: &Vector| {
            Matrix::from_vec_unchecked(1, 2, vec![-x[1], x[0]])
        });
        let d = conservativity_diagnostic(&rot, &a, &b, &cfg).unwrap();
        assert!((d - 1.0).abs() < 1e-6);

        let zero = FnField::new(2, 2, |_: &Vector| Matrix::zeros(2, 2));
        assert_eq!(conservativity_diagnostic(&zero, &a, &b, &cfg).unwrap(), 0.0);

        let one_d = FnField::new(1, 1, |_: &Vector| Matrix::zeros(1, 1));
        assert!(conservativity_diagnostic(&one_d, &s(0.0), &s(1.0), &cfg).is_err());
    }

    #[test]
    fn staircase_corner_moves_first_coordinate() {
        let a = Vector::from_slice(&[1.0, 2.0, 3.0]).unwrap();
        let b = Vector::from_slice(&[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(
            staircase_corner(&a, &b).unwrap().as_slice(),
            &[4.0, 2.0, 3.0]
        );
    }
}
