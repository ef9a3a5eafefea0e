//! Line integrals of a Jacobian field along paths, and the initial value
//! problems behind inverse evaluation.
//!
//! A line integral `∫₀¹ J(r(t))·ṙ(t) dt` has an integrand that depends on `t`
//! only, so every scheme reduces to a weighted sum over quadrature nodes. The
//! nodes and weights are recorded in [`IntegrationResult`] and replayed by
//! [`grad_from_nodes`] to differentiate the discretized integral exactly.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, JacError, Result};
use crate::field::{JacobianField, JacobianFn};
use crate::linalg::{Matrix, Vector};

/// Straight segment `r(t) = (1 - t)·a + t·b`, `ṙ = b - a`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPath {
    a: Vector,
    b: Vector,
    velocity: Vector,
}

impl LinearPath {
    pub fn new(a: Vector, b: Vector) -> Result<Self> {
        check_dim("path endpoints", a.dim(), b.dim())?;
        let velocity = b.sub(&a)?;
        Ok(Self { a, b, velocity })
    }

    pub fn start(&self) -> &Vector {
        &self.a
    }

    pub fn end(&self) -> &Vector {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn velocity(&self) -> &Vector {
        &self.velocity
    }

    /// Point and velocity at `t ∈ [0, 1]`.
    pub fn eval(&self, t: f64) -> Result<(Vector, Vector)> {
        if !(0.0..=1.0).contains(&t) {
            return Err(JacError::InvalidArgument(format!(
                "path parameter {t} outside [0, 1]"
            )));
        }
        Ok((self.point(t), self.velocity.clone()))
    }

    fn point(&self, t: f64) -> Vector {
        let s = 1.0 - t;
        Vector::from_vec_unchecked(
            self.a
                .as_slice()
                .iter()
                .zip(self.b.as_slice())
                .map(|(a, b)| s * a + t * b)
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Classic RK4 with `steps` uniform steps.
    Rk4Fixed,
    /// Dormand–Prince 5(4) with error control.
    Rk45Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_tol")]
    pub rtol: f64,
    #[serde(default = "default_tol")]
    pub atol: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

fn default_steps() -> usize {
    64
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_steps() -> usize {
    10_000
}

impl IntegratorConfig {
    pub fn rk4(steps: usize) -> Self {
        Self {
            scheme: Scheme::Rk4Fixed,
            steps,
            rtol: default_tol(),
            atol: default_tol(),
            max_steps: default_max_steps(),
        }
    }

    pub fn rk45(rtol: f64, atol: f64) -> Self {
        Self {
            scheme: Scheme::Rk45Adaptive,
            steps: default_steps(),
            rtol,
            atol,
            max_steps: default_max_steps(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.max_steps == 0 {
            return Err(JacError::InvalidArgument(
                "integrator steps and max_steps must be at least 1".into(),
            ));
        }
        if !(self.rtol > 0.0 && self.atol > 0.0 && self.rtol.is_finite() && self.atol.is_finite()) {
            return Err(JacError::InvalidArgument(
                "integrator tolerances must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Same scheme driven by a single tolerance knob: adaptive schemes use it
    /// as both `rtol` and `atol`; the fixed scheme takes `ceil(tol^(-1/4))`
    /// steps, matching its O(h⁴) error.
    pub fn at_tolerance(&self, tol: f64) -> Self {
        let mut out = *self;
        match self.scheme {
            Scheme::Rk45Adaptive => {
                out.rtol = tol;
                out.atol = tol;
            }
            Scheme::Rk4Fixed => out.steps = steps_for_tolerance(tol),
        }
        out
    }

    /// Rough size of the error this configuration aims for.
    pub fn nominal_tolerance(&self) -> f64 {
        match self.scheme {
            Scheme::Rk45Adaptive => self.atol.max(self.rtol),
            Scheme::Rk4Fixed => (self.steps as f64).powi(-4),
        }
    }
}

pub fn steps_for_tolerance(tol: f64) -> usize {
    ((1.0 / tol.powf(0.25)).ceil() as usize).max(1)
}

/// One quadrature node: the integral is `Σ weight · J(r(t))·ṙ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadNode {
    pub t: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationResult {
    pub value: Vector,
    pub nodes: Vec<QuadNode>,
    /// Number of field evaluations spent.
    pub evals: usize,
}

// Dormand–Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
/// Fifth-order minus embedded fourth-order weights.
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
const MIN_STEP: f64 = 1e-14;

/// Adaptive Dormand–Prince over `t ∈ [0, 1]`. `on_accept(t, h)` is called for
/// every accepted step before `t` advances. Returns the final state and the
/// number of right-hand-side evaluations.
fn dopri<F, A>(
    mut f: F,
    y0: &[f64],
    cfg: &IntegratorConfig,
    mut on_accept: A,
) -> Result<(Vec<f64>, usize)>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
    A: FnMut(f64, f64),
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = 0.0;
    let mut h = cfg.rtol.max(cfg.atol).powf(0.2).min(1.0);
    let mut k: Vec<Vec<f64>> = vec![Vec::new(); 7];
    k[0] = f(t, &y)?;
    let mut evals = 1;
    let mut attempts = 0;
    let mut last_err = f64::INFINITY;
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];

    while t < 1.0 {
        if attempts >= cfg.max_steps || h < MIN_STEP {
            return Err(JacError::NonConvergence {
                best: y,
                t_reached: t,
                error_estimate: last_err,
                steps: attempts,
            });
        }
        attempts += 1;
        let last = t + h >= 1.0;
        if last {
            h = 1.0 - t;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, a) in DP_A[s][..s].iter().enumerate() {
                    acc += a * k[j][i];
                }
                stage[i] = y[i] + h * acc;
            }
            if s == 6 {
                y_new.copy_from_slice(&stage);
            }
            k[s] = f(t + DP_C[s] * h, &stage)?;
            evals += 1;
        }
        let mut err: f64 = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (j, w) in DP_E.iter().enumerate() {
                e += w * k[j][i];
            }
            let scale = cfg.atol + cfg.rtol * y[i].abs().max(y_new[i].abs());
            err = err.max((h * e).abs() / scale);
        }
        if !err.is_finite() {
            return Err(JacError::NonFinite("integrator state"));
        }
        last_err = err;
        if err <= 1.0 {
            on_accept(t, h);
            t = if last { 1.0 } else { t + h };
            std::mem::swap(&mut y, &mut y_new);
            k.swap(0, 6);
            let factor = if err == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            h *= factor;
        } else {
            h *= (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
        }
    }
    Ok((y, evals))
}

/// Fixed-step RK4 nodes on `[0, 1]`. The integrand is `t`-only, so the two
/// midpoint stages coincide and neighbouring steps share endpoints.
fn rk4_nodes(steps: usize) -> Vec<QuadNode> {
    let h = 1.0 / steps as f64;
    let mut nodes = Vec::with_capacity(2 * steps + 1);
    nodes.push(QuadNode {
        t: 0.0,
        weight: h / 6.0,
    });
    for i in 0..steps {
        let t0 = i as f64 * h;
        nodes.push(QuadNode {
            t: t0 + 0.5 * h,
            weight: 4.0 * h / 6.0,
        });
        let end = i + 1 == steps;
        nodes.push(QuadNode {
            t: if end { 1.0 } else { (i + 1) as f64 * h },
            weight: if end { h / 6.0 } else { 2.0 * h / 6.0 },
        });
    }
    nodes
}

fn integrand<F: JacobianFn>(field: &F, path: &LinearPath, t: f64) -> Result<Vec<f64>> {
    let j = field.jacobian(&path.point(t))?;
    check_dim("field output rows", field.d_out(), j.rows())?;
    Ok(j.matvec(path.velocity())?.into_vec())
}

/// Sums `weight · J(r(t))·ṙ` over the given nodes, in order.
pub fn replay_nodes<F: JacobianFn>(
    field: &F,
    path: &LinearPath,
    nodes: &[QuadNode],
) -> Result<Vector> {
    let mut acc = vec![0.0; field.d_out()];
    for node in nodes {
        let g = integrand(field, path, node.t)?;
        for (a, gi) in acc.iter_mut().zip(&g) {
            *a += node.weight * gi;
        }
    }
    Ok(Vector::from_vec_unchecked(acc))
}

/// `∫₀¹ J(r(t))·ṙ(t) dt` along `path`.
pub fn line_integrate<F: JacobianFn>(
    field: &F,
    path: &LinearPath,
    cfg: &IntegratorConfig,
) -> Result<IntegrationResult> {
    cfg.validate()?;
    check_dim("path dimension", field.d_in(), path.dim())?;
    match cfg.scheme {
        Scheme::Rk4Fixed => {
            let nodes = rk4_nodes(cfg.steps);
            let value = replay_nodes(field, path, &nodes)?;
            Ok(IntegrationResult {
                value,
                evals: nodes.len(),
                nodes,
            })
        }
        Scheme::Rk45Adaptive => {
            let mut nodes = Vec::new();
            let y0 = vec![0.0; field.d_out()];
            let (value, evals) = dopri(
                |t, _| integrand(field, path, t),
                &y0,
                cfg,
                |t, h| {
                    for (c, b) in DP_C.iter().zip(DP_B) {
                        if b != 0.0 {
                            nodes.push(QuadNode {
                                t: (t + c * h).min(1.0),
                                weight: h * b,
                            });
                        }
                    }
                },
            )?;
            Ok(IntegrationResult {
                value: Vector::from_vec_unchecked(value),
                nodes,
                evals,
            })
        }
    }
}

/// Parameter gradient of `⟨upstream, Σ wᵢ Ĵ(r(tᵢ))·ṙ⟩` with the nodes held
/// fixed.
pub fn grad_from_nodes(
    field: &JacobianField,
    path: &LinearPath,
    nodes: &[QuadNode],
    upstream: &Vector,
) -> Result<Vector> {
    let mut out = vec![0.0; field.param_count()];
    accumulate_grad_from_nodes(field, path, nodes, upstream, 1.0, &mut out)?;
    Ok(Vector::from_vec_unchecked(out))
}

pub(crate) fn accumulate_grad_from_nodes(
    field: &JacobianField,
    path: &LinearPath,
    nodes: &[QuadNode],
    upstream: &Vector,
    scale: f64,
    out: &mut [f64],
) -> Result<()> {
    check_dim("upstream", field.d_out(), upstream.dim())?;
    check_dim("path dimension", field.d_in(), path.dim())?;
    let outer = Matrix::outer(upstream, path.velocity());
    if outer.max_abs() == 0.0 {
        return Ok(());
    }
    for node in nodes {
        let u = outer.scale(scale * node.weight);
        field.accumulate_param_grad(&path.point(node.t), &u, out)?;
    }
    Ok(())
}

/// Gradient of `⟨upstream, line_integrate(field, path, cfg).value⟩` with
/// respect to the field parameters (discretize, then differentiate).
pub fn line_integrate_grad(
    field: &JacobianField,
    path: &LinearPath,
    cfg: &IntegratorConfig,
    upstream: &Vector,
) -> Result<Vector> {
    let result = line_integrate(field, path, cfg)?;
    grad_from_nodes(field, path, &result.nodes, upstream)
}

/// Solves `state' = rhs(t, state)` from `state(0) = state0` and returns
/// `state(1)`.
pub fn solve_ivp<F>(mut rhs: F, state0: &Vector, cfg: &IntegratorConfig) -> Result<Vector>
where
    F: FnMut(f64, &Vector) -> Result<Vector>,
{
    cfg.validate()?;
    let n = state0.dim();
    let mut call = |t: f64, y: &[f64]| -> Result<Vec<f64>> {
        let out = rhs(t, &Vector::from_vec_unchecked(y.to_vec()))?;
        check_dim("ivp rhs", n, out.dim())?;
        Ok(out.into_vec())
    };
    match cfg.scheme {
        Scheme::Rk4Fixed => {
            let h = 1.0 / cfg.steps as f64;
            let mut y = state0.as_slice().to_vec();
            let mut tmp = vec![0.0; n];
            for i in 0..cfg.steps {
                let t = i as f64 * h;
                let k1 = call(t, &y)?;
                for j in 0..n {
                    tmp[j] = y[j] + 0.5 * h * k1[j];
                }
                let k2 = call(t + 0.5 * h, &tmp)?;
                for j in 0..n {
                    tmp[j] = y[j] + 0.5 * h * k2[j];
                }
                let k3 = call(t + 0.5 * h, &tmp)?;
                for j in 0..n {
                    tmp[j] = y[j] + h * k3[j];
                }
                let k4 = call(t + h, &tmp)?;
                for j in 0..n {
                    y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
                }
            }
            Ok(Vector::from_vec_unchecked(y))
        }
        Scheme::Rk45Adaptive => {
            let (y, _) = dopri(call, state0.as_slice(), cfg, |_, _| {})?;
            Ok(Vector::from_vec_unchecked(y))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Activation, FnField};

    fn v(data: &[f64]) -> Vector {
        Vector::from_slice(data).unwrap()
    }

    fn exp_field() -> FnField<impl Fn(&Vector) -> Matrix> {
        FnField::new(1, 1, |x: &Vector| {
            Matrix::from_vec_unchecked(1, 1, vec![x[0].exp()])
        })
    }

    #[test]
    fn path_examples() {
        let p = LinearPath::new(v(&[1.0, -2.0]), v(&[0.3, 5.0])).unwrap();
        let (r0, d0) = p.eval(0.0).unwrap();
        assert_eq!(r0, v(&[1.0, -2.0]));
        assert_eq!(d0, v(&[0.3 - 1.0, 7.0]));
        let (r1, d1) = p.eval(1.0).unwrap();
        assert_eq!(r1, v(&[0.3, 5.0]));
        assert_eq!(d1, d0);

        let p = LinearPath::new(v(&[0.0]), v(&[2.0])).unwrap();
        assert_eq!(p.eval(0.5).unwrap(), (v(&[1.0]), v(&[2.0])));
    }

    #[test]
    fn path_errors() {
        let p = LinearPath::new(v(&[0.0]), v(&[2.0])).unwrap();
        assert!(p.eval(-0.1).is_err());
        assert!(p.eval(1.0 + 1e-12).is_err());
        assert!(LinearPath::new(v(&[0.0]), v(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn zero_and_constant_fields() {
        let zero = FnField::new(2, 3, |_: &Vector| Matrix::zeros(3, 2));
        let c = Matrix::from_rows(&[vec![1.0, 2.0], vec![-3.0, 0.5], vec![0.25, 4.0]]).unwrap();
        let cf = FnField::new(2, 3, |_: &Vector| c.clone());
        let path = LinearPath::new(v(&[0.1, 0.2]), v(&[-1.3, 2.9])).unwrap();
        let expect = c.matvec(path.velocity()).unwrap();
        for cfg in [IntegratorConfig::rk4(7), IntegratorConfig::rk45(1e-6, 1e-9)] {
            let z = line_integrate(&zero, &path, &cfg).unwrap();
            assert!(z.value.as_slice().iter().all(|&x| x == 0.0));
            assert!(z.evals >= 1);
            let r = line_integrate(&cf, &path, &cfg).unwrap();
            for (a, b) in r.value.as_slice().iter().zip(expect.as_slice()) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn cubic_exact_under_rk4() {
        // F(x) = 4x³ integrates to x⁴; Simpson is exact for cubics.
        let f = FnField::new(1, 1, |x: &Vector| {
            Matrix::from_vec_unchecked(1, 1, vec![4.0 * x[0].powi(3)])
        });
        let path = LinearPath::new(v(&[-0.5]), v(&[1.5])).unwrap();
        let r = line_integrate(&f, &path, &IntegratorConfig::rk4(3)).unwrap();
        assert!((r.value[0] - (1.5f64.powi(4) - 0.5f64.powi(4))).abs() < 1e-12);
    }

    #[test]
    fn exp_integral_rk4() {
        let path = LinearPath::new(v(&[0.0]), v(&[1.0])).unwrap();
        let r = line_integrate(&exp_field(), &path, &IntegratorConfig::rk4(64)).unwrap();
        assert!((r.value[0] - (std::f64::consts::E - 1.0)).abs() < 1e-9);
        assert_eq!(r.evals, 129);
    }

    #[test]
    fn rk4_replay_is_bit_exact() {
        let f = JacobianField::init(2, 2, 8, Activation::Spd { epsilon: 1e-4 }, 5).unwrap();
        let path = LinearPath::new(v(&[0.2, -0.7]), v(&[1.1, 0.4])).unwrap();
        let r = line_integrate(&f, &path, &IntegratorConfig::rk4(9)).unwrap();
        let again = replay_nodes(&f, &path, &r.nodes).unwrap();
        assert_eq!(r.value, again);
    }

    #[test]
    fn rk45_replay_matches_value() {
        let f = JacobianField::init(1, 1, 8, Activation::Identity, 2).unwrap();
        let path = LinearPath::new(v(&[-1.0]), v(&[2.0])).unwrap();
        let r = line_integrate(&f, &path, &IntegratorConfig::rk45(1e-9, 1e-9)).unwrap();
        let again = replay_nodes(&f, &path, &r.nodes).unwrap();
        assert!((r.value[0] - again[0]).abs() < 1e-13);
        let w: f64 = r.nodes.iter().map(|n| n.weight).sum();
        assert!((w - 1.0).abs() < 1e-13);
    }

    #[test]
    fn rk45_reports_non_convergence() {
        let mut cfg = IntegratorConfig::rk45(1e-12, 1e-12);
        cfg.max_steps = 2;
        let path = LinearPath::new(v(&[0.0]), v(&[3.0])).unwrap();
        match line_integrate(&exp_field(), &path, &cfg) {
            Err(JacError::NonConvergence {
                best,
                t_reached,
                error_estimate,
                steps,
            }) => {
                assert_eq!(best.len(), 1);
                assert!(t_reached < 1.0);
                assert!(error_estimate.is_finite());
                assert_eq!(steps, 2);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let path = LinearPath::new(v(&[0.0]), v(&[1.0])).unwrap();
        assert!(line_integrate(&exp_field(), &path, &IntegratorConfig::rk4(0)).is_err());
        assert!(line_integrate(&exp_field(), &path, &IntegratorConfig::rk45(0.0, 1e-6)).is_err());
        let p2 = LinearPath::new(v(&[0.0, 0.0]), v(&[1.0, 1.0])).unwrap();
        assert!(line_integrate(&exp_field(), &p2, &IntegratorConfig::rk4(4)).is_err());
    }

    #[test]
    fn grad_examples() {
        let f = JacobianField::init(1, 1, 6, Activation::Spd { epsilon: 1e-4 }, 4).unwrap();
        let path = LinearPath::new(v(&[-0.3]), v(&[0.8])).unwrap();
        let g = line_integrate_grad(&f, &path, &IntegratorConfig::rk4(8), &v(&[0.0])).unwrap();
        assert!(g.as_slice().iter().all(|&x| x == 0.0));

        // constant identity-activated field: integral = b2 · (b - a)
        let f = JacobianField::zeros(1, 1, 6, Activation::Identity).unwrap();
        let mut flat = f.params_flat();
        *flat.last_mut().unwrap() = 1.7;
        let f = f.with_params_flat(&flat).unwrap();
        let u = 0.6;
        let g = line_integrate_grad(&f, &path, &IntegratorConfig::rk4(5), &v(&[u])).unwrap();
        let (last, _) = g.as_slice().split_last().unwrap();
        assert!((last - u * 1.1).abs() < 1e-14);
    }

    #[test]
    fn solve_ivp_examples() {
        let s0 = v(&[1.5, -2.0]);
        for cfg in [
            IntegratorConfig::rk4(10),
            IntegratorConfig::rk45(1e-8, 1e-8),
        ] {
            let out = solve_ivp(|_, _| Ok(Vector::zeros(2)), &s0, &cfg).unwrap();
            assert_eq!(out, s0);
            let c = v(&[0.25, 3.0]);
            let out = solve_ivp(|_, _| Ok(c.clone()), &s0, &cfg).unwrap();
            let expect = s0.add(&c).unwrap();
            for (a, b) in out.as_slice().iter().zip(expect.as_slice()) {
                assert!((a - b).abs() < 1e-13);
            }
        }
        let e = solve_ivp(|_, x| Ok(x.clone()), &v(&[1.0]), &IntegratorConfig::rk4(64)).unwrap();
        assert!((e[0] - std::f64::consts::E).abs() < 1e-8);
        let e = solve_ivp(
            |_, x| Ok(x.clone()),
            &v(&[1.0]),
            &IntegratorConfig::rk45(1e-10, 1e-10),
        )
        .unwrap();
        assert!((e[0] - std::f64::consts::E).abs() < 1e-8);
    }

    #[test]
    fn solve_ivp_rejects_wrong_rhs_dim() {
        let r = solve_ivp(
            |_, _| Ok(Vector::zeros(3)),
            &v(&[1.0]),
            &IntegratorConfig::rk4(2),
        );
        assert!(r.is_err());
    }

    #[test]
    fn tolerance_knob() {
        assert_eq!(steps_for_tolerance(1e-8), 100);
        assert_eq!(steps_for_tolerance(0.1), 2);
        assert_eq!(steps_for_tolerance(1.0), 1);
        let c = IntegratorConfig::rk45(1e-3, 1e-3).at_tolerance(0.05);
        assert_eq!((c.rtol, c.atol), (0.05, 0.05));
        assert_eq!(IntegratorConfig::rk4(3).at_tolerance(1e-4).steps, 10);
    }

    #[test]
    fn config_json_defaults() {
        let c: IntegratorConfig =
            serde_json::from_str(r#"{"scheme":"rk45_adaptive","rtol":1e-6}"#).unwrap();
        assert_eq!(c.scheme, Scheme::Rk45Adaptive);
        assert_eq!(c.rtol, 1e-6);
        assert_eq!(c.atol, 1e-8);
        assert!(
            serde_json::from_str::<IntegratorConfig>(r#"{"scheme":"rk4_fixed","bogus":1}"#)
                .is_err()
        );
    }
}
