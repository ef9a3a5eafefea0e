//! The learned Jacobian field: a one-hidden-layer tanh MLP whose flat output
//! is reshaped into a `d_out × d_in` matrix and passed through a structured
//! output activation.
//!
//! The activation decides what the integrated function is guaranteed to be:
//!
//! * [`Activation::Spd`]: `R Rᵀ + εI`, symmetric with eigenvalues `≥ ε`, so the
//!   Jacobian determinant never vanishes (invertible function).
//! * [`Activation::ScaledTanh`]: `k·tanh(R)` elementwise, every partial
//!   derivative in `(-k, k)` (k-Lipschitz in one dimension).
//! * [`Activation::CauchyRiemann`]: `[[a, -b], [b, a]]`, the Jacobian of a
//!   complex-differentiable map of the plane.
//!
//! Parameter gradients are computed by hand-written reverse mode. The flat
//! parameter layout is `w1` row-major, `b1`, `w2` row-major, `b2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, JacError, Result};
use crate::linalg::{Matrix, Vector};

/// Output activation applied to the raw network matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Activation {
    Identity,
    Spd { epsilon: f64 },
    ScaledTanh { k: f64 },
    CauchyRiemann,
}

impl Activation {
    pub fn name(&self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Spd { .. } => "spd",
            Activation::ScaledTanh { .. } => "scaled_tanh",
            Activation::CauchyRiemann => "cauchy_riemann",
        }
    }

    /// Checks the scalar knobs and the shape constraints for a field with the
    /// given dimensions.
    pub fn validate(&self, d_in: usize, d_out: usize) -> Result<()> {
        match *self {
            Activation::Identity => Ok(()),
            Activation::Spd { epsilon } => {
                if !(epsilon > 0.0 && epsilon.is_finite()) {
                    return Err(JacError::InvalidArgument(format!(
                        "spd epsilon must be positive, got {epsilon}"
                    )));
                }
                if d_in != d_out {
                    return Err(JacError::InvalidArgument(format!(
                        "spd activation needs a square Jacobian, got {d_out}x{d_in}"
                    )));
                }
                Ok(())
            }
            Activation::ScaledTanh { k } => {
                if !(k > 0.0 && k.is_finite()) {
                    return Err(JacError::InvalidArgument(format!(
                        "scaled_tanh k must be positive, got {k}"
                    )));
                }
                Ok(())
            }
            Activation::CauchyRiemann => {
                if d_in != 2 || d_out != 2 {
                    return Err(JacError::InvalidArgument(format!(
                        "cauchy_riemann activation needs a 2x2 Jacobian, got {d_out}x{d_in}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Maps a raw network matrix to the structured Jacobian.
    pub fn apply(&self, raw: &Matrix) -> Result<Matrix> {
        match *self {
            Activation::Identity => Ok(raw.clone()),
            Activation::Spd { epsilon } => {
                if !raw.is_square() {
                    return Err(JacError::InvalidArgument(format!(
                        "spd activation on non-square {}x{} matrix",
                        raw.rows(),
                        raw.cols()
                    )));
                }
                let n = raw.rows();
                let mut out = Matrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        let s: f64 = raw.row(i).iter().zip(raw.row(j)).map(|(a, b)| a * b).sum();
                        out.set(i, j, if i == j { s + epsilon } else { s });
                    }
                }
                Ok(out)
            }
            Activation::ScaledTanh { k } => {
                let data = raw.as_slice().iter().map(|r| k * r.tanh()).collect();
                Ok(Matrix::from_vec_unchecked(raw.rows(), raw.cols(), data))
            }
            Activation::CauchyRiemann => {
                if raw.rows() != 2 || raw.cols() != 2 {
                    return Err(JacError::InvalidArgument(format!(
                        "cauchy_riemann activation on {}x{} matrix",
                        raw.rows(),
                        raw.cols()
                    )));
                }
                let a = raw.get(0, 0);
                let b = raw.get(1, 0);
                Ok(Matrix::from_vec_unchecked(2, 2, vec![a, -b, b, a]))
            }
        }
    }

    /// Pulls an upstream gradient `∂L/∂J` back to `∂L/∂raw`.
    fn backward(&self, raw: &Matrix, upstream: &Matrix) -> Matrix {
        match *self {
            Activation::Identity => upstream.clone(),
            Activation::Spd { .. } => {
                // J = R Rᵀ + εI  =>  ∂L/∂R = (U + Uᵀ) R
                let n = raw.rows();
                let mut out = Matrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        let mut s = 0.0;
                        for m in 0..n {
                            s += (upstream.get(i, m) + upstream.get(m, i)) * raw.get(m, j);
                        }
                        out.set(i, j, s);
                    }
                }
                out
            }
            Activation::ScaledTanh { k } => {
                let data = raw
                    .as_slice()
                    .iter()
                    .zip(upstream.as_slice())
                    .map(|(r, u)| {
                        let t = r.tanh();
                        u * k * (1.0 - t * t)
                    })
                    .collect();
                Matrix::from_vec_unchecked(raw.rows(), raw.cols(), data)
            }
            Activation::CauchyRiemann => {
                let mut out = Matrix::zeros(2, 2);
                out.set(0, 0, upstream.get(0, 0) + upstream.get(1, 1));
                out.set(1, 0, upstream.get(1, 0) - upstream.get(0, 1));
                out
            }
        }
    }
}

/// Weights and biases of the one-hidden-layer network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    /// `hidden × d_in`
    pub w1: Matrix,
    pub b1: Vector,
    /// `(d_out·d_in) × hidden`
    pub w2: Matrix,
    pub b2: Vector,
}

impl MlpParams {
    pub fn param_count(d_in: usize, d_out: usize, hidden: usize) -> usize {
        hidden * d_in + hidden + d_out * d_in * hidden + d_out * d_in
    }

    pub fn zeros(d_in: usize, d_out: usize, hidden: usize) -> Self {
        let n_out = d_out * d_in;
        Self {
            w1: Matrix::zeros(hidden, d_in),
            b1: Vector::zeros(hidden),
            w2: Matrix::zeros(n_out, hidden),
            b2: Vector::zeros(n_out),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot(d_in: usize, d_out: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_out = d_out * d_in;
        let mut draw = |rows: usize, cols: usize| {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            let data = (0..rows * cols)
                .map(|_| rng.gen_range(-limit..=limit))
                .collect();
            Matrix::from_vec_unchecked(rows, cols, data)
        };
        let w1 = draw(hidden, d_in);
        let w2 = draw(n_out, hidden);
        Self {
            w1,
            b1: Vector::zeros(hidden),
            w2,
            b2: Vector::zeros(n_out),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(
            self.w1.as_slice().len() + self.b1.dim() + self.w2.as_slice().len() + self.b2.dim(),
        );
        out.extend_from_slice(self.w1.as_slice());
        out.extend_from_slice(self.b1.as_slice());
        out.extend_from_slice(self.w2.as_slice());
        out.extend_from_slice(self.b2.as_slice());
        out
    }

    /// Overwrites every parameter from a flat slice in the canonical layout.
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        let sizes = [
            self.w1.as_slice().len(),
            self.b1.dim(),
            self.w2.as_slice().len(),
            self.b2.dim(),
        ];
        check_dim("set_flat", sizes.iter().sum(), flat.len())?;
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(JacError::NonFinite("parameters"));
        }
        let (w1, rest) = flat.split_at(sizes[0]);
        let (b1, rest) = rest.split_at(sizes[1]);
        let (w2, b2) = rest.split_at(sizes[2]);
        self.w1.as_mut_slice().copy_from_slice(w1);
        self.b1.as_mut_slice().copy_from_slice(b1);
        self.w2.as_mut_slice().copy_from_slice(w2);
        self.b2.as_mut_slice().copy_from_slice(b2);
        Ok(())
    }
}

/// A point-to-Jacobian map. Implemented by [`JacobianField`] and by plain
/// closures, so the integrators can run on analytic oracle fields too.
pub trait JacobianFn {
    fn d_in(&self) -> usize;
    fn d_out(&self) -> usize;
    fn jacobian(&self, x: &Vector) -> Result<Matrix>;
}

/// Wraps a closure as a [`JacobianFn`].
pub struct FnField<F> {
    d_in: usize,
    d_out: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(&Vector) -> Matrix,
{
    pub fn new(d_in: usize, d_out: usize, f: F) -> Self {
        Self { d_in, d_out, f }
    }
}

impl<F> JacobianFn for FnField<F>
where
    F: Fn(&Vector) -> Matrix,
{
    fn d_in(&self) -> usize {
        self.d_in
    }

    fn d_out(&self) -> usize {
        self.d_out
    }

    fn jacobian(&self, x: &Vector) -> Result<Matrix> {
        check_dim("field input", self.d_in, x.dim())?;
        Ok((self.f)(x))
    }
}

/// Hidden-layer values cached for the backward pass.
struct Forward {
    hidden: Vec<f64>,
    raw: Matrix,
}

/// Learned Jacobian field `x ↦ Ĵ(x) ∈ ℝ^(d_out × d_in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianField {
    params: MlpParams,
    activation: Activation,
    d_in: usize,
    d_out: usize,
    hidden: usize,
}

impl JacobianField {
    pub fn new(
        d_in: usize,
        d_out: usize,
        hidden: usize,
        activation: Activation,
        params: MlpParams,
    ) -> Result<Self> {
        if d_in == 0 || d_out == 0 || hidden == 0 {
            return Err(JacError::InvalidArgument(
                "field dimensions must be positive".into(),
            ));
        }
        activation.validate(d_in, d_out)?;
        check_dim("w1 rows", hidden, params.w1.rows())?;
        check_dim("w1 cols", d_in, params.w1.cols())?;
        check_dim("b1", hidden, params.b1.dim())?;
        check_dim("w2 rows", d_out * d_in, params.w2.rows())?;
        check_dim("w2 cols", hidden, params.w2.cols())?;
        check_dim("b2", d_out * d_in, params.b2.dim())?;
        if !(params.w1.is_finite()
            && params.b1.is_finite()
            && params.w2.is_finite()
            && params.b2.is_finite())
        {
            return Err(JacError::NonFinite("parameters"));
        }
        Ok(Self {
            params,
            activation,
            d_in,
            d_out,
            hidden,
        })
    }

    /// Freshly initialized field with Glorot-uniform weights drawn from `seed`.
    pub fn init(
        d_in: usize,
        d_out: usize,
        hidden: usize,
        activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        Self::new(
            d_in,
            d_out,
            hidden,
            activation,
            MlpParams::glorot(d_in, d_out, hidden, seed),
        )
    }

    pub fn zeros(d_in: usize, d_out: usize, hidden: usize, activation: Activation) -> Result<Self> {
        Self::new(
            d_in,
            d_out,
            hidden,
            activation,
            MlpParams::zeros(d_in, d_out, hidden),
        )
    }

    pub fn params(&self) -> &MlpParams {
        &self.params
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn param_count(&self) -> usize {
        MlpParams::param_count(self.d_in, self.d_out, self.hidden)
    }

    pub fn params_flat(&self) -> Vec<f64> {
        self.params.to_flat()
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        self.params.set_flat(flat)
    }

    /// Copy of this field with the given flat parameters.
    pub fn with_params_flat(&self, flat: &[f64]) -> Result<Self> {
        let mut out = self.clone();
        out.set_params_flat(flat)?;
        Ok(out)
    }

    fn forward(&self, x: &Vector) -> Result<Forward> {
        check_dim("field input", self.d_in, x.dim())?;
        let p = &self.params;
        let xs = x.as_slice();
        let hidden: Vec<f64> = (0..self.hidden)
            .map(|h| {
                let z: f64 = p.w1.row(h).iter().zip(xs).map(|(w, xi)| w * xi).sum();
                (z + p.b1[h]).tanh()
            })
            .collect();
        let n_out = self.d_out * self.d_in;
        let raw = (0..n_out)
            .map(|r| {
                let s: f64 = p.w2.row(r).iter().zip(&hidden).map(|(w, h)| w * h).sum();
                s + p.b2[r]
            })
            .collect();
        Ok(Forward {
            hidden,
            raw: Matrix::from_vec_unchecked(self.d_out, self.d_in, raw),
        })
    }

    /// Network output before the structured activation, as a `d_out × d_in`
    /// matrix.
    pub fn mlp_raw(&self, x: &Vector) -> Result<Matrix> {
        Ok(self.forward(x)?.raw)
    }

    /// `Ĵ(x)`.
    pub fn eval(&self, x: &Vector) -> Result<Matrix> {
        self.activation.apply(&self.forward(x)?.raw)
    }

    /// `∂⟨upstream, Ĵ(x)⟩_F / ∂θ` in the flat parameter layout.
    pub fn param_grad(&self, x: &Vector, upstream: &Matrix) -> Result<Vector> {
        let mut out = vec![0.0; self.param_count()];
        self.accumulate_param_grad(x, upstream, &mut out)?;
        Ok(Vector::from_vec_unchecked(out))
    }

    /// Adds `∂⟨upstream, Ĵ(x)⟩_F / ∂θ` into `out`.
    pub fn accumulate_param_grad(
        &self,
        x: &Vector,
        upstream: &Matrix,
        out: &mut [f64],
    ) -> Result<()> {
        check_dim("upstream rows", self.d_out, upstream.rows())?;
        check_dim("upstream cols", self.d_in, upstream.cols())?;
        check_dim("gradient buffer", self.param_count(), out.len())?;
        let fwd = self.forward(x)?;
        let g_raw = self.activation.backward(&fwd.raw, upstream);
        let g = g_raw.as_slice();

        let (hidden, d_in) = (self.hidden, self.d_in);
        let n_out = self.d_out * d_in;
        let (g_w1, rest) = out.split_at_mut(hidden * d_in);
        let (g_b1, rest) = rest.split_at_mut(hidden);
        let (g_w2, g_b2) = rest.split_at_mut(n_out * hidden);

        let mut g_hidden = vec![0.0; hidden];
        for (r, &gr) in g.iter().enumerate() {
            if gr == 0.0 {
                continue;
            }
            g_b2[r] += gr;
            let w2_row = self.params.w2.row(r);
            for h in 0..hidden {
                g_w2[r * hidden + h] += gr * fwd.hidden[h];
                g_hidden[h] += gr * w2_row[h];
            }
        }
        let xs = x.as_slice();
        for h in 0..hidden {
            let a = fwd.hidden[h];
            let gz = g_hidden[h] * (1.0 - a * a);
            g_b1[h] += gz;
            for j in 0..d_in {
                g_w1[h * d_in + j] += gz * xs[j];
            }
        }
        Ok(())
    }
}

impl JacobianFn for JacobianField {
    fn d_in(&self) -> usize {
        self.d_in
    }

    fn d_out(&self) -> usize {
        self.d_out
    }

    fn jacobian(&self, x: &Vector) -> Result<Matrix> {
        self.eval(x)
    }
}

impl<T: JacobianFn + ?Sized> JacobianFn for &T {
    fn d_in(&self) -> usize {
        (**self).d_in()
    }

    fn d_out(&self) -> usize {
        (**self).d_out()
    }

    fn jacobian(&self, x: &Vector) -> Result<Matrix> {
        (**self).jacobian(x)
    }
}

/// On-disk form of a [`JacobianField`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldFile {
    pub d_in: usize,
    pub d_out: usize,
    pub hidden: usize,
    pub activation: Activation,
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
}

impl From<&JacobianField> for FieldFile {
    fn from(f: &JacobianField) -> Self {
        Self {
            d_in: f.d_in,
            d_out: f.d_out,
            hidden: f.hidden,
            activation: f.activation,
            w1: f.params.w1.to_rows(),
            b1: f.params.b1.as_slice().to_vec(),
            w2: f.params.w2.to_rows(),
            b2: f.params.b2.as_slice().to_vec(),
        }
    }
}

impl TryFrom<FieldFile> for JacobianField {
    type Error = JacError;

    fn try_from(f: FieldFile) -> Result<Self> {
        let params = MlpParams {
            w1: Matrix::from_rows(&f.w1)?,
            b1: Vector::new(f.b1)?,
            w2: Matrix::from_rows(&f.w2)?,
            b2: Vector::new(f.b2)?,
        };
        JacobianField::new(f.d_in, f.d_out, f.hidden, f.activation, params)
    }
}

impl JacobianField {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&FieldFile::from(self)).expect("field serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: FieldFile =
            serde_json::from_str(s).map_err(|e| JacError::Serialization(e.to_string()))?;
        file.try_into()
    }
}
