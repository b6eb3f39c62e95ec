//! Builtin vector fields `f_k(x)^i = amp_i φ(scale · x^i)` and the combined
//! field `F(x) = (f_1(x), …, f_N(x))` of a multiscale system.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::rough::VectorField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Sin,
    Tanh,
    /// `1 / (1 + z²)`.
    Rational,
    /// `z / √(1 + z²)`.
    LinearSaturated,
    Constant,
    /// `z`; unbounded, meant for exact-solution checks.
    Linear,
}

impl FieldKind {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "sin" => FieldKind::Sin,
            "tanh" => FieldKind::Tanh,
            "rational" => FieldKind::Rational,
            "linear-saturated" => FieldKind::LinearSaturated,
            "constant" => FieldKind::Constant,
            "linear" => FieldKind::Linear,
            other => {
                return Err(Error::Argument(format!(
                    "unknown field {other:?}; expected sin, tanh, rational, linear-saturated, constant or linear"
                )))
            }
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            FieldKind::Sin => "sin",
            FieldKind::Tanh => "tanh",
            FieldKind::Rational => "rational",
            FieldKind::LinearSaturated => "linear-saturated",
            FieldKind::Constant => "constant",
            FieldKind::Linear => "linear",
        }
    }

    /// Whether `φ` and its first three derivatives are bounded.
    pub fn is_bounded(self) -> bool {
        self != FieldKind::Linear
    }

    /// `(φ(z), φ'(z))`.
    pub fn eval(self, z: f64) -> (f64, f64) {
        match self {
            FieldKind::Sin => (z.sin(), z.cos()),
            FieldKind::Tanh => {
                let t = z.tanh();
                (t, 1.0 - t * t)
            }
            FieldKind::Rational => {
                let r = 1.0 / (1.0 + z * z);
                (r, -2.0 * z * r * r)
            }
            FieldKind::LinearSaturated => {
                let s = 1.0 + z * z;
                (z / s.sqrt(), 1.0 / (s * s.sqrt()))
            }
            FieldKind::Constant => (1.0, 0.0),
            FieldKind::Linear => (z, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub kind: FieldKind,
    /// One amplitude per state component.
    pub amp: Vec<f64>,
    pub scale: f64,
}

impl FieldSpec {
    pub fn new(kind: FieldKind, amp: Vec<f64>, scale: f64) -> Result<Self> {
        ensure(!amp.is_empty(), || "field amplitude list is empty".into())?;
        ensure(amp.iter().chain([&scale]).all(|v| v.is_finite()), || "field parameters must be finite".into())?;
        Ok(Self { kind, amp, scale })
    }

    /// Unit amplitude in every direction.
    pub fn unit(kind: FieldKind, dim: usize) -> Self {
        Self { kind, amp: vec![1.0; dim], scale: 1.0 }
    }

    pub fn dim(&self) -> usize {
        self.amp.len()
    }

    /// `f(x)^i`.
    pub fn value(&self, x: &[f64], i: usize) -> f64 {
        self.amp[i] * self.kind.eval(self.scale * x[i]).0
    }

    /// `∂_i f(x)^i` (the field acts componentwise).
    pub fn diag_derivative(&self, x: &[f64], i: usize) -> f64 {
        self.amp[i] * self.scale * self.kind.eval(self.scale * x[i]).1
    }
}

/// `F^i_k(x) = f_k(x)^i` for a list of fields on `ℝ^d`.
#[derive(Debug, Clone)]
pub struct SystemField {
    pub fields: Vec<FieldSpec>,
    pub d: usize,
}

impl SystemField {
    pub fn new(fields: Vec<FieldSpec>) -> Result<Self> {
        let d = fields.first().map(FieldSpec::dim).ok_or_else(|| Error::Argument("no fields given".into()))?;
        ensure(fields.iter().all(|f| f.dim() == d), || "fields act on different state dimensions".into())?;
        Ok(Self { fields, d })
    }
}

impl VectorField for SystemField {
    fn state_dim(&self) -> usize {
        self.d
    }

    fn drive_dim(&self) -> usize {
        self.fields.len()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let n = self.fields.len();
        for i in 0..self.d {
            for (k, f) in self.fields.iter().enumerate() {
                out[i * n + k] = f.value(x, i);
            }
        }
    }

    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        let (n, d) = (self.fields.len(), self.d);
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..d {
            for (k, f) in self.fields.iter().enumerate() {
                out[(i * n + k) * d + i] = f.diag_derivative(x, i);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_differences() {
        let kinds = [
            FieldKind::Sin,
            FieldKind::Tanh,
            FieldKind::Rational,
            FieldKind::LinearSaturated,
            FieldKind::Constant,
            FieldKind::Linear,
        ];
        for kind in kinds {
            assert_eq!(FieldKind::parse(kind.name()).unwrap(), kind);
            for z in [-2.3, -0.4, 0.0, 0.7, 3.1] {
                let h = 1e-6;
                let fd = (kind.eval(z + h).0 - kind.eval(z - h).0) / (2.0 * h);
                assert!((fd - kind.eval(z).1).abs() < 1e-7, "{kind:?} at {z}");
            }
        }
        assert!(FieldKind::parse("cosh").is_err());
    }

    #[test]
    fn bounded_on_a_box() {
        for kind in [FieldKind::Sin, FieldKind::Tanh, FieldKind::Rational, FieldKind::LinearSaturated] {
            let sup = (-2000..=2000).map(|i| kind.eval(i as f64 * 0.05).0.abs()).fold(0.0, f64::max);
            assert!(sup <= 1.0 + 1e-12, "{kind:?}");
        }
    }

    #[test]
    fn system_layout() {
        let f = SystemField::new(vec![
            FieldSpec::new(FieldKind::Sin, vec![1.0, 2.0], 1.0).unwrap(),
            FieldSpec::unit(FieldKind::Constant, 2),
        ])
        .unwrap();
        let x = [0.5, -0.25];
        let mut out = [0.0; 4];
        f.eval(&x, &mut out);
        assert_eq!(out, [0.5f64.sin(), 1.0, 2.0 * (-0.25f64).sin(), 1.0]);
        let mut jac = [0.0; 8];
        f.jacobian(&x, &mut jac);
        // ∂_1 F^1_0 = 2 cos(x^1)
        assert!((jac[(2) * 2 + 1] - 2.0 * (-0.25f64).cos()).abs() < 1e-15);
        assert_eq!(jac[(2) * 2], 0.0);
    }
}
