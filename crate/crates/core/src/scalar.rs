//! Real and complex coefficient fields.

use nalgebra::ComplexField;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Real,
    Complex,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Real => f.write_str("real"),
            Field::Complex => f.write_str("complex"),
        }
    }
}

/// Coefficient field of jets and operator matrices: `f64` or `Complex64`.
///
/// The field is fixed by the type, so mixing real and complex data is a
/// compile error; promotion goes through [`Scalar::to_complex`].
pub trait Scalar:
    ComplexField<RealField = f64> + Copy + PartialEq + fmt::Debug + Send + Sync + 'static
{
    const FIELD: Field;

    fn to_complex(self) -> Complex64;

    /// Converts back from a complex number; `None` for a real field when the
    /// imaginary part is nonzero.
    fn from_complex(z: Complex64) -> Option<Self>;

    fn to_json(self) -> Value;

    fn from_json(v: &Value) -> Result<Self>;
}

impl Scalar for f64 {
    const FIELD: Field = Field::Real;

    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }

    fn from_complex(z: Complex64) -> Option<Self> {
        (z.im == 0.0).then_some(z.re)
    }

    fn to_json(self) -> Value {
        json!(self)
    }

    fn from_json(v: &Value) -> Result<Self> {
        match v {
            Value::Number(x) => x
                .as_f64()
                .ok_or_else(|| Error::Json(format!("number out of range: {x}"))),
            Value::Object(_) => Err(Error::Field(
                "complex coefficient in a real problem".to_string(),
            )),
            other => Err(Error::Json(format!("expected a number, found {other}"))),
        }
    }
}

impl Scalar for Complex64 {
    const FIELD: Field = Field::Complex;

    fn to_complex(self) -> Complex64 {
        self
    }

    fn from_complex(z: Complex64) -> Option<Self> {
        Some(z)
    }

    fn to_json(self) -> Value {
        json!({ "re": self.re, "im": self.im })
    }

    fn from_json(v: &Value) -> Result<Self> {
        match v {
            Value::Number(_) => Ok(Complex64::new(f64::from_json(v)?, 0.0)),
            Value::Object(map) => {
                for key in map.keys() {
                    if key != "re" && key != "im" {
                        return Err(Error::Json(format!("unknown key `{key}` in complex number")));
                    }
                }
                let part = |k: &str| -> Result<f64> {
                    map.get(k).map(f64::from_json).unwrap_or(Ok(0.0))
                };
                Ok(Complex64::new(part("re")?, part("im")?))
            }
            other => Err(Error::Json(format!(
                "expected a number or {{\"re\",\"im\"}}, found {other}"
            ))),
        }
    }
}

pub(crate) fn complex_json(z: Complex64) -> Value {
    if z.im == 0.0 {
        json!(z.re)
    } else {
        json!({ "re": z.re, "im": z.im })
    }
}

/// Deterministic ordering of eigenvalues: by real part, then imaginary part.
pub(crate) fn cmp_complex(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}
