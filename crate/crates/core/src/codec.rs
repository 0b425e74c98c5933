//! JSON encoding of jets and problem data.
//!
//! A jet is written as
//! `{"n": 2, "N": 3, "shape": "vector:2", "terms": [{"alpha": [1, 0], "coeff": [1.0, 0.0]}]}`
//! where `coeff` is a number for scalar jets, an array for vectors and an
//! array of rows for matrices; complex entries are `{"re": .., "im": ..}`.
//! Omitted multi-indices are zero.

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::jet::{Jet, MultiIndex, ValueShape, VectorFieldJet};
use crate::problem::ProblemData;
use crate::scalar::Scalar;

pub fn jet_to_json<T: Scalar>(j: &Jet<T>) -> Value {
    let terms: Vec<Value> = j
        .terms()
        .map(|(alpha, block)| {
            let coeff = match j.shape() {
                ValueShape::Scalar => block[0].to_json(),
                ValueShape::Vector(_) => Value::Array(block.iter().map(|c| c.to_json()).collect()),
                ValueShape::Matrix(m) => Value::Array(
                    block
                        .chunks(m)
                        .map(|row| Value::Array(row.iter().map(|c| c.to_json()).collect()))
                        .collect(),
                ),
            };
            json!({ "alpha": alpha.entries(), "coeff": coeff })
        })
        .collect();
    json!({
        "n": j.n(),
        "N": j.order(),
        "shape": j.shape().to_string(),
        "terms": terms,
    })
}

fn object<'a>(v: &'a Value, at: &str, allowed: &[&str]) -> Result<&'a Map<String, Value>> {
    let map = v
        .as_object()
        .ok_or_else(|| Error::Json(format!("{at}: expected an object")))?;
    for k in map.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::Json(format!("{at}: unknown key `{k}`")));
        }
    }
    Ok(map)
}

fn field<'a>(map: &'a Map<String, Value>, key: &str, at: &str) -> Result<&'a Value> {
    map.get(key)
        .ok_or_else(|| Error::Json(format!("{at}: missing key `{key}`")))
}

fn usize_of(v: &Value, at: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| Error::Json(format!("{at}: expected a non-negative integer")))
}

fn array<'a>(v: &'a Value, at: &str) -> Result<&'a Vec<Value>> {
    v.as_array()
        .ok_or_else(|| Error::Json(format!("{at}: expected an array")))
}

fn scalar_at<T: Scalar>(v: &Value, at: &str) -> Result<T> {
    T::from_json(v).map_err(|e| match e {
        Error::Json(msg) => Error::Json(format!("{at}: {msg}")),
        Error::Field(msg) => Error::Field(format!("{at}: {msg}")),
        other => other,
    })
}

/// Parses a jet; `at` names the location for error messages.
pub fn jet_from_json<T: Scalar>(v: &Value, at: &str) -> Result<Jet<T>> {
    let map = object(v, at, &["n", "N", "shape", "terms"])?;
    let n = usize_of(field(map, "n", at)?, &format!("{at}.n"))?;
    let order = usize_of(field(map, "N", at)?, &format!("{at}.N"))?;
    if n == 0 {
        return Err(Error::Json(format!("{at}.n: must be positive")));
    }
    let shape: ValueShape = field(map, "shape", at)?
        .as_str()
        .ok_or_else(|| Error::Json(format!("{at}.shape: expected a string")))?
        .parse()
        .map_err(|e: Error| Error::Json(format!("{at}.shape: {e}")))?;
    let terms = array(field(map, "terms", at)?, &format!("{at}.terms"))?;
    let mut parsed = Vec::with_capacity(terms.len());
    for (i, t) in terms.iter().enumerate() {
        let tat = format!("{at}.terms[{i}]");
        let tm = object(t, &tat, &["alpha", "coeff"])?;
        let alpha_v = array(field(tm, "alpha", &tat)?, &format!("{tat}.alpha"))?;
        let alpha = alpha_v
            .iter()
            .map(|a| {
                a.as_u64()
                    .and_then(|x| u32::try_from(x).ok())
                    .ok_or_else(|| Error::Json(format!("{tat}.alpha: expected non-negative integers")))
            })
            .collect::<Result<Vec<u32>>>()?;
        if alpha.len() != n {
            return Err(Error::Json(format!(
                "{tat}.alpha: expected {n} entries, found {}",
                alpha.len()
            )));
        }
        let alpha = MultiIndex::new(alpha);
        if alpha.degree() > order {
            return Err(Error::Json(format!(
                "{tat}.alpha: degree {} exceeds N = {order}",
                alpha.degree()
            )));
        }
        let c = field(tm, "coeff", &tat)?;
        let cat = format!("{tat}.coeff");
        let block: Vec<T> = match shape {
            ValueShape::Scalar => vec![scalar_at(c, &cat)?],
            ValueShape::Vector(m) => {
                let a = array(c, &cat)?;
                if a.len() != m {
                    return Err(Error::Json(format!("{cat}: expected {m} entries")));
                }
                a.iter().map(|x| scalar_at(x, &cat)).collect::<Result<_>>()?
            }
            ValueShape::Matrix(m) => {
                let rows = array(c, &cat)?;
                if rows.len() != m {
                    return Err(Error::Json(format!("{cat}: expected {m} rows")));
                }
                let mut out = Vec::with_capacity(m * m);
                for row in rows {
                    let r = array(row, &cat)?;
                    if r.len() != m {
                        return Err(Error::Json(format!("{cat}: expected rows of length {m}")));
                    }
                    for x in r {
                        out.push(scalar_at(x, &cat)?);
                    }
                }
                out
            }
        };
        parsed.push((alpha, block));
    }
    Jet::from_terms(n, order, shape, parsed)
}

pub fn field_to_json<T: Scalar>(x: &VectorFieldJet<T>) -> Value {
    jet_to_json(&x.to_vector_jet())
}

pub fn problem_to_json<T: Scalar>(p: &ProblemData<T>) -> Value {
    json!({
        "X": field_to_json(p.x()),
        "A": jet_to_json(p.a()),
        "v": jet_to_json(p.v()),
        "lambda": p.lambda().to_json(),
    })
}

/// Parses `{"X", "A", "v", "lambda"}`. Jets given at different orders are
/// brought to the largest one by zero padding (inputs are read as polynomials).
/// `A` defaults to zero and `v` to zero, `lambda` to 0, with `m` taken from
/// whichever of `A`/`v` is present (1 if neither).
pub fn problem_from_json<T: Scalar>(v: &Value, at: &str) -> Result<ProblemData<T>> {
    let map = object(v, at, &["X", "A", "v", "lambda"])?;
    let xj: Jet<T> = jet_from_json(field(map, "X", at)?, &format!("{at}.X"))?;
    let x = VectorFieldJet::from_vector_jet(&xj)
        .map_err(|e| Error::Json(format!("{at}.X: {e}")))?;
    let a: Option<Jet<T>> = map
        .get("A")
        .map(|j| jet_from_json(j, &format!("{at}.A")))
        .transpose()?;
    let rhs: Option<Jet<T>> = map
        .get("v")
        .map(|j| jet_from_json(j, &format!("{at}.v")))
        .transpose()?;
    let lambda = match map.get("lambda") {
        Some(l) => scalar_at(l, &format!("{at}.lambda"))?,
        None => T::zero(),
    };
    let n = x.n();
    let m = match (&a, &rhs) {
        (Some(a), _) => match a.shape() {
            ValueShape::Matrix(m) => m,
            other => return Err(Error::Json(format!("{at}.A: expected a matrix jet, found {other}"))),
        },
        (None, Some(v)) => match v.shape() {
            ValueShape::Vector(m) => m,
            other => return Err(Error::Json(format!("{at}.v: expected a vector jet, found {other}"))),
        },
        (None, None) => 1,
    };
    let order = [Some(x.order()), a.as_ref().map(Jet::order), rhs.as_ref().map(Jet::order)]
        .into_iter()
        .flatten()
        .max()
        .unwrap_or(1)
        .max(1);
    let a = a.unwrap_or_else(|| Jet::zeros(n, order, ValueShape::Matrix(m)));
    let rhs = rhs.unwrap_or_else(|| Jet::zeros(n, order, ValueShape::Vector(m)));
    ProblemData::at_order(&x, &a, &rhs, lambda, order)
        .map_err(|e| Error::Json(format!("{at}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn round_trip_real_and_complex() {
        let j = Jet::from_terms(
            2,
            2,
            ValueShape::Matrix(2),
            [(MultiIndex::new(vec![1, 1]), vec![1.0, 2.0, 3.0, 4.5])],
        )
        .unwrap();
        let back: Jet<f64> = jet_from_json(&jet_to_json(&j), "jet").unwrap();
        assert_eq!(back, j);
        let c = j.to_complex().scale(Complex64::new(0.0, 1.0));
        let back: Jet<Complex64> = jet_from_json(&jet_to_json(&c), "jet").unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_unknown_keys_with_location() {
        let v = json!({"n": 1, "N": 1, "shape": "scalar", "terms": [{"alpha": [1], "coeff": 1.0, "x": 0}]});
        let e = jet_from_json::<f64>(&v, "problem.v").unwrap_err();
        assert!(e.to_string().contains("problem.v.terms[0]"), "{e}");
    }

    #[test]
    fn complex_coefficient_in_real_jet_is_a_field_error() {
        let v = json!({"n": 1, "N": 1, "shape": "scalar", "terms": [{"alpha": [0], "coeff": {"re": 1.0, "im": 2.0}}]});
        assert!(matches!(jet_from_json::<f64>(&v, "j"), Err(Error::Field(_))));
    }

    #[test]
    fn problem_pads_to_common_order() {
        let v = json!({
            "X": {"n": 1, "N": 1, "shape": "vector:1", "terms": [{"alpha": [1], "coeff": [1.0]}]},
            "v": {"n": 1, "N": 3, "shape": "vector:1", "terms": [{"alpha": [3], "coeff": [1.0]}]}
        });
        let p: ProblemData<f64> = problem_from_json(&v, "problem").unwrap();
        assert_eq!(p.order(), 3);
        assert_eq!(p.m(), 1);
    }
}
