//! JSON model files.
//!
//! ```text
//! {
//!   "format": "robex-model",
//!   "version": 1,
//!   "classes": ["0", "1"],
//!   "features": [
//!     {"name": "x1", "domain": "real", "lo": 0, "hi": 1},
//!     {"name": "x2", "domain": "quantized", "lo": 0, "hi": 1, "qs": 0.25},
//!     {"name": "x3", "domain": "integer", "lo": -2, "hi": 2},
//!     {"name": "x4", "domain": "binary"},
//!     {"name": "x5", "domain": "categorical", "values": [0, 0.5, 3]}
//!   ],
//!   "body": {"kind": "linear", "weights": [...], "bias": 0.5}
//! }
//! ```
//!
//! Body kinds: `constant {label}`, `linear {weights, bias}`,
//! `piecewise {branches: [{guard: [atom...], body}]}` with atoms
//! `{feature, op, value}` or `{feature, op, other}` (1-based feature
//! indices, `op` one of `< <= > >= == !=`), `bnn {blocks: [{weights,
//! thresholds}], output: {weights, bias}}` with ±1 weight rows and integer
//! thresholds, and `lookup {default, entries: [{point, label}]}`.
//! Real numbers may be written as JSON numbers or as `"p/q"` strings; they
//! are read from their decimal text, so exact scalar types see the exact
//! value written.

use std::path::Path;
use std::str::FromStr;

use serde_json::{Map, Number, Value};

use crate::error::{Error, Result};
use crate::model::bnn::{Bnn, BnnBlock, BnnOutput};
use crate::model::classifier::{Atom, Body, Branch, Classifier, CmpOp, Guard, Lookup, Operand};
use crate::model::space::{Domain, FeatureSpace};
use crate::scalar::{scalar_text, Scalar};

pub const FORMAT_TAG: &str = "robex-model";
pub const FORMAT_VERSION: u64 = 1;

pub fn load_model<S: Scalar>(path: impl AsRef<Path>) -> Result<Classifier<S>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text)
}

pub fn save_model<S: Scalar>(classifier: &Classifier<S>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model_to_string(classifier)).map_err(|e| Error::io(path, e))
}

pub fn parse_model<S: Scalar>(text: &str) -> Result<Classifier<S>> {
    let root: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: Some(e.line()),
        field: None,
        message: e.to_string(),
    })?;
    let obj = as_object(&root, "")?;
    if let Some(tag) = obj.get("format") {
        if tag.as_str() != Some(FORMAT_TAG) {
            return Err(Error::field("format", format!("expected \"{FORMAT_TAG}\"")));
        }
    }
    if let Some(v) = obj.get("version") {
        if v.as_u64() != Some(FORMAT_VERSION) {
            return Err(Error::field("version", format!("unsupported version {v}")));
        }
    }
    let classes = as_array(get(obj, "classes", "")?, "classes")?
        .iter()
        .enumerate()
        .map(|(i, c)| match c {
            Value::String(s) => Ok(s.clone()),
            Value::Number(n) => Ok(n.to_string()),
            _ => Err(Error::field(format!("classes[{i}]"), "class names are strings")),
        })
        .collect::<Result<Vec<_>>>()?;

    let features = as_array(get(obj, "features", "")?, "features")?;
    let mut domains = Vec::with_capacity(features.len());
    let mut names = Vec::with_capacity(features.len());
    for (i, f) in features.iter().enumerate() {
        let path = format!("features[{i}]");
        let fo = as_object(f, &path)?;
        names.push(match fo.get("name") {
            Some(Value::String(s)) => s.clone(),
            Some(_) => return Err(Error::field(format!("{path}.name"), "expected a string")),
            None => format!("x{}", i + 1),
        });
        domains.push(parse_domain::<S>(fo, &path)?);
    }
    let space = FeatureSpace::with_names(domains, names).map_err(|e| Error::field("features", e.to_string()))?;
    let body = parse_body(get(obj, "body", "")?, "body", &space)?;
    Classifier::new(space, classes, body).map_err(|e| Error::field("body", e.to_string()))
}

fn parse_domain<S: Scalar>(fo: &Map<String, Value>, path: &str) -> Result<Domain<S>> {
    let kind = as_str(get(fo, "domain", path)?, &format!("{path}.domain"))?;
    Ok(match kind {
        "real" => Domain::Real {
            lo: scalar(get(fo, "lo", path)?, &format!("{path}.lo"))?,
            hi: scalar(get(fo, "hi", path)?, &format!("{path}.hi"))?,
        },
        "quantized" => Domain::Quantized {
            lo: scalar(get(fo, "lo", path)?, &format!("{path}.lo"))?,
            hi: scalar(get(fo, "hi", path)?, &format!("{path}.hi"))?,
            step: scalar(get(fo, "qs", path)?, &format!("{path}.qs"))?,
        },
        "integer" => Domain::Integer {
            lo: integer(get(fo, "lo", path)?, &format!("{path}.lo"))?,
            hi: integer(get(fo, "hi", path)?, &format!("{path}.hi"))?,
        },
        "binary" => Domain::Binary,
        "categorical" => Domain::Categorical(
            as_array(get(fo, "values", path)?, &format!("{path}.values"))?
                .iter()
                .enumerate()
                .map(|(j, v)| scalar(v, &format!("{path}.values[{j}]")))
                .collect::<Result<_>>()?,
        ),
        other => {
            return Err(Error::field(
                format!("{path}.domain"),
                format!("unknown domain kind `{other}`"),
            ))
        }
    })
}

fn parse_body<S: Scalar>(v: &Value, path: &str, space: &FeatureSpace<S>) -> Result<Body<S>> {
    let o = as_object(v, path)?;
    let kind = as_str(get(o, "kind", path)?, &format!("{path}.kind"))?;
    let sub = |k: &str| format!("{path}.{k}");
    Ok(match kind {
        "constant" => Body::Constant(index(get(o, "label", path)?, &sub("label"))?),
        "linear" => Body::Linear {
            weights: scalar_list(get(o, "weights", path)?, &sub("weights"))?,
            bias: scalar(get(o, "bias", path)?, &sub("bias"))?,
        },
        "piecewise" => {
            let branches = as_array(get(o, "branches", path)?, &sub("branches"))?;
            let mut out = Vec::with_capacity(branches.len());
            for (i, b) in branches.iter().enumerate() {
                let bp = format!("{path}.branches[{i}]");
                let bo = as_object(b, &bp)?;
                let atoms = match bo.get("guard") {
                    None => Vec::new(),
                    Some(g) => as_array(g, &format!("{bp}.guard"))?
                        .iter()
                        .enumerate()
                        .map(|(j, a)| parse_atom(a, &format!("{bp}.guard[{j}]")))
                        .collect::<Result<_>>()?,
                };
                out.push(Branch {
                    guard: Guard { atoms },
                    body: parse_body(get(bo, "body", &bp)?, &format!("{bp}.body"), space)?,
                });
            }
            Body::Piecewise(out)
        }
        "bnn" => {
            let blocks = as_array(get(o, "blocks", path)?, &sub("blocks"))?
                .iter()
                .enumerate()
                .map(|(i, b)| {
                    let bp = format!("{path}.blocks[{i}]");
                    let bo = as_object(b, &bp)?;
                    Ok(BnnBlock {
                        weights: sign_rows(get(bo, "weights", &bp)?, &format!("{bp}.weights"))?,
                        thresholds: int_list(get(bo, "thresholds", &bp)?, &format!("{bp}.thresholds"))?,
                    })
                })
                .collect::<Result<_>>()?;
            let op = sub("output");
            let oo = as_object(get(o, "output", path)?, &op)?;
            Body::Bnn(Bnn {
                blocks,
                output: BnnOutput {
                    weights: sign_rows(get(oo, "weights", &op)?, &format!("{op}.weights"))?,
                    bias: int_list(get(oo, "bias", &op)?, &format!("{op}.bias"))?,
                },
            })
        }
        "lookup" => {
            let default = index(get(o, "default", path)?, &sub("default"))?;
            let entries = as_array(get(o, "entries", path)?, &sub("entries"))?
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    let ep = format!("{path}.entries[{i}]");
                    let eo = as_object(e, &ep)?;
                    Ok((
                        scalar_list(get(eo, "point", &ep)?, &format!("{ep}.point"))?,
                        index(get(eo, "label", &ep)?, &format!("{ep}.label"))?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            Body::Lookup(Lookup::new(space, entries, default).map_err(|e| Error::field(sub("entries"), e.to_string()))?)
        }
        other => return Err(Error::field(sub("kind"), format!("unknown body kind `{other}`"))),
    })
}

fn parse_atom<S: Scalar>(v: &Value, path: &str) -> Result<Atom<S>> {
    let o = as_object(v, path)?;
    let feature = feature_index(get(o, "feature", path)?, &format!("{path}.feature"))?;
    let op_text = as_str(get(o, "op", path)?, &format!("{path}.op"))?;
    let op = CmpOp::parse(op_text)
        .ok_or_else(|| Error::field(format!("{path}.op"), format!("unknown operator `{op_text}`")))?;
    let rhs = match (o.get("value"), o.get("other")) {
        (Some(v), None) => Operand::Const(scalar(v, &format!("{path}.value"))?),
        (None, Some(f)) => Operand::Feature(feature_index(f, &format!("{path}.other"))?),
        _ => return Err(Error::field(path, "atom needs exactly one of `value` or `other`")),
    };
    Ok(Atom { feature, op, rhs })
}

fn get<'a>(o: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value> {
    o.get(key).ok_or_else(|| {
        let full = if path.is_empty() {
            key.to_string()
        } else {
            format!("{path}.{key}")
        };
        Error::field(full, "missing field")
    })
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| Error::field(if path.is_empty() { "<root>" } else { path }, "expected an object"))
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| Error::field(path, "expected an array"))
}

fn as_str<'a>(v: &'a Value, path: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| Error::field(path, "expected a string"))
}

fn scalar<S: Scalar>(v: &Value, path: &str) -> Result<S> {
    let text = match v {
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        _ => return Err(Error::field(path, "expected a number")),
    };
    S::parse_decimal(&text).ok_or_else(|| Error::field(path, format!("`{text}` is not a finite number")))
}

fn scalar_list<S: Scalar>(v: &Value, path: &str) -> Result<Vec<S>> {
    as_array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, x)| scalar(x, &format!("{path}[{i}]")))
        .collect()
}

fn integer(v: &Value, path: &str) -> Result<i64> {
    v.as_i64().ok_or_else(|| Error::field(path, "expected an integer"))
}

fn index(v: &Value, path: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| Error::field(path, "expected a non-negative integer"))
}

fn feature_index(v: &Value, path: &str) -> Result<usize> {
    match v.as_u64() {
        Some(k) if k >= 1 => Ok(k as usize - 1),
        _ => Err(Error::field(path, "expected a 1-based feature index")),
    }
}

fn int_list(v: &Value, path: &str) -> Result<Vec<i64>> {
    as_array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, x)| integer(x, &format!("{path}[{i}]")))
        .collect()
}

fn sign_rows(v: &Value, path: &str) -> Result<Vec<Vec<i8>>> {
    as_array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, row)| {
            as_array(row, &format!("{path}[{i}]"))?
                .iter()
                .enumerate()
                .map(|(j, w)| match w.as_i64() {
                    Some(1) => Ok(1),
                    Some(-1) => Ok(-1),
                    _ => Err(Error::field(format!("{path}[{i}][{j}]"), "weights must be 1 or -1")),
                })
                .collect()
        })
        .collect()
}

fn num_value<S: Scalar>(v: &S) -> Value {
    let text = scalar_text(v);
    match Number::from_str(&text) {
        Ok(n) => Value::Number(n),
        Err(_) => Value::String(text),
    }
}

fn ints(values: &[i64]) -> Value {
    Value::Array(values.iter().map(|&x| Value::from(x)).collect())
}

fn signs(rows: &[Vec<i8>]) -> Value {
    Value::Array(
        rows.iter()
            .map(|r| Value::Array(r.iter().map(|&w| Value::from(w as i64)).collect()))
            .collect(),
    )
}

fn obj(pairs: Vec<(&str, Value)>) -> Value {
    Value::Object(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
}

fn body_value<S: Scalar>(body: &Body<S>) -> Value {
    match body {
        Body::Constant(k) => obj(vec![("kind", "constant".into()), ("label", (*k as u64).into())]),
        Body::Linear { weights, bias } => obj(vec![
            ("kind", "linear".into()),
            ("weights", Value::Array(weights.iter().map(num_value).collect())),
            ("bias", num_value(bias)),
        ]),
        Body::Piecewise(branches) => obj(vec![
            ("kind", "piecewise".into()),
            (
                "branches",
                Value::Array(
                    branches
                        .iter()
                        .map(|b| {
                            let guard = b
                                .guard
                                .atoms
                                .iter()
                                .map(|a| {
                                    let rhs = match &a.rhs {
                                        Operand::Const(c) => ("value", num_value(c)),
                                        Operand::Feature(j) => ("other", ((*j + 1) as u64).into()),
                                    };
                                    obj(vec![
                                        ("feature", ((a.feature + 1) as u64).into()),
                                        ("op", a.op.symbol().into()),
                                        rhs,
                                    ])
                                })
                                .collect();
                            obj(vec![("guard", Value::Array(guard)), ("body", body_value(&b.body))])
                        })
                        .collect(),
                ),
            ),
        ]),
        Body::Bnn(bnn) => obj(vec![
            ("kind", "bnn".into()),
            (
                "blocks",
                Value::Array(
                    bnn.blocks
                        .iter()
                        .map(|b| {
                            obj(vec![
                                ("weights", signs(&b.weights)),
                                ("thresholds", ints(&b.thresholds)),
                            ])
                        })
                        .collect(),
                ),
            ),
            (
                "output",
                obj(vec![
                    ("weights", signs(&bnn.output.weights)),
                    ("bias", ints(&bnn.output.bias)),
                ]),
            ),
        ]),
        Body::Lookup(t) => obj(vec![
            ("kind", "lookup".into()),
            ("default", (t.default_label() as u64).into()),
            (
                "entries",
                Value::Array(
                    t.entries()
                        .iter()
                        .map(|(p, l)| {
                            obj(vec![
                                ("point", Value::Array(p.iter().map(num_value).collect())),
                                ("label", (*l as u64).into()),
                            ])
                        })
                        .collect(),
                ),
            ),
        ]),
    }
}

fn domain_value<S: Scalar>(name: &str, d: &Domain<S>) -> Value {
    let mut pairs = vec![("name", Value::from(name)), ("domain", d.kind_name().into())];
    match d {
        Domain::Real { lo, hi } => {
            pairs.push(("lo", num_value(lo)));
            pairs.push(("hi", num_value(hi)));
        }
        Domain::Quantized { lo, hi, step } => {
            pairs.push(("lo", num_value(lo)));
            pairs.push(("hi", num_value(hi)));
            pairs.push(("qs", num_value(step)));
        }
        Domain::Integer { lo, hi } => {
            pairs.push(("lo", (*lo).into()));
            pairs.push(("hi", (*hi).into()));
        }
        Domain::Binary => {}
        Domain::Categorical(values) => pairs.push(("values", Value::Array(values.iter().map(num_value).collect()))),
    }
    obj(pairs)
}

pub fn model_to_value<S: Scalar>(c: &Classifier<S>) -> Value {
    let space = c.space();
    obj(vec![
        ("format", FORMAT_TAG.into()),
        ("version", FORMAT_VERSION.into()),
        (
            "classes",
            Value::Array(c.classes().iter().map(|s| Value::from(s.as_str())).collect()),
        ),
        (
            "features",
            Value::Array(
                space
                    .domains()
                    .iter()
                    .zip(space.names())
                    .map(|(d, n)| domain_value(n, d))
                    .collect(),
            ),
        ),
        ("body", body_value(c.body())),
    ])
}

pub fn model_to_string<S: Scalar>(c: &Classifier<S>) -> String {
    let mut out = String::new();
    write_pretty(&model_to_value(c), 0, &mut out);
    out.push('\n');
    out
}

/// Pretty printer that keeps arrays of scalars on one line, so BNN weight
/// rows stay one row per line.
pub fn write_pretty(v: &Value, indent: usize, out: &mut String) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Object(map) if !map.is_empty() => {
            out.push_str("{\n");
            for (i, (k, val)) in map.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&Value::from(k.as_str()).to_string());
                out.push_str(": ");
                write_pretty(val, indent + 1, out);
                if i + 1 < map.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
        Value::Array(items) if items.iter().any(|x| x.is_array() || x.is_object()) => {
            out.push_str("[\n");
            for (i, val) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_pretty(val, indent + 1, out);
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        other => out.push_str(&other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{build_kappa1, build_kappa2};
    use num_rational::BigRational;

    #[test]
    fn kappa1_round_trip_exact() {
        let k1 = build_kappa1::<BigRational>();
        let text = model_to_string(&k1);
        assert!(text.contains("0.93198992"));
        let back: Classifier<BigRational> = parse_model(&text).unwrap();
        assert_eq!(back, k1);
    }

    #[test]
    fn kappa2_round_trip_f64() {
        let k2 = build_kappa2::<f64>();
        let back: Classifier<f64> = parse_model(&model_to_string(&k2)).unwrap();
        assert_eq!(back, k2);
    }

    #[test]
    fn truncated_file_reports_line() {
        let text = model_to_string(&build_kappa1::<f64>());
        let cut = &text[..text.len() / 2];
        match parse_model::<f64>(cut) {
            Err(Error::Parse { line: Some(l), .. }) => assert!(l > 1),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_field_is_named() {
        let text = r#"{"classes":["0","1"],"features":[{"domain":"quantized","lo":0,"hi":1}],"body":{"kind":"constant","label":0}}"#;
        match parse_model::<f64>(text) {
            Err(Error::Parse { field: Some(f), .. }) => assert_eq!(f, "features[0].qs"),
            other => panic!("unexpected {other:?}"),
        }
        let text = r#"{"classes":["0","1"],"features":[{"domain":"binary"}],"body":{"kind":"bnn","blocks":[{"weights":[[2]],"thresholds":[0]}],"output":{"weights":[[1],[1]],"bias":[0,0]}}}"#;
        match parse_model::<f64>(text) {
            Err(Error::Parse { field: Some(f), .. }) => assert_eq!(f, "body.blocks[0].weights[0][0]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fraction_strings_accepted() {
        let text = r#"{"classes":["a","b"],"features":[{"domain":"real","lo":"0","hi":"1/3"}],"body":{"kind":"linear","weights":["1/3"],"bias":0.1}}"#;
        let c: Classifier<BigRational> = parse_model(text).unwrap();
        let again: Classifier<BigRational> = parse_model(&model_to_string(&c)).unwrap();
        assert_eq!(c, again);
    }
}
