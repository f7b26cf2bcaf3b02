use serde_json::{json, Map, Value};

use super::{
    catalog, AsymptoteKind, End, EndpointAsymptote, Factor, FiberKind, FiberSpec, Interval, ModelError,
    SpacetimeModel,
};
use crate::funcparse::{estimate_endpoint_exponent, parse, Expr};

/// Serde adapter for extended reals: finite numbers as JSON numbers, infinities
/// as the strings `"-inf"` / `"+inf"`.
pub mod ext_real {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};
    use serde_json::Value;

    pub fn to_value(x: f64) -> Value {
        if x == f64::INFINITY {
            Value::from("+inf")
        } else if x == f64::NEG_INFINITY {
            Value::from("-inf")
        } else {
            Value::from(x)
        }
    }

    pub fn from_value(v: &Value) -> Option<f64> {
        match v {
            Value::Number(n) => n.as_f64(),
            Value::String(s) => match s.as_str() {
                "+inf" | "inf" => Some(f64::INFINITY),
                "-inf" => Some(f64::NEG_INFINITY),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_infinite() {
            s.serialize_str(if *x > 0.0 { "+inf" } else { "-inf" })
        } else {
            s.serialize_f64(*x)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let v = Value::deserialize(d)?;
        from_value(&v).ok_or_else(|| D::Error::custom(format!("expected a number, \"-inf\" or \"+inf\", got {v}")))
    }
}

fn config(msg: impl Into<String>) -> ModelError {
    ModelError::Config(msg.into())
}

fn number(obj: &Map<String, Value>, key: &str) -> Result<f64, ModelError> {
    obj.get(key)
        .and_then(ext_real::from_value)
        .ok_or_else(|| config(format!("missing or non-numeric `{key}`")))
}

fn builtin(obj: &Map<String, Value>, name: &str) -> Result<SpacetimeModel, ModelError> {
    match name {
        "minkowski_strip" | "minkowski" => {
            let a = obj.get("a").map_or(Ok(f64::NEG_INFINITY), |_| number(obj, "a"))?;
            let b = obj.get("b").map_or(Ok(f64::INFINITY), |_| number(obj, "b"))?;
            let n = obj.get("n").map_or(Ok(1.0), |_| number(obj, "n"))?;
            if n.fract() != 0.0 || n < 1.0 {
                return Err(config("`n` must be a positive integer"));
            }
            catalog::minkowski_strip(a, b, n as usize)
        }
        "de_sitter_grw" | "de_sitter" => catalog::de_sitter_grw(),
        "schwarzschild_interior" => catalog::schwarzschild_interior(number(obj, "m")?),
        "schwarzschild_reduced" => catalog::schwarzschild_interior(number(obj, "m")?)?.restrict(&[0]),
        "reissner_nordstrom_intermediate" | "reissner_nordstrom" => {
            catalog::reissner_nordstrom_intermediate(number(obj, "m")?, number(obj, "e")?)
        }
        other => Err(config(format!("unknown builtin model `{other}`"))),
    }
}

fn parse_fiber(v: Option<&Value>) -> Result<FiberSpec, ModelError> {
    let Some(v) = v else {
        return Ok(FiberSpec::line());
    };
    let obj = v.as_object().ok_or_else(|| config("`fiber` must be an object"))?;
    let kind = obj.get("kind").and_then(Value::as_str).unwrap_or("line");
    let radius = || number(obj, "radius");
    let kind = match kind {
        "line" => FiberKind::Line,
        "abstract" => FiberKind::Abstract,
        "circle" => FiberKind::Circle { radius: radius()? },
        "sphere" => FiberKind::Sphere { radius: radius()? },
        other => return Err(config(format!("unknown fiber kind `{other}`"))),
    };
    let default_convex = matches!(kind, FiberKind::Line | FiberKind::Abstract);
    let strongly_convex = match obj.get("strongly_convex") {
        None => default_convex,
        Some(v) => v.as_bool().ok_or_else(|| config("`strongly_convex` must be a boolean"))?,
    };
    Ok(FiberSpec { kind, strongly_convex })
}

fn parse_asymptote(
    v: Option<&Value>,
    warp: &Expr,
    interval: &Interval,
    end: End,
) -> Result<Option<EndpointAsymptote>, ModelError> {
    match v {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) if s == "auto" => estimate_asymptote(warp, interval, end).map(Some),
        Some(v) => {
            let asym: EndpointAsymptote = serde_json::from_value(v.clone())
                .map_err(|e| config(format!("bad asymptote at {end}: {e}")))?;
            asym.validate(interval.endpoint(end))?;
            Ok(Some(asym))
        }
    }
}

/// Power-law asymptote fitted from samples; only accepted when the fit is clean.
fn estimate_asymptote(warp: &Expr, interval: &Interval, end: End) -> Result<EndpointAsymptote, ModelError> {
    let est = estimate_endpoint_exponent(warp, interval, end).map_err(|e| config(e.to_string()))?;
    if est.confidence < 0.95 {
        return Err(config(format!(
            "automatic asymptote at {end} is unreliable (confidence {:.3}); declare it explicitly",
            est.confidence
        )));
    }
    let endpoint = interval.endpoint(end);
    let exponent = (est.exponent * 1e6).round() / 1e6;
    let (kind, probe, scale) = if endpoint.is_finite() {
        let sigma = 1e-8 * if interval.is_bounded() { interval.width() } else { 1.0 };
        let tau = if end == End::A { endpoint + sigma } else { endpoint - sigma };
        (AsymptoteKind::FinitePower, tau, sigma)
    } else {
        let tau = if end == End::A { -1e6 } else { 1e6 };
        (AsymptoteKind::InfinitePower, tau, 1e6)
    };
    let value = warp.eval(probe).map_err(|e| config(e.to_string()))?;
    let asym = EndpointAsymptote {
        kind,
        exponent,
        coefficient: value / scale.powf(exponent),
    };
    asym.validate(endpoint)?;
    Ok(asym)
}

fn explicit_model(obj: &Map<String, Value>) -> Result<SpacetimeModel, ModelError> {
    let iv = obj
        .get("interval")
        .and_then(Value::as_object)
        .ok_or_else(|| config("model needs `builtin` or `interval`"))?;
    let interval = Interval::new(number(iv, "a")?, number(iv, "b")?)?;
    let factors = obj
        .get("factors")
        .and_then(Value::as_array)
        .ok_or_else(|| config("`factors` must be an array"))?;
    let mut warps = Vec::new();
    for (i, f) in factors.iter().enumerate() {
        let f = f.as_object().ok_or_else(|| config(format!("factor {i} must be an object")))?;
        let text = f
            .get("warp")
            .and_then(Value::as_str)
            .ok_or_else(|| config(format!("factor {i} needs a `warp` expression")))?;
        let warp = parse(text).map_err(|e| config(format!("factor {i} warp: {e}")))?;
        let deriv = match f.get("warp_deriv") {
            None | Some(Value::Null) => None,
            Some(v) => {
                let t = v.as_str().ok_or_else(|| config("`warp_deriv` must be a string"))?;
                Some(parse(t).map_err(|e| config(format!("factor {i} warp_deriv: {e}")))?)
            }
        };
        let factor = Factor {
            fiber: parse_fiber(f.get("fiber"))?,
            asym_a: parse_asymptote(f.get("asym_a"), &warp, &interval, End::A)?,
            asym_b: parse_asymptote(f.get("asym_b"), &warp, &interval, End::B)?,
            warp_text: None,
            deriv_text: None,
        };
        warps.push((warp, deriv, factor));
    }
    let name = obj.get("name").and_then(Value::as_str).unwrap_or("custom");
    SpacetimeModel::from_expressions(name, interval, warps)
}

/// Loads a model from its JSON description: either `{"builtin": name, ...}`
/// or an explicit interval with expression warps.
pub fn model_from_json(v: &Value) -> Result<SpacetimeModel, ModelError> {
    let obj = v.as_object().ok_or_else(|| config("model must be a JSON object"))?;
    let mut model = match obj.get("builtin") {
        Some(name) => {
            let name = name.as_str().ok_or_else(|| config("`builtin` must be a string"))?;
            builtin(obj, name)?
        }
        None => explicit_model(obj)?,
    };
    if obj.get("builtin").is_some() {
        if let Some(keep) = obj.get("keep") {
            let keep: Vec<usize> =
                serde_json::from_value(keep.clone()).map_err(|e| config(format!("bad `keep`: {e}")))?;
            if model.source().get("keep").is_none() {
                model = model.restrict(&keep)?;
            }
        }
    }
    Ok(model)
}

pub fn model_from_str(text: &str) -> Result<SpacetimeModel, ModelError> {
    let v: Value = serde_json::from_str(text).map_err(|e| config(format!("invalid JSON: {e}")))?;
    model_from_json(&v)
}

pub fn model_to_json(model: &SpacetimeModel) -> Value {
    model.source().clone()
}

pub(super) fn explicit_json(model: &SpacetimeModel) -> Value {
    let factors: Vec<Value> = model
        .factors
        .iter()
        .map(|f| {
            let fiber = match f.fiber.kind {
                FiberKind::Line => json!({"kind": "line"}),
                FiberKind::Abstract => json!({"kind": "abstract"}),
                FiberKind::Circle { radius } => json!({"kind": "circle", "radius": radius}),
                FiberKind::Sphere { radius } => json!({"kind": "sphere", "radius": radius}),
            };
            let mut fiber = fiber;
            fiber["strongly_convex"] = json!(f.fiber.strongly_convex);
            json!({
                "warp": f.warp_text,
                "warp_deriv": f.deriv_text,
                "asym_a": f.asym_a,
                "asym_b": f.asym_b,
                "fiber": fiber,
            })
        })
        .collect();
    json!({
        "name": model.name,
        "interval": {"a": ext_real::to_value(model.interval.a), "b": ext_real::to_value(model.interval.b)},
        "factors": factors,
    })
}
