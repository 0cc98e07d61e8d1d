//! Stable serialization of results: floats are rounded to 12 significant digits so output
//! files are byte-identical across reruns and platforms.

use serde_json::{json, Value};

use crate::adaptation::AdaptationTrace;
use crate::pci::{PciResult, REFERENCE_BAND};
use crate::phi::{PhiBarResult, PhiResult};

pub const SIGNIFICANT_DIGITS: usize = 12;

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits. Non-finite values pass through.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().expect("formatted float parses")
}

/// Shortest decimal text of the rounded value.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{}", round_sig(x))
    }
}

/// JSON number for `x`, or `null` when it is not finite.
pub fn json_f64(x: f64) -> Value {
    if x.is_finite() {
        json!(round_sig(x))
    } else {
        Value::Null
    }
}

/// Recursively rounds every float in a JSON value.
pub fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => *v = json_f64(n.as_f64().unwrap_or(f64::NAN)),
        Value::Array(a) => a.iter_mut().for_each(round_json),
        Value::Object(o) => o.values_mut().for_each(round_json),
        _ => {}
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

pub fn phi_json(r: &PhiResult) -> Value {
    let cut = |a: u32, b: u32| json!({ "a": a, "b": b });
    json!({
        "state": r.state.index(),
        "phi": json_f64(r.phi),
        "direction": r.direction.as_str(),
        "mip": r.mip.map(|m| cut(m.part_a(), m.part_b())),
        "partitions": r.per_partition.iter().map(|p| json!({
            "a": p.cut.part_a(),
            "b": p.cut.part_b(),
            "ei": json_f64(p.ei),
            "nei": json_f64(p.nei),
        })).collect::<Vec<_>>(),
        "cause_phi": r.cause.as_ref().map(|c| json_f64(c.phi)),
        "effect_phi": r.effect.as_ref().map(|e| json_f64(e.phi)),
        "unreachable": r.unreachable,
    })
}

/// `state,phi,weight`, one row per state.
pub fn phi_bar_csv(r: &PhiBarResult) -> String {
    let mut out = String::from("state,phi,weight\n");
    for ((s, phi), w) in r.per_state.iter().zip(&r.weights) {
        out.push_str(&format!("{},{},{}\n", s.index(), fmt_f64(*phi), fmt_f64(*w)));
    }
    out
}

pub fn phi_bar_json(r: &PhiBarResult) -> Value {
    json!({
        "phi_bar": json_f64(r.phi_bar),
        "weighting": r.weighting,
        "states": r.per_state.len(),
        "unreachable": r.unreachable.iter().map(|s| s.index()).collect::<Vec<_>>(),
    })
}

pub fn pci_json(r: &PciResult) -> Value {
    json!({
        "pci": json_f64(r.pci),
        "lz": r.lz_count,
        "length": r.sequence_length,
        "entropy": json_f64(r.source_entropy),
        "k": r.k.map_or(Value::Null, json_f64),
        "reference_band": [REFERENCE_BAND[0], REFERENCE_BAND[1]],
    })
}

pub fn trace_csv(t: &AdaptationTrace) -> String {
    t.to_csv(fmt_f64)
}
