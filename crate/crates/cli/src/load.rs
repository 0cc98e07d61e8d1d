//! Turning config values into networks, stimuli and states.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde_json::Value;

use ncac_core::snn::{SpikingNetwork, Stimulus};
use ncac_core::{CausalNetwork, NetworkFile, SystemState};

use crate::config::{SpikingSpec, SynapseSpec};
use crate::error::{json_error, CliError, CliResult};
use crate::run::Run;

/// A value that is either a path to a JSON file or the object itself.
pub fn load_source<T: DeserializeOwned>(run: &mut Run, v: &Value, what: &str) -> CliResult<T> {
    match v {
        Value::String(path) => {
            let text = run.read_input(path)?;
            serde_json::from_str(&text).map_err(|e| json_error(path, &e))
        }
        Value::Object(_) => serde_json::from_value(v.clone()).map_err(|e| json_error(what, &e)),
        _ => Err(CliError::Input(format!("{what}: expected a file path or an inline object"))),
    }
}

pub fn causal_network(run: &mut Run, v: &Value, what: &str) -> CliResult<CausalNetwork> {
    let file: NetworkFile = load_source(run, v, what)?;
    file.into_network().map_err(|e| CliError::Input(format!("{what}: {e}")))
}

pub fn spiking_spec(run: &mut Run, v: &Value, what: &str) -> CliResult<SpikingSpec> {
    load_source(run, v, what)
}

pub fn build_spiking(run: &mut Run, spec: &SpikingSpec, what: &str) -> CliResult<SpikingNetwork> {
    let bad = |e: ncac_core::Error| CliError::Input(format!("{what}: {e}"));
    let graph = match &spec.graph {
        Some(g) => Some((causal_network(run, &g.network, &format!("{what}.graph.network"))?, g)),
        None => None,
    };
    let n = match (spec.n, &graph) {
        (Some(n), Some((g, _))) if n != g.n() => {
            return Err(CliError::Input(format!("{what}: n = {n} but the graph has {} nodes", g.n())))
        }
        (Some(n), _) => n,
        (None, Some((g, _))) => g.n(),
        (None, None) => return Err(CliError::Input(format!("{what}: n is required without a graph"))),
    };
    let mut net = match &graph {
        Some((g, w)) => SpikingNetwork::from_graph(g, spec.params, w.delay, w.weight_scale).map_err(bad)?,
        None => SpikingNetwork::new(n, spec.params).map_err(bad)?,
    };
    net.enable_self_synapses(spec.allow_self);
    if let Some(r) = &spec.random {
        if !(0.0..=1.0).contains(&r.p) || r.delays[0] == 0 || r.delays[0] > r.delays[1] || r.jitter[0] > r.jitter[1] {
            return Err(CliError::Input(format!(
                "{what}.random: need 0 <= p <= 1, 1 <= delays[0] <= delays[1] and jitter[0] <= jitter[1]"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
        for pre in 0..n {
            for post in 0..n {
                if pre != post && rng.random::<f64>() < r.p {
                    let d = rng.random_range(r.delays[0]..=r.delays[1]);
                    let w = if r.jitter[0] < r.jitter[1] {
                        r.weight * rng.random_range(r.jitter[0]..r.jitter[1])
                    } else {
                        r.weight * r.jitter[0]
                    };
                    net.connect(pre, post, w, d).map_err(bad)?;
                }
            }
        }
    }
    for (k, s) in spec.synapses.iter().enumerate() {
        net.connect(s.pre, s.post, s.w, s.delay)
            .map_err(|e| CliError::Input(format!("{what}.synapses[{k}] ({} -> {}): {e}", s.pre, s.post)))?;
    }
    net.set_input_noise(spec.input_noise).map_err(bad)?;
    if let Some(g) = &spec.input_gain {
        net.set_input_gain(g.clone()).map_err(bad)?;
    }
    Ok(net)
}

/// Explicit description of a built network, suitable for writing back out.
pub fn describe_spiking(net: &SpikingNetwork) -> SpikingSpec {
    let synapses: Vec<SynapseSpec> = net
        .synapses()
        .into_iter()
        .map(|(pre, post)| SynapseSpec { pre, post, w: net.weight(pre, post), delay: net.delay(pre, post) })
        .collect();
    let gain = net.input_gain();
    SpikingSpec {
        n: Some(net.n()),
        params: net.params()[0],
        allow_self: synapses.iter().any(|s| s.pre == s.post),
        synapses,
        random: None,
        graph: None,
        input_noise: net.input_noise(),
        input_gain: if gain.iter().all(|&g| g == 1.0) { None } else { Some(gain.to_vec()) },
    }
}

/// Constant current (number), CSV file (string) or nothing (null).
pub fn stimulus(run: &mut Run, v: &Value, steps: Option<usize>, n: usize, what: &str) -> CliResult<Stimulus> {
    let need_steps = || steps.ok_or_else(|| CliError::Input(format!("{what}: `steps` is required")));
    match v {
        Value::Null => Ok(Stimulus::zeros(need_steps()?, n)),
        Value::Number(x) => {
            let x = x.as_f64().unwrap_or(f64::NAN);
            if !x.is_finite() {
                return Err(CliError::Input(format!("{what}: constant current must be finite")));
            }
            Ok(Stimulus::constant(need_steps()?, n, x))
        }
        Value::String(path) => {
            let text = run.read_input(path)?;
            let s = Stimulus::from_csv(&text).map_err(|e| CliError::Input(format!("{path}: {e}")))?;
            if s.n() != n {
                return Err(CliError::Input(format!("{path}: {} columns for {n} neurons", s.n())));
            }
            if let Some(t) = steps {
                if t > s.steps() {
                    return Err(CliError::Input(format!("{path}: {} rows but steps = {t}", s.steps())));
                }
            }
            Ok(s)
        }
        _ => Err(CliError::Input(format!("{what}: expected a number, a CSV path or null"))),
    }
}

pub fn state(v: &Value, n: usize) -> CliResult<SystemState> {
    let bad = |e: ncac_core::Error| CliError::Input(format!("phi.state: {e}"));
    match v {
        Value::Number(x) => {
            let idx = x.as_u64().ok_or_else(|| CliError::Input("phi.state: expected a non-negative integer".into()))?;
            SystemState::new(n, idx as usize).map_err(bad)
        }
        Value::Array(bits) => {
            let bits: Vec<u8> = bits
                .iter()
                .map(|b| match b.as_u64() {
                    Some(0) => Ok(0),
                    Some(1) => Ok(1),
                    _ => Err(CliError::Input("phi.state: bits must be 0 or 1".into())),
                })
                .collect::<CliResult<_>>()?;
            if bits.len() != n {
                return Err(CliError::Input(format!("phi.state: {} bits for {n} nodes", bits.len())));
            }
            SystemState::from_bits(&bits).map_err(bad)
        }
        _ => Err(CliError::Input("phi.state: expected an index or a bit array".into())),
    }
}
