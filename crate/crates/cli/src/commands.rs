//! The five subcommands. Each reads its block, writes its outputs through [`Run`], and
//! reports whether the run met its goal.

use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Value};

use ncac_core::adaptation::{adapt, AdaptationTrace, PhiModel, SpikingSubject};
use ncac_core::export::{
    fmt_f64, json_f64, pci_json, phi_bar_csv, phi_bar_json, phi_json, round_json, to_pretty, trace_csv,
};
use ncac_core::pci::{binarize_responses, pci, pci_trials, perturb_and_record, PciResult, REFERENCE_BAND};
use ncac_core::phi::{find_mip, phi_mean, PhiConfig, Weighting, WeightingKind};
use ncac_core::snn::{binarize_raster, run as simulate_net};
use ncac_core::{build_tpm, stationary_distribution, Tpm, MAX_STATE_NODES};

use crate::config::{AdaptCommand, OrderingSpec, PciCommand, PhiCommand, ReportCommand, SimulateConfig, SpikingSpec};
use crate::error::{CliError, CliResult};
use crate::load;
use crate::run::{Run, MANIFEST};

pub enum Outcome {
    Done,
    NotConverged,
}

pub fn simulate(run: &mut Run, cfg: &SimulateConfig) -> CliResult<Outcome> {
    let spec = load::spiking_spec(run, &cfg.network, "simulate.network")?;
    let mut net = load::build_spiking(run, &spec, "simulate.network")?;
    let stim = load::stimulus(run, &cfg.stimulus, cfg.steps, net.n(), "simulate.stimulus")?;
    let steps = cfg.steps.unwrap_or(stim.steps());
    if let Some(rule) = &cfg.stdp {
        rule.validate().map_err(|e| CliError::Input(format!("simulate.stdp: {e}")))?;
    }
    let raster = simulate_net(&mut net, &stim, steps, cfg.stdp.as_ref(), run.seed)?;
    let states = binarize_raster(&raster, cfg.bin_width)?;

    let mut raster_csv = String::from("step,neuron\n");
    for (step, neuron) in raster.events() {
        raster_csv.push_str(&format!("{step},{neuron}\n"));
    }
    let mut states_csv = String::from("bin,state\n");
    for (b, s) in states.iter().enumerate() {
        states_csv.push_str(&format!("{b},{}\n", s.index()));
    }
    run.write("raster.csv", &raster_csv)?;
    run.write("states.csv", &states_csv)?;
    run.write("weights.csv", &net.weights_csv(fmt_f64))?;
    Ok(Outcome::Done)
}

fn capacity_check(n: usize, cfg: &PhiConfig) -> CliResult<()> {
    let cap = cfg.max_nodes.min(MAX_STATE_NODES);
    if n > cap {
        return Err(ncac_core::Error::Capacity { nodes: n, cap, states: 1u128 << n.min(127) }.into());
    }
    Ok(())
}

fn phi_tpm(run: &mut Run, cfg: &PhiCommand) -> CliResult<Tpm> {
    match (&cfg.network, &cfg.tpm) {
        (Some(v), None) => {
            let net = load::causal_network(run, v, "phi.network")?;
            capacity_check(net.n(), &cfg.options)?;
            Ok(build_tpm(&net)?)
        }
        (None, Some(path)) => {
            let text = run.read_input(path)?;
            let tpm = Tpm::from_csv(&text).map_err(|e| CliError::Input(format!("{path}: {e}")))?;
            capacity_check(tpm.n(), &cfg.options)?;
            Ok(tpm)
        }
        _ => Err(CliError::Input("phi: give exactly one of `network` and `tpm`".into())),
    }
}

pub fn phi(run: &mut Run, cfg: &PhiCommand) -> CliResult<Outcome> {
    if cfg.state.is_none() && cfg.average.is_none() {
        return Err(CliError::Input("phi: give `state`, `average`, or both".into()));
    }
    let tpm = phi_tpm(run, cfg)?;
    if let Some(s) = &cfg.state {
        let s = load::state(s, tpm.n())?;
        let r = find_mip(&tpm, s, &cfg.options)?;
        run.write("phi.json", &to_pretty(&phi_json(&r)))?;
    }
    if let Some(kind) = cfg.average {
        let weighting = match kind {
            WeightingKind::Uniform => Weighting::Uniform,
            WeightingKind::Empirical => {
                let m = &cfg.measurement;
                Weighting::Empirical(stationary_distribution(&tpm, m.burn_in, m.samples, run.seed)?)
            }
        };
        let r = phi_mean(&tpm, &weighting, &cfg.options)?;
        run.write("phi_bar.csv", &phi_bar_csv(&r))?;
        run.write("phi_bar.json", &to_pretty(&phi_bar_json(&r)))?;
    }
    Ok(Outcome::Done)
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len().is_multiple_of(2) {
        (s[m - 1] + s[m]) / 2.0
    } else {
        s[m]
    }
}

fn pci_of(net: &ncac_core::snn::SpikingNetwork, cfg: &PciCommand, seed: u64) -> CliResult<PciResult> {
    let resp = perturb_and_record(net, &cfg.perturbation, seed)?;
    Ok(pci(&binarize_responses(&resp, cfg.k)?)?)
}

fn ordering(run: &mut Run, spec: &SpikingSpec, cfg: &PciCommand, ord: &OrderingSpec) -> CliResult<Value> {
    if ord.seeds.is_empty() {
        return Err(CliError::Input("pci.ordering.seeds must not be empty".into()));
    }
    // networks are built serially so the input log stays ordered
    let mut nets = Vec::with_capacity(ord.seeds.len());
    for &seed in &ord.seeds {
        let mut s = spec.clone();
        if let Some(r) = s.random.as_mut() {
            r.seed = seed;
        }
        let coupled = load::build_spiking(run, &s, "pci.network")?;
        let fragmented = coupled.pruned(ord.prune_fraction, seed.wrapping_add(ord.prune_seed_offset))?;
        nets.push((seed, coupled, fragmented));
    }
    let scores: Vec<(f64, f64)> = nets
        .par_iter()
        .map(|(seed, c, f)| Ok((pci_of(c, cfg, *seed)?.pci, pci_of(f, cfg, *seed)?.pci)))
        .collect::<CliResult<_>>()?;
    let coupled: Vec<f64> = scores.iter().map(|s| s.0).collect();
    let fragmented: Vec<f64> = scores.iter().map(|s| s.1).collect();
    let (mc, mf) = (median(&coupled), median(&fragmented));
    Ok(json!({
        "seeds": ord.seeds,
        "prune_fraction": json_f64(ord.prune_fraction),
        "coupled": coupled.iter().map(|&x| json_f64(x)).collect::<Vec<_>>(),
        "fragmented": fragmented.iter().map(|&x| json_f64(x)).collect::<Vec<_>>(),
        "median_coupled": json_f64(mc),
        "median_fragmented": json_f64(mf),
        "coupled_exceeds_fragmented": mc > mf,
        "reference_band": REFERENCE_BAND,
    }))
}

pub fn pci_cmd(run: &mut Run, cfg: &PciCommand) -> CliResult<Outcome> {
    let spec = load::spiking_spec(run, &cfg.network, "pci.network")?;
    let net = load::build_spiking(run, &spec, "pci.network")?;
    cfg.perturbation.validate(net.n()).map_err(|e| CliError::Input(format!("pci.perturbation: {e}")))?;
    let resp = perturb_and_record(&net, &cfg.perturbation, run.seed)?;
    let bin = binarize_responses(&resp, cfg.k)?;
    let r = pci(&bin)?;
    let mut out = pci_json(&r);
    out["in_reference_band"] = json!(r.in_reference_band());
    out["trials_pci"] = json_f64(pci_trials(&bin)?.pci);
    run.write("pci.json", &to_pretty(&out))?;
    run.write("binary.csv", &bin.to_csv())?;
    if let Some(ord) = &cfg.ordering {
        let report = ordering(run, &spec, cfg, ord)?;
        run.write("ordering.json", &to_pretty(&report))?;
    }
    Ok(Outcome::Done)
}

fn adapt_summary(trace: &AdaptationTrace, final_phi: Option<f64>) -> Value {
    json!({
        "converged": trace.converged,
        "stop_reason": trace.stop_reason.as_str(),
        "evals": trace.evals(),
        "best_loss": json_f64(trace.best_loss),
        "phi": final_phi.map(json_f64),
        "best_params": trace.best_params.iter().map(|&x| json_f64(x)).collect::<Vec<_>>(),
    })
}

fn best_phi(trace: &AdaptationTrace) -> Option<f64> {
    trace.entries.iter().find(|e| e.loss == trace.best_loss).and_then(|e| e.phi)
}

pub fn adapt_cmd(run: &mut Run, cfg: &AdaptCommand) -> CliResult<Outcome> {
    cfg.target.validate().map_err(|e| CliError::Input(format!("adapt.target: {e}")))?;
    let mut opt = cfg.optimizer;
    opt.seed = run.seed;
    opt.validate().map_err(|e| CliError::Input(format!("adapt.optimizer: {e}")))?;
    let mut measurement = cfg.measurement;
    measurement.seed = run.seed;
    let mut settings = json!({ "optimizer": opt, "measurement": measurement, "loss": cfg.loss, "phi": cfg.phi });
    round_json(&mut settings);
    run.record_setting("adapt", settings);
    let (network_json, trace) = match (&cfg.network, &cfg.spiking) {
        (Some(v), None) => {
            let net = load::causal_network(run, v, "adapt.network")?;
            capacity_check(net.n(), &cfg.phi)?;
            let (out, trace) = adapt(&net, &cfg.target, &opt, &cfg.loss, &cfg.phi, &measurement)?;
            (serde_json::from_str::<Value>(&out.to_json()).map_err(|e| CliError::Internal(e.to_string()))?, trace)
        }
        (None, Some(m)) => {
            let spec = load::spiking_spec(run, &m.network, "adapt.spiking.network")?;
            let net = load::build_spiking(run, &spec, "adapt.spiking.network")?;
            capacity_check(net.n(), &cfg.phi)?;
            let stimulus = load::stimulus(run, &m.stimulus, m.steps, net.n(), "adapt.spiking.stimulus")?;
            let subject = SpikingSubject { net, stimulus };
            if subject.parameters().is_empty() {
                return Err(CliError::Input("adapt.spiking.network has no synapses to adapt".into()));
            }
            let (out, trace) = adapt(&subject, &cfg.target, &opt, &cfg.loss, &cfg.phi, &measurement)?;
            let spec = load::describe_spiking(&out.net);
            (serde_json::to_value(&spec).map_err(|e| CliError::Internal(e.to_string()))?, trace)
        }
        _ => return Err(CliError::Input("adapt: give exactly one of `network` and `spiking`".into())),
    };
    let mut network_json = network_json;
    round_json(&mut network_json);
    run.write("network.json", &to_pretty(&network_json))?;
    run.write("trace.csv", &trace_csv(&trace))?;
    run.write("adapt.json", &to_pretty(&adapt_summary(&trace, best_phi(&trace))))?;
    Ok(if trace.converged { Outcome::Done } else { Outcome::NotConverged })
}

const REPORTABLE: [&str; 4] = ["phi.json", "phi_bar.csv", "pci.json", "trace.csv"];

fn read_json(run: &mut Run, path: &str) -> CliResult<Value> {
    let text = run.read_input(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{path}: {e}")))
}

fn csv_rows(text: &str) -> Vec<Vec<&str>> {
    text.lines().skip(1).filter(|l| !l.is_empty()).map(|l| l.split(',').collect()).collect()
}

pub fn report(run: &mut Run, cfg: &ReportCommand) -> CliResult<Outcome> {
    if cfg.runs.is_empty() {
        return Err(CliError::Input(format!(
            "report: no runs listed; expected run directories containing {MANIFEST} and at least one of {}",
            REPORTABLE.join(", ")
        )));
    }
    let mut blocks = Vec::new();
    let mut csv = String::from("series,run,x,y\n");
    for dir in &cfg.runs {
        let file = |name: &str| Path::new(dir).join(name).to_string_lossy().into_owned();
        if !run.resolve(&file(MANIFEST)).is_file() {
            return Err(CliError::Input(format!("report: missing input {}", file(MANIFEST))));
        }
        let manifest = read_json(run, &file(MANIFEST))?;
        let present: Vec<&str> = REPORTABLE.iter().copied().filter(|f| run.resolve(&file(f)).is_file()).collect();
        if present.is_empty() {
            return Err(CliError::Input(format!(
                "report: run {dir} has none of the expected files {}",
                REPORTABLE.iter().map(|f| file(f)).collect::<Vec<_>>().join(", ")
            )));
        }
        let mut block = json!({
            "run": dir,
            "command": manifest["command"],
            "seed": manifest["seed"],
            "config_sha256": manifest["config_sha256"],
        });
        if present.contains(&"phi.json") {
            block["phi"] = read_json(run, &file("phi.json"))?;
        }
        if present.contains(&"phi_bar.csv") {
            let text = run.read_input(&file("phi_bar.csv"))?;
            for row in csv_rows(&text) {
                csv.push_str(&format!("phi_state,{dir},{},{}\n", row[0], row[1]));
            }
            if run.resolve(&file("phi_bar.json")).is_file() {
                block["phi_bar"] = read_json(run, &file("phi_bar.json"))?;
            }
        }
        if present.contains(&"pci.json") {
            let p = read_json(run, &file("pci.json"))?;
            csv.push_str(&format!("pci,{dir},run,{}\n", p["pci"]));
            block["pci"] = p;
            if run.resolve(&file("ordering.json")).is_file() {
                let o = read_json(run, &file("ordering.json"))?;
                for cond in ["coupled", "fragmented"] {
                    let key = format!("median_{cond}");
                    csv.push_str(&format!("pci,{dir},{cond},{}\n", o[key.as_str()]));
                }
                block["ordering"] = o;
            }
        }
        if present.contains(&"trace.csv") {
            let text = run.read_input(&file("trace.csv"))?;
            let rows = csv_rows(&text);
            let mut best = f64::INFINITY;
            for row in &rows {
                let loss: f64 = row[1].parse().unwrap_or(f64::NAN);
                best = best.min(loss);
                csv.push_str(&format!("loss,{dir},{},{}\n", row[0], row[1]));
                csv.push_str(&format!("best_loss,{dir},{},{}\n", row[0], fmt_f64(best)));
            }
            block["adapt"] = json!({
                "evals": rows.len(),
                "best_loss": json_f64(best),
                "stop_reason": rows.last().map(|r| r[3]),
            });
            if run.resolve(&file("adapt.json")).is_file() {
                block["adapt"]["summary"] = read_json(run, &file("adapt.json"))?;
            }
        }
        blocks.push(block);
    }
    run.write("report.json", &to_pretty(&json!({ "runs": blocks, "reference_band": REFERENCE_BAND })))?;
    run.write("report.csv", &csv)?;
    Ok(Outcome::Done)
}
