use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::{json, Value};

fn ncac(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_ncac"))
        .args(args)
        .current_dir(dir)
        .env("NCAC_THREADS", "2")
        .output()
        .expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn write_json(dir: &Path, name: &str, v: &Value) {
    fs::write(dir.join(name), serde_json::to_string_pretty(v).unwrap()).unwrap();
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn copy_pair() -> Value {
    json!({
        "n": 2,
        "nodes": [{"id": 0, "kind": "copy"}, {"id": 1, "kind": "copy"}],
        "edges": [{"src": 0, "dst": 1, "w": 1.0}, {"src": 1, "dst": 0, "w": 1.0}]
    })
}

/// First step index `k` (1-based) at which the Euler recursion from zero reaches the
/// threshold: `v_k = RI (1 - (1 - dt/tau)^k)`.
fn euler_period(r_i: f64, v_th: f64, dt: f64, tau: f64) -> usize {
    ((1.0 - v_th / r_i).ln() / (1.0 - dt / tau).ln()).ceil() as usize
}

#[test]
fn simulate_single_neuron_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let current = 1.37;
    let steps = 20_000;
    write_json(
        dir.path(),
        "sim.json",
        &json!({
            "seed": 4,
            "simulate": {
                "network": {"n": 1, "params": {"tau_m": 10.0, "v_rest": 0.0, "v_reset": 0.0, "v_th": 1.0, "r_m": 1.0, "t_ref": 0.0, "dt": 0.1}},
                "steps": steps,
                "stimulus": current,
                "bin_width": 10
            }
        }),
    );
    let (code, err) = ncac(dir.path(), &["simulate", "--config", "sim.json", "--out", "a"]);
    assert_eq!(code, 0, "{err}");
    for f in ["raster.csv", "states.csv", "weights.csv", "manifest.json"] {
        assert!(dir.path().join("a").join(f).is_file(), "{f}");
    }
    let raster = fs::read_to_string(dir.path().join("a/raster.csv")).unwrap();
    assert!(raster.starts_with("step,neuron\n"));
    let spikes = raster.lines().count() - 1;
    let period = euler_period(current, 1.0, 0.1, 10.0);
    assert_eq!(spikes, steps / period);
    // the continuous-time interval agrees to within the Euler error
    let isi = 10.0 * (current / (current - 1.0)).ln();
    let expected = steps as f64 * 0.1 / isi;
    assert!((spikes as f64 - expected).abs() / expected < 0.02);

    let (code, _) = ncac(dir.path(), &["simulate", "--config", "sim.json", "--out", "b"]);
    assert_eq!(code, 0);
    assert_eq!(raster, fs::read_to_string(dir.path().join("b/raster.csv")).unwrap());
}

#[test]
fn simulate_rejects_bad_edges() {
    let dir = tempfile::tempdir().unwrap();
    let mut graph = copy_pair();
    graph["edges"][1]["src"] = json!(3);
    write_json(dir.path(), "graph.json", &graph);
    write_json(
        dir.path(),
        "sim.json",
        &json!({"simulate": {"network": {"graph": {"network": "graph.json"}}, "steps": 10}}),
    );
    let (code, err) = ncac(dir.path(), &["simulate", "--config", "sim.json"]);
    assert_eq!(code, 2);
    assert!(err.contains("edge 1 (3 -> 0)"), "{err}");

    write_json(
        dir.path(),
        "sim2.json",
        &json!({"simulate": {"network": {"n": 2, "synapses": [{"pre": 0, "post": 5, "w": 1.0}]}, "steps": 10}}),
    );
    let (code, err) = ncac(dir.path(), &["simulate", "--config", "sim2.json"]);
    assert_eq!(code, 2);
    assert!(err.contains("synapses[0] (0 -> 5)"), "{err}");
}

#[test]
fn unknown_keys_are_rejected_with_location() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), "{\n  \"phi\": {\n    \"network\": \"x.json\",\n    \"stat\": 1\n  }\n}\n").unwrap();
    let (code, err) = ncac(dir.path(), &["phi", "--config", "c.json"]);
    assert_eq!(code, 2);
    assert!(err.contains("unknown field `stat`") && err.contains("line 4"), "{err}");

    let (code, err) = ncac(dir.path(), &["pci", "--config", "missing.json"]);
    assert_eq!(code, 2);
    assert!(err.contains("missing.json"), "{err}");

    write_json(dir.path(), "d.json", &json!({"seed": 1}));
    let (code, err) = ncac(dir.path(), &["adapt", "--config", "d.json"]);
    assert_eq!(code, 2);
    assert!(err.contains("`adapt`"), "{err}");
}

#[test]
fn phi_copy_pair_disconnected_and_capacity() {
    let dir = tempfile::tempdir().unwrap();
    write_json(dir.path(), "copy.json", &copy_pair());
    write_json(
        dir.path(),
        "phi.json",
        &json!({"phi": {"network": "copy.json", "state": [1, 0], "options": {"direction": "effect"}}}),
    );
    let (code, err) = ncac(dir.path(), &["phi", "--config", "phi.json", "--out", "copy"]);
    assert_eq!(code, 0, "{err}");
    let r = read_json(&dir.path().join("copy/phi.json"));
    assert!((r["phi"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    assert_eq!(r["state"], json!(1));
    assert_eq!(r["mip"], json!({"a": 1, "b": 2}));

    let lonely = json!({
        "n": 3,
        "nodes": [{"id": 0, "kind": "copy"}, {"id": 1, "kind": "xor"}, {"id": 2, "kind": "majority"}],
        "edges": [{"src": 0, "dst": 0, "w": 1.0}, {"src": 1, "dst": 1, "w": 1.0}, {"src": 2, "dst": 2, "w": 1.0}]
    });
    write_json(dir.path(), "dis.json", &json!({"phi": {"network": lonely, "average": "uniform"}}));
    let (code, err) = ncac(dir.path(), &["phi", "--config", "dis.json", "--out", "dis"]);
    assert_eq!(code, 0, "{err}");
    let csv = fs::read_to_string(dir.path().join("dis/phi_bar.csv")).unwrap();
    assert!(csv.starts_with("state,phi,weight\n"));
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(1) == Some("0")), "{csv}");
    assert_eq!(read_json(&dir.path().join("dis/phi_bar.json"))["phi_bar"], json!(0.0));

    let nodes: Vec<Value> = (0..17).map(|i| json!({"id": i, "kind": "or"})).collect();
    let edges: Vec<Value> = (0..17).map(|i| json!({"src": i, "dst": (i + 1) % 17, "w": 1.0})).collect();
    write_json(
        dir.path(),
        "big.json",
        &json!({"phi": {"network": {"n": 17, "nodes": nodes, "edges": edges}, "state": 0}}),
    );
    let (code, err) = ncac(dir.path(), &["phi", "--config", "big.json", "--out", "big"]);
    assert_eq!(code, 3);
    assert!(err.contains("2^17 = 131072"), "{err}");
}

#[test]
fn phi_from_tpm_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("t.csv"), "node,s0,s1,s2,s3\n0,0,0,1,1\n1,0,1,0,1\n").unwrap();
    write_json(dir.path(), "c.json", &json!({"phi": {"tpm": "t.csv", "state": 2, "options": {"direction": "effect"}}}));
    let (code, err) = ncac(dir.path(), &["phi", "--config", "c.json"]);
    assert_eq!(code, 0, "{err}");
    let r = read_json(&dir.path().join("out/phi/phi.json"));
    assert!((r["phi"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    let m = read_json(&dir.path().join("out/phi/manifest.json"));
    assert_eq!(m["inputs"][0]["path"], json!("t.csv"));
}

fn pci_config(amplitude: f64, ordering: bool) -> Value {
    let mut v = json!({
        "seed": 3,
        "pci": {
            "network": {
                "n": 12,
                "params": {"tau_m": 10.0, "v_rest": 0.0, "v_reset": 0.0, "v_th": 1.0, "r_m": 1.0, "t_ref": 2.0, "dt": 0.1},
                "random": {"p": 0.3, "weight": 40.0, "seed": 1},
                "input_noise": 1.0
            },
            "perturbation": {
                "target_neurons": [0, 1, 2],
                "amplitude": amplitude,
                "duration_steps": 5,
                "trials": 10,
                "baseline_steps": 100,
                "response_steps": 150,
                "background": 0.7
            }
        }
    });
    if ordering {
        v["pci"]["ordering"] = json!({"seeds": [0, 1, 2]});
    }
    v
}

#[test]
fn pci_outputs_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    write_json(dir.path(), "p.json", &pci_config(200.0, true));
    for out in ["a", "b"] {
        let (code, err) = ncac(dir.path(), &["pci", "--config", "p.json", "--out", out]);
        assert_eq!(code, 0, "{err}");
    }
    for f in ["pci.json", "binary.csv", "ordering.json"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        assert_eq!(a, fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
    }
    let r = read_json(&dir.path().join("a/pci.json"));
    assert_eq!(r["reference_band"], json!([0.31, 0.7]));
    assert_eq!(r["k"], json!(3.0));
    assert!(r["pci"].as_f64().unwrap() > 0.0);
    let o = read_json(&dir.path().join("a/ordering.json"));
    assert_eq!(o["coupled"].as_array().unwrap().len(), 3);
    let binary = fs::read_to_string(dir.path().join("a/binary.csv")).unwrap();
    assert_eq!(binary.lines().count(), 150);
    assert!(binary.lines().all(|l| l.split(',').count() == 12));
}

#[test]
fn pci_zero_amplitude() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = pci_config(0.0, false);
    cfg["pci"]["network"]["random"]["p"] = json!(0.0);
    write_json(dir.path(), "p.json", &cfg);
    let (code, err) = ncac(dir.path(), &["pci", "--config", "p.json"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(read_json(&dir.path().join("out/pci/pci.json"))["pci"], json!(0.0));
}

fn triad(w: [f64; 6]) -> Value {
    let pairs = [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)];
    let nodes: Vec<Value> = (0..3).map(|i| json!({"id": i, "kind": "threshold", "theta": 0.5, "beta": 4.0})).collect();
    let edges: Vec<Value> = pairs.iter().zip(w).map(|(&(s, d), w)| json!({"src": s, "dst": d, "w": w})).collect();
    json!({"n": 3, "nodes": nodes, "edges": edges})
}

#[test]
fn adapt_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    write_json(dir.path(), "net.json", &triad([0.0; 6]));
    write_json(
        dir.path(),
        "far.json",
        &json!({"adapt": {
            "network": "net.json",
            "target": [{"state": 0, "phi_star": 10.0}],
            "optimizer": {"max_evals": 60, "stagnation_window": 30},
            "phi": {"parallel": false}
        }}),
    );
    let (code, _) = ncac(dir.path(), &["adapt", "--config", "far.json", "--out", "far"]);
    assert_eq!(code, 4);
    let trace = fs::read_to_string(dir.path().join("far/trace.csv")).unwrap();
    assert!(trace.starts_with("eval,loss,phi,stop_reason\n"));
    assert!(dir.path().join("far/manifest.json").is_file());
    assert!(dir.path().join("far/network.json").is_file());

    // the zero-weight triad has uniform Φ̄ = 0, so a zero target is met immediately
    write_json(
        dir.path(),
        "met.json",
        &json!({"adapt": {"network": "net.json", "target": [{"averaged": "uniform", "phi_star": 0.0}]}}),
    );
    let (code, err) = ncac(dir.path(), &["adapt", "--config", "met.json", "--out", "met"]);
    assert_eq!(code, 0, "{err}");
    let trace = fs::read_to_string(dir.path().join("met/trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 2, "{trace}");
    assert!(trace.ends_with(",tol\n"));
    let adapted = read_json(&dir.path().join("met/network.json"));
    assert_eq!(adapted, serde_json::from_str::<Value>(&fs::read_to_string(dir.path().join("net.json")).unwrap()).unwrap());
}

#[test]
fn adapt_spiking_writes_network() {
    let dir = tempfile::tempdir().unwrap();
    write_json(
        dir.path(),
        "s.json",
        &json!({"adapt": {
            "spiking": {
                "network": {"n": 3, "input_noise": 2.0, "synapses": [
                    {"pre": 0, "post": 1, "w": 5.0, "delay": 2},
                    {"pre": 1, "post": 2, "w": 5.0, "delay": 2},
                    {"pre": 2, "post": 0, "w": 5.0, "delay": 2}
                ]},
                "stimulus": 1.2,
                "steps": 2000
            },
            "target": [{"averaged": "empirical", "phi_star": 0.3}],
            "optimizer": {"max_evals": 12, "weight_bounds": [-20.0, 20.0]},
            "phi": {"parallel": false}
        }}),
    );
    let (code, err) = ncac(dir.path(), &["adapt", "--config", "s.json"]);
    assert!(code == 0 || code == 4, "{err}");
    let net = read_json(&dir.path().join("out/adapt/network.json"));
    assert_eq!(net["synapses"].as_array().unwrap().len(), 3);
    assert_eq!(net["n"], json!(3));
}

#[test]
fn report_lists_missing_inputs_and_merges_runs() {
    let dir = tempfile::tempdir().unwrap();
    write_json(dir.path(), "empty.json", &json!({"report": {"runs": []}}));
    let (code, err) = ncac(dir.path(), &["report", "--config", "empty.json"]);
    assert_eq!(code, 2);
    assert!(err.contains("manifest.json") && err.contains("pci.json"), "{err}");

    write_json(dir.path(), "gone.json", &json!({"report": {"runs": ["nowhere"]}}));
    let (code, err) = ncac(dir.path(), &["report", "--config", "gone.json"]);
    assert_eq!(code, 2);
    assert!(err.contains("nowhere/manifest.json"), "{err}");

    write_json(dir.path(), "copy.json", &copy_pair());
    write_json(dir.path(), "phi.json", &json!({"phi": {"network": "copy.json", "state": 1, "average": "uniform"}}));
    assert_eq!(ncac(dir.path(), &["phi", "--config", "phi.json", "--out", "runs/phi"]).0, 0);
    write_json(dir.path(), "p.json", &pci_config(200.0, false));
    assert_eq!(ncac(dir.path(), &["pci", "--config", "p.json", "--out", "runs/pci"]).0, 0);
    write_json(dir.path(), "rep.json", &json!({"report": {"runs": ["runs/phi", "runs/pci"]}}));
    for out in ["r1", "r2"] {
        let (code, err) = ncac(dir.path(), &["report", "--config", "rep.json", "--out", out]);
        assert_eq!(code, 0, "{err}");
    }
    let rep = read_json(&dir.path().join("r1/report.json"));
    let runs = rep["runs"].as_array().unwrap();
    assert!(runs[0].get("phi").is_some() && runs[0].get("phi_bar").is_some());
    assert!(runs[1].get("pci").is_some());
    for f in ["report.json", "report.csv"] {
        assert_eq!(fs::read(dir.path().join("r1").join(f)).unwrap(), fs::read(dir.path().join("r2").join(f)).unwrap());
    }
    let csv = fs::read_to_string(dir.path().join("r1/report.csv")).unwrap();
    assert!(csv.starts_with("series,run,x,y\n") && csv.contains("phi_state,runs/phi,0,") && csv.contains("pci,runs/pci,run,"));
}

#[test]
fn seed_flag_changes_noise() {
    let dir = tempfile::tempdir().unwrap();
    write_json(
        dir.path(),
        "sim.json",
        &json!({"simulate": {"network": {"n": 3, "input_noise": 3.0}, "steps": 2000, "stimulus": 0.8}}),
    );
    assert_eq!(ncac(dir.path(), &["simulate", "--config", "sim.json", "--seed", "1", "--out", "s1"]).0, 0);
    assert_eq!(ncac(dir.path(), &["simulate", "--config", "sim.json", "--seed", "2", "--out", "s2"]).0, 0);
    let a = fs::read(dir.path().join("s1/raster.csv")).unwrap();
    assert_ne!(a, fs::read(dir.path().join("s2/raster.csv")).unwrap());
    assert_eq!(read_json(&dir.path().join("s2/manifest.json"))["seed"], json!(2));
}
