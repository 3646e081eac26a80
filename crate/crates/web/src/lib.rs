//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export returns a JSON string. The `*_json` functions do the work and
//! are plain Rust so they can be tested natively.

use ifrepair::bounds::{ibp_output, symbolic_output_bounds};
use ifrepair::calibrate::CalibrationConfig;
use ifrepair::encode::RepairMode;
use ifrepair::pipeline::{build_program, run_repair, RepairConfig};
use ifrepair::schema::split_repair_sets;
use ifrepair::solver::{solve_milp, MilpStatus};
use ifrepair::synth::{accuracy, generate, SynthConfig};
use ifrepair::verify::{certify_box, cur, exact_range, FairStatus, VerifyConfig};
use ifrepair::{running, InputBox, Mlp};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const MAX_GRID: usize = 200;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Box `[0, x1_max] x [-x2_radius, x2_radius]` around the running example.
fn running_box(x1_max: f64, x2_radius: f64) -> Result<InputBox, String> {
    if !(x1_max.is_finite() && x1_max > 0.0 && x2_radius.is_finite() && x2_radius >= 0.0) {
        return Err(format!(
            "need x1_max > 0 and x2_radius >= 0, got {x1_max} and {x2_radius}"
        ));
    }
    InputBox::new(vec![0.0, -x2_radius], vec![x1_max, x2_radius]).map_err(err)
}

fn status(s: FairStatus) -> &'static str {
    match s {
        FairStatus::CertifiedFair => "fair",
        FairStatus::CertifiedUnfair => "unfair",
        FairStatus::Undecided => "undecided",
    }
}

fn centre(b: &InputBox) -> Vec<f64> {
    b.lower.iter().zip(&b.upper).map(|(l, u)| 0.5 * (l + u)).collect()
}

fn range_json(net: &Mlp, b: &InputBox) -> Result<Value, String> {
    let ex = exact_range(net, b).map_err(err)?;
    Ok(json!({ "min": ex.min, "max": ex.max, "argmin": ex.argmin, "argmax": ex.argmax }))
}

/// Output samples on a `grid x grid` lattice, row by row from `x2` low to high.
fn sample_grid(net: &Mlp, b: &InputBox, grid: usize) -> Result<Vec<f64>, String> {
    let step = |lo: f64, hi: f64, k: usize| {
        if grid == 1 {
            lo
        } else {
            lo + (hi - lo) * k as f64 / (grid - 1) as f64
        }
    };
    let mut out = Vec::with_capacity(grid * grid);
    for r in 0..grid {
        let x2 = step(b.lower[1], b.upper[1], r);
        for c in 0..grid {
            out.push(net.forward(&[step(b.lower[0], b.upper[0], c), x2]).map_err(err)?);
        }
    }
    Ok(out)
}

/// Interval, symbolic and exact output ranges of the running example.
pub fn bounds_json(x1_max: f64, x2_radius: f64, grid: usize) -> Result<String, String> {
    let b = running_box(x1_max, x2_radius)?;
    let grid = grid.clamp(1, MAX_GRID);
    let net = running::network();
    let ibp = ibp_output(&net, &b).map_err(err)?;
    let sym = symbolic_output_bounds(&net, &b).map_err(err)?;
    let cert = certify_box(&net, &b, &centre(&b), &VerifyConfig::default()).map_err(err)?;
    Ok(json!({
        "box": { "lower": b.lower, "upper": b.upper },
        "interval": [ibp.0, ibp.1],
        "symbolic": [sym.0, sym.1],
        "exact": range_json(&net, &b)?,
        "status": status(cert.status),
        "witness": cert.witness,
        "grid": { "n": grid, "values": sample_grid(&net, &b, grid)? },
    })
    .to_string())
}

/// Naive and symbolic repair of the running example over the given box.
pub fn repair_json(x1_max: f64, x2_radius: f64, delta_max: f64) -> Result<String, String> {
    let b = running_box(x1_max, x2_radius)?;
    let net = running::network();
    let mut modes = Vec::new();
    for mode in [RepairMode::Naive, RepairMode::Symbolic] {
        let mut cfg = RepairConfig {
            mode,
            calibration: CalibrationConfig {
                max_iter: 0,
                ..CalibrationConfig::default()
            },
            ..RepairConfig::default()
        };
        cfg.encode.delta_max = delta_max;
        cfg.encode.validate().map_err(err)?;
        let prog = build_program(&net, std::slice::from_ref(&b), &cfg, &cfg.encode).map_err(err)?;
        let sol = solve_milp(&prog.problem, &cfg.limits).map_err(err)?;
        let entry = match sol.status {
            MilpStatus::Optimal => {
                let delta = prog.delta(sol.values().map_err(err)?);
                let repaired = net.apply_repair(&delta).map_err(err)?;
                let cert = certify_box(&repaired, &b, &centre(&b), &VerifyConfig::default()).map_err(err)?;
                json!({
                    "mode": mode.to_string(),
                    "objective": sol.objective,
                    "delta_w": delta.delta_w,
                    "delta_b": delta.delta_b,
                    "nodes": sol.nodes,
                    "range": range_json(&repaired, &b)?,
                    "status": status(cert.status),
                    "variables": prog.problem.num_vars(),
                    "constraints": prog.problem.num_cons(),
                })
            }
            MilpStatus::Infeasible => json!({
                "mode": mode.to_string(),
                "error": format!("no repair within |delta| <= {delta_max}"),
            }),
            MilpStatus::Timeout => json!({ "mode": mode.to_string(), "error": "node limit reached" }),
        };
        modes.push(entry);
    }
    Ok(json!({ "box": { "lower": b.lower, "upper": b.upper }, "modes": modes }).to_string())
}

/// Generate a synthetic instance, repair it, and report metrics before and after.
pub fn synthetic_json(seed: u64, inputs: usize, hidden: &str, n: usize, symbolic: bool) -> Result<String, String> {
    let hidden: Vec<usize> = hidden
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| format!("hidden widths {hidden:?}: {e}"))
        })
        .collect::<Result<_, _>>()?;
    if inputs > 10 || hidden.len() > 3 || hidden.iter().any(|&h| h > 32) || n > 30 {
        return Err("demo limits: at most 10 inputs, 3 hidden layers of width 32, 30 repair points".into());
    }
    let (data, net, schema) = generate(&SynthConfig::new(seed, inputs, hidden, 1.0)).map_err(err)?;
    let split = split_repair_sets(&data, n, 100, seed).map_err(err)?;
    let points = split.repair.inputs();
    let cfg = RepairConfig {
        mode: if symbolic {
            RepairMode::Symbolic
        } else {
            RepairMode::Naive
        },
        ..RepairConfig::default()
    };
    let verify = VerifyConfig::default();
    let before = cur(&net, &schema, &points, &verify).map_err(err)?;
    let out = run_repair(&net, &schema, &points, &split.calibration, &cfg).map_err(err)?;
    let after = cur(&out.model, &schema, &points, &verify).map_err(err)?;
    let acc = |m: &Mlp| accuracy(m, &split.test).map_err(err);
    Ok(json!({
        "dims": net.dims(),
        "mode": cfg.mode.to_string(),
        "objective": out.objective,
        "already_fair": out.already_fair,
        "nodes": out.nodes,
        "accuracy": { "before": acc(&net)?, "calibrated": acc(&out.calibrated)?, "after": acc(&out.model)? },
        "cur": { "before": before.rate(), "after": after.rate() },
        "l_fair": out.trace.records.iter().map(|r| r.0).collect::<Vec<_>>(),
        "l_bce": out.trace.records.iter().map(|r| r.1).collect::<Vec<_>>(),
    })
    .to_string())
}

#[wasm_bindgen]
pub fn bounds(x1_max: f64, x2_radius: f64, grid: usize) -> Result<String, JsValue> {
    bounds_json(x1_max, x2_radius, grid).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn repair(x1_max: f64, x2_radius: f64, delta_max: f64) -> Result<String, JsValue> {
    repair_json(x1_max, x2_radius, delta_max).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn synthetic(seed: u32, inputs: usize, hidden: &str, n: usize, symbolic: bool) -> Result<String, JsValue> {
    synthetic_json(u64::from(seed), inputs, hidden, n, symbolic).map_err(|e| JsValue::from_str(&e))
}
