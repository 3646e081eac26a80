//! End-to-end repair: calibrate, bound, encode, solve, apply, certify.

use std::time::Duration;

use crate::bounds::{ibp_concrete, symbolic_bounds_with, SymbolicOptions};
use crate::calibrate::{calibrate, CalibrationConfig, CalibrationTrace};
use crate::encode::{build_naive, build_symbolic, EncodeConfig, RepairMode, RepairProgram};
use crate::error::{Error, Result};
use crate::model::{FinalLayerDelta, Mlp};
use crate::schema::{AttributeSchema, Dataset, InputBox};
use crate::solver::{solve_milp, MilpLimits, MilpStatus};
use crate::verify::{certify_box, FairStatus, VerifyConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct RepairConfig {
    pub mode: RepairMode,
    pub calibration: CalibrationConfig,
    pub encode: EncodeConfig,
    pub limits: MilpLimits,
    pub verify: VerifyConfig,
    /// How many times Big-M is doubled after a failed certification.
    pub m_retries: usize,
    pub symbolic: SymbolicOptions,
}

impl Default for RepairConfig {
    fn default() -> Self {
        Self {
            mode: RepairMode::Symbolic,
            calibration: CalibrationConfig::default(),
            encode: EncodeConfig::default(),
            limits: MilpLimits::default(),
            verify: VerifyConfig::default(),
            m_retries: 3,
            symbolic: SymbolicOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageTimes {
    pub calibrate: Duration,
    pub bounds: Duration,
    pub solve: Duration,
    pub certify: Duration,
}

#[derive(Debug, Clone)]
pub struct RepairOutcome {
    pub model: Mlp,
    /// Network after calibration, before the final-layer change.
    pub calibrated: Mlp,
    pub delta: FinalLayerDelta,
    /// MILP objective, equal to `delta.l1_norm()` up to solver tolerance.
    pub objective: f64,
    pub big_m: f64,
    pub nodes: usize,
    /// Number of solve attempts, counting Big-M retries.
    pub attempts: usize,
    /// True when every repair input was already certified fair and nothing changed.
    pub already_fair: bool,
    pub trace: CalibrationTrace,
    pub program: Option<RepairProgram>,
    pub times: StageTimes,
}

struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn lap(&mut self) -> Duration {
        #[cfg(not(target_arch = "wasm32"))]
        {
            let d = self.start.elapsed();
            self.start = std::time::Instant::now();
            d
        }
        #[cfg(target_arch = "wasm32")]
        {
            Duration::ZERO
        }
    }
}

fn all_fair(net: &Mlp, boxes: &[InputBox], points: &[Vec<f64>], cfg: &VerifyConfig) -> Result<usize> {
    let mut failing = 0;
    for (b, x) in boxes.iter().zip(points) {
        if certify_box(net, b, x, cfg)?.status != FairStatus::CertifiedFair {
            failing += 1;
        }
    }
    Ok(failing)
}

/// Build the repair program for `net` over the given neighbourhoods.
pub fn build_program(
    net: &Mlp,
    boxes: &[InputBox],
    cfg: &RepairConfig,
    encode: &EncodeConfig,
) -> Result<RepairProgram> {
    let (prefix, last) = net.split()?;
    match cfg.mode {
        RepairMode::Naive => {
            let fb = boxes
                .iter()
                .map(|b| {
                    let cb = ibp_concrete(&prefix, b)?;
                    Ok((cb.lower().to_vec(), cb.upper().to_vec()))
                })
                .collect::<Result<Vec<_>>>()?;
            build_naive(&fb, &last, encode)
        }
        RepairMode::Symbolic => {
            let sbs = boxes
                .iter()
                .map(|b| symbolic_bounds_with(&prefix, b, cfg.symbolic))
                .collect::<Result<Vec<_>>>()?;
            build_symbolic(&sbs, boxes, &last, encode)
        }
    }
}

/// Repair `net` so every point of `repair_points` is certified fair on its
/// neighbourhood. Never returns a model that fails certification.
pub fn run_repair(
    net: &Mlp,
    schema: &AttributeSchema,
    repair_points: &[Vec<f64>],
    calibration_set: &Dataset,
    cfg: &RepairConfig,
) -> Result<RepairOutcome> {
    if repair_points.is_empty() {
        return Err(Error::Input("repair set is empty".into()));
    }
    if net.input_dim() != schema.dim() {
        return Err(Error::dim("schema vs network input", net.input_dim(), schema.dim()));
    }
    cfg.encode.validate()?;
    cfg.calibration.validate()?;
    let boxes = repair_points
        .iter()
        .map(|x| schema.neighborhood(x))
        .collect::<Result<Vec<_>>>()?;
    let mut clock = Stopwatch::start();
    let mut times = StageTimes::default();

    if all_fair(net, &boxes, repair_points, &cfg.verify)? == 0 {
        times.certify = clock.lap();
        return Ok(RepairOutcome {
            model: net.clone(),
            calibrated: net.clone(),
            delta: FinalLayerDelta::zero(net.feature_dim()),
            objective: 0.0,
            big_m: 0.0,
            nodes: 0,
            attempts: 0,
            already_fair: true,
            trace: CalibrationTrace::default(),
            program: None,
            times,
        });
    }
    times.certify = clock.lap();

    let (calibrated, trace) = if cfg.calibration.max_iter > 0 {
        calibrate(net, &boxes, calibration_set, &cfg.calibration)?
    } else {
        (net.clone(), CalibrationTrace::default())
    };
    times.calibrate = clock.lap();

    let mut encode = cfg.encode;
    let mut nodes = 0;
    for attempt in 1..=cfg.m_retries + 1 {
        let program = build_program(&calibrated, &boxes, cfg, &encode)?;
        times.bounds += clock.lap();
        let sol = solve_milp(&program.problem, &cfg.limits)?;
        times.solve += clock.lap();
        nodes += sol.nodes;
        match sol.status {
            MilpStatus::Optimal => {}
            MilpStatus::Infeasible => {
                return Err(Error::RepairInfeasible {
                    delta_max: encode.delta_max,
                })
            }
            MilpStatus::Timeout => {
                return Err(Error::SolverLimit {
                    reason: format!("repair program after {} nodes", sol.nodes),
                    lower: sol.best_bound,
                    upper: sol.objective,
                })
            }
        }
        let delta = program.delta(sol.values()?);
        let model = calibrated.apply_repair(&delta)?;
        let failing = all_fair(&model, &boxes, repair_points, &cfg.verify)?;
        times.certify += clock.lap();
        if failing == 0 {
            return Ok(RepairOutcome {
                model,
                calibrated,
                delta,
                objective: sol.objective,
                big_m: program.big_m,
                nodes,
                attempts: attempt,
                already_fair: false,
                trace,
                program: Some(program),
                times,
            });
        }
        if attempt == cfg.m_retries + 1 {
            return Err(Error::CertificationFailed {
                failing,
                total: repair_points.len(),
            });
        }
        encode.m_scale *= 2.0;
    }
    unreachable!("the retry loop always returns")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::running;
    use crate::schema::Sample;

    fn cal_set() -> Dataset {
        Dataset::new(vec![Sample {
            x: vec![4.0, 0.0],
            y: 1,
        }])
    }

    fn no_calibration(mode: RepairMode) -> RepairConfig {
        RepairConfig {
            mode,
            calibration: CalibrationConfig {
                max_iter: 0,
                ..CalibrationConfig::default()
            },
            ..RepairConfig::default()
        }
    }

    #[test]
    fn running_example_both_modes() {
        let net = running::network();
        let schema = running::schema();
        let pts = vec![running::point()];
        let naive = run_repair(&net, &schema, &pts, &cal_set(), &no_calibration(RepairMode::Naive)).unwrap();
        let sym = run_repair(&net, &schema, &pts, &cal_set(), &no_calibration(RepairMode::Symbolic)).unwrap();
        assert!((naive.objective - 9.0 / 70.0).abs() < 1e-6, "{}", naive.objective);
        assert!((sym.objective - (0.2 - 1.0 / 9.8)).abs() < 1e-6, "{}", sym.objective);
        assert!(sym.objective <= naive.objective);
        for out in [&naive, &sym] {
            assert_eq!(out.attempts, 1);
            assert!((out.delta.l1_norm() - out.objective).abs() < 1e-6);
            assert_eq!(out.model.layers()[0], net.layers()[0]);
        }
    }

    #[test]
    fn fair_model_is_returned_unchanged() {
        let net = Mlp::new(vec![
            crate::AffineLayer::from_rows(&[vec![1.0, 0.0]], vec![0.0]).unwrap(),
            crate::AffineLayer::from_rows(&[vec![0.0]], vec![0.5]).unwrap(),
        ])
        .unwrap();
        let out = run_repair(
            &net,
            &running::schema(),
            &[running::point()],
            &cal_set(),
            &RepairConfig::default(),
        )
        .unwrap();
        assert!(out.already_fair);
        assert_eq!(out.objective, 0.0);
        assert_eq!(out.model, net);
    }

    #[test]
    fn tiny_delta_box_is_infeasible() {
        let mut cfg = no_calibration(RepairMode::Symbolic);
        cfg.encode.delta_max = 0.01;
        let err = run_repair(
            &running::network(),
            &running::schema(),
            &[running::point()],
            &cal_set(),
            &cfg,
        )
        .unwrap_err();
        assert!(matches!(err, Error::RepairInfeasible { .. }), "{err}");
    }

    #[test]
    fn empty_repair_set_is_rejected() {
        let err = run_repair(
            &running::network(),
            &running::schema(),
            &[],
            &cal_set(),
            &RepairConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }
}
