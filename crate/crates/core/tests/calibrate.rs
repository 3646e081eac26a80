use ifrepair::calibrate::{calibrate, CalibrationConfig};
use ifrepair::schema::split_repair_sets;
use ifrepair::synth::{generate, SynthConfig};

fn instance(seed: u64) -> (ifrepair::Mlp, Vec<ifrepair::InputBox>, ifrepair::Dataset) {
    let (data, net, schema) = generate(&SynthConfig::new(seed, 5, vec![8, 6], 1.0)).unwrap();
    let split = split_repair_sets(&data, 8, 60, seed).unwrap();
    let boxes = split
        .repair
        .inputs()
        .iter()
        .map(|x| schema.neighborhood(x).unwrap())
        .collect();
    (net, boxes, split.calibration)
}

#[test]
fn trace_invariants_hold_on_synthetic_models() {
    for seed in 0..4 {
        let (net, boxes, cal) = instance(seed);
        let cfg = CalibrationConfig::default();
        let (out, trace) = calibrate(&net, &boxes, &cal, &cfg).unwrap();
        assert_eq!(trace.records.len(), cfg.max_iter);
        assert!((trace.initial_fair() - 1.0).abs() < 1e-12);
        assert!(trace.records.iter().all(|&(f, b)| f >= 0.0 && b >= 0.0));
        assert!(trace.final_losses.0 < trace.initial_fair(), "seed {seed}");
        assert_eq!(out.final_layer(), net.final_layer());
        assert_eq!(trace.ori_diffs.len(), boxes.len());
        assert!(trace.to_csv().starts_with("iter,l_fair,l_bce\n"));
    }
}

#[test]
fn calibration_is_bit_reproducible() {
    let (net, boxes, cal) = instance(9);
    let cfg = CalibrationConfig {
        max_iter: 50,
        ..CalibrationConfig::default()
    };
    let (a, ta) = calibrate(&net, &boxes, &cal, &cfg).unwrap();
    let (b, tb) = calibrate(&net, &boxes, &cal, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ta.to_csv(), tb.to_csv());
}
