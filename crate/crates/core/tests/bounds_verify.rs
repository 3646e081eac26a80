mod common;

use common::{random_box, random_net, sampled_range};
use ifrepair::bounds::{ibp_output, symbolic_output_bounds};
use ifrepair::verify::{certify_box, exact_range, FairStatus, VerifyConfig};
use ifrepair::InputBox;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DIMS: [&[usize]; 4] = [&[2, 4, 1], &[3, 5, 1], &[3, 4, 4, 1], &[4, 6, 3, 1]];

#[test]
fn exact_inside_symbolic_inside_interval() {
    for seed in 0..100u64 {
        let dims = DIMS[seed as usize % DIMS.len()];
        let net = random_net(seed, dims);
        let b = random_box(&mut ChaCha8Rng::seed_from_u64(seed ^ 0xB0C5), dims[0]);
        let ibp = ibp_output(&net, &b).unwrap();
        let sym = symbolic_output_bounds(&net, &b).unwrap();
        let ex = exact_range(&net, &b).unwrap();
        let tol = 1e-9;
        assert!(
            ibp.0 <= sym.0 + tol && sym.0 <= ex.min + tol,
            "seed {seed}: lower {ibp:?} {sym:?} {}",
            ex.min
        );
        assert!(
            ex.max <= sym.1 + tol && sym.1 <= ibp.1 + tol,
            "seed {seed}: upper {ibp:?} {sym:?} {}",
            ex.max
        );
        // The exact range is attained and no sample escapes it.
        let (lo, hi) = sampled_range(&net, &b, 2000, seed);
        assert!(ex.min <= lo + tol && hi <= ex.max + tol, "seed {seed}");
        assert!((net.forward(&ex.argmin).unwrap() - ex.min).abs() < 1e-6);
        assert!((net.forward(&ex.argmax).unwrap() - ex.max).abs() < 1e-6);
        assert!(b.contains(&ex.argmin, 1e-9) && b.contains(&ex.argmax, 1e-9));
    }
}

fn grow(b: &InputBox, by: f64) -> InputBox {
    InputBox::new(
        b.lower.iter().map(|v| v - by).collect(),
        b.upper.iter().map(|v| v + by).collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn witnesses_really_flip(seed in any::<u64>()) {
        let dims = DIMS[(seed % 4) as usize];
        let net = random_net(seed, dims);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = random_box(&mut rng, dims[0]);
        let x = b.sample(&mut rng);
        let c = certify_box(&net, &b, &x, &VerifyConfig::default()).unwrap();
        if c.status == FairStatus::CertifiedUnfair {
            let w = c.witness.unwrap();
            prop_assert!(b.contains(&w, 1e-9));
            prop_assert_ne!(net.forward(&w).unwrap() >= 0.0, net.forward(&x).unwrap() >= 0.0);
        }
    }

    #[test]
    fn enlarging_a_box_never_certifies_an_unfair_point(seed in any::<u64>(), by in 0.0f64..0.5) {
        let dims = DIMS[(seed % 4) as usize];
        let net = random_net(seed, dims);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = random_box(&mut rng, dims[0]);
        let x = b.sample(&mut rng);
        let cfg = VerifyConfig::default();
        let small = certify_box(&net, &b, &x, &cfg).unwrap();
        let big = certify_box(&net, &grow(&b, by), &x, &cfg).unwrap();
        if small.status == FairStatus::CertifiedUnfair {
            prop_assert_eq!(big.status, FairStatus::CertifiedUnfair);
        }
        prop_assert!(big.range.min <= small.range.min + 1e-9 && big.range.max >= small.range.max - 1e-9);
    }
}
