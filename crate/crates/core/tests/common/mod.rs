//! Seeded instance generators and small oracles shared by the integration
//! tests and the acceptance runner.
#![allow(dead_code)]

use ifrepair::solver::{solve_lp, LpSolution, LpStatus, Problem, Sense};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random LP with finite variable bounds, feasible by construction.
pub fn random_lp(seed: u64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=12);
    let m = rng.random_range(1..=10);
    let mut p = Problem::new();
    let mut x0 = Vec::with_capacity(n);
    for j in 0..n {
        let lo = rng.random_range(-5.0..0.0);
        let hi = rng.random_range(0.5..5.0);
        x0.push(rng.random_range(lo..hi));
        p.add_continuous(format!("x{j}"), lo, hi);
    }
    for r in 0..m {
        let mut row = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.7) {
                row.push((j, rng.random_range(-4.0..4.0)));
            }
        }
        let act: f64 = row.iter().map(|&(j, a)| a * x0[j]).sum();
        let (sense, rhs) = match rng.random_range(0..5) {
            0 => (Sense::Eq, act),
            1 | 2 => (Sense::Le, act + rng.random_range(0.0..3.0)),
            _ => (Sense::Ge, act - rng.random_range(0.0..3.0)),
        };
        p.add_con(format!("r{r}"), row, sense, rhs);
    }
    p.set_objective((0..n).map(|j| (j, rng.random_range(-3.0..3.0))).collect());
    p
}

/// Value of the Lagrangian dual at the solver's multipliers. Reduced costs
/// are recomputed from the problem data rather than taken from the solver.
pub fn dual_objective(p: &Problem, sol: &LpSolution) -> f64 {
    let mut d: Vec<f64> = vec![0.0; p.num_vars()];
    for &(j, c) in &p.objective {
        d[j] += c;
    }
    let mut value = p.objective_offset;
    for (con, &y) in p.cons.iter().zip(&sol.duals) {
        value += y * con.rhs;
        for &(j, a) in &con.coeffs {
            d[j] -= a * y;
        }
    }
    for (v, dj) in p.vars.iter().zip(d) {
        value += if dj > 0.0 { dj * v.lower } else { dj * v.upper };
    }
    value
}

/// Multipliers must have the sign their row sense allows.
pub fn dual_signs_ok(p: &Problem, sol: &LpSolution, tol: f64) -> bool {
    p.cons.iter().zip(&sol.duals).all(|(c, &y)| match c.sense {
        Sense::Le => y <= tol,
        Sense::Ge => y >= -tol,
        Sense::Eq => true,
    })
}

/// Random MILP with `binaries` binary variables gating continuous ones.
pub fn random_milp(seed: u64, binaries: usize) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=6);
    let mut p = Problem::new();
    let xs: Vec<usize> = (0..n).map(|j| p.add_continuous(format!("x{j}"), -3.0, 3.0)).collect();
    let zs: Vec<usize> = (0..binaries).map(|k| p.add_binary(format!("z{k}"))).collect();
    for (k, &z) in zs.iter().enumerate() {
        // Big-M style link: x_j <= a + M z or x_j >= b - M (1 - z).
        let j = xs[rng.random_range(0..n)];
        let m = rng.random_range(2.0..8.0);
        if rng.random_bool(0.5) {
            p.add_con(
                format!("up{k}"),
                vec![(j, 1.0), (z, -m)],
                Sense::Le,
                rng.random_range(-2.0..1.0),
            );
        } else {
            p.add_con(
                format!("dn{k}"),
                vec![(j, 1.0), (z, -m)],
                Sense::Ge,
                rng.random_range(-1.0..2.0) - m,
            );
        }
    }
    for r in 0..rng.random_range(1..=4) {
        let mut row: Vec<(usize, f64)> = xs.iter().map(|&j| (j, rng.random_range(-2.0..2.0))).collect();
        for &z in &zs {
            if rng.random_bool(0.3) {
                row.push((z, rng.random_range(-2.0..2.0)));
            }
        }
        p.add_con(format!("mix{r}"), row, Sense::Le, rng.random_range(0.0..4.0));
    }
    let mut obj: Vec<(usize, f64)> = xs.iter().map(|&j| (j, rng.random_range(-2.0..2.0))).collect();
    obj.extend(zs.iter().map(|&z| (z, rng.random_range(-1.0..1.5))));
    p.set_objective(obj);
    p
}

/// Best objective over all binary assignments, each solved as an LP.
pub fn enumerate_milp(p: &Problem) -> Option<f64> {
    let bins = p.binaries();
    assert!(bins.len() <= 16, "enumeration is exponential");
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << bins.len()) {
        let mut q = p.clone();
        for (k, &j) in bins.iter().enumerate() {
            let v = f64::from((mask >> k) & 1);
            q.vars[j].lower = v;
            q.vars[j].upper = v;
        }
        let s = solve_lp(&q).expect("enumeration LP");
        if s.status == LpStatus::Optimal {
            best = Some(best.map_or(s.objective, |b: f64| b.min(s.objective)));
        }
    }
    best
}

/// Seeded network with uniform weights in `[-1, 1]` and biases in `[-0.5, 0.5]`.
pub fn random_net(seed: u64, dims: &[usize]) -> ifrepair::Mlp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = dims
        .windows(2)
        .map(|d| {
            let w = (0..d[0] * d[1]).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b = (0..d[1]).map(|_| rng.random_range(-0.5..0.5)).collect();
            ifrepair::AffineLayer::new(d[1], d[0], w, b).unwrap()
        })
        .collect();
    ifrepair::Mlp::new(layers).unwrap()
}

/// Box with centre in `[-1, 1]^m` and half-widths in `[0, 0.6]`.
pub fn random_box(rng: &mut ChaCha8Rng, m: usize) -> ifrepair::InputBox {
    let (mut lo, mut hi) = (Vec::with_capacity(m), Vec::with_capacity(m));
    for _ in 0..m {
        let c = rng.random_range(-1.0..1.0);
        let r = rng.random_range(0.0..0.6);
        lo.push(c - r);
        hi.push(c + r);
    }
    ifrepair::InputBox::new(lo, hi).unwrap()
}

/// Minimum and maximum of `net` over `samples` uniform points of `b`, corners included.
pub fn sampled_range(net: &ifrepair::Mlp, b: &ifrepair::InputBox, samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = b.dim();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let corners = if m <= 10 { 1usize << m } else { 0 };
    for k in 0..samples + corners {
        let x: Vec<f64> = if k < corners {
            (0..m)
                .map(|i| if (k >> i) & 1 == 1 { b.upper[i] } else { b.lower[i] })
                .collect()
        } else {
            b.sample(&mut rng)
        };
        let y = net.forward(&x).unwrap();
        lo = lo.min(y);
        hi = hi.max(y);
    }
    (lo, hi)
}
