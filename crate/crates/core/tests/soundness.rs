mod common;

use petc_traffic::abstraction::inter_sample_k;
use petc_traffic::{build_traffic_model, AbstractionOptions, PetcLoop};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Inter-sample times of `samples` consecutive samples from a random state.
fn concrete_run(lp: &PetcLoop, rng: &mut ChaCha8Rng, samples: usize) -> Vec<String> {
    let mut x = common::random_unit(lp.dim(), rng);
    let mut ks = Vec::with_capacity(samples);
    for _ in 0..samples {
        let k = inter_sample_k(lp, &x).unwrap();
        ks.push(k.to_string());
        x = lp.matrices().hold(k) * x;
        x /= x.norm();
    }
    ks
}

fn violations(lp: &PetcLoop, depth: usize, seed: u64) -> usize {
    let model = build_traffic_model(
        lp,
        &AbstractionOptions {
            depth,
            etc_only: true,
            ..Default::default()
        },
    )
    .unwrap();
    let fs = model.to_finite_system();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..1000)
        .filter(|_| !fs.bounded_trace_membership(&concrete_run(lp, &mut rng, 100)))
        .count()
}

#[test]
fn concrete_runs_are_model_traces() {
    for c in [0.05, 0.95] {
        let lp = common::relative_loop(common::plant_2(), c, 0.01, 20);
        for depth in [1, 2] {
            assert_eq!(violations(&lp, depth, 100 + depth as u64), 0, "c = {c}, depth {depth}");
        }
    }
}

#[test]
fn lyapunov_runs_are_model_traces() {
    let lp = common::lyapunov_loop();
    assert_eq!(violations(&lp, 3, 7), 0);
}
