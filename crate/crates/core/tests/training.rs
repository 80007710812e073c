use exwarp_core::features::StateVector;
use exwarp_core::predictor::{td_loss_and_grad, Experience, QNetwork, TrainConfig, Trainer};
use exwarp_core::scheduler::Action;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn experiences(seed: u64, n: usize) -> Vec<Experience> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let s: Vec<f64> = (0..44).map(|_| rng.random_range(0.0..2.0)).collect();
            let t: Vec<f64> = (0..44).map(|_| rng.random_range(0.0..2.0)).collect();
            Experience {
                state: StateVector::encode(&s).unwrap(),
                action: if i % 2 == 0 { Action::Warp } else { Action::Extrapolate },
                reward: rng.random_range(-0.5..0.5),
                next_state: StateVector::encode(&t).unwrap(),
                terminal: i % 7 == 6,
            }
        })
        .collect()
}

#[test]
fn sgd_overfits_a_frozen_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut net = QNetwork::<f32>::init(&mut rng);
    let target = net.clone();
    let exps = experiences(4, 64);
    let batch: Vec<&Experience> = exps.iter().collect();
    let mut prev = f32::INFINITY;
    for step in 0..100 {
        let (loss, grads, _) = td_loss_and_grad(&net, &target, &batch, 0.95).unwrap();
        assert!(loss < prev, "step {step}: {loss} >= {prev}");
        prev = loss;
        net.sgd_step(&grads, 1e-3);
    }
}

#[test]
fn trainer_is_deterministic_for_a_seed() {
    let run = |seed: u64| {
        let cfg = TrainConfig {
            rng_seed: seed,
            batch_size: 16,
            target_sync_every: 10,
            updates_per_point: 2,
            ..TrainConfig::default()
        };
        let mut tr = Trainer::new(cfg).unwrap();
        for e in experiences(9, 60) {
            let a = tr.act(&e.state, 0.3).unwrap();
            tr.observe(Experience { action: a, ..e }, 0.3).unwrap();
        }
        tr
    };
    let a = run(1);
    let b = run(1);
    assert_eq!(a.net, b.net);
    assert_eq!(a.steps, b.steps);
    assert_eq!(a.log, b.log);
    assert_ne!(a.net, run(2).net);
}
