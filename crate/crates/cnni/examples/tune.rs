// Scratch harness for calibrating the desk-scale experiment budgets.
// Not part of the deliverable surface; run with
//   cargo run -p cnni --example tune -- <experiment> [args...]

use std::time::Instant;

use cnni::data::{gen_blobs, gen_moons, gen_spirals};
use cnni::evaluation::{active_labels, adjusted_rand_index, predict};
use cnni::network::{Head, LayerSpec, Network};
use cnni::objectives::ObjectiveKind;
use cnni::optimizers::{train, OptimizerKind, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match args.first().map(String::as_str) {
        Some("blobs") => blobs_cd(),
        Some("moons") => moons_sbsbp(&args[1..]),
        Some("surplus") => surplus_heads(&args[1..]),
        Some("spirals") => spirals_mb(&args[1..]),
        other => eprintln!("unknown experiment {other:?}"),
    }
}

fn blobs_cd() {
    let centers = vec![vec![0.0, 0.0], vec![12.0, 12.0], vec![-12.0, 12.0]];
    let data = gen_blobs(500, 3, Some(&centers), 1.0, 42).unwrap();
    let mut wins = 0;
    for seed in 0..10u64 {
        let start = Instant::now();
        let spec = LayerSpec::new(vec![2, 10, 3], Head::Raw).unwrap();
        let config = TrainConfig {
            objective: ObjectiveKind::Silhouette,
            epochs: 30,
            seed,
            ..TrainConfig::default()
        };
        let outcome = train(
            Network::init_random(spec, seed),
            &data,
            OptimizerKind::CoordinateDescent,
            &config,
        )
        .unwrap();
        let assignment = predict(&outcome.network, &data).unwrap();
        let ari = adjusted_rand_index(assignment.hard(), data.truth.as_ref().unwrap()).unwrap();
        let ok = ari >= 0.95;
        wins += usize::from(ok);
        println!(
            "seed {seed}: ari {ari:.4} best {:.4} in {:?} {}",
            outcome.trace.best_value,
            start.elapsed(),
            if ok { "PASS" } else { "fail" }
        );
    }
    println!("blobs: {wins}/10");
}

fn moons_sbsbp(args: &[String]) {
    let max_steps: usize = args.first().map_or(200_000, |s| s.parse().unwrap());
    let patience: usize = args.get(1).map_or(500, |s| s.parse().unwrap());
    let sigma: f64 = args.get(2).map_or(0.5, |s| s.parse().unwrap());
    let rho2: usize = args.get(3).map_or(50, |s| s.parse().unwrap());
    let noise: f64 = args.get(4).map_or(0.05, |s| s.parse().unwrap());
    let data = gen_moons(200, noise, 42).unwrap();
    let mut wins = 0;
    for seed in 0..5u64 {
        let start = Instant::now();
        let spec = LayerSpec::new(vec![2, 40, 40, 2], Head::Raw).unwrap();
        let config = TrainConfig {
            objective: ObjectiveKind::MmjSilhouette,
            max_steps,
            patience,
            sigma,
            rho2,
            seed,
            ..TrainConfig::default()
        };
        let outcome = train(
            Network::init_random(spec, seed),
            &data,
            OptimizerKind::Sbsbp,
            &config,
        )
        .unwrap();
        let assignment = predict(&outcome.network, &data).unwrap();
        let ari = adjusted_rand_index(assignment.hard(), data.truth.as_ref().unwrap()).unwrap();
        let ok = ari >= 0.99;
        wins += usize::from(ok);
        println!(
            "seed {seed}: ari {ari:.4} best {:.4} in {:?} {}",
            outcome.trace.best_value,
            start.elapsed(),
            if ok { "PASS" } else { "fail" }
        );
    }
    println!("moons: {wins}/5");
}

fn surplus_heads(args: &[String]) {
    let optimizer: OptimizerKind = args
        .first()
        .map_or(OptimizerKind::CoordinateDescent, |s| s.parse().unwrap());
    let epochs: usize = args.get(1).map_or(30, |s| s.parse().unwrap());
    let max_steps: usize = args.get(2).map_or(30_000, |s| s.parse().unwrap());
    let centers = vec![vec![0.0, 0.0], vec![12.0, 12.0], vec![-12.0, 12.0]];
    let data = gen_blobs(300, 3, Some(&centers), 1.0, 42).unwrap();
    let mut wins = 0;
    for seed in 0..5u64 {
        let start = Instant::now();
        let spec = LayerSpec::new(vec![2, 10, 30], Head::Softmax).unwrap();
        let config = TrainConfig {
            objective: ObjectiveKind::Silhouette,
            epochs,
            max_steps,
            seed,
            ..TrainConfig::default()
        };
        let outcome = train(Network::init_random(spec, seed), &data, optimizer, &config).unwrap();
        let assignment = predict(&outcome.network, &data).unwrap();
        let (active, _) = active_labels(&assignment);
        let ari = adjusted_rand_index(assignment.hard(), data.truth.as_ref().unwrap()).unwrap();
        let ok = (3..=5).contains(&active);
        wins += usize::from(ok);
        println!(
            "seed {seed}: active {active} ari {ari:.4} best {:.4} in {:?} {}",
            outcome.trace.best_value,
            start.elapsed(),
            if ok { "PASS" } else { "fail" }
        );
    }
    println!("surplus: {wins}/5");
}

fn spirals_mb(args: &[String]) {
    let iterations: usize = args.first().map_or(199, |s| s.parse().unwrap());
    let inner_steps: usize = args.get(1).map_or(500, |s| s.parse().unwrap());
    let turns: f64 = args.get(2).map_or(1.0, |s| s.parse().unwrap());
    let data = gen_spirals(150, turns, 0.02, 42).unwrap();
    let mut wins = 0;
    for seed in 0..5u64 {
        let start = Instant::now();
        let spec = LayerSpec::new(vec![2, 20, 20, 2], Head::Softmax).unwrap();
        let config = TrainConfig {
            objective: ObjectiveKind::MmjKMeansSoft,
            iterations,
            inner_steps,
            patience: 600,
            seed,
            ..TrainConfig::default()
        };
        let outcome = train(
            Network::init_random(spec, seed),
            &data,
            OptimizerKind::MbSbsbp,
            &config,
        )
        .unwrap();
        let initial = outcome.trace.records[0].value;
        let best = outcome.trace.best_value;
        let assignment = predict(&outcome.network, &data).unwrap();
        let ari = adjusted_rand_index(assignment.hard(), data.truth.as_ref().unwrap()).unwrap();
        let ok = best > initial;
        wins += usize::from(ok);
        println!(
            "seed {seed}: initial {initial:.5} best {best:.5} ari {ari:.3} evals {} in {:?} {}",
            outcome.trace.evaluations,
            start.elapsed(),
            if ok { "PASS" } else { "fail" }
        );
    }
    println!("spirals: {wins}/5");
}
