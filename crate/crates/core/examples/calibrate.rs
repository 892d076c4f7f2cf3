//! Scratch calibration runs for the training tasks (not part of the API).

use semloss::data::{gen_grid_dataset, gen_toy_2d, preflib};
use semloss::encoders::GridSpec;
use semloss::learn::TrainConfig;
use semloss::tasks::{run_grid, run_pref, run_toy};
use std::time::Instant;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "toy".into());
    match which.as_str() {
        "toy" => toy(),
        "grid" => grid(),
        "pref" => pref(),
        _ => eprintln!("unknown task"),
    }
}

fn toy() {
    let args: Vec<String> = std::env::args().collect();
    let w: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0.25);
    let lr: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.1);
    let epochs: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(1000);
    let mut wins = 0;
    for seed in 0..10u64 {
        let ds = gen_toy_2d(seed, 4, 200);
        let base_cfg = TrainConfig {
            semantic_weight: 0.0,
            learning_rate: lr,
            max_epochs: epochs,
            seed,
            ..TrainConfig::default()
        };
        let sem_cfg = TrainConfig { semantic_weight: w, ..base_cfg.clone() };
        let base = run_toy(&ds, &base_cfg).unwrap();
        let sem = run_toy(&ds, &sem_cfg).unwrap();
        let win = sem.unlabeled_accuracy > base.unlabeled_accuracy
            && sem.mean_entropy < base.mean_entropy;
        if win {
            wins += 1;
        }
        println!(
            "seed {seed}: base acc {:6.2} H {:7.4} | sem acc {:6.2} H {:7.4} | win {win}",
            base.unlabeled_accuracy, base.mean_entropy, sem.unlabeled_accuracy, sem.mean_entropy
        );
    }
    println!("w={w} lr={lr} epochs={epochs}: wins {wins}/10");
}

fn grid() {
    let args: Vec<String> = std::env::args().collect();
    let count: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1600);
    let lr: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(1e-3);
    let epochs: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(2000);
    let g = GridSpec::new(4, 4).unwrap();
    let t0 = Instant::now();
    let ds = gen_grid_dataset(&g, count, 0).unwrap();
    println!("dataset generated in {:?}", t0.elapsed());
    for (name, w) in [("base", 0.0), ("sem", 0.5)] {
        let cfg = TrainConfig {
            semantic_weight: w,
            learning_rate: lr,
            max_epochs: epochs,
            patience: 50,
            seed: 1,
            ..TrainConfig::default()
        };
        let t = Instant::now();
        let r = run_grid(&g, &ds, &cfg).unwrap();
        println!(
            "{name}: epochs {} best {} | test coherent {:.2} incoherent {:.2} constraint {:.2} | {:?}",
            r.outcome.history.len(),
            r.outcome.best_epoch,
            r.test_metrics.coherent,
            r.test_metrics.incoherent,
            r.test_metrics.constraint,
            t.elapsed()
        );
    }
}

fn pref() {
    let args: Vec<String> = std::env::args().collect();
    let count: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(5000);
    let archetypes: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(6);
    let swaps: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(3);
    let lr: f64 = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(1e-3);
    let soc = preflib::gen_synthetic_preferences_soc(0, count, archetypes, swaps);
    let rankings = preflib::parse_soc(&soc).unwrap();
    let ds = preflib::sushi_dataset(&rankings, 0).unwrap();
    for (name, w) in [("base", 0.0), ("sem", 0.25)] {
        let cfg = TrainConfig {
            semantic_weight: w,
            learning_rate: lr,
            max_epochs: 2000,
            patience: 50,
            seed: 1,
            ..TrainConfig::default()
        };
        let t = Instant::now();
        let r = run_pref(&ds, &cfg).unwrap();
        println!(
            "{name}: epochs {} | test coherent {:.2} incoherent {:.2} constraint {:.2} | {:?}",
            r.outcome.history.len(),
            r.test_metrics.coherent,
            r.test_metrics.incoherent,
            r.test_metrics.constraint,
            t.elapsed()
        );
    }
}
