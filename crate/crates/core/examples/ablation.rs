//! Runs the three pre-training conditions over several seeds on a synthetic
//! corpus and prints the per-seed outcomes.
//!
//!     cargo run --release -p mld-core --example ablation -- [n_seeds] [threshold]

use mld_core::dataset::SynthSpec;
use mld_core::experiment::{run_ablation, PretrainSource, RunConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n_seeds: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let threshold: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.45);

    let spec = SynthSpec::uniform_overlap(5, 400, 64, 0.1, 6, 42);
    let cfg = RunConfig::synth_ablation(spec);
    let base: u64 = std::env::var("SEED_BASE")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(1);
    let seeds: Vec<u64> = (base..base + n_seeds).collect();

    let start = std::time::Instant::now();
    let outcome = run_ablation(&cfg, &seeds, threshold).expect("ablation run");
    println!(
        "{:>6} {:>12} {:>14} {:>14} {:>10} {:>10}",
        "seed", "condition", "test subsetacc", "train subsetacc", "epochs@thr", "test f1"
    );
    for seed_run in &outcome.per_seed {
        for row in &seed_run.rows {
            println!(
                "{:>6} {:>12} {:>14.4} {:>14.4} {:>10} {:>10.4}",
                seed_run.seed,
                format!("{:?}", row.source).to_lowercase(),
                row.test_metrics.subsetacc,
                row.final_train_subsetacc,
                row.epochs_to_threshold,
                row.test_metrics.f1,
            );
        }
    }
    for source in [
        PretrainSource::None,
        PretrainSource::Raw,
        PretrainSource::Augmented,
    ] {
        println!(
            "median final train subsetacc {:?}: {:.4} | median test subsetacc: {:.4}",
            source,
            outcome.median(source, |r| r.final_train_subsetacc),
            outcome.median(source, |r| r.test_metrics.subsetacc),
        );
    }
    println!(
        "seeds where pre-training reached {:.2} no slower: {}/{}",
        threshold,
        outcome.seeds_where_pretraining_is_no_slower(),
        seeds.len()
    );
    println!("total wall time: {:.1}s", start.elapsed().as_secs_f64());
}
