//! Compares the four change strategies on synthetic scenes with pseudo-change
//! noise: soft object rims, semantic jitter, a T2 illumination ramp and a
//! one-pixel misregistration.
//!
//! ```bash
//! cargo run --release -p sfid --example compare_strategies -- 50
//! ```

use sfid::metrics::{confusion_counts, iou, ConfusionCounts};
use sfid::pipeline::{detect_pair, RunConfig, Strategy};
use sfid::synth::{generate_scene_pair, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenes: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(50);

    let strategies = [Strategy::Instance, Strategy::L1, Strategy::L2, Strategy::Pmc];
    let mut totals = [0.0f64; 4];
    for seed in 0..scenes {
        let (pair, truth) = generate_scene_pair(&SynthConfig::pseudo_change(seed))?;
        for (total, &strategy) in totals.iter_mut().zip(&strategies) {
            let cfg = RunConfig {
                strategy,
                ..RunConfig::default()
            };
            let counts: ConfusionCounts = detect_pair(&pair, &cfg)?
                .iter()
                .zip(&truth)
                .map(|(change, gt)| confusion_counts(&change.mask, gt))
                .sum::<Result<_, _>>()?;
            *total += iou(&counts);
        }
    }

    println!("{:<10} {:>8}", "strategy", "mean IoU");
    for (strategy, total) in strategies.iter().zip(totals) {
        println!("{:<10} {:>8.3}", strategy.to_string(), total / scenes as f64);
    }
    Ok(())
}
