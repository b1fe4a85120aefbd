//! End to end on disk: writes a small synthetic corpus, runs the batch
//! pipeline with two workers and scores the result.
//!
//! ```bash
//! cargo run --release -p sfid --example synth_batch -- 20
//! ```

use sfid::pipeline::{run_eval, run_pipeline, RunConfig};
use sfid::synth::{write_corpus, NoiseConfig, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let count: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(10);
    let tmp = tempfile::tempdir()?;
    let root = tmp.path();

    let base = SynthConfig {
        noise: NoiseConfig {
            semantic_jitter: 0.1,
            confidence_jitter: 0.1,
            ..NoiseConfig::default()
        },
        ..SynthConfig::default()
    };
    let corpus = write_corpus(&base, count, root.join("corpus"))?;

    let run = run_pipeline(&RunConfig {
        inputs: vec![corpus.scenes.clone()],
        output: root.join("pred"),
        workers: 2,
        ..RunConfig::default()
    })?;
    println!("{} pairs ok, {} failed", run.succeeded, run.failed);

    let report = run_eval(root.join("pred"), &corpus.ground_truth)?;
    print!("{}", report.to_table());
    Ok(())
}
