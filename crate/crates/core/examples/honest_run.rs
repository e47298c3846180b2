//! A handful of honest executions over a lossy link with noisy detectors.

use mdiqct::devices::{ChannelParams, DetectorParams};
use mdiqct::protocol::{run_honest, RunConfig};
use mdiqct::Streams;

fn main() -> mdiqct::Result<()> {
    let config = RunConfig {
        channel: ChannelParams::symmetric(10.0)?,
        detector: DetectorParams::new(0.1, 1e-4)?,
        ..RunConfig::default()
    };

    for trial in 0..8 {
        let t = run_honest(&config, &mut Streams::for_trial(42, trial))?;
        println!(
            "run {trial}: {:>5} rounds, {:?} via {:?}, Bob {} revealed {} b'={} -> {:?} coin {:?}",
            t.rounds,
            t.outcome.unwrap(),
            t.cause.unwrap(),
            t.bob_label.unwrap(),
            t.revealed_label.unwrap(),
            t.bob_random_bit.unwrap(),
            t.verdict,
            t.coin,
        );
    }

    // Full transcript as the CLI emits it.
    let t = run_honest(&config, &mut Streams::for_trial(42, 0))?;
    println!("{}", serde_json::to_string_pretty(&t).unwrap());
    Ok(())
}
