//! Weak-coherent sources: K pulse slots per execution, keep the first Bell
//! outcome.

use mdiqct::analysis::tally;
use mdiqct::devices::{ChannelParams, DetectorParams, SourceModel};
use mdiqct::protocol::{run_weak_coherent, AbortReason, Mode, RunConfig};

fn main() -> mdiqct::Result<()> {
    for mu in [0.1, 0.5, 1.0] {
        let config = RunConfig {
            channel: ChannelParams::symmetric(10.0)?,
            detector: DetectorParams::new(0.5, 1e-5)?,
            source_a: SourceModel::weak_coherent(mu)?,
            source_b: SourceModel::weak_coherent(mu)?,
            pulses: 500,
            ..RunConfig::default().with_mode(Mode::MdiWeakCoherent)
        };
        let n = 20_000;
        let [empty, caught, multi, slots] = tally::<4, _>(n, 3, |s, c| {
            let t = run_weak_coherent(&config, s)?;
            match t.abort_reason {
                Some(AbortReason::NoSuccessfulSlot) => c[0] += 1,
                Some(AbortReason::CheatingDetected) => c[1] += 1,
                None => {}
            }
            c[2] += t.multi_photon.unwrap_or(false) as u64;
            c[3] += t.rounds;
            Ok(())
        })?;
        println!(
            "mu={mu}: P(n>=2)={:.4}, no Bell outcome {:.4}, aborted {:.5}, multi-photon kept slot {:.4}, mean slot {:.1}",
            config.source_a.multi_photon_probability(),
            empty as f64 / n as f64,
            caught as f64 / n as f64,
            multi as f64 / n as f64,
            slots as f64 / n as f64,
        );
    }
    Ok(())
}
