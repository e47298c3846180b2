//! Detector blinding: perfect against trusted-detector coin tossing,
//! impossible to even configure against the MDI protocol.

use mdiqct::adversaries::AdversaryStrategy;
use mdiqct::analysis::attack_tally;
use mdiqct::protocol::{run_with_adversary, Mode, RunConfig};
use mdiqct::{Error, Streams};

fn main() -> mdiqct::Result<()> {
    let blinding = AdversaryStrategy::alice_blinding_attack(1)?;
    let baseline = RunConfig::default().with_mode(Mode::Baseline);

    let t = attack_tally(&baseline, &blinding, 100_000, 9)?;
    println!(
        "baseline: coin forced to 1 in {}/{} runs, {} aborts",
        t.successes, t.runs, t.aborts
    );

    let honest = AdversaryStrategy::honest(baseline.params, 1)?;
    let h = attack_tally(&baseline, &honest, 100_000, 9)?;
    println!("baseline, honest Alice: coin = 1 in {:.4} of runs", h.success(9).mean);

    match run_with_adversary(&RunConfig::default(), &blinding, &mut Streams::from_seed(0)) {
        Err(Error::Configuration(msg)) => println!("mdi: rejected ({msg})"),
        other => println!("mdi: unexpected {other:?}"),
    }
    Ok(())
}
