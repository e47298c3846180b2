//! Every cheating strategy at the fair point, next to its closed form.

use mdiqct::adversaries::{AdversaryStrategy, AttackKind, CheatState, RevealTieBreak};
use mdiqct::analysis::attack_tally;
use mdiqct::protocol::{Mode, RunConfig};
use mdiqct::qmath::ProtocolParams;

fn main() -> mdiqct::Result<()> {
    let params = ProtocolParams::new(0.9)?;
    let trials = 200_000;
    let seed = 1;

    for kind in AttackKind::ALL {
        let strategy = AdversaryStrategy::from_kind(kind, params, 0, CheatState::Plus)?;
        // Blinding only makes sense where Bob owns his detectors.
        let mode = if kind == AttackKind::AliceBlinding {
            Mode::Baseline
        } else {
            Mode::Mdi
        };
        let config = RunConfig::ideal(params).with_mode(mode);
        let t = attack_tally(&config, &strategy, trials, seed)?;
        let e = t.success(seed);
        println!(
            "{:<17} success {:.4} ± {:.4}  (closed form {:.4}), aborts {:.4}",
            kind.to_string(),
            e.mean,
            e.stderr,
            strategy.expected_success(),
            t.abort(seed).mean
        );
    }

    // The individual attack splits on whether the box guessed right.
    let s = AdversaryStrategy::alice_individual_attack(params, 0)?;
    let t = attack_tally(&RunConfig::ideal(params), &s, trials, seed)?;
    println!(
        "\nindividual: correct guess -> {:.4}, wrong guess -> {:.4}",
        t.success_given_correct_guess(seed).mean,
        t.success_given_wrong_guess(seed).mean
    );
    for tie in [RevealTieBreak::Uniform, RevealTieBreak::LargerCell] {
        println!(
            "  tie-break {tie:?}: closed form {:.4}",
            tie.success_probability(params)
        );
    }
    Ok(())
}
