//! Verification table and the |±⟩ table at a chosen y.
//!
//!     cargo run --example tables -- 0.8

use mdiqct::adversaries::CheatState;
use mdiqct::analysis::coherent_table;
use mdiqct::qmath::{verification_table, BsmOutcome, ProtocolParams, StateLabel};

fn main() -> mdiqct::Result<()> {
    let y = std::env::args()
        .nth(1)
        .map_or(Ok(0.9), |s| s.parse())
        .expect("y must be a number");
    let params = ProtocolParams::new(y)?;
    let table = verification_table(params);

    for outcome in BsmOutcome::BELL {
        println!("{outcome} (rows: Alice, columns: Bob)");
        for a in StateLabel::ALL {
            let row: Vec<String> = StateLabel::ALL
                .iter()
                .map(|&b| match table.is_zero_cell(outcome, a, b) {
                    true => "   0*  ".to_string(),
                    false => format!("{:7.4}", table.probability(outcome, a, b)),
                })
                .collect();
            println!("  {a}  {}", row.join(" "));
        }
    }

    // Zero cells are what Bob checks; a |±⟩ cheater lands in them with
    // probability (1 − 2√(y(1−y)))/2.
    let t = coherent_table(params)?;
    println!(
        "\n|+⟩ against φ00: Ψ+ {:.4}, Ψ- {:.4}",
        t.probability(CheatState::Plus, BsmOutcome::PsiPlus, StateLabel::ALL[0]),
        t.probability(CheatState::Plus, BsmOutcome::PsiMinus, StateLabel::ALL[0])
    );
    Ok(())
}
