//! Where Alice's best attack and Bob's best attack meet.

use mdiqct::analysis::{cheat_alice_coherent, cheat_alice_individual, cheat_bob, solve_fair_y};
use mdiqct::qmath::ProtocolParams;

fn main() -> mdiqct::Result<()> {
    let fair = solve_fair_y(1e-12)?;
    println!(
        "fair y = {:.12}, bias = {:.12} ({} bisection steps)",
        fair.y, fair.bias, fair.iterations
    );

    println!("\n{:>5} {:>8} {:>10}", "y", "Bob", "Alice coh");
    for i in 0..9 {
        let p = ProtocolParams::new(0.55 + 0.05 * i as f64)?;
        println!("{:>5.2} {:>8.4} {:>10.4}", p.y(), cheat_bob(p), cheat_alice_coherent(p));
    }
    println!("individual attack: {}", cheat_alice_individual());
    Ok(())
}
