//! Named Monte Carlo scenarios, as the `estimate` subcommand runs them.

use mdiqct::analysis::{estimate, with_threads, Scenario, ScenarioOptions};
use mdiqct::protocol::RunConfig;
use mdiqct::qmath::ProtocolParams;

fn main() -> mdiqct::Result<()> {
    let ideal = RunConfig::ideal(ProtocolParams::new(0.9)?);
    let opts = ScenarioOptions::default();

    for name in [
        "honest-coin-uniformity",
        "alice-coherent",
        "alice-individual",
        "bob-med",
        "table-cell",
    ] {
        let sc = Scenario::from_name(name, ideal, &opts)?;
        let e = estimate(&sc, 200_000, 7)?;
        let cf = sc.closed_form()?.map_or("-".into(), |p| format!("{p:.4}"));
        println!("{name:<24} {:.4} ± {:.4}  closed form {cf}", e.mean, e.stderr);
    }

    // Same answer regardless of worker count.
    let sc = Scenario::from_name("alice-coherent", ideal, &opts)?;
    let one = with_threads(Some(1), || estimate(&sc, 100_000, 3))??;
    let four = with_threads(Some(4), || estimate(&sc, 100_000, 3))??;
    assert_eq!(one, four);
    println!("1 vs 4 workers: identical ({} hits)", one.hits);
    Ok(())
}
