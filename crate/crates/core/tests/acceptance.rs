//! Acceptance run: one PASS/FAIL line per criterion.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use mdiqct::adversaries::{AdversaryStrategy, CheatState};
use mdiqct::analysis::{
    attack_tally, cheat_alice_coherent, chi_square_uniform, coherent_table, gate_tally, honest_abort_closed_form,
    solve_fair_y, sweep_distance, tally, z_score, Estimate,
};
use mdiqct::devices::{sample_bsm_ideal, ChannelParams, DetectorParams};
use mdiqct::protocol::{run_with_adversary, Mode, RunConfig};
use mdiqct::qmath::{
    atvy_state, commitment_density, helstrom_probability, verification_table, BsmOutcome, ProtocolParams, StateLabel,
};
use mdiqct::{Error, Streams};

fn p(y: f64) -> ProtocolParams {
    ProtocolParams::new(y).unwrap()
}

fn ideal(y: f64) -> RunConfig {
    RunConfig::ideal(p(y))
}

/// `|mean − p| ≤ 3·sqrt(p(1−p)/n)`.
fn within_3se(hits: u64, n: u64, prob: f64) -> bool {
    Estimate::from_counts(hits, n, 0).agrees_with(prob, 3.0)
}

/// Table I at y = 0.9, rows Alice φ00..φ11, columns Bob φ00..φ11.
const TABLE_PSI_PLUS: [[f64; 4]; 4] = [
    [0.18, 0.32, 0.0, 0.5],
    [0.32, 0.18, 0.5, 0.0],
    [0.0, 0.5, 0.18, 0.32],
    [0.5, 0.0, 0.32, 0.18],
];
const TABLE_PSI_MINUS: [[f64; 4]; 4] = [
    [0.0, 0.5, 0.18, 0.32],
    [0.5, 0.0, 0.32, 0.18],
    [0.18, 0.32, 0.0, 0.5],
    [0.32, 0.18, 0.5, 0.0],
];

fn criterion_1() -> (bool, String) {
    let params = p(0.9);
    let table = verification_table(params);
    let mut closed_ok = true;
    for a in StateLabel::ALL {
        for b in StateLabel::ALL {
            let (i, j) = (a.index(), b.index());
            closed_ok &= (table.probability(BsmOutcome::PsiPlus, a, b) - TABLE_PSI_PLUS[i][j]).abs() <= 1e-12;
            closed_ok &= (table.probability(BsmOutcome::PsiMinus, a, b) - TABLE_PSI_MINUS[i][j]).abs() <= 1e-12;
        }
    }
    let n = 1_000_000;
    let mut mc_ok = true;
    let mut worst: f64 = 0.0;
    for (k, (a, b)) in StateLabel::ALL
        .iter()
        .flat_map(|a| StateLabel::ALL.iter().map(move |b| (*a, *b)))
        .enumerate()
    {
        let (sa, sb) = (atvy_state(a, params), atvy_state(b, params));
        let [plus, minus] = tally::<2, _>(n, 100 + k as u64, |s, c| {
            match sample_bsm_ideal(&sa, &sb, &mut s.device) {
                BsmOutcome::PsiPlus => c[0] += 1,
                BsmOutcome::PsiMinus => c[1] += 1,
                BsmOutcome::Failure => {}
            }
            Ok(())
        })
        .unwrap();
        for (hits, expected) in [
            (plus, TABLE_PSI_PLUS[a.index()][b.index()]),
            (minus, TABLE_PSI_MINUS[a.index()][b.index()]),
        ] {
            if expected == 0.0 {
                mc_ok &= hits == 0;
            } else {
                mc_ok &= within_3se(hits, n, expected);
                let se = (expected * (1.0 - expected) / n as f64).sqrt();
                worst = worst.max((hits as f64 / n as f64 - expected).abs() / se);
            }
        }
    }
    // |±⟩ table, conditioned on a Bell outcome.
    let ct = coherent_table(params).unwrap();
    let mut t2_ok = true;
    for (k, sent) in [CheatState::Plus, CheatState::Minus].into_iter().enumerate() {
        for b in StateLabel::ALL {
            let (sa, sb) = (sent.state(), atvy_state(b, params));
            let [plus] = tally::<1, _>(n, 200 + 4 * k as u64 + b.index() as u64, |s, c| {
                let o = loop {
                    let o = sample_bsm_ideal(&sa, &sb, &mut s.device);
                    if o.is_success() {
                        break o;
                    }
                };
                c[0] += (o == BsmOutcome::PsiPlus) as u64;
                Ok(())
            })
            .unwrap();
            let expected = ct.probability(sent, BsmOutcome::PsiPlus, b);
            t2_ok &= (expected - 0.8).abs() < 1e-12 || (expected - 0.2).abs() < 1e-12;
            t2_ok &= within_3se(plus, n, expected);
        }
    }
    (
        closed_ok && mc_ok && t2_ok,
        format!(
            "32 closed-form cells exact: {closed_ok}; MC 10^6/pair within 3 SE: {mc_ok} (worst {worst:.2} SE); |±⟩ table: {t2_ok}"
        ),
    )
}

fn criterion_2() -> (bool, String) {
    let f = solve_fair_y(1e-10).unwrap();
    let ok = (f.y - 0.9).abs() <= 1e-9 && (f.bias - 0.4).abs() <= 1e-9;
    (ok, format!("y = {:.12}, bias = {:.12}", f.y, f.bias))
}

fn criterion_3() -> (bool, String) {
    let s = AdversaryStrategy::bob_med_attack(p(0.9), 0).unwrap();
    let t = attack_tally(&ideal(0.9), &s, 1_000_000, 3).unwrap();
    let rate = t.success(3).mean;
    let mc_ok = (rate - 0.9).abs() <= 0.002;
    let mut helstrom_ok = true;
    for i in 0..9 {
        let y = 0.55 + 0.05 * i as f64;
        let rho0 = commitment_density(0, p(y)).unwrap();
        let rho1 = commitment_density(1, p(y)).unwrap();
        helstrom_ok &= (helstrom_probability(&rho0, &rho1, 0.5).unwrap() - y).abs() <= 1e-12;
    }
    (
        mc_ok && helstrom_ok,
        format!("MC success {rate:.5} (target 0.9 ± 0.002); Helstrom = y on 0.55..0.95: {helstrom_ok}"),
    )
}

fn criterion_4() -> (bool, String) {
    let s = AdversaryStrategy::alice_individual_attack(p(0.9), 0).unwrap();
    let t = attack_tally(&ideal(0.9), &s, 1_000_000, 4).unwrap();
    let (all, right, wrong) = (
        t.success(4).mean,
        t.success_given_correct_guess(4).mean,
        t.success_given_wrong_guess(4).mean,
    );
    let ok = (all - 0.75).abs() <= 0.002 && right == 1.0 && (wrong - 0.5).abs() <= 0.003;
    (
        ok,
        format!("success {all:.5}, given correct guess {right:.5}, given wrong guess {wrong:.5}"),
    )
}

fn criterion_5() -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, y) in [0.6, 0.75, 0.9].into_iter().enumerate() {
        let expected = cheat_alice_coherent(p(y));
        let mut est = Vec::new();
        for (j, sent) in [CheatState::Plus, CheatState::Minus].into_iter().enumerate() {
            let s = AdversaryStrategy::alice_coherent_attack(p(y), 0, sent).unwrap();
            let seed = 50 + 2 * i as u64 + j as u64;
            let e = attack_tally(&ideal(y), &s, 1_000_000, seed).unwrap().success(seed);
            ok &= e.agrees_with(expected, 3.0);
            est.push(e);
        }
        let z = z_score(&est[0], &est[1]);
        ok &= z.abs() < 3.0;
        parts.push(format!(
            "y={y}: +{:.5} −{:.5} vs {expected:.5} (z±={z:.2})",
            est[0].mean, est[1].mean
        ));
    }
    (ok, parts.join("; "))
}

fn criterion_6() -> (bool, String) {
    let (eta, d) = (0.1_f64, 1e-4_f64);
    let det = DetectorParams::new(eta, d).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, l) in [0.0_f64, 10.0, 20.0, 50.0].into_iter().enumerate() {
        let t = 10f64.powf(-0.2 * l / 10.0);
        let hand = 0.5
            * ((1.0 - t) * (1.0 - t) * 2.0 * d * d
                + t * (1.0 - t) * eta * d
                + t * (1.0 - t) * eta * d
                + t * (1.0 - t) * (1.0 - eta) * 2.0 * d * d
                + t * (1.0 - t) * (1.0 - eta) * 2.0 * d * d
                + t * t * (1.0 - eta) * (1.0 - eta) * 2.0 * d * d);
        let channel = ChannelParams::symmetric(l).unwrap();
        let closed = honest_abort_closed_form(&channel, &det);
        let rel = ((closed - hand) / hand).abs();
        ok &= rel <= 1e-15;
        let mut config = RunConfig::default();
        config.channel = channel;
        config.detector = det;
        let g = gate_tally(&config, 10_000_000, 60 + i as u64).unwrap();
        let mc_ok = within_3se(g.aborts, g.gates, closed);
        ok &= mc_ok;
        parts.push(format!(
            "L={l}: Pr_H={closed:.4e} rel.err {rel:.1e}, MC {}/10^7 ({mc_ok})",
            g.aborts
        ));
    }
    let pts = sweep_distance(0.0, 50.0, 10.0, &det, 0.2).unwrap();
    let rising = pts
        .windows(2)
        .all(|w| w[1].dark_dark_fraction > w[0].dark_dark_fraction);
    ok &= rising;
    parts.push(format!("dark-dark share rises with L: {rising}"));
    (ok, parts.join("; "))
}

fn criterion_7() -> (bool, String) {
    let mut total_aborts = 0;
    let mut cells = 0;
    for (i, eta) in [0.1, 0.5, 1.0].into_iter().enumerate() {
        for (j, l) in [0.0, 10.0, 25.0].into_iter().enumerate() {
            let mut config = RunConfig::default();
            config.detector = DetectorParams::new(eta, 0.0).unwrap();
            config.channel = ChannelParams::symmetric(l).unwrap();
            let honest = AdversaryStrategy::honest(config.params, 0).unwrap();
            let t = attack_tally(&config, &honest, 100_000, 70 + 3 * i as u64 + j as u64).unwrap();
            total_aborts += t.aborts;
            cells += 1;
        }
    }
    (
        total_aborts == 0,
        format!("{cells} (η, L) cells × 10^5 honest runs with d = 0: {total_aborts} aborts"),
    )
}

fn criterion_8() -> (bool, String) {
    let config = RunConfig::default();
    let honest = AdversaryStrategy::honest(config.params, 0).unwrap();
    let n = 100_000;
    let t = attack_tally(&config, &honest, n, 8).unwrap();
    let accepted = n - t.aborts;
    let chi = chi_square_uniform(&[accepted - t.coin_ones, t.coin_ones]).unwrap();
    (
        chi.p_value > 0.01,
        format!(
            "coin 0/1 = {}/{} of {accepted} accepted runs, χ² = {:.3}, p = {:.3} (pass if p > 0.01)",
            accepted - t.coin_ones,
            t.coin_ones,
            chi.statistic,
            chi.p_value
        ),
    )
}

fn criterion_9() -> (bool, String) {
    let s = AdversaryStrategy::alice_blinding_attack(0).unwrap();
    let base = ideal(0.9).with_mode(Mode::Baseline);
    let t = attack_tally(&base, &s, 100_000, 9).unwrap();
    let rejected = matches!(
        run_with_adversary(&ideal(0.9), &s, &mut Streams::from_seed(9)),
        Err(Error::Configuration(_))
    );
    let ok = t.successes == t.runs && t.aborts == 0 && rejected;
    (
        ok,
        format!(
            "baseline: success {}/{}, aborts {}; MDI mode rejected: {rejected}",
            t.successes, t.runs, t.aborts
        ),
    )
}

fn cli(dir: &Path, name: &str, args: &[&str]) -> Vec<u8> {
    let out = dir.join(name);
    let status = Command::new(env!("CARGO_BIN_EXE_mdiqct"))
        .args(args)
        .arg("--out")
        .arg(&out)
        .env_remove("MDIQCT_SEED")
        .status()
        .expect("binary runs");
    assert!(status.success(), "{args:?}");
    std::fs::read(out).unwrap()
}

fn criterion_10() -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    let commands: [&[&str]; 9] = [
        &["tables"],
        &["tables", "--format", "csv"],
        &["run", "--runs", "200", "--seed", "5"],
        &[
            "run",
            "--runs",
            "200",
            "--seed",
            "5",
            "--adversary",
            "alice-individual",
            "--format",
            "csv",
        ],
        &[
            "attack",
            "--adversary",
            "alice-coherent",
            "--trials",
            "200000",
            "--seed",
            "5",
        ],
        &[
            "attack",
            "--adversary",
            "bob-med",
            "--trials",
            "200000",
            "--seed",
            "5",
            "--format",
            "csv",
        ],
        &[
            "estimate",
            "--scenario",
            "honest-abort-per-round",
            "--trials",
            "300000",
            "--seed",
            "5",
        ],
        &["sweep", "--lmin", "0", "--lmax", "50", "--step", "5", "--format", "csv"],
        &["fair"],
    ];
    let mut ok = true;
    for (i, args) in commands.iter().enumerate() {
        let a = cli(dir.path(), &format!("{i}a"), args);
        let b = cli(dir.path(), &format!("{i}b"), args);
        let mut one = args.to_vec();
        one.extend(["--threads", "1"]);
        let mut four = args.to_vec();
        four.extend(["--threads", "4"]);
        let c = cli(dir.path(), &format!("{i}c"), &one);
        let d = cli(dir.path(), &format!("{i}d"), &four);
        ok &= !a.is_empty() && a == b && a == c && a == d;
    }
    (
        ok,
        format!(
            "{} commands byte-identical across repeats and 1 vs 4 workers",
            commands.len()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> (bool, String)); 10] = [
        ("verification table", criterion_1),
        ("fair point", criterion_2),
        ("Bob's attack", criterion_3),
        ("individual attack", criterion_4),
        ("coherent attack", criterion_5),
        ("honest abort curve", criterion_6),
        ("loss tolerance", criterion_7),
        ("honest coin uniformity", criterion_8),
        ("blinding demonstration", criterion_9),
        ("determinism", criterion_10),
    ];
    // `cargo test -- <filter>` style arguments are accepted and ignored,
    // except `--list`, which test runners use for discovery.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (ok, detail) = f();
        failed += !ok as u32;
        println!(
            "criterion {:>2} {}: {} — {detail} [{:.1}s]",
            i + 1,
            name,
            if ok { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {}/{} passed in {:.1}s",
        criteria.len() as u32 - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
