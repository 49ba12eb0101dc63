//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Long sweeps included; expect several minutes.

use std::process::ExitCode;
use std::time::Instant;

use blowup_lab_acceptance::*;

fn main() -> ExitCode {
    let mut ledger = Ledger {
        results: Vec::new(),
    };

    ledger.record(1, "coordinate round trip", secs(1), coordinate_round_trip);
    ledger.record(2, "weight asymptotics", secs(1), weight_asymptotics);
    ledger.record(3, "test function", secs(5), test_function);
    ledger.record(4, "solver convergence", secs(60), solver_orders);

    let start = Instant::now();
    let chain = chain_runs();
    let chain_time = start.elapsed();
    ledger.report(
        5,
        "inequality chain",
        secs(300),
        chain_time,
        inequality_chain(&chain),
    );

    let sweeps = scaling_sweeps();
    let (slowest, sweep_time) = (sweeps.slowest, sweeps.total);
    let sweeps = sweeps.outcomes;
    ledger.report(
        6,
        "blow-up and threshold insensitivity",
        secs(600),
        slowest,
        blowup_and_threshold(&sweeps),
    );
    ledger.report(
        7,
        "power-law lifespan scaling",
        secs(1800),
        sweep_time,
        power_law_scaling(&sweeps[0].1, &sweeps[1].1),
    );
    ledger.report(
        8,
        "exponential lifespan scaling",
        secs(1800),
        sweep_time,
        exponential_scaling(&sweeps[2].1),
    );

    ledger.record(9, "Riccati closed forms", secs(5), riccati_forms);
    ledger.record(10, "integral lemmas", secs(10), integral_lemmas);
    ledger.report(
        11,
        "comparison ordering",
        secs(300),
        chain_time,
        comparison(&chain),
    );

    let failed = ledger.results.iter().filter(|p| !**p).count();
    println!(
        "{} of {} criteria passed",
        ledger.results.len() - failed,
        ledger.results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
