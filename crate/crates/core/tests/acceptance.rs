//! Acceptance criteria 1–10, one PASS/FAIL line each.
//!
//! Failures are reported, not hidden: the process exits 0 so the rest of
//! `cargo test` still runs, unless `UIHPQ_ACCEPTANCE_STRICT=1` is set, in
//! which case any FAIL exits 1. Errors (as opposed to failed checks) always
//! exit 1.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use uihpq_core::lab::{
    audit_suite, identity_suite, radon_nikodym_suite, round_trip_suite, run, Check, Command, ExperimentConfig,
    StatsReport,
};
use uihpq_core::Result;

const SEED: u64 = 1;

struct Outcome {
    pass: bool,
    detail: String,
}

fn summarize(checks: &[Check]) -> String {
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{} = {:.6} (want {})", c.name, c.value, c.threshold))
        .collect();
    if failed.is_empty() {
        format!("{} checks", checks.len())
    } else {
        format!("{}/{} checks failed: {}", failed.len(), checks.len(), failed.join("; "))
    }
}

fn of_checks(checks: &[Check]) -> Outcome {
    Outcome { pass: checks.iter().all(|c| c.pass), detail: summarize(checks) }
}

fn cfg() -> ExperimentConfig {
    ExperimentConfig { seed: SEED, ..Default::default() }
}

fn with_p(p: &str) -> ExperimentConfig {
    ExperimentConfig { p: Some(p.into()), ..cfg() }
}

/// Every (command, config) pair the acceptance runs use; criterion 10
/// reruns all of them.
fn configs() -> Vec<(Command, ExperimentConfig)> {
    let mut v = vec![(Command::Verify, cfg())];
    for p in ["0", "0.25", "0.4"] {
        v.push((Command::BranchingEquiv, with_p(p)));
    }
    v.extend([
        (Command::LocalConv, cfg()),
        (Command::BoltzmannConv, cfg()),
        (Command::PrefixLaw, cfg()),
        (Command::Rw, cfg()),
        (Command::Percolation, cfg()),
        (Command::Scaling, cfg()),
        (Command::Sample, cfg()),
    ]);
    v
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, Duration)> {
    let t = Instant::now();
    let x = f()?;
    Ok((x, t.elapsed()))
}

fn within(o: Outcome, took: Duration, limit_s: u64) -> Outcome {
    let ok = took <= Duration::from_secs(limit_s);
    let detail = format!("{}; {:.1} s (limit {} s)", o.detail, took.as_secs_f64(), limit_s);
    Outcome { pass: o.pass && ok, detail }
}

fn reports(cmd: Command, cfgs: &[ExperimentConfig]) -> Result<Vec<StatsReport>> {
    cfgs.iter().map(|c| run(cmd, c)).collect()
}

fn checks_of(rs: &[StatsReport]) -> Vec<Check> {
    rs.iter().flat_map(|r| r.checks.iter().cloned()).collect()
}

fn criteria() -> Result<Vec<(u32, &'static str, Outcome)>> {
    let mut out = Vec::new();

    let ((_, c), t) = timed(audit_suite)?;
    out.push((1, "bijection audit", within(of_checks(&c), t, 10)));

    let ((_, c), t) = timed(identity_suite)?;
    out.push((2, "exact identities", within(of_checks(&c), t, 30)));

    let ((_, c), t) = timed(radon_nikodym_suite)?;
    out.push((3, "Radon-Nikodym identity", within(of_checks(&c), t, 10)));

    let ((_, c), t) = timed(|| round_trip_suite(10_000, 0.3, SEED))?;
    out.push((4, "Psi and looptree round trips", within(of_checks(&c), t, 60)));

    let (rs, t) = timed(|| reports(Command::BranchingEquiv, &[with_p("0"), with_p("0.25"), with_p("0.4")]))?;
    out.push((5, "branching equivalence", within(of_checks(&checks_of(&rs)), t, 600)));

    let (rs, t) = timed(|| {
        let mut v = reports(Command::LocalConv, &[cfg()])?;
        v.extend(reports(Command::BoltzmannConv, &[cfg()])?);
        v.extend(reports(Command::PrefixLaw, &[cfg()])?);
        Ok(v)
    })?;
    out.push((6, "local convergence trends", within(of_checks(&checks_of(&rs)), t, 900)));

    let (rs, t) = timed(|| reports(Command::Rw, &[cfg()]))?;
    out.push((7, "recurrence diagnostics", within(of_checks(&checks_of(&rs)), t, 600)));

    let (rs, t) = timed(|| reports(Command::Percolation, &[cfg()]))?;
    out.push((8, "percolation containment", within(of_checks(&checks_of(&rs)), t, 600)));

    let (rs, t) = timed(|| reports(Command::Scaling, &[cfg()]))?;
    out.push((9, "scaling diagnostic", within(of_checks(&checks_of(&rs)), t, 300)));

    let mut differing = Vec::new();
    let all = configs();
    for cmd in Command::ALL {
        if !all.iter().any(|(c, _)| *c == cmd) {
            differing.push(format!("{} not covered", cmd.name()));
        }
    }
    for (cmd, c) in &all {
        let (a, b) = (run(*cmd, c)?, run(*cmd, c)?);
        if a.to_json() != b.to_json() || a.to_csv() != b.to_csv() {
            differing.push(format!("{} (p={:?})", cmd.name(), c.p));
        }
    }
    let detail = if differing.is_empty() {
        format!("{} configurations byte-identical over two runs", all.len())
    } else {
        format!("differing: {}", differing.join(", "))
    };
    out.push((10, "determinism", Outcome { pass: differing.is_empty(), detail }));
    Ok(out)
}

fn main() -> ExitCode {
    let strict = std::env::var("UIHPQ_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    match criteria() {
        Ok(rows) => {
            let mut failed = 0;
            for (i, name, o) in &rows {
                println!("criterion {i:>2} {}: {name} — {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
                failed += usize::from(!o.pass);
            }
            println!("acceptance: {} passed, {failed} failed", rows.len() - failed);
            if strict && failed > 0 {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            println!("acceptance: error: {e}");
            ExitCode::from(1)
        }
    }
}
