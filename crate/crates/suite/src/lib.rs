//! Acceptance criteria 1 to 9, each evaluated to a pass/fail [`Outcome`].
//!
//! Criterion 6 is judged on every splitting-started optimization performed
//! by criteria 3, 7, 8 and 9, so it is evaluated last.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use anyhow::{anyhow, Result};
use brickwall::circuit::{self, BrickwallCircuit};
use brickwall::linalg::CMat;
use brickwall::models::{
    exact_unitary, splitting_circuit, splitting_method, splitting_methods_catalog, LatticeModel, ModelKind,
};
use brickwall::trustregion::{optimize, OptimizationTrace, TrustRegionConfig};
use brickwall_cli::commands::run_extend;
use brickwall_cli::config::{ModelSpec, DEFAULT_MAX_DIMENSION};
use brickwall_cli::gatefile::GateFile;
use brickwall_cli::oracles;

const SEED: u64 = 0;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "criterion {} {status} {}: {}", self.id, self.title, self.detail)
    }
}

/// An optimization started from splitting gates, kept for the dominance check.
struct SplittingRun {
    label: String,
    warm: f64,
    final_error: f64,
    monotone: bool,
}

#[derive(Default)]
struct Ledger {
    runs: Vec<SplittingRun>,
}

fn ising(h: f64, size: usize) -> LatticeModel {
    LatticeModel::new(ModelKind::Ising1d { j: 1.0, g: 0.75, h }, size, 1.0).unwrap()
}

fn heisenberg() -> LatticeModel {
    LatticeModel::new(ModelKind::Heisenberg1d { j: [1.0, 1.0, -0.5], h: [0.75, 0.0, 0.0] }, 6, 0.25).unwrap()
}

fn ladder(columns: usize) -> LatticeModel {
    LatticeModel::new(ModelKind::IsingLadder { j: 1.0, g: 3.0 }, columns, 0.25).unwrap()
}

fn spectral(c: &BrickwallCircuit, u: &CMat) -> f64 {
    circuit::spectral_distance(&circuit::circuit_matrix(c), u).unwrap()
}

fn monotone(trace: &OptimizationTrace) -> bool {
    trace.accepted_f().windows(2).all(|w| w[1] <= w[0])
}

/// Optimizes from `start`; splitting starts are logged for the dominance check.
fn run(
    ledger: &mut Ledger,
    label: &str,
    start: &BrickwallCircuit,
    u: &CMat,
    max_iter: usize,
    from_splitting: bool,
) -> (BrickwallCircuit, f64, f64) {
    let config = TrustRegionConfig { max_iter, ..Default::default() };
    let clock = Instant::now();
    let (opt, trace) = optimize(start, u, &config).unwrap();
    let seconds = clock.elapsed().as_secs_f64();
    let final_error = spectral(&opt, u);
    let warm = spectral(start, u);
    eprintln!("  {label}: {warm:.3e} -> {final_error:.3e} ({} accepted, {seconds:.1} s)", trace.accepted_steps());
    if from_splitting {
        ledger.runs.push(SplittingRun { label: label.to_string(), warm, final_error, monotone: monotone(&trace) });
    }
    (opt, final_error, seconds)
}

fn settings() -> Vec<(&'static str, LatticeModel)> {
    vec![("ising h=0", ising(0.0, 6)), ("ising h=0.6", ising(0.6, 6)), ("heisenberg", heisenberg())]
}

fn c1() -> Result<(bool, String)> {
    let clock = Instant::now();
    let r = oracles::manifold_invariants(10_000, 4, SEED)?;
    let seconds = clock.elapsed().as_secs_f64();
    let ok = r.retraction_unitarity <= 1e-12
        && r.projection_idempotence <= 1e-12
        && r.projection_self_adjointness <= 1e-12
        && r.embedding_isometry <= 1e-13
        && seconds < 10.0;
    Ok((
        ok,
        format!(
            "10^4 pairs: retraction {:.1e}, idempotence {:.1e}, self-adjointness {:.1e}, isometry {:.1e}; {seconds:.2} s",
            r.retraction_unitarity, r.projection_idempotence, r.projection_self_adjointness, r.embedding_isometry
        ),
    ))
}

fn c2() -> Result<(bool, String)> {
    let clock = Instant::now();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (k, (name, model)) in settings().into_iter().enumerate() {
        let u = exact_unitary(&model)?;
        let c = splitting_circuit(&splitting_method("strang")?, &model, 2)?;
        let e = oracles::gradient_fd_error(&c, &u, 20, SEED + k as u64)?;
        worst = worst.max(e);
        parts.push(format!("{name} {e:.1e}"));
    }
    let seconds = clock.elapsed().as_secs_f64();
    Ok((worst <= 1e-6 && seconds < 60.0, format!("20 directions each: {}; {seconds:.1} s", parts.join(", "))))
}

fn c3(ledger: &mut Ledger) -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, (name, model)) in settings().into_iter().enumerate() {
        let u = exact_unitary(&model)?;
        let c = splitting_circuit(&splitting_method("strang")?, &model, 2)?;
        let r = oracles::hessian_check(&c, &u, 5, SEED + 10 + k as u64)?;
        ok &= r.asymmetry <= 1e-10 && r.fd_error <= 1e-4;
        parts.push(format!("{name} asym {:.1e} fd {:.1e}", r.asymmetry, r.fd_error));
    }
    let model = ising(0.0, 6);
    let u = exact_unitary(&model)?;
    let start = splitting_circuit(&splitting_method("strang")?, &model, 1)?;
    let (opt, _, _) = run(ledger, "ising n=3 (strang r=1)", &start, &u, 200, true);
    let grad = circuit::riemannian_gradient(&opt, &u)?.norm();
    let min_ev = oracles::min_hessian_eigenvalue(&opt, &u)?;
    ok &= min_ev >= -1e-8;
    parts.push(format!("n=3 optimum: min eigenvalue {min_ev:.2e} (gradient norm {grad:.1e})"));
    Ok((ok, parts.join("; ")))
}

fn c4() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for h in [0.0, 0.6] {
        worst = worst.max(oracles::strang_fidelity(&ising(h, 6))?);
    }
    let (chain, lad) = (ising(0.0, 6), ladder(4));
    let mut counts_ok = true;
    for m in splitting_methods_catalog() {
        let model = if m.partitions == 2 { &chain } else { &lad };
        for r in 1..=8 {
            counts_ok &= splitting_circuit(&m, model, r)?.num_layers() == (m.s() - 1) * r + 1;
        }
    }
    let s6 = splitting_circuit(&splitting_method("blanes-moan-s6")?, &chain, 4)?.num_layers();
    Ok((
        worst <= 1e-12 && counts_ok && s6 == 49,
        format!(
            "Strang r=1 vs dense product: {worst:.1e}; n = (s-1)r+1 for r = 1..8: {}; S6 r=4 gives {s6} layers",
            if counts_ok { "holds" } else { "violated" }
        ),
    ))
}

fn c5() -> Result<(bool, String)> {
    let clock = Instant::now();
    let steps = [1usize, 2, 4, 8];
    let cases = [
        ("strang", ising(0.0, 6)),
        ("suzuki4", ising(0.0, 6)),
        ("yoshida4", ising(0.0, 6)),
        ("mclachlan4", ising(0.0, 6)),
        ("blanes-moan-s6", ising(0.0, 6)),
        ("yoshida6-3", ladder(4)),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    let mut targets = std::collections::HashMap::new();
    for (name, model) in cases {
        let key = format!("{:?}", model);
        if !targets.contains_key(&key) {
            targets.insert(key.clone(), exact_unitary(&model)?);
        }
        let u = &targets[&key];
        let m = splitting_method(name)?;
        let errs: Vec<f64> = steps
            .iter()
            .map(|&r| Ok(spectral(&splitting_circuit(&m, &model, r)?, u)))
            .collect::<Result<_>>()?;
        let slope = oracles::loglog_slope(&steps, &errs);
        let tail = (errs[2] / errs[3]).log2();
        let pass = (slope - f64::from(m.nominal_order)).abs() <= 0.2;
        ok &= pass;
        parts.push(format!(
            "{name} {slope:.2}/{} [{}] (r=4..8 slope {tail:.2})",
            m.nominal_order,
            if pass { "ok" } else { "off" }
        ));
    }
    let seconds = clock.elapsed().as_secs_f64();
    Ok((ok && seconds < 120.0, format!("LSQ slope/nominal: {}; {seconds:.1} s", parts.join(", "))))
}

fn c7(ledger: &mut Ledger) -> Result<(bool, String)> {
    let model = ising(0.0, 6);
    let u = exact_unitary(&model)?;
    let mut best = f64::INFINITY;
    let mut best_name = String::new();
    for m in splitting_methods_catalog().into_iter().filter(|m| m.partitions == 2 && m.nominal_order == 4) {
        let points: Vec<(f64, f64)> = (1..=8)
            .map(|r| {
                let c = splitting_circuit(&m, &model, r)?;
                Ok((c.num_layers() as f64, spectral(&c, &u)))
            })
            .collect::<Result<_>>()?;
        let at7 = oracles::loglog_interpolate(&points, 7.0);
        if at7 < best {
            best = at7;
            best_name = m.name.clone();
        }
    }
    let strang = splitting_method("strang")?;
    let start7 = splitting_circuit(&strang, &model, 3)?;
    let (_, e7, t7) = run(ledger, "ising n=7 (strang r=3)", &start7, &u, 200, true);
    let start9 = splitting_circuit(&strang, &model, 4)?;
    let (_, e9, t9) = run(ledger, "ising n=9 (strang r=4)", &start9, &u, 200, true);
    let s6 = spectral(&splitting_circuit(&splitting_method("blanes-moan-s6")?, &model, 4)?, &u);
    let ok = e7 * 10.0 <= best && e9 <= s6 && t7 < 600.0 && t9 < 600.0;
    Ok((
        ok,
        format!(
            "n=7 optimized {e7:.2e} vs best 4th-order at n=7 {best:.2e} ({best_name}, ratio {:.0}x); \
             n=9 optimized {e9:.2e} vs S6 r=4 (n=49) {s6:.2e}; {t7:.0} s and {t9:.0} s",
            best / e7
        ),
    ))
}

fn c8(ledger: &mut Ledger) -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    let mut eval_seconds = 0.0;

    let model = ising(0.0, 6);
    let u = exact_unitary(&model)?;
    let start = splitting_circuit(&splitting_method("strang")?, &model, 2)?;
    let (opt, _, _) = run(ledger, "ising n=5 (strang r=2)", &start, &u, 200, true);
    let file = GateFile::new(ModelSpec::from_model(&model), &opt, &u)?;
    let clock = Instant::now();
    let rep = run_extend(&file, &[8, 10], DEFAULT_MAX_DIMENSION)?;
    eval_seconds += clock.elapsed().as_secs_f64();
    let base = rep.rows[0].spectral;
    for row in &rep.rows[1..] {
        ok &= row.spectral <= 2.0 * base;
    }
    parts.push(format!(
        "ising n=5: {}",
        rep.rows.iter().map(|r| format!("L={} {:.3e}", r.size, r.spectral)).collect::<Vec<_>>().join(", ")
    ));

    let model = ladder(4);
    let u = exact_unitary(&model)?;
    let start = splitting_circuit(&splitting_method("strang3")?, &model, 1)?;
    let (opt, _, _) = run(ledger, "ladder 4x2 n=5 (strang3 r=1)", &start, &u, 100, true);
    let file = GateFile::new(ModelSpec::from_model(&model), &opt, &u)?;
    let clock = Instant::now();
    let rep = run_extend(&file, &[6], DEFAULT_MAX_DIMENSION)?;
    eval_seconds += clock.elapsed().as_secs_f64();
    ok &= rep.rows[1].spectral <= 2.0 * rep.rows[0].spectral;
    parts.push(format!("ladder n=5: 4x2 {:.3e}, 6x2 {:.3e}", rep.rows[0].spectral, rep.rows[1].spectral));
    ok &= eval_seconds < 120.0;
    Ok((ok, format!("{}; extension evaluation {eval_seconds:.0} s", parts.join("; "))))
}

fn c9(ledger: &mut Ledger) -> Result<(bool, String)> {
    // the gap between the two starts opens with depth; compare at the deepest circuit
    let model = heisenberg();
    let u = exact_unitary(&model)?;
    let r = 10;
    let n = 2 * r + 1;
    let split = splitting_circuit(&splitting_method("strang")?, &model, r)?;
    let (_, e_split, _) = run(ledger, "heisenberg n=21 (strang r=10)", &split, &u, 200, true);
    let ident = BrickwallCircuit::identity(&model.geometry(), 2, n)?;
    let (_, e_ident, _) = run(ledger, "heisenberg n=21 (identity)", &ident, &u, 200, false);
    Ok((
        e_ident >= e_split,
        format!("largest tested n = {n}: identity start {e_ident:.4e}, splitting start {e_split:.4e}"),
    ))
}

fn c6(ledger: &Ledger) -> (bool, String) {
    let mut ok = !ledger.runs.is_empty();
    let mut parts = Vec::new();
    for r in &ledger.runs {
        let pass = r.final_error <= r.warm && r.monotone;
        ok &= pass;
        if !pass {
            parts.push(format!("{}: {:.3e} -> {:.3e}, monotone {}", r.label, r.warm, r.final_error, r.monotone));
        }
    }
    let detail = if parts.is_empty() {
        format!("{} splitting-start runs: final <= warm start and accepted f non-increasing", ledger.runs.len())
    } else {
        parts.join("; ")
    };
    (ok, detail)
}

fn guarded<F: FnOnce() -> Result<(bool, String)>>(f: F) -> (bool, String) {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(r)) => r,
        Ok(Err(e)) => (false, format!("error: {e:#}")),
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panic: {}", anyhow!(msg)))
        }
    }
}

/// Runs every criterion in dependency order; `progress` sees each outcome as
/// it completes. The result is sorted by criterion number.
pub fn run_all(mut progress: impl FnMut(&Outcome)) -> Vec<Outcome> {
    let mut ledger = Ledger::default();
    let mut out = Vec::new();
    let mut record = |id, title, (passed, detail): (bool, String)| {
        let o = Outcome { id, title, passed, detail };
        progress(&o);
        out.push(o);
    };
    record(1, "manifold invariants", guarded(c1));
    record(2, "gradient oracle", guarded(c2));
    record(3, "hessian oracle", guarded(|| c3(&mut ledger)));
    record(4, "splitting fidelity", guarded(c4));
    record(5, "convergence orders", guarded(c5));
    record(7, "headline improvement", guarded(|| c7(&mut ledger)));
    record(8, "size extension", guarded(|| c8(&mut ledger)));
    record(9, "identity-start contrast", guarded(|| c9(&mut ledger)));
    record(6, "optimization dominance", c6(&ledger));
    out.sort_by_key(|o| o.id);
    out
}
