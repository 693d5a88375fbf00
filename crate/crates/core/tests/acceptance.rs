//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use quillen::chern_calculus::verify::run_suite;
use quillen::energy::{
    c_one, critical_point_residual, flat_potential, k_energy, k_energy_from_flat, k_energy_between, k_energy_cocycle_check,
    relative_ql_detailed, PotentialPath,
};
use quillen::flow_engine::{
    monotonicity_report, ql_derivative_channel, qL_gradient_flow, ricci_flow, run_flow, FlowConfig, FlowKind,
    FlowOutcome, FlowTrace,
};
use quillen::spectral_engine::{
    epstein_log_det, epstein_log_det_raw, laplacian_spectrum, polyakov_log_det, torsion_variation_fd,
    torsion_variation_quadrature, zeta_log_det,
};
use quillen::surface_model::{potential_relative_to, random_field, BandLimited, ConformalTorus, TorusShape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Res<T> = Result<T, Box<dyn std::error::Error>>;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Res<Verdict> {
    Ok(Verdict { pass, detail })
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn chern_suite() -> Res<Verdict> {
    let start = Instant::now();
    let mut worst_fd = 0.0f64;
    let mut worst_identity = 0.0f64;
    let mut all = true;
    let mut n2_exact = false;
    for n in 1..=3 {
        let r = run_suite(n, 100, 11 + n as u64)?;
        all &= r.passes();
        let m = &r.max_residuals;
        worst_fd = worst_fd.max(m.derivative_fd);
        worst_identity = worst_identity
            .max(m.constant_h_chern)
            .max(m.constant_h_trace)
            .max(m.chern_delta_vs_newton)
            .max(m.newton_round_trip);
        if n == 2 {
            n2_exact = r.todd_n2_exact && m.n2_integrand.is_some_and(|v| v < 1e-10);
        }
    }
    let t = start.elapsed();
    verdict(
        all && worst_fd < 1e-8 && worst_identity < 1e-10 && n2_exact && within(t, 10.0),
        format!(
            "derivative fd {worst_fd:.1e} (< 1e-8), identities {worst_identity:.1e} (< 1e-10), n=2 integrand exact {n2_exact}, {t:.1?}"
        ),
    )
}

fn flat_determinants() -> Res<Verdict> {
    let mut worst = 0.0f64;
    let mut slowest = Duration::ZERO;
    for tau in [Complex64::new(0.0, 1.0), Complex64::new(0.5, 1.0), Complex64::new(0.0, 2.0)] {
        let start = Instant::now();
        let shape = TorusShape::new(tau, 32)?;
        let z = zeta_log_det(&laplacian_spectrum(&ConformalTorus::flat(shape))?);
        worst = worst.max((z.log_det - epstein_log_det(tau, shape.base_area()).log_det).abs());
        slowest = slowest.max(start.elapsed());
    }
    let mut modular = 0.0f64;
    for tau in [Complex64::new(0.0, 1.0), Complex64::new(0.5, 1.0), Complex64::new(0.0, 2.0), Complex64::new(0.31, 0.77)] {
        let a = epstein_log_det_raw(tau, 1.0);
        modular = modular
            .max((a - epstein_log_det_raw(-tau.inv(), 1.0)).abs())
            .max((a - epstein_log_det_raw(tau + 1.0, 1.0)).abs());
    }
    verdict(
        worst < 1e-6 && modular < 1e-12 && within(slowest, 60.0),
        format!("max |zeta - epstein| {worst:.2e} (< 1e-6), modular {modular:.1e} (< 1e-12), slowest {slowest:.1?}"),
    )
}

fn conformal_anomaly() -> Res<Verdict> {
    let start = Instant::now();
    let shape = TorusShape::square(32)?;
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let m = ConformalTorus::new(shape, random_field(shape, BandLimited::new(2, 0.2), &mut rng)?)?;
        let z = zeta_log_det(&laplacian_spectrum(&m)?);
        worst = worst.max((z.log_det - polyakov_log_det(&m).log_det).abs());
    }
    let t = start.elapsed();
    verdict(
        worst < 1e-3 && within(t, 600.0),
        format!("max |zeta - polyakov| {worst:.2e} over 10 metrics (< 1e-3), {t:.1?}"),
    )
}

fn torsion_variation() -> Res<Verdict> {
    let start = Instant::now();
    let shape = TorusShape::square(32)?;
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let flat = ConformalTorus::flat(shape);
    let mut flat_worst = 0.0f64;
    for _ in 0..10 {
        let psi = random_field(shape, BandLimited::new(3, 0.01), &mut rng)?;
        flat_worst = flat_worst.max(torsion_variation_fd(&flat, &psi, 2.5e-3)?.abs());
    }
    let curved = ConformalTorus::new(shape, random_field(shape, BandLimited::new(2, 0.2), &mut rng)?)?;
    let mut rel_worst = 0.0f64;
    for _ in 0..3 {
        let psi = random_field(shape, BandLimited::new(3, 0.01), &mut rng)?;
        let fd = torsion_variation_fd(&curved, &psi, 2.5e-3)?;
        let q = torsion_variation_quadrature(&curved, &psi)?;
        rel_worst = rel_worst.max((fd - q).abs() / q.abs());
    }
    let t = start.elapsed();
    verdict(
        flat_worst < 1e-4 && rel_worst < 0.02 && within(t, 900.0),
        format!("flat |fd| {flat_worst:.1e} (< 1e-4), curved relative {rel_worst:.2e} (< 2%), {t:.1?}"),
    )
}

fn ricci_run() -> Res<(FlowTrace, Duration)> {
    let shape = TorusShape::square(64)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m0 = ConformalTorus::new(shape, random_field(shape, BandLimited::new(3, 0.3), &mut rng)?)?;
    let cfg = FlowConfig {
        t_end: 2.0,
        record_interval: 0.005,
        det_times: (0..10).map(|k| 0.002 * k as f64).collect(),
        det_resolution: 32,
        track_k_energy: true,
        ..FlowConfig::default()
    };
    let start = Instant::now();
    let trace = ricci_flow(&m0, &cfg)?;
    Ok((trace, start.elapsed()))
}

fn ricci_monotonicity(trace: &FlowTrace, t: Duration) -> Res<Verdict> {
    let r = monotonicity_report(trace, 1e-6)?;
    verdict(
        r.l2_violations == 0
            && r.log_det_violations == 0
            && r.det_samples == 10
            && r.relative_error < 0.05
            && r.r_squared > 0.99
            && within(t, 1200.0),
        format!(
            "{:?}, l2 violations {}, log det violations {}, {} det samples, channel error {:.2}% (< 5%), tail R^2 {:.6} (> 0.99), {t:.1?}",
            trace.outcome,
            r.l2_violations,
            r.log_det_violations,
            r.det_samples,
            100.0 * r.relative_error,
            r.r_squared
        ),
    )
}

fn ql_maximality(trace: &FlowTrace, flow_time: Duration) -> Res<Verdict> {
    let start = Instant::now();
    let shape = TorusShape::square(32)?;
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let flat = ConformalTorus::flat(shape);
    let mut largest = f64::NEG_INFINITY;
    for _ in 0..5 {
        let g = ConformalTorus::new(shape, random_field(shape, BandLimited::new(2, 0.2), &mut rng)?)?.with_area(flat.area());
        largest = largest.max(relative_ql_detailed(&g, &flat)?.0);
    }
    let terminal = &trace.terminal;
    let residual = critical_point_residual(terminal);
    let flat_ref = ConformalTorus::flat(terminal.shape()).with_area(terminal.area());
    let (v, err) = relative_ql_detailed(terminal, &flat_ref)?;
    let t = start.elapsed() + flow_time;
    verdict(
        largest < 0.0 && residual < 1e-5 && v.abs() <= err && within(t, 1800.0),
        format!(
            "max relative log Q_L over 5 metrics {largest:.3e} (< 0), terminal residual {residual:.2e} (< 1e-5), terminal relative log Q_L {v:.3e} vs quadrature error {err:.3e}, {t:.1?}"
        ),
    )
}

fn k_energy_properties() -> Res<Verdict> {
    let start = Instant::now();
    let shape = TorusShape::square(32)?;
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let mut metric = |amp: f64| -> Res<ConformalTorus> {
        Ok(ConformalTorus::new(shape, random_field(shape, BandLimited::new(2, amp), &mut rng)?)?)
    };
    let g1 = metric(0.2)?;
    let area = g1.area();
    let g2 = metric(0.15)?.with_area(area);
    let g3 = metric(0.1)?.with_area(area);

    let (flat, psi1) = flat_potential(&g1)?;
    let psi2 = potential_relative_to(&g2, &flat)?.psi().to_vec();
    let straight = k_energy(&PotentialPath::straight(flat.clone(), psi1.clone(), psi2.clone()))?;
    let mid: Vec<f64> = psi1.iter().zip(&psi2).map(|(a, b)| 0.4 * (a + b)).collect();
    let bent = k_energy(&PotentialPath::through(flat.clone(), psi1.clone(), mid, psi2.clone()))?;
    let path_diff = (straight.value - bent.value).abs();
    let path_tol = 3.0 * (straight.quadrature_error + bent.quadrature_error);

    let (cocycle, cocycle_err) = k_energy_cocycle_check(&g1, &g2, &g3)?;

    let base = k_energy_between(&g1, &g2)?.value;
    let moved = k_energy_between(&g1.translated(5, 11), &g2.translated(5, 11))?.value;
    let translation = (base - moved).abs();

    let path = PotentialPath::straight(flat.clone(), psi1, psi2);
    let cn = c_one(&flat);
    let log_q = |u: f64| -> Res<f64> { Ok(-cn * k_energy(&path.reparametrized(0.0, u, |v| v, |_| 1.0))?.value) };
    let mut gradient = 0.0f64;
    for u in [0.25, 0.5, 0.75] {
        let h = 1e-3;
        let fd = (log_q(u + h)? - log_q(u - h)?) / (2.0 * h);
        let exact = cn * path.integrand(u)?;
        gradient = gradient.max((fd - exact).abs() / exact.abs());
    }
    let t = start.elapsed();
    verdict(
        path_diff <= path_tol && cocycle <= 3.0 * cocycle_err && translation < 1e-10 && gradient < 0.01 && within(t, 300.0),
        format!(
            "paths {path_diff:.1e} (<= {path_tol:.1e}), cocycle {cocycle:.1e} (<= {:.1e}), translation {translation:.1e} (< 1e-10), gradient {:.1e}% (< 1%), {t:.1?}",
            3.0 * cocycle_err,
            100.0 * gradient
        ),
    )
}

fn ql_flow() -> Res<Verdict> {
    let start = Instant::now();
    let shape = TorusShape::square(16)?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let m0 = ConformalTorus::new(shape, random_field(shape, BandLimited::new(2, 0.05), &mut rng)?)?;
    let cfg = FlowConfig {
        t_end: 1.0,
        record_interval: 5e-4,
        track_k_energy: true,
        ..FlowConfig::default()
    };
    let trace = qL_gradient_flow(&m0, &cfg)?;
    let mut increases = 0;
    for w in trace.samples.windows(2) {
        let (a, b) = (w[0].k_energy.unwrap_or(f64::NAN), w[1].k_energy.unwrap_or(f64::NAN));
        if !(b <= a + w[0].k_energy_error.unwrap_or(0.0) + w[1].k_energy_error.unwrap_or(0.0)) {
            increases += 1;
        }
    }
    let last = trace.final_sample().k_energy.unwrap_or(f64::NAN);
    // The limit of the flow is the flat metric of the same area.
    let limit = ConformalTorus::flat(shape).with_area(trace.terminal.area());
    let terminal_mu = k_energy_from_flat(&limit)?.value;
    let gap = (last - terminal_mu).abs();
    let residual = critical_point_residual(&trace.terminal);
    let (worst, tol) = ql_derivative_channel(&trace).ok_or("no K-energy channel")?;

    let bad: Vec<f64> = random_field(shape, BandLimited::new(3, 1.0), &mut rng)?.iter().map(|v| v * 0.05).collect();
    let cfg = FlowConfig {
        kind: FlowKind::QlGradient,
        ..cfg
    };
    let lost = run_flow(&ConformalTorus::flat(shape), Some(&bad), &cfg)?;
    let lost_ok = matches!(lost.outcome, FlowOutcome::AdmissibilityLost { .. });
    let t = start.elapsed();
    verdict(
        matches!(trace.outcome, FlowOutcome::Converged { .. })
            && increases == 0
            && gap < 1e-8
            && residual < 1e-5
            && worst <= tol
            && lost_ok
            && within(t, 1200.0),
        format!(
            "{:?}, {increases} increases of mu, |mu_last - mu(limit)| {gap:.1e} (< 1e-8), residual {residual:.2e} (< 1e-5), channel {worst:.1e} (<= {tol:.1e}), inadmissible start {:?}, {t:.1?}",
            trace.outcome, lost.outcome
        ),
    )
}

fn run_cli(dir: &Path, args: &[&str]) -> Res<Vec<u8>> {
    let out = Command::new(env!("CARGO_BIN_EXE_quillen"))
        .args(args)
        .current_dir(dir)
        .env("QUILLEN_OUTPUT", "out")
        .output()?;
    if !out.status.success() {
        return Err(format!("{args:?} exited with {:?}", out.status.code()).into());
    }
    Ok(std::fs::read(dir.join("out/summary.json"))?)
}

fn cli_reproducibility() -> Res<Verdict> {
    let start = Instant::now();
    let runs: [&[&str]; 4] = [
        &["det", "--seed", "3", "--max-frequency", "2", "--amplitude", "0.2", "--grid", "16"],
        &[
            "flow", "--seed", "3", "--max-frequency", "2", "--amplitude", "0.2", "--grid", "16", "--t-end", "0.05",
            "--record-interval", "0.01", "--track-k-energy",
        ],
        &["kenergy", "--seed", "3", "--max-frequency", "2", "--amplitude", "0.2", "--grid", "16"],
        &["verify-chern", "--seed", "3", "--n", "2", "--trials", "20"],
    ];
    let mut identical = 0;
    for args in runs {
        let a = tempfile::tempdir()?;
        let b = tempfile::tempdir()?;
        if run_cli(a.path(), args)? == run_cli(b.path(), args)? {
            identical += 1;
        }
    }
    let t = start.elapsed();
    verdict(
        identical == runs.len() && within(t, 120.0),
        format!("{identical}/{} commands byte-identical across two runs, {t:.1?}", runs.len()),
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |id: usize, name: &str, r: Res<Verdict>| {
        let (pass, detail) = match r {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!("criterion {id} [{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    };
    report(1, "Chern identity suite", chern_suite());
    report(2, "flat torus determinant", flat_determinants());
    report(3, "conformal anomaly", conformal_anomaly());
    report(4, "torsion first variation", torsion_variation());
    match ricci_run() {
        Ok((trace, t)) => {
            report(5, "Ricci flow monotonicity", ricci_monotonicity(&trace, t));
            report(6, "log Q_L maximality", ql_maximality(&trace, t));
        }
        Err(e) => {
            report(5, "Ricci flow monotonicity", Err(format!("{e}").into()));
            report(6, "log Q_L maximality", Err(e));
        }
    }
    report(7, "K-energy properties", k_energy_properties());
    report(8, "log Q_L gradient flow", ql_flow());
    report(9, "CLI reproducibility", cli_reproducibility());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
