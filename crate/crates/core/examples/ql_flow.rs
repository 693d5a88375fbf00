//! Gradient flow of `log Q_L` from a small potential, plus a run that
//! starts from an inadmissible potential.

use quillen::energy::critical_point_residual;
use quillen::flow_engine::{ql_derivative_channel, qL_gradient_flow, run_flow, FlowConfig, FlowKind};
use quillen::surface_model::{random_field, BandLimited, ConformalTorus, TorusShape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let shape = TorusShape::square(16)?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let phi = random_field(shape, BandLimited::new(2, 0.05), &mut rng)?;
    let m0 = ConformalTorus::new(shape, phi)?;
    let cfg = FlowConfig {
        t_end: 1.0,
        record_interval: 5e-4,
        track_k_energy: true,
        ..FlowConfig::default()
    };
    let start = std::time::Instant::now();
    let trace = qL_gradient_flow(&m0, &cfg)?;
    println!(
        "{:?}: {} accepted / {} rejected ({:.2?})",
        trace.outcome,
        trace.accepted_steps,
        trace.rejected_steps,
        start.elapsed()
    );
    for s in trace.samples.iter().step_by(2) {
        println!(
            "t={:.4} sup={:.3e} mu={:.6e} adm={:.4}",
            s.t,
            s.sup_s_dev,
            s.k_energy.unwrap_or(f64::NAN),
            s.admissibility.unwrap_or(f64::NAN)
        );
    }
    println!("critical point residual {:.2e}", critical_point_residual(&trace.terminal));
    if let Some((worst, tol)) = ql_derivative_channel(&trace) {
        println!("derivative channel discrepancy {worst:.2e} (tolerance {tol:.2e})");
    }

    // A potential with 1 − Δψ < 0 somewhere is rejected up front.
    let bad: Vec<f64> = random_field(shape, BandLimited::new(3, 1.0), &mut rng)?
        .iter()
        .map(|v| v * 0.05)
        .collect();
    let cfg = FlowConfig {
        kind: FlowKind::QlGradient,
        ..cfg
    };
    let trace = run_flow(&ConformalTorus::flat(shape), Some(&bad), &cfg)?;
    println!("inadmissible start: {:?}", trace.outcome);
    Ok(())
}
