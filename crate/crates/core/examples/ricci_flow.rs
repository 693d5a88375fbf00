//! Normalized Ricci flow from a random conformal factor, with the
//! determinant and K-energy channels and the monotonicity report.

use quillen::flow_engine::{monotonicity_report, ricci_flow, FlowConfig};
use quillen::surface_model::{random_field, BandLimited, ConformalTorus, TorusShape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(64);
    let shape = TorusShape::square(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let phi = random_field(shape, BandLimited::new(3, 0.3), &mut rng)?;
    let m0 = ConformalTorus::new(shape, phi)?;
    let cfg = FlowConfig {
        t_end: 2.0,
        record_interval: 0.005,
        det_times: (0..10).map(|k| 0.002 * k as f64).collect(),
        track_k_energy: true,
        ..FlowConfig::default()
    };
    let start = std::time::Instant::now();
    let trace = ricci_flow(&m0, &cfg)?;
    println!(
        "{:?} after {} accepted / {} rejected steps ({:.2?})",
        trace.outcome,
        trace.accepted_steps,
        trace.rejected_steps,
        start.elapsed()
    );
    for s in trace.samples.iter().filter(|s| s.log_det.is_some()) {
        println!(
            "t={:.3} sup={:.3e} l2={:.4e} logdet={:.8} mu={:.6e}",
            s.t,
            s.sup_s_dev,
            s.l2_s_dev_sq,
            s.log_det.unwrap(),
            s.k_energy.unwrap_or(f64::NAN)
        );
    }
    let last = trace.final_sample();
    println!(
        "final t={:.3} sup={:.3e} area drift {:.2e} mu={:.3e}",
        last.t,
        last.sup_s_dev,
        (last.area - trace.samples[0].area).abs() / trace.samples[0].area,
        last.k_energy.unwrap_or(f64::NAN)
    );
    println!("{:#?}", monotonicity_report(&trace, 1e-6)?);
    Ok(())
}
