//! Curvature of a conformal torus, the potential bridge to Kähler
//! potentials, and field files.

use quillen::surface_model::{
    conformal_to_potential, io, potential_to_conformal, random_field, BandLimited, ConformalTorus, TorusShape,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let shape = TorusShape::new(num_complex::Complex64::new(0.3, 1.2), 32)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let m = ConformalTorus::new(shape, random_field(shape, BandLimited::new(3, 0.25), &mut rng)?)?;
    println!("metric {} area {:.12}", m.metric_id(), m.area());
    println!("Gauss-Bonnet residual {:.2e}", m.gauss_bonnet_residual());
    println!(
        "sup|s - s0| {:.4e}, int (s - s0)^2 dv {:.4e}",
        m.sup_curvature_deviation(),
        m.curvature_deviation_sq()
    );

    let potential = conformal_to_potential(&m)?;
    println!("potential over the flat metric: min(1 - lap psi) = {:.4}", potential.admissibility());
    let back = potential_to_conformal(&potential);
    let err = m.phi().iter().zip(back.phi()).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    println!("bridge round trip {err:.2e}");

    let path = std::env::temp_dir().join("quillen-example-phi.csv");
    io::write_csv(std::fs::File::create(&path)?, shape, m.phi())?;
    let read = io::read_metric(&path)?;
    println!("csv round trip identical: {}", read == m);
    std::fs::remove_file(path)?;
    Ok(())
}
