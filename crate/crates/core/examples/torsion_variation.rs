//! First variation of the analytic torsion along `ω + iu∂∂̄ψ`: centered
//! differences of the spectral determinant against the anomaly quadrature.

use quillen::spectral_engine::{torsion_variation_fd, torsion_variation_quadrature};
use quillen::surface_model::{random_field, BandLimited, ConformalTorus, TorusShape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let shape = TorusShape::square(32)?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let flat = ConformalTorus::flat(shape);
    for _ in 0..3 {
        let psi = random_field(shape, BandLimited::new(3, 0.01), &mut rng)?;
        println!("flat: fd {:.3e}", torsion_variation_fd(&flat, &psi, 2.5e-3)?);
    }
    let curved = ConformalTorus::new(shape, random_field(shape, BandLimited::new(2, 0.2), &mut rng)?)?;
    for _ in 0..3 {
        let psi = random_field(shape, BandLimited::new(3, 0.01), &mut rng)?;
        let fd = torsion_variation_fd(&curved, &psi, 2.5e-3)?;
        let q = torsion_variation_quadrature(&curved, &psi)?;
        println!("curved: fd {fd:.9e} quadrature {q:.9e} rel {:.2e}", (fd - q).abs() / q.abs());
    }
    Ok(())
}
