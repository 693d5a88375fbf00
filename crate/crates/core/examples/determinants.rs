//! Flat and conformal determinants from the spectral engine against the
//! Epstein and Polyakov oracles.

use num_complex::Complex64;
use quillen::spectral_engine::{epstein_log_det, laplacian_spectrum, polyakov_log_det, zeta_log_det};
use quillen::surface_model::{random_field, BandLimited, ConformalTorus, TorusShape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for tau in [Complex64::new(0.0, 1.0), Complex64::new(0.5, 1.0), Complex64::new(0.0, 2.0)] {
        let shape = TorusShape::new(tau, 32)?;
        let start = std::time::Instant::now();
        let spec = laplacian_spectrum(&ConformalTorus::flat(shape))?;
        let z = zeta_log_det(&spec);
        let e = epstein_log_det(tau, shape.base_area());
        println!(
            "flat tau={tau}: zeta {:.12} epstein {:.12} diff {:.2e} est {:.1e} residual {:.1e} ({:.2?})",
            z.log_det,
            e.log_det,
            z.log_det - e.log_det,
            z.error_estimate,
            spec.residual,
            start.elapsed()
        );
    }
    let shape = TorusShape::square(32)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..3 {
        let phi = random_field(shape, BandLimited::new(2, 0.2), &mut rng)?;
        let m = ConformalTorus::new(shape, phi)?;
        let z = zeta_log_det(&laplacian_spectrum(&m)?);
        let p = polyakov_log_det(&m);
        println!(
            "conformal: zeta {:.9} polyakov {:.9} diff {:.2e} est {:.1e}",
            z.log_det,
            p.log_det,
            z.log_det - p.log_det,
            z.error_estimate
        );
    }
    Ok(())
}
