//! K-energy: path independence, cocycle, gradient consistency and the
//! relative `log Q_L` against the flat metric.

use quillen::energy::{
    c_one, flat_potential, k_energy, k_energy_cocycle_check, relative_ql_detailed, PotentialPath,
};
use quillen::surface_model::{random_field, BandLimited, ConformalTorus, TorusShape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let shape = TorusShape::square(32)?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut metric = |amp: f64| -> Result<ConformalTorus, Box<dyn std::error::Error>> {
        Ok(ConformalTorus::new(shape, random_field(shape, BandLimited::new(2, amp), &mut rng)?)?)
    };
    let g1 = metric(0.2)?;
    let area = g1.area();
    let g2 = metric(0.15)?.with_area(area);
    let g3 = metric(0.1)?.with_area(area);

    let (flat, psi1) = flat_potential(&g1)?;
    let psi2 = quillen::surface_model::potential_relative_to(&g2, &flat)?.psi().to_vec();
    let straight = k_energy(&PotentialPath::straight(flat.clone(), psi1.clone(), psi2.clone()))?;
    let mid: Vec<f64> = psi1.iter().zip(&psi2).map(|(a, b)| 0.5 * (a + b) * 0.8).collect();
    let curved = k_energy(&PotentialPath::through(flat.clone(), psi1.clone(), mid, psi2.clone()))?;
    println!(
        "M(g1, g2): straight {:.10e}, quadratic {:.10e}, difference {:.1e} (errors {:.1e})",
        straight.value,
        curved.value,
        (straight.value - curved.value).abs(),
        straight.quadrature_error + curved.quadrature_error
    );

    let (residual, err) = k_energy_cocycle_check(&g1, &g2, &g3)?;
    println!("cocycle residual {residual:.1e} (errors {err:.1e})");

    // d/du log Q_L(ψ_u) = c_n ∫ ψ̇ (s − s₀) dv, by centered differences.
    let path = PotentialPath::straight(flat.clone(), psi1, psi2);
    let cn = c_one(&flat);
    let up_to = |u: f64| -> Result<f64, Box<dyn std::error::Error>> {
        let sub = path.reparametrized(0.0, u, |v| v, |_| 1.0);
        Ok(-cn * k_energy(&sub)?.value)
    };
    for u in [0.25, 0.5, 0.75] {
        let h = 1e-3;
        let fd = (up_to(u + h)? - up_to(u - h)?) / (2.0 * h);
        let exact = cn * path.integrand(u)?;
        println!("u={u}: fd {fd:.8e} integrand {exact:.8e} rel {:.1e}", (fd - exact).abs() / exact.abs());
    }

    for g in [&g1, &g2, &g3] {
        let (v, e) = relative_ql_detailed(g, &flat)?;
        println!("log Q_L(g) - log Q_L(flat) = {v:.6e} (+- {e:.1e})");
    }
    Ok(())
}
