//! Seeded random generation of curves and Hamiltonian vectors for the
//! verification suites and tests. Everything is driven by a caller-owned
//! RNG so identical seeds reproduce identical data.

use num_complex::Complex64;
use rand::Rng;

use crate::curves::BaseCurve;
use crate::spectral::{genericity_check, HamiltonianVector, SpectralModel};
use crate::Result;

/// Unit-modulus complex number with random phase.
pub fn random_unit<R: Rng>(rng: &mut R) -> Complex64 {
    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
    Complex64::new(theta.cos(), theta.sin())
}

/// Random complex number with modulus in `[lo, hi]`.
pub fn random_annulus<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> Complex64 {
    random_unit(rng) * rng.gen_range(lo..hi)
}

/// The fixed reference curve `y^2 = x^{2g+1} - 1` (branch points on the
/// unit circle, always squarefree).
pub fn standard_curve(genus: usize) -> Result<BaseCurve> {
    let mut coeffs = vec![Complex64::default(); 2 * genus + 1];
    coeffs[0] = Complex64::new(-1.0, 0.0);
    BaseCurve::new(&coeffs, genus)
}

/// Random squarefree monic curve of the given genus.
pub fn random_curve<R: Rng>(genus: usize, rng: &mut R) -> Result<BaseCurve> {
    let mut last_err = None;
    for _ in 0..64 {
        let coeffs: Vec<Complex64> = (0..2 * genus + 1)
            .map(|_| random_annulus(rng, 0.2, 1.0))
            .collect();
        match BaseCurve::new(&coeffs, genus) {
            Ok(c) => return Ok(c),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("retry loop ran"))
}

/// Random Hamiltonian vector passing the genericity probes. Coefficient
/// moduli are kept away from zero so no invariant degenerates in degree.
pub fn random_hamiltonians<R: Rng>(m: &SpectralModel, rng: &mut R) -> HamiltonianVector {
    for _ in 0..64 {
        let h = HamiltonianVector(
            (0..m.hamiltonian_count())
                .map(|_| random_annulus(rng, 0.3, 1.0))
                .collect(),
        );
        if genericity_check(m, &h).map(|r| r.generic).unwrap_or(false) {
            return h;
        }
    }
    unreachable!("generic Hamiltonians not found in 64 draws");
}
