//! Term-by-term product of the rank-1 spectral-curve equation with the
//! base-curve equation: the curve `sigma^2 + r(x, y) P(x) = 0` under the
//! substitution `sigma = l y`, its branch-point accounting, the genus
//! `3(g-1)` of its normalization, and the correspondence of holomorphic
//! differentials with the Prym differentials of the spectral curve.

use num_complex::Complex64;

use crate::algebra::{poly_roots, CPoly};
use crate::curves::BaseCurve;
use crate::diffs::AngleDifferential;
use crate::lie::Series;
use crate::spectral::{HamiltonianVector, SpectralModel, SpectralPoint};
use crate::{Error, Result};

/// The curve `sigma^2 + r(x, y) P_{2g+1}(x) = 0` with
/// `r(x, y) = a(x) + y b(x)`. As functions on the base curve, `a` and
/// `y b` have pole divisors of degree `4g-4` and `4g-5` at infinity
/// (x-degrees `2g-2` and `g-3`); for genus 2 the `b` part is absent.
#[derive(Debug, Clone)]
pub struct ProductCurve {
    base: BaseCurve,
    a: CPoly,
    b: CPoly,
}

impl ProductCurve {
    pub fn a(&self) -> &CPoly {
        &self.a
    }

    pub fn b(&self) -> &CPoly {
        &self.b
    }

    pub fn base(&self) -> &BaseCurve {
        &self.base
    }

    /// `r(x, y) = a(x) + y b(x)`.
    pub fn r(&self, x: Complex64, y: Complex64) -> Complex64 {
        self.a.eval(x) + y * self.b.eval(x)
    }

    /// `sigma^2 + r P` at a point of (x, y, sigma)-space.
    pub fn eval(&self, x: Complex64, y: Complex64, sigma: Complex64) -> Complex64 {
        sigma * sigma + self.r(x, y) * self.base.eval_p(x)
    }

    /// Pole order of `a` at infinity on the base curve (`x` has a double
    /// pole there).
    pub fn pole_order_a(&self) -> usize {
        2 * self.a.degree()
    }

    /// Pole order of `y b` at infinity, if `b` is nonzero.
    pub fn pole_order_yb(&self) -> Option<usize> {
        if self.b.is_zero() {
            None
        } else {
            Some(2 * self.b.degree() + 2 * self.base.genus() + 1)
        }
    }

    /// `dr/dH_j` from the product curve's own coefficient layout: the
    /// first `2(g-1)+1` slots are the powers of `x` in `a`, the remaining
    /// ones the `y x^s` monomials of `b`.
    pub fn dr_dh(&self, j: usize, x: Complex64, y: Complex64) -> Complex64 {
        let f0_len = 2 * (self.base.genus() - 1) + 1;
        if j < f0_len {
            x.powu(j as u32)
        } else {
            y * x.powu((j - f0_len) as u32)
        }
    }
}

/// Multiply the rank-1 spectral-curve equation `l^2 + r = 0` by
/// `y^2 = P(x)` and substitute `sigma = l y`. Requires series A rank 1
/// and a nondegenerate `r`.
pub fn build_product(m: &SpectralModel, h: &HamiltonianVector) -> Result<ProductCurve> {
    if m.lie().series != Series::A || m.lie().rank != 1 {
        return Err(Error::UnsupportedSeries(format!(
            "product construction covers A1, not {}",
            m.lie()
        )));
    }
    let block = &m.layout().blocks[0];
    let (a, b) = m.block_polys(h, block);
    if a.is_zero() && b.is_zero() {
        return Err(Error::NonGeneric(
            "r vanishes identically; the product curve degenerates".into(),
        ));
    }
    Ok(ProductCurve {
        base: m.base().clone(),
        a,
        b,
    })
}

/// Branch-point bookkeeping of the product curve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductBranchCount {
    /// Zeros of `r` on the base curve (the `lambda = 0` kind): `4g - 4`.
    pub spectral: usize,
    /// Branch points of the base curve including infinity: `2g + 2`.
    pub base: usize,
    /// Total for the product curve, with the common infinity branch point
    /// degenerating to a simple singular point: `spectral + base - 2`.
    pub total: usize,
    /// The second-kind points (`lambda^2 = -a` over `y b = 0`): zeros of
    /// `P` plus doubled zeros of `b`.
    pub second_kind: usize,
    /// Whether infinity is appended to make the branch count even.
    pub infinity_added: bool,
}

/// Count the branch points numerically from the zeros of `r P` with the
/// infinity bookkeeping of the product construction.
pub fn branch_count(pc: &ProductCurve) -> Result<ProductBranchCount> {
    // First kind: zeros of r on the base curve.
    let spectral = if pc.b.is_zero() {
        if pc.a.degree() == 0 {
            return Err(Error::NonGeneric("r is a nonzero constant".into()));
        }
        // Each x-root lifts to both sheets.
        2 * poly_roots(&pc.a, 1e-9)?.len()
    } else {
        let resolvent = pc
            .a
            .mul(&pc.a)
            .sub(&pc.base.poly().mul(&pc.b.mul(&pc.b)));
        poly_roots(&resolvent, 1e-9)?.len()
    };
    // Base branch points: the 2g+1 finite roots of P plus infinity.
    let base = pc.base.finite_branch_x().len() + 1;
    // Second kind on the spectral side: zeros of P (one point each, y = 0)
    // plus zeros of b (two points each). Defined by y b = 0 with
    // lambda^2 = -a; for genus 2 the b part is absent.
    let second_kind = pc.base.finite_branch_x().len()
        + if pc.b.is_zero() || pc.b.degree() == 0 {
            0
        } else {
            2 * poly_roots(&pc.b, 1e-9)?.len()
        };
    let infinity_added = (spectral + second_kind) % 2 == 1;
    Ok(ProductBranchCount {
        spectral,
        base,
        total: spectral + base - 2,
        second_kind,
        infinity_added,
    })
}

/// Genus of the normalization from the branch total over the sphere:
/// `2g' - 2 = 2(0 - 2) + total`.
pub fn product_genus(counts: &ProductBranchCount) -> Result<usize> {
    crate::spectral::riemann_hurwitz_genus(2, 0, counts.total)
}

/// Trivariate polynomials in (l, y, x) as nested coefficient grids; just
/// enough arithmetic to verify the factorization identity.
#[derive(Clone)]
struct Poly3 {
    // coeffs[i][j] = polynomial in x at l^i y^j.
    coeffs: Vec<Vec<CPoly>>,
}

impl Poly3 {
    fn zero(li: usize, yj: usize) -> Poly3 {
        Poly3 {
            coeffs: vec![vec![CPoly::zero(); yj + 1]; li + 1],
        }
    }

    fn mul(&self, other: &Poly3) -> Poly3 {
        let li = self.coeffs.len() + other.coeffs.len() - 2;
        let yj = self.coeffs[0].len() + other.coeffs[0].len() - 2;
        let mut out = Poly3::zero(li, yj);
        for (i1, row1) in self.coeffs.iter().enumerate() {
            for (j1, c1) in row1.iter().enumerate() {
                if c1.is_zero() {
                    continue;
                }
                for (i2, row2) in other.coeffs.iter().enumerate() {
                    for (j2, c2) in row2.iter().enumerate() {
                        if c2.is_zero() {
                            continue;
                        }
                        let acc = out.coeffs[i1 + i2][j1 + j2].add(&c1.mul(c2));
                        out.coeffs[i1 + i2][j1 + j2] = acc;
                    }
                }
            }
        }
        out
    }

    fn sub(&self, other: &Poly3) -> Poly3 {
        let li = (self.coeffs.len()).max(other.coeffs.len()) - 1;
        let yj = (self.coeffs[0].len()).max(other.coeffs[0].len()) - 1;
        let mut out = Poly3::zero(li, yj);
        for (i, row) in self.coeffs.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                out.coeffs[i][j] = out.coeffs[i][j].add(c);
            }
        }
        for (i, row) in other.coeffs.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                out.coeffs[i][j] = out.coeffs[i][j].sub(c);
            }
        }
        out
    }

    fn max_coeff(&self) -> f64 {
        self.coeffs
            .iter()
            .flatten()
            .flat_map(|p| p.coeffs().iter())
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }
}

/// Relative coefficient defect of the factorization identity
/// `(l^2 + a)^2 - y^2 b^2 = (l^2 + a + y b)(l^2 + a - y b)`
/// expanded as polynomials in (l, y, x). Zero up to rounding.
pub fn factorization_defect(pc: &ProductCurve) -> f64 {
    let one = Complex64::new(1.0, 0.0);
    let mut plus = Poly3::zero(2, 1);
    plus.coeffs[2][0] = CPoly::constant(one);
    plus.coeffs[0][0] = pc.a.clone();
    plus.coeffs[0][1] = pc.b.clone();
    let mut minus = plus.clone();
    minus.coeffs[0][1] = pc.b.scale(-one);
    let rhs = plus.mul(&minus);
    let mut l2a = Poly3::zero(2, 0);
    l2a.coeffs[2][0] = CPoly::constant(one);
    l2a.coeffs[0][0] = pc.a.clone();
    let mut y2b2 = Poly3::zero(0, 2);
    y2b2.coeffs[0][2] = pc.b.mul(&pc.b);
    let lhs = l2a.mul(&l2a).sub(&y2b2);
    let defect = lhs.sub(&rhs);
    defect.max_coeff() / lhs.max_coeff().max(1.0)
}

/// Compare the product-curve differentials `(dr/dH_j) dx / (2 sigma)`
/// against the spectral-curve angle differentials at sample points under
/// `sigma = l y`. Returns the max relative deviation.
pub fn differentials_match(
    pc: &ProductCurve,
    m: &SpectralModel,
    h: &HamiltonianVector,
    diffs: &[AngleDifferential],
    points: &[SpectralPoint],
) -> Result<f64> {
    let mut worst = 0.0f64;
    for p in points {
        let sigma = p.lambda * p.y;
        if sigma.norm() < 1e-12 {
            return Err(Error::BadInput(
                "sample point has sigma = 0; differentials singular there".into(),
            ));
        }
        // The point must lie on the product curve under sigma = l y.
        let on_curve = pc.eval(p.x, p.y, sigma).norm() / (1.0 + (sigma * sigma).norm());
        if on_curve > 1e-9 {
            return Err(Error::BadInput(format!(
                "sample point off the product curve (defect {on_curve:.3e})"
            )));
        }
        for d in diffs {
            let product_side = pc.dr_dh(d.index, p.x, p.y) / (2.0 * sigma);
            let spectral_side = d.value_dx(m, h, p.x, p.y, p.lambda);
            let dev = (product_side - spectral_side).norm()
                / spectral_side.norm().max(1e-300);
            worst = worst.max(dev);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffs::differential_basis;
    use crate::lie::LieType;
    use crate::sampling;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn a1_model(genus: usize) -> SpectralModel {
        SpectralModel::new(
            LieType::parse("A1").unwrap(),
            sampling::standard_curve(genus).unwrap(),
        )
    }

    fn setup(genus: usize, seed: u64) -> (SpectralModel, HamiltonianVector, ProductCurve) {
        let m = a1_model(genus);
        let h = sampling::random_hamiltonians(&m, &mut ChaCha8Rng::seed_from_u64(seed));
        let pc = build_product(&m, &h).unwrap();
        (m, h, pc)
    }

    #[test]
    fn substitution_identity_on_spectral_points() {
        let (m, h, pc) = setup(2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let x = sampling::random_annulus(&mut rng, 0.4, 1.5);
            let y = m.base().lift(x, 0).y;
            let l = m.fiber_roots(&h, x, y).unwrap()[0];
            // l^2 y^2 + r P = 0 at any spectral point, i.e. sigma = l y
            // satisfies the product equation.
            let sigma = l * y;
            let v = pc.eval(x, y, sigma);
            let scale = 1.0 + (sigma * sigma).norm();
            assert!(v.norm() / scale < 1e-10, "defect {}", v.norm());
        }
    }

    #[test]
    fn zero_hamiltonians_rejected() {
        let m = a1_model(2);
        let h = HamiltonianVector::zeros(3);
        assert!(matches!(build_product(&m, &h), Err(Error::NonGeneric(_))));
    }

    #[test]
    fn degree_bounds() {
        // Pole orders at infinity: a has 4g-4; y b has 4g-5 when present.
        let (_, _, pc) = setup(2, 3);
        assert_eq!(pc.pole_order_a(), 4); // genus 2: x-degree 2
        assert!(pc.pole_order_yb().is_none()); // b absent at genus 2
        let (_, _, pc) = setup(3, 4);
        assert_eq!(pc.pole_order_a(), 8);
        assert_eq!(pc.pole_order_yb(), Some(7)); // b constant at genus 3
        let (_, _, pc) = setup(4, 5);
        assert_eq!(pc.pole_order_a(), 12);
        assert_eq!(pc.pole_order_yb(), Some(11));
    }

    #[test]
    fn branch_counts_and_genus() {
        for (genus, seed) in [(2usize, 6u64), (3, 7), (4, 8)] {
            let (_, _, pc) = setup(genus, seed);
            let counts = branch_count(&pc).unwrap();
            assert_eq!(counts.spectral, 4 * genus - 4, "genus {genus}: spectral");
            assert_eq!(counts.base, 2 * genus + 2, "genus {genus}: base");
            assert_eq!(counts.total, 6 * genus - 4, "genus {genus}: total");
            let ghat = product_genus(&counts).unwrap();
            assert_eq!(ghat, 3 * genus - 3, "genus {genus}: product genus");
        }
    }

    #[test]
    fn second_kind_split() {
        // For genus >= 3 the second-kind count is 4g - 5 (zeros of P plus
        // doubled zeros of b) and infinity completes parity; at genus 2
        // the b part is absent and the count degenerates to 2g + 1.
        for (genus, seed) in [(3usize, 9u64), (4, 10)] {
            let (_, _, pc) = setup(genus, seed);
            let counts = branch_count(&pc).unwrap();
            assert_eq!(counts.second_kind, 4 * genus - 5, "genus {genus}");
            assert!(counts.infinity_added);
        }
        let (_, _, pc) = setup(2, 11);
        let counts = branch_count(&pc).unwrap();
        assert_eq!(counts.second_kind, 5);
    }

    #[test]
    fn product_genus_equals_hamiltonian_count() {
        for genus in 2..=5 {
            let m = a1_model(genus);
            let h =
                sampling::random_hamiltonians(&m, &mut ChaCha8Rng::seed_from_u64(genus as u64));
            let pc = build_product(&m, &h).unwrap();
            let ghat = product_genus(&branch_count(&pc).unwrap()).unwrap();
            assert_eq!(ghat, m.hamiltonian_count());
        }
    }

    #[test]
    fn differentials_agree_with_spectral_side() {
        let (m, h, pc) = setup(2, 12);
        let diffs = differential_basis(&m);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut points = Vec::new();
        while points.len() < 50 {
            let x = sampling::random_annulus(&mut rng, 0.4, 1.5);
            let y = m.base().lift(x, (points.len() % 2) as u8).y;
            let l = m.fiber_roots(&h, x, y).unwrap()[points.len() % 2];
            if (l * y).norm() > 1e-3 {
                points.push(SpectralPoint::new(x, y, l));
            }
        }
        let worst = differentials_match(&pc, &m, &h, &diffs, &points).unwrap();
        assert!(worst < 1e-10, "max deviation {worst}");
    }

    #[test]
    fn differentials_negate_under_involution() {
        let (m, h, pc) = setup(2, 14);
        let diffs = differential_basis(&m);
        let x = c(0.7, 0.4);
        let y = m.base().lift(x, 0).y;
        let l = m.fiber_roots(&h, x, y).unwrap()[0];
        for d in &diffs {
            let plus = d.value_dx(&m, &h, x, y, l);
            let minus = d.value_dx(&m, &h, x, y, -l);
            assert!((plus + minus).norm() < 1e-12 * plus.norm().max(1e-6));
            // Product side: sigma = l y negates with l.
            let monomial =
                d.numerator(&m, &h, x, y, l) / l.powu(d.lambda_exp as u32);
            let p_plus = monomial / (2.0 * l * y);
            let p_minus = monomial / (2.0 * -l * y);
            assert!((p_plus + p_minus).norm() < 1e-12 * p_plus.norm().max(1e-6));
        }
        let _ = pc;
    }

    #[test]
    fn factorization_identity_coefficient_exact() {
        // (l^2 + a)^2 - y^2 b^2 = (l^2 + a + y b)(l^2 + a - y b) as
        // polynomials in (l, y, x), at machine precision.
        for (genus, seed) in [(2usize, 15u64), (3, 16), (4, 17)] {
            let (_, _, pc) = setup(genus, seed);
            let defect = factorization_defect(&pc);
            assert!(defect < 1e-14, "genus {genus}: coefficient defect {defect}");
        }
    }
}
