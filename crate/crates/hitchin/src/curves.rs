//! The hyperelliptic base curve `y^2 = P_{2g+1}(x)`, its branch points,
//! sheet lifts and the monomial bases of the function spaces `O(-dD)`
//! with `D = 2(g-1) * infinity`.

use num_complex::Complex64;

use crate::algebra::{cluster_roots, poly_roots, CPoly};
use crate::{Error, Result};

/// Hyperelliptic curve `y^2 = P(x)` with `P` monic of odd degree `2g+1`.
///
/// The odd-degree model has a single point at infinity, with local
/// coordinate `z` satisfying `x = z^{-2}`.
#[derive(Debug, Clone)]
pub struct BaseCurve {
    p: CPoly,
    genus: usize,
    roots: Vec<Complex64>,
}

impl BaseCurve {
    /// Build the curve from the non-leading coefficients `a_0 .. a_{2g}`
    /// of `P(x) = x^{2g+1} + sum a_i x^i`. Fails with
    /// [`Error::NotSquarefree`] when `P` has a multiple root.
    pub fn new(lower_coeffs: &[Complex64], genus: usize) -> Result<BaseCurve> {
        if genus < 1 {
            return Err(Error::BadInput("genus must be >= 1".into()));
        }
        if lower_coeffs.len() != 2 * genus + 1 {
            return Err(Error::BadInput(format!(
                "expected {} coefficients a_0..a_{}, got {}",
                2 * genus + 1,
                2 * genus,
                lower_coeffs.len()
            )));
        }
        let mut coeffs = lower_coeffs.to_vec();
        coeffs.push(Complex64::new(1.0, 0.0));
        let p = CPoly::new(coeffs);
        let roots = poly_roots(&p, 1e-9)?;
        let clusters = cluster_roots(&roots, 1e-7);
        if clusters.iter().any(|(_, m)| *m > 1) {
            return Err(Error::NotSquarefree);
        }
        Ok(BaseCurve { p, genus, roots })
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    pub fn poly(&self) -> &CPoly {
        &self.p
    }

    /// The `2g+1` finite branch x-values (roots of `P`).
    pub fn finite_branch_x(&self) -> &[Complex64] {
        &self.roots
    }

    pub fn eval_p(&self, x: Complex64) -> Complex64 {
        self.p.eval(x)
    }

    /// `P'(x)`, used for `dy/dx = P'(x) / (2y)`.
    pub fn eval_dp(&self, x: Complex64) -> Complex64 {
        self.p.eval_with_derivative(x).1
    }

    /// Lift `x` to the curve. Sheet 0 carries the principal square root of
    /// `P(x)` (branch cut on the negative real axis), sheet 1 its negative.
    /// Global single-valued `y` does not exist; continuation along paths is
    /// the business of the tracking module.
    pub fn lift(&self, x: Complex64, sheet: u8) -> CurvePoint {
        let y0 = self.eval_p(x).sqrt();
        let y = if sheet == 0 { y0 } else { -y0 };
        CurvePoint {
            x,
            y,
            at_infinity: false,
        }
    }

    /// All `2g+2` branch points: the finite `(root, 0)` plus infinity.
    pub fn branch_points(&self) -> Vec<CurvePoint> {
        let mut pts: Vec<CurvePoint> = self
            .roots
            .iter()
            .map(|&x| CurvePoint {
                x,
                y: Complex64::default(),
                at_infinity: false,
            })
            .collect();
        pts.push(CurvePoint::infinity());
        pts
    }

    /// Relative on-curve residual `|y^2 - P(x)|` scaled by the curve data.
    pub fn on_curve_error(&self, x: Complex64, y: Complex64) -> f64 {
        let p = self.eval_p(x);
        (y * y - p).norm() / (1.0 + p.norm())
    }
}

/// A point of the base curve; `at_infinity` marks the single point over
/// `x = infinity` of the odd-degree model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub x: Complex64,
    pub y: Complex64,
    pub at_infinity: bool,
}

impl CurvePoint {
    pub fn infinity() -> CurvePoint {
        CurvePoint {
            x: Complex64::default(),
            y: Complex64::default(),
            at_infinity: true,
        }
    }
}

/// Exponent families of the basis of `O(-dD)`: the functions `x^k` for
/// `k <= d(g-1)` and `y x^s` for `s <= (d-1)(g-1) - 2` (the second family
/// is empty when that bound is negative).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonomialBasis {
    pub family0: Vec<usize>,
    pub family1: Vec<usize>,
}

impl MonomialBasis {
    pub fn len(&self) -> usize {
        self.family0.len() + self.family1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The monomial basis of `O(-dD)` for invariant degree `d` and genus `g`.
pub fn monomial_basis(d: usize, g: usize) -> MonomialBasis {
    assert!(d >= 2 && g >= 2, "monomial_basis requires d >= 2, g >= 2");
    let family0 = (0..=d * (g - 1)).collect();
    let top1 = (d as isize - 1) * (g as isize - 1) - 2;
    let family1 = if top1 < 0 {
        Vec::new()
    } else {
        (0..=top1 as usize).collect()
    };
    MonomialBasis { family0, family1 }
}
