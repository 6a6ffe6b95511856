//! The differentials of the angle coordinates,
//! `w_j = (dR/dH_j) / (dR/dl) * dx/y`, their closed-form descriptors, and
//! numerical holomorphy probes at branch points, at the D-series nodes and
//! at infinity.
//!
//! The canonical value is exactly `(dR/dH_j)/(dR/dl) * 1/y` as a
//! dx-coefficient; for the Pfaffian block of series D this carries the
//! factor `2q` from differentiating `q^2`. Overall scale is immaterial for
//! the basis property and absorbed by normalization.

use num_complex::Complex64;

use crate::spectral::{HamiltonianVector, SpectralModel, SpectralPoint};
use crate::{Error, Result};

/// Which monomial family of its block a differential stems from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// `x^k` terms: numerator `x^k l^e / y` (times `2q` for the Pfaffian).
    Plain,
    /// `y x^s` terms: the `y` cancels, numerator `x^s l^e`.
    YWeighted,
}

/// Closed-form descriptor of one angle differential.
#[derive(Debug, Clone, Copy)]
pub struct AngleDifferential {
    /// Flat Hamiltonian index this differential is conjugate to.
    pub index: usize,
    pub block: usize,
    pub family: Family,
    /// Monomial power (`k` or `s`).
    pub power: usize,
    /// Power of `lambda` in the numerator.
    pub lambda_exp: usize,
    /// Numerator carries the Pfaffian factor `2q`.
    pub pfaffian: bool,
}

impl AngleDifferential {
    /// `dR/dH_j` at a point.
    pub fn numerator(
        &self,
        m: &SpectralModel,
        h: &HamiltonianVector,
        x: Complex64,
        y: Complex64,
        lambda: Complex64,
    ) -> Complex64 {
        let mut num = x.powu(self.power as u32) * lambda.powu(self.lambda_exp as u32);
        if self.family == Family::YWeighted {
            num *= y;
        }
        if self.pfaffian {
            let block = &m.layout().blocks[self.block];
            num *= 2.0 * m.block_value(h, block, x, y);
        }
        num
    }

    /// The dx-chart coefficient `(dR/dH_j) / (R'_l * y)`.
    pub fn value_dx(
        &self,
        m: &SpectralModel,
        h: &HamiltonianVector,
        x: Complex64,
        y: Complex64,
        lambda: Complex64,
    ) -> Complex64 {
        let (_, dl) = m.fiber_poly(h, x, y).eval_with_derivative(lambda);
        self.numerator(m, h, x, y, lambda) / (dl * y)
    }

    /// The dl-chart coefficient `-(dR/dH_j) / (R'_x * y)`, regular at
    /// finite branch points of the spectral covering.
    pub fn value_dlambda(
        &self,
        m: &SpectralModel,
        h: &HamiltonianVector,
        x: Complex64,
        y: Complex64,
        lambda: Complex64,
    ) -> Result<Complex64> {
        let parts = m.partials(h, x, y, lambda)?;
        Ok(-self.numerator(m, h, x, y, lambda) / (parts.d_x * y))
    }
}

/// The full list of `N` angle differentials, ordered by the flat
/// Hamiltonian index.
pub fn differential_basis(m: &SpectralModel) -> Vec<AngleDifferential> {
    let mut out = Vec::with_capacity(m.hamiltonian_count());
    for (bi, block) in m.layout().blocks.iter().enumerate() {
        let e = m.lambda_exponent(block);
        for (j, &k) in block.basis.family0.iter().enumerate() {
            out.push(AngleDifferential {
                index: block.offset + j,
                block: bi,
                family: Family::Plain,
                power: k,
                lambda_exp: e,
                pfaffian: block.pfaffian,
            });
        }
        for (j, &s) in block.basis.family1.iter().enumerate() {
            out.push(AngleDifferential {
                index: block.offset + block.basis.family0.len() + j,
                block: bi,
                family: Family::YWeighted,
                power: s,
                lambda_exp: e,
                pfaffian: block.pfaffian,
            });
        }
    }
    debug_assert!(out.iter().enumerate().all(|(i, d)| d.index == i));
    out
}

/// dx-coefficient of the base-lifted differential `x^p dx / y` (series A,
/// rank >= 2: these complete the angle differentials to a basis of all
/// holomorphic differentials).
pub fn base_lifted_value(p: usize, x: Complex64, y: Complex64) -> Complex64 {
    x.powu(p as u32) / y
}

/// Evaluate the whole basis at once (one fiber-polynomial derivative).
pub fn basis_values(
    m: &SpectralModel,
    h: &HamiltonianVector,
    diffs: &[AngleDifferential],
    x: Complex64,
    y: Complex64,
    lambda: Complex64,
) -> Vec<Complex64> {
    let (_, dl) = m.fiber_poly(h, x, y).eval_with_derivative(lambda);
    let denom = dl * y;
    diffs
        .iter()
        .map(|d| d.numerator(m, h, x, y, lambda) / denom)
        .collect()
}

// ---------------------------------------------------------------------------
// Holomorphy probes
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeKind {
    SmoothPoint,
    BranchPoint,
    /// D-series node: values reported per local branch.
    SingularPoint,
}

/// Chart values of one differential along a shrinking approach to a point.
#[derive(Debug, Clone)]
pub struct ProbeReport {
    pub kind: ProbeKind,
    pub radii: Vec<f64>,
    /// |dx-chart| per radius; for singular points, one row per branch.
    pub dx_values: Vec<Vec<f64>>,
    /// |dl-chart| per radius (branch points only).
    pub dlambda_values: Vec<f64>,
    /// Growth factor of the regular-chart values over the approach:
    /// max over the shrinking radii relative to the outermost value.
    pub variation: f64,
    /// Whether the regular chart stays within a factor 2 of its outermost
    /// value (no blow-up; decay towards a zero of the differential passes).
    pub bounded: bool,
}

/// Probe a differential at a finite branch point or singular point by
/// approaching along the curve at decreasing radii.
pub fn holomorphy_probe(
    m: &SpectralModel,
    h: &HamiltonianVector,
    diff: &AngleDifferential,
    target: &SpectralPoint,
    radii: &[f64],
) -> Result<ProbeReport> {
    if radii.len() < 2 {
        return Err(Error::BadInput("need at least two probe radii".into()));
    }
    let y_scale = 1.0 + m.base().eval_p(target.x).norm().sqrt();
    if !target.y.norm().is_finite() || target.y.norm() < 1e-6 * y_scale {
        return Err(Error::HypothesisViolated(
            "target projects onto a base branch point (y = 0)".into(),
        ));
    }

    // Classify by the fiber derivative and the x-derivative.
    let (_, dl) = m
        .fiber_poly(h, target.x, target.y)
        .eval_with_derivative(target.lambda);
    let kind = if dl.norm() > 1e-6 {
        ProbeKind::SmoothPoint
    } else {
        let parts = m.partials(h, target.x, target.y, target.lambda)?;
        if parts.d_x.norm() > 1e-6 {
            ProbeKind::BranchPoint
        } else {
            ProbeKind::SingularPoint
        }
    };

    let dir = Complex64::from_polar(1.0, 0.31);
    let sheet_y = |xx: Complex64, yref: Complex64| {
        let y0 = m.base().lift(xx, 0).y;
        if (y0 - yref).norm() <= (y0 + yref).norm() {
            y0
        } else {
            -y0
        }
    };

    match kind {
        ProbeKind::SmoothPoint | ProbeKind::BranchPoint => {
            let mut dx_vals = Vec::with_capacity(radii.len());
            let mut dl_vals = Vec::with_capacity(radii.len());
            let mut lref = target.lambda;
            let mut yref = target.y;
            for &r in radii {
                let x = target.x + r * dir;
                let y = sheet_y(x, yref);
                let roots = m.fiber_roots(h, x, y)?;
                let l = roots
                    .into_iter()
                    .min_by(|a, b| (a - lref).norm().total_cmp(&(b - lref).norm()))
                    .unwrap();
                dx_vals.push(diff.value_dx(m, h, x, y, l).norm());
                dl_vals.push(diff.value_dlambda(m, h, x, y, l)?.norm());
                lref = l;
                yref = y;
            }
            let regular = if kind == ProbeKind::BranchPoint {
                &dl_vals
            } else {
                &dx_vals
            };
            let variation = growth_factor(regular);
            Ok(ProbeReport {
                kind,
                radii: radii.to_vec(),
                dx_values: vec![dx_vals],
                dlambda_values: dl_vals,
                variation,
                bounded: variation < 2.0,
            })
        }
        ProbeKind::SingularPoint => {
            // Two local branches cross at the node; follow both inward.
            let x0 = target.x + radii[0] * dir;
            let y0 = sheet_y(x0, target.y);
            let mut roots = m.fiber_roots(h, x0, y0)?;
            roots.sort_by(|a, b| {
                (a - target.lambda)
                    .norm()
                    .total_cmp(&(b - target.lambda).norm())
            });
            let mut branches = [roots[0], roots[1]];
            let mut rows = vec![Vec::with_capacity(radii.len()); 2];
            let mut yref = y0;
            for &r in radii {
                let x = target.x + r * dir;
                let y = sheet_y(x, yref);
                let roots = m.fiber_roots(h, x, y)?;
                for (bi, b) in branches.iter_mut().enumerate() {
                    let l = roots
                        .iter()
                        .copied()
                        .min_by(|p, q| (p - *b).norm().total_cmp(&(q - *b).norm()))
                        .unwrap();
                    rows[bi].push(diff.value_dx(m, h, x, y, l).norm());
                    *b = l;
                }
                yref = y;
            }
            let mut variation = 0.0f64;
            for row in &rows {
                variation = variation.max(growth_factor(row));
            }
            Ok(ProbeReport {
                kind,
                radii: radii.to_vec(),
                dx_values: rows,
                dlambda_values: Vec::new(),
                variation,
                bounded: variation < 2.0,
            })
        }
    }
}

/// Peak value over the approach relative to the outermost (first) value.
fn growth_factor(vals: &[f64]) -> f64 {
    let hi = vals.iter().copied().fold(0.0f64, f64::max);
    let first = vals.first().copied().unwrap_or(0.0);
    if hi == 0.0 {
        1.0
    } else {
        hi / first.max(1e-300)
    }
}

/// Magnitude of the z-chart coefficient of a differential near infinity
/// (`x = z^{-2}`), maximized over sheets and fiber roots, per radius.
pub fn infinity_probe(
    m: &SpectralModel,
    h: &HamiltonianVector,
    diff: &AngleDifferential,
    z_radii: &[f64],
) -> Result<Vec<f64>> {
    let dir = Complex64::from_polar(1.0, 0.4);
    let mut out = Vec::with_capacity(z_radii.len());
    for &r in z_radii {
        let z = r * dir;
        let x = (z * z).inv();
        let dxdz = -2.0 * (z * z * z).inv();
        let mut worst = 0.0f64;
        for sheet in 0..2u8 {
            let y = m.base().lift(x, sheet).y;
            for l in m.fiber_roots(h, x, y)? {
                let v = (diff.value_dx(m, h, x, y, l) * dxdz).norm();
                worst = worst.max(v);
            }
        }
        out.push(worst);
    }
    Ok(out)
}
