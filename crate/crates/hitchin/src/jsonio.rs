//! JSON schemas of the external interfaces. Complex numbers serialize as
//! `[re, im]` pairs throughout; base curves omit the monic leading
//! coefficient.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::curves::BaseCurve;
use crate::lie::LieType;
use crate::periods::{Cut, CutKind};
use crate::sov::{SeparatingDivisor, SolveMethod, SolveReport};
use crate::spectral::{HamiltonianVector, SpectralModel, SpectralPoint};
use crate::{Error, Result};

pub fn c2a(c: Complex64) -> [f64; 2] {
    [c.re, c.im]
}

pub fn a2c(a: [f64; 2]) -> Complex64 {
    Complex64::new(a[0], a[1])
}

fn vec_c2a(v: &[Complex64]) -> Vec<[f64; 2]> {
    v.iter().map(|&c| c2a(c)).collect()
}

fn vec_a2c(v: &[[f64; 2]]) -> Vec<Complex64> {
    v.iter().map(|&a| a2c(a)).collect()
}

/// `{"genus": g, "coeffs": [[re, im], ...]}`, coefficients ascending with
/// the monic leading coefficient omitted.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaseCurveJson {
    pub genus: usize,
    pub coeffs: Vec<[f64; 2]>,
}

impl BaseCurveJson {
    pub fn from_curve(c: &BaseCurve) -> BaseCurveJson {
        let p = c.poly();
        BaseCurveJson {
            genus: c.genus(),
            coeffs: (0..p.degree()).map(|k| c2a(p.coeff(k))).collect(),
        }
    }

    pub fn to_curve(&self) -> Result<BaseCurve> {
        BaseCurve::new(&vec_a2c(&self.coeffs), self.genus)
    }
}

/// `{"lie": "D2", "genus": 2, "base": {...}, "H": [[re, im], ...]}`.
/// The Hamiltonian vector is optional; commands that need it accept a
/// separate file as well.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelJson {
    pub lie: String,
    pub genus: usize,
    pub base: BaseCurveJson,
    #[serde(rename = "H", default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<[f64; 2]>>,
}

impl ModelJson {
    pub fn from_model(m: &SpectralModel, h: Option<&HamiltonianVector>) -> ModelJson {
        ModelJson {
            lie: m.lie().to_string(),
            genus: m.genus(),
            base: BaseCurveJson::from_curve(m.base()),
            h: h.map(|v| vec_c2a(&v.0)),
        }
    }

    pub fn to_model(&self) -> Result<(SpectralModel, Option<HamiltonianVector>)> {
        if self.genus != self.base.genus {
            return Err(Error::BadInput(format!(
                "field 'genus' ({}) disagrees with 'base.genus' ({})",
                self.genus, self.base.genus
            )));
        }
        let lie = LieType::parse(&self.lie)?;
        let model = SpectralModel::new(lie, self.base.to_curve()?);
        let h = match &self.h {
            None => None,
            Some(values) => {
                let hv = HamiltonianVector(vec_a2c(values));
                if hv.len() != model.hamiltonian_count() {
                    return Err(Error::BadInput(format!(
                        "field 'H' has {} entries, expected {}",
                        hv.len(),
                        model.hamiltonian_count()
                    )));
                }
                Some(hv)
            }
        };
        Ok((model, h))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointJson {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub lambda: [f64; 2],
}

impl PointJson {
    pub fn from_point(p: &SpectralPoint) -> PointJson {
        PointJson {
            x: c2a(p.x),
            y: c2a(p.y),
            lambda: c2a(p.lambda),
        }
    }

    pub fn to_point(&self) -> SpectralPoint {
        SpectralPoint::new(a2c(self.x), a2c(self.y), a2c(self.lambda))
    }
}

/// `{"points": [{"x": [re, im], "y": ..., "lambda": ...}, ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DivisorJson {
    pub points: Vec<PointJson>,
}

impl DivisorJson {
    pub fn from_divisor(d: &SeparatingDivisor) -> DivisorJson {
        DivisorJson {
            points: d.points.iter().map(PointJson::from_point).collect(),
        }
    }

    pub fn to_divisor(&self) -> SeparatingDivisor {
        SeparatingDivisor {
            points: self.points.iter().map(PointJson::to_point).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReportJson {
    pub method: String,
    pub candidates: Vec<Vec<[f64; 2]>>,
    pub residuals: Vec<f64>,
    pub condition: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub newton_trace: Vec<f64>,
}

impl SolveReportJson {
    pub fn from_report(r: &SolveReport) -> SolveReportJson {
        SolveReportJson {
            method: match r.method {
                SolveMethod::Linear => "linear",
                SolveMethod::Cramer => "cramer",
                SolveMethod::Radicals => "radicals",
                SolveMethod::Newton => "newton",
            }
            .to_string(),
            candidates: r.candidates.iter().map(|h| vec_c2a(&h.0)).collect(),
            residuals: r.residuals.clone(),
            condition: if r.condition.is_finite() {
                Some(r.condition)
            } else {
                None
            },
            newton_trace: r.trace.clone(),
        }
    }
}

/// Matrix as nested rows of `[re, im]` pairs.
pub fn matrix_json(m: &crate::algebra::CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.rows()).map(|r| vec_c2a(m.row(r))).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CutJson {
    pub kind: String,
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub path: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodDataJson {
    pub cuts: Vec<CutJson>,
    pub ainv: Vec<Vec<[f64; 2]>>,
    pub a: Vec<Vec<[f64; 2]>>,
    pub normalized: Vec<Vec<[f64; 2]>>,
}

impl PeriodDataJson {
    pub fn from_period_data(pd: &crate::periods::PeriodData) -> PeriodDataJson {
        PeriodDataJson {
            cuts: pd
                .cuts
                .iter()
                .map(|cut| CutJson {
                    kind: match cut.kind {
                        CutKind::Base => "base",
                        CutKind::Spectral => "spectral",
                    }
                    .to_string(),
                    a: c2a(cut.a),
                    b: c2a(cut.b),
                    path: vec_c2a(&cut.path.nodes),
                })
                .collect(),
            ainv: matrix_json(&pd.ainv),
            a: matrix_json(&pd.a),
            normalized: pd.normalized.iter().map(|row| vec_c2a(row)).collect(),
        }
    }
}

/// User override for cut selection: endpoint pairs by kind; paths are
/// routed automatically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CutSpecJson {
    pub kind: String,
    pub a: [f64; 2],
    pub b: [f64; 2],
    #[serde(default)]
    pub y_sheet: u8,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CutsFileJson {
    pub cuts: Vec<CutSpecJson>,
}

impl CutsFileJson {
    pub fn to_cuts(
        &self,
        m: &SpectralModel,
        h: &HamiltonianVector,
    ) -> Result<Vec<Cut>> {
        let specials = crate::periods::special_x(m, h)?;
        self.cuts
            .iter()
            .map(|spec| {
                let kind = match spec.kind.as_str() {
                    "base" => CutKind::Base,
                    "spectral" => CutKind::Spectral,
                    other => {
                        return Err(Error::BadInput(format!(
                            "field 'cuts[].kind': unknown kind '{other}'"
                        )))
                    }
                };
                crate::periods::build_cut(
                    m,
                    h,
                    kind,
                    a2c(spec.a),
                    a2c(spec.b),
                    spec.y_sheet,
                    &specials,
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowTraceJson {
    pub hamiltonian: usize,
    pub times: Vec<f64>,
    pub states: Vec<DivisorJson>,
    pub hamiltonians: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angles: Option<Vec<Vec<[f64; 2]>>>,
    pub angle_sign: f64,
}

impl FlowTraceJson {
    pub fn from_trace(t: &crate::dynamics::FlowTrace) -> FlowTraceJson {
        FlowTraceJson {
            hamiltonian: t.hamiltonian_index,
            times: t.times.clone(),
            states: t
                .states
                .iter()
                .map(|s| DivisorJson::from_divisor(&s.to_divisor()))
                .collect(),
            hamiltonians: t.hamiltonians.iter().map(|h| vec_c2a(&h.0)).collect(),
            angles: t
                .angles
                .as_ref()
                .map(|rows| rows.iter().map(|r| vec_c2a(r)).collect()),
            angle_sign: t.angle_sign,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnglesJson {
    pub phi: Vec<[f64; 2]>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn model_json_roundtrip() {
        let m = SpectralModel::new(
            LieType::parse("D2").unwrap(),
            sampling::standard_curve(2).unwrap(),
        );
        let h = sampling::random_hamiltonians(&m, &mut ChaCha8Rng::seed_from_u64(1));
        let json = serde_json::to_string(&ModelJson::from_model(&m, Some(&h))).unwrap();
        let parsed: ModelJson = serde_json::from_str(&json).unwrap();
        let (m2, h2) = parsed.to_model().unwrap();
        assert_eq!(m2.lie(), m.lie());
        assert_eq!(m2.genus(), 2);
        assert!(h2.unwrap().rel_distance(&h) < 1e-15);
    }

    #[test]
    fn model_json_rejects_mismatched_h() {
        let m = SpectralModel::new(
            LieType::parse("A1").unwrap(),
            sampling::standard_curve(2).unwrap(),
        );
        let mut j = ModelJson::from_model(&m, None);
        j.h = Some(vec![[1.0, 0.0]; 5]);
        assert!(matches!(j.to_model(), Err(Error::BadInput(_))));
    }

    #[test]
    fn divisor_json_roundtrip() {
        let m = SpectralModel::new(
            LieType::parse("C2").unwrap(),
            sampling::standard_curve(2).unwrap(),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = sampling::random_hamiltonians(&m, &mut rng);
        let d = crate::sov::sample_divisor(&m, &h, &mut rng).unwrap();
        let json = serde_json::to_string(&DivisorJson::from_divisor(&d)).unwrap();
        let parsed: DivisorJson = serde_json::from_str(&json).unwrap();
        let d2 = parsed.to_divisor();
        for (p, q) in d.points.iter().zip(&d2.points) {
            assert_eq!(p.x, q.x);
            assert_eq!(p.lambda, q.lambda);
        }
    }
}
