//! JSON documents for coefficient profiles.
//!
//! ```json
//! {"dimension":1,"family":{"kind":"power","delta":0.75,"centers":[0.0]},"domain":[-4.0,4.0]}
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CoefficientProfile, Family, SampledField, SurfaceCurve, SymMat};
use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileDoc {
    pub dimension: usize,
    pub family: FamilyDoc,
    pub domain: DomainDoc,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cut_set: Vec<CutSpec>,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyDoc {
    Power {
        delta: f64,
        centers: Vec<PointDoc>,
    },
    RadialShell {
        delta: f64,
        radius: f64,
    },
    Surface {
        delta: f64,
        phi: Vec<f64>,
        phi_range: [f64; 2],
    },
    StronglyElliptic {
        matrix: Vec<Vec<f64>>,
    },
    Sampled {
        shape: Vec<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        csv: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        values: Option<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointDoc {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl PointDoc {
    fn to_vec(&self) -> Vec<f64> {
        match self {
            PointDoc::Scalar(x) => vec![*x],
            PointDoc::Vector(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DomainDoc {
    Interval([f64; 2]),
    Box(Vec<[f64; 2]>),
}

/// Predicted separation cut, carried as metadata only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CutSpec {
    Point { at: Vec<f64> },
    Shell { radius: f64 },
    Surface,
}

impl ProfileDoc {
    pub fn into_profile(self, base_dir: Option<&Path>) -> Result<CoefficientProfile> {
        let d = self.dimension;
        let domain = match self.domain {
            DomainDoc::Interval(iv) => vec![iv; d],
            DomainDoc::Box(b) => b,
        };
        let family = match self.family {
            FamilyDoc::Power { delta, centers } => {
                Family::PowerDegenerate { delta, centers: centers.iter().map(PointDoc::to_vec).collect() }
            }
            FamilyDoc::RadialShell { delta, radius } => Family::RadialShell { delta, radius },
            FamilyDoc::Surface { delta, phi, phi_range } => {
                Family::SurfaceDegenerate { delta, surface: SurfaceCurve::new(phi_range, phi)? }
            }
            FamilyDoc::StronglyElliptic { matrix } => Family::StronglyElliptic { matrix: matrix_from_rows(d, &matrix)? },
            FamilyDoc::Sampled { shape, csv, values } => {
                let field = match (csv, values) {
                    (Some(file), None) => {
                        let path = match base_dir {
                            Some(dir) => dir.join(&file),
                            None => file.into(),
                        };
                        SampledField::from_csv(&path, shape)?
                    }
                    (None, Some(rows)) => {
                        let entries = rows
                            .iter()
                            .map(|r| match (d, r.as_slice()) {
                                (1, [c]) => Ok(SymMat { dim: 1, a11: *c, a12: 0.0, a22: 0.0 }),
                                (2, [a, b, c]) => Ok(SymMat { dim: 2, a11: *a, a12: *b, a22: *c }),
                                _ => Err(LabError::Validation(format!("sampled row {r:?} has the wrong number of entries"))),
                            })
                            .collect::<Result<Vec<_>>>()?;
                        SampledField::new(shape, entries)?
                    }
                    _ => {
                        return Err(LabError::Schema {
                            location: "family".into(),
                            message: "sampled family needs exactly one of `csv` or `values`".into(),
                        })
                    }
                };
                Family::Sampled(field)
            }
        };
        let mut profile = CoefficientProfile::new(d, family, domain)?;
        if let Some(g) = self.predicted_gamma {
            profile = profile.with_predicted_gamma(Some(g));
        }
        profile = profile.with_cut_set(self.cut_set);
        if self.epsilon != 0.0 {
            profile = profile.viscosity_shift(self.epsilon)?;
        }
        Ok(profile)
    }

    pub fn from_profile(p: &CoefficientProfile) -> Self {
        let d = p.dimension();
        let point = |v: &Vec<f64>| if d == 1 { PointDoc::Scalar(v[0]) } else { PointDoc::Vector(v.clone()) };
        let family = match p.family() {
            Family::PowerDegenerate { delta, centers } => {
                FamilyDoc::Power { delta: *delta, centers: centers.iter().map(point).collect() }
            }
            Family::RadialShell { delta, radius } => FamilyDoc::RadialShell { delta: *delta, radius: *radius },
            Family::SurfaceDegenerate { delta, surface } => {
                FamilyDoc::Surface { delta: *delta, phi: surface.values.clone(), phi_range: surface.range }
            }
            Family::StronglyElliptic { matrix } => FamilyDoc::StronglyElliptic {
                matrix: (0..d).map(|i| (0..d).map(|j| matrix.get(i, j)).collect()).collect(),
            },
            Family::Sampled(field) => match field.source() {
                Some(path) => FamilyDoc::Sampled {
                    shape: field.shape().to_vec(),
                    csv: Some(path.display().to_string()),
                    values: None,
                },
                None => FamilyDoc::Sampled {
                    shape: field.shape().to_vec(),
                    csv: None,
                    values: Some(
                        field
                            .entries()
                            .iter()
                            .map(|m| if d == 1 { vec![m.a11] } else { vec![m.a11, m.a12, m.a22] })
                            .collect(),
                    ),
                },
            },
        };
        let domain = if d == 1 { DomainDoc::Interval(p.domain()[0]) } else { DomainDoc::Box(p.domain().to_vec()) };
        let default_gamma = p.without_shift().family_default_gamma();
        ProfileDoc {
            dimension: d,
            family,
            domain,
            epsilon: p.epsilon(),
            predicted_gamma: if p.predicted_gamma() != default_gamma { p.predicted_gamma() } else { None },
            cut_set: p.cut_set().to_vec(),
        }
    }
}

fn matrix_from_rows(d: usize, rows: &[Vec<f64>]) -> Result<SymMat> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(LabError::Validation(format!("matrix must be {d}x{d}")));
    }
    if d == 1 {
        return Ok(SymMat { dim: 1, a11: rows[0][0], a12: 0.0, a22: 0.0 });
    }
    if rows[0][1] != rows[1][0] {
        return Err(LabError::Validation("coefficient matrix must be symmetric".into()));
    }
    Ok(SymMat { dim: 2, a11: rows[0][0], a12: rows[0][1], a22: rows[1][1] })
}

impl CoefficientProfile {
    fn family_default_gamma(&self) -> Option<f64> {
        super::default_gamma(self.dimension(), self.family())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_documented_example() {
        let text = r#"{"dimension":1,"family":{"kind":"power","delta":0.75,"centers":[0.0]},"domain":[-4.0,4.0]}"#;
        let p = CoefficientProfile::from_json_str(text, None).unwrap();
        assert_eq!(p.dimension(), 1);
        assert_eq!(p.family().delta(), Some(0.75));
        assert_eq!(p.domain(), &[[-4.0, 4.0]]);
        assert_eq!(p.predicted_gamma(), Some(0.25));
    }

    #[test]
    fn unknown_kind_is_a_schema_error() {
        let text = r#"{"dimension":1,"family":{"kind":"cubic","delta":0.75},"domain":[-4.0,4.0]}"#;
        let err = CoefficientProfile::from_json_str(text, None).unwrap_err();
        assert!(matches!(err, LabError::Schema { .. }), "{err}");
    }

    #[test]
    fn two_dimensional_documents() {
        let text = r#"{"dimension":2,"family":{"kind":"surface","delta":0.75,"phi":[0.0,0.3,0.0],"phi_range":[-1,1]},
                       "domain":[[-1,1],[-2,2]],"cut_set":[{"kind":"surface"}]}"#;
        let p = CoefficientProfile::from_json_str(text, None).unwrap();
        assert_eq!(p.domain(), &[[-1.0, 1.0], [-2.0, 2.0]]);
        assert_eq!(p.cut_set(), &[CutSpec::Surface]);
        let back = CoefficientProfile::from_json_str(&p.to_json_string().unwrap(), None).unwrap();
        assert_eq!(back, p);
    }
}
