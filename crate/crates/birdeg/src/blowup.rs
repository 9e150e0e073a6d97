//! Blow-up charts and local indices.
//!
//! A [`Chart`] is a declared polynomial coordinate patch over a center
//! point; the vanishing of its exceptional variable cuts the exceptional
//! divisor. Charts over deeper (infinitely near) centers carry a tower of
//! elementary substitutions whose composition must reproduce the chart.

use indexmap::IndexMap;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{MultiPoly, PolyError, Rat};
use crate::ratmap::ProjectivePoint;

#[derive(Debug, Error)]
pub enum BlowupError {
    #[error("polynomial composes to zero on chart {chart}")]
    ZeroComposition { chart: String },
    #[error("chart {chart}: expected {expected} coordinate functions in {vars} variables")]
    BadChartShape {
        chart: String,
        expected: usize,
        vars: usize,
    },
    #[error("chart {chart}: no coordinate function is the constant 1")]
    NoAffineUnit { chart: String },
    #[error("chart {chart}: reduction at the exceptional locus does not hit the center")]
    CenterMismatch { chart: String },
    #[error("chart {chart}: tower composition does not reproduce the chart coordinates")]
    TowerMismatch { chart: String },
    #[error("chart {chart} has no tower")]
    MissingTower { chart: String },
    #[error("unknown chart {0}")]
    UnknownChart(String),
    #[error("relation references tower position {pos}, tower has {len} levels")]
    RelationOutOfRange { pos: usize, len: usize },
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// One elementary blow-up substitution.
///
/// The first level of a tower maps chart variables to the `N+1` homogeneous
/// coordinates; every later level maps fresh chart variables to the `N`
/// variables of the previous level.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementaryBlowup {
    pub coords: Vec<MultiPoly>,
}

/// A (possibly composed) blow-up coordinate patch.
#[derive(Debug, Clone)]
pub struct Chart {
    pub id: String,
    /// Number of affine chart variables (the ambient dimension N).
    pub arity: usize,
    /// `N+1` polynomials in the chart variables giving homogeneous
    /// coordinates of the image point.
    pub coords: Vec<MultiPoly>,
    /// Index of the variable whose vanishing cuts the exceptional divisor.
    pub exceptional_var: usize,
    pub center: ProjectivePoint,
    /// Elementary substitutions composing to `coords`, when declared.
    pub tower: Option<Vec<ElementaryBlowup>>,
}

impl Chart {
    pub fn new(
        id: impl Into<String>,
        center: ProjectivePoint,
        coords: Vec<MultiPoly>,
        exceptional_var: usize,
        tower: Option<Vec<ElementaryBlowup>>,
    ) -> Self {
        let arity = coords.first().map(|c| c.var_count()).unwrap_or(0);
        Chart {
            id: id.into(),
            arity,
            coords,
            exceptional_var,
            center,
            tower,
        }
    }

    /// Validity checks run at load time: shape, an affine unit coordinate,
    /// center consistency at the exceptional locus, tower composition.
    pub fn validate(&self) -> Result<(), BlowupError> {
        let n = self.arity;
        if self.coords.len() != n + 1 || self.coords.iter().any(|c| c.var_count() != n) {
            return Err(BlowupError::BadChartShape {
                chart: self.id.clone(),
                expected: n + 1,
                vars: n,
            });
        }
        if !self.coords.iter().any(|c| c == &MultiPoly::one(n)) {
            return Err(BlowupError::NoAffineUnit {
                chart: self.id.clone(),
            });
        }
        // substitute exceptional var -> 0, keep the others
        let mut images = Vec::with_capacity(n);
        for v in 0..n {
            if v == self.exceptional_var {
                images.push(MultiPoly::zero(n));
            } else {
                images.push(MultiPoly::var(n, v));
            }
        }
        let reduced: Vec<MultiPoly> = self
            .coords
            .iter()
            .map(|c| c.substitute(&images))
            .collect::<Result<_, _>>()?;
        if reduced.iter().all(|c| c.is_zero()) {
            return Err(BlowupError::CenterMismatch {
                chart: self.id.clone(),
            });
        }
        let lift = self.center.coords();
        for i in 0..reduced.len() {
            for j in (i + 1)..reduced.len() {
                let a = reduced[i].scale(&lift[j]);
                let b = reduced[j].scale(&lift[i]);
                if a.sub(&b)? != MultiPoly::zero(n) {
                    return Err(BlowupError::CenterMismatch {
                        chart: self.id.clone(),
                    });
                }
            }
        }
        if let Some(tower) = &self.tower {
            let composed = compose_tower(tower)?;
            if composed != self.coords {
                return Err(BlowupError::TowerMismatch {
                    chart: self.id.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn tower(&self) -> Result<&[ElementaryBlowup], BlowupError> {
        self.tower
            .as_deref()
            .ok_or_else(|| BlowupError::MissingTower {
                chart: self.id.clone(),
            })
    }
}

/// Flatten a tower into composed coordinate functions.
pub fn compose_tower(tower: &[ElementaryBlowup]) -> Result<Vec<MultiPoly>, BlowupError> {
    let mut current = tower
        .first()
        .ok_or_else(|| BlowupError::MissingTower {
            chart: "<tower>".into(),
        })?
        .coords
        .clone();
    for level in &tower[1..] {
        current = current
            .iter()
            .map(|c| c.substitute(&level.coords))
            .collect::<Result<_, _>>()?;
    }
    Ok(current)
}

/// Maximal power of the exceptional variable dividing `P` composed with the
/// chart.
pub fn local_index(chart: &Chart, p: &MultiPoly) -> Result<u32, BlowupError> {
    let composed = compose_into_chart(chart, p)?;
    composed
        .min_var_exponent(chart.exceptional_var)
        .ok_or_else(|| BlowupError::ZeroComposition {
            chart: chart.id.clone(),
        })
}

fn compose_into_chart(chart: &Chart, p: &MultiPoly) -> Result<MultiPoly, BlowupError> {
    Ok(p.substitute(&chart.coords)?)
}

/// Elementary indices: peel `P` through the tower, recording the exceptional
/// valuation at each level and stripping it before descending.
pub fn elementary_indices(chart: &Chart, p: &MultiPoly) -> Result<Vec<u32>, BlowupError> {
    let tower = chart.tower()?;
    let mut out = Vec::with_capacity(tower.len());
    let mut current = p.clone();
    for level in tower {
        current = current.substitute(&level.coords)?;
        let val = current
            .min_var_exponent(0)
            .ok_or_else(|| BlowupError::ZeroComposition {
                chart: chart.id.clone(),
            })?;
        out.push(val);
        current = current.divide_by_var_power(0, val);
    }
    Ok(out)
}

/// Integer linear combination of elementary indices.
pub fn nu_from_mu(relation: &[(i64, usize)], mus: &[u32]) -> Result<i64, BlowupError> {
    let mut acc = 0i64;
    for &(coeff, pos) in relation {
        let mu = *mus
            .get(pos)
            .ok_or(BlowupError::RelationOutOfRange {
                pos,
                len: mus.len(),
            })?;
        acc += coeff * mu as i64;
    }
    Ok(acc)
}

/// Multiplicity of the point on `{P = 0}`: dehomogenize on a patch
/// containing the point, shift the point to the origin, and take the
/// minimal total degree of the surviving monomials.
pub fn multiplicity_at_point(p: &MultiPoly, point: &ProjectivePoint) -> Result<u32, BlowupError> {
    let n1 = p.var_count();
    let n = n1 - 1;
    let lift = point.coords();
    let pivot = lift
        .iter()
        .position(|c| !c.is_zero())
        .expect("projective point has a nonzero coordinate");
    // images in n affine variables w_0..w_{n-1}
    let mut images = Vec::with_capacity(n1);
    let mut w = 0usize;
    for i in 0..n1 {
        if i == pivot {
            images.push(MultiPoly::one(n));
        } else {
            let shifted = MultiPoly::constant(n, lift[i].clone())
                .add(&MultiPoly::var(n, w))
                .expect("same arity");
            images.push(shifted);
            w += 1;
        }
    }
    let local = p.substitute(&images)?;
    local
        .terms()
        .map(|(m, _)| m.total_degree())
        .min()
        .ok_or_else(|| BlowupError::ZeroComposition {
            chart: format!("affine patch at {point}"),
        })
}

/// The standard one-point blow-up chart at a center: the first non-pivot
/// coordinate moves as `p_i + u`, the second as `p_j + u*v`, and so on.
pub fn sigma_chart(id: impl Into<String>, center: &ProjectivePoint) -> Chart {
    let lift = center.coords();
    let n1 = lift.len();
    let n = n1 - 1;
    let pivot = lift
        .iter()
        .position(|c| !c.is_zero())
        .expect("projective point has a nonzero coordinate");
    let mut coords = Vec::with_capacity(n1);
    let mut k = 0usize;
    for i in 0..n1 {
        if i == pivot {
            coords.push(MultiPoly::one(n));
            continue;
        }
        // u_0 * u_k for k > 0, plain u_0 for the first non-pivot slot
        let wedge = if k == 0 {
            MultiPoly::var(n, 0)
        } else {
            MultiPoly::var(n, 0).mul(&MultiPoly::var(n, k)).expect("same arity")
        };
        coords.push(
            MultiPoly::constant(n, lift[i].clone())
                .add(&wedge)
                .expect("same arity"),
        );
        k += 1;
    }
    let tower = vec![ElementaryBlowup {
        coords: coords.clone(),
    }];
    Chart::new(id, center.clone(), coords, 0, Some(tower))
}

/// Ordered collection of charts, addressable by id.
#[derive(Debug, Clone, Default)]
pub struct ChartSet {
    charts: IndexMap<String, Chart>,
}

impl ChartSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_charts(charts: Vec<Chart>) -> Self {
        let mut set = Self::new();
        for c in charts {
            set.insert(c);
        }
        set
    }

    pub fn insert(&mut self, chart: Chart) {
        self.charts.insert(chart.id.clone(), chart);
    }

    pub fn get(&self, id: &str) -> Result<&Chart, BlowupError> {
        self.charts
            .get(id)
            .ok_or_else(|| BlowupError::UnknownChart(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.charts.keys().map(|s| s.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Chart> {
        self.charts.values()
    }

    pub fn validate(&self) -> Result<(), BlowupError> {
        for c in self.iter() {
            c.validate()?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// JSON form
// ---------------------------------------------------------------------------

/// Chart file schema. `excVar` is 1-based in files (variable `u1` by
/// convention); the in-memory index is 0-based.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ChartJson {
    pub id: String,
    pub center: Vec<String>,
    pub coords: Vec<crate::poly::PolyJson>,
    #[serde(rename = "excVar")]
    pub exc_var: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tower: Option<Vec<TowerLevelJson>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct TowerLevelJson {
    pub coords: Vec<crate::poly::PolyJson>,
}

impl Chart {
    pub fn to_json(&self, var_names: &[String]) -> ChartJson {
        ChartJson {
            id: self.id.clone(),
            center: self
                .center
                .coords()
                .iter()
                .map(crate::poly::format_rat)
                .collect(),
            coords: self
                .coords
                .iter()
                .map(|c| c.to_json(var_names))
                .collect(),
            exc_var: self.exceptional_var + 1,
            tower: self.tower.as_ref().map(|t| {
                t.iter()
                    .map(|lvl| TowerLevelJson {
                        coords: lvl.coords.iter().map(|c| c.to_json(var_names)).collect(),
                    })
                    .collect()
            }),
        }
    }

    pub fn from_json(json: &ChartJson) -> Result<Chart, BlowupError> {
        let center_coords: Result<Vec<Rat>, _> =
            json.center.iter().map(|s| crate::poly::parse_rat(s)).collect();
        let center = ProjectivePoint::new(center_coords?)
            .map_err(|_| BlowupError::CenterMismatch {
                chart: json.id.clone(),
            })?;
        let coords: Vec<MultiPoly> = json
            .coords
            .iter()
            .map(|pj| MultiPoly::from_json(pj).map(|(p, _)| p))
            .collect::<Result<_, _>>()?;
        let tower = match &json.tower {
            None => None,
            Some(levels) => Some(
                levels
                    .iter()
                    .map(|lvl| {
                        Ok(ElementaryBlowup {
                            coords: lvl
                                .coords
                                .iter()
                                .map(|pj| MultiPoly::from_json(pj).map(|(p, _)| p))
                                .collect::<Result<_, PolyError>>()?,
                        })
                    })
                    .collect::<Result<Vec<_>, PolyError>>()?,
            ),
        };
        Ok(Chart::new(
            json.id.clone(),
            center,
            coords,
            json.exc_var.saturating_sub(1),
            tower,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::parse_poly;

    const UV: &[&str] = &["u", "v"];
    const XYZ: &[&str] = &["x", "y", "z"];

    fn uv(src: &str) -> MultiPoly {
        parse_poly(src, UV).unwrap()
    }

    fn xyz(src: &str) -> MultiPoly {
        parse_poly(src, XYZ).unwrap()
    }

    fn pt(coords: &[i64]) -> ProjectivePoint {
        ProjectivePoint::from_integers(coords).unwrap()
    }

    fn chart(id: &str, center: &[i64], coords: [&str; 3]) -> Chart {
        Chart::new(
            id,
            pt(center),
            coords.iter().map(|s| uv(s)).collect(),
            0,
            None,
        )
    }

    #[test]
    fn local_index_depth_two_chart() {
        // second-level chart at [1:1:0]: x = 1+u+u^2 v, y = 1, z = u
        let c = chart("deep", &[1, 1, 0], ["1+u+u^2*v", "1", "u"]);
        c.validate().unwrap();
        assert_eq!(local_index(&c, &xyz("z")).unwrap(), 1);
        assert_eq!(local_index(&c, &xyz("x-y+z")).unwrap(), 1);
        assert_eq!(local_index(&c, &xyz("x-y-z")).unwrap(), 2);
        let shallow = chart("shallow", &[1, 1, 0], ["1+u*v", "1", "u"]);
        assert_eq!(local_index(&shallow, &xyz("x-y-z")).unwrap(), 1);
    }

    #[test]
    fn local_index_detects_cancellation() {
        // x = u v, y = 1 + u, z = 1 at [0:1:1]
        let c = chart("c", &[0, 1, 1], ["u*v", "1+u", "1"]);
        let p1 = xyz("y*(y-z) + x*z + (y-z)^2");
        assert_eq!(local_index(&c, &p1).unwrap(), 1);
    }

    #[test]
    fn zero_composition_is_an_error() {
        let c = chart("c", &[0, 1, 1], ["u*v", "1+u", "1"]);
        let err = local_index(&c, &MultiPoly::zero(3)).unwrap_err();
        assert!(matches!(err, BlowupError::ZeroComposition { .. }));
    }

    #[test]
    fn elementary_peeling_and_relations() {
        // tower at [1:0:1]: (1, u v, 1-u) then (u3,v3)=(u v, u) then (u4,v4)=(u, u v)
        let tower = vec![
            ElementaryBlowup {
                coords: vec![uv("1"), uv("u*v"), uv("1-u")],
            },
            ElementaryBlowup {
                coords: vec![uv("u*v"), uv("u")],
            },
            ElementaryBlowup {
                coords: vec![uv("u"), uv("u*v")],
            },
        ];
        let composed = compose_tower(&tower).unwrap();
        assert_eq!(composed, vec![uv("1"), uv("u^3*v"), uv("1-u^2*v")]);
        let c = Chart::new("E5", pt(&[1, 0, 1]), composed, 0, Some(tower));
        c.validate().unwrap();

        // z o pi3 = 1-u so all three indices vanish
        assert_eq!(elementary_indices(&c, &xyz("z")).unwrap(), vec![0, 0, 0]);
        assert_eq!(elementary_indices(&c, &MultiPoly::one(3)).unwrap(), vec![0, 0, 0]);
        // x - z peels as (1, 0, 0) and the composed index doubles the first
        let mus = elementary_indices(&c, &xyz("x-z")).unwrap();
        assert_eq!(mus, vec![1, 0, 0]);
        assert_eq!(nu_from_mu(&[(2, 0), (1, 1), (1, 2)], &mus).unwrap(), 2);
        assert_eq!(local_index(&c, &xyz("x-z")).unwrap(), 2);
        assert_eq!(nu_from_mu(&[(2, 0), (1, 1), (1, 2)], &[0, 0, 0]).unwrap(), 0);
    }

    #[test]
    fn two_level_tower_cross_check() {
        // tower at [0:1:0]: (u, 1, u v) then (u1,v1)=(u, u v); composed (u, 1, u^2 v)
        let tower = vec![
            ElementaryBlowup {
                coords: vec![uv("u"), uv("1"), uv("u*v")],
            },
            ElementaryBlowup {
                coords: vec![uv("u"), uv("u*v")],
            },
        ];
        let c = Chart::new("E2", pt(&[0, 1, 0]), compose_tower(&tower).unwrap(), 0, Some(tower));
        c.validate().unwrap();
        let mus = elementary_indices(&c, &xyz("y-z")).unwrap();
        assert_eq!(mus, vec![0, 0]);
        assert_eq!(local_index(&c, &xyz("y-z")).unwrap(), 0);
    }

    #[test]
    fn multiplicity_examples() {
        let q = xyz("(x-z)*(y-z)");
        assert_eq!(multiplicity_at_point(&q, &pt(&[1, 1, 1])).unwrap(), 2);
        assert_eq!(multiplicity_at_point(&xyz("x"), &pt(&[0, 1, 0])).unwrap(), 1);
        // generic cubic through the point: multiplicity 1, agrees with the
        // standard blow-up chart
        let cubic = xyz("x^3 + 2*x^2*y - 3*x*z^2 + y^2*z - z^3 + 2*y^3 - 2*y*z^2");
        let p0 = pt(&[1, 1, 1]);
        assert_eq!(cubic.evaluate(&[
            crate::poly::Rat::from(num_bigint::BigInt::from(1)),
            crate::poly::Rat::from(num_bigint::BigInt::from(1)),
            crate::poly::Rat::from(num_bigint::BigInt::from(1)),
        ]).unwrap(), crate::poly::Rat::from(num_bigint::BigInt::from(0)));
        let m = multiplicity_at_point(&cubic, &p0).unwrap();
        assert_eq!(m, 1);
        let sigma = sigma_chart("s", &p0);
        sigma.validate().unwrap();
        assert_eq!(local_index(&sigma, &cubic).unwrap(), m);
    }

    #[test]
    fn chart_validation_rejects_bad_center() {
        let c = chart("bad", &[1, 0, 0], ["1", "u*v", "1-u"]);
        assert!(matches!(
            c.validate(),
            Err(BlowupError::CenterMismatch { .. })
        ));
    }

    #[test]
    fn chart_json_round_trip() {
        let tower = vec![
            ElementaryBlowup {
                coords: vec![uv("1"), uv("u*v"), uv("1-u")],
            },
            ElementaryBlowup {
                coords: vec![uv("u*v"), uv("u")],
            },
            ElementaryBlowup {
                coords: vec![uv("u"), uv("u*v")],
            },
        ];
        let c = Chart::new("E5", pt(&[1, 0, 1]), compose_tower(&tower).unwrap(), 0, Some(tower));
        let names = vec!["u".to_string(), "v".to_string()];
        let json = c.to_json(&names);
        assert_eq!(json.exc_var, 1);
        let s1 = serde_json::to_string(&json).unwrap();
        let back = Chart::from_json(&serde_json::from_str(&s1).unwrap()).unwrap();
        assert_eq!(back.coords, c.coords);
        assert_eq!(back.center, c.center);
        assert_eq!(back.exceptional_var, 0);
        let s2 = serde_json::to_string(&back.to_json(&names)).unwrap();
        assert_eq!(s1, s2);
    }
}
