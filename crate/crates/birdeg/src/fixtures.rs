//! Builtin fixtures and the fixture registry.
//!
//! Each fixture bundles a validated map descriptor, its resolving charts
//! (with towers), the tracked-chart order used for reports, the recurrence
//! systems, the divisor-class matrix, closed form, and golden tables. The
//! registry serves the builtins and can be overridden per fixture by JSON
//! bundles in `BIRDEG_FIXTURE_DIR`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blowup::{sigma_chart, BlowupError, Chart, ChartJson, ChartSet};
use crate::dynamics::{ClosedForm, DynamicsError, RecurrenceSystem};
use crate::picard::{PicardBasis, PicardError, PicardJson, PicardMatrix};
use crate::poly::{parse_poly, strip_common_content, MultiPoly, PolyError, PolyJson, Rat};
use crate::ratmap::{
    BirationalMapDescriptor, CriticalFactor, MapError, MapJson, ProjectivePoint,
};

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("unknown fixture {0}")]
    Unknown(String),
    #[error("fixture {id}: {msg}")]
    Invalid { id: String, msg: String },
    #[error("parameter must be a nonzero rational")]
    BadParameter,
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("json error in {path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Blowup(#[from] BlowupError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Picard(#[from] PicardError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Declared relation expressing one chart's index as an integer combination
/// of a tower's elementary indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NuMuRelation {
    pub chart: String,
    pub tower: String,
    pub relation: Vec<(i64, usize)>,
}

#[derive(Debug, Clone)]
pub struct PicardFixture {
    pub matrix: PicardMatrix,
    pub known_fixed_classes: Vec<Vec<i64>>,
}

/// Golden index table: one row per iterate, `d` first, then the tracked
/// chart columns in registry order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldenIndexTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<i64>>,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub id: String,
    pub map: BirationalMapDescriptor,
    pub charts: ChartSet,
    pub chart_vars: Vec<String>,
    /// Tracked chart ids, in report column order.
    pub tracked: Vec<String>,
    pub recurrence: Option<RecurrenceSystem>,
    /// Full elementary-index recurrence (degree plus one entry per
    /// exceptional class), when transcribed.
    pub mu_recurrence: Option<RecurrenceSystem>,
    /// Charts whose towers enumerate the exceptional classes in basis order.
    pub mu_towers: Vec<String>,
    pub nu_mu_relations: Vec<NuMuRelation>,
    pub picard: Option<PicardFixture>,
    pub closed_form: Option<ClosedForm>,
    pub scalar_recurrence: Option<Vec<i64>>,
    pub invariant: Option<(MultiPoly, MultiPoly)>,
    pub automorphism: Option<bool>,
    pub golden_degrees: Vec<i64>,
    pub golden_indices: Option<GoldenIndexTable>,
}

impl Fixture {
    /// Load-time validation of every declared piece.
    pub fn validate(&self) -> Result<(), FixtureError> {
        self.charts.validate()?;
        self.map.validate(&self.charts)?;
        for id in &self.tracked {
            self.charts.get(id)?;
        }
        if let Some(rec) = &self.recurrence {
            rec.validate()?;
        }
        if let Some(rec) = &self.mu_recurrence {
            rec.validate()?;
        }
        for id in &self.mu_towers {
            self.charts.get(id)?.tower()?;
        }
        for rel in &self.nu_mu_relations {
            self.charts.get(&rel.chart)?;
            self.charts.get(&rel.tower)?.tower()?;
        }
        if let Some(pf) = &self.picard {
            if !self.golden_degrees.is_empty() {
                let hh = pf.matrix.power_hh_entry(1);
                if BigInt::from(self.map.degree()) != hh {
                    return Err(FixtureError::Invalid {
                        id: self.id.clone(),
                        msg: format!("divisor matrix H-entry {hh} does not match map degree"),
                    });
                }
            }
        }
        if let Some((num, den)) = &self.invariant {
            if !self.map.verify_rational_invariant(num, den)? {
                return Err(FixtureError::Invalid {
                    id: self.id.clone(),
                    msg: "declared invariant is not preserved".into(),
                });
            }
        }
        Ok(())
    }
}

/// Registry of builtin fixtures with optional per-fixture file override via
/// the `BIRDEG_FIXTURE_DIR` environment variable.
pub struct FixtureRegistry;

pub const BUILTIN_IDS: [&str; 4] = [
    "ex1-penrose-smith",
    "ex2-dpi-plane",
    "ex3-linearizable",
    "generic-quadratic",
];

impl FixtureRegistry {
    pub fn builtin_ids() -> &'static [&'static str] {
        &BUILTIN_IDS
    }

    pub fn load(id: &str) -> Result<Fixture, FixtureError> {
        Self::load_with_param(id, None)
    }

    /// Load a fixture; `param` re-instantiates the quadratic-family fixture
    /// at a different parameter value.
    pub fn load_with_param(id: &str, param: Option<Rat>) -> Result<Fixture, FixtureError> {
        if let Ok(dir) = std::env::var("BIRDEG_FIXTURE_DIR") {
            let path = PathBuf::from(dir).join(format!("{id}.json"));
            if path.exists() {
                let fixture = load_bundle_file(&path)?;
                fixture.validate()?;
                return Ok(fixture);
            }
        }
        let fixture = match id {
            "ex1-penrose-smith" => {
                build_ex1(&param.unwrap_or_else(|| Rat::from(BigInt::from(2))))?
            }
            "ex2-dpi-plane" => build_ex2()?,
            "ex3-linearizable" => build_ex3()?,
            "generic-quadratic" => build_generic_quadratic()?,
            _ => return Err(FixtureError::Unknown(id.to_string())),
        };
        fixture.validate()?;
        Ok(fixture)
    }
}

pub fn load_bundle_file(path: &std::path::Path) -> Result<Fixture, FixtureError> {
    let text = std::fs::read_to_string(path).map_err(|source| FixtureError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let json: BundleJson = serde_json::from_str(&text).map_err(|source| FixtureError::Json {
        path: path.display().to_string(),
        source,
    })?;
    Fixture::from_bundle_json(&json)
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

const XYZ: [&str; 3] = ["x", "y", "z"];
const UV: [&str; 2] = ["u", "v"];

fn p(src: &str) -> MultiPoly {
    parse_poly(src, &XYZ).expect("builtin fixture polynomial")
}

fn uv(src: &str) -> MultiPoly {
    parse_poly(src, &UV).expect("builtin fixture chart polynomial")
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn rec(labels: &[&str], matrix: &[&[i64]], initial: &[i64]) -> RecurrenceSystem {
    RecurrenceSystem {
        labels: names(labels),
        matrix: matrix.iter().map(|r| r.to_vec()).collect(),
        initial: initial.to_vec(),
    }
}

fn chart_with_tower(id: &str, center: &ProjectivePoint, levels: &[Vec<MultiPoly>]) -> Chart {
    use crate::blowup::{compose_tower, ElementaryBlowup};
    let tower: Vec<ElementaryBlowup> = levels
        .iter()
        .map(|coords| ElementaryBlowup {
            coords: coords.clone(),
        })
        .collect();
    let coords = compose_tower(&tower).expect("builtin tower composes");
    Chart::new(id, center.clone(), coords, 0, Some(tower))
}

fn pt(coords: &[i64]) -> ProjectivePoint {
    ProjectivePoint::from_integers(coords).expect("builtin point")
}

fn cross(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
    vec![
        &a[1] * &b[2] - &a[2] * &b[1],
        &a[2] * &b[0] - &a[0] * &b[2],
        &a[0] * &b[1] - &a[1] * &b[0],
    ]
}

fn linear_form(coeffs: &[Rat]) -> MultiPoly {
    MultiPoly::from_terms(
        3,
        coeffs.iter().enumerate().map(|(i, c)| {
            let mut e = vec![0u32; 3];
            e[i] = 1;
            (e, c.clone())
        }),
    )
}

fn adjugate3(m: &[[Rat; 3]; 3]) -> [[Rat; 3]; 3] {
    let det2 = |a: &Rat, b: &Rat, c: &Rat, d: &Rat| a * d - b * c;
    let cof = |i: usize, j: usize| -> Rat {
        let rs: Vec<usize> = (0..3).filter(|&r| r != i).collect();
        let cs: Vec<usize> = (0..3).filter(|&c| c != j).collect();
        let minor = det2(&m[rs[0]][cs[0]], &m[rs[0]][cs[1]], &m[rs[1]][cs[0]], &m[rs[1]][cs[1]]);
        if (i + j) % 2 == 0 {
            minor
        } else {
            -minor
        }
    };
    // adjugate = transposed cofactor matrix
    [
        [cof(0, 0), cof(1, 0), cof(2, 0)],
        [cof(0, 1), cof(1, 1), cof(2, 1)],
        [cof(0, 2), cof(1, 2), cof(2, 2)],
    ]
}

/// Components of `L_out ∘ σ ∘ M` where σ is the standard quadratic
/// involution `[x:y:z] -> [yz:xz:xy]`.
fn sigma_sandwich(l_out: &[[Rat; 3]; 3], m: &[[Rat; 3]; 3]) -> Vec<MultiPoly> {
    let w: Vec<MultiPoly> = (0..3)
        .map(|i| linear_form(&[m[i][0].clone(), m[i][1].clone(), m[i][2].clone()]))
        .collect();
    let sigma = [
        w[1].mul(&w[2]).expect("arity"),
        w[0].mul(&w[2]).expect("arity"),
        w[0].mul(&w[1]).expect("arity"),
    ];
    (0..3)
        .map(|i| {
            let mut acc = MultiPoly::zero(3);
            for (j, s) in sigma.iter().enumerate() {
                acc = acc.add(&s.scale(&l_out[i][j])).expect("arity");
            }
            acc
        })
        .collect()
}

fn rat_mat(entries: [[i64; 3]; 3]) -> [[Rat; 3]; 3] {
    entries.map(|row| row.map(|c| Rat::from(BigInt::from(c))))
}

fn identity_rat() -> [[Rat; 3]; 3] {
    rat_mat([[1, 0, 0], [0, 1, 0], [0, 0, 1]])
}

// ---- quadratic family fixture (three simple singular orbits of length 3)

fn build_ex1(a: &Rat) -> Result<Fixture, FixtureError> {
    if a.is_zero() {
        return Err(FixtureError::BadParameter);
    }
    let a2 = a * a;
    // x0(a x0 + a² x1 + x2) and cyclic shifts: the family map scaled by a
    let components: Vec<MultiPoly> = (0..3)
        .map(|i| {
            let j = (i + 1) % 3;
            let k = (i + 2) % 3;
            let mut coeffs = vec![Rat::zero(); 3];
            coeffs[i] = a.clone();
            coeffs[j] = a2.clone();
            coeffs[k] = Rat::one();
            MultiPoly::var(3, i)
                .mul(&linear_form(&coeffs))
                .expect("arity")
        })
        .collect();
    let neg_a = -a.clone();
    let l1 = [
        [Rat::zero(), neg_a.clone(), Rat::one()],
        [Rat::one(), Rat::zero(), neg_a.clone()],
        [neg_a.clone(), Rat::one(), Rat::zero()],
    ];
    let l2 = [
        [Rat::zero(), -Rat::one(), a.clone()],
        [a.clone(), Rat::zero(), -Rat::one()],
        [-Rat::one(), a.clone(), Rat::zero()],
    ];
    let col = |m: &[[Rat; 3]; 3], j: usize| -> Result<ProjectivePoint, MapError> {
        ProjectivePoint::new(vec![m[0][j].clone(), m[1][j].clone(), m[2][j].clone()])
    };
    let a_pts: Vec<ProjectivePoint> = (0..3).map(|j| col(&l1, j)).collect::<Result<_, _>>()?;
    let c_pts: Vec<ProjectivePoint> = (0..3).map(|j| col(&l2, j)).collect::<Result<_, _>>()?;

    // temporary descriptor to push points forward
    let proto = BirationalMapDescriptor {
        name: "quadratic-family".into(),
        dimension: 2,
        variables: names(&XYZ),
        components: components.clone(),
        critical_factors: vec![],
        inverse: None,
        parametrizations: BTreeMap::new(),
    };
    let b_pts: Vec<ProjectivePoint> = a_pts
        .iter()
        .map(|p| {
            proto
                .apply_point(p)
                .and_then(|img| img.ok_or(MapError::ZeroPoint))
        })
        .collect::<Result<_, _>>()
        .map_err(|_| FixtureError::BadParameter)?;

    // critical lines: K_i spans the two contracted target partners C_j, C_k
    let mut factors = Vec::new();
    let mut charts = ChartSet::new();
    for (i, name) in ["K1", "K2", "K3"].iter().enumerate() {
        let j = (i + 1) % 3;
        let k = (i + 2) % 3;
        let coeffs = cross(c_pts[j].coords(), c_pts[k].coords());
        let poly = strip_common_content(&[linear_form(&coeffs)])
            .pop()
            .expect("one polynomial");
        factors.push(CriticalFactor {
            id: name.to_string(),
            polynomial: poly,
            target: a_pts[i].clone(),
            chart: format!("A{}", i + 1),
        });
    }
    for (i, set) in [(0, &a_pts), (1, &b_pts), (2, &c_pts)] {
        let prefix = ["A", "B", "C"][i];
        for (j, point) in set.iter().enumerate() {
            charts.insert(sigma_chart(format!("{prefix}{}", j + 1), point));
        }
    }
    let inverse = strip_common_content(&sigma_sandwich(&l2, &adjugate3(&l1)));

    let map = BirationalMapDescriptor {
        name: "quadratic-family".into(),
        dimension: 2,
        variables: names(&XYZ),
        components,
        critical_factors: factors,
        inverse: Some(inverse),
        parametrizations: BTreeMap::new(),
    };

    let tracked = names(&["A1", "A2", "A3", "B1", "B2", "B3", "C1", "C2", "C3"]);
    let recurrence = rec(
        &["d", "A1", "A2", "A3", "B1", "B2", "B3", "C1", "C2", "C3"],
        &[
            &[2, -1, -1, -1, 0, 0, 0, 0, 0, 0],
            &[0, 0, 0, 0, 1, 0, 0, 0, 0, 0],
            &[0, 0, 0, 0, 0, 1, 0, 0, 0, 0],
            &[0, 0, 0, 0, 0, 0, 1, 0, 0, 0],
            &[0, 0, 0, 0, 0, 0, 0, 1, 0, 0],
            &[0, 0, 0, 0, 0, 0, 0, 0, 1, 0],
            &[0, 0, 0, 0, 0, 0, 0, 0, 0, 1],
            &[1, 0, -1, -1, 0, 0, 0, 0, 0, 0],
            &[1, -1, 0, -1, 0, 0, 0, 0, 0, 0],
            &[1, -1, -1, 0, 0, 0, 0, 0, 0, 0],
        ],
        &[1, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    );
    let picard_matrix = PicardMatrix::new(
        PicardBasis::new(
            names(&["H", "E1", "E2", "E3", "E4", "E5", "E6", "E7", "E8", "E9"]),
            true,
        )?,
        vec![
            vec![2, 1, 1, 1, 0, 0, 0, 0, 0, 0],
            vec![0, 0, 0, 0, 1, 0, 0, 0, 0, 0],
            vec![0, 0, 0, 0, 0, 1, 0, 0, 0, 0],
            vec![0, 0, 0, 0, 0, 0, 1, 0, 0, 0],
            vec![0, 0, 0, 0, 0, 0, 0, 1, 0, 0],
            vec![0, 0, 0, 0, 0, 0, 0, 0, 1, 0],
            vec![0, 0, 0, 0, 0, 0, 0, 0, 0, 1],
            vec![-1, 0, -1, -1, 0, 0, 0, 0, 0, 0],
            vec![-1, -1, 0, -1, 0, 0, 0, 0, 0, 0],
            vec![-1, -1, -1, 0, 0, 0, 0, 0, 0, 0],
        ],
    )?;
    let mu_towers = tracked.clone();
    let nu_mu_relations = tracked
        .iter()
        .map(|id| NuMuRelation {
            chart: id.clone(),
            tower: id.clone(),
            relation: vec![(1, 0)],
        })
        .collect();

    Ok(Fixture {
        id: "ex1-penrose-smith".into(),
        map,
        charts,
        chart_vars: names(&UV),
        tracked,
        recurrence: Some(recurrence),
        mu_recurrence: None,
        mu_towers,
        nu_mu_relations,
        picard: Some(PicardFixture {
            matrix: picard_matrix,
            known_fixed_classes: vec![
                vec![3, -1, -1, -1, -1, -1, -1, -1, -1, -1],
                vec![1, -1, 0, 0, -1, 0, 0, -1, 0, 0],
                vec![1, 0, -1, 0, 0, -1, 0, 0, -1, 0],
                vec![1, 0, 0, -1, 0, 0, -1, 0, 0, -1],
            ],
        }),
        closed_form: Some(ClosedForm::QuasiQuadraticPeriod2),
        scalar_recurrence: Some(vec![1, -2, 0, 2, -1]),
        invariant: None,
        automorphism: Some(true),
        golden_degrees: vec![1, 2, 4, 8, 13, 20, 28, 38, 49, 62, 76, 92, 109],
        golden_indices: None,
    })
}

// ---- plane map with infinitely near singularities and a known integral

fn build_ex2() -> Result<Fixture, FixtureError> {
    let components = vec![p("y*(y-z)"), p("x*z"), p("(y-z)^2")];
    let inverse = vec![p("y*z"), p("x*(x-z)"), p("(x-z)^2")];

    let mut charts = ChartSet::new();
    let pi1 = vec![uv("u"), uv("1"), uv("u*v")];
    let pi3 = vec![uv("1"), uv("u*v"), uv("1-u")];
    let pi6 = vec![uv("u*v"), uv("1+u"), uv("1")];
    let pi9 = vec![uv("1"), uv("u"), uv("u*v")];
    let twist = vec![uv("u*v"), uv("u")]; // (prev u, prev v) = (u v, u)
    let slide = vec![uv("u"), uv("u*v")]; // (prev u, prev v) = (u, u v)
    charts.insert(chart_with_tower("E2", &pt(&[0, 1, 0]), &[pi1.clone(), slide.clone()]));
    charts.insert(chart_with_tower("E3", &pt(&[1, 0, 1]), &[pi3.clone()]));
    charts.insert(chart_with_tower(
        "E5",
        &pt(&[1, 0, 1]),
        &[pi3.clone(), twist.clone(), slide.clone()],
    ));
    charts.insert(chart_with_tower("E6", &pt(&[0, 1, 1]), &[pi6.clone()]));
    charts.insert(chart_with_tower(
        "E8",
        &pt(&[0, 1, 1]),
        &[pi6.clone(), twist.clone(), slide.clone()],
    ));
    charts.insert(chart_with_tower("E10", &pt(&[1, 0, 0]), &[pi9.clone(), slide]));

    let map = BirationalMapDescriptor {
        name: "plane-invariant-map".into(),
        dimension: 2,
        variables: names(&XYZ),
        components,
        critical_factors: vec![
            CriticalFactor {
                id: "y-z".into(),
                polynomial: p("y-z"),
                target: pt(&[0, 1, 0]),
                chart: "E2".into(),
            },
            CriticalFactor {
                id: "z".into(),
                polynomial: p("z"),
                target: pt(&[1, 0, 1]),
                chart: "E3".into(),
            },
        ],
        inverse: Some(inverse),
        parametrizations: BTreeMap::new(),
    };

    let tracked = names(&["E2", "E3", "E6", "E5", "E8", "E10"]);
    let recurrence = rec(
        &["d", "E2", "E3", "E5", "E6", "E8", "E10"],
        &[
            &[2, -1, -1, 0, 0, 0, 0],
            &[0, 0, -2, 1, 0, 0, 0],
            &[0, 0, 0, 0, 1, 0, 0],
            &[0, 0, 0, 0, 0, 1, 0],
            &[1, -1, 0, 0, 0, 0, 0],
            &[2, -2, 0, 0, 0, 0, 1],
            &[2, -1, -2, 0, 0, 0, 0],
        ],
        &[1, 0, 0, 0, 0, 0, 0],
    );
    let mu_recurrence = rec(
        &[
            "d", "mu1", "mu2", "mu3", "mu4", "mu5", "mu6", "mu7", "mu8", "mu9", "mu10",
        ],
        &[
            &[2, -1, -1, -1, 0, 0, 0, 0, 0, 0, 0],
            &[0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0],
            &[0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0],
            &[0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0],
            &[0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0],
            &[0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0],
            &[1, -1, -1, 0, 0, 0, 0, 0, 0, 0, 0],
            &[0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0],
            &[0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1],
            &[1, 0, -1, -1, 0, 0, 0, 0, 0, 0, 0],
            &[1, -1, 0, -1, 0, 0, 0, 0, 0, 0, 0],
        ],
        &[1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    );
    let picard_matrix = PicardMatrix::new(
        PicardBasis::new(
            names(&[
                "H", "E1", "E2", "E3", "E4", "E5", "E6", "E7", "E8", "E9", "E10",
            ]),
            true,
        )?,
        vec![
            vec![2, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0],
            vec![0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0],
            vec![0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0],
            vec![0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0],
            vec![0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0],
            vec![0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0],
            vec![-1, -1, -1, 0, 0, 0, 0, 0, 0, 0, 0],
            vec![0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0],
            vec![0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1],
            vec![-1, 0, -1, -1, 0, 0, 0, 0, 0, 0, 0],
            vec![-1, -1, 0, -1, 0, 0, 0, 0, 0, 0, 0],
        ],
    )?;

    let golden_indices = GoldenIndexTable {
        columns: tracked.clone(),
        rows: vec![
            vec![1, 0, 0, 0, 0, 0, 0],
            vec![2, 0, 0, 1, 0, 2, 2],
            vec![4, 0, 1, 2, 2, 6, 4],
            vec![7, 0, 2, 4, 6, 12, 6],
            vec![12, 2, 4, 7, 12, 20, 10],
            vec![18, 4, 7, 10, 20, 30, 14],
            vec![25, 6, 10, 14, 30, 42, 18],
            vec![34, 10, 14, 19, 42, 56, 24],
            vec![44, 14, 19, 24, 56, 72, 30],
            vec![55, 18, 24, 30, 72, 90, 36],
            vec![68, 24, 30, 37, 90, 110, 44],
            vec![82, 30, 37, 44, 110, 132, 52],
            vec![97, 36, 44, 52, 132, 156, 60],
            vec![114, 44, 52, 61, 156, 182, 70],
        ],
    };

    Ok(Fixture {
        id: "ex2-dpi-plane".into(),
        map,
        charts,
        chart_vars: names(&UV),
        tracked,
        recurrence: Some(recurrence),
        mu_recurrence: Some(mu_recurrence),
        mu_towers: names(&["E2", "E5", "E8", "E10"]),
        nu_mu_relations: vec![
            NuMuRelation {
                chart: "E2".into(),
                tower: "E2".into(),
                relation: vec![(1, 0), (1, 1)],
            },
            NuMuRelation {
                chart: "E5".into(),
                tower: "E5".into(),
                relation: vec![(2, 0), (1, 1), (1, 2)],
            },
            NuMuRelation {
                chart: "E8".into(),
                tower: "E8".into(),
                relation: vec![(2, 0), (1, 1), (1, 2)],
            },
            NuMuRelation {
                chart: "E10".into(),
                tower: "E10".into(),
                relation: vec![(1, 0), (1, 1)],
            },
            NuMuRelation {
                chart: "E3".into(),
                tower: "E5".into(),
                relation: vec![(1, 0)],
            },
            NuMuRelation {
                chart: "E6".into(),
                tower: "E8".into(),
                relation: vec![(1, 0)],
            },
        ],
        picard: Some(PicardFixture {
            matrix: picard_matrix,
            known_fixed_classes: vec![vec![4, -1, -1, -2, -1, -1, -2, -1, -1, -1, -1]],
        }),
        closed_form: Some(ClosedForm::QuasiQuadraticPeriod3),
        scalar_recurrence: Some(vec![1, -2, 0, 1, 1, 0, -2, 1]),
        invariant: Some((p("z*(x+y-z)^3"), p("x^2*y^2"))),
        automorphism: Some(true),
        golden_degrees: vec![1, 2, 4, 7, 12, 18, 25, 34, 44, 55, 68, 82, 97, 114],
        golden_indices: Some(golden_indices),
    })
}

// ---- linearizable map whose stable model is not an automorphism

fn build_ex3() -> Result<Fixture, FixtureError> {
    let components = vec![
        p("x*(x-y+z)+(x-y)*z"),
        p("x*(x-y+z)"),
        p("z*(x-y+z)"),
    ];
    let inverse = vec![
        p("y*(y-x+z)"),
        p("y*(y-x+z)+(y-x)*z"),
        p("z*(y-x+z)"),
    ];

    let mut charts = ChartSet::new();
    let pi1 = vec![uv("1"), uv("u"), uv("u*v")];
    let pi2 = vec![uv("1+u*v"), uv("1"), uv("u")];
    let pi3 = vec![uv("u"), uv("1+u*v")]; // (prev u, prev v) = (u, 1 + u v)
    charts.insert(chart_with_tower("E1", &pt(&[1, 0, 0]), &[pi1]));
    charts.insert(chart_with_tower("E2", &pt(&[1, 1, 0]), &[pi2.clone()]));
    charts.insert(chart_with_tower("E3", &pt(&[1, 1, 0]), &[pi2, pi3]));

    let map = BirationalMapDescriptor {
        name: "linearizable-map".into(),
        dimension: 2,
        variables: names(&XYZ),
        components,
        critical_factors: vec![
            CriticalFactor {
                id: "x-y+z".into(),
                polynomial: p("x-y+z"),
                target: pt(&[1, 0, 0]),
                chart: "E1".into(),
            },
            CriticalFactor {
                id: "z".into(),
                polynomial: p("z"),
                target: pt(&[1, 1, 0]),
                chart: "E3".into(),
            },
        ],
        inverse: Some(inverse),
        parametrizations: BTreeMap::new(),
    };

    let tracked = names(&["E1", "E2", "E3"]);
    let recurrence = rec(
        &["d", "E1", "E2", "E3"],
        &[
            &[2, -1, 0, -1],
            &[0, 0, 0, 0],
            &[1, -1, 1, -1],
            &[1, -1, 1, -1],
        ],
        &[1, 0, 0, 0],
    );
    let picard_matrix = PicardMatrix::new(
        PicardBasis::new(names(&["H", "E2"]), true)?,
        vec![vec![2, 1], vec![-1, 0]],
    )?;

    Ok(Fixture {
        id: "ex3-linearizable".into(),
        map,
        charts,
        chart_vars: names(&UV),
        tracked: tracked.clone(),
        recurrence: Some(recurrence),
        mu_recurrence: None,
        mu_towers: vec![],
        nu_mu_relations: vec![
            NuMuRelation {
                chart: "E1".into(),
                tower: "E1".into(),
                relation: vec![(1, 0)],
            },
            NuMuRelation {
                chart: "E3".into(),
                tower: "E3".into(),
                relation: vec![(1, 0), (1, 1)],
            },
        ],
        picard: Some(PicardFixture {
            matrix: picard_matrix,
            known_fixed_classes: vec![vec![1, -1]],
        }),
        closed_form: Some(ClosedForm::LinearPlusOne),
        scalar_recurrence: Some(vec![1, -2, 1]),
        invariant: None,
        automorphism: Some(false),
        golden_degrees: (1..=21).collect(),
        golden_indices: None,
    })
}

// ---- quadratic map with no degree-lowering orbit: plain 2^n growth

fn build_generic_quadratic() -> Result<Fixture, FixtureError> {
    let l = rat_mat([[2, 3, -3], [-2, 3, 1], [-3, -1, 3]]);
    let components = sigma_sandwich(&l, &identity_rat());
    let inverse = strip_common_content(&sigma_sandwich(&identity_rat(), &adjugate3(&l)));
    let targets = [pt(&[2, -2, -3]), pt(&[3, 3, -1]), pt(&[-3, 1, 3])];

    let mut charts = ChartSet::new();
    for (i, t) in targets.iter().enumerate() {
        charts.insert(sigma_chart(format!("A{}", i + 1), t));
    }
    let map = BirationalMapDescriptor {
        name: "generic-quadratic".into(),
        dimension: 2,
        variables: names(&XYZ),
        components,
        critical_factors: vec![
            CriticalFactor {
                id: "x".into(),
                polynomial: p("x"),
                target: targets[0].clone(),
                chart: "A1".into(),
            },
            CriticalFactor {
                id: "y".into(),
                polynomial: p("y"),
                target: targets[1].clone(),
                chart: "A2".into(),
            },
            CriticalFactor {
                id: "z".into(),
                polynomial: p("z"),
                target: targets[2].clone(),
                chart: "A3".into(),
            },
        ],
        inverse: Some(inverse),
        parametrizations: BTreeMap::new(),
    };

    let tracked = names(&["A1", "A2", "A3"]);
    Ok(Fixture {
        id: "generic-quadratic".into(),
        map,
        charts,
        chart_vars: names(&UV),
        tracked: tracked.clone(),
        recurrence: Some(rec(&["d"], &[&[2]], &[1])),
        mu_recurrence: None,
        mu_towers: tracked.clone(),
        nu_mu_relations: tracked
            .iter()
            .map(|id| NuMuRelation {
                chart: id.clone(),
                tower: id.clone(),
                relation: vec![(1, 0)],
            })
            .collect(),
        picard: Some(PicardFixture {
            matrix: PicardMatrix::new(PicardBasis::new(names(&["H"]), true)?, vec![vec![2]])?,
            known_fixed_classes: vec![],
        }),
        closed_form: Some(ClosedForm::Doubling),
        scalar_recurrence: Some(vec![1, -2]),
        invariant: None,
        automorphism: Some(false),
        golden_degrees: vec![1, 2, 4, 8, 16, 32, 64],
        golden_indices: None,
    })
}

// ---------------------------------------------------------------------------
// Bundle JSON (fixture file)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BundleJson {
    pub id: String,
    pub map: MapJson,
    #[serde(rename = "chartVars")]
    pub chart_vars: Vec<String>,
    pub charts: Vec<ChartJson>,
    pub tracked: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recurrence: Option<RecurrenceSystem>,
    #[serde(rename = "muRecurrence", skip_serializing_if = "Option::is_none")]
    pub mu_recurrence: Option<RecurrenceSystem>,
    #[serde(rename = "muTowers")]
    pub mu_towers: Vec<String>,
    #[serde(rename = "nuMuRelations")]
    pub nu_mu_relations: Vec<NuMuRelation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub picard: Option<PicardJson>,
    #[serde(rename = "closedForm", skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<ClosedForm>,
    #[serde(rename = "scalarRecurrence", skip_serializing_if = "Option::is_none")]
    pub scalar_recurrence: Option<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invariant: Option<InvariantJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub automorphism: Option<bool>,
    #[serde(rename = "goldenDegrees")]
    pub golden_degrees: Vec<i64>,
    #[serde(rename = "goldenIndices", skip_serializing_if = "Option::is_none")]
    pub golden_indices: Option<GoldenIndexTable>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct InvariantJson {
    pub num: PolyJson,
    pub den: PolyJson,
}

impl Fixture {
    pub fn to_bundle_json(&self) -> BundleJson {
        let map_names = &self.map.variables;
        BundleJson {
            id: self.id.clone(),
            map: self.map.to_json(),
            chart_vars: self.chart_vars.clone(),
            charts: self
                .charts
                .iter()
                .map(|c| c.to_json(&self.chart_vars))
                .collect(),
            tracked: self.tracked.clone(),
            recurrence: self.recurrence.clone(),
            mu_recurrence: self.mu_recurrence.clone(),
            mu_towers: self.mu_towers.clone(),
            nu_mu_relations: self.nu_mu_relations.clone(),
            picard: self
                .picard
                .as_ref()
                .map(|pf| pf.matrix.to_json(&pf.known_fixed_classes)),
            closed_form: self.closed_form,
            scalar_recurrence: self.scalar_recurrence.clone(),
            invariant: self.invariant.as_ref().map(|(num, den)| InvariantJson {
                num: num.to_json(map_names),
                den: den.to_json(map_names),
            }),
            automorphism: self.automorphism,
            golden_degrees: self.golden_degrees.clone(),
            golden_indices: self.golden_indices.clone(),
        }
    }

    pub fn from_bundle_json(json: &BundleJson) -> Result<Fixture, FixtureError> {
        let map = BirationalMapDescriptor::from_json(&json.map)?;
        let charts = ChartSet::from_charts(
            json.charts
                .iter()
                .map(Chart::from_json)
                .collect::<Result<Vec<_>, _>>()?,
        );
        let picard = match &json.picard {
            None => None,
            Some(pj) => Some(PicardFixture {
                matrix: PicardMatrix::from_json(pj)?,
                known_fixed_classes: pj.known_fixed_classes.clone(),
            }),
        };
        let invariant = match &json.invariant {
            None => None,
            Some(inv) => Some((
                MultiPoly::from_json(&inv.num).map(|(p, _)| p)?,
                MultiPoly::from_json(&inv.den).map(|(p, _)| p)?,
            )),
        };
        Ok(Fixture {
            id: json.id.clone(),
            map,
            charts,
            chart_vars: json.chart_vars.clone(),
            tracked: json.tracked.clone(),
            recurrence: json.recurrence.clone(),
            mu_recurrence: json.mu_recurrence.clone(),
            mu_towers: json.mu_towers.clone(),
            nu_mu_relations: json.nu_mu_relations.clone(),
            picard,
            closed_form: json.closed_form,
            scalar_recurrence: json.scalar_recurrence.clone(),
            invariant,
            automorphism: json.automorphism,
            golden_degrees: json.golden_degrees.clone(),
            golden_indices: json.golden_indices.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_load_and_validate() {
        for id in FixtureRegistry::builtin_ids() {
            let fixture = FixtureRegistry::load(id).unwrap();
            assert_eq!(&fixture.id, id);
        }
    }

    #[test]
    fn unknown_fixture_is_an_error() {
        assert!(matches!(
            FixtureRegistry::load("nope"),
            Err(FixtureError::Unknown(_))
        ));
    }

    #[test]
    fn family_parameter_reinstantiates() {
        let f = FixtureRegistry::load_with_param(
            "ex1-penrose-smith",
            Some(Rat::new(BigInt::from(3), BigInt::from(1))),
        )
        .unwrap();
        assert_eq!(f.map.degree(), 2);
        assert!(matches!(
            FixtureRegistry::load_with_param("ex1-penrose-smith", Some(Rat::zero())),
            Err(FixtureError::BadParameter)
        ));
    }

    #[test]
    fn bundle_round_trip_bit_exact() {
        for id in FixtureRegistry::builtin_ids() {
            let fixture = FixtureRegistry::load(id).unwrap();
            let bundle = fixture.to_bundle_json();
            let s1 = serde_json::to_string_pretty(&bundle).unwrap();
            let parsed: BundleJson = serde_json::from_str(&s1).unwrap();
            let reloaded = Fixture::from_bundle_json(&parsed).unwrap();
            reloaded.validate().unwrap();
            let s2 = serde_json::to_string_pretty(&reloaded.to_bundle_json()).unwrap();
            assert_eq!(s1, s2, "bundle round trip not byte-stable for {id}");
            assert_eq!(bundle, parsed);
        }
    }
}
