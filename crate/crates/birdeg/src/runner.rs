//! Drivers that turn a fixture and a method choice into degree-sequence and
//! index reports. Used by the command-line front end and the test suites.

use indexmap::IndexMap;
use num_traits::ToPrimitive;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dynamics::{
    run_index_iteration, DegreeIndexState, DegreeSequenceReport, DynamicsError, Method,
};
use crate::fixtures::{Fixture, FixtureError};
use crate::ratmap::MapError;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("fixture {fixture} has no data for method {method}")]
    MethodUnavailable { fixture: String, method: String },
    #[error("degree value does not fit a 64-bit integer")]
    Overflow,
    #[error(
        "methods disagree at n = {n}: {method_a} gives {value_a}, {method_b} gives {value_b}"
    )]
    Disagreement {
        n: usize,
        method_a: String,
        value_a: i64,
        method_b: String,
        value_b: i64,
    },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Fixture(#[from] FixtureError),
}

/// Degree sequence for n = 0..=n_max by the chosen method.
pub fn degree_report(
    fixture: &Fixture,
    method: Method,
    n_max: usize,
    seed: u64,
) -> Result<DegreeSequenceReport, RunnerError> {
    let start = std::time::Instant::now();
    let mut meta: IndexMap<String, String> = IndexMap::new();
    let values: Vec<i64> = match method {
        Method::Oracle => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let degrees = fixture.map.minimal_degree_sequence(n_max, &mut rng)?;
            degrees.into_iter().map(|d| d as i64).collect()
        }
        Method::Indices => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (p0, states) = run_index_iteration(
                &fixture.map,
                &fixture.charts,
                &fixture.tracked,
                n_max,
                &mut rng,
            )?;
            let names: Vec<&str> = fixture.map.variables.iter().map(|s| s.as_str()).collect();
            meta.insert("p0".into(), p0.format_with(&names));
            states.iter().map(|s| s.d as i64).collect()
        }
        Method::Recurrence => {
            let rec =
                fixture
                    .recurrence
                    .as_ref()
                    .ok_or_else(|| RunnerError::MethodUnavailable {
                        fixture: fixture.id.clone(),
                        method: method.name().into(),
                    })?;
            rec.degree_sequence(n_max)?
                .iter()
                .map(|v| v.to_i64().ok_or(RunnerError::Overflow))
                .collect::<Result<_, _>>()?
        }
        Method::Picard => {
            let pf = fixture
                .picard
                .as_ref()
                .ok_or_else(|| RunnerError::MethodUnavailable {
                    fixture: fixture.id.clone(),
                    method: method.name().into(),
                })?;
            (0..=n_max as u64)
                .map(|n| {
                    pf.matrix
                        .power_hh_entry(n)
                        .to_i64()
                        .ok_or(RunnerError::Overflow)
                })
                .collect::<Result<_, _>>()?
        }
        Method::ClosedForm => {
            let form = fixture
                .closed_form
                .ok_or_else(|| RunnerError::MethodUnavailable {
                    fixture: fixture.id.clone(),
                    method: method.name().into(),
                })?;
            (0..=n_max as u64)
                .map(|n| form.eval(n).to_i64().ok_or(RunnerError::Overflow))
                .collect::<Result<_, _>>()?
        }
    };
    meta.insert(
        "elapsed_ms".into(),
        start.elapsed().as_millis().to_string(),
    );
    meta.insert("seed".into(), seed.to_string());
    Ok(DegreeSequenceReport {
        method,
        values,
        meta,
    })
}

/// First divergence between any two reports over their common range.
pub fn check_agreement(reports: &[DegreeSequenceReport]) -> Result<(), RunnerError> {
    for i in 0..reports.len() {
        for j in (i + 1)..reports.len() {
            let a = &reports[i];
            let b = &reports[j];
            let common = a.values.len().min(b.values.len());
            for n in 0..common {
                if a.values[n] != b.values[n] {
                    return Err(RunnerError::Disagreement {
                        n,
                        method_a: a.method.name().into(),
                        value_a: a.values[n],
                        method_b: b.method.name().into(),
                        value_b: b.values[n],
                    });
                }
            }
        }
    }
    Ok(())
}

/// Full index table (degree plus tracked chart indices per iterate).
pub fn index_table(
    fixture: &Fixture,
    n_max: usize,
    seed: u64,
) -> Result<(String, Vec<DegreeIndexState>), RunnerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (p0, states) = run_index_iteration(
        &fixture.map,
        &fixture.charts,
        &fixture.tracked,
        n_max,
        &mut rng,
    )?;
    let names: Vec<&str> = fixture.map.variables.iter().map(|s| s.as_str()).collect();
    Ok((p0.format_with(&names), states))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::FixtureRegistry;

    #[test]
    fn disagreement_reports_first_divergence() {
        let a = DegreeSequenceReport {
            method: Method::Recurrence,
            values: vec![1, 2, 4],
            meta: IndexMap::new(),
        };
        let b = DegreeSequenceReport {
            method: Method::ClosedForm,
            values: vec![1, 2, 5, 9],
            meta: IndexMap::new(),
        };
        let err = check_agreement(&[a, b]).unwrap_err();
        match err {
            RunnerError::Disagreement { n, .. } => assert_eq!(n, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn recurrence_and_closed_form_agree_on_builtin() {
        let fixture = FixtureRegistry::load("ex3-linearizable").unwrap();
        let a = degree_report(&fixture, Method::Recurrence, 20, 0).unwrap();
        let b = degree_report(&fixture, Method::ClosedForm, 20, 0).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.values, fixture.golden_degrees);
        check_agreement(&[a, b]).unwrap();
    }
}
