//! Report rendering: CSV and JSON emission for the run commands.

use birdeg::dynamics::{DegreeIndexState, DegreeSequenceReport};
use birdeg::fixtures::Fixture;
use serde_json::json;

/// CSV table for an index run: `n,d,` then one column per tracked chart in
/// registry order.
pub fn index_csv(fixture: &Fixture, states: &[DegreeIndexState]) -> String {
    let mut out = String::from("n,d");
    for id in &fixture.tracked {
        out.push(',');
        out.push_str(id);
    }
    out.push('\n');
    for st in states {
        out.push_str(&st.n.to_string());
        out.push(',');
        out.push_str(&st.d.to_string());
        for id in &fixture.tracked {
            out.push(',');
            out.push_str(&st.nu[id.as_str()].to_string());
        }
        out.push('\n');
    }
    out
}

/// Plain degree CSV: `n,d` rows.
pub fn degree_csv(report: &DegreeSequenceReport) -> String {
    let mut out = String::from("n,d\n");
    for (n, v) in report.values.iter().enumerate() {
        out.push_str(&format!("{n},{v}\n"));
    }
    out
}

pub fn index_json(
    fixture: &Fixture,
    p0: &str,
    states: &[DegreeIndexState],
    seed: u64,
) -> serde_json::Value {
    json!({
        "fixture": fixture.id,
        "method": "indices",
        "p0": p0,
        "seed": seed,
        "columns": fixture.tracked,
        "rows": states.iter().map(|st| {
            let mut row = vec![st.n as i64, st.d as i64];
            for id in &fixture.tracked {
                row.push(st.nu[id.as_str()] as i64);
            }
            row
        }).collect::<Vec<_>>(),
    })
}

pub fn degree_json(fixture: &Fixture, report: &DegreeSequenceReport) -> serde_json::Value {
    json!({
        "fixture": fixture.id,
        "method": report.method.name(),
        "values": report.values,
        "meta": report.meta,
    })
}
