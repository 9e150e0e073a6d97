//! Command-line front end: fixture loading, degree-sequence runs with
//! cross-method agreement, index tables, structural verification, lattice
//! queries, and dynamical degrees.
//!
//! Exit codes: 0 success, 1 usage or load error, 2 verification or
//! agreement failure.

mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_traits::ToPrimitive;

use birdeg::dynamics::{dynamical_degree, Method};
use birdeg::fixtures::{Fixture, FixtureRegistry};
use birdeg::poly::parse_rat;
use birdeg::runner::{check_agreement, degree_report, index_table, RunnerError};

#[derive(Parser)]
#[command(name = "birdeg", version, about = "Exact degree sequences of birational maps")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// List the builtin fixture ids.
    ListFixtures,
    /// Compute deg(f^n) by one or more methods and check they agree.
    DegreeSeq(RunArgs),
    /// Emit the full degree/index table from the chart iteration.
    Indices(RunArgs),
    /// Run the structural checklist for a map.
    Verify(SourceArgs),
    /// Divisor-class matrix queries.
    Picard(PicardArgs),
    /// Dynamical degree from the recurrence or divisor-class matrix.
    Dyndeg(DyndegArgs),
}

#[derive(Args, Clone)]
struct SourceArgs {
    /// Builtin fixture id (see list-fixtures); BIRDEG_FIXTURE_DIR overrides.
    #[arg(long)]
    fixture: Option<String>,
    /// Map descriptor file (JSON), for non-fixture runs.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Chart file (JSON array of charts) accompanying --map.
    #[arg(long)]
    charts: Option<PathBuf>,
    /// Divisor-class fixture file (JSON) accompanying --map.
    #[arg(long)]
    picard: Option<PathBuf>,
    /// Family parameter override, e.g. a=5/2 (quadratic family fixture).
    #[arg(long)]
    param: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Largest iterate; reports cover n = 0..=n.
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Comma-separated methods: oracle,indices,recurrence,picard,closed-form.
    #[arg(long, default_value = "indices")]
    methods: String,
    /// Seed for the generic start-form draw.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output format: csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Output path (stdout when absent); one file per method.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PicardArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(subcommand)]
    action: PicardCmd,
}

#[derive(Subcommand)]
enum PicardCmd {
    /// (H,H) entry of the n-th matrix power.
    Power {
        #[arg(long)]
        n: u64,
    },
    /// Primitive generators of the eigenvalue-1 eigenspace.
    FixedClasses,
    /// Whether the matrix preserves the intersection form.
    Orthogonality,
}

#[derive(Args)]
struct DyndegArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Horizon for the empirical degree-ratio tail.
    #[arg(long, default_value_t = 24)]
    n: usize,
    #[arg(long, default_value = "text")]
    format: String,
}

enum CliError {
    Usage(String),
    Check(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Check(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Check(m) => m,
        }
    }
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version arrive through the clap error path with status 0
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::ListFixtures => {
            for id in FixtureRegistry::builtin_ids() {
                println!("{id}");
            }
            Ok(())
        }
        Cmd::DegreeSeq(args) => cmd_degree_seq(args),
        Cmd::Indices(args) => cmd_indices(args),
        Cmd::Verify(source) => cmd_verify(source),
        Cmd::Picard(args) => cmd_picard(args),
        Cmd::Dyndeg(args) => cmd_dyndeg(args),
    }
}

fn load_fixture(source: &SourceArgs) -> Result<Fixture, CliError> {
    if let Some(id) = &source.fixture {
        let param = match &source.param {
            None => None,
            Some(raw) => {
                let (name, value) = raw
                    .split_once('=')
                    .ok_or_else(|| usage("--param expects name=value, e.g. a=5/2"))?;
                if name != "a" {
                    return Err(usage(format!("unknown parameter {name:?}")));
                }
                if id != "ex1-penrose-smith" {
                    return Err(usage("--param is only supported for ex1-penrose-smith"));
                }
                Some(parse_rat(value).map_err(usage)?)
            }
        };
        return FixtureRegistry::load_with_param(id, param).map_err(usage);
    }
    let map_path = source
        .map
        .as_ref()
        .ok_or_else(|| usage("either --fixture or --map is required"))?;
    let map_json: birdeg::ratmap::MapJson = read_json(map_path)?;
    let map = birdeg::ratmap::BirationalMapDescriptor::from_json(&map_json).map_err(usage)?;
    let charts = match &source.charts {
        None => birdeg::blowup::ChartSet::new(),
        Some(path) => {
            let chart_jsons: Vec<birdeg::blowup::ChartJson> = read_json(path)?;
            let charts = chart_jsons
                .iter()
                .map(birdeg::blowup::Chart::from_json)
                .collect::<Result<Vec<_>, _>>()
                .map_err(usage)?;
            birdeg::blowup::ChartSet::from_charts(charts)
        }
    };
    let picard = match &source.picard {
        None => None,
        Some(path) => {
            let pj: birdeg::picard::PicardJson = read_json(path)?;
            Some(birdeg::fixtures::PicardFixture {
                matrix: birdeg::picard::PicardMatrix::from_json(&pj).map_err(usage)?,
                known_fixed_classes: pj.known_fixed_classes.clone(),
            })
        }
    };
    let tracked: Vec<String> = map.critical_factors.iter().map(|f| f.chart.clone()).collect();
    let fixture = Fixture {
        id: map.name.clone(),
        map,
        charts,
        chart_vars: vec!["u".into(), "v".into()],
        tracked,
        recurrence: None,
        mu_recurrence: None,
        mu_towers: vec![],
        nu_mu_relations: vec![],
        picard,
        closed_form: None,
        scalar_recurrence: None,
        invariant: None,
        automorphism: None,
        golden_degrees: vec![],
        golden_indices: None,
    };
    fixture.validate().map_err(usage)?;
    Ok(fixture)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("bad JSON in {}: {e}", path.display())))
}

fn parse_methods(raw: &str) -> Result<Vec<Method>, CliError> {
    let mut out = Vec::new();
    for part in raw.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let m = Method::parse(part)
            .ok_or_else(|| usage(format!("unknown method {part:?}")))?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(usage("at least one method is required"));
    }
    Ok(out)
}

fn check_n(n: usize) -> Result<(), CliError> {
    if n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    Ok(())
}

fn emit(out: &Option<PathBuf>, suffix: Option<&str>, body: &str) -> Result<(), CliError> {
    match out {
        None => {
            print!("{body}");
            Ok(())
        }
        Some(path) => {
            let target = match suffix {
                None => path.clone(),
                Some(sfx) => {
                    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
                    let ext = path.extension().and_then(|s| s.to_str());
                    let name = match ext {
                        Some(ext) => format!("{stem}.{sfx}.{ext}"),
                        None => format!("{stem}.{sfx}"),
                    };
                    path.with_file_name(name)
                }
            };
            std::fs::write(&target, body)
                .map_err(|e| usage(format!("cannot write {}: {e}", target.display())))
        }
    }
}

fn cmd_degree_seq(args: RunArgs) -> Result<(), CliError> {
    check_n(args.n)?;
    let fixture = load_fixture(&args.source)?;
    let methods = parse_methods(&args.methods)?;
    let mut reports = Vec::new();
    let mut index_states = None;
    for method in &methods {
        if *method == Method::Indices {
            // run the chart iteration once and keep the full table
            let (p0, states) = index_table(&fixture, args.n, args.seed).map_err(run_err)?;
            let mut meta = indexmap::IndexMap::new();
            meta.insert("p0".to_string(), p0);
            meta.insert("seed".to_string(), args.seed.to_string());
            reports.push(birdeg::dynamics::DegreeSequenceReport {
                method: Method::Indices,
                values: states.iter().map(|s| s.d as i64).collect(),
                meta,
            });
            index_states = Some(states);
        } else {
            reports.push(degree_report(&fixture, *method, args.n, args.seed).map_err(run_err)?);
        }
    }
    let multi = reports.len() > 1;
    match args.format.as_str() {
        "csv" => {
            for report in &reports {
                let body = if report.method == Method::Indices {
                    report::index_csv(&fixture, index_states.as_ref().expect("stored"))
                } else {
                    report::degree_csv(report)
                };
                let suffix = multi.then(|| report.method.name());
                if args.out.is_none() && multi {
                    println!("# method={}", report.method.name());
                }
                emit(&args.out, suffix, &body)?;
            }
        }
        "json" => {
            let docs: Vec<serde_json::Value> = reports
                .iter()
                .map(|r| {
                    if r.method == Method::Indices {
                        report::index_json(
                            &fixture,
                            r.meta.get("p0").map(|s| s.as_str()).unwrap_or(""),
                            index_states.as_ref().expect("stored"),
                            args.seed,
                        )
                    } else {
                        report::degree_json(&fixture, r)
                    }
                })
                .collect();
            let body = format!("{}\n", serde_json::to_string_pretty(&docs).expect("json"));
            emit(&args.out, None, &body)?;
        }
        other => return Err(usage(format!("unknown format {other:?}"))),
    }
    check_agreement(&reports).map_err(|e| CliError::Check(e.to_string()))?;
    Ok(())
}

fn run_err(e: RunnerError) -> CliError {
    match &e {
        RunnerError::Disagreement { .. } => CliError::Check(e.to_string()),
        _ => CliError::Usage(e.to_string()),
    }
}

fn cmd_indices(args: RunArgs) -> Result<(), CliError> {
    check_n(args.n)?;
    let fixture = load_fixture(&args.source)?;
    let (p0, states) = index_table(&fixture, args.n, args.seed).map_err(run_err)?;
    match args.format.as_str() {
        "csv" => emit(&args.out, None, &report::index_csv(&fixture, &states))?,
        "json" => {
            let doc = report::index_json(&fixture, &p0, &states, args.seed);
            emit(
                &args.out,
                None,
                &format!("{}\n", serde_json::to_string_pretty(&doc).expect("json")),
            )?;
        }
        other => return Err(usage(format!("unknown format {other:?}"))),
    }
    Ok(())
}

fn cmd_verify(source: SourceArgs) -> Result<(), CliError> {
    let fixture = load_fixture(&source)?;
    let mut failure: Option<String> = None;
    let mut record = |name: &str, outcome: Result<String, String>| match outcome {
        Ok(detail) => println!("{name}: ok ({detail})"),
        Err(detail) => {
            println!("{name}: FAIL ({detail})");
            if failure.is_none() {
                failure = Some(name.to_string());
            }
        }
    };

    record(
        "charts",
        fixture
            .charts
            .validate()
            .map(|_| format!("{} charts", fixture.charts.ids().count()))
            .map_err(|e| e.to_string()),
    );
    record(
        "critical-factors",
        fixture
            .map
            .verify_critical_factors()
            .map(|(exps, scalar)| {
                let parts: Vec<String> =
                    exps.iter().map(|(id, e)| format!("({id})^{e}")).collect();
                format!("jacobian = {} * {}", birdeg::poly::format_rat(&scalar), parts.join(" * "))
            })
            .map_err(|e| e.to_string()),
    );
    for factor in &fixture.map.critical_factors {
        record(
            &format!("contraction[{}]", factor.id),
            fixture
                .map
                .contraction_check(&factor.id)
                .map(|p| format!("target {p}"))
                .map_err(|e| e.to_string()),
        );
        record(
            &format!("orbit[{}]", factor.id),
            fixture
                .map
                .orbit_until_indeterminate(&factor.target, 20)
                .map(|res| {
                    if res.hit {
                        format!("hits the indeterminacy set after {} steps", res.orbit.len() - 1)
                    } else {
                        "no hit within 20 steps".to_string()
                    }
                })
                .map_err(|e| e.to_string()),
        );
    }
    if fixture.map.inverse.is_some() {
        record(
            "inverse",
            fixture
                .map
                .verify_inverse()
                .map(|k| {
                    let names: Vec<&str> =
                        fixture.map.variables.iter().map(|s| s.as_str()).collect();
                    format!("composition factor {}", k.format_with(&names))
                })
                .map_err(|e| e.to_string()),
        );
    }
    if let Some((num, den)) = &fixture.invariant {
        let names: Vec<&str> = fixture.map.variables.iter().map(|s| s.as_str()).collect();
        record(
            "invariant",
            fixture
                .map
                .verify_rational_invariant(num, den)
                .map_err(|e| e.to_string())
                .and_then(|ok| {
                    if ok {
                        Ok(format!(
                            "({}) / ({}) preserved",
                            num.format_with(&names),
                            den.format_with(&names)
                        ))
                    } else {
                        Err("declared invariant is not preserved".to_string())
                    }
                }),
        );
    }
    if let (Some(pf), Some(expected)) = (&fixture.picard, fixture.automorphism) {
        record(
            "orthogonality",
            pf.matrix
                .orthogonality_check()
                .map_err(|e| e.to_string())
                .and_then(|orth| {
                    if orth == expected {
                        Ok(format!("{orth} (matches the automorphism flag)"))
                    } else {
                        Err(format!("got {orth}, fixture declares {expected}"))
                    }
                }),
        );
    }
    match failure {
        None => Ok(()),
        Some(name) => Err(CliError::Check(format!("check failed: {name}"))),
    }
}

fn cmd_picard(args: PicardArgs) -> Result<(), CliError> {
    let fixture = load_fixture(&args.source)?;
    let pf = fixture
        .picard
        .as_ref()
        .ok_or_else(|| usage("fixture has no divisor-class matrix"))?;
    match args.action {
        PicardCmd::Power { n } => {
            println!("{}", pf.matrix.power_hh_entry(n));
        }
        PicardCmd::FixedClasses => {
            for class in pf.matrix.fixed_classes() {
                let parts: Vec<String> = class
                    .coeffs
                    .iter()
                    .zip(&pf.matrix.basis.labels)
                    .filter(|(c, _)| !num_traits::Zero::is_zero(*c))
                    .map(|(c, l)| format!("{c}*{l}"))
                    .collect();
                println!("{}", parts.join(" + "));
            }
        }
        PicardCmd::Orthogonality => {
            let orth = pf
                .matrix
                .orthogonality_check()
                .map_err(|e| usage(e.to_string()))?;
            println!("{orth}");
            if let Some(expected) = fixture.automorphism {
                if orth != expected {
                    return Err(CliError::Check(format!(
                        "orthogonality {orth} does not match the fixture flag {expected}"
                    )));
                }
            }
        }
    }
    Ok(())
}

fn cmd_dyndeg(args: DyndegArgs) -> Result<(), CliError> {
    check_n(args.n)?;
    let fixture = load_fixture(&args.source)?;
    let (matrix, matrix_kind) = if let Some(rec) = &fixture.recurrence {
        (rec.matrix.clone(), "recurrence")
    } else if let Some(pf) = &fixture.picard {
        (
            pf.matrix.matrix.iter().map(|r| r.to_vec()).collect(),
            "picard",
        )
    } else {
        return Err(usage("fixture has neither a recurrence system nor a divisor matrix"));
    };
    // empirical tail from the cheapest exact degree source available
    let sequence: Option<Vec<i64>> = if let Some(rec) = &fixture.recurrence {
        rec.degree_sequence(args.n)
            .ok()
            .map(|v| v.iter().filter_map(|b| b.to_i64()).collect())
    } else {
        fixture.picard.as_ref().map(|pf| {
            (0..=args.n as u64)
                .filter_map(|n| pf.matrix.power_hh_entry(n).to_i64())
                .collect()
        })
    };
    let dd = dynamical_degree(&matrix, sequence.as_deref());
    match args.format.as_str() {
        "json" => {
            let doc = serde_json::json!({
                "fixture": fixture.id,
                "matrix": matrix_kind,
                "numeric": dd.numeric,
                "exact": dd.exact,
                "bracket": dd.bracket,
                "empiricalTail": dd.empirical_tail,
            });
            println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
        }
        _ => {
            println!("fixture: {}", fixture.id);
            println!("matrix: {matrix_kind}");
            println!("dynamical degree: {:.12}", dd.numeric);
            println!("exact: {}", dd.exact);
            println!("bracket: [{}, {}]", dd.bracket.0, dd.bracket.1);
            if let Some(tail) = dd.empirical_tail {
                println!("empirical tail d(n+1)/d(n): {tail:.9}");
            }
        }
    }
    Ok(())
}
