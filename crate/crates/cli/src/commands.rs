use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use codcov::assignment::{CostMatrix, Solver};
use codcov::grid::{AugmentedGrid, GridConfig};
use codcov::nulldist::{CriticalValueRequest, CriticalValues};
use codcov::reference::reference_critical_value;
use codcov::testkit::{draw_sample, simulate as run_simulation, Example, SimulationConfig};
use codcov::testkit::{SpectrumOptions, TestConfig, TestRunner, SCHEMA_VERSION};

use crate::error::{CliError, CliResult};
use crate::input::{load_sample, InputSpec};
use crate::{BenchArgs, CriticalArgs, MethodArg, OutputOpts, SimulateArgs, SolverArg, SpectrumOpts, TestArgs};

fn emit(out: &OutputOpts, text: &str) -> CliResult<()> {
    match &out.output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Input(format!("cannot write to stdout: {e}")))
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn critical_store(opts: &SpectrumOpts) -> Arc<CriticalValues> {
    Arc::new(match &opts.cache {
        Some(path) => CriticalValues::with_file(path),
        None => CriticalValues::in_memory(),
    })
}

fn spectrum_options(opts: &SpectrumOpts) -> SpectrumOptions {
    SpectrumOptions { m_r: opts.m_r, m_s: opts.m_s, truncation: opts.truncation }
}

fn delimiter_byte(c: char) -> CliResult<u8> {
    u8::try_from(c).map_err(|_| CliError::Input(format!("delimiter {c:?} is not a single-byte character")))
}

fn unique_methods(args: &[MethodArg]) -> Vec<codcov::testkit::Method> {
    let mut out = Vec::new();
    for m in args.iter().flat_map(|a| a.methods()) {
        if !out.contains(&m) {
            out.push(m);
        }
    }
    out
}

pub fn test(args: TestArgs) -> CliResult<()> {
    let spec = InputSpec {
        x: args.x.clone(),
        y: args.y.clone(),
        px: args.px,
        has_header: args.header,
        delimiter: delimiter_byte(args.delimiter)?,
    };
    let sample = load_sample(&spec)?;
    let methods = args.method.methods();
    let mut config = TestConfig::new(methods[0], args.alpha);
    config.permutations = args.permutations;
    config.mc_reps = args.mc_reps;
    config.seed = args.seed;
    config.grid = GridConfig { mode: args.direction_mode.mode(), seed: args.seed };
    config.solver = args.solver.solver();
    config.spectrum = spectrum_options(&args.spectrum);
    config.validate()?;

    let runner = TestRunner::new(critical_store(&args.spectrum));
    let reports = runner.run_methods(&sample, &config, &methods)?;
    let text = if args.out.json {
        if args.method == MethodArg::All {
            to_json(&reports)
        } else {
            to_json(&reports[0])
        }
    } else {
        let mut s = format!("n = {}, p = {}, q = {}, alpha = {}\n", sample.n(), sample.p(), sample.q(), args.alpha);
        s.push_str(&format!("{:<20} {:>14} {:>14} {:>10} {:>7}\n", "method", "statistic", "threshold", "p-value", "reject"));
        for r in &reports {
            let pv = r.p_value.map_or(String::from("-"), |p| format!("{p:.4}"));
            s.push_str(&format!(
                "{:<20} {:>14.6e} {:>14.6e} {:>10} {:>7}\n",
                r.method.name(),
                r.statistic,
                r.threshold,
                pv,
                r.reject
            ));
        }
        let mut notes: Vec<&String> = reports.iter().flat_map(|r| &r.metadata.notes).collect();
        notes.dedup();
        for n in notes {
            s.push_str(&format!("note: {n}\n"));
        }
        s
    };
    emit(&args.out, &text)
}

#[derive(Serialize)]
struct CriticalRow {
    p: usize,
    q: usize,
    alpha: f64,
    #[serde(rename = "M_R")]
    m_r: usize,
    #[serde(rename = "M_S")]
    m_s: usize,
    #[serde(rename = "K")]
    truncation: usize,
    value: f64,
    reference: Option<f64>,
    deviation: Option<f64>,
}

#[derive(Serialize)]
struct CriticalTable {
    schema_version: u32,
    rows: Vec<CriticalRow>,
    spectral_solves: usize,
    max_deviation: Option<f64>,
    wall_time_ms: f64,
}

pub fn critical_values(args: CriticalArgs) -> CliResult<()> {
    let start = Instant::now();
    let store = critical_store(&args.spectrum);
    let mut rows = Vec::new();
    for &p in &args.p {
        for &q in &args.q {
            for &alpha in &args.alpha {
                let req = CriticalValueRequest {
                    p,
                    q,
                    alpha,
                    m_r: args.spectrum.m_r,
                    m_s: args.spectrum.m_s,
                    truncation: args.spectrum.truncation,
                };
                let value = store.get(&req)?;
                let reference = reference_critical_value(p, q, alpha);
                rows.push(CriticalRow {
                    p,
                    q,
                    alpha,
                    m_r: req.m_r,
                    m_s: req.m_s,
                    truncation: req.truncation,
                    value,
                    reference,
                    deviation: reference.map(|r| (value - r).abs()),
                });
            }
        }
    }
    let max_deviation = rows.iter().filter_map(|r| r.deviation).reduce(f64::max);
    let table = CriticalTable {
        schema_version: SCHEMA_VERSION,
        spectral_solves: store.spectral_solves(),
        max_deviation,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        rows,
    };
    let text = if args.out.json {
        to_json(&table)
    } else {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &table.rows {
            w.serialize(r).map_err(|e| CliError::Input(format!("csv output: {e}")))?;
        }
        String::from_utf8(w.into_inner().map_err(|e| CliError::Input(format!("csv output: {e}")))?)
            .expect("csv output is utf-8")
    };
    emit(&args.out, &text)?;
    eprintln!("spectral solves: {}", table.spectral_solves);
    if args.verify_reference {
        match max_deviation {
            None => {
                return Err(CliError::Input("no requested entry is covered by the reference table".into()));
            }
            Some(dev) => {
                eprintln!("max deviation from reference: {dev:.5} (tolerance {})", args.tolerance);
                if dev > args.tolerance {
                    return Err(CliError::Compute(codcov::Error::Numerical(format!(
                        "critical values deviate from the reference table by {dev:.5} > {}",
                        args.tolerance
                    ))));
                }
            }
        }
    }
    Ok(())
}

fn parse_example(label: &str) -> CliResult<(Example, f64)> {
    let mut chars = label.chars();
    let example = match chars.next() {
        Some('1') => Example::Gaussian,
        Some('2') => Example::Cauchy,
        _ => return Err(CliError::Input(format!("unknown example {label:?}; expected 1a..1c or 2a..2c"))),
    };
    let tau = match (chars.next(), chars.next()) {
        (Some('a'), None) => 0.0,
        (Some('b'), None) => 0.5,
        (Some('c'), None) => 0.9,
        _ => return Err(CliError::Input(format!("unknown example {label:?}; expected 1a..1c or 2a..2c"))),
    };
    Ok((example, tau))
}

pub fn simulate(args: SimulateArgs) -> CliResult<()> {
    let (example, tau) = parse_example(&args.example)?;
    let methods = unique_methods(&args.methods);
    let mut test = TestConfig::new(methods[0], args.alpha);
    test.permutations = args.permutations;
    test.mc_reps = args.mc_reps;
    test.seed = args.seed;
    test.grid = GridConfig { mode: args.direction_mode.mode(), seed: args.seed };
    test.solver = args.solver.solver();
    test.spectrum = spectrum_options(&args.spectrum);
    let config = SimulationConfig {
        example,
        tau,
        rhos: args.rho.clone(),
        p: args.p,
        q: args.q,
        n: args.n,
        reps: args.reps,
        methods,
        test,
    };
    let runner = TestRunner::new(critical_store(&args.spectrum));
    let table = run_simulation(&config, &runner)?;
    let text = if args.out.json { to_json(&table) } else { table.to_csv()? };
    emit(&args.out, &text)
}

#[derive(Serialize)]
struct BenchRow {
    solver: &'static str,
    n: usize,
    d: usize,
    median_ms: f64,
    total_cost: f64,
}

#[derive(Serialize)]
struct BenchSlope {
    solver: &'static str,
    log_log_slope: f64,
}

#[derive(Serialize)]
struct BenchReport {
    schema_version: u32,
    rows: Vec<BenchRow>,
    slopes: Vec<BenchSlope>,
    /// `Some(false)` when both solvers ran and the scaling solver was not
    /// faster at the largest `n`.
    gabow_tarjan_faster_at_largest_n: Option<bool>,
}

fn solver_name(s: SolverArg) -> &'static str {
    match s {
        SolverArg::Hungarian => "hungarian",
        SolverArg::GabowTarjan => "gabow_tarjan",
    }
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        f64::NAN
    }
}

pub fn bench(args: BenchArgs) -> CliResult<()> {
    if args.reps == 0 || args.n.is_empty() || args.solvers.is_empty() {
        return Err(CliError::Input("bench needs at least one solver, one n and one repetition".into()));
    }
    let config = GridConfig { mode: None, seed: args.seed };
    let mut rows = Vec::new();
    for &n in &args.n {
        let grid = AugmentedGrid::for_sample(n, args.d, &config)?;
        let mut rng = codcov::rng::seeded(args.seed);
        let sample = draw_sample(Example::Gaussian, args.d, 1, n, 0.0, 0.0, &mut rng)?.x().clone();
        let costs = CostMatrix::squared_distances(&sample, &grid.points)?;
        for &s in &args.solvers {
            let solver = match s {
                SolverArg::Hungarian => Solver::Hungarian,
                SolverArg::GabowTarjan => Solver::GabowTarjan { scale: args.scale },
            };
            let mut times = Vec::with_capacity(args.reps);
            let mut cost = 0.0;
            for _ in 0..args.reps {
                let t = Instant::now();
                cost = solver.solve(&costs)?.total_cost;
                times.push(t.elapsed().as_secs_f64() * 1e3);
            }
            times.sort_by(f64::total_cmp);
            rows.push(BenchRow { solver: solver_name(s), n, d: args.d, median_ms: times[times.len() / 2], total_cost: cost });
        }
    }
    let mut slopes = Vec::new();
    for &s in &args.solvers {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.solver == solver_name(s) && r.median_ms > 0.0)
            .map(|r| ((r.n as f64).ln(), r.median_ms.ln()))
            .collect();
        if pts.len() >= 2 {
            slopes.push(BenchSlope { solver: solver_name(s), log_log_slope: least_squares_slope(&pts) });
        }
    }
    let largest = *args.n.iter().max().expect("nonempty");
    let time_at = |name: &str| rows.iter().find(|r| r.n == largest && r.solver == name).map(|r| r.median_ms);
    let gt_faster = match (time_at("gabow_tarjan"), time_at("hungarian")) {
        (Some(g), Some(h)) => Some(g < h),
        _ => None,
    };
    let report = BenchReport { schema_version: SCHEMA_VERSION, rows, slopes, gabow_tarjan_faster_at_largest_n: gt_faster };
    let text = if args.out.json {
        to_json(&report)
    } else {
        let mut s = String::from("solver,n,d,median_ms,total_cost\n");
        for r in &report.rows {
            s.push_str(&format!("{},{},{},{:.3},{}\n", r.solver, r.n, r.d, r.median_ms, r.total_cost));
        }
        for sl in &report.slopes {
            s.push_str(&format!("# {} log-log slope {:.3}\n", sl.solver, sl.log_log_slope));
        }
        if gt_faster == Some(false) {
            s.push_str(&format!("# gabow_tarjan is not faster than hungarian at n = {largest}\n"));
        }
        s
    };
    emit(&args.out, &text)
}
