use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use greedy_sr::diagnostics::{nmse, normalized_residual, trace_conditions};
use greedy_sr::dictionary::{normalize_columns, recovery_report};
use greedy_sr::pursuit::{solve, SolverConfig};
use greedy_sr::workbench::{
    emit_report, gen_instance, load_csv_matrix, load_csv_vector, render_report, run_benchmark,
    save_csv_matrix, save_csv_vector, BenchConfig, DictKind, InstanceSpec, ReportFormat, ValueDist,
};
use greedy_sr::{Error, Method, SparseSignal};

#[derive(Parser)]
#[command(name = "greedy-sr", version, about = "Greedy sparse recovery: OMP variants, BSR and coherence diagnostics")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write dict.csv, signal.csv (dense x) and y.csv for one instance.
    Gen(GenArgs),
    /// Run one solver on a dictionary and measurement read from CSV.
    Recover(RecoverArgs),
    /// Benchmark solvers over generated instances and emit a report.
    Bench(BenchArgs),
    /// Trace the recovery conditions of BSR on small instances.
    Diagnose(DiagnoseArgs),
}

#[derive(Args, Clone)]
struct InstanceArgs {
    /// TOML instance spec; overrides the inline shape flags.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[arg(long, default_value_t = 256)]
    d: usize,
    #[arg(long, default_value_t = 8)]
    k: usize,
    /// Target noise norm ||e||_2.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value = "gaussian")]
    values: ValueDist,
    #[arg(long, default_value = "gaussian_normalized")]
    dict_kind: DictKind,
    #[arg(long)]
    dict_path: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RecoverArgs {
    #[arg(long)]
    dict: PathBuf,
    /// Measurement vector y.
    #[arg(long)]
    signal: PathBuf,
    /// Dense ground-truth coefficients; enables nmse and found.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value = "omp_sr")]
    method: Method,
    /// Atoms to select; the budget becomes ceil(k / c) iterations.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 1)]
    c: usize,
    /// Absolute residual threshold (default 1e-9 ||y||).
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    ones_regressor: bool,
    /// Dense coefficient vector output, in the scale of the input dictionary.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Comma-separated subset of omp_naive,omp_qr,omp_sr,gomp,bsr.
    #[arg(long, default_value = "omp_naive,omp_qr,omp_sr,gomp,bsr")]
    methods: String,
    #[arg(long, default_value = "2,3,4,8")]
    c_grid: String,
    /// `a..b` (inclusive) or a comma list. Replaces the seeds of spec files.
    #[arg(long)]
    seeds: Option<String>,
    /// Report path; stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: ReportFormat,
    /// Give solvers the true support and run until it is all found.
    #[arg(long)]
    oracle_stop: bool,
    /// Run one cell at a time for clean timings.
    #[arg(long)]
    serial: bool,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    ones_regressor: bool,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 14)]
    d: usize,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    c: usize,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value = "0..9")]
    seeds: String,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Per-iteration condition trace as CSV.
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

/// Spec file layout: a single instance, or a list under `[[instance]]`.
#[derive(Deserialize)]
#[serde(untagged)]
enum SpecFile {
    Many { instance: Vec<InstanceSpec> },
    One(InstanceSpec),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.cmd {
        Cmd::Gen(a) => gen(a),
        Cmd::Recover(a) => recover(a),
        Cmd::Bench(a) => bench(a),
        Cmd::Diagnose(a) => diagnose(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parameter(_) | Error::InstanceTooLarge { .. } => 1,
        Error::ExhaustedDictionary => 3,
        e if e.is_numerical() => 3,
        _ => 2,
    }
}

fn read_specs(args: &InstanceArgs) -> Result<Vec<InstanceSpec>, Error> {
    let Some(path) = &args.spec else {
        let mut spec = InstanceSpec::new(args.n, args.d, args.k, 0)
            .with_noise(args.noise)
            .with_values(args.values)
            .with_dict(args.dict_kind);
        spec.dict_path = args.dict_path.clone();
        return Ok(vec![spec]);
    };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parsed: SpecFile = toml::from_str(&text).map_err(|e| Error::Format {
        path: path.clone(),
        message: e.to_string(),
    })?;
    Ok(match parsed {
        SpecFile::Many { instance } => instance,
        SpecFile::One(s) => vec![s],
    })
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, Error> {
    let bad = || Error::Parameter(format!("seeds '{s}': expected a..b or a comma list"));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, Error> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::Parameter(format!("bad {what} '{t}'")))
        })
        .collect()
}

fn gen(a: GenArgs) -> Result<(), Error> {
    let mut specs = read_specs(&a.instance)?;
    if specs.len() != 1 {
        return Err(Error::Parameter("gen takes a single instance".into()));
    }
    let mut spec = specs.remove(0);
    if a.instance.spec.is_none() {
        spec.seed = a.seed;
    }
    let inst = gen_instance(&spec)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    save_csv_matrix(inst.dict.matrix(), a.out_dir.join("dict.csv"))?;
    save_csv_vector(&inst.x.to_dense(), a.out_dir.join("signal.csv"))?;
    save_csv_vector(&inst.y, a.out_dir.join("y.csv"))?;
    println!(
        "wrote {}x{} instance, k={}, seed={} to {}",
        inst.dict.n_measurements(),
        inst.dict.n_atoms(),
        inst.x.sparsity(),
        spec.seed,
        a.out_dir.display()
    );
    Ok(())
}

fn recover(a: RecoverArgs) -> Result<(), Error> {
    let raw = load_csv_matrix(&a.dict)?;
    let y = load_csv_vector(&a.signal)?;
    let truth = a
        .truth
        .as_ref()
        .map(|p| load_csv_vector(p).map(|v| SparseSignal::from_dense(&v)))
        .transpose()?;
    let (dict, norms) = normalize_columns(&raw)?;

    let mut cfg = SolverConfig::default().with_block_size(a.c).with_ones_regressor(a.ones_regressor);
    cfg.residual_threshold = a.delta;
    if let Some(t) = a.max_iter.or(a.k.map(|k| k.div_ceil(a.c.max(1)))) {
        cfg = cfg.with_max_iterations(t);
    }
    let (res, failure) = match solve(a.method, &dict, &y, &cfg) {
        Ok(r) => (r, None),
        Err(f) => (*f.partial, Some(f.error)),
    };

    // Back to the scale of the unnormalised dictionary.
    let pairs: Vec<(usize, f64)> = res
        .coefficients
        .support()
        .iter()
        .zip(res.coefficients.values())
        .map(|(&j, &v)| (j, v / norms[j]))
        .collect();
    let (idx, vals): (Vec<usize>, Vec<f64>) = pairs.into_iter().unzip();
    let x_hat = SparseSignal::new(dict.n_atoms(), idx, vals)?;

    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "method {}", a.method);
    let _ = writeln!(out, "ite {}", res.iterations_used);
    let _ = writeln!(out, "halted_by {:?}", res.halted_by);
    let _ = writeln!(out, "approx_err {:.5e}", normalized_residual(&y, &dict, &res.coefficients).unwrap_or(f64::NAN));
    if let Some(t) = &truth {
        let _ = writeln!(out, "found {}", res.found(t.support()));
        let _ = writeln!(out, "nmse {:.5e}", nmse(t, &x_hat)?);
    }
    let _ = writeln!(out, "flops {}", res.flops.total());
    let _ = writeln!(out, "time_s {:.5e}", res.elapsed.as_secs_f64());
    if let Some(p) = &a.out {
        save_csv_vector(&x_hat.to_dense(), p)?;
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn bench(a: BenchArgs) -> Result<(), Error> {
    let mut specs = read_specs(&a.instance)?;
    if let Some(s) = &a.seeds {
        let seeds = parse_seeds(s)?;
        specs = specs
            .iter()
            .flat_map(|sp| {
                seeds.iter().map(move |&seed| InstanceSpec { seed, ..sp.clone() })
            })
            .collect();
    }
    let cfg = BenchConfig {
        methods: parse_list(&a.methods, "method")?,
        c_grid: parse_list(&a.c_grid, "block size")?,
        oracle_stop: a.oracle_stop,
        serial: a.serial,
        max_iterations: a.max_iter,
        residual_threshold: a.delta,
        ones_regressor: a.ones_regressor,
    };
    let rows = run_benchmark(&specs, &cfg)?;
    for r in rows.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "warning: instance {} (seed {}) {}: {}",
            r.instance,
            r.seed,
            r.label(),
            r.error.as_deref().unwrap_or_default()
        );
    }
    match &a.report {
        Some(p) => emit_report(&rows, p, a.format),
        None => {
            print!("{}", render_report(&rows, a.format)?);
            Ok(())
        }
    }
}

fn diagnose(a: DiagnoseArgs) -> Result<(), Error> {
    let seeds = parse_seeds(&a.seeds)?;
    let mut trace = String::from(
        "seed,iteration,rho,rho_c,rho_c_separate,rho_c_switched,optimal_selected,nonoptimal_selected,chosen_optimal,chosen,l,n,mu_sum,lemma1\n",
    );
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.6e}"));
    println!("seed  mu        mu(2k-1)<1  recovered  ite  prefinal_optimal  rho<1_all  rho_c<1_all");
    for &seed in &seeds {
        let spec = InstanceSpec::new(a.n, a.d, a.k, seed)
            .with_noise(a.noise)
            .with_block_size(a.c);
        let inst = gen_instance(&spec)?;
        let cfg = SolverConfig::default()
            .with_block_size(a.c)
            .with_max_iterations(a.max_iter.unwrap_or(a.k.div_ceil(a.c)));
        let t = trace_conditions(&inst.dict, &inst.y, &inst.x, &cfg)?;
        let l = a.k.saturating_sub(1).min(a.d.saturating_sub(1));
        let report = recovery_report(&inst.dict, a.k, l, a.k.min(a.d - 1).max(1))?;
        for r in &t.records {
            trace.push_str(&format!(
                "{seed},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.iteration,
                opt(r.rho),
                opt(r.rho_c),
                opt(r.rho_c_separate),
                opt(r.rho_c_switched),
                r.optimal_selected,
                r.nonoptimal_selected,
                r.chosen_optimal,
                r.chosen,
                r.l,
                r.n,
                opt(r.mu_sum),
                opt(r.lemma1),
            ));
        }
        println!(
            "{seed:<5} {:<9.4} {:<11} {:<10} {:<4} {:<17} {:<10} {}",
            report.mu,
            report.strong_ok,
            t.recovered(),
            t.result.iterations_used,
            t.prefinal_all_optimal(),
            t.records.iter().all(|r| r.rho_ok()),
            t.records.iter().all(|r| r.rho_c_ok()),
        );
    }
    if let Some(p) = &a.trace_out {
        write_text(p, &trace)?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
