use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::{gen_instance, Instance, InstanceSpec};
use crate::diagnostics::{nmse, normalized_residual};
use crate::error::{Error, Result};
use crate::pursuit::{solve, Method, SolverConfig, SolverResult};

pub const REPORT_HEADER: &str = "method,ite,found,nmse,approx_err,time_s,flops";

/// Rows within this much of the best approximation error tie for best `c`.
const BEST_C_SLACK: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub methods: Vec<Method>,
    /// Block sizes tried for `gomp` and `bsr`.
    pub c_grid: Vec<usize>,
    /// Hand the true support to the solver and stop once it is all found.
    pub oracle_stop: bool,
    /// Run cells one at a time (clean timings).
    pub serial: bool,
    /// Iteration budget. `None` selects `k` atoms: `ceil(k / c)` iterations,
    /// or `min(N, d)` under `oracle_stop`.
    pub max_iterations: Option<usize>,
    pub residual_threshold: Option<f64>,
    pub ones_regressor: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            methods: Method::ALL.to_vec(),
            c_grid: vec![2, 3, 4, 8],
            oracle_stop: false,
            serial: false,
            max_iterations: None,
            residual_threshold: None,
            ones_regressor: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReportRow {
    /// Position of the instance in the spec list.
    pub instance: usize,
    pub seed: u64,
    pub method: Method,
    pub c: usize,
    pub best_c: bool,
    pub ite: usize,
    pub found: Option<usize>,
    pub nmse: Option<f64>,
    pub approx_err: f64,
    pub time_s: f64,
    pub flops: u64,
    /// Solver failure message; the other fields then describe the partial run.
    pub error: Option<String>,
}

impl BenchReportRow {
    /// `omp_sr`, or `bsr[c=4]` with a trailing `*` on the best block size.
    pub fn label(&self) -> String {
        if self.method.is_blocked() {
            format!(
                "{}[c={}]{}",
                self.method,
                self.c,
                if self.best_c { "*" } else { "" }
            )
        } else {
            self.method.to_string()
        }
    }
}

/// Runs every `(instance, method, c)` cell. Solver failures are recorded on
/// their row; only instance generation errors abort the batch.
pub fn run_benchmark(specs: &[InstanceSpec], cfg: &BenchConfig) -> Result<Vec<BenchReportRow>> {
    if cfg.methods.is_empty() {
        return Err(Error::Parameter("no methods to run".into()));
    }
    if cfg.c_grid.contains(&0) {
        return Err(Error::Parameter("block size 0 in grid".into()));
    }
    let instances = specs.iter().map(gen_instance).collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    for (i, inst) in instances.iter().enumerate() {
        for &m in &cfg.methods {
            if m.is_blocked() {
                if cfg.c_grid.is_empty() {
                    return Err(Error::Parameter(format!("{m} needs a block-size grid")));
                }
                cells.extend(
                    cfg.c_grid
                        .iter()
                        .filter(|&&c| c <= inst.dict.n_atoms())
                        .map(|&c| (i, m, c)),
                );
            } else {
                cells.push((i, m, 1));
            }
        }
    }

    let run = |&(i, m, c): &(usize, Method, usize)| {
        run_cell(i, specs[i].seed, &instances[i], m, c, cfg)
    };
    let mut rows: Vec<BenchReportRow> = if cfg.serial {
        cells.iter().map(run).collect()
    } else {
        cells.par_iter().map(run).collect()
    };
    flag_best_c(&mut rows);
    Ok(rows)
}

fn run_cell(
    instance: usize,
    seed: u64,
    inst: &Instance,
    method: Method,
    c: usize,
    cfg: &BenchConfig,
) -> BenchReportRow {
    let k = inst.x.sparsity();
    let (n, d) = (inst.dict.n_measurements(), inst.dict.n_atoms());
    let budget = cfg.max_iterations.unwrap_or(if cfg.oracle_stop {
        n.min(d)
    } else {
        k.div_ceil(c)
    });
    let mut solver = SolverConfig::default()
        .with_block_size(c)
        .with_max_iterations(budget.min(d))
        .with_ones_regressor(cfg.ones_regressor);
    solver.residual_threshold = cfg.residual_threshold;
    if cfg.oracle_stop {
        solver = solver.with_oracle_support(inst.x.support().to_vec());
    }

    let (res, error): (SolverResult, Option<String>) = match solve(method, &inst.dict, &inst.y, &solver) {
        Ok(r) => (r, None),
        Err(f) => (*f.partial, Some(f.error.to_string())),
    };
    BenchReportRow {
        instance,
        seed,
        method,
        c,
        best_c: false,
        ite: res.iterations_used,
        found: Some(res.found(inst.x.support())),
        nmse: nmse(&inst.x, &res.coefficients).ok(),
        approx_err: normalized_residual(&inst.y, &inst.dict, &res.coefficients).unwrap_or(f64::NAN),
        time_s: res.elapsed.as_secs_f64(),
        flops: res.flops.total(),
        error,
    }
}

fn flag_best_c(rows: &mut [BenchReportRow]) {
    let mut groups: Vec<(usize, Method)> = rows
        .iter()
        .filter(|r| r.method.is_blocked())
        .map(|r| (r.instance, r.method))
        .collect();
    groups.dedup();
    for (inst, m) in groups {
        let members: Vec<usize> = (0..rows.len())
            .filter(|&i| rows[i].instance == inst && rows[i].method == m && rows[i].error.is_none())
            .filter(|&i| rows[i].approx_err.is_finite())
            .collect();
        let Some(best_err) = members
            .iter()
            .map(|&i| rows[i].approx_err)
            .min_by(f64::total_cmp)
        else {
            continue;
        };
        let best = members
            .into_iter()
            .filter(|&i| rows[i].approx_err <= best_err + BEST_C_SLACK)
            .min_by_key(|&i| (rows[i].flops, rows[i].c));
        if let Some(i) = best {
            rows[i].best_c = true;
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ReportFormat {
    #[default]
    Csv,
    Pretty,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "pretty" => Ok(ReportFormat::Pretty),
            _ => Err(Error::Parameter(format!("unknown report format '{s}'"))),
        }
    }
}

fn real(v: f64) -> String {
    format!("{v:.5e}")
}

fn fields(r: &BenchReportRow) -> [String; 7] {
    [
        r.label(),
        r.ite.to_string(),
        r.found.map_or_else(String::new, |f| f.to_string()),
        r.nmse.map_or_else(String::new, real),
        real(r.approx_err),
        real(r.time_s),
        r.flops.to_string(),
    ]
}

/// Renders `rows` as CSV (header exactly [`REPORT_HEADER`]) or as aligned
/// text.
pub fn render_report(rows: &[BenchReportRow], format: ReportFormat) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Parameter("no rows to report".into()));
    }
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let header: Vec<&str> = REPORT_HEADER.split(',').collect();
            let csv_err = |e: csv::Error| Error::Parameter(format!("csv encoding: {e}"));
            w.write_record(&header).map_err(csv_err)?;
            for r in rows {
                w.write_record(fields(r)).map_err(csv_err)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Parameter(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("report is ASCII"))
        }
        ReportFormat::Pretty => {
            let header: Vec<String> = REPORT_HEADER.split(',').map(str::to_owned).collect();
            let body: Vec<[String; 7]> = rows.iter().map(fields).collect();
            let mut width = header.iter().map(String::len).collect::<Vec<_>>();
            for f in &body {
                for (w, cell) in width.iter_mut().zip(f) {
                    *w = (*w).max(cell.len());
                }
            }
            let line = |cells: &[String]| {
                let mut s = format!("{:<w$}", cells[0], w = width[0]);
                for (cell, w) in cells[1..].iter().zip(&width[1..]) {
                    s.push_str(&format!("  {cell:>w$}"));
                }
                s.push('\n');
                s
            };
            let mut out = line(&header);
            for f in &body {
                out.push_str(&line(f));
            }
            Ok(out)
        }
    }
}

pub fn emit_report(rows: &[BenchReportRow], path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let path = path.as_ref();
    let text = render_report(rows, format)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
