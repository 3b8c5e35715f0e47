use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use fk_kam::io::{write_field_dump, write_series_dump, write_trace_history, Summary};
use fk_kam::lindstedt::{check_symmetry, compare_with_kam, solve_eta_family, truncation_residual};
use fk_kam::model::check_nondegeneracy;
use fk_kam::oracle::{compare_solvers, DenseTarget};
use fk_kam::solver::{run_kam_traced, uniqueness_probe, ProbeOptions};
use fk_kam::{diophantine_constant, expand_series, newton_step, KamError, SolverState};

use crate::config::{ConfigError, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Solver(KamError),
    Io(PathBuf, std::io::Error),
    /// a validation run finished but missed its tolerance
    Check(String),
}

impl From<KamError> for CliError {
    fn from(e: KamError) -> Self {
        CliError::Solver(e)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

struct Output {
    dir: PathBuf,
    dumps: bool,
}

impl Output {
    fn new(cfg: &RunConfig) -> CliResult<Self> {
        let dir = cfg.output.dir.clone();
        fs::create_dir_all(&dir).map_err(|e| CliError::Io(dir.clone(), e))?;
        Ok(Self {
            dir,
            dumps: cfg.output.dumps,
        })
    }

    fn write(&self, name: impl AsRef<Path>, text: &str) -> CliResult<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::Io(parent.to_path_buf(), e))?;
        }
        fs::write(&path, text).map_err(|e| CliError::Io(path, e))
    }

    fn summary(&self, s: &Summary) -> CliResult<()> {
        let text = s.render();
        print!("{text}");
        self.write("summary.txt", &text)
    }
}

pub fn solve(cfg: &RunConfig) -> CliResult<()> {
    let out = Output::new(cfg)?;
    let model = cfg.model()?;
    let options = cfg.kam_options();
    let guess = SolverState::trivial(cfg.grid()?);
    let trace = run_kam_traced(&model, &guess, &options);
    out.write("history.csv", &write_trace_history(&trace, 0.0, 0.0, 0.0))?;
    let state = trace.result?;
    let mut s = Summary::new();
    s.text("status", "converged")
        .text("iterations", trace.history.len())
        .number("sigma", state.sigma)
        .number("lambda", state.lambda);
    let (res_e, res_f) = trace
        .history
        .last()
        .map_or((trace.initial_res_e, trace.initial_res_f), |r| (r.res_e_after, r.res_f_after));
    s.number("res_e", res_e)
        .number("res_f", res_f)
        .number("norm_v", state.v.sup_norm())
        .number("kappa_hat", model.freq.kappa_hat)
        .text("grid_size", cfg.numerics.grid_size);
    for c in &check_nondegeneracy(&state, &model, &options.thresholds).checks {
        s.number(&format!("margin_{}", c.name), c.margin);
    }
    if cfg.task.probe_restarts > 0 {
        let probe = ProbeOptions {
            scale: cfg.task.probe_scale,
            restarts: cfg.task.probe_restarts,
            seed: cfg.task.seed,
            ..ProbeOptions::default()
        };
        let rep = uniqueness_probe(&model, &state, &probe, &options)?;
        s.text("probe_restarts", rep.distances.len())
            .number("probe_max_distance", rep.max_distance());
    }
    if out.dumps {
        out.write("v.txt", &write_field_dump(&state.v))?;
        out.write("c.txt", &write_field_dump(&state.c))?;
    }
    out.summary(&s)
}

pub fn lindstedt(cfg: &RunConfig) -> CliResult<()> {
    let out = Output::new(cfg)?;
    let model = cfg.family_model()?;
    let order = cfg.task.order;
    let series = expand_series(&model, cfg.grid()?, order)?;
    out.write("series.txt", &write_series_dump(&series))?;
    let mut csv = String::from("order,mu,res_e,res_f\n");
    let mut s = Summary::new();
    s.text("order", order);
    for n in 1..=order {
        let fit = truncation_residual(&series.truncated(n), &model, &cfg.task.mu_list)?;
        for ((mu, e), f) in fit.mus.iter().zip(&fit.res_e).zip(&fit.res_f) {
            let _ = writeln!(csv, "{n},{},{},{}", num(*mu), num(*e), num(*f));
        }
        s.text(&format!("slope_e_{n}"), fit.slope_e.map_or("nan".into(), num))
            .text(&format!("slope_f_{n}"), fit.slope_f.map_or("nan".into(), num));
    }
    for n in 0..=order {
        s.number(&format!("sigma_{n}"), series.sigma_coeffs[n])
            .number(&format!("lambda_{n}"), series.lambda_coeffs[n]);
    }
    out.write("truncation.csv", &csv)?;
    out.summary(&s)
}

pub fn compare(cfg: &RunConfig) -> CliResult<()> {
    let out = Output::new(cfg)?;
    let model = cfg.family_model()?;
    let order = cfg.task.order;
    let series = expand_series(&model, cfg.grid()?, order)?;
    let rep = compare_with_kam(&series, &model, order, &cfg.task.mu_list, &cfg.kam_options())?;
    let mut csv = String::from("mu,kam_sigma,kam_lambda,diff_sigma,diff_lambda,diff_v,iterations\n");
    for i in 0..rep.mus.len() {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            num(rep.mus[i]),
            num(rep.kam_sigma[i]),
            num(rep.kam_lambda[i]),
            num(rep.diff_sigma[i]),
            num(rep.diff_lambda[i]),
            num(rep.diff_v[i]),
            rep.iterations[i]
        );
    }
    out.write("compare.csv", &csv)?;
    let slope = |x: Option<f64>| x.map_or("nan".to_string(), num);
    let mut s = Summary::new();
    s.text("order", order)
        .text("slope_sigma", slope(rep.slope_sigma))
        .text("slope_lambda", slope(rep.slope_lambda))
        .text("slope_v", slope(rep.slope_v));
    out.summary(&s)
}

pub fn diophantine(cfg: &RunConfig) -> CliResult<()> {
    let out = Output::new(cfg)?;
    let m = &cfg.model;
    let f = diophantine_constant(&m.omega, m.tau, m.kappa_cutoff)?;
    let k: Vec<String> = f.minimizer.0.iter().map(|k| k.to_string()).collect();
    let mut s = Summary::new();
    s.number("kappa_hat", f.kappa_hat)
        .number("tau", f.tau)
        .text("cutoff", f.cutoff)
        .text("k", k.join(" "))
        .text("m", f.minimizer.1);
    out.summary(&s)
}

pub fn sweep_eta(cfg: &RunConfig) -> CliResult<()> {
    let out = Output::new(cfg)?;
    let model = cfg.model()?;
    let count = cfg.task.eta_count;
    if count == 0 {
        return Err(KamError::InvalidInput("eta_count must be positive".into()).into());
    }
    let runs = solve_eta_family(&model, &SolverState::trivial(cfg.grid()?), count, &cfg.kam_options())?;
    let mut csv = String::from("eta,sigma,lambda,iterations,res_e,res_f\n");
    for (i, run) in runs.iter().enumerate() {
        let eta = i as f64 / count as f64;
        let (e, f) = run
            .history
            .last()
            .map_or((run.initial_res_e, run.initial_res_f), |r| (r.res_e_after, r.res_f_after));
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            num(eta),
            num(run.state.sigma),
            num(run.state.lambda),
            run.iterations(),
            num(e),
            num(f)
        );
        if out.dumps {
            out.write(format!("eta/v_{i:03}.txt"), &write_field_dump(&run.state.v))?;
            out.write(format!("eta/c_{i:03}.txt"), &write_field_dump(&run.state.c))?;
        }
    }
    out.write("eta.csv", &csv)?;
    let family: Vec<SolverState> = runs.into_iter().map(|r| r.state).collect();
    let rep = check_symmetry(&family, &model, cfg.task.iota)?;
    let mut sym = String::from("eta,residual\n");
    for (eta, r) in rep.etas.iter().zip(&rep.residuals) {
        let _ = writeln!(sym, "{},{}", num(*eta), num(*r));
    }
    out.write("symmetry.csv", &sym)?;
    let mut s = Summary::new();
    s.text("eta_count", count)
        .number("iota", cfg.task.iota)
        .number("symmetry_max_residual", rep.max_residual())
        .number("eta_tail", rep.eta_tail);
    out.summary(&s)
}

pub fn oracle_check(cfg: &RunConfig) -> CliResult<()> {
    let out = Output::new(cfg)?;
    let model = cfg.model()?;
    let cutoff = cfg.task.dense_cutoff;
    let tol = cfg.task.oracle_tol;
    let mut state = SolverState::trivial(cfg.grid()?);
    let mut csv = String::from(
        "step,target,diff_a,diff_b,diff_g,diff_d,diff_sigma,diff_lambda,diff_c,diff_v,update_norm,residual,condition,allowance,pass\n",
    );
    let (mut worst_fact, mut worst_ratio) = (0.0f64, 0.0f64);
    let (mut fast, mut dense) = (0.0, 0.0);
    for step in 0..cfg.task.oracle_steps {
        for target in [DenseTarget::Factorized, DenseTarget::NewtonExact] {
            let c = compare_solvers(&state, &model, cutoff, target)?;
            let (label, measured, allowance) = match target {
                DenseTarget::Factorized => ("factorized", c.max_diff(), tol),
                DenseTarget::NewtonExact => (
                    "newton_exact",
                    c.diff_v.max(c.diff_c).max(c.diff_sigma).max(c.diff_lambda),
                    tol.max(10.0 * c.residual * c.update_norm),
                ),
            };
            match target {
                DenseTarget::Factorized => worst_fact = worst_fact.max(measured),
                DenseTarget::NewtonExact => worst_ratio = worst_ratio.max(measured / allowance),
            }
            fast += c.fast_seconds;
            dense += c.dense_seconds;
            let _ = writeln!(
                csv,
                "{step},{label},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                num(c.diff_a),
                num(c.diff_b),
                num(c.diff_g),
                num(c.diff_d),
                num(c.diff_sigma),
                num(c.diff_lambda),
                num(c.diff_c),
                num(c.diff_v),
                num(c.update_norm),
                num(c.residual),
                num(c.condition),
                num(allowance),
                measured <= allowance
            );
        }
        state = newton_step(&state, &model)?.0;
    }
    out.write("oracle.csv", &csv)?;
    let pass = worst_fact <= tol && worst_ratio <= 1.0;
    let mut s = Summary::new();
    s.text("status", if pass { "pass" } else { "fail" })
        .text("dense_cutoff", cutoff)
        .number("max_factorized_diff", worst_fact)
        .number("max_exact_ratio", worst_ratio)
        .number("dense_over_fast_time", if fast > 0.0 { dense / fast } else { f64::NAN });
    out.summary(&s)?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Check(format!(
            "oracle mismatch: factorized {worst_fact:.3e} (tol {tol:.1e}), exact ratio {worst_ratio:.3}"
        )))
    }
}
