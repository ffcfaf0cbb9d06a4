//! Subcommand implementations. Each returns the process exit code on
//! success; errors are mapped to exit codes by the caller.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use super::artifact::{self, ArtifactHeader};
use super::config::ExperimentConfig;
use crate::distributions::{example1_symmetric_regions, InstanceKind, QueryRegion};
use crate::error::{Error, Result};
use crate::evaluation::{
    check_passive_bound, estimate_theta, excess_class_risk, passive_baseline, rate_fit, EvalSettings,
};
use crate::funcclass::Params;
use crate::learner::{self, epoch_count, predict, query_mass, simulated_labels};
use crate::oracle::{excess_surrogate_risk, fit_design, Benchmark, Predictor};
use crate::rng;
use crate::version_space::random_point;

pub const RESULTS_HEADER: &str = "trial,n,N,excess_class_risk,stderr,excess_surrogate_risk,query_mass_final,wall_ms,seed";
pub const VERIFY_HEADER: &str = "check,target,points,violations,lhs,rhs,note";
pub const THETA_HEADER: &str = "gamma,epsilon,value,event_prob,stderr";
pub const REPORT_HEADER: &str = "n,mode,trials,mean_N,mean_excess_class_risk,stderr_excess_class_risk";

/// `%.9g`-style formatting: 9 significant digits, trailing zeros trimmed.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.8e}");
    let (mant, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let mant = if mant.contains('.') { mant.trim_end_matches('0').trim_end_matches('.') } else { mant };
        format!("{mant}e{exp}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub trial: usize,
    pub n: usize,
    pub queries: usize,
    pub excess_class_risk: f64,
    pub stderr: f64,
    pub excess_surrogate_risk: f64,
    pub query_mass_final: f64,
    pub wall_ms: u64,
    pub seed: u64,
}

impl ResultRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.trial,
            self.n,
            self.queries,
            fmt_num(self.excess_class_risk),
            fmt_num(self.stderr),
            fmt_num(self.excess_surrogate_risk),
            fmt_num(self.query_mass_final),
            self.wall_ms,
            self.seed
        )
    }

    pub fn parse(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 9 {
            return Err(Error::invalid(format!("expected 9 columns, got {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::invalid(format!("{s}: {e}")));
        let int = |s: &str| s.parse::<u64>().map_err(|e| Error::invalid(format!("{s}: {e}")));
        Ok(ResultRow {
            trial: int(f[0])? as usize,
            n: int(f[1])? as usize,
            queries: int(f[2])? as usize,
            excess_class_risk: num(f[3])?,
            stderr: num(f[4])?,
            excess_surrogate_risk: num(f[5])?,
            query_mass_final: num(f[6])?,
            wall_ms: int(f[7])?,
            seed: int(f[8])?,
        })
    }
}

/// Seed of one trial, derived from the base seed.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    rng::splitmix64(base ^ rng::splitmix64(trial as u64 + 1))
}

fn eval_settings(cfg: &ExperimentConfig, base: u64) -> EvalSettings {
    EvalSettings {
        mc: cfg.mc_eval,
        oracle_cfg: cfg.learner.oracle_cfg.clone(),
        seed: rng::splitmix64(base ^ 0xE7A1),
    }
}

fn write_lines(path: &Path, header: &str, lines: &[String]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "{header}")?;
    for l in lines {
        writeln!(f, "{l}")?;
    }
    f.flush()?;
    Ok(())
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Error::config("jobs", "must be at least 1"));
        }
        b = b.num_threads(j);
    }
    b.build().map_err(|e| Error::Io(e.to_string()))
}

/// One active run plus the passive baseline at the matched label count.
fn run_cell(cfg: &ExperimentConfig, base: u64, trial: usize, n: usize, runs_dir: &Path) -> Result<[ResultRow; 2]> {
    let started = Instant::now();
    let seed = trial_seed(base, trial);
    let lcfg = cfg.learner_config(n, seed);
    let inst = &cfg.instance;
    let spec = &cfg.surrogate;
    let run_seed = learner::run_seed(inst, &lcfg);
    let mut labels = simulated_labels(inst, run_seed);
    let (sc, trace) = learner::run(inst, &cfg.class, spec, &lcfg, &mut labels)?;
    let ev = eval_settings(cfg, base);
    let dcfg = &lcfg.disagree_cfg;
    let h = |x: &[f64]| predict(&sc, x, dcfg);
    let ecr = excess_class_risk(&h, inst, ev.mc, ev.seed)?;
    let bench = inst.benchmark(&cfg.class);
    let esr = excess_surrogate_risk(
        &bench,
        spec,
        &Predictor::linear(&cfg.class, sc.final_params().clone()),
        inst,
        &QueryRegion::full(),
        ev.mc,
        &ev.oracle_cfg,
        ev.seed,
    )?;
    let qm = query_mass(&sc, epoch_count(n), ev.mc, inst, dcfg, ev.seed)?;
    let active_ms = started.elapsed().as_millis() as u64;
    let header = ArtifactHeader {
        class: cfg.class.clone(),
        surrogate: *spec,
        trial,
        n,
        trace: trace.clone(),
        config: serde_json::to_value(cfg).map_err(|e| Error::Artifact(e.to_string()))?,
    };
    artifact::write(&runs_dir.join(format!("t{trial}_n{n}.artifact")), &header, &sc)?;

    let passive_start = Instant::now();
    let labels_used = trace.total_queries.max(1);
    let (_, rep) = passive_baseline(inst, &bench, spec, labels_used, &ev, rng::splitmix64(run_seed ^ 0x9A55))?;
    let passive_ms = passive_start.elapsed().as_millis() as u64;
    let wall = |ms: u64| if cfg.record_wall_time { ms } else { 0 };
    Ok([
        ResultRow {
            trial,
            n,
            queries: trace.total_queries,
            excess_class_risk: ecr.value,
            stderr: ecr.stderr,
            excess_surrogate_risk: esr.value,
            query_mass_final: qm.value,
            wall_ms: wall(active_ms),
            seed,
        },
        ResultRow {
            trial,
            n,
            queries: labels_used,
            excess_class_risk: rep.excess_class_risk.value,
            stderr: rep.excess_class_risk.stderr,
            excess_surrogate_risk: rep.excess_surrogate_risk.value,
            query_mass_final: 1.0,
            wall_ms: wall(passive_ms),
            seed,
        },
    ])
}

pub fn cmd_run(cfg: &ExperimentConfig, out: &Path, base_seed: u64, jobs: Option<usize>) -> Result<i32> {
    if cfg.sweep.is_empty() {
        return Err(Error::config("sweep", "run needs at least one budget"));
    }
    let runs_dir = out.join("runs");
    fs::create_dir_all(&runs_dir)?;
    let cells: Vec<(usize, usize)> = (0..cfg.trials)
        .flat_map(|t| cfg.sweep.iter().map(move |n| (t, *n)))
        .collect();
    let results: Vec<Result<[ResultRow; 2]>> = pool(jobs)?.install(|| {
        cells
            .par_iter()
            .map(|(t, n)| run_cell(cfg, base_seed, *t, *n, &runs_dir))
            .collect()
    });
    let mut lines = Vec::new();
    let mut first_err = None;
    for r in results {
        match r {
            Ok(rows) => lines.extend(rows.iter().map(ResultRow::to_csv)),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    write_lines(&out.join("results.csv"), RESULTS_HEADER, &lines)?;
    match first_err {
        Some(e) => Err(e),
        None => Ok(0),
    }
}

pub fn cmd_verify(cfg: &ExperimentConfig, out: &Path, base_seed: u64) -> Result<i32> {
    fs::create_dir_all(out)?;
    let inst = &cfg.instance;
    let spec = &cfg.surrogate;
    let bench = inst.benchmark(&cfg.class);
    let psi_spec = cfg.verify.psi;
    let psi = move |t: f64| psi_spec.eval(t);
    let regions: Vec<QueryRegion<'static>> = if inst.kind == InstanceKind::Example1 && inst.d <= 12 {
        example1_symmetric_regions(inst.d).into_iter().map(|(_, r)| r).collect()
    } else {
        vec![QueryRegion::full()]
    };
    let ocfg = &cfg.learner.oracle_cfg;
    let report = crate::distributions::verify_assumption(
        inst,
        &bench,
        spec,
        &psi,
        &regions,
        cfg.verify.samples,
        ocfg,
        base_seed,
    )?;
    let mut lines = Vec::new();
    let mut violations = report.total_violations();
    for r in &report.regions {
        lines.push(format!(
            "assumption,\"{}\",{},{},{},,{}",
            r.region,
            r.checked_points,
            r.violations,
            fmt_num(r.worst_deficit),
            r.skipped.as_deref().unwrap_or("").replace(',', ";")
        ));
    }

    let ev = eval_settings(cfg, base_seed);
    let mut members: Vec<(String, Predictor)> = Vec::new();
    match &bench {
        Benchmark::Finite(class) => {
            for m in 0..class.members.len() {
                members.push((format!("member{m}"), Predictor::Finite { class: class.clone(), member: m }));
            }
        }
        Benchmark::Linear(cls) => {
            let design = inst.region_design(spec, &QueryRegion::full(), ev.mc, ev.seed)?;
            let fstar = fit_design(cls, spec, &design, ocfg, None)?.params;
            members.push(("f_star".into(), Predictor::linear(cls, fstar)));
            let mut r = rng::stream(base_seed, rng::STREAM_SEARCH);
            for i in 0..cfg.verify.bound_members {
                let theta = random_point(cls.param_dim(), cls.radius, &mut r);
                members.push((format!("random{i}"), Predictor::linear(cls, Params::new(theta))));
            }
        }
    }
    let points = inst.support().map(|s| s.len()).unwrap_or(ev.mc);
    for (label, f) in &members {
        let rep = check_passive_bound(f, inst, &bench, spec, &psi, &cfg.verify.gamma_grid, &ev)?;
        let bad = !rep.holds as usize;
        violations += bad;
        lines.push(format!(
            "passive_bound,{label},{points},{bad},{},{},best_gamma={}",
            fmt_num(rep.lhs.value),
            fmt_num(rep.best_rhs),
            fmt_num(rep.best_gamma)
        ));
    }
    write_lines(&out.join("verify.csv"), VERIFY_HEADER, &lines)?;
    if violations > 0 {
        log::error!("{violations} violations; see verify.csv");
        return Ok(3);
    }
    Ok(0)
}

pub fn cmd_theta(
    cfg: &ExperimentConfig,
    out: &Path,
    base_seed: u64,
    gammas: &[f64],
    epsilons: &[f64],
) -> Result<i32> {
    super::config::check_grid("gammas", gammas)?;
    super::config::check_grid("epsilons", epsilons)?;
    let cls = match cfg.instance.benchmark(&cfg.class) {
        Benchmark::Linear(c) => c,
        Benchmark::Finite(_) => return Err(Error::config("instance", "theta needs a linear class")),
    };
    fs::create_dir_all(out)?;
    let inst = &cfg.instance;
    let spec = &cfg.surrogate;
    let ev = eval_settings(cfg, base_seed);
    let design = inst.region_design(spec, &QueryRegion::full(), ev.mc, ev.seed)?;
    let fstar = fit_design(&cls, spec, &design, &ev.oracle_cfg, None)?.params;
    let mut lines = Vec::new();
    for g in gammas {
        for e in epsilons {
            let t = estimate_theta(&cls, &fstar, inst, *g, *e, cfg.theta.mc, cfg.theta.restarts, cfg.theta.norm, base_seed)?;
            lines.push(format!(
                "{},{},{},{},{}",
                fmt_num(*g),
                fmt_num(*e),
                fmt_num(t.value),
                fmt_num(t.event_prob.value),
                fmt_num(t.event_prob.stderr)
            ));
        }
    }
    write_lines(&out.join("theta.csv"), THETA_HEADER, &lines)?;
    Ok(0)
}

/// Rows of a results file, tagged active/passive by position.
pub fn read_results(path: &Path) -> Result<Vec<(ResultRow, &'static str)>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == RESULTS_HEADER => {}
        _ => return Err(Error::invalid(format!("{} lacks the results header", path.display()))),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| Ok((ResultRow::parse(l)?, if i % 2 == 0 { "active" } else { "passive" })))
        .collect()
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

pub fn cmd_report(out: &Path) -> Result<i32> {
    let rows = read_results(&out.join("results.csv"))?;
    let mut ns: Vec<usize> = rows.iter().map(|(r, _)| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let mut lines = Vec::new();
    let mut sweep = Vec::new();
    for n in &ns {
        for mode in ["active", "passive"] {
            let sel: Vec<&ResultRow> = rows.iter().filter(|(r, m)| r.n == *n && *m == mode).map(|(r, _)| r).collect();
            if sel.is_empty() {
                continue;
            }
            let q: Vec<f64> = sel.iter().map(|r| r.queries as f64).collect();
            let e: Vec<f64> = sel.iter().map(|r| r.excess_class_risk).collect();
            let (mq, _) = mean_se(&q);
            let (me, se) = mean_se(&e);
            if mode == "active" {
                sweep.push((*n as f64, mq, me));
            }
            lines.push(format!("{n},{mode},{},{},{},{}", sel.len(), fmt_num(mq), fmt_num(me), fmt_num(se)));
        }
    }
    write_lines(&out.join("report.csv"), REPORT_HEADER, &lines)?;
    match rate_fit(&sweep) {
        Ok(fit) => {
            let json = serde_json::to_string_pretty(&fit).map_err(|e| Error::Io(e.to_string()))?;
            fs::write(out.join("report.json"), &json)?;
            println!("{json}");
        }
        Err(Error::InsufficientData(msg)) => log::warn!("no rate fit: {msg}"),
        Err(e) => return Err(e),
    }
    Ok(0)
}

pub fn output_dir(cfg: Option<&ExperimentConfig>, flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| cfg.map(|c| c.output_dir.clone())).unwrap_or_else(|| PathBuf::from("."))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_use_nine_significant_digits() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(0.2), "0.2");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_num(2.001e-5), "2.001e-5");
        assert_eq!(fmt_num(123456789012.0), "1.23456789e11");
        assert_eq!(fmt_num(-0.0021), "-0.0021");
        assert_eq!(fmt_num(42.0), "42");
    }

    #[test]
    fn result_rows_round_trip() {
        let r = ResultRow {
            trial: 1,
            n: 15,
            queries: 9,
            excess_class_risk: 0.125,
            stderr: 0.0,
            excess_surrogate_risk: 1.5e-7,
            query_mass_final: 0.5,
            wall_ms: 0,
            seed: 77,
        };
        assert_eq!(ResultRow::parse(&r.to_csv()).unwrap(), r);
    }
}
