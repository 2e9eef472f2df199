//! Config-driven learning and reconstruction, and the files they leave behind.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use qreg_core::certify::Summary;
use qreg_core::io::{format_f64, write_atomic, write_bank, write_signal, write_trajectory, SignalFormat};
use qreg_core::{
    j_value, j_value_bank, learn, load_config, solve_reconstruction, BallConstraint, CertificationReport, ExperimentConfig,
    FilterBank, LearnResult, Mode, Signal,
};

use crate::{Failure, LearnArgs, RunAllArgs};

fn seed_from_env() -> Result<Option<u64>, Failure> {
    match std::env::var("QREG_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Usage(format!("QREG_SEED must be an unsigned integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn load(args: &LearnArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = load_config(&args.config)?;
    if let Some(seed) = args.seed.or(seed_from_env()?) {
        cfg.learn.seed = seed;
    }
    if let Some(r) = args.restarts {
        if r == 0 {
            return Err(Failure::Usage("--restarts must be at least 1".into()));
        }
        cfg.learn.restarts = r;
    }
    Ok(cfg)
}

fn out_dir(args: &LearnArgs, cfg: &ExperimentConfig) -> PathBuf {
    args.out_dir
        .clone()
        .unwrap_or_else(|| Path::new("results").join(cfg.name.as_deref().unwrap_or("experiment")))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| {
        Failure::Data(qreg_core::Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })
    })
}

/// One-line rendering of a filter; 2D rows are separated by `;`.
pub fn describe_filter(h: &qreg_core::Kernel) -> String {
    let rows: Vec<String> = h
        .data()
        .chunks(h.cols())
        .map(|r| r.iter().map(|v| format!("{v:+.6}")).collect::<Vec<_>>().join(" "))
        .collect();
    format!("[{}]", rows.join("; "))
}

fn describe_summary(name: &str, s: &Summary) -> String {
    let worst = s.worst_margin.map_or("-".to_string(), |m| format!("{m:.3e}"));
    format!(
        "  {name:<10} {:>6} checked {:>4} violations   worst margin {worst}\n",
        s.checked, s.violations
    )
}

pub fn describe_certification(r: &CertificationReport) -> String {
    let mut out = format!(
        "certification over {} trajectories: {}\n",
        r.trajectories,
        if r.passed() { "pass" } else { "FAIL" }
    );
    out += &describe_summary("decrease", &r.decrease);
    out += &describe_summary("gradient", &r.gradient);
    out += &describe_summary("monotone", &r.monotone);
    out
}

/// Writes a signal as CSV, plus a PGM preview for images.
fn write_plottable(dir: &Path, stem: &str, u: &Signal) -> Result<(), Failure> {
    write_signal(&dir.join(format!("{stem}.csv")), u, SignalFormat::Csv)?;
    if u.rows() > 1 && u.cols() > 1 {
        write_signal(&dir.join(format!("{stem}.pgm")), u, SignalFormat::Pgm)?;
    }
    Ok(())
}

pub struct Learned {
    pub result: LearnResult,
    pub summary: String,
}

/// Learns the configured problem and writes bank, trajectory, restart table,
/// evaluations and certification report into `dir`.
pub fn learn_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<Learned, Failure> {
    let problem_cfg = cfg
        .problem
        .as_ref()
        .ok_or_else(|| Failure::Usage("config has a fixed bank and nothing to learn".into()))?;
    let (problem, positives, negatives) = problem_cfg.build(&cfg.base_dir)?;
    create_dir(dir)?;
    let result = learn(&problem, &cfg.learn)?;

    write_bank(&dir.join("bank.txt"), &result.bank)?;
    write_trajectory(&dir.join("trajectory.qrt"), &result.trajectory)?;

    let mut table = String::from("seed,mu\n");
    for r in &result.restarts {
        match &r.mu {
            Ok(mu) => writeln!(table, "{},{}", r.seed, format_f64(*mu)).unwrap(),
            Err(_) => writeln!(table, "{},degenerate", r.seed).unwrap(),
        }
    }
    write_atomic(&dir.join("restarts.csv"), table.as_bytes())?;

    let mut eval = String::from("signal,J\n");
    let mut summary = String::new();
    let name = cfg.name.as_deref().unwrap_or("experiment");
    let shape = problem.kernel();
    writeln!(
        summary,
        "{name}: {} mode, {} filter(s) of {}x{}, {} restarts",
        match problem.mode() {
            Mode::Standard => "standard",
            Mode::Infimal => "infimal",
        },
        problem.filters(),
        shape.rows,
        shape.cols,
        cfg.learn.restarts
    )
    .unwrap();
    let degenerate = result.restarts.iter().filter(|r| r.mu.is_err()).count();
    writeln!(
        summary,
        "best seed {}: mu = {}  ({degenerate} degenerate restarts)",
        result.seed,
        format_f64(result.mu)
    )
    .unwrap();
    for (k, h) in result.bank.filters().iter().enumerate() {
        writeln!(summary, "  h{} = {}", k + 1, describe_filter(h)).unwrap();
    }
    for (role, signals) in [("positive", &positives), ("negative", &negatives)] {
        for (i, u) in signals.iter().enumerate() {
            let label = format!("{role}_{}", i + 1);
            let j = j_value_bank(u, &result.bank);
            writeln!(eval, "{label},{}", format_f64(j)).unwrap();
            writeln!(summary, "  J({label}) = {}", format_f64(j)).unwrap();
            write_plottable(dir, &label, u)?;
        }
    }
    if problem.mode() == Mode::Infimal {
        for (k, (u, h)) in positives.iter().zip(result.bank.filters()).enumerate() {
            let j = j_value(u, h);
            writeln!(eval, "part_{0}_filter_{0},{1}", k + 1, format_f64(j)).unwrap();
            writeln!(summary, "  J(part_{0}; h{0}) = {1}", k + 1, format_f64(j)).unwrap();
        }
    }
    write_atomic(&dir.join("evaluation.csv"), eval.as_bytes())?;

    let cert = describe_certification(&result.certification);
    write_atomic(&dir.join("certification.txt"), cert.as_bytes())?;
    summary += &cert;
    Ok(Learned { result, summary })
}

/// Runs the configured reconstructions with `bank`, writing signals and a
/// metrics table into `dir`.
pub fn reconstruct_experiment(cfg: &ExperimentConfig, bank: &FilterBank, dir: &Path) -> Result<String, Failure> {
    if cfg.reconstruct.is_empty() {
        return Ok(String::new());
    }
    create_dir(dir)?;
    let mut table = String::from("name,J_u,J_f,distance,radius,feasibility,error,iterations,converged\n");
    let mut summary = String::new();
    for r in &cfg.reconstruct {
        let (f, reference) = r.build(&cfg.base_dir)?;
        let ball = BallConstraint::noise_level(f.clone(), r.eta, r.sigma)?;
        let rec = solve_reconstruction(&ball, bank, r.extent, &r.solver)?;
        let dist = rec.signal.distance(&f);
        let error = rec.signal.distance(&reference);
        writeln!(
            table,
            "{},{},{},{},{},{},{},{},{}",
            r.name,
            format_f64(rec.objective),
            format_f64(rec.initial_objective),
            format_f64(dist),
            format_f64(ball.radius()),
            format_f64(dist - ball.radius()),
            format_f64(error),
            rec.iterations,
            rec.converged
        )
        .unwrap();
        writeln!(
            summary,
            "  reconstruct {}: J(u) = {}  J(f) = {}  ||u - f|| - r = {:.2e}  ||u - ref|| = {}",
            r.name,
            format_f64(rec.objective),
            format_f64(rec.initial_objective),
            dist - ball.radius(),
            format_f64(error)
        )
        .unwrap();
        let residual = f.add(&rec.signal.scaled(-1.0))?;
        write_plottable(dir, &format!("{}_f", r.name), &f)?;
        write_plottable(dir, &format!("{}_u", r.name), &rec.signal)?;
        write_plottable(dir, &format!("{}_residual", r.name), &residual)?;
    }
    write_atomic(&dir.join("reconstruct.csv"), table.as_bytes())?;
    Ok(summary)
}

fn certification_outcome(learned: Option<&Learned>, name: &str) -> Result<(), Failure> {
    match learned {
        Some(l) if !l.result.certification.passed() => Err(Failure::Certification(name.to_string())),
        _ => Ok(()),
    }
}

pub fn learn_command(args: &LearnArgs) -> Result<(), Failure> {
    let cfg = load(args)?;
    let dir = out_dir(args, &cfg);
    let learned = learn_experiment(&cfg, &dir)?;
    print!("{}", learned.summary);
    write_atomic(&dir.join("summary.txt"), learned.summary.as_bytes())?;
    certification_outcome(Some(&learned), cfg.name.as_deref().unwrap_or("experiment"))
}

/// Learns or loads the bank, then reconstructs. Returns the printed summary.
fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<(String, Option<Learned>), Failure> {
    let (bank, mut summary, learned) = match &cfg.bank {
        Some(source) => {
            let bank = source.build(&cfg.base_dir)?;
            create_dir(dir)?;
            write_bank(&dir.join("bank.txt"), &bank)?;
            let mut s = format!("{}: fixed bank\n", cfg.name.as_deref().unwrap_or("experiment"));
            for (k, h) in bank.filters().iter().enumerate() {
                writeln!(s, "  h{} = {}", k + 1, describe_filter(h)).unwrap();
            }
            (bank, s, None)
        }
        None => {
            let l = learn_experiment(cfg, dir)?;
            (l.result.bank.clone(), l.summary.clone(), Some(l))
        }
    };
    summary += &reconstruct_experiment(cfg, &bank, dir)?;
    write_atomic(&dir.join("summary.txt"), summary.as_bytes())?;
    Ok((summary, learned))
}

pub fn run_command(args: &LearnArgs) -> Result<(), Failure> {
    let cfg = load(args)?;
    let dir = out_dir(args, &cfg);
    let (summary, learned) = run_experiment(&cfg, &dir)?;
    print!("{summary}");
    certification_outcome(learned.as_ref(), cfg.name.as_deref().unwrap_or("experiment"))
}

fn find_configs(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            find_configs(&path, out)?;
        } else if path.extension().is_some_and(|e| e == "toml") {
            out.push(path);
        }
    }
    Ok(())
}

pub fn run_all(args: &RunAllArgs) -> Result<(), Failure> {
    if args.max_restarts == 0 {
        return Err(Failure::Usage("--max-restarts must be at least 1".into()));
    }
    let mut configs = Vec::new();
    find_configs(&args.experiments, &mut configs).map_err(|e| {
        Failure::Data(qreg_core::Error::Io {
            path: args.experiments.clone(),
            source: e,
        })
    })?;
    configs.sort();
    if configs.is_empty() {
        return Err(Failure::Usage(format!(
            "no experiment configs under {}",
            args.experiments.display()
        )));
    }
    let env_seed = seed_from_env()?;

    let mut failed_cert = Vec::new();
    let mut failed_data = Vec::new();
    for path in &configs {
        let rel = path.strip_prefix(&args.experiments).unwrap_or(path).with_extension("");
        let dir = args.out_dir.join(&rel);
        let started = std::time::Instant::now();
        let outcome = load_config(path).map_err(Failure::from).and_then(|mut cfg| {
            cfg.learn.restarts = cfg.learn.restarts.min(args.max_restarts);
            if let Some(seed) = env_seed {
                cfg.learn.seed = seed;
            }
            run_experiment(&cfg, &dir)
        });
        match outcome {
            Ok((summary, learned)) => {
                print!("{summary}");
                println!("  ({:.1} s, results in {})\n", started.elapsed().as_secs_f64(), dir.display());
                if learned.is_some_and(|l| !l.result.certification.passed()) {
                    failed_cert.push(rel.display().to_string());
                }
            }
            Err(e) => {
                eprintln!("qreg: {}: {e}\n", path.display());
                failed_data.push(rel.display().to_string());
            }
        }
    }
    println!(
        "{} experiments, {} certification failures, {} errors",
        configs.len(),
        failed_cert.len(),
        failed_data.len()
    );
    if !failed_data.is_empty() {
        Err(Failure::Data(qreg_core::Error::Config(format!(
            "failed experiments: {}",
            failed_data.join(", ")
        ))))
    } else if !failed_cert.is_empty() {
        Err(Failure::Certification(failed_cert.join(", ")))
    } else {
        Ok(())
    }
}
