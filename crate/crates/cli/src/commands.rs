//! The four subcommands: staged toy runs, inverse-limit runs, artifact
//! verification, and sampling.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use num_rational::BigRational;
use num_traits::One;
use serde_json::json;

use invforge_core::classes::metric::{metric_to_structure, rat, RationalMetricSpace};
use invforge_core::classes::AmalgamationClass;
use invforge_core::limit::{
    eta_report, materialize_stage, sample_invariant, verify_suite, LimitEngine,
};
use invforge_core::report::{CsvRow, Quantity, Report};
use invforge_core::schedule::CyclicSchedule;
use invforge_core::structure::{complete_graph, FinStructure};
use invforge_core::toy::lazy::LazyToy;
use invforge_core::toy::reports::{delta_report, gamma_report, sample_gng};
use invforge_core::toy::{ToyConfig, ToyRun};

use crate::diagnose::diagnose;
use crate::manifest::{write_atomic, OutDir, RunConfig};
use crate::RunArgs;

/// Read a structure from its canonical JSON file.
pub fn read_structure(path: &Path) -> Result<FinStructure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .with_context(|| format!("parsing {} as JSON", path.display()))?;
    FinStructure::from_json(&value).with_context(|| format!("decoding {}", path.display()))
}

/// Write a structure in canonical form: sorted tuples, stable field order.
pub fn write_structure(s: &FinStructure, path: &Path) -> Result<()> {
    let body = serde_json::to_string_pretty(&s.to_json())?;
    write_atomic(path, body.as_bytes())
}

fn validate_common(args: &RunArgs, command: &str) -> Result<(AmalgamationClass, RunConfig)> {
    let class = AmalgamationClass::from_name(&args.class).map_err(|e| anyhow!("{e}"))?;
    if args.stages < 1 {
        bail!("--stages must be at least 1");
    }
    if args.trials < 1 {
        bail!("--trials must be at least 1");
    }
    if !matches!(args.format.as_str(), "csv" | "json") {
        bail!("--format must be csv or json");
    }
    let depth = args.depth.unwrap_or(args.stages);
    if depth > args.stages {
        bail!("--depth {depth} exceeds --stages {}", args.stages);
    }
    let config = RunConfig {
        command: command.to_string(),
        class: class.name(),
        stages: args.stages,
        depth,
        samples: args.samples,
        trials: args.trials,
        seed: args.seed,
        out_dir: args.out.display().to_string(),
        format: args.format.clone(),
        element_cap: args.element_cap,
    };
    Ok((class, config))
}

fn report_artifact(report: &Report, format: &str) -> Result<(&'static str, Vec<u8>)> {
    Ok(if format == "json" {
        ("report.json", serde_json::to_vec_pretty(report)?)
    } else {
        ("report.csv", report.to_csv().into_bytes())
    })
}

/// Seed structure for staged runs: a single edge for the graph-like
/// classes, a two-point space at distance 1 for the metric class.
fn toy_seed(class: &AmalgamationClass) -> Result<FinStructure> {
    Ok(match class {
        AmalgamationClass::Metric { thresholds } => {
            let space = RationalMetricSpace::new(2, [((0, 1), rat(1, 1))].into_iter().collect())
                .map_err(|e| anyhow!("{e}"))?;
            metric_to_structure(&space, thresholds)
        }
        _ => complete_graph(2),
    })
}

pub fn cmd_toy(args: &RunArgs) -> Result<usize> {
    let started = Instant::now();
    let (class, config) = validate_common(args, "toy")?;
    let schedule = CyclicSchedule::default_catalog();
    let run_id = format!("toy-{}-s{}-seed{}", config.class, config.stages, config.seed);
    let mut out = OutDir::create(&args.out)?;
    let mut report = Report::new();
    report.note("run_id", &run_id);
    report.note("schedule", "cyclic-14-template-catalog");

    // materialize the early stages for the structure artifact and the
    // membership rows; plain graphs also get the lazy engine for the
    // delta/gamma estimates at full depth
    let materialize_to = if matches!(class, AmalgamationClass::Graphs) {
        config.stages.min(3)
    } else {
        config.stages
    };
    let mut toy_config = ToyConfig::new(class.clone(), schedule.clone());
    toy_config.element_cap = args.element_cap;
    let mut run = ToyRun::new(toy_seed(&class)?, toy_config)?;
    run.run_to(materialize_to)?;
    for stage in &run.stages {
        let ok = class.contains(&stage.structure)?;
        report.push(CsvRow {
            run_id: run_id.clone(),
            n: stage.n as u64,
            quantity: Quantity::AsModel,
            type_id: "in_class".to_string(),
            estimate: if ok { 1.0 } else { 0.0 },
            sigma: 0.0,
            bound: 1.0,
            pass: ok,
        });
    }
    let last = run.stage(run.current_stage());
    out.write(
        &format!("stage_{}.json", last.n),
        serde_json::to_string_pretty(&last.structure.to_json())?.as_bytes(),
    )?;

    if matches!(class, AmalgamationClass::Graphs) {
        let lazy = LazyToy::new(&complete_graph(2), schedule.clone(), config.stages)?;
        let (delta, gamma) = rayon::join(
            || delta_report(&lazy, 3, config.stages, config.trials, config.seed, &run_id),
            || {
                gamma_report(
                    &lazy,
                    &schedule,
                    &[config.stages],
                    6,
                    config.trials,
                    config.seed,
                    &run_id,
                )
            },
        );
        report.extend(delta);
        report.extend(gamma);
    } else {
        report.note(
            "delta_gamma",
            "tuple-type estimates apply to plain graph runs only",
        );
    }

    let (name, body) = report_artifact(&report, &config.format)?;
    out.write(name, &body)?;
    let failures = report.rows.iter().filter(|r| !r.pass).count();
    out.finish(
        config,
        started.elapsed().as_secs_f64(),
        report.rows.len(),
        failures,
    )?;
    Ok(failures)
}

pub fn cmd_limit(args: &RunArgs) -> Result<usize> {
    let started = Instant::now();
    let (class, config) = validate_common(args, "limit")?;
    if config.stages < 2 {
        bail!("inverse-limit runs need --stages at least 2");
    }
    if config.depth < 2 {
        bail!("--depth must be at least 2");
    }
    let schedule = CyclicSchedule::default_catalog();
    let run_id = format!(
        "limit-{}-s{}-seed{}",
        config.class, config.stages, config.seed
    );
    let engine = LimitEngine::build(class.clone(), schedule, config.stages)?;
    let mut out = OutDir::create(&args.out)?;
    let mut report = Report::new();
    report.note("run_id", &run_id);

    let wants_eta = class.declared_splitting_order().is_some() && config.depth >= 3;
    let (verified, eta) = rayon::join(
        || verify_suite(&engine, &run_id, config.seed),
        || {
            wants_eta.then(|| {
                eta_report(&engine, config.depth, config.trials, &run_id, config.seed)
            })
        },
    );
    report.extend(verified?);
    match eta {
        Some(r) => report.extend(r?),
        None => report.note(
            "eta",
            "refined-pair decay applies to splitting classes at depth 3 or more",
        ),
    }
    let unassigned = BigRational::one() - &engine.stage(config.depth).total_mass;
    report.note("unassigned_mass", unassigned.to_string());

    out.write(
        "gen_log.jsonl",
        (engine.gen_log().join("\n") + "\n").as_bytes(),
    )?;
    for n in (2..=config.stages.min(3)).rev() {
        match materialize_stage(&engine, n, args.element_cap) {
            Ok(stage) => {
                out.write(
                    &format!("stage_{n}.json"),
                    serde_json::to_string_pretty(&stage.structure.to_json())?.as_bytes(),
                )?;
                break;
            }
            Err(invforge_core::Error::StageBudgetExceeded(_)) if n > 2 => continue,
            Err(e) => return Err(e.into()),
        }
    }
    if config.samples > 0 {
        let sampled = sample_invariant(&engine, config.depth, config.samples, config.seed)?;
        let body = json!({
            "structure": sampled.structure.to_json(),
            "addresses": sampled.addresses.iter().map(|a| a.to_string()).collect::<Vec<_>>(),
            "collision": sampled.collision_flag,
        });
        out.write("sample.json", serde_json::to_string_pretty(&body)?.as_bytes())?;
    }

    let (name, body) = report_artifact(&report, &config.format)?;
    out.write(name, &body)?;
    let failures = report.rows.iter().filter(|r| !r.pass).count();
    out.finish(
        config,
        started.elapsed().as_secs_f64(),
        report.rows.len(),
        failures,
    )?;
    Ok(failures)
}

pub fn cmd_sample(args: &RunArgs, from: Option<&Path>) -> Result<usize> {
    let started = Instant::now();
    let (class, mut config) = validate_common(args, "sample")?;
    if config.samples < 1 {
        bail!("--samples must be at least 1");
    }
    let mut out = OutDir::create(&args.out)?;
    let body = if let Some(path) = from {
        // i.i.d. vertex sampling with replacement from a stored finite graph
        let source = read_structure(path)?;
        config.class = format!("file:{}", path.display());
        let sampled = sample_gng(&source, config.samples, config.seed)?;
        json!({ "structure": sampled.to_json() })
    } else {
        if config.stages < 2 {
            bail!("sampling from a staged run needs --stages at least 2");
        }
        let engine =
            LimitEngine::build(class, CyclicSchedule::default_catalog(), config.stages)?;
        let sampled = sample_invariant(&engine, config.depth, config.samples, config.seed)?;
        json!({
            "structure": sampled.structure.to_json(),
            "addresses": sampled.addresses.iter().map(|a| a.to_string()).collect::<Vec<_>>(),
            "collision": sampled.collision_flag,
        })
    };
    out.write("sample.json", serde_json::to_string_pretty(&body)?.as_bytes())?;
    out.finish(config, started.elapsed().as_secs_f64(), 0, 0)?;
    Ok(0)
}

pub fn cmd_verify(class_name: &str, files: &[PathBuf], out: Option<&Path>) -> Result<usize> {
    let class = AmalgamationClass::from_name(class_name).map_err(|e| anyhow!("{e}"))?;
    let mut report = Report::new();
    report.note("class", class.name());
    for path in files {
        let s = read_structure(path)?;
        let fname = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let verdict = diagnose(&class, &s)?;
        let type_id = match &verdict {
            None => fname,
            Some(reason) => format!("{fname}: {reason}"),
        };
        report.push(CsvRow {
            run_id: "verify".to_string(),
            n: s.size() as u64,
            quantity: Quantity::AsModel,
            type_id,
            estimate: if verdict.is_none() { 1.0 } else { 0.0 },
            sigma: 0.0,
            bound: 1.0,
            pass: verdict.is_none(),
        });
    }
    print!("{}", report.to_csv());
    if let Some(path) = out {
        write_atomic(path, report.to_csv().as_bytes())?;
    }
    Ok(report.rows.iter().filter(|r| !r.pass).count())
}
