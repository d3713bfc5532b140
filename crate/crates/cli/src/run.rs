use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use diglab::dynamics::{
    compare as compare_runs, for_each_seed, initial_params, mean_gap, run_experiment, train as train_run, Dataset,
    DynamicsError, ExperimentBundle, ExperimentKind, GanConfig, RunRecord, StuckArtifacts,
};
use diglab::ganreg::RegularizerKind;
use diglab::nn::snapshot;
use serde_json::json;

use crate::manifest::{hash_file, FileHash, Invocation, OutputDir, RunManifest};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Diverged,
}

/// Everything one invocation produced.
struct Produced {
    out: OutputDir,
    inputs: Vec<FileHash>,
    diverged: Vec<String>,
}

fn write_run(out: &mut OutputDir, dir: &str, run: &RunRecord) -> Result<(), CliError> {
    out.write(&format!("{dir}trajectory.csv"), &run.log().to_csv())?;
    out.write(&format!("{dir}gen.params"), &snapshot::to_text(&run.outcome.generator))?;
    out.write(&format!("{dir}disc.params"), &snapshot::to_text(&run.outcome.discriminator))?;
    Ok(())
}

fn last_tenth_gap(run: &RunRecord) -> f64 {
    let n = run.config.iterations;
    mean_gap(run.log(), n - n / 10, n).unwrap_or(f64::NAN)
}

fn finish(
    invocation: Invocation,
    config: &GanConfig,
    manifest_name: &str,
    produced: Produced,
    started: Instant,
) -> Result<Status, CliError> {
    let outputs = produced.out.sorted_files();
    let snapshot_hashes: BTreeMap<String, String> = outputs
        .iter()
        .filter(|f| f.path.ends_with(".params"))
        .map(|f| (f.path.clone(), f.sha256.clone()))
        .collect();
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        invocation,
        seed: config.seed,
        config: config.to_text(),
        inputs: produced.inputs,
        outputs,
        snapshot_hashes,
        diverged: produced.diverged.clone(),
        duration_secs: started.elapsed().as_secs_f64(),
    };
    let path = produced.out.root.join(manifest_name);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
    println!("wrote {} files and {}", manifest.outputs.len(), path.display());
    if produced.diverged.is_empty() {
        Ok(Status::Ok)
    } else {
        for d in &produced.diverged {
            eprintln!("diverged: {d}");
        }
        Ok(Status::Diverged)
    }
}

fn do_train(config: &GanConfig, root: &Path) -> Result<Produced, CliError> {
    let mut out = OutputDir::new(root)?;
    let dataset = Dataset::from_config(config)?;
    let (g0, d0) = initial_params(config)?;
    let outcome = train_run(config, &dataset, &g0, &d0)?;
    out.write("trajectory.csv", &outcome.log.to_csv())?;
    out.write("gen.params", &snapshot::to_text(&outcome.generator))?;
    out.write("disc.params", &snapshot::to_text(&outcome.discriminator))?;
    let diverged = outcome
        .log
        .diverged
        .iter()
        .map(|d| format!("train: iteration {}: {}", d.iteration, d.reason))
        .collect();
    Ok(Produced {
        out,
        inputs: Vec::new(),
        diverged,
    })
}

pub fn train(config: &GanConfig, root: &Path) -> Result<Status, CliError> {
    let started = Instant::now();
    let produced = do_train(config, root)?;
    finish(Invocation::Train, config, "manifest.json", produced, started)
}

fn seed_list(config: &GanConfig, n: u64) -> Result<Vec<u64>, CliError> {
    if n == 0 {
        return Err(CliError::Config("--seeds must be at least 1".into()));
    }
    Ok((config.seed..config.seed + n).collect())
}

fn kinds(which: &str) -> Result<Vec<ExperimentKind>, CliError> {
    if which == "all" {
        Ok(ExperimentKind::ALL.to_vec())
    } else {
        Ok(vec![which.parse().map_err(CliError::Config)?])
    }
}

fn load_stuck(root: &Path, seed: u64, config: &GanConfig) -> Result<(StuckArtifacts, Vec<FileHash>), CliError> {
    let dir = format!("seed_{seed}/stuck/vanilla/");
    let mut hashes = Vec::new();
    let mut read = |name: &str| -> Result<String, CliError> {
        let rel = format!("{dir}{name}");
        let path = root.join(&rel);
        let text = std::fs::read_to_string(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                CliError::Dependency(format!(
                    "missing {}; this experiment continues from a stuck run. \
                     Run `diglab experiment stuck --seed {seed} --out {}` first (same config)",
                    path.display(),
                    root.display()
                ))
            } else {
                CliError::io(&path, e)
            }
        })?;
        hashes.push(hash_file(root, &rel)?);
        Ok(text)
    };
    let g = read("gen.params")?;
    let d = read("disc.params")?;
    let generator = snapshot::from_text(&config.generator_config(), &g)
        .map_err(|e| CliError::Config(format!("{dir}gen.params: {e}")))?;
    let discriminator = snapshot::from_text(&config.discriminator_config(), &d)
        .map_err(|e| CliError::Config(format!("{dir}disc.params: {e}")))?;
    Ok((StuckArtifacts { generator, discriminator }, hashes))
}

fn summary_row(seed: u64, bundle: &ExperimentBundle, run: &RunRecord) -> String {
    let s = run.summary();
    let mut row = format!(
        "{seed},{},{},{},{},{},{},{}",
        bundle.kind.as_str(),
        run.tag,
        run.config.regularizer.as_str(),
        run.config.effective_lambda(),
        run.config.alpha,
        s.covered_modes,
        s.trapped_mode.map_or(String::new(), |m| m.to_string()),
    );
    for f in &s.final_fakes {
        let _ = write!(row, ",{f}");
    }
    let _ = write!(
        row,
        ",{},{},{}",
        s.final_gap,
        last_tenth_gap(run),
        s.diverged_at.map_or(String::new(), |d| d.to_string())
    );
    row
}

fn summary_header(config: &GanConfig, first: &str) -> String {
    let mut h = format!("seed,{first},regularizer,lambda,alpha,covered_modes,trapped_mode");
    for i in 0..config.fake_batch {
        let _ = write!(h, ",fake_{i}");
    }
    h + ",final_gap,mean_gap_last10pct,diverged_at\n"
}

fn bundle_json(bundle: &ExperimentBundle, status: &str) -> String {
    let runs: Vec<_> = bundle
        .runs
        .iter()
        .map(|r| {
            json!({
                "summary": r.summary(),
                "coverage": r.coverage,
                "divergence": r.log().diverged,
                "config": r.config.to_text(),
            })
        })
        .collect();
    let v = json!({
        "experiment": bundle.kind.as_str(),
        "seed": bundle.seed,
        "status": status,
        "start_trapped_mode": bundle.start_trapped_mode,
        "optimality": bundle.optimality,
        "runs": runs,
    });
    serde_json::to_string_pretty(&v).expect("bundle serializes") + "\n"
}

struct SeedResult {
    produced: Produced,
    rows: Vec<String>,
}

fn experiment_seed(base: &GanConfig, kinds: &[ExperimentKind], root: &Path) -> Result<SeedResult, CliError> {
    let seed = base.seed;
    let mut out = OutputDir::new(root)?;
    let mut inputs = Vec::new();
    let mut diverged = Vec::new();
    let mut rows = Vec::new();
    let mut stuck: Option<StuckArtifacts> = None;
    for &kind in kinds {
        let dir = format!("seed_{seed}/{}/", kind.as_str());
        if kind.needs_stuck() && stuck.is_none() {
            let (s, h) = load_stuck(root, seed, base)?;
            stuck = Some(s);
            inputs.extend(h);
        }
        let bundle = match run_experiment(kind, base, stuck.as_ref()) {
            Ok(b) => b,
            Err(DynamicsError::Precondition(m)) => {
                eprintln!("warning: seed {seed} {}: bundle rejected: {m}", kind.as_str());
                let rejected = ExperimentBundle {
                    kind,
                    seed,
                    runs: Vec::new(),
                    start_trapped_mode: None,
                    optimality: None,
                };
                out.write(&format!("{dir}bundle.json"), &bundle_json(&rejected, &format!("rejected: {m}")))?;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        for run in &bundle.runs {
            write_run(&mut out, &format!("{dir}{}/", run.tag), run)?;
            rows.push(summary_row(seed, &bundle, run));
            if let Some(d) = &run.log().diverged {
                diverged.push(format!("{dir}{}: iteration {}: {}", run.tag, d.iteration, d.reason));
            }
        }
        out.write(&format!("{dir}bundle.json"), &bundle_json(&bundle, "ok"))?;
        if kind == ExperimentKind::Stuck {
            stuck = bundle.stuck_artifacts();
        }
    }
    Ok(SeedResult {
        produced: Produced { out, inputs, diverged },
        rows,
    })
}

fn merge(root: &Path, results: Vec<Result<SeedResult, CliError>>) -> Result<(Produced, Vec<String>), CliError> {
    let mut all = Produced {
        out: OutputDir::new(root)?,
        inputs: Vec::new(),
        diverged: Vec::new(),
    };
    let mut rows = Vec::new();
    for r in results {
        let r = r?;
        all.out.merge(r.produced.out);
        all.inputs.extend(r.produced.inputs);
        all.diverged.extend(r.produced.diverged);
        rows.extend(r.rows);
    }
    Ok((all, rows))
}

fn do_experiment(config: &GanConfig, which: &str, seeds: &[u64], root: &Path) -> Result<Produced, CliError> {
    let kinds = kinds(which)?;
    let results = for_each_seed(seeds, |seed| {
        let base = GanConfig {
            seed,
            ..config.clone()
        };
        experiment_seed(&base, &kinds, root)
    });
    let (mut produced, rows) = merge(root, results)?;
    let name = if which == "all" {
        "summary.csv".to_string()
    } else {
        format!("summary-{which}.csv")
    };
    let mut csv = summary_header(config, "experiment,run");
    for r in rows {
        csv.push_str(&r);
        csv.push('\n');
    }
    produced.out.write(&name, &csv)?;
    Ok(produced)
}

pub fn experiment(config: &GanConfig, which: &str, n_seeds: u64, root: &Path) -> Result<Status, CliError> {
    let started = Instant::now();
    let seeds = seed_list(config, n_seeds)?;
    let produced = do_experiment(config, which, &seeds, root)?;
    let invocation = Invocation::Experiment {
        which: which.to_string(),
        seeds,
    };
    finish(invocation, config, &format!("manifest-{which}.json"), produced, started)
}

/// Parses a regularizer list, dropping repeats with a warning.
pub fn dedup_regularizers(list: &[String]) -> Result<Vec<RegularizerKind>, CliError> {
    let mut out: Vec<RegularizerKind> = Vec::new();
    for name in list {
        let kind: RegularizerKind = name.trim().parse().map_err(CliError::Config)?;
        if out.contains(&kind) {
            eprintln!("warning: regularizer `{}` listed more than once; running it once", kind.as_str());
        } else {
            out.push(kind);
        }
    }
    if out.is_empty() {
        return Err(CliError::Config("no regularizers given".into()));
    }
    Ok(out)
}

fn do_compare(config: &GanConfig, regs: &[RegularizerKind], seeds: &[u64], root: &Path) -> Result<Produced, CliError> {
    let results = for_each_seed(seeds, |seed| -> Result<SeedResult, CliError> {
        let base = GanConfig {
            seed,
            ..config.clone()
        };
        let mut out = OutputDir::new(root)?;
        let mut diverged = Vec::new();
        let mut rows = Vec::new();
        for run in compare_runs(&base, regs)? {
            let dir = format!("seed_{seed}/compare/{}/", run.tag);
            write_run(&mut out, &dir, &run)?;
            let s = run.summary();
            rows.push(format!(
                "{seed},{},{},{},{},{},{},{}",
                run.tag,
                run.config.effective_lambda(),
                run.config.alpha,
                s.covered_modes,
                run.coverage.all_covered(),
                last_tenth_gap(&run),
                s.diverged_at.is_some()
            ));
            if let Some(d) = &run.log().diverged {
                diverged.push(format!("{dir}: iteration {}: {}", d.iteration, d.reason));
            }
        }
        Ok(SeedResult {
            produced: Produced {
                out,
                inputs: Vec::new(),
                diverged,
            },
            rows,
        })
    });
    let (mut produced, rows) = merge(root, results)?;
    let mut csv = String::from("seed,regularizer,lambda,alpha,covered_modes,all_modes_covered,mean_gap_last10pct,diverged\n");
    for r in &rows {
        csv.push_str(r);
        csv.push('\n');
    }
    produced.out.write("compare.csv", &csv)?;

    println!("{:<10} {:>6} {:>14} {:>16} {:>9}", "regularizer", "seeds", "all-modes rate", "mean gap (last)", "diverged");
    for reg in regs {
        let mine: Vec<Vec<&str>> = rows
            .iter()
            .map(|r| r.split(',').collect::<Vec<_>>())
            .filter(|c| c[1] == reg.as_str())
            .collect();
        let n = mine.len() as f64;
        let covered = mine.iter().filter(|c| c[5] == "true").count() as f64;
        let gap = mine.iter().filter_map(|c| c[6].parse::<f64>().ok()).sum::<f64>() / n;
        let div = mine.iter().filter(|c| c[7] == "true").count();
        println!("{:<10} {:>6} {:>14.2} {:>16.3e} {:>9}", reg.as_str(), mine.len(), covered / n, gap, div);
    }
    Ok(produced)
}

pub fn compare(config: &GanConfig, regularizers: &[String], n_seeds: u64, root: &Path) -> Result<Status, CliError> {
    let started = Instant::now();
    let regs = dedup_regularizers(regularizers)?;
    let seeds = seed_list(config, n_seeds)?;
    let produced = do_compare(config, &regs, &seeds, root)?;
    let invocation = Invocation::Compare {
        regularizers: regs.iter().map(|r| r.as_str().to_string()).collect(),
        seeds,
    };
    finish(invocation, config, "manifest-compare.json", produced, started)
}

pub fn replay(manifest_path: &Path, out: Option<&Path>) -> Result<Status, CliError> {
    let manifest = RunManifest::read(manifest_path)?;
    let source = manifest_path.parent().unwrap_or(Path::new("."));
    let root: PathBuf = out.map_or_else(|| source.join("replay"), Path::to_path_buf);
    let config = GanConfig::from_text(&manifest.config)?;
    config.validate()?;

    for input in &manifest.inputs {
        let found = hash_file(source, &input.path)?;
        if found.sha256 != input.sha256 {
            return Err(CliError::Mismatch(format!("input {} changed since the run", input.path)));
        }
        let dest = root.join(&input.path);
        if let Some(parent) = dest.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        std::fs::copy(source.join(&input.path), &dest).map_err(|e| CliError::io(&dest, e))?;
    }

    let produced = match &manifest.invocation {
        Invocation::Train => do_train(&config, &root)?,
        Invocation::Experiment { which, seeds } => do_experiment(&config, which, seeds, &root)?,
        Invocation::Compare { regularizers, seeds } => {
            do_compare(&config, &dedup_regularizers(regularizers)?, seeds, &root)?
        }
    };
    let fresh: BTreeMap<String, String> = produced
        .out
        .sorted_files()
        .into_iter()
        .map(|f| (f.path, f.sha256))
        .collect();
    let mut mismatched = Vec::new();
    for f in &manifest.outputs {
        match fresh.get(&f.path) {
            Some(h) if *h == f.sha256 => {}
            Some(_) => mismatched.push(format!("{} differs", f.path)),
            None => mismatched.push(format!("{} not produced", f.path)),
        }
    }
    if fresh.len() != manifest.outputs.len() {
        mismatched.push(format!(
            "replay produced {} files, manifest lists {}",
            fresh.len(),
            manifest.outputs.len()
        ));
    }
    if !mismatched.is_empty() {
        return Err(CliError::Mismatch(mismatched.join("; ")));
    }
    println!(
        "replayed {} outputs into {}: all identical",
        manifest.outputs.len(),
        root.display()
    );
    Ok(Status::Ok)
}
