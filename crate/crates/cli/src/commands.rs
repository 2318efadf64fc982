use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use vidsme::attacks::{read_scores_csv, spec_grid, write_scores_csv, AttackSpec, Method, ScoreRecord};
use vidsme::dumpio::{load_manifest, write_manifest, SampleManifest};
use vidsme::evalkit::{evaluate_records, write_report_json, write_roc_csv, Evaluation, DEFAULT_FPR_CAP};
use vidsme::pipeline::{compute_dataset_stats, score_manifest, ScoreOptions, StatsOptions};
use vidsme::synthbench::{write_synth_dataset, SynthProfile};
use vidsme::videostats::{
    corrupt_frames, load_all_frames, save_frames, CorruptionKind, DatasetStatsIndex, Severity,
};

use crate::config::{self, Settings};
use crate::{AttackOpts, Cli, Command, CorruptArgs, EvalArgs, PipelineArgs, ScoreArgs, StatsArgs, StatsOpts, SynthArgs, UsageError};

pub fn run(cli: Cli) -> Result<()> {
    let settings = match &cli.config {
        Some(path) => config::load(path, cli.command.name())?,
        None => Settings::default(),
    };
    configure_threads(cli.threads.or(settings.threads))?;
    match cli.command {
        Command::Stats(args) => stats(args, settings),
        Command::Score(args) => score(args, settings),
        Command::Eval(args) => eval(args, settings),
        Command::Pipeline(args) => pipeline(args, settings),
        Command::Synth(args) => synth(args, settings),
        Command::Corrupt(args) => corrupt(args, settings),
    }
}

fn configure_threads(threads: Option<usize>) -> Result<()> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(UsageError("--threads must be at least 1".into()).into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the worker pool")
}

fn required<T>(name: &str, value: Option<T>) -> Result<T> {
    value.ok_or_else(|| UsageError(format!("--{name} is required (flag or config key `{}`)", name.replace('-', "_"))).into())
}

/// Flag values when given, otherwise the config list, otherwise empty.
fn list<T: Clone>(flag: Vec<T>, config: &Option<Vec<T>>) -> Vec<T> {
    if flag.is_empty() {
        config.clone().unwrap_or_default()
    } else {
        flag
    }
}

/// `dir/report.json` + `.scores.csv` → `dir/report.scores.csv`.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}{suffix}"))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
        }
        _ => Ok(()),
    }
}

fn stats_options(opts: &StatsOpts, s: &Settings) -> Result<StatsOptions> {
    let defaults = StatsOptions::default();
    let frames = opts.frames.or(s.frames).unwrap_or(defaults.frames);
    if frames == 0 {
        return Err(UsageError("--frames must be at least 1".into()).into());
    }
    Ok(StatsOptions {
        frames,
        beta1: opts.beta1.or(s.beta1).unwrap_or(defaults.beta1),
        beta2: opts.beta2.or(s.beta2).unwrap_or(defaults.beta2),
    })
}

fn parse_alpha(text: &str) -> Result<f64> {
    match text.trim() {
        "inf" | "∞" => Ok(f64::INFINITY),
        t => t.parse().map_err(|_| UsageError(format!("invalid alpha {t:?}")).into()),
    }
}

fn score_options(opts: &AttackOpts, s: &Settings) -> Result<ScoreOptions> {
    let names = list(opts.method.clone(), &s.method);
    let methods = if names.is_empty() {
        Method::ALL.to_vec()
    } else {
        names
            .iter()
            .map(|n| n.parse::<Method>().map_err(|e| UsageError(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?
    };
    let ks = list(opts.k.clone(), &s.k);
    let alpha_text = if opts.alpha.is_empty() {
        s.alpha.iter().flatten().map(|a| a.to_text()).collect()
    } else {
        opts.alpha.clone()
    };
    let alphas = alpha_text.iter().map(|a| parse_alpha(a)).collect::<Result<Vec<_>>>()?;
    let specs: Vec<AttackSpec> = spec_grid(&methods, &ks, &alphas).map_err(|e| UsageError(e.to_string()))?;
    Ok(ScoreOptions {
        specs,
        full_span: opts.full_span || s.full_span.unwrap_or(false),
    })
}

fn fpr_caps(flag: Vec<f64>, s: &Settings) -> Result<Vec<f64>> {
    let caps = list(flag, &s.fpr_cap);
    let caps = if caps.is_empty() { vec![DEFAULT_FPR_CAP] } else { caps };
    if let Some(bad) = caps.iter().find(|c| !(**c > 0.0 && **c < 1.0)) {
        return Err(UsageError(format!("--fpr-cap must lie in (0, 1), got {bad}")).into());
    }
    Ok(caps)
}

fn load_records(manifest: &Path) -> Result<Vec<SampleManifest>> {
    Ok(load_manifest(manifest)?)
}

fn write_stats(index: &DatasetStatsIndex, out: &Path) -> Result<()> {
    ensure_parent(out)?;
    Ok(index.write_json(out)?)
}

fn write_scores(records: &[ScoreRecord], out: &Path) -> Result<()> {
    ensure_parent(out)?;
    Ok(write_scores_csv(out, records)?)
}

fn write_evaluations(evals: &[Evaluation], out: &Path, roc: &Path) -> Result<()> {
    ensure_parent(out)?;
    ensure_parent(roc)?;
    write_report_json(out, evals)?;
    write_roc_csv(roc, evals)?;
    Ok(())
}

/// One line per attack on stdout.
fn print_summary(evals: &[Evaluation], caps: &[f64]) {
    let mut header = format!("{:<18} {:<18} {:>7} {:>7}", "method", "variant", "auc", "acc");
    for c in caps {
        header.push_str(&format!(" {:>9}", format!("tpr@{c}")));
    }
    println!("{header}");
    for e in evals {
        let r = &e.report;
        let mut line = format!("{:<18} {:<18} {:>7.4} {:>7.4}", r.method, r.variant, r.auc, r.best_accuracy);
        for &c in caps {
            line.push_str(&format!(" {:>9.4}", r.tpr_at(c).unwrap_or(f64::NAN)));
        }
        println!("{line}");
    }
}

fn stats(args: StatsArgs, s: Settings) -> Result<()> {
    let manifest = required("manifest", args.manifest.or(s.manifest.clone()))?;
    let out = required("out", args.out.or(s.out.clone()))?;
    let opts = stats_options(&args.stats, &s)?;
    let index = compute_dataset_stats(&load_records(&manifest)?, &opts)?;
    write_stats(&index, &out)?;
    eprintln!("wrote statistics of {} videos to {}", index.len(), out.display());
    Ok(())
}

fn score(args: ScoreArgs, s: Settings) -> Result<()> {
    let manifest = required("manifest", args.manifest.or(s.manifest.clone()))?;
    let out = required("out", args.out.or(s.out.clone()))?;
    let opts = score_options(&args.attacks, &s)?;
    let stats = match args.stats.or(s.stats.clone()) {
        Some(path) => Some(DatasetStatsIndex::read_json(&path)?),
        None => None,
    };
    let records = score_manifest(&load_records(&manifest)?, stats.as_ref(), &opts)?;
    write_scores(&records, &out)?;
    eprintln!("wrote {} scores to {}", records.len(), out.display());
    Ok(())
}

fn eval(args: EvalArgs, s: Settings) -> Result<()> {
    let scores = required("scores", args.scores.or(s.scores.clone()))?;
    let out = required("out", args.out.or(s.out.clone()))?;
    let roc = args.roc.or(s.roc.clone()).unwrap_or_else(|| sibling(&out, ".roc.csv"));
    let caps = fpr_caps(args.fpr_cap, &s)?;
    let evals = evaluate_records(&read_scores_csv(&scores)?, &caps)?;
    write_evaluations(&evals, &out, &roc)?;
    print_summary(&evals, &caps);
    Ok(())
}

fn pipeline(args: PipelineArgs, s: Settings) -> Result<()> {
    let manifest = required("manifest", args.manifest.or(s.manifest.clone()))?;
    let out = required("out", args.out.or(s.out.clone()))?;
    let stats_out = args.stats_out.or(s.stats_out.clone()).unwrap_or_else(|| sibling(&out, ".stats.json"));
    let scores_out = args.scores_out.or(s.scores_out.clone()).unwrap_or_else(|| sibling(&out, ".scores.csv"));
    let roc = args.roc.or(s.roc.clone()).unwrap_or_else(|| sibling(&out, ".roc.csv"));
    let stats_opts = stats_options(&args.stats, &s)?;
    let score_opts = score_options(&args.attacks, &s)?;
    let caps = fpr_caps(args.fpr_cap, &s)?;

    let records = load_records(&manifest)?;
    let index = compute_dataset_stats(&records, &stats_opts)?;
    write_stats(&index, &stats_out)?;
    let scores = score_manifest(&records, Some(&index), &score_opts)?;
    write_scores(&scores, &scores_out)?;
    let evals = evaluate_records(&scores, &caps)?;
    write_evaluations(&evals, &out, &roc)?;
    print_summary(&evals, &caps);
    Ok(())
}

fn synth(args: SynthArgs, s: Settings) -> Result<()> {
    let out = required("out", args.out.or(s.out.clone()))?;
    let mut profile = match args.profile.or(s.profile.clone()) {
        Some(path) => {
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str::<SynthProfile>(&text)
                .map_err(|e| UsageError(format!("profile {}: {e}", path.display())))?
        }
        None => SynthProfile::default(),
    };
    if let Some(seed) = args.seed.or(s.seed) {
        profile.seed = seed;
    }
    if args.null || s.null.unwrap_or(false) {
        profile = profile.null();
    }
    profile.validate().map_err(|e| UsageError(e.to_string()))?;
    let manifest = write_synth_dataset(&profile, &out)?;
    eprintln!("wrote {} samples; manifest {}", profile.n_samples, manifest.display());
    Ok(())
}

fn corrupt(args: CorruptArgs, s: Settings) -> Result<()> {
    let out = required("out", args.out.or(s.out.clone()))?;
    let kind: CorruptionKind = required("kind", args.kind.or(s.kind.clone()))?
        .parse()
        .map_err(|e: vidsme::Error| UsageError(e.to_string()))?;
    let level: Severity = required("level", args.level.or(s.level.clone()))?
        .parse()
        .map_err(|e: vidsme::Error| UsageError(e.to_string()))?;
    let seed = args.seed.or(s.seed).unwrap_or(0);
    let frames_dir = args.frames_dir.or(s.frames_dir.clone());
    let manifest = args.manifest.or(s.manifest.clone());
    match (frames_dir, manifest) {
        (Some(dir), None) => {
            let frames = corrupt_frames(&load_all_frames(&dir)?, kind, level, seed)?;
            save_frames(&frames, &out)?;
            eprintln!("wrote {} {kind} ({level}) frames to {}", frames.len(), out.display());
            Ok(())
        }
        (None, Some(manifest)) => corrupt_manifest(&manifest, &out, kind, level, seed),
        _ => Err(UsageError("give exactly one of --frames-dir and --manifest".into()).into()),
    }
}

/// Corrupted copies of every record's frames under `out/frames/<id>` and a
/// manifest at `out/manifest.jsonl` pointing at them and the original dumps.
/// Video `i` of the manifest is corrupted with seed `seed + i`.
fn corrupt_manifest(manifest: &Path, out: &Path, kind: CorruptionKind, level: Severity, seed: u64) -> Result<()> {
    let records = load_records(manifest)?;
    let written = records
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let dir = r
                .frames_dir
                .as_ref()
                .ok_or_else(|| vidsme::Error::InvalidInput("manifest record has no frames_dir".into()))
                .map_err(|e| e.for_sample(&r.sample_id))?;
            let rel = PathBuf::from("frames").join(&r.sample_id);
            load_all_frames(dir)
                .and_then(|f| corrupt_frames(&f, kind, level, seed.wrapping_add(i as u64)))
                .and_then(|f| save_frames(&f, &out.join(&rel)))
                .map_err(|e| e.for_sample(&r.sample_id))?;
            let dump_dir = std::path::absolute(&r.dump_dir).context("resolving dump path")?;
            Ok(SampleManifest {
                frames_dir: Some(rel),
                dump_dir,
                ..r.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let path = out.join(vidsme::synthbench::MANIFEST_FILE);
    write_manifest(&path, &written)?;
    eprintln!("wrote {} {kind} ({level}) videos; manifest {}", written.len(), path.display());
    Ok(())
}
