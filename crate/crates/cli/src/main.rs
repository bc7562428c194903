use std::collections::BTreeMap;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use echotriage_core::dicom::{anonymize, parse_dicom_file, write_dicom};
use echotriage_core::phantom::{write_phantom_study, PhantomStudySpec};
use echotriage_core::pipeline::{
    discover_studies, is_clip_candidate, run_batch, ClassifierSpec, PipelineConfig, Store,
};
use echotriage_core::triage::{calibrate_cutoff, cohort_pairs, load_cohort, workload_savings, WorkloadParams};
use echotriage_core::view::classify_view;
use serde_json::json;
use tracing_subscriber::EnvFilter;

const SIDECAR_SUFFIX: &str = ".masks.rle";

#[derive(Parser)]
#[command(name = "echotriage", version, about = "Echocardiogram LVEF triage pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a directory of DICOM clips and write canonical copies grouped by study.
    Ingest {
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Replace patient-identifying attributes (see docs/anonymization.md).
        #[arg(long)]
        anonymize: bool,
    },
    /// Label clips with a view classifier; one JSON line per file.
    Classify {
        /// Files or directories of clips.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// hint | constant[:VIEW] | external:<program>
        #[arg(long, default_value = "hint")]
        backend: ClassifierSpec,
    },
    /// Choose the triage cutoff that maximises sensitivity subject to a precision floor.
    Calibrate {
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        precision_floor: f64,
    },
    /// Specialist hours saved per year by auto-triaging normal studies.
    Workload {
        #[arg(long, default_value_t = 10_000.0)]
        studies: f64,
        #[arg(long, default_value_t = 0.4)]
        prevalence: f64,
        #[arg(long, default_value_t = 0.3)]
        sensitivity: f64,
        #[arg(long, default_value_t = 9.0)]
        minutes: f64,
    },
    /// Render a synthetic prolate-spheroid study with ground truth.
    Phantom {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the pipeline over one study directory or a directory of studies.
    Run {
        dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `store_path` from the config.
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Serve a report store over HTTP for the review queue.
    Serve {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
    },
    /// Re-check every record checksum in a store.
    Verify {
        #[arg(long)]
        store: PathBuf,
    },
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Ingest { dir, out, anonymize } => ingest(&dir, &out, anonymize),
        Command::Classify { paths, backend } => classify(&paths, &backend),
        Command::Calibrate {
            cohort,
            precision_floor,
        } => {
            let entries = load_cohort(&cohort)?;
            let result = calibrate_cutoff(&cohort_pairs(&entries), precision_floor)?;
            println!("{}", serde_json::to_string_pretty(&result)?);
            if !result.feasible {
                eprintln!("no cutoff reaches precision {precision_floor}; reporting the most conservative one");
            }
            Ok(())
        }
        Command::Workload {
            studies,
            prevalence,
            sensitivity,
            minutes,
        } => {
            let hours = workload_savings(&WorkloadParams {
                studies_per_year: studies,
                normal_prevalence: prevalence,
                sensitivity,
                minutes_per_study: minutes,
            })?;
            println!("{hours}");
            Ok(())
        }
        Command::Phantom { spec, out } => {
            let text = std::fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let spec = PhantomStudySpec::from_toml(&text)?;
            for id in write_phantom_study(&spec, &out)? {
                println!("{}", out.join(format!("{id}.dcm")).display());
            }
            Ok(())
        }
        Command::Run { dir, config, store } => run(&dir, config.as_deref(), store),
        Command::Serve { store, port, bind } => {
            let rt = tokio::runtime::Runtime::new()?;
            eprintln!("serving {} on http://{}", store.display(), SocketAddr::new(bind, port));
            rt.block_on(echotriage_server::serve(store, SocketAddr::new(bind, port)))?;
            Ok(())
        }
        Command::Verify { store } => {
            let n = Store::open_existing(&store)?.verify()?;
            println!("{n} records ok");
            Ok(())
        }
    }
}

fn sorted_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let entry = entry?;
        if entry.file_type()?.is_file() && !entry.file_name().to_string_lossy().starts_with('.') {
            files.push(entry.path());
        }
    }
    files.sort();
    Ok(files)
}

/// Keeps identifiers usable as single path components.
fn file_stem_for(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "._-".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn ingest(dir: &Path, out: &Path, anonymize_phi: bool) -> Result<()> {
    let mut study_of_clip = BTreeMap::new();
    let mut sidecars = Vec::new();
    let mut failures = 0usize;
    for path in sorted_files(dir)? {
        let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        if name.ends_with(SIDECAR_SUFFIX) {
            sidecars.push((name, path));
            continue;
        }
        if !is_clip_candidate(&name) {
            continue;
        }
        let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        let (clip, file) = match parse_dicom_file(&bytes) {
            Ok(parsed) => parsed,
            Err(e) => {
                tracing::warn!(file = %path.display(), error = %e, "skipping");
                failures += 1;
                continue;
            }
        };
        let mut elements = file.elements();
        if anonymize_phi {
            elements = anonymize(&elements);
        }
        let study_dir = out.join(file_stem_for(clip.study_id()));
        std::fs::create_dir_all(&study_dir).with_context(|| format!("creating {}", study_dir.display()))?;
        let target = study_dir.join(format!("{}.dcm", file_stem_for(clip.clip_id())));
        std::fs::write(&target, write_dicom(&clip, &elements)?)
            .with_context(|| format!("writing {}", target.display()))?;
        study_of_clip.insert(clip.clip_id().to_string(), study_dir.clone());
        println!(
            "{}",
            json!({
                "file": name,
                "study_id": clip.study_id(),
                "clip_id": clip.clip_id(),
                "frames": clip.num_frames(),
                "calibrated": clip.is_calibrated(),
                "anonymized": anonymize_phi,
                "out": target,
            })
        );
    }
    // `<clip_id>.<chamber>.masks.rle` follows its clip
    for (name, path) in sidecars {
        let owner = study_of_clip.iter().find(|(clip_id, _)| {
            name.strip_prefix(clip_id.as_str())
                .is_some_and(|rest| rest.starts_with('.'))
        });
        match owner {
            Some((_, study_dir)) => {
                std::fs::copy(&path, study_dir.join(&name)).with_context(|| format!("copying {}", path.display()))?;
            }
            None => tracing::warn!(file = %name, "mask sidecar without a matching clip"),
        }
    }
    if study_of_clip.is_empty() {
        bail!("no parsable clip in {}", dir.display());
    }
    eprintln!("ingested {} clips ({failures} skipped)", study_of_clip.len());
    Ok(())
}

fn classify(paths: &[PathBuf], spec: &ClassifierSpec) -> Result<()> {
    let backend = spec.build()?;
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            files.extend(
                sorted_files(p)?
                    .into_iter()
                    .filter(|f| f.file_name().is_some_and(|n| is_clip_candidate(&n.to_string_lossy()))),
            );
        } else {
            files.push(p.clone());
        }
    }
    for path in files {
        let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        let line = match parse_dicom_file(&bytes) {
            Ok((clip, _)) => {
                let c = classify_view(&clip, backend.as_ref());
                json!({
                    "file": path,
                    "clip_id": clip.clip_id(),
                    "view": c.label.view,
                    "confidence": c.label.confidence,
                    "backend": c.backend,
                    "flags": c.flags,
                })
            }
            Err(e) => json!({ "file": path, "error": e.to_string() }),
        };
        println!("{line}");
    }
    Ok(())
}

fn run(dir: &Path, config: Option<&Path>, store_override: Option<PathBuf>) -> Result<()> {
    let mut cfg = match config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(path) = store_override {
        cfg.store_path = path;
    }
    let store = Store::open(&cfg.store_path)?;
    // thresholds set through the review interface apply to later runs
    if let Some(t) = store.thresholds()? {
        cfg.thresholds = t;
    }
    let dirs = discover_studies(dir)?;
    if dirs.is_empty() {
        bail!("no study directories under {}", dir.display());
    }
    let reports = run_batch(&dirs, &cfg, Some(&store))?;
    for r in &reports {
        let lvef = r
            .lvef
            .as_ref()
            .map(|l| format!("{:.1}", l.mean_lvef))
            .unwrap_or_else(|| "-".into());
        let flags: Vec<&str> = r.quality_flags.iter().map(String::as_str).collect();
        println!(
            "{}\t{}\t{}\t{}",
            r.study_id,
            r.triage.category.as_str(),
            lvef,
            flags.join(",")
        );
    }
    eprintln!(
        "{} studies stored in {} (config {})",
        reports.len(),
        cfg.store_path.display(),
        &cfg.fingerprint()[..12]
    );
    Ok(())
}
