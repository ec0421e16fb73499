use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use gaze_core::cascade::{parse_cascade, CascadeModel, FaceEyeDetector, LandmarkParams};
use gaze_core::cnn::{load_weights, reference_spec, save_weights, train, NetworkState, TrainConfig};
use gaze_core::composer::{compose_pair, quality_gate, GateOutcome};
use gaze_core::dataset::{
    kfold_split, load_manifest, save_manifest, synth_generate, Label, LabeledSet, Manifest, Sample, Source, SynthParams,
    MANIFEST_FILE,
};
use gaze_core::evaluate::{evaluate, percent, run_kfold};
use gaze_core::imaging::{write_pgm, PnmFrames};
use gaze_core::session::{benchmark, benchmark_pipeline, classify_stream, summarize};

use crate::config::Config;
use crate::error::CliError;
use crate::{Cli, Command, DatasetCommand};

pub fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Detect { cascades, input } => detect(&file.overlay(cascades.config()), &input),
        Command::Dataset(d) => dataset(file, d),
        Command::Train { data, val_data, train, out, log } => {
            let cfg = file.overlay(data.config()).overlay(train.config()).overlay(Config { val_data, ..Config::default() });
            cmd_train(&cfg, &out, log.as_deref())
        }
        Command::Eval { data, weights } => cmd_eval(&file.overlay(data.config()).overlay(Config { weights, ..Config::default() })),
        Command::Kfold { data, k, train } => {
            cmd_kfold(&file.overlay(data.config()).overlay(train.config()).overlay(Config { k, ..Config::default() }))
        }
        Command::Infer { cascades, weights, classes, sampler, records, text, input } => {
            let cfg = file
                .overlay(cascades.config())
                .overlay(sampler.config())
                .overlay(Config { weights, classes, ..Config::default() });
            cmd_infer(&cfg, &input, records.as_deref(), text)
        }
        Command::Bench { weights, classes, repetitions, frame, cascades } => {
            let cfg = file.overlay(cascades.config()).overlay(Config { weights, classes, ..Config::default() });
            cmd_bench(&cfg, repetitions, frame.as_deref())
        }
    }
}

fn print_json<T: Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable output"));
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn open_input(path: &Path) -> Result<Box<dyn Read>, CliError> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(io::stdin().lock()));
    }
    Ok(Box::new(File::open(path).map_err(|e| CliError::io(path, e))?))
}

fn load_cascade(path: &Path) -> Result<CascadeModel, CliError> {
    let xml = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_cascade(&xml).map_err(|e| CliError::from(e).context(path.display()))
}

fn detector(cfg: &Config) -> Result<FaceEyeDetector, CliError> {
    let face = load_cascade(cfg.require(&cfg.face_cascade, "face_cascade")?)?;
    let eyes = load_cascade(cfg.require(&cfg.eye_cascade, "eye_cascade")?)?;
    Ok(FaceEyeDetector::new(face, eyes, LandmarkParams::default())?)
}

/// The dataset at `cfg.data`, reduced to classes 0 and 1 in 2-class mode.
fn load_set(cfg: &Config, classes: usize) -> Result<LabeledSet, CliError> {
    load_set_at(cfg.require(&cfg.data, "data")?, classes)
}

fn load_set_at(path: &Path, classes: usize) -> Result<LabeledSet, CliError> {
    let set = LabeledSet::load_path(path)?;
    if classes == 2 {
        let (two, warning) = set.filter_classes(&[Label::RIGHT, Label::LEFT]);
        if let Some(w) = warning {
            eprintln!("gaze: {w}");
        }
        return Ok(two);
    }
    Ok(set)
}

fn load_state(cfg: &Config, classes: usize) -> Result<NetworkState<f32>, CliError> {
    let path = cfg.require(&cfg.weights, "weights")?;
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    load_weights(&bytes, &reference_spec(classes)?).map_err(|e| CliError::from(e).context(path.display()))
}

fn detect(cfg: &Config, input: &Path) -> Result<(), CliError> {
    let det = detector(cfg)?;
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    for (i, frame) in PnmFrames::new(open_input(input)?).enumerate() {
        let frame = frame.map_err(|e| CliError::from(e).context(format!("frame {i}")))?;
        let line = match det.detect(&frame.into_gray())? {
            Ok(lm) => lm.to_line(),
            Err(reason) => format!("REJECT {reason}"),
        };
        writeln!(out, "{line}").map_err(|e| CliError::input(e.to_string()))?;
    }
    Ok(())
}

fn dataset(file: Config, cmd: DatasetCommand) -> Result<(), CliError> {
    match cmd {
        DatasetCommand::Compose { cascades, sampler, label, person, source, scene0, scene1, out, input } => {
            let cfg = file.overlay(cascades.config()).overlay(sampler.config());
            let label = Label::new(label)?;
            let source: Source = source.parse().map_err(CliError::input)?;
            compose(&cfg, label, &person, source, (&scene0, &scene1), &out, &input)
        }
        DatasetCommand::Augment { data, out } => {
            let cfg = file.overlay(Config { data: data.data, ..Config::default() });
            let set = load_set(&cfg, 3)?.augmented()?;
            set.save(&out)?;
            let [c0, c1, c2] = set.manifest().class_counts();
            println!("{} images ({c0} class 0, {c1} class 1, {c2} class 2)", set.len());
            Ok(())
        }
        DatasetCommand::Synth { seed, n, persons, mix, easy, out } => {
            let parts: Vec<f64> = mix
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| CliError::input(format!("--mix {mix:?}: expected three comma-separated fractions")))?;
            let class_mix: [f64; 3] =
                parts.try_into().map_err(|_| CliError::input(format!("--mix {mix:?}: expected three fractions")))?;
            let mut params = SynthParams::new(n, class_mix, persons);
            if easy {
                params = params.easy();
            }
            let set = synth_generate(seed, &params)?;
            let path = set.save(&out)?;
            let [c0, c1, c2] = set.manifest().class_counts();
            println!("{} images ({c0} class 0, {c1} class 1, {c2} class 2) -> {}", set.len(), path.display());
            Ok(())
        }
        DatasetCommand::Split { data, k, seed, out } => {
            let cfg = file.overlay(Config { data: data.data, seed, ..Config::default() });
            let path = cfg.require(&cfg.data, "data")?;
            let mfile = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
            let text = fs::read_to_string(&mfile).map_err(|e| CliError::io(&mfile, e))?;
            let m = load_manifest(&text).map_err(|e| CliError::from(e).context(mfile.display()))?;
            let seed = cfg.seed.unwrap_or(0);
            let plan = kfold_split(&m, k, seed)?;
            write_file(&out, plan.to_tsv().as_bytes())?;
            print_json(&json!({ "k": k, "seed": seed, "fold_sizes": plan.fold_sizes(&m), "plan": out }));
            Ok(())
        }
    }
}

fn compose(
    cfg: &Config,
    label: Label,
    person: &str,
    source: Source,
    scenes: (&str, &str),
    out: &Path,
    input: &Path,
) -> Result<(), CliError> {
    let det = detector(cfg)?;
    let sampler = cfg.sampler()?;
    let mpath = out.join(MANIFEST_FILE);
    let mut manifest = if mpath.exists() {
        let text = fs::read_to_string(&mpath).map_err(|e| CliError::io(&mpath, e))?;
        load_manifest(&text).map_err(|e| CliError::from(e).context(mpath.display()))?
    } else {
        let name = out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".into());
        Manifest::with_scenes(&name, scenes.0, scenes.1)
    };
    let (mut sampled, mut accepted) = (0usize, 0usize);
    let mut rejected = std::collections::BTreeMap::<String, usize>::new();
    for (i, frame) in PnmFrames::new(open_input(input)?).enumerate() {
        let frame = frame.map_err(|e| CliError::from(e).context(format!("frame {i}")))?;
        if !sampler.keeps(i) {
            continue;
        }
        sampled += 1;
        let gray = frame.into_gray();
        match quality_gate(&det.detect(&gray)?) {
            GateOutcome::Reject(r) => *rejected.entry(r.to_string()).or_default() += 1,
            GateOutcome::Accept(lm) => {
                let pair = compose_pair(&gray, &lm, i.to_string(), person).map_err(|e| CliError::input(e.to_string()))?;
                let name = format!("{person}_{i:05}_{}.pgm", label.value());
                write_file(&out.join(&name), &write_pgm(pair.image()))?;
                manifest.push(Sample {
                    image_path: name,
                    label,
                    person_id: person.to_string(),
                    source,
                    augmented_from: None,
                })?;
                accepted += 1;
            }
        }
    }
    write_file(&mpath, save_manifest(&manifest).as_bytes())?;
    print_json(&json!({ "sampled": sampled, "accepted": accepted, "rejected": rejected, "manifest": mpath }));
    Ok(())
}

fn cmd_train(cfg: &Config, out: &Path, log: Option<&Path>) -> Result<(), CliError> {
    let classes = cfg.classes()?;
    let config = cfg.train_config()?;
    let set = load_set(cfg, classes)?;
    let val = cfg.val_data.as_deref().map(|p| load_set_at(p, classes)).transpose()?;
    let (state, report) = train(&reference_spec(classes)?, &set, val.as_ref(), &config)?;
    write_file(out, &save_weights(&state))?;
    if let Some(log) = log {
        write_file(log, report.to_json_lines().as_bytes())?;
    }
    eprintln!("gaze: trained in {:.1} s", report.wall_clock_secs);
    print_json(&json!({
        "classes": classes,
        "train_size": set.len(),
        "val_size": val.as_ref().map(LabeledSet::len),
        "config": config,
        "final_loss": report.losses.last(),
        "val_accuracy": report.val_accuracy,
        "weights": out,
    }));
    Ok(())
}

fn cmd_eval(cfg: &Config) -> Result<(), CliError> {
    let classes = cfg.classes()?;
    let state = load_state(cfg, classes)?;
    let set = load_set(cfg, classes)?;
    let (acc, m) = evaluate(&state, &set)?;
    print_json(&json!({
        "classes": classes,
        "samples": set.len(),
        "accuracy": percent(acc),
        "confusion": m,
        "normalized": m.normalized(),
    }));
    Ok(())
}

fn cmd_kfold(cfg: &Config) -> Result<(), CliError> {
    let classes = cfg.classes()?;
    let config: TrainConfig = cfg.train_config()?;
    let set = load_set(cfg, 3)?;
    let report = run_kfold(&reference_spec(classes)?, &set, cfg.k.unwrap_or(5), &config, classes)?;
    print_json(&report);
    Ok(())
}

fn cmd_infer(cfg: &Config, input: &Path, records: Option<&Path>, text: bool) -> Result<(), CliError> {
    let classes = cfg.classes()?;
    let det = detector(cfg)?;
    let state = load_state(cfg, classes)?;
    let sampler = cfg.sampler()?;
    let outcome = classify_stream(&det, &state, PnmFrames::new(open_input(input)?), &sampler);
    if let Some(path) = records {
        let mut lines = String::new();
        for r in &outcome.records {
            lines.push_str(&serde_json::to_string(r).expect("record serializes"));
            lines.push('\n');
        }
        write_file(path, lines.as_bytes())?;
    }
    let report = summarize(&outcome.records, classes);
    if text {
        print!("{}", report.to_text());
    } else {
        print_json(&json!({ "sampler": sampler, "classes": classes, "report": report }));
    }
    match outcome.error {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn cmd_bench(cfg: &Config, repetitions: usize, frame: Option<&Path>) -> Result<(), CliError> {
    let classes = cfg.classes()?;
    let state = match &cfg.weights {
        Some(_) => load_state(cfg, classes)?,
        None => NetworkState::<f32>::init(reference_spec(classes)?, cfg.seed.unwrap_or(0))?,
    };
    let forward = benchmark(&state, repetitions)?;
    let pipeline = match frame {
        Some(p) => {
            let bytes = fs::read(p).map_err(|e| CliError::io(p, e))?;
            let img = gaze_core::imaging::read_pnm(&bytes).map_err(|e| CliError::from(e).context(p.display()))?;
            Some(benchmark_pipeline(&detector(cfg)?, &state, &img.into_gray(), repetitions)?.summary)
        }
        None => None,
    };
    print_json(&json!({
        "classes": classes,
        "repetitions": repetitions,
        "forward": forward.summary,
        "pipeline": pipeline,
    }));
    Ok(())
}
