use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use cmt::dataset::{list_images, write_classification, write_infection, write_manifest, write_segmentation, Manifest};
use cmt::imaging::{read_gray, write_pgm, write_ppm};
use cmt::metrics::{classification_report, evaluate_classifier, evaluate_segmenter, mask_scores, segmentation_report};
use cmt::models::{Architecture, ModelGraph};
use cmt::postproc::{run_pipeline, BinaryMask, MaskOracle, PipelineParams};
use cmt::synthdata::{
    gen_classification_set, gen_infection_set, gen_segmentation_set, BlobRecipe, SynthKind, SynthSpec,
};
use cmt::training::{history_to_jsonl, split_dataset, transfer_init, LabeledDataset, Preset, Target, Trainer};
use serde_json::json;

use crate::args::{EvalArgs, GenDataArgs, PipelineArgs, TrainArgs, TransferArgs};
use crate::error::{CliError, Context};
use crate::store;

fn parse_ratio(text: &str) -> Result<[usize; 2], CliError> {
    let bad = || CliError::argument(format!("--imbalance expects NEG:POS, got `{text}`"));
    let (a, b) = text.split_once(':').ok_or_else(bad)?;
    Ok([a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?])
}

pub fn gen_data(args: &GenDataArgs) -> Result<(), CliError> {
    let mut spec = SynthSpec::new(args.kind, args.count, args.size, args.seed);
    spec.imbalance = args.imbalance.as_deref().map(parse_ratio).transpose()?;
    if args.faint {
        spec.blobs = BlobRecipe::faint();
    }
    spec.validate().or_argument("corpus spec")?;
    if args.kind == SynthKind::Classification && !(args.test_fraction > 0.0 && args.test_fraction < 1.0) {
        return Err(CliError::argument(format!(
            "--test-fraction {} must lie strictly between 0 and 1",
            args.test_fraction
        )));
    }
    store::create_out(&args.out)?;
    let mut counts = BTreeMap::new();
    match args.kind {
        SynthKind::Classification => {
            let ds = gen_classification_set(&spec).or_argument("generation")?;
            let (train, test) = split_dataset(&ds, 1.0 - args.test_fraction, args.seed).or_argument("split")?;
            for (split, part) in [("train", &train), ("test", &test)] {
                let written = write_classification(&args.out.join(split), part).or_argument("write corpus")?;
                for (name, n) in part.class_names().iter().zip(written) {
                    counts.insert(format!("{split}/{name}"), n);
                }
            }
        }
        SynthKind::Segmentation => {
            let ds = gen_segmentation_set(&spec).or_argument("generation")?;
            write_segmentation(&args.out, &ds).or_argument("write corpus")?;
            counts.insert("images".to_string(), ds.len());
        }
        SynthKind::Infection => {
            let samples = gen_infection_set(&spec).or_argument("generation")?;
            write_infection(&args.out, &samples).or_argument("write corpus")?;
            counts.insert("images".to_string(), samples.len());
        }
    }
    write_manifest(&args.out, &Manifest { spec, counts: counts.clone() }).or_argument("write manifest")?;
    let listing: Vec<String> = counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
    println!("wrote {} to {}", listing.join(" "), args.out.display());
    Ok(())
}

fn resolve_preset(args: &TrainArgs) -> Result<Preset, CliError> {
    let mut preset = match (&args.preset, &args.config) {
        (Some(name), _) => Preset::named(name).or_argument("preset")?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path).or_argument(&format!("config {}", path.display()))?;
            Preset::from_toml(&text).or_argument(&format!("config {}", path.display()))?
        }
        (None, None) => return Err(CliError::argument("one of --preset or --config is required")),
    };
    let t = &mut preset.train;
    t.seed = args.seed;
    t.epochs = args.epochs.unwrap_or(t.epochs);
    t.batch_size = args.batch.unwrap_or(t.batch_size);
    t.base_lr = args.lr.unwrap_or(t.base_lr);
    t.augment |= args.augment;
    t.validate().or_argument("training config")?;
    Ok(preset)
}

fn training_set(root: &Path, architecture: Architecture) -> Result<LabeledDataset, CliError> {
    match architecture {
        Architecture::Irrcnn if store::is_segmentation_corpus(root) => {
            Err(CliError::data(format!("{} holds masks, not class labels", root.display())))
        }
        Architecture::Irrcnn => store::read_classes(root, "train"),
        Architecture::Nabla3 => store::read_masks(root),
    }
}

fn fit(model: ModelGraph, preset: &Preset, ds: &LabeledDataset, out: &Path) -> Result<(), CliError> {
    let mut trainer = Trainer::new(model, preset.train.clone()).or_argument("training config")?;
    let mut history = Vec::with_capacity(preset.train.epochs);
    for _ in 0..preset.train.epochs {
        let r = trainer.run_epoch(ds).or_data("training")?;
        println!("epoch {:>3}  lr {:.1e}  loss {:.4}  metric {:.4}", r.epoch + 1, r.lr, r.loss, r.metric);
        history.push(r);
    }
    store::save_model(out, trainer.model())?;
    store::write_text(&out.join("history.jsonl"), &history_to_jsonl(&history))?;
    store::write_text(&out.join("preset.toml"), &preset.to_toml())?;
    println!("saved {}", out.join(store::WEIGHTS_FILE).display());
    Ok(())
}

pub fn train(args: &TrainArgs) -> Result<(), CliError> {
    let preset = resolve_preset(args)?;
    let ds = training_set(&args.dataset, preset.model.architecture)?;
    let model = ModelGraph::build(&preset.model, args.seed).or_argument("model config")?;
    store::create_out(&args.out)?;
    fit(model, &preset, &ds, &args.out)
}

pub fn transfer(args: &TransferArgs) -> Result<(), CliError> {
    let preset = resolve_preset(&args.train)?;
    let donor = store::load_params(&args.donor_weights)?;
    let ds = training_set(&args.train.dataset, preset.model.architecture)?;
    let fresh = ModelGraph::build(&preset.model, args.train.seed).or_argument("model config")?;
    let model = transfer_init(&fresh, &donor, !args.keep_head, args.train.seed)
        .or_model(&format!("donor {}", args.donor_weights.display()))?;
    store::create_out(&args.train.out)?;
    fit(model, &preset, &ds, &args.train.out)
}

fn pipeline_inputs(input: &Path) -> Result<Vec<PathBuf>, CliError> {
    let files = if input.is_file() {
        vec![input.to_path_buf()]
    } else if input.is_dir() {
        list_images(input).or_data("input")?
    } else {
        return Err(CliError::data(format!("input {} does not exist", input.display())));
    };
    if files.is_empty() {
        return Err(CliError::data(format!("no PGM/PPM images in {}", input.display())));
    }
    Ok(files)
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "image".into(), |s| s.to_string_lossy().into_owned())
}

pub fn pipeline(args: &PipelineArgs) -> Result<(), CliError> {
    if args.window < 3 || args.window.is_multiple_of(2) {
        return Err(CliError::argument(format!("--window {} must be odd and at least 3", args.window)));
    }
    if !(0.0..1.0).contains(&args.threshold) {
        return Err(CliError::argument(format!("--threshold {} must lie in [0, 1)", args.threshold)));
    }
    let params = PipelineParams {
        threshold: args.threshold,
        window: args.window,
        offset: args.offset,
        ..PipelineParams::new(args.mode)
    };
    let model = match &args.oracle_masks {
        Some(_) => None,
        None => Some(store::load_model(&args.model)?),
    };
    if model.as_ref().is_some_and(|m| m.config().architecture != Architecture::Nabla3) {
        return Err(CliError::model("the pipeline needs segmentation (nabla3) weights"));
    }
    let files = pipeline_inputs(&args.input)?;
    store::create_out(&args.out)?;

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for file in &files {
        let run = || -> Result<_, String> {
            let image = read_gray(file).map_err(|e| e.to_string())?;
            let out = match (&model, &args.oracle_masks) {
                (Some(m), _) => run_pipeline(&image, m, &params),
                (None, Some(dir)) => {
                    let mask_path = dir.join(file.file_name().expect("listed file"));
                    let mask = BinaryMask::from_gray(&read_gray(&mask_path).map_err(|e| format!("oracle mask: {e}"))?);
                    run_pipeline(&image, &MaskOracle::new(mask), &params)
                }
                (None, None) => unreachable!("model loaded when no oracle is given"),
            }
            .map_err(|e| e.to_string())?;
            let dir = args.out.join(stem(file));
            let write = |r: cmt::Result<()>| r.map_err(|e| e.to_string());
            fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
            write(write_pgm(dir.join("region_mask.pgm"), &out.region_mask.to_gray()))?;
            write(write_pgm(dir.join("infected_mask.pgm"), &out.infected_mask.to_gray()))?;
            write(write_ppm(dir.join("heatmap.ppm"), &out.heatmap))?;
            let record = serde_json::to_string_pretty(&out.report).expect("report serialises");
            fs::write(dir.join("report.json"), record + "\n").map_err(|e| e.to_string())?;
            Ok(out.report)
        };
        let name = file.file_name().expect("listed file").to_string_lossy().into_owned();
        match run() {
            Ok(report) => {
                println!("{name}: {report}");
                reports.push((name, report));
            }
            Err(e) => {
                eprintln!("{name}: {e}");
                failures.push(json!({ "file": name, "error": e }));
            }
        }
    }

    let mean = if reports.is_empty() {
        0.0
    } else {
        reports.iter().map(|(_, r)| r.percent()).sum::<f64>() / reports.len() as f64
    };
    let summary = json!({
        "images": files.len(),
        "processed": reports.len(),
        "failed": failures,
        "mean_percent": format!("{mean:.2}"),
        "lung_pixels": reports.iter().map(|(_, r)| r.lung_pixels).sum::<usize>(),
        "infected_pixels": reports.iter().map(|(_, r)| r.infected_pixels).sum::<usize>(),
        "reports": reports.iter().map(|(f, r)| json!({ "file": f, "report": r })).collect::<Vec<_>>(),
    });
    store::write_text(&args.out.join("summary.json"), &(serde_json::to_string_pretty(&summary).expect("json") + "\n"))?;
    println!("{} of {} images processed, mean infection {mean:.2}%", reports.len(), files.len());
    if reports.is_empty() {
        return Err(CliError::data(format!("all {} images failed", files.len())));
    }
    Ok(())
}

fn oracle_report(args: &EvalArgs) -> Result<cmt::metrics::MetricsReport, CliError> {
    if store::is_segmentation_corpus(&args.dataset) {
        let ds = store::read_masks(&args.dataset)?;
        let scores = ds
            .samples()
            .iter()
            .map(|s| match &s.target {
                Target::Mask(m) => mask_scores(m, m),
                Target::Class(_) => unreachable!("segmentation corpus"),
            })
            .collect::<cmt::Result<Vec<_>>>()
            .or_data("scoring")?;
        segmentation_report(&scores).or_data("scoring")
    } else {
        let ds = store::read_classes(&args.dataset, "test")?;
        let labels = ds.labels();
        let scores: Vec<f64> = labels.iter().map(|&l| f64::from(u8::from(l == args.positive))).collect();
        classification_report(ds.num_classes(), &labels, &labels, &scores, args.positive).or_argument("scoring")
    }
}

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let report = if args.oracle {
        oracle_report(args)?
    } else {
        let model = store::load_model(&args.model)?;
        match model.config().architecture {
            Architecture::Irrcnn => {
                if store::is_segmentation_corpus(&args.dataset) {
                    return Err(CliError::data(format!("{} holds masks, not class labels", args.dataset.display())));
                }
                let ds = store::read_classes(&args.dataset, "test")?;
                if args.positive >= model.config().num_classes {
                    return Err(CliError::argument(format!("--positive {} is not a model class", args.positive)));
                }
                evaluate_classifier(&model, &ds, args.positive).or_data("evaluation")?
            }
            Architecture::Nabla3 => {
                evaluate_segmenter(&model, &store::read_masks(&args.dataset)?).or_data("evaluation")?
            }
        }
    };
    for flag in &report.flags {
        eprintln!("note: {flag}");
    }
    store::create_out(&args.out)?;
    let text = report.to_json();
    store::write_text(&args.out.join("metrics.json"), &text)?;
    print!("{text}");
    Ok(())
}
