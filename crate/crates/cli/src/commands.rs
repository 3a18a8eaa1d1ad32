use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use afva_core::annotation::{export_labels, replay_log, ProtocolConfig};
use afva_core::experiments::{
    export_va_distribution, object_emotion_correlation, run_cv, va_grid_words, CvOptions, Learner, WordDictionary,
};
use afva_core::ffnn::{read_model, train, write_model, History, Mlp, Samples, TrainConfig};
use afva_core::pipeline::{
    read_cache_file, read_labels_csv, standardize, write_cache_file, write_labels_csv, Extractor, RowLabel,
    Standardizer,
};
use afva_core::{Axis, FeatureMatrix, Manifest};
use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use crate::{AnalyzeCmd, Cmd, CvArgs, ExportLabelsArgs, ExtractArgs, InspectArgs, LearnerKind, PredictArgs, TrainArgs};

/// Metadata stored next to a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub axis: Axis,
    pub dims: Vec<usize>,
    pub schema: Vec<(String, usize)>,
    pub n_rows: usize,
    pub train: TrainConfig,
    pub standardizer: Option<Standardizer>,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s: OsString = path.as_os_str().to_owned();
    s.push(suffix);
    s.into()
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

/// Writer for `path`, or stdout.
fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn read_manifest(path: &Path) -> anyhow::Result<Manifest> {
    Manifest::read(path).with_context(|| format!("reading manifest {}", path.display()))
}

pub fn run(cmd: Cmd) -> anyhow::Result<ExitCode> {
    match cmd {
        Cmd::Extract(a) => extract(a),
        Cmd::Train(a) => train_cmd(a),
        Cmd::Predict(a) => predict(a),
        Cmd::Inspect(a) => inspect(a),
        Cmd::Cv(a) => cv(a),
        Cmd::Analyze(a) => analyze(a),
        Cmd::ExportLabels(a) => export(a),
        Cmd::Serve(a) => crate::serve::serve(a),
    }
}

fn extract(args: ExtractArgs) -> anyhow::Result<ExitCode> {
    let manifest = read_manifest(&args.manifest)?;
    let extractor = Extractor::new(args.features.feature_config())?;
    let (matrix, failures) = extractor.build_matrix(&manifest, &args.features.blocks, args.features.jobs)?;
    if !failures.is_empty() {
        for f in &failures {
            eprintln!("record {}: {}", f.id, f.error);
        }
        eprintln!("{} of {} records failed; no cache written", failures.len(), manifest.records.len());
        return Ok(ExitCode::FAILURE);
    }
    write_cache_file(&matrix, &args.out)?;
    let labels: Vec<RowLabel> = manifest.records.iter().map(RowLabel::from_record).collect();
    let mut w = create(&sidecar(&args.out, ".labels.csv"))?;
    write_labels_csv(&labels, &mut w)?;
    w.flush()?;
    println!("wrote {} rows x {} features to {}", matrix.n_rows(), matrix.dim(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

/// Cache plus its label sidecar.
fn read_labeled_cache(path: &Path) -> anyhow::Result<(FeatureMatrix, Vec<RowLabel>)> {
    let matrix = read_cache_file(path).with_context(|| format!("reading cache {}", path.display()))?;
    let labels_path = sidecar(path, ".labels.csv");
    let labels = read_labels_csv(File::open(&labels_path).with_context(|| format!("opening {}", labels_path.display()))?)?;
    if labels.len() != matrix.n_rows() {
        bail!("{} has {} rows but the cache has {}", labels_path.display(), labels.len(), matrix.n_rows());
    }
    Ok((matrix, labels))
}

fn write_history(history: &History, path: &Path) -> anyhow::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "epoch,train_mse,validation_mse")?;
    for e in &history.epochs {
        let val = e.validation_mse.map(|v| v.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{}", e.epoch, e.train_mse, val)?;
    }
    w.flush()?;
    Ok(())
}

fn train_cmd(args: TrainArgs) -> anyhow::Result<ExitCode> {
    let (matrix, labels) = read_labeled_cache(&args.cache)?;
    let targets = labels
        .iter()
        .map(|l| l.target(args.axis))
        .collect::<afva_core::Result<Vec<f64>>>()?;
    let schema = matrix.schema().to_vec();
    let (features, standardizer) = if args.no_standardize {
        (matrix, None)
    } else {
        let (m, s) = standardize(&matrix)?;
        (m, Some(s))
    };
    let config = args.net.train_config();
    let mut dims = vec![features.dim()];
    dims.extend(&args.net.hidden);
    dims.push(1);
    let n_rows = features.n_rows();
    let samples = Samples::new(features.dim(), features.into_data(), targets)?;
    let net = Mlp::init_centered(&dims, config.seed, &samples.targets)?;
    let (net, history) = train(net, &samples, &config)?;

    let mut w = create(&args.out)?;
    write_model(&net, &mut w)?;
    w.flush()?;
    let meta = ModelMeta {
        axis: args.axis,
        dims,
        schema,
        n_rows,
        train: config,
        standardizer,
        best_epoch: history.best_epoch,
        epochs_run: history.epochs.len(),
    };
    std::fs::write(sidecar(&args.out, ".meta.json"), serde_json::to_string_pretty(&meta)?)?;
    write_history(&history, &sidecar(&args.out, ".history.csv"))?;
    let best = &history.epochs[history.best_epoch];
    println!(
        "axis={} epochs={} best_epoch={} train_mse={} validation_mse={}",
        args.axis,
        history.epochs.len(),
        history.best_epoch,
        best.train_mse,
        best.validation_mse.map_or("-".into(), |v| v.to_string())
    );
    Ok(ExitCode::SUCCESS)
}

fn read_meta(model: &Path) -> anyhow::Result<ModelMeta> {
    let path = sidecar(model, ".meta.json");
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

fn load_model(path: &Path) -> anyhow::Result<Mlp> {
    let file = File::open(path).with_context(|| format!("opening model {}", path.display()))?;
    Ok(read_model(std::io::BufReader::new(file))?)
}

fn predict(args: PredictArgs) -> anyhow::Result<ExitCode> {
    let net = load_model(&args.model)?;
    let meta = read_meta(&args.model)?;
    let (matrix, labels) = read_labeled_cache(&args.cache)?;
    if matrix.schema() != meta.schema.as_slice() {
        bail!("cache blocks {:?} differ from the model's {:?}", matrix.schema(), meta.schema);
    }
    let matrix = match &meta.standardizer {
        Some(s) => s.transform(&matrix)?,
        None => matrix,
    };
    let preds = net.predict(matrix.data())?;
    let mut w = output(args.out.as_deref())?;
    writeln!(w, "id,{}", meta.axis)?;
    for (label, p) in labels.iter().zip(preds) {
        writeln!(w, "{},{p}", label.id)?;
    }
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn inspect(args: InspectArgs) -> anyhow::Result<ExitCode> {
    let net = load_model(&args.model)?;
    println!("dims={:?}", net.dims());
    println!("params={}", net.num_params());
    match read_meta(&args.model) {
        Ok(meta) => println!("{}", serde_json::to_string_pretty(&meta)?),
        Err(e) => eprintln!("no metadata: {e:#}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cv(args: CvArgs) -> anyhow::Result<ExitCode> {
    let manifest = read_manifest(&args.manifest)?;
    let extractor = Extractor::new(args.features.feature_config())?;
    let learner = match args.learner {
        LearnerKind::Ffnn => Learner::Ffnn {
            hidden: args.net.hidden.clone(),
            train: args.net.train_config(),
        },
        LearnerKind::Linear => Learner::Linear { ridge: args.ridge },
    };
    let options = CvOptions {
        k: args.k,
        seed: args.net.seed,
        standardize: !args.no_standardize,
        learner,
    };
    let report = run_cv(&manifest, &extractor, &args.features.blocks, args.axis, &options, args.features.jobs)?;
    for f in &report.folds {
        eprintln!("fold {}: n_test={} train_mse={} test_mse={}", f.fold, f.n_test, f.train_mse, f.test_mse);
    }
    eprintln!("average: train_mse={} test_mse={}", report.avg_train_mse, report.avg_test_mse);
    let mut w = output(args.report.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn analyze(cmd: AnalyzeCmd) -> anyhow::Result<ExitCode> {
    match cmd {
        AnalyzeCmd::Correlate(a) => {
            let manifest = read_manifest(&a.manifest)?;
            let file = File::open(&a.dictionary).with_context(|| format!("opening {}", a.dictionary.display()))?;
            let dict = WordDictionary::read_csv(file)?;
            let result = object_emotion_correlation(&manifest.records, &dict)?;
            let mut w = output(a.out.as_deref())?;
            serde_json::to_writer_pretty(&mut w, &result)?;
            writeln!(w)?;
            w.flush()?;
        }
        AnalyzeCmd::Grid(a) => {
            let manifest = read_manifest(&a.manifest)?;
            let mut w = output(a.out.as_deref())?;
            va_grid_words(&manifest.records).write_csv(&mut w)?;
            w.flush()?;
        }
        AnalyzeCmd::Dist(a) => {
            let manifest = read_manifest(&a.manifest)?;
            let dist = export_va_distribution(&manifest.records, a.bins)?;
            let mut w = output(a.out.as_deref())?;
            dist.write_csv(&mut w)?;
            w.flush()?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn same_dir(a: &Path, b: &Path) -> bool {
    let canon = |p: &Path| {
        let p = if p.as_os_str().is_empty() { Path::new(".") } else { p };
        p.canonicalize().ok()
    };
    canon(a).is_some() && canon(a) == canon(b)
}

fn export(args: ExportLabelsArgs) -> anyhow::Result<ExitCode> {
    let manifest = read_manifest(&args.manifest)?;
    if !args.log.is_file() {
        bail!("rating log {} does not exist", args.log.display());
    }
    let aggregates = replay_log(&args.log, ProtocolConfig::new(Vec::new(), 0))?.aggregates();
    let (mut updated, report) = export_labels(&manifest, &aggregates);
    for id in &report.unmatched {
        eprintln!("no record matches rated image {id}");
    }
    let out_dir = args.out.parent().unwrap_or(Path::new(""));
    if !same_dir(out_dir, &manifest.base_dir) {
        // relative paths would dangle from the new location
        for r in &mut updated.records {
            r.image_path = manifest.resolve(&r.image_path);
            for p in r.object_feature_path.values_mut() {
                *p = manifest.resolve(p);
            }
            if let Some(p) = &mut r.semantic_map_path {
                *p = manifest.resolve(p);
            }
        }
    }
    updated.write(&args.out)?;
    println!(
        "labeled {} records; {} pending; {} unmatched",
        report.labeled.len(),
        report.pending,
        report.unmatched.len()
    );
    Ok(ExitCode::SUCCESS)
}
