//! One function per subcommand. Inputs are never modified; every output
//! goes through an atomic write and carries (or sits next to) the resolved
//! options that produced it.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::path::{Path, PathBuf};

use clsvm_core::baselines::{attribute_weight_report, train_fas, train_fs, EvalReport, FasConfig, WeightReport};
use clsvm_core::clsvm::{predict as clsvm_predict, train as clsvm_train, TrainConfig};
use clsvm_core::dataset::{load_dataset, save_dataset};
use clsvm_core::features::{
    describe_image, fit_feature_pca, load_box_table, reduce_and_concat, DescriptorSet, FaceBoxFile, FeaturePca,
    GrayImage, PcaDims, Rect,
};
use clsvm_core::io::{read_json, write_atomic, write_json};
use clsvm_core::numerics::QpOptions;
use clsvm_core::ranker::{expand_pairs, load_annotations, recover_scores, RankConfig};
use clsvm_core::svr::SvrConfig;
use clsvm_core::synth::{generate, SynthSpec};
use clsvm_core::{AttributeSchema, Error, Result, Sample};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model_file::{ModelFile, TrainedModel};
use crate::{EvalArgs, ExtractArgs, InspectArgs, Method, PredictArgs, RankArgs, SynthArgs, TrainArgs};

const SEED_ENV: &str = "CLSVM_SEED";

/// Sidecar recording how a non-JSON output was produced.
#[derive(Serialize)]
struct RunRecord<'a, T: Serialize> {
    command: &'a str,
    options: &'a T,
    #[serde(skip_serializing_if = "Option::is_none")]
    resolved: Option<Value>,
}

fn run_record_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".run.json");
    out.with_file_name(name)
}

fn write_run_record<T: Serialize>(out: &Path, command: &str, options: &T, resolved: Option<Value>) -> Result<()> {
    write_json(
        &run_record_path(out),
        &RunRecord {
            command,
            options,
            resolved,
        },
    )
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::InvalidArgument(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

/// Flag, then config file, then environment, then the config default.
fn resolve_seed(flag: Option<u64>, file: &Value) -> Result<Option<u64>> {
    if flag.is_some() {
        return Ok(flag);
    }
    if file.get("seed").is_some() {
        return Ok(None);
    }
    env_seed()
}

fn read_config<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> Result<(T, Value)> {
    match path {
        None => Ok((T::default(), Value::Object(Default::default()))),
        Some(p) => {
            let raw: Value = read_json(p)?;
            if !raw.is_object() {
                return Err(Error::Parse(format!("{}: config must be a JSON object", p.display())));
            }
            let parsed =
                serde_json::from_value(raw.clone()).map_err(|e| Error::Parse(format!("{}: {e}", p.display())))?;
            Ok((parsed, raw))
        }
    }
}

fn load_schema(path: Option<&Path>) -> Result<AttributeSchema> {
    match path {
        Some(p) => AttributeSchema::load(p),
        None => Ok(AttributeSchema::default_person()),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let (mut spec, raw): (SynthSpec, Value) = read_config(args.spec.as_deref())?;
    if let Some(seed) = resolve_seed(args.seed, &raw)? {
        spec.seed = seed;
    }
    let data = generate(&spec)?;
    let schema = if spec.n == AttributeSchema::default_person().len() {
        AttributeSchema::default_person()
    } else {
        AttributeSchema::anonymous(spec.n)
    };
    ensure_dir(&args.out)?;
    save_dataset(&args.out.join("train.jsonl"), &data.train)?;
    save_dataset(&args.out.join("test.jsonl"), &data.test)?;
    write_json(&args.out.join("schema.json"), &schema)?;
    #[derive(Serialize)]
    struct Sidecar<'a> {
        spec: &'a SynthSpec,
        marginals: Vec<f64>,
        truth: &'a clsvm_core::synth::GroundTruth,
    }
    write_json(
        &args.out.join("ground_truth.json"),
        &Sidecar {
            spec: &spec,
            marginals: data.truth.marginals(spec.noise_a),
            truth: &data.truth,
        },
    )?;
    eprintln!(
        "wrote {} train and {} test samples to {}",
        data.train.len(),
        data.test.len(),
        args.out.display()
    );
    Ok(())
}

#[derive(Debug, Deserialize)]
struct LabelRecord {
    id: String,
    #[serde(default)]
    a: Option<Vec<f64>>,
    #[serde(default)]
    y: Option<f64>,
}

fn load_labels(path: &Path) -> Result<HashMap<String, LabelRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut out = HashMap::new();
    for (no, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LabelRecord =
            serde_json::from_str(&line).map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), no + 1)))?;
        out.insert(rec.id.clone(), rec);
    }
    Ok(out)
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut images = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|e| Error::Io {
                path: dir.to_path_buf(),
                source: e,
            })?
            .path();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) {
            images.push(path);
        }
    }
    images.sort();
    if images.is_empty() {
        return Err(Error::InvalidArgument(format!("no .pgm images in {}", dir.display())));
    }
    Ok(images)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Fitted projections plus what they were fitted on.
#[derive(Debug, Serialize, Deserialize)]
struct PcaFile {
    dims: PcaDims,
    descriptors: DescriptorSet,
    fit_images: Vec<String>,
    pca: FeaturePca,
}

pub fn extract_features(args: &ExtractArgs) -> Result<()> {
    let images = list_images(&args.images)?;
    let table = args.boxes.as_deref().map(load_box_table).transpose()?;
    let face_box = |path: &Path| -> Result<Rect> {
        match &table {
            Some(t) => {
                let name = path
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default();
                t.get(&name)
                    .or_else(|| t.get(&stem(path)))
                    .copied()
                    .ok_or_else(|| Error::Validation(format!("no face box for {name:?} in the box table")))
            }
            None => FaceBoxFile::load(&path.with_extension("json")),
        }
    };
    let labels = args.labels.as_deref().map(load_labels).transpose()?;

    let describe = |path: &PathBuf, set: &DescriptorSet| -> Result<Vec<clsvm_core::features::RawDescriptors>> {
        let image = GrayImage::read_pgm(path)?;
        describe_image(&image, face_box(path)?, set)
    };

    let pca_file = if args.fit_pca {
        let set = DescriptorSet::parse(&args.descriptors)?;
        let dims = PcaDims {
            gabor: args.gabor_dims,
            hog: args.hog_dims,
            lbp: args.lbp_dims,
        };
        let count = args.fit_images.clamp(1, images.len());
        let chosen: Vec<&PathBuf> = (0..count).map(|i| &images[i * images.len() / count]).collect();
        eprintln!("fitting PCA on {} image(s)", chosen.len());
        let boxes: Vec<_> = chosen
            .par_iter()
            .map(|p| describe(p, &set))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        let pca = fit_feature_pca(&boxes, &dims)?;
        let file = PcaFile {
            dims,
            descriptors: set,
            fit_images: chosen.iter().map(|p| stem(p)).collect(),
            pca,
        };
        write_json(&args.pca, &file)?;
        file
    } else {
        read_json(&args.pca)?
    };

    let set = pca_file.pca.descriptors();
    eprintln!(
        "extracting {} image(s), {} dims each",
        images.len(),
        pca_file.pca.output_dim()
    );
    let samples: Vec<Sample> = images
        .par_iter()
        .map(|path| -> Result<Sample> {
            let boxes = describe(path, &set)?;
            let x = reduce_and_concat(&boxes, &pca_file.pca)?;
            let id = stem(path);
            let (a, y) = match labels.as_ref().and_then(|l| l.get(&id)) {
                Some(rec) => (rec.a.clone(), rec.y),
                None => (None, None),
            };
            Ok(Sample::new(id, x, a, y))
        })
        .collect::<Result<_>>()?;
    save_dataset(&args.out, &samples)?;
    write_run_record(&args.out, "extract-features", args, None)
}

pub fn rank_scores(args: &RankArgs) -> Result<()> {
    let config = RankConfig {
        reg: args.reg,
        steps: args.steps,
        ..RankConfig::default()
    };
    let annotations = load_annotations(&args.annotations)?;
    let pairs = expand_pairs(&annotations)?;
    let result = recover_scores(&pairs, &config)?;
    let d = &result.diagnostics;
    eprintln!(
        "{} items, {} pairs, {} violated, {} component(s)",
        d.items, d.pairs, d.violated_pairs, d.components
    );
    write_json(&args.out, &result)
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let schema = load_schema(args.schema.as_deref())?;
    let samples = load_dataset(&args.data, &schema)?;
    if args.method != Method::Clsvm && (args.pin_attributes || args.epsilon.is_some() || args.gamma.is_some()) {
        return Err(Error::InvalidArgument(
            "--pin-attributes, --epsilon and --gamma apply only to --method clsvm".into(),
        ));
    }
    let trained = match args.method {
        Method::Clsvm => {
            let (mut config, raw): (TrainConfig, Value) = read_config(args.config.as_deref())?;
            if let Some(seed) = resolve_seed(args.seed, &raw)? {
                config.seed = seed;
            }
            if let Some(e) = args.epsilon {
                config.epsilon = e;
            }
            if let Some(g) = args.gamma {
                config.gamma = g;
            }
            config.pin_attributes |= args.pin_attributes;
            let outcome = clsvm_train(&samples, &schema, None, &config)?;
            for r in &outcome.rounds {
                eprintln!("round {}: L(z) {:.6}  risk {:.6}", r.round, r.loss, r.risk);
            }
            TrainedModel::Clsvm {
                config,
                rounds: outcome.rounds,
                model: outcome.model,
            }
        }
        Method::Fs => {
            let (config, _): (SvrConfig, Value) = read_config(args.config.as_deref())?;
            config.validate()?;
            TrainedModel::Fs {
                model: train_fs(&samples, &config)?,
                config,
                schema,
            }
        }
        Method::Fas => {
            let (config, _): (FasConfig, Value) = read_config(args.config.as_deref())?;
            config.svr.validate()?;
            config.attribute_svr.validate()?;
            TrainedModel::Fas {
                model: train_fas(&samples, &config)?,
                config,
                schema,
            }
        }
    };
    ModelFile::new(trained).save(&args.out)?;
    eprintln!(
        "trained on {} samples; model written to {}",
        samples.len(),
        args.out.display()
    );
    Ok(())
}

/// One line of a predictions file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub y: f64,
    /// Binary attribute predictions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    /// Attribute confidences before thresholding.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_confidence: Option<Vec<f64>>,
}

pub fn predict(args: &PredictArgs) -> Result<()> {
    let file = ModelFile::load(&args.model)?;
    let samples = load_dataset(&args.data, file.schema())?;
    if let Some(s) = samples.iter().find(|s| s.x.len() != file.feature_dim()) {
        return Err(Error::Schema(format!(
            "record {:?} has {} features, the model expects {}",
            s.id,
            s.x.len(),
            file.feature_dim()
        )));
    }
    let records: Vec<PredictionRecord> = match &file.trained {
        TrainedModel::Clsvm { config, model, .. } => {
            let opts = QpOptions {
                seed: config.seed,
                ..QpOptions::default()
            };
            samples
                .par_iter()
                .map(|s| {
                    let p = clsvm_predict(&s.x, model, &opts)?;
                    Ok(PredictionRecord {
                        id: s.id.clone(),
                        y: p.y,
                        a: Some(p.a_binary),
                        a_confidence: Some(p.a_confidence),
                    })
                })
                .collect::<Result<_>>()?
        }
        TrainedModel::Fs { model, .. } => samples
            .iter()
            .map(|s| {
                Ok(PredictionRecord {
                    id: s.id.clone(),
                    y: model.predict(&s.x)?,
                    a: None,
                    a_confidence: None,
                })
            })
            .collect::<Result<_>>()?,
        TrainedModel::Fas { model, .. } => samples
            .iter()
            .map(|s| {
                Ok(PredictionRecord {
                    id: s.id.clone(),
                    y: model.predict(&s.x)?,
                    a: Some(model.predict_attributes(&s.x)?),
                    a_confidence: None,
                })
            })
            .collect::<Result<_>>()?,
    };
    let mut buf = Vec::new();
    for r in &records {
        buf.extend(serde_json::to_string(r)?.into_bytes());
        buf.push(b'\n');
    }
    write_atomic(&args.out, &buf)?;
    let method = match &file.trained {
        TrainedModel::Clsvm { .. } => "clsvm",
        TrainedModel::Fs { .. } => "f-s",
        TrainedModel::Fas { .. } => "f-a-s",
    };
    write_run_record(
        &args.out,
        "predict",
        args,
        Some(serde_json::json!({ "method": method })),
    )
}

fn load_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(no, l)| serde_json::from_str(l).map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), no + 1))))
        .collect()
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let schema = load_schema(args.schema.as_deref())?;
    let truth = load_dataset(&args.truth, &schema)?;
    let preds = load_predictions(&args.preds)?;
    let mut by_id: BTreeMap<&str, &PredictionRecord> = BTreeMap::new();
    for p in &preds {
        if by_id.insert(&p.id, p).is_some() {
            return Err(Error::Validation(format!("prediction for {:?} appears twice", p.id)));
        }
    }
    if preds.len() != truth.len() {
        return Err(Error::Validation(format!(
            "{} predictions for {} ground-truth records",
            preds.len(),
            truth.len()
        )));
    }
    let matched: Vec<&PredictionRecord> = truth
        .iter()
        .map(|s| {
            by_id
                .get(s.id.as_str())
                .copied()
                .ok_or_else(|| Error::Validation(format!("no prediction for record {:?}", s.id)))
        })
        .collect::<Result<_>>()?;
    let scores: Vec<f64> = matched.iter().map(|p| p.y).collect();
    let attrs: Option<Vec<Vec<f64>>> = matched.iter().map(|p| p.a.clone()).collect();
    let report = EvalReport::new(&scores, attrs.as_deref(), &truth, &schema)?;
    print!("{}", report.to_table());
    #[derive(Serialize)]
    struct Output<'a> {
        #[serde(flatten)]
        report: &'a EvalReport,
        config: &'a EvalArgs,
    }
    write_json(
        &args.out,
        &Output {
            report: &report,
            config: args,
        },
    )
}

pub fn inspect_weights(args: &InspectArgs) -> Result<()> {
    let file = ModelFile::load(&args.model)?;
    let report = match &file.trained {
        TrainedModel::Clsvm { model, .. } => attribute_weight_report(model)?,
        TrainedModel::Fas { model, schema, .. } => WeightReport::new(schema, &model.stage_two.w)?,
        TrainedModel::Fs { .. } => {
            return Err(Error::InvalidArgument(
                "an f-s model has no attribute weights; use a clsvm or f-a-s model".into(),
            ))
        }
    };
    print!("{}", report.to_table());
    write_atomic(&args.out, report.to_csv().as_bytes())?;
    write_run_record(&args.out, "inspect-weights", args, None)
}
