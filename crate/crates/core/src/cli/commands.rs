use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{RunConfig, Workspace};
use super::manifest::write_json;
use crate::ctd::{extract_ctd_features, ingest_events, save_schema, CtdSchema};
use crate::data::{
    clean, load_records, load_split, save_records, save_split, stratified_split, write_dataset, FeatureTable, Scaler, SplitLabel,
    TrackRecord, SYNTH_FILES,
};
use crate::error::{Error, Result};
use crate::eval::{compute_scaled_metrics, decade_key, error_analysis};
use crate::model::{
    gate_report, group_alpha_means, load_branches, load_manifest, load_model, phase1_train_all, phase2_train, save_bundle,
    validation_split, BundleScalers, GameNet, Modality, MultiModalSet,
};
use crate::nn::rng::{derive_seed, seeded};
use crate::nn::Matrix;
use crate::onion::{train_ensemble, OnionEnsemble, Registry};

/// Files a command read and wrote, plus a small JSON summary.
pub struct Outcome {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub summary: serde_json::Value,
}

pub fn synth(cfg: &RunConfig, ws: &Workspace) -> Result<Outcome> {
    write_dataset(&ws.path(&cfg.paths.raw_dir), &cfg.synth)?;
    Ok(Outcome {
        inputs: vec![],
        outputs: SYNTH_FILES.iter().map(|f| format!("{}/{f}", cfg.paths.raw_dir)).collect(),
        summary: json!({ "tracks": cfg.synth.n_tracks, "coefs": cfg.synth.coefs }),
    })
}

pub fn clean_cmd(cfg: &RunConfig, ws: &Workspace) -> Result<Outcome> {
    let p = &cfg.paths;
    let records = load_records(&ws.path(&p.metadata))?;
    let (kept, tally) = clean(&records, &cfg.cleaning)?;
    save_records(&kept, &ws.path(&p.cleaned))?;
    Ok(Outcome {
        inputs: vec![p.metadata.clone()],
        outputs: vec![p.cleaned.clone()],
        summary: serde_json::to_value(tally)?,
    })
}

pub fn split_cmd(cfg: &RunConfig, ws: &Workspace) -> Result<Outcome> {
    let p = &cfg.paths;
    let records = load_records(&ws.path(&p.cleaned))?;
    let pop: Vec<f64> = records.iter().map(|r| f64::from(r.popularity)).collect();
    let s = stratified_split(&pop, cfg.split.bins, cfg.split.test_fraction, cfg.split.seed)?;
    let ids: Vec<String> = records.iter().map(|r| r.track_id.clone()).collect();
    save_split(&ids, &s, &ws.path(&p.split))?;
    Ok(Outcome {
        inputs: vec![p.cleaned.clone()],
        outputs: vec![p.split.clone()],
        summary: json!({
            "train": s.indices(SplitLabel::Train).len(),
            "test": s.indices(SplitLabel::Test).len(),
            "edges": s.edges,
        }),
    })
}

pub fn ctd_extract(cfg: &RunConfig, ws: &Workspace) -> Result<Outcome> {
    let p = &cfg.paths;
    // Artist histories pool every logged track, so the raw metadata
    // supplies the artist map.
    let records = load_records(&ws.path(&p.metadata))?;
    let artist_of: BTreeMap<String, String> = records.into_iter().map(|r| (r.track_id, r.artist_id)).collect();
    let events_path = ws.path(&p.events);
    let file = std::fs::File::open(&events_path).map_err(|e| Error::io(&events_path, e))?;
    let (counts, report) = ingest_events(std::io::BufReader::new(file), cfg.ctd.window)?;
    let schema = CtdSchema::default_for(cfg.ctd.mode, cfg.ctd.window);
    let table = extract_ctd_features(&counts, &artist_of, &schema)?;
    table.save(&ws.path(&p.ctd))?;
    save_schema(&schema, &ws.path(&p.ctd_schema))?;
    Ok(Outcome {
        inputs: vec![p.metadata.clone(), p.events.clone()],
        outputs: vec![p.ctd.clone(), p.ctd_schema.clone()],
        summary: json!({ "ingest": report, "tracks": table.len(), "features": table.dim() }),
    })
}

fn split_labels(cfg: &RunConfig, ws: &Workspace) -> Result<HashMap<String, SplitLabel>> {
    Ok(load_split(&ws.path(&cfg.paths.split))?
        .into_iter()
        .map(|r| (r.track_id, r.split))
        .collect())
}

pub fn ae_train(cfg: &RunConfig, ws: &Workspace) -> Result<Outcome> {
    let p = &cfg.paths;
    let registry = Registry::load(&ws.path(&p.ae_registry))?;
    let audio = FeatureTable::load(&ws.path(&p.audio_raw))?;
    let labels = split_labels(cfg, ws)?;
    // Only training tracks shape the compression.
    let train_ids: Vec<String> = audio
        .ids
        .iter()
        .filter(|id| labels.get(*id) == Some(&SplitLabel::Train))
        .cloned()
        .collect();
    let raw = audio.select(&train_ids)?.values;
    let (ensemble, reports) = train_ensemble(&registry, &raw, &cfg.autoencoder, cfg.seed)?;
    ensemble.save(&ws.path(&p.ae_dir), cfg.seed, &reports)?;
    let rel: BTreeMap<&str, f64> = reports.iter().map(|r| (r.name.as_str(), r.val_rel_mse)).collect();
    Ok(Outcome {
        inputs: vec![p.ae_registry.clone(), p.audio_raw.clone(), p.split.clone()],
        outputs: vec![p.ae_dir.clone()],
        summary: json!({ "train_rows": raw.rows(), "val_rel_mse": rel }),
    })
}

pub fn compress(cfg: &RunConfig, ws: &Workspace) -> Result<Outcome> {
    let p = &cfg.paths;
    let (ensemble, _) = OnionEnsemble::load(&ws.path(&p.ae_dir))?;
    let audio = FeatureTable::load(&ws.path(&p.audio_raw))?;
    let codes = ensemble.compress(&audio.values)?;
    let table = FeatureTable::new(audio.ids.clone(), ensemble.output_names(), codes)?;
    table.save(&ws.path(&p.audio_embedding))?;
    Ok(Outcome {
        inputs: vec![p.ae_dir.clone(), p.audio_raw.clone()],
        outputs: vec![p.audio_embedding.clone()],
        summary: json!({ "rows": table.len(), "dim": table.dim() }),
    })
}

/// Cleaned tracks joined with every modality, in cleaned-file order.
struct Assembled {
    ids: Vec<String>,
    years: Vec<i32>,
    popularity: Vec<f64>,
    labels: Vec<SplitLabel>,
    xs: [Matrix; 3],
    dropped: usize,
}

impl Assembled {
    fn rows(&self, label: SplitLabel) -> Vec<usize> {
        (0..self.ids.len()).filter(|&i| self.labels[i] == label).collect()
    }
}

fn feature_inputs(cfg: &RunConfig) -> Vec<String> {
    let p = &cfg.paths;
    let mut v = vec![p.cleaned.clone(), p.split.clone(), p.audio_embedding.clone(), p.lyrics.clone(), p.ctd.clone()];
    v.extend(p.social_meta.clone());
    v
}

/// Tracks missing from any modality are dropped; the model never imputes.
fn assemble(cfg: &RunConfig, ws: &Workspace) -> Result<Assembled> {
    let p = &cfg.paths;
    let records = load_records(&ws.path(&p.cleaned))?;
    let labels = split_labels(cfg, ws)?;
    let audio = FeatureTable::load(&ws.path(&p.audio_embedding))?;
    let lyrics = FeatureTable::load(&ws.path(&p.lyrics))?;
    let ctd = FeatureTable::load(&ws.path(&p.ctd))?;
    let meta = p.social_meta.as_ref().map(|m| FeatureTable::load(&ws.path(m))).transpose()?;

    let (ai, li, ci) = (audio.index(), lyrics.index(), ctd.index());
    let mi = meta.as_ref().map(FeatureTable::index);
    let present = |id: &str| {
        ai.contains_key(id) && li.contains_key(id) && ci.contains_key(id) && mi.as_ref().map_or(true, |m| m.contains_key(id))
    };
    let kept: Vec<&TrackRecord> = records
        .iter()
        .filter(|r| labels.contains_key(&r.track_id) && present(&r.track_id))
        .collect();
    if kept.is_empty() {
        return Err(Error::InvalidInput("no track has every modality".into()));
    }
    let ids: Vec<String> = kept.iter().map(|r| r.track_id.clone()).collect();
    let social_ctd = ctd.select(&ids)?.values;
    let social = match &meta {
        Some(m) => Matrix::hcat(&[&social_ctd, &m.select(&ids)?.values])?,
        None => social_ctd,
    };
    Ok(Assembled {
        years: kept.iter().map(|r| r.release_year).collect(),
        popularity: kept.iter().map(|r| f64::from(r.popularity)).collect(),
        labels: kept.iter().map(|r| labels[&r.track_id]).collect(),
        xs: [audio.select(&ids)?.values, lyrics.select(&ids)?.values, social],
        dropped: records.len() - ids.len(),
        ids,
    })
}

fn fit_scalers(cfg: &RunConfig, asm: &Assembled) -> Result<BundleScalers> {
    let train = asm.rows(SplitLabel::Train);
    let features = asm
        .xs
        .iter()
        .zip(cfg.scalers.ordered())
        .map(|(x, kind)| {
            let mut s = Scaler::new(kind);
            s.fit(&x.select_rows(&train))?;
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BundleScalers {
        features,
        target: Scaler::min_max_fixed(1, 0.0, 100.0)?,
    })
}

fn scaled_set(asm: &Assembled, scalers: &BundleScalers, rows: &[usize]) -> Result<MultiModalSet> {
    if scalers.features.len() != 3 {
        return Err(Error::InvalidInput("bundle must hold three feature scalers".into()));
    }
    let xs = [0, 1, 2].map(|i| scalers.features[i].transform(&asm.xs[i].select_rows(rows)));
    let [a, l, s] = xs;
    let pop = Matrix::column(&rows.iter().map(|&r| asm.popularity[r]).collect::<Vec<_>>());
    let y = scalers.target.transform(&pop)?.into_vec();
    MultiModalSet::new([a?, l?, s?], y)
}

/// Training rows split again into fit and early-stopping parts.
fn train_val(cfg: &RunConfig, asm: &Assembled, scalers: &BundleScalers) -> Result<(MultiModalSet, MultiModalSet)> {
    let all = scaled_set(asm, scalers, &asm.rows(SplitLabel::Train))?;
    let (t, v) = validation_split(&all.y, cfg.validation_fraction, derive_seed(cfg.seed, "validation"))?;
    Ok((all.select(&t), all.select(&v)))
}

pub fn train_phase1(cfg: &RunConfig, ws: &Workspace) -> Result<Outcome> {
    let asm = assemble(cfg, ws)?;
    let scalers = fit_scalers(cfg, &asm)?;
    let (train, val) = train_val(cfg, &asm, &scalers)?;
    let dims = asm.xs.each_ref().map(Matrix::cols);
    let mut model = GameNet::new(dims, &cfg.model, &mut seeded(derive_seed(cfg.seed, "init")))?;
    let reports = phase1_train_all(&mut model, &train, &val, &cfg.phase1, cfg.seed)?;
    let dir = ws.path(&cfg.paths.model_dir);
    save_bundle(&dir, cfg.seed, &model.branches, None, &scalers)?;
    write_json(&dir.join("phase1_report.json"), &reports)?;
    let r2: BTreeMap<String, Option<f64>> = reports.iter().map(|r| (r.modality.to_string(), r.val_r2)).collect();
    Ok(Outcome {
        inputs: feature_inputs(cfg),
        outputs: vec![cfg.paths.model_dir.clone()],
        summary: json!({ "train": train.len(), "val": val.len(), "dropped": asm.dropped, "val_r2": r2 }),
    })
}

pub fn train_phase2(cfg: &RunConfig, ws: &Workspace) -> Result<Outcome> {
    let dir = ws.path(&cfg.paths.model_dir);
    let manifest = load_manifest(&dir)?;
    let branches = load_branches(&dir, &manifest)?;
    let asm = assemble(cfg, ws)?;
    let (train, val) = train_val(cfg, &asm, &manifest.scalers)?;
    let mut model = GameNet::from_branches(branches, cfg.model.gate.clone(), &mut seeded(derive_seed(cfg.seed, "gate")))?;
    let report = phase2_train(&mut model, &train, &val, &cfg.phase2, cfg.seed)?;
    save_bundle(&dir, cfg.seed, &model.branches, Some(&model.gate), &manifest.scalers)?;
    write_json(&dir.join("phase2_report.json"), &report)?;
    let mut inputs = feature_inputs(cfg);
    inputs.push(cfg.paths.model_dir.clone());
    Ok(Outcome {
        inputs,
        outputs: vec![cfg.paths.model_dir.clone()],
        summary: json!({
            "val_mse": report.val_mse,
            "initial_val_mse": report.initial_val_mse,
            "mean_alpha": report.mean_alpha,
        }),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub track_id: String,
    pub actual: f64,
    pub predicted: f64,
    pub alpha_audio: f64,
    pub alpha_lyrics: f64,
    pub alpha_social: f64,
    pub pred_audio: f64,
    pub pred_lyrics: f64,
    pub pred_social: f64,
}

fn eval_rows(cfg: &RunConfig, asm: &Assembled) -> Result<Vec<usize>> {
    let rows = asm.rows(cfg.eval_split);
    if rows.is_empty() {
        return Err(Error::InvalidInput(format!("the {:?} split is empty", cfg.eval_split)));
    }
    Ok(rows)
}

pub fn predict(cfg: &RunConfig, ws: &Workspace) -> Result<Outcome> {
    let (model, manifest) = load_model(&ws.path(&cfg.paths.model_dir))?;
    let asm = assemble(cfg, ws)?;
    let rows = eval_rows(cfg, &asm)?;
    let set = scaled_set(&asm, &manifest.scalers, &rows)?;
    let pred = model.infer(set.refs())?;
    let back = |v: Vec<f64>| manifest.scalers.target.inverse(&Matrix::column(&v)).map(Matrix::into_vec);
    let predicted = back(pred.y.clone())?;
    let per_branch: Vec<Vec<f64>> = (0..3).map(|i| back(pred.branch_y.col_values(i))).collect::<Result<_>>()?;
    let path = ws.path(&cfg.paths.predictions);
    crate::data::table::create_parent(&path)?;
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    for (k, &r) in rows.iter().enumerate() {
        w.serialize(PredictionRow {
            track_id: asm.ids[r].clone(),
            actual: asm.popularity[r],
            predicted: predicted[k],
            alpha_audio: pred.alpha.get(k, 0),
            alpha_lyrics: pred.alpha.get(k, 1),
            alpha_social: pred.alpha.get(k, 2),
            pred_audio: per_branch[0][k],
            pred_lyrics: per_branch[1][k],
            pred_social: per_branch[2][k],
        })?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    let mut inputs = feature_inputs(cfg);
    inputs.push(cfg.paths.model_dir.clone());
    Ok(Outcome {
        inputs,
        outputs: vec![cfg.paths.predictions.clone()],
        summary: json!({ "split": cfg.eval_split, "rows": rows.len() }),
    })
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    csv::Reader::from_reader(std::io::BufReader::new(file))
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::InvalidInput(format!("predictions row {}: {e}", i + 2))))
        .collect()
}

/// Scores a predictions file. Without an explicit file the model first
/// predicts the evaluation split.
pub fn evaluate(cfg: &RunConfig, ws: &Workspace, predictions: Option<&str>) -> Result<Outcome> {
    let p = &cfg.paths;
    let mut inputs = Vec::new();
    let rel = match predictions {
        Some(rel) => {
            inputs.push(rel.to_string());
            rel.to_string()
        }
        None => {
            inputs = predict(cfg, ws)?.inputs;
            p.predictions.clone()
        }
    };
    let rows = read_predictions(&ws.path(&rel))?;
    let years: HashMap<String, i32> = load_records(&ws.path(&p.cleaned))?
        .into_iter()
        .map(|r| (r.track_id, r.release_year))
        .collect();
    inputs.push(p.cleaned.clone());
    let actual: Vec<f64> = rows.iter().map(|r| r.actual).collect();
    let predicted: Vec<f64> = rows.iter().map(|r| r.predicted).collect();
    let alpha = Matrix::new(
        rows.len(),
        3,
        rows.iter().flat_map(|r| [r.alpha_audio, r.alpha_lyrics, r.alpha_social]).collect(),
    )?;
    let decades: Vec<String> = rows
        .iter()
        .map(|r| years.get(&r.track_id).map_or_else(|| "unknown".to_string(), |&y| decade_key(y)))
        .collect();
    let by_decade = group_alpha_means(&alpha, &decades)?;
    let metrics = compute_scaled_metrics(&actual, &predicted)?;
    let analysis = error_analysis(&actual, &predicted, Some(&by_decade))?;
    let report = json!({ "predictions": rel, "metrics": metrics, "error_analysis": analysis });
    write_json(&ws.path(&p.metrics), &report)?;
    let mut outputs = vec![p.metrics.clone()];
    if predictions.is_none() {
        outputs.insert(0, p.predictions.clone());
    }
    Ok(Outcome {
        inputs,
        outputs,
        summary: json!({ "r2": metrics.unit.r2, "mae": metrics.unit.mae, "mae_popularity": metrics.popularity.mae }),
    })
}

pub fn gate_report_cmd(cfg: &RunConfig, ws: &Workspace) -> Result<Outcome> {
    let (model, manifest) = load_model(&ws.path(&cfg.paths.model_dir))?;
    let asm = assemble(cfg, ws)?;
    let rows = eval_rows(cfg, &asm)?;
    let set = scaled_set(&asm, &manifest.scalers, &rows)?;
    let decades: Vec<String> = rows.iter().map(|&r| decade_key(asm.years[r])).collect();
    let report = gate_report(&model, set.refs(), Some(&decades))?;
    write_json(&ws.path(&cfg.paths.gate_report), &report)?;
    let mut inputs = feature_inputs(cfg);
    inputs.push(cfg.paths.model_dir.clone());
    let means: BTreeMap<&str, f64> = Modality::ALL.iter().map(|m| (m.name(), report.mean_alpha[m.index()])).collect();
    Ok(Outcome {
        inputs,
        outputs: vec![cfg.paths.gate_report.clone()],
        summary: json!({ "split": cfg.eval_split, "mean_alpha": means }),
    })
}
