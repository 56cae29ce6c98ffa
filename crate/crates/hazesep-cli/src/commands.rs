//! Command implementations behind the CLI surface.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use hazesep_core::compand::encode;
use hazesep_core::config::{load_config, load_eval_manifest, RunConfig};
use hazesep_core::dehaze::dehaze;
use hazesep_core::error::{CoreError, Result};
use hazesep_core::grid::RFGrid;
use hazesep_core::imaging::{brightness_match, envelope, export_png, log_compress, write_db_csv, BModeImage};
use hazesep_core::metrics::{fwhm_lateral, gcnr, ks_statistic, psnr};
use hazesep_core::phantom::{
    gen_haze, gen_tissue, load_dataset_manifest, mix, DatasetManifest, MixedEntry,
};
use hazesep_core::roi::{load_polygon_json, rasterize_polygon, RoiMask};
use hazesep_core::rng::{child_seed, SeededRng};
use hazesep_core::score::{
    load_checkpoint_file, save_checkpoint_file, train, Checkpoint, SaveModel, TrainOptions,
    TrainableScoreNet,
};
use hazesep_core::patch::{extract, plan};

pub fn load_run_config(path: Option<&Path>, seed_override: Option<u64>) -> Result<RunConfig> {
    let mut config = match path {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = seed_override {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

pub fn cmd_synth(
    config: &RunConfig,
    frames: usize,
    levels: &[f64],
    out: Option<&Path>,
) -> Result<()> {
    if frames == 0 {
        return Err(CoreError::InvalidParam("--frames must be >= 1".into()));
    }
    for &l in levels {
        if !(l.is_finite() && l >= 0.0) {
            return Err(CoreError::InvalidParam(format!("haze level {l} must be >= 0")));
        }
    }
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| config.paths.dataset_dir.clone())
        .unwrap_or_else(|| PathBuf::from("dataset"));
    ensure_dir(&dir)?;
    ensure_dir(&dir.join("patches"))?;
    let layout = config.patch_layout()?;
    let compand = config.compand_params()?;
    let patch_plan = plan(config.phantom.rows, config.phantom.cols, &layout)?;

    let mut manifest = DatasetManifest {
        seed: config.seed,
        phantom: config.phantom.clone(),
        haze: config.haze.clone(),
        n_frames: frames,
        levels: levels.to_vec(),
        clean_frames: Vec::new(),
        haze_frames: Vec::new(),
        mixed_frames: Vec::new(),
        tissue_patch_files: Vec::new(),
        haze_patch_files: Vec::new(),
    };

    let mut tissue_patch_idx = 0usize;
    let mut haze_patch_idx = 0usize;
    for frame_idx in 0..frames {
        // One child stream per frame keeps generation order-independent.
        let mut rng = SeededRng::new(child_seed(config.seed, frame_idx as u64));
        let clean = gen_tissue(&config.phantom, &mut rng)?;
        let haze = gen_haze(&config.haze, &mut rng, config.phantom.rows, config.phantom.cols)?;
        let clean_path = dir.join(format!("clean_{frame_idx:03}.urf"));
        clean.save_urf1(&clean_path)?;
        manifest.clean_frames.push(clean_path);
        let haze_path = dir.join(format!("haze_{frame_idx:03}.urf"));
        haze.save_urf1(&haze_path)?;
        manifest.haze_frames.push(haze_path);
        for &level in levels {
            let mixed = mix(&clean, &haze, level)?;
            let path = dir.join(format!("mixed_L{level:0.2}_{frame_idx:03}.urf"));
            mixed.save_urf1(&path)?;
            manifest.mixed_frames.push(MixedEntry {
                level,
                frame_index: frame_idx,
                path,
            });
        }
        // Companded training patches: tissue from every planned window, haze
        // energy-weighted over the same windows.
        let (clean_c, _) = encode(&clean, &compand)?;
        let (haze_c, _) = encode(&haze, &compand)?;
        let mut origins = Vec::new();
        for &r0 in &patch_plan.row_origins {
            for &c0 in &patch_plan.col_origins {
                origins.push((r0, c0));
            }
        }
        let mut haze_windows = Vec::new();
        for &o in &origins {
            let t = extract(&clean_c, o, layout.patch_rows(), layout.patch_cols())?;
            let path = dir.join(format!("patches/tissue_{tissue_patch_idx:04}.urf"));
            t.save_urf1(&path)?;
            manifest.tissue_patch_files.push(path);
            tissue_patch_idx += 1;
            haze_windows.push(extract(&haze_c, o, layout.patch_rows(), layout.patch_cols())?);
        }
        let energies: Vec<f64> = haze_windows.iter().map(|w| w.energy()).collect();
        let total: f64 = energies.iter().sum();
        for _ in 0..haze_windows.len() {
            let idx = if total > 0.0 {
                let mut pick = rng.next_uniform() * total;
                let mut chosen = haze_windows.len() - 1;
                for (i, &e) in energies.iter().enumerate() {
                    if pick < e {
                        chosen = i;
                        break;
                    }
                    pick -= e;
                }
                chosen
            } else {
                rng.next_index(haze_windows.len())
            };
            let path = dir.join(format!("patches/haze_{haze_patch_idx:04}.urf"));
            haze_windows[idx].save_urf1(&path)?;
            manifest.haze_patch_files.push(path);
            haze_patch_idx += 1;
        }
    }
    let manifest_json = serde_json::to_string_pretty(&manifest)?;
    fs::write(dir.join("manifest.json"), manifest_json)?;
    println!(
        "synth: {} clean, {} haze, {} mixed frames; {} tissue / {} haze patches -> {}",
        manifest.clean_frames.len(),
        manifest.haze_frames.len(),
        manifest.mixed_frames.len(),
        manifest.tissue_patch_files.len(),
        manifest.haze_patch_files.len(),
        dir.display()
    );
    Ok(())
}

pub fn cmd_train(
    config: &RunConfig,
    dataset: &Path,
    which: &str,
    out: Option<&Path>,
) -> Result<()> {
    let manifest = load_dataset_manifest(dataset.join("manifest.json"))?;
    let files = match which {
        "tissue" => &manifest.tissue_patch_files,
        "haze" => &manifest.haze_patch_files,
        other => {
            return Err(CoreError::InvalidParam(format!(
                "--which must be \"tissue\" or \"haze\", got {other:?}"
            )))
        }
    };
    if files.is_empty() {
        return Err(CoreError::InvalidParam(format!("dataset has no {which} patches")));
    }
    let resolve = |p: &Path| -> PathBuf {
        if p.is_absolute() || p.exists() {
            p.to_path_buf()
        } else {
            dataset.join(p.file_name().map(PathBuf::from).unwrap_or_default())
        }
    };
    let mut patches = Vec::with_capacity(files.len());
    for f in files {
        patches.push(RFGrid::load_urf1(resolve(f))?);
    }
    let layout = config.patch_layout()?;
    let shape = (layout.patch_rows(), layout.patch_cols());
    for p in &patches {
        if p.shape() != shape {
            return Err(CoreError::InvalidParam(format!(
                "patch file shape {}x{} does not match configured patch {}x{}",
                p.rows(),
                p.cols(),
                shape.0,
                shape.1
            )));
        }
    }
    let schedule = config.schedule()?;
    let mut rng = SeededRng::new(child_seed(config.seed, 0x7261_494e)); // "train" stream
    let mut net = TrainableScoreNet::init(
        config.arch_spec()?,
        shape.0,
        shape.1,
        schedule,
        config.training.t_min,
        &mut rng,
    )?;
    let opts = TrainOptions {
        epochs: config.training.epochs,
        batch_size: config.training.batch_size,
        learning_rate: config.training.learning_rate,
        augment: config.training.augment,
    };
    let curve = train(&mut net, &patches, &opts, &mut rng)?;
    let out_path = out.map(Path::to_path_buf).unwrap_or_else(|| {
        config
            .paths
            .checkpoint_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("."))
            .join(format!("{which}.hsnet"))
    });
    if let Some(parent) = out_path.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    let final_loss = curve.last().copied();
    save_checkpoint_file(&out_path, &SaveModel::Net(&net), opts.epochs, final_loss)?;
    // Loss curve CSV alongside the checkpoint: one row per batch.
    let mut csv = String::from("batch,loss\n");
    for (i, l) in curve.iter().enumerate() {
        csv.push_str(&format!("{i},{l:.8}\n"));
    }
    let csv_path = out_path.with_extension("loss.csv");
    fs::write(&csv_path, csv)?;
    println!(
        "train: {which} model ({} params) on {} patches, {} batches -> {}",
        net.param_count(),
        patches.len(),
        curve.len(),
        out_path.display()
    );
    Ok(())
}

fn load_model_checked(path: &Path, config: &RunConfig) -> Result<Checkpoint> {
    let checkpoint = load_checkpoint_file(path)?;
    let layout = config.patch_layout()?;
    if let Some((r, c)) = checkpoint.model.patch_shape() {
        if (r, c) != (layout.patch_rows(), layout.patch_cols()) {
            return Err(CoreError::InvalidParam(format!(
                "checkpoint {} patch shape {r}x{c} does not match configured patch {}x{}",
                path.display(),
                layout.patch_rows(),
                layout.patch_cols()
            )));
        }
    }
    let sigma = config.schedule()?.sigma();
    if (checkpoint.header.sigma - sigma).abs() > 1e-9 {
        return Err(CoreError::InvalidParam(format!(
            "checkpoint {} was built for sigma {}, config has {}",
            path.display(),
            checkpoint.header.sigma,
            sigma
        )));
    }
    Ok(checkpoint)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_dehaze(
    config: &RunConfig,
    input: &Path,
    tissue_path: &Path,
    haze_path: &Path,
    out_x: Option<&Path>,
    out_h: Option<&Path>,
    diagnostics: Option<&Path>,
    gamma: Option<f64>,
    threads: usize,
) -> Result<()> {
    let y = RFGrid::load_urf1(input)?;
    let tissue = load_model_checked(tissue_path, config)?;
    let haze = load_model_checked(haze_path, config)?;
    let mut cfg = config.dehaze_config(threads)?;
    if let Some(g) = gamma {
        cfg.gamma = g;
        cfg.validate()?;
    }
    let result = dehaze(&y, tissue.model.as_ref(), haze.model.as_ref(), &cfg)?;
    let out_dir = config
        .paths
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("."));
    ensure_dir(&out_dir)?;
    let x_path = out_x
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out_dir.join("x_hat.urf"));
    let h_path = out_h
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out_dir.join("h_hat.urf"));
    result.x_rf.save_urf1(&x_path)?;
    result.h_rf.save_urf1(&h_path)?;
    if let Some(diag_path) = diagnostics {
        let mut csv = String::from("step,t,residual_sq_norm,compand_out_of_range\n");
        for d in &result.diagnostics {
            csv.push_str(&format!(
                "{},{:.6},{:.8e},{}\n",
                d.step, d.t, d.residual_sq_norm, d.compand_out_of_range
            ));
        }
        fs::write(diag_path, csv)?;
    }
    println!(
        "dehaze: {} -> {} + {} ({} steps)",
        input.display(),
        x_path.display(),
        h_path.display(),
        result.diagnostics.len()
    );
    Ok(())
}

fn load_mask(path: &Path, frame_index: usize, rows: usize, cols: usize) -> Result<RoiMask> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("png") => RoiMask::load_png(path),
        Some("json") => {
            let keys = load_polygon_json(path)?;
            let key = keys
                .iter()
                .find(|k| k.frame == frame_index)
                .or_else(|| keys.first())
                .ok_or_else(|| CoreError::Format("polygon json has no entries".into()))?;
            Ok(rasterize_polygon(&key.vertices, rows, cols))
        }
        _ => Err(CoreError::Format(format!(
            "mask {} must be .png or .json",
            path.display()
        ))),
    }
}

fn bmode_matched(rf: &RFGrid, reference: &BModeImage) -> Result<BModeImage> {
    let img = log_compress(&envelope(rf)?, reference.dynamic_range())?;
    Ok(brightness_match(&img, reference).0)
}

struct MetricRow {
    frame: usize,
    level: f64,
    metric: &'static str,
    value: f64,
}

pub fn cmd_eval(config: &RunConfig, manifest_path: &Path, out: Option<&Path>) -> Result<()> {
    let manifest = load_eval_manifest(manifest_path)?;
    let mut rows: Vec<MetricRow> = Vec::new();
    let dynamic_range = 60.0;
    for (idx, pair) in manifest.pairs.iter().enumerate() {
        let (Some(mask_a_path), Some(mask_b_path)) = (&pair.mask_a, &pair.mask_b) else {
            eprintln!("warning: pair {idx} skipped (missing mask)");
            continue;
        };
        let clean = RFGrid::load_urf1(&pair.clean)?;
        let measurement = RFGrid::load_urf1(&pair.measurement)?;
        let dehazed = RFGrid::load_urf1(&pair.dehazed)?;
        let mask_a = load_mask(mask_a_path, pair.frame_index, clean.rows(), clean.cols())?;
        let mask_b = load_mask(mask_b_path, pair.frame_index, clean.rows(), clean.cols())?;
        if mask_a.count() == 0 || mask_b.count() == 0 {
            eprintln!("warning: pair {idx} skipped (empty mask)");
            continue;
        }
        let clean_bmode = log_compress(&envelope(&clean)?, dynamic_range)?;
        let meas_bmode = bmode_matched(&measurement, &clean_bmode)?;
        let dehazed_bmode = bmode_matched(&dehazed, &clean_bmode)?;
        let wall_values = |img: &BModeImage| -> Vec<f64> {
            mask_b.indices().map(|(r, c)| img.db().at(r, c)).collect()
        };
        let clean_wall = wall_values(&clean_bmode);
        let mut push = |metric: &'static str, value: f64| {
            rows.push(MetricRow {
                frame: idx,
                level: pair.level,
                metric,
                value,
            });
        };
        push("psnr_measurement", psnr(&meas_bmode, &clean_bmode)?);
        push("psnr_dehazed", psnr(&dehazed_bmode, &clean_bmode)?);
        push("gcnr_clean", gcnr(&clean_bmode, &mask_a, &mask_b, 256)?);
        push("gcnr_measurement", gcnr(&meas_bmode, &mask_a, &mask_b, 256)?);
        push("gcnr_dehazed", gcnr(&dehazed_bmode, &mask_a, &mask_b, 256)?);
        push(
            "ks_wall_measurement",
            ks_statistic(&wall_values(&meas_bmode), &clean_wall)?,
        );
        push(
            "ks_wall_dehazed",
            ks_statistic(&wall_values(&dehazed_bmode), &clean_wall)?,
        );
        push("fwhm_wall_clean", fwhm_lateral(clean_bmode.db(), &mask_b)?);
        push(
            "fwhm_wall_measurement",
            fwhm_lateral(meas_bmode.db(), &mask_b)?,
        );
        push("fwhm_wall_dehazed", fwhm_lateral(dehazed_bmode.db(), &mask_b)?);
    }
    // Per-level summaries: mean and std per metric.
    let mut csv = String::from("frame,level,metric,value\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{},{:.6}\n", r.frame, r.level, r.metric, r.value));
    }
    let mut levels: Vec<f64> = manifest.pairs.iter().map(|p| p.level).collect();
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    levels.dedup();
    let metrics = [
        "psnr_measurement",
        "psnr_dehazed",
        "gcnr_clean",
        "gcnr_measurement",
        "gcnr_dehazed",
        "ks_wall_measurement",
        "ks_wall_dehazed",
        "fwhm_wall_clean",
        "fwhm_wall_measurement",
        "fwhm_wall_dehazed",
    ];
    for &level in &levels {
        for metric in metrics {
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| r.level == level && r.metric == metric && r.value.is_finite())
                .map(|r| r.value)
                .collect();
            if values.is_empty() {
                continue;
            }
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / values.len() as f64;
            csv.push_str(&format!("mean,{level},{metric},{mean:.6}\n"));
            csv.push_str(&format!("std,{level},{metric},{:.6}\n", var.sqrt()));
        }
    }
    let out_path = out.map(Path::to_path_buf).unwrap_or_else(|| {
        config
            .paths
            .output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("."))
            .join("metrics.csv")
    });
    if let Some(parent) = out_path.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    let mut file = fs::File::create(&out_path)?;
    file.write_all(csv.as_bytes())?;
    println!("eval: {} rows -> {}", rows.len(), out_path.display());
    Ok(())
}

pub fn cmd_bmode(
    input: &Path,
    output: &Path,
    dynamic_range: f64,
    reference: Option<&Path>,
    csv: Option<&Path>,
) -> Result<()> {
    let rf = RFGrid::load_urf1(input)?;
    let mut img = log_compress(&envelope(&rf)?, dynamic_range)?;
    if let Some(ref_path) = reference {
        let ref_rf = RFGrid::load_urf1(ref_path)?;
        let ref_img = log_compress(&envelope(&ref_rf)?, dynamic_range)?;
        img = brightness_match(&img, &ref_img).0;
    }
    export_png(&img, output)?;
    if let Some(csv_path) = csv {
        let file = fs::File::create(csv_path)?;
        write_db_csv(&img, std::io::BufWriter::new(file))?;
    }
    println!("bmode: {} -> {}", input.display(), output.display());
    Ok(())
}
