use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use aqmp_core::dictionary::build_dictionary;
use aqmp_core::hpo::{
    self, pareto_indices, read_study_csv, write_study_csv, CodecStudy, OriginalSize, SearchSpace, StudyConfig,
    TpeConfig, Trial,
};
use aqmp_core::io::{read_png, write_png};
use aqmp_core::metrics::{compression_rate, evaluate, ssim_images};
use aqmp_core::{
    deserialize, encode_image, serialize, CodecParams, ColorMode, DictionaryBank, DictionaryCache, ImageBuffer,
    PixelFormat,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::{AtomsArgs, DecodeArgs, EncodeArgs, EvalArgs, OptimizeArgs, OriginalSizeArg, ReportArgs, SweepArgs};

fn emit(value: serde_json::Value) {
    println!("{value}");
}

fn require_file(path: &Path) -> CliResult {
    if !path.is_file() {
        return Err(CliError::io(format!("{}: no such file", path.display())));
    }
    Ok(())
}

fn require_parent(path: &Path) -> CliResult {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => {
            Err(CliError::io(format!("{}: directory does not exist", p.display())))
        }
        _ => Ok(()),
    }
}

fn original_bytes(img: &ImageBuffer, path: &Path, which: OriginalSizeArg) -> CliResult<usize> {
    Ok(match which {
        OriginalSizeArg::Raw => img.raw_len(),
        OriginalSizeArg::File => std::fs::metadata(path)?.len() as usize,
    })
}

fn resolve_mode(img: &ImageBuffer, mode: Option<ColorMode>) -> ColorMode {
    mode.unwrap_or_else(|| ColorMode::default_for(img.format()))
}

pub fn encode(a: EncodeArgs) -> CliResult {
    require_file(&a.input)?;
    require_parent(&a.output)?;
    let params =
        CodecParams::new(a.codec.max_error, a.codec.min_sparsity, a.codec.min_n, a.codec.max_n, a.codec.a_cols)?;
    let img = read_png(&a.input)?;
    let mode = resolve_mode(&img, a.mode);
    let bytes_in = original_bytes(&img, &a.input, a.original_size)?;

    let start = Instant::now();
    let bank = DictionaryBank::new(params.min_n, params.max_n, params.a_cols)?;
    let channels = encode_image(&img, mode, &params, &bank)?;
    let bytes = serialize(&channels, &params, mode)?;
    let seconds = start.elapsed().as_secs_f64();
    std::fs::write(&a.output, &bytes)?;

    let leaves: usize = channels.iter().map(|c| c.leaf_count()).sum();
    eprintln!(
        "encoded {}x{} {mode} image into {} bytes ({leaves} leaves) in {seconds:.2} s",
        img.width(),
        img.height(),
        bytes.len()
    );
    emit(json!({
        "bytes_in": bytes_in,
        "bytes_out": bytes.len(),
        "cr": compression_rate(bytes_in, bytes.len())?,
        "seconds": seconds,
    }));
    Ok(())
}

pub fn decode(a: DecodeArgs) -> CliResult {
    require_file(&a.input)?;
    require_parent(&a.output)?;
    let bytes = std::fs::read(&a.input)?;
    let start = Instant::now();
    let file = deserialize(&bytes)?;
    let img = file.decode(&file.bank()?)?;
    let seconds = start.elapsed().as_secs_f64();
    write_png(&a.output, &img)?;
    eprintln!("decoded {}x{} {} image in {seconds:.2} s", img.width(), img.height(), file.mode);
    emit(json!({
        "width": img.width(),
        "height": img.height(),
        "mode": file.mode.to_string(),
        "seconds": seconds,
    }));
    Ok(())
}

pub fn eval(a: EvalArgs) -> CliResult {
    require_file(&a.original)?;
    require_file(&a.reconstructed)?;
    let x = read_png(&a.original)?;
    let y = read_png(&a.reconstructed)?;
    emit(json!({ "ssim": ssim_images(&x, &y)? }));
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct SweepRow {
    max_error: f64,
    min_sparsity: f64,
    min_n: usize,
    max_n: usize,
    a_cols: usize,
    cr: f64,
    ssim: f64,
    seconds: f64,
}

pub fn sweep(a: SweepArgs) -> CliResult {
    require_file(&a.input)?;
    require_parent(&a.output)?;
    let mut grid = Vec::new();
    for &max_error in &a.max_error {
        for &min_sparsity in &a.min_sparsity {
            for &min_n in &a.min_n {
                for &max_n in &a.max_n {
                    for &a_cols in &a.a_cols {
                        grid.push(CodecParams::new(max_error, min_sparsity, min_n, max_n, a_cols)?);
                    }
                }
            }
        }
    }
    let img = read_png(&a.input)?;
    let mode = resolve_mode(&img, a.mode);
    let original = original_bytes(&img, &a.input, a.original_size)?;
    let cache = DictionaryCache::new();

    let mut w = csv::Writer::from_path(&a.output)?;
    for (i, p) in grid.iter().enumerate() {
        let start = Instant::now();
        let bank = cache.bank(p.min_n, p.max_n, p.a_cols)?;
        let (e, _, _) = evaluate(&img, mode, p, &bank, original)?;
        let seconds = if a.omit_timing { 0.0 } else { start.elapsed().as_secs_f64() };
        let row = SweepRow {
            max_error: p.max_error,
            min_sparsity: p.min_sparsity,
            min_n: p.min_n,
            max_n: p.max_n,
            a_cols: p.a_cols,
            cr: e.compression_rate,
            ssim: e.ssim,
            seconds,
        };
        w.serialize(&row)?;
        w.flush()?;
        eprintln!("[{}/{}] {p:?}: cr {:.3} ssim {:.4}", i + 1, grid.len(), e.compression_rate, e.ssim);
        emit(serde_json::to_value(&row)?);
    }
    Ok(())
}

pub fn optimize(a: OptimizeArgs) -> CliResult {
    require_file(&a.input)?;
    require_parent(&a.output)?;
    if a.trials == 0 {
        return Err(CliError::usage("--trials must be at least 1"));
    }
    let tpe = TpeConfig { gamma: a.gamma, n_candidates: a.candidates, n_startup: a.startup };
    tpe.validate()?;
    let resume = if a.resume && a.output.exists() { read_study_csv(&a.output)? } else { Vec::new() };
    if resume.len() > a.trials {
        return Err(CliError::usage(format!("{} already holds {} trials", a.output.display(), resume.len())));
    }

    let img = read_png(&a.input)?;
    let mode = resolve_mode(&img, a.mode);
    let original = original_bytes(&img, &a.input, a.original_size)?;
    let config = StudyConfig { sampler: a.sampler, n_trials: a.trials, seed: a.seed, tpe };
    let study =
        CodecStudy { space: SearchSpace::default(), config, mode, original_size: OriginalSize::Bytes(original) };
    let cache = DictionaryCache::new();
    if !resume.is_empty() {
        eprintln!("resuming after {} trials", resume.len());
    }

    let omit_timing = a.omit_timing;
    let output = a.output.clone();
    let outcome = hpo::optimize(&img, &study, &cache, resume, |trial, all| {
        let mut rows: Vec<Trial> = all.to_vec();
        if omit_timing {
            rows.iter_mut().for_each(|t| t.seconds = 0.0);
        }
        write_study_csv(&output, &rows)?;
        let (cr, s) = trial.objectives.map_or((None, None), |o| (Some(o[0]), Some(o[1])));
        eprintln!(
            "trial {:>3}/{}: {} cr {} ssim {}",
            trial.number + 1,
            a.trials,
            trial.error.as_deref().map_or("ok".to_string(), |e| format!("failed ({e})")),
            cr.map_or("-".into(), |v| format!("{v:.3}")),
            s.map_or("-".into(), |v| format!("{v:.4}")),
        );
        emit(json!({
            "trial": trial.number,
            "params": trial.point,
            "cr": cr,
            "ssim": s,
            "seconds": trial.seconds,
            "status": if trial.is_complete() { "complete" } else { "failed" },
        }));
        Ok(())
    })?;

    let front: Vec<_> = outcome.front_trials().iter().map(|t| t.number).collect();
    eprintln!(
        "pareto front: {} of {} trials, hypervolume {:.3}",
        front.len(),
        outcome.trials.len(),
        outcome.hypervolume()
    );
    emit(json!({ "trials": outcome.trials.len(), "front": front, "hypervolume": outcome.hypervolume() }));
    Ok(())
}

#[derive(Debug, Serialize)]
struct ReportRow<'a> {
    source: &'a str,
    cr: f64,
    ssim: f64,
    pareto: bool,
}

/// Reads every row with numeric `cr` and `ssim` columns; other columns are
/// ignored and rows with empty objectives (failed trials) are skipped.
fn read_objectives(path: &Path) -> CliResult<Vec<[f64; 2]>> {
    require_file(path)?;
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::usage(format!("{}: no '{name}' column", path.display())))
    };
    let (ci, si) = (col("cr")?, col("ssim")?);
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let (c, s) = (rec.get(ci).unwrap_or("").trim(), rec.get(si).unwrap_or("").trim());
        if c.is_empty() || s.is_empty() {
            continue;
        }
        let parse = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| CliError::usage(format!("{}: row {}: '{v}' is not a number", path.display(), line + 1)))
        };
        out.push([parse(c)?, parse(s)?]);
    }
    Ok(out)
}

pub fn report(a: ReportArgs) -> CliResult {
    if a.studies.is_empty() && a.jpeg.is_empty() {
        return Err(CliError::usage("nothing to report: pass --study and/or --jpeg"));
    }
    require_parent(&a.output)?;
    let mut sources: BTreeMap<String, Vec<[f64; 2]>> = BTreeMap::new();
    for (kind, paths) in [("aqmp", &a.studies), ("jpeg", &a.jpeg)] {
        for p in paths {
            let name = format!("{kind}:{}", p.file_stem().map(|s| s.to_string_lossy()).unwrap_or_default());
            sources.entry(name).or_default().extend(read_objectives(p)?);
        }
    }
    let mut w = csv::Writer::from_path(&a.output)?;
    for (source, pts) in &sources {
        let front = pareto_indices(pts);
        for (i, p) in pts.iter().enumerate() {
            w.serialize(ReportRow { source, cr: p[0], ssim: p[1], pareto: front.contains(&i) })?;
        }
        let front_pts: Vec<[f64; 2]> = front.iter().map(|&i| pts[i]).collect();
        emit(json!({
            "source": source,
            "points": pts.len(),
            "front": front_pts,
            "hypervolume": hpo::hypervolume(pts),
        }));
    }
    w.flush()?;
    eprintln!("wrote {} sources to {}", sources.len(), a.output.display());
    Ok(())
}

pub fn atoms(a: AtomsArgs) -> CliResult {
    require_parent(&a.output)?;
    if a.scale == 0 || a.scale > 64 {
        return Err(CliError::usage("--scale must be between 1 and 64"));
    }
    let dict = build_dictionary(a.n, a.a_cols)?;
    let cols = (a.a_cols as f64).sqrt().ceil() as usize;
    let rows = a.a_cols.div_ceil(cols);
    let cell = a.n * a.scale + 1;
    let (w, h) = (cols * cell + 1, rows * cell + 1);
    let mut pixels = vec![255u8; w * h];
    for (i, atom) in dict.atoms().enumerate() {
        let (lo, hi) = atom.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        let span = if hi - lo > 1e-12 { hi - lo } else { 1.0 };
        let (ox, oy) = ((i % cols) * cell + 1, (i / cols) * cell + 1);
        for y in 0..a.n * a.scale {
            for x in 0..a.n * a.scale {
                let v = atom[(y / a.scale) * a.n + x / a.scale];
                pixels[(oy + y) * w + ox + x] = (((v - lo) / span) * 255.0).round() as u8;
            }
        }
    }
    write_png(&a.output, &ImageBuffer::new(w, h, PixelFormat::Gray8, pixels)?)?;
    eprintln!("wrote {} atoms of size {}x{} to {}", a.a_cols, a.n, a.n, a.output.display());
    emit(json!({ "atoms": a.a_cols, "n": a.n, "width": w, "height": h }));
    Ok(())
}
