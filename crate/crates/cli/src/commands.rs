use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use eercf_core::losses::{check_inter_loss, check_intra_loss, check_total_loss};
use eercf_core::ranking::{evaluate_video_to_text, queries_from_manifest, search_batch, RankingRecord};
use eercf_core::store::write_gallery;
use eercf_core::testkit::{generate, random_unit_batch};
use eercf_core::{
    evaluate, flops_table, DistractorMode, FusionWeights, LossConfig, Manifest, Metrics, MethodKind,
    Preset, SearchConfig, SynthConfig, TextRecord, TibConfig,
};
use serde::Serialize;

use crate::args::{
    Command, Direction, EvalArgs, FlopsArgs, Format, IngestArgs, LosscheckArgs, Mode, RankArgs,
    SearchArgs, SynthArgs,
};
use crate::ingest::{read_texts, read_videos};
use crate::{Failure, THREADS_ENV};

type Result<T> = std::result::Result<T, Failure>;

// queries ranked per parallel batch before their lines are written
const SEARCH_CHUNK: usize = 256;

pub fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(a, out),
        Command::Search(a) => search(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Flops(a) => flops(a, out),
        Command::Synth(a) => synth(a, out),
        Command::Losscheck(a) => losscheck(a, out),
    }
}

fn workers() -> Result<usize> {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n.min(available)),
            _ => Err(Failure::Invalid(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(available),
    }
}

/// Names the file in I/O errors, which otherwise only carry the OS message.
fn at<T>(path: &Path, r: eercf_core::Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        eercf_core::Error::Io(io) => {
            Failure::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display())))
        }
        other => Failure::Core(other),
    })
}

fn three(values: &[f64], flag: &str) -> Result<[f64; 3]> {
    values
        .try_into()
        .map_err(|_| Failure::Invalid(format!("--{flag} takes three comma-separated values, got {}", values.len())))
}

fn search_config(rank: &RankArgs) -> Result<SearchConfig> {
    let [c, f, p] = three(&rank.weights, "weights")?;
    let cfg = SearchConfig {
        top_k: rank.top_k,
        fusion: FusionWeights::new(c, f, p)?,
        tib: TibConfig::new(rank.pi_frame, rank.pi_patch)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn ingest(a: IngestArgs, out: &mut dyn Write) -> Result<()> {
    let gallery = at(&a.videos, read_videos(&a.videos))?;
    let (dim, texts) = at(&a.texts, read_texts(&a.texts))?;
    if dim != gallery.dim() {
        return Err(Failure::Invalid(format!("texts have dimension {dim}, videos {}", gallery.dim())));
    }
    let mut manifest = at(&a.manifest, Manifest::load(&a.manifest))?;
    // counts describe the written files, not the inputs
    manifest.counts = None;
    manifest.validate(&gallery, &texts)?;
    at(&a.out, write_gallery(gallery.videos(), &texts, &manifest, &a.out))?;
    writeln!(
        out,
        "wrote {} videos, {} texts, {} pairs (D = {}) to {}",
        gallery.len(),
        texts.len(),
        manifest.pairs.len(),
        gallery.dim(),
        a.out.display()
    )?;
    Ok(())
}

fn search(a: SearchArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = search_config(&a.rank)?;
    let workers = workers()?;
    let gallery = at(&a.gallery, read_videos(&a.gallery))?;
    let (_, texts) = at(&a.texts, read_texts(&a.texts))?;
    let selected: Vec<&TextRecord> = if a.text_ids.is_empty() {
        texts.iter().collect()
    } else {
        a.text_ids
            .iter()
            .map(|id| {
                texts
                    .iter()
                    .find(|t| t.id() == id)
                    .ok_or_else(|| Failure::Invalid(format!("unknown text id {id:?}")))
            })
            .collect::<Result<_>>()?
    };

    let mut file;
    let sink: &mut dyn Write = match &a.out {
        Some(path) => {
            file = BufWriter::new(at(path, File::create(path).map_err(Into::into))?);
            &mut file
        }
        None => out,
    };
    for chunk in selected.chunks(SEARCH_CHUNK) {
        let lists = search_batch(chunk, &gallery, &cfg, workers)?;
        for (text, list) in chunk.iter().zip(&lists) {
            serde_json::to_writer(&mut *sink, &RankingRecord::new(text.id(), list))?;
            sink.write_all(b"\n")?;
        }
    }
    sink.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct EvalReport<'a> {
    direction: &'a str,
    top_k: usize,
    #[serde(flatten)]
    metrics: Metrics,
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = search_config(&a.rank)?;
    let workers = workers()?;
    let gallery = at(&a.gallery, read_videos(&a.gallery))?;
    let (_, texts) = at(&a.texts, read_texts(&a.texts))?;
    let manifest = at(&a.manifest, Manifest::load(&a.manifest))?;
    manifest.validate(&gallery, &texts)?;
    let (direction, metrics) = match a.direction {
        Direction::T2v => {
            let queries = queries_from_manifest(&manifest, &texts, &gallery)?;
            ("t2v", evaluate(&queries, &gallery, &cfg, workers)?)
        }
        Direction::V2t => ("v2t", evaluate_video_to_text(&manifest, &texts, &gallery, &cfg, workers)?),
    };
    match a.format {
        Format::Json => {
            serde_json::to_writer(&mut *out, &EvalReport { direction, top_k: cfg.top_k, metrics })?;
            writeln!(out)?;
        }
        Format::Text => {
            writeln!(out, "direction  {direction}")?;
            writeln!(out, "queries    {}", metrics.queries)?;
            writeln!(out, "top-k      {}", cfg.top_k)?;
            writeln!(out, "R@1        {:.1}", metrics.r_at_1)?;
            writeln!(out, "R@5        {:.1}", metrics.r_at_5)?;
            writeln!(out, "R@10       {:.1}", metrics.r_at_10)?;
            writeln!(out, "Mean       {:.1}", metrics.mean)?;
        }
    }
    Ok(())
}

fn flops(a: FlopsArgs, out: &mut dyn Write) -> Result<()> {
    let preset = Preset::from_name(&a.preset)
        .ok_or_else(|| Failure::Invalid(format!("unknown preset {:?}", a.preset)))?;
    let mut input = preset.input();
    let overrides = [
        (&mut input.gallery, a.gallery),
        (&mut input.frames, a.frames),
        (&mut input.words, a.words),
        (&mut input.patches, a.patches),
        (&mut input.rerank, a.rerank),
        (&mut input.dim, a.dim),
    ];
    for (field, value) in overrides {
        if let Some(v) = value {
            *field = v;
        }
    }
    input.validate()?;

    let entries: Vec<_> = if a.method.is_empty() {
        preset.entries().into_iter().map(|(label, kind, _)| (label, kind, input)).collect()
    } else {
        a.method
            .iter()
            .map(|name| {
                MethodKind::from_name(name)
                    .map(|kind| (name.clone(), kind, input))
                    .ok_or_else(|| Failure::Invalid(format!("unknown method {name:?}")))
            })
            .collect::<Result<_>>()?
    };
    let rows = flops_table(&entries)?;

    match a.format {
        Format::Json => {
            let report = serde_json::json!({ "input": input, "rows": rows });
            serde_json::to_writer(&mut *out, &report)?;
            writeln!(out)?;
        }
        Format::Text => {
            writeln!(
                out,
                "N={} Nv={} Nt={} Np={} Nr={} D={}",
                input.gallery, input.frames, input.words, input.patches, input.rerank, input.dim
            )?;
            let width = rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(6);
            writeln!(out, "{:<width$}  {:<16}  {:>12}  {:>8}  {:>8}  formula", "method", "kind", "MACs/pair", "approx", "ratio")?;
            for r in &rows {
                writeln!(
                    out,
                    "{:<width$}  {:<16}  {:>12.1}  {:>7.1}k  {:>7.1}x  {}",
                    r.label,
                    r.method.name(),
                    r.per_pair,
                    r.per_pair / 1e3,
                    r.ratio,
                    r.formula
                )?;
            }
        }
    }
    Ok(())
}

fn synth(a: SynthArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = SynthConfig {
        videos: a.videos,
        queries: a.queries,
        dim: a.dim,
        frames: a.frames,
        patches_per_frame: a.patches,
        seed: a.seed,
        noise: a.noise,
        mode: match a.mode {
            Mode::None => DistractorMode::None,
            Mode::CoarseConfusable => DistractorMode::CoarseConfusable,
            Mode::PatchNoise => DistractorMode::PatchNoise,
        },
    };
    let data = generate(&cfg)?;
    at(&a.out, write_gallery(data.gallery.videos(), &data.texts, &data.manifest, &a.out))?;
    writeln!(
        out,
        "wrote {} videos, {} texts ({} mode, seed {}) to {}",
        data.gallery.len(),
        data.texts.len(),
        cfg.mode.name(),
        cfg.seed,
        a.out.display()
    )?;
    Ok(())
}

#[derive(Serialize)]
struct CheckRow {
    loss: &'static str,
    error: f64,
    tolerance: f64,
    pass: bool,
}

fn losscheck(a: LosscheckArgs, out: &mut dyn Write) -> Result<()> {
    if !(1e-6..=1e-3).contains(&a.eps) {
        return Err(Failure::Invalid(format!("--eps must lie in [1e-6, 1e-3], got {}", a.eps)));
    }
    if a.seeds == 0 {
        return Err(Failure::Invalid("--seeds must be at least 1".into()));
    }
    let cfg = LossConfig {
        alpha: a.alpha,
        beta: a.beta,
        level_weights: three(&a.lambda, "lambda")?,
        temperature: a.temperature,
    };
    cfg.validate()?;

    let (mut inter, mut intra, mut total) = (0f64, 0f64, 0f64);
    for seed in 0..a.seeds {
        let batch = random_unit_batch(a.batch, a.dim, seed)?;
        inter = inter.max(check_inter_loss(&batch, cfg.temperature, a.eps)?);
        intra = intra.max(check_intra_loss(&batch, cfg.alpha, a.eps)?);
        let level = |offset: u64| random_unit_batch(a.batch, a.dim, offset + seed);
        let levels = [level(1000)?, level(2000)?, level(3000)?];
        total = total.max(check_total_loss(&levels, &cfg, a.eps)?);
    }
    let rows: Vec<CheckRow> = [("inter", inter), ("intra", intra), ("total", total)]
        .into_iter()
        .map(|(loss, error)| CheckRow { loss, error, tolerance: a.tolerance, pass: error < a.tolerance })
        .collect();

    match a.format {
        Format::Json => {
            serde_json::to_writer(&mut *out, &rows)?;
            writeln!(out)?;
        }
        Format::Text => {
            writeln!(
                out,
                "B={} D={} seeds={} eps={:e} temperature={}",
                a.batch, a.dim, a.seeds, a.eps, cfg.temperature
            )?;
            writeln!(out, "{:<6}  {:>10}  {:>9}  result", "loss", "max error", "tolerance")?;
            for r in &rows {
                writeln!(
                    out,
                    "{:<6}  {:>10.2e}  {:>9.0e}  {}",
                    r.loss,
                    r.error,
                    r.tolerance,
                    if r.pass { "PASS" } else { "FAIL" }
                )?;
            }
        }
    }
    if rows.iter().all(|r| r.pass) {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}
