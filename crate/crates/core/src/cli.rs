//! Command-line surface: batch morph generation, detector training,
//! adversarial perturbation, similarity metrics and ROC evaluation.
//!
//! Settings resolve in three layers: built-in defaults, then an optional
//! TOML config file (`--config`), then explicit flags. Every run prints
//! its resolved configuration. Batch commands never abort on one bad
//! item; failures land in the manifest and the exit code is 1 (partial).
//! Usage and configuration problems exit with 2.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Deserialize;

use crate::detector::{self, DetectorModel, Label, TrainConfig};
use crate::error::{Error, Result};
use crate::geometry::{convex_hull, LandmarkSet};
use crate::image::{minmax_absdiff_map, Image};
use crate::metrics::{
    auc, embedding_distance, hull_crop, roc, ssim, ssim_map, ScoreSet, SubprocessProvider,
    WaveletBasebandProvider,
};
use crate::morph::{generate_morph, MorphConfig};
use crate::perturb::{perturb, PerturbConfig};
use crate::wavelet::{packet_decompose, subband_montage, WaveletFamily};

#[derive(Parser)]
#[command(
    name = "morphlet",
    version,
    about = "Wavelet-domain face morphing, adversarial perturbation and evaluation"
)]
struct Cli {
    /// Optional TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for everything stochastic (detector training splits/shuffles).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for batch commands (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate wavelet morphs for a CSV of image/landmark pairs.
    Morph(MorphArgs),
    /// Train the built-in morph detector on two directories of PNGs.
    TrainDetector(TrainArgs),
    /// Adversarially perturb morphs against a trained detector.
    Perturb(PerturbArgs),
    /// Similarity metrics between two images.
    Metrics(MetricsArgs),
    /// ROC/AUC evaluation of a score CSV.
    Eval(EvalArgs),
}

#[derive(Args)]
struct MorphArgs {
    /// CSV with header image_i,landmarks_i,image_j,landmarks_j,output_stem;
    /// relative paths resolve against the CSV's directory.
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Landmark averaging weight towards subject J.
    #[arg(long)]
    alpha: Option<f64>,
    /// Wavelet family: haar or db2.
    #[arg(long)]
    wavelet: Option<String>,
    /// Packet decomposition depth.
    #[arg(long)]
    levels: Option<usize>,
    /// Feather radius in pixels for the hull splice.
    #[arg(long)]
    feather: Option<f64>,
    /// Also write an 8x8 sub-band montage PNG per pair.
    #[arg(long, default_value_t = false)]
    dump_subbands: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// Directory of bona fide PNGs.
    #[arg(long)]
    bonafide: PathBuf,
    /// Directory of morph PNGs.
    #[arg(long)]
    morphs: PathBuf,
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Args)]
struct PerturbArgs {
    /// Input PNGs or directories of PNGs.
    #[arg(long, num_args = 1.., required = true)]
    inputs: Vec<PathBuf>,
    /// Trained detector model file.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Step size in pixel units.
    #[arg(long)]
    beta: Option<f64>,
    /// L-infinity budget in pixel units.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Total-variation weight.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// Write the local SSIM map (rescaled to 8 bits) to this PNG.
    #[arg(long)]
    ssim_map: Option<PathBuf>,
    /// Write the min-max normalized absolute difference map to this PNG.
    #[arg(long)]
    diff_map: Option<PathBuf>,
    /// Landmark JSON; metrics are additionally computed over the hull crop.
    #[arg(long)]
    hull: Option<PathBuf>,
    /// External embedding command (whitespace-split; the image path is
    /// appended as the final argument). Requires --embed-dim.
    #[arg(long, requires = "embed_dim")]
    embed_cmd: Option<String>,
    /// Output dimension of the external embedding command.
    #[arg(long)]
    embed_dim: Option<usize>,
    /// Use the built-in wavelet-baseband embedding instead.
    #[arg(long, conflicts_with = "embed_cmd", default_value_t = false)]
    embed_builtin: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// CSV with header score,label (label 1 = positive).
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

/// Optional config file; unknown keys are rejected so typos surface
/// as configuration errors instead of being silently ignored.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    seed: Option<u64>,
    workers: Option<usize>,
    #[serde(default)]
    morph: MorphFileConfig,
    #[serde(default, rename = "train-detector")]
    train_detector: TrainFileConfig,
    #[serde(default)]
    perturb: PerturbFileConfig,
    #[serde(default)]
    metrics: MetricsFileConfig,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct MorphFileConfig {
    alpha: Option<f64>,
    wavelet: Option<String>,
    levels: Option<usize>,
    feather: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct TrainFileConfig {
    epochs: Option<usize>,
    learning_rate: Option<f64>,
    batch_size: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct PerturbFileConfig {
    beta: Option<f64>,
    epsilon: Option<f64>,
    lambda: Option<f64>,
    iterations: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct MetricsFileConfig {
    embed_cmd: Option<String>,
    embed_dim: Option<usize>,
}

/// Entry point for the `morphlet` binary. Returns the process exit code:
/// 0 success, 1 partial (per-item failures), 2 usage or config error.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Internal(_) => 1,
                _ => 2,
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    let file_cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            toml::from_str::<FileConfig>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };
    let seed = cli.seed.or(file_cfg.seed).unwrap_or(42);
    let workers = cli.workers.or(file_cfg.workers);

    match cli.command {
        Command::Morph(args) => cmd_morph(args, &file_cfg.morph, seed, workers),
        Command::TrainDetector(args) => cmd_train_detector(args, &file_cfg.train_detector, seed),
        Command::Perturb(args) => cmd_perturb(args, &file_cfg.perturb, seed, workers),
        Command::Metrics(args) => cmd_metrics(args, &file_cfg.metrics, seed),
        Command::Eval(args) => cmd_eval(args, seed),
    }
}

fn thread_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}

fn ensure_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Debug, Clone, serde::Serialize, Deserialize)]
struct PairRow {
    image_i: String,
    landmarks_i: String,
    image_j: String,
    landmarks_j: String,
    output_stem: String,
}

fn resolve_rel(base: &Path, p: &str) -> PathBuf {
    let path = Path::new(p);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

fn cmd_morph(
    args: MorphArgs,
    file_cfg: &MorphFileConfig,
    seed: u64,
    workers: Option<usize>,
) -> Result<i32> {
    let cfg = MorphConfig {
        alpha: args.alpha.or(file_cfg.alpha).unwrap_or(0.5),
        family: WaveletFamily::parse(
            args.wavelet
                .as_deref()
                .or(file_cfg.wavelet.as_deref())
                .unwrap_or("haar"),
        )?,
        levels: args.levels.or(file_cfg.levels).unwrap_or(3),
        feather: args.feather.or(file_cfg.feather).unwrap_or(0.0),
    };
    println!("# morphlet morph");
    println!("# seed = {seed}");
    println!("# workers = {}", workers.map_or("default".into(), |w| w.to_string()));
    println!("# pairs = {}", args.pairs.display());
    println!("# out-dir = {}", args.out_dir.display());
    println!(
        "# alpha = {} | wavelet = {} | levels = {} | feather = {}",
        cfg.alpha,
        cfg.family.name(),
        cfg.levels,
        cfg.feather
    );

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(&args.pairs)
        .map_err(|e| Error::format(&args.pairs, format!("pairs csv: {e}")))?;
    let mut rows: Vec<std::result::Result<PairRow, String>> = Vec::new();
    for (i, row) in reader.deserialize::<PairRow>().enumerate() {
        match row {
            Ok(r) => rows.push(Ok(r)),
            Err(e) => rows.push(Err(format!("row {i}: {e}"))),
        }
    }
    if rows.is_empty() {
        return Err(Error::Config(format!(
            "{}: pairs file has no rows",
            args.pairs.display()
        )));
    }
    ensure_out_dir(&args.out_dir)?;
    let base = args
        .pairs
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();

    struct Outcome {
        stem: String,
        result: std::result::Result<[String; 3], String>,
    }

    let process = |row: &std::result::Result<PairRow, String>| -> Outcome {
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                return Outcome {
                    stem: String::new(),
                    result: Err(e.clone()),
                }
            }
        };
        let run = || -> Result<[String; 3]> {
            let img_i = Image::load(resolve_rel(&base, &row.image_i))?;
            let img_j = Image::load(resolve_rel(&base, &row.image_j))?;
            let lms_i = LandmarkSet::load_json(resolve_rel(&base, &row.landmarks_i))?;
            let lms_j = LandmarkSet::load_json(resolve_rel(&base, &row.landmarks_j))?;
            let result = generate_morph(&img_i, &img_j, &lms_i, &lms_j, &cfg)?;
            let raw_name = format!("{}_raw.png", row.output_stem);
            let on_i_name = format!("{}_onI.png", row.output_stem);
            let on_j_name = format!("{}_onJ.png", row.output_stem);
            result.raw_morph.save(args.out_dir.join(&raw_name))?;
            result.on_source.save(args.out_dir.join(&on_i_name))?;
            result.on_destination.save(args.out_dir.join(&on_j_name))?;
            if args.dump_subbands {
                let gray = result.raw_morph.to_grayscale();
                let div = 1usize << cfg.levels;
                let ch = gray.height() / div * div;
                let cw = gray.width() / div * div;
                let window = gray.crop(
                    (gray.height() - ch) / 2,
                    (gray.width() - cw) / 2,
                    ch,
                    cw,
                )?;
                let grid = packet_decompose(&window.channel_plane(0), cfg.levels, cfg.family)?;
                subband_montage(&grid)
                    .save(args.out_dir.join(format!("{}_subbands.png", row.output_stem)))?;
            }
            // Manifest records names relative to the output directory so
            // the run is relocatable.
            Ok([raw_name, on_i_name, on_j_name])
        };
        Outcome {
            stem: row.output_stem.clone(),
            result: run().map_err(|e| e.to_string()),
        }
    };

    let pool = thread_pool(workers)?;
    let outcomes: Vec<Outcome> = pool.install(|| rows.par_iter().map(process).collect());

    let manifest_path = args.out_dir.join("manifest.csv");
    let mut writer = csv::Writer::from_path(&manifest_path)
        .map_err(|e| Error::format(&manifest_path, format!("manifest: {e}")))?;
    writer
        .write_record(["stem", "status", "raw", "on_i", "on_j", "error"])
        .map_err(|e| Error::format(&manifest_path, format!("manifest: {e}")))?;
    let mut failures = 0;
    for o in &outcomes {
        let record = match &o.result {
            Ok([raw, on_i, on_j]) => {
                [o.stem.clone(), "ok".into(), raw.clone(), on_i.clone(), on_j.clone(), String::new()]
            }
            Err(e) => {
                failures += 1;
                [o.stem.clone(), "error".into(), String::new(), String::new(), String::new(), e.clone()]
            }
        };
        writer
            .write_record(&record)
            .map_err(|e| Error::format(&manifest_path, format!("manifest: {e}")))?;
    }
    writer
        .flush()
        .map_err(|e| Error::io(&manifest_path, e))?;

    println!(
        "pairs={} ok={} failed={} manifest={}",
        outcomes.len(),
        outcomes.len() - failures,
        failures,
        manifest_path.display()
    );
    Ok(if failures == 0 { 0 } else { 1 })
}

fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn cmd_train_detector(args: TrainArgs, file_cfg: &TrainFileConfig, seed: u64) -> Result<i32> {
    let cfg = TrainConfig {
        learning_rate: args
            .learning_rate
            .or(file_cfg.learning_rate)
            .unwrap_or(TrainConfig::default().learning_rate),
        epochs: args.epochs.or(file_cfg.epochs).unwrap_or(TrainConfig::default().epochs),
        batch_size: args
            .batch_size
            .or(file_cfg.batch_size)
            .unwrap_or(TrainConfig::default().batch_size),
        seed,
    };
    println!("# morphlet train-detector");
    println!("# seed = {seed}");
    println!("# bonafide = {}", args.bonafide.display());
    println!("# morphs = {}", args.morphs.display());
    println!("# out = {}", args.out.display());
    println!(
        "# epochs = {} | learning-rate = {} | batch-size = {}",
        cfg.epochs, cfg.learning_rate, cfg.batch_size
    );

    let bona_files = list_pngs(&args.bonafide)?;
    let morph_files = list_pngs(&args.morphs)?;
    if bona_files.is_empty() || morph_files.is_empty() {
        return Err(Error::Data(format!(
            "need PNGs in both class directories ({} bona fide, {} morphs)",
            bona_files.len(),
            morph_files.len()
        )));
    }

    let load_all = |files: &[PathBuf]| -> Result<Vec<Image>> {
        files.iter().map(Image::load).collect()
    };
    let bona = load_all(&bona_files)?;
    let morphs = load_all(&morph_files)?;

    // Fixed 80/20 split per class by seeded shuffle.
    let split = |n: usize, salt: u64| -> (Vec<usize>, Vec<usize>) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ salt);
        idx.shuffle(&mut rng);
        let cut = (n * 4).div_ceil(5).min(n.max(1) - 1).max(1);
        (idx[..cut].to_vec(), idx[cut..].to_vec())
    };
    let (bona_train_idx, bona_test_idx) = split(bona.len(), 0x626f6e61);
    let (morph_train_idx, morph_test_idx) = split(morphs.len(), 0x6d6f7270);
    let pick = |set: &[Image], idx: &[usize]| -> Vec<Image> {
        idx.iter().map(|&i| set[i].clone()).collect()
    };
    let bona_train = pick(&bona, &bona_train_idx);
    let bona_test = pick(&bona, &bona_test_idx);
    let morph_train = pick(&morphs, &morph_train_idx);
    let morph_test = pick(&morphs, &morph_test_idx);

    let model = detector::train(&bona_train, &morph_train, &cfg)?;
    model.save(&args.out)?;

    let accuracy = |bona: &[Image], morphs: &[Image]| -> f64 {
        let mut correct = 0usize;
        for img in bona {
            if model.classify(img) == Label::BonaFide {
                correct += 1;
            }
        }
        for img in morphs {
            if model.classify(img) == Label::Morph {
                correct += 1;
            }
        }
        correct as f64 / (bona.len() + morphs.len()).max(1) as f64
    };
    println!(
        "train_accuracy={:.6} holdout_accuracy={:.6} model={}",
        accuracy(&bona_train, &morph_train),
        accuracy(&bona_test, &morph_test),
        args.out.display()
    );
    Ok(0)
}

fn collect_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            files.extend(list_pngs(input)?);
        } else if input.exists() {
            files.push(input.clone());
        } else {
            return Err(Error::Config(format!(
                "input {} does not exist",
                input.display()
            )));
        }
    }
    Ok(files)
}

fn cmd_perturb(
    args: PerturbArgs,
    file_cfg: &PerturbFileConfig,
    seed: u64,
    workers: Option<usize>,
) -> Result<i32> {
    let defaults = PerturbConfig::default();
    let cfg = PerturbConfig {
        beta: args.beta.or(file_cfg.beta).unwrap_or(defaults.beta),
        epsilon: args.epsilon.or(file_cfg.epsilon).unwrap_or(defaults.epsilon),
        lambda: args.lambda.or(file_cfg.lambda).unwrap_or(defaults.lambda),
        iterations: args
            .iterations
            .or(file_cfg.iterations)
            .unwrap_or(defaults.iterations),
        pixel_range: defaults.pixel_range,
    };
    cfg.validate()
        .map_err(|e| Error::Config(format!("perturb settings: {e}")))?;
    println!("# morphlet perturb");
    println!("# seed = {seed}");
    println!("# model = {}", args.model.display());
    println!("# out-dir = {}", args.out_dir.display());
    println!(
        "# beta = {} | epsilon = {} | lambda = {} | iterations = {}",
        cfg.beta, cfg.epsilon, cfg.lambda, cfg.iterations
    );

    let files = collect_inputs(&args.inputs)?;
    if files.is_empty() {
        return Err(Error::Config("no input PNGs found".into()));
    }
    let model = DetectorModel::load(&args.model)?;
    ensure_out_dir(&args.out_dir)?;

    struct Outcome {
        name: String,
        result: std::result::Result<(bool, f64), String>,
    }

    let process = |path: &PathBuf| -> Outcome {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "image".into());
        let run = |name: &str| -> Result<(bool, f64)> {
            let img = Image::load(path)?;
            let trace = perturb(&img, &model, &cfg)?;
            let adv_path = args.out_dir.join(format!("{name}_adv.png"));
            trace.adversarial.save(&adv_path)?;

            let trace_path = args.out_dir.join(format!("{name}_trace.csv"));
            let mut w = csv::Writer::from_path(&trace_path)
                .map_err(|e| Error::format(&trace_path, format!("trace csv: {e}")))?;
            w.write_record(["iteration", "cross_entropy", "tv", "l_adv", "p_morph"])
                .map_err(|e| Error::format(&trace_path, format!("trace csv: {e}")))?;
            for (i, r) in trace.records.iter().enumerate() {
                w.write_record([
                    i.to_string(),
                    format!("{}", r.cross_entropy),
                    format!("{}", r.tv),
                    format!("{}", r.l_adv),
                    format!("{}", r.p_morph),
                ])
                .map_err(|e| Error::format(&trace_path, format!("trace csv: {e}")))?;
            }
            w.flush().map_err(|e| Error::io(&trace_path, e))?;

            let (p_bona, _) = model.forward(&trace.adversarial);
            Ok((p_bona > 0.5, trace.final_linf))
        };
        let result = run(&name).map_err(|e| e.to_string());
        Outcome { name, result }
    };

    let pool = thread_pool(workers)?;
    let outcomes: Vec<Outcome> = pool.install(|| files.par_iter().map(process).collect());

    let mut flipped = 0usize;
    let mut failures = 0usize;
    let mut max_linf = 0.0f64;
    for o in &outcomes {
        match &o.result {
            Ok((flip, linf)) => {
                if *flip {
                    flipped += 1;
                }
                max_linf = max_linf.max(*linf);
            }
            Err(e) => {
                failures += 1;
                eprintln!("{}: {e}", o.name);
            }
        }
    }
    let ok = outcomes.len() - failures;
    println!(
        "perturbed={} failed={} flipped={} flip_rate={:.6} max_linf={:.6}",
        ok,
        failures,
        flipped,
        if ok > 0 { flipped as f64 / ok as f64 } else { 0.0 },
        max_linf
    );
    Ok(if failures == 0 { 0 } else { 1 })
}

fn cmd_metrics(args: MetricsArgs, file_cfg: &MetricsFileConfig, seed: u64) -> Result<i32> {
    println!("# morphlet metrics");
    println!("# seed = {seed}");
    println!("# a = {}", args.a.display());
    println!("# b = {}", args.b.display());

    let a = Image::load(&args.a)?;
    let b = Image::load(&args.b)?;
    println!("ssim={:.6}", ssim(&a, &b)?);

    if let Some(path) = &args.hull {
        let lms = LandmarkSet::load_json(path)?;
        let hull = convex_hull(lms.core_points())?;
        let ca = hull_crop(&a, &hull)?;
        let cb = hull_crop(&b, &hull)?;
        println!("hull_ssim={:.6}", ssim(&ca, &cb)?);
    }

    if let Some(path) = &args.ssim_map {
        let map = ssim_map(&a, &b)?;
        // [-1, 1] -> [0, 255] for the 8-bit PNG.
        let mut out = map.clone();
        for v in out.pixels_mut() {
            *v = (*v + 1.0) / 2.0 * 255.0;
        }
        out.save(path)?;
        println!("ssim_map={}", path.display());
    }

    if let Some(path) = &args.diff_map {
        let mut map = minmax_absdiff_map(&a, &b)?;
        for v in map.pixels_mut() {
            *v *= 255.0;
        }
        map.save(path)?;
        println!("diff_map={}", path.display());
    }

    let embed_cmd = args.embed_cmd.clone().or(file_cfg.embed_cmd.clone());
    if args.embed_builtin {
        let d = embedding_distance(&WaveletBasebandProvider, &a, &b)?;
        println!("embed_distance={d:.6} provider=builtin");
    } else if let Some(cmd) = embed_cmd {
        let dim = args
            .embed_dim
            .or(file_cfg.embed_dim)
            .ok_or_else(|| Error::Config("--embed-cmd requires --embed-dim".into()))?;
        let mut parts = cmd.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| Error::Config("--embed-cmd is empty".into()))?;
        let provider =
            SubprocessProvider::new(program, parts.map(String::from).collect(), dim);
        let d = embedding_distance(&provider, &a, &b)?;
        println!("embed_distance={d:.6} provider={program}");
    }
    Ok(0)
}

fn cmd_eval(args: EvalArgs, seed: u64) -> Result<i32> {
    println!("# morphlet eval");
    println!("# seed = {seed}");
    println!("# scores = {}", args.scores.display());
    println!("# positive = label 1 (documented per experiment)");

    let scores = ScoreSet::load_csv(&args.scores)?;
    let curve = roc(&scores)?;
    let area = auc(&curve);
    ensure_out_dir(&args.out_dir)?;

    let roc_path = args.out_dir.join("roc.csv");
    let mut text = format!("# auc={area:.6}\nfpr,tpr\n");
    for (fpr, tpr) in &curve {
        text.push_str(&format!("{fpr},{tpr}\n"));
    }
    std::fs::write(&roc_path, text).map_err(|e| Error::io(&roc_path, e))?;

    let svg_path = args.out_dir.join("roc.svg");
    std::fs::write(&svg_path, roc_svg(&curve, area)).map_err(|e| Error::io(&svg_path, e))?;

    println!("auc={area:.6}");
    println!("roc_csv={}", roc_path.display());
    println!("roc_svg={}", svg_path.display());
    Ok(0)
}

/// Hand-emitted SVG: axes, the chance diagonal, and the ROC polyline.
fn roc_svg(curve: &[(f64, f64)], area: f64) -> String {
    let (w, h, margin) = (480.0, 480.0, 48.0);
    let plot_w = w - 2.0 * margin;
    let plot_h = h - 2.0 * margin;
    let sx = |x: f64| margin + x * plot_w;
    let sy = |y: f64| h - margin - y * plot_h;
    let mut points = String::new();
    for (fpr, tpr) in curve {
        points.push_str(&format!("{:.2},{:.2} ", sx(*fpr), sy(*tpr)));
    }
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n",
            "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n",
            "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y1}\" stroke=\"#bbbbbb\" ",
            "stroke-dasharray=\"6 4\"/>\n",
            "<polyline points=\"{points}\" fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\"/>\n",
            "<text x=\"{tx}\" y=\"{ty}\" font-family=\"monospace\" font-size=\"16\">",
            "AUC = {auc:.6}</text>\n",
            "<text x=\"{lx}\" y=\"{ly}\" font-family=\"monospace\" font-size=\"12\">FPR</text>\n",
            "<text x=\"{fx}\" y=\"{fy}\" font-family=\"monospace\" font-size=\"12\" ",
            "transform=\"rotate(-90 {fx} {fy})\">TPR</text>\n",
            "</svg>\n"
        ),
        w = w,
        h = h,
        x0 = margin,
        y0 = h - margin,
        x1 = w - margin,
        y1 = margin,
        points = points.trim_end(),
        tx = margin + 8.0,
        ty = margin - 12.0,
        lx = w / 2.0 - 12.0,
        ly = h - margin / 4.0,
        fx = margin / 3.0,
        fy = h / 2.0,
        auc = area,
    )
}
