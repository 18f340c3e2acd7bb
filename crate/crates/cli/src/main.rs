//! `facedeblur` — synthesize blur kernels, build degraded-face datasets,
//! train the restoration cascade, evaluate checkpoints, and run
//! single-image inference.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};

use facedeblur_core::blur::kernel::{generate_batch, save_kernel};
use facedeblur_core::config::RunConfig;
use facedeblur_core::dataset::manifest::{
    build_manifest, load_sample, materialize_blurred, read_manifest, relativize_entries,
    verify_disjoint_kernels, write_manifest, Split,
};
use facedeblur_core::dataset::synthetic::synth_face;
use facedeblur_core::eval::report::benchmark_report;
use facedeblur_core::image::Image;
use facedeblur_core::networks::pipeline::Restorer;
use facedeblur_core::networks::prob::argmax_labels;
use facedeblur_core::training::TrainState;

#[derive(Parser)]
#[command(name = "facedeblur", version, about = "Semantic-prior face deblurring toolkit")]
struct Cli {
    /// Global RNG seed (overrides the config's seed)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Built-in configuration profile
    #[arg(long, global = true, value_parser = ["paper", "tiny"], default_value = "tiny")]
    profile: String,

    /// TOML config file (overrides --profile)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate motion-blur kernels into an archive directory
    KernelGen(KernelGenArgs),
    /// Pair clear images with kernels and materialize blurred PNGs
    DatasetGen(DatasetGenArgs),
    /// Run the progressive training schedule
    Train(TrainArgs),
    /// Evaluate a checkpoint over a manifest
    Eval(EvalArgs),
    /// Restore a single image
    Infer(InferArgs),
}

#[derive(Args)]
struct KernelGenArgs {
    /// Comma-separated odd kernel sizes
    #[arg(long, value_delimiter = ',', default_values_t = vec![13usize, 15, 17, 19, 21, 23, 25, 27])]
    sizes: Vec<usize>,
    /// Kernels per size
    #[arg(long, default_value_t = 10)]
    per_size: usize,
    /// Trajectory samples per kernel
    #[arg(long, default_value_t = 96)]
    length: usize,
    /// Shake intensity in [0, 1]
    #[arg(long, default_value_t = 0.6)]
    anxiety: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DatasetGenArgs {
    /// Directory of clear face PNGs
    #[arg(long, required_unless_present = "synthetic")]
    clear: Option<PathBuf>,
    /// Directory of same-stem label PNGs
    #[arg(long, required_unless_present = "synthetic")]
    labels: Option<PathBuf>,
    /// Kernel archive directory
    #[arg(long)]
    kernels: PathBuf,
    /// Kernel archive for a disjoint test split (verified against --kernels)
    #[arg(long)]
    test_kernels: Option<PathBuf>,
    /// Gaussian noise sigma on the [0, 1] scale
    #[arg(long, default_value_t = 0.01)]
    sigma: f64,
    /// Generate N synthetic faces instead of reading --clear/--labels
    #[arg(long)]
    synthetic: Option<usize>,
    /// Synthetic face size
    #[arg(long, default_value_t = 32)]
    image_size: usize,
    /// Label provenance recorded in the manifest
    #[arg(long, default_value = "ground_truth")]
    label_source: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Training data manifest (JSON lines); omit with --synthetic
    #[arg(long, required_unless_present = "synthetic")]
    manifest: Option<PathBuf>,
    /// Train on N in-memory synthetic faces
    #[arg(long)]
    synthetic: Option<usize>,
    /// "all" or a single stage 1..=4
    #[arg(long, default_value = "all")]
    stage: String,
    /// Checkpoint to resume from
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Multiplier on the reference iteration counts
    #[arg(long, default_value_t = 1.0)]
    scale_factor: f64,
    /// Run directory for checkpoints, metrics and diagnostics
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// How many side-by-side grids to write
    #[arg(long, default_value_t = 8)]
    grids: usize,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write the colorized argmax label map (next to --out unless a
    /// path is given)
    #[arg(long, value_name = "PATH", num_args = 0..=1, default_missing_value = "__auto__")]
    dump_parsing: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => RunConfig::profile(&cli.profile)?,
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::KernelGen(args) => kernel_gen(&cli, args),
        Command::DatasetGen(args) => dataset_gen(&cli, args),
        Command::Train(args) => train(&cli, args),
        Command::Eval(args) => eval(&cli, args),
        Command::Infer(args) => infer(&cli, args),
    }
}

fn kernel_gen(cli: &Cli, args: &KernelGenArgs) -> anyhow::Result<()> {
    let seed = cli.seed.unwrap_or(0);
    let batch = generate_batch(&args.sizes, args.per_size, seed, args.length, args.anxiety)?;
    std::fs::create_dir_all(&args.out)?;
    for (kernel, meta) in &batch {
        save_kernel(&args.out, kernel, meta)?;
    }
    println!(
        "wrote {} kernels ({} sizes x {}) to {}",
        batch.len(),
        args.sizes.len(),
        args.per_size,
        args.out.display()
    );
    Ok(())
}

fn dataset_gen(cli: &Cli, args: &DatasetGenArgs) -> anyhow::Result<()> {
    if args.sigma < 0.0 {
        bail!("--sigma must be >= 0");
    }
    std::fs::create_dir_all(&args.out)?;
    let (clear_dir, label_dir) = match args.synthetic {
        Some(n) => {
            let clear = args.out.join("clear");
            let labels = args.out.join("labels");
            std::fs::create_dir_all(&clear)?;
            std::fs::create_dir_all(&labels)?;
            let seed = cli.seed.unwrap_or(0);
            for i in 0..n {
                let (img, lab) = synth_face(args.image_size, seed.wrapping_add(i as u64));
                img.save_png(clear.join(format!("face_{i:04}.png")))?;
                lab.save_png(labels.join(format!("face_{i:04}.png")))?;
            }
            println!("generated {n} synthetic faces at {}px", args.image_size);
            (clear, labels)
        }
        None => (
            args.clear.clone().expect("clap enforces --clear"),
            args.labels.clone().expect("clap enforces --labels"),
        ),
    };
    if !label_dir.exists() {
        bail!("label directory {} does not exist", label_dir.display());
    }
    if !clear_dir.exists() {
        bail!("clear directory {} does not exist", clear_dir.display());
    }

    let mut degradation = load_config(cli)?.degradation;
    degradation.noise_sigma = args.sigma;
    if let Some(seed) = cli.seed {
        degradation.rng_seed = seed;
    }

    let entries = build_manifest(
        &clear_dir,
        &label_dir,
        &args.kernels,
        &degradation,
        &args.label_source,
        Split::Train,
    )?;
    let mut entries = materialize_blurred(&entries, &args.out)?;
    relativize_entries(&mut entries, &args.out);
    write_manifest(&args.out.join("train.jsonl"), &entries)?;
    println!("train manifest: {} samples", entries.len());

    if let Some(test_kernels) = &args.test_kernels {
        let test_entries = build_manifest(
            &clear_dir,
            &label_dir,
            test_kernels,
            &degradation,
            &args.label_source,
            Split::Test,
        )?;
        verify_disjoint_kernels(&entries, &test_entries)?;
        let mut test_entries = materialize_blurred(&test_entries, &args.out)?;
        relativize_entries(&mut test_entries, &args.out);
        write_manifest(&args.out.join("test.jsonl"), &test_entries)?;
        println!("test manifest: {} samples", test_entries.len());
    }
    Ok(())
}

fn train(cli: &Cli, args: &TrainArgs) -> anyhow::Result<()> {
    let cfg = load_config(cli)?;
    let trainer = cfg.build_trainer(args.out.clone())?;

    let data = match (&args.manifest, args.synthetic) {
        (Some(path), _) => {
            let entries = read_manifest(path)?;
            let base = path.parent().map(Path::to_path_buf);
            entries
                .iter()
                .map(|e| load_sample(e, base.as_deref()))
                .collect::<facedeblur_core::Result<Vec<_>>>()?
        }
        (None, Some(n)) => facedeblur_core::training::micro_dataset(
            n,
            cfg.image_size,
            cfg.kernel_sizes[0],
            cfg.degradation.noise_sigma,
            cfg.seed,
        )?,
        (None, None) => unreachable!("clap enforces one data source"),
    };
    println!("training on {} samples", data.len());

    let mut state: TrainState = match &args.resume {
        Some(ckpt) => trainer.resume_state(ckpt)?,
        None => trainer.init_state(cfg.seed),
    };

    let schedule = cfg.schedule.scaled(args.scale_factor);
    match args.stage.as_str() {
        "all" => {
            let logs = trainer.run_schedule(&mut state, &schedule, &data)?;
            println!(
                "completed {} iterations over {} stages; artifacts in {}",
                logs.len(),
                schedule.entries.len(),
                args.out.display()
            );
        }
        s => {
            let stage: u8 = s.parse().map_err(|_| anyhow!("--stage must be 1..=4 or \"all\""))?;
            if !(1..=4).contains(&stage) {
                bail!("--stage must be 1..=4 or \"all\"");
            }
            if stage > 1 && args.resume.is_none() {
                bail!("stage {stage} needs --resume with the previous stage's checkpoint");
            }
            let entry = schedule
                .entries
                .iter()
                .find(|e| e.id == stage)
                .ok_or_else(|| anyhow!("schedule has no stage {stage}"))?;
            let logs = trainer.train_stage(&mut state, stage, entry.iterations, &data)?;
            let ckpt = args.out.join(format!("checkpoint_stage{stage}.ckpt"));
            facedeblur_core::networks::params::save_checkpoint(
                &ckpt,
                &state.params,
                &trainer.network,
                Some(stage),
                serde_json::json!({"total_iters": state.total_iters}),
            )?;
            println!("stage {stage}: {} iterations, checkpoint at {}", logs.len(), ckpt.display());
        }
    }
    Ok(())
}

fn eval(_cli: &Cli, args: &EvalArgs) -> anyhow::Result<()> {
    let entries = read_manifest(&args.manifest)?;
    let base = args.manifest.parent().map(Path::to_path_buf);
    let restorer = Restorer::from_checkpoint(&args.ckpt)?;
    let report = benchmark_report(
        &entries,
        base.as_deref(),
        |img| Ok(restorer.restore(img)?.image),
        &args.out,
        args.grids,
    )?;
    println!(
        "restored: {:.2} dB / {:.4} ssim over {} samples (blurred input: {:.2} dB / {:.4})",
        report.overall.mean_psnr,
        report.overall.mean_ssim,
        report.overall.count,
        report.blurred_overall.mean_psnr,
        report.blurred_overall.mean_ssim,
    );
    println!("report written to {}", args.out.display());
    Ok(())
}

/// Distinct colors for the label-map visualization.
const PALETTE: [[f64; 3]; 11] = [
    [0.00, 0.00, 0.00], // background
    [0.85, 0.65, 0.50], // skin
    [0.90, 0.30, 0.10], // left eyebrow
    [0.95, 0.60, 0.10], // right eyebrow
    [0.10, 0.90, 0.20], // left eye
    [0.10, 0.60, 0.90], // right eye
    [0.95, 0.90, 0.20], // nose
    [0.90, 0.10, 0.40], // upper lip
    [0.95, 0.95, 0.95], // teeth
    [0.60, 0.10, 0.70], // lower lip
    [0.35, 0.20, 0.05], // hair
];

fn infer(_cli: &Cli, args: &InferArgs) -> anyhow::Result<()> {
    let input = Image::load_png(&args.input)
        .with_context(|| format!("loading {}", args.input.display()))?;
    let restorer = Restorer::from_checkpoint(&args.ckpt)?;
    let out = restorer.restore(&input)?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    out.image.save_png(&args.out)?;
    println!("restored {} -> {}", args.input.display(), args.out.display());
    if let Some(dump) = &args.dump_parsing {
        let path = if dump.as_os_str() == "__auto__" {
            args.out.with_extension("parsing.png")
        } else {
            dump.clone()
        };
        let labels = argmax_labels(out.probs.tensor(), 0);
        let mut vis = Image::new(labels.height, labels.width, 3);
        for y in 0..labels.height {
            for x in 0..labels.width {
                let color = PALETTE[labels.get(y, x) as usize % PALETTE.len()];
                for c in 0..3 {
                    vis.set(y, x, c, color[c]);
                }
            }
        }
        vis.save_png(&path)?;
        println!("label map -> {}", path.display());
    }
    Ok(())
}
