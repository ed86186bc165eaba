use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use specmix_cli::extract::{cmd_extract, ExtractSettings};
use specmix_cli::job::{cmd_augment, JobConfig};
use specmix_cli::manifest::{Manifest, Task};
use specmix_cli::selfcheck::{run_selfcheck, SelfcheckOptions};
use specmix_cli::stats::{compute_stats, load_log};
use specmix_cli::{thread_pool, CliError, Result};
use specmix_core::augment::{CutmixMode, SpecAugmentConfig, Strategy, StrategyConfig};
use specmix_core::dsp::StftConfig;
use specmix_core::mask::{GammaSpec, MaskVariant};

#[derive(Parser)]
#[command(name = "specmix", version, about = "SpecMix feature extraction and augmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Turn a manifest of WAV files into feature tensors and an index.
    Extract(ExtractArgs),
    /// Augment an extracted index with one strategy.
    Augment(AugmentArgs),
    /// Summarise a provenance log.
    Stats(StatsArgs),
    /// Run the built-in consistency suites.
    Selfcheck(SelfcheckArgs),
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    task: Task,
    #[arg(long)]
    nfft: Option<usize>,
    #[arg(long)]
    hop: Option<usize>,
    /// Mel bands (classification).
    #[arg(long)]
    mels: Option<usize>,
    /// Expected sample rate of every input file.
    #[arg(long)]
    rate: Option<u32>,
    /// Cut or zero-pad waveforms to this many samples; 0 keeps full length.
    #[arg(long)]
    length: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long, default_value = "specmix")]
    strategy: Strategy,
    /// Band width fraction in (0, 1], or "uniform" to draw one per mask.
    #[arg(long, default_value = "0.3")]
    gamma: GammaSpec,
    #[arg(long, default_value = "full")]
    variant: MaskVariant,
    /// Mixup Beta(α, α) parameter.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value = "shifted")]
    cutmix_mode: CutmixMode,
    #[arg(long, default_value_t = 2)]
    freq_masks: usize,
    #[arg(long, default_value_t = 16)]
    max_freq_width: usize,
    #[arg(long, default_value_t = 2)]
    time_masks: usize,
    #[arg(long, default_value_t = 32)]
    max_time_width: usize,
    #[arg(long, default_value_t = 16)]
    cutout_side: usize,
    /// Cells taken from the partner by random-pixel; drawn per example when absent.
    #[arg(long)]
    pixels: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 1.0)]
    apply_prob: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    log: PathBuf,
    /// Also write the report as CSV to this file.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SelfcheckArgs {
    #[arg(long, hide = true)]
    inject_fault: bool,
}

fn extract(args: ExtractArgs) -> Result<ExitCode> {
    let manifest = Manifest::load(&args.manifest)?;
    let mut settings = ExtractSettings::for_task(args.task);
    let nfft = args.nfft.unwrap_or(settings.stft.nfft());
    let hop = args.hop.unwrap_or(settings.stft.hop());
    settings.stft = StftConfig::new(nfft, hop).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(m) = args.mels {
        settings.n_mels = m;
    }
    if let Some(r) = args.rate {
        settings.sample_rate = r;
    }
    if let Some(n) = args.length {
        settings.clip_len = (n > 0).then_some(n);
    }
    let report = cmd_extract(&manifest, &settings, &args.out)?;
    for f in &report.failures {
        eprintln!("entry {}: {}", f.id, f.message);
    }
    println!(
        "extracted {} of {} entries into {}",
        report.index.entries.len(),
        manifest.entries.len(),
        args.out.display()
    );
    Ok(if report.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn augment(args: AugmentArgs) -> Result<ExitCode> {
    let job = JobConfig {
        strategy: StrategyConfig {
            strategy: args.strategy,
            gamma: args.gamma,
            variant: args.variant,
            mixup_alpha: args.alpha,
            cutmix_mode: args.cutmix_mode,
            specaugment: SpecAugmentConfig {
                freq_masks: args.freq_masks,
                max_freq_width: args.max_freq_width,
                time_masks: args.time_masks,
                max_time_width: args.max_time_width,
            },
            cutout_side: args.cutout_side,
            random_pixels: args.pixels,
            apply_prob: args.apply_prob,
        },
        seed: args.seed,
        batch_size: args.batch_size,
    };
    let report = cmd_augment(&job, &args.index, &args.out)?;
    println!(
        "wrote {} augmented examples in {} batches to {}",
        report.outputs,
        report.batches,
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn stats(args: StatsArgs) -> Result<ExitCode> {
    let records = load_log(&args.log)?;
    let report = compute_stats(&records);
    print!("{}", report.to_text());
    if let Some(path) = &args.csv {
        std::fs::write(path, report.to_csv()).map_err(|e| CliError::io(path, e))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn selfcheck(args: SelfcheckArgs) -> Result<ExitCode> {
    let report = run_selfcheck(&SelfcheckOptions {
        inject_fault: args.inject_fault,
    });
    print!("{}", report.to_table());
    Ok(if report.passed() {
        println!("selfcheck passed");
        ExitCode::SUCCESS
    } else {
        println!("selfcheck FAILED");
        ExitCode::from(1)
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    let pool = thread_pool()?;
    pool.install(|| match cli.command {
        Command::Extract(a) => extract(a),
        Command::Augment(a) => augment(a),
        Command::Stats(a) => stats(a),
        Command::Selfcheck(a) => selfcheck(a),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
