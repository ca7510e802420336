use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use softq_core::baselines::MaxMiBank;
use softq_core::coder::{decode_with_table, encode_with_table, CodedBlob, FrequencyTable};
use softq_core::eval::{
    run_bler_with_progress, rd_sweep, relu_moments_mc, latent_stats_at_init, write_rd_csv, write_rows_csv, write_theorem_csv,
    ExperimentConfig, ExperimentRow, Method, MethodUnderTest,
};
use softq_core::link::ChannelKind;
use softq_core::trainer::{
    generate_training_set, log_curve_point, train_with_progress, write_curve_csv, Preset, SoftBitAutoencoder,
    TrainConfig, Variant,
};

#[derive(Parser)]
#[command(name = "softq", version, about = "Soft-bit compression: training, evaluation and latent coding")]
struct Cli {
    /// Worker threads for simulation and data generation.
    #[arg(long, global = true, env = "SOFTQ_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment TOML; built-in defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train an autoencoder (proposed or deep baseline) or a max-MI bank.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "proposed")]
        method: Method,
        #[arg(long)]
        preset: Option<Preset>,
        /// Bits per QAM symbol.
        #[arg(long)]
        bits: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Training SNRs (dB) for autoencoders, bank SNRs for max-MI.
        #[arg(long, value_delimiter = ',')]
        snr_list: Option<Vec<f64>>,
        /// Checkpoint (JSON) to write.
        #[arg(long)]
        out: PathBuf,
        /// Training curve CSV.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Block error rate and storage cost against SNR, all methods paired on
    /// the same codewords.
    EvalBler {
        #[command(flatten)]
        common: Common,
        /// Methods to run; repeat for a paired comparison.
        #[arg(long = "method", required = true)]
        methods: Vec<Method>,
        /// Autoencoder checkpoints; the variant stored in each picks the
        /// method it serves.
        #[arg(long = "model")]
        models: Vec<PathBuf>,
        /// Max-MI bank.
        #[arg(long)]
        bank: Option<PathBuf>,
        #[arg(long)]
        channel: Option<ChannelKind>,
        #[arg(long, value_delimiter = ',')]
        snr_list: Option<Vec<f64>>,
        /// Output CSV; with several methods one `<stem>-<method>.csv` each.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one proposed model per alpha and report rate against additive
    /// BLER.
    RdSweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.02,0.03")]
        alphas: Vec<f64>,
        #[arg(long)]
        preset: Option<Preset>,
        #[arg(long)]
        bits: Option<usize>,
        #[arg(long)]
        channel: Option<ChannelKind>,
        #[arg(long, value_delimiter = ',')]
        snr_list: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Latent standard deviation and 99.9th percentile at initialization.
    VerifyTheorem {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_delimiter = ',', default_value = "2,4,6,8")]
        bits: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
        depths: Vec<usize>,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean and variance of relu of a zero-mean Gaussian.
    VerifyLemma {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
    },
    /// Soft-bit CSV (one symbol per row) to an arithmetic-coded latent blob.
    EncodeLatents {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Latent blob back to reconstructed soft bits (CSV).
    DecodeLatents {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} workers: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.train.seed = seed;
        cfg.eval.seed = seed;
    }
    Ok(cfg)
}

fn apply_preset(cfg: &mut TrainConfig, preset: Option<Preset>) {
    if let Some(p) = preset {
        let base = TrainConfig::preset(p, cfg.bits);
        cfg.codewords = base.codewords;
        cfg.epochs = base.epochs;
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Train {
            common,
            method,
            preset,
            bits,
            alpha,
            snr_list,
            out,
            curve,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(b) = bits {
                cfg.train.bits = b;
                cfg.eval.bits = b;
            }
            apply_preset(&mut cfg.train, preset);
            if let Some(a) = alpha {
                cfg.train.alpha = a;
            }
            match method {
                Method::Proposed | Method::DeepBaseline => {
                    cfg.train.variant = if method == Method::Proposed {
                        Variant::Proposed
                    } else {
                        Variant::DeepBaseline
                    };
                    if snr_list.is_some() {
                        cfg.train.snr_grid_db = snr_list;
                    }
                    train_autoencoder(&cfg.train, &out, curve.as_deref())
                }
                Method::Maxmi => {
                    let snrs = snr_list.unwrap_or_else(|| cfg.eval.snr_db.clone());
                    eprintln!(
                        "training {}-level max-MI quantizers for {} bits at {} SNR points",
                        cfg.maxmi.levels,
                        cfg.train.bits,
                        snrs.len()
                    );
                    let bank = MaxMiBank::train(cfg.train.bits, cfg.maxmi.levels, &snrs, cfg.maxmi.samples, cfg.train.seed)?;
                    bank.save(&out)?;
                    eprintln!("wrote {}", out.display());
                    Ok(())
                }
                Method::Float => bail!("the float method has nothing to train"),
            }
        }
        Command::EvalBler {
            common,
            methods,
            models,
            bank,
            channel,
            snr_list,
            out,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(c) = channel {
                cfg.eval.channel = c;
            }
            if let Some(s) = snr_list {
                cfg.eval.snr_db = s;
            }
            let loaded = models
                .iter()
                .map(|p| SoftBitAutoencoder::load(p).with_context(|| format!("loading {}", p.display())))
                .collect::<Result<Vec<_>>>()?;
            if let Some(m) = loaded.first() {
                cfg.eval.bits = m.bits;
            }
            let mut under_test = Vec::new();
            for &m in &methods {
                under_test.push(match m {
                    Method::Float => MethodUnderTest::float(),
                    Method::Proposed | Method::DeepBaseline => {
                        let model = loaded
                            .iter()
                            .find(|x| (x.variant == Variant::Proposed) == (m == Method::Proposed))
                            .with_context(|| format!("configuration error: no --model checkpoint for {}", m.name()))?;
                        MethodUnderTest::autoencoder(model.clone())
                    }
                    Method::Maxmi => {
                        let path = bank
                            .as_ref()
                            .context("configuration error: no --bank for maxmi")?;
                        let b = MaxMiBank::load(path)?;
                        if loaded.is_empty() {
                            cfg.eval.bits = b.bits;
                        }
                        MethodUnderTest::maxmi(b)
                    }
                });
            }
            let rows = run_bler_with_progress(&under_test, &cfg.eval, |point| {
                for r in point {
                    eprintln!(
                        "{:>14}  {:5.1} dB  BLER {:.5} (float {:.5})  n={}{}",
                        r.method,
                        r.snr_db,
                        r.bler_method,
                        r.bler_float,
                        r.codewords_simulated,
                        r.avg_bits_per_soft_bit
                            .map(|b| format!("  {b:.4} bits/soft bit"))
                            .unwrap_or_default()
                    );
                }
            })?;
            write_per_method(&out, &methods, &rows)
        }
        Command::RdSweep {
            common,
            alphas,
            preset,
            bits,
            channel,
            snr_list,
            out,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(b) = bits {
                cfg.train.bits = b;
                cfg.eval.bits = b;
            }
            apply_preset(&mut cfg.train, preset);
            if let Some(c) = channel {
                cfg.eval.channel = c;
            }
            if let Some(s) = snr_list {
                cfg.eval.snr_db = s;
            }
            cfg.train.variant = Variant::Proposed;
            eprintln!("generating {} training codewords", cfg.train.codewords);
            let data = generate_training_set(&cfg.train)?;
            let points = rd_sweep(&alphas, &cfg.train, &data, &cfg.eval)?;
            for p in &points {
                println!(
                    "alpha {:.4}  {:5.1} dB  {:.4} bits/soft bit  additive BLER {:+.5}",
                    p.alpha, p.snr_db, p.avg_bits_per_soft_bit, p.additive_bler
                );
            }
            write_rd_csv(&out, &points)?;
            Ok(())
        }
        Command::VerifyTheorem {
            seed,
            bits,
            depths,
            samples,
            out,
        } => {
            let mut reports = Vec::new();
            println!("   K  depth    sigma_hat  sigma_theory    p999_hat  latent_p999");
            for &k in &bits {
                for &d in &depths {
                    let r = latent_stats_at_init(k, d, samples, seed.unwrap_or(0))?;
                    println!(
                        "{:>4}  {:>5}  {:>11.5}  {:>12}  {:>10.5}  {:>11.5}",
                        r.bits,
                        r.depth,
                        r.sigma_hat,
                        r.sigma_theory.map(|s| format!("{s:.5}")).unwrap_or_else(|| "-".into()),
                        r.p999_hat,
                        r.latent_p999
                    );
                    reports.push(r);
                }
            }
            if let Some(path) = out {
                write_theorem_csv(&path, &reports)?;
            }
            Ok(())
        }
        Command::VerifyLemma { seed, sigma, samples } => {
            let (mean, var) = relu_moments_mc(sigma, samples, seed.unwrap_or(0))?;
            let tm = softq_core::eval::relu_gaussian_mean(sigma);
            let tv = softq_core::eval::relu_gaussian_variance(sigma);
            println!("mean     {mean:.6}  (closed form {tm:.6}, rel. err {:.2e})", (mean - tm).abs() / tm);
            println!("variance {var:.6}  (closed form {tv:.6}, rel. err {:.2e})", (var - tv).abs() / tv);
            Ok(())
        }
        Command::EncodeLatents { model, input, out } => {
            let model = SoftBitAutoencoder::load(&model)?;
            let x = read_soft_bits(&input, model.bits)?;
            let stream = model.compress(x.view())?;
            let blob = encode_with_table(&stream, &FrequencyTable::from_probs(&model.prob_table)?)?;
            std::fs::write(&out, blob.to_bytes())?;
            eprintln!(
                "{} symbols in {} bytes ({:.4} bits per soft bit)",
                blob.symbol_count,
                blob.payload.len(),
                blob.bits as f64 / x.len() as f64
            );
            Ok(())
        }
        Command::DecodeLatents { model, input, out } => {
            let model = SoftBitAutoencoder::load(&model)?;
            let blob = CodedBlob::from_bytes(&std::fs::read(&input)?)?;
            let stream = decode_with_table(&blob, &FrequencyTable::from_probs(&model.prob_table)?)?;
            write_soft_bits(&out, &model.decompress(&stream)?)
        }
    }
}

fn train_autoencoder(cfg: &TrainConfig, out: &Path, curve: Option<&Path>) -> Result<()> {
    eprintln!(
        "generating {} training codewords ({} bits per symbol)",
        cfg.codewords, cfg.bits
    );
    let data = generate_training_set(cfg)?;
    let outcome = train_with_progress(cfg, &data, |p| {
        if p.epoch % 10 == 0 || p.epoch + 1 == cfg.epochs {
            let _ = log_curve_point(std::io::stderr().lock(), p);
        }
    })?;
    outcome.model.save(out, Some(cfg))?;
    if let Some(path) = curve {
        write_curve_csv(path, &outcome.curve)?;
    }
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn write_per_method(out: &Path, methods: &[Method], rows: &[ExperimentRow]) -> Result<()> {
    if methods.len() == 1 {
        write_rows_csv(out, rows)?;
        return Ok(());
    }
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("bler");
    let ext = out.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    for m in methods {
        let path = out.with_file_name(format!("{stem}-{}.{ext}", m.name()));
        let mine: Vec<ExperimentRow> = rows.iter().filter(|r| r.method == m.name()).cloned().collect();
        write_rows_csv(&path, &mine)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn read_soft_bits(path: &Path, bits: usize) -> Result<Array2<f32>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut flat = Vec::new();
    let mut rows = 0;
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() != bits {
            bail!("row {} has {} values, the model expects {bits}", i + 1, rec.len());
        }
        for v in rec.iter() {
            let x: f32 = v.trim().parse().with_context(|| format!("row {}: `{v}` is not a number", i + 1))?;
            if !(-1.0..=1.0).contains(&x) {
                bail!("row {}: soft bit {x} outside [-1, 1]", i + 1);
            }
            flat.push(x);
        }
        rows += 1;
    }
    Ok(Array2::from_shape_vec((rows, bits), flat)?)
}

fn write_soft_bits(path: &Path, x: &Array2<f32>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for row in x.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}
