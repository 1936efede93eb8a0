//! Command-line front end. Set `KTSECRET_THREADS` to cap worker threads and
//! `RUST_LOG` for log output.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use ktsecret::cs::{cs_reconstruct, CsConfig};
use ktsecret::encoding::{adjoint, make_radial_mask, KtData};
use ktsecret::io::{
    load_complex, load_mask, load_model, save_complex, save_model, save_real, write_pgm,
};
use ktsecret::kinetics::{ktrans_nrmse, patlak_fit_signal};
use ktsecret::learn::{
    modl_forward, modl_train, secret_infer, secret_train, ModlConfig, SecretConfig, UnsupervisedSet,
};
use ktsecret::metrics::{write_metrics_row, MetricsReport, METRICS_HEADER};
use ktsecret::phantom::{corrupt, synthesize, PhantomSpec, PhantomTruth};
use ktsecret::pipeline::{
    self, generate_pairs, ktrans_panel, load_phantom, supervised, unsupervised, RunConfig,
};

#[derive(Parser)]
#[command(
    name = "ktsecret",
    version,
    about = "Reconstruction of undersampled dynamic (k,t)-space data"
)]
struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "KTSECRET_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Geometry {
    /// Image height (power of two).
    #[arg(long, default_value_t = 32)]
    h: usize,
    /// Image width (power of two).
    #[arg(long, default_value_t = 32)]
    w: usize,
    /// Number of frames.
    #[arg(long, default_value_t = 8)]
    t: usize,
}

#[derive(Args)]
struct PhantomArgs {
    #[command(flatten)]
    geometry: Geometry,
    /// Seconds per frame.
    #[arg(long, default_value_t = 7.5)]
    dt: f64,
    /// Number of myocardial tissue regions.
    #[arg(long, default_value_t = 4)]
    regions: usize,
    /// Relative k-space noise level stored with the phantom.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
}

impl PhantomArgs {
    fn spec(&self, seed: u64) -> PhantomSpec {
        PhantomSpec {
            h: self.geometry.h,
            w: self.geometry.w,
            t: self.geometry.t,
            dt: self.dt,
            n_tissue_regions: self.regions,
            noise_sigma: self.noise,
            seed,
            ..PhantomSpec::default()
        }
    }
}

#[derive(Args)]
struct KspaceIn {
    /// Undersampled k-space container.
    #[arg(long)]
    kspace: PathBuf,
    /// Sampling mask container.
    #[arg(long)]
    mask: PathBuf,
}

impl KspaceIn {
    fn load(&self) -> Result<KtData> {
        let mask = load_mask(&self.mask, 0.0)
            .with_context(|| format!("reading {}", self.mask.display()))?;
        let samples = load_complex(&self.kspace)
            .with_context(|| format!("reading {}", self.kspace.display()))?;
        Ok(KtData::new(samples, mask)?)
    }
}

#[derive(Args)]
struct TrainData {
    /// Training pairs KSPACE:MASK; when absent, phantoms are generated.
    #[arg(long = "data", value_name = "KSPACE:MASK")]
    data: Vec<String>,
    #[command(flatten)]
    phantom: PhantomArgs,
    /// Acceleration of generated training data.
    #[arg(long, default_value_t = 10.0)]
    accel: f64,
    /// Generated training phantoms.
    #[arg(long, default_value_t = 6)]
    n_train: usize,
    /// Generated validation phantoms.
    #[arg(long, default_value_t = 0)]
    n_val: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a DCE perfusion phantom into a directory.
    Phantom {
        #[command(flatten)]
        phantom: PhantomArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a golden-angle radial sampling mask.
    Mask {
        #[command(flatten)]
        geometry: Geometry,
        /// Target acceleration factor.
        #[arg(long)]
        accel: f64,
        /// Output mask container.
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample a phantom's k-space with a mask and add noise.
    Corrupt {
        /// Phantom directory.
        #[arg(long)]
        phantom: PathBuf,
        /// Sampling mask container.
        #[arg(long)]
        mask: PathBuf,
        /// Relative noise level; defaults to the phantom's own.
        #[arg(long)]
        noise: Option<f64>,
        /// Output k-space container.
        #[arg(long)]
        out: PathBuf,
    },
    /// Zero-filled reconstruction.
    ReconZf {
        #[command(flatten)]
        input: KspaceIn,
        /// Output image container.
        #[arg(long)]
        out: PathBuf,
    },
    /// Spatio-temporal total-variation reconstruction.
    ReconCs {
        #[command(flatten)]
        input: KspaceIn,
        /// Spatial TV weight.
        #[arg(long = "l1", alias = "lambda1", default_value_t = CsConfig::default().lambda1)]
        lambda1: f64,
        /// Temporal TV weight.
        #[arg(long = "l2", alias = "lambda2", default_value_t = CsConfig::default().lambda2)]
        lambda2: f64,
        /// Maximum iterations.
        #[arg(long, default_value_t = CsConfig::default().max_iters)]
        iters: usize,
        /// Relative objective change for convergence.
        #[arg(long, default_value_t = CsConfig::default().tol)]
        tol: f64,
        /// Output image container.
        #[arg(long)]
        out: PathBuf,
        /// Objective per iteration as CSV.
        #[arg(long)]
        convergence: Option<PathBuf>,
    },
    /// Train the supervised unrolled network.
    TrainModl {
        #[command(flatten)]
        data: TrainData,
        /// Unrolled iterations.
        #[arg(long, visible_alias = "K", default_value_t = 1)]
        k: usize,
        /// Data-consistency weight.
        #[arg(long, default_value_t = 0.05)]
        lambda: f64,
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        /// Samples per step; 0 for full batch.
        #[arg(long, default_value_t = 0)]
        batch: usize,
        /// Network base channels.
        #[arg(long, default_value_t = 16)]
        base_channels: usize,
        /// Output stem; writes STEM.ktsr, STEM.json and STEM.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the self-supervised network from undersampled k-space only.
    TrainSecret {
        #[command(flatten)]
        data: TrainData,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-4)]
        lr: f64,
        /// Samples per step; 0 for full batch.
        #[arg(long, default_value_t = 0)]
        batch: usize,
        /// Network base channels.
        #[arg(long, default_value_t = 16)]
        base_channels: usize,
        /// Output stem; writes STEM.ktsr, STEM.json and STEM.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct with a trained network.
    ReconNn {
        /// Model stem written by train-modl or train-secret.
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        input: KspaceIn,
        /// Override the unrolled iteration count of a MoDL model.
        #[arg(long, visible_alias = "K")]
        k: Option<usize>,
        /// Output image container.
        #[arg(long)]
        out: PathBuf,
    },
    /// Patlak K^Trans map of a reconstruction against a phantom's AIF.
    Quantify {
        /// Reconstruction container.
        #[arg(long)]
        recon: PathBuf,
        /// Phantom directory.
        #[arg(long)]
        phantom: PathBuf,
        /// Output K^Trans container.
        #[arg(long)]
        out: PathBuf,
        /// Optional truth | estimate preview.
        #[arg(long)]
        pgm: Option<PathBuf>,
    },
    /// PSNR, SSIM and NRMSE of reconstructions against a reference.
    Evaluate {
        /// Reconstruction containers.
        #[arg(long, required = true, num_args = 1..)]
        recon: Vec<PathBuf>,
        /// Reference container.
        #[arg(long)]
        reference: PathBuf,
        /// Method label per reconstruction; defaults to file stems.
        #[arg(long, num_args = 1..)]
        method: Vec<String>,
        /// Acceleration recorded in the rows.
        #[arg(long, default_value_t = 0.0)]
        accel: f64,
        /// Phantom id recorded in the rows.
        #[arg(long, default_value_t = 0)]
        phantom_id: u64,
        /// Write per-frame rows instead of series means.
        #[arg(long)]
        per_frame: bool,
        /// Output CSV (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// x–t intensity profiles along one image row.
    Profile {
        /// Image containers (at least two).
        #[arg(long, required = true, num_args = 2..)]
        input: Vec<PathBuf>,
        /// Image row to extract.
        #[arg(long)]
        row: usize,
        /// Output PGM strip.
        #[arg(long)]
        pgm: PathBuf,
        /// Output CSV of magnitudes.
        #[arg(long)]
        csv: PathBuf,
    },
    /// Run an end-to-end experiment from a JSON configuration.
    Pipeline {
        /// Run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Override the configuration's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

type Pairs = Vec<(PhantomTruth, KtData)>;

fn train_samples(data: &TrainData, seed: u64) -> Result<(Pairs, Vec<KtData>)> {
    let mut given = Vec::new();
    for item in &data.data {
        let Some((k, m)) = item.split_once(':') else {
            bail!("--data expects KSPACE:MASK, got {item:?}");
        };
        given.push(
            KspaceIn {
                kspace: k.into(),
                mask: m.into(),
            }
            .load()?,
        );
    }
    let generated = if given.is_empty() {
        let spec = data.phantom.spec(seed);
        generate_pairs(
            &spec,
            data.accel,
            seed + 1,
            seed + 1,
            seed + 1,
            data.n_train,
        )?
    } else {
        Vec::new()
    };
    Ok((generated, given))
}

fn validation(data: &TrainData, seed: u64) -> Result<Pairs> {
    let spec = data.phantom.spec(seed);
    let base = seed + 1 + data.n_train as u64;
    Ok(generate_pairs(
        &spec, data.accel, base, base, base, data.n_val,
    )?)
}

fn finish_training(out: &Path, log: &ktsecret::learn::TrainLog) -> Result<()> {
    log.write_csv(BufWriter::new(File::create(out.with_extension("csv"))?))?;
    let first = log.epochs.first().map_or(f64::NAN, |e| e.train_loss);
    println!(
        "trained {} epochs in {:.1} s: loss {first:.6e} -> {:.6e}",
        log.epochs.len(),
        log.total_seconds(),
        log.final_train_loss
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Phantom { phantom, out } => {
            fs::create_dir_all(&out)?;
            let truth = synthesize(&phantom.spec(seed))?;
            pipeline::write_phantom(&out, &truth)?;
        }
        Command::Mask {
            geometry,
            accel,
            out,
        } => {
            let mask = make_radial_mask(geometry.t, geometry.h, geometry.w, accel, seed)?;
            save_real(&out, &mask.shape(), &mask.to_real())?;
            println!("achieved acceleration {:.4}", mask.achieved_acceleration());
        }
        Command::Corrupt {
            phantom,
            mask,
            noise,
            out,
        } => {
            let truth = load_phantom(&phantom)?;
            let mask = load_mask(&mask, 0.0)?;
            let sigma = noise.unwrap_or(truth.spec.noise_sigma);
            save_complex(&out, corrupt(&truth, &mask, sigma, seed)?.samples())?;
        }
        Command::ReconZf { input, out } => {
            save_complex(&out, &adjoint(&input.load()?))?;
        }
        Command::ReconCs {
            input,
            lambda1,
            lambda2,
            iters,
            tol,
            out,
            convergence,
        } => {
            let cfg = CsConfig {
                lambda1,
                lambda2,
                max_iters: iters,
                tol,
                ..CsConfig::default()
            };
            let res = cs_reconstruct(&input.load()?, &cfg, None)?;
            save_complex(&out, &res.image)?;
            if let Some(path) = convergence {
                let mut f = BufWriter::new(File::create(path)?);
                writeln!(f, "iteration,objective,step")?;
                for (i, (o, s)) in res.log.objective.iter().zip(&res.log.step).enumerate() {
                    writeln!(f, "{i},{o:.12e},{s:.6e}")?;
                }
            }
            println!(
                "{} iterations, converged: {}",
                res.log.objective.len().saturating_sub(1),
                res.log.converged
            );
        }
        Command::TrainModl {
            data,
            k,
            lambda,
            epochs,
            lr,
            batch,
            base_channels,
            out,
        } => {
            if !data.data.is_empty() {
                bail!("train-modl needs reference images; it trains on generated phantoms only");
            }
            let (train, _) = train_samples(&data, seed)?;
            let val = validation(&data, seed)?;
            let cfg = ModlConfig {
                k,
                lambda,
                epochs,
                lr,
                batch,
                base_channels,
                seed,
                ..ModlConfig::default()
            };
            let val_set = (!val.is_empty()).then(|| supervised(&val));
            let (theta, log) = modl_train(&supervised(&train), val_set.as_ref(), &cfg)?;
            save_model(&out, &theta, "modl", Some(&cfg))?;
            finish_training(&out, &log)?;
        }
        Command::TrainSecret {
            data,
            epochs,
            lr,
            batch,
            base_channels,
            out,
        } => {
            let (generated, given) = train_samples(&data, seed)?;
            let train = if given.is_empty() {
                unsupervised(&generated)
            } else {
                UnsupervisedSet::new(given)
            };
            let val = validation(&data, seed)?;
            let val_set = (!val.is_empty()).then(|| unsupervised(&val));
            let cfg = SecretConfig {
                epochs,
                lr,
                batch,
                base_channels,
                seed,
                ..SecretConfig::default()
            };
            let (theta, log) = secret_train(&train, val_set.as_ref(), &cfg)?;
            save_model(&out, &theta, "secret", None)?;
            finish_training(&out, &log)?;
        }
        Command::ReconNn {
            model,
            input,
            k,
            out,
        } => {
            let (theta, desc) = load_model(&model)?;
            let d_u = input.load()?;
            let image = match desc.method.as_str() {
                "secret" => secret_infer(&d_u, &theta)?,
                "modl" => {
                    let mut cfg = desc
                        .modl
                        .clone()
                        .context("MoDL descriptor lacks its configuration")?;
                    if let Some(k) = k {
                        cfg.k = k;
                    }
                    modl_forward(&d_u, &theta, &cfg)?
                }
                other => bail!("unknown model method {other:?}"),
            };
            save_complex(&out, &image)?;
        }
        Command::Quantify {
            recon,
            phantom,
            out,
            pgm,
        } => {
            let truth = load_phantom(&phantom)?;
            let image = load_complex(&recon)?;
            let roi = truth.tissue_roi();
            let map = patlak_fit_signal(&image, &truth.signal, &truth.aif, truth.spec.dt, &roi)?;
            save_real(&out, &[map.h, map.w], &map.ktrans)?;
            if let Some(p) = pgm {
                ktrans_panel(&truth.ktrans_map, &map).save(&p)?;
            }
            println!(
                "ktrans_nrmse {:.6}",
                ktrans_nrmse(&map, &truth.ktrans_map, &roi)
            );
        }
        Command::Evaluate {
            recon,
            reference,
            method,
            accel,
            phantom_id,
            per_frame,
            out,
        } => {
            if !method.is_empty() && method.len() != recon.len() {
                bail!(
                    "{} method labels for {} reconstructions",
                    method.len(),
                    recon.len()
                );
            }
            let reference = load_complex(&reference)?;
            let mut sink: Box<dyn Write> = match out {
                Some(p) => Box::new(BufWriter::new(File::create(p)?)),
                None => Box::new(std::io::stdout().lock()),
            };
            writeln!(sink, "{METRICS_HEADER}")?;
            for (i, path) in recon.iter().enumerate() {
                let label = method.get(i).cloned().unwrap_or_else(|| {
                    path.file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default()
                });
                let rep = MetricsReport::compute(&load_complex(path)?, &reference)?;
                if per_frame {
                    for f in 0..rep.psnr.len() {
                        write_metrics_row(
                            &mut sink,
                            &label,
                            accel,
                            phantom_id,
                            &f.to_string(),
                            rep.psnr[f],
                            rep.ssim[f],
                            rep.nrmse[f],
                        )?;
                    }
                } else {
                    write_metrics_row(
                        &mut sink,
                        &label,
                        accel,
                        phantom_id,
                        "mean",
                        rep.psnr_mean(),
                        rep.ssim_mean(),
                        rep.nrmse_mean(),
                    )?;
                }
            }
            sink.flush()?;
        }
        Command::Profile {
            input,
            row,
            pgm,
            csv,
        } => {
            let series = input
                .iter()
                .map(|p| load_complex(p))
                .collect::<ktsecret::Result<Vec<_>>>()?;
            let (panel, profiles) = pipeline::profile(&series, row)?;
            write_pgm(&pgm, panel.width(), panel.height(), panel.pixels())?;
            let names: Vec<String> = input.iter().map(|p| p.display().to_string()).collect();
            let t = series[0].shape()[0];
            pipeline::write_profile_csv(BufWriter::new(File::create(csv)?), &names, &profiles, t)?;
        }
        Command::Pipeline { config, out } => {
            let mut cfg = RunConfig::load(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            if std::env::args().any(|a| a == "--seed" || a.starts_with("--seed=")) {
                cfg.seed = seed;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            for cell in pipeline::run(&cfg)? {
                println!(
                    "{:<6} R={:<5} PSNR {:>7.3} dB  SSIM {:.4}  NRMSE {:.4}  KTrans NRMSE {:.4}",
                    cell.method.name(),
                    cell.accel,
                    cell.psnr,
                    cell.ssim,
                    cell.nrmse,
                    cell.ktrans_nrmse
                );
            }
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
        {
            eprintln!("warning: could not size thread pool: {e}");
        }
    }
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
