//! End-to-end runs: phantom → mask → corrupt → reconstruct → evaluate →
//! quantify, driven by a JSON [`RunConfig`].
//!
//! Files written into `output-dir` (`<R>` is the acceleration as written by
//! Rust's `Display`, `<m>` the method name):
//!
//! | file | content |
//! |------|---------|
//! | `config.json` | resolved configuration |
//! | `phantom.json` | phantom spec, signal model, per-region kinetics |
//! | `reference.ktsr` `aif.ktsr` `labels.ktsr` `ktrans_true.ktsr` `vp_true.ktsr` | ground truth |
//! | `mask_R<R>.ktsr` `kspace_R<R>.ktsr` | sampling mask and undersampled data |
//! | `recon_<m>_R<R>.ktsr` | reconstruction |
//! | `ktrans_<m>_R<R>.ktsr` | Patlak `K^Trans` map (NaN outside tissue) |
//! | `panel_<m>_R<R>.pgm` | reference / zero-filled / method / 5×error for three frames |
//! | `ktrans_<m>_R<R>.pgm` | true and estimated `K^Trans` side by side |
//! | `train_<m>_R<R>.csv` | training log (learned methods only) |
//! | `model_<m>_R<R>.ktsr` `model_<m>_R<R>.json` | trained parameters (learned methods only) |
//! | `metrics.csv` | one series-mean row per (method, R) |
//! | `metrics_frames.csv` | per-frame rows, same header |
//! | `convergence.csv` | CS objective per iteration |
//! | `quantify.csv` | `K^Trans` NRMSE per (method, R) |

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cs::{cs_reconstruct, CsConfig};
use crate::encoding::{adjoint, make_radial_mask, KtData, SamplingMask};
use crate::error::{Error, Result};
use crate::io::{load_complex, load_real, save_complex, save_model, save_real, Panel};
use crate::kinetics::{ktrans_nrmse, patlak_fit_signal, PatlakMap};
use crate::learn::{
    modl_forward, modl_train, secret_infer, secret_train, ModlConfig, SecretConfig,
    SupervisedSample, SupervisedSet, TrainLog, UnsupervisedSet,
};
use crate::metrics::{write_metrics_row, MetricsReport, METRICS_HEADER};
use crate::numerics::DynamicImage;
use crate::phantom::{corrupt, synthesize, PhantomSpec, PhantomTruth, SignalModel, LABEL_TISSUE0};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Zf,
    Cs,
    Modl,
    Secret,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Zf => "zf",
            Method::Cs => "cs",
            Method::Modl => "modl",
            Method::Secret => "secret",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zf" => Ok(Method::Zf),
            "cs" => Ok(Method::Cs),
            "modl" => Ok(Method::Modl),
            "secret" => Ok(Method::Secret),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

/// A single value or a list of values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskConfig {
    pub accel: OneOrMany<f64>,
    #[serde(default)]
    pub seed: u64,
}

/// Size of the synthetic training and validation sets for learned methods.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingData {
    pub n_train: usize,
    pub n_val: usize,
}

impl Default for TrainingData {
    fn default() -> Self {
        Self {
            n_train: 6,
            n_val: 2,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MethodParams {
    pub cs: CsConfig,
    pub modl: ModlConfig,
    pub secret: SecretConfig,
    pub training: TrainingData,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Drives k-space noise, training-set generation and network
    /// initialization.
    pub seed: u64,
    #[serde(default)]
    pub phantom: PhantomSpec,
    pub mask: MaskConfig,
    pub method: OneOrMany<Method>,
    #[serde(rename = "method-params", default)]
    pub method_params: MethodParams,
    #[serde(rename = "output-dir")]
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.phantom.validate()?;
        self.method_params.cs.validate()?;
        self.method_params.modl.validate()?;
        if self.mask.accel.to_vec().is_empty() {
            return Err(Error::Config(
                "mask.accel must list at least one acceleration".into(),
            ));
        }
        if self.method.to_vec().is_empty() {
            return Err(Error::Config("method must list at least one method".into()));
        }
        let learned = self
            .method
            .to_vec()
            .iter()
            .any(|m| matches!(m, Method::Modl | Method::Secret));
        if learned && self.method_params.training.n_train == 0 {
            return Err(Error::Config(
                "learned methods need training.n_train >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionKinetics {
    pub label: u32,
    pub ktrans: f64,
    pub vp: f64,
}

/// JSON sidecar written next to phantom containers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSidecar {
    pub spec: PhantomSpec,
    pub signal: SignalModel,
    pub regions: Vec<RegionKinetics>,
}

impl PhantomSidecar {
    pub fn from_truth(truth: &PhantomTruth) -> Self {
        let mut regions: Vec<RegionKinetics> = Vec::new();
        for (i, &l) in truth.region_labels.iter().enumerate() {
            if l >= LABEL_TISSUE0 && !regions.iter().any(|r| r.label == l) {
                regions.push(RegionKinetics {
                    label: l,
                    ktrans: truth.ktrans_map[i],
                    vp: truth.vp_map[i],
                });
            }
        }
        regions.sort_by_key(|r| r.label);
        Self {
            spec: truth.spec.clone(),
            signal: truth.signal,
            regions,
        }
    }
}

/// Writes the phantom containers and sidecar into `dir`.
pub fn write_phantom(dir: &Path, truth: &PhantomTruth) -> Result<()> {
    let spec = &truth.spec;
    let (h, w) = (spec.h, spec.w);
    save_complex(&dir.join("reference.ktsr"), &truth.ref_images)?;
    save_real(&dir.join("aif.ktsr"), &[spec.t], &truth.aif)?;
    let labels: Vec<f64> = truth.region_labels.iter().map(|&l| l as f64).collect();
    save_real(&dir.join("labels.ktsr"), &[h, w], &labels)?;
    save_real(&dir.join("ktrans_true.ktsr"), &[h, w], &truth.ktrans_map)?;
    save_real(&dir.join("vp_true.ktsr"), &[h, w], &truth.vp_map)?;
    let side = PhantomSidecar::from_truth(truth);
    fs::write(
        dir.join("phantom.json"),
        serde_json::to_string_pretty(&side)? + "\n",
    )?;
    Ok(())
}

/// Reads a phantom directory written by [`write_phantom`].
pub fn load_phantom(dir: &Path) -> Result<PhantomTruth> {
    let side: PhantomSidecar =
        serde_json::from_str(&fs::read_to_string(dir.join("phantom.json"))?)?;
    let spec = side.spec;
    let ref_images = load_complex(&dir.join("reference.ktsr"))?;
    let expect = [spec.t, spec.h, spec.w];
    if ref_images.shape() != expect {
        return Err(Error::ShapeMismatch {
            expected: expect.to_vec(),
            got: ref_images.shape().to_vec(),
        });
    }
    let plane = |name: &str, shape: &[usize]| -> Result<Vec<f64>> {
        let (s, d) = load_real(&dir.join(name))?;
        if s != shape {
            return Err(Error::ShapeMismatch {
                expected: shape.to_vec(),
                got: s,
            });
        }
        Ok(d)
    };
    let hw = [spec.h, spec.w];
    Ok(PhantomTruth {
        ref_images,
        ktrans_map: plane("ktrans_true.ktsr", &hw)?,
        vp_map: plane("vp_true.ktsr", &hw)?,
        aif: plane("aif.ktsr", &[spec.t])?,
        region_labels: plane("labels.ktsr", &hw)?
            .iter()
            .map(|&l| l as u32)
            .collect(),
        signal: side.signal,
        spec,
    })
}

/// Phantoms and their undersampled data for training; phantom `i` uses
/// seed `phantom_seed + i` and mask seed `mask_seed + i`.
pub fn generate_pairs(
    spec: &PhantomSpec,
    accel: f64,
    phantom_seed: u64,
    mask_seed: u64,
    noise_seed: u64,
    n: usize,
) -> Result<Vec<(PhantomTruth, KtData)>> {
    (0..n as u64)
        .map(|i| {
            let truth = synthesize(&spec.with_seed(phantom_seed + i))?;
            let mask = make_radial_mask(spec.t, spec.h, spec.w, accel, mask_seed + i)?;
            let data = corrupt(&truth, &mask, spec.noise_sigma, noise_seed + i)?;
            Ok((truth, data))
        })
        .collect()
}

pub fn unsupervised(pairs: &[(PhantomTruth, KtData)]) -> UnsupervisedSet {
    UnsupervisedSet::new(pairs.iter().map(|(_, d)| d.clone()).collect())
}

pub fn supervised(pairs: &[(PhantomTruth, KtData)]) -> SupervisedSet {
    SupervisedSet::new(
        pairs
            .iter()
            .map(|(t, d)| SupervisedSample {
                data: d.clone(),
                target: t.ref_images.clone(),
            })
            .collect(),
    )
}

// Seed offsets keep training, validation and test phantoms disjoint.
const TRAIN_SEED_OFFSET: u64 = 1_000;
const VAL_SEED_OFFSET: u64 = 2_000;

/// Reconstruction of one method, with whatever logs it produced.
pub struct MethodOutput {
    pub image: DynamicImage,
    pub cs_objective: Vec<f64>,
    pub train_log: Option<TrainLog>,
}

/// Runs one reconstruction method on `d_u`. Learned methods first train on
/// freshly generated phantoms that never include the test phantom.
pub fn reconstruct(
    method: Method,
    d_u: &KtData,
    accel: f64,
    cfg: &RunConfig,
    model_stem: Option<&Path>,
) -> Result<MethodOutput> {
    let params = &cfg.method_params;
    let spec = &cfg.phantom;
    let make_sets = || -> Result<_> {
        let n = &params.training;
        let base = spec.seed.wrapping_add(cfg.seed.wrapping_mul(10_007));
        let train = generate_pairs(
            spec,
            accel,
            base + TRAIN_SEED_OFFSET,
            cfg.mask.seed + TRAIN_SEED_OFFSET,
            cfg.seed + TRAIN_SEED_OFFSET,
            n.n_train,
        )?;
        let val = generate_pairs(
            spec,
            accel,
            base + VAL_SEED_OFFSET,
            cfg.mask.seed + VAL_SEED_OFFSET,
            cfg.seed + VAL_SEED_OFFSET,
            n.n_val,
        )?;
        Ok((train, val))
    };
    match method {
        Method::Zf => Ok(MethodOutput {
            image: adjoint(d_u),
            cs_objective: Vec::new(),
            train_log: None,
        }),
        Method::Cs => {
            let res = cs_reconstruct(d_u, &params.cs, None)?;
            Ok(MethodOutput {
                image: res.image,
                cs_objective: res.log.objective,
                train_log: None,
            })
        }
        Method::Secret => {
            let (train, val) = make_sets()?;
            let scfg = SecretConfig {
                seed: cfg.seed,
                ..params.secret.clone()
            };
            let (theta, log) =
                secret_train(&unsupervised(&train), Some(&unsupervised(&val)), &scfg)?;
            if let Some(stem) = model_stem {
                save_model(stem, &theta, "secret", None)?;
            }
            Ok(MethodOutput {
                image: secret_infer(d_u, &theta)?,
                cs_objective: Vec::new(),
                train_log: Some(log),
            })
        }
        Method::Modl => {
            let (train, val) = make_sets()?;
            let mcfg = ModlConfig {
                seed: cfg.seed,
                ..params.modl.clone()
            };
            let (theta, log) = modl_train(&supervised(&train), Some(&supervised(&val)), &mcfg)?;
            if let Some(stem) = model_stem {
                save_model(stem, &theta, "modl", Some(&mcfg))?;
            }
            Ok(MethodOutput {
                image: modl_forward(d_u, &theta, &mcfg)?,
                cs_objective: Vec::new(),
                train_log: Some(log),
            })
        }
    }
}

/// Frames shown in comparison panels: bolus peak, midway through the
/// washout, and the last frame.
pub fn panel_frames(aif: &[f64]) -> [usize; 3] {
    let t = aif.len();
    let peak = aif
        .iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |b, (i, &v)| if v > b.1 { (i, v) } else { b },
        )
        .0;
    [peak, (peak + t - 1).div_ceil(2).min(t - 1), t - 1]
}

/// Reference / zero-filled / method / 5×|error| for three frames.
pub fn comparison_panel(
    reference: &DynamicImage,
    zero_filled: &DynamicImage,
    recon: &DynamicImage,
    frames: &[usize],
) -> Result<Panel> {
    let (_, h, w) = reference.dims3()?;
    let peak = reference.max_abs().max(f64::MIN_POSITIVE);
    let mut panel = Panel::new(frames.len(), 4, h, w);
    for (row, &f) in frames.iter().enumerate() {
        let mag = |s: &DynamicImage| {
            s.frame(f)
                .iter()
                .map(|z| z.norm() / peak)
                .collect::<Vec<_>>()
        };
        let (r, z, m) = (mag(reference), mag(zero_filled), mag(recon));
        let err: Vec<f64> = r.iter().zip(&m).map(|(a, b)| 5.0 * (a - b).abs()).collect();
        for (col, tile) in [r, z, m, err].iter().enumerate() {
            panel.set_tile(row, col, tile);
        }
    }
    Ok(panel)
}

pub fn ktrans_panel(truth: &[f64], map: &PatlakMap) -> Panel {
    let scale = truth
        .iter()
        .cloned()
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut panel = Panel::new(1, 2, map.h, map.w);
    panel.set_tile(0, 0, &truth.iter().map(|v| v / scale).collect::<Vec<_>>());
    let est: Vec<f64> = map
        .ktrans
        .iter()
        .map(|v| if v.is_finite() { v / scale } else { 0.0 })
        .collect();
    panel.set_tile(0, 1, &est);
    panel
}

/// One `x–t` strip per input: row `row` of every frame, time along the
/// horizontal axis, strips placed side by side and scaled by the largest
/// magnitude across all inputs.
pub fn profile(series: &[DynamicImage], row: usize) -> Result<(Panel, Vec<Vec<f64>>)> {
    let first = series
        .first()
        .ok_or_else(|| Error::InvalidParameter("profile needs at least one series".into()))?;
    let (t, h, w) = first.dims3()?;
    for s in series {
        first.check_same_shape(s)?;
    }
    if row >= h {
        return Err(Error::InvalidParameter(format!(
            "row {row} out of range for height {h}"
        )));
    }
    let profiles: Vec<Vec<f64>> = series
        .iter()
        .map(|s| {
            let mut p = vec![0.0; w * t];
            for f in 0..t {
                for x in 0..w {
                    p[x * t + f] = s.frame(f)[row * w + x].norm();
                }
            }
            p
        })
        .collect();
    let scale = profiles.iter().flatten().cloned().fold(0.0, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let mut panel = Panel::new(1, series.len(), w, t);
    for (i, p) in profiles.iter().enumerate() {
        panel.set_tile(0, i, &p.iter().map(|v| v / scale).collect::<Vec<_>>());
    }
    Ok((panel, profiles))
}

pub fn write_profile_csv<W: Write>(
    mut out: W,
    names: &[String],
    profiles: &[Vec<f64>],
    t: usize,
) -> std::io::Result<()> {
    writeln!(out, "input,frame,x,magnitude")?;
    for (name, p) in names.iter().zip(profiles) {
        let w = p.len() / t;
        for f in 0..t {
            for x in 0..w {
                writeln!(out, "{name},{f},{x},{:.12e}", p[x * t + f])?;
            }
        }
    }
    Ok(())
}

/// Summary of one (method, R) cell of a run.
#[derive(Clone, Debug)]
pub struct CellSummary {
    pub method: Method,
    pub accel: f64,
    pub psnr: f64,
    pub ssim: f64,
    pub nrmse: f64,
    pub ktrans_nrmse: f64,
}

fn create(path: PathBuf) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Runs the configured sweep and writes every artifact listed in the module
/// documentation.
pub fn run(cfg: &RunConfig) -> Result<Vec<CellSummary>> {
    cfg.validate()?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("config.json"),
        serde_json::to_string_pretty(cfg)? + "\n",
    )?;

    let truth = synthesize(&cfg.phantom)?;
    write_phantom(dir, &truth)?;
    let spec = &cfg.phantom;
    let roi = truth.tissue_roi();
    let frames = panel_frames(&truth.aif);

    let mut metrics = create(dir.join("metrics.csv"))?;
    let mut per_frame = create(dir.join("metrics_frames.csv"))?;
    let mut convergence = create(dir.join("convergence.csv"))?;
    let mut quant = create(dir.join("quantify.csv"))?;
    writeln!(metrics, "{METRICS_HEADER}")?;
    writeln!(per_frame, "{METRICS_HEADER}")?;
    writeln!(convergence, "method,accel,iteration,objective")?;
    writeln!(quant, "method,accel,phantom_id,ktrans_nrmse")?;

    let mut summary = Vec::new();
    for accel in cfg.mask.accel.to_vec() {
        let mask: SamplingMask = make_radial_mask(spec.t, spec.h, spec.w, accel, cfg.mask.seed)?;
        save_real(
            &dir.join(format!("mask_R{accel}.ktsr")),
            &mask.shape(),
            &mask.to_real(),
        )?;
        let d_u = corrupt(&truth, &mask, spec.noise_sigma, cfg.seed)?;
        save_complex(&dir.join(format!("kspace_R{accel}.ktsr")), d_u.samples())?;
        let zf = adjoint(&d_u);

        for method in cfg.method.to_vec() {
            let tag = format!("{method}_R{accel}");
            log::info!("reconstructing {tag}");
            let stem = dir.join(format!("model_{tag}"));
            let out = reconstruct(method, &d_u, accel, cfg, Some(&stem))?;
            save_complex(&dir.join(format!("recon_{tag}.ktsr")), &out.image)?;
            for (i, f) in out.cs_objective.iter().enumerate() {
                writeln!(convergence, "{method},{accel},{i},{f:.12e}")?;
            }
            if let Some(log) = &out.train_log {
                log.write_csv(create(dir.join(format!("train_{tag}.csv")))?)?;
            }

            let rep = MetricsReport::compute(&out.image, &truth.ref_images)?;
            for f in 0..rep.psnr.len() {
                write_metrics_row(
                    &mut per_frame,
                    method.name(),
                    accel,
                    spec.seed,
                    &f.to_string(),
                    rep.psnr[f],
                    rep.ssim[f],
                    rep.nrmse[f],
                )?;
            }
            write_metrics_row(
                &mut metrics,
                method.name(),
                accel,
                spec.seed,
                "mean",
                rep.psnr_mean(),
                rep.ssim_mean(),
                rep.nrmse_mean(),
            )?;

            let map = patlak_fit_signal(&out.image, &truth.signal, &truth.aif, spec.dt, &roi)?;
            let map_nrmse = ktrans_nrmse(&map, &truth.ktrans_map, &roi);
            writeln!(quant, "{method},{accel},{},{map_nrmse:.6}", spec.seed)?;
            save_real(
                &dir.join(format!("ktrans_{tag}.ktsr")),
                &[spec.h, spec.w],
                &map.ktrans,
            )?;
            ktrans_panel(&truth.ktrans_map, &map).save(&dir.join(format!("ktrans_{tag}.pgm")))?;
            comparison_panel(&truth.ref_images, &zf, &out.image, &frames)?
                .save(&dir.join(format!("panel_{tag}.pgm")))?;

            summary.push(CellSummary {
                method,
                accel,
                psnr: rep.psnr_mean(),
                ssim: rep.ssim_mean(),
                nrmse: rep.nrmse_mean(),
                ktrans_nrmse: map_nrmse,
            });
        }
    }
    for mut f in [metrics, per_frame, convergence, quant] {
        f.flush()?;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::CTensor;

    fn minimal_json(dir: &Path) -> String {
        format!(
            r#"{{"seed": 1, "phantom": {{"h": 32, "w": 32, "t": 8}}, "mask": {{"accel": 6, "seed": 2}},
                "method": "zf", "output-dir": {:?}}}"#,
            dir.to_str().unwrap()
        )
    }

    #[test]
    fn config_parses_and_rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::from_json(&minimal_json(dir.path())).unwrap();
        assert_eq!(cfg.method.to_vec(), vec![Method::Zf]);
        assert_eq!(cfg.mask.accel.to_vec(), vec![6.0]);
        let bad = minimal_json(dir.path()).replace("\"seed\": 1", "\"seed\": 1, \"bogus\": 3");
        assert!(matches!(RunConfig::from_json(&bad), Err(Error::Config(_))));
        let bad_inner = minimal_json(dir.path()).replace("\"t\": 8", "\"t\": 8, \"frames\": 3");
        assert!(RunConfig::from_json(&bad_inner).is_err());
    }

    #[test]
    fn sweep_lists_are_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let text = minimal_json(dir.path())
            .replace("\"accel\": 6", "\"accel\": [3, 6, 10]")
            .replace("\"method\": \"zf\"", "\"method\": [\"zf\", \"cs\"]");
        let cfg = RunConfig::from_json(&text).unwrap();
        assert_eq!(cfg.mask.accel.to_vec(), vec![3.0, 6.0, 10.0]);
        assert_eq!(cfg.method.to_vec(), vec![Method::Zf, Method::Cs]);
    }

    #[test]
    fn profile_of_constant_series_is_uniform() {
        let s = CTensor::from_real(&[4, 4, 8], &[0.5; 128]).unwrap();
        let (panel, profiles) = profile(&[s.clone(), s], 2).unwrap();
        assert_eq!(profiles.len(), 2);
        assert!(profiles.iter().flatten().all(|&v| v == 0.5));
        assert_eq!(panel.height(), 8);
        assert!(profile(&[CTensor::zeros(&[4, 4, 8])], 4).is_err());
    }

    #[test]
    fn phantom_directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let truth = synthesize(&PhantomSpec::default()).unwrap();
        write_phantom(dir.path(), &truth).unwrap();
        assert_eq!(load_phantom(dir.path()).unwrap(), truth);
    }

    #[test]
    fn panel_frames_are_in_range() {
        let f = panel_frames(&[0.0, 1.0, 3.0, 2.0, 1.0]);
        assert_eq!(f, [2, 3, 4]);
    }
}
