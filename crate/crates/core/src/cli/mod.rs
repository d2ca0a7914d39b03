//! The `ivcnav` command line.

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Error;
use crate::eval::{best_row, evaluate, load_eval_samples, sweep_n, EvalReport};
use crate::localizer::{annotate, localize, RgbFrame};
use crate::model::{load_weights, residual_net_spec, save_weights, ModelSpec, Weights};
use crate::phantom::{generate_dataset, read_clip, ClassCounts, Manifest, MaskShape, Split};
use crate::service::{serve, GuidanceModel};
use crate::shap::{estimate_shapley, partition_clip, render_heatmap};
use crate::tensor::VideoClip;
use crate::train::{grad_check, train, Batch, LossKind, TargetKind};

pub use config::{
    defaults_help, Arch, GradcheckConfig, Inputs, ModelConfig, RunConfig, SweepConfig, DEFAULT_SWEEP, DEFAULT_WIDTHS,
};

#[derive(Debug, Parser)]
#[command(name = "ivcnav", version, about = "Decision-model guided vessel localization for ultrasound video")]
#[command(after_long_help = defaults_help())]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration; flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Parent directory for run directories.
    #[arg(long, global = true, default_value = "runs")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Default)]
pub struct PhantomArgs {
    /// Dataset seed [default: 42].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sonogram mask shape [default: fan].
    #[arg(long, value_enum)]
    pub mask: Option<MaskArg>,
    /// Clip dims as t,h,w [default: 16,64,64].
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub dims: Option<Vec<usize>>,
    /// Clips per class as no_ivc,ivc_no_sniff,ivc_sniff [default: 613,177,210].
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub counts: Option<Vec<usize>>,
    /// Rescale the class counts to this total, keeping their ratio.
    #[arg(long)]
    pub total: Option<usize>,
    /// Speckle strength in [0, 1] [default: 0.5].
    #[arg(long)]
    pub speckle: Option<f64>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum MaskArg {
    Fan,
    Rect,
}

impl From<MaskArg> for MaskShape {
    fn from(m: MaskArg) -> Self {
        match m {
            MaskArg::Fan => MaskShape::Fan,
            MaskArg::Rect => MaskShape::Rect,
        }
    }
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
    All,
}

impl SplitArg {
    fn resolve(self) -> Option<Split> {
        match self {
            SplitArg::Train => Some(Split::Train),
            SplitArg::Val => Some(Split::Val),
            SplitArg::Test => Some(Split::Test),
            SplitArg::All => None,
        }
    }
}

#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    /// Architecture [default: tiny-x3d].
    #[arg(long, value_enum)]
    pub arch: Option<Arch>,
    /// Channel widths of the four stages [default: 8,16,32,64].
    #[arg(long, value_delimiter = ',', num_args = 4)]
    pub widths: Option<Vec<usize>>,
    /// Seed of the initial weights [default: 42].
    #[arg(long)]
    pub model_seed: Option<u64>,
}

#[derive(Debug, Args, Default)]
pub struct TrainArgs {
    /// Learning rate; 0 freezes the model [default: 0.02].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Momentum in [0, 1) [default: 0.9].
    #[arg(long)]
    pub momentum: Option<f64>,
    /// [default: 8]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// [default: 8]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Shuffling seed [default: 42].
    #[arg(long)]
    pub seed: Option<u64>,
    /// [default: logistic]
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
    /// [default: presence]
    #[arg(long, value_enum)]
    pub target: Option<TargetArg>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum LossArg {
    Logistic,
    Squared,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum TargetArg {
    Presence,
    Contraction,
}

#[derive(Debug, Args, Default)]
pub struct LocalizerArgs {
    /// Feature-map tap [default: stage3].
    #[arg(long)]
    pub tap: Option<String>,
    /// Candidate count n [default: 400].
    #[arg(long)]
    pub n: Option<usize>,
    /// Outlier distance in pixels [default: 40 * height / 224].
    #[arg(long)]
    pub outlier_dist: Option<f64>,
    /// Annotation radius in pixels [default: 20 * height / 224].
    #[arg(long)]
    pub radius: Option<f64>,
    /// Black threshold [default: 0].
    #[arg(long)]
    pub black_eps: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct ShapArgs {
    /// Piece rows per frame [default: 4].
    #[arg(long)]
    pub grid_h: Option<usize>,
    /// Piece columns per frame [default: 4].
    #[arg(long)]
    pub grid_w: Option<usize>,
    /// Model evaluations [default: 51200].
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Permutation seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a phantom dataset (GVID clips and a JSON-lines manifest).
    Generate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        phantom: PhantomArgs,
    },
    /// Train a model on a manifest's training split.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Start from these weights instead of a fresh initialization.
        #[arg(long)]
        init: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Presence accuracy and localization hit-rate on a manifest split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// [default: test]
        #[arg(long, value_enum)]
        split: Option<SplitArg>,
        #[command(flatten)]
        localizer: LocalizerArgs,
    },
    /// Localize one clip; writes annotated PPM frames and a JSON sidecar.
    Localize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        clip: Option<PathBuf>,
        #[command(flatten)]
        localizer: LocalizerArgs,
    },
    /// Shapley attribution of one clip; writes phi JSON and heatmap frames.
    Shap {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        clip: Option<PathBuf>,
        #[command(flatten)]
        shap: ShapArgs,
    },
    /// Hit-rate for each candidate count n.
    #[command(alias = "sweep_n")]
    SweepN {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// [default: test]
        #[arg(long, value_enum)]
        split: Option<SplitArg>,
        /// Candidate counts [default: 25,50,100,200,400].
        #[arg(long, value_delimiter = ',')]
        ns: Option<Vec<usize>>,
        #[command(flatten)]
        localizer: LocalizerArgs,
    },
    /// Compare analytic gradients with central differences on a small model.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        /// Residual blocks, 1 or 2 [default: 1].
        #[arg(long)]
        blocks: Option<usize>,
        /// [default: 1e-4]
        #[arg(long)]
        eps: Option<f64>,
        /// [default: 0]
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the WebSocket guidance service.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Listen address [default: 127.0.0.1:8765].
        #[arg(long)]
        bind: Option<String>,
        /// Directory with the browser client, served at `/`.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
        /// Mask shape of the simulated probe [default: fan].
        #[arg(long, value_enum)]
        mask: Option<MaskArg>,
        #[command(flatten)]
        localizer: LocalizerArgs,
    },
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl PhantomArgs {
    fn apply(self, c: &mut RunConfig) {
        set(&mut c.phantom.seed, self.seed);
        set(&mut c.phantom.mask_shape, self.mask.map(Into::into));
        set(&mut c.phantom.dims, self.dims.map(|d| [d[0], d[1], d[2]]));
        set(
            &mut c.phantom.counts,
            self.counts.map(|v| ClassCounts {
                no_ivc: v[0],
                ivc_no_sniff: v[1],
                ivc_sniff: v[2],
            }),
        );
        if let Some(total) = self.total {
            c.phantom.counts = c.phantom.counts.scaled_to(total);
        }
        set(&mut c.phantom.speckle_strength, self.speckle);
    }
}

impl ModelArgs {
    fn apply(self, c: &mut RunConfig) {
        set(&mut c.model.arch, self.arch);
        set(&mut c.model.widths, self.widths.map(|w| [w[0], w[1], w[2], w[3]]));
        set(&mut c.model.seed, self.model_seed);
    }
}

impl TrainArgs {
    fn apply(self, c: &mut RunConfig) {
        let t = &mut c.train;
        set(&mut t.learning_rate, self.lr);
        set(&mut t.momentum, self.momentum);
        set(&mut t.epochs, self.epochs);
        set(&mut t.batch_size, self.batch_size);
        set(&mut t.seed, self.seed);
        set(
            &mut t.loss_kind,
            self.loss.map(|l| match l {
                LossArg::Logistic => LossKind::Logistic,
                LossArg::Squared => LossKind::Squared,
            }),
        );
        set(
            &mut t.target,
            self.target.map(|l| match l {
                TargetArg::Presence => TargetKind::Presence,
                TargetArg::Contraction => TargetKind::Contraction,
            }),
        );
    }
}

impl LocalizerArgs {
    fn apply(self, c: &mut RunConfig) {
        let l = &mut c.localizer;
        set(&mut l.tap_name, self.tap);
        set(&mut l.n_candidates, self.n);
        if self.outlier_dist.is_some() {
            l.outlier_dist_px = self.outlier_dist;
        }
        if self.radius.is_some() {
            l.annotation_radius_px = self.radius;
        }
        set(&mut l.black_eps, self.black_eps);
    }
}

impl ShapArgs {
    fn apply(self, c: &mut RunConfig) {
        set(&mut c.shap.grid_h, self.grid_h);
        set(&mut c.shap.grid_w, self.grid_w);
        set(&mut c.shap.iterations, self.iterations);
        set(&mut c.shap.seed, self.seed);
    }
}

fn base_config(common: &Common) -> anyhow::Result<RunConfig> {
    Ok(match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    })
}

/// Resolves the configuration for `command` from the config file and flags.
pub fn resolve(command: Command) -> anyhow::Result<(RunConfig, PathBuf)> {
    let (c, out_dir) = match command {
        Command::Generate { common, phantom } => {
            let mut c = base_config(&common)?;
            phantom.apply(&mut c);
            (c.with_command("generate"), common.out_dir)
        }
        Command::Train {
            common,
            manifest,
            init,
            model,
            train,
        } => {
            let mut c = base_config(&common)?;
            set(&mut c.inputs.manifest, manifest.map(Some));
            set(&mut c.inputs.init, init.map(Some));
            model.apply(&mut c);
            train.apply(&mut c);
            (c.with_command("train"), common.out_dir)
        }
        Command::Eval {
            common,
            weights,
            manifest,
            split,
            localizer,
        } => {
            let mut c = base_config(&common)?;
            set(&mut c.inputs.weights, weights.map(Some));
            set(&mut c.inputs.manifest, manifest.map(Some));
            set(&mut c.split, split.map(SplitArg::resolve));
            localizer.apply(&mut c);
            (c.with_command("eval"), common.out_dir)
        }
        Command::Localize {
            common,
            weights,
            clip,
            localizer,
        } => {
            let mut c = base_config(&common)?;
            set(&mut c.inputs.weights, weights.map(Some));
            set(&mut c.inputs.clip, clip.map(Some));
            localizer.apply(&mut c);
            (c.with_command("localize"), common.out_dir)
        }
        Command::Shap {
            common,
            weights,
            clip,
            shap,
        } => {
            let mut c = base_config(&common)?;
            set(&mut c.inputs.weights, weights.map(Some));
            set(&mut c.inputs.clip, clip.map(Some));
            shap.apply(&mut c);
            (c.with_command("shap"), common.out_dir)
        }
        Command::SweepN {
            common,
            weights,
            manifest,
            split,
            ns,
            localizer,
        } => {
            let mut c = base_config(&common)?;
            set(&mut c.inputs.weights, weights.map(Some));
            set(&mut c.inputs.manifest, manifest.map(Some));
            set(&mut c.split, split.map(SplitArg::resolve));
            set(&mut c.sweep.ns, ns);
            localizer.apply(&mut c);
            (c.with_command("sweep-n"), common.out_dir)
        }
        Command::Gradcheck {
            common,
            blocks,
            eps,
            seed,
        } => {
            let mut c = base_config(&common)?;
            set(&mut c.gradcheck.blocks, blocks);
            set(&mut c.gradcheck.eps, eps);
            set(&mut c.gradcheck.seed, seed);
            (c.with_command("gradcheck"), common.out_dir)
        }
        Command::Serve {
            common,
            weights,
            bind,
            ui_dir,
            mask,
            localizer,
        } => {
            let mut c = base_config(&common)?;
            set(&mut c.inputs.weights, weights.map(Some));
            set(&mut c.serve.bind, bind);
            set(&mut c.serve.ui_dir, ui_dir.map(Some));
            set(&mut c.phantom.mask_shape, mask.map(Into::into));
            localizer.apply(&mut c);
            (c.with_command("serve"), common.out_dir)
        }
    };
    c.localizer.validate()?;
    c.train.validate()?;
    Ok((c, out_dir))
}

impl RunConfig {
    fn with_command(mut self, name: &str) -> Self {
        self.command = Some(name.to_owned());
        self
    }

    /// Seed used in the run directory name.
    fn run_seed(&self) -> u64 {
        match self.command.as_deref() {
            Some("generate") | Some("serve") => self.phantom.seed,
            Some("train") => self.train.seed,
            Some("shap") => self.shap.seed,
            Some("gradcheck") => self.gradcheck.seed,
            _ => self.model.seed,
        }
    }
}

/// Creates `<out>/<timestamp>-<command>-seed<seed>` (suffixed if taken) and
/// writes `run.json`.
pub fn make_run_dir(config: &RunConfig, out_dir: &Path) -> anyhow::Result<PathBuf> {
    let stamp = chrono::Local::now().format("%Y%m%dT%H%M%S");
    let name = format!(
        "{stamp}-{}-seed{}",
        config.command.as_deref().unwrap_or("run"),
        config.run_seed()
    );
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut dir = out_dir.join(&name);
    let mut k = 1;
    while dir.exists() {
        dir = out_dir.join(format!("{name}-{k}"));
        k += 1;
    }
    std::fs::create_dir(&dir).map_err(|e| Error::io(&dir, e))?;
    write_json(&dir.join("run.json"), config)?;
    Ok(dir)
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> anyhow::Result<&'a Path> {
    match p {
        Some(p) => Ok(p),
        None => bail!(Error::Config(format!("missing input: pass --{flag} or set inputs.{flag}"))),
    }
}

fn write_frames(dir: &Path, frames: &[RgbFrame]) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, f) in frames.iter().enumerate() {
        f.write_ppm(&dir.join(format!("frame_{i:03}.ppm")))?;
    }
    Ok(())
}

/// Executes a resolved command inside `run_dir`, returning a one-line summary
/// for stdout.
pub fn execute(config: &RunConfig, run_dir: &Path) -> anyhow::Result<String> {
    match config.command.as_deref() {
        Some("generate") => cmd_generate(config, run_dir),
        Some("train") => cmd_train(config, run_dir),
        Some("eval") => cmd_eval(config, run_dir),
        Some("localize") => cmd_localize(config, run_dir),
        Some("shap") => cmd_shap(config, run_dir),
        Some("sweep-n") => cmd_sweep_n(config, run_dir),
        Some("gradcheck") => cmd_gradcheck(config, run_dir),
        Some("serve") => cmd_serve(config),
        other => bail!(Error::Config(format!("unknown command {other:?}"))),
    }
}

pub fn cmd_generate(c: &RunConfig, run_dir: &Path) -> anyhow::Result<String> {
    let manifest = generate_dataset(&c.phantom, &run_dir.join("dataset"))?;
    Ok(manifest.display().to_string())
}

pub fn cmd_train(c: &RunConfig, run_dir: &Path) -> anyhow::Result<String> {
    let manifest = Manifest::read(required(&c.inputs.manifest, "manifest")?)?;
    let (spec, weights) = match &c.inputs.init {
        Some(p) => load_weights(p)?,
        None => {
            let first = manifest
                .entries
                .first()
                .ok_or_else(|| Error::Validation("manifest is empty".into()))?;
            let dims = read_clip(&manifest.clip_path(first))?.dims();
            c.model.build(dims)?
        }
    };
    let metrics_path = run_dir.join("metrics.jsonl");
    let mut metrics = std::fs::File::create(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
    let mut io_err = None;
    let (trained, history) = train(&spec, &weights, &manifest, &c.train, |m| {
        let line = serde_json::to_string(m).expect("metrics serialize");
        if let Err(e) = writeln!(metrics, "{line}") {
            io_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = io_err {
        return Err(Error::io(&metrics_path, e).into());
    }
    let out = run_dir.join("weights.nnwf");
    save_weights(&spec, &trained, &out)?;
    let last = history.last().context("no epochs ran")?;
    Ok(format!("{} loss={:.6} epochs={}", out.display(), last.loss, history.len()))
}

fn load_model(c: &RunConfig) -> anyhow::Result<(ModelSpec, Weights<f32>)> {
    Ok(load_weights(required(&c.inputs.weights, "weights")?)?)
}

#[derive(Serialize)]
struct EvalSummary<'a> {
    clips: usize,
    accuracy: f64,
    confusion: &'a crate::eval::Confusion,
    true_positives: usize,
    hits: usize,
    hit_rate: f64,
}

impl<'a> From<&'a EvalReport> for EvalSummary<'a> {
    fn from(r: &'a EvalReport) -> Self {
        Self {
            clips: r.clips,
            accuracy: r.accuracy,
            confusion: &r.confusion,
            true_positives: r.true_positives,
            hits: r.hits,
            hit_rate: r.hit_rate,
        }
    }
}

pub fn cmd_eval(c: &RunConfig, run_dir: &Path) -> anyhow::Result<String> {
    let (spec, weights) = load_model(c)?;
    let manifest = Manifest::read(required(&c.inputs.manifest, "manifest")?)?;
    let samples = load_eval_samples(&manifest, c.split)?;
    let report = evaluate(&spec, &weights, &samples, &c.localizer)?;
    write_json(&run_dir.join("eval.json"), &report)?;
    Ok(serde_json::to_string(&EvalSummary::from(&report))?)
}

pub fn cmd_localize(c: &RunConfig, run_dir: &Path) -> anyhow::Result<String> {
    let (spec, weights) = load_model(c)?;
    let clip = read_clip(required(&c.inputs.clip, "clip")?)?;
    let result = localize(&spec, &weights, &clip, &c.localizer)?;
    write_frames(&run_dir.join("frames"), &annotate(&clip, &result))?;
    let sidecar = result.sidecar();
    write_json(&run_dir.join("localization.json"), &sidecar)?;
    Ok(serde_json::to_string(&sidecar)?)
}

#[derive(Serialize)]
struct ShapOutput<'a> {
    grid: crate::shap::PieceGrid,
    iterations_used: usize,
    sweeps: usize,
    baseline_value: f64,
    full_value: f64,
    phi: &'a [f64],
}

pub fn cmd_shap(c: &RunConfig, run_dir: &Path) -> anyhow::Result<String> {
    let (spec, weights) = load_model(c)?;
    let clip = read_clip(required(&c.inputs.clip, "clip")?)?;
    let grid = partition_clip(&clip, c.shap.grid_h, c.shap.grid_w)?;
    let attr = estimate_shapley(&spec, &weights, &clip, &grid, c.shap.iterations, c.shap.seed)?;
    write_json(
        &run_dir.join("phi.json"),
        &ShapOutput {
            grid,
            iterations_used: attr.iterations_used,
            sweeps: attr.sweeps,
            baseline_value: attr.baseline_value,
            full_value: attr.full_value,
            phi: &attr.phi,
        },
    )?;
    write_frames(&run_dir.join("heatmap"), &render_heatmap(&clip, &attr, &grid)?)?;
    Ok(format!(
        "sweeps={} full={:.6} baseline={:.6} efficiency_gap={:.3e}",
        attr.sweeps,
        attr.full_value,
        attr.baseline_value,
        attr.efficiency_gap()
    ))
}

pub fn cmd_sweep_n(c: &RunConfig, run_dir: &Path) -> anyhow::Result<String> {
    let (spec, weights) = load_model(c)?;
    let manifest = Manifest::read(required(&c.inputs.manifest, "manifest")?)?;
    let samples = load_eval_samples(&manifest, c.split)?;
    let rows = sweep_n(&spec, &weights, &samples, &c.localizer, &c.sweep.ns)?;
    write_json(&run_dir.join("sweep.json"), &rows)?;
    let mut table = String::from("n\thit_rate\thits\ttrue_positives");
    for r in &rows {
        table.push_str(&format!("\n{}\t{:.4}\t{}\t{}", r.n, r.hit_rate, r.hits, r.true_positives));
    }
    if let Some(best) = best_row(&rows) {
        table.push_str(&format!("\nbest n = {}", best.n));
    }
    Ok(table)
}

/// Small model, two random clips and one positive/one negative target.
pub fn gradcheck_fixture(blocks: usize, seed: u64) -> anyhow::Result<(ModelSpec, Weights<f64>, Batch)> {
    if !(1..=2).contains(&blocks) {
        bail!(Error::Config(format!("gradcheck supports 1 or 2 blocks, got {blocks}")));
    }
    let widths = vec![2; blocks];
    let dims = [2, 4, 4];
    let spec = residual_net_spec("gradcheck", dims, &widths)?;
    let mut weights = Weights::<f32>::he_init(&spec, seed).cast::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    for (d, b) in spec.param_decls().iter().zip(weights.blocks.iter_mut()) {
        if d.name.ends_with(".beta") || d.name.ends_with(".bias") {
            b.data.iter_mut().for_each(|x| *x = rng.random_range(-0.3..0.3));
        }
    }
    let n = dims.iter().product::<usize>();
    let clips = (0..2)
        .map(|_| VideoClip::from_frames(dims, (0..n).map(|_| rng.random_range(0.0f32..1.0)).collect()))
        .collect::<Result<Vec<_>, _>>()?;
    let batch = Batch::new(clips, vec![1.0, 0.0])?;
    Ok((spec, weights, batch))
}

pub fn cmd_gradcheck(c: &RunConfig, run_dir: &Path) -> anyhow::Result<String> {
    let g = &c.gradcheck;
    let (spec, weights, batch) = gradcheck_fixture(g.blocks, g.seed)?;
    let report = grad_check(&spec, &weights, &batch, LossKind::Logistic, g.eps, g.seed)?;
    write_json(&run_dir.join("gradcheck.json"), &report)?;
    Ok(format!("max_rel_error={:.3e} checked={}", report.max_rel_error, report.checked))
}

pub fn cmd_serve(c: &RunConfig) -> anyhow::Result<String> {
    let (spec, weights) = load_model(c)?;
    let model = GuidanceModel::new(spec, weights, c.localizer.clone(), c.phantom.mask_shape)?;
    let rt = tokio::runtime::Runtime::new().context("starting async runtime")?;
    rt.block_on(serve(&c.serve, model))?;
    Ok("service stopped".into())
}

/// Short machine-readable category of an error.
pub fn error_kind(e: &anyhow::Error) -> &'static str {
    match e.downcast_ref::<Error>() {
        Some(Error::Dimension { .. }) => "dimension",
        Some(Error::Config(_)) => "config",
        Some(Error::Validation(_)) => "validation",
        Some(Error::UnknownTap(_)) => "unknown_tap",
        Some(Error::UnknownParam(_)) => "unknown_param",
        Some(Error::WeightFile(_)) => "weight_file",
        Some(Error::ClipFile(_)) => "clip_file",
        Some(Error::Manifest { .. }) => "manifest",
        Some(Error::Generation(_)) => "generation",
        Some(Error::Session(_)) => "session",
        Some(Error::Protocol(_)) => "protocol",
        Some(Error::Io { .. }) => "io",
        Some(Error::Json(_)) => "json",
        None => "internal",
    }
}

/// Parses arguments, runs the command and maps failures to exit code 1 with
/// one JSON line on stderr. Usage errors exit with 2 via clap.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = resolve(cli.command).and_then(|(config, out_dir)| {
        let run_dir = make_run_dir(&config, &out_dir)?;
        tracing::info!(run_dir = %run_dir.display(), "run directory");
        execute(&config, &run_dir)
    });
    match outcome {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            let line = serde_json::json!({
                "error": { "kind": error_kind(&e), "message": format!("{e:#}") }
            });
            eprintln!("{line}");
            1
        }
    }
}
