//! Stochastic budget training.
//!
//! Each step samples a splat budget, renders both the budget prefix and the
//! full set (always two renders, even when the sampled budget is the full
//! set), backpropagates the combined two-term loss, applies one Adam update
//! over all splats, and re-sorts storage by the current importance scores so
//! every prefix keeps holding the currently most important splats.

use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adam::{adam_update, AdamParams, AdamState, LearningRates};
use crate::checkpoint::{write_checkpoint, write_sidecar, Sidecar};
use crate::error::{Error, Result};
use crate::grad::backward;
use crate::image::Image;
use crate::loss::{mgs_loss, LossConfig};
use crate::ordering::{reorder, OrderingCriterion};
use crate::render::{render, RenderSettings};
use crate::splat::{init_model, logit, InitConfig, SplatModel, COLOR_LOGIT_CLAMP};

/// How the per-step budget is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetMode {
    /// Budget ratio drawn uniformly from [r_min, 1] each step.
    Stochastic,
    /// Cycle through the fixed `mrl_ratios` grid.
    MrlGrid,
    /// Always the full set, with the second loss term disabled; this is
    /// plain single-render training expressed in the two-render loop.
    FullOnly,
}

impl BudgetMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "stochastic" => Ok(BudgetMode::Stochastic),
            "mrl_grid" => Ok(BudgetMode::MrlGrid),
            "full_only" => Ok(BudgetMode::FullOnly),
            other => Err(Error::InvalidConfig(format!(
                "unknown budget mode {other:?}"
            ))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            BudgetMode::Stochastic => "stochastic",
            BudgetMode::MrlGrid => "mrl_grid",
            BudgetMode::FullOnly => "full_only",
        }
    }
}

/// Optional capacity maintenance: dead splats are teleported to poorly
/// reconstructed pixels instead of being pruned, keeping N fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelocationConfig {
    pub enabled: bool,
    /// Splats with effective opacity below this get relocated.
    pub opacity_threshold: f64,
    /// Steps between relocation sweeps.
    pub interval: u64,
    /// Scale the relocated splats are reset to, in pixels.
    pub reset_scale: f64,
}

impl Default for RelocationConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            opacity_threshold: 0.005,
            interval: 500,
            reset_scale: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: u64,
    /// Smallest budget ratio sampled during training, in (0, 1].
    pub r_min: f64,
    pub loss: LossConfig,
    pub ordering: OrderingCriterion,
    /// Reorder every this many steps (1 = every step).
    pub reorder_interval: u64,
    pub lrs: LearningRates,
    pub adam: AdamParams,
    pub seed: u64,
    pub relocation: RelocationConfig,
    pub budget_mode: BudgetMode,
    pub mrl_ratios: Vec<f64>,
    pub render: RenderSettings,
    /// Log every this many steps; the final step is always logged.
    pub log_interval: u64,
    /// Write a checkpoint every this many steps; 0 disables periodic writes.
    pub checkpoint_interval: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 5000,
            r_min: 0.05,
            loss: LossConfig::default(),
            ordering: OrderingCriterion::default(),
            reorder_interval: 1,
            lrs: LearningRates::default(),
            adam: AdamParams::default(),
            seed: 0,
            relocation: RelocationConfig::default(),
            budget_mode: BudgetMode::Stochastic,
            mrl_ratios: vec![0.125, 0.25, 0.5, 1.0],
            render: RenderSettings::default(),
            log_interval: 10,
            checkpoint_interval: 0,
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let r_min_ok = self.r_min > 0.0 && self.r_min <= 1.0;
        if !r_min_ok {
            return Err(Error::InvalidConfig("r_min must lie in (0, 1]".into()));
        }
        if self.reorder_interval == 0 {
            return Err(Error::InvalidConfig("reorder_interval must be >= 1".into()));
        }
        if self.log_interval == 0 {
            return Err(Error::InvalidConfig("log_interval must be >= 1".into()));
        }
        if self.mrl_ratios.is_empty()
            || self
                .mrl_ratios
                .iter()
                .any(|r| !(*r > 0.0 && *r <= 1.0))
        {
            return Err(Error::InvalidConfig(
                "mrl_ratios must be non-empty with entries in (0, 1]".into(),
            ));
        }
        if self.relocation.enabled {
            if self.relocation.interval == 0 {
                return Err(Error::InvalidConfig(
                    "relocation.interval must be >= 1".into(),
                ));
            }
            let threshold_ok = self.relocation.opacity_threshold > 0.0
                && self.relocation.opacity_threshold < 1.0;
            if !threshold_ok {
                return Err(Error::InvalidConfig(
                    "relocation.opacity_threshold must lie in (0, 1)".into(),
                ));
            }
            if !(self.relocation.reset_scale.is_finite() && self.relocation.reset_scale > 0.0) {
                return Err(Error::InvalidConfig(
                    "relocation.reset_scale must be > 0".into(),
                ));
            }
        }
        self.loss.validate()?;
        self.lrs.validate()?;
        self.render.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainLogRecord {
    pub iteration: u64,
    pub k: usize,
    pub prefix_loss: f64,
    pub full_loss: f64,
    pub ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<TrainLogRecord>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,k,prefix_loss,full_loss,ms\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.iteration, r.k, r.prefix_loss, r.full_loss, r.ms
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Budget from a keep ratio: `k = ceil(r * n)` clamped into `[1, n]`.
#[inline]
pub fn budget_from_ratio(r: f64, n: usize) -> usize {
    ((r * n as f64).ceil() as usize).clamp(1, n)
}

/// Draws a keep ratio uniformly from [r_min, 1) and returns the budget.
/// `r_min = 1` always yields the full set.
pub fn sample_budget(rng: &mut impl Rng, r_min: f64, n: usize) -> Result<usize> {
    let r_min_ok = r_min > 0.0 && r_min <= 1.0;
    if !r_min_ok {
        return Err(Error::InvalidConfig("r_min must lie in (0, 1]".into()));
    }
    if n == 0 {
        return Err(Error::InvalidConfig("model has no splats".into()));
    }
    let r = r_min + (1.0 - r_min) * rng.random::<f64>();
    Ok(budget_from_ratio(r, n))
}

/// Relocates every splat whose effective opacity falls below the threshold.
///
/// New centers are pixel centers drawn with probability proportional to the
/// current per-pixel L1 error of the full render (uniform over the canvas
/// when the error map is all zero). Relocated splats get opacity 0.5, the
/// reset scale, color sampled from the target, and zeroed optimizer moments;
/// depth and id are preserved and N never changes.
pub fn maintain_capacity(
    model: &mut SplatModel,
    target: &Image,
    rng: &mut impl Rng,
    reloc: &RelocationConfig,
    settings: &RenderSettings,
    mut adam: Option<&mut AdamState>,
) -> Result<usize> {
    let dead: Vec<usize> = model
        .splats
        .iter()
        .enumerate()
        .filter(|(_, s)| s.opacity() < reloc.opacity_threshold)
        .map(|(i, _)| i)
        .collect();
    if dead.is_empty() {
        return Ok(0);
    }
    let rendered = render(model, model.len(), settings)?;
    let (w, h) = (model.width as usize, model.height as usize);
    let mut cdf = Vec::with_capacity(w * h);
    let mut total = 0.0;
    for p in 0..w * h {
        let i = 3 * p;
        let e = (rendered.data()[i] - target.data()[i]).abs()
            + (rendered.data()[i + 1] - target.data()[i + 1]).abs()
            + (rendered.data()[i + 2] - target.data()[i + 2]).abs();
        total += e;
        cdf.push(total);
    }
    let log_scale = reloc.reset_scale.ln();
    for &idx in &dead {
        let u = rng.random::<f64>();
        let pixel = if total > 0.0 {
            let needle = u * total;
            cdf.partition_point(|&c| c < needle).min(w * h - 1)
        } else {
            // Degenerate error map: fall back to uniform.
            ((u * (w * h) as f64) as usize).min(w * h - 1)
        };
        let (px, py) = ((pixel % w) as u32, (pixel / w) as u32);
        let rgb = target.pixel(px, py);
        let s = &mut model.splats[idx];
        s.mu = [px as f64 + 0.5, py as f64 + 0.5];
        s.opacity_raw = 0.0;
        s.log_scale = [log_scale; 2];
        s.color_raw = [
            logit(rgb[0].clamp(COLOR_LOGIT_CLAMP, 1.0 - COLOR_LOGIT_CLAMP)),
            logit(rgb[1].clamp(COLOR_LOGIT_CLAMP, 1.0 - COLOR_LOGIT_CLAMP)),
            logit(rgb[2].clamp(COLOR_LOGIT_CLAMP, 1.0 - COLOR_LOGIT_CLAMP)),
        ];
        if let Some(state) = adam.as_deref_mut() {
            state.zero_entry(idx);
        }
    }
    Ok(dead.len())
}

/// Owns a model, its optimizer state and RNG for the duration of training.
pub struct Trainer {
    pub model: SplatModel,
    pub target: Image,
    pub cfg: TrainConfig,
    pub adam: AdamState,
    pub log: TrainLog,
    pub step_index: u64,
    /// Renders issued by this trainer, including capacity maintenance.
    pub render_calls: u64,
    pub backward_calls: u64,
    rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(model: SplatModel, target: Image, cfg: TrainConfig) -> Result<Self> {
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Self::from_parts(model, target, cfg, rng)
    }

    /// Like [`Trainer::new`] but continues an existing RNG stream, so
    /// initialization and training can share one seed.
    pub fn from_parts(
        model: SplatModel,
        target: Image,
        cfg: TrainConfig,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        model.validate()?;
        if target.width() != model.width || target.height() != model.height {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{} target", model.width, model.height),
                actual: format!("{}x{}", target.width(), target.height()),
            });
        }
        let n = model.len();
        Ok(Self {
            model,
            target,
            cfg,
            adam: AdamState::new(n),
            log: TrainLog::default(),
            step_index: 0,
            render_calls: 0,
            backward_calls: 0,
            rng,
        })
    }

    fn pick_budget(&mut self) -> Result<usize> {
        let n = self.model.len();
        match self.cfg.budget_mode {
            BudgetMode::Stochastic => sample_budget(&mut self.rng, self.cfg.r_min, n),
            BudgetMode::MrlGrid => {
                let ratios = &self.cfg.mrl_ratios;
                let r = ratios[(self.step_index % ratios.len() as u64) as usize];
                Ok(budget_from_ratio(r, n))
            }
            BudgetMode::FullOnly => Ok(n),
        }
    }

    /// One training step. Exactly two renders and two backward passes,
    /// independent of N and the sampled budget.
    pub fn step(&mut self) -> Result<TrainLogRecord> {
        let start = Instant::now();
        let n = self.model.len();
        let k = self.pick_budget()?;

        let prefix_img = render(&self.model, k, &self.cfg.render)?;
        self.render_calls += 1;
        let full_img = render(&self.model, n, &self.cfg.render)?;
        self.render_calls += 1;

        let mut loss_cfg = self.cfg.loss;
        if self.cfg.budget_mode == BudgetMode::FullOnly {
            loss_cfg.gamma = 0.0;
        }
        let loss = mgs_loss(&prefix_img, &full_img, &self.target, &loss_cfg)?;
        if !loss.total.is_finite() {
            return Err(Error::TrainingDiverged {
                step: self.step_index,
            });
        }

        let mut grads = backward(&self.model, k, &self.cfg.render, &loss.prefix_grad)?;
        self.backward_calls += 1;
        let full_grads = backward(&self.model, n, &self.cfg.render, &loss.full_grad)?;
        self.backward_calls += 1;
        grads.add_assign(&full_grads);

        adam_update(
            &mut self.model,
            &grads,
            &mut self.adam,
            &self.cfg.lrs,
            &self.cfg.adam,
        )
        .map_err(|e| match e {
            Error::TrainingDiverged { .. } => Error::TrainingDiverged {
                step: self.step_index,
            },
            other => other,
        })?;

        if self.step_index.is_multiple_of(self.cfg.reorder_interval) {
            let perm = reorder(&mut self.model, self.cfg.ordering)?;
            self.adam.permute(&perm);
        }

        if self.cfg.relocation.enabled
            && (self.step_index + 1).is_multiple_of(self.cfg.relocation.interval)
        {
            self.render_calls += 1;
            maintain_capacity(
                &mut self.model,
                &self.target,
                &mut self.rng,
                &self.cfg.relocation,
                &self.cfg.render,
                Some(&mut self.adam),
            )?;
        }

        let record = TrainLogRecord {
            iteration: self.step_index,
            k,
            prefix_loss: loss.prefix_loss,
            full_loss: loss.full_loss,
            ms: start.elapsed().as_secs_f64() * 1e3,
        };
        if self.step_index.is_multiple_of(self.cfg.log_interval) {
            self.log.records.push(record);
        }
        self.step_index += 1;
        Ok(record)
    }

    /// Runs `iterations` steps, writing periodic checkpoints when configured.
    pub fn run(&mut self, iterations: u64) -> Result<()> {
        for _ in 0..iterations {
            let record = self.step()?;
            let completed = self.step_index;
            if self.cfg.checkpoint_interval > 0
                && completed.is_multiple_of(self.cfg.checkpoint_interval)
            {
                self.write_checkpoint_files(&format!("checkpoint_{completed:06}"))?;
            }
            if completed == iterations && self.log.records.last() != Some(&record) {
                self.log.records.push(record);
            }
        }
        Ok(())
    }

    fn write_checkpoint_files(&self, stem: &str) -> Result<()> {
        if let Some(dir) = &self.cfg.checkpoint_dir {
            std::fs::create_dir_all(dir)?;
            write_checkpoint(&self.model, &dir.join(format!("{stem}.mgs")))?;
            let sidecar = Sidecar::new(self.step_index, &self.cfg, &self.adam);
            write_sidecar(&sidecar, &dir.join(format!("{stem}.state.json")))?;
        }
        Ok(())
    }

    /// Final reorder under the active criterion, final checkpoint write when
    /// configured, then hands back the model and log.
    pub fn finalize(mut self) -> Result<(SplatModel, TrainLog)> {
        let perm = reorder(&mut self.model, self.cfg.ordering)?;
        self.adam.permute(&perm);
        self.write_checkpoint_files("final")?;
        Ok((self.model, self.log))
    }
}

/// End-to-end fit: seeded initialization from the target, `iterations`
/// training steps, final reorder. Periodic checkpoints land in
/// `checkpoint_dir` when configured; on divergence the last written
/// checkpoint is left in place and the error carries the failing step.
pub fn fit(
    target: &Image,
    init_cfg: &InitConfig,
    train_cfg: &TrainConfig,
) -> Result<(SplatModel, TrainLog)> {
    train_cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(train_cfg.seed);
    let model = init_model(init_cfg, Some(target), &mut rng)?;
    let mut trainer = Trainer::from_parts(model, target.clone(), train_cfg.clone(), rng)?;
    trainer.run(train_cfg.iterations)?;
    trainer.finalize()
}
