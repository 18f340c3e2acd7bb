//! Progressive four-stage training: coarse restorer first, then the
//! parser (coarse frozen), then the fine restorer with the adversarial
//! game (coarse and parser frozen), then everything jointly. Parameters
//! outside a stage's trainable set are registered as graph constants, so
//! they are bit-identical across the stage.

pub mod adam;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::augment::{apply_geometric, AugmentConfig, GeomTransform};
use crate::dataset::manifest::{derive_seed, Sample};
use crate::dataset::schema::{extract_masks, ComponentMask, LabelSchema};
use crate::error::{Error, Result};
use crate::image::LabelMap;
use crate::losses::{
    adversarial_losses, content_loss, parsing_loss, perceptual_loss, structural_loss, total_loss,
    FeatureExtractor, IterationLog, LossBreakdown, LossTerms, LossWeights, StructuralWeightMode,
    LOG_EPS,
};
use crate::networks::params::{load_checkpoint, save_checkpoint, ModelParams, ParamSet, SubnetId};
use crate::networks::prob::argmax_labels;
use crate::networks::{CoarseNet, Discriminator, FineNet, NetworkConfig, ParsingNet};
use crate::nn::{Grads, Tape, Tensor, Var};
use crate::resample;
use adam::AdamState;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OptimConfig {
    pub batch_size: usize,
    pub lr_parsing: f64,
    pub lr_deblur: f64,
    /// Only "adam" is implemented; recorded so swaps are explicit.
    pub optimizer: String,
    pub seed: u64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            batch_size: 16,
            lr_parsing: 5e-6,
            lr_deblur: 4e-5,
            optimizer: "adam".into(),
            seed: 0,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if self.lr_parsing < 0.0 || self.lr_deblur < 0.0 {
            return Err(Error::Config("learning rates must be >= 0".into()));
        }
        if self.optimizer != "adam" {
            return Err(Error::Config(format!(
                "optimizer {:?} not available (only \"adam\")",
                self.optimizer
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct StageEntry {
    pub id: u8,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StageSchedule {
    pub entries: Vec<StageEntry>,
}

impl StageSchedule {
    /// Reference schedule: 200k / 60k / 200k / 100k iterations.
    pub fn reference() -> StageSchedule {
        StageSchedule::explicit([200_000, 60_000, 200_000, 100_000])
    }

    pub fn explicit(iterations: [usize; 4]) -> StageSchedule {
        StageSchedule {
            entries: (1..=4)
                .map(|id| StageEntry {
                    id,
                    iterations: iterations[id as usize - 1],
                })
                .collect(),
        }
    }

    /// Scale every stage's iteration count (at least 1 each).
    pub fn scaled(&self, factor: f64) -> StageSchedule {
        StageSchedule {
            entries: self
                .entries
                .iter()
                .map(|e| StageEntry {
                    id: e.id,
                    iterations: ((e.iterations as f64 * factor).round() as usize).max(1),
                })
                .collect(),
        }
    }
}

/// Subnets updated by each stage.
pub fn stage_trainables(stage: u8) -> &'static [SubnetId] {
    match stage {
        1 => &[SubnetId::Coarse],
        2 => &[SubnetId::Parsing],
        3 => &[SubnetId::Fine, SubnetId::Discriminator],
        4 => &[
            SubnetId::Coarse,
            SubnetId::Parsing,
            SubnetId::Fine,
            SubnetId::Discriminator,
        ],
        _ => panic!("stage must be 1..=4, got {stage}"),
    }
}

struct AdamStates {
    coarse: AdamState,
    parsing: AdamState,
    fine: AdamState,
    discriminator: AdamState,
}

impl AdamStates {
    fn new(params: &ModelParams) -> AdamStates {
        AdamStates {
            coarse: AdamState::new(&params.coarse),
            parsing: AdamState::new(&params.parsing),
            fine: AdamState::new(&params.fine),
            discriminator: AdamState::new(&params.discriminator),
        }
    }
}

/// Mutable training state: parameters, optimizer moments, progress.
pub struct TrainState {
    pub params: ModelParams,
    adam: AdamStates,
    pub completed_stage: u8,
    pub total_iters: usize,
}

/// Owns the immutable pieces: graph builders, extractor, configs, run dir.
pub struct Trainer {
    pub network: NetworkConfig,
    pub coarse: CoarseNet,
    pub parsing: ParsingNet,
    pub fine: FineNet,
    pub discriminator: Discriminator,
    pub extractor: FeatureExtractor,
    pub schema: LabelSchema,
    pub weights: LossWeights,
    pub optim: OptimConfig,
    pub structural_mode: StructuralWeightMode,
    pub augment: Option<AugmentConfig>,
    pub run_dir: PathBuf,
}

struct BatchTensors {
    blurred: Tensor,
    clear: Tensor,
    clear_half: Tensor,
    labels: Vec<LabelMap>,
    indices: Vec<usize>,
}

impl Trainer {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        network: NetworkConfig,
        extractor: FeatureExtractor,
        schema: LabelSchema,
        weights: LossWeights,
        optim: OptimConfig,
        structural_mode: StructuralWeightMode,
        augment: Option<AugmentConfig>,
        run_dir: PathBuf,
    ) -> Result<Trainer> {
        network.validate()?;
        schema.validate()?;
        weights.validate()?;
        optim.validate()?;
        if schema.num_classes != network.parsing.num_classes {
            return Err(Error::Config(format!(
                "schema has {} classes, parsing network {}",
                schema.num_classes, network.parsing.num_classes
            )));
        }
        Ok(Trainer {
            coarse: CoarseNet::new(network.deblur.clone())?,
            parsing: ParsingNet::new(network.parsing.clone())?,
            fine: FineNet::new(network.deblur.clone(), network.parsing.num_classes)?,
            discriminator: Discriminator::new(network.discriminator.clone())?,
            network,
            extractor,
            schema,
            weights,
            optim,
            structural_mode,
            augment,
            run_dir,
        })
    }

    pub fn init_state(&self, seed: u64) -> TrainState {
        let params = ModelParams {
            coarse: self.coarse.init_params(derive_seed(seed, 1)),
            parsing: self.parsing.init_params(derive_seed(seed, 2)),
            fine: self.fine.init_params(derive_seed(seed, 3)),
            discriminator: self.discriminator.init_params(derive_seed(seed, 4)),
        };
        TrainState {
            adam: AdamStates::new(&params),
            params,
            completed_stage: 0,
            total_iters: 0,
        }
    }

    pub fn resume_state(&self, checkpoint: &Path) -> Result<TrainState> {
        let (params, network, stage) = load_checkpoint(checkpoint)?;
        if network != self.network {
            return Err(Error::Checkpoint(
                "checkpoint network config differs from trainer config".into(),
            ));
        }
        Ok(TrainState {
            adam: AdamStates::new(&params),
            params,
            completed_stage: stage.unwrap_or(0),
            total_iters: 0,
        })
    }

    fn batch_tensors(&self, data: &[Sample], iter: usize, augment: bool) -> Result<BatchTensors> {
        let b = self.optim.batch_size.min(data.len()).max(1);
        let mut blurred = Vec::with_capacity(b);
        let mut clear = Vec::with_capacity(b);
        let mut clear_half = Vec::with_capacity(b);
        let mut labels = Vec::with_capacity(b);
        let mut indices = Vec::with_capacity(b);
        for j in 0..b {
            let idx = (iter * b + j) % data.len();
            indices.push(idx);
            let sample = match (&self.augment, augment) {
                (Some(cfg), true) => {
                    let seed = derive_seed(cfg.rng_seed, (iter * b + j) as u64);
                    let mut rng = ChaCha20Rng::seed_from_u64(seed);
                    let t = GeomTransform::sample(cfg, &mut rng);
                    apply_geometric(&data[idx], &t)
                }
                _ => data[idx].clone(),
            };
            sample.validate()?;
            clear_half.push(resample::downsample2(&sample.clear)?);
            blurred.push(sample.blurred);
            clear.push(sample.clear);
            labels.push(sample.labels);
        }
        Ok(BatchTensors {
            blurred: Tensor::from_images(&blurred.iter().collect::<Vec<_>>()),
            clear: Tensor::from_images(&clear.iter().collect::<Vec<_>>()),
            clear_half: Tensor::from_images(&clear_half.iter().collect::<Vec<_>>()),
            labels,
            indices,
        })
    }

    fn adversarial_active(&self, stage: u8) -> bool {
        stage >= 3 && self.weights.lambda_adversarial > 0.0
    }

    /// Structural masks from the predicted probabilities, at full and
    /// half resolution.
    fn masks_from_probs(
        &self,
        probs: &Tensor,
    ) -> (Vec<Vec<ComponentMask>>, Vec<Vec<ComponentMask>>) {
        let (n, _, _, _) = probs.dims4();
        let mut full = Vec::with_capacity(n);
        let mut half = Vec::with_capacity(n);
        for i in 0..n {
            let labels = argmax_labels(probs, i);
            let labels_half = downsample_labels(&labels);
            full.push(extract_masks(&labels, &self.schema));
            half.push(extract_masks(&labels_half, &self.schema));
        }
        (full, half)
    }

    /// Build the stage's loss graph on `tape`. `train` selects which
    /// generator subnets are differentiable; the discriminator is always
    /// frozen here (it trains in its own step).
    fn stage_graph(
        &self,
        tape: &mut Tape,
        params: &ModelParams,
        stage: u8,
        batch: &BatchTensors,
        train: &dyn Fn(SubnetId) -> bool,
    ) -> Result<(LossTerms, RegisteredVars)> {
        let coarse_vars = params.coarse.register(tape, train(SubnetId::Coarse));
        let parsing_vars = params.parsing.register(tape, train(SubnetId::Parsing));
        let fine_vars = params.fine.register(tape, train(SubnetId::Fine));
        let disc_vars = params.discriminator.register(tape, false);
        let fx_vars = self.extractor.register(tape);

        let x = tape.constant(batch.blurred.clone());
        let gt = tape.constant(batch.clear.clone());
        let gt_half = tape.constant(batch.clear_half.clone());

        let (y_c, y_c_half) = self.coarse.forward(tape, &coarse_vars, x)?;
        let mut terms = LossTerms::default();
        let mut final_output = None;

        if stage == 1 {
            terms.content = Some(content_loss(tape, &[(y_c, gt), (y_c_half, gt_half)])?);
        } else {
            let p = self.parsing.forward(tape, &parsing_vars, y_c)?;
            if stage == 2 {
                terms.parsing = Some(parsing_loss(tape, p, &batch.labels)?);
            } else {
                let (y, y_half) = self.fine.forward(tape, &fine_vars, x, y_c, p)?;
                final_output = Some(y);
                terms.content = Some(content_loss(
                    tape,
                    &[(y_c, gt), (y, gt), (y_c_half, gt_half), (y_half, gt_half)],
                )?);
                let (masks, masks_half) = self.masks_from_probs(tape.value(p));
                let s_full = structural_loss(
                    tape,
                    y,
                    gt,
                    &masks,
                    self.structural_mode,
                    self.weights.structural_constant,
                )?;
                let s_half = structural_loss(
                    tape,
                    y_half,
                    gt_half,
                    &masks_half,
                    self.structural_mode,
                    self.weights.structural_constant,
                )?;
                terms.structural = Some(tape.weighted_sum(&[(s_full, 1.0), (s_half, 1.0)]));
                terms.perceptual = Some(perceptual_loss(tape, y, gt, &self.extractor, &fx_vars)?);
                if stage == 4 {
                    terms.parsing = Some(parsing_loss(tape, p, &batch.labels)?);
                }
                if self.adversarial_active(stage) {
                    let d_fake = self.discriminator.forward(tape, &disc_vars, y)?;
                    terms.adversarial_gen = Some(tape.neg_log_mean(d_fake, LOG_EPS));
                }
            }
        }
        Ok((
            terms,
            RegisteredVars {
                coarse: coarse_vars,
                parsing: parsing_vars,
                fine: fine_vars,
                final_output,
            },
        ))
    }

    /// One discriminator update on a real batch and a generated batch
    /// (generator entirely frozen). Returns (L_D, mean d_real, mean d_fake).
    pub fn discriminator_step(
        &self,
        state: &mut TrainState,
        real: &Tensor,
        fake: &Tensor,
    ) -> Result<(f64, f64, f64)> {
        let mut tape = Tape::new();
        let d_vars = state.params.discriminator.register(&mut tape, true);
        let real_v = tape.constant(real.clone());
        let fake_v = tape.constant(fake.clone());
        let d_real = self.discriminator.forward(&mut tape, &d_vars, real_v)?;
        let d_fake = self.discriminator.forward(&mut tape, &d_vars, fake_v)?;
        let (l_d, _) = adversarial_losses(&mut tape, d_real, d_fake);
        let l_d_val = tape.value(l_d).item();
        let mean = |t: &Tensor| t.data().iter().sum::<f64>() / t.numel() as f64;
        let d_real_mean = mean(tape.value(d_real));
        let d_fake_mean = mean(tape.value(d_fake));
        if !l_d_val.is_finite() {
            return Err(Error::invalid("non-finite discriminator loss"));
        }
        let grads = tape.backward(l_d);
        let g = collect_grads(&grads, &d_vars, &state.params.discriminator);
        state
            .adam
            .discriminator
            .step(&mut state.params.discriminator, &g, self.optim.lr_deblur);
        Ok((l_d_val, d_real_mean, d_fake_mean))
    }

    /// Restored batch with the generator frozen.
    pub fn generate_frozen(&self, params: &ModelParams, blurred: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let coarse_vars = params.coarse.register(&mut tape, false);
        let parsing_vars = params.parsing.register(&mut tape, false);
        let fine_vars = params.fine.register(&mut tape, false);
        let x = tape.constant(blurred.clone());
        let (y_c, _) = self.coarse.forward(&mut tape, &coarse_vars, x)?;
        let p = self.parsing.forward(&mut tape, &parsing_vars, y_c)?;
        let (y, _) = self.fine.forward(&mut tape, &fine_vars, x, y_c, p)?;
        Ok(tape.value(y).clone())
    }

    fn step(
        &self,
        state: &mut TrainState,
        stage: u8,
        batch: &BatchTensors,
        iter: usize,
    ) -> Result<IterationLog> {
        let mut l_adv_d = 0.0;
        if self.adversarial_active(stage) {
            let fake = self.generate_frozen(&state.params, &batch.blurred)?;
            let (ld, _, _) = self.discriminator_step(state, &batch.clear, &fake)?;
            l_adv_d = ld;
        }

        let trainables = stage_trainables(stage);
        let train =
            move |id: SubnetId| trainables.contains(&id) && id != SubnetId::Discriminator;

        let mut tape = Tape::new();
        let (terms, vars) = self.stage_graph(&mut tape, &state.params, stage, batch, &train)?;
        let (total, breakdown) = total_loss(&mut tape, &terms, &self.weights, stage);
        let total_val = tape.value(total).item();
        if !total_val.is_finite() {
            let snapshot = self.dump_diagnostics(state, stage, iter, batch, &breakdown)?;
            return Err(Error::NonFiniteLoss {
                stage,
                iter,
                snapshot,
            });
        }

        let grads = tape.backward(total);
        let TrainState { params, adam, .. } = state;
        for id in [SubnetId::Coarse, SubnetId::Parsing, SubnetId::Fine] {
            if !train(id) {
                continue;
            }
            let subnet_vars = vars.of(id);
            let g = collect_grads(&grads, subnet_vars, params.get(id));
            let (opt, lr) = match id {
                SubnetId::Coarse => (&mut adam.coarse, self.optim.lr_deblur),
                SubnetId::Parsing => (&mut adam.parsing, self.optim.lr_parsing),
                SubnetId::Fine => (&mut adam.fine, self.optim.lr_deblur),
                SubnetId::Discriminator => unreachable!(),
            };
            opt.step(params.get_mut(id), &g, lr);
        }

        Ok(IterationLog {
            iter,
            stage,
            l_c: breakdown.content,
            l_s: breakdown.structural,
            l_p: breakdown.parsing,
            l_vgg: breakdown.perceptual,
            l_adv_g: breakdown.adversarial_gen,
            l_adv_d,
            total: breakdown.total,
        })
    }

    fn dump_diagnostics(
        &self,
        state: &TrainState,
        stage: u8,
        iter: usize,
        batch: &BatchTensors,
        breakdown: &LossBreakdown,
    ) -> Result<PathBuf> {
        fs::create_dir_all(&self.run_dir)?;
        let path = self
            .run_dir
            .join(format!("diagnostic_stage{stage}_iter{iter}.json"));
        let hashes: BTreeMap<&str, String> = SubnetId::ALL
            .iter()
            .map(|id| (id.key(), format!("{:016x}", state.params.get(*id).bit_hash())))
            .collect();
        let doc = serde_json::json!({
            "stage": stage,
            "iter": iter,
            "batch_indices": batch.indices,
            "param_hashes": hashes,
            "breakdown": breakdown,
        });
        fs::write(&path, serde_json::to_vec_pretty(&doc)?)?;
        Ok(path)
    }

    /// Run `iterations` steps of one stage over `data` (wrapping
    /// epoch-cycling order).
    pub fn train_stage(
        &self,
        state: &mut TrainState,
        stage: u8,
        iterations: usize,
        data: &[Sample],
    ) -> Result<Vec<IterationLog>> {
        if data.is_empty() {
            return Err(Error::invalid("no training samples"));
        }
        let mut logs = Vec::with_capacity(iterations);
        for _ in 0..iterations {
            let batch = self.batch_tensors(data, state.total_iters, true)?;
            let log = self.step(state, stage, &batch, state.total_iters)?;
            logs.push(log);
            state.total_iters += 1;
        }
        state.completed_stage = state.completed_stage.max(stage);
        Ok(logs)
    }

    /// Loss of a stage on the first batch of `data`, all parameters
    /// frozen, no augmentation, no updates.
    pub fn evaluate_stage_loss(
        &self,
        params: &ModelParams,
        stage: u8,
        data: &[Sample],
    ) -> Result<LossBreakdown> {
        let batch = self.batch_tensors(data, 0, false)?;
        let mut tape = Tape::new();
        let frozen = |_: SubnetId| false;
        let (terms, _) = self.stage_graph(&mut tape, params, stage, &batch, &frozen)?;
        let (_, breakdown) = total_loss(&mut tape, &terms, &self.weights, stage);
        Ok(breakdown)
    }

    /// Execute the whole schedule, appending per-iteration logs to
    /// `metrics.jsonl` and writing one checkpoint per stage boundary.
    pub fn run_schedule(
        &self,
        state: &mut TrainState,
        schedule: &StageSchedule,
        data: &[Sample],
    ) -> Result<Vec<IterationLog>> {
        fs::create_dir_all(&self.run_dir)?;
        let metrics_path = self.run_dir.join("metrics.jsonl");
        let mut metrics = fs::File::create(&metrics_path)?;
        let mut all = Vec::new();
        for entry in &schedule.entries {
            let logs = self.train_stage(state, entry.id, entry.iterations, data)?;
            for log in &logs {
                serde_json::to_writer(&mut metrics, log)?;
                metrics.write_all(b"\n")?;
            }
            all.extend(logs);
            let ckpt = self.run_dir.join(format!("checkpoint_stage{}.ckpt", entry.id));
            save_checkpoint(
                &ckpt,
                &state.params,
                &self.network,
                Some(entry.id),
                serde_json::json!({"total_iters": state.total_iters}),
            )?;
        }
        Ok(all)
    }
}

struct RegisteredVars {
    coarse: Vec<Var>,
    parsing: Vec<Var>,
    fine: Vec<Var>,
    #[allow(dead_code)]
    final_output: Option<Var>,
}

impl RegisteredVars {
    fn of(&self, id: SubnetId) -> &[Var] {
        match id {
            SubnetId::Coarse => &self.coarse,
            SubnetId::Parsing => &self.parsing,
            SubnetId::Fine => &self.fine,
            SubnetId::Discriminator => unreachable!("discriminator vars live in its own step"),
        }
    }
}

fn collect_grads(grads: &Grads, vars: &[Var], params: &ParamSet) -> Vec<Tensor> {
    vars.iter()
        .enumerate()
        .map(|(i, v)| match grads.get(*v) {
            Some(g) => g.clone(),
            None => Tensor::zeros(params.tensor(i).shape()),
        })
        .collect()
}

/// Nearest-neighbor 2x label downsampling (top-left of each 2x2 cell).
pub fn downsample_labels(labels: &LabelMap) -> LabelMap {
    let (h, w) = (labels.height / 2, labels.width / 2);
    let mut out = LabelMap::new(h, w);
    for y in 0..h {
        for x in 0..w {
            out.set(y, x, labels.get(2 * y, 2 * x));
        }
    }
    out
}

/// Degrade a clear/label pair into an in-memory sample (no files).
pub fn sample_from_images(
    clear: crate::image::Image,
    labels: LabelMap,
    kernel: &crate::blur::BlurKernel,
    cfg: &crate::blur::DegradationConfig,
    source_id: &str,
) -> Result<Sample> {
    let blurred = crate::blur::apply_blur(&clear, kernel, cfg)?;
    let sample = Sample {
        clear,
        blurred,
        labels,
        kernel_id: format!("k{:02}", kernel.size()),
        source_id: source_id.to_string(),
    };
    sample.validate()?;
    Ok(sample)
}

/// Tiny in-memory dataset of procedurally generated degraded faces.
pub fn micro_dataset(
    count: usize,
    size: usize,
    kernel_size: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<Vec<Sample>> {
    let kernels = crate::blur::kernel::generate_batch(&[kernel_size], count, seed, 48, 0.6)?;
    (0..count)
        .map(|i| {
            let (clear, labels) =
                crate::dataset::synthetic::synth_face(size, derive_seed(seed, i as u64));
            let cfg = crate::blur::DegradationConfig {
                noise_sigma,
                boundary_mode: crate::blur::BoundaryMode::Replicate,
                rng_seed: derive_seed(seed, 1000 + i as u64),
            };
            sample_from_images(clear, labels, &kernels[i].0, &cfg, &format!("synth_{i:03}"))
        })
        .collect()
}
