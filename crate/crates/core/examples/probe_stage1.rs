// probe: stage-1 loss-ratio margins across lr / depth / seed
use facedeblur_core::config::RunConfig;
use facedeblur_core::training::micro_dataset;

fn main() {
    let data = micro_dataset(4, 32, 13, 0.01, 7).unwrap();
    for (tag, lr, rb, seed) in [
        ("rb2 lr2e-3 s9", 2e-3, 2usize, 9u64),
        ("rb2 lr3e-3 s9", 3e-3, 2, 9),
        ("rb2 lr3e-3 s5", 3e-3, 2, 5),
        ("rb2 lr3e-3 s11", 3e-3, 2, 11),
    ] {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::tiny().with_seed(seed);
        cfg.optim.lr_deblur = lr;
        cfg.network.deblur.resblocks_per_scale = rb;
        let trainer = cfg.build_trainer(dir.path().to_path_buf()).unwrap();
        let mut state = trainer.init_state(cfg.seed);
        let t0 = std::time::Instant::now();
        let initial = trainer.evaluate_stage_loss(&state.params, 1, &data).unwrap().total;
        trainer.train_stage(&mut state, 1, 500, &data).unwrap();
        let after = trainer.evaluate_stage_loss(&state.params, 1, &data).unwrap().total;
        eprintln!(
            "{tag}: {initial:.4} -> {after:.4} = {:.2}% ({:.0}s)",
            100.0 * after / initial,
            t0.elapsed().as_secs_f64()
        );
    }
}
