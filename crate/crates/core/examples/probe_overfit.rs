// probe: schedule/lr search for the micro overfit run
use facedeblur_core::config::RunConfig;
use facedeblur_core::eval::psnr;
use facedeblur_core::networks::params::save_checkpoint;
use facedeblur_core::networks::pipeline::Restorer;
use facedeblur_core::training::micro_dataset;

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::tiny().with_seed(3);
    cfg.optim.lr_deblur = 3e-3;
    cfg.optim.lr_parsing = 1e-3;
    cfg.weights.lambda_structural = 0.05;
    let trainer = cfg.build_trainer(dir.path().to_path_buf()).unwrap();
    let data = micro_dataset(4, 32, 13, 0.01, 7).unwrap();
    let mut state = trainer.init_state(cfg.seed);
    let t0 = std::time::Instant::now();

    let report = |trainer: &facedeblur_core::training::Trainer,
                  state: &facedeblur_core::training::TrainState,
                  tag: &str| {
        let restorer = Restorer::new(trainer.network.clone(), state.params.clone()).unwrap();
        for s in &data {
            let out = restorer.restore(&s.blurred).unwrap();
            let dbr = psnr(&out.image, &s.clear, 1.0).unwrap();
            let dbc = psnr(&out.coarse, &s.clear, 1.0).unwrap();
            let dbb = psnr(&s.blurred, &s.clear, 1.0).unwrap();
            eprintln!("  [{tag}] {}: blurred {dbb:.2}, coarse {dbc:.2}, fine {dbr:.2}", s.source_id);
        }
    };

    let initial = trainer.evaluate_stage_loss(&state.params, 1, &data).unwrap().total;
    trainer.train_stage(&mut state, 1, 500, &data).unwrap();
    let after1 = trainer.evaluate_stage_loss(&state.params, 1, &data).unwrap().total;
    eprintln!("stage 1: {initial:.4} -> {after1:.4} ({:.1}%), t={:.0}s", 100.0*after1/initial, t0.elapsed().as_secs_f64());
    trainer.train_stage(&mut state, 2, 100, &data).unwrap();
    eprintln!("stage 2 done t={:.0}s", t0.elapsed().as_secs_f64());
    for chunk in 0..2 {
        trainer.train_stage(&mut state, 3, 300, &data).unwrap();
        eprintln!("stage 3 after {} iters, t={:.0}s", (chunk+1)*300, t0.elapsed().as_secs_f64());
        report(&trainer, &state, &format!("s3x{}", (chunk+1)*300));
    }
    // same-trainer stage 4 first: is it stable once balanced?
    {
        let mut hot = trainer.resume_state(&{
            let c = dir.path().join("hot.ckpt");
            save_checkpoint(&c, &state.params, &trainer.network, Some(3), serde_json::json!({})).unwrap();
            c
        }).unwrap();
        trainer.train_stage(&mut hot, 4, 150, &data).unwrap();
        eprintln!("stage 4 HOT (lr 3e-3) after 150, t={:.0}s", t0.elapsed().as_secs_f64());
        report(&trainer, &hot, "s4hot");
    }
    // gentle joint fine-tune with a cooler trainer
    let ckpt = dir.path().join("s3.ckpt");
    save_checkpoint(&ckpt, &state.params, &trainer.network, Some(3), serde_json::json!({})).unwrap();
    let mut cfg4 = cfg.clone();
    cfg4.optim.lr_deblur = 3e-4;
    cfg4.optim.lr_parsing = 1e-4;
    let trainer4 = cfg4.build_trainer(dir.path().to_path_buf()).unwrap();
    let mut state4 = trainer4.resume_state(&ckpt).unwrap();
    for chunk in 0..2 {
        trainer4.train_stage(&mut state4, 4, 100, &data).unwrap();
        eprintln!("stage 4 after {} iters, t={:.0}s", (chunk+1)*100, t0.elapsed().as_secs_f64());
        report(&trainer4, &state4, &format!("s4x{}", (chunk+1)*100));
    }
}
