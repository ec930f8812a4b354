//! Scratch calibration for the toy end-to-end run (not shipped).
use hazardgen_core::diag::{compare_sets, pairwise_theta_rmse};
use hazardgen_core::gan::{self, DiscriminatorSpec, GeneratorSpec, TrainConfig};
use hazardgen_core::grid::{synth_dataset, Dataset, SplitTag, SynthSpec};
use hazardgen_core::margins::{FitOptions, GevParams, MarginalModel};
use hazardgen_core::nn::Tensor4;
use ndarray::{Array4, Axis};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(200);
    let gw: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(32);

    let spec = SynthSpec {
        channels: 3,
        height: 8,
        width: 8,
        days: 1000,
        correlation_length: 2.0,
        cross_channel_correlation: 0.6,
        margins: vec![
            GevParams::new(0.2, 10.0, 2.0).unwrap(),
            GevParams::new(0.0, 5.0, 1.0).unwrap(),
            GevParams::new(-0.1, 2.0, 0.5).unwrap(),
        ],
        masked_border: 0,
    };
    let t0 = std::time::Instant::now();
    let train_ds = synth_dataset(&spec, 101).unwrap();
    let test_ds = synth_dataset(&spec, 202).unwrap().with_split_tag(SplitTag::Test);
    eprintln!("synth done {:?}", t0.elapsed());

    let (model, _) = MarginalModel::fit(&train_ds, &FitOptions::default()).unwrap();
    let uniforms = model.pit(&train_ds).unwrap();
    let test_u = model.pit(&test_ds).unwrap();
    eprintln!("fit+pit done {:?}", t0.elapsed());

    let cfg = TrainConfig { epochs, batch_size: 50, ..Default::default() };
    let gspec = GeneratorSpec::for_grid(3, (8, 8), gw, vec![gw / 2, gw / 4], cfg.lrelu, cfg.dropout);
    let dspec = DiscriminatorSpec::for_grid(3, (8, 8), vec![gw / 2, gw, gw], cfg.lrelu, cfg.dropout);
    eprintln!("G widths base={} hidden={:?}; D filters {:?}", gw, [gw/2, gw/4], [gw/2, gw, gw]);

    let result = gan::train(&uniforms, &gspec, &dspec, &cfg, |e, _, _| {
        eprintln!("checkpoint epoch {} at {:?}", e, t0.elapsed());
        Ok(())
    })
    .unwrap();
    eprintln!("train done {:?}", t0.elapsed());
    for e in result.history.iter().step_by(20) {
        eprintln!("epoch {:>4}: d_loss {:.4} g_loss {:.4}", e.epoch, e.d_loss, e.g_loss);
    }

    // held-out accuracy: D(test) > 0.5 counts real-correct, D(fake) < 0.5 fake-correct
    let m = 200;
    let fake = gan::sample_events(&result.generator, m, 999).unwrap();
    let mut correct = 0usize;
    let dnet = &result.discriminator;
    let eval_probs = |ds: &Dataset, count: usize| -> Vec<f64> {
        let mut probs = Vec::new();
        for chunk_start in (0..count).step_by(64) {
            let take = 64.min(count - chunk_start);
            let mut batch = Array4::zeros((take, 3, 8, 8));
            for k in 0..take {
                batch.index_axis_mut(Axis(0), k)
                    .assign(&ds.values().index_axis(Axis(0), chunk_start + k));
            }
            let out = dnet.forward_eval(&Tensor4::new(batch).unwrap()).unwrap();
            probs.extend(out.flat().unwrap().column(0).iter().cloned());
        }
        probs
    };
    for p in eval_probs(&test_u, m) { if p > 0.5 { correct += 1; } }
    for p in eval_probs(&fake, m) { if p < 0.5 { correct += 1; } }
    let accuracy = correct as f64 / (2 * m) as f64;
    eprintln!("held-out discriminator accuracy: {:.3}", accuracy);

    let gen_u = Dataset::from_values(
        fake.values().clone(), model.channel_names().to_vec(), model.valid_mask().clone(),
        fake.cadence(), SplitTag::Generated).unwrap();
    let gen_full = gan::sample_events(&result.generator, 1000, 999).unwrap();
    let gen_full = Dataset::from_values(
        gen_full.values().clone(), model.channel_names().to_vec(), model.valid_mask().clone(),
        gen_full.cadence(), SplitTag::Generated).unwrap();
    let report = compare_sets(&train_ds, &test_ds, &gen_full, &model).unwrap();
    let s = &report.summary;
    eprintln!("pearson RMSE gen-vs-test per channel: {:?}",
        s.channels.iter().map(|c| c.pearson_rmse_generated_vs_test).collect::<Vec<_>>());
    eprintln!("pearson RMSE train-vs-test per channel: {:?}",
        s.channels.iter().map(|c| c.pearson_rmse_train_vs_test).collect::<Vec<_>>());
    eprintln!("theta RMSE: gen-vs-test {:.4}, train-vs-test {:.4}, ratio {:.2}",
        s.pooled_theta_rmse_generated_vs_test, s.pooled_theta_rmse_train_vs_test,
        s.pooled_theta_rmse_generated_vs_test / s.pooled_theta_rmse_train_vs_test);
    eprintln!("mean theta bias (gen - test): {:+.4}", s.mean_theta_generated_minus_test);
    let _ = pairwise_theta_rmse(&gen_u, &test_u);
    eprintln!("TOTAL {:?}", t0.elapsed());
}
