// Scratch calibration harness for the synthetic benchmark (not shipped).
use std::time::Instant;

use dgda::eval::f1_score;
use dgda::graph::{generate_synthetic_pair, GeneratorConfig, DEFAULT_FEATURE_SPEC};
use dgda::model::predict;
use dgda::trainer::{
    evaluate_baseline, evaluate_dgda, train, train_baseline, BaselineMode, TrainConfig,
};

fn cfg_probe(_g: &mut GeneratorConfig) {}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let seeds: Vec<u64> = if args.len() > 1 {
        args[1].split(',').map(|s| s.parse().unwrap()).collect()
    } else {
        vec![1]
    };
    let shift: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(2.0);
    let ratio: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.3);
    let epochs: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(30);

    let mut gen_cfg = GeneratorConfig::default();
    gen_cfg.target.feature_shift = shift;
    gen_cfg.target.block_ratio = ratio;
    let envf = |k: &str, d: f64| std::env::var(k).ok().and_then(|v| v.parse().ok()).unwrap_or(d);
    gen_cfg.label_motifs[0].density_in = envf("GEN_D0_IN", gen_cfg.label_motifs[0].density_in);
    gen_cfg.label_motifs[0].density_out = envf("GEN_D0_OUT", gen_cfg.label_motifs[0].density_out);
    gen_cfg.label_motifs[1].density_in = envf("GEN_D1_IN", gen_cfg.label_motifs[1].density_in);
    gen_cfg.label_motifs[1].density_out = envf("GEN_D1_OUT", gen_cfg.label_motifs[1].density_out);
    gen_cfg.flip_rate = envf("GEN_FLIP", gen_cfg.flip_rate);
    gen_cfg.target.extra_flip_rate = envf("GEN_TGT_EXTRA_FLIP", gen_cfg.target.extra_flip_rate);
    gen_cfg.target.extra_drop_rate = envf("GEN_TGT_EXTRA_DROP", gen_cfg.target.extra_drop_rate);
    cfg_probe(&mut gen_cfg);

    eprintln!("generator: {gen_cfg:?}");

    let t0 = Instant::now();
    let mut split = generate_synthetic_pair(&gen_cfg, gen_cfg.seed).unwrap();
    split.prepare_features(&DEFAULT_FEATURE_SPEC).unwrap();
    eprintln!("generated + prepared in {:.1}s", t0.elapsed().as_secs_f64());

    let mut cfg = TrainConfig::synthetic_benchmark();
    cfg.max_epochs = epochs;
    cfg.patience = epochs; // disable early stopping during calibration
    let envf = |k: &str, d: f64| std::env::var(k).ok().and_then(|v| v.parse().ok()).unwrap_or(d);
    let envu = |k: &str, d: usize| std::env::var(k).ok().and_then(|v| v.parse().ok()).unwrap_or(d);
    cfg.delta = envf("CAL_DELTA", cfg.delta);
    cfg.gamma = envf("CAL_GAMMA", cfg.gamma);
    cfg.omega = envf("CAL_OMEGA", cfg.omega);
    cfg.learning_rate = envf("CAL_LR", cfg.learning_rate);
    cfg.k_y = envu("CAL_KY", cfg.k_y);
    cfg.k_d = envu("CAL_KD", cfg.k_d);
    cfg.hidden = envu("CAL_HIDDEN", cfg.hidden);
    cfg.batch_size = envu("CAL_BATCH", cfg.batch_size);
    cfg.p_drop = envf("CAL_PDROP", cfg.p_drop);
    cfg.p_add = envf("CAL_PADD", cfg.p_add);
    cfg.dropout = envf("CAL_DROPOUT", cfg.dropout);
    if std::env::var("CAL_KL_SUM").is_ok() {
        cfg.kl_reduction = dgda::model::KlReduction::Sum;
    }
    eprintln!("cfg: delta {} gamma {} lr {} k_y {} k_d {} kl {:?}", cfg.delta, cfg.gamma, cfg.learning_rate, cfg.k_y, cfg.k_d, cfg.kl_reduction);

    for &seed in &seeds {
        let mut c = cfg.clone();
        c.master_seed = seed;

        let t = Instant::now();
        let (src_params, src_trace) =
            train_baseline(&split, &c, BaselineMode::SourceOnly).unwrap();
        let src_f1 = evaluate_baseline(&src_params, &split.target_test).unwrap();
        let src_f1_source = evaluate_baseline(&src_params, &split.source_test).unwrap();
        eprintln!(
            "seed {seed} source_only: tgt F1 {:.3} (src F1 {:.3}) epochs {} [{:.1}s]",
            src_f1,
            src_f1_source,
            src_trace.len(),
            t.elapsed().as_secs_f64()
        );

        let t = Instant::now();
        let (tgt_params, tgt_trace) =
            train_baseline(&split, &c, BaselineMode::TargetSupervised).unwrap();
        let tgt_f1 = evaluate_baseline(&tgt_params, &split.target_test).unwrap();
        eprintln!(
            "seed {seed} target_sup:  tgt F1 {:.3} epochs {} [{:.1}s]",
            tgt_f1,
            tgt_trace.len(),
            t.elapsed().as_secs_f64()
        );

        let t = Instant::now();
        // optional per-epoch target trajectory (diagnostic)
        if std::env::var("CAL_TRAJ").is_ok() {
            let mut tr = dgda::trainer::Trainer::new(&split, c.clone()).unwrap();
            while !tr.finished() {
                tr.run_epoch(&split).unwrap();
                let f1 = dgda::trainer::evaluate_dgda(&tr.params, &split.target_test).unwrap();
                let f1s = {
                    let mut preds = Vec::new();
                    let mut labels = Vec::new();
                    for g in &split.source_test {
                        let (_, cl) = predict(&tr.params, g).unwrap();
                        preds.push(cl);
                        labels.push(g.label().unwrap());
                    }
                    f1_score(&preds, &labels).unwrap()
                };
                eprintln!("  epoch {:2}: tgt {:.3} src {:.3} val {:.3}", tr.epoch - 1, f1, f1s, tr.trace.last().unwrap().val_f1);
            }
        }
        let (dgda_params, dgda_trace) = train(&split, c.clone()).unwrap();
        let dgda_f1 = evaluate_dgda(&dgda_params, &split.target_test).unwrap();
        // source-test F1 for reference
        let mut preds = Vec::new();
        let mut labels = Vec::new();
        for g in &split.source_test {
            let (_, class) = predict(&dgda_params, g).unwrap();
            preds.push(class);
            labels.push(g.label().unwrap());
        }
        let dgda_src = f1_score(&preds, &labels).unwrap();
        // per-(domain,class) probability stats on test splits
        let stats = |graphs: &[dgda::graph::Graph], want: bool| {
            let ps: Vec<f64> = graphs
                .iter()
                .filter(|g| g.label() == Some(want))
                .map(|g| predict(&dgda_params, g).unwrap().0)
                .collect();
            let m = ps.iter().sum::<f64>() / ps.len() as f64;
            let v = ps.iter().map(|p| (p - m) * (p - m)).sum::<f64>() / ps.len() as f64;
            (m, v.sqrt())
        };
        let (s0, ss0) = stats(&split.source_test, false);
        let (s1, ss1) = stats(&split.source_test, true);
        let (t0, ts0) = stats(&split.target_test, false);
        let (t1, ts1) = stats(&split.target_test, true);
        eprintln!(
            "seed {seed} probs: src y0 {s0:.2}+/-{ss0:.2} y1 {s1:.2}+/-{ss1:.2} | tgt y0 {t0:.2}+/-{ts0:.2} y1 {t1:.2}+/-{ts1:.2}"
        );
        eprintln!(
            "seed {seed} dgda:        tgt F1 {:.3} (src F1 {:.3}) epochs {} [{:.1}s] last p1 {:.3}",
            dgda_f1,
            dgda_src,
            dgda_trace.len(),
            t.elapsed().as_secs_f64(),
            dgda_trace.last().unwrap().phase1.total,
        );
        eprintln!(
            "seed {seed} GAP dgda - source_only = {:+.3}; ceiling slack = {:+.3}",
            dgda_f1 - src_f1,
            tgt_f1 + 0.02 - dgda_f1
        );
    }
}
