use rand::Rng;

use crate::graph::{augment, AugmentedGraph, DomainTag, Graph};
use crate::seed;
use crate::tensor::{grad_check, Tape, Tensor};

use super::forward::decode_edge_logits;
use super::loss::combine_total;
use super::*;

pub(crate) fn small_dims() -> ModelDims {
    ModelDims {
        feature_dim: 4,
        hidden: 6,
        extractor_depth: 2,
        k_d: 3,
        k_y: 3,
        k_o: 2,
        decoder_hidden: 5,
        classifier_hidden: 4,
    }
}

pub(crate) fn random_graph(n: usize, density: f64, domain: DomainTag, label: Option<bool>, s: u64) -> Graph {
    let mut rng = seed::rng(s, &[0xfeed]);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < density {
                edges.push((i, j));
            }
        }
    }
    let mut g = Graph::from_edges(n, &edges, None, label, domain).unwrap();
    let k = small_dims().feature_dim;
    let mut x = Tensor::zeros(n, k);
    for i in 0..n {
        for j in 0..k {
            x.set(i, j, rng.gen_range(-1.0..1.0));
        }
    }
    g.set_features(x).unwrap();
    g
}

fn clean_input(g: &Graph) -> AugmentedGraph {
    AugmentedGraph::clean(g)
}

#[test]
fn gcn_layer_identity_case() {
    let mut tape = Tape::new();
    let x_val = Tensor::from_rows(&[vec![1.0, -2.0], vec![3.0, 4.0]]);
    let a = tape.leaf(Tensor::identity(2));
    let x = tape.leaf(x_val.clone());
    let w = tape.leaf(Tensor::identity(2));
    let out = gcn_layer(&mut tape, a, x, w, false).unwrap();
    assert_eq!(tape.value(out), &x_val);
}

#[test]
fn gcn_layer_hand_case_with_relu() {
    let mut tape = Tape::new();
    let a = tape.leaf(Tensor::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]));
    let x = tape.leaf(Tensor::from_rows(&[vec![1.0], vec![3.0]]));
    let w = tape.leaf(Tensor::from_rows(&[vec![1.0]]));
    let out = gcn_layer(&mut tape, a, x, w, true).unwrap();
    assert_eq!(tape.value(out), &Tensor::from_rows(&[vec![2.0], vec![2.0]]));
}

#[test]
fn gcn_layer_relu_clamps_negatives() {
    let mut tape = Tape::new();
    let a = tape.leaf(Tensor::identity(1));
    let x = tape.leaf(Tensor::from_rows(&[vec![-3.0, 2.0]]));
    let w = tape.leaf(Tensor::identity(2));
    let out = gcn_layer(&mut tape, a, x, w, true).unwrap();
    assert_eq!(tape.value(out), &Tensor::from_rows(&[vec![0.0, 2.0]]));
}

#[test]
fn extract_features_of_zero_input_is_zero() {
    let dims = small_dims();
    let params = DgdaParams::init(dims, 3);
    let mut tape = Tape::new();
    let pv = ParamVars::load(&mut tape, &params);
    let a = tape.leaf(Tensor::identity(5));
    let x = tape.leaf(Tensor::zeros(5, dims.feature_dim));
    let h = extract_features(&mut tape, &pv, a, x).unwrap();
    assert_eq!(tape.value(h), &Tensor::zeros(5, dims.hidden));
}

#[test]
fn extract_features_paper_default_width_is_256() {
    let dims = ModelDims::paper_default(5);
    assert_eq!(dims.hidden, 256);
    assert_eq!((dims.k_d, dims.k_y, dims.k_o), (256, 256, 128));
    let params = DgdaParams::init(dims, 1);
    let g = random_graph(4, 0.5, DomainTag::Source, Some(true), 8);
    let mut x = Tensor::zeros(4, 5);
    x.data_mut().iter_mut().for_each(|v| *v = 0.1);
    let mut g2 = g.clone();
    g2.set_features(x).unwrap();
    let mut tape = Tape::new();
    let pv = ParamVars::load(&mut tape, &params);
    let a = tape.leaf(crate::graph::normalize_adjacency(&g2));
    let xv = tape.leaf(g2.features().unwrap().clone());
    let h = extract_features(&mut tape, &pv, a, xv).unwrap();
    assert_eq!(tape.value(h).shape(), (4, 256));
}

#[test]
fn encoder_with_zero_sigma_weights_gives_unit_sigma() {
    let dims = small_dims();
    let mut params = DgdaParams::init(dims, 3);
    params.enc_d.w_sigma = Tensor::zeros(dims.hidden, dims.k_d);
    let g = random_graph(5, 0.4, DomainTag::Source, Some(false), 4);
    let eps = LatentEps::sample(&dims, 5, 77);
    let mut tape = Tape::new();
    let pv = ParamVars::load(&mut tape, &params);
    let a = tape.leaf(crate::graph::normalize_adjacency(&g));
    let x = tape.leaf(g.features().unwrap().clone());
    let h = extract_features(&mut tape, &pv, a, x).unwrap();
    let d = encode_group(&mut tape, pv.enc_d, a, h, Some(&eps.d)).unwrap();
    // log sigma = 0 so z = mu + eps exactly
    assert_eq!(tape.value(d.log_sigma), &Tensor::zeros(5, dims.k_d));
    let diff = tape.value(d.z).sub(tape.value(d.mu)).unwrap();
    assert!(diff.max_abs_diff(&eps.d) < 1e-12);
}

#[test]
fn deterministic_mode_returns_mu() {
    let dims = small_dims();
    let params = DgdaParams::init(dims, 3);
    let g = random_graph(5, 0.4, DomainTag::Source, Some(false), 4);
    let mut tape = Tape::new();
    let pv = ParamVars::load(&mut tape, &params);
    let a = tape.leaf(crate::graph::normalize_adjacency(&g));
    let x = tape.leaf(g.features().unwrap().clone());
    let h = extract_features(&mut tape, &pv, a, x).unwrap();
    let d = encode_group(&mut tape, pv.enc_d, a, h, None).unwrap();
    assert_eq!(d.z, d.mu);
}

#[test]
fn same_seed_gives_identical_eps() {
    let dims = small_dims();
    let a = LatentEps::sample(&dims, 6, 42);
    let b = LatentEps::sample(&dims, 6, 42);
    assert_eq!(a, b);
    let c = LatentEps::sample(&dims, 6, 43);
    assert_ne!(a, c);
}

#[test]
fn kl_closed_forms() {
    let mut tape = Tape::new();
    // mu = 0, log sigma = 0 -> exactly 0
    let mu = tape.leaf(Tensor::zeros(2, 3));
    let ls = tape.leaf(Tensor::zeros(2, 3));
    let kl = kl_to_standard_normal(&mut tape, mu, ls, KlReduction::NodeMean).unwrap();
    assert_eq!(tape.value(kl).item(), 0.0);

    // single entry mu = 1, log sigma = 0 -> 0.5
    let mu = tape.leaf(Tensor::scalar(1.0));
    let ls = tape.leaf(Tensor::scalar(0.0));
    let kl = kl_to_standard_normal(&mut tape, mu, ls, KlReduction::NodeMean).unwrap();
    assert!((tape.value(kl).item() - 0.5).abs() < 1e-12);

    // single entry mu = 0, log sigma = ln 2 -> (4 - 1 - 2 ln 2) / 2
    let mu = tape.leaf(Tensor::scalar(0.0));
    let ls = tape.leaf(Tensor::scalar(2f64.ln()));
    let kl = kl_to_standard_normal(&mut tape, mu, ls, KlReduction::NodeMean).unwrap();
    let expected = 0.5 * (4.0 - 1.0 - 2.0 * 2f64.ln());
    assert!((tape.value(kl).item() - expected).abs() < 1e-12);
    assert!((expected - 0.8069).abs() < 1e-4);
}

#[test]
fn kl_is_nonnegative_on_random_inputs() {
    let mut rng = seed::rng(5, &[1]);
    for _ in 0..200 {
        let mut tape = Tape::new();
        let mu_t = Tensor::from_vec(
            3,
            2,
            (0..6).map(|_| rng.gen_range(-4.0..4.0)).collect(),
        )
        .unwrap();
        let ls_t = Tensor::from_vec(
            3,
            2,
            (0..6).map(|_| rng.gen_range(-3.0..3.0)).collect(),
        )
        .unwrap();
        let mu = tape.leaf(mu_t);
        let ls = tape.leaf(ls_t);
        for red in [KlReduction::NodeMean, KlReduction::Sum] {
            let kl = kl_to_standard_normal(&mut tape, mu, ls, red).unwrap();
            assert!(tape.value(kl).item() >= -1e-12);
        }
    }
}

#[test]
fn decoder_zero_final_layer_gives_half_probabilities() {
    let dims = small_dims();
    let mut params = DgdaParams::init(dims, 3);
    params.dec_w1 = Tensor::zeros(dims.decoder_hidden, dims.decoder_hidden);
    let g = random_graph(4, 0.5, DomainTag::Source, Some(true), 5);
    let mut tape = Tape::new();
    let pv = ParamVars::load(&mut tape, &params);
    let a = tape.leaf(crate::graph::normalize_adjacency(&g));
    let x = tape.leaf(g.features().unwrap().clone());
    let h = extract_features(&mut tape, &pv, a, x).unwrap();
    let d = encode_group(&mut tape, pv.enc_d, a, h, None).unwrap();
    let y = encode_group(&mut tape, pv.enc_y, a, h, None).unwrap();
    let o = encode_group(&mut tape, pv.enc_o, a, h, None).unwrap();
    let p = decode_graph(&mut tape, &pv, d.z, y.z, o.z).unwrap();
    for &v in tape.value(p).data() {
        assert_eq!(v, 0.5);
    }
}

#[test]
fn decoder_output_is_symmetric_and_matches_dot_products() {
    let dims = small_dims();
    let params = DgdaParams::init(dims, 11);
    let g = random_graph(3, 0.6, DomainTag::Source, Some(true), 6);
    let mut tape = Tape::new();
    let pv = ParamVars::load(&mut tape, &params);
    let a = tape.leaf(crate::graph::normalize_adjacency(&g));
    let x = tape.leaf(g.features().unwrap().clone());
    let h = extract_features(&mut tape, &pv, a, x).unwrap();
    let d = encode_group(&mut tape, pv.enc_d, a, h, None).unwrap();
    let y = encode_group(&mut tape, pv.enc_y, a, h, None).unwrap();
    let o = encode_group(&mut tape, pv.enc_o, a, h, None).unwrap();
    let logits = decode_edge_logits(&mut tape, &pv, d.z, y.z, o.z).unwrap();
    let p = tape.sigmoid(logits);

    let pv_t = tape.value(p).clone();
    assert_eq!(pv_t, pv_t.transpose());
    for &v in pv_t.data() {
        assert!(v > 0.0 && v < 1.0);
    }

    // recompute one entry independently from Z_g rows
    let cat = tape.concat_cols(&[d.z, y.z, o.z]).unwrap();
    let pre = tape.matmul(cat, pv.dec_w0).unwrap();
    let act = tape.relu(pre);
    let z_g = tape.matmul(act, pv.dec_w1).unwrap();
    let zg = tape.value(z_g).clone();
    for i in 0..3 {
        for j in 0..3 {
            let dot: f64 = (0..zg.cols()).map(|k| zg.get(i, k) * zg.get(j, k)).sum();
            let expect = 1.0 / (1.0 + (-dot).exp());
            assert!((pv_t.get(i, j) - expect).abs() < 1e-12);
        }
    }
}

#[test]
fn reconstruction_bce_closed_forms() {
    // near-perfect reconstruction: logits strongly match the target
    let target = Tensor::from_rows(&[
        vec![0.0, 1.0, 0.0],
        vec![1.0, 0.0, 1.0],
        vec![0.0, 1.0, 0.0],
    ]);
    let logits_t = target.map(|t| if t == 1.0 { 8.0 } else { -8.0 });
    let mut tape = Tape::new();
    let logits = tape.leaf(logits_t.clone());
    let loss = weighted_pair_bce(&mut tape, logits, &target, 1.0).unwrap();
    assert!(tape.value(loss).item() <= 0.01);

    // uniform 0.5 predictions: unweighted loss is exactly ln 2
    let zeros = tape.leaf(Tensor::zeros(3, 3));
    let loss = weighted_pair_bce(&mut tape, zeros, &target, 1.0).unwrap();
    assert!((tape.value(loss).item() - std::f64::consts::LN_2).abs() < 1e-12);

    // flipping the assignment maximizes the loss
    let flipped = tape.leaf(logits_t.scale(-1.0));
    let good = weighted_pair_bce(&mut tape, logits, &target, 1.0).unwrap();
    let bad = weighted_pair_bce(&mut tape, flipped, &target, 1.0).unwrap();
    assert!(tape.value(bad).item() > tape.value(good).item());
}

#[test]
fn positive_pair_weight_ratio_and_cap() {
    // 3-node target with 1 edge: 2 positive off-diag entries, 4 negative
    let target = Tensor::from_rows(&[
        vec![0.0, 1.0, 0.0],
        vec![1.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0],
    ]);
    assert_eq!(positive_pair_weight(&target), 2.0);
    assert_eq!(positive_pair_weight(&Tensor::zeros(4, 4)), 1.0);

    let mut one_edge = Tensor::zeros(200, 200);
    one_edge.set(0, 1, 1.0);
    one_edge.set(1, 0, 1.0);
    // ratio would be (200*199 - 2) / 2 > 1e4, so the cap binds
    assert_eq!(positive_pair_weight(&one_edge), 1.0e4);
}

#[test]
fn domain_bce_closed_forms() {
    let mut tape = Tape::new();
    let zero = tape.leaf(Tensor::scalar(0.0));
    for target in [0.0, 1.0] {
        let l = binary_cross_entropy_scalar(&mut tape, zero, target).unwrap();
        assert!((tape.value(l).item() - std::f64::consts::LN_2).abs() < 1e-12);
    }

    let sep = tape.leaf(Tensor::scalar(20.0));
    let l = binary_cross_entropy_scalar(&mut tape, sep, 1.0).unwrap();
    assert!(tape.value(l).item() < 1e-8);
    let sep_neg = tape.leaf(Tensor::scalar(-20.0));
    let l = binary_cross_entropy_scalar(&mut tape, sep_neg, 0.0).unwrap();
    assert!(tape.value(l).item() < 1e-8);

    // one source + one target with identical inputs: any shared logit costs
    // at least ln 2 on average
    for logit in [-3.0, -0.5, 0.0, 0.5, 3.0] {
        let v = tape.leaf(Tensor::scalar(logit));
        let l0 = binary_cross_entropy_scalar(&mut tape, v, 0.0).unwrap();
        let l1 = binary_cross_entropy_scalar(&mut tape, v, 1.0).unwrap();
        let avg = 0.5 * (tape.value(l0).item() + tape.value(l1).item());
        assert!(avg >= std::f64::consts::LN_2 - 1e-12, "logit {logit}: {avg}");
    }
}

#[test]
fn label_loss_contract_errors() {
    let dims = small_dims();
    let params = DgdaParams::init(dims, 3);
    let target_graph = random_graph(5, 0.3, DomainTag::Target, Some(true), 9);
    let err = label_loss_batch(&params, &[target_graph]).unwrap_err();
    assert!(matches!(err, ModelError::TargetInLabelBatch { index: 0 }));

    let unlabeled = random_graph(5, 0.3, DomainTag::Source, None, 9);
    let err = label_loss_batch(&params, &[unlabeled]).unwrap_err();
    assert!(matches!(err, ModelError::UnlabeledInLabelBatch { index: 0 }));

    let err = label_loss_batch(&params, &[]).unwrap_err();
    assert!(matches!(err, ModelError::EmptyBatch(_)));
}

#[test]
fn noise_loss_no_perturbation_saturated_logits() {
    let mask = Tensor::zeros(5, 5);
    let mut tape = Tape::new();
    let logits = tape.leaf(Tensor::filled(5, 5, -20.0));
    let l = weighted_pair_bce(&mut tape, logits, &mask, positive_pair_weight(&mask)).unwrap();
    assert!(tape.value(l).item() < 1e-8);

    let zeros = tape.leaf(Tensor::zeros(5, 5));
    let l = weighted_pair_bce(&mut tape, zeros, &mask, 1.0).unwrap();
    assert!((tape.value(l).item() - std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn entropy_regularizer_closed_forms() {
    let mut tape = Tape::new();
    // single zero entry: sigmoid = 0.5, contribution 0.5 ln 0.5
    let z = tape.leaf(Tensor::scalar(0.0));
    let e = entropy_regularizer(&mut tape, &[z]).unwrap();
    assert!((tape.value(e).item() - 0.5 * 0.5f64.ln()).abs() < 1e-12);

    // large z: sigmoid -> 1, log -> 0
    let z = tape.leaf(Tensor::scalar(40.0));
    let e = entropy_regularizer(&mut tape, &[z]).unwrap();
    assert!(tape.value(e).item().abs() < 1e-12);

    // minimum of p ln p at sigma(z) = 1/e
    let z_star = (1.0 / (std::f64::consts::E - 1.0)).ln();
    let z = tape.leaf(Tensor::scalar(z_star));
    let e = entropy_regularizer(&mut tape, &[z]).unwrap();
    assert!((tape.value(e).item() + 1.0 / std::f64::consts::E).abs() < 1e-9);
    // nearby points are higher
    for delta in [-0.1, 0.1] {
        let z = tape.leaf(Tensor::scalar(z_star + delta));
        let e2 = entropy_regularizer(&mut tape, &[z]).unwrap();
        assert!(tape.value(e2).item() > tape.value(e).item());
    }
}

#[test]
fn total_loss_reduces_to_elbo_when_weights_are_zero() {
    let dims = small_dims();
    let params = DgdaParams::init(dims, 3);
    let g = random_graph(6, 0.4, DomainTag::Source, Some(true), 10);
    let weights = LossWeights { gamma: 0.0, alpha: 0.0, omega: 0.0, delta: 0.0 };
    let b = total_loss(
        &params,
        &clean_input(&g),
        &weights,
        &LatentNoise::Deterministic,
        KlReduction::NodeMean,
    )
    .unwrap();
    let elbo_part = b.recon + b.kl_d + b.kl_y + b.kl_o;
    assert!((b.total - elbo_part).abs() < 1e-12);
}

#[test]
fn default_weights_match_published_values() {
    let w = LossWeights::default();
    assert_eq!((w.gamma, w.alpha, w.omega, w.delta), (1.0, 1.0, 0.1, 5.0));
}

#[test]
fn breakdown_total_matches_recombination() {
    let dims = small_dims();
    let params = DgdaParams::init(dims, 3);
    let weights = LossWeights::default();
    for (domain, label, s) in [
        (DomainTag::Source, Some(true), 21u64),
        (DomainTag::Target, None, 22),
    ] {
        let g = random_graph(6, 0.4, domain, label, s);
        let aug = augment(&g, 0.2, 0.2, 50).unwrap();
        let noise = LatentNoise::seeded(&dims, 6, 51);
        let b = total_loss(&params, &aug, &weights, &noise, KlReduction::NodeMean).unwrap();
        assert!((b.total - b.recombined_total(&weights)).abs() < 1e-12);
        if domain == DomainTag::Target {
            assert_eq!(b.l_y, 0.0);
        }
    }
}

#[test]
fn gradients_match_finite_differences_for_every_family() {
    let dims = small_dims();
    let params = DgdaParams::init(dims, 17);
    let g = random_graph(6, 0.4, DomainTag::Source, Some(true), 23);
    let aug = augment(&g, 0.2, 0.3, 71).unwrap();
    let weights = LossWeights::default();
    let eps = LatentEps::sample(&dims, 6, 91);

    let named = params.named();
    let tensors: Vec<Tensor> = named.iter().map(|(_, _, t)| (*t).clone()).collect();
    let dims_c = dims;
    let aug_c = aug.clone();
    let eps_c = eps.clone();
    let err = grad_check(
        move |tape, vars| {
            let template = DgdaParams::init(dims_c, 17);
            let pv = super::param_vars_from_ordered(&template, vars);
            let vars_loss = graph_loss(
                tape,
                &pv,
                &aug_c,
                &LatentNoise::Eps(eps_c.clone()),
                KlReduction::NodeMean,
            )
            .map_err(super::flatten_tensor_error)?;
            combine_total(tape, &vars_loss, &weights).map_err(super::flatten_tensor_error)
        },
        &tensors,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-4, "max relative error {err}");
}

#[test]
fn label_path_gradients_are_isolated() {
    let dims = small_dims();
    let params = DgdaParams::init(dims, 29);
    let g = random_graph(6, 0.4, DomainTag::Source, Some(true), 31);
    let mut tape = Tape::new();
    let pv = ParamVars::load(&mut tape, &params);
    let vars = graph_loss(
        &mut tape,
        &pv,
        &clean_input(&g),
        &LatentNoise::Deterministic,
        KlReduction::NodeMean,
    )
    .unwrap();
    let grads = tape.backward(vars.l_y.expect("labeled source graph")).unwrap();

    let ordered = pv.ordered();
    for ((name, family, _), var) in params.named().iter().zip(ordered) {
        let g_norm: f64 = grads.of(var).data().iter().map(|v| v.abs()).sum();
        match family {
            ParamFamily::PhiD
            | ParamFamily::PhiO
            | ParamFamily::ThetaD
            | ParamFamily::ThetaO
            | ParamFamily::ThetaG => {
                assert_eq!(g_norm, 0.0, "{name} should not receive label-loss gradient");
            }
            ParamFamily::PhiF | ParamFamily::PhiY | ParamFamily::ThetaY => {}
        }
    }
}

#[test]
fn loss_is_permutation_invariant_with_permuted_eps() {
    use rand::seq::SliceRandom;
    let dims = small_dims();
    let params = DgdaParams::init(dims, 37);
    let n = 6;
    let g = random_graph(n, 0.5, DomainTag::Source, Some(true), 41);
    let eps = LatentEps::sample(&dims, n, 43);
    let weights = LossWeights::default();

    let base = total_loss(
        &params,
        &clean_input(&g),
        &weights,
        &LatentNoise::Eps(eps.clone()),
        KlReduction::NodeMean,
    )
    .unwrap();

    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seed::rng(47, &[3]));

    let permute_rows = |t: &Tensor| {
        let mut out = Tensor::zeros(t.rows(), t.cols());
        for i in 0..t.rows() {
            for j in 0..t.cols() {
                out.set(perm[i], j, t.get(i, j));
            }
        }
        out
    };
    let a = g.adjacency();
    let mut pa = Tensor::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            pa.set(perm[i], perm[j], a.get(i, j));
        }
    }
    let pg = Graph::from_adjacency(
        pa,
        Some(permute_rows(g.features().unwrap())),
        g.label(),
        g.domain(),
    )
    .unwrap();
    let peps = LatentEps {
        d: permute_rows(&eps.d),
        y: permute_rows(&eps.y),
        o: permute_rows(&eps.o),
    };
    let permuted = total_loss(
        &params,
        &clean_input(&pg),
        &weights,
        &LatentNoise::Eps(peps),
        KlReduction::NodeMean,
    )
    .unwrap();
    assert!(
        (base.total - permuted.total).abs() < 1e-9,
        "{} vs {}",
        base.total,
        permuted.total
    );
}

#[test]
fn predict_is_deterministic_and_zero_head_gives_half() {
    let dims = small_dims();
    let mut params = DgdaParams::init(dims, 53);
    let g = random_graph(7, 0.4, DomainTag::Target, None, 59);
    let (p1, c1) = predict(&params, &g).unwrap();
    let (p2, c2) = predict(&params, &g).unwrap();
    assert_eq!(p1, p2);
    assert_eq!(c1, c2);

    params.cls_w1 = Tensor::zeros(dims.classifier_hidden, 1);
    params.cls_b1 = Tensor::zeros(1, 1);
    let (p, c) = predict(&params, &g).unwrap();
    assert_eq!(p, 0.5);
    assert!(c, "0.5 thresholds to the positive class");
}

#[test]
fn params_and_leaves_enumerate_in_the_same_order() {
    let dims = small_dims();
    let params = DgdaParams::init(dims, 61);
    let mut tape = Tape::new();
    let pv = ParamVars::load(&mut tape, &params);
    let named = params.named();
    let ordered = pv.ordered();
    assert_eq!(named.len(), ordered.len());
    for ((name, _, tensor), var) in named.iter().zip(ordered) {
        assert_eq!(
            tape.value(var),
            *tensor,
            "leaf order mismatch at {name}"
        );
    }
}

#[test]
fn overfit_single_noise_instance_recovers_mask() {
    use crate::tensor::{Optimizer, OptimizerKind};
    // Toy instance: one-hot latent rows give the decoder a free vector per
    // node, so the perturbation mask is realizable; train W_n0/W_n1 only.
    let n = 6;
    let width = 8;
    let g = random_graph(n, 0.5, DomainTag::Source, Some(true), 71);
    let aug = augment(&g, 0.4, 0.5, 73).unwrap();
    let mask = aug.perturbation_mask();
    let z_o_val = Tensor::identity(n);

    let mut rng = seed::rng(79, &[1]);
    let bound = (6.0 / (n + width) as f64).sqrt();
    let mut w0v = Tensor::zeros(n, width);
    w0v.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-bound..bound));
    let mut w1v = Tensor::zeros(width, width);
    w1v.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-bound..bound));

    let mut opt = Optimizer::new(OptimizerKind::Adam, 0.02, 0.0, 2);
    let mut last = f64::INFINITY;
    for _ in 0..1500 {
        let mut tape = Tape::new();
        let w0 = tape.leaf(w0v.clone());
        let w1 = tape.leaf(w1v.clone());
        let z = tape.leaf(z_o_val.clone());
        let pre = tape.matmul(z, w0).unwrap();
        let act = tape.relu(pre);
        let r = tape.matmul(act, w1).unwrap();
        let rt = tape.transpose(r);
        let logits = tape.matmul(r, rt).unwrap();
        let loss = weighted_pair_bce(&mut tape, logits, &mask, positive_pair_weight(&mask)).unwrap();
        last = tape.value(loss).item();
        let grads = tape.backward(loss).unwrap();
        opt.step_slot(0, &mut w0v, grads.of(w0)).unwrap();
        opt.step_slot(1, &mut w1v, grads.of(w1)).unwrap();
    }
    assert!(last < 0.1, "overfit noise loss {last}");

    // thresholding the sigmoid at 0.5 recovers the mask off-diagonal
    let act = z_o_val.matmul(&w0v).unwrap().map(|v| v.max(0.0));
    let r = act.matmul(&w1v).unwrap();
    let logits = r.matmul(&r.transpose()).unwrap();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let p = 1.0 / (1.0 + (-logits.get(i, j)).exp());
            assert_eq!((p >= 0.5) as i32 as f64, mask.get(i, j), "pair ({i},{j})");
        }
    }
}

#[test]
fn overfit_single_graph_prediction_matches_label() {
    use crate::tensor::{Optimizer, OptimizerKind};
    let dims = small_dims();
    let mut params = DgdaParams::init(dims, 83);
    let g = random_graph(6, 0.4, DomainTag::Source, Some(true), 89);
    let weights = LossWeights::default();
    let named_count = params.named().len();
    let mut opt = Optimizer::new(OptimizerKind::Adam, 0.01, 0.0, named_count);

    for step in 0..500 {
        let mut tape = Tape::new();
        let pv = ParamVars::load(&mut tape, &params);
        let vars = graph_loss(
            &mut tape,
            &pv,
            &clean_input(&g),
            &LatentNoise::seeded(&dims, 6, 1000 + step),
            KlReduction::NodeMean,
        )
        .unwrap();
        let total = combine_total(&mut tape, &vars, &weights).unwrap();
        let grads = tape.backward(total).unwrap();
        let ordered = pv.ordered();
        for (slot, (_, _, tensor)) in params.named_mut().into_iter().enumerate() {
            opt.step_slot(slot, tensor, grads.of(ordered[slot])).unwrap();
        }
    }
    let (p, class) = predict(&params, &g).unwrap();
    assert_eq!(class, g.label().unwrap(), "probability {p}");
}
