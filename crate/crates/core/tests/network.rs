use gnss_setnet::featurize::{CorrectionLabel, FeatureRow, FeatureSet, Frame, Sample};
use gnss_setnet::nn::{
    backward, init_params, multihead_attention, network_forward, AttentionWeights, NetConfig,
    NetworkParams, Tensor2,
};
use gnss_setnet::rng::SeedStream;
use gnss_setnet::{EcefPosition, NedVector, Parallelism};
use proptest::prelude::*;
use rand::Rng;

fn small_cfg() -> NetConfig {
    NetConfig {
        latent_dim: 8,
        n_heads: 2,
        n_encoder_layers: 1,
        n_decoder_layers: 1,
        ffn_hidden: 8,
        n_pool_seeds: 1,
    }
}

fn random_rows(m: usize, seed: u64) -> Vec<[f64; 4]> {
    let mut rng = SeedStream::new(seed).rng();
    (0..m)
        .map(|_| {
            let n: f64 = rng.random_range(-1.0..1.0);
            let e: f64 = rng.random_range(-1.0..1.0);
            let d: f64 = -rng.random_range(0.1..1.0);
            let s = (n * n + e * e + d * d).sqrt();
            [rng.random_range(-20.0..20.0), n / s, e / s, d / s]
        })
        .collect()
}

fn feature_set(rows: &[[f64; 4]]) -> FeatureSet {
    FeatureSet {
        epoch_id: 0,
        p_init: EcefPosition::new(6_378_137.0, 0.0, 0.0),
        rows: rows
            .iter()
            .map(|r| FeatureRow {
                residual: r[0],
                los: [r[1], r[2], r[3]],
            })
            .collect(),
        frame: Frame::Ned,
    }
}

fn label(v: [f64; 3]) -> CorrectionLabel {
    CorrectionLabel {
        delta_p: NedVector::from_array(v),
    }
}

fn batch_loss(params: &NetworkParams, batch: &[Sample]) -> f64 {
    let mut s = 0.0;
    for (f, l) in batch {
        let d = network_forward(params, f).unwrap() - l.delta_p;
        s += d.north * d.north + d.east * d.east + d.down * d.down;
    }
    s / batch.len() as f64
}

#[test]
fn gradient_matches_central_differences() {
    let cfg = small_cfg();
    let mut params = init_params(&cfg, 21).unwrap();
    // move gains and biases off their initial values so every term is exercised
    let mut rng = SeedStream::new(99).rng();
    for v in params.values.iter_mut() {
        *v += rng.random_range(-0.1..0.1);
    }
    let batch: Vec<Sample> = vec![
        (feature_set(&random_rows(3, 1)), label([1.0, -2.0, 0.5])),
        (feature_set(&random_rows(3, 2)), label([-3.0, 0.0, 4.0])),
    ];
    let g = backward(&params, &batch, Parallelism::Sequential).unwrap();
    assert!((g.loss - batch_loss(&params, &batch)).abs() < 1e-9);

    let h = 1e-5;
    // central differences cannot resolve a 1e-4 relative gap below this magnitude
    let floor = 1e4 * f64::EPSILON * g.loss.abs() / h;
    let mut worst: f64 = 0.0;
    for i in 0..params.values.len() {
        let orig = params.values[i];
        params.values[i] = orig + h;
        let up = batch_loss(&params, &batch);
        params.values[i] = orig - h;
        let down = batch_loss(&params, &batch);
        params.values[i] = orig;
        let fd = (up - down) / (2.0 * h);
        let an = g.values[i];
        let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(floor);
        worst = worst.max(rel);
    }
    assert!(worst < 1e-4, "max relative error {worst:e}");
}

#[test]
fn zero_loss_gives_zero_gradient() {
    // all-zero parameters predict zero, matching all-zero labels
    let params = NetworkParams::zeros(small_cfg()).unwrap();
    let batch: Vec<Sample> = vec![(feature_set(&random_rows(4, 3)), label([0.0; 3]))];
    let g = backward(&params, &batch, Parallelism::Sequential).unwrap();
    assert_eq!(g.loss, 0.0);
    assert!(g.values.iter().all(|v| *v == 0.0));
}

#[test]
fn parallel_and_sequential_gradients_are_identical() {
    let params = init_params(&small_cfg(), 5).unwrap();
    let batch: Vec<Sample> = (0..19)
        .map(|i| (feature_set(&random_rows(3 + i % 5, i as u64)), label([i as f64, 1.0, -1.0])))
        .collect();
    let a = backward(&params, &batch, Parallelism::Sequential).unwrap();
    let b = backward(&params, &batch, Parallelism::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn defined_for_several_set_sizes() {
    let params = init_params(&NetConfig::default(), 0).unwrap();
    for m in [1, 4, 8, 12, 32] {
        let out = network_forward(&params, &feature_set(&random_rows(m, m as u64))).unwrap();
        assert!(out.is_finite());
    }
}

#[test]
fn duplicating_rows_leaves_output_unchanged() {
    let params = init_params(&NetConfig::default(), 4).unwrap();
    let rows = random_rows(6, 8);
    let doubled: Vec<[f64; 4]> = rows.iter().chain(rows.iter()).copied().collect();
    let a = network_forward(&params, &feature_set(&rows)).unwrap();
    let b = network_forward(&params, &feature_set(&doubled)).unwrap();
    assert!((a - b).max_abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn permutation_invariant(seed in 0u64..1000, m in 1usize..12, rot in 0usize..12) {
        let params = init_params(&NetConfig::default(), 1).unwrap();
        let rows = random_rows(m, seed);
        let mut shuffled = rows.clone();
        shuffled.reverse();
        shuffled.rotate_left(rot % m);
        let a = network_forward(&params, &feature_set(&rows)).unwrap();
        let b = network_forward(&params, &feature_set(&shuffled)).unwrap();
        prop_assert!((a - b).max_abs() < 1e-9);
    }
}

struct OwnedAttention {
    mats: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    dim: usize,
}

impl OwnedAttention {
    fn random(dim: usize, seed: u64) -> Self {
        let mut rng = SeedStream::new(seed).rng();
        let mut mat = |n: usize| (0..n).map(|_| rng.random_range(-0.5..0.5)).collect::<Vec<f64>>();
        Self {
            mats: (0..4).map(|_| mat(dim * dim)).collect(),
            biases: (0..4).map(|_| mat(dim)).collect(),
            dim,
        }
    }

    fn weights(&self, heads: usize) -> AttentionWeights<'_> {
        AttentionWeights {
            wq: &self.mats[0],
            bq: &self.biases[0],
            wk: &self.mats[1],
            bk: &self.biases[1],
            wv: &self.mats[2],
            bv: &self.biases[2],
            wo: &self.mats[3],
            bo: &self.biases[3],
            dim: self.dim,
            heads,
        }
    }
}

fn project(x: &[f64], w: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    (0..d)
        .map(|j| b[j] + (0..d).map(|i| x[i] * w[i * d + j]).sum::<f64>())
        .collect()
}

#[test]
fn single_key_attention_is_projected_value() {
    let d = 8;
    let a = OwnedAttention::random(d, 7);
    let mut rng = SeedStream::new(2).rng();
    let q = Tensor2::from_vec(3, d, (0..3 * d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let kv = Tensor2::from_vec(1, d, (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let out = multihead_attention(&a.weights(2), &q, &kv).unwrap();
    let v = project(kv.row(0), &a.mats[2], &a.biases[2], d);
    let want = project(&v, &a.mats[3], &a.biases[3], d);
    for r in 0..3 {
        for j in 0..d {
            assert!((out.row(r)[j] - want[j]).abs() < 1e-12);
        }
    }
}

#[test]
fn identical_keys_average_values() {
    // identical key rows give uniform weights, so the output equals the single-key case
    let d = 8;
    let a = OwnedAttention::random(d, 3);
    let row: Vec<f64> = (0..d).map(|i| i as f64 * 0.1 - 0.3).collect();
    let q = Tensor2::from_vec(1, d, vec![0.7; d]).unwrap();
    let one = Tensor2::from_vec(1, d, row.clone()).unwrap();
    let many = Tensor2::from_vec(5, d, row.repeat(5)).unwrap();
    let x = multihead_attention(&a.weights(4), &q, &one).unwrap();
    let y = multihead_attention(&a.weights(4), &q, &many).unwrap();
    for (u, v) in x.data.iter().zip(&y.data) {
        assert!((u - v).abs() < 1e-12);
    }
}

#[test]
fn attention_ignores_key_order_and_checks_shapes() {
    let d = 8;
    let a = OwnedAttention::random(d, 11);
    let mut rng = SeedStream::new(4).rng();
    let q = Tensor2::from_vec(2, d, (0..2 * d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let kv_rows: Vec<Vec<f64>> = (0..5)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let kv = Tensor2::from_vec(5, d, kv_rows.concat()).unwrap();
    let mut rev = kv_rows.clone();
    rev.reverse();
    let kv_rev = Tensor2::from_vec(5, d, rev.concat()).unwrap();
    let x = multihead_attention(&a.weights(2), &q, &kv).unwrap();
    let y = multihead_attention(&a.weights(2), &q, &kv_rev).unwrap();
    for (u, v) in x.data.iter().zip(&y.data) {
        assert!((u - v).abs() < 1e-9);
    }
    assert!(multihead_attention(&a.weights(3), &q, &kv).is_err());
    let narrow = Tensor2::zeros(1, d - 1);
    assert!(multihead_attention(&a.weights(2), &narrow, &kv).is_err());
}
