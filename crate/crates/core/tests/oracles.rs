mod common;

use common::oracle::{self, close, Mat};
use flowsentry::diff::{seeded_rng, Activation, Graph, GraphAttention, GruCell, Mlp, ParamSet, Tensor};
use flowsentry::predictor::{Architecture, PredictorConfig, Standardizer};
use rand::Rng;

fn to_tensor(m: &Mat) -> Tensor {
    Tensor::matrix(m.len(), m[0].len(), m.concat()).unwrap()
}

fn random_mat(rows: usize, cols: usize, seed: u64) -> Mat {
    let mut rng = seeded_rng(seed);
    (0..rows).map(|_| (0..cols).map(|_| rng.random_range(-1.5..1.5)).collect()).collect()
}

fn assert_close(graph: &[f64], want: &Mat) {
    let want = want.concat();
    assert_eq!(graph.len(), want.len());
    for (i, (a, b)) in graph.iter().zip(&want).enumerate() {
        assert!(close(*a, *b, 1e-12), "entry {i}: graph {a} vs oracle {b}");
    }
}

#[test]
fn mlp_matches_straight_line_oracle() {
    let net = Mlp::new("m", &[4, 7, 5, 3], Activation::LeakyRelu, Activation::Tanh);
    let mut p = ParamSet::new();
    net.init(&mut p, &mut seeded_rng(42));
    let ones = vec![vec![1.0; 4]];
    let mut g = Graph::new();
    let bind = p.bind(&mut g);
    let x = g.leaf(to_tensor(&ones));
    let y = net.forward(&mut g, &bind, x).unwrap();
    assert_close(g.value(y).data(), &oracle::mlp(&p, &net, &ones, oracle::leaky, f64::tanh));
}

#[test]
fn gru_matches_straight_line_oracle() {
    let cell = GruCell::new("g", 3, 5);
    let mut p = ParamSet::new();
    cell.init(&mut p, &mut seeded_rng(7));
    let (h, x) = (random_mat(4, 5, 70), random_mat(4, 3, 71));
    let mut g = Graph::new();
    let bind = p.bind(&mut g);
    let (hv, xv) = (g.leaf(to_tensor(&h)), g.leaf(to_tensor(&x)));
    let y = cell.step(&mut g, &bind, hv, xv).unwrap();
    assert_close(g.value(y).data(), &oracle::gru(&p, &cell, &h, &x));
}

#[test]
fn attention_matches_direct_softmax() {
    let m = 4;
    let attn = GraphAttention::new("attn", 6, 5);
    let mut p = ParamSet::new();
    attn.init(&mut p, &mut seeded_rng(3));
    let nodes = random_mat(m, 6, 30);
    let mask: Vec<bool> = (0..m * m).map(|k| k / m != k % m).collect();
    let mut g = Graph::new();
    let bind = p.bind(&mut g);
    let n = g.leaf(to_tensor(&nodes));
    let a = attn.coefficients(&mut g, &bind, n, mask).unwrap();
    let want = oracle::attention(&p, "attn", &nodes, |i, j| i != j);
    assert_close(g.value(a).data(), &want);
    for (i, row) in want.iter().enumerate() {
        assert_eq!(row[i], 0.0);
    }
}

#[test]
fn predictor_matches_straight_line_oracle() {
    let config = PredictorConfig { window: 3, iterations: 2, ..PredictorConfig::default() }.with_hidden(6);
    let arch = Architecture::new(4, &config).unwrap();
    let p = arch.init(&mut seeded_rng(11));
    let std = Standardizer { center: vec![0.2, -0.1, 0.4, 1.0], scale: vec![1.3, 0.8, 1.1, 0.6] };
    let blocks: Vec<Mat> = (0..3).map(|b| random_mat(4, 3, 110 + b)).collect();
    for target in 0..4 {
        let mut blocks = blocks.clone();
        for b in &mut blocks {
            b[target] = vec![0.0; 3];
        }
        let features = to_tensor(&blocks.concat());
        let mut g = Graph::new();
        let bind = p.bind(&mut g);
        let (y, alpha) = arch.forward(&mut g, &bind, &Tensor::identity(4), target, features, &std).unwrap();
        assert_close(g.value(alpha).data(), &oracle::predictor_attention(&arch, &p, target));
        let want: Vec<Vec<f64>> = blocks
            .iter()
            .map(|b| vec![oracle::predictor(&arch, &p, target, b, std.center[target], std.scale[target])])
            .collect();
        assert_close(g.value(y).data(), &want);
    }
}

#[test]
fn single_round_message_is_the_uniform_mean() {
    let config = PredictorConfig { window: 2, iterations: 1, ..PredictorConfig::default() }.with_hidden(4);
    let arch = Architecture::new(3, &config).unwrap();
    let mut p = arch.init(&mut seeded_rng(5));
    for name in ["attn.a_src", "attn.a_dst"] {
        p.get_mut(name).unwrap().data_mut().fill(0.0);
    }
    let block = random_mat(3, 2, 50);
    let h0 = oracle::mlp(&p, &arch.enc_flow, &block, oracle::leaky, |x| x);
    let mean: Vec<f64> = (0..4).map(|j| (h0[1][j] + h0[2][j]) / 2.0).collect();
    let h1 = oracle::gru(&p, &arch.update, &vec![h0[0].clone()], &vec![mean]);
    let want = oracle::mlp(&p, &arch.readout, &h1, oracle::leaky, |x| x)[0][0];
    let got = oracle::predictor(&arch, &p, 0, &block, 0.0, 1.0);
    assert!(close(got, want, 1e-12), "{got} vs {want}");
}
