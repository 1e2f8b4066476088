//! Plain-loop re-implementations of the network arithmetic, written against
//! parameter tensors only.

use flowsentry::diff::{GruCell, Mlp, ParamSet, LEAKY_SLOPE};
use flowsentry::predictor::Architecture;

pub type Mat = Vec<Vec<f64>>;

pub fn param(p: &ParamSet, name: &str) -> Mat {
    let t = p.get(name).unwrap_or_else(|| panic!("missing {name}"));
    (0..t.rows()).map(|r| t.row_slice(r).to_vec()).collect()
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        assert_eq!(a[i].len(), k);
        for j in 0..m {
            let mut s = 0.0;
            for l in 0..k {
                s += a[i][l] * b[l][j];
            }
            out[i][j] = s;
        }
    }
    out
}

pub fn leaky(x: f64) -> f64 {
    if x > 0.0 { x } else { LEAKY_SLOPE * x }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Affine layers with `hidden` between them and `output` after the last.
pub fn mlp(p: &ParamSet, net: &Mlp, x: &Mat, hidden: fn(f64) -> f64, output: fn(f64) -> f64) -> Mat {
    let mut h = x.clone();
    for l in 0..net.layers() {
        let w = param(p, &net.weight_name(l));
        let b = param(p, &net.bias_name(l));
        let act = if l + 1 == net.layers() { output } else { hidden };
        h = matmul(&h, &w)
            .into_iter()
            .map(|row| row.iter().zip(&b[0]).map(|(v, c)| act(v + c)).collect())
            .collect();
    }
    h
}

pub fn gru(p: &ParamSet, cell: &GruCell, h: &Mat, x: &Mat) -> Mat {
    let d = cell.hidden();
    let w = param(p, &cell.w_name());
    let u_zr = param(p, &cell.u_zr_name());
    let u_n = param(p, &cell.u_n_name());
    let b = &param(p, &cell.b_name())[0];
    let xw = matmul(x, &w);
    let hu = matmul(h, &u_zr);
    let mut out = Vec::with_capacity(h.len());
    for i in 0..h.len() {
        let z: Vec<f64> = (0..d).map(|j| sigmoid(xw[i][j] + b[j] + hu[i][j])).collect();
        let r: Vec<f64> = (0..d).map(|j| sigmoid(xw[i][d + j] + b[d + j] + hu[i][d + j])).collect();
        let rh: Vec<f64> = (0..d).map(|j| r[j] * h[i][j]).collect();
        let rhu = matmul(&vec![rh], &u_n);
        let n: Vec<f64> = (0..d).map(|j| (xw[i][2 * d + j] + b[2 * d + j] + rhu[0][j]).tanh()).collect();
        out.push((0..d).map(|j| (1.0 - z[j]) * h[i][j] + z[j] * n[j]).collect());
    }
    out
}

/// `softmax_j(LeakyReLU(s_i + t_j))` over `j` with `keep(i, j)`.
pub fn attention(p: &ParamSet, prefix: &str, nodes: &Mat, keep: impl Fn(usize, usize) -> bool) -> Mat {
    let z = matmul(nodes, &param(p, &format!("{prefix}.proj")));
    let s = matmul(&z, &param(p, &format!("{prefix}.a_src")));
    let t = matmul(&z, &param(p, &format!("{prefix}.a_dst")));
    let m = nodes.len();
    (0..m)
        .map(|i| {
            let e: Vec<f64> = (0..m).map(|j| if keep(i, j) { leaky(s[i][0] + t[j][0]).exp() } else { 0.0 }).collect();
            let total: f64 = e.iter().sum();
            e.iter().map(|v| v / total).collect()
        })
        .collect()
}

fn identity(x: f64) -> f64 {
    x
}

/// Attention matrix of the predictor for `target`.
pub fn predictor_attention(arch: &Architecture, p: &ParamSet, target: usize) -> Mat {
    let m = arch.n_flows;
    let eye: Mat = (0..m).map(|i| (0..m).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    let label: Mat = (0..m).map(|i| vec![f64::from(u8::from(i == target))]).collect();
    let h_p = mlp(p, &arch.enc_pos, &eye, leaky, identity);
    let h_o = mlp(p, &arch.enc_target, &label, leaky, identity);
    let nodes: Mat = h_p.iter().zip(&h_o).map(|(a, b)| a.iter().chain(b).copied().collect()).collect();
    attention(p, "attn", &nodes, |i, j| arch.self_loop || i != j)
}

/// Prediction for one standardized `M x W` feature block.
pub fn predictor(arch: &Architecture, p: &ParamSet, target: usize, block: &Mat, center: f64, scale: f64) -> f64 {
    let alpha = predictor_attention(arch, p, target);
    let mut h = mlp(p, &arch.enc_flow, block, leaky, identity);
    for _ in 0..arch.iterations {
        let msg = matmul(&alpha, &h);
        h = gru(p, &arch.update, &h, &msg);
    }
    let out = mlp(p, &arch.readout, &vec![h[target].clone()], leaky, identity);
    center + scale * out[0][0]
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}
