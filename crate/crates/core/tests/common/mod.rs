#![allow(dead_code)]

pub mod oracle;

use flowsentry::diff::{Binding, Graph, ParamSet, Var};

/// Worst disagreement between analytic and central-difference gradients.
#[derive(Debug)]
pub struct GradReport {
    pub checked: usize,
    pub worst_rel: f64,
    pub worst_abs: f64,
    pub worst_name: String,
    pub failures: usize,
}

/// Compares every gradient entry of `loss` against central differences.
/// An entry passes when the relative error is within `rel` or the absolute
/// error is below `abs_floor`.
pub fn gradcheck(
    params: &ParamSet,
    loss: impl Fn(&mut Graph, &Binding) -> Var,
    eps: f64,
    rel: f64,
    abs_floor: f64,
) -> GradReport {
    let mut g = Graph::new();
    let bind = params.bind(&mut g);
    let l = loss(&mut g, &bind);
    let grads = bind.grads(&g, &g.backward(l).unwrap());
    let eval = |p: &ParamSet| {
        let mut g = Graph::new();
        let bind = p.bind(&mut g);
        let l = loss(&mut g, &bind);
        g.value(l).item()
    };
    let mut report = GradReport { checked: 0, worst_rel: 0.0, worst_abs: 0.0, worst_name: String::new(), failures: 0 };
    let mut work = params.clone();
    let names: Vec<String> = params.names().map(String::from).collect();
    for name in names {
        let n = params.get(&name).unwrap().len();
        for k in 0..n {
            let orig = params.get(&name).unwrap().data()[k];
            work.get_mut(&name).unwrap().data_mut()[k] = orig + eps;
            let up = eval(&work);
            work.get_mut(&name).unwrap().data_mut()[k] = orig - eps;
            let down = eval(&work);
            work.get_mut(&name).unwrap().data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let analytic = grads.get(&name).unwrap().data()[k];
            let diff = (numeric - analytic).abs();
            let r = diff / numeric.abs().max(analytic.abs()).max(f64::MIN_POSITIVE);
            report.checked += 1;
            report.worst_abs = report.worst_abs.max(diff);
            if diff > abs_floor && r > rel {
                report.failures += 1;
            }
            if diff > abs_floor && r > report.worst_rel {
                report.worst_rel = r;
                report.worst_name = format!("{name}[{k}]");
            }
        }
    }
    report
}
