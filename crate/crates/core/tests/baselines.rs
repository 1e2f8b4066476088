use flowsentry::baselines::{alpha_for_window, ewma_forecasts, ewma_score, pca_fit, pca_input, Components, PcaInput, PcaModel};
use flowsentry::data::{generate_synthetic, SyntheticSpec};
use flowsentry::diff::seeded_rng;
use rand::Rng;

/// `p_t = (1-a)^t y_0 + a * sum_{k<t} (1-a)^(t-1-k) y_k`.
fn ewma_closed_form(y: &[f64], a: f64) -> Vec<f64> {
    (0..y.len())
        .map(|t| (1.0 - a).powi(t as i32) * y[0] + (0..t).map(|k| a * (1.0 - a).powi((t - 1 - k) as i32) * y[k]).sum::<f64>())
        .collect()
}

#[test]
fn ewma_matches_closed_form() {
    let mut rng = seeded_rng(100);
    for trial in 0..20 {
        let y: Vec<f64> = (0..100).map(|_| rng.random_range(0.0..20.0)).collect();
        let a = if trial == 0 { alpha_for_window(5) } else { rng.random_range(0.01..1.0) };
        let got = ewma_forecasts(&y, a).unwrap();
        for (t, (g, w)) in got.iter().zip(ewma_closed_form(&y, a)).enumerate() {
            assert!((g - w).abs() <= 1e-9 * w.abs().max(1.0), "alpha {a}, t {t}: {g} vs {w}");
        }
    }
}

#[test]
fn ewma_alpha_one_is_persistence() {
    let mut rng = seeded_rng(101);
    let y: Vec<f64> = (0..100).map(|_| rng.random_range(-5.0..5.0)).collect();
    let p = ewma_forecasts(&y, 1.0).unwrap();
    assert_eq!(p[0], y[0]);
    assert!((1..100).all(|t| p[t] == y[t - 1]));
    let (_, scores) = ewma_score(&[3.0, 1.0, 3.0, 1.0, 3.0, 1.0], 1.0, 3, 1.0).unwrap();
    assert_eq!(scores, vec![1.0, 1.0, 1.0]);
}

/// Residual energy summed over the discarded axes.
fn residual_energy(model: &PcaModel, y: &[f64]) -> f64 {
    model.axes[model.k..]
        .iter()
        .map(|a| a.iter().zip(y.iter().zip(&model.mean)).map(|(ai, (v, m))| ai * (v - m)).sum::<f64>().powi(2))
        .sum()
}

fn s1_links() -> (Vec<f64>, Vec<f64>, usize, Vec<usize>) {
    let data = generate_synthetic(&SyntheticSpec::scenario_s1(1)).unwrap();
    let (train, test) = data.matrix.split_train_test(0.5).unwrap();
    let (x, dims) = pca_input(&train, &data.routing, PcaInput::Links).unwrap();
    let (y, _) = pca_input(&test, &data.routing, PcaInput::Links).unwrap();
    let half = train.n_samples();
    let busy: Vec<usize> = data.labels.iter().flat_map(|l| l.start.saturating_sub(half)..=l.end.saturating_sub(half)).collect();
    (x, y, dims, busy)
}

#[test]
fn link_spike_is_flagged_at_99_percent() {
    let (x, y, dims, busy) = s1_links();
    let model = pca_fit(&x, dims, Components::default(), 0.99).unwrap();
    let rows = y.len() / dims;
    // The busiest link, doubled as by a magnitude-1 point spike.
    let mean = |l: usize| (0..rows).map(|t| y[t * dims + l]).sum::<f64>() / rows as f64;
    let link = (0..dims).max_by(|&a, &b| mean(a).total_cmp(&mean(b))).unwrap();
    let t = (1000..rows).find(|t| !busy.contains(t)).unwrap();
    let mut row = y[t * dims..(t + 1) * dims].to_vec();
    assert!(residual_energy(&model, &row) <= model.q_threshold, "bin {t} flagged before the spike");
    row[link] *= 2.0;
    let energy = residual_energy(&model, &row);
    assert!(energy > model.q_threshold, "residual {energy:.3e} vs Q {:.3e}", model.q_threshold);
    assert_eq!(model.detect(&row).unwrap(), vec![0]);
    assert!((model.energies(&row).1 - energy).abs() <= 1e-9 * energy);
}

#[test]
fn aggressive_confidence_flags_over_a_fifth_of_samples() {
    let (x, y, dims, _) = s1_links();
    let model = pca_fit(&x, dims, Components::default(), 0.75).unwrap();
    let fraction = model.detect(&y).unwrap().len() as f64 / (y.len() / dims) as f64;
    assert!(fraction > 0.2, "flagged {fraction}");
    let strict = model.with_confidence(0.999).unwrap().detect(&y).unwrap().len() as f64 / (y.len() / dims) as f64;
    assert!(strict < fraction);
}

#[test]
fn axes_orthonormal_and_energy_conserved_on_links() {
    let (x, y, dims, _) = s1_links();
    let model = pca_fit(&x, dims, Components::default(), 0.99).unwrap();
    for (i, a) in model.axes.iter().enumerate() {
        for (j, b) in model.axes.iter().enumerate() {
            let dot: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
            assert!((dot - f64::from(u8::from(i == j))).abs() < 1e-9, "axes {i},{j}: {dot}");
        }
    }
    for row in y.chunks(dims).step_by(97) {
        let (p, r) = model.energies(row);
        let total: f64 = row.iter().zip(&model.mean).map(|(v, m)| (v - m).powi(2)).sum();
        assert!((p + r - total).abs() <= 1e-9 * total);
    }
}
