//! Graph-attention contextual predictor: one model per target flow predicts
//! the target's next value from its context flows.

pub mod config;
pub mod model;
pub mod train;

pub use config::PredictorConfig;
pub use model::{attention_map, Architecture, AttentionMap, Standardizer};
pub use train::{train, train_shared, Sidecar, TrainedPredictor};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, FlowId, SyntheticSpec, TrafficMatrix};
    use crate::diff::{Graph, Tensor};

    fn tiny() -> PredictorConfig {
        PredictorConfig { epochs: 2, batch_size: 8, ..PredictorConfig::default() }.with_hidden(4)
    }

    fn toy_matrix() -> TrafficMatrix {
        let spec = SyntheticSpec { n_flows: 4, n_groups: 2, samples: 60, ..SyntheticSpec::default() };
        generate_synthetic(&spec).unwrap().matrix
    }

    #[test]
    fn single_flow_is_a_contract_error() {
        assert!(Architecture::new(1, &tiny()).is_err());
    }

    #[test]
    fn zero_attention_params_give_uniform_weights() {
        let arch = Architecture::new(5, &tiny()).unwrap();
        let mut params = arch.init(&mut crate::diff::seeded_rng(0));
        for name in [arch.attention.src_name(), arch.attention.dst_name()] {
            let t = params.get_mut(&name).unwrap();
            t.data_mut().fill(0.0);
        }
        let map = attention_map(&arch, &params, 2).unwrap();
        assert_eq!(map.weights[2], 0.0);
        for j in [0, 1, 3, 4] {
            assert_eq!(map.weights[j], 0.25);
        }
        assert_eq!(map.ranking, vec![0, 1, 3, 4]);
    }

    #[test]
    fn two_flows_give_weight_one() {
        let arch = Architecture::new(2, &tiny()).unwrap();
        let params = arch.init(&mut crate::diff::seeded_rng(9));
        let map = attention_map(&arch, &params, 0).unwrap();
        assert_eq!(map.weights, vec![0.0, 1.0]);
    }

    #[test]
    fn zero_network_is_constant() {
        let tm = toy_matrix();
        let mut model = train(&tm, 1, &tiny()).unwrap();
        let names: Vec<String> = model.params.names().map(String::from).collect();
        for n in names {
            model.params.get_mut(&n).unwrap().data_mut().fill(0.0);
        }
        let preds = model.predict_normalized(&crate::data::normalize(&tm).unwrap().0).unwrap();
        assert!(preds.iter().all(|&p| p == model.standardizer.center[1]));
    }

    #[test]
    fn counts_universe_and_round_trip() {
        let tm = toy_matrix();
        let (train_tm, test_tm) = tm.split_train_test(0.5).unwrap();
        let model = train(&train_tm, 0, &tiny()).unwrap();
        assert!(model.mae_tr >= 0.0 && model.mre_tr >= 0.0);
        let preds = model.predict_series(&test_tm).unwrap();
        assert_eq!(preds.len(), test_tm.n_samples() - 5 - 1);

        let other = test_tm.select_flows(&[0, 1, 2]);
        assert!(matches!(model.predict_series(&other), Err(crate::Error::Contract(_))));

        let dir = tempfile::tempdir().unwrap();
        model.save(dir.path()).unwrap();
        let back = TrainedPredictor::load(dir.path(), 0).unwrap();
        assert_eq!(back.params, model.params);
        assert_eq!(back.mae_tr.to_bits(), model.mae_tr.to_bits());
        assert_eq!(back.predict_series(&test_tm).unwrap(), preds);
        assert!(TrainedPredictor::load(dir.path(), 3).is_err());
    }

    #[test]
    fn training_is_bit_deterministic() {
        let tm = toy_matrix();
        let a = train(&tm, 2, &tiny()).unwrap();
        let b = train(&tm, 2, &tiny()).unwrap();
        assert_eq!(a.mae_tr.to_bits(), b.mae_tr.to_bits());
        assert_eq!(a.params, b.params);
        let shuffled = PredictorConfig { shuffle: true, ..tiny() };
        let c = train(&tm, 2, &shuffled).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn shared_model_serves_all_targets() {
        let tm = toy_matrix();
        let models = train_shared(&tm, &[0, 3], &PredictorConfig { shared_model: true, ..tiny() }).unwrap();
        assert_eq!(models.len(), 2);
        assert_eq!(models[0].params, models[1].params);
        assert_eq!((models[0].target, models[1].target), (0, 3));
    }

    #[test]
    fn top_context_clips_and_breaks_ties_by_index() {
        let tm = toy_matrix();
        let mut model = train(&tm, 1, &tiny()).unwrap();
        model.attention = AttentionMap::from_weights(1, vec![1.0 / 3.0, 0.0, 1.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(model.top_context_flows(2), vec![0, 2]);
        assert_eq!(model.top_context_flows(10), vec![0, 2, 3]);
    }

    #[test]
    fn forward_rejects_mismatched_features() {
        let arch = Architecture::new(3, &tiny()).unwrap();
        let params = arch.init(&mut crate::diff::seeded_rng(1));
        let mut g = Graph::new();
        let bind = params.bind(&mut g);
        let bad = Tensor::zeros(4, 5);
        let std = Standardizer::identity(3);
        assert!(arch.forward(&mut g, &bind, &Tensor::identity(3), 0, bad, &std).is_err());
        let _ = FlowId::new("a", "b");
    }
}
