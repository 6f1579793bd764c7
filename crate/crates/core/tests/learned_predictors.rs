use videosync_core::nn::{decode_model, encode_model, forward};
use videosync_core::predictors::{
    encode_input, predict_learned, train_classifier, train_classifier_with_report, Predictor, PredictorConfig,
    PredictorKind, TrainSpec,
};
use videosync_core::simmatrix::SimilarityMatrix;

/// 0 along `col = row + k`, -1 elsewhere.
fn ideal(n: usize, k: i64) -> SimilarityMatrix {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if j as i64 == i as i64 + k { 0.0 } else { -1.0 }).collect())
        .collect();
    SimilarityMatrix::from_rows(&rows).unwrap()
}

fn ideal_set() -> Vec<(SimilarityMatrix, i64)> {
    [-1, 0, 1].iter().map(|&k| (ideal(20, k), k)).collect()
}

#[test]
fn logreg_separates_ideal_shifts() {
    let config = PredictorConfig::new(PredictorKind::Logreg).with_train(TrainSpec {
        epochs: 200,
        ..TrainSpec::with_seed(11)
    });
    let (model, report) = train_classifier_with_report(&config, &ideal_set()).unwrap();
    assert_eq!(report.train_accuracy, 1.0);
    assert_eq!(report.epoch_losses.len(), 200);
    assert!(report.epoch_losses.last() < report.epoch_losses.first());
    for (m, k) in ideal_set() {
        assert_eq!(predict_learned(&model, &m).unwrap().offset, k);
    }
}

#[test]
fn training_is_bit_reproducible() {
    let config = PredictorConfig {
        pad_size: 64,
        ..PredictorConfig::new(PredictorKind::Mlp)
    }
    .with_train(TrainSpec {
        epochs: 5,
        batch_size: 2,
        ..TrainSpec::with_seed(3)
    });
    let a = train_classifier(&config, &ideal_set()).unwrap();
    let b = train_classifier(&config, &ideal_set()).unwrap();
    assert_eq!(encode_model(&a).unwrap(), encode_model(&b).unwrap());
    let c = train_classifier(&config.clone().with_train(TrainSpec { seed: 4, ..config.train.unwrap() }), &ideal_set()).unwrap();
    assert_ne!(encode_model(&a).unwrap(), encode_model(&c).unwrap());
}

#[test]
fn serialized_models_predict_identically() {
    for kind in [PredictorKind::Logreg, PredictorKind::Svm, PredictorKind::Mlp, PredictorKind::Cnn] {
        let config = PredictorConfig {
            pad_size: 64,
            ..PredictorConfig::new(kind)
        }
        .with_train(TrainSpec {
            epochs: 2,
            ..TrainSpec::with_seed(5)
        });
        let model = train_classifier(&config, &ideal_set()).unwrap();
        let bytes = encode_model(&model).unwrap();
        let back = decode_model(std::path::Path::new("mem"), &bytes).unwrap();
        let x = encode_input(&ideal(20, 1), 64).unwrap();
        assert_eq!(forward(&model, &x).unwrap().values(), forward(&back, &x).unwrap().values(), "{kind}");
        assert_eq!(Predictor::Learned(Box::new(back)).kind(), kind);
    }
}

#[test]
fn svm_regressor_output_is_rounded_and_bounded() {
    let config = PredictorConfig {
        pad_size: 64,
        ..PredictorConfig::new(PredictorKind::Svm)
    }
    .with_train(TrainSpec {
        epochs: 300,
        lr: 0.1,
        ..TrainSpec::with_seed(2)
    });
    let data: Vec<_> = [-20, -5, 0, 5, 20].iter().map(|&k| (ideal(40, k), k)).collect();
    let model = train_classifier(&config, &data).unwrap();
    for (m, k) in &data {
        let p = predict_learned(&model, m).unwrap();
        let raw = p.raw_value.unwrap();
        assert_eq!(p.offset, (raw.round() as i64).clamp(-30, 30));
        assert!((p.offset - k).abs() <= 2, "k={k} raw={raw}");
    }
}

#[test]
fn oversize_matrix_is_rejected() {
    let config = PredictorConfig {
        pad_size: 64,
        ..PredictorConfig::new(PredictorKind::Logreg)
    }
    .with_train(TrainSpec::with_seed(0));
    assert!(train_classifier(&config, &[(ideal(70, 0), 0)]).is_err());
    assert!(train_classifier(&config, &[(ideal(20, 31), 31)]).is_err());
}
