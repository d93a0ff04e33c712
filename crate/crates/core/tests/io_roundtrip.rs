use proptest::prelude::*;
use spnorm::io::{self, LoadOptions};
use spnorm::mixture::{self, EmConfig, MixtureModel};
use spnorm::simulate;

#[test]
fn fitted_model_and_report_survive_disk() {
    let dir = tempfile::tempdir().unwrap();
    let s = simulate::small_mix(3).unwrap();
    let data_path = dir.path().join("points.csv");
    io::save_dataset(&data_path, &s.points).unwrap();
    let data = io::load_csv(&data_path, LoadOptions::default()).unwrap();
    assert_eq!(data.points, s.points);

    let r = mixture::fit_em(&data.points, &EmConfig::new(2)).unwrap();
    let model_path = io::output_path(&dir.path().join("out"), "model.json").unwrap();
    io::save_model(&model_path, &r.model).unwrap();
    let back = io::load_model(&model_path).unwrap();
    assert_eq!(back, r.model);
    assert_eq!(
        mixture::log_likelihood(&data.points, &back).unwrap(),
        mixture::log_likelihood(&data.points, &r.model).unwrap()
    );

    let report_path = dir.path().join("report.json");
    io::save_report(&report_path, &r).unwrap();
    let v: serde_json::Value = io::load_json(&report_path).unwrap();
    let trace: Vec<f64> = v["loglik_trace"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert_eq!(trace, r.loglik_trace);
    assert!(trace.windows(2).all(|w| w[1] - w[0] >= -1e-8));
    assert_eq!(v["gamma"].as_array().unwrap().len(), data.len());
}

#[test]
fn model_json_layout() {
    let s = simulate::small_mix(1).unwrap();
    let text = io::to_json_string(&s.model).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["p"], 1);
    assert_eq!(v["K"], 2);
    assert_eq!(v["mode"], "heterogeneous");
    assert_eq!(v["components"].as_array().unwrap().len(), 2);
    let bad = text.replace("\"K\": 2", "\"K\": 3");
    assert!(serde_json::from_str::<MixtureModel>(&bad).is_err());
}

#[test]
fn non_finite_values_become_null() {
    let text = io::to_json_string(&vec![1.0, f64::NAN, f64::INFINITY]).unwrap();
    let v: Vec<Option<f64>> = serde_json::from_str(&text).unwrap();
    assert_eq!(v, [Some(1.0), None, None]);
}

#[test]
fn missing_file_is_an_io_error() {
    let err = io::load_csv(
        std::path::Path::new("/nonexistent/x.csv"),
        LoadOptions::default(),
    )
    .unwrap_err();
    assert!(err.to_string().contains("/nonexistent/x.csv"));
}

proptest! {
    #[test]
    fn reals_round_trip_exactly(v in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 0..50)) {
        let text = io::to_json_string(&v).unwrap();
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, v);
    }
}
