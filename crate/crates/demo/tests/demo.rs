use rnnquant_demo::{gradient_decay_value, gru_step_value, synthetic_backtest_value, ScalarGru};

#[test]
fn gru_step_matches_hand_case() {
    let g = ScalarGru {
        reset: [0.0, 1.0, 0.0],
        update: [0.0, 1.0, 0.0],
        candidate: [1.0, 1.0, 0.0],
    };
    let v = gru_step_value(0.5, 1.0, g).unwrap();
    assert!((v["h"].as_f64().unwrap() - 0.7762).abs() < 1e-3);
    assert!((v["reset"].as_f64().unwrap() - 0.73106).abs() < 1e-5);
}

#[test]
fn gradient_decay_has_one_norm_per_step() {
    let v = gradient_decay_value(30, 6, 4.0, -4.0, 2).unwrap();
    for cell in ["rnn", "lstm", "gru"] {
        assert_eq!(v[cell].as_array().unwrap().len(), 30);
    }
    let first = |c: &str| v[c][0].as_f64().unwrap();
    assert!(first("rnn") < first("gru"));
    assert!(gradient_decay_value(0, 6, 0.0, 0.0, 1).is_err());
}

#[test]
fn synthetic_backtest_produces_curves() {
    let v = synthetic_backtest_value(3, 20, 160, 0.8, 5, false).unwrap();
    let s = v["strategy"].as_array().unwrap();
    assert_eq!(s.len(), v["benchmark"].as_array().unwrap().len());
    assert_eq!(s.len(), v["dates"].as_array().unwrap().len());
    assert_eq!(s[0].as_f64(), Some(1.0));
    assert!(v["report"]["max_drawdown"].is_number());
    assert!(synthetic_backtest_value(3, 1, 160, 0.8, 5, false).is_err());
}
