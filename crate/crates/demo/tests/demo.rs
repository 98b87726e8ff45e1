use latentid_demo::{orientation_field, ridge_image, sigmoid_curve, synthetic_match};

#[test]
fn field_of_straight_ridges() {
    assert_eq!(ridge_image(64, 0.0, 9.0, 0.0).len(), 64 * 64);
    let v: serde_json::Value = serde_json::from_str(&orientation_field(128, 45.0, 9.0, 0.0, 16)).unwrap();
    let theta = v["theta"].as_array().unwrap();
    let mask = v["mask"].as_array().unwrap();
    assert_eq!(theta.len(), 64);
    let inner = 3 * 8 + 3;
    assert!(mask[inner].as_bool().unwrap());
    assert!((theta[inner].as_f64().unwrap().to_degrees() - 45.0).abs() < 3.0);
}

#[test]
fn sigmoid_samples() {
    let c = sigmoid_curve(15.0, -0.2, 40.0, 45.0, 46);
    assert_eq!(c.len(), 46);
    assert_eq!(c[15], 0.5);
    assert_eq!(c[41], 0.0);
}

#[test]
fn match_view() {
    let v: serde_json::Value = serde_json::from_str(&synthetic_match(4, 40, 30.0, 10.0, -5.0, 0.3, 2.0, 0.1)).unwrap();
    assert!(v.get("error").is_none(), "{v}");
    let pairs = v["pairs"].as_array().unwrap();
    let correct = pairs.iter().filter(|p| p[2].as_bool().unwrap()).count();
    assert!(correct * 10 >= pairs.len() * 9);
    assert!(v["s_mt"].as_f64().unwrap() > v["impostor_s_mt"].as_f64().unwrap());
}
