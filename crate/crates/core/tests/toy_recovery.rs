mod common;

#[test]
fn toy_model_is_recovered() {
    common::check_toy_recovery().unwrap();
}
