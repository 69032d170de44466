mod common;

#[test]
fn analytic_gradients_match_central_differences() {
    common::gradient_suite(50).assert();
}
