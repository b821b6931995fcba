mod common;

use common::checks;

#[test]
fn gradients_match_finite_differences() {
    checks::gradients(&[1, 2, 3, 4, 5]).unwrap();
}

#[test]
fn full_graph_forward_matches_reference() {
    checks::algorithm_fidelity().unwrap();
}

#[test]
fn sampled_frequencies_match_exact_law() {
    checks::sampler_oracle().unwrap();
}

#[test]
fn zero_flip_neighborhoods_are_label_pure() {
    checks::homophily().unwrap();
}

#[test]
fn metrics_match_enumeration() {
    checks::metrics().unwrap();
}

#[test]
fn labeling_matches_rule_application() {
    checks::pipeline().unwrap();
}

#[test]
fn cli_outputs_are_reproducible() {
    checks::determinism().unwrap();
}
