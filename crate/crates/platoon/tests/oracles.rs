mod common;

#[test]
fn segment_distance_against_sampling() {
    common::segment_distance_suite(10_000, 11).unwrap();
}

#[test]
fn prism_bounds_against_reachability() {
    common::prism_suite(20, 12).unwrap();
}

#[test]
fn kwt_closed_form_against_recursion() {
    common::kwt_suite(20).unwrap();
}
