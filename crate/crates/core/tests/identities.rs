mod common;

use aifn_core::model::Variant;
use common::checks::{dead_parameters, equation_identities, no_sfsn_equivalence};

#[test]
fn degenerate_equations_are_exact() {
    for o in equation_identities() {
        assert!(o.passed, "{}: {}", o.name, o.detail);
    }
}

#[test]
fn unused_parameters_never_reach_the_output() {
    for v in Variant::ALL {
        let o = dead_parameters(v);
        assert!(o.passed, "{}: {}", o.name, o.detail);
    }
}

#[test]
fn saturated_interaction_equals_no_sfsn() {
    let o = no_sfsn_equivalence();
    assert!(o.passed, "{}", o.detail);
}
