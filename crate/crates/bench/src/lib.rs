//! Shared fixtures for the criterion benches.

use roughlab_core::{make_builtin, SMetricSpace, SequenceSpec};

pub fn paper_instance() -> (SMetricSpace, SequenceSpec) {
    (
        make_builtin("paper_line").expect("builtin"),
        SequenceSpec::closed_form(&["pow(-1,n)/pow(2,n)"]).expect("valid expression"),
    )
}

pub fn euclidean_instance() -> (SMetricSpace, SequenceSpec) {
    (
        make_builtin("metric_induced_euclidean(2)").expect("builtin"),
        SequenceSpec::closed_form(&["1/n", "0"]).expect("valid expression"),
    )
}
