mod common;

use common::grad::{check_model, irrcnn_probe_config, nabla3_probe_config, op_suite};
use common::FD_TOLERANCE;

#[test]
fn every_op_matches_central_differences() {
    for (name, check) in op_suite() {
        assert!(check.probes >= 20, "{name}: only {} probes", check.probes);
        assert!(check.worst < FD_TOLERANCE, "{name}: relative error {:.3e}", check.worst);
    }
}

#[test]
fn two_unit_irrcnn_cross_entropy() {
    let check = check_model(&irrcnn_probe_config(), 5, 8);
    assert!(check.probes >= 20);
    assert!(check.worst < FD_TOLERANCE, "relative error {:.3e}", check.worst);
}

#[test]
fn eighth_width_nabla3_dice() {
    let check = check_model(&nabla3_probe_config(), 6, 4);
    assert!(check.probes >= 20);
    assert!(check.worst < FD_TOLERANCE, "relative error {:.3e}", check.worst);
}
