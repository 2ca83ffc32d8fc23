//! Fourth-order reference integrator for the circle flows.
//!
//! This is the slow, independent oracle: it integrates the defining vector
//! field (and its variational equation) step by step, with no knowledge of
//! the time-reparametrization tables in `profile`. The production flow maps
//! are validated against it on moderate time spans in the test suites.

use super::{FlowSystem, CirclePoint};

/// Integrate ds/dt = X_i(s) with classical Runge-Kutta. `steps_per_unit`
/// controls resolution; local error is O(h^5) on this smooth field.
pub fn flow_rk4(system: &FlowSystem, flow: usize, t: f64, s: CirclePoint, steps_per_unit: f64) -> CirclePoint {
    let (s_out, _) = flow_variational_rk4(system, flow, t, s, steps_per_unit);
    s_out
}

/// Jointly integrate the flow and its variational equation
/// d(ln J)/dt = X_i'(s(t)); returns (endpoint, ln of the spatial derivative).
pub fn flow_variational_rk4(
    system: &FlowSystem,
    flow: usize,
    t: f64,
    s: CirclePoint,
    steps_per_unit: f64,
) -> (CirclePoint, f64) {
    let steps = ((t.abs() * steps_per_unit).ceil() as usize).max(1);
    let h = t / steps as f64;
    // The orbit never leaves its support arc, so plain (unwrapped) coordinates
    // are safe throughout.
    let mut x = s.value();
    let mut ln_j = 0.0f64;
    for _ in 0..steps {
        let (k1, l1) = (system.field(flow, x), system.field_slope(flow, x));
        let x2 = x + 0.5 * h * k1;
        let (k2, l2) = (system.field(flow, x2), system.field_slope(flow, x2));
        let x3 = x + 0.5 * h * k2;
        let (k3, l3) = (system.field(flow, x3), system.field_slope(flow, x3));
        let x4 = x + h * k3;
        let (k4, l4) = (system.field(flow, x4), system.field_slope(flow, x4));
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        ln_j += h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
    }
    (CirclePoint::new(x), ln_j)
}
