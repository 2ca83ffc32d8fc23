//! Numerical laboratory for a finitely generated group of skew-product
//! diffeomorphisms of S^3 x S^1 whose elements all have bounded derivative
//! growth while the group as a whole exhibits exponential growth of
//! derivatives, together with a weighted-norm cocycle over the first
//! Grigorchuk group that realizes the same dichotomy in a Banach setting.
//!
//! The base factor is S^3 acted on by unit quaternions through left
//! multiplication; the fiber is a circle carrying four commuting compactly
//! supported flows. A skew product pairs a quaternion rotation of the base
//! with the flow-time map whose times are the coordinates of the base point.
//! The crate builds the generator system, certifies per-element boundedness
//! of fiber derivatives, constructs a recurrent word schedule whose
//! derivative grows like 2^(n/2), and reports both halves of the dichotomy.

pub mod artifacts;
pub mod burnside;
pub mod circle_flows;
pub mod exponents;
pub mod recurrence;
pub mod rotor;
pub mod sampling;
pub mod skew;
