pub mod bezout;
pub mod mixed;
pub mod pontryagin;

pub use bezout::{build_bezout_tree, verify_bezout, BezoutError, BezoutTree};
pub use mixed::{MixedBounds, MixedElement, MixedError, MixedSystem};
pub use pontryagin::{PontryaginError, PontryaginGroup};
