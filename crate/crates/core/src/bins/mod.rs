//! Online bin packing: slot splitting for boxes, first fit for vectors.

pub mod slots;
pub mod vector;

use crate::online::FlexibleAlgorithm;
use crate::rational::Rational;

pub use slots::{bp2_classify, slot_classify, Orientation, SlotClass, SlotPacker};
pub use vector::VectorFirstFit;

/// Bins used by a run, optionally including the bins of the solution it
/// was started on.
pub fn bin_cost(alg: &dyn FlexibleAlgorithm, include_prev: bool) -> Rational {
    if include_prev {
        alg.cost()
    } else {
        alg.cost() - alg.base_cost()
    }
}
