use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar for network arithmetic.
///
/// Layers, losses, and the optimizer are generic over this trait so the
/// same code path runs in `f32` (training and checkpoints) and in `f64`
/// (finite-difference gradient verification, where `f32` rounding would
/// swamp the tolerances).
pub trait Real:
    Float
    + FromPrimitive
    + NumAssign
    + LinalgScalar
    + ScalarOperand
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Lift an `f64` constant.
    #[inline]
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("constant out of range for scalar type")
    }

    /// Widen to `f64` (exact for both supported types).
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
