//! A small convolutional classifier trained from scratch.
//!
//! Inference and training run in `f32`. The layer kernels are generic over
//! [`Real`] so gradient checks can run the same code in `f64`.

mod eval;
mod io;
mod layers;
mod model;
pub mod reference;
mod spec;
mod train;

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};

pub use eval::{evaluate, ClassMetrics, EvalReport};
pub use io::{load_model, model_from_bytes, model_to_bytes, save_model, FORMAT_VERSION, MAGIC};
pub use layers::conv2d;
pub use model::{ClassScores, Grads, Model, Tensor};
pub use spec::{LayerSpec, ModelSpec, Shape};
pub use train::{train, train_with_progress, EpochStats, Labeled, Sgd, TrainConfig, TrainOutcome};

pub trait Real:
    Float
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Default
    + Debug
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}
