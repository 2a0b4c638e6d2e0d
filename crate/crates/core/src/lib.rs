//! Langevin sampling of `pi(theta) ∝ exp(-f(theta) - g(B theta))` for smooth
//! convex `f` and a weighted L1 penalty `g`, with the proximity operator of the
//! potential approximated by K iterations of the primal-dual fixed-point (PDFP)
//! method.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`.
//!
//! ```
//! use pdfp_langevin::{make_toy_1d, run_chain, ChainRng, ChainState, RunConfig, SamplerConfig, ToyKind, MalaPdfp};
//!
//! let toy = make_toy_1d::<f64>(ToyKind::LassoPosterior).unwrap();
//! let cfg = SamplerConfig::new(0.1).with_k(1);
//! let mut kernel = MalaPdfp::new(&toy.target, &cfg).unwrap();
//! let mut state = ChainState::new(pdfp_langevin::RealField::scalar(0.0), ChainRng::new(1, 0));
//! let out = run_chain(&mut state, &mut kernel, &RunConfig::new(1000, 100, 1)).unwrap();
//! assert_eq!(out.n_retained, 900);
//! ```

// `!(x > 0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod field;
pub mod operator;
pub mod pdfp;
pub mod prox;
pub mod rng;
pub mod samplers;
pub mod scalar;
pub mod smooth;
pub mod target;
pub mod theory;

pub use error::{Error, Result};
pub use field::Field;
pub use operator::{LinearMap, MapKind};
pub use pdfp::{CompositeProblem, KStepSolver, PdfpParams, PdfpState, Stopping};
pub use prox::{MoreauConfig, ProxMode, SeparablePenalty};
pub use rng::{ChainRng, NoiseSource, ScriptedNoise};
pub use samplers::{
    run_chain, AnyKernel, ChainOutput, ChainState, Kernel, Mala, MalaPdfp, P0Init, ProxMala, ProxUla,
    RunConfig, SamplerConfig, SamplerKind, StepOutcome, Ula, UlaPdfp,
};
pub use scalar::Real;
pub use smooth::{LeastSquares, Smooth, ZeroSmooth};
pub use target::{
    make_deblur_model, make_illposed_dense, make_toy, make_toy_1d, CompositeTarget, DeblurModel, Noise,
    ToyKind, ToyTarget,
};
pub use theory::TheoryInputs;

pub type RealField = Field<f64>;
pub type RealMap = LinearMap<f64>;
pub type Target = CompositeTarget<f64>;
pub type Problem = CompositeProblem<f64>;
pub type Params = PdfpParams<f64>;
pub type State = PdfpState<f64>;
pub type Chain = ChainState<f64>;
pub type Config = SamplerConfig<f64>;
pub type Penalty = SeparablePenalty<f64>;
