//! Coalgebraic automata kit.
//!
//! Finite-carrier semantics for the coalgebraic mu-calculus and coalgebraic
//! monadic second-order logic over a family of set functors (powerset, bag,
//! monotone neighborhood and its supported variant, exponential polynomial
//! functors), compilation of formulas into parity automata over one-step
//! languages, acceptance via parity games, and the uniform-construction
//! machinery that translates second-order automata into modal ones.

pub mod accgame;
pub mod automaton;
pub mod carrier;
pub mod construct;
pub mod corpus;
pub mod error;
pub mod functor;
pub mod game;
pub mod lifting;
pub mod logic;
pub mod model;
pub mod monotone;
pub mod onestep;
pub mod selftest;
pub mod uniform;

pub use carrier::{Bits, Carrier, CarrierMap};
pub use error::{Caps, Error, Result};
pub use functor::{FunctorSpec, TObject, Value};
pub use model::{OneStepModel, TModel, TreeModel};
