//! Benchmark model families and a hook for user-supplied chains.

mod gm1;
mod toggle;
mod user;

pub use gm1::{gm1_beta, Gm1, Gm1Constants};
pub use toggle::{Toggle, ToggleConstants};
pub use user::UserModel;
