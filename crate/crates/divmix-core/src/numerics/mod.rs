pub mod linalg;
pub mod optim;
pub mod quad;
pub mod rng;

pub use linalg::{condition_number, is_spd, lu_solve, solve_spd};
pub use optim::{brent, brent_root, minimize, multistart, nelder_mead, newton_polish, OptMethod, OptResult, OptimizerSpec};
pub use quad::{
    integrate, integrate_breaks, integrate_quantile, integrate_scaled, GaussLegendre, QuadMethod, QuadTransform,
    QuadratureSpec,
};
pub use rng::{rng, split, DivRng, RNG_NAME};
