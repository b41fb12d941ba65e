pub mod component;
pub mod contamination;
pub mod family;
pub mod mixture;
pub mod template;

pub use component::{Component, Observations};
pub use contamination::{contaminate, ContaminationSpec, NoiseDist};
pub use family::{FamilyKind, ParametricFamily};
pub use mixture::{error_criteria_vs_mixture, MixtureSpec};
pub use template::{data_range, FamilyTemplate, ModelDensity, ModelSpec};
