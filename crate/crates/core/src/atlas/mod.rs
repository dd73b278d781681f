//! Case labels, topological signatures, parameter sweeps, cross-checks and
//! SVG output for the fold–saddle family.

mod case;
mod render;
mod signature;
mod sweep;
mod verify;

use serde::{Deserialize, Serialize};

use crate::integrator::IntegratorConfig;

pub use case::{
    classify_case, event_thresholds, mu_sign, slice_tag, CaseId, MuSign, ParseCaseIdError,
};
pub use render::{render_diagram, render_portrait, DiagramOptions, PortraitOptions};
pub use signature::{
    return_bracket, topo_signature, CycleMark, LocalBehavior, PseudoEqMark, Region, SaddlePosition,
    SeparatrixMark, TangencyMark, TopoSignature,
};
pub use sweep::{
    representatives, sweep, write_grid_csv, CaseGrid, GridSample, Representative, SweepError,
    LAMBDA_BETA_RANGE,
};
pub use verify::{battery, verify_all, verify_params, Report, ReportItem, Status};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtlasConfig {
    pub flow: IntegratorConfig,
    /// Equality tolerance for case boundaries.
    pub tol_eq: f64,
    /// `|eta(x) - x|` at or below this counts as a closed orbit when judging
    /// the local behavior of a double fold or a separatrix loop.
    pub center_tol: f64,
    /// Offset of the probe orbit from a double fold or from `h`, as a
    /// fraction of `|beta|`.
    pub probe_offset: f64,
}

impl Default for AtlasConfig {
    fn default() -> Self {
        Self {
            flow: IntegratorConfig::default(),
            tol_eq: 1e-9,
            center_tol: 1e-6,
            probe_offset: 0.05,
        }
    }
}
