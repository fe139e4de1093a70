//! Economic resilience index over annual country series split at shock
//! years, and the panel analytics built on it.

pub mod config;
pub mod geo;
pub mod index;
pub mod ingest;
pub mod panel;
pub mod pipeline;
pub mod render;
pub mod series;
pub mod stats;
pub mod testkit;
pub mod validate;

pub use index::{
    classify, compute_record, ecological_component, engineering_component, evolutionary_component, scalar_index,
    ResilienceClass, ResilienceRecord, ResilienceVector, SignConvention,
};
pub use panel::{attach_covariates, build_panel, Panel, PanelRow, PanelSettings};
pub use series::{split_at_shock, window_levels, AnnualSeries, ShockEvent, ShockWindow, SplitPolicy};
