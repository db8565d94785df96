//! Berry curvature, second Chern numbers and winding numbers.

pub mod chern;
pub mod frame;
pub mod hopf;
pub mod lattice;
pub mod winding;

pub use chern::{
    chern_form_closed, chern_form_field, extrapolate_cutoff, second_chern_closed, second_chern_full4d,
    second_chern_full4d_extrapolated, second_chern_reduced, second_chern_reduced_extrapolated, valley_chern,
    CutoffExtrapolation, ChernEstimate, CurvatureCell, CurvatureComponent, CurvatureField,
    HopfAxis, HopfFrames, HopfGrid, ValleyChern,
};
pub use frame::{occupied_frame, BandSubspace, Filling, DEFAULT_GAP_TOL};
pub use hopf::{hopf_embed, hopf_jacobian, HopfPoint, RadialMap};
pub use lattice::{clover, curvature_at, link, loop_flux, plaquette_curvature, wilson_loop, Plaquette};
pub use winding::{chiral_block, winding3_sphere, WindingGrid, WindingResult};
