//! Infinite-grid finite-element stencils classified by dof type.

pub mod biot;
pub mod lattice;
pub mod poisson;

pub use biot::{
    assemble_biot_stencils, biot_class_set, biot_element_matrices, biot_local_maps, BiotParams,
    FIELD_P, FIELD_UX, FIELD_UY,
};
pub use lattice::{
    equilibration_scales, ivec_add, ivec_neg, ivec_sub, ClassSet, DofClass, FieldInfo, GridSpec,
    IVec, StencilSet,
};
pub use poisson::{
    assemble_poisson_stencils, poisson_class_set, poisson_local_map, qp_element_matrix,
    qp_element_matrix_with_quadrature,
};
