//! Numerical verification of the information-theoretic claims the
//! unlearning objective rests on: KL divergences in three realizations
//! (discrete, Gaussian closed form, quadrature), constructions of
//! distributions at infinite KL, Gaussian maximality within a
//! matched-moment family, the InfoNCE estimator, and the embedding-space
//! mutual-information bound with its per-sample components.

mod infonce;
mod kl;

pub use infonce::{
    bound_components, infonce_estimate, verify_theorem1, BoundComponents, Theorem1Report,
    TheoremSide,
};
pub use kl::{
    construct_infinite_kl, kl_discrete, kl_gaussian, kl_quadrature, lemma1_family_check,
    CandidateResult, Density1D, DiscreteDist, ExtendedReal, Lemma1Report, QuadGrid,
};
