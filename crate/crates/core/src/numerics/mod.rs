//! Seeded randomness, the standard normal CDF and logistic-regression fitting.

mod logit;
mod normal;
mod rng;

pub use logit::{
    fit_logit, fit_logit_with, logit_score, sigmoid, LogitFit, LogitModel, LogitOptions,
    LogitProblem, DEFAULT_L2_LAMBDA,
};
pub use normal::std_normal_cdf;
pub use rng::{bernoulli, categorical, SeededRng, StreamKey, PROB_SUM_TOL};

pub(crate) use normal::normal_cdf;
pub(crate) use rng::{categorical_unchecked, check_distribution, pick_index};
