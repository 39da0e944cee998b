//! Differentially private top-`k` selection.
//!
//! The Lipschitz mechanism adds independent noise to scaled scores and
//! reports the largest noisy values. The canonical Lipschitz mechanism
//! instead selects a whole `k`-subset in one shot, grouping the `C(d, k)`
//! candidates into `1 + k (d - k)` utility classes of equal loss so that a
//! draw costs `O(dk)`, or `O(d)` when `gamma = 1`.
//!
//! ```
//! use dptopk::{canonical_select, seeded, NoiseKind, ScoreVector};
//!
//! let scores = ScoreVector::new(vec![40.0, 12.0, 35.0, 3.0, 20.0]).unwrap();
//! let sel = canonical_select(&scores, 2, 1.0, 0.5, NoiseKind::Gumbel, &mut seeded(7)).unwrap();
//! assert_eq!(sel.subset.len(), 2);
//! ```

pub mod analysis;
pub mod canonical;
pub mod combin;
pub mod error;
pub mod harness;
pub mod mechanisms;
pub mod noise;
pub mod rng;
pub mod score;

pub use analysis::{
    brute_force_distribution, canonical_loss_oracle, classify_subset, dp_audit_exact, joint_loss,
    leap_expectations, mc_estimate, predicate_probability, utility_bound, BoundInputs, BoundKind, BoundMode,
    McEstimate, Predicate, PredicateKind,
};
pub use canonical::{
    canonical_select, class_loss, exact_class_distribution, log_class_size, log_class_size_sum, sample_class,
    sample_member, ClassDistribution, Selection, UtilityClass,
};
pub use error::{Error, Result};
pub use harness::{bench, gen_zipf, load_scores, run_sweep, ExperimentSpec, InputFormat, Mechanism, SweepRow};
pub use mechanisms::{effective_sensitivity, lipschitz_select, oneshot, peel, permute_and_flip_ref, MechanismParams};
pub use noise::{group_max_noise, inv_cdf, top_order_noise, verify_lipschitz, LogUniform, NoiseKind};
pub use rng::{derive_rng, seeded, StreamRng};
pub use score::ScoreVector;
