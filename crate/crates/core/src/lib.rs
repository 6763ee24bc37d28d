//! Numerical engine for the second moment of quadratic twists of the
//! discriminant modular form: exact coefficient tables, smoothing kernels,
//! quadratic Gauss sums, twisted central L-values, Euler-product constants,
//! character-sum scans and moment sweeps.

pub mod arith;
pub mod charsum;
pub mod error;
pub mod gauss;
pub mod kernels;
pub mod lfun;
pub mod mds;
pub mod modform;
pub mod moments;
pub mod special;
pub mod sum;
pub mod verify;

pub use arith::{
    enumerate_fundamental_discriminants, enumerate_twist_moduli, factorize, kronecker,
    DiscriminantKind, Factorization, FundamentalDiscriminant, Sieve,
};
pub use error::{Error, Result};
pub use modform::{sym2_coefficients, EigenformCoefficients, Ladder, Sym2Coefficients};
pub use charsum::{Flavor, PoissonVariant};
pub use gauss::{gauss_closed, GaussSumExact};
pub use kernels::{default_test_function, PartitionG, TestFunctionF, WeightJ, WindowV};
pub use lfun::{constant_cf, EulerConstants, TwistEngine, TwistLValue};
pub use mds::ZPoint;
pub use moments::{CalNPolicy, MomentReport, OutputFormat, RunConfig};
