//! Achievable secrecy rates and beamforming optimization for MIMO
//! visible-light-communication wiretap channels.
//!
//! The input to each LED is amplitude-limited (`|X_i| <= A`) and has a fixed
//! mean, parameterized by `alpha_i in (0, 1)`. A truncated-exponential input
//! meeting both constraints yields closed-form lower bounds on the secrecy
//! capacity ([`rates`]). Beamformers that maximize those bounds are found by
//! successive convex approximation ([`sca`]), where each step minimizes a
//! strongly convex surrogate ([`surrogates`]) over a polyhedral feasible set
//! with a small dense QP solver ([`qp`]).
//!
//! ```
//! use vlc_secrecy::{intensity::build_profile, presets, rates::secrecy_rate_case1};
//!
//! let channel = presets::group1();
//! let profile = build_profile(10.0, &[0.5; 4]).unwrap();
//! let rate = secrecy_rate_case1(&channel.hb, &channel.he, &profile).unwrap();
//! assert!(rate.clamped >= 0.0);
//! ```

pub mod error;
pub mod intensity;
pub mod matops;
pub mod oracle;
pub mod presets;
pub mod qp;
pub mod rates;
pub mod sca;
pub mod surrogates;

pub use error::{Error, Result};
