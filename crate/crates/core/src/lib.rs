//! Decide whether a system of second-order analytic ODEs
//! `d²yᴵ/dx² = fᴵ(x, y, ẏ)` is straight, meaning its integral curves are
//! rational curves, by building its torsion symbolically and testing the
//! result for identical vanishing.
//!
//! ```
//! use straightness::{parser::parse_expr, parser::OdeSystem, oracle::OracleConfig, torsion};
//!
//! let sys = OdeSystem::new("painleve-1", vec![parse_expr("6*y^2 + x").unwrap()], vec![]).unwrap();
//! let report = torsion::is_straight(&sys, &OracleConfig::default()).unwrap();
//! assert!(!report.is_straight());
//! ```

pub mod analysis;
pub mod calculus;
pub mod expr;
pub mod oracle;
pub mod parser;
pub mod torsion;
