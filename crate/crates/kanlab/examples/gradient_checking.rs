//! Finite-difference validation of the analytic gradients. Every
//! architecture is instantiated at a tiny size and each parameter group
//! is perturbed centrally; the analytic gradient must match to 1e-5
//! relative error, with masks both fully off and fully on.
//!
//! Run with: cargo run --example gradient_checking

use kanlab::experiments::gradcheck;
use kanlab::model::{Arch, ModelSpec};

fn main() {
    for arch in [
        Arch::CnnMlp,
        Arch::CnnKan,
        Arch::CkanCnnMlp,
        Arch::EdgeKan,
        Arch::EdgeLinear,
        Arch::KaTheorem,
        Arch::RegKan,
    ] {
        let report = gradcheck(&ModelSpec::new(arch), 1e-5).expect("gradcheck runs");
        let worst = report
            .groups
            .iter()
            .map(|g| g.max_rel_err)
            .fold(0.0_f64, f64::max);
        println!(
            "{:12} {} parameter groups, worst relative error {:.2e} -> {}",
            report.arch,
            report.groups.len(),
            worst,
            if report.pass { "pass" } else { "FAIL" }
        );
    }
}
