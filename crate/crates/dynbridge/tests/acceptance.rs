//! End-to-end acceptance gate. Each test covers one advertised guarantee of
//! the library, prints one summary line per report, and fails if any pinned
//! threshold is exceeded. Seeds are fixed so every statistic is reproducible
//! bit-for-bit.

use std::path::Path;

use dynbridge::config::RunConfig;
use dynbridge::experiments;
use dynbridge::paths::StepController;
use dynbridge::timechange::TimeChangeSpec;
use dynbridge::verify::{
    check_brownian, check_comparisons, check_filtering, check_hitting_law, check_kernels,
    check_r_law, check_zero_identity, TestReport,
};

fn canonical() -> TimeChangeSpec {
    TimeChangeSpec::canonical(4.0)
}

/// Print one line per report and panic if any failed.
fn gate(label: &str, reports: &[TestReport]) {
    for r in reports {
        println!("[{label}] {}", r.summary_line());
    }
    let failed: Vec<&TestReport> = reports.iter().filter(|r| !r.passed).collect();
    assert!(
        failed.is_empty(),
        "{label}: {} of {} checks failed:\n{}",
        failed.len(),
        reports.len(),
        failed
            .iter()
            .map(|r| r.summary_line())
            .collect::<Vec<_>>()
            .join("\n")
    );
}

/// Closed-form kernel identities: three-way agreement for the survival
/// function H, Chapman-Kolmogorov for the killed density q, posterior
/// normalizations, the H_x/H drift against a finite difference of log H,
/// and the finite-difference residual of the conditional-density PDE.
#[test]
fn acceptance_1_kernel_identities() {
    let reports = check_kernels(&canonical(), 1).unwrap();
    gate("1 kernels", &reports);
}

/// Hitting-time law: V(tau) must follow the level-1 first-passage law of
/// standard Brownian motion (CDF 1 - H(., 1)), with the survival probability
/// at t = 1 matching H(1,1) = erf(1/sqrt(2)) ~ 0.6827.
#[test]
fn acceptance_2_hitting_time_law() {
    let reports = check_hitting_law(&canonical(), 2.0, 1e-3, 10_000, 2).unwrap();
    gate("2 hitting", &reports);
}

/// Brownianity of X: Gaussian marginals at t = 0.5 and 1, uncorrelated
/// increments, and unit quadratic variation over [0, 1] at N = 10^4 paths.
#[test]
fn acceptance_3_brownian_marginals() {
    let ctrl = StepController::default();
    let reports = check_brownian(&canonical(), 10_000, 3, &ctrl).unwrap();
    gate("3 brownian", &reports);
}

/// Zero identity: on at least 99% of bridged paths the first zero of X lands
/// within two base grid steps of V(tau). Disabling the post-tau bridge drift
/// must break the identity, proving the check is not vacuous.
#[test]
fn acceptance_4_zero_identity_with_ablation() {
    let ctrl = StepController::default();
    let main = check_zero_identity(&canonical(), 4000, 4, &ctrl, false).unwrap();
    let ablated = check_zero_identity(&canonical(), 1000, 4, &ctrl, true).unwrap();
    println!("[4 zero] {}", main.summary_line());
    println!("[4 zero] {} (must FAIL)", ablated.summary_line());
    assert!(main.passed, "{}", main.summary_line());
    assert!(
        !ablated.passed,
        "ablation unexpectedly passed: {}",
        ablated.summary_line()
    );
}

/// Law of R: the SDE solution and the exact construction
/// lambda(t) * ||W3(Lambda(t))|| agree in law at t = 1, and the exact sampler
/// hits the second-moment identity lambda^2 (y^2 + 3 Lambda) within 3 SE.
#[test]
fn acceptance_5_r_exact_vs_sde() {
    let reports = check_r_law(&canonical(), 10_000, 5, 1e-3).unwrap();
    gate("5 r_law", &reports);
}

/// Comparison sandwiches under shared noise: R <= Y before tau (violation
/// <= 0.02, shrinking under dt halving), U <= Y^3 with U >= -1e-3, and the
/// identical-drift degenerate sandwich with exactly zero gap.
#[test]
fn acceptance_6_comparison_sandwiches() {
    let reports = check_comparisons(&canonical(), 1000, 6).unwrap();
    gate("6 compare", &reports);
}

/// Filtering: weighted-particle posterior vs the closed form (mean KS <= 0.05
/// at 4000 particles over 20 observation paths), KS error roughly halving per
/// particle quadrupling, and innovation quadratic variation within 5%.
#[test]
fn acceptance_7_filtering_closed_form() {
    let ctrl = StepController::default();
    let reports = check_filtering(&canonical(), 1.0, 1e-3, 4000, 20, 7, &ctrl).unwrap();
    gate("7 filter", &reports);
}

/// Reproducibility: a check re-run with its pinned seed reproduces every
/// statistic bit-for-bit, and the full golden-config suite runs to a passing
/// manifest within the 15-minute budget.
#[test]
fn acceptance_8_reproducibility_and_budget() {
    let spec = canonical();
    let a = check_hitting_law(&spec, 2.0, 1e-3, 2000, 8).unwrap();
    let b = check_hitting_law(&spec, 2.0, 1e-3, 2000, 8).unwrap();
    assert_eq!(a.len(), b.len());
    for (ra, rb) in a.iter().zip(&b) {
        assert_eq!(
            ra.statistic.to_bits(),
            rb.statistic.to_bits(),
            "statistic of {} not bit-identical across reruns",
            ra.name
        );
    }
    println!("[8 repro] PASS reproducibility: {} statistics bit-identical", a.len());

    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/golden.toml");
    let mut config = RunConfig::from_file(&golden).unwrap();
    let out = std::env::temp_dir().join(format!("dynbridge-acceptance-{}", std::process::id()));
    config.run.out_dir = out.to_string_lossy().into_owned();
    let outcome = experiments::run(&config).unwrap();
    for r in &outcome.reports {
        println!("[8 golden] {}", r.summary_line());
    }
    assert!(
        outcome.all_passed,
        "golden suite had failing reports (see summary lines above)"
    );
    println!(
        "[8 golden] PASS full suite in {:.1}s (budget 900s)",
        outcome.wall_seconds
    );
    assert!(
        outcome.wall_seconds < 900.0,
        "full suite took {:.1}s, budget is 900s",
        outcome.wall_seconds
    );
    let _ = std::fs::remove_dir_all(&out);
}
