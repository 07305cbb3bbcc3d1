//! Shared oracles for the acceptance suite.
//!
//! These deliberately avoid the library's own numerical machinery: the
//! t-distribution CDF here comes from adaptive quadrature of the density
//! with a trigonometric substitution (no gamma function, normalization by
//! construction), and the t statistic re-evaluation uses the plain
//! sum-of-squares formulas on exact integer accumulations.

use pvsignal::cohort::{assign_events, build_cohort};
use pvsignal::detect::{detect_signals, DetectionConfig};
use pvsignal::featmat::{
    build_patient_matrix, build_vocabulary, group_patients, GroupedFeatureMatrix,
};
use pvsignal::readcode::CodeDictionary;
use pvsignal::synth::{generate, SynthSpec};
use pvsignal::SignalRow;
use std::sync::Arc;

/// Adaptive Simpson integration to absolute tolerance `tol`.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Student-t CDF by quadrature. Substituting x = sqrt(df) * tan(u) turns
/// the half-line integral of the density into
/// integral of cos^(df-1)(u) du over [0, atan(t/sqrt(df))], normalized by
/// the same integral over [0, pi/2]; the normalizing constant cancels, so
/// no gamma function is involved.
pub fn t_cdf_quadrature(t: f64, df: f64) -> f64 {
    assert!(df > 0.0 && t.is_finite());
    let density = move |u: f64| u.cos().powf(df - 1.0);
    let half = adaptive_simpson(&density, 0.0, std::f64::consts::FRAC_PI_2, 1e-15);
    let theta = (t.abs() / df.sqrt()).atan();
    let partial = adaptive_simpson(&density, 0.0, theta, 1e-15);
    if t >= 0.0 {
        0.5 + 0.5 * partial / half
    } else {
        0.5 - 0.5 * partial / half
    }
}

/// Plain-formula pooled two-sample t on integer group counts. Sums and
/// sums of squares are accumulated in u64 (exact for counts <= group
/// size), then combined with the textbook formulas in one shot.
pub fn naive_pooled_t(x: &[u32], y: &[u32]) -> (f64, f64) {
    let g = x.len() as f64;
    let sum = |v: &[u32]| v.iter().map(|&c| u64::from(c)).sum::<u64>() as f64;
    let sum_sq = |v: &[u32]| v.iter().map(|&c| u64::from(c) * u64::from(c)).sum::<u64>() as f64;
    let (sx, sy) = (sum(x), sum(y));
    let (sxx, syy) = (sum_sq(x), sum_sq(y));
    let ssd_x = sxx - sx * sx / g;
    let ssd_y = syy - sy * sy / g;
    let pooled_var = (ssd_x + ssd_y) / (2.0 * g - 2.0);
    let se = (pooled_var * 2.0 / g).sqrt();
    let t = (sx / g - sy / g) / se;
    (t, 2.0 * g - 2.0)
}

/// Run the full in-memory pipeline on a synthetic dataset: cohort, window
/// assignment, FULL-mode vocabulary, grouped matrices, detection.
pub fn run_pipeline(
    spec: &SynthSpec,
    cfg: &DetectionConfig,
) -> (Vec<SignalRow>, usize, GroupedFeatureMatrix) {
    let data = generate(spec).expect("valid spec");
    let cohort = build_cohort(&data.prescriptions, spec.window_days);
    let assignments = assign_events(&cohort, data.events);
    let vocab = Arc::new(build_vocabulary(
        &assignments.before,
        &assignments.after,
        cfg.level_mode,
    ));
    let before = build_patient_matrix(&assignments.before, &cohort, Arc::clone(&vocab)).unwrap();
    let after = build_patient_matrix(&assignments.after, &cohort, vocab).unwrap();
    let x = group_patients(&before, cfg.group_size, cfg.shuffle_seed).unwrap();
    let y = group_patients(&after, cfg.group_size, cfg.shuffle_seed).unwrap();
    let rows = detect_signals(&x, &y, &CodeDictionary::empty(), cfg).unwrap();
    let vocab_size = x.vocabulary().len();
    (rows, vocab_size, x)
}
