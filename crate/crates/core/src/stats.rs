//! Statistical verification engine: empirical characteristic functions,
//! stable-convergence factorization tests, two-sample Kolmogorov-Smirnov,
//! raw-moment comparisons, and log-log power-law rate fits.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_stream_class, StreamClass};

/// Provenance of a Monte Carlo batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchLineage {
    pub master_seed: u64,
    pub class: StreamClass,
    pub first_replicate: u64,
    pub count: u64,
}

/// A batch of i.i.d. scalar samples with summary statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McBatch {
    pub label: String,
    pub values: Vec<f64>,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// sqrt(variance / n).
    pub stderr: f64,
    pub lineage: Option<BatchLineage>,
}

impl McBatch {
    pub fn new(label: impl Into<String>, values: Vec<f64>, lineage: Option<BatchLineage>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Precondition(format!(
                "batch needs at least 2 samples, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("batch contains non-finite values".into()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let stderr = (variance / n).sqrt();
        Ok(Self { label: label.into(), values, mean, variance, stderr, lineage })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    /// Raw moment E[X^k].
    pub fn raw_moment(&self, order: u32) -> f64 {
        let n = self.values.len() as f64;
        self.values.iter().map(|v| v.powi(order as i32)).sum::<f64>() / n
    }

    /// Standard error of the raw moment estimate.
    pub fn raw_moment_se(&self, order: u32) -> f64 {
        let n = self.values.len() as f64;
        let m = self.raw_moment(order);
        let m2 = self.values.iter().map(|v| v.powi(2 * order as i32)).sum::<f64>() / n;
        ((m2 - m * m).max(0.0) / n).sqrt()
    }

    /// Standard error of the sample variance (via the fourth central moment).
    pub fn variance_se(&self) -> f64 {
        let n = self.values.len() as f64;
        let m4 =
            self.values.iter().map(|v| (v - self.mean).powi(4)).sum::<f64>() / n;
        ((m4 - self.variance * self.variance).max(0.0) / n).sqrt()
    }

    /// Standard error of the sample standard deviation (delta method).
    pub fn sd_se(&self) -> f64 {
        self.variance_se() / (2.0 * self.sd())
    }

    /// Summary without the raw values (for persisted records).
    pub fn summary(&self) -> BatchSummary {
        BatchSummary {
            label: self.label.clone(),
            n: self.n(),
            mean: self.mean,
            variance: self.variance,
            stderr: self.stderr,
            sd: self.sd(),
            variance_se: self.variance_se(),
            lineage: self.lineage,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchSummary {
    pub label: String,
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub stderr: f64,
    pub sd: f64,
    pub variance_se: f64,
    pub lineage: Option<BatchLineage>,
}

/// Empirical characteristic function (1/n) sum exp(i lambda v_k) per lambda.
pub fn ecf(batch: &McBatch, lambdas: &[f64]) -> Vec<Complex64> {
    lambdas
        .iter()
        .map(|&l| {
            let mut acc = Complex64::new(0.0, 0.0);
            for &v in &batch.values {
                let (s, c) = (l * v).sin_cos();
                acc += Complex64::new(c, s);
            }
            acc / batch.values.len() as f64
        })
        .collect()
}

/// Default lambda grid: 21 points uniform on [-5, 5].
pub fn default_lambda_grid() -> Vec<f64> {
    (0..21).map(|i| -5.0 + 0.5 * i as f64).collect()
}

/// Stable-convergence factorization report: per lambda, the joint side
/// E[G exp(i lambda F)] against E[G] * E[exp(i lambda X)].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StableTestReport {
    pub lambda_grid: Vec<f64>,
    pub lhs: Vec<Complex64>,
    pub rhs: Vec<Complex64>,
    pub max_abs_gap: f64,
    pub mc_error_bound: f64,
    pub pass: bool,
}

/// Factorization test of stable convergence. `joint` pairs a bounded
/// complex conditioning value G (|G| <= 1 enforced) with the normalized
/// statistic F computed from the same realization; `limit_batch` holds
/// independent draws of the limit law. The error bound is the largest
/// per-lambda bootstrap standard deviation of the complex gap
/// (resampling both batches, 200 rounds); PASS iff the observed maximum
/// gap is at most 3 times the bound.
pub fn stable_test(
    joint: &[(Complex64, f64)],
    limit_batch: &McBatch,
    lambdas: &[f64],
    bootstrap_seed: u64,
) -> Result<StableTestReport> {
    if joint.len() < 2 {
        return Err(Error::Precondition("joint sample too small".into()));
    }
    if joint.iter().any(|(g, _)| g.norm() > 1.0 + 1e-9) {
        return Err(Error::Precondition("conditioning values must satisfy |G| <= 1".into()));
    }
    let n = joint.len();
    let limit_cf = ecf(limit_batch, lambdas);
    let mean_g = joint.iter().map(|(g, _)| g).sum::<Complex64>() / n as f64;

    let joint_cf = |idx: Option<&[usize]>| -> Vec<Complex64> {
        lambdas
            .iter()
            .map(|&l| {
                let mut acc = Complex64::new(0.0, 0.0);
                match idx {
                    None => {
                        for &(g, f) in joint {
                            let (s, c) = (l * f).sin_cos();
                            acc += g * Complex64::new(c, s);
                        }
                    }
                    Some(ids) => {
                        for &i in ids {
                            let (g, f) = joint[i];
                            let (s, c) = (l * f).sin_cos();
                            acc += g * Complex64::new(c, s);
                        }
                    }
                }
                acc / n as f64
            })
            .collect()
    };

    let lhs = joint_cf(None);
    let rhs: Vec<Complex64> = limit_cf.iter().map(|&c| mean_g * c).collect();
    let max_abs_gap = lhs
        .iter()
        .zip(&rhs)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);

    // Bootstrap spread of the gap per lambda.
    const ROUNDS: usize = 200;
    let mut rng = rng_stream_class(bootstrap_seed, StreamClass::Bootstrap, 0);
    let m = limit_batch.n();
    let mut sums = vec![Complex64::new(0.0, 0.0); lambdas.len()];
    let mut sq = vec![0.0f64; lambdas.len()];
    let mut ids = vec![0usize; n];
    let mut lim_vals = vec![0.0f64; m];
    for _ in 0..ROUNDS {
        for slot in ids.iter_mut() {
            *slot = rng.gen_range(0..n);
        }
        for slot in lim_vals.iter_mut() {
            *slot = limit_batch.values[rng.gen_range(0..m)];
        }
        let b_lhs = joint_cf(Some(&ids));
        let b_mean_g =
            ids.iter().map(|&i| joint[i].0).sum::<Complex64>() / n as f64;
        for (j, &l) in lambdas.iter().enumerate() {
            let mut cf = Complex64::new(0.0, 0.0);
            for &v in &lim_vals {
                let (s, c) = (l * v).sin_cos();
                cf += Complex64::new(c, s);
            }
            cf /= m as f64;
            let gap = b_lhs[j] - b_mean_g * cf;
            sums[j] += gap;
            sq[j] += gap.norm_sqr();
        }
    }
    let mc_error_bound = (0..lambdas.len())
        .map(|j| {
            let mean = sums[j] / ROUNDS as f64;
            ((sq[j] / ROUNDS as f64) - mean.norm_sqr()).max(0.0).sqrt()
        })
        .fold(0.0, f64::max);

    let pass = max_abs_gap <= 3.0 * mc_error_bound;
    Ok(StableTestReport {
        lambda_grid: lambdas.to_vec(),
        lhs,
        rhs,
        max_abs_gap,
        mc_error_bound,
        pass,
    })
}

/// Asymptotic Kolmogorov distribution Q(lambda) = 2 sum (-1)^{j-1}
/// exp(-2 j^2 lambda^2), with the usual finite-sample argument correction.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = (-2.0 * (j as f64) * (j as f64) * lambda * lambda).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value
/// (effective size nm/(n+m), argument correction sqrt(ne)+0.12+0.11/sqrt(ne)).
pub fn ks_distance(a: &McBatch, b: &McBatch) -> (f64, f64) {
    let mut xs = a.values.clone();
    let mut ys = b.values.clone();
    xs.sort_by(|p, q| p.total_cmp(q));
    ys.sort_by(|p, q| p.total_cmp(q));
    let (n, m) = (xs.len(), ys.len());
    let (x_inc, y_inc) = (1.0 / n as f64, 1.0 / m as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut cdf_gap = 0.0f64;
    let mut d = 0.0f64;
    while i < n && j < m {
        match xs[i].total_cmp(&ys[j]) {
            std::cmp::Ordering::Less => {
                cdf_gap += x_inc;
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                cdf_gap -= y_inc;
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                let tie = xs[i];
                while i < n && xs[i] == tie {
                    cdf_gap += x_inc;
                    i += 1;
                }
                while j < m && ys[j] == tie {
                    cdf_gap -= y_inc;
                    j += 1;
                }
            }
        }
        d = d.max(cdf_gap.abs());
    }
    let ne = (n as f64 * m as f64) / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    (d, kolmogorov_q(lambda))
}

/// Power-law fit by ordinary least squares on (log t, log sd).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// The fitted (log t, log sd) pairs.
    pub points: Vec<(f64, f64)>,
}

pub fn rate_fit(pairs: &[(f64, f64)]) -> Result<RateFit> {
    if pairs.len() < 3 {
        return Err(Error::Precondition(format!(
            "rate fit needs at least 3 points, got {}",
            pairs.len()
        )));
    }
    if pairs.iter().any(|&(t, sd)| !(t > 0.0) || !(sd > 0.0)) {
        return Err(Error::Precondition("rate fit needs positive t and sd".into()));
    }
    for w in pairs.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::Precondition("rate fit needs distinct t values".into()));
        }
    }
    let pts: Vec<(f64, f64)> = pairs.iter().map(|&(t, sd)| (t.ln(), sd.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<f64>();
    let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) };
    Ok(RateFit { exponent: slope, intercept, r_squared, points: pts })
}

/// One target for a raw-moment comparison.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MomentTarget {
    pub order: u32,
    pub value: f64,
    /// Allowed deviation in units of the moment's standard error.
    pub n_sigmas: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentCheck {
    pub order: u32,
    pub observed: f64,
    pub target: f64,
    pub se: f64,
    pub n_sigmas: f64,
    pub pass: bool,
}

/// Compare empirical raw moments against targets with SE-aware tolerances.
pub fn moment_report(batch: &McBatch, targets: &[MomentTarget]) -> Vec<MomentCheck> {
    targets
        .iter()
        .map(|t| {
            let observed = batch.raw_moment(t.order);
            let se = batch.raw_moment_se(t.order);
            let pass = (observed - t.value).abs() <= t.n_sigmas * se;
            MomentCheck { order: t.order, observed, target: t.value, se, n_sigmas: t.n_sigmas, pass }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_batch(seed: u64, n: usize, sd: f64) -> McBatch {
        let mut rng = rng_stream_class(seed, StreamClass::Reference, 0);
        let values: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sd * z
            })
            .collect();
        McBatch::new("normal", values, None).unwrap()
    }

    #[test]
    fn batch_rejects_degenerate() {
        assert!(McBatch::new("x", vec![1.0], None).is_err());
        assert!(McBatch::new("x", vec![1.0, f64::NAN], None).is_err());
        let b = McBatch::new("x", vec![1.0, 3.0], None).unwrap();
        assert_eq!(b.mean, 2.0);
        assert_eq!(b.variance, 2.0);
        assert!((b.stderr - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ecf_at_zero_is_exactly_one() {
        let b = normal_batch(1, 500, 1.0);
        let v = ecf(&b, &[0.0]);
        assert_eq!(v[0], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn ecf_gaussian_value() {
        let b = normal_batch(2, 10_000, 1.0);
        let v = ecf(&b, &[1.0]);
        let expect = (-0.5f64).exp();
        let tol = 3.0 / (b.n() as f64).sqrt();
        assert!((v[0].re - expect).abs() < tol);
        assert!(v[0].im.abs() < tol);
    }

    #[test]
    fn ecf_hermitian_and_bounded() {
        let b = normal_batch(3, 2_000, 2.0);
        let pos = ecf(&b, &[0.7, 1.9]);
        let neg = ecf(&b, &[-0.7, -1.9]);
        for (p, n) in pos.iter().zip(&neg) {
            assert_eq!(p.re, n.re);
            assert_eq!(p.im, -n.im);
            assert!(p.norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn ks_identical_batches() {
        let b = normal_batch(4, 1000, 1.0);
        let (d, p) = ks_distance(&b, &b);
        assert_eq!(d, 0.0);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn ks_symmetry() {
        let a = normal_batch(5, 800, 1.0);
        let b = normal_batch(6, 900, 1.1);
        let (d1, p1) = ks_distance(&a, &b);
        let (d2, p2) = ks_distance(&b, &a);
        assert_eq!(d1, d2);
        assert_eq!(p1, p2);
    }

    // Calibration: same-distribution pairs rarely reject at the 1% level;
    // a 2x standard-deviation difference rejects overwhelmingly.
    #[test]
    fn ks_calibration() {
        let mut rejects = 0;
        const RUNS: usize = 120;
        for k in 0..RUNS {
            let a = normal_batch(100 + k as u64, 1000, 1.0);
            let b = normal_batch(10_000 + k as u64, 1000, 1.0);
            let (_, p) = ks_distance(&a, &b);
            if p <= 0.01 {
                rejects += 1;
            }
        }
        assert!(
            rejects as f64 <= 0.02 * RUNS as f64 + 2.0,
            "too many false rejections: {rejects}/{RUNS}"
        );
        let a = normal_batch(7, 10_000, 1.0);
        let b = normal_batch(8, 10_000, 2.0);
        let (_, p) = ks_distance(&a, &b);
        assert!(p < 1e-6, "p = {p}");
    }

    #[test]
    fn rate_fit_exact_power_law() {
        let pairs: Vec<(f64, f64)> =
            [1.0, 10.0, 100.0].iter().map(|&t: &f64| (t, 5.0 * t.powf(0.75))).collect();
        let fit = rate_fit(&pairs).unwrap();
        assert!((fit.exponent - 0.75).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!((fit.intercept - 5.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rate_fit_scale_equivariance() {
        let pairs: Vec<(f64, f64)> = vec![(1.0, 2.0), (4.0, 3.1), (16.0, 4.9), (64.0, 8.2)];
        let scaled: Vec<(f64, f64)> = pairs.iter().map(|&(t, s)| (t, 7.0 * s)).collect();
        let f1 = rate_fit(&pairs).unwrap();
        let f2 = rate_fit(&scaled).unwrap();
        assert!((f1.exponent - f2.exponent).abs() < 1e-12);
        assert!((f2.intercept - f1.intercept - 7.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rate_fit_preconditions() {
        assert!(rate_fit(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(rate_fit(&[(1.0, 1.0), (1.0, 2.0), (3.0, 2.0)]).is_err());
        assert!(rate_fit(&[(1.0, 1.0), (2.0, -2.0), (3.0, 2.0)]).is_err());
    }

    #[test]
    fn moment_report_gaussian() {
        let b = normal_batch(9, 20_000, 1.0);
        let checks = moment_report(
            &b,
            &[
                MomentTarget { order: 1, value: 0.0, n_sigmas: 3.0 },
                MomentTarget { order: 2, value: 1.0, n_sigmas: 3.0 },
                MomentTarget { order: 4, value: 3.0, n_sigmas: 3.0 },
            ],
        );
        assert!(checks.iter().all(|c| c.pass), "{checks:?}");
    }

    #[test]
    fn stable_test_reduces_to_cf_comparison_for_unit_g() {
        let f = normal_batch(10, 4_000, 1.0);
        let lim = normal_batch(11, 4_000, 1.0);
        let joint: Vec<(Complex64, f64)> =
            f.values.iter().map(|&v| (Complex64::new(1.0, 0.0), v)).collect();
        let lambdas = default_lambda_grid();
        let rep = stable_test(&joint, &lim, &lambdas, 99).unwrap();
        let plain = ecf(&f, &lambdas);
        let lim_cf = ecf(&lim, &lambdas);
        let expect = plain
            .iter()
            .zip(&lim_cf)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert_eq!(rep.max_abs_gap, expect);
        assert!(rep.pass, "gap {} bound {}", rep.max_abs_gap, rep.mc_error_bound);
    }

    #[test]
    fn stable_test_rejects_unbounded_g() {
        let lim = normal_batch(12, 100, 1.0);
        let joint = vec![(Complex64::new(2.0, 0.0), 1.0); 100];
        assert!(stable_test(&joint, &lim, &[1.0], 1).is_err());
    }

    // Power: G built from F itself must produce a gap far above the bound.
    #[test]
    fn stable_test_detects_dependence() {
        let f = normal_batch(13, 5_000, 1.0);
        let lim = normal_batch(14, 5_000, 1.0);
        let joint: Vec<(Complex64, f64)> = f
            .values
            .iter()
            .map(|&v| {
                let (s, c) = v.sin_cos();
                (Complex64::new(c, s), v)
            })
            .collect();
        let rep = stable_test(&joint, &lim, &default_lambda_grid(), 7).unwrap();
        assert!(!rep.pass, "gap {} bound {}", rep.max_abs_gap, rep.mc_error_bound);
        assert!(rep.max_abs_gap > 10.0 * rep.mc_error_bound);
    }
}
