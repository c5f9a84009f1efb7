//! Observables: ⟨n(k)⟩ degree profiles, growth slopes of ⟨n₁(t)⟩, and the
//! critical β_c(λ) located by bisection on the slope criterion
//! (slope > ε ⇔ congested).

use std::io::{self, Write};

use thiserror::Error;

use crate::ensemble::{self, derive_seed, GraphInstance, GraphShape, STREAM_POINT};
use crate::stats::{self, LinearFit};
use crate::traffic::TrafficTemplate;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("empty snapshot ensemble")]
    EmptyEnsemble,
    #[error("inconsistent snapshots: {0}")]
    InconsistentSnapshots(String),
    #[error("fit window [{0}, {1}] invalid for series of length {2}")]
    BadWindow(u32, u32, usize),
    #[error(
        "bracket not congested at β_lo = {beta_lo}: slope {slope_lo} ≤ ε = {epsilon} \
         (λ may be below λ_min)"
    )]
    FreeAtLow {
        beta_lo: f64,
        slope_lo: f64,
        epsilon: f64,
    },
    #[error("still congested at β_hi = {beta_hi}: slope {slope_hi} > ε = {epsilon}")]
    CongestedAtHigh {
        beta_hi: f64,
        slope_hi: f64,
        epsilon: f64,
    },
    #[error(transparent)]
    Ensemble(#[from] ensemble::EnsembleError),
}

/// Per-node queue lengths of one realization at time t, with that
/// realization's degree sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotSample {
    pub t: u32,
    pub degrees: Vec<usize>,
    pub queue_len: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileBin {
    pub degree: usize,
    pub mean_n: f64,
    pub stderr: f64,
    /// (realization, node) samples in this bin.
    pub count: usize,
}

/// ⟨n(k)⟩: mean queue length over all (realization, node) pairs of degree k.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeProfile {
    pub t: u32,
    pub realizations: usize,
    pub bins: Vec<ProfileBin>,
}

impl DegreeProfile {
    pub fn bin(&self, degree: usize) -> Option<&ProfileBin> {
        self.bins
            .binary_search_by_key(&degree, |b| b.degree)
            .ok()
            .map(|i| &self.bins[i])
    }

    /// Mean queue length over all samples whose degree is ≥ the q-quantile of
    /// the pooled degree sequence (q in [0,1], e.g. 0.9 for the top decile).
    pub fn tail_mean(&self, q: f64) -> f64 {
        assert!((0.0..=1.0).contains(&q));
        let mut degrees: Vec<usize> = Vec::new();
        for b in &self.bins {
            degrees.extend(std::iter::repeat(b.degree).take(b.count));
        }
        degrees.sort_unstable();
        if degrees.is_empty() {
            return 0.0;
        }
        let idx = ((degrees.len() as f64 - 1.0) * q).floor() as usize;
        let k_thr = degrees[idx];
        let (mut s, mut c) = (0.0, 0usize);
        for b in &self.bins {
            if b.degree >= k_thr {
                s += b.mean_n * b.count as f64;
                c += b.count;
            }
        }
        s / c as f64
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "k,mean_n,stderr,count")?;
        for b in &self.bins {
            writeln!(out, "{},{},{},{}", b.degree, b.mean_n, b.stderr, b.count)?;
        }
        Ok(())
    }
}

/// Aggregate an ensemble of same-time snapshots into ⟨n(k)⟩.
pub fn degree_profile(samples: &[SnapshotSample]) -> Result<DegreeProfile, AnalysisError> {
    if samples.is_empty() {
        return Err(AnalysisError::EmptyEnsemble);
    }
    let t = samples[0].t;
    for (r, s) in samples.iter().enumerate() {
        if s.t != t {
            return Err(AnalysisError::InconsistentSnapshots(format!(
                "sample {r} taken at t = {} instead of {t}",
                s.t
            )));
        }
        if s.degrees.len() != s.queue_len.len() {
            return Err(AnalysisError::InconsistentSnapshots(format!(
                "sample {r}: {} degrees vs {} queue lengths",
                s.degrees.len(),
                s.queue_len.len()
            )));
        }
    }
    let mut by_degree: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for s in samples {
        for (&k, &q) in s.degrees.iter().zip(&s.queue_len) {
            by_degree.entry(k).or_default().push(q as f64);
        }
    }
    let bins = by_degree
        .into_iter()
        .map(|(degree, values)| {
            let (mean_n, stderr) = stats::mean_stderr(&values);
            ProfileBin {
                degree,
                mean_n,
                stderr,
                count: values.len(),
            }
        })
        .collect();
    Ok(DegreeProfile {
        t,
        realizations: samples.len(),
        bins,
    })
}

/// OLS slope of ⟨n₁(t)⟩ over a step window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeEstimate {
    /// Packets per node per step.
    pub slope: f64,
    pub intercept: f64,
    pub window: (u32, u32),
    pub residual_se: f64,
}

/// Least-squares slope of the series over the inclusive window [t₁, t₂]
/// (steps are 1-based; series[i] is the value after step i+1).
pub fn growth_slope(n1: &[f64], window: (u32, u32)) -> Result<SlopeEstimate, AnalysisError> {
    let (t1, t2) = window;
    if t1 < 1 || t1 >= t2 || (t2 as usize) > n1.len() {
        return Err(AnalysisError::BadWindow(t1, t2, n1.len()));
    }
    let xs: Vec<f64> = (t1..=t2).map(f64::from).collect();
    let ys: Vec<f64> = n1[(t1 - 1) as usize..t2 as usize].to_vec();
    let fit = stats::linear_fit(&xs, &ys).expect("window has ≥ 2 distinct x");
    Ok(SlopeEstimate {
        slope: fit.slope,
        intercept: fit.intercept,
        window,
        residual_se: fit.residual_se,
    })
}

/// β_c search controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    pub beta_lo: f64,
    pub beta_hi: f64,
    /// Bisection stops when β_hi − β_lo ≤ tol.
    pub tol: f64,
    /// Congestion threshold on the ⟨n₁(t)⟩ slope (packets/node/step).
    pub epsilon: f64,
    pub t_max: u32,
    /// Transient-excluding fit window.
    pub window: (u32, u32),
}

impl Default for SearchParams {
    fn default() -> SearchParams {
        SearchParams {
            beta_lo: 0.0,
            beta_hi: 0.2,
            tol: 0.002,
            epsilon: 1e-4,
            t_max: 1000,
            window: (200, 1000),
        }
    }
}

/// β_c estimate for one λ with its search record.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseResult {
    pub lambda: f64,
    pub beta_c: f64,
    /// Final bracket; (0, 0) when the system is free-flowing at β = 0.
    pub beta_lo: f64,
    pub beta_hi: f64,
    pub slope_lo: f64,
    pub slope_hi: f64,
    /// Every (β, slope) evaluation made during the search.
    pub slopes: Vec<(f64, f64)>,
    pub realizations: usize,
    pub tol: f64,
}

/// CSV export, one row per λ: `lambda,beta_c,beta_lo,beta_hi,slope_lo,slope_hi,ensemble,tol`.
pub fn write_phase_results_csv<W: Write>(
    results: &[PhaseResult],
    out: &mut W,
) -> io::Result<()> {
    writeln!(
        out,
        "lambda,beta_c,beta_lo,beta_hi,slope_lo,slope_hi,ensemble,tol"
    )?;
    for r in results {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.lambda, r.beta_c, r.beta_lo, r.beta_hi, r.slope_lo, r.slope_hi, r.realizations, r.tol
        )?;
    }
    Ok(())
}

/// Per-evaluation slope table: `lambda,beta,slope`.
pub fn write_slope_table_csv<W: Write>(results: &[PhaseResult], out: &mut W) -> io::Result<()> {
    writeln!(out, "lambda,beta,slope")?;
    for r in results {
        for &(beta, slope) in &r.slopes {
            writeln!(out, "{},{},{}", r.lambda, beta, slope)?;
        }
    }
    Ok(())
}

fn slope_at(
    template: &TrafficTemplate,
    beta: f64,
    ensemble: &[GraphInstance],
    search: &SearchParams,
    master: u64,
) -> Result<f64, AnalysisError> {
    let ms = ensemble::mean_series(ensemble, &template.plan(beta), search.t_max, master)?;
    Ok(growth_slope(&ms.n1, search.window)?.slope)
}

/// Bisect on β between a congested low endpoint and a free high endpoint.
/// Traffic seeds depend only on (master, realization), so every β evaluation
/// reuses the same random numbers — the classic variance-reduction pairing.
pub fn find_beta_c(
    template: &TrafficTemplate,
    ensemble: &[GraphInstance],
    search: &SearchParams,
    master: u64,
) -> Result<PhaseResult, AnalysisError> {
    assert!(search.tol > 0.0, "tol must be positive");
    assert!(search.beta_lo < search.beta_hi, "empty bracket");
    let mut slopes = Vec::new();
    let mut lo = search.beta_lo;
    let mut hi = search.beta_hi;
    let slope_lo_init = slope_at(template, lo, ensemble, search, master)?;
    slopes.push((lo, slope_lo_init));
    if slope_lo_init <= search.epsilon {
        return Err(AnalysisError::FreeAtLow {
            beta_lo: lo,
            slope_lo: slope_lo_init,
            epsilon: search.epsilon,
        });
    }
    let slope_hi_init = slope_at(template, hi, ensemble, search, master)?;
    slopes.push((hi, slope_hi_init));
    if slope_hi_init > search.epsilon {
        return Err(AnalysisError::CongestedAtHigh {
            beta_hi: hi,
            slope_hi: slope_hi_init,
            epsilon: search.epsilon,
        });
    }
    let mut slope_lo = slope_lo_init;
    let mut slope_hi = slope_hi_init;
    while hi - lo > search.tol {
        let mid = 0.5 * (lo + hi);
        let s = slope_at(template, mid, ensemble, search, master)?;
        slopes.push((mid, s));
        if s > search.epsilon {
            lo = mid;
            slope_lo = s;
        } else {
            hi = mid;
            slope_hi = s;
        }
    }
    Ok(PhaseResult {
        lambda: template.lambda,
        beta_c: 0.5 * (lo + hi),
        beta_lo: lo,
        beta_hi: hi,
        slope_lo,
        slope_hi,
        slopes,
        realizations: ensemble.len(),
        tol: search.tol,
    })
}

/// β_c over a λ grid on a shared graph ensemble. A λ free-flowing already at
/// β = β_lo = 0 is recorded as β_c = 0 rather than an error.
pub fn beta_c_curve(
    lambdas: &[f64],
    template_of: impl Fn(f64) -> TrafficTemplate,
    shape: &GraphShape,
    realizations: usize,
    search: &SearchParams,
    master: u64,
) -> Result<Vec<PhaseResult>, AnalysisError> {
    assert!(!lambdas.is_empty(), "empty λ list");
    let ensemble = ensemble::build_ensemble(shape, realizations, master)?;
    let mut results = Vec::with_capacity(lambdas.len());
    for (i, &lambda) in lambdas.iter().enumerate() {
        let template = template_of(lambda);
        let point_master = derive_seed(master, i as u64, STREAM_POINT);
        match find_beta_c(&template, &ensemble, search, point_master) {
            Ok(r) => results.push(r),
            Err(AnalysisError::FreeAtLow { slope_lo, .. }) if search.beta_lo == 0.0 => {
                results.push(PhaseResult {
                    lambda,
                    beta_c: 0.0,
                    beta_lo: 0.0,
                    beta_hi: 0.0,
                    slope_lo,
                    slope_hi: slope_lo,
                    slopes: vec![(0.0, slope_lo)],
                    realizations,
                    tol: search.tol,
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(results)
}

/// OLS line through the β_c(λ) points with β_c > 0 (the sub-λ_min plateau is
/// structurally flat and excluded). `None` with fewer than two such points.
pub fn fit_curve_slope(results: &[PhaseResult]) -> Option<LinearFit> {
    let xs: Vec<f64> = results
        .iter()
        .filter(|r| r.beta_c > 0.0)
        .map(|r| r.lambda)
        .collect();
    let ys: Vec<f64> = results
        .iter()
        .filter(|r| r.beta_c > 0.0)
        .map(|r| r.beta_c)
        .collect();
    stats::linear_fit(&xs, &ys)
}
