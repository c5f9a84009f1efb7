//! Analytic side: the balance condition h·2mλN = Σᵢ α(kᵢ)(1+β_c·k_max)kᵢ/k_max
//! collapsed to the scalar α₁, the resulting line
//! β_c(λ) = hλ/α₁ − 1/k_max (clamped at 0), its inversion for calibration,
//! λ_min, and a census check of the balance itself on free-flow runs.

use std::io::{self, Write};

use thiserror::Error;

use crate::ensemble::MeanSeries;

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("balance check needs a free-flow run: slope {slope} > ε = {epsilon}")]
    Congested { slope: f64, epsilon: f64 },
    #[error(transparent)]
    Analysis(#[from] crate::analysis::AnalysisError),
}

/// Calibrated theory inputs for one network family (fixed p).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryParams {
    pub p: f64,
    pub m: usize,
    pub n: usize,
    /// Measured ensemble-mean path length.
    pub h: f64,
    /// Measured ensemble-mean max degree.
    pub k_max: f64,
    /// Passing-traffic aggregate, ∈ (0, 1] when the model is consistent.
    pub alpha1: f64,
}

impl TheoryParams {
    pub fn beta_c(&self, lambda: f64) -> f64 {
        beta_c_predicted(lambda, self.h, self.alpha1, self.k_max)
    }

    pub fn lambda_min(&self) -> f64 {
        lambda_min(self.alpha1, self.h, self.k_max)
    }

    /// Slope of the β_c(λ) line above λ_min.
    pub fn slope(&self) -> f64 {
        self.h / self.alpha1
    }
}

/// Degree-distribution exponent γ(p) = 3 + p/[m(1−p)]; undefined at p = 1
/// (exponential regime).
pub fn gamma_of_p(p: f64, m: usize) -> Result<f64, TheoryError> {
    if m < 1 {
        return Err(TheoryError::Domain(format!("m = {m} < 1")));
    }
    if !(0.0..1.0).contains(&p) {
        return Err(TheoryError::Domain(format!(
            "p = {p} outside [0, 1); no power law at p = 1"
        )));
    }
    Ok(3.0 + p / (m as f64 * (1.0 - p)))
}

/// Extreme-degree estimate m·N^{1/(γ−1)} (for comparison with measured
/// values; the measured ensemble mean is what feeds `TheoryParams`).
pub fn kmax_estimate(n: usize, m: usize, gamma: f64) -> Result<f64, TheoryError> {
    if gamma <= 1.0 {
        return Err(TheoryError::Domain(format!("γ = {gamma} ≤ 1")));
    }
    Ok(m as f64 * (n as f64).powf(1.0 / (gamma - 1.0)))
}

/// α₁ from one measured (λ, β_c) point: α₁ = hλ/(β_c + 1/k_max).
/// `within_bounds` flags whether the result landed in the model's (0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub alpha1: f64,
    pub within_bounds: bool,
}

pub fn calibrate_alpha1(
    beta_c_measured: f64,
    lambda: f64,
    h: f64,
    k_max: f64,
) -> Result<Calibration, TheoryError> {
    if k_max <= 0.0 {
        return Err(TheoryError::Domain(format!("k_max = {k_max} ≤ 0")));
    }
    let denom = beta_c_measured + 1.0 / k_max;
    if denom <= 0.0 {
        return Err(TheoryError::Domain(format!(
            "β_c + 1/k_max = {denom} ≤ 0"
        )));
    }
    let alpha1 = h * lambda / denom;
    Ok(Calibration {
        alpha1,
        within_bounds: alpha1 > 0.0 && alpha1 <= 1.0,
    })
}

/// max(0, hλ/α₁ − 1/k_max).
pub fn beta_c_predicted(lambda: f64, h: f64, alpha1: f64, k_max: f64) -> f64 {
    debug_assert!(alpha1 > 0.0 && k_max >= 1.0);
    (h * lambda / alpha1 - 1.0 / k_max).max(0.0)
}

/// Creation rate below which β_c = 0: λ_min = α₁/(h·k_max).
pub fn lambda_min(alpha1: f64, h: f64, k_max: f64) -> f64 {
    debug_assert!(h > 0.0 && k_max > 0.0 && alpha1 >= 0.0);
    alpha1 / (h * k_max)
}

/// Outcome of the Little's-law census.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BalanceReport {
    /// λ = 0: both sides are exactly zero.
    ZeroTraffic,
    Residual {
        /// |measured − expected| / expected.
        residual: f64,
        /// Mean packets present during the delivery phase over the window.
        measured: f64,
        /// h·2mλN.
        expected: f64,
    },
}

/// Compare the steady-state census against h·2mλN on a free-flow run.
///
/// The census counts packets present during the delivery phase (end-of-step
/// in-flight plus the packets delivered that step): a d-hop packet is present
/// during exactly d delivery phases when it never waits, which is what makes
/// the count comparable to h × (creations per step). Errors if the run is
/// congested (slope of ⟨n₁⟩ over the window above `epsilon`).
pub fn balance_check(
    series: &MeanSeries,
    window: (u32, u32),
    epsilon: f64,
    h: f64,
    lambda: f64,
    m: usize,
    n: usize,
) -> Result<BalanceReport, TheoryError> {
    if lambda == 0.0 {
        return Ok(BalanceReport::ZeroTraffic);
    }
    let slope = crate::analysis::growth_slope(&series.n1, window)?.slope;
    if slope > epsilon {
        return Err(TheoryError::Congested { slope, epsilon });
    }
    let (t1, t2) = (window.0 as usize, window.1 as usize);
    let mut census = 0.0;
    for t in t1..=t2 {
        let delivered_step = series.delivered_cum[t - 1]
            - if t >= 2 { series.delivered_cum[t - 2] } else { 0.0 };
        census += series.in_flight[t - 1] + delivered_step;
    }
    let measured = census / (t2 - t1 + 1) as f64;
    let expected = h * 2.0 * m as f64 * lambda * n as f64;
    Ok(BalanceReport::Residual {
        residual: (measured - expected).abs() / expected,
        measured,
        expected,
    })
}

/// One family's calibrated theory next to the measured curve.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryReport {
    pub params: TheoryParams,
    pub rows: Vec<TheoryRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryRow {
    pub lambda: f64,
    pub beta_c_measured: f64,
    pub beta_c_predicted: f64,
    /// |pred − meas| / meas; NaN-free: 0 when both are 0, 1 when only the
    /// measurement is 0.
    pub rel_err: f64,
}

impl TheoryRow {
    pub fn new(lambda: f64, measured: f64, predicted: f64) -> TheoryRow {
        let rel_err = if measured == 0.0 {
            if predicted == 0.0 {
                0.0
            } else {
                1.0
            }
        } else {
            (predicted - measured).abs() / measured
        };
        TheoryRow {
            lambda,
            beta_c_measured: measured,
            beta_c_predicted: predicted,
            rel_err,
        }
    }
}

impl TheoryReport {
    /// `p,h,k_max,alpha1,lambda_min,slope_pred` (single row).
    pub fn write_params_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "p,h,k_max,alpha1,lambda_min,slope_pred")?;
        writeln!(
            out,
            "{},{},{},{},{},{}",
            self.params.p,
            self.params.h,
            self.params.k_max,
            self.params.alpha1,
            self.params.lambda_min(),
            self.params.slope()
        )
    }

    /// `lambda,beta_c_measured,beta_c_predicted,rel_err`, one row per λ.
    pub fn write_table_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "lambda,beta_c_measured,beta_c_predicted,rel_err")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{}",
                r.lambda, r.beta_c_measured, r.beta_c_predicted, r.rel_err
            )?;
        }
        Ok(())
    }
}
