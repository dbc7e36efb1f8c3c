//! Binary-response GLM: logit and probit maximum likelihood by Newton's
//! method on the exact Hessian, Wald inference, McFadden's ρ² and
//! classification accuracy.
//!
//! Regressors are centred and scaled internally for conditioning; everything
//! reported (coefficients, covariance, z statistics) is in raw regressor
//! units.

mod normal;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use normal::{inverse_mills, log_normal_cdf, normal_cdf, normal_pdf, normal_quantile};

/// Ridge added to the information matrix when it is not positive definite.
pub const RIDGE: f64 = 1e-8;

/// Standardized coefficients beyond this, on a stalled fit, indicate a
/// diverging (separated) solution rather than slow convergence.
const DIVERGENCE_NORM: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Logit,
    Probit,
}

impl Link {
    pub fn as_str(self) -> &'static str {
        match self {
            Link::Logit => "logit",
            Link::Probit => "probit",
        }
    }

    /// P(Y = 1) at linear predictor `eta`.
    pub fn probability(self, eta: f64) -> f64 {
        match self {
            Link::Logit => {
                if eta >= 0.0 {
                    1.0 / (1.0 + (-eta).exp())
                } else {
                    let e = eta.exp();
                    e / (1.0 + e)
                }
            }
            Link::Probit => normal_cdf(eta),
        }
    }

    /// Intercept of the intercept-only MLE for a sample mean `ybar`.
    pub fn null_intercept(self, ybar: f64) -> f64 {
        match self {
            Link::Logit => (ybar / (1.0 - ybar)).ln(),
            Link::Probit => normal_quantile(ybar).expect("ybar strictly inside (0, 1)"),
        }
    }

    /// Per-observation log-likelihood and its first two derivatives in `eta`.
    fn terms(self, eta: f64, y: bool) -> (f64, f64, f64) {
        match self {
            Link::Logit => {
                let p = self.probability(eta);
                let ll = if y { -softplus(-eta) } else { -softplus(eta) };
                let d1 = if y { 1.0 - p } else { -p };
                (ll, d1, -p * (1.0 - p))
            }
            Link::Probit => {
                // y = 0 is the y = 1 case mirrored through u = -eta
                let u = if y { eta } else { -eta };
                let lambda = inverse_mills(u);
                let d1 = if y { lambda } else { -lambda };
                (log_normal_cdf(u), d1, -lambda * (u + lambda))
            }
        }
    }

    fn loglik_term(self, eta: f64, y: bool) -> f64 {
        match self {
            Link::Logit => {
                if y {
                    -softplus(-eta)
                } else {
                    -softplus(eta)
                }
            }
            Link::Probit => log_normal_cdf(if y { eta } else { -eta }),
        }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Link {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logit" => Ok(Link::Logit),
            "probit" => Ok(Link::Probit),
            other => Err(Error::InvalidArgument(format!("unknown link {other:?}"))),
        }
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Model specification. The design matrix passed to [`fit`] must carry the
/// intercept (a column of ones) first, followed by one column per name in
/// `columns`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlmSpec {
    pub link: Link,
    /// Regressor names, excluding the intercept.
    pub columns: Vec<String>,
}

impl GlmSpec {
    pub fn new(link: Link, columns: impl IntoIterator<Item = impl Into<String>>) -> Self {
        GlmSpec {
            link,
            columns: columns.into_iter().map(Into::into).collect(),
        }
    }

    pub fn n_coefficients(&self) -> usize {
        self.columns.len() + 1
    }

    pub fn coefficient_names(&self) -> Vec<String> {
        std::iter::once("const".to_string())
            .chain(self.columns.iter().cloned())
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Relative log-likelihood change treated as converged.
    pub rel_tol: f64,
    /// Score max-norm treated as converged.
    pub grad_tol: f64,
    /// Significance level for the reported Wald flags.
    pub alpha: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 100,
            rel_tol: 1e-10,
            grad_tol: 1e-8,
            alpha: 0.05,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Significance {
    #[serde(rename = "+")]
    Positive,
    #[serde(rename = "-")]
    Negative,
    #[serde(rename = "0")]
    Insignificant,
}

impl Significance {
    pub fn symbol(self) -> &'static str {
        match self {
            Significance::Positive => "+",
            Significance::Negative => "-",
            Significance::Insignificant => "0",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Ridge was added to a singular information matrix.
    pub ridge_applied: bool,
    /// Condition number of the standardized design.
    pub condition_number: f64,
    pub step_halvings: usize,
    /// Coefficients whose standard error is zero or non-finite.
    pub zero_se: Vec<usize>,
}

/// Maximum-likelihood fit result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlmFit {
    pub link: Link,
    pub names: Vec<String>,
    pub n_obs: usize,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub z_stats: Vec<f64>,
    pub significance: Vec<Significance>,
    /// Inverse observed information, row-major.
    pub covariance: Vec<Vec<f64>>,
    pub loglik: f64,
    pub loglik_null: f64,
    pub rho_square: f64,
    pub accuracy: f64,
    pub converged: bool,
    pub iterations: usize,
    pub reason: Option<String>,
    pub diagnostics: FitDiagnostics,
}

impl GlmFit {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.coefficients[i])
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Fitted probabilities for the rows of `x` (intercept column included).
    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let beta = DVector::from_column_slice(&self.coefficients);
        (x * beta).iter().map(|&eta| self.link.probability(eta)).collect()
    }
}

/// Bernoulli log-likelihood at raw coefficients `beta`.
pub fn log_likelihood(link: Link, x: &DMatrix<f64>, y: &[bool], beta: &[f64]) -> f64 {
    let eta = x * DVector::from_column_slice(beta);
    eta.iter()
        .zip(y)
        .map(|(&e, &yi)| link.loglik_term(e, yi))
        .sum()
}

/// Analytic score vector (gradient of [`log_likelihood`]) at `beta`.
pub fn score(link: Link, x: &DMatrix<f64>, y: &[bool], beta: &[f64]) -> Vec<f64> {
    let eta = x * DVector::from_column_slice(beta);
    let d1 = DVector::from_iterator(
        y.len(),
        eta.iter().zip(y).map(|(&e, &yi)| link.terms(e, yi).1),
    );
    (x.transpose() * d1).iter().copied().collect()
}

struct Evaluation {
    loglik: f64,
    gradient: DVector<f64>,
    /// Negative Hessian.
    information: DMatrix<f64>,
    /// Observations fitted with probability numerically equal to their label.
    perfectly_fitted: usize,
}

fn evaluate(link: Link, z: &DMatrix<f64>, y: &[bool], gamma: &DVector<f64>) -> Evaluation {
    let eta = z * gamma;
    let n = y.len();
    let mut d1 = DVector::zeros(n);
    let mut weighted = z.clone();
    let mut loglik = 0.0;
    let mut perfectly_fitted = 0;
    for i in 0..n {
        let (ll, g, h) = link.terms(eta[i], y[i]);
        loglik += ll;
        if ll > -1e-10 {
            perfectly_fitted += 1;
        }
        d1[i] = g;
        weighted.row_mut(i).scale_mut(-h);
    }
    let zt = z.transpose();
    Evaluation {
        loglik,
        gradient: &zt * d1,
        information: &zt * weighted,
        perfectly_fitted,
    }
}

fn loglik_only(link: Link, z: &DMatrix<f64>, y: &[bool], gamma: &DVector<f64>) -> f64 {
    let eta = z * gamma;
    eta.iter().zip(y).map(|(&e, &yi)| link.loglik_term(e, yi)).sum()
}

/// Solves `info * x = rhs` by Cholesky, falling back to the ridge. The flag
/// reports whether the ridge was needed.
fn solve_spd(info: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<(DVector<f64>, bool)> {
    if let Some(ch) = info.clone().cholesky() {
        return Some((ch.solve(rhs), false));
    }
    let mut r = info.clone();
    for i in 0..r.nrows() {
        r[(i, i)] += RIDGE;
    }
    r.cholesky().map(|ch| (ch.solve(rhs), true))
}

fn invert_spd(info: &DMatrix<f64>, ridge_used: &mut bool) -> Option<DMatrix<f64>> {
    if let Some(ch) = info.clone().cholesky() {
        return Some(ch.inverse());
    }
    let mut r = info.clone();
    for i in 0..r.nrows() {
        r[(i, i)] += RIDGE;
    }
    *ridge_used = true;
    r.cholesky().map(|ch| ch.inverse())
}

/// Column centring/scaling; `beta = transform * gamma`.
struct Standardizer {
    means: Vec<f64>,
    scales: Vec<f64>,
}

impl Standardizer {
    fn new(x: &DMatrix<f64>) -> Self {
        let n = x.nrows() as f64;
        let p = x.ncols();
        let mut means = vec![0.0; p];
        let mut scales = vec![1.0; p];
        for j in 1..p {
            let col = x.column(j);
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let sd = var.sqrt();
            if sd > 0.0 && sd.is_finite() {
                means[j] = mean;
                scales[j] = sd;
            }
        }
        Standardizer { means, scales }
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = x.clone();
        for j in 1..x.ncols() {
            let (m, s) = (self.means[j], self.scales[j]);
            z.column_mut(j).apply(|v| *v = (*v - m) / s);
        }
        z
    }

    fn transform(&self) -> DMatrix<f64> {
        let p = self.means.len();
        let mut t = DMatrix::zeros(p, p);
        t[(0, 0)] = 1.0;
        for j in 1..p {
            t[(j, j)] = 1.0 / self.scales[j];
            t[(0, j)] = -self.means[j] / self.scales[j];
        }
        t
    }
}

fn condition_number(z: &DMatrix<f64>) -> f64 {
    let gram = z.transpose() * z;
    let eig = gram.symmetric_eigenvalues();
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        (max / min).sqrt()
    }
}

/// Fits the model by maximum likelihood.
///
/// Precondition failures (shape mismatch, too few rows, constant response)
/// are errors. Numerical failures (separation, singular information,
/// non-convergence) come back as a fit with `converged == false` and a
/// `reason`.
pub fn fit(spec: &GlmSpec, x: &DMatrix<f64>, y: &[bool], opts: &FitOptions) -> Result<GlmFit> {
    let n = x.nrows();
    let p = x.ncols();
    if p != spec.n_coefficients() {
        return Err(Error::Glm(format!(
            "design has {p} columns but the model names {} coefficients",
            spec.n_coefficients()
        )));
    }
    if y.len() != n {
        return Err(Error::Glm(format!("{n} design rows but {} responses", y.len())));
    }
    if n < p + 1 {
        return Err(Error::Glm(format!("{n} rows is too few for {p} coefficients")));
    }
    if x.column(0).iter().any(|&v| v != 1.0) {
        return Err(Error::Glm("first design column must be the intercept (all ones)".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Glm("design contains non-finite values".into()));
    }
    let ones = y.iter().filter(|&&v| v).count();
    if ones == 0 || ones == n {
        return Err(Error::DegenerateResponse);
    }
    let link = spec.link;
    let ybar = ones as f64 / n as f64;

    let standardizer = Standardizer::new(x);
    let z = standardizer.apply(x);
    let mut diagnostics = FitDiagnostics {
        condition_number: condition_number(&z),
        ..Default::default()
    };

    let mut gamma = DVector::zeros(p);
    gamma[0] = link.null_intercept(ybar);
    // Zero slopes make this exactly the intercept-only model.
    let loglik_null = loglik_only(link, &z, y, &gamma);

    let slope_norm = |g: &DVector<f64>| if p > 1 { g.rows(1, p - 1).amax() } else { 0.0 };
    let mut eval = evaluate(link, &z, y, &gamma);
    let mut iterations = 0usize;
    let mut converged = false;
    let mut reason: Option<String> = None;
    let mut small_change = false;

    loop {
        let Some((step, ridged)) = solve_spd(&eval.information, &eval.gradient) else {
            reason = Some("singular".into());
            break;
        };
        diagnostics.ridge_applied |= ridged;
        let flat = small_change || eval.gradient.amax() < opts.grad_tol;
        // A finite optimum of a concave likelihood also has a vanishing
        // Newton step.
        if flat && step.amax() < 1e-6 {
            if ridged && eval.perfectly_fitted > 0 {
                reason = Some("separation".into());
            } else {
                converged = true;
            }
            break;
        }
        if iterations >= opts.max_iter {
            let diverging = eval.perfectly_fitted > 0 || slope_norm(&gamma) > DIVERGENCE_NORM;
            reason = Some(if diverging { "separation" } else { "max_iterations" }.into());
            break;
        }
        iterations += 1;

        let mut scale = 1.0;
        let mut candidate = &gamma + &step;
        let mut cand_ll = loglik_only(link, &z, y, &candidate);
        while (cand_ll.is_nan() || cand_ll < eval.loglik) && scale > 1e-10 {
            scale *= 0.5;
            diagnostics.step_halvings += 1;
            candidate = &gamma + &step * scale;
            cand_ll = loglik_only(link, &z, y, &candidate);
        }
        if cand_ll.is_nan() || cand_ll < eval.loglik {
            // no ascent along the Newton direction: optimal to machine precision
            small_change = true;
            continue;
        }
        let rel = (cand_ll - eval.loglik).abs() / eval.loglik.abs().max(f64::MIN_POSITIVE);
        small_change = rel < opts.rel_tol;
        gamma = candidate;
        eval = evaluate(link, &z, y, &gamma);
        if slope_norm(&gamma) > 1e3 {
            reason = Some("separation".into());
            break;
        }
    }

    let transform = standardizer.transform();
    let beta = &transform * &gamma;
    let mut ridge = diagnostics.ridge_applied;
    let cov = invert_spd(&eval.information, &mut ridge)
        .map(|inv| &transform * inv * transform.transpose());
    diagnostics.ridge_applied = ridge;
    let covariance = match cov {
        Some(c) => c,
        None => {
            converged = false;
            reason.get_or_insert_with(|| "singular".into());
            DMatrix::from_element(p, p, f64::NAN)
        }
    };

    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let std_errors: Vec<f64> = (0..p).map(|j| covariance[(j, j)].max(0.0).sqrt()).collect();
    let z_stats: Vec<f64> = coefficients
        .iter()
        .zip(&std_errors)
        .map(|(b, s)| if *s > 0.0 && s.is_finite() { b / s } else { 0.0 })
        .collect();
    diagnostics.zero_se = std_errors
        .iter()
        .enumerate()
        .filter(|(_, s)| !(**s > 0.0 && s.is_finite()))
        .map(|(j, _)| j)
        .collect();

    let loglik = eval.loglik;
    let mut out = GlmFit {
        link,
        names: spec.coefficient_names(),
        n_obs: n,
        coefficients,
        std_errors,
        z_stats,
        significance: vec![Significance::Insignificant; p],
        covariance: (0..p)
            .map(|i| (0..p).map(|j| covariance[(i, j)]).collect())
            .collect(),
        loglik,
        loglik_null,
        rho_square: mcfadden_rho2(loglik, loglik_null)?,
        accuracy: 0.0,
        converged,
        iterations,
        reason,
        diagnostics,
    };
    out.accuracy = classify_and_score(&out, x, y);
    if out.converged {
        out.significance = wald_significance(&out, opts.alpha)?;
    }
    Ok(out)
}

/// Share of responses matched by the 0.5-threshold classification.
pub fn classify_and_score(fit: &GlmFit, x: &DMatrix<f64>, y: &[bool]) -> f64 {
    let hits = fit
        .predict(x)
        .iter()
        .zip(y)
        .filter(|(&p, &yi)| (p >= 0.5) == yi)
        .count();
    hits as f64 / y.len() as f64
}

/// McFadden's ρ² = 1 − L(β̂)/L(β̄).
pub fn mcfadden_rho2(loglik_fitted: f64, loglik_null: f64) -> Result<f64> {
    if loglik_null == 0.0 || !loglik_null.is_finite() {
        return Err(Error::Glm(format!("null log-likelihood {loglik_null} is degenerate")));
    }
    Ok(1.0 - loglik_fitted / loglik_null)
}

/// Two-sided Wald flags at level `alpha`. Coefficients with zero standard
/// error are reported insignificant.
pub fn wald_significance(fit: &GlmFit, alpha: f64) -> Result<Vec<Significance>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} not in (0, 1)")));
    }
    let crit = normal_quantile(1.0 - alpha / 2.0)?;
    Ok(fit
        .coefficients
        .iter()
        .zip(&fit.std_errors)
        .map(|(&b, &se)| classify_z(b, se, crit))
        .collect())
}

pub(crate) fn classify_z(beta: f64, se: f64, crit: f64) -> Significance {
    if !(se > 0.0 && se.is_finite()) {
        return Significance::Insignificant;
    }
    let z = beta / se;
    if z > crit {
        Significance::Positive
    } else if z < -crit {
        Significance::Negative
    } else {
        Significance::Insignificant
    }
}

/// Relative change in the odds for a regressor change `dx`: `e^{β·dx} − 1`.
pub fn odds_effect(beta: f64, dx: f64) -> f64 {
    (beta * dx).exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(cols: &[Vec<f64>]) -> DMatrix<f64> {
        let n = cols[0].len();
        let mut x = DMatrix::from_element(n, cols.len() + 1, 1.0);
        for (j, c) in cols.iter().enumerate() {
            for i in 0..n {
                x[(i, j + 1)] = c[i];
            }
        }
        x
    }

    #[test]
    fn intercept_only_closed_form() {
        let y: Vec<bool> = (0..100).map(|i| i % 10 < 3).collect();
        let x = DMatrix::from_element(100, 1, 1.0);
        let spec = GlmSpec::new(Link::Logit, Vec::<String>::new());
        let f = fit(&spec, &x, &y, &FitOptions::default()).unwrap();
        assert!(f.converged);
        assert!((f.coefficients[0] - (0.3f64 / 0.7).ln()).abs() < 1e-12);
        assert!((f.coefficients[0] + 0.8473).abs() < 1e-4);
        assert_eq!(f.rho_square, 0.0);

        let spec = GlmSpec::new(Link::Probit, Vec::<String>::new());
        let f = fit(&spec, &x, &y, &FitOptions::default()).unwrap();
        assert!(f.converged);
        assert!((f.coefficients[0] - normal_quantile(0.3).unwrap()).abs() < 1e-12);
        assert_eq!(f.rho_square, 0.0);
    }

    #[test]
    fn perfect_predictor_is_separation() {
        let y: Vec<bool> = (0..60).map(|i| i % 3 == 0).collect();
        let xs: Vec<f64> = y.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
        let x = design(&[xs]);
        for link in [Link::Logit, Link::Probit] {
            let f = fit(&GlmSpec::new(link, ["x"]), &x, &y, &FitOptions::default()).unwrap();
            assert!(!f.converged, "{link}");
            assert_eq!(f.reason.as_deref(), Some("separation"), "{link}");
        }
    }

    #[test]
    fn degenerate_response() {
        let x = design(&[vec![1.0, 2.0, 3.0, 4.0]]);
        let spec = GlmSpec::new(Link::Logit, ["x"]);
        assert!(matches!(
            fit(&spec, &x, &[true; 4], &FitOptions::default()),
            Err(Error::DegenerateResponse)
        ));
        assert!(matches!(
            fit(&spec, &x, &[false; 4], &FitOptions::default()),
            Err(Error::DegenerateResponse)
        ));
    }

    #[test]
    fn shape_errors() {
        let x = design(&[vec![1.0, 2.0, 3.0]]);
        let spec = GlmSpec::new(Link::Logit, ["x"]);
        assert!(fit(&spec, &x, &[true, false], &FitOptions::default()).is_err());
        let tiny = design(&[vec![1.0, 2.0]]);
        assert!(fit(&spec, &tiny, &[true, false], &FitOptions::default()).is_err());
        let spec2 = GlmSpec::new(Link::Logit, ["a", "b"]);
        assert!(fit(&spec2, &x, &[true, false, true], &FitOptions::default()).is_err());
    }

    #[test]
    fn constant_column_uses_ridge() {
        let n = 80;
        let y: Vec<bool> = (0..n).map(|i| (i * 7) % 5 < 2).collect();
        let a: Vec<f64> = (0..n).map(|i| ((i * 13) % 11) as f64).collect();
        let zero = vec![0.0; n];
        let x = design(&[a, zero]);
        let f = fit(&GlmSpec::new(Link::Logit, ["a", "zero"]), &x, &y, &FitOptions::default()).unwrap();
        assert!(f.diagnostics.ridge_applied);
        assert!(f.converged);
        assert_eq!(f.coefficients[2], 0.0);
        assert_eq!(f.significance[2], Significance::Insignificant);
    }

    #[test]
    fn wald_examples() {
        let crit = normal_quantile(0.975).unwrap();
        assert!((crit - 1.959964).abs() < 1e-6);
        assert_eq!(classify_z(2.0, 0.5, crit), Significance::Positive);
        assert_eq!(classify_z(-1.0, 0.6, crit), Significance::Insignificant);
        assert_eq!(classify_z(-3.0, 0.6, crit), Significance::Negative);
        assert_eq!(classify_z(0.0, 0.6, crit), Significance::Insignificant);
        assert_eq!(classify_z(5.0, 0.0, crit), Significance::Insignificant);
    }

    #[test]
    fn rho2_examples() {
        assert_eq!(mcfadden_rho2(-100.0, -100.0).unwrap(), 0.0);
        assert!((mcfadden_rho2(-90.0, -100.0).unwrap() - 0.1).abs() < 1e-15);
        assert!(mcfadden_rho2(-1.0, 0.0).is_err());
    }

    #[test]
    fn odds_examples() {
        assert_eq!(odds_effect(0.0, 0.001), 0.0);
        assert!((odds_effect(-256.1, 0.001) * 100.0 + 22.6).abs() < 0.05);
        assert!((odds_effect(-272.5, 0.001) * 100.0 + 23.9).abs() < 0.05);
    }

    #[test]
    fn classification_threshold_is_inclusive() {
        let f = GlmFit {
            link: Link::Logit,
            names: vec!["const".into()],
            n_obs: 2,
            coefficients: vec![0.0],
            std_errors: vec![1.0],
            z_stats: vec![0.0],
            significance: vec![Significance::Insignificant],
            covariance: vec![vec![1.0]],
            loglik: -1.0,
            loglik_null: -1.0,
            rho_square: 0.0,
            accuracy: 0.0,
            converged: true,
            iterations: 0,
            reason: None,
            diagnostics: FitDiagnostics::default(),
        };
        let x = DMatrix::from_element(2, 1, 1.0);
        assert_eq!(classify_and_score(&f, &x, &[true, true]), 1.0);
        assert_eq!(classify_and_score(&f, &x, &[true, false]), 0.5);
    }

    #[test]
    fn probit_terms_match_finite_differences() {
        for &eta in &[-35.0, -12.0, -3.0, -0.4, 0.0, 0.7, 4.0, 9.0] {
            for y in [true, false] {
                for link in [Link::Logit, Link::Probit] {
                    let (_, d1, d2) = link.terms(eta, y);
                    let h = 1e-5;
                    let fd1 = (link.loglik_term(eta + h, y) - link.loglik_term(eta - h, y)) / (2.0 * h);
                    let fd2 = (link.terms(eta + h, y).1 - link.terms(eta - h, y).1) / (2.0 * h);
                    assert!((d1 - fd1).abs() <= 1e-5 * d1.abs().max(1.0), "{link} d1 at {eta} {y}");
                    assert!((d2 - fd2).abs() <= 1e-4 * d2.abs().max(1e-3), "{link} d2 at {eta} {y}: {d2} vs {fd2}");
                }
            }
        }
    }
}
