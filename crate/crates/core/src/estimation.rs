//! Maximum-likelihood fitting of marginal log-linear models.
//!
//! Two algorithms: a Lagrange-multiplier iteration on log m, and Fisher scoring
//! on the free parameters with an inner inversion of λ to m. Counts are treated
//! as Poisson during optimization; for models leaving λ_∅ free the fitted total
//! equals the observed total, so the multinomial results coincide.

use log::warn;
use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{MllError, Result};
use crate::modelspec::ModelSpec;
use crate::parameterization::{InvertOptions, Linearization, Parameterization};
use crate::table::{Table, TableKind};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Algorithm {
    #[default]
    Lagrangian,
    Scoring,
}

impl Algorithm {
    pub fn parse(s: &str) -> Option<Algorithm> {
        match s.to_ascii_lowercase().as_str() {
            "lagrangian" | "lagrange" => Some(Algorithm::Lagrangian),
            "scoring" | "fisher" => Some(Algorithm::Scoring),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Lagrangian => "lagrangian",
            Algorithm::Scoring => "scoring",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    pub algorithm: Algorithm,
    /// Replacement for zero observed counts.
    pub zero_cell_epsilon: f64,
    pub tol_constraint: f64,
    /// Bound on the cell-scale score |m·u| (Lagrangian) or the cell change per step (scoring).
    pub tol_score: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Scoring uses the direct λ update above this many components.
    pub direct_update_threshold: usize,
    /// IPF sweep budget of each inner inversion during scoring.
    pub inner_sweeps: usize,
    /// Compute full covariance matrices of m̂, λ̂ and β̂.
    pub covariances: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            algorithm: Algorithm::Lagrangian,
            zero_cell_epsilon: 1e-6,
            tol_constraint: 1e-8,
            tol_score: 1e-8,
            max_iter: 5000,
            max_halvings: 30,
            direct_update_threshold: 64,
            inner_sweeps: 500,
            covariances: true,
        }
    }
}

impl FitOptions {
    fn validate(&self) -> Result<()> {
        if !(self.zero_cell_epsilon > 0.0 && self.zero_cell_epsilon < 1.0) {
            return Err(MllError::Invalid("zero-cell epsilon must lie in (0, 1)".into()));
        }
        if !(self.tol_constraint > 0.0 && self.tol_score > 0.0) {
            return Err(MllError::Invalid("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub algorithm: Algorithm,
    pub m_hat: Table,
    pub lambda_hat: Vec<f64>,
    /// (X′X)⁻¹X′λ̂, when X is available.
    pub beta_hat: Option<Vec<f64>>,
    pub cov_m: Option<DMatrix<f64>>,
    pub cov_m_diag: Vec<f64>,
    pub cov_lambda: Option<DMatrix<f64>>,
    pub cov_beta: Option<DMatrix<f64>>,
    pub g2: f64,
    pub df: usize,
    pub p_value: f64,
    pub bic: f64,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub max_constraint_violation: f64,
    /// Number of observed zeros replaced by the epsilon.
    pub epsilon_cells: usize,
}

impl FitResult {
    /// Standard errors of λ̂ (requires covariances).
    pub fn lambda_se(&self) -> Option<Vec<f64>> {
        self.cov_lambda
            .as_ref()
            .map(|c| (0..c.nrows()).map(|i| c[(i, i)].max(0.0).sqrt()).collect())
    }
}

fn loglik_cells(m: &[f64], n: &[f64]) -> f64 {
    m.iter()
        .zip(n)
        .map(|(&mi, &ni)| if ni > 0.0 { ni * mi.ln() - mi } else { -mi })
        .sum()
}

/// n′log m − 1′m.
pub fn loglik(m: &Table, n: &Table) -> Result<f64> {
    if m.scheme() != n.scheme() {
        return Err(MllError::Invalid("tables have different schemes".into()));
    }
    if !m.is_positive() {
        return Err(MllError::Positivity("expected frequencies".into()));
    }
    Ok(loglik_cells(m.cells(), n.cells()))
}

/// 2 Σ n log(n/m) with 0 log 0 = 0.
pub fn g2_statistic(n: &[f64], m: &[f64]) -> f64 {
    let g: f64 = n
        .iter()
        .zip(m)
        .filter(|(ni, _)| **ni > 0.0)
        .map(|(ni, mi)| 2.0 * ni * (ni / mi).ln())
        .sum();
    g.max(0.0)
}

/// Upper-tail chi-square probability; 1 for zero degrees of freedom.
pub fn chi_square_sf(x: f64, df: usize) -> f64 {
    if df == 0 {
        return 1.0;
    }
    let d = ChiSquared::new(df as f64).expect("positive degrees of freedom");
    (1.0 - d.cdf(x.max(0.0))).clamp(0.0, 1.0)
}

/// G² + 2·df·log N.
pub fn bic(g2: f64, df: usize, n_total: f64) -> f64 {
    g2 + 2.0 * df as f64 * n_total.ln()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrTest {
    pub g2: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Likelihood-ratio test of the restricted fit `fit0` against `fit1`.
pub fn lr_test(fit0: &FitResult, fit1: &FitResult, n: &Table) -> Result<LrTest> {
    if fit0.m_hat.scheme() != n.scheme() || fit1.m_hat.scheme() != n.scheme() {
        return Err(MllError::Invalid("fits and counts have different schemes".into()));
    }
    let l0 = loglik(&fit0.m_hat, n)?;
    let l1 = loglik(&fit1.m_hat, n)?;
    let raw = 2.0 * (l1 - l0);
    if raw < -1e-8 {
        warn!("negative likelihood-ratio statistic {raw:.3e}; models may not be nested");
    }
    let g2 = raw.max(0.0);
    let df = fit0.df.saturating_sub(fit1.df);
    Ok(LrTest { g2, df, p_value: chi_square_sf(g2, df) })
}

fn solve_spd(w: &DMatrix<f64>, rhs: &DMatrix<f64>) -> DMatrix<f64> {
    if w.nrows() == 0 {
        return DMatrix::zeros(0, rhs.ncols());
    }
    if let Some(ch) = w.clone().cholesky() {
        return ch.solve(rhs);
    }
    warn!("singular constraint information; adding a 1e-10 ridge");
    let ridged = w + DMatrix::identity(w.nrows(), w.ncols()) * 1e-10;
    if let Some(ch) = ridged.clone().cholesky() {
        return ch.solve(rhs);
    }
    let pinv = w.clone().pseudo_inverse(1e-12).expect("pseudo-inverse of a square matrix");
    pinv * rhs
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn constraint_values(c: &DMatrix<f64>, lambda: &[f64]) -> DVector<f64> {
    c.transpose() * DVector::from_column_slice(lambda)
}

fn prepare(n: &Table, spec: &ModelSpec, opts: &FitOptions) -> Result<(Vec<f64>, usize)> {
    opts.validate()?;
    if n.scheme() != spec.param.scheme() {
        return Err(MllError::Invalid("counts and model have different schemes".into()));
    }
    let mut zeros = 0;
    let n_eps = n
        .cells()
        .iter()
        .map(|&v| {
            if v > 0.0 {
                v
            } else {
                zeros += 1;
                opts.zero_cell_epsilon
            }
        })
        .collect();
    if zeros > 0 {
        log::info!(
            "{zeros} zero cells replaced by {:e}; check sensitivity at {:e}",
            opts.zero_cell_epsilon,
            opts.zero_cell_epsilon / 10.0
        );
    }
    Ok((n_eps, zeros))
}

pub fn fit(n: &Table, spec: &ModelSpec, opts: &FitOptions) -> Result<FitResult> {
    match opts.algorithm {
        Algorithm::Lagrangian => fit_lagrangian(n, spec, opts),
        Algorithm::Scoring => fit_scoring(n, spec, opts),
    }
}

struct LagrangeState {
    lin: Linearization,
    u: Vec<f64>,
    norm: f64,
    cell_score: f64,
    violation: f64,
}

fn lagrange_state(param: &Parameterization, c: &DMatrix<f64>, n: &[f64], m: &[f64]) -> Result<LagrangeState> {
    let lin = param.linearize(m)?;
    let lambda = param.lambda_at(&lin);
    let cl = constraint_values(c, &lambda);
    let mut u: Vec<f64> = n.iter().zip(m).map(|(a, b)| a / b - 1.0).collect();
    if c.ncols() > 0 {
        let lc = param.jacobian_times_matrix(&lin, c);
        let resid = DVector::from_iterator(n.len(), n.iter().zip(m).map(|(a, b)| a - b));
        let dlc = DMatrix::from_fn(lc.nrows(), lc.ncols(), |i, j| lc[(i, j)] * m[i].sqrt());
        let w = dlc.transpose() * &dlc;
        let rhs = lc.transpose() * resid + &cl;
        let tau = solve_spd(&w, &DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice()));
        let corr = &lc * tau;
        for (ui, ci) in u.iter_mut().zip(corr.iter()) {
            *ui -= ci;
        }
    }
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let cell_score = u.iter().zip(m).fold(0.0f64, |a, (ui, mi)| a.max((ui * mi).abs()));
    Ok(LagrangeState { lin, u, norm, cell_score, violation: max_abs(cl.as_slice()) })
}

/// Lagrange-multiplier iteration log m ← log m + step·u(m).
pub fn fit_lagrangian(n: &Table, spec: &ModelSpec, opts: &FitOptions) -> Result<FitResult> {
    let (n_eps, zeros) = prepare(n, spec, opts)?;
    let param = &spec.param;
    let c = &spec.c;
    let mut m: Vec<f64> = n.cells().iter().map(|v| v + opts.zero_cell_epsilon).collect();
    let mut st = lagrange_state(param, c, &n_eps, &m)?;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        if st.cell_score < opts.tol_score && st.violation < opts.tol_constraint {
            converged = true;
            break;
        }
        iterations += 1;
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = m.iter().zip(&st.u).map(|(mi, ui)| mi * (step * ui).exp()).collect();
            if trial.iter().all(|v| v.is_finite() && *v > 0.0) {
                if let Ok(ts) = lagrange_state(param, c, &n_eps, &trial) {
                    if ts.norm < st.norm {
                        accepted = Some((trial, ts));
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        match accepted {
            Some((mt, ts)) => {
                m = mt;
                st = ts;
            }
            None => {
                warn!("Lagrangian iteration stalled after {iterations} iterations (|u| = {:.3e})", st.norm);
                break;
            }
        }
    }
    if !converged && st.cell_score < opts.tol_score && st.violation < opts.tol_constraint {
        converged = true;
    }
    finish(n, spec, opts, m, Some(st.lin), iterations, converged, zeros)
}

/// Spec's constraints expressed over the parameterization that includes λ_∅.
fn frequency_scale(spec: &ModelSpec) -> Result<(Parameterization, DMatrix<f64>)> {
    if spec.param.include_empty() {
        return Ok((spec.param.clone(), spec.c.clone()));
    }
    let pf = spec.param.with_empty(true)?;
    let k = pf.n_components();
    let mut c = DMatrix::zeros(k, spec.c.ncols());
    c.rows_mut(1, k - 1).copy_from(&spec.c);
    Ok((pf, c))
}

fn project(c: &DMatrix<f64>, zero: Option<&[usize]>, shift: usize, lambda: &mut [f64]) {
    if let Some(z) = zero {
        for &k in z {
            lambda[k + shift] = 0.0;
        }
        return;
    }
    if c.ncols() == 0 {
        return;
    }
    let cl = constraint_values(c, lambda);
    let g = c.transpose() * c;
    let coef = g.pseudo_inverse(1e-12).expect("square") * cl;
    let corr = c * coef;
    for (l, d) in lambda.iter_mut().zip(corr.iter()) {
        *l -= d;
    }
}

/// Fisher scoring on λ = Xβ with an inner inversion at every step.
pub fn fit_scoring(n: &Table, spec: &ModelSpec, opts: &FitOptions) -> Result<FitResult> {
    let (n_eps, zeros) = prepare(n, spec, opts)?;
    let (pf, cf) = frequency_scale(spec)?;
    let shift = if spec.param.include_empty() { 0 } else { 1 };
    let inv_opts = InvertOptions { max_iter: opts.inner_sweeps, ..InvertOptions::default() };
    let k = pf.n_components();
    let dense = k <= opts.direct_update_threshold;
    let x = if dense { Some(full_design(spec, &cf, shift)) } else { None };

    let mut lambda = pf.lambda_of_frequencies(&n_eps)?;
    project(&cf, spec.zero_components(), shift, &mut lambda);
    let (t0, _) = pf.invert_frequencies(&lambda, &inv_opts)?;
    let mut m = t0.into_cells();
    let mut ll = loglik_cells(&m, &n_eps);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        let lin = pf.linearize(&m)?;
        let resid: Vec<f64> = n_eps.iter().zip(&m).map(|(a, b)| a - b).collect();
        let delta = match &x {
            Some(x) => beta_step(&pf, &lin, x, &m, &resid)?,
            None => direct_step(&pf, &lin, &cf, &m, &resid),
        };
        if max_abs(&delta) < 1e-14 {
            converged = true;
            break;
        }
        iterations += 1;
        let m_old = m.clone();
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let mut trial: Vec<f64> = lambda.iter().zip(&delta).map(|(l, d)| l + step * d).collect();
            project(&cf, spec.zero_components(), shift, &mut trial);
            if let Ok((t, _)) = pf.invert_frequencies(&trial, &inv_opts) {
                let cells = t.into_cells();
                let ll_new = loglik_cells(&cells, &n_eps);
                if ll_new >= ll - 1e-12 * ll.abs().max(1.0) {
                    lambda = trial;
                    m = cells;
                    ll = ll_new;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            warn!("scoring iteration stalled after {iterations} iterations");
            break;
        }
        if m.iter().zip(&m_old).all(|(a, b)| (a - b).abs() < opts.tol_score) {
            converged = true;
            break;
        }
    }
    finish(n, spec, opts, m, None, iterations, converged, zeros)
}

/// X over the frequency-scale components (λ_∅ free).
fn full_design(spec: &ModelSpec, cf: &DMatrix<f64>, shift: usize) -> DMatrix<f64> {
    if shift == 0 {
        return spec.x();
    }
    let x = spec.x();
    let k = cf.nrows();
    let mut out = DMatrix::zeros(k, x.ncols() + 1);
    out[(0, 0)] = 1.0;
    out.view_mut((1, 1), (k - 1, x.ncols())).copy_from(&x);
    out
}

fn beta_step(
    pf: &Parameterization,
    lin: &Linearization,
    x: &DMatrix<f64>,
    m: &[f64],
    resid: &[f64],
) -> Result<Vec<f64>> {
    let k = pf.n_components();
    let lam = pf.jacobian_times_matrix(lin, &DMatrix::identity(k, k));
    let lu = lam.lu();
    // Λ⁻ᵀX
    let g = lam_inverse_transpose(&lu, x)?;
    let d = DVector::from_iterator(m.len(), resid.iter().zip(m).map(|(r, mi)| r / mi));
    let s = g.transpose() * &d;
    let gd = DMatrix::from_fn(g.nrows(), g.ncols(), |i, j| g[(i, j)] / m[i].sqrt());
    let info = gd.transpose() * &gd;
    let db = solve_spd(&info, &DMatrix::from_column_slice(s.len(), 1, s.as_slice()));
    Ok((x * db).iter().copied().collect())
}

fn lam_inverse_transpose(lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inv = lu
        .try_inverse()
        .ok_or_else(|| MllError::Numerical("Jacobian of the parameterization is singular".into()))?;
    Ok(inv.transpose() * x)
}

fn direct_step(pf: &Parameterization, lin: &Linearization, c: &DMatrix<f64>, m: &[f64], resid: &[f64]) -> Vec<f64> {
    let mut delta = pf.jacobian_transpose_times(lin, resid);
    if c.ncols() == 0 {
        return delta;
    }
    let lc = pf.jacobian_times_matrix(lin, c);
    let dlc = DMatrix::from_fn(lc.nrows(), lc.ncols(), |i, j| lc[(i, j)] * m[i]);
    let w = lc.transpose() * &dlc;
    let r = DVector::from_column_slice(resid);
    let rhs = lc.transpose() * r;
    let t = solve_spd(&w, &DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice()));
    let v: Vec<f64> = (&dlc * t).iter().copied().collect();
    let corr = pf.jacobian_transpose_times(lin, &v);
    for (d, cval) in delta.iter_mut().zip(corr) {
        *d -= cval;
    }
    delta
}

#[allow(clippy::too_many_arguments)]
fn finish(
    n: &Table,
    spec: &ModelSpec,
    opts: &FitOptions,
    m: Vec<f64>,
    lin: Option<Linearization>,
    iterations: usize,
    converged: bool,
    epsilon_cells: usize,
) -> Result<FitResult> {
    let param = &spec.param;
    let lin = match lin {
        Some(l) => l,
        None => param.linearize(&m)?,
    };
    let lambda_hat = param.lambda_at(&lin);
    let max_constraint_violation = spec.max_violation(&lambda_hat);
    let total = n.total();
    let fitted: f64 = m.iter().sum();
    if total > 0.0 && ((fitted - total) / total).abs() > 1e-8 {
        warn!("fitted total {fitted} differs from observed total {total}");
    }
    let df = spec.df();
    let g2 = g2_statistic(n.cells(), &m);
    let c = &spec.c;
    let k = param.n_components();

    let lc = if c.ncols() > 0 { Some(param.jacobian_times_matrix(&lin, c)) } else { None };
    let winv_lct = lc.as_ref().map(|lc| {
        let dlc = DMatrix::from_fn(lc.nrows(), lc.ncols(), |i, j| lc[(i, j)] * m[i].sqrt());
        let w = dlc.transpose() * &dlc;
        solve_spd(&w, &lc.transpose())
    });
    let cov_m_diag: Vec<f64> = (0..m.len())
        .map(|i| {
            let mut v = m[i] - m[i] * m[i] / total.max(f64::MIN_POSITIVE);
            if let (Some(lc), Some(wl)) = (&lc, &winv_lct) {
                let q: f64 = (0..lc.ncols()).map(|j| lc[(i, j)] * wl[(j, i)]).sum();
                v -= m[i] * m[i] * q;
            }
            v
        })
        .collect();

    let x_cheap = spec.zero_components().is_some() || k <= 4096;
    let beta_of = |x: &DMatrix<f64>| -> Vec<f64> {
        let xtx = x.transpose() * x;
        let rhs = x.transpose() * DVector::from_column_slice(&lambda_hat);
        solve_spd(&xtx, &DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice())).iter().copied().collect()
    };
    let (mut cov_m, mut cov_lambda, mut cov_beta, mut beta_hat) = (None, None, None, None);
    if opts.covariances {
        let nm = m.len();
        let mut cm = DMatrix::from_fn(nm, nm, |i, j| {
            let d = if i == j { m[i] } else { 0.0 };
            d - m[i] * m[j] / total
        });
        if let (Some(lc), Some(wl)) = (&lc, &winv_lct) {
            let corr = lc * wl;
            for i in 0..nm {
                for j in 0..nm {
                    cm[(i, j)] -= m[i] * corr[(i, j)] * m[j];
                }
            }
        }
        let lam = param.jacobian_times_matrix(&lin, &DMatrix::identity(k, k));
        let cl = lam.transpose() * &cm * &lam;
        let x = spec.x();
        let xtx_inv = solve_spd(&(x.transpose() * &x), &DMatrix::identity(x.ncols(), x.ncols()));
        let h = &xtx_inv * x.transpose();
        cov_beta = Some(&h * &cl * h.transpose());
        beta_hat = Some(beta_of(&x));
        cov_lambda = Some(cl);
        cov_m = Some(cm);
    } else if x_cheap {
        beta_hat = Some(beta_of(&spec.x()));
    }
    let loglik = loglik_cells(&m, n.cells());
    let m_hat = Table::new(param.scheme().clone(), m, TableKind::Counts)?;
    Ok(FitResult {
        algorithm: opts.algorithm,
        m_hat,
        lambda_hat,
        beta_hat,
        cov_m,
        cov_m_diag,
        cov_lambda,
        cov_beta,
        g2,
        df,
        p_value: chi_square_sf(g2, df),
        bic: bic(g2, df, total),
        loglik,
        iterations,
        converged,
        max_constraint_violation,
        epsilon_cells,
    })
}

/// Largest entry of the projected score X′Λ⁻¹(n/m − 1) over the frequency-scale parameterization.
pub fn projected_score(spec: &ModelSpec, n: &Table, m: &Table) -> Result<f64> {
    let (pf, cf) = frequency_scale(spec)?;
    let shift = if spec.param.include_empty() { 0 } else { 1 };
    let x = full_design(spec, &cf, shift);
    let lin = pf.linearize(m.cells())?;
    let k = pf.n_components();
    let lam = pf.jacobian_times_matrix(&lin, &DMatrix::identity(k, k));
    let g = lam_inverse_transpose(&lam.lu(), &x)?;
    let d = DVector::from_iterator(
        m.cells().len(),
        n.cells().iter().zip(m.cells()).map(|(a, b)| a / b - 1.0),
    );
    Ok(max_abs((g.transpose() * d).as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modelspec::zero_effect_model;
    use crate::table::{MarginalSequence, VariableScheme};
    use crate::CodingKind;

    #[test]
    fn loglik_at_counts() {
        let s = VariableScheme::binary(&["A", "B"]).unwrap();
        let n = Table::counts(s.clone(), vec![20.0, 80.0, 10.0, 90.0]).unwrap();
        let direct: f64 = [20.0f64, 80.0, 10.0, 90.0].iter().map(|v| v * v.ln()).sum::<f64>() - 200.0;
        assert!((loglik(&n, &n).unwrap() - direct).abs() < 1e-10);
        let m = Table::counts(s, vec![50.0; 4]).unwrap();
        assert!(loglik(&n, &n).unwrap() > loglik(&m, &n).unwrap());
    }

    #[test]
    fn bic_and_chi_square() {
        assert_eq!(bic(0.0, 0, 100.0), 0.0);
        assert!((bic(3.0, 1, 100.0) - (3.0 + 2.0 * 100f64.ln())).abs() < 1e-12);
        assert_eq!(chi_square_sf(1.0, 0), 1.0);
        assert!((chi_square_sf(3.841458820694124, 1) - 0.05).abs() < 1e-9);
    }

    #[test]
    fn saturated_fit_reproduces_counts() {
        let s = VariableScheme::binary(&["A", "B"]).unwrap();
        let p = Parameterization::build(&s, &MarginalSequence::saturated(&s), CodingKind::Local).unwrap();
        let spec = zero_effect_model(&p, &[]).unwrap();
        let n = Table::counts(s, vec![5.0, 7.0, 9.0, 11.0]).unwrap();
        for algorithm in [Algorithm::Lagrangian, Algorithm::Scoring] {
            let f = fit(&n, &spec, &FitOptions { algorithm, ..Default::default() }).unwrap();
            assert!(f.converged);
            for (a, b) in f.m_hat.cells().iter().zip(n.cells()) {
                assert!((a - b).abs() < 1e-5);
            }
            assert!(f.iterations <= 2);
            assert_eq!(f.df, 0);
        }
    }
}
