//! Generalized estimating equations for marginal log-linear models.
//!
//! The estimating equations live on the stacked marginal vector y = Mᵀn of the
//! marginals that carry the model; the joint table is never formed. With
//! η = log μ and H = BC restricted to those marginals, the multiplier form solves
//!
//! ```text
//! y − μ + Ṽ D_μ⁻¹ H τ = 0,    Hᵀη = 0
//! ```
//!
//! by Newton–Raphson, Ṽ being a working covariance built from pairwise
//! models for the unions of two marginals. The freedom form solves
//! Wᵀ D_μ Ṽ⁻¹ (y − μ) = 0 with η = Wγ and W spanning the null space of Hᵀ;
//! both agree whenever Ṽ is invertible.

use std::collections::HashMap;
use std::sync::Arc;

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::{MllError, Result};
use crate::modelspec::{column_basis, complement_of_orthonormal, ModelSpec};
use crate::parameterization::{relative, MarginalBlock};
use crate::table::{scatter_sum, Effect, Table, VariableScheme};

/// Expected frequencies of the union of two marginals, given fitted marginal
/// tables for each (cells in lexicographic order of the union's variables).
pub trait PairModel: Send + Sync {
    fn pair_table(&self, scheme: &VariableScheme, mi: Effect, mu_i: &[f64], mj: Effect, mu_j: &[f64]) -> Result<Vec<f64>>;
}

/// (Mi∖Mj) ⫫ (Mj∖Mi) | Mi∩Mj, in closed form.
#[derive(Clone, Copy, Debug, Default)]
pub struct PairwiseIndependence;

impl PairModel for PairwiseIndependence {
    fn pair_table(&self, scheme: &VariableScheme, mi: Effect, mu_i: &[f64], mj: Effect, mu_j: &[f64]) -> Result<Vec<f64>> {
        let u = mi.union(mj);
        let s = mi.intersection(mj);
        let pi = sub_map(scheme, u, mi);
        let pj = sub_map(scheme, u, mj);
        let ps = sub_map(scheme, u, s);
        let qs = if s.is_empty() { 1 } else { scheme.marginal_cells(s) };
        let si = scatter_sum(mu_i, &sub_map(scheme, mi, s), qs);
        let sj = scatter_sum(mu_j, &sub_map(scheme, mj, s), qs);
        let ms: Vec<f64> = si.iter().zip(&sj).map(|(a, b)| 0.5 * (a + b)).collect();
        Ok((0..pi.len()).map(|c| mu_i[pi[c]] * mu_j[pj[c]] / ms[ps[c]]).collect())
    }
}

/// Pair tables taken as margins of a fixed joint table of expected frequencies.
#[derive(Clone, Debug)]
pub struct FixedJoint(pub Table);

impl PairModel for FixedJoint {
    fn pair_table(&self, scheme: &VariableScheme, mi: Effect, _: &[f64], mj: Effect, _: &[f64]) -> Result<Vec<f64>> {
        if self.0.scheme() != scheme {
            return Err(MllError::Invalid("fixed joint table has a different scheme".into()));
        }
        Ok(self.0.marginalize(mi.union(mj))?.into_cells())
    }
}

#[derive(Clone)]
pub enum WorkingModel {
    PairwiseIndependence,
    Fixed(Table),
    Custom(Arc<dyn PairModel>),
}

impl std::fmt::Debug for WorkingModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WorkingModel::PairwiseIndependence => f.write_str("PairwiseIndependence"),
            WorkingModel::Fixed(_) => f.write_str("Fixed(..)"),
            WorkingModel::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl WorkingModel {
    fn pair_model(&self) -> Arc<dyn PairModel> {
        match self {
            WorkingModel::PairwiseIndependence => Arc::new(PairwiseIndependence),
            WorkingModel::Fixed(t) => Arc::new(FixedJoint(t.clone())),
            WorkingModel::Custom(p) => p.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeeForm {
    /// y − μ + Ṽ D_μ⁻¹ H τ = 0; works for singular Ṽ.
    Multiplier,
    /// Wᵀ D_μ Ṽ⁻¹ (y − μ) = 0; needs Ṽ invertible.
    Freedom,
}

#[derive(Clone, Debug)]
pub struct GeeOptions {
    pub working: WorkingModel,
    pub form: GeeForm,
    /// Subtract μμᵀ/N from Mᵀ D_m M in the working covariance.
    pub centered: bool,
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    pub zero_cell_epsilon: f64,
}

impl Default for GeeOptions {
    fn default() -> Self {
        GeeOptions {
            working: WorkingModel::PairwiseIndependence,
            form: GeeForm::Multiplier,
            centered: true,
            tol: 1e-8,
            max_iter: 500,
            max_halvings: 30,
            zero_cell_epsilon: 1e-6,
        }
    }
}

impl GeeOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.zero_cell_epsilon > 0.0) || self.max_iter == 0 {
            return Err(MllError::Invalid("GEE tolerances and iteration limits must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct GeeResult {
    /// β̃ in the orthonormal freedom basis of [`GeeProblem::design`].
    pub beta_tilde: Vec<f64>,
    /// Components of the modelled marginals, indexed as [`GeeProblem::components`].
    pub lambda_tilde: Vec<f64>,
    /// Fitted marginal tables, one per modelled marginal.
    pub mu_tilde: Vec<Vec<f64>>,
    /// Fitted stacked aggregates (marginal cells then lumped sums, per marginal).
    pub aggregates: Vec<f64>,
    pub tau: Vec<f64>,
    pub sandwich_cov: DMatrix<f64>,
    pub model_cov: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub max_constraint_violation: f64,
}

impl GeeResult {
    pub fn sandwich_se(&self) -> Vec<f64> {
        self.sandwich_cov.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect()
    }
}

/// Observed marginal tables needed by a [`GeeProblem`].
#[derive(Clone, Debug)]
pub struct GeeData {
    tables: HashMap<u32, Vec<f64>>,
    total: f64,
}

impl GeeData {
    pub fn total(&self) -> f64 {
        self.total
    }

    fn get(&self, e: Effect) -> &[f64] {
        &self.tables[&e.bits()]
    }
}

/// The marginal-level structure of a model, shared by repeated fits.
#[derive(Clone, Debug)]
pub struct GeeProblem {
    scheme: VariableScheme,
    blocks: Vec<MarginalBlock>,
    offsets: Vec<usize>,
    dim: usize,
    components: Vec<usize>,
    /// stacked aggregates × modelled components
    b: DMatrix<f64>,
    /// orthonormal basis of the constraint directions on η
    h: DMatrix<f64>,
    /// orthonormal freedom basis for the modelled components
    x: DMatrix<f64>,
}

fn sub_map(scheme: &VariableScheme, outer: Effect, inner: Effect) -> Vec<usize> {
    if inner.is_empty() {
        return vec![0; scheme.marginal_cells(outer)];
    }
    if inner == outer {
        return (0..scheme.marginal_cells(outer)).collect();
    }
    scheme.sub_scheme(outer).expect("valid marginal").marginal_index_map(relative(inner, outer))
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn solve(a: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(x) = a.clone().lu().solve(rhs) {
        if x.iter().all(|v| v.is_finite()) {
            return Ok(x);
        }
    }
    warn!("singular GEE system; adding a ridge");
    let scale = a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let ridged = a + DMatrix::identity(a.nrows(), a.ncols()) * (1e-10 * scale);
    ridged
        .lu()
        .solve(rhs)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| MllError::Numerical("GEE system is singular".into()))
}

impl GeeProblem {
    /// Marginals of the sequence carrying the model: all of them except a final
    /// full table that houses no constrained component.
    pub fn new(spec: &ModelSpec) -> Result<Self> {
        let param = &spec.param;
        let scheme = param.scheme().clone();
        let all = param.marginal_blocks();
        let constrained: Vec<bool> = (0..spec.c.nrows()).map(|k| spec.c.row(k).iter().any(|v| *v != 0.0)).collect();
        let keep = |b: &MarginalBlock| {
            b.marginal != scheme.full() || all.len() == 1 || b.components.iter().any(|&k| constrained[k])
        };
        let blocks: Vec<MarginalBlock> = all.iter().filter(|b| keep(b)).cloned().collect();
        let components: Vec<usize> = blocks.iter().flat_map(|b| b.components.iter().copied()).collect();
        if let Some(k) = (0..constrained.len()).find(|&k| constrained[k] && !components.contains(&k)) {
            return Err(MllError::Invalid(format!("constraint on {} outside the modelled marginals", param.label(k))));
        }
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut dim = 0;
        for b in &blocks {
            offsets.push(dim);
            dim += b.aggregator.ncols();
        }
        let mut b = DMatrix::zeros(dim, components.len());
        for (bi, blk) in blocks.iter().enumerate() {
            for (j, &k) in components.iter().enumerate() {
                for r in 0..blk.contrasts.nrows() {
                    b[(offsets[bi] + r, j)] = blk.contrasts[(r, k)];
                }
            }
        }
        let ck = DMatrix::from_fn(components.len(), spec.c.ncols(), |i, j| spec.c[(components[i], j)]);
        let cb = column_basis(&ck);
        let x = complement_of_orthonormal(&cb);
        let h = column_basis(&(&b * &cb));
        Ok(GeeProblem { scheme, blocks, offsets, dim, components, b, h, x })
    }

    pub fn marginals(&self) -> Vec<Effect> {
        self.blocks.iter().map(|b| b.marginal).collect()
    }

    /// Indices (into the full parameterization) of the modelled components.
    pub fn components(&self) -> &[usize] {
        &self.components
    }

    /// Orthonormal freedom basis X with λ = Xβ on the modelled components.
    pub fn design(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_constraints(&self) -> usize {
        self.h.ncols()
    }

    /// β = Xᵀλ for a full-length λ.
    pub fn beta_from_lambda(&self, lambda: &[f64]) -> Vec<f64> {
        let lk = DVector::from_iterator(self.components.len(), self.components.iter().map(|&k| lambda[k]));
        (self.x.transpose() * lk).iter().copied().collect()
    }

    /// Covariance of β from a full-size covariance of λ.
    pub fn beta_cov_from_lambda_cov(&self, cov: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.components.len();
        let ck = DMatrix::from_fn(n, n, |i, j| cov[(self.components[i], self.components[j])]);
        self.x.transpose() * ck * &self.x
    }

    fn needed(&self) -> Vec<Effect> {
        let mut out: Vec<Effect> = Vec::new();
        for bi in &self.blocks {
            for bj in &self.blocks {
                let u = bi.marginal.union(bj.marginal);
                if !out.contains(&u) {
                    out.push(u);
                }
            }
        }
        out
    }

    /// Observed marginals (modelled ones and pairwise unions) of a full table.
    pub fn data_from_table(&self, n: &Table) -> Result<GeeData> {
        if n.scheme() != &self.scheme {
            return Err(MllError::Invalid("counts and model have different schemes".into()));
        }
        let mut tables = HashMap::new();
        for e in self.needed() {
            tables.insert(e.bits(), n.marginalize(e)?.into_cells());
        }
        Ok(GeeData { tables, total: n.total() })
    }

    /// Observed marginals from marginal tables covering every pairwise union.
    pub fn data_from_marginals(&self, margins: &[Table]) -> Result<GeeData> {
        let mut have = Vec::with_capacity(margins.len());
        for t in margins {
            let e = self.scheme.effect_from_names(t.scheme().names())?;
            if t.scheme() != &self.scheme.sub_scheme(e)? {
                return Err(MllError::Invalid(format!("marginal table {} has mismatched levels", self.scheme.effect_label(e))));
            }
            have.push((e, t));
        }
        let mut tables = HashMap::new();
        for e in self.needed() {
            let (outer, t) = have
                .iter()
                .find(|(o, _)| e.is_subset_of(*o))
                .ok_or_else(|| MllError::Invalid(format!("no observed table covers {}", self.scheme.effect_label(e))))?;
            let cells = scatter_sum(t.cells(), &sub_map(&self.scheme, *outer, e), self.scheme.marginal_cells(e));
            tables.insert(e.bits(), cells);
        }
        let total = have.first().map(|(_, t)| t.total()).unwrap_or(0.0);
        Ok(GeeData { tables, total })
    }

    /// Stacked aggregates of per-marginal tables.
    fn stack(&self, tables: &[&[f64]]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        for (bi, blk) in self.blocks.iter().enumerate() {
            let a = blk.aggregator.transpose() * DVector::from_column_slice(tables[bi]);
            y[self.offsets[bi]..self.offsets[bi] + a.len()].copy_from_slice(a.as_slice());
        }
        y
    }

    fn observed(&self, data: &GeeData) -> Vec<f64> {
        let tabs: Vec<&[f64]> = self.blocks.iter().map(|b| data.get(b.marginal)).collect();
        self.stack(&tabs)
    }

    fn marginal_tables(&self, mu: &[f64]) -> Vec<Vec<f64>> {
        self.blocks
            .iter()
            .zip(&self.offsets)
            .map(|(b, &o)| mu[o..o + b.aggregator.nrows()].to_vec())
            .collect()
    }

    /// Block (i, j) of Mᵀ D M from the union table over Mi ∪ Mj.
    fn cross_block(&self, i: usize, j: usize, union: &[f64]) -> DMatrix<f64> {
        let (bi, bj) = (&self.blocks[i], &self.blocks[j]);
        let u = bi.marginal.union(bj.marginal);
        let pi = sub_map(&self.scheme, u, bi.marginal);
        let pj = sub_map(&self.scheme, u, bj.marginal);
        let mut q = DMatrix::zeros(bi.aggregator.nrows(), bj.aggregator.nrows());
        for (c, &w) in union.iter().enumerate() {
            q[(pi[c], pj[c])] += w;
        }
        bi.aggregator.transpose() * q * &bj.aggregator
    }

    fn assemble(&self, union_of: impl Fn(usize, usize) -> Result<Vec<f64>>, center: Option<(&[f64], f64)>) -> Result<DMatrix<f64>> {
        let mut v = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.blocks.len() {
            for j in i..self.blocks.len() {
                let blk = self.cross_block(i, j, &union_of(i, j)?);
                let (oi, oj) = (self.offsets[i], self.offsets[j]);
                v.view_mut((oi, oj), blk.shape()).copy_from(&blk);
                if i != j {
                    v.view_mut((oj, oi), (blk.ncols(), blk.nrows())).copy_from(&blk.transpose());
                }
            }
        }
        if let Some((mu, n)) = center {
            let m = DVector::from_column_slice(mu);
            v -= &m * m.transpose() / n;
        }
        Ok(v)
    }

    /// Covariance of y = Mᵀn under the multinomial at the pairwise expected
    /// tables of `pair` evaluated at the stacked aggregates `mu`.
    pub fn marginal_cov(&self, mu: &[f64], pair: &dyn PairModel, n_total: f64, centered: bool) -> Result<DMatrix<f64>> {
        if mu.len() != self.dim {
            return Err(MllError::Invalid(format!("expected {} aggregates, got {}", self.dim, mu.len())));
        }
        let tabs = self.marginal_tables(mu);
        let union_of = |i: usize, j: usize| {
            pair.pair_table(&self.scheme, self.blocks[i].marginal, &tabs[i], self.blocks[j].marginal, &tabs[j])
        };
        self.assemble(union_of, centered.then_some((mu, n_total)))
    }

    /// V* = Mᵀ D_n M from the observed pairwise unions.
    fn empirical_cov(&self, data: &GeeData) -> Result<DMatrix<f64>> {
        let union_of =
            |i: usize, j: usize| Ok(data.get(self.blocks[i].marginal.union(self.blocks[j].marginal)).to_vec());
        self.assemble(union_of, None)
    }

    pub fn fit(&self, data: &GeeData, opts: &GeeOptions) -> Result<GeeResult> {
        opts.validate()?;
        let pair = opts.working.pair_model();
        let y = self.observed(data);
        let n_total = data.total();
        let working = |mu: &[f64]| self.marginal_cov(mu, pair.as_ref(), n_total, opts.centered);
        let eta0: Vec<f64> = y.iter().map(|&v| v.max(opts.zero_cell_epsilon).ln()).collect();
        let (eta, tau, iterations, converged) = match opts.form {
            GeeForm::Multiplier => self.solve_multiplier(&y, eta0, &working, opts)?,
            GeeForm::Freedom => self.solve_freedom(&y, eta0, &working, opts)?,
        };
        if !converged {
            warn!("GEE did not converge in {} iterations", opts.max_iter);
        }
        let mu: Vec<f64> = eta.iter().map(|v| v.exp()).collect();
        let vt = working(&mu)?;
        let vstar = self.empirical_cov(data)?;
        let (sandwich_cov, model_cov) = self.covariances(&mu, &vt, &vstar)?;
        let eta_v = DVector::from_column_slice(&eta);
        let lambda = self.b.transpose() * &eta_v;
        let beta = self.x.transpose() * &lambda;
        let viol = max_abs((self.h.transpose() * &eta_v).as_slice());
        Ok(GeeResult {
            beta_tilde: beta.iter().copied().collect(),
            lambda_tilde: lambda.iter().copied().collect(),
            mu_tilde: self.marginal_tables(&mu),
            aggregates: mu,
            tau,
            sandwich_cov,
            model_cov,
            converged,
            iterations,
            max_constraint_violation: viol,
        })
    }

    /// Sandwich covariance of β̃ at a converged fit.
    pub fn sandwich(&self, fit: &GeeResult, data: &GeeData, opts: &GeeOptions) -> Result<DMatrix<f64>> {
        if !fit.converged {
            return Err(MllError::Numerical("sandwich covariance needs a converged fit".into()));
        }
        let pair = opts.working.pair_model();
        let vt = self.marginal_cov(&fit.aggregates, pair.as_ref(), data.total(), opts.centered)?;
        Ok(self.covariances(&fit.aggregates, &vt, &self.empirical_cov(data)?)?.0)
    }

    /// Linearization δη = G δy of the estimating equations, then Ĩ⁻¹J̃Ĩ⁻¹ and Ĩ⁻¹ on β.
    fn covariances(&self, mu: &[f64], vt: &DMatrix<f64>, vstar: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let (d, r) = (self.dim, self.h.ncols());
        let dinv_h = DMatrix::from_fn(d, r, |i, j| self.h[(i, j)] / mu[i]);
        let mut k = DMatrix::zeros(d + r, d + r);
        for i in 0..d {
            k[(i, i)] = mu[i];
        }
        k.view_mut((0, d), (d, r)).copy_from(&(-(vt * &dinv_h)));
        k.view_mut((d, 0), (r, d)).copy_from(&self.h.transpose());
        let mut rhs = DMatrix::zeros(d + r, d);
        rhs.view_mut((0, 0), (d, d)).fill_with_identity();
        let g = solve(&k, &rhs)?.rows(0, d).into_owned();
        let a = self.x.transpose() * self.b.transpose() * g;
        let sym = |m: DMatrix<f64>| (&m + m.transpose()) * 0.5;
        Ok((sym(&a * vstar * a.transpose()), sym(&a * vt * a.transpose())))
    }

    fn multiplier_residual(&self, y: &[f64], eta: &[f64], tau: &DVector<f64>, vt: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
        let mu: Vec<f64> = eta.iter().map(|v| v.exp()).collect();
        let ht = &self.h * tau;
        let w = DVector::from_iterator(self.dim, (0..self.dim).map(|i| ht[i] / mu[i]));
        let vw = vt * w;
        let f1 = (0..self.dim).map(|i| y[i] - mu[i] + vw[i]).collect();
        let f2 = (self.h.transpose() * DVector::from_column_slice(eta)).iter().copied().collect();
        (f1, f2)
    }

    fn residual_norm(f1: &[f64], f2: &[f64], mu: &[f64]) -> f64 {
        f1.iter().zip(mu).map(|(f, m)| f * f / m.max(1.0)).sum::<f64>() + f2.iter().map(|f| f * f).sum::<f64>()
    }

    #[allow(clippy::type_complexity)]
    fn solve_multiplier(
        &self,
        y: &[f64],
        mut eta: Vec<f64>,
        working: &dyn Fn(&[f64]) -> Result<DMatrix<f64>>,
        opts: &GeeOptions,
    ) -> Result<(Vec<f64>, Vec<f64>, usize, bool)> {
        let (d, r) = (self.dim, self.h.ncols());
        let mut tau = DVector::zeros(r);
        for it in 1..=opts.max_iter {
            let mu: Vec<f64> = eta.iter().map(|v| v.exp()).collect();
            let vt = working(&mu)?;
            let (f1, f2) = self.multiplier_residual(y, &eta, &tau, &vt);
            let ht = &self.h * &tau;
            let mut j = DMatrix::zeros(d + r, d + r);
            for i in 0..d {
                j[(i, i)] -= mu[i];
            }
            for c in 0..d {
                let s = ht[c] / mu[c];
                for i in 0..d {
                    j[(i, c)] -= vt[(i, c)] * s;
                }
            }
            let dinv_h = DMatrix::from_fn(d, r, |i, c| self.h[(i, c)] / mu[i]);
            j.view_mut((0, d), (d, r)).copy_from(&(&vt * dinv_h));
            j.view_mut((d, 0), (r, d)).copy_from(&self.h.transpose());
            let f = DVector::from_iterator(d + r, f1.iter().chain(&f2).copied());
            let step = solve(&j, &DMatrix::from_column_slice(d + r, 1, f.as_slice()))?;
            let base = Self::residual_norm(&f1, &f2, &mu);
            let mut s = 1.0;
            let mut accepted = None;
            for _ in 0..=opts.max_halvings {
                let e2: Vec<f64> = (0..d).map(|i| eta[i] - s * step[i]).collect();
                let t2 = DVector::from_iterator(r, (0..r).map(|c| tau[c] - s * step[d + c]));
                if e2.iter().all(|v| v.is_finite() && *v < 700.0) {
                    let (g1, g2) = self.multiplier_residual(y, &e2, &t2, &vt);
                    let mu2: Vec<f64> = e2.iter().map(|v| v.exp()).collect();
                    let nrm = Self::residual_norm(&g1, &g2, &mu2);
                    if nrm.is_finite() && (nrm < base || base < 1e-24) {
                        accepted = Some((e2, t2));
                        break;
                    }
                }
                s *= 0.5;
            }
            let (e2, t2) = accepted.unwrap_or_else(|| {
                let e2 = (0..d).map(|i| eta[i] - s * step[i]).collect();
                let t2 = DVector::from_iterator(r, (0..r).map(|c| tau[c] - s * step[d + c]));
                (e2, t2)
            });
            let delta = e2.iter().zip(&eta).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            eta = e2;
            tau = t2;
            let viol = max_abs((self.h.transpose() * DVector::from_column_slice(&eta)).as_slice());
            if delta < opts.tol && viol < opts.tol {
                return Ok((eta, tau.iter().copied().collect(), it, true));
            }
        }
        Ok((eta, tau.iter().copied().collect(), opts.max_iter, false))
    }

    #[allow(clippy::type_complexity)]
    fn solve_freedom(
        &self,
        y: &[f64],
        eta0: Vec<f64>,
        working: &dyn Fn(&[f64]) -> Result<DMatrix<f64>>,
        opts: &GeeOptions,
    ) -> Result<(Vec<f64>, Vec<f64>, usize, bool)> {
        let d = self.dim;
        let w = complement_of_orthonormal(&self.h);
        let yv = DVector::from_column_slice(y);
        let mut gamma = w.transpose() * DVector::from_column_slice(&eta0);
        let score = |g: &DVector<f64>, vt: &DMatrix<f64>| -> Result<(DVector<f64>, DVector<f64>, Vec<f64>)> {
            let mu: Vec<f64> = (&w * g).iter().map(|v| v.exp()).collect();
            let resid = &yv - DVector::from_column_slice(&mu);
            let sv = solve(vt, &DMatrix::from_column_slice(d, 1, resid.as_slice()))?.column(0).into_owned();
            let dm = DVector::from_iterator(d, (0..d).map(|i| mu[i] * sv[i]));
            Ok((w.transpose() * dm, sv, mu))
        };
        for it in 1..=opts.max_iter {
            let mu: Vec<f64> = (&w * &gamma).iter().map(|v| v.exp()).collect();
            let vt = working(&mu)?;
            if vt.clone().lu().try_inverse().is_none() {
                return Err(MllError::Numerical("working covariance is singular; use the multiplier form".into()));
            }
            let (g, sv, _) = score(&gamma, &vt)?;
            let dmat = DMatrix::from_diagonal(&DVector::from_column_slice(&mu));
            let vinv_d = solve(&vt, &dmat)?;
            let inner = DMatrix::from_diagonal(&DVector::from_iterator(d, (0..d).map(|i| sv[i] * mu[i]))) - &dmat * vinv_d;
            let jac = w.transpose() * inner * &w;
            let step = solve(&jac, &DMatrix::from_column_slice(g.len(), 1, g.as_slice()))?.column(0).into_owned();
            let base = g.norm_squared();
            let mut s = 1.0;
            let mut next = &gamma - &step;
            for _ in 0..=opts.max_halvings {
                next = &gamma - &step * s;
                if (&w * &next).iter().all(|v| v.is_finite() && *v < 700.0) {
                    let (g2, _, _) = score(&next, &vt)?;
                    if g2.norm_squared() < base || base < 1e-24 {
                        break;
                    }
                }
                s *= 0.5;
            }
            let delta = (&w * (&next - &gamma)).amax();
            gamma = next;
            if delta < opts.tol {
                let eta: Vec<f64> = (&w * &gamma).iter().copied().collect();
                return Ok((eta, Vec::new(), it, true));
            }
        }
        Ok(((&w * &gamma).iter().copied().collect(), Vec::new(), opts.max_iter, false))
    }
}

/// GEE fit of `spec` from the marginals of a full count table.
pub fn fit_gee(n: &Table, spec: &ModelSpec, opts: &GeeOptions) -> Result<GeeResult> {
    let problem = GeeProblem::new(spec)?;
    let data = problem.data_from_table(n)?;
    problem.fit(&data, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{MarginalSequence, Parameterization};

    #[test]
    fn independence_pair_table() {
        let s = VariableScheme::from_sizes(&[("A", 2), ("B", 3)]).unwrap();
        let a = [3.0, 7.0];
        let b = [2.0, 5.0, 3.0];
        let t = PairwiseIndependence.pair_table(&s, Effect(1), &a, Effect(2), &b).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                assert!((t[i * 3 + j] - a[i] * b[j] / 10.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn saturated_margins_reproduce_observed() {
        let s = VariableScheme::binary(&["A", "B", "C"]).unwrap();
        let ms = vec![Effect(0b011), Effect(0b110), s.full()];
        let seq = MarginalSequence::new(&s, ms).unwrap();
        let p = Parameterization::build(&s, &seq, Default::default()).unwrap();
        let spec = ModelSpec::from_constraints(p.clone(), DMatrix::zeros(p.n_components(), 0)).unwrap();
        let n = Table::counts(s.clone(), vec![5.0, 3.0, 8.0, 2.0, 4.0, 9.0, 1.0, 6.0]).unwrap();
        let fit = fit_gee(&n, &spec, &GeeOptions::default()).unwrap();
        assert!(fit.converged);
        let problem = GeeProblem::new(&spec).unwrap();
        assert_eq!(problem.marginals(), vec![Effect(0b011), Effect(0b110)]);
        let y = problem.observed(&problem.data_from_table(&n).unwrap());
        for (a, b) in fit.aggregates.iter().zip(&y) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}
