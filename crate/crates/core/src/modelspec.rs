//! Marginal log-linear models as linear restrictions C′λ = 0 (or λ = Xβ), and
//! compilers from independence statements, DAGs, Type IV chain graphs and path
//! models to zero-effect sets.

use std::collections::BTreeSet;

use log::warn;
use nalgebra::DMatrix;

use crate::contrasts::CodingKind;
use crate::error::{MllError, Result};
use crate::parameterization::Parameterization;
use crate::table::{assign_effects, effect_dimension, Effect, MarginalSequence, VariableScheme};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Manual,
    Ci,
    Dag,
    Chain,
    Path,
}

#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub param: Parameterization,
    /// Constraint matrix, components × constraints.
    pub c: DMatrix<f64>,
    /// Zeroed (marginal, effect) pairs, canonical order.
    pub zeroed_effects: Vec<(Effect, Effect)>,
    pub provenance: Provenance,
    zero_components: Option<Vec<usize>>,
}

fn rank(a: &DMatrix<f64>) -> usize {
    if a.ncols() == 0 || a.nrows() == 0 {
        return 0;
    }
    let tol = 1e-10 * a.abs().max().max(1.0);
    a.clone().svd(false, false).rank(tol)
}

/// Orthonormal basis of the column space of `a`.
pub(crate) fn column_basis(a: &DMatrix<f64>) -> DMatrix<f64> {
    let r = rank(a);
    if r == 0 {
        return DMatrix::zeros(a.nrows(), 0);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.unwrap();
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    DMatrix::from_fn(a.nrows(), r, |i, j| u[(i, idx[j])])
}

/// Basis of the orthogonal complement of the column space of `basis` (orthonormal columns).
pub(crate) fn complement_of_orthonormal(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let (k, r) = basis.shape();
    let mut aug = DMatrix::zeros(k, r + k);
    aug.columns_mut(0, r).copy_from(basis);
    aug.columns_mut(r, k).fill_with_identity();
    let q = aug.qr().q();
    q.columns(r, k - r).into_owned()
}

/// C with C′X = 0 and (X, C) invertible, for X of full column rank.
pub fn orthogonal_complement(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if rank(x) < x.ncols() {
        return Err(MllError::Invalid("design matrix does not have full column rank".into()));
    }
    Ok(complement_of_orthonormal(&column_basis(x)))
}

impl ModelSpec {
    pub fn from_constraints(param: Parameterization, c: DMatrix<f64>) -> Result<Self> {
        if c.nrows() != param.n_components() {
            return Err(MllError::Invalid(format!(
                "constraint matrix has {} rows, parameterization has {} components",
                c.nrows(),
                param.n_components()
            )));
        }
        Ok(ModelSpec { param, c, zeroed_effects: Vec::new(), provenance: Provenance::Manual, zero_components: None })
    }

    pub fn from_design(param: Parameterization, x: &DMatrix<f64>) -> Result<Self> {
        if x.nrows() != param.n_components() {
            return Err(MllError::Invalid("design matrix rows must match the components".into()));
        }
        let c = orthogonal_complement(x)?;
        ModelSpec::from_constraints(param, c)
    }

    pub fn n_components(&self) -> usize {
        self.param.n_components()
    }

    /// Components fixed at zero, when the model is a pure zero-effect model.
    pub fn zero_components(&self) -> Option<&[usize]> {
        self.zero_components.as_deref()
    }

    pub fn df(&self) -> usize {
        match &self.zero_components {
            Some(z) => z.len(),
            None => rank(&self.c),
        }
    }

    /// Freedom design X with C′X = 0 and (X, C) invertible.
    pub fn x(&self) -> DMatrix<f64> {
        let k = self.n_components();
        match &self.zero_components {
            Some(z) => {
                let free: Vec<usize> = (0..k).filter(|i| z.binary_search(i).is_err()).collect();
                let mut x = DMatrix::zeros(k, free.len());
                for (j, &i) in free.iter().enumerate() {
                    x[(i, j)] = 1.0;
                }
                x
            }
            None => complement_of_orthonormal(&column_basis(&self.c)),
        }
    }

    /// Adds constraints λ_a = λ_b for each pair of component indices.
    pub fn add_equalities(&mut self, pairs: &[(usize, usize)]) -> Result<()> {
        let k = self.n_components();
        if pairs.iter().any(|&(a, b)| a >= k || b >= k || a == b) {
            return Err(MllError::Invalid("equality constraint needs two distinct valid components".into()));
        }
        let r = self.c.ncols();
        let mut c = DMatrix::zeros(k, r + pairs.len());
        c.columns_mut(0, r).copy_from(&self.c);
        for (j, &(a, b)) in pairs.iter().enumerate() {
            c[(a, r + j)] = 1.0;
            c[(b, r + j)] = -1.0;
        }
        self.c = c;
        self.zero_components = None;
        Ok(())
    }

    /// Largest |C′λ| at the given parameter vector.
    pub fn max_violation(&self, lambda: &[f64]) -> f64 {
        let l = nalgebra::DVector::from_column_slice(lambda);
        let v = self.c.transpose() * l;
        v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// Model setting every component of the listed effects to zero.
pub fn zero_effect_model(param: &Parameterization, effects: &[Effect]) -> Result<ModelSpec> {
    let scheme = param.scheme();
    let mut set: Vec<Effect> = effects.to_vec();
    set.sort_by(Effect::canonical_cmp);
    set.dedup();
    let mut comps = Vec::new();
    let mut zeroed = Vec::new();
    for &e in &set {
        let range = param
            .effect_range(e)
            .ok_or_else(|| MllError::UnknownEffect(scheme.effect_label(e)))?;
        zeroed.push((param.components()[range.start].marginal, e));
        comps.extend(range);
    }
    comps.sort_unstable();
    let mut c = DMatrix::zeros(param.n_components(), comps.len());
    for (j, &k) in comps.iter().enumerate() {
        c[(k, j)] = 1.0;
    }
    Ok(ModelSpec {
        param: param.clone(),
        c,
        zeroed_effects: zeroed,
        provenance: Provenance::Manual,
        zero_components: Some(comps),
    })
}

/// A ⫫ B | C with disjoint A, B, C and non-empty A, B.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CiStatement {
    pub a: Effect,
    pub b: Effect,
    pub c: Effect,
}

impl CiStatement {
    pub fn new(a: Effect, b: Effect, c: Effect) -> Result<Self> {
        if a.is_empty() || b.is_empty() {
            return Err(MllError::Invalid("independent sides must be non-empty".into()));
        }
        if !a.intersection(b).is_empty() || !a.intersection(c).is_empty() || !b.intersection(c).is_empty() {
            return Err(MllError::Invalid("independence sets must be disjoint".into()));
        }
        Ok(CiStatement { a, b, c })
    }

    pub fn union(&self) -> Effect {
        self.a.union(self.b).union(self.c)
    }

    /// Subsets of A∪B∪C meeting both A and B.
    pub fn d_set(&self) -> Vec<Effect> {
        self.union()
            .subsets()
            .into_iter()
            .filter(|e| !e.intersection(self.a).is_empty() && !e.intersection(self.b).is_empty())
            .collect()
    }

    pub fn describe(&self, scheme: &VariableScheme) -> String {
        if self.c.is_empty() {
            format!("{} ⫫ {}", scheme.effect_label(self.a), scheme.effect_label(self.b))
        } else {
            format!(
                "{} ⫫ {} | {}",
                scheme.effect_label(self.a),
                scheme.effect_label(self.b),
                scheme.effect_label(self.c)
            )
        }
    }
}

/// An effect whose housing marginal violates C_i ⊆ M(E) ⊆ A_i∪B_i∪C_i.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DConditionFailure {
    pub effect: Effect,
    pub marginal: Effect,
    pub statement: usize,
}

pub fn check_d_condition(cis: &[CiStatement], seq: &MarginalSequence) -> Vec<DConditionFailure> {
    let asg = assign_effects(seq);
    let mut out = Vec::new();
    for (i, ci) in cis.iter().enumerate() {
        for e in ci.d_set() {
            let m = seq.marginals()[asg.get(e).expect("every effect is housed")];
            if !ci.c.is_subset_of(m) || !m.is_subset_of(ci.union()) {
                out.push(DConditionFailure { effect: e, marginal: m, statement: i });
            }
        }
    }
    out
}

fn zero_set(cis: &[CiStatement]) -> Vec<Effect> {
    let set: BTreeSet<(usize, u32)> = cis.iter().flat_map(|c| c.d_set()).map(|e| (e.len(), e.bits())).collect();
    set.into_iter().map(|(_, b)| Effect(b)).collect()
}

/// An effect shared by several statements whose lower bound E ∪ ⋃C_i is not inside ⋂(A_i∪B_i∪C_i).
pub fn interval_witness(cis: &[CiStatement]) -> Option<(Effect, Effect, Effect)> {
    for e in zero_set(cis) {
        let owners: Vec<&CiStatement> = cis.iter().filter(|c| c.d_set().contains(&e)).collect();
        let lower = owners.iter().fold(e, |acc, c| acc.union(c.c));
        let upper = owners.iter().fold(Effect(u32::MAX), |acc, c| acc.intersection(c.union()));
        if !lower.is_subset_of(upper) {
            return Some((e, lower, upper));
        }
    }
    None
}

fn validate_cis(scheme: &VariableScheme, cis: &[CiStatement]) -> Result<()> {
    for ci in cis {
        if !scheme.contains_effect(ci.union()) {
            return Err(MllError::Invalid("independence statement mentions unknown variables".into()));
        }
    }
    Ok(())
}

/// Zero-effect model for the statements over the sequence of `param`.
pub fn compile_ci(cis: &[CiStatement], param: &Parameterization) -> Result<ModelSpec> {
    let scheme = param.scheme();
    validate_cis(scheme, cis)?;
    let failures = check_d_condition(cis, param.sequence());
    if !failures.is_empty() {
        let detail: Vec<String> = failures
            .iter()
            .map(|f| {
                format!(
                    "effect {} housed in {} violates statement {} ({})",
                    scheme.effect_label(f.effect),
                    scheme.effect_label(f.marginal),
                    f.statement + 1,
                    cis[f.statement].describe(scheme)
                )
            })
            .collect();
        return Err(MllError::Compile(detail.join("; ")));
    }
    let mut spec = zero_effect_model(param, &zero_set(cis))?;
    spec.provenance = Provenance::Ci;
    Ok(spec)
}

/// Search for a marginal sequence satisfying the housing condition of every statement.
pub fn suggest_sequence(scheme: &VariableScheme, cis: &[CiStatement]) -> Result<MarginalSequence> {
    validate_cis(scheme, cis)?;
    if let Some((e, lo, hi)) = interval_witness(cis) {
        return Err(MllError::Compile(format!(
            "an appropriate sequence of marginals does not exist: effect {} needs a marginal containing {} inside {}",
            scheme.effect_label(e),
            scheme.effect_label(lo),
            scheme.effect_label(hi)
        )));
    }
    let full = scheme.full();
    let mut cand: Vec<Effect> = cis.iter().map(|c| c.union()).filter(|&u| u != full).collect();
    cand.sort_by(Effect::canonical_cmp);
    cand.dedup();
    let build = |ms: &[Effect]| -> Option<MarginalSequence> {
        let mut v = ms.to_vec();
        v.push(full);
        let seq = MarginalSequence::new(scheme, v).ok()?;
        check_d_condition(cis, &seq).is_empty().then_some(seq)
    };
    if cand.len() <= 8 {
        let mut best: Option<MarginalSequence> = None;
        let mut stack = Vec::new();
        let mut used = vec![false; cand.len()];
        search(&cand, &mut stack, &mut used, &build, &mut best);
        if let Some(b) = best {
            return Ok(b);
        }
    } else {
        let mut greedy = cand.clone();
        greedy.sort_by_key(|e| e.len());
        if let Some(s) = build(&greedy) {
            return Ok(s);
        }
    }
    Err(MllError::Compile(
        "an appropriate sequence of marginals does not exist: no ordering of the candidate marginals houses every zeroed effect admissibly".into(),
    ))
}

fn search<F: Fn(&[Effect]) -> Option<MarginalSequence>>(
    cand: &[Effect],
    stack: &mut Vec<Effect>,
    used: &mut [bool],
    build: &F,
    best: &mut Option<MarginalSequence>,
) {
    if let Some(s) = build(stack) {
        if best.as_ref().is_none_or(|b| b.len() < s.len()) {
            *best = Some(s);
        }
    }
    for i in 0..cand.len() {
        if used[i] || stack.iter().any(|m| cand[i].is_subset_of(*m)) {
            continue;
        }
        used[i] = true;
        stack.push(cand[i]);
        search(cand, stack, used, build, best);
        stack.pop();
        used[i] = false;
    }
}

/// Zero-effect model with a sequence found by [`suggest_sequence`].
pub fn compile_ci_auto(scheme: &VariableScheme, cis: &[CiStatement], coding: CodingKind, include_empty: bool) -> Result<ModelSpec> {
    let seq = suggest_sequence(scheme, cis)?;
    let param = Parameterization::build_with(scheme, &seq, |_| coding, include_empty)?;
    compile_ci(cis, &param)
}

/// Directed graph over the scheme variables, edges as (from, to).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectedGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

impl DirectedGraph {
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if edges.iter().any(|&(a, b)| a >= n || b >= n || a == b) {
            return Err(MllError::Invalid("edge endpoints must be distinct nodes".into()));
        }
        Ok(DirectedGraph { n, edges })
    }

    pub fn from_names(scheme: &VariableScheme, edges: &[(&str, &str)]) -> Result<Self> {
        let idx = |s: &str| scheme.index_of(s).ok_or_else(|| MllError::Invalid(format!("unknown variable {s}")));
        let e = edges.iter().map(|&(a, b)| Ok((idx(a)?, idx(b)?))).collect::<Result<Vec<_>>>()?;
        DirectedGraph::new(scheme.n_vars(), e)
    }

    pub fn parents(&self, v: usize) -> Effect {
        Effect::from_indices(self.edges.iter().filter(|e| e.1 == v).map(|e| e.0))
    }

    /// Topological order, ties broken by smallest node index.
    pub fn well_numbering(&self) -> Result<Vec<usize>> {
        let mut indeg = vec![0usize; self.n];
        for &(_, b) in &self.edges {
            indeg[b] += 1;
        }
        let mut ready: BTreeSet<usize> = (0..self.n).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(self.n);
        while let Some(&v) = ready.iter().next() {
            ready.remove(&v);
            order.push(v);
            for &(a, b) in &self.edges {
                if a == v {
                    indeg[b] -= 1;
                    if indeg[b] == 0 {
                        ready.insert(b);
                    }
                }
            }
        }
        if order.len() < self.n {
            return Err(MllError::Invalid("directed graph has a cycle".into()));
        }
        Ok(order)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SequenceStyle {
    /// {V_i} ∪ pre(V_i) for every node in well-numbered order.
    #[default]
    Full,
    /// Only the marginals of nodes carrying an independence, then 𝒱.
    Minimal,
}

#[derive(Clone, Copy, Debug)]
pub struct CompileOptions {
    pub coding: CodingKind,
    pub include_empty: bool,
    pub style: SequenceStyle,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions { coding: CodingKind::Local, include_empty: false, style: SequenceStyle::Full }
    }
}

#[derive(Clone, Debug)]
pub struct DagCompilation {
    pub order: Vec<usize>,
    pub sequence: MarginalSequence,
    pub cis: Vec<CiStatement>,
    pub spec: ModelSpec,
}

fn dedup_sequence(scheme: &VariableScheme, ms: Vec<Effect>) -> Result<MarginalSequence> {
    let mut out: Vec<Effect> = Vec::new();
    for m in ms {
        if !m.is_empty() && !out.iter().any(|x| m.is_subset_of(*x)) {
            out.push(m);
        }
    }
    if out.last() != Some(&scheme.full()) {
        out.push(scheme.full());
    }
    MarginalSequence::new(scheme, out)
}

pub fn compile_dag(scheme: &VariableScheme, g: &DirectedGraph, opts: &CompileOptions) -> Result<DagCompilation> {
    if g.n != scheme.n_vars() {
        return Err(MllError::Invalid("graph and scheme have different numbers of variables".into()));
    }
    let order = g.well_numbering()?;
    let mut cis = Vec::new();
    let mut marginals = Vec::new();
    let mut pre = Effect::EMPTY;
    for &v in &order {
        let pa = g.parents(v);
        let rest = pre.difference(pa);
        let here = pre.union(Effect::single(v));
        if !rest.is_empty() {
            cis.push(CiStatement::new(Effect::single(v), rest, pa)?);
        }
        if opts.style == SequenceStyle::Full || !rest.is_empty() {
            marginals.push(here);
        }
        pre = here;
    }
    let sequence = dedup_sequence(scheme, marginals)?;
    let param = Parameterization::build_with(scheme, &sequence, |_| opts.coding, opts.include_empty)?;
    let mut spec = compile_ci(&cis, &param)?;
    spec.provenance = Provenance::Dag;
    Ok(DagCompilation { order, sequence, cis, spec })
}

#[derive(Clone, Debug)]
pub struct PathCompilation {
    pub dag: DagCompilation,
    pub graphical_zeros: Vec<Effect>,
    pub path_zeros: Vec<Effect>,
    pub remaining: Vec<Effect>,
    pub spec: ModelSpec,
}

/// DAG model plus zeros for every surviving effect of more than two variables.
pub fn compile_path(scheme: &VariableScheme, g: &DirectedGraph, opts: &CompileOptions) -> Result<PathCompilation> {
    let dag = compile_dag(scheme, g, opts)?;
    let graphical: Vec<Effect> = dag.spec.zeroed_effects.iter().map(|z| z.1).collect();
    let mut all: Vec<Effect> = scheme.full().subsets();
    all.sort_by(Effect::canonical_cmp);
    let surviving: Vec<Effect> = all.into_iter().filter(|e| !graphical.contains(e)).collect();
    let path_zeros: Vec<Effect> = surviving.iter().copied().filter(|e| e.len() > 2).collect();
    let remaining: Vec<Effect> = surviving.into_iter().filter(|e| e.len() <= 2).collect();
    let mut zeros = graphical.clone();
    zeros.extend(&path_zeros);
    let mut spec = zero_effect_model(&dag.spec.param, &zeros)?;
    spec.provenance = Provenance::Path;
    Ok(PathCompilation { dag, graphical_zeros: graphical, path_zeros, remaining, spec })
}

/// Chain graph: ordered components and edges; an edge within a component is
/// undirected, an edge between components points from the earlier one.
#[derive(Clone, Debug)]
pub struct ChainGraph {
    pub components: Vec<Effect>,
    pub undirected: Vec<(usize, usize)>,
    pub directed: Vec<(usize, usize)>,
}

impl ChainGraph {
    pub fn new(n: usize, components: Vec<Effect>, edges: &[(usize, usize)]) -> Result<Self> {
        let mut seen = Effect::EMPTY;
        for k in &components {
            if k.is_empty() || !k.intersection(seen).is_empty() {
                return Err(MllError::Invalid("chain components must be non-empty and disjoint".into()));
            }
            seen = seen.union(*k);
        }
        if seen != Effect::full(n) {
            return Err(MllError::Invalid("chain components must cover every variable".into()));
        }
        let comp_of = |v: usize| components.iter().position(|k| k.contains(v)).unwrap();
        let mut undirected = Vec::new();
        let mut directed = Vec::new();
        for &(a, b) in edges {
            if a >= n || b >= n || a == b {
                return Err(MllError::Invalid("edge endpoints must be distinct nodes".into()));
            }
            let (ca, cb) = (comp_of(a), comp_of(b));
            if ca == cb {
                undirected.push((a.min(b), a.max(b)));
            } else if ca < cb {
                directed.push((a, b));
            } else {
                return Err(MllError::Invalid(
                    "arrows must point from an earlier component to a later one".into(),
                ));
            }
        }
        Ok(ChainGraph { components, undirected, directed })
    }

    /// Union of the components with an arrow into `k`.
    pub fn parent_components(&self, t: usize) -> Effect {
        let k = self.components[t];
        let mut out = Effect::EMPTY;
        for &(a, b) in &self.directed {
            if k.contains(b) {
                out = out.union(*self.components.iter().find(|c| c.contains(a)).unwrap());
            }
        }
        out
    }

    /// Nodes with an arrow into some node of `x`.
    pub fn parents(&self, x: Effect) -> Effect {
        Effect::from_indices(self.directed.iter().filter(|e| x.contains(e.1)).map(|e| e.0))
    }

    /// Nodes of the same component adjacent to some node of `x`, outside `x`.
    pub fn neighbours(&self, x: Effect) -> Effect {
        let mut out = Effect::EMPTY;
        for &(a, b) in &self.undirected {
            if x.contains(a) {
                out = out.union(Effect::single(b));
            }
            if x.contains(b) {
                out = out.union(Effect::single(a));
            }
        }
        out.difference(x)
    }

    /// Independences of the Type IV block-recursive property.
    pub fn type4_statements(&self) -> Vec<CiStatement> {
        let mut out = Vec::new();
        let mut prefix = Effect::EMPTY;
        for (t, &k) in self.components.iter().enumerate() {
            let pa_k = self.parent_components(t);
            for x in k.subsets().into_iter().filter(|x| !x.is_empty()) {
                let rest = k.difference(x).difference(self.neighbours(x));
                if !rest.is_empty() {
                    out.push(CiStatement { a: x, b: rest, c: pa_k });
                }
                let pa_x = self.parents(x);
                let far = pa_k.difference(pa_x);
                if !far.is_empty() {
                    out.push(CiStatement { a: x, b: far, c: pa_x });
                }
            }
            let nd = prefix.difference(pa_k);
            if !nd.is_empty() {
                out.push(CiStatement { a: k, b: nd, c: pa_k });
            }
            prefix = prefix.union(k);
        }
        out
    }

    /// Marginals PA(K_t)∪X by increasing |X|, then K_1∪…∪K_t, for each t.
    pub fn type4_sequence(&self, scheme: &VariableScheme) -> Result<MarginalSequence> {
        let mut ms = Vec::new();
        let mut prefix = Effect::EMPTY;
        for (t, &k) in self.components.iter().enumerate() {
            let pa_k = self.parent_components(t);
            let mut xs: Vec<Effect> = k.subsets().into_iter().filter(|x| !x.is_empty()).collect();
            xs.sort_by(Effect::canonical_cmp);
            ms.extend(xs.into_iter().map(|x| pa_k.union(x)));
            prefix = prefix.union(k);
            ms.push(prefix);
        }
        dedup_sequence(scheme, ms)
    }
}

pub fn compile_chain_type4(scheme: &VariableScheme, g: &ChainGraph, opts: &CompileOptions) -> Result<ModelSpec> {
    let seq = g.type4_sequence(scheme)?;
    let cis = g.type4_statements();
    let param = Parameterization::build_with(scheme, &seq, |_| opts.coding, opts.include_empty)?;
    if !param.verdict().decomposable {
        warn!("Type IV marginal sequence is not ordered decomposable");
    }
    let mut spec = compile_ci(&cis, &param)?;
    spec.provenance = Provenance::Chain;
    Ok(spec)
}

/// Σ effect dimensions over the listed effects.
pub fn dimension_sum(scheme: &VariableScheme, effects: &[Effect]) -> usize {
    effects.iter().map(|&e| effect_dimension(e, scheme)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(s: &VariableScheme, names: &str) -> Effect {
        let v: Vec<String> = names.chars().map(|c| c.to_string()).collect();
        s.effect_from_names(&v).unwrap()
    }

    #[test]
    fn complement_of_first_basis_vector() {
        let x = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let c = orthogonal_complement(&x).unwrap();
        assert_eq!(c.ncols(), 1);
        assert!(c[(0, 0)].abs() < 1e-15 && (c[(1, 0)].abs() - 1.0).abs() < 1e-15);
        assert!(orthogonal_complement(&DMatrix::from_column_slice(2, 2, &[1.0, 1.0, 2.0, 2.0])).is_err());
    }

    #[test]
    fn marginal_homogeneity_design_complement() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
        let c = orthogonal_complement(&x).unwrap();
        let shown = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
        assert!((c.transpose() * &x).abs().max() < 1e-12);
        // equal row spans: stacking adds no rank
        let mut both = DMatrix::zeros(4, 4);
        both.columns_mut(0, 2).copy_from(&c);
        both.columns_mut(2, 2).copy_from(&shown.transpose());
        assert_eq!(rank(&both), 2);
    }

    #[test]
    fn zero_models_and_df() {
        let s = VariableScheme::binary(&["A", "B", "C", "D"]).unwrap();
        let seq = MarginalSequence::from_names(&s, &[vec!["A", "B"], vec!["A", "B", "C", "D"]]).unwrap();
        let p = Parameterization::build(&s, &seq, CodingKind::Local).unwrap();
        let zs: Vec<Effect> = ["AB", "CD", "ACD", "BCD", "ABCD"].iter().map(|n| e(&s, n)).collect();
        let m = zero_effect_model(&p, &zs).unwrap();
        assert_eq!(m.df(), 5);
        assert_eq!(m.zeroed_effects[0], (e(&s, "AB"), e(&s, "AB")));
        assert!((m.c.transpose() * m.x()).abs().max() == 0.0);
        assert_eq!(zero_effect_model(&p, &[]).unwrap().df(), 0);
        assert!(matches!(zero_effect_model(&p, &[Effect::EMPTY]), Err(MllError::UnknownEffect(_))));
        let s2 = VariableScheme::from_sizes(&[("A", 2), ("B", 3), ("C", 2)]).unwrap();
        let p2 = Parameterization::build(&s2, &MarginalSequence::saturated(&s2), CodingKind::Local).unwrap();
        assert_eq!(zero_effect_model(&p2, &[e(&s2, "BC")]).unwrap().df(), 2);
    }

    #[test]
    fn equality_constraints_have_full_complement() {
        let s = VariableScheme::from_sizes(&[("A", 3), ("B", 3)]).unwrap();
        let seq = MarginalSequence::from_names(&s, &[vec!["A"], vec!["B"], vec!["A", "B"]]).unwrap();
        let p = Parameterization::build(&s, &seq, CodingKind::Local).unwrap();
        let mut m = zero_effect_model(&p, &[]).unwrap();
        let a = p.effect_range(e(&s, "A")).unwrap();
        let b = p.effect_range(e(&s, "B")).unwrap();
        m.add_equalities(&a.zip(b).collect::<Vec<_>>()).unwrap();
        assert_eq!(m.df(), 2);
        let x = m.x();
        assert_eq!(x.ncols(), 6);
        assert!((m.c.transpose() * &x).abs().max() < 1e-12);
    }

    #[test]
    fn d_sets_and_single_independence() {
        let s = VariableScheme::binary(&["A", "B", "C"]).unwrap();
        let ci = CiStatement::new(e(&s, "A"), e(&s, "B"), e(&s, "C")).unwrap();
        let mut d = ci.d_set();
        d.sort_by(Effect::canonical_cmp);
        assert_eq!(d, vec![e(&s, "AB"), e(&s, "ABC")]);
        let seq = MarginalSequence::from_names(&s, &[vec!["A", "B"], vec!["A", "B", "C"]]).unwrap();
        let p = Parameterization::build(&s, &seq, CodingKind::Local).unwrap();
        let ab = CiStatement::new(e(&s, "A"), e(&s, "B"), Effect::EMPTY).unwrap();
        let m = compile_ci(&[ab], &p).unwrap();
        assert_eq!(m.zeroed_effects, vec![(e(&s, "AB"), e(&s, "AB"))]);
        assert!(matches!(compile_ci(&[ci], &p), Err(MllError::Compile(_))));
        assert!(CiStatement::new(e(&s, "A"), e(&s, "AB"), Effect::EMPTY).is_err());
    }

    #[test]
    fn well_numbering_breaks_ties_by_index_and_detects_cycles() {
        let g = DirectedGraph::new(4, vec![(3, 0), (2, 1)]).unwrap();
        assert_eq!(g.well_numbering().unwrap(), vec![2, 1, 3, 0]);
        assert!(DirectedGraph::new(2, vec![(0, 1), (1, 0)]).unwrap().well_numbering().is_err());
    }
}
