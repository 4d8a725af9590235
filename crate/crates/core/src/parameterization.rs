//! Hierarchical and complete marginal log-linear parameterizations.
//!
//! Every effect is housed in the first marginal of the sequence containing it.
//! The map λ = Bᵀ log(Mᵀm) is evaluated without forming M or B: Kronecker
//! codings (local, spanning) use per-axis transforms on each marginal table,
//! lumped codings (global, continuation) sum marginal cells into lumped cells.
//! Dense `M` and `B` are available for small schemes.

use std::ops::Range;

use log::warn;
use nalgebra::DMatrix;

use crate::contrasts::{
    axis_rows, component_levels, effect_components, kronecker_entry, CodingKind, Lumping,
    POSITIVITY_FLOOR,
};
use crate::error::{MllError, Result};
use crate::table::{
    assign_effects, is_ordered_decomposable, scatter_sum, DecomposabilityVerdict, Effect,
    EffectAssignment, MarginalSequence, Table, TableKind, VariableScheme,
};

/// One component: effect, housing marginal and level tuple (0-based, all ≥ 1).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentLabel {
    pub marginal_index: usize,
    pub marginal: Effect,
    pub effect: Effect,
    pub levels: Vec<usize>,
}

#[derive(Clone, Debug)]
struct KronGroup {
    coding: CodingKind,
    fwd: Vec<Vec<f64>>,
    inv: Vec<Vec<f64>>,
    /// (component index, index in the transformed marginal array)
    entries: Vec<(usize, usize)>,
}

#[derive(Clone, Debug)]
struct LumpedComp {
    comp: usize,
    effect: Effect,
    kron_index: usize,
    lumping: Lumping,
}

#[derive(Clone, Debug)]
struct Block {
    marginal: Effect,
    sizes: Vec<usize>,
    q: usize,
    map: Option<Vec<usize>>,
    groups: Vec<KronGroup>,
    lumped: Vec<LumpedComp>,
}

impl Block {
    fn sums(&self, v: &[f64]) -> Vec<f64> {
        match &self.map {
            None => v.to_vec(),
            Some(map) => scatter_sum(v, map, self.q),
        }
    }

    fn gather_add(&self, g: &[f64], out: &mut [f64]) {
        match &self.map {
            None => out.iter_mut().zip(g).for_each(|(o, x)| *o += x),
            Some(map) => out.iter_mut().zip(map).for_each(|(o, &k)| *o += g[k]),
        }
    }
}

/// Apply a per-axis linear map to a lexicographic array.
fn apply_axes(data: &mut [f64], sizes: &[usize], mats: &[Vec<f64>], transpose: bool) {
    let n = sizes.len();
    let mut stride = data.len();
    let mut tmp = Vec::new();
    for t in 0..n {
        let c = sizes[t];
        stride /= c;
        let outer = data.len() / (stride * c);
        let m = &mats[t];
        tmp.resize(c, 0.0);
        for o in 0..outer {
            for s in 0..stride {
                let base = o * c * stride + s;
                for (r, slot) in tmp.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for l in 0..c {
                        let a = if transpose { m[l * c + r] } else { m[r * c + l] };
                        acc += a * data[base + l * stride];
                    }
                    *slot = acc;
                }
                for r in 0..c {
                    data[base + r * stride] = tmp[r];
                }
            }
        }
    }
}

fn invert_small(m: &[f64], c: usize) -> Vec<f64> {
    let a = DMatrix::from_row_slice(c, c, m);
    let inv = a.try_inverse().expect("per-axis coding maps are invertible");
    let mut out = vec![0.0; c * c];
    for r in 0..c {
        for l in 0..c {
            out[r * c + l] = inv[(r, l)];
        }
    }
    out
}

/// One marginal of the sequence: λ_b = contrastsᵀ log(aggregatorᵀ μ) for its
/// marginal table μ, where the aggregator appends lumped sums to the cells.
#[derive(Clone, Debug)]
pub struct MarginalBlock {
    pub marginal: Effect,
    /// marginal cells × aggregate rows
    pub aggregator: DMatrix<f64>,
    /// aggregate rows × all components (zero outside this marginal)
    pub contrasts: DMatrix<f64>,
    /// components housed in this marginal
    pub components: Vec<usize>,
}

/// Bits of `inner` re-indexed to positions within `outer`.
pub(crate) fn relative(inner: Effect, outer: Effect) -> Effect {
    Effect::from_indices(outer.indices().enumerate().filter(|(_, j)| inner.contains(*j)).map(|(p, _)| p))
}

/// Map from cells of the marginal over `outer` to cells of its sub-marginal `inner`.
pub(crate) fn sub_index_map(scheme: &VariableScheme, outer: Effect, inner: Effect) -> Vec<usize> {
    if inner.is_empty() {
        return vec![0; scheme.marginal_cells(outer)];
    }
    let sub = scheme.sub_scheme(outer).expect("valid marginal");
    sub.marginal_index_map(relative(inner, outer))
}

/// Marginal sums and lumped sums of a frequency vector, shared by λ and Λ.
#[derive(Clone, Debug)]
pub struct Linearization {
    mu: Vec<Vec<f64>>,
    lumped: Vec<Vec<Vec<f64>>>,
}

impl Linearization {
    /// Marginal table of the `i`-th marginal at the linearization point.
    pub fn marginal(&self, i: usize) -> &[f64] {
        &self.mu[i]
    }
}

#[derive(Clone, Copy, Debug)]
pub struct InvertOptions {
    pub ipf_tol: f64,
    pub outer_tol: f64,
    pub max_iter: usize,
}

impl Default for InvertOptions {
    fn default() -> Self {
        InvertOptions { ipf_tol: 1e-12, outer_tol: 1e-10, max_iter: 10_000 }
    }
}

#[derive(Clone, Debug)]
pub struct InvertReport {
    pub table: Table,
    pub ipf_sweeps: usize,
    pub outer_iterations: usize,
}

#[derive(Clone, Debug)]
pub struct SmoothnessReport {
    pub ordered_decomposable: DecomposabilityVerdict,
    pub hierarchical_complete: bool,
    pub hazards: Vec<String>,
}

impl SmoothnessReport {
    pub fn variation_independent(&self) -> bool {
        self.ordered_decomposable.decomposable
    }
}

#[derive(Clone, Debug)]
pub struct Parameterization {
    scheme: VariableScheme,
    sequence: MarginalSequence,
    include_empty: bool,
    assignment: EffectAssignment,
    codings: Vec<CodingKind>,
    components: Vec<ComponentLabel>,
    effect_ranges: Vec<Option<(usize, usize)>>,
    blocks: Vec<Block>,
    verdict: DecomposabilityVerdict,
}

impl Parameterization {
    /// Parameterization on the probability scale (λ_∅ omitted) with one coding for all effects.
    pub fn build(scheme: &VariableScheme, sequence: &MarginalSequence, coding: CodingKind) -> Result<Self> {
        Parameterization::build_with(scheme, sequence, |_| coding, false)
    }

    pub fn build_with<F: Fn(Effect) -> CodingKind>(
        scheme: &VariableScheme,
        sequence: &MarginalSequence,
        coding: F,
        include_empty: bool,
    ) -> Result<Self> {
        if sequence.n_vars() != scheme.n_vars() {
            return Err(MllError::Sequence("sequence and scheme have different variables".into()));
        }
        MarginalSequence::new(scheme, sequence.marginals().to_vec())?;
        let n = scheme.n_vars();
        let assignment = assign_effects(sequence);
        let mut codings = vec![CodingKind::Local; 1usize << n];
        for (b, slot) in codings.iter_mut().enumerate().skip(1) {
            *slot = coding(Effect(b as u32));
        }
        let mut components = Vec::new();
        let mut effect_ranges = vec![None; 1usize << n];
        let mut blocks = Vec::with_capacity(sequence.len());
        for (i, &m) in sequence.marginals().iter().enumerate() {
            let sizes: Vec<usize> = m.indices().map(|j| scheme.size(j)).collect();
            let q = scheme.marginal_cells(m);
            let mut mstrides = vec![1usize; sizes.len()];
            for t in (0..sizes.len().saturating_sub(1)).rev() {
                mstrides[t] = mstrides[t + 1] * sizes[t + 1];
            }
            let mut groups: Vec<KronGroup> = Vec::new();
            let mut lumped = Vec::new();
            for f in assignment.housed_in(i) {
                if f.is_empty() && !include_empty {
                    continue;
                }
                let kind = if f.is_empty() { CodingKind::Local } else { codings[f.bits() as usize] };
                let start = components.len();
                for lv in component_levels(scheme, f) {
                    let mut idx = 0;
                    let mut t = 0;
                    for (pos, j) in m.indices().enumerate() {
                        if f.contains(j) {
                            idx += lv[t] * mstrides[pos];
                            t += 1;
                        }
                    }
                    let comp = components.len();
                    if kind.is_kronecker() || f.is_empty() {
                        let g = match groups.iter().position(|g| g.coding == kind) {
                            Some(g) => g,
                            None => {
                                let fwd: Vec<Vec<f64>> = sizes.iter().map(|&c| axis_rows(kind, c)).collect();
                                let inv = fwd.iter().zip(&sizes).map(|(f, &c)| invert_small(f, c)).collect();
                                groups.push(KronGroup { coding: kind, fwd, inv, entries: Vec::new() });
                                groups.len() - 1
                            }
                        };
                        groups[g].entries.push((comp, idx));
                    } else {
                        lumped.push(LumpedComp {
                            comp,
                            effect: f,
                            kron_index: idx,
                            lumping: Lumping::new(scheme, m, f, kind, &lv),
                        });
                    }
                    components.push(ComponentLabel { marginal_index: i, marginal: m, effect: f, levels: lv });
                }
                effect_ranges[f.bits() as usize] = Some((start, components.len() - start));
            }
            let map = if m == scheme.full() { None } else { Some(scheme.marginal_index_map(m)) };
            blocks.push(Block { marginal: m, sizes, q, map, groups, lumped });
        }
        let verdict = is_ordered_decomposable(sequence);
        if !verdict.decomposable {
            warn!(
                "marginal sequence is not ordered decomposable (prefix {}); components are not variation independent",
                verdict.failing_prefix.unwrap_or(0)
            );
        }
        Ok(Parameterization {
            scheme: scheme.clone(),
            sequence: sequence.clone(),
            include_empty,
            assignment,
            codings,
            components,
            effect_ranges,
            blocks,
            verdict,
        })
    }

    /// Same sequence and codings with λ_∅ included or omitted.
    pub fn with_empty(&self, include_empty: bool) -> Result<Self> {
        let codings = self.codings.clone();
        Parameterization::build_with(&self.scheme, &self.sequence, |e| codings[e.bits() as usize], include_empty)
    }

    pub fn scheme(&self) -> &VariableScheme {
        &self.scheme
    }

    pub fn sequence(&self) -> &MarginalSequence {
        &self.sequence
    }

    pub fn include_empty(&self) -> bool {
        self.include_empty
    }

    pub fn assignment(&self) -> &EffectAssignment {
        &self.assignment
    }

    pub fn coding(&self, e: Effect) -> CodingKind {
        if e.is_empty() {
            CodingKind::Local
        } else {
            self.codings[e.bits() as usize]
        }
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ComponentLabel] {
        &self.components
    }

    pub fn verdict(&self) -> &DecomposabilityVerdict {
        &self.verdict
    }

    /// Component indices of an effect, if it carries components.
    pub fn effect_range(&self, e: Effect) -> Option<Range<usize>> {
        self.effect_ranges
            .get(e.bits() as usize)
            .copied()
            .flatten()
            .map(|(s, l)| s..s + l)
    }

    pub fn component_index(&self, e: Effect, levels: &[usize]) -> Option<usize> {
        self.effect_range(e)?.find(|&k| self.components[k].levels == levels)
    }

    /// Readable label such as `AB@ABC[2,3]` (level labels from the scheme).
    pub fn label(&self, k: usize) -> String {
        let c = &self.components[k];
        let lv: Vec<String> = c
            .effect
            .indices()
            .zip(&c.levels)
            .map(|(j, &l)| self.scheme.level_labels(j)[l].clone())
            .collect();
        let head = format!("{}@{}", self.scheme.effect_label(c.effect), self.scheme.effect_label(c.marginal));
        if lv.is_empty() {
            head
        } else {
            format!("{head}[{}]", lv.join(","))
        }
    }

    fn check_len(&self, m: &[f64]) -> Result<()> {
        if m.len() != self.scheme.cell_count() {
            return Err(MllError::Invalid(format!(
                "expected {} cells, got {}",
                self.scheme.cell_count(),
                m.len()
            )));
        }
        Ok(())
    }

    /// Marginal and lumped sums of `m`, checked for positivity.
    pub fn linearize(&self, m: &[f64]) -> Result<Linearization> {
        self.check_len(m)?;
        let mut mu = Vec::with_capacity(self.blocks.len());
        let mut lumped = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let s = b.sums(m);
            if s.iter().any(|&v| !(v >= POSITIVITY_FLOOR)) {
                return Err(MllError::Positivity(format!("marginal {}", self.scheme.effect_label(b.marginal))));
            }
            let ls: Vec<Vec<f64>> = b.lumped.iter().map(|l| l.lumping.sums(&s)).collect();
            if ls.iter().flatten().any(|&v| !(v >= POSITIVITY_FLOOR)) {
                return Err(MllError::Positivity(format!(
                    "lumped cells of marginal {}",
                    self.scheme.effect_label(b.marginal)
                )));
            }
            mu.push(s);
            lumped.push(ls);
        }
        Ok(Linearization { mu, lumped })
    }

    pub fn lambda_at(&self, lin: &Linearization) -> Vec<f64> {
        let mut out = vec![0.0; self.components.len()];
        for (bi, b) in self.blocks.iter().enumerate() {
            let logmu: Vec<f64> = lin.mu[bi].iter().map(|v| v.ln()).collect();
            for g in &b.groups {
                let mut arr = logmu.clone();
                apply_axes(&mut arr, &b.sizes, &g.fwd, false);
                for &(comp, idx) in &g.entries {
                    out[comp] = arr[idx];
                }
            }
            for (lc, sums) in b.lumped.iter().zip(&lin.lumped[bi]) {
                out[lc.comp] = lc.lumping.scale() * lc.lumping.log_ratios(sums).iter().sum::<f64>();
            }
        }
        out
    }

    /// λ = Bᵀ log(Mᵀm) with no normalization (λ_∅ on the scale of `m`).
    pub fn lambda_of_frequencies(&self, m: &[f64]) -> Result<Vec<f64>> {
        Ok(self.lambda_at(&self.linearize(m)?))
    }

    /// λ of the probability table proportional to `table`.
    pub fn compute_lambda(&self, table: &Table) -> Result<Vec<f64>> {
        if table.scheme() != &self.scheme {
            return Err(MllError::Invalid("table scheme does not match the parameterization".into()));
        }
        let p = table.normalized()?;
        self.lambda_of_frequencies(p.cells())
    }

    /// Λᵀv with Λ = M D⁻¹ B at the linearization point.
    pub fn jacobian_transpose_times(&self, lin: &Linearization, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.components.len()];
        for (bi, b) in self.blocks.iter().enumerate() {
            let w = b.sums(v);
            let z: Vec<f64> = w.iter().zip(&lin.mu[bi]).map(|(a, m)| a / m).collect();
            for g in &b.groups {
                let mut arr = z.clone();
                apply_axes(&mut arr, &b.sizes, &g.fwd, false);
                for &(comp, idx) in &g.entries {
                    out[comp] = arr[idx];
                }
            }
            for (lc, smu) in b.lumped.iter().zip(&lin.lumped[bi]) {
                let sv = lc.lumping.sums(&w);
                let np = lc.lumping.n_pattern;
                out[lc.comp] = lc.lumping.scale()
                    * sv.iter().zip(smu).enumerate().map(|(s, (a, m))| lc.lumping.sign[s % np] * a / m).sum::<f64>();
            }
        }
        out
    }

    /// Λx with Λ = M D⁻¹ B at the linearization point.
    pub fn jacobian_times(&self, lin: &Linearization, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.scheme.cell_count()];
        for (bi, b) in self.blocks.iter().enumerate() {
            let mut g = vec![0.0; b.q];
            let mut touched = false;
            for grp in &b.groups {
                if grp.entries.iter().all(|&(c, _)| x[c] == 0.0) {
                    continue;
                }
                let mut arr = vec![0.0; b.q];
                for &(comp, idx) in &grp.entries {
                    arr[idx] = x[comp];
                }
                apply_axes(&mut arr, &b.sizes, &grp.fwd, true);
                for ((gv, a), m) in g.iter_mut().zip(&arr).zip(&lin.mu[bi]) {
                    *gv += a / m;
                }
                touched = true;
            }
            for (lc, smu) in b.lumped.iter().zip(&lin.lumped[bi]) {
                let xk = x[lc.comp];
                if xk == 0.0 {
                    continue;
                }
                let np = lc.lumping.n_pattern;
                let sc = lc.lumping.scale() * xk;
                for (cell, &s) in lc.lumping.slot.iter().enumerate() {
                    if s != usize::MAX {
                        g[cell] += sc * lc.lumping.sign[s % np] / smu[s];
                    }
                }
                touched = true;
            }
            if touched {
                b.gather_add(&g, &mut out);
            }
        }
        out
    }

    /// ΛC for a components × r matrix C.
    pub fn jacobian_times_matrix(&self, lin: &Linearization, c: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.scheme.cell_count(), c.ncols());
        for j in 0..c.ncols() {
            let col: Vec<f64> = c.column(j).iter().copied().collect();
            let v = self.jacobian_times(lin, &col);
            out.column_mut(j).copy_from_slice(&v);
        }
        out
    }

    /// Λᵀ applied to each column of a cells × r matrix.
    pub fn jacobian_transpose_times_matrix(&self, lin: &Linearization, a: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.components.len(), a.ncols());
        for j in 0..a.ncols() {
            let col: Vec<f64> = a.column(j).iter().copied().collect();
            let v = self.jacobian_transpose_times(lin, &col);
            out.column_mut(j).copy_from_slice(&v);
        }
        out
    }

    /// Dense Jacobian Λ = M·diag(Mᵀm)⁻¹·B, cells × components.
    pub fn jacobian(&self, m: &Table) -> Result<DMatrix<f64>> {
        let lin = self.linearize(m.cells())?;
        Ok(self.jacobian_times_matrix(&lin, &DMatrix::identity(self.components.len(), self.components.len())))
    }

    fn aggregate_rows(&self) -> Vec<(usize, Option<usize>)> {
        let mut rows = Vec::new();
        for (bi, b) in self.blocks.iter().enumerate() {
            rows.push((bi, None));
            for li in 0..b.lumped.len() {
                rows.push((bi, Some(li)));
            }
        }
        rows
    }

    /// Per-marginal pieces of `M` and `B` in marginal-cell coordinates.
    pub fn marginal_blocks(&self) -> Vec<MarginalBlock> {
        let bm = self.b_matrix();
        let mut out: Vec<MarginalBlock> = Vec::with_capacity(self.blocks.len());
        let mut offset = 0;
        for (bi, b) in self.blocks.iter().enumerate() {
            let widths: Vec<usize> = std::iter::once(b.q)
                .chain(b.lumped.iter().map(|l| l.lumping.n_cond * l.lumping.n_pattern))
                .collect();
            let a: usize = widths.iter().sum();
            let mut agg = DMatrix::zeros(b.q, a);
            for c in 0..b.q {
                agg[(c, c)] = 1.0;
            }
            let mut col = b.q;
            for (l, &w) in b.lumped.iter().zip(&widths[1..]) {
                for c in 0..b.q {
                    agg[(c, col + l.lumping.slot[c])] = 1.0;
                }
                col += w;
            }
            let contrasts = bm.rows(offset, a).into_owned();
            offset += a;
            let comps = self.components.iter().enumerate().filter(|(_, c)| c.marginal_index == bi).map(|(k, _)| k).collect();
            out.push(MarginalBlock { marginal: b.marginal, aggregator: agg, contrasts, components: comps });
        }
        out
    }

    /// Dense 0/1 matrix summing cells into marginal cells and lumped cells.
    pub fn m_matrix(&self) -> DMatrix<f64> {
        let n = self.scheme.cell_count();
        let mut cols: Vec<Vec<f64>> = Vec::new();
        for (bi, li) in self.aggregate_rows() {
            let b = &self.blocks[bi];
            let cellmap: Vec<usize> = match &b.map {
                None => (0..n).collect(),
                Some(m) => m.clone(),
            };
            match li {
                None => {
                    for k in 0..b.q {
                        cols.push(cellmap.iter().map(|&c| if c == k { 1.0 } else { 0.0 }).collect());
                    }
                }
                Some(li) => {
                    let lp = &b.lumped[li].lumping;
                    for s in 0..lp.n_cond * lp.n_pattern {
                        cols.push(cellmap.iter().map(|&c| if lp.slot[c] == s { 1.0 } else { 0.0 }).collect());
                    }
                }
            }
        }
        DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])
    }

    /// Dense contrast matrix, aggregate rows × components, block diagonal by marginal.
    pub fn b_matrix(&self) -> DMatrix<f64> {
        let rows = self.aggregate_rows();
        let total: usize = rows
            .iter()
            .map(|&(bi, li)| match li {
                None => self.blocks[bi].q,
                Some(li) => {
                    let lp = &self.blocks[bi].lumped[li].lumping;
                    lp.n_cond * lp.n_pattern
                }
            })
            .sum();
        let mut out = DMatrix::zeros(total, self.components.len());
        let mut offset = 0;
        for (bi, li) in rows {
            let b = &self.blocks[bi];
            match li {
                None => {
                    let mut cats = vec![0usize; b.sizes.len()];
                    for cell in 0..b.q {
                        crate::contrasts::decode_mixed(cell, b.sizes.iter().copied(), &mut cats);
                        for g in &b.groups {
                            for &(comp, _) in &g.entries {
                                let c = &self.components[comp];
                                out[(offset + cell, comp)] =
                                    kronecker_entry(&self.scheme, b.marginal, c.effect, g.coding, &c.levels, &cats);
                            }
                        }
                    }
                    offset += b.q;
                }
                Some(li) => {
                    let lc = &b.lumped[li];
                    let lp = &lc.lumping;
                    for s in 0..lp.n_cond * lp.n_pattern {
                        out[(offset + s, lc.comp)] = lp.sign[s % lp.n_pattern] * lp.scale();
                    }
                    offset += lp.n_cond * lp.n_pattern;
                }
            }
        }
        out
    }

    pub fn check_smoothness(&self) -> SmoothnessReport {
        SmoothnessReport {
            ordered_decomposable: self.verdict.clone(),
            hierarchical_complete: true,
            hazards: Vec::new(),
        }
    }

    /// Probability table whose λ equals `lambda` (λ_∅, if present, is ignored).
    pub fn invert(&self, lambda: &[f64]) -> Result<Table> {
        Ok(self.invert_with(lambda, &InvertOptions::default())?.table)
    }

    /// Frequency table for λ including λ_∅ on the frequency scale.
    pub fn invert_frequencies(&self, lambda: &[f64], opts: &InvertOptions) -> Result<(Table, InvertReport)> {
        if !self.include_empty {
            return Err(MllError::Invalid("frequency inversion needs λ_∅ among the components".into()));
        }
        let rep = self.invert_with(lambda, opts)?;
        let b0 = &self.blocks[0];
        let mu = b0.sums(rep.table.cells());
        let mean_log = mu.iter().map(|v| v.ln()).sum::<f64>() / mu.len() as f64;
        let scale = (lambda[0] - mean_log).exp();
        let cells = rep.table.cells().iter().map(|v| v * scale).collect();
        Ok((Table::new(self.scheme.clone(), cells, TableKind::Counts)?, rep))
    }

    pub fn invert_with(&self, lambda: &[f64], opts: &InvertOptions) -> Result<InvertReport> {
        if lambda.len() != self.components.len() {
            return Err(MllError::Invalid(format!(
                "expected {} components, got {}",
                self.components.len(),
                lambda.len()
            )));
        }
        if lambda.iter().any(|v| !v.is_finite()) {
            return Err(MllError::Invalid("non-finite parameter value".into()));
        }
        let marginals = self.sequence.marginals();
        let mut fixed: Vec<Vec<f64>> = Vec::with_capacity(marginals.len());
        let mut sweeps_total = 0;
        let mut outer_total = 0;
        for (i, b) in self.blocks.iter().enumerate() {
            let m = b.marginal;
            let mut inters: Vec<(Effect, usize)> = Vec::new();
            for (j, &mj) in marginals[..i].iter().enumerate() {
                let t = m.intersection(mj);
                if !t.is_empty() && !inters.iter().any(|(u, _)| *u == t) {
                    inters.push((t, j));
                }
            }
            let targets: Vec<(Vec<usize>, Vec<f64>)> = inters
                .iter()
                .filter(|(t, _)| !inters.iter().any(|(u, _)| t.is_proper_subset_of(*u)))
                .map(|&(t, j)| {
                    let map = sub_index_map(&self.scheme, m, t);
                    let down = sub_index_map(&self.scheme, marginals[j], t);
                    (map, scatter_sum(&fixed[j], &down, self.scheme.marginal_cells(t)))
                })
                .collect();

            let mut base = vec![0.0; b.q];
            for g in &b.groups {
                let mut arr = vec![0.0; b.q];
                let mut any = false;
                for &(comp, idx) in &g.entries {
                    if !self.components[comp].effect.is_empty() {
                        arr[idx] = lambda[comp];
                        any = true;
                    }
                }
                if any {
                    apply_axes(&mut arr, &b.sizes, &g.inv, false);
                    base.iter_mut().zip(&arr).for_each(|(x, a)| *x += a);
                }
            }
            let (mut q, sweeps) = ipf(exp_normalized(&base), &targets, opts, &self.scheme, m)?;
            sweeps_total += sweeps;
            if !b.lumped.is_empty() {
                let (q2, sweeps, outer) = self.solve_lumped(b, &base, q, &targets, lambda, opts)?;
                q = q2;
                sweeps_total += sweeps;
                outer_total += outer;
            }
            fixed.push(q);
        }
        let cells = fixed.pop().unwrap();
        let table = Table::new(self.scheme.clone(), cells, TableKind::Probabilities)?;
        Ok(InvertReport { table, ipf_sweeps: sweeps_total, outer_iterations: outer_total })
    }

    /// Newton iteration on effect-coded proxies for the lumped components of one
    /// marginal, re-fitting the fixed sub-marginals after every step.
    fn solve_lumped(
        &self,
        b: &Block,
        base: &[f64],
        q0: Vec<f64>,
        targets: &[(Vec<usize>, Vec<f64>)],
        lambda: &[f64],
        opts: &InvertOptions,
    ) -> Result<(Vec<f64>, usize, usize)> {
        let h = b.lumped.len();
        let local_inv: Vec<Vec<f64>> =
            b.sizes.iter().map(|&c| invert_small(&axis_rows(CodingKind::Local, c), c)).collect();
        let mut a = DMatrix::zeros(b.q, h);
        for (k, lc) in b.lumped.iter().enumerate() {
            let mut arr = vec![0.0; b.q];
            arr[lc.kron_index] = 1.0;
            apply_axes(&mut arr, &b.sizes, &local_inv, false);
            a.column_mut(k).copy_from_slice(&arr);
            debug_assert!(!lc.effect.is_empty());
        }
        let ncols: usize = targets.iter().map(|(_, t)| t.len()).sum::<usize>() + 1;
        let mut s = DMatrix::zeros(b.q, ncols);
        let mut off = 0;
        for (map, t) in targets {
            for (cell, &k) in map.iter().enumerate() {
                s[(cell, off + k)] = 1.0;
            }
            off += t.len();
        }
        for cell in 0..b.q {
            s[(cell, off)] = 1.0;
        }
        let goal: Vec<f64> = b.lumped.iter().map(|lc| lambda[lc.comp]).collect();
        let residual = |q: &[f64]| -> Vec<f64> {
            b.lumped
                .iter()
                .zip(&goal)
                .map(|(lc, g)| g - lc.lumping.scale() * lc.lumping.log_ratios(&lc.lumping.sums(q)).iter().sum::<f64>())
                .collect()
        };
        let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut theta = vec![0.0; h];
        let mut q = q0;
        let mut r = residual(&q);
        let mut sweeps = 0;
        let mut iters = 0;
        while norm(&r) >= opts.outer_tol {
            iters += 1;
            if iters > opts.max_iter {
                return Err(MllError::Nonexistence(format!(
                    "lumped components of marginal {} did not converge",
                    self.scheme.effect_label(b.marginal)
                )));
            }
            let mut lam_h = DMatrix::zeros(b.q, h);
            for (k, lc) in b.lumped.iter().enumerate() {
                let sums = lc.lumping.sums(&q);
                let np = lc.lumping.n_pattern;
                for (cell, &sl) in lc.lumping.slot.iter().enumerate() {
                    if sl != usize::MAX {
                        lam_h[(cell, k)] = lc.lumping.scale() * lc.lumping.sign[sl % np] / sums[sl];
                    }
                }
            }
            let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&q));
            let g = s.transpose() * &d * &s;
            let gp = g.pseudo_inverse(1e-14).map_err(|e| MllError::Numerical(e.to_string()))?;
            let p = DMatrix::identity(b.q, b.q) - &s * gp * s.transpose() * &d;
            let jac = lam_h.transpose() * &d * p * &a;
            let rv = nalgebra::DVector::from_column_slice(&r);
            let delta = jac
                .lu()
                .solve(&rv)
                .ok_or_else(|| MllError::Numerical("singular Jacobian in lumped inversion".into()))?;
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let trial: Vec<f64> = theta.iter().zip(delta.iter()).map(|(t, d)| t + step * d).collect();
                let mut logq = base.to_vec();
                for k in 0..h {
                    for cell in 0..b.q {
                        logq[cell] += a[(cell, k)] * trial[k];
                    }
                }
                if let Ok((q_new, sw)) = ipf(exp_normalized(&logq), targets, opts, &self.scheme, b.marginal) {
                    sweeps += sw;
                    let r_new = residual(&q_new);
                    if norm(&r_new) < norm(&r) {
                        theta = trial;
                        q = q_new;
                        r = r_new;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                return Err(MllError::Nonexistence(format!(
                    "lumped components of marginal {} cannot be matched",
                    self.scheme.effect_label(b.marginal)
                )));
            }
        }
        Ok((q, sweeps, iters))
    }
}

fn exp_normalized(logq: &[f64]) -> Vec<f64> {
    let mx = logq.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut q: Vec<f64> = logq.iter().map(|v| (v - mx).exp()).collect();
    let s: f64 = q.iter().sum();
    q.iter_mut().for_each(|v| *v /= s);
    q
}

/// Iterative proportional fitting of `q` to the target sub-marginals.
fn ipf(
    mut q: Vec<f64>,
    targets: &[(Vec<usize>, Vec<f64>)],
    opts: &InvertOptions,
    scheme: &VariableScheme,
    marginal: Effect,
) -> Result<(Vec<f64>, usize)> {
    if targets.is_empty() {
        return Ok((q, 0));
    }
    let mut resid = f64::INFINITY;
    for sweep in 0..opts.max_iter {
        resid = 0.0;
        for (map, target) in targets {
            let cur = scatter_sum(&q, map, target.len());
            for (c, t) in cur.iter().zip(target) {
                resid = resid.max((c - t).abs());
            }
            for (v, &k) in q.iter_mut().zip(map) {
                if cur[k] > 0.0 {
                    *v *= target[k] / cur[k];
                }
            }
        }
        if resid < opts.ipf_tol {
            return Ok((q, sweep + 1));
        }
    }
    Err(MllError::Nonexistence(format!(
        "sub-marginals of {} are not jointly compatible: proportional fitting residual {:.3e} after {} sweeps",
        scheme.effect_label(marginal),
        resid,
        opts.max_iter
    )))
}

/// Effects housed more than once in a user-supplied (marginal, effect) list.
pub fn duplicate_effect_hazards(scheme: &VariableScheme, list: &[(Effect, Effect)]) -> Vec<String> {
    let mut out = Vec::new();
    for (i, (m, e)) in list.iter().enumerate() {
        if let Some((m2, _)) = list[..i].iter().find(|(_, f)| f == e) {
            out.push(format!(
                "effect {} appears in marginals {} and {}; the components cannot be part of a smooth parameterization",
                scheme.effect_label(*e),
                scheme.effect_label(*m2),
                scheme.effect_label(*m)
            ));
        }
    }
    out
}

/// Result of the binary collapsibility check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Collapsibility {
    /// Direct comparison λ^M_F = λ^N_F for every non-empty F ⊆ effect.
    pub collapsible: bool,
    /// The signed-sum criterion evaluated on d(M, m).
    pub criterion: bool,
}

pub fn collapsibility_check(table: &Table, effect: Effect, m: Effect, n: Effect) -> Result<Collapsibility> {
    let scheme = table.scheme();
    if (0..scheme.n_vars()).any(|j| scheme.size(j) != 2) {
        return Err(MllError::Invalid("collapsibility check needs a binary scheme".into()));
    }
    if effect.is_empty() || !effect.is_subset_of(m) || !m.is_proper_subset_of(n) || !scheme.contains_effect(n) {
        return Err(MllError::Invalid("need ∅ ≠ effect ⊆ M ⊊ N ⊆ V".into()));
    }
    let p = table.normalized()?;
    let pm = p.marginalize(m)?;
    let pn = p.marginalize(n)?;
    if !pn.is_positive() {
        return Err(MllError::Positivity("table".into()));
    }
    let up = sub_index_map(scheme, n, m);
    let extra = (n.len() - m.len()) as i32;
    let mut d: Vec<f64> = pm.cells().iter().map(|v| v.ln()).collect();
    for (cell, &k) in up.iter().enumerate() {
        d[k] -= pn.cells()[cell].ln() / 2f64.powi(extra);
    }
    let mut criterion = true;
    let emap = sub_index_map(scheme, m, effect);
    let n_e = scheme.marginal_cells(effect);
    for star in 0..n_e {
        let star_cell = emap.iter().position(|&k| k == star).unwrap();
        let mut total = 0.0;
        for f in effect.subsets() {
            let fmap = sub_index_map(scheme, m, f);
            let sign = if (effect.len() - f.len()) % 2 == 0 { 1.0 } else { -1.0 };
            let w = sign / 2f64.powi((m.len() - f.len()) as i32);
            let s: f64 = d.iter().zip(&fmap).filter(|(_, &k)| k == fmap[star_cell]).map(|(v, _)| v).sum();
            total += w * s;
        }
        if total.abs() > 1e-9 {
            criterion = false;
        }
    }
    let mut collapsible = true;
    for f in effect.subsets().into_iter().filter(|f| !f.is_empty()) {
        let a = effect_components(&p, m, f, CodingKind::Local)?;
        let b = effect_components(&p, n, f, CodingKind::Local)?;
        if a.iter().zip(&b).any(|(x, y)| (x - y).abs() > 1e-9) {
            collapsible = false;
        }
    }
    if collapsible != criterion {
        warn!(
            "collapsibility criterion ({criterion}) disagrees with direct comparison ({collapsible}) for effect {}",
            scheme.effect_label(effect)
        );
    }
    Ok(Collapsibility { collapsible, criterion })
}
