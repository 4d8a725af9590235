//! Variable schemes, effects, dense contingency tables and marginal sequences.
//!
//! Cells are stored in lexicographic order with the last variable varying
//! fastest. Effects and marginals are bitmasks over scheme positions.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{MllError, Result};

/// Largest number of variables an [`Effect`] bitmask can address.
pub const MAX_VARIABLES: usize = 32;

const MAX_CELLS: usize = 1 << 40;

/// A subset of scheme variables, stored as a bitmask over positions.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Effect(pub u32);

impl Effect {
    pub const EMPTY: Effect = Effect(0);

    pub fn full(n_vars: usize) -> Effect {
        if n_vars >= 32 {
            Effect(u32::MAX)
        } else {
            Effect((1u32 << n_vars) - 1)
        }
    }

    pub fn single(j: usize) -> Effect {
        Effect(1u32 << j)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Effect {
        Effect(indices.into_iter().fold(0u32, |acc, j| acc | (1u32 << j)))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn contains(self, j: usize) -> bool {
        self.0 & (1u32 << j) != 0
    }

    pub fn is_subset_of(self, other: Effect) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_proper_subset_of(self, other: Effect) -> bool {
        self.is_subset_of(other) && self != other
    }

    pub fn union(self, other: Effect) -> Effect {
        Effect(self.0 | other.0)
    }

    pub fn intersection(self, other: Effect) -> Effect {
        Effect(self.0 & other.0)
    }

    pub fn difference(self, other: Effect) -> Effect {
        Effect(self.0 & !other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Member positions in increasing order.
    pub fn indices(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..32usize).filter(move |j| bits & (1u32 << j) != 0)
    }

    /// All subsets of this effect, in increasing bitmask order (∅ first).
    pub fn subsets(self) -> Vec<Effect> {
        let mut out = Vec::with_capacity(1usize << self.len());
        let mut sub = 0u32;
        loop {
            out.push(Effect(sub));
            if sub == self.0 {
                break;
            }
            sub = (sub.wrapping_sub(self.0)) & self.0;
        }
        out
    }

    /// Ordering used for listing effects: by size, then by bitmask.
    pub fn canonical_cmp(&self, other: &Effect) -> std::cmp::Ordering {
        (self.len(), self.0).cmp(&(other.len(), other.0))
    }
}

impl fmt::Debug for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Effect{:?}", self.indices().collect::<Vec<_>>())
    }
}

/// Ordered list of categorical variables with labelled levels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VariableScheme {
    names: Vec<String>,
    levels: Vec<Vec<String>>,
    strides: Vec<usize>,
    cells: usize,
}

impl VariableScheme {
    pub fn new(variables: Vec<(String, Vec<String>)>) -> Result<Self> {
        if variables.is_empty() {
            return Err(MllError::Scheme("a scheme needs at least one variable".into()));
        }
        if variables.len() > MAX_VARIABLES {
            return Err(MllError::Scheme(format!(
                "at most {MAX_VARIABLES} variables are supported, got {}",
                variables.len()
            )));
        }
        let mut names = Vec::with_capacity(variables.len());
        let mut levels = Vec::with_capacity(variables.len());
        for (name, lv) in variables {
            if name.is_empty() {
                return Err(MllError::Scheme("variable names must be non-empty".into()));
            }
            if names.contains(&name) {
                return Err(MllError::Scheme(format!("duplicate variable name {name:?}")));
            }
            if lv.len() < 2 {
                return Err(MllError::Scheme(format!(
                    "variable {name:?} needs at least two levels"
                )));
            }
            for (i, l) in lv.iter().enumerate() {
                if lv[..i].contains(l) {
                    return Err(MllError::Scheme(format!(
                        "variable {name:?} has duplicate level {l:?}"
                    )));
                }
            }
            names.push(name);
            levels.push(lv);
        }
        let mut strides = vec![1usize; names.len()];
        let mut cells = 1usize;
        for j in (0..names.len()).rev() {
            strides[j] = cells;
            cells = cells
                .checked_mul(levels[j].len())
                .filter(|&c| c <= MAX_CELLS)
                .ok_or_else(|| MllError::Scheme("cell count exceeds addressable range".into()))?;
        }
        Ok(VariableScheme { names, levels, strides, cells })
    }

    /// Scheme whose levels are labelled `1..=c`.
    pub fn from_sizes<S: AsRef<str>>(vars: &[(S, usize)]) -> Result<Self> {
        VariableScheme::new(
            vars.iter()
                .map(|(n, c)| (n.as_ref().to_string(), (1..=*c).map(|l| l.to_string()).collect()))
                .collect(),
        )
    }

    /// Binary scheme with the given variable names.
    pub fn binary<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let vars: Vec<(&str, usize)> = names.iter().map(|n| (n.as_ref(), 2)).collect();
        VariableScheme::from_sizes(&vars)
    }

    pub fn n_vars(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, j: usize) -> &str {
        &self.names[j]
    }

    pub fn size(&self, j: usize) -> usize {
        self.levels[j].len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.levels.iter().map(Vec::len).collect()
    }

    pub fn level_labels(&self, j: usize) -> &[String] {
        &self.levels[j]
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn cell_count(&self) -> usize {
        self.cells
    }

    pub fn full(&self) -> Effect {
        Effect::full(self.n_vars())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn effect_from_names<S: AsRef<str>>(&self, names: &[S]) -> Result<Effect> {
        let mut e = Effect::EMPTY;
        for n in names {
            let j = self
                .index_of(n.as_ref())
                .ok_or_else(|| MllError::Scheme(format!("unknown variable {:?}", n.as_ref())))?;
            e = e.union(Effect::single(j));
        }
        Ok(e)
    }

    pub fn effect_names(&self, e: Effect) -> Vec<String> {
        e.indices().map(|j| self.names[j].clone()).collect()
    }

    /// Compact label: names concatenated when all are one character, else joined by `*`.
    pub fn effect_label(&self, e: Effect) -> String {
        if e.is_empty() {
            return "∅".to_string();
        }
        let names = self.effect_names(e);
        if names.iter().all(|n| n.chars().count() == 1) {
            names.concat()
        } else {
            names.join("*")
        }
    }

    pub fn contains_effect(&self, e: Effect) -> bool {
        e.is_subset_of(self.full())
    }

    /// Cell count of the marginal table over `m`.
    pub fn marginal_cells(&self, m: Effect) -> usize {
        m.indices().map(|j| self.size(j)).product()
    }

    /// Scheme restricted to the variables of `m`, in scheme order.
    pub fn sub_scheme(&self, m: Effect) -> Result<VariableScheme> {
        if m.is_empty() || !self.contains_effect(m) {
            return Err(MllError::Scheme(format!("invalid marginal {m:?}")));
        }
        VariableScheme::new(
            m.indices().map(|j| (self.names[j].clone(), self.levels[j].clone())).collect(),
        )
    }

    pub fn decode(&self, mut index: usize, out: &mut [usize]) {
        for j in 0..self.n_vars() {
            out[j] = index / self.strides[j];
            index %= self.strides[j];
        }
    }

    pub fn encode(&self, cats: &[usize]) -> usize {
        cats.iter().zip(&self.strides).map(|(c, s)| c * s).sum()
    }

    /// For every full-table cell, the index of its cell in the marginal table over `m`.
    pub fn marginal_index_map(&self, m: Effect) -> Vec<usize> {
        let n = self.n_vars();
        let mut mstride = vec![0usize; n];
        let mut acc = 1usize;
        for j in (0..n).rev() {
            if m.contains(j) {
                mstride[j] = acc;
                acc *= self.size(j);
            }
        }
        let mut map = Vec::with_capacity(self.cells);
        let mut cats = vec![0usize; n];
        let mut cur = 0usize;
        for _ in 0..self.cells {
            map.push(cur);
            for j in (0..n).rev() {
                cats[j] += 1;
                cur += mstride[j];
                if cats[j] < self.size(j) {
                    break;
                }
                cur -= mstride[j] * cats[j];
                cats[j] = 0;
            }
        }
        map
    }
}

/// Number of non-redundant components of an effect: ∏(c_j − 1).
pub fn effect_dimension(effect: Effect, scheme: &VariableScheme) -> usize {
    effect.indices().map(|j| scheme.size(j) - 1).product()
}

/// Sum `values` into marginal cells according to an index map.
pub(crate) fn scatter_sum(values: &[f64], map: &[usize], q: usize) -> Vec<f64> {
    let mut out = vec![0.0; q];
    for (v, &i) in values.iter().zip(map) {
        out[i] += v;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableKind {
    Counts,
    Probabilities,
}

/// Dense nonnegative table over a scheme.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    scheme: VariableScheme,
    cells: Vec<f64>,
    kind: TableKind,
}

impl Table {
    pub fn new(scheme: VariableScheme, cells: Vec<f64>, kind: TableKind) -> Result<Self> {
        if cells.len() != scheme.cell_count() {
            return Err(MllError::Table(format!(
                "expected {} cells, got {}",
                scheme.cell_count(),
                cells.len()
            )));
        }
        if let Some(i) = cells.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(MllError::Table(format!("cell {i} is negative or not finite")));
        }
        if kind == TableKind::Probabilities {
            let s: f64 = cells.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(MllError::Table(format!("probabilities sum to {s}, not 1")));
            }
        }
        Ok(Table { scheme, cells, kind })
    }

    pub fn counts(scheme: VariableScheme, cells: Vec<f64>) -> Result<Self> {
        Table::new(scheme, cells, TableKind::Counts)
    }

    pub fn probabilities(scheme: VariableScheme, cells: Vec<f64>) -> Result<Self> {
        Table::new(scheme, cells, TableKind::Probabilities)
    }

    pub fn uniform(scheme: VariableScheme) -> Self {
        let c = scheme.cell_count();
        Table { scheme, cells: vec![1.0 / c as f64; c], kind: TableKind::Probabilities }
    }

    pub fn scheme(&self) -> &VariableScheme {
        &self.scheme
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn into_cells(self) -> Vec<f64> {
        self.cells
    }

    pub fn kind(&self) -> TableKind {
        self.kind
    }

    pub fn total(&self) -> f64 {
        self.cells.iter().sum()
    }

    pub fn is_positive(&self) -> bool {
        self.cells.iter().all(|&v| v >= 1e-300)
    }

    /// Probability table proportional to this one.
    pub fn normalized(&self) -> Result<Table> {
        let s = self.total();
        if !(s > 0.0) {
            return Err(MllError::Table("cannot normalize a table with zero total".into()));
        }
        let mut cells: Vec<f64> = self.cells.iter().map(|v| v / s).collect();
        let drift: f64 = 1.0 - cells.iter().sum::<f64>();
        if let Some(mx) = cells.iter_mut().max_by(|a, b| a.total_cmp(b)) {
            *mx += drift;
        }
        Ok(Table { scheme: self.scheme.clone(), cells, kind: TableKind::Probabilities })
    }

    /// Marginal table over `marginal`; kind is preserved.
    pub fn marginalize(&self, marginal: Effect) -> Result<Table> {
        if marginal == self.scheme.full() {
            return Ok(self.clone());
        }
        let sub = self.scheme.sub_scheme(marginal)?;
        let map = self.scheme.marginal_index_map(marginal);
        let cells = scatter_sum(&self.cells, &map, sub.cell_count());
        Ok(Table { scheme: sub, cells, kind: self.kind })
    }
}

/// 0/1 matrix with one row per cell and one column per marginal cell, stacked over
/// `marginals` in order, so that `Mᵀm` stacks the marginal tables.
pub fn marginalization_matrix(scheme: &VariableScheme, marginals: &[Effect]) -> Result<DMatrix<f64>> {
    for m in marginals {
        if m.is_empty() || !scheme.contains_effect(*m) {
            return Err(MllError::Scheme(format!("invalid marginal {m:?}")));
        }
    }
    let total: usize = marginals.iter().map(|m| scheme.marginal_cells(*m)).sum();
    let mut out = DMatrix::zeros(scheme.cell_count(), total);
    let mut offset = 0;
    for &m in marginals {
        for (i, k) in scheme.marginal_index_map(m).into_iter().enumerate() {
            out[(i, offset + k)] = 1.0;
        }
        offset += scheme.marginal_cells(m);
    }
    Ok(out)
}

/// Non-decreasing sequence of marginals ending in the full variable set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarginalSequence {
    marginals: Vec<Effect>,
    n_vars: usize,
}

impl MarginalSequence {
    pub fn new(scheme: &VariableScheme, marginals: Vec<Effect>) -> Result<Self> {
        let full = scheme.full();
        if marginals.is_empty() {
            return Err(MllError::Sequence("empty sequence".into()));
        }
        for (i, m) in marginals.iter().enumerate() {
            if m.is_empty() || !m.is_subset_of(full) {
                return Err(MllError::Sequence(format!("marginal {} is not a valid variable set", i + 1)));
            }
            for (h, earlier) in marginals[..i].iter().enumerate() {
                if m.is_subset_of(*earlier) {
                    return Err(MllError::Sequence(format!(
                        "marginal {} ({}) is contained in earlier marginal {} ({})",
                        i + 1,
                        scheme.effect_label(*m),
                        h + 1,
                        scheme.effect_label(*earlier)
                    )));
                }
            }
        }
        if *marginals.last().unwrap() != full {
            return Err(MllError::Sequence("the last marginal must be the full variable set".into()));
        }
        Ok(MarginalSequence { marginals, n_vars: scheme.n_vars() })
    }

    pub fn from_names<S: AsRef<str>>(scheme: &VariableScheme, marginals: &[Vec<S>]) -> Result<Self> {
        let ms = marginals
            .iter()
            .map(|m| scheme.effect_from_names(m))
            .collect::<Result<Vec<_>>>()?;
        MarginalSequence::new(scheme, ms)
    }

    /// The one-element sequence (𝒱).
    pub fn saturated(scheme: &VariableScheme) -> Self {
        MarginalSequence { marginals: vec![scheme.full()], n_vars: scheme.n_vars() }
    }

    pub fn marginals(&self) -> &[Effect] {
        &self.marginals
    }

    pub fn len(&self) -> usize {
        self.marginals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marginals.is_empty()
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// Index of the first marginal containing `e`.
    pub fn housing(&self, e: Effect) -> Option<usize> {
        self.marginals.iter().position(|m| e.is_subset_of(*m))
    }
}

/// Map from every effect (indexed by bitmask) to the first marginal containing it.
#[derive(Clone, Debug)]
pub struct EffectAssignment {
    index: Vec<Option<usize>>,
}

impl EffectAssignment {
    pub fn get(&self, e: Effect) -> Option<usize> {
        self.index.get(e.bits() as usize).copied().flatten()
    }

    /// Effects housed in marginal `i`, in canonical order.
    pub fn housed_in(&self, i: usize) -> Vec<Effect> {
        let mut out: Vec<Effect> = (0..self.index.len())
            .filter(|&b| self.index[b] == Some(i))
            .map(|b| Effect(b as u32))
            .collect();
        out.sort_by(Effect::canonical_cmp);
        out
    }
}

pub fn assign_effects(seq: &MarginalSequence) -> EffectAssignment {
    let n = seq.n_vars();
    let mut index = vec![None; 1usize << n];
    for (i, m) in seq.marginals().iter().enumerate().rev() {
        for sub in m.subsets() {
            index[sub.bits() as usize] = Some(i);
        }
    }
    EffectAssignment { index }
}

/// Outcome of the ordered-decomposability test.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecomposabilityVerdict {
    pub decomposable: bool,
    /// 1-based length of the first prefix whose maximal elements admit no
    /// running-intersection ordering.
    pub failing_prefix: Option<usize>,
    /// Maximal elements of the failing prefix, or of the whole sequence.
    pub maximal: Vec<Effect>,
    /// A running-intersection ordering of `maximal` when one exists.
    pub ordering: Vec<Effect>,
    /// Members that cannot be peeled off when no ordering exists.
    pub core: Vec<Effect>,
}

/// Maximal elements of a family of sets, in their original order.
pub fn maximal_elements(sets: &[Effect]) -> Vec<Effect> {
    let mut out: Vec<Effect> = Vec::new();
    for (i, s) in sets.iter().enumerate() {
        let dominated = sets
            .iter()
            .enumerate()
            .any(|(h, t)| s.is_proper_subset_of(*t) || (h < i && s == t));
        if !dominated {
            out.push(*s);
        }
    }
    out
}

/// Running-intersection ordering of `sets` by repeated removal of ears: a member
/// whose overlap with the union of the others lies inside a single other member.
/// On failure returns the irreducible remainder.
pub fn running_intersection_order(sets: &[Effect]) -> std::result::Result<Vec<Effect>, Vec<Effect>> {
    let mut live: Vec<Effect> = sets.to_vec();
    let mut removed: Vec<Effect> = Vec::new();
    while live.len() > 1 {
        let mut ear = None;
        for i in (0..live.len()).rev() {
            let rest = live
                .iter()
                .enumerate()
                .filter(|&(h, _)| h != i)
                .fold(Effect::EMPTY, |acc, (_, s)| acc.union(*s));
            let overlap = live[i].intersection(rest);
            if live
                .iter()
                .enumerate()
                .any(|(h, g)| h != i && overlap.is_subset_of(*g))
            {
                ear = Some(i);
                break;
            }
        }
        match ear {
            Some(i) => removed.push(live.remove(i)),
            None => return Err(live),
        }
    }
    let mut order = live;
    order.extend(removed.into_iter().rev());
    Ok(order)
}

pub fn is_ordered_decomposable(seq: &MarginalSequence) -> DecomposabilityVerdict {
    let ms = seq.marginals();
    let k = ms.len();
    if k <= 2 {
        let maximal = maximal_elements(ms);
        return DecomposabilityVerdict {
            decomposable: true,
            failing_prefix: None,
            ordering: maximal.clone(),
            maximal,
            core: Vec::new(),
        };
    }
    let mut last_order = Vec::new();
    for j in 3..=k {
        let maximal = maximal_elements(&ms[..j]);
        if maximal.len() <= 2 {
            last_order = maximal;
            continue;
        }
        match running_intersection_order(&maximal) {
            Ok(order) => last_order = order,
            Err(core) => {
                return DecomposabilityVerdict {
                    decomposable: false,
                    failing_prefix: Some(j),
                    maximal,
                    ordering: Vec::new(),
                    core,
                }
            }
        }
    }
    DecomposabilityVerdict {
        decomposable: true,
        failing_prefix: None,
        maximal: maximal_elements(ms),
        ordering: last_order,
        core: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abcd() -> VariableScheme {
        VariableScheme::binary(&["A", "B", "C", "D"]).unwrap()
    }

    #[test]
    fn strides_last_fastest() {
        let s = VariableScheme::from_sizes(&[("A", 2), ("B", 3), ("C", 2)]).unwrap();
        assert_eq!(s.strides(), &[6, 2, 1]);
        let mut cats = [0; 3];
        s.decode(7, &mut cats);
        assert_eq!(cats, [1, 0, 1]);
        assert_eq!(s.encode(&cats), 7);
    }

    #[test]
    fn scheme_rejects_bad_input() {
        assert!(VariableScheme::from_sizes(&[("A", 1)]).is_err());
        assert!(VariableScheme::from_sizes(&[("A", 2), ("A", 2)]).is_err());
        assert!(VariableScheme::from_sizes(&[("", 2)]).is_err());
        let huge: Vec<(String, usize)> = (0..32).map(|i| (format!("V{i}"), 1000)).collect();
        assert!(VariableScheme::from_sizes(&huge).is_err());
    }

    #[test]
    fn men_table_row_margin() {
        let s = VariableScheme::binary(&["T", "R"]).unwrap();
        let t = Table::counts(s.clone(), vec![20.0, 80.0, 10.0, 90.0]).unwrap();
        let m = t.marginalize(s.effect_from_names(&["T"]).unwrap()).unwrap();
        assert_eq!(m.cells(), &[100.0, 100.0]);
        assert_eq!(t.marginalize(s.full()).unwrap(), t);
    }

    #[test]
    fn marginal_map_matches_nested_loops() {
        let s = VariableScheme::from_sizes(&[("A", 2), ("B", 3), ("C", 2)]).unwrap();
        let vals: Vec<f64> = (0..12).map(|i| (i * i % 7) as f64 + 0.5).collect();
        let t = Table::counts(s.clone(), vals.clone()).unwrap();
        let ac = t.marginalize(Effect::from_indices([0, 2])).unwrap();
        for a in 0..2 {
            for c in 0..2 {
                let mut sum = 0.0;
                for b in 0..3 {
                    sum += vals[a * 6 + b * 2 + c];
                }
                assert_eq!(ac.cells()[a * 2 + c], sum);
            }
        }
    }

    #[test]
    fn marginalization_matrix_homogeneity_layout() {
        let s = VariableScheme::binary(&["A", "B"]).unwrap();
        let m = marginalization_matrix(&s, &[Effect::single(0), Effect::single(1)]).unwrap();
        let want = [[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0], [1.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0, 1.0]];
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(m[(c, r)], want[r][c]);
            }
        }
        let id = marginalization_matrix(&s, &[s.full()]).unwrap();
        assert_eq!(id, DMatrix::identity(4, 4));
    }

    #[test]
    fn sequence_validation() {
        let s = abcd();
        let ab = s.effect_from_names(&["A", "B"]).unwrap();
        let a = Effect::single(0);
        assert!(MarginalSequence::new(&s, vec![ab, a, s.full()]).is_err());
        assert!(MarginalSequence::new(&s, vec![a, ab]).is_err());
        assert!(MarginalSequence::new(&s, vec![a, ab, s.full()]).is_ok());
    }

    #[test]
    fn assignment_for_ab_abcd() {
        let s = abcd();
        let seq = MarginalSequence::from_names(&s, &[vec!["A", "B"], vec!["A", "B", "C", "D"]]).unwrap();
        let asg = assign_effects(&seq);
        for e in s.full().subsets() {
            let want = if e.is_subset_of(Effect(0b0011)) { 0 } else { 1 };
            assert_eq!(asg.get(e), Some(want));
        }
        assert_eq!(asg.housed_in(0).len(), 4);
        assert_eq!(asg.housed_in(1).len(), 12);
    }

    #[test]
    fn subsets_enumeration() {
        let e = Effect(0b1011);
        let subs = e.subsets();
        assert_eq!(subs.len(), 8);
        assert!(subs.iter().all(|s| s.is_subset_of(e)));
        assert_eq!(subs[0], Effect::EMPTY);
    }

    #[test]
    fn effect_dimensions_sum_to_cells() {
        let s = VariableScheme::from_sizes(&[("A", 2), ("B", 3), ("C", 4)]).unwrap();
        let total: usize = s.full().subsets().into_iter().map(|e| effect_dimension(e, &s)).sum();
        assert_eq!(total, 24);
        assert_eq!(effect_dimension(Effect::EMPTY, &s), 1);
        assert_eq!(effect_dimension(Effect::from_indices([0, 1]), &s), 2);
    }

    #[test]
    fn decomposability_fixtures() {
        let s = VariableScheme::binary(&["A", "B", "C"]).unwrap();
        let ok = MarginalSequence::from_names(&s, &[vec!["A", "B"], vec!["A", "C"], vec!["A", "B", "C"]]).unwrap();
        assert!(is_ordered_decomposable(&ok).decomposable);
        let bad = MarginalSequence::from_names(
            &s,
            &[vec!["A", "B"], vec!["A", "C"], vec!["B", "C"], vec!["A", "B", "C"]],
        )
        .unwrap();
        let v = is_ordered_decomposable(&bad);
        assert!(!v.decomposable);
        assert_eq!(v.failing_prefix, Some(3));
        assert_eq!(v.core.len(), 3);
    }

    #[test]
    fn chains_are_decomposable() {
        let s = abcd();
        let seq = MarginalSequence::new(
            &s,
            vec![Effect(0b0001), Effect(0b0011), Effect(0b0111), Effect(0b1111)],
        )
        .unwrap();
        assert!(is_ordered_decomposable(&seq).decomposable);
    }
}
