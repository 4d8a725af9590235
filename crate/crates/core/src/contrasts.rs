//! Log-linear parameters by recursion, contrast blocks for the four odds-ratio
//! codings, and generalized odds ratios on marginal and lumped tables.
//!
//! Components of an effect are indexed by level tuples of the effect's
//! variables (0-based, every level ≥ 1; first levels are redundant), listed
//! lexicographically with the last variable fastest.
//!
//! Scaling. Local coding is effect coding. For the other codings a component is
//! `2^{-|E|}` times the average, over categories of the marginal's remaining
//! variables, of the log generalized odds ratio. All four codings then agree on
//! binary variables.

use nalgebra::DMatrix;

use crate::error::{MllError, Result};
use crate::table::{Effect, Table, VariableScheme};

pub const POSITIVITY_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum CodingKind {
    #[default]
    Local,
    Spanning,
    Global,
    Continuation,
}

impl CodingKind {
    pub fn name(self) -> &'static str {
        match self {
            CodingKind::Local => "local",
            CodingKind::Spanning => "spanning",
            CodingKind::Global => "global",
            CodingKind::Continuation => "continuation",
        }
    }

    pub fn parse(s: &str) -> Option<CodingKind> {
        match s {
            "local" => Some(CodingKind::Local),
            "spanning" => Some(CodingKind::Spanning),
            "global" => Some(CodingKind::Global),
            "continuation" => Some(CodingKind::Continuation),
            _ => None,
        }
    }

    /// Codings whose contrast columns are Kronecker products of per-variable vectors.
    pub fn is_kronecker(self) -> bool {
        matches!(self, CodingKind::Local | CodingKind::Spanning)
    }
}

/// Per-variable map for Kronecker codings, `c × c` row-major: row 0 averages,
/// row `l` is the contrast for level `l`.
pub fn axis_rows(coding: CodingKind, c: usize) -> Vec<f64> {
    let inv = 1.0 / c as f64;
    let mut rows = vec![0.0; c * c];
    for x in 0..c {
        rows[x] = inv;
    }
    for l in 1..c {
        for x in 0..c {
            rows[l * c + x] = match coding {
                CodingKind::Spanning => {
                    0.5 * (if x == l { 1.0 } else { 0.0 } - if x == 0 { 1.0 } else { 0.0 })
                }
                _ => (if x == l { 1.0 } else { 0.0 }) - inv,
            };
        }
    }
    rows
}

/// Level tuples (0-based, all ≥ 1) of the non-redundant components of `effect`.
pub fn component_levels(scheme: &VariableScheme, effect: Effect) -> Vec<Vec<usize>> {
    let vars: Vec<usize> = effect.indices().collect();
    let mut out = vec![Vec::with_capacity(vars.len())];
    for &j in &vars {
        let mut next = Vec::with_capacity(out.len() * (scheme.size(j) - 1));
        for t in &out {
            for l in 1..scheme.size(j) {
                let mut u = t.clone();
                u.push(l);
                next.push(u);
            }
        }
        out = next;
    }
    out
}

fn check_positive(values: &[f64], what: &str) -> Result<()> {
    if values.iter().any(|&v| !(v >= POSITIVITY_FLOOR)) {
        return Err(MllError::Positivity(what.to_string()));
    }
    Ok(())
}

/// Full (redundant) array of ordinary log-linear parameters of `effect`,
/// indexed by all category combinations of the effect's variables.
pub fn loglinear_recursion(table: &Table, effect: Effect) -> Result<Vec<f64>> {
    let scheme = table.scheme();
    if !scheme.contains_effect(effect) {
        return Err(MllError::Invalid(format!("effect {effect:?} is not in the scheme")));
    }
    let p = table.normalized()?;
    check_positive(p.cells(), "table")?;
    let logp: Vec<f64> = p.cells().iter().map(|v| v.ln()).collect();
    let cells = scheme.cell_count() as f64;

    let mut subs = effect.subsets();
    subs.sort_by(Effect::canonical_cmp);
    let mut lam: Vec<(Effect, Vec<f64>)> = Vec::with_capacity(subs.len());
    for f in subs {
        let q = scheme.marginal_cells(f);
        let map = scheme.marginal_index_map(f);
        let mut vals = vec![0.0; q];
        for (v, &k) in logp.iter().zip(&map) {
            vals[k] += v;
        }
        let per = cells / q as f64;
        for v in &mut vals {
            *v /= per;
        }
        if !f.is_empty() {
            let fvars: Vec<usize> = f.indices().collect();
            let mut cats = vec![0usize; fvars.len()];
            for (k, v) in vals.iter_mut().enumerate() {
                decode_mixed(k, fvars.iter().map(|&j| scheme.size(j)), &mut cats);
                for (g, gv) in &lam {
                    if g.is_proper_subset_of(f) {
                        let mut idx = 0;
                        for (t, &j) in fvars.iter().enumerate() {
                            if g.contains(j) {
                                idx = idx * scheme.size(j) + cats[t];
                            }
                        }
                        *v -= gv[idx];
                    }
                }
            }
        }
        lam.push((f, vals));
    }
    Ok(lam.pop().unwrap().1)
}

/// Decode a lexicographic index over the given sizes (last fastest).
pub(crate) fn decode_mixed<I>(mut k: usize, sizes: I, out: &mut [usize])
where
    I: DoubleEndedIterator<Item = usize> + ExactSizeIterator,
{
    let n = sizes.len();
    for (t, c) in sizes.rev().enumerate() {
        out[n - 1 - t] = k % c;
        k /= c;
    }
}

/// Contrast columns for one effect within one marginal.
#[derive(Clone, Debug)]
pub struct ContrastBlock {
    pub effect: Effect,
    pub marginal: Effect,
    pub coding: CodingKind,
    /// Rows are lumped cells (marginal cells for Kronecker codings), one column
    /// per non-redundant component.
    pub columns: DMatrix<f64>,
    /// Marginal cells × lumped cells membership; `None` when rows are marginal cells.
    pub lumping: Option<DMatrix<f64>>,
}

/// Low/high level sets of one effect variable for one component level.
fn level_sets(coding: CodingKind, response: bool, c: usize, k: usize) -> (Vec<usize>, Vec<usize>) {
    match coding {
        CodingKind::Local => (vec![k - 1], vec![k]),
        CodingKind::Spanning => (vec![0], vec![k]),
        CodingKind::Global => ((0..k).collect(), (k..c).collect()),
        CodingKind::Continuation => {
            if response {
                (vec![k - 1], (k..c).collect())
            } else {
                (vec![k - 1], vec![k])
            }
        }
    }
}

/// Assignment of marginal cells to the lumped cells that enter one generalized
/// odds ratio, for every conditioning category.
#[derive(Clone, Debug)]
pub(crate) struct Lumping {
    /// Per marginal cell: slot `cond * 2^|E| + pattern`, or `usize::MAX` if unused.
    pub slot: Vec<usize>,
    pub n_cond: usize,
    pub n_pattern: usize,
    /// Sign of each pattern, (−1)^(number of low coordinates).
    pub sign: Vec<f64>,
}

impl Lumping {
    pub fn new(
        scheme: &VariableScheme,
        marginal: Effect,
        effect: Effect,
        coding: CodingKind,
        levels: &[usize],
    ) -> Lumping {
        let mvars: Vec<usize> = marginal.indices().collect();
        let evars: Vec<usize> = effect.indices().collect();
        let response = evars.last().copied();
        let sets: Vec<(Vec<usize>, Vec<usize>)> = evars
            .iter()
            .zip(levels)
            .map(|(&j, &k)| level_sets(coding, Some(j) == response, scheme.size(j), k))
            .collect();
        let n_pattern = 1usize << evars.len();
        let n_cond: usize =
            mvars.iter().filter(|j| !effect.contains(**j)).map(|&j| scheme.size(j)).product();
        let q = scheme.marginal_cells(marginal);
        let mut slot = vec![usize::MAX; q];
        let mut cats = vec![0usize; mvars.len()];
        'cells: for (cell, s) in slot.iter_mut().enumerate() {
            decode_mixed(cell, mvars.iter().map(|&j| scheme.size(j)), &mut cats);
            let mut pattern = 0usize;
            let mut cond = 0usize;
            let mut t = 0usize;
            for (pos, &j) in mvars.iter().enumerate() {
                let x = cats[pos];
                if effect.contains(j) {
                    let (low, high) = &sets[t];
                    let bit = evars.len() - 1 - t;
                    if high.contains(&x) {
                        pattern |= 1 << bit;
                    } else if !low.contains(&x) {
                        continue 'cells;
                    }
                    t += 1;
                } else {
                    cond = cond * scheme.size(j) + x;
                }
            }
            *s = cond * n_pattern + pattern;
        }
        let sign = (0..n_pattern)
            .map(|p| if (evars.len() - (p as u32).count_ones() as usize) % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        Lumping { slot, n_cond, n_pattern, sign }
    }

    /// Lumped sums of a marginal array.
    pub fn sums(&self, marginal_values: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; self.n_cond * self.n_pattern];
        for (v, &k) in marginal_values.iter().zip(&self.slot) {
            if k != usize::MAX {
                s[k] += v;
            }
        }
        s
    }

    /// Log generalized odds ratio for each conditioning category.
    pub fn log_ratios(&self, sums: &[f64]) -> Vec<f64> {
        (0..self.n_cond)
            .map(|c| {
                (0..self.n_pattern)
                    .map(|p| self.sign[p] * sums[c * self.n_pattern + p].ln())
                    .sum()
            })
            .collect()
    }

    /// Weight turning the summed log ratios into the component value.
    pub fn scale(&self) -> f64 {
        1.0 / (self.n_pattern as f64 * self.n_cond as f64)
    }
}

fn validate(scheme: &VariableScheme, marginal: Effect, effect: Effect) -> Result<()> {
    if marginal.is_empty() || !scheme.contains_effect(marginal) {
        return Err(MllError::Invalid(format!("invalid marginal {marginal:?}")));
    }
    if !effect.is_subset_of(marginal) {
        return Err(MllError::Invalid(format!(
            "effect {} is not contained in marginal {}",
            scheme.effect_label(effect),
            scheme.effect_label(marginal)
        )));
    }
    Ok(())
}

/// Value of the Kronecker contrast vector of component `levels` at marginal cell `cats`.
pub(crate) fn kronecker_entry(
    scheme: &VariableScheme,
    marginal: Effect,
    effect: Effect,
    coding: CodingKind,
    levels: &[usize],
    cats: &[usize],
) -> f64 {
    let mut w = 1.0;
    let mut t = 0;
    for (pos, j) in marginal.indices().enumerate() {
        let c = scheme.size(j);
        let x = cats[pos];
        if effect.contains(j) {
            let l = levels[t];
            t += 1;
            w *= match coding {
                CodingKind::Spanning => {
                    0.5 * (if x == l { 1.0 } else { 0.0 } - if x == 0 { 1.0 } else { 0.0 })
                }
                _ => (if x == l { 1.0 } else { 0.0 }) - 1.0 / c as f64,
            };
        } else {
            w /= c as f64;
        }
    }
    w
}

pub fn contrast_matrix(
    scheme: &VariableScheme,
    marginal: Effect,
    effect: Effect,
    coding: CodingKind,
) -> Result<ContrastBlock> {
    validate(scheme, marginal, effect)?;
    let q = scheme.marginal_cells(marginal);
    let comps = component_levels(scheme, effect);
    let msizes: Vec<usize> = marginal.indices().map(|j| scheme.size(j)).collect();
    if coding.is_kronecker() || effect.is_empty() {
        let mut columns = DMatrix::zeros(q, comps.len());
        let mut cats = vec![0usize; msizes.len()];
        for cell in 0..q {
            decode_mixed(cell, msizes.iter().copied(), &mut cats);
            for (k, lv) in comps.iter().enumerate() {
                columns[(cell, k)] = kronecker_entry(scheme, marginal, effect, coding, lv, &cats);
            }
        }
        return Ok(ContrastBlock { effect, marginal, coding, columns, lumping: None });
    }
    let lumps: Vec<Lumping> =
        comps.iter().map(|lv| Lumping::new(scheme, marginal, effect, coding, lv)).collect();
    let per = lumps[0].n_cond * lumps[0].n_pattern;
    let rows = per * comps.len();
    let mut columns = DMatrix::zeros(rows, comps.len());
    let mut lumping = DMatrix::zeros(q, rows);
    for (k, lp) in lumps.iter().enumerate() {
        for s in 0..per {
            columns[(k * per + s, k)] = lp.sign[s % lp.n_pattern] * lp.scale();
        }
        for (cell, &s) in lp.slot.iter().enumerate() {
            if s != usize::MAX {
                lumping[(cell, k * per + s)] = 1.0;
            }
        }
    }
    Ok(ContrastBlock { effect, marginal, coding, columns, lumping: Some(lumping) })
}

/// Generalized odds ratios of an effect within a marginal.
#[derive(Clone, Debug, PartialEq)]
pub struct OddsRatios {
    /// Variables of the marginal outside the effect.
    pub conditioning: Effect,
    pub n_conditioning: usize,
    pub n_components: usize,
    /// `values[c * n_components + k]`: ratio for component `k` at conditioning category `c`.
    pub values: Vec<f64>,
}

impl OddsRatios {
    pub fn get(&self, cond: usize, component: usize) -> f64 {
        self.values[cond * self.n_components + component]
    }
}

pub fn odds_ratios(table: &Table, marginal: Effect, effect: Effect, coding: CodingKind) -> Result<OddsRatios> {
    let scheme = table.scheme();
    validate(scheme, marginal, effect)?;
    if effect.is_empty() {
        return Err(MllError::Invalid("odds ratios need a non-empty effect".into()));
    }
    let p = table.normalized()?;
    let pm = p.marginalize(marginal)?;
    let comps = component_levels(scheme, effect);
    let lumps: Vec<Lumping> =
        comps.iter().map(|lv| Lumping::new(scheme, marginal, effect, coding, lv)).collect();
    let n_cond = lumps[0].n_cond;
    let mut values = vec![0.0; n_cond * comps.len()];
    for (k, lp) in lumps.iter().enumerate() {
        let sums = lp.sums(pm.cells());
        check_positive(&sums, "lumped table")?;
        for (c, lr) in lp.log_ratios(&sums).into_iter().enumerate() {
            values[c * comps.len() + k] = lr.exp();
        }
    }
    Ok(OddsRatios {
        conditioning: marginal.difference(effect),
        n_conditioning: n_cond,
        n_components: comps.len(),
        values,
    })
}

/// Component values of `effect` in `marginal` under `coding`, from a probability table.
pub fn effect_components(table: &Table, marginal: Effect, effect: Effect, coding: CodingKind) -> Result<Vec<f64>> {
    let scheme = table.scheme();
    let block = contrast_matrix(scheme, marginal, effect, coding)?;
    let pm = table.normalized()?.marginalize(marginal)?;
    let agg: Vec<f64> = match &block.lumping {
        None => pm.cells().to_vec(),
        Some(l) => (0..l.ncols()).map(|r| (0..l.nrows()).map(|c| l[(c, r)] * pm.cells()[c]).sum()).collect(),
    };
    check_positive(&agg, "marginal table")?;
    let logs: Vec<f64> = agg.iter().map(|v| v.ln()).collect();
    Ok((0..block.columns.ncols())
        .map(|k| (0..block.columns.nrows()).map(|r| block.columns[(r, k)] * logs[r]).sum())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sch(sizes: &[usize]) -> VariableScheme {
        let names = ["A", "B", "C", "D", "E"];
        let v: Vec<(&str, usize)> = sizes.iter().enumerate().map(|(i, &c)| (names[i], c)).collect();
        VariableScheme::from_sizes(&v).unwrap()
    }

    fn pseudo_table(s: &VariableScheme, seed: u64) -> Table {
        let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let cells = (0..s.cell_count())
            .map(|_| {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                0.2 + ((x >> 33) as f64) / (1u64 << 31) as f64
            })
            .collect();
        Table::counts(s.clone(), cells).unwrap().normalized().unwrap()
    }

    #[test]
    fn treatment_tables_odds_ratio() {
        let s = VariableScheme::binary(&["T", "R"]).unwrap();
        for cells in [[20.0, 80.0, 10.0, 90.0], [60.0, 40.0, 40.0, 60.0]] {
            let t = Table::counts(s.clone(), cells.to_vec()).unwrap();
            let or = odds_ratios(&t, s.full(), s.full(), CodingKind::Local).unwrap();
            assert!((or.values[0] - 2.25).abs() < 1e-12);
        }
    }

    #[test]
    fn two_by_two_interaction_is_quarter_log_or() {
        let s = sch(&[2, 2]);
        let t = pseudo_table(&s, 3);
        let p = t.cells();
        let lam = loglinear_recursion(&t, s.full()).unwrap();
        let or = p[0] * p[3] / (p[1] * p[2]);
        assert!((lam[3] - 0.25 * or.ln()).abs() < 1e-12);
    }

    #[test]
    fn eighth_root_identity_in_three_way() {
        let s = sch(&[2, 2, 2]);
        let t = pseudo_table(&s, 11);
        let p = t.cells();
        let lam = loglinear_recursion(&t, Effect::from_indices([0, 1])).unwrap();
        let idx = |a: usize, b: usize, c: usize| a * 4 + b * 2 + c;
        let ratio = (p[idx(1, 0, 0)] * p[idx(0, 1, 0)] * p[idx(1, 0, 1)] * p[idx(0, 1, 1)])
            / (p[idx(0, 0, 0)] * p[idx(1, 1, 0)] * p[idx(0, 0, 1)] * p[idx(1, 1, 1)]);
        assert!((lam[2] - ratio.ln() / 8.0).abs() < 1e-12);
    }

    #[test]
    fn recursion_sums_to_zero_on_each_axis() {
        let s = sch(&[3, 2, 4]);
        let t = pseudo_table(&s, 5);
        let lam = loglinear_recursion(&t, Effect::from_indices([0, 2])).unwrap();
        for a in 0..3 {
            assert!((0..4).map(|c| lam[a * 4 + c]).sum::<f64>().abs() < 1e-10);
        }
        for c in 0..4 {
            assert!((0..3).map(|a| lam[a * 4 + c]).sum::<f64>().abs() < 1e-10);
        }
    }

    #[test]
    fn local_columns_match_recursion() {
        let s = sch(&[2, 3, 3]);
        for seed in 0..20 {
            let t = pseudo_table(&s, seed);
            for m in [Effect(0b011), Effect(0b111), Effect(0b110)] {
                for e in m.subsets() {
                    let comps = effect_components(&t, m, e, CodingKind::Local).unwrap();
                    let tm = t.marginalize(m).unwrap();
                    let sub = tm.scheme().clone();
                    let es = sub
                        .effect_from_names(&s.effect_names(e))
                        .unwrap();
                    let full = loglinear_recursion(&tm, es).unwrap();
                    let levels = component_levels(&s, e);
                    for (k, lv) in levels.iter().enumerate() {
                        let mut idx = 0;
                        for (t_, j) in e.indices().enumerate() {
                            idx = idx * s.size(j) + lv[t_];
                        }
                        assert!((comps[k] - full[idx]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn two_by_two_local_column() {
        let s = sch(&[2, 2]);
        let b = contrast_matrix(&s, s.full(), s.full(), CodingKind::Local).unwrap();
        let want = [0.25, -0.25, -0.25, 0.25];
        for r in 0..4 {
            assert!((b.columns[(r, 0)] - want[r]).abs() < 1e-15);
        }
        let e = contrast_matrix(&s, s.full(), Effect::EMPTY, CodingKind::Global).unwrap();
        assert!(e.columns.iter().all(|v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn binary_codings_coincide() {
        let s = sch(&[2, 2, 2]);
        let t = pseudo_table(&s, 9);
        for e in s.full().subsets() {
            let base = effect_components(&t, s.full(), e, CodingKind::Local).unwrap();
            for coding in [CodingKind::Spanning, CodingKind::Global, CodingKind::Continuation] {
                let other = effect_components(&t, s.full(), e, coding).unwrap();
                assert!((base[0] - other[0]).abs() < 1e-12, "{coding:?} {e:?}");
            }
        }
    }

    #[test]
    fn global_ratios_match_quadrant_sums() {
        let s = sch(&[3, 3]);
        let t = pseudo_table(&s, 21);
        let p = t.cells();
        let or = odds_ratios(&t, s.full(), s.full(), CodingKind::Global).unwrap();
        for i in 1..3 {
            for j in 1..3 {
                let q = |rows: std::ops::Range<usize>, cols: std::ops::Range<usize>| {
                    let mut s = 0.0;
                    for a in rows {
                        for b in cols.clone() {
                            s += p[a * 3 + b];
                        }
                    }
                    s
                };
                let want = q(0..i, 0..j) * q(i..3, j..3) / (q(0..i, j..3) * q(i..3, 0..j));
                assert!((or.get(0, (i - 1) * 2 + (j - 1)) - want).abs() < 1e-12 * want);
            }
        }
    }

    #[test]
    fn continuation_ratio_display() {
        let s = sch(&[3, 3]);
        let t = pseudo_table(&s, 4);
        let p = t.cells();
        let or = odds_ratios(&t, s.full(), s.full(), CodingKind::Continuation).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let ree = p[i * 3 + j];
                let rne = p[(i + 1) * 3 + j];
                let rem: f64 = (j + 1..3).map(|b| p[i * 3 + b]).sum();
                let rnm: f64 = (j + 1..3).map(|b| p[(i + 1) * 3 + b]).sum();
                let want = ree * rnm / (rem * rne);
                assert!((or.get(0, i * 2 + j) - want).abs() < 1e-12 * want);
            }
        }
    }

    #[test]
    fn spanning_and_local_ratios_on_three_by_two() {
        let s = sch(&[3, 2]);
        let t = pseudo_table(&s, 8);
        let p = t.cells();
        let sp = odds_ratios(&t, s.full(), s.full(), CodingKind::Spanning).unwrap();
        let lo = odds_ratios(&t, s.full(), s.full(), CodingKind::Local).unwrap();
        let want_sp = p[2 * 2 + 1] * p[0] / (p[2 * 2] * p[1]);
        let want_lo = p[2 * 2 + 1] * p[2] / (p[2 * 2] * p[3]);
        assert!((sp.get(0, 1) - want_sp).abs() < 1e-12);
        assert!((lo.get(0, 1) - want_lo).abs() < 1e-12);
    }

    #[test]
    fn conditional_slices() {
        let s = sch(&[2, 2, 3]);
        let t = pseudo_table(&s, 2);
        let p = t.cells();
        let or = odds_ratios(&t, s.full(), Effect(0b011), CodingKind::Local).unwrap();
        assert_eq!(or.n_conditioning, 3);
        for c in 0..3 {
            let want = p[c] * p[6 + 3 + c] / (p[3 + c] * p[6 + c]);
            assert!((or.get(c, 0) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_gives_unit_ratios_and_zero_parameters() {
        let s = sch(&[3, 2, 2]);
        let t = Table::uniform(s.clone());
        for coding in [CodingKind::Local, CodingKind::Spanning, CodingKind::Global, CodingKind::Continuation] {
            let or = odds_ratios(&t, s.full(), Effect(0b101), coding).unwrap();
            assert!(or.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        }
        let lam = loglinear_recursion(&t, Effect(0b111)).unwrap();
        assert!(lam.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn zero_cell_is_reported() {
        let s = sch(&[2, 2]);
        let t = Table::counts(s.clone(), vec![1.0, 0.0, 1.0, 1.0]).unwrap();
        assert!(matches!(loglinear_recursion(&t, s.full()), Err(MllError::Positivity(_))));
        assert!(odds_ratios(&t, s.full(), s.full(), CodingKind::Local).is_err());
    }

    #[test]
    fn contrast_columns_are_independent() {
        let s = sch(&[3, 4]);
        for coding in [CodingKind::Local, CodingKind::Spanning, CodingKind::Global, CodingKind::Continuation] {
            let b = contrast_matrix(&s, s.full(), s.full(), coding).unwrap();
            assert_eq!(b.columns.ncols(), 6);
            assert_eq!(b.columns.clone().svd(false, false).rank(1e-12), 6);
        }
    }
}
