//! Model files: JSON description of a marginal log-linear model, compiled
//! against a variable scheme.

use std::collections::HashMap;
use std::path::Path;

use margmod::modelspec::{
    compile_chain_type4, compile_ci, compile_dag, compile_path, zero_effect_model, ChainGraph, CompileOptions,
    DirectedGraph, SequenceStyle,
};
use margmod::{CiStatement, CodingKind, Effect, MarginalSequence, ModelSpec, Parameterization, VariableScheme};
use nalgebra::DMatrix;
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::CliError;

/// A set of variables: either a list of names or a string such as "AB" or "age*sex".
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum VarSet {
    Names(Vec<String>),
    Text(String),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Independence {
    pub a: VarSet,
    pub b: VarSet,
    #[serde(default)]
    pub given: Option<VarSet>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DagBlock {
    pub edges: Vec<(String, String)>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainBlock {
    pub components: Vec<VarSet>,
    #[serde(default)]
    pub edges: Vec<(String, String)>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(default)]
    pub levels: Option<Map<String, Value>>,
    #[serde(default)]
    pub marginals: Option<Vec<VarSet>>,
    #[serde(default)]
    pub coding: Option<String>,
    #[serde(default)]
    pub zero_effects: Vec<VarSet>,
    #[serde(default)]
    pub independences: Vec<Independence>,
    #[serde(default)]
    pub dag: Option<DagBlock>,
    #[serde(default)]
    pub chain: Option<ChainBlock>,
    #[serde(default)]
    pub path: bool,
    #[serde(default)]
    pub equality_constraints: Vec<(String, String)>,
}

pub struct PathInfo {
    pub graphical_zeros: Vec<Effect>,
    pub path_zeros: Vec<Effect>,
    pub remaining: Vec<Effect>,
}

pub struct Compiled {
    pub spec: ModelSpec,
    pub statements: Vec<CiStatement>,
    pub path: Option<PathInfo>,
}

pub fn read_model(path: &Path) -> Result<ModelFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read model file {}: {e}", path.display())))?;
    parse_model(&text).map_err(|e| CliError::input(format!("{}: {}", path.display(), e.message)))
}

pub fn parse_model(text: &str) -> Result<ModelFile, CliError> {
    serde_json::from_str(text)
        .map_err(|e| CliError::input(format!("line {}, column {}: {e}", e.line(), e.column())))
}

fn level_strings(var: &str, v: &Value) -> Result<Vec<String>, CliError> {
    let arr = v
        .as_array()
        .ok_or_else(|| CliError::input(format!("levels.{var}: expected an array of levels")))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| match x {
            Value::String(s) => Ok(s.clone()),
            Value::Number(n) => Ok(n.to_string()),
            _ => Err(CliError::input(format!("levels.{var}[{i}]: expected a string or number"))),
        })
        .collect()
}

impl ModelFile {
    /// Pinned level orders from the `levels` block.
    pub fn pinned_levels(&self) -> Result<Vec<(String, Vec<String>)>, CliError> {
        let Some(map) = &self.levels else { return Ok(Vec::new()) };
        map.iter().map(|(k, v)| Ok((k.clone(), level_strings(k, v)?))).collect()
    }

    fn mentioned(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let push_set = |vs: &VarSet, out: &mut Vec<String>| {
            for n in raw_names(vs) {
                if !out.contains(&n) {
                    out.push(n);
                }
            }
        };
        for m in self.marginals.iter().flatten() {
            push_set(m, &mut out);
        }
        for z in &self.zero_effects {
            push_set(z, &mut out);
        }
        for ci in &self.independences {
            push_set(&ci.a, &mut out);
            push_set(&ci.b, &mut out);
            if let Some(g) = &ci.given {
                push_set(g, &mut out);
            }
        }
        if let Some(c) = &self.chain {
            for k in &c.components {
                push_set(k, &mut out);
            }
        }
        let edges = self.dag.iter().flat_map(|d| d.edges.iter()).chain(self.chain.iter().flat_map(|c| c.edges.iter()));
        for (a, b) in edges {
            for n in [a, b] {
                if !out.contains(n) {
                    out.push(n.clone());
                }
            }
        }
        out
    }

    /// Scheme from the `levels` block, or binary variables in order of first mention.
    pub fn standalone_scheme(&self) -> Result<VariableScheme, CliError> {
        let pinned = self.pinned_levels()?;
        let vars = if pinned.is_empty() {
            let names = self.mentioned();
            if names.is_empty() {
                return Err(CliError::input("model mentions no variables and has no levels block"));
            }
            log::warn!("no levels block or table; treating {} as binary", names.join(", "));
            names.into_iter().map(|n| (n, vec!["1".to_string(), "2".to_string()])).collect()
        } else {
            pinned
        };
        VariableScheme::new(vars).map_err(CliError::from)
    }
}

/// Names in a set as written, for binary-scheme inference before a scheme exists.
fn raw_names(vs: &VarSet) -> Vec<String> {
    match vs {
        VarSet::Names(v) => v.clone(),
        VarSet::Text(t) if t.contains('*') || t.contains(',') => {
            t.split(['*', ',']).map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
        }
        VarSet::Text(t) => t.chars().map(|c| c.to_string()).collect(),
    }
}

pub fn effect_of(scheme: &VariableScheme, vs: &VarSet) -> Result<Effect, CliError> {
    let names: Vec<String> = match vs {
        VarSet::Names(v) => v.clone(),
        VarSet::Text(t) if scheme.index_of(t).is_some() => vec![t.clone()],
        VarSet::Text(_) => raw_names(vs),
    };
    scheme.effect_from_names(&names).map_err(CliError::from)
}

fn node(scheme: &VariableScheme, name: &str) -> Result<usize, CliError> {
    scheme.index_of(name).ok_or_else(|| CliError::input(format!("unknown variable {name:?} in edge list")))
}

fn edges(scheme: &VariableScheme, list: &[(String, String)]) -> Result<Vec<(usize, usize)>, CliError> {
    list.iter().map(|(a, b)| Ok((node(scheme, a)?, node(scheme, b)?))).collect()
}

fn sequence(scheme: &VariableScheme, ms: &[VarSet]) -> Result<MarginalSequence, CliError> {
    let mut v: Vec<Effect> = ms.iter().map(|m| effect_of(scheme, m)).collect::<Result<_, _>>()?;
    if v.last() != Some(&scheme.full()) {
        v.push(scheme.full());
    }
    MarginalSequence::new(scheme, v).map_err(CliError::from)
}

fn statements(scheme: &VariableScheme, list: &[Independence]) -> Result<Vec<CiStatement>, CliError> {
    list.iter()
        .map(|ci| {
            let c = match &ci.given {
                Some(g) => effect_of(scheme, g)?,
                None => Effect::EMPTY,
            };
            CiStatement::new(effect_of(scheme, &ci.a)?, effect_of(scheme, &ci.b)?, c).map_err(CliError::from)
        })
        .collect()
}

/// Appends zero constraints for whole effects to a compiled model.
fn add_zero_effects(spec: ModelSpec, effects: &[Effect]) -> Result<ModelSpec, CliError> {
    let param = spec.param.clone();
    let mut cols: Vec<usize> = Vec::new();
    let mut zeroed = spec.zeroed_effects.clone();
    for &e in effects {
        let r = param
            .effect_range(e)
            .ok_or_else(|| CliError::input(format!("effect {} is not a component", param.scheme().effect_label(e))))?;
        if !zeroed.iter().any(|z| z.1 == e) {
            zeroed.push((param.components()[r.start].marginal, e));
        }
        cols.extend(r);
    }
    let k = param.n_components();
    let r0 = spec.c.ncols();
    let mut c = DMatrix::zeros(k, r0 + cols.len());
    c.columns_mut(0, r0).copy_from(&spec.c);
    for (j, &i) in cols.iter().enumerate() {
        c[(i, r0 + j)] = 1.0;
    }
    let mut out = ModelSpec::from_constraints(param, c)?;
    out.zeroed_effects = zeroed;
    out.provenance = spec.provenance;
    Ok(out)
}

pub fn compile(model: &ModelFile, scheme: &VariableScheme) -> Result<Compiled, CliError> {
    let coding = match &model.coding {
        None => CodingKind::Local,
        Some(s) => CodingKind::parse(s).ok_or_else(|| CliError::input(format!("coding: unknown coding {s:?}")))?,
    };
    let sources = [model.dag.is_some(), model.chain.is_some(), !model.independences.is_empty()];
    if sources.iter().filter(|b| **b).count() > 1 {
        return Err(CliError::input("use only one of dag, chain and independences"));
    }
    if model.marginals.is_some() && (model.dag.is_some() || model.chain.is_some()) {
        return Err(CliError::input("marginals are derived from the graph; drop the marginals key"));
    }
    if model.path && model.dag.is_none() {
        return Err(CliError::input("path models need a dag block"));
    }
    let zero_effects: Vec<Effect> = model.zero_effects.iter().map(|z| effect_of(scheme, z)).collect::<Result<_, _>>()?;
    let mut path = None;
    let mut stmts = Vec::new();
    let mut zeros_done = false;
    let spec = if let Some(d) = &model.dag {
        let g = DirectedGraph::new(scheme.n_vars(), edges(scheme, &d.edges)?)?;
        if model.path {
            let opts = CompileOptions { coding, include_empty: true, style: SequenceStyle::Minimal };
            let p = compile_path(scheme, &g, &opts)?;
            stmts = p.dag.cis.clone();
            path = Some(PathInfo { graphical_zeros: p.graphical_zeros, path_zeros: p.path_zeros, remaining: p.remaining });
            p.spec
        } else {
            let dag = compile_dag(scheme, &g, &CompileOptions { coding, ..Default::default() })?;
            stmts = dag.cis;
            dag.spec
        }
    } else if let Some(c) = &model.chain {
        let comps: Vec<Effect> = c.components.iter().map(|k| effect_of(scheme, k)).collect::<Result<_, _>>()?;
        let g = ChainGraph::new(scheme.n_vars(), comps, &edges(scheme, &c.edges)?)?;
        stmts = g.type4_statements();
        compile_chain_type4(scheme, &g, &CompileOptions { coding, ..Default::default() })?
    } else if !model.independences.is_empty() {
        stmts = statements(scheme, &model.independences)?;
        match &model.marginals {
            Some(ms) => {
                let param = Parameterization::build(scheme, &sequence(scheme, ms)?, coding)?;
                compile_ci(&stmts, &param)?
            }
            None => margmod::modelspec::compile_ci_auto(scheme, &stmts, coding, false)?,
        }
    } else {
        let seq = match &model.marginals {
            Some(ms) => sequence(scheme, ms)?,
            None => MarginalSequence::saturated(scheme),
        };
        let param = Parameterization::build(scheme, &seq, coding)?;
        zeros_done = true;
        zero_effect_model(&param, &zero_effects)?
    };
    let mut spec = if zeros_done || zero_effects.is_empty() { spec } else { add_zero_effects(spec, &zero_effects)? };
    if !model.equality_constraints.is_empty() {
        let labels: HashMap<String, usize> =
            (0..spec.n_components()).map(|k| (spec.param.label(k), k)).collect();
        let find = |l: &str| {
            labels.get(l).copied().ok_or_else(|| CliError::input(format!("equality_constraints: unknown component label {l:?}")))
        };
        let pairs: Vec<(usize, usize)> =
            model.equality_constraints.iter().map(|(a, b)| Ok((find(a)?, find(b)?))).collect::<Result<_, CliError>>()?;
        spec.add_equalities(&pairs)?;
    }
    Ok(Compiled { spec, statements: stmts, path })
}
