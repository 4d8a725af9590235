//! JSON documents written by the subcommands.

use margmod::estimation::FitResult;
use margmod::gee::{GeeProblem, GeeResult};
use margmod::table::{effect_dimension, is_ordered_decomposable, DecomposabilityVerdict};
use margmod::{Effect, MarginalSequence, ModelSpec, Parameterization, Table, VariableScheme};
use serde_json::{json, Value};

use crate::model::Compiled;
use crate::table_io::cell_labels;

fn names(s: &VariableScheme, e: Effect) -> Value {
    json!(s.effect_names(e))
}

fn variables(s: &VariableScheme) -> Value {
    Value::Array(
        (0..s.n_vars()).map(|j| json!({"name": s.name(j), "levels": s.level_labels(j)})).collect(),
    )
}

fn component(p: &Parameterization, k: usize, value: f64, se: Option<f64>) -> Value {
    let s = p.scheme();
    let c = &p.components()[k];
    let cats: Vec<&str> = c.effect.indices().zip(&c.levels).map(|(j, &l)| s.level_labels(j)[l].as_str()).collect();
    json!({
        "label": p.label(k),
        "marginal": names(s, c.marginal),
        "effect": names(s, c.effect),
        "categories": cats,
        "value": value,
        "se": se,
    })
}

fn verdict_json(s: &VariableScheme, seq: &MarginalSequence, v: &DecomposabilityVerdict) -> Value {
    let labels = |es: &[Effect]| -> Vec<String> { es.iter().map(|&e| s.effect_label(e)).collect() };
    json!({
        "ordered_decomposable": v.decomposable,
        "failing_prefix": v.failing_prefix,
        "failing_marginal": v.failing_prefix.map(|j| s.effect_label(seq.marginals()[j - 1])),
        "maximal": labels(&v.maximal),
        "ordering": labels(&v.ordering),
        "core": labels(&v.core),
    })
}

pub fn compiled(c: &Compiled) -> Value {
    let spec = &c.spec;
    let p = &spec.param;
    let s = p.scheme();
    let seq = p.sequence();
    let zeroed: Vec<Value> = spec
        .zeroed_effects
        .iter()
        .map(|&(m, e)| json!({"marginal": s.effect_label(m), "effect": s.effect_label(e), "dimension": effect_dimension(e, s)}))
        .collect();
    let mut out = json!({
        "variables": variables(s),
        "marginals": seq.marginals().iter().map(|&m| names(s, m)).collect::<Vec<_>>(),
        "n_components": spec.n_components(),
        "zeroed_effects": zeroed,
        "df": spec.df(),
        "statements": c.statements.iter().map(|ci| ci.describe(s)).collect::<Vec<_>>(),
        "decomposability": verdict_json(s, seq, &is_ordered_decomposable(seq)),
    });
    if let Some(path) = &c.path {
        let labels = |es: &[Effect]| -> Vec<String> { es.iter().map(|&e| s.effect_label(e)).collect() };
        out["path"] = json!({
            "graphical_zeros": path.graphical_zeros.len(),
            "path_zeros": labels(&path.path_zeros),
            "remaining": labels(&path.remaining),
            "remaining_count": path.remaining.len(),
        });
    }
    out
}

pub fn check(p: &Parameterization) -> Value {
    let s = p.scheme();
    let r = p.check_smoothness();
    let mut out = json!({
        "marginals": p.sequence().marginals().iter().map(|&m| names(s, m)).collect::<Vec<_>>(),
    });
    let v = verdict_json(s, p.sequence(), &r.ordered_decomposable);
    for (k, val) in v.as_object().unwrap() {
        out[k] = val.clone();
    }
    out["hierarchical_complete"] = json!(r.hierarchical_complete);
    out["variation_independent"] = json!(r.variation_independent());
    out["hazards"] = json!(r.hazards);
    out
}

pub fn ml_fit(spec: &ModelSpec, n: &Table, f: &FitResult) -> Value {
    let p = &spec.param;
    let s = p.scheme();
    let se = f.lambda_se();
    let cells: Vec<Value> = (0..s.cell_count())
        .map(|k| {
            json!({
                "cell": cell_labels(s, k),
                "observed": n.cells()[k],
                "fitted": f.m_hat.cells()[k],
                "se": f.cov_m_diag[k].max(0.0).sqrt(),
            })
        })
        .collect();
    let lambda: Vec<Value> =
        (0..p.n_components()).map(|k| component(p, k, f.lambda_hat[k], se.as_ref().map(|v| v[k]))).collect();
    json!({
        "algorithm": f.algorithm.name(),
        "variables": variables(s),
        "m_hat": cells,
        "lambda_hat": lambda,
        "beta_hat": f.beta_hat,
        "g2": f.g2,
        "df": f.df,
        "p_value": f.p_value,
        "bic": f.bic,
        "loglik": f.loglik,
        "cov_m_diag": f.cov_m_diag,
        "cov_lambda_diag": f.cov_lambda.as_ref().map(|c| c.diagonal().iter().copied().collect::<Vec<_>>()),
        "convergence": {
            "converged": f.converged,
            "iterations": f.iterations,
            "max_constraint_violation": f.max_constraint_violation,
            "epsilon_cells": f.epsilon_cells,
        },
    })
}

pub fn gee_fit(spec: &ModelSpec, problem: &GeeProblem, fitted: &GeeResult, observed: &[Vec<f64>]) -> Value {
    let p = &spec.param;
    let s = p.scheme();
    let x = problem.design();
    let cov_l = x * &fitted.sandwich_cov * x.transpose();
    let lambda: Vec<Value> = problem
        .components()
        .iter()
        .enumerate()
        .map(|(i, &k)| component(p, k, fitted.lambda_tilde[i], Some(cov_l[(i, i)].max(0.0).sqrt())))
        .collect();
    let margins: Vec<Value> = problem
        .marginals()
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let sub = s.sub_scheme(m).expect("modelled marginal");
            let cells: Vec<Value> = (0..sub.cell_count())
                .map(|c| json!({"cell": cell_labels(&sub, c), "observed": observed[i][c], "fitted": fitted.mu_tilde[i][c]}))
                .collect();
            json!({"marginal": names(s, m), "cells": cells})
        })
        .collect();
    let model_se: Vec<f64> = fitted.model_cov.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect();
    json!({
        "algorithm": "gee",
        "variables": variables(s),
        "mu_tilde": margins,
        "lambda_tilde": lambda,
        "beta_tilde": fitted.beta_tilde,
        "sandwich_se": fitted.sandwich_se(),
        "model_se": model_se,
        "df": problem.n_constraints(),
        "convergence": {
            "converged": fitted.converged,
            "iterations": fitted.iterations,
            "max_constraint_violation": fitted.max_constraint_violation,
        },
    })
}
