//! Subcommand implementations. Each returns a [`Report`] plus the
//! tolerances it ran with.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde_json::{json, Value};
use transport_core::applications::{
    heat_coefficients_jet, heat_coefficients_numeric, wkb_expand, HeatProblem, WkbProblem,
};
use transport_core::codec::jet_to_json;
use transport_core::flow::{evaluate_grid, SolutionCase, SplitOrder};
use transport_core::spectral::{
    dual_kernel_basis, endo_spectrum, enumerate_spectrum, kernel_basis, linearization_spectrum,
    solvability_test, sternberg_resonance_check,
};
use transport_core::{
    assemble, solve_to_order, two_regime_bound, FieldSampler, FlowConfig, Jet, MatrixPath,
    ProblemData, Scalar, SolverConfig,
};

use crate::input::{matrix, AnyProblem, ProblemFile};
use crate::output::{csv_cell, CliError, Report, EXIT_NUMERIC, EXIT_UNSOLVABLE};

/// Command-line overrides shared by all subcommands.
#[derive(Clone, Debug, Default)]
pub struct Settings {
    pub order: Option<usize>,
    pub max_re: Option<f64>,
    pub tol: Option<f64>,
    pub rel_tol: Option<f64>,
    pub tail_tol: Option<f64>,
}

pub struct Outcome {
    pub report: Report,
    pub tolerances: Value,
}

macro_rules! with_problem {
    ($p:expr, |$q:ident| $body:expr) => {
        match $p {
            AnyProblem::Real($q) => $body,
            AnyProblem::Complex($q) => $body,
        }
    };
}

fn problem(f: &ProblemFile) -> Result<&AnyProblem, CliError> {
    f.problem
        .as_ref()
        .ok_or_else(|| CliError::validation("this command needs a `problem` block"))
}

fn solver_config(f: &ProblemFile, s: &Settings) -> SolverConfig {
    let mut cfg = f.solver.clone();
    if let Some(t) = s.tol {
        cfg.resonance_tol = t;
    }
    cfg
}

fn solver_json(cfg: &SolverConfig) -> Value {
    json!({ "solver": serde_json::to_value(cfg).expect("config serializes") })
}

fn at_order<T: Scalar>(p: &ProblemData<T>, s: &Settings) -> Result<ProblemData<T>, CliError> {
    match s.order {
        Some(o) if o != p.order() => Ok(p.with_order(o)?),
        _ => Ok(p.clone()),
    }
}

fn cjson(z: Complex64) -> Value {
    if z.im == 0.0 {
        json!(z.re)
    } else {
        json!({ "re": z.re, "im": z.im })
    }
}

/// Shortest round-trip text, in exponent form for very small or large values.
fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e16).contains(&a) || !a.is_finite() {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn cells<T: Scalar>(x: T) -> String {
    let z = x.to_complex();
    match T::FIELD {
        transport_core::Field::Real => num(z.re),
        transport_core::Field::Complex => format!("{},{}", num(z.re), num(z.im)),
    }
}

fn nonzero<T: Scalar>(c: &T) -> bool {
    !c.is_zero()
}

fn value_header<T: Scalar>(_: &ProblemData<T>) -> &'static str {
    match T::FIELD {
        transport_core::Field::Real => "value",
        transport_core::Field::Complex => "re,im",
    }
}

/// Long-format jet table: `a1..an,entry,value` rows for nonzero terms,
/// each prefixed with `lead`.
fn jet_csv_rows<T: Scalar>(j: &Jet<T>, lead: &str, out: &mut String) {
    for (alpha, block) in j.terms() {
        for (e, c) in block.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let a: Vec<String> = alpha.entries().iter().map(|k| k.to_string()).collect();
            out.push_str(&format!("{lead}{},{e},{}\n", a.join(","), cells(*c)));
        }
    }
}

fn jet_csv_header<T: Scalar>(p: &ProblemData<T>, lead: &str) -> String {
    let a: Vec<String> = (1..=p.n()).map(|i| format!("a{i}")).collect();
    format!("{lead}{},entry,{}\n", a.join(","), value_header(p))
}

pub fn spectrum(f: &ProblemFile, s: &Settings) -> Result<Outcome, CliError> {
    let max_re = s
        .max_re
        .ok_or_else(|| CliError::validation("spectrum needs --max-re"))?;
    let cfg = solver_config(f, s);
    let (mu, rho) = with_problem!(problem(f)?, |p| (
        linearization_spectrum(p.x())?,
        endo_spectrum(&p.a0())?
    ));
    let entries = enumerate_spectrum(&mu, &rho, max_re, cfg.resonance_tol)?;
    let mut csv = String::from("lambda_re,lambda_im,multiplicity,max_alpha_degree\n");
    for e in &entries {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            num(e.lambda.re),
            num(e.lambda.im),
            e.multiplicity(),
            e.max_alpha_degree()
        ));
    }
    let json = json!({
        "mu": mu.iter().copied().map(cjson).collect::<Vec<_>>(),
        "rho": rho.iter().copied().map(cjson).collect::<Vec<_>>(),
        "max_re": max_re,
        "eigenvalues": entries.iter().map(|e| e.to_json()).collect::<Vec<_>>(),
    });
    Ok(Outcome {
        report: Report::new(json, Some(csv)),
        tolerances: json!({ "resonance_tol": cfg.resonance_tol }),
    })
}

pub fn solve_jet(f: &ProblemFile, s: &Settings) -> Result<Outcome, CliError> {
    let cfg = solver_config(f, s);
    let report = with_problem!(problem(f)?, |p| {
        let order = s.order.unwrap_or(p.order());
        let sol = solve_to_order(p, order, &cfg)?;
        let mut csv = None;
        if let Some(u) = &sol.particular {
            let mut body = jet_csv_header(p, "");
            jet_csv_rows(u, "", &mut body);
            csv = Some(body);
        }
        let mut r = Report::new(sol.to_json(), csv);
        if !sol.solvable {
            r.exit = EXIT_UNSOLVABLE;
            r.notes.push(format!(
                "unsolvable: {} obstruction(s)",
                sol.obstructions.len()
            ));
            for (i, o) in sol.obstructions.iter().enumerate() {
                r.notes.push(format!("  T{i}(v) = {}", o.to_json()));
            }
            // no particular solution: the table is just the header
            r.csv.get_or_insert_with(|| jet_csv_header(p, ""));
        }
        r
    });
    Ok(Outcome {
        report,
        tolerances: solver_json(&cfg),
    })
}

pub fn kernel(f: &ProblemFile, s: &Settings) -> Result<Outcome, CliError> {
    let cfg = solver_config(f, s);
    let report = with_problem!(problem(f)?, |p| {
        let p = at_order(p, s)?;
        let k = kernel_basis(&p, &cfg)?;
        let mut csv = jet_csv_header(&p, "basis,");
        for (i, w) in k.basis.iter().enumerate() {
            jet_csv_rows(w, &format!("{i},"), &mut csv);
        }
        Report::new(
            json!({
                "dim": k.dim(),
                "basis": k.basis.iter().map(jet_to_json).collect::<Vec<_>>(),
                "resonance": k.resonance.as_ref().map(|r| r.to_json()),
                "rank": serde_json::to_value(&k.rank).expect("rank report serializes"),
            }),
            Some(csv),
        )
    });
    Ok(Outcome {
        report,
        tolerances: solver_json(&cfg),
    })
}

pub fn dual_kernel(f: &ProblemFile, s: &Settings) -> Result<Outcome, CliError> {
    let cfg = solver_config(f, s);
    let report = with_problem!(problem(f)?, |p| {
        let p = at_order(p, s)?;
        let d = dual_kernel_basis(&p, &cfg)?;
        let mut csv = format!(
            "basis,{},component,{}\n",
            (1..=p.n()).map(|i| format!("a{i}")).collect::<Vec<_>>().join(","),
            value_header(&p)
        );
        let mut deltas = Vec::new();
        for (i, t) in d.basis.iter().enumerate() {
            let terms = t.to_delta_form();
            for (alpha, cv) in &terms {
                let a: Vec<String> = alpha.entries().iter().map(|k| k.to_string()).collect();
                for (j, c) in cv.iter().enumerate() {
                    if nonzero(c) {
                        csv.push_str(&format!("{i},{},{j},{}\n", a.join(","), cells(*c)));
                    }
                }
            }
            deltas.push(
                terms
                    .iter()
                    .filter(|(_, cv)| cv.iter().any(nonzero))
                    .map(|(a, cv)| json!({
                        "alpha": a.entries(),
                        "delta_coeffs": cv.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
                    }))
                    .collect::<Vec<_>>(),
            );
        }
        Report::new(
            json!({
                "dim": d.dim(),
                "basis": d.basis.iter().map(|t| t.to_json()).collect::<Vec<_>>(),
                "delta_form": deltas,
                "resonance": d.resonance.as_ref().map(|r| r.to_json()),
                "rank": serde_json::to_value(&d.rank).expect("rank report serializes"),
                "max_above_bound": d.max_above_bound,
            }),
            Some(csv),
        )
    });
    Ok(Outcome {
        report,
        tolerances: solver_json(&cfg),
    })
}

pub fn solvable(f: &ProblemFile, s: &Settings) -> Result<Outcome, CliError> {
    let cfg = solver_config(f, s);
    let report = with_problem!(problem(f)?, |p| {
        let p = at_order(p, s)?;
        let r = solvability_test(&p, &cfg)?;
        let mut csv = format!("index,{}\n", value_header(&p));
        for (i, o) in r.obstructions.iter().enumerate() {
            csv.push_str(&format!("{i},{}\n", cells(*o)));
        }
        Report::new(
            json!({
                "solvable": r.solvable,
                "obstructions": r.obstructions.iter().map(|o| o.to_json()).collect::<Vec<_>>(),
                "scale": r.scale,
            }),
            Some(csv),
        )
    });
    Ok(Outcome {
        report,
        tolerances: solver_json(&cfg),
    })
}

pub fn matrix_export(f: &ProblemFile, s: &Settings) -> Result<Outcome, CliError> {
    let report = with_problem!(problem(f)?, |p| {
        let op = assemble(&at_order(p, s)?);
        Report::new(op.to_json(), Some(op.to_csv()))
    });
    Ok(Outcome {
        report,
        tolerances: json!({}),
    })
}

pub fn sternberg(f: &ProblemFile, s: &Settings) -> Result<Outcome, CliError> {
    let cfg = solver_config(f, s);
    let mu = with_problem!(problem(f)?, |p| linearization_spectrum(p.x())?);
    let v = sternberg_resonance_check(&mu, cfg.resonance_tol)?;
    let mut csv = String::from("component,alpha\n");
    for x in &v {
        csv.push_str(&format!("{},{}\n", x.component, x.alpha.label()));
    }
    let json = json!({
        "mu": mu.iter().copied().map(cjson).collect::<Vec<_>>(),
        "non_resonant": v.is_empty(),
        "violations": v.iter().map(|x| json!({
            "component": x.component,
            "alpha": x.alpha.entries(),
        })).collect::<Vec<_>>(),
    });
    Ok(Outcome {
        report: Report::new(json, Some(csv)),
        tolerances: json!({ "resonance_tol": cfg.resonance_tol }),
    })
}

fn flow_config(f: &ProblemFile, s: &Settings) -> FlowConfig {
    let mut cfg = FlowConfig::default();
    if let Some(g) = &f.grid {
        let c = &g.config;
        cfg.rel_tol = c.rel_tol.unwrap_or(cfg.rel_tol);
        cfg.abs_tol = c.abs_tol.unwrap_or(cfg.abs_tol);
        cfg.tail_tol = c.tail_tol.unwrap_or(cfg.tail_tol);
        cfg.max_horizon = c.max_horizon.unwrap_or(cfg.max_horizon);
        cfg.min_horizon = c.min_horizon.unwrap_or(cfg.min_horizon);
        cfg.split_order = c.split_order.unwrap_or(cfg.split_order);
    }
    cfg.rel_tol = s.rel_tol.unwrap_or(cfg.rel_tol);
    cfg.tail_tol = s.tail_tol.unwrap_or(cfg.tail_tol);
    cfg
}

fn flow_json(cfg: &FlowConfig) -> Value {
    json!({
        "rel_tol": cfg.rel_tol,
        "abs_tol": cfg.abs_tol,
        "tail_tol": cfg.tail_tol,
        "max_horizon": cfg.max_horizon,
        "min_horizon": cfg.min_horizon,
        "split_order": match cfg.split_order {
            SplitOrder::Auto => json!("auto"),
            SplitOrder::Fixed(k) => json!(k),
        },
    })
}

pub fn solve_grid(f: &ProblemFile, s: &Settings) -> Result<Outcome, CliError> {
    let grid = f
        .grid
        .as_ref()
        .ok_or_else(|| CliError::validation("solve-grid needs a `grid` block"))?;
    let solver = solver_config(f, s);
    let flow = flow_config(f, s);
    // Complex problems are integrated as the stacked real system.
    let (p, complex_m) = match problem(f)? {
        AnyProblem::Real(p) => (p.clone(), None),
        AnyProblem::Complex(p) => (p.realify()?, Some(p.m())),
    };
    let mut sampler = FieldSampler::from_problem(&p);
    if let Some(r) = f.sampler.region_radius {
        sampler = sampler.with_region_radius(r);
    }
    let results = evaluate_grid(&sampler, &p, &grid.points, &flow, &solver)?;

    let n = p.n();
    let ucols: Vec<String> = match complex_m {
        None => (1..=p.m()).map(|j| format!("u{j}")).collect(),
        Some(m) => (1..=m).flat_map(|j| [format!("u{j}_re"), format!("u{j}_im")]).collect(),
    };
    let mut csv: Vec<String> = (1..=n).map(|i| format!("y{i}")).collect();
    csv.extend(ucols.iter().cloned());
    csv.extend(["tail_estimate", "horizon", "error"].map(String::from));
    let mut csv = csv.join(",") + "\n";
    let mut rows = Vec::with_capacity(results.len());
    let mut failures = 0usize;
    for (y, r) in grid.points.iter().zip(&results) {
        let mut line: Vec<String> = y.iter().map(|&c| num(c)).collect();
        match r {
            Ok(sol) => {
                let u: Vec<f64> = match complex_m {
                    None => sol.u.iter().copied().collect(),
                    Some(m) => (0..m).flat_map(|j| [sol.u[j], sol.u[m + j]]).collect(),
                };
                line.extend(u.iter().map(|&x| num(x)));
                line.push(num(sol.tail_estimate));
                line.push(num(sol.horizon));
                line.push(String::new());
                let uj = match complex_m {
                    None => json!(u),
                    Some(_) => json!(u
                        .chunks(2)
                        .map(|c| json!({ "re": c[0], "im": c[1] }))
                        .collect::<Vec<_>>()),
                };
                rows.push(json!({
                    "y": y,
                    "u": uj,
                    "tail_estimate": sol.tail_estimate,
                    "horizon": sol.horizon,
                    "fitted_rate": sol.fitted_rate,
                    "steps": sol.steps,
                    "case": match sol.case {
                        SolutionCase::Direct => json!("direct"),
                        SolutionCase::Split { order } => json!({ "split": order }),
                    },
                    "error": Value::Null,
                }));
            }
            Err(e) => {
                failures += 1;
                line.extend(std::iter::repeat_n(String::new(), ucols.len() + 2));
                line.push(csv_cell(&e.to_string()));
                rows.push(json!({ "y": y, "error": e.to_string() }));
            }
        }
        csv.push_str(&line.join(","));
        csv.push('\n');
    }
    let mut report = Report::new(json!({ "points": rows, "failures": failures }), Some(csv));
    if failures > 0 {
        report.exit = EXIT_NUMERIC;
        report.notes.push(format!("{failures} of {} points failed", grid.points.len()));
    }
    Ok(Outcome {
        report,
        tolerances: json!({
            "solver": serde_json::to_value(&solver).expect("config serializes"),
            "flow": flow_json(&flow),
        }),
    })
}

pub fn heat(f: &ProblemFile, _s: &Settings) -> Result<Outcome, CliError> {
    let h = f
        .heat
        .as_ref()
        .ok_or_else(|| CliError::validation("heat needs a `heat` block"))?;
    let hp = HeatProblem::new(h.potential.clone(), h.terms, h.order)?;
    let phis = heat_coefficients_jet(&hp)?;
    let mut json = json!({
        "n": hp.n,
        "m": hp.m,
        "terms": hp.terms,
        "order": hp.order,
        "phi": phis.iter().map(jet_to_json).collect::<Vec<_>>(),
    });
    let csv = if h.points.is_empty() {
        let a: Vec<String> = (1..=hp.n).map(|i| format!("a{i}")).collect();
        let mut csv = format!("j,{},entry,value\n", a.join(","));
        for (j, p) in phis.iter().enumerate() {
            jet_csv_rows(p, &format!("{j},"), &mut csv);
        }
        csv
    } else {
        let k = hp.k.clone();
        let k_at: Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync> =
            Arc::new(move |q: &[f64]| k.evaluate_matrix(q).expect("point dimension checked"));
        let qs: Vec<String> = (1..=hp.n).map(|i| format!("q{i}")).collect();
        let mut csv = format!("{},j,row,col,value\n", qs.join(","));
        let mut values = Vec::with_capacity(h.points.len());
        for q in &h.points {
            let v = heat_coefficients_numeric(&hp, k_at.clone(), q, h.nodes, h.quad_tol)?;
            let lead: Vec<String> = q.iter().map(|&c| num(c)).collect();
            for (j, m) in v.values.iter().enumerate() {
                for r in 0..m.nrows() {
                    for c in 0..m.ncols() {
                        csv.push_str(&format!("{},{j},{r},{c},{}\n", lead.join(","), num(m[(r, c)])));
                    }
                }
            }
            values.push(json!({
                "q": q,
                "phi": v.values.iter().map(|m| m.row_iter()
                    .map(|r| r.iter().copied().collect::<Vec<f64>>())
                    .collect::<Vec<_>>()).collect::<Vec<_>>(),
                "quadrature_difference": v.quadrature_difference,
            }));
        }
        json["values"] = json!(values);
        csv
    };
    Ok(Outcome {
        report: Report::new(json, Some(csv)),
        tolerances: json!({ "quadrature": { "nodes": h.nodes, "tol": h.quad_tol } }),
    })
}

pub fn wkb(f: &ProblemFile, _s: &Settings) -> Result<Outcome, CliError> {
    let w = f
        .wkb
        .as_ref()
        .ok_or_else(|| CliError::validation("wkb needs a `wkb` block"))?;
    let mut wp = WkbProblem::new(w.potential.clone(), w.level, w.terms);
    wp.normalization = w.normalization;
    let e = wkb_expand(&wp)?;
    let mut csv = String::from("j,lambda\n");
    for (j, l) in e.lambdas.iter().enumerate() {
        csv.push_str(&format!("{j},{}\n", num(*l)));
    }
    let json = json!({
        "mu": e.mu,
        "phi": jet_to_json(&e.phi),
        "lambda": e.lambdas,
        "a": e.amplitudes.iter().map(jet_to_json).collect::<Vec<_>>(),
    });
    Ok(Outcome {
        report: Report::new(json, Some(csv)),
        tolerances: json!({}),
    })
}

pub fn verify_estimates(f: &ProblemFile, _s: &Settings) -> Result<Outcome, CliError> {
    let e = f
        .estimates
        .as_ref()
        .ok_or_else(|| CliError::validation("verify-estimates needs an `estimates` block"))?;
    let a0 = matrix(&e.a0, "estimates.a0")?;
    let path = match &e.perturbation {
        Some(b) => {
            let b = matrix(b, "estimates.perturbation")?;
            let (a, r) = (a0.clone(), e.decay_rate);
            MatrixPath::new(move |t| &a + &b * (r * t).exp(), e.horizon)
        }
        None => MatrixPath::constant(a0.clone(), e.horizon),
    };
    let rep = two_regime_bound(&a0, &path, e.eps, e.t0, e.samples)?;
    let inverse_violated = rep.inverse.as_ref().is_some_and(|i| i.violated);
    let mut report = Report::new(rep.to_json(), Some(rep.to_csv()));
    if rep.violated || inverse_violated {
        report.exit = EXIT_NUMERIC;
        report.notes.push("sampled norms exceed the bound".into());
    }
    Ok(Outcome {
        report,
        tolerances: json!({
            "violation_slack": transport_core::estimates::VIOLATION_SLACK,
        }),
    })
}
