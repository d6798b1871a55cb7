use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Value};

use fractal_forms::catalog::{self, Catalog, BUILTIN_NAMES};
use fractal_forms::solver::{power_iterate, start_form, SolverOptions};
use fractal_forms::structure::build_level;
use fractal_forms::verify::{run_all, VerifyOptions};
use fractal_forms::{BoundaryValues, CellSchema, NodeId};

use crate::args::{parse_assignment, ExportFormat, SolverArgs, SourceArgs};
use crate::report::{fingerprint, sig12, CliError};

/// Result of one command before it is wrapped in a report.
pub struct Outcome {
    pub input_sha256: Option<String>,
    pub result: Value,
    pub text: String,
    /// Set when the command ran but its checks failed.
    pub mismatch: Option<String>,
}

impl Outcome {
    fn new(input: Option<&[u8]>, result: Value, text: String) -> Self {
        Outcome {
            input_sha256: input.map(fingerprint),
            result,
            text,
            mismatch: None,
        }
    }
}

pub fn load_catalog(dir: Option<&Path>) -> Result<Catalog, CliError> {
    match dir {
        Some(d) if !d.is_dir() => Err(CliError::Io(format!("{}: not a directory", d.display()))),
        Some(d) => Ok(Catalog::with_overrides(d)?),
        None => Ok(Catalog::builtin()),
    }
}

pub struct Source {
    pub schema: CellSchema,
    pub bytes: Vec<u8>,
    /// Name of the built-in when loaded with `--builtin`.
    pub builtin: Option<String>,
}

pub fn load_source(args: &SourceArgs, cat: &Catalog) -> Result<Source, CliError> {
    if let Some(name) = &args.builtin {
        let schema = cat.get(name).cloned().ok_or_else(|| {
            CliError::Usage(format!("unknown built-in `{name}`; expected one of {}", BUILTIN_NAMES.join(", ")))
        })?;
        let bytes = schema.to_json().into_bytes();
        return Ok(Source { schema, bytes, builtin: Some(name.clone()) });
    }
    let path = args.input.as_ref().expect("clap requires a source");
    let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::Io(format!("{}: not UTF-8", path.display())))?;
    let schema = CellSchema::from_json(&text)?;
    Ok(Source { schema, bytes, builtin: None })
}

fn class_values(schema: &CellSchema, overrides: &[String]) -> Result<BTreeMap<String, f64>, CliError> {
    let mut values = schema.class_values().clone();
    for text in overrides {
        let (class, v) = parse_assignment(text).map_err(CliError::Usage)?;
        if !values.contains_key(&class) {
            let known: Vec<_> = values.keys().cloned().collect();
            return Err(CliError::Usage(format!("unknown class `{class}`; classes are {}", known.join(", "))));
        }
        values.insert(class, v);
    }
    Ok(values)
}

pub fn list(cat: &Catalog) -> Outcome {
    let mut rows = Vec::new();
    let mut text = format!("{:<12}{:>6}{:>6}{:>4}\n", "name", "|V0|", "|V1|", "N");
    for name in BUILTIN_NAMES {
        let s = cat.get(name).expect("built-ins are always present");
        let (v0, v1, n) = (s.boundary().len(), s.level1_nodes().len(), s.cell_count());
        writeln!(text, "{name:<12}{v0:>6}{v1:>6}{n:>4}").unwrap();
        rows.push(json!({"name": name, "v0": v0, "v1": v1, "cells": n}));
    }
    Outcome::new(None, json!({ "structures": rows }), text)
}

/// λ predicted by the closed-form route of a built-in.
fn closed_form_lambda(name: &str) -> Result<Option<f64>, CliError> {
    Ok(match name {
        "gasket" => Some(0.6),
        "fractalina" => Some(catalog::fractalina_solve(0.0)?.params.k),
        "pillow" => Some(1.0 / catalog::pillow_solve(0.0)?.rho),
        _ => None,
    })
}

pub fn solve(src: &Source, a: &SolverArgs) -> Result<Outcome, CliError> {
    let normalization = match a.normalize.as_deref() {
        Some([u, v]) => Some((NodeId::from(u.as_str()), NodeId::from(v.as_str()))),
        Some(_) => return Err(CliError::Usage("--normalize takes exactly two labels".into())),
        None => None,
    };
    let opts = SolverOptions {
        tol: a.tol,
        max_iter: a.max_iter,
        damping: a.damping,
        symmetrize: !a.no_symmetrize,
        normalization,
        seed: a.seed,
    };
    let start = start_form(&src.schema, a.seed);
    let report = power_iterate(&src.schema, &start, &opts)?;
    log::info!("{} converged in {} iterations", src.schema.name(), report.iterations);

    let route = match &src.builtin {
        Some(name) => closed_form_lambda(name)?.map(|l| (name.clone(), l)),
        None => None,
    };
    let mut text = String::new();
    let (nu, nv) = &report.normalization;
    writeln!(text, "schema             {}", src.schema.name()).unwrap();
    writeln!(text, "lambda             {}", sig12(report.lambda)).unwrap();
    writeln!(text, "rho                {}", sig12(report.rho)).unwrap();
    writeln!(text, "resistance growth  {}", sig12(report.resistance_growth)).unwrap();
    writeln!(text, "residual           {}", sig12(report.residual)).unwrap();
    writeln!(text, "spread             {}", sig12(report.spread)).unwrap();
    writeln!(text, "iterations         {}", report.iterations).unwrap();
    writeln!(text, "conductances (normalized to {nu} {nv} = 1):").unwrap();
    for e in report.form.edge_list() {
        writeln!(text, "  {} {} {}", e.u, e.v, sig12(e.conductance)).unwrap();
    }
    let route_json = match &route {
        Some((name, l)) => {
            let diff = (report.lambda - l).abs();
            writeln!(text, "closed form ({name})  lambda {}  difference {}", sig12(*l), sig12(diff)).unwrap();
            json!({"name": name, "lambda": l, "difference": diff})
        }
        None => Value::Null,
    };
    let result = json!({
        "schema": src.schema.name(),
        "options": opts,
        "fixed_point": report,
        "closed_form": route_json,
    });
    Ok(Outcome::new(Some(&src.bytes), result, text))
}

pub fn resist(src: &Source, level: usize, pair: Option<&[String]>, set: &[String]) -> Result<Outcome, CliError> {
    let values = class_values(&src.schema, set)?;
    let g = build_level(&src.schema, &values, level)?;
    let form = g.form();
    let pairs: Vec<(NodeId, NodeId)> = match pair {
        Some([a, b]) => vec![(a.as_str().into(), b.as_str().into())],
        Some(_) => return Err(CliError::Usage("--pair takes exactly two labels".into())),
        None => {
            let b = g.boundary();
            (0..b.len())
                .flat_map(|i| (i + 1..b.len()).map(move |j| (b[i].clone(), b[j].clone())))
                .collect()
        }
    };
    let mut rows = Vec::new();
    let mut text = format!(
        "{} level {level}: {} nodes, {} edges\n",
        src.schema.name(),
        g.node_count(),
        g.network().edges().len()
    );
    for (a, b) in pairs {
        let r = form.effective_resistance(a.as_str(), b.as_str())?;
        writeln!(text, "R({a}, {b}) = {}", sig12(r)).unwrap();
        rows.push(json!({"a": a, "b": b, "resistance": r}));
    }
    let result = json!({
        "schema": src.schema.name(),
        "level": level,
        "nodes": g.node_count(),
        "edges": g.network().edges().len(),
        "class_values": values,
        "resistances": rows,
    });
    Ok(Outcome::new(Some(&src.bytes), result, text))
}

pub fn extend(src: &Source, level: usize, assignments: &[String], set: &[String]) -> Result<Outcome, CliError> {
    let mut bv = BoundaryValues::new();
    for text in assignments {
        let (node, v) = parse_assignment(text).map_err(CliError::Usage)?;
        if !src.schema.boundary().iter().any(|b| b == node.as_str()) {
            return Err(CliError::Usage(format!("`{node}` is not a boundary node")));
        }
        bv.set(node, v);
    }
    let missing: Vec<_> = src
        .schema
        .boundary()
        .iter()
        .filter(|b| bv.get(b.as_str()).is_none())
        .map(|b| b.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Usage(format!("no value for boundary node(s) {}", missing.join(", "))));
    }
    let values = class_values(&src.schema, set)?;
    let coarse = src.schema.base_form(&values)?;
    let g = build_level(&src.schema, &values, level)?;
    let h = g.form().harmonic_extension(&bv)?;
    let e0 = coarse.energy(&bv.iter().map(|(n, v)| (n.clone(), v)).collect())?;
    let en = g.form().energy(&h)?;
    let ratio = (en > 0.0).then(|| e0 / en);

    let mut text = String::new();
    let mut potentials = Vec::new();
    for node in g.network().nodes() {
        let v = h[node];
        writeln!(text, "{node} {}", sig12(v)).unwrap();
        potentials.push(json!({"node": node, "value": v}));
    }
    writeln!(text, "energy level 0      {}", sig12(e0)).unwrap();
    writeln!(text, "energy level {level:<7}{}", sig12(en)).unwrap();
    match ratio {
        Some(r) => writeln!(text, "ratio               {}", sig12(r)).unwrap(),
        None => writeln!(text, "ratio               undefined (constant boundary values)").unwrap(),
    }
    let result = json!({
        "schema": src.schema.name(),
        "level": level,
        "potentials": potentials,
        "energy_level0": e0,
        "energy_level_n": en,
        "ratio": ratio,
    });
    Ok(Outcome::new(Some(&src.bytes), result, text))
}

pub fn verify(cat: &Catalog, tol: Option<f64>, seed: Option<u64>) -> Result<Outcome, CliError> {
    if let Some(t) = tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(CliError::Usage(format!("--tol must be positive, got {t}")));
        }
    }
    let mut opts = VerifyOptions { tol_override: tol, ..VerifyOptions::default() };
    if let Some(s) = seed {
        opts.seed = s;
    }
    let outcomes = run_all(cat, &opts);
    let mut text = String::new();
    for o in &outcomes {
        writeln!(text, "{}", o.summary_line()).unwrap();
        for c in o.checks.iter().filter(|c| !c.passed) {
            writeln!(
                text,
                "    {}: measured {} expected {} error {:.3e} > {:.0e}",
                c.name,
                sig12(c.measured),
                sig12(c.expected),
                c.error,
                c.tolerance
            )
            .unwrap();
        }
    }
    let failed: Vec<String> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id.to_string()).collect();
    let schemas: BTreeMap<&str, String> = BUILTIN_NAMES
        .iter()
        .map(|n| (*n, fingerprint(cat.get(n).unwrap().to_json().as_bytes())))
        .collect();
    let result = json!({
        "passed": failed.is_empty(),
        "criteria": outcomes,
        "options": opts,
        "schema_sha256": schemas,
    });
    let mut out = Outcome::new(None, result, text);
    if !failed.is_empty() {
        out.mismatch = Some(format!("criteria {} failed", failed.join(", ")));
    }
    Ok(out)
}

/// Returns the exported bytes and a report describing them.
pub fn export(src: &Source, level: usize, format: ExportFormat, set: &[String]) -> Result<(String, Outcome), CliError> {
    let values = class_values(&src.schema, set)?;
    let g = build_level(&src.schema, &values, level)?;
    let net = g.network();
    let body = match format {
        ExportFormat::Dot => net.to_dot(),
        ExportFormat::Edgelist => {
            if !net.nodes().iter().all(NodeId::is_edge_list_safe) {
                return Err(CliError::Usage("node labels contain whitespace or `#`; use --format json".into()));
            }
            net.to_edge_list()
        }
        ExportFormat::Json => net.to_json(),
    };
    let result = json!({
        "schema": src.schema.name(),
        "level": level,
        "format": format!("{format:?}").to_lowercase(),
        "nodes": net.node_count(),
        "edges": net.edges().len(),
        "output_sha256": fingerprint(body.as_bytes()),
    });
    let text = format!(
        "{} level {level}: {} nodes, {} edges\n",
        src.schema.name(),
        net.node_count(),
        net.edges().len()
    );
    Ok((body, Outcome::new(Some(&src.bytes), result, text)))
}
