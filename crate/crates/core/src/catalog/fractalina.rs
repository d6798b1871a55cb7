use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::fractalina_schema;
use crate::network::{NodeId, QuadraticForm, ResistorNetwork};
use crate::solver::{scalar_bisect, SolveError};
use crate::structure::build_level;
use crate::Result;

/// Hourglass parameters: bottom triangle resistances `R1` (base) and `R2`
/// (sides), top triangle the same scaled by `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractalinaParams {
    pub k: f64,
    pub r1: f64,
    pub r2: f64,
}

/// `R1` as a function of `k` when the two triangles' base resistances scale consistently.
pub fn r1_of_k(k: f64) -> f64 {
    (1.0 - k - 2.0 * k * k) / (4.0 * k * k - k - 1.0)
}

impl FractalinaParams {
    pub fn new(k: f64, r1: f64) -> Result<Self> {
        for (name, v) in [("k", k), ("R1", r1)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(SolveError::InvalidOption(format!("fractalina {name} = {v} must be positive")).into());
            }
        }
        Ok(FractalinaParams { k, r1, r2: 1.0 })
    }

    /// Parameters on the curve `R1 = R1(k)`; positive only for `k` in `(1/2, (1+√17)/8)`.
    pub fn from_k(k: f64) -> Result<Self> {
        Self::new(k, r1_of_k(k))
    }

    /// `k = (3+√41)/16`, `R1 = (√41-1)/4`.
    pub fn solution() -> Self {
        let s = 41f64.sqrt();
        FractalinaParams {
            k: (3.0 + s) / 16.0,
            r1: (s - 1.0) / 4.0,
            r2: 1.0,
        }
    }
}

pub fn fractalina_class_values(p: &FractalinaParams) -> BTreeMap<String, f64> {
    BTreeMap::from([
        ("bottom_base".to_string(), 1.0 / p.r1),
        ("bottom_side".to_string(), 1.0 / p.r2),
        ("top_base".to_string(), 1.0 / (p.k * p.r1)),
        ("top_side".to_string(), 1.0 / (p.k * p.r2)),
    ])
}

/// Hourglass form on `P1, P2, P3, Q1, Q2`.
pub fn fractalina_form(p: &FractalinaParams) -> Result<QuadraticForm> {
    Ok(fractalina_schema().base_form(&fractalina_class_values(p))?)
}

/// Leg resistances of the hourglass after Δ-Y on both triangles: `α` at
/// `Q1`/`Q2`, `β` through `P3`, `γ` at `P1`/`P2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelY {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

pub fn fractalina_level1_y(p: &FractalinaParams) -> LevelY {
    let d = 2.0 * p.r2 + p.r1;
    LevelY {
        alpha: p.k * p.r1 * p.r2 / d,
        beta: (p.k + 1.0) * p.r2 * p.r2 / d,
        gamma: p.r1 * p.r2 / d,
    }
}

/// Same legs, read off after two [`ResistorNetwork::delta_to_y`] calls.
pub fn fractalina_level1_y_by_reduction(p: &FractalinaParams) -> Result<LevelY> {
    let schema = fractalina_schema();
    let net = schema
        .base_network(&fractalina_class_values(p))?
        .delta_to_y(["P1", "P2", "P3"], "Yb")?
        .delta_to_y(["Q1", "Q2", "P3"], "Yt")?;
    let r = |a: &str, b: &str| -> Result<f64> { Ok(1.0 / net.conductance_between(a, b)?) };
    Ok(LevelY {
        alpha: r("Q1", "Yt")?,
        beta: r("Yb", "P3")? + r("P3", "Yt")?,
        gamma: r("P1", "Yb")?,
    })
}

/// Legs of the equivalent hourglass one level down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Primes {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// `α' = R(Q1,Q2)/2`, `γ' = R(P1,P2)/2`, `β' = R(P1,Q1) - α' - γ'` on the 12-node network.
pub fn fractalina_primes(p: &FractalinaParams) -> Result<Primes> {
    let schema = fractalina_schema();
    let form = build_level(&schema, &fractalina_class_values(p), 1)?.form();
    let alpha = form.effective_resistance("Q1", "Q2")? / 2.0;
    let gamma = form.effective_resistance("P1", "P2")? / 2.0;
    let beta = form.effective_resistance("P1", "Q1")? - alpha - gamma;
    Ok(Primes { alpha, beta, gamma })
}

/// Rational expressions for `β'`, `γ'` (with `α' = γ`).
pub fn fractalina_primes_closed_form(p: &FractalinaParams) -> Primes {
    let FractalinaParams { k, r1, r2 } = *p;
    let d = 2.0 * r2 + r1;
    let kappa_num = 2.0 * k * r1 * r2 + k * r2 * r2 + r2 * r2;
    let e = 4.0 * k * r1 * r2 + 2.0 * k * r2 * r2 + 2.0 * r2 * r2 + 2.0 * r1 * r2;
    let beta = (kappa_num * kappa_num + (k * r2 * r2 + r2 * r2) * e) / (d * e);
    let gamma = (kappa_num * (2.0 * r2 * r1) + r1 * r2 * e) / (d * e);
    Primes {
        alpha: r1 * r2 / d,
        beta,
        gamma,
    }
}

/// `k - (α+β+γ)/(α'+β'+γ')` along `R1 = R1(k)`; zero at the self-similar `k`.
pub fn fractalina_mismatch(k: f64) -> Result<f64> {
    let p = FractalinaParams::from_k(k)?;
    let y = fractalina_level1_y(&p);
    let pr = fractalina_primes(&p)?;
    Ok(k - (y.alpha + y.beta + y.gamma) / (pr.alpha + pr.beta + pr.gamma))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractalinaSolution {
    pub params: FractalinaParams,
    /// `k - γ/γ'` and `k - (α+β+γ)/(α'+β'+γ')` at the returned point.
    pub residuals: [f64; 2],
}

/// Bisects the mismatch on `(0.51, 0.63)`.
pub fn fractalina_solve(tol: f64) -> Result<FractalinaSolution> {
    let k = scalar_bisect(|k| fractalina_mismatch(k).unwrap_or(f64::NAN), 0.51, 0.63, tol)?;
    let params = FractalinaParams::from_k(k)?;
    let y = fractalina_level1_y(&params);
    let pr = fractalina_primes(&params)?;
    Ok(FractalinaSolution {
        params,
        residuals: [
            k - y.gamma / pr.gamma,
            k - (y.alpha + y.beta + y.gamma) / (pr.alpha + pr.beta + pr.gamma),
        ],
    })
}

/// Quantities of the 12-node network after Δ-Y on all six cell triangles
/// and elimination of the resulting series nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractalinaAudit {
    pub params: FractalinaParams,
    pub y: LevelY,
    pub primes: Primes,
    pub closed_primes: Primes,
    /// Leg `Y3b - Q1`.
    pub alpha_leg: f64,
    /// `Y3b - Y3t` through `P3`.
    pub delta: f64,
    /// `Y3t - Y1t` through `a`.
    pub epsilon: f64,
    /// Leg `Y1t - t1`.
    pub zeta: f64,
    /// `Y1t - Y1b` through `s1`.
    pub eta: f64,
    /// Leg `Y1b - P1`.
    pub theta: f64,
    /// `Y1b - Y2b` through `m`.
    pub iota: f64,
    /// `η + ε`, the path from `Y1b` to `Y3t`.
    pub kappa: f64,
    /// Largest relative difference between the boundary traces of the
    /// original and the reduced network.
    pub reduction_error: f64,
}

pub struct AuditCheck {
    pub name: &'static str,
    pub measured: f64,
    pub expected: f64,
}

impl FractalinaAudit {
    pub fn checks(&self) -> Vec<AuditCheck> {
        let (a, b, g) = (self.y.alpha, self.y.beta, self.y.gamma);
        let FractalinaParams { k, r1, r2 } = self.params;
        let r = r1 / r2;
        let kappa_closed = (2.0 * k * r1 * r2 + k * r2 * r2 + r2 * r2) / (2.0 * r2 + r1);
        let c = |name, measured, expected| AuditCheck { name, measured, expected };
        vec![
            c("alpha' = gamma (leg)", self.alpha_leg, g),
            c("alpha' = gamma (trace)", self.primes.alpha, g),
            c("theta = gamma", self.theta, g),
            c("delta = beta", self.delta, b),
            c("eta = beta", self.eta, b),
            c("epsilon = 2 alpha", self.epsilon, 2.0 * a),
            c("iota = 2 gamma", self.iota, 2.0 * g),
            c("zeta = alpha", self.zeta, a),
            c("kappa = 2 alpha + beta", self.kappa, 2.0 * a + b),
            c("kappa closed form", self.kappa, kappa_closed),
            c("beta' = beta + kappa^2 / (2 (kappa + gamma))", self.primes.beta, b + self.kappa.powi(2) / (2.0 * (self.kappa + g))),
            c("gamma' = gamma + kappa gamma / (kappa + gamma)", self.primes.gamma, g + self.kappa * g / (self.kappa + g)),
            c("beta' closed form", self.primes.beta, self.closed_primes.beta),
            c("gamma' closed form", self.primes.gamma, self.closed_primes.gamma),
            c("k = gamma / gamma'", k, g / self.primes.gamma),
            c(
                "k = (2kR1 + k + 1 + R1) / (4kR1 + 2k + 2 + R1)",
                k,
                (2.0 * k * r + k + 1.0 + r) / (4.0 * k * r + 2.0 * k + 2.0 + r),
            ),
            c("reduction preserves the boundary trace", self.reduction_error, 0.0),
        ]
    }
}

/// Builds the Δ-Y audit at `p`.
pub fn fractalina_audit(p: &FractalinaParams) -> Result<FractalinaAudit> {
    let schema = fractalina_schema();
    let level1 = build_level(&schema, &fractalina_class_values(p), 1)?.into_network();
    let v1 = schema.level1_nodes();
    let slot = |name: &str| schema.boundary().iter().position(|b| b == name).unwrap();
    let (p1, p2, p3, q1, q2) = (slot("P1"), slot("P2"), slot("P3"), slot("Q1"), slot("Q2"));

    let mut reduced: ResistorNetwork = level1.clone();
    for cell in 0..schema.cell_count() {
        let img = |s: usize| v1[schema.image(cell, s)].as_str();
        reduced = reduced.delta_to_y([img(p1), img(p2), img(p3)], format!("Y{}b", cell + 1))?;
        reduced = reduced.delta_to_y([img(q1), img(q2), img(p3)], format!("Y{}t", cell + 1))?;
    }
    let keep: Vec<NodeId> = ["P1", "P2", "Q1", "Q2", "t1", "t2", "Y1b", "Y1t", "Y2b", "Y2t", "Y3b", "Y3t"]
        .into_iter()
        .map(NodeId::from)
        .collect();
    let traced = reduced.laplacian().trace_to(&keep)?;
    let r = |a: &str, b: &str| -> Result<f64> { Ok(1.0 / traced.conductance(a, b)?) };

    let terminals = &keep[..6];
    let before = level1.laplacian().trace_to(terminals)?;
    let after = traced.trace_to(terminals)?;
    let reduction_error = before.max_abs_diff(&after)? / before.scale();

    let eta = r("Y1t", "Y1b")?;
    let epsilon = r("Y3t", "Y1t")?;
    Ok(FractalinaAudit {
        params: *p,
        y: fractalina_level1_y(p),
        primes: fractalina_primes(p)?,
        closed_primes: fractalina_primes_closed_form(p),
        alpha_leg: r("Y3b", "Q1")?,
        delta: r("Y3b", "Y3t")?,
        epsilon,
        zeta: r("Y1t", "t1")?,
        eta,
        theta: r("Y1b", "P1")?,
        iota: r("Y1b", "Y2b")?,
        kappa: eta + epsilon,
        reduction_error,
    })
}
