//! Fixed points of the renormalization map and small scalar root finders.

use std::collections::BTreeSet;

use log::{debug, trace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{BoundaryValues, NodeId, Potentials, QuadraticForm};
use crate::structure::{renormalize, replicate, CellSchema, SchemaError, WeightVector};
use crate::Result;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("no convergence after {iterations} iterations (ratio spread {spread:e})")]
    NotConverged {
        iterations: usize,
        spread: f64,
        last: Box<FixedPointReport>,
    },
    #[error("conductance {conductance:e} appeared on {u}-{v}, outside the base edges")]
    SupportEscaped { u: NodeId, v: NodeId, conductance: f64 },
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("energy ratio is undefined for a constant function")]
    ConstantFunction,
    #[error("invalid solver option: {0}")]
    InvalidOption(String),
    #[error("degenerate iterate: {0}")]
    Degenerate(String),
}

/// Settings for [`power_iterate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop once the relative spread of `Λ(M)_e / M_e` over base edges drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Weight of the previous iterate in the update, in `[0, 1)`.
    pub damping: f64,
    /// Average every iterate over the schema's symmetry group.
    pub symmetrize: bool,
    /// Edge held at conductance 1; defaults to the first base edge.
    pub normalization: Option<(NodeId, NodeId)>,
    /// Seed for [`start_form`]: 0 gives unit conductances.
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-12,
            max_iter: 100_000,
            damping: 0.0,
            symmetrize: true,
            normalization: None,
            seed: 0,
        }
    }
}

/// Outcome of [`power_iterate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    /// `Λ(1, M) = λ M`.
    pub lambda: f64,
    /// Scalar weight making `M` an exact fixed point, `1 / λ`.
    pub rho: f64,
    /// Factor by which boundary resistances grow per level, `1 / λ`.
    pub resistance_growth: f64,
    pub form: QuadraticForm,
    pub normalization: (NodeId, NodeId),
    /// `‖Λ(1, M) - λ M‖_∞`.
    pub residual: f64,
    pub spread: f64,
    pub iterations: usize,
}

fn support(schema: &CellSchema) -> BTreeSet<(usize, usize)> {
    schema
        .base_edge_indices()
        .iter()
        .map(|&(i, j)| (i.min(j), i.max(j)))
        .collect()
}

/// Random positive conductances on the base edges, reproducible from `seed`.
pub fn random_start(schema: &CellSchema, seed: u64) -> QuadraticForm {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v0 = schema.boundary();
    let edges: Vec<_> = schema
        .base_edge_indices()
        .iter()
        .map(|&(i, j)| (v0[i].clone(), v0[j].clone(), rng.random_range(0.5..2.0)))
        .collect();
    QuadraticForm::from_conductances(v0.to_vec(), edges).expect("positive conductances")
}

/// Unit conductance on every base edge.
pub fn uniform_start(schema: &CellSchema) -> QuadraticForm {
    let v0 = schema.boundary();
    let edges: Vec<_> = schema
        .base_edge_indices()
        .iter()
        .map(|&(i, j)| (v0[i].clone(), v0[j].clone(), 1.0))
        .collect();
    QuadraticForm::from_conductances(v0.to_vec(), edges).expect("positive conductances")
}

/// Outcome of [`check_fixed_point`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointCheck {
    /// `‖Λ(ρ, M) - M‖_∞` over all matrix entries.
    pub residual: f64,
    /// `(p, q, Λ(ρ, M)_pq - M_pq)` for every pair `p <= q`.
    pub entries: Vec<(NodeId, NodeId, f64)>,
    pub tol: f64,
    pub passed: bool,
}

/// Compares `Λ(ρ, M)` with `M` entry by entry.
pub fn check_fixed_point(schema: &CellSchema, weights: &WeightVector, form: &QuadraticForm, tol: f64) -> Result<FixedPointCheck> {
    let form = schema.on_boundary(form)?;
    let image = renormalize(schema, weights, &form)?;
    let mut entries = Vec::new();
    let mut residual = 0.0f64;
    let v0 = schema.boundary();
    for i in 0..v0.len() {
        for j in i..v0.len() {
            let d = image.entry(i, j) - form.entry(i, j);
            residual = residual.max(d.abs());
            entries.push((v0[i].clone(), v0[j].clone(), d));
        }
    }
    Ok(FixedPointCheck {
        residual,
        entries,
        tol,
        passed: residual <= tol,
    })
}

/// `‖Λ(1, M) - λ M‖_∞`.
pub fn eigen_residual(schema: &CellSchema, form: &QuadraticForm, lambda: f64) -> Result<f64> {
    let form = schema.on_boundary(form)?;
    let image = renormalize(schema, schema.weights(), &form)?;
    Ok(image.max_abs_diff(&form.scaled(lambda))?)
}

/// `E_M(f) / E_{Ψ(M)}(h)` with `h` the harmonic extension of `f` to `v1`.
///
/// At a fixed point this equals the resistance growth for every non-constant `f`.
pub fn energy_ratio(schema: &CellSchema, form: &QuadraticForm, f: &BoundaryValues) -> Result<f64> {
    let form = schema.on_boundary(form)?;
    let mut coarse = Potentials::new();
    for b in schema.boundary() {
        let v = f.get(b.as_str()).ok_or_else(|| crate::network::NetworkError::MissingValue(b.clone()))?;
        coarse.insert(b.clone(), v);
    }
    if f.len() != schema.boundary().len() {
        return Err(SolveError::InvalidOption("boundary function has extra nodes".into()).into());
    }
    if f.is_constant() {
        return Err(SolveError::ConstantFunction.into());
    }
    let fine = replicate(schema, schema.weights(), &form)?;
    let h = fine.harmonic_extension(f)?;
    let coarse_energy = form.energy(&coarse)?;
    let fine_energy = fine.energy(&h)?;
    if !(fine_energy > 0.0) {
        return Err(SolveError::Degenerate("zero energy on the level-1 network".into()).into());
    }
    Ok(coarse_energy / fine_energy)
}

struct Normalizer {
    i: usize,
    j: usize,
}

impl Normalizer {
    fn apply(&self, form: &QuadraticForm) -> Result<QuadraticForm> {
        let c = form.conductance_at(self.i, self.j);
        if !(c > 0.0 && c.is_finite()) {
            return Err(SolveError::Degenerate(format!("normalization conductance is {c}")).into());
        }
        Ok(form.scaled(1.0 / c))
    }
}

fn check_options(schema: &CellSchema, opts: &SolverOptions) -> Result<Normalizer> {
    if !(opts.tol > 0.0 && opts.tol.is_finite()) {
        return Err(SolveError::InvalidOption(format!("tol must be positive, got {}", opts.tol)).into());
    }
    if !(0.0..1.0).contains(&opts.damping) {
        return Err(SolveError::InvalidOption(format!("damping must lie in [0, 1), got {}", opts.damping)).into());
    }
    if opts.max_iter == 0 {
        return Err(SolveError::InvalidOption("max_iter must be at least 1".into()).into());
    }
    let (u, v) = opts.normalization.clone().unwrap_or_else(|| schema.default_normalization());
    let pos = |n: &NodeId| schema.boundary().iter().position(|b| b == n);
    let bad = || SchemaError::BadNormalization { u: u.clone(), v: v.clone() };
    let (i, j) = (pos(&u).ok_or_else(bad)?, pos(&v).ok_or_else(bad)?);
    if !support(schema).contains(&(i.min(j), i.max(j))) {
        return Err(bad().into());
    }
    Ok(Normalizer { i, j })
}

/// Start form selected by a seed: unit conductances for 0, else [`random_start`].
pub fn start_form(schema: &CellSchema, seed: u64) -> QuadraticForm {
    if seed == 0 {
        uniform_start(schema)
    } else {
        random_start(schema, seed)
    }
}

/// Nonlinear power iteration for `Λ(1, M) = λ M` from a positive form on the base edges.
///
/// Each step traces the replicated form, discards conductance that leaked
/// off the base edges (failing if it exceeds `1e-9` of the scale), rescales
/// the normalization edge to 1 and optionally symmetrizes and damps.
/// `λ` is the geometric mean of the extreme edge ratios, which bracket it.
pub fn power_iterate(schema: &CellSchema, start: &QuadraticForm, opts: &SolverOptions) -> Result<FixedPointReport> {
    let norm = check_options(schema, opts)?;
    let support = support(schema);
    let weights = schema.weights();
    let v0 = schema.boundary();

    let mut m = schema.on_boundary(start)?;
    for (i, j, _) in m.conductances() {
        if !support.contains(&(i, j)) {
            return Err(SolveError::InvalidOption(format!("start has conductance on {}-{}, off the base edges", v0[i], v0[j])).into());
        }
    }
    if opts.symmetrize {
        m = schema.symmetrize(&m);
    }
    m = norm.apply(&m)?;

    let mut spread = f64::INFINITY;
    let mut lambda = f64::NAN;
    for iteration in 1..=opts.max_iter {
        let image = renormalize(schema, weights, &m)?;
        let scale = image.scale();
        for (i, j, c) in image.conductances() {
            if !support.contains(&(i, j)) && c > 1e-9 * scale {
                return Err(SolveError::SupportEscaped {
                    u: v0[i].clone(),
                    v: v0[j].clone(),
                    conductance: c,
                }
                .into());
            }
        }
        let image = image.pruned_to(&support);

        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for &(i, j) in &support {
            let r = image.conductance_at(i, j) / m.conductance_at(i, j);
            lo = lo.min(r);
            hi = hi.max(r);
        }
        spread = if hi > 0.0 { (hi - lo) / hi } else { f64::INFINITY };
        lambda = (hi * lo).sqrt();
        trace!("iteration {iteration}: ratios [{lo:e}, {hi:e}]");

        if spread < opts.tol {
            debug!("{}: converged after {iteration} iterations, λ = {lambda}", schema.name());
            return finish(schema, m, lambda, spread, iteration, &norm);
        }

        let mut next = norm.apply(&image)?;
        if opts.symmetrize {
            next = norm.apply(&schema.symmetrize(&next))?;
        }
        if opts.damping > 0.0 {
            next = next.scaled(1.0 - opts.damping).add(&m.scaled(opts.damping))?;
        }
        m = next;
    }
    let last = finish(schema, m, lambda, spread, opts.max_iter, &norm)?;
    Err(SolveError::NotConverged {
        iterations: opts.max_iter,
        spread,
        last: Box::new(last),
    }
    .into())
}

fn finish(
    schema: &CellSchema,
    form: QuadraticForm,
    lambda: f64,
    spread: f64,
    iterations: usize,
    norm: &Normalizer,
) -> Result<FixedPointReport> {
    let residual = eigen_residual(schema, &form, lambda)?;
    let v0 = schema.boundary();
    Ok(FixedPointReport {
        lambda,
        rho: 1.0 / lambda,
        resistance_growth: 1.0 / lambda,
        form,
        normalization: (v0[norm.i].clone(), v0[norm.j].clone()),
        residual,
        spread,
        iterations,
    })
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
///
/// Stops when the bracket is narrower than `tol` or can no longer be split
/// in floating point, so a tiny `tol` gives the root to machine precision.
pub fn scalar_bisect<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let (mut fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.signum() != fb.signum() && fa.is_finite() && fb.is_finite()) {
        return Err(SolveError::NoSignChange { lo: a, hi: b, f_lo: fa, f_hi: fb }.into());
    }
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

impl QuadraticForm {
    /// Keeps only conductances on the given index pairs (`i < j`).
    pub fn pruned_to(&self, keep: &BTreeSet<(usize, usize)>) -> QuadraticForm {
        let edges: Vec<_> = self
            .conductances()
            .filter(|&(i, j, _)| keep.contains(&(i, j)))
            .map(|(i, j, c)| (self.nodes()[i].clone(), self.nodes()[j].clone(), c))
            .collect();
        QuadraticForm::from_conductances(self.nodes().to_vec(), edges).expect("subset of a valid form")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::Error;
    use approx::assert_relative_eq;

    #[test]
    fn gasket_from_uniform_start() {
        let s = catalog::gasket_schema();
        let r = power_iterate(&s, &uniform_start(&s), &SolverOptions::default()).unwrap();
        assert_relative_eq!(r.lambda, 0.6, epsilon = 1e-14);
        assert!(r.iterations <= 2);
        assert!(r.residual < 1e-14);
    }

    #[test]
    fn gasket_from_random_start() {
        let s = catalog::gasket_schema();
        let opts = SolverOptions { seed: 7, symmetrize: false, ..Default::default() };
        let r = power_iterate(&s, &start_form(&s, opts.seed), &opts).unwrap();
        assert_relative_eq!(r.lambda, 0.6, epsilon = 1e-11);
        for (_, _, c) in r.form.conductances() {
            assert_relative_eq!(c, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn residual_of_non_fixed_scale() {
        let s = catalog::gasket_schema();
        let m = uniform_start(&s);
        let one = WeightVector::uniform(3, 1.0).unwrap();
        let fail = check_fixed_point(&s, &one, &m, 1e-10).unwrap();
        assert_relative_eq!(fail.residual, 0.8, epsilon = 1e-14);
        assert!(!fail.passed);
        let five_thirds = WeightVector::uniform(3, 5.0 / 3.0).unwrap();
        assert!(check_fixed_point(&s, &five_thirds, &m, 1e-12).unwrap().passed);
    }

    #[test]
    fn damping_still_converges() {
        let s = catalog::pillow_schema();
        let opts = SolverOptions { damping: 0.3, ..Default::default() };
        let r = power_iterate(&s, &start_form(&s, opts.seed), &opts).unwrap();
        assert_relative_eq!(r.resistance_growth, 2f64.powf(1.0 / 3.0), epsilon = 1e-10);
    }

    #[test]
    fn iteration_budget_is_reported() {
        let s = catalog::fractalina_schema();
        let opts = SolverOptions { max_iter: 3, seed: 1, ..Default::default() };
        match power_iterate(&s, &start_form(&s, opts.seed), &opts) {
            Err(Error::Solve(SolveError::NotConverged { iterations: 3, last, .. })) => {
                assert!(last.lambda.is_finite());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_options() {
        let s = catalog::gasket_schema();
        for opts in [
            SolverOptions { tol: 0.0, ..Default::default() },
            SolverOptions { damping: 1.0, ..Default::default() },
            SolverOptions { max_iter: 0, ..Default::default() },
        ] {
            assert!(matches!(power_iterate(&s, &start_form(&s, opts.seed), &opts), Err(Error::Solve(SolveError::InvalidOption(_)))));
        }
        let opts = SolverOptions { normalization: Some(("p1".into(), "nope".into())), ..Default::default() };
        assert!(matches!(power_iterate(&s, &start_form(&s, opts.seed), &opts), Err(Error::Schema(SchemaError::BadNormalization { .. }))));
    }

    #[test]
    fn bisect_finds_sqrt_two() {
        let r = scalar_bisect(|x| x * x - 2.0, 0.0, 2.0, 0.0).unwrap();
        assert!((r - std::f64::consts::SQRT_2).abs() <= 2.0 * f64::EPSILON);
        assert!(matches!(
            scalar_bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12),
            Err(Error::Solve(SolveError::NoSignChange { .. }))
        ));
    }

    #[test]
    fn energy_ratio_rejects_constants() {
        let s = catalog::gasket_schema();
        let m = uniform_start(&s);
        let f: BoundaryValues = s.boundary().iter().map(|b| (b.clone(), 2.0)).collect();
        assert!(matches!(
            energy_ratio(&s, &m, &f),
            Err(Error::Solve(SolveError::ConstantFunction))
        ));
        let f: BoundaryValues = s.boundary().iter().enumerate().map(|(i, b)| (b.clone(), i as f64)).collect();
        assert_relative_eq!(energy_ratio(&s, &m, &f).unwrap(), 5.0 / 3.0, epsilon = 1e-13);
    }
}
