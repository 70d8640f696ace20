//! Truncated series solutions: BBGKY marginals, the kinetic solution, the
//! marginal and correlation functionals, the inversion of the kinetic
//! solution for its initial datum, observables, and the consistency checks
//! tying them together.
//!
//! Every series is evaluated term by term on parallel workers and summed in
//! ascending term order, so results do not depend on the worker count.

use std::collections::BTreeMap;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{dissections_bounded, factorial, set_partitions};
use crate::cumulants::{reduced_group_cumulant_on, v_direct, ClusterArgument, ClusterMode};
use crate::error::{Error, Result};
use crate::model::{Evolution, ModelSpec};
use crate::operator::{ManyBodyOperator, C64, MAX_PARTICLES};

/// Radius `e^{-2}` below which the marginal functionals converge.
pub fn functional_radius() -> f64 {
    (-2.0f64).exp()
}

/// Radius `e^{-1}` below which the BBGKY series converges.
pub fn series_radius() -> f64 {
    (-1.0f64).exp()
}

/// Root of `e^{2x}(2x + 1) = 2`, the contraction radius of the inversion map.
pub fn contraction_radius() -> f64 {
    let g = |x: f64| (2.0 * x).exp() * (2.0 * x + 1.0) - 2.0;
    let dg = |x: f64| (2.0 * x).exp() * (4.0 * x + 4.0);
    let mut x = 0.2;
    for _ in 0..50 {
        let step = g(x) / dg(x);
        x -= step;
        if step.abs() < 1e-17 {
            break;
        }
    }
    x
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeriesConfig {
    pub n_max: usize,
    pub dt: f64,
    pub tol: BTreeMap<String, f64>,
    pub norm_guard: bool,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self {
            n_max: 4,
            dt: 0.05,
            tol: BTreeMap::new(),
            norm_guard: true,
        }
    }
}

impl SeriesConfig {
    pub fn with_order(&self, n_max: usize) -> Self {
        Self { n_max, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("series.dt", "must be positive"));
        }
        for (k, v) in &self.tol {
            if !(*v > 0.0) {
                return Err(Error::invalid(format!("series.tol.{k}"), "must be positive"));
            }
        }
        Ok(())
    }

    /// Named tolerance, falling back to the built-in default.
    pub fn tolerance(&self, name: &str) -> f64 {
        if let Some(v) = self.tol.get(name) {
            return *v;
        }
        match name {
            "trace" | "imaginary" | "collision_trace" => 1e-12,
            "hermiticity" => 1e-11,
            _ => 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContractionConfig {
    pub max_iters: usize,
    pub fixed_point_tol: f64,
    pub threshold: f64,
}

impl Default for ContractionConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            fixed_point_tol: 1e-13,
            threshold: contraction_radius(),
        }
    }
}

impl ContractionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("contraction.max_iters", "must be positive"));
        }
        if !(self.fixed_point_tol > 0.0) {
            return Err(Error::invalid("contraction.fixed_point_tol", "must be positive"));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::invalid("contraction.threshold", "must be positive"));
        }
        Ok(())
    }
}

fn check_one_particle(m: &ModelSpec, f: &ManyBodyOperator, what: &str) -> Result<()> {
    m.check_dim(f)?;
    if f.particle_count() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "{what} must be a one-particle operator, got {} particles",
            f.particle_count()
        )));
    }
    f.require_hermitian(what)
}

fn check_size(total: usize) -> Result<()> {
    if total > MAX_PARTICLES {
        return Err(Error::SizeCap {
            size: total,
            cap: MAX_PARTICLES,
        });
    }
    Ok(())
}

fn guard_series(cfg: &SeriesConfig, f: &ManyBodyOperator, what: &str) {
    if !cfg.norm_guard {
        return;
    }
    let norm = f.trace_norm();
    if norm >= series_radius() {
        warn!("{what}: trace norm {norm:.6e} >= e^-1, series convergence is not guaranteed");
    } else if norm >= functional_radius() {
        warn!("{what}: trace norm {norm:.6e} >= e^-2, outside the admissible regime of the marginal functionals");
    }
}

fn guard_functional(cfg: &SeriesConfig, f: &ManyBodyOperator, what: &str) {
    if !cfg.norm_guard {
        return;
    }
    let norm = f.trace_norm();
    if norm >= functional_radius() {
        warn!("{what}: trace norm {norm:.6e} >= e^-2, functional series convergence is not guaranteed");
    }
}

fn trace_tail(g: ManyBodyOperator, s: usize) -> ManyBodyOperator {
    if g.particle_count() == s {
        g
    } else {
        g.trace_out_from(s + 1).expect("s >= 1 labels kept")
    }
}

fn sum_terms(dim: usize, s: usize, terms: Vec<ManyBodyOperator>) -> ManyBodyOperator {
    let mut acc = ManyBodyOperator::zeros(dim, s);
    for t in &terms {
        acc += t;
    }
    acc
}

/// Individual terms `1/n! Tr_{s+1..s+n} A_{1+n}(t) Π F_1^0`, `n = 0..=n_max`.
pub fn bbgky_terms(
    m: &ModelSpec,
    s: usize,
    t: f64,
    f1_init: &ManyBodyOperator,
    cfg: &SeriesConfig,
) -> Result<Vec<ManyBodyOperator>> {
    check_one_particle(m, f1_init, "initial.f1")?;
    if s == 0 {
        return Err(Error::invalid("s", "must be at least 1"));
    }
    check_size(s + cfg.n_max)?;
    guard_series(cfg, f1_init, "bbgky_marginal");
    let ev = m.evolution(t);
    let cluster: Vec<usize> = (1..=s).collect();
    Ok((0..=cfg.n_max)
        .into_par_iter()
        .map(|n| {
            let product = f1_init.tensor_power(s + n).expect("size checked");
            let extras: Vec<usize> = (s + 1..=s + n).collect();
            let g = reduced_group_cumulant_on(&ev, &cluster, &extras, &product);
            trace_tail(g, s).scale_real(1.0 / factorial(n))
        })
        .collect())
}

/// `F_s(t) = Σ_{n <= n_max} 1/n! Tr_{s+1..s+n} A_{1+n}(t, {Y}, s+1, ..., s+n) Π F_1^0`.
pub fn bbgky_marginal(
    m: &ModelSpec,
    s: usize,
    t: f64,
    f1_init: &ManyBodyOperator,
    cfg: &SeriesConfig,
) -> Result<ManyBodyOperator> {
    let terms = bbgky_terms(m, s, t, f1_init, cfg)?;
    Ok(sum_terms(m.dim(), s, terms))
}

/// One-particle solution `F_1(t)`.
pub fn kinetic_solution(m: &ModelSpec, t: f64, f1_init: &ManyBodyOperator, cfg: &SeriesConfig) -> Result<ManyBodyOperator> {
    bbgky_marginal(m, 1, t, f1_init, cfg)
}

fn functional(
    m: &ModelSpec,
    s: usize,
    t: f64,
    f1_t: &ManyBodyOperator,
    cfg: &SeriesConfig,
    mode: ClusterMode,
) -> Result<ManyBodyOperator> {
    check_one_particle(m, f1_t, "f1_t")?;
    if s == 0 {
        return Err(Error::invalid("s", "must be at least 1"));
    }
    check_size(s + cfg.n_max)?;
    guard_functional(cfg, f1_t, "marginal functional");
    let ev = m.evolution(t);
    let terms: Vec<ManyBodyOperator> = (0..=cfg.n_max)
        .into_par_iter()
        .map(|n| functional_term(&ev, s, n, f1_t, mode))
        .collect();
    Ok(sum_terms(m.dim(), s, terms))
}

fn functional_term(ev: &Evolution, s: usize, n: usize, f1_t: &ManyBodyOperator, mode: ClusterMode) -> ManyBodyOperator {
    let product = f1_t.tensor_power(s + n).expect("size checked");
    let arg = ClusterArgument { cluster_size: s, extra: n };
    let g = v_direct(ev, arg, mode, &product);
    trace_tail(g, s).scale_real(1.0 / factorial(n))
}

/// `F_s(t | F_1(t)) = Σ_{n <= n_max} 1/n! Tr_{s+1..s+n} V_{1+n}(t, {Y}, ...) Π F_1(t)`.
pub fn marginal_functional(
    m: &ModelSpec,
    s: usize,
    t: f64,
    f1_t: &ManyBodyOperator,
    cfg: &SeriesConfig,
) -> Result<ManyBodyOperator> {
    functional(m, s, t, f1_t, cfg, ClusterMode::Clustered)
}

/// `G_s(t | F_1(t))`: the marginal functional series with the cluster
/// declusterized.
pub fn correlation_functional(
    m: &ModelSpec,
    s: usize,
    t: f64,
    f1_t: &ManyBodyOperator,
    cfg: &SeriesConfig,
) -> Result<ManyBodyOperator> {
    functional(m, s, t, f1_t, cfg, ClusterMode::Declustered)
}

/// Marginals `F_1, ..., F_k` of one state, `marginals[s - 1] = F_s`.
#[derive(Clone, Debug, Default)]
pub struct MarginalState {
    pub marginals: Vec<ManyBodyOperator>,
}

impl MarginalState {
    pub fn get(&self, s: usize) -> Result<&ManyBodyOperator> {
        s.checked_sub(1)
            .and_then(|i| self.marginals.get(i))
            .ok_or(Error::MissingMarginal(s))
    }
}

/// `G_s = Σ_P (-1)^{|P|-1} (|P|-1)! Π_{X ∈ P} F_{|X|}(X)`.
pub fn correlation_from_marginals(state: &MarginalState, s: usize) -> Result<ManyBodyOperator> {
    if s == 0 {
        return Err(Error::invalid("s", "must be at least 1"));
    }
    let dim = state.get(1)?.dim();
    for k in 1..=s {
        state.get(k)?;
    }
    let mut acc = ManyBodyOperator::zeros(dim, s);
    for p in set_partitions(s)? {
        let mut prod = ManyBodyOperator::identity(dim, s);
        for block in &p.blocks {
            let labels: Vec<usize> = block.iter().map(|&k| k + 1).collect();
            let factor = state.get(labels.len())?.embed(&labels, s)?;
            prod = prod.compose(&factor)?;
        }
        let k = p.len();
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        acc.axpy(sign * factorial(k - 1), &prod);
    }
    Ok(acc)
}

/// `Tr_2 (-N_int(1,2)) F_2(t | F_1(t))`.
pub fn collision_integral(m: &ModelSpec, t: f64, f1_t: &ManyBodyOperator, cfg: &SeriesConfig) -> Result<ManyBodyOperator> {
    let f2 = marginal_functional(m, 2, t, f1_t, cfg)?;
    let kicked = m.interaction_liouvillian(1, 2, &f2)?.scale_real(-1.0);
    kicked.partial_trace(&[2])
}

/// Right-hand side `-N_1 F_1 + Tr_2 (-N_int(1,2)) F_2(t | F_1)` of the kinetic equation.
pub fn kinetic_rhs(m: &ModelSpec, t: f64, f1_t: &ManyBodyOperator, cfg: &SeriesConfig) -> Result<ManyBodyOperator> {
    let free = m.liouvillian(f1_t)?.scale_real(-1.0);
    Ok(&free + &collision_integral(m, t, f1_t, cfg)?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DerivativeRow {
    pub dt: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DerivativeReport {
    pub time: f64,
    /// `true` when the step reaches below zero and a forward difference is used.
    pub one_sided: bool,
    pub rows: Vec<DerivativeRow>,
    /// `residual(dt) / residual(dt/2)`; about 4 for central differences, 2 for one-sided.
    pub ratio: f64,
}

/// Finite-difference derivative of the kinetic solution at `t`, at steps
/// `dt` and `dt/2`, against the kinetic-equation right-hand side.
pub fn derivative_consistency(m: &ModelSpec, t: f64, f1_init: &ManyBodyOperator, cfg: &SeriesConfig) -> Result<DerivativeReport> {
    cfg.validate()?;
    let f1_t = kinetic_solution(m, t, f1_init, cfg)?;
    let rhs = kinetic_rhs(m, t, &f1_t, cfg)?;
    let one_sided = t < cfg.dt;
    let mut rows = Vec::new();
    for h in [cfg.dt, cfg.dt / 2.0] {
        let deriv = if one_sided {
            let ahead = kinetic_solution(m, t + h, f1_init, cfg)?;
            (&ahead - &f1_t).scale_real(1.0 / h)
        } else {
            let ahead = kinetic_solution(m, t + h, f1_init, cfg)?;
            let behind = kinetic_solution(m, t - h, f1_init, cfg)?;
            (&ahead - &behind).scale_real(0.5 / h)
        };
        rows.push(DerivativeRow {
            dt: h,
            residual: (&deriv - &rhs).trace_norm(),
        });
    }
    let ratio = rows[0].residual / rows[1].residual;
    Ok(DerivativeReport {
        time: t,
        one_sided,
        rows,
        ratio,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct InversionReport {
    pub solution: ManyBodyOperator,
    pub iterations: usize,
    /// `‖f^(k) - f^(k-1)‖_1` for `k = 1, 2, ...`.
    pub increments: Vec<f64>,
    /// `f^(1), f^(2), ...`.
    pub iterates: Vec<ManyBodyOperator>,
}

impl InversionReport {
    /// Ratios of consecutive increments.
    pub fn increment_ratios(&self) -> Vec<f64> {
        self.increments.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

/// Recovers `F_1^0` from `F_1(t)` by successive approximations of
/// `A(f) = G_1(t) F_1(t) - Σ_{n>=1} 1/n! Tr G_1(t) A_{1+n}(t) Π f`.
pub fn invert_initial_data(
    m: &ModelSpec,
    t: f64,
    f1_t: &ManyBodyOperator,
    ccfg: &ContractionConfig,
    cfg: &SeriesConfig,
) -> Result<InversionReport> {
    ccfg.validate()?;
    check_one_particle(m, f1_t, "f1_t")?;
    let norm = f1_t.trace_norm();
    if norm >= ccfg.threshold {
        warn!("invert_initial_data: trace norm {norm:.6e} >= {:.5}, contraction is not guaranteed", ccfg.threshold);
    }
    let quiet = SeriesConfig {
        norm_guard: false,
        ..cfg.clone()
    };
    let ev = m.evolution(t);
    let f0 = ev.group_inverse(&[1], f1_t);
    let mut f = f0.clone();
    let mut increments = Vec::new();
    let mut iterates = Vec::new();
    for k in 1..=ccfg.max_iters {
        let terms = bbgky_terms(m, 1, t, &f, &quiet)?;
        let mut tail = ManyBodyOperator::zeros(m.dim(), 1);
        for term in &terms[1..] {
            tail += term;
        }
        let next = &f0 - &ev.group_inverse(&[1], &tail);
        let inc = (&next - &f).trace_norm();
        increments.push(inc);
        f = next.hermitian_part();
        iterates.push(f.clone());
        if inc < ccfg.fixed_point_tol {
            return Ok(InversionReport {
                solution: f,
                iterations: k,
                increments,
                iterates,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: ccfg.max_iters,
        last_increment: *increments.last().unwrap_or(&f64::NAN),
    })
}

/// Max-abs residual of the identity expressing `Π_{i<=s+n} F_1(t, i)` through
/// cumulants acting on products of initial data.
///
/// The left side uses the kinetic solution at order `cfg.n_max`. The right
/// side keeps dissection blocks of size at most `cfg.n_max` and at most
/// `inner_order` traced particles, so it matches the left side exactly once
/// `inner_order >= (s + n) * n_max`.
pub fn product_identity_residual(
    m: &ModelSpec,
    s: usize,
    n: usize,
    t: f64,
    f1_init: &ManyBodyOperator,
    cfg: &SeriesConfig,
    inner_order: usize,
) -> Result<f64> {
    check_one_particle(m, f1_init, "initial.f1")?;
    let k = s + n;
    if k == 0 {
        return Err(Error::invalid("s", "s + n must be positive"));
    }
    check_size(k + inner_order.min(k * cfg.n_max))?;
    let f1_t = kinetic_solution(m, t, f1_init, cfg)?;
    let lhs = f1_t.tensor_power(k)?;
    let ev = m.evolution(t);

    let mut terms: Vec<(usize, Vec<usize>, Vec<usize>)> = Vec::new();
    for n1 in 0..=inner_order.min(k * cfg.n_max) {
        if n1 == 0 {
            terms.push((0, vec![], vec![]));
            continue;
        }
        for d in dissections_bounded(n1, k)? {
            if d.sizes().iter().any(|&x| x > cfg.n_max) {
                continue;
            }
            for heads in increasing_tuples(d.part_count(), k) {
                terms.push((n1, d.sizes().to_vec(), heads));
            }
        }
    }
    let values: Vec<ManyBodyOperator> = terms
        .par_iter()
        .map(|(n1, sizes, heads)| {
            let total = k + n1;
            let mut g = f1_init.tensor_power(total).expect("size checked");
            let mut next = k + 1;
            let mut weight = 1.0;
            for (&size, &head) in sizes.iter().zip(heads) {
                let block: Vec<usize> = (next..next + size).collect();
                next += size;
                weight /= factorial(size);
                g = reduced_group_cumulant_on(&ev, &[head], &block, &g);
            }
            let unpaired: Vec<usize> = (1..=k).filter(|l| !heads.contains(l)).collect();
            g = ev.free(&unpaired, &g);
            trace_tail(g, k).scale_real(weight)
        })
        .collect();
    let rhs = sum_terms(m.dim(), k, values);
    Ok(lhs.max_abs_diff(&rhs))
}

fn increasing_tuples(len: usize, m: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, len: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for l in start..=m {
            cur.push(l);
            rec(l + 1, len, m, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(1, len, m, &mut Vec::new(), &mut out);
    out
}

/// `Tr(a F_s)` for `s = 1`, `(1/s!) Tr(a F_s)` for `s >= 2`.
pub fn observable_average(a: &ManyBodyOperator, state: &ManyBodyOperator) -> Result<f64> {
    if !a.same_shape(state) {
        return Err(Error::DimensionMismatch(format!(
            "observable on {} particles of dimension {}, state on {} of dimension {}",
            a.particle_count(),
            a.dim(),
            state.particle_count(),
            state.dim()
        )));
    }
    a.require_hermitian("observable")?;
    let value = a.compose(state)?.trace() / factorial(state.particle_count());
    real_part(value)
}

fn real_part(value: C64) -> Result<f64> {
    if value.im.abs() > 1e-12 * value.re.abs().max(1.0) {
        return Err(Error::NonRealExpectation(value.im));
    }
    Ok(value.re)
}

/// Dispersion of the additive observable with one-particle part `a`:
/// `Tr_1 (a^2 - <A>^2) F_1 + Tr_{1,2} a(1) a(2) G_2`.
pub fn dispersion(a: &ManyBodyOperator, f1: &ManyBodyOperator, g2: &ManyBodyOperator) -> Result<f64> {
    let mean = observable_average(a, f1)?;
    let a2 = a.compose(a)?;
    let one = real_part(a2.compose(f1)?.trace())? - mean * mean * real_part(f1.trace())?;
    let aa = a.tensor(a)?;
    if !aa.same_shape(g2) {
        return Err(Error::DimensionMismatch("g2 must be a two-particle operator".into()));
    }
    let two = real_part(aa.compose(g2)?.trace())?;
    Ok(one + two)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivalenceRow {
    pub n_max: usize,
    pub residual: f64,
}

/// `‖F_s(t) - F_s(t | F_1(t))‖_1` for each truncation order, each series
/// truncated at that order.
pub fn equivalence_report(
    m: &ModelSpec,
    s: usize,
    t: f64,
    f1_init: &ManyBodyOperator,
    n_max_list: &[usize],
    cfg: &SeriesConfig,
) -> Result<Vec<EquivalenceRow>> {
    n_max_list
        .iter()
        .map(|&n_max| {
            let c = cfg.with_order(n_max);
            let direct = bbgky_marginal(m, s, t, f1_init, &c)?;
            let f1_t = kinetic_solution(m, t, f1_init, &c)?;
            let via = marginal_functional(m, s, t, &f1_t, &c)?;
            Ok(EquivalenceRow {
                n_max,
                residual: (&direct - &via).trace_norm(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{random_density, random_hermitian, random_model, rng};

    #[test]
    fn contraction_radius_value() {
        let x = contraction_radius();
        assert!((x - 0.18742).abs() < 1e-5);
        assert!(((2.0 * x).exp() * (2.0 * x + 1.0) - 2.0).abs() < 1e-14);
        assert!(x > functional_radius());
    }

    #[test]
    fn bbgky_initial_time_and_free_case() {
        let mut g = rng(40);
        let m = random_model(&mut g, 2, 0.5);
        let f = random_density(&mut g, 2, 0.1);
        let cfg = SeriesConfig::default();
        let f2 = bbgky_marginal(&m, 2, 0.0, &f, &cfg).unwrap();
        assert!(f2.max_abs_diff(&f.tensor(&f).unwrap()) < 1e-14);

        let free = m.with_coupling(0.0).unwrap();
        let f2 = bbgky_marginal(&free, 2, 0.7, &f, &cfg).unwrap();
        let ev = free.evolution(0.7);
        let oracle = ev.free(&[1, 2], &f.tensor(&f).unwrap());
        assert!(f2.max_abs_diff(&oracle) < 1e-13);
    }

    #[test]
    fn kinetic_trace_conserved_at_every_order() {
        let mut g = rng(41);
        let m = random_model(&mut g, 2, 0.8);
        let f = random_density(&mut g, 2, 0.1);
        for n_max in 0..=4 {
            let k = kinetic_solution(&m, 0.6, &f, &SeriesConfig::default().with_order(n_max)).unwrap();
            assert!((k.trace() - f.trace()).norm() < 1e-12);
            assert!(k.hermiticity_defect() < 1e-11);
        }
    }

    #[test]
    fn functionals_at_zero_coupling() {
        let mut g = rng(42);
        let m = random_model(&mut g, 2, 0.0);
        let f = random_density(&mut g, 2, 0.1);
        let cfg = SeriesConfig::default().with_order(2);
        let f2 = marginal_functional(&m, 2, 0.5, &f, &cfg).unwrap();
        assert!(f2.max_abs_diff(&f.tensor(&f).unwrap()) < 1e-13);
        let g2 = correlation_functional(&m, 2, 0.5, &f, &cfg).unwrap();
        assert!(g2.max_abs() < 1e-13);
        assert!(collision_integral(&m, 0.5, &f, &cfg).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn correlation_leading_term() {
        let mut g = rng(43);
        let m = random_model(&mut g, 2, 0.7);
        let f = random_density(&mut g, 2, 0.1);
        let cfg = SeriesConfig::default().with_order(0);
        let g2 = correlation_functional(&m, 2, 0.4, &f, &cfg).unwrap();
        let ff = f.tensor(&f).unwrap();
        let oracle = &m.scattering_operator(0.4, &ff).unwrap() - &ff;
        assert!(g2.max_abs_diff(&oracle) < 1e-14);
    }

    #[test]
    fn correlations_from_product_marginals_vanish() {
        let mut g = rng(44);
        let f = random_density(&mut g, 2, 0.3);
        let state = MarginalState {
            marginals: (1..=3).map(|s| f.tensor_power(s).unwrap()).collect(),
        };
        assert!(correlation_from_marginals(&state, 1).unwrap().max_abs_diff(&f) < 1e-15);
        assert!(correlation_from_marginals(&state, 2).unwrap().max_abs() < 1e-15);
        assert!(correlation_from_marginals(&state, 3).unwrap().max_abs() < 1e-15);
        assert_eq!(
            correlation_from_marginals(&MarginalState { marginals: vec![f] }, 2),
            Err(Error::MissingMarginal(2))
        );
    }

    #[test]
    fn collision_at_initial_time() {
        let mut g = rng(45);
        let m = random_model(&mut g, 2, 0.5);
        let f = random_density(&mut g, 2, 0.1);
        let got = collision_integral(&m, 0.0, &f, &SeriesConfig::default()).unwrap();
        let ff = f.tensor(&f).unwrap();
        let oracle = m.interaction_liouvillian(1, 2, &ff).unwrap().scale_real(-1.0).partial_trace(&[2]).unwrap();
        assert!(got.max_abs_diff(&oracle) < 1e-14);
        assert!(got.trace().norm() < 1e-12);
    }

    #[test]
    fn inversion_cases() {
        let mut g = rng(46);
        let m = random_model(&mut g, 2, 0.5);
        let f = random_density(&mut g, 2, 0.1);
        let cfg = SeriesConfig::default();
        let ccfg = ContractionConfig::default();
        let r = invert_initial_data(&m, 0.0, &f, &ccfg, &cfg).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.solution.max_abs_diff(&f) < 1e-14);

        let k = kinetic_solution(&m, 0.4, &f, &cfg).unwrap();
        let r = invert_initial_data(&m, 0.4, &k, &ccfg, &cfg).unwrap();
        assert!((&r.solution - &f).trace_norm() < 1e-10);

        let tight = ContractionConfig { max_iters: 1, ..ccfg };
        assert!(matches!(
            invert_initial_data(&m, 0.4, &k, &tight, &cfg),
            Err(Error::NoConvergence { iterations: 1, .. })
        ));
    }

    #[test]
    fn product_identity_exact_at_full_inner_order() {
        let mut g = rng(47);
        let m = random_model(&mut g, 2, 0.6);
        let f = random_density(&mut g, 2, 0.1);
        let cfg = SeriesConfig::default().with_order(2);
        assert!(product_identity_residual(&m, 1, 0, 0.0, &f, &cfg, 0).unwrap() < 1e-15);
        let r: Vec<f64> = (0..=4)
            .map(|k| product_identity_residual(&m, 1, 1, 0.5, &f, &cfg, k).unwrap())
            .collect();
        assert!(r[4] < 1e-14, "{r:?}");
        assert!(r.windows(2).all(|w| w[1] < w[0]), "{r:?}");
    }

    #[test]
    fn observables() {
        let d = ManyBodyOperator::from_diagonal(2, 1, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]).unwrap();
        let f = ManyBodyOperator::from_diagonal(2, 1, &[C64::new(0.3, 0.0), C64::new(0.7, 0.0)]).unwrap();
        assert!((observable_average(&d, &f).unwrap() - 0.3).abs() < 1e-15);
        let mut g = rng(48);
        let a2 = random_hermitian(&mut g, 2, 2);
        let f2 = f.tensor(&f).unwrap();
        let full = a2.compose(&f2).unwrap().trace().re;
        assert!((observable_average(&a2, &f2).unwrap() - full / 2.0).abs() < 1e-14);
        assert!(observable_average(&d, &f2).is_err());

        let zero = ManyBodyOperator::zeros(2, 2);
        let var = dispersion(&d, &f, &zero).unwrap();
        assert!((var - (0.3 - 0.09)).abs() < 1e-15);
    }

    #[test]
    fn equivalence_trivial_rows() {
        let mut g = rng(49);
        let m = random_model(&mut g, 2, 0.5);
        let f = random_density(&mut g, 2, 0.1);
        let cfg = SeriesConfig::default();
        for row in equivalence_report(&m, 2, 0.0, &f, &[1, 2], &cfg).unwrap() {
            assert!(row.residual < 1e-12);
        }
        let free = m.with_coupling(0.0).unwrap();
        for row in equivalence_report(&free, 2, 0.3, &f, &[1, 2], &cfg).unwrap() {
            assert!(row.residual < 1e-12);
        }
    }
}
