//! Mean-field diagnostics: the iterated Vlasov series and ε-sweeps of the
//! scaled kinetic solution, the marginal functionals and the evolution
//! operators.
//!
//! In a sweep the model runs at coupling `ε · c`, with `c` the coupling of
//! the base model, from initial data `f / ε`; the Vlasov limit uses the base
//! model unchanged.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cumulants::{v_direct, ClusterArgument, ClusterMode};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::operator::{ManyBodyOperator, MAX_PARTICLES};
use crate::quadrature::GaussRule;
use crate::solvers::{correlation_functional, functional_radius, kinetic_solution, marginal_functional, SeriesConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub epsilons: Vec<f64>,
    pub time: f64,
    pub vlasov_order: usize,
    pub quadrature_nodes: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            epsilons: vec![0.4, 0.2, 0.1, 0.05],
            time: 0.25,
            vlasov_order: 4,
            quadrature_nodes: 6,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() {
            return Err(Error::invalid("sweep.epsilons", "must be nonempty"));
        }
        if self.epsilons.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::invalid("sweep.epsilons", "must be positive"));
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::invalid("sweep.epsilons", "must be strictly decreasing"));
        }
        if !self.time.is_finite() {
            return Err(Error::invalid("sweep.time", "must be finite"));
        }
        if self.quadrature_nodes < 2 {
            return Err(Error::invalid("sweep.quadrature_nodes", "must be at least 2"));
        }
        if self.vlasov_order + 1 > MAX_PARTICLES {
            return Err(Error::SizeCap {
                size: self.vlasov_order + 1,
                cap: MAX_PARTICLES - 1,
            });
        }
        Ok(())
    }
}

fn check_one_particle(m: &ModelSpec, f: &ManyBodyOperator) -> Result<()> {
    m.check_dim(f)?;
    if f.particle_count() != 1 {
        return Err(Error::DimensionMismatch("expected a one-particle operator".into()));
    }
    f.require_hermitian("initial.f1")
}

/// `-N_1 f + Tr_2 (-N_int(1,2)) f ⊗ f`.
pub fn vlasov_rhs(m: &ModelSpec, f1: &ManyBodyOperator) -> Result<ManyBodyOperator> {
    check_one_particle(m, f1)?;
    let free = m.liouvillian(f1)?.scale_real(-1.0);
    let pair = m.interaction_liouvillian(1, 2, &f1.tensor(f1)?)?.scale_real(-1.0);
    Ok(&free + &pair.partial_trace(&[2])?)
}

/// Terms `n = 0..=order` of the iterated Vlasov series.
///
/// Term `n` is the time-ordered `n`-fold integral evaluated level by level:
/// `Ψ_n(σ) = U_{n+1}(σ) f^{⊗(n+1)}` and
/// `Ψ_{k-1}(σ) = ∫_0^σ dτ U_k(σ - τ) Σ_{i<=k} (-N_int(i, k+1)) Ψ_k(τ)`,
/// where `U_k` is the free flow of the first `k` particles. Particles beyond
/// `k` are traced at the end, which commutes with their free flow.
pub fn vlasov_terms(m: &ModelSpec, t: f64, f1_init: &ManyBodyOperator, order: usize, nodes: usize) -> Result<Vec<ManyBodyOperator>> {
    check_one_particle(m, f1_init)?;
    if order + 1 > MAX_PARTICLES {
        return Err(Error::SizeCap {
            size: order + 1,
            cap: MAX_PARTICLES,
        });
    }
    let rule = GaussRule::new(nodes)?;
    (0..=order)
        .into_par_iter()
        .map(|n| {
            let product = f1_init.tensor_power(n + 1)?;
            let psi = level(m, &rule, &product, n, 0, t);
            Ok(if n == 0 { psi } else { psi.trace_out_from(2)? })
        })
        .collect()
}

fn level(m: &ModelSpec, rule: &GaussRule, product: &ManyBodyOperator, n: usize, k: usize, sigma: f64) -> ManyBodyOperator {
    let labels: Vec<usize> = (1..=k + 1).collect();
    if k == n {
        return m.evolution(sigma).free(&labels, product);
    }
    let mut acc = ManyBodyOperator::zeros(product.dim(), product.particle_count());
    if sigma == 0.0 {
        return acc;
    }
    let node = |&(tau, w): &(f64, f64)| {
        let inner = level(m, rule, product, n, k + 1, tau);
        let mut kicked = ManyBodyOperator::zeros(inner.dim(), inner.particle_count());
        for i in 1..=k + 1 {
            kicked -= &m.interaction_liouvillian(i, k + 2, &inner).expect("labels in range");
        }
        m.evolution(sigma - tau).free(&labels, &kicked).scale_real(w)
    };
    let pairs = rule.on_interval(0.0, sigma);
    let values: Vec<ManyBodyOperator> = if k == 0 {
        pairs.par_iter().map(node).collect()
    } else {
        pairs.iter().map(node).collect()
    };
    for v in &values {
        acc += v;
    }
    acc
}

pub fn vlasov_series(m: &ModelSpec, t: f64, f1_init: &ManyBodyOperator, order: usize, nodes: usize) -> Result<ManyBodyOperator> {
    let terms = vlasov_terms(m, t, f1_init, order, nodes)?;
    let mut acc = ManyBodyOperator::zeros(f1_init.dim(), 1);
    for term in &terms {
        acc += term;
    }
    Ok(acc)
}

/// Trace norm of the central-difference derivative of the Vlasov series minus
/// [`vlasov_rhs`] at `t`.
pub fn vlasov_defect(m: &ModelSpec, t: f64, f1_init: &ManyBodyOperator, order: usize, nodes: usize, dt: f64) -> Result<f64> {
    let ahead = vlasov_series(m, t + dt, f1_init, order, nodes)?;
    let behind = vlasov_series(m, t - dt, f1_init, order, nodes)?;
    let deriv = (&ahead - &behind).scale_real(0.5 / dt);
    let rhs = vlasov_rhs(m, &vlasov_series(m, t, f1_init, order, nodes)?)?;
    Ok((&deriv - &rhs).trace_norm())
}

fn scaled_model(m_base: &ModelSpec, eps: f64) -> Result<ModelSpec> {
    m_base.with_coupling(eps * m_base.coupling())
}

fn guard_sweep(sweep: &SweepSpec, f: &ManyBodyOperator, cfg: &SeriesConfig) -> SeriesConfig {
    if cfg.norm_guard {
        let norm = f.trace_norm() / sweep.epsilons[0];
        if norm >= functional_radius() {
            warn!("sweep: initial trace norm {norm:.6e} at the largest coupling is >= e^-2");
        }
    }
    SeriesConfig {
        norm_guard: false,
        ..cfg.clone()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeanFieldRow {
    pub epsilon: f64,
    pub delta: f64,
    /// `delta` at the previous (larger) ε divided by `delta` here.
    pub ratio: Option<f64>,
}

/// `δ(ε) = ‖ε F_1(t) - f_1(t)‖_1` with `F_1` the kinetic solution at
/// coupling ε from `f / ε` and `f_1` the Vlasov series.
pub fn meanfield_sweep(
    m_base: &ModelSpec,
    sweep: &SweepSpec,
    f1_limit_init: &ManyBodyOperator,
    cfg: &SeriesConfig,
) -> Result<Vec<MeanFieldRow>> {
    sweep.validate()?;
    check_one_particle(m_base, f1_limit_init)?;
    let quiet = guard_sweep(sweep, f1_limit_init, cfg);
    let t = sweep.time;
    let limit = vlasov_series(m_base, t, f1_limit_init, sweep.vlasov_order, sweep.quadrature_nodes)?;
    let deltas: Vec<f64> = sweep
        .epsilons
        .par_iter()
        .map(|&eps| {
            let m = scaled_model(m_base, eps)?;
            let k = kinetic_solution(&m, t, &f1_limit_init.scale_real(1.0 / eps), &quiet)?;
            Ok((&k.scale_real(eps) - &limit).trace_norm())
        })
        .collect::<Result<_>>()?;
    Ok(with_ratios(&sweep.epsilons, &deltas)
        .into_iter()
        .map(|(epsilon, delta, ratio)| MeanFieldRow { epsilon, delta, ratio })
        .collect())
}

fn with_ratios(eps: &[f64], values: &[f64]) -> Vec<(f64, f64, Option<f64>)> {
    eps.iter()
        .zip(values)
        .enumerate()
        .map(|(i, (&e, &v))| (e, v, (i > 0).then(|| values[i - 1] / v)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChaosRow {
    pub epsilon: f64,
    /// `‖ε^s F_s(t | F_1(t)) - Π f_1(t)‖_1`.
    pub marginal_defect: f64,
    /// `‖ε^s G_s(t | F_1(t))‖_1`.
    pub correlation_norm: f64,
}

pub fn chaos_check(
    m_base: &ModelSpec,
    sweep: &SweepSpec,
    f1_limit_init: &ManyBodyOperator,
    s: usize,
    cfg: &SeriesConfig,
) -> Result<Vec<ChaosRow>> {
    sweep.validate()?;
    check_one_particle(m_base, f1_limit_init)?;
    if s == 0 {
        return Err(Error::invalid("s", "must be at least 1"));
    }
    let quiet = guard_sweep(sweep, f1_limit_init, cfg);
    let t = sweep.time;
    let limit = vlasov_series(m_base, t, f1_limit_init, sweep.vlasov_order, sweep.quadrature_nodes)?;
    let chaos = limit.tensor_power(s)?;
    sweep
        .epsilons
        .par_iter()
        .map(|&eps| {
            let m = scaled_model(m_base, eps)?;
            let f1_t = kinetic_solution(&m, t, &f1_limit_init.scale_real(1.0 / eps), &quiet)?;
            let scale = eps.powi(s as i32);
            let fs = marginal_functional(&m, s, t, &f1_t, &quiet)?.scale_real(scale);
            let gs = correlation_functional(&m, s, t, &f1_t, &quiet)?.scale_real(scale);
            Ok(ChaosRow {
                epsilon: eps,
                marginal_defect: (&fs - &chaos).trace_norm(),
                correlation_norm: gs.trace_norm(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VanishingRow {
    pub epsilon: f64,
    /// `‖V_{1+n}(t) f‖_1 / ε^n` at coupling ε.
    pub scaled_norm: f64,
}

/// `‖Tr_{s+1..s+n} V_{1+n}(t, {1..s}, s+1, ..., s+n) f^{⊗(s+n)}‖_1 / ε^n`
/// over the sweep, for a one-particle `f`.
///
/// The trace over the added particles is part of the measured quantity: the
/// binomial form of the cumulants agrees with the full cumulant only under
/// it. For `s = 1` the traced operators vanish identically.
pub fn v_vanishing(m_base: &ModelSpec, sweep: &SweepSpec, s: usize, n: usize, f: &ManyBodyOperator) -> Result<Vec<VanishingRow>> {
    sweep.validate()?;
    check_one_particle(m_base, f)?;
    let arg = ClusterArgument::new(s, n)?;
    if s + n > MAX_PARTICLES {
        return Err(Error::SizeCap {
            size: s + n,
            cap: MAX_PARTICLES,
        });
    }
    let product = f.tensor_power(s + n)?;
    sweep
        .epsilons
        .par_iter()
        .map(|&eps| {
            let m = scaled_model(m_base, eps)?;
            let ev = m.evolution(sweep.time);
            let v = v_direct(&ev, arg, ClusterMode::Clustered, &product);
            let v = if n == 0 { v } else { v.trace_out_from(s + 1)? };
            Ok(VanishingRow {
                epsilon: eps,
                scaled_norm: v.trace_norm() / eps.powi(n as i32),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{random_density, random_model, rng};

    #[test]
    fn rhs_cases() {
        let mut g = rng(60);
        let m = random_model(&mut g, 2, 1.0);
        let f = random_density(&mut g, 2, 0.3);
        let r = vlasov_rhs(&m, &f).unwrap();
        assert!(r.trace().norm() < 1e-14);

        // dense oracle: -(i)[h, f] - i Tr_2 [Φ, f ⊗ f]
        let i = crate::operator::C64::new(0.0, 1.0);
        let h = m.one_body();
        let free = (h * f.matrix() - f.matrix() * h) * (-i);
        let ff = f.tensor(&f).unwrap();
        let phi = m.scaled_pair_potential();
        let comm = (&phi * ff.matrix() - ff.matrix() * &phi) * (-i);
        let pair = ManyBodyOperator::new(2, 2, comm).unwrap().partial_trace(&[2]).unwrap();
        let oracle = &ManyBodyOperator::one_particle(free).unwrap() + &pair;
        assert!(r.max_abs_diff(&oracle) < 1e-14);

        let free_model = m.with_coupling(0.0).unwrap();
        let r0 = vlasov_rhs(&free_model, &f).unwrap();
        assert!(r0.max_abs_diff(&m.liouvillian(&f).unwrap().scale_real(-1.0)) < 1e-15);
    }

    #[test]
    fn series_low_orders() {
        let mut g = rng(61);
        let m = random_model(&mut g, 2, 1.0);
        let f = random_density(&mut g, 2, 0.2);
        let free = m.evolution(0.4).free(&[1], &f);
        assert!(vlasov_series(&m, 0.4, &f, 0, 4).unwrap().max_abs_diff(&free) < 1e-15);
        let m0 = m.with_coupling(0.0).unwrap();
        assert!(vlasov_series(&m0, 0.4, &f, 3, 4).unwrap().max_abs_diff(&free) < 1e-15);
        for order in 0..=3 {
            let v = vlasov_series(&m, 0.4, &f, order, 6).unwrap();
            assert!((v.trace() - f.trace()).norm() < 1e-11);
        }
    }

    #[test]
    fn series_satisfies_vlasov_equation() {
        let mut g = rng(62);
        let m = random_model(&mut g, 2, 1.0);
        let f = random_density(&mut g, 2, 0.2);
        let d: Vec<f64> = (1..=4).map(|o| vlasov_defect(&m, 0.3, &f, o, 8, 1e-3).unwrap()).collect();
        assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
    }

    #[test]
    fn sweep_rejects_bad_epsilons() {
        let bad = SweepSpec {
            epsilons: vec![0.1, 0.2],
            ..SweepSpec::default()
        };
        assert!(bad.validate().is_err());
        assert!(SweepSpec::default().validate().is_ok());
    }
}
