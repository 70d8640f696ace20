//! Cumulants of the evolution groups and of the scattering operators, and the
//! evolution operators `V_{1+n}` that generate the marginal functionals.
//!
//! All superoperators here act on an operator `f` whose particle labels are
//! laid out as `(1..=s)` for the cluster followed by `s+1..=s+n`; `f` may carry
//! further trailing particles, on which every superoperator acts as the
//! identity.
//!
//! Composition is right to left: in a product `A · B_k ⋯ B_1`, `B_1` is
//! applied first.

use rayon::prelude::*;

use crate::combinatorics::{
    binomial, bounded_compositions, dissections_bounded, factorial, injective_tuples, partitions,
    ClusterElement,
};
use crate::error::{Error, Result};
use crate::model::{Evolution, ModelSpec};
use crate::operator::ManyBodyOperator;

/// The argument pattern `({Y}, s+1, ..., s+n)`: a cluster of `s` particles
/// treated as one element, followed by `n` single particles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ClusterArgument {
    pub cluster_size: usize,
    pub extra: usize,
}

impl ClusterArgument {
    pub fn new(cluster_size: usize, extra: usize) -> Result<Self> {
        if cluster_size == 0 {
            return Err(Error::invalid("cluster_size", "must be at least 1"));
        }
        Ok(Self { cluster_size, extra })
    }

    pub fn total(&self) -> usize {
        self.cluster_size + self.extra
    }

    fn cluster_labels(&self) -> Vec<usize> {
        (1..=self.cluster_size).collect()
    }

    fn extra_labels(&self) -> Vec<usize> {
        (self.cluster_size + 1..=self.total()).collect()
    }

    fn check(&self, f: &ManyBodyOperator) -> Result<()> {
        if f.particle_count() < self.total() {
            return Err(Error::DimensionMismatch(format!(
                "operator on {} particles, cumulant argument needs {}",
                f.particle_count(),
                self.total()
            )));
        }
        Ok(())
    }
}

/// How the cluster `{Y}` enters the leading cumulant of `V_{1+n}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ClusterMode {
    /// `{Y}` is a single element; reduced (binomial) cumulant.
    Clustered,
    /// `θ({Y}) = Y`: the cluster labels are separate elements; full
    /// partition cumulant over all `s + n` particles.
    Declustered,
}

fn sign(k: usize) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn partition_weight(blocks: usize) -> f64 {
    sign(blocks - 1) * factorial(blocks - 1)
}

/// Alternating partition sum over `({Y}, s+1, ..., s+n)` of products of
/// groups `G_{|X|}(-t)` acting jointly on each block.
pub fn partition_cumulant(
    model: &ModelSpec,
    t: f64,
    arg: ClusterArgument,
    f: &ManyBodyOperator,
) -> Result<ManyBodyOperator> {
    model.check_dim(f)?;
    arg.check(f)?;
    let ev = model.evolution(t);
    let ground = cluster_ground(arg);
    partition_sum(&ground, f, |labels, g| ev.group(labels, g))
}

/// Binomial form `Σ_k (-1)^k C(n,k) G_{s+n-k}(-t)` with `G_{s+n-k}` acting on
/// the first `s + n - k` labels.
pub fn reduced_cumulant(
    model: &ModelSpec,
    t: f64,
    arg: ClusterArgument,
    f: &ManyBodyOperator,
) -> Result<ManyBodyOperator> {
    model.check_dim(f)?;
    arg.check(f)?;
    let ev = model.evolution(t);
    Ok(reduced_group_cumulant_on(&ev, &arg.cluster_labels(), &arg.extra_labels(), f))
}

/// Binomial cumulant of the scattering operators `Ĝ`.
pub fn reduced_scattering_cumulant(
    model: &ModelSpec,
    t: f64,
    arg: ClusterArgument,
    f: &ManyBodyOperator,
) -> Result<ManyBodyOperator> {
    model.check_dim(f)?;
    arg.check(f)?;
    let ev = model.evolution(t);
    Ok(reduced_scattering_cumulant_on(&ev, &arg.cluster_labels(), &arg.extra_labels(), f))
}

/// `V_{1+n}` by the closed nested-sum formula.
pub fn v_operator_direct(
    model: &ModelSpec,
    t: f64,
    arg: ClusterArgument,
    f: &ManyBodyOperator,
) -> Result<ManyBodyOperator> {
    model.check_dim(f)?;
    arg.check(f)?;
    let ev = model.evolution(t);
    Ok(v_direct(&ev, arg, ClusterMode::Clustered, f))
}

/// `V_{1+n}` by solving the kinetic cluster expansion recursively for the
/// highest order.
pub fn v_operator_recursive(
    model: &ModelSpec,
    t: f64,
    arg: ClusterArgument,
    f: &ManyBodyOperator,
) -> Result<ManyBodyOperator> {
    model.check_dim(f)?;
    arg.check(f)?;
    let ev = model.evolution(t);
    Ok(v_recursive(&ev, arg, ClusterMode::Clustered, f))
}

/// `V_{1+n}(t, θ({Y}), s+1, ..., s+n)`: the closed formula with the cluster
/// labels treated as separate elements.
pub fn v_operator_declustered(
    model: &ModelSpec,
    t: f64,
    arg: ClusterArgument,
    f: &ManyBodyOperator,
) -> Result<ManyBodyOperator> {
    model.check_dim(f)?;
    arg.check(f)?;
    if arg.total() > crate::combinatorics::MAX_PARTITION_ELEMENTS {
        return Err(Error::SizeCap {
            size: arg.total(),
            cap: crate::combinatorics::MAX_PARTITION_ELEMENTS,
        });
    }
    let ev = model.evolution(t);
    Ok(v_direct(&ev, arg, ClusterMode::Declustered, f))
}

pub(crate) fn cluster_ground(arg: ClusterArgument) -> Vec<ClusterElement> {
    let mut ground = vec![ClusterElement::Cluster(arg.cluster_labels())];
    ground.extend(arg.extra_labels().into_iter().map(ClusterElement::Single));
    ground
}

fn partition_sum<F>(ground: &[ClusterElement], f: &ManyBodyOperator, apply: F) -> Result<ManyBodyOperator>
where
    F: Fn(&[usize], &ManyBodyOperator) -> ManyBodyOperator,
{
    let mut acc = ManyBodyOperator::zeros(f.dim(), f.particle_count());
    for p in partitions(ground)? {
        let mut g = f.clone();
        for labels in p.block_labels(ground) {
            g = apply(&labels, &g);
        }
        acc.axpy(partition_weight(p.len()), &g);
    }
    Ok(acc)
}

/// Binomial cumulant of the groups with head labels `head` and extras.
pub(crate) fn reduced_group_cumulant_on(
    ev: &Evolution,
    head: &[usize],
    extras: &[usize],
    f: &ManyBodyOperator,
) -> ManyBodyOperator {
    binomial_sum(head, extras, f, |labels, g| ev.group(labels, g))
}

pub(crate) fn reduced_scattering_cumulant_on(
    ev: &Evolution,
    head: &[usize],
    extras: &[usize],
    f: &ManyBodyOperator,
) -> ManyBodyOperator {
    binomial_sum(head, extras, f, |labels, g| ev.scattering(labels, g))
}

fn binomial_sum<F>(head: &[usize], extras: &[usize], f: &ManyBodyOperator, apply: F) -> ManyBodyOperator
where
    F: Fn(&[usize], &ManyBodyOperator) -> ManyBodyOperator,
{
    let n = extras.len();
    let mut acc = ManyBodyOperator::zeros(f.dim(), f.particle_count());
    let mut labels = head.to_vec();
    labels.extend_from_slice(extras);
    for k in 0..=n {
        let g = apply(&labels[..labels.len() - k], f);
        acc.axpy(sign(k) * binomial(n, k), &g);
    }
    acc
}

/// Leading cumulant `Â_{1+m}({Y}, s+1, ..., s+m)` of `V_{1+m}`.
fn leading_cumulant(ev: &Evolution, s: usize, m: usize, mode: ClusterMode, f: &ManyBodyOperator) -> ManyBodyOperator {
    let cluster: Vec<usize> = (1..=s).collect();
    let extras: Vec<usize> = (s + 1..=s + m).collect();
    match mode {
        ClusterMode::Clustered => reduced_scattering_cumulant_on(ev, &cluster, &extras, f),
        ClusterMode::Declustered => {
            let ground: Vec<ClusterElement> = (1..=s + m).map(ClusterElement::Single).collect();
            partition_sum(&ground, f, |labels, g| ev.scattering(labels, g))
                .expect("particle count bounded by the caller")
        }
    }
}

/// Kinetic cluster block sum over the ordered set `z`:
///
/// `Σ_{D: |D| <= bound} 1/|D|! Σ_{i_1 ≠ ... ≠ i_|D| ∈ 1..=bound} Π_l 1/|X_l|! Â_{1+|X_l|}(t, i_l, X_l)`
///
/// The `l`-th block of the dissection is paired with the `l`-th index.
pub(crate) fn block_sum(ev: &Evolution, z: &[usize], bound: usize, f: &ManyBodyOperator) -> ManyBodyOperator {
    let mut acc = ManyBodyOperator::zeros(f.dim(), f.particle_count());
    let ds = dissections_bounded(z.len(), bound).expect("dissected set within cap");
    for d in ds {
        let blocks = d.blocks(z);
        let weight = blocks.iter().fold(1.0 / factorial(blocks.len()), |w, b| w / factorial(b.len()));
        for tuple in injective_tuples(blocks.len(), bound) {
            let mut g = f.clone();
            for (block, &head) in blocks.iter().zip(&tuple) {
                g = reduced_scattering_cumulant_on(ev, &[head], block, &g);
            }
            acc.axpy(weight, &g);
        }
    }
    acc
}

/// Closed form: `V_{1+n} = n! Σ_k (-1)^k Σ_{n_1..n_k} 1/(n - Σn_j)! Â_{1+n-Σn_j} B_k ⋯ B_1`.
pub(crate) fn v_direct(ev: &Evolution, arg: ClusterArgument, mode: ClusterMode, f: &ManyBodyOperator) -> ManyBodyOperator {
    let (s, n) = (arg.cluster_size, arg.extra);
    let mut terms: Vec<(usize, Vec<usize>)> = Vec::new();
    for k in 0..=n {
        for comp in bounded_compositions(n, k) {
            terms.push((k, comp));
        }
    }
    let evaluated: Vec<ManyBodyOperator> = terms
        .par_iter()
        .map(|(k, comp)| {
            let used: usize = comp.iter().sum();
            let coef = sign(*k) * factorial(n) / factorial(n - used);
            let mut g = f.clone();
            let mut upper = s + n;
            for &nj in comp {
                let bound = upper - nj;
                let z: Vec<usize> = (bound + 1..=upper).collect();
                g = block_sum(ev, &z, bound, &g);
                upper = bound;
            }
            leading_cumulant(ev, s, n - used, mode, &g).scale_real(coef)
        })
        .collect();
    sum_in_order(f, evaluated)
}

/// `V_{1+n} = Â_{1+n} - Σ_{n_1=1}^{n} n!/(n-n_1)! V_{1+n-n_1} B(n_1)`.
pub(crate) fn v_recursive(ev: &Evolution, arg: ClusterArgument, mode: ClusterMode, f: &ManyBodyOperator) -> ManyBodyOperator {
    let (s, n) = (arg.cluster_size, arg.extra);
    let mut acc = leading_cumulant(ev, s, n, mode, f);
    for n1 in 1..=n {
        let bound = s + n - n1;
        let z: Vec<usize> = (bound + 1..=s + n).collect();
        let g = block_sum(ev, &z, bound, f);
        let lower = v_recursive(ev, ClusterArgument { cluster_size: s, extra: n - n1 }, mode, &g);
        acc.axpy(-factorial(n) / factorial(n - n1), &lower);
    }
    acc
}

fn sum_in_order(like: &ManyBodyOperator, terms: Vec<ManyBodyOperator>) -> ManyBodyOperator {
    let mut acc = ManyBodyOperator::zeros(like.dim(), like.particle_count());
    for t in &terms {
        acc += t;
    }
    acc
}

/// Max-abs difference between `Â_2(t, {Y}, s+1) f` and a Gauss–Legendre
/// quadrature of its Duhamel representation
///
/// `∫_0^t dτ G_s(-τ) G_1(-τ, s+1) Σ_{i ≤ s} (-N_int(i, s+1)) Ĝ_{s+1}(t-τ) Π_{i ≤ s+1} G_1(τ, i) f`.
pub fn duhamel_residual(model: &ModelSpec, t: f64, s: usize, f: &ManyBodyOperator, nodes: usize) -> Result<f64> {
    let arg = ClusterArgument::new(s, 1)?;
    model.check_dim(f)?;
    if f.particle_count() != s + 1 {
        return Err(Error::DimensionMismatch(format!(
            "Duhamel check needs an operator on {} particles",
            s + 1
        )));
    }
    let exact = reduced_scattering_cumulant(model, t, arg, f)?;
    let integral = duhamel_quadrature(model, t, s, f, nodes, |_, ev_rest, g| {
        let labels: Vec<usize> = (1..=s + 1).collect();
        let g = ev_rest.scattering(&labels, g);
        let mut out = ManyBodyOperator::zeros(g.dim(), g.particle_count());
        for i in 1..=s {
            out -= &model.interaction_liouvillian(i, s + 1, &g).expect("labels in range");
        }
        out
    })?;
    Ok(exact.max_abs_diff(&integral))
}

/// Max-abs difference between `V_2(t, {Y}, s+1) f` and the quadrature of its
/// second-order Duhamel form.
pub fn v2_duhamel_residual(model: &ModelSpec, t: f64, s: usize, f: &ManyBodyOperator, nodes: usize) -> Result<f64> {
    let arg = ClusterArgument::new(s, 1)?;
    model.check_dim(f)?;
    if f.particle_count() != s + 1 {
        return Err(Error::DimensionMismatch(format!(
            "Duhamel check needs an operator on {} particles",
            s + 1
        )));
    }
    let exact = v_operator_direct(model, t, arg, f)?;
    let integral = duhamel_quadrature(model, t, s, f, nodes, |_, ev_rest, g| {
        let all: Vec<usize> = (1..=s + 1).collect();
        let cluster: Vec<usize> = (1..=s).collect();
        let mut out = ManyBodyOperator::zeros(g.dim(), g.particle_count());
        let joint = ev_rest.scattering(&all, g);
        for i in 1..=s {
            out -= &model.interaction_liouvillian(i, s + 1, &joint).expect("labels in range");
        }
        for i in 1..=s {
            let pair = ev_rest.scattering(&[i, s + 1], g);
            let kicked = -model.interaction_liouvillian(i, s + 1, &pair).expect("labels in range");
            out -= &ev_rest.scattering(&cluster, &kicked);
        }
        out
    })?;
    Ok(exact.max_abs_diff(&integral))
}

/// `∫_0^t dτ G_s(-τ) G_1(-τ, s+1) K(τ) Π_{i ≤ s+1} G_1(τ, i) f` where the
/// kernel receives evolutions at `τ` and at `t - τ`.
fn duhamel_quadrature<K>(model: &ModelSpec, t: f64, s: usize, f: &ManyBodyOperator, nodes: usize, kernel: K) -> Result<ManyBodyOperator>
where
    K: Fn(&Evolution, &Evolution, &ManyBodyOperator) -> ManyBodyOperator + Sync,
{
    let mut acc = ManyBodyOperator::zeros(f.dim(), f.particle_count());
    if t == 0.0 {
        return Ok(acc);
    }
    let rule = crate::quadrature::GaussRule::new(nodes)?;
    let cluster: Vec<usize> = (1..=s).collect();
    let all: Vec<usize> = (1..=s + 1).collect();
    let values: Vec<ManyBodyOperator> = rule
        .on_interval(0.0, t)
        .par_iter()
        .map(|&(tau, w)| {
            let ev_tau = model.evolution(tau);
            let ev_rest = model.evolution(t - tau);
            // Π G_1(τ) undoes the free flow G_1(-τ)
            let g = all.iter().fold(f.clone(), |g, &l| ev_tau.group_inverse(&[l], &g));
            let k = kernel(&ev_tau, &ev_rest, &g);
            let k = ev_tau.group(&cluster, &k);
            let k = ev_tau.free(&[s + 1], &k);
            k.scale_real(w)
        })
        .collect();
    for v in &values {
        acc += v;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{random_hermitian, random_model, rng};

    #[test]
    fn partition_cumulant_low_orders() {
        let mut g = rng(20);
        let m = random_model(&mut g, 2, 0.7);
        let t = 0.6;
        let f2 = random_hermitian(&mut g, 2, 2);
        let a1 = partition_cumulant(&m, t, ClusterArgument::new(2, 0).unwrap(), &f2).unwrap();
        assert!(a1.max_abs_diff(&m.group_evolve(t, &f2).unwrap()) < 1e-13);

        let f3 = random_hermitian(&mut g, 2, 3);
        let a2 = partition_cumulant(&m, t, ClusterArgument::new(2, 1).unwrap(), &f3).unwrap();
        let ev = m.evolution(t);
        let oracle = &m.group_evolve(t, &f3).unwrap() - &ev.group(&[3], &ev.group(&[1, 2], &f3));
        assert!(a2.max_abs_diff(&oracle) < 1e-13);
    }

    #[test]
    fn cumulants_vanish_without_interaction() {
        let mut g = rng(21);
        let m = random_model(&mut g, 2, 0.0);
        let f = random_hermitian(&mut g, 2, 3);
        for n in 1..=2 {
            let arg = ClusterArgument::new(3 - n, n).unwrap();
            assert!(partition_cumulant(&m, 0.8, arg, &f).unwrap().max_abs() < 1e-12);
            assert!(reduced_scattering_cumulant(&m, 0.8, arg, &f).unwrap().max_abs() < 1e-12);
        }
    }

    #[test]
    fn reduced_cumulant_two_term_form() {
        let mut g = rng(22);
        let m = random_model(&mut g, 2, 0.9);
        let f = random_hermitian(&mut g, 2, 3);
        let arg = ClusterArgument::new(2, 1).unwrap();
        let got = reduced_cumulant(&m, 0.4, arg, &f).unwrap();
        let ev = m.evolution(0.4);
        let oracle = &ev.group(&[1, 2, 3], &f) - &ev.group(&[1, 2], &f);
        assert!(got.max_abs_diff(&oracle) < 1e-14);
        let n0 = reduced_cumulant(&m, 0.4, ClusterArgument::new(3, 0).unwrap(), &f).unwrap();
        assert!(n0.max_abs_diff(&m.group_evolve(0.4, &f).unwrap()) < 1e-14);
    }

    #[test]
    fn scattering_cumulant_cases() {
        let mut g = rng(23);
        let m = random_model(&mut g, 2, 0.9);
        let f = random_hermitian(&mut g, 2, 2);
        let arg = ClusterArgument::new(1, 1).unwrap();
        assert!(reduced_scattering_cumulant(&m, 0.0, arg, &f).unwrap().max_abs() < 1e-14);
        let got = reduced_scattering_cumulant(&m, 0.7, arg, &f).unwrap();
        let oracle = &m.scattering_operator(0.7, &f).unwrap() - &f;
        assert!(got.max_abs_diff(&oracle) < 1e-14);
    }

    #[test]
    fn v_operator_first_orders() {
        let mut g = rng(24);
        let m = random_model(&mut g, 2, 0.8);
        let t = 0.3;
        for s in 1..=2 {
            let f = random_hermitian(&mut g, 2, s + 1);
            let ev = m.evolution(t);
            let all: Vec<usize> = (1..=s + 1).collect();
            let cluster: Vec<usize> = (1..=s).collect();

            // V_1 = Ĝ_s
            let v1 = v_operator_direct(&m, t, ClusterArgument::new(s + 1, 0).unwrap(), &f).unwrap();
            assert!(v1.max_abs_diff(&ev.scattering(&all, &f)) < 1e-13);

            // V_2 = Ĝ_{s+1} - Ĝ_s Σ_i Ĝ_2(i, s+1) + (s-1) Ĝ_s
            let v2 = v_operator_direct(&m, t, ClusterArgument::new(s, 1).unwrap(), &f).unwrap();
            let mut oracle = ev.scattering(&all, &f);
            for i in 1..=s {
                oracle -= &ev.scattering(&cluster, &ev.scattering(&[i, s + 1], &f));
            }
            oracle.axpy((s as f64) - 1.0, &ev.scattering(&cluster, &f));
            assert!(v2.max_abs_diff(&oracle) < 1e-12, "s = {s}");

            let v2r = v_operator_recursive(&m, t, ClusterArgument::new(s, 1).unwrap(), &f).unwrap();
            assert!(v2r.max_abs_diff(&v2) < 1e-11);
        }
    }

    #[test]
    fn duhamel_identity_converges() {
        let mut g = rng(25);
        let m = random_model(&mut g, 2, 0.5);
        let f = random_hermitian(&mut g, 2, 2);
        let r2 = duhamel_residual(&m, 0.5, 1, &f, 2).unwrap();
        let r32 = duhamel_residual(&m, 0.5, 1, &f, 32).unwrap();
        assert!(r32 < 1e-8, "{r32}");
        assert!(r2 > r32, "{r2} vs {r32}");
        assert!(duhamel_residual(&m, 0.0, 1, &f, 8).unwrap() < 1e-14);
        let v2 = v2_duhamel_residual(&m, 0.5, 1, &f, 32).unwrap();
        assert!(v2 < 1e-8, "{v2}");
    }
}
