//! The finite-dimensional model: Hamiltonians, von Neumann generators, the
//! unitary evolution groups and the scattering operators built from them.
//!
//! Sign conventions follow the commutator generators literally:
//! `N_s f = -(i/hbar)(f H_s - H_s f)` and `G_s(-t) f = e^{-itH_s/hbar} f e^{itH_s/hbar}`,
//! so that `d/dt G_s(-t) f = -N_s G_s(-t) f`.

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::operator::{CMatrix, HermitianSpectrum, ManyBodyOperator, C64, HERMITIAN_TOL, MAX_PARTICLES};

#[derive(Clone, Debug)]
pub struct ModelSpec {
    dim: usize,
    hbar: f64,
    one_body: CMatrix,
    pair_potential: CMatrix,
    coupling: f64,
    spectra: Arc<Vec<OnceLock<HermitianSpectrum>>>,
}

impl ModelSpec {
    pub fn new(
        dim: usize,
        hbar: f64,
        one_body: CMatrix,
        pair_potential: CMatrix,
        coupling: f64,
    ) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid("model.dim", "one-particle dimension must be at least 2"));
        }
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::invalid("model.hbar", "must be positive and finite"));
        }
        if !(coupling >= 0.0 && coupling.is_finite()) {
            return Err(Error::invalid("model.coupling", "must be non-negative and finite"));
        }
        let h1 = ManyBodyOperator::new(dim, 1, one_body).map_err(|e| relabel(e, "model.one_body"))?;
        let defect = h1.hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian {
                what: "model.one_body".into(),
                defect,
            });
        }
        let phi =
            ManyBodyOperator::new(dim, 2, pair_potential).map_err(|e| relabel(e, "model.pair_potential"))?;
        let defect = phi.hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian {
                what: "model.pair_potential".into(),
                defect,
            });
        }
        let swapped = swap_pair(&phi);
        let defect = swapped.max_abs_diff(&phi);
        if defect > HERMITIAN_TOL {
            return Err(Error::NotSwapSymmetric {
                what: "model.pair_potential".into(),
                defect,
            });
        }
        Ok(Self {
            dim,
            hbar,
            one_body: h1.hermitian_part().into_matrix(),
            pair_potential: phi.hermitian_part().into_matrix(),
            coupling,
            spectra: fresh_cache(),
        })
    }

    /// Same model with the interaction strength replaced by `coupling`.
    pub fn with_coupling(&self, coupling: f64) -> Result<Self> {
        if !(coupling >= 0.0 && coupling.is_finite()) {
            return Err(Error::invalid("model.coupling", "must be non-negative and finite"));
        }
        Ok(Self {
            coupling,
            spectra: fresh_cache(),
            ..self.clone()
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn one_body(&self) -> &CMatrix {
        &self.one_body
    }

    pub fn pair_potential(&self) -> &CMatrix {
        &self.pair_potential
    }

    /// `coupling * Φ` as a two-particle matrix.
    pub fn scaled_pair_potential(&self) -> CMatrix {
        &self.pair_potential * C64::new(self.coupling, 0.0)
    }

    /// `H_s = Σ_i h(i) + ε Σ_{i<j} Φ(i,j)`.
    pub fn hamiltonian(&self, s: usize) -> Result<ManyBodyOperator> {
        if s == 0 || s > MAX_PARTICLES {
            return Err(Error::invalid("s", format!("particle count must lie in 1..={MAX_PARTICLES}")));
        }
        let h1 = ManyBodyOperator::one_particle(self.one_body.clone())?;
        let phi = ManyBodyOperator::new(self.dim, 2, self.scaled_pair_potential())?;
        let mut h = ManyBodyOperator::zeros(self.dim, s);
        for i in 1..=s {
            h += &h1.embed(&[i], s)?;
        }
        if self.coupling != 0.0 {
            for i in 1..=s {
                for j in i + 1..=s {
                    h += &phi.embed(&[i, j], s)?;
                }
            }
        }
        Ok(h.hermitian_part())
    }

    pub(crate) fn spectrum(&self, s: usize) -> &HermitianSpectrum {
        self.spectra[s].get_or_init(|| {
            let h = self.hamiltonian(s).expect("particle count checked by caller");
            HermitianSpectrum::new(h.matrix())
        })
    }

    /// `N_s f = -(i/hbar)(f H_s - H_s f)` with `s = f.particle_count()`.
    pub fn liouvillian(&self, f: &ManyBodyOperator) -> Result<ManyBodyOperator> {
        self.check_dim(f)?;
        let h = self.hamiltonian(f.particle_count())?;
        let comm = f.commutator(&h)?;
        Ok(comm.scale(C64::new(0.0, -1.0 / self.hbar)))
    }

    /// `N_int(i,j) f = -(i/hbar)(f εΦ(i,j) - εΦ(i,j) f)`.
    pub fn interaction_liouvillian(&self, i: usize, j: usize, f: &ManyBodyOperator) -> Result<ManyBodyOperator> {
        self.check_dim(f)?;
        let s = f.particle_count();
        if i == j {
            return Err(Error::LabelCollision(i));
        }
        for l in [i, j] {
            if l == 0 || l > s {
                return Err(Error::LabelOutOfRange { label: l, total: s });
            }
        }
        // [Φ, f] = Φ f - f Φ, and N_int f = (i/hbar)[Φ, f]
        let comm = f.commutator_on(&self.scaled_pair_potential(), &[i, j]);
        Ok(comm.scale(C64::new(0.0, 1.0 / self.hbar)))
    }

    /// `G_s(-t) f`.
    pub fn group_evolve(&self, t: f64, f: &ManyBodyOperator) -> Result<ManyBodyOperator> {
        self.check_dim(f)?;
        let ev = self.evolution(t);
        let labels: Vec<usize> = (1..=f.particle_count()).collect();
        Ok(ev.group(&labels, f))
    }

    /// `Ĝ_s(t) f = G_s(-t) Π_i G_1(t, i) f`.
    pub fn scattering_operator(&self, t: f64, f: &ManyBodyOperator) -> Result<ManyBodyOperator> {
        self.check_dim(f)?;
        let ev = self.evolution(t);
        let labels: Vec<usize> = (1..=f.particle_count()).collect();
        Ok(ev.scattering(&labels, f))
    }

    pub fn evolution(&self, t: f64) -> Evolution<'_> {
        Evolution::new(self, t)
    }

    pub(crate) fn check_dim(&self, f: &ManyBodyOperator) -> Result<()> {
        if f.dim() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "operator dimension {} does not match model dimension {}",
                f.dim(),
                self.dim
            )));
        }
        Ok(())
    }
}

fn fresh_cache() -> Arc<Vec<OnceLock<HermitianSpectrum>>> {
    Arc::new((0..=MAX_PARTICLES).map(|_| OnceLock::new()).collect())
}

fn relabel(e: Error, field: &str) -> Error {
    match e {
        Error::DimensionMismatch(msg) => Error::invalid(field, msg),
        other => other,
    }
}

fn swap_pair(a: &ManyBodyOperator) -> ManyBodyOperator {
    let d = a.dim();
    let swap = |i: usize| (i % d) * d + i / d;
    let side = d * d;
    let m = CMatrix::from_fn(side, side, |r, c| a.matrix()[(swap(r), swap(c))]);
    ManyBodyOperator::new(d, 2, m).expect("two-particle operator")
}

/// Evolution groups of a model at a fixed time, with the unitaries for each
/// particle count computed on first use.
///
/// `H_m` is symmetric under particle permutations, so the `m`-particle
/// unitaries can be placed on any ordered label set.
pub struct Evolution<'m> {
    model: &'m ModelSpec,
    time: f64,
    group: Vec<OnceLock<CMatrix>>,
    scattering: Vec<OnceLock<CMatrix>>,
    free_back: OnceLock<CMatrix>,
}

impl<'m> Evolution<'m> {
    pub fn new(model: &'m ModelSpec, time: f64) -> Self {
        let cells = || (0..=MAX_PARTICLES).map(|_| OnceLock::new()).collect();
        Self {
            model,
            time,
            group: cells(),
            scattering: cells(),
            free_back: OnceLock::new(),
        }
    }

    pub fn model(&self) -> &'m ModelSpec {
        self.model
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// `e^{-i t H_m / hbar}`.
    pub fn group_unitary(&self, m: usize) -> &CMatrix {
        self.group[m].get_or_init(|| {
            self.model
                .spectrum(m)
                .exp(C64::new(0.0, -self.time / self.model.hbar))
        })
    }

    /// `e^{i t H_1 / hbar}`, the unitary of `G_1(t)`.
    fn free_back(&self) -> &CMatrix {
        self.free_back.get_or_init(|| {
            self.model
                .spectrum(1)
                .exp(C64::new(0.0, self.time / self.model.hbar))
        })
    }

    /// `e^{-i t H_m / hbar} (e^{i t H_1 / hbar})^{⊗m}`, the unitary of `Ĝ_m(t)`.
    pub fn scattering_unitary(&self, m: usize) -> &CMatrix {
        self.scattering[m].get_or_init(|| {
            let back = self.free_back();
            let mut prod = back.clone();
            for _ in 1..m {
                prod = prod.kronecker(back);
            }
            self.group_unitary(m) * prod
        })
    }

    /// `G_{|labels|}(-t)` acting jointly on `labels`.
    pub fn group(&self, labels: &[usize], f: &ManyBodyOperator) -> ManyBodyOperator {
        if labels.is_empty() {
            return f.clone();
        }
        f.conjugate_on(self.group_unitary(labels.len()), labels)
    }

    /// `G_{|labels|}(t)`, the inverse of [`Evolution::group`].
    pub fn group_inverse(&self, labels: &[usize], f: &ManyBodyOperator) -> ManyBodyOperator {
        if labels.is_empty() {
            return f.clone();
        }
        f.conjugate_on(&self.group_unitary(labels.len()).adjoint(), labels)
    }

    /// `Ĝ_{|labels|}(t)` acting on `labels`. `Ĝ_1` is the identity.
    pub fn scattering(&self, labels: &[usize], f: &ManyBodyOperator) -> ManyBodyOperator {
        if labels.len() <= 1 {
            return f.clone();
        }
        f.conjugate_on(self.scattering_unitary(labels.len()), labels)
    }

    /// `Π_{i ∈ labels} G_1(-t, i)`.
    pub fn free(&self, labels: &[usize], f: &ManyBodyOperator) -> ManyBodyOperator {
        let u = self.group_unitary(1);
        let mut g = f.clone();
        for &l in labels {
            g = g.conjugate_on(u, &[l]);
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::hermitian_exponential;
    use crate::testing::{random_hermitian, random_model, rng};
    use std::f64::consts::PI;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn diag_model(g: f64, coupling: f64) -> ModelSpec {
        let h1 = CMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&[c(0.0), c(1.0)]));
        let phi = CMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&[c(0.0), c(0.0), c(0.0), c(g)]));
        ModelSpec::new(2, 1.0, h1, phi, coupling).unwrap()
    }

    #[test]
    fn hamiltonian_assembly() {
        let m = diag_model(0.7, 1.0);
        let h1 = m.hamiltonian(1).unwrap();
        assert_eq!(h1.matrix(), m.one_body());
        let h2 = m.hamiltonian(2).unwrap();
        let expect = [0.0, 1.0, 1.0, 2.7];
        for (k, e) in expect.iter().enumerate() {
            assert!((h2.matrix()[(k, k)] - c(*e)).norm() < 1e-15);
        }
        let free = diag_model(0.7, 0.0).hamiltonian(2).unwrap();
        let i = ManyBodyOperator::identity(2, 1);
        let hb = ManyBodyOperator::one_particle(m.one_body().clone()).unwrap();
        let oracle = &hb.tensor(&i).unwrap() + &i.tensor(&hb).unwrap();
        assert!(free.max_abs_diff(&oracle) < 1e-15);
    }

    #[test]
    fn validation_errors_name_the_field() {
        let mut h1 = CMatrix::identity(2, 2);
        h1[(0, 1)] = c(1.0);
        let phi = CMatrix::zeros(4, 4);
        let err = ModelSpec::new(2, 1.0, h1, phi.clone(), 1.0).unwrap_err();
        assert!(err.to_string().contains("model.one_body"), "{err}");

        let mut asym = CMatrix::zeros(4, 4);
        asym[(1, 1)] = c(1.0); // |01><01| is not swap symmetric
        let err = ModelSpec::new(2, 1.0, CMatrix::identity(2, 2), asym, 1.0).unwrap_err();
        assert!(matches!(err, Error::NotSwapSymmetric { .. }));
        assert!(ModelSpec::new(2, 1.0, CMatrix::identity(2, 2), phi.clone(), -1.0).is_err());
        assert!(ModelSpec::new(1, 1.0, CMatrix::identity(1, 1), CMatrix::zeros(1, 1), 1.0).is_err());
    }

    #[test]
    fn group_evolve_cases() {
        let m = diag_model(0.3, 1.0);
        let mut g = rng(10);
        let f = random_hermitian(&mut g, 2, 1);
        assert!(m.group_evolve(0.0, &f).unwrap().max_abs_diff(&f) < 1e-15);

        let x = ManyBodyOperator::one_particle(CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)])).unwrap();
        let rotated = m.group_evolve(PI, &x).unwrap();
        let expect = x.scale_real(-1.0);
        assert!(rotated.max_abs_diff(&expect) < 1e-14);

        let rm = random_model(&mut g, 2, 0.8);
        let f2 = random_hermitian(&mut g, 2, 2);
        let e = rm.group_evolve(1.3, &f2).unwrap();
        assert!((e.trace_norm() - f2.trace_norm()).abs() < 1e-12);
        assert!((e.trace() - f2.trace()).norm() < 1e-12);
    }

    #[test]
    fn group_law_and_inverse() {
        let mut g = rng(11);
        let m = random_model(&mut g, 2, 0.6);
        let f = random_hermitian(&mut g, 2, 2);
        let fwd = m.group_evolve(0.7, &f).unwrap();
        let back = m.group_evolve(-0.7, &fwd).unwrap();
        assert!(back.max_abs_diff(&f) < 1e-12);
        let two = m.group_evolve(0.4, &m.group_evolve(0.3, &f).unwrap()).unwrap();
        assert!(two.max_abs_diff(&fwd) < 1e-11);
    }

    #[test]
    fn positivity_is_preserved() {
        let mut g = rng(12);
        let m = random_model(&mut g, 2, 1.0);
        let a = random_hermitian(&mut g, 2, 2);
        let psd = a.compose(&a).unwrap();
        let e = m.group_evolve(2.1, &psd).unwrap();
        let eig = nalgebra::SymmetricEigen::new(e.hermitian_part().into_matrix());
        assert!(eig.eigenvalues.min() > -1e-12);
    }

    #[test]
    fn liouvillian_cases() {
        let m = diag_model(0.5, 1.0);
        let f = ManyBodyOperator::from_diagonal(2, 2, &[c(1.0), c(2.0), c(3.0), c(4.0)]).unwrap();
        assert!(m.liouvillian(&f).unwrap().max_abs() < 1e-15);

        let mut g = rng(13);
        let rm = random_model(&mut g, 2, 0.9);
        let a = random_hermitian(&mut g, 2, 2);
        let b = random_hermitian(&mut g, 2, 2);
        let f = &a + &b.scale(C64::new(0.0, 1.0));
        let lhs = rm.liouvillian(&f).unwrap().adjoint();
        let rhs = rm.liouvillian(&f.adjoint()).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-14);
    }

    #[test]
    fn liouvillian_is_minus_the_group_generator() {
        let mut g = rng(14);
        let m = random_model(&mut g, 2, 0.7);
        let f = random_hermitian(&mut g, 2, 2);
        let gen = m.liouvillian(&f).unwrap().scale_real(-1.0);
        let err = |t: f64| {
            let fd = (&m.group_evolve(t, &f).unwrap() - &f).scale_real(1.0 / t);
            fd.max_abs_diff(&gen)
        };
        let (e3, e4) = (err(1e-3), err(1e-4));
        assert!(e4 < e3);
        let ratio = e3 / e4;
        assert!((8.0..12.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn interaction_liouvillian_cases() {
        let mut g = rng(15);
        let m0 = random_model(&mut g, 2, 0.0);
        let f = random_hermitian(&mut g, 2, 3);
        assert_eq!(m0.interaction_liouvillian(1, 3, &f).unwrap().max_abs(), 0.0);

        let m = diag_model(0.8, 0.5);
        let f2 = random_hermitian(&mut g, 2, 2);
        let out = m.interaction_liouvillian(1, 2, &f2).unwrap();
        assert!(out.trace().norm() < 1e-14);
        let phi = ManyBodyOperator::new(2, 2, m.scaled_pair_potential()).unwrap();
        let oracle = (&f2.compose(&phi).unwrap() - &phi.compose(&f2).unwrap()).scale(C64::new(0.0, -1.0));
        assert!(out.max_abs_diff(&oracle) < 1e-15);

        assert!(m.interaction_liouvillian(1, 1, &f2).is_err());
        assert!(m.interaction_liouvillian(1, 3, &f2).is_err());
    }

    #[test]
    fn scattering_operator_cases() {
        let mut g = rng(16);
        let m0 = random_model(&mut g, 2, 0.0);
        let f = random_hermitian(&mut g, 2, 3);
        assert!(m0.scattering_operator(0.9, &f).unwrap().max_abs_diff(&f) < 1e-12);

        let m = random_model(&mut g, 2, 0.8);
        let f1 = random_hermitian(&mut g, 2, 1);
        assert!(m.scattering_operator(0.9, &f1).unwrap().max_abs_diff(&f1) < 1e-14);
        assert!(m.scattering_operator(0.0, &f).unwrap().max_abs_diff(&f) < 1e-14);

        let out = m.scattering_operator(0.9, &f).unwrap();
        assert!((out.trace() - f.trace()).norm() < 1e-12);
        assert!(out.is_hermitian(1e-12));

        // dense oracle: e^{-itH_3} (e^{itH_1})^{⊗3} f (...)^†
        let h3 = m.hamiltonian(3).unwrap();
        let h1 = m.hamiltonian(1).unwrap();
        let u3 = hermitian_exponential(&h3, C64::new(0.0, -0.9)).unwrap();
        let v1 = hermitian_exponential(&h1, C64::new(0.0, 0.9)).unwrap();
        let v = v1.tensor(&v1).unwrap().tensor(&v1).unwrap();
        let w = u3.compose(&v).unwrap();
        let oracle = w.compose(&f).unwrap().compose(&w.adjoint()).unwrap();
        assert!(out.max_abs_diff(&oracle) < 1e-13);
    }
}
