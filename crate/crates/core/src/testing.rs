//! Seeded fixtures shared by the unit tests, the integration suites and the
//! `selftest` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::ModelSpec;
use crate::operator::{CMatrix, ManyBodyOperator, C64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Hermitian operator with entries uniform in [-1, 1] + i[-1, 1].
pub fn random_hermitian(rng: &mut impl Rng, dim: usize, particles: usize) -> ManyBodyOperator {
    let side = dim.pow(particles as u32);
    let m = CMatrix::from_fn(side, side, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    ManyBodyOperator::new(dim, particles, h).expect("square by construction")
}

/// Positive one-particle operator with trace norm `norm`.
pub fn random_density(rng: &mut impl Rng, dim: usize, norm: f64) -> ManyBodyOperator {
    let a = CMatrix::from_fn(dim, dim, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let rho = &a * a.adjoint();
    let tr = rho.trace().re;
    let rho = (&rho + rho.adjoint()) * C64::new(0.5 * norm / tr, 0.0);
    ManyBodyOperator::one_particle(rho).expect("square by construction")
}

/// Random model with a swap-symmetric pair potential.
pub fn random_model(rng: &mut impl Rng, dim: usize, coupling: f64) -> ModelSpec {
    let one_body = random_hermitian(rng, dim, 1);
    let raw = random_hermitian(rng, dim, 2);
    let swapped = swap_particles(&raw);
    let phi = (&raw + &swapped).scale_real(0.5);
    ModelSpec::new(dim, 1.0, one_body.into_matrix(), phi.into_matrix(), coupling)
        .expect("random model is valid by construction")
}

/// `S a S` for the two-particle swap `S`.
pub fn swap_particles(a: &ManyBodyOperator) -> ManyBodyOperator {
    let d = a.dim();
    let swap = |i: usize| (i % d) * d + i / d;
    let side = d * d;
    let m = CMatrix::from_fn(side, side, |r, c| a.matrix()[(swap(r), swap(c))]);
    ManyBodyOperator::new(d, 2, m).expect("two-particle operator")
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// The bundled two-level model: `h = 0.5 σz + 0.3 σx`,
/// `Φ = 0.5 (σx σx + σy σy) + σz σz + 0.3 (σx 1 + 1 σx)`.
pub fn default_model(coupling: f64) -> ModelSpec {
    let h = CMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.3, 0.0), c(0.3, 0.0), c(-0.5, 0.0)]);
    ModelSpec::new(2, 1.0, h, default_pair_potential(), coupling).expect("valid by construction")
}

pub fn default_pair_potential() -> CMatrix {
    let x = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
    let y = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]);
    let z = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
    let id = CMatrix::identity(2, 2);
    (x.kronecker(&x) + y.kronecker(&y)) * c(0.5, 0.0)
        + z.kronecker(&z)
        + (x.kronecker(&id) + id.kronecker(&x)) * c(0.3, 0.0)
}

/// Positive one-particle datum with trace (and trace norm) `norm`.
pub fn default_initial(norm: f64) -> ManyBodyOperator {
    let rho = CMatrix::from_row_slice(2, 2, &[c(0.6, 0.0), c(0.2, -0.1), c(0.2, 0.1), c(0.4, 0.0)]);
    ManyBodyOperator::one_particle(rho * c(norm, 0.0)).expect("square by construction")
}
