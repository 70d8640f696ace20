//! The invariant suite behind the `selftest` command.

use crate::cli::report::{Cell, Table};
use crate::cli::config::Resolved;
use crate::combinatorics::{dissections, set_partitions};
use crate::cumulants::{duhamel_residual, v_operator_direct, v_operator_recursive, ClusterArgument};
use crate::error::Result;
use crate::operator::ManyBodyOperator;
use crate::scaling::{chaos_check, meanfield_sweep};
use crate::solvers::{
    bbgky_marginal, collision_integral, derivative_consistency, equivalence_report, invert_initial_data,
    kinetic_solution, SeriesConfig,
};
use crate::testing;

enum Bound {
    Upper,
    Lower,
}

struct Suite {
    table: Table,
    passed: bool,
}

impl Suite {
    fn new() -> Self {
        Self {
            table: Table::new(&["check", "value", "bound", "kind", "passed"]),
            passed: true,
        }
    }

    fn check(&mut self, name: &str, value: f64, bound: f64, kind: Bound) {
        let ok = match kind {
            Bound::Upper => value <= bound,
            Bound::Lower => value >= bound,
        };
        self.passed &= ok;
        let kind = match kind {
            Bound::Upper => "max",
            Bound::Lower => "min",
        };
        self.table
            .push(vec![name.into(), value.into(), bound.into(), kind.into(), Cell::from(ok)]);
    }
}

pub(crate) fn run(r: &Resolved) -> Result<(Table, bool)> {
    let m = &r.model;
    let cfg = &r.config.series;
    let ex = &r.config.experiment;
    let mut suite = Suite::new();
    let mut rng = testing::rng(ex.seed);

    let bell = [1usize, 1, 2, 5, 15, 52];
    let mut misses = 0;
    for (n, &b) in bell.iter().enumerate() {
        misses += usize::from(set_partitions(n)?.len() != b);
    }
    for n in 1..=10 {
        misses += usize::from(dissections(n)?.len() != 1 << (n - 1));
    }
    suite.check("enumeration_counts_mismatches", misses as f64, 0.0, Bound::Upper);

    let mut worst = 0.0f64;
    for eps in [0.0, 0.5, 1.0] {
        let me = m.with_coupling(eps)?;
        for total in 1..=4 {
            for s in 1..=total {
                let arg = ClusterArgument::new(s, total - s)?;
                let f = testing::random_hermitian(&mut rng, m.dim(), total);
                for t in [0.1, 0.5, 1.0] {
                    let d = v_operator_direct(&me, t, arg, &f)?;
                    let rec = v_operator_recursive(&me, t, arg, &f)?;
                    worst = worst.max(d.max_abs_diff(&rec));
                }
            }
        }
    }
    suite.check("v_direct_vs_recursive", worst, 1e-10, Bound::Upper);

    let free = m.with_coupling(0.0)?;
    let (mut free_worst, mut initial_worst) = (0.0f64, 0.0f64);
    for total in 1..=4 {
        let f = testing::random_hermitian(&mut rng, m.dim(), total);
        for s in 1..=total {
            let arg = ClusterArgument::new(s, total - s)?;
            let expect = if s == total { f.clone() } else { ManyBodyOperator::zeros(m.dim(), total) };
            free_worst = free_worst.max(v_operator_direct(&free, 0.7, arg, &f)?.max_abs_diff(&expect));
            initial_worst = initial_worst.max(v_operator_direct(m, 0.0, arg, &f)?.max_abs_diff(&expect));
        }
    }
    suite.check("v_collapse_zero_coupling", free_worst, 1e-12, Bound::Upper);
    suite.check("v_collapse_initial_time", initial_worst, 1e-12, Bound::Upper);

    for s in 1..=2 {
        let f = testing::random_hermitian(&mut rng, m.dim(), s + 1);
        let r32 = duhamel_residual(m, 0.5, s, &f, ex.quadrature_nodes)?;
        suite.check(&format!("duhamel_residual_s{s}"), r32, 1e-8, Bound::Upper);
    }

    let f0 = r.f1.trace_norm();
    let (mut trace_worst, mut herm_worst, mut bound_worst, mut coll_worst) = (0.0f64, 0.0f64, f64::MIN, 0.0f64);
    for &t in &ex.times {
        for n_max in 0..=cfg.n_max {
            let c = cfg.with_order(n_max);
            let f1 = kinetic_solution(m, t, &r.f1, &c)?;
            trace_worst = trace_worst.max((f1.trace() - r.f1.trace()).norm());
            herm_worst = herm_worst.max(f1.hermiticity_defect());
            for s in 1..=2 {
                let fs = if s == 1 { f1.clone() } else { bbgky_marginal(m, s, t, &r.f1, &c)? };
                bound_worst = bound_worst.max(fs.trace_norm() - f0.powi(s as i32) * (2.0 * f0).exp());
            }
        }
        let f1 = kinetic_solution(m, t, &r.f1, cfg)?;
        coll_worst = coll_worst.max(collision_integral(m, t, &f1, cfg)?.trace().norm());
    }
    suite.check("trace_conservation", trace_worst, cfg.tolerance("trace"), Bound::Upper);
    suite.check("hermiticity", herm_worst, cfg.tolerance("hermiticity"), Bound::Upper);
    suite.check("norm_bound_excess", bound_worst, 0.0, Bound::Upper);
    suite.check("collision_trace", coll_worst, cfg.tolerance("collision_trace"), Bound::Upper);

    let rows = equivalence_report(m, ex.s, ex.time, &r.f1, &[2, 4], cfg)?;
    suite.check("equivalence_residual_n4", rows[1].residual, 1e-4, Bound::Upper);
    suite.check("equivalence_decay_n4_over_n2", rows[1].residual / rows[0].residual, 0.25, Bound::Upper);

    let d = derivative_consistency(m, ex.time, &r.f1, cfg)?;
    suite.check("derivative_richardson_ratio_min", d.ratio, 3.5, Bound::Lower);
    suite.check("derivative_richardson_ratio_max", d.ratio, 4.5, Bound::Upper);

    let f1_t = kinetic_solution(m, ex.time, &r.f1, cfg)?;
    let inv = invert_initial_data(m, ex.time, &f1_t, &r.config.contraction, cfg)?;
    suite.check("inversion_recovery_error", (&inv.solution - &r.f1).trace_norm(), 1e-8, Bound::Upper);
    let worst_ratio = inv.increment_ratios().into_iter().fold(0.0, f64::max);
    suite.check("inversion_increment_ratio", worst_ratio, 1.0, Bound::Upper);

    let sweep = r.config.sweep.clone().unwrap_or_default();
    let quiet = SeriesConfig {
        norm_guard: false,
        ..cfg.clone()
    };
    let mf = meanfield_sweep(m, &sweep, &r.f1, &quiet)?;
    let ratios: Vec<f64> = mf.iter().filter_map(|row| row.ratio).collect();
    if !ratios.is_empty() {
        suite.check("meanfield_ratio_min", ratios.iter().copied().fold(f64::MAX, f64::min), 1.5, Bound::Lower);
        suite.check("meanfield_ratio_max", ratios.iter().copied().fold(f64::MIN, f64::max), 3.0, Bound::Upper);
    }
    let chaos = chaos_check(m, &sweep, &r.f1, 2, &quiet)?;
    let rising = chaos.windows(2).filter(|w| w[1].correlation_norm >= w[0].correlation_norm).count();
    suite.check("chaos_correlation_non_decreasing_steps", rising as f64, 0.0, Bound::Upper);

    Ok((suite.table, suite.passed))
}
