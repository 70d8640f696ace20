//! Batch front end: one config file in, one report out.

pub mod config;
pub mod report;
mod selftest;

use crate::cumulants::{v_operator_direct, v_operator_recursive, ClusterArgument};
use crate::error::{Error, Result};
use crate::scaling::{chaos_check, meanfield_sweep, v_vanishing, SweepSpec};
use crate::solvers::{
    correlation_functional, dispersion, equivalence_report, invert_initial_data, kinetic_solution, observable_average,
};
use crate::testing;

pub use config::{Command, Format, Resolved, RunConfig, DEFAULT_CONFIG};
pub use report::{Cell, Table};

/// Rendered report and whether every check it contains passed.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub text: String,
    pub passed: bool,
}

/// Runs `config` on a pool of `workers` threads (0: one per core).
pub fn run(config: RunConfig, workers: usize) -> Result<Outcome> {
    let resolved = config.resolve()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid("workers", e.to_string()))?;
    let (table, passed) = pool.install(|| dispatch(&resolved))?;
    Ok(Outcome {
        text: table.render(resolved.config.format, &resolved.config),
        passed,
    })
}

fn dispatch(r: &Resolved) -> Result<(Table, bool)> {
    match r.config.command {
        Command::Evolve => evolve(r).map(|t| (t, true)),
        Command::Equivalence => equivalence(r).map(|t| (t, true)),
        Command::Invert => invert(r).map(|t| (t, true)),
        Command::Meanfield => meanfield(r).map(|t| (t, true)),
        Command::Chaos => chaos(r).map(|t| (t, true)),
        Command::CumulantTable => cumulant_table(r).map(|t| (t, true)),
        Command::Selftest => selftest::run(r),
    }
}

fn evolve(r: &Resolved) -> Result<Table> {
    let cfg = &r.config.series;
    let f0 = r.f1.trace_norm();
    let mut table = Table::new(&[
        "time",
        "trace",
        "trace_norm",
        "norm_bound",
        "hermiticity_defect",
        "average",
        "dispersion",
    ]);
    for &t in &r.config.experiment.times {
        let f1 = kinetic_solution(&r.model, t, &r.f1, cfg)?;
        let g2 = correlation_functional(&r.model, 2, t, &f1, cfg)?;
        table.push(vec![
            t.into(),
            f1.trace().re.into(),
            f1.trace_norm().into(),
            (f0 * (2.0 * f0).exp()).into(),
            f1.hermiticity_defect().into(),
            observable_average(&r.observable, &f1)?.into(),
            dispersion(&r.observable, &f1, &g2)?.into(),
        ]);
    }
    Ok(table)
}

fn equivalence(r: &Resolved) -> Result<Table> {
    let ex = &r.config.experiment;
    let rows = equivalence_report(&r.model, ex.s, ex.time, &r.f1, &ex.n_max_list, &r.config.series)?;
    let mut table = Table::new(&["n_max", "residual", "ratio"]);
    for (i, row) in rows.iter().enumerate() {
        let ratio = (i > 0).then(|| rows[i - 1].residual / row.residual);
        table.push(vec![row.n_max.into(), row.residual.into(), ratio.into()]);
    }
    Ok(table)
}

fn invert(r: &Resolved) -> Result<Table> {
    let t = r.config.experiment.time;
    let f1_t = kinetic_solution(&r.model, t, &r.f1, &r.config.series)?;
    let report = invert_initial_data(&r.model, t, &f1_t, &r.config.contraction, &r.config.series)?;
    let mut table = Table::new(&["iteration", "increment", "ratio", "recovery_error"]);
    for (k, (inc, f)) in report.increments.iter().zip(&report.iterates).enumerate() {
        let ratio = (k > 0).then(|| inc / report.increments[k - 1]);
        table.push(vec![(k + 1).into(), (*inc).into(), ratio.into(), (f - &r.f1).trace_norm().into()]);
    }
    Ok(table)
}

fn sweep(r: &Resolved) -> SweepSpec {
    r.config.sweep.clone().unwrap_or_default()
}

fn meanfield(r: &Resolved) -> Result<Table> {
    let rows = meanfield_sweep(&r.model, &sweep(r), &r.f1, &r.config.series)?;
    let mut table = Table::new(&["epsilon", "delta", "ratio"]);
    for row in rows {
        table.push(vec![row.epsilon.into(), row.delta.into(), row.ratio.into()]);
    }
    Ok(table)
}

fn chaos(r: &Resolved) -> Result<Table> {
    let ex = &r.config.experiment;
    let sw = sweep(r);
    let rows = chaos_check(&r.model, &sw, &r.f1, ex.s, &r.config.series)?;
    let vanishing = ex
        .vanishing_orders
        .iter()
        .map(|&n| v_vanishing(&r.model, &sw, ex.s, n, &r.f1))
        .collect::<Result<Vec<_>>>()?;
    let mut columns = vec!["epsilon".to_string(), "marginal_defect".into(), "correlation_norm".into()];
    columns.extend(ex.vanishing_orders.iter().map(|n| format!("v{}_scaled_norm", n + 1)));
    let mut table = Table::new(&columns);
    for (i, row) in rows.iter().enumerate() {
        let mut cells = vec![row.epsilon.into(), row.marginal_defect.into(), row.correlation_norm.into()];
        cells.extend(vanishing.iter().map(|v| Cell::from(v[i].scaled_norm)));
        table.push(cells);
    }
    Ok(table)
}

fn cumulant_table(r: &Resolved) -> Result<Table> {
    let ex = &r.config.experiment;
    let mut rng = testing::rng(ex.seed);
    let mut table = Table::new(&["s", "n", "time", "max_abs_difference", "max_abs_value"]);
    for total in 1..=ex.cumulant_max_total {
        for s in (1..=total).rev() {
            let arg = ClusterArgument::new(s, total - s)?;
            let f = testing::random_hermitian(&mut rng, r.model.dim(), total);
            for &t in &ex.cumulant_times {
                let direct = v_operator_direct(&r.model, t, arg, &f)?;
                let recursive = v_operator_recursive(&r.model, t, arg, &f)?;
                table.push(vec![
                    s.into(),
                    (total - s).into(),
                    t.into(),
                    direct.max_abs_diff(&recursive).into(),
                    direct.max_abs().into(),
                ]);
            }
        }
    }
    Ok(table)
}
