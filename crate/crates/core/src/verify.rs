//! One-shot check of every thermodynamic invariant of a spec.

use std::fmt;

use crate::emit::{Cell, Table};
use crate::engine::{check_strict_energy_conservation, EngineSpec, InteractionForm};
use crate::error::Result;
use crate::hilbert::{DYNAMICAL_TOL, POSITIVITY_TOL, STRUCTURAL_TOL};
use crate::strobe::{otto_check, DiagnosticCheck, Engine, LimitCycleOptions};

/// Tolerances of the individual checks.
pub const FIRST_LAW_TOL: f64 = 1e-10;
pub const SECOND_LAW_TOL: f64 = 1e-12;
pub const INTERNAL_FREEZE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    NotApplicable,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "fail",
            CheckStatus::NotApplicable => "not-applicable",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub status: CheckStatus,
    pub measured: Option<f64>,
    pub tolerance: Option<f64>,
    pub detail: String,
}

impl Check {
    fn at_most(name: &'static str, measured: f64, tolerance: f64) -> Self {
        Self {
            name,
            status: if measured <= tolerance {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            measured: Some(measured),
            tolerance: Some(tolerance),
            detail: String::new(),
        }
    }

    fn at_least(name: &'static str, measured: f64, bound: f64) -> Self {
        Self {
            status: if measured >= bound {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            ..Self::at_most(name, measured, bound)
        }
    }

    fn skipped(name: &'static str, why: impl Into<String>) -> Self {
        Self {
            name,
            status: CheckStatus::NotApplicable,
            measured: None,
            tolerance: None,
            detail: why.into(),
        }
    }

    fn failed(name: &'static str, why: impl Into<String>) -> Self {
        Self {
            status: CheckStatus::Fail,
            ..Self::skipped(name, why)
        }
    }

    fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = d.into();
        self
    }

    fn from_diagnostic(name: &'static str, d: &DiagnosticCheck) -> Self {
        Self {
            name,
            status: if d.passed { CheckStatus::Pass } else { CheckStatus::Fail },
            measured: Some(d.residual),
            tolerance: Some(d.tolerance),
            detail: format!("measured {:.6e}, expected {:.6e}", d.measured, d.expected),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["check", "status", "measured", "tolerance", "detail"]);
        for c in &self.checks {
            t.push(vec![
                Cell::Text(c.name.into()),
                Cell::Text(c.status.to_string()),
                Cell::opt_float(c.measured),
                Cell::opt_float(c.tolerance),
                Cell::Text(c.detail.clone()),
            ]);
        }
        t
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    /// Transient cycles run from the solver's initial state.
    pub cycles: usize,
    pub solver: LimitCycleOptions,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            cycles: 50,
            solver: LimitCycleOptions::default(),
        }
    }
}

pub fn verify(spec: &EngineSpec, options: &VerifyOptions) -> Result<VerificationReport> {
    let engine = Engine::new(spec)?;
    let mut checks = Vec::new();

    let (sec_c, sec_h) = check_strict_energy_conservation(spec);
    let sec = sec_c.max(sec_h);
    checks.push(
        Check::at_most("strict_energy_conservation", sec, STRUCTURAL_TOL).detail(format!(
            "‖[V_C, H_1 + H_C]‖ = {sec_c:.3e}, ‖[V_H, H_N + H_H]‖ = {sec_h:.3e}"
        )),
    );

    let mut rho = engine.initial_state(&options.solver.initial)?;
    let (mut onoff, mut trapped, mut double_entry, mut work_residue) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut first_law, mut min_sigma, mut min_eig, mut trace_err) = (0.0f64, f64::INFINITY, f64::INFINITY, 0.0f64);
    let ledger = engine.run_cycles(&rho, options.cycles.max(1), false)?;
    for row in &ledger.rows {
        first_law = first_law.max((row.de - row.q_c - row.q_h + row.w).abs());
        min_sigma = min_sigma.min(row.sigma);
    }
    for _ in 0..options.cycles.max(1) {
        let heat = engine.heat_stroke(&rho)?;
        let work = engine.work_stroke(&heat.state_after)?;
        onoff = onoff.max(heat.w_onoff_c.abs()).max(heat.w_onoff_h.abs());
        trapped = trapped
            .max((heat.w_onoff_c + heat.dv_c).abs())
            .max((heat.w_onoff_h + heat.dv_h).abs());
        double_entry = double_entry
            .max((heat.q_c_ancilla - heat.q_c).abs())
            .max((heat.q_h_ancilla - heat.q_h).abs());
        work_residue = work_residue.max(work.dv.abs());
        for s in [&heat.state_after, &work.state_after] {
            min_eig = min_eig.min(s.min_eigenvalue());
            trace_err = trace_err.max((s.trace().re - 1.0).abs());
        }
        rho = work.state_after;
    }
    checks.push(Check::at_most("onoff_work", onoff, DYNAMICAL_TOL).detail("max |W_on/off| over the transient"));
    checks.push(
        Check::at_most("onoff_work_is_trapped_energy", trapped, DYNAMICAL_TOL)
            .detail("max |W_on/off + ΔV| over the transient"),
    );
    checks.push(if sec <= STRUCTURAL_TOL {
        Check::at_most("heat_double_entry", double_entry, DYNAMICAL_TOL)
            .detail("max |Q_ancilla − Q_system| over the transient")
    } else {
        Check::skipped(
            "heat_double_entry",
            "no strict energy conservation; see onoff_work_is_trapped_energy",
        )
    });
    checks.push(Check::at_most("first_law", first_law, FIRST_LAW_TOL).detail("max |ΔE − Q_C − Q_H + W| per cycle"));
    checks.push(Check::at_least("second_law", min_sigma, -SECOND_LAW_TOL).detail("min Σ per cycle"));
    checks.push(Check::at_most("work_double_entry", work_residue, DYNAMICAL_TOL).detail("max |−Δ⟨ΣH_i⟩ − Δ⟨𝒱_S⟩|"));
    checks.push(
        Check::at_least("channel_positivity", min_eig, -POSITIVITY_TOL).detail("min eigenvalue after any stroke"),
    );
    checks.push(Check::at_most("channel_trace", trace_err, DYNAMICAL_TOL));

    match engine.find_limit_cycle(&options.solver) {
        Err(e) => {
            checks.push(Check::failed("limit_cycle", e.to_string()));
            for name in [
                "limit_cycle_first_law",
                "limit_cycle_second_law",
                "internal_freeze",
                "otto_heat_ratio",
                "otto_sign_law",
                "otto_efficiency",
            ] {
                checks.push(Check::skipped(name, "no limit cycle"));
            }
        }
        Ok(report) => {
            let tol = 10.0 * options.solver.tol;
            checks.push(
                Check::at_most("limit_cycle", report.residual, tol.max(STRUCTURAL_TOL)).detail(format!(
                    "{} method, {} cycles, subleading eigenvalue {}",
                    report.method,
                    report.cycles_to_converge,
                    report
                        .subleading_eigenvalue
                        .map_or("not computed".to_string(), |s| format!("{s:.6}"))
                )),
            );
            checks.push(
                Check::at_most(
                    "limit_cycle_first_law",
                    (report.w - report.q_c - report.q_h).abs(),
                    FIRST_LAW_TOL,
                )
                .detail("|W* − Q_C* − Q_H*|"),
            );
            checks.push(Check::at_least("limit_cycle_second_law", report.sigma, -SECOND_LAW_TOL).detail("Σ*"));
            checks.push(if report.internal_drift.is_empty() {
                Check::skipped("internal_freeze", "no internal sites")
            } else {
                Check::at_most("internal_freeze", report.max_internal_drift(), INTERNAL_FREEZE_TOL)
                    .detail("max |tr{H_i(ρ* − ρ̃*)}| over internal sites")
            });
            let diag = otto_check(spec, &report);
            match &diag.form {
                InteractionForm::Eigenoperator { .. } => {
                    let ratio = diag.heat_ratio.as_ref().expect("applicable");
                    checks.push(Check::from_diagnostic("otto_heat_ratio", ratio));
                    checks.push(Check::from_diagnostic(
                        "otto_sign_law",
                        diag.sign_law.as_ref().expect("applicable"),
                    ));
                    checks.push(match &diag.efficiency {
                        Some(e) => Check::from_diagnostic("otto_efficiency", e),
                        None => {
                            Check::skipped("otto_efficiency", format!("not an engine (regime {})", report.regime()))
                        }
                    });
                }
                InteractionForm::NotApplicable { reason } | InteractionForm::NotGuaranteed { reason } => {
                    for name in ["otto_heat_ratio", "otto_sign_law", "otto_efficiency"] {
                        checks.push(Check::skipped(name, reason.clone()));
                    }
                }
            }
        }
    }
    Ok(VerificationReport { checks })
}
