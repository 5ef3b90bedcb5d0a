//! Heat and work strokes as quantum channels, the per-cycle ledger, and the
//! limit cycle.
//!
//! Sign conventions: heat is positive when it enters the system, work is
//! positive when it is extracted from the system.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::engine::{
    build_heat_hamiltonian, build_work_hamiltonian, EngineSpec, InteractionForm, COLD_LABEL, HOT_LABEL,
};
use crate::error::{Error, Result};
use crate::hilbert::{
    hermitian_eigen, hermitize, partial_trace, tensor_compose, thermal_state, trace_product, von_neumann_entropy,
    CMatrix, DensityMatrix, HermitianOperator, LayoutMatrix, Propagator, SpaceLayout, C64, DYNAMICAL_TOL,
    POSITIVITY_TOL,
};

/// Magnitude below which a current counts as zero when classifying regimes.
pub const REGIME_THRESHOLD: f64 = 1e-12;
/// Default trace-distance tolerance of the limit-cycle solvers.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Default cycle budget of the iterate method.
pub const DEFAULT_MAX_CYCLES: usize = 100_000;
/// Subleading eigenvalue magnitudes at or above `1 - DEGENERACY_GAP` are
/// treated as a second unit eigenvalue.
pub const DEGENERACY_GAP: f64 = 1e-9;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Result of one stroke.
///
/// Heat-stroke outcomes have zero work; work-stroke outcomes have zero heat.
#[derive(Clone, Debug)]
pub struct StrokeOutcome {
    pub state_after: DensityMatrix,
    /// System-side heats, the energy change of the boundary sites.
    pub q_c: f64,
    pub q_h: f64,
    /// Ancilla-side heats, minus the energy change of each ancilla.
    pub q_c_ancilla: f64,
    pub q_h_ancilla: f64,
    /// `-Δ⟨Σ H_i⟩` over the work stroke.
    pub work: f64,
    /// `Δ⟨𝒱_S⟩` over the work stroke.
    pub work_interaction: f64,
    /// Energy left in `V_C` and `V_H` when they are switched off, `-ΔV_x`.
    pub w_onoff_c: f64,
    pub w_onoff_h: f64,
    /// `ΔV_C`, `ΔV_H` over the heat stroke.
    pub dv_c: f64,
    pub dv_h: f64,
    /// `work - work_interaction`, zero up to round-off.
    pub dv: f64,
}

/// One cycle `ρⁿ → ρ̃ⁿ → ρⁿ⁺¹`.
#[derive(Clone, Debug, PartialEq)]
pub struct CycleRecord {
    pub n: usize,
    pub q_c: f64,
    pub q_h: f64,
    pub w: f64,
    /// `⟨Σ H_i⟩` at `ρⁿ⁺¹` minus at `ρⁿ`.
    pub de: f64,
    /// Entropy produced in the cycle, from the ancilla-side heats.
    pub sigma: f64,
    /// `S(ρⁿ)`
    pub entropy: f64,
    pub q_c_ancilla: f64,
    pub q_h_ancilla: f64,
    pub w_onoff_c: f64,
    pub w_onoff_h: f64,
}

#[derive(Clone, Debug)]
pub struct CycleSnapshot {
    pub rho: DensityMatrix,
    pub rho_tilde: DensityMatrix,
}

#[derive(Clone, Debug)]
pub struct CycleLedger {
    pub rows: Vec<CycleRecord>,
    /// `(ρⁿ, ρ̃ⁿ)` per row, when requested.
    pub snapshots: Option<Vec<CycleSnapshot>>,
    pub final_state: DensityMatrix,
}

impl CycleLedger {
    /// Largest `|ΔE − Q_C − Q_H + W|` over all rows.
    pub fn first_law_residual(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.de - r.q_c - r.q_h + r.w).abs())
            .fold(0.0, f64::max)
    }

    /// Smallest entropy production over all rows.
    pub fn min_entropy_production(&self) -> f64 {
        self.rows.iter().map(|r| r.sigma).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverMethod {
    Iterate,
    Spectral,
}

impl fmt::Display for SolverMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverMethod::Iterate => "iterate",
            SolverMethod::Spectral => "spectral",
        })
    }
}

impl FromStr for SolverMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iterate" => Ok(SolverMethod::Iterate),
            "spectral" => Ok(SolverMethod::Spectral),
            other => Err(Error::Parameter(format!(
                "unknown solver method {other:?} (expected iterate or spectral)"
            ))),
        }
    }
}

/// Start state of a transient run or of the iterate solver.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum InitialState {
    /// Product of site thermal states at the cold temperature.
    #[default]
    ColdThermal,
    /// Product of site ground states.
    Ground,
    MaximallyMixed,
    Custom(DensityMatrix),
}

impl FromStr for InitialState {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "thermal_cold" => Ok(InitialState::ColdThermal),
            "ground" => Ok(InitialState::Ground),
            "maximally_mixed" => Ok(InitialState::MaximallyMixed),
            other => Err(Error::Parameter(format!(
                "unknown initial state {other:?} (expected thermal_cold, ground or maximally_mixed)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LimitCycleOptions {
    pub method: SolverMethod,
    pub tol: f64,
    pub max_cycles: usize,
    pub initial: InitialState,
}

impl Default for LimitCycleOptions {
    fn default() -> Self {
        Self {
            method: SolverMethod::Spectral,
            tol: DEFAULT_TOL,
            max_cycles: DEFAULT_MAX_CYCLES,
            initial: InitialState::ColdThermal,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LimitCycleReport {
    pub rho_star: DensityMatrix,
    pub rho_tilde_star: DensityMatrix,
    /// Boundary-site energy changes over the heat stroke.
    pub q_c: f64,
    pub q_h: f64,
    /// `-tr{Σ H_i (ρ* − ρ̃*)}`
    pub w: f64,
    /// Ancilla-side heats of the limit-cycle heat stroke.
    pub q_c_ancilla: f64,
    pub q_h_ancilla: f64,
    /// `-Q_C/T_C - Q_H/T_H` with the ancilla-side heats.
    pub sigma: f64,
    /// `W*/Q_H*`, only in the engine direction `Q_H* > 0`.
    pub efficiency: Option<f64>,
    pub power: f64,
    /// `|tr{H_i(ρ* − ρ̃*)}|` for `i = 2 … N−1`.
    pub internal_drift: Vec<f64>,
    pub cycles_to_converge: usize,
    /// `½‖ℰ_w∘ℰ_q(ρ*) − ρ*‖₁`
    pub residual: f64,
    pub method: SolverMethod,
    /// Second-largest eigenvalue magnitude of the one-cycle channel, when computed.
    pub subleading_eigenvalue: Option<f64>,
}

impl LimitCycleReport {
    pub fn max_internal_drift(&self) -> f64 {
        self.internal_drift.iter().copied().fold(0.0, f64::max)
    }

    pub fn regime(&self) -> Regime {
        classify_regime(self)
    }
}

/// Operating regime of a limit cycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// Work out, heat in from the hot bath, heat out to the cold bath.
    Engine,
    /// Work in, heat drawn from the cold bath.
    Refrigerator,
    /// Work in, heat pushed from hot to cold faster.
    Accelerator,
    /// Work in, dissipated into the baths.
    Heater,
    /// No work, heat flowing between the baths.
    Conductor,
    Idle,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Engine => "engine",
            Regime::Refrigerator => "refrigerator",
            Regime::Accelerator => "accelerator",
            Regime::Heater => "heater",
            Regime::Conductor => "conductor",
            Regime::Idle => "idle",
        })
    }
}

impl FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "engine" => Regime::Engine,
            "refrigerator" => Regime::Refrigerator,
            "accelerator" => Regime::Accelerator,
            "heater" => Regime::Heater,
            "conductor" => Regime::Conductor,
            "idle" => Regime::Idle,
            other => return Err(Error::Parameter(format!("unknown regime {other:?}"))),
        })
    }
}

pub fn classify_regime(report: &LimitCycleReport) -> Regime {
    classify_currents(report.q_c, report.q_h, report.w)
}

/// Sign-pattern classification with threshold [`REGIME_THRESHOLD`].
pub fn classify_currents(q_c: f64, q_h: f64, w: f64) -> Regime {
    let t = REGIME_THRESHOLD;
    if q_c.abs() <= t && q_h.abs() <= t && w.abs() <= t {
        Regime::Idle
    } else if w > t && q_h > t && q_c < -t {
        Regime::Engine
    } else if w < -t && q_c > t {
        Regime::Refrigerator
    } else if w < -t && q_h > t && q_c < -t {
        Regime::Accelerator
    } else if w < -t {
        Regime::Heater
    } else {
        Regime::Conductor
    }
}

/// One diagnostic comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticCheck {
    pub measured: f64,
    pub expected: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl DiagnosticCheck {
    fn absolute(measured: f64, expected: f64, tolerance: f64) -> Self {
        let residual = (measured - expected).abs();
        Self {
            measured,
            expected,
            residual,
            tolerance,
            passed: residual <= tolerance,
        }
    }
}

/// Otto-universality diagnostics of a limit cycle.
#[derive(Clone, Debug, PartialEq)]
pub struct OttoDiagnostics {
    pub form: InteractionForm,
    /// `Q_C*` against `-(ω₁/ω_N) Q_H*`.
    pub heat_ratio: Option<DiagnosticCheck>,
    /// `Q_H*` against `ω₁/T_C − ω_N/T_H`; passes when the signs agree or
    /// `Q_H*` vanishes.
    pub sign_law: Option<DiagnosticCheck>,
    /// Efficiency against `1 − ω₁/ω_N`, when the efficiency is defined.
    pub efficiency: Option<DiagnosticCheck>,
}

impl OttoDiagnostics {
    pub fn is_applicable(&self) -> bool {
        matches!(self.form, InteractionForm::Eigenoperator { .. })
    }

    /// Every evaluated check passed (vacuously true when not applicable).
    pub fn passed(&self) -> bool {
        [&self.heat_ratio, &self.sign_law, &self.efficiency]
            .into_iter()
            .flatten()
            .all(|c| c.passed)
    }
}

pub const HEAT_RATIO_TOL: f64 = 1e-9;
pub const OTTO_EFFICIENCY_TOL: f64 = 1e-8;

pub fn otto_check(spec: &EngineSpec, report: &LimitCycleReport) -> OttoDiagnostics {
    let form = spec.interaction_form();
    let InteractionForm::Eigenoperator { frequencies } = &form else {
        return OttoDiagnostics {
            form,
            heat_ratio: None,
            sign_law: None,
            efficiency: None,
        };
    };
    let w1 = frequencies[0];
    let wn = frequencies[frequencies.len() - 1];
    let heat_ratio = DiagnosticCheck::absolute(report.q_c, -(w1 / wn) * report.q_h, HEAT_RATIO_TOL);
    let predictor = w1 / spec.cold().temperature() - wn / spec.hot().temperature();
    let sign_law = DiagnosticCheck {
        measured: report.q_h,
        expected: predictor,
        residual: if report.q_h * predictor > 0.0 {
            0.0
        } else {
            report.q_h.abs()
        },
        tolerance: REGIME_THRESHOLD,
        passed: report.q_h.abs() <= REGIME_THRESHOLD || report.q_h * predictor > 0.0,
    };
    let efficiency = report
        .efficiency
        .map(|e| DiagnosticCheck::absolute(e, 1.0 - w1 / wn, OTTO_EFFICIENCY_TOL));
    OttoDiagnostics {
        heat_ratio: Some(heat_ratio),
        sign_law: Some(sign_law),
        efficiency,
        form,
    }
}

/// `Re tr{O(b − a)}`
fn energy_change(op: &CMatrix, a: &CMatrix, b: &CMatrix) -> f64 {
    (trace_product(op, b) - trace_product(op, a)).re
}

fn check_channel_output(state: &DensityMatrix, what: &str) -> Result<()> {
    let tr = state.trace();
    if (tr - ONE).norm() > DYNAMICAL_TOL {
        return Err(Error::Consistency(format!("{what} changed the trace to {tr}")));
    }
    let min = state.min_eigenvalue();
    if min < -POSITIVITY_TOL {
        return Err(Error::Consistency(format!(
            "{what} produced a negative eigenvalue {min:.3e}"
        )));
    }
    Ok(())
}

/// Precomputed strokes of one engine.
#[derive(Clone, Debug)]
pub struct Engine {
    spec: EngineSpec,
    chain: SpaceLayout,
    composite: SpaceLayout,
    heat_unitary: CMatrix,
    work: Propagator,
    cold_state: DensityMatrix,
    hot_state: DensityMatrix,
    cold_h: CMatrix,
    hot_h: CMatrix,
    /// `H_i` embedded in the chain, `i = 1 … N`.
    site_h: Vec<CMatrix>,
    local_h: CMatrix,
    coupling: CMatrix,
    /// `V_C`, `V_H` embedded in the composite.
    v_cold: CMatrix,
    v_hot: CMatrix,
    /// Kraus operators of the heat stroke on the chain.
    heat_kraus: Vec<CMatrix>,
    /// Kraus operators of the full cycle `ℰ_w∘ℰ_q`.
    cycle_kraus: Vec<CMatrix>,
}

impl Engine {
    pub fn new(spec: &EngineSpec) -> Result<Self> {
        let chain = spec.chain_layout();
        let composite = spec.composite_layout();
        let heat_unitary = Propagator::new(&build_heat_hamiltonian(spec), spec.tau_q())?
            .unitary()
            .clone();
        let work_h = build_work_hamiltonian(spec)?;
        let work = Propagator::new(&work_h, spec.tau_w())?;
        let cold_h = spec.cold_hamiltonian();
        let hot_h = spec.hot_hamiltonian();
        let cold_state = thermal_state(&cold_h, spec.cold().temperature())?;
        let hot_state = thermal_state(&hot_h, spec.hot().temperature())?;
        let site_h = (1..=spec.num_sites())
            .map(|i| {
                spec.site_hamiltonian(i)
                    .embed(&chain)
                    .map(HermitianOperator::into_matrix)
            })
            .collect::<Result<Vec<_>>>()?;
        let local_h = spec.local_hamiltonian().into_matrix();
        let coupling = spec.internal_coupling()?.into_matrix();
        let v_cold = spec.cold_interaction().embed(&composite)?.into_matrix();
        let v_hot = spec.hot_interaction().embed(&composite)?.into_matrix();
        let heat_kraus = heat_kraus_operators(
            &heat_unitary,
            cold_state.matrix(),
            chain.total_dim(),
            hot_state.matrix(),
        );
        let cycle_kraus = heat_kraus.iter().map(|k| work.unitary() * k).collect();
        Ok(Self {
            spec: spec.clone(),
            chain,
            composite,
            heat_unitary,
            work,
            cold_state,
            hot_state,
            cold_h: cold_h.into_matrix(),
            hot_h: hot_h.into_matrix(),
            site_h,
            local_h,
            coupling,
            v_cold,
            v_hot,
            heat_kraus,
            cycle_kraus,
        })
    }

    pub fn spec(&self) -> &EngineSpec {
        &self.spec
    }

    pub fn chain_layout(&self) -> &SpaceLayout {
        &self.chain
    }

    /// `⟨Σ H_i⟩`
    pub fn local_energy(&self, rho: &DensityMatrix) -> f64 {
        trace_product(&self.local_h, rho.matrix()).re
    }

    /// `⟨H_i⟩` for 1-based site `i`.
    pub fn site_energy(&self, i: usize, rho: &DensityMatrix) -> f64 {
        trace_product(&self.site_h[i - 1], rho.matrix()).re
    }

    pub fn initial_state(&self, kind: &InitialState) -> Result<DensityMatrix> {
        match kind {
            InitialState::ColdThermal => {
                let parts = (1..=self.spec.num_sites())
                    .map(|i| thermal_state(&self.spec.site_hamiltonian(i), self.spec.cold().temperature()))
                    .collect::<Result<Vec<_>>>()?;
                tensor_compose(&parts.iter().collect::<Vec<_>>())
            }
            InitialState::Ground => {
                let parts = (1..=self.spec.num_sites())
                    .map(|i| {
                        let h = self.spec.site_hamiltonian(i);
                        let (values, vectors) = hermitian_eigen(h.matrix());
                        let k = values
                            .iter()
                            .enumerate()
                            .min_by(|a, b| a.1.total_cmp(b.1))
                            .map(|(k, _)| k)
                            .expect("sites have dimension ≥ 2");
                        let psi: Vec<C64> = vectors.column(k).iter().copied().collect();
                        DensityMatrix::pure(h.layout().clone(), &psi)
                    })
                    .collect::<Result<Vec<_>>>()?;
                tensor_compose(&parts.iter().collect::<Vec<_>>())
            }
            InitialState::MaximallyMixed => Ok(DensityMatrix::maximally_mixed(self.chain.clone())),
            InitialState::Custom(rho) => {
                self.check_layout(rho)?;
                Ok(rho.clone())
            }
        }
    }

    fn check_layout(&self, rho: &DensityMatrix) -> Result<()> {
        if rho.layout() != &self.chain {
            return Err(Error::Layout(format!(
                "state over {:?} does not live on the chain {:?}",
                rho.layout(),
                self.chain
            )));
        }
        Ok(())
    }

    /// Heat stroke on the full composite, with both heat bookkeepings.
    pub fn heat_stroke(&self, rho: &DensityMatrix) -> Result<StrokeOutcome> {
        self.check_layout(rho)?;
        let before = tensor_compose(&[&self.cold_state, rho, &self.hot_state])?;
        let u = &self.heat_unitary;
        let after = DensityMatrix::from_channel_output(self.composite.clone(), u * before.matrix() * u.adjoint());
        let labels: Vec<&str> = self.chain.labels().iter().map(String::as_str).collect();
        let rho_t = partial_trace(&after, &labels)?;
        let cold_t = partial_trace(&after, &[COLD_LABEL])?;
        let hot_t = partial_trace(&after, &[HOT_LABEL])?;
        check_channel_output(&rho_t, "heat stroke")?;

        let n = self.spec.num_sites();
        let q_c = energy_change(&self.site_h[0], rho.matrix(), rho_t.matrix());
        let q_h = energy_change(&self.site_h[n - 1], rho.matrix(), rho_t.matrix());
        let q_c_ancilla = -energy_change(&self.cold_h, self.cold_state.matrix(), cold_t.matrix());
        let q_h_ancilla = -energy_change(&self.hot_h, self.hot_state.matrix(), hot_t.matrix());
        let dv_c = energy_change(&self.v_cold, before.matrix(), after.matrix());
        let dv_h = energy_change(&self.v_hot, before.matrix(), after.matrix());
        Ok(StrokeOutcome {
            state_after: rho_t,
            q_c,
            q_h,
            q_c_ancilla,
            q_h_ancilla,
            work: 0.0,
            work_interaction: 0.0,
            // Energy lost by site and ancilla together is what the
            // interaction still holds when it is switched off.
            w_onoff_c: q_c - q_c_ancilla,
            w_onoff_h: q_h - q_h_ancilla,
            dv_c,
            dv_h,
            dv: 0.0,
        })
    }

    /// Work stroke under `H_w = Σ H_i + 𝒱_S`.
    pub fn work_stroke(&self, rho_tilde: &DensityMatrix) -> Result<StrokeOutcome> {
        self.check_layout(rho_tilde)?;
        let after = self.work.apply(rho_tilde)?;
        check_channel_output(&after, "work stroke")?;
        let work = -energy_change(&self.local_h, rho_tilde.matrix(), after.matrix());
        let work_interaction = energy_change(&self.coupling, rho_tilde.matrix(), after.matrix());
        let dv = work - work_interaction;
        let scale = 1.0f64.max(work.abs()).max(work_interaction.abs());
        if dv.abs() > DYNAMICAL_TOL * scale {
            return Err(Error::Consistency(format!(
                "work stroke does not conserve energy (residue {dv:.3e})"
            )));
        }
        Ok(StrokeOutcome {
            state_after: after,
            q_c: 0.0,
            q_h: 0.0,
            q_c_ancilla: 0.0,
            q_h_ancilla: 0.0,
            work,
            work_interaction,
            w_onoff_c: 0.0,
            w_onoff_h: 0.0,
            dv_c: 0.0,
            dv_h: 0.0,
            dv,
        })
    }

    /// `ℰ_q(ρ)` through the Kraus representation.
    pub fn heat_channel(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        self.check_layout(rho)?;
        Ok(apply_kraus(&self.heat_kraus, rho))
    }

    /// `ℰ_w(ρ̃)`
    pub fn work_channel(&self, rho_tilde: &DensityMatrix) -> Result<DensityMatrix> {
        self.work.apply(rho_tilde)
    }

    /// `ℰ_w∘ℰ_q(ρ)` through the Kraus representation.
    pub fn cycle_channel(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        self.check_layout(rho)?;
        Ok(apply_kraus(&self.cycle_kraus, rho))
    }

    pub fn run_cycles(&self, rho0: &DensityMatrix, n_cycles: usize, keep_snapshots: bool) -> Result<CycleLedger> {
        if n_cycles == 0 {
            return Err(Error::Parameter("at least one cycle is required".into()));
        }
        self.check_layout(rho0)?;
        let t_c = self.spec.cold().temperature();
        let t_h = self.spec.hot().temperature();
        let mut rows = Vec::with_capacity(n_cycles);
        let mut snapshots = keep_snapshots.then(|| Vec::with_capacity(n_cycles));
        let mut rho = rho0.clone();
        let mut entropy = von_neumann_entropy(&rho);
        let mut energy = self.local_energy(&rho);
        for n in 0..n_cycles {
            let heat = self.heat_stroke(&rho)?;
            let work = self.work_stroke(&heat.state_after)?;
            let next = work.state_after;
            let next_entropy = von_neumann_entropy(&next);
            let next_energy = self.local_energy(&next);
            rows.push(CycleRecord {
                n,
                q_c: heat.q_c,
                q_h: heat.q_h,
                w: work.work,
                de: next_energy - energy,
                sigma: next_entropy - entropy - heat.q_c_ancilla / t_c - heat.q_h_ancilla / t_h,
                entropy,
                q_c_ancilla: heat.q_c_ancilla,
                q_h_ancilla: heat.q_h_ancilla,
                w_onoff_c: heat.w_onoff_c,
                w_onoff_h: heat.w_onoff_h,
            });
            if let Some(s) = snapshots.as_mut() {
                s.push(CycleSnapshot {
                    rho: rho.clone(),
                    rho_tilde: heat.state_after.clone(),
                });
            }
            rho = next;
            entropy = next_entropy;
            energy = next_energy;
        }
        Ok(CycleLedger {
            rows,
            snapshots,
            final_state: rho,
        })
    }

    pub fn find_limit_cycle(&self, options: &LimitCycleOptions) -> Result<LimitCycleReport> {
        if options.tol.is_nan() || options.tol <= 0.0 {
            return Err(Error::Parameter(format!(
                "tolerance must be positive, got {}",
                options.tol
            )));
        }
        match options.method {
            SolverMethod::Iterate => {
                let mut rho = self.initial_state(&options.initial)?;
                let mut residual = f64::INFINITY;
                for cycle in 1..=options.max_cycles {
                    let next = apply_kraus(&self.cycle_kraus, &rho);
                    residual = next.trace_distance(&rho)?;
                    rho = next;
                    if residual < options.tol {
                        let mut report = self.limit_cycle_thermo(&rho)?;
                        report.cycles_to_converge = cycle;
                        return Ok(report);
                    }
                }
                Err(Error::Convergence {
                    cycles: options.max_cycles,
                    residual,
                })
            }
            SolverMethod::Spectral => {
                let fixed = spectral_fixed_point(&self.cycle_kraus, &self.chain)?;
                let mut report = self.limit_cycle_thermo(&fixed.state)?;
                report.method = SolverMethod::Spectral;
                report.subleading_eigenvalue = Some(fixed.subleading);
                Ok(report)
            }
        }
    }

    /// Thermodynamics of the cycle through `ρ*`.
    pub fn limit_cycle_thermo(&self, rho_star: &DensityMatrix) -> Result<LimitCycleReport> {
        self.check_layout(rho_star)?;
        let heat = self.heat_stroke(rho_star)?;
        let rho_tilde = heat.state_after;
        let back = self.work.apply(&rho_tilde)?;
        let residual = back.trace_distance(rho_star)?;
        let n = self.spec.num_sites();
        let q_c = self.site_energy(1, &rho_tilde) - self.site_energy(1, rho_star);
        let q_h = self.site_energy(n, &rho_tilde) - self.site_energy(n, rho_star);
        let w = -(self.local_energy(rho_star) - self.local_energy(&rho_tilde));
        let t_c = self.spec.cold().temperature();
        let t_h = self.spec.hot().temperature();
        let sigma = -heat.q_c_ancilla / t_c - heat.q_h_ancilla / t_h;
        let internal_drift = (2..n)
            .map(|i| (self.site_energy(i, rho_star) - self.site_energy(i, &rho_tilde)).abs())
            .collect();
        let duration = self.spec.tau_q() + self.spec.tau_w();
        Ok(LimitCycleReport {
            rho_star: rho_star.clone(),
            rho_tilde_star: rho_tilde,
            q_c,
            q_h,
            w,
            q_c_ancilla: heat.q_c_ancilla,
            q_h_ancilla: heat.q_h_ancilla,
            sigma,
            efficiency: (q_h > REGIME_THRESHOLD).then(|| w / q_h),
            power: if duration > 0.0 { w / duration } else { 0.0 },
            internal_drift,
            cycles_to_converge: 0,
            residual,
            method: SolverMethod::Iterate,
            subleading_eigenvalue: None,
        })
    }
}

pub fn heat_stroke(rho: &DensityMatrix, spec: &EngineSpec) -> Result<StrokeOutcome> {
    Engine::new(spec)?.heat_stroke(rho)
}

pub fn work_stroke(rho_tilde: &DensityMatrix, spec: &EngineSpec) -> Result<StrokeOutcome> {
    Engine::new(spec)?.work_stroke(rho_tilde)
}

pub fn run_cycles(rho0: &DensityMatrix, spec: &EngineSpec, n_cycles: usize) -> Result<CycleLedger> {
    Engine::new(spec)?.run_cycles(rho0, n_cycles, false)
}

pub fn find_limit_cycle(spec: &EngineSpec, options: &LimitCycleOptions) -> Result<LimitCycleReport> {
    Engine::new(spec)?.find_limit_cycle(options)
}

/// Kraus operators `√(p_a q_b) (⟨c| ⊗ 1 ⊗ ⟨h|) U (|u_a⟩ ⊗ 1 ⊗ |v_b⟩)` of
/// `ρ ↦ tr_CH{U(ρ_C ⊗ ρ ⊗ ρ_H)U†}`, where `ρ_C = Σ p_a |u_a⟩⟨u_a|` and
/// `ρ_H = Σ q_b |v_b⟩⟨v_b|`.
fn heat_kraus_operators(u: &CMatrix, rho_c: &CMatrix, ds: usize, rho_h: &CMatrix) -> Vec<CMatrix> {
    let (pc, vc) = hermitian_eigen(rho_c);
    let (ph, vh) = hermitian_eigen(rho_h);
    let (dc, dh) = (pc.len(), ph.len());
    let rotation = vc.kronecker(&CMatrix::identity(ds, ds)).kronecker(&vh);
    let ut = u * rotation;
    let idx = |c: usize, s: usize, h: usize| (c * ds + s) * dh + h;
    let mut out = Vec::new();
    for a in 0..dc {
        for b in 0..dh {
            let weight = pc[a].max(0.0) * ph[b].max(0.0);
            if weight == 0.0 {
                continue;
            }
            let amp = C64::new(weight.sqrt(), 0.0);
            for c in 0..dc {
                for h in 0..dh {
                    let k = CMatrix::from_fn(ds, ds, |s, s2| amp * ut[(idx(c, s, h), idx(a, s2, b))]);
                    out.push(k);
                }
            }
        }
    }
    out
}

fn apply_kraus(kraus: &[CMatrix], rho: &DensityMatrix) -> DensityMatrix {
    let d = rho.dim();
    let mut acc = CMatrix::zeros(d, d);
    for k in kraus {
        acc += k * rho.matrix() * k.adjoint();
    }
    DensityMatrix::from_channel_output(rho.layout().clone(), acc)
}

struct FixedPoint {
    state: DensityMatrix,
    subleading: f64,
}

/// Row-major vectorization: `ρ_{ij}` sits at `i·d + j`, and `ρ ↦ AρA†`
/// becomes `A ⊗ conj(A)`.
fn transfer_matrix(kraus: &[CMatrix]) -> CMatrix {
    let d = kraus[0].nrows();
    let mut m = CMatrix::zeros(d * d, d * d);
    for k in kraus {
        m += k.kronecker(&k.conjugate());
    }
    m
}

/// Connected components of the sparsity graph of `m`. Entries below
/// `threshold` count as zero.
fn invariant_blocks(m: &CMatrix, threshold: f64) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for j in 0..n {
        for i in 0..n {
            if i != j && m[(i, j)].norm() > threshold {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[slot[r]].push(i);
    }
    blocks
}

fn sub_block(m: &CMatrix, idx: &[usize]) -> CMatrix {
    CMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

/// Fixed point of a trace-preserving channel from its transfer matrix.
///
/// The transfer matrix is split into invariant blocks (a channel covariant
/// under a conserved charge is block diagonal). The block holding the
/// populations carries the fixed point; in it one row of `M − 1` is replaced
/// by the trace functional and the bordered system is solved by LU.
fn spectral_fixed_point(kraus: &[CMatrix], layout: &SpaceLayout) -> Result<FixedPoint> {
    let d = layout.total_dim();
    let m = transfer_matrix(kraus);
    let scale = crate::hilbert::max_abs(&m).max(1.0);
    let blocks = invariant_blocks(&m, 1e-14 * scale);
    let is_diag = |a: usize| a / d == a % d;
    let mut population_blocks = blocks.iter().enumerate().filter(|(_, b)| b.iter().any(|&a| is_diag(a)));
    let (main, idx) = population_blocks
        .next()
        .ok_or_else(|| Error::Consistency("no block carries populations".into()))?;
    if population_blocks.next().is_some() {
        return Err(Error::Degenerate { subleading: 1.0 });
    }
    let mb = sub_block(&m, idx);
    let k = idx.len();
    let pivot = idx.iter().position(|&a| is_diag(a)).expect("block holds a diagonal");
    let mut system = &mb - CMatrix::identity(k, k);
    for j in 0..k {
        system[(pivot, j)] = if is_diag(idx[j]) { ONE } else { ZERO };
    }
    let mut rhs = DVector::from_element(k, ZERO);
    rhs[pivot] = ONE;
    let solution = system.lu().solve(&rhs).ok_or(Error::Degenerate { subleading: 1.0 })?;
    if solution.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Degenerate { subleading: 1.0 });
    }

    let mut subleading = 0.0f64;
    for (b, block) in blocks.iter().enumerate() {
        let r = if b == main {
            let trace_mask: Vec<bool> = idx.iter().map(|&a| is_diag(a)).collect();
            spectral_radius(&mb, Some((&solution, &trace_mask)))
        } else if block.len() == 1 {
            m[(block[0], block[0])].norm()
        } else {
            spectral_radius(&sub_block(&m, block), None)
        };
        subleading = subleading.max(r);
    }
    if subleading >= 1.0 - DEGENERACY_GAP {
        return Err(Error::Degenerate { subleading });
    }

    let mut rho = CMatrix::zeros(d, d);
    for (j, &a) in idx.iter().enumerate() {
        rho[(a / d, a % d)] = solution[j];
    }
    let rho = hermitize(&rho);
    let state = DensityMatrix::new(layout.clone(), rho)
        .map_err(|e| Error::Consistency(format!("spectral fixed point is not a state: {e}")))?;
    Ok(FixedPoint { state, subleading })
}

/// Power-iteration estimate of the spectral radius of `m`. With a deflation
/// `(v, mask)` the map is `x ↦ Mx − v Σ_{mask} x`, which removes the unit
/// eigenvalue carried by `v` when the masked sum is its left eigenvector.
fn spectral_radius(m: &CMatrix, deflation: Option<(&DVector<C64>, &[bool])>) -> f64 {
    const MAX_STEPS: usize = 4000;
    const WINDOW: usize = 25;
    let n = m.nrows();
    let mut x = DVector::from_fn(n, |i, _| {
        let a = ((i * 7919 + 13) % 1009) as f64 / 1009.0 - 0.5;
        let b = ((i * 104_729 + 7) % 997) as f64 / 997.0 - 0.5;
        C64::new(a, b)
    });
    let apply = |x: &DVector<C64>| {
        let mut y = m * x;
        if let Some((v, mask)) = deflation {
            let t: C64 = x.iter().zip(mask).filter(|(_, &k)| k).map(|(z, _)| *z).sum();
            y -= v * t;
        }
        y
    };
    let mut log_growth = Vec::with_capacity(MAX_STEPS);
    let mut previous = f64::NAN;
    for step in 0..MAX_STEPS {
        let norm = x.norm();
        if norm == 0.0 || !norm.is_finite() {
            return 0.0;
        }
        x /= C64::new(norm, 0.0);
        let y = apply(&x);
        let growth = y.norm();
        if growth == 0.0 {
            return 0.0;
        }
        log_growth.push(growth.ln());
        x = y;
        if (step + 1) % WINDOW == 0 {
            let tail = &log_growth[log_growth.len() - WINDOW..];
            let estimate = (tail.iter().sum::<f64>() / WINDOW as f64).exp();
            if (estimate - previous).abs() <= 1e-10 * estimate.max(1e-300) {
                return estimate;
            }
            previous = estimate;
        }
    }
    previous
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{BathSpec, CouplingSpec, SiteSpec};
    use approx::assert_abs_diff_eq;

    fn fig2() -> EngineSpec {
        EngineSpec::qubit_chain(
            &[0.75, 1.0],
            CouplingSpec::partial_swap_uniform(0.3, 2),
            (0.4, 0.3),
            (0.8, 0.3),
            1.0,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn equilibrium_is_a_fixed_point_of_the_heat_stroke() {
        let spec = EngineSpec::qubit_chain(
            &[1.0, 1.0, 1.0],
            CouplingSpec::xx(0.5),
            (0.7, 0.4),
            (0.7, 0.4),
            0.8,
            0.6,
        )
        .unwrap();
        let engine = Engine::new(&spec).unwrap();
        let rho = engine.initial_state(&InitialState::ColdThermal).unwrap();
        let out = engine.heat_stroke(&rho).unwrap();
        assert!(out.state_after.trace_distance(&rho).unwrap() < 1e-13);
        assert_abs_diff_eq!(out.q_c, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(out.q_h, 0.0, epsilon = 1e-14);
        let ledger = engine.run_cycles(&rho, 5, false).unwrap();
        for r in &ledger.rows {
            for v in [r.q_c, r.q_h, r.w, r.de, r.sigma] {
                assert_abs_diff_eq!(v, 0.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn zero_coupling_is_the_identity() {
        let spec = EngineSpec::qubit_chain(
            &[0.75, 1.0],
            CouplingSpec::partial_swap_uniform(0.0, 2),
            (0.4, 0.0),
            (0.8, 0.0),
            1.0,
            1.0,
        )
        .unwrap();
        let engine = Engine::new(&spec).unwrap();
        let rho = engine.initial_state(&InitialState::Ground).unwrap();
        let out = engine.heat_stroke(&rho).unwrap();
        assert!(out.state_after.trace_distance(&rho).unwrap() < 1e-14);
        for v in [
            out.q_c,
            out.q_h,
            out.q_c_ancilla,
            out.q_h_ancilla,
            out.w_onoff_c,
            out.dv_c,
        ] {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-15);
        }
        let report = engine
            .find_limit_cycle(&LimitCycleOptions {
                method: SolverMethod::Iterate,
                ..Default::default()
            })
            .unwrap();
        assert_eq!(report.regime(), Regime::Idle);
        assert_eq!(report.efficiency, None);
        assert!(matches!(
            engine.find_limit_cycle(&LimitCycleOptions::default()),
            Err(Error::Degenerate { .. })
        ));
    }

    #[test]
    fn heat_bookkeepings_agree_for_resonant_couplings() {
        let engine = Engine::new(&fig2()).unwrap();
        let rho = engine.initial_state(&InitialState::Ground).unwrap();
        let out = engine.heat_stroke(&rho).unwrap();
        assert!(out.q_c.abs() > 1e-3);
        assert_abs_diff_eq!(out.q_c, out.q_c_ancilla, epsilon = 1e-14);
        assert_abs_diff_eq!(out.q_h, out.q_h_ancilla, epsilon = 1e-14);
        assert_abs_diff_eq!(out.w_onoff_c, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(out.dv_c, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn onoff_work_is_the_energy_left_in_the_interaction() {
        let cold = BathSpec::qubit(0.9, 0.4, 0.3).unwrap();
        let hot = BathSpec::qubit(1.0, 0.8, 0.3).unwrap();
        let spec = fig2().with_baths(cold, hot).unwrap();
        let engine = Engine::new(&spec).unwrap();
        let rho = engine.initial_state(&InitialState::ColdThermal).unwrap();
        let out = engine.heat_stroke(&rho).unwrap();
        assert!(out.w_onoff_c.abs() > 1e-4);
        assert_abs_diff_eq!(out.w_onoff_c, -out.dv_c, epsilon = 1e-14);
        assert_abs_diff_eq!(out.q_c_ancilla - out.q_c, -out.w_onoff_c, epsilon = 1e-14);
        assert_abs_diff_eq!(out.w_onoff_h, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn work_stroke_bookkeeping() {
        let engine = Engine::new(&fig2()).unwrap();
        let rho = engine.initial_state(&InitialState::Ground).unwrap();
        let heat = engine.heat_stroke(&rho).unwrap();
        let work = engine.work_stroke(&heat.state_after).unwrap();
        assert!(work.work.abs() > 1e-6);
        assert_abs_diff_eq!(work.work, work.work_interaction, epsilon = 1e-14);
        assert_eq!(work.q_c, 0.0);

        let idle = Engine::new(&fig2().with_durations(1.0, 0.0).unwrap()).unwrap();
        let w = idle.work_stroke(&heat.state_after).unwrap();
        assert_eq!(w.work, 0.0);

        let resonant = EngineSpec::qubit_chain(
            &[1.0, 1.0],
            CouplingSpec::partial_swap_uniform(0.3, 2),
            (0.4, 0.3),
            (0.8, 0.3),
            1.0,
            1.3,
        )
        .unwrap();
        let e = Engine::new(&resonant).unwrap();
        let h = e.heat_stroke(&e.initial_state(&InitialState::Ground).unwrap()).unwrap();
        assert_abs_diff_eq!(e.work_stroke(&h.state_after).unwrap().work, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn kraus_channel_matches_the_composite() {
        let spec = EngineSpec::qubit_chain(
            &[0.6, 0.8, 1.1],
            CouplingSpec::xxz(0.4, 0.3),
            (0.3, 0.7),
            (0.9, 0.4),
            1.3,
            0.7,
        )
        .unwrap();
        let engine = Engine::new(&spec).unwrap();
        let rho = engine.initial_state(&InitialState::Ground).unwrap();
        let rho = engine.work_channel(&engine.heat_channel(&rho).unwrap()).unwrap();
        let full = engine.heat_stroke(&rho).unwrap().state_after;
        let fast = engine.heat_channel(&rho).unwrap();
        assert!(full.trace_distance(&fast).unwrap() < 1e-14);
    }

    #[test]
    fn ledger_laws_and_second_law() {
        let engine = Engine::new(&fig2()).unwrap();
        let rho = engine.initial_state(&InitialState::Ground).unwrap();
        let ledger = engine.run_cycles(&rho, 30, true).unwrap();
        assert_eq!(ledger.rows.len(), 30);
        assert_eq!(ledger.snapshots.as_ref().unwrap().len(), 30);
        assert!(ledger.first_law_residual() < 1e-14);
        assert!(ledger.min_entropy_production() >= -1e-12);
        // Work starts small and settles on a positive plateau.
        let w: Vec<f64> = ledger.rows.iter().map(|r| r.w).collect();
        assert!(w[0].abs() < w[29].abs());
        assert!(w[29] > 0.0);
    }

    #[test]
    fn methods_agree_on_fig2() {
        let engine = Engine::new(&fig2()).unwrap();
        let spectral = engine.find_limit_cycle(&LimitCycleOptions::default()).unwrap();
        let iterate = engine
            .find_limit_cycle(&LimitCycleOptions {
                method: SolverMethod::Iterate,
                ..Default::default()
            })
            .unwrap();
        assert!(spectral.rho_star.trace_distance(&iterate.rho_star).unwrap() < 1e-11);
        assert!(spectral.residual < 1e-13);
        assert!(iterate.cycles_to_converge > 10);
        let mu = spectral.subleading_eigenvalue.unwrap();
        let lambda = (1.0 - (0.6f64).cos()) / 2.0;
        assert!(mu >= 1.0 - lambda - 1e-9 && mu < 1.0);
        assert_eq!(spectral.regime(), Regime::Engine);
        assert_abs_diff_eq!(spectral.efficiency.unwrap(), 0.25, epsilon = 1e-10);
        assert_abs_diff_eq!(spectral.w, spectral.q_c + spectral.q_h, epsilon = 1e-14);
        let diag = otto_check(engine.spec(), &spectral);
        assert!(diag.is_applicable() && diag.passed());
    }

    #[test]
    fn refrigerator_below_the_carnot_ratio() {
        let spec = EngineSpec::qubit_chain(
            &[0.3, 1.0],
            CouplingSpec::partial_swap_uniform(0.3, 2),
            (0.4, 0.3),
            (0.8, 0.3),
            1.0,
            1.0,
        )
        .unwrap();
        let report = find_limit_cycle(&spec, &LimitCycleOptions::default()).unwrap();
        assert_eq!(report.regime(), Regime::Refrigerator);
        assert!(report.q_c > 0.0);
        assert_eq!(report.efficiency, None);
    }

    #[test]
    fn equal_frequencies_only_conduct() {
        let spec = EngineSpec::qubit_chain(
            &[1.0, 1.0, 1.0],
            CouplingSpec::xx(0.5),
            (0.3, 0.5),
            (0.9, 0.5),
            0.8,
            0.6,
        )
        .unwrap();
        let report = find_limit_cycle(&spec, &LimitCycleOptions::default()).unwrap();
        assert_abs_diff_eq!(report.q_c, -report.q_h, epsilon = 1e-12);
        assert!(report.w.abs() < 1e-12);
        assert_eq!(report.regime(), Regime::Conductor);
    }

    #[test]
    fn regime_sign_patterns() {
        assert_eq!(classify_currents(-0.3, 0.5, 0.2), Regime::Engine);
        assert_eq!(classify_currents(0.1, -0.3, -0.2), Regime::Refrigerator);
        assert_eq!(classify_currents(-0.5, 0.3, -0.2), Regime::Accelerator);
        assert_eq!(classify_currents(-0.1, -0.1, -0.2), Regime::Heater);
        assert_eq!(classify_currents(1e-13, -1e-13, 0.0), Regime::Idle);
        assert_eq!(classify_currents(-0.1, 0.1, 0.0), Regime::Conductor);
        for r in ["engine", "refrigerator", "accelerator", "heater", "conductor", "idle"] {
            assert_eq!(r.parse::<Regime>().unwrap().to_string(), r);
        }
    }

    #[test]
    fn otto_check_gates_on_the_coupling_form() {
        let spec = EngineSpec::qubit_chain(
            &[1.5, 1.75, 2.0],
            CouplingSpec::xxz(0.8, 0.7),
            (0.2, 1.0),
            (0.8, 1.0),
            0.5,
            0.25,
        )
        .unwrap();
        let report = find_limit_cycle(&spec, &LimitCycleOptions::default()).unwrap();
        let diag = otto_check(&spec, &report);
        assert!(!diag.is_applicable());
        assert!(diag.heat_ratio.is_none());
    }

    #[test]
    fn iterate_reports_non_convergence() {
        let engine = Engine::new(&fig2()).unwrap();
        let err = engine
            .find_limit_cycle(&LimitCycleOptions {
                method: SolverMethod::Iterate,
                max_cycles: 3,
                ..Default::default()
            })
            .unwrap_err();
        assert!(matches!(err, Error::Convergence { cycles: 3, residual } if residual > 0.0));
    }

    #[test]
    fn layout_mismatch_is_rejected() {
        let engine = Engine::new(&fig2()).unwrap();
        let wrong = DensityMatrix::maximally_mixed(SpaceLayout::single("X", 4).unwrap());
        assert!(matches!(engine.heat_stroke(&wrong), Err(Error::Layout(_))));
        assert!(matches!(engine.work_stroke(&wrong), Err(Error::Layout(_))));
    }

    #[test]
    fn qutrit_sites_run() {
        let h = CMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::new(0.0, 0.0),
            C64::new(0.7, 0.0),
            C64::new(1.5, 0.0),
        ]));
        let site = SiteSpec::new(h.clone()).unwrap();
        let bond = CMatrix::from_fn(
            9,
            9,
            |i, j| {
                if i + j == 8 && i != j {
                    C64::new(0.2, 0.0)
                } else {
                    ZERO
                }
            },
        );
        let anc_v = CMatrix::from_fn(9, 9, |i, j| {
            if (i == 1 && j == 3) || (i == 3 && j == 1) {
                C64::new(0.3, 0.0)
            } else {
                ZERO
            }
        });
        let cold = BathSpec::new(h.clone(), 0.4, anc_v.clone(), 0.3).unwrap();
        let hot = BathSpec::new(h, 0.9, anc_v, 0.3).unwrap();
        let spec = EngineSpec::new(
            vec![site.clone(), site],
            cold,
            hot,
            CouplingSpec::Explicit { bonds: vec![bond] },
            1.1,
            0.9,
        )
        .unwrap();
        let engine = Engine::new(&spec).unwrap();
        let ledger = engine
            .run_cycles(&engine.initial_state(&InitialState::Ground).unwrap(), 10, false)
            .unwrap();
        assert!(ledger.first_law_residual() < 1e-13);
        assert!(ledger.min_entropy_production() >= -1e-12);
    }
}
