//! Parameter grids solved point by point to the limit cycle.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::config::SweepConfig;
use crate::emit::{Cell, Table};
use crate::engine::{linear_frequencies, BathSpec, CouplingSpec, EngineSpec, SiteSpec};
use crate::error::{Error, Result};
use crate::strobe::{otto_check, Engine, LimitCycleOptions, LimitCycleReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AxisName {
    TauQ,
    TauW,
    /// Heat-stroke swap probability; sets `τ_q = arccos(1 − 2λ)/(2g_C)`.
    Lambda,
    /// Both bath couplings.
    G,
    Jz,
    /// Chain length, frequencies interpolated linearly between the ends.
    N,
    /// `ω₁/ω_N` with `ω_N` fixed.
    OmegaRatio,
}

impl AxisName {
    pub const ALL: [AxisName; 7] = [
        AxisName::TauQ,
        AxisName::TauW,
        AxisName::Lambda,
        AxisName::G,
        AxisName::Jz,
        AxisName::N,
        AxisName::OmegaRatio,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AxisName::TauQ => "tau_q",
            AxisName::TauW => "tau_w",
            AxisName::Lambda => "lambda",
            AxisName::G => "g",
            AxisName::Jz => "J_z",
            AxisName::N => "N",
            AxisName::OmegaRatio => "omega_ratio",
        }
    }

    /// Axes are applied in this order whatever their declaration order, so
    /// that `λ` always sees the final bath coupling and chain.
    fn application_rank(&self) -> usize {
        match self {
            AxisName::N => 0,
            AxisName::OmegaRatio => 1,
            AxisName::G => 2,
            AxisName::Jz => 3,
            AxisName::TauW => 4,
            AxisName::TauQ => 5,
            AxisName::Lambda => 6,
        }
    }
}

impl fmt::Display for AxisName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AxisName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        AxisName::ALL.into_iter().find(|a| a.as_str() == s).ok_or_else(|| {
            let names: Vec<&str> = AxisName::ALL.iter().map(AxisName::as_str).collect();
            Error::Config(format!(
                "unknown sweep axis {s:?} (expected one of {})",
                names.join(", ")
            ))
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepAxis {
    pub name: AxisName,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl SweepAxis {
    pub fn new(name: AxisName, min: f64, max: f64, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::Config(format!(
                "axis {name} needs at least 2 points, got {points}"
            )));
        }
        if !min.is_finite() || !max.is_finite() {
            return Err(Error::Config(format!("axis {name} has a non-finite range")));
        }
        let axis = Self { name, min, max, points };
        if name == AxisName::N {
            for v in axis.values() {
                if v.fract() != 0.0 || v < 2.0 {
                    return Err(Error::Config(format!("axis N must step through integers ≥ 2, got {v}")));
                }
            }
        }
        Ok(axis)
    }

    /// `points` evenly spaced values from `min` to `max`, both included.
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    self.max
                } else {
                    self.min + (self.max - self.min) * i as f64 / (n - 1) as f64
                }
            })
            .collect()
    }
}

pub const DEFAULT_OUTPUTS: [&str; 11] = [
    "W",
    "Q_C",
    "Q_H",
    "P",
    "Sigma",
    "efficiency",
    "regime",
    "cycles",
    "residual",
    "subleading",
    "drift",
];

#[derive(Clone, Debug)]
pub struct SweepPlan {
    pub base: EngineSpec,
    pub axes: Vec<SweepAxis>,
    pub outputs: Vec<String>,
}

impl SweepPlan {
    pub fn new(base: EngineSpec, axes: Vec<SweepAxis>, outputs: Option<Vec<String>>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::Config(format!("a sweep has 1 or 2 axes, got {}", axes.len())));
        }
        if axes.len() == 2 && axes[0].name == axes[1].name {
            return Err(Error::Config(format!("axis {} is declared twice", axes[0].name)));
        }
        let outputs = outputs.unwrap_or_else(|| DEFAULT_OUTPUTS.iter().map(|s| s.to_string()).collect());
        for o in &outputs {
            if !DEFAULT_OUTPUTS.contains(&o.as_str()) && o != "otto" {
                return Err(Error::Config(format!("unknown sweep output {o:?}")));
            }
        }
        let plan = Self { base, axes, outputs };
        // Resolve every axis once against the base so bad names fail early.
        for axis in &plan.axes {
            apply_axis(&plan.base, axis.name, axis.values()[0])?;
        }
        Ok(plan)
    }

    pub fn from_config(base: EngineSpec, cfg: &SweepConfig) -> Result<Self> {
        let axes = cfg
            .axes
            .iter()
            .map(|a| SweepAxis::new(a.name.parse()?, a.min, a.max, a.points))
            .collect::<Result<Vec<_>>>()?;
        Self::new(base, axes, cfg.outputs.clone())
    }

    /// Grid coordinates in row-major order over the declared axes.
    pub fn grid(&self) -> Vec<Vec<f64>> {
        let values: Vec<Vec<f64>> = self.axes.iter().map(SweepAxis::values).collect();
        match values.as_slice() {
            [a] => a.iter().map(|&x| vec![x]).collect(),
            [a, b] => a.iter().flat_map(|&x| b.iter().map(move |&y| vec![x, y])).collect(),
            _ => unreachable!("validated at construction"),
        }
    }

    /// Spec at one grid point.
    pub fn spec_at(&self, coords: &[f64]) -> Result<EngineSpec> {
        let mut order: Vec<usize> = (0..self.axes.len()).collect();
        order.sort_by_key(|&k| self.axes[k].name.application_rank());
        let mut spec = self.base.clone();
        for k in order {
            spec = apply_axis(&spec, self.axes[k].name, coords[k])?;
        }
        Ok(spec)
    }
}

fn requalify_bath(b: &BathSpec, omega: f64, g: f64) -> Result<BathSpec> {
    let f = b
        .frequency()
        .ok_or_else(|| Error::Config("axis needs qubit ancillas with a frequency".into()))?;
    let rebuilt = BathSpec::qubit(f, b.temperature(), b.coupling())?;
    if &rebuilt != b {
        return Err(Error::Config("axis needs partial-swap ancilla couplings".into()));
    }
    BathSpec::qubit(omega, b.temperature(), g)
}

fn endpoint_frequencies(spec: &EngineSpec) -> Result<Vec<f64>> {
    spec.frequencies()
        .filter(|_| spec.sites().iter().all(SiteSpec::is_qubit))
        .ok_or_else(|| Error::Config("axis needs a qubit chain with site frequencies".into()))
}

/// Rebuilds the chain with new frequencies. An ancilla resonant with its
/// boundary site stays resonant; a detuned one keeps its frequency.
fn with_frequencies(spec: &EngineSpec, omegas: &[f64]) -> Result<EngineSpec> {
    let old = endpoint_frequencies(spec)?;
    let n = omegas.len();
    let coupling = match spec.coupling() {
        CouplingSpec::PartialSwap { g } => {
            if g.iter().any(|x| *x != g[0]) {
                return Err(Error::Config("resizing needs a uniform partial swap".into()));
            }
            CouplingSpec::partial_swap_uniform(g[0], n)
        }
        c @ CouplingSpec::Xyz { .. } => c.clone(),
        CouplingSpec::Explicit { .. } => return Err(Error::Config("explicit bonds cannot be rebuilt".into())),
    };
    let follow = |b: &BathSpec, old_site: f64, new_site: f64| {
        let f = b.frequency().unwrap_or(old_site);
        let target = if f == old_site { new_site } else { f };
        requalify_bath(b, target, b.coupling())
    };
    let cold = follow(spec.cold(), old[0], omegas[0])?;
    let hot = follow(spec.hot(), old[old.len() - 1], omegas[n - 1])?;
    let sites = omegas.iter().map(|&w| SiteSpec::qubit(w)).collect::<Result<Vec<_>>>()?;
    EngineSpec::new(sites, cold, hot, coupling, spec.tau_q(), spec.tau_w())
}

/// `spec` with one parameter replaced.
pub fn apply_axis(spec: &EngineSpec, axis: AxisName, value: f64) -> Result<EngineSpec> {
    match axis {
        AxisName::TauQ => spec.with_durations(value, spec.tau_w()),
        AxisName::TauW => spec.with_durations(spec.tau_q(), value),
        AxisName::Lambda => {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::Config(format!("lambda must lie in [0, 1], got {value}")));
            }
            let g = spec.cold().coupling();
            if g.is_nan() || g <= 0.0 {
                return Err(Error::Config(
                    "a lambda axis needs a positive cold-bath coupling".into(),
                ));
            }
            spec.with_durations(tau_q_for_lambda(value, g), spec.tau_w())
        }
        AxisName::G => {
            let cold = requalify_bath(spec.cold(), spec.cold().frequency().unwrap_or(0.0), value)?;
            let hot = requalify_bath(spec.hot(), spec.hot().frequency().unwrap_or(0.0), value)?;
            spec.with_baths(cold, hot)
        }
        AxisName::Jz => match spec.coupling() {
            &CouplingSpec::Xyz { jx, jy, .. } => spec.with_coupling(CouplingSpec::Xyz { jx, jy, jz: value }),
            _ => Err(Error::Config("a J_z axis needs an xx, xxz or xyz coupling".into())),
        },
        AxisName::N => {
            let w = endpoint_frequencies(spec)?;
            let n = value as usize;
            with_frequencies(spec, &linear_frequencies(w[0], w[w.len() - 1], n))
        }
        AxisName::OmegaRatio => {
            let w = endpoint_frequencies(spec)?;
            let last = w[w.len() - 1];
            with_frequencies(spec, &linear_frequencies(value * last, last, w.len()))
        }
    }
}

/// Principal branch of `λ = sin²(gτ_q)`.
pub fn tau_q_for_lambda(lambda: f64, g: f64) -> f64 {
    (1.0 - 2.0 * lambda).clamp(-1.0, 1.0).acos() / (2.0 * g)
}

#[derive(Clone, Debug, Default)]
pub struct SweepOptions {
    pub solver: LimitCycleOptions,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub coords: Vec<f64>,
    pub outcome: std::result::Result<LimitCycleReport, String>,
    /// Otto efficiency check passed, when applicable.
    pub otto_ok: Option<bool>,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub axes: Vec<AxisName>,
    pub outputs: Vec<String>,
    pub points: Vec<SweepPoint>,
}

fn solve_point(plan: &SweepPlan, coords: Vec<f64>, solver: &LimitCycleOptions) -> SweepPoint {
    let run = || -> Result<(LimitCycleReport, Option<bool>)> {
        let spec = plan.spec_at(&coords)?;
        let report = Engine::new(&spec)?.find_limit_cycle(solver)?;
        let diag = otto_check(&spec, &report);
        let ok = diag.is_applicable().then(|| diag.passed());
        Ok((report, ok))
    };
    match run() {
        Ok((report, otto_ok)) => SweepPoint {
            coords,
            outcome: Ok(report),
            otto_ok,
        },
        Err(e) => SweepPoint {
            coords,
            outcome: Err(e.to_string()),
            otto_ok: None,
        },
    }
}

/// Solves every grid point. Results follow the row-major grid order for any
/// number of workers; failures are recorded per row.
pub fn run_sweep(plan: &SweepPlan, options: &SweepOptions) -> Result<SweepResult> {
    let grid = plan.grid();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs)
        .build()
        .map_err(|e| Error::Parameter(format!("cannot start worker pool: {e}")))?;
    let points = pool.install(|| {
        grid.into_par_iter()
            .map(|coords| solve_point(plan, coords, &options.solver))
            .collect()
    });
    Ok(SweepResult {
        axes: plan.axes.iter().map(|a| a.name).collect(),
        outputs: plan.outputs.clone(),
        points,
    })
}

impl SweepResult {
    pub fn reports(&self) -> impl Iterator<Item = Option<&LimitCycleReport>> {
        self.points.iter().map(|p| p.outcome.as_ref().ok())
    }

    pub fn to_table(&self) -> Table {
        let mut columns: Vec<String> = self.axes.iter().map(|a| a.to_string()).collect();
        columns.extend(self.outputs.iter().cloned());
        columns.push("status".into());
        let mut t = Table::new(columns);
        for p in &self.points {
            let mut row: Vec<Cell> = p.coords.iter().map(|&x| Cell::Float(x)).collect();
            for o in &self.outputs {
                row.push(match &p.outcome {
                    Ok(r) => report_cell(r, o, p.otto_ok),
                    Err(_) => Cell::Missing,
                });
            }
            row.push(Cell::Text(match &p.outcome {
                Ok(_) => "ok".into(),
                Err(e) => e.clone(),
            }));
            t.push(row);
        }
        t
    }
}

fn report_cell(r: &LimitCycleReport, name: &str, otto_ok: Option<bool>) -> Cell {
    match name {
        "W" => Cell::Float(r.w),
        "Q_C" => Cell::Float(r.q_c),
        "Q_H" => Cell::Float(r.q_h),
        "P" => Cell::Float(r.power),
        "Sigma" => Cell::Float(r.sigma),
        "efficiency" => Cell::opt_float(r.efficiency),
        "regime" => Cell::Text(r.regime().to_string()),
        "cycles" => Cell::Int(r.cycles_to_converge as i64),
        "residual" => Cell::Float(r.residual),
        "subleading" => Cell::opt_float(r.subleading_eigenvalue),
        "drift" => Cell::Float(r.max_internal_drift()),
        "otto" => match otto_ok {
            Some(true) => Cell::Text("pass".into()),
            Some(false) => Cell::Text("fail".into()),
            None => Cell::Text("not-applicable".into()),
        },
        _ => Cell::Missing,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
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
    fn axis_values_and_validation() {
        let a = SweepAxis::new(AxisName::TauQ, 0.5, 2.0, 4).unwrap();
        assert_eq!(a.values(), vec![0.5, 1.0, 1.5, 2.0]);
        assert!(SweepAxis::new(AxisName::TauQ, 0.5, 2.0, 1).is_err());
        assert!(SweepAxis::new(AxisName::N, 2.0, 5.0, 3).is_err());
        assert_eq!(
            SweepAxis::new(AxisName::N, 3.0, 5.0, 3).unwrap().values(),
            vec![3.0, 4.0, 5.0]
        );
        assert!("tau".parse::<AxisName>().is_err());
        for a in AxisName::ALL {
            assert_eq!(a.as_str().parse::<AxisName>().unwrap(), a);
        }
    }

    #[test]
    fn lambda_axis_inverts_the_swap_probability() {
        let s = apply_axis(&fig2(), AxisName::Lambda, 0.25).unwrap();
        let lam = (1.0 - (2.0 * 0.3 * s.tau_q()).cos()) / 2.0;
        assert_abs_diff_eq!(lam, 0.25, epsilon = 1e-15);
        assert!(apply_axis(&fig2(), AxisName::Lambda, 1.5).is_err());
    }

    #[test]
    fn n_axis_interpolates_frequencies() {
        let base =
            EngineSpec::qubit_chain(&[1.5, 2.0], CouplingSpec::xx(0.8), (0.2, 1.0), (0.8, 1.0), 0.5, 0.25).unwrap();
        let s = apply_axis(&base, AxisName::N, 5.0).unwrap();
        assert_eq!(s.frequencies().unwrap(), vec![1.5, 1.625, 1.75, 1.875, 2.0]);
        assert_eq!(s.hot().frequency(), Some(2.0));
        let r = apply_axis(&base, AxisName::OmegaRatio, 0.5).unwrap();
        assert_eq!(r.frequencies().unwrap(), vec![1.0, 2.0]);
        assert_eq!(r.cold().frequency(), Some(1.0));
        assert!(apply_axis(&fig2(), AxisName::Jz, 0.3).is_err());
    }

    #[test]
    fn single_point_matches_a_direct_solve() {
        let plan = SweepPlan::new(fig2(), vec![SweepAxis::new(AxisName::TauQ, 1.0, 1.0, 2).unwrap()], None).unwrap();
        let res = run_sweep(
            &plan,
            &SweepOptions {
                jobs: 1,
                ..Default::default()
            },
        )
        .unwrap();
        let direct = Engine::new(&fig2())
            .unwrap()
            .find_limit_cycle(&LimitCycleOptions::default())
            .unwrap();
        let r = res.points[0].outcome.as_ref().unwrap();
        assert_eq!(r.w.to_bits(), direct.w.to_bits());
        assert_eq!(res.points[0].otto_ok, Some(true));
    }

    #[test]
    fn failures_stay_in_their_row() {
        let base = fig2().with_baths(
            BathSpec::qubit(0.75, 0.4, 0.0).unwrap(),
            BathSpec::qubit(1.0, 0.8, 0.0).unwrap(),
        );
        let plan = SweepPlan::new(
            base.unwrap(),
            vec![SweepAxis::new(AxisName::G, 0.0, 0.3, 2).unwrap()],
            Some(vec!["W".into(), "regime".into()]),
        )
        .unwrap();
        let res = run_sweep(&plan, &SweepOptions::default()).unwrap();
        let t = res.to_table();
        assert_eq!(t.columns, vec!["g", "W", "regime", "status"]);
        assert!(matches!(&t.rows[0][3], Cell::Text(s) if s.contains("degenerate")));
        assert_eq!(t.rows[1][2], Cell::Text("engine".into()));
    }

    #[test]
    fn parallel_and_serial_agree() {
        let plan = SweepPlan::new(
            fig2(),
            vec![
                SweepAxis::new(AxisName::TauQ, 0.5, 3.0, 3).unwrap(),
                SweepAxis::new(AxisName::TauW, 0.5, 3.0, 3).unwrap(),
            ],
            None,
        )
        .unwrap();
        let a = run_sweep(
            &plan,
            &SweepOptions {
                jobs: 1,
                ..Default::default()
            },
        )
        .unwrap();
        let b = run_sweep(
            &plan,
            &SweepOptions {
                jobs: 3,
                ..Default::default()
            },
        )
        .unwrap();
        let fmt = crate::emit::Format::Csv;
        assert_eq!(a.to_table().render(fmt).unwrap(), b.to_table().render(fmt).unwrap());
        assert_eq!(a.points[1].coords, vec![0.5, 1.75]);
    }
}
