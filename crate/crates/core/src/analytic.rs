//! Exact difference equations of the two-qubit partial-swap engine.
//!
//! The state enters only through `x = (Z₁, Z₂, S, A)` with `Z_i = ⟨σ_z^i⟩`,
//! `S = ⟨σ₊σ₋ + σ₋σ₊⟩` and `A = i⟨σ₊σ₋ − σ₋σ₊⟩`. The heat stroke is the affine
//! map `x̃ = Jx + S` and the work stroke the linear map `x' = Dx̃`.

use nalgebra::{Matrix4, Vector4};

use crate::engine::{CouplingSpec, EngineSpec};
use crate::error::{Error, Result};
use crate::hilbert::{pauli, trace_product, DensityMatrix, LayoutMatrix};

/// Raw inputs. `g` drives the work stroke, `g_bath` the heat stroke.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticInputs {
    pub omega1: f64,
    pub omega2: f64,
    pub g: f64,
    pub g_bath: f64,
    pub tau_q: f64,
    pub tau_w: f64,
    pub t_c: f64,
    pub t_h: f64,
    /// Replaces `λ = (1 − cos 2g_bath τ_q)/2`.
    pub lambda: Option<f64>,
    /// Replaces `p = cos²((ω₁−ω₂)τ_q)`; the rotation keeps the sign of `ω₁ − ω₂`.
    pub p: Option<f64>,
}

impl AnalyticInputs {
    /// Same coupling in both strokes, no overrides.
    pub fn new(omega1: f64, omega2: f64, g: f64, tau_q: f64, tau_w: f64, t_c: f64, t_h: f64) -> Self {
        Self {
            omega1,
            omega2,
            g,
            g_bath: g,
            tau_q,
            tau_w,
            t_c,
            t_h,
            lambda: None,
            p: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticParams {
    pub inputs: AnalyticInputs,
    pub lambda: f64,
    pub p: f64,
    /// Rotation of `(S, A)` in the heat stroke, `(cos φ, sin φ)` with
    /// `φ = (ω₁−ω₂)τ_q`.
    pub cos_phi: f64,
    pub sin_phi: f64,
    pub omega_r: f64,
    pub eta: f64,
    pub xi: f64,
    /// `tan θ = (ω₁−ω₂)/2g`, so `θ = ±π/2` at `g = 0`.
    pub theta: f64,
    /// `η tan θ`, `η tan²θ` and `ξ tan θ`, finite also at `g = 0`.
    pub eta_tan: f64,
    pub eta_tan2: f64,
    pub xi_tan: f64,
    pub f_c: f64,
    pub f_h: f64,
    pub z1_th: f64,
    pub z2_th: f64,
}

fn fermi(omega: f64, t: f64) -> f64 {
    1.0 / ((omega / t).exp() + 1.0)
}

pub fn derive_params(inputs: AnalyticInputs) -> Result<AnalyticParams> {
    let AnalyticInputs {
        omega1,
        omega2,
        g,
        g_bath,
        tau_q,
        tau_w,
        t_c,
        t_h,
        lambda,
        p,
    } = inputs;
    for (name, v) in [
        ("omega1", omega1),
        ("omega2", omega2),
        ("g", g),
        ("g_bath", g_bath),
        ("tau_q", tau_q),
        ("tau_w", tau_w),
    ] {
        if !v.is_finite() {
            return Err(Error::Parameter(format!("{name} must be finite, got {v}")));
        }
    }
    for (name, t) in [("T_C", t_c), ("T_H", t_h)] {
        if t.is_nan() || t <= 0.0 {
            return Err(Error::Parameter(format!("{name} must be positive, got {t}")));
        }
    }
    for (name, v) in [("lambda", lambda), ("p", p)] {
        if let Some(v) = v {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Parameter(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
    }
    let delta = omega1 - omega2;
    let lam = lambda.unwrap_or_else(|| (1.0 - (2.0 * g_bath * tau_q).cos()) / 2.0);
    let phi = delta * tau_q;
    let (p, cos_phi, sin_phi) = match p {
        Some(p) => {
            let sign = if delta > 0.0 {
                1.0
            } else if delta < 0.0 {
                -1.0
            } else {
                0.0
            };
            (p, p.sqrt(), sign * (1.0 - p).sqrt())
        }
        None => (phi.cos().powi(2), phi.cos(), phi.sin()),
    };
    let omega_r = (4.0 * g * g + delta * delta).sqrt();
    let (eta, xi, eta_tan, eta_tan2, xi_tan) = if omega_r == 0.0 {
        (0.0, 0.0, 0.0, 0.0, 0.0)
    } else {
        let c = 1.0 - (omega_r * tau_w).cos();
        let s = (omega_r * tau_w).sin();
        let wr2 = omega_r * omega_r;
        (
            2.0 * g * g / wr2 * c,
            g / omega_r * s,
            g * delta * c / wr2,
            delta * delta * c / (2.0 * wr2),
            delta * s / (2.0 * omega_r),
        )
    };
    let f_c = fermi(omega1, t_c);
    let f_h = fermi(omega2, t_h);
    Ok(AnalyticParams {
        inputs,
        lambda: lam,
        p,
        cos_phi,
        sin_phi,
        omega_r,
        eta,
        xi,
        theta: delta.atan2(2.0 * g),
        eta_tan,
        eta_tan2,
        xi_tan,
        f_c,
        f_h,
        z1_th: 2.0 * f_c - 1.0,
        z2_th: 2.0 * f_h - 1.0,
    })
}

impl AnalyticParams {
    /// Parameters of a two-site partial-swap spec with qubit ancillas
    /// resonant with their sites and one bath coupling.
    pub fn from_spec(spec: &EngineSpec) -> Result<Self> {
        let reject = |why: &str| Err(Error::Spec(format!("analytic model needs {why}")));
        if spec.num_sites() != 2 {
            return reject("exactly two sites");
        }
        let Some(w) = spec.frequencies() else {
            return reject("site frequencies");
        };
        let g = match spec.coupling() {
            CouplingSpec::PartialSwap { g } => g[0],
            CouplingSpec::Xyz { jx, jy, jz } if jx == jy && *jz == 0.0 => 2.0 * jx,
            _ => return reject("a partial-swap coupling"),
        };
        if spec.cold().frequency() != Some(w[0]) || spec.hot().frequency() != Some(w[1]) {
            return reject("qubit ancillas resonant with their sites");
        }
        if spec.cold().coupling() != spec.hot().coupling() {
            return reject("equal bath couplings");
        }
        derive_params(AnalyticInputs {
            g_bath: spec.cold().coupling(),
            ..AnalyticInputs::new(
                w[0],
                w[1],
                g,
                spec.tau_q(),
                spec.tau_w(),
                spec.cold().temperature(),
                spec.hot().temperature(),
            )
        })
    }

    /// `η sec²θ`
    pub fn eta_sec2(&self) -> f64 {
        self.eta + self.eta_tan2
    }

    /// `ξ² − η(1 − η sec²θ)`, zero up to round-off.
    pub fn xi_identity_defect(&self) -> f64 {
        self.xi * self.xi - self.eta * (1.0 - self.eta_sec2())
    }

    /// `cos²θ − η ≥ 0`; it vanishes exactly when `ω_r τ_w` is an odd
    /// multiple of `π`.
    pub fn eta_bound_margin(&self) -> f64 {
        let cos2 = if self.omega_r == 0.0 {
            1.0
        } else {
            4.0 * self.inputs.g * self.inputs.g / (self.omega_r * self.omega_r)
        };
        cos2 - self.eta
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObservableVector {
    pub z1: f64,
    pub z2: f64,
    pub s: f64,
    pub a: f64,
}

impl ObservableVector {
    pub fn new(z1: f64, z2: f64, s: f64, a: f64) -> Self {
        Self { z1, z2, s, a }
    }

    /// Both qubits in the ground state `|1⟩`.
    pub fn ground() -> Self {
        Self::new(-1.0, -1.0, 0.0, 0.0)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.z1, self.z2, self.s, self.a)
    }

    /// Reads the observables off a two-qubit state.
    pub fn from_state(rho: &DensityMatrix) -> Result<Self> {
        if rho.layout().dims() != [2, 2] {
            return Err(Error::Layout(format!(
                "observables need a two-qubit state, got {:?}",
                rho.layout()
            )));
        }
        let id = pauli::identity();
        let z = pauli::z();
        let pm = pauli::plus().kronecker(&pauli::minus());
        let mp = pauli::minus().kronecker(&pauli::plus());
        let m = rho.matrix();
        let ex = |op: &crate::hilbert::CMatrix| trace_product(op, m);
        let a = ex(&(&pm - &mp)) * crate::hilbert::C64::new(0.0, 1.0);
        Ok(Self::new(
            ex(&z.kronecker(&id)).re,
            ex(&id.kronecker(&z)).re,
            ex(&(&pm + &mp)).re,
            a.re,
        ))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.to_vector() - other.to_vector()).amax()
    }

    /// Largest violation of `|Zᵢ| ≤ 1` and
    /// `S² + A² ≤ min(1+Z₁, 1−Z₂)·min(1−Z₁, 1+Z₂)`, which every two-qubit
    /// state satisfies; zero inside that region.
    pub fn physicality_defect(&self) -> f64 {
        let bound = (1.0 + self.z1).min(1.0 - self.z2) * (1.0 - self.z1).min(1.0 + self.z2);
        [
            self.z1.abs() - 1.0,
            self.z2.abs() - 1.0,
            self.s * self.s + self.a * self.a - bound,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn heat_map(x: &ObservableVector, params: &AnalyticParams) -> ObservableVector {
    let k = 1.0 - params.lambda;
    let (c, s) = (params.cos_phi, params.sin_phi);
    ObservableVector::new(
        k * x.z1 + params.lambda * params.z1_th,
        k * x.z2 + params.lambda * params.z2_th,
        k * (c * x.s + s * x.a),
        k * (c * x.a - s * x.s),
    )
}

pub fn work_map(x: &ObservableVector, params: &AnalyticParams) -> ObservableVector {
    ObservableVector::from_vector(&(work_matrix(params) * x.to_vector()))
}

#[rustfmt::skip]
fn work_matrix(p: &AnalyticParams) -> Matrix4<f64> {
    let (e, xi, et, et2, xt) = (p.eta, p.xi, p.eta_tan, p.eta_tan2, p.xi_tan);
    Matrix4::new(
        1.0 - e, e, 2.0 * et, -2.0 * xi,
        e, 1.0 - e, -2.0 * et, 2.0 * xi,
        et, -et, 1.0 - 2.0 * et2, 2.0 * xt,
        xi, -xi, -2.0 * xt, 1.0 - 2.0 * p.eta_sec2(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineMapPair {
    pub j: Matrix4<f64>,
    pub d: Matrix4<f64>,
    pub s: Vector4<f64>,
    pub lambda: f64,
}

pub fn build_affine_maps(params: &AnalyticParams) -> AffineMapPair {
    let k = 1.0 - params.lambda;
    let (c, s) = (params.cos_phi, params.sin_phi);
    #[rustfmt::skip]
    let j = Matrix4::new(
        k, 0.0, 0.0, 0.0,
        0.0, k, 0.0, 0.0,
        0.0, 0.0, k * c, k * s,
        0.0, 0.0, -k * s, k * c,
    );
    AffineMapPair {
        j,
        d: work_matrix(params),
        s: Vector4::new(params.lambda * params.z1_th, params.lambda * params.z2_th, 0.0, 0.0),
        lambda: params.lambda,
    }
}

impl AffineMapPair {
    /// `DJ`, the linear part of one full cycle.
    pub fn cycle_matrix(&self) -> Matrix4<f64> {
        self.d * self.j
    }

    pub fn heat(&self, x: &ObservableVector) -> ObservableVector {
        ObservableVector::from_vector(&(self.j * x.to_vector() + self.s))
    }

    pub fn work(&self, x: &ObservableVector) -> ObservableVector {
        ObservableVector::from_vector(&(self.d * x.to_vector()))
    }
}

/// `(xₙ, x̃ₙ)` for `n = 0 … steps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryPoint {
    pub n: usize,
    pub x: ObservableVector,
    pub x_tilde: ObservableVector,
}

/// `xₙ = (DJ)ⁿx₀ + Σ_{r<n} (DJ)ⁿ⁻ʳ⁻¹ DS`, evaluated term by term.
pub fn trajectory(x0: &ObservableVector, steps: usize, maps: &AffineMapPair) -> Vec<TrajectoryPoint> {
    let dj = maps.cycle_matrix();
    let ds = maps.d * maps.s;
    let x0 = x0.to_vector();
    let mut power = Matrix4::identity();
    let mut drive = Vector4::zeros();
    let mut out = Vec::with_capacity(steps + 1);
    for n in 0..=steps {
        let x = power * x0 + drive;
        out.push(TrajectoryPoint {
            n,
            x: ObservableVector::from_vector(&x),
            x_tilde: ObservableVector::from_vector(&(maps.j * x + maps.s)),
        });
        drive += power * ds;
        power = dj * power;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteadyState {
    pub x: ObservableVector,
    pub x_tilde: ObservableVector,
}

/// `x* = (1 − DJ)⁻¹ DS`. Without dissipation (`λ = 0`) there is no unique
/// steady state.
pub fn steady_state(maps: &AffineMapPair) -> Result<SteadyState> {
    if maps.lambda == 0.0 {
        return Err(Error::Singular(
            "λ = 0: the heat stroke does not dissipate, no unique steady state".into(),
        ));
    }
    let a = Matrix4::identity() - maps.cycle_matrix();
    let x = a
        .lu()
        .solve(&(maps.d * maps.s))
        .ok_or_else(|| Error::Singular("1 − DJ is not invertible".into()))?;
    Ok(SteadyState {
        x: ObservableVector::from_vector(&x),
        x_tilde: ObservableVector::from_vector(&(maps.j * x + maps.s)),
    })
}

/// `μ = max|eig(DJ)|`
pub fn relaxation_rate(maps: &AffineMapPair) -> f64 {
    maps.cycle_matrix()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Heats `ω_x(Z̃_x − Z_x)/2` and work `−Σ ω_i(Z_i' − Z̃_i)/2` of one cycle.
pub fn thermo_from_states(
    x: &ObservableVector,
    x_tilde: &ObservableVector,
    x_next: &ObservableVector,
    params: &AnalyticParams,
) -> (f64, f64, f64) {
    let (w1, w2) = (params.inputs.omega1, params.inputs.omega2);
    let q_c = w1 * (x_tilde.z1 - x.z1) / 2.0;
    let q_h = w2 * (x_tilde.z2 - x.z2) / 2.0;
    let w = -(w1 * (x_next.z1 - x_tilde.z1) + w2 * (x_next.z2 - x_tilde.z2)) / 2.0;
    (q_c, q_h, w)
}

fn closed_form_denominator(p: &AnalyticParams, c: f64, s: f64) -> f64 {
    let l = p.lambda;
    l * l + 2.0 * (1.0 + p.eta) * (1.0 - l) - 2.0 * c * (1.0 - l) * (1.0 - (p.eta + 2.0 * p.eta_tan2))
        + 4.0 * s * (1.0 - l) * p.xi_tan
}

/// Limit-cycle work
/// `η(2−λ)λ(f_C−f_H)(ω₁−ω₂) / [λ² + 2(1+η)(1−λ) − 2cos φ(1−λ)(1 − η(tan²θ+sec²θ)) + 4 sin φ(1−λ)ξ tan θ]`.
pub fn work_closed_form(params: &AnalyticParams) -> f64 {
    let p = params;
    let l = p.lambda;
    let num = p.eta * (2.0 - l) * l * (p.f_c - p.f_h) * (p.inputs.omega1 - p.inputs.omega2);
    if num == 0.0 {
        return 0.0;
    }
    num / closed_form_denominator(p, p.cos_phi, p.sin_phi)
}

/// The closed form with the unsigned rotation `(√p, √(1−p))` and the overall
/// factor 2 of the published expression. It differs from the steady state
/// and is kept only to quantify that difference.
pub fn work_closed_form_as_published(params: &AnalyticParams) -> f64 {
    let p = params;
    let l = p.lambda;
    let num = 2.0 * p.eta * (2.0 - l) * l * (p.f_c - p.f_h) * (p.inputs.omega1 - p.inputs.omega2);
    if num == 0.0 {
        return 0.0;
    }
    num / closed_form_denominator(p, p.p.sqrt(), (1.0 - p.p).sqrt())
}
