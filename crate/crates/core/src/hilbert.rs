//! Dense complex linear algebra over labeled tensor-product spaces.
//!
//! Every operator and state carries a [`SpaceLayout`] naming its tensor
//! factors. Composition is the Kronecker product in declared factor order
//! (first factor most significant), and reductions address factors by label.

use std::collections::HashSet;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Hermiticity and trace tolerance for freshly built objects.
pub const STRUCTURAL_TOL: f64 = 1e-12;
/// Tolerance for quantities obtained after time evolution.
pub const DYNAMICAL_TOL: f64 = 1e-10;
/// Most negative eigenvalue a density matrix may have.
pub const POSITIVITY_TOL: f64 = 1e-10;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Ordered list of named tensor factors and their local dimensions.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SpaceLayout {
    dims: Vec<usize>,
    labels: Vec<String>,
}

impl SpaceLayout {
    pub fn new<S: Into<String>>(factors: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let (labels, dims): (Vec<String>, Vec<usize>) = factors.into_iter().map(|(l, d)| (l.into(), d)).unzip();
        if dims.is_empty() {
            return Err(Error::Layout("a layout needs at least one factor".into()));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::Layout(format!("factor {:?} has dimension 0", labels[pos])));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::Layout(format!("duplicate factor label {l:?}")));
            }
        }
        Ok(Self { dims, labels })
    }

    pub fn single(label: impl Into<String>, dim: usize) -> Result<Self> {
        Self::new([(label.into(), dim)])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn num_factors(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn dim_of(&self, label: &str) -> Option<usize> {
        self.position(label).map(|p| self.dims[p])
    }

    pub fn contains(&self, label: &str) -> bool {
        self.position(label).is_some()
    }

    /// Joined layout `self ⊗ other`.
    pub fn concat(&self, other: &SpaceLayout) -> Result<SpaceLayout> {
        for l in &other.labels {
            if self.contains(l) {
                return Err(Error::Composition(format!(
                    "factor {l:?} appears on both sides of a tensor product"
                )));
            }
        }
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Ok(SpaceLayout { dims, labels })
    }

    /// Sub-layout made of the given labels, in this layout's order.
    pub fn restrict(&self, keep: &[&str]) -> Result<SpaceLayout> {
        for k in keep {
            if !self.contains(k) {
                return Err(Error::Layout(format!("unknown factor label {k:?}")));
            }
        }
        let factors: Vec<(String, usize)> = self
            .labels
            .iter()
            .zip(&self.dims)
            .filter(|(l, _)| keep.contains(&l.as_str()))
            .map(|(l, &d)| (l.clone(), d))
            .collect();
        SpaceLayout::new(factors)
    }
}

impl fmt::Debug for SpaceLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, (l, d)) in self.labels.iter().zip(&self.dims).enumerate() {
            if i > 0 {
                f.write_str(" ⊗ ")?;
            }
            write!(f, "{l}:{d}")?;
        }
        f.write_str("]")
    }
}

/// Index bookkeeping for splitting a layout into a selected group of
/// factors and the remainder. `full(a, r)` is the basis index of the whole
/// space for sub-index `a` of the selected factors (in selection order) and
/// sub-index `r` of the remaining ones (in layout order).
pub(crate) struct FactorSplit {
    selected: Vec<usize>,
    rest: Vec<usize>,
}

impl FactorSplit {
    pub(crate) fn new(layout: &SpaceLayout, selected_labels: &[&str]) -> Result<Self> {
        let n = layout.num_factors();
        let mut strides = vec![1usize; n];
        for k in (0..n.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * layout.dims[k + 1];
        }
        let mut positions = Vec::with_capacity(selected_labels.len());
        for l in selected_labels {
            let p = layout
                .position(l)
                .ok_or_else(|| Error::Layout(format!("unknown factor label {l:?}")))?;
            if positions.contains(&p) {
                return Err(Error::Layout(format!("factor {l:?} selected twice")));
            }
            positions.push(p);
        }
        let rest_positions: Vec<usize> = (0..n).filter(|p| !positions.contains(p)).collect();
        let offsets = |ps: &[usize]| -> Vec<usize> {
            let mut out = vec![0usize];
            for &p in ps {
                let mut next = Vec::with_capacity(out.len() * layout.dims[p]);
                for &o in &out {
                    for m in 0..layout.dims[p] {
                        next.push(o + m * strides[p]);
                    }
                }
                out = next;
            }
            out
        };
        Ok(Self {
            selected: offsets(&positions),
            rest: offsets(&rest_positions),
        })
    }

    pub(crate) fn selected_dim(&self) -> usize {
        self.selected.len()
    }

    pub(crate) fn rest_dim(&self) -> usize {
        self.rest.len()
    }

    #[inline]
    pub(crate) fn full(&self, a: usize, r: usize) -> usize {
        self.selected[a] + self.rest[r]
    }
}

/// Common access to layout-carrying square matrices.
pub trait LayoutMatrix: Sized {
    fn layout(&self) -> &SpaceLayout;
    fn matrix(&self) -> &CMatrix;

    #[doc(hidden)]
    fn assemble(layout: SpaceLayout, matrix: CMatrix) -> Self;

    fn dim(&self) -> usize {
        self.matrix().nrows()
    }
}

/// A Hermitian operator on a labeled space (energies in units with ħ = k_B = 1).
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    layout: SpaceLayout,
    matrix: CMatrix,
}

/// A positive, unit-trace density matrix on a labeled space.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    layout: SpaceLayout,
    matrix: CMatrix,
}

impl LayoutMatrix for HermitianOperator {
    fn layout(&self) -> &SpaceLayout {
        &self.layout
    }
    fn matrix(&self) -> &CMatrix {
        &self.matrix
    }
    fn assemble(layout: SpaceLayout, matrix: CMatrix) -> Self {
        Self { layout, matrix }
    }
}

impl LayoutMatrix for DensityMatrix {
    fn layout(&self) -> &SpaceLayout {
        &self.layout
    }
    fn matrix(&self) -> &CMatrix {
        &self.matrix
    }
    fn assemble(layout: SpaceLayout, matrix: CMatrix) -> Self {
        Self { layout, matrix }
    }
}

fn check_shape(layout: &SpaceLayout, m: &CMatrix) -> Result<()> {
    let d = layout.total_dim();
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::Layout(format!(
            "matrix is {}x{} but layout {:?} has dimension {d}",
            m.nrows(),
            m.ncols(),
            layout
        )));
    }
    Ok(())
}

/// Largest entry magnitude, the norm used for all structural checks.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub(crate) fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// `tr{A B}` without forming the product.
pub(crate) fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub(crate) fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(m.clone());
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

pub(crate) fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `V diag(f(λ)) V†`
pub(crate) fn spectral_map(values: &[f64], vectors: &CMatrix, f: impl Fn(f64) -> C64) -> CMatrix {
    let n = vectors.nrows();
    let mut scaled = vectors.clone();
    for (j, &v) in values.iter().enumerate() {
        let s = f(v);
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    scaled * vectors.adjoint()
}

impl HermitianOperator {
    /// Validates shape and Hermiticity (within [`STRUCTURAL_TOL`]); the
    /// stored matrix is the exact Hermitian part.
    pub fn new(layout: SpaceLayout, matrix: CMatrix) -> Result<Self> {
        check_shape(&layout, &matrix)?;
        let defect = hermiticity_defect(&matrix);
        if defect > STRUCTURAL_TOL {
            return Err(Error::Parameter(format!(
                "operator is not Hermitian (defect {defect:.3e})"
            )));
        }
        Ok(Self {
            matrix: hermitize(&matrix),
            layout,
        })
    }

    pub fn from_real(layout: SpaceLayout, entries: DMatrix<f64>) -> Result<Self> {
        Self::new(layout, entries.map(|x| C64::new(x, 0.0)))
    }

    pub fn zeros(layout: SpaceLayout) -> Self {
        let d = layout.total_dim();
        Self {
            layout,
            matrix: CMatrix::zeros(d, d),
        }
    }

    pub fn identity(layout: SpaceLayout) -> Self {
        let d = layout.total_dim();
        Self {
            layout,
            matrix: CMatrix::identity(d, d),
        }
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// Extends the operator to `target` by tensoring identities on every
    /// factor it does not act on. All of its labels must exist in `target`.
    pub fn embed(&self, target: &SpaceLayout) -> Result<HermitianOperator> {
        let labels: Vec<&str> = self.layout.labels.iter().map(String::as_str).collect();
        for l in &labels {
            let own = self.layout.dim_of(l).expect("own label");
            match target.dim_of(l) {
                Some(d) if d == own => {}
                Some(d) => {
                    return Err(Error::Layout(format!(
                        "factor {l:?} has dimension {own} but the target declares {d}"
                    )))
                }
                None => return Err(Error::Layout(format!("target layout {target:?} lacks factor {l:?}"))),
            }
        }
        let split = FactorSplit::new(target, &labels)?;
        let d = target.total_dim();
        let mut out = CMatrix::zeros(d, d);
        for r in 0..split.rest_dim() {
            for a in 0..split.selected_dim() {
                for b in 0..split.selected_dim() {
                    let v = self.matrix[(a, b)];
                    if v != ZERO {
                        out[(split.full(a, r), split.full(b, r))] = v;
                    }
                }
            }
        }
        Ok(HermitianOperator {
            layout: target.clone(),
            matrix: out,
        })
    }

    pub fn add(&self, other: &HermitianOperator) -> Result<HermitianOperator> {
        self.same_layout(other)?;
        Ok(HermitianOperator {
            layout: self.layout.clone(),
            matrix: &self.matrix + &other.matrix,
        })
    }

    pub fn scale(&self, factor: f64) -> HermitianOperator {
        HermitianOperator {
            layout: self.layout.clone(),
            matrix: &self.matrix * C64::new(factor, 0.0),
        }
    }

    /// Sum of operators that all share `layout`.
    pub fn sum<'a>(
        layout: &SpaceLayout,
        terms: impl IntoIterator<Item = &'a HermitianOperator>,
    ) -> Result<HermitianOperator> {
        let mut acc = HermitianOperator::zeros(layout.clone());
        for t in terms {
            acc = acc.add(t)?;
        }
        Ok(acc)
    }

    fn same_layout(&self, other: &HermitianOperator) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::Layout(format!(
                "layouts differ: {:?} vs {:?}",
                self.layout, other.layout
            )));
        }
        Ok(())
    }

    /// Max-abs entry norm of `[self, other]`.
    pub fn commutator_norm(&self, other: &HermitianOperator) -> Result<f64> {
        self.same_layout(other)?;
        Ok(max_abs(&commutator(&self.matrix, &other.matrix)))
    }

    /// `tr{H ρ}`
    pub fn expectation(&self, rho: &DensityMatrix) -> Result<f64> {
        if self.layout != rho.layout {
            return Err(Error::Layout(format!(
                "operator on {:?} cannot act on state over {:?}",
                self.layout, rho.layout
            )));
        }
        Ok(trace_product(&self.matrix, &rho.matrix).re)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.matrix)
    }
}

impl DensityMatrix {
    /// Validates the density-matrix invariants: Hermitian and unit trace
    /// within [`STRUCTURAL_TOL`], no eigenvalue below `-POSITIVITY_TOL`.
    pub fn new(layout: SpaceLayout, matrix: CMatrix) -> Result<Self> {
        check_shape(&layout, &matrix)?;
        let defect = hermiticity_defect(&matrix);
        if defect > STRUCTURAL_TOL {
            return Err(Error::Parameter(format!(
                "density matrix is not Hermitian (defect {defect:.3e})"
            )));
        }
        let tr = matrix.trace();
        if (tr - ONE).norm() > STRUCTURAL_TOL {
            return Err(Error::Parameter(format!("density matrix has trace {tr} instead of 1")));
        }
        let matrix = hermitize(&matrix);
        let min = hermitian_eigenvalues(&matrix)[0];
        if min < -POSITIVITY_TOL {
            return Err(Error::Parameter(format!(
                "density matrix has negative eigenvalue {min:.3e}"
            )));
        }
        Ok(Self { layout, matrix })
    }

    /// Builds a state from the output of a channel, removing round-off
    /// anti-Hermitian parts. Positivity and trace are left to the caller.
    pub(crate) fn from_channel_output(layout: SpaceLayout, matrix: CMatrix) -> Self {
        Self {
            matrix: hermitize(&matrix),
            layout,
        }
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) vector.
    pub fn pure(layout: SpaceLayout, psi: &[C64]) -> Result<Self> {
        let d = layout.total_dim();
        if psi.len() != d {
            return Err(Error::Layout(format!(
                "state vector has length {} but layout {layout:?} has dimension {d}",
                psi.len()
            )));
        }
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Parameter("state vector has zero norm".into()));
        }
        let v = nalgebra::DVector::from_iterator(d, psi.iter().map(|z| z / norm));
        Ok(Self {
            matrix: &v * v.adjoint(),
            layout,
        })
    }

    pub fn basis_state(layout: SpaceLayout, index: usize) -> Result<Self> {
        let d = layout.total_dim();
        if index >= d {
            return Err(Error::Layout(format!(
                "basis index {index} out of range for dimension {d}"
            )));
        }
        let mut m = CMatrix::zeros(d, d);
        m[(index, index)] = ONE;
        Ok(Self { layout, matrix: m })
    }

    pub fn maximally_mixed(layout: SpaceLayout) -> Self {
        let d = layout.total_dim();
        Self {
            matrix: CMatrix::identity(d, d) * C64::new(1.0 / d as f64, 0.0),
            layout,
        }
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// `½‖ρ − σ‖₁`
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.layout != other.layout {
            return Err(Error::Layout(format!(
                "layouts differ: {:?} vs {:?}",
                self.layout, other.layout
            )));
        }
        Ok(trace_norm_hermitian(&(&self.matrix - &other.matrix)) / 2.0)
    }
}

pub(crate) fn trace_norm_hermitian(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(&hermitize(m)).iter().map(|x| x.abs()).sum()
}

/// Kronecker product in the given factor order.
pub fn tensor_compose<T: LayoutMatrix>(parts: &[&T]) -> Result<T> {
    let (first, rest) = parts
        .split_first()
        .ok_or_else(|| Error::Composition("nothing to compose".into()))?;
    let mut layout = first.layout().clone();
    let mut matrix = first.matrix().clone();
    for p in rest {
        layout = layout.concat(p.layout())?;
        matrix = matrix.kronecker(p.matrix());
    }
    Ok(T::assemble(layout, matrix))
}

fn reduce(layout: &SpaceLayout, matrix: &CMatrix, keep: &[&str]) -> Result<(SpaceLayout, CMatrix)> {
    if keep.is_empty() {
        return Err(Error::Layout("partial trace must keep at least one factor".into()));
    }
    let kept = layout.restrict(keep)?;
    let kept_labels: Vec<&str> = kept.labels().iter().map(String::as_str).collect();
    let split = FactorSplit::new(layout, &kept_labels)?;
    let dk = split.selected_dim();
    let mut out = CMatrix::zeros(dk, dk);
    for i in 0..dk {
        for j in 0..dk {
            let mut acc = ZERO;
            for r in 0..split.rest_dim() {
                acc += matrix[(split.full(i, r), split.full(j, r))];
            }
            out[(i, j)] = acc;
        }
    }
    Ok((kept, out))
}

/// Traces out every factor not named in `keep`. The result keeps the
/// surviving factors in their original order.
pub fn partial_trace(state: &DensityMatrix, keep: &[&str]) -> Result<DensityMatrix> {
    let (layout, m) = reduce(&state.layout, &state.matrix, keep)?;
    Ok(DensityMatrix::from_channel_output(layout, m))
}

/// Partial trace of an operator (no normalization).
pub fn partial_trace_operator(op: &HermitianOperator, keep: &[&str]) -> Result<HermitianOperator> {
    let (layout, m) = reduce(&op.layout, &op.matrix, keep)?;
    Ok(HermitianOperator {
        layout,
        matrix: hermitize(&m),
    })
}

/// Gibbs state `e^{-H/T}/Z`. `f64::INFINITY` is accepted and yields `I/d`.
pub fn thermal_state(h: &HermitianOperator, temperature: f64) -> Result<DensityMatrix> {
    if temperature.is_nan() || temperature <= 0.0 {
        return Err(Error::Parameter(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    if temperature.is_infinite() {
        return Ok(DensityMatrix::maximally_mixed(h.layout.clone()));
    }
    let (values, vectors) = hermitian_eigen(&h.matrix);
    let e0 = values.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = values.iter().map(|e| (-(e - e0) / temperature).exp()).collect();
    let z: f64 = weights.iter().sum();
    let populations: Vec<f64> = weights.iter().map(|w| w / z).collect();
    let m = spectral_map(&populations, &vectors, |p| C64::new(p, 0.0));
    Ok(DensityMatrix::from_channel_output(h.layout.clone(), m))
}

/// `e^{-iHτ}` built from the eigendecomposition of `H`.
#[derive(Clone, Debug)]
pub struct Propagator {
    layout: SpaceLayout,
    unitary: CMatrix,
}

impl Propagator {
    pub fn new(h: &HermitianOperator, tau: f64) -> Result<Self> {
        if !tau.is_finite() {
            return Err(Error::Parameter(format!("duration must be finite, got {tau}")));
        }
        let (values, vectors) = hermitian_eigen(&h.matrix);
        let unitary = spectral_map(&values, &vectors, |e| C64::from_polar(1.0, -e * tau));
        Ok(Self {
            layout: h.layout.clone(),
            unitary,
        })
    }

    pub fn unitary(&self) -> &CMatrix {
        &self.unitary
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.layout != self.layout {
            return Err(Error::Layout(format!(
                "propagator on {:?} cannot act on state over {:?}",
                self.layout, rho.layout
            )));
        }
        let m = &self.unitary * &rho.matrix * self.unitary.adjoint();
        Ok(DensityMatrix::from_channel_output(rho.layout.clone(), m))
    }
}

/// `e^{-iHτ} ρ e^{+iHτ}`
pub fn evolve_unitary(h: &HermitianOperator, tau: f64, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if h.layout != rho.layout {
        return Err(Error::Layout(format!(
            "Hamiltonian on {:?} cannot evolve state over {:?}",
            h.layout, rho.layout
        )));
    }
    Propagator::new(h, tau)?.apply(rho)
}

/// `-tr{ρ ln ρ}` with `0 ln 0 = 0`. Round-off negative eigenvalues count as
/// zero; tiny positive ones are kept, since dropping them biases the entropy
/// by far more than their round-off.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    rho.eigenvalues()
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum::<f64>()
        .max(0.0)
}

/// Single-qubit operators in the basis `{|0⟩, |1⟩}` with `σ_z|0⟩ = +|0⟩`,
/// so `|0⟩` is the excited level of `(ω/2)σ_z`.
pub mod pauli {
    use super::{CMatrix, C64};

    fn m(entries: [[C64; 2]; 2]) -> CMatrix {
        CMatrix::from_fn(2, 2, |i, j| entries[i][j])
    }

    const O: C64 = C64::new(0.0, 0.0);
    const I: C64 = C64::new(1.0, 0.0);
    const J: C64 = C64::new(0.0, 1.0);

    pub fn identity() -> CMatrix {
        m([[I, O], [O, I]])
    }
    pub fn x() -> CMatrix {
        m([[O, I], [I, O]])
    }
    pub fn y() -> CMatrix {
        m([[O, -J], [J, O]])
    }
    pub fn z() -> CMatrix {
        m([[I, O], [O, -I]])
    }
    /// Raising operator `|0⟩⟨1|`.
    pub fn plus() -> CMatrix {
        m([[O, I], [O, O]])
    }
    /// Lowering operator `|1⟩⟨0|`.
    pub fn minus() -> CMatrix {
        m([[O, O], [I, O]])
    }
}
