//! Engine description and the Hamiltonians of both strokes.
//!
//! A chain of `N` sites `S1 … SN` touches a cold ancilla `C` at site 1 and a
//! hot ancilla `H` at site `N`. Heat-stroke operators live on the composite
//! `C ⊗ S1 ⊗ … ⊗ SN ⊗ H`; work-stroke operators live on the chain alone.

use crate::error::{Error, Result};
use crate::hilbert::{max_abs, pauli, CMatrix, HermitianOperator, LayoutMatrix, SpaceLayout, C64};

pub const COLD_LABEL: &str = "C";
pub const HOT_LABEL: &str = "H";

/// Label of chain site `i` (1-based).
pub fn site_label(i: usize) -> String {
    format!("S{i}")
}

/// One site of the working fluid.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteSpec {
    hamiltonian: CMatrix,
    frequency: Option<f64>,
}

impl SiteSpec {
    /// Qubit with `H = (ω/2)σ_z`. The jump operator is `σ₋` with frequency `ω`.
    pub fn qubit(omega: f64) -> Result<Self> {
        if !omega.is_finite() {
            return Err(Error::Spec(format!("site frequency must be finite, got {omega}")));
        }
        Ok(Self {
            hamiltonian: pauli::z() * C64::new(omega / 2.0, 0.0),
            frequency: Some(omega),
        })
    }

    /// Arbitrary `d ≥ 2` level site.
    pub fn new(hamiltonian: CMatrix) -> Result<Self> {
        let d = hamiltonian.nrows();
        if d < 2 {
            return Err(Error::Spec(format!("site dimension must be at least 2, got {d}")));
        }
        let op = HermitianOperator::new(SpaceLayout::single("site", d)?, hamiltonian)
            .map_err(|e| Error::Spec(e.to_string()))?;
        Ok(Self {
            hamiltonian: op.into_matrix(),
            frequency: None,
        })
    }

    /// Declares the transition frequency selected by the site's jump operator.
    pub fn with_frequency(mut self, omega: f64) -> Self {
        self.frequency = Some(omega);
        self
    }

    pub fn dimension(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    pub fn frequency(&self) -> Option<f64> {
        self.frequency
    }

    pub fn is_qubit(&self) -> bool {
        self.dimension() == 2
    }
}

/// A thermal reservoir represented by fresh ancillas, one per heat stroke.
#[derive(Clone, Debug, PartialEq)]
pub struct BathSpec {
    hamiltonian: CMatrix,
    temperature: f64,
    /// Acts on `ancilla ⊗ boundary site`, in that factor order.
    interaction: CMatrix,
    coupling: f64,
    frequency: Option<f64>,
}

impl BathSpec {
    /// Qubit ancilla `(ω/2)σ_z` coupled to a qubit site by a partial swap of strength `g`.
    pub fn qubit(omega: f64, temperature: f64, g: f64) -> Result<Self> {
        if !omega.is_finite() || !g.is_finite() {
            return Err(Error::Spec("bath frequency and coupling must be finite".into()));
        }
        let a = SpaceLayout::single("ancilla", 2)?;
        let s = SpaceLayout::single("site", 2)?;
        let v = build_partial_swap(g, &a, &s)?;
        Self::new(pauli::z() * C64::new(omega / 2.0, 0.0), temperature, v.into_matrix(), g).map(|b| Self {
            frequency: Some(omega),
            ..b
        })
    }

    /// General ancilla Hamiltonian and interaction on `ancilla ⊗ site`.
    /// `coupling` is the nominal strength, informational only.
    pub fn new(hamiltonian: CMatrix, temperature: f64, interaction: CMatrix, coupling: f64) -> Result<Self> {
        if temperature.is_nan() || temperature <= 0.0 {
            return Err(Error::Spec(format!(
                "bath temperature must be positive, got {temperature}"
            )));
        }
        let d = hamiltonian.nrows();
        let h = HermitianOperator::new(SpaceLayout::single("ancilla", d)?, hamiltonian)
            .map_err(|e| Error::Spec(e.to_string()))?;
        let v_dim = interaction.nrows();
        if !v_dim.is_multiple_of(d) || interaction.ncols() != v_dim {
            return Err(Error::Spec(format!(
                "interaction of size {v_dim} does not fit an ancilla of dimension {d}"
            )));
        }
        let v = HermitianOperator::new(SpaceLayout::new([("ancilla", d), ("site", v_dim / d)])?, interaction)
            .map_err(|e| Error::Spec(e.to_string()))?;
        Ok(Self {
            hamiltonian: h.into_matrix(),
            temperature,
            interaction: v.into_matrix(),
            coupling,
            frequency: None,
        })
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn interaction(&self) -> &CMatrix {
        &self.interaction
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn frequency(&self) -> Option<f64> {
        self.frequency
    }

    pub fn dimension(&self) -> usize {
        self.hamiltonian.nrows()
    }

    fn site_dimension(&self) -> usize {
        self.interaction.nrows() / self.dimension()
    }
}

/// Internal coupling of the chain, switched on only during the work stroke.
#[derive(Clone, Debug, PartialEq)]
pub enum CouplingSpec {
    /// `g_i (σ₊σ₋ + σ₋σ₊)` on bond `(i, i+1)`, one strength per bond.
    PartialSwap { g: Vec<f64> },
    /// Uniform `Jx σxσx + Jy σyσy + Jz σzσz` on every bond.
    Xyz { jx: f64, jy: f64, jz: f64 },
    /// One Hermitian operator per bond, acting on `S_i ⊗ S_{i+1}`.
    Explicit { bonds: Vec<CMatrix> },
}

impl CouplingSpec {
    pub fn partial_swap_uniform(g: f64, num_sites: usize) -> Self {
        CouplingSpec::PartialSwap {
            g: vec![g; num_sites.saturating_sub(1)],
        }
    }

    pub fn xx(j: f64) -> Self {
        CouplingSpec::Xyz { jx: j, jy: j, jz: 0.0 }
    }

    pub fn xxz(j: f64, jz: f64) -> Self {
        CouplingSpec::Xyz { jx: j, jy: j, jz }
    }
}

/// How the internal coupling relates to the single-jump eigenoperator form
/// `Σ g_i (L_i† L_{i+1} + h.c.)`.
#[derive(Clone, Debug, PartialEq)]
pub enum InteractionForm {
    /// Single jump operator per site; carries the selected site frequencies.
    Eigenoperator { frequencies: Vec<f64> },
    /// The coupling is outside the eigenoperator class.
    NotApplicable { reason: String },
    /// The class cannot be decided from the declared data.
    NotGuaranteed { reason: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineSpec {
    sites: Vec<SiteSpec>,
    cold: BathSpec,
    hot: BathSpec,
    coupling: CouplingSpec,
    tau_q: f64,
    tau_w: f64,
}

impl EngineSpec {
    pub fn new(
        sites: Vec<SiteSpec>,
        cold: BathSpec,
        hot: BathSpec,
        coupling: CouplingSpec,
        tau_q: f64,
        tau_w: f64,
    ) -> Result<Self> {
        let n = sites.len();
        if n < 2 {
            return Err(Error::Spec(format!("the chain needs at least 2 sites, got {n}")));
        }
        for (name, tau) in [("tau_q", tau_q), ("tau_w", tau_w)] {
            if !tau.is_finite() || tau < 0.0 {
                return Err(Error::Spec(format!(
                    "{name} must be a finite non-negative duration, got {tau}"
                )));
            }
        }
        if cold.temperature > hot.temperature {
            return Err(Error::Spec(format!(
                "cold bath ({}) must not be hotter than the hot bath ({})",
                cold.temperature, hot.temperature
            )));
        }
        if cold.site_dimension() != sites[0].dimension() {
            return Err(Error::Spec("cold interaction does not match site 1".into()));
        }
        if hot.site_dimension() != sites[n - 1].dimension() {
            return Err(Error::Spec(format!("hot interaction does not match site {n}")));
        }
        match &coupling {
            CouplingSpec::PartialSwap { g } => {
                if g.len() != n - 1 {
                    return Err(Error::Spec(format!(
                        "{} bond strengths given for {} bonds",
                        g.len(),
                        n - 1
                    )));
                }
                if !sites.iter().all(SiteSpec::is_qubit) {
                    return Err(Error::Spec("partial-swap coupling needs qubit sites".into()));
                }
            }
            CouplingSpec::Xyz { .. } => {
                if !sites.iter().all(SiteSpec::is_qubit) {
                    return Err(Error::Spec("XYZ coupling needs qubit sites".into()));
                }
            }
            CouplingSpec::Explicit { bonds } => {
                if bonds.len() != n - 1 {
                    return Err(Error::Spec(format!(
                        "{} bond operators given for {} bonds",
                        bonds.len(),
                        n - 1
                    )));
                }
                for (i, b) in bonds.iter().enumerate() {
                    let d = sites[i].dimension() * sites[i + 1].dimension();
                    if b.nrows() != d || b.ncols() != d {
                        return Err(Error::Spec(format!("bond {} has the wrong size", i + 1)));
                    }
                    let layout = SpaceLayout::single("bond", d)?;
                    HermitianOperator::new(layout, b.clone())
                        .map_err(|e| Error::Spec(format!("bond {}: {e}", i + 1)))?;
                }
            }
        }
        Ok(Self {
            sites,
            cold,
            hot,
            coupling,
            tau_q,
            tau_w,
        })
    }

    /// Qubit chain with `H_i = (ω_i/2)σ_z` and qubit ancillas resonant with
    /// their boundary sites, coupled by partial swaps of strength `g`.
    pub fn qubit_chain(
        omegas: &[f64],
        coupling: CouplingSpec,
        cold: (f64, f64),
        hot: (f64, f64),
        tau_q: f64,
        tau_w: f64,
    ) -> Result<Self> {
        let sites = omegas.iter().map(|&w| SiteSpec::qubit(w)).collect::<Result<Vec<_>>>()?;
        let n = omegas.len();
        if n < 2 {
            return Err(Error::Spec(format!("the chain needs at least 2 sites, got {n}")));
        }
        let cold = BathSpec::qubit(omegas[0], cold.0, cold.1)?;
        let hot = BathSpec::qubit(omegas[n - 1], hot.0, hot.1)?;
        Self::new(sites, cold, hot, coupling, tau_q, tau_w)
    }

    pub fn sites(&self) -> &[SiteSpec] {
        &self.sites
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn cold(&self) -> &BathSpec {
        &self.cold
    }

    pub fn hot(&self) -> &BathSpec {
        &self.hot
    }

    pub fn coupling(&self) -> &CouplingSpec {
        &self.coupling
    }

    pub fn tau_q(&self) -> f64 {
        self.tau_q
    }

    pub fn tau_w(&self) -> f64 {
        self.tau_w
    }

    pub fn with_durations(&self, tau_q: f64, tau_w: f64) -> Result<Self> {
        Self::new(
            self.sites.clone(),
            self.cold.clone(),
            self.hot.clone(),
            self.coupling.clone(),
            tau_q,
            tau_w,
        )
    }

    pub fn with_coupling(&self, coupling: CouplingSpec) -> Result<Self> {
        Self::new(
            self.sites.clone(),
            self.cold.clone(),
            self.hot.clone(),
            coupling,
            self.tau_q,
            self.tau_w,
        )
    }

    pub fn with_baths(&self, cold: BathSpec, hot: BathSpec) -> Result<Self> {
        Self::new(
            self.sites.clone(),
            cold,
            hot,
            self.coupling.clone(),
            self.tau_q,
            self.tau_w,
        )
    }

    /// Site frequencies, when every site declares one.
    pub fn frequencies(&self) -> Option<Vec<f64>> {
        self.sites.iter().map(SiteSpec::frequency).collect()
    }

    /// `S1 ⊗ … ⊗ SN`
    pub fn chain_layout(&self) -> SpaceLayout {
        SpaceLayout::new(
            self.sites
                .iter()
                .enumerate()
                .map(|(i, s)| (site_label(i + 1), s.dimension())),
        )
        .expect("site labels are unique")
    }

    /// `C ⊗ S1 ⊗ … ⊗ SN ⊗ H`
    pub fn composite_layout(&self) -> SpaceLayout {
        let mut factors = vec![(COLD_LABEL.to_string(), self.cold.dimension())];
        factors.extend(
            self.sites
                .iter()
                .enumerate()
                .map(|(i, s)| (site_label(i + 1), s.dimension())),
        );
        factors.push((HOT_LABEL.to_string(), self.hot.dimension()));
        SpaceLayout::new(factors).expect("labels are unique")
    }

    /// `H_i` on its own one-factor layout (`i` is 1-based).
    pub fn site_hamiltonian(&self, i: usize) -> HermitianOperator {
        let s = &self.sites[i - 1];
        let layout = SpaceLayout::single(site_label(i), s.dimension()).expect("valid site");
        HermitianOperator::new(layout, s.hamiltonian.clone()).expect("validated at construction")
    }

    pub fn cold_hamiltonian(&self) -> HermitianOperator {
        let layout = SpaceLayout::single(COLD_LABEL, self.cold.dimension()).expect("valid");
        HermitianOperator::new(layout, self.cold.hamiltonian.clone()).expect("validated")
    }

    pub fn hot_hamiltonian(&self) -> HermitianOperator {
        let layout = SpaceLayout::single(HOT_LABEL, self.hot.dimension()).expect("valid");
        HermitianOperator::new(layout, self.hot.hamiltonian.clone()).expect("validated")
    }

    /// `V_C` on `C ⊗ S1`.
    pub fn cold_interaction(&self) -> HermitianOperator {
        let layout = SpaceLayout::new([
            (COLD_LABEL.to_string(), self.cold.dimension()),
            (site_label(1), self.sites[0].dimension()),
        ])
        .expect("valid");
        HermitianOperator::new(layout, self.cold.interaction.clone()).expect("validated")
    }

    /// `V_H` on `H ⊗ SN` (ancilla first, as declared in the bath spec).
    pub fn hot_interaction(&self) -> HermitianOperator {
        let n = self.num_sites();
        let layout = SpaceLayout::new([
            (HOT_LABEL.to_string(), self.hot.dimension()),
            (site_label(n), self.sites[n - 1].dimension()),
        ])
        .expect("valid");
        HermitianOperator::new(layout, self.hot.interaction.clone()).expect("validated")
    }

    /// `Σ_i H_i` on the chain.
    pub fn local_hamiltonian(&self) -> HermitianOperator {
        let chain = self.chain_layout();
        let terms: Vec<HermitianOperator> = (1..=self.num_sites())
            .map(|i| self.site_hamiltonian(i).embed(&chain).expect("site in chain"))
            .collect();
        HermitianOperator::sum(&chain, &terms).expect("shared layout")
    }

    /// Bond operators `V_{i,i+1}` on `S_i ⊗ S_{i+1}`.
    pub fn bond_operators(&self) -> Result<Vec<HermitianOperator>> {
        let n = self.num_sites();
        let bond_layout = |i: usize| {
            SpaceLayout::new([
                (site_label(i), self.sites[i - 1].dimension()),
                (site_label(i + 1), self.sites[i].dimension()),
            ])
        };
        (1..n)
            .map(|i| {
                let layout = bond_layout(i)?;
                match &self.coupling {
                    CouplingSpec::PartialSwap { g } => {
                        let (a, b) = split_pair(&layout);
                        build_partial_swap(g[i - 1], &a, &b)
                    }
                    CouplingSpec::Xyz { jx, jy, jz } => xyz_bond(*jx, *jy, *jz, layout),
                    CouplingSpec::Explicit { bonds } => HermitianOperator::new(layout, bonds[i - 1].clone()),
                }
            })
            .collect()
    }

    /// Internal coupling `𝒱_S = Σ_i V_{i,i+1}` on the chain.
    pub fn internal_coupling(&self) -> Result<HermitianOperator> {
        let chain = self.chain_layout();
        let terms = self
            .bond_operators()?
            .into_iter()
            .map(|b| b.embed(&chain))
            .collect::<Result<Vec<_>>>()?;
        HermitianOperator::sum(&chain, &terms)
    }

    /// Whether the internal coupling is of the single-jump eigenoperator form.
    pub fn interaction_form(&self) -> InteractionForm {
        let Some(frequencies) = self.frequencies() else {
            return InteractionForm::NotGuaranteed {
                reason: "some sites declare no transition frequency".into(),
            };
        };
        match &self.coupling {
            CouplingSpec::PartialSwap { .. } => InteractionForm::Eigenoperator { frequencies },
            CouplingSpec::Xyz { jx, jy, jz } => {
                if *jz != 0.0 {
                    InteractionForm::NotApplicable {
                        reason: "σzσz term breaks the single-jump-operator form".into(),
                    }
                } else if jx != jy {
                    InteractionForm::NotGuaranteed {
                        reason: "Jx ≠ Jy mixes σ₊σ₊ terms (multiple jump operators)".into(),
                    }
                } else {
                    InteractionForm::Eigenoperator { frequencies }
                }
            }
            CouplingSpec::Explicit { .. } => InteractionForm::NotGuaranteed {
                reason: "explicit bonds: single-jump-operator form not established".into(),
            },
        }
    }
}

fn split_pair(layout: &SpaceLayout) -> (SpaceLayout, SpaceLayout) {
    let l = layout.labels();
    let d = layout.dims();
    (
        SpaceLayout::single(l[0].clone(), d[0]).expect("valid"),
        SpaceLayout::single(l[1].clone(), d[1]).expect("valid"),
    )
}

fn xyz_bond(jx: f64, jy: f64, jz: f64, layout: SpaceLayout) -> Result<HermitianOperator> {
    let term = |j: f64, p: CMatrix| p.kronecker(&p) * C64::new(j, 0.0);
    let m = term(jx, pauli::x()) + term(jy, pauli::y()) + term(jz, pauli::z());
    HermitianOperator::new(layout, m)
}

fn require_qubit(layout: &SpaceLayout) -> Result<()> {
    if layout.num_factors() != 1 || layout.total_dim() != 2 {
        return Err(Error::Spec(format!(
            "partial swap needs single qubit factors, got {layout:?}"
        )));
    }
    Ok(())
}

/// `g (σ₊^a σ₋^b + σ₋^a σ₊^b)` on `a ⊗ b`.
pub fn build_partial_swap(g: f64, a: &SpaceLayout, b: &SpaceLayout) -> Result<HermitianOperator> {
    require_qubit(a)?;
    require_qubit(b)?;
    let layout = a.concat(b)?;
    let m = (pauli::plus().kronecker(&pauli::minus()) + pauli::minus().kronecker(&pauli::plus())) * C64::new(g, 0.0);
    HermitianOperator::new(layout, m)
}

/// `Σ_i (Jx σ_i^x σ_{i+1}^x + Jy σ_i^y σ_{i+1}^y + Jz σ_i^z σ_{i+1}^z)` over a
/// chain of qubit factors, nearest neighbours only.
pub fn build_xyz_coupling(jx: f64, jy: f64, jz: f64, chain: &SpaceLayout) -> Result<HermitianOperator> {
    if chain.dims().iter().any(|&d| d != 2) {
        return Err(Error::Spec(format!("XYZ coupling needs a qubit chain, got {chain:?}")));
    }
    let labels = chain.labels();
    let mut acc = HermitianOperator::zeros(chain.clone());
    for i in 0..labels.len().saturating_sub(1) {
        let bond = SpaceLayout::new([(labels[i].clone(), 2), (labels[i + 1].clone(), 2)])?;
        acc = acc.add(&xyz_bond(jx, jy, jz, bond)?.embed(chain)?)?;
    }
    Ok(acc)
}

/// `H_q = Σ H_i + H_C + H_H + V_C + V_H` on `C ⊗ S ⊗ H`; the chain's
/// internal coupling is off during this stroke.
pub fn build_heat_hamiltonian(spec: &EngineSpec) -> HermitianOperator {
    let full = spec.composite_layout();
    let mut terms = vec![
        spec.cold_hamiltonian(),
        spec.hot_hamiltonian(),
        spec.cold_interaction(),
        spec.hot_interaction(),
    ];
    terms.extend((1..=spec.num_sites()).map(|i| spec.site_hamiltonian(i)));
    let embedded: Vec<HermitianOperator> = terms
        .iter()
        .map(|t| t.embed(&full).expect("every term lives on the composite"))
        .collect();
    HermitianOperator::sum(&full, &embedded).expect("shared layout")
}

/// `H_w = Σ H_i + 𝒱_S` on the chain.
pub fn build_work_hamiltonian(spec: &EngineSpec) -> Result<HermitianOperator> {
    spec.local_hamiltonian().add(&spec.internal_coupling()?)
}

/// Max-abs norms of `[V_C, H_1 + H_C]` and `[V_H, H_N + H_H]`. Both vanish
/// exactly when the heat stroke carries no on/off work.
pub fn check_strict_energy_conservation(spec: &EngineSpec) -> (f64, f64) {
    let side = |v: HermitianOperator, h_site: HermitianOperator, h_anc: HermitianOperator| {
        let layout = v.layout().clone();
        let local = h_site
            .embed(&layout)
            .and_then(|a| a.add(&h_anc.embed(&layout)?))
            .expect("interaction layout holds both factors");
        max_abs(&crate::hilbert::commutator(v.matrix(), local.matrix()))
    };
    let n = spec.num_sites();
    (
        side(
            spec.cold_interaction(),
            spec.site_hamiltonian(1),
            spec.cold_hamiltonian(),
        ),
        side(spec.hot_interaction(), spec.site_hamiltonian(n), spec.hot_hamiltonian()),
    )
}

/// Linear interpolation of `n` frequencies from `first` to `last`.
pub fn linear_frequencies(first: f64, last: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![first],
        _ => (0..n)
            .map(|i| first + (last - first) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Total `σ_z` over the given qubit factors, embedded in `layout`.
pub fn total_sigma_z(layout: &SpaceLayout, labels: &[&str]) -> Result<HermitianOperator> {
    let mut acc = HermitianOperator::zeros(layout.clone());
    for l in labels {
        let z = HermitianOperator::new(SpaceLayout::single(*l, 2)?, pauli::z())?;
        acc = acc.add(&z.embed(layout)?)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn q(label: &str) -> SpaceLayout {
        SpaceLayout::single(label, 2).unwrap()
    }

    fn fig2_spec() -> EngineSpec {
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
    fn partial_swap_entries() {
        let zero = build_partial_swap(0.0, &q("a"), &q("b")).unwrap();
        assert_eq!(zero.max_abs(), 0.0);

        let v = build_partial_swap(0.3, &q("a"), &q("b")).unwrap();
        let m = v.matrix();
        let mut nonzero = vec![];
        for i in 0..4 {
            for j in 0..4 {
                if m[(i, j)].norm() > 0.0 {
                    nonzero.push((i, j, m[(i, j)]));
                }
            }
        }
        // |01⟩ = index 1, |10⟩ = index 2
        assert_eq!(nonzero.len(), 2);
        assert_eq!(nonzero[0], (1, 2, C64::new(0.3, 0.0)));
        assert_eq!(nonzero[1], (2, 1, C64::new(0.3, 0.0)));

        let layout = v.layout().clone();
        let z = total_sigma_z(&layout, &["a", "b"]).unwrap();
        assert_eq!(v.commutator_norm(&z).unwrap(), 0.0);
    }

    #[test]
    fn partial_swap_rejects_qudits() {
        let qutrit = SpaceLayout::single("t", 3).unwrap();
        assert!(matches!(build_partial_swap(0.1, &qutrit, &q("b")), Err(Error::Spec(_))));
    }

    #[test]
    fn xyz_special_cases() {
        let chain2 = SpaceLayout::new([("S1", 2), ("S2", 2)]).unwrap();
        let zero = build_xyz_coupling(0.0, 0.0, 0.0, &chain2).unwrap();
        assert_eq!(zero.max_abs(), 0.0);

        let xx = build_xyz_coupling(0.8, 0.8, 0.0, &chain2).unwrap();
        let swap = build_partial_swap(1.6, &q("S1"), &q("S2")).unwrap();
        assert_abs_diff_eq!(max_abs(&(xx.matrix() - swap.matrix())), 0.0, epsilon = 1e-15);

        let chain3 = SpaceLayout::new([("S1", 2), ("S2", 2), ("S3", 2)]).unwrap();
        let zz = build_xyz_coupling(0.0, 0.0, 0.7, &chain3).unwrap();
        for idx in 0..8usize {
            let bits: Vec<f64> = (0..3)
                .map(|k| if (idx >> (2 - k)) & 1 == 0 { 1.0 } else { -1.0 })
                .collect();
            let expect = 0.7 * (bits[0] * bits[1] + bits[1] * bits[2]);
            assert_abs_diff_eq!(zz.matrix()[(idx, idx)].re, expect, epsilon = 1e-15);
        }
        let qutrits = SpaceLayout::new([("S1", 3), ("S2", 2)]).unwrap();
        assert!(build_xyz_coupling(1.0, 1.0, 0.0, &qutrits).is_err());
    }

    #[test]
    fn heat_hamiltonian_structure() {
        let spec = fig2_spec();
        let hq = build_heat_hamiltonian(&spec);
        assert_eq!(hq.dim(), 16);
        let labels: Vec<&str> = hq.layout().labels().iter().map(String::as_str).collect();
        assert_eq!(labels, ["C", "S1", "S2", "H"]);
        let z = total_sigma_z(hq.layout(), &labels).unwrap();
        assert!(hq.commutator_norm(&z).unwrap() < 1e-15);

        let uncoupled = EngineSpec::qubit_chain(
            &[0.75, 1.0],
            CouplingSpec::partial_swap_uniform(0.0, 2),
            (0.4, 0.0),
            (0.8, 0.0),
            1.0,
            1.0,
        )
        .unwrap();
        let h0 = build_heat_hamiltonian(&uncoupled);
        let m = h0.matrix();
        for i in 0..16 {
            for j in 0..16 {
                if i != j {
                    assert_eq!(m[(i, j)].norm(), 0.0);
                }
            }
        }
    }

    #[test]
    fn work_hamiltonian_spectrum() {
        let (w1, w2, g): (f64, f64, f64) = (0.75, 1.0, 0.3);
        let hw = build_work_hamiltonian(&fig2_spec()).unwrap();
        let wr = (4.0 * g * g + (w1 - w2) * (w1 - w2)).sqrt();
        let mut expect = vec![-(w1 + w2) / 2.0, -wr / 2.0, wr / 2.0, (w1 + w2) / 2.0];
        expect.sort_by(f64::total_cmp);
        for (a, b) in hw.eigenvalues().iter().zip(&expect) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn xx_chain_conserves_magnetization() {
        let omegas = linear_frequencies(1.5, 2.0, 5);
        let spec = EngineSpec::qubit_chain(&omegas, CouplingSpec::xx(0.8), (0.2, 1.0), (0.8, 1.0), 1.0, 0.25).unwrap();
        let hw = build_work_hamiltonian(&spec).unwrap();
        assert_eq!(hw.dim(), 32);
        let chain = spec.chain_layout();
        let labels: Vec<String> = chain.labels().to_vec();
        let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
        let z = total_sigma_z(&chain, &refs).unwrap();
        assert!(hw.commutator_norm(&z).unwrap() < 1e-14);
    }

    #[test]
    fn strict_energy_conservation_norms() {
        assert_eq!(check_strict_energy_conservation(&fig2_spec()), (0.0, 0.0));

        let spec = fig2_spec();
        let detuned = spec
            .with_baths(BathSpec::qubit(0.9, 0.4, 0.3).unwrap(), spec.hot().clone())
            .unwrap();
        let (c, h) = check_strict_energy_conservation(&detuned);
        assert_abs_diff_eq!(c, 0.15 * 0.3, epsilon = 1e-15);
        assert_eq!(h, 0.0);

        let free = EngineSpec::qubit_chain(
            &[0.3, 1.1, 0.9],
            CouplingSpec::partial_swap_uniform(0.0, 3),
            (0.4, 0.0),
            (0.8, 0.0),
            1.0,
            1.0,
        )
        .unwrap();
        assert_eq!(check_strict_energy_conservation(&free), (0.0, 0.0));
    }

    #[test]
    fn spec_validation() {
        let bad_n = EngineSpec::qubit_chain(&[1.0], CouplingSpec::xx(1.0), (0.1, 1.0), (0.2, 1.0), 1.0, 1.0);
        assert!(bad_n.is_err());
        let hot_cold = EngineSpec::qubit_chain(&[1.0, 1.0], CouplingSpec::xx(1.0), (0.9, 1.0), (0.2, 1.0), 1.0, 1.0);
        assert!(hot_cold.is_err());
        let bonds = EngineSpec::qubit_chain(
            &[1.0, 1.0, 1.0],
            CouplingSpec::PartialSwap { g: vec![0.1] },
            (0.1, 1.0),
            (0.2, 1.0),
            1.0,
            1.0,
        );
        assert!(bonds.is_err());
        assert!(BathSpec::qubit(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn interaction_forms() {
        let f = |c| {
            EngineSpec::qubit_chain(&[1.5, 1.75, 2.0], c, (0.2, 1.0), (0.8, 1.0), 1.0, 0.25)
                .unwrap()
                .interaction_form()
        };
        assert!(matches!(
            f(CouplingSpec::xx(0.8)),
            InteractionForm::Eigenoperator { .. }
        ));
        assert!(matches!(
            f(CouplingSpec::xxz(0.8, 0.7)),
            InteractionForm::NotApplicable { .. }
        ));
        assert!(matches!(
            f(CouplingSpec::Xyz {
                jx: 0.8,
                jy: 0.3,
                jz: 0.0
            }),
            InteractionForm::NotGuaranteed { .. }
        ));
    }
}
