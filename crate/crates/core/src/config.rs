//! JSON description of an engine, plus the optional sweep and analytic blocks.
//!
//! ```json
//! {
//!   "sites": [{"omega": 0.75}, {"omega": 1.0}],
//!   "coupling": {"type": "partial_swap", "g": 0.3},
//!   "baths": {"cold": {"T": 0.4, "g": 0.3}, "hot": {"T": 0.8, "g": 0.3}},
//!   "tau_q": 1.0,
//!   "tau_w": 1.0
//! }
//! ```
//!
//! Unknown keys are rejected at every level.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{BathSpec, CouplingSpec, EngineSpec, SiteSpec};
use crate::error::{Error, Result};
use crate::strobe::InitialState;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    pub sites: Vec<SiteConfig>,
    pub coupling: CouplingConfig,
    pub baths: BathsConfig,
    pub tau_q: f64,
    pub tau_w: f64,
    /// `thermal_cold` (default), `ground` or `maximally_mixed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic: Option<AnalyticOverrides>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteConfig {
    pub omega: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingKind {
    Xx,
    Xxz,
    PartialSwap,
    Xyz,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    #[serde(rename = "type")]
    pub kind: CouplingKind,
    #[serde(rename = "Jx", default, skip_serializing_if = "Option::is_none")]
    pub jx: Option<f64>,
    #[serde(rename = "Jy", default, skip_serializing_if = "Option::is_none")]
    pub jy: Option<f64>,
    #[serde(rename = "Jz", default, skip_serializing_if = "Option::is_none")]
    pub jz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathsConfig {
    pub cold: BathConfig,
    pub hot: BathConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathConfig {
    #[serde(rename = "T")]
    pub temperature: f64,
    pub g: f64,
    /// Ancilla frequency; defaults to the boundary site's frequency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axes: Vec<AxisConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

/// Direct `(λ, p)` values for the two-qubit closed forms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl CouplingConfig {
    fn to_spec(&self, num_sites: usize) -> Result<CouplingSpec> {
        let name = match self.kind {
            CouplingKind::Xx => "xx",
            CouplingKind::Xxz => "xxz",
            CouplingKind::PartialSwap => "partial_swap",
            CouplingKind::Xyz => "xyz",
        };
        let need = |v: Option<f64>, key: &str| v.ok_or_else(|| cfg_err(format!("{name} coupling needs \"{key}\"")));
        let forbid = |v: Option<f64>, key: &str| match v {
            Some(_) => Err(cfg_err(format!("{name} coupling does not take \"{key}\""))),
            None => Ok(()),
        };
        match self.kind {
            CouplingKind::PartialSwap => {
                forbid(self.jx, "Jx")?;
                forbid(self.jy, "Jy")?;
                forbid(self.jz, "Jz")?;
                Ok(CouplingSpec::partial_swap_uniform(need(self.g, "g")?, num_sites))
            }
            CouplingKind::Xx => {
                forbid(self.g, "g")?;
                let jx = need(self.jx, "Jx")?;
                if self.jz.is_some_and(|jz| jz != 0.0) {
                    return Err(cfg_err("xx coupling must have Jz = 0; use xxz"));
                }
                Ok(CouplingSpec::Xyz {
                    jx,
                    jy: self.jy.unwrap_or(jx),
                    jz: 0.0,
                })
            }
            CouplingKind::Xxz => {
                forbid(self.g, "g")?;
                let jx = need(self.jx, "Jx")?;
                Ok(CouplingSpec::Xyz {
                    jx,
                    jy: self.jy.unwrap_or(jx),
                    jz: need(self.jz, "Jz")?,
                })
            }
            CouplingKind::Xyz => {
                forbid(self.g, "g")?;
                Ok(CouplingSpec::Xyz {
                    jx: need(self.jx, "Jx")?,
                    jy: need(self.jy, "Jy")?,
                    jz: need(self.jz, "Jz")?,
                })
            }
        }
    }
}

impl EngineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| cfg_err(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| cfg_err(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn to_spec(&self) -> Result<EngineSpec> {
        let n = self.sites.len();
        if n < 2 {
            return Err(cfg_err(format!("the chain needs at least 2 sites, got {n}")));
        }
        let sites = self
            .sites
            .iter()
            .map(|s| SiteSpec::qubit(s.omega))
            .collect::<Result<Vec<_>>>()?;
        let bath = |b: &BathConfig, site_omega: f64| BathSpec::qubit(b.omega.unwrap_or(site_omega), b.temperature, b.g);
        let cold = bath(&self.baths.cold, self.sites[0].omega)?;
        let hot = bath(&self.baths.hot, self.sites[n - 1].omega)?;
        let coupling = self.coupling.to_spec(n)?;
        EngineSpec::new(sites, cold, hot, coupling, self.tau_q, self.tau_w)
    }

    pub fn initial_state(&self) -> Result<InitialState> {
        match &self.initial_state {
            None => Ok(InitialState::ColdThermal),
            Some(s) => s.parse().map_err(|e: Error| cfg_err(e.to_string())),
        }
    }

    /// Config of a qubit-chain spec. Fails for specs the schema cannot
    /// express (qudits, explicit bonds, non-uniform partial swaps).
    pub fn from_spec(spec: &EngineSpec) -> Result<Self> {
        let freqs = spec
            .frequencies()
            .filter(|_| spec.sites().iter().all(SiteSpec::is_qubit))
            .ok_or_else(|| cfg_err("only qubit chains with site frequencies have a JSON form"))?;
        let n = freqs.len();
        let coupling = match spec.coupling() {
            CouplingSpec::PartialSwap { g } => {
                if g.iter().any(|x| *x != g[0]) {
                    return Err(cfg_err("non-uniform partial swaps have no JSON form"));
                }
                CouplingConfig {
                    kind: CouplingKind::PartialSwap,
                    jx: None,
                    jy: None,
                    jz: None,
                    g: Some(g[0]),
                }
            }
            &CouplingSpec::Xyz { jx, jy, jz } => {
                let kind = if jx != jy {
                    CouplingKind::Xyz
                } else if jz == 0.0 {
                    CouplingKind::Xx
                } else {
                    CouplingKind::Xxz
                };
                CouplingConfig {
                    kind,
                    jx: Some(jx),
                    jy: Some(jy),
                    jz: (kind != CouplingKind::Xx).then_some(jz),
                    g: None,
                }
            }
            CouplingSpec::Explicit { .. } => return Err(cfg_err("explicit bond operators have no JSON form")),
        };
        let bath = |b: &BathSpec, site_omega: f64| -> Result<BathConfig> {
            let omega = b
                .frequency()
                .ok_or_else(|| cfg_err("only qubit ancillas have a JSON form"))?;
            let rebuilt = BathSpec::qubit(omega, b.temperature(), b.coupling())?;
            if &rebuilt != b {
                return Err(cfg_err("only partial-swap ancilla couplings have a JSON form"));
            }
            Ok(BathConfig {
                temperature: b.temperature(),
                g: b.coupling(),
                omega: (omega != site_omega).then_some(omega),
            })
        };
        Ok(Self {
            sites: freqs.iter().map(|&omega| SiteConfig { omega }).collect(),
            coupling,
            baths: BathsConfig {
                cold: bath(spec.cold(), freqs[0])?,
                hot: bath(spec.hot(), freqs[n - 1])?,
            },
            tau_q: spec.tau_q(),
            tau_w: spec.tau_w(),
            initial_state: None,
            sweep: None,
            analytic: None,
        })
    }
}
