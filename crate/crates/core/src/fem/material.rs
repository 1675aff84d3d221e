use serde::{Deserialize, Serialize};

use crate::microgen::Phase;

/// Isotropic linear-elastic constituent, optionally with exponential softening.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Young's modulus, Pa.
    pub e: f64,
    pub nu: f64,
    /// Tensile strength, Pa; `None` for elastic constituents.
    pub f_t: Option<f64>,
    /// Fracture energy, N/m.
    pub g_f: Option<f64>,
    pub shrinks: bool,
}

impl MaterialParams {
    pub const MORTAR: MaterialParams = MaterialParams {
        e: 25e9,
        nu: 0.2,
        f_t: Some(4e6),
        g_f: Some(100.0),
        shrinks: true,
    };
    pub const ITZ: MaterialParams = MaterialParams {
        e: 25e9,
        nu: 0.2,
        f_t: Some(3e6),
        g_f: Some(75.0),
        shrinks: true,
    };
    pub const AGGREGATE: MaterialParams = MaterialParams {
        e: 50e9,
        nu: 0.2,
        f_t: None,
        g_f: None,
        shrinks: false,
    };

    /// Strain at damage onset, `f_t / E`; infinite for elastic constituents.
    pub fn onset_strain(&self) -> f64 {
        self.f_t.map_or(f64::INFINITY, |ft| ft / self.e)
    }

    pub fn softens(&self) -> bool {
        self.f_t.is_some() && self.g_f.is_some()
    }
}

/// Constituent properties per phase.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseMaterials {
    pub aggregate: MaterialParams,
    pub itz: MaterialParams,
    pub mortar: MaterialParams,
}

impl Default for PhaseMaterials {
    fn default() -> Self {
        Self {
            aggregate: MaterialParams::AGGREGATE,
            itz: MaterialParams::ITZ,
            mortar: MaterialParams::MORTAR,
        }
    }
}

impl PhaseMaterials {
    pub fn get(&self, phase: Phase) -> &MaterialParams {
        match phase {
            Phase::Aggregate => &self.aggregate,
            Phase::Itz => &self.itz,
            Phase::Mortar => &self.mortar,
        }
    }

    /// Element matrices are shared across phases, which needs one Poisson ratio.
    pub fn common_nu(&self) -> Option<f64> {
        let nu = self.mortar.nu;
        (self.itz.nu == nu && self.aggregate.nu == nu).then_some(nu)
    }
}
