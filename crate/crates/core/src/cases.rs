//! Built-in benchmark cases with their published parameter sets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analytic1d::{EigenConfig, ModelParams};
use crate::cplx::C64;
use crate::error::{Error, Result};

/// Regular set: jump at 1/2, aligned with every dyadic mesh.
pub const REGULAR_B: f64 = 0.5;
pub const REGULAR_A_R: (f64, f64) = (0.1069220800406739, 0.08937533852238478);
pub const REGULAR_C: (f64, f64) = (-0.9634059612381408, 0.5989684988897067);
pub const REGULAR_LAMBDA: (f64, f64) = (5.250721274740938, 6.750931815875402);

/// Reduced-regularity set: jump at 1/3, never a dyadic mesh node.
pub const REDUCED_B: f64 = 1.0 / 3.0;
pub const REDUCED_A_R: (f64, f64) = (8.834634001449438, 2.381273183203226);
pub const REDUCED_C: (f64, f64) = (-23.62602259938114, 23.10185194698031);
pub const REDUCED_LAMBDA: (f64, f64) = (72.26224904068889, 65.85698689932984);

fn c(p: (f64, f64)) -> C64 {
    C64::new(p.0, p.1)
}

pub fn regular_config() -> EigenConfig {
    EigenConfig {
        params: ModelParams { b: REGULAR_B, a_r: c(REGULAR_A_R), c: c(REGULAR_C) },
        lambda: c(REGULAR_LAMBDA),
        ascent: 3,
        residuals: Vec::new(),
    }
}

pub fn reduced_config() -> EigenConfig {
    EigenConfig {
        params: ModelParams { b: REDUCED_B, a_r: c(REDUCED_A_R), c: c(REDUCED_C) },
        lambda: c(REDUCED_LAMBDA),
        ascent: 3,
        residuals: Vec::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseId {
    Regular1d,
    Reduced1d,
    Regular2dTri,
    Reduced2dTri,
    Regular2dTensor,
    Regular3dTensor,
}

impl CaseId {
    pub const ALL: [CaseId; 6] = [
        CaseId::Regular1d,
        CaseId::Reduced1d,
        CaseId::Regular2dTri,
        CaseId::Reduced2dTri,
        CaseId::Regular2dTensor,
        CaseId::Regular3dTensor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CaseId::Regular1d => "regular1d",
            CaseId::Reduced1d => "reduced1d",
            CaseId::Regular2dTri => "regular2d_tri",
            CaseId::Reduced2dTri => "reduced2d_tri",
            CaseId::Regular2dTensor => "regular2d_tensor",
            CaseId::Regular3dTensor => "regular3d_tensor",
        }
    }

    pub fn is_regular(self) -> bool {
        !matches!(self, CaseId::Reduced1d | CaseId::Reduced2dTri)
    }

    pub fn dim(self) -> usize {
        match self {
            CaseId::Regular1d | CaseId::Reduced1d => 1,
            CaseId::Regular3dTensor => 3,
            _ => 2,
        }
    }

    /// The 1D parameter set the case is built from.
    pub fn base_config(self) -> EigenConfig {
        if self.is_regular() {
            regular_config()
        } else {
            reduced_config()
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaseId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        CaseId::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown case '{s}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for id in CaseId::ALL {
            assert_eq!(id.as_str().parse::<CaseId>().unwrap(), id);
        }
        assert!("bogus".parse::<CaseId>().is_err());
    }

    #[test]
    fn published_params_are_admissible() {
        regular_config().params.validate().unwrap();
        reduced_config().params.validate().unwrap();
    }
}
