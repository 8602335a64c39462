//! Scenario files: a plain-text key/value tree (TOML) describing the grid,
//! potentials, sweeps, frames, modes, and tolerances of one experiment run.
//!
//! Every run records the SHA-256 of the scenario text in its manifest so
//! artifacts can be traced back to the exact configuration.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::potentials::{Bump, PotentialSpec};
use crate::spinor::{RVec3, C};

fn v3(a: [f64; 3]) -> RVec3 {
    RVec3::new(a[0], a[1], a[2])
}

/// Grid section: a centred cube with an odd node count per axis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridScenario {
    pub half_width: f64,
    pub n: usize,
}

impl GridScenario {
    pub fn build(&self) -> Result<GridSpec> {
        GridSpec::cube(self.half_width, self.n)
    }
}

/// One bump primitive in a potential section.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BumpScenario {
    Gaussian { center: [f64; 3], sigma: f64 },
    Poly { center: [f64; 3], radius: f64 },
    Tent { center: [f64; 3], radius: f64 },
    QuadWell { center: [f64; 3], radius: f64 },
}

impl BumpScenario {
    pub fn build(&self) -> Bump {
        match *self {
            BumpScenario::Gaussian { center, sigma } => Bump::Gaussian {
                center: v3(center),
                sigma,
            },
            BumpScenario::Poly { center, radius } => Bump::Poly {
                center: v3(center),
                radius,
            },
            BumpScenario::Tent { center, radius } => Bump::Tent {
                center: v3(center),
                radius,
            },
            BumpScenario::QuadWell { center, radius } => Bump::QuadWell {
                center: v3(center),
                radius,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VectorTerm {
    pub direction: [f64; 3],
    #[serde(flatten)]
    pub bump: BumpScenario,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalarTerm {
    /// complex amplitude as [re, im]
    pub amplitude: [f64; 2],
    #[serde(flatten)]
    pub bump: BumpScenario,
}

/// Closed-form potential description.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PotentialScenario {
    #[serde(default)]
    pub a: Vec<VectorTerm>,
    #[serde(default)]
    pub qp: Vec<ScalarTerm>,
    #[serde(default)]
    pub qm: Vec<ScalarTerm>,
    /// constant offsets [re, im] added to q± everywhere
    #[serde(default)]
    pub qp_const: [f64; 2],
    #[serde(default)]
    pub qm_const: [f64; 2],
}

impl PotentialScenario {
    pub fn build(&self) -> PotentialSpec {
        PotentialSpec {
            a_terms: self
                .a
                .iter()
                .map(|t| (v3(t.direction), t.bump.build()))
                .collect(),
            qp_terms: self
                .qp
                .iter()
                .map(|t| (C::new(t.amplitude[0], t.amplitude[1]), t.bump.build()))
                .collect(),
            qm_terms: self
                .qm
                .iter()
                .map(|t| (C::new(t.amplitude[0], t.amplitude[1]), t.bump.build()))
                .collect(),
            qp_const: C::new(self.qp_const[0], self.qp_const[1]),
            qm_const: C::new(self.qm_const[0], self.qm_const[1]),
        }
    }
}

/// Parameter sweeps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepScenario {
    #[serde(default)]
    pub h: Vec<f64>,
    #[serde(default)]
    pub m: Vec<f64>,
    /// mollifier exponent for Lipschitz ansatz builds
    #[serde(default)]
    pub sigma: Option<f64>,
    /// Carleman convexification strengths
    #[serde(default)]
    pub s: Vec<f64>,
}

impl Default for SweepScenario {
    fn default() -> Self {
        SweepScenario {
            h: vec![0.3, 0.2, 0.1],
            m: vec![8.0, 12.0, 16.0],
            sigma: None,
            s: vec![0.0],
        }
    }
}

/// Frame / Fourier-lattice selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameScenario {
    pub lattice_radius: i64,
    #[serde(default)]
    pub include_zero: bool,
}

impl Default for FrameScenario {
    fn default() -> Self {
        FrameScenario {
            lattice_radius: 3,
            include_zero: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryModeScenario {
    Oracle,
    Born,
}

impl Default for RecoveryModeScenario {
    fn default() -> Self {
        RecoveryModeScenario::Oracle
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ModeScenario {
    #[serde(default)]
    pub recovery: RecoveryModeScenario,
    /// Born-mode linearisation guard on the relative response size
    #[serde(default = "default_response_bound")]
    pub response_bound: f64,
}

fn default_response_bound() -> f64 {
    0.5
}

/// Boundary-determination section.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryScenario {
    pub x0: [f64; 3],
    pub inward_normal: [f64; 3],
    pub tangent: [f64; 3],
    /// absent = flat patch; present = spherical cap of this radius
    #[serde(default)]
    pub cap_radius: Option<f64>,
}

/// A complete experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub grid: GridScenario,
    #[serde(default)]
    pub potential: PotentialScenario,
    /// optional second potential (reference / comparison)
    #[serde(default)]
    pub reference: Option<PotentialScenario>,
    #[serde(default)]
    pub sweep: SweepScenario,
    #[serde(default)]
    pub frames: FrameScenario,
    #[serde(default)]
    pub modes: ModeScenario,
    #[serde(default)]
    pub boundary: Option<BoundaryScenario>,
    /// named numerical bounds asserted by the runner; failing any bound is
    /// a numerical assertion failure, not a crash
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<String>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        let sc: Scenario =
            toml::from_str(text).map_err(|e| Error::Scenario(format!("parse failure: {e}")))?;
        sc.validate()?;
        Ok(sc)
    }

    /// Read a scenario file and return it with the SHA-256 of its text.
    pub fn from_path(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Scenario(format!("cannot read {}: {e}", path.display())))?;
        let sc = Self::parse(&text)?;
        Ok((sc, sha256_hex(text.as_bytes())))
    }

    /// Structural validation beyond what the type system enforces.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid.build()?;
        let dx = grid.max_spacing();
        for &h in &self.sweep.h {
            if !(h > 0.0) {
                return Err(Error::Scenario(format!("sweep.h entries must be positive, got {h}")));
            }
            if h < 4.0 * dx {
                return Err(Error::Scenario(format!(
                    "Nyquist violation: h = {h} < 4 dx = {} on an n = {} grid; refine the grid \
                     or drop this h",
                    4.0 * dx,
                    self.grid.n
                )));
            }
        }
        for &m in &self.sweep.m {
            if !(m > 0.0) {
                return Err(Error::Scenario("sweep.m entries must be positive".into()));
            }
        }
        if self.frames.lattice_radius < 0 {
            return Err(Error::Scenario("frames.lattice_radius must be >= 0".into()));
        }
        if let Some(b) = &self.boundary {
            let nu = v3(b.inward_normal);
            let t = v3(b.tangent);
            if (nu.norm() - 1.0).abs() > 1e-9 || (t.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::Scenario(
                    "boundary normal and tangent must be unit vectors".into(),
                ));
            }
            if nu.dot(&t).abs() > 1e-9 {
                return Err(Error::Scenario(
                    "boundary tangent must be orthogonal to the normal".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn tolerance(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
        [grid]
        half_width = 0.5
        n = 21

        [potential]
        qp_const = [0.8, 0.0]
        qm_const = [0.7, 0.0]

        [[potential.a]]
        direction = [0.05, 0.0, 0.0]
        kind = "gaussian"
        center = [0.0, 0.0, 0.0]
        sigma = 0.12

        [sweep]
        h = [0.3, 0.2]
        m = [8.0, 12.0, 16.0]

        [frames]
        lattice_radius = 2

        [modes]
        recovery = "born"

        [tolerances]
        curl_rel = 0.1
    "#;

    #[test]
    fn parses_and_builds() {
        let sc = Scenario::parse(SAMPLE).unwrap();
        assert_eq!(sc.grid.n, 21);
        assert_eq!(sc.sweep.h, vec![0.3, 0.2]);
        assert!(matches!(sc.modes.recovery, RecoveryModeScenario::Born));
        let spec = sc.potential.build();
        assert_eq!(spec.a_terms.len(), 1);
        assert!((spec.qp_const.re - 0.8).abs() < 1e-15);
        assert!((sc.tolerance("curl_rel", 1.0) - 0.1).abs() < 1e-15);
        assert!((sc.tolerance("missing", 2.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_unresolvable_h() {
        let text = SAMPLE.replace("h = [0.3, 0.2]", "h = [0.05]");
        let err = Scenario::parse(&text).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("Nyquist"), "unexpected message: {msg}");
    }

    #[test]
    fn rejects_malformed_toml() {
        assert!(matches!(
            Scenario::parse("grid = nope"),
            Err(Error::Scenario(_))
        ));
    }

    #[test]
    fn hash_is_stable_and_content_sensitive() {
        let a = sha256_hex(b"abc");
        assert_eq!(
            a,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_ne!(a, sha256_hex(b"abd"));
    }
}
