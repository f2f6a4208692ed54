//! Experiment configuration and result records. A record embeds the full
//! experiment configuration (command + master seed) and its SHA-256 hash;
//! re-running an identical configuration reproduces every value bit for bit,
//! independently of thread count. Execution details (threads, output path,
//! wall-clock timings) are deliberately outside the hashed configuration, and
//! timings stay out of records unless explicitly requested.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use uclab_core::geometry::{BoundaryCondition, PlacementMode};
use uclab_core::spectral::PotentialSpec;
use uclab_core::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertClass {
    A,
    B,
    Poly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiSpec {
    /// k-th eigenfunction, 1-based.
    Mode { k: usize },
    /// Unit-norm random complex coefficients from the master seed.
    Random,
    /// α_k ∝ e^{-rate·√max(0,E_k)}.
    Decay { rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub d: usize,
    pub l: f64,
    pub bc: BoundaryCondition,
    /// Potential in the CLI string syntax (see `parse_potential`).
    pub potential: String,
    pub lambda_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceParams {
    pub g: f64,
    pub delta: f64,
    /// "centered" or "random" (random draws from the master seed).
    pub placement: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "snake_case")]
pub enum CommandSpec {
    Spectrum {
        system: SystemParams,
    },
    Certify {
        system: SystemParams,
        class: CertClass,
        kappa: f64,
        phi: PhiSpec,
    },
    Constants {
        d: usize,
        g: f64,
        delta: f64,
        kappa: f64,
        ln_d_a: f64,
        ln_d_b: f64,
        v_inf: f64,
        v_plus: f64,
        v_minus: f64,
        n_a: f64,
        n_b: f64,
    },
    Observe {
        system: SystemParams,
        sequence: SequenceParams,
        target: ObserveTarget,
    },
    Sweep {
        /// Base observe experiment whose parameter is swept.
        system: SystemParams,
        sequence: SequenceParams,
        target: ObserveTarget,
        param: String,
        values: Vec<f64>,
        /// Fit the dimensional exponent from the rows (delta sweeps).
        fit: bool,
    },
    Ghost {
        system: SystemParams,
        phi: PhiSpec,
        n: usize,
        check: GhostCheck,
    },
    Counterexample {
        d: usize,
        l: f64,
        delta: f64,
        kappa: f64,
        radius_fraction: f64,
        lambda_max: f64,
    },
    Verify {
        /// Battery sizes kept small; the full acceptance suite lives in the
        /// test harness.
        quick: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObserveTarget {
    Subspace { n: usize },
    Class { variant: String, kappa: f64, ln_d: f64, n_exponent: f64, n_trunc: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GhostCheck {
    TwoSided { t: f64 },
    Interpolation { sequence: SequenceParams, qmc_points: usize },
}

/// The reproducibility unit: everything the numbers depend on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub command: CommandSpec,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serialization cannot fail")
    }

    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.canonical_json().as_bytes());
        let digest = h.finalize();
        let mut out = String::with_capacity(64);
        for b in digest {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    HypothesisViolation,
    Inconclusive,
    Complete,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass | Status::Complete => 0,
            Status::Fail => 1,
            Status::HypothesisViolation => 2,
            Status::Inconclusive => 3,
        }
    }

    pub fn from_error(e: &Error) -> Status {
        match e.exit_class() {
            1 => Status::Fail,
            2 => Status::HypothesisViolation,
            _ => Status::Inconclusive,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub status: Status,
    pub results: serde_json::Value,
    pub error: Option<String>,
    /// Filled only on request; wall-clock time breaks bitwise reproducibility
    /// of records, so it defaults to absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<u128>,
}

/// Potential syntax: `0`, `const:<c>`, `cos:<k>=<a>[,<k>=<a>...]` (d-dim
/// wavenumbers joined by `.`), `cells:<K>:<v1>,<v2>,...`,
/// `randcells:<K>:<amplitude>` (drawn from the master seed).
pub fn parse_potential(s: &str, d: usize, seed: u64) -> Result<PotentialSpec, Error> {
    if s == "0" {
        return Ok(PotentialSpec::zero());
    }
    if let Some(rest) = s.strip_prefix("const:") {
        let c: f64 = rest
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad constant potential: {s}")))?;
        return Ok(PotentialSpec::Constant { c });
    }
    if let Some(rest) = s.strip_prefix("cos:") {
        let mut terms = Vec::new();
        for part in rest.split(',') {
            let (kpart, apart) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("bad cosine term: {part}")))?;
            let ks: Result<Vec<u32>, _> = kpart.split('.').map(|t| t.parse::<u32>()).collect();
            let ks = ks.map_err(|_| Error::InvalidParameter(format!("bad wavenumber: {kpart}")))?;
            if ks.len() != d {
                return Err(Error::InvalidParameter(format!(
                    "cosine term {part} has {} wavenumbers for d = {d}",
                    ks.len()
                )));
            }
            let a: f64 = apart
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad amplitude: {apart}")))?;
            terms.push((ks, a));
        }
        return Ok(PotentialSpec::Cosine { terms });
    }
    if let Some(rest) = s.strip_prefix("cells:") {
        let (kpart, vpart) = rest
            .split_once(':')
            .ok_or_else(|| Error::InvalidParameter(format!("bad cells potential: {s}")))?;
        let k: usize = kpart
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad cell count: {kpart}")))?;
        let values: Result<Vec<f64>, _> = vpart.split(',').map(|t| t.parse::<f64>()).collect();
        let values =
            values.map_err(|_| Error::InvalidParameter(format!("bad cell values: {vpart}")))?;
        return Ok(PotentialSpec::PiecewisePerCell { cells_per_side: k, values });
    }
    if let Some(rest) = s.strip_prefix("randcells:") {
        let (kpart, apart) = rest
            .split_once(':')
            .ok_or_else(|| Error::InvalidParameter(format!("bad randcells potential: {s}")))?;
        let k: usize = kpart
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad cell count: {kpart}")))?;
        let a: f64 = apart
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad amplitude: {apart}")))?;
        return Ok(PotentialSpec::random_cells(d, k, a, seed));
    }
    Err(Error::InvalidParameter(format!("unrecognized potential spec: {s}")))
}

pub fn parse_placement(s: &str, seed: u64) -> Result<PlacementMode, Error> {
    match s {
        "centered" => Ok(PlacementMode::Centered),
        "random" => Ok(PlacementMode::Random { seed }),
        other => Err(Error::InvalidParameter(format!(
            "placement must be 'centered' or 'random', got {other}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potential_parsing() {
        assert_eq!(parse_potential("0", 1, 0).unwrap(), PotentialSpec::zero());
        assert_eq!(
            parse_potential("const:-2.5", 1, 0).unwrap(),
            PotentialSpec::Constant { c: -2.5 }
        );
        assert_eq!(
            parse_potential("cos:2=-1.0,3=0.5", 1, 0).unwrap(),
            PotentialSpec::Cosine { terms: vec![(vec![2], -1.0), (vec![3], 0.5)] }
        );
        assert_eq!(
            parse_potential("cos:1.2=0.7", 2, 0).unwrap(),
            PotentialSpec::Cosine { terms: vec![(vec![1, 2], 0.7)] }
        );
        assert!(parse_potential("cos:1.2=0.7", 1, 0).is_err());
        assert_eq!(
            parse_potential("cells:2:1.0,-1.0", 1, 0).unwrap(),
            PotentialSpec::PiecewisePerCell { cells_per_side: 2, values: vec![1.0, -1.0] }
        );
        let r1 = parse_potential("randcells:3:2.0", 1, 7).unwrap();
        let r2 = parse_potential("randcells:3:2.0", 1, 7).unwrap();
        assert_eq!(r1, r2);
        assert!(parse_potential("nonsense", 1, 0).is_err());
    }

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let cfg = ExperimentConfig {
            command: CommandSpec::Constants {
                d: 1,
                g: 1.0,
                delta: 0.1,
                kappa: 50.0,
                ln_d_a: 0.0,
                ln_d_b: 1.0,
                v_inf: 0.0,
                v_plus: 0.0,
                v_minus: 0.0,
                n_a: 1.0,
                n_b: 1.0,
            },
            seed: 42,
        };
        assert_eq!(cfg.hash(), cfg.hash());
        let mut other = cfg.clone();
        other.seed = 43;
        assert_ne!(cfg.hash(), other.hash());
    }
}
