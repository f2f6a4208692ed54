//! Cubes Λ_L = (-L/2, L/2)^d, (G,δ)-equidistributed ball arrangements, and
//! membership predicates for every region the estimate pipeline touches.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
    Periodic,
}

impl std::fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundaryCondition::Dirichlet => write!(f, "dirichlet"),
            BoundaryCondition::Neumann => write!(f, "neumann"),
            BoundaryCondition::Periodic => write!(f, "periodic"),
        }
    }
}

/// The cube Λ_L = (-L/2, L/2)^d with a boundary-condition tag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: f64,
    pub bc: BoundaryCondition,
}

impl Domain {
    pub fn new(d: usize, l: f64, bc: BoundaryCondition) -> Result<Self> {
        if d != 1 && d != 2 {
            return Err(Error::InvalidParameter(format!("dimension d must be 1 or 2, got {d}")));
        }
        if !(l > 0.0) {
            return Err(Error::InvalidParameter(format!("side length L must be positive, got {l}")));
        }
        Ok(Domain { d, l, bc })
    }

    /// Strict interior test: x ∈ Λ_L.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().take(self.d).all(|&xi| xi.abs() < self.l / 2.0)
    }

    pub fn volume(&self) -> f64 {
        self.l.powi(self.d as i32)
    }
}

/// How ball centers are placed inside their cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlacementMode {
    Centered,
    Random { seed: u64 },
}

/// A (G,δ)-equidistributed sequence: one ball B(z_j, δ) per G-cell of Λ_L,
/// each ball inside its cell. Cells tile Λ_L with centers
/// -L/2 + G(m + 1/2), m ∈ {0..L/G-1}^d; for odd L/G these are the lattice
/// points (GZ)^d ∩ Λ_L.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquidistributedSequence {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "G")]
    pub g: f64,
    pub delta: f64,
    /// (cell multi-index, center) pairs in lexicographic index order.
    pub points: Vec<(Vec<i64>, Vec<f64>)>,
}

impl EquidistributedSequence {
    pub fn cells_per_side(&self) -> usize {
        (self.l / self.g).round() as usize
    }

    pub fn centers(&self) -> impl Iterator<Item = &[f64]> {
        self.points.iter().map(|(_, z)| z.as_slice())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Divide every length by `factor` (the scaling map g(y) = G·y sends the
    /// sequence on Λ_L to one on Λ_{L/factor} with G/factor-cells).
    pub fn rescaled(&self, factor: f64) -> EquidistributedSequence {
        EquidistributedSequence {
            d: self.d,
            l: self.l / factor,
            g: self.g / factor,
            delta: self.delta / factor,
            points: self
                .points
                .iter()
                .map(|(j, z)| (j.clone(), z.iter().map(|zi| zi / factor).collect()))
                .collect(),
        }
    }
}

/// Center of cell `m` in the K^d tiling of Λ_L by G-cells.
pub fn cell_center(domain: &Domain, g: f64, m: &[i64]) -> Vec<f64> {
    m.iter().map(|&mi| -domain.l / 2.0 + g * (mi as f64 + 0.5)).collect()
}

fn lexicographic_cells(d: usize, k: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::with_capacity(k.pow(d as u32));
    match d {
        1 => {
            for i in 0..k {
                out.push(vec![i as i64]);
            }
        }
        2 => {
            for i in 0..k {
                for j in 0..k {
                    out.push(vec![i as i64, j as i64]);
                }
            }
        }
        _ => unreachable!("d capped at 2"),
    }
    out
}

/// Build a (G,δ)-equidistributed sequence on Λ_L.
///
/// Centered mode puts each ball concentric with its cell. Random mode samples
/// each center uniformly from the Euclidean ball of radius G/2 - δ around the
/// cell center, which is sufficient for B(z_j, δ) ⊂ Λ_G + j.
pub fn make_equidistributed(
    domain: &Domain,
    g: f64,
    delta: f64,
    mode: PlacementMode,
) -> Result<EquidistributedSequence> {
    if !(g > 0.0) {
        return Err(Error::InvalidParameter(format!("G must be positive, got {g}")));
    }
    if !(delta > 0.0 && delta < g / 2.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must satisfy 0 < delta < G/2 = {}, got {delta}",
            g / 2.0
        )));
    }
    let ratio = domain.l / g;
    let k = ratio.round();
    if k < 1.0 || (ratio - k).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "L/G must be a positive integer, got {ratio}"
        )));
    }
    let k = k as usize;

    let mut rng = match mode {
        PlacementMode::Centered => None,
        PlacementMode::Random { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
    };
    let max_offset = g / 2.0 - delta;

    let mut points = Vec::with_capacity(k.pow(domain.d as u32));
    for m in lexicographic_cells(domain.d, k) {
        let c = cell_center(domain, g, &m);
        let z = match rng.as_mut() {
            None => c,
            Some(rng) => {
                // Rejection sampling from the cube onto the Euclidean ball of
                // radius max_offset; deterministic given the seed.
                loop {
                    let off: Vec<f64> =
                        (0..domain.d).map(|_| rng.gen_range(-max_offset..=max_offset)).collect();
                    if off.iter().map(|o| o * o).sum::<f64>() <= max_offset * max_offset {
                        break c.iter().zip(&off).map(|(ci, oi)| ci + oi).collect();
                    }
                }
            }
        };
        points.push((m, z));
    }
    Ok(EquidistributedSequence { d: domain.d, l: domain.l, g, delta, points })
}

/// x ∈ W_δ(L) = ∪_j B(z_j, δ) ∩ Λ_L. Balls are open; points outside Λ_L
/// return false.
pub fn in_w_delta(x: &[f64], seq: &EquidistributedSequence, domain: &Domain) -> bool {
    if !domain.contains(x) {
        return false;
    }
    seq.centers().any(|z| dist_sq(x, z) < seq.delta * seq.delta)
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lebesgue measure of W_δ(L): balls never cross ∂Λ_L by the cell invariant,
/// so this is just (L/G)^d times the ball volume.
pub fn ball_measure(seq: &EquidistributedSequence) -> f64 {
    let n_cells = seq.points.len() as f64;
    match seq.d {
        1 => n_cells * 2.0 * seq.delta,
        2 => n_cells * std::f64::consts::PI * seq.delta * seq.delta,
        _ => unreachable!(),
    }
}

/// Regions in R^{d+1} used by the ghost-dimension estimates. The first d
/// coordinates are spatial, the last is the ghost variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Region {
    /// Λ_L × [-1, 1]
    X1 { d: usize, l: f64 },
    /// Λ_{L+2R₃} × [-R₃, R₃]
    XTildeR3 { d: usize, l: f64, r3: f64 },
    /// Paraboloid-like lens at z: -t + t²/2 - |x-z|²/4 > -δ²/16, t ∈ [0,1]
    S1 { z: Vec<f64>, delta: f64 },
    /// Same with threshold -δ²/4
    S3 { z: Vec<f64>, delta: f64 },
    /// ∪_j S1(z_j) over the sequence sites
    U1 { centers: Vec<Vec<f64>>, delta: f64 },
    /// ∪_j S3(z_j)
    U3 { centers: Vec<Vec<f64>>, delta: f64 },
    /// Axis-aligned closed box (quadrature helper)
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

fn lens_value(x: &[f64], z: &[f64]) -> f64 {
    let d = z.len();
    let t = x[d];
    let s: f64 = (0..d).map(|i| (x[i] - z[i]) * (x[i] - z[i])).sum();
    -t + t * t / 2.0 - s / 4.0
}

fn in_lens(x: &[f64], z: &[f64], threshold: f64) -> bool {
    let t = x[z.len()];
    (0.0..=1.0).contains(&t) && lens_value(x, z) > -threshold
}

impl Region {
    pub fn u1(seq: &EquidistributedSequence) -> Region {
        Region::U1 { centers: seq.points.iter().map(|(_, z)| z.clone()).collect(), delta: seq.delta }
    }

    pub fn u3(seq: &EquidistributedSequence) -> Region {
        Region::U3 { centers: seq.points.iter().map(|(_, z)| z.clone()).collect(), delta: seq.delta }
    }

    /// Exact membership predicate; x has d+1 coordinates.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::X1 { d, l } => {
                x[..*d].iter().all(|xi| xi.abs() < l / 2.0) && x[*d].abs() <= 1.0
            }
            Region::XTildeR3 { d, l, r3 } => {
                let half = (l + 2.0 * r3) / 2.0;
                x[..*d].iter().all(|xi| xi.abs() < half) && x[*d].abs() <= *r3
            }
            Region::S1 { z, delta } => in_lens(x, z, delta * delta / 16.0),
            Region::S3 { z, delta } => in_lens(x, z, delta * delta / 4.0),
            Region::U1 { centers, delta } => {
                centers.iter().any(|z| in_lens(x, z, delta * delta / 16.0))
            }
            Region::U3 { centers, delta } => {
                centers.iter().any(|z| in_lens(x, z, delta * delta / 4.0))
            }
            Region::Box { lo, hi } => {
                x.iter().zip(lo.iter().zip(hi)).all(|(xi, (a, b))| *a <= *xi && *xi <= *b)
            }
        }
    }

    /// Largest ghost height of the lens S_i(z): positive root of
    /// t²/2 - t + δ²/c = 0 below 1.
    pub fn lens_t_max(delta: f64, threshold_divisor: f64) -> f64 {
        1.0 - (1.0 - 2.0 * delta * delta / threshold_divisor).sqrt()
    }

    /// Axis-aligned bounding box (lo, hi) in R^{d+1}.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Region::X1 { d, l } => {
                let mut lo = vec![-l / 2.0; *d];
                let mut hi = vec![l / 2.0; *d];
                lo.push(-1.0);
                hi.push(1.0);
                (lo, hi)
            }
            Region::XTildeR3 { d, l, r3 } => {
                let half = (l + 2.0 * r3) / 2.0;
                let mut lo = vec![-half; *d];
                let mut hi = vec![half; *d];
                lo.push(-r3);
                hi.push(*r3);
                (lo, hi)
            }
            Region::S1 { z, delta } => lens_box(z, delta / 2.0, Self::lens_t_max(*delta, 16.0)),
            Region::S3 { z, delta } => lens_box(z, *delta, Self::lens_t_max(*delta, 4.0)),
            Region::U1 { centers, delta } => {
                union_box(centers, delta / 2.0, Self::lens_t_max(*delta, 16.0))
            }
            Region::U3 { centers, delta } => {
                union_box(centers, *delta, Self::lens_t_max(*delta, 4.0))
            }
            Region::Box { lo, hi } => (lo.clone(), hi.clone()),
        }
    }

    /// For the union regions: the per-site lens regions (disjoint because the
    /// balls live in disjoint cells), for site-by-site quadrature.
    pub fn union_components(&self) -> Option<Vec<Region>> {
        match self {
            Region::U1 { centers, delta } => Some(
                centers.iter().map(|z| Region::S1 { z: z.clone(), delta: *delta }).collect(),
            ),
            Region::U3 { centers, delta } => Some(
                centers.iter().map(|z| Region::S3 { z: z.clone(), delta: *delta }).collect(),
            ),
            _ => None,
        }
    }
}

fn lens_box(z: &[f64], radius: f64, t_max: f64) -> (Vec<f64>, Vec<f64>) {
    let mut lo: Vec<f64> = z.iter().map(|zi| zi - radius).collect();
    let mut hi: Vec<f64> = z.iter().map(|zi| zi + radius).collect();
    lo.push(0.0);
    hi.push(t_max);
    (lo, hi)
}

fn union_box(centers: &[Vec<f64>], radius: f64, t_max: f64) -> (Vec<f64>, Vec<f64>) {
    let d = centers[0].len();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for z in centers {
        for i in 0..d {
            lo[i] = lo[i].min(z[i] - radius);
            hi[i] = hi[i].max(z[i] + radius);
        }
    }
    lo.push(0.0);
    hi.push(t_max);
    (lo, hi)
}
