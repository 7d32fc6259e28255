//! A discrete target on SO(3) noised by unit-rate Brownian motion.
//!
//! `p_0` is a weighted sum of Dirac masses at `K` atoms, so `p_t` is an IGSO3
//! mixture with an exact score. Forward and reverse geodesic random walks on
//! a shared time grid should produce matching marginals at every grid time.

use rand::Rng;
use rayon::prelude::*;

use crate::igso3::{f_and_df, TruncationConfig};
use crate::rng::{aux_stream, stream};
use crate::so3::{
    expmap, hat_matrix, log_vec, rotation_angle, sample_tangent_gaussian, Mat3, Rotation,
    UniformSo3Sampler, Vec3,
};
use crate::stats::{histogram, ks_two_sample};
use crate::tabulated::linspace;
use crate::{Error, Result};

/// Default number of atoms.
pub const DEFAULT_ATOMS: usize = 3;

/// `Σ_k w_k δ_{atom_k}` on SO(3).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTarget {
    atoms: Vec<Rotation>,
    weights: Vec<f64>,
}

impl DiscreteTarget {
    pub fn new(atoms: Vec<Rotation>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "target needs matching nonempty atoms and weights ({} vs {})",
                atoms.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput("target weights must be nonnegative and sum to 1".into()));
        }
        Ok(DiscreteTarget { atoms, weights })
    }

    pub fn uniform(atoms: Vec<Rotation>) -> Result<Self> {
        let k = atoms.len();
        DiscreteTarget::new(atoms, vec![1.0 / k.max(1) as f64; k])
    }

    /// `k` Haar-uniform atoms with equal weights, drawn from `seed`.
    pub fn random(k: usize, seed: u64) -> Result<Self> {
        let mut rng = aux_stream(seed, 0);
        let uniform = UniformSo3Sampler::default();
        DiscreteTarget::uniform((0..k).map(|_| uniform.sample(&mut rng)).collect())
    }

    pub fn atoms(&self) -> &[Rotation] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Angle from `r` to each atom.
    pub fn angles_to_atoms(&self, r: &Rotation) -> Vec<f64> {
        self.atoms.iter().map(|a| rotation_angle(&a.relative_to(r))).collect()
    }

    /// `(index, angle)` of the closest atom.
    pub fn nearest_atom(&self, r: &Rotation) -> (usize, f64) {
        self.angles_to_atoms(r)
            .into_iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("target has atoms")
    }
}

/// Simulation parameters for the toy walks.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ToyRunConfig {
    pub n_paths: usize,
    /// Final time `T` of the unit-rate Brownian motion.
    pub t_final: f64,
    /// Number of grid points on `[0, T]`.
    pub n_steps: usize,
    /// Finite-difference step for gradient checks.
    pub fd_step: f64,
    pub seed: u64,
}

impl Default for ToyRunConfig {
    fn default() -> Self {
        ToyRunConfig { n_paths: 5000, t_final: 4.0, n_steps: 200, fd_step: 1e-4, seed: 0 }
    }
}

impl ToyRunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 1 {
            return Err(Error::InvalidInput("n_paths must be >= 1".into()));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidInput(format!("T must be positive, got {}", self.t_final)));
        }
        if self.n_steps < 2 {
            return Err(Error::InvalidInput("n_steps must be >= 2".into()));
        }
        if !(self.fd_step > 0.0 && self.fd_step < 1e-2) {
            return Err(Error::InvalidInput(format!("fd step must lie in (0, 1e-2), got {}", self.fd_step)));
        }
        Ok(())
    }

    /// `linspace(0, T, n_steps)`.
    pub fn time_grid(&self) -> Vec<f64> {
        linspace(0.0, self.t_final, self.n_steps)
    }
}

/// Draws an atom by weight.
pub fn sample_p0<R: Rng + ?Sized>(target: &DiscreteTarget, rng: &mut R) -> Rotation {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (atom, w) in target.atoms.iter().zip(&target.weights) {
        acc += w;
        if u < acc {
            return *atom;
        }
    }
    // u landed in the rounding gap above the cumulative sum
    let last = target.weights.iter().rposition(|w| *w > 0.0).unwrap_or(0);
    target.atoms[last]
}

/// Per-atom `(w_k f_k, w_k ∂ωf_k, rotation vector of atom_kᵀ rt)`.
fn components(target: &DiscreteTarget, rt: &Rotation, t: f64, cfg: &TruncationConfig) -> Result<Vec<(f64, f64, Vec3)>> {
    target
        .atoms
        .iter()
        .zip(&target.weights)
        .map(|(atom, w)| {
            let v = log_vec(&atom.relative_to(rt));
            let omega = v.norm().min(std::f64::consts::PI);
            let (f, df) = f_and_df(omega, t, cfg)?;
            Ok((w * f, w * df, v))
        })
        .collect()
}

/// `p_t(rt) = Σ_k w_k IGSO3(rt; atom_k, t)`.
pub fn p_t_density(target: &DiscreteTarget, rt: &Rotation, t: f64, cfg: &TruncationConfig) -> Result<f64> {
    Ok(components(target, rt, t, cfg)?.iter().map(|c| c.0).sum())
}

/// Body-frame coefficients of the mixture score at `rt`.
pub fn score_coeffs(target: &DiscreteTarget, rt: &Rotation, t: f64, cfg: &TruncationConfig) -> Result<Vec3> {
    let comps = components(target, rt, t, cfg)?;
    let total: f64 = comps.iter().map(|c| c.0).sum();
    if !(total > 0.0) {
        return Err(Error::NonPositiveDensity {
            omega: target.nearest_atom(rt).1,
            t,
            value: total,
        });
    }
    // Σ_k π_k (∂ωf_k/f_k) axis_k with π_k = w_k f_k / total
    let mut acc = Vec3::zeros();
    for (_, wdf, v) in &comps {
        let omega = v.norm();
        if omega >= cfg.omega_eps {
            acc += v * (wdf / omega);
        }
    }
    Ok(acc / total)
}

/// `∇_{rt} log p_t(rt)`, a tangent vector at `rt`.
pub fn score_t(target: &DiscreteTarget, rt: &Rotation, t: f64, cfg: &TruncationConfig) -> Result<Mat3> {
    Ok(rt.matrix() * hat_matrix(&score_coeffs(target, rt, t, cfg)?))
}

/// Samples recorded at selected grid times.
#[derive(Debug, Clone)]
pub struct ToyMarginals {
    /// The full time grid, ascending.
    pub grid: Vec<f64>,
    /// Grid indices that were recorded, ascending.
    pub recorded: Vec<usize>,
    /// `samples[j][p]` is path `p` at grid index `recorded[j]`.
    pub samples: Vec<Vec<Rotation>>,
}

impl ToyMarginals {
    /// Samples at grid index `index`, if recorded.
    pub fn at_index(&self, index: usize) -> Option<&[Rotation]> {
        self.recorded
            .iter()
            .position(|&i| i == index)
            .map(|j| self.samples[j].as_slice())
    }

    /// Grid index closest to time `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        nearest_grid_index(&self.grid, t)
    }
}

pub fn nearest_grid_index(grid: &[f64], t: f64) -> usize {
    grid.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Which grid indices a run keeps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Record {
    All,
    Indices(Vec<usize>),
}

impl Record {
    fn resolve(&self, n: usize) -> Vec<usize> {
        match self {
            Record::All => (0..n).collect(),
            Record::Indices(ix) => {
                let mut v: Vec<usize> = ix.iter().copied().filter(|&i| i < n).collect();
                v.sort_unstable();
                v.dedup();
                v
            }
        }
    }
}

/// Walks one path along `times` (ascending or descending), storing states at
/// the positions listed in `keep` (positions in `times`, ascending).
fn walk_path(
    start: Rotation,
    times: &[f64],
    keep: &[usize],
    rng: &mut crate::rng::SimRng,
    drift: &(dyn Fn(&Rotation, f64) -> Result<Mat3> + Sync),
) -> Result<Vec<Rotation>> {
    let mut out = Vec::with_capacity(keep.len());
    let mut r = start;
    let mut next_keep = keep.iter().peekable();
    if next_keep.peek() == Some(&&0) {
        out.push(r);
        next_keep.next();
    }
    for i in 1..times.len() {
        let dt = times[i] - times[i - 1];
        let step = drift(&r, times[i - 1])? * dt + sample_tangent_gaussian(&r, rng) * dt.abs().sqrt();
        r = expmap(&r, &step)?;
        if i % crate::se3::RENORMALIZE_EVERY == 0 {
            r = r.renormalize();
        }
        if !r.is_finite() {
            return Err(Error::NonFinite { step: i });
        }
        if next_keep.peek() == Some(&&i) {
            out.push(r);
            next_keep.next();
        }
    }
    Ok(out)
}

/// Runs all paths in parallel, one random stream per path, and regroups the
/// results by recorded time.
fn run_paths(
    cfg: &ToyRunConfig,
    keep_positions: &[usize],
    init: &(dyn Fn(&mut crate::rng::SimRng) -> Rotation + Sync),
    times: &[f64],
    drift: &(dyn Fn(&Rotation, f64) -> Result<Mat3> + Sync),
) -> Result<Vec<Vec<Rotation>>> {
    let per_path: Vec<Vec<Rotation>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream(cfg.seed, p as u64);
            let start = init(&mut rng);
            walk_path(start, times, keep_positions, &mut rng, drift)
        })
        .collect::<Result<_>>()?;
    let mut by_time = vec![Vec::with_capacity(cfg.n_paths); keep_positions.len()];
    for path in per_path {
        for (j, r) in path.into_iter().enumerate() {
            by_time[j].push(r);
        }
    }
    Ok(by_time)
}

/// Forward walk from `p_0` with zero drift and unit-rate tangent noise.
pub fn run_forward(target: &DiscreteTarget, cfg: &ToyRunConfig, record: &Record) -> Result<ToyMarginals> {
    cfg.validate()?;
    let grid = cfg.time_grid();
    let recorded = record.resolve(grid.len());
    let init = |rng: &mut crate::rng::SimRng| sample_p0(target, rng);
    let zero = |_: &Rotation, _: f64| Ok(Mat3::zeros());
    let samples = run_paths(cfg, &recorded, &init, &grid, &zero)?;
    Ok(ToyMarginals { grid, recorded, samples })
}

/// Reverse walk from the uniform law along the reversed grid with drift
/// `−score_t`; with negative `dt` every step ascends the score.
pub fn run_reverse(
    target: &DiscreteTarget,
    cfg: &ToyRunConfig,
    trunc: &TruncationConfig,
    record: &Record,
) -> Result<ToyMarginals> {
    cfg.validate()?;
    let grid = cfg.time_grid();
    if grid[1] < trunc.t_min {
        return Err(Error::TimeBelowFloor { t: grid[1], t_min: trunc.t_min });
    }
    let recorded = record.resolve(grid.len());
    let n = grid.len();
    let reversed: Vec<f64> = grid.iter().rev().copied().collect();
    // grid index i sits at position n − 1 − i of the reversed walk
    let mut positions: Vec<usize> = recorded.iter().map(|&i| n - 1 - i).collect();
    positions.sort_unstable();
    let uniform = UniformSo3Sampler::default();
    let init = |rng: &mut crate::rng::SimRng| uniform.sample(rng);
    let drift = |r: &Rotation, t: f64| Ok(-score_t(target, r, t, trunc)?);
    let mut by_position = run_paths(cfg, &positions, &init, &reversed, &drift)?;
    // positions ascend as grid indices descend
    by_position.reverse();
    Ok(ToyMarginals { grid, recorded, samples: by_position })
}

/// Summary of one sample set against a target.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MarginalStats {
    /// Per-atom histogram of angles to that atom on `[0, π]`.
    pub angle_histograms: Vec<Vec<f64>>,
    /// Fraction of samples whose nearest atom is `k`.
    pub nearest_frequencies: Vec<f64>,
    pub mean_nearest_angle: f64,
}

pub fn marginal_stats(samples: &[Rotation], target: &DiscreteTarget, bins: usize) -> Result<MarginalStats> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("marginal statistics need samples".into()));
    }
    let k = target.atoms.len();
    let mut per_atom = vec![Vec::with_capacity(samples.len()); k];
    let mut counts = vec![0.0; k];
    let mut nearest_sum = 0.0;
    for r in samples {
        let angles = target.angles_to_atoms(r);
        let (idx, a) = target.nearest_atom(r);
        counts[idx] += 1.0;
        nearest_sum += a;
        for (j, a) in angles.into_iter().enumerate() {
            per_atom[j].push(a);
        }
    }
    let n = samples.len() as f64;
    Ok(MarginalStats {
        angle_histograms: per_atom
            .iter()
            .map(|a| histogram(a, 0.0, std::f64::consts::PI, bins))
            .collect(),
        nearest_frequencies: counts.iter().map(|c| c / n).collect(),
        mean_nearest_angle: nearest_sum / n,
    })
}

/// Angle from each sample to its nearest atom.
pub fn nearest_angles(samples: &[Rotation], target: &DiscreteTarget) -> Vec<f64> {
    samples.iter().map(|r| target.nearest_atom(r).1).collect()
}

/// Two-sample KS statistic on angle-to-nearest-atom.
pub fn ks_nearest_angle(a: &[Rotation], b: &[Rotation], target: &DiscreteTarget) -> f64 {
    ks_two_sample(&nearest_angles(a, target), &nearest_angles(b, target))
}
