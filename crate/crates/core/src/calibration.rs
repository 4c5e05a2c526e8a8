//! Replica-based calibration study for the Gaussian mixture.
//!
//! For each replica a data set is simulated, the mixture is fitted at every γ
//! of a grid plus γ = 1 (the ELBO), and the `1−α` credible interval of every
//! component is checked against the true mean. Aggregated coverages `κ` and
//! mean interval lengths `ℓ` form one [`CalibrationRow`] per γ. Conflated
//! models (ELBO means with fractional variances) and three γ-selection
//! strategies (`R_ell`, `R_kappa`, `R_invsq`) are built on top.
//!
//! Every replica draws from its own ChaCha stream keyed by `(seed, index)`,
//! so results do not depend on evaluation order or thread count.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::Gaussian1D;
use crate::gmm::{self, credible_interval, evaluate_bound, GmmModel, GmmState};
use crate::numeric::{format_sig6, ols, two_sided_critical};

/// Fractions whose fits are conflated with the ELBO means.
pub const CONFLATION_GAMMAS: [f64; 3] = [0.1, 0.5, 0.9];

/// Lower clamp applied to every regression-predicted γ*.
pub const GAMMA_STAR_MIN: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySpec {
    pub k: usize,
    pub n: usize,
    pub true_means: Vec<f64>,
    pub prior_sd: f64,
    pub obs_variance: f64,
    pub alpha: f64,
    pub replicas: usize,
    pub gamma_grid: Vec<f64>,
    pub seed: u64,
}

/// `0.1, 0.2, …, 0.9`.
pub fn default_gamma_grid() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

impl StudySpec {
    /// Named study configurations: `table1` (K = 2, n = 400, means ±2),
    /// `table2a` (n = 30), `table2b` (means ±1/2) and `table3` (K = 4 with
    /// means −2, −1/2, 1/2, 2). All use prior sd 3, unit observation
    /// variance, α = 0.05 and 5000 replicas.
    pub fn preset(name: &str) -> Option<Self> {
        let base = |k: usize, n: usize, true_means: Vec<f64>| Self {
            k,
            n,
            true_means,
            prior_sd: 3.0,
            obs_variance: 1.0,
            alpha: 0.05,
            replicas: 5000,
            gamma_grid: default_gamma_grid(),
            seed: 0,
        };
        match name {
            "table1" => Some(base(2, 400, vec![-2.0, 2.0])),
            "table2a" => Some(base(2, 30, vec![-2.0, 2.0])),
            "table2b" => Some(base(2, 400, vec![-0.5, 0.5])),
            "table3" => Some(base(4, 400, vec![-2.0, -0.5, 0.5, 2.0])),
            _ => None,
        }
    }

    pub const PRESETS: [&'static str; 4] = ["table1", "table2a", "table2b", "table3"];

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: String| Err(Error::InvalidArgument(format!("{field}: {why}")));
        if self.k == 0 {
            return bad("k", "must be at least 1".into());
        }
        if self.n == 0 {
            return bad("n", "must be at least 1".into());
        }
        if self.true_means.len() != self.k {
            return bad("true_means", format!("has {} entries for K = {}", self.true_means.len(), self.k));
        }
        if self.true_means.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("true_means", "must be strictly increasing".into());
        }
        if !(self.prior_sd > 0.0) {
            return bad("prior_sd", format!("must be positive, got {}", self.prior_sd));
        }
        if !(self.obs_variance >= 0.0) {
            return bad("obs_variance", format!("must be non-negative, got {}", self.obs_variance));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha", format!("must lie in (0, 1), got {}", self.alpha));
        }
        if self.replicas == 0 {
            return bad("replicas", "must be at least 1".into());
        }
        if self.gamma_grid.is_empty() {
            return bad("gamma_grid", "must not be empty".into());
        }
        if let Some(g) = self.gamma_grid.iter().find(|g| !(**g > 0.0 && **g <= 1.0)) {
            return bad("gamma_grid", format!("values must lie in (0, 1], got {g}"));
        }
        Ok(())
    }

    /// The grid with γ = 1 appended (if absent), in ascending order.
    pub fn all_gammas(&self) -> Vec<f64> {
        let mut out = self.gamma_grid.clone();
        if !out.contains(&1.0) {
            out.push(1.0);
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// The model the fits assume for a simulated data set. An observation
    /// variance of zero (noise-free simulation) is fitted with unit variance.
    pub fn model(&self, data: Vec<f64>) -> Result<GmmModel> {
        let obs = if self.obs_variance > 0.0 { self.obs_variance } else { 1.0 };
        GmmModel::uniform(self.k, self.prior_sd * self.prior_sd, obs, data)
    }
}

/// Per-replica random stream.
pub fn replica_rng(seed: u64, replica_index: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(replica_index as u64);
    rng
}

/// `n` observations, each from a uniformly chosen component plus
/// `N(0, obs_variance)` noise.
pub fn generate_replica(spec: &StudySpec, replica_index: usize) -> Vec<f64> {
    let mut rng = replica_rng(spec.seed, replica_index);
    let sd = spec.obs_variance.sqrt();
    (0..spec.n)
        .map(|_| {
            let c = rng.gen_range(0..spec.k);
            let eps: f64 = rng.sample(StandardNormal);
            spec.true_means[c] + sd * eps
        })
        .collect()
}

/// `perm[j]` is the fitted component assigned to the `j`-th smallest true mean.
pub fn match_components(fitted: &GmmState, true_means: &[f64]) -> Vec<usize> {
    let mut fitted_order: Vec<usize> = (0..fitted.k()).collect();
    fitted_order.sort_by(|&a, &b| fitted.components[a].mean().total_cmp(&fitted.components[b].mean()));
    let mut truth_order: Vec<usize> = (0..true_means.len()).collect();
    truth_order.sort_by(|&a, &b| true_means[a].total_cmp(&true_means[b]));
    let mut perm = vec![0; true_means.len()];
    for (rank, &t) in truth_order.iter().enumerate() {
        perm[t] = fitted_order[rank];
    }
    perm
}

/// ELBO means, fractional variances, ELBO assignments.
pub fn conflate(elbo_state: &GmmState, frac_state: &GmmState) -> Result<GmmState> {
    if elbo_state.k() != frac_state.k() {
        return Err(Error::InvalidArgument(format!(
            "cannot conflate states with K = {} and K = {}",
            elbo_state.k(),
            frac_state.k()
        )));
    }
    let mut out = elbo_state.clone();
    for (c, f) in out.components.iter_mut().zip(&frac_state.components) {
        *c = Gaussian1D::new(c.mean(), f.variance())?;
    }
    Ok(out)
}

/// Ideal interval length `2 z_{1−α/2} sqrt(K σ_obs² / n)`.
pub fn ideal_length(k: usize, n: usize, obs_variance: f64, alpha: f64) -> f64 {
    2.0 * two_sided_critical(alpha) * (k as f64 * obs_variance / n as f64).sqrt()
}

/// Component posteriors (in true-mean order) and bound of one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaFit {
    pub gamma: f64,
    pub components: Vec<Gaussian1D>,
    pub bound: f64,
}

impl ReplicaFit {
    fn from_state(gamma: f64, state: &GmmState, bound: f64, true_means: &[f64]) -> Self {
        let perm = match_components(state, true_means);
        Self { gamma, components: perm.iter().map(|&j| state.components[j]).collect(), bound }
    }

    pub fn lengths(&self, alpha: f64) -> Vec<f64> {
        let z = two_sided_critical(alpha);
        self.components.iter().map(|c| 2.0 * z * c.sd()).collect()
    }
}

/// Everything retained from one replica of the grid run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaGrid {
    pub index: usize,
    /// One fit per γ of [`StudySpec::all_gammas`].
    pub fits: Vec<ReplicaFit>,
    /// One conflated model per γ of [`CONFLATION_GAMMAS`] present in the grid.
    pub conflated: Vec<ReplicaFit>,
}

/// Aggregated coverage, lengths and bound of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub label: String,
    pub kappa: Vec<f64>,
    pub ell: Vec<f64>,
    pub bound: f64,
}

/// Coverage, lengths and mean bound over a set of per-replica fits.
pub fn aggregate<'a, I>(label: String, fits: I, spec: &StudySpec) -> CalibrationRow
where
    I: IntoIterator<Item = &'a ReplicaFit>,
{
    let mut hits = vec![0usize; spec.k];
    let mut lengths = vec![0.0; spec.k];
    let mut bound = 0.0;
    let mut count = 0usize;
    for fit in fits {
        for (j, c) in fit.components.iter().enumerate() {
            let (lo, hi) = credible_interval(c, spec.alpha).expect("validated α");
            if lo <= spec.true_means[j] && spec.true_means[j] <= hi {
                hits[j] += 1;
            }
            lengths[j] += hi - lo;
        }
        bound += fit.bound;
        count += 1;
    }
    let denom = count.max(1) as f64;
    CalibrationRow {
        label,
        kappa: hits.iter().map(|&h| h as f64 / denom).collect(),
        ell: lengths.iter().map(|l| l / denom).collect(),
        bound: bound / denom,
    }
}

/// Compact label for a fraction: `0.1`, `1.0`, `0.785`.
pub fn gamma_label(gamma: f64) -> String {
    let tenths = gamma * 10.0;
    if (tenths - tenths.round()).abs() < 1e-9 {
        format!("{gamma:.1}")
    } else {
        format!("{gamma}")
    }
}

fn fit_state(model: &GmmModel, gamma: f64) -> Result<(GmmState, f64)> {
    let out = gmm::fit_default(model, gamma)?;
    Ok((out.state, out.bound))
}

fn run_replica(spec: &StudySpec, index: usize) -> Result<ReplicaGrid> {
    let model = spec.model(generate_replica(spec, index))?;
    let gammas = spec.all_gammas();
    let mut states = Vec::with_capacity(gammas.len());
    let mut fits = Vec::with_capacity(gammas.len());
    for &g in &gammas {
        let (state, bound) = fit_state(&model, g)?;
        fits.push(ReplicaFit::from_state(g, &state, bound, &spec.true_means));
        states.push(state);
    }
    let elbo_pos = gammas.iter().position(|&g| g == 1.0).expect("γ = 1 always present");
    let elbo_state = &states[elbo_pos];
    let elbo_perm = match_components(elbo_state, &spec.true_means);
    let mut conflated = Vec::new();
    for &cg in CONFLATION_GAMMAS.iter() {
        let Some(pos) = gammas.iter().position(|&g| (g - cg).abs() < 1e-12) else { continue };
        // Pair components by their matched true mean before mixing means and variances.
        let frac_perm = match_components(&states[pos], &spec.true_means);
        let mut frac_aligned = elbo_state.clone();
        for (&e, &f) in elbo_perm.iter().zip(&frac_perm) {
            frac_aligned.components[e] = states[pos].components[f];
        }
        let state = conflate(elbo_state, &frac_aligned)?;
        let bound = evaluate_bound(&model, &state, cg)?.total;
        conflated.push(ReplicaFit {
            gamma: cg,
            components: elbo_perm.iter().map(|&j| state.components[j]).collect(),
            bound,
        });
    }
    Ok(ReplicaGrid { index, fits, conflated })
}

/// Outcome of [`run_grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    /// `LB_γ` rows (grid plus γ = 1) followed by `C_γ` rows.
    pub rows: Vec<CalibrationRow>,
    pub replicas: Vec<ReplicaGrid>,
}

impl GridOutcome {
    /// The `LB_γ` rows only, in ascending γ.
    pub fn gamma_rows(&self) -> &[CalibrationRow] {
        let n = self.replicas.first().map_or(0, |r| r.fits.len());
        &self.rows[..n.min(self.rows.len())]
    }
}

/// Fits every replica at every γ and aggregates the `LB_γ` and `C_γ` rows.
pub fn run_grid(spec: &StudySpec) -> Result<GridOutcome> {
    spec.validate()?;
    let replicas = (0..spec.replicas)
        .into_par_iter()
        .map(|i| run_replica(spec, i))
        .collect::<Result<Vec<_>>>()?;
    let gammas = spec.all_gammas();
    let mut rows: Vec<CalibrationRow> = gammas
        .iter()
        .enumerate()
        .map(|(gi, &g)| aggregate(format!("LB_{}", gamma_label(g)), replicas.iter().map(|r| &r.fits[gi]), spec))
        .collect();
    let n_conf = replicas.first().map_or(0, |r| r.conflated.len());
    for ci in 0..n_conf {
        let g = replicas[0].conflated[ci].gamma;
        rows.push(aggregate(format!("C_{}", gamma_label(g)), replicas.iter().map(|r| &r.conflated[ci]), spec));
    }
    Ok(GridOutcome { rows, replicas })
}

/// `(γ*, row)` for a strategy that refits at a per-replica or shared γ*.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyOutcome {
    /// Mean of the per-replica γ* (or the single shared γ*).
    pub gamma_star: f64,
    pub row: CalibrationRow,
    pub per_replica_gamma: Vec<f64>,
}

fn clamp_gamma(g: f64) -> f64 {
    g.clamp(GAMMA_STAR_MIN, 1.0)
}

/// Regress γ on `feature(fit, component)` over a replica's fits and predict at `target`.
fn regress_replica<F>(grid: &ReplicaGrid, spec: &StudySpec, target: f64, feature: F) -> Result<f64>
where
    F: Fn(&ReplicaFit, usize) -> f64,
{
    if grid.fits.len() < 2 {
        return Err(Error::RegressionDegenerate(format!(
            "need at least two γ values, got {}",
            grid.fits.len()
        )));
    }
    let gammas: Vec<f64> = grid.fits.iter().map(|f| f.gamma).collect();
    let mut sum = 0.0;
    for k in 0..spec.k {
        let x: Vec<f64> = grid.fits.iter().map(|f| feature(f, k)).collect();
        let (a, b) = ols(&x, &gammas).ok_or_else(|| {
            Error::RegressionDegenerate(format!("replica {}: regressor has no spread for component {k}", grid.index))
        })?;
        sum += a + b * target;
    }
    Ok(clamp_gamma(sum / spec.k as f64))
}

fn refit_at(spec: &StudySpec, index: usize, gamma: f64) -> Result<ReplicaFit> {
    let model = spec.model(generate_replica(spec, index))?;
    let (state, bound) = fit_state(&model, gamma)?;
    Ok(ReplicaFit::from_state(gamma, &state, bound, &spec.true_means))
}

fn per_replica_strategy<F>(label: &str, grids: &[ReplicaGrid], spec: &StudySpec, target: f64, feature: F) -> Result<StrategyOutcome>
where
    F: Fn(&ReplicaFit, usize) -> f64 + Sync,
{
    let refits = grids
        .par_iter()
        .map(|grid| {
            let g = regress_replica(grid, spec, target, &feature)?;
            refit_at(spec, grid.index, g)
        })
        .collect::<Result<Vec<_>>>()?;
    let per_replica_gamma: Vec<f64> = refits.iter().map(|f| f.gamma).collect();
    let gamma_star = per_replica_gamma.iter().sum::<f64>() / per_replica_gamma.len().max(1) as f64;
    Ok(StrategyOutcome { gamma_star, row: aggregate(label.into(), &refits, spec), per_replica_gamma })
}

/// Per replica and component, regress γ on interval length and predict at
/// the ideal length; average over components and refit the replica there.
pub fn strategy_r_ell(grids: &[ReplicaGrid], spec: &StudySpec) -> Result<StrategyOutcome> {
    let target = ideal_length(spec.k, spec.n, fit_obs_variance(spec), spec.alpha);
    let z2 = 2.0 * two_sided_critical(spec.alpha);
    per_replica_strategy("R_ell", grids, spec, target, |f, k| z2 * f.components[k].sd())
}

/// As [`strategy_r_ell`] but regressing γ on `ℓ⁻²`, which is linear in γ for
/// an exact Gaussian fractional posterior.
pub fn strategy_r_invsq(grids: &[ReplicaGrid], spec: &StudySpec) -> Result<StrategyOutcome> {
    let target = ideal_length(spec.k, spec.n, fit_obs_variance(spec), spec.alpha).powi(-2);
    let z2 = 2.0 * two_sided_critical(spec.alpha);
    per_replica_strategy("R_invsq", grids, spec, target, |f, k| (z2 * f.components[k].sd()).powi(-2))
}

/// Regress γ on the aggregated coverage of each component, predict at
/// `1−α`, average over components and refit every replica at that γ*.
pub fn strategy_r_kappa(gamma_rows: &[CalibrationRow], grids: &[ReplicaGrid], spec: &StudySpec) -> Result<StrategyOutcome> {
    let gammas: Vec<f64> = match grids.first() {
        Some(g) => g.fits.iter().map(|f| f.gamma).collect(),
        None => spec.all_gammas(),
    };
    if gamma_rows.len() != gammas.len() || gammas.len() < 2 {
        return Err(Error::RegressionDegenerate(format!(
            "need one coverage row per γ and at least two of them, got {} rows for {} values",
            gamma_rows.len(),
            gammas.len()
        )));
    }
    let mut sum = 0.0;
    for k in 0..spec.k {
        let x: Vec<f64> = gamma_rows.iter().map(|r| r.kappa[k]).collect();
        let (a, b) = ols(&x, &gammas).ok_or_else(|| {
            Error::RegressionDegenerate(format!("coverage of component {k} is constant across the grid"))
        })?;
        sum += a + b * (1.0 - spec.alpha);
    }
    let gamma_star = clamp_gamma(sum / spec.k as f64);
    let indices: Vec<usize> = if grids.is_empty() { (0..spec.replicas).collect() } else { grids.iter().map(|g| g.index).collect() };
    let refits = indices
        .par_iter()
        .map(|&i| refit_at(spec, i, gamma_star))
        .collect::<Result<Vec<_>>>()?;
    Ok(StrategyOutcome {
        gamma_star,
        row: aggregate("R_kappa".into(), &refits, spec),
        per_replica_gamma: vec![gamma_star; refits.len()],
    })
}

fn fit_obs_variance(spec: &StudySpec) -> f64 {
    if spec.obs_variance > 0.0 { spec.obs_variance } else { 1.0 }
}

/// Full study: grid rows, conflated rows and the three strategy rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub spec: StudySpec,
    pub rows: Vec<CalibrationRow>,
    pub gamma_star_r_ell: f64,
    pub gamma_star_r_kappa: f64,
    pub gamma_star_r_invsq: f64,
}

pub fn run_study(spec: &StudySpec) -> Result<StudyReport> {
    let grid = run_grid(spec)?;
    let r_ell = strategy_r_ell(&grid.replicas, spec)?;
    let r_kappa = strategy_r_kappa(grid.gamma_rows(), &grid.replicas, spec)?;
    let r_invsq = strategy_r_invsq(&grid.replicas, spec)?;
    let mut rows = grid.rows;
    rows.push(r_ell.row);
    rows.push(r_kappa.row);
    rows.push(r_invsq.row);
    Ok(StudyReport {
        spec: spec.clone(),
        rows,
        gamma_star_r_ell: r_ell.gamma_star,
        gamma_star_r_kappa: r_kappa.gamma_star,
        gamma_star_r_invsq: r_invsq.gamma_star,
    })
}

/// Writes `label,component,kappa,ell,bound`, one line per row and component
/// (components numbered from 1), numbers with six significant digits.
pub fn write_csv<W: Write>(mut out: W, rows: &[CalibrationRow]) -> std::io::Result<usize> {
    writeln!(out, "label,component,kappa,ell,bound")?;
    let mut lines = 0;
    for row in rows {
        for (k, (kappa, ell)) in row.kappa.iter().zip(&row.ell).enumerate() {
            writeln!(
                out,
                "{},{},{},{},{}",
                row.label,
                k + 1,
                format_sig6(*kappa),
                format_sig6(*ell),
                format_sig6(row.bound)
            )?;
            lines += 1;
        }
    }
    Ok(lines)
}
