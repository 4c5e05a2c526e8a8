//! Monte Carlo estimators of the fractional bounds, importance-sampling
//! evidence and the two-point mixing solution of the hierarchical bound.
//!
//! All Gaussian draws are standard normals pushed through
//! [`Gaussian1D::transform`], so every estimate is a deterministic function
//! of `(inputs, seed)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bounds::ConjugateGaussianModel;
use crate::error::{Error, Result};
use crate::gaussian::Gaussian1D;
use crate::gmm::{GmmModel, GmmState};
use crate::numeric::log_mean_exp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerSpec {
    /// Total number of `z` draws.
    pub ns: usize,
    /// Number of mixing draws `u` (hierarchical estimators).
    pub ns_prime: usize,
    /// Subset size for the alternative hierarchical estimator.
    pub ui_size: usize,
    pub seed: u64,
}

impl SamplerSpec {
    pub fn flat(ns: usize, seed: u64) -> Self {
        Self { ns, ns_prime: ns, ui_size: 1, seed }
    }

    pub fn hierarchical(ns: usize, ns_prime: usize, ui_size: usize, seed: u64) -> Self {
        Self { ns, ns_prime, ui_size, seed }
    }

    pub fn validate_flat(&self) -> Result<()> {
        if self.ns == 0 {
            return Err(Error::InvalidArgument("ns: must be at least 1".into()));
        }
        Ok(())
    }

    pub fn validate_hierarchical(&self) -> Result<()> {
        self.validate_flat()?;
        if self.ns_prime == 0 {
            return Err(Error::InvalidArgument("ns_prime: must be at least 1".into()));
        }
        if !self.ns.is_multiple_of(self.ns_prime) {
            return Err(Error::InvalidArgument(format!(
                "ns_prime: ns = {} is not divisible by ns_prime = {}",
                self.ns, self.ns_prime
            )));
        }
        Ok(())
    }

    /// `z` draws per mixing draw.
    pub fn per_u(&self) -> usize {
        self.ns / self.ns_prime
    }

    fn rng(&self) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(self.seed)
    }
}

/// `z | u ~ N(slope·u + intercept, cond_variance)` with `u ~ mixing`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemiImplicitToy {
    pub mixing: Gaussian1D,
    pub slope: f64,
    pub intercept: f64,
    pub cond_variance: f64,
}

impl SemiImplicitToy {
    pub fn new(mixing: Gaussian1D, slope: f64, intercept: f64, cond_variance: f64) -> Result<Self> {
        if !(cond_variance > 0.0 && cond_variance.is_finite()) {
            return Err(Error::InvalidVariance(format!("conditional variance must be positive, got {cond_variance}")));
        }
        if !slope.is_finite() || !intercept.is_finite() {
            return Err(Error::InvalidArgument("slope and intercept must be finite".into()));
        }
        Ok(Self { mixing, slope, intercept, cond_variance })
    }

    pub fn conditional(&self, u: f64) -> Gaussian1D {
        Gaussian1D::new(self.slope * u + self.intercept, self.cond_variance).expect("validated variance")
    }

    pub fn marginal(&self) -> Gaussian1D {
        Gaussian1D::new(
            self.slope * self.mixing.mean() + self.intercept,
            self.slope * self.slope * self.mixing.variance() + self.cond_variance,
        )
        .expect("positive marginal variance")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub value: f64,
    pub data_term: f64,
    pub complexity_term: f64,
    /// Scaled KL term of the bridged estimators.
    pub kl_term: Option<f64>,
    pub spec: SamplerSpec,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidFraction(format!("estimators need γ in (0, 1), got {gamma}")));
    }
    Ok(())
}

fn normal(rng: &mut ChaCha20Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// `(1/(1−γ)) log mean exp((1−γ)·ll)`, shifted by the maximum.
fn data_term(ll: &[f64], gamma: f64) -> f64 {
    let max = ll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = ll.iter().map(|l| (1.0 - gamma) * (l - max)).collect();
    max + log_mean_exp(&scaled) / (1.0 - gamma)
}

/// `(γ/(1−γ)) log mean exp((1/γ−1)·r)` for log ratios `r = log q − log p`.
fn complexity_term(log_ratio: &[f64], gamma: f64) -> f64 {
    let max = log_ratio.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = log_ratio.iter().map(|r| (1.0 / gamma - 1.0) * (r - max)).collect();
    max + gamma / (1.0 - gamma) * log_mean_exp(&scaled)
}

/// Plug-in estimate of the bound from `Ns` draws of `q`. With
/// `separate_draws` the complexity term uses an independent second batch.
pub fn estimate_lb_with(
    model: &ConjugateGaussianModel,
    q: &Gaussian1D,
    gamma: f64,
    spec: &SamplerSpec,
    separate_draws: bool,
) -> Result<EstimatorReport> {
    check_gamma(gamma)?;
    spec.validate_flat()?;
    let mut rng = spec.rng();
    let zs: Vec<f64> = (0..spec.ns).map(|_| q.transform(normal(&mut rng))).collect();
    let ll: Vec<f64> = zs.iter().map(|&z| model.ln_likelihood(z)).collect();
    let zs_c: Vec<f64> =
        if separate_draws { (0..spec.ns).map(|_| q.transform(normal(&mut rng))).collect() } else { zs };
    let ratio: Vec<f64> = zs_c.iter().map(|&z| q.ln_pdf(z) - model.prior.ln_pdf(z)).collect();
    let data = data_term(&ll, gamma);
    let complexity = complexity_term(&ratio, gamma);
    Ok(EstimatorReport { value: data - complexity, data_term: data, complexity_term: complexity, kl_term: None, spec: *spec })
}

pub fn estimate_lb(model: &ConjugateGaussianModel, q: &Gaussian1D, gamma: f64, spec: &SamplerSpec) -> Result<EstimatorReport> {
    estimate_lb_with(model, q, gamma, spec, false)
}

/// Estimate for an unnormalized `ũq = Z·q` given `log Z`, sampling `q` from
/// `proposal`. The returned `data_term` includes `log Z`.
pub fn estimate_lb_unnormalized<F>(
    model: &ConjugateGaussianModel,
    uq_ln_density: F,
    log_z: f64,
    gamma: f64,
    spec: &SamplerSpec,
    proposal: &Gaussian1D,
) -> Result<EstimatorReport>
where
    F: Fn(f64) -> f64,
{
    check_gamma(gamma)?;
    spec.validate_flat()?;
    let mut rng = spec.rng();
    let zs: Vec<f64> = (0..spec.ns).map(|_| proposal.transform(normal(&mut rng))).collect();
    let ll: Vec<f64> = zs.iter().map(|&z| model.ln_likelihood(z)).collect();
    let ratio: Vec<f64> = zs.iter().map(|&z| uq_ln_density(z) - model.prior.ln_pdf(z)).collect();
    let data = log_z + data_term(&ll, gamma);
    let complexity = complexity_term(&ratio, gamma);
    Ok(EstimatorReport { value: data - complexity, data_term: data, complexity_term: complexity, kl_term: None, spec: *spec })
}

/// Hierarchical estimate: `Ns'` mixing draws, each followed by `Ns/Ns'`
/// conditional draws.
pub fn estimate_lbh(toy: &SemiImplicitToy, model: &ConjugateGaussianModel, gamma: f64, spec: &SamplerSpec) -> Result<EstimatorReport> {
    check_gamma(gamma)?;
    spec.validate_hierarchical()?;
    let mut rng = spec.rng();
    let mut ll = Vec::with_capacity(spec.ns);
    let mut ratio = Vec::with_capacity(spec.ns);
    for _ in 0..spec.ns_prime {
        let cond = toy.conditional(toy.mixing.transform(normal(&mut rng)));
        for _ in 0..spec.per_u() {
            let z = cond.transform(normal(&mut rng));
            ll.push(model.ln_likelihood(z));
            ratio.push(cond.ln_pdf(z) - model.prior.ln_pdf(z));
        }
    }
    let data = data_term(&ll, gamma);
    let complexity = complexity_term(&ratio, gamma);
    Ok(EstimatorReport { value: data - complexity, data_term: data, complexity_term: complexity, kl_term: None, spec: *spec })
}

struct BridgedDraws {
    /// Conditionals of `q` and `r` for every mixing draw.
    pairs: Vec<(Gaussian1D, Gaussian1D)>,
    /// Draws from `r(z|u_i)`, `Ns/Ns'` per mixing draw.
    z_r: Vec<Vec<f64>>,
    ll_r: Vec<f64>,
    complexity: f64,
}

fn bridged_draws(
    toy_q: &SemiImplicitToy,
    toy_r: &SemiImplicitToy,
    model: &ConjugateGaussianModel,
    gamma: f64,
    spec: &SamplerSpec,
) -> Result<BridgedDraws> {
    check_gamma(gamma)?;
    spec.validate_hierarchical()?;
    if toy_q.mixing != toy_r.mixing {
        return Err(Error::InvalidArgument("q and r must share the mixing distribution".into()));
    }
    let mut rng = spec.rng();
    let mut pairs = Vec::with_capacity(spec.ns_prime);
    let mut z_r = Vec::with_capacity(spec.ns_prime);
    let mut ll_r = Vec::with_capacity(spec.ns);
    let mut ratio = Vec::with_capacity(spec.ns);
    for _ in 0..spec.ns_prime {
        let u = toy_q.mixing.transform(normal(&mut rng));
        let (cq, cr) = (toy_q.conditional(u), toy_r.conditional(u));
        for _ in 0..spec.per_u() {
            let z = cq.transform(normal(&mut rng));
            ratio.push(cq.ln_pdf(z) - model.prior.ln_pdf(z));
        }
        let zs: Vec<f64> = (0..spec.per_u()).map(|_| cr.transform(normal(&mut rng))).collect();
        ll_r.extend(zs.iter().map(|&z| model.ln_likelihood(z)));
        z_r.push(zs);
        pairs.push((cq, cr));
    }
    Ok(BridgedDraws { pairs, z_r, ll_r, complexity: complexity_term(&ratio, gamma) })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Bridged hierarchical estimate with conditionals `q(z|u)` and `r(z|u)`
/// sharing the mixing draws.
pub fn estimate_lbbh(
    toy_q: &SemiImplicitToy,
    toy_r: &SemiImplicitToy,
    model: &ConjugateGaussianModel,
    gamma: f64,
    spec: &SamplerSpec,
) -> Result<EstimatorReport> {
    let d = bridged_draws(toy_q, toy_r, model, gamma, spec)?;
    let log_ratios: Vec<f64> = d
        .pairs
        .iter()
        .zip(&d.z_r)
        .flat_map(|((cq, cr), zs)| zs.iter().map(move |&z| cr.ln_pdf(z) - cq.ln_pdf(z)))
        .collect();
    let data = mean(&d.ll_r);
    let kl = mean(&log_ratios) / (1.0 - gamma);
    Ok(EstimatorReport {
        value: data - kl - d.complexity,
        data_term: data,
        complexity_term: d.complexity,
        kl_term: Some(kl),
        spec: *spec,
    })
}

/// As [`estimate_lbbh`], but the cross-entropy against `q` averages the
/// conditionals of the `Ui_size` mixing draws following `u_i` cyclically,
/// never `u_i` itself.
pub fn estimate_lbbh_alt(
    toy_q: &SemiImplicitToy,
    toy_r: &SemiImplicitToy,
    model: &ConjugateGaussianModel,
    gamma: f64,
    spec: &SamplerSpec,
) -> Result<EstimatorReport> {
    if spec.ui_size == 0 || spec.ui_size >= spec.ns_prime {
        return Err(Error::SubsetInvalid { ui_size: spec.ui_size, ns_prime: spec.ns_prime });
    }
    let d = bridged_draws(toy_q, toy_r, model, gamma, spec)?;
    let m = d.pairs.len();
    let mut entropy = Vec::with_capacity(spec.ns);
    let mut cross = Vec::with_capacity(spec.ns);
    for (i, ((_, cr), zs)) in d.pairs.iter().zip(&d.z_r).enumerate() {
        for &z in zs {
            entropy.push(cr.ln_pdf(z));
            let s: f64 = (1..=spec.ui_size).map(|o| d.pairs[(i + o) % m].0.ln_pdf(z)).sum();
            cross.push(s / spec.ui_size as f64);
        }
    }
    let data = mean(&d.ll_r);
    let kl = (mean(&entropy) - mean(&cross)) / (1.0 - gamma);
    Ok(EstimatorReport {
        value: data - kl - d.complexity,
        data_term: data,
        complexity_term: d.complexity,
        kl_term: Some(kl),
        spec: *spec,
    })
}

/// Importance-sampling evidence estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsEstimate {
    pub log_evidence: f64,
    /// Sample coefficient of variation of the weights; `+∞` when the
    /// weights could not be represented.
    pub cv: f64,
    pub cv_finite: bool,
    /// Delta-method standard error of `log_evidence`, `cv/√Ns`.
    pub std_error: f64,
    pub ns: usize,
}

/// Evidence estimate from log importance weights.
pub fn is_from_log_weights(log_weights: &[f64]) -> Result<IsEstimate> {
    let ns = log_weights.len();
    if ns < 2 {
        return Err(Error::InvalidArgument(format!("ns: importance sampling needs at least 2 draws, got {ns}")));
    }
    let log_evidence = log_mean_exp(log_weights);
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cv = if max.is_finite() {
        let w: Vec<f64> = log_weights.iter().map(|lw| (lw - max).exp()).collect();
        let m = mean(&w);
        let var = w.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (ns - 1) as f64;
        var.sqrt() / m
    } else {
        f64::INFINITY
    };
    let cv_finite = cv.is_finite();
    Ok(IsEstimate { log_evidence, cv, cv_finite, std_error: cv / (ns as f64).sqrt(), ns })
}

/// Importance sampling with a caller-supplied sampler returning one log
/// weight `log p(x, θ) − log q(θ)` per call.
pub fn is_log_evidence<F>(mut draw_log_weight: F, ns: usize, seed: u64) -> Result<IsEstimate>
where
    F: FnMut(&mut ChaCha20Rng) -> f64,
{
    if ns < 2 {
        return Err(Error::InvalidArgument(format!("ns: importance sampling needs at least 2 draws, got {ns}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let lw: Vec<f64> = (0..ns).map(|_| draw_log_weight(&mut rng)).collect();
    is_from_log_weights(&lw)
}

/// Evidence of the mixture model using the mean-field state as proposal:
/// component means from their Gaussian factors and every assignment drawn
/// independently from its row of responsibilities.
pub fn gmm_is_log_evidence(model: &GmmModel, state: &GmmState, ns: usize, seed: u64) -> Result<IsEstimate> {
    if state.k() != model.k || state.n() != model.n() {
        return Err(Error::InvalidArgument("state does not match the model dimensions".into()));
    }
    let prior = model.component_prior();
    let ln_pi: Vec<f64> = model.assignment_prior.iter().map(|p| p.ln()).collect();
    let obs_var = model.obs_variance;
    let obs_norm = -0.5 * (2.0 * std::f64::consts::PI * obs_var).ln();
    let mut u = vec![0.0; model.k];
    is_log_evidence(
        |rng| {
            let mut lw = 0.0;
            for (uk, q) in u.iter_mut().zip(&state.components) {
                *uk = q.transform(normal(rng));
                lw += prior.ln_pdf(*uk) - q.ln_pdf(*uk);
            }
            for (i, &x) in model.data.iter().enumerate() {
                let row = state.phi(i);
                let draw: f64 = rng.gen();
                let mut c = row.len() - 1;
                let mut acc = 0.0;
                for (j, &p) in row.iter().enumerate() {
                    acc += p;
                    if draw < acc {
                        c = j;
                        break;
                    }
                }
                let d = x - u[c];
                lw += ln_pi[c] + obs_norm - 0.5 * d * d / obs_var - row[c].ln();
            }
            lw
        },
        ns,
        seed,
    )
}

/// Two-point solution for the mixing weights of the hierarchical bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPointSolution {
    pub q1: f64,
    pub q2: f64,
    /// Largest deviation of the stationarity condition over the two points.
    pub residual: f64,
    /// Both weights lie in `(0, 1)` and the denominator is non-zero.
    pub valid: bool,
}

/// Weights `q1, q2` of a mixing distribution supported at two points, where
/// `f_i` is the tilted likelihood integral and `g_i` the Rényi integrand
/// integral at each point.
pub fn two_point_mixing(f1: f64, f2: f64, g1: f64, g2: f64, gamma: f64) -> TwoPointSolution {
    let denom = (1.0 - gamma) * (f1 - f2) * (g1 - g2);
    if denom == 0.0 || !denom.is_finite() {
        return TwoPointSolution { q1: f64::NAN, q2: f64::NAN, residual: f64::INFINITY, valid: false };
    }
    let q1 = ((1.0 - gamma) * f2 * g2 - f1 * g2 + gamma * f2 * g1) / denom;
    let q2 = ((1.0 - gamma) * f1 * g1 - f2 * g1 + gamma * f1 * g2) / denom;
    let f = q1 * f1 + q2 * f2;
    let g = q1 * g1 + q2 * g2;
    let stationarity = |fi: f64, gi: f64| (fi / f / (1.0 - gamma) - gamma / (1.0 - gamma) * gi / g - 1.0).abs();
    let residual = stationarity(f1, g1).max(stationarity(f2, g2));
    let valid = q1 > 0.0 && q1 < 1.0 && q2 > 0.0 && q2 < 1.0 && residual.is_finite();
    TwoPointSolution { q1, q2, residual, valid }
}
