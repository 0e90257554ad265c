use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{normal_logpdf, ChainOutput, ChainRecorder, ModelToggles, PosteriorDraws, SamplerConfig};
use crate::dataset::{build_design_uni, AssembledDataset};
use crate::error::{Error, Result};
use crate::sampling::{inverse_gamma, normal_from_precision, seeded_rng, standard_normal};

/// Prior hyperparameters. Inverse gammas are shape/scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UniPriors {
    /// Prior variance of every fixed effect (mean zero).
    pub alpha_variance: f64,
    pub sigma2_shape: f64,
    pub sigma2_scale: f64,
    pub tau2_shape: f64,
    pub tau2_scale: f64,
}

impl Default for UniPriors {
    fn default() -> Self {
        Self {
            alpha_variance: 10_000.0,
            sigma2_shape: 2.0,
            sigma2_scale: 1.0,
            tau2_shape: 2.0,
            tau2_scale: 1.0,
        }
    }
}

impl UniPriors {
    fn validate(&self) -> Result<()> {
        let all = [
            self.alpha_variance,
            self.sigma2_shape,
            self.sigma2_scale,
            self.tau2_shape,
            self.tau2_scale,
        ];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidParameter("prior hyperparameters must be positive".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniState {
    pub alpha: DVector<f64>,
    /// One random effect per individual.
    pub beta: DVector<f64>,
    pub sigma2: f64,
    pub tau2: f64,
}

/// Univariate mixed model: `y_i = X_i alpha + 1 beta_i + e_i`,
/// `beta_i ~ N(0, tau2)`, `e_i ~ N(0, sigma2 I)`.
#[derive(Debug, Clone)]
pub struct UniModel {
    labels: Vec<String>,
    x: DMatrix<f64>,
    xtx: DMatrix<f64>,
    y: DVector<f64>,
    group: Vec<usize>,
    t: Vec<usize>,
    random_effects: bool,
    fixed_sigma2: Option<f64>,
    priors: UniPriors,
}

impl UniModel {
    /// Model for response `index` of an assembled dataset.
    pub fn new(data: &AssembledDataset, index: usize, toggles: ModelToggles) -> Result<Self> {
        let active = toggles.active_columns(&data.years);
        let n_obs = data.n_recordings();
        let mut x = DMatrix::zeros(n_obs, active.len());
        let mut y = DVector::zeros(n_obs);
        let mut group = Vec::with_capacity(n_obs);
        let mut row = 0;
        for (i, ind) in data.individuals.iter().enumerate() {
            let xi = build_design_uni(ind, &data.years)?.matrix;
            for (s, obs) in ind.observations.iter().enumerate() {
                let v = obs.values.get(index).copied().filter(|v| v.is_finite()).ok_or_else(|| {
                    Error::MissingResponse(format!("{} year {}", obs.recording_id, obs.year))
                })?;
                for (j, &c) in active.iter().enumerate() {
                    x[(row, j)] = xi[(s, c)];
                }
                y[row] = v;
                group.push(i);
                row += 1;
            }
        }
        let labels = active.iter().map(|c| format!("alpha1_{}", c + 1)).collect();
        let model = Self::from_parts(x, y, group, data.n_individuals(), labels)?;
        Ok(model.with_random_effects(toggles.random_effects))
    }

    /// Model from an explicit stacked design. `group[k]` is the individual
    /// of observation `k`; individuals may have no observations.
    pub fn from_parts(
        x: DMatrix<f64>,
        y: DVector<f64>,
        group: Vec<usize>,
        n_individuals: usize,
        alpha_labels: Vec<String>,
    ) -> Result<Self> {
        if x.nrows() != y.len() || group.len() != y.len() || alpha_labels.len() != x.ncols() {
            return Err(Error::InvalidParameter("design, response and groups disagree".into()));
        }
        let mut t = vec![0; n_individuals];
        for &g in &group {
            *t.get_mut(g)
                .ok_or_else(|| Error::InvalidParameter(format!("group {g} out of range")))? += 1;
        }
        Ok(Self {
            labels: alpha_labels,
            xtx: x.tr_mul(&x),
            x,
            y,
            group,
            t,
            random_effects: true,
            fixed_sigma2: None,
            priors: UniPriors::default(),
        })
    }

    pub fn with_priors(mut self, priors: UniPriors) -> Result<Self> {
        priors.validate()?;
        self.priors = priors;
        Ok(self)
    }

    pub fn with_random_effects(mut self, on: bool) -> Self {
        self.random_effects = on;
        self
    }

    /// Hold the residual variance at a known value.
    pub fn with_fixed_sigma2(mut self, sigma2: Option<f64>) -> Self {
        self.fixed_sigma2 = sigma2;
        self
    }

    pub fn priors(&self) -> &UniPriors {
        &self.priors
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn n_individuals(&self) -> usize {
        self.t.len()
    }

    pub fn n_alpha(&self) -> usize {
        self.x.ncols()
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn set_response(&mut self, y: DVector<f64>) -> Result<()> {
        if y.len() != self.y.len() {
            return Err(Error::InvalidParameter("response length changed".into()));
        }
        self.y = y;
        Ok(())
    }

    /// Reported parameters: the active fixed effects, `tau2` when random
    /// effects are on, then `sigma2`.
    pub fn param_labels(&self) -> Vec<String> {
        let mut l = self.labels.clone();
        if self.random_effects {
            l.push("tau2".into());
        }
        l.push("sigma2".into());
        l
    }

    pub fn params(&self, s: &UniState) -> Vec<f64> {
        let mut v: Vec<f64> = s.alpha.iter().copied().collect();
        if self.random_effects {
            v.push(s.tau2);
        }
        v.push(s.sigma2);
        v
    }

    /// Fixed effects at the prior-regularized least-squares fit, zero
    /// random effects, unit variances.
    pub fn initial_state(&self) -> Result<UniState> {
        let p = self.n_alpha();
        let a = &self.xtx + DMatrix::identity(p, p) / self.priors.alpha_variance;
        let alpha = a
            .cholesky()
            .ok_or_else(|| Error::Numerical("initial least squares is singular".into()))?
            .solve(&self.x.tr_mul(&self.y));
        Ok(UniState {
            alpha,
            beta: DVector::zeros(self.n_individuals()),
            sigma2: self.fixed_sigma2.unwrap_or(1.0),
            tau2: 1.0,
        })
    }

    fn beta_expanded(&self, beta: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.group.len(), self.group.iter().map(|&g| beta[g]))
    }

    /// Precision and linear term of the fixed-effects full conditional:
    /// `P = X'X / sigma2 + I / v0`, `b = X'(y - beta) / sigma2`.
    pub fn alpha_conditional(&self, s: &UniState) -> (DMatrix<f64>, DVector<f64>) {
        let p = self.n_alpha();
        let precision = &self.xtx / s.sigma2 + DMatrix::identity(p, p) / self.priors.alpha_variance;
        let linear = self.x.tr_mul(&(&self.y - self.beta_expanded(&s.beta))) / s.sigma2;
        (precision, linear)
    }

    pub fn update_alpha<R: Rng + ?Sized>(&self, s: &mut UniState, rng: &mut R) -> Result<()> {
        let (precision, linear) = self.alpha_conditional(s);
        s.alpha = normal_from_precision(&precision, &linear, rng)?;
        Ok(())
    }

    /// `beta_i ~ N(v_i sum(r_i) / sigma2, v_i)`, `v_i = 1 / (t_i / sigma2 + 1 / tau2)`.
    pub fn update_beta<R: Rng + ?Sized>(&self, s: &mut UniState, rng: &mut R) {
        if !self.random_effects {
            s.beta.fill(0.0);
            return;
        }
        let fitted = &self.x * &s.alpha;
        let mut sums = vec![0.0; self.n_individuals()];
        for (k, &g) in self.group.iter().enumerate() {
            sums[g] += self.y[k] - fitted[k];
        }
        for (i, sum) in sums.into_iter().enumerate() {
            let v = 1.0 / (self.t[i] as f64 / s.sigma2 + 1.0 / s.tau2);
            s.beta[i] = v * sum / s.sigma2 + v.sqrt() * standard_normal(rng);
        }
    }

    pub fn residuals(&self, s: &UniState) -> DVector<f64> {
        &self.y - &self.x * &s.alpha - self.beta_expanded(&s.beta)
    }

    pub fn update_sigma2<R: Rng + ?Sized>(&self, s: &mut UniState, rng: &mut R) {
        if let Some(v) = self.fixed_sigma2 {
            s.sigma2 = v;
            return;
        }
        let ssr = self.residuals(s).norm_squared();
        s.sigma2 = inverse_gamma(
            self.priors.sigma2_shape + self.n_obs() as f64 / 2.0,
            self.priors.sigma2_scale + ssr / 2.0,
            rng,
        );
    }

    pub fn update_tau2<R: Rng + ?Sized>(&self, s: &mut UniState, rng: &mut R) {
        if !self.random_effects {
            return;
        }
        s.tau2 = inverse_gamma(
            self.priors.tau2_shape + self.n_individuals() as f64 / 2.0,
            self.priors.tau2_scale + s.beta.norm_squared() / 2.0,
            rng,
        );
    }

    /// One systematic scan: alpha, beta, sigma2, tau2.
    pub fn sweep<R: Rng + ?Sized>(&self, s: &mut UniState, rng: &mut R) -> Result<()> {
        self.update_alpha(s, rng)?;
        self.update_beta(s, rng);
        self.update_sigma2(s, rng);
        self.update_tau2(s, rng);
        Ok(())
    }

    /// Per-observation log density given the random effects.
    pub fn loglik(&self, s: &UniState) -> Vec<f64> {
        self.residuals(s)
            .iter()
            .map(|&e| normal_logpdf(e, s.sigma2))
            .collect()
    }

    pub fn draw_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> UniState {
        let sd = self.priors.alpha_variance.sqrt();
        let alpha = DVector::from_fn(self.n_alpha(), |_, _| sd * standard_normal(rng));
        let tau2 = if self.random_effects {
            inverse_gamma(self.priors.tau2_shape, self.priors.tau2_scale, rng)
        } else {
            1.0
        };
        let beta = if self.random_effects {
            DVector::from_fn(self.n_individuals(), |_, _| tau2.sqrt() * standard_normal(rng))
        } else {
            DVector::zeros(self.n_individuals())
        };
        let sigma2 = self
            .fixed_sigma2
            .unwrap_or_else(|| inverse_gamma(self.priors.sigma2_shape, self.priors.sigma2_scale, rng));
        UniState {
            alpha,
            beta,
            sigma2,
            tau2,
        }
    }

    /// Response drawn from the likelihood at `s`.
    pub fn simulate_response<R: Rng + ?Sized>(&self, s: &UniState, rng: &mut R) -> DVector<f64> {
        let sd = s.sigma2.sqrt();
        let mean = &self.x * &s.alpha + self.beta_expanded(&s.beta);
        mean.map(|m| m + sd * standard_normal(rng))
    }

    fn check_finite(&self, s: &UniState, chain: usize, iteration: usize) -> Result<()> {
        let ok = s.alpha.iter().all(|v| v.is_finite())
            && s.beta.iter().all(|v| v.is_finite())
            && s.sigma2.is_finite()
            && s.sigma2 > 0.0
            && s.tau2.is_finite()
            && s.tau2 > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::ChainDivergence {
                chain,
                iteration,
                reason: "non-finite parameter state".into(),
            })
        }
    }

    pub fn run_chain(&self, cfg: &SamplerConfig, chain: usize) -> Result<ChainOutput> {
        cfg.validate()?;
        if self.n_obs() == 0 {
            return Err(Error::InvalidParameter("dataset has no observations".into()));
        }
        let mut rng: ChaCha8Rng = seeded_rng(cfg.seed, chain as u64);
        let mut state = self.initial_state()?;
        let mut rec = ChainRecorder::new(chain, *cfg, self.n_obs());
        for it in 0..cfg.iterations {
            self.sweep(&mut state, &mut rng)?;
            self.check_finite(&state, chain, it)?;
            if rec.wants(it) {
                rec.record(it, self.params(&state), &self.loglik(&state))?;
            }
        }
        Ok(rec.finish())
    }

    /// All chains, in parallel, each on its own random stream.
    pub fn run(&self, cfg: &SamplerConfig) -> Result<PosteriorDraws> {
        cfg.validate()?;
        let chains = (0..cfg.chains)
            .into_par_iter()
            .map(|c| self.run_chain(cfg, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(PosteriorDraws {
            labels: self.param_labels(),
            chains,
            config: *cfg,
            n_obs: self.n_obs(),
        })
    }
}
