use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{normal_logpdf, ChainOutput, ChainRecorder, ModelToggles, PosteriorDraws, SamplerConfig};
use crate::dataset::{build_design_uni, AssembledDataset};
use crate::error::{Error, Result};
use crate::sampling::{inverse_gamma, seeded_rng, spd_inverse, standard_normal, symmetrize, wishart};

/// Prior hyperparameters. `lambda^-1 ~ Wishart((r R)^-1, r)` with
/// `E[X] = df * scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiPriors {
    pub alpha_variance: f64,
    pub sigma2_shape: f64,
    pub sigma2_scale: f64,
    pub wishart_df: f64,
    /// `d x d`, row-major.
    pub wishart_r: Vec<f64>,
}

impl MultiPriors {
    /// `r = d`, `R = 0.1 I`.
    pub fn for_dimension(d: usize) -> Self {
        let mut r = vec![0.0; d * d];
        for k in 0..d {
            r[k * d + k] = 0.1;
        }
        Self {
            alpha_variance: 10_000.0,
            sigma2_shape: 2.0,
            sigma2_scale: 1.0,
            wishart_df: d as f64,
            wishart_r: r,
        }
    }

    fn r_matrix(&self, d: usize) -> Result<DMatrix<f64>> {
        if self.wishart_r.len() != d * d {
            return Err(Error::Covariance(format!("R must be {d} x {d}")));
        }
        let r = DMatrix::from_row_slice(d, d, &self.wishart_r);
        if r.clone().cholesky().is_none() || (&r - r.transpose()).abs().max() > 1e-12 {
            return Err(Error::Covariance("R must be symmetric positive definite".into()));
        }
        Ok(r)
    }

    fn validate(&self, d: usize) -> Result<()> {
        let pos = [self.alpha_variance, self.sigma2_shape, self.sigma2_scale];
        if !pos.iter().all(|v| *v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter("prior hyperparameters must be positive".into()));
        }
        if self.wishart_df < d as f64 {
            return Err(Error::InvalidParameter(format!(
                "Wishart degrees of freedom {} below dimension {d}",
                self.wishart_df
            )));
        }
        self.r_matrix(d).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiState {
    /// `p x d`; column `k` holds index `k`'s fixed effects, so the
    /// column-major storage is the index-major coefficient vector.
    pub alpha: DMatrix<f64>,
    /// `n x d`, one row per individual.
    pub beta: DMatrix<f64>,
    pub sigma2: f64,
    pub lambda: DMatrix<f64>,
    pub lambda_inv: DMatrix<f64>,
}

/// Multivariate mixed model over `d` indices with correlated individual
/// effects `beta_i ~ N(0, lambda)` and a shared residual variance.
#[derive(Debug, Clone)]
pub struct MultiModel {
    index_names: Vec<String>,
    column_numbers: Vec<usize>,
    x: DMatrix<f64>,
    xtx: DMatrix<f64>,
    /// `N x d`, one row per recording-year.
    y: DMatrix<f64>,
    group: Vec<usize>,
    t: Vec<usize>,
    random_effects: bool,
    fixed_sigma2: Option<f64>,
    priors: MultiPriors,
    r_matrix: DMatrix<f64>,
}

impl MultiModel {
    pub fn new(data: &AssembledDataset, toggles: ModelToggles) -> Result<Self> {
        let d = data.n_indices();
        if d == 0 {
            return Err(Error::MissingResponse("dataset has no indices".into()));
        }
        let active = toggles.active_columns(&data.years);
        let n_obs = data.n_recordings();
        let mut x = DMatrix::zeros(n_obs, active.len());
        let mut y = DMatrix::zeros(n_obs, d);
        let mut group = Vec::with_capacity(n_obs);
        let mut row = 0;
        for (i, ind) in data.individuals.iter().enumerate() {
            let xi = build_design_uni(ind, &data.years)?.matrix;
            for (s, obs) in ind.observations.iter().enumerate() {
                if obs.values.len() != d || obs.values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::MissingResponse(format!(
                        "{} year {}: expected {d} finite values",
                        obs.recording_id, obs.year
                    )));
                }
                for (j, &c) in active.iter().enumerate() {
                    x[(row, j)] = xi[(s, c)];
                }
                for k in 0..d {
                    y[(row, k)] = obs.values[k];
                }
                group.push(i);
                row += 1;
            }
        }
        let columns = active.iter().map(|c| c + 1).collect();
        let model = Self::from_parts(x, y, group, data.n_individuals(), data.index_names.clone(), columns)?;
        Ok(model.with_random_effects(toggles.random_effects))
    }

    /// Model from an explicit shared design `x` (`N x p`) and responses
    /// `y` (`N x d`). `column_numbers` label the fixed effects.
    pub fn from_parts(
        x: DMatrix<f64>,
        y: DMatrix<f64>,
        group: Vec<usize>,
        n_individuals: usize,
        index_names: Vec<String>,
        column_numbers: Vec<usize>,
    ) -> Result<Self> {
        let d = y.ncols();
        if x.nrows() != y.nrows()
            || group.len() != y.nrows()
            || index_names.len() != d
            || column_numbers.len() != x.ncols()
        {
            return Err(Error::InvalidParameter("design, response and groups disagree".into()));
        }
        let mut t = vec![0; n_individuals];
        for &g in &group {
            *t.get_mut(g)
                .ok_or_else(|| Error::InvalidParameter(format!("group {g} out of range")))? += 1;
        }
        let priors = MultiPriors::for_dimension(d);
        Ok(Self {
            index_names,
            column_numbers,
            xtx: x.tr_mul(&x),
            x,
            y,
            group,
            t,
            random_effects: true,
            fixed_sigma2: None,
            r_matrix: priors.r_matrix(d)?,
            priors,
        })
    }

    pub fn with_priors(mut self, priors: MultiPriors) -> Result<Self> {
        priors.validate(self.n_indices())?;
        self.r_matrix = priors.r_matrix(self.n_indices())?;
        self.priors = priors;
        Ok(self)
    }

    pub fn with_random_effects(mut self, on: bool) -> Self {
        self.random_effects = on;
        self
    }

    pub fn with_fixed_sigma2(mut self, sigma2: Option<f64>) -> Self {
        self.fixed_sigma2 = sigma2;
        self
    }

    pub fn priors(&self) -> &MultiPriors {
        &self.priors
    }

    pub fn index_names(&self) -> &[String] {
        &self.index_names
    }

    pub fn n_indices(&self) -> usize {
        self.y.ncols()
    }

    pub fn n_obs(&self) -> usize {
        self.y.nrows()
    }

    pub fn n_individuals(&self) -> usize {
        self.t.len()
    }

    pub fn n_columns(&self) -> usize {
        self.x.ncols()
    }

    pub fn response(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn set_response(&mut self, y: DMatrix<f64>) -> Result<()> {
        if y.shape() != self.y.shape() {
            return Err(Error::InvalidParameter("response shape changed".into()));
        }
        self.y = y;
        Ok(())
    }

    /// Fixed effects index-major (`alpha2_<index>_<column>`), `sigma2`, then
    /// the lower triangle of `lambda` row by row (`lambda_<i>_<j>`, `i >= j`).
    pub fn param_labels(&self) -> Vec<String> {
        let mut l = Vec::new();
        for name in &self.index_names {
            for c in &self.column_numbers {
                l.push(format!("alpha2_{name}_{c}"));
            }
        }
        l.push("sigma2".into());
        if self.random_effects {
            for i in 0..self.n_indices() {
                for j in 0..=i {
                    l.push(format!("lambda_{}_{}", self.index_names[i], self.index_names[j]));
                }
            }
        }
        l
    }

    pub fn params(&self, s: &MultiState) -> Vec<f64> {
        let mut v: Vec<f64> = s.alpha.as_slice().to_vec();
        v.push(s.sigma2);
        if self.random_effects {
            for i in 0..self.n_indices() {
                for j in 0..=i {
                    v.push(s.lambda[(i, j)]);
                }
            }
        }
        v
    }

    /// Rebuild `lambda` from the reported lower triangle.
    pub fn lambda_from_params(&self, params: &[f64]) -> Option<DMatrix<f64>> {
        if !self.random_effects {
            return None;
        }
        let d = self.n_indices();
        let mut k = self.n_columns() * d + 1;
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..=i {
                m[(i, j)] = params[k];
                m[(j, i)] = params[k];
                k += 1;
            }
        }
        Some(m)
    }

    pub fn initial_state(&self) -> Result<MultiState> {
        let (p, d) = (self.n_columns(), self.n_indices());
        let a = &self.xtx + DMatrix::identity(p, p) / self.priors.alpha_variance;
        let alpha = a
            .cholesky()
            .ok_or_else(|| Error::Numerical("initial least squares is singular".into()))?
            .solve(&self.x.tr_mul(&self.y));
        Ok(MultiState {
            alpha,
            beta: DMatrix::zeros(self.n_individuals(), d),
            sigma2: self.fixed_sigma2.unwrap_or(1.0),
            lambda: DMatrix::identity(d, d),
            lambda_inv: DMatrix::identity(d, d),
        })
    }

    fn beta_expanded(&self, beta: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_obs(), self.n_indices(), |r, k| beta[(self.group[r], k)])
    }

    /// The `p x p` precision shared by every index block, and the `p x d`
    /// linear terms.
    pub fn alpha_conditional(&self, s: &MultiState) -> (DMatrix<f64>, DMatrix<f64>) {
        let p = self.n_columns();
        let precision = &self.xtx / s.sigma2 + DMatrix::identity(p, p) / self.priors.alpha_variance;
        let linear = self.x.tr_mul(&(&self.y - self.beta_expanded(&s.beta))) / s.sigma2;
        (precision, linear)
    }

    pub fn update_alpha<R: Rng + ?Sized>(&self, s: &mut MultiState, rng: &mut R) -> Result<()> {
        let (precision, linear) = self.alpha_conditional(s);
        let chol = precision
            .cholesky()
            .ok_or_else(|| Error::Numerical("fixed-effects precision is not positive definite".into()))?;
        let mean = chol.solve(&linear);
        let z = DMatrix::from_fn(linear.nrows(), linear.ncols(), |_, _| standard_normal(rng));
        let noise = chol
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
        s.alpha = mean + noise;
        Ok(())
    }

    /// Per individual: covariance `(t_i / sigma2 I + lambda^-1)^-1`, mean
    /// `cov W_i' r_i / sigma2`. One eigendecomposition of `lambda^-1` per
    /// sweep serves every individual.
    pub fn update_beta<R: Rng + ?Sized>(&self, s: &mut MultiState, rng: &mut R) -> Result<()> {
        if !self.random_effects {
            s.beta.fill(0.0);
            return Ok(());
        }
        let d = self.n_indices();
        let resid = &self.y - &self.x * &s.alpha;
        let mut sums = DMatrix::zeros(self.n_individuals(), d);
        for (r, &g) in self.group.iter().enumerate() {
            for k in 0..d {
                sums[(g, k)] += resid[(r, k)];
            }
        }
        let eig = SymmetricEigen::new(s.lambda_inv.clone());
        if eig.eigenvalues.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Covariance("lambda lost positive definiteness".into()));
        }
        let q = &eig.eigenvectors;
        let qt_sums = &sums * q;
        for i in 0..self.n_individuals() {
            let a = self.t[i] as f64 / s.sigma2;
            let coef = DVector::from_fn(d, |j, _| {
                let w = 1.0 / (a + eig.eigenvalues[j]);
                w * qt_sums[(i, j)] / s.sigma2 + w.sqrt() * standard_normal(rng)
            });
            let draw = q * coef;
            for k in 0..d {
                s.beta[(i, k)] = draw[k];
            }
        }
        Ok(())
    }

    /// `lambda^-1 ~ Wishart((r R + sum beta_i beta_i')^-1, r + n)`.
    pub fn update_lambda<R: Rng + ?Sized>(&self, s: &mut MultiState, rng: &mut R) -> Result<()> {
        if !self.random_effects {
            return Ok(());
        }
        let scatter = &self.r_matrix * self.priors.wishart_df + s.beta.tr_mul(&s.beta);
        let scale = spd_inverse(&symmetrize(scatter))?;
        let w = wishart(&scale, self.priors.wishart_df + self.n_individuals() as f64, rng)?;
        s.lambda = spd_inverse(&w)?;
        s.lambda_inv = symmetrize(w);
        Ok(())
    }

    pub fn residuals(&self, s: &MultiState) -> DMatrix<f64> {
        &self.y - &self.x * &s.alpha - self.beta_expanded(&s.beta)
    }

    pub fn update_sigma2<R: Rng + ?Sized>(&self, s: &mut MultiState, rng: &mut R) {
        if let Some(v) = self.fixed_sigma2 {
            s.sigma2 = v;
            return;
        }
        let ssr = self.residuals(s).norm_squared();
        s.sigma2 = inverse_gamma(
            self.priors.sigma2_shape + (self.n_obs() * self.n_indices()) as f64 / 2.0,
            self.priors.sigma2_scale + ssr / 2.0,
            rng,
        );
    }

    /// One systematic scan: alpha, beta, sigma2, lambda.
    pub fn sweep<R: Rng + ?Sized>(&self, s: &mut MultiState, rng: &mut R) -> Result<()> {
        self.update_alpha(s, rng)?;
        self.update_beta(s, rng)?;
        self.update_sigma2(s, rng);
        self.update_lambda(s, rng)
    }

    /// Log density of each recording-year's `d`-vector given the random
    /// effects.
    pub fn loglik(&self, s: &MultiState) -> Vec<f64> {
        let e = self.residuals(s);
        e.row_iter()
            .map(|row| row.iter().map(|&v| normal_logpdf(v, s.sigma2)).sum())
            .collect()
    }

    pub fn draw_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<MultiState> {
        let (p, d, n) = (self.n_columns(), self.n_indices(), self.n_individuals());
        let sd = self.priors.alpha_variance.sqrt();
        let alpha = DMatrix::from_fn(p, d, |_, _| sd * standard_normal(rng));
        let (lambda, lambda_inv, beta) = if self.random_effects {
            let scale = spd_inverse(&(&self.r_matrix * self.priors.wishart_df))?;
            let w = wishart(&scale, self.priors.wishart_df, rng)?;
            let lambda = spd_inverse(&w)?;
            let l = lambda
                .clone()
                .cholesky()
                .ok_or_else(|| Error::Covariance("prior lambda draw is not positive definite".into()))?
                .l();
            let z = DMatrix::from_fn(d, n, |_, _| standard_normal(rng));
            let beta = (l * z).transpose();
            (lambda, symmetrize(w), beta)
        } else {
            (DMatrix::identity(d, d), DMatrix::identity(d, d), DMatrix::zeros(n, d))
        };
        let sigma2 = self
            .fixed_sigma2
            .unwrap_or_else(|| inverse_gamma(self.priors.sigma2_shape, self.priors.sigma2_scale, rng));
        Ok(MultiState {
            alpha,
            beta,
            sigma2,
            lambda,
            lambda_inv,
        })
    }

    pub fn simulate_response<R: Rng + ?Sized>(&self, s: &MultiState, rng: &mut R) -> DMatrix<f64> {
        let sd = s.sigma2.sqrt();
        let mean = &self.x * &s.alpha + self.beta_expanded(&s.beta);
        mean.map(|m| m + sd * standard_normal(rng))
    }

    fn check_finite(&self, s: &MultiState, chain: usize, iteration: usize) -> Result<()> {
        let ok = s.alpha.iter().all(|v| v.is_finite())
            && s.beta.iter().all(|v| v.is_finite())
            && s.lambda.iter().all(|v| v.is_finite())
            && s.sigma2.is_finite()
            && s.sigma2 > 0.0;
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
        self.priors.validate(self.n_indices())?;
        if self.n_obs() == 0 {
            return Err(Error::InvalidParameter("dataset has no observations".into()));
        }
        let mut rng: ChaCha8Rng = seeded_rng(cfg.seed, chain as u64);
        let mut state = self.initial_state()?;
        let mut rec = ChainRecorder::new(chain, *cfg, self.n_obs());
        for it in 0..cfg.iterations {
            self.sweep(&mut state, &mut rng).map_err(|e| match e {
                Error::Numerical(reason) | Error::Covariance(reason) => Error::ChainDivergence {
                    chain,
                    iteration: it,
                    reason,
                },
                other => other,
            })?;
            self.check_finite(&state, chain, it)?;
            if rec.wants(it) {
                rec.record(it, self.params(&state), &self.loglik(&state))?;
            }
        }
        Ok(rec.finish())
    }

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
