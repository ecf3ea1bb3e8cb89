//! Diffusion equivalents and controls.
//!
//! Euler–Maruyama paths with linear mean-reverting drift `theta * (mu - x)`
//! and one of three diffusion coefficients (constant, CIR-type linear,
//! Pearson-type quadratic), optionally driven by `dW + eps dS^alpha` with a
//! symmetric alpha-stable `S^alpha`. Fractional Brownian motion serves as a
//! non-semimartingale control.
//!
//! Every generator is a pure function of its spec: the master seed selects
//! a ChaCha stream family, Gaussian draws come from stream 0 and stable draws
//! from stream 1, so changing `eps` never shifts the Gaussian sequence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::TimeSeries;

const GAUSSIAN_STREAM: u64 = 0;
const STABLE_STREAM: u64 = 1;

/// Default ceiling on fBm path length (number of samples).
pub const FBM_MAX_SAMPLES: usize = 1 << 17;

pub(crate) fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard symmetric alpha-stable law, characteristic function
/// `exp(-|t|^alpha)`, sampled by Chambers–Mallows–Stuck.
///
/// `alpha = 2` is admitted and gives `Normal(0, 2)`; `alpha = 1` is the
/// standard Cauchy law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricStable {
    alpha: f64,
}

impl SymmetricStable {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::invalid(format!("stable index must lie in (0, 2], got {alpha}")));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Distribution<f64> for SymmetricStable {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let a = self.alpha;
        // U uniform on the open interval (-pi/2, pi/2)
        let u = loop {
            let v: f64 = rng.random();
            if v > 0.0 {
                break (v - 0.5) * std::f64::consts::PI;
            }
        };
        let e: f64 = Exp1.sample(rng);
        if a == 1.0 {
            return u.tan();
        }
        (a * u).sin() / u.cos().powf(1.0 / a) * (((1.0 - a) * u).cos() / e).powf((1.0 - a) / a)
    }
}

/// One standard symmetric alpha-stable draw.
pub fn stable_increment<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<f64> {
    Ok(SymmetricStable::new(alpha)?.sample(rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DiffusionCoefficient {
    /// `sigma(x) = sigma`
    Constant { sigma: f64 },
    /// `sigma^2(x) = a * max(x - floor, 0)`
    Cir { a: f64, floor: f64 },
    /// `sigma^2(x) = a * (x - m)^2 + b`
    Pearson { a: f64, m: f64, b: f64 },
}

impl DiffusionCoefficient {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Constant { sigma } => sigma.is_finite() && sigma >= 0.0,
            Self::Cir { a, floor } => a.is_finite() && a >= 0.0 && floor.is_finite(),
            Self::Pearson { a, m, b } => a.is_finite() && a >= 0.0 && m.is_finite() && b.is_finite() && b > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid diffusion coefficient {self:?}")))
        }
    }

    /// Argument at which the coefficient is actually evaluated.
    pub fn effective_state(&self, x: f64) -> f64 {
        match *self {
            Self::Cir { floor, .. } => x.max(floor),
            _ => x,
        }
    }

    pub fn variance(&self, x: f64) -> f64 {
        match *self {
            Self::Constant { sigma } => sigma * sigma,
            Self::Cir { a, floor } => a * (self.effective_state(x) - floor),
            Self::Pearson { a, m, b } => a * (x - m) * (x - m) + b,
        }
    }

    pub fn sigma(&self, x: f64) -> f64 {
        match *self {
            Self::Constant { sigma } => sigma,
            _ => self.variance(x).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiffusionSpec {
    /// Mean-reversion rate, 1/s.
    pub theta: f64,
    /// Long-run mean, mV.
    pub mu: f64,
    pub coefficient: DiffusionCoefficient,
    pub x0: f64,
    pub dt: f64,
    pub n: usize,
    pub seed: u64,
}

impl DiffusionSpec {
    pub fn ou(theta: f64, mu: f64, sigma: f64, x0: f64, dt: f64, n: usize, seed: u64) -> Self {
        Self { theta, mu, coefficient: DiffusionCoefficient::Constant { sigma }, x0, dt, n, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta.is_finite() && self.theta >= 0.0) {
            return Err(Error::invalid(format!("theta must be finite and >= 0, got {}", self.theta)));
        }
        if !(self.mu.is_finite() && self.x0.is_finite()) {
            return Err(Error::invalid("mu and x0 must be finite"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid(format!("dt must be finite and > 0, got {}", self.dt)));
        }
        if self.n < 2 {
            return Err(Error::Size { found: self.n, required: 2 });
        }
        self.coefficient.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpSpec {
    pub base: DiffusionSpec,
    pub alpha: f64,
    pub epsilon: f64,
}

impl JumpSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 2), got {}", self.alpha)));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::invalid(format!("epsilon must be finite and >= 0, got {}", self.epsilon)));
        }
        Ok(())
    }
}

fn euler(base: &DiffusionSpec, jumps: Option<(SymmetricStable, f64)>) -> Result<TimeSeries> {
    let dt = base.dt;
    let sqrt_dt = dt.sqrt();
    let mut gauss = substream(base.seed, GAUSSIAN_STREAM);
    let mut stable_rng = substream(base.seed, STABLE_STREAM);
    let jump_scale = jumps.map(|(law, eps)| (law, eps * dt.powf(1.0 / law.alpha())));

    let mut values = Vec::with_capacity(base.n);
    let mut x = base.x0;
    values.push(x);
    for _ in 1..base.n {
        let z: f64 = StandardNormal.sample(&mut gauss);
        let mut noise = sqrt_dt * z;
        if let Some((law, scale)) = jump_scale {
            let xi = law.sample(&mut stable_rng);
            if scale != 0.0 {
                noise += scale * xi;
            }
        }
        x += base.theta * (base.mu - x) * dt + base.coefficient.sigma(x) * noise;
        if !x.is_finite() {
            return Err(Error::Degenerate("simulated path left the finite range".into()));
        }
        values.push(x);
    }
    TimeSeries::new(dt, 0.0, values)
}

/// Euler–Maruyama path of `dX = theta (mu - X) dt + sigma(X) dW`.
pub fn simulate_diffusion(spec: &DiffusionSpec) -> Result<TimeSeries> {
    spec.validate()?;
    euler(spec, None)
}

/// Euler–Maruyama path with driver `dW + eps dS^alpha`; the stable part of
/// one step is `sigma(X) * eps * dt^(1/alpha) * xi`.
pub fn simulate_jump_diffusion(spec: &JumpSpec) -> Result<TimeSeries> {
    spec.validate()?;
    euler(&spec.base, Some((SymmetricStable::new(spec.alpha)?, spec.epsilon)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FbmSpec {
    pub hurst: f64,
    pub n: usize,
    pub dt: f64,
    pub scale: f64,
    pub x0: f64,
    pub seed: u64,
}

impl FbmSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.hurst > 0.0 && self.hurst < 1.0) {
            return Err(Error::invalid(format!("hurst must lie in (0, 1), got {}", self.hurst)));
        }
        if self.n < 2 {
            return Err(Error::Size { found: self.n, required: 2 });
        }
        if self.n > FBM_MAX_SAMPLES {
            return Err(Error::Capacity(format!(
                "fBm with {} samples exceeds the limit of {FBM_MAX_SAMPLES}; use a smaller n",
                self.n
            )));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid(format!("dt must be finite and > 0, got {}", self.dt)));
        }
        if !(self.scale.is_finite() && self.scale >= 0.0 && self.x0.is_finite()) {
            return Err(Error::invalid("scale must be finite and >= 0, x0 finite"));
        }
        Ok(())
    }
}

/// Autocovariance of unit fractional Gaussian noise at lag `k`.
pub fn fgn_autocovariance(hurst: f64, k: usize) -> f64 {
    let k = k as f64;
    let h2 = 2.0 * hurst;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

/// Exact fractional Brownian motion on the grid `i * dt` by circulant
/// embedding of the increment covariance.
///
/// `Cov(B_s, B_t) = scale^2 / 2 * (|s|^2H + |t|^2H - |t - s|^2H)`, shifted
/// by `x0`.
pub fn simulate_fbm(spec: &FbmSpec) -> Result<TimeSeries> {
    spec.validate()?;
    let m = spec.n - 1;
    let size = 2 * m;
    // first row of the circulant: c_0..c_m, c_{m-1}..c_1
    let mut row: Vec<Complex<f64>> = Vec::with_capacity(size);
    for k in 0..=m {
        row.push(Complex::new(fgn_autocovariance(spec.hurst, k), 0.0));
    }
    for k in (1..m).rev() {
        row.push(Complex::new(fgn_autocovariance(spec.hurst, k), 0.0));
    }
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(size);
    fft.process(&mut row);

    let tol = 1e-9 * row[0].re.abs().max(1.0);
    let mut eig = Vec::with_capacity(size);
    for c in &row {
        if c.re < -tol {
            return Err(Error::Capacity(format!(
                "circulant embedding not nonnegative (eigenvalue {}) for H={}",
                c.re, spec.hurst
            )));
        }
        eig.push(c.re.max(0.0));
    }

    let mut rng = substream(spec.seed, GAUSSIAN_STREAM);
    let mut w: Vec<Complex<f64>> = eig
        .iter()
        .map(|&lambda| {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            Complex::new(a, b) * (lambda / size as f64).sqrt()
        })
        .collect();
    fft.process(&mut w);

    let step = spec.scale * spec.dt.powf(spec.hurst);
    let mut values = Vec::with_capacity(spec.n);
    let mut acc = 0.0;
    values.push(spec.x0);
    for c in &w[..m] {
        acc += c.re * step;
        values.push(spec.x0 + acc);
    }
    TimeSeries::new(spec.dt, 0.0, values)
}
