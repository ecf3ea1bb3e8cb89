//! Named path models selectable at runtime.
//!
//! Each model is built from a flat `key=value` configuration laid over its
//! preset defaults. Preset parameter values are placeholders chosen to give
//! membrane-potential-like paths (mV, seconds); override them freely.

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::TimeSeries;
use crate::simulation::{
    simulate_diffusion, simulate_fbm, simulate_jump_diffusion, DiffusionCoefficient, DiffusionSpec, FbmSpec, JumpSpec,
};

/// Flat `key=value` overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ModelConfig(BTreeMap<String, String>);

impl ModelConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.0.insert(key.into(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.0
    }

    /// Parse one `key=value` assignment.
    pub fn assign(&mut self, item: &str) -> Result<()> {
        let (k, v) = item.split_once('=').ok_or_else(|| Error::invalid(format!("expected key=value, got '{item}'")))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::invalid(format!("empty key in '{item}'")));
        }
        self.set(k, v);
        Ok(())
    }

    /// Read `key=value` lines; blank lines and `#` comments are skipped.
    pub fn parse<R: BufRead>(source: R) -> Result<Self> {
        let mut cfg = Self::new();
        for (idx, line) in source.lines().enumerate() {
            let line = line?;
            let text = line.split('#').next().unwrap_or("").trim();
            if text.is_empty() {
                continue;
            }
            cfg.assign(text).map_err(|e| Error::Parse { line: idx + 1, message: e.to_string() })?;
        }
        Ok(cfg)
    }
}

/// Typed reader over a [`ModelConfig`] that tracks which keys were consumed.
struct Params<'a> {
    cfg: &'a ModelConfig,
    known: Vec<&'static str>,
}

impl<'a> Params<'a> {
    fn new(cfg: &'a ModelConfig) -> Self {
        Self { cfg, known: Vec::new() }
    }

    fn f64(&mut self, key: &'static str, default: f64) -> Result<f64> {
        self.known.push(key);
        match self.cfg.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Error::invalid(format!("{key}: not a number: '{v}'"))),
        }
    }

    fn usize(&mut self, key: &'static str, default: usize) -> Result<usize> {
        self.known.push(key);
        match self.cfg.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Error::invalid(format!("{key}: not a count: '{v}'"))),
        }
    }

    fn finish(self, model: &str) -> Result<()> {
        if let Some(k) = self.cfg.entries().keys().find(|k| !self.known.contains(&k.as_str())) {
            return Err(Error::invalid(format!(
                "unknown key '{k}' for model '{model}' (known: {})",
                self.known.join(", ")
            )));
        }
        Ok(())
    }
}

/// A path generator with fixed parameters.
pub trait PathModel: fmt::Debug + Send + Sync {
    fn name(&self) -> &str;
    fn simulate(&self, seed: u64) -> Result<TimeSeries>;
    /// Parameters as JSON, for config echoes.
    fn describe(&self) -> serde_json::Value;
}

#[derive(Debug, Clone)]
struct Diffusion {
    name: &'static str,
    spec: DiffusionSpec,
}

impl PathModel for Diffusion {
    fn name(&self) -> &str {
        self.name
    }

    fn simulate(&self, seed: u64) -> Result<TimeSeries> {
        simulate_diffusion(&DiffusionSpec { seed, ..self.spec })
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({ "model": self.name, "spec": self.spec })
    }
}

#[derive(Debug, Clone)]
struct JumpDiffusion {
    spec: JumpSpec,
}

impl PathModel for JumpDiffusion {
    fn name(&self) -> &str {
        "jump"
    }

    fn simulate(&self, seed: u64) -> Result<TimeSeries> {
        let mut spec = self.spec;
        spec.base.seed = seed;
        simulate_jump_diffusion(&spec)
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({ "model": "jump", "spec": self.spec })
    }
}

#[derive(Debug, Clone)]
struct Fbm {
    spec: FbmSpec,
}

impl PathModel for Fbm {
    fn name(&self) -> &str {
        "fbm"
    }

    fn simulate(&self, seed: u64) -> Result<TimeSeries> {
        simulate_fbm(&FbmSpec { seed, ..self.spec })
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({ "model": "fbm", "spec": self.spec })
    }
}

fn drift_params(p: &mut Params, n_default: usize) -> Result<(f64, f64, f64, f64, usize)> {
    Ok((p.f64("theta", 20.0)?, p.f64("mu", -60.0)?, p.f64("x0", -60.0)?, p.f64("dt", 6e-4)?, p.usize("n", n_default)?))
}

fn diffusion_from(name: &'static str, cfg: &ModelConfig) -> Result<DiffusionSpec> {
    let mut p = Params::new(cfg);
    let (theta, mu, x0, dt, n) = drift_params(&mut p, 100_001)?;
    let coefficient = match name {
        "ou" | "jump" => DiffusionCoefficient::Constant { sigma: p.f64("sigma", 5.0)? },
        "cir" => DiffusionCoefficient::Cir { a: p.f64("a", 2.5)?, floor: p.f64("floor", -75.0)? },
        "pearson" => DiffusionCoefficient::Pearson { a: p.f64("a", 0.1)?, m: p.f64("m", -60.0)?, b: p.f64("b", 25.0)? },
        _ => unreachable!("not a diffusion model: {name}"),
    };
    if name == "jump" {
        p.known.extend(["alpha", "epsilon"]);
    }
    p.finish(name)?;
    let spec = DiffusionSpec { theta, mu, coefficient, x0, dt, n, seed: 0 };
    spec.validate()?;
    Ok(spec)
}

fn build_ou(cfg: &ModelConfig) -> Result<Box<dyn PathModel>> {
    Ok(Box::new(Diffusion { name: "ou", spec: diffusion_from("ou", cfg)? }))
}

fn build_cir(cfg: &ModelConfig) -> Result<Box<dyn PathModel>> {
    Ok(Box::new(Diffusion { name: "cir", spec: diffusion_from("cir", cfg)? }))
}

fn build_pearson(cfg: &ModelConfig) -> Result<Box<dyn PathModel>> {
    Ok(Box::new(Diffusion { name: "pearson", spec: diffusion_from("pearson", cfg)? }))
}

fn build_jump(cfg: &ModelConfig) -> Result<Box<dyn PathModel>> {
    let base = diffusion_from("jump", cfg)?;
    let mut p = Params::new(cfg);
    let alpha = p.f64("alpha", 1.75)?;
    let epsilon = p.f64("epsilon", 0.1)?;
    let spec = JumpSpec { base, alpha, epsilon };
    spec.validate()?;
    Ok(Box::new(JumpDiffusion { spec }))
}

fn build_fbm(cfg: &ModelConfig) -> Result<Box<dyn PathModel>> {
    let mut p = Params::new(cfg);
    let spec = FbmSpec {
        hurst: p.f64("hurst", 0.3)?,
        n: p.usize("n", 60_001)?,
        dt: p.f64("dt", 6e-4)?,
        scale: p.f64("scale", 5.0)?,
        x0: p.f64("x0", -60.0)?,
        seed: 0,
    };
    p.finish("fbm")?;
    spec.validate()?;
    Ok(Box::new(Fbm { spec }))
}

pub type ModelFactory = fn(&ModelConfig) -> Result<Box<dyn PathModel>>;

/// Name-to-factory table.
#[derive(Clone, Default)]
pub struct ModelRegistry {
    factories: BTreeMap<String, ModelFactory>,
}

impl fmt::Debug for ModelRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

impl ModelRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// `ou`, `cir`, `pearson`, `jump` and `fbm`.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("ou", build_ou);
        r.register("cir", build_cir);
        r.register("pearson", build_pearson);
        r.register("jump", build_jump);
        r.register("fbm", build_fbm);
        r
    }

    /// Adds or replaces a factory.
    pub fn register(&mut self, name: impl Into<String>, factory: ModelFactory) {
        self.factories.insert(name.into(), factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, name: &str, cfg: &ModelConfig) -> Result<Box<dyn PathModel>> {
        let factory = self.factories.get(name).ok_or_else(|| Error::UnknownModel {
            name: name.to_string(),
            available: self.names().collect::<Vec<_>>().join(", "),
        })?;
        factory(cfg)
    }
}
