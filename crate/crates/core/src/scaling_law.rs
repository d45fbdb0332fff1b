//! The parametric loss law and the quantities derived directly from it.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The five constants of `L(N, D) = E + A/N^α + B/D^β`.
///
/// Serialized as a JSON object with keys `"A"`, `"B"`, `"E"`, `"alpha"`,
/// `"beta"`. Deserialization goes through [`Coefficients::new`], so an
/// out-of-range document is rejected rather than loaded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCoefficients")]
pub struct Coefficients {
    #[serde(rename = "A")]
    a: f64,
    #[serde(rename = "B")]
    b: f64,
    #[serde(rename = "E")]
    e: f64,
    alpha: f64,
    beta: f64,
}

#[derive(Deserialize)]
struct RawCoefficients {
    #[serde(rename = "A")]
    a: f64,
    #[serde(rename = "B")]
    b: f64,
    #[serde(rename = "E")]
    e: f64,
    alpha: f64,
    beta: f64,
}

impl TryFrom<RawCoefficients> for Coefficients {
    type Error = Error;

    fn try_from(raw: RawCoefficients) -> Result<Self> {
        Coefficients::new(raw.a, raw.b, raw.e, raw.alpha, raw.beta)
    }
}

/// Named coefficient sets: the Chinchilla fit and the four ratio-subset fits
/// obtained on long-duration training runs.
pub const PRESETS: &[(&str, [f64; 5])] = &[
    ("chinchilla", [406.4, 410.7, 1.69, 0.336, 0.283]),
    ("fit-le100", [7.199, 25.97, 0.17, 0.08, 0.13]),
    ("fit-le250", [14.23, 39.54, 0.98, 0.13, 0.16]),
    ("fit-le500", [17.07, 35.80, 0.95, 0.13, 0.16]),
    ("fit-all", [33.66, 138.9, 1.45, 0.18, 0.24]),
];

impl Coefficients {
    pub fn new(a: f64, b: f64, e: f64, alpha: f64, beta: f64) -> Result<Self> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidCoefficients(what.to_string()))
            }
        };
        check(a.is_finite() && a > 0.0, "A must be finite and > 0")?;
        check(b.is_finite() && b > 0.0, "B must be finite and > 0")?;
        check(e.is_finite() && e >= 0.0, "E must be finite and >= 0")?;
        check(alpha > 0.0 && alpha < 2.0, "alpha must lie in (0, 2)")?;
        check(beta > 0.0 && beta < 2.0, "beta must lie in (0, 2)")?;
        Ok(Coefficients {
            a,
            b,
            e,
            alpha,
            beta,
        })
    }

    /// A = 406.4, B = 410.7, E = 1.69, α = 0.336, β = 0.283.
    ///
    /// The unrounded exponents are used; the rounded 0.34/0.28 do not reproduce
    /// the published Chinchilla configurations.
    pub fn chinchilla() -> Self {
        Self::preset("chinchilla").expect("built-in preset")
    }

    pub fn preset(name: &str) -> Option<Self> {
        PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, [a, b, e, alpha, beta])| {
                Coefficients::new(*a, *b, *e, *alpha, *beta).expect("built-in preset is valid")
            })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn e(&self) -> f64 {
        self.e
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidCoefficients(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("coefficients serialize")
    }

    /// `A / N^α`
    pub fn params_term(&self, params: f64) -> f64 {
        self.a * params.powf(-self.alpha)
    }

    /// `B / D^β`
    pub fn tokens_term(&self, tokens: f64) -> f64 {
        self.b * tokens.powf(-self.beta)
    }

    /// Pre-training loss in nats.
    pub fn loss(&self, cfg: &ModelConfig) -> f64 {
        self.loss_at(cfg.params, cfg.train_tokens)
    }

    pub fn loss_at(&self, params: f64, tokens: f64) -> f64 {
        self.e + self.params_term(params) + self.tokens_term(tokens)
    }

    /// Training tokens that bring a model of `params` parameters to
    /// `target_loss`.
    pub fn tokens_for_loss(&self, params: f64, target_loss: f64) -> Result<f64> {
        positive("params", params)?;
        let floor = self.e + self.params_term(params);
        let gap = target_loss - floor;
        if gap.is_nan() || gap <= 0.0 {
            return Err(Error::UnachievableLoss {
                target: target_loss,
                floor,
            });
        }
        Ok((self.b / gap).powf(1.0 / self.beta))
    }

    /// Parameters that reach `target_loss` when trained on `tokens` tokens.
    pub fn params_for_loss(&self, tokens: f64, target_loss: f64) -> Result<f64> {
        positive("tokens", tokens)?;
        let floor = self.e + self.tokens_term(tokens);
        let gap = target_loss - floor;
        if gap.is_nan() || gap <= 0.0 {
            return Err(Error::UnachievableLoss {
                target: target_loss,
                floor,
            });
        }
        Ok((self.a / gap).powf(1.0 / self.alpha))
    }

    /// The configuration reaching `target_loss` with the fewest training FLOPs.
    ///
    /// At the optimum `α·A/N^α = β·B/D^β`, which turns the constraint into
    /// `ℓ − E = (1 + β/α)·B/D^β`.
    pub fn chinchilla_baseline(&self, target_loss: f64) -> Result<ModelConfig> {
        self.check_above_floor(target_loss)?;
        let tokens = (self.b * (self.alpha + self.beta) / (self.alpha * (target_loss - self.e)))
            .powf(1.0 / self.beta);
        let params = self.params_for_loss(tokens, target_loss)?;
        ModelConfig::new(params, tokens)
    }

    /// Loss of the training-compute-optimal model with `params` parameters.
    ///
    /// This is how a quality target is expressed as "a 70B Chinchilla model":
    /// the inverse of `chinchilla_baseline(ℓ).params()`.
    pub fn loss_for_chinchilla_params(&self, params: f64) -> Result<f64> {
        positive("params", params)?;
        Ok(self.e + self.params_term(params) * (1.0 + self.alpha / self.beta))
    }

    pub(crate) fn check_above_floor(&self, target_loss: f64) -> Result<()> {
        if target_loss.is_finite() && target_loss > self.e {
            Ok(())
        } else {
            Err(Error::UnachievableLoss {
                target: target_loss,
                floor: self.e,
            })
        }
    }
}

impl Default for Coefficients {
    fn default() -> Self {
        Self::chinchilla()
    }
}

fn positive(field: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            field,
            format!("must be finite and > 0, got {value}"),
        ))
    }
}

/// A (parameter count, training-token count) pair. Both are real-valued.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModelConfig")]
pub struct ModelConfig {
    params: f64,
    train_tokens: f64,
}

#[derive(Deserialize)]
struct RawModelConfig {
    params: f64,
    train_tokens: f64,
}

impl TryFrom<RawModelConfig> for ModelConfig {
    type Error = Error;

    fn try_from(raw: RawModelConfig) -> Result<Self> {
        ModelConfig::new(raw.params, raw.train_tokens)
    }
}

impl ModelConfig {
    pub fn new(params: f64, train_tokens: f64) -> Result<Self> {
        positive("params", params)?;
        positive("train_tokens", train_tokens)?;
        Ok(ModelConfig {
            params,
            train_tokens,
        })
    }

    pub fn params(&self) -> f64 {
        self.params
    }

    pub fn train_tokens(&self) -> f64 {
        self.train_tokens
    }

    pub fn tokens_per_param(&self) -> f64 {
        self.train_tokens / self.params
    }
}

/// Training and inference FLOPs under the 6N / 2N per-token approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlopAccount {
    pub train_flops: f64,
    pub inference_flops: f64,
    pub total_flops: f64,
}

impl FlopAccount {
    pub fn new(cfg: &ModelConfig, inference_tokens: f64) -> Result<Self> {
        if !(inference_tokens.is_finite() && inference_tokens >= 0.0) {
            return Err(Error::invalid(
                "inference_tokens",
                format!("must be finite and >= 0, got {inference_tokens}"),
            ));
        }
        let train_flops = 6.0 * cfg.params * cfg.train_tokens;
        let inference_flops = 2.0 * cfg.params * inference_tokens;
        Ok(FlopAccount {
            train_flops,
            inference_flops,
            total_flops: train_flops + inference_flops,
        })
    }
}
