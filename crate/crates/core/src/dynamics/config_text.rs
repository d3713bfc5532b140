//! `key = value` rendering of [`GanConfig`].
//!
//! Lists use `,`; data points are separated by `;` with coordinates
//! separated by `,` (so the toy data is `0;4`). Blank lines and `#` comments
//! are ignored.

use std::collections::HashSet;
use std::fmt::Display;
use std::str::FromStr;

use super::{DynamicsError, GanConfig};

/// Every recognized key, in rendering order.
pub const CONFIG_KEYS: &[&str] = &[
    "data",
    "labels",
    "loss",
    "regularizer",
    "lambda",
    "alpha",
    "dig_mode",
    "pairing",
    "dragan_noise_std",
    "optimizer",
    "learning_rate",
    "momentum",
    "iterations",
    "seed",
    "latent_dim",
    "latent_dist",
    "fixed_codes",
    "fake_batch",
    "gen_hidden",
    "gen_hidden_act",
    "gen_output_act",
    "gen_output_scale",
    "disc_hidden",
    "disc_hidden_act",
    "disc_output_act",
    "log_stride",
    "coverage_eps",
    "divergence_threshold",
    "optimality_tol",
    "optimality_max_steps",
];

fn join<T: Display>(v: &[T], sep: &str) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(sep)
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, DynamicsError>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| DynamicsError::Config(format!("{key}: cannot parse `{value}`: {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, DynamicsError>
where
    T::Err: Display,
{
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

/// Closest known key, if any is reasonably close.
pub fn suggest_key(unknown: &str) -> Option<&'static str> {
    CONFIG_KEYS
        .iter()
        .map(|k| (strsim::jaro_winkler(unknown, k), *k))
        .filter(|(score, _)| *score > 0.8)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, k)| k)
}

impl GanConfig {
    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), DynamicsError> {
        let v = value.trim();
        match key {
            "data" => {
                self.data = v
                    .split(';')
                    .map(|p| parse_list::<f64>(key, p.trim()))
                    .collect::<Result<_, _>>()?
            }
            "labels" => self.labels = if v == "none" { None } else { Some(parse_list(key, &v.replace(';', ","))?) },
            "loss" => self.loss = parse(key, v)?,
            "regularizer" => self.regularizer = parse(key, v)?,
            "lambda" => self.lambda = parse(key, v)?,
            "alpha" => self.alpha = parse(key, v)?,
            "dig_mode" => self.dig_mode = parse(key, v)?,
            "pairing" => self.pairing = parse(key, v)?,
            "dragan_noise_std" => self.dragan_noise_std = if v == "auto" { None } else { Some(parse(key, v)?) },
            "optimizer" => self.optimizer = parse(key, v)?,
            "learning_rate" => self.learning_rate = parse(key, v)?,
            "momentum" => self.momentum = parse(key, v)?,
            "iterations" => self.iterations = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "latent_dim" => self.latent_dim = parse(key, v)?,
            "latent_dist" => self.latent_dist = parse(key, v)?,
            "fixed_codes" => self.fixed_codes = parse(key, v)?,
            "fake_batch" => self.fake_batch = parse(key, v)?,
            "gen_hidden" => self.gen_hidden = parse_list(key, v)?,
            "gen_hidden_act" => self.gen_hidden_act = parse(key, v)?,
            "gen_output_act" => self.gen_output_act = parse(key, v)?,
            "gen_output_scale" => self.gen_output_scale = parse(key, v)?,
            "disc_hidden" => self.disc_hidden = parse_list(key, v)?,
            "disc_hidden_act" => self.disc_hidden_act = parse(key, v)?,
            "disc_output_act" => self.disc_output_act = parse(key, v)?,
            "log_stride" => self.log_stride = parse(key, v)?,
            "coverage_eps" => self.coverage_eps = parse(key, v)?,
            "divergence_threshold" => self.divergence_threshold = parse(key, v)?,
            "optimality_tol" => self.optimality_tol = parse(key, v)?,
            "optimality_max_steps" => self.optimality_max_steps = parse(key, v)?,
            other => {
                let hint = suggest_key(other).map_or(String::new(), |k| format!("; did you mean `{k}`?"));
                return Err(DynamicsError::Config(format!("unknown key `{other}`{hint}")));
            }
        }
        Ok(())
    }

    /// Textual value of one field, in the form [`GanConfig::set`] accepts.
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "data" => self.data.iter().map(|p| join(p, ",")).collect::<Vec<_>>().join(";"),
            "labels" => self.labels.as_ref().map_or("none".into(), |l| join(l, ",")),
            "loss" => self.loss.as_str().into(),
            "regularizer" => self.regularizer.as_str().into(),
            "lambda" => self.lambda.to_string(),
            "alpha" => self.alpha.to_string(),
            "dig_mode" => self.dig_mode.as_str().into(),
            "pairing" => self.pairing.as_str().into(),
            "dragan_noise_std" => self.dragan_noise_std.map_or("auto".into(), |s| s.to_string()),
            "optimizer" => self.optimizer.as_str().into(),
            "learning_rate" => self.learning_rate.to_string(),
            "momentum" => self.momentum.to_string(),
            "iterations" => self.iterations.to_string(),
            "seed" => self.seed.to_string(),
            "latent_dim" => self.latent_dim.to_string(),
            "latent_dist" => self.latent_dist.as_str().into(),
            "fixed_codes" => self.fixed_codes.to_string(),
            "fake_batch" => self.fake_batch.to_string(),
            "gen_hidden" => join(&self.gen_hidden, ","),
            "gen_hidden_act" => self.gen_hidden_act.as_str().into(),
            "gen_output_act" => self.gen_output_act.as_str().into(),
            "gen_output_scale" => self.gen_output_scale.to_string(),
            "disc_hidden" => join(&self.disc_hidden, ","),
            "disc_hidden_act" => self.disc_hidden_act.as_str().into(),
            "disc_output_act" => self.disc_output_act.as_str().into(),
            "log_stride" => self.log_stride.to_string(),
            "coverage_eps" => self.coverage_eps.to_string(),
            "divergence_threshold" => self.divergence_threshold.to_string(),
            "optimality_tol" => self.optimality_tol.to_string(),
            "optimality_max_steps" => self.optimality_max_steps.to_string(),
            _ => return None,
        })
    }

    /// Fully resolved rendering; every key is present.
    pub fn to_text(&self) -> String {
        CONFIG_KEYS
            .iter()
            .map(|k| format!("{k} = {}\n", self.get(k).expect("known key")))
            .collect()
    }

    /// Applies `key = value` lines on top of `self`. Unknown and repeated
    /// keys are errors.
    pub fn apply_text(mut self, text: &str) -> Result<Self, DynamicsError> {
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| DynamicsError::Config(format!("line {}: expected `key = value`, got `{line}`", i + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(DynamicsError::Config(format!("line {}: duplicate key `{key}`", i + 1)));
            }
            self.set(key, value)
                .map_err(|e| DynamicsError::Config(format!("line {}: {}", i + 1, strip_prefix(e))))?;
        }
        Ok(self)
    }

    /// Parses a config file over the defaults.
    pub fn from_text(text: &str) -> Result<Self, DynamicsError> {
        Self::default().apply_text(text)
    }
}

fn strip_prefix(e: DynamicsError) -> String {
    match e {
        DynamicsError::Config(m) => m,
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ganreg::RegularizerKind;

    #[test]
    fn round_trip_default_and_presets() {
        for (name, _) in super::super::PRESETS {
            let c = GanConfig::preset(name).unwrap();
            assert_eq!(GanConfig::from_text(&c.to_text()).unwrap(), c, "{name}");
        }
    }

    #[test]
    fn round_trip_unusual_values() {
        let c = GanConfig {
            data: vec![vec![0.1, -2.5], vec![1e-300, 3.0]],
            labels: Some(vec![0, 1]),
            dragan_noise_std: Some(0.3),
            lambda: 1.0 / 3.0,
            ..GanConfig::default()
        };
        assert_eq!(GanConfig::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn comments_and_overrides() {
        let c = GanConfig::from_text("# toy\nregularizer = dig  # on\n\nlambda=2.5\n").unwrap();
        assert_eq!(c.regularizer, RegularizerKind::Dig);
        assert_eq!(c.lambda, 2.5);
        assert_eq!(c.iterations, 10_000);
    }

    #[test]
    fn unknown_key_suggests() {
        let e = GanConfig::from_text("lamda = 1").unwrap_err().to_string();
        assert!(e.contains("unknown key `lamda`") && e.contains("did you mean `lambda`"), "{e}");
    }

    #[test]
    fn duplicate_key_rejected() {
        let e = GanConfig::from_text("lambda = 1\nlambda = 2").unwrap_err().to_string();
        assert!(e.contains("duplicate key `lambda`"), "{e}");
    }

    #[test]
    fn bad_value_names_key_and_line() {
        let e = GanConfig::from_text("\niterations = lots").unwrap_err().to_string();
        assert!(e.contains("line 2") && e.contains("iterations"), "{e}");
    }
}
