//! `key = value` run configuration. Command-line flags override file values.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use gaze_core::cnn::TrainConfig;
use gaze_core::session::SamplerConfig;

use crate::error::CliError;

/// Environment variable naming the default configuration file.
pub const CONFIG_ENV: &str = "GAZE_CONFIG";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    pub face_cascade: Option<PathBuf>,
    pub eye_cascade: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub val_data: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub classes: Option<usize>,
    pub k: Option<usize>,
    pub iterations: Option<usize>,
    pub batch: Option<usize>,
    pub learning_rate: Option<f64>,
    pub momentum: Option<f64>,
    pub lr_decay: Option<f64>,
    pub lr_step: Option<usize>,
    pub dropout: Option<f64>,
    pub seed: Option<u64>,
    pub val_every: Option<usize>,
    pub lanes: Option<usize>,
    pub skip: Option<usize>,
    pub stride: Option<usize>,
}

pub const KEYS: &[&str] = &[
    "face_cascade",
    "eye_cascade",
    "data",
    "val_data",
    "weights",
    "classes",
    "k",
    "iterations",
    "batch",
    "learning_rate",
    "momentum",
    "lr_decay",
    "lr_step",
    "dropout",
    "seed",
    "val_every",
    "lanes",
    "skip",
    "stride",
];

fn num<T: FromStr>(line: usize, key: &str, v: &str) -> Result<Option<T>, CliError> {
    v.parse()
        .map(Some)
        .map_err(|_| CliError::format(format!("line {line}: {key} = {v:?} is not a valid number")))
}

impl Config {
    /// Parse a configuration file. Relative paths resolve against `base`,
    /// and every path must exist.
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut c = Config::default();
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let (key, value) = t
                .split_once('=')
                .ok_or_else(|| CliError::format(format!("line {line}: expected key = value")))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(CliError::format(format!("line {line}: unknown key {key:?}")));
            }
            if seen.contains(&key) {
                return Err(CliError::format(format!("line {line}: {key} given twice")));
            }
            seen.push(key);
            let path = || -> Result<Option<PathBuf>, CliError> {
                let p = base.join(value);
                if !p.exists() {
                    return Err(CliError::input(format!("line {line}: {key}: {} does not exist", p.display())));
                }
                Ok(Some(p))
            };
            match key {
                "face_cascade" => c.face_cascade = path()?,
                "eye_cascade" => c.eye_cascade = path()?,
                "data" => c.data = path()?,
                "val_data" => c.val_data = path()?,
                "weights" => c.weights = path()?,
                "classes" => c.classes = num(line, key, value)?,
                "k" => c.k = num(line, key, value)?,
                "iterations" => c.iterations = num(line, key, value)?,
                "batch" => c.batch = num(line, key, value)?,
                "learning_rate" => c.learning_rate = num(line, key, value)?,
                "momentum" => c.momentum = num(line, key, value)?,
                "lr_decay" => c.lr_decay = num(line, key, value)?,
                "lr_step" => c.lr_step = num(line, key, value)?,
                "dropout" => c.dropout = num(line, key, value)?,
                "seed" => c.seed = num(line, key, value)?,
                "val_every" => c.val_every = num(line, key, value)?,
                "lanes" => c.lanes = num(line, key, value)?,
                "skip" => c.skip = num(line, key, value)?,
                "stride" => c.stride = num(line, key, value)?,
                _ => unreachable!("key list and match agree"),
            }
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Config::parse(&text, base).map_err(|e| e.context(path.display()))
    }

    /// Values of `over` win where present.
    pub fn overlay(self, over: Config) -> Config {
        macro_rules! pick {
            ($($f:ident),*) => { Config { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(
            face_cascade, eye_cascade, data, val_data, weights, classes, k, iterations, batch, learning_rate, momentum,
            lr_decay, lr_step, dropout, seed, val_every, lanes, skip, stride
        )
    }

    pub fn train_config(&self) -> Result<TrainConfig, CliError> {
        let d = TrainConfig::default();
        let c = TrainConfig {
            iterations: self.iterations.unwrap_or(d.iterations),
            batch: self.batch.unwrap_or(d.batch),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            momentum: self.momentum.unwrap_or(d.momentum),
            lr_decay: self.lr_decay.unwrap_or(d.lr_decay),
            lr_step: self.lr_step.unwrap_or(d.lr_step),
            dropout: self.dropout.unwrap_or(d.dropout),
            seed: self.seed.unwrap_or(d.seed),
            val_every: self.val_every.unwrap_or(d.val_every),
            lanes: self.lanes.unwrap_or(d.lanes),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn sampler(&self) -> Result<SamplerConfig, CliError> {
        let d = SamplerConfig::default();
        Ok(SamplerConfig::new(self.skip.unwrap_or(d.skip), self.stride.unwrap_or(d.stride))?)
    }

    pub fn classes(&self) -> Result<usize, CliError> {
        match self.classes.unwrap_or(3) {
            c @ (2 | 3) => Ok(c),
            c => Err(CliError::input(format!("classes must be 2 or 3, not {c}"))),
        }
    }

    pub fn require<'a>(&self, value: &'a Option<PathBuf>, name: &str) -> Result<&'a Path, CliError> {
        value
            .as_deref()
            .ok_or_else(|| CliError::input(format!("no {name} given (flag --{} or config key {name})", name.replace('_', "-"))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_known_keys_and_rejects_others() {
        let c = Config::parse("# run\niterations = 10\n\nlearning_rate=0.5\nseed = 3\n", Path::new(".")).unwrap();
        assert_eq!((c.iterations, c.learning_rate, c.seed), (Some(10), Some(0.5), Some(3)));
        let e = Config::parse("iterations = 1\nbogus = 2\n", Path::new(".")).unwrap_err();
        assert!(e.message.contains("line 2") && e.message.contains("bogus"));
        assert!(Config::parse("batch = many", Path::new(".")).is_err());
        assert!(Config::parse("seed = 1\nseed = 2", Path::new(".")).is_err());
        assert!(Config::parse("no equals sign", Path::new(".")).is_err());
    }

    #[test]
    fn paths_must_exist() {
        let e = Config::parse("face_cascade = /definitely/not/here.xml", Path::new("/")).unwrap_err();
        assert_eq!(e.code, crate::error::EXIT_INPUT);
    }

    #[test]
    fn flags_override_file() {
        let file = Config { iterations: Some(5), batch: Some(7), ..Config::default() };
        let flags = Config { iterations: Some(9), ..Config::default() };
        let merged = file.overlay(flags);
        assert_eq!((merged.iterations, merged.batch), (Some(9), Some(7)));
        let t = merged.train_config().unwrap();
        assert_eq!((t.iterations, t.batch, t.momentum), (9, 7, 0.9));
    }
}
