use std::fs;
use std::path::Path;

use aifn_core::model::{ModelConfig, Preset};
use aifn_core::trainer::TrainConfig;
use aifn_core::{Error, Result};
use serde_json::Value;

pub const SEED_ENV: &str = "AIFN_SEED";

#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

/// Resolves the run seed: `AIFN_SEED` beats `--seed`, which beats the preset.
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>) -> Result<Option<u64>> {
    match env {
        Some(raw) => raw
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{SEED_ENV}=`{raw}` is not an unsigned integer"))),
        None => Ok(flag),
    }
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

fn overlay<T>(base: &T, patch: Option<Value>, section: &str) -> Result<T>
where
    T: serde::Serialize + serde::de::DeserializeOwned,
{
    let mut value = serde_json::to_value(base).map_err(|e| Error::Config(e.to_string()))?;
    if let Some(p) = patch {
        if !p.is_object() {
            return Err(Error::Config(format!("config section `{section}` must be an object")));
        }
        merge(&mut value, p);
    }
    serde_json::from_value(value).map_err(|e| Error::Config(format!("config section `{section}`: {e}")))
}

/// Preset values, overlaid by the `model` and `train` sections of a JSON
/// config document, then by the seed.
pub fn resolve(preset: Preset, config: Option<&str>, seed: Option<u64>) -> Result<Settings> {
    let (mut model_patch, mut train_patch) = (None, None);
    if let Some(text) = config {
        let doc: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))?;
        let Value::Object(mut map) = doc else {
            return Err(Error::Config("config file must hold a JSON object".into()));
        };
        model_patch = map.remove("model");
        train_patch = map.remove("train");
        if let Some(extra) = map.keys().next() {
            return Err(Error::Config(format!("unknown config section `{extra}`")));
        }
    }
    let mut model: ModelConfig = overlay(&preset.model_config(), model_patch, "model")?;
    let mut train: TrainConfig = overlay(&TrainConfig::for_preset(preset), train_patch, "train")?;
    if let Some(s) = seed {
        model.seed = s;
        train.seed = s;
    }
    model.validate()?;
    train.validate()?;
    Ok(Settings { model, train })
}

pub fn read_config(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_seed_wins() {
        assert_eq!(resolve_seed(Some(3), Some("11")).unwrap(), Some(11));
        assert_eq!(resolve_seed(Some(3), None).unwrap(), Some(3));
        assert_eq!(resolve_seed(None, None).unwrap(), None);
        assert!(resolve_seed(Some(3), Some("x")).is_err());
    }

    #[test]
    fn config_overlays_preset() {
        let s = resolve(
            Preset::Desk,
            Some(r#"{"model": {"hidden": 6, "head_count": 3}, "train": {"max_epochs": 2}}"#),
            Some(9),
        )
        .unwrap();
        assert_eq!(s.model.hidden, 6);
        assert_eq!(s.model.word_dim, ModelConfig::desk().word_dim);
        assert_eq!(s.train.max_epochs, 2);
        assert_eq!((s.model.seed, s.train.seed), (9, 9));
    }

    #[test]
    fn typos_are_rejected() {
        assert!(resolve(Preset::Desk, Some(r#"{"model": {"hiden": 6}}"#), None).is_err());
        assert!(resolve(Preset::Desk, Some(r#"{"optim": {}}"#), None).is_err());
        assert!(resolve(Preset::Desk, Some("[1]"), None).is_err());
        assert!(resolve(Preset::Desk, Some(r#"{"train": {"batch_size": 0}}"#), None).is_err());
    }
}
