//! Simulation config files (TOML) and dotted-path overrides.
//!
//! Every field is optional; omitted values take their defaults. Unknown keys
//! are rejected with the line they appear on.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::plant::SimConfig;

/// Parse, override, resolve and validate a config file.
pub fn load_config(path: &Path, overrides: &[String], seed: Option<u64>) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path.parent(), overrides, seed)
}

/// As [`load_config`] for config text; relative schedule files are looked up
/// under `base_dir`.
pub fn parse_config(text: &str, base_dir: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<SimConfig> {
    // Deserialize the untouched text first so errors point at a line.
    toml::from_str::<SimConfig>(text).map_err(|e| located(text, &e))?;
    let mut table: toml::Table = toml::from_str(text).map_err(|e| located(text, &e))?;
    for kv in overrides {
        apply_override(&mut table, kv)?;
    }
    let mut config: SimConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config {
            line: None,
            message: format!("after overrides: {}", e.message()),
        })?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let schedule = config.schedule.resolve(base_dir)?;
    config.schedule.file = None;
    config.schedule.blocks = schedule.blocks;
    config.validate()?;
    Ok(config)
}

fn located(text: &str, e: &toml::de::Error) -> Error {
    let line = e
        .span()
        .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
    Error::Config {
        line,
        message: e.message().to_string(),
    }
}

/// Set `a.b.c = value` in `table`. The value is read as a TOML literal when
/// it parses as one and as a bare string otherwise.
pub fn apply_override(table: &mut toml::Table, kv: &str) -> Result<()> {
    let bad = |message: String| Error::Config { line: None, message };
    let (key, raw) = kv
        .split_once('=')
        .ok_or_else(|| bad(format!("override `{kv}` is not of the form key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(bad(format!("override `{kv}` has an empty key segment")));
    }
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key just parsed"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("non-empty key");
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| bad(format!("override `{kv}`: `{p}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Canonical TOML text of a fully resolved config. Loading it back yields
/// the same config.
pub fn to_toml(config: &SimConfig) -> Result<String> {
    toml::to_string(config).map_err(|e| Error::Config {
        line: None,
        message: format!("cannot serialise config: {e}"),
    })
}

/// Hex SHA-256 of `text`.
pub fn sha256_hex(text: &[u8]) -> String {
    hex::encode(Sha256::digest(text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        let c = parse_config("", None, &[], None).unwrap();
        assert_eq!(c, SimConfig::default());
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = "duration = 5.0\n\n[coupling]\nK_p = 49\nstiffnes = 3\n";
        match parse_config(text, None, &[], None) {
            Err(Error::Config { line: Some(5), .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn type_error_reports_line() {
        let text = "seed = 3\ndt = \"fast\"\n";
        assert!(matches!(
            parse_config(text, None, &[], None),
            Err(Error::Config { line: Some(2), .. })
        ));
    }

    #[test]
    fn overrides_and_seed() {
        let c = parse_config(
            "[coupling]\nK_p = 49.0\n",
            None,
            &[
                "coupling.K_p=0".into(),
                "coupling.K_t=0".into(),
                "patient.weakness=1".into(),
            ],
            Some(9),
        )
        .unwrap();
        assert_eq!(c.coupling.k_patient, 0.0);
        assert_eq!(c.coupling.k_therapist, 0.0);
        assert_eq!(c.patient.weakness, 1.0);
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn string_override() {
        let c = parse_config("", None, &["schedule.patient_id=U6".into()], None).unwrap();
        assert_eq!(c.schedule.blocks.len(), 3);
        assert_eq!(c.schedule.blocks[1].k_therapist, 25.0);
    }

    #[test]
    fn malformed_override() {
        assert!(matches!(
            parse_config("", None, &["coupling".into()], None),
            Err(Error::Config { line: None, .. })
        ));
    }

    #[test]
    fn validation_errors_surface() {
        assert!(matches!(
            parse_config("[patient]\nweakness = 2.0\n", None, &[], None),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn echo_roundtrip() {
        let c = parse_config(
            "",
            None,
            &["schedule.patient_id=U8".into(), "bus.latency=0.006".into()],
            None,
        )
        .unwrap();
        let text = to_toml(&c).unwrap();
        let back = parse_config(&text, None, &[], None).unwrap();
        assert_eq!(back, c);
        assert_eq!(to_toml(&back).unwrap(), text);
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
