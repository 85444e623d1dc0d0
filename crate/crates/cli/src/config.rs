//! Flat `key = value` config files and `--set` overrides.
//!
//! Keys are the protocol parameter names (`mean_photon_number`,
//! `reflectivity`, `channel_transmission`, `eve_channel_transmission`,
//! `eta_d0`, `eta_d1`, `eta_d2`, `eta_eve`) plus
//! `discrimination = none|all|d1d2|d0d2`. Lines starting with `#` and blank
//! lines are ignored; `#` also starts a trailing comment. Keys omitted from
//! the file keep the typical-scenario defaults.

use cfqkd::{ConfigInput, Discrimination, ProtocolConfig};
use std::fs;
use std::path::Path;

/// Applies one `key = value` pair. Unknown keys and unparseable values are
/// rejected before anything runs.
fn apply(input: &mut ConfigInput, key: &str, value: &str) -> Result<(), String> {
    if key == "discrimination" {
        input.discrimination = match value {
            "none" => Discrimination::None,
            "all" => Discrimination::All,
            "d1d2" => Discrimination::D1D2,
            "d0d2" => Discrimination::D0D2,
            other => {
                return Err(format!(
                    "discrimination must be one of none|all|d1d2|d0d2, got '{other}'"
                ))
            }
        };
        return Ok(());
    }
    let slot = match key {
        "mean_photon_number" => &mut input.mean_photon_number,
        "reflectivity" => &mut input.reflectivity,
        "channel_transmission" => &mut input.channel_transmission,
        "eve_channel_transmission" => &mut input.eve_channel_transmission,
        "eta_d0" => &mut input.eta_d0,
        "eta_d1" => &mut input.eta_d1,
        "eta_d2" => &mut input.eta_d2,
        "eta_eve" => &mut input.eta_eve,
        other => return Err(format!("unknown config key '{other}'")),
    };
    *slot = value
        .parse::<f64>()
        .map_err(|_| format!("value for '{key}' is not a number: '{value}'"))?;
    Ok(())
}

fn parse_text(text: &str) -> Result<ConfigInput, String> {
    let mut input = ConfigInput::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected 'key = value', got '{line}'", lineno + 1))?;
        apply(&mut input, key.trim(), value.trim())
            .map_err(|e| format!("line {}: {e}", lineno + 1))?;
    }
    Ok(input)
}

/// Reads `path`, applies `--set key=value` overrides on top, validates.
pub fn load(path: &Path, overrides: &[String]) -> Result<ProtocolConfig, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read config file '{}': {e}", path.display()))?;
    let mut input = parse_text(&text)?;
    for entry in overrides {
        let (key, value) = entry
            .split_once('=')
            .ok_or_else(|| format!("--set expects KEY=VALUE, got '{entry}'"))?;
        apply(&mut input, key.trim(), value.trim())?;
    }
    input.validate().map_err(|e| e.to_string())
}
