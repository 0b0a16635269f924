use std::collections::BTreeMap;
use std::path::Path;

use gatebench::channels::{builtin_channel, builtin_names, QuantumChannel};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::output::read_text;

/// How the channel under test was specified.
#[derive(Debug, Clone, Serialize)]
pub struct ChannelInfo {
    pub spec: String,
    pub source: &'static str,
    pub params: BTreeMap<String, f64>,
    pub label: String,
    pub kraus_rank: usize,
}

pub fn parse_params(raw: &[String]) -> CliResult<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for item in raw.iter().flat_map(|r| r.split(',')).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::schema(format!("parameter `{item}` is not of the form k=v")))?;
        let value: f64 = v
            .trim()
            .parse()
            .map_err(|_| CliError::schema(format!("parameter `{k}` has non-numeric value `{v}`")))?;
        if out.insert(k.trim().to_string(), value).is_some() {
            return Err(CliError::schema(format!("parameter `{k}` given twice")));
        }
    }
    Ok(out)
}

/// A built-in name, or a path to a `{label, kraus}` JSON file.
pub fn resolve_channel(
    spec: &str,
    params: &BTreeMap<String, f64>,
) -> CliResult<(QuantumChannel, ChannelInfo)> {
    let path = Path::new(spec);
    let is_file = spec.ends_with(".json") || path.is_file();
    let (channel, source) = if is_file {
        if !params.is_empty() {
            return Err(CliError::schema("--param applies only to built-in channels"));
        }
        let text = read_text(path)?;
        let ch = gatebench::io::channel_from_json(&text)
            .map_err(|e| CliError::schema(format!("{}: {e}", path.display())))?;
        (ch, "file")
    } else {
        let ch = builtin_channel(spec, params).map_err(|e| match e {
            gatebench::Error::UnknownName(n) => CliError::schema(format!(
                "unknown channel `{n}`; built-in channels: {}",
                builtin_names().join(", ")
            )),
            other => other.into(),
        })?;
        (ch, "builtin")
    };
    if channel.dim() != 4 {
        return Err(CliError::schema(format!(
            "channel acts on dimension {}, expected a two-qubit channel (4)",
            channel.dim()
        )));
    }
    let info = ChannelInfo {
        spec: spec.to_string(),
        source,
        params: params.clone(),
        label: channel.label().to_string(),
        kraus_rank: channel.kraus().len(),
    };
    Ok((channel, info))
}
