//! Loading tensors and parsing list-valued flags.

use std::fmt;
use std::path::Path;

use anyhow::{Context, Result};
use spc_core::datagen::phantom;
use spc_core::io::{png_to_tensor, read_tensor};
use spc_core::{SmoothnessOperator, Tensor};

/// Invalid arguments detected after parsing; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(UsageError(msg.into()).into())
}

pub fn is_png(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

/// Reads an SPCT tensor, or a PNG as an `H x W x 3` tensor.
pub fn load_tensor(path: &Path) -> Result<Tensor> {
    let t = if is_png(path) {
        png_to_tensor(path)
    } else {
        read_tensor(path)
    };
    t.with_context(|| format!("reading {}", path.display()))
}

/// `30,30,30` or `30x30x30`.
pub fn parse_dims(s: &str) -> Result<Vec<usize>> {
    let dims: Vec<usize> = s
        .split([',', 'x'])
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| UsageError(format!("invalid dims '{s}'")))?;
    if dims.is_empty() || dims.contains(&0) {
        return usage(format!("dims must be positive, got '{s}'"));
    }
    Ok(dims)
}

pub fn parse_f64_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| UsageError(format!("invalid {what} value '{p}'")).into())
        })
        .collect()
}

/// Per-mode operators from `chain`, `none` or `grid:HxW` entries.
pub fn parse_operators(spec: Option<&str>, dims: &[usize]) -> Result<Vec<SmoothnessOperator>> {
    let Some(spec) = spec else {
        return Ok(dims.iter().map(|&d| SmoothnessOperator::default_for(d)).collect());
    };
    let items: Vec<&str> = spec.split(',').map(str::trim).collect();
    if items.len() != dims.len() {
        return usage(format!(
            "--smooth lists {} modes but the input has {}",
            items.len(),
            dims.len()
        ));
    }
    items
        .iter()
        .zip(dims)
        .map(|(&item, &d)| {
            let op = match item {
                "chain" => SmoothnessOperator::default_for(d),
                "none" => SmoothnessOperator::disabled(d),
                _ => {
                    let Some(grid) = item.strip_prefix("grid:") else {
                        return usage(format!("unknown smoothness '{item}'"));
                    };
                    let hw = parse_dims(grid)?;
                    let [h, w] = hw[..] else {
                        return usage(format!("grid needs HxW, got '{grid}'"));
                    };
                    if h * w != d {
                        return usage(format!("grid {h}x{w} does not cover a mode of extent {d}"));
                    }
                    SmoothnessOperator::grid(h, w).map_err(|e| UsageError(e.to_string()))?
                }
            };
            Ok(op)
        })
        .collect()
}

/// Experiment input: an image or SPCT path, or `phantom[:DIMS[:SEED]]`.
pub fn load_experiment_input(spec: &str) -> Result<Tensor> {
    if let Some(rest) = spec.strip_prefix("phantom") {
        let mut parts = rest.trim_start_matches(':').split(':').filter(|s| !s.is_empty());
        let dims = parts.next().map(parse_dims).transpose()?.unwrap_or_else(|| vec![30, 30, 30]);
        let seed = parts
            .next()
            .map(|s| s.parse::<u64>().map_err(|_| UsageError(format!("invalid phantom seed '{s}'"))))
            .transpose()?
            .unwrap_or(1);
        return Ok(phantom(&dims, seed)?);
    }
    load_tensor(Path::new(spec))
}
