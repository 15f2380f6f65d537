//! Text format for a single pseudotrajectory instance.
//!
//! ```text
//! skewshadow-instance v1 lambda0=<f64> lambda1=<f64> d=<f64>
//! <bit> <r>
//! ...
//! ```
//!
//! Line `k` (1-based after the header) holds the symbol of step `k-1` and
//! the noise value `r_k`. Reals are written with 17 significant digits so a
//! write/parse cycle is bit-exact.

use std::fmt::Write as _;

use thiserror::Error;

use super::{PseudoOrbit, WalkError, WalkPath};
use crate::model::{ModelError, ModelParams};

pub const HEADER_TAG: &str = "skewshadow-instance";
pub const FORMAT_VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstanceError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line 1: invalid parameters: {0}")]
    Params(#[from] ModelError),
    #[error("line {line}: {source}")]
    Orbit { line: usize, source: WalkError },
}

/// A parsed instance: parameters, noise amplitude, symbols and noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub params: ModelParams,
    pub scale: f64,
    pub symbols: Vec<bool>,
    pub noise: Vec<f64>,
}

impl Instance {
    pub fn from_parts(walk: &WalkPath, orbit: &PseudoOrbit) -> Self {
        Self {
            params: *walk.params(),
            scale: orbit.scale(),
            symbols: walk.symbols().to_vec(),
            noise: orbit.noise().to_vec(),
        }
    }

    pub fn build(&self) -> Result<(WalkPath, PseudoOrbit), WalkError> {
        let walk = WalkPath::from_symbols(self.params, self.symbols.clone());
        let orbit = PseudoOrbit::new(&walk, self.noise.clone(), self.scale)?;
        Ok((walk, orbit))
    }
}

/// 17 significant digits, scientific notation.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_instance(instance: &Instance) -> String {
    let mut out = String::with_capacity(32 * (instance.symbols.len() + 2));
    let _ = writeln!(
        out,
        "{HEADER_TAG} {FORMAT_VERSION} lambda0={} lambda1={} d={}",
        format_real(instance.params.lambda0()),
        format_real(instance.params.lambda1()),
        format_real(instance.scale)
    );
    for (&bit, &r) in instance.symbols.iter().zip(&instance.noise) {
        let _ = writeln!(out, "{} {}", u8::from(bit), format_real(r));
    }
    out
}

fn syntax(line: usize, message: impl Into<String>) -> InstanceError {
    InstanceError::Syntax {
        line,
        message: message.into(),
    }
}

fn parse_real(line: usize, what: &str, text: &str) -> Result<f64, InstanceError> {
    let x: f64 = text
        .parse()
        .map_err(|_| syntax(line, format!("cannot parse {what} from '{text}'")))?;
    if !x.is_finite() {
        return Err(syntax(line, format!("{what} must be finite")));
    }
    Ok(x)
}

pub fn parse_instance(text: &str) -> Result<Instance, InstanceError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| syntax(1, "empty file"))?;
    let mut fields = header.split_whitespace();
    if fields.next() != Some(HEADER_TAG) {
        return Err(syntax(1, format!("expected header starting with '{HEADER_TAG}'")));
    }
    match fields.next() {
        Some(FORMAT_VERSION) => {}
        Some(other) => return Err(syntax(1, format!("unsupported version '{other}'"))),
        None => return Err(syntax(1, "missing format version")),
    }
    let (mut lambda0, mut lambda1, mut scale) = (None, None, None);
    for field in fields {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| syntax(1, format!("expected key=value, got '{field}'")))?;
        let slot = match key {
            "lambda0" => &mut lambda0,
            "lambda1" => &mut lambda1,
            "d" => &mut scale,
            _ => return Err(syntax(1, format!("unknown header key '{key}'"))),
        };
        if slot.is_some() {
            return Err(syntax(1, format!("duplicate header key '{key}'")));
        }
        *slot = Some(parse_real(1, key, value)?);
    }
    let lambda0 = lambda0.ok_or_else(|| syntax(1, "missing lambda0"))?;
    let lambda1 = lambda1.ok_or_else(|| syntax(1, "missing lambda1"))?;
    let scale = scale.ok_or_else(|| syntax(1, "missing d"))?;
    let params = ModelParams::validate(lambda0, lambda1)?;
    if scale < 0.0 {
        return Err(syntax(1, "d must be >= 0"));
    }

    let mut symbols = Vec::new();
    let mut noise = Vec::new();
    for (line, content) in lines {
        if content.trim().is_empty() {
            continue;
        }
        let mut parts = content.split_whitespace();
        let bit = match parts.next() {
            Some("0") => false,
            Some("1") => true,
            Some(other) => return Err(syntax(line, format!("symbol must be 0 or 1, got '{other}'"))),
            None => unreachable!("blank lines are skipped"),
        };
        let r = parse_real(
            line,
            "r",
            parts.next().ok_or_else(|| syntax(line, "missing r value"))?,
        )?;
        if parts.next().is_some() {
            return Err(syntax(line, "trailing fields"));
        }
        if r.abs() > 1.0 {
            return Err(InstanceError::Orbit {
                line,
                source: WalkError::NoiseOutOfRange {
                    index: noise.len() + 1,
                    value: r,
                },
            });
        }
        symbols.push(bit);
        noise.push(r);
    }
    Ok(Instance {
        params,
        scale,
        symbols,
        noise,
    })
}
