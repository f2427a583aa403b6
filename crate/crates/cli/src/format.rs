//! Artifact formatting: CSV numbers, point encodings and output paths.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use kfree_core::LatticePoint;

/// Environment variable that relocates relative `--out` paths.
pub const OUT_DIR_ENV: &str = "KFREE_OUT_DIR";

/// Decimal with 12 significant digits, trailing zeros dropped. Very large
/// or very small magnitudes fall back to scientific notation.
pub fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..]
        .parse()
        .expect("integer exponent");
    if !(-5..12).contains(&exp) {
        let (mantissa, _) = sci.split_at(sci.find('e').expect("exponent"));
        return format!("{}e{exp}", trim_zeros(mantissa));
    }
    let decimals = (11 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `x y;x y;...`, safe inside a CSV field.
pub fn encode_points(points: &[LatticePoint]) -> String {
    let mut out = String::new();
    for (i, p) in points.iter().enumerate() {
        if i > 0 {
            out.push(';');
        }
        for (j, c) in p.coords().iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            write!(out, "{c}").expect("write to string");
        }
    }
    out
}

/// Parses `a,b,...`.
pub fn parse_point(s: &str) -> Result<LatticePoint> {
    let coords = s
        .split(',')
        .map(|c| c.trim().parse::<i128>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .with_context(|| format!("malformed lattice point {s:?}; expected integers like 1,0"))?;
    Ok(LatticePoint::new(coords))
}

/// Parses `a,b;c,d;...`; an empty string is the empty configuration.
pub fn parse_points(s: &str) -> Result<Vec<LatticePoint>> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(parse_point)
        .collect()
}

/// Where an artifact goes: relative paths move under `KFREE_OUT_DIR` when set.
pub fn resolve_out(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

/// Writes the artifact to `out`, or to standard output when absent.
pub fn emit(out: Option<&Path>, body: &str) -> Result<Option<PathBuf>> {
    match out {
        Some(path) => {
            let path = resolve_out(path);
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)
                    .with_context(|| format!("cannot create {}", parent.display()))?;
            }
            fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))?;
            Ok(Some(path))
        }
        None => {
            print!("{body}");
            Ok(None)
        }
    }
}
