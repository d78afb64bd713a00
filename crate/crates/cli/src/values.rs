//! Parsing of scalar, list and range arguments.
//!
//! Accepted forms: `0.5`, `pi/2`, `7pi/10`, `-pi`, comma lists of those, and
//! inclusive ranges `start:stop:step` (each part may use `pi`).

use std::f64::consts::PI;

pub fn parse_scalar(text: &str) -> Result<f64, String> {
    let s = text.trim();
    if s.is_empty() {
        return Err("empty value".into());
    }
    if let Some(idx) = s.find("pi") {
        let (coef, rest) = s.split_at(idx);
        let rest = &rest[2..];
        let coef = match coef.trim_end_matches('*') {
            "" | "+" => 1.0,
            "-" => -1.0,
            c => c.parse::<f64>().map_err(|_| format!("bad coefficient in `{text}`"))?,
        };
        let den = match rest {
            "" => 1.0,
            r => r
                .strip_prefix('/')
                .and_then(|d| d.parse::<f64>().ok())
                .ok_or_else(|| format!("bad denominator in `{text}`"))?,
        };
        if den == 0.0 {
            return Err(format!("zero denominator in `{text}`"));
        }
        return Ok(coef * PI / den);
    }
    s.parse::<f64>().map_err(|_| format!("cannot parse `{text}` as a number"))
}

/// Expands a list/range specification into values, in order.
pub fn parse_values(text: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for item in text.split(',') {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [v] => out.push(parse_scalar(v)?),
            [start, stop, step] => {
                let (start, stop, step) = (parse_scalar(start)?, parse_scalar(stop)?, parse_scalar(step)?);
                if step.is_nan() || step <= 0.0 {
                    return Err(format!("range step must be positive in `{item}`"));
                }
                if stop < start {
                    return Err(format!("range stop below start in `{item}`"));
                }
                // tolerate accumulated rounding so the stop value itself is included
                let count = ((stop - start) / step + 1e-9).floor() as usize;
                if count > 10_000_000 {
                    return Err(format!("range `{item}` has too many points"));
                }
                out.extend((0..=count).map(|k| {
                    let v = start + k as f64 * step;
                    // snap values that round just past the stop onto it
                    if (v - stop).abs() <= 1e-9 * step { stop } else { v }
                }));
            }
            _ => return Err(format!("expected a value or start:stop:step, got `{item}`")),
        }
    }
    Ok(out)
}

pub fn parse_vec3(text: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = text.split(',').map(parse_scalar).collect::<Result<_, _>>()?;
    match parts.as_slice() {
        &[x, y, z] => Ok([x, y, z]),
        _ => Err(format!("expected three comma-separated components, got `{text}`")),
    }
}

/// `lo:hi` interval.
pub fn parse_interval(text: &str) -> Result<(f64, f64), String> {
    match text.split(':').collect::<Vec<_>>().as_slice() {
        [lo, hi] => Ok((parse_scalar(lo)?, parse_scalar(hi)?)),
        _ => Err(format!("expected lo:hi, got `{text}`")),
    }
}
