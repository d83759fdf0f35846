use super::{IngestError, Result};
use regex::Regex;
use std::sync::OnceLock;

fn dms_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| {
        Regex::new(
            r#"^\s*(\d+(?:\.\d+)?)\s*[°º]\s*(\d+(?:\.\d+)?)\s*['′]\s*(\d+(?:\.\d+)?)\s*(?:"|″|'')\s*([NSEWnsew])\s*$"#,
        )
        .expect("valid DMS regex")
    })
}

/// Converts `D°M'S"H` (hemisphere N/S/E/W) to signed decimal degrees.
pub fn dms_to_decimal(text: &str) -> Result<f64> {
    let caps = dms_pattern()
        .captures(text)
        .ok_or_else(|| IngestError::Parse(format!("not a D°M'S\"H coordinate: {text:?}")))?;
    let num = |i: usize| -> f64 { caps[i].parse().expect("regex admits only numbers") };
    let (deg, min, sec) = (num(1), num(2), num(3));
    if min >= 60.0 || sec >= 60.0 {
        return Err(IngestError::Parse(format!(
            "minutes and seconds must be below 60: {text:?}"
        )));
    }
    let hemi = caps[4].to_ascii_uppercase();
    let limit = if hemi == "N" || hemi == "S" { 90.0 } else { 180.0 };
    let value = deg + min / 60.0 + sec / 3600.0;
    if value > limit {
        return Err(IngestError::Parse(format!("{text:?} exceeds {limit} degrees")));
    }
    Ok(if hemi == "S" || hemi == "W" { -value } else { value })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wellhead_coordinates() {
        assert!((dms_to_decimal("29°01'35\"N").unwrap() - 29.026389).abs() < 1e-6);
        assert!((dms_to_decimal("88°23'14\"W").unwrap() + 88.387222).abs() < 1e-6);
        assert!((dms_to_decimal("28°44'12\" N").unwrap() - 28.736667).abs() < 1e-6);
    }

    #[test]
    fn malformed() {
        assert!(matches!(dms_to_decimal("12°61'00\"N"), Err(IngestError::Parse(_))));
        assert!(matches!(dms_to_decimal("12°10'60\"N"), Err(IngestError::Parse(_))));
        assert!(dms_to_decimal("12°10'00\"Q").is_err());
        assert!(dms_to_decimal("95°00'00\"N").is_err());
        assert!(dms_to_decimal("").is_err());
    }
}
