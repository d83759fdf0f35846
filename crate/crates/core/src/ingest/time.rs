//! ISO-8601 helpers. Timestamps are UTC seconds since the Unix epoch.

use chrono::{DateTime, NaiveDate, NaiveDateTime, SecondsFormat, Utc};

/// Parses RFC 3339 timestamps, naive `YYYY-MM-DDTHH:MM:SS` (taken as UTC) and
/// bare dates (midnight UTC).
pub fn parse_iso8601(text: &str) -> Option<i64> {
    let text = text.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(text) {
        return Some(t.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(text, fmt) {
            return Some(t.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(text, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|t| t.and_utc().timestamp())
}

pub fn format_iso8601(timestamp: i64) -> String {
    DateTime::<Utc>::from_timestamp(timestamp, 0)
        .map(|t| t.to_rfc3339_opts(SecondsFormat::Secs, true))
        .unwrap_or_else(|| timestamp.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepted_forms() {
        let t = parse_iso8601("2010-04-24T00:00:00Z").unwrap();
        assert_eq!(parse_iso8601("2010-04-24"), Some(t));
        assert_eq!(parse_iso8601("2010-04-24T00:00:00"), Some(t));
        assert_eq!(parse_iso8601("2010-04-24T02:00:00+02:00"), Some(t));
        assert_eq!(format_iso8601(t), "2010-04-24T00:00:00Z");
        assert_eq!(parse_iso8601("not a date"), None);
    }
}
