//! Canonical decimal rendering for stored numbers.
//!
//! The rendering is the shortest digit string that parses back to the same
//! bits. Integral values drop the `.0` suffix, very large and very small
//! magnitudes use an exponent, and negative zero keeps its sign (`-0`).

/// Renders a finite float canonically. Panics on NaN or infinity.
pub fn render(x: f64) -> String {
    assert!(x.is_finite(), "only finite numbers have a canonical rendering");
    let s = format!("{x:?}");
    match s.strip_suffix(".0") {
        Some(stripped) => stripped.to_string(),
        None => s,
    }
}

/// Parses a decimal number, rejecting non-finite results and the textual
/// spellings `inf`/`nan` that `str::parse` would accept.
pub fn parse(text: &str) -> Option<f64> {
    let t = text.trim_start_matches(['-', '+']);
    if !t.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        return None;
    }
    text.parse::<f64>().ok().filter(|x| x.is_finite())
}
