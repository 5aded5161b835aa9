//! Byte-level feature groups: raw histogram, windowed entropy histogram and
//! printable-string statistics. These need no successful PE parse, so they
//! are computed even for degraded files.

use crate::pe::RawBinary;

pub const BYTE_HISTOGRAM_WIDTH: usize = 256;
pub const BYTE_ENTROPY_WIDTH: usize = 256;
pub const STRING_WIDTH: usize = 104;

const ENTROPY_WINDOW: usize = 2048;
const ENTROPY_STRIDE: usize = 1024;
const ENTROPY_MIN_WINDOW: usize = 256;
const MIN_STRING_LEN: usize = 5;

/// Normalized frequency of each byte value; all-zero for an empty file.
pub fn extract_byte_histogram(raw: &RawBinary) -> Vec<f64> {
    let mut hist = vec![0.0; BYTE_HISTOGRAM_WIDTH];
    if raw.bytes.is_empty() {
        return hist;
    }
    for &b in &raw.bytes {
        hist[b as usize] += 1.0;
    }
    let total = raw.bytes.len() as f64;
    for v in &mut hist {
        *v /= total;
    }
    hist
}

/// Joint (window entropy, byte high-nibble) histogram over 2,048-byte
/// windows at stride 1,024, flattened 16x16 row-major and normalized.
///
/// The trailing partial window is kept when it still holds at least 256
/// bytes; files shorter than that get a single whole-file window.
pub fn extract_byte_entropy_histogram(raw: &RawBinary) -> Vec<f64> {
    let mut hist = vec![0.0; BYTE_ENTROPY_WIDTH];
    let bytes = &raw.bytes;
    if bytes.is_empty() {
        return hist;
    }
    let mut accumulate_window = |window: &[u8]| {
        let h = crate::pe::section_entropy(window);
        // 16 equal bins over [0, 8]; H = 8 lands in the top bin.
        let h_bin = ((h / 0.5) as usize).min(15);
        for &b in window {
            hist[h_bin * 16 + (b >> 4) as usize] += 1.0;
        }
    };
    if bytes.len() < ENTROPY_MIN_WINDOW {
        accumulate_window(bytes);
    } else {
        let mut offset = 0;
        while offset < bytes.len() {
            let end = (offset + ENTROPY_WINDOW).min(bytes.len());
            let window = &bytes[offset..end];
            if window.len() < ENTROPY_WINDOW {
                if window.len() >= ENTROPY_MIN_WINDOW {
                    accumulate_window(window);
                }
                break;
            }
            accumulate_window(window);
            offset += ENTROPY_STRIDE;
        }
    }
    let total: f64 = hist.iter().sum();
    if total > 0.0 {
        for v in &mut hist {
            *v /= total;
        }
    }
    hist
}

fn printable_runs(bytes: &[u8]) -> Vec<&[u8]> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &b) in bytes.iter().enumerate() {
        let printable = (0x20..=0x7E).contains(&b);
        match (printable, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if i - s >= MIN_STRING_LEN {
                    runs.push(&bytes[s..i]);
                }
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        if bytes.len() - s >= MIN_STRING_LEN {
            runs.push(&bytes[s..]);
        }
    }
    runs
}

fn contains_ignore_case(haystack: &[u8], needle: &[u8]) -> bool {
    haystack
        .windows(needle.len())
        .any(|w| w.eq_ignore_ascii_case(needle))
}

/// Statistics over printable-ASCII runs of length >= 5.
///
/// Layout (104): count, average length, 96-bin character histogram
/// (normalized), character entropy, `C:\` path count, URL count, `HKEY_`
/// count, `MZ`-prefix count, total printable characters.
pub fn extract_string_features(raw: &RawBinary) -> Vec<f64> {
    let mut out = vec![0.0; STRING_WIDTH];
    let runs = printable_runs(&raw.bytes);
    if runs.is_empty() {
        return out;
    }
    let mut char_counts = [0u64; 96];
    let mut total_chars = 0u64;
    let mut paths = 0u64;
    let mut urls = 0u64;
    let mut registry = 0u64;
    let mut mz = 0u64;
    for run in &runs {
        total_chars += run.len() as u64;
        for &c in *run {
            char_counts[(c - 0x20) as usize] += 1;
        }
        if run.len() >= 3 && run[..3].eq_ignore_ascii_case(b"c:\\") {
            paths += 1;
        }
        if contains_ignore_case(run, b"http://") || contains_ignore_case(run, b"https://") {
            urls += 1;
        }
        if run.windows(5).any(|w| w == b"HKEY_") {
            registry += 1;
        }
        if run.starts_with(b"MZ") {
            mz += 1;
        }
    }
    let mut char_entropy = 0.0;
    for &c in &char_counts {
        if c > 0 {
            let p = c as f64 / total_chars as f64;
            char_entropy -= p * p.log2();
        }
    }
    out[0] = runs.len() as f64;
    out[1] = total_chars as f64 / runs.len() as f64;
    for (i, &c) in char_counts.iter().enumerate() {
        out[2 + i] = c as f64 / total_chars as f64;
    }
    out[98] = char_entropy;
    out[99] = paths as f64;
    out[100] = urls as f64;
    out[101] = registry as f64;
    out[102] = mz as f64;
    out[103] = total_chars as f64;
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(bytes: &[u8]) -> RawBinary {
        RawBinary::new(bytes.to_vec(), "test")
    }

    #[test]
    fn histogram_uniform() {
        let bytes: Vec<u8> = (0..=255).collect();
        let hist = extract_byte_histogram(&raw(&bytes));
        for v in hist {
            assert!((v - 1.0 / 256.0).abs() < 1e-12);
        }
    }

    #[test]
    fn histogram_single_value() {
        let hist = extract_byte_histogram(&raw(&[0xFF; 10]));
        assert_eq!(hist[255], 1.0);
        assert_eq!(hist.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn histogram_hand_counted() {
        let hist = extract_byte_histogram(&raw(&[0, 0, 1]));
        assert!((hist[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((hist[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_histogram_all_zero_bytes() {
        let hist = extract_byte_entropy_histogram(&raw(&[0u8; 2048]));
        assert!((hist[0] - 1.0).abs() < 1e-12);
        assert!(hist[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn entropy_histogram_cycling_bytes_top_bin() {
        let bytes: Vec<u8> = (0..2048).map(|i| (i % 256) as u8).collect();
        let hist = extract_byte_entropy_histogram(&raw(&bytes));
        // Every window is uniform over 256 symbols: H = 8, top entropy bin,
        // mass spread evenly over the 16 nibble columns.
        let top = &hist[15 * 16..];
        for &v in top {
            assert!((v - 1.0 / 16.0).abs() < 1e-9);
        }
        assert!(hist[..15 * 16].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn entropy_histogram_empty() {
        let hist = extract_byte_entropy_histogram(&raw(&[]));
        assert!(hist.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn strings_none() {
        let out = extract_string_features(&raw(&[0u8, 1, 2, 3, 0x41, 0x42, 0]));
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn strings_markers_counted() {
        // Oracle: three separate runs each carrying one marker.
        let body = b"C:\\windows hello\0http://x.test\0HKEY_LOCAL_MACHINE";
        let out = extract_string_features(&raw(body));
        assert_eq!(out[99], 1.0, "C:\\ count");
        assert_eq!(out[100], 1.0, "url count");
        assert_eq!(out[101], 1.0, "HKEY_ count");
    }

    #[test]
    fn strings_single_run() {
        let out = extract_string_features(&raw(b"AAAAA"));
        assert_eq!(out[0], 1.0);
        assert_eq!(out[1], 5.0);
        assert_eq!(out[98], 0.0, "one symbol has zero entropy");
        assert_eq!(out[103], 5.0);
    }
}
