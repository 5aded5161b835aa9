//! FNV-1a feature hashing. The hash is normative for this artifact so
//! cached feature files interoperate across implementations.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a 64-bit over the UTF-8 bytes of a token.
pub fn fnv1a64(token: &str) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in token.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Bucket index for a token in a fixed-width hashed block.
pub fn bucket(token: &str, width: usize) -> usize {
    (fnv1a64(token) % width as u64) as usize
}

/// Add `value` into the hashed bucket for `token`.
pub fn accumulate(block: &mut [f64], token: &str, value: f64) {
    let idx = bucket(token, block.len());
    block[idx] += value;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv1a64_reference_vectors() {
        // Published FNV-1a test vectors.
        assert_eq!(fnv1a64(""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64("a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64("foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn accumulate_sums_collisions() {
        let mut block = vec![0.0; 1];
        accumulate(&mut block, "x", 2.0);
        accumulate(&mut block, "y", 3.0);
        assert_eq!(block[0], 5.0);
    }
}
