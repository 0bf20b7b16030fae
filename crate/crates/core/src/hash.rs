//! 64-bit FNV-1a, used as the content hash of module and index files.

pub const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
pub const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Clone, Copy)]
pub struct Fnv1a(u64);

impl Default for Fnv1a {
    fn default() -> Self {
        Fnv1a(FNV_OFFSET)
    }
}

impl Fnv1a {
    pub fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }

    pub fn finish(self) -> u64 {
        self.0
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = Fnv1a::default();
    h.update(bytes);
    h.finish()
}

/// Hash of `bytes` with the eight bytes at `field..field + 8` treated as zero.
pub fn fnv1a64_zeroed(bytes: &[u8], field: usize) -> u64 {
    let mut h = Fnv1a::default();
    h.update(&bytes[..field]);
    h.update(&[0; 8]);
    h.update(&bytes[field + 8..]);
    h.finish()
}
