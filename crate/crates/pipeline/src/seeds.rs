//! Stage seeds as a keyed hash of the master seed and a role string.

use sha2::{Digest, Sha256};

const KEY: &[u8] = b"qgdebias/seed/v1";

/// First eight bytes (little endian) of `sha256(KEY || master || role)`.
pub fn derive_seed(master: u64, role: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(KEY);
    h.update(master.to_le_bytes());
    h.update(role.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

pub fn member_role(stage: &str, arch: &str, member: usize) -> String {
    format!("{stage}/{arch}/member-{member}")
}
