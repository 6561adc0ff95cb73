/// 64-bit FNV-1a, used for content keys that must be stable across runs.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Fnv(u64);

impl Fnv {
    pub(crate) fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    pub(crate) fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }

    pub(crate) fn write_u64(&mut self, v: u64) {
        self.write(&v.to_le_bytes());
    }

    /// Hashes the bit pattern; `-0.0` is folded onto `0.0`.
    pub(crate) fn write_f64(&mut self, v: f64) {
        let v = if v == 0.0 { 0.0 } else { v };
        self.write_u64(v.to_bits());
    }

    pub(crate) fn hex(&self) -> String {
        format!("{:016x}", self.0)
    }
}

/// Index of `t` in the uniform grid `{horizon * i / intervals}`, if it lies on it.
pub(crate) fn grid_index(t: f64, horizon: f64, intervals: usize) -> Option<usize> {
    if !t.is_finite() || t < -1e-12 || t > horizon + 1e-12 {
        return None;
    }
    let r = (t / horizon * intervals as f64).round();
    let i = r as usize;
    let ti = horizon * i as f64 / intervals as f64;
    ((ti - t).abs() <= 1e-9 * horizon.max(1.0)).then_some(i)
}
