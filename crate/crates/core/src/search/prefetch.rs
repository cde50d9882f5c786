//! Software prefetch hints.
//!
//! Hints are advisory and asynchronous: they may load data into cache ahead
//! of use but can never change a computed value, so a no-op implementation
//! is equally valid (and is what non-x86 targets get).

/// Cache-line granularity assumed for prefetch depth. Depth is expressed in
/// 64-byte lines; the actual hint granularity is up to the hardware.
pub const CACHE_LINE_BYTES: usize = 64;

/// Issues best-effort prefetch hints for `depth_lines` cache lines starting
/// at the beginning of `span`. Never faults, never errors, never affects
/// results.
#[inline]
pub fn prefetch_hint<T>(span: &[T], depth_lines: usize) {
    let base = span.as_ptr() as usize;
    for line in 0..depth_lines {
        prefetch_addr(base + line * CACHE_LINE_BYTES);
    }
}

#[cfg(target_arch = "x86_64")]
#[inline]
fn prefetch_addr(addr: usize) {
    use std::arch::x86_64::{_mm_prefetch, _MM_HINT_T0};
    // PREFETCHh is architecturally non-faulting for any address.
    unsafe { _mm_prefetch::<_MM_HINT_T0>(addr as *const i8) }
}

#[cfg(not(target_arch = "x86_64"))]
#[inline]
fn prefetch_addr(_addr: usize) {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hints_do_not_touch_data() {
        let data = vec![1.0f32; 256];
        prefetch_hint(&data, 4);
        prefetch_hint(&data[250..], 8); // beyond the end is fine
        assert!(data.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn zero_depth_is_a_no_op() {
        prefetch_hint(&[0u8; 1], 0);
    }
}
