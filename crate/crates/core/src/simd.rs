//! Runtime selection of wider vector instructions for the hot loops.
//!
//! [`avx2_enabled`] gates entry points compiled with `#[target_feature]`; the
//! kernels they call are `#[inline(always)]` so that they pick up the wider
//! encoding. No fused multiply-add is enabled, so every operation rounds
//! exactly as in the portable build and results are bitwise identical.

/// Whether the running CPU supports AVX2 (the check is cached by std).
#[inline(always)]
pub(crate) fn avx2_enabled() -> bool {
    #[cfg(target_arch = "x86_64")]
    {
        std::arch::is_x86_feature_detected!("avx2")
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        false
    }
}
