//! Monotonic alignment search over a phoneme-by-frame log-weight matrix.
//!
//! Finds the monotonic surjective path (every phoneme covers at least one
//! frame, frames are consumed left to right) that maximizes the sum of log
//! weights, and returns it as per-phoneme frame counts. Score ties prefer
//! staying on the current phoneme, so the result is the lexicographically
//! smallest optimal path in row index, read frame by frame.
//!
//! The C ABI takes `f32` inputs; the dynamic program accumulates in `f64`
//! so results match an `f64` reference implementation bit for bit.

use std::os::raw::c_int;

pub const STATUS_OK: c_int = 0;
pub const STATUS_INFEASIBLE: c_int = 1;
pub const STATUS_NONFINITE: c_int = 2;

/// Core dynamic program. `logw` is row-major `n x t`. On success fills
/// `out` with `n` durations summing to `t`.
pub fn mas(logw: &[f32], n: usize, t: usize, out: &mut [u32]) -> c_int {
    if n == 0 || n > t {
        return STATUS_INFEASIBLE;
    }
    if logw.iter().any(|w| !w.is_finite()) {
        return STATUS_NONFINITE;
    }

    // suffix[i][j]: best score of a path from (i, j) to (n-1, t-1), inclusive.
    let mut suffix = vec![f64::NEG_INFINITY; n * t];
    suffix[(n - 1) * t + (t - 1)] = logw[(n - 1) * t + (t - 1)] as f64;
    for j in (0..t - 1).rev() {
        for i in 0..n {
            // feasibility: remaining phonemes must fit in remaining frames
            if n - 1 - i > t - 1 - j {
                continue;
            }
            let stay = suffix[i * t + j + 1];
            let advance = if i + 1 < n {
                suffix[(i + 1) * t + j + 1]
            } else {
                f64::NEG_INFINITY
            };
            suffix[i * t + j] = logw[i * t + j] as f64 + stay.max(advance);
        }
    }

    out[..n].fill(0);
    let mut i = 0usize;
    out[0] = 1;
    for j in 1..t {
        let stay = if n - 1 - i <= t - 1 - j {
            suffix[i * t + j]
        } else {
            f64::NEG_INFINITY
        };
        let advance = if i + 1 < n {
            suffix[(i + 1) * t + j]
        } else {
            f64::NEG_INFINITY
        };
        if advance > stay {
            i += 1;
        }
        out[i] += 1;
    }
    STATUS_OK
}

/// Single-matrix search. `logw` points at `n * t` row-major floats, `out`
/// at `n` slots. Returns 0 on success; on failure `out` is left untouched
/// (1: n == 0 or n > t, 2: non-finite input).
///
/// # Safety
/// `logw` must be readable for `n * t` floats and `out` writable for `n`
/// integers.
#[no_mangle]
pub unsafe extern "C" fn mas_search(
    logw: *const f32,
    n: u32,
    t: u32,
    out: *mut u32,
) -> c_int {
    if logw.is_null() || out.is_null() {
        return STATUS_INFEASIBLE;
    }
    let (n, t) = (n as usize, t as usize);
    if n == 0 || n > t {
        return STATUS_INFEASIBLE;
    }
    let logw = std::slice::from_raw_parts(logw, n * t);
    let out = std::slice::from_raw_parts_mut(out, n);
    mas(logw, n, t, out)
}

/// Batched search over `b` matrices packed back to back in `logw`
/// (matrix k is `ns[k] * ts[k]` floats) with durations packed the same way
/// in `out_durs` (`sum(ns)` slots). `out_status[k]` receives the per-item
/// status; the return value is 0 when every item succeeded, otherwise the
/// first non-zero item status.
///
/// # Safety
/// All pointers must cover the packed extents described above.
#[no_mangle]
pub unsafe extern "C" fn mas_search_batch(
    logw: *const f32,
    ns: *const u32,
    ts: *const u32,
    b: u32,
    out_durs: *mut u32,
    out_status: *mut c_int,
) -> c_int {
    let b = b as usize;
    if b == 0 {
        return STATUS_OK;
    }
    if logw.is_null() || ns.is_null() || ts.is_null()
        || out_durs.is_null() || out_status.is_null()
    {
        return STATUS_INFEASIBLE;
    }
    let ns = std::slice::from_raw_parts(ns, b);
    let ts = std::slice::from_raw_parts(ts, b);
    let statuses = std::slice::from_raw_parts_mut(out_status, b);
    let total_w: usize = ns.iter().zip(ts).map(|(&n, &t)| n as usize * t as usize).sum();
    let total_n: usize = ns.iter().map(|&n| n as usize).sum();
    let weights = std::slice::from_raw_parts(logw, total_w);
    let durs = std::slice::from_raw_parts_mut(out_durs, total_n);

    let mut overall = STATUS_OK;
    let (mut w_off, mut d_off) = (0usize, 0usize);
    for k in 0..b {
        let (n, t) = (ns[k] as usize, ts[k] as usize);
        statuses[k] = if n == 0 || n > t {
            STATUS_INFEASIBLE
        } else {
            mas(&weights[w_off..w_off + n * t], n, t, &mut durs[d_off..d_off + n])
        };
        if overall == STATUS_OK && statuses[k] != STATUS_OK {
            overall = statuses[k];
        }
        w_off += n * t;
        d_off += n;
    }
    overall
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(logw: &[f32], n: usize, t: usize) -> (c_int, Vec<u32>) {
        let mut out = vec![0u32; n];
        let status = mas(logw, n, t, &mut out);
        (status, out)
    }

    #[test]
    fn single_phoneme_takes_all_frames() {
        let (status, out) = run(&[0.0, -1.0, 2.0], 1, 3);
        assert_eq!(status, STATUS_OK);
        assert_eq!(out, vec![3]);
    }

    #[test]
    fn diagonal_preference() {
        // strong diagonal: each phoneme gets one frame
        let logw = [0.0, -9.0, -9.0, -9.0, 0.0, -9.0, -9.0, -9.0, 0.0];
        let (status, out) = run(&logw, 3, 3);
        assert_eq!(status, STATUS_OK);
        assert_eq!(out, vec![1, 1, 1]);
    }

    #[test]
    fn ties_prefer_staying() {
        // uniform weights: the first phoneme absorbs the slack
        let logw = [0.0f32; 8];
        let (status, out) = run(&logw, 2, 4);
        assert_eq!(status, STATUS_OK);
        assert_eq!(out, vec![3, 1]);
    }

    #[test]
    fn durations_sum_to_frames() {
        let logw: Vec<f32> = (0..24).map(|k| ((k * 7919) % 13) as f32 - 6.0).collect();
        let (status, out) = run(&logw, 4, 6);
        assert_eq!(status, STATUS_OK);
        assert_eq!(out.iter().sum::<u32>(), 6);
        assert!(out.iter().all(|&d| d >= 1));
    }

    #[test]
    fn infeasible_leaves_output_untouched() {
        let mut out = vec![7u32; 4];
        let status = mas(&[0.0; 12], 4, 3, &mut out);
        assert_eq!(status, STATUS_INFEASIBLE);
        assert_eq!(out, vec![7, 7, 7, 7]);
    }

    #[test]
    fn nonfinite_rejected() {
        let mut out = vec![7u32; 2];
        let status = mas(&[0.0, f32::NAN, 0.0, 0.0], 2, 2, &mut out);
        assert_eq!(status, STATUS_NONFINITE);
        assert_eq!(out, vec![7, 7]);
    }

    #[test]
    fn batch_matches_serial() {
        let a = [0.0f32, -9.0, -9.0, 0.0];
        let b = [0.0f32; 6];
        let mut packed = Vec::new();
        packed.extend_from_slice(&a);
        packed.extend_from_slice(&b);
        let ns = [2u32, 2u32];
        let ts = [2u32, 3u32];
        let mut durs = vec![0u32; 4];
        let mut statuses = vec![-1; 2];
        let overall = unsafe {
            mas_search_batch(
                packed.as_ptr(), ns.as_ptr(), ts.as_ptr(), 2,
                durs.as_mut_ptr(), statuses.as_mut_ptr(),
            )
        };
        assert_eq!(overall, STATUS_OK);
        assert_eq!(statuses, vec![STATUS_OK, STATUS_OK]);
        assert_eq!(&durs[..2], &run(&a, 2, 2).1[..]);
        assert_eq!(&durs[2..], &run(&b, 2, 3).1[..]);
    }

    #[test]
    fn batch_reports_per_item_failures() {
        let packed = [0.0f32; 6]; // item 0: 2x3 feasible after an infeasible 0-frame item
        let ns = [2u32, 2u32];
        let ts = [1u32, 2u32];
        let mut durs = vec![9u32; 4];
        let mut statuses = vec![-1; 2];
        let overall = unsafe {
            mas_search_batch(
                packed.as_ptr(), ns.as_ptr(), ts.as_ptr(), 2,
                durs.as_mut_ptr(), statuses.as_mut_ptr(),
            )
        };
        assert_eq!(overall, STATUS_INFEASIBLE);
        assert_eq!(statuses, vec![STATUS_INFEASIBLE, STATUS_OK]);
        assert_eq!(&durs[..2], &[9, 9]); // untouched
        assert_eq!(&durs[2..], &[1, 1]);
    }
}
