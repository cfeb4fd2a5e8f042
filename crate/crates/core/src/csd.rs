//! Canonical signed digit encoding, shift-add planning, and zero-weight
//! pruning.
//!
//! A constant multiplication `y = q * x` becomes a sum of signed shifted
//! copies of `x`: `y = sum_i c_i * (x << s_i)` with `c_i` in {-1, +1}.
//! CSD encoding minimizes the number of terms, which directly minimizes
//! adders once shifts are free wiring.

use crate::error::{Error, Result};
use crate::model::{signed_range, QuantizedWeightMatrix};
use serde::Serialize;

/// A value in canonical signed digit form: digits in {-1, 0, +1},
/// most-significant first, with no two adjacent nonzero digits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsdForm {
    digits: Vec<i8>,
}

impl CsdForm {
    /// Digits, most-significant first.
    pub fn digits(&self) -> &[i8] {
        &self.digits
    }

    pub fn width(&self) -> usize {
        self.digits.len()
    }

    pub fn nonzero_count(&self) -> usize {
        self.digits.iter().filter(|&&d| d != 0).count()
    }

    /// Exact integer value: `sum digits[i] * 2^position`.
    pub fn reconstruct(&self) -> i64 {
        self.digits
            .iter()
            .rev()
            .enumerate()
            .map(|(pos, &d)| d as i64 * (1i64 << pos))
            .sum()
    }

    /// True when no two adjacent digits are both nonzero.
    pub fn is_canonical(&self) -> bool {
        self.digits
            .windows(2)
            .all(|w| w[0] == 0 || w[1] == 0)
    }
}

/// Encodes `value` into CSD with `width + 1` digits.
///
/// Uses the classic least-significant-first recoding: a run of ones is
/// replaced by `+1` above and `-1` below, leaving the minimal number of
/// nonzero digits among all signed-digit representations.
pub fn csd_encode(value: i64, width: u32) -> Result<CsdForm> {
    if width >= 62 {
        return Err(Error::InvalidModelInput(format!(
            "csd width {width} out of range"
        )));
    }
    let lo = -(1i64 << width);
    let hi = (1i64 << width) - 1;
    if value < lo || value > hi {
        return Err(Error::ValueOutOfRange {
            value,
            width: width + 1,
        });
    }
    let n = width as usize + 1;
    let mut digits = vec![0i8; n]; // filled LSB-first, reversed at the end
    let mut v = value;
    let mut pos = 0;
    while v != 0 {
        if v & 1 != 0 {
            // v mod 4 == 1 -> digit +1, v mod 4 == 3 -> digit -1
            let d: i8 = if v & 3 == 1 { 1 } else { -1 };
            digits[pos] = d;
            v -= d as i64;
        }
        v >>= 1;
        pos += 1;
    }
    digits.reverse();
    Ok(CsdForm { digits })
}

/// How a weight's bits become shift-add terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanMode {
    /// Canonical signed digit terms (minimal adder count).
    Csd,
    /// Plain two's-complement bits, for baseline comparisons.
    Binary,
}

/// One term of a shift-add plan: `sign * (x << shift)`.
/// Shifts may be negative; a negative shift is an arithmetic right shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanTerm {
    pub sign: i8,
    pub shift: i32,
}

/// A dequantized weight as a sum of signed powers of two.
///
/// The term shifts already include the quantization scale, so the
/// represented value is `sum_i sign_i * 2^shift_i == q * 2^scale_exp`.
/// Shifts are strictly decreasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftAddPlan {
    pub terms: Vec<PlanTerm>,
    pub scale_exp: i32,
}

impl ShiftAddPlan {
    /// Represented real value. Exact: every term is a power of two.
    pub fn value(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.sign as f64 * (t.shift as f64).exp2())
            .sum()
    }

    /// Exact integer reconstruction of the underlying quantized weight:
    /// `sum sign * 2^(shift - scale_exp)`.
    pub fn reconstruct_quantized(&self) -> i64 {
        self.terms
            .iter()
            .map(|t| {
                let pos = t.shift - self.scale_exp;
                debug_assert!(pos >= 0);
                t.sign as i64 * (1i64 << pos)
            })
            .sum()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Plans the shift-add decomposition of one quantized weight.
///
/// `q == 0` yields an empty plan: the multiplier is eliminated entirely.
pub fn plan_weight(q: i64, weight_width: u32, scale_exp: i32, mode: PlanMode) -> Result<ShiftAddPlan> {
    let (lo, hi) = signed_range(weight_width);
    if q < lo || q > hi {
        return Err(Error::ValueOutOfRange {
            value: q,
            width: weight_width,
        });
    }
    let mut terms = Vec::new();
    match mode {
        PlanMode::Csd => {
            let csd = csd_encode(q, weight_width - 1)?;
            let n = csd.width();
            for (i, &d) in csd.digits().iter().enumerate() {
                if d != 0 {
                    let pos = (n - 1 - i) as i32;
                    terms.push(PlanTerm {
                        sign: d,
                        shift: pos + scale_exp,
                    });
                }
            }
        }
        PlanMode::Binary => {
            // two's complement: MSB carries weight -2^(w-1)
            let w = weight_width;
            let bits = (q as u64) & ((1u64 << w) - 1);
            for pos in (0..w).rev() {
                if bits >> pos & 1 != 0 {
                    terms.push(PlanTerm {
                        sign: if pos == w - 1 { -1 } else { 1 },
                        shift: pos as i32 + scale_exp,
                    });
                }
            }
        }
    }
    debug_assert!(terms.windows(2).all(|w| w[0].shift > w[1].shift));
    Ok(ShiftAddPlan { terms, scale_exp })
}

/// Outcome of magnitude pruning over one matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PruneReport {
    pub threshold: f64,
    /// Weights newly zeroed by this pass (prior zeros excluded).
    pub pruned_count: u64,
    /// Weights that were already zero before the pass.
    pub prior_zero_count: u64,
    pub total_count: u64,
    pub pruned_fraction: f64,
}

/// Zeroes every weight whose dequantized magnitude `|q * 2^scale_exp|` is
/// strictly below `threshold`. Weights that were already zero are counted
/// separately and not reported as pruned.
pub fn prune_weights(
    m: &QuantizedWeightMatrix,
    threshold: f64,
) -> Result<(QuantizedWeightMatrix, PruneReport)> {
    if threshold < 0.0 || !threshold.is_finite() {
        return Err(Error::InvalidModelInput(format!(
            "prune threshold must be finite and >= 0, got {threshold}"
        )));
    }
    let scale = (m.scale_exp() as f64).exp2();
    let mut pruned = 0u64;
    let mut prior_zero = 0u64;
    let values: Vec<i8> = m
        .values()
        .iter()
        .map(|&q| {
            if q == 0 {
                prior_zero += 1;
                0
            } else if (q as f64 * scale).abs() < threshold {
                pruned += 1;
                0
            } else {
                q
            }
        })
        .collect();
    let total = m.element_count();
    let report = PruneReport {
        threshold,
        pruned_count: pruned,
        prior_zero_count: prior_zero,
        total_count: total,
        pruned_fraction: if total == 0 { 0.0 } else { pruned as f64 / total as f64 },
    };
    Ok((m.with_values(values), report))
}

/// Exhaustive term-count statistics for one weight width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CsdStats {
    pub width: u32,
    /// Mean CSD term count over all signed `width`-bit values.
    pub mean_nonzero_csd: f64,
    /// Mean two's-complement term count over the same values.
    pub mean_nonzero_binary: f64,
    /// `1 - mean_csd / mean_binary`.
    pub reduction_ratio: f64,
}

/// Enumerates every signed value of the width and compares the number of
/// shift-add terms a CSD plan needs against a plain binary plan.
pub fn csd_stats(width: u32) -> Result<CsdStats> {
    if !(2..=16).contains(&width) {
        return Err(Error::InvalidModelInput(format!(
            "csd_stats width must be in 2..=16, got {width}"
        )));
    }
    let (lo, hi) = signed_range(width);
    let mut csd_total = 0u64;
    let mut bin_total = 0u64;
    for q in lo..=hi {
        csd_total += plan_weight(q, width, 0, PlanMode::Csd)?.term_count() as u64;
        bin_total += plan_weight(q, width, 0, PlanMode::Binary)?.term_count() as u64;
    }
    let n = (hi - lo + 1) as f64;
    let mean_csd = csd_total as f64 / n;
    let mean_bin = bin_total as f64 / n;
    Ok(CsdStats {
        width,
        mean_nonzero_csd: mean_csd,
        mean_nonzero_binary: mean_bin,
        reduction_ratio: 1.0 - mean_csd / mean_bin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generate_synthetic;
    use crate::model::TransformerTopology;

    #[test]
    fn seven_is_eight_minus_one() {
        let c = csd_encode(7, 3).unwrap();
        assert_eq!(c.digits(), &[1, 0, 0, -1]);
        assert_eq!(c.reconstruct(), 7);
    }

    #[test]
    fn zero_is_all_zero_digits() {
        let c = csd_encode(0, 5).unwrap();
        assert_eq!(c.digits(), &[0i8; 6]);
        assert_eq!(c.nonzero_count(), 0);
    }

    #[test]
    fn out_of_range_rejected() {
        // width 2 covers [-4, 3]; width 3 covers [-8, 7]
        assert!(csd_encode(4, 2).is_err());
        assert!(csd_encode(-5, 2).is_err());
        assert!(csd_encode(-8, 3).is_ok());
        assert_eq!(csd_encode(-8, 3).unwrap().digits(), &[-1, 0, 0, 0]);
    }

    #[test]
    fn exhaustive_12bit_reconstruction_and_minimality() {
        for v in -2048i64..=2047 {
            let c = csd_encode(v, 11).unwrap();
            assert_eq!(c.reconstruct(), v);
            assert!(c.is_canonical(), "adjacent nonzeros for {v}");
            assert!(
                c.nonzero_count() <= (v.unsigned_abs().count_ones() as usize),
                "csd weight exceeds binary popcount for {v}"
            );
        }
    }

    #[test]
    fn plan_binary_matches_worked_example() {
        // q=3 at scale 2^-3 is 0.375 = (x >> 2) + (x >> 3)
        let p = plan_weight(3, 4, -3, PlanMode::Binary).unwrap();
        let terms: Vec<(i8, i32)> = p.terms.iter().map(|t| (t.sign, t.shift)).collect();
        assert_eq!(terms, vec![(1, -2), (1, -3)]);
        assert!((p.value() - 0.375).abs() < 1e-15);
    }

    #[test]
    fn plan_csd_matches_worked_example() {
        // CSD of 3 is 10-1: 0.375 = (x >> 1) - (x >> 3)
        let p = plan_weight(3, 4, -3, PlanMode::Csd).unwrap();
        let terms: Vec<(i8, i32)> = p.terms.iter().map(|t| (t.sign, t.shift)).collect();
        assert_eq!(terms, vec![(1, -1), (-1, -3)]);
        assert!((p.value() - 0.375).abs() < 1e-15);
        assert_eq!(p.reconstruct_quantized(), 3);
    }

    #[test]
    fn zero_weight_plan_is_empty() {
        let p = plan_weight(0, 4, -3, PlanMode::Csd).unwrap();
        assert!(p.is_empty());
        assert_eq!(p.value(), 0.0);
    }

    #[test]
    fn plan_reconstruction_exhaustive_int4() {
        for scale_exp in -8..=0 {
            for q in -8i64..=7 {
                for mode in [PlanMode::Csd, PlanMode::Binary] {
                    let p = plan_weight(q, 4, scale_exp, mode).unwrap();
                    assert_eq!(p.reconstruct_quantized(), q, "q={q} scale={scale_exp}");
                    let want = q as f64 * (scale_exp as f64).exp2();
                    assert!((p.value() - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn csd_never_worse_than_binary() {
        for width in 2..=12u32 {
            let (lo, hi) = signed_range(width);
            for q in lo..=hi {
                let c = plan_weight(q, width, 0, PlanMode::Csd).unwrap().term_count();
                let b = plan_weight(q, width, 0, PlanMode::Binary)
                    .unwrap()
                    .term_count();
                assert!(c <= b, "csd worse than binary at q={q} width={width}");
            }
        }
    }

    #[test]
    fn prune_threshold_zero_changes_nothing() {
        let b = generate_synthetic(&TransformerTopology::tiny_test(), 3).unwrap();
        let m = &b.layers[0].w_q;
        let (out, report) = prune_weights(m, 0.0).unwrap();
        assert_eq!(&out, m);
        assert_eq!(report.pruned_count, 0);
    }

    #[test]
    fn prune_all_zero_matrix_reports_prior_zeros() {
        let m = QuantizedWeightMatrix::new(2, 2, 4, -3, vec![0, 0, 0, 0]).unwrap();
        let (out, report) = prune_weights(&m, 1.0).unwrap();
        assert_eq!(out.values(), &[0, 0, 0, 0]);
        assert_eq!(report.pruned_count, 0);
        assert_eq!(report.prior_zero_count, 4);
    }

    #[test]
    fn prune_int4_grid_at_published_threshold() {
        // scale 2^-7, threshold 2^-6: only |q| == 1 falls below (q=0 is a
        // prior zero), so 2 of 16 grid values prune.
        let values: Vec<i8> = (-8..=7).collect();
        let m = QuantizedWeightMatrix::new(4, 4, 4, -7, values).unwrap();
        let threshold = (-6f64).exp2();
        let (out, report) = prune_weights(&m, threshold).unwrap();
        assert_eq!(report.pruned_count, 2);
        assert_eq!(report.prior_zero_count, 1);
        assert_eq!(report.total_count, 16);
        assert!((report.pruned_fraction - 2.0 / 16.0).abs() < 1e-15);
        for (&before, &after) in m.values().iter().zip(out.values()) {
            if before.unsigned_abs() > 1 {
                assert_eq!(before, after);
            } else {
                assert_eq!(after, 0);
            }
        }
    }

    #[test]
    fn prune_is_idempotent() {
        let b = generate_synthetic(&TransformerTopology::tiny_test(), 9).unwrap();
        let m = &b.layers[1].w_2;
        let t = (-5f64).exp2();
        let (once, r1) = prune_weights(m, t).unwrap();
        let (twice, r2) = prune_weights(&once, t).unwrap();
        assert_eq!(once, twice);
        assert_eq!(r2.pruned_count, 0);
        assert_eq!(r2.prior_zero_count, r1.prior_zero_count + r1.pruned_count);
    }

    #[test]
    fn stats_width_2_by_hand() {
        // values {-2, -1, 0, 1}: csd terms 1,1,0,1; binary terms 1,2,0,1
        let s = csd_stats(2).unwrap();
        assert!((s.mean_nonzero_csd - 3.0 / 4.0).abs() < 1e-15);
        assert!((s.mean_nonzero_binary - 4.0 / 4.0).abs() < 1e-15);
        assert!((s.reduction_ratio - 0.25).abs() < 1e-15);
    }

    #[test]
    fn stats_mean_csd_below_binary_all_widths() {
        for w in 2..=12 {
            let s = csd_stats(w).unwrap();
            assert!(s.mean_nonzero_csd <= s.mean_nonzero_binary, "width {w}");
            assert!(s.reduction_ratio >= 0.0);
        }
    }

    #[test]
    fn stats_width_bounds() {
        assert!(csd_stats(1).is_err());
        assert!(csd_stats(17).is_err());
    }
}
