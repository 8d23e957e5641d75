//! Group delay and per-frame sign assignment.
//!
//! Group delay is the wrapped phase difference between adjacent frequency
//! bins within a frame. Given estimated group delays for a source pair,
//! the per-unit sign of the phase offset is chosen frame by frame so that
//! the hypothesized phases produce group delays as close as possible to
//! the estimates. The objective couples only adjacent bins, so each frame
//! decodes exactly with a two-state dynamic program in `O(4F)`; an
//! exhaustive `O(2^F)` search is provided as a test oracle.

use ndarray::Array2;

use crate::spectral::{spec_accessors, wrap_phase, MagSpec, PhaseSpec, StftConfig};
use crate::trig::{assemble_phases, DeltaSpec, SignSpec};
use crate::util::{ensure_same_config, ensure_same_shape, validate_entries};
use crate::{Error, Result};

const PI: f64 = std::f64::consts::PI;

/// Largest frequency count accepted by [`brute_force_signs`].
pub const BRUTE_FORCE_MAX_BINS: usize = 20;

/// Group-delay matrix: `T x (F - 1)`, entries wrapped into `(-pi, pi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GdSpec {
    data: Array2<f64>,
    config: StftConfig,
}

spec_accessors!(GdSpec, f64);

impl GdSpec {
    pub fn new(data: Array2<f64>, config: StftConfig) -> Result<Self> {
        config.validate()?;
        if data.ncols() != config.num_bins() - 1 {
            return Err(Error::ShapeMismatch(format!(
                "GdSpec has {} columns, config implies {}",
                data.ncols(),
                config.num_bins() - 1
            )));
        }
        validate_entries("GdSpec", &data, |v| v > -PI && v <= PI, "outside (-pi, pi]")?;
        Ok(GdSpec { data, config })
    }
}

/// Wrapped phase difference between adjacent bins: entry `(t, f)` is
/// `wrap(phase[t, f+1] - phase[t, f])`.
pub fn group_delay(phase: &PhaseSpec) -> Result<GdSpec> {
    let (frames, bins) = phase.data().dim();
    if bins < 2 {
        return Err(Error::InvalidValue(format!(
            "group_delay requires at least 2 bins, got {bins}"
        )));
    }
    let data = Array2::from_shape_fn((frames, bins - 1), |(t, f)| {
        wrap_phase(phase.data()[(t, f + 1)] - phase.data()[(t, f)])
    });
    GdSpec::new(data, *phase.config())
}

/// Score of one adjacent-bin transition for a given sign pair.
///
/// Both the Viterbi search and the exhaustive oracle accumulate exactly
/// this quantity left to right, so their optimal scores are directly
/// comparable in floating point.
fn transition_score(
    phase_mix: &[f64],
    delta_target: &[f64],
    delta_rest: &[f64],
    gd_target: &[f64],
    gd_rest: &[f64],
    f: usize,
    g_lo: f64,
    g_hi: f64,
) -> f64 {
    let target_lo = phase_mix[f] + g_lo * delta_target[f];
    let target_hi = phase_mix[f + 1] + g_hi * delta_target[f + 1];
    let rest_lo = phase_mix[f] - g_lo * delta_rest[f];
    let rest_hi = phase_mix[f + 1] - g_hi * delta_rest[f + 1];
    (target_hi - target_lo - gd_target[f]).cos() + (rest_hi - rest_lo - gd_rest[f]).cos()
}

fn check_row_lengths(
    op: &str,
    phase_mix: &[f64],
    delta_target: &[f64],
    delta_rest: &[f64],
    gd_target: &[f64],
    gd_rest: &[f64],
) -> Result<usize> {
    let n = phase_mix.len();
    if n == 0 {
        return Err(Error::InvalidValue(format!("{op}: empty frame")));
    }
    if delta_target.len() != n || delta_rest.len() != n {
        return Err(Error::LengthMismatch(format!(
            "{op}: deltas have lengths {} and {}, expected {n}",
            delta_target.len(),
            delta_rest.len()
        )));
    }
    if gd_target.len() != n - 1 || gd_rest.len() != n - 1 {
        return Err(Error::LengthMismatch(format!(
            "{op}: group delays have lengths {} and {}, expected {}",
            gd_target.len(),
            gd_rest.len(),
            n - 1
        )));
    }
    Ok(n)
}

/// Outcome of a per-frame sign search.
#[derive(Debug, Clone, PartialEq)]
pub struct ViterbiRun {
    /// One sign per bin, each `+1.0` or `-1.0`.
    pub signs: Vec<f64>,
    /// Value of the maximized objective.
    pub score: f64,
    /// Number of decisions where the two compared path scores were
    /// exactly equal (resolved toward `+1`).
    pub tie_decisions: usize,
}

/// Globally maximize the per-frame group-delay agreement objective over
/// all `2^F` sign assignments with a two-state dynamic program.
///
/// Ties prefer `+1`, resolved while backtracking from the last bin.
pub fn viterbi_signs(
    phase_mix: &[f64],
    delta_target: &[f64],
    delta_rest: &[f64],
    gd_target: &[f64],
    gd_rest: &[f64],
) -> Result<ViterbiRun> {
    let n = check_row_lengths("viterbi_signs", phase_mix, delta_target, delta_rest, gd_target, gd_rest)?;
    const STATE_SIGNS: [f64; 2] = [1.0, -1.0];
    if n == 1 {
        // no adjacent pair: objective is empty, tie-break picks +1
        return Ok(ViterbiRun { signs: vec![1.0], score: 0.0, tie_decisions: 0 });
    }

    let mut best = [0.0f64; 2];
    let mut back = vec![[0usize; 2]; n];
    let mut ties = 0usize;
    for f in 0..n - 1 {
        let mut next = [0.0f64; 2];
        for (hi, &g_hi) in STATE_SIGNS.iter().enumerate() {
            let via_plus = best[0]
                + transition_score(phase_mix, delta_target, delta_rest, gd_target, gd_rest, f, STATE_SIGNS[0], g_hi);
            let via_minus = best[1]
                + transition_score(phase_mix, delta_target, delta_rest, gd_target, gd_rest, f, STATE_SIGNS[1], g_hi);
            if via_minus > via_plus {
                next[hi] = via_minus;
                back[f + 1][hi] = 1;
            } else {
                if via_minus == via_plus {
                    ties += 1;
                }
                next[hi] = via_plus;
                back[f + 1][hi] = 0;
            }
        }
        best = next;
    }

    let mut state = if best[1] > best[0] {
        1
    } else {
        if best[1] == best[0] {
            ties += 1;
        }
        0
    };
    let score = best[state];
    let mut signs = vec![0.0; n];
    for f in (0..n).rev() {
        signs[f] = STATE_SIGNS[state];
        if f > 0 {
            state = back[f][state];
        }
    }
    Ok(ViterbiRun { signs, score, tie_decisions: ties })
}

/// Exhaustive maximizer over all `2^F` assignments; the test oracle for
/// [`viterbi_signs`]. Among ties it returns the lexicographically largest
/// assignment with `+1 > -1`, scanning from the lowest bin.
pub fn brute_force_signs(
    phase_mix: &[f64],
    delta_target: &[f64],
    delta_rest: &[f64],
    gd_target: &[f64],
    gd_rest: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let n = check_row_lengths("brute_force_signs", phase_mix, delta_target, delta_rest, gd_target, gd_rest)?;
    if n > BRUTE_FORCE_MAX_BINS {
        return Err(Error::BruteForceTooLarge { bins: n, max: BRUTE_FORCE_MAX_BINS });
    }
    if n == 1 {
        return Ok((vec![1.0], 0.0));
    }

    let sign_of = |mask: usize, f: usize| -> f64 {
        if mask & (1usize << (n - 1 - f)) != 0 {
            1.0
        } else {
            -1.0
        }
    };
    let mut best_score = f64::NEG_INFINITY;
    let mut best_mask = 0usize;
    // descending mask order visits lexicographically larger assignments
    // first, so keeping strict improvements implements the tie-break
    for mask in (0..(1usize << n)).rev() {
        let mut score = 0.0;
        for f in 0..n - 1 {
            score += transition_score(
                phase_mix,
                delta_target,
                delta_rest,
                gd_target,
                gd_rest,
                f,
                sign_of(mask, f),
                sign_of(mask, f + 1),
            );
        }
        if score > best_score {
            best_score = score;
            best_mask = mask;
        }
    }
    let signs = (0..n).map(|f| sign_of(best_mask, f)).collect();
    Ok((signs, best_score))
}

/// Score an arbitrary sign assignment under the same objective, summed in
/// the same order as the search routines.
pub fn assignment_score(
    phase_mix: &[f64],
    delta_target: &[f64],
    delta_rest: &[f64],
    gd_target: &[f64],
    gd_rest: &[f64],
    signs: &[f64],
) -> Result<f64> {
    let n = check_row_lengths("assignment_score", phase_mix, delta_target, delta_rest, gd_target, gd_rest)?;
    if signs.len() != n {
        return Err(Error::LengthMismatch(format!(
            "assignment_score: {} signs for {n} bins",
            signs.len()
        )));
    }
    let mut score = 0.0;
    for f in 0..n - 1 {
        score += transition_score(
            phase_mix,
            delta_target,
            delta_rest,
            gd_target,
            gd_rest,
            f,
            signs[f],
            signs[f + 1],
        );
    }
    Ok(score)
}

/// Phase pair recovered by per-frame sign decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct GdReconstruction {
    pub target_phase: PhaseSpec,
    pub rest_phase: PhaseSpec,
    pub signs: SignSpec,
    /// Frames containing at least one exactly-tied decoding decision.
    pub tie_frames: usize,
}

/// Decode signs frame by frame with [`viterbi_signs`] and assemble the
/// resulting phase estimates for the source pair.
pub fn reconstruct_with_gd(
    phase_mix: &PhaseSpec,
    delta_target: &DeltaSpec,
    delta_rest: &DeltaSpec,
    gd_target: &GdSpec,
    gd_rest: &GdSpec,
) -> Result<GdReconstruction> {
    let (frames, bins) = phase_mix.data().dim();
    ensure_same_shape("reconstruct_with_gd", (frames, bins), delta_target.data().dim())?;
    ensure_same_shape("reconstruct_with_gd", (frames, bins), delta_rest.data().dim())?;
    ensure_same_shape("reconstruct_with_gd(gd)", gd_target.data().dim(), (frames, bins - 1))?;
    ensure_same_shape("reconstruct_with_gd(gd)", gd_rest.data().dim(), (frames, bins - 1))?;
    ensure_same_config("reconstruct_with_gd", phase_mix.config(), delta_target.config())?;
    ensure_same_config("reconstruct_with_gd", phase_mix.config(), delta_rest.config())?;
    ensure_same_config("reconstruct_with_gd", phase_mix.config(), gd_target.config())?;
    ensure_same_config("reconstruct_with_gd", phase_mix.config(), gd_rest.config())?;

    let mut signs = Array2::<f64>::zeros((frames, bins));
    let mut tie_frames = 0usize;
    for t in 0..frames {
        let row = |a: &Array2<f64>| a.row(t).to_vec();
        let run = viterbi_signs(
            &row(phase_mix.data()),
            &row(delta_target.data()),
            &row(delta_rest.data()),
            &row(gd_target.data()),
            &row(gd_rest.data()),
        )?;
        if run.tie_decisions > 0 {
            tie_frames += 1;
        }
        for (f, &g) in run.signs.iter().enumerate() {
            signs[(t, f)] = g;
        }
    }
    let signs = SignSpec::new(signs, *phase_mix.config())?;
    let (target_phase, rest_phase) =
        assemble_phases(phase_mix, delta_target, delta_rest, &signs)?;
    Ok(GdReconstruction { target_phase, rest_phase, signs, tie_frames })
}

/// Magnitude-weighted group-delay error: each adjacent-bin pair contributes
/// `|S[t, f+1]| * (1 - cos(gd_est - gd_ref)) / 2`.
pub fn gd_weighted_error(mag_ref: &MagSpec, gd_est: &GdSpec, gd_ref: &GdSpec) -> Result<f64> {
    ensure_same_shape("gd_weighted_error", gd_est.data().dim(), gd_ref.data().dim())?;
    let (frames, pairs) = gd_est.data().dim();
    ensure_same_shape("gd_weighted_error(mag)", mag_ref.data().dim(), (frames, pairs + 1))?;
    ensure_same_config("gd_weighted_error", mag_ref.config(), gd_est.config())?;
    ensure_same_config("gd_weighted_error", mag_ref.config(), gd_ref.config())?;
    let mut total = 0.0;
    for t in 0..frames {
        for f in 0..pairs {
            let weight = mag_ref.data()[(t, f + 1)];
            total += weight * (1.0 - (gd_est.data()[(t, f)] - gd_ref.data()[(t, f)]).cos()) / 2.0;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn config_with_bins(bins: usize) -> StftConfig {
        let fft = (bins - 1) * 2;
        StftConfig::new(8000, fft, fft / 2, fft).unwrap()
    }

    struct FrameCase {
        phase_mix: Vec<f64>,
        delta_target: Vec<f64>,
        delta_rest: Vec<f64>,
        gd_target: Vec<f64>,
        gd_rest: Vec<f64>,
    }

    fn random_case(n: usize, rng: &mut ChaCha8Rng) -> FrameCase {
        FrameCase {
            phase_mix: (0..n).map(|_| rng.random_range(-PI..PI)).collect(),
            delta_target: (0..n).map(|_| rng.random_range(0.0..PI)).collect(),
            delta_rest: (0..n).map(|_| rng.random_range(0.0..PI)).collect(),
            gd_target: (0..n - 1).map(|_| rng.random_range(-PI..PI)).collect(),
            gd_rest: (0..n - 1).map(|_| rng.random_range(-PI..PI)).collect(),
        }
    }

    #[test]
    fn group_delay_of_constant_phase_is_zero() {
        let config = config_with_bins(5);
        let phase = PhaseSpec::new(Array2::from_elem((3, 5), 0.7), config).unwrap();
        let gd = group_delay(&phase).unwrap();
        assert_eq!(gd.data().dim(), (3, 4));
        assert!(gd.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn group_delay_of_linear_phase_is_constant() {
        // a pure delay of n0 samples has phase -2*pi*f*n0/N across bins,
        // so group delay is constant -2*pi*n0/N after wrapping
        let config = config_with_bins(9); // fft 16
        let n0 = 3.0;
        let n = 16.0;
        let phase = PhaseSpec::new(
            Array2::from_shape_fn((2, 9), |(_, f)| {
                wrap_phase(-2.0 * PI * f as f64 * n0 / n)
            }),
            config,
        )
        .unwrap();
        let gd = group_delay(&phase).unwrap();
        let expected = wrap_phase(-2.0 * PI * n0 / n);
        for &v in gd.data() {
            assert!((v - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn group_delay_wraps_bin_differences() {
        let config = config_with_bins(2); // fft 2, 2 bins
        let phase = PhaseSpec::new(array![[PI - 0.1, -PI + 0.1]], config).unwrap();
        let gd = group_delay(&phase).unwrap();
        assert!((gd.data()[(0, 0)] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn viterbi_matches_enumeration_for_two_bins() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let c = random_case(2, &mut rng);
            let run = viterbi_signs(&c.phase_mix, &c.delta_target, &c.delta_rest, &c.gd_target, &c.gd_rest)
                .unwrap();
            let mut best = f64::NEG_INFINITY;
            for ga in [1.0, -1.0] {
                for gb in [1.0, -1.0] {
                    let s = assignment_score(
                        &c.phase_mix,
                        &c.delta_target,
                        &c.delta_rest,
                        &c.gd_target,
                        &c.gd_rest,
                        &[ga, gb],
                    )
                    .unwrap();
                    best = best.max(s);
                }
            }
            assert!((run.score - best).abs() < 1e-12);
        }
    }

    #[test]
    fn viterbi_matches_brute_force_on_random_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let c = random_case(8, &mut rng);
            let run = viterbi_signs(&c.phase_mix, &c.delta_target, &c.delta_rest, &c.gd_target, &c.gd_rest)
                .unwrap();
            let (signs, score) =
                brute_force_signs(&c.phase_mix, &c.delta_target, &c.delta_rest, &c.gd_target, &c.gd_rest)
                    .unwrap();
            assert!((run.score - score).abs() <= 1e-9 * score.abs().max(1.0));
            assert_eq!(run.signs, signs);
        }
    }

    #[test]
    fn zero_deltas_tie_break_to_all_plus_one() {
        // with both deltas zero the hypotheses collapse to the mixture
        // phase and every assignment scores identically
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 10;
        let phase_mix: Vec<f64> = (0..n).map(|_| rng.random_range(-PI..PI)).collect();
        let zeros = vec![0.0; n];
        let gd: Vec<f64> = (0..n - 1).map(|_| rng.random_range(-PI..PI)).collect();
        let run = viterbi_signs(&phase_mix, &zeros, &zeros, &gd, &gd).unwrap();
        assert!(run.signs.iter().all(|&g| g == 1.0));
        assert!(run.tie_decisions > 0);
        let expected: f64 = (0..n - 1)
            .map(|f| 2.0 * (phase_mix[f + 1] - phase_mix[f] - gd[f]).cos())
            .sum();
        assert!((run.score - expected).abs() < 1e-9);
        let (signs, _) = brute_force_signs(&phase_mix, &zeros, &zeros, &gd, &gd).unwrap();
        assert!(signs.iter().all(|&g| g == 1.0));
    }

    #[test]
    fn single_bin_frame_returns_plus_one_and_empty_score() {
        let run = viterbi_signs(&[0.4], &[0.2], &[0.9], &[], &[]).unwrap();
        assert_eq!(run.signs, vec![1.0]);
        assert_eq!(run.score, 0.0);
        let (signs, score) = brute_force_signs(&[0.4], &[0.2], &[0.9], &[], &[]).unwrap();
        assert_eq!(signs, vec![1.0]);
        assert_eq!(score, 0.0);
    }

    #[test]
    fn brute_force_rejects_large_frames() {
        let n = BRUTE_FORCE_MAX_BINS + 1;
        let r = brute_force_signs(&vec![0.0; n], &vec![0.0; n], &vec![0.0; n], &vec![0.0; n - 1], &vec![0.0; n - 1]);
        assert!(matches!(r, Err(Error::BruteForceTooLarge { .. })));
    }

    #[test]
    fn viterbi_rejects_mismatched_lengths() {
        assert!(viterbi_signs(&[0.0; 4], &[0.0; 3], &[0.0; 4], &[0.0; 3], &[0.0; 3]).is_err());
        assert!(viterbi_signs(&[0.0; 4], &[0.0; 4], &[0.0; 4], &[0.0; 2], &[0.0; 3]).is_err());
    }

    #[test]
    fn viterbi_dominates_any_fixed_assignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let n = 12;
            let c = random_case(n, &mut rng);
            let run = viterbi_signs(&c.phase_mix, &c.delta_target, &c.delta_rest, &c.gd_target, &c.gd_rest)
                .unwrap();
            let arbitrary: Vec<f64> =
                (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
            let s = assignment_score(
                &c.phase_mix,
                &c.delta_target,
                &c.delta_rest,
                &c.gd_target,
                &c.gd_rest,
                &arbitrary,
            )
            .unwrap();
            assert!(run.score >= s - 1e-12);
        }
    }

    #[test]
    fn reconstruct_with_zero_deltas_returns_mixture_phase() {
        let config = config_with_bins(5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let phase_mix = PhaseSpec::new(
            Array2::from_shape_fn((3, 5), |_| rng.random_range(-PI..PI)),
            config,
        )
        .unwrap();
        let zero = DeltaSpec::new(Array2::zeros((3, 5)), config).unwrap();
        let gd = group_delay(&phase_mix).unwrap();
        let rec = reconstruct_with_gd(&phase_mix, &zero, &zero, &gd, &gd).unwrap();
        assert_eq!(rec.target_phase.data(), phase_mix.data());
        assert_eq!(rec.rest_phase.data(), phase_mix.data());
    }

    #[test]
    fn gd_weighted_error_zero_on_equal_inputs() {
        let config = config_with_bins(5);
        let mag = MagSpec::new(Array2::from_elem((2, 5), 0.8), config).unwrap();
        let gd = GdSpec::new(Array2::from_elem((2, 4), 0.3), config).unwrap();
        assert_eq!(gd_weighted_error(&mag, &gd, &gd).unwrap(), 0.0);
    }

    #[test]
    fn gd_weighted_error_of_single_pi_flip_equals_weight() {
        let config = config_with_bins(3);
        let mut mag = Array2::zeros((1, 3));
        mag[(0, 1)] = 0.37; // weight of pair (0 -> 1)
        let mag = MagSpec::new(mag, config).unwrap();
        let gd_ref = GdSpec::new(Array2::zeros((1, 2)), config).unwrap();
        let mut est = Array2::zeros((1, 2));
        est[(0, 0)] = PI;
        let gd_est = GdSpec::new(est, config).unwrap();
        let e = gd_weighted_error(&mag, &gd_est, &gd_ref).unwrap();
        assert!((e - 0.37).abs() < 1e-12);
    }

    #[test]
    fn gd_weighted_error_matches_direct_summation() {
        let config = config_with_bins(9);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mag = MagSpec::new(
            Array2::from_shape_fn((4, 9), |_| rng.random_range(0.0..2.0)),
            config,
        )
        .unwrap();
        let est = GdSpec::new(
            Array2::from_shape_fn((4, 8), |_| rng.random_range(-PI..PI)),
            config,
        )
        .unwrap();
        let reference = GdSpec::new(
            Array2::from_shape_fn((4, 8), |_| rng.random_range(-PI..PI)),
            config,
        )
        .unwrap();
        let got = gd_weighted_error(&mag, &est, &reference).unwrap();
        let mut expected = 0.0;
        for t in 0..4 {
            for f in 0..8 {
                let d = est.data()[(t, f)] - reference.data()[(t, f)];
                expected += mag.data()[(t, f + 1)] * (1.0 - d.cos()) / 2.0;
            }
        }
        assert!((got - expected).abs() < 1e-12);
        assert!(got >= 0.0);
    }

    #[test]
    fn gd_weighted_error_invariant_under_two_pi_shift() {
        // shifting either group delay by 2*pi cannot change the cosine,
        // but GdSpec enforces wrapped entries, so verify at the formula
        // level through assignment-independent values near the boundary
        let config = config_with_bins(3);
        let mag = MagSpec::new(Array2::ones((1, 3)), config).unwrap();
        let a = GdSpec::new(array![[PI - 1e-9, 0.1]], config).unwrap();
        let b = GdSpec::new(array![[-PI + 1e-9, 0.1]], config).unwrap();
        let e1 = gd_weighted_error(&mag, &a, &b).unwrap();
        assert!(e1 < 1e-15, "wrapped boundary values are equivalent: {e1}");
    }
}
