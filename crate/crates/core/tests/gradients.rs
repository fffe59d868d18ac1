mod common;

use common::*;

const POINTS: u64 = 20;

fn assert_all(name: &str, f: impl Fn(u64) -> f64) {
    for seed in 0..POINTS {
        let err = f(seed);
        assert!(err < FD_TOL, "{name}: relative error {err:e} at point {seed}");
    }
}

#[test]
fn time_l1_matches_finite_differences() {
    assert_all("time l1", check_time_l1);
}

#[test]
fn mel_loss_matches_finite_differences() {
    assert_all("mel", check_mel);
}

#[test]
fn codebook_loss_terms_reach_only_their_inputs() {
    assert_all("codebook", check_codebook_partition);
}

#[test]
fn decoder_parameters_match_finite_differences() {
    assert_all("decoder", check_decoder_params);
}

#[test]
fn encoder_parameters_match_finite_differences() {
    assert_all("encoder", check_encoder_params);
}

#[test]
fn quantized_latents_match_finite_differences() {
    assert_all("quantized latents", check_quantized_input);
}

#[test]
fn straight_through_copies_adjoint_and_skips_means() {
    for seed in 0..POINTS {
        let (mismatch, mean_adjoint) = straight_through_contract(seed);
        assert_eq!(mismatch, 0.0, "point {seed}");
        assert_eq!(mean_adjoint, 0.0, "point {seed}");
    }
}

