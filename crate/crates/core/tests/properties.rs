use ndvq_core::codec::{
    bandwidth_to_nq, pack_bitstream, unpack_bitstream, BitstreamHeader, CodecConfig, ToyCodecModel, HEADER_FIXED_LEN,
};
use ndvq_core::quantizer::{
    decode_indices, quantize_infer, quantize_train, select_code, usage_entropy, Codebook, CodeIndexGrid,
    LatentSequence, NormalCodebook, ResidualQuantizer, UsageHistogram,
};
use ndvq_core::signal::AudioBuffer;
use proptest::collection::vec;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Plain squared-distance scan, lowest index on ties.
fn brute_force_nearest(z: &[f64], means: &[f64], dim: usize) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (k, m) in means.chunks(dim).enumerate() {
        let d: f64 = z.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best.0 {
            best = (d, k);
        }
    }
    best.1
}

fn codebook_case() -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>, f64)> {
    (1usize..=6, 1usize..=12).prop_flat_map(|(dim, k)| {
        (Just(dim), vec(-3.0f64..3.0, k * dim), vec(-3.0f64..3.0, dim), 0.05f64..5.0)
    })
}

fn quantizer_case() -> impl Strategy<Value = (usize, usize, Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>)> {
    (1usize..=4, 1usize..=6, 1usize..=4, 1usize..=5).prop_flat_map(|(dim, k, layers, frames)| {
        (
            Just(dim),
            Just(k),
            vec(vec(-2.0f64..2.0, k * dim), layers),
            vec(vec(-2.0f64..1.0, k * dim), layers),
            vec(-4.0f64..4.0, frames * dim),
        )
    })
}

fn build_rq(dim: usize, k: usize, means: &[Vec<f64>], log_sigmas: &[Vec<f64>]) -> ResidualQuantizer<f64> {
    let layers = means
        .iter()
        .zip(log_sigmas)
        .map(|(m, s)| Codebook::Normal(NormalCodebook::new(k, dim, m.clone(), s.clone()).unwrap()))
        .collect();
    ResidualQuantizer::new(layers).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn constant_sigma_selection_is_nearest_mean((dim, means, z, sigma) in codebook_case()) {
        let k = means.len() / dim;
        let cb = NormalCodebook::new(k, dim, means.clone(), vec![sigma.ln(); k * dim]).unwrap();
        prop_assert_eq!(select_code(&z, &cb), brute_force_nearest(&z, &means, dim));
    }

    #[test]
    fn residual_loop_telescopes((dim, k, means, sigmas, z) in quantizer_case(), seed in any::<u64>()) {
        let rq = build_rq(dim, k, &means, &sigmas);
        let z = LatentSequence::new(dim, z).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sampled = quantize_train(&rq, &z, &mut rng).unwrap();
        let mean_only = quantize_infer(&rq, &z).unwrap();
        for out in [&sampled, &mean_only] {
            for ((q, r), x) in out.quantized.as_slice().iter().zip(out.final_residual.as_slice()).zip(z.as_slice()) {
                prop_assert!((q + r - x).abs() < 1e-6);
            }
        }
        prop_assert_eq!(decode_indices(&rq, &mean_only.indices).unwrap(), mean_only.quantized);
    }

    #[test]
    fn bitstream_round_trip(
        bits in 1u32..=15,
        layers in 1usize..=32,
        frames in 0usize..=40,
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let k = 1usize << bits;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let indices: Vec<u32> = (0..frames * layers).map(|_| rng.gen_range(0..k as u32)).collect();
        let grid = CodeIndexGrid::new(frames, layers, indices).unwrap();
        let header = BitstreamHeader {
            sample_rate: 8000,
            strides: vec![2, 2, 2],
            latent_dim: 32,
            codebook_size: k as u16,
            n_q: layers as u8,
            frame_count: frames as u32,
        };
        let bytes = pack_bitstream(&header, &grid).unwrap();
        prop_assert_eq!(bytes.len(), HEADER_FIXED_LEN + 3 + (frames * layers * bits as usize).div_ceil(8));
        let (h, g) = unpack_bitstream(&bytes).unwrap();
        prop_assert_eq!(h, header);
        prop_assert_eq!(g, grid);
    }

    #[test]
    fn bandwidth_inverts_layer_count(n in 1usize..=32, bits in 1u32..=12, rate in prop::sample::select(vec![75.0, 150.0, 1000.0, 600.0])) {
        let bw = n as f64 * rate * bits as f64 / 1000.0;
        prop_assert_eq!(bandwidth_to_nq(bw, rate, bits, 32).unwrap(), n);
    }

    #[test]
    fn entropy_is_bounded(counts in vec(0u64..50, 2..64)) {
        prop_assume!(counts.iter().sum::<u64>() > 0);
        let k = counts.len();
        let h = usage_entropy(&UsageHistogram::from_counts(counts)).unwrap();
        prop_assert!(h >= 0.0 && h <= (k as f64).log2() + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn codec_length_arithmetic(len in 8usize..600, strides in prop::sample::select(vec![vec![2usize, 2, 2], vec![2, 3], vec![4]])) {
        let cfg = CodecConfig {
            strides: strides.clone(),
            latent_dim: 4,
            channels: vec![2; strides.len() + 1],
            codebook_size: 16,
            max_layers: 2,
            ..CodecConfig::toy()
        };
        let model = ToyCodecModel::<f64>::new(cfg.clone(), 5).unwrap();
        let product: usize = strides.iter().product();
        prop_assume!(len >= product);
        let x = AudioBuffer::new((0..len).map(|i| (i as f64 * 0.1).sin() * 0.5).collect(), cfg.sample_rate).unwrap();
        let z = model.encode(&x).unwrap();
        prop_assert_eq!(z.frames(), len.div_ceil(product));
        prop_assert_eq!(z.frames(), cfg.frames_for(len));
        prop_assert_eq!(model.decode(&z, None).unwrap().len(), z.frames() * product);
        prop_assert_eq!(model.decode(&z, Some(len)).unwrap().len(), len);
    }
}

#[test]
fn full_scale_codec_frame_rate_and_bandwidths() {
    let cfg = CodecConfig::full_scale();
    assert_eq!(cfg.stride_product(), 320);
    assert_eq!(cfg.frame_rate(), 75.0);
    assert_eq!(cfg.bits_per_code(), 10);
    for (bw, n) in [(1.5, 2), (3.0, 4), (6.0, 8), (12.0, 16), (24.0, 32)] {
        assert_eq!(bandwidth_to_nq(bw, cfg.frame_rate(), cfg.bits_per_code(), cfg.max_layers).unwrap(), n);
    }
}
