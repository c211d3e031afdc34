//! Acceptance suite: one test per release criterion. Each test prints a
//! single `PASS:`/`FAIL:` line for its criterion (visible with
//! `cargo test --test acceptance -- --nocapture`) and asserts it.

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use mimolink::baseband::{compression_ratio, transport_frame, BitCoding, LinkConfig, Ratio};
use mimolink::channel::{combine, draw_channel, equalize, precode, transmit, ComplexMatrix};
use mimolink::golden::{check_reports, GOLDEN_NS, GOLDEN_SNRS};
use mimolink::metrics::{estimate_ber, rayleigh_qpsk_ber, sweep_ber};
use mimolink::neuro::mce::{attention_gates, fc_compress, fc_decompress, mcd_forward, mce_forward, MceConfig};
use mimolink::neuro::tensor::FeatureMap;
use mimolink::neuro::test_oracles;
use mimolink::neuro::weights::{init_weights, zero_weights, ArchConfig, Tensor};
use mimolink::neuro::{hff_forward, hfs_forward, synth::synth_pyramid, synth::SynthDistribution};
use mimolink::pipeline::transmit_pyramid;
use mimolink::channel::EquivalentSnrVector;

const SEED: u64 = 1;

fn report(criterion: &str, pass: bool, detail: &str) {
    if pass {
        println!("PASS: {criterion}");
    } else {
        println!("FAIL: {criterion} — {detail}");
    }
    assert!(pass, "{criterion}: {detail}");
}

fn rand_map(rng: &mut ChaCha12Rng, c: usize, h: usize, w: usize) -> FeatureMap {
    let mut m = FeatureMap::zeros(c, h, w);
    for v in m.data.iter_mut() {
        *v = rng.gen_range(-2.0f32..2.0);
    }
    m
}

fn max_abs_diff(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (*x as f64 - *y as f64).abs())
        .fold(0.0, f64::max)
}

#[test]
fn criterion_reference_ber_table() {
    let reports = sweep_ber(&GOLDEN_NS, &GOLDEN_SNRS, 10_000_000, SEED);
    let checks = check_reports(&reports, false);
    let failures: Vec<String> = checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| {
            format!(
                "N={} SNR={} s{}: measured {:.4e} ({})",
                c.cell.n, c.cell.snr_db, c.cell.stream, c.measured, c.tolerance
            )
        })
        .collect();
    report(
        "reference BER table reproduced at >= 1e7 bits per cell",
        failures.is_empty(),
        &failures.join("; "),
    );
}

#[test]
fn criterion_closed_form_single_antenna() {
    let mut worst = (0.0f64, String::new());
    for (i, &snr) in GOLDEN_SNRS.iter().enumerate() {
        let r = estimate_ber(1, snr, 10_000_000, SEED.wrapping_add(i as u64));
        let analytic = rayleigh_qpsk_ber(snr);
        let dev = (r.per_stream_ber[0] - analytic).abs();
        let sigmas = dev / r.ensemble_se[0];
        if sigmas > worst.0 {
            worst = (
                sigmas,
                format!(
                    "SNR={snr} dB: measured {:.5e}, closed form {:.5e}, {:.2} se",
                    r.per_stream_ber[0], analytic, sigmas
                ),
            );
        }
    }
    report(
        "N=1 BER matches the Rayleigh QPSK closed form within 3 standard errors",
        worst.0 <= 3.0,
        &worst.1,
    );
}

#[test]
fn criterion_compression_ratio_exact() {
    let cases = [
        (4u32, 96usize, Ratio::new(1, 16)),
        (2, 24, Ratio::new(1, 128)),
        (8, 48, Ratio::new(1, 16)),
        (4, 48, Ratio::new(1, 32)),
        (2, 96, Ratio::new(1, 32)),
    ];
    let mut ok = true;
    let mut detail = String::new();
    for (m, c, expected) in cases {
        let cfg = LinkConfig {
            n_antennas: 2,
            quant_bits: m,
            feature_channels: c,
            image_height: 64,
            image_width: 64,
            eps_singular: 1e-12,
            bit_coding: BitCoding::Natural,
        };
        let got = compression_ratio(&cfg);
        if got != expected {
            ok = false;
            detail = format!("m={m} C={c}: got {}/{}", got.num, got.den);
        }
    }
    report("compression ratio m*C/6144 is exact for the documented settings", ok, &detail);
}

#[test]
fn criterion_volume_reduction() {
    let ratio = mimolink::neuro::fusion::volume_reduction_ratio();
    let reduction = 1.0 - 1.0 / ratio;
    report(
        "fusion stage reduces pyramid volume by 21.25x (> 95%)",
        (ratio - 21.25).abs() < 1e-12 && reduction > 0.95,
        &format!("ratio {ratio}, reduction {reduction}"),
    );
}

#[test]
fn criterion_noiseless_round_trip() {
    let mut ok = true;
    let mut detail = String::new();
    for &n in &[1usize, 2, 4] {
        for &m in &[2u32, 4, 8] {
            let cfg = LinkConfig {
                n_antennas: n,
                quant_bits: m,
                feature_channels: 48,
                image_height: 64,
                image_width: 64,
                eps_singular: 1e-12,
                bit_coding: BitCoding::Gray,
            };
            let mut rng = ChaCha12Rng::seed_from_u64(2_000 + n as u64 * 16 + m as u64);
            let p_c = rand_map(&mut rng, 48, 4, 4);
            // 300 dB SNR: noise variance 1e-30, far below any decision margin
            let ch = draw_channel(n, 300.0, &mut rng);
            let (_rx, frame) = transport_frame(&p_c, &ch, &cfg, 77, 0).unwrap();
            let errors: u64 = frame.bit_errors.iter().sum();
            let w_bound = f64::powi(2.0, 1 - m as i32);
            if errors != 0 || frame.w_stats.max_abs > w_bound {
                ok = false;
                detail = format!(
                    "N={n} m={m}: {errors} bit errors, max|W| {:.3e} vs bound {:.3e}",
                    frame.w_stats.max_abs, w_bound
                );
            }
        }
    }
    report(
        "noiseless round trip is bit-exact for N in {1,2,4}, m in {2,4,8} with max|W| <= 2^(1-m)",
        ok,
        &detail,
    );
}

#[test]
fn criterion_svd_invariants() {
    let mut worst = 0.0f64;
    let mut rng = ChaCha12Rng::seed_from_u64(13);
    for &n in &[1usize, 2, 4, 8] {
        for _ in 0..10_000 {
            let ch = draw_channel(n, 10.0, &mut rng);
            let eye = DMatrix::<Complex<f64>>::identity(n, n);
            let uu = &ch.u * ch.u.adjoint();
            let vv = &ch.v * ch.v.adjoint();
            let sigma = DMatrix::<Complex<f64>>::from_fn(n, n, |i, j| {
                if i == j {
                    Complex::new(ch.sigma[i], 0.0)
                } else {
                    Complex::new(0.0, 0.0)
                }
            });
            let recon = &ch.u * sigma * ch.v.adjoint();
            for e in (&uu - &eye).iter().chain((&vv - &eye).iter()).chain((&recon - &ch.h).iter()) {
                worst = worst.max(e.norm());
            }
            for w in ch.sigma.windows(2) {
                assert!(w[0] >= w[1] && w[1] >= 0.0, "singular values not sorted");
            }
        }
    }
    report(
        "SVD invariants (unitarity, reconstruction, ordering) hold to 1e-10 over 1e4 draws per N",
        worst <= 1e-10,
        &format!("worst deviation {worst:.3e}"),
    );
}

#[test]
fn criterion_precode_equalize_identity() {
    let mut worst = 0.0f64;
    let mut rng = ChaCha12Rng::seed_from_u64(14);
    for &n in &[1usize, 2, 4, 8] {
        for _ in 0..200 {
            let ch = draw_channel(n, 300.0, &mut rng);
            let xp = ComplexMatrix::from_fn(n, 16, |_, _| {
                Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let x = precode(&xp, &ch).unwrap();
            let y = transmit(&x, &ch, &mut rng).unwrap();
            let yp = combine(&y, &ch).unwrap();
            let eq = equalize(&yp, &ch, 1e-12).unwrap();
            assert!(eq.degenerate.iter().all(|d| !d));
            for e in (&eq.symbols - &xp).iter() {
                worst = worst.max(e.norm());
            }
        }
    }
    report(
        "precode -> channel -> combine -> equalize chain is the identity to 1e-9",
        worst <= 1e-9,
        &format!("worst deviation {worst:.3e}"),
    );
}

#[test]
fn criterion_operator_oracles() {
    let mut rng = ChaCha12Rng::seed_from_u64(15);
    let mut tensors = 0usize;
    let mut worst = 0.0f64;
    for _ in 0..120 {
        let c = rng.gen_range(1..=6);
        let h = 2 * rng.gen_range(1..=4);
        let w = 2 * rng.gen_range(1..=4);
        let x = rand_map(&mut rng, c, h, w);
        tensors += 1;

        // conv (1x1 and 3x3, stride 1 and 2)
        let oc = rng.gen_range(1..=6);
        for (k, stride) in [(1usize, 1usize), (3, 1), (3, 2)] {
            let mut kernel = Tensor::zeros(vec![oc, c, k, k]);
            for v in kernel.data.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let bias: Vec<f32> = (0..oc).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let got = mimolink::neuro::ops::conv2d(&x, &kernel, &bias, stride, k / 2).unwrap();
            let want = test_oracles::conv2d_reference(&x, &kernel, &bias, stride, k / 2);
            worst = worst.max(max_abs_diff(&got.data, &want.data));
        }

        // batchnorm
        let mean: Vec<f32> = (0..c).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let var: Vec<f32> = (0..c).map(|_| rng.gen_range(0.1..2.0)).collect();
        let gamma: Vec<f32> = (0..c).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let beta: Vec<f32> = (0..c).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let stats = mimolink::neuro::ops::BnStats {
            mean: &mean,
            var: &var,
            gamma: &gamma,
            beta: &beta,
        };
        let got = mimolink::neuro::ops::batchnorm_infer(&x, &stats).unwrap();
        let want = test_oracles::batchnorm_reference(&x, &mean, &var, &gamma, &beta);
        worst = worst.max(max_abs_diff(&got.data, &want));

        // squeeze-excite
        let hidden = (c / 2).max(1);
        let mut fc1 = Tensor::zeros(vec![hidden, c]);
        let mut fc2 = Tensor::zeros(vec![c, hidden]);
        for v in fc1.data.iter_mut().chain(fc2.data.iter_mut()) {
            *v = rng.gen_range(-1.0..1.0);
        }
        let b1: Vec<f32> = (0..hidden).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b2: Vec<f32> = (0..c).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let got = mimolink::neuro::ops::se_block(&x, &fc1, &b1, &fc2, &b2).unwrap();
        let want = test_oracles::se_reference(&x, &fc1, &b1, &fc2, &b2);
        worst = worst.max(max_abs_diff(&got.data, &want));

        // bilinear upsample + max pool
        let got = mimolink::neuro::ops::bilinear_upsample(&x);
        let want = test_oracles::bilinear_reference(&x);
        worst = worst.max(max_abs_diff(&got.data, &want));
        let got = mimolink::neuro::ops::max_pool2(&x).unwrap();
        let want = test_oracles::max_pool_reference(&x);
        worst = worst.max(max_abs_diff(&got.data, &want));

        // per-pixel FC
        let oc = rng.gen_range(1..=6);
        let mut wt = Tensor::zeros(vec![oc, c]);
        for v in wt.data.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let bias: Vec<f32> = (0..oc).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let got = mimolink::neuro::ops::fc_per_pixel(&x, &wt, &bias).unwrap();
        let want = test_oracles::fc_per_pixel_reference(&x, &wt, &bias);
        worst = worst.max(max_abs_diff(&got.data, &want));
    }
    report(
        "operators match independent references to 1e-5 on >= 100 random tensors",
        tensors >= 100 && worst <= 1e-5,
        &format!("{tensors} tensors, worst deviation {worst:.3e}"),
    );
}

#[test]
fn criterion_structural_contracts() {
    let arch = ArchConfig { n_antennas: 2, mce_depth: 6, compressed_channels: 48 };
    let bundle = init_weights(99, &arch).unwrap();
    let pyr = synth_pyramid(64, 64, 5, SynthDistribution::StandardNormal).unwrap();
    let mut ok = true;
    let mut detail = String::new();

    // fuse/split shape contract
    let fused = hff_forward(&pyr, &bundle).unwrap();
    if (fused.channels, fused.height, fused.width) != (256, 4, 4) {
        ok = false;
        detail = format!("fused shape {}x{}x{}", fused.channels, fused.height, fused.width);
    }
    let back = hfs_forward(&fused, &bundle).unwrap();
    for (a, b) in pyr.levels().iter().zip(back.levels().iter()) {
        if (a.channels, a.height, a.width) != (b.channels, b.height, b.width) {
            ok = false;
            detail = "split pyramid shape mismatch".to_string();
        }
    }

    // encoder/decoder stacks preserve shape through all 6 blocks
    let cfg = MceConfig::from_arch(&arch);
    let snrs = EquivalentSnrVector { values_db: vec![12.0, 3.0] };
    let enc = mce_forward(&fused, &snrs, &bundle, &cfg).unwrap();
    let dec = mcd_forward(&enc, &snrs, &bundle, &cfg).unwrap();
    if (enc.channels, enc.height, enc.width) != (256, 4, 4)
        || (dec.channels, dec.height, dec.width) != (256, 4, 4)
    {
        ok = false;
        detail = "encoder/decoder stack changed the shape".to_string();
    }

    // compress/decompress shape contract
    let comp = fc_compress(&enc, &bundle, 48).unwrap();
    let decomp = fc_decompress(&comp, &bundle).unwrap();
    if comp.channels != 48 || decomp.channels != 256 {
        ok = false;
        detail = "compress/decompress channel contract broken".to_string();
    }

    // attention gates are proper sigmoid outputs
    let gates = attention_gates(&bundle, "mce.block0", &fused, &snrs, &cfg).unwrap();
    if !gates.iter().all(|g| (0.0..=1.0).contains(g)) {
        ok = false;
        detail = "attention gate outside [0, 1]".to_string();
    }

    // zeroed trunk weights make every block the exact identity
    let zeroed = zero_weights(&arch).unwrap();
    let ident = mce_forward(&fused, &snrs, &zeroed, &cfg).unwrap();
    if ident.data != fused.data {
        ok = false;
        detail = "residual path is not an exact identity under zero trunk weights".to_string();
    }

    report("structural contracts (shapes, gates, residual identity)", ok, &detail);
}

#[test]
fn criterion_determinism() {
    // same seed => identical sweep, regardless of worker count
    let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = pool1.install(|| sweep_ber(&[1, 2], &[0.0, 10.0], 200_000, SEED));
    let b = pool4.install(|| sweep_ber(&[1, 2], &[0.0, 10.0], 200_000, SEED));
    let c = pool4.install(|| sweep_ber(&[1, 2], &[0.0, 10.0], 200_000, SEED));
    let ja = serde_json::to_vec(&a).unwrap();
    let jb = serde_json::to_vec(&b).unwrap();
    let jc = serde_json::to_vec(&c).unwrap();

    // same seed => identical end-to-end transport
    let arch = ArchConfig { n_antennas: 2, mce_depth: 6, compressed_channels: 48 };
    let bundle = init_weights(3, &arch).unwrap();
    let pyr = synth_pyramid(64, 64, 4, SynthDistribution::StandardNormal).unwrap();
    let link = LinkConfig {
        n_antennas: 2,
        quant_bits: 4,
        feature_channels: 48,
        image_height: 64,
        image_width: 64,
        eps_singular: 1e-12,
        bit_coding: BitCoding::Natural,
    };
    let cfg = MceConfig::from_arch(&arch);
    let t1 = pool1
        .install(|| transmit_pyramid(&pyr, &bundle, &link, &cfg, 5.0, 21, 0))
        .unwrap();
    let t2 = pool4
        .install(|| transmit_pyramid(&pyr, &bundle, &link, &cfg, 5.0, 21, 0))
        .unwrap();
    let e1 = serde_json::to_vec(&t1.distortion).unwrap();
    let e2 = serde_json::to_vec(&t2.distortion).unwrap();
    let recon_equal = t1
        .reconstructed
        .levels()
        .iter()
        .zip(t2.reconstructed.levels().iter())
        .all(|(x, y)| x.data == y.data);

    report(
        "results are byte-identical across repeated runs and worker counts",
        ja == jb && jb == jc && e1 == e2 && recon_equal,
        "outputs differ",
    );
}
