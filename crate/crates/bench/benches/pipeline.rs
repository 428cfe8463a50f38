use criterion::{criterion_group, criterion_main, Criterion};
use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use specmap_core::adapt::{build_spectral_mapping, transform};
use specmap_core::gan::{discriminator_loss_grads, Discriminator, Generator, ModelDims};
use specmap_core::metrics::roc;
use specmap_core::spectral::{features_from_records, FeatureVector};
use specmap_core::ChannelRecord;

const W: usize = 256;
const CHANNELS: usize = 4;
const WINDOWS: usize = 16;

/// Tonal response buried in noise, one record per channel.
fn synthetic_records(seed: u64, tone_hz: [f64; 3]) -> Vec<ChannelRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs = 256.0;
    let samples = W * WINDOWS;
    (0..CHANNELS)
        .map(|c| ChannelRecord {
            channel_id: c,
            samples: (0..samples)
                .map(|i| {
                    let t = i as f64 / fs;
                    let tones: f64 = tone_hz
                        .iter()
                        .enumerate()
                        .map(|(k, &f)| ((k + c + 1) as f64).recip() * (2.0 * std::f64::consts::PI * f * t).sin())
                        .sum();
                    tones + 0.3 * (rng.random::<f64>() - 0.5)
                })
                .collect(),
            sampling_rate_hz: fs,
        })
        .collect()
}

fn feature_set(seed: u64, tone_hz: [f64; 3]) -> Vec<FeatureVector> {
    features_from_records(&synthetic_records(seed, tone_hz), W, 10.0).unwrap()
}

fn batch_matrix(features: &[FeatureVector], batch: usize) -> Array2<f64> {
    let dim = features[0].len();
    Array2::from_shape_fn((batch, dim), |(i, j)| features[i % features.len()].flat()[j])
}

fn bench_features(c: &mut Criterion) {
    let records = synthetic_records(1, [21.0, 62.0, 96.0]);
    c.bench_function("features_from_records_16x4xW256", |b| {
        b.iter(|| features_from_records(&records, W, 10.0).unwrap())
    });
}

fn bench_mapping(c: &mut Criterion) {
    let source = feature_set(2, [21.0, 62.0, 96.0]);
    let target = feature_set(3, [29.0, 86.0, 138.0]);
    let mapping = build_spectral_mapping(&source, &target, 1e-12).unwrap();
    let probe = target[0].clone();

    c.bench_function("build_spectral_mapping_16_windows", |b| {
        b.iter(|| build_spectral_mapping(&source, &target, 1e-12).unwrap())
    });
    c.bench_function("transform_one_feature", |b| {
        b.iter(|| transform(&mapping, &probe, None).unwrap())
    });
}

fn bench_discriminator(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let dims = ModelDims::new(W, CHANNELS, 64, 128, 100, 25).unwrap();
    let d = Discriminator::new(dims.clone(), (0..CHANNELS).collect(), &mut rng).unwrap();
    let real = batch_matrix(&feature_set(5, [21.0, 62.0, 96.0]), 32);
    let fake = batch_matrix(&feature_set(6, [30.0, 70.0, 110.0]), 32);

    c.bench_function("discriminator_forward_batch32", |b| {
        b.iter(|| d.forward_batch(&real))
    });
    c.bench_function("discriminator_train_grads_batch32", |b| {
        b.iter(|| {
            let (p_real, tape_real) = d.forward_batch(&real);
            let (p_fake, tape_fake) = d.forward_batch(&fake);
            let (g_real, g_fake) =
                discriminator_loss_grads(p_real.as_slice().unwrap(), p_fake.as_slice().unwrap());
            let (mut grads, _) = d.backward(tape_real, &Array1::from_vec(g_real));
            let (fake_grads, _) = d.backward(tape_fake, &Array1::from_vec(g_fake));
            grads.add(&fake_grads);
            grads
        })
    });
}

fn bench_generator(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g = Generator::new(100, W / 2 * CHANNELS, 10.0, &mut rng);
    let latent = Generator::sample_latent(&mut rng, 32, 100);

    c.bench_function("generator_forward_batch32", |b| {
        b.iter(|| g.forward_batch(&latent))
    });
}

fn bench_roc(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let healthy: Vec<f64> = (0..5_000).map(|_| rng.random::<f64>()).collect();
    let damage: Vec<f64> = (0..5_000).map(|_| rng.random::<f64>() + 0.3).collect();

    c.bench_function("roc_5k_vs_5k", |b| {
        b.iter(|| roc(&healthy, &damage).unwrap())
    });
}

criterion_group!(
    benches,
    bench_features,
    bench_mapping,
    bench_discriminator,
    bench_generator,
    bench_roc
);
criterion_main!(benches);
