//! Parallel-vs-sequential comparison for the hot sweeps: batch generation,
//! batch detection under substitution, and alignment-score evaluation.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use tokmark_core::bits::BitVec;
use tokmark_core::channel::{apply_substitution, SubstitutionMap};
use tokmark_core::exec::{map_indexed, ExecMode};
use tokmark_core::prc::align::{llr_score, AlignModel};
use tokmark_core::rng::derive_rng;
use tokmark_core::watermark::{wm_detect, wm_gen, wm_generate, DetectMode, WmParams};

fn modes() -> Vec<ExecMode> {
    vec![ExecMode::Sequential, ExecMode::Parallel]
}

fn bench_generation(c: &mut Criterion) {
    let model = tokmark_core::model::ModelSpec::new(
        tokmark_core::model::ModelKind::UniformPair,
        tokmark_core::token::Vocab::new(3).unwrap(),
        4096,
    )
    .unwrap();
    let key = wm_gen(
        WmParams::new(4, 512, 4096, 3),
        1e-6,
        tokmark_core::prc::PrcVariant::Oracle {
            num_codewords: 8,
            align: None,
        },
        1,
    )
    .unwrap();
    let mut group = c.benchmark_group("batch_generation_64x4096");
    for mode in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(mode.name()), &mode, |b, &m| {
            b.iter(|| {
                map_indexed(m, 64, |i| {
                    wm_generate(&key, &model, "bench", i as u64).unwrap().0.len()
                })
            })
        });
    }
    group.finish();
}

fn bench_detection(c: &mut Criterion) {
    let model = tokmark_core::model::ModelSpec::new(
        tokmark_core::model::ModelKind::UniformPair,
        tokmark_core::token::Vocab::new(3).unwrap(),
        4096,
    )
    .unwrap();
    let key = wm_gen(
        WmParams::new(4, 512, 4096, 3),
        1e-6,
        tokmark_core::prc::PrcVariant::Oracle {
            num_codewords: 8,
            align: None,
        },
        2,
    )
    .unwrap();
    let inputs: Vec<Vec<tokmark_core::token::Token>> = (0..64u64)
        .map(|i| {
            let (tokens, _) = wm_generate(&key, &model, "bench", i).unwrap();
            let mut rng = derive_rng(i, &[7]);
            apply_substitution(
                &tokens,
                &SubstitutionMap::CyclicShift { vocab_size: 3 },
                0.2,
                &mut rng,
            )
            .unwrap()
        })
        .collect();
    let mut group = c.benchmark_group("batch_detection_64x4096");
    for mode in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(mode.name()), &mode, |b, &m| {
            b.iter(|| {
                map_indexed(m, inputs.len(), |i| {
                    wm_detect(&key, &inputs[i], DetectMode::Fast).unwrap().detected
                })
            })
        });
    }
    group.finish();
}

fn bench_alignment(c: &mut Criterion) {
    let model = AlignModel {
        del_rate: 0.5,
        err_rate: 0.3,
    };
    let mut rng = derive_rng(3, &[]);
    let pairs: Vec<(BitVec, BitVec)> = (0..64)
        .map(|_| {
            (
                BitVec::random(&mut rng, 512),
                BitVec::random(&mut rng, 1024),
            )
        })
        .collect();
    let mut group = c.benchmark_group("alignment_llr_64x512in1024");
    for mode in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(mode.name()), &mode, |b, &m| {
            b.iter(|| {
                map_indexed(m, pairs.len(), |i| {
                    llr_score(&pairs[i].0, &pairs[i].1, &model)
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_generation, bench_detection, bench_alignment);
criterion_main!(benches);
