use std::hint::black_box;

use aaa_core::feedback::{offline_path, ExpertFrame};
use aaa_core::geometry::{giou, iou};
use aaa_core::harness::generate_adversarial;
use aaa_core::hedge::{init_weights, update_weights};
use aaa_core::{run, AnchorRecord, BoundingBox, EngineConfig, SegmentLosses, SyntheticScenario};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn geometry(c: &mut Criterion) {
    let a = BoundingBox::new(10.0, 12.0, 40.0, 30.0).unwrap();
    let b = BoundingBox::new(25.0, 20.0, 35.0, 45.0).unwrap();
    c.bench_function("iou", |bn| bn.iter(|| iou(black_box(&a), black_box(&b))));
    c.bench_function("giou", |bn| bn.iter(|| giou(black_box(&a), black_box(&b))));
}

fn hedge(c: &mut Criterion) {
    let mut group = c.benchmark_group("update_weights");
    for n in [4usize, 12, 64] {
        let w = init_weights(n).unwrap();
        let losses = SegmentLosses((0..n).map(|i| (i % 7) as f64 * 0.3).collect());
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bn, _| {
            bn.iter(|| update_weights(black_box(&w), black_box(&losses), 0.4).unwrap())
        });
    }
    group.finish();
}

fn offline(c: &mut Criterion) {
    let mut group = c.benchmark_group("offline_path");
    for len in [10usize, 100] {
        let trace = generate_adversarial(&SyntheticScenario::new(len + 1, 12, len, 0.1, 1)).unwrap();
        let frames: Vec<ExpertFrame> = trace.frames[1..]
            .iter()
            .map(|o| ExpertFrame {
                boxes: o.boxes.clone(),
                features: o.features.clone(),
            })
            .collect();
        let anchor = AnchorRecord {
            q: 2,
            frame: len + 1,
            bbox: frames[len - 1].boxes[0],
            best_expert: Some(0),
            similarity: 0.9,
        };
        let h = &trace.header;
        group.bench_with_input(BenchmarkId::from_parameter(len), &len, |bn, _| {
            bn.iter(|| offline_path(&frames, &h.initial_box, &h.template, &anchor, &h.template).unwrap())
        });
    }
    group.finish();
}

fn engine(c: &mut Criterion) {
    let trace = generate_adversarial(&SyntheticScenario::new(2000, 12, 200, 0.1, 2)).unwrap();
    let h = &trace.header;
    c.bench_function("engine_run_2000x12", |bn| {
        bn.iter(|| {
            run(
                h.initial_box,
                h.template.clone(),
                black_box(&trace.frames),
                EngineConfig { theta: 0.69, seed: 0 },
            )
            .unwrap()
        })
    });
}

criterion_group!(benches, geometry, hedge, offline, engine);
criterion_main!(benches);
