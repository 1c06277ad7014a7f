use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use dqloam::descriptor::extract_descriptors;
use dqloam::exec;
use dqloam::map::LocalMaps;
use dqloam::pipeline::{extract_features, PipelineConfig};
use dqloam::synth::box_room_scene;

fn bench(c: &mut Criterion) {
    let scans = box_room_scene(2, 0.01, 7).generate().expect("box room is observable");
    let cfg = PipelineConfig::default();
    let cloud = &scans[1].0.cloud;
    let mut maps = LocalMaps::default();
    let first = extract_features(&scans[0].0.cloud, &cfg).unwrap();
    maps.integrate_scan(&scans[0].1.pose, &first, &cfg.map);
    let current = extract_features(cloud, &cfg).unwrap();
    let init = scans[1].1.pose;

    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut group = c.benchmark_group("parallel_vs_sequential");
    group.sample_size(20);
    let mut counts = vec![1, cores];
    counts.dedup();
    for threads in counts {
        group.bench_with_input(BenchmarkId::new("descriptors", threads), &threads, |b, &n| {
            exec::with_threads(Some(n), || b.iter(|| extract_descriptors(cloud, &cfg.descriptor)))
        });
        group.bench_with_input(BenchmarkId::new("correspondences", threads), &threads, |b, &n| {
            exec::with_threads(Some(n), || b.iter(|| maps.find_correspondences(&current, &init, &cfg.map).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
