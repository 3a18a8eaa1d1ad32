use afva_core::color::{color_block, ColorConfig};
use afva_core::gist::{build_gabor_bank, gist};
use afva_core::lbp::lbp;
use afva_core::{ImageGray, ImageRgb};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gray(n: usize) -> ImageGray {
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    ImageGray::new(n, n, (0..n * n).map(|_| rng.random()).collect()).unwrap()
}

fn rgb(n: usize) -> ImageRgb {
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    ImageRgb::new(n, n, (0..n * n).map(|_| [rng.random(), rng.random(), rng.random()]).collect()).unwrap()
}

fn bench_gist(c: &mut Criterion) {
    let mut group = c.benchmark_group("gist");
    for n in [64, 128, 256] {
        let bank = build_gabor_bank(n).unwrap();
        let img = gray(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &img, |b, img| b.iter(|| gist(img, &bank).unwrap()));
    }
    group.finish();
}

fn bench_lbp(c: &mut Criterion) {
    let mut group = c.benchmark_group("lbp");
    for n in [64, 256] {
        let img = gray(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &img, |b, img| b.iter(|| lbp(img).unwrap()));
    }
    group.finish();
}

fn bench_color(c: &mut Criterion) {
    let img = rgb(256);
    c.bench_function("color/256", |b| b.iter(|| color_block(&img, &ColorConfig::default()).unwrap()));
}

criterion_group!(benches, bench_gist, bench_lbp, bench_color);
criterion_main!(benches);
