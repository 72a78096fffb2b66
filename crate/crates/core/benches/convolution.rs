use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use spectral_control::fastconv::{ConvMode, StreamConvolver};
use spectral_control::filters::FilterBank;

const STEPS: usize = 4096;

fn stream(c: &mut Criterion) {
    let mut group = c.benchmark_group("stream_convolution");
    group.sample_size(10);
    group.throughput(Throughput::Elements(STEPS as u64));
    for m in [64, 256, 1024] {
        let bank = FilterBank::new(m, 0.05, 8).unwrap();
        for (label, mode) in [("direct", ConvMode::Direct), ("fast", ConvMode::Fast)] {
            group.bench_with_input(BenchmarkId::new(label, m), &mode, |b, &mode| {
                b.iter(|| {
                    let mut conv = StreamConvolver::new(&bank, 4, mode).unwrap();
                    let mut acc = 0.0;
                    for t in 0..STEPS {
                        let w = [(t as f64 * 0.1).sin(), 0.5, -0.25, (t as f64).cos()];
                        conv.push(&w).unwrap();
                        for i in 0..conv.h() {
                            acc += conv.query_slice(i).unwrap()[0];
                        }
                    }
                    acc
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, stream);
criterion_main!(benches);
