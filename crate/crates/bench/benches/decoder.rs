use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion, Throughput};
use dragoncast::coding::DecoderState;
use dragoncast::galois::Field;
use dragoncast_bench::{source_packets, windowed_stream};

fn decode(c: &mut Criterion) {
    let mut group = c.benchmark_group("decode_generation");
    for (field, window) in [(Field::Gf2, 20), (Field::Gf2, 200), (Field::Gf256, 20), (Field::Gf256, 200)] {
        let packets = source_packets(200, 256, 1);
        let stream = windowed_stream(field, &packets, window, 2);
        group.throughput(Throughput::Elements(stream.len() as u64));
        let id = BenchmarkId::new(format!("gf{}", field.order()), window);
        group.bench_with_input(id, &stream, |b, stream| {
            b.iter_batched(
                || DecoderState::new(field, 200, 256),
                |mut dec| {
                    for p in stream {
                        let _ = dec.ingest(p);
                    }
                    dec
                },
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

fn field_kernels(c: &mut Criterion) {
    let src = vec![0x5Au8; 1024];
    let mut dst = vec![0xA5u8; 1024];
    c.bench_function("gf256_mul_add_1k", |b| b.iter(|| Field::Gf256.mul_add_slice(&mut dst, &src, 0x53)));
}

criterion_group!(benches, decode, field_kernels);
criterion_main!(benches);
