use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use graphspde_bench::random_laplacian;
use graphspde_core::kernels::{chebyshev_apply, chebyshev_fit, lambda_max_bound, LambdaBound};
use graphspde_core::rng;
use graphspde_core::KernelSpec;
use std::hint::black_box;

fn order_sweep(c: &mut Criterion) {
    let l = random_laplacian(4000, 10.0, 1);
    let bound = lambda_max_bound(&l, LambdaBound::Gershgorin);
    let v = rng::normal_vec(&mut rng::rng_from_seed(2), l.dim());
    let mut group = c.benchmark_group("chebyshev_order");
    for m in [25usize, 50, 100, 200] {
        let filter = chebyshev_fit(&KernelSpec::matern(2.5, 1.0), m, bound).unwrap();
        group.throughput(Throughput::Elements(m as u64));
        group.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, _| {
            b.iter(|| chebyshev_apply(&l, &filter, black_box(&v)).unwrap())
        });
    }
    group.finish();
}

fn edge_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("chebyshev_edges");
    for n in [2000usize, 4000, 8000, 16000] {
        let l = random_laplacian(n, 10.0, n as u64);
        let bound = lambda_max_bound(&l, LambdaBound::Gershgorin);
        let filter = chebyshev_fit(&KernelSpec::matern(2.5, 1.0), 50, bound).unwrap();
        let v = rng::normal_vec(&mut rng::rng_from_seed(3), n);
        group.throughput(Throughput::Elements(l.nnz() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| chebyshev_apply(&l, &filter, black_box(&v)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, order_sweep, edge_sweep);
criterion_main!(benches);
