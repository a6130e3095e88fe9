use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use treemilo::cart::{fit_cart, CartConfig};
use treemilo::formulations::{BuildOptions, Formulation, FormulationKind};
use treemilo::separation::{separate_fractional, separate_integral, CutKind, CutStrategy, StrategyKind};
use treemilo::TreeTopology;
use treemilo_bench::dataset;

fn build(c: &mut Criterion) {
    let d = dataset("monk1");
    let topo = TreeTopology::new(3).unwrap();
    let mut g = c.benchmark_group("build_monk1_h3");
    for kind in FormulationKind::ALL {
        g.bench_function(kind.name(), |b| {
            b.iter(|| Formulation::build(kind, topo, black_box(&d), &BuildOptions::default()).unwrap())
        });
    }
    g.finish();
}

fn separation(c: &mut Criterion) {
    let d = dataset("monk1");
    let topo = TreeTopology::new(4).unwrap();
    let form = Formulation::cut2(topo, &d, CutStrategy::lazy()).unwrap();
    let tree = fit_cart(&d, &CartConfig::new(4, false)).unwrap();
    let integral = form.encode_tree(&tree);
    // A fractional point: every q halved.
    let mut fractional = integral.clone();
    for i in 0..d.n_rows() {
        for v in topo.vertices() {
            fractional[form.index.q(i, v).0] *= 0.5;
        }
    }
    let mut g = c.benchmark_group("separation_monk1_h4");
    g.bench_function("integral_cut2", |b| {
        b.iter(|| separate_integral(black_box(&integral), CutKind::Cut2, &form.index, 1e-4))
    });
    for s in [StrategyKind::Frac1, StrategyKind::Frac2, StrategyKind::Frac3] {
        g.bench_function(s.name(), |b| {
            b.iter(|| separate_fractional(black_box(&fractional), CutKind::Cut2, &form.index, s, 1e-4))
        });
    }
    g.finish();
}

fn cart(c: &mut Criterion) {
    let d = dataset("kr-vs-kp");
    let mut g = c.benchmark_group("cart_kr_vs_kp");
    for h in [2, 5] {
        g.bench_function(format!("h{h}"), |b| b.iter(|| fit_cart(black_box(&d), &CartConfig::new(h, false)).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, build, separation, cart);
criterion_main!(benches);
