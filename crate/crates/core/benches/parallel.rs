//! Sequential against data-parallel execution of the two hot paths.

use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use excitonbench_core::bathnoise::{ChannelLayout, NoiseRecipe};
use excitonbench_core::ensemble::{self, EnsembleProblem};
use excitonbench_core::exec::ExecPolicy;
use excitonbench_core::grid::TimeGrid;
use excitonbench_core::heom::{HeomBath, HeomOperator, HierarchyLayout, HierarchyState};
use excitonbench_core::model::units::{hz, Frame, FrameMap};
use excitonbench_core::model::{DensityMatrix, ExcitonSystem, SpectralDensity, TetramerGeometry};

const POLICIES: [(&str, ExecPolicy); 2] = [("sequential", ExecPolicy::Sequential), ("parallel", ExecPolicy::Parallel)];

fn ensemble_average(c: &mut Criterion) {
    let sys = ExcitonSystem::tetramer(&TetramerGeometry::default(), FrameMap::default()).unwrap();
    let sd = SpectralDensity::drude_lorentz(hz(2.0), hz(50.0)).unwrap();
    let problem = EnsembleProblem {
        h_sys: sys.hamiltonian(Frame::Nmr),
        recipe: NoiseRecipe::new(sd, 1e-3, hz(1.0), None, 1.0, ChannelLayout::FourSite).unwrap(),
        rho0: DensityMatrix::site(0).unwrap(),
        grid: TimeGrid::spanning(2e-3, 21).unwrap(),
        slice_dt: None,
    };
    let mut g = c.benchmark_group("ensemble_average");
    g.sample_size(10);
    for (name, policy) in POLICIES {
        g.bench_with_input(BenchmarkId::new(name, 32), &policy, |b, &p| {
            b.iter(|| ensemble::ensemble_average(black_box(&problem), 32, 1, p).unwrap())
        });
    }
    g.finish();
}

fn heom_apply(c: &mut Criterion) {
    let sys = ExcitonSystem::tetramer(&TetramerGeometry::default(), FrameMap::default()).unwrap();
    let bath = HeomBath::uniform(hz(2.0), hz(50.0), 1e-3).unwrap();
    let mut g = c.benchmark_group("heom_apply");
    for depth in [6usize, 10] {
        let layout = Arc::new(HierarchyLayout::new(depth).unwrap());
        let op = HeomOperator::new(&sys.hamiltonian(Frame::Nmr), &bath, layout.clone());
        let state = HierarchyState::from_density(&DensityMatrix::site(0).unwrap(), layout);
        let mut out = state.blocks.clone();
        for (name, policy) in POLICIES {
            g.bench_with_input(BenchmarkId::new(name, depth), &policy, |b, &p| {
                b.iter(|| op.apply(black_box(&state.blocks), &mut out, p))
            });
        }
    }
    g.finish();
}

criterion_group!(benches, ensemble_average, heom_apply);
criterion_main!(benches);
