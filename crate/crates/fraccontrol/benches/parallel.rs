use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;

use fraccontrol::biorthogonal::MomentFamily;
use fraccontrol::exec::{self, Mode};
use fraccontrol::experiments::{cost_sweep, SweepConfig};
use fraccontrol::simulator::evolve;
use fraccontrol::synthesis::{build_v, moment_coeffs, ControlSignal, ModalState};
use fraccontrol::{FracModel, ModelKind};

const MODES: [(Mode, &str); 2] = [(Mode::Sequential, "sequential"), (Mode::Parallel, "parallel")];

fn heat() -> FracModel {
    FracModel::new(0.75, ModelKind::Heat).unwrap()
}

fn v_grid(c: &mut Criterion) {
    let m = heat();
    let fam = MomentFamily::new(&m, 0.3, 0.5, 2000, 40).unwrap();
    let y0 = ModalState::eigenmode(1, 1).unwrap();
    let coeffs = moment_coeffs(&y0, 0.3, &m);
    let xs: Vec<f64> = (0..512).map(|i| 10.0 * i as f64).collect();
    let mut g = c.benchmark_group("v_grid_512");
    for (mode, name) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            exec::set_mode(mode);
            b.iter(|| exec::map_slice(&xs, |&x| build_v(x, &coeffs, &fam).map(|v| v.value)))
        });
    }
    g.finish();
}

fn simulator(c: &mut Criterion) {
    let m = heat();
    let y0 = ModalState::eigenmode(1, 1).unwrap();
    let u = ControlSignal::from_fn(0.3, (1 << 14) + 1, |t| Complex64::new((20.0 * t).sin(), 0.0)).unwrap();
    let mut g = c.benchmark_group("evolve_200_modes");
    for (mode, name) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            exec::set_mode(mode);
            b.iter(|| evolve(&y0, &u, &m, 200).unwrap())
        });
    }
    g.finish();
}

fn kronecker(c: &mut Criterion) {
    let fam = MomentFamily::new(&heat(), 0.3, 1.0, 2000, 20).unwrap();
    let mut g = c.benchmark_group("kronecker_20");
    for (mode, name) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            exec::set_mode(mode);
            b.iter(|| fam.kronecker_errors(20).unwrap())
        });
    }
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let cfg = SweepConfig::default();
    let mut g = c.benchmark_group("cost_sweep_default");
    g.sample_size(10);
    for (mode, name) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            exec::set_mode(mode);
            b.iter(|| cost_sweep(&cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, v_grid, simulator, kronecker, sweep);
criterion_main!(benches);
