//! Library results against independent reference computations done here in
//! the test code: compensated sums, dense matrices, closed forms and
//! quadratures over the coupling frequencies.

mod common;

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use common::{c, normalize};
use num_complex::Complex64 as C64;
use pointer_limit::born::{
    born_estimate, decoherence_series, measure_trajectory, mixture_distance, COL_POINTER,
    COL_THRESHOLD,
};
use pointer_limit::dynamics::{evolve, uniform_times, EvolutionConfig};
use pointer_limit::macro_obs::{
    is_macroscopic, threshold_count, ConstantFamily, MacroTestPlan, PointerFamily,
    SingleUnitFamily,
};
use pointer_limit::model::{build_hamiltonian, initial_state, ModelSpec};
use pointer_limit::scaling::{extrapolate_limit, scan_n, threshold_shortfall, ScanPlan};
use pointer_limit::state::{
    branch_decompose, inner_product, partial_trace_particle, BasisIndex, StateVector,
};
use pointer_limit::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_state(n: usize, seed: u64) -> StateVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = (0..2usize << n)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    StateVector::from_amplitudes(n, normalize(raw)).unwrap()
}

/// Neumaier-compensated sum.
fn compensated(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        comp += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + comp
}

fn trapezoid(times: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let vals: Vec<f64> = times.iter().map(|&t| f(t)).collect();
    let area = compensated(times.windows(2).zip(vals.windows(2)).map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1])));
    area / (times[times.len() - 1] - times[0])
}

fn overlap_oracle(g: &[f64], t: f64) -> f64 {
    g.iter().map(|gk| (gk * t / 2.0).cos().abs()).product()
}

/// P(at least m of the units are de-excited) when unit k is de-excited with
/// probability q[k] independently.
fn at_least(q: &[f64], m: usize) -> f64 {
    let mut dist = vec![1.0];
    for &p in q {
        let mut next = vec![0.0; dist.len() + 1];
        for (j, &d) in dist.iter().enumerate() {
            next[j] += d * (1.0 - p);
            next[j + 1] += d * p;
        }
        dist = next;
    }
    dist[m.min(dist.len())..].iter().sum()
}

fn disordered(n: usize, seed: u64) -> ModelSpec {
    ModelSpec::disordered(n, seed, 0.5, 1.5).unwrap()
}

#[test]
fn inner_product_matches_compensated_sum() {
    let (a, b) = (random_state(4, 1), random_state(4, 2));
    let got = inner_product(&a, &b).unwrap();
    let pairs: Vec<C64> = a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| x.conj() * y).collect();
    let re = compensated(pairs.iter().map(|z| z.re));
    let im = compensated(pairs.iter().map(|z| z.im));
    assert!((got - C64::new(re, im)).norm() < 1e-15);
    let e0 = StateVector::basis(BasisIndex::from_linear(4, 0).unwrap());
    let e1 = StateVector::basis(BasisIndex::from_linear(4, 1).unwrap());
    assert_eq!(inner_product(&e0, &e1).unwrap(), C64::new(0.0, 0.0));
    assert!(inner_product(&a, &random_state(3, 1)).is_err());
}

#[test]
fn partial_trace_matches_dense_density_matrix() {
    let n = 5;
    let s = random_state(n, 9);
    let dim = 2usize << n;
    let amps = s.amplitudes();
    let rho_full: Vec<Vec<C64>> = (0..dim).map(|i| (0..dim).map(|j| amps[i] * amps[j].conj()).collect()).collect();
    let half = dim / 2;
    let rho = partial_trace_particle(&s);
    for p in 0..2 {
        for q in 0..2 {
            let expect: C64 = (0..half).map(|a| rho_full[p * half + a][q * half + a]).sum();
            assert!((rho.entries().get(p, q) - expect).norm() < 1e-12, "entry ({p},{q})");
        }
    }
}

#[test]
fn entangled_pair_has_no_coherence() {
    // c0 ψ0⊗|1> + c1 ψ1⊗|0> for one unit
    let (c0, c1) = (0.6, 0.8);
    let mut amps = vec![c(0.0); 4];
    amps[BasisIndex::new(0, &[true]).unwrap().to_linear()] = c(c0);
    amps[BasisIndex::new(1, &[false]).unwrap().to_linear()] = c(c1);
    let rho = partial_trace_particle(&StateVector::from_amplitudes(1, amps).unwrap());
    assert!((rho.population(0) - c0 * c0).abs() < 1e-15);
    assert!((rho.population(1) - c1 * c1).abs() < 1e-15);
    assert_eq!(rho.coherence(), c(0.0));
}

#[test]
fn cascade_completion_separates_branches() {
    let n = 6;
    let spec = ModelSpec::uniform(n, 1.0).unwrap();
    let h = build_hamiltonian(&spec).unwrap();
    let (c0, c1) = (c(0.6), C64::new(0.0, 0.8));
    let s = evolve(&h, &initial_state(&spec, c0, c1).unwrap(), PI, &EvolutionConfig::default()).unwrap();
    let br = branch_decompose(&s);
    let all_excited = BasisIndex::new(0, &[true; 6]).unwrap().to_linear();
    let cascaded = BasisIndex::new(0, &[false; 6]).unwrap().to_linear();
    for (i, a) in br.a0.iter().enumerate() {
        let expect = if i == all_excited { c0 } else { c(0.0) };
        assert!((a - expect).norm() < 1e-9, "A0[{i}]");
    }
    // each unit picks up −i on its way down
    let phase = C64::new(0.0, -1.0).powi(n as i32);
    for (i, a) in br.a1.iter().enumerate() {
        let expect = if i == cascaded { c1 * phase } else { c(0.0) };
        assert!((a - expect).norm() < 1e-9, "A1[{i}]");
    }
    assert!(pointer_limit::macro_obs::pointer_expectation(&s) - 0.64 < 1e-9);
}

#[test]
fn overlap_follows_product_of_cosines() {
    let spec = disordered(7, 4);
    let times = uniform_times(30.0, 0.5);
    let series = decoherence_series(&spec, c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2), &times, &EvolutionConfig::default()).unwrap();
    let d = series.overlap.unwrap();
    assert!((d[0] - 1.0).abs() < 1e-12);
    assert!((series.rho01_abs[0] - 0.5).abs() < 1e-12);
    for (i, &t) in times.iter().enumerate() {
        let expect = overlap_oracle(spec.couplings(), t);
        assert!((d[i] - expect).abs() < 1e-9, "t = {t}");
        assert!((series.rho01_abs[i] - 0.5 * expect).abs() < 1e-9, "t = {t}");
    }
}

#[test]
fn uniform_overlap_vanishes_at_cascade_completion() {
    let spec = ModelSpec::uniform(5, 2.0).unwrap();
    let times = [0.0, PI / 2.0];
    let series = decoherence_series(&spec, c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2), &times, &EvolutionConfig::default()).unwrap();
    assert!(series.overlap.unwrap()[1] < 1e-9);
    let one_branch = decoherence_series(&spec, c(1.0), c(0.0), &times, &EvolutionConfig::default()).unwrap();
    assert!(one_branch.overlap.is_none() && one_branch.time_avg_d.is_none());
    assert!(one_branch.rho01_abs.iter().all(|&r| r == 0.0));
}

#[test]
fn time_averaged_overlap_near_two_over_pi_power() {
    let times = uniform_times(2000.0, 0.02);
    for n in [2usize, 4, 6, 8, 10] {
        let spec = disordered(n, 1);
        let avg = trapezoid(&times, |t| overlap_oracle(spec.couplings(), t));
        let reference = (2.0 / PI).powi(n as i32);
        assert!(
            (avg / reference - 1.0).abs() < 0.2,
            "n = {n}: {avg:.4e} vs {reference:.4e}"
        );
    }
    // the simulated average agrees with the quadrature on the same grid
    let spec = disordered(8, 1);
    let grid = uniform_times(200.0, 0.1);
    let series = decoherence_series(&spec, c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2), &grid, &EvolutionConfig::default()).unwrap();
    let sim = series.time_avg_d.unwrap().mean;
    let quad = trapezoid(&grid, |t| overlap_oracle(spec.couplings(), t));
    assert!((sim - quad).abs() < 1e-9, "{sim} vs {quad}");
}

#[test]
fn pointer_follows_rabi_formula_for_uniform_couplings() {
    let g = 1.3;
    let spec = ModelSpec::uniform(6, g).unwrap();
    let times = uniform_times(40.0, 0.2);
    let series = measure_trajectory(&spec, c(0.0), c(1.0), 0.5, &times, &EvolutionConfig::default()).unwrap();
    for (&t, &p) in times.iter().zip(series.values(COL_POINTER).unwrap()) {
        assert!((p - (g * t / 2.0).sin().powi(2)).abs() < 1e-9, "t = {t}");
    }
    let at_completion = measure_trajectory(&spec, c(0.0), c(1.0), 0.5, &[0.0, PI / g], &EvolutionConfig::default()).unwrap();
    assert!((at_completion.values(COL_THRESHOLD).unwrap()[1] - 1.0).abs() < 1e-9);
}

#[test]
fn detected_branch_matches_binomial_product_oracle() {
    let n = 12;
    let theta = 0.25;
    let spec = disordered(n, 1);
    let cfg = EvolutionConfig::default();
    let t_max = 200.0;
    let est = born_estimate(&spec, c(0.0), c(1.0), theta, t_max, &cfg).unwrap();
    let m = threshold_count(n, theta);
    let times = uniform_times(t_max, cfg.dt);
    let oracle = trapezoid(&times, |t| {
        let q: Vec<f64> = spec.couplings().iter().map(|g| (g * t / 2.0).sin().powi(2)).collect();
        at_least(&q, m)
    });
    assert!((est.p_hat - oracle).abs() < 1e-8, "{} vs {oracle}", est.p_hat);
    assert!(est.time_avg_d.is_none());
}

#[test]
fn detected_branch_near_certainty() {
    // Fails by a few 1e-3: the long-time value 1 − P[Bin(12, ½) < 3] = 0.9807
    // sits just inside the band and the T = 200 average fluctuates below it.
    let spec = disordered(12, 1);
    let est = born_estimate(&spec, c(0.0), c(1.0), 0.25, 200.0, &EvolutionConfig::default()).unwrap();
    assert!((est.p_hat - 1.0).abs() <= 0.02, "p_hat = {}", est.p_hat);
}

#[test]
fn long_time_detection_floor() {
    // each unit is de-excited half the time in the long run, independently
    let exact: f64 = 1.0 - (0..3).map(|m| binomial(12, m)).sum::<f64>() / 4096.0;
    assert!((threshold_shortfall(12, 0.25) - (1.0 - exact)).abs() < 1e-15);
    assert!((exact - 1.0).abs() <= 0.02);
    let times = uniform_times(20000.0, 0.05);
    let spec = disordered(12, 1);
    let m = threshold_count(12, 0.25);
    let avg = trapezoid(&times, |t| {
        let q: Vec<f64> = spec.couplings().iter().map(|g| (g * t / 2.0).sin().powi(2)).collect();
        at_least(&q, m)
    });
    assert!((avg - exact).abs() < 2e-3, "{avg} vs {exact}");
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[test]
fn undetected_branch_never_fires() {
    let spec = disordered(8, 2);
    let est = born_estimate(&spec, c(1.0), c(0.0), 0.25, 100.0, &EvolutionConfig::default()).unwrap();
    assert_eq!(est.p_hat, 0.0);
    assert_eq!(est.mixture_distance(), 0.0);
}

#[test]
fn equal_superposition_close_to_mixture() {
    let spec = disordered(12, 1);
    let d = mixture_distance(&spec, c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2), 0.25, 200.0, &EvolutionConfig::default()).unwrap();
    assert!(d <= 0.03, "mixture distance {d}");
}

#[test]
fn complementary_superpositions_sum_to_one() {
    let spec = disordered(12, 2);
    let cfg = EvolutionConfig::default();
    let (c0, c1) = (c(0.3f64.sqrt()), C64::new(0.0, 0.7f64.sqrt()));
    let a = born_estimate(&spec, c0, c1, 0.25, 200.0, &cfg).unwrap();
    let b = born_estimate(&spec, c1, -c0, 0.25, 200.0, &cfg).unwrap();
    let sum = a.p_hat + b.p_hat;
    assert!((sum - 1.0).abs() <= 2.0 * 0.02, "sum = {sum}");
}

#[test]
fn global_phase_is_invisible() {
    let spec = disordered(8, 3);
    let cfg = EvolutionConfig::default();
    let (c0, c1) = (c(0.6), C64::new(0.0, 0.8));
    let phase = C64::from_polar(1.0, 1.1);
    let a = born_estimate(&spec, c0, c1, 0.25, 100.0, &cfg).unwrap();
    let b = born_estimate(&spec, phase * c0, phase * c1, 0.25, 100.0, &cfg).unwrap();
    assert!((a.p_hat - b.p_hat).abs() < 1e-10);
    assert!((a.time_avg_d.unwrap() - b.time_avg_d.unwrap()).abs() < 1e-10);
}

#[test]
fn measured_basis_rotation_leaves_statistics_unchanged() {
    let times = uniform_times(40.0, 0.25);
    let cfg = EvolutionConfig::default();
    let (c0, c1) = (c(0.6), C64::new(0.0, 0.8));
    let base = measure_trajectory(&disordered(7, 5), c0, c1, 0.25, &times, &cfg).unwrap();
    for alpha in [0.4, 1.2, 2.9] {
        let spec = disordered(7, 5).with_basis_angle(alpha).unwrap();
        let rotated = measure_trajectory(&spec, c0, c1, 0.25, &times, &cfg).unwrap();
        for name in base.names() {
            let (x, y) = (base.values(name).unwrap(), rotated.values(name).unwrap());
            let worst = x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(worst < 1e-10, "{name} at α = {alpha}: {worst:e}");
        }
    }
}

fn plan(template: ModelSpec, n_list: Vec<usize>, t_max: f64, dt: f64) -> ScanPlan {
    ScanPlan {
        template,
        n_list,
        c0: c(FRAC_1_SQRT_2),
        c1: c(FRAC_1_SQRT_2),
        theta: 0.25,
        t_max,
        cfg: EvolutionConfig::default().with_dt(dt),
        seeds: vec![1, 2, 3],
        max_tail_variation: 0.01,
        threads: None,
    }
}

#[test]
fn uniform_scan_matches_overlap_quadrature() {
    let report = scan_n(&plan(ModelSpec::uniform(6, 1.0).unwrap(), vec![6, 8, 10], 200.0, 0.25)).unwrap();
    let fine = uniform_times(200.0, 0.005);
    for row in &report.summary {
        let quad = trapezoid(&fine, |t| (t / 2.0).cos().abs().powi(row.n as i32));
        assert!(
            (row.time_avg_d / quad - 1.0).abs() < 0.05,
            "n = {}: {} vs {quad}",
            row.n,
            row.time_avg_d
        );
    }
}

#[test]
fn disordered_overlap_decreases_with_n() {
    let report = scan_n(&plan(disordered(6, 1), vec![4, 6, 8, 10], 200.0, 0.25)).unwrap();
    for w in report.summary.windows(2) {
        assert!(w[1].time_avg_d < w[0].time_avg_d, "n = {} -> {}", w[0].n, w[1].n);
    }
    let fit = report.fit.as_ref().unwrap();
    assert!(fit.rate < 0.0);
    assert!((0.0..=1.0).contains(&fit.r2));
}

#[test]
fn commensurate_sampling_is_refused() {
    // samples at multiples of the recurrence period see D = 1 at every n
    let g = 1.0;
    let period = 2.0 * PI / g;
    let report = scan_n(&plan(ModelSpec::uniform(4, g).unwrap(), vec![4, 6, 8], 50.0 * period, period)).unwrap();
    for row in &report.summary {
        assert!((row.time_avg_d - 1.0).abs() < 1e-8);
    }
    assert!(matches!(extrapolate_limit(&report), Err(Error::FitRefused(_))));
}

fn macro_plan(k: usize, t_max: f64) -> MacroTestPlan {
    MacroTestPlan {
        template: disordered(6, 1),
        c0: c(0.6),
        c1: c(0.8),
        k,
        trials: 200,
        seed: 7,
        t_max,
        cfg: EvolutionConfig::default().with_dt(0.25),
        slack: 1e-9,
    }
}

#[test]
fn pointer_family_is_macroscopic() {
    let verdict = is_macroscopic(&PointerFamily, &[6, 8, 10, 12], &macro_plan(1, 0.0)).unwrap();
    assert!(verdict.pass, "{:?}", verdict.schedule);
    for r in &verdict.schedule {
        assert!(r.max_deviation <= 1.0 / r.n as f64 + 1e-12);
    }
    let timed = is_macroscopic(&PointerFamily, &[4, 5, 6], &MacroTestPlan { trials: 10, ..macro_plan(1, 40.0) }).unwrap();
    assert!(timed.pass, "{:?}", timed.schedule);
}

#[test]
fn single_unit_family_is_rejected() {
    let verdict = is_macroscopic(&SingleUnitFamily { unit: 0 }, &[6, 8, 10, 12], &macro_plan(1, 0.0)).unwrap();
    assert!(!verdict.pass);
    assert!(verdict.schedule.iter().all(|r| r.max_deviation > 0.5));
}

#[test]
fn constant_family_never_moves() {
    let verdict = is_macroscopic(&ConstantFamily(0.3), &[6, 8, 10], &macro_plan(2, 0.0)).unwrap();
    assert!(verdict.pass);
    assert!(verdict.schedule.iter().all(|r| r.max_deviation == 0.0));
    assert!(is_macroscopic(&ConstantFamily(0.3), &[6, 8], &macro_plan(1, 0.0)).is_err());
}
