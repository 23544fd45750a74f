//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spinlattice::experiment::{converge, reference_initial_state, ExperimentConfig};
use spinlattice::{
    check_scheme, empirical_invariant_test, hopf_all, integrate, lift_state, project, step_collective, step_reduced,
    verify_hopf_poisson, ButcherTableau, ChainParameters, CollectiveSpinPair, CollectiveState, ExtendedHamiltonian,
    InvariantTest, LatticeState, PartitionedScheme, SchemeComponent, SleChainModel, SolverSettings, Spin,
    SpinLatticeState,
};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn random_spin(rng: &mut ChaCha8Rng) -> Spin {
    loop {
        let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let r = v.norm();
        if r > 0.1 && r <= 1.0 {
            return v / r;
        }
    }
}

/// Chain with spacing `spacing`, so neighbouring gaps sit inside the coupling range.
fn chain(n: usize, spacing: f64) -> SleChainModel {
    SleChainModel::new(ChainParameters {
        n,
        period: spacing * n as f64,
        masses: vec![1.0; n],
        ..ChainParameters::default()
    })
    .unwrap()
}

fn random_state(rng: &mut ChaCha8Rng, n: usize, spacing: f64) -> SpinLatticeState {
    let spins = (0..n).map(|_| random_spin(rng)).collect();
    let q = (0..n).map(|k| k as f64 * spacing + rng.gen_range(-0.05..0.05)).collect();
    let p = (0..n).map(|_| rng.gen_range(-0.2..0.2)).collect();
    SpinLatticeState::new(spins, LatticeState::new(q, p).unwrap()).unwrap()
}

fn energy_and_leaves() -> (Outcome, Outcome) {
    let config = ExperimentConfig::default();
    let model = config.model().unwrap();
    let initial = reference_initial_state(config.chain.n).unwrap();
    let settings = config.settings().unwrap();

    let mut h0 = None;
    let mut drift: f64 = 0.0;
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    let mut leaf: f64 = 0.0;
    let start = Instant::now();
    let run = integrate(&model, &initial, &settings, config.t_end, 1, |_, state, e| {
        let h0 = *h0.get_or_insert(e.total);
        drift = drift.max((e.total - h0).abs());
        for (k, v) in [e.kinetic, e.potential, e.magnetic].into_iter().enumerate() {
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
        for w in &state.spins {
            leaf = leaf.max((w.norm() - 1.0).abs());
        }
    });
    let elapsed = start.elapsed().as_secs_f64();
    if let Err(e) = run {
        let msg = format!("integration failed: {e}");
        return (outcome(false, msg.clone()), outcome(false, msg));
    }
    let swing = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
    let energy = outcome(
        drift <= 5e-3 && swing.iter().all(|&s| s >= 0.3) && elapsed <= 60.0,
        format!(
            "max|dH| = {drift:.3e}, swings T/U/Hm = {:.2e}/{:.2e}/{:.2e} (need >= 0.3), {elapsed:.1} s",
            swing[0], swing[1], swing[2]
        ),
    );
    let leaves = outcome(leaf <= 1e-10, format!("max | |w| - 1 | = {leaf:.3e}"));
    (energy, leaves)
}

fn convergence() -> Outcome {
    let config = ExperimentConfig {
        t_end: 1.0,
        ..ExperimentConfig::default()
    };
    let steps: Vec<f64> = (4..=10).map(|k| 2f64.powi(-k)).collect();
    let start = Instant::now();
    let study = match converge(&config, &steps, 2f64.powi(-12)) {
        Ok(s) => s,
        Err(e) => return outcome(false, format!("convergence run failed: {e}")),
    };
    let elapsed = start.elapsed().as_secs_f64();
    let ratios: Vec<String> = study
        .rows
        .windows(2)
        .map(|w| format!("{:.2}", w[0].1 / w[1].1))
        .collect();
    match study.slope {
        Some(slope) => outcome(
            (1.8..=2.2).contains(&slope) && elapsed <= 120.0,
            format!("slope = {slope:.4}, halving ratios [{}], {elapsed:.1} s", ratios.join(", ")),
        ),
        None => outcome(false, "no nonzero errors to fit".into()),
    }
}

fn fiber_invariance() -> Outcome {
    let model = chain(6, 1.1);
    let settings = SolverSettings::new(0.05).unwrap().with_tolerance(1e-14).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let lifted = lift_state(&random_state(&mut rng, 6, 1.1)).unwrap();
        let k = rng.gen_range(0..6);
        let theta = rng.gen_range(0.0..std::f64::consts::TAU);
        let mut rotated = lifted.clone();
        rotated.pairs[k] = rotated.pairs[k].rotate_phase(theta);
        let (a, b) = match (step_collective(&model, &rotated, &settings), step_collective(&model, &lifted, &settings)) {
            (Ok(a), Ok(b)) => (a.state, b.state),
            (Err(e), _) | (_, Err(e)) => return outcome(false, format!("step failed: {e}")),
        };
        let mut b = b;
        b.pairs[k] = b.pairs[k].rotate_phase(theta);
        worst = worst.max(max_abs_diff(&collective_coordinates(&a), &collective_coordinates(&b)));
    }
    outcome(worst <= 1e-10, format!("max deviation = {worst:.3e}"))
}

/// Canonical coordinates: per pair `(Im z1, Im z2)` are positions and `(Re z1, Re z2)` momenta,
/// laid out as all positions (pairs then lattice) followed by all momenta.
fn collective_coordinates(s: &CollectiveState) -> Vec<f64> {
    let mut positions = Vec::new();
    let mut momenta = Vec::new();
    for pair in &s.pairs {
        positions.extend([pair.z1.im, pair.z2.im]);
        momenta.extend([pair.z1.re, pair.z2.re]);
    }
    positions.extend(&s.lattice.q);
    momenta.extend(&s.lattice.p);
    positions.extend(momenta);
    positions
}

fn from_coordinates(y: &[f64], count: usize) -> CollectiveState {
    let half = y.len() / 2;
    let (positions, momenta) = y.split_at(half);
    let pairs: Vec<CollectiveSpinPair> = (0..count)
        .map(|i| {
            CollectiveSpinPair::new(
                Complex64::new(momenta[2 * i], positions[2 * i]),
                Complex64::new(momenta[2 * i + 1], positions[2 * i + 1]),
            )
        })
        .collect();
    let lattice = LatticeState::new(positions[2 * pairs.len()..].to_vec(), momenta[2 * pairs.len()..].to_vec());
    CollectiveState {
        pairs,
        lattice: lattice.unwrap(),
    }
}

fn symplecticity() -> Outcome {
    let n = 4;
    let model = chain(n, 1.1);
    let settings = SolverSettings::new(0.05).unwrap().with_tolerance(1e-14).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let eps = 1e-6;
    let dim = 6 * n;
    let half = dim / 2;
    let mut omega = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..half {
        omega[(i, half + i)] = 1.0;
        omega[(half + i, i)] = -1.0;
    }
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let y0 = collective_coordinates(&lift_state(&random_state(&mut rng, n, 1.1)).unwrap());
        let mut d = DMatrix::<f64>::zeros(dim, dim);
        for j in 0..dim {
            let mut images = Vec::with_capacity(2);
            for sign in [1.0, -1.0] {
                let mut y = y0.clone();
                y[j] += sign * eps;
                match step_collective(&model, &from_coordinates(&y, n), &settings) {
                    Ok(r) => images.push(collective_coordinates(&r.state)),
                    Err(e) => return outcome(false, format!("step failed: {e}")),
                }
            }
            for i in 0..dim {
                d[(i, j)] = (images[0][i] - images[1][i]) / (2.0 * eps);
            }
        }
        let defect = d.transpose() * &omega * &d - &omega;
        worst = worst.max(defect.amax());
    }
    outcome(worst <= 1e-5, format!("max |D^T Omega D - Omega| = {worst:.3e}"))
}

fn scheme_equivalence() -> Outcome {
    let model = chain(6, 1.1);
    let settings = SolverSettings::new(0.05).unwrap().with_tolerance(1e-14).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let state = random_state(&mut rng, 6, 1.1);
        let reduced = step_reduced(&model, &state, &settings);
        let collective = lift_state(&state).and_then(|l| step_collective(&model, &l, &settings));
        let (reduced, collective) = match (reduced, collective) {
            (Ok(r), Ok(c)) => (r.state, c.state),
            (Err(e), _) | (_, Err(e)) => return outcome(false, format!("step failed: {e}")),
        };
        let (spins, lattice) = hopf_all(&collective);
        let projected = project(&spins, &lattice).unwrap();
        worst = worst.max(max_abs_diff(&projected.flatten(), &reduced.flatten()));
    }
    outcome(worst <= 1e-10, format!("max deviation = {worst:.3e}"))
}

fn tableau_verdicts() -> Outcome {
    let production = PartitionedScheme::production();
    let production_ok = check_scheme(&production).map(|v| v.passed()).unwrap_or(false);
    let euler = PartitionedScheme::new(vec![
        SchemeComponent::Single(ButcherTableau::explicit_euler()),
        SchemeComponent::Pair {
            q: ButcherTableau::explicit_euler(),
            p: ButcherTableau::explicit_euler(),
        },
    ]);
    let euler_fails = check_scheme(&euler).map(|v| !v.passed()).unwrap_or(false);

    let delta = num_rational::BigRational::new(1.into(), 1000.into());
    let mut mutants = 0;
    let mut mutants_failed = 0;
    for k in 0..production.components.len() {
        for which in 0..2 {
            for cell in 0..6 {
                let mut scheme = production.clone();
                let tableau = match (&mut scheme.components[k], which) {
                    (SchemeComponent::Single(t), 0) => t,
                    (SchemeComponent::Single(_), _) => continue,
                    (SchemeComponent::Pair { q, .. }, 0) => q,
                    (SchemeComponent::Pair { p, .. }, _) => p,
                };
                let (i, j) = (cell / 3, cell % 3);
                if j == 2 {
                    *tableau.b_mut(i) += delta.clone();
                } else {
                    *tableau.a_mut(i, j) += delta.clone();
                }
                mutants += 1;
                if check_scheme(&scheme).map(|v| !v.passed()).unwrap_or(false) {
                    mutants_failed += 1;
                }
            }
        }
    }

    let test = InvariantTest::default();
    let (good, bad) = match (empirical_invariant_test(&production, &test), empirical_invariant_test(&euler, &test)) {
        (Ok(g), Ok(b)) => (g, b),
        (Err(e), _) | (_, Err(e)) => return outcome(false, format!("invariant harness failed: {e}")),
    };
    let separated = good <= 1e-10 && bad >= 1e-4 && bad >= 1e6 * good;
    outcome(
        production_ok && euler_fails && mutants_failed == mutants && separated,
        format!(
            "production {}, euler {}, mutants {mutants_failed}/{mutants} rejected, drift {good:.2e} vs {bad:.2e}",
            if production_ok { "passes" } else { "FAILS" },
            if euler_fails { "fails" } else { "PASSES" },
        ),
    )
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt() / scale
}

fn gradient_consistency() -> Outcome {
    let n = 8;
    let model = chain(n, 1.1);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let eps = 1e-6;
    let mut worst_q: f64 = 0.0;
    let mut worst_w: f64 = 0.0;
    for _ in 0..50 {
        let s = random_state(&mut rng, n, 1.1);
        let energy = |spins: &[Spin], q: &[f64]| model.potential(q).unwrap() + model.magnetic(spins, q).unwrap();
        let gq = model.grad_q(&s.spins, &s.lattice.q).unwrap();
        let fd_q: Vec<f64> = (0..n)
            .map(|j| {
                let (mut plus, mut minus) = (s.lattice.q.clone(), s.lattice.q.clone());
                plus[j] += eps;
                minus[j] -= eps;
                (energy(&s.spins, &plus) - energy(&s.spins, &minus)) / (2.0 * eps)
            })
            .collect();
        worst_q = worst_q.max(relative_error(&gq, &fd_q));

        let field: Vec<f64> = model
            .effective_field(&s.spins, &s.lattice.q)
            .unwrap()
            .iter()
            .flat_map(|g| [g.x, g.y, g.z])
            .collect();
        let fd_w: Vec<f64> = (0..3 * n)
            .map(|c| {
                let (mut plus, mut minus) = (s.spins.clone(), s.spins.clone());
                plus[c / 3][c % 3] += eps;
                minus[c / 3][c % 3] -= eps;
                (model.magnetic(&plus, &s.lattice.q).unwrap() - model.magnetic(&minus, &s.lattice.q).unwrap())
                    / (2.0 * eps)
            })
            .collect();
        worst_w = worst_w.max(relative_error(&field, &fd_w));
    }
    outcome(
        worst_q <= 1e-6 && worst_w <= 1e-6,
        format!("grad_q rel err {worst_q:.3e}, effective_field rel err {worst_w:.3e}"),
    )
}

fn hopf_poisson() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let pair = CollectiveSpinPair::new(
            Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
            Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
        );
        for row in verify_hopf_poisson(&pair) {
            for r in row {
                worst = worst.max(r.abs());
            }
        }
    }
    outcome(worst <= 1e-12, format!("max residual = {worst:.3e}"))
}

fn time_symmetry() -> Outcome {
    let model = chain(30, 1.0);
    let settings = SolverSettings::new(0.01).unwrap().with_tolerance(1e-14).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let state = random_state(&mut rng, 30, 1.0);
        let back = step_reduced(&model, &state, &settings)
            .and_then(|f| step_reduced(&model, &f.state, &settings.reversed()));
        match back {
            Ok(b) => worst = worst.max(max_abs_diff(&b.state.flatten(), &state.flatten())),
            Err(e) => return outcome(false, format!("step failed: {e}")),
        }
    }
    outcome(worst <= 1e-10, format!("max return error = {worst:.3e}"))
}

fn main() -> ExitCode {
    let (energy, leaves) = energy_and_leaves();
    let results = [
        ("energy near-conservation", energy),
        ("second-order convergence", convergence()),
        ("leaf preservation", leaves),
        ("fiber invariance", fiber_invariance()),
        ("numerical symplecticity", symplecticity()),
        ("scheme equivalence", scheme_equivalence()),
        ("tableau verdicts", tableau_verdicts()),
        ("gradient consistency", gradient_consistency()),
        ("hopf map is poisson", hopf_poisson()),
        ("time symmetry", time_symmetry()),
    ];
    let mut failures = 0;
    for (k, (name, o)) in results.iter().enumerate() {
        println!("{} {:>2} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, k + 1, o.detail);
        failures += usize::from(!o.passed);
    }
    println!("{} of {} criteria passed", results.len() - failures, results.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
