use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wavefront::lab::data::{random_step_data, RandomDataSpec};
use wavefront::models::builtin::{decoupled, ld_ld};
use wavefront::models::builtin_models;
use wavefront::riemann::GridSpec;
use wavefront::sensitivity::{
    chained_integral_shift, descendant, fd_integral_shift_from, front_shifts, integral_shift, perturbed_trajectory, resolve_interaction_shifts,
    richardson, sheaf_interaction_shifts, ShiftAssignment, ShiftedRun,
};
use wavefront::tracker::{StepData, Tracker, Trajectory};

const THETAS: [f64; 3] = [1e-4, 1e-5, 1e-6];

fn breakpoint_rates(traj: &Trajectory, seed: u64) -> ShiftAssignment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = ShiftAssignment::new();
    let mut last_x = f64::NAN;
    let mut rate = 0.0;
    for id in traj.initial_ids() {
        let x = traj.fronts()[*id].x0;
        if x != last_x {
            rate = rng.random_range(-1.0..1.0);
            last_x = x;
        }
        a = a.with(*id, rate);
    }
    a
}

fn random_run(name: &str, nu: u32, seed: u64, t: f64) -> Trajectory {
    let model = wavefront::models::model_by_name(name, &Default::default()).unwrap();
    let grid = GridSpec::new(nu);
    let spec = RandomDataSpec { jumps: 5, x_min: 0.0, x_max: 2.0, max_step: 1.0 };
    Tracker::simulate(&model, &grid, &random_step_data(&model, &grid, &spec, seed), t).unwrap()
}

fn shift_of(base: &Trajectory, run: &ShiftedRun, id: usize, t: f64, theta: f64) -> f64 {
    let p = run.base_id.iter().position(|b| *b == id).unwrap();
    (run.traj.fronts()[p].position(t) - base.fronts()[id].position(t)) / theta
}

#[test]
fn projection_formula_matches_oracle_on_decoupled_model() {
    for seed in 0..6 {
        let tr = random_run("decoupled", 2, seed, 0.77);
        let a = breakpoint_rates(&tr, seed + 100);
        let r = richardson(&tr, &a, 0.77, &THETAS).unwrap();
        assert!(r.slopes_within(0.8, 1.2), "seed {seed}: {r:?}");
    }
}

#[test]
fn chained_shifts_match_oracle() {
    for model in builtin_models() {
        for seed in 0..4 {
            let tr = random_run(model.name(), 3, seed, 0.77);
            let a = breakpoint_rates(&tr, seed + 100);
            let c = chained_integral_shift(&tr, 0.77, &a).unwrap();
            let d: Vec<f64> = THETAS.iter().map(|th| c.l1_distance(&fd_integral_shift_from(&tr, &a, 0.77, *th).unwrap())).collect();
            for w in d.windows(2) {
                let slope = (w[0] / w[1]).log10();
                assert!((0.8..=1.2).contains(&slope), "{} seed {seed}: {d:?}", model.name());
            }
        }
    }
}

#[test]
fn integral_shift_is_linear() {
    for model in builtin_models() {
        let tr = random_run(model.name(), 2, 9, 0.6);
        let a = breakpoint_rates(&tr, 1);
        let b = breakpoint_rates(&tr, 2);
        let va = integral_shift(&tr, 0.6, &a).unwrap();
        let vb = integral_shift(&tr, 0.6, &b).unwrap();
        let vab = integral_shift(&tr, 0.6, &a.combine(2.0, &b, -3.0)).unwrap();
        for (k, x) in vab.knots.iter().enumerate() {
            let side = wavefront::tracker::Side::Right;
            let want: Vec<f64> = va.value(*x, side).iter().zip(vb.value(*x, side)).map(|(p, q)| 2.0 * p - 3.0 * q).collect();
            for (g, w) in vab.right[k].iter().zip(&want) {
                assert!((g - w).abs() <= 1e-10 * (1.0 + w.abs()), "{}: {g} vs {w}", model.name());
            }
        }
    }
}

#[test]
fn transversal_shift_matches_rerun() {
    let m = ld_ld();
    let g = GridSpec::new(2);
    let data = StepData::new(vec![0.0, 1.0], vec![vec![10, 1], vec![10, 3], vec![8, 3]]);
    let t = 1.0;
    let tr = Tracker::simulate(&m, &g, &data, t).unwrap();
    let a = ShiftAssignment::new().with(0, 0.3).with(1, -0.8);
    let xi = front_shifts(&tr, &a).unwrap();
    let theta = 1e-6;
    let run = perturbed_trajectory(&tr, &a, theta, t).unwrap();
    for id in [2, 3] {
        let fd = shift_of(&tr, &run, id, t, theta);
        assert!((fd - xi[id]).abs() < 1e-8, "front {id}: {fd} vs {}", xi[id]);
    }
    let e = &tr.events()[0];
    let inc: Vec<(Vec<f64>, f64)> = e.incoming.iter().map(|id| (tr.fronts()[*id].wave.jump(&m, &g), a.rate(*id))).collect();
    let single = resolve_interaction_shifts(&inc, &[tr.fronts()[2].wave.jump(&m, &g), tr.fronts()[3].wave.jump(&m, &g)]).unwrap();
    assert!((single[0] - xi[2]).abs() < 1e-14 && (single[1] - xi[3]).abs() < 1e-14);
}

#[test]
fn sheaf_formula_matches_rerun() {
    let m = ld_ld();
    let g = GridSpec::new(2);
    // three family-1 contacts at speed w_0 = 2.5 crossed by one family-0 contact
    let data = StepData::new(vec![0.0, 0.2, 0.4, 2.0], vec![vec![10, 0], vec![10, 1], vec![10, 2], vec![10, 3], vec![8, 3]]);
    let t = 3.0;
    let tr = Tracker::simulate(&m, &g, &data, t).unwrap();
    let f = tr.fronts();
    let (lam_bar, lam) = (f[0].speed(), f[3].speed());
    let sheaf: Vec<usize> = (0..3).map(|id| descendant(&tr, id, t).unwrap()).collect();
    let front = descendant(&tr, 3, t).unwrap();
    let (lam_bar_after, lam_after) = (f[sheaf[0]].speed(), f[front].speed());
    for (xb, x) in [(0.0, 0.0), (0.7, 0.7), (1.0, -0.5), (-0.3, 0.9)] {
        let a = ShiftAssignment::new().with(0, xb).with(1, xb).with(2, xb).with(3, x);
        let (pb, p) = sheaf_interaction_shifts(xb, x, lam_bar, lam, lam_bar_after, lam_after).unwrap();
        if xb == x {
            assert_eq!((pb, p), (xb, x));
        }
        if a.is_zero() {
            continue;
        }
        let mut prev = f64::INFINITY;
        for theta in THETAS {
            let run = perturbed_trajectory(&tr, &a, theta, t).unwrap();
            let mut err: f64 = (shift_of(&tr, &run, front, t, theta) - p).abs();
            for id in &sheaf {
                err = err.max((shift_of(&tr, &run, *id, t, theta) - pb).abs());
            }
            assert!(err < 1e-6 && err <= prev.max(1e-9), "rates ({xb}, {x}) theta {theta}: {err}");
            prev = err;
        }
    }
}

#[test]
fn single_front_before_interaction_is_exact_step() {
    let m = decoupled(5.0);
    let g = GridSpec::new(3);
    let data = StepData::new(vec![0.0, 3.0], vec![vec![8, 0], vec![0, 0], vec![0, 8]]);
    let tr = Tracker::simulate(&m, &g, &data, 0.4).unwrap();
    let a = ShiftAssignment::new().with(0, 1.5);
    let v = integral_shift(&tr, 0.4, &a).unwrap();
    let c = chained_integral_shift(&tr, 0.4, &a).unwrap();
    assert_eq!(v.l1_distance(&c), 0.0);
    let fd = fd_integral_shift_from(&tr, &a, 0.4, 1e-6).unwrap();
    // ramp of width θξ and height σξ: defect θ ξ² |σ| / 2
    let want = 0.5 * 1e-6 * 1.5 * 1.5 * 1.0;
    // position roundoff is amplified by 1/θ along the plateau
    assert!((v.l1_distance(&fd) - want).abs() < 1e-3 * want, "{} vs {want}", v.l1_distance(&fd));
}
