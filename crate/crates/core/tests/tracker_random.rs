use wavefront::lab::data::{random_step_data, RandomDataSpec};
use wavefront::linalg::{norm, sub};
use wavefront::models::{builtin_models, SystemModel};
use wavefront::riemann::GridSpec;
use wavefront::tracker::{Side, Tracker, Trajectory};

fn run(model: &SystemModel, nu: u32, seed: u64, jumps: usize, t_end: f64) -> Trajectory {
    let grid = GridSpec::new(nu);
    let spec = RandomDataSpec { jumps, x_min: 0.0, x_max: 4.0, max_step: 1.0 };
    let data = random_step_data(model, &grid, &spec, seed);
    Tracker::simulate(model, &grid, &data, t_end).unwrap_or_else(|e| panic!("{} nu={nu} seed={seed}: {e}", model.name()))
}

fn max_speed(model: &SystemModel) -> f64 {
    let mut s: f64 = 0.0;
    for c in model.domain().corners() {
        for i in 0..model.dim() {
            s = s.max(model.eigenvalue_w(i, &c).abs());
        }
    }
    s
}

#[test]
fn random_runs_keep_invariants() {
    for model in builtin_models() {
        for nu in 2..=5 {
            for seed in 0..4 {
                let tr = run(&model, nu, seed, 20, 2.0);
                let tv0 = tr.initial_monitors().tv;
                let mut prev_tv = tv0;
                for e in tr.events() {
                    assert!(e.alternative.is_some(), "{} nu={nu} seed={seed}: {e:?}", model.name());
                    assert!(e.mass_defect <= 1e-10 && e.flux_defect <= 1e-10, "{e:?}");
                    assert!(e.after.q <= tv0 * tv0);
                    assert!(e.after.tv <= prev_tv);
                    if e.is_transversal(tr.fronts()) {
                        assert!(e.d_q < 0);
                    }
                    prev_tv = e.after.tv;
                }
            }
        }
    }
}

#[test]
fn states_chain_between_fronts() {
    for model in builtin_models() {
        let tr = run(&model, 3, 11, 20, 2.0);
        for t in [0.0, 0.5, 1.0, 1.7, 2.0] {
            let order = tr.order_at(t).unwrap();
            let fronts = tr.fronts();
            assert!(order.first().is_none_or(|id| &fronts[*id].wave.left == tr.left_state()));
            for w in order.windows(2) {
                assert_eq!(fronts[w[0]].wave.right, fronts[w[1]].wave.left);
                assert!(fronts[w[0]].position(t) <= fronts[w[1]].position(t) + 1e-9);
            }
        }
    }
}

#[test]
fn global_mass_balance() {
    for model in builtin_models() {
        let t_end = 1.5;
        let tr = run(&model, 4, 5, 20, t_end);
        let reach = max_speed(&model) * t_end + 1.0;
        let (a, b) = (-reach, 4.0 + reach);
        let g = *tr.grid();
        let m0 = tr.profile_at(0.0).unwrap().integral(&model, &g, a, b);
        let ul = model.to_conserved(&g.to_real(tr.left_state()));
        let ur = model.to_conserved(&g.to_real(tr.right_state()));
        let fl = model.flux(&ul);
        let fr = model.flux(&ur);
        for t in [0.3, 0.9, t_end] {
            let m = tr.profile_at(t).unwrap().integral(&model, &g, a, b);
            let want: Vec<f64> = (0..m0.len()).map(|k| m0[k] + t * (fl[k] - fr[k])).collect();
            let scale = norm(&m0).max(1.0);
            assert!(norm(&sub(&m, &want)) / scale < 1e-10, "{}: {m:?} vs {want:?}", model.name());
        }
        let _ = tr.sample(t_end, 2.0, Side::Left).unwrap();
    }
}

#[test]
fn front_count_bounded_by_variation() {
    for model in builtin_models() {
        let tr = run(&model, 4, 3, 30, 0.0);
        let m = tr.initial_monitors();
        assert!(m.count as i64 <= m.tv);
    }
}
