mod common;

use common::*;
use glass_entropy::cones::{returning_region, sample_in_cone};
use glass_entropy::dynamics::{
    compose, cycle_map, exit_time, local_map, path_steps, simulate, step_exact, FracLinMap, Simulator, WallId,
    WallPoint,
};
use glass_entropy::netspec::{one_variable, BoxLabel, NetworkSpec};
use glass_entropy::rational::{dot, l1_normalize, q, q_from_f64, q_to_f64, QMatrix, Q};
use glass_entropy::Error;
use num_traits::Signed;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Flow from `y` inside box `a` to the hyperplane `y_j = 0`, equal unit decay:
/// `y(t) = f + (y − f) e^{−t}` with `e^{−t} = f_j / (f_j − y_j)`.
fn flow_to_wall(spec: &NetworkSpec, a: BoxLabel, y: &[Q], j: usize) -> Vec<Q> {
    let f = spec.focal_point(a).0;
    let decay = &f[j] / (&f[j] - &y[j]);
    f.iter().zip(y).map(|(fi, yi)| fi + (yi - fi) * &decay).collect()
}

fn interior_point(spec: &NetworkSpec) -> Vec<Q> {
    let cone = returning_region(spec, &cycle_a()).unwrap();
    let mut sum = vec![q(0); cone.dim()];
    for r in cone.rays() {
        for (s, x) in sum.iter_mut().zip(l1_normalize(r)) {
            *s += x;
        }
    }
    let mut y: Vec<Q> = sum.into_iter().map(|x| x / q(cone.rays().len() as i64)).collect();
    y.insert(3, q(0));
    y
}

#[test]
fn wall_patterns() {
    let w = WallId::between(b("1111"), b("1110")).unwrap();
    assert_eq!(w.axis, 3);
    assert!(!w.upward);
    assert_eq!(w.pattern(), "+++0");
    assert_eq!(w.orthant(), vec![1, 1, 1]);
    assert_eq!(WallId::between(b("0000"), b("0100")).unwrap().pattern(), "-0--");
    assert!(WallId::between(b("0000"), b("0110")).is_err());
}

#[test]
fn local_map_matches_closed_form_flow() {
    let spec = spec();
    let y = interior_point(&spec);
    let mut point = y.clone();
    for step in path_steps(&spec, &cycle_a().closed_path()).unwrap() {
        let next = step.map.apply(&point).unwrap();
        assert_eq!(next, flow_to_wall(&spec, step.label, &point, step.exit_axis));
        assert!(next[step.exit_axis] == q(0));
        point = next;
    }
}

#[test]
fn cycle_map_agrees_with_stepwise_flow() {
    let spec = spec();
    let y = interior_point(&spec);
    let mut point = y.clone();
    let path = cycle_a().closed_path();
    for w in path.windows(2) {
        let axis = WallId::between(w[0], w[1]).unwrap().axis;
        point = flow_to_wall(&spec, w[0], &point, axis);
    }
    let reduced: Vec<Q> = y[..3].to_vec();
    let image = cycle_map(&spec, &cycle_a()).unwrap().apply(&reduced).unwrap();
    assert_eq!(image, point[..3].to_vec());
}

#[test]
fn exact_steps_follow_cycle_a() {
    let spec = spec();
    let mut y = interior_point(&spec);
    let mut label = b("1110");
    let mut visited = Vec::new();
    for step in 0..8 {
        visited.push(label);
        let (axis, next) = step_exact(&spec, label, &y, step).unwrap();
        y = next;
        label = label.flip(axis);
    }
    assert_eq!(visited, cycle_a().boxes);
}

#[test]
fn ties_raise_codimension_two() {
    let spec = spec();
    // Exits of 1110 are axes 1 and 2 with f = −1 on both: equal coordinates tie.
    let y = vec![q(3), q(2), q(2), q(0)];
    assert!(matches!(step_exact(&spec, b("1110"), &y, 7), Err(Error::CodimensionTwo { step: 7 })));
    let start = WallPoint { wall: WallId::between(b("1111"), b("1110")).unwrap(), y: vec![0.3, 0.2, 0.2, 0.0] };
    assert!(matches!(simulate(&spec, &start, 5), Err(Error::CodimensionTwo { step: 0 })));
}

#[test]
fn terminal_box_stops_the_run() {
    let spec = one_variable(q(1), q(1));
    let start = WallPoint { wall: WallId::between(b("0"), b("1")).unwrap(), y: vec![0.0] };
    let traj = simulate(&spec, &start, 10).unwrap();
    assert_eq!(traj.terminal, Some(b("1")));
    assert!(traj.symbols.is_empty());
}

#[test]
fn unequal_decay_has_no_fractional_linear_maps() {
    let spec = NetworkSpec::new(
        vec![q(1), q(2)],
        vec![vec![q(1), q(1)], vec![q(1), q(1)], vec![q(-1), q(1)], vec![q(-1), q(-1)]],
    )
    .unwrap();
    assert!(matches!(local_map(&spec, b("00"), 0), Err(Error::UnequalDecay)));
    // Box 00 exits along both axes, f = (1, 1/2); τ_i = ln((f_i − y_i)/f_i)/λ_i.
    let y = [-0.5, -0.25];
    let t0 = exit_time(&spec, b("00"), &y, 0).unwrap();
    let t1 = exit_time(&spec, b("00"), &y, 1).unwrap();
    assert!((t0 - 1.5f64.ln()).abs() < 1e-15);
    assert!((t1 - 1.5f64.ln() / 2.0).abs() < 1e-15);
    let mut point = y.to_vec();
    let axis = Simulator::new(&spec).advance(b("00"), &mut point, 0).unwrap();
    assert_eq!(axis, Some(1));
    assert!((point[0] - (1.0 - 1.5 * (-t1).exp())).abs() < 1e-12);
    assert_eq!(point[1], 0.0);
}

#[test]
fn float_simulator_matches_exact_step_over_a_long_run() {
    let spec = spec();
    let sim = Simulator::new(&spec);
    let trap = trap(&spec);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let start = sample_in_cone(&trap.cones[0], &mut rng).unwrap();
    let mut y = start.y.clone();
    let mut label = start.wall.to;
    for step in 0..1000 {
        let exact_in: Vec<Q> = y.iter().map(|&x| q_from_f64(x).unwrap()).collect();
        let (axis_exact, next_exact) = step_exact(&spec, label, &exact_in, step).unwrap();
        let axis = sim.advance(label, &mut y, step).unwrap().unwrap();
        assert_eq!(axis, axis_exact, "step {step}");
        let expected: Vec<f64> = l1_normalize(&next_exact).iter().map(q_to_f64).collect();
        for (a, e) in y.iter().zip(&expected) {
            assert!((a - e).abs() <= 1e-12, "step {step}: {a} vs {e}");
        }
        label = label.flip(axis);
    }
}

#[test]
fn simulated_symbols_start_with_the_entered_box() {
    let spec = spec();
    let trap = trap(&spec);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = sample_in_cone(&trap.cones[0], &mut rng).unwrap();
    let traj = simulate(&spec, &start, 9).unwrap();
    assert_eq!(traj.symbols[..8], cycle_a().boxes[..]);
    assert_eq!(traj.symbols[8], b("1110"));
}

fn small_matrix() -> impl Strategy<Value = FracLinMap> {
    (proptest::collection::vec(-3i64..=3, 9), proptest::collection::vec(-3i64..=3, 3)).prop_map(|(m, p)| {
        let rows: Vec<&[i64]> = m.chunks(3).collect();
        FracLinMap { b: QMatrix::from_i64(&rows), psi: p.into_iter().map(q).collect(), exit_axis: 0, reduced: false }
    })
}

proptest! {
    #[test]
    fn composition_is_associative(a in small_matrix(), b in small_matrix(), c in small_matrix()) {
        let left = compose(&[compose(&[a.clone(), b.clone()]).unwrap(), c.clone()]).unwrap();
        let right = compose(&[a.clone(), compose(&[b.clone(), c.clone()]).unwrap()]).unwrap();
        let flat = compose(&[a, b, c]).unwrap();
        prop_assert_eq!(&left.b, &flat.b);
        prop_assert_eq!(&left.psi, &flat.psi);
        prop_assert_eq!(&right.b, &flat.b);
        prop_assert_eq!(&right.psi, &flat.psi);
    }

    #[test]
    fn composition_applies_maps_in_order(a in small_matrix(), b in small_matrix(), y in proptest::collection::vec(-4i64..=4, 3)) {
        let y: Vec<Q> = y.into_iter().map(q).collect();
        let step = a.apply(&y).and_then(|z| b.apply(&z));
        let joint = compose(&[a.clone(), b]).unwrap();
        if let Some(expected) = step {
            prop_assert_eq!(joint.apply(&y), Some(expected));
        }
    }

    #[test]
    fn rays_map_to_rays(t in 1i64..=50, seed in any::<u64>()) {
        let spec = spec();
        let m = cycle_map(&spec, &cycle_b()).unwrap();
        let trap = trap(&spec);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = sample_in_cone(&trap.cones[1], &mut rng).unwrap();
        let y: Vec<Q> = p.y[..3].iter().map(|&x| q_from_f64(x).unwrap()).collect();
        let scaled: Vec<Q> = y.iter().map(|x| x * q(t)).collect();
        let (u, v) = (m.apply(&y).unwrap(), m.apply(&scaled).unwrap());
        prop_assert!(dot(&m.psi, &y).is_positive());
        prop_assert_eq!(l1_normalize(&u), l1_normalize(&v));
    }
}
