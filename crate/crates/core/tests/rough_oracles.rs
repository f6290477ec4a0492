//! Estimator checks against closed-form and brute-force oracles that do not
//! go through the DSL or the space evaluator.

use proptest::prelude::*;
use roughlab_core::*;

fn paper() -> (SMetricSpace, SequenceSpec) {
    (
        make_builtin("paper_line").unwrap(),
        SequenceSpec::closed_form(&["pow(-1,n)/pow(2,n)"]).unwrap(),
    )
}

/// x_n = (-1)^n / 2^n computed directly.
fn paper_term(n: u64) -> f64 {
    (-0.5f64).powi(n as i32)
}

/// S(x, x, p) = 2|x - p| on the paper line.
fn oracle_s(x: f64, p: f64) -> f64 {
    2.0 * (x - p).abs()
}

fn oracle_tail_sup(p: f64, n0: u64, n1: u64) -> f64 {
    (n0..=n1).map(|n| oracle_s(paper_term(n), p)).fold(0.0, f64::max)
}

fn pt(x: f64) -> Point {
    Point::scalar(x).unwrap()
}

fn w(n0: u64, n1: u64) -> TailWindow {
    TailWindow::new(n0, n1).unwrap()
}

#[test]
fn tail_sup_matches_brute_force() {
    let (space, seq) = paper();
    let got = tail_sup(&space, &seq, &pt(0.0), w(1, 40)).unwrap();
    assert_eq!(got, oracle_tail_sup(0.0, 1, 40));
    assert_eq!(got, 1.0);
    let got = tail_sup(&space, &seq, &pt(0.0), w(10, 40)).unwrap();
    assert_eq!(got, oracle_tail_sup(0.0, 10, 40));
    assert_eq!(got, 0.001953125);
    for p in [-1.3, -0.2, 0.05, 0.7] {
        assert_eq!(
            tail_sup(&space, &seq, &pt(p), w(3, 60)).unwrap(),
            oracle_tail_sup(p, 3, 60)
        );
    }
    let c = SequenceSpec::constant(&pt(0.75));
    assert_eq!(tail_sup(&space, &c, &pt(0.75), w(1, 100)).unwrap(), 0.0);
}

#[test]
fn limsup_examples() {
    let (space, seq) = paper();
    let sched = Schedule::default();
    for (p, expect) in [(0.0, 0.0), (0.5, 1.0), (1.0, 2.0)] {
        let est = limsup_estimate(&space, &seq, &pt(p), &sched, 1e-6).unwrap();
        assert!(est.stable, "p={p}");
        assert!(
            (est.limsup_est - expect).abs() < 1e-9,
            "p={p}: {}",
            est.limsup_est
        );
        assert_eq!(est.sup_values.len(), 9);
        assert!(est.limsup_est <= est.sup_values.iter().cloned().fold(0.0, f64::max));
        assert!(est.liminf_est >= 0.0);
    }
}

#[test]
fn min_roughness_examples() {
    let (space, seq) = paper();
    let cfg = TailConfig::default();
    assert!(min_roughness(&space, &seq, &pt(0.0), &cfg).unwrap().degree.abs() < 1e-12);
    let r = min_roughness(&space, &seq, &pt(0.25), &cfg).unwrap();
    assert!((r.degree - 0.5).abs() < 1e-12 && r.stable);
    // r = 2|-1/2 - 1| + 1 = 4 is enough for p = 1, which only needs 2
    let r1 = min_roughness(&space, &seq, &pt(1.0), &cfg).unwrap().degree;
    assert!((r1 - 2.0).abs() < 1e-12);
    assert!(r1 <= 2.0 * (-0.5f64 - 1.0).abs() + 1.0);
}

#[test]
fn min_roughness_tracks_twice_abs_on_grid() {
    let (space, seq) = paper();
    let cfg = TailConfig::default();
    let n0_last = cfg.schedule.last().n0();
    let bound = 2.0 * 2f64.powi(-(n0_last as i32));
    for i in 0..=400 {
        let p = -2.0 + i as f64 * 0.01;
        let r = min_roughness(&space, &seq, &pt(p), &cfg).unwrap();
        assert!((r.degree - 2.0 * p.abs()).abs() <= bound.max(1e-12), "p={p}");
    }
}

#[test]
fn is_r_limit_examples() {
    let (space, seq) = paper();
    let cfg = TailConfig::default();
    let v = is_r_limit(&space, &seq, &pt(0.5), 1.0, &cfg).unwrap();
    assert_eq!(v.outcome, Outcome::Accepted);
    assert!(v.margin.abs() < 1e-9);
    assert_eq!(
        is_r_limit(&space, &seq, &pt(1.0), 1.0, &cfg).unwrap().outcome,
        Outcome::Rejected
    );
    assert_eq!(
        is_r_limit(&space, &seq, &pt(0.0), 0.0, &cfg).unwrap().outcome,
        Outcome::Accepted
    );
    assert!(is_r_limit(&space, &seq, &pt(0.0), -1.0, &cfg).is_err());
}

#[test]
fn unbounded_sequences_are_inconclusive() {
    let space = make_builtin("paper_line").unwrap();
    let seq = SequenceSpec::closed_form(&["n"]).unwrap();
    let v = is_r_limit(&space, &seq, &pt(0.0), 1.0, &TailConfig::default()).unwrap();
    assert_eq!(v.outcome, Outcome::Inconclusive);
}

fn hausdorff_to_interval(pts: &[Point], lo: f64, hi: f64) -> f64 {
    let xs: Vec<f64> = pts.iter().map(|p| p[0]).collect();
    let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (min - lo).abs().max((max - hi).abs())
}

#[test]
fn limit_set_of_paper_instance() {
    let (space, seq) = paper();
    let cfg = TailConfig::default();
    let bx = SearchBox::cube(-2.0, 2.0, 1).unwrap();
    let region = estimate_limit_set(&space, &seq, 1.0, &bx, 0.01, &cfg).unwrap();
    assert_eq!(region.cells.len(), 401);
    assert_eq!(region.inconclusive_count(), 0);
    assert!(hausdorff_to_interval(&region.inner_points, -0.5, 0.5) <= 0.01 + cfg.dec_tol);
    // inner points are contiguous
    assert_eq!(region.inner_points.len(), 101);
    for p in &region.inner_points {
        assert!(is_r_limit(&space, &seq, p, 1.0, &cfg).unwrap().is_accepted());
    }
    for p in region.outer_points.iter().step_by(17) {
        assert_eq!(
            is_r_limit(&space, &seq, p, 1.0, &cfg).unwrap().outcome,
            Outcome::Rejected
        );
    }

    let region0 = estimate_limit_set(&space, &seq, 0.0, &bx, 0.01, &cfg).unwrap();
    assert_eq!(region0.inner_points, vec![pt(0.0)]);
}

#[test]
fn discrete_constant_limit_set_is_singleton() {
    let space = make_builtin("discrete(1)").unwrap();
    let seq = SequenceSpec::constant(&pt(0.5));
    let bx = SearchBox::cube(-1.0, 1.0, 1).unwrap();
    let region = estimate_limit_set(&space, &seq, 0.5, &bx, 0.1, &TailConfig::default()).unwrap();
    assert_eq!(region.inner_points, vec![pt(0.5)]);
    assert_eq!(region.outer_points.len(), 20);
}

#[test]
fn diameter_examples() {
    let space = make_builtin("paper_line").unwrap();
    assert_eq!(set_diameter(&space, &[pt(-0.5), pt(0.5)]).unwrap(), 2.0);
    assert_eq!(set_diameter(&space, &[pt(0.3)]).unwrap(), 0.0);
    let grid: Vec<Point> = (0..=100).map(|i| pt(-0.5 + i as f64 * 0.01)).collect();
    assert!((set_diameter(&space, &grid).unwrap() - 2.0).abs() < 1e-12);
    assert!(set_diameter(&space, &[]).is_err());
}

/// max over ordered pairs of 2|x_n - x_m|.
fn oracle_pair_bound(xs: &[f64]) -> f64 {
    let mut best = 0.0f64;
    for a in xs {
        for b in xs {
            best = best.max(oracle_s(*a, *b));
        }
    }
    best
}

#[test]
fn boundedness_examples() {
    let (space, seq) = paper();
    let b = boundedness_bound(&space, &seq, w(1, 64), 1e-3).unwrap();
    let xs: Vec<f64> = (1..=64).map(paper_term).collect();
    assert_eq!(b.bound, oracle_pair_bound(&xs));
    assert_eq!(b.bound, 1.5);
    assert_eq!(b.argmax, (1, 2));
    assert!(!b.growing);

    let c = SequenceSpec::constant(&pt(2.0));
    let b = boundedness_bound(&space, &c, w(1, 64), 1e-3).unwrap();
    assert_eq!(b.bound, 0.0);
    assert!(!b.growing);

    let lin = SequenceSpec::closed_form(&["n"]).unwrap();
    let b = boundedness_bound(&space, &lin, w(1, 64), 1e-3).unwrap();
    let xs: Vec<f64> = (1..=64).map(|n| n as f64).collect();
    assert_eq!(b.bound, oracle_pair_bound(&xs));
    assert_eq!(b.bound, 126.0);
    assert!(b.growing);
}

#[test]
fn cauchy_examples() {
    let (space, seq) = paper();
    let v = is_cauchy(&space, &seq, 0.1, w(10, 200)).unwrap();
    assert_eq!(v.outcome, Outcome::Accepted);
    let spread = oracle_pair_bound(&(10..=200).map(paper_term).collect::<Vec<_>>());
    assert_eq!(spread, 2.0 * (2f64.powi(-10) + 2f64.powi(-11)));
    assert!((v.margin - (0.1 - spread)).abs() < 1e-15);

    let alt = SequenceSpec::closed_form(&["pow(-1,n)"]).unwrap();
    assert_eq!(
        is_cauchy(&space, &alt, 0.1, w(10, 200)).unwrap().outcome,
        Outcome::Rejected
    );

    let c = SequenceSpec::constant(&pt(-3.0));
    assert_eq!(
        is_cauchy(&space, &c, 1e-9, w(1, 50)).unwrap().outcome,
        Outcome::Accepted
    );

    // the whole window is spread out but the late half is tight
    assert_eq!(
        is_cauchy(&space, &seq, 0.1, w(1, 200)).unwrap().outcome,
        Outcome::Inconclusive
    );
    assert!(is_cauchy(&space, &seq, 0.0, w(1, 2)).is_err());
}

#[test]
fn rough_cauchy_degree_of_alternation() {
    let space = make_builtin("paper_line").unwrap();
    let alt = SequenceSpec::closed_form(&["pow(-1,n)"]).unwrap();
    assert_eq!(rough_cauchy_degree(&space, &alt, w(1, 100)).unwrap(), 4.0);
}

#[test]
fn cluster_point_examples() {
    let (space, seq) = paper();
    let cfg = TailConfig::default();
    let bx = SearchBox::cube(-2.0, 2.0, 1).unwrap();
    assert_eq!(
        cluster_points(&space, &seq, &bx, 0.01, &cfg).unwrap(),
        vec![pt(0.0)]
    );

    let alt = SequenceSpec::closed_form(&["pow(-1,n)"]).unwrap();
    assert_eq!(
        cluster_points(&space, &alt, &bx, 0.01, &cfg).unwrap(),
        vec![pt(-1.0), pt(1.0)]
    );

    let c = SequenceSpec::constant(&pt(1.25));
    assert_eq!(
        cluster_points(&space, &c, &bx, 0.01, &cfg).unwrap(),
        vec![pt(1.25)]
    );
}

#[test]
fn euclidean_limit_set_is_a_disk() {
    let space = make_builtin("metric_induced_euclidean(2)").unwrap();
    let seq = SequenceSpec::closed_form(&["1/n", "0"]).unwrap();
    let cfg = TailConfig::default().with_tolerances(1e-3, 1e-3);
    let bx = SearchBox::cube(-1.0, 1.0, 2).unwrap();
    let region = estimate_limit_set(&space, &seq, 1.0, &bx, 0.05, &cfg).unwrap();
    assert_eq!(region.inconclusive_count(), 0);
    for c in &region.cells {
        let norm = c.point[0].hypot(c.point[1]);
        if (norm - 0.5).abs() > 0.05 {
            assert_eq!(c.verdict.is_accepted(), norm < 0.5, "{}", c.point);
        }
    }
}

/// Classical convergence oracle for the regression sequences: the limit is
/// known in closed form.
fn classical_limit(name: &str) -> Option<f64> {
    match name {
        "paper" => Some(0.0),
        "alt" => None,
        "const" => Some(0.75),
        _ => unreachable!(),
    }
}

#[test]
fn zero_roughness_is_classical_convergence() {
    let space = make_builtin("paper_line").unwrap();
    let cfg = TailConfig::default();
    let bx = SearchBox::cube(-2.0, 2.0, 1).unwrap();
    for (name, expr) in [
        ("paper", "pow(-1,n)/pow(2,n)"),
        ("alt", "pow(-1,n)"),
        ("const", "0.75"),
    ] {
        let seq = SequenceSpec::closed_form(&[expr]).unwrap();
        let region = estimate_limit_set(&space, &seq, 0.0, &bx, 0.01, &cfg).unwrap();
        let expect: Vec<Point> = classical_limit(name).into_iter().map(pt).collect();
        assert_eq!(region.inner_points, expect, "{name}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tail_sup_antitone_in_start(p in -2.0f64..2.0, a in 1u64..30, b in 0u64..30, len in 0u64..40) {
        let (space, seq) = paper();
        let (n0, n0_inner) = (a, a + b);
        let n1 = n0_inner + len;
        let outer = tail_sup(&space, &seq, &pt(p), w(n0, n1)).unwrap();
        let inner = tail_sup(&space, &seq, &pt(p), w(n0_inner, n1)).unwrap();
        prop_assert!(inner <= outer);
    }

    #[test]
    fn membership_agrees_with_roughness(p in -2.0f64..2.0, r in 0.0f64..4.0) {
        let (space, seq) = paper();
        let cfg = TailConfig::default();
        let v = is_r_limit(&space, &seq, &pt(p), r, &cfg).unwrap();
        let m = min_roughness(&space, &seq, &pt(p), &cfg).unwrap();
        prop_assert_eq!(v.is_accepted(), m.degree <= r + cfg.dec_tol);
    }

    #[test]
    fn limit_sets_grow_with_roughness(r1 in 0.0f64..3.0, dr in 0.0f64..2.0, alt in 0.0f64..1.0) {
        let space = make_builtin("paper_line").unwrap();
        let seq = SequenceSpec::closed_form(&[format!("{alt}*pow(-1,n) + 1/pow(2,n)")]).unwrap();
        let cfg = TailConfig { schedule: Schedule::doubling(4, 9).unwrap(), ..TailConfig::default() };
        let bx = SearchBox::cube(-3.0, 3.0, 1).unwrap();
        let small = estimate_limit_set(&space, &seq, r1, &bx, 0.05, &cfg).unwrap();
        let big = estimate_limit_set(&space, &seq, r1 + dr, &bx, 0.05, &cfg).unwrap();
        for (a, b) in small.cells.iter().zip(&big.cells) {
            prop_assert!(!a.verdict.is_accepted() || b.verdict.is_accepted());
        }
    }
}
