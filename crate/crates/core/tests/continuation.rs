use cyclescope::continuation::{certify, continue_cycle, saddle_node_threshold, Termination};
use cyclescope::cycles::{find_cycles, CycleKind, CycleOptions, Stability};
use cyclescope::models::{harvesting_family, long_wait_family, HarvestSpec, MosquitoSpec};

fn nonconstant(family: &cyclescope::continuation::RotatedFamily, alpha: f64) -> usize {
    let n = family.normalized(alpha).unwrap();
    find_cycles(&n, 512).unwrap().iter().filter(|c| c.kind == CycleKind::NonConstant).count()
}

#[test]
fn harvesting_counts_flip_across_fold() {
    let family = harvesting_family(&HarvestSpec::logistic(0.1, 2.0, 1.0)).unwrap();
    let th = saddle_node_threshold(&family, (0.25, 0.5), &CycleOptions { grid: 256, ..Default::default() }).unwrap();
    assert_eq!(nonconstant(&family, th.alpha - 1e-4), 2);
    assert_eq!(nonconstant(&family, th.alpha + 1e-4), 0);
    assert!((th.cycle.jet.d1 - 1.0).abs() <= 1e-7);
    assert!(th.cycle.jet.d2.unwrap() < 0.0);
}

#[test]
fn harvesting_branches_move_toward_each_other() {
    let family = harvesting_family(&HarvestSpec::logistic(0.1, 2.0, 1.0)).unwrap();
    assert_eq!(certify(&family).unwrap().sign, -1);
    let n = family.normalized(0.1).unwrap();
    let cycles: Vec<_> = find_cycles(&n, 512).unwrap().into_iter().filter(|c| c.kind == CycleKind::NonConstant).collect();
    let path: Vec<f64> = (1..=10).map(|k| 0.1 + 0.05 * k as f64).collect();
    for seed in &cycles {
        let branch = continue_cycle(&family, seed, 0.1, &path).unwrap();
        assert_eq!(branch.termination, Termination::Merged);
        let xs: Vec<f64> = branch.points.iter().map(|p| p.cycle.x0).collect();
        let rising = seed.stability == Stability::Unstable;
        assert!(xs.windows(2).all(|w| if rising { w[1] > w[0] } else { w[1] < w[0] }), "{xs:?}");
    }
}

#[test]
fn long_wait_release_family_is_rotated() {
    let spec = MosquitoSpec { a: 2.0, mu: 1.0, xi: 1.0, c: 0.1, t: 1.5, t_bar: 1.0 };
    let family = long_wait_family(&spec).unwrap();
    let cert = certify(&family).unwrap();
    assert_eq!(cert.sign, -1);
    assert_eq!(cert.witness_piece, 0);
}
