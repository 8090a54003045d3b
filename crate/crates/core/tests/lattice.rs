use msalab::lattice::{
    clamp_center, cover_disjointness_check, dangerous_cover, out_shell_sites, CoverCase, DangerousCover,
    Disjointness, LatticeBox, Site,
};
use proptest::prelude::*;

fn site(c: &[i64]) -> Site {
    Site(c.to_vec())
}

#[test]
fn out_shell_examples() {
    let b = LatticeBox::centered(1, 2).unwrap();
    assert_eq!(out_shell_sites(&b).unwrap(), vec![site(&[-2]), site(&[2])]);

    let b = LatticeBox::centered(1, 16).unwrap();
    let shell: Vec<i64> = out_shell_sites(&b).unwrap().iter().map(|s| s.0[0]).collect();
    let expected: Vec<i64> = (-16..=16).filter(|y: &i64| y.abs() >= 10).collect();
    assert_eq!(shell, expected);

    let b = LatticeBox::centered(2, 2).unwrap();
    let shell = out_shell_sites(&b).unwrap();
    assert_eq!(shell.len(), 16);
    assert!(shell.iter().all(|s| s.sup_dist(&Site::origin(2)) == 2));

    assert!(out_shell_sites(&LatticeBox::centered(1, 1).unwrap()).is_err());
}

#[test]
fn box_indexing_round_trips() {
    let b = LatticeBox::new(site(&[3, -1]), 2).unwrap();
    assert_eq!(b.len(), 25);
    for (i, s) in b.sites().enumerate() {
        assert_eq!(b.index_of(s.coords()), Some(i));
    }
    assert_eq!(b.index_of(&[6, 0]), None);
    let sub = LatticeBox::new(site(&[3, 0]), 1).unwrap();
    assert_eq!(b.indices_of(&sub).unwrap().len(), 9);
    assert!(b.indices_of(&LatticeBox::new(site(&[5, 0]), 1).unwrap()).is_err());
}

#[test]
fn clamp_examples() {
    let x = Site::origin(1);
    assert_eq!(clamp_center(&site(&[3]), &x, 10, 2).unwrap(), site(&[3]));
    assert_eq!(clamp_center(&site(&[9]), &x, 10, 2).unwrap(), site(&[8]));
    assert_eq!(
        clamp_center(&site(&[9, -10]), &Site::origin(2), 10, 2).unwrap(),
        site(&[8, -8])
    );
    assert!(clamp_center(&site(&[3]), &x, 10, 11).is_err());
    assert!(clamp_center(&site(&[11]), &x, 10, 2).is_err());
}

#[test]
fn separate_centers_keep_small_cubes() {
    let l = 2;
    let parent = LatticeBox::centered(2, 30 * l).unwrap();
    let bad = [site(&[-20, 0]), site(&[0, 0]), site(&[20, 5])];
    let cover = dangerous_cover(&bad, &parent, l).unwrap();
    assert_eq!(cover.case, CoverCase::Separate);
    assert!(cover.cubes.iter().all(|c| c.radius() == 2 * l));
    assert_eq!(cover.total_diameter(), 12 * l);
    assert!(cover.invariants().all());
    assert!(cover_disjointness_check(&cover, &bad, l).passed());
}

#[test]
fn close_pair_merges() {
    let l = 1;
    let parent = LatticeBox::centered(1, 30).unwrap();
    let bad = [site(&[-2]), site(&[0]), site(&[20])];
    let cover = dangerous_cover(&bad, &parent, l).unwrap();
    assert_eq!(cover.case, CoverCase::MergedPair);
    let radii: Vec<i64> = cover.cubes.iter().map(LatticeBox::radius).collect();
    assert_eq!(radii, vec![8 * l, 2 * l]);
    assert!(cover.invariants().all());
    assert!(cover_disjointness_check(&cover, &bad, l).passed());
}

#[test]
fn coincident_centers_fit_budget() {
    let l = 2;
    let parent = LatticeBox::centered(1, 30 * l).unwrap();
    let bad = vec![site(&[5]); 3];
    let cover = dangerous_cover(&bad, &parent, l).unwrap();
    assert!(cover.total_diameter() <= 52 * l);
    assert!(cover.invariants().all());
    assert!(cover_disjointness_check(&cover, &bad, l).passed());
}

#[test]
fn empty_bad_set_passes() {
    let parent = LatticeBox::centered(1, 30).unwrap();
    let cover = dangerous_cover(&[], &parent, 1).unwrap();
    assert_eq!(cover.case, CoverCase::Empty);
    assert!(cover.invariants().all());
    assert!(cover_disjointness_check(&cover, &[], 1).passed());
}

#[test]
fn shrunken_cover_fails_next_to_bad_center() {
    let l = 2;
    let parent = LatticeBox::centered(1, 30 * l).unwrap();
    let bad = [site(&[-20]), site(&[0]), site(&[20])];
    let cover = dangerous_cover(&bad, &parent, l).unwrap();
    let shrunk = DangerousCover::from_parts(
        parent.clone(),
        l,
        cover
            .cubes
            .iter()
            .map(|c| LatticeBox::new(c.center().clone(), 2 * l - 1).unwrap())
            .collect(),
        cover.starred.clone(),
    );
    match cover_disjointness_check(&shrunk, &bad, l) {
        Disjointness::Fail { witness, bad_center } => assert_eq!(witness.sup_dist(&bad_center), 2 * l),
        other => panic!("expected a failure, got {other:?}"),
    }
    assert!(!shrunk.invariants().covers_starred);
}

#[test]
fn cover_rejects_bad_preconditions() {
    let parent = LatticeBox::centered(1, 20).unwrap();
    assert!(dangerous_cover(&[site(&[0])], &parent, 1).is_err());
    let parent = LatticeBox::centered(1, 30).unwrap();
    assert!(dangerous_cover(&[site(&[30])], &parent, 1).is_err());
    assert!(dangerous_cover(&vec![site(&[0]); 4], &parent, 1).is_err());
}

proptest! {
    #[test]
    fn clamp_is_idempotent_and_local(
        z in prop::collection::vec(-10i64..=10, 2),
        m in 0i64..=10,
    ) {
        let x = Site::origin(2);
        let z = Site(z);
        let c = clamp_center(&z, &x, 10, m).unwrap();
        prop_assert_eq!(clamp_center(&c, &x, 10, m).unwrap(), c.clone());
        prop_assert!(c.sup_dist(&x) <= 10 - m);
        prop_assert!(c.sup_dist(&z) <= m);
    }

    #[test]
    fn out_shell_partitions_by_radius(radius in 2i64..40) {
        let b = LatticeBox::centered(1, radius).unwrap();
        let shell = out_shell_sites(&b).unwrap();
        let t = (radius as f64).powf(0.8);
        let inner = b.sites().filter(|s| (s.0[0].abs() as f64) <= t).count();
        prop_assert_eq!(inner + shell.len(), b.len());
        prop_assert!(shell.iter().all(|s| (s.0[0].abs() as f64) > t));
    }

    #[test]
    fn random_covers_hold(
        zs in prop::collection::vec(prop::collection::vec(-29i64..=29, 2), 0..=3),
    ) {
        let parent = LatticeBox::centered(2, 30).unwrap();
        let bad: Vec<Site> = zs.into_iter().map(Site).collect();
        let cover = dangerous_cover(&bad, &parent, 1).unwrap();
        prop_assert!(cover.invariants().all());
        prop_assert!(cover_disjointness_check(&cover, &bad, 1).passed());
    }
}
