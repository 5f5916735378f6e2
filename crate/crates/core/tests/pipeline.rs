//! End-to-end paths through several modules.

use tubelab::constructions::{bush_example, train_track};
use tubelab::grid::{read_family, write_family};
use tubelab::incidence::{rich_squares, richness_map};
use tubelab::multiscale::decompose_family;
use tubelab::sets::{check_delta_set, check_katz_tao, generate_ad_regular};
use tubelab::{AnyFamily, Rational};
use tubelab::{Family, Scale, Square};

#[test]
fn family_files_round_trip() {
    let b = bush_example(8, &Rational::new(3, 4)).unwrap();
    let text = write_family(&b.tubes);
    assert_eq!(read_family(&text).unwrap(), AnyFamily::Tubes(b.tubes.clone()));
    let roots = write_family(&b.roots);
    assert_eq!(read_family(&roots).unwrap(), AnyFamily::Squares(b.roots));
}

#[test]
fn generated_cantor_set_checks_and_decomposes() {
    let s = Rational::new(1, 2);
    let f = generate_ad_regular(Scale::new(8, 2).unwrap(), &s, 3).unwrap();
    assert_eq!(f.len(), 16);
    assert!(check_delta_set(&f, &s, &Rational::from_integer(4)).unwrap().ok);
    let dec = decompose_family(&f, &Rational::new(1, 10), None).unwrap();
    assert_eq!(dec.layers.len(), 1);
}

#[test]
fn bush_roots_are_maximally_rich() {
    let b = bush_example(8, &Rational::new(3, 4)).unwrap();
    let map = richness_map(&b.tubes);
    for &root in b.roots.iter() {
        assert_eq!(map.count(root) as usize, b.directions.len());
    }
}

#[test]
fn train_track_tubes_form_a_one_dimensional_set() {
    let t = train_track(8).unwrap();
    assert_eq!(t.tubes.len(), 256);
    let rep = check_katz_tao(&t.tubes, &Rational::from_integer(1), &Rational::from_integer(8)).unwrap();
    assert!(rep.ok, "achieved {}", rep.achieved_constant);
    let rectangle: Family<Square> = Family::new(t.tubes.scale(), t.rectangles[0].clone()).unwrap();
    let rich = rich_squares(&t.tubes, 4).unwrap();
    assert!(rectangle.iter().all(|p| rich.at_least.contains(p)));
}
