#[path = "common/anchors.rs"]
mod anchors;

#[test]
fn closed_form_values() {
    for a in anchors::anchors() {
        assert!(a.holds(1e-6), "{}: got {} want {}", a.name, a.got, a.want);
    }
}

#[test]
fn parity_z_rounds_to_three_decimals() {
    let z = anchors::anchors()
        .into_iter()
        .find(|a| a.name.starts_with("parity"))
        .unwrap();
    assert!((z.got - 2.887).abs() < 5e-4);
}

#[test]
fn extreme_ratios_reach_the_top_levels() {
    assert_eq!(anchors::ratio_level(101), 5);
    assert_eq!(anchors::ratio_level(500), 5);
    assert_eq!(anchors::ratio_level(100), 4);
    assert_eq!(anchors::ratio_level(11), 4);
    assert_eq!(anchors::ratio_level(10), 3);
}
