//! Case-file loading, validation and round-trip behaviour on the bundled
//! example system.

use cpmmg_core::casemodel::{self, parse_case, CaseError, CaseModel};

fn bundled_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../cases/rbts6f4.json")
}

pub fn bundled() -> CaseModel {
    parse_case(bundled_path()).expect("bundled case parses")
}

#[test]
fn bundled_case_matches_der_tables() {
    let case = bundled();
    assert_eq!(case.num_microgrids(), 5);
    let mg2 = &case.doc.microgrids[1];
    assert_eq!(mg2.tag, 2);
    assert_eq!(mg2.wind.as_ref().unwrap().capacity_mw, 1.1);
    assert_eq!(mg2.pv.as_ref().unwrap().capacity_mw, 0.5);
    // every residential load point carries the three-segment split
    for mg in &case.doc.microgrids {
        for lp in &mg.load_points {
            if [1, 5, 6, 10, 11, 14, 19].contains(&lp.bus) {
                let segs: Vec<(f64, f64)> =
                    lp.segments.iter().map(|s| (s.proportion, s.cost)).collect();
                assert_eq!(segs, vec![(0.30, 0.1), (0.50, 0.15), (0.20, 0.2)]);
            }
        }
    }
}

#[test]
fn bundled_segment_counts_match_sector_mix() {
    let case = bundled();
    let counts: Vec<usize> = case.catalogs.iter().map(|c| c.num_segments()).collect();
    // MG3 lacks an industrial type-2 bus, so it has six unique costs.
    assert_eq!(counts, vec![7, 7, 6, 7, 7]);
}

#[test]
fn dangling_reference_is_reported() {
    let case = bundled();
    let mut doc = case.doc.clone();
    doc.lines[1].to = 99;
    let err = CaseModel::from_doc(doc).unwrap_err();
    assert!(matches!(err, CaseError::DanglingRef { .. }), "{err}");
}

#[test]
fn roundtrip_preserves_model() {
    let case = bundled();
    let text = case.to_json();
    let again = CaseModel::from_json(&text).unwrap();
    assert_eq!(case, again);
}

#[test]
fn aggregation_conserves_total_demand() {
    let case = bundled();
    for (m, mg) in case.doc.microgrids.iter().enumerate() {
        let lp_total: f64 = mg.load_points.iter().map(|lp| lp.peak_mw).sum();
        let seg_total: f64 = (0..case.catalogs[m].num_segments())
            .map(|r| case.segment_raw_demand(m, r, 1.0))
            .sum();
        assert!((lp_total - seg_total).abs() < 1e-9, "mg {m}: {lp_total} vs {seg_total}");
    }
}

#[test]
fn non_radial_case_rejected() {
    let case = bundled();
    let mut doc = case.doc.clone();
    // second feed into microgrid 2 creates a cycle
    let mut extra = doc.lines[1].clone();
    extra.from = casemodel::LineEnd::Mg(3);
    doc.lines.push(extra);
    let err = CaseModel::from_doc(doc).unwrap_err();
    assert!(matches!(err, CaseError::Invalid(_)), "{err}");
}

#[test]
fn bad_segment_sum_rejected() {
    let case = bundled();
    let mut doc = case.doc.clone();
    doc.microgrids[0].load_points[0].segments[0].proportion += 0.05;
    let err = CaseModel::from_doc(doc).unwrap_err();
    assert!(format!("{err}").contains("proportions sum"));
}

#[test]
fn parse_error_carries_location() {
    let text = "{ \"name\": \"x\", ";
    let err = CaseModel::from_json(text).unwrap_err();
    let msg = format!("{err}");
    assert!(msg.contains("line"), "{msg}");
}
