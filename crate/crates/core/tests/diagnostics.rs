use feller::diagnostics::{ec_profile, stability_report, TimeWindow};
use feller::ifs_jump::example_halving;
use feller::{EmpiricalMeasure, McConfig, StatePoint, TestFunction};

fn pt(v: f64) -> StatePoint {
    StatePoint::new(v).unwrap()
}

#[test]
fn halving_profile_is_small_on_a_late_window() {
    let (model, _) = example_halving(1.0).unwrap();
    let window = TimeWindow::new(50.0, 100.0, vec![50.0, 75.0, 100.0]).unwrap();
    let xs = [pt(0.5), pt(0.25), pt(0.125)];
    for seed in [1, 2] {
        let mc = McConfig::new(4000, seed);
        let r = ec_profile(&model, &TestFunction::min_one(), StatePoint::ZERO, &xs, &window, &mc).unwrap();
        assert_eq!(r.metadata_value("window"), Some("[50, 100]"));
        let psi: Vec<_> = r.rows_labelled("psi").collect();
        for row in &psi {
            assert!(row.value <= 0.05 + row.half_width);
            assert!(row.value <= psi[0].value + row.half_width + psi[0].half_width);
        }
    }
}

#[test]
fn halving_distance_decays() {
    let (model, _) = example_halving(1.0).unwrap();
    let dirac = EmpiricalMeasure::dirac(StatePoint::ZERO);
    for seed in [3, 4] {
        let r = stability_report(&model, &[pt(1.0)], &[10.0, 100.0], &dirac, &McConfig::new(4000, seed)).unwrap();
        let d: Vec<_> = r.rows_labelled("distance").collect();
        assert!(d[1].value < d[0].value);
    }
}
