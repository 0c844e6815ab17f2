use nalgebra::Vector3;
use polyred_core::lie_core::So3;
use polyred_core::reconstruction::{reconstruct_strand, RECONSTRUCTION_THRESHOLD};
use polyred_core::strand_pde::{manufactured_fields, reference_rotation, StrandFields, StrandParams, REFERENCE_CFL_FRACTION};

fn levels(prm: &StrandParams, steps: usize) -> Vec<StrandFields> {
    (0..=steps)
        .map(|j| manufactured_fields(|s, t| reference_rotation(s, t, 1.0), prm, j as f64 * prm.dt()).unwrap())
        .collect()
}

#[test]
fn manufactured_round_trip_recovers_rotation() {
    let prm = StrandParams::reference(128, REFERENCE_CFL_FRACTION).unwrap();
    let steps = 40;
    let lv = levels(&prm, steps);
    let corner = So3::from_matrix(reference_rotation(0.0, 0.0, 1.0)).unwrap();
    let rec = reconstruct_strand(&lv, &prm, &corner, RECONSTRUCTION_THRESHOLD).unwrap();
    assert!(!rec.report.refused, "{:?}", rec.report);
    let rots = rec.into_result().unwrap();
    let mut err: f64 = 0.0;
    for (j, row) in rots.iter().enumerate() {
        for (k, r) in row.iter().enumerate() {
            err = err.max((r.matrix() - reference_rotation(prm.s(k), j as f64 * prm.dt(), 1.0)).amax());
        }
    }
    assert!(err < 1e-4, "{err:e}");
}

#[test]
fn injected_curvature_is_refused() {
    let prm = StrandParams::reference(128, REFERENCE_CFL_FRACTION).unwrap();
    let mut lv = levels(&prm, 40);
    for (j, f) in lv.iter_mut().enumerate().skip(1) {
        for k in 0..prm.grid_n() {
            let bump = 0.2 * (j as f64 / 40.0) * (2.0 * std::f64::consts::PI * prm.s(k)).sin();
            f.mu_t[k] += prm.inertia_i() * Vector3::x() * bump;
        }
    }
    let corner = So3::identity();
    let rec = reconstruct_strand(&lv, &prm, &corner, RECONSTRUCTION_THRESHOLD).unwrap();
    assert!(rec.report.refused && rec.report.path_discrepancy > RECONSTRUCTION_THRESHOLD, "{:?}", rec.report);
    assert!(rec.into_result().is_err());
}
