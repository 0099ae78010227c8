//! Temporary invariant calibration probe (deleted later).
use tensorband::invariants::*;
use tensorband::model::*;
use tensorband::spectral::Band;

#[test]
#[ignore]
fn probe_invariants() {
    let spec = ModelSpec::<f64>::continuum_4d(0.0);
    let origin = Momentum4::new(0.0, 0.0, 0.0, 0.0);
    let r = qt_cartesian(&spec, 1.0, &origin, Band::Upper, [32, 24, 24], false).unwrap();
    println!("qt upper centered: {:+.6} +- {:.2e}", r.value, r.error_estimate);
    let r = qt_cartesian(&spec, 1.0, &origin, Band::Lower, [32, 24, 24], false).unwrap();
    println!("qt lower centered: {:+.6} +- {:.2e}", r.value, r.error_estimate);
    let r = qt_cartesian(&spec, 1.0, &origin, Band::Flat, [32, 24, 24], false).unwrap();
    println!("qt flat centered: {:+.6} +- {:.2e}", r.value, r.error_estimate);
    let shifted = Momentum4::new(0.0, 0.0, 0.0, 1.5);
    let r = qt_cartesian(&spec, 1.0, &shifted, Band::Upper, [32, 24, 24], false).unwrap();
    println!("qt upper shifted(1.5): {:+.6} +- {:.2e}", r.value, r.error_estimate);

    let r = qt_metric_route(&spec, 1.0, 0.0, Band::Upper, [32, 32], false).unwrap();
    println!("qt-metric L=0: {:+.6} +- {:.2e}", r.value, r.error_estimate);
    let r = qt_metric_route(&spec, 1.0, 0.5, Band::Upper, [32, 32], false).unwrap();
    println!("qt-metric L=0.5: {:+.6} +- {:.2e}", r.value, r.error_estimate);
    let r = qt_metric_route(&spec, 1.0, 1.25, Band::Upper, [48, 48], false).unwrap();
    println!("qt-metric L=1.25: {:+.6} +- {:.2e}", r.value, r.error_estimate);
    let r = qt_metric_route(&spec, 1.0, 1.5, Band::Upper, [32, 32], false).unwrap();
    println!("qt-metric L=1.5: {:+.6} +- {:.2e}", r.value, r.error_estimate);

    // 3D dipole, delta = 0
    let spec3 = ModelSpec::<f64>::continuum_3d(0.0);
    let r = dipole_sphere(&spec3, [0.0; 3], 1.0, Band::Flat, Hemisphere::Full, [32, 32], false).unwrap();
    println!("dipole full flat: {:+.6} +- {:.2e}", r.value, r.error_estimate);
    let r = dipole_sphere(&spec3, [0.0; 3], 1.0, Band::Flat, Hemisphere::KzPositive, [32, 32], false).unwrap();
    println!("dipole hemi+ flat: {:+.6} +- {:.2e}", r.value, r.error_estimate);
    let r = dipole_sphere(&spec3, [0.0; 3], 1.0, Band::Upper, Hemisphere::KzPositive, [32, 32], false).unwrap();
    println!("dipole hemi+ upper: {:+.6} +- {:.2e}", r.value, r.error_estimate);

    // delta = 1 planes
    let spec1 = ModelSpec::<f64>::continuum_4d(1.0);
    for (kpar, ext) in [(0.0, 6.0), (0.5, 6.0), (2.0, 10.0)] {
        for band in Band::ALL {
            match euler_plane(&spec1, PlaneAt::at_kpar(kpar), ext, band, [64, 48], false) {
                Ok(r) => println!("euler kpar={kpar} band {:?}: {:+.6} +- {:.2e} (t={:.0}ms)", band, r.value, r.error_estimate, r.wall_time_ms),
                Err(e) => println!("euler kpar={kpar} band {:?}: ERR {e}", band),
            }
        }
    }
    // polar route comparison
    let r = euler_polar_route(&spec1, 0.5, 6.0, Band::Flat, [64, 48], false).unwrap();
    println!("euler-polar kpar=0.5 flat: {:+.6} +- {:.2e}", r.value, r.error_estimate);

    // 3D dipole delta = 1: sphere around k+ = (0,0,1)
    let spec31 = ModelSpec::<f64>::continuum_3d(1.0);
    let r = dipole_sphere(&spec31, [0.0, 0.0, 1.0], 0.5, Band::Flat, Hemisphere::Full, [32, 32], false).unwrap();
    println!("dipole k+ flat delta=1: {:+.6} +- {:.2e}", r.value, r.error_estimate);
    let r = dipole_planes(&spec31, 0.0, Band::Flat, 8.0, [64, 48], false).unwrap();
    println!("dipole plane kz=0 flat: {:+.6} +- {:.2e}", r.value, r.error_estimate);
    let r = dipole_planes(&spec31, 2.0, Band::Flat, 8.0, [64, 48], false).unwrap();
    println!("dipole plane kz=2: {:+.6} +- {:.2e}", r.value, r.error_estimate);

    // TB
    let tb = ModelSpec::<f64>::tight_binding(0.5);
    let rows = tb_node_scan(&tb, &[0.0, 0.5, 0.9, 1.0, 1.2], 64);
    for row in &rows {
        println!("tb L={}: nodes {:?} min_gap {:.2e}", row.lambda, row.nodes, row.min_gap);
    }
    let r = qt_cartesian(&tb, 1.6, &origin, Band::Upper, [32, 24, 24], false).unwrap();
    println!("tb qt pair-enclosing: {:+.6} +- {:.2e}", r.value, r.error_estimate);
    let node = Momentum4::new(0.0, 0.0, 0.0, (0.5f64).acos());
    let r = qt_cartesian(&tb, 0.5, &node, Band::Upper, [32, 24, 24], false).unwrap();
    println!("tb qt around +node: {:+.6} +- {:.2e}", r.value, r.error_estimate);
}
