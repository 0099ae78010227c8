//! Third probe: metric-volume three-form for all bands (deleted later).
use nalgebra::SMatrix;
use tensorband::geometry::*;
use tensorband::model::*;
use tensorband::spectral::Band;

#[test]
#[ignore]
fn probe_metric_volume() {
    let spec = ModelSpec::<f64>::continuum_4d(0.0);
    let tangents: Vec<_> = (0..4).map(|mu| {
        let mut t = nalgebra::SVector::<f64, 4>::zeros();
        t[mu] = 1.0;
        t
    }).collect();
    for k in [
        Momentum4::new(1.0, 0.0, 0.0, 0.0),
        Momentum4::new(0.3, -0.9, 0.5, 0.2),
        Momentum4::new(-0.7, 0.4, -0.2, 0.6),
    ] {
        let r = k.norm();
        println!("k = {:?} |k|={r}", k.vector().transpose());
        println!("  k/k^4 = {:?}", (k.vector() / (r*r*r*r)).transpose());
        for band in Band::ALL {
            let qgt = qgt_at_point(&spec, &k, band, &tangents).unwrap();
            let mut g = SMatrix::<f64, 4, 4>::zeros();
            for mu in 0..4 {
                for nu in 0..4 {
                    g[(mu, nu)] = qgt.trace_metric(mu, nu);
                }
            }
            // complement minors: remove row/col rho
            let minor = |rho: usize| {
                let idx: Vec<usize> = (0..4).filter(|&i| i != rho).collect();
                let mut m = SMatrix::<f64, 3, 3>::zeros();
                for (i, &a) in idx.iter().enumerate() {
                    for (j, &b) in idx.iter().enumerate() {
                        m[(i, j)] = g[(a, b)];
                    }
                }
                m.determinant()
            };
            let dets: Vec<f64> = (0..4).map(minor).collect();
            let vols: Vec<f64> = dets.iter().map(|d| (2.0 * d.max(0.0)).sqrt()).collect();
            println!("  band {:?}: sqrt(2 det) per complement = {:?}", band, vols);
            // eigenvalues of g for rank check
            let evs = g.symmetric_eigen().eigenvalues;
            let mut e: Vec<f64> = evs.iter().copied().collect();
            e.sort_by(f64::total_cmp);
            println!("             eigen(G4) = {:?}", e);
        }
    }
    // TB check: node at kw=pi/3 for Lambda=0.5; wrap degree d for a small sphere
    let tb = ModelSpec::<f64>::tight_binding(0.5);
    let k = Momentum4::new(0.3, 0.2, -0.1, 1.2);
    for band in [Band::Upper] {
        let qgt = qgt_at_point(&tb, &k, band, &tangents).unwrap();
        let mut g = SMatrix::<f64, 4, 4>::zeros();
        for mu in 0..4 { for nu in 0..4 { g[(mu,nu)] = qgt.trace_metric(mu,nu); } }
        let evs = g.symmetric_eigen().eigenvalues;
        let mut e: Vec<f64> = evs.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        println!("TB upper eigen(G4) = {:?}", e);
    }
}
