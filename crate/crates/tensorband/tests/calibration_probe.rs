//! Temporary calibration probe (deleted before release).
use tensorband::geometry::*;
use tensorband::model::*;
use tensorband::spectral::Band;

#[test]
#[ignore]
fn probe() {
    let spec = ModelSpec::<f64>::continuum_4d(0.0);
    let k = Momentum4::new(1.0, 0.0, 0.0, 0.0);
    println!("== delta=0, k=(1,0,0,0), neutral signs (+1,+1,+1) ==");
    for band in Band::ALL {
        let f = curvature_cartesian_pairs(&spec, &k, band).unwrap();
        println!("band {:?}: f(xy,xz,xw,yz,yw,zw) = {:?}", band, f);
    }
    let k2 = Momentum4::new(0.3, -0.9, 0.5, 0.2);
    for band in Band::ALL {
        let f = curvature_cartesian_pairs(&spec, &k2, band).unwrap();
        println!("band {:?} at k2: f = {:?}", band, f);
    }
    println!("== three-form, band Upper ==");
    let tf = tensor_three_form(&spec, &k, Band::Upper, default_fd_step(&spec, &k)).unwrap();
    println!("k=(1,0,0,0): components = {:?}", tf.components);
    println!("k=(1,0,0,0): source(with N=0.5) = {:?}", tf.source);
    let tf = tensor_three_form(&spec, &k2, Band::Upper, default_fd_step(&spec, &k2)).unwrap();
    let r = k2.norm();
    println!("k2: source = {:?}", tf.source);
    println!("k2: k/k^4  = {:?}", k2.vector() / (r*r*r*r));
    let tfm = tensor_three_form(&spec, &k2, Band::Lower, default_fd_step(&spec, &k2)).unwrap();
    println!("k2 lower: source = {:?}", tfm.source);
    let tff = tensor_three_form(&spec, &k2, Band::Flat, default_fd_step(&spec, &k2)).unwrap();
    println!("k2 flat: source = {:?}  components = {:?}", tff.source, tff.components);

    println!("== delta=1 planes: flat-band f_xy at plane (kz,kw)=(0,0.5) ==");
    let spec1 = ModelSpec::<f64>::continuum_4d(1.0);
    for (x, y) in [(0.3, 0.4), (1.0, -0.5), (0.0, 0.0)] {
        let k = Momentum4::new(x, y, 0.0, 0.5);
        let f = curvature_cartesian_pairs(&spec1, &k, Band::Flat).unwrap();
        println!("k=({x},{y},0,0.5) inside: f_xy = {}", f[0]);
    }
    for (x, y) in [(0.3, 0.4), (1.0, -0.5), (0.0, 0.0)] {
        let k = Momentum4::new(x, y, 0.0, 2.0);
        let f = curvature_cartesian_pairs(&spec1, &k, Band::Flat).unwrap();
        println!("k=({x},{y},0,2.0) outside: f_xy = {}", f[0]);
    }
    println!("== delta=1 sum rule on plane (0,0.5): bands ==");
    let k = Momentum4::new(0.3, 0.4, 0.0, 0.5);
    let mut total = 0.0;
    for band in Band::ALL {
        let f = curvature_cartesian_pairs(&spec1, &k, band).unwrap();
        println!("band {:?}: f_xy = {}", band, f[0]);
        total += f[0];
    }
    println!("sum = {total}");
    println!("== delta=1 sum rule on kpar=0 plane (0,0): ==");
    let k = Momentum4::new(0.3, 0.4, 0.0, 0.0);
    let mut total = 0.0;
    for band in Band::ALL {
        let f = curvature_cartesian_pairs(&spec1, &k, band).unwrap();
        println!("band {:?}: f_xy = {}", band, f[0]);
        total += f[0];
    }
    println!("sum = {total}");
}
