//! Temporary probe: protocol-route Q_T clean and degraded (deleted later).
use tensorband::model::*;
use tensorband::protocol::*;
use tensorband::spectral::Band;

#[test]
#[ignore]
fn probe_qt_protocol() {
    let spec = ModelSpec::<f64>::continuum_4d(0.0);
    let reference = HyperPoint::new(1.0, 0.8, 0.9, 1.9, 0.0);
    let t0 = std::time::Instant::now();
    let mut opts = RampOptions::<f64> { steps: 360, ..RampOptions::default() };
    let c = calibrate(&spec, &reference, Band::Upper, &opts).unwrap();
    println!("calibration C = {c:.6} ({:.1?})", t0.elapsed());
    opts.calibration = c;

    let t0 = std::time::Instant::now();
    let r = qt_via_protocol(&spec, 1.0, 0.0, Band::Upper, [10, 12], &opts).unwrap();
    println!("clean protocol qt: {:+.4} +- {:.1e}  ({:.1?})", r.value, r.error_estimate, t0.elapsed());

    for target in [0.01, 0.03] {
        let t0 = std::time::Instant::now();
        let noisy = options_for_excitation_level(&spec, &reference, Band::Upper, &opts, target, 0.05, 42).unwrap();
        println!("target {target}: lambda_cd = {:.3}, sigma = {:.2e}", noisy.lambda_cd, noisy.noise.unwrap().sigma);
        let r = qt_via_protocol(&spec, 1.0, 0.0, Band::Upper, [10, 12], &noisy).unwrap();
        println!("degraded qt @ {target}: {:+.4} +- {:.1e}  ({:.1?})", r.value, r.error_estimate, t0.elapsed());
    }
}
