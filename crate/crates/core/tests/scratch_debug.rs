#[test]
fn debug_mellin_mass() {
    use aolink_core::dist::{GridDensity, Pdf, mellin_product};
    use aolink_core::channel::{BeamGeometry, beam_wander_distribution};
    let geom = BeamGeometry::new(10e-6, 500e3, 1.5, 1e-6).unwrap();
    let bw = beam_wander_distribution(&geom, 2048).unwrap();
    let n = 2001;
    let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let u = Pdf::Grid(GridDensity::normalized(xs, vec![1.0; n]).unwrap());
    // raw convolution WITHOUT normalization: replicate internals by checking mass pre-normalize indirectly
    let p = mellin_product(bw.pdf(), &u, 0.63, 4096).unwrap();
    eprintln!("bw mean {} mass {}", bw.pdf().mean(), bw.pdf().total_mass());
    eprintln!("u mean {} mass {}", u.mean(), u.total_mass());
    eprintln!("prod mean {} (want {})", p.mean(), bw.pdf().mean()*u.mean()*0.63);
    eprintln!("prod mass {}", p.total_mass());
    if let Pdf::Grid(g) = &p {
        // dump a few densities vs analytic h(tau) = (1/s) \int_max(xl,tau/s)^xh f(x)/x dx
        let (xl, xh) = bw.pdf().support();
        eprintln!("bw support [{xl}, {xh}]");
        for &t in &[1e-10, 1e-6, 1e-3, 0.005, 0.01, 0.015, 0.0185, 0.02, 0.024, 0.027, 0.0277] {
            eprintln!("h({t}) = {}", g.density_at(t));
        }
    }
    panic!("debug");
}
