use dcov::lsd::*;
use dcov::spike;
use num_complex::Complex64;

fn main() {
    // far-field cubic roots
    let z = Complex64::new(4.0e5, 3.0e5);
    match cubic_reference(2.0, z) {
        Ok(r) => println!("far-field picked root {r:e}, -1/z = {:e}", -1.0/z),
        Err(e) => println!("far-field error: {e}"),
    }
    // c=5 comparison grid
    let model = ModelSpec::isotropic(5.0).unwrap();
    let mut warm = None;
    let mut worst = (0.0f64, 0.0f64);
    for i in (0..80).rev() {
        let x = 1.0 + 29.0 * i as f64 / 79.0;
        let z = Complex64::new(x, 1e-4);
        let pt = solve_point(&model, z, warm.as_ref()).unwrap();
        match cubic_reference(5.0, z) {
            Ok(root) => {
                let d = (pt.s - root).norm();
                if d > worst.1 { worst = (x, d); }
            }
            Err(e) => println!("x={x}: cubic err {e}"),
        }
        warm = Some(pt);
    }
    println!("worst |ds| = {:.3e} at x = {}", worst.1, worst.0);

    for (name, m) in [("m4", spike::models::model4()), ("m5", spike::models::model5()), ("m6", spike::models::model6())] {
        match spike::theta_critical(&m) {
            Ok(t) => println!("{name}: theta0 = {t}"),
            Err(e) => println!("{name}: error {e}"),
        }
    }
}
