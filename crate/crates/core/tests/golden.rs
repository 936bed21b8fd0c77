//! Cross-validation of the phillips generator against golden data produced
//! once by an independent route (1D reduced integrals under adaptive
//! quadrature with the kernel kinks as breakpoints).

use std::path::Path;

use morozov::problems::{gen_phillips, load_problem};

#[test]
fn phillips_matches_golden_file() {
    let base = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/phillips_n100");
    let golden = load_problem(&base).expect("golden problem loads and validates");
    assert_eq!(golden.name, "phillips");
    assert_eq!(golden.n(), 100);

    let generated = gen_phillips(100).unwrap();
    let mut worst = 0.0f64;
    for i in 0..100 {
        for j in 0..100 {
            worst = worst.max((golden.matrix[(i, j)] - generated.matrix[(i, j)]).abs());
        }
    }
    assert!(worst <= 1e-6, "entrywise deviation {worst:.3e}");
    for (a, b) in golden.x_true.iter().zip(&generated.x_true) {
        assert!((a - b).abs() <= 1e-10);
    }
    for (a, b) in golden.y_true.iter().zip(&generated.y_true) {
        assert!((a - b).abs() <= 1e-6);
    }
}
