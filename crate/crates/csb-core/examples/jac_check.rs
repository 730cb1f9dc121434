use csb_core::linalg::{c, cr};

// replicate optimizer internals for a finite-difference check
fn model(pairs: &[(f64, f64, f64, f64)], l: usize) -> f64 {
    pairs.iter().map(|&(zr, zi, fr, fi)| {
        let z = c(zr, zi);
        let f = c(fr, fi);
        2.0 * (f * z.powu(l as u32)).re
    }).sum()
}

fn main() {
    let pairs = vec![(0.93, 0.12, 0.4, -0.15), (-0.88, 0.03, 0.2, 0.08), (0.99, 0.0, 0.3, 0.0)];
    let y: Vec<f64> = (0..20).map(|l| model(&pairs, l) + 0.01 * (l as f64).sin()).collect();
    let eps = 1e-7;
    let mut worst = 0.0f64;
    for l in 0..y.len() {
        for (j, _) in pairs.iter().enumerate() {
            for comp in 0..4 {
                let mut pp = pairs.clone();
                let mut pm = pairs.clone();
                let fields = |p: &mut (f64, f64, f64, f64), d: f64| match comp {
                    0 => p.0 += d, 1 => p.1 += d, 2 => p.2 += d, _ => p.3 += d,
                };
                fields(&mut pp[j], eps);
                fields(&mut pm[j], -eps);
                let fd = (model(&pp, l) - model(&pm, l)) / (2.0 * eps);
                // analytic
                let (zr, zi, fr, fi) = pairs[j];
                let z = c(zr, zi);
                let f = c(fr, fi);
                let analytic = match comp {
                    0 => if l == 0 { 0.0 } else { 2.0 * (f * cr(l as f64) * z.powu(l as u32 - 1)).re },
                    1 => if l == 0 { 0.0 } else { -2.0 * (f * cr(l as f64) * z.powu(l as u32 - 1)).im },
                    2 => 2.0 * z.powu(l as u32).re,
                    _ => -2.0 * z.powu(l as u32).im,
                };
                worst = worst.max((fd - analytic).abs());
            }
        }
    }
    println!("worst |finite difference - analytic| = {worst:.3e}");
}
