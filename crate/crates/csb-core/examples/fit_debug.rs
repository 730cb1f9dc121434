use csb_core::channel::{channel_in_eigenbasis, EigenbasisFrame};
use csb_core::config::ExperimentConfig;
use csb_core::fitting::six_term_fit;
use csb_core::gates;
use csb_core::pipeline::{resolve_noise, run_simulation};
use csb_core::protocol::{enumerate_preparations, TransferKernel};

fn main() {
    let cfg = ExperimentConfig::default_toffoli(2024);
    let gate = gates::toffoli();
    let frame = EigenbasisFrame::new(&gate);
    let (triple, _, _) = resolve_noise(&cfg, &gate).unwrap();
    let e0 = triple.gate.channel().unwrap();
    let k_e = channel_in_eigenbasis(&e0, &frame).unwrap();
    let sim = run_simulation(&cfg).unwrap();
    let pairs = enumerate_preparations(&gate);
    let kernel = TransferKernel::new(&gate, &triple).unwrap();

    for (idx, want) in [(0usize, "a=b=0"), (9, "(1,2) both +1"), (7, "(0,7) mixed")] {
        let curve = &sim.curves[idx];
        let pair = &pairs[idx];
        println!("--- curve {} {} (a={}, b={})", idx, want, curve.a, curve.b);
        // relevant true diagonal entries
        let ix = |a: usize, b: usize| a + 8 * b;
        for (a, b) in [(curve.a, curve.a), (curve.a, curve.b), (curve.b, curve.a), (curve.b, curve.b)] {
            let v = k_e[(ix(a, b), ix(a, b))];
            println!("  true diag K_E[{a}{b}] = {:.4} {:+.4}i", v.re, v.im);
        }
        let fit = six_term_fit(curve, &pair.ideal_eigenvalues, None).unwrap();
        println!("  fit status {:?}, rms {:.4}", fit.status, fit.rms_residual);
        for t in &fit.terms {
            println!("  z = {:.4} {:+.4}i (|z|={:.4}, arg={:+.3})  f = {:.4} {:+.4}i (|f|={:.3})",
                t.z.re, t.z.im, t.z.norm(), t.z.arg(), t.f.re, t.f.im, t.f.norm());
        }
        // exact curve for reference: fit on exact data
        let exact = kernel.exact_curve(pair, 40).unwrap();
        let exact_curve = csb_core::protocol::DecayCurve {
            a: curve.a, b: curve.b, depths: (0..=40).collect(), p_hat: exact, shots: 1000, exact: true,
        };
        let efit = six_term_fit(&exact_curve, &pair.ideal_eigenvalues, None).unwrap();
        println!("  exact-data fit ({:?}, rms {:.2e}):", efit.status, efit.rms_residual);
        for t in &efit.terms {
            println!("    z = {:.4} {:+.4}i  f = {:.4} {:+.4}i (|f|={:.3})",
                t.z.re, t.z.im, t.f.re, t.f.im, t.f.norm());
        }
    }
}
