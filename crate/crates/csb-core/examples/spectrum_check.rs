use csb_core::channel::{channel_in_eigenbasis, EigenbasisFrame};
use csb_core::gates;
use csb_core::noise::calibrated_default_noise;

fn main() {
    let gate = gates::toffoli();
    let frame = EigenbasisFrame::new(&gate);
    let cal = calibrated_default_noise(&gate, 0.890, 0.005).unwrap();
    println!("gamma = {:.6}, theta = {:.6}, oracle = {:.6}", cal.gamma, cal.theta, cal.oracle_fidelity);
    let e0 = cal.triple.gate.channel().unwrap();
    let k_e = channel_in_eigenbasis(&e0, &frame).unwrap();
    let mut diag: Vec<f64> = (0..64).map(|i| k_e[(i, i)].re).collect();
    diag.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mean: f64 = diag.iter().sum::<f64>() / 64.0;
    println!("true diag Re(lambda_E): min {:.4} p10 {:.4} p25 {:.4} p50 {:.4} p75 {:.4} max {:.4} mean {:.4}",
        diag[0], diag[6], diag[16], diag[32], diag[48], diag[63], mean);
    // off-diagonal magnitude
    let mut off = 0.0f64;
    for i in 0..64 { for j in 0..64 { if i != j { off = off.max(k_e[(i, j)].norm()); } } }
    println!("max |off-diagonal| of K_E = {:.4}", off);
    // weighted mean of diag by... also the trivial/nontrivial split
    let tr: Vec<f64> = (0..64).filter(|&i| (frame.ideal_eigenvalues()[i].re - 1.0).abs() < 1e-9).map(|i| k_e[(i,i)].re).collect();
    let nt: Vec<f64> = (0..64).filter(|&i| (frame.ideal_eigenvalues()[i].re - 1.0).abs() >= 1e-9).map(|i| k_e[(i,i)].re).collect();
    println!("trivial group mean {:.4} (n={}), nontrivial {:.4} (n={})",
        tr.iter().sum::<f64>()/tr.len() as f64, tr.len(), nt.iter().sum::<f64>()/nt.len() as f64, nt.len());
}
