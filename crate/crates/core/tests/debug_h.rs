use vsg_smallsignal::model::{default_base_case, Machine};
use vsg_smallsignal::powerflow::solve_operating_point;
use vsg_smallsignal::tfbuild::{build_descriptor, build_load_to_machine};
use vsg_smallsignal::ratpoly::roots;
use num_complex::Complex64;

#[test]
fn dump() {
    let cfg = default_base_case();
    let op = solve_operating_point(&cfg).unwrap();
    let tf = build_load_to_machine(&cfg, &op, Machine::Sg).unwrap();
    let desc = build_descriptor(&cfg, &op, Machine::Sg).unwrap();
    for (id, ch) in tf.channels() {
        println!("{}: degrees {:?}", id.short(), ch.degrees());
        let mut p = roots(ch.den()).unwrap();
        p.sort_by(|a,b| (a.re,a.im).partial_cmp(&(b.re,b.im)).unwrap());
        println!("   poles: {:?}", p.iter().map(|z|(z.re,z.im)).collect::<Vec<_>>());
    }
    let mut eig = desc.finite_eigenvalues().unwrap();
    eig.sort_by(|a,b| (a.re,a.im).partial_cmp(&(b.re,b.im)).unwrap());
    println!("pencil: {:?}", eig.iter().map(|z|(z.re,z.im)).collect::<Vec<_>>());
    for w in [0.01, 0.1, 1.0, 10.0, 100.0, 1000.0] {
        let s = Complex64::new(0.0, w);
        let hd = desc.frequency_response(s).unwrap();
        let hr = [[tf.p_to_w.evaluate(s).unwrap(), tf.q_to_w.evaluate(s).unwrap()],
                  [tf.p_to_v.evaluate(s).unwrap(), tf.q_to_v.evaluate(s).unwrap()]];
        let mut worst = 0.0f64;
        for i in 0..2 { for j in 0..2 {
            let rel = (hr[i][j]-hd[i][j]).norm()/hd[i][j].norm();
            worst = worst.max(rel);
            if rel > 1e-8 { println!("w={w} [{i}][{j}] rel={rel:.3e} rat={:?} desc={:?}", hr[i][j], hd[i][j]); }
        }}
        println!("w={w}: worst {worst:.3e}");
    }
}
