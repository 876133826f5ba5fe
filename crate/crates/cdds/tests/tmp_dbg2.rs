use cdds::model::{circuit_distributed, circuit_neutral};
use cdds::verify::freq::sigma_sweep;
use cdds::verify::sim::simulate;
use nalgebra::DVector;

#[test]
fn dbg_sweeps() {
    let neutral = circuit_neutral(1);
    for r in [0.1f64, 0.5] {
        let resp = sigma_sweep(&neutral, r, 1e3, 2000).unwrap();
        println!("neutral r={r}: sup={:.6} at omega={:.4}", resp.sup_gain, resp.omega_peak);
    }
    let dist = circuit_distributed(1);
    for r in [0.1f64, 0.5] {
        let resp = sigma_sweep(&dist, r, 1e3, 2000).unwrap();
        println!("dist r={r}: sup={:.6} at omega={:.4}", resp.sup_gain, resp.omega_peak);
    }
}

#[test]
fn dbg_small_r_stability() {
    let dist = circuit_distributed(1);
    let x0 = DVector::from_row_slice(&[1.0, -0.5, 0.3]);
    for r in [0.03f64, 0.05, 0.07, 0.09, 0.12] {
        let traj = simulate(
            &dist,
            r,
            |_| DVector::zeros(dist.q),
            &x0,
            |t| DVector::from_row_slice(&[t.cos(), (2.0 * t).sin(), 0.5]),
            60,
            30.0,
        )
        .unwrap();
        let mid = traj.x[traj.x.len() / 2].norm();
        let last = traj.x.last().unwrap().norm();
        println!("dist r={r}: |x(15)|={mid:.3e} |x(30)|={last:.3e}");
    }
    // Gains at small r for the fixed-performance margin question.
    for r in [0.03f64, 0.05, 0.07] {
        let resp = sigma_sweep(&dist, r, 1e3, 2000).unwrap();
        println!("dist r={r}: sup={:.6}", resp.sup_gain);
    }
}

#[test]
#[ignore]
fn dbg_margin_degrees() {
    use cdds::analysis::{self, AnalysisOptions};
    use cdds::model::{self, DelayRange};
    let sys = cdds::model::circuit_distributed(3);
    let supply = model::l2_gain_supply(0.37822, sys.m, sys.q).unwrap();
    for (d7, d8) in [(2usize, 0usize), (1, 1)] {
        for r1 in [0.105f64, 0.09] {
            let mut opts = AnalysisOptions::default();
            opts.delta7 = d7;
            opts.delta8 = d8;
            let range = DelayRange::new(r1, 0.5).unwrap();
            let rep = analysis::check_range(&sys, &range, &opts, &supply);
            println!(
                "d7={d7} d8={d8} [{r1},0.5]: verdict={:?} status={:?} t*={:?}",
                rep.verdict, rep.sdp.status, rep.certificate.as_ref().and_then(|c| c.margin)
            );
        }
    }
}

#[test]
#[ignore]
fn dbg_ex1_d5() {
    use cdds::analysis::{self, AnalysisOptions};
    use cdds::model::{self, DelayRange};
    let sys = cdds::model::example1(5);
    let supply = model::SupplyRate::None;
    for (tol, iters) in [(1e-10f64, 400usize), (1e-12, 600)] {
        let mut opts = AnalysisOptions::default();
        opts.solver.tol = tol;
        opts.solver.max_iterations = iters;
        let range = DelayRange::new(0.10016827, 1.71785).unwrap();
        let rep = analysis::check_range(&sys, &range, &opts, &supply);
        let (gm, gp) = rep
            .certificate
            .as_ref()
            .map(|c| (c.grid.pi_min.min(c.grid.minus_theta_min).min(c.grid.s_min).min(c.grid.u_min), c.grid.passes()))
            .unwrap_or((f64::NAN, false));
        println!(
            "tol={tol:.0e} it={iters}: verdict={:?} status={:?} t*={:?} grid_min={gm:.3e} grid_pass={gp} iters={} notes={:?}",
            rep.verdict, rep.sdp.status, rep.certificate.as_ref().and_then(|c| c.margin), rep.sdp.iterations, rep.notes
        );
    }
}

#[test]
#[ignore]
fn dbg_ex1_defaults() {
    use cdds::analysis::{self, AnalysisOptions};
    use cdds::model::{self, DelayRange};
    let supply = model::SupplyRate::None;
    let opts = AnalysisOptions::default();
    for (d, r1, r2) in [
        (5usize, 0.10016827, 1.71785),
        (4, 0.10016828, 1.71785),
        (5, 0.09, 1.8),
        (5, 0.05, 0.09),
    ] {
        let sys = cdds::model::example1(d);
        let range = DelayRange::new(r1, r2).unwrap();
        let t0 = std::time::Instant::now();
        let rep = analysis::check_range(&sys, &range, &opts, &supply);
        println!(
            "d={d} [{r1},{r2}]: verdict={:?} status={:?} t*={:?} {}ms notes={:?}",
            rep.verdict, rep.sdp.status, rep.certificate.as_ref().and_then(|c| c.margin),
            t0.elapsed().as_millis(), rep.notes
        );
    }
}
