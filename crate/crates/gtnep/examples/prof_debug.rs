use gtnep::{bnb, instances, model};
use std::time::Instant;

fn main() {
    // Size + root timings for the piecewise model at the published segment count.
    for (name, segs) in [("belgian-A2", 60usize), ("belgian-A3", 60)] {
        let net = instances::by_name(name).unwrap();
        let prog = model::build_pla_mip(&net, segs, model::BuildOptions::default()).unwrap();
        let sz = prog.size();
        println!(
            "{name} pla{segs}: bv {} cv {} rows {}",
            sz.binary_vars, sz.continuous_vars, sz.linear_rows
        );
        let t = Instant::now();
        let rep = bnb::root_relaxation(&prog, &bnb::BnbParams::default());
        println!("  root: {:?} bound {:.3} in {:?}", rep.status, rep.bound, t.elapsed());
        let t = Instant::now();
        let mut params = bnb::BnbParams::default();
        params.time_limit_s = 240.0;
        let rep = bnb::branch_and_bound(&prog, &params);
        println!(
            "  bnb: {:?} obj {:?} bound {:.3} nodes {} in {:?}",
            rep.status, rep.objective(), rep.bound, rep.nodes, t.elapsed()
        );
    }
}
