use wavetower::config::{ScenarioConfig, ScenarioKind};
use wavetower::experiments::*;

fn main() {
    let cfg = ScenarioConfig::defaults_for(ScenarioKind::TimeMeasurement);
    match run_capture_engine(&cfg, "probe") {
        Ok(out) => {
            println!("time: branches = {}", out.ledger.branches.len());
            for b in &out.ledger.branches {
                println!(
                    "  id {} w {:.6e} t {:.3} phase {:.3} state {:?}",
                    b.id, b.weight, b.event_time, b.phase, b.state
                );
            }
            println!("  residual {:.4} boundary {:.4} dust {:?}",
                out.ledger.residual.norm(), out.ledger.boundary_norm, out.ledger.dust);
            println!("  norm drift {:.3e} energy drift {:.3e}",
                out.ledger.audit.max_norm_drift, out.ledger.audit.max_energy_drift);
        }
        Err(e) => println!("time ERR: {e}"),
    }

    let cfg = ScenarioConfig::defaults_for(ScenarioKind::PositionMeasurement);
    match run_capture_engine(&cfg, "probe") {
        Ok(out) => {
            println!("position: branches = {}", out.ledger.branches.len());
            for b in &out.ledger.branches {
                println!("  id {} w {:.6e} t {:.3} state {:?}", b.id, b.weight, b.event_time, b.state);
            }
            println!("  residual {:.4} boundary {:.4}", out.ledger.residual.norm(), out.ledger.boundary_norm);
            println!("  norm drift {:.3e} energy drift {:.3e}",
                out.ledger.audit.max_norm_drift, out.ledger.audit.max_energy_drift);
        }
        Err(e) => println!("position ERR: {e}"),
    }

    let cfg = ScenarioConfig::defaults_for(ScenarioKind::Revival);
    match run_capture_engine(&cfg, "probe") {
        Ok(out) => {
            println!("revival: branches = {}", out.ledger.branches.len());
            for b in &out.ledger.branches {
                println!("  id {} w {:.6e} t {:.3} phase {:.4} state {:?}", b.id, b.weight, b.event_time, b.phase, b.state);
            }
        }
        Err(e) => println!("revival ERR: {e}"),
    }
}
