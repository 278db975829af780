use std::path::Path;

use gdantzig::simulate::{long_rows, sweep, CellResult, SimConfig, SimDelta, SweepConfig};
use serde::de::DeserializeOwned;

use crate::error::{io_error, usage, Failure};
use crate::SimArgs;

fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, Failure> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return usage("--jobs must be at least 1");
        }
        b = b.num_threads(j);
    }
    b.build().map_err(|e| Failure::Solver(e.to_string()))
}

fn write_rows(cells: &[CellResult], path: &Path) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    for row in long_rows(cells) {
        w.serialize(row).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

fn print_summary(cells: &[CellResult]) {
    println!(
        "{:>4} {:>6} {:>5} {:>3} {:<16} {:<16} {:>9} {:>10} {:>10} {:>6} {:>6} {:>7}",
        "cell", "n", "M", "s", "noise", "loss", "r", "sup_err", "l1_err", "sign", "feas", "ok"
    );
    for c in cells {
        let cfg = &c.config;
        match &c.outcome {
            Ok(exp) => {
                let s = &exp.summary;
                println!(
                    "{:>4} {:>6} {:>5} {:>3} {:<16} {:<16} {:>9.5} {:>10.5} {:>10.5} {:>6.3} {:>6.3} {:>7}",
                    c.cell_id,
                    cfg.n,
                    cfg.m,
                    cfg.s,
                    cfg.noise.label(),
                    cfg.loss.name(),
                    s.r_median,
                    s.sup_err.median,
                    s.l1_err.median,
                    s.sign_exact_freq,
                    s.feasible_freq,
                    format!("{}/{}", s.reps - s.failures, s.reps)
                );
            }
            Err(msg) => println!("{:>4} invalid: {msg}", c.cell_id),
        }
    }
}

fn execute(base: &SimConfig, deltas: &[SimDelta], a: &SimArgs) -> Result<Vec<CellResult>, Failure> {
    let cells = pool(a.jobs)?.install(|| sweep(base, deltas));
    write_rows(&cells, &a.output)?;
    print_summary(&cells);
    Ok(cells)
}

pub fn run_simulate(a: &SimArgs) -> Result<(), Failure> {
    let mut cfg: SimConfig = read_config(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(|e| Failure::Usage(format!("{}: {e}", a.config.display())))?;
    let cells = execute(&cfg, &[SimDelta::default()], a)?;
    match &cells[0].outcome {
        Ok(_) => Ok(()),
        Err(msg) => usage(msg.clone()),
    }
}

pub fn run_sweep(a: &SimArgs) -> Result<(), Failure> {
    let mut cfg: SweepConfig = read_config(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.base.seed = seed;
    }
    cfg.base
        .validate()
        .map_err(|e| Failure::Usage(format!("{}: base: {e}", a.config.display())))?;
    execute(&cfg.base, &cfg.deltas(), a)?;
    Ok(())
}
