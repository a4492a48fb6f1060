//! Subcommand implementations.

use std::fs;
use std::path::Path;

use unirec_core::ensembles::diagnose_with_seed;
use unirec_core::harness::{
    compare_universality, contour, load_run, save_run, sweep, sweep_with_threads,
    EnsembleTemplate, PhaseGrid, SweepPlan,
};
use unirec_core::theory;

use crate::{CliError, TheoryCurveArg};

pub fn run_theory(
    curve: TheoryCurveArg,
    s: Option<Vec<f64>>,
    r: Option<Vec<f64>>,
    k: Option<Vec<f64>>,
    n: Option<usize>,
    rank: usize,
    out: &Path,
) -> Result<(), CliError> {
    let mut csv = String::from("structure,delta_star,method\n");
    match curve {
        TheoryCurveArg::L1 => {
            let s = s.ok_or_else(|| CliError::Usage("theory --curve l1 needs --s".into()))?;
            let (statdim, root) = theory::l1_curves(&s)?;
            csv.push_str(&statdim.csv_rows());
            csv.push_str(&root.csv_rows());
        }
        TheoryCurveArg::Lowrank => {
            let r = r.ok_or_else(|| CliError::Usage("theory --curve lowrank needs --r".into()))?;
            let ranks = to_integer_axis(&r)?;
            csv.push_str(&theory::lowrank_curve(&ranks).csv_rows());
        }
        TheoryCurveArg::SlOrder => {
            let k = k.ok_or_else(|| CliError::Usage("theory --curve sl-order needs --k".into()))?;
            let n = n.ok_or_else(|| CliError::Usage("theory --curve sl-order needs --n".into()))?;
            let sides = to_integer_axis(&k)?;
            let curve = theory::TheoryCurve {
                structure_axis: sides.iter().map(|&v| v as f64).collect(),
                delta_star: sides
                    .iter()
                    .map(|&kk| theory::sl_order(kk, rank, n).map(|v| v as f64))
                    .collect::<Result<Vec<_>, _>>()?,
                method: theory::CurveMethod::OrderMinK2Rn,
            };
            csv.push_str(&curve.csv_rows());
            println!("ORDER-ONLY: min(k^2, r*n) carries no leading constant");
        }
    }
    fs::write(out, csv).map_err(io_err(out))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn to_integer_axis(values: &[f64]) -> Result<Vec<usize>, CliError> {
    values
        .iter()
        .map(|&v| {
            if (v - v.round()).abs() <= 1e-9 && v.round() >= 0.0 {
                Ok(v.round() as usize)
            } else {
                Err(CliError::Usage(format!("expected integer axis value, got {v}")))
            }
        })
        .collect()
}

pub fn run_sweep(plan: SweepPlan, threads: Option<usize>, out: &Path) -> Result<(), CliError> {
    plan.validate()?;
    let grid = match threads {
        Some(k) => sweep_with_threads(&plan, k)?,
        None => sweep(&plan)?,
    };
    save_run(&grid, out)?;
    print_column_summary(&grid);
    println!("wrote {}", out.display());
    Ok(())
}

fn print_column_summary(grid: &PhaseGrid) {
    let curve = contour(grid, 0.5);
    for point in &curve.points {
        match point.delta_half {
            Some(d) => println!(
                "structure={:.6}  delta50={:.4} ({})",
                point.structure, d, point.fit
            ),
            None => println!("structure={:.6}  no 50% crossing", point.structure),
        }
    }
}

pub fn run_contour(grid_path: &Path, level: f64, out: Option<&Path>) -> Result<(), CliError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(CliError::Usage(format!("level must lie in (0,1), got {level}")));
    }
    let grid = load_run(grid_path)?;
    let curve = contour(&grid, level);
    let csv = format!("structure,delta_half,fit\n{}", curve.csv_rows());
    match out {
        Some(path) => {
            fs::write(path, csv).map_err(io_err(path))?;
            println!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

pub fn run_compare(path_a: &Path, path_b: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let a = load_run(path_a)?;
    let b = load_run(path_b)?;
    let report = compare_universality(&a, &b)?;
    let mut csv = String::from("structure,delta_half_a,delta_half_b,abs_diff\n");
    println!("structure    delta50(A)   delta50(B)   |diff|");
    for (s, da, db, diff) in &report.columns {
        let fmt = |v: &Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        println!(
            "{s:<12.4} {:<12} {:<12} {}",
            fmt(da),
            fmt(db),
            fmt(diff)
        );
        let fmt_csv = |v: &Option<f64>| v.map_or(String::new(), |x| x.to_string());
        csv.push_str(&format!("{s},{},{},{}\n", fmt_csv(da), fmt_csv(db), fmt_csv(diff)));
    }
    match report.max_abs_diff {
        Some(d) => println!("max |delta50 deviation| = {d:.4}"),
        None => println!("no shared crossings to compare"),
    }
    if let Some(path) = out {
        fs::write(path, csv).map_err(io_err(path))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn run_diagnose(
    ensemble: EnsembleTemplate,
    n: usize,
    m: usize,
    seed: u64,
) -> Result<(), CliError> {
    // Mixing matrices (when the ensemble has one) come from a stream
    // derived from the seed; the sample stream reuses the seed itself.
    let spec = ensemble.instantiate_seeded(n, seed ^ 0x4d49_5849);
    let d = diagnose_with_seed(&spec, m, seed)?;
    println!("ensemble dimension n = {}", d.n);
    println!("samples m = {}", d.m);
    println!("mean_ratio  = {:.6e}", d.mean_ratio);
    println!("power_ratio = {:.6e}", d.power_ratio);
    println!("n * power_ratio = {:.4}", d.n as f64 * d.power_ratio);
    Ok(())
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}
