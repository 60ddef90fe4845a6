//! Subcommand implementations.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use scma_core::analysis::{bep_table, n0_from_snr_db, set_bep, BepParams, BepRow, Truncation};
use scma_core::codebook::{import_codebook_set, write_codebook_set, CodebookSet};
use scma_core::layering::{assign_layers_and_power, ConstellationOperator};
use scma_core::optimizer::{run_ga, DesignSpace};
use scma_core::simulator::{run_ber_sweep, BerResult};

use crate::config::{Config, ConfigError};
use crate::output::{snr_at, InputFile, OutDir};
use crate::CliError;

/// Largest `M^J` for which the design report uses the exact bound.
const EXACT_REPORT_LIMIT: u128 = 1 << 16;

/// Worst-user BER at which `compare` reports SNR gains.
const GAIN_TARGET: f64 = 1e-4;

pub struct Context {
    pub cfg: Config,
    pub codebooks: Vec<PathBuf>,
    pub out: Option<PathBuf>,
    pub simulate: bool,
    pub argv: Vec<String>,
}

impl Context {
    fn out_dir(&self) -> Result<OutDir, CliError> {
        OutDir::create(self.out.as_deref().unwrap_or(Path::new("scma-out")))
    }

    fn single_codebook(&self) -> Result<&Path, CliError> {
        match self.codebooks.as_slice() {
            [one] => Ok(one),
            [] => Err(ConfigError("--codebook <FILE> is required".into()).into()),
            _ => Err(ConfigError(
                "exactly one --codebook is expected; use `compare` for several".into(),
            )
            .into()),
        }
    }

    fn bep_params(&self, set: &CodebookSet) -> Result<BepParams, CliError> {
        let dims = set.dims();
        let grid = self.cfg.analysis_grid()?;
        Ok(BepParams::new(
            self.cfg.geometry()?,
            self.cfg.kappa()?,
            n0_from_snr_db(grid[0], dims.k, dims.j),
        )
        .with_truncation(self.cfg.truncation()?)
        .with_distance(self.cfg.distance_model()?))
    }
}

fn load_codebook(path: &Path) -> Result<(CodebookSet, InputFile), CliError> {
    let imported = import_codebook_set(path)
        .map_err(|e| CliError::Codebook(format!("{}: {e}", path.display())))?;
    for w in &imported.warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    let input = InputFile::read(path)
        .map_err(|e| CliError::Codebook(format!("{}: {e}", path.display())))?;
    Ok((imported.set, input))
}

pub fn assign(ctx: &Context) -> Result<(), CliError> {
    let dims = ctx.cfg.dims()?;
    let df = dims.df().ok_or_else(|| {
        ConfigError(format!(
            "J*N/K = {}*{}/{} is not an integer",
            dims.j, dims.n, dims.k
        ))
    })?;
    // Placeholder operators q_i with ascending power; only the labels matter here.
    let ops = (1..=df)
        .map(|i| ConstellationOperator::new(i as f64 / df as f64, 0.0))
        .collect::<Result<Vec<_>, _>>()?;
    let sig = assign_layers_and_power(&ops, dims)?;
    let report = sig.validate();
    let mut text = format!("{sig}");
    text.push_str(&format!(
        "support regular: {}\npower balanced: {}\ngroups orthogonal: {}\npower sorted: {}\n",
        report.support_regular,
        report.power_balanced,
        report.groups_orthogonal,
        report.power_sorted
    ));
    for issue in &report.issues {
        text.push_str(&format!("issue: {issue}\n"));
    }
    print!("{text}");
    if ctx.out.is_some() {
        let mut out = ctx.out_dir()?;
        out.write_text("signature.txt", &text)?;
        out.finish(
            "assign",
            &ctx.cfg,
            &ctx.argv,
            vec![],
            json!({ "labels": sig.labels(), "groups": sig.groups(), "valid": report.passed() }),
        )?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Runtime(
            "generated signature failed validation".into(),
        ))
    }
}

#[derive(Serialize)]
struct HistoryRow {
    generation: usize,
    best_worst_bep: f64,
}

pub fn design(ctx: &Context) -> Result<(), CliError> {
    let dims = ctx.cfg.dims()?;
    let d = &ctx.cfg.design;
    let space =
        DesignSpace::with_bounds(dims, d.delta_max.unwrap_or(4.0), d.rho_min.unwrap_or(0.05))
            .map_err(|e| ConfigError(format!("[design] {e}")))?;
    let ga = ctx.cfg.ga_config()?;
    let res = run_ga(&space, &ga)?;

    let hypotheses = (dims.m as u128)
        .checked_pow(dims.j as u32)
        .unwrap_or(u128::MAX);
    let report_truncation =
        if ctx.cfg.analysis.exact_bep == Some(true) || hypotheses <= EXACT_REPORT_LIMIT {
            Truncation::Exact
        } else {
            ga.truncation
        };
    let report = set_bep(
        &res.set,
        &ga.bep_params(dims).with_truncation(report_truncation),
    )?;

    let mut out = ctx.out_dir()?;
    out.write_text("codebook.txt", &write_codebook_set(&res.set))?;
    let history: Vec<HistoryRow> = res
        .history
        .iter()
        .enumerate()
        .map(|(generation, &best_worst_bep)| HistoryRow {
            generation,
            best_worst_bep,
        })
        .collect();
    out.write_csv("history.csv", &history)?;
    println!(
        "best worst-user BEP at {} dB: {:.4e} (design metric {:.4e}), delta {:.4}",
        ga.design_snr_db, report.worst, res.best.fitness, res.best.delta
    );
    let manifest = out.finish(
        "design",
        &ctx.cfg,
        &ctx.argv,
        vec![],
        json!({
            "delta": res.best.delta,
            "operators": res.best.sorted_operators(),
            "design_metric": res.best.fitness,
            "report_truncation": report_truncation,
            "report_per_user_bep": report.per_user,
            "report_worst_bep": report.worst,
        }),
    )?;
    println!("wrote {}", manifest.display());
    Ok(())
}

#[derive(Serialize)]
struct AnalysisRow {
    snr_db: f64,
    user_rank: usize,
    bep: f64,
    bep_avg: f64,
    bep_worst: f64,
}

fn analysis_rows(rows: &[BepRow], j: usize) -> Vec<AnalysisRow> {
    rows.chunks(j)
        .flat_map(|chunk| {
            let avg = chunk.iter().map(|r| r.bep).sum::<f64>() / chunk.len() as f64;
            let worst = chunk
                .iter()
                .map(|r| r.bep)
                .fold(f64::NEG_INFINITY, f64::max);
            chunk.iter().map(move |r| AnalysisRow {
                snr_db: r.snr_db,
                user_rank: r.user_rank,
                bep: r.bep,
                bep_avg: avg,
                bep_worst: worst,
            })
        })
        .collect()
}

pub fn analyze(ctx: &Context) -> Result<(), CliError> {
    let (set, input) = load_codebook(ctx.single_codebook()?)?;
    let params = ctx.bep_params(&set)?;
    let grid = ctx.cfg.analysis_grid()?;
    let rows = analysis_rows(&bep_table(&set, &params, &grid)?, set.dims().j);
    let mut out = ctx.out_dir()?;
    out.write_csv("analysis.csv", &rows)?;
    let worst: Vec<f64> = rows.chunks(set.dims().j).map(|c| c[0].bep_worst).collect();
    let manifest = out.finish(
        "analyze",
        &ctx.cfg,
        &ctx.argv,
        vec![input],
        json!({ "snr_db": grid, "bep_worst": worst, "truncation": params.truncation }),
    )?;
    println!("wrote {}", manifest.display());
    Ok(())
}

pub fn simulate(ctx: &Context) -> Result<(), CliError> {
    let (set, input) = load_codebook(ctx.single_codebook()?)?;
    let sim = ctx.cfg.sim_config(set.dims().j)?;
    let res = run_ber_sweep(&sim, &set)?;
    let mut out = ctx.out_dir()?;
    out.write_csv("ber.csv", &res.rows())?;
    let manifest = out.finish(
        "simulate",
        &ctx.cfg,
        &ctx.argv,
        vec![input],
        sim_summary(&res),
    )?;
    println!("wrote {}", manifest.display());
    Ok(())
}

fn sim_summary(res: &BerResult) -> serde_json::Value {
    json!({
        "snr_db": res.points.iter().map(|p| p.snr_db).collect::<Vec<_>>(),
        "symbols": res.points.iter().map(|p| p.symbols).collect::<Vec<_>>(),
        "ber_worst": res.points.iter().map(|p| p.worst()).collect::<Vec<_>>(),
    })
}

#[derive(Serialize)]
struct CompareRow {
    codebook: String,
    source: &'static str,
    snr_db: f64,
    avg: f64,
    worst: f64,
}

#[derive(Serialize)]
struct GainRow {
    codebook: String,
    source: &'static str,
    target: f64,
    snr_at_target_db: Option<f64>,
    gain_db: Option<f64>,
}

/// Curves of one codebook: `(source, snr, avg, worst)`.
type Curve = (&'static str, Vec<f64>, Vec<f64>, Vec<f64>);

pub fn compare(ctx: &Context) -> Result<(), CliError> {
    if ctx.codebooks.len() < 2 {
        return Err(ConfigError("compare needs at least two --codebook files".into()).into());
    }
    let loaded = ctx
        .codebooks
        .iter()
        .map(|p| load_codebook(p))
        .collect::<Result<Vec<_>, _>>()?;
    let grid = ctx.cfg.analysis_grid()?;
    let mut table = Vec::new();
    let mut curves: Vec<(String, Vec<Curve>)> = Vec::new();
    for (path, (set, _)) in ctx.codebooks.iter().zip(&loaded) {
        let name = path.display().to_string();
        let j = set.dims().j;
        let rows = analysis_rows(&bep_table(set, &ctx.bep_params(set)?, &grid)?, j);
        let mut mine: Vec<Curve> = vec![(
            "analysis",
            grid.clone(),
            rows.chunks(j).map(|c| c[0].bep_avg).collect(),
            rows.chunks(j).map(|c| c[0].bep_worst).collect(),
        )];
        if ctx.simulate {
            let res = run_ber_sweep(&ctx.cfg.sim_config(j)?, set)?;
            mine.push((
                "simulation",
                res.points.iter().map(|p| p.snr_db).collect(),
                res.points.iter().map(|p| p.average()).collect(),
                res.points.iter().map(|p| p.worst()).collect(),
            ));
        }
        for (source, snr, avg, worst) in &mine {
            for i in 0..snr.len() {
                table.push(CompareRow {
                    codebook: name.clone(),
                    source,
                    snr_db: snr[i],
                    avg: avg[i],
                    worst: worst[i],
                });
            }
        }
        curves.push((name, mine));
    }

    let mut gains = Vec::new();
    let reference = &curves[0].1;
    for (name, mine) in &curves {
        for (idx, (source, snr, _, worst)) in mine.iter().enumerate() {
            let at = snr_at(snr, worst, GAIN_TARGET);
            let base = snr_at(&reference[idx].1, &reference[idx].3, GAIN_TARGET);
            let gain_db = at.zip(base).map(|(a, b)| b - a);
            println!(
                "{name} [{source}] worst-user SNR at BER {GAIN_TARGET:e}: {} dB, gain vs {}: {} dB",
                fmt_opt(at),
                curves[0].0,
                fmt_opt(gain_db)
            );
            gains.push(GainRow {
                codebook: name.clone(),
                source,
                target: GAIN_TARGET,
                snr_at_target_db: at,
                gain_db,
            });
        }
    }

    let mut out = ctx.out_dir()?;
    out.write_csv("compare.csv", &table)?;
    out.write_csv("gains.csv", &gains)?;
    let inputs = loaded.into_iter().map(|(_, i)| i).collect();
    let manifest = out.finish(
        "compare",
        &ctx.cfg,
        &ctx.argv,
        inputs,
        json!({ "gains": gains.iter().map(|g| json!({
            "codebook": g.codebook, "source": g.source, "gain_db": g.gain_db
        })).collect::<Vec<_>>() }),
    )?;
    println!("wrote {}", manifest.display());
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.2}"))
}
