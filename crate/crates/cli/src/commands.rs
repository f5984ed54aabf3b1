use std::error::Error as StdError;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use morse_forge::checks::{self, CheckReport, Status};
use morse_forge::factors::FactorId;
use morse_forge::graph::{Ball, GraphError};
use morse_forge::matching::{self, MatchConfig, MatchError};
use morse_forge::morse::{self, Gauge, MorseError};
use morse_forge::rational::{fmt_q, int, parse_q, Q};
use morse_forge::rays::{self, comb_population, PopulationSpec, RayError};
use morse_forge::words::FreeProduct;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::{CheckFlags, CheckId};

const USAGE: u8 = 2;
const INCONCLUSIVE: u8 = 3;

fn budget_error(e: &(dyn StdError + 'static)) -> bool {
    if let Some(g) = e.downcast_ref::<GraphError>() {
        return matches!(g, GraphError::BudgetExceeded { .. } | GraphError::CapExceeded { .. } | GraphError::PossiblyTruncated { .. });
    }
    if let Some(m) = e.downcast_ref::<MorseError>() {
        return match m {
            MorseError::BudgetExceeded(_) | MorseError::RealizationCapExceeded { .. } | MorseError::BallTooSmall => true,
            MorseError::Graph(g) => budget_error(g),
            _ => false,
        };
    }
    if let Some(r) = e.downcast_ref::<RayError>() {
        return match r {
            RayError::Morse(m) => budget_error(m),
            _ => false,
        };
    }
    if let Some(m) = e.downcast_ref::<MatchError>() {
        return match m {
            MatchError::DepthBudgetExceeded { .. } => true,
            MatchError::Morse(x) => budget_error(x),
            MatchError::Graph(x) => budget_error(x),
            MatchError::Ray(x) => budget_error(x),
            _ => false,
        };
    }
    false
}

/// Exit code for an error: 3 when an enumeration budget ran out, 2 otherwise.
pub fn error_code(e: &anyhow::Error) -> u8 {
    if e.chain().any(budget_error) {
        INCONCLUSIVE
    } else {
        USAGE
    }
}

fn emit(cfg: &RunConfig, name: &str, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    writeln!(std::io::stdout().lock(), "{text}")?;
    if let Some(dir) = &cfg.output {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join(format!("{name}.json")), format!("{text}\n"))?;
    }
    Ok(())
}

fn status_code(s: Status) -> u8 {
    s.exit_code() as u8
}

fn worst(statuses: &[Status]) -> Status {
    if statuses.contains(&Status::Counterexample) {
        Status::Counterexample
    } else if statuses.contains(&Status::Inconclusive) {
        Status::Inconclusive
    } else {
        Status::Verified
    }
}

pub fn normalize(cfg: &RunConfig, text: &str) -> Result<u8> {
    let g = cfg.source()?;
    let w = g.parse(text)?;
    let out = json!({
        "input": text,
        "normal_form": g.format(&w),
        "syllables": w.syllable_count(),
        "syllable_length": g.syllable_length(&w).0,
        "norm": g.norm(&w),
    });
    emit(cfg, "normalize", &out)?;
    Ok(0)
}

fn build_ball(cfg: &RunConfig, g: &FreeProduct, radius: Option<u32>) -> Result<Ball> {
    let r = radius.unwrap_or(cfg.budgets.ball_radius);
    Ok(Ball::build(g, r, cfg.budgets.ball_vertices as u128)?)
}

fn probe_grid(cfg: &RunConfig, flags: &CheckFlags) -> Result<Vec<(Q, Q)>> {
    match (&flags.lambda, &flags.eps) {
        (Some(l), Some(e)) => {
            let l = parse_q(l).map_err(|e| anyhow!("--lambda: {e}"))?;
            let e = parse_q(e).map_err(|e| anyhow!("--eps: {e}"))?;
            if l < int(1) || e < int(0) {
                return Err(anyhow!("need λ ≥ 1 and ε ≥ 0"));
            }
            Ok(vec![(l, e)])
        }
        _ => Ok(cfg.probes.iter().map(|p| (p.0, p.1)).collect()),
    }
}

fn population(cfg: &RunConfig, g: &FreeProduct) -> Result<Vec<rays::CombRay>> {
    let spec = PopulationSpec::standard(g, cfg.population.depth, cfg.population.period);
    Ok(comb_population(g, &spec)?)
}

pub fn run_check(cfg: &RunConfig, id: CheckId, flags: &CheckFlags) -> Result<CheckReport> {
    let g = cfg.source()?;
    let b = &cfg.budgets;
    let report = match id {
        CheckId::PrefixTransit => checks::prefix_transit(&build_ball(cfg, &g, flags.radius)?, flags.extra, b.path_cap),
        CheckId::ProjectionQg => checks::projection_qg(&build_ball(cfg, &g, flags.radius)?, &probe_grid(cfg, flags)?, b.node_budget),
        CheckId::ConcatQg => checks::concat_qg(&build_ball(cfg, &g, flags.radius)?, &probe_grid(cfg, flags)?),
        CheckId::NbhdNesting => {
            let ball = build_ball(cfg, &g, flags.radius)?;
            checks::nbhd_nesting(&ball, &cfg.gauge(), flags.max_k.unwrap_or(2), b.path_cap as usize)?
        }
        CheckId::RayMerge => {
            let max_k = flags.max_k.unwrap_or(2);
            let depth = 6 * max_k as usize + 1;
            let pop = population(cfg, &g)?;
            let rays = pop.iter().map(|a| rays::phi(&g, a, depth).map(|r| r.vertices)).collect::<Result<Vec<_>, _>>()?;
            checks::ray_merge(&g, &rays, &cfg.gauge(), max_k)?
        }
        CheckId::VSystem => {
            let pop = population(cfg, &g)?;
            let p = &cfg.population;
            checks::v_system(&g, &pop, &cfg.gauge(), flags.max_i, flags.max_k.unwrap_or(14) as usize, p.centers, p.members, cfg.seed)?
        }
        CheckId::PhiPsi => {
            let pop = population(cfg, &g)?;
            let ball = build_ball(cfg, &g, flags.radius)?;
            checks::phi_psi(&g, &pop, Some(&ball))
        }
    };
    Ok(report)
}

pub fn check(cfg: &RunConfig, id: CheckId, flags: &CheckFlags) -> Result<u8> {
    let report = run_check(cfg, id, flags)?;
    emit(cfg, &report.check.clone(), &serde_json::to_value(&report)?)?;
    Ok(status_code(report.status))
}

fn write_lines(path: &Path, lines: &[Value]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut text = String::new();
    for l in lines {
        text.push_str(&serde_json::to_string(l)?);
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn run_match(cfg: &RunConfig, transcript: Option<PathBuf>, quick: bool) -> Result<u8> {
    let g1 = cfg.source()?;
    let g2 = cfg.target()?;
    let homeos = cfg.homeos(&g2)?;
    let mcfg = MatchConfig {
        gauge: cfg.gauge(),
        rounds: cfg.budgets.match_steps,
        ray_budget: cfg.budgets.ray_depth,
        ..MatchConfig::default()
    };
    let mut pm = matching::run_matching(&g1, &g2, homeos, &mcfg)?;
    let lines = pm.transcript();
    let path = transcript.or_else(|| cfg.output.as_ref().map(|d| d.join("transcript.jsonl")));
    if let Some(p) = &path {
        write_lines(p, &lines)?;
    }

    let mut statuses = Vec::new();
    let mut invariants = Vec::new();
    for f in [FactorId::A, FactorId::B] {
        let inv = matching::verify_factor(pm.factor_mut(f))?;
        statuses.push(if inv.holds() { Status::Verified } else { Status::Counterexample });
        invariants.push(serde_json::to_value(&inv)?);
    }
    let mut out = json!({
        "rounds": cfg.budgets.match_steps,
        "pairs": lines.len(),
        "gauge": mcfg.gauge.to_string(),
        "invariants": invariants,
    });
    if !quick {
        let pop = population(cfg, &g1)?;
        let induced = checks::induced_containment(&mut pm, &pop, &mcfg.gauge, 3, cfg.population.centers, cfg.seed)?;
        let (cont, per_end) = checks::continuity_suite(&pm, 3, cfg.budgets.continuity_k)?;
        statuses.push(induced.status);
        statuses.push(cont.status);
        out["induced_containment"] = serde_json::to_value(&induced)?;
        out["continuity"] = serde_json::to_value(&cont)?;
        out["continuity_ends"] = serde_json::to_value(&per_end)?;
    }
    let status = worst(&statuses);
    out["status"] = serde_json::to_value(status)?;
    emit(cfg, "match", &out)?;
    Ok(status_code(status))
}

/// Estimates the gauge, then closes the grid under the δ probe (1, 2·M(5, 0)).
pub fn gauge_table(cfg: &RunConfig, word: &str, radius: Option<u32>) -> Result<(Gauge, Q)> {
    let g = cfg.source()?;
    let ball = build_ball(cfg, &g, radius)?;
    let w = g.parse(word)?;
    let path = ball.path_from_words(&g.canonical_realization(&w))?;
    let mut grid = cfg.grid();
    let mut table = morse::estimate_gauge(&ball, &path, &grid)?;
    let m5 = table.eval(int(5), int(0))?;
    let probe = (int(1), int(2) * m5);
    if !grid.contains(&probe) {
        grid.push(probe);
        table = morse::estimate_gauge(&ball, &path, &grid)?;
    }
    let delta = morse::delta_of(&table)?;
    Ok((table, delta))
}

pub fn gauge(cfg: &RunConfig, word: &str, radius: Option<u32>) -> Result<u8> {
    let (table, delta) = gauge_table(cfg, word, radius)?;
    let mut text = table.to_csv();
    text.push_str(&format!("# delta_M = {}\n", fmt_q(&delta)));
    write!(std::io::stdout().lock(), "{text}")?;
    if let Some(dir) = &cfg.output {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("gauge.csv"), &text)?;
    }
    Ok(0)
}

pub fn phi(cfg: &RunConfig, text: &str, depth: usize) -> Result<u8> {
    let g = cfg.source()?;
    let a = rays::parse_comb(&g, text)?;
    let ray = rays::phi(&g, &a, depth)?;
    let back = rays::psi(&g, &ray.vertices)?;
    let out = json!({
        "comb": a.to_json(&g),
        "depth": depth,
        "ray": ray.vertices.iter().map(|w| g.format(w)).collect::<Vec<_>>(),
        "psi": back.to_json(&g),
    });
    emit(cfg, "phi", &out)?;
    Ok(0)
}

pub fn ball(cfg: &RunConfig, radius: Option<u32>, dot: Option<PathBuf>, full: bool) -> Result<u8> {
    let g = cfg.source()?;
    let ball = build_ball(cfg, &g, radius)?;
    let mut spheres = vec![0u64; ball.radius() as usize + 1];
    let mut edges = 0u64;
    for v in 0..ball.len() as u32 {
        spheres[ball.depth(v) as usize] += 1;
        edges += ball.neighbors(v).filter(|&u| u > v).count() as u64;
    }
    let mut out = json!({
        "radius": ball.radius(),
        "vertices": ball.len(),
        "edges": edges,
        "spheres": spheres,
    });
    if full {
        out["graph"] = ball.to_json();
    }
    if let Some(p) = dot {
        fs::write(&p, ball.to_dot(&[])).with_context(|| format!("writing {}", p.display()))?;
        out["dot"] = json!(p.display().to_string());
    }
    emit(cfg, "ball", &out)?;
    Ok(0)
}
