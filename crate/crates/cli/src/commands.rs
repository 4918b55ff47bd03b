use std::path::{Path, PathBuf};

use num_bigint::BigUint;
use serde::Serialize;

use hyptree::analysis::{
    certificate_with, coarse_moduli, concentration_search, counting_bounds, distortion, filtration_decompose,
    james_sum, kr_inequality, ConcentrationConfig, DistortionConfig, FiniteMetric, JamesModel, ScanMode,
};
use hyptree::embeddings::{
    embed_dual, embed_glued, embed_glued_dual, embed_l1, embed_segmented, glued::window, glued_witnesses,
    segmented_witnesses, single_system_witnesses, EmbeddingMap, EtaSchedule, Sidecar,
};
use hyptree::optimizer::{growth_experiment, optimize, optimize_tree, DimRule, LpTarget, OptimizeConfig};
use hyptree::spaces::{Grading, ProjectionMode};
use hyptree::systems::{default_schedule, BiorthSystem, LeveledSystems, SystemKind};
use hyptree::tree::{segment_index, HyperbolicTree};

use crate::args::*;
use crate::artifacts::{read, CliError, CliResult, FileDigest, Manifest, Outputs, MANIFEST};

const F64_TOL: f64 = 64.0 * f64::EPSILON;

pub fn execute(command: &Command, out_dir: &Path) -> CliResult<()> {
    if let Command::Rerun(a) = command {
        return rerun(a, out_dir);
    }
    let out = build(command)?;
    out.commit(out_dir, command).map(|_| ())
}

fn build(command: &Command) -> CliResult<Outputs> {
    let mut out = Outputs::default();
    match command {
        Command::GenTree(a) => gen_tree(a, command, &mut out)?,
        Command::GenSystem(a) => gen_system(a, command, &mut out)?,
        Command::Embed(a) => embed(a, command, &mut out)?,
        Command::Distortion(a) => distortion_cmd(a, command, &mut out)?,
        Command::CoarseModuli(a) => coarse(a, command, &mut out)?,
        Command::Filtration(a) => filtration(a, command, &mut out)?,
        Command::Certify(a) => certify(a, command, &mut out)?,
        Command::Concentration(a) => concentration(a, command, &mut out)?,
        Command::Optimize(a) => optimize_cmd(a, command, &mut out)?,
        Command::Growth(a) => growth(a, command, &mut out)?,
        Command::Rerun(_) => return Err(CliError::Config("nested rerun".into())),
    }
    Ok(out)
}

fn parse_p(s: &str) -> CliResult<f64> {
    match s.trim() {
        "inf" | "infinity" | "∞" => Ok(f64::INFINITY),
        t => t.parse::<f64>().map_err(|_| CliError::Config(format!("bad exponent {s:?}"))),
    }
}

fn parse_big(s: &Option<String>) -> CliResult<Option<BigUint>> {
    s.as_deref()
        .map(|t| t.parse::<BigUint>().map_err(|_| CliError::Config(format!("bad integer {t:?}"))))
        .transpose()
}

#[derive(Serialize)]
struct TreeArtifact {
    tree: HyperbolicTree,
    node_count: String,
    terminal_count: String,
    nodes: Option<Vec<String>>,
}

fn gen_tree(a: &GenTreeArgs, cmd: &Command, out: &mut Outputs) -> CliResult<()> {
    let mut tree = if a.dyadic { HyperbolicTree::dyadic(a.depth) } else { HyperbolicTree::integer(a.depth, a.branching)? };
    if let Some(r) = a.root_branching {
        tree = tree.with_root_branching(r)?;
    }
    let nodes = (tree.node_count() <= 100_000).then(|| tree.enumerate().iter().map(|s| s.to_slash()).collect());
    let art = TreeArtifact {
        node_count: tree.node_count().to_string(),
        terminal_count: tree.terminal_count().to_string(),
        nodes,
        tree,
    };
    out.report("tree.json", cmd, "exact", None, 0.0, art)
}

fn family(kind: SystemKind, depth: usize, levels: Option<usize>, b: u32, zero: bool, seed: u64) -> CliResult<LeveledSystems<f64>> {
    let derived = match kind {
        SystemKind::Gluing => {
            if depth == 0 {
                1
            } else {
                window(depth) + 2
            }
        }
        SystemKind::Segmented { k } => segment_index(depth, k),
    };
    let l = levels.unwrap_or(derived);
    let sched = if zero { vec![0.0; l + 1] } else { default_schedule::<f64>(kind, l + 1) };
    Ok(LeveledSystems::generate(l, kind, b, &sched, Some(depth.max(1)), seed)?)
}

fn gen_system(a: &GenSystemArgs, cmd: &Command, out: &mut Outputs) -> CliResult<()> {
    let report = match a.family {
        FamilyArg::Single => {
            let tree = HyperbolicTree::integer(a.depth, a.branching)?;
            let sys = match a.delta {
                Some(d) => BiorthSystem::<f64>::perturbed(&tree, d, a.seed)?,
                None => BiorthSystem::canonical(&tree),
            };
            out.json("system.json", &sys)?;
            sys.check_invariants()?
        }
        FamilyArg::Gluing | FamilyArg::Segmented => {
            let kind = if a.family == FamilyArg::Gluing {
                SystemKind::Gluing
            } else {
                SystemKind::Segmented { k: a.segment_base }
            };
            let fam = family(kind, a.depth, a.levels, a.branching, a.zero_schedule, a.seed)?;
            out.json("system.json", &fam)?;
            fam.check_invariants()?
        }
    };
    if !report.holds() {
        out.violation(format!("system invariants: {}", report.violations.join("; ")));
    }
    let tol = report.tolerance;
    out.report("invariants.json", cmd, "exhaustive", Some(a.seed), tol, report)
}

fn write_map(out: &mut Outputs, map: &EmbeddingMap<f64>) -> CliResult<()> {
    out.text("map.csv", map.to_csv());
    out.json("map.sidecar.json", &map.sidecar())
}

fn embed(a: &EmbedArgs, cmd: &Command, out: &mut Outputs) -> CliResult<()> {
    let check = !a.no_check;
    match a.construction {
        ConstructionArg::L1 | ConstructionArg::Dual => {
            let tree = HyperbolicTree::integer(a.depth, a.branching)?;
            let sys = match a.delta {
                Some(d) => BiorthSystem::<f64>::perturbed(&tree, d, a.seed)?,
                None => BiorthSystem::canonical(&tree),
            };
            let f = embed_l1(&sys)?;
            let g = embed_dual(&sys)?;
            write_map(out, if a.construction == ConstructionArg::L1 { &f } else { &g })?;
            if check {
                let inv = sys.check_invariants()?;
                let (pf, pg) = single_system_witnesses(&sys, &f, &g)?;
                let ok = inv.holds() && pf.holds() && pg.holds();
                if !ok {
                    out.violation("single-system witness inequalities".into());
                }
                #[derive(Serialize)]
                struct Checks<W, I> {
                    holds: bool,
                    invariants: I,
                    primal: W,
                    dual: W,
                }
                let tol = inv.tolerance;
                out.report("checks.json", cmd, "exhaustive", Some(a.seed), tol, Checks { holds: ok, invariants: inv, primal: pf, dual: pg })?;
            }
        }
        ConstructionArg::Glued | ConstructionArg::GluedDual => {
            let fam = family(SystemKind::Gluing, a.depth, None, a.branching, a.zero_schedule, a.seed)?;
            let f = embed_glued(&fam, a.depth)?;
            let g = embed_glued_dual(&fam, a.depth)?;
            write_map(out, if a.construction == ConstructionArg::Glued { &f } else { &g })?;
            if check && a.depth > 0 {
                let (fs, gs) = glued_witnesses(&fam, &f, &g)?;
                let ok = fs.iter().chain(&gs).all(|c| c.witness.holds());
                if !ok {
                    out.violation("glued witness inequalities".into());
                }
                #[derive(Serialize)]
                struct Checks<C> {
                    holds: bool,
                    primal: C,
                    dual: C,
                }
                out.report("checks.json", cmd, "exhaustive", Some(a.seed), F64_TOL, Checks { holds: ok, primal: fs, dual: gs })?;
            }
        }
        ConstructionArg::Segmented => {
            let kind = SystemKind::Segmented { k: a.segment_base };
            let fam = family(kind, a.depth, None, a.branching, a.zero_schedule, a.seed)?;
            let eta = match a.eta {
                EtaArg::Delta => EtaSchedule::Delta,
                EtaArg::Zero => EtaSchedule::Zero,
            };
            if check && a.depth > 0 {
                let (map, rep) = segmented_witnesses(&fam, a.depth, &eta, a.seed)?;
                write_map(out, &map)?;
                if !rep.holds() {
                    out.violation("segmented case bounds".into());
                }
                #[derive(Serialize)]
                struct Checks<R> {
                    holds: bool,
                    #[serde(flatten)]
                    report: R,
                }
                out.report("checks.json", cmd, "exhaustive", Some(a.seed), F64_TOL, Checks { holds: rep.holds(), report: rep })?;
            } else {
                write_map(out, &embed_segmented(&fam, a.depth, &eta, a.seed)?)?;
            }
        }
    }
    Ok(())
}

fn load_map(input: &MapInput, out: &mut Outputs) -> CliResult<EmbeddingMap<f64>> {
    let csv = read(&input.map)?;
    let side_path: PathBuf = input.sidecar.clone().unwrap_or_else(|| {
        let s = input.map.to_string_lossy();
        PathBuf::from(s.strip_suffix(".csv").map_or_else(|| format!("{s}.sidecar.json"), |b| format!("{b}.sidecar.json")))
    });
    let side = read(&side_path)?;
    out.input(&input.map, &csv);
    out.input(&side_path, &side);
    let sidecar: Sidecar<f64> =
        serde_json::from_slice(&side).map_err(|e| CliError::Config(format!("{}: {e}", side_path.display())))?;
    let text = String::from_utf8(csv).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(EmbeddingMap::from_csv(&text, sidecar)?)
}

fn distortion_cmd(a: &DistortionArgs, cmd: &Command, out: &mut Outputs) -> CliResult<()> {
    let map = load_map(&a.input, out)?;
    let cfg = DistortionConfig { budget: a.budget, samples: a.samples, seed: a.seed };
    let r = distortion(&map, &cfg)?;
    let mode = match r.mode {
        ScanMode::Exhaustive => "exhaustive",
        ScanMode::Sampled { .. } => "sampled",
    };
    let tol = r.tolerance;
    out.report("distortion.json", cmd, mode, Some(a.seed), tol, r)
}

fn coarse(a: &CoarseArgs, cmd: &Command, out: &mut Outputs) -> CliResult<()> {
    let map = load_map(&a.input, out)?;
    let c = coarse_moduli(&map, &a.t_grid, &a.theta_grid)?;
    let tol = c.tolerance;
    out.report("coarse-moduli.json", cmd, "exhaustive", None, tol, c)
}

fn filtration(a: &FiltrationArgs, cmd: &Command, out: &mut Outputs) -> CliResult<()> {
    let map = load_map(&a.input, out)?;
    let grading = Grading::PathLength { offset: a.grading_offset };
    let mode = match a.mode {
        ModeArg::Truncate => ProjectionMode::Truncate,
        ModeArg::Average => ProjectionMode::Average,
    };
    let table = filtration_decompose(&map, a.a, mode, Some(&grading))?;
    let bounds = counting_bounds(&table, a.c, parse_p(&a.p)?)?;
    let limit = if mode == ProjectionMode::Truncate { 0.0 } else { 1e-9 };
    if table.reconstruction_error > limit {
        out.violation(format!("reconstruction error {}", table.reconstruction_error));
    }
    out.text("w-table.csv", table.to_csv()?);
    #[derive(Serialize)]
    struct Body<B> {
        norms: Vec<Vec<f64>>,
        recentred: bool,
        #[serde(flatten)]
        bounds: B,
    }
    let tol = bounds.tolerance;
    out.report("counting-bounds.json", cmd, "exhaustive", None, tol, Body { norms: table.norms.clone(), recentred: table.recentred, bounds })
}

fn certify(a: &CertifyArgs, cmd: &Command, out: &mut Outputs) -> CliResult<()> {
    let cert = certificate_with(a.c, parse_p(&a.p)?, parse_big(&a.a)?, parse_big(&a.m)?)?;
    if cert.contradiction != cert.predicate {
        out.violation("contradiction flag disagrees with m > (2C)^q".into());
    }
    out.report("certificate.json", cmd, "exact", None, 1e-12, cert)
}

fn concentration(a: &ConcentrationArgs, cmd: &Command, out: &mut Outputs) -> CliResult<()> {
    let model = match a.model {
        JamesArg::L1 => JamesModel::L1Basis,
        JamesArg::Summing => JamesModel::SummingBasis,
    };
    let p = parse_p(&a.p)?;
    let kr = kr_inequality(model.theta(), a.k, a.c, p)?;
    let f = move |s: &[u32]| james_sum::<f64>(model, s);
    let cfg = ConcentrationConfig {
        budget: a.budget,
        restarts: a.restarts,
        samples: a.samples,
        seed: a.seed,
        ..ConcentrationConfig::default()
    };
    let search = concentration_search(&f, &model.space(), a.n, a.k, a.c, p, cfg)?;
    #[derive(Serialize)]
    struct Body<K, S> {
        model: JamesModel,
        inequality: K,
        search: S,
    }
    out.report("concentration.json", cmd, "heuristic", Some(a.seed), F64_TOL, Body { model, inequality: kr, search })
}

fn search_config(s: &SearchArgs) -> OptimizeConfig {
    OptimizeConfig {
        iterations: s.iterations,
        restarts: s.restarts,
        step: s.step,
        beta0: s.beta0,
        tau: s.tau,
        seed: s.seed,
        ..OptimizeConfig::default()
    }
}

fn optimize_cmd(a: &OptimizeArgs, cmd: &Command, out: &mut Outputs) -> CliResult<()> {
    let p = parse_p(&a.p)?;
    let cfg = search_config(&a.search);
    let run = if let Some(path) = &a.metric {
        let bytes = read(path)?;
        out.input(path, &bytes);
        let m: FiniteMetric =
            serde_json::from_slice(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let m = FiniteMetric::new(m.labels().to_vec(), m.distances().to_vec())?;
        optimize::<f64>(&m, LpTarget::new(p, a.dim.unwrap_or(m.len()))?, cfg, None)?
    } else if let Some(leaves) = a.star {
        optimize::<f64>(&FiniteMetric::star(leaves), LpTarget::new(p, a.dim.unwrap_or(leaves + 1))?, cfg, None)?
    } else if let Some(depth) = a.depth {
        let tree = HyperbolicTree::integer(depth, a.branching)?;
        let d = a.dim.unwrap_or(tree.node_count() as usize);
        optimize_tree::<f64>(&tree, LpTarget::new(p, d)?, cfg)?
    } else {
        return Err(CliError::Config("one of --metric, --star, --depth is required".into()));
    };
    out.text("trace.csv", run.trace_csv());
    out.text("positions.csv", run.positions_csv());
    #[derive(Serialize)]
    struct Body<'a> {
        target: LpTarget,
        config: OptimizeConfig,
        points: usize,
        best_restart: usize,
        initial_distortion: Option<f64>,
        distortion: f64,
        upper_bound_only: bool,
        report: &'a hyptree::analysis::DistortionReport,
    }
    let body = Body {
        target: run.target,
        config: run.config,
        points: run.points.len(),
        best_restart: run.best_restart,
        initial_distortion: run.initial_distortion,
        distortion: run.distortion,
        upper_bound_only: true,
        report: &run.report,
    };
    out.report("optimize.json", cmd, "exhaustive", Some(cfg.seed), cfg.tolerance, body)
}

fn growth(a: &GrowthArgs, cmd: &Command, out: &mut Outputs) -> CliResult<()> {
    let dim = match a.dim {
        Some(d) => DimRule::Fixed { d },
        None => DimRule::NodeCount,
    };
    let cfg = search_config(&a.search);
    let table = growth_experiment(a.branching, &a.depths, parse_p(&a.p)?, dim, cfg)?;
    let mut csv = String::from("depth,nodes,dim,distortion\n");
    for r in &table.rows {
        csv.push_str(&format!("{},{},{},{:?}\n", r.depth, r.nodes, r.dim, r.distortion));
    }
    out.text("growth.csv", csv);
    let tol = table.tolerance;
    out.report("growth.json", cmd, "exhaustive", Some(cfg.seed), tol, table)
}

fn rerun(a: &RerunArgs, out_dir: &Path) -> CliResult<()> {
    let bytes = read(&a.manifest)?;
    let manifest: Manifest =
        serde_json::from_slice(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", a.manifest.display())))?;
    if matches!(manifest.config, Command::Rerun(_)) {
        return Err(CliError::Config("a rerun manifest cannot be rerun".into()));
    }
    let outputs = build(&manifest.config)?;
    let digests = match outputs.commit(out_dir, &manifest.config) {
        Ok(d) => d,
        Err(CliError::Violation(_)) => {
            let m: Manifest = serde_json::from_slice(&read(&out_dir.join(MANIFEST))?)
                .map_err(|e| CliError::Io(e.to_string()))?;
            m.artifacts
        }
        Err(e) => return Err(e),
    };
    let mismatched: Vec<&FileDigest> = manifest.artifacts.iter().filter(|d| !digests.contains(d)).collect();
    #[derive(Serialize)]
    struct Body<'a> {
        manifest: String,
        artifacts: usize,
        identical: bool,
        mismatched: Vec<&'a FileDigest>,
    }
    let body = Body {
        manifest: a.manifest.display().to_string(),
        artifacts: manifest.artifacts.len(),
        identical: mismatched.is_empty() && digests.len() == manifest.artifacts.len(),
        mismatched,
    };
    let identical = body.identical;
    std::fs::write(out_dir.join("rerun.json"), crate::artifacts::json_bytes(&body)?)
        .map_err(|e| CliError::Io(e.to_string()))?;
    if !identical {
        return Err(CliError::Violation("rerun artifacts differ from the manifest".into()));
    }
    Ok(())
}
