use std::fmt;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use edgeswitch::discrete::{self, assemble, lambda_study, random_chain_cluster, SwitchSite, LAMBDA_GRID};
use edgeswitch::ensemble;
use edgeswitch::metric::{self, MetricSolver};
use edgeswitch::oracle::{oracle_eigenvalues, PiecewisePotential, ORACLE_NOISE};
use edgeswitch::perturbation::{self, RangeMode, SweepOptions};
use edgeswitch::shift::{self, ShiftReport};
use edgeswitch::transform::{self, composed_bound, edge_switch, edge_swap, read_log, replay, write_log};
use edgeswitch::{fixtures, DiscreteGraph, EdgeEndpoint, End, MetricGraph, Spectrum, Transformation};

use crate::manifest::Run;
use crate::{Cli, Command, EnsembleAction, Mode};

/// A checked property failed; reported with exit code 4.
#[derive(Debug)]
pub struct Violation(pub String);

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Violation {}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<Violation>().is_some() {
        return 4;
    }
    match e.downcast_ref::<edgeswitch::Error>() {
        Some(err) if !err.is_input_error() => 3,
        _ => 2,
    }
}

fn print_summary(value: &serde_json::Value) -> Result<()> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value)?;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    Ok(())
}

/// Writes the manifest, prints the summary and turns a failed check into a violation.
fn finish(run: Run, summary: serde_json::Value, violations: Vec<String>) -> Result<()> {
    run.finish()?;
    print_summary(&summary)?;
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Violation(violations.join("; ")).into())
    }
}

fn read_graph(run: &mut Run, path: &Path) -> Result<MetricGraph> {
    let text = run.input(path)?;
    MetricGraph::from_json(&text).with_context(|| format!("invalid graph {}", path.display()))
}

fn read_lengths(run: &mut Run, path: &Path) -> Result<Vec<f64>> {
    let text = run.input(path)?;
    serde_json::from_str(&text)
        .map_err(|e| edgeswitch::Error::Parse(e.to_string()))
        .with_context(|| format!("invalid length list {}", path.display()))
}

fn parse_endpoint(s: &str) -> Result<EdgeEndpoint> {
    let (edge, end) = s.split_once(':').unwrap_or((s, "head"));
    let edge = edge.trim().parse().map_err(|_| edgeswitch::Error::Parse(format!("bad edge id in {s:?}")))?;
    let end = match end.trim() {
        "head" => End::Head,
        "tail" => End::Tail,
        other => return Err(edgeswitch::Error::Parse(format!("endpoint must be head or tail, got {other:?}")).into()),
    };
    Ok(EdgeEndpoint::new(edge, end))
}

fn spectrum_csv(s: &Spectrum) -> String {
    let mut out = String::from("n,k,E\n");
    let mut n = 0;
    for _ in 0..s.zero_modes {
        n += 1;
        let _ = writeln!(out, "{n},0,0");
    }
    for k in s.wavenumbers() {
        n += 1;
        let _ = writeln!(out, "{n},{k},{}", k * k);
    }
    out
}

fn perm_label(p: &[usize]) -> String {
    p.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("-")
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Spectrum(a) => spectrum(cli, a),
        Command::Dspectrum(a) => dspectrum(cli, a),
        Command::Dswitch(a) => dswitch(cli, a),
        Command::Transform(a) => transform_cmd(cli, a),
        Command::Shift(a) => shift_cmd(cli, a),
        Command::VerifyLemmas(a) => verify_lemmas(cli, a),
        Command::Oracle(a) => oracle(cli, a),
        Command::Ensemble(a) => match &a.action {
            EnsembleAction::Walk { topology, lengths, steps, seed, levels } => {
                ensemble_walk(cli, topology, lengths, *steps, *seed, *levels)
            }
            EnsembleAction::Pairs { topology, lengths, pairs, levels, seed } => {
                ensemble_pairs(cli, topology, lengths, *pairs, *levels, *seed)
            }
        },
        Command::Figure3(a) => figure3(cli, a),
        Command::Additivity(a) => additivity(cli, a),
        Command::CrossingLimit(a) => crossing_limit(cli, a),
    }
}

fn spectrum(cli: &Cli, a: &crate::SpectrumArgs) -> Result<()> {
    let mut run = Run::new("spectrum", &cli.out)?;
    let g = read_graph(&mut run, &a.graph)?;
    run.tolerance("phase_tol", metric::PHASE_TOL);
    let solver = MetricSolver::new(&g)?;
    let s = match (a.kmax, a.levels) {
        (Some(k), _) => {
            run.param("kmax", k);
            solver.eigenvalues_up_to(k)?
        }
        (None, Some(n)) => {
            run.param("levels", n);
            solver.eigenvalues_first(n)?
        }
        (None, None) => bail!(edgeswitch::Error::Validation("give --kmax or --levels".into())),
    };
    run.write("spectrum.csv", &spectrum_csv(&s))?;
    let summary = json!({
        "levels": s.len(),
        "zero_modes": s.zero_modes,
        "k_max": s.k_max,
        "total_length": g.total_length(),
    });
    run.write_json("spectrum.json", &summary)?;
    finish(run, summary, vec![])
}

fn dspectrum(cli: &Cli, a: &crate::DspectrumArgs) -> Result<()> {
    let mut run = Run::new("dspectrum", &cli.out)?;
    let text = run.input(&a.graph)?;
    let g = DiscreteGraph::from_json(&text).with_context(|| format!("invalid discrete graph {}", a.graph.display()))?;
    let e = assemble(&g)?.eigenvalues();
    let mut csv = String::from("n,E\n");
    for (i, x) in e.iter().enumerate() {
        let _ = writeln!(csv, "{},{x}", i + 1);
    }
    run.write("dspectrum.csv", &csv)?;
    finish(run, json!({ "dimension": g.n, "eigenvalues": e.len() }), vec![])
}

#[derive(Serialize)]
struct DswitchCase {
    index: usize,
    dimension: usize,
    site: SwitchSite,
    study: discrete::LambdaStudy,
}

fn dswitch(cli: &Cli, a: &crate::DswitchArgs) -> Result<()> {
    let mut run = Run::new("dswitch", &cli.out)?;
    run.seed(a.seed);
    let lambdas = a.lambdas.clone().unwrap_or_else(|| LAMBDA_GRID.to_vec());
    run.param("lambdas", &lambdas);
    run.param("energies", a.energies);
    run.tolerance("energy_gap", 1e-6);
    let cases: Vec<(DiscreteGraph, SwitchSite)> = match (&a.graph, &a.site) {
        (Some(path), Some(s)) => {
            let text = run.input(path)?;
            let g = DiscreteGraph::from_json(&text).with_context(|| format!("invalid discrete graph {}", path.display()))?;
            let site = SwitchSite { a: s[0], a_next: s[1], a_vert: s[2], b: s[3], b_next: s[4], b_vert: s[5] };
            vec![(g, site)]
        }
        _ => {
            run.param("random", a.random);
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            (0..a.random).map(|_| random_chain_cluster(&mut rng, &Default::default())).collect()
        }
    };
    let results: Vec<DswitchCase> = cases
        .par_iter()
        .enumerate()
        .map(|(i, (g, site))| {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            rng.set_stream(i as u64 + 1);
            let h = assemble(g)?;
            let study = lambda_study(&h, site, &lambdas, a.energies, &mut rng)?;
            Ok(DswitchCase { index: i, dimension: g.n, site: *site, study })
        })
        .collect::<edgeswitch::Result<_>>()?;
    run.write_json("dswitch.json", &results)?;
    let failed: Vec<usize> = results.iter().filter(|c| !c.study.holds()).map(|c| c.index).collect();
    let summary = json!({
        "fixtures": results.len(),
        "all_monotone": results.iter().all(|c| c.study.monotone),
        "max_decrease": results.iter().map(|c| c.study.max_decrease).max(),
        "all_stabilized": results.iter().all(|c| c.study.stabilized),
        "max_conjugate_shift": results.iter().map(|c| c.study.max_conjugate_shift).max(),
        "conjugate_ranks": results.iter().flat_map(|c| c.study.conjugate_ranks.iter().copied()).collect::<std::collections::BTreeSet<_>>(),
        "resampled": results.iter().map(|c| c.study.resampled).sum::<usize>(),
        "failed": failed,
    });
    let violations = if failed.is_empty() {
        vec![]
    } else {
        vec![format!("λ-family checks failed on fixtures {failed:?}")]
    };
    finish(run, summary, violations)
}

fn transform_cmd(cli: &Cli, a: &crate::TransformArgs) -> Result<()> {
    let mut run = Run::new("transform", &cli.out)?;
    let g = read_graph(&mut run, &a.graph)?;
    let steps = read_log(&run.input(&a.transform)?)?;
    let mut primitives: Vec<Transformation> = Vec::new();
    let mut current = g.clone();
    for t in &steps {
        let parts = t.decompose(&current)?;
        current = replay(&current, &parts)?;
        primitives.extend(parts);
    }
    run.write("transformed.json", &(current.to_json() + "\n"))?;
    run.write("primitives.jsonl", &write_log(&primitives))?;
    let summary = json!({
        "steps": steps.iter().map(Transformation::describe).collect::<Vec<_>>(),
        "primitive_steps": primitives.len(),
        "composed_bound": composed_bound(&steps),
        "total_length": [g.total_length(), current.total_length()],
    });
    finish(run, summary, vec![])
}

fn shift_cmd(cli: &Cli, a: &crate::ShiftArgs) -> Result<()> {
    let mut run = Run::new("shift", &cli.out)?;
    run.seed(a.seed);
    run.param("levels", a.levels);
    run.param("samples", a.samples);
    run.tolerance("energy_tol", shift::ENERGY_TOL);
    run.tolerance("cluster_tol", shift::CLUSTER_TOL);
    let g = read_graph(&mut run, &a.graph)?;
    let steps = read_log(&run.input(&a.transform)?)?;
    let h = transform::replay(&g, &steps)?;
    let (sa, sb) = shift::spectra_pair(&g, &h, a.levels)?;
    let report = ShiftReport::new(&sa, &sb, &steps, a.samples, a.seed)?;
    run.write_json("shift_report.json", &report)?;
    let hist = shift::ShiftHistogram {
        counts: report.histogram.clone(),
        samples: report.samples,
        resamples: report.resamples,
        k_cut: report.k_cut,
        seed: a.seed,
    };
    run.write("histogram.csv", &hist.to_csv())?;
    let violations = if report.within_bound {
        vec![]
    } else {
        vec![format!(
            "interlacing degree {} exceeds the composed bound {}",
            report.interlacing_degree, report.composed_bound
        )]
    };
    let summary = serde_json::to_value(&report)?;
    finish(run, summary, violations)
}

fn verify_lemmas(cli: &Cli, a: &crate::LemmaArgs) -> Result<()> {
    let mut run = Run::new("verify-lemmas", &cli.out)?;
    run.seed(a.seed);
    let mode = match a.mode {
        Mode::Balanced => RangeMode::Balanced,
        Mode::Generic => RangeMode::Generic,
    };
    run.param("n", a.n);
    run.param("ranks", &a.ranks);
    run.param("fixtures", a.fixtures);
    run.param("energies", a.energies);
    run.param("mode", mode);
    run.tolerance("energy_gap", perturbation::ENERGY_GAP);
    run.tolerance("sign_tol", perturbation::SIGN_TOL);
    let verdicts = perturbation::sweep(&SweepOptions {
        n: a.n,
        ranks: a.ranks.clone(),
        fixtures: a.fixtures,
        energies: a.energies,
        mode,
        seed: a.seed,
    })?;
    run.write_json("lemmas.json", &verdicts)?;
    let rank_violations = verdicts.iter().filter(|v| !v.rank_bound.holds).count();
    let reflection_violations = verdicts.iter().filter(|v| !v.reflection.holds).count();
    let chain_violations = verdicts.iter().filter(|v| v.chain_step > 1).count();
    let summary = json!({
        "fixtures": verdicts.len(),
        "mode": mode,
        "rank_bound_violations": rank_violations,
        "reflection_bound_violations": reflection_violations,
        "rank_one_step_violations": chain_violations,
        "max_antisymmetry_defect": verdicts.iter().map(|v| v.reflection.antisymmetry_defect).fold(0.0, f64::max),
        "resampled": verdicts.iter().map(|v| v.resampled).sum::<usize>(),
    });
    let mut violations = Vec::new();
    if rank_violations + chain_violations > 0 {
        violations.push(format!("rank bound failed on {} fixtures", rank_violations + chain_violations));
    }
    // the reflection bound is only claimed for balanced ranges
    if mode == RangeMode::Balanced && reflection_violations > 0 {
        violations.push(format!("reflection bound failed on {reflection_violations} fixtures"));
    }
    finish(run, summary, violations)
}

fn oracle(cli: &Cli, a: &crate::OracleArgs) -> Result<()> {
    let mut run = Run::new("oracle", &cli.out)?;
    run.param("h", a.h);
    run.param("levels", a.levels);
    run.tolerance("oracle_noise", ORACLE_NOISE);
    let g = read_graph(&mut run, &a.graph)?;
    let v = match &a.potential {
        Some(p) => Some(PiecewisePotential::from_json(&run.input(p)?)?),
        None => None,
    };
    let levels = oracle_eigenvalues(&g, a.levels, a.h, v.as_ref())?;
    let mut csv = String::from("n,E,error_estimate\n");
    for l in &levels {
        let _ = writeln!(csv, "{},{},{}", l.index, l.energy, l.error_estimate);
    }
    run.write("oracle.csv", &csv)?;
    let mut summary = json!({ "levels": levels });
    if a.compare {
        let s = metric::eigenvalues_first(&g, a.levels)?;
        let exact = s.energies();
        let rel: Vec<f64> = levels
            .iter()
            .zip(&exact)
            .map(|(l, &e)| (l.energy - e).abs() / e.abs().max(1.0))
            .collect();
        summary["metric_energies"] = json!(&exact[..levels.len().min(exact.len())]);
        summary["relative_difference"] = json!(rel);
    }
    run.write_json("oracle.json", &summary)?;
    finish(run, summary, vec![])
}

fn ensemble_walk(cli: &Cli, topology: &Path, lengths: &Path, steps: usize, seed: u64, levels: usize) -> Result<()> {
    let mut run = Run::new("ensemble walk", &cli.out)?;
    run.seed(seed);
    run.param("steps", steps);
    run.param("levels", levels);
    let topo = read_graph(&mut run, topology)?;
    let lengths = read_lengths(&mut run, lengths)?;
    let t = ensemble::walk(&topo, &lengths, steps, seed)?;
    let mut csv = String::with_capacity(t.len() * 16);
    csv.push_str("step,perm,distance\n");
    for i in 0..t.len() {
        let _ = writeln!(csv, "{i},{},{}", perm_label(t.state(i)), t.distances[i]);
    }
    run.write("trajectory.csv", &csv)?;
    let mut summary = json!({
        "steps": steps,
        "final_distance": t.distances.last(),
        "max_distance": t.distances.iter().max(),
    });
    if t.n_edges <= ensemble::EXHAUSTIVE_EDGES {
        let (stat, p) = t.uniformity()?;
        summary["states_visited"] = json!(t.visits.len());
        summary["chi_square"] = json!(stat);
        summary["p_value"] = json!(p);
        let visits: Vec<_> = t.visits.iter().map(|(k, v)| json!({ "perm": perm_label(k), "visits": v })).collect();
        summary["visits"] = json!(visits);
    }
    if levels > 0 {
        let cache = ensemble::SpectrumCache::new(topo.clone(), lengths.clone(), levels)?;
        let mut perms: Vec<Vec<usize>> = (0..t.len()).map(|i| t.state(i).to_vec()).collect();
        perms.sort();
        perms.dedup();
        let spectra = cache.get_many(&perms)?;
        let mut out = String::from("perm,n,k\n");
        for (p, s) in perms.iter().zip(&spectra) {
            for (n, k) in s.wavenumbers().iter().take(levels).enumerate() {
                let _ = writeln!(out, "{},{},{k}", perm_label(p), n + 1);
            }
        }
        run.write("spectra.csv", &out)?;
    }
    run.write_json("walk.json", &summary)?;
    finish(run, summary, vec![])
}

fn ensemble_pairs(cli: &Cli, topology: &Path, lengths: &Path, pairs: usize, levels: usize, seed: u64) -> Result<()> {
    let mut run = Run::new("ensemble pairs", &cli.out)?;
    run.seed(seed);
    run.param("pairs", pairs);
    run.param("levels", levels);
    let topo = read_graph(&mut run, topology)?;
    let lengths = read_lengths(&mut run, lengths)?;
    let rows = ensemble::shift_vs_distance(&topo, &lengths, pairs, levels, seed)?;
    let mut csv = String::from("pi,sigma,distance,degree\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{},{}", perm_label(&r.pi), perm_label(&r.sigma), r.distance, r.degree);
    }
    run.write("pairs.csv", &csv)?;
    let bad: Vec<usize> = rows.iter().enumerate().filter(|(_, r)| !r.within_bound()).map(|(i, _)| i).collect();
    let summary = json!({
        "pairs": rows.len(),
        "max_degree": rows.iter().map(|r| r.degree).max(),
        "max_distance": rows.iter().map(|r| r.distance).max(),
        "bound_violations": bad,
    });
    let violations = if bad.is_empty() { vec![] } else { vec![format!("r* > 2Δ on pairs {bad:?}")] };
    finish(run, summary, violations)
}

fn figure3(cli: &Cli, a: &crate::Figure3Args) -> Result<()> {
    let mut run = Run::new("figure3", &cli.out)?;
    run.seed(a.seed);
    run.param("levels", a.levels);
    run.param("samples", a.samples);
    run.param("tetrahedron_lengths", fixtures::tetrahedron_lengths());
    run.tolerance("energy_tol", shift::ENERGY_TOL);
    let g = fixtures::tetrahedron();
    let switched = edge_switch(&g, EdgeEndpoint::head(0), EdgeEndpoint::head(5))?;
    let swapped = edge_swap(&g, 0, 5)?;
    let spectra: Vec<Spectrum> = [&g, &switched, &swapped]
        .par_iter()
        .map(|x| MetricSolver::new(x)?.eigenvalues_first(a.levels))
        .collect::<edgeswitch::Result<_>>()?;
    let mut summary = json!({});
    let mut violations = Vec::new();
    for (name, other, bound) in [("switch", &spectra[1], 1), ("swap", &spectra[2], 2)] {
        let il = shift::interlacing(&spectra[0], other)?;
        let hist = shift::histogram_from_spectra(&spectra[0], other, a.samples, a.seed)?;
        run.write(&format!("{name}_histogram.csv"), &hist.to_csv())?;
        summary[name] = json!({
            "support": hist.counts.keys().collect::<Vec<_>>(),
            "counts": hist.counts,
            "max_abs_shift": hist.max_abs(),
            "frequency_abs_2": hist.frequency_abs(2),
            "interlacing_degree": il.degree,
            "levels_compared": il.compared,
            "resamples": hist.resamples,
        });
        if il.degree > bound {
            violations.push(format!("{name} reached |ΔN| = {} above its bound {bound}", il.degree));
        }
    }
    run.write_json("figure3.json", &summary)?;
    finish(run, summary, violations)
}

fn additivity(cli: &Cli, a: &crate::AdditivityArgs) -> Result<()> {
    let mut run = Run::new("additivity", &cli.out)?;
    run.seed(a.seed);
    run.param("crossing", json!({ "e": a.e, "s_e": a.s_e, "f": a.f, "s_f": a.s_f }));
    run.param("energies", a.energies);
    run.param("kmax", a.kmax);
    let g = read_graph(&mut run, &a.graph)?;
    let r = shift::additivity_check(&g, a.e, a.s_e, a.f, a.s_f, a.energies, a.kmax, a.seed)?;
    run.write_json("additivity.json", &r)?;
    let violations = if r.residual == 0 { vec![] } else { vec![format!("additivity residual {}", r.residual)] };
    finish(run, serde_json::to_value(&r)?, violations)
}

fn crossing_limit(cli: &Cli, a: &crate::CrossingLimitArgs) -> Result<()> {
    let mut run = Run::new("crossing-limit", &cli.out)?;
    run.param("eps", &a.eps);
    run.param("levels", a.levels);
    run.tolerance("final_error", a.tol);
    let g = read_graph(&mut run, &a.graph)?;
    let p = parse_endpoint(&a.p)?;
    let q = parse_endpoint(&a.q)?;
    let lim = shift::switch_as_crossing_limit(&g, p, q, &a.eps, a.levels)?;
    run.write_json("crossing_limit.json", &lim)?;
    let last = lim.max_errors.last().copied().unwrap_or(0.0);
    let mut violations = Vec::new();
    if !lim.monotone {
        violations.push("errors do not decrease with ε".to_string());
    }
    if last >= a.tol {
        violations.push(format!("error {last:e} at the smallest ε is not below {:e}", a.tol));
    }
    finish(run, serde_json::to_value(&lim)?, violations)
}
