//! Implementations of the `estimate`, `check`, and `simulate` subcommands.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wlstrees::dissim::{
    build_variance, check_four_point, check_semi_multiplicative, DissimilarityMap,
    QuartetFinding, QuartetSplit, SemiMultFinding, VarianceModel,
};
use wlstrees::fastwls::{all_edge_lengths_with, EstimationMethod};
use wlstrees::io::{
    align_to_tree, parse_newick, read_phylip, read_taxon_weights, write_newick, write_phylip,
};
use wlstrees::oracle::{check_iip, IipFinding};
use wlstrees::sim::{simulate_gauss_const, simulate_gauss_jc};
use wlstrees::tree::{PhyloTree, TreeAdditiveMap};

use crate::report::{
    digest, CheckReport, EdgeReport, EstimateReport, Finding, InputDigest, RunReport,
    SimulateReport, Timings,
};
use crate::{
    CheckArgs, CheckMode, CliError, EstimateArgs, SimModel, SimulateArgs, VarianceFlags,
    VarianceKind,
};

fn load(path: &Path, inputs: &mut Vec<InputDigest>) -> Result<String, CliError> {
    let bytes =
        fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    inputs.push(digest(path, &bytes));
    String::from_utf8(bytes)
        .map_err(|_| CliError::Input(format!("{}: not valid UTF-8", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn reject_unused_flags(kind: Option<VarianceKind>, flags: &VarianceFlags) -> Result<(), CliError> {
    let mut stray = Vec::new();
    if flags.weights.is_some() && kind != Some(VarianceKind::Mult) {
        stray.push("--weights");
    }
    if flags.taxa.is_some() && kind != Some(VarianceKind::Taxon) {
        stray.push("--taxa");
    }
    if flags.seqlen.is_some() && kind != Some(VarianceKind::Jc) {
        stray.push("--seqlen");
    }
    if flags.var_file.is_some() && kind != Some(VarianceKind::File) {
        stray.push("--var-file");
    }
    if stray.is_empty() {
        Ok(())
    } else {
        Err(CliError::Input(format!(
            "{} not used by the selected variance model",
            stray.join(", ")
        )))
    }
}

/// Turns the `--variance` flags into a concrete model over `tree`, plus a
/// short echo string for the report. `d` supplies the observed distances for
/// the data-driven models (`fm`, `jc`).
fn resolve_variance(
    kind: VarianceKind,
    flags: &VarianceFlags,
    tree: &PhyloTree,
    d: &DissimilarityMap<f64>,
    inputs: &mut Vec<InputDigest>,
) -> Result<(VarianceModel<f64>, String), CliError> {
    reject_unused_flags(Some(kind), flags)?;
    match kind {
        VarianceKind::Ols => Ok((VarianceModel::Ols, "ols".into())),
        VarianceKind::Bme => Ok((VarianceModel::Bme, "bme".into())),
        VarianceKind::Fm => Ok((
            VarianceModel::FitchMargoliash {
                distances: d.clone(),
            },
            "fm".into(),
        )),
        VarianceKind::Jc => {
            let seq_len = flags
                .seqlen
                .ok_or_else(|| CliError::Input("--variance jc requires --seqlen".into()))?;
            if seq_len < 1 {
                return Err(CliError::Input("--seqlen must be at least 1".into()));
            }
            Ok((
                VarianceModel::JukesCantor {
                    seq_len,
                    deltas: d.clone(),
                },
                format!("jc(seqlen={seq_len})"),
            ))
        }
        VarianceKind::Taxon => {
            let path = flags
                .taxa
                .as_ref()
                .ok_or_else(|| CliError::Input("--variance taxon requires --taxa".into()))?;
            let table = read_taxon_weights(&load(path, inputs)?)?;
            let mut weights = vec![None; tree.leaf_count()];
            for (label, w) in table {
                let leaf = tree.leaf_id(&label).ok_or_else(|| {
                    CliError::Input(format!("taxon {label:?} is not a leaf of the tree"))
                })?;
                weights[leaf] = Some(w);
            }
            let weights: Vec<f64> = weights
                .into_iter()
                .enumerate()
                .map(|(leaf, w)| {
                    w.ok_or_else(|| {
                        CliError::Input(format!(
                            "no weight given for leaf {:?}",
                            tree.leaf_label(leaf)
                        ))
                    })
                })
                .collect::<Result<_, _>>()?;
            Ok((
                VarianceModel::TaxonWeighted { weights },
                format!("taxon({})", path.display()),
            ))
        }
        VarianceKind::Mult => {
            let path = flags
                .weights
                .as_ref()
                .ok_or_else(|| CliError::Input("--variance mult requires --weights".into()))?;
            let doc = parse_newick(&load(path, inputs)?)?;
            let factors = doc.require_lengths()?;
            let by_split: HashMap<Vec<String>, f64> = (0..doc.tree.edge_count())
                .map(|e| (doc.tree.split_key(e), factors.get(e)))
                .collect();
            let mut values = Vec::with_capacity(tree.edge_count());
            for e in 0..tree.edge_count() {
                let key = tree.split_key(e);
                let w = *by_split.get(&key).ok_or_else(|| {
                    CliError::Input(format!(
                        "weights tree has no edge for the split {{{}}}",
                        key.join(",")
                    ))
                })?;
                if !(w > 0.0) {
                    return Err(CliError::Input(format!(
                        "edge weight for split {{{}}} must be positive, got {w}",
                        key.join(",")
                    )));
                }
                values.push(w);
            }
            let weights = TreeAdditiveMap::new(tree, values).map_err(wlstrees::WlsError::from)?;
            Ok((
                VarianceModel::TreeMultiplicative { weights },
                format!("mult({})", path.display()),
            ))
        }
        VarianceKind::Pauplin => Ok((
            VarianceModel::PauplinFamily {
                c1: flags.c1,
                c2: flags.c2,
            },
            format!("pauplin(c1={}, c2={})", flags.c1, flags.c2),
        )),
        VarianceKind::File => {
            let path = flags
                .var_file
                .as_ref()
                .ok_or_else(|| CliError::Input("--variance file requires --var-file".into()))?;
            let labeled = read_phylip(&load(path, inputs)?)?;
            let variances = align_to_tree(tree, &labeled)?;
            Ok((
                VarianceModel::Raw { variances },
                format!("file({})", path.display()),
            ))
        }
    }
}

fn method_tag(method: EstimationMethod) -> &'static str {
    match method {
        EstimationMethod::ClosedForm => "closed-form",
        EstimationMethod::Collapsed => "collapsed",
        EstimationMethod::Dense => "dense-fallback",
    }
}

pub fn estimate(args: &EstimateArgs) -> Result<(), CliError> {
    let mut timings = Timings::start();
    let mut inputs = Vec::new();
    let mut warnings = Vec::new();

    let doc = parse_newick(&load(&args.tree, &mut inputs)?)?;
    let tree = doc.tree;
    if doc.has_polytomy {
        warnings.push("tree has polytomies; only the dense estimator applies".to_string());
    }
    let labeled = read_phylip(&load(&args.dist, &mut inputs)?)?;
    let d = align_to_tree(&tree, &labeled)?;
    let (model, variance_echo) =
        resolve_variance(args.variance, &args.flags, &tree, &d, &mut inputs)?;
    timings.mark("parse");

    let v = build_variance(&model, &tree)?;
    let solution = all_edge_lengths_with(&tree, &d, &v, model.certified_multiplicative())?;
    if solution.method == EstimationMethod::Dense && tree.is_binary() && tree.leaf_count() > 2 {
        warnings.push(
            "variance matrix is not semi-multiplicative; fell back to the dense solver"
                .to_string(),
        );
    }
    let fitted = tree.evaluate_additive(&solution.lengths);
    let weighted_rss: f64 = d
        .iter_pairs()
        .map(|(i, j, obs)| {
            let r = obs - fitted.get(i, j);
            r * r / v.get(i, j)
        })
        .sum();
    timings.mark("solve");

    println!("{}", write_newick(&tree, Some(&solution.lengths)));

    if let Some(path) = &args.report {
        let mut report = RunReport::new("estimate", inputs);
        report.estimate = Some(EstimateReport {
            variance: variance_echo,
            method: method_tag(solution.method),
            tree_length: solution.lengths.values().iter().sum(),
            weighted_rss,
            edges: (0..tree.edge_count())
                .map(|e| EdgeReport {
                    split: tree.split_key(e),
                    length: solution.lengths.get(e),
                })
                .collect(),
        });
        report.warnings = warnings;
        report.timings_ms = timings.finish();
        write_file(path, &(report.to_json() + "\n"))?;
    } else {
        for w in &warnings {
            eprintln!("warning: {w}");
        }
    }
    Ok(())
}

fn fourpoint_finding(f: &QuartetFinding<f64>, labels: &[String]) -> Finding {
    let [a, b, c, d] = f.leaves;
    let pair = |x: usize, y: usize, z: usize, w: usize| {
        format!("{},{}|{},{}", labels[x], labels[y], labels[z], labels[w])
    };
    let split = match f.split {
        QuartetSplit::FirstSecond => pair(a, b, c, d),
        QuartetSplit::FirstThird => pair(a, c, b, d),
        QuartetSplit::FirstFourth => pair(a, d, b, c),
        QuartetSplit::Unresolved => "unresolved".to_string(),
    };
    Finding {
        leaves: f.leaves.iter().map(|&i| labels[i].clone()).collect(),
        edge: None,
        split: Some(split),
        coefficient: None,
        relative_violation: f.relative_violation,
    }
}

fn semimult_finding(f: &SemiMultFinding<f64>, tree: &PhyloTree) -> Finding {
    Finding {
        leaves: f
            .quadruple
            .iter()
            .map(|&i| tree.leaf_label(i).to_string())
            .collect(),
        edge: None,
        split: None,
        coefficient: None,
        relative_violation: f.relative_violation,
    }
}

fn iip_finding(f: &IipFinding<f64>, tree: &PhyloTree) -> Finding {
    Finding {
        leaves: vec![
            tree.leaf_label(f.pair.0).to_string(),
            tree.leaf_label(f.pair.1).to_string(),
        ],
        edge: Some(tree.split_key(f.edge)),
        split: None,
        coefficient: Some(f.coefficient),
        relative_violation: f.relative,
    }
}

pub fn check(args: &CheckArgs) -> Result<(), CliError> {
    let mut timings = Timings::start();
    let mut inputs = Vec::new();
    let labeled = read_phylip(&load(&args.matrix, &mut inputs)?)?;

    let body = match args.mode {
        CheckMode::Fourpoint => {
            if args.tree.is_some() {
                return Err(CliError::Input(
                    "--tree is not used by --mode fourpoint".into(),
                ));
            }
            if args.variance.is_some() {
                return Err(CliError::Input(
                    "--variance is not used by --mode fourpoint".into(),
                ));
            }
            reject_unused_flags(None, &args.flags)?;
            let tol = args.tol.unwrap_or(1e-9);
            let rep = check_four_point(&labeled.matrix, tol);
            CheckReport {
                mode: "fourpoint",
                tolerance: tol,
                pass: rep.pass,
                checked: rep.quartets_checked,
                worst: rep.worst.map(|f| fourpoint_finding(&f, &labeled.labels)),
                offenders: rep
                    .offenders
                    .iter()
                    .map(|f| fourpoint_finding(f, &labeled.labels))
                    .collect(),
            }
        }
        CheckMode::Semimult | CheckMode::Iip => {
            let tree_path = args.tree.as_ref().ok_or_else(|| {
                CliError::Input("--mode semimult and --mode iip require --tree".into())
            })?;
            let doc = parse_newick(&load(tree_path, &mut inputs)?)?;
            let tree = doc.tree;
            let aligned = align_to_tree(&tree, &labeled)?;
            let v = match args.variance {
                None => {
                    reject_unused_flags(None, &args.flags)?;
                    aligned
                }
                Some(VarianceKind::File) => {
                    return Err(CliError::Input(
                        "--variance file is redundant here; pass the variance matrix as the \
                         positional argument"
                            .into(),
                    ));
                }
                Some(kind) => {
                    let (model, _) =
                        resolve_variance(kind, &args.flags, &tree, &aligned, &mut inputs)?;
                    build_variance(&model, &tree)?
                }
            };
            let tol = args.tol.unwrap_or(1e-10);
            if args.mode == CheckMode::Semimult {
                let rep = check_semi_multiplicative(&v, &tree, tol)?;
                CheckReport {
                    mode: "semimult",
                    tolerance: tol,
                    pass: rep.pass,
                    checked: rep.pairs_checked,
                    worst: rep.worst.map(|f| semimult_finding(&f, &tree)),
                    offenders: rep
                        .offenders
                        .iter()
                        .map(|f| semimult_finding(f, &tree))
                        .collect(),
                }
            } else {
                if !tree.is_binary() {
                    return Err(CliError::Input(
                        "--mode iip requires a fully resolved (binary) tree".into(),
                    ));
                }
                let rep = check_iip(&tree, &v, tol)?;
                CheckReport {
                    mode: "iip",
                    tolerance: tol,
                    pass: rep.pass,
                    checked: rep.pairs_checked,
                    worst: rep.worst.map(|f| iip_finding(&f, &tree)),
                    offenders: rep.offenders.iter().map(|f| iip_finding(f, &tree)).collect(),
                }
            }
        }
    };
    timings.mark("check");

    let pass = body.pass;
    let worst = body.worst.as_ref().map(|f| f.relative_violation);
    let mode = body.mode;
    let mut report = RunReport::new("check", inputs);
    report.check = Some(body);
    report.timings_ms = timings.finish();
    let json = report.to_json();
    match &args.report {
        Some(path) => write_file(path, &(json + "\n"))?,
        None => println!("{json}"),
    }

    if args.strict && !pass {
        let detail = worst
            .map(|w| format!(" (worst relative violation {w:.3e})"))
            .unwrap_or_default();
        return Err(CliError::CheckFailed(format!(
            "{mode} check failed{detail}"
        )));
    }
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let mut timings = Timings::start();
    let mut inputs = Vec::new();

    let doc = parse_newick(&load(&args.tree, &mut inputs)?)?;
    let lengths = doc.require_lengths()?;
    let tree = doc.tree;
    timings.mark("parse");

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let (data, model_tag, seqlen, sd) = match args.model {
        SimModel::GaussJc => {
            if args.seqlen < 1 {
                return Err(CliError::Input("--seqlen must be at least 1".into()));
            }
            let data = simulate_gauss_jc(&tree, &lengths, args.seqlen, &mut rng)?;
            (data, "gauss-jc", Some(args.seqlen), None)
        }
        SimModel::GaussConst => {
            let data = simulate_gauss_const(&tree, &lengths, args.sd, &mut rng)?;
            (data, "gauss-const", None, Some(args.sd))
        }
    };
    timings.mark("simulate");

    let labels: Vec<String> = tree.leaf_labels().map(String::from).collect();
    write_file(&args.out_dist, &write_phylip(&labels, &data.observed))?;
    write_file(&args.out_var, &write_phylip(&labels, &data.variance))?;

    let mut report = RunReport::new("simulate", inputs);
    report.simulate = Some(SimulateReport {
        model: model_tag,
        seed: args.seed,
        seqlen,
        sd,
        leaves: tree.leaf_count(),
        out_dist: args.out_dist.display().to_string(),
        out_var: args.out_var.display().to_string(),
    });
    report.timings_ms = timings.finish();
    let json = report.to_json();
    match &args.report {
        Some(path) => write_file(path, &(json + "\n"))?,
        None => println!("{json}"),
    }
    Ok(())
}
