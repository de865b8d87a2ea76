//! Subcommand implementations. Progress goes to standard error; all
//! machine-readable output goes to files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use multiness::baseline::{svt_impute, SvtPenalty};
use multiness::refit::fit_plus;
use multiness::simulate::{gen_correlated, gen_gaussian, gen_logistic};
use multiness::solver::fit as solver_fit;
use multiness::tuning::{adaptive_params, edge_cv, CvCandidates};
use multiness::{MultiplexNetwork, SolverConfig, SymMatrix};

use crate::cli::{
    CrossvalArgs, EmbedArgs, FamilyArg, FitArgs, ImputeArgs, LambdaArg, ReportArgs, SimulateArgs,
};
use crate::error::CliError;
use crate::io::{self, RanksReport, RunReport, Timings, Versions};

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Validation(format!("cannot create {}: {e}", dir.display())))
}

/// Parses a comma-separated list of numbers, reporting under the flag name.
fn parse_list(list: &str, flag: &str) -> Result<Vec<f64>, CliError> {
    let vals: Result<Vec<f64>, _> = list
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect();
    match vals {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(CliError::Validation(format!(
            "{flag}: '{list}' is not a comma-separated list of numbers"
        ))),
    }
}

/// Reads the input network, optionally applying `log(1+w)` elementwise.
fn load_network(path: &Path, log1p: bool) -> Result<MultiplexNetwork, CliError> {
    let net = io::read_multiplex(path)?;
    if !log1p {
        return Ok(net);
    }
    let n = net.n();
    let mut layers = Vec::with_capacity(net.m());
    for k in 0..net.m() {
        let a = net.layer(k);
        for i in 0..n {
            for j in i..n {
                if a[(i, j)] <= -1.0 {
                    return Err(CliError::Validation(format!(
                        "--log1p needs every weight > -1, found {} at layer {} pair ({},{})",
                        a[(i, j)],
                        k + 1,
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        layers.push(SymMatrix::from_fn(n, |i, j| a[(i, j)].ln_1p()));
    }
    MultiplexNetwork::with_mask(layers, net.mask().clone(), net.self_loops())
        .map_err(CliError::from)
}

pub fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    if a.family == FamilyArg::Bernoulli && a.rho.is_some() {
        return Err(CliError::Validation(
            "--rho applies only to --family gaussian".into(),
        ));
    }
    let (net, truth) = match (a.family, a.rho) {
        (FamilyArg::Gaussian, Some(rho)) => {
            gen_correlated(a.n, a.m, a.d1, a.d2, a.sigma, rho, a.seed)?
        }
        (FamilyArg::Gaussian, None) => gen_gaussian(a.n, a.m, a.d1, a.d2, a.sigma, a.seed)?,
        (FamilyArg::Bernoulli, _) => gen_logistic(a.n, a.m, a.d1, a.d2, a.beta, a.seed)?,
    };
    io::write_multiplex(&a.out, &net)?;
    eprintln!(
        "simulate: wrote {} ({} nodes, {} layers, family {}, seed {})",
        a.out.display(),
        a.n,
        a.m,
        a.family.name(),
        a.seed
    );
    if let Some(dir) = &a.truth_dir {
        create_dir(dir)?;
        io::write_matrix(&dir.join("F.mat"), &truth.f)?;
        for (k, g) in truth.gs.iter().enumerate() {
            io::write_matrix(&dir.join(format!("G_{}.mat", k + 1)), g)?;
        }
        eprintln!("simulate: wrote true components to {}", dir.display());
    }
    Ok(())
}

/// Resolves `--lambda/--delta/--layerwise/--alphas` into concrete penalty
/// parameters plus the sharpness to record (`None` for explicit levels).
fn resolve_penalty(
    net: &MultiplexNetwork,
    a: &FitArgs,
) -> Result<(f64, Vec<f64>, Option<f64>), CliError> {
    let m = net.m() as f64;
    let (lambda, mut alphas, delta) = match a.lambda {
        LambdaArg::Auto => {
            let sel = adaptive_params(net, a.delta, a.layerwise)?;
            for w in &sel.warnings {
                eprintln!("warning: {w}");
            }
            (sel.lambda, sel.alphas, Some(a.delta))
        }
        LambdaArg::Value(l) => {
            if !(l >= 0.0) {
                return Err(CliError::Validation(format!(
                    "--lambda must be nonnegative, got {l}"
                )));
            }
            (l, vec![1.0 / m.sqrt(); net.m()], None)
        }
    };
    if let Some(list) = &a.alphas {
        let v = parse_list(list, "--alphas")?;
        if v.len() != net.m() {
            return Err(CliError::Validation(format!(
                "--alphas: got {} values for {} layers",
                v.len(),
                net.m()
            )));
        }
        alphas = v;
    }
    Ok((lambda, alphas, delta))
}

fn solver_config(lambda: f64, alphas: Vec<f64>, a: &FitArgs) -> SolverConfig {
    let mut cfg = SolverConfig::new(lambda, alphas);
    cfg.eta = a.eta;
    cfg.max_iter = a.max_iters;
    cfg.rel_tol = a.tol;
    cfg.psd_constrain = a.psd;
    cfg.svd_budget = a.svd_budget;
    cfg.d1_init = a.d1_init;
    cfg
}

pub fn fit(a: &FitArgs) -> Result<(), CliError> {
    let total = Instant::now();
    let net = load_network(&a.input, a.log1p)?;
    eprintln!(
        "fit: {} nodes, {} layers, family {}",
        net.n(),
        net.m(),
        a.family.name()
    );
    let (lambda, alphas, delta) = resolve_penalty(&net, a)?;
    match delta {
        Some(d) => eprintln!("fit: lambda {lambda:.6e} (auto, delta {d})"),
        None => eprintln!("fit: lambda {lambda:.6e}"),
    }
    let cfg = solver_config(lambda, alphas.clone(), a);
    let fam = a.family.family();
    let (dec, rep) = if a.refit {
        fit_plus(&fam, &net, &cfg)?
    } else {
        solver_fit(&fam, &net, &cfg)?
    };
    eprintln!(
        "fit: {} sweeps, converged {}, ranks ({}, {:?})",
        rep.iterations, rep.converged, rep.final_ranks.0, rep.final_ranks.1
    );
    if let Some(refit) = &rep.refit {
        if refit.fell_back {
            eprintln!("warning: eigenvalue refit fell back to the penalized values");
        }
        for w in &refit.warnings {
            eprintln!("warning: {w}");
        }
    }
    let report = RunReport {
        family: a.family.name().into(),
        lambda,
        alphas,
        delta,
        ranks: RanksReport {
            d1: rep.final_ranks.0,
            d2: rep.final_ranks.1.clone(),
        },
        objective_trace: rep.objective_trace.clone(),
        converged: rep.converged,
        iterations: rep.iterations,
        seed: a.seed,
        versions: Versions::default(),
        timings: (!a.no_timing).then(|| Timings {
            fit_seconds: rep.wall_time.as_secs_f64(),
            total_seconds: total.elapsed().as_secs_f64(),
        }),
    };
    io::write_decomposition(&a.out, &dec, &report)?;
    eprintln!("fit: wrote {}", a.out.display());
    Ok(())
}

pub fn crossval(a: &CrossvalArgs) -> Result<(), CliError> {
    let total = Instant::now();
    let net = load_network(&a.input, a.log1p)?;
    let fam = a.family.family();
    let cands = match (&a.deltas, &a.lambdas, &a.constants) {
        (Some(s), None, None) => CvCandidates::Deltas {
            values: parse_list(s, "--deltas")?,
            layerwise: a.layerwise,
        },
        (None, Some(s), None) => CvCandidates::Lambdas(parse_list(s, "--lambdas")?),
        (None, None, Some(s)) => CvCandidates::Constants(parse_list(s, "--constants")?),
        (None, None, None) => CvCandidates::Deltas {
            values: vec![0.1, 0.309, 0.5, 1.0],
            layerwise: a.layerwise,
        },
        _ => unreachable!("flag conflicts are enforced by the parser"),
    };
    eprintln!(
        "crossval: {} folds, holdout {}, seed {}",
        a.folds, a.holdout, a.seed
    );
    let (sel, cv) = edge_cv(&fam, &net, &cands, a.holdout, a.folds, a.seed)?;
    for w in sel.warnings.iter().chain(cv.warnings.iter()) {
        eprintln!("warning: {w}");
    }
    eprintln!("crossval: selected lambda {:.6e}", sel.lambda);

    create_dir(&a.out)?;
    let mut csv = String::from("candidate,lambda,mean_score\n");
    for (c, (l, s)) in cv
        .candidate_lambdas
        .iter()
        .zip(cv.mean_scores.iter())
        .enumerate()
    {
        let _ = writeln!(csv, "{},{},{}", c + 1, io::fmt_float(*l), io::fmt_float(*s));
    }
    fs::write(a.out.join("cv.csv"), csv)
        .map_err(|e| CliError::Validation(format!("cannot write cv.csv: {e}")))?;

    let mut cfg = SolverConfig::new(sel.lambda, sel.alphas.clone());
    cfg.psd_constrain = a.psd;
    let (dec, rep) = if a.refit {
        fit_plus(&fam, &net, &cfg)?
    } else {
        solver_fit(&fam, &net, &cfg)?
    };
    eprintln!(
        "crossval: final fit {} sweeps, converged {}, ranks ({}, {:?})",
        rep.iterations, rep.converged, rep.final_ranks.0, rep.final_ranks.1
    );
    let report = RunReport {
        family: a.family.name().into(),
        lambda: sel.lambda,
        alphas: sel.alphas.clone(),
        delta: (!sel.delta.is_nan()).then_some(sel.delta),
        ranks: RanksReport {
            d1: rep.final_ranks.0,
            d2: rep.final_ranks.1.clone(),
        },
        objective_trace: rep.objective_trace.clone(),
        converged: rep.converged,
        iterations: rep.iterations,
        seed: a.seed,
        versions: Versions::default(),
        timings: (!a.no_timing).then(|| Timings {
            fit_seconds: rep.wall_time.as_secs_f64(),
            total_seconds: total.elapsed().as_secs_f64(),
        }),
    };
    io::write_decomposition(&a.out, &dec, &report)?;
    eprintln!("crossval: wrote {}", a.out.display());
    Ok(())
}

pub fn embed(a: &EmbedArgs) -> Result<(), CliError> {
    let dec = io::read_decomposition(&a.input)?;
    create_dir(&a.out)?;
    io::write_positions(&a.out.join("V.csv"), dec.common())?;
    for (k, g) in dec.individuals().iter().enumerate() {
        io::write_positions(&a.out.join(format!("U_{}.csv", k + 1)), g)?;
    }
    eprintln!(
        "embed: wrote {} position tables to {}",
        dec.m() + 1,
        a.out.display()
    );
    Ok(())
}

pub fn impute(a: &ImputeArgs) -> Result<(), CliError> {
    let net = load_network(&a.input, a.log1p)?;
    if a.layer < 1 || a.layer > net.m() {
        return Err(CliError::Validation(format!(
            "--layer {} out of range 1..={}",
            a.layer,
            net.m()
        )));
    }
    let k = a.layer - 1;
    let penalty = match (a.rank, a.lambda) {
        (Some(r), _) => SvtPenalty::Rank(r),
        (None, LambdaArg::Auto) => SvtPenalty::Auto,
        (None, LambdaArg::Value(l)) => SvtPenalty::Lambda(l),
    };
    let (z, rep) = svt_impute(net.layer(k), net.mask(), k, &penalty)?;
    for w in &rep.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!(
        "impute: layer {} at level {:.6e}, {} iterations, converged {}",
        a.layer, rep.lambda, rep.iterations, rep.converged
    );
    io::write_matrix(&a.out, &z)?;
    eprintln!("impute: wrote {}", a.out.display());
    Ok(())
}

pub fn report(a: &ReportArgs) -> Result<(), CliError> {
    let run = io::read_report(&a.input.join("report.json"))?;
    let dec = io::read_decomposition(&a.input)?;
    if run.ranks.d2.len() != dec.m() {
        return Err(CliError::Validation(format!(
            "{}: report lists {} layers but {} G matrices are present",
            a.input.display(),
            run.ranks.d2.len(),
            dec.m()
        )));
    }
    create_dir(&a.out)?;

    let mut trace = String::from("iteration,objective\n");
    for (t, obj) in run.objective_trace.iter().enumerate() {
        let _ = writeln!(trace, "{t},{}", io::fmt_float(*obj));
    }
    let mut ranks = String::from("component,rank\n");
    let _ = writeln!(ranks, "common,{}", run.ranks.d1);
    for (k, d) in run.ranks.d2.iter().enumerate() {
        let _ = writeln!(ranks, "layer_{},{}", k + 1, d);
    }
    let mut spectra = String::from("component,index,eigenvalue\n");
    for (t, g) in dec.common().eigen().values().iter().enumerate() {
        let _ = writeln!(spectra, "common,{},{}", t + 1, io::fmt_float(*g));
    }
    for (k, low) in dec.individuals().iter().enumerate() {
        for (t, g) in low.eigen().values().iter().enumerate() {
            let _ = writeln!(spectra, "layer_{},{},{}", k + 1, t + 1, io::fmt_float(*g));
        }
    }
    for (name, content) in [
        ("trace.csv", trace),
        ("ranks.csv", ranks),
        ("spectra.csv", spectra),
    ] {
        fs::write(a.out.join(name), content)
            .map_err(|e| CliError::Validation(format!("cannot write {name}: {e}")))?;
    }
    eprintln!("report: wrote tables to {}", a.out.display());
    Ok(())
}
