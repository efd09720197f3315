//! One runner per subcommand. Each runner validates its flags, does the
//! work through the library, writes its artifacts and finishes with a
//! manifest recording parameter values and content digests.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::json;

use graphldp::ball::tree_to_ball;
use graphldp::diffusion::{girsanov_check, network_from_json, simulate};
use graphldp::discretization::{
    good_partition_empirical, good_partition_finite, lemma_bound, project_graph, schedule,
    TaggedPartition,
};
use graphldp::empirical::empirical_distribution;
use graphldp::ensembles::{sample_da, sample_er_marked, sample_uniform_marked, CountVectors};
use graphldp::entropy::{
    count_graphs, rate_da, rate_er, rate_uniform, seed_degree_matrix, seed_mark_marginal,
    truncated_entropy_jh, Seed,
};
use graphldp::graph::{graph_from_json, graph_to_json};
use graphldp::mark::MarkSpace;
use graphldp::oracle::{
    enumerate_marked_graphs, exact_event_probability, graph_key, ratio, sampler_g_test,
    verify_er_mixture, verify_mixture, verify_type_class, EnumerationDomain, ExactModel,
};
use graphldp::ugwt::{sample_pstar_tree, UgwtSampler};
use graphldp::{rng, GraphLdpError, MarkedGraph};

use crate::args::{
    DiffuseArgs, EmpiricalArgs, EntropyArgs, GenArgs, ModelKind, ProjectArgs, RateModel, UgwtArgs,
    VerifyArgs,
};
use crate::artifacts::{
    parse_preset, parse_seed_spec, read_counts, read_json, read_law, read_potentials,
    write_json, write_manifest, write_paths_bin, LawFile, MeasureAtom, MeasureDoc,
};

pub fn run_gen(args: &GenArgs) -> Result<()> {
    let law_file = match &args.marks {
        Some(p) => read_law(p)?,
        None => LawFile::trivial(),
    };
    let law = law_file.to_mark_law()?;
    let mut rng = rng::stream(args.seed, "gen");
    let g = match args.model {
        ModelKind::Er => {
            let d = args.d.context("the er model needs --d")?;
            sample_er_marked(args.n, d, &law, &mut rng)?
        }
        ModelKind::Uniform => {
            let m = args.m.context("the uniform model needs --m")?;
            sample_uniform_marked(args.n, m, &law, &mut rng)?
        }
        ModelKind::Da => {
            let path = args.counts.as_ref().context("the da model needs --counts")?;
            let cv = read_counts(path)?;
            if cv.n() != args.n {
                bail!("--n {} disagrees with the count vectors (n = {})", args.n, cv.n());
            }
            sample_da(&cv, &mut rng)?
        }
    };
    write_json(&args.out, &graph_to_json(&g))?;
    let mut inputs: Vec<&Path> = Vec::new();
    inputs.extend(args.marks.as_deref());
    inputs.extend(args.counts.as_deref());
    write_manifest(
        "gen",
        json!({
            "model": format!("{:?}", args.model).to_lowercase(),
            "n": args.n,
            "d": args.d,
            "m": args.m,
            "marks": args.marks.as_ref().map(|p| p.display().to_string()),
            "counts": args.counts.as_ref().map(|p| p.display().to_string()),
            "out": args.out.display().to_string(),
        }),
        Some(args.seed),
        &inputs,
        &[&args.out],
    )?;
    Ok(())
}

pub fn run_empirical(args: &EmpiricalArgs) -> Result<()> {
    let g = graph_from_json(&read_json(&args.input)?)?;
    let mu = empirical_distribution(&g, args.depth)?;
    let atoms = mu
        .iter()
        .map(|(code, count, _)| MeasureAtom {
            code: code.to_hex(),
            count,
            weight: format!("{}/{}", count, mu.total()),
            weight_float: count as f64 / mu.total() as f64,
        })
        .collect();
    let doc = MeasureDoc {
        depth: mu.depth(),
        total: mu.total(),
        atoms,
    };
    write_json(&args.out, &serde_json::to_value(&doc)?)?;
    write_manifest(
        "empirical",
        json!({
            "in": args.input.display().to_string(),
            "depth": args.depth,
            "out": args.out.display().to_string(),
        }),
        None,
        &[&args.input],
        &[&args.out],
    )?;
    Ok(())
}

/// Reference law for the uniform and er rates: a pstar seed supplies its
/// own parameters; an explicit seed needs --d and --marks.
fn reference_law(seed: &Seed, args: &EntropyArgs) -> Result<(f64, Vec<f64>, Vec<Vec<f64>>)> {
    if args.d.is_none() && args.marks.is_none() {
        if let Seed::PStar { nu, chi, d } = seed {
            return Ok((*d, nu.clone(), chi.clone()));
        }
    }
    let d = args
        .d
        .context("an explicit seed needs --d for the uniform and er rates")?;
    let law = read_law(
        args.marks
            .as_ref()
            .context("an explicit seed needs --marks for the uniform and er rates")?,
    )?;
    Ok((d, law.nu, law.chi))
}

pub fn run_entropy(args: &EntropyArgs) -> Result<()> {
    let seed = parse_seed_spec(&args.seed)?;
    let entropy = truncated_entropy_jh(&seed, args.depth)?;
    let (model_name, rate) = match args.model {
        None => (None, None),
        Some(RateModel::Da) => {
            let (d_mat, _) = seed_degree_matrix(&seed)?;
            let q = seed_mark_marginal(&seed)?;
            (Some("da"), Some(rate_da(&seed, args.depth, &d_mat, &q)?))
        }
        Some(RateModel::Uniform) => {
            let (d, nu, chi) = reference_law(&seed, args)?;
            (
                Some("uniform"),
                Some(rate_uniform(&seed, args.depth, d, &nu, &chi)?),
            )
        }
        Some(RateModel::Er) => {
            let (d, nu, chi) = reference_law(&seed, args)?;
            (Some("er"), Some(rate_er(&seed, args.depth, d, &nu, &chi)?))
        }
    };
    let report = json!({
        "seed": args.seed,
        "depth": args.depth,
        "entropy": entropy,
        "model": model_name,
        "rate": rate,
    });
    write_json(&args.out, &report)?;
    let mut inputs: Vec<&Path> = Vec::new();
    let seed_path = Path::new(&args.seed);
    if seed_path.exists() {
        inputs.push(seed_path);
    }
    inputs.extend(args.marks.as_deref());
    write_manifest(
        "entropy",
        json!({
            "seed": args.seed,
            "depth": args.depth,
            "model": model_name,
            "d": args.d,
            "marks": args.marks.as_ref().map(|p| p.display().to_string()),
            "out": args.out.display().to_string(),
        }),
        None,
        &inputs,
        &[&args.out],
    )?;
    Ok(())
}

pub fn run_ugwt(args: &UgwtArgs) -> Result<()> {
    let seed = parse_seed_spec(&args.seed)?;
    if let Some(h) = args.h {
        if h != seed.depth() {
            bail!("--h {} disagrees with the seed depth {}", h, seed.depth());
        }
    }
    let theta = MarkSpace::finite_discrete(seed.theta_size());
    let xi = MarkSpace::finite_discrete(seed.xi_size());
    let sampler = match &seed {
        Seed::Explicit(e) => Some(UgwtSampler::new(e)?),
        Seed::PStar { .. } => None,
    };
    let mut file =
        fs::File::create(&args.out).with_context(|| format!("create {}", args.out.display()))?;
    for i in 0..args.samples {
        let mut rng = rng::substream(args.seed_rng, "tree", i);
        let tree = match (&sampler, &seed) {
            (Some(s), _) => s.sample(args.cutoff, &mut rng)?.tree,
            (None, Seed::PStar { nu, chi, d }) => {
                sample_pstar_tree(nu, chi, *d, args.cutoff, &mut rng)?
            }
            _ => unreachable!(),
        };
        let ball = tree_to_ball(&tree, theta.clone(), xi.clone(), args.cutoff, false)?;
        let mut line = graph_to_json(&ball.graph);
        line["root"] = json!(0);
        writeln!(file, "{}", serde_json::to_string(&line)?)?;
    }
    file.flush()?;
    drop(file);
    let seed_path = Path::new(&args.seed);
    let inputs: Vec<&Path> = if seed_path.exists() { vec![seed_path] } else { vec![] };
    write_manifest(
        "ugwt",
        json!({
            "seed": args.seed,
            "h": args.h,
            "cutoff": args.cutoff,
            "samples": args.samples,
            "out": args.out.display().to_string(),
        }),
        Some(args.seed_rng),
        &inputs,
        &[&args.out],
    )?;
    Ok(())
}

/// Partition a mark space at resolution epsilon: finite alphabets split
/// into singletons, real marks get a grid over their observed range.
fn partition_for(space: &MarkSpace, values: Vec<f64>, epsilon: f64) -> Result<TaggedPartition> {
    if space.is_finite() {
        Ok(good_partition_finite(space, epsilon)?)
    } else {
        Ok(good_partition_empirical(&values, epsilon)?)
    }
}

pub fn run_project(args: &ProjectArgs) -> Result<()> {
    let g = graph_from_json(&read_json(&args.input)?)?;
    let (mut epsilon, mut delta) = match args.k {
        Some(k) => schedule(k)?,
        None => (f64::NAN, f64::NAN),
    };
    if let Some(e) = args.epsilon {
        epsilon = e;
    }
    if let Some(d) = args.delta {
        delta = d;
    }
    if !epsilon.is_finite() {
        bail!("need --epsilon or --k");
    }
    let vertex_values: Vec<f64> = (0..g.n() as u32)
        .filter_map(|v| g.tau(v).as_real().ok())
        .collect();
    let mut edge_values = Vec::with_capacity(2 * g.edge_count());
    for &(u, v) in g.edges() {
        for (a, b) in [(u, v), (v, u)] {
            if let Ok(x) = g.xi(a, b).and_then(|m| m.as_real()) {
                edge_values.push(x);
            }
        }
    }
    let a = partition_for(g.theta_space(), vertex_values, epsilon)?;
    let b = partition_for(g.xi_space(), edge_values, epsilon)?;
    let projected = project_graph(&g, &a, &b)?;
    let bound = lemma_bound(&g, &a, &b, args.h, args.cap)?;
    write_json(&args.out, &graph_to_json(&projected))?;
    write_json(
        &args.report,
        &json!({
            "epsilon": epsilon,
            "delta": if delta.is_finite() { Some(delta) } else { None },
            "k": args.k,
            "h": args.h,
            "cap": args.cap,
            "vertex_cells": a.cell_count(),
            "edge_cells": b.cell_count(),
            "bound": bound,
        }),
    )?;
    write_manifest(
        "project",
        json!({
            "in": args.input.display().to_string(),
            "epsilon": epsilon,
            "delta": args.delta,
            "k": args.k,
            "h": args.h,
            "cap": args.cap,
            "out": args.out.display().to_string(),
            "report": args.report.display().to_string(),
        }),
        None,
        &[&args.input],
        &[&args.out, &args.report],
    )?;
    Ok(())
}

pub fn run_diffuse(args: &DiffuseArgs) -> Result<()> {
    let pot = match (&args.preset, &args.potentials) {
        (Some(name), None) => parse_preset(name)?,
        (None, Some(path)) => read_potentials(path)?,
        (None, None) => bail!("need --preset or --potentials"),
        (Some(_), Some(_)) => bail!("--preset and --potentials are mutually exclusive"),
    };
    if !(args.sigma > 0.0) {
        bail!("--sigma must be positive (the tilt divides by it)");
    }
    let net = network_from_json(&read_json(&args.net)?)?;
    let mut path_rng = rng::stream(args.seed, "path");
    let (bundle, _) = simulate(&net, &pot, args.sigma, args.t_final, args.dt, &mut path_rng)?;
    write_paths_bin(&args.out, &bundle)?;

    let mut tilt_rng = rng::stream(args.seed, "tilt");
    let (mean, ci99) = girsanov_check(
        &net,
        &pot,
        args.sigma,
        args.t_final,
        args.dt,
        args.samples,
        &mut tilt_rng,
    )?;
    let report_path = args.out.with_extension("tilt.json");
    write_json(
        &report_path,
        &json!({
            "n": net.n(),
            "sigma": args.sigma,
            "T": args.t_final,
            "dt": args.dt,
            "samples": args.samples,
            "weight_mean": mean,
            "weight_ci99": ci99,
            "unit_mass_within_ci": (mean - 1.0).abs() <= ci99,
        }),
    )?;
    write_manifest(
        "diffuse",
        json!({
            "net": args.net.display().to_string(),
            "preset": args.preset,
            "potentials": args.potentials.as_ref().map(|p| p.display().to_string()),
            "T": args.t_final,
            "dt": args.dt,
            "sigma": args.sigma,
            "samples": args.samples,
            "out": args.out.display().to_string(),
        }),
        Some(args.seed),
        &[&args.net],
        &[&args.out, &report_path],
    )?;
    Ok(())
}

struct Check {
    name: &'static str,
    value: String,
    pass: bool,
}

fn push(checks: &mut Vec<Check>, name: &'static str, value: String, pass: bool) {
    checks.push(Check { name, value, pass });
}

fn count_check(checks: &mut Vec<Check>) -> Result<()> {
    // Hand-counted cardinalities.
    let mut dom = EnumerationDomain::new(3, 1, 1)?.with_edge_total(2)?;
    let mut got = enumerate_marked_graphs(&dom, |_| Ok(()))?;
    push(checks, "enumeration: n=3, two edges, trivial marks", got.to_string(), got == 3);
    dom = EnumerationDomain::new(3, 1, 1)?;
    got = enumerate_marked_graphs(&dom, |_| Ok(()))?;
    push(checks, "enumeration: n=3, all skeletons, trivial marks", got.to_string(), got == 8);
    let cv = CountVectors::new(vec![2, 1], [((0, 0), 2u64)].into_iter().collect(), 1)?;
    dom = EnumerationDomain::new(3, 2, 1)?.with_counts(cv)?;
    got = enumerate_marked_graphs(&dom, |_| Ok(()))?;
    push(checks, "enumeration: n=3, vertex counts (2,1), two edges", got.to_string(), got == 9);

    // Closed-form class counts against enumeration, full matrix n <= 4.
    let mut classes = 0u64;
    let mut mismatches = 0u64;
    for n in 1..=4 {
        for theta in 1..=2 {
            for xi in 1..=2 {
                let dom = EnumerationDomain::new(n, theta, xi)?;
                let mut buckets: BTreeMap<Vec<u8>, (CountVectors, u64)> = BTreeMap::new();
                enumerate_marked_graphs(&dom, |g| {
                    let cv = CountVectors::of_graph(g)?;
                    let key = serde_json::to_vec(&cv).map_err(|e| {
                        GraphLdpError::numeric(format!("count-vector key: {e}"))
                    })?;
                    buckets.entry(key).or_insert((cv, 0)).1 += 1;
                    Ok(())
                })?;
                for (cv, seen) in buckets.values() {
                    classes += 1;
                    if count_graphs(cv) != (*seen).into() {
                        mismatches += 1;
                    }
                }
            }
        }
    }
    push(
        checks,
        "class counts equal enumeration (n <= 4, all small alphabets)",
        format!("{mismatches} mismatches over {classes} classes"),
        mismatches == 0,
    );
    Ok(())
}

fn mixture_check(checks: &mut Vec<Check>) -> Result<()> {
    let nu = vec![ratio(1, 3), ratio(2, 3)];
    let chi1 = vec![vec![ratio(1, 1)]];
    for m in 1..=3u64 {
        let dom = EnumerationDomain::new(3, 2, 1)?.with_edge_total(m)?;
        let worst = verify_mixture(&dom, &nu, &chi1)?;
        push(
            checks,
            match m {
                1 => "uniform mixture identity (n=3, one edge)",
                2 => "uniform mixture identity (n=3, two edges)",
                _ => "uniform mixture identity (n=3, three edges)",
            },
            worst.to_string(),
            worst == ratio(0, 1),
        );
    }
    let chi2 = vec![
        vec![ratio(1, 10), ratio(3, 10)],
        vec![ratio(1, 2), ratio(1, 10)],
    ];
    let dom = EnumerationDomain::new(3, 2, 2)?.with_edge_total(2)?;
    let worst = verify_mixture(&dom, &nu, &chi2)?;
    push(
        checks,
        "uniform mixture identity (n=3, two edge marks)",
        worst.to_string(),
        worst == ratio(0, 1),
    );

    let dom = EnumerationDomain::new(3, 2, 1)?;
    let worst = verify_er_mixture(&dom, &nu, &chi1, &ratio(3, 2))?;
    push(
        checks,
        "binomial edge-count mixture identity (n=3, d=3/2)",
        worst.to_string(),
        worst == ratio(0, 1),
    );
    Ok(())
}

fn probability_check(checks: &mut Vec<Check>) -> Result<()> {
    let dom = EnumerationDomain::new(3, 1, 1)?;
    let er = ExactModel::ErIid {
        d: ratio(3, 2),
        nu: vec![ratio(1, 1)],
        chi: vec![vec![ratio(1, 1)]],
    };
    let p = exact_event_probability(&dom, &er, |g| g.edge_count() == 3)?;
    push(
        checks,
        "triangle probability at n=3, d=3/2 equals 1/8",
        p.to_string(),
        p == ratio(1, 8),
    );
    let total = exact_event_probability(&dom, &er, |_| true)?;
    push(
        checks,
        "total probability mass equals 1",
        total.to_string(),
        total == ratio(1, 1),
    );

    for (n, nu, name) in [
        (2, vec![ratio(1, 2), ratio(1, 2)], "exchangeable type classes (n=2, uniform law)"),
        (3, vec![ratio(1, 2), ratio(1, 2)], "exchangeable type classes (n=3, uniform law)"),
        (4, vec![ratio(1, 6), ratio(1, 3), ratio(1, 2)], "exchangeable type classes (n=4, skewed law)"),
    ] {
        let ok = verify_type_class(n, &nu)?;
        push(checks, name, ok.to_string(), ok);
    }
    Ok(())
}

fn frequency_check(checks: &mut Vec<Check>, draws: usize) -> Result<()> {
    use graphldp::mark::{EdgePairLaw, MarkLaw, VertexLaw};

    let keys = |mut draw: Box<dyn FnMut() -> Result<MarkedGraph>>| -> Result<Vec<Vec<u16>>> {
        (0..draws).map(|_| Ok(graph_key(&draw()?)?)).collect()
    };

    let dom = EnumerationDomain::new(3, 2, 1)?.with_edge_total(2)?;
    let model = ExactModel::UniformIid {
        edge_total: 2,
        nu: vec![ratio(1, 4), ratio(3, 4)],
        chi: vec![vec![ratio(1, 1)]],
    };
    let law = MarkLaw {
        nu: VertexLaw::Finite(vec![0.25, 0.75]),
        chi: EdgePairLaw::Finite(vec![vec![1.0]]),
    };
    let mut r = rng::stream(7, "verify-uniform");
    let drawn = keys(Box::new(move || Ok(sample_uniform_marked(3, 2, &law, &mut r)?)))?;
    let rep = sampler_g_test(&dom, &model, &drawn)?;
    push(
        checks,
        "uniform sampler frequencies match exact probabilities",
        format!("p = {:.6}", rep.p_value),
        rep.p_value > 1e-3,
    );

    let dom = EnumerationDomain::new(3, 1, 2)?;
    let model = ExactModel::ErIid {
        d: ratio(3, 2),
        nu: vec![ratio(1, 1)],
        chi: vec![
            vec![ratio(3, 10), ratio(1, 2)],
            vec![ratio(1, 10), ratio(1, 10)],
        ],
    };
    let law = MarkLaw {
        nu: VertexLaw::Finite(vec![1.0]),
        chi: EdgePairLaw::Finite(vec![vec![0.3, 0.5], vec![0.1, 0.1]]),
    };
    let mut r = rng::stream(7, "verify-er");
    let drawn = keys(Box::new(move || Ok(sample_er_marked(3, 1.5, &law, &mut r)?)))?;
    let rep = sampler_g_test(&dom, &model, &drawn)?;
    push(
        checks,
        "binomial sampler frequencies match exact probabilities",
        format!("p = {:.6}", rep.p_value),
        rep.p_value > 1e-3,
    );

    let cv = CountVectors::new(vec![2, 1], [((0, 0), 2u64)].into_iter().collect(), 1)?;
    let dom = EnumerationDomain::new(3, 2, 1)?.with_counts(cv.clone())?;
    let model = ExactModel::Da { counts: cv.clone() };
    let mut r = rng::stream(7, "verify-da");
    let drawn = keys(Box::new(move || Ok(sample_da(&cv, &mut r)?)))?;
    let rep = sampler_g_test(&dom, &model, &drawn)?;
    push(
        checks,
        "conditioned sampler frequencies match exact probabilities",
        format!("p = {:.6}", rep.p_value),
        rep.p_value > 1e-3,
    );
    Ok(())
}

pub fn run_verify(args: &VerifyArgs) -> Result<()> {
    let mut checks = Vec::new();
    count_check(&mut checks)?;
    mixture_check(&mut checks)?;
    probability_check(&mut checks)?;
    frequency_check(&mut checks, args.draws)?;

    let all_pass = checks.iter().all(|c| c.pass);
    let report = json!({
        "draws_per_frequency_test": args.draws,
        "checks": checks
            .iter()
            .map(|c| json!({"name": c.name, "value": c.value, "pass": c.pass}))
            .collect::<Vec<_>>(),
        "all_pass": all_pass,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(out) = &args.out {
        write_json(out, &report)?;
        write_manifest(
            "verify",
            json!({"draws": args.draws, "out": out.display().to_string()}),
            None,
            &[],
            &[out],
        )?;
    }
    if !all_pass {
        let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
        return Err(GraphLdpError::certification(format!(
            "identity checks failed: {}",
            failed.join("; ")
        ))
        .into());
    }
    Ok(())
}
