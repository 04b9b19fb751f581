//! Batch front door: parse a JSON config, dispatch to the library modules,
//! and emit deterministic JSON (and optional CSV) reports.
//!
//! One run per invocation: `kernel-embed <command> --config <path>
//! [--out <path>] [--csv <path>]`. The whole run configuration lives in the
//! config document and is echoed into the report, making reports
//! self-describing archival artifacts. Exit codes: 0 success, 2 config
//! validation failure, 3 numeric failure, 4 not-enumerable or annotation
//! conflict.

use crate::diagnostics::{
    compactness_evidence, grid_ladder, truncation_ladder, EvidenceConfig, RefinementLadder,
};
use crate::error::{Error, Result};
use crate::expr::SeqExpr;
use crate::ivar::{
    enumerate_by_criterion, kgamma_eval, tensor_spectrum_topn, thm2_verdict, CriterionVerdictKind,
    GammaAnnotations, IvarModel, WeightSchema,
};
use crate::kernel::{gram, make_kernel, psd_min_eig, Kernel, SubsetU};
use crate::measure::{uniform_grid_measure, DiscreteMeasure, DomainTag, Point};
use crate::operator::{spectrum, EmbeddingModel};
use crate::report;
use crate::seqspace::{self, Annotations, SequencePair, SeriesAnnotation, Verdict};
use clap::Parser;
use serde_json::{json, Value};
use std::path::PathBuf;

pub const COMMANDS: [&str; 7] = [
    "gram",
    "spectrum",
    "diagnose",
    "seq-example",
    "ivar-verdict",
    "ivar-spectrum",
    "kgamma",
];

/// Maximum atom count for a full Gram matrix dump.
const GRAM_DUMP_CAP: usize = 128;

#[derive(Debug, Parser)]
#[command(
    name = "kernel-embed",
    about = "Compactness diagnostics for kernel-space embeddings into L2",
    version
)]
pub struct Cli {
    /// One of: gram, spectrum, diagnose, seq-example, ivar-verdict,
    /// ivar-spectrum, kgamma
    pub command: String,
    /// JSON config document driving the run
    #[arg(long)]
    pub config: PathBuf,
    /// JSON report path (default: report.json, or `output.json` in the config)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional CSV table path (overrides `output.csv` in the config)
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Full run: parse, execute, write artifacts. Returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match try_run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("kernel-embed: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::Config(_) | Error::Io(_) => 2,
        Error::NumericFailure(_) | Error::ResourceLimit(_) => 3,
        Error::NotEnumerable(_) | Error::AnnotationConflict(_) => 4,
    }
}

fn try_run(cli: &Cli) -> Result<()> {
    if !COMMANDS.contains(&cli.command.as_str()) {
        return Err(Error::Config(format!(
            "unknown command `{}`; expected one of {:?}",
            cli.command, COMMANDS
        )));
    }
    let raw = std::fs::read_to_string(&cli.config)?;
    let config: Value = serde_json::from_str(&raw)
        .map_err(|e| Error::Config(format!("config is not valid JSON: {e}")))?;
    if let Some(c) = config.get("command").and_then(|v| v.as_str()) {
        if c != cli.command {
            return Err(Error::Config(format!(
                "field `command`: config says `{c}` but the command line says `{}`",
                cli.command
            )));
        }
    }

    let (output, csv_data) = execute(&cli.command, &config)?;
    let report_doc = json!({
        "command": cli.command,
        "config": config,
        "output": output,
        "tool": {
            "name": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
        },
    });
    let bytes = report::to_canonical_json(&report_doc)?;

    let out_path = cli
        .out
        .clone()
        .or_else(|| path_from_config(&config, "json"))
        .unwrap_or_else(|| PathBuf::from("report.json"));
    report::write_atomic(&out_path, &bytes)?;

    let csv_path = cli.csv.clone().or_else(|| path_from_config(&config, "csv"));
    match (csv_path, csv_data) {
        (Some(p), Some(data)) => report::write_atomic(&p, data.as_bytes())?,
        (Some(_), None) => {
            return Err(Error::Config(format!(
                "field `output.csv`: command `{}` produces no CSV table",
                cli.command
            )))
        }
        _ => {}
    }
    Ok(())
}

fn path_from_config(config: &Value, key: &str) -> Option<PathBuf> {
    config
        .get("output")
        .and_then(|o| o.get(key))
        .and_then(|v| v.as_str())
        .map(PathBuf::from)
}

/// Dispatch a validated config; returns the `output` JSON section and the
/// optional CSV table.
pub fn execute(command: &str, config: &Value) -> Result<(Value, Option<String>)> {
    match command {
        "gram" => cmd_gram(config),
        "spectrum" => cmd_spectrum(config),
        "diagnose" => cmd_diagnose(config),
        "seq-example" => cmd_seq_example(config),
        "ivar-verdict" => cmd_ivar_verdict(config),
        "ivar-spectrum" => cmd_ivar_spectrum(config),
        "kgamma" => cmd_kgamma(config),
        other => Err(Error::Config(format!("unknown command `{other}`"))),
    }
}

// ---------------------------------------------------------------- commands

fn cmd_gram(config: &Value) -> Result<(Value, Option<String>)> {
    let kernel = parse_kernel(config)?;
    let measure = parse_measure(config, &kernel)?;
    if measure.len() > GRAM_DUMP_CAP {
        return Err(Error::Config(format!(
            "field `measure`: gram dumps are capped at {GRAM_DUMP_CAP} atoms, got {}",
            measure.len()
        )));
    }
    let g = gram(&kernel, measure.atoms())?;
    let min_eig = psd_min_eig(&g)?;
    let rows: Vec<Vec<f64>> = (0..g.nrows())
        .map(|i| (0..g.ncols()).map(|j| g[(i, j)]).collect())
        .collect();
    let out = json!({
        "atoms_count": measure.len(),
        "gram": rows,
        "kernel": kernel.name(),
        "min_eigenvalue": min_eig,
    });
    Ok((out, None))
}

fn cmd_spectrum(config: &Value) -> Result<(Value, Option<String>)> {
    let kernel = parse_kernel(config)?;
    let measure = parse_measure(config, &kernel)?;
    let tun = Tunables::parse(config)?;
    let model = EmbeddingModel::new(kernel, measure)?;
    let n = tun.top_n.min(model.len());
    let rep = spectrum(&model, n)?;
    let csv = report::csv_spectrum(&rep.singular_values);
    let out = serde_json::to_value(&rep).map_err(|e| Error::Config(e.to_string()))?;
    Ok((out, Some(csv)))
}

fn cmd_diagnose(config: &Value) -> Result<(Value, Option<String>)> {
    let kernel = parse_kernel(config)?;
    let tun = Tunables::parse(config)?;
    let ladder = parse_ladder(config, kernel, &tun)?;
    let cfg = EvidenceConfig {
        stabilization_threshold: tun.stabilization_threshold,
        ..EvidenceConfig::default()
    };
    let ev = compactness_evidence(&ladder, tun.top_n, &cfg)?;
    let csv = report::csv_sigma_table(&ev.levels, &ev.sigma_table);
    let mut out = serde_json::to_value(&ev).map_err(|e| Error::Config(e.to_string()))?;
    // evidence-grade by construction, never certified
    out["certified"] = json!(false);
    Ok((out, Some(csv)))
}

fn cmd_seq_example(config: &Value) -> Result<(Value, Option<String>)> {
    let pair = parse_pair(config)?;
    let tun = Tunables::parse(config)?;
    let v = seqspace::verdicts(&pair, tun.horizon)?;
    let out = json!({
        "horizon": tun.horizon,
        "mu": pair.mu_label,
        "nu": pair.nu_label,
        "verdicts": {
            "bounded": verdict_json(&v.bounded),
            "compact": verdict_json(&v.compact),
            "hilbert_schmidt": verdict_json(&v.hilbert_schmidt),
            "kernel_in_l2": verdict_json(&v.kernel_in_l2),
        },
    });
    Ok((out, None))
}

fn cmd_ivar_verdict(config: &Value) -> Result<(Value, Option<String>)> {
    let tun = Tunables::parse(config)?;
    let model = parse_ivar_model(config)?;
    let verdict = thm2_verdict(&model)?;
    let (table, note) = match enumerate_by_criterion(&model, tun.top_n) {
        Ok(rows) => (Some(rows), None),
        Err(e @ (Error::NotEnumerable(_) | Error::AnnotationConflict(_)))
            if verdict.kind != CriterionVerdictKind::CompactCertified =>
        {
            (None, Some(e.to_string()))
        }
        Err(e) => return Err(e),
    };
    let csv = table.as_deref().map(report::csv_subsets);
    let table_json = table.map(|rows| {
        rows.iter()
            .enumerate()
            .map(|(i, (u, v))| {
                json!({"rank": i + 1, "subset": u.to_string(), "value": v})
            })
            .collect::<Vec<_>>()
    });
    let out = json!({
        "certified": verdict.kind != CriterionVerdictKind::Inconclusive,
        "embedding_norm": model.embedding_norm(),
        "embedding_norm_level": model.embedding_norm_level(),
        "enumeration": table_json,
        "enumeration_note": note,
        "verdict": verdict,
    });
    Ok((out, csv))
}

fn cmd_ivar_spectrum(config: &Value) -> Result<(Value, Option<String>)> {
    let tun = Tunables::parse(config)?;
    let model = parse_ivar_model(config)?;
    let uni = model.univariate();
    let rep = spectrum(uni, tun.eigen_count.min(uni.len()))?;
    let eigs: Vec<f64> = rep
        .singular_values
        .iter()
        .map(|s| s * s)
        .filter(|&l| l > 0.0)
        .collect();
    if eigs.is_empty() {
        return Err(Error::NumericFailure(
            "univariate model has no positive eigenvalues".into(),
        ));
    }
    let values = tensor_spectrum_topn(&model, &eigs, tun.top_n, tun.assume_l2_orthogonal)?;
    let csv = report::csv_values(&values);
    let out = json!({
        "assume_l2_orthogonal": tun.assume_l2_orthogonal,
        "tensor_eigenvalues": values,
        "univariate_eigenvalues": eigs,
    });
    Ok((out, Some(csv)))
}

fn cmd_kgamma(config: &Value) -> Result<(Value, Option<String>)> {
    let model = parse_ivar_model(config)?;
    let points = config
        .get("points")
        .ok_or_else(|| Error::Config("missing field `points` for kgamma".into()))?;
    let domain = model.univariate().kernel().domain();
    let x = parse_point_list(points, "x", &domain)?;
    let y = parse_point_list(points, "y", &domain)?;
    let j = points
        .get("truncation")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Config("field `points.truncation` must be a positive integer".into()))?
        as usize;
    let diag_tail_bound = points.get("diag_tail_bound").and_then(|v| v.as_f64());
    let kv = kgamma_eval(&model, &x, &y, j, diag_tail_bound)?;
    let out = json!({
        "tail_bound": kv.tail_bound,
        "truncation": j,
        "value": kv.value,
    });
    Ok((out, None))
}

// ----------------------------------------------------------------- parsing

#[derive(Debug, Clone)]
struct Tunables {
    top_n: usize,
    horizon: usize,
    levels: Vec<usize>,
    stabilization_threshold: f64,
    eigen_count: usize,
    assume_l2_orthogonal: bool,
}

impl Tunables {
    fn parse(config: &Value) -> Result<Tunables> {
        let t = config.get("tunables").cloned().unwrap_or_else(|| json!({}));
        let top_n = opt_usize(&t, "top_n")?.unwrap_or(10);
        let horizon = opt_usize(&t, "horizon")?.unwrap_or(seqspace::DEFAULT_HORIZON);
        let eigen_count = opt_usize(&t, "eigen_count")?.unwrap_or(5);
        if top_n == 0 || top_n > 100_000 {
            return Err(Error::Config(format!(
                "field `tunables.top_n` must lie in 1..=100000, got {top_n}"
            )));
        }
        if !(10..=100_000_000).contains(&horizon) {
            return Err(Error::Config(format!(
                "field `tunables.horizon` must lie in 10..=10^8, got {horizon}"
            )));
        }
        if eigen_count == 0 || eigen_count > 10_000 {
            return Err(Error::Config(format!(
                "field `tunables.eigen_count` must lie in 1..=10000, got {eigen_count}"
            )));
        }
        let levels = match t.get("levels") {
            None => vec![256, 512, 1024],
            Some(v) => {
                let arr = v.as_array().ok_or_else(|| {
                    Error::Config("field `tunables.levels` must be an array of integers".into())
                })?;
                arr.iter()
                    .map(|x| {
                        x.as_u64().map(|u| u as usize).ok_or_else(|| {
                            Error::Config("field `tunables.levels` must contain integers".into())
                        })
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        let stabilization_threshold = t
            .get("stabilization_threshold")
            .map(|v| {
                v.as_f64().ok_or_else(|| {
                    Error::Config("field `tunables.stabilization_threshold` must be numeric".into())
                })
            })
            .transpose()?
            .unwrap_or(1e-3);
        if !(stabilization_threshold > 0.0 && stabilization_threshold < 1.0) {
            return Err(Error::Config(format!(
                "field `tunables.stabilization_threshold` must lie in (0, 1), got \
                 {stabilization_threshold}"
            )));
        }
        let assume_l2_orthogonal = t
            .get("assume_l2_orthogonal")
            .and_then(|v| v.as_bool())
            .unwrap_or(false);
        Ok(Tunables {
            top_n,
            horizon,
            levels,
            stabilization_threshold,
            eigen_count,
            assume_l2_orthogonal,
        })
    }
}

fn opt_usize(t: &Value, key: &str) -> Result<Option<usize>> {
    match t.get(key) {
        None => Ok(None),
        Some(v) => v
            .as_u64()
            .map(|u| Some(u as usize))
            .ok_or_else(|| Error::Config(format!("field `tunables.{key}` must be an integer"))),
    }
}

fn parse_kernel(config: &Value) -> Result<Kernel> {
    let k = config
        .get("kernel")
        .ok_or_else(|| Error::Config("missing field `kernel`".into()))?;
    let name = k
        .get("name")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::Config("field `kernel.name` must be a string".into()))?;
    let empty = json!({});
    let params = k.get("params").unwrap_or(&empty);
    make_kernel(name, params).map_err(|e| Error::Config(format!("field `kernel`: {e}")))
}

fn parse_measure(config: &Value, kernel: &Kernel) -> Result<DiscreteMeasure> {
    let m = config
        .get("measure")
        .ok_or_else(|| Error::Config("missing field `measure`".into()))?;
    let ty = m
        .get("type")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::Config("field `measure.type` must be a string".into()))?;
    let normalize = m.get("normalize").and_then(|v| v.as_bool()).unwrap_or(false);
    let built = match ty {
        "grid" => {
            let a = num_field(m, "measure.a")?;
            let b = num_field(m, "measure.b")?;
            let count = int_field(m, "measure.m")?;
            uniform_grid_measure(a, b, count)
        }
        "naturals" => {
            let n = int_field(m, "measure.n")?;
            let src = m.get("weight_expr").and_then(|v| v.as_str()).ok_or_else(|| {
                Error::Config("field `measure.weight_expr` must be an expression string".into())
            })?;
            let e = SeqExpr::parse(src)
                .map_err(|err| Error::Config(format!("field `measure.weight_expr`: {err}")))?;
            let f = e.into_seq_fn();
            let weights: Vec<f64> = (1..=n as u64).map(|i| f(i)).collect();
            let weights = maybe_normalize(weights, normalize)?;
            crate::measure::atomic_measure(
                (1..=n as u64).map(Point::Nat).collect(),
                weights,
            )
        }
        "atoms" => {
            let atoms = parse_atom_list(m, &kernel.domain())?;
            let weights = m
                .get("weights")
                .and_then(|v| v.as_array())
                .ok_or_else(|| Error::Config("field `measure.weights` must be an array".into()))?
                .iter()
                .map(|v| {
                    v.as_f64().ok_or_else(|| {
                        Error::Config("field `measure.weights` must contain numbers".into())
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let weights = maybe_normalize(weights, normalize)?;
            crate::measure::atomic_measure(atoms, weights)
        }
        other => {
            return Err(Error::Config(format!(
                "field `measure.type`: unknown type `{other}`"
            )))
        }
    };
    let measure = built.map_err(|e| Error::Config(format!("field `measure`: {e}")))?;
    for atom in measure.atoms() {
        if !kernel.domain().contains(atom) {
            return Err(Error::Config(format!(
                "field `measure`: atom {atom:?} lies outside the `{}` kernel domain",
                kernel.name()
            )));
        }
    }
    Ok(measure)
}

fn maybe_normalize(mut weights: Vec<f64>, normalize: bool) -> Result<Vec<f64>> {
    if normalize {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Config(format!(
                "field `measure.normalize`: total mass {total} cannot be normalized"
            )));
        }
        for w in &mut weights {
            *w /= total;
        }
    }
    Ok(weights)
}

fn parse_atom_list(m: &Value, domain: &DomainTag) -> Result<Vec<Point>> {
    let arr = m
        .get("atoms")
        .and_then(|v| v.as_array())
        .ok_or_else(|| Error::Config("field `measure.atoms` must be an array".into()))?;
    arr.iter().map(|v| json_point(v, domain, "measure.atoms")).collect()
}

fn parse_point_list(points: &Value, key: &str, domain: &DomainTag) -> Result<Vec<Point>> {
    let arr = points
        .get(key)
        .and_then(|v| v.as_array())
        .ok_or_else(|| Error::Config(format!("field `points.{key}` must be an array")))?;
    arr.iter()
        .map(|v| json_point(v, domain, &format!("points.{key}")))
        .collect()
}

fn json_point(v: &Value, domain: &DomainTag, field: &str) -> Result<Point> {
    match domain {
        DomainTag::Naturals => v
            .as_u64()
            .map(Point::Nat)
            .ok_or_else(|| Error::Config(format!("field `{field}`: expected natural numbers"))),
        _ => v
            .as_f64()
            .map(Point::Real)
            .ok_or_else(|| Error::Config(format!("field `{field}`: expected real numbers"))),
    }
}

fn num_field(m: &Value, field: &str) -> Result<f64> {
    let key = field.rsplit('.').next().unwrap();
    m.get(key)
        .and_then(|v| v.as_f64())
        .ok_or_else(|| Error::Config(format!("field `{field}` must be numeric")))
}

fn int_field(m: &Value, field: &str) -> Result<usize> {
    let key = field.rsplit('.').next().unwrap();
    m.get(key)
        .and_then(|v| v.as_u64())
        .map(|u| u as usize)
        .ok_or_else(|| Error::Config(format!("field `{field}` must be a positive integer")))
}

fn parse_ladder(config: &Value, kernel: Kernel, tun: &Tunables) -> Result<RefinementLadder> {
    let m = config
        .get("measure")
        .ok_or_else(|| Error::Config("missing field `measure`".into()))?;
    let ty = m.get("type").and_then(|v| v.as_str()).unwrap_or("grid");
    match ty {
        "grid" => {
            let a = num_field(m, "measure.a")?;
            let b = num_field(m, "measure.b")?;
            grid_ladder(kernel, a, b, tun.levels.clone())
                .map_err(|e| Error::Config(format!("field `tunables.levels`: {e}")))
        }
        "naturals" => {
            let src = m.get("weight_expr").and_then(|v| v.as_str()).ok_or_else(|| {
                Error::Config("field `measure.weight_expr` must be an expression string".into())
            })?;
            let e = SeqExpr::parse(src)
                .map_err(|err| Error::Config(format!("field `measure.weight_expr`: {err}")))?;
            truncation_ladder(kernel, e.into_seq_fn(), tun.levels.clone())
                .map_err(|e| Error::Config(format!("field `tunables.levels`: {e}")))
        }
        other => Err(Error::Config(format!(
            "field `measure.type`: `{other}` does not define a refinement ladder"
        ))),
    }
}

fn parse_pair(config: &Value) -> Result<SequencePair> {
    let p = config
        .get("pair")
        .ok_or_else(|| Error::Config("missing field `pair` for seq-example".into()))?;
    if let Some(preset) = p.get("preset").and_then(|v| v.as_str()) {
        return match preset {
            "paper" | "paper_example" => Ok(seqspace::paper_example()),
            "equal" => {
                let src = p.get("base_expr").and_then(|v| v.as_str()).ok_or_else(|| {
                    Error::Config("field `pair.base_expr` must be an expression string".into())
                })?;
                let e = SeqExpr::parse(src)
                    .map_err(|err| Error::Config(format!("field `pair.base_expr`: {err}")))?;
                Ok(seqspace::equal_pair(e.into_seq_fn(), src))
            }
            other => Err(Error::Config(format!(
                "field `pair.preset`: unknown preset `{other}`"
            ))),
        };
    }
    let mu_src = p
        .get("mu_expr")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::Config("field `pair.mu_expr` must be an expression string".into()))?;
    let nu_src = p
        .get("nu_expr")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::Config("field `pair.nu_expr` must be an expression string".into()))?;
    let mu = SeqExpr::parse(mu_src)
        .map_err(|e| Error::Config(format!("field `pair.mu_expr`: {e}")))?;
    let nu = SeqExpr::parse(nu_src)
        .map_err(|e| Error::Config(format!("field `pair.nu_expr`: {e}")))?;
    let annotations = parse_ratio_annotations(p)?;
    Ok(SequencePair {
        mu: mu.into_seq_fn(),
        nu: nu.into_seq_fn(),
        mu_label: mu_src.into(),
        nu_label: nu_src.into(),
        annotations,
    })
}

fn parse_ratio_annotations(p: &Value) -> Result<Annotations> {
    let Some(a) = p.get("annotations") else {
        return Ok(Annotations::default());
    };
    let ratio_limit = a.get("ratio_limit").and_then(|v| v.as_f64());
    let ratio_sup_finite = a.get("ratio_sup_finite").and_then(|v| v.as_bool());
    let ratio_sum = parse_series_annotation(a, "ratio_sum")?;
    let ratio_sq_sum = parse_series_annotation(a, "ratio_sq_sum")?;
    Ok(Annotations { ratio_limit, ratio_sup_finite, ratio_sum, ratio_sq_sum })
}

fn parse_series_annotation(a: &Value, key: &str) -> Result<Option<SeriesAnnotation>> {
    let Some(s) = a.get(key) else { return Ok(None) };
    let kind = s
        .get("kind")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::Config(format!("field `annotations.{key}.kind` must be a string")))?;
    let justification = s
        .get("justification")
        .and_then(|v| v.as_str())
        .ok_or_else(|| {
            Error::Config(format!(
                "field `annotations.{key}.justification` must be a string"
            ))
        })?
        .to_string();
    match kind {
        "divergent" => Ok(Some(SeriesAnnotation::Divergent { justification })),
        "summable" => Ok(Some(SeriesAnnotation::Summable { justification })),
        other => Err(Error::Config(format!(
            "field `annotations.{key}.kind`: expected divergent|summable, got `{other}`"
        ))),
    }
}

fn parse_ivar_model(config: &Value) -> Result<IvarModel> {
    let kernel = parse_kernel(config)?;
    let measure = parse_measure(config, &kernel)?;
    let model = EmbeddingModel::new(kernel, measure)
        .map_err(|e| Error::Config(format!("field `kernel`/`measure`: {e}")))?;
    let schema = parse_weights(config)?;
    IvarModel::new(model, schema)
        .map_err(|e| Error::Config(format!("field `weights`: {e}")))
}

fn parse_weights(config: &Value) -> Result<WeightSchema> {
    let w = config
        .get("weights")
        .ok_or_else(|| Error::Config("missing field `weights` for an ivar command".into()))?;
    let ty = w
        .get("type")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::Config("field `weights.type` must be a string".into()))?;
    match ty {
        "product" => {
            let rule = w
                .get("rule")
                .and_then(|v| v.as_str())
                .ok_or_else(|| Error::Config("field `weights.rule` must be a string".into()))?;
            match rule {
                "pow2" => Ok(WeightSchema::product_pow2()),
                "inverse_square" => {
                    let mut schema = WeightSchema::product_inverse_square();
                    if let Some(set) = parse_supercritical(w)? {
                        if let WeightSchema::Product { annotations, .. } = &mut schema {
                            annotations.supercritical = Some(set);
                        }
                    }
                    Ok(schema)
                }
                "geometric" => {
                    let q = w.get("q").and_then(|v| v.as_f64()).ok_or_else(|| {
                        Error::Config("field `weights.q` must be numeric for geometric".into())
                    })?;
                    WeightSchema::product_geometric(q)
                        .map_err(|e| Error::Config(format!("field `weights.q`: {e}")))
                }
                "constant_one" => Ok(WeightSchema::product_constant_one()),
                "expr" => {
                    let src = w.get("gamma_expr").and_then(|v| v.as_str()).ok_or_else(|| {
                        Error::Config("field `weights.gamma_expr` must be an expression".into())
                    })?;
                    let e = SeqExpr::parse(src)
                        .map_err(|err| Error::Config(format!("field `weights.gamma_expr`: {err}")))?;
                    let f = e.into_seq_fn();
                    let annotations = parse_gamma_annotations(w)?;
                    Ok(WeightSchema::product(
                        std::sync::Arc::new(move |j| f(j as u64)),
                        src,
                        annotations,
                    ))
                }
                other => Err(Error::Config(format!(
                    "field `weights.rule`: unknown rule `{other}`"
                ))),
            }
        }
        "explicit" => {
            let arr = w
                .get("terms")
                .and_then(|v| v.as_array())
                .ok_or_else(|| Error::Config("field `weights.terms` must be an array".into()))?;
            let mut list = Vec::new();
            for term in arr {
                let elems = term
                    .get("u")
                    .and_then(|v| v.as_array())
                    .ok_or_else(|| Error::Config("field `weights.terms[].u` must be an array".into()))?
                    .iter()
                    .map(|x| {
                        x.as_u64().map(|u| u as u32).ok_or_else(|| {
                            Error::Config("field `weights.terms[].u` must contain naturals".into())
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let g = term.get("gamma").and_then(|v| v.as_f64()).ok_or_else(|| {
                    Error::Config("field `weights.terms[].gamma` must be numeric".into())
                })?;
                let u = SubsetU::new(elems)
                    .map_err(|e| Error::Config(format!("field `weights.terms[].u`: {e}")))?;
                list.push((u, g));
            }
            WeightSchema::explicit(list).map_err(|e| Error::Config(format!("field `weights.terms`: {e}")))
        }
        other => Err(Error::Config(format!(
            "field `weights.type`: unknown type `{other}`"
        ))),
    }
}

fn parse_supercritical(w: &Value) -> Result<Option<Vec<u32>>> {
    let Some(v) = w.get("supercritical") else { return Ok(None) };
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Config("field `weights.supercritical` must be an array".into()))?;
    arr.iter()
        .map(|x| {
            x.as_u64().map(|u| u as u32).ok_or_else(|| {
                Error::Config("field `weights.supercritical` must contain naturals".into())
            })
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

fn parse_gamma_annotations(w: &Value) -> Result<GammaAnnotations> {
    let mut ann = GammaAnnotations {
        supercritical: parse_supercritical(w)?,
        ..GammaAnnotations::default()
    };
    let Some(a) = w.get("annotations") else { return Ok(ann) };
    ann.gamma_limit = a.get("gamma_limit").and_then(|v| v.as_f64());
    ann.gamma_sum = parse_series_annotation(a, "gamma_sum")?;
    ann.nonincreasing_from = a
        .get("nonincreasing_from")
        .and_then(|v| v.as_u64())
        .map(|u| u as u32);
    Ok(ann)
}

fn verdict_json(v: &Verdict) -> Value {
    let mut j = serde_json::to_value(v).unwrap_or(Value::Null);
    j["certified"] = json!(v.is_certified());
    j
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_command_end_to_end() {
        let config = json!({
            "kernel": {"name": "min"},
            "measure": {"type": "grid", "a": 0.0, "b": 1.0, "m": 64},
            "tunables": {"top_n": 5},
        });
        let (out, csv) = execute("spectrum", &config).unwrap();
        let hs = out["hs_trace"].as_f64().unwrap();
        assert!((hs - 0.5).abs() < 1e-2, "hs = {hs}");
        assert_eq!(out["singular_values"].as_array().unwrap().len(), 5);
        assert!(csv.unwrap().starts_with("index,sigma\n"));
    }

    #[test]
    fn missing_measure_is_config_error() {
        let config = json!({"kernel": {"name": "min"}});
        let err = execute("spectrum", &config).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("measure"));
    }

    #[test]
    fn seq_example_paper_preset() {
        let config = json!({"pair": {"preset": "paper"}});
        let (out, _) = execute("seq-example", &config).unwrap();
        assert_eq!(out["verdicts"]["bounded"]["status"], "YesCertified");
        assert_eq!(out["verdicts"]["compact"]["status"], "YesCertified");
        assert_eq!(out["verdicts"]["kernel_in_l2"]["status"], "NoCertified");
        assert_eq!(out["verdicts"]["compact"]["certified"], true);
    }

    #[test]
    fn ivar_verdict_inverse_square() {
        let config = json!({
            "kernel": {"name": "diagonal_sequence", "params": {"nu": "2"}},
            "measure": {"type": "naturals", "n": 1, "weight_expr": "1"},
            "weights": {"type": "product", "rule": "inverse_square"},
            "tunables": {"top_n": 5},
        });
        let (out, csv) = execute("ivar-verdict", &config).unwrap();
        assert_eq!(out["verdict"]["kind"], "CompactCertified");
        assert_eq!(out["certified"], true);
        assert!(csv.unwrap().starts_with("rank,subset,value\n"));
    }

    #[test]
    fn ivar_verdict_constant_one_skips_enumeration() {
        let config = json!({
            "kernel": {"name": "diagonal_sequence", "params": {"nu": "1"}},
            "measure": {"type": "naturals", "n": 1, "weight_expr": "1"},
            "weights": {"type": "product", "rule": "constant_one"},
        });
        let (out, _) = execute("ivar-verdict", &config).unwrap();
        assert_eq!(out["verdict"]["kind"], "NonCompactCertified");
        assert!(out["enumeration"].is_null());
        assert!(out["enumeration_note"].as_str().unwrap().contains("supercritical"));
    }

    #[test]
    fn ivar_spectrum_requires_flag() {
        let config = json!({
            "kernel": {"name": "diagonal_sequence", "params": {"nu": "2"}},
            "measure": {"type": "naturals", "n": 1, "weight_expr": "1"},
            "weights": {"type": "product", "rule": "pow2"},
        });
        let err = execute("ivar-spectrum", &config).unwrap_err();
        assert_eq!(exit_code(&err), 2);

        let mut with_flag = config.clone();
        with_flag["tunables"] = json!({"assume_l2_orthogonal": true, "top_n": 3});
        let (out, _) = execute("ivar-spectrum", &with_flag).unwrap();
        let vals = out["tensor_eigenvalues"].as_array().unwrap();
        assert_eq!(vals.len(), 3);
        assert!((vals[0].as_f64().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kgamma_product_command() {
        let config = json!({
            "kernel": {"name": "min"},
            "measure": {"type": "grid", "a": 0.0, "b": 1.0, "m": 16},
            "weights": {"type": "product", "rule": "pow2"},
            "points": {"x": [0.5, 0.5], "y": [0.5, 0.5], "truncation": 2,
                       "diag_tail_bound": 1.0},
        });
        let (out, _) = execute("kgamma", &config).unwrap();
        assert!((out["value"].as_f64().unwrap() - 1.40625).abs() < 1e-12);
        assert!(out["tail_bound"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn gram_command_min_eig_nonnegative() {
        let config = json!({
            "kernel": {"name": "gaussian", "params": {"sigma": 0.7}},
            "measure": {"type": "atoms", "atoms": [0.0, 1.0, 2.5],
                        "weights": [0.25, 0.5, 0.25]},
        });
        let (out, _) = execute("gram", &config).unwrap();
        assert!(out["min_eigenvalue"].as_f64().unwrap() > -1e-10);
        assert_eq!(out["gram"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn diagnose_grid_command() {
        let config = json!({
            "kernel": {"name": "min"},
            "measure": {"type": "grid", "a": 0.0, "b": 1.0, "m": 0},
            "tunables": {"levels": [64, 128, 256], "top_n": 6},
        });
        let (out, csv) = execute("diagnose", &config).unwrap();
        assert_eq!(out["verdict"], "EvidenceCompact");
        assert_eq!(out["certified"], false);
        assert!(csv.unwrap().starts_with("level,n,sigma\n"));
    }

    #[test]
    fn unknown_command_rejected() {
        let err = execute("frobnicate", &json!({})).unwrap_err();
        assert_eq!(exit_code(&err), 2);
    }
}
