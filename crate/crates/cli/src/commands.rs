use std::path::Path;

use serde::Deserialize;

use icnn_opf::certify::{theorem1_bound, theorem2_bound, EnvelopePair, Theorem1Mode};
use icnn_opf::datagen::{
    generate_with_stats, import_labeled, split, write_dataset, Dataset, PerturbationConfig, Split, DEFAULT_FRACTIONS,
};
use icnn_opf::evalkit::{evaluate, render_report};
use icnn_opf::grid::{parse_case, validate, PowerNetwork};
use icnn_opf::icnn::{IcnnModel, NetConfig};
use icnn_opf::opf::{build_ac, build_dc, build_soc, export_formulation, Formulation};
use icnn_opf::trainer::{train_on, TrainConfig, TrainData, TrainError};

use crate::error::CliError;
use crate::manifest::{sidecar, Recorder};
use crate::{Arch, CertifyArgs, EvalArgs, ExportArgs, GenerateArgs, ImportArgs, KindArg, TrainArgs};

fn read_case(rec: &mut Recorder, path: &Path) -> Result<PowerNetwork, CliError> {
    let net = parse_case(&rec.read(path)?)?;
    let problems = validate(&net);
    if !problems.is_empty() {
        let list: Vec<String> = problems.iter().map(|v| v.message.clone()).collect();
        return Err(CliError::Input(format!("{}: invalid network: {}", path.display(), list.join("; "))));
    }
    Ok(net)
}

fn read_dataset(rec: &mut Recorder, path: &Path) -> Result<Dataset, CliError> {
    Ok(import_labeled(&rec.read(path)?)?)
}

fn read_model(rec: &mut Recorder, path: &Path) -> Result<IcnnModel, CliError> {
    Ok(IcnnModel::load(&rec.read(path)?)?)
}

fn label(model: &IcnnModel) -> &'static str {
    if model.is_convex() {
        "ICNN"
    } else {
        "DNN"
    }
}

pub fn inspect(path: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let net = parse_case(&text)?;
    println!("{}", net.stats());
    let problems = validate(&net);
    if problems.is_empty() {
        return Ok(());
    }
    for v in &problems {
        println!("violation   {:?}: {}", v.code, v.message);
    }
    Err(CliError::Input(format!("{} validation violations", problems.len())))
}

pub fn generate(a: &GenerateArgs, threads: Option<usize>) -> Result<(), CliError> {
    if a.alpha_min > a.alpha_max {
        return Err(CliError::Usage(format!("--alpha-min {} exceeds --alpha-max {}", a.alpha_min, a.alpha_max)));
    }
    let mut rec = Recorder::new("dataset generate", a, threads);
    rec.seed("dataset", a.seed);
    let net = read_case(&mut rec, &a.case)?;
    let cfg = PerturbationConfig {
        alpha_min: a.alpha_min,
        alpha_max: a.alpha_max,
        eta_std: a.eta_std,
        seed: a.seed,
        count: a.count,
    };
    let (dataset, stats) = generate_with_stats(&net, &cfg)?;
    rec.write(&a.out, &write_dataset(&dataset))?;
    println!("feasible    {}", stats.feasible);
    println!("infeasible  {}", stats.infeasible);
    for s in Split::ALL {
        println!("{:<11} {}", s.name(), dataset.split(s).len());
    }
    rec.finish(&a.out)
}

pub fn import(a: &ImportArgs, threads: Option<usize>) -> Result<(), CliError> {
    let mut rec = Recorder::new("dataset import", a, threads);
    let mut dataset = read_dataset(&mut rec, &a.labels)?;
    if dataset.feasible().next().is_none() {
        return Err(CliError::Empty("no optimal samples in the labeled file".into()));
    }
    if dataset.samples.iter().all(|s| s.split.is_none()) {
        rec.seed("split", a.seed);
        dataset = split(dataset, DEFAULT_FRACTIONS, a.seed)?;
    }
    rec.write(&a.out, &write_dataset(&dataset))?;
    for s in Split::ALL {
        println!("{:<11} {}", s.name(), dataset.split(s).len());
    }
    rec.finish(&a.out)
}

pub fn train(a: &TrainArgs, threads: Option<usize>) -> Result<(), CliError> {
    if a.widths.is_empty() || a.widths.contains(&0) {
        return Err(CliError::Usage("--widths needs at least one positive width".into()));
    }
    let mut rec = Recorder::new("train", a, threads);
    let dataset = read_dataset(&mut rec, &a.dataset)?;
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::parse(&rec.read(p)?)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    rec.seed("train", cfg.seed);
    let input_dim = dataset.input_dim().ok_or_else(|| CliError::Empty("dataset has no optimal samples".into()))?;
    let train = TrainData::from_split(&dataset, Split::Train);
    let valid = TrainData::from_split(&dataset, Split::Valid);
    let net = NetConfig::new(input_dim, &a.widths, a.arch == Arch::Icnn, cfg.seed);
    let mut model = IcnnModel::init(&net)?;
    if train.is_empty() {
        return Err(TrainError::EmptySplit(Split::Train).into());
    }
    model.standardize(&train.input_refs(), &train.targets)?;

    let csv_path = sidecar(&a.out, ".train.csv");
    let (trained, report) = match train_on(&model, &train, &valid, &cfg) {
        Ok(r) => r,
        Err(TrainError::Divergence { epoch, report }) => {
            rec.write(&csv_path, &report.to_csv())?;
            rec.finish(&csv_path)?;
            return Err(CliError::Numerical(format!(
                "validation loss diverged at epoch {epoch}; per-epoch report in {}",
                csv_path.display()
            )));
        }
        Err(e) => return Err(e.into()),
    };
    rec.write(&a.out, &trained.save())?;
    rec.write(&csv_path, &report.to_csv())?;
    println!("architecture      {} {:?}", label(&trained), a.widths);
    println!("parameters        {}", trained.num_params());
    println!("epochs            {}", report.epochs.len());
    println!("best epoch        {}", report.best_epoch);
    println!("best valid loss   {:.6e}", report.best_valid_loss);
    if trained.is_convex() {
        println!("min convex weight {:.3e} (convexity attested)", trained.min_convex_weight());
    }
    rec.finish(&a.out)
}

pub fn eval(a: &EvalArgs, threads: Option<usize>) -> Result<(), CliError> {
    let mut rec = Recorder::new("eval", a, threads);
    let model = read_model(&mut rec, &a.model)?;
    let baseline = a.baseline.as_deref().map(|p| read_model(&mut rec, p)).transpose()?;
    let dataset = read_dataset(&mut rec, &a.dataset)?;
    let which = a.split.into();
    let mut summaries = Vec::new();
    let mut records = Vec::new();
    let mut labels = vec![label(&model).to_string()];
    if let Some(b) = &baseline {
        let l = label(b);
        labels.push(if l == labels[0] { format!("{l} baseline") } else { l.to_string() });
    }
    for (m, l) in std::iter::once(&model).chain(baseline.as_ref()).zip(&labels) {
        let (s, r) = evaluate(m, l, &dataset, which)?;
        println!("{l:<14} mean gap {:.4}%  worst gap {:.4}%  ({} samples)", 100.0 * s.mean_gap, 100.0 * s.worst_gap, s.count);
        summaries.push(s);
        records.push(r);
    }
    let bundle = render_report(&summaries, &records);
    for (name, contents) in &bundle.files {
        rec.write(&a.out.join(name), contents)?;
    }
    rec.finish(&a.out)
}

pub fn certify(a: &CertifyArgs, threads: Option<usize>) -> Result<(), CliError> {
    if a.exact_1d && a.theorem != 1 {
        return Err(CliError::Usage("--exact-1d applies to --theorem 1 only".into()));
    }
    if !(a.fit_tol >= 0.0) {
        return Err(CliError::Usage("--fit-tol must be nonnegative".into()));
    }
    let mut rec = Recorder::new("certify", a, threads);
    let model = read_model(&mut rec, &a.model)?;
    let dataset = read_dataset(&mut rec, &a.dataset)?;
    let phi = EnvelopePair::from_dataset(&dataset, a.split.into())?;
    if model.input_dim() != phi.dim() {
        return Err(CliError::Input(format!("model takes {} inputs but the data has {}", model.input_dim(), phi.dim())));
    }
    let cert = if a.theorem == 1 {
        let inputs: Vec<Vec<f64>> = phi.points().iter().map(|p| p.b.clone()).collect();
        let f = EnvelopePair::from_model(&model, &inputs)?;
        let mode = if a.exact_1d {
            Theorem1Mode::Exact1d
        } else {
            rec.seed("samples", a.seed);
            Theorem1Mode::Sampled { samples: a.samples as usize, seed: a.seed }
        };
        theorem1_bound(&f, &phi, mode)?
    } else {
        theorem2_bound(&phi, &model, a.fit_tol)?
    };
    rec.write(&a.out, &cert.to_json())?;
    println!("kind              {}", serde_json::to_value(cert.kind).expect("kind serializes").as_str().unwrap_or(""));
    println!("bound             {:.6e}", cert.bound);
    println!("value residual    {:.6e}", cert.residuals.value);
    println!("gradient residual {:.6e}", cert.residuals.gradient);
    if let Some(d) = cert.diameter {
        println!("diameter          {:.6e} ({:?})", d.value, d.mode);
    }
    if !cert.binding {
        let msg = "NOT BINDING: the model does not fit values and gradients within --fit-tol";
        println!("{msg}");
        eprintln!("{msg}");
    }
    rec.finish(&a.out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LoadFile {
    pd: Vec<f64>,
    qd: Option<Vec<f64>>,
}

pub fn export(a: &ExportArgs, threads: Option<usize>) -> Result<(), CliError> {
    let mut rec = Recorder::new("export-formulation", a, threads);
    let net = read_case(&mut rec, &a.case)?;
    let (pd, qd) = match &a.loads {
        Some(p) => {
            let loads: LoadFile = serde_json::from_str(&rec.read(p)?)
                .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
            (loads.pd, loads.qd.unwrap_or_else(|| net.reference_qd()))
        }
        None => (net.reference_pd(), net.reference_qd()),
    };
    let f = match a.kind {
        KindArg::Dc => Formulation::from_dc(&build_dc(&net, &pd)?),
        KindArg::Soc => build_soc(&net, &pd, &qd)?.formulation,
        KindArg::Ac => build_ac(&net, &pd, &qd)?,
    };
    rec.write(&a.out, &export_formulation(&f))?;
    println!("variables   {}", f.num_vars());
    println!("constraints {}", f.constraints.len());
    rec.finish(&a.out)
}
