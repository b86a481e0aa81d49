use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::Args;
use log::info;
use mesorisk::community::{
    detect, hierarchy, CommunityDocument, CommunityEntry, DetectConfig, DocumentParameters,
    HierarchyConfig, StructureStatus, MIN_GAIN,
};
use mesorisk::factor_model::{
    build_factors, calibrate, correlation_error_report, orthogonalize, r_squared_summary,
    CalibratedModel, CalibrationDocument, FactorKind, GroupAssignments, ModelVariant,
};
use mesorisk::matrix_io::{self, format_f64};
use mesorisk::partition_analysis::{
    stability_study, StabilityMode, StabilityParams, StabilityReport,
};
use mesorisk::risk_engine::{
    load_portfolio, quantile_report, schematic_portfolios, Portfolio, PortfolioKind,
    SimulationOptions,
};
use mesorisk::rng::derive_seed;
use mesorisk::spectra::{
    bulk_fraction, correlation, decompose, density_histogram, shuffle_test, ModeTag,
};
use mesorisk::synth::{planted_spreads, synthetic_meta, PlantedSpec};
use mesorisk::timeseries::{
    load_meta, load_panel, log_returns, standardize, write_meta, write_panel, LoadOptions,
    Resolution, ReturnPanel, SpreadPanel,
};
use mesorisk::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, StabilitySelection};
use crate::manifest::{hash_file, Outputs};

/// Pairs whose model-minus-empirical correlation exceeds this in absolute
/// value count towards the reported tail mass.
pub const CORRELATION_TAIL_THRESHOLD: f64 = 0.2;

const CACHE_MATRIX: &str = "returns.mrk";
const CACHE_INDEX: &str = "returns_cache.json";
const COMMUNITIES: &str = "communities.json";

fn csv_line(fields: &[String]) -> String {
    let mut line = fields.join(",");
    line.push('\n');
    line
}

fn report_ingest(panel: &SpreadPanel, out: &mut Outputs) {
    let r = &panel.report;
    for d in &r.dropped {
        out.note(format!("dropped issuer `{}`: {}", d.issuer, d.reason));
    }
    if r.filled_values > 0 {
        out.note(format!(
            "forward-filled {} missing observations",
            r.filled_values
        ));
    }
    if !r.unknown_labels.is_empty() {
        out.note(format!(
            "{} metadata labels outside the known vocabulary",
            r.unknown_labels.len()
        ));
    }
    if !r.missing_meta.is_empty() {
        out.note(format!(
            "{} issuers have no metadata record",
            r.missing_meta.len()
        ));
    }
}

fn load_spreads(cfg: &RunConfig, out: &mut Outputs) -> Result<SpreadPanel> {
    let input = cfg.input()?;
    out.input("spreads", input)?;
    if let Some(meta) = &cfg.meta {
        out.input("meta", meta)?;
    }
    let panel = load_panel(input, cfg.meta.as_deref(), cfg.load_options())?;
    report_ingest(&panel, out);
    Ok(panel)
}

/// Key for reusing standardized returns between `spectrum` and later stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ReturnsCache {
    input_hash: String,
    meta_hash: Option<String>,
    resolution_step: usize,
    load_options: LoadOptions,
    matrix_hash: String,
    issuers: Vec<String>,
    dates: Vec<NaiveDate>,
}

fn cache_key(
    cfg: &RunConfig,
    res: Resolution,
) -> Result<(String, Option<String>, usize, LoadOptions)> {
    let input_hash = hash_file(cfg.input()?)?;
    let meta_hash = cfg.meta.as_deref().map(hash_file).transpose()?;
    Ok((input_hash, meta_hash, res.step(), cfg.load_options()))
}

fn try_cache(cfg: &RunConfig, res: Resolution, out: &mut Outputs) -> Result<Option<ReturnPanel>> {
    let index = out.path(CACHE_INDEX);
    let Ok(text) = std::fs::read_to_string(&index) else {
        return Ok(None);
    };
    let Ok(cache) = serde_json::from_str::<ReturnsCache>(&text) else {
        return Ok(None);
    };
    let key = cache_key(cfg, res)?;
    if (
        cache.input_hash.as_str(),
        cache.meta_hash.as_deref(),
        cache.resolution_step,
        cache.load_options,
    ) != (key.0.as_str(), key.1.as_deref(), key.2, key.3)
    {
        return Ok(None);
    }
    let matrix_path = out.path(CACHE_MATRIX);
    let Ok(bytes) = std::fs::read(&matrix_path) else {
        return Ok(None);
    };
    if crate::manifest::content_hash(&bytes) != cache.matrix_hash {
        return Ok(None);
    }
    let returns = matrix_io::decode(&bytes)?;
    if returns.ncols() != cache.issuers.len() || returns.nrows() != cache.dates.len() {
        return Ok(None);
    }
    let meta = match &cfg.meta {
        Some(path) => {
            let map = load_meta(path)?;
            cache
                .issuers
                .iter()
                .map(|id| map.get(id).cloned())
                .collect()
        }
        None => vec![None; cache.issuers.len()],
    };
    out.input("spreads", cfg.input()?)?;
    if let Some(m) = &cfg.meta {
        out.input("meta", m)?;
    }
    out.input("returns_cache", &matrix_path)?;
    out.note(format!("reused standardized returns from {CACHE_MATRIX}"));
    Ok(Some(ReturnPanel {
        dates: cache.dates,
        issuers: cache.issuers,
        returns,
        standardized: true,
        meta,
    }))
}

fn compute_returns(cfg: &RunConfig, res: Resolution, out: &mut Outputs) -> Result<ReturnPanel> {
    let spreads = load_spreads(cfg, out)?;
    standardize(&log_returns(&spreads, res)?)
}

fn write_cache(
    cfg: &RunConfig,
    res: Resolution,
    panel: &ReturnPanel,
    out: &mut Outputs,
) -> Result<()> {
    let bytes = matrix_io::encode(&panel.returns);
    let (input_hash, meta_hash, resolution_step, load_options) = cache_key(cfg, res)?;
    let cache = ReturnsCache {
        input_hash,
        meta_hash,
        resolution_step,
        load_options,
        matrix_hash: crate::manifest::content_hash(&bytes),
        issuers: panel.issuers.clone(),
        dates: panel.dates.clone(),
    };
    out.write("returns_cache", CACHE_MATRIX, &bytes)?;
    out.write_json("returns_cache_index", CACHE_INDEX, &cache)
}

fn tag_name(tag: ModeTag) -> &'static str {
    match tag {
        ModeTag::Market => "market",
        ModeTag::Group => "group",
        ModeTag::Random => "random",
        ModeTag::BelowBulk => "below_bulk",
    }
}

pub fn spectrum(cfg: &RunConfig) -> Result<()> {
    let mut out = Outputs::new("spectrum", cfg)?;
    let res = cfg.resolution()?;
    let panel = compute_returns(cfg, res, &mut out)?;
    write_cache(cfg, res, &panel, &mut out)?;

    let corr = correlation(&panel)?;
    let dec = decompose(&corr)?;
    let b = dec.bounds;
    let q = panel.n_series() as f64 / panel.n_obs() as f64;

    let mut text = String::from("index,eigenvalue,component\n");
    for (k, (l, t)) in dec.eigenvalues.iter().zip(&dec.tags).enumerate() {
        let _ = writeln!(text, "{k},{},{}", format_f64(*l), tag_name(*t));
    }
    out.write("eigenvalues", "eigenvalues.csv", text.as_bytes())?;

    let top = dec
        .eigenvalues
        .iter()
        .copied()
        .fold(b.lambda_plus, f64::max);
    let mut text = String::from("lambda,empirical_density,marchenko_pastur_density\n");
    for (c, e, t) in density_histogram(&dec.eigenvalues, b, q, 0.0, 1.05 * top, 200) {
        let _ = writeln!(
            text,
            "{},{},{}",
            format_f64(c),
            format_f64(e),
            format_f64(t)
        );
    }
    out.write("density", "density.csv", text.as_bytes())?;

    let shuffle = shuffle_test(&panel, derive_seed(cfg.seed, "shuffle", 0))?;
    let mut text = String::from("index,eigenvalue\n");
    for (k, l) in shuffle.eigenvalues.iter().enumerate() {
        let _ = writeln!(text, "{k},{}", format_f64(*l));
    }
    out.write(
        "shuffle_eigenvalues",
        "shuffle_eigenvalues.csv",
        text.as_bytes(),
    )?;

    let bulk = bulk_fraction(&dec.eigenvalues, b);
    let group: Vec<f64> = dec
        .eigenvalues
        .iter()
        .zip(&dec.tags)
        .filter(|(_, t)| **t == ModeTag::Group)
        .map(|(l, _)| *l)
        .collect();
    let summary = serde_json::json!({
        "n_series": panel.n_series(),
        "n_obs": panel.n_obs(),
        "q": q,
        "resolution": res.to_string(),
        "lambda_minus": b.lambda_minus,
        "lambda_plus": b.lambda_plus,
        "bulk_fraction": bulk,
        "market_eigenvalue": dec.market_index.map(|k| dec.eigenvalues[k]),
        "group_eigenvalues": group,
        "n_random": dec.count(ModeTag::Random),
        "n_below_bulk": dec.count(ModeTag::BelowBulk),
        "shuffle_bulk_fraction": shuffle.fraction_in_bulk,
    });
    out.write_json("spectrum", "spectrum.json", &summary)?;

    println!(
        "N={} T={} lambda-={:.6} lambda+={:.6}",
        panel.n_series(),
        panel.n_obs(),
        b.lambda_minus,
        b.lambda_plus
    );
    println!("bulk fraction: {bulk:.4}");
    println!("group eigenvalues: {}", group.len());
    println!("shuffled bulk fraction: {:.4}", shuffle.fraction_in_bulk);
    out.finish()
}

fn detect_config(cfg: &RunConfig) -> DetectConfig {
    DetectConfig {
        restarts: cfg.restarts,
        include_below_bulk: cfg.include_below_bulk,
        biased_baseline: cfg.biased_baseline,
    }
}

fn composition_rows(entries: &[CommunityEntry], text: &mut String) {
    for c in entries {
        for (dimension, counts) in [("region", &c.regions), ("sector", &c.sectors)] {
            for (label, n) in counts.iter().flatten() {
                let _ = writeln!(
                    text,
                    "{},{},{},{dimension},{label},{n}",
                    c.path, c.name, c.size
                );
            }
        }
        composition_rows(&c.subcommunities, text);
    }
}

pub fn detect_cmd(cfg: &RunConfig) -> Result<PathBuf> {
    let mut out = Outputs::new("detect", cfg)?;
    let res = cfg.resolution()?;
    let panel = match try_cache(cfg, res, &mut out)? {
        Some(p) => p,
        None => compute_returns(cfg, res, &mut out)?,
    };
    let dcfg = detect_config(cfg);
    let detection = detect(&panel, derive_seed(cfg.seed, "detect", 0), &dcfg)?;
    let tree = if detection.status == StructureStatus::Mesoscopic && cfg.max_depth > 1 {
        let hcfg = HierarchyConfig {
            max_depth: cfg.max_depth,
            min_size: cfg.min_size,
            restarts: cfg.restarts,
            include_below_bulk: cfg.include_below_bulk,
        };
        Some(hierarchy(
            &panel,
            &detection.partition,
            &hcfg,
            derive_seed(cfg.seed, "hierarchy", 0),
        )?)
    } else {
        None
    };
    let params = DocumentParameters {
        restarts: cfg.restarts,
        include_below_bulk: cfg.include_below_bulk,
        biased_baseline: cfg.biased_baseline,
        max_depth: cfg.max_depth,
        min_size: cfg.min_size,
        resolution_step: res.step(),
        min_gain: MIN_GAIN,
    };
    let doc = CommunityDocument::build(&panel, &detection, tree.as_ref(), params, cfg.seed)?;
    out.write_json("communities", COMMUNITIES, &doc)?;

    let mut text = String::from("issuer_id,community,path\n");
    for n in &doc.nodes {
        let _ = writeln!(text, "{},{},{}", n.issuer, n.community, n.path);
    }
    out.write("assignments", "assignments.csv", text.as_bytes())?;

    if panel.meta.iter().any(Option::is_some) {
        let mut text = String::from("path,community,size,dimension,label,count\n");
        composition_rows(&doc.communities, &mut text);
        out.write("composition", "composition.csv", text.as_bytes())?;
    } else {
        out.note("no issuer metadata: composition breakdown omitted");
    }

    let status = match doc.status {
        StructureStatus::Mesoscopic => "mesoscopic structure",
        StructureStatus::NoMesoscopicStructure => "no mesoscopic structure",
        StructureStatus::BiasedBaseline => "biased baseline",
    };
    println!("status: {status}");
    println!(
        "communities: {} (quality {:.6})",
        doc.n_communities, doc.quality
    );
    for c in &doc.communities {
        let subs: Vec<&str> = c.subcommunities.iter().map(|s| s.name.as_str()).collect();
        if subs.is_empty() {
            println!("  {} size {}", c.name, c.size);
        } else {
            println!("  {} size {} -> {}", c.name, c.size, subs.join(" "));
        }
    }
    let path = out.path(COMMUNITIES);
    out.finish()?;
    Ok(path)
}

fn mode_name(mode: StabilityMode) -> &'static str {
    match mode {
        StabilityMode::Multiresolution => "multiresolution",
        StabilityMode::SlidingWindow => "sliding_window",
    }
}

fn matrix_csv(labels: &[String], rows: &[Vec<f64>]) -> String {
    let mut text = String::from("label");
    for l in labels {
        text.push(',');
        text.push_str(l);
    }
    text.push('\n');
    for (l, row) in labels.iter().zip(rows) {
        text.push_str(l);
        for v in row {
            text.push(',');
            text.push_str(&format_f64(*v));
        }
        text.push('\n');
    }
    text
}

fn write_stability(report: &StabilityReport, out: &mut Outputs) -> Result<()> {
    let name = mode_name(report.mode);
    out.write_json("stability", &format!("stability_{name}.json"), report)?;
    out.write(
        "vi_matrix",
        &format!("vi_{name}.csv"),
        matrix_csv(&report.labels, &report.vi_matrix).as_bytes(),
    )?;
    if let Some(full) = &report.vi_matrix_with_full {
        let mut labels = report.labels.clone();
        labels.push("full".into());
        out.write(
            "vi_matrix",
            &format!("vi_{name}_with_full.csv"),
            matrix_csv(&labels, full).as_bytes(),
        )?;
    }
    let co = &report.cooccurrence;
    let ordered: Vec<String> = co
        .ordering
        .iter()
        .map(|&i| report.issuers[i].clone())
        .collect();
    let m = co.reordered();
    let rows: Vec<Vec<f64>> = (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect();
    out.write(
        "cooccurrence",
        &format!("cooccurrence_{name}.csv"),
        matrix_csv(&ordered, &rows).as_bytes(),
    )
}

pub fn stability(cfg: &RunConfig) -> Result<()> {
    let mut out = Outputs::new("stability", cfg)?;
    let spreads = load_spreads(cfg, &mut out)?;
    let params = StabilityParams {
        resolutions: Resolution::CANONICAL.to_vec(),
        window: cfg.window,
        window_resolution: cfg.resolution()?,
        detect: detect_config(cfg),
    };
    let modes: &[StabilityMode] = match cfg.stability {
        StabilitySelection::Multiresolution => &[StabilityMode::Multiresolution],
        StabilitySelection::SlidingWindow => &[StabilityMode::SlidingWindow],
        StabilitySelection::Both => &[StabilityMode::Multiresolution, StabilityMode::SlidingWindow],
    };
    let mut summary = Vec::new();
    for &mode in modes {
        let report = stability_study(
            &spreads,
            mode,
            &params,
            derive_seed(cfg.seed, "stability", 0),
        )?;
        write_stability(&report, &mut out)?;
        println!(
            "{}: {} partitions, max pairwise VI {:.4}",
            mode_name(mode),
            report.labels.len(),
            report.max_pairwise_vi
        );
        summary.push(serde_json::json!({
            "mode": mode,
            "n_partitions": report.labels.len(),
            "max_pairwise_vi": report.max_pairwise_vi,
        }));
    }
    out.details(serde_json::json!({ "studies": summary }));
    out.finish()
}

fn load_communities(path: &Path, out: &mut Outputs) -> Result<CommunityDocument> {
    out.input("communities", path)?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    CommunityDocument::from_json(&text)
}

fn needs_meta(v: ModelVariant) -> bool {
    v.group_kinds()
        .iter()
        .any(|k| matches!(k, FactorKind::Industry | FactorKind::Region))
}

fn needs_communities(v: ModelVariant) -> bool {
    v.group_kinds()
        .iter()
        .any(|k| matches!(k, FactorKind::Community | FactorKind::Subcommunity))
}

/// Requested variants, or every variant the available inputs support.
fn select_variants(
    cfg: &RunConfig,
    has_meta: bool,
    doc: Option<&CommunityDocument>,
) -> Result<Vec<ModelVariant>> {
    let has_tree = doc.is_some_and(CommunityDocument::has_subcommunities);
    let Some(requested) = &cfg.variants else {
        return Ok(ModelVariant::ALL
            .into_iter()
            .filter(|&v| !needs_meta(v) || has_meta)
            .filter(|&v| !needs_communities(v) || doc.is_some())
            .filter(|&v| v != ModelVariant::M6GlobalSubcommunity || has_tree)
            .collect());
    };
    for &v in requested {
        if needs_meta(v) && !has_meta {
            return Err(Error::Config(format!(
                "variant {} needs sector and region labels; pass --meta",
                v.as_str()
            )));
        }
        if needs_communities(v) && doc.is_none() {
            return Err(Error::Config(format!(
                "variant {} needs a community document; run `detect` and pass --communities",
                v.as_str()
            )));
        }
        if v == ModelVariant::M6GlobalSubcommunity && !has_tree {
            return Err(Error::Config(format!(
                "variant {} needs a community hierarchy, but no community in the document was split further; \
                 drop this variant or rerun `detect` with --max-depth 2 on data with nested structure",
                v.as_str()
            )));
        }
    }
    Ok(requested.clone())
}

pub fn calibrate_cmd(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut out = Outputs::new("calibrate", cfg)?;
    let spreads = load_spreads(cfg, &mut out)?;
    let returns = standardize(&log_returns(&spreads, cfg.calibration_resolution()?)?)?;
    let has_meta = returns.meta.iter().any(Option::is_some);
    let doc = cfg
        .communities
        .as_deref()
        .map(|p| load_communities(p, &mut out))
        .transpose()?;
    let variants = select_variants(cfg, has_meta, doc.as_ref())?;

    let mut groups = GroupAssignments::from_panel(&returns);
    if let Some(d) = &doc {
        let (top, leaf) = d.assignments(&returns.issuers)?;
        groups = groups.with_communities(top, leaf);
    }
    let factors = orthogonalize(&build_factors(&returns, &groups)?)?;
    for w in &factors.warnings {
        out.note(w.clone());
    }
    let mut diag = Vec::new();
    factors.write_diagnostics_csv(&mut diag)?;
    out.write("factor_diagnostics", "factor_diagnostics.csv", &diag)?;

    let empirical = correlation(&returns)?;
    let mut r2 = String::from("model,average,median,sd,min,max,mean_beta\n");
    let mut err_summary = String::from("model,n_pairs,mean,sd,tail_threshold,tail_mass\n");
    let mut err_hist = String::from("model,lo,hi,count\n");
    let mut emp_hist = String::new();
    let mut written = Vec::new();
    let opt = |x: Option<f64>| x.map(format_f64).unwrap_or_default();

    for &v in &variants {
        let model = calibrate(&returns, &factors, v)?;
        for w in &model.warnings {
            out.note(format!("{}: {w}", v.as_str()));
        }
        let name = format!("calibration_{}.json", v.as_str());
        let json = CalibrationDocument::from_model(&model).to_json()?;
        out.write("calibration", &name, json.as_bytes())?;
        written.push(out.path(&name));

        let mean_beta = model.beta.iter().sum::<f64>() / model.n_issuers() as f64;
        if let Some(s) = r_squared_summary(&model) {
            r2.push_str(&csv_line(&[
                v.as_str().into(),
                format_f64(s.average),
                format_f64(s.median),
                format_f64(s.sd),
                format_f64(s.min),
                format_f64(s.max),
                format_f64(mean_beta),
            ]));
        }
        let rep = correlation_error_report(
            &model,
            &empirical,
            &returns.issuers,
            CORRELATION_TAIL_THRESHOLD,
        )?;
        err_summary.push_str(&csv_line(&[
            v.as_str().into(),
            rep.n_pairs.to_string(),
            opt(rep.mean),
            opt(rep.sd),
            format_f64(rep.tail_threshold),
            opt(rep.tail_mass),
        ]));
        for h in &rep.histogram {
            let _ = writeln!(
                err_hist,
                "{},{},{},{}",
                v.as_str(),
                format_f64(h.lo),
                format_f64(h.hi),
                h.count
            );
        }
        if emp_hist.is_empty() {
            emp_hist.push_str("lo,hi,count\n");
            for h in &rep.empirical_histogram {
                let _ = writeln!(
                    emp_hist,
                    "{},{},{}",
                    format_f64(h.lo),
                    format_f64(h.hi),
                    h.count
                );
            }
        }
        println!(
            "{}: K={} mean beta {:.4}",
            v.as_str(),
            model.n_factors(),
            mean_beta
        );
    }
    out.write("r_squared_summary", "r_squared_summary.csv", r2.as_bytes())?;
    out.write(
        "correlation_error_summary",
        "correlation_error_summary.csv",
        err_summary.as_bytes(),
    )?;
    out.write(
        "correlation_errors",
        "correlation_errors.csv",
        err_hist.as_bytes(),
    )?;
    if !emp_hist.is_empty() {
        out.write(
            "empirical_correlations",
            "empirical_correlation_histogram.csv",
            emp_hist.as_bytes(),
        )?;
    }
    out.details(serde_json::json!({
        "variants": variants.iter().map(|v| v.as_str()).collect::<Vec<_>>(),
        "n_issuers": returns.n_series(),
        "n_obs": returns.n_obs(),
    }));
    out.finish()?;
    Ok(written)
}

fn calibration_files(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    if !cfg.calibrations.is_empty() {
        return Ok(cfg.calibrations.clone());
    }
    let dir = &cfg.out_dir;
    let entries = std::fs::read_dir(dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("calibration_") && n.ends_with(".json"))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn load_models(files: &[PathBuf], out: &mut Outputs) -> Result<Vec<CalibratedModel>> {
    let mut models = Vec::with_capacity(files.len());
    for f in files {
        out.input("calibration", f)?;
        let text = std::fs::read_to_string(f).map_err(|e| Error::Io {
            path: f.clone(),
            source: e,
        })?;
        models.push(CalibrationDocument::from_json(&text)?.to_model()?);
    }
    models.sort_by_key(|m| m.variant);
    if let Some(w) = models.windows(2).find(|w| w[0].variant == w[1].variant) {
        return Err(Error::Config(format!(
            "variant {} given twice",
            w[0].variant.as_str()
        )));
    }
    Ok(models)
}

fn portfolios(
    cfg: &RunConfig,
    models: &[CalibratedModel],
    out: &mut Outputs,
) -> Result<Vec<Portfolio>> {
    if !cfg.portfolios.is_empty() {
        let mut list = Vec::new();
        for p in &cfg.portfolios {
            out.input("portfolio", p)?;
            list.push(load_portfolio(p)?);
        }
        return Ok(list);
    }
    let meta_path = cfg.meta.as_deref().ok_or_else(|| {
        Error::Config(
            "schematic portfolios need issuer metadata; pass --meta or --portfolio".into(),
        )
    })?;
    out.input("meta", meta_path)?;
    let map: HashMap<_, _> = load_meta(meta_path)?;
    let issuers = &models[0].issuers;
    let meta: Vec<_> = issuers.iter().map(|id| map.get(id).cloned()).collect();
    schematic_portfolios(issuers, &meta)
}

pub fn simulate_cmd(cfg: &RunConfig) -> Result<()> {
    let mut out = Outputs::new("simulate", cfg)?;
    let files = calibration_files(cfg)?;
    if files.is_empty() {
        return Err(Error::Config(format!(
            "no calibration documents in {}; run `calibrate` or pass --calibration",
            cfg.out_dir.display()
        )));
    }
    let models = load_models(&files, &mut out)?;
    let list = portfolios(cfg, &models, &mut out)?;
    let opts = SimulationOptions {
        aggregate_classes: cfg.aggregate_classes,
        ..SimulationOptions::default()
    };

    let mut table = Vec::new();
    let mut reports = Vec::new();
    let mut details = Vec::new();
    for (k, p) in list.iter().enumerate() {
        let sum = p.exposure_sum();
        let balanced = p.kind == PortfolioKind::LongShort && sum.abs() <= 1e-12;
        if p.kind == PortfolioKind::LongShort && !balanced {
            return Err(Error::InvalidInput(format!(
                "long-short portfolio {} has exposure sum {sum}",
                p.name
            )));
        }
        let mut positions = Vec::new();
        p.write_csv(&mut positions)?;
        out.write(
            "portfolio",
            &format!("portfolio_{}.csv", p.name),
            &positions,
        )?;

        info!("simulating portfolio {} ({} positions)", p.name, p.len());
        let rep = quantile_report(p, &models, &cfg.alphas, cfg.paths, cfg.seed, &opts)?;
        rep.write_csv(&mut table, k == 0)?;
        for row in &rep.rows {
            let vars: Vec<String> = row.var.iter().map(|v| format!("{v:.6}")).collect();
            let ratio = row
                .tail_ratio
                .map_or("-".to_string(), |r| format!("{r:.4}"));
            println!(
                "{} {}: VaR {} ratio {ratio}",
                p.name,
                row.variant.as_str(),
                vars.join(" ")
            );
        }
        details.push(serde_json::json!({
            "portfolio": p.name,
            "kind": p.kind,
            "n_positions": p.len(),
            "exposure_sum": sum,
            "exposure_sum_is_zero": balanced,
            "path_seed": rep.path_seed,
        }));
        reports.push(rep);
    }
    out.write("quantiles", "quantiles.csv", &table)?;
    out.write_json("quantiles", "quantiles.json", &reports)?;
    out.details(serde_json::json!({ "portfolios": details }));
    out.finish()
}

pub fn pipeline(cfg: &RunConfig) -> Result<()> {
    let mut out = Outputs::new("pipeline", cfg)?;
    spectrum(cfg)?;
    let communities = detect_cmd(cfg)?;
    stability(cfg)?;
    let mut stage = cfg.clone();
    if stage.communities.is_none() {
        stage.communities = Some(communities);
    }
    let calibrations = calibrate_cmd(&stage)?;
    stage.calibrations = calibrations;
    simulate_cmd(&stage)?;
    out.details(serde_json::json!({
        "stages": ["spectrum", "detect", "stability", "calibrate", "simulate"],
    }));
    out.finish()
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Comma-separated planted group sizes.
    #[arg(long, value_delimiter = ',', default_value = "25,25,25,25,25,25")]
    pub groups: Vec<usize>,
    /// Number of daily returns.
    #[arg(long, default_value_t = 2520)]
    pub days: usize,
    /// Defaults give a global-factor R² near 0.48 on monthly returns.
    #[arg(long, default_value_t = 0.72)]
    pub market_loading: f64,
    #[arg(long, default_value_t = 0.5)]
    pub group_loading: f64,
    /// Pairwise correlation of the group factors.
    #[arg(long, default_value_t = 0.0)]
    pub group_correlation: f64,
    /// Leading issuers labelled as sovereigns in the metadata.
    #[arg(long, default_value_t = 40)]
    pub sovereigns: usize,
    /// Daily log-spread volatility.
    #[arg(long, default_value_t = 0.02)]
    pub vol: f64,
}

/// Planted-group spread panel with matching metadata, for demos and tests.
pub fn synth(seed: u64, out_dir: PathBuf, a: &SynthArgs) -> Result<()> {
    let cfg = RunConfig {
        seed,
        out_dir,
        ..RunConfig::default()
    };
    let mut out = Outputs::new("synth", &cfg)?;
    let spec = PlantedSpec {
        group_sizes: a.groups.clone(),
        n_obs: a.days,
        market_loading: a.market_loading,
        group_loading: a.group_loading,
        group_correlation: a.group_correlation,
        seed: derive_seed(seed, "synth", 0),
    };
    let (panel, truth) = planted_spreads(&spec, a.vol)?;
    let meta = synthetic_meta(panel.n_issuers(), a.sovereigns.min(panel.n_issuers()));

    let spreads = out.path("spreads.csv");
    write_panel(&spreads, &panel)?;
    let meta_path = out.path("meta.csv");
    write_meta(&meta_path, &panel.issuers, &meta)?;
    for (role, path) in [("spreads", &spreads), ("meta", &meta_path)] {
        let bytes = std::fs::read(path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        out.write(role, &name, &bytes)?;
    }
    let mut text = String::from("issuer_id,group\n");
    for (id, g) in panel.issuers.iter().zip(&truth) {
        let _ = writeln!(text, "{id},{g}");
    }
    out.write("truth", "truth.csv", text.as_bytes())?;
    out.details(serde_json::to_value(&spec)?);
    println!("{} issuers, {} dates", panel.n_issuers(), panel.n_dates());
    out.finish()
}
