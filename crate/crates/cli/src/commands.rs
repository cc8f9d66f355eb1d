use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::Serialize;

use geocite::assignment::{
    convention_agreement, prevalent_country_citing, prevalent_lau_citing, prevalent_territory_cited,
    read_attributions, write_attributions, AssignOptions, Attribution, AttributionRow,
};
use geocite::data;
use geocite::flows::{
    build_flow_edges, cited_territories, compute_masses, publication_report, render_publication_table,
    render_territory_table, territory_report, write_drops, write_publication_csv, write_territory_csv,
    AnalysisLevel, AttributionIndex, CitationTable, ContinentMap, FlowBuild, FlowContext, FlowError, MassTable,
    Partition, YearWindow,
};
use geocite::geodesy::{CountryAliases, Gazetteer};
use geocite::gravity::{
    build_design_from, ols_fit, read_observations, render_fit_table, write_observations, FitReport,
    FlowObservation, GravityError,
};
use geocite::ingest::{load_cited, load_citing, AddressParser, CitedRecord, CitingRecord, IngestStats};
use geocite::synth::{generate_world, recovery_trial, SynthError};

use crate::config::{PartitionChoice, RunConfig};
use crate::Failure;

fn require(path: &Option<PathBuf>, what: &str) -> Result<PathBuf, Failure> {
    let p = path
        .clone()
        .ok_or_else(|| Failure::usage(format!("no {what} file configured (use --{what})")))?;
    if !p.is_file() {
        return Err(Failure::usage(format!("{what} file {} does not exist", p.display())));
    }
    Ok(p)
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::usage(format!("cannot open {}: {e}", path.display())))
}

fn write_file(cfg: &RunConfig, name: &str, bytes: &[u8]) -> Result<(), Failure> {
    let path = cfg.out_file(name);
    std::fs::write(&path, bytes).map_err(|e| Failure::data(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_csv_with<F, E>(cfg: &RunConfig, name: &str, f: F) -> Result<(), Failure>
where
    F: FnOnce(&mut Vec<u8>) -> Result<(), E>,
    E: std::fmt::Display,
{
    let mut buf = Vec::new();
    f(&mut buf).map_err(Failure::data)?;
    write_file(cfg, name, &buf)
}

fn write_json<T: Serialize>(cfg: &RunConfig, name: &str, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(Failure::data)?;
    text.push('\n');
    write_file(cfg, name, text.as_bytes())
}

fn display_name(p: &Path) -> String {
    p.display().to_string()
}

fn load_aliases(cfg: &RunConfig) -> Result<CountryAliases, Failure> {
    match &cfg.inputs.aliases {
        Some(p) => {
            let p = require(&Some(p.clone()), "aliases")?;
            CountryAliases::from_reader(open(&p)?, &display_name(&p)).map_err(Failure::data)
        }
        None => Ok(CountryAliases::bundled()),
    }
}

fn load_gazetteer(cfg: &RunConfig) -> Result<Gazetteer, Failure> {
    let i = &cfg.inputs;
    if i.gazetteer.is_none() && i.capitals.is_none() && i.aliases.is_none() {
        return Ok(Gazetteer::bundled());
    }
    let aliases = load_aliases(cfg)?;
    let (terr, terr_name): (Box<dyn std::io::Read>, String) = match &i.gazetteer {
        Some(p) => {
            let p = require(&Some(p.clone()), "gazetteer")?;
            (Box::new(open(&p)?), display_name(&p))
        }
        None => (Box::new(data::GAZETTEER_IT.as_bytes()), "bundled gazetteer".into()),
    };
    let (caps, caps_name): (Box<dyn std::io::Read>, String) = match &i.capitals {
        Some(p) => {
            let p = require(&Some(p.clone()), "capitals")?;
            (Box::new(open(&p)?), display_name(&p))
        }
        None => (Box::new(data::CAPITALS.as_bytes()), "bundled capitals".into()),
    };
    Gazetteer::from_readers(terr, &terr_name, caps, &caps_name, aliases).map_err(Failure::data)
}

fn load_continents(cfg: &RunConfig) -> Result<ContinentMap, Failure> {
    match &cfg.inputs.continents {
        Some(p) => {
            let p = require(&Some(p.clone()), "continents")?;
            ContinentMap::from_reader(open(&p)?, &display_name(&p)).map_err(Failure::data)
        }
        None => Ok(ContinentMap::bundled()),
    }
}

struct Corpus {
    cited: Vec<CitedRecord>,
    citing: Vec<CitingRecord>,
    cited_stats: IngestStats,
    citing_stats: IngestStats,
}

fn load_corpus(cfg: &RunConfig) -> Result<Corpus, Failure> {
    let cited_path = require(&cfg.inputs.cited, "cited")?;
    let citing_path = require(&cfg.inputs.citing, "citing")?;
    let (cited, cited_stats) = load_cited(open(&cited_path)?).map_err(Failure::data)?;
    let (citing, citing_stats) = load_citing(open(&citing_path)?).map_err(Failure::data)?;
    Ok(Corpus {
        cited,
        citing,
        cited_stats,
        citing_stats,
    })
}

const ATTR_CITED: &str = "attr_cited.csv";
const ATTR_CITING_COUNTRY: &str = "attr_citing_country.csv";
const ATTR_CITING_LAU: &str = "attr_citing_lau.csv";

struct Attributions {
    cited: Vec<Attribution>,
    citing_country: Vec<Attribution>,
    citing_lau: Vec<Attribution>,
}

fn attribute(cfg: &RunConfig, corpus: &Corpus, parser: &AddressParser, g: &Gazetteer) -> Attributions {
    let opts = AssignOptions {
        home: Some(cfg.home.clone()),
        dedupe_addresses: cfg.dedupe_addresses,
    };
    let assignable: Vec<&CitingRecord> = corpus.citing.iter().filter(|r| r.is_assignable()).collect();
    Attributions {
        cited: corpus
            .cited
            .iter()
            .map(|r| prevalent_territory_cited(r, parser, g, &opts))
            .collect(),
        citing_country: assignable
            .iter()
            .map(|r| prevalent_country_citing(r, parser, g, &opts))
            .collect(),
        citing_lau: assignable
            .iter()
            .map(|r| prevalent_lau_citing(r, &cfg.home, parser, g, &opts))
            .collect(),
    }
}

fn write_attribution_files(cfg: &RunConfig, a: &Attributions) -> Result<(), Failure> {
    write_csv_with(cfg, ATTR_CITED, |b| write_attributions(b, &a.cited))?;
    write_csv_with(cfg, ATTR_CITING_COUNTRY, |b| write_attributions(b, &a.citing_country))?;
    write_csv_with(cfg, ATTR_CITING_LAU, |b| write_attributions(b, &a.citing_lau))?;

    // outcome ledger: every attributed record is either assigned or has a reason
    let mut ledger: BTreeMap<(&str, &str), u64> = BTreeMap::new();
    for (side, list) in [
        ("cited_lau", &a.cited),
        ("citing_country", &a.citing_country),
        ("citing_lau", &a.citing_lau),
    ] {
        for attr in list {
            let outcome = attr.unassigned.map(|u| u.as_str()).unwrap_or("assigned");
            *ledger.entry((side, outcome)).or_default() += 1;
        }
    }
    write_csv_with(cfg, "assign_ledger.csv", |b| -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(b);
        w.write_record(["attribution", "outcome", "publications"])?;
        for ((side, outcome), n) in &ledger {
            w.write_record([*side, *outcome, &n.to_string()])?;
        }
        w.flush()?;
        Ok(())
    })
}

#[derive(Serialize)]
struct IngestReport<'a> {
    config_hash: String,
    cited: &'a IngestStats,
    citing: &'a IngestStats,
    /// Share of cited records (carrying an address list) on which the two
    /// attribution conventions pick the same country.
    convention_agreement: Option<f64>,
    convention_sample: usize,
}

pub fn ingest(cfg: &RunConfig) -> Result<(), Failure> {
    let corpus = load_corpus(cfg)?;
    let g = load_gazetteer(cfg)?;
    let parser = AddressParser::new(g.aliases().clone());

    let with_addresses: Vec<CitedRecord> = corpus
        .cited
        .iter()
        .filter(|r| !r.addresses.is_empty())
        .cloned()
        .collect();
    let agreement = convention_agreement(&with_addresses, &parser).ok();
    write_json(
        cfg,
        "ingest_stats.json",
        &IngestReport {
            config_hash: cfg.hash(),
            cited: &corpus.cited_stats,
            citing: &corpus.citing_stats,
            convention_agreement: agreement,
            convention_sample: with_addresses.len(),
        },
    )?;

    write_csv_with(cfg, "addresses.csv", |b| -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(b);
        w.write_record(["pub_id", "side", "address", "city", "country_code"])?;
        let rows = corpus
            .cited
            .iter()
            .flat_map(|r| r.affiliations.iter().map(move |a| (&r.pub_id, "cited", a)))
            .chain(
                corpus
                    .citing
                    .iter()
                    .flat_map(|r| r.addresses.iter().map(move |a| (&r.pub_id, "citing", a))),
            );
        for (id, side, raw) in rows {
            let parsed = parser.parse(raw.as_str());
            w.write_record([
                id.as_str(),
                side,
                raw.as_str(),
                parsed.as_ref().map(|p| p.city.as_str()).unwrap_or(""),
                parsed.as_ref().map(|p| p.country_code.as_str()).unwrap_or(""),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;

    let attrs = attribute(cfg, &corpus, &parser, &g);
    write_attribution_files(cfg, &attrs)
}

pub fn assign(cfg: &RunConfig) -> Result<(), Failure> {
    let corpus = load_corpus(cfg)?;
    let g = load_gazetteer(cfg)?;
    let parser = AddressParser::new(g.aliases().clone());
    let attrs = attribute(cfg, &corpus, &parser, &g);
    write_attribution_files(cfg, &attrs)
}

fn read_attr_file(cfg: &RunConfig, name: &str) -> Result<Vec<AttributionRow>, Failure> {
    let path = cfg.out_file(name);
    if !path.is_file() {
        return Err(Failure::usage(format!(
            "{} not found; run `geocite assign` first",
            path.display()
        )));
    }
    read_attributions(open(&path)?).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

struct Resolved {
    corpus: Corpus,
    cited_rows: Vec<AttributionRow>,
    country_rows: Vec<AttributionRow>,
    lau_rows: Vec<AttributionRow>,
    table: CitationTable,
}

fn resolve_table(cfg: &RunConfig) -> Result<Resolved, Failure> {
    let corpus = load_corpus(cfg)?;
    let cited_rows = read_attr_file(cfg, ATTR_CITED)?;
    let country_rows = read_attr_file(cfg, ATTR_CITING_COUNTRY)?;
    let lau_rows = read_attr_file(cfg, ATTR_CITING_LAU)?;
    let table = CitationTable::build(
        &cited_rows.iter().collect::<AttributionIndex>(),
        &country_rows.iter().collect::<AttributionIndex>(),
        &lau_rows.iter().collect::<AttributionIndex>(),
        &corpus.citing,
    );
    Ok(Resolved {
        corpus,
        cited_rows,
        country_rows,
        lau_rows,
        table,
    })
}

fn level_of(cfg: &RunConfig) -> Result<AnalysisLevel, Failure> {
    Ok(match cfg.level.as_str() {
        "national" => AnalysisLevel::National,
        _ => AnalysisLevel::International(match cfg.partition_choice()? {
            PartitionChoice::One(p) => p,
            PartitionChoice::Both => Partition::All,
        }),
    })
}

fn flow_failure(e: FlowError) -> Failure {
    Failure::data(e)
}

#[derive(Serialize)]
struct FlowSummary {
    config_hash: String,
    level: &'static str,
    partition: String,
    total_pairs: u64,
    edges: usize,
    edge_citations: u64,
    dropped: u64,
    drops: BTreeMap<String, u64>,
}

pub fn flows(cfg: &RunConfig) -> Result<(), Failure> {
    let r = resolve_table(cfg)?;
    let g = load_gazetteer(cfg)?;
    let continents = load_continents(cfg)?;
    let ctx = FlowContext {
        gazetteer: &g,
        continents: &continents,
        home: &cfg.home,
    };
    let level = level_of(cfg)?;
    let build = build_flow_edges(&r.table, level, &ctx).map_err(flow_failure)?;
    if build.edge_citations() + build.drops.total() != build.total_pairs {
        return Err(Failure::data("citation pairs are not conserved"));
    }

    let window = match cfg.years {
        Some((a, b)) => YearWindow::new(a, b).map_err(Failure::usage)?,
        None => YearWindow::new(i32::MIN, i32::MAX).map_err(Failure::usage)?,
    };
    let cited_index: AttributionIndex = r.cited_rows.iter().collect();
    let mut cited_masses = compute_masses(
        r.corpus
            .cited
            .iter()
            .map(|rec| (rec.year, cited_index.territory(&rec.pub_id))),
        window,
    );
    let citing_rows = match level {
        AnalysisLevel::National => &r.lau_rows,
        AnalysisLevel::International(_) => &r.country_rows,
    };
    let citing_index: AttributionIndex = citing_rows.iter().collect();
    let mut citing_masses = compute_masses(
        r.corpus
            .citing
            .iter()
            .map(|rec| (rec.year, citing_index.territory(&rec.pub_id))),
        window,
    );
    cited_masses.cover(build.edges.iter().map(|e| e.cited_id.as_str()));
    citing_masses.cover(build.edges.iter().map(|e| e.citing_id.as_str()));

    write_csv_with(cfg, "edges.csv", |b| geocite::flows::write_edges(b, level, &build.edges))?;
    write_csv_with(cfg, "drops.csv", |b| write_drops(b, level, &build.drops))?;
    write_csv_with(cfg, "masses_cited.csv", |b| cited_masses.write_csv(b))?;
    write_csv_with(cfg, "masses_citing.csv", |b| citing_masses.write_csv(b))?;
    write_json(cfg, "flows_summary.json", &flow_summary(cfg, &build))
}

fn flow_summary(cfg: &RunConfig, build: &FlowBuild) -> FlowSummary {
    FlowSummary {
        config_hash: cfg.hash(),
        level: build.level.name(),
        partition: match build.level {
            AnalysisLevel::National => "all".into(),
            AnalysisLevel::International(p) => p.to_string(),
        },
        total_pairs: build.total_pairs,
        edges: build.edges.len(),
        edge_citations: build.edge_citations(),
        dropped: build.drops.total(),
        drops: build
            .drops
            .counts
            .iter()
            .map(|(k, v)| (k.as_str().to_string(), *v))
            .collect(),
    }
}

fn read_masses(path: &Path) -> Result<MassTable, Failure> {
    MassTable::read_csv(open(path)?, &display_name(path)).map_err(Failure::data)
}

fn gravity_failure(e: GravityError) -> Failure {
    match e {
        GravityError::MissingMass(_) | GravityError::Dimension(_) => Failure::data(e),
        GravityError::InvalidBands(_) | GravityError::InvalidFloor(_) => Failure::usage(e),
        _ => Failure::estimation(e),
    }
}

#[derive(Serialize)]
struct FitEntry {
    partition: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    notice: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<FitReport>,
}

#[derive(Serialize)]
struct FitOutput {
    config_hash: String,
    level: String,
    fits: Vec<FitEntry>,
}

pub fn fit(cfg: &RunConfig) -> Result<(), Failure> {
    let edges_path = cfg.input_or_out(&cfg.inputs.edges, "edges.csv");
    let mc_path = cfg.input_or_out(&cfg.inputs.masses_cited, "masses_cited.csv");
    let mj_path = cfg.input_or_out(&cfg.inputs.masses_citing, "masses_citing.csv");
    for p in [&edges_path, &mc_path, &mj_path] {
        require(&Some(p.clone()), "edges/masses")?;
    }
    let rows = read_observations(open(&edges_path)?, &display_name(&edges_path)).map_err(Failure::data)?;
    let n_rows = rows.len();
    let observations: Vec<FlowObservation> = rows
        .into_iter()
        .filter(|(level, _)| *level == cfg.level)
        .map(|(_, o)| o)
        .collect();
    if observations.is_empty() && n_rows > 0 {
        return Err(Failure::data(format!(
            "{} has no edges at level `{}`",
            edges_path.display(),
            cfg.level
        )));
    }
    let cited_masses = read_masses(&mc_path)?;
    let citing_masses = read_masses(&mj_path)?;
    let spec = cfg.distance_spec()?;

    let partitions: Vec<Partition> = match cfg.partition_choice()? {
        PartitionChoice::One(p) => vec![p],
        PartitionChoice::Both => vec![Partition::Continental, Partition::Intercontinental],
    };
    let split = partitions.iter().any(|p| *p != Partition::All);
    let (g, continents) = if split {
        (Some(load_gazetteer(cfg)?), Some(load_continents(cfg)?))
    } else {
        (None, None)
    };

    let mut fits = Vec::new();
    for partition in partitions {
        let subset: Vec<FlowObservation> = match (&g, &continents) {
            (Some(g), Some(c)) => {
                let ctx = FlowContext {
                    gazetteer: g,
                    continents: c,
                    home: &cfg.home,
                };
                let mut kept = Vec::new();
                for o in &observations {
                    if ctx
                        .citing_in_partition(&o.citing_id, partition)
                        .map_err(flow_failure)?
                    {
                        kept.push(o.clone());
                    }
                }
                kept
            }
            _ => observations.clone(),
        };
        if subset.is_empty() {
            fits.push(FitEntry {
                partition: partition.to_string(),
                notice: Some(format!("no {partition} observations")),
                report: None,
            });
            continue;
        }
        let design =
            build_design_from(&subset, &cited_masses, &citing_masses, &spec).map_err(gravity_failure)?;
        let fit = ols_fit(&design).map_err(gravity_failure)?;
        fits.push(FitEntry {
            partition: partition.to_string(),
            notice: None,
            report: Some(fit.report()),
        });
    }

    let output = FitOutput {
        config_hash: cfg.hash(),
        level: cfg.level.clone(),
        fits,
    };
    write_json(cfg, "fit_report.json", &output)?;

    let columns: Vec<(&str, Option<&FitReport>)> = output
        .fits
        .iter()
        .map(|f| (f.partition.as_str(), f.report.as_ref()))
        .collect();
    let mut text = format!(
        "config sha256: {}\nlevel: {}\nspecification: {}\n\n",
        output.config_hash,
        output.level,
        spec.label()
    );
    text.push_str(&render_fit_table(&columns));
    for f in &output.fits {
        if let Some(r) = &f.report {
            for (reason, n) in &r.exclusions {
                text.push_str(&format!("{}: excluded {n} pairs ({reason})\n", f.partition));
            }
        }
    }
    write_file(cfg, "fit_report.txt", text.as_bytes())?;
    print!("{text}");
    Ok(())
}

fn synth_failure(e: SynthError) -> Failure {
    match e {
        SynthError::Fit(g) => gravity_failure(g),
        SynthError::InvalidParams(_) | SynthError::TooFewTerritories(_) | SynthError::DegenerateRegion => {
            Failure::usage(e)
        }
        _ => Failure::data(e),
    }
}

#[derive(Serialize)]
struct ParamSet {
    ln_k: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
}

#[derive(Serialize)]
struct TrialOut {
    seed: u64,
    pairs: usize,
    estimates: ParamSet,
    deltas: geocite::synth::ParamDeltas,
    r2: f64,
}

#[derive(Serialize)]
struct RecoveryOut {
    config_hash: String,
    n_territories: usize,
    count_mode: String,
    truth: ParamSet,
    noise_sigma: f64,
    trials: Vec<TrialOut>,
    median_abs_delta: ParamSet,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn simulate(cfg: &RunConfig) -> Result<(), Failure> {
    let params = cfg.gravity_params()?;
    let world_cfg = cfg.world_config()?;
    let n = cfg.simulate.n_territories;
    let world = generate_world(n, &params, &world_cfg).map_err(synth_failure)?;

    write_csv_with(cfg, "gazetteer.csv", |b| world.write_gazetteer(b))?;
    write_csv_with(cfg, "edges.csv", |b| write_observations(b, "national", &world.observations))?;
    let masses = world.masses();
    write_csv_with(cfg, "masses_cited.csv", |b| masses.write_csv(b))?;
    write_csv_with(cfg, "masses_citing.csv", |b| masses.write_csv(b))?;

    let mut trials = Vec::new();
    for t in 0..cfg.simulate.trials.max(1) {
        let p = geocite::synth::GravityParams {
            seed: params.seed.wrapping_add(t),
            ..params
        };
        let trial = recovery_trial(&p, n, &world_cfg).map_err(synth_failure)?;
        let f = &trial.fit;
        trials.push(TrialOut {
            seed: p.seed,
            pairs: trial.world_pairs,
            estimates: ParamSet {
                ln_k: f.intercept(),
                alpha: f.alpha(),
                beta: f.beta(),
                gamma: f.gamma().unwrap_or(f64::NAN),
            },
            deltas: trial.deltas,
            r2: f.r2(),
        });
    }
    let med = |get: fn(&TrialOut) -> f64| median(trials.iter().map(|t| get(t).abs()).collect());
    let out = RecoveryOut {
        config_hash: cfg.hash(),
        n_territories: n,
        count_mode: cfg.simulate.count_mode.clone(),
        truth: ParamSet {
            ln_k: params.ln_k,
            alpha: params.alpha,
            beta: params.beta,
            gamma: params.gamma,
        },
        noise_sigma: params.noise_sigma,
        median_abs_delta: ParamSet {
            ln_k: med(|t| t.deltas.ln_k),
            alpha: med(|t| t.deltas.alpha),
            beta: med(|t| t.deltas.beta),
            gamma: med(|t| t.deltas.gamma),
        },
        trials,
    };
    write_json(cfg, "recovery.json", &out)?;

    let mut text = format!(
        "config sha256: {}\nterritories: {n}  noise sigma: {}  count mode: {}  trials: {}\n\n",
        out.config_hash,
        out.noise_sigma,
        out.count_mode,
        out.trials.len()
    );
    text.push_str(&format!("{:<10}{:>12}{:>14}{:>16}\n", "parameter", "true", "estimate", "median |delta|"));
    let first = &out.trials[0].estimates;
    for (name, truth, est, med) in [
        ("ln_k", out.truth.ln_k, first.ln_k, out.median_abs_delta.ln_k),
        ("alpha", out.truth.alpha, first.alpha, out.median_abs_delta.alpha),
        ("beta", out.truth.beta, first.beta, out.median_abs_delta.beta),
        ("gamma", out.truth.gamma, first.gamma, out.median_abs_delta.gamma),
    ] {
        text.push_str(&format!("{name:<10}{truth:>12.6}{est:>14.6}{med:>16.6}\n"));
    }
    text.push_str(&format!("R2 (first trial): {:.6}\n", out.trials[0].r2));
    write_file(cfg, "recovery.txt", text.as_bytes())?;
    print!("{text}");
    Ok(())
}

pub fn report(cfg: &RunConfig) -> Result<(), Failure> {
    let r = resolve_table(cfg)?;
    let g = load_gazetteer(cfg)?;
    let continents = load_continents(cfg)?;
    let ctx = FlowContext {
        gazetteer: &g,
        continents: &continents,
        home: &cfg.home,
    };
    let national = build_flow_edges(&r.table, AnalysisLevel::National, &ctx).map_err(flow_failure)?;
    let international = build_flow_edges(&r.table, AnalysisLevel::International(Partition::All), &ctx)
        .map_err(flow_failure)?;

    let mut pub_ids: Vec<&str> = r.corpus.cited.iter().map(|c| c.pub_id.as_str()).collect();
    pub_ids.sort_unstable();
    let mut pub_rows = Vec::new();
    for id in pub_ids {
        match publication_report(id, &national, &international) {
            Ok(row) => pub_rows.push(row),
            Err(FlowError::UnknownPublication(_)) => {}
            Err(e) => return Err(flow_failure(e)),
        }
    }
    let mut terr_rows = Vec::new();
    for id in cited_territories(&r.table) {
        terr_rows.push(territory_report(&id, &r.table, &national, &international).map_err(flow_failure)?);
    }

    write_csv_with(cfg, "report_publications.csv", |b| write_publication_csv(b, &pub_rows))?;
    write_csv_with(cfg, "report_territories.csv", |b| write_territory_csv(b, &terr_rows))?;
    let header = format!("config sha256: {}\n\n", cfg.hash());
    write_file(
        cfg,
        "report_publications.txt",
        (header.clone() + &render_publication_table(&pub_rows)).as_bytes(),
    )?;
    write_file(
        cfg,
        "report_territories.txt",
        (header + &render_territory_table(&terr_rows)).as_bytes(),
    )
}
