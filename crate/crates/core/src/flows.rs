//! Territory-pair citation flows, publication masses and the per-publication
//! and per-territory flow reports.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{Attribution, AttributionRow};
use crate::geodesy::{check_header, great_circle_distance, GeoError, Gazetteer, GeoPoint};
use crate::ingest::CitingRecord;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("territory `{0}` is not in the gazetteer")]
    MissingTerritory(String),
    #[error("no continent recorded for country `{0}`")]
    UnknownContinent(String),
    #[error("publication `{0}` has no recorded citations")]
    UnknownPublication(String),
    #[error("territory `{0}` has no cited publications")]
    UnknownTerritory(String),
    #[error("invalid year window {0}-{1}")]
    InvalidWindow(i32, i32),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("{file}: {message}")]
    InvalidFile { file: String, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    All,
    Continental,
    Intercontinental,
}

impl FromStr for Partition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(Partition::All),
            "continental" => Ok(Partition::Continental),
            "intercontinental" => Ok(Partition::Intercontinental),
            other => Err(format!("unknown partition `{other}`")),
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Partition::All => "all",
            Partition::Continental => "continental",
            Partition::Intercontinental => "intercontinental",
        })
    }
}

/// National flows run LAU to LAU inside the home country; international flows
/// run from a home LAU to a foreign citing country, optionally restricted to
/// citing countries on (or off) the home continent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalysisLevel {
    National,
    International(Partition),
}

impl AnalysisLevel {
    pub fn name(&self) -> &'static str {
        match self {
            AnalysisLevel::National => "national",
            AnalysisLevel::International(_) => "international",
        }
    }
}

/// Country to continent mapping (`country_code,continent`).
#[derive(Debug, Clone, Default)]
pub struct ContinentMap {
    map: HashMap<String, String>,
}

impl ContinentMap {
    pub fn from_reader<R: Read>(r: R, file: &str) -> Result<Self, GeoError> {
        let mut rdr = csv::Reader::from_reader(r);
        check_header(&mut rdr, file, &["country_code", "continent"])?;
        let mut map = HashMap::new();
        for row in rdr.records() {
            let row = row.map_err(|source| GeoError::Csv {
                file: file.to_string(),
                source,
            })?;
            map.insert(row[0].trim().to_ascii_uppercase(), row[1].trim().to_string());
        }
        Ok(ContinentMap { map })
    }

    pub fn bundled() -> Self {
        ContinentMap::from_reader(crate::data::CONTINENTS.as_bytes(), "continents.csv")
            .expect("bundled continent table is well-formed")
    }

    pub fn insert(&mut self, country_code: &str, continent: &str) {
        self.map.insert(country_code.to_string(), continent.to_string());
    }

    pub fn continent(&self, country_code: &str) -> Option<&str> {
        self.map.get(country_code).map(String::as_str)
    }
}

/// Lookup tables shared by flow construction.
#[derive(Debug, Clone, Copy)]
pub struct FlowContext<'a> {
    pub gazetteer: &'a Gazetteer,
    pub continents: &'a ContinentMap,
    pub home: &'a str,
}

impl FlowContext<'_> {
    fn territory(&self, id: &str) -> Result<&crate::geodesy::Territory, FlowError> {
        self.gazetteer
            .get(id)
            .ok_or_else(|| FlowError::MissingTerritory(id.to_string()))
    }

    /// Country code of a territory id, falling back to the id itself for bare
    /// ISO codes that are not gazetteer entries.
    fn country_of(&self, id: &str) -> Result<String, FlowError> {
        match self.gazetteer.get(id) {
            Some(t) => Ok(t.country_code.clone()),
            None if self.gazetteer.capital(id).is_ok() => Ok(id.to_string()),
            None => Err(FlowError::MissingTerritory(id.to_string())),
        }
    }

    /// Whether a citing territory (LAU or country id) falls in `partition`.
    pub fn citing_in_partition(&self, citing_id: &str, partition: Partition) -> Result<bool, FlowError> {
        let country = self.country_of(citing_id)?;
        self.in_partition(&country, partition)
    }

    fn in_partition(&self, citing_country: &str, partition: Partition) -> Result<bool, FlowError> {
        if partition == Partition::All {
            return Ok(true);
        }
        let continent = |code: &str| {
            self.continents
                .continent(code)
                .ok_or_else(|| FlowError::UnknownContinent(code.to_string()))
        };
        let same = continent(citing_country)? == continent(self.home)?;
        Ok(same == (partition == Partition::Continental))
    }
}

/// Publication id to attributed territory id (absent when unassigned).
#[derive(Debug, Clone, Default)]
pub struct AttributionIndex {
    map: HashMap<String, Option<String>>,
}

impl AttributionIndex {
    pub fn insert(&mut self, pub_id: &str, territory: Option<&str>) {
        self.map.insert(pub_id.to_string(), territory.map(String::from));
    }

    pub fn contains(&self, pub_id: &str) -> bool {
        self.map.contains_key(pub_id)
    }

    pub fn territory(&self, pub_id: &str) -> Option<&str> {
        self.map.get(pub_id).and_then(|t| t.as_deref())
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

impl<'a> FromIterator<&'a Attribution> for AttributionIndex {
    fn from_iter<I: IntoIterator<Item = &'a Attribution>>(iter: I) -> Self {
        let mut idx = AttributionIndex::default();
        for a in iter {
            idx.insert(&a.pub_id, a.territory_id());
        }
        idx
    }
}

impl<'a> FromIterator<&'a AttributionRow> for AttributionIndex {
    fn from_iter<I: IntoIterator<Item = &'a AttributionRow>>(iter: I) -> Self {
        let mut idx = AttributionIndex::default();
        for a in iter {
            idx.insert(&a.pub_id, a.territory());
        }
        idx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// The cited pub id is not in the cited corpus.
    UnknownCitedPublication,
    /// The same citing record lists the cited pub id more than once.
    DuplicatePair,
    CitedUnassigned,
    CitingUnassigned,
    /// Citing publication is in the home country but has no LAU.
    CitingLauUnassigned,
    /// Home-country citation at the international level.
    DomesticCitation,
    /// Foreign citation at the national level.
    ForeignCitation,
    OutsidePartition,
}

impl DropReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            DropReason::UnknownCitedPublication => "unknown_cited_publication",
            DropReason::DuplicatePair => "duplicate_pair",
            DropReason::CitedUnassigned => "cited_unassigned",
            DropReason::CitingUnassigned => "citing_unassigned",
            DropReason::CitingLauUnassigned => "citing_lau_unassigned",
            DropReason::DomesticCitation => "domestic_citation",
            DropReason::ForeignCitation => "foreign_citation",
            DropReason::OutsidePartition => "outside_partition",
        }
    }
}

/// One (citing, cited) pair from the input with everything needed to place it.
#[derive(Debug, Clone, PartialEq)]
pub struct CitationPair {
    pub cited_pub: String,
    pub citing_pub: String,
    pub citing_year: i32,
    pub cited_territory: Option<String>,
    pub citing_country: Option<String>,
    pub citing_lau: Option<String>,
    /// Set for pairs that cannot enter any analysis level.
    pub rejected: Option<DropReason>,
}

/// Every input citation pair, resolved against the attributions.
#[derive(Debug, Clone, Default)]
pub struct CitationTable {
    pub pairs: Vec<CitationPair>,
}

impl CitationTable {
    /// `citing_country` maps citing pubs to COUNTRY territories and `citing_lau`
    /// maps home-country citing pubs to LAU territories.
    pub fn build(
        cited: &AttributionIndex,
        citing_country: &AttributionIndex,
        citing_lau: &AttributionIndex,
        citing: &[CitingRecord],
    ) -> Self {
        let mut pairs = Vec::new();
        for rec in citing {
            let mut seen = HashSet::new();
            for cited_pub in &rec.cites {
                let rejected = if !seen.insert(cited_pub.as_str()) {
                    Some(DropReason::DuplicatePair)
                } else if !cited.contains(cited_pub) {
                    Some(DropReason::UnknownCitedPublication)
                } else {
                    None
                };
                pairs.push(CitationPair {
                    cited_pub: cited_pub.clone(),
                    citing_pub: rec.pub_id.clone(),
                    citing_year: rec.year,
                    cited_territory: cited.territory(cited_pub).map(String::from),
                    citing_country: citing_country.territory(&rec.pub_id).map(String::from),
                    citing_lau: citing_lau.territory(&rec.pub_id).map(String::from),
                    rejected,
                });
            }
        }
        CitationTable { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowEdge {
    pub cited_id: String,
    pub citing_id: String,
    pub citations: u64,
    pub distance_km: f64,
}

/// A single citation placed on an edge.
#[derive(Debug, Clone, PartialEq)]
pub struct CitationLink {
    pub cited_pub: String,
    pub citing_pub: String,
    pub cited_territory: String,
    pub citing_territory: String,
    pub distance_km: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DropLedger {
    pub counts: BTreeMap<DropReason, u64>,
}

impl DropLedger {
    fn record(&mut self, reason: DropReason) {
        *self.counts.entry(reason).or_default() += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn get(&self, reason: DropReason) -> u64 {
        self.counts.get(&reason).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone)]
pub struct FlowBuild {
    pub level: AnalysisLevel,
    /// Sorted by (cited_id, citing_id).
    pub edges: Vec<FlowEdge>,
    pub links: Vec<CitationLink>,
    pub drops: DropLedger,
    pub total_pairs: u64,
}

impl FlowBuild {
    pub fn edge_citations(&self) -> u64 {
        self.edges.iter().map(|e| e.citations).sum()
    }
}

/// Aggregates the citation table into one edge per (cited, citing) territory
/// pair at the requested level. Every input pair ends up either on an edge or
/// in the drop ledger.
pub fn build_flow_edges(
    table: &CitationTable,
    level: AnalysisLevel,
    ctx: &FlowContext<'_>,
) -> Result<FlowBuild, FlowError> {
    let mut drops = DropLedger::default();
    let mut links = Vec::new();
    let mut counts: BTreeMap<(String, String), u64> = BTreeMap::new();
    let mut distances: HashMap<(String, String), f64> = HashMap::new();

    for pair in &table.pairs {
        let placed = place(pair, level, ctx)?;
        let (cited, citing, endpoint) = match placed {
            Err(reason) => {
                drops.record(reason);
                continue;
            }
            Ok(p) => p,
        };
        let key = (cited.to_string(), citing.to_string());
        let distance = match distances.get(&key) {
            Some(&d) => d,
            None => {
                let origin = ctx.territory(cited)?.centroid;
                let d = great_circle_distance(origin, endpoint);
                distances.insert(key.clone(), d);
                d
            }
        };
        *counts.entry(key).or_default() += 1;
        links.push(CitationLink {
            cited_pub: pair.cited_pub.clone(),
            citing_pub: pair.citing_pub.clone(),
            cited_territory: cited.to_string(),
            citing_territory: citing.to_string(),
            distance_km: distance,
        });
    }

    let edges = counts
        .into_iter()
        .map(|(key, citations)| {
            let distance_km = distances[&key];
            FlowEdge {
                cited_id: key.0,
                citing_id: key.1,
                citations,
                distance_km,
            }
        })
        .collect();
    Ok(FlowBuild {
        level,
        edges,
        links,
        drops,
        total_pairs: table.pairs.len() as u64,
    })
}

/// Resolves the (cited, citing) territories of a pair and the endpoint the
/// distance is measured to.
fn place<'p>(
    pair: &'p CitationPair,
    level: AnalysisLevel,
    ctx: &FlowContext<'_>,
) -> Result<Result<(&'p str, &'p str, GeoPoint), DropReason>, FlowError> {
    if let Some(reason) = pair.rejected {
        return Ok(Err(reason));
    }
    let Some(cited) = pair.cited_territory.as_deref() else {
        return Ok(Err(DropReason::CitedUnassigned));
    };
    let Some(country_id) = pair.citing_country.as_deref() else {
        return Ok(Err(DropReason::CitingUnassigned));
    };
    let country = ctx.country_of(country_id)?;
    let domestic = country == ctx.home;
    match level {
        AnalysisLevel::National => {
            if !domestic {
                return Ok(Err(DropReason::ForeignCitation));
            }
            let Some(lau) = pair.citing_lau.as_deref() else {
                return Ok(Err(DropReason::CitingLauUnassigned));
            };
            let endpoint = ctx.territory(lau)?.centroid;
            Ok(Ok((cited, lau, endpoint)))
        }
        AnalysisLevel::International(partition) => {
            if domestic {
                return Ok(Err(DropReason::DomesticCitation));
            }
            if !ctx.in_partition(&country, partition)? {
                return Ok(Err(DropReason::OutsidePartition));
            }
            let endpoint = ctx.gazetteer.country_capital(&country)?;
            Ok(Ok((cited, country_id, endpoint)))
        }
    }
}

/// Keeps the edges whose citing territory falls in `partition` relative to
/// the home continent.
pub fn partition_edges(
    edges: &[FlowEdge],
    partition: Partition,
    ctx: &FlowContext<'_>,
) -> Result<Vec<FlowEdge>, FlowError> {
    let mut kept = Vec::new();
    for e in edges {
        if ctx.citing_in_partition(&e.citing_id, partition)? {
            kept.push(e.clone());
        }
    }
    Ok(kept)
}

/// Inclusive range of publication years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearWindow {
    pub first: i32,
    pub last: i32,
}

impl YearWindow {
    pub fn new(first: i32, last: i32) -> Result<Self, FlowError> {
        if first > last {
            return Err(FlowError::InvalidWindow(first, last));
        }
        Ok(YearWindow { first, last })
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.first..=self.last).contains(&year)
    }
}

/// Publication counts per territory.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MassTable {
    masses: BTreeMap<String, u64>,
}

impl MassTable {
    pub fn get(&self, id: &str) -> Option<u64> {
        self.masses.get(id).copied()
    }

    pub fn insert(&mut self, id: &str, mass: u64) {
        self.masses.insert(id.to_string(), mass);
    }

    /// Adds zero entries for territories without publications in the window.
    pub fn cover<'a, I: IntoIterator<Item = &'a str>>(&mut self, ids: I) {
        for id in ids {
            self.masses.entry(id.to_string()).or_insert(0);
        }
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.masses.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), FlowError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["territory_id", "mass"])?;
        for (id, m) in &self.masses {
            wtr.write_record([id.as_str(), &m.to_string()])?;
        }
        wtr.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, file: &str) -> Result<Self, FlowError> {
        let mut rdr = csv::Reader::from_reader(r);
        check_header(&mut rdr, file, &["territory_id", "mass"])?;
        let mut table = MassTable::default();
        for (n, row) in rdr.records().enumerate() {
            let row = row?;
            let mass = row[1].trim().parse().map_err(|_| FlowError::InvalidFile {
                file: file.to_string(),
                message: format!("line {}: bad mass `{}`", n + 2, &row[1]),
            })?;
            table.insert(row[0].trim(), mass);
        }
        Ok(table)
    }
}

/// Counts attributed publications per territory within `window`.
pub fn compute_masses<'a, I>(records: I, window: YearWindow) -> MassTable
where
    I: IntoIterator<Item = (i32, Option<&'a str>)>,
{
    let mut table = MassTable::default();
    for (year, territory) in records {
        if let (true, Some(id)) = (window.contains(year), territory) {
            *table.masses.entry(id.to_string()).or_default() += 1;
        }
    }
    table
}

pub fn write_edges<W: Write>(w: W, level: AnalysisLevel, edges: &[FlowEdge]) -> Result<(), FlowError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["level", "cited_id", "citing_id", "citations", "distance_km"])?;
    for e in edges {
        wtr.write_record([
            level.name(),
            &e.cited_id,
            &e.citing_id,
            &e.citations.to_string(),
            &e.distance_km.to_string(),
        ])?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads an edges CSV, returning the level name of each row with the edge.
pub fn read_edges<R: Read>(r: R, file: &str) -> Result<Vec<(String, FlowEdge)>, FlowError> {
    let mut rdr = csv::Reader::from_reader(r);
    check_header(&mut rdr, file, &["level", "cited_id", "citing_id", "citations", "distance_km"])?;
    let mut out = Vec::new();
    for (n, row) in rdr.records().enumerate() {
        let row = row?;
        let bad = |what: &str| FlowError::InvalidFile {
            file: file.to_string(),
            message: format!("line {}: bad {what}", n + 2),
        };
        let citations: u64 = row[3].trim().parse().map_err(|_| bad("citations"))?;
        let distance_km: f64 = row[4].trim().parse().map_err(|_| bad("distance"))?;
        if citations == 0 || !(distance_km >= 0.0) || !distance_km.is_finite() {
            return Err(bad("edge values"));
        }
        out.push((
            row[0].trim().to_string(),
            FlowEdge {
                cited_id: row[1].trim().to_string(),
                citing_id: row[2].trim().to_string(),
                citations,
                distance_km,
            },
        ));
    }
    Ok(out)
}

pub fn write_drops<W: Write>(w: W, level: AnalysisLevel, drops: &DropLedger) -> Result<(), FlowError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["level", "reason", "pairs"])?;
    for (reason, n) in &drops.counts {
        wtr.write_record([level.name(), reason.as_str(), &n.to_string()])?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Mean of distances summed in sorted order so the result does not depend on
/// input order.
fn mean_distance<I: IntoIterator<Item = f64>>(values: I) -> Option<f64> {
    let mut v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(v.iter().sum::<f64>() / v.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelSummary {
    pub citations: u64,
    pub avg_distance_km: Option<f64>,
}

impl LevelSummary {
    fn from_distances<I: IntoIterator<Item = f64>>(values: I) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        LevelSummary {
            citations: v.len() as u64,
            avg_distance_km: mean_distance(v),
        }
    }
}

/// Citations received by one cited publication. `international` includes the
/// home-country citations (measured LAU to LAU); `foreign` excludes them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PublicationRow {
    pub pub_id: String,
    pub international: LevelSummary,
    pub foreign: LevelSummary,
    pub national: LevelSummary,
}

/// `national` must be a national-level build and `international` an
/// international build with partition ALL.
pub fn publication_report(
    pub_id: &str,
    national: &FlowBuild,
    international: &FlowBuild,
) -> Result<PublicationRow, FlowError> {
    let of = |b: &FlowBuild| -> Vec<f64> {
        b.links
            .iter()
            .filter(|l| l.cited_pub == pub_id)
            .map(|l| l.distance_km)
            .collect()
    };
    let (nat, foreign) = (of(national), of(international));
    if nat.is_empty() && foreign.is_empty() {
        return Err(FlowError::UnknownPublication(pub_id.to_string()));
    }
    Ok(PublicationRow {
        pub_id: pub_id.to_string(),
        international: LevelSummary::from_distances(foreign.iter().chain(&nat).copied()),
        foreign: LevelSummary::from_distances(foreign),
        national: LevelSummary::from_distances(nat),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TerritoryRow {
    pub territory_id: String,
    /// Cited publications of the territory with at least one citing pair.
    pub publications_cited: u64,
    pub international: LevelSummary,
    pub foreign: LevelSummary,
    pub national: LevelSummary,
    /// Fraction of cited publications whose every citing publication is
    /// attributed to this same territory.
    pub local_only_share: f64,
}

pub fn territory_report(
    territory_id: &str,
    table: &CitationTable,
    national: &FlowBuild,
    international: &FlowBuild,
) -> Result<TerritoryRow, FlowError> {
    let mut citing_of: BTreeMap<&str, Vec<Option<&str>>> = BTreeMap::new();
    for p in &table.pairs {
        if p.cited_territory.as_deref() == Some(territory_id)
            && !matches!(p.rejected, Some(DropReason::UnknownCitedPublication))
        {
            citing_of
                .entry(p.cited_pub.as_str())
                .or_default()
                .push(p.citing_lau.as_deref());
        }
    }
    if citing_of.is_empty() {
        return Err(FlowError::UnknownTerritory(territory_id.to_string()));
    }
    let local_only = citing_of
        .values()
        .filter(|c| c.iter().all(|lau| *lau == Some(territory_id)))
        .count();

    let of = |b: &FlowBuild| -> Vec<f64> {
        b.links
            .iter()
            .filter(|l| l.cited_territory == territory_id)
            .map(|l| l.distance_km)
            .collect()
    };
    let (nat, foreign) = (of(national), of(international));
    Ok(TerritoryRow {
        territory_id: territory_id.to_string(),
        publications_cited: citing_of.len() as u64,
        international: LevelSummary::from_distances(foreign.iter().chain(&nat).copied()),
        foreign: LevelSummary::from_distances(foreign),
        national: LevelSummary::from_distances(nat),
        local_only_share: local_only as f64 / citing_of.len() as f64,
    })
}

/// Territories that have at least one cited publication in the table.
pub fn cited_territories(table: &CitationTable) -> Vec<String> {
    let set: BTreeSet<&str> = table
        .pairs
        .iter()
        .filter(|p| !matches!(p.rejected, Some(DropReason::UnknownCitedPublication)))
        .filter_map(|p| p.cited_territory.as_deref())
        .collect();
    set.into_iter().map(String::from).collect()
}

fn fmt_km(v: Option<f64>) -> String {
    v.map(|d| format!("{d:.0}")).unwrap_or_else(|| "-".into())
}

pub fn render_publication_table(rows: &[PublicationRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<20} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "pub_id", "intl_cit", "intl_avg_km", "foreign_cit", "foreign_km", "natl_cit", "natl_avg_km"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<20} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12}",
            r.pub_id,
            r.international.citations,
            fmt_km(r.international.avg_distance_km),
            r.foreign.citations,
            fmt_km(r.foreign.avg_distance_km),
            r.national.citations,
            fmt_km(r.national.avg_distance_km),
        );
    }
    out.push_str("intl_* include home-country citing publications; foreign_* exclude them\n");
    out
}

pub fn render_territory_table(rows: &[TerritoryRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<24} {:>10} {:>10} {:>12} {:>12} {:>10} {:>12} {:>11}",
        "territory", "pubs", "intl_cit", "intl_avg_km", "foreign_km", "natl_cit", "natl_avg_km", "local_only"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<24} {:>10} {:>10} {:>12} {:>12} {:>10} {:>12} {:>10.1}%",
            r.territory_id,
            r.publications_cited,
            r.international.citations,
            fmt_km(r.international.avg_distance_km),
            fmt_km(r.foreign.avg_distance_km),
            r.national.citations,
            fmt_km(r.national.avg_distance_km),
            r.local_only_share * 100.0,
        );
    }
    out.push_str("intl_* include home-country citing publications; foreign_km excludes them\n");
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_publication_csv<W: Write>(w: W, rows: &[PublicationRow]) -> Result<(), FlowError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "pub_id",
        "intl_citations",
        "intl_avg_distance_km",
        "foreign_citations",
        "foreign_avg_distance_km",
        "national_citations",
        "national_avg_distance_km",
    ])?;
    for r in rows {
        wtr.write_record([
            r.pub_id.clone(),
            r.international.citations.to_string(),
            opt(r.international.avg_distance_km),
            r.foreign.citations.to_string(),
            opt(r.foreign.avg_distance_km),
            r.national.citations.to_string(),
            opt(r.national.avg_distance_km),
        ])?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_territory_csv<W: Write>(w: W, rows: &[TerritoryRow]) -> Result<(), FlowError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "territory_id",
        "publications_cited",
        "intl_citations",
        "intl_avg_distance_km",
        "foreign_citations",
        "foreign_avg_distance_km",
        "national_citations",
        "national_avg_distance_km",
        "local_only_share",
    ])?;
    for r in rows {
        wtr.write_record([
            r.territory_id.clone(),
            r.publications_cited.to_string(),
            r.international.citations.to_string(),
            opt(r.international.avg_distance_km),
            r.foreign.citations.to_string(),
            opt(r.foreign.avg_distance_km),
            r.national.citations.to_string(),
            opt(r.national.avg_distance_km),
            r.local_only_share.to_string(),
        ])?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx_parts() -> (Gazetteer, ContinentMap) {
        (Gazetteer::bundled(), ContinentMap::bundled())
    }

    fn index(pairs: &[(&str, Option<&str>)]) -> AttributionIndex {
        let mut idx = AttributionIndex::default();
        for (p, t) in pairs {
            idx.insert(p, *t);
        }
        idx
    }

    fn citing(id: &str, cites: &[&str]) -> CitingRecord {
        CitingRecord {
            pub_id: id.into(),
            year: 2015,
            addresses: vec![],
            cites: cites.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn empty_table_gives_no_edges() {
        let (g, c) = ctx_parts();
        let ctx = FlowContext {
            gazetteer: &g,
            continents: &c,
            home: "IT",
        };
        let b = build_flow_edges(&CitationTable::default(), AnalysisLevel::National, &ctx).unwrap();
        assert!(b.edges.is_empty());
        assert_eq!(b.total_pairs, 0);
    }

    #[test]
    fn three_citations_one_edge() {
        let (g, c) = ctx_parts();
        let ctx = FlowContext {
            gazetteer: &g,
            continents: &c,
            home: "IT",
        };
        let cited = index(&[("p1", Some("it-pisa")), ("p2", Some("it-pisa"))]);
        let countries = index(&[("c1", Some("IT")), ("c2", Some("IT")), ("c3", Some("IT"))]);
        let laus = index(&[("c1", Some("it-roma")), ("c2", Some("it-roma")), ("c3", Some("it-roma"))]);
        let recs = vec![citing("c1", &["p1"]), citing("c2", &["p1"]), citing("c3", &["p2"])];
        let table = CitationTable::build(&cited, &countries, &laus, &recs);
        let b = build_flow_edges(&table, AnalysisLevel::National, &ctx).unwrap();
        assert_eq!(b.edges.len(), 1);
        assert_eq!(b.edges[0].citations, 3);
        let pisa = g.get("it-pisa").unwrap().centroid;
        let rome = g.get("it-roma").unwrap().centroid;
        assert_eq!(b.edges[0].distance_km, great_circle_distance(pisa, rome));

        let intl = build_flow_edges(&table, AnalysisLevel::International(Partition::All), &ctx).unwrap();
        assert!(intl.edges.is_empty());
        assert_eq!(intl.drops.get(DropReason::DomesticCitation), 3);
    }

    #[test]
    fn missing_territory_is_an_error() {
        let (g, c) = ctx_parts();
        let ctx = FlowContext {
            gazetteer: &g,
            continents: &c,
            home: "IT",
        };
        let cited = index(&[("p1", Some("it-atlantis"))]);
        let countries = index(&[("c1", Some("FR"))]);
        let table = CitationTable::build(&cited, &countries, &AttributionIndex::default(), &[citing("c1", &["p1"])]);
        let err = build_flow_edges(&table, AnalysisLevel::International(Partition::All), &ctx).unwrap_err();
        assert!(matches!(err, FlowError::MissingTerritory(ref id) if id == "it-atlantis"), "{err}");
    }

    #[test]
    fn masses_respect_window() {
        let w = YearWindow::new(2010, 2012).unwrap();
        assert!(compute_masses(Vec::new(), w).is_empty());
        let recs = vec![
            (2010, Some("it-pisa")),
            (2011, Some("it-pisa")),
            (2012, Some("it-pisa")),
            (2012, Some("it-pisa")),
            (2013, Some("it-pisa")),
            (2011, None),
        ];
        let m = compute_masses(recs, w);
        assert_eq!(m.get("it-pisa"), Some(4));
        assert_eq!(m.len(), 1);
        assert!(YearWindow::new(2013, 2010).is_err());
    }

    #[test]
    fn mass_csv_round_trip() {
        let mut m = MassTable::default();
        m.insert("a", 3);
        m.insert("b", 0);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(MassTable::read_csv(buf.as_slice(), "m").unwrap(), m);
        assert!(MassTable::read_csv("id,mass\n".as_bytes(), "m").is_err());
    }

    #[test]
    fn publication_means() {
        let link = |d: f64| CitationLink {
            cited_pub: "p".into(),
            citing_pub: "c".into(),
            cited_territory: "t".into(),
            citing_territory: "u".into(),
            distance_km: d,
        };
        let empty = FlowBuild {
            level: AnalysisLevel::National,
            edges: vec![],
            links: vec![],
            drops: DropLedger::default(),
            total_pairs: 0,
        };
        let national = FlowBuild {
            links: vec![link(0.0)],
            ..empty.clone()
        };
        let row = publication_report("p", &national, &empty).unwrap();
        assert_eq!(row.national.citations, 1);
        assert_eq!(row.national.avg_distance_km, Some(0.0));
        assert_eq!(row.foreign.avg_distance_km, None);

        let intl = FlowBuild {
            links: vec![link(100.0), link(300.0)],
            ..empty.clone()
        };
        let row = publication_report("p", &empty, &intl).unwrap();
        assert_eq!(row.foreign.avg_distance_km, Some(200.0));
        assert_eq!(row.international.citations, 2);
        assert!(matches!(
            publication_report("q", &national, &intl),
            Err(FlowError::UnknownPublication(_))
        ));
    }
}
