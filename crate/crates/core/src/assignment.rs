//! Attribution of each publication to a single prevalent territory.
//!
//! Cited publications use fractional author counting: each author carries a
//! weight of one, split evenly across the distinct territories of their
//! affiliations. Citing publications use plain address frequency over the
//! printed address list. In both cases an exact tie for the maximum leaves the
//! publication unassigned.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::{normalize_name, Gazetteer, Level, Territory};
use crate::ingest::{AddressParser, CitedRecord, CitingRecord, RawAddress};

#[derive(Debug, Error)]
pub enum AssignError {
    #[error("agreement needs at least one record")]
    EmptySample,
    #[error("record `{0}` has no address list")]
    MissingAddressList(String),
    #[error("attribution csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("attribution csv line {line}: {message}")]
    InvalidRow { line: u64, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    AuthorFractional,
    AddressFrequency,
}

impl Basis {
    pub fn as_str(&self) -> &'static str {
        match self {
            Basis::AuthorFractional => "author_fractional",
            Basis::AddressFrequency => "address_frequency",
        }
    }
}

/// Why a publication was left without a territory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unassigned {
    /// No affiliation or address could be parsed.
    NoLocations,
    /// More than one territory shares the maximum.
    Tie,
    /// The winning (city, country) is not in the gazetteer.
    UnmatchedLocality,
    /// The winner lies outside the configured home country.
    ForeignWinner,
    /// LAU attribution requested but the prevalent country is not home.
    NotHomeCountry,
}

impl Unassigned {
    pub fn as_str(&self) -> &'static str {
        match self {
            Unassigned::NoLocations => "no_locations",
            Unassigned::Tie => "tie",
            Unassigned::UnmatchedLocality => "unmatched_locality",
            Unassigned::ForeignWinner => "foreign_winner",
            Unassigned::NotHomeCountry => "not_home_country",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attribution {
    pub pub_id: String,
    pub level: Level,
    pub territory: Option<Territory>,
    /// Winner weight over the counted total; present only with a territory.
    pub share: Option<Ratio<u64>>,
    pub basis: Basis,
    pub unassigned: Option<Unassigned>,
}

impl Attribution {
    fn assigned(pub_id: &str, level: Level, territory: Territory, share: Ratio<u64>, basis: Basis) -> Self {
        Attribution {
            pub_id: pub_id.to_string(),
            level,
            territory: Some(territory),
            share: Some(share),
            basis,
            unassigned: None,
        }
    }

    fn none(pub_id: &str, level: Level, basis: Basis, reason: Unassigned) -> Self {
        Attribution {
            pub_id: pub_id.to_string(),
            level,
            territory: None,
            share: None,
            basis,
            unassigned: Some(reason),
        }
    }

    pub fn territory_id(&self) -> Option<&str> {
        self.territory.as_ref().map(|t| t.id.as_str())
    }

    pub fn share_f64(&self) -> Option<f64> {
        self.share.map(|r| *r.numer() as f64 / *r.denom() as f64)
    }
}

#[derive(Debug, Clone, Default)]
pub struct AssignOptions {
    /// Report cited winners only when they lie in this country.
    pub home: Option<String>,
    /// Collapse repeated identical addresses before counting (off by default).
    pub dedupe_addresses: bool,
}

/// A resolved location: a gazetteer territory, or a parsed locality that the
/// gazetteer does not know about. Both compete for the maximum.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Locality {
    Known(String),
    Unmatched { city: String, country_code: String },
}

/// Weighted tally with deterministic (ordered) keys.
#[derive(Debug)]
struct Tally<K: Ord> {
    weights: BTreeMap<K, Ratio<u64>>,
    units: u64,
}

impl<K: Ord + Clone> Tally<K> {
    /// Each unit (author) spreads weight one over its distinct keys.
    fn fractional<I>(units: I) -> Self
    where
        I: IntoIterator<Item = BTreeSet<K>>,
    {
        let mut weights = BTreeMap::new();
        let mut n = 0;
        for keys in units {
            if keys.is_empty() {
                continue;
            }
            n += 1;
            let part = Ratio::new(1, keys.len() as u64);
            for key in keys {
                *weights.entry(key).or_insert_with(|| Ratio::from_integer(0)) += part;
            }
        }
        Tally { weights, units: n }
    }

    fn frequency<I>(keys: I) -> Self
    where
        I: IntoIterator<Item = K>,
    {
        let mut weights = BTreeMap::new();
        let mut n = 0;
        for key in keys {
            n += 1;
            *weights.entry(key).or_insert_with(|| Ratio::from_integer(0)) += Ratio::from_integer(1);
        }
        Tally { weights, units: n }
    }

    /// Strict argmax with its share of the counted units.
    fn winner(&self) -> Result<(K, Ratio<u64>), Unassigned> {
        let mut best: Option<(&K, Ratio<u64>)> = None;
        let mut tied = false;
        for (key, &w) in &self.weights {
            match best {
                Some((_, bw)) if w < bw => {}
                Some((_, bw)) if w == bw => tied = true,
                _ => {
                    best = Some((key, w));
                    tied = false;
                }
            }
        }
        match best {
            None => Err(Unassigned::NoLocations),
            Some(_) if tied => Err(Unassigned::Tie),
            Some((key, w)) => Ok((key.clone(), w / Ratio::from_integer(self.units))),
        }
    }

    #[cfg(test)]
    fn total_weight(&self) -> Ratio<u64> {
        self.weights.values().fold(Ratio::from_integer(0), |acc, w| acc + w)
    }
}

fn locality(raw: &RawAddress, parser: &AddressParser, g: &Gazetteer) -> Option<Locality> {
    let parsed = parser.parse(raw.as_str())?;
    Some(match g.lookup_city_in(&parsed.city, &parsed.country_code) {
        Some(t) => Locality::Known(t.id.clone()),
        None => Locality::Unmatched {
            city: normalize_name(&parsed.city),
            country_code: parsed.country_code,
        },
    })
}

fn country_of(raw: &RawAddress, parser: &AddressParser) -> Option<String> {
    parser.parse(raw.as_str()).map(|p| p.country_code)
}

fn author_units<K, F>(rec: &CitedRecord, mut key: F) -> Vec<BTreeSet<K>>
where
    K: Ord,
    F: FnMut(&RawAddress) -> Option<K>,
{
    rec.authors
        .iter()
        .map(|a| {
            a.affil_idx
                .iter()
                .filter_map(|&i| rec.affiliations.get(i))
                .filter_map(&mut key)
                .collect()
        })
        .collect()
}

fn address_list(addresses: &[RawAddress], dedupe: bool) -> Vec<&RawAddress> {
    if dedupe {
        let mut seen = BTreeSet::new();
        addresses.iter().filter(|a| seen.insert(a.as_str())).collect()
    } else {
        addresses.iter().collect()
    }
}

/// LAU-level attribution of a cited publication by fractional author counting.
pub fn prevalent_territory_cited(
    rec: &CitedRecord,
    parser: &AddressParser,
    g: &Gazetteer,
    opts: &AssignOptions,
) -> Attribution {
    let basis = Basis::AuthorFractional;
    let tally = Tally::fractional(author_units(rec, |a| locality(a, parser, g)));
    match tally.winner() {
        Err(reason) => Attribution::none(&rec.pub_id, Level::Lau, basis, reason),
        Ok((Locality::Unmatched { .. }, _)) => {
            Attribution::none(&rec.pub_id, Level::Lau, basis, Unassigned::UnmatchedLocality)
        }
        Ok((Locality::Known(id), share)) => {
            let territory = g.get(&id).expect("locality ids come from the gazetteer").clone();
            match &opts.home {
                Some(home) if &territory.country_code != home => {
                    Attribution::none(&rec.pub_id, Level::Lau, basis, Unassigned::ForeignWinner)
                }
                _ => Attribution::assigned(&rec.pub_id, Level::Lau, territory, share, basis),
            }
        }
    }
}

/// Country-level attribution of a cited publication by fractional author
/// counting; returns the ISO code of the winner.
pub fn author_fractional_country(rec: &CitedRecord, parser: &AddressParser) -> Result<String, Unassigned> {
    Tally::fractional(author_units(rec, |a| country_of(a, parser)))
        .winner()
        .map(|(code, _)| code)
}

fn frequency_country(
    addresses: &[RawAddress],
    parser: &AddressParser,
    dedupe: bool,
) -> Result<(String, Ratio<u64>), Unassigned> {
    Tally::frequency(
        address_list(addresses, dedupe)
            .into_iter()
            .filter_map(|a| country_of(a, parser)),
    )
    .winner()
}

/// Country-level attribution of a citing publication by address frequency.
pub fn prevalent_country_citing(
    rec: &CitingRecord,
    parser: &AddressParser,
    g: &Gazetteer,
    opts: &AssignOptions,
) -> Attribution {
    let basis = Basis::AddressFrequency;
    match frequency_country(&rec.addresses, parser, opts.dedupe_addresses) {
        Err(reason) => Attribution::none(&rec.pub_id, Level::Country, basis, reason),
        Ok((code, share)) => match g.country(&code) {
            Some(t) => Attribution::assigned(&rec.pub_id, Level::Country, t.clone(), share, basis),
            None => Attribution::none(&rec.pub_id, Level::Country, basis, Unassigned::UnmatchedLocality),
        },
    }
}

/// LAU-level attribution of a citing publication whose prevalent country is
/// `home`, by frequency over the home-country addresses only.
pub fn prevalent_lau_citing(
    rec: &CitingRecord,
    home: &str,
    parser: &AddressParser,
    g: &Gazetteer,
    opts: &AssignOptions,
) -> Attribution {
    let basis = Basis::AddressFrequency;
    match frequency_country(&rec.addresses, parser, opts.dedupe_addresses) {
        Err(reason) => return Attribution::none(&rec.pub_id, Level::Lau, basis, reason),
        Ok((code, _)) if code != home => {
            return Attribution::none(&rec.pub_id, Level::Lau, basis, Unassigned::NotHomeCountry)
        }
        Ok(_) => {}
    }
    let home_localities = address_list(&rec.addresses, opts.dedupe_addresses)
        .into_iter()
        .filter(|a| country_of(a, parser).as_deref() == Some(home))
        .filter_map(|a| locality(a, parser, g));
    match Tally::frequency(home_localities).winner() {
        Err(reason) => Attribution::none(&rec.pub_id, Level::Lau, basis, reason),
        Ok((Locality::Unmatched { .. }, _)) => {
            Attribution::none(&rec.pub_id, Level::Lau, basis, Unassigned::UnmatchedLocality)
        }
        Ok((Locality::Known(id), share)) => {
            let territory = g.get(&id).expect("locality ids come from the gazetteer").clone();
            Attribution::assigned(&rec.pub_id, Level::Lau, territory, share, basis)
        }
    }
}

/// Fraction of records on which author-fractional and address-frequency
/// counting pick the same country. Two unassigned outcomes agree; one
/// unassigned outcome against an assigned one does not.
pub fn convention_agreement(recs: &[CitedRecord], parser: &AddressParser) -> Result<f64, AssignError> {
    if recs.is_empty() {
        return Err(AssignError::EmptySample);
    }
    let mut agree = 0usize;
    for rec in recs {
        if rec.addresses.is_empty() {
            return Err(AssignError::MissingAddressList(rec.pub_id.clone()));
        }
        let by_authors = author_fractional_country(rec, parser).ok();
        let by_addresses = frequency_country(&rec.addresses, parser, false).ok().map(|(c, _)| c);
        if by_authors == by_addresses {
            agree += 1;
        }
    }
    Ok(agree as f64 / recs.len() as f64)
}

/// One row of the attribution CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionRow {
    pub pub_id: String,
    pub level: String,
    pub territory_id: String,
    pub share: String,
    pub basis: String,
}

impl From<&Attribution> for AttributionRow {
    fn from(a: &Attribution) -> Self {
        AttributionRow {
            pub_id: a.pub_id.clone(),
            level: a.level.as_str().to_string(),
            territory_id: a.territory_id().unwrap_or("").to_string(),
            share: a.share_f64().map(|s| s.to_string()).unwrap_or_default(),
            basis: a.basis.as_str().to_string(),
        }
    }
}

impl AttributionRow {
    pub fn territory(&self) -> Option<&str> {
        Some(self.territory_id.as_str()).filter(|s| !s.is_empty())
    }
}

/// Writes `pub_id,level,territory_id,share,basis`.
pub fn write_attributions<'a, W, I>(w: W, attrs: I) -> Result<(), AssignError>
where
    W: Write,
    I: IntoIterator<Item = &'a Attribution>,
{
    // header written by hand so empty outputs still carry it
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(["pub_id", "level", "territory_id", "share", "basis"])?;
    for a in attrs {
        wtr.serialize(AttributionRow::from(a))?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_attributions<R: Read>(r: R) -> Result<Vec<AttributionRow>, AssignError> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    if header != ["pub_id", "level", "territory_id", "share", "basis"] {
        return Err(AssignError::InvalidRow {
            line: 1,
            message: format!("unexpected header `{}`", header.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (n, row) in rdr.deserialize().enumerate() {
        let row: AttributionRow = row?;
        if row.pub_id.is_empty() {
            return Err(AssignError::InvalidRow {
                line: n as u64 + 2,
                message: "empty pub_id".into(),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}
