//! Publication records and affiliation address reduction.
//!
//! Addresses are reduced to a (city, country) pair with a few heuristics
//! modelled on Web of Science address lines:
//!
//! * the country is the longest alias-table match on a suffix of the final
//!   comma-separated segment, so `NJ USA` and `NJ 08544 USA` resolve to the
//!   United States and the state prefix is discarded;
//! * the city is the closest segment before the country that is non-empty
//!   after postal codes are removed and is not a region qualifier;
//! * a postal code is any whitespace-separated token containing a digit
//!   (`I-40127`, `D-52062`, `137701`, `B15`, `2TH`);
//! * a region qualifier is a lone two-letter upper-case token (US states,
//!   Canadian provinces) or a known county/state abbreviation such as
//!   `W Midlands` or `NSW`.
//!
//! Addresses whose country is not in the alias table are rejected.

use std::collections::HashSet;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::{normalize_name, CountryAliases};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("reading {what}: {source}")]
    Io {
        what: String,
        #[source]
        source: std::io::Error,
    },
}

/// One full affiliation line as it appears in a byline.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct RawAddress(String);

impl RawAddress {
    pub fn new(text: impl Into<String>) -> Option<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            None
        } else {
            Some(RawAddress(text))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for RawAddress {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        RawAddress::new(s).ok_or_else(|| "empty address".to_string())
    }
}

impl From<RawAddress> for String {
    fn from(a: RawAddress) -> String {
        a.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Author {
    pub key: String,
    /// Indices into the record's affiliation list.
    pub affil_idx: Vec<usize>,
}

/// A cited publication: every author is linked to one or more affiliations.
///
/// `addresses` optionally carries the publication's address list as printed
/// (with repetitions), which lets both attribution conventions run on the
/// same record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitedRecord {
    pub pub_id: String,
    pub year: i32,
    pub affiliations: Vec<RawAddress>,
    pub authors: Vec<Author>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub addresses: Vec<RawAddress>,
}

impl CitedRecord {
    fn validate(&self) -> Result<(), String> {
        if self.pub_id.trim().is_empty() {
            return Err("empty pub_id".into());
        }
        if self.authors.is_empty() {
            return Err("no authors".into());
        }
        for author in &self.authors {
            if author.affil_idx.is_empty() {
                return Err(format!("author `{}` has no affiliation", author.key));
            }
            if let Some(&bad) = author.affil_idx.iter().find(|&&i| i >= self.affiliations.len()) {
                return Err(format!(
                    "author `{}` references affiliation {bad} of {}",
                    author.key,
                    self.affiliations.len()
                ));
            }
        }
        Ok(())
    }

    /// The address-list view of this record, if it carries one.
    pub fn citing_view(&self) -> Option<CitingRecord> {
        if self.addresses.is_empty() {
            return None;
        }
        Some(CitingRecord {
            pub_id: self.pub_id.clone(),
            year: self.year,
            addresses: self.addresses.clone(),
            cites: Vec::new(),
        })
    }
}

/// A citing publication: a bare address list plus the cited pub ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitingRecord {
    pub pub_id: String,
    pub year: i32,
    pub addresses: Vec<RawAddress>,
    pub cites: Vec<String>,
}

impl CitingRecord {
    pub fn is_assignable(&self) -> bool {
        !self.addresses.is_empty()
    }

    fn validate(&self) -> Result<(), String> {
        if self.pub_id.trim().is_empty() {
            return Err("empty pub_id".into());
        }
        if self.cites.is_empty() {
            return Err("empty cites list".into());
        }
        if self.cites.iter().any(|c| c.trim().is_empty()) {
            return Err("empty cited pub_id".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub line: u64,
    pub message: String,
}

/// Counters reported by the loaders. Blank lines are ignored and not counted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestStats {
    pub lines: u64,
    pub records: u64,
    pub skipped: u64,
    /// Loaded records with an empty address list.
    pub unassignable: u64,
    pub diagnostics: Vec<Diagnostic>,
}

impl IngestStats {
    fn skip(&mut self, line: u64, message: String) {
        self.skipped += 1;
        self.diagnostics.push(Diagnostic { line, message });
    }
}

pub fn load_cited<R: BufRead>(reader: R) -> Result<(Vec<CitedRecord>, IngestStats), IngestError> {
    load_jsonl(reader, "cited records", |rec: &CitedRecord| {
        rec.validate().map(|_| (rec.pub_id.clone(), false))
    })
}

pub fn load_citing<R: BufRead>(reader: R) -> Result<(Vec<CitingRecord>, IngestStats), IngestError> {
    load_jsonl(reader, "citing records", |rec: &CitingRecord| {
        rec.validate().map(|_| (rec.pub_id.clone(), !rec.is_assignable()))
    })
}

fn load_jsonl<R, T, F>(reader: R, what: &str, check: F) -> Result<(Vec<T>, IngestStats), IngestError>
where
    R: BufRead,
    T: for<'de> Deserialize<'de>,
    F: Fn(&T) -> Result<(String, bool), String>,
{
    let mut stats = IngestStats::default();
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| IngestError::Io {
            what: what.to_string(),
            source,
        })?;
        let line_no = n as u64 + 1;
        if line.trim().is_empty() {
            continue;
        }
        stats.lines += 1;
        let record: T = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                stats.skip(line_no, format!("malformed record: {e}"));
                continue;
            }
        };
        match check(&record) {
            Ok((id, unassignable)) => {
                if !seen.insert(id.clone()) {
                    stats.skip(line_no, format!("duplicate pub_id `{id}`"));
                    continue;
                }
                if unassignable {
                    stats.unassignable += 1;
                }
                stats.records += 1;
                records.push(record);
            }
            Err(msg) => stats.skip(line_no, msg),
        }
    }
    Ok((records, stats))
}

/// A reduced address.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ParsedAddress {
    pub city: String,
    /// Canonical country name from the alias table.
    pub country: String,
    pub country_code: String,
}

impl ParsedAddress {
    pub fn render(&self) -> String {
        format!("{}, {}", self.city, self.country)
    }
}

const REGION_QUALIFIERS: &[&str] = &[
    // UK counties and metropolitan areas as abbreviated in WoS
    "avon", "beds", "berks", "bucks", "cambs", "cheshire", "cleveland", "clwyd", "co durham",
    "cornwall", "cumbria", "derbys", "devon", "dorset", "dyfed", "e sussex", "e yorkshire",
    "essex", "fife", "glam", "glos", "grampian", "greater manchester", "gwynedd", "hants",
    "herts", "kent", "lancs", "leics", "lincs", "lothian", "m glam", "merseyside", "middx",
    "midlothian", "n yorkshire", "norfolk", "northants", "notts", "oxon", "powys", "s glam",
    "s yorkshire", "shrops", "somerset", "staffs", "strathclyde", "suffolk", "surrey",
    "tayside", "tyne & wear", "w midlands", "w sussex", "w yorkshire", "warks", "wilts",
    "worcs",
    // Australian states
    "act", "nsw", "qld", "tas", "vic",
];

/// Reduces affiliation lines to (city, country) pairs.
#[derive(Debug, Clone)]
pub struct AddressParser {
    aliases: CountryAliases,
    regions: HashSet<&'static str>,
}

impl AddressParser {
    pub fn new(aliases: CountryAliases) -> Self {
        AddressParser {
            aliases,
            regions: REGION_QUALIFIERS.iter().copied().collect(),
        }
    }

    pub fn bundled() -> Self {
        AddressParser::new(CountryAliases::bundled())
    }

    pub fn aliases(&self) -> &CountryAliases {
        &self.aliases
    }

    pub fn parse(&self, text: &str) -> Option<ParsedAddress> {
        let segments: Vec<&str> = text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        let (last, rest) = segments.split_last()?;
        let country_code = self.match_country(last)?;
        let country = self
            .aliases
            .canonical_name(&country_code)
            .unwrap_or(&country_code)
            .to_string();

        let city = rest.iter().rev().find_map(|seg| {
            let tokens: Vec<&str> = seg.split_whitespace().filter(|t| !is_postal_token(t)).collect();
            if tokens.is_empty() || self.is_region(&tokens) {
                None
            } else {
                Some(tokens.join(" "))
            }
        })?;
        Some(ParsedAddress {
            city,
            country,
            country_code,
        })
    }

    fn match_country(&self, segment: &str) -> Option<String> {
        let tokens: Vec<&str> = segment.split_whitespace().collect();
        (0..tokens.len()).find_map(|start| {
            let candidate = tokens[start..].join(" ");
            self.aliases.resolve(&candidate).map(String::from).filter(|_| {
                // prefix tokens may only be state codes or postal codes
                tokens[..start]
                    .iter()
                    .all(|t| is_postal_token(t) || is_state_code(t))
            })
        })
    }

    fn is_region(&self, tokens: &[&str]) -> bool {
        if tokens.len() == 1 && is_state_code(tokens[0]) {
            return true;
        }
        self.regions.contains(normalize_name(&tokens.join(" ")).as_str())
    }
}

/// Free function form of [`AddressParser::parse`].
pub fn parse_address(raw: &RawAddress, parser: &AddressParser) -> Option<ParsedAddress> {
    parser.parse(raw.as_str())
}

fn is_postal_token(token: &str) -> bool {
    token.bytes().any(|b| b.is_ascii_digit())
}

fn is_state_code(token: &str) -> bool {
    token.len() == 2 && token.bytes().all(|b| b.is_ascii_uppercase())
}
