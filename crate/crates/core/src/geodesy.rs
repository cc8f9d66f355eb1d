//! Geographic primitives: points, great-circle distance, territories and the
//! gazetteer used to resolve (city, country) pairs and country capitals.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Mean Earth radius (IUGG) in kilometers.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("invalid coordinates ({lat}, {lon})")]
    InvalidPoint { lat: f64, lon: f64 },
    #[error("unknown country `{0}`")]
    UnknownCountry(String),
    #[error("{file}: expected header `{expected}`, found `{found}`")]
    InvalidHeader {
        file: String,
        expected: String,
        found: String,
    },
    #[error("{file}: line {line}: {message}")]
    InvalidRow {
        file: String,
        line: u64,
        message: String,
    },
    #[error("{file}: duplicate territory id `{id}`")]
    DuplicateId { file: String, id: String },
    #[error("{file}: {source}")]
    Csv {
        file: String,
        #[source]
        source: csv::Error,
    },
}

/// A point on the sphere, in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    /// Validates latitude and normalizes longitude into `[-180, 180)`.
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !lat.is_finite() || !lon.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::InvalidPoint { lat, lon });
        }
        let mut lon = lon;
        if !(-180.0..180.0).contains(&lon) {
            lon = (lon + 180.0).rem_euclid(360.0) - 180.0;
            // rem_euclid can round up to exactly 360 for tiny negative inputs
            if lon >= 180.0 {
                lon -= 360.0;
            }
        }
        Ok(GeoPoint { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

impl fmt::Display for GeoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.4}, {:.4})", self.lat, self.lon)
    }
}

/// Haversine distance in kilometers on a sphere of radius [`EARTH_RADIUS_KM`].
///
/// Differences are taken as absolute values so the result is bitwise
/// symmetric in its arguments.
pub fn great_circle_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    let dlat = (a.lat - b.lat).abs().to_radians();
    let dlon = (a.lon - b.lon).abs().to_radians();
    // IEEE multiplication commutes, so the product is symmetric as well
    let cos_product = a.lat.to_radians().cos() * b.lat.to_radians().cos();

    let s_lat = (dlat / 2.0).sin();
    let s_lon = (dlon / 2.0).sin();
    let h = (s_lat * s_lat + cos_product * s_lon * s_lon).clamp(0.0, 1.0);
    2.0 * h.sqrt().asin() * EARTH_RADIUS_KM
}

/// Case-folds, strips diacritics, trims and collapses internal whitespace.
pub fn normalize_name(raw: &str) -> String {
    let folded: String = raw
        .to_lowercase()
        .nfd()
        .filter(|c| !is_combining_mark(*c))
        .collect();
    folded.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Country,
    Lau,
}

impl Level {
    pub fn as_str(&self) -> &'static str {
        match self {
            Level::Country => "country",
            Level::Lau => "lau",
        }
    }

    fn parse(s: &str) -> Option<Level> {
        match s.trim().to_ascii_uppercase().as_str() {
            "COUNTRY" => Some(Level::Country),
            "LAU" => Some(Level::Lau),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Territory {
    pub id: String,
    pub level: Level,
    pub name: String,
    pub country_code: String,
    pub centroid: GeoPoint,
}

/// Alias table mapping free-text country names to ISO 3166-1 alpha-2 codes.
///
/// The first alias listed for a code is its canonical display name.
#[derive(Debug, Clone, Default)]
pub struct CountryAliases {
    by_alias: HashMap<String, String>,
    canonical: BTreeMap<String, String>,
}

impl CountryAliases {
    /// Reads an `alias,iso2` CSV.
    pub fn from_reader<R: Read>(reader: R, file: &str) -> Result<Self, GeoError> {
        let mut rdr = csv::Reader::from_reader(reader);
        check_header(&mut rdr, file, &["alias", "iso2"])?;
        let mut table = CountryAliases::default();
        for (n, row) in rdr.records().enumerate() {
            let row = row.map_err(|source| GeoError::Csv {
                file: file.to_string(),
                source,
            })?;
            let (alias, code) = (row.get(0).unwrap_or(""), row.get(1).unwrap_or(""));
            let code = code.trim().to_ascii_uppercase();
            if alias.trim().is_empty() || !is_iso2(&code) {
                return Err(GeoError::InvalidRow {
                    file: file.to_string(),
                    line: n as u64 + 2,
                    message: format!("bad alias row `{alias},{code}`"),
                });
            }
            table.insert(alias, &code);
        }
        Ok(table)
    }

    pub fn insert(&mut self, alias: &str, code: &str) {
        let code = code.to_ascii_uppercase();
        self.canonical
            .entry(code.clone())
            .or_insert_with(|| alias.trim().to_string());
        self.by_alias.insert(normalize_name(alias), code);
    }

    /// Resolves a country expression; bare ISO codes with a known canonical
    /// name resolve to themselves.
    pub fn resolve(&self, country: &str) -> Option<&str> {
        let key = normalize_name(country);
        if let Some(code) = self.by_alias.get(&key) {
            return Some(code);
        }
        let upper = country.trim().to_ascii_uppercase();
        self.canonical.get_key_value(&upper).map(|(k, _)| k.as_str())
    }

    pub fn canonical_name(&self, code: &str) -> Option<&str> {
        self.canonical.get(code).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.by_alias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_alias.is_empty()
    }
}

fn is_iso2(code: &str) -> bool {
    code.len() == 2 && code.bytes().all(|b| b.is_ascii_uppercase())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Capital {
    pub country_code: String,
    pub name: String,
    pub point: GeoPoint,
}

/// Territories indexed by id and by normalized (city, country code), plus a
/// capital table and country alias table.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    territories: Vec<Territory>,
    by_id: HashMap<String, usize>,
    city_index: HashMap<(String, String), usize>,
    ambiguous: HashSet<(String, String)>,
    countries: HashMap<String, usize>,
    capitals: BTreeMap<String, Capital>,
    aliases: CountryAliases,
}

const GAZETTEER_HEADER: [&str; 6] = ["id", "level", "name", "country_code", "lat", "lon"];
const CAPITALS_HEADER: [&str; 4] = ["country_code", "name", "lat", "lon"];

impl Gazetteer {
    /// Builds a gazetteer from the territory CSV (`id,level,name,country_code,lat,lon`
    /// with an optional trailing `alt_names` column of `|`-separated names) and the
    /// capitals CSV (`country_code,name,lat,lon`).
    ///
    /// Countries without an explicit COUNTRY row get one synthesized from their
    /// capital, with the country code as id.
    pub fn from_readers<G: Read, C: Read>(
        territories: G,
        territories_file: &str,
        capitals: C,
        capitals_file: &str,
        aliases: CountryAliases,
    ) -> Result<Self, GeoError> {
        let mut g = Gazetteer {
            aliases,
            ..Gazetteer::default()
        };

        let mut rdr = csv::ReaderBuilder::new()
            .flexible(true)
            .from_reader(territories);
        let alt_column = check_header(&mut rdr, territories_file, &GAZETTEER_HEADER)?
            .iter()
            .position(|h| h.trim() == "alt_names");
        for (n, row) in rdr.records().enumerate() {
            let line = n as u64 + 2;
            let row = row.map_err(|source| GeoError::Csv {
                file: territories_file.to_string(),
                source,
            })?;
            let bad = |message: String| GeoError::InvalidRow {
                file: territories_file.to_string(),
                line,
                message,
            };
            if row.len() < GAZETTEER_HEADER.len() {
                return Err(bad(format!("expected at least 6 fields, got {}", row.len())));
            }
            let level = Level::parse(&row[1]).ok_or_else(|| bad(format!("unknown level `{}`", &row[1])))?;
            let country_code = row[3].trim().to_ascii_uppercase();
            if !is_iso2(&country_code) {
                return Err(bad(format!("`{}` is not an ISO alpha-2 code", &row[3])));
            }
            let centroid = parse_point(&row[4], &row[5]).map_err(bad)?;
            let territory = Territory {
                id: row[0].trim().to_string(),
                level,
                name: row[2].trim().to_string(),
                country_code,
                centroid,
            };
            if territory.id.is_empty() || territory.name.is_empty() {
                return Err(bad("empty id or name".into()));
            }
            let alt_names: Vec<String> = alt_column
                .and_then(|c| row.get(c))
                .map(|s| {
                    s.split('|')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(String::from)
                        .collect()
                })
                .unwrap_or_default();
            g.add(territory, &alt_names)
                .map_err(|id| GeoError::DuplicateId {
                    file: territories_file.to_string(),
                    id,
                })?;
        }

        let mut rdr = csv::Reader::from_reader(capitals);
        check_header(&mut rdr, capitals_file, &CAPITALS_HEADER)?;
        for (n, row) in rdr.records().enumerate() {
            let line = n as u64 + 2;
            let row = row.map_err(|source| GeoError::Csv {
                file: capitals_file.to_string(),
                source,
            })?;
            let bad = |message: String| GeoError::InvalidRow {
                file: capitals_file.to_string(),
                line,
                message,
            };
            if row.len() < CAPITALS_HEADER.len() {
                return Err(bad(format!("expected 4 fields, got {}", row.len())));
            }
            let code = row[0].trim().to_ascii_uppercase();
            if !is_iso2(&code) {
                return Err(bad(format!("`{}` is not an ISO alpha-2 code", &row[0])));
            }
            let point = parse_point(&row[2], &row[3]).map_err(bad)?;
            g.capitals.insert(
                code.clone(),
                Capital {
                    country_code: code,
                    name: row[1].trim().to_string(),
                    point,
                },
            );
        }

        let missing: Vec<Capital> = g
            .capitals
            .values()
            .filter(|c| !g.countries.contains_key(&c.country_code))
            .cloned()
            .collect();
        for capital in missing {
            let name = g
                .aliases
                .canonical_name(&capital.country_code)
                .unwrap_or(&capital.country_code)
                .to_string();
            let territory = Territory {
                id: capital.country_code.clone(),
                level: Level::Country,
                name,
                country_code: capital.country_code.clone(),
                centroid: capital.point,
            };
            g.add(territory, &[]).map_err(|id| GeoError::DuplicateId {
                file: capitals_file.to_string(),
                id,
            })?;
        }
        Ok(g)
    }

    /// The gazetteer, capitals and aliases shipped with the crate.
    pub fn bundled() -> Self {
        Gazetteer::from_readers(
            crate::data::GAZETTEER_IT.as_bytes(),
            "gazetteer_it.csv",
            crate::data::CAPITALS.as_bytes(),
            "capitals.csv",
            CountryAliases::bundled(),
        )
        .expect("bundled gazetteer is well-formed")
    }

    fn add(&mut self, territory: Territory, alt_names: &[String]) -> Result<(), String> {
        if self.by_id.contains_key(&territory.id) {
            return Err(territory.id);
        }
        let idx = self.territories.len();
        self.by_id.insert(territory.id.clone(), idx);
        match territory.level {
            Level::Country => {
                self.countries.insert(territory.country_code.clone(), idx);
            }
            Level::Lau => {
                let names = std::iter::once(&territory.name).chain(alt_names.iter());
                for name in names {
                    let key = (normalize_name(name), territory.country_code.clone());
                    if self.ambiguous.contains(&key) {
                        continue;
                    }
                    match self.city_index.get(&key) {
                        Some(&other) if other != idx => {
                            self.city_index.remove(&key);
                            self.ambiguous.insert(key);
                        }
                        _ => {
                            self.city_index.insert(key, idx);
                        }
                    }
                }
            }
        }
        self.territories.push(territory);
        Ok(())
    }

    pub fn aliases(&self) -> &CountryAliases {
        &self.aliases
    }

    pub fn territories(&self) -> &[Territory] {
        &self.territories
    }

    pub fn get(&self, id: &str) -> Option<&Territory> {
        self.by_id.get(id).map(|&i| &self.territories[i])
    }

    /// COUNTRY-level territory for an ISO code.
    pub fn country(&self, code: &str) -> Option<&Territory> {
        self.countries.get(code).map(|&i| &self.territories[i])
    }

    /// Resolves a country expression (alias or ISO code) to its code.
    pub fn resolve_country(&self, country: &str) -> Option<&str> {
        if let Some(code) = self.aliases.resolve(country) {
            return Some(code);
        }
        let upper = country.trim().to_ascii_uppercase();
        self.countries
            .get_key_value(&upper)
            .map(|(k, _)| k.as_str())
            .or_else(|| self.capitals.get_key_value(&upper).map(|(k, _)| k.as_str()))
    }

    /// Exact-match lookup of a LAU by city name and country (alias or code).
    pub fn lookup_territory(&self, city: &str, country: &str) -> Option<&Territory> {
        let code = self.resolve_country(country)?;
        self.lookup_city_in(city, code)
    }

    /// Exact-match lookup of a LAU by city name within an ISO country code.
    pub fn lookup_city_in(&self, city: &str, country_code: &str) -> Option<&Territory> {
        let name = normalize_name(city);
        if name.is_empty() {
            return None;
        }
        self.city_index
            .get(&(name, country_code.to_string()))
            .map(|&i| &self.territories[i])
    }

    pub fn country_capital(&self, country_code: &str) -> Result<GeoPoint, GeoError> {
        self.capital(country_code).map(|c| c.point)
    }

    pub fn capital(&self, country_code: &str) -> Result<&Capital, GeoError> {
        self.capitals
            .get(&country_code.trim().to_ascii_uppercase())
            .ok_or_else(|| GeoError::UnknownCountry(country_code.to_string()))
    }

    pub fn capitals(&self) -> impl Iterator<Item = &Capital> {
        self.capitals.values()
    }
}

impl CountryAliases {
    pub fn bundled() -> Self {
        CountryAliases::from_reader(crate::data::COUNTRY_ALIASES.as_bytes(), "country_aliases.csv")
            .expect("bundled alias table is well-formed")
    }
}

/// Free function form of [`Gazetteer::lookup_territory`].
pub fn lookup_territory<'g>(city: &str, country: &str, g: &'g Gazetteer) -> Option<&'g Territory> {
    g.lookup_territory(city, country)
}

/// Free function form of [`Gazetteer::country_capital`].
pub fn country_capital(country_code: &str, g: &Gazetteer) -> Result<GeoPoint, GeoError> {
    g.country_capital(country_code)
}

fn parse_point(lat: &str, lon: &str) -> Result<GeoPoint, String> {
    let lat: f64 = lat.trim().parse().map_err(|_| format!("bad latitude `{lat}`"))?;
    let lon: f64 = lon.trim().parse().map_err(|_| format!("bad longitude `{lon}`"))?;
    GeoPoint::new(lat, lon).map_err(|e| e.to_string())
}

/// Checks that the CSV header starts with `expected`, returning the full header.
pub(crate) fn check_header<R: Read>(
    rdr: &mut csv::Reader<R>,
    file: &str,
    expected: &[&str],
) -> Result<Vec<String>, GeoError> {
    let header = rdr.headers().map_err(|source| GeoError::Csv {
        file: file.to_string(),
        source,
    })?;
    let found: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
    let ok = found.len() >= expected.len() && found.iter().zip(expected).all(|(f, e)| f == e);
    if !ok {
        return Err(GeoError::InvalidHeader {
            file: file.to_string(),
            expected: expected.join(","),
            found: found.join(","),
        });
    }
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    #[test]
    fn identity_is_zero() {
        assert_eq!(great_circle_distance(pt(41.9, 12.5), pt(41.9, 12.5)), 0.0);
    }

    #[test]
    fn pole_to_pole_is_half_circumference() {
        let d = great_circle_distance(pt(90.0, 0.0), pt(-90.0, 0.0));
        let expected = std::f64::consts::PI * EARTH_RADIUS_KM;
        assert!((d - expected).abs() / expected < 1e-12);
        assert!((d - 20015.114).abs() < 0.001);
    }

    #[test]
    fn rome_bologna_matches_spherical_law_of_cosines() {
        // Oracle: spherical law of cosines on unit vectors, well conditioned at this range.
        let (a, b) = ((41.8931f64, 12.4828f64), (44.4939f64, 11.3426f64));
        let v = |(lat, lon): (f64, f64)| {
            let (lat, lon) = (lat.to_radians(), lon.to_radians());
            [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
        };
        let (va, vb) = (v(a), v(b));
        let cross = [
            va[1] * vb[2] - va[2] * vb[1],
            va[2] * vb[0] - va[0] * vb[2],
            va[0] * vb[1] - va[1] * vb[0],
        ];
        let sin = (cross[0].powi(2) + cross[1].powi(2) + cross[2].powi(2)).sqrt();
        let cos = va[0] * vb[0] + va[1] * vb[1] + va[2] * vb[2];
        let oracle = sin.atan2(cos) * EARTH_RADIUS_KM;

        let d = great_circle_distance(pt(a.0, a.1), pt(b.0, b.1));
        assert!((d - oracle).abs() < 1e-6, "{d} vs {oracle}");
        // frozen from an independent Python haversine run
        assert!((d - 303.599_394).abs() < 1e-5, "{d}");
    }

    #[test]
    fn longitude_is_normalized() {
        assert_eq!(pt(0.0, 180.0).lon(), -180.0);
        assert_eq!(pt(0.0, 190.0).lon(), -170.0);
        assert_eq!(pt(0.0, -180.0).lon(), -180.0);
        assert!(GeoPoint::new(91.0, 0.0).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn bundled_lookups() {
        let g = Gazetteer::bundled();
        assert_eq!(g.lookup_territory("Bologna", "Italy").unwrap().id, "it-bologna");
        assert_eq!(g.lookup_territory("bologna", "ITALY").unwrap().id, "it-bologna");
        assert_eq!(g.lookup_territory("  Turin ", "IT").unwrap().id, "it-torino");
        assert!(g.lookup_territory("Atlantis", "Italy").is_none());
        assert!(g.lookup_territory("", "Italy").is_none());
        assert_eq!(g.lookup_territory("FORLI", "Italy").unwrap().id, "it-forli");

        let seoul = g.country_capital("KR").unwrap();
        assert_eq!((seoul.lat(), seoul.lon()), (37.5665, 126.978));
        let rome = country_capital("IT", &g).unwrap();
        assert_eq!((rome.lat(), rome.lon()), (41.8931, 12.4828));
        match g.country_capital("ZZ") {
            Err(GeoError::UnknownCountry(code)) => assert_eq!(code, "ZZ"),
            other => panic!("{other:?}"),
        }
        assert_eq!(g.country("IT").unwrap().name, "Italy");
    }

    #[test]
    fn bad_header_names_file() {
        let err = Gazetteer::from_readers(
            "ident,level,name\n".as_bytes(),
            "gaz.csv",
            "country_code,name,lat,lon\n".as_bytes(),
            "caps.csv",
            CountryAliases::default(),
        )
        .unwrap_err();
        assert!(err.to_string().starts_with("gaz.csv"), "{err}");
    }

    #[test]
    fn duplicate_city_names_are_ambiguous() {
        let csv = "id,level,name,country_code,lat,lon\n\
                   a,LAU,Castro,IT,40.0,18.4\n\
                   b,LAU,Castro,IT,45.8,10.0\n\
                   c,LAU,Lecce,IT,40.3,18.1\n";
        let g = Gazetteer::from_readers(
            csv.as_bytes(),
            "g",
            "country_code,name,lat,lon\n".as_bytes(),
            "c",
            CountryAliases::default(),
        )
        .unwrap();
        assert!(g.lookup_city_in("Castro", "IT").is_none());
        assert!(g.lookup_city_in("Lecce", "IT").is_some());

        let dup = "id,level,name,country_code,lat,lon\na,LAU,X,IT,1,1\na,LAU,Y,IT,1,1\n";
        let err = Gazetteer::from_readers(
            dup.as_bytes(),
            "g",
            "country_code,name,lat,lon\n".as_bytes(),
            "c",
            CountryAliases::default(),
        )
        .unwrap_err();
        assert!(matches!(err, GeoError::DuplicateId { .. }));
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_name("  São   Paulo "), "sao paulo");
        assert_eq!(normalize_name("FORLÌ"), "forli");
        assert_eq!(normalize_name(""), "");
    }

    fn point() -> impl Strategy<Value = GeoPoint> {
        (-90.0f64..=90.0, -180.0f64..180.0).prop_map(|(lat, lon)| pt(lat, lon))
    }

    proptest! {
        #[test]
        fn distance_symmetric_and_bounded(a in point(), b in point()) {
            let d = great_circle_distance(a, b);
            prop_assert_eq!(d.to_bits(), great_circle_distance(b, a).to_bits());
            prop_assert!((0.0..=std::f64::consts::PI * EARTH_RADIUS_KM).contains(&d));
            prop_assert_eq!(great_circle_distance(a, a), 0.0);
        }

        #[test]
        fn normalization_idempotent(s in "\\PC{0,24}") {
            let once = normalize_name(&s);
            prop_assert_eq!(normalize_name(&once), once);
        }

        #[test]
        fn lookup_ignores_case_and_padding(pad in " {0,3}", upper in any::<bool>()) {
            let g = Gazetteer::bundled();
            let city = if upper { "CATANIA" } else { "catania" };
            let query = format!("{pad}{city}{pad}");
            prop_assert_eq!(&g.lookup_territory(&query, "Italy").unwrap().id, "it-catania");
        }
    }
}
