//! Reference tables compiled into the crate. Users may substitute their own
//! files with the same layouts.

pub const GAZETTEER_IT: &str = include_str!("../data/gazetteer_it.csv");
pub const CAPITALS: &str = include_str!("../data/capitals.csv");
pub const COUNTRY_ALIASES: &str = include_str!("../data/country_aliases.csv");
pub const CONTINENTS: &str = include_str!("../data/continents.csv");
