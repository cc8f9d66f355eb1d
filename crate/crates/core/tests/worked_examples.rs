use geocite::assignment::{
    author_fractional_country, prevalent_country_citing, prevalent_lau_citing, prevalent_territory_cited,
    AssignOptions, Basis,
};
use geocite::ingest::{AddressParser, Author, CitedRecord, CitingRecord, RawAddress};
use geocite::Gazetteer;
use num_rational::Ratio;

fn addrs(list: &[&str]) -> Vec<RawAddress> {
    list.iter().map(|a| RawAddress::new(*a).unwrap()).collect()
}

fn borghi() -> CitedRecord {
    let affiliations = addrs(&[
        "Univ Bologna, Dept Psychol, I-40127 Bologna, Italy",
        "Rhein Westfal TH Aachen, Div Cognit Neurol, D-52062 Aachen, Germany",
        "Univ Catanzaro, Dept Med Sci, Catanzaro, Italy",
        "Univ Bologna, Dept Commun Disciplines, Bologna, Italy",
        "Univ Parma, Dept Neurosci, I-43100 Parma, Italy",
        "CNR, Inst Cognit Sci & Technol, Rome, Italy",
    ]);
    let authors = [
        ("Scorilli, C", vec![0]),
        ("Binkofski, F", vec![1]),
        ("Buccino, G", vec![2]),
        ("Nicoletti, R", vec![3]),
        ("Riggio, L", vec![4]),
        ("Borghi, AM", vec![0, 5]),
    ]
    .into_iter()
    .map(|(k, idx)| Author {
        key: k.into(),
        affil_idx: idx,
    })
    .collect();
    CitedRecord {
        pub_id: "10.3389/fpsyg.2011.00227".into(),
        year: 2011,
        affiliations,
        authors,
        addresses: vec![],
    }
}

fn korea() -> CitingRecord {
    CitingRecord {
        pub_id: "10.1182/blood-2010-01-261289".into(),
        year: 2010,
        addresses: addrs(&[
            "Catholic Univ Korea, Seoul St Marys Hosp, Div Hematol, Seoul 137701, South Korea",
            "Seoul Natl Univ, Coll Med, Seoul, South Korea",
            "Shanghai Med Univ 2, Ruijin Hosp, Shanghai, Peoples R China",
            "Hannover Med Sch, D-30623 Hannover, Germany",
            "Taipei City Hosp, Taipei, Taiwan",
            "Novartis Pharmaceut, E Hanover, NJ USA",
            "Novartis Pharma AG, Basel, Switzerland",
            "UCL, London, England",
        ]),
        cites: vec!["x".into()],
    }
}

fn catania() -> CitingRecord {
    CitingRecord {
        pub_id: "10.1021/acs.inorgchem.8b02267".into(),
        year: 2018,
        addresses: addrs(&[
            "Hop Prive Jacques Cartier, Inst Cardiovasc Paris, Gen Sante, Dept Cardiol, Massy, France",
            "CHU Cavale Blanche, Dept Cardiol, Brest, France",
            "Columbia Univ, Med Ctr, Dept Cardiol, New York, NY USA",
            "New York Presbyterian Hosp, New York, NY USA",
            "Univ British Columbia, Dept Cardiol, Vancouver, BC V5Z 1M9, Canada",
            "Univ Laval, Quebec Heart & Lung Inst, Dept Cardiol, Quebec City, PQ, Canada",
            "Univ Catania, Ferrarotto Hosp, Dept Cardiol, Catania, Italy",
            "ETNA Fdn, Catania, Italy",
            "Univ Turin, Div Cardiol, Citta Salute & Sci, Turin, Italy",
            "Imperial Coll Healthcare NHS Trust, Div Cardiol, London, England",
            "Univ Birmingham, Queen Elizabeth Hosp, Birmingham B15 2TH, W Midlands, England",
        ]),
        cites: vec!["x".into()],
    }
}

#[test]
fn byline_goes_to_bologna_with_five_twelfths() {
    let g = Gazetteer::bundled();
    let p = AddressParser::bundled();
    let a = prevalent_territory_cited(&borghi(), &p, &g, &AssignOptions::default());
    assert_eq!(a.territory_id(), Some("it-bologna"));
    assert_eq!(a.share, Some(Ratio::new(5, 12)));
    assert_eq!(a.basis, Basis::AuthorFractional);
    assert!((a.share_f64().unwrap() - 2.5 / 6.0).abs() < 1e-12);
    assert_eq!(author_fractional_country(&borghi(), &p).unwrap(), "IT");
}

#[test]
fn address_list_goes_to_south_korea() {
    let g = Gazetteer::bundled();
    let p = AddressParser::bundled();
    let a = prevalent_country_citing(&korea(), &p, &g, &AssignOptions::default());
    assert_eq!(a.territory_id(), Some("KR"));
    assert_eq!(a.share, Some(Ratio::new(2, 8)));
}

#[test]
fn address_list_goes_to_italy_then_catania() {
    let g = Gazetteer::bundled();
    let p = AddressParser::bundled();
    let opts = AssignOptions::default();
    let country = prevalent_country_citing(&catania(), &p, &g, &opts);
    assert_eq!(country.territory_id(), Some("IT"));
    assert_eq!(country.share, Some(Ratio::new(3, 11)));
    let lau = prevalent_lau_citing(&catania(), "IT", &p, &g, &opts);
    assert_eq!(lau.territory_id(), Some("it-catania"));
    assert_eq!(lau.share, Some(Ratio::new(2, 3)));
}
