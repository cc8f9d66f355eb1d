use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn geocite(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geocite"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const CITED: &str = r#"{"pub_id":"c1","year":2011,"affiliations":["Univ Bologna, Dept Psychol, I-40127 Bologna, Italy","CNR, Rome, Italy"],"authors":[{"key":"A","affil_idx":[0]},{"key":"B","affil_idx":[0,1]}]}
{"pub_id":"c2","year":2012,"affiliations":["Politecn Milan, Milan, Italy"],"authors":[{"key":"C","affil_idx":[0]}],"addresses":["Politecn Milan, Milan, Italy","Politecn Milan, Milan, Italy"]}

{"pub_id":"c3","year":2012,"affiliations":["Univ Turin, Turin, Italy","Univ Milan, Milan, Italy"],"authors":[{"key":"D","affil_idx":[0]},{"key":"E","affil_idx":[1]}]}
not json
"#;

const CITING: &str = r#"{"pub_id":"k1","year":2013,"addresses":["Univ Pisa, Pisa, Italy"],"cites":["c1","c2"]}
{"pub_id":"k2","year":2013,"addresses":["CNRS, Paris, France"],"cites":["c1"]}
{"pub_id":"k3","year":2014,"addresses":[],"cites":["c2"]}
{"pub_id":"k4","year":2014,"addresses":["Univ Tokyo, Tokyo, Japan"],"cites":["c1","c3","c9"]}
{"pub_id":"k5","year":2014,"addresses":["Univ Catania, Catania, Italy","ETNA Fdn, Catania, Italy"],"cites":["c2"]}
"#;

fn corpus(dir: &Path) -> Vec<String> {
    fs::write(dir.join("cited.jsonl"), CITED).unwrap();
    fs::write(dir.join("citing.jsonl"), CITING).unwrap();
    vec![
        "--cited".into(),
        dir.join("cited.jsonl").display().to_string(),
        "--citing".into(),
        dir.join("citing.jsonl").display().to_string(),
    ]
}

fn with<'a>(head: &[&'a str], tail: &'a [String]) -> Vec<&'a str> {
    head.iter().copied().chain(tail.iter().map(String::as_str)).collect()
}

#[test]
fn empty_inputs_give_empty_outputs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cited.jsonl"), "").unwrap();
    fs::write(dir.path().join("citing.jsonl"), "").unwrap();
    let inputs = vec![
        "--cited".to_string(),
        dir.path().join("cited.jsonl").display().to_string(),
        "--citing".to_string(),
        dir.path().join("citing.jsonl").display().to_string(),
    ];
    let o = geocite(dir.path(), &with(&["ingest"], &inputs));
    assert!(o.status.success(), "{}", stderr(&o));
    let attr = fs::read_to_string(dir.path().join("attr_cited.csv")).unwrap();
    assert_eq!(attr, "pub_id,level,territory_id,share,basis\n");
    let stats: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("ingest_stats.json")).unwrap()).unwrap();
    assert_eq!(stats["cited"]["records"], 0);
}

#[test]
fn fixture_corpus_runs_through_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = corpus(dir.path());
    let o = geocite(dir.path(), &with(&["ingest"], &inputs));
    assert!(o.status.success(), "{}", stderr(&o));

    let stats: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("ingest_stats.json")).unwrap()).unwrap();
    assert_eq!(stats["cited"]["records"], 3);
    assert_eq!(stats["cited"]["skipped"], 1);
    assert_eq!(stats["citing"]["unassignable"], 1);
    assert_eq!(stats["convention_agreement"], 1.0);

    // one row per assignable record
    let rows = |f: &str| fs::read_to_string(dir.path().join(f)).unwrap().lines().count() - 1;
    assert_eq!(rows("attr_cited.csv"), 3);
    assert_eq!(rows("attr_citing_country.csv"), 4);
    assert_eq!(rows("attr_citing_lau.csv"), 4);
    let cited = fs::read_to_string(dir.path().join("attr_cited.csv")).unwrap();
    assert!(cited.contains("c1,lau,it-bologna,0.75,author_fractional"), "{cited}");

    let o = geocite(dir.path(), &with(&["flows", "--level", "national"], &inputs));
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("flows_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["total_pairs"], 8);
    assert_eq!(summary["edge_citations"], 3);
    assert_eq!(summary["dropped"], 5);

    // three edges cannot support four coefficients
    let o = geocite(dir.path(), &["fit"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("need more observations than coefficients"));

    let o = geocite(dir.path(), &with(&["report"], &inputs));
    assert!(o.status.success(), "{}", stderr(&o));
    let pubs = fs::read_to_string(dir.path().join("report_publications.csv")).unwrap();
    assert_eq!(pubs.lines().count(), 3);
}

#[test]
fn corrupted_gazetteer_header_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = corpus(dir.path());
    let gaz = dir.path().join("broken_gazetteer.csv");
    fs::write(&gaz, "identifier,name\nx,y\n").unwrap();
    let mut args = with(&["assign", "--gazetteer"], &[]);
    let gaz_s = gaz.display().to_string();
    args.push(&gaz_s);
    args.extend(inputs.iter().map(String::as_str));
    let o = geocite(dir.path(), &args);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("broken_gazetteer.csv"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = geocite(dir.path(), &["ingest", "--cited", "/nonexistent/cited.jsonl", "--citing", "/nope"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("does not exist"));
    assert_eq!(geocite(dir.path(), &["fit", "--bands", "400,50"]).status.code(), Some(1));
    assert_eq!(geocite(dir.path(), &["fit", "--zero-distance", "floor:0"]).status.code(), Some(1));
    assert_eq!(geocite(dir.path(), &["frobnicate"]).status.code(), Some(1));
}

#[test]
fn zero_noise_world_fits_exactly_and_partitions() {
    let dir = tempfile::tempdir().unwrap();
    let o = geocite(
        dir.path(),
        &["simulate", "--territories", "40", "--noise-sigma", "0", "--count-mode", "exact"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let gaz = dir.path().join("gazetteer.csv").display().to_string();
    let o = geocite(dir.path(), &["fit", "--partition", "both", "--gazetteer", &gaz]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("fit_report.txt")).unwrap();
    let r2_line = text.lines().find(|l| l.starts_with("R2")).unwrap();
    assert_eq!(r2_line.split_whitespace().collect::<Vec<_>>(), ["R2", "1.000"], "{text}");
    assert!(text.contains("no intercontinental observations"), "{text}");
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fit_report.json")).unwrap()).unwrap();
    let d = json["fits"][0]["report"]["coefficients"]["d_ij"].as_f64().unwrap();
    assert!((d - 0.474).abs() < 1e-9);
    assert_eq!(json["fits"][1]["notice"], "no intercontinental observations");
}

#[test]
fn simulate_is_reproducible_and_reports_all_parameters() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = geocite(d.path(), &["simulate", "--seed", "42", "--territories", "60"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["edges.csv", "masses_cited.csv", "gazetteer.csv", "recovery.json", "recovery.txt"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let r: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("recovery.json")).unwrap()).unwrap();
    for k in ["ln_k", "alpha", "beta", "gamma"] {
        assert!(r["trials"][0]["estimates"][k].is_f64(), "{k}");
    }
}

#[test]
fn fit_report_is_stable_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    assert!(geocite(dir.path(), &["simulate", "--territories", "50"]).status.success());
    let mut reports = Vec::new();
    for _ in 0..2 {
        let o = geocite(dir.path(), &["fit", "--bands", "50,400,800,1200"]);
        assert!(o.status.success(), "{}", stderr(&o));
        reports.push(fs::read(dir.path().join("fit_report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn demo_config_reproduces_recovery_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.toml");
    let o = geocite(dir.path(), &["simulate", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("recovery.json")).unwrap()).unwrap();
    assert_eq!(r["trials"].as_array().unwrap().len(), 20);
    let med = r["median_abs_delta"]["gamma"].as_f64().unwrap();
    // recorded from the calibration run
    assert!((med - 0.00087).abs() < 5e-5, "{med}");
}
