use std::path::{Path, PathBuf};

use wdmopt::cascade::{simulate, GffMode};
use wdmopt::io::{
    parse_b2b, parse_link, parse_topology, read_dataset, read_link, read_topology, render_snr_report,
    render_topology, write_dataset,
};
use wdmopt::oracle::{generate_dataset, DatasetConfig, OracleParams};
use wdmopt::{ChannelGrid, Error};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

const STUB_LINK: &str = r#"
version = 1
first_edfa_total_input_dbm = 0.0
b2b = 25.0

[grid]
count = 4
start_thz = 193.0
spacing_ghz = 100.0
symbol_rate_gbd = 32.0

[amplifiers.S]
kind = "stub"
nf_db = 5.0

[fiber]
attenuation_db_per_km = 0.25

[[span]]
amplifier = "S"
target_output_dbm = 10.0
length_km = 50.0
include_nli = false
gff = "ideal"

[[span]]
amplifier = "S"
target_output_dbm = 12.0
length_km = 60.0
fiber = { connector_loss_db = 0.0 }
"#;

#[test]
fn default_link_fixture_loads() {
    let link = read_link(&fixtures().join("default_link.toml")).unwrap();
    let lengths: Vec<f64> = link.spans.iter().map(|s| s.fiber.length_km).collect();
    assert_eq!(lengths, vec![80.0, 100.0, 40.0]);
    let amps: Vec<&str> = link.spans.iter().map(|s| s.amplifier.as_str()).collect();
    assert_eq!(amps, vec!["A1", "A3", "A2"]);
    assert!(link.spans.iter().all(|s| s.target_output_dbm == 18.0 && s.include_srs && s.include_nli));
    assert_eq!(link.first_edfa_total_input_dbm, -2.0);
    assert_eq!(link.grid.len(), 40);
    // Constant outside the measured points, linear in dB between them.
    assert_eq!(link.b2b_snr_db[0], 20.8);
    assert_eq!(link.b2b_snr_db[39], 20.5);
    assert!((link.b2b_snr_db[3] - 21.04).abs() < 1e-9);
    let report = simulate(&link, &link.flat_input()).unwrap();
    assert!(report.min_snr_db() > 10.0 && report.max_snr_db() < 20.8);
}

#[test]
fn inline_options_reach_the_spans() {
    let link = parse_link(STUB_LINK, Path::new("stub.toml")).unwrap();
    assert_eq!(link.grid.len(), 4);
    assert_eq!(link.b2b_snr_db, vec![25.0; 4]);
    let (a, b) = (&link.spans[0], &link.spans[1]);
    assert_eq!(a.fiber.attenuation_db_per_km, 0.25);
    assert_eq!(b.fiber.attenuation_db_per_km, 0.25);
    assert_eq!(b.fiber.connector_loss_db, 0.0);
    assert!(a.fiber.connector_loss_db > 0.0);
    assert!(!a.include_nli && a.include_srs && b.include_nli);
    assert_eq!((a.gff, b.gff), (GffMode::Ideal, GffMode::None));
    assert_eq!(b.target_output_dbm, 12.0);
}

#[test]
fn bad_link_files_are_rejected_with_the_path() {
    let path = Path::new("bad.toml");
    let cases = [
        STUB_LINK.replace("version = 1", "version = 2"),
        STUB_LINK.replace("length_km = 60.0", "length_km = 60.0\ncolour = \"red\""),
        STUB_LINK.replacen("amplifier = \"S\"", "amplifier = \"T\"", 1),
        STUB_LINK.replace("kind = \"stub\"", "kind = \"magic\""),
        STUB_LINK.replace("[grid]\ncount = 4\nstart_thz = 193.0\nspacing_ghz = 100.0\nsymbol_rate_gbd = 32.0\n", ""),
    ];
    for text in cases {
        let e = parse_link(&text, path).unwrap_err();
        assert!(e.to_string().contains("bad.toml"), "{e}");
    }
}

#[test]
fn b2b_points_are_interpolated_onto_the_grid() {
    let grid = ChannelGrid::uniform(5, 193.0, 100.0, 32.0).unwrap();
    let text = "# b2b v1\nfrequency_thz,snr_db\n193.1,20\n193.3,22\n";
    let v = parse_b2b(text, Path::new("b.csv"), &grid).unwrap();
    let expected = [20.0, 20.0, 21.0, 22.0, 22.0];
    for (a, b) in v.iter().zip(expected) {
        assert!((a - b).abs() < 1e-12, "{v:?}");
    }
    assert!(parse_b2b("# b2b v2\nfrequency_thz,snr_db\n193,1\n", Path::new("b.csv"), &grid).is_err());
    assert!(parse_b2b("# b2b v1\nfrequency_thz,snr_db\n193,x\n", Path::new("b.csv"), &grid).is_err());
}

#[test]
fn topology_fixture_holds_the_span_table() {
    let t = read_topology(&fixtures().join("german_topology.csv")).unwrap();
    assert_eq!(t.links.len(), 26);
    assert_eq!(t.link(1).unwrap().spans_km, vec![36.0]);
    assert_eq!(t.link(12).unwrap().spans_km, vec![86.0, 58.0]);
    assert_eq!(t.link(26).unwrap().spans_km, vec![62.0, 88.0, 63.0, 76.0, 64.0]);
    assert_eq!(t.link(26).unwrap().total_km, 353.0);
    for l in &t.links {
        assert_eq!(l.spans_km.iter().sum::<f64>(), l.total_km);
        assert!(l.spans_km.len() <= 5);
    }
    let back = parse_topology(&render_topology(&t), Path::new("t.csv")).unwrap();
    assert_eq!(back, t);
}

#[test]
fn topology_errors_name_the_link() {
    let text = "# topology v1\nid,node_a,node_b,total_km,spans_km\n1,A,B,50,\"50\"\n4,B,C,100,\"40,40\"\n";
    match parse_topology(text, Path::new("t.csv")) {
        Err(Error::InvalidTopology { link: 4, .. }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn datasets_round_trip_exactly() {
    let d = generate_dataset(&OracleParams::reference_unit(), &DatasetConfig::new(2, 2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    write_dataset(&path, &d).unwrap();
    let back = read_dataset(&path).unwrap();
    assert_eq!(back.samples, d.samples);
    assert_eq!(back.grid, d.grid);
}

#[test]
fn snr_report_carries_its_summary() {
    let link = parse_link(STUB_LINK, Path::new("stub.toml")).unwrap();
    let r = simulate(&link, &link.flat_input()).unwrap();
    let text = render_snr_report(&r);
    assert!(text.starts_with("# snr-report v1\n"));
    assert!(text.contains(&format!("min_snr_db={}", r.min_snr_db())));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 5);
}
