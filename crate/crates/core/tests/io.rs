mod common;

use common::*;
use fdas_core::io;
use fdas_core::prep::reorder;
use fdas_core::{ComplexSeries, FdasConfig, FdasError, Fop, StageTiming};
use rand::Rng;

#[test]
fn plane_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(1);
    let fop = Fop::from_values(7, 64, (0..7 * 64).map(|_| r.gen_range(0.0..5.0)).collect()).unwrap();
    let p = dir.path().join("p.fop");
    io::save_fop(&p, &fop).unwrap();
    assert_eq!(io::load_fop(&p).unwrap(), fop);
    // a channel-major plane is stored in template order
    io::save_fop(&p, &fdas_core::prep::transpose(&fop)).unwrap();
    assert_eq!(io::load_fop(&p).unwrap(), fop);

    let rfop = reorder(&fop, 16, 8).unwrap();
    let q = dir.path().join("p.rfop");
    io::save_rfop(&q, &rfop).unwrap();
    assert_eq!(io::load_rfop(&q, 7, 64).unwrap(), rfop);
    // wrong plane shape no longer matches the stored geometry
    assert!(matches!(io::load_rfop(&q, 7, 128), Err(FdasError::Structure { .. })));
}

#[test]
fn series_and_config_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let s = ComplexSeries(random_series(&mut rng(2), 128));
    let p = dir.path().join("s.csr");
    io::save_series(&p, &s).unwrap();
    assert_eq!(io::load_series(&p).unwrap(), s);

    let cfg = FdasConfig { t_limit: Some(1200.0), thresholds: Some(vec![3.0; 8]), ..FdasConfig::desk_scale() };
    let c = dir.path().join("c.json");
    io::save_config(&c, &cfg).unwrap();
    assert_eq!(io::load_config(&c).unwrap(), cfg);
}

#[test]
fn truncated_and_foreign_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x");
    std::fs::write(&p, b"FOP1\x02\x00\x00\x00\x02\x00\x00\x00\x00\x00").unwrap();
    assert!(matches!(io::load_fop(&p), Err(FdasError::Structure { .. })));
    std::fs::write(&p, b"CSR1").unwrap();
    assert!(io::load_series(&p).is_err());
    assert!(matches!(io::load_fop(&dir.path().join("missing")), Err(FdasError::Io { .. })));
    // negative power is not a valid plane
    let mut bytes = b"FOP1\x01\x00\x00\x00\x01\x00\x00\x00".to_vec();
    bytes.extend_from_slice(&(-1.0f32).to_le_bytes());
    assert!(io::decode_fop(&bytes).is_err());
}

#[test]
fn config_field_errors() {
    for (text, field) in [
        (r#"{"n_chan": -4}"#, "n_chan"),
        (r#"{"t_obs": "long"}"#, "t_obs"),
        (r#"{"thresholds": [1, "x"]}"#, "thresholds"),
    ] {
        match io::parse_config(text) {
            Err(FdasError::ConfigParse { field: f, .. }) => assert_eq!(f, field),
            other => panic!("{text}: {other:?}"),
        }
    }
    assert!(matches!(io::parse_config(r#"{"n_chan": 1000}"#), Err(FdasError::InvalidConfig { field: "n_chan", .. })));
    assert!(matches!(io::parse_config(r#"{"thresholds": [1.0]}"#), Err(FdasError::InvalidConfig { field: "thresholds", .. })));
    assert!(io::parse_config("[1]").is_err());
    let full = io::parse_config(r#"{"n_beams": 1500}"#).unwrap();
    assert_eq!(full.n_chan, 1 << 21);
    assert_eq!(full.fop_bytes(), 713_031_680);
}

#[test]
fn timing_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.json");
    std::fs::write(
        &p,
        r#"[{"combination": "harp", "t_ft": 347, "t_fop": 560, "t_hm": 122},
            {"combination": "i7+a10", "t_ft": 190, "t_fop": 633, "t_hm": 149}]"#,
    )
    .unwrap();
    let t = io::load_timings(&p).unwrap();
    assert_eq!(t[0].1, StageTiming::from_stages(347.0, 560.0, 122.0));
    assert_eq!(t[1].1.t_fdas(), 972.0);
    std::fs::write(&p, r#"[{"combination": "bad", "t_ft": 1, "per_launch": [2.0], "n_ft_launch": 1}]"#).unwrap();
    assert!(matches!(io::load_timings(&p), Err(FdasError::InvalidTiming(_))));
}
