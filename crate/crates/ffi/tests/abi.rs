use std::ffi::{CStr, CString};
use std::ptr;

use fdas_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(fdas_last_error()) }.to_string_lossy().into_owned()
}

fn desk() -> *mut FdasConfigHandle {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { fdas_config_desk(&mut cfg) }, FdasStatus::Ok);
    cfg
}

#[test]
fn run_matches_core_pipeline() {
    let cfg = desk();
    let inj = FdasInjection { channel: 1000, harmonics: 4, amplitude: 0.2 };
    let mut series = ptr::null_mut();
    unsafe {
        assert_eq!(fdas_series_generate(cfg, &inj, 1, 1.0, 3, &mut series), FdasStatus::Ok);
        assert_eq!(fdas_series_len(series), 4096);
        let mut opts = fdas_run_options_default();
        opts.hm = FdasHm::MultiR;
        opts.threads = 2;
        let mut res = ptr::null_mut();
        assert_eq!(fdas_run(cfg, series, &opts, &mut res), FdasStatus::Ok, "{}", last_error());

        let n = fdas_result_candidate_count(res);
        let mut written = 0;
        let mut small = vec![FdasCandidate { harmonic: 0, template: 0, channel: 0, power: 0.0 }; n.saturating_sub(1)];
        if n > 0 {
            assert_eq!(fdas_result_candidates(res, small.as_mut_ptr(), small.len(), &mut written), FdasStatus::BufferTooSmall);
            assert_eq!(written, n);
        }
        let mut cands = vec![FdasCandidate { harmonic: 0, template: 0, channel: 0, power: 0.0 }; n];
        assert_eq!(fdas_result_candidates(res, cands.as_mut_ptr(), n, &mut written), FdasStatus::Ok);

        // same answer straight from the library
        let core_cfg = fdas_core::FdasConfig::desk_scale();
        let x = fdas_core::signal::generate_input(
            &core_cfg,
            &[fdas_core::Injection { channel: 1000, harmonics: 4, amplitude: 0.2 }],
            1.0,
            3,
        )
        .unwrap();
        let bank = fdas_core::FilterBank::synthetic(core_cfg.n_temp, core_cfg.n_tap).unwrap();
        let run_opts = fdas_core::RunOptions {
            hm: fdas_core::HarmonicStrategy::MultipleHpR { cols_per_group: 64, points_per_item: 4 },
            filters_per_launch: 2,
            threads: 2,
            ..fdas_core::RunOptions::default()
        };
        let want = fdas_core::run(&core_cfg, &x, &bank, &run_opts).unwrap();
        let want: Vec<_> = want
            .candidates
            .entries()
            .into_iter()
            .map(|c| FdasCandidate { harmonic: c.harmonic, template: c.template, channel: c.channel, power: c.power })
            .collect();
        assert_eq!(cands, want);
        assert!(cands.iter().any(|c| c.channel == 1000));

        let (mut nt, mut nc) = (0, 0);
        let mut fop = vec![0f32; 9 * 4096];
        assert_eq!(fdas_result_fop(res, fop.as_mut_ptr(), fop.len(), &mut nt, &mut nc), FdasStatus::Ok);
        assert_eq!((nt, nc), (9, 4096));
        let mut t = FdasStageTimes { t_ft: 0.0, t_fop: 0.0, t_hm: 0.0 };
        assert_eq!(fdas_result_timing(res, &mut t), FdasStatus::Ok);
        assert!(t.t_ft > 0.0 && t.t_hm > 0.0);

        fdas_result_free(res);
        fdas_series_free(series);
        fdas_config_free(cfg);
    }
}

#[test]
fn errors_carry_status_and_message() {
    unsafe {
        let mut cfg = ptr::null_mut();
        let bad = CString::new(r#"{"n_chan": 1000}"#).unwrap();
        assert_eq!(fdas_config_from_json(bad.as_ptr(), &mut cfg), FdasStatus::InvalidArgument);
        assert!(last_error().contains("n_chan"), "{}", last_error());
        let bad = CString::new(r#"{"n_chan": "many"}"#).unwrap();
        assert_eq!(fdas_config_from_json(bad.as_ptr(), &mut cfg), FdasStatus::Parse);
        assert_eq!(fdas_config_from_json(ptr::null(), &mut cfg), FdasStatus::NullArgument);
        assert!(cfg.is_null());

        let good = CString::new(r#"{"n_chan": 8192, "n_temp": 5}"#).unwrap();
        assert_eq!(fdas_config_from_json(good.as_ptr(), &mut cfg), FdasStatus::Ok);
        assert_eq!(last_error(), "");
        let (mut t, mut c, mut h, mut n) = (0, 0, 0, 0);
        assert_eq!(fdas_config_dims(cfg, &mut t, &mut c, &mut h, &mut n), FdasStatus::Ok);
        assert_eq!((t, c), (5, 8192));

        let data = [1.0f32, 0.0, 0.0, 1.0];
        let mut s = ptr::null_mut();
        assert_eq!(fdas_series_from_interleaved(data.as_ptr(), 2, &mut s), FdasStatus::Ok);
        let mut res = ptr::null_mut();
        // series shorter than the configured channel count
        assert_ne!(fdas_run(cfg, s, ptr::null(), &mut res), FdasStatus::Ok);
        assert!(res.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(fdas_run(ptr::null(), s, ptr::null(), &mut res), FdasStatus::NullArgument);

        let mut opts = fdas_run_options_default();
        opts.conv = FdasConv::OlsFd;
        opts.conv_param = 16;
        let desk = desk();
        let mut s2 = ptr::null_mut();
        assert_eq!(fdas_series_generate(desk, ptr::null(), 0, 1.0, 1, &mut s2), FdasStatus::Ok);
        assert_eq!(fdas_run(desk, s2, &opts, &mut res), FdasStatus::InvalidArgument);

        fdas_series_free(s);
        fdas_series_free(s2);
        fdas_config_free(cfg);
        fdas_config_free(desk);
        fdas_config_free(ptr::null_mut());
    }
}

#[test]
fn model_entry_points() {
    let st = FdasStageTimes { t_ft: 347.0, t_fop: 560.0, t_hm: 122.0 };
    let mut v = 0.0;
    let mut depth = 0;
    unsafe {
        assert_eq!(fdas_model_total_latency(&st, &mut v), FdasStatus::Ok);
        assert_eq!(v, 1029.0);
        assert_eq!(fdas_model_choose_buffering(&st, &mut depth), FdasStatus::Ok);
        assert_eq!(depth, 2);
        assert_eq!(fdas_model_ideal_period(&st, 2, &mut v), FdasStatus::Ok);
        assert_eq!(v, 560.0);
        assert_eq!(fdas_model_ideal_period(&st, 4, &mut v), FdasStatus::InvalidArgument);
        assert_eq!(fdas_model_contended_period(&st, 2, ptr::null(), &mut v), FdasStatus::Ok);
        assert_eq!(v, 560.0);
        let demand = FdasStageTimes { t_ft: 0.6, t_fop: 0.6, t_hm: 0.0 };
        assert_eq!(fdas_model_contended_period(&st, 3, &demand, &mut v), FdasStatus::Ok);
        assert!(v > 560.0);
        assert_eq!(fdas_model_multi_device_period(&st, 2, FdasScheme::MultiInput, 0.0, &mut v), FdasStatus::Ok);
        assert_eq!(v, 280.0);
        let neg = FdasStageTimes { t_ft: -1.0, ..st };
        assert_eq!(fdas_model_total_latency(&neg, &mut v), FdasStatus::InvalidArgument);
        assert_eq!(fdas_model_total_latency(&st, ptr::null_mut()), FdasStatus::NullArgument);
    }
}
