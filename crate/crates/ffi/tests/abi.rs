use std::ffi::CStr;
use std::ptr;

use hbsae_ffi::*;

struct Data {
    areas: Vec<i64>,
    welfare: Vec<f64>,
    x: Vec<f64>,
}

/// Two areas of eight units with an intercept and one binary covariate.
fn data() -> Data {
    let mut d = Data {
        areas: vec![],
        welfare: vec![],
        x: vec![],
    };
    for area in [1i64, 2] {
        for i in 0..8 {
            let x1 = (i % 2) as f64;
            d.areas.push(area);
            d.welfare.push(6.0 + 4.0 * x1 + area as f64 + (i as f64 * 1.7).sin() * 3.0);
            d.x.extend([1.0, x1]);
        }
    }
    d
}

fn last_error() -> String {
    let p = hbsae_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn build() -> (*mut HbsaeSample, *mut HbsaeCensus) {
    let d = data();
    let mut sample = ptr::null_mut();
    let status = hbsae_sample_new(
        16,
        2,
        d.areas.as_ptr(),
        d.welfare.as_ptr(),
        ptr::null(),
        ptr::null(),
        d.x.as_ptr(),
        &mut sample,
    );
    assert_eq!(status, HbsaeStatus::Ok);
    assert_eq!(hbsae_sample_len(sample), 16);
    let areas = [1i64, 1, 2, 2];
    let counts = [20u64, 30, 10, 15];
    let x = [1.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0];
    let mut census = ptr::null_mut();
    let status = hbsae_census_new(
        sample,
        4,
        2,
        areas.as_ptr(),
        counts.as_ptr(),
        ptr::null(),
        x.as_ptr(),
        &mut census,
    );
    assert_eq!(status, HbsaeStatus::Ok);
    (sample, census)
}

unsafe fn options() -> HbsaeOptions {
    let mut o = std::mem::zeroed();
    assert_eq!(hbsae_options_default(&mut o), HbsaeStatus::Ok);
    o.draws = 400;
    o.grid = 200;
    o.poverty_line = 10.0;
    o.seed = 3;
    o
}

unsafe fn rows(est: *const HbsaeEstimate) -> Vec<HbsaeSummary> {
    (0..hbsae_estimate_len(est))
        .map(|i| {
            let mut s = HbsaeSummary::default();
            assert_eq!(hbsae_estimate_summary(est, i, &mut s), HbsaeStatus::Ok);
            s
        })
        .collect()
}

#[test]
fn estimate_round_trip() {
    unsafe {
        let (sample, census) = build();
        let alphas = [0.0, 1.0];
        let opts = options();
        let mut est = ptr::null_mut();
        let status = hbsae_estimate(sample, census, alphas.as_ptr(), 2, &opts, &mut est);
        assert_eq!(status, HbsaeStatus::Ok, "{}", last_error());
        let got = rows(est);
        assert_eq!(got.len(), 4);
        assert_eq!(
            got.iter().map(|r| (r.area, r.indicator)).collect::<Vec<_>>(),
            vec![(1, 0), (1, 1), (2, 0), (2, 1)]
        );
        assert_eq!(got[0].population, 58);
        assert_eq!(got[2].sample_size, 8);
        for r in &got {
            assert!((0.0..=1.0).contains(&r.mean));
            assert!(r.et_lower <= r.mean && r.mean <= r.et_upper);
            assert!(r.hpd_upper - r.hpd_lower <= r.et_upper - r.et_lower + 1e-12);
        }

        let mut again = ptr::null_mut();
        assert_eq!(hbsae_estimate(sample, census, alphas.as_ptr(), 2, &opts, &mut again), HbsaeStatus::Ok);
        let same = rows(again);
        assert!(got.iter().zip(&same).all(|(a, b)| a.mean == b.mean && a.hpd_lower == b.hpd_lower));

        let mut s = HbsaeSummary::default();
        assert_eq!(hbsae_estimate_summary(est, 99, &mut s), HbsaeStatus::Usage);
        assert!(last_error().contains("out of range"));

        hbsae_estimate_free(est);
        hbsae_estimate_free(again);
        hbsae_census_free(census);
        hbsae_sample_free(sample);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let (sample, census) = build();
        let alphas = [0.0];
        let mut est = ptr::null_mut();

        let status = hbsae_estimate(ptr::null(), census, alphas.as_ptr(), 1, ptr::null(), &mut est);
        assert_eq!(status, HbsaeStatus::NullPointer);
        assert_eq!(last_error(), "sample is null");

        let status = hbsae_estimate(sample, census, alphas.as_ptr(), 1, ptr::null(), &mut est);
        assert_eq!(status, HbsaeStatus::Usage);
        assert!(last_error().contains("poverty line"));

        let mut opts = options();
        opts.transform = 7;
        let status = hbsae_estimate(sample, census, alphas.as_ptr(), 1, &opts, &mut est);
        assert_eq!(status, HbsaeStatus::Usage);

        let mut opts = options();
        opts.transform = 1;
        opts.shift = -100.0;
        let status = hbsae_estimate(sample, census, alphas.as_ptr(), 1, &opts, &mut est);
        assert_eq!(status, HbsaeStatus::Usage, "{}", last_error());
        assert!(est.is_null());

        let lone = [3i64, 3, 3];
        let counts = [5u64, 5, 5];
        let x = [1.0, 0.0, 1.0, 1.0, 1.0, 0.0];
        let mut extra = ptr::null_mut();
        let status = hbsae_census_new(sample, 3, 2, lone.as_ptr(), counts.as_ptr(), ptr::null(), x.as_ptr(), &mut extra);
        assert_eq!(status, HbsaeStatus::Ok);
        let opts = options();
        let status = hbsae_estimate(sample, extra, alphas.as_ptr(), 1, &opts, &mut est);
        assert_eq!(status, HbsaeStatus::Validation, "{}", last_error());
        hbsae_census_free(extra);

        let mut d = data();
        d.welfare[3] = f64::NAN;
        let mut bad = ptr::null_mut();
        let status = hbsae_sample_new(16, 2, d.areas.as_ptr(), d.welfare.as_ptr(), ptr::null(), ptr::null(), d.x.as_ptr(), &mut bad);
        if status == HbsaeStatus::Ok {
            let status = hbsae_estimate(bad, census, alphas.as_ptr(), 1, &opts, &mut est);
            assert_eq!(status, HbsaeStatus::Validation, "{}", last_error());
            hbsae_sample_free(bad);
        } else {
            assert_eq!(status, HbsaeStatus::Validation);
        }

        let status = hbsae_options_default(ptr::null_mut());
        assert_eq!(status, HbsaeStatus::NullPointer);
        assert_eq!(hbsae_options_default(&mut options()), HbsaeStatus::Ok);
        assert!(hbsae_last_error().is_null());

        hbsae_sample_free(ptr::null_mut());
        hbsae_census_free(census);
        hbsae_sample_free(sample);
    }
}

const HEADER: &str = include_str!("../include/hbsae.h");

#[test]
fn header_declares_the_abi() {
    for name in [
        "typedef struct HbsaeSample HbsaeSample;",
        "typedef struct HbsaeCensus HbsaeCensus;",
        "typedef struct HbsaeEstimate HbsaeEstimate;",
        "HBSAE_STATUS_OK = 0",
        "HBSAE_STATUS_VALIDATION = 3",
        "HBSAE_STATUS_PANIC = 5",
        "hbsae_last_error(void)",
        "hbsae_options_default(",
        "hbsae_sample_new(",
        "hbsae_census_new(",
        "hbsae_estimate(",
        "hbsae_estimate_len(",
        "hbsae_estimate_summary(",
        "hbsae_sample_free(",
        "hbsae_census_free(",
        "hbsae_estimate_free(",
    ] {
        assert!(HEADER.contains(name), "header lacks {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    let dir = tempfile_dir();
    let src = dir.join("use.c");
    std::fs::write(
        &src,
        "#include \"hbsae.h\"\nint main(void) { HbsaeOptions o; return hbsae_options_default(&o) == HBSAE_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let status = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", include])
        .arg(&src)
        .status()
        .unwrap();
    std::fs::remove_dir_all(&dir).unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<String, ()> {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    std::process::Command::new(&cc)
        .arg("--version")
        .output()
        .map(|_| cc)
        .map_err(|_| ())
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("hbsae-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
