use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use mdis_ffi::*;

fn last_error() -> String {
    let p = mdis_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn patch_scene(side: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(side * side);
    let mut state = 12345u64;
    for y in 0..side {
        for x in 0..side {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let noise = (state >> 11) as f64 / (1u64 << 53) as f64;
            let inside = (side / 2 - 16..side / 2 + 16).contains(&x)
                && (side / 2 - 16..side / 2 + 16).contains(&y);
            v.push(if inside {
                noise
            } else {
                0.3 + 0.4 * x as f64 / side as f64
            });
        }
    }
    v
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(mdis_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn luminance_map_round_trip() {
    let side = 128;
    let lum = patch_scene(side);
    let mode = CString::new("uhmt0").unwrap();
    let mut map = ptr::null_mut();
    let st =
        unsafe { mdis_saliency_from_luminance(lum.as_ptr(), side, side, mode.as_ptr(), &mut map) };
    assert_eq!(st, MdisStatus::Ok);
    assert!(mdis_last_error_message().is_null());
    unsafe {
        assert_eq!(mdis_map_width(map), side);
        assert_eq!(mdis_map_height(map), side);
        let data = std::slice::from_raw_parts(mdis_map_data(map), side * side);
        assert!(data.iter().all(|v| (0.0..=1.0).contains(v)));
        let lo = data.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo == 0.0 && hi == 1.0 || data.iter().all(|&v| v == 0.5));
        mdis_map_free(map);
        mdis_map_free(ptr::null_mut());
        assert_eq!(mdis_map_width(ptr::null()), 0);
        assert!(mdis_map_data(ptr::null()).is_null());
    }
}

#[test]
fn matches_core_pipeline() {
    let side = 64;
    let lum = patch_scene(side);
    let mode = CString::new("uhmt3").unwrap();
    let mut map = ptr::null_mut();
    let st =
        unsafe { mdis_saliency_from_luminance(lum.as_ptr(), side, side, mode.as_ptr(), &mut map) };
    assert_eq!(st, MdisStatus::Ok);
    let arr = ndarray::Array2::from_shape_vec((side, side), lum).unwrap();
    let expect = mdis_core::saliency::compute_saliency_luminance(
        &arr,
        "uhmt3".parse().unwrap(),
        &mdis_core::saliency::SaliencyOptions::default(),
    )
    .unwrap();
    let got = unsafe { std::slice::from_raw_parts(mdis_map_data(map), side * side) };
    assert_eq!(got, expect.values.as_slice().unwrap());
    unsafe { mdis_map_free(map) };
}

#[test]
fn errors_are_reported() {
    let lum = vec![0.5; 64 * 64];
    let bad = CString::new("qhmt0").unwrap();
    let mut map = ptr::null_mut();
    let st = unsafe { mdis_saliency_from_luminance(lum.as_ptr(), 64, 64, bad.as_ptr(), &mut map) };
    assert_eq!(st, MdisStatus::InvalidMode);
    assert!(last_error().contains("qhmt0"));
    assert!(map.is_null());

    let mode = CString::new("uhmt0").unwrap();
    let st = unsafe { mdis_saliency_from_luminance(ptr::null(), 64, 64, mode.as_ptr(), &mut map) };
    assert_eq!(st, MdisStatus::NullPointer);
    let st = unsafe { mdis_saliency_from_luminance(lum.as_ptr(), 0, 64, mode.as_ptr(), &mut map) };
    assert_eq!(st, MdisStatus::InvalidArgument);

    let missing = CString::new("/nonexistent/x.png").unwrap();
    let st = unsafe { mdis_saliency_from_file(missing.as_ptr(), mode.as_ptr(), &mut map) };
    assert_eq!(st, MdisStatus::Io);
    assert!(last_error().contains("/nonexistent/x.png"));
}

#[test]
fn file_input() {
    let dir = std::env::temp_dir().join(format!("mdis-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("g.ppm");
    let (w, h) = (70usize, 50usize);
    let mut bytes = format!("P6\n{w} {h}\n255\n").into_bytes();
    for i in 0..w * h {
        let v = ((i * 37) % 251) as u8;
        bytes.extend_from_slice(&[v, v, v]);
    }
    std::fs::write(&path, bytes).unwrap();
    let p = CString::new(path.to_str().unwrap()).unwrap();
    let mode = CString::new("vhmt0").unwrap();
    let mut map = ptr::null_mut();
    let st = unsafe { mdis_saliency_from_file(p.as_ptr(), mode.as_ptr(), &mut map) };
    assert_eq!(st, MdisStatus::Ok, "{}", last_error());
    unsafe {
        assert_eq!((mdis_map_width(map), mdis_map_height(map)), (w, h));
        mdis_map_free(map);
    }
    let txt = dir.join("t.png");
    std::fs::write(&txt, b"not an image at all").unwrap();
    let p = CString::new(txt.to_str().unwrap()).unwrap();
    let st = unsafe { mdis_saliency_from_file(p.as_ptr(), mode.as_ptr(), &mut map) };
    assert_eq!(st, MdisStatus::UnsupportedFormat);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn metrics() {
    let (w, h) = (8usize, 6usize);
    let mut ind = vec![0.0; w * h];
    ind[2 * w + 3] = 1.0;
    ind[4 * w + 6] = 1.0;
    let (xs, ys) = ([3.0, 6.0], [2.0, 4.0]);
    let mut out = f64::NAN;
    unsafe {
        assert_eq!(
            mdis_auc(ind.as_ptr(), w, h, xs.as_ptr(), ys.as_ptr(), 2, &mut out),
            MdisStatus::Ok
        );
        assert_eq!(out, 1.0);
        let flat = vec![0.25; w * h];
        assert_eq!(
            mdis_auc(flat.as_ptr(), w, h, xs.as_ptr(), ys.as_ptr(), 2, &mut out),
            MdisStatus::Ok
        );
        assert_eq!(out, 0.5);
        assert_eq!(
            mdis_nss(flat.as_ptr(), w, h, xs.as_ptr(), ys.as_ptr(), 2, &mut out),
            MdisStatus::Degenerate
        );
        assert_eq!(out, 0.0);
        assert_eq!(
            mdis_nss(ind.as_ptr(), w, h, xs.as_ptr(), ys.as_ptr(), 2, &mut out),
            MdisStatus::Ok
        );
        // two ones among 48: mean 1/24, population std sqrt(1/24 * 23/24)
        let m = 1.0f64 / 24.0;
        let sd = (m * (1.0 - m)).sqrt();
        assert!((out - (1.0 - m) / sd).abs() < 1e-12);
        assert_eq!(
            mdis_lcc(ind.as_ptr(), ind.as_ptr(), w, h, &mut out),
            MdisStatus::Ok
        );
        assert!((out - 1.0).abs() < 1e-12);
        assert_eq!(
            mdis_auc(ind.as_ptr(), w, h, xs.as_ptr(), ys.as_ptr(), 0, &mut out),
            MdisStatus::NoFixations
        );
        let far = [100.0];
        assert_eq!(
            mdis_auc(ind.as_ptr(), w, h, far.as_ptr(), far.as_ptr(), 1, &mut out),
            MdisStatus::NoFixations
        );
        assert_eq!(
            mdis_lcc(ind.as_ptr(), ptr::null(), w, h, &mut out),
            MdisStatus::NullPointer
        );
    }
}

#[test]
fn header_is_valid_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/mdis.h");
    let src = std::env::temp_dir().join(format!("mdis-header-{}.c", std::process::id()));
    std::fs::write(
        &src,
        format!("#include \"{header}\"\nint main(void) {{ MdisMap *m = 0; (void)m; return MDIS_STATUS_OK; }}\n"),
    )
    .unwrap();
    let status = match Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"])
        .arg(&src)
        .status()
    {
        Ok(s) => s,
        Err(_) => {
            eprintln!("no C compiler; header check skipped");
            return;
        }
    };
    std::fs::remove_file(&src).ok();
    assert!(status.success());
}
