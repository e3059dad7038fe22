use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use convseq_ffi::*;

fn last_error() -> String {
    let p = convseq_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

/// One jittered sequence over neurons 0..30 every 300 bins, on 60 neurons
/// with sparse background.
fn sequence_raster() -> *mut ConvseqSpikes {
    let mut state = 12345u64;
    let mut next = move |m: usize| {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 33) as usize) % m
    };
    let (mut ns, mut ts) = (Vec::new(), Vec::new());
    for c in (150..6000).step_by(300) {
        for n in 0..30 {
            ns.push(n);
            ts.push(c + 2 * n + next(11) - 5);
        }
    }
    for _ in 0..1000 {
        ns.push(next(60));
        ts.push(next(6000));
    }
    let mut x = ptr::null_mut();
    let st = unsafe { convseq_spikes_new(60, 6000, ns.as_ptr(), ts.as_ptr(), ns.len(), &mut x) };
    assert_eq!(st, ConvseqStatus::Ok);
    x
}

#[test]
fn fit_roundtrip() {
    unsafe {
        let x = sequence_raster();
        let (mut n, mut t, mut nnz) = (0, 0, 0);
        assert_eq!(convseq_spikes_dims(x, &mut n, &mut t, &mut nnz), ConvseqStatus::Ok);
        assert_eq!((n, t), (60, 6000));
        assert!(nnz > 1500);

        let mut bank = ptr::null_mut();
        assert_eq!(convseq_bank_init_direct(60, 100, 1, 3, &mut bank), ConvseqStatus::Ok);
        let mut cfg = convseq_fit_config_default();
        assert_eq!(cfg.n_steps, 100);
        assert!(cfg.beta_xcor.is_nan());
        cfg.seed = 3;

        let mut fit = ptr::null_mut();
        assert_eq!(convseq_fit(x, bank, &cfg, &mut fit), ConvseqStatus::Ok);
        let (mut steps, mut k, mut bins, mut loss) = (0, 0, 0, 0.0);
        assert_eq!(convseq_fit_summary(fit, &mut steps, &mut k, &mut bins, &mut loss), ConvseqStatus::Ok);
        assert_eq!((steps, k, bins), (100, 1, 6000));
        assert!(loss.is_finite());

        let mut trace = vec![0.0; 6000];
        assert_eq!(convseq_fit_trace(fit, 0, trace.as_mut_ptr(), trace.len()), ConvseqStatus::Ok);

        let mut trained = ptr::null_mut();
        assert_eq!(convseq_fit_bank(fit, &mut trained), ConvseqStatus::Ok);
        let mut cal = ConvseqNullCalibration::default();
        assert_eq!(convseq_calibrate_null(x, trained, 100, 4.0, 1, &mut cal), ConvseqStatus::Ok);
        assert!((cal.alpha - (4.0 * cal.sigma0 + cal.mu0)).abs() < 1e-12);

        let mut found = 0;
        let mut peaks = vec![0usize; 64];
        let st = convseq_extract_detections(trace.as_ptr(), trace.len(), cal.alpha, 100, peaks.as_mut_ptr(), peaks.len(), &mut found);
        assert_eq!(st, ConvseqStatus::Ok);
        let mx = trace.iter().cloned().fold(0.0, f64::max);
        assert!(found >= 15, "{found} detections, max {mx}, cal {cal:?}");

        // Rows come back in sequence order.
        let mut order = vec![0usize; 60];
        let mut lat = vec![0.0; 60];
        assert_eq!(convseq_bank_sort(trained, 0, order.as_mut_ptr(), lat.as_mut_ptr(), 60), ConvseqStatus::Ok);
        let members: Vec<usize> = order.iter().copied().filter(|&n| n < 30).collect();
        let mut concordant = 0;
        for i in 0..members.len() {
            concordant += members[i + 1..].iter().filter(|&&m| m > members[i]).count();
        }
        assert!(concordant as f64 > 0.85 * 435.0, "{members:?}");

        let mut kernel = vec![0.0; 60 * 100];
        assert_eq!(convseq_bank_materialize(trained, 0, kernel.as_mut_ptr(), kernel.len()), ConvseqStatus::Ok);
        for row in kernel.chunks(100) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        convseq_bank_free(trained);
        convseq_fit_free(fit);
        convseq_bank_free(bank);
        convseq_spikes_free(x);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut x = ptr::null_mut();
        let ns = [0usize, 5];
        let ts = [1usize, 2];
        assert_eq!(convseq_spikes_new(3, 10, ns.as_ptr(), ts.as_ptr(), 2, &mut x), ConvseqStatus::OutOfRange);
        assert!(x.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(convseq_spikes_new(3, 10, ptr::null(), ts.as_ptr(), 2, &mut x), ConvseqStatus::NullPointer);
        assert_eq!(convseq_spikes_dims(ptr::null(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut()), ConvseqStatus::NullPointer);

        let mut bank = ptr::null_mut();
        assert_eq!(convseq_bank_init_gaussian(4, 10, 2, -1.0, true, 0, &mut bank), ConvseqStatus::InvalidArgument);
        assert_eq!(convseq_bank_init_gaussian(4, 10, 2, 3.0, true, 0, &mut bank), ConvseqStatus::Ok);
        let mut small = [0.0; 5];
        assert_eq!(convseq_bank_materialize(bank, 0, small.as_mut_ptr(), small.len()), ConvseqStatus::BufferTooSmall);
        assert!(last_error().contains("need 40"));
        let mut buf = [0.0; 40];
        assert_eq!(convseq_bank_materialize(bank, 2, buf.as_mut_ptr(), 40), ConvseqStatus::OutOfRange);
        assert_eq!(convseq_bank_materialize(bank, 1, buf.as_mut_ptr(), 40), ConvseqStatus::Ok);
        assert!(convseq_last_error().is_null());

        let missing = CString::new("/nonexistent/raster.coo").unwrap();
        assert_eq!(convseq_spikes_load(missing.as_ptr(), &mut x), ConvseqStatus::Io);

        convseq_bank_free(bank);
        convseq_spikes_free(ptr::null_mut());
    }
}

#[test]
fn save_and_load() {
    let dir = tempfile::tempdir().unwrap();
    unsafe {
        let x = sequence_raster();
        let p = CString::new(dir.path().join("x.csv").to_str().unwrap()).unwrap();
        assert_eq!(convseq_spikes_save(x, p.as_ptr()), ConvseqStatus::Ok);
        let mut y = ptr::null_mut();
        assert_eq!(convseq_spikes_load(p.as_ptr(), &mut y), ConvseqStatus::Ok);
        let (mut a, mut b) = (0, 0);
        convseq_spikes_dims(x, ptr::null_mut(), ptr::null_mut(), &mut a);
        convseq_spikes_dims(y, ptr::null_mut(), ptr::null_mut(), &mut b);
        assert_eq!(a, b);

        let mut bank = ptr::null_mut();
        convseq_bank_init_direct(60, 20, 2, 9, &mut bank);
        let bp = CString::new(dir.path().join("bank.json").to_str().unwrap()).unwrap();
        assert_eq!(convseq_bank_save(bank, bp.as_ptr()), ConvseqStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(convseq_bank_load(bp.as_ptr(), &mut back), ConvseqStatus::Ok);
        let (mut n, mut m, mut k) = (0, 0, 0);
        convseq_bank_dims(back, &mut n, &mut m, &mut k);
        assert_eq!((n, m, k), (60, 20, 2));
        let mut u = vec![0.0; 1200];
        let mut v = vec![0.0; 1200];
        convseq_bank_materialize(bank, 1, u.as_mut_ptr(), 1200);
        convseq_bank_materialize(back, 1, v.as_mut_ptr(), 1200);
        assert_eq!(u, v);
        for h in [bank, back] {
            convseq_bank_free(h);
        }
        convseq_spikes_free(x);
        convseq_spikes_free(y);
    }
}

fn target_dir() -> PathBuf {
    // tests/…/target/<profile>/deps/<test-binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().is_ok()
}

/// A C program built against the generated header and the static library.
#[test]
fn c_program_links_and_runs() {
    if !have_cc() {
        eprintln!("cc not found; skipping");
        return;
    }
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libconvseq_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("demo");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(manifest.join("tests/demo.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}\n{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout.contains("ok"), "{stdout}");
}
