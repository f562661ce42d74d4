//! Exercises the C ABI from Rust and from a C program linked against the
//! static library.

use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use qnl_chain_ffi::*;

fn last_error() -> String {
    let p = qnl_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn sine_load(n: usize, amp: f64) -> Vec<f64> {
    let raw: Vec<f64> = (1..=n)
        .map(|i| amp * (2.0 * std::f64::consts::PI * i as f64 / n as f64).sin())
        .collect();
    let m = raw.iter().sum::<f64>() / n as f64;
    raw.iter().map(|x| x - m).collect()
}

#[test]
fn energy_and_stability_of_uniform_state() {
    unsafe {
        let mut pot = ptr::null_mut();
        assert_eq!(qnl_potential_lennard_jones(&mut pot), QnlStatus::Ok);
        let mut y = ptr::null_mut();
        assert_eq!(qnl_deformation_uniform(32, 1.0, &mut y), QnlStatus::Ok);
        assert_eq!(qnl_deformation_len(y), 32);
        let mut e = 0.0;
        assert_eq!(
            qnl_energy(QnlModel::Atomistic, pot, ptr::null(), y, &mut e),
            QnlStatus::Ok
        );
        // phi(1) + phi(2) per bond, with eps = 1/N bonds weighted.
        let expected = -1.0 + (2f64.powi(-12) - 2.0 * 2f64.powi(-6));
        assert!((e - expected).abs() < 1e-12, "{e}");
        let mut c = 0.0;
        assert_eq!(
            qnl_stability_constant(QnlModel::CauchyBorn, pot, ptr::null(), y, &mut c),
            QnlStatus::Ok
        );
        assert!((c - 70.72558).abs() < 1e-4, "{c}");
        qnl_deformation_free(y);
        qnl_potential_free(pot);
    }
}

#[test]
fn solve_and_certify() {
    unsafe {
        let n = 64;
        let mut pot = ptr::null_mut();
        assert_eq!(qnl_potential_lennard_jones(&mut pot), QnlStatus::Ok);
        let mut part = ptr::null_mut();
        assert_eq!(qnl_partition_interval(n, 26, 38, &mut part), QnlStatus::Ok);
        let mut y0 = ptr::null_mut();
        assert_eq!(qnl_deformation_uniform(n, 1.05, &mut y0), QnlStatus::Ok);
        let load = sine_load(n, 0.1);
        let mut ya = ptr::null_mut();
        let mut iters = 0usize;
        assert_eq!(
            qnl_newton_solve(
                QnlModel::Atomistic,
                pot,
                ptr::null(),
                y0,
                load.as_ptr(),
                0.0,
                0,
                &mut ya,
                &mut iters
            ),
            QnlStatus::Ok
        );
        assert!(iters > 0);
        let (mut measured, mut bound) = (0.0, 0.0);
        assert_eq!(
            qnl_consistency(pot, part, ya, 2.0, &mut measured, &mut bound),
            QnlStatus::Ok
        );
        assert!(measured <= bound && bound > 0.0);
        assert_eq!(
            qnl_consistency(pot, part, ya, f64::INFINITY, &mut measured, &mut bound),
            QnlStatus::Ok
        );

        let mut cert = ptr::null_mut();
        assert_eq!(
            qnl_certify(
                QnlCertificateKind::APriori,
                pot,
                part,
                ya,
                load.as_ptr(),
                0.0,
                &mut cert
            ),
            QnlStatus::Ok
        );
        let mut s = QnlCertificateSummary::default();
        assert_eq!(qnl_certificate_summary(cert, &mut s), QnlStatus::Ok);
        assert!(s.certified && s.contraction < 1.0 && s.error_bound > 0.0);
        let mut json = ptr::null_mut();
        assert_eq!(qnl_certificate_json(cert, &mut json), QnlStatus::Ok);
        let text = CStr::from_ptr(json).to_string_lossy().into_owned();
        assert!(text.contains("\"status\":\"certified\""));
        qnl_string_free(json);
        qnl_certificate_free(cert);

        // The coupled solution lies within the certified radius.
        let mut yq = ptr::null_mut();
        assert_eq!(
            qnl_newton_solve(
                QnlModel::Qnl,
                pot,
                part,
                y0,
                load.as_ptr(),
                0.0,
                0,
                &mut yq,
                ptr::null_mut()
            ),
            QnlStatus::Ok
        );
        let (mut sa, mut sq) = (vec![0.0; n], vec![0.0; n]);
        assert_eq!(
            qnl_deformation_strains(ya, sa.as_mut_ptr(), n),
            QnlStatus::Ok
        );
        assert_eq!(
            qnl_deformation_strains(yq, sq.as_mut_ptr(), n),
            QnlStatus::Ok
        );
        let err = (sa
            .iter()
            .zip(&sq)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / n as f64)
            .sqrt();
        assert!(err <= s.error_bound, "{err} > {}", s.error_bound);

        let mut cert2 = ptr::null_mut();
        assert_eq!(
            qnl_certify(
                QnlCertificateKind::APosteriori,
                pot,
                part,
                yq,
                load.as_ptr(),
                0.5,
                &mut cert2
            ),
            QnlStatus::Ok
        );
        assert_eq!(qnl_certificate_summary(cert2, &mut s), QnlStatus::Ok);
        assert!(s.certified && err <= s.error_bound);
        qnl_certificate_free(cert2);

        // Certifying a non-equilibrium is an error, not a verdict.
        let mut bad = ptr::null_mut();
        assert_eq!(
            qnl_certify(
                QnlCertificateKind::APriori,
                pot,
                part,
                y0,
                load.as_ptr(),
                0.0,
                &mut bad
            ),
            QnlStatus::NotEquilibrium
        );
        assert!(bad.is_null());

        for h in [ya, yq, y0] {
            qnl_deformation_free(h);
        }
        qnl_partition_free(part);
        qnl_potential_free(pot);
    }
}

#[test]
fn errors_are_reported_not_panicked() {
    unsafe {
        let mut pot = ptr::null_mut();
        assert_eq!(
            qnl_potential_morse(-1.0, &mut pot),
            QnlStatus::InvalidArgument
        );
        assert!(pot.is_null());
        assert!(last_error().contains("potential"));

        assert_eq!(
            qnl_potential_lennard_jones(ptr::null_mut()),
            QnlStatus::NullPointer
        );
        assert!(last_error().contains("null"));

        let mut y = ptr::null_mut();
        assert_eq!(
            qnl_deformation_uniform(3, 1.0, &mut y),
            QnlStatus::InvalidArgument
        );
        let strains = [1.0, 1.0, -0.5, 1.0, 1.0];
        assert_eq!(
            qnl_deformation_from_strains(strains.as_ptr(), 5, &mut y),
            QnlStatus::Ok
        );
        let mut lj = ptr::null_mut();
        assert_eq!(qnl_potential_lennard_jones(&mut lj), QnlStatus::Ok);
        let mut e = 0.0;
        assert_eq!(
            qnl_energy(QnlModel::Atomistic, lj, ptr::null(), y, &mut e),
            QnlStatus::Inadmissible
        );
        assert_eq!(
            qnl_energy(QnlModel::Qnl, lj, ptr::null(), y, &mut e),
            QnlStatus::NullPointer
        );

        let mut small = [0.0; 2];
        assert_eq!(
            qnl_deformation_strains(y, small.as_mut_ptr(), 2),
            QnlStatus::BufferTooSmall
        );

        let mut part = ptr::null_mut();
        let atoms = [5usize];
        assert_eq!(
            qnl_partition_new(8, atoms.as_ptr(), 1, &mut part),
            QnlStatus::Ok
        );
        qnl_partition_free(part);
        let lonely = [1usize, 2, 3, 5, 6, 7, 8];
        assert_eq!(
            qnl_partition_new(8, lonely.as_ptr(), lonely.len(), &mut part),
            QnlStatus::InvalidArgument
        );

        let mut buf = [0 as std::ffi::c_char; 8];
        let len = qnl_last_error_copy(buf.as_mut_ptr(), buf.len());
        assert!(len > 7);
        assert_eq!(buf[7], 0);

        qnl_deformation_free(y);
        qnl_potential_free(lj);
        qnl_potential_free(ptr::null_mut());
    }
}

#[test]
fn header_is_generated_and_usable_from_c() {
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = crate_dir.join("include/qnl_chain.h");
    let text = std::fs::read_to_string(&header).expect("header generated by build script");
    for sym in [
        "qnl_newton_solve",
        "qnl_certify",
        "QNL_STATUS_OK",
        "QnlCertificateSummary",
    ] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
    let target = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let profile_dir = target
        .parent()
        .expect("target dir")
        .join(if cfg!(debug_assertions) {
            "debug"
        } else {
            "release"
        });
    let lib = profile_dir.join("libqnl_chain_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping C link check: static library or C compiler unavailable");
        return;
    }
    let src = target.join("abi_smoke.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "qnl_chain.h"
int main(void) {
    QnlPotential *pot = NULL;
    QnlDeformation *y = NULL;
    double e = 0.0, c = 0.0;
    if (qnl_potential_lennard_jones(&pot) != QNL_STATUS_OK) return 1;
    if (qnl_deformation_uniform(16, 1.0, &y) != QNL_STATUS_OK) return 2;
    if (qnl_energy(QNL_MODEL_ATOMISTIC, pot, NULL, y, &e) != QNL_STATUS_OK) return 3;
    if (qnl_stability_constant(QNL_MODEL_ATOMISTIC, pot, NULL, y, &c) != QNL_STATUS_OK) return 4;
    if (qnl_deformation_uniform(2, 1.0, &y) == QNL_STATUS_OK) return 5;
    printf("%s %.6f %.6f %s\n", qnl_version(), e, c, qnl_last_error_message());
    qnl_potential_free(pot);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = target.join("abi_smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile/link failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(
        out.status.success(),
        "C program exited with {:?}",
        out.status
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with(env!("CARGO_PKG_VERSION")), "{stdout}");
    assert!(stdout.contains("at least 4"), "{stdout}");
}
