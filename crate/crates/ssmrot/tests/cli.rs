//! End-to-end checks of the command-line interface: artifact emission,
//! exit codes, tensor-export round trips, and the Coriolis toggle.

use std::path::Path;
use std::process::Command;

fn ssmrot() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ssmrot"))
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

#[test]
fn usage_errors_exit_2() {
    let out = ssmrot().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Config errors (two damping entries) also exit 2.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(
        &cfg,
        "[model]\nbuilder = \"duffing\"\n[damping]\nxi1 = 0.1\nalpha = 0.5\n",
    )
    .unwrap();
    let out = ssmrot()
        .args(["modes", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn computation_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = ssmrot()
        .args(["modes", "--manifest", "/nonexistent/model.json", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn modes_on_shaft_shows_whirl_splitting() {
    let dir = tempfile::tempdir().unwrap();
    let out0 = dir.path().join("w0");
    let out1 = dir.path().join("w1");
    for (spin, out) in [("0.0", &out0), ("80.0", &out1)] {
        let st = ssmrot()
            .args(["modes", "--builder", "shaft", "--spin", spin, "--out"])
            .arg(out)
            .output()
            .unwrap();
        assert!(st.status.success(), "stderr: {}", String::from_utf8_lossy(&st.stderr));
    }
    let parse_freqs = |text: &str| -> Vec<f64> {
        text.lines()
            .skip(1)
            .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap())
            .filter(|v| *v > 0.0)
            .collect()
    };
    let f0 = parse_freqs(&read(&out0.join("spectrum.csv")));
    let f1 = parse_freqs(&read(&out1.join("spectrum.csv")));
    // Non-spinning: first pair degenerate; spinning: visibly split.
    assert!((f0[0] - f0[1]).abs() < 1e-6 * f0[0]);
    assert!((f1[0] - f1[1]).abs() > 10.0, "no whirl splitting: {f1:?}");
}

#[test]
fn export_tensors_roundtrip_reproduces_ssm_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let tensors = dir.path().join("tensors");
    let st = ssmrot()
        .args([
            "export-tensors",
            "--builder",
            "beam",
            "--n-elements",
            "4",
            "--spin",
            "120.0",
            "--out",
        ])
        .arg(&tensors)
        .output()
        .unwrap();
    assert!(st.status.success(), "stderr: {}", String::from_utf8_lossy(&st.stderr));

    let out_a = dir.path().join("builtin");
    let st = ssmrot()
        .args([
            "reduce",
            "--builder",
            "beam",
            "--n-elements",
            "4",
            "--spin",
            "120.0",
            "--order",
            "3",
            "--pairs",
            "0",
            "--xi1",
            "0.001",
            "--out",
        ])
        .arg(&out_a)
        .output()
        .unwrap();
    assert!(st.status.success(), "stderr: {}", String::from_utf8_lossy(&st.stderr));

    let out_b = dir.path().join("reloaded");
    let st = ssmrot()
        .args(["reduce", "--order", "3", "--pairs", "0", "--xi1", "0.001", "--manifest"])
        .arg(tensors.join("model.json"))
        .args(["--out"])
        .arg(&out_b)
        .output()
        .unwrap();
    assert!(st.status.success(), "stderr: {}", String::from_utf8_lossy(&st.stderr));

    // Compare every stored SSM coefficient between the two routes.
    let (ssm_a, _) = ssmrot::ssm::serialize::from_json(&read(&out_a.join("ssm.json"))).unwrap();
    let (ssm_b, _) = ssmrot::ssm::serialize::from_json(&read(&out_b.join("ssm.json"))).unwrap();
    assert_eq!(ssm_a.w.coeffs.len(), ssm_b.w.coeffs.len());
    let mut worst = 0.0_f64;
    for (m, ca) in &ssm_a.w.coeffs {
        let cb = ssm_b.w.coeffs.get(m).expect("matching multi-index");
        let scale = ca.norm().max(1e-12);
        worst = worst.max((ca - cb).norm() / scale);
    }
    for (m, ca) in &ssm_a.r.coeffs {
        let cb = ssm_b.r.coeffs.get(m).expect("matching resonant index");
        let scale = ca.norm().max(1e-12);
        worst = worst.max((ca - cb).norm() / scale);
    }
    assert!(worst < 1e-10, "builtin vs reloaded SSM coefficients differ by {worst:.3e}");
}

#[test]
fn backbone_coriolis_toggle() {
    let dir = tempfile::tempdir().unwrap();
    let with = dir.path().join("with");
    let without = dir.path().join("without");
    for (out, extra) in [(&with, None), (&without, Some("--no-coriolis"))] {
        let mut cmd = ssmrot();
        cmd.args([
            "backbone",
            "--builder",
            "beam",
            "--n-elements",
            "8",
            "--rpm",
            "2000",
            "--order",
            "5",
            "--pairs",
            "0",
            "--rho-max",
            "0.3",
        ]);
        if let Some(flag) = extra {
            cmd.arg(flag);
        }
        let st = cmd.arg("--out").arg(out).output().unwrap();
        assert!(st.status.success(), "stderr: {}", String::from_utf8_lossy(&st.stderr));
    }
    let parse = |p: &Path| -> Vec<(f64, f64)> {
        read(&p.join("backbone.csv"))
            .lines()
            .skip(1)
            .map(|l| {
                let mut it = l.split(',');
                let rho: f64 = it.next().unwrap().parse().unwrap();
                let w: f64 = it.next().unwrap().parse().unwrap();
                (rho, w)
            })
            .collect()
    };
    let a = parse(&with);
    let b = parse(&without);
    let lin_diff = (a[0].1 - b[0].1).abs();
    let end_diff = (a.last().unwrap().1 - b.last().unwrap().1).abs();
    // Zero-amplitude frequencies within 1%; the finite-amplitude backbone
    // picks up a measurable extra separation from the Coriolis terms.
    assert!(lin_diff / b[0].1 < 0.01, "linear frequencies differ by {:.2}%", 100.0 * lin_diff / b[0].1);
    let nonlinear_extra = (end_diff - lin_diff).abs();
    assert!(
        nonlinear_extra > 1e-3,
        "no measurable Coriolis effect on the backbone: extra = {nonlinear_extra:.3e}"
    );
}

#[test]
fn scan_emits_summary() {
    let dir = tempfile::tempdir().unwrap();
    let st = ssmrot()
        .args([
            "backbone",
            "--builder",
            "beam",
            "--n-elements",
            "6",
            "--order",
            "3",
            "--pairs",
            "0",
            "--scan-speeds",
            "100,200",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(st.status.success(), "stderr: {}", String::from_utf8_lossy(&st.stderr));
    let summary = read(&dir.path().join("scan_summary.csv"));
    assert_eq!(summary.lines().count(), 3, "summary: {summary}");
    assert!(dir.path().join("speed_100.000000/backbone.csv").exists());
}
