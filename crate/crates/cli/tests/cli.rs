use std::path::Path;
use std::process::{Command, Output};

use wignerlab::output::read_csv;

fn wignerlab(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wignerlab"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("WIGNERLAB_THREADS", t),
        None => cmd.env_remove("WIGNERLAB_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const DOS: &[&str] =
    &["dos", "--n", "32,64", "--samples", "40", "--energy", "-0.4,0.3", "--eta-over-n", "4", "--seed", "17"];

#[test]
fn check_passes() {
    let o = wignerlab(&["check"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 15);
    assert!(!text.contains("FAIL"));
}

#[test]
fn csv_is_byte_identical_across_thread_counts() {
    let one = wignerlab(DOS, Some("1"));
    let four = wignerlab(DOS, Some("4"));
    let default = wignerlab(DOS, None);
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(one.stdout, default.stdout);
    let rows = read_csv(one.stdout.as_slice()).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.samples == 40 && r.series == "dos"));
}

#[test]
fn different_seeds_give_different_output() {
    let mut args = DOS.to_vec();
    *args.last_mut().unwrap() = "18";
    assert_ne!(wignerlab(DOS, Some("2")).stdout, wignerlab(&args, Some("2")).stdout);
}

#[test]
fn regularity_prints_gaussian_values() {
    let o = wignerlab(&["regularity"], None);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for (key, target) in [("I6", 120.0), ("I4", 12.0), ("I2pp", 8.0)] {
        let line = text.lines().find(|l| l.starts_with(&format!("{key}="))).unwrap();
        let v: f64 = line.split('=').nth(1).unwrap().parse().unwrap();
        assert!((v / target - 1.0).abs() < 1e-6, "{key} = {v}");
    }
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        vec!["frobnicate"],
        vec!["dos", "--n", "64"],
        vec!["dos", "--n", "64", "--samples", "3", "--eta", "-1"],
        vec!["dos", "--n", "64", "--samples", "3", "--eta", "0.1", "--energy", "1.9"],
        vec!["dos", "--n", "64", "--samples", "3", "--eta", "0.1", "--plot"],
        vec!["dos", "--n", "64", "--samples", "3", "--eta", "0.1", "--dist", "cauchy"],
        vec!["diagnostics", "--n", "8", "--eps", "0"],
    ] {
        let o = wignerlab(&args, None);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = wignerlab(DOS, Some("zero"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn diagnostics_emits_json() {
    let o = wignerlab(&["diagnostics", "--n", "40", "--seed", "3", "--j", "5", "--energy", "0.1", "--eps", "2"], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["n"], 40);
    assert_eq!(v["j"], 5);
    assert_eq!(v["lambda"].as_array().unwrap().len(), 39);
    assert_eq!(v["xi"].as_array().unwrap().len(), 39);
}

/// Parses an SVG file and returns its trimmed text nodes.
fn svg_texts(svg: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(svg).unwrap();
    let doc = roxmltree::Document::parse(&text).expect("well-formed SVG");
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    doc.descendants()
        .filter(|n| n.has_tag_name("text"))
        .filter_map(|n| n.text())
        .map(|t| t.trim().to_string())
        .collect()
}

#[test]
fn dos_plot_is_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dos.csv");
    let mut args = DOS.to_vec();
    args.extend(["--out", out.to_str().unwrap(), "--plot"]);
    let o = wignerlab(&args, None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_csv(std::fs::File::open(&out).unwrap()).unwrap().len(), 4);
    let labels = svg_texts(&dir.path().join("dos.svg"));
    assert!(labels.iter().any(|t| t == "dos"));
    assert!(labels.iter().any(|t| t == "dos reference"));
}

#[test]
fn sweep_plot_has_one_series_per_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.json");
    let o = wignerlab(
        &[
            "sweep",
            "--n",
            "32,64,128",
            "--samples",
            "20",
            "--eta",
            "0.5",
            "--eta-over-n",
            "10",
            "--eta-over-n32",
            "1",
            "--format",
            "json",
            "--out",
            out.to_str().unwrap(),
            "--plot",
        ],
        Some("2"),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 9);
    let labels = svg_texts(&dir.path().join("sweep.svg"));
    let legend: Vec<&String> = labels.iter().filter(|t| t.ends_with(" reference")).collect();
    assert_eq!(legend.len(), 3, "{labels:?}");
    for schedule in ["0.5", "10/N", "1/N^1.5"] {
        assert!(labels.iter().any(|t| t == schedule), "{schedule}: {labels:?}");
        assert!(legend.iter().any(|t| **t == format!("{schedule} reference")), "{schedule}: {labels:?}");
    }
}
