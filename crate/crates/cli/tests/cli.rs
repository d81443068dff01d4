use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use aptqr_core::report::fmt2;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn snapshot_config() -> PathBuf {
    root().join("configs/snapshot.conf")
}

fn aptqr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aptqr"))
        .args(args)
        .env_remove("APTQR_DATA_DIR")
        .output()
        .expect("spawn aptqr")
}

fn run_into(out: &Path, extra: &[&str]) {
    let config = snapshot_config();
    let mut args = vec!["run", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = aptqr(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn csv_rows(bytes: &[u8]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(bytes);
    let headers = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect();
    (headers, rows)
}

/// Config text with `data_dir` replaced by an absolute path (or dropped).
fn config_with_data_dir(dir: &Path, data_dir: Option<&Path>) -> PathBuf {
    let text = fs::read_to_string(snapshot_config()).unwrap();
    let mut out = String::new();
    for line in text.lines() {
        if line.starts_with("data_dir") {
            if let Some(d) = data_dir {
                out.push_str(&format!("data_dir = {}\n", d.display()));
            }
        } else if !line.starts_with("output_dir") {
            out.push_str(line);
            out.push('\n');
        }
    }
    out.push_str("output_dir = out\n");
    let path = dir.join("run.conf");
    fs::write(&path, out).unwrap();
    path
}

#[test]
fn same_seed_gives_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_into(&a, &[]);
    run_into(&b, &[]);
    let (fa, fb) = (read_dir(&a), read_dir(&b));
    assert!(fa.contains_key("report.md") && fa.len() > 10);
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (name, bytes) in &fa {
        assert!(bytes == &fb[name], "{name} differs between identical runs");
    }
}

#[test]
fn seed_changes_only_bootstrap_cells() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_into(&a, &[]);
    run_into(&b, &["--seed", "7"]);
    let (fa, fb) = (read_dir(&a), read_dir(&b));
    let bootstrap_column = |h: &str| h.ends_with("_se") || h.ends_with("_p") || h.starts_with("Lower") || h.starts_with("Upper");
    let mut changed = 0;
    for (name, bytes) in fa.iter().filter(|(n, _)| n.ends_with(".csv")) {
        let (ha, ra) = csv_rows(bytes);
        let (hb, rb) = csv_rows(&fb[name]);
        assert_eq!(ha, hb, "{name}");
        assert_eq!(ra.len(), rb.len(), "{name}");
        for (x, y) in ra.iter().zip(&rb) {
            for (j, (u, v)) in x.iter().zip(y).enumerate() {
                if u == v {
                    continue;
                }
                changed += 1;
                let allowed = bootstrap_column(&ha[j])
                    || (name == "metadata.csv" && x[0] == "seed")
                    || (name == "impact.csv" && x[0] == "Tail-area p-value");
                assert!(allowed, "{name}: column `{}` row `{}` changed with the seed", ha[j], x[0]);
            }
        }
    }
    assert!(changed > 0, "a new seed should move some bootstrap cells");
}

/// Every numeric token in a report.md table is either a two-decimal
/// rendering of some CSV value, an integer printed in some CSV, or part of a
/// cell copied verbatim from a CSV field.
#[test]
fn markdown_numbers_come_from_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    run_into(tmp.path(), &[]);
    let files = read_dir(tmp.path());
    let mut csv_text = String::new();
    let mut rounded = std::collections::HashSet::new();
    let mut fields = std::collections::HashSet::new();
    for (_, bytes) in files.iter().filter(|(n, _)| n.ends_with(".csv")) {
        csv_text.push_str(std::str::from_utf8(bytes).unwrap());
        let (headers, rows) = csv_rows(bytes);
        fields.extend(headers);
        for field in rows.iter().flatten() {
            if let Ok(v) = field.parse::<f64>() {
                rounded.insert(fmt2(v));
            }
            fields.insert(field.clone());
        }
    }
    let md = std::str::from_utf8(&files["report.md"]).unwrap();
    let mut checked = 0;
    for line in md.lines().filter(|l| l.starts_with('|')) {
        for cell in line.split('|') {
            // text cells such as dates and the quantile list are copied verbatim
            if fields.contains(cell.trim()) {
                checked += numeric_tokens(cell).len();
                continue;
            }
            for token in numeric_tokens(cell) {
                checked += 1;
                let ok = if token.contains('.') {
                    rounded.contains(&token)
                } else {
                    csv_text.contains(token.trim_start_matches('-'))
                };
                assert!(ok, "markdown number {token} (in `{}`) has no CSV source", cell.trim());
            }
        }
    }
    assert!(checked > 300, "only {checked} numbers checked");
}

fn numeric_tokens(cell: &str) -> Vec<String> {
    let chars: Vec<char> = cell.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let starts = chars[i].is_ascii_digit() && (i == 0 || !chars[i - 1].is_alphanumeric() && chars[i - 1] != '_');
        if !starts {
            i += 1;
            continue;
        }
        let begin = if i > 0 && chars[i - 1] == '-' { i - 1 } else { i };
        let mut j = i;
        while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
            j += 1;
        }
        out.push(chars[begin..j].iter().collect());
        i = j;
    }
    out
}

#[test]
fn quantile_table_has_one_column_per_tau() {
    let tmp = tempfile::tempdir().unwrap();
    run_into(tmp.path(), &[]);
    let md = fs::read_to_string(tmp.path().join("report.md")).unwrap();
    let header = md
        .lines()
        .skip_while(|l| !l.starts_with("## Quantile regression with event dummies"))
        .find(|l| l.starts_with('|'))
        .unwrap();
    assert_eq!(header, "| Variable | Q(0.25) | Q(0.5) | Q(0.75) | Q(0.9) |");
}

#[test]
fn missing_target_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(snapshot_config()).unwrap().replace("target = MCOILWTICO", "");
    let path = tmp.path().join("bad.conf");
    fs::write(&path, text).unwrap();
    let out = tmp.path().join("out");
    let o = aptqr(&["run", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("config error") && err.contains("target"), "{err}");
    assert!(!out.exists());
}

#[test]
fn failing_stage_is_named_and_leaves_no_output() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    fs::create_dir(&data).unwrap();
    for e in fs::read_dir(root().join("data/snapshot")).unwrap() {
        let e = e.unwrap();
        fs::copy(e.path(), data.join(e.file_name())).unwrap();
    }
    // a non-positive price breaks the excess-return transform
    let wti = data.join("MCOILWTICO.csv");
    let text = fs::read_to_string(&wti).unwrap();
    let broken: String = text
        .lines()
        .map(|l| if l.starts_with("2019-06-01") { "2019-06-01,-3".to_string() } else { l.to_string() })
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(&wti, broken).unwrap();
    let config = config_with_data_dir(tmp.path(), Some(&data));
    let out = tmp.path().join("out");
    let o = aptqr(&["run", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("stage `transform`"), "{err}");
    assert!(!out.exists());
}

#[test]
fn data_dir_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let data = root().join("data/snapshot");
    let bogus = tmp.path().join("nowhere");
    let config = config_with_data_dir(tmp.path(), None);
    let cfg = config.to_str().unwrap();
    let describe = |env: Option<&Path>, flag: Option<&Path>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_aptqr"));
        cmd.args(["describe", cfg]).env_remove("APTQR_DATA_DIR");
        if let Some(e) = env {
            cmd.env("APTQR_DATA_DIR", e);
        }
        if let Some(f) = flag {
            cmd.arg("--data-dir").arg(f);
        }
        cmd.output().unwrap()
    };
    let o = describe(None, None);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("no data directory"));

    let o = describe(Some(&data), None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("| MCOILWTICO |"));

    let o = describe(Some(&bogus), Some(&data));
    assert!(o.status.success(), "flag should win over the environment");

    let o = describe(Some(&data), Some(&bogus));
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("not found"));

    // a data_dir key in the config beats the environment
    let with_key = config_with_data_dir(tmp.path(), Some(&data));
    let o = Command::new(env!("CARGO_BIN_EXE_aptqr"))
        .args(["describe", with_key.to_str().unwrap()])
        .env("APTQR_DATA_DIR", &bogus)
        .output()
        .unwrap();
    assert!(o.status.success());
}

#[test]
fn qr_and_impact_subcommands() {
    let config = snapshot_config();
    let cfg = config.to_str().unwrap();
    let o = aptqr(&["qr", cfg, "--tau", "0.75"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("| Variable | Q(0.75) |") && stdout.contains("| erSP |"));

    let o = aptqr(&["impact", cfg, "--date", "2020-04"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("Causal impact from 2020-04"));

    let o = aptqr(&["qr", cfg, "--tau", "1.5"]);
    assert!(!o.status.success());
    let o = aptqr(&["impact", cfg, "--date", "2020-13"]);
    assert!(!o.status.success());
}

#[test]
fn quantile_normalize_flag_is_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    run_into(tmp.path(), &["--quantile-normalize"]);
    let meta = fs::read_to_string(tmp.path().join("metadata.csv")).unwrap();
    assert!(meta.contains("quantile_normalize,true"));
}
