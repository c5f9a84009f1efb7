//! End-to-end checks of the `netjam` binary: exit codes, file layout,
//! manifest contents, and byte-identical reproducibility.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn netjam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netjam"))
        .args(args)
        .output()
        .expect("spawn netjam")
}

fn write_cfg(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn config_errors_exit_1() {
    let tmp = TempDir::new().unwrap();
    let cases: &[(&str, &str)] = &[
        ("kind = generate\nbogus = 1\n", "unknown key"),
        ("kind = generate\np = 1.5\n", "p"),
        ("kind = curve\nlambdas = \n", "lambdas"),
        ("N = 100\n", "kind"),
        ("kind = generate\nN 100\n", "="),
    ];
    for (i, (body, needle)) in cases.iter().enumerate() {
        let cfg = write_cfg(tmp.path(), &format!("bad{i}.cfg"), body);
        let cfg = cfg.to_str().unwrap();
        for sub in ["run", "validate"] {
            let out = netjam(&[sub, cfg]);
            assert_eq!(exit_code(&out), 1, "{sub} case {i}: {}", stderr(&out));
            assert!(
                stderr(&out).contains(needle),
                "{sub} case {i}: stderr {:?} misses {needle:?}",
                stderr(&out)
            );
        }
    }
    let out = netjam(&["run", tmp.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1, "absent file should be a config error");
}

#[test]
fn shipped_configs_validate() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for n in 1..=5 {
        let path = configs.join(format!("figure{n}.cfg"));
        let out = netjam(&["validate", path.to_str().unwrap()]);
        assert_eq!(exit_code(&out), 0, "figure{n}.cfg: {}", stderr(&out));
        let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
        assert!(stdout.contains("ok"), "figure{n}.cfg stdout: {stdout:?}");
    }
}

#[test]
fn generate_writes_edge_lists_and_summary() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().join("out");
    let cfg = write_cfg(
        tmp.path(),
        "gen.cfg",
        &format!(
            "kind = generate\nN = 50\nm = 3\nrealizations = 3\nout_dir = {}\n",
            out_dir.display()
        ),
    );
    let out = netjam(&["run", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));

    for r in 0..3 {
        let edges = read(&out_dir.join(format!("graph_r{r:03}.edges")));
        let header = edges.lines().next().unwrap();
        assert!(
            header.starts_with("# N=50 m=3 p=0"),
            "edge header: {header:?}"
        );
        // seed clique + m per added node
        assert_eq!(edges.lines().filter(|l| !l.starts_with('#')).count(), 144);
    }
    let summary = read(&out_dir.join("graphs.csv"));
    assert_eq!(summary.lines().next().unwrap(), "r,seed,edges,k_max,h");
    assert_eq!(summary.lines().count(), 4);

    let manifest = read(&out_dir.join("manifest.txt"));
    assert!(manifest.contains("kind = generate"));
    assert!(manifest.contains("N = 50"), "set key resolved");
    assert!(
        manifest.contains("master_seed = 42  # default"),
        "defaults are marked: {manifest}"
    );
    assert!(manifest.contains("files = "));
}

#[test]
fn reruns_are_byte_identical_and_seed_sensitive() {
    let tmp = TempDir::new().unwrap();
    let body = "kind = timeseries\nN = 60\nm = 3\nlambda = 0.02\nbeta = 0.1\n\
                t_max = 80\nrealizations = 2\nsnapshots = 40,80\n";
    let cfg = write_cfg(tmp.path(), "ts.cfg", body);
    let cfg = cfg.to_str().unwrap();

    let dirs: Vec<PathBuf> = (0..4).map(|i| tmp.path().join(format!("run{i}"))).collect();
    let csvs = |dir: &Path| {
        let mut names: Vec<String> = fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|n| n.ends_with(".csv"))
            .collect();
        names.sort();
        names
    };

    for (dir, workers) in [(&dirs[0], "1"), (&dirs[1], "3"), (&dirs[2], "1")] {
        let out = netjam(&["run", cfg, "--out", dir.to_str().unwrap(), "--workers", workers]);
        assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    }
    let names = csvs(&dirs[0]);
    assert!(names.contains(&"mean_timeseries.csv".to_string()));
    assert!(names.contains(&"snapshot_r001_t40.csv".to_string()));
    assert_eq!(names, csvs(&dirs[1]));
    for name in &names {
        let a = read(&dirs[0].join(name));
        assert_eq!(a, read(&dirs[1].join(name)), "{name} varies with --workers");
        assert_eq!(a, read(&dirs[2].join(name)), "{name} varies across reruns");
    }

    let out = netjam(&["run", cfg, "--out", dirs[3].to_str().unwrap(), "--seed", "7"]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    assert_ne!(
        read(&dirs[0].join("mean_timeseries.csv")),
        read(&dirs[3].join("mean_timeseries.csv")),
        "--seed must change the run"
    );
    let manifest = read(&dirs[3].join("manifest.txt"));
    assert!(
        manifest.contains("master_seed = 7\n"),
        "override resolved without default marker: {manifest}"
    );
}

#[test]
fn betac_bisection_and_bracket_errors() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().join("out");
    let cfg = write_cfg(
        tmp.path(),
        "bc.cfg",
        &format!(
            "kind = betac\nN = 80\nm = 3\nlambda = 0.05\nt_max = 200\n\
             fit_window = 50,200\nrealizations = 3\nepsilon = 0.001\nout_dir = {}\n",
            out_dir.display()
        ),
    );
    let out = netjam(&["run", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let phase = read(&out_dir.join("phase.csv"));
    assert_eq!(
        phase.lines().next().unwrap(),
        "lambda,beta_c,beta_lo,beta_hi,slope_lo,slope_hi,ensemble,tol"
    );
    let row: Vec<&str> = phase.lines().nth(1).unwrap().split(',').collect();
    let beta_c: f64 = row[1].parse().unwrap();
    assert!(beta_c > 0.0 && beta_c < 0.2, "β_c = {beta_c}");
    let slopes = read(&out_dir.join("slopes.csv"));
    assert_eq!(slopes.lines().next().unwrap(), "lambda,beta,slope");
    assert!(slopes.lines().count() > 3, "bisection records its probes");

    // bracket too small to contain the transition → runtime failure
    let bad = write_cfg(
        tmp.path(),
        "cong.cfg",
        &format!(
            "kind = betac\nN = 80\nm = 3\nlambda = 0.1\nbeta_hi = 0.01\nt_max = 200\n\
             fit_window = 50,200\nrealizations = 3\nepsilon = 0.001\nout_dir = {}\n",
            tmp.path().join("out2").display()
        ),
    );
    let out = netjam(&["run", bad.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("still congested"), "{}", stderr(&out));
}

#[test]
fn unwritable_out_dir_exits_2() {
    let tmp = TempDir::new().unwrap();
    let blocker = tmp.path().join("occupied");
    fs::write(&blocker, "not a directory").unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "gen.cfg",
        &format!(
            "kind = generate\nN = 20\nm = 2\nout_dir = {}\n",
            blocker.display()
        ),
    );
    let out = netjam(&["run", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2, "{}", stderr(&out));
}

#[test]
fn figure_smokes_write_expected_files() {
    let tmp = TempDir::new().unwrap();

    let f5_dir = tmp.path().join("f5");
    let cfg = write_cfg(
        tmp.path(),
        "f5.cfg",
        &format!(
            "kind = figure\nfigure = 5\nN = 60\nm = 3\nrealizations = 2\nout_dir = {}\n",
            f5_dir.display()
        ),
    );
    let out = netjam(&["run", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let fig5 = read(&f5_dir.join("fig5.csv"));
    assert_eq!(fig5.lines().next().unwrap(), "p,h,h_err,kmax,kmax_err");
    assert_eq!(fig5.lines().count(), 12, "11 mixing values");
    let ps: Vec<&str> = fig5.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ps[..3], ["0", "0.1", "0.2"], "plain decimal p column");

    let f1_dir = tmp.path().join("f1");
    let cfg = write_cfg(
        tmp.path(),
        "f1.cfg",
        &format!(
            "kind = figure\nfigure = 1\nN = 60\nm = 3\nlambda = 0.02\nt_max = 60\n\
             realizations = 2\nout_dir = {}\n",
            f1_dir.display()
        ),
    );
    let out = netjam(&["run", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    for tag in ["p0", "p1"] {
        let csv = read(&f1_dir.join(format!("fig1_{tag}.csv")));
        assert_eq!(csv.lines().next().unwrap(), "beta,k,mean_n,stderr,count");
        let betas: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        for b in ["0", "0.05", "0.1"] {
            assert!(betas.contains(&b), "fig1_{tag} misses β = {b}");
        }
    }

    let f3_dir = tmp.path().join("f3");
    let cfg = write_cfg(
        tmp.path(),
        "f3.cfg",
        &format!(
            "kind = figure\nfigure = 3\nN = 60\nm = 3\nlambda = 0.02\nf = 0.05\n\
             t_max = 120\nrealizations = 2\nout_dir = {}\n",
            f3_dir.display()
        ),
    );
    let out = netjam(&["run", cfg.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    for beta in ["0.05", "0.059", "0.07"] {
        let csv = read(&f3_dir.join(format!("fig3_beta{beta}.csv")));
        assert_eq!(
            csv.lines().next().unwrap(),
            "t,created_cum,delivered_cum,in_flight,n1,n2"
        );
        assert_eq!(csv.lines().count(), 121);
    }
}
