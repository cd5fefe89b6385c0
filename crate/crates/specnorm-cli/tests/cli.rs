use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use specnorm::kktstab::kkt_residual;
use specnorm_cli::commands::SolutionFile;
use specnorm_cli::files::{from_json, to_json, InstanceFile, ReportFile, WitnessFile};

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("specnorm-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn specnorm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specnorm")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> T {
    from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn generate_is_deterministic_and_exact() {
    let dir = workdir("generate");
    let (a, b) = (dir.join("a.json"), dir.join("b.json"));
    let args = ["generate", "--m", "3", "--n", "4", "--alpha1", "1", "--beta", "2", "--seed", "7", "--json-out"];
    assert_eq!(code(&specnorm(&[&args[..], &[p(&a)]].concat())), 0);
    assert_eq!(code(&specnorm(&[&args[..], &[p(&b)]].concat())), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let file: InstanceFile = read(&a);
    let inst = file.instance().unwrap();
    let pt = file.planted_point(&inst).unwrap().unwrap();
    assert!(kkt_residual(&inst, &pt).unwrap().inf_norm() <= 1e-12);
    assert_eq!(file.seed, Some(7));
}

#[test]
fn alpha3_only_is_rejected() {
    let out = specnorm(&["generate", "--alpha3-only"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("α₃"));
    assert_eq!(code(&specnorm(&["generate", "--plant", "bogus"])), 2);
}

#[test]
fn instance_round_trip_is_bit_exact() {
    let out = specnorm(&["generate", "--m", "2", "--n", "3", "--d", "5", "--l", "3", "--alpha2", "2", "--alpha1", "0", "--beta", "0", "--seed", "3"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let file: InstanceFile = from_json(&text).unwrap();
    assert_eq!(to_json(&file), text);
    let inst = file.instance().unwrap();
    let planted = file.planted_point(&inst).unwrap().unwrap();
    let again = specnorm_cli::files::instance_file(&inst, Some(&planted), file.seed);
    assert_eq!(again, file);
}

#[test]
fn solve_recovers_planted_points() {
    let dir = workdir("solve");
    let inst_path = dir.join("inst.json");
    let sol_path = dir.join("sol.json");
    // d = m·n + 1 makes h∘𝒬 strictly convex, so X is unique.
    let gen = ["generate", "--m", "2", "--n", "3", "--d", "7", "--l", "2", "--beta", "1", "--seed", "11", "--json-out", p(&inst_path)];
    assert_eq!(code(&specnorm(&gen)), 0);
    let out = specnorm(&["solve", p(&inst_path), "--json-out", p(&sol_path)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let file: InstanceFile = read(&inst_path);
    let inst = file.instance().unwrap();
    let planted = file.planted_point(&inst).unwrap().unwrap();
    let sol: SolutionFile = read(&sol_path);
    let pt = specnorm_cli::files::point_from_file(&inst, &sol.point).unwrap();
    assert!(sol.residual <= 1e-9);
    assert!((&pt.x - &planted.x).amax() <= 1e-6);
}

fn scalar_instance(c: f64, planted: Option<(f64, f64)>, infeasible: bool) -> String {
    let (bop, b, cone) = if infeasible { ("[[0.0]]", "[1.0]", "[\"zero\"]") } else { ("[]", "[]", "[]") };
    let l = usize::from(infeasible);
    let planted = planted
        .map(|(x, s)| format!(",\n  \"planted\": {{\"X\": [[{x:?}]], \"y\": [], \"S\": [[{s:?}]], \"w\": [{x:?}]}}"))
        .unwrap_or_default();
    format!(
        "{{\n  \"format\": \"specnorm-instance\",\n  \"version\": \"0.1.0\",\n  \"vectorization\": \"column-major\",\n  \
         \"dims\": {{\"m\": 1, \"n\": 1, \"d\": 1, \"l\": {l}}},\n  \"Qop\": [[1.0]],\n  \"Bop\": {bop},\n  \
         \"C\": [[{c:?}]],\n  \"b\": {b},\n  \"cone\": {cone},\n  \"h\": {{\"M\": [[1.0]], \"q\": [0.0]}}{planted}\n}}\n"
    )
}

#[test]
fn hand_instance_and_infeasible_instance() {
    let dir = workdir("hand");
    let hand = dir.join("hand.json");
    std::fs::write(&hand, scalar_instance(-2.0, None, false)).unwrap();
    let out = specnorm(&["solve", p(&hand)]);
    assert_eq!(code(&out), 0);
    let sol: SolutionFile = from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert!((sol.point.x[0][0] - 1.0).abs() <= 1e-8);
    assert!((sol.point.s[0][0] - 1.0).abs() <= 1e-8);
    let bad = dir.join("bad.json");
    std::fs::write(&bad, scalar_instance(-2.0, None, true)).unwrap();
    let out = specnorm(&["solve", p(&bad), "--tol", "1e-7"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("residual"));
    assert_eq!(code(&specnorm(&["solve", p(&dir.join("missing.json"))])), 2);
}

#[test]
fn degenerate_point_is_out_of_scope() {
    let dir = workdir("degenerate");
    let inst = dir.join("zero.json");
    std::fs::write(&inst, scalar_instance(-0.5, Some((0.0, 0.5)), false)).unwrap();
    let rep = dir.join("rep.json");
    let out = specnorm(&["certify", p(&inst), "--json-out", p(&rep)]);
    assert_eq!(code(&out), 4);
    let report: ReportFile = read(&rep);
    assert!(report.out_of_scope.is_some());
    let out = specnorm(&["verify-witness", p(&rep)]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("nothing to verify"));
}

fn certify(dir: &Path, gen_args: &[&str], extra: &[&str]) -> (PathBuf, ReportFile) {
    let inst = dir.join("inst.json");
    let rep = dir.join("rep.json");
    let gen = [&["generate"], gen_args, &["--json-out", p(&inst)]].concat();
    assert_eq!(code(&specnorm(&gen)), 0);
    let cert = [&["certify", p(&inst), "--json-out", p(&rep)], extra].concat();
    let out = specnorm(&cert);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = read(&rep);
    (rep, report)
}

#[test]
fn isolated_calm_instance_certifies() {
    let dir = workdir("calm");
    let (rep_path, rep) = certify(
        &dir,
        &["--m", "2", "--n", "3", "--d", "7", "--l", "2", "--seed", "4"],
        &["--samples", "100", "--f-prime-starts", "100", "--radii", "1e-3,1e-5", "--trials", "5"],
    );
    assert!(rep.statements.iter().all(|s| s.status == "holds"), "{:?}", rep.statements);
    assert_eq!(rep.isolated_calm_claim, "holds");
    let kappa = rep.kappa.unwrap();
    assert_eq!(kappa.rows.len(), 2);
    assert!(kappa.rows.iter().all(|r| r.successes == r.trials));
    let out = specnorm(&["verify-witness", p(&rep_path)]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("nothing to verify"));
}

#[test]
fn planted_failure_is_reported_and_replayed() {
    let dir = workdir("ssrcq");
    let (rep_path, rep) = certify(
        &dir,
        &["--m", "3", "--n", "3", "--d", "10", "--l", "2", "--alpha3", "1", "--plant", "ssrcq", "--seed", "5"],
        &["--samples", "100", "--f-prime-starts", "50"],
    );
    let ssrcq = rep.conditions.iter().find(|c| c.name == "ssrcq").unwrap();
    assert_eq!(ssrcq.status, "fails");
    assert!(matches!(ssrcq.witness, Some(WitnessFile::Multiplier { .. })));
    assert!(ssrcq.residuals.iter().all(|r| r.value.unwrap() <= r.bound));
    let b = rep.statements.iter().find(|s| s.label == "b").unwrap();
    assert_eq!(b.status, "fails");
    let out = specnorm(&["verify-witness", p(&rep_path)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("ssrcq: witness reproduced"));

    // A witness moved by 1e-3 no longer satisfies its defining relations.
    let mut bent = rep.clone();
    for c in bent.conditions.iter_mut() {
        if let Some(WitnessFile::Multiplier { s, .. }) = &mut c.witness {
            s[0][0] += 1e-3;
        }
    }
    let bent_path = dir.join("bent.json");
    std::fs::write(&bent_path, to_json(&bent)).unwrap();
    let out = specnorm(&["verify-witness", p(&bent_path)]);
    assert_eq!(code(&out), 5);
    assert!(String::from_utf8_lossy(&out.stdout).contains("NOT reproduced"));
}

#[test]
fn wsosc_failure_exhibits_an_f_prime_kernel() {
    let dir = workdir("wsosc");
    let (rep_path, rep) = certify(
        &dir,
        &["--m", "2", "--n", "3", "--d", "7", "--l", "1", "--alpha3", "1", "--beta", "0", "--plant", "wsosc", "--seed", "6"],
        &["--samples", "100", "--f-prime-starts", "50"],
    );
    let f = rep.f_prime.as_ref().unwrap();
    assert_eq!(f.status, "fails");
    assert!(f.residual.unwrap() <= 1e-9);
    assert!(f.witness.is_some());
    let mut bent = rep.clone();
    if let Some(w) = &mut bent.f_prime.as_mut().unwrap().witness {
        w.z[0][0] += 1e-3;
    }
    bent.conditions.iter_mut().for_each(|c| c.witness = None);
    let bent_path = dir.join("bent.json");
    std::fs::write(&bent_path, to_json(&bent)).unwrap();
    assert_eq!(code(&specnorm(&["verify-witness", p(&rep_path)])), 0);
    assert_eq!(code(&specnorm(&["verify-witness", p(&bent_path)])), 5);
}

#[test]
fn reports_are_deterministic_and_round_trip() {
    let dir = workdir("determinism");
    let inst = dir.join("inst.json");
    assert_eq!(code(&specnorm(&["generate", "--m", "2", "--n", "2", "--d", "3", "--l", "2", "--seed", "8", "--json-out", p(&inst)])), 0);
    let run = |name: &str, seed: &str| {
        let path = dir.join(name);
        let out = specnorm(&["certify", p(&inst), "--seed", seed, "--samples", "50", "--f-prime-starts", "40", "--radii", "1e-4", "--trials", "3", "--json-out", p(&path)]);
        assert_eq!(code(&out), 0);
        std::fs::read_to_string(path).unwrap()
    };
    let (a, b) = (run("a.json", "9"), run("b.json", "9"));
    assert_eq!(a, b);
    let parsed: ReportFile = from_json(&a).unwrap();
    assert_eq!(to_json(&parsed), a);
    assert_eq!(parsed.seed, 9);
}

#[test]
fn condition_subsets_and_point_files() {
    let dir = workdir("subset");
    let inst = dir.join("inst.json");
    let sol = dir.join("sol.json");
    assert_eq!(code(&specnorm(&["generate", "--m", "2", "--n", "3", "--d", "7", "--seed", "12", "--json-out", p(&inst)])), 0);
    assert_eq!(code(&specnorm(&["solve", p(&inst), "--json-out", p(&sol)])), 0);
    let out = specnorm(&["certify", p(&inst), "--point", p(&sol), "--conditions", "srcq-p,sosc-d", "--samples", "50", "--f-prime-starts", "20"]);
    assert_eq!(code(&out), 0);
    let rep: ReportFile = from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let names: Vec<&str> = rep.conditions.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, ["rcq", "srcq-p", "sosc-d"]);
    assert!(rep.point_source.starts_with("solution file"));
    let srcq = &rep.conditions[1].status;
    assert_eq!(srcq, &rep.conditions[2].status);
    assert_eq!(code(&specnorm(&["certify", p(&inst), "--conditions", "nope"])), 2);
}
