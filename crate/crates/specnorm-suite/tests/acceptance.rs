//! Acceptance harness: one PASS/FAIL line per criterion, nonzero exit if any fails.

#[path = "../../specnorm/tests/common/mod.rs"]
mod common;

use std::time::Instant;

use common::oracles::{
    ball_projection_oracle, fd_errors, frame_vectors, in_p, member_or_not, random_q, random_triple, sampled_generators,
};
use common::{direction, random_pair, rng, structured_direction, tied_pair};
use rand::Rng;
use specnorm::cones::{
    crit_cone_p_member, crit_cone_p_polar_member, in_crit_theta, in_polar_crit_theta, in_polar_crit_theta_zero,
    sample_matrix_cone, MatrixCone, MEMBERSHIP_TOL,
};
use specnorm::conic::KernelSearchOptions;
use specnorm::kktstab::{
    check_condition, default_radii, f_prime_kernel_search, generate_certified, kkt_dirderiv, kkt_residual,
    perturbation_experiment, solve, witness_delta, CheckContext, Condition, HQuadratic, KktPoint,
    Plant, ProblemInstance, SeedSpec, SolveOptions, Status, Verdict,
};
use specnorm::matcore::{fan_gap, singular_values, Mat, Vector};
use specnorm::proxlib::{prox_spectral, theta_dirderiv};
use specnorm::sampling::gaussian_matrix;
use specnorm::sensitivity::{fixed_point_lift, prox_dir_kernel_member, verify_prop34};
use specnorm_cli::commands::{cmd_certify, cmd_generate, CertifyArgs, GenerateArgs};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn criterion_1() -> Outcome {
    let mut r = rng(101);
    let (mut split, mut proj, mut fill) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let q = random_q(&mut r);
        let pair = prox_spectral(&q).unwrap();
        split = split.max((&pair.p + &pair.w - &q).amax());
        proj = proj.max((&pair.w - ball_projection_oracle(&q)).amax());
        if let Some(lam) = pair.lambda_star() {
            let mass: f64 = singular_values(&q).unwrap().iter().map(|&s| (s - lam).max(0.0)).sum();
            fill = fill.max((mass - 1.0).abs());
        }
    }
    outcome(
        split <= 1e-13 && proj <= 1e-6 && fill <= 1e-12,
        format!("1000 matrices: max |P+W-Q| {split:.1e}, max |W - oracle| {proj:.1e}, max water-fill residual {fill:.1e}"),
    )
}

fn criterion_2() -> Outcome {
    let mut r = rng(102);
    let mut worst = [0.0f64; 4];
    for case in 0..1000 {
        let pair = if case < 500 { random_pair(&mut r) } else { tied_pair(&mut r) };
        let d = direction(&pair, &mut r);
        for (w, e) in worst.iter_mut().zip(fd_errors(&pair, &d)) {
            *w = w.max(e);
        }
    }
    outcome(
        worst.iter().all(|&e| e <= 1e-5),
        format!(
            "500 random + 500 tied points: θ′ err {:.1e}, Prox′ err {:.1e} (t = 1e-7); extrapolated over t ∈ {{1e-5, 1e-6, 1e-7}}: θ′ {:.1e}, Prox′ {:.1e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut r = rng(103);
    let (mut fixed, mut inside, mut gap) = (0.0f64, true, 0.0f64);
    for _ in 0..500 {
        let pair = tied_pair(&mut r);
        let (h, d33) = structured_direction(&pair, &mut r);
        let d = fixed_point_lift(&pair, &h, Some(&d33)).unwrap();
        let rep = verify_prop34(&pair, &h, &d).unwrap();
        fixed = fixed.max(rep.fixed_point_residual / h.amax().max(1.0));
        inside &= rep.in_crit_cone;
        gap = gap.max(rep.identity_gap);
    }
    outcome(
        fixed <= 1e-9 && inside && gap <= 1e-8,
        format!("500 lifts: fixed-point residual {fixed:.1e}, all H in C_θ: {inside}, max |⟨H,D⟩ + ψ*| {gap:.1e}"),
    )
}

fn criterion_4() -> Outcome {
    let mut r = rng(104);
    // Block test against θ′(P; D) − ⟨D, W⟩.
    let (mut members, mut others, mut block_bad) = (0, 0, 0);
    while members < 500 || others < 500 {
        let pair = tied_pair(&mut r);
        let d = member_or_not(&pair, MatrixCone::CritTheta, &mut r);
        let block = in_crit_theta(&pair, &d, MEMBERSHIP_TOL).unwrap().member;
        let gap = theta_dirderiv(&pair, &d).unwrap() - d.dot(&pair.w);
        if block {
            members += 1;
            block_bad += usize::from(gap > 1e-8);
        } else {
            others += 1;
            block_bad += usize::from(gap <= 1e-13);
        }
    }
    // Kernel of Prox′ against the polar of the flat critical cone, and against the polar of C_θ.
    let (mut flat_disagree, mut full_disagree) = (0, 0);
    for case in 0..1000 {
        let pair = tied_pair(&mut r);
        let d = match case % 3 {
            0 => sample_matrix_cone(&pair, MatrixCone::PolarCritThetaZero, &mut r).unwrap(),
            1 => sample_matrix_cone(&pair, MatrixCone::PolarCritTheta, &mut r).unwrap(),
            _ => direction(&pair, &mut r),
        };
        let kernel = prox_dir_kernel_member(&pair, &d).unwrap();
        flat_disagree += usize::from(kernel != in_polar_crit_theta_zero(&pair, &d, MEMBERSHIP_TOL).unwrap().member);
        full_disagree += usize::from(kernel != in_polar_crit_theta(&pair, &d, MEMBERSHIP_TOL).unwrap().member);
    }
    let mut polar_worst = f64::NEG_INFINITY;
    for cone in [MatrixCone::CritTheta, MatrixCone::CritThetaStar, MatrixCone::CritThetaZero] {
        let pair = tied_pair(&mut r);
        let ds = frame_vectors(&pair, cone, 1000, &mut r);
        let hs = frame_vectors(&pair, cone.polar(), 1000, &mut r);
        polar_worst = polar_worst.max((hs.transpose() * ds).max());
    }
    let mut coord_bad = 0;
    for _ in 0..10_000 {
        let (spec, z, y, d) = random_triple(&mut r);
        let stepped: Vec<f64> = z.iter().zip(&d).map(|(a, b)| a + 1e-3 * b).collect();
        let dot: f64 = y.iter().zip(&d).map(|(a, b)| a * b).sum();
        let member = in_p(&spec, &stepped) && dot == 0.0;
        let gens = sampled_generators(&spec, &z, &y);
        let polar = gens.iter().all(|g| g.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>() <= 0.0);
        coord_bad += usize::from(crit_cone_p_member(&spec, &z, &y, &d).unwrap() != member);
        coord_bad += usize::from(crit_cone_p_polar_member(&spec, &z, &y, &d).unwrap() != polar);
    }
    outcome(
        block_bad == 0 && flat_disagree == 0 && polar_worst <= 1e-9 && coord_bad == 0,
        format!(
            "C_θ block vs definition: {block_bad} mismatches on {members}+{others}; ker Prox′ vs (C⁰_θ)°: {flat_disagree}/1000 disagreements \
             (vs (C_θ)°: {full_disagree}); max polar ⟨H,D⟩ {polar_worst:.1e} on 3×10⁶ pairs; C_𝒫 coordinatewise mismatches {coord_bad}/2×10⁴"
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut r = rng(105);
    let mut worst = f64::INFINITY;
    for _ in 0..10_000 {
        let k = r.random_range(1..=8);
        let a = gaussian_matrix(k, k, &mut r);
        let b = gaussian_matrix(k, k, &mut r);
        worst = worst.min(fan_gap(&(&a + a.transpose()), &(&b + b.transpose())).unwrap());
    }
    outcome(worst >= -1e-10, format!("10⁴ symmetric pairs: min fan gap {worst:.1e}"))
}

struct Case {
    spec: SeedSpec,
    inst: ProblemInstance,
    point: KktPoint,
    verdicts: Vec<(Condition, Verdict)>,
}

impl Case {
    fn status(&self, c: Condition) -> Status {
        self.verdicts.iter().find(|(k, _)| *k == c).unwrap().1.status
    }
}

/// (m, n, α₁, α₂, α₃, β) layouts covering α₁ active, |α₂| ≥ 2, α₃ ≠ ∅, and β empty or not.
const LAYOUTS: [(usize, usize, usize, usize, usize, usize); 10] = [
    (2, 3, 1, 0, 0, 1),
    (2, 2, 1, 0, 1, 0),
    (2, 3, 0, 2, 0, 0),
    (3, 3, 1, 0, 1, 1),
    (3, 4, 0, 2, 1, 0),
    (3, 4, 0, 3, 0, 0),
    (3, 3, 0, 2, 0, 1),
    (1, 3, 1, 0, 0, 0),
    (3, 3, 0, 2, 1, 0),
    (2, 4, 1, 0, 0, 0),
];
const PLANTS: [Plant; 5] = [Plant::None, Plant::Ssrcq, Plant::Srcq, Plant::Wsosc, Plant::Sosc];

fn case_pool(count: usize) -> Vec<Case> {
    let mut r = rng(106);
    let mut out = Vec::new();
    let (mut seed, mut rejected) = (0u64, Vec::new());
    while out.len() < count {
        seed += 1;
        let k = (seed - 1) as usize;
        let (m, n, alpha1, alpha2, alpha3, beta) = LAYOUTS[k % LAYOUTS.len()];
        let plant = PLANTS[(k / LAYOUTS.len()) % PLANTS.len()];
        let spec = SeedSpec {
            m,
            n,
            d: r.random_range(1..=m * n + 1),
            l: r.random_range(1..=3),
            alpha1,
            alpha2,
            alpha3,
            beta,
            plant,
            seed,
            ..SeedSpec::default()
        };
        let (inst, point) = match generate_certified(&spec) {
            Ok(v) => v,
            // Some plants are impossible for a layout, e.g. when the cone to plant in is {0}.
            Err(_) if rejected.len() < count => {
                rejected.push(seed);
                continue;
            }
            Err(e) => panic!("generator keeps failing: {e}"),
        };
        let ctx = CheckContext::new(&inst, &point).unwrap();
        let opts = KernelSearchOptions { seed, ..KernelSearchOptions::default() };
        let verdicts = Condition::ALL.iter().map(|&c| (c, check_condition(&ctx, c, &opts).unwrap())).collect();
        out.push(Case { spec, inst, point, verdicts });
    }
    if !rejected.is_empty() {
        println!("(generator declined {} layout/plant combinations)", rejected.len());
    }
    out
}

fn criterion_6(pool: &[Case]) -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for (a, b) in [(Condition::SrcqPrimal, Condition::SoscDual), (Condition::SrcqDual, Condition::SoscPrimal)] {
        let (mut conclusive, mut disagree, mut fails) = (0, 0, 0);
        for case in pool {
            let (sa, sb) = (case.status(a), case.status(b));
            if sa.is_conclusive() && sb.is_conclusive() {
                conclusive += 1;
                disagree += usize::from(sa != sb);
                fails += usize::from(sa == Status::Fails);
            }
        }
        pass &= disagree == 0 && conclusive > 0;
        lines.push(format!("{}↔{}: {disagree} disagreements in {conclusive} conclusive ({fails} fail)", a.name(), b.name()));
    }
    outcome(pass, format!("{} instances; {}", pool.len(), lines.join("; ")))
}

/// Perturbation study on certified SSRCQ ∧ WSOSC instances, then `F′` kernels on planted failures.
fn criterion_7(pool: &[Case]) -> Outcome {
    let certified: Vec<&Case> = pool
        .iter()
        .filter(|c| c.status(Condition::Ssrcq) == Status::Holds && c.status(Condition::Wsosc) == Status::Holds)
        .take(24)
        .collect();
    let (mut calm, mut calm_sosc, mut with_sosc) = (0, 0, 0);
    let mut spreads = Vec::new();
    for (k, case) in certified.iter().enumerate() {
        let table = perturbation_experiment(&case.inst, &case.point, &default_radii(), 20, 700 + k as u64);
        let ok = table.all_succeeded() && table.spread() < 10.0;
        calm += usize::from(ok);
        let sosc = case.status(Condition::SoscPrimal) == Status::Holds;
        with_sosc += usize::from(sosc);
        calm_sosc += usize::from(ok && sosc);
        spreads.push(table.spread());
    }
    let worst = spreads.iter().copied().fold(0.0f64, f64::max);
    let part_i = calm == certified.len() && !certified.is_empty();

    let mut planted = 0;
    let mut exhibited = [0usize; 2];
    let mut totals = [0usize; 2];
    for case in pool.iter().filter(|c| matches!(c.spec.plant, Plant::Ssrcq | Plant::Wsosc)) {
        let idx = usize::from(case.spec.plant == Plant::Wsosc);
        totals[idx] += 1;
        planted += 1;
        let cands: Vec<_> =
            case.verdicts.iter().filter_map(|(_, v)| v.witness.as_ref().and_then(|w| witness_delta(&case.inst, w))).collect();
        let search = f_prime_kernel_search(&case.inst, &case.point, &cands, 500, case.spec.seed).unwrap();
        let reverified = search.witness.as_ref().is_some_and(|d| {
            let value = kkt_dirderiv(&case.inst, &case.point, d).unwrap().inf_norm();
            value <= 1e-8 && (d.norm() - 1.0).abs() <= 1e-6
        });
        exhibited[idx] += usize::from(search.status == Status::Fails && reverified);
    }
    let part_ii = exhibited[0] + exhibited[1] == planted && planted > 0;
    outcome(
        part_i && part_ii,
        format!(
            "(i) {calm}/{} certified instances have spread < 10× and full solver success (worst spread {worst:.1e}); \
             among those also satisfying SOSC-P: {calm_sosc}/{with_sosc}. \
             (ii) F′ kernel exhibited and re-verified on {}/{} SSRCQ plants and {}/{} WSOSC plants",
            certified.len(),
            exhibited[0],
            totals[0],
            exhibited[1],
            totals[1]
        ),
    )
}

fn criterion_8(pool: &[Case]) -> Outcome {
    let hand = ProblemInstance {
        m: 1,
        n: 1,
        qop: Mat::identity(1, 1),
        bop: Mat::zeros(0, 1),
        c: Mat::from_element(1, 1, -2.0),
        b: Vector::zeros(0),
        cone: Default::default(),
        h: HQuadratic::new(Mat::identity(1, 1), Vector::zeros(1)).unwrap(),
    };
    let rep = solve(&hand, &SolveOptions::default()).unwrap();
    let hand_err = (rep.point.x[(0, 0)] - 1.0).abs().max((rep.point.s[(0, 0)] - 1.0).abs());
    let (mut recovered, mut worst) = (0, 0.0f64);
    for case in pool {
        assert!(kkt_residual(&case.inst, &case.point).unwrap().inf_norm() <= 1e-12);
        let res = solve(&case.inst, &SolveOptions::default()).map(|r| r.residual).unwrap_or(f64::INFINITY);
        worst = worst.max(res);
        recovered += usize::from(res <= 1e-9);
    }
    outcome(
        hand_err <= 1e-8 && recovered == pool.len(),
        format!("hand instance error {hand_err:.1e}; {recovered}/{} planted instances solved to ‖F‖_∞ ≤ 1e-9 (worst {worst:.1e})", pool.len()),
    )
}

fn criterion_9(pool: &[Case]) -> Outcome {
    let dir = std::env::temp_dir().join(format!("specnorm-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut identical = 0;
    let picks: Vec<&Case> = pool.iter().step_by(pool.len().div_ceil(5).max(1)).collect();
    for (k, case) in picks.iter().enumerate() {
        let inst_path = dir.join(format!("inst{k}.json"));
        let s = &case.spec;
        let gen = GenerateArgs {
            m: s.m,
            n: s.n,
            d: s.d,
            l: s.l,
            alpha1: s.alpha1,
            alpha2: s.alpha2,
            alpha2_weights: None,
            alpha3: s.alpha3,
            beta: s.beta,
            alpha3_only: false,
            lambda: s.lambda,
            cone: None,
            plant: s.plant.name().into(),
            seed: s.seed,
            json_out: Some(inst_path.to_str().unwrap().into()),
        };
        cmd_generate(&gen).unwrap();
        let run = |name: String| {
            let out = dir.join(name);
            let args = CertifyArgs {
                instance: inst_path.to_str().unwrap().into(),
                point: None,
                seed: 42,
                tol: 1e-7,
                samples: 100,
                f_prime_starts: 100,
                radii: Some(vec!["1e-3".into(), "1e-5".into()]),
                trials: 4,
                conditions: None,
                json_out: Some(out.to_str().unwrap().into()),
            };
            cmd_certify(&args).unwrap();
            std::fs::read(out).unwrap()
        };
        identical += usize::from(run(format!("a{k}.json")) == run(format!("b{k}.json")));
    }
    let _ = std::fs::remove_dir_all(&dir);
    outcome(identical == picks.len(), format!("{identical}/{} report pairs byte-identical", picks.len()))
}

fn main() {
    let mut results = Vec::new();
    let mut timed = |id: u32, f: &dyn Fn() -> Outcome| {
        let start = Instant::now();
        let o = f();
        let secs = start.elapsed().as_secs_f64();
        println!("criterion {id}: {} ({secs:.1} s) {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push(o.pass);
    };
    timed(1, &criterion_1);
    timed(2, &criterion_2);
    timed(3, &criterion_3);
    timed(4, &criterion_4);
    timed(5, &criterion_5);
    let start = Instant::now();
    let pool = case_pool(200);
    println!("(generated and checked {} instances in {:.1} s)", pool.len(), start.elapsed().as_secs_f64());
    timed(6, &|| criterion_6(&pool));
    timed(7, &|| criterion_7(&pool));
    timed(8, &|| criterion_8(&pool));
    timed(9, &|| criterion_9(&pool));
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
