//! End-to-end acceptance suite. Each criterion is computed straight from the
//! core library, prints one PASS/FAIL line, and the process exits non-zero
//! if any of them fails. The last criterion drives the `gravanom` binary.

use std::path::PathBuf;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use gravanom::charclass::{cs_action, delta_phi, transgression, InvariantPolynomial};
use gravanom::fields::{GridManifold, MatrixFormField, Orientation, Topology};
use gravanom::geometry::{
    isotopy_flow, lie_derivative_metric, random_connection, Conformal, Diffeomorphism, MetricField,
    OrientedMetric, SymTensorField, TrigTensor, VectorField,
};
use gravanom::ledger::{
    check_condition, eta_quarter, min_multiplicity, solve_counterterm, Condition, Counterterm, Ledger, LedgerEntry,
    Scope, DEFAULT_NU_BOUND,
};
use gravanom::torusbundle::{build_mapping_torus, pontryagin_number, Cutoff};
use gravanom::trig::{TrigSeries, TrigTerm};
use gravanom::variational::{cotton_classical, cotton_pairing, path_integral_sigma, sigma_pairing, MetricPath, COTTON_NORMALIZATION};
use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const PERIODS: [f64; 3] = [1.0; 3];
const INTEGRATED: f64 = 1e-4;

type Verdict = Result<String, String>;

fn torus(nodes: usize) -> Arc<GridManifold> {
    GridManifold::build(3, &[nodes; 3], &PERIODS, Orientation::Positive, Topology::Torus).unwrap()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn flat(grid: &Arc<GridManifold>) -> OrientedMetric {
    OrientedMetric::from_metric(MetricField::flat(grid).unwrap())
}

fn bumpy(grid: &Arc<GridManifold>, seed: u64) -> OrientedMetric {
    let fam = TrigTensor::random_bumpy(&mut rng(seed), &PERIODS, 0.1, 1, 3);
    OrientedMetric::from_metric(MetricField::from_family(grid, Arc::new(fam)).unwrap())
}

fn direction(grid: &Arc<GridManifold>, amplitude: f64, seed: u64) -> SymTensorField {
    let fam = TrigTensor::random_bumpy(&mut rng(seed), &PERIODS, amplitude, 1, 3);
    let bumped = SymTensorField::from_family(grid, Arc::new(fam)).unwrap();
    let id = SymTensorField::from_family(grid, Arc::new(TrigTensor::flat(&PERIODS))).unwrap();
    SymTensorField::linear_combination(&[(1.0, &bumped), (-1.0, &id)]).unwrap()
}

fn affine(b: [i64; 9], shift: [f64; 3]) -> Diffeomorphism {
    Diffeomorphism::affine(b.to_vec(), shift.to_vec(), PERIODS.to_vec()).unwrap()
}

fn shear_xy() -> Diffeomorphism {
    affine([1, 1, 0, 0, 1, 0, 0, 0, 1], [0.0; 3])
}

fn shear_yz() -> Diffeomorphism {
    affine([1, 0, 0, 0, 1, 1, 0, 0, 1], [0.0, 0.3, 0.0])
}

fn zero(grid: &Arc<GridManifold>) -> MatrixFormField {
    MatrixFormField::zeros(grid, 1, 3).unwrap()
}

fn below(label: &str, value: f64, tol: f64) -> Result<(), String> {
    if value.is_finite() && value < tol {
        Ok(())
    } else {
        Err(format!("{label} = {value:.3e}, needs < {tol:.0e}"))
    }
}

fn within(started: Instant, limit: Duration) -> Result<(), String> {
    let took = started.elapsed();
    if took < limit {
        Ok(())
    } else {
        Err(format!("took {:.1} s, limit {} s", took.as_secs_f64(), limit.as_secs()))
    }
}

fn background_shift() -> Verdict {
    let started = Instant::now();
    let p = InvariantPolynomial::tr2();
    let measure = |nodes: usize, seed: u64| {
        let grid = torus(nodes);
        let g = bumpy(&grid, seed);
        let a0 = random_connection(&mut rng(101), &grid, 0.3, 1, 2).unwrap();
        let a1 = random_connection(&mut rng(102), &grid, 0.3, 1, 2).unwrap();
        let shift = transgression(&p, &a0, &a1).unwrap().integrate_top().unwrap();
        let (c0, c1) = (cs_action(&p, &g, &a0).unwrap(), cs_action(&p, &g, &a1).unwrap());
        ((c1 - c0 - shift).abs(), 64.0 * f64::EPSILON * (c0.abs() + c1.abs() + shift.abs()))
    };
    let mut worst = 0.0f64;
    for seed in [1, 2] {
        let (fine, floor) = measure(16, seed);
        let (coarse, _) = measure(8, seed);
        below("residual at N=16", fine, 1e-6)?;
        // the identity holds on the grid, so refinement either shows the
        // fourth-order factor or both residuals already sit at round-off
        if !(fine <= coarse / 16.0 || fine.max(coarse) <= floor) {
            return Err(format!("no fourth-order decay: {coarse:.3e} → {fine:.3e} (floor {floor:.1e})"));
        }
        worst = worst.max(fine);
    }
    within(started, Duration::from_secs(30))?;
    Ok(format!("max residual {worst:.2e}"))
}

fn metric_independence() -> Verdict {
    let started = Instant::now();
    let grid = torus(32);
    let p = InvariantPolynomial::tr2();
    let d1 = delta_phi(&p, &shear_xy(), &bumpy(&grid, 1), &zero(&grid)).unwrap();
    let d2 = delta_phi(&p, &shear_xy(), &bumpy(&grid, 2), &zero(&grid)).unwrap();
    below("|δ(g₁) − δ(g₂)|", (d1 - d2).abs(), INTEGRATED)?;
    within(started, Duration::from_secs(120))?;
    Ok(format!("δ = {d1:.3e} and {d2:.3e}"))
}

fn cocycle() -> Verdict {
    let grid = torus(32);
    let p = InvariantPolynomial::tr2();
    let g = bumpy(&grid, 1);
    let a0 = zero(&grid);
    let d = |phi: &Diffeomorphism| delta_phi(&p, phi, &g, &a0).unwrap();
    let mut worst = 0.0f64;
    for (f, h) in [(shear_xy(), shear_yz()), (shear_yz(), shear_xy())] {
        let r = (d(&f.after(&h).unwrap()) - d(&f) - d(&h)).abs();
        below("cocycle residual", r, INTEGRATED)?;
        worst = worst.max(r);
    }
    Ok(format!("max residual {worst:.2e}"))
}

fn isotopies() -> Verdict {
    let grid = torus(16);
    let p = InvariantPolynomial::tr2();
    let g = bumpy(&grid, 1);
    let mut worst = 0.0f64;
    for (amplitude, seed) in [(0.005, 201), (0.01, 202), (0.015, 203)] {
        let x = VectorField::random(&mut rng(seed), &PERIODS, amplitude, 1, 2);
        let phi = isotopy_flow(&x, 1.0, 8).unwrap();
        if !phi.in_identity_component() {
            return Err(format!("flow of amplitude {amplitude} left the identity component"));
        }
        let delta = delta_phi(&p, &phi, &g, &zero(&grid)).unwrap().abs();
        below("|δ|", delta, INTEGRATED)?;
        worst = worst.max(delta);
    }
    Ok(format!("max |δ| {worst:.2e}"))
}

fn mapping_torus() -> Verdict {
    let grid = torus(32);
    let p = InvariantPolynomial::tr2();
    let mut worst = 0.0f64;
    for g in [flat(&grid), bumpy(&grid, 1)] {
        for phi in [shear_xy(), shear_yz()] {
            let delta = delta_phi(&p, &phi, &g, &zero(&grid)).unwrap();
            for eps in [0.2, 0.3] {
                let mt = build_mapping_torus(&g, &phi, eps, 41, Cutoff::QuinticSmoothstep).unwrap();
                let number = pontryagin_number(&p, &mt).unwrap();
                below("|δ − p(M_φ)|", (delta - number).abs(), INTEGRATED)?;
                below("|δ|", delta.abs(), INTEGRATED)?;
                below("|p(M_φ)|", number.abs(), INTEGRATED)?;
                worst = worst.max((delta - number).abs());
            }
        }
    }
    Ok(format!("max disagreement {worst:.2e}"))
}

fn orientation_reversal() -> Verdict {
    let grid = torus(48);
    let p = InvariantPolynomial::tr2();
    let g = bumpy(&grid, 1);
    let phi = affine([-1, 0, 0, 0, 1, 0, 0, 0, 1], [0.0; 3]).after(&shear_yz()).unwrap();
    if phi.orientation() != Orientation::Negative {
        return Err("map preserves orientation".into());
    }
    let a0 = zero(&grid);
    let d1 = delta_phi(&p, &phi, &g, &a0).unwrap();
    let d2 = delta_phi(&p, &phi.squared(), &g, &a0).unwrap();
    below("|δ_φ − ½δ_φ²|", (d1 - 0.5 * d2).abs(), INTEGRATED)?;
    Ok(format!("δ_φ = {d1:.3e}, δ_φ² = {d2:.3e}"))
}

fn lie_directions() -> Verdict {
    let grid = torus(24);
    let p = InvariantPolynomial::tr2();
    let g = bumpy(&grid, 1);
    let mut worst = 0.0f64;
    for seed in [301, 302, 303] {
        let x = VectorField::random(&mut rng(seed), &PERIODS, 0.2, 1, 2);
        let h = lie_derivative_metric(&x, &g.metric).unwrap();
        let s = sigma_pairing(&p, &g, &h, &zero(&grid)).unwrap().abs();
        below("|σ(L_X g)|", s, INTEGRATED)?;
        worst = worst.max(s);
    }
    Ok(format!("max |pairing| {worst:.2e}"))
}

fn cotton() -> Verdict {
    let grid = torus(24);
    let p = InvariantPolynomial::tr2();
    let h = direction(&grid, 0.3, 401);
    let routes = |g: &OrientedMetric| {
        let classical = cotton_pairing(&cotton_classical(g).unwrap(), &h);
        let variational = COTTON_NORMALIZATION * sigma_pairing(&p, g, &h, &zero(&grid)).unwrap();
        (classical, variational)
    };
    let (c, v) = routes(&bumpy(&grid, 1));
    let rel = ((c - v) / v).abs();
    below("relative error", rel, 1e-3)?;
    let u = TrigSeries::new(
        PERIODS.to_vec(),
        0.0,
        vec![TrigTerm { k: vec![1, 0, 0], cos: 0.1, sin: 0.0 }, TrigTerm { k: vec![0, 1, 1], cos: 0.0, sin: 0.05 }],
    );
    let conformal = OrientedMetric::from_metric(MetricField::from_family(&grid, Arc::new(Conformal::new(u))).unwrap());
    let (c0, v0) = routes(&conformal);
    below("conformally flat classical", c0.abs(), INTEGRATED)?;
    below("conformally flat variational", v0.abs(), INTEGRATED)?;
    Ok(format!("relative error {rel:.2e}; conformally flat {:.2e}", c0.abs().max(v0.abs())))
}

fn paths() -> Verdict {
    let grid = torus(16);
    let p = InvariantPolynomial::tr2();
    let g = bumpy(&grid, 1);
    let a0 = zero(&grid);
    let phi = shear_xy();
    let delta = delta_phi(&p, &phi, &g, &a0).unwrap();
    let straight = MetricPath::in_class(&g, &phi, 25, None, |s| s).unwrap();
    let bump = direction(&grid, 0.2, 501);
    let bent = MetricPath::in_class(&g, &phi, 25, Some(&bump), |s| s * s * (3.0 - 2.0 * s)).unwrap();
    let i1 = path_integral_sigma(&p, &straight, &a0).unwrap();
    let i2 = path_integral_sigma(&p, &bent, &a0).unwrap();
    below("|∫γ₁ − ∫γ₂|", (i1 - i2).abs(), INTEGRATED)?;
    below("|∫γ₁ − δ|", (i1 - delta).abs(), INTEGRATED)?;
    below("|∫γ₂ − δ|", (i2 - delta).abs(), INTEGRATED)?;
    Ok(format!("integrals {i1:.4e}, {i2:.4e}; δ = {delta:.4e}"))
}

fn ledger() -> Verdict {
    let started = Instant::now();
    let q = |s: &str| s.parse::<BigRational>().unwrap();
    let l = Ledger::builtin();
    let fam = l.family("majorana").map_err(|e| e.to_string())?;
    let k3 = l.named(&["K3"]).map_err(|e| e.to_string())?;
    let eta = eta_quarter(fam, &k3[0]).map_err(|e| e.to_string())?;
    if eta != q("1/2") {
        return Err(format!("¼η(K3) = {eta}, expected 1/2"));
    }
    if check_condition(Condition::AnnomFinalW, fam, &Counterterm::zero(), &k3).map_err(|e| e.to_string())?.pass {
        return Err("AnnomFinalW holds on K3".into());
    }
    let oriented: Vec<LedgerEntry> = l.select(Scope::All).into_iter().filter(LedgerEntry::orientable).collect();
    let c = solve_counterterm(fam, &oriented, Condition::AnnomFinalU).map_err(|e| e.to_string())?;
    match c {
        Some(sol) if sol.representative == q("1/96") => {}
        other => return Err(format!("counterterm {:?}, expected 1/96", other.map(|s| s.representative.to_string()))),
    }
    let multiplicity = |cond: Condition, entries: &[LedgerEntry]| {
        min_multiplicity(fam, entries, cond, 1..=DEFAULT_NU_BOUND).map(|r| r.map(|(nu, _)| nu)).map_err(|e| e.to_string())
    };
    let all = l.select(Scope::All);
    if !all.iter().any(|e| e.name() == "RP4") {
        return Err("ledger has no RP4 entry".into());
    }
    let nu = multiplicity(Condition::AnnomFinalU2, &all)?;
    if nu != Some(16) {
        return Err(format!("AnnomFinalU2 multiplicity {nu:?}, expected 16"));
    }
    let nu_mt = multiplicity(Condition::Anomaly2, &l.select(Scope::MappingTori))?;
    if nu_mt != Some(8) {
        return Err(format!("mapping-torus multiplicity {nu_mt:?}, expected 8"));
    }
    within(started, Duration::from_secs(1))?;
    Ok("¼η(K3) = 1/2, c = 1/96, ν = 16, ν(mapping tori) = 8".into())
}

fn determinism() -> Verdict {
    let dir = std::env::temp_dir().join(format!("gravanom-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let run = |name: &str| -> Result<Vec<u8>, String> {
        let out: PathBuf = dir.join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_gravanom"))
            .args(["verify-all", "--seed", "1", "--out"])
            .arg(&out)
            .env_remove("GRAVANOM_OUT_DIR")
            .stdout(std::process::Stdio::null())
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("verify-all exited with {status}"));
        }
        std::fs::read(&out).map_err(|e| e.to_string())
    };
    let first = run("first.json");
    let second = run("second.json");
    let _ = std::fs::remove_dir_all(&dir);
    let (first, second) = (first?, second?);
    if first != second {
        return Err("reports differ".into());
    }
    let report: serde_json::Value = serde_json::from_slice(&first).map_err(|e| e.to_string())?;
    let total = report["checks"].as_array().map_or(0, Vec::len);
    if total < 20 {
        return Err(format!("only {total} checks in the report"));
    }
    Ok(format!("{} identical bytes, {total} checks", first.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("background-shift identity", background_shift),
        ("metric independence of δ", metric_independence),
        ("cocycle additivity", cocycle),
        ("isotopies have δ = 0", isotopies),
        ("δ equals the mapping-torus number", mapping_torus),
        ("orientation-reversing relation", orientation_reversal),
        ("Lie directions are null", lie_directions),
        ("Cotton two-route agreement", cotton),
        ("path independence in the class", paths),
        ("exact ledger values", ledger),
        ("verify-all is deterministic", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let verdict = check();
        let secs = started.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("PASS  {:>2}  {name}: {detail} ({secs:.1} s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  {:>2}  {name}: {why} ({secs:.1} s)", i + 1);
            }
        }
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
