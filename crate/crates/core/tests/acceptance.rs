//! Acceptance checks. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use num::complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use straightness::calculus::{partial, total_derivative};
use straightness::expr::{eval, EvalContext, Expr, Number};
use straightness::oracle::{is_zero, OracleConfig, Outcome};
use straightness::parser::{parse_expr, OdeSystem, ParamDecl, ParamPolicy};
use straightness::torsion::{
    check_conserved, classify_linear_const, fels_matrix, fels_torsion, is_straight, quartic_test, Invariant,
    LinearConstSystem, TorsionReport,
};

use common::*;

type Outcome_ = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn p(s: &str) -> Expr {
    parse_expr(s).unwrap()
}

/// The invariant entry a witness points at.
fn witnessed_expr(r: &TorsionReport) -> Option<&Expr> {
    let w = r.verdict.witness()?;
    match (&r.invariant, w.entry.as_deref()) {
        (Invariant::Scalar(e), _) => Some(e),
        (Invariant::Matrix(m), Some([i, j])) => Some(&m[i - 1][j - 1]),
        (Invariant::List(l), Some([eq, rest @ ..])) => {
            l.iter().find(|q| q.equation == *eq && q.indices.as_slice() == rest).map(|q| &q.expr)
        }
        _ => None,
    }
}

fn witness_reproduces(sys: &OdeSystem, cfg: &OracleConfig) -> Result<(), String> {
    let a = is_straight(sys, cfg).map_err(|e| e.to_string())?;
    let b = is_straight(sys, cfg).map_err(|e| e.to_string())?;
    ensure(a.verdict.is_nonzero(), || format!("{}: {:?}", sys.name, a.verdict.outcome))?;
    ensure(a.verdict == b.verdict, || format!("{}: verdict differs between identical runs", sys.name))?;
    let e = witnessed_expr(&a).ok_or_else(|| format!("{}: witness entry missing", sys.name))?;
    let w = a.verdict.witness().unwrap();
    ensure(w.verify(e, cfg.rel_tol), || format!("{}: witness does not re-verify", sys.name))
}

fn criterion_1() -> Outcome_ {
    let start = Instant::now();
    let cfg = OracleConfig::default();
    let mut gated = 0;
    let mut uncertain = Vec::new();
    for e in corpus("table1.straight") {
        let r = is_straight(&e.system, &cfg).map_err(|err| err.to_string())?;
        if e.transcription_uncertain() {
            uncertain.push(format!("{}={}", e.system.name, if r.is_straight() { "straight" } else { "not straight" }));
            continue;
        }
        ensure(r.is_straight(), || format!("{}: {:?}", e.system.name, r.verdict.outcome))?;
        gated += 1;
    }
    for e in corpus("table1.variants") {
        let r = is_straight(&e.system, &cfg).map_err(|err| err.to_string())?;
        ensure(r.is_straight(), || format!("{}: {:?}", e.system.name, r.verdict.outcome))?;
        gated += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1} s"))?;
    Ok(format!("{gated} gated entries straight in {secs:.2} s; not gated: {}", uncertain.join(", ")))
}

fn with_fixed_params(sys: &OdeSystem, rng: &mut ChaCha8Rng) -> OdeSystem {
    let params = sys
        .params
        .iter()
        .map(|d| match d.policy {
            ParamPolicy::Fixed(_) => d.clone(),
            _ => ParamDecl::fixed(&d.name, nonzero_rational(rng)),
        })
        .collect();
    OdeSystem::new(&sys.name, sys.rhs.clone(), params).unwrap()
}

fn criterion_2() -> Outcome_ {
    let cfg = OracleConfig::default();
    let entries = corpus("table2.notstraight");
    for e in &entries {
        witness_reproduces(&e.system, &cfg)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut draws = 0;
    for name in ["painleve-1", "painleve-2", "painleve-4"] {
        let e = entries.iter().find(|e| e.system.name == name).unwrap();
        let mut seen = Vec::new();
        for seed in 1..=5u64 {
            let sys = with_fixed_params(&e.system, &mut rng);
            let fixed: Vec<_> = sys.params.iter().map(|d| d.policy.clone()).collect();
            ensure(fixed.is_empty() || !seen.contains(&fixed), || format!("{name}: repeated parameter draw"))?;
            seen.push(fixed);
            witness_reproduces(&sys, &OracleConfig::with_seed(seed))?;
            draws += 1;
        }
    }
    Ok(format!("{} entries not straight with verified witnesses; {draws} parameter draws of PI, PII, PIV", entries.len()))
}

fn criterion_3() -> Outcome_ {
    let cfg = OracleConfig::default();
    let entries = corpus("table2.degenerate");
    for e in &entries {
        let r = is_straight(&e.system, &cfg).map_err(|err| err.to_string())?;
        ensure(r.is_straight(), || format!("{}: {:?}", e.system.name, r.verdict.outcome))?;
    }
    Ok(format!("{} degenerate entries straight", entries.len()))
}

fn criterion_4() -> Outcome_ {
    let equal = entry("examples", "oscillators-equal");
    let unequal = entry("examples", "oscillators-unequal");
    for seed in 0..10 {
        let cfg = OracleConfig::with_seed(seed);
        let a = is_straight(&equal.system, &cfg).map_err(|e| e.to_string())?;
        ensure(a.is_straight(), || format!("shared frequency, seed {seed}: {:?}", a.verdict.outcome))?;
        let b = is_straight(&unequal.system, &cfg).map_err(|e| e.to_string())?;
        ensure(b.verdict.is_nonzero(), || format!("independent frequencies, seed {seed}: {:?}", b.verdict.outcome))?;
    }
    Ok("10/10 seeds each".into())
}

fn mat_mul(a: &[Vec<Number>], b: &[Vec<Number>]) -> Vec<Vec<Number>> {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).fold(Number::zero(), |acc, k| acc.add(&a[i][k].mul(&b[k][j])))).collect())
        .collect()
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<Number>> {
    (0..n).map(|_| (0..n).map(|_| small_rational(rng)).collect()).collect()
}

fn is_scalar(m: &[Vec<Number>]) -> bool {
    let n = m.len();
    (0..n).all(|i| (0..n).all(|j| if i == j { m[i][i] == m[0][0] } else { m[i][j].is_zero() }))
}

fn criterion_5() -> Outcome_ {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = OracleConfig::default();
    let quarter = Number::from_ratio(1, 4);
    let mut agree = 0;
    for trial in 0..200 {
        let n = rng.random_range(2..=3);
        let a = random_matrix(&mut rng, n);
        let s = small_rational(&mut rng);
        let a2 = mat_mul(&a, &a);
        let mut b: Vec<Vec<Number>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { s.sub(&a2[i][j].mul(&quarter)) } else { a2[i][j].mul(&quarter).neg() }).collect())
            .collect();
        let perturbed = trial >= 100;
        if perturbed {
            let e = loop {
                let e = random_matrix(&mut rng, n);
                if !is_scalar(&e) {
                    break e;
                }
            };
            for i in 0..n {
                for j in 0..n {
                    b[i][j] = b[i][j].add(&e[i][j]);
                }
            }
        }
        let ls = LinearConstSystem::new(a, b).map_err(|e| e.to_string())?;
        let exact = classify_linear_const(&ls);
        let fels = fels_torsion(&ls.to_system("linear"), &cfg).map_err(|e| e.to_string())?;
        ensure(exact != perturbed, || format!("trial {trial}: classifier says {exact}"))?;
        ensure(fels.is_straight() != perturbed, || format!("trial {trial}: Fels {:?}", fels.verdict.outcome))?;
        ensure(!fels.verdict.is_inconclusive(), || format!("trial {trial}: inconclusive"))?;
        agree += 1;
    }
    Ok(format!("{agree}/200 agree (100 straight, 100 perturbed)"))
}

fn criterion_6() -> Outcome_ {
    let cfg = OracleConfig::default();
    let weierstrass = OdeSystem::new("w", vec![p("6*y^2")], vec![]).unwrap();
    let v = check_conserved(&weierstrass, &p("dy^2 - 4*y^3"), &cfg).map_err(|e| e.to_string())?;
    ensure(v.is_zero(), || format!("dy^2 - 4y^3: {:?}", v.outcome))?;
    let ell = entry("duals", "elliptic-example");
    let lambda = p("y - dy^2/(y*(y - 1))");
    let v = check_conserved(&ell.system, &lambda, &cfg).map_err(|e| e.to_string())?;
    ensure(v.is_zero(), || format!("lambda: {:?}", v.outcome))?;

    // Polynomial integrals of y'' = 6y² are polynomials in ẏ² − 4y³, so a
    // cubic with no component along 1, ẏ², y³ is never conserved.
    let monomials: Vec<Expr> = {
        let (x, y, v) = (Expr::x(), Expr::y(1), Expr::ydot(1));
        let mut ms = Vec::new();
        for i in 0..=3u32 {
            for j in 0..=(3 - i) {
                for k in 0..=(3 - i - j) {
                    if (i, j, k) == (0, 0, 0) || (i, j, k) == (0, 0, 2) || (i, j, k) == (0, 3, 0) {
                        continue;
                    }
                    ms.push(x.powi(i as i64) * y.powi(j as i64) * v.powi(k as i64));
                }
            }
        }
        ms
    };
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for t in 0..20 {
        let terms = (0..4).map(|_| monomials[rng.random_range(0..monomials.len())].scaled(&nonzero_rational(&mut rng)));
        let g = Expr::sum(terms.collect());
        if g.is_zero() {
            continue;
        }
        let v = check_conserved(&weierstrass, &g, &OracleConfig::with_seed(t)).map_err(|e| e.to_string())?;
        ensure(v.is_nonzero(), || format!("g = {g}: {:?}", v.outcome))?;
        let dg = total_derivative(&g, &weierstrass);
        ensure(v.witness().unwrap().verify(&dg, cfg.rel_tol), || format!("g = {g}: witness does not verify"))?;
    }
    Ok("both integrals conserved; 20 random cubics not conserved".into())
}

fn criterion_7() -> Outcome_ {
    let cfg = OracleConfig::default();
    let hitchin = entry("duals", "hitchin");
    let r = is_straight(&hitchin.system, &cfg).map_err(|e| e.to_string())?;
    ensure(r.verdict.is_nonzero(), || format!("hitchin: {:?}", r.verdict.outcome))?;
    let pf = entry("duals", "picard-fuchs");
    let r = is_straight(&pf.system, &cfg).map_err(|e| e.to_string())?;
    ensure(r.is_straight(), || format!("picard-fuchs: {:?}", r.verdict.outcome))?;
    let dual = entry("duals", "hitchin-dual");
    let r = is_straight(&dual.system, &cfg).map_err(|e| e.to_string())?;
    let soft = match (&r.verdict.outcome, r.verdict.branch_limited) {
        (Outcome::Zero { .. }, true) => "branch-limited zero".to_string(),
        (o, _) => format!("{o:?}"),
    };
    ensure(!dual.is_gating(), || "hitchin-dual should not gate".into())?;
    Ok(format!("hitchin not straight, picard-fuchs straight; soft: hitchin-dual {soft}"))
}

fn random_system(rng: &mut ChaCha8Rng, n: usize) -> OdeSystem {
    let vs = vars(n);
    let rhs = (0..n).map(|_| random_poly(rng, &vs, 3, 5)).collect();
    OdeSystem::new("random", rhs, vec![]).unwrap()
}

fn criterion_8() -> Outcome_ {
    let cfg = OracleConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);

    for t in 0..50 {
        let n = rng.random_range(2..=3);
        let sys = random_system(&mut rng, n);
        let m = fels_matrix(&sys);
        let trace = Expr::sum((0..n).map(|k| m[k][k].clone()).collect());
        let v = is_zero(&trace, &[], &cfg);
        ensure(v.is_zero(), || format!("system {t}: trace {:?}", v.outcome))?;
    }

    for _ in 0..20 {
        let sys = random_system(&mut rng, 1);
        let m = fels_matrix(&sys);
        ensure(m.len() == 1 && m[0][0].is_zero(), || format!("n = 1 Fels entry {}", m[0][0]))?;
    }

    let vs = vars(1);
    let (h, tol) = (1e-5, 1e-6);
    let mut fd_checked = 0;
    for t in 0..50 {
        let f = random_expr(&mut rng, &vs, 3);
        let g = random_expr(&mut rng, &vs, 3);
        let a = vs[rng.random_range(0..vs.len())].clone();
        let b = vs[rng.random_range(0..vs.len())].clone();
        let leibniz = partial(&(&f * &g), &a) - (partial(&f, &a) * &g + &f * partial(&g, &a));
        let v = is_zero(&leibniz, &[], &OracleConfig::with_seed(t));
        ensure(v.is_zero(), || format!("Leibniz fails for {f} and {g}: {:?}", v.outcome))?;
        let clairaut = partial(&partial(&f, &a), &b) - partial(&partial(&f, &b), &a);
        let v = is_zero(&clairaut, &[], &OracleConfig::with_seed(t));
        ensure(v.is_zero(), || format!("Clairaut fails for {f}: {:?}", v.outcome))?;

        let at = random_point(&mut rng, vs.clone());
        let value = |shift: Complex64| {
            let mut ctx: EvalContext = at.iter().map(|(k, v)| (k.clone(), *v)).collect();
            ctx.set(a.clone(), at[&a] + shift);
            eval(&f, &mut ctx).ok()
        };
        let mut ctx: EvalContext = at.iter().map(|(k, v)| (k.clone(), *v)).collect();
        let (Some(up), Some(down), Ok(d)) = (value(h.into()), value((-h).into()), eval(&partial(&f, &a), &mut ctx))
        else {
            continue;
        };
        let fd = (up - down) / (2.0 * h);
        ensure((fd - d).norm() <= tol * d.norm().max(1.0), || format!("finite difference for {f} in {a}: {fd} vs {d}"))?;
        fd_checked += 1;
    }

    let mut witnesses = 0;
    for t in 0..30 {
        let e = random_expr(&mut rng, &vs, 3);
        let c = OracleConfig::with_seed(t);
        let v1 = is_zero(&e, &[], &c);
        let v2 = is_zero(&e, &[], &c);
        ensure(v1 == v2, || format!("oracle not deterministic on {e}"))?;
        if let Some(w) = v1.witness() {
            ensure(w.verify(&e, c.rel_tol), || format!("witness for {e} does not verify"))?;
            witnesses += 1;
        }
    }
    Ok(format!("50 traces zero, n = 1 Fels zero, Leibniz/Clairaut 50x, {fd_checked} finite differences, {witnesses} witnesses re-verified"))
}

fn criterion_9() -> Outcome_ {
    let cfg = OracleConfig::default();
    let mut count = 0;
    for e in corpus("table1.straight").into_iter().chain(corpus("table1.variants")) {
        let r = quartic_test(&e.system, &cfg).map_err(|err| err.to_string())?;
        ensure(r.is_straight(), || format!("{}: {:?}", e.system.name, r.verdict.outcome))?;
        count += 1;
    }
    let sys = OdeSystem::new("quartic", vec![p("dy^4")], vec![]).unwrap();
    let r = quartic_test(&sys, &cfg).map_err(|e| e.to_string())?;
    let w = r.verdict.witness().ok_or("dy^4 passed the quartic test")?;
    ensure(w.value == Complex64::new(24.0, 0.0), || format!("witness value {}", w.value))?;
    ensure(w.entry.as_deref() == Some(&[1, 1, 1, 1, 1][..]), || format!("witness entry {:?}", w.entry))?;
    Ok(format!("{count} table entries pass; dy^4 fails with witness 24"))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome_); 9] = [
        (1, "straight table", criterion_1),
        (2, "non-straight table", criterion_2),
        (3, "degenerate loci", criterion_3),
        (4, "oscillator dichotomy", criterion_4),
        (5, "linear systems", criterion_5),
        (6, "conserved quantities", criterion_6),
        (7, "dual pair", criterion_7),
        (8, "structural invariants", criterion_8),
        (9, "quartic criterion", criterion_9),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, title, check) in criteria {
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match result {
            Ok(detail) => println!("criterion {n} PASS  {title}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} FAIL  {title}: {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
