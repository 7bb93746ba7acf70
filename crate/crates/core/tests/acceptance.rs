//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero when
//! any criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use rand::Rng;
use ratdyn::bimodule::{
    build_frame, direct_inner_product, fiber_sample, frame_delta_defect, nested_inner_product, norm_sup, norm_two, normalized_witness,
    reverify_normalized, reverify_witness, simplicity_witness, GraphFunction, WitnessOptions,
};
use ratdyn::io::{report_json, write_cloud_csv, write_julia_csv, write_pgm, write_trace_csv};
use ratdyn::julia::{
    default_start, random_sphere_points, render, sample_inverse_iteration, sample_tree, stream_rng, JuliaCloud, RenderMode, RenderOptions,
    Window, DEFAULT_BURN_IN,
};
use ratdyn::measure::{convergence_diagnostic, lyubich_exact, lyubich_mc, pushforward_identity};
use ratdyn::registry::{self, arc_cover, resolve_map, VerifyOptions};
use ratdyn::transfer::{kms_defect, kms_iterate_many, kms_report, lemma31_defect, MonomialTable, KMS_BUDGET};
use ratdyn::{Complex64, Observable, RationalMap, SpherePoint, TestFunction};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn map(spec: &str) -> RationalMap {
    resolve_map(spec).unwrap()
}

fn registry_maps() -> Vec<(&'static str, RationalMap)> {
    registry::list().into_iter().map(|n| (n, map(n))).collect()
}

fn mc_cloud(m: &RationalMap, samples: usize, seed: u64) -> JuliaCloud {
    sample_inverse_iteration(m, &default_start(m).unwrap(), DEFAULT_BURN_IN, samples, seed).unwrap()
}

/// Random table with one to three terms `c z^j zbar^k`, `j + k <= 3`.
fn random_monomial(rng: &mut impl Rng) -> TestFunction {
    let mut t = MonomialTable::new();
    for _ in 0..rng.random_range(1..=3) {
        let j = rng.random_range(0..=3u32);
        let k = rng.random_range(0..=3 - j);
        let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        t.add_term(j, k, c);
    }
    TestFunction::Monomials(t)
}

fn c1_fiber_sums() -> Outcome {
    let pts = random_sphere_points(1000, 1);
    let mut worst_time: f64 = 0.0;
    let mut bad = Vec::new();
    for (name, m) in registry_maps() {
        let t = Instant::now();
        let wrong = pts
            .iter()
            .filter(|w| m.preimages(w).map(|f| f.total_index()) != Ok(m.degree() as u64))
            .count();
        worst_time = worst_time.max(t.elapsed().as_secs_f64());
        if wrong > 0 {
            bad.push(format!("{name}: {wrong} wrong"));
        }
    }
    outcome(
        bad.is_empty() && worst_time < 10.0,
        format!("7 maps x 1000 points, slowest map {worst_time:.2} s {}", bad.join("; ")),
    )
}

fn c2_riemann_hurwitz() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, m) in registry_maps() {
        let crit = m.critical_points().unwrap();
        let total: usize = crit.iter().map(|c| c.branch_index - 1).sum();
        pass &= total == 2 * m.degree() - 2;
        if name == "lattes" {
            pass &= crit.len() == 6 && m.degree() == 4;
        }
        parts.push(format!("{name} {total}/{}", 2 * m.degree() - 2));
    }
    outcome(pass, parts.join(", "))
}

fn c3_chain_rule() -> Outcome {
    let mut checked = 0;
    let mut bad = Vec::new();
    for (name, m) in registry_maps() {
        let m2 = m.iterate(2).unwrap();
        let mut pts: Vec<SpherePoint> = m.critical_points().unwrap().iter().map(|c| c.point).collect();
        pts.extend(random_sphere_points(100, 3));
        for x in pts {
            let lhs = m2.branch_index(&x).unwrap();
            let rhs = m.branch_index(&x).unwrap() * m.branch_index(&m.evaluate(&x)).unwrap();
            checked += 1;
            if lhs != rhs {
                bad.push(format!("{name} at {x}: {lhs} vs {rhs}"));
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!("{checked} points, {} mismatches {}", bad.len(), bad.join("; ")),
    )
}

fn c4_norm_sandwich() -> Outcome {
    let mut rng = stream_rng(4, 0);
    let mut worst: f64 = f64::NEG_INFINITY;
    for spec in ["z^2", "z^2-2"] {
        let m = map(spec);
        let probes = mc_cloud(&m, 4000, 4).strided(40);
        let sample = fiber_sample(&m, 1, &probes).unwrap();
        let sd = (m.degree() as f64).sqrt();
        for _ in 0..100 {
            let f = GraphFunction::from_test(1, random_monomial(&mut rng));
            let sup = norm_sup(&m, &f, &sample).unwrap();
            let two = norm_two(&m, &f, &probes).unwrap();
            worst = worst.max(sup - two).max(two - sd * sup);
        }
    }
    outcome(
        worst <= 1e-9,
        format!("200 random monomials, worst violation {worst:.3e} (slack 1e-9)"),
    )
}

fn c5_tensor_isometry() -> Outcome {
    let mut rng = stream_rng(5, 0);
    let mut worst: f64 = 0.0;
    for spec in ["z^2", "tchebychev_n:2"] {
        let m = map(spec);
        let ys = mc_cloud(&m, 1000, 5).strided(50);
        for n in [2usize, 3] {
            for y in &ys {
                let fs: Vec<GraphFunction> = (0..n).map(|_| GraphFunction::from_test(1, random_monomial(&mut rng))).collect();
                let gs: Vec<GraphFunction> = (0..n).map(|_| GraphFunction::from_test(1, random_monomial(&mut rng))).collect();
                let nested = nested_inner_product(&m, &fs, &gs, y).unwrap();
                let direct = direct_inner_product(&m, &fs, &gs, y).unwrap();
                worst = worst.max((nested - direct).norm());
            }
        }
    }
    outcome(worst < 1e-10, format!("n = 2, 3 x 50 tuples x 2 maps, max gap {worst:.3e}"))
}

fn c6_module_identities() -> Outcome {
    let mut worst: f64 = 0.0;
    let family = TestFunction::monomial_family(3);
    for (_, m) in registry_maps() {
        let probes = mc_cloud(&m, 2000, 6).strided(100);
        for a in &family {
            for b in &family {
                worst = worst.max(lemma31_defect(&m, a, b, &probes).unwrap());
            }
        }
    }
    outcome(
        worst < 1e-9,
        format!("7 maps x 100 monomial pairs x 100 probes, max defect {worst:.3e}"),
    )
}

fn c7_lyubich() -> Outcome {
    let t = Instant::now();
    let mut notes = Vec::new();
    let mut pass = true;
    for spec in ["z^2", "z^2+0.2", "z^2-2", "tchebychev_n:3", "lattes"] {
        let m = map(spec);
        let depth = if m.degree() == 2 { 10 } else { 5 };
        let chk = pushforward_identity(&m, &SpherePoint::new(Complex64::new(0.3, 0.1)), depth).unwrap();
        pass &= chk.exact;
    }
    notes.push("pushforward exact on 5 maps".to_string());

    let tests = TestFunction::monomial_family(3);
    let named: Vec<(String, &dyn Observable)> = tests.iter().map(|t| (t.name(), t as &dyn Observable)).collect();
    let (y1, y2) = (
        SpherePoint::new(Complex64::new(0.3, 0.1)),
        SpherePoint::new(Complex64::new(-0.7, 0.4)),
    );
    let mut cross: f64 = 0.0;
    for (_, m) in registry_maps().into_iter().filter(|(_, m)| m.degree() == 2) {
        let d = convergence_diagnostic(&m, &y1, 14, &named, Some(&y2)).unwrap();
        cross = cross.max(d.cross_gaps.iter().map(|g| g.gap).fold(0.0, f64::max));
    }
    pass &= cross < 1e-2;
    notes.push(format!("cross-base gap at depth 14 {cross:.3e}"));

    let n = 10_000;
    let bound = 3.0 / (n as f64).sqrt();
    let mut mc_gap: f64 = 0.0;
    for spec in ["z^2", "tchebychev_n:2"] {
        let m = map(spec);
        let exact = lyubich_exact(&m, &y1, 12).unwrap();
        let mc = lyubich_mc(&m, &y1, 24, n, 7).unwrap();
        for t in &tests {
            mc_gap = mc_gap.max((exact.integrate(t).unwrap() - mc.integrate(t).unwrap()).norm());
        }
    }
    pass &= mc_gap < bound;
    let secs = t.elapsed().as_secs_f64();
    pass &= secs < 60.0;
    notes.push(format!("MC/exact gap {mc_gap:.3e} < {bound:.3e}; {secs:.1} s"));
    outcome(pass, notes.join("; "))
}

/// `(1/π)∫_0^π cos^k θ dθ` by the midpoint rule.
fn arcsine_moment(k: i32) -> f64 {
    let n = 200_000;
    (0..n).map(|i| (PI * (i as f64 + 0.5) / n as f64).cos().powi(k)).sum::<f64>() / n as f64
}

fn c8_tchebychev() -> Outcome {
    let (m1, m2) = (arcsine_moment(1), arcsine_moment(2));
    let mu = lyubich_exact(&map("tchebychev_n:2"), &SpherePoint::real(0.3), 12).unwrap();
    let x1 = mu.integrate(&TestFunction::monomial(1, 0)).unwrap();
    let x2 = mu.integrate(&TestFunction::monomial(2, 0)).unwrap();
    let (e1, e2) = ((x1 - m1).norm(), (x2 - m2).norm());
    outcome(
        e1 < 1e-2 && e2 < 1e-2 && (m2 - 0.5).abs() < 1e-9,
        format!("int x = {:.6} (oracle {m1:.1e}), int x^2 = {:.6} (oracle {m2:.6})", x1.re, x2.re),
    )
}

fn c9_kms() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for spec in ["z^2", "tchebychev_n:2", "tchebychev_n:3", "z^2+0.2"] {
        let m = map(spec);
        let cloud = mc_cloud(&m, 20_000, 9);
        let probes = cloud.strided(64);
        let depth = if m.degree() == 2 { 14 } else { 9 };
        let reference = lyubich_exact(&m, &probes[0], depth).unwrap();
        let r = kms_report(&m, &TestFunction::monomial_family(3), &probes, 20, &reference, false).unwrap();
        let worst_var = r.tests.iter().map(|s| s.sup_variation).fold(0.0, f64::max);
        let worst_gap = r.tests.iter().map(|s| s.limit_gap).fold(0.0, f64::max);
        let levels = r.tests.iter().map(|s| s.levels).max().unwrap();
        pass &= r.pass;
        let mut note = format!("{spec}: var {worst_var:.2e} at level {levels}, limit gap {worst_gap:.2e}");
        if !r.pass {
            let slow: Vec<String> = r
                .tests
                .iter()
                .filter(|s| s.sup_variation >= 1e-6)
                .map(|s| format!("{} var {:.2e}", s.test, s.sup_variation))
                .collect();
            note.push_str(&format!(" [{}]", slow.join(", ")));
        }
        notes.push(note);

        let beta = (m.degree() as f64).ln() + 0.1;
        let lyub = lyubich_exact(&m, &probes[0], depth.min(10)).unwrap();
        let defect = kms_defect(&m, &lyub, &[&TestFunction::one()], Some(beta)).unwrap();
        let expected = ((-beta).exp() * m.degree() as f64 - 1.0).abs();
        pass &= (defect - expected).abs() < 1e-12;
    }
    notes.push("beta' falsification matches |e^-beta' d - 1|".into());
    outcome(pass, notes.join("; "))
}

fn c10_frames() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for spec in ["z^2", "z^2+0.2"] {
        let m = map(spec);
        let cloud = sample_tree(&m, &default_start(&m).unwrap(), 12).unwrap();
        match build_frame(&m, &cloud, arc_cover(Complex64::new(0.0, 0.0), 2)) {
            Ok(frame) => {
                let xs = cloud.strided(256);
                let recon = TestFunction::monomial_family(3)
                    .into_iter()
                    .map(|t| frame.reconstruction_defect(&GraphFunction::from_test(1, t), &xs).unwrap())
                    .fold(0.0, f64::max);
                let delta = frame_delta_defect(&frame, &xs).unwrap();
                pass &= recon < 1e-8 && delta < 1e-9;
                notes.push(format!("{spec}: {} members, recon {recon:.2e}, delta {delta:.2e}", frame.len()));
            }
            Err(e) => {
                pass = false;
                notes.push(format!("{spec}: {e}"));
            }
        }
    }
    let m = map("z^2-2");
    let cloud = sample_tree(&m, &default_start(&m).unwrap(), 12).unwrap();
    let refused = build_frame(&m, &cloud, arc_cover(Complex64::new(0.0, 0.0), 2)).is_err();
    pass &= refused;
    notes.push(format!("z^2-2 refused: {refused}"));
    outcome(pass, notes.join("; "))
}

/// `0.3 + |p|^2` with `p` a random polynomial of degree at most 2.
fn random_positive(rng: &mut impl Rng) -> TestFunction {
    let mut p = MonomialTable::new();
    for j in 0..=2 {
        p.add_term(j, 0, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    }
    let a = p
        .mul(&p.conj())
        .add(&MonomialTable::new().with_term(0, 0, Complex64::new(0.3, 0.0)));
    TestFunction::Monomials(a)
}

fn c11_witnesses() -> Outcome {
    let mut rng = stream_rng(11, 0);
    let mut passed = 0;
    let mut total = 0;
    let mut failures = Vec::new();
    for spec in ["z^2", "z^2-2"] {
        let m = map(spec);
        let cloud = sample_tree(&m, &default_start(&m).unwrap(), 14).unwrap();
        for i in 0..10 {
            let a = random_positive(&mut rng);
            total += 1;
            let sup = cloud.points.iter().map(|p| a.eval(p).unwrap().re).fold(0.0, f64::max);
            let eps = 0.1 * sup;
            let opts = WitnessOptions::default();
            let ok = simplicity_witness(&m, &a, eps, &cloud, &opts).and_then(|w| {
                let again = reverify_witness(&m, &a, &w)?;
                let u = normalized_witness(&m, &a, eps, &cloud, &opts)?;
                let again_u = reverify_normalized(&m, &a, &u)?;
                Ok(w.report.pass && u.report.pass && again <= 0.0 && again_u <= 0.0 && w.report.probes == 200)
            });
            match ok {
                Ok(true) => passed += 1,
                Ok(false) => failures.push(format!("{spec}#{i} bounds")),
                Err(e) => failures.push(format!("{spec}#{i} {e}")),
            }
        }
    }
    outcome(
        passed == total,
        format!(
            "{passed}/{total} witnesses and normalized witnesses pass at 200 probes {}",
            failures.join("; ")
        ),
    )
}

fn c12_registry() -> Outcome {
    let reports = registry::verify_all(&VerifyOptions::default()).unwrap();
    let failed: Vec<String> = reports
        .iter()
        .flat_map(|r| {
            r.checks
                .iter()
                .filter(|c| !c.pass)
                .map(move |c| format!("{}/{}", r.example, c.name))
        })
        .collect();
    let count = |name: &str| {
        reports
            .iter()
            .find(|r| r.example == name)
            .and_then(|r| r.checks.iter().find(|c| c.name == "critical_in_julia"))
            .and_then(|c| c.measured["count"].as_u64())
    };
    let tent = reports
        .iter()
        .find(|r| r.example == "z2_minus_2")
        .and_then(|r| r.checks.iter().find(|c| c.name == "tent_conjugacy"))
        .and_then(|c| c.measured["max_defect"].as_f64())
        .unwrap_or(f64::INFINITY);
    let counts = (count("z2_minus_2"), count("tchebychev_n"), count("lattes"));
    let pass = failed.is_empty() && counts == (Some(1), Some(2), Some(6)) && tent < 1e-10;
    outcome(
        pass,
        format!(
            "7 examples, failed checks [{}], critical-in-J counts {:?}, tent defect {tent:.2e}",
            failed.join(", "),
            counts
        ),
    )
}

fn artifacts() -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let quad = map("z^2 + (-0.1+0.65i)");
    let mut buf = Vec::new();
    write_julia_csv(&mut buf, &mc_cloud(&quad, 5000, 13)).unwrap();
    out.push(buf);
    let window = Window {
        x_min: -2.0,
        x_max: 2.0,
        y_min: -1.5,
        y_max: 1.5,
    };
    for (target, mode) in [(&quad, RenderMode::Escape), (&map("lattes"), RenderMode::Density)] {
        let opts = RenderOptions {
            mode,
            seed: 13,
            ..RenderOptions::default()
        };
        let img = render(target, &window, 96, 72, &opts).unwrap();
        let mut buf = Vec::new();
        write_pgm(&mut buf, &img).unwrap();
        out.push(buf);
    }
    let mut buf = Vec::new();
    write_cloud_csv(&mut buf, &lyubich_mc(&map("z^2-2"), &SpherePoint::real(0.3), 24, 3000, 13).unwrap()).unwrap();
    out.push(buf);
    let m = map("z^2+0.2");
    let probes = mc_cloud(&m, 2000, 13).strided(8);
    let zz = TestFunction::monomial(1, 1);
    let traces = kms_iterate_many(&m, &[&zz as &dyn Observable], 10, &probes, None, &KMS_BUDGET).unwrap();
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, &traces[0]).unwrap();
    out.push(buf);
    let rep = registry::verify(
        "ushiki_gasket",
        &VerifyOptions {
            seed: 13,
            ..Default::default()
        },
    )
    .unwrap();
    out.push(report_json("verify", &rep).unwrap().into_bytes());
    out
}

fn c13_determinism() -> Outcome {
    let pool = |n: usize| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    let a = pool(1).install(artifacts);
    let b = pool(4).install(artifacts);
    let c = artifacts();
    let same = a == b && b == c;
    let bytes: usize = a.iter().map(Vec::len).sum();
    outcome(
        same,
        format!("{} artifacts ({bytes} bytes) identical across 1, 4 and default threads", a.len()),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 13] = [
        ("fiber sums", c1_fiber_sums),
        ("Riemann-Hurwitz", c2_riemann_hurwitz),
        ("chain rule for branch index", c3_chain_rule),
        ("norm sandwich", c4_norm_sandwich),
        ("tensor isometry", c5_tensor_isometry),
        ("module identities for E", c6_module_identities),
        ("pullback measure invariance and convergence", c7_lyubich),
        ("Tchebychev measure oracle", c8_tchebychev),
        ("KMS iteration", c9_kms),
        ("frames", c10_frames),
        ("simplicity witnesses", c11_witnesses),
        ("registry verification", c12_registry),
        ("determinism", c13_determinism),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = run();
        if !o.pass {
            failures += 1;
        }
        println!(
            "criterion {:>2} {}: {} ({:.1} s) {}",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            o.detail.trim()
        );
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
