//! Acceptance runs. Each criterion prints one PASS/FAIL line; the binary
//! exits nonzero if any criterion fails.
//!
//! Run with `cargo test -p pitmesh-core --test acceptance`.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use nalgebra::{Matrix2, Matrix3};
use pitmesh::adapt::{
    energy, grad_energy, monitor_mackenzie, solve_equidistribution_1d, AdaptParams, MetricField,
    ReferenceShape,
};
use pitmesh::crystal::{orientation_from_axes, vcorr_crystal, MaterialSpec, VcorrParams};
use pitmesh::fem::{newton_solve_with_dirichlet, NewtonSettings, Physics};
use pitmesh::mesh::{min_distance_to_pit, BoundaryEdge, BoundaryTag, TriMesh, Vec2};
use pitmesh::sim::{
    fit_power_law, init_mesh, radial_deviation, triangulate, wall_angles, Column, PitSpec,
    SimConfig, Simulation,
};
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

struct Outcome {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

#[derive(Default)]
struct Report {
    outcomes: Vec<Outcome>,
}

impl Report {
    fn record(&mut self, id: usize, name: &'static str, pass: bool, detail: String) {
        println!(
            "criterion {id:>2} {}: {name}: {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
        self.outcomes.push(Outcome {
            id,
            name,
            pass,
            detail,
        });
    }
}

fn minutes(d: Duration) -> String {
    format!("{:.1} s", d.as_secs_f64())
}

// ---------------------------------------------------------------- runs

/// Result of a full simulation with per-step checks.
struct Run {
    label: &'static str,
    sim: Option<Simulation>,
    error: Option<String>,
    elapsed: Duration,
    /// Steps at which an inverted cell was found.
    inverted: Vec<usize>,
    /// Largest radial deviation of the first chain over all steps.
    max_deviation: f64,
    /// Vertex/cell counts just before and just after every merge step.
    merge_counts: Vec<((usize, usize), (usize, usize))>,
}

fn chain_deviation(sim: &Simulation, center: Vec2) -> f64 {
    let pts = sim.chains[0].points(&sim.mesh);
    // Corners sit on the surface and are placed by extrapolation.
    radial_deviation(&pts[1..pts.len() - 1], center)
}

fn simulate(label: &'static str, cfg: SimConfig) -> Run {
    let start = Instant::now();
    let center = Vec2::new(cfg.pits[0].center, 0.0);
    let mut run = Run {
        label,
        sim: None,
        error: None,
        elapsed: Duration::ZERO,
        inverted: Vec::new(),
        max_deviation: 0.0,
        merge_counts: Vec::new(),
    };
    let mesh = match init_mesh(&cfg) {
        Ok((m, _)) => m,
        Err(e) => {
            run.error = Some(format!("initial mesh: {e}"));
            run.elapsed = start.elapsed();
            return run;
        }
    };
    if mesh.first_inverted().is_some() {
        run.inverted.push(0);
    }
    let mut sim = match Simulation::new(cfg, mesh) {
        Ok(s) => s,
        Err(e) => {
            run.error = Some(e.to_string());
            run.elapsed = start.elapsed();
            return run;
        }
    };
    run.max_deviation = chain_deviation(&sim, center);
    let mut counts = (sim.mesh.num_vertices(), sim.mesh.num_cells());
    let result = sim.run(|s, info| {
        if s.mesh.first_inverted().is_some() {
            run.inverted.push(info.step);
        }
        run.max_deviation = run.max_deviation.max(chain_deviation(s, center));
        let now = (s.mesh.num_vertices(), s.mesh.num_cells());
        if info.merged {
            run.merge_counts.push((counts, now));
        }
        counts = now;
        Ok(())
    });
    if let Err(e) = result {
        run.error = Some(format!("step {}: {e}", sim.step));
    }
    run.sim = Some(sim);
    run.elapsed = start.elapsed();
    println!(
        "  run {label}: {} steps, t = {:.2}, {}{}",
        run.sim.as_ref().map_or(0, |s| s.step),
        run.sim.as_ref().map_or(0.0, |s| s.t),
        minutes(run.elapsed),
        run.error.as_ref().map_or(String::new(), |e| format!(", error: {e}"))
    );
    run
}

fn crystal(zone: [i32; 3], x: [i32; 3]) -> MaterialSpec {
    MaterialSpec::Crystal {
        orientation: orientation_from_axes(zone, x).unwrap(),
    }
}

fn with_material(material: MaterialSpec) -> SimConfig {
    let mut cfg = SimConfig::default();
    cfg.physics.material = material;
    cfg
}

fn final_angles(run: &Run) -> Option<(f64, f64)> {
    let sim = run.sim.as_ref()?;
    wall_angles(&sim.chains[0].points(&sim.mesh))
}

fn completed(run: &Run) -> bool {
    run.error.is_none() && run.sim.as_ref().is_some_and(|s| s.finished())
}

// ---------------------------------------------------------------- 1, 2

fn criterion_1(r: &mut Report) {
    let p = VcorrParams::default();
    let s = 0.5f64.sqrt();
    let cases = [
        ("<001>", [0, 0, 1], [1, 0, 0], Vec2::new(1.0, 0.0), -0.2297),
        ("<011>", [0, 0, 1], [1, 0, 0], Vec2::new(s, s), -0.2455),
        // Zone [1-10] with x along [001]: n = (1, -sqrt 2)/sqrt 3 maps to [111].
        (
            "<111>",
            [1, -1, 0],
            [0, 0, 1],
            Vec2::new(1.0, -(2f64.sqrt())) / 3f64.sqrt(),
            -0.2525,
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, zone, x, n, want) in cases {
        let v = vcorr_crystal(&orientation_from_axes(zone, x).unwrap(), &p, n);
        let ok = (v - want).abs() < 5e-5;
        pass &= ok;
        parts.push(format!("{name} {v:.4} V"));
    }
    r.record(1, "crystallographic potentials", pass, parts.join(", "));
}

fn criterion_2(r: &mut Report) {
    let id = orientation_from_axes([0, 0, 1], [1, 0, 0]).unwrap().matrix();
    let s = 0.5f64.sqrt();
    let printed = Matrix3::new(-s, 0.0, s, 0.0, -1.0, 0.0, s, 0.0, s);
    let m = orientation_from_axes([1, 0, 1], [-1, 0, 1]).unwrap().matrix();
    let e1 = (id - Matrix3::identity()).amax();
    let e2 = (m - printed).amax();
    r.record(
        2,
        "orientation matrices",
        e1 <= 1e-12 && e2 <= 1e-12,
        format!("[001]/[100] error {e1:.1e}, [101]/[-101] error {e2:.1e}"),
    );
}

// ---------------------------------------------------------------- 3 to 8

fn criterion_3(r: &mut Report, hom: &Run) {
    let pass = completed(hom) && hom.max_deviation < 0.01 && hom.elapsed.as_secs_f64() < 120.0;
    r.record(
        3,
        "homogeneous shape preservation",
        pass,
        format!(
            "max radial deviation {:.3}% over {} steps (limit 1%), {}",
            100.0 * hom.max_deviation,
            hom.sim.as_ref().map_or(0, |s| s.step),
            minutes(hom.elapsed)
        ),
    );
}

fn criterion_4(r: &mut Report, c001: &Run, c101: &Run) {
    let mut pass = true;
    let mut parts = Vec::new();
    for (run, want) in [(c001, 90.0), (c101, 70.5)] {
        match final_angles(run) {
            Some((l, rt)) if completed(run) => {
                let between = 180.0 - l - rt;
                pass &= (between - want).abs() <= 3.0 && run.elapsed.as_secs_f64() < 120.0;
                parts.push(format!(
                    "{} inter-wall {between:.2} deg (walls {l:.2}/{rt:.2}, want {want} +/- 3), {}",
                    run.label,
                    minutes(run.elapsed)
                ));
            }
            _ => {
                pass = false;
                parts.push(format!("{} did not finish", run.label));
            }
        }
    }
    r.record(4, "crystal wall angles", pass, parts.join("; "));
}

fn criterion_5(r: &mut Report, bi: &Run) {
    let detail;
    let mut pass = false;
    match final_angles(bi) {
        Some((l, rt)) if completed(bi) => {
            // Each wall is one half of the symmetric single-crystal pit.
            let (left, right) = (180.0 - 2.0 * l, 180.0 - 2.0 * rt);
            pass = (left - 90.0).abs() <= 3.0
                && (right - 70.5).abs() <= 3.0
                && bi.elapsed.as_secs_f64() < 120.0;
            detail = format!(
                "left wall {l:.2} deg -> {left:.2} (want 90 +/- 3), right wall {rt:.2} deg -> {right:.2} (want 70.5 +/- 3), {}",
                minutes(bi.elapsed)
            );
        }
        _ => detail = "bicrystal run did not finish".into(),
    }
    r.record(5, "bicrystal asymmetry", pass, detail);
}

fn criterion_6(r: &mut Report, runs: &[&Run]) {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for run in runs {
        let Some(sim) = run.sim.as_ref().filter(|_| completed(run)) else {
            pass = false;
            parts.push(format!("{} did not finish", run.label));
            continue;
        };
        let first = sim.series.rows[0];
        for (col, name, initial) in [
            (Column::Depth, "depth", first.depth),
            (Column::Width, "width", first.width),
        ] {
            let f = sim.series.fit(col);
            let sum_err = ((f.a + f.c) - initial).abs() / initial;
            let ok = f.r_squared > 0.999 && f.b > 0.8 && f.b < 1.0 && sum_err < 0.05;
            pass &= ok;
            parts.push(format!(
                "{} {name} b {:.3} R2 {:.6} a+c {:.3} ({:+.1}%){}",
                run.label,
                f.b,
                f.r_squared,
                f.a + f.c,
                100.0 * ((f.a + f.c) - initial) / initial,
                if ok { "" } else { " FAIL" }
            ));
        }
    }
    // Synthetic width series with seeded Gaussian noise.
    let (a, b, c) = (0.142, 0.980, 9.83);
    let mut rng = StdRng::seed_from_u64(20_240_601);
    let noise = Normal::new(0.0, 1e-3).unwrap();
    // Times counted from 1, as the series fit does.
    let t: Vec<f64> = (0..=240).map(|k| 1.0 + 0.5 * k as f64).collect();
    let y: Vec<f64> = t
        .iter()
        .map(|&t| a * t.powf(b) + c + noise.sample(&mut rng))
        .collect();
    let f = fit_power_law(&t, &y);
    let within = [(f.a, a, f.se_a), (f.b, b, f.se_b), (f.c, c, f.se_c)]
        .iter()
        .all(|&(got, want, se)| se > 0.0 && (got - want).abs() <= 3.0 * se);
    pass &= within && f.converged;
    parts.push(format!(
        "synthetic a {:.4}+/-{:.1e} b {:.4}+/-{:.1e} c {:.4}+/-{:.1e}{}",
        f.a,
        f.se_a,
        f.b,
        f.se_b,
        f.c,
        f.se_c,
        if within { "" } else { " FAIL" }
    ));
    pass &= start.elapsed().as_secs_f64() < 60.0;
    r.record(6, "power-law behavior", pass, parts.join("; "));
}

fn criterion_7(r: &mut Report, runs: &[&Run]) {
    let mut pass = true;
    let mut parts = Vec::new();
    for run in runs {
        let steps = run.sim.as_ref().map_or(0, |s| s.step);
        let ok = run.inverted.is_empty() && run.error.is_none();
        pass &= ok;
        parts.push(format!(
            "{} {} steps, {} inverted{}",
            run.label,
            steps,
            run.inverted.len(),
            run.error.as_ref().map_or(String::new(), |e| format!(" ({e})"))
        ));
    }
    r.record(7, "mesh nonsingularity", pass, parts.join("; "));
}

fn criterion_8(r: &mut Report, two: &Run) {
    let merges = two.sim.as_ref().map_or(0, |s| s.merges());
    let same = two.merge_counts.iter().all(|(a, b)| a == b);
    let pass = completed(two) && merges == 1 && two.merge_counts.len() == 1 && same
        && two.elapsed.as_secs_f64() < 180.0;
    let counts = two
        .merge_counts
        .iter()
        .map(|(a, b)| format!("{}v/{}c -> {}v/{}c", a.0, a.1, b.0, b.1))
        .collect::<Vec<_>>()
        .join(", ");
    r.record(
        8,
        "merge topology",
        pass,
        format!("{merges} merge(s), counts {counts}, {}", minutes(two.elapsed)),
    );
}

// ---------------------------------------------------------------- 9, 10

fn criterion_9(r: &mut Report) {
    let start = Instant::now();
    let cfg = SimConfig::default();
    let (detail, pass) = match init_mesh(&cfg) {
        Ok((_, rep)) => {
            let n = rep.trace.len();
            let last = rep.trace.last().copied().unwrap_or(f64::INFINITY);
            let tail = &rep.trace[n.saturating_sub(5)..];
            let decreasing = tail.windows(2).all(|w| w[1] < w[0]);
            let trace: Vec<String> = rep.trace.iter().map(|v| format!("{v:.2e}")).collect();
            (
                format!(
                    "{n} iterations, final {last:.2e}, tail decreasing {decreasing}, {}; trace [{}]",
                    minutes(start.elapsed()),
                    trace.join(" ")
                ),
                last < 1e-2 && n <= 40 && decreasing && start.elapsed().as_secs_f64() < 60.0,
            )
        }
        Err(e) => (format!("smoothing failed: {e}"), false),
    };
    r.record(9, "smoothing convergence", pass, detail);
}

/// Smallest interior edge with both ends within 2 um of the pit, and the
/// 75th-percentile pit distance of the nearest 10% of free vertices.
fn clustering(mesh: &TriMesh) -> (f64, f64) {
    let chains = mesh.chains_from_tags().unwrap();
    let on_pit: HashSet<usize> = chains.iter().flat_map(|c| c.vertices.iter().copied()).collect();
    let dist: Vec<f64> = mesh
        .vertices
        .iter()
        .map(|&x| min_distance_to_pit(x, &chains, mesh))
        .collect();
    let min_edge = mesh
        .edges()
        .into_iter()
        .filter(|[a, b]| !(on_pit.contains(a) && on_pit.contains(b)))
        .filter(|[a, b]| dist[*a] <= 2.0 && dist[*b] <= 2.0)
        .map(|[a, b]| (mesh.vertices[a] - mesh.vertices[b]).norm())
        .fold(f64::INFINITY, f64::min);
    let mut free: Vec<f64> = (0..mesh.num_vertices())
        .filter(|v| !on_pit.contains(v))
        .map(|v| dist[v])
        .collect();
    free.sort_by(f64::total_cmp);
    let nearest = &free[..(free.len() / 10).max(1)];
    let q75 = nearest[((nearest.len() - 1) as f64 * 0.75).round() as usize];
    (min_edge, q75)
}

fn criterion_10(r: &mut Report) {
    let start = Instant::now();
    let mut pass = true;
    let measure = |mu1: f64, mu2: f64| -> Option<(f64, f64)> {
        let mut cfg = SimConfig::default();
        cfg.adapt.mu1 = mu1;
        cfg.adapt.mu2 = mu2;
        let (mesh, _) = init_mesh(&cfg).ok()?;
        mesh.first_inverted().is_none().then(|| clustering(&mesh))
    };
    let mu1: Vec<Option<(f64, f64)>> = [1.0, 10.0, 100.0].iter().map(|&m| measure(m, 1.0)).collect();
    let mu2: Vec<Option<(f64, f64)>> = [1.0, 10.0, 20.0].iter().map(|&m| measure(100.0, m)).collect();
    let edges: Option<Vec<f64>> = mu1.iter().map(|m| m.map(|v| v.0)).collect();
    let extents: Option<Vec<f64>> = mu2.iter().map(|m| m.map(|v| v.1)).collect();
    let fmt = |v: &Option<Vec<f64>>| {
        v.as_ref().map_or("failed".to_string(), |v| {
            v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ")
        })
    };
    match &edges {
        Some(e) => pass &= e.windows(2).all(|w| w[1] <= w[0]),
        None => pass = false,
    }
    match &extents {
        Some(e) => pass &= e.windows(2).all(|w| w[1] < w[0]),
        None => pass = false,
    }
    pass &= start.elapsed().as_secs_f64() < 300.0;
    r.record(
        10,
        "monitor parameter effects",
        pass,
        format!(
            "min edge within 2 um for mu1 = 1, 10, 100: {}; nearest-10% 75th percentile for mu2 = 1, 10, 20: {}; {}",
            fmt(&edges),
            fmt(&extents),
            minutes(start.elapsed())
        ),
    );
}

// ---------------------------------------------------------------- 11

fn unit_square(n: usize) -> TriMesh {
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let h = 1.0 / n as f64;
    let mut vertices = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Vec2::new(i as f64 * h, j as f64 * h));
        }
    }
    let mut tris = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if (i + j) % 2 == 0 {
                tris.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                tris.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            } else {
                tris.push([id(i, j), id(i + 1, j), id(i, j + 1)]);
                tris.push([id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
    }
    let mut edges = Vec::new();
    for i in 0..n {
        edges.push(BoundaryEdge { v: [id(i, 0), id(i + 1, 0)], tag: BoundaryTag::Bottom });
        edges.push(BoundaryEdge { v: [id(i, n), id(i + 1, n)], tag: BoundaryTag::Top });
        edges.push(BoundaryEdge { v: [id(0, i), id(0, i + 1)], tag: BoundaryTag::Left });
        edges.push(BoundaryEdge { v: [id(n, i), id(n, i + 1)], tag: BoundaryTag::Right });
    }
    TriMesh::new(vertices, tris, edges).unwrap()
}

/// L2 error of the P1 solution of Laplace's equation with exact Dirichlet data.
fn manufactured_error(n: usize) -> f64 {
    use std::f64::consts::PI;
    let exact = |p: Vec2| (PI * p.x).sin() * (PI * p.y).sinh() / PI.sinh();
    let mesh = unit_square(n);
    let mut dirichlet: Vec<(usize, f64)> = mesh
        .boundary_edges
        .iter()
        .flat_map(|e| e.v)
        .map(|v| (v, exact(mesh.vertices[v])))
        .collect();
    dirichlet.sort_by_key(|d| d.0);
    dirichlet.dedup_by_key(|d| d.0);
    let guess = vec![0.0; mesh.num_vertices()];
    let phi = newton_solve_with_dirichlet(
        &mesh,
        &[],
        &Physics::default(),
        &guess,
        &NewtonSettings::default(),
        &dirichlet,
    )
    .unwrap()
    .phi;
    // Degree-5 seven-point rule.
    let (a1, b1, a2, b2) = (
        0.059_715_871_789_770,
        0.470_142_064_105_115,
        0.797_426_985_353_087,
        0.101_286_507_323_456,
    );
    let (w0, w1, w2) = (0.225, 0.132_394_152_788_506, 0.125_939_180_544_827);
    let rule = [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], w0),
        ([a1, b1, b1], w1),
        ([b1, a1, b1], w1),
        ([b1, b1, a1], w1),
        ([a2, b2, b2], w2),
        ([b2, a2, b2], w2),
        ([b2, b2, a2], w2),
    ];
    let mut sum = 0.0;
    for (c, t) in mesh.triangles.iter().enumerate() {
        let p = mesh.cell_points(c);
        let area = mesh.signed_area(c);
        for (l, w) in rule {
            let x = p[0] * l[0] + p[1] * l[1] + p[2] * l[2];
            let uh = phi[t[0]] * l[0] + phi[t[1]] * l[1] + phi[t[2]] * l[2];
            sum += w * area * (uh - exact(x)).powi(2);
        }
    }
    sum.sqrt()
}

fn criterion_11(r: &mut Report) {
    let start = Instant::now();
    // FEM convergence.
    let ns = [8usize, 16, 32];
    let errs: Vec<f64> = ns.iter().map(|&n| manufactured_error(n)).collect();
    let (sx, sy, sxx, sxy) = ns.iter().zip(&errs).fold((0.0, 0.0, 0.0, 0.0), |acc, (&n, &e)| {
        let (x, y) = ((1.0 / n as f64).ln(), e.ln());
        (acc.0 + x, acc.1 + y, acc.2 + x * x, acc.3 + x * y)
    });
    let k = ns.len() as f64;
    let rate = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    let fem_ok = (rate - 2.0).abs() <= 0.1;

    // Energy gradient on the default initial triangulation.
    let cfg = SimConfig::default();
    let mesh = triangulate(&cfg.domain, &cfg.pits, 31, 2.0).unwrap();
    let chains = mesh.chains_from_tags().unwrap();
    let mut grad_err = 0.0f64;
    for (reference, anisotropic) in [
        (ReferenceShape::EquilateralUnitary, false),
        (ReferenceShape::UnitRight, true),
        (ReferenceShape::Equilateral { area: 0.5 }, true),
    ] {
        let p = AdaptParams {
            reference,
            ..AdaptParams::default()
        };
        let mut metric = monitor_mackenzie(&mesh, &chains, &p);
        if anisotropic {
            metric = MetricField {
                tensors: metric
                    .tensors
                    .iter()
                    .zip(&mesh.vertices)
                    .map(|(m, x)| m + Matrix2::new(0.5, 0.1 * x.x.sin(), 0.1 * x.x.sin(), 0.2))
                    .collect(),
            };
        }
        let g = grad_energy(&mesh, &metric, &p).unwrap();
        let scale = g.iter().fold(0.0f64, |m, v| m.max(v.amax()));
        for v in 0..mesh.num_vertices() {
            for a in 0..2 {
                let h = 1e-6;
                let mut up = mesh.clone();
                let mut dn = mesh.clone();
                up.vertices[v][a] += h;
                dn.vertices[v][a] -= h;
                let fd = (energy(&up, &metric, &p).unwrap() - energy(&dn, &metric, &p).unwrap())
                    / (2.0 * h);
                grad_err = grad_err.max((fd - g[v][a]).abs() / scale);
            }
        }
    }
    let grad_ok = grad_err <= 1e-6;

    // One-dimensional equidistribution.
    let mut eq_err = 0.0f64;
    for n in [4usize, 10, 50] {
        match solve_equidistribution_1d(|x| 2.0 * x, 0.0, 1.0, n) {
            Ok(x) => {
                for (i, xi) in x.iter().enumerate() {
                    eq_err = eq_err.max((xi - (i as f64 / n as f64).sqrt()).abs());
                }
            }
            Err(_) => eq_err = f64::INFINITY,
        }
    }
    let eq_ok = eq_err <= 1e-8;
    r.record(
        11,
        "numerical kernels",
        fem_ok && grad_ok && eq_ok && start.elapsed().as_secs_f64() < 60.0,
        format!(
            "L2 errors {} rate {rate:.3}; grad_energy FD error {grad_err:.1e}; equidistribution error {eq_err:.1e}; {}",
            errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(" "),
            minutes(start.elapsed())
        ),
    );
}

fn main() {
    // `cargo test` passes harness flags such as `--quiet`; listing must not
    // start the simulations.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut report = Report::default();
    criterion_1(&mut report);
    criterion_2(&mut report);

    let hom = simulate("homogeneous", SimConfig::default());
    let c001 = simulate("[001]", with_material(crystal([0, 0, 1], [1, 0, 0])));
    let c101 = simulate("[101]", with_material(crystal([1, 0, 1], [-1, 0, 1])));
    let bi = simulate(
        "bicrystal",
        with_material(MaterialSpec::Bicrystal {
            x_interface: 0.0,
            left: orientation_from_axes([0, 0, 1], [1, 0, 0]).unwrap(),
            right: orientation_from_axes([1, 0, 1], [-1, 0, 1]).unwrap(),
        }),
    );
    let mut two_cfg = SimConfig::default();
    two_cfg.pits = vec![
        PitSpec {
            center: -6.0,
            width: 10.0,
            depth: 5.0,
        },
        PitSpec {
            center: 6.0,
            width: 10.0,
            depth: 5.0,
        },
    ];
    let two = simulate("two-pit", two_cfg);

    criterion_3(&mut report, &hom);
    criterion_4(&mut report, &c001, &c101);
    criterion_5(&mut report, &bi);
    criterion_6(&mut report, &[&hom, &c001, &c101]);
    criterion_7(&mut report, &[&hom, &c001, &c101, &bi, &two]);
    criterion_8(&mut report, &two);
    criterion_9(&mut report);
    criterion_10(&mut report);
    criterion_11(&mut report);

    let failed: Vec<&Outcome> = report.outcomes.iter().filter(|o| !o.pass).collect();
    println!(
        "acceptance: {} of {} criteria passed",
        report.outcomes.len() - failed.len(),
        report.outcomes.len()
    );
    if !failed.is_empty() {
        for o in &failed {
            eprintln!("failed criterion {} ({}): {}", o.id, o.name, o.detail);
        }
        std::process::exit(1);
    }
}
