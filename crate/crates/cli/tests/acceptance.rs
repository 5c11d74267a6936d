//! End-to-end acceptance checks. Each test prints one `criterion N: PASS|FAIL`
//! line with the measured values before asserting.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dcm_core::asymptotics::{influence_grid, GridSpec, InfluenceCalculator, McOptions};
use dcm_core::depth::{DepthKind, DepthModel};
use dcm_core::model::{EllipticalModel, Family};
use dcm_core::numkernel::{dot, eigh, norm, Matrix, SymMatrix};
use dcm_core::ranks::spatial_median_default;
use dcm_core::scatter::{
    fit_scatter, fit_scatter_with, lambda_ds_population, recover_shape, tyler_residual, EstimatorKind, FitOptions,
    ShapeOptions,
};
use dcm_core::simulation::sample_elliptical;
use dcm_core::Execution;

const SEED: u64 = 20_240_611;

/// Written to the stdout handle directly, which libtest does not capture, so
/// passing criteria show up in a plain `cargo test` log too.
fn report(criterion: u32, pass: bool, detail: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "criterion {criterion}: {} : {detail}", if pass { "PASS" } else { "FAIL" });
    let _ = out.flush();
}

fn dcm(args: &[&str]) -> i32 {
    let mut full = vec!["dcm".to_string()];
    full.extend(args.iter().map(|s| s.to_string()));
    dcm_cli::main_with_args(full)
}

fn run_ok(args: &[&str]) {
    let code = dcm(args);
    assert_eq!(code, 0, "dcm {args:?} exited with {code}");
}

/// Header plus rows keyed by column name.
fn read_table(path: &Path) -> Vec<BTreeMap<String, String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    rdr.records()
        .map(|r| header.iter().cloned().zip(r.unwrap().iter().map(String::from)).collect())
        .collect()
}

fn num(row: &BTreeMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn label(est: &str) -> String {
    est.parse::<EstimatorKind>().unwrap().label()
}

// ---------------------------------------------------------------------------
// 1. Asymptotic efficiencies at ρ = 0.5
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_asymptotic_efficiency_table() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&[
        "are",
        "--output-dir",
        s(dir.path()),
        "--family",
        "normal,t5",
        "--rho",
        "0.5",
        "--mc-n",
        "1000000",
        "--seed",
        &SEED.to_string(),
    ]);
    let rows = read_table(&dir.path().join("are.csv"));
    let value = |family: &str, est: &str| -> f64 {
        let r = rows.iter().find(|r| r["family"] == family && r["estimator"] == label(est)).unwrap();
        num(r, "are")
    };
    // (family, estimator, printed value, tolerance)
    let cells = [
        ("normal", "scm", 0.49, 0.05),
        ("normal", "tyler", 0.50, 0.05),
        ("normal", "dcm-hd", 0.73, 0.05),
        ("normal", "dcm-mhd", 0.71, 0.05),
        ("normal", "dcm-pd", 0.82, 0.05),
        ("t5", "scm", 1.46, 0.07),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for (family, est, target, tol) in cells {
        let v = value(family, est);
        let ok = (v - target).abs() <= tol;
        pass &= ok;
        detail.push(format!("{family}/{est}={v:.3} (want {target}±{tol}{})", if ok { "" } else { " MISS" }));
    }
    report(1, pass, &detail.join(", "));
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 2. and 3. Finite-sample efficiencies for p = 2
// ---------------------------------------------------------------------------

const FSE_ESTIMATORS: [&str; 5] = ["scm", "tyler", "dcm-halfspace", "dcm-mahalanobis", "dcm-projection"];

/// Printed finite-sample efficiencies, columns in `FSE_ESTIMATORS` order.
const FSE_PUBLISHED: [(&str, usize, [f64; 5]); 9] = [
    ("normal", 100, [0.42, 0.43, 0.69, 0.66, 0.77]),
    ("normal", 300, [0.47, 0.49, 0.71, 0.69, 0.82]),
    ("normal", 500, [0.48, 0.50, 0.73, 0.71, 0.83]),
    ("t10", 100, [0.57, 0.59, 0.92, 0.87, 0.97]),
    ("t10", 300, [0.62, 0.64, 0.93, 0.85, 0.99]),
    ("t10", 500, [0.62, 0.65, 0.93, 0.86, 1.00]),
    ("t5", 100, [1.02, 1.04, 1.58, 1.20, 1.54]),
    ("t5", 300, [1.24, 1.28, 1.81, 1.36, 1.82]),
    ("t5", 500, [1.25, 1.29, 1.80, 1.33, 1.84]),
];

/// Printed asymptotic efficiencies for the normal family, `FSE_ESTIMATORS` order.
const ARE_PUBLISHED_NORMAL: [f64; 5] = [0.49, 0.50, 0.73, 0.71, 0.82];

fn run_fse(family: &str, out: &Path) -> Vec<BTreeMap<String, String>> {
    run_ok(&[
        "simulate-fse",
        "--output-dir",
        s(out),
        "--family",
        family,
        "--p",
        "2",
        "--sample-sizes",
        "100,300,500",
        "--reps",
        "1000",
        "--estimator",
        &FSE_ESTIMATORS.join(","),
        "--seed",
        &SEED.to_string(),
    ]);
    read_table(&out.join("fse.csv"))
}

fn fse_of(rows: &[BTreeMap<String, String>], n: usize, est: &str) -> f64 {
    let r = rows
        .iter()
        .find(|r| r["n"] == n.to_string() && r["estimator"] == label(est))
        .unwrap_or_else(|| panic!("missing row n={n} {est}"));
    assert_eq!(r["failures"], "0", "estimator failures in n={n} {est}");
    num(r, "fse")
}

#[test]
fn criterion_2_and_3_finite_sample_efficiency() {
    let dir = tempfile::tempdir().unwrap();
    let mut tables = BTreeMap::new();
    for family in ["normal", "t10", "t5"] {
        let out = dir.path().join(family);
        tables.insert(family, run_fse(family, &out));
    }

    let mut pass2 = true;
    let mut detail = Vec::new();
    for (family, n, printed) in FSE_PUBLISHED {
        let tol = if family == "t5" { 0.15 } else { 0.10 };
        for (est, target) in FSE_ESTIMATORS.iter().zip(printed) {
            let v = fse_of(&tables[family], n, est);
            let ok = (v - target).abs() <= tol;
            pass2 &= ok;
            if !ok {
                detail.push(format!("{family} n={n} {est}: {v:.3} vs {target}"));
            }
        }
    }
    let summary = |family: &str| {
        FSE_ESTIMATORS.iter().map(|e| format!("{:.2}", fse_of(&tables[family], 500, e))).collect::<Vec<_>>().join("/")
    };
    let msg = format!(
        "n=500 normal {} t10 {} t5 {}; misses: [{}]",
        summary("normal"),
        summary("t10"),
        summary("t5"),
        detail.join("; ")
    );
    report(2, pass2, &msg);

    // FSE at n = 500 against the asymptotic efficiencies
    let mut pass3 = true;
    let mut detail3 = Vec::new();
    for (est, are) in FSE_ESTIMATORS.iter().zip(ARE_PUBLISHED_NORMAL) {
        let v = fse_of(&tables["normal"], 500, est);
        let ok = (v - are).abs() <= 0.12;
        pass3 &= ok;
        detail3.push(format!("{est}: fse {v:.3} vs are {are}"));
    }
    report(3, pass3, &detail3.join(", "));
    assert!(pass2 && pass3);
}

// ---------------------------------------------------------------------------
// 4. Influence functions
// ---------------------------------------------------------------------------

/// Plug-in scatter functional of a weighted point set, as a function of the
/// contamination weight at `x0`.
struct ContaminationOracle {
    kind: EstimatorKind,
    draws: Matrix,
    /// htped² of each draw (DCM) under the uncontaminated law.
    weights: Vec<f64>,
    weight_x0: f64,
}

impl ContaminationOracle {
    fn new(kind: EstimatorKind, model: &EllipticalModel, draws: Matrix, x0: &[f64]) -> Self {
        let (weights, weight_x0) = match kind.depth() {
            Some(d) => {
                let pop = DepthModel::population(d, model).unwrap();
                let w = (0..draws.nrows()).map(|i| pop.htped_at(draws.row(i)).unwrap().powi(2)).collect();
                (w, pop.htped_at(x0).unwrap().powi(2))
            }
            None => (vec![1.0; draws.nrows()], 1.0),
        };
        ContaminationOracle { kind, draws, weights, weight_x0 }
    }

    /// Functional at `(1-eps) F_N + eps δ_x0`, center held at the origin.
    fn functional(&self, x0: &[f64], eps: f64) -> [[f64; 2]; 2] {
        let n = self.draws.nrows() as f64;
        let term = |x: &[f64], w: f64, m_inv: Option<&[[f64; 2]; 2]>| -> [[f64; 2]; 2] {
            let r2 = x[0] * x[0] + x[1] * x[1];
            let scale = match self.kind {
                EstimatorKind::SampleCov => w,
                EstimatorKind::Scm | EstimatorKind::Dcm(_) => w / r2,
                EstimatorKind::Tyler => {
                    let m = m_inv.unwrap();
                    let q = x[0] * (m[0][0] * x[0] + m[0][1] * x[1]) + x[1] * (m[1][0] * x[0] + m[1][1] * x[1]);
                    w / q
                }
                _ => unreachable!(),
            };
            [[scale * x[0] * x[0], scale * x[0] * x[1]], [scale * x[0] * x[1], scale * x[1] * x[1]]]
        };
        let sum = |m_inv: Option<&[[f64; 2]; 2]>| -> [[f64; 2]; 2] {
            let mut acc = [[0.0; 2]; 2];
            for i in 0..self.draws.nrows() {
                let t = term(self.draws.row(i), self.weights[i], m_inv);
                for a in 0..2 {
                    for b in 0..2 {
                        acc[a][b] += t[a][b];
                    }
                }
            }
            let t0 = if eps > 0.0 { term(x0, self.weight_x0, m_inv) } else { [[0.0; 2]; 2] };
            let mut out = [[0.0; 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    out[a][b] = (1.0 - eps) * acc[a][b] / n + eps * t0[a][b];
                }
            }
            out
        };
        if self.kind != EstimatorKind::Tyler {
            return sum(None);
        }
        // Tyler fixed point M = 2 E[x xᵀ / xᵀM⁻¹x], trace normalized
        let mut m = [[1.0, 0.0], [0.0, 1.0]];
        for _ in 0..300 {
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            let inv = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
            let mut next = sum(Some(&inv));
            let tr = next[0][0] + next[1][1];
            for row in next.iter_mut() {
                for v in row.iter_mut() {
                    *v *= 2.0 / tr;
                }
            }
            let change = (0..2).flat_map(|a| (0..2).map(move |b| (a, b))).map(|(a, b)| (next[a][b] - m[a][b]).abs()).fold(0.0, f64::max);
            m = next;
            if change < 1e-13 {
                break;
            }
        }
        m
    }
}

fn leading_eigvec(m: &[[f64; 2]; 2], reference: &[f64]) -> [f64; 2] {
    let s = SymMatrix::new(Matrix::from_rows(&[m[0], m[1]]).unwrap()).unwrap();
    let v = eigh(&s).unwrap().vector(0);
    let sign = if dot(&v, reference) < 0.0 { -1.0 } else { 1.0 };
    [sign * v[0], sign * v[1]]
}

#[test]
fn criterion_4_influence_functions() {
    let model = EllipticalModel::diagonal(Family::Normal, &[2.0, 1.0]).unwrap();
    let mc = 1_000_000usize;
    let batches = 10usize;
    let eps = 1e-4;
    let probes: [[f64; 2]; 5] = [[1.0, 1.0], [-2.0, 0.5], [0.3, -1.5], [2.5, 2.0], [-0.7, -0.2]];
    let kinds = [
        EstimatorKind::SampleCov,
        EstimatorKind::Scm,
        EstimatorKind::Tyler,
        EstimatorKind::Dcm(DepthKind::Halfspace),
        EstimatorKind::Dcm(DepthKind::Mahalanobis),
        EstimatorKind::Dcm(DepthKind::Projection),
    ];
    let draws = sample_elliptical(&model, mc, SEED).unwrap();
    let e1 = [1.0, 0.0];
    let opts = McOptions::new(mc, SEED ^ 0x5a5a);

    // (a) closed form against the contamination limit
    let mut pass_a = true;
    let mut worst = 0.0f64;
    for kind in kinds {
        let calc = InfluenceCalculator::new(kind, &model, &opts).unwrap();
        for x0 in &probes {
            let closed = calc.eigvec(0, x0).unwrap();
            let diff = |d: &Matrix| -> ([f64; 2], [f64; 2]) {
                let o = ContaminationOracle::new(kind, &model, d.clone(), x0);
                let base = leading_eigvec(&o.functional(x0, 0.0), &e1);
                let g1 = leading_eigvec(&o.functional(x0, eps), &e1);
                let g2 = leading_eigvec(&o.functional(x0, 2.0 * eps), &e1);
                let d1 = [(g1[0] - base[0]) / eps, (g1[1] - base[1]) / eps];
                let d2 = [(g2[0] - base[0]) / (2.0 * eps), (g2[1] - base[1]) / (2.0 * eps)];
                (d1, d2)
            };
            let (numeric, numeric2) = diff(&draws);
            // MC standard error from independent sub-panels
            let per = mc / batches;
            let sub: Vec<[f64; 2]> = (0..batches)
                .map(|b| {
                    let rows: Vec<Vec<f64>> = (b * per..(b + 1) * per).map(|i| draws.row(i).to_vec()).collect();
                    diff(&Matrix::from_rows(&rows).unwrap()).0
                })
                .collect();
            let se = (0..2)
                .map(|c| {
                    let m = sub.iter().map(|v| v[c]).sum::<f64>() / batches as f64;
                    let var = sub.iter().map(|v| (v[c] - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
                    var / batches as f64
                })
                .sum::<f64>()
                .sqrt();
            let curvature = norm(&[numeric2[0] - numeric[0], numeric2[1] - numeric[1]]);
            let err = norm(&[closed[0] - numeric[0], closed[1] - numeric[1]]);
            let tol = 5.0 * (se + curvature);
            worst = worst.max(err / tol);
            if err > tol {
                pass_a = false;
                println!("  {} at {x0:?}: closed {closed:?} numeric {numeric:?} err {err:.2e} tol {tol:.2e}", kind.label());
            }
        }
    }

    // (b) bounded DCM grids, growing covariance grid, on [-10σ, 10σ]². The DCM
    // norm is htped² times an angular factor, so it may still creep up toward
    // the boundary; boundedness is checked against the analytic supremum. The
    // covariance norm is quadratic in the radius: doubling it gives a factor 4.
    let spec = GridSpec::centered(&model, 10.0, 101).unwrap();
    let mut pass_b = true;
    let mut grid_detail = Vec::new();
    for kind in kinds {
        let calc = InfluenceCalculator::new(kind, &model, &McOptions::new(100_000, SEED)).unwrap();
        let grid = influence_grid(&calc, 0, &spec).unwrap();
        let (boundary, interior) = grid.ring_maxima();
        let ok = match kind {
            EstimatorKind::SampleCov => boundary > interior && boundary / interior >= 3.9,
            EstimatorKind::Dcm(_) => boundary <= calc.sup_norm_bound().unwrap(),
            _ => true,
        };
        pass_b &= ok;
        let bound = calc.sup_norm_bound().map_or(String::new(), |b| format!(" (sup {b:.3})"));
        grid_detail.push(format!("{} {:.3}/{:.3}{bound}", kind.label(), boundary, interior));
    }

    // (c) zero influence at the center
    let mut pass_c = true;
    for kind in kinds {
        let calc = InfluenceCalculator::new(kind, &model, &McOptions::new(100_000, SEED)).unwrap();
        pass_c &= norm(&calc.eigvec(0, &model.mu).unwrap()) == 0.0;
    }

    let pass = pass_a && pass_b && pass_c;
    report(
        4,
        pass,
        &format!(
            "(a) worst err/tol {worst:.3}; (b) boundary/interior {}; (c) IF(mu)=0 {pass_c}",
            grid_detail.join(", ")
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 5. Depth and location oracles
// ---------------------------------------------------------------------------

/// Halfspace depth of `x` by counting every closed half-plane whose boundary
/// direction lies strictly between consecutive critical angles.
fn brute_force_halfspace(data: &Matrix, x: &[f64]) -> f64 {
    let n = data.nrows();
    let mut angles = Vec::new();
    for i in 0..n {
        let d = [data[(i, 0)] - x[0], data[(i, 1)] - x[1]];
        if d[0] == 0.0 && d[1] == 0.0 {
            continue;
        }
        let a = d[1].atan2(d[0]);
        angles.push(a + std::f64::consts::FRAC_PI_2);
        angles.push(a - std::f64::consts::FRAC_PI_2);
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut angles: Vec<f64> = angles.into_iter().map(|a| a.rem_euclid(two_pi)).collect();
    angles.sort_by(f64::total_cmp);
    let mut candidates = Vec::new();
    if angles.is_empty() {
        candidates.push(0.0);
    }
    for k in 0..angles.len() {
        let next = if k + 1 < angles.len() { angles[k + 1] } else { angles[0] + two_pi };
        candidates.push(0.5 * (angles[k] + next));
    }
    let mut best = n;
    for t in candidates {
        let u = [t.cos(), t.sin()];
        let count = (0..n).filter(|&i| u[0] * (data[(i, 0)] - x[0]) + u[1] * (data[(i, 1)] - x[1]) >= 0.0).count();
        best = best.min(count);
    }
    best as f64 / n as f64
}

fn spatial_objective(data: &Matrix, m: &[f64]) -> f64 {
    data.rows_iter().map(|r| ((r[0] - m[0]).powi(2) + (r[1] - m[1]).powi(2)).sqrt()).sum()
}

#[test]
fn criterion_5_depth_and_median_oracles() {
    let std2 = EllipticalModel::diagonal(Family::Normal, &[1.0, 1.0]).unwrap();
    let mut mismatches = 0;
    let mut checked = 0;
    for k in 0..100u64 {
        let n = 5 + (k as usize * 7) % 46;
        let mut data = sample_elliptical(&std2, n, SEED + k).unwrap();
        if k % 2 == 1 {
            // coarse grid: ties and collinear triples
            data = data.map_rows(|r| r.iter().map(|v| (v * 2.0).round()).collect());
        }
        let model = DepthModel::fit(DepthKind::Halfspace, &data, k, 0).unwrap();
        let probes = sample_elliptical(&std2, 5, SEED ^ k).unwrap();
        for x in data.rows_iter().chain(probes.rows_iter()) {
            checked += 1;
            if model.depth_at(x).unwrap() != brute_force_halfspace(&data, x) {
                mismatches += 1;
            }
        }
    }

    let cloud = EllipticalModel::new(
        Family::StudentT { df: 3 },
        vec![1.0, -2.0],
        SymMatrix::new(Matrix::from_rows(&[[3.0, 1.2], [1.2, 1.0]]).unwrap()).unwrap(),
    )
    .unwrap();
    let mut worst_gap = f64::NEG_INFINITY;
    for k in 0..20u64 {
        let data = sample_elliptical(&cloud, 30 + 5 * k as usize, SEED + 1000 + k).unwrap();
        let m = spatial_median_default(&data).unwrap();
        let f = spatial_objective(&data, &m.value);
        let (lo, hi) = (0..2).fold(([f64::MAX; 2], [f64::MIN; 2]), |(mut lo, mut hi), j| {
            for v in data.column(j) {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
            (lo, hi)
        });
        let mut grid_best = f64::MAX;
        for a in 0..200 {
            for b in 0..200 {
                let g = [lo[0] + (hi[0] - lo[0]) * a as f64 / 199.0, lo[1] + (hi[1] - lo[1]) * b as f64 / 199.0];
                grid_best = grid_best.min(spatial_objective(&data, &g));
            }
        }
        worst_gap = worst_gap.max(f - grid_best);
    }
    let pass = mismatches == 0 && worst_gap <= 1e-6;
    report(
        5,
        pass,
        &format!("halfspace mismatches {mismatches}/{checked}; worst median-minus-grid objective {worst_gap:.3e}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 6. Estimator properties
// ---------------------------------------------------------------------------

fn random_orthogonal(p: usize, seed: u64) -> Matrix {
    let g = sample_elliptical(&EllipticalModel::diagonal(Family::Normal, &vec![1.0; p]).unwrap(), p, seed).unwrap();
    let mut q: Vec<Vec<f64>> = Vec::new();
    for i in 0..p {
        let mut v = g.row(i).to_vec();
        for u in &q {
            let c = dot(&v, u);
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
        }
        let nv = norm(&v);
        q.push(v.iter().map(|a| a / nv).collect());
    }
    Matrix::from_rows(&q).unwrap()
}

fn rel_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.sub(b).frobenius() / b.frobenius()
}

#[test]
fn criterion_6_estimator_properties() {
    let p = 3;
    let sigma = SymMatrix::new(Matrix::from_rows(&[[4.0, 1.0, 0.5], [1.0, 2.0, 0.3], [0.5, 0.3, 1.0]]).unwrap()).unwrap();
    let model = EllipticalModel::new(Family::StudentT { df: 5 }, vec![0.0; p], sigma).unwrap();
    let mut failures = Vec::new();
    let mut worst = BTreeMap::new();
    let mut track = |name: &str, v: f64, limit: f64| {
        let e = worst.entry(name.to_string()).or_insert(0.0f64);
        *e = e.max(v);
        if !(v <= limit) {
            failures.push(format!("{name}={v:.2e}"));
        }
    };

    for k in 0..5u64 {
        let data = sample_elliptical(&model, 200, SEED + k).unwrap();
        let q = random_orthogonal(p, SEED + 100 + k);
        let rotated = data.matmul(&q.transpose());

        let scm = fit_scatter(EstimatorKind::Scm, &data, Some(vec![0.0; p]), 0).unwrap();
        let scm_r = fit_scatter(EstimatorKind::Scm, &rotated, Some(vec![0.0; p]), 0).unwrap();
        track("scm orthogonal", rel_diff(scm_r.matrix.as_matrix(), scm.matrix.congruence(&q).as_matrix()), 1e-8);

        let pop = DepthModel::population(DepthKind::Mahalanobis, &model).unwrap();
        let rot_model =
            EllipticalModel::new(model.family, vec![0.0; p], model.sigma.congruence(&q)).unwrap();
        let pop_r = DepthModel::population(DepthKind::Mahalanobis, &rot_model).unwrap();
        let dcm_fit = |d: &Matrix, m: DepthModel| {
            let opts = FitOptions { center: Some(vec![0.0; p]), depth_model: Some(m), ..FitOptions::default() };
            fit_scatter_with(EstimatorKind::Dcm(DepthKind::Mahalanobis), d, &opts).unwrap()
        };
        let dcm_a = dcm_fit(&data, pop.clone());
        let dcm_b = dcm_fit(&rotated, pop_r);
        track("dcm orthogonal", rel_diff(dcm_b.matrix.as_matrix(), dcm_a.matrix.congruence(&q).as_matrix()), 1e-8);

        // trace(DCM) = mean htped²
        let h2: f64 = pop.htpeds(&data, Execution::Sequential).unwrap().iter().map(|h| h * h).sum::<f64>() / 200.0;
        track("dcm trace identity", (dcm_a.matrix.trace() - h2).abs(), 1e-12);

        // affine equivariance of Tyler (trace normalized) and the covariance
        let a = Matrix::from_rows(&[[1.0, 0.5, -0.2], [0.0, 2.0, 0.3], [0.4, 0.0, 0.7]]).unwrap();
        let transformed = data.matmul(&a.transpose());
        let ty = fit_scatter(EstimatorKind::Tyler, &data, Some(vec![0.0; p]), 0).unwrap();
        let ty_t = fit_scatter(EstimatorKind::Tyler, &transformed, Some(vec![0.0; p]), 0).unwrap();
        let expect = ty.matrix.congruence(&a);
        let expect = expect.scale(p as f64 / expect.trace());
        track("tyler affine", rel_diff(ty_t.matrix.as_matrix(), expect.as_matrix()), 1e-6);
        track("tyler trace", (ty.matrix.trace() - p as f64).abs(), 1e-8);
        track("tyler residual / p", tyler_residual(&ty, &data).unwrap() / p as f64, 1e-6);
        let cov = fit_scatter(EstimatorKind::SampleCov, &data, None, 0).unwrap();
        let cov_t = fit_scatter(EstimatorKind::SampleCov, &transformed, None, 0).unwrap();
        track("cov affine", rel_diff(cov_t.matrix.as_matrix(), cov.matrix.congruence(&a).as_matrix()), 1e-10);

        for wt in [DepthKind::Halfspace, DepthKind::Projection] {
            let w = fit_scatter(EstimatorKind::DepthWeightedTyler(wt), &data, None, k).unwrap();
            if w.converged {
                track("weighted tyler residual / p", tyler_residual(&w, &data).unwrap() / p as f64, 1e-6);
            }
        }

        for fit in [&scm, &dcm_a, &ty, &cov] {
            let err = fit.decomp.reconstruct().sub(fit.matrix.as_matrix()).frobenius();
            track("eigh reconstruction", err, 1e-10);
        }
    }
    let pass = failures.is_empty();
    let summary: Vec<String> = worst.iter().map(|(k, v)| format!("{k} {v:.1e}")).collect();
    report(6, pass, &format!("{}; failures [{}]", summary.join(", "), failures.join(", ")));
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 7. Shape recovery
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_shape_recovery() {
    let target = [2f64.sqrt(), 0.5f64.sqrt()];
    let model = EllipticalModel::diagonal(Family::Normal, &target).unwrap();
    let ds = lambda_ds_population(&model, DepthKind::Mahalanobis, 100_000, SEED).unwrap();
    let opts = ShapeOptions { mc_n: 100_000, seed: SEED + 1, ..ShapeOptions::default() };
    let shape = recover_shape(&ds.values, Family::Normal, DepthKind::Mahalanobis, &opts).unwrap();
    let err = shape.values.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let pass = shape.converged && err <= 0.02;
    report(
        7,
        pass,
        &format!("recovered {:?} in {} iterations, max error {err:.4}", shape.values, shape.iterations),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 8. Outlier detection on an octane-like dataset
// ---------------------------------------------------------------------------

pub const OCTANE_ROWS: usize = 39;
pub const OCTANE_COLS: usize = 226;
pub const PLANTED: [usize; 6] = [24, 25, 35, 36, 37, 38];

/// 33 rows near a two-dimensional affine plane with small off-plane noise and
/// six rows shifted off the plane along a common third direction.
fn octane_like(seed: u64) -> Matrix {
    let (n, p) = (OCTANE_ROWS, OCTANE_COLS);
    let gauss = EllipticalModel::diagonal(Family::Normal, &vec![1.0; p]).unwrap();
    let basis = random_orthogonal(p, seed);
    let (u1, u2, u3) = (basis.row(0), basis.row(1), basis.row(2));
    let noise = sample_elliptical(&gauss, n, seed + 1).unwrap();
    let level: Vec<f64> = (0..p).map(|j| 1.0 + 0.5 * (j as f64 / p as f64)).collect();
    let frac = |x: f64| x - x.floor();
    let mut rows = Vec::with_capacity(n);
    let mut regular = 0usize;
    for i in 0..n {
        // off-plane noise direction orthogonal to u1, u2, u3, arcsine-spaced norm
        let mut e = noise.row(i).to_vec();
        for u in [u1, u2, u3] {
            let c = dot(&e, u);
            e.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
        }
        let ne = norm(&e);
        let k = (i * 7) % n;
        let radius = 0.3 * (1.0 + 0.2 * (std::f64::consts::PI * (k as f64 + 0.5) / n as f64).cos());
        let (a, b, shift) = if PLANTED.contains(&i) {
            let j = PLANTED.iter().position(|&r| r == i).unwrap() as f64;
            (0.3 * (j / 5.0 - 0.5), 0.2 * (0.5 - j / 5.0), 6.0)
        } else {
            let j = regular as f64;
            regular += 1;
            let r3 = 3f64.sqrt();
            (r3 * (2.0 * frac(0.5 + j * 0.618_034) - 1.0), r3 * (2.0 * frac(0.5 + j * 0.754_878) - 1.0), 0.0)
        };
        let row: Vec<f64> = (0..p)
            .map(|c| level[c] + a * u1[c] + b * u2[c] + shift * u3[c] + radius * e[c] / ne)
            .collect();
        rows.push(row);
    }
    Matrix::from_rows(&rows).unwrap()
}

fn write_matrix_csv(path: &Path, m: &Matrix) {
    let mut s = (1..=m.ncols()).map(|j| format!("w{j}")).collect::<Vec<_>>().join(",");
    s.push('\n');
    for r in m.rows_iter() {
        s.push_str(&r.iter().map(|v| format!("{v:.17e}")).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    std::fs::write(path, s).unwrap();
}

fn flagged_rows(diag_csv: &Path) -> Vec<usize> {
    read_table(diag_csv)
        .iter()
        .filter(|r| r["flag"] != "regular")
        .map(|r| r["index"].parse().unwrap())
        .collect()
}

fn pca_then_diagnose(estimator: &str, input: &Path, root: &Path) -> Vec<usize> {
    let fit_dir = root.join(format!("pca-{estimator}"));
    let diag_dir = root.join(format!("diagnose-{estimator}"));
    run_ok(&[
        "pca",
        "--input",
        s(input),
        "--output-dir",
        s(&fit_dir),
        "--estimator",
        estimator,
        "--k",
        "2",
        "--seed",
        &SEED.to_string(),
    ]);
    run_ok(&[
        "diagnose",
        "--input",
        s(input),
        "--model",
        s(&fit_dir.join("pca_model.json")),
        "--output-dir",
        s(&diag_dir),
    ]);
    let from_pca = flagged_rows(&fit_dir.join("diagnostics.csv"));
    let from_diagnose = flagged_rows(&diag_dir.join("diagnostics.csv"));
    assert_eq!(from_pca, from_diagnose);
    from_diagnose
}

#[test]
fn criterion_8_outlier_detection() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("octane_like.csv");
    write_matrix_csv(&input, &octane_like(SEED));
    let robust = pca_then_diagnose("dcm-projection", &input, dir.path());
    let classical = pca_then_diagnose("cov", &input, dir.path());
    let planted_classical = classical.iter().filter(|i| PLANTED.contains(i)).count();
    let pass = robust == PLANTED.to_vec() && planted_classical < PLANTED.len();
    report(
        8,
        pass,
        &format!("dcm-projection flags {robust:?}; classical flags {classical:?} ({planted_classical} planted)"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 9. Determinism
// ---------------------------------------------------------------------------

fn csv_payloads(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "csv") {
            out.insert(PathBuf::from(path.file_name().unwrap()), std::fs::read(&path).unwrap());
        }
    }
    out
}

#[test]
fn criterion_9_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("octane_like.csv");
    write_matrix_csv(&input, &octane_like(SEED));
    let seed = SEED.to_string();
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("pca", vec!["pca", "--input", s(&input), "--estimator", "dcm-projection", "--seed", &seed]),
        ("depth", vec!["depth", "--input", s(&input), "--depth", "projection", "--seed", &seed]),
        ("are", vec!["are", "--family", "normal,t6", "--mc-n", "100000", "--seed", &seed]),
        ("fse", vec!["simulate-fse", "--sample-sizes", "50,100", "--reps", "100", "--seed", &seed]),
        ("influence", vec!["influence-grid", "--grid-size", "21", "--seed", &seed]),
    ];
    let mut identical = 0;
    let mut differing = Vec::new();
    for (name, args) in &runs {
        let mut payloads = Vec::new();
        for attempt in 0..2 {
            let out = dir.path().join(format!("{name}-{attempt}"));
            let mut full = args.clone();
            full.extend(["--output-dir", s(&out)]);
            run_ok(&full);
            payloads.push(csv_payloads(&out));
        }
        assert!(!payloads[0].is_empty());
        if payloads[0] == payloads[1] {
            identical += 1;
        } else {
            differing.push(*name);
        }
    }
    let pass = differing.is_empty();
    report(9, pass, &format!("{identical}/{} commands byte-identical; differing {differing:?}", runs.len()));
    assert!(pass);
}
