//! Acceptance suite: one PASS/FAIL line per criterion, with measured values
//! and wall time. Exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::Rng;
use wignerlab::diagnostics::{
    check_chains, coefficients, direct_resolvent_entry, good_event, overlaps, schur_resolvent_entry, select_indices,
};
use wignerlab::eigensolver::{eigh, eigvalsh};
use wignerlab::ensembles::{derive_seed, regularity_integrals, sample_gue, DistributionSpec, EntryRole, SeedSpec};
use wignerlab::harness::{ExperimentKind, ExperimentResult, ExperimentSpec, ResultRow, Runner, Scale};
use wignerlab::output::to_csv_string;
use wignerlab::spectral::{counting, m_sc, rho_sc, ComplexPoint};
use wignerlab::{Complex64, HermitianMatrix};

const SEED: u64 = 20_240_917;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: String) -> Self {
        Self { passed, detail }
    }
}

fn gue(n: usize, k: u64) -> HermitianMatrix {
    sample_gue(n, SeedSpec::new(derive_seed(SEED, n as u64), k)).expect("sampling")
}

fn runner() -> Runner {
    Runner::new(None).expect("worker pool")
}

fn row<'a>(result: &'a ExperimentResult, n: usize, energy: f64, series: &str) -> &'a ResultRow {
    result
        .rows
        .iter()
        .find(|r| r.n == n && r.energy == energy && r.series == series)
        .unwrap_or_else(|| panic!("no row n={n} E={energy} series={series}"))
}

/// Semicircle density written out independently of the library.
fn semicircle(e: f64) -> f64 {
    if e.abs() >= 2.0 {
        0.0
    } else {
        (4.0 - e * e).sqrt() / (2.0 * PI)
    }
}

/// Composite Simpson rule with `m` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let inner: f64 = (1..m).map(|k| f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

fn criterion_1() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..=3800 {
        let e = -1.9 + 0.001 * i as f64;
        let m = m_sc(ComplexPoint::new(e, 1e-9)).expect("m_sc");
        worst = worst.max((PI * rho_sc(e) - m.im).abs());
    }
    // The substitution E = 2 sin(t) removes the endpoint singularities.
    let mass = simpson(|t| rho_sc(2.0 * t.sin()) * 2.0 * t.cos(), -PI / 2.0, PI / 2.0, 2000);
    let oracle =
        (0..=100).map(|i| -1.9 + 0.038 * i as f64).map(|e| (rho_sc(e) - semicircle(e)).abs()).fold(0.0, f64::max);
    Outcome::new(
        worst <= 1e-6 && (mass - 1.0).abs() <= 1e-8 && oracle <= 1e-15,
        format!("max |pi rho - Im m| = {worst:.2e} (tol 1e-6), |mass - 1| = {:.2e} (tol 1e-8)", (mass - 1.0).abs()),
    )
}

fn criterion_2() -> Outcome {
    let (mut recon, mut orth, mut interlace) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..50u64 {
        let n = 2 + (254 * k as usize) / 49;
        let h = gue(n, 1000 + k);
        let s = eigh(&h).expect("eigh");
        let mu = s.eigenvalues();
        let u: Vec<&[Complex64]> = (0..n).map(|a| s.eigenvector(a).expect("eigenvectors")).collect();
        let mut err = 0.0;
        for r in 0..n {
            for c in 0..n {
                let v: Complex64 = (0..n).map(|a| u[a][r] * mu[a] * u[a][c].conj()).sum();
                err += (h.get(r, c) - v).norm_sqr();
            }
        }
        recon = recon.max(err.sqrt() / h.frobenius_norm());
        for i in 0..n {
            for j in i..n {
                let dot: Complex64 = u[i].iter().zip(u[j]).map(|(a, b)| a.conj() * b).sum();
                orth = orth.max((dot - if i == j { 1.0 } else { 0.0 }).norm());
            }
        }
        let j = (k as usize * 7) % n;
        let lambda = eigvalsh(&h.minor(j).expect("minor")).expect("eigvalsh").into_eigenvalues();
        for (a, &l) in lambda.iter().enumerate() {
            interlace = interlace.max(mu[a] - l).max(l - mu[a + 1]);
        }
    }
    Outcome::new(
        recon <= 1e-9 && orth <= 1e-10 && interlace <= 1e-10,
        format!("reconstruction {recon:.2e} (tol 1e-9), orthogonality {orth:.2e} (tol 1e-10), interlacing {interlace:.2e} (tol 1e-10)"),
    )
}

fn criterion_3() -> Outcome {
    let (mut parseval, mut schur) = (0.0f64, 0.0f64);
    for k in 0..100u64 {
        let n = 2 + (k as usize * 13) % 120;
        let h = gue(n, 2000 + k);
        let j = (k as usize * 31) % n;
        let ov = overlaps(&h, j).expect("overlaps");
        let total: f64 = ov.xi.iter().sum();
        let norm2: f64 = (0..n).filter(|&c| c != j).map(|c| h.get(j, c).norm_sqr()).sum();
        parseval = parseval.max((total - n as f64 * norm2).abs() / (n as f64 * norm2));
        let z = ComplexPoint::new(-1.8 + 0.036 * k as f64, 10f64.powf(-3.0 + 0.04 * k as f64));
        let direct = direct_resolvent_entry(&h, j, z).expect("direct solve");
        schur = schur.max((schur_resolvent_entry(h.get(j, j).re, &ov, z, n) - direct).norm());
    }
    Outcome::new(
        parseval <= 1e-10 && schur <= 1e-9,
        format!("Parseval relative {parseval:.2e} (tol 1e-10), Schur residual {schur:.2e} (tol 1e-9) over 100 cases"),
    )
}

/// Independent chain check: greedy selection and the two chains from raw formulas.
fn chains_hold_directly(lambda: &[f64], e: f64, eps: f64, n: usize) -> bool {
    let nf = n as f64;
    let mut order: Vec<usize> = (0..lambda.len()).collect();
    order.sort_by(|&a, &b| (lambda[a] - e).abs().total_cmp(&(lambda[b] - e).abs()).then(a.cmp(&b)));
    let beta0 = order[0];
    let picked: Vec<f64> = order
        .iter()
        .copied()
        .filter(|&a| a != beta0 && nf * (lambda[a] - e).abs() >= eps)
        .take(8)
        .map(|a| nf * (lambda[a] - e))
        .collect();
    if picked.len() < 8 {
        return false;
    }
    let delta = picked[7].abs();
    let d: Vec<f64> = picked.iter().map(|&x| (x / (x * x + eps * eps)).abs()).collect();
    let c: Vec<f64> = picked.iter().map(|&x| eps / (x * x + eps * eps)).collect();
    let slack = 1.0 + 1e-14;
    let chain = |v: &[f64], floor: f64| {
        floor <= v[7] * slack && v.windows(2).all(|w| w[1] <= w[0] * slack) && v[0] <= slack / eps
    };
    chain(&d, 1.0 / (2.0 * delta)) && chain(&c, eps / (2.0 * delta * delta))
}

fn criterion_4() -> Outcome {
    let n = 64;
    let mut state = SeedSpec::new(SEED, 4).rng();
    let (mut checked, mut held, mut agree, mut k) = (0usize, 0usize, 0usize, 0u64);
    let mut worst_fd = 0.0f64;
    while checked < 1000 {
        let h = gue(n, 3000 + k);
        k += 1;
        let lambda = eigvalsh(&h.minor(0).expect("minor")).expect("eigvalsh").into_eigenvalues();
        let e: f64 = state.random_range(-1.5..1.5);
        let eps: f64 = state.random_range(0.1..3.0);
        if !good_event(&lambda, e, eps, n) {
            continue;
        }
        checked += 1;
        let coeffs = coefficients(&lambda, e, eps, n).expect("coefficients");
        let sel = select_indices(&lambda, e, eps, n).expect("selection");
        let direct = chains_hold_directly(&lambda, e, eps, n);
        held += usize::from(check_chains(&coeffs, &sel, eps).holds());
        agree += usize::from(direct);
        // Fourth-order central differences in E.
        let h = 1e-4 / n as f64;
        let at = |de: f64| coefficients(&lambda, e + de, eps, n).expect("coefficients");
        let (p2, p1, m1, m2) = (at(2.0 * h), at(h), at(-h), at(-2.0 * h));
        for a in 0..lambda.len() {
            let fd = |f: fn(&wignerlab::diagnostics::Coefficients) -> &Vec<f64>| {
                (-f(&p2)[a] + 8.0 * f(&p1)[a] - 8.0 * f(&m1)[a] + f(&m2)[a]) / (12.0 * h)
            };
            let fc = fd(|c| &c.c);
            let fdd = fd(|c| &c.d);
            worst_fd = worst_fd
                .max((fc - coeffs.c_prime[a]).abs() / coeffs.c_prime[a].abs())
                .max((fdd - coeffs.d_prime[a]).abs() / coeffs.d_prime[a].abs());
        }
    }
    Outcome::new(
        held == checked && agree == checked && worst_fd <= 1e-4,
        format!("chains held on {held}/{checked} good events (direct recomputation {agree}/{checked}), derivative relative error {worst_fd:.2e} (tol 1e-4)"),
    )
}

fn criterion_5() -> Outcome {
    let n = 512;
    let reference = simpson(semicircle, -0.5, 0.5, 2000);
    let s = eigvalsh(&gue(n, 5000)).expect("eigvalsh");
    let estimate = counting(&s, -0.5, 0.5).expect("counting") as f64 / n as f64;
    let rel = (estimate / reference - 1.0).abs();
    Outcome::new(
        (reference - 0.3150).abs() < 5e-5 && rel <= 0.05,
        format!("N[-0.5,0.5]/N = {estimate:.4}, quadrature reference {reference:.4}, relative deviation {rel:.3} (tol 0.05)"),
    )
}

fn criterion_6() -> Outcome {
    let spec = ExperimentSpec::new(ExperimentKind::Dos, &[128], 2000, SEED).with_eta(&[Scale::OverN(2.0)]);
    let result = runner().run(&spec).expect("dos");
    let r = row(&result, 128, 0.0, "dos");
    let rel = (r.mean * PI - 1.0).abs();
    Outcome::new(
        rel <= 0.10,
        format!(
            "DOS = {:.4} +- {:.4}, 1/pi = {:.4}, relative deviation {rel:.3} (tol 0.10)",
            r.mean,
            r.stderr,
            1.0 / PI
        ),
    )
}

fn criterion_7() -> Outcome {
    let spec = ExperimentSpec::new(ExperimentKind::ImStieltjes, &[128], 4000, SEED)
        .with_energy(&[0.0, 1.0])
        .with_eta(&[Scale::OverN(0.1)]);
    let result = runner().run(&spec).expect("im_stieltjes");
    let mut ok = true;
    let mut parts = Vec::new();
    for (e, target) in [(0.0, 1.0), (1.0, 3f64.sqrt() / 2.0)] {
        let r = row(&result, 128, e, "im_stieltjes");
        let rel = (r.mean / target - 1.0).abs();
        ok &= rel <= 0.15;
        parts.push(format!("E={e}: {:.4} +- {:.4} vs {target:.4} (rel {rel:.3})", r.mean, r.stderr));
    }
    Outcome::new(ok, format!("{} (tol 0.15)", parts.join(", ")))
}

fn criterion_8() -> Outcome {
    let spec = ExperimentSpec::new(ExperimentKind::Wegner, &[128], 5000, SEED).with_eta(&[
        Scale::OverN(1.0),
        Scale::OverN(0.1),
        Scale::OverN(0.01),
    ]);
    let result = runner().run(&spec).expect("wegner");
    let ratios: Vec<f64> =
        result.rows.iter().filter(|r| r.series == "count_sq").map(|r| r.mean / (r.n as f64 * r.eta)).collect();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    Outcome::new(
        ratios.len() == 3 && lo > 0.0 && hi / lo <= 3.0,
        format!("E N^2/(N eta) = {ratios:.4?}, max/min = {:.3} (tol 3)", hi / lo),
    )
}

fn criterion_9() -> Outcome {
    let sizes = [64, 128, 256];
    let mut spec = ExperimentSpec::new(ExperimentKind::Derivative, &sizes, 3000, SEED).with_eta(&[Scale::OverN(0.5)]);
    spec.extra.delta_e = Some(Scale::OverN(0.1));
    let result = runner().run(&spec).expect("derivative");
    let mut bounds = Vec::new();
    let mut symmetric = true;
    let mut parts = Vec::new();
    for n in sizes {
        let r = row(&result, n, 0.0, "derivative");
        symmetric &= r.mean.abs() <= 2.0 * r.stderr;
        // At E = 0 the estimate is pure noise, so the constant is bounded by mean + 2 stderr.
        bounds.push((r.mean.abs() + 2.0 * r.stderr) / n as f64);
        parts.push(format!("N={n}: {:.3} +- {:.3}", r.mean, r.stderr));
    }
    let (lo, hi) = bounds.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &b| (lo.min(b), hi.max(b)));
    Outcome::new(
        symmetric && hi / lo <= 2.0,
        format!(
            "{}; (|mean| + 2 stderr)/N = {bounds:.4?}, max/min = {:.3} (tol 2); all within 2 stderr of 0: {symmetric}",
            parts.join(", "),
            hi / lo
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut spec = ExperimentSpec::new(ExperimentKind::Spacing, &[256], 200, SEED);
    spec.extra.bulk_fraction = Some(0.5);
    let result = runner().run(&spec).expect("spacing");
    let ks = result.rows.iter().find(|r| r.series == "ks_surmise").expect("ks row");
    Outcome::new(ks.mean <= 0.03, format!("KS distance {:.4} over {} spacings (tol 0.03)", ks.mean, ks.samples))
}

fn criterion_11() -> Outcome {
    let deltas = [0.5, 0.1, 0.02];
    let mut spec = ExperimentSpec::new(ExperimentKind::DeltaMoments, &[128], 10_000, SEED);
    spec.extra.moments = vec![0];
    spec.extra.deltas = deltas.to_vec();
    spec.extra.eps = Some(1.0);
    let result = runner().run(&spec).expect("delta_moments");
    let ratios: Vec<f64> = deltas.iter().map(|d| row(&result, 128, 0.0, &format!("p_beta0({d})")).mean / d).collect();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    Outcome::new(lo > 0.0 && hi / lo <= 2.0, format!("P/delta = {ratios:.4?}, max/min = {:.3} (tol 2)", hi / lo))
}

fn criterion_12() -> Outcome {
    let r = regularity_integrals(&DistributionSpec::gaussian(EntryRole::OffDiagonal)).expect("regularity");
    let errs = [(r.i6 / 120.0 - 1.0).abs(), (r.i4 / 12.0 - 1.0).abs(), (r.i2pp / 8.0 - 1.0).abs()];
    Outcome::new(
        errs.iter().all(|&e| e <= 1e-4),
        format!(
            "I6 = {:.6}, I4 = {:.6}, I2pp = {:.6}, relative errors {:.1e}, {:.1e}, {:.1e} (tol 1e-4)",
            r.i6, r.i4, r.i2pp, errs[0], errs[1], errs[2]
        ),
    )
}

fn criterion_13() -> Outcome {
    let mut specs = vec![
        ExperimentSpec::new(ExperimentKind::Dos, &[32, 64], 300, SEED).with_energy(&[-1.0, 0.0, 0.7]).with_eta(&[
            Scale::Absolute(0.5),
            Scale::OverN(4.0),
            Scale::OverN(0.5),
            Scale::OverN(0.05),
        ]),
        ExperimentSpec::new(ExperimentKind::ImStieltjes, &[48], 300, SEED + 1).with_eta(&[Scale::OverN(0.1)]),
        ExperimentSpec::new(ExperimentKind::DeltaMoments, &[40], 200, SEED + 2),
        ExperimentSpec::new(ExperimentKind::Spacing, &[64], 50, SEED + 3),
    ];
    let mut d =
        ExperimentSpec::new(ExperimentKind::Derivative, &[32, 64], 200, SEED + 4).with_eta(&[Scale::OverN(0.5)]);
    d.extra.delta_e = Some(Scale::OverN(0.1));
    specs.push(d);
    let (one, eight) = (Runner::new(Some(1)).expect("pool"), Runner::new(Some(8)).expect("pool"));
    let mut identical = 0;
    for spec in &specs {
        let a = to_csv_string(&one.run(spec).expect("run").rows).expect("csv");
        let b = to_csv_string(&eight.run(spec).expect("run").rows).expect("csv");
        identical += usize::from(a == b);
    }
    Outcome::new(
        identical == specs.len(),
        format!("{identical}/{} experiments byte-identical with 1 and 8 workers", specs.len()),
    )
}

/// Name, time limit and check.
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 13] = [
        ("semicircle identity and mass", Duration::from_secs(1), criterion_1),
        ("eigensolver reconstruction, orthogonality, interlacing", Duration::from_secs(30), criterion_2),
        ("Parseval and Schur resolvent identities", Duration::from_secs(10), criterion_3),
        ("coefficient chains and derivatives", Duration::from_secs(10), criterion_4),
        ("macroscopic semicircle, single sample N=512", Duration::from_secs(10), criterion_5),
        ("microscopic averaged DOS, N=128, eta=2/N", Duration::from_secs(300), criterion_6),
        ("expected Im m_N at eta=0.1/N", Duration::from_secs(600), criterion_7),
        ("Wegner boundedness", Duration::from_secs(600), criterion_8),
        ("derivative constant across N", Duration::from_secs(900), criterion_9),
        ("unfolded spacings vs GUE surmise", Duration::from_secs(300), criterion_10),
        ("nearest-eigenvalue probability linear in delta", Duration::from_secs(600), criterion_11),
        ("regularity integrals, Gaussian", Duration::from_secs(1), criterion_12),
        ("determinism across worker counts", Duration::from_secs(600), criterion_13),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let passed = outcome.passed && in_time;
        failed += usize::from(!passed);
        println!(
            "{} criterion {:>2}: {name}: {} [{:.2} s, limit {} s{}]",
            if passed { "PASS" } else { "FAIL" },
            i + 1,
            outcome.detail,
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", over time" }
        );
    }
    println!("13 criteria, {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
