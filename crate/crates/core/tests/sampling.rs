use wignerlab::eigensolver::{eigh, eigvalsh};
use wignerlab::ensembles::{derive_seed, sample_gue, sample_wigner, DistributionSpec, EntryRole, SeedSpec};

#[test]
fn wigner_spectrum_stays_near_the_support() {
    let off = DistributionSpec::gaussian(EntryRole::OffDiagonal);
    let diag = DistributionSpec::gaussian(EntryRole::Diagonal);
    let master = derive_seed(11, 256);
    let inside = (0..100u64)
        .filter(|&k| {
            let h = sample_wigner(256, &off, &diag, SeedSpec::new(master, k)).unwrap();
            eigvalsh(&h).unwrap().eigenvalues().iter().all(|mu| mu.abs() <= 2.5)
        })
        .count();
    assert!(inside as f64 / 100.0 >= 0.99, "{inside}/100");
}

#[test]
fn gue_pairs_repel() {
    let master = derive_seed(12, 2);
    let samples = 100_000u64;
    let close = (0..samples)
        .filter(|&k| {
            let mu = eigvalsh(&sample_gue(2, SeedSpec::new(master, k)).unwrap()).unwrap().into_eigenvalues();
            (mu[1] - mu[0]).abs() < 0.01
        })
        .count();
    assert!(close as f64 / samples as f64 <= 0.001, "{close} close pairs");
}

#[test]
fn eigenvalue_identities_on_random_matrices() {
    for (k, n) in [1usize, 2, 5, 17, 64, 130].into_iter().enumerate() {
        let h = sample_gue(n, SeedSpec::new(derive_seed(13, n as u64), k as u64)).unwrap();
        let full = eigh(&h).unwrap();
        let vals = eigvalsh(&h).unwrap();
        for (a, b) in full.eigenvalues().iter().zip(vals.eigenvalues()) {
            assert!((a - b).abs() <= 1e-11, "n={n}: {a} vs {b}");
        }
        let tol = 1e-10 * n as f64;
        let sum: f64 = vals.eigenvalues().iter().sum();
        let sum_sq: f64 = vals.eigenvalues().iter().map(|m| m * m).sum();
        assert!((sum - h.trace()).abs() <= tol);
        assert!((sum_sq - h.frobenius_norm().powi(2)).abs() <= tol);
    }
}
