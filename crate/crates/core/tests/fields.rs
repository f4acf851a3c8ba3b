use proptest::prelude::*;
use sqglab::io::{load_field, save_field};
use sqglab::multipliers::biot_savart_velocity;
use sqglab::norms::{sobolev_norm, zygmund_norm};
use sqglab::{DyadicFamily, EnsembleSpec, FieldClass, Grid2D, SpectralField};

fn sample(n: usize, seed: u64, trial: usize) -> SpectralField {
    EnsembleSpec::new(trial + 1, seed, FieldClass::BandLimited)
        .with_band(0.2 * n as f64)
        .sample(Grid2D::periodic(n).unwrap(), trial)
        .unwrap()
}

#[test]
fn field_files_round_trip_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let theta = sample(32, 11, 2);
    let u = biot_savart_velocity(&theta, 0.5).unwrap();
    for (name, f) in [("theta.fld", &theta), ("u.fld", &u)] {
        let path = dir.path().join(name);
        save_field(f, &path).unwrap();
        let back = load_field(&path).unwrap();
        assert_eq!(back.components(), f.components());
        for c in 0..f.components() {
            assert_eq!(back.values(c), f.values(c));
        }
    }
}

#[test]
fn truncated_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.fld");
    save_field(&sample(16, 1, 0), &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
    assert!(load_field(&path).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn norms_are_homogeneous_and_subadditive(seed in 0u64..1000, a in -4.0f64..4.0) {
        let f = sample(32, seed, 0);
        let g = sample(32, seed, 1);
        let family = DyadicFamily::build_partition(*f.grid()).unwrap();
        let zyg = |h: &SpectralField| zygmund_norm(h, 1.5, &family, false).unwrap().value;
        let sob = |h: &SpectralField| sobolev_norm(h, 1.5, false).unwrap().value;
        for norm in [&zyg as &dyn Fn(&SpectralField) -> f64, &sob] {
            let nf = norm(&f);
            prop_assert!((norm(&f.scale(a)) - a.abs() * nf).abs() <= 1e-10 * nf);
            prop_assert!(norm(&f.add(&g)) <= (nf + norm(&g)) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn velocity_is_linear_in_theta(seed in 0u64..1000, a in -3.0f64..3.0, beta in 0.1f64..0.9) {
        let f = sample(32, seed, 0);
        let g = sample(32, seed, 1);
        let lhs = biot_savart_velocity(&f.scale(a).add(&g), beta).unwrap();
        let rhs = biot_savart_velocity(&f, beta).unwrap().scale(a).add(&biot_savart_velocity(&g, beta).unwrap());
        prop_assert!(lhs.sub(&rhs).linf() <= 1e-12 * (1.0 + rhs.linf()));
    }
}
