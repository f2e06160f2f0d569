use cpdtv::io::sidecar_path;
use cpdtv::phantom::phantom_pair;
use cpdtv::*;

fn small_phantom() -> PhantomConfig {
    PhantomConfig { grid: Grid::new(16, 16, 8).unwrap(), ..Default::default() }
}

#[test]
fn magnitude_decays_along_echoes_when_phases_agree() {
    // With a shared off-resonance every overlap adds in phase, so each
    // voxel's magnitude is a sum of decaying exponentials.
    let mut cfg = small_phantom();
    for e in &mut cfg.ellipses {
        e.off_resonance = 0.05;
    }
    let x = generate_phantom::<f64>(&cfg).unwrap();
    let d = x.dims();
    for k in 0..d.t() {
        for j in 1..d.e() {
            for i in 0..d.n() {
                assert!(x.get(i, j, k).norm() <= x.get(i, j - 1, k).norm() * (1.0 + 1e-12));
            }
        }
    }
}

#[test]
fn default_phantom_has_in_and_out_of_phase_overlap() {
    // Fat and liver overlap with different frequencies, so some voxels
    // recover signal at later echoes.
    let x = generate_phantom::<f64>(&small_phantom()).unwrap();
    let d = x.dims();
    let rises = (0..d.n()).any(|i| (1..d.e()).any(|j| x.get(i, j, 0).norm() > x.get(i, j - 1, 0).norm() + 1e-9));
    assert!(rises);
}

#[test]
fn artifact_grows_with_acceleration() {
    let base = PhantomConfig { echoes: 2, states: 2, ..small_phantom() };
    let truth = generate_phantom::<f64>(&base).unwrap();
    let mean_error = |accel: f64| {
        (0..10u64)
            .map(|seed| {
                let y = inject_undersampling(&truth, base.grid, accel, seed).unwrap();
                nrmse(&y, &truth).unwrap()
            })
            .sum::<f64>()
            / 10.0
    };
    let errors: Vec<f64> = [1.5, 3.0, 6.0, 9.0].into_iter().map(mean_error).collect();
    assert!(errors[0] > 0.0);
    assert!(errors.windows(2).all(|w| w[0] < w[1]), "{errors:?}");
}

#[test]
fn phantom_pair_is_deterministic() {
    let cfg = PhantomConfig { echoes: 3, states: 2, ..small_phantom() };
    let (y1, t1) = phantom_pair::<f64>(&cfg).unwrap();
    let (y2, t2) = phantom_pair::<f64>(&cfg).unwrap();
    assert_eq!(y1.data(), y2.data());
    assert_eq!(t1.data(), t2.data());
    let other = phantom_pair::<f64>(&PhantomConfig { seed: 1, ..cfg }).unwrap().0;
    assert_ne!(y1.data(), other.data());
}

#[test]
fn single_precision_phantom_tracks_double() {
    let cfg = PhantomConfig { echoes: 2, states: 2, ..small_phantom() };
    let (y64, _) = phantom_pair::<f64>(&cfg).unwrap();
    let (y32, _) = phantom_pair::<f32>(&cfg).unwrap();
    let widened: Tensor3 = y32.cast().unwrap();
    assert!(nrmse(&widened, &y64).unwrap() < 1e-5);
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PhantomConfig { echoes: 2, states: 3, ..small_phantom() };
    let (y, _) = phantom_pair::<f64>(&cfg).unwrap();
    let path = dir.path().join("y.ct3");
    write_ct3(&y, &path).unwrap();
    let back: Tensor3f32 = read_ct3(&path).unwrap();
    let again = dir.path().join("again.ct3");
    write_ct3(&back, &again).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    assert!(nrmse(&back.cast::<f64>().unwrap(), &y).unwrap() < 1e-6);

    let meta = Sidecar { grid: cfg.grid, te_first: cfg.te_first, delta_te: cfg.delta_te, acceleration: 6.0, seed: 9 };
    write_sidecar(&meta, &path).unwrap();
    assert!(sidecar_path(&path).exists());
    assert_eq!(read_sidecar(&path).unwrap(), meta);

    let pgm = dir.path().join("slice.pgm");
    export_slice(&y, cfg.grid, 1, 2, &pgm, Window::Auto).unwrap();
    let bytes = std::fs::read(&pgm).unwrap();
    let header = b"P5\n16 16\n65535\n";
    assert!(bytes.starts_with(header));
    assert_eq!(bytes.len(), header.len() + 2 * 16 * 16);
}

#[test]
fn corrupt_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.ct3");
    std::fs::write(&path, b"CT3\0junk").unwrap();
    assert!(matches!(read_ct3::<f64>(&path), Err(Error::Format { .. })));
    let missing = dir.path().join("missing.ct3");
    assert!(matches!(read_ct3::<f64>(&missing), Err(Error::Io { .. })));
}

#[test]
fn sweep_covers_every_pair() {
    let cfg = PhantomConfig { grid: Grid::new(8, 8, 4).unwrap(), echoes: 3, states: 3, acceleration: 2.0, ..Default::default() };
    let (y, truth) = phantom_pair::<f64>(&cfg).unwrap();
    let base = Config { max_outer_iters: 20, ..Default::default() };
    let sweep = rank_sweep(&y, &truth, &[1, 2], &[(0.0, 0.0), (0.01, 0.02)], &base).unwrap();
    let keys: Vec<(usize, f64, f64)> = sweep.rows.iter().map(|r| (r.rank, r.lambda_e, r.lambda_t)).collect();
    assert_eq!(keys, vec![(1, 0.0, 0.0), (1, 0.01, 0.02), (2, 0.0, 0.0), (2, 0.01, 0.02)]);
    let input = nrmse(&y, &truth).unwrap();
    for row in &sweep.rows {
        assert!(row.is_ok());
        assert_eq!(row.nrmse_input, input);
        assert!(row.nrmse_output.is_finite() && row.iterations >= 1);
    }
    assert_eq!(sweep.to_csv().lines().count(), 5);
    assert!(sweep.best().is_some());
}

#[test]
fn regularized_solve_descends_on_a_phantom() {
    let cfg = PhantomConfig { grid: Grid::new(8, 8, 4).unwrap(), echoes: 4, states: 4, ..Default::default() };
    let (y, _) = phantom_pair::<f64>(&cfg).unwrap();
    let solve = Config { rank: 4, lambda_e: 0.05, lambda_t: 0.05, max_outer_iters: 60, ..Default::default() };
    let d = solve_cpdtv(&y, &solve).unwrap().diagnostics;
    assert!(d.objective_trace[0] <= d.initial_objective);
    assert!(d.objective_trace.windows(2).all(|w| w[1] <= w[0]));
}
