//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its headline numbers. Run with `cargo test --test acceptance -- --nocapture`
//! to see the lines.

mod common;

use std::time::Instant;

use common::*;
use evshift_core::codec::{write_events, EventFormat};
use evshift_core::datasets::ReprChoice;
use evshift_core::diag::{run_diag, DiagConfig};
use evshift_core::metrics::{
    entropy, mmd2, relative_rotation_label, FeatureMatrix, KernelSpec, PoolMode, ProbMatrix,
};
use evshift_core::repr::{
    est, group_views, hats, rotate, ungroup_views, voxel_grid, EstKernel, HatsConfig, Rotation,
};
use evshift_core::simulator::{
    saccade_frames, simulate, FrameSequence, SaccadePattern, SimulatorConfig, ThresholdMode,
};
use evshift_core::Tensor;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pass(id: u32, name: &str, detail: String) {
    println!("acceptance {id:02} {name}: PASS ({detail})");
}

#[test]
fn criterion_01_voxel_oracle_equivalence() {
    let start = Instant::now();
    let mut r = rng(101);
    let mut max_err = 0.0f64;
    for case in 0..200 {
        let s = random_stream(&mut r, 8, 8, 20, if case % 7 == 0 { 3 } else { 2_000 });
        let bins = r.random_range(1..=9);
        let got = voxel_grid(&s, bins).unwrap();
        let want = voxel_oracle(&s, bins);
        assert_eq!(got.data().len(), want.len());
        for (g, w) in got.data().iter().zip(&want) {
            let err = (g - w).abs();
            max_err = max_err.max(err);
            assert!(err <= 1e-12, "case {case}: |{g} - {w}| = {err}");
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}, budget 5 s");
    pass(1, "voxel-oracle", format!("200 streams, max|err| = {max_err:.2e}, {elapsed:?}"));
}

#[test]
fn criterion_02_voxel_mass_conservation() {
    let mut r = rng(202);
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let s = random_interior_stream(&mut r, 10, 9, 50, 5_000);
        let bins = r.random_range(1..=9);
        let g = voxel_grid(&s, bins).unwrap();
        let mass: f64 = g.data().iter().sum();
        let polarity: f64 = s.events.iter().map(|e| e.p as f64).sum();
        let rel = (mass - polarity).abs() / polarity.abs().max(1.0);
        worst = worst.max(rel);
        assert!(rel <= 1e-6, "case {case}: mass {mass} vs polarity sum {polarity}");
    }
    pass(2, "voxel-mass", format!("1000 streams, worst relative error {worst:.2e}"));
}

#[test]
fn criterion_03_est_hats_oracle_equivalence() {
    let start = Instant::now();
    let mut r = rng(303);
    let mut max_err = 0.0f64;
    for case in 0..100 {
        let mut s = random_stream(&mut r, 12, 10, 10, 4_000);
        // EST needs a nonzero last timestamp.
        if s.t_max().unwrap() == 0 {
            s.events.last_mut().unwrap().t = 1;
        }
        let bins = r.random_range(2..=6);
        let kernel = match case % 3 {
            0 => EstKernel::Trilinear,
            1 => EstKernel::Exponential { alpha: r.random_range(0.5..4.0) },
            _ => EstKernel::Table { samples: vec![0.0, 0.4, 1.0, 0.4, 0.0] },
        };
        let got = est(&s, bins, &kernel).unwrap();
        for (g, w) in got.data().iter().zip(&est_oracle(&s, bins, &kernel)) {
            let err = (g - w).abs();
            max_err = max_err.max(err);
            assert!(err <= 1e-9, "EST case {case}: err {err}");
        }

        let cfg = HatsConfig {
            cell_size: 5,
            rho: 2,
            tau_us: r.random_range(500.0..20_000.0),
            delta_t_us: if case % 2 == 0 { f64::INFINITY } else { r.random_range(500.0..3_000.0) },
        };
        let got = hats(&s, &cfg).unwrap();
        for (g, w) in got.data().iter().zip(&hats_oracle(&s, &cfg)) {
            let err = (g - w).abs();
            max_err = max_err.max(err);
            assert!(err <= 1e-9, "HATS case {case}: err {err}");
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}, budget 10 s");
    pass(3, "est-hats-oracle", format!("100 streams, max|err| = {max_err:.2e}, {elapsed:?}"));
}

#[test]
fn criterion_04_simulator_ramp_law() {
    let mut r = rng(404);
    let log_eps = 1e-3f64;
    let duration = 1_000_000u64;
    for case in 0..50 {
        let c = if case % 2 == 0 { 0.06 } else { 0.15 };
        let m = r.random_range(0..30) as u64;
        let rise = (m as f64 + r.random_range(0.05..0.95)) * c;
        let l0 = log_eps.ln() + 0.02;
        let i0 = l0.exp() - log_eps;
        let i1 = (l0 + rise).exp() - log_eps;
        assert!(i1 <= 1.0, "rise {rise} leaves intensity range");
        let frames =
            FrameSequence::new(1, 1, vec![0, duration], vec![vec![i0], vec![i1]]).unwrap();
        let cfg =
            SimulatorConfig { threshold_mode: ThresholdMode::Fixed(c), ..Default::default() };
        let s = simulate(&frames, &cfg).unwrap();
        assert_eq!(s.len() as u64, m, "case {case}: rise {rise}, C {c}");
        assert!(s.events.iter().all(|e| e.p == 1));
        for (k, e) in s.events.iter().enumerate() {
            let analytic = (k + 1) as f64 * c / rise * duration as f64;
            assert!(
                (e.t as f64 - analytic).abs() <= 1.0,
                "case {case} event {k}: {} vs analytic {analytic}",
                e.t
            );
        }
    }
    pass(4, "ramp-law", "50 (rise, C) pairs, counts exact, timestamps within 1 us".into());
}

#[test]
fn criterion_05_simulator_monotonicity() {
    let mut r = rng(505);
    let thresholds = [0.05, 0.06, 0.15, 0.5];
    let refractories = [0u64, 1_000, 10_000];
    for case in 0..20 {
        let img = synthetic_image(&mut r, 24, 24);
        let pattern = SaccadePattern::new(
            vec![
                (r.random_range(2.0..5.0), r.random_range(1.0..4.0)),
                (r.random_range(-5.0..-2.0), r.random_range(1.0..3.0)),
                (r.random_range(-2.0..2.0), r.random_range(-6.0..-3.0)),
            ],
            5,
        )
        .unwrap();
        let frames = saccade_frames(&img, &pattern, (32, 32), 8_000).unwrap();
        let count = |c: f64, refractory_us: u64| {
            let cfg = SimulatorConfig {
                threshold_mode: ThresholdMode::Fixed(c),
                refractory_us,
                seed: case,
                ..Default::default()
            };
            simulate(&frames, &cfg).unwrap().len()
        };
        let counts: Vec<Vec<usize>> = refractories
            .iter()
            .map(|&rf| thresholds.iter().map(|&c| count(c, rf)).collect())
            .collect();
        for (ri, row) in counts.iter().enumerate() {
            for w in row.windows(2) {
                assert!(
                    w[0] >= w[1],
                    "case {case}: count increased in C at refractory {}: {row:?}",
                    refractories[ri]
                );
            }
        }
        for ci in 0..thresholds.len() {
            for ri in 0..refractories.len() - 1 {
                assert!(
                    counts[ri][ci] >= counts[ri + 1][ci],
                    "case {case}: count increased in refractory at C {}: {:?}",
                    thresholds[ci],
                    counts.iter().map(|row| row[ci]).collect::<Vec<_>>()
                );
            }
        }
    }
    pass(5, "monotonicity", "20 inputs x 4 thresholds x 3 refractories, zero violations".into());
}

#[test]
fn criterion_06_mmd_closed_form_and_oracle() {
    // Two-singleton closed form.
    let s = FeatureMatrix::from_rows(&[vec![0.0]]).unwrap();
    let t = FeatureMatrix::from_rows(&[vec![2.0]]).unwrap();
    let got = mmd2(&s, &t, &KernelSpec::Bandwidths(vec![1.0])).unwrap();
    let want = 2.0 - 2.0 * (-2.0f64).exp();
    assert!((got - want).abs() <= 1e-12, "{got} vs {want}");

    // mmd2(X, X) vanishes for random matrices under the default kernel.
    let mut r = rng(606);
    for _ in 0..100 {
        let n = r.random_range(1..10);
        let d = r.random_range(1..8);
        let x = FeatureMatrix::new(
            n,
            d,
            (0..n * d).map(|_| r.random_range(-5.0..5.0)).collect(),
        )
        .unwrap();
        let v = mmd2(&x, &x, &KernelSpec::default()).unwrap();
        assert!(v.abs() <= 1e-9, "mmd2(X,X) = {v}");
    }

    // Brute-force equivalence for small sample counts.
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let ns = r.random_range(1..=6);
        let nt = r.random_range(1..=6);
        let d = r.random_range(1..5);
        let s = FeatureMatrix::new(
            ns,
            d,
            (0..ns * d).map(|_| r.random_range(-3.0..3.0)).collect(),
        )
        .unwrap();
        let t = FeatureMatrix::new(
            nt,
            d,
            (0..nt * d).map(|_| r.random_range(-3.0..3.0)).collect(),
        )
        .unwrap();
        let sigmas = vec![r.random_range(0.3..1.0), r.random_range(1.0..4.0)];
        let got = mmd2(&s, &t, &KernelSpec::Bandwidths(sigmas.clone())).unwrap();
        let want = mmd2_oracle(&s, &t, &sigmas);
        let err = (got - want).abs();
        worst = worst.max(err);
        assert!(err <= 1e-12, "{got} vs oracle {want}");
    }
    pass(6, "mmd-closed-form", format!("singleton exact, 100 self-tests, oracle err <= {worst:.2e}"));
}

#[test]
fn criterion_07_entropy_endpoints() {
    for k in [2usize, 4, 51, 101] {
        let mut one_hot = vec![0.0; 3 * k];
        for row in 0..3 {
            one_hot[row * k + row % k] = 1.0;
        }
        let p = ProbMatrix::new(3, k, one_hot).unwrap();
        assert_eq!(entropy(&p), 0.0, "one-hot K={k}");

        let uniform = ProbMatrix::new(2, k, vec![1.0 / k as f64; 2 * k]).unwrap();
        let e = entropy(&uniform);
        assert!(
            (e - (k as f64).ln()).abs() <= 1e-12,
            "uniform K={k}: {e} vs ln {}",
            (k as f64).ln()
        );
    }
    pass(7, "entropy-endpoints", "one-hot -> 0 and uniform -> ln K for K in {2, 4, 51, 101}".into());
}

/// Build one simulated domain: 10 synthetic images x 3 saccade samples,
/// written as an EVT1 class tree. The per-sample generation seed derives
/// from the domain seed, so domains sharing a seed differ only in C.
fn build_domain(root: &std::path::Path, domain_seed: u64, c: f64) {
    for img_idx in 0..10u64 {
        let class_dir = root.join(format!("img{img_idx:02}"));
        std::fs::create_dir_all(&class_dir).unwrap();
        let mut img_rng = ChaCha8Rng::seed_from_u64(9000 + img_idx);
        let image = synthetic_image(&mut img_rng, 24, 24);
        for sample_idx in 0..3u64 {
            let sample_seed = domain_seed
                .wrapping_mul(1_000_003)
                .wrapping_add(img_idx * 31 + sample_idx);
            let mut sample_rng = ChaCha8Rng::seed_from_u64(sample_seed);
            let dx1: f64 = sample_rng.random_range(2.0..5.0);
            let dy1: f64 = sample_rng.random_range(1.0..4.0);
            let dx2: f64 = sample_rng.random_range(-5.0..-2.0);
            let dy2: f64 = sample_rng.random_range(1.0..3.0);
            let pattern = SaccadePattern::new(
                vec![(dx1, dy1), (dx2, dy2), (-dx1 - dx2, -dy1 - dy2)],
                5,
            )
            .unwrap();
            let frames = saccade_frames(&image, &pattern, (32, 32), 8_000).unwrap();
            let cfg = SimulatorConfig {
                threshold_mode: ThresholdMode::Fixed(c),
                noise_rate: 20.0,
                seed: sample_seed,
                ..Default::default()
            };
            let stream = simulate(&frames, &cfg).unwrap();
            write_events(
                &stream,
                &class_dir.join(format!("s{sample_idx}.evt1")),
                EventFormat::Evt1,
            )
            .unwrap();
        }
    }
}

#[test]
fn criterion_08_shift_detection() {
    let start = Instant::now();
    let dom_a = tempfile::tempdir().unwrap();
    let dom_b = tempfile::tempdir().unwrap();
    let dom_a2 = tempfile::tempdir().unwrap();
    build_domain(dom_a.path(), 1, 0.06);
    build_domain(dom_b.path(), 1, 0.5);
    build_domain(dom_a2.path(), 2, 0.06);

    let cfg = DiagConfig {
        repr: ReprChoice::Voxel { bins: 9 },
        pool: PoolMode::ChannelStats,
        kernel: KernelSpec::default(),
        format: EventFormat::Evt1,
        geometry: None,
    };
    let shift = run_diag(dom_a.path(), dom_b.path(), &cfg, None, None).unwrap();
    let baseline = run_diag(dom_a.path(), dom_a2.path(), &cfg, None, None).unwrap();
    let elapsed = start.elapsed();
    assert!(
        shift.overall.mmd2 > 5.0 * baseline.overall.mmd2,
        "mmd2(A,B) = {} not > 5 x mmd2(A,A') = {}",
        shift.overall.mmd2,
        baseline.overall.mmd2
    );
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}, budget 60 s");
    pass(
        8,
        "shift-detection",
        format!(
            "mmd2(A,B) = {:.3e} vs mmd2(A,A') = {:.3e} ({:.1}x), {elapsed:?}",
            shift.overall.mmd2,
            baseline.overall.mmd2,
            shift.overall.mmd2 / baseline.overall.mmd2.max(1e-300)
        ),
    );
}

#[test]
fn criterion_09_multiview_algebra() {
    let mut r = rng(909);
    // ungroup . group identity for F = 1..12.
    for f in 1..=12usize {
        let data: Vec<f64> = (0..4 * 5 * f).map(|_| r.random_range(-2.0..2.0)).collect();
        let t = Tensor::from_vec(vec![4, 5, f], data).unwrap();
        let grouped = group_views(&t).unwrap();
        assert_eq!(grouped.view_count(), f.div_ceil(3));
        assert_eq!(ungroup_views(&grouped), t, "F = {f}");
    }
    // Four quarter turns are the identity.
    let data: Vec<f64> = (0..3 * 7 * 2).map(|_| r.random_range(-2.0..2.0)).collect();
    let t = Tensor::from_vec(vec![3, 7, 2], data).unwrap();
    let mut rotated = t.clone();
    for _ in 0..4 {
        rotated = rotate(&rotated, Rotation::Deg90);
    }
    assert_eq!(rotated, t);
    // Full relative-rotation label table under the signed convention
    // ((a - b) mod 360) / 90.
    let table: [[u8; 4]; 4] = [
        [0, 3, 2, 1],
        [1, 0, 3, 2],
        [2, 1, 0, 3],
        [3, 2, 1, 0],
    ];
    for (i, ra) in Rotation::ALL.iter().enumerate() {
        for (j, rb) in Rotation::ALL.iter().enumerate() {
            assert_eq!(
                relative_rotation_label(*ra, *rb),
                table[i][j],
                "pair ({}, {})",
                ra.degrees(),
                rb.degrees()
            );
        }
    }
    pass(9, "multiview-algebra", "group/ungroup x12, rotate^4 = id, 16-pair label table".into());
}

#[test]
fn criterion_10_determinism_across_runs_and_threads() {
    let dom_a = tempfile::tempdir().unwrap();
    let dom_b = tempfile::tempdir().unwrap();
    build_domain(dom_a.path(), 5, 0.06);
    build_domain(dom_b.path(), 5, 0.15);

    let pipeline = || {
        // simulate with every stochastic feature enabled
        let mut r = ChaCha8Rng::seed_from_u64(4242);
        let image = synthetic_image(&mut r, 24, 24);
        let frames =
            saccade_frames(&image, &SaccadePattern::default_triangle(), (48, 48), 5_000).unwrap();
        let cfg = SimulatorConfig {
            threshold_mode: ThresholdMode::PerPixelUniform { lo: 0.05, hi: 0.5 },
            refractory_us: 500,
            noise_rate: 50.0,
            seed: 77,
            ..Default::default()
        };
        let stream = simulate(&frames, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let evt_path = dir.path().join("s.evt1");
        write_events(&stream, &evt_path, EventFormat::Evt1).unwrap();
        let evt_bytes = std::fs::read(&evt_path).unwrap();

        let grid = voxel_grid(&stream, 9).unwrap();
        let ten_path = dir.path().join("s.ten1");
        grid.write_ten1(&ten_path).unwrap();
        let ten_bytes = std::fs::read(&ten_path).unwrap();

        let cfg = DiagConfig {
            repr: ReprChoice::Voxel { bins: 9 },
            pool: PoolMode::ChannelStats,
            kernel: KernelSpec::default(),
            format: EventFormat::Evt1,
            geometry: None,
        };
        let report = run_diag(dom_a.path(), dom_b.path(), &cfg, None, None).unwrap();
        (evt_bytes, ten_bytes, report.to_key_value_lines())
    };

    let mut outputs = Vec::new();
    for threads in [1usize, 4] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        for _run in 0..2 {
            outputs.push(pool.install(pipeline));
        }
    }
    for o in &outputs[1..] {
        assert_eq!(o.0, outputs[0].0, "EVT1 bytes differ");
        assert_eq!(o.1, outputs[0].1, "TEN1 bytes differ");
        assert_eq!(o.2, outputs[0].2, "diag lines differ");
    }
    pass(10, "determinism", "simulate -> voxel -> diag bit-identical over 2 runs x {1, 4} threads".into());
}
