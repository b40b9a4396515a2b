//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use dpt_core::correlation_filter::{argmax, extract_features, wrap_shift, Filter, FilterParams, CELL_SIZE};
use dpt_core::evaluation::{
    make_synthetic_sequence, run_no_reset, run_reset_based, DptTracker, OcclusionSpec, SyntheticSpec,
};
use dpt_core::segmentation::{color_probability, informativeness, informativeness_with};
use dpt_core::spring_system::{
    convergence_experiment, energy_gradient, generate_random_system, BenchConfig, BenchmarkTable, CgdOptions, IdaOptions,
    SpringSystem,
};
use dpt_core::tracker::{TrackerConfig, TrackerMode, TrackerState};
use dpt_core::Vec2;
use image::{Rgb, RgbImage};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 1;

struct Outcome {
    pass: bool,
    detail: String,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn agreement(table: &BenchmarkTable, size: usize) -> (f64, usize) {
    let good: Vec<_> = table.trials.iter().filter(|t| t.size == size && !t.degenerate).collect();
    let close = good.iter().filter(|t| t.relative_energy_gap() <= 1e-3).count();
    (close as f64 / good.len().max(1) as f64, good.len())
}

/// Both solvers run to a tight tolerance so the comparison is between the
/// minima they reach, not between stopping points.
fn optimizer_equivalence() -> Outcome {
    let converged = BenchConfig {
        ida: IdaOptions { tol: 1e-6, max_iter: 10_000 },
        cgd: CgdOptions { tol: 1e-6, max_iter: 20_000, ..CgdOptions::default() },
        ..BenchConfig::default()
    };
    let sizes = [4, 8, 16];
    let (table, elapsed) = timed(|| convergence_experiment(&sizes, 1000, SEED, &converged));
    let defaults = convergence_experiment(&sizes, 1000, SEED, &BenchConfig::default());
    let mut pass = elapsed < Duration::from_secs(60);
    let mut parts = Vec::new();
    for size in sizes {
        let (frac, n) = agreement(&table, size);
        let (loose, _) = agreement(&defaults, size);
        pass &= frac >= 0.99;
        parts.push(format!(
            "n={size}: {:.1}% of {n} agree ({:.1}% at default tolerances)",
            100.0 * frac,
            100.0 * loose
        ));
    }
    Outcome {
        pass,
        detail: format!("{} ({:.1}s)", parts.join(", "), elapsed.as_secs_f64()),
    }
}

fn optimizer_speed(table: &BenchmarkTable) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for row in table.rows.iter().filter(|r| r.solver == "IDA") {
        let cgd = table.row(row.size, "CGD").expect("both solvers per size");
        pass &= row.median_iters <= cgd.median_iters;
        parts.push(format!("n={}: {} vs {}", row.size, row.median_iters, cgd.median_iters));
    }
    let at8 = table.row(8, "IDA").expect("size 8 benchmarked").median_iters;
    pass &= at8 <= 15.0;
    Outcome {
        pass,
        detail: format!("median IDA vs CGD iterations {}; IDA median at n=8 is {at8}", parts.join(", ")),
    }
}

fn scalability(table: &BenchmarkTable, elapsed: Duration) -> Outcome {
    let mean = |size, solver| table.row(size, solver).expect("size benchmarked").mean_iters;
    let ida_ratio = mean(64, "IDA") / mean(4, "IDA");
    let cgd_ratio = mean(64, "CGD") / mean(4, "CGD");
    let points: Vec<(f64, f64)> = [4usize, 8, 16, 32, 64]
        .iter()
        .map(|&s| {
            let t = table.row(s, "IDA").expect("size benchmarked").mean_time_s;
            ((s as f64).ln(), t.ln())
        })
        .collect();
    let mx = points.iter().map(|p| p.0).sum::<f64>() / points.len() as f64;
    let my = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let pass = ida_ratio <= 2.0 && cgd_ratio >= 2.0 && slope < 2.0 && elapsed < Duration::from_secs(300);
    Outcome {
        pass,
        detail: format!(
            "IDA iterations x{ida_ratio:.2}, CGD iterations x{cgd_ratio:.2} from n=4 to n=64; \
             IDA time exponent {slope:.2} ({:.1}s)",
            elapsed.as_secs_f64()
        ),
    }
}

/// Energy written out term by term, independent of the library's evaluator.
fn reference_energy(system: &SpringSystem, x: &[Vec2]) -> f64 {
    let anchors = system.anchors();
    let statics: f64 = system
        .static_springs()
        .iter()
        .map(|s| {
            let dx = x[s.node].x - anchors[s.anchor].x;
            let dy = x[s.node].y - anchors[s.anchor].y;
            0.5 * s.stiffness * (dx * dx + dy * dy)
        })
        .sum();
    let dynamics: f64 = system
        .dynamic_springs()
        .iter()
        .map(|s| {
            let len = ((x[s.a].x - x[s.b].x).powi(2) + (x[s.a].y - x[s.b].y).powi(2)).sqrt();
            s.stiffness * (s.rest_length - len).powi(2)
        })
        .sum();
    statics + dynamics
}

fn gradient_check() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for trial in 0..100u64 {
        let size = rng.random_range(2..=16);
        let system = generate_random_system(size, SEED.wrapping_add(trial)).expect("valid size");
        let x: Vec<Vec2> = system
            .nodes()
            .iter()
            .map(|&p| p + Vec2::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)))
            .collect();
        let analytic = energy_gradient(&system, &x);
        let h = 1e-6;
        let mut err: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..x.len() {
            for axis in 0..2 {
                let mut plus = x.clone();
                let mut minus = x.clone();
                if axis == 0 {
                    plus[i].x += h;
                    minus[i].x -= h;
                } else {
                    plus[i].y += h;
                    minus[i].y -= h;
                }
                let fd = (reference_energy(&system, &plus) - reference_energy(&system, &minus)) / (2.0 * h);
                err = err.max((analytic[i].axis(axis) - fd).abs());
                scale = scale.max(fd.abs());
            }
        }
        worst = worst.max(err / scale.max(1e-12));
    }
    Outcome {
        pass: worst <= 1e-5,
        detail: format!("worst relative gradient error {worst:.2e} over 100 systems"),
    }
}

/// Smooth colored texture with period `period` pixels, displaced by `offset`.
fn periodic_texture(width: u32, height: u32, period: f64, offset: Vec2, phases: &[f64; 6]) -> RgbImage {
    let tau = std::f64::consts::TAU;
    RgbImage::from_fn(width, height, |x, y| {
        let u = (x as f64 - offset.x) / period;
        let v = (y as f64 - offset.y) / period;
        let wave = |k: usize, fu: f64, fv: f64| (tau * (fu * u + fv * v) + phases[k]).sin();
        let a = wave(0, 1.0, 2.0) + wave(1, 3.0, -1.0) + 0.5 * wave(2, 5.0, 4.0);
        let b = wave(3, 2.0, 1.0) + wave(4, -1.0, 3.0) + 0.5 * wave(5, 4.0, 6.0);
        let c = |v: f64| (127.5 + 50.0 * v).clamp(0.0, 255.0) as u8;
        Rgb([c(a), c(b), c(a - b)])
    })
}

fn filter_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let params = FilterParams::default();
    let mut self_ok = 0;
    for _ in 0..100 {
        let image = RgbImage::from_fn(160, 160, |_, _| Rgb([rng.random(), rng.random(), rng.random()]));
        let w = rng.random_range(24.0..72.0);
        let h = rng.random_range(24.0..72.0);
        let center = Vec2::new(rng.random_range(40.0..120.0), rng.random_range(40.0..120.0));
        let patch = extract_features(&image, center, (w * 2.0, h * 2.0), CELL_SIZE, true).expect("patch");
        let filter = Filter::fit(&patch, (w, h), &params).expect("trainable");
        self_ok += (argmax(&filter.respond(&patch).expect("same shape")) == (0, 0)) as usize;
    }

    let mut shift_ok = 0;
    let mut shift_total = 0;
    let size = 64.0;
    let center = Vec2::new(96.0, 96.0);
    for _ in 0..20 {
        let phases: [f64; 6] = std::array::from_fn(|_| rng.random_range(0.0..std::f64::consts::TAU));
        let base = periodic_texture(192, 192, size, Vec2::ZERO, &phases);
        let patch = extract_features(&base, center, (size, size), CELL_SIZE, true).expect("patch");
        let filter = Filter::fit(&patch, (size / 2.0, size / 2.0), &params).expect("trainable");
        let (rows, cols) = patch.grid();
        for _ in 0..5 {
            let quarter = size / 4.0;
            let shift = Vec2::new(rng.random_range(-quarter..=quarter), rng.random_range(-quarter..=quarter));
            let moved = periodic_texture(192, 192, size, shift, &phases);
            let probe = extract_features(&moved, center, (size, size), CELL_SIZE, true).expect("patch");
            let (pr, pc) = argmax(&filter.respond(&probe).expect("same shape"));
            let dy = wrap_shift(pr, rows) as f64 - shift.y / CELL_SIZE as f64;
            let dx = wrap_shift(pc, cols) as f64 - shift.x / CELL_SIZE as f64;
            shift_ok += (dy.abs() <= 1.0 && dx.abs() <= 1.0) as usize;
            shift_total += 1;
        }
    }
    Outcome {
        pass: self_ok == 100 && shift_ok == shift_total,
        detail: format!("self peak at zero shift {self_ok}/100, shifted peak within one cell {shift_ok}/{shift_total}"),
    }
}

fn color_gate_exactness() -> Outcome {
    let cases: [(usize, usize, f64); 10] = [
        (200, 1000, 1.0),
        (2000, 1000, 1.0),
        (201, 1000, 0.1),
        (1999, 1000, 0.1),
        (199, 1000, 1.0),
        (2001, 1000, 1.0),
        (1000, 1000, 0.1),
        (0, 1000, 1.0),
        (50_000, 1000, 1.0),
        (500, 1000, 0.1),
    ];
    let mut pass = cases
        .iter()
        .all(|&(fg, prev, expected)| informativeness(fg, prev).expect("positive size") == expected);
    pass &= informativeness_with(1, 5.0, 0.2, 2.0).expect("positive size") == 1.0;
    pass &= informativeness_with(10, 5.0, 0.2, 2.0).expect("positive size") == 1.0;

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let posterior = Array2::from_shape_fn((17, 23), |_| rng.random_range(0.0..=1.0));
    let mut worst: f64 = 0.0;
    for alpha in [0.1, 1.0, 0.0, 0.37] {
        let out = color_probability(&posterior, alpha);
        for (p, q) in posterior.iter().zip(out.iter()) {
            worst = worst.max((q - (p * (1.0 - alpha) + alpha)).abs());
        }
    }
    pass &= worst <= 1e-12;
    Outcome {
        pass,
        detail: format!("{} step cases exact, color probability error {worst:.1e}", cases.len() + 2),
    }
}

fn end_to_end() -> Outcome {
    let spec = SyntheticSpec::default();
    let ((ao, failures), elapsed) = timed(|| {
        let seq = make_synthetic_sequence(&spec, 7).expect("sequence");
        let ao = run_no_reset(&mut DptTracker::new(TrackerConfig::default()), &seq)
            .expect("valid sequence")
            .average_overlap;
        let failures = run_reset_based(&mut DptTracker::new(TrackerConfig::default()), &seq)
            .expect("valid sequence")
            .failure_count;
        (ao, failures)
    });
    Outcome {
        pass: ao >= 0.6 && failures == 0 && elapsed < Duration::from_secs(60),
        detail: format!(
            "{} frames: no-reset AO {ao:.3}, reset failures {failures} ({:.1}s)",
            spec.frames,
            elapsed.as_secs_f64()
        ),
    }
}

fn occlusion_gating() -> Outcome {
    let spec = SyntheticSpec {
        occlusion: Some(OcclusionSpec {
            start: 40,
            end: 60,
            fraction: 0.5,
        }),
        ..SyntheticSpec::default()
    };
    let seq = make_synthetic_sequence(&spec, 3).expect("sequence");
    let first = seq.frame(0).expect("frame");
    let mut state = TrackerState::initialize(&first, seq.ground_truth[0], TrackerConfig::default()).expect("init");
    let mut bottom_fail = [0usize; 2];
    let mut top_pass = [0usize; 2];
    for i in 1..seq.len() {
        let frame = seq.frame(i).expect("frame");
        let result = state.track_frame(&frame);
        if (40..=60).contains(&i) {
            if let Ok(r) = &result {
                // Row-major 2x2 layout: parts 0 and 1 on top, 2 and 3 below.
                for k in 0..2 {
                    top_pass[k] += r.updated_parts[k] as usize;
                    bottom_fail[k] += !r.updated_parts[k + 2] as usize;
                }
            }
        }
    }
    let ao = run_no_reset(&mut DptTracker::new(TrackerConfig::default()), &seq)
        .expect("valid sequence")
        .average_overlap;
    let need = (0.8 * 21.0f64).ceil() as usize;
    let pass = bottom_fail.iter().all(|&c| c >= need) && top_pass.iter().all(|&c| c >= need) && ao >= 0.5;
    Outcome {
        pass,
        detail: format!(
            "occluded frames 40-60: bottom parts frozen {bottom_fail:?}/21, top parts updated {top_pass:?}/21; AO {ao:.3}"
        ),
    }
}

fn ablation_order() -> Outcome {
    let spec = SyntheticSpec {
        deformation: 3.0,
        ..SyntheticSpec::default()
    };
    let sequences: Vec<_> = (100..110)
        .map(|s| make_synthetic_sequence(&spec, s).expect("sequence"))
        .collect();
    let mean_ao = |mode| {
        let config = TrackerConfig {
            mode,
            ..TrackerConfig::default()
        };
        sequences
            .iter()
            .map(|seq| {
                run_no_reset(&mut DptTracker::new(config.clone()), seq)
                    .expect("valid sequence")
                    .average_overlap
            })
            .sum::<f64>()
            / sequences.len() as f64
    };
    let full = mean_ao(TrackerMode::Full);
    let coarse = mean_ao(TrackerMode::CoarseOnly);
    let plain = mean_ao(TrackerMode::CoarseNoColor);
    Outcome {
        pass: full >= coarse && coarse >= plain,
        detail: format!("mean AO full {full:.3}, coarse-only {coarse:.3}, coarse without color {plain:.3}"),
    }
}

fn main() {
    let mut all_pass = true;
    let mut report = |id: usize, name: &str, outcome: Outcome| {
        all_pass &= outcome.pass;
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!("criterion {id} {verdict} {name}: {}", outcome.detail);
    };

    report(1, "optimizer equivalence", optimizer_equivalence());
    let (table, elapsed) = timed(|| convergence_experiment(&[4, 8, 16, 32, 64], 1000, SEED, &BenchConfig::default()));
    report(2, "optimizer speed ordering", optimizer_speed(&table));
    report(3, "scalability", scalability(&table, elapsed));
    report(4, "gradient check", gradient_check());
    report(5, "correlation filter properties", filter_properties());
    report(6, "color gate exactness", color_gate_exactness());
    report(7, "synthetic tracking", end_to_end());
    report(8, "occlusion gating", occlusion_gating());
    report(9, "ablation ordering", ablation_order());

    if !all_pass {
        std::process::exit(1);
    }
}
