//! Headline checks, one PASS/FAIL line each. Runs without the libtest
//! harness so the report is always printed.

mod common;

use std::collections::VecDeque;
use std::path::PathBuf;
use std::time::Instant;

use common::gen::{message, synthetic_localization};
use common::oracles::{exhaustive_best, random_instance};
use hydrosim::geometry::Pose2;
use hydrosim::localization::{predict, update_gnss, update_heading, GnssFix, ImuSample, ProcessNoise, StateEstimate};
use hydrosim::planner::{hybrid_astar, segment_is_free, ClosedSet, PlannerError, PlannerParams};
use hydrosim::power::{endurance, total_power, LoadProfile};
use hydrosim::rng::RngFactory;
use hydrosim::sampler::{
    monte_carlo, output_torque, FaultModel, MotorAction, MotorCommand, SamplerEvent, SamplerParams, SamplerState,
};
use hydrosim::sim::{self, aggregate_table4, SampleRow, Scenario};
use hydrosim::telemetry::{decode_frame, encode_frame, link_transmit, Delivery, LinkModel};
use hydrosim::world_map::{erode, preprocess, BinaryMask, Cell, GrayImage, PreprocessConfig};
use nalgebra::{Matrix2, Matrix4, SymmetricEigen, Vector2, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Line {
    name: &'static str,
    pass: bool,
    detail: String,
}

impl Line {
    fn new(name: &'static str, pass: bool, detail: String) -> Self {
        Self { name, pass, detail }
    }
}

/// Criteria expected to be red, with the reason printed next to them.
const KNOWN_RED: &[(&str, &str)] = &[(
    "planner",
    "a (cell, heading-bin) closed set merges distinct poses, so the default search is not optimal over primitive \
     sequences; the exact-state closed set meets the bound",
)];

fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run_shipped(name: &str) -> (hydrosim::sim::SimLog, hydrosim::sim::MetricsReport) {
    let (sc, base) = Scenario::load(&scenarios_dir().join(name)).unwrap();
    sim::run(sc.resolve(&base).unwrap()).unwrap()
}

fn power() -> Line {
    let p = total_power(&LoadProfile::default());
    let minutes = endurance(1920.0, 1882.0).unwrap() * 60.0;
    let (_, m) = run_shipped("full_load_depletion.json");
    let depleted = m.endurance.depleted_at_s.map(|s| s / 60.0);
    let pass = (p - 1881.91).abs() <= 0.01 && (minutes - 61.0).abs() <= 1.0 && depleted.is_some_and(|d| (d - 61.0).abs() <= 1.0);
    Line::new("power", pass, format!("total {p:.2} W, endurance {minutes:.2} min, sim depletion {depleted:.2?} min"))
}

fn sampling() -> Line {
    let params = SamplerParams::default();
    let torque = output_torque(&params);
    let mut s = SamplerState::new(params);
    s.apply_command(MotorCommand::new(0, 0, MotorAction::Forward).unwrap()).unwrap();
    let rng = RngFactory::new(0).labelled("acceptance");
    let mut done = None;
    for tick in 0..10_000u64 {
        for e in s.step(0.01, &FaultModel::none(), &mut rng.at(tick)) {
            if let SamplerEvent::CycleCompleted { duration, volumes, .. } = e {
                done = Some((duration, volumes));
            }
        }
        if done.is_some() {
            break;
        }
    }
    let (duration, volumes) = done.expect("cycle completes");
    let flow = volumes[0] / duration;
    let pass = torque == 5.4 && (duration - 90.0).abs() < 1e-6 && volumes.iter().all(|v| (v - 45.0).abs() < 1e-6) && (flow - 0.5).abs() < 1e-9;
    Line::new("sampling", pass, format!("torque {torque} N m, cycle {duration:.3} s, volumes {volumes:?} mL, flow {flow:.4} mL/s"))
}

fn table4() -> Line {
    #[derive(serde::Deserialize)]
    struct Fixture {
        capacity_ml: f64,
        baseline_s: f64,
        rows: Vec<SampleRow>,
        printed_groups: Vec<serde_json::Value>,
        printed_global: serde_json::Value,
    }
    let f: Fixture = serde_json::from_str(include_str!("fixtures/table4.json")).unwrap();
    let r = monte_carlo(&SamplerParams::default(), &FaultModel::calibrated(), 10_000, 0, 0.5, 1800.0);
    let t_err = (r.mean_fill_time - 150.88).abs() / 150.88;
    let v_err = (r.mean_volume - 35.25).abs() / 35.25;
    let t = aggregate_table4(&f.rows, f.capacity_ml, f.baseline_s).unwrap();
    let r2 = |v: f64| (v * 100.0).round() / 100.0;
    let cols = ["fill_time_s", "time_error_pct", "volume_ml", "loss_pct", "temperature", "ph", "tds", "ec"];
    let mut mismatches = Vec::new();
    let mut check = |name: &str, got: &hydrosim::sim::GroupMeans, printed: &serde_json::Value| {
        let vals = [got.fill_time_s, got.time_error_pct, got.volume_ml, got.loss_pct, got.temperature, got.ph, got.tds, got.ec];
        for (c, v) in cols.iter().zip(vals) {
            let p = printed[c].as_f64().unwrap();
            if (r2(v) - p).abs() > 0.011 {
                mismatches.push(format!("{name}.{c} {:.2} vs {p}", r2(v)));
            }
        }
    };
    for (g, p) in t.groups.iter().zip(&f.printed_groups) {
        check(&g.group, g, p);
    }
    check("all", &t.global, &f.printed_global);
    // the printed B2 pH is inconsistent with its own rows (7.75)
    let erratum = mismatches == ["B2.ph 7.75 vs 7.84"];
    let pass = t_err <= 0.05 && v_err <= 0.05 && erratum;
    Line::new(
        "table4",
        pass,
        format!(
            "MC fill {:.2} s ({:+.1}%), volume {:.2} mL ({:+.1}%); pi rows match except {:?}",
            r.mean_fill_time,
            100.0 * (r.mean_fill_time - 150.88) / 150.88,
            r.mean_volume,
            100.0 * (r.mean_volume - 35.25) / 35.25,
            mismatches
        ),
    )
}

fn ekf() -> Line {
    let diag = |a, b, c, d| Matrix4::from_diagonal(&Vector4::new(a, b, c, d));
    let mut worst: f64 = 0.0;
    for (px, py, r, zx, zy) in [(1.0, 3.0, 0.25, 5.0, -2.0), (4.0, 0.5, 1.0, -1.5, 7.0), (0.01, 100.0, 2.0, 0.0, 0.0)] {
        let est = StateEstimate::new(1.0, 2.0, 0.3, 0.4, diag(px, py, 0.2, 0.1));
        let out = update_gnss(&est, &GnssFix { z: Vector2::new(zx, zy), r: Matrix2::identity() * r }).unwrap();
        let (kx, ky) = (px / (px + r), py / (py + r));
        for e in [
            out.x() - (1.0 + kx * (zx - 1.0)),
            out.y() - (2.0 + ky * (zy - 2.0)),
            out.cov[(0, 0)] - (1.0 - kx) * px,
            out.cov[(1, 1)] - (1.0 - ky) * py,
        ] {
            worst = worst.max(e.abs());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut ops, mut psd_ok) = (0usize, true);
    while ops < 100_000 {
        let mut est = StateEstimate::new(0.0, 0.0, 0.0, 0.0, diag(1.0, 1.0, 0.1, 0.1));
        let q = ProcessNoise::diagonal(rng.gen_range(0.0..1e-2), rng.gen_range(0.0..1e-2), rng.gen_range(0.0..1e-3), 1e-3);
        for _ in 0..200 {
            est = match rng.gen_range(0..10) {
                0..=6 => {
                    let imu = ImuSample { yaw_rate: rng.gen_range(-1.0..1.0), forward_accel: rng.gen_range(-1.0..1.0), dt: 0.02 };
                    predict(&est, &imu, &q).unwrap()
                }
                7 | 8 => {
                    let s = 10f64.powf(rng.gen_range(-4.0..1.0)).sqrt();
                    update_gnss(&est, &GnssFix::isotropic(est.x() + rng.gen_range(-1.0..1.0), est.y() + rng.gen_range(-1.0..1.0), s)).unwrap()
                }
                _ => update_heading(&est, rng.gen_range(-3.0..3.0), 10f64.powf(rng.gen_range(-5.0..0.0))).unwrap(),
            };
            ops += 1;
            let p = est.cov;
            let scale = p.abs().max().max(1.0);
            psd_ok &= (p - p.transpose()).abs().max() <= 1e-12 * scale && SymmetricEigen::new(p).eigenvalues.min() >= -1e-9 * scale;
        }
    }
    let runs: Vec<_> = (0..24).map(synthetic_localization).collect();
    let wins = runs.iter().filter(|r| r.fused_rmse < r.gnss_only_rmse && r.fused_rmse < r.dead_reckoning_rmse).count();
    let mean = |f: fn(&common::gen::LocalizationRun) -> f64| runs.iter().map(f).sum::<f64>() / runs.len() as f64;
    let pass = worst <= 1e-9 && psd_ok && wins == runs.len();
    Line::new(
        "ekf",
        pass,
        format!(
            "scalar oracle max err {worst:.1e}; {ops} ops PSD {psd_ok}; fusion wins {wins}/{} seeds (RMSE fused {:.3} gnss {:.3} dr {:.3} m)",
            runs.len(),
            mean(|r| r.fused_rmse),
            mean(|r| r.gnss_only_rmse),
            mean(|r| r.dead_reckoning_rmse)
        ),
    )
}

struct OracleCount {
    violations: usize,
    no_path: usize,
    invalid: usize,
}

fn oracle_count(closed_set: ClosedSet) -> OracleCount {
    let params = PlannerParams { heading_bins: 8, footprint_radius: 0.3, goal_theta_tol: 0.6, closed_set, ..Default::default() };
    let mut c = OracleCount { violations: 0, no_path: 0, invalid: 0 };
    for seed in 0..100 {
        let inst = random_instance(seed, &params);
        match hybrid_astar(&inst.grid, inst.start, inst.goal, &params) {
            Ok(t) => {
                if exhaustive_best(&inst.grid, inst.start, inst.goal, &params, 12, t.total_cost).is_some_and(|b| b < t.total_cost - 1e-9) {
                    c.violations += 1;
                }
                let free = t.poses.windows(2).all(|w| segment_is_free(&inst.grid, w[0].x, w[0].y, w[1].x, w[1].y, params.footprint_radius));
                let bounded = t.curvatures.iter().all(|k| k.abs() <= params.max_curvature() + 1e-9);
                if !(free && bounded) {
                    c.invalid += 1;
                }
            }
            Err(PlannerError::NoPath { .. }) => c.no_path += 1,
            Err(_) => c.invalid += 1,
        }
    }
    c
}

fn planner() -> Line {
    let cell = oracle_count(ClosedSet::CellHeading);
    let exact = oracle_count(ClosedSet::ExactState);
    let grid = hydrosim::world_map::OccupancyGrid::empty(40, 10, 0.5).unwrap();
    let (start, goal) = (Pose2::new(1.0, 2.5, 0.0), Pose2::new(18.0, 2.5, 0.0));
    let straight = hybrid_astar(&grid, start, goal, &PlannerParams::default()).unwrap();
    let ratio = straight.length() / start.distance_to(&goal);
    let pass = cell.violations == 0 && cell.no_path == 0 && cell.invalid == 0 && (ratio - 1.0).abs() <= 0.05;
    Line::new(
        "planner",
        pass,
        format!(
            "default (cell, heading) closed set: {} cheaper sequences, {} NoPath, {} invalid of 100; exact-state: {} / {} / {}; straight line {:.3} x Euclidean",
            cell.violations, cell.no_path, cell.invalid, exact.violations, exact.no_path, exact.invalid, ratio
        ),
    )
}

fn waypoints() -> Vec<Line> {
    let (_, calm) = run_shipped("eight_waypoints_calm.json");
    let w = calm.waypoints.expect("calm run reaches waypoints");
    let calm_line = Line::new(
        "waypoint mission",
        w.n == 8 && w.precision_pct == 100.0 && w.threshold_m == 0.10,
        format!("calm: {} waypoints, precision {:.0}% at {:.2} m, mean {:.3} m, max {:.3} m", w.n, w.precision_pct, w.threshold_m, w.mean_err_m, w.max_err_m),
    );
    let (_, cal) = run_shipped("lagoon_calibrated.json");
    let detail = match cal.waypoints {
        Some(c) => format!(
            "calibrated (tracked, not gating): precision {:.0}%, mean {:.3} m, max {:.3} m vs field 87% / 0.046 m / 0.12 m",
            c.precision_pct, c.mean_err_m, c.max_err_m
        ),
        None => "calibrated (tracked, not gating): no waypoint reached".into(),
    };
    vec![calm_line, Line::new("waypoint tracking", true, detail)]
}

fn telemetry() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut roundtrip = 0;
    for i in 0..10_000u32 {
        let msg = message(&mut rng);
        let bytes = encode_frame(i as u16, &msg).unwrap();
        if decode_frame(&bytes).map(|f| f.seq == i as u16 && f.msg == msg).unwrap_or(false) {
            roundtrip += 1;
        }
    }
    let mut caught = 0;
    for _ in 0..10_000 {
        let mut bytes = encode_frame(rng.gen(), &message(&mut rng)).unwrap();
        let pos = rng.gen_range(0..bytes.len());
        bytes[pos] ^= rng.gen_range(1..=255u8);
        if decode_frame(&bytes).is_err() {
            caught += 1;
        }
    }
    let model = LinkModel::default();
    let lossless = (0..=668).all(|i| matches!(link_transmit(i as f64 * 0.1, &model, &mut rng), Delivery::Delivered { .. }));
    let beyond = (0..10_000).filter(|_| link_transmit(90.0, &model, &mut rng) == Delivery::Dropped).count();
    let pass = roundtrip == 10_000 && caught == 10_000 && lossless && beyond > 0;
    Line::new(
        "telemetry",
        pass,
        format!("roundtrip {roundtrip}/10000, corruptions caught {caught}/10000, lossless to 66.8 m {lossless}, drop rate at 90 m {:.3}", beyond as f64 / 1e4),
    )
}

fn determinism() -> Line {
    let mut same = true;
    for name in ["eight_waypoints_calm.json", "lagoon_calibrated.json"] {
        same &= run_shipped(name).0.hash() == run_shipped(name).0.hash();
    }
    let (sc, base) = Scenario::load(&scenarios_dir().join("lagoon_calibrated.json")).unwrap();
    let mut hashes: Vec<String> = sim::sweep(&sc.resolve(&base).unwrap(), 0..8).unwrap().into_iter().map(|r| r.log_hash).collect();
    hashes.sort();
    hashes.dedup();
    let pass = same && hashes.len() == 8;
    Line::new("determinism", pass, format!("equal seeds equal hashes {same}; 8-seed sweep gives {} distinct logs", hashes.len()))
}

/// Chebyshev distance from `p` to the nearest pixel of `set`.
fn distance_to(set: &[(usize, usize)], p: (usize, usize)) -> usize {
    set.iter().map(|q| p.0.abs_diff(q.0).max(p.1.abs_diff(q.1))).min().unwrap_or(usize::MAX)
}

fn map_pipeline() -> Line {
    let img = GrayImage::from_fn(32, 32, |c, r| if (8..24).contains(&c) && (8..24).contains(&r) { 255 } else { 0 });
    // brute-force truth: pixels with a nonzero central difference
    let px = |c: usize, r: usize| img.get(c.min(31), r.min(31)) as i32;
    let mut truth = Vec::new();
    for r in 1..31 {
        for c in 1..31 {
            let gx = px(c + 1, r) - px(c - 1, r);
            let gy = px(c, r + 1) - px(c, r - 1);
            if gx != 0 || gy != 0 {
                truth.push((c, r));
            }
        }
    }
    let cfg = PreprocessConfig { erode_radius: 0, resolution: 1.0, ..Default::default() };
    let grid = preprocess(&img, &cfg).unwrap();
    let occupied: Vec<(usize, usize)> =
        (0..32).flat_map(|r| (0..32).map(move |c| (c, r))).filter(|&(c, r)| grid.get(c, r) == Cell::Occupied).collect();
    let near = occupied.iter().all(|&p| distance_to(&truth, p) <= 1) && truth.iter().all(|&p| distance_to(&occupied, p) <= 1);
    // closed: free space reachable from the corner never reaches the centre
    let mut seen = vec![false; 32 * 32];
    let mut queue = VecDeque::from([(0usize, 0usize)]);
    seen[0] = true;
    while let Some((c, r)) = queue.pop_front() {
        for (dc, dr) in [(1i32, 0i32), (-1, 0), (0, 1), (0, -1)] {
            let (nc, nr) = (c as i32 + dc, r as i32 + dr);
            if !(0..32).contains(&nc) || !(0..32).contains(&nr) {
                continue;
            }
            let (nc, nr) = (nc as usize, nr as usize);
            if !seen[nr * 32 + nc] && grid.get(nc, nr) != Cell::Occupied {
                seen[nr * 32 + nc] = true;
                queue.push_back((nc, nr));
            }
        }
    }
    let closed = !seen[16 * 32 + 16];

    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut agree = 0;
    for _ in 0..200 {
        let bits: Vec<bool> = (0..32 * 32).map(|_| rng.gen_bool(0.8)).collect();
        let m = BinaryMask::from_bits(32, 32, bits).unwrap();
        let radius = rng.gen_range(0..4usize);
        let brute = BinaryMask::from_fn(32, 32, |c, r| {
            let lo = |v: usize| v.saturating_sub(radius);
            (lo(r)..=(r + radius).min(31)).all(|rr| (lo(c)..=(c + radius).min(31)).all(|cc| m.get(cc, rr)))
        });
        if erode(&m, radius) == brute {
            agree += 1;
        }
    }
    let pass = near && closed && agree == 200;
    Line::new(
        "map pipeline",
        pass,
        format!("{} occupied cells within 1 px of the gradient truth {near}, ring closed {closed}; erosion oracle {agree}/200 masks", occupied.len()),
    )
}

fn main() {
    let mut lines = Vec::new();
    let mut timed = |f: &dyn Fn() -> Vec<Line>| {
        let t0 = Instant::now();
        for mut l in f() {
            l.detail = format!("{} [{:.1} s]", l.detail, t0.elapsed().as_secs_f64());
            lines.push(l);
        }
    };
    timed(&|| vec![power()]);
    timed(&|| vec![sampling()]);
    timed(&|| vec![table4()]);
    timed(&|| vec![ekf()]);
    timed(&|| vec![planner()]);
    timed(&waypoints);
    timed(&|| vec![telemetry()]);
    timed(&|| vec![determinism()]);
    timed(&|| vec![map_pipeline()]);

    let mut unexpected = Vec::new();
    for l in &lines {
        let known = KNOWN_RED.iter().find(|(n, _)| *n == l.name);
        println!("{} {:<18} {}", if l.pass { "PASS" } else { "FAIL" }, l.name, l.detail);
        match (l.pass, known) {
            (false, Some((_, why))) => println!("     known red: {why}"),
            (false, None) => unexpected.push(l.name),
            (true, Some(_)) => println!("     listed as known red but passed"),
            (true, None) => {}
        }
    }
    let passed = lines.iter().filter(|l| l.pass).count();
    println!("acceptance: {passed}/{} PASS", lines.len());
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
