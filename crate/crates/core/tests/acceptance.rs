//! Acceptance gate for the toolkit: ten numbered end-to-end checks covering
//! the geometry queries, the Jacobians, the null-space guarantee of the
//! avoidance planner, reproduction of the three bundled scenarios, the
//! comparison baselines, benchmark orderings, path quality, and gain
//! shaping. Every tolerance is pinned as a named constant below.
//!
//! The single test prints one line per check:
//!
//! ```text
//! [acceptance] criterion N (name): PASS|FAIL — detail
//! ```
//!
//! Run `cargo test --test acceptance -- --nocapture` to see the lines for
//! passing checks too.

mod common;

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::Vector3;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crplan::baselines::FailureReason;
use crplan::bench::benchmark;
use crplan::iik::{avoidance_gain, homogeneous_gain, AvoidanceGains, PlannerMode, Stepper};
use crplan::jacobian::{end_effector_jacobian, point_jacobian, PointDescriptor};
use crplan::kinematics::{forward_kinematics, LinkId, ManipulatorParams};
use crplan::proximity::{
    chain_proximity, closest_point_on_arc, closest_point_on_segment, ArcSegment,
};
use crplan::scenario::{
    build_end_effector_path, load_scenario, path_clearance_margin, run_scenario, PathSource,
    Planner, Scenario,
};
use crplan::srrt::{plan_workspace_path, segment_collision_free, RrtOptions, SearchSpace};

// ---------------------------------------------------------------------------
// Pinned tolerances and budgets, one block per criterion.

/// 1 — closest-point geometry vs dense sampling.
const GEOMETRY_INSTANCES: usize = 1_000;
const GEOMETRY_SAMPLES: usize = 100_000;
const GEOMETRY_TOL_MM: f64 = 1e-6;
const GEOMETRY_BUDGET_S: f64 = 10.0;

/// 2 — analytic Jacobians vs central finite differences.
const JACOBIAN_PAIRS: usize = 1_000;
const JACOBIAN_FD_STEP: f64 = 1e-6;
const JACOBIAN_REL_TOL: f64 = 1e-5;

/// 3 — null-space identity of the avoidance term.
const NULL_SPACE_LEAK_TOL_MM: f64 = 1e-8;

/// 4 — fixed-circle clearance and activation gating.
const CIRCLE_ACTIVATION_RADIUS_MM: f64 = 28.0;
const CIRCLE_BUDGET_S: f64 = 5.0;

/// 5 — fixed-circle tracking accuracy.
const TRACKING_PER_STEP_TOL_MM: f64 = 0.1;
const TRACKING_FINAL_TOL_MM: f64 = 0.5;

/// 6 — environment sweeps.
const SWEEP_SEEDS: u64 = 50;
const GOAL_REACH_TOL_MM: f64 = 2.0;
const SWEEP_BUDGET_S: f64 = 60.0;

/// 7 — benchmark orderings.
const BENCH_REPS: usize = 50;
const VARIANCE_RATIO_MIN: f64 = 10.0;

/// 8 — per-step solve-time stability.
const STEP_TIME_MAX_OVER_MEDIAN: f64 = 3.0;
const STEP_TIME_RUNS: usize = 5;

/// 9 — workspace path quality.
const PATH_FREE_INSTANCES: usize = 20;
const PATH_LENGTH_OVERHEAD_MAX: f64 = 0.05;
const PATH_MIN_SPAN_MM: f64 = 40.0;

/// 10 — gain boundary values and continuity.
const GAIN_CONTINUITY_TOL: f64 = 1e-6;
const GAIN_BOUNDARY_EPS: f64 = 1e-9;

// ---------------------------------------------------------------------------

macro_rules! check {
    // `if $cond {} else` rather than `if !$cond`: a NaN measurement must
    // fail the check, and this form keeps that without a negated float
    // comparison.
    ($cond:expr, $($msg:tt)+) => {
        if $cond {
        } else {
            return Err(format!($($msg)+));
        }
    };
}

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn load(name: &str) -> Scenario {
    load_scenario(&scenario_dir().join(format!("{name}.scenario")))
        .unwrap_or_else(|e| panic!("bundled scenario {name} must load: {e}"))
}

fn min_clearance_of(step: &crplan::iik::StepRecord) -> f64 {
    step.clearances.iter().copied().fold(f64::INFINITY, f64::min)
}

fn polyline_length(path: &[Vector3<f64>]) -> f64 {
    path.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

// ---------------------------------------------------------------------------
// 1. Closed-form closest-point queries agree with dense brute force.

fn geometry_closest_points() -> Result<(), String> {
    let t0 = Instant::now();
    let p = ManipulatorParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(101);

    for case in 0..GEOMETRY_INSTANCES {
        let q = common::random_config(&mut rng);
        let chain = forward_kinematics(&q, &p);
        let arc = ArcSegment::from_chain(&chain, case % 2).expect("bent segment carries an arc");
        let probe = Vector3::new(
            rng.random_range(-120.0..120.0),
            rng.random_range(-120.0..120.0),
            rng.random_range(-60.0..140.0),
        );
        let (cp, _) = closest_point_on_arc(&probe, &arc);
        let exact = (probe - cp).norm();
        let sampled = common::sampled_arc_distance(
            &probe,
            &arc.center,
            &arc.normal,
            &arc.start,
            arc.bend_angle,
            GEOMETRY_SAMPLES,
        );
        check!(
            (exact - sampled).abs() < GEOMETRY_TOL_MM,
            "arc instance {case}: exact {exact:.9} vs sampled {sampled:.9} mm"
        );
    }

    for case in 0..GEOMETRY_INSTANCES {
        let rand3 = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
            Vector3::new(
                rng.random_range(lo..hi),
                rng.random_range(lo..hi),
                rng.random_range(lo..hi),
            )
        };
        let a = rand3(&mut rng, -50.0, 50.0);
        let b = rand3(&mut rng, -50.0, 50.0);
        let probe = rand3(&mut rng, -80.0, 80.0);
        let (cp, _) = closest_point_on_segment(&probe, &a, &b);
        let exact = (probe - cp).norm();
        let sampled = common::sampled_segment_distance(&probe, &a, &b, GEOMETRY_SAMPLES);
        check!(
            (exact - sampled).abs() < GEOMETRY_TOL_MM,
            "segment instance {case}: exact {exact:.9} vs sampled {sampled:.9} mm"
        );
    }

    let dt = t0.elapsed().as_secs_f64();
    check!(
        dt < GEOMETRY_BUDGET_S,
        "geometry oracle took {dt:.2} s (budget {GEOMETRY_BUDGET_S} s)"
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// 2. Analytic Jacobians match central finite differences.

fn jacobians_match_finite_differences() -> Result<(), String> {
    let p = ManipulatorParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for case in 0..JACOBIAN_PAIRS {
        let q = common::random_config(&mut rng);
        let pd = match case % 5 {
            0 => PointDescriptor::end_effector(&p),
            1 => PointDescriptor { link: LinkId::Continuum1, local_coord: rng.random_range(0.0..1.0) },
            2 => PointDescriptor {
                link: LinkId::Rigid1,
                local_coord: rng.random_range(0.0..p.rigid_lengths[0]),
            },
            3 => PointDescriptor { link: LinkId::Continuum2, local_coord: rng.random_range(0.0..1.0) },
            _ => PointDescriptor {
                link: LinkId::Rigid2,
                local_coord: rng.random_range(0.0..p.rigid_lengths[1]),
            },
        };
        let j = point_jacobian(&q, &p, &pd);
        let fd = common::fd_jacobian_of(&q, JACOBIAN_FD_STEP, |cfg| pd.position(cfg, &p));
        for col in 0..4 {
            let scale = j.column(col).norm().max(1e-8);
            let err = (j.column(col) - fd.column(col)).norm() / scale;
            check!(
                err < JACOBIAN_REL_TOL,
                "pair {case} ({:?} at {:.3}) column {col}: relative error {err:.3e}",
                pd.link,
                pd.local_coord
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// 3. On every avoidance-active step of every bundled scenario the applied
//    avoidance term lies in the null space of the end-effector Jacobian.

fn null_space_identity_on_bundled_scenarios() -> Result<(), String> {
    let mut activations = 0usize;
    for name in ["fixed_circle", "env1", "env2"] {
        let s = load(name);
        let params = s.params();
        let obstacles = s.obstacle_list();
        let q_init = s.q_init.config();
        let path = build_end_effector_path(&s, s.rng_seed)
            .map_err(|e| format!("{name}: path construction failed: {e}"))?;

        let mut stepper = Stepper::new(q_init, params, s.gains.gains(), PlannerMode::Avoidance);
        let mut survey =
            chain_proximity(&forward_kinematics(&q_init, &params), &params, &obstacles);
        for i in 1..path.len() {
            let q_pre = stepper.config();
            let out = stepper
                .step(&survey, &path[i - 1], &path[i], &obstacles)
                .map_err(|e| format!("{name} step {i}: {e}"))?;
            if out.avoidance_active {
                activations += 1;
                let leak = (end_effector_jacobian(&q_pre, &params) * out.avoidance_term).norm();
                check!(
                    leak < NULL_SPACE_LEAK_TOL_MM,
                    "{name} step {i}: avoidance term leaks {leak:.3e} mm into the task space"
                );
            }
            survey = chain_proximity(&forward_kinematics(&out.config, &params), &params, &obstacles);
        }
    }
    check!(activations > 0, "no avoidance step occurred in any bundled scenario; identity untested");
    Ok(())
}

// ---------------------------------------------------------------------------
// 4. Fixed circle: with avoidance the clearance stays positive and the term
//    only engages once clearance drops below the activation radius; without
//    avoidance the run collides.

fn circle_clearance_and_activation() -> Result<(), String> {
    let t0 = Instant::now();
    let s = load("fixed_circle");

    let avoid = run_scenario(&s, None, None).map_err(|e| e.to_string())?;
    let min = avoid
        .trajectory
        .min_clearance()
        .ok_or("circle scenario has no obstacle")?;
    check!(min > 0.0, "avoidance run dipped to {min:.3} mm clearance");

    let steps = &avoid.trajectory.steps;
    let mut active = 0usize;
    for i in 1..steps.len() {
        if steps[i].avoidance_active {
            active += 1;
            let pre = min_clearance_of(&steps[i - 1]);
            check!(
                pre < CIRCLE_ACTIVATION_RADIUS_MM,
                "step {i} applied avoidance at pre-step clearance {pre:.3} mm \
                 (threshold {CIRCLE_ACTIVATION_RADIUS_MM} mm)"
            );
        }
    }
    check!(active > 0, "avoidance never engaged along the circle");

    let plain = run_scenario(&s, None, Some(Planner::NoAvoidance)).map_err(|e| e.to_string())?;
    check!(
        plain.trajectory.collided(),
        "tracking-only run never collided (min clearance {:.3} mm)",
        plain.trajectory.min_clearance().unwrap_or(f64::INFINITY)
    );

    let dt = t0.elapsed().as_secs_f64();
    check!(dt < CIRCLE_BUDGET_S, "circle runs took {dt:.2} s (budget {CIRCLE_BUDGET_S} s)");
    Ok(())
}

// ---------------------------------------------------------------------------
// 5. Fixed circle: tracking-only follows the path to within the per-step
//    tolerance; avoidance deviates while active but returns by the end.

fn circle_tracking_quality() -> Result<(), String> {
    let s = load("fixed_circle");

    let plain = run_scenario(&s, None, Some(Planner::NoAvoidance)).map_err(|e| e.to_string())?;
    // Record 0 is the logged start state, not the result of a step; its
    // tracking_error is the fixed offset between the initial end-effector
    // position and the ideal circle, which the loader already bounds.
    for (i, st) in plain.trajectory.steps.iter().enumerate().skip(1) {
        check!(
            st.tracking_error < TRACKING_PER_STEP_TOL_MM,
            "tracking-only step {i}: error {:.5} mm (tolerance {TRACKING_PER_STEP_TOL_MM} mm)",
            st.tracking_error
        );
    }

    let avoid = run_scenario(&s, None, None).map_err(|e| e.to_string())?;
    let final_err = avoid.trajectory.final_tracking_error();
    check!(
        final_err < TRACKING_FINAL_TOL_MM,
        "avoidance run final error {final_err:.5} mm (tolerance {TRACKING_FINAL_TOL_MM} mm)"
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// 6. Environment sweeps: the avoidance planner reaches the goal with zero
//    collisions on every seed in both environments; the random-null-space
//    baseline stalls in a strict majority of seeds in the first environment.

fn environment_sweeps() -> Result<(), String> {
    let t0 = Instant::now();
    let env1 = load("env1");
    let env2 = load("env2");

    for (name, s) in [("env1", &env1), ("env2", &env2)] {
        for seed in 0..SWEEP_SEEDS {
            let rep = run_scenario(s, Some(seed), Some(Planner::Avoidance))
                .map_err(|e| format!("{name} seed {seed}: {e}"))?;
            check!(!rep.trajectory.collided(), "{name} seed {seed}: avoidance run collided");
            check!(rep.outcome.succeeded, "{name} seed {seed}: avoidance outcome not successful");
            let fin = rep.trajectory.final_tracking_error();
            check!(
                fin <= GOAL_REACH_TOL_MM,
                "{name} seed {seed}: final error {fin:.4} mm (goal tolerance {GOAL_REACH_TOL_MM} mm)"
            );
        }
    }

    let mut stalled = 0u64;
    for seed in 0..SWEEP_SEEDS {
        let rep = run_scenario(&env1, Some(seed), Some(Planner::RandomNullspace))
            .map_err(|e| format!("env1 random seed {seed}: {e}"))?;
        if rep.outcome.failure_reason == Some(FailureReason::Stalled) {
            stalled += 1;
        }
    }

    let dt = t0.elapsed().as_secs_f64();
    check!(dt < SWEEP_BUDGET_S, "sweeps took {dt:.1} s (budget {SWEEP_BUDGET_S} s)");
    check!(
        2 * stalled > SWEEP_SEEDS,
        "random-null-space baseline stalled in {stalled}/{SWEEP_SEEDS} env1 seeds; \
         a strict majority is required"
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// 7. Benchmark orderings over repeated seeded runs: the two-stage planner's
//    mean total time beats the configuration-space search in both
//    environments, and the configuration-space variance dominates.

fn benchmark_orderings() -> Result<(), String> {
    let labeled = vec![
        ("env1".to_string(), load("env1")),
        ("env2".to_string(), load("env2")),
    ];
    let rows = benchmark(&labeled, BENCH_REPS);
    for env in ["env1", "env2"] {
        let row = |planner: &str| {
            rows.iter()
                .find(|r| r.scenario == env && r.planner == planner)
                .ok_or_else(|| format!("missing benchmark row {env}/{planner}"))
        };
        let iik = row("avoidance")?;
        let cspace = row("cspace_rrt_star")?;
        check!(
            iik.total_mean_s < cspace.total_mean_s,
            "{env}: two-stage mean {:.4} s is not below configuration-space mean {:.4} s",
            iik.total_mean_s,
            cspace.total_mean_s
        );
        check!(
            cspace.total_var > VARIANCE_RATIO_MIN * iik.total_var,
            "{env}: configuration-space variance {:.3e} is not {VARIANCE_RATIO_MIN}x above \
             the two-stage variance {:.3e}",
            cspace.total_var,
            iik.total_var
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// 8. Per-step solve time is near-constant within a run. Step costs are
//    measured as the minimum over several identical runs (the planner is
//    deterministic per seed), which removes scheduler noise from the
//    microsecond-scale timings while keeping every measured value a real
//    full step execution.

fn per_step_time_stability() -> Result<(), String> {
    for name in ["fixed_circle", "env1", "env2"] {
        let s = load(name);
        run_scenario(&s, None, None).map_err(|e| e.to_string())?; // warm-up

        let mut floor: Vec<f64> = Vec::new();
        for _ in 0..STEP_TIME_RUNS {
            let rep = run_scenario(&s, None, None).map_err(|e| e.to_string())?;
            let ts = &rep.trajectory.step_seconds;
            if floor.is_empty() {
                floor = ts.clone();
            } else {
                check!(floor.len() == ts.len(), "{name}: step count changed between identical runs");
                for (m, &t) in floor.iter_mut().zip(ts.iter()) {
                    *m = m.min(t);
                }
            }
        }

        let mut sorted = floor.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        let max = *sorted.last().expect("runs have at least one step");
        check!(
            max < STEP_TIME_MAX_OVER_MEDIAN * median,
            "{name}: slowest step {:.2} us vs median {:.2} us (ratio {:.2}, limit {})",
            max * 1e6,
            median * 1e6,
            max / median,
            STEP_TIME_MAX_OVER_MEDIAN
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// 9. Workspace path quality: near-Euclidean length in empty space; every
//    stage of the bundled environment paths passes exact segment-sphere
//    collision checks at the planning clearance; smoothed paths have exactly
//    the requested number of points.

fn workspace_path_quality() -> Result<(), String> {
    let space = SearchSpace::new(Vector3::new(-90.0, -90.0, 0.0), Vector3::new(90.0, 90.0, 90.0))
        .map_err(|e| e.to_string())?;
    let opts = RrtOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut done = 0usize;
    let mut attempt = 0u64;
    while done < PATH_FREE_INSTANCES {
        attempt += 1;
        check!(attempt < 1_000, "could not draw enough spaced start/goal pairs");
        let draw = |rng: &mut ChaCha8Rng| {
            Vector3::new(
                rng.random_range(-90.0..90.0),
                rng.random_range(-90.0..90.0),
                rng.random_range(0.0..90.0),
            )
        };
        let start = draw(&mut rng);
        let goal = draw(&mut rng);
        let euclid = (goal - start).norm();
        if euclid < PATH_MIN_SPAN_MM {
            continue;
        }
        let set = plan_workspace_path(&start, &goal, &[], &space, &opts, 20_000, 30, 909 + attempt)
            .map_err(|e| format!("free-space instance {done}: {e}"))?;
        let len = polyline_length(&set.smoothed);
        check!(
            len <= (1.0 + PATH_LENGTH_OVERHEAD_MAX) * euclid,
            "free-space instance {done}: length {len:.2} mm vs straight-line {euclid:.2} mm"
        );
        check!(
            set.smoothed.len() == 30,
            "free-space instance {done}: smoothed path has {} points, expected 30",
            set.smoothed.len()
        );
        done += 1;
    }

    for name in ["env1", "env2"] {
        let s = load(name);
        let params = s.params();
        let obstacles = s.obstacle_list();
        let PathSource::Srrt { start, goal, space_min, space_max, max_iters, n_samples } =
            &s.path_source
        else {
            return Err(format!("{name} is expected to use the tree-search path source"));
        };
        let space = SearchSpace::new(Vector3::from(*space_min), Vector3::from(*space_max))
            .map_err(|e| e.to_string())?;
        let clearance = params.body_radius + path_clearance_margin(&params);
        let opts = RrtOptions { clearance, ..RrtOptions::default() };
        let set = plan_workspace_path(
            &Vector3::from(*start),
            &Vector3::from(*goal),
            &obstacles,
            &space,
            &opts,
            *max_iters,
            *n_samples,
            s.rng_seed,
        )
        .map_err(|e| format!("{name}: {e}"))?;
        for (stage, path) in
            [("raw", &set.raw), ("pruned", &set.pruned), ("smoothed", &set.smoothed)]
        {
            check!(path.len() >= 2, "{name} {stage} path degenerate");
            for (i, w) in path.windows(2).enumerate() {
                check!(
                    segment_collision_free(&w[0], &w[1], &obstacles, clearance),
                    "{name} {stage} segment {i} violates the {clearance:.1} mm planning clearance"
                );
            }
        }
        check!(
            set.smoothed.len() == *n_samples,
            "{name}: smoothed path has {} points, expected {n_samples}",
            set.smoothed.len()
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// 10. Gain functions: plateau values are exact and both blends are
//     continuous across their branch boundaries.

fn gain_shaping() -> Result<(), String> {
    for (r, r_max, r_min) in [(28.0, 25.0, 22.0), (38.0, 35.0, 32.0), (48.0, 45.0, 42.0)] {
        let g = AvoidanceGains::new(r, r_max, r_min, 6.0);

        for (d, expect) in [(0.0, 1.0), (r_min, 1.0), (r_max, 1.0), (r, 0.0), (r + 10.0, 0.0)] {
            let v = homogeneous_gain(d, &g);
            check!(v == expect, "activation gain at d={d}: got {v}, expected exactly {expect}");
        }
        for (d, expect) in [(0.0, 1.0), (r_min, 1.0), (r_max, 0.0), (r, 0.0), (r + 10.0, 0.0)] {
            let v = avoidance_gain(d, &g);
            check!(v == expect, "escape gain at d={d}: got {v}, expected exactly {expect}");
        }

        for boundary in [r_min, r_max, r] {
            for gain in [homogeneous_gain, avoidance_gain] {
                let at = gain(boundary, &g);
                let below = gain(boundary - GAIN_BOUNDARY_EPS, &g);
                let above = gain(boundary + GAIN_BOUNDARY_EPS, &g);
                check!(
                    (at - below).abs() < GAIN_CONTINUITY_TOL
                        && (at - above).abs() < GAIN_CONTINUITY_TOL,
                    "gain discontinuity at d={boundary} (r={r}): {below} | {at} | {above}"
                );
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------

#[test]
fn acceptance_criteria() {
    type Check = fn() -> Result<(), String>;
    let criteria: [(usize, &str, Check); 10] = [
        (1, "closest-point geometry vs dense sampling", geometry_closest_points),
        (2, "analytic Jacobians vs finite differences", jacobians_match_finite_differences),
        (3, "avoidance term stays in the tracking null space", null_space_identity_on_bundled_scenarios),
        (4, "fixed circle clearance and activation gating", circle_clearance_and_activation),
        (5, "fixed circle tracking accuracy", circle_tracking_quality),
        (6, "environment sweeps and baseline stalls", environment_sweeps),
        (7, "benchmark mean and variance orderings", benchmark_orderings),
        (8, "per-step solve-time stability", per_step_time_stability),
        (9, "workspace path quality", workspace_path_quality),
        (10, "gain boundary values and continuity", gain_shaping),
    ];

    let mut failures = Vec::new();
    println!();
    for (id, name, run) in criteria {
        match run() {
            Ok(()) => println!("[acceptance] criterion {id} ({name}): PASS"),
            Err(msg) => {
                println!("[acceptance] criterion {id} ({name}): FAIL — {msg}");
                failures.push(id);
            }
        }
    }
    assert!(failures.is_empty(), "acceptance criteria failed: {failures:?}");
}
