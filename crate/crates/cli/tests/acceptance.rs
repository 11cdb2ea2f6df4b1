//! Acceptance suite: one PASS/FAIL line per headline property.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use common::{observed_subset, permutations, RawTable};
use idtrace_bench::experiments::{derive_seed, sample_objects, variance, MultiplicityStatus};
use idtrace_bench::{generate_universe, run_bench, BenchConfig, BenchOutcome, GeneratorConfig};
use idtrace_core::{
    conditional_identity_entropy, enumerate_core_sets, greedy_core_set, identity_entropy,
    is_core_identification_set, run_random_baseline, run_titf, set_discriminability, CoreSetError,
    ObservationSet, Status, TraceOptions,
};
use idtrace_service::{
    CreateSession, KnownEntry, NamedObservation, PostObservation, PostUnavailable, ServiceConfig,
    ServiceState,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOLERANCE: f64 = 1e-9;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, failure: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(failure())
    }
}

/// Random tables for the entropy identities, with the observation sets drawn from them.
fn entropy_corpus() -> Vec<(RawTable, Vec<Vec<idtrace_core::Observation>>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC4A1);
    (0..200)
        .map(|_| {
            let n = rng.gen_range(2..=64);
            let m = rng.gen_range(1..=8);
            let missing = if rng.gen_bool(0.3) { 0.1 } else { 0.0 };
            let table = RawTable::random(&mut rng, n, m, 5, missing);
            let sets = (0..5)
                .map(|_| observed_subset(&mut rng, &table, m))
                .collect();
            (table, sets)
        })
        .collect()
}

fn chain_rule() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    let mut permuted = 0;
    for (table, sets) in entropy_corpus() {
        let u = table.universe();
        let all = u.all();
        for obs in sets {
            let joint = table.scan(&table.all(), &obs).len();
            let expected = -(joint as f64 / table.rows.len() as f64).log2();
            let got = set_discriminability(&u, &all, &obs)
                .map_err(|e| e.to_string())?
                .value();
            check((got - expected).abs() <= TOLERANCE, || {
                format!("{obs:?}: {got} vs {expected}")
            })?;
            checked += 1;
            if obs.len() <= 4 {
                for p in permutations(&obs) {
                    let v = set_discriminability(&u, &all, &p)
                        .map_err(|e| e.to_string())?
                        .value();
                    check((v - got).abs() <= TOLERANCE, || {
                        format!("order {p:?}: {v} vs {got}")
                    })?;
                    permuted += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(30), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "{checked} observation sets, {permuted} orderings, {:.2}s",
        elapsed.as_secs_f64()
    ))
}

fn entropy_equality() -> Outcome {
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for (table, sets) in entropy_corpus() {
        let u = table.universe();
        let all = u.all();
        let h0 = identity_entropy(u.n_objects())
            .map_err(|e| e.to_string())?
            .value();
        for obs in sets {
            let mut known = ObservationSet::new();
            for &o in &obs {
                known.insert(o).map_err(|e| e.to_string())?;
            }
            let (Ok(h), Ok(i)) = (
                conditional_identity_entropy(&u, &all, &known),
                set_discriminability(&u, &all, &obs),
            ) else {
                continue;
            };
            let gap = (h0 - h.value() - i.value()).abs();
            worst = worst.max(gap);
            check(gap <= TOLERANCE, || {
                format!("{obs:?}: H0 - H = {} but I = {}", h0 - h.value(), i.value())
            })?;
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} observation sets, largest gap {worst:.1e}"
    ))
}

fn coreset_soundness() -> Outcome {
    let u = generate_universe(&GeneratorConfig::with_shape(200, 12, 2, 6, 7))
        .map_err(|e| e.to_string())?;
    let all = u.all();
    let none = ObservationSet::new();
    let mut greedy_sizes = 0;
    for target in 0..u.n_objects() {
        let report = greedy_core_set(&u, &all, target, &none).map_err(|e| e.to_string())?;
        let verdict = is_core_identification_set(&u, &all, target, &report.attribute_ids)
            .map_err(|e| e.to_string())?;
        check(verdict.is_identifying && verdict.is_minimal, || {
            format!(
                "object {target}: {:?} is not a core set",
                report.attribute_ids
            )
        })?;
        greedy_sizes += report.attribute_ids.len();
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x5E7);
    let mut instances = 0;
    let mut total_sets = 0;
    for _ in 0..150 {
        let n = rng.gen_range(2..=32);
        let m = rng.gen_range(1..=10);
        let missing = if rng.gen_bool(0.3) { 0.1 } else { 0.0 };
        let table = RawTable::random(&mut rng, n, m, 4, missing);
        let u = table.universe();
        let all = u.all();
        for target in 0..n.min(4) {
            let found = enumerate_core_sets(&u, &all, target, m).map_err(|e| e.to_string())?;
            let oracle = table.core_sets(&table.all(), target, m);
            check(found == oracle, || {
                format!("n={n} m={m} target {target}: {found:?} vs oracle {oracle:?}")
            })?;
            total_sets += found.len();
            match greedy_core_set(&u, &all, target, &none) {
                Ok(report) => {
                    let min = found.iter().map(Vec::len).min();
                    check(
                        min.is_some_and(|min| report.attribute_ids.len() >= min),
                        || {
                            format!(
                                "greedy {:?} smaller than enumerated minimum {min:?}",
                                report.attribute_ids
                            )
                        },
                    )?;
                }
                Err(CoreSetError::NotDistinguishable { .. }) => check(found.is_empty(), || {
                    format!("greedy gave up but {} core sets exist", found.len())
                })?,
                Err(e) => return Err(e.to_string()),
            }
            instances += 1;
        }
    }
    Ok(format!(
        "200 greedy sets (mean size {:.2}) are core sets; {instances} enumerations match the subset oracle ({total_sets} sets)",
        greedy_sizes as f64 / 200.0
    ))
}

/// The default benchmark, exactly as `idtrace bench` runs it without a config.
fn default_bench() -> &'static Result<(BenchOutcome, Duration), String> {
    static OUTCOME: OnceLock<Result<(BenchOutcome, Duration), String>> = OnceLock::new();
    OUTCOME.get_or_init(|| {
        let config = BenchConfig::from_json("{}").map_err(|e| e.to_string())?;
        let start = Instant::now();
        let outcome = run_bench(&config).map_err(|e| e.to_string())?;
        Ok((outcome, start.elapsed()))
    })
}

fn q1_multiplicity() -> Outcome {
    let (outcome, _) = default_bench().as_ref().map_err(Clone::clone)?;
    let u = &outcome.universe;
    check(u.n_objects() == 5000 && u.n_attributes() == 20, || {
        "default universe is not 5000x20".into()
    })?;
    let rows = outcome.q1.as_ref().ok_or("q1 did not run")?;
    let groups = rows.iter().map(|r| r.group).max().map_or(0, |g| g + 1);
    // Each space is a group of 500 with the probe added when it is not already a member.
    check(
        groups == 10
            && rows
                .iter()
                .all(|r| r.space_size == 500 || r.space_size == 501),
        || "expected 10 groups of 500".into(),
    )?;
    for r in rows {
        check(r.status != MultiplicityStatus::Censored, || {
            format!("probe {} group {} censored", r.probe, r.group)
        })?;
        if r.status == MultiplicityStatus::Ok {
            check(r.core_sets >= 1, || {
                format!("probe {} has no core set in group {}", r.probe, r.group)
            })?;
        }
    }
    let mut probes: Vec<usize> = rows.iter().map(|r| r.probe).collect();
    probes.sort();
    probes.dedup();
    let varying = probes
        .iter()
        .filter(|&&p| {
            let mut counts: Vec<usize> = rows
                .iter()
                .filter(|r| r.probe == p)
                .map(|r| r.core_sets)
                .collect();
            counts.dedup();
            counts.len() > 1
        })
        .count();
    check(varying >= 1, || {
        "every probe has the same core-set count in every group".into()
    })?;
    let ok = rows
        .iter()
        .filter(|r| r.status == MultiplicityStatus::Ok)
        .count();
    let (lo, hi) = rows
        .iter()
        .filter(|r| r.status == MultiplicityStatus::Ok)
        .fold((usize::MAX, 0), |(lo, hi), r| {
            (lo.min(r.core_sets), hi.max(r.core_sets))
        });
    Ok(format!(
        "{} probes x {groups} groups, {ok} distinguishable cases with {lo}..{hi} core sets, {varying} probe(s) vary across groups",
        probes.len()
    ))
}

fn q2_q3_variation() -> Outcome {
    let (outcome, _) = default_bench().as_ref().map_err(Clone::clone)?;
    let u = &outcome.universe;
    let q2 = outcome.q2.as_ref().ok_or("q2 did not run")?;
    let groups = q2.iter().map(|p| p.group).max().map_or(0, |g| g + 1);
    let mut varied_in_every_group = usize::MAX;
    for g in 0..groups {
        let members: Vec<_> = q2.iter().filter(|p| p.group == g).collect();
        let varied = (0..u.n_attributes())
            .filter(|&a| {
                let values: Vec<f64> = members
                    .iter()
                    .filter_map(|p| p.bits[a])
                    .filter(|b| b.is_finite())
                    .collect();
                variance(values) > 0.0
            })
            .count();
        check(varied >= 1, || {
            format!("group {g}: no attribute varies across objects")
        })?;
        varied_in_every_group = varied_in_every_group.min(varied);
    }

    let q3 = outcome.q3.as_ref().ok_or("q3 did not run")?;
    let differing = (0..u.n_attributes())
        .filter(|&a| {
            let mut values: Vec<u64> = q3
                .iter()
                .filter_map(|p| p.bits[a])
                .map(f64::to_bits)
                .collect();
            values.sort();
            values.dedup();
            values.len() > 1
        })
        .count();
    check(differing >= 1, || {
        "the probe's bits are identical in every group".into()
    })?;
    Ok(format!(
        "every one of {groups} groups has at least {varied_in_every_group} attributes with variance > 0; the probe differs across {} groups on {differing} attributes",
        q3.len()
    ))
}

fn q4_efficiency() -> Outcome {
    let (outcome, elapsed) = default_bench().as_ref().map_err(Clone::clone)?;
    let report = outcome.q4.as_ref().ok_or("q4 did not run")?;
    let rates: Vec<f64> = report.summary.iter().map(|s| s.rate).collect();
    check(rates == [0.2, 0.4, 0.6, 0.8], || {
        format!("missing rates {rates:?}")
    })?;
    let mut parts = Vec::new();
    for s in &report.summary {
        check(s.objects == 100, || {
            format!("S={}: {} objects", s.rate, s.objects)
        })?;
        check(
            s.titf_mean_acquisitions < s.random_mean_acquisitions,
            || {
                format!(
                    "S={}: titf {} >= random {}",
                    s.rate, s.titf_mean_acquisitions, s.random_mean_acquisitions
                )
            },
        )?;
        parts.push(format!(
            "S={:.0}% {:.3}<{:.3}",
            100.0 * s.rate,
            s.titf_mean_acquisitions,
            s.random_mean_acquisitions
        ));
    }
    let aggregate = report.aggregate_reduction();
    check(aggregate >= 0.15, || {
        format!("aggregate reduction {:.1}% < 15%", 100.0 * aggregate)
    })?;
    check(*elapsed < Duration::from_secs(300), || {
        format!("benchmark took {elapsed:?}")
    })?;
    Ok(format!(
        "{}; aggregate reduction {:.1}% (pooled {:.1}%), full bench {:.1}s",
        parts.join(", "),
        100.0 * aggregate,
        100.0 * report.pooled_reduction(),
        elapsed.as_secs_f64()
    ))
}

fn entropy_convergence() -> Outcome {
    let u = Arc::new(generate_universe(&GeneratorConfig::default()).map_err(|e| e.to_string())?);
    let targets = sample_objects(&u, 1000, derive_seed(2024, &[7])).map_err(|e| e.to_string())?;
    let options = TraceOptions::default();
    let mut identified = 0;
    let mut traces = 0;
    for (i, &t) in targets.iter().enumerate() {
        let titf = run_titf(&u, t, ObservationSet::new(), &options).map_err(|e| e.to_string())?;
        let random = run_random_baseline(&u, t, ObservationSet::new(), i as u64, &options)
            .map_err(|e| e.to_string())?;
        for result in [titf, random] {
            let h: Vec<f64> = result.entropy_history.iter().map(|b| b.value()).collect();
            check(h.windows(2).all(|w| w[1] <= w[0]), || {
                format!("object {t}: entropy rose in {h:?}")
            })?;
            if result.status == Status::Identified {
                check(h.last() == Some(&0.0), || {
                    format!("object {t}: identified but ends at {:?}", h.last())
                })?;
                identified += 1;
            }
            traces += 1;
        }
    }
    Ok(format!("{traces} traces over 1000 objects (greedy and random order), {identified} identified, all ending at 0 bits"))
}

fn replay_equivalence() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = ServiceConfig::new(dir.path());
    // Repeated rows and constant columns leave some sessions ambiguous.
    let mut cardinalities = vec![2; 9];
    cardinalities.extend([3, 3]);
    cardinalities.extend([1; 9]);
    let shape = GeneratorConfig {
        n_objects: 1500,
        n_attributes: 20,
        cardinalities,
        unique: false,
        ..Default::default()
    };
    let u = generate_universe(&shape).map_err(|e| e.to_string())?;
    let names: Vec<String> = u.schema().iter().map(|a| a.name.clone()).collect();
    let (state, _) = ServiceState::open(&config).map_err(|e| e.to_string())?;
    let dataset = state
        .upload_dataset(Some("replay".into()), u.to_csv_string().as_bytes())
        .map_err(|e| e.to_string())?
        .0;

    let mut rng = ChaCha8Rng::seed_from_u64(0xAE9);
    let mut ids = Vec::new();
    let mut mutations = 0;
    let mut deleted = Vec::new();
    while ids.len() < 100 {
        let target = rng.gen_range(0..u.n_objects());
        let value_of = |a: usize| {
            u.schema()
                .attribute(a)
                .unwrap()
                .value_name(u.cell(target, a))
                .to_string()
        };
        let mut attrs: Vec<usize> = (0..u.n_attributes()).collect();
        for i in (1..attrs.len()).rev() {
            attrs.swap(i, rng.gen_range(0..=i));
        }
        let n_known = rng.gen_range(0..3);
        let known = attrs[..n_known]
            .iter()
            .map(|&a| {
                KnownEntry::Pair(NamedObservation {
                    attribute: names[a].clone(),
                    value: value_of(a),
                })
            })
            .collect();
        let literal = rng.gen_bool(0.3);
        let unavailable_rate = if rng.gen_bool(0.3) { 0.8 } else { 0.2 };
        let view = state
            .create_session(CreateSession {
                dataset_id: dataset.dataset_id.clone(),
                known,
                literal,
            })
            .map_err(|e| e.to_string())?;
        let id = view.session_id.clone();
        let mut revision = 0;
        for &a in &attrs[n_known..] {
            if rng.gen_bool(0.05) {
                break;
            }
            let result = if rng.gen_bool(unavailable_rate) {
                state.mark_unavailable(
                    &id,
                    PostUnavailable {
                        attribute: names[a].clone(),
                        expected_revision: revision,
                    },
                )
            } else {
                let req = PostObservation {
                    attribute: names[a].clone(),
                    value: value_of(a),
                    expected_revision: revision,
                };
                state.observe(&id, req)
            };
            match result {
                Ok(v) => {
                    revision = v.revision;
                    mutations += 1;
                }
                Err(_) => break,
            }
            if rng.gen_bool(0.1) {
                let stale = PostObservation {
                    attribute: names[a].clone(),
                    value: value_of(a),
                    expected_revision: 0,
                };
                if revision > 0 {
                    check(state.observe(&id, stale).is_err(), || {
                        "stale revision accepted".into()
                    })?;
                }
            }
        }
        if rng.gen_bool(0.05) {
            state.delete_session(&id).map_err(|e| e.to_string())?;
            deleted.push(id);
        } else {
            ids.push(id);
        }
    }

    let live: Vec<_> = ids
        .iter()
        .map(|id| state.session(id))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    for view in &live {
        let replayed = state
            .replay_from_log(&view.session_id)
            .map_err(|e| e.to_string())?;
        check(&replayed == view, || {
            format!("session {} differs from its log", view.session_id)
        })?;
    }
    drop(state);
    let (reopened, report) = ServiceState::open(&config).map_err(|e| e.to_string())?;
    check(report.skipped.is_empty(), || {
        format!("skipped on reload: {:?}", report.skipped)
    })?;
    check(report.sessions == 100, || {
        format!("{} sessions reloaded", report.sessions)
    })?;
    for view in &live {
        let after = reopened
            .session(&view.session_id)
            .map_err(|e| e.to_string())?;
        check(&after == view, || {
            format!("session {} changed across restart", view.session_id)
        })?;
    }
    for id in &deleted {
        check(reopened.session(id).is_err(), || {
            format!("deleted session {id} came back")
        })?;
    }
    let count = |s: Status| live.iter().filter(|v| v.status == s).count();
    let snapshotted = live.iter().filter(|v| v.revision >= 16).count();
    Ok(format!(
        "100 sessions ({mutations} mutations; {} identified, {} ambiguous, {} active; {snapshotted} past a snapshot; {} deleted) equal after replay and restart",
        count(Status::Identified),
        count(Status::Ambiguous),
        count(Status::Active),
        deleted.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("chain-rule equivalence", chain_rule),
        ("entropy equality H0 - H = I", entropy_equality),
        ("core-set soundness", coreset_soundness),
        (
            "core-set multiplicity across search spaces",
            q1_multiplicity,
        ),
        (
            "discriminability varies across objects and spaces",
            q2_q3_variation,
        ),
        ("tracing efficiency against random order", q4_efficiency),
        ("entropy convergence", entropy_convergence),
        ("replay equivalence", replay_equivalence),
    ];
    let mut failed = 0;
    for (name, criterion) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(criterion)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} ({secs:.1}s): {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL {name} ({secs:.1}s): {reason}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
