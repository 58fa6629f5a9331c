//! One check per acceptance criterion, each printing a PASS/FAIL line.
//!
//! Lines go straight to stdout so they show up without `--nocapture`.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use common::{catalog, fixture, mock, project, snapshot};
use safer::architecture::{extract_catalog, parse_opl};
use safer::classify::{classify, write_table_csv, ClassificationPrompt};
use safer::coverage::{build_matrix, verdict};
use safer::orchestrator::load_config;
use safer::pairwise::{cluster_by_function, plan_contradictions, plan_duplicates, score, PromptVersion};
use safer::report::{emit_report_set, metrics_summary, ReportInputs, Scores};
use safer::requirements::{chunk, load_requirements};
use safer::{ClassifiedRequirement, GoldPairs, MetricsThresholds, PairKind, Runner, TaskStatus, Verdict};

type Check = Result<(), String>;

fn criterion(n: u8, title: &str, check: impl FnOnce() -> Check) {
    let result = check();
    let line = match &result {
        Ok(()) => format!("criterion {n} ({title}): PASS"),
        Err(e) => format!("criterion {n} ({title}): FAIL: {e}"),
    };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
    if let Err(e) = result {
        panic!("criterion {n}: {e}");
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn classify_file(csv: &str, mock_dir: &str, in_flight: usize) -> (Vec<String>, safer::classify::JoinOutcome) {
    let reqs = load_requirements(fixture(csv), "ReqID", &["Requirements".to_string()]).unwrap();
    let chunks = chunk(&reqs, 10, -1).unwrap();
    let mut prompt = ClassificationPrompt::new("Drone Safety Requirements");
    prompt.data_columns = vec!["Requirements".into()];
    let gateway = mock(mock_dir).with_max_in_flight(in_flight);
    classify(&chunks, &catalog(), &gateway, &prompt).unwrap()
}

fn project_table() -> Vec<ClassifiedRequirement> {
    classify_file("project/data/safety_requirements.csv", "project/mock", 1).1.rows
}

#[test]
fn criterion_1_function_type_matrix() {
    criterion(1, "function-type matrix verdicts", || {
        let expected = [
            ("DM", 18, 2, Verdict::Complete),
            ("EN", 9, 1, Verdict::Complete),
            ("NAV", 12, 0, Verdict::Missing),
            ("PEA", 14, 0, Verdict::Missing),
            ("PTC", 6, 1, Verdict::Complete),
            ("RD", 3, 0, Verdict::Missing),
            ("STR", 2, 1, Verdict::Missing),
            ("SUP", 15, 1, Verdict::Complete),
            ("TD", 6, 0, Verdict::Missing),
            ("_OF_", 16, 0, Verdict::Missing),
        ];
        let m = build_matrix(&project_table(), &catalog()).map_err(|e| e.to_string())?;
        let got: Vec<_> = m.rows.iter().map(|r| (r.function.as_str(), r.n_func, r.n_prob, r.verdict)).collect();
        ensure(got == expected, || format!("matrix {got:?}"))
    });
}

#[test]
fn criterion_2_sufficiency_oracle() {
    criterion(2, "sufficiency rule over 24 cases", || {
        // Oracle: build the requirement multiset and count it.
        let oracle = |f: usize, p: usize| {
            let reqs: Vec<char> = std::iter::repeat_n('F', f).chain(std::iter::repeat_n('P', p)).collect();
            reqs.iter().filter(|&&c| c == 'F').count() >= 3 && reqs.contains(&'P')
        };
        let mut cases = 0;
        for f in 0..=5 {
            for p in 0..=3 {
                cases += 1;
                let want = if oracle(f, p) { Verdict::Complete } else { Verdict::Missing };
                ensure(verdict(f, p) == want, || format!("verdict({f}, {p}) = {:?}", verdict(f, p)))?;
            }
        }
        ensure(cases == 24, || format!("{cases} cases"))
    });
}

#[test]
fn criterion_3_sample_replay() {
    criterion(3, "sample classification replay", || {
        let expected = [
            ("1000", "NAV", "FUNC", "90"),
            ("1001", "NAV", "FUNC", "85"),
            ("1002", "EN", "PROB", "80"),
            ("1003", "EN", "_OT_", "70"),
            ("1004", "TD", "FUNC", "85"),
            ("1005", "TD", "FUNC", "90"),
            ("1006", "_OF_", "_OT_", "75"),
            ("1007", "SUP", "FUNC", "85"),
            ("1008", "TD", "FUNC", "80"),
            ("1009", "TD", "PROB", "90"),
        ];
        let (_, joined) = classify_file("sample/requirements.csv", "sample/mock", 1);
        ensure(joined.quarantine.is_empty(), || format!("quarantine {:?}", joined.quarantine))?;
        let out = tempfile::tempdir().unwrap();
        let inputs = ReportInputs { classification: Some(joined.rows), catalog: Some(catalog()), ..Default::default() };
        emit_report_set(&inputs, out.path(), "sample").map_err(|e| e.to_string())?;

        let mut reader = csv::Reader::from_path(out.path().join("classification_sample.csv")).unwrap();
        let headers = reader.headers().unwrap().clone();
        let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
        let (id, func, ty, conf) = (col("ReqID"), col("Function"), col("Type"), col("Confidence"));
        let rows: Vec<(String, String, String, String)> = reader
            .records()
            .map(|r| {
                let r = r.unwrap();
                (r[id].to_string(), r[func].to_string(), r[ty].to_string(), r[conf].to_string())
            })
            .collect();
        let want: Vec<_> =
            expected.iter().map(|(a, b, c, d)| (a.to_string(), b.to_string(), c.to_string(), d.to_string())).collect();
        ensure(rows == want, || format!("report rows {rows:?}"))
    });
}

#[test]
fn criterion_4_pair_scoring() {
    criterion(4, "duplicate and contradiction scoring", || {
        let table = project_table();
        let clusters = cluster_by_function(&table, &catalog());
        let gateway = mock("project/mock");
        let dup_gold = GoldPairs::load_csv(fixture("project/data/duplicate_pairs.csv"), PairKind::Duplicate).unwrap();
        let con_gold =
            GoldPairs::load_csv(fixture("project/data/contradiction_pairs.csv"), PairKind::Contradiction).unwrap();

        let v1 = plan_duplicates(&clusters, PromptVersion::V1).execute(&gateway).map_err(|e| e.to_string())?;
        let s1 = score(&v1.findings, &dup_gold).unwrap();
        ensure(s1.detected_true == 3 && s1.gold_total == 8, || format!("{s1:?}"))?;
        ensure(format!("{:.2}", s1.rate) == "37.50" && !s1.passed, || format!("{s1:?}"))?;

        let v3 = plan_duplicates(&clusters, PromptVersion::V3).execute(&gateway).map_err(|e| e.to_string())?;
        let s3 = score(&v3.findings, &dup_gold).unwrap();
        ensure(s3.detected_true == 7 && format!("{:.2}", s3.rate) == "87.50" && s3.passed, || format!("{s3:?}"))?;

        let con = plan_contradictions(&clusters, &v3.findings).execute(&gateway).map_err(|e| e.to_string())?;
        let sc = score(&con.findings, &con_gold).unwrap();
        ensure(sc.detected_true == 7 && sc.gold_total == 9 && sc.false_positive == 1, || format!("{sc:?}"))?;
        ensure((sc.rate - 77.78).abs() <= 0.05 && (sc.rate - 77.8).abs() <= 0.05, || format!("rate {}", sc.rate))
    });
}

#[test]
fn criterion_5_opl_corpus() {
    criterion(5, "OPL corpus and drone aliases", || {
        let text = std::fs::read_to_string(fixture("meta_model.opl")).unwrap();
        let parsed = parse_opl(&text).map_err(|e| format!("meta model: {e}"))?;
        // Oracle: names of the declaration sentences, read off the raw text.
        let declared: BTreeSet<String> = text
            .lines()
            .map(|l| l.trim_start_matches(|c: char| c.is_ascii_digit() || c == '.' || c == ' '))
            .filter(|l| l.ends_with(" object.") || l.ends_with(" process."))
            .filter_map(|l| l.find(" is a").map(|i| l[..i].replace("**", "")))
            .map(|n| n.split(" of ").next().unwrap().trim().to_string())
            .collect();
        let graph = &parsed.value;
        let missing: Vec<_> = declared.iter().filter(|n| graph.thing(n).is_none()).collect();
        ensure(missing.is_empty(), || format!("declared but not parsed: {missing:?}"))?;
        ensure(graph.things().len() == declared.len(), || {
            format!("{} things parsed, {} declared", graph.things().len(), declared.len())
        })?;
        let unresolved: Vec<_> = parsed.warnings.iter().filter(|w| w.contains("unresolved")).collect();
        ensure(unresolved.is_empty(), || format!("{unresolved:?}"))?;

        let drone = parse_opl(&std::fs::read_to_string(fixture("drone.opl")).unwrap()).map_err(|e| e.to_string())?;
        let cat = extract_catalog(&drone.value, None).map_err(|e| e.to_string())?.value;
        let got: BTreeSet<&str> = cat.aliases().collect();
        let want: BTreeSet<&str> = ["NAV", "EN", "TD", "RD", "PEA", "_OF_", "AF", "CTRL", "MNTR"].into();
        ensure(got == want, || format!("aliases {got:?}"))
    });
}

#[test]
fn criterion_6_delta_semantics() {
    criterion(6, "delta skip and force", || {
        let dir = project();
        let cfg = load_config(dir.path().join("params.json")).map_err(|e| e.to_string())?;
        let gateway = cfg.llm.gateway(None).map_err(|e| e.to_string())?;
        let results = dir.path().join("results");

        let first = Runner::new(&gateway).version_tag(Some("t1".into())).run_all(&cfg.tasks);
        ensure(first.iter().all(|o| o.status == TaskStatus::Executed), || format!("{first:?}"))?;
        let calls = gateway.calls();
        ensure(calls > 0, || "first run made no calls".into())?;
        let before = snapshot(&results);

        let second = Runner::new(&gateway).version_tag(Some("t1".into())).run_all(&cfg.tasks);
        ensure(second.iter().all(|o| o.status == TaskStatus::SkippedDeltaHit), || format!("{second:?}"))?;
        ensure(gateway.calls() == calls, || format!("{} backend call(s) on rerun", gateway.calls() - calls))?;
        ensure(snapshot(&results) == before, || "outputs changed on rerun".into())?;

        let forced = Runner::new(&gateway).version_tag(Some("t1".into())).force(true).run_all(&cfg.tasks);
        ensure(forced.iter().all(|o| o.status == TaskStatus::Executed), || format!("{forced:?}"))?;
        ensure(gateway.calls() == 2 * calls, || format!("forced run made {} call(s)", gateway.calls() - calls))?;
        ensure(snapshot(&results) == before, || "forced rerun under mock is not reproducible".into())
    });
}

#[test]
fn criterion_7_determinism_and_totality() {
    criterion(7, "determinism, totality and quarantine", || {
        let inputs = load_requirements(
            fixture("project/data/safety_requirements.csv"),
            "ReqID",
            &["Requirements".to_string()],
        )
        .unwrap();
        ensure(inputs.len() == 110 && chunk(&inputs, 10, -1).unwrap().len() == 11, || "expected 110 rows in 11 chunks".into())?;

        let mut tables = Vec::new();
        for in_flight in [1, 4, 11] {
            let (replies, joined) = classify_file("project/data/safety_requirements.csv", "project/mock", in_flight);
            ensure(replies.len() == 11, || format!("{} replies", replies.len()))?;
            let mut counts: BTreeMap<&str, usize> = inputs.iter().map(|r| (r.req_id.as_str(), 0)).collect();
            for row in &joined.rows {
                *counts.get_mut(row.req_id.as_str()).ok_or_else(|| format!("unknown id {} joined", row.req_id))? += 1;
            }
            ensure(counts.values().all(|&n| n == 1), || "an input id is missing or repeated".into())?;
            let quarantined: Vec<_> = joined.quarantine.iter().filter_map(|q| q.req_id.as_deref()).collect();
            ensure(quarantined == ["2999"], || format!("quarantine {quarantined:?}"))?;
            let mut buf = Vec::new();
            write_table_csv(&joined.rows, &mut buf).unwrap();
            tables.push(buf);
        }
        ensure(tables.windows(2).all(|w| w[0] == w[1]), || "joined tables differ between runs".into())
    });
}

#[test]
fn criterion_8_metrics_gate() {
    criterion(8, "metrics gate", || {
        let scores = Scores { classification: Some(82.72), stability: Some(71.43), ..Default::default() };
        let rows = metrics_summary(&scores, &MetricsThresholds::default());
        let got: Vec<_> = rows.iter().map(|r| (r.metric.as_str(), r.passed)).collect();
        ensure(got == [("classification", true), ("stability", false)], || format!("{got:?}"))?;
        let at_threshold = Scores { classification: Some(80.0), ..Default::default() };
        ensure(!metrics_summary(&at_threshold, &MetricsThresholds::default())[0].passed, || "80.00 passed".into())
    });
}
