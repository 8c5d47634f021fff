use hydrosim::bridge::{heatmap, Parameter, SampleFilter, SampleRecord, SampleStore, StoreError};
use hydrosim::sim::{aggregate_table4, SampleRow};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
struct Row {
    label: String,
    fill_time_s: f64,
    volume_ml: f64,
    loss_pct: f64,
    temperature: Option<f64>,
    ph: Option<f64>,
    tds: Option<f64>,
    ec: Option<f64>,
    lat: f64,
    lon: f64,
}

#[derive(Debug, Deserialize)]
struct Printed {
    #[serde(default)]
    group: String,
    fill_time_s: f64,
    time_error_pct: f64,
    volume_ml: f64,
    loss_pct: f64,
    temperature: f64,
    ph: f64,
    tds: f64,
    ec: f64,
}

#[derive(Debug, Deserialize)]
struct Fixture {
    capacity_ml: f64,
    baseline_s: f64,
    rows: Vec<Row>,
    printed_groups: Vec<Printed>,
    printed_global: Printed,
}

fn fixture() -> Fixture {
    serde_json::from_str(include_str!("fixtures/table4.json")).unwrap()
}

fn sample_rows(f: &Fixture) -> Vec<SampleRow> {
    f.rows
        .iter()
        .map(|r| SampleRow {
            label: r.label.clone(),
            fill_time_s: r.fill_time_s,
            volume_ml: r.volume_ml,
            temperature: r.temperature,
            ph: r.ph,
            tds: r.tds,
            ec: r.ec,
        })
        .collect()
}

fn r2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Straight loops over the rows, three syringes per group in file order.
fn oracle(f: &Fixture) -> (Vec<[f64; 8]>, [f64; 8]) {
    let mut groups = Vec::new();
    for chunk in f.rows.chunks(3) {
        let n = chunk.len() as f64;
        let mut acc = [0.0; 8];
        for r in chunk {
            acc[0] += r.fill_time_s / n;
            acc[2] += r.volume_ml / n;
            acc[3] += r2(100.0 * (f.capacity_ml - r.volume_ml) / f.capacity_ml) / n;
            acc[4] += r.temperature.unwrap_or(0.0) / n;
            acc[5] += r.ph.unwrap_or(0.0) / n;
            acc[6] += r.tds.unwrap_or(0.0) / n;
            acc[7] += r.ec.unwrap_or(0.0) / n;
        }
        acc[1] = 100.0 * (acc[0] - f.baseline_s) / f.baseline_s;
        groups.push(acc);
    }
    let mut global = [0.0; 8];
    let g = groups.len() as f64;
    for acc in &groups {
        global[0] += acc[0] / g;
        global[1] += acc[1] / g;
    }
    let n = f.rows.len() as f64;
    for r in &f.rows {
        global[2] += r.volume_ml / n;
        global[3] += r2(100.0 * (f.capacity_ml - r.volume_ml) / f.capacity_ml) / n;
    }
    let present = |pick: fn(&Row) -> Option<f64>| {
        let v: Vec<f64> = f.rows.iter().filter_map(pick).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    global[4] = present(|r| r.temperature);
    global[5] = present(|r| r.ph);
    global[6] = present(|r| r.tds);
    global[7] = present(|r| r.ec);
    (groups, global)
}

fn as_array(p: &Printed) -> [f64; 8] {
    [p.fill_time_s, p.time_error_pct, p.volume_ml, p.loss_pct, p.temperature, p.ph, p.tds, p.ec]
}

#[test]
fn per_syringe_loss_matches_the_printed_column() {
    let f = fixture();
    for r in &f.rows {
        assert_eq!(r2(100.0 * (f.capacity_ml - r.volume_ml) / f.capacity_ml), r.loss_pct, "{}", r.label);
    }
}

#[test]
fn aggregation_matches_an_independent_oracle() {
    let f = fixture();
    let t = aggregate_table4(&sample_rows(&f), f.capacity_ml, f.baseline_s).unwrap();
    let (groups, global) = oracle(&f);
    assert_eq!(t.groups.len(), groups.len());
    for (g, o) in t.groups.iter().zip(&groups) {
        let got = [g.fill_time_s, g.time_error_pct, g.volume_ml, g.loss_pct, g.temperature, g.ph, g.tds, g.ec];
        for (a, b) in got.iter().zip(o) {
            assert!((a - b).abs() < 1e-9, "{} {got:?} {o:?}", g.group);
        }
    }
    let g = &t.global;
    let got = [g.fill_time_s, g.time_error_pct, g.volume_ml, g.loss_pct, g.temperature, g.ph, g.tds, g.ec];
    for (a, b) in got.iter().zip(&global) {
        assert!((a - b).abs() < 1e-9, "{got:?} {global:?}");
    }
}

#[test]
fn aggregation_reproduces_the_printed_rows() {
    let f = fixture();
    let t = aggregate_table4(&sample_rows(&f), f.capacity_ml, f.baseline_s).unwrap();
    for (g, p) in t.groups.iter().zip(&f.printed_groups) {
        assert_eq!(g.group, p.group);
        let got = [g.fill_time_s, g.time_error_pct, g.volume_ml, g.loss_pct, g.temperature, g.ph, g.tds, g.ec];
        for (k, (a, b)) in got.iter().zip(as_array(p)).enumerate() {
            if g.group == "B2" && k == 5 {
                // the printed B2 pH disagrees with its own three rows
                assert_eq!(r2(*a), 7.75);
                assert_eq!(b, 7.84);
                continue;
            }
            assert!((r2(*a) - b).abs() < 0.011, "{} column {k}: {a} vs {b}", g.group);
        }
    }
    let g = &t.global;
    let got = [g.fill_time_s, g.time_error_pct, g.volume_ml, g.loss_pct, g.temperature, g.ph, g.tds, g.ec];
    for (k, (a, b)) in got.iter().zip(as_array(&f.printed_global)).enumerate() {
        assert!((r2(*a) - b).abs() < 0.011, "global column {k}: {a} vs {b}");
    }
}

fn records(f: &Fixture) -> Vec<SampleRecord> {
    f.rows
        .iter()
        .enumerate()
        .map(|(i, r)| SampleRecord {
            label: r.label.clone(),
            mission: "lagoon".into(),
            volume: r.volume_ml,
            t_start: 200.0 * i as f64,
            t_end: 200.0 * i as f64 + r.fill_time_s,
            lat: r.lat,
            lon: r.lon,
            temperature: r.temperature,
            ph: r.ph,
            tds: r.tds,
            ec: r.ec,
        })
        .collect()
}

#[test]
fn store_holds_every_row_and_reproduces_the_global_ph() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("samples.jsonl");
    {
        let mut store = SampleStore::open(&path).unwrap();
        for r in records(&f) {
            store.record_sample(r).unwrap();
        }
        let dup = records(&f).remove(4);
        assert_eq!(store.record_sample(dup.clone()), Err(StoreError::DuplicateLabel(dup.label)));
    }
    let store = SampleStore::open(&path).unwrap();
    let all = store.list(&SampleFilter { mission: Some("lagoon".into()), param: None });
    assert_eq!(all.len(), 24);
    let ph: Vec<f64> = all.iter().filter_map(|r| r.ph).collect();
    assert_eq!(r2(ph.iter().sum::<f64>() / ph.len() as f64), 7.62);
    let with_ec = store.list(&SampleFilter { mission: None, param: Some(Parameter::Ec) });
    assert_eq!(with_ec.len(), 23);
}

#[test]
fn tds_heatmap_stays_inside_the_measured_range() {
    let f = fixture();
    let recs = records(&f);
    for bin in [0.001, 0.0005, 0.0001, 0.00001] {
        let cells = heatmap(&recs, Parameter::Tds, bin).unwrap();
        assert!(!cells.is_empty());
        let counted: usize = cells.iter().map(|c| c.count).sum();
        assert_eq!(counted, recs.iter().filter(|r| r.tds.is_some()).count());
        for c in &cells {
            assert!((0.20 - 1e-12..=0.22 + 1e-12).contains(&c.mean), "bin {bin}: {c:?}");
            // the mean is recomputable from the records inside the cell
            let inside: Vec<f64> = recs
                .iter()
                .filter(|r| r.lat >= c.lat_min && r.lat < c.lat_max && r.lon >= c.lon_min && r.lon < c.lon_max)
                .filter_map(|r| r.tds)
                .collect();
            assert_eq!(inside.len(), c.count);
            assert!((inside.iter().sum::<f64>() / inside.len() as f64 - c.mean).abs() < 1e-12);
        }
    }
}
