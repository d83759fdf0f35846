//! Synthetic spills, their feature vectors and the windows cut from them.

use spillnet::features::{build_sequences, extract_series, generate_scenario, ScaleClass, FEATURE_NAMES};

fn main() {
    for kind in 1..=5 {
        let data = generate_scenario(kind, 7, 48, 6).unwrap();
        let areas: Vec<String> = data
            .iter()
            .map(|(o, _)| format!("{:.1}", spillnet::geo::area_km2(&o.boundary)))
            .collect();
        println!("scenario {kind}: areas every 6 h = [{}]", areas.join(", "));
    }

    let data = generate_scenario(2, 7, 72, 1).unwrap();
    let obs: Vec<_> = data.iter().map(|(o, _)| o.clone()).collect();
    let series = extract_series(&obs, |t| data.iter().find(|(_, e)| e.valid_time == t).unwrap().1).unwrap();
    let (_, last) = series.last().unwrap();
    for (name, v) in FEATURE_NAMES.iter().zip(last.as_slice()) {
        println!("  {name:>20} {v:>12.5}");
    }
    let seqs = build_sequences(&series, ScaleClass::Short).unwrap();
    let complete = seqs.iter().filter(|s| s.targets_complete()).count();
    println!("{} windows of {} steps, {complete} with every horizon observed", seqs.len(), seqs[0].window.len());
}
