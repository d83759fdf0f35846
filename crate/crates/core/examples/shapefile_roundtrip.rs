//! Writes a polygon shapefile, reads it back and converts it to spill JSON.

use spillnet::geo::{ellipse_polygon, LonLat};
use spillnet::ingest::{observations_from_shapefiles, parse_shapefile, parse_spill_json, write_shapefile, write_spill_json, ShapefileRecord};
use std::collections::BTreeMap;

fn main() {
    let day1 = ellipse_polygon(LonLat::new(-88.39, 28.74), 40.0, 1.5, 0.3, 48).unwrap();
    let day2 = ellipse_polygon(LonLat::new(-88.35, 28.76), 65.0, 1.8, 0.4, 48).unwrap();
    let files: Vec<(String, Vec<u8>)> = [("day1.shp", &day1), ("day2.shp", &day2)]
        .iter()
        .map(|(name, poly)| (name.to_string(), write_shapefile(&[ShapefileRecord::from_polygon(1, poly)])))
        .collect();
    for (name, bytes) in &files {
        let records = parse_shapefile(bytes).unwrap();
        println!("{name}: {} bytes, {} record(s), {} point(s)", bytes.len(), records.len(), records[0].points.len());
    }

    let manifest: BTreeMap<String, i64> =
        [("day1.shp".to_string(), 1_271_980_800), ("day2.shp".to_string(), 1_272_067_200)].into();
    let obs = observations_from_shapefiles("demo", &files, &manifest).unwrap();
    let text = write_spill_json("demo", &obs);
    let back = parse_spill_json(&text).unwrap();
    assert_eq!(back, obs);
    println!("spill JSON round trip ok ({} observations, {} bytes)", back.len(), text.len());

    let mut broken = files[0].1.clone();
    broken[3] ^= 0xff;
    println!("corrupted magic: {}", parse_shapefile(&broken).unwrap_err());
    println!("truncated: {}", parse_shapefile(&files[0].1[..60]).unwrap_err());
}
