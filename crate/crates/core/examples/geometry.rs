//! Shape descriptors and overlap of geodesic polygons.

use spillnet::evaluate::overlap_ratio;
use spillnet::geo::{self, ellipse_polygon, GeoPolygon, LonLat};

fn square(lon: f64, lat: f64, side: f64) -> GeoPolygon {
    GeoPolygon::from_exterior(vec![
        LonLat::new(lon, lat),
        LonLat::new(lon + side, lat),
        LonLat::new(lon + side, lat + side),
        LonLat::new(lon, lat + side),
    ])
    .unwrap()
}

fn main() {
    let sq = square(0.0, 0.0, 0.1);
    let d = geo::descriptors(&sq).unwrap();
    println!("0.1 deg equatorial square: {:.3} km2, perimeter {:.3} km", d.area_km2, d.perimeter_km);
    println!("  compactness {:.6} (pi/4 = {:.6})", d.compactness, std::f64::consts::FRAC_PI_4);

    let shifted = square(0.05, 0.0, 0.1);
    println!("IoU of half-overlapping squares: {:.4}", overlap_ratio(&sq, &shifted, 512).unwrap());

    let slick = ellipse_polygon(LonLat::new(-88.39, 28.74), 120.0, 2.5, 0.6, 64).unwrap();
    let d = geo::descriptors(&slick).unwrap();
    println!(
        "ellipse: area {:.2} km2, aspect {:.3}, compactness {:.3}, convexity {:.3}, orientation {:.3} rad",
        d.area_km2,
        d.aspect_ratio,
        d.compactness,
        d.convexity,
        d.orientation_sin2t.atan2(d.orientation_cos2t) / 2.0
    );
    println!("centroid {:.5}, {:.5}", d.centroid.lon, d.centroid.lat);
}
