use urbangan::corpus::{build_toy_corpus, toy_specs, Pipeline, ToyCitySpec};
use urbangan::morphology::{find_peaks, RadialProfile};
use urbangan::render::{encode, map_scene, profile_scene, report_scene, Format};
use urbangan::stats::{compare_report, CompareConfig};
use urbangan::CityMap;

#[test]
fn empty_map_renders_black() {
    let m = CityMap::constant(16, 750.0, 0.0).unwrap();
    let img = map_scene(&m).rasterize();
    assert!(img.pixels().all(|p| p.0 == [0, 0, 0]));
    let full = map_scene(&CityMap::constant(16, 750.0, 1.0).unwrap()).rasterize();
    assert!(full.pixels().all(|p| p.0 == [255, 255, 255]));
}

#[test]
fn profile_plot_marks_each_peak() {
    let mut values = vec![0.1; 23];
    values[0] = 1.0;
    values[10] = 0.6;
    values[20] = 0.3;
    let p = RadialProfile {
        ring_width_km: 1.0,
        counts: vec![1; 23],
        max_distance_km: 23.0,
        values,
        center: (0.0, 0.0),
        pixel_size: 750.0,
    };
    let peaks = find_peaks(&p, 0.5, 5.0).unwrap();
    let svg = profile_scene(&p, Some(&peaks)).to_svg();
    assert_eq!(svg.matches("class=\"peak\"").count(), 2);
    assert!(svg.starts_with("<svg"));
    assert_eq!(profile_scene(&p, None).to_svg().matches("class=\"peak\"").count(), 0);
}

#[test]
fn renders_are_byte_deterministic() {
    let corpus = build_toy_corpus(&toy_specs(&[ToyCitySpec::polycentric(3, 20.0, 0)], 20, 1), &Pipeline::desk()).unwrap();
    let report = compare_report(&corpus, &corpus, &CompareConfig::default()).unwrap();
    for format in [Format::Svg, Format::Png] {
        let a = encode(&report_scene(&report), format);
        let b = encode(&report_scene(&report), format);
        assert_eq!(a, b);
        let m = encode(&map_scene(&corpus.maps()[0]), format);
        assert_eq!(m, encode(&map_scene(&corpus.maps()[0]), format));
    }
    assert!(encode(&map_scene(&corpus.maps()[0]), Format::Png).starts_with(b"\x89PNG"));
    assert!(Format::from_path(std::path::Path::new("x.jpg")).is_err());
}
