mod common;

use std::path::Path;

use agecomp::io::{
    emit_plot, load_basis, load_models, load_ppm, load_schedule_csv, parse_schedule_csv,
    write_basis, write_models, write_ppm, write_schedule_csv, PlotLabels, PpmFormat, RgbImage,
    Series, SeriesStyle,
};
use agecomp::regress::ols_fit;
use agecomp::schedule::{build_basis, smooth_matrix};
use agecomp::Error;

use common::{am, data_path};

#[test]
fn mortality_scatter_has_one_marker_per_cell() {
    let a = am();
    let s = smooth_matrix(&a, 2).unwrap();
    let series = Series::new(
        "fitted vs observed",
        a.data.as_slice().to_vec(),
        s.data.as_slice().to_vec(),
        SeriesStyle::Scatter,
    );
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scatter.svg");
    let labels = PlotLabels {
        title: "log mortality".into(),
        x: "observed".into(),
        y: "fitted".into(),
    };
    emit_plot(&[series], &labels, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    let markers = doc
        .descendants()
        .filter(|n| n.has_tag_name("circle") && n.attribute("class") == Some("marker"))
        .count();
    assert_eq!(markers, 722);
    let legend = doc
        .descendants()
        .filter(|n| n.attribute("class") == Some("legend-entry"))
        .count();
    assert_eq!(legend, 1);
}

#[test]
fn schedule_csv_round_trips() {
    let a = load_schedule_csv(&data_path("mx_female.csv"), false).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("copy.csv");
    write_schedule_csv(std::fs::File::create(&path).unwrap(), &a).unwrap();
    assert_eq!(load_schedule_csv(&path, false).unwrap(), a);
}

#[test]
fn basis_and_models_round_trip_through_files() {
    let basis = build_basis(&am(), 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("basis.json");
    write_basis(std::fs::File::create(&path).unwrap(), &basis).unwrap();
    assert_eq!(load_basis(&path).unwrap(), basis);

    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    let m = ols_fit(&[1.1, 1.9, 3.2, 3.9, 5.1], &[("x", &x)], true).unwrap();
    let path = dir.path().join("models.json");
    write_models(std::fs::File::create(&path).unwrap(), std::slice::from_ref(&m)).unwrap();
    assert_eq!(load_models(&path).unwrap(), vec![m]);
}

#[test]
fn ppm_files_round_trip() {
    let pixels = (0..12u8).map(|i| [i, 20 * i, 255 - i]).collect();
    let img = RgbImage::new(4, 3, pixels).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for (name, fmt) in [("a.ppm", PpmFormat::Ascii), ("b.ppm", PpmFormat::Binary)] {
        let path = dir.path().join(name);
        write_ppm(std::fs::File::create(&path).unwrap(), &img, fmt).unwrap();
        assert_eq!(load_ppm(&path).unwrap(), img);
    }
}

fn parse(src: &str, log: bool) -> agecomp::Result<agecomp::schedule::ScheduleMatrix> {
    parse_schedule_csv(src.as_bytes(), Path::new("in.csv"), log)
}

#[test]
fn single_schedule_csv() {
    let a = parse("age,2001\n0,0.1\n1-4,0.2\n", false).unwrap();
    assert_eq!((a.groups(), a.schedules()), (2, 1));
}

#[test]
fn bad_cells_are_located() {
    match parse("age,2001,2002\n0,0.1,0.2\n1-4,abc,0.3\n", false) {
        Err(Error::Parse { row, col, .. }) => assert_eq!((row, col), (3, 2)),
        other => panic!("{other:?}"),
    }
    assert!(parse("age,2001,2002\n0,0.1\n", false).is_err());
    assert!(parse("year,2001\n0,0.1\n", false).is_err());
    match parse("age,2001\n0,0.0\n", true) {
        Err(Error::Parse { row, col, .. }) => assert_eq!((row, col), (2, 2)),
        other => panic!("{other:?}"),
    }
    assert!(parse("age,2001\n0,0.0\n", false).is_ok());
}
