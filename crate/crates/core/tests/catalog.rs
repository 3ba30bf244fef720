mod common;

use std::fs;

use cbir_core::catalog::{
    build_catalog, extract_features, Catalog, CatalogConfig, ColorMode, QueryMode, Rerank,
    MANIFEST_FILE, RECORDS_FILE, TREE_FILE,
};
use cbir_core::color::intensity_histogram;
use cbir_core::edge::{gaussian_blur3, gradient_magnitude, orientation_histogram, sobel};
use cbir_core::raster::Raster;
use cbir_core::texture::{cooccurrence, texture_stats, wavelet_signatures};
use cbir_core::Error;
use common::write_corpus;

#[test]
fn reopened_catalog_answers_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let images = tmp.path().join("img");
    write_corpus(&images, 20, 1);
    let report =
        build_catalog(&images, &tmp.path().join("cat"), &CatalogConfig::default()).unwrap();
    let reopened = Catalog::open(&tmp.path().join("cat")).unwrap();
    assert_eq!(reopened.records().len(), 20);

    let probe = Raster::open(images.join("img_004.png")).unwrap();
    for mode in [QueryMode::Knn { k: 5 }, QueryMode::Range { t: 2.0 }] {
        let a = report.catalog.query(&probe, mode).unwrap();
        let b = reopened.query(&probe, mode).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}

#[test]
fn save_writes_the_same_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let images = tmp.path().join("img");
    write_corpus(&images, 8, 2);
    let first = tmp.path().join("a");
    let copy = tmp.path().join("b");
    build_catalog(&images, &first, &CatalogConfig::default()).unwrap();
    Catalog::open(&first).unwrap().save(&copy).unwrap();
    for name in [MANIFEST_FILE, RECORDS_FILE, TREE_FILE] {
        assert_eq!(
            fs::read(first.join(name)).unwrap(),
            fs::read(copy.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn ids_follow_path_order_across_subdirectories() {
    let tmp = tempfile::tempdir().unwrap();
    let images = tmp.path().join("img");
    write_corpus(&images.join("b"), 2, 3);
    write_corpus(&images.join("a"), 2, 4);
    let report =
        build_catalog(&images, &tmp.path().join("cat"), &CatalogConfig::default()).unwrap();
    let paths: Vec<&str> = report
        .catalog
        .records()
        .iter()
        .map(|r| r.source_path.as_str())
        .collect();
    assert_eq!(
        paths,
        [
            "a/img_000.png",
            "a/img_001.png",
            "b/img_000.png",
            "b/img_001.png"
        ]
    );
}

#[test]
fn undecodable_files_are_skipped() {
    let tmp = tempfile::tempdir().unwrap();
    let images = tmp.path().join("img");
    write_corpus(&images, 3, 5);
    fs::write(images.join("notes.txt"), "not an image").unwrap();
    fs::write(images.join("broken.png"), [0x89, b'P', b'N', b'G', 0, 1, 2]).unwrap();
    let report =
        build_catalog(&images, &tmp.path().join("cat"), &CatalogConfig::default()).unwrap();
    assert_eq!(report.catalog.records().len(), 3);
    assert_eq!(report.skipped.len(), 2);
}

#[test]
fn empty_directory_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let images = tmp.path().join("img");
    fs::create_dir_all(&images).unwrap();
    fs::write(images.join("readme.md"), "# nothing here").unwrap();
    let err =
        build_catalog(&images, &tmp.path().join("cat"), &CatalogConfig::default()).unwrap_err();
    assert!(matches!(err, Error::EmptyCatalog(_)), "{err}");
}

#[test]
fn corrupted_catalogs_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let images = tmp.path().join("img");
    write_corpus(&images, 6, 6);
    let cat = tmp.path().join("cat");
    build_catalog(&images, &cat, &CatalogConfig::default()).unwrap();
    let manifest = fs::read_to_string(cat.join(MANIFEST_FILE)).unwrap();
    let tree = fs::read_to_string(cat.join(TREE_FILE)).unwrap();

    fs::write(
        cat.join(MANIFEST_FILE),
        manifest.replace("\"format_version\":1", "\"format_version\":99"),
    )
    .unwrap();
    assert!(matches!(Catalog::open(&cat), Err(Error::Format { .. })));

    fs::write(cat.join(MANIFEST_FILE), &manifest[..manifest.len() / 2]).unwrap();
    assert!(matches!(Catalog::open(&cat), Err(Error::Format { .. })));

    fs::write(cat.join(MANIFEST_FILE), &manifest).unwrap();
    let first_line = tree.lines().next().unwrap();
    fs::write(cat.join(TREE_FILE), format!("{first_line}\n")).unwrap();
    assert!(matches!(Catalog::open(&cat), Err(Error::Format { .. })));

    fs::write(cat.join(TREE_FILE), &tree).unwrap();
    fs::remove_file(cat.join(RECORDS_FILE)).unwrap();
    assert!(matches!(Catalog::open(&cat), Err(Error::Io { .. })));
}

#[test]
fn pipeline_matches_module_composition() {
    let img = Raster::gray_from_fn(64, 64, |x, _| if x < 32 { 40 } else { 200 }).unwrap();
    let config = CatalogConfig::default().extraction;
    let f = extract_features(&img, &config).unwrap();

    let big = img.resize(config.color_size, config.color_size).unwrap();
    let expected_color = intensity_histogram(&big).unwrap().frequencies();
    assert_eq!(f.color, expected_color);
    assert_eq!(f.color.iter().filter(|&&c| c > 0.0).count(), 2);

    let glcm = cooccurrence(&big, config.cooccurrence_levels, (1, 0)).unwrap();
    assert_eq!(f.texture, texture_stats(&glcm));
    assert_eq!(f.wavelet, wavelet_signatures(&big).unwrap());

    let small = img.resize(config.edge_size, config.edge_size).unwrap();
    let g = sobel(&gaussian_blur3(&small).unwrap()).unwrap();
    let o = orientation_histogram(&g, config.orientation_bins).unwrap();
    assert_eq!(f.orientation, o.normalized());
    // a dark-to-bright step along x points every gradient at angle 0
    assert!(f.orientation[0] > 0.999, "{:?}", &f.orientation[..3]);
    assert!(gradient_magnitude(&g).max() > 0.0);
}

#[test]
fn rgb_mode_and_reranking() {
    let tmp = tempfile::tempdir().unwrap();
    let images = tmp.path().join("img");
    write_corpus(&images, 10, 7);
    let mut config = CatalogConfig::default();
    config.extraction.color = ColorMode::Rgb {
        bins_per_channel: 4,
    };
    let report = build_catalog(&images, &tmp.path().join("cat"), &config).unwrap();
    let catalog = report.catalog;
    assert_eq!(catalog.records()[0].feature.color.len(), 64);

    let probe = Raster::open(images.join("img_003.png")).unwrap();
    let mut res = catalog.query(&probe, QueryMode::Knn { k: 4 }).unwrap();
    catalog
        .rerank(&probe, &mut res, Rerank::Intersection)
        .unwrap();
    assert_eq!(res.entries[0].id, 3);
    assert!((res.entries[0].rerank_score.unwrap() - 1.0).abs() < 1e-12);

    let mut res = catalog.query(&probe, QueryMode::Knn { k: 4 }).unwrap();
    catalog.rerank(&probe, &mut res, Rerank::Hausdorff).unwrap();
    assert_eq!(res.entries[0].id, 3);
    assert_eq!(res.entries[0].rerank_score, Some(0.0));
}
