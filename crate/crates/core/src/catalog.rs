//! End-to-end pipeline: feature extraction, catalog persistence, index build
//! and query by example.
//!
//! A catalog directory holds three UTF-8 files, each written atomically
//! (temp file + rename):
//!
//! * `manifest.json`: one JSON object with the format version, the full
//!   extraction and index configuration, its hash, the per-feature scale
//!   factors and the record count.
//! * `records.jsonl`: one [`FeatureRecord`] per line, ordered by id. Features
//!   are stored unscaled.
//! * `tree.jsonl`: the Antipole tree as a preorder node list, one node per
//!   line. An internal node's left child is the next line; its right child
//!   follows the left subtree. Nodes reference record ids.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::antipole::{AntipoleTree, Cluster, MetricPoint, Node, PointId, TreeParams};
use crate::color::{correlogram, intensity_histogram, rgb_histogram, Correlogram};
use crate::edge::{
    distance_histogram, distance_transform, edge_map, gaussian_blur3, gradient_magnitude,
    orientation_histogram, sobel, DistanceHistogram, EdgeMap,
};
use crate::error::{invalid, Error, Result};
use crate::raster::Raster;
use crate::similarity::{
    hausdorff, hist_intersection, CompositeMetric, FeatureVector, FeatureWeights, ScaleFactors,
};
use crate::texture::{cooccurrence, texture_stats, wavelet_signatures, TextureStats};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const TREE_FILE: &str = "tree.jsonl";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColorMode {
    /// 256-bin gray-level histogram.
    Intensity,
    /// Joint RGB histogram with `bins_per_channel³` bins.
    Rgb { bins_per_channel: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    /// Side of the square resample used for color, co-occurrence and wavelet features.
    pub color_size: usize,
    /// Side of the square resample used for edge features.
    pub edge_size: usize,
    pub color: ColorMode,
    pub cooccurrence_levels: usize,
    pub cooccurrence_offsets: Vec<(isize, isize)>,
    pub orientation_bins: usize,
    /// Fraction of the peak gradient magnitude an edge pixel must reach.
    pub edge_threshold: f64,
    pub correlogram_levels: usize,
    pub correlogram_distances: Vec<usize>,
    pub distance_bins: usize,
    pub distance_max: f64,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            color_size: 512,
            edge_size: 100,
            color: ColorMode::Intensity,
            cooccurrence_levels: 8,
            cooccurrence_offsets: vec![(1, 0)],
            orientation_bins: 36,
            edge_threshold: 0.5,
            correlogram_levels: 8,
            correlogram_distances: vec![1, 3, 5, 7],
            distance_bins: 16,
            distance_max: 16.0,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.color_size == 0 || self.color_size % 8 != 0 {
            return Err(invalid(format!(
                "color size must be a positive multiple of 8, got {}",
                self.color_size
            )));
        }
        if self.edge_size < 3 {
            return Err(invalid(format!(
                "edge size must be at least 3, got {}",
                self.edge_size
            )));
        }
        if self.cooccurrence_offsets.is_empty() {
            return Err(invalid("at least one co-occurrence offset is required"));
        }
        if let ColorMode::Rgb { bins_per_channel } = self.color {
            if !(2..=16).contains(&bins_per_channel) {
                return Err(invalid(format!(
                    "bins per channel must be in [2, 16], got {bins_per_channel}"
                )));
            }
        }
        if self.orientation_bins < 4 {
            return Err(invalid("orientation histogram needs at least 4 bins"));
        }
        if !(self.edge_threshold > 0.0 && self.edge_threshold <= 1.0) {
            return Err(invalid("edge threshold must be in (0, 1]"));
        }
        Ok(())
    }

    /// Short hex digest of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(&digest[..8])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexConfig {
    pub weights: FeatureWeights,
    /// Cluster diameter threshold; `None` derives it from a sample at build time.
    pub sigma: Option<f64>,
    pub tau: usize,
    pub seed: u64,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            weights: FeatureWeights::default(),
            sigma: None,
            tau: 3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CatalogConfig {
    pub extraction: ExtractionConfig,
    pub index: IndexConfig,
}

/// `big` is the gray image already resampled to `color_size`².
fn color_block(img: &Raster, big: &Raster, config: &ExtractionConfig) -> Result<Vec<f64>> {
    let side = config.color_size;
    let hist = match config.color {
        ColorMode::Intensity => intensity_histogram(big)?,
        ColorMode::Rgb { bins_per_channel } => {
            let rgb = if img.channels() == 3 {
                img.resize(side, side)?
            } else {
                Raster::rgb(
                    side,
                    side,
                    big.data().iter().flat_map(|&v| [v, v, v]).collect(),
                )?
            };
            rgb_histogram(&rgb, bins_per_channel)?
        }
    };
    Ok(hist.frequencies())
}

fn smoothed_edges(gray: &Raster, config: &ExtractionConfig) -> Result<Raster> {
    gaussian_blur3(&gray.resize(config.edge_size, config.edge_size)?)
}

/// Runs the fixed pipeline and assembles a feature vector with id 0.
///
/// Color, co-occurrence and wavelet features come from the gray image
/// resampled to `color_size`²; the orientation histogram from the gray image
/// resampled to `edge_size`², smoothed, then Sobel-filtered.
pub fn extract_features(img: &Raster, config: &ExtractionConfig) -> Result<FeatureVector> {
    config.validate()?;
    let gray = img.to_grayscale();
    let big = gray.resize(config.color_size, config.color_size)?;

    let color = color_block(img, &big, config)?;
    let stats = config
        .cooccurrence_offsets
        .iter()
        .map(|&off| cooccurrence(&big, config.cooccurrence_levels, off).map(|p| texture_stats(&p)))
        .collect::<Result<Vec<_>>>()?;
    let texture = TextureStats::mean(&stats).expect("offsets validated non-empty");
    let wavelet = wavelet_signatures(&big)?;

    let grad = sobel(&smoothed_edges(&gray, config)?)?;
    let orientation = orientation_histogram(&grad, config.orientation_bins)?.normalized();

    Ok(FeatureVector {
        id: 0,
        color,
        texture,
        wavelet,
        orientation,
    })
}

/// Edge pixels of the smoothed `edge_size`² resample.
pub fn extract_edges(img: &Raster, config: &ExtractionConfig) -> Result<EdgeMap> {
    config.validate()?;
    let grad = sobel(&smoothed_edges(&img.to_grayscale(), config)?)?;
    edge_map(&gradient_magnitude(&grad), config.edge_threshold)
}

/// Everything extracted for one image, including descriptors that are not
/// part of the indexed vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureReport {
    pub feature: FeatureVector,
    pub dimension: usize,
    pub correlogram: Correlogram,
    pub edge_points: usize,
    /// Absent when the image has no edges.
    pub distance_histogram: Option<DistanceHistogram>,
}

pub fn describe(img: &Raster, config: &ExtractionConfig) -> Result<FeatureReport> {
    let feature = extract_features(img, config)?;
    let big = img
        .to_grayscale()
        .resize(config.color_size, config.color_size)?;
    let correlogram = correlogram(
        &big,
        config.correlogram_levels,
        &config.correlogram_distances,
    )?;
    let edges = extract_edges(img, config)?;
    let distance_histogram = if edges.is_empty() {
        None
    } else {
        let dt = distance_transform(&edges, config.edge_size, config.edge_size)?;
        Some(distance_histogram(
            &dt,
            config.distance_bins,
            config.distance_max,
        )?)
    };
    Ok(FeatureReport {
        dimension: feature.dimension(),
        feature,
        correlogram,
        edge_points: edges.len(),
        distance_histogram,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogManifest {
    pub format_version: u32,
    pub config_hash: String,
    pub config: CatalogConfig,
    /// Diameter threshold the tree was actually built with.
    pub sigma: f64,
    pub scale_factors: ScaleFactors,
    pub record_count: usize,
    /// Directory the records' source paths are relative to.
    pub source_root: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub id: PointId,
    pub source_path: String,
    pub config_hash: String,
    pub feature: FeatureVector,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum TreeLine {
    Internal {
        a: PointId,
        b: PointId,
        rad_a: f64,
        rad_b: f64,
    },
    Leaf {
        centroid: PointId,
        radius: f64,
        /// (member id, distance to centroid)
        members: Vec<(PointId, f64)>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryMode {
    Range { t: f64 },
    Knn { k: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rerank {
    /// Color histogram intersection, highest first.
    Intersection,
    /// Hausdorff distance between edge point sets, lowest first.
    Hausdorff,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryEntry {
    pub id: PointId,
    pub source_path: String,
    pub distance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rerank_score: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub mode: QueryMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rerank: Option<Rerank>,
    pub entries: Vec<QueryEntry>,
    pub distance_calls: u64,
}

/// A loaded catalog. Immutable; queries may run concurrently.
#[derive(Debug)]
pub struct Catalog {
    dir: PathBuf,
    manifest: CatalogManifest,
    records: Vec<FeatureRecord>,
    tree: AntipoleTree<FeatureVector>,
    metric: CompositeMetric,
}

/// Outcome of [`build_catalog`]: the catalog plus the files that failed to decode.
#[derive(Debug)]
pub struct BuildReport {
    pub catalog: Catalog,
    pub skipped: Vec<(PathBuf, String)>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let path = entry.path();
        let ft = entry.file_type().map_err(io_err(&path))?;
        if ft.is_dir() {
            collect_files(root, &path, out)?;
        } else if ft.is_file() {
            out.push(
                path.strip_prefix(root)
                    .expect("walk stays under root")
                    .to_path_buf(),
            );
        }
    }
    Ok(())
}

fn relative_name(path: &Path) -> String {
    path.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let name = path
        .file_name()
        .expect("catalog file name")
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(contents).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn to_line<S: Serialize>(value: &S) -> String {
    let mut s = serde_json::to_string(value).expect("catalog types serialize");
    s.push('\n');
    s
}

/// Extracts features for every decodable image under `dir` (recursively),
/// builds the index and writes the catalog to `out`.
pub fn build_catalog(dir: &Path, out: &Path, config: &CatalogConfig) -> Result<BuildReport> {
    config.extraction.validate()?;
    let mut files = Vec::new();
    collect_files(dir, dir, &mut files)?;
    let mut named: Vec<(String, PathBuf)> =
        files.into_iter().map(|p| (relative_name(&p), p)).collect();
    named.sort();

    let extracted: Vec<(String, Result<FeatureVector>)> = named
        .par_iter()
        .map(|(name, rel)| {
            let res = Raster::open(dir.join(rel))
                .and_then(|img| extract_features(&img, &config.extraction));
            (name.clone(), res)
        })
        .collect();

    let mut features = Vec::new();
    let mut names = Vec::new();
    let mut skipped = Vec::new();
    for (name, res) in extracted {
        match res {
            Ok(f) => {
                features.push(f);
                names.push(name);
            }
            Err(e @ (Error::Decode { .. } | Error::Io { .. })) => {
                log::warn!("skipping {name}: {e}");
                skipped.push((dir.join(&name), e.to_string()));
            }
            Err(e) => return Err(e),
        }
    }
    if features.is_empty() {
        return Err(Error::EmptyCatalog(dir.to_path_buf()));
    }

    let hash = config.extraction.hash();
    let records: Vec<FeatureRecord> = features
        .into_iter()
        .zip(names)
        .enumerate()
        .map(|(i, (mut feature, source_path))| {
            feature.id = i as PointId;
            FeatureRecord {
                id: i as PointId,
                source_path,
                config_hash: hash.clone(),
                feature,
            }
        })
        .collect();

    let raw: Vec<FeatureVector> = records.iter().map(|r| r.feature.clone()).collect();
    let scale_factors = ScaleFactors::fit(&raw)?;
    let metric = CompositeMetric {
        weights: config.index.weights,
    };
    let points: Vec<MetricPoint<FeatureVector>> = raw
        .iter()
        .map(|f| MetricPoint::new(f.id, scale_factors.apply(f)))
        .collect();
    let params = TreeParams {
        tau: config.index.tau,
        sigma: config.index.sigma,
        seed: config.index.seed,
    };
    let tree = AntipoleTree::build(points, &params, &metric)?;
    log::info!(
        "indexed {} images: {} nodes, depth {}, {} distance calls",
        records.len(),
        tree.nodes().len(),
        tree.depth(),
        tree.build_calls()
    );

    let source_root = fs::canonicalize(dir).map_err(io_err(dir))?;
    let manifest = CatalogManifest {
        format_version: FORMAT_VERSION,
        config_hash: hash,
        config: config.clone(),
        sigma: tree.sigma(),
        scale_factors,
        record_count: records.len(),
        source_root: source_root.to_string_lossy().into_owned(),
    };

    let catalog = Catalog {
        dir: out.to_path_buf(),
        manifest,
        records,
        tree,
        metric,
    };
    catalog.save(out)?;
    Ok(BuildReport { catalog, skipped })
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    BufReader::new(f)
        .lines()
        .filter(|l| !matches!(l, Ok(s) if s.trim().is_empty()))
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(io_err(path))
}

fn parse_tree(
    path: &Path,
    lines: &[String],
    index_of: &HashMap<PointId, usize>,
) -> Result<Vec<Node>> {
    let lookup = |id: PointId| {
        index_of
            .get(&id)
            .copied()
            .ok_or_else(|| format_err(path, format!("tree references unknown id {id}")))
    };
    let mut nodes = Vec::with_capacity(lines.len());
    let mut pending: Vec<usize> = Vec::new();
    let mut right_of: Option<usize> = None;
    for (i, line) in lines.iter().enumerate() {
        if i > 0 && right_of.is_none() && !matches!(nodes.last(), Some(Node::Internal { .. })) {
            return Err(format_err(path, format!("node {i} has no parent slot")));
        }
        if let Some(p) = right_of.take() {
            if let Node::Internal { right, .. } = &mut nodes[p] {
                *right = i;
            }
        }
        let parsed: TreeLine = serde_json::from_str(line)
            .map_err(|e| format_err(path, format!("line {}: {e}", i + 1)))?;
        match parsed {
            TreeLine::Internal { a, b, rad_a, rad_b } => {
                nodes.push(Node::Internal {
                    a: lookup(a)?,
                    b: lookup(b)?,
                    rad_a,
                    rad_b,
                    left: i + 1,
                    right: usize::MAX,
                });
                pending.push(i);
            }
            TreeLine::Leaf {
                centroid,
                radius,
                members,
            } => {
                let mut idx = Vec::with_capacity(members.len());
                let mut dist = Vec::with_capacity(members.len());
                for (id, d) in members {
                    idx.push(lookup(id)?);
                    dist.push(d);
                }
                nodes.push(Node::Leaf(Cluster {
                    members: idx,
                    centroid: lookup(centroid)?,
                    radius,
                    member_dist: dist,
                }));
                right_of = pending.pop();
            }
        }
    }
    if right_of.is_some() || !pending.is_empty() || nodes.is_empty() {
        return Err(format_err(path, "tree node list is truncated"));
    }
    Ok(nodes)
}

impl Catalog {
    pub fn open(dir: &Path) -> Result<Self> {
        let mpath = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&mpath).map_err(io_err(&mpath))?;
        let manifest: CatalogManifest =
            serde_json::from_str(&text).map_err(|e| format_err(&mpath, e.to_string()))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(format_err(
                &mpath,
                format!("unsupported format version {}", manifest.format_version),
            ));
        }
        manifest
            .scale_factors
            .validate()
            .map_err(|e| format_err(&mpath, e.to_string()))?;
        if manifest.config.extraction.hash() != manifest.config_hash {
            return Err(format_err(
                &mpath,
                "config hash does not match the stored configuration",
            ));
        }

        let rpath = dir.join(RECORDS_FILE);
        let mut records = Vec::with_capacity(manifest.record_count);
        let mut index_of = HashMap::with_capacity(manifest.record_count);
        for (i, line) in read_lines(&rpath)?.iter().enumerate() {
            let rec: FeatureRecord = serde_json::from_str(line)
                .map_err(|e| format_err(&rpath, format!("line {}: {e}", i + 1)))?;
            if rec.config_hash != manifest.config_hash {
                return Err(format_err(
                    &rpath,
                    format!("record {} has a foreign config hash", rec.id),
                ));
            }
            if rec.feature.id != rec.id || !rec.feature.is_finite() {
                return Err(format_err(
                    &rpath,
                    format!("record {} is inconsistent", rec.id),
                ));
            }
            if let Some(first) = records.first() {
                let first: &FeatureRecord = first;
                if !first.feature.same_layout(&rec.feature) {
                    return Err(format_err(
                        &rpath,
                        format!("record {} has a different layout", rec.id),
                    ));
                }
            }
            if index_of.insert(rec.id, i).is_some() {
                return Err(format_err(
                    &rpath,
                    format!("duplicate record id {}", rec.id),
                ));
            }
            records.push(rec);
        }
        if records.len() != manifest.record_count || records.is_empty() {
            return Err(format_err(
                &rpath,
                format!(
                    "expected {} records, found {}",
                    manifest.record_count,
                    records.len()
                ),
            ));
        }

        let tpath = dir.join(TREE_FILE);
        let nodes = parse_tree(&tpath, &read_lines(&tpath)?, &index_of)?;
        let points = records
            .iter()
            .map(|r| MetricPoint::new(r.id, manifest.scale_factors.apply(&r.feature)))
            .collect();
        let tree = AntipoleTree::from_parts(points, nodes, manifest.sigma)
            .map_err(|e| format_err(&tpath, e.to_string()))?;
        let metric = CompositeMetric {
            weights: manifest.config.index.weights,
        };
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
            records,
            tree,
            metric,
        })
    }

    /// Writes manifest, records and tree into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;

        let mut records = String::new();
        for r in &self.records {
            records.push_str(&to_line(r));
        }

        let points = self.tree.points();
        let mut tree = String::new();
        for node in self.tree.nodes() {
            let line = match node {
                Node::Internal {
                    a, b, rad_a, rad_b, ..
                } => TreeLine::Internal {
                    a: points[*a].id,
                    b: points[*b].id,
                    rad_a: *rad_a,
                    rad_b: *rad_b,
                },
                Node::Leaf(c) => TreeLine::Leaf {
                    centroid: points[c.centroid].id,
                    radius: c.radius,
                    members: c
                        .members
                        .iter()
                        .zip(&c.member_dist)
                        .map(|(&m, &d)| (points[m].id, d))
                        .collect(),
                },
            };
            tree.push_str(&to_line(&line));
        }

        write_atomic(&dir.join(RECORDS_FILE), records.as_bytes())?;
        write_atomic(&dir.join(TREE_FILE), tree.as_bytes())?;
        write_atomic(&dir.join(MANIFEST_FILE), to_line(&self.manifest).as_bytes())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &CatalogManifest {
        &self.manifest
    }

    pub fn records(&self) -> &[FeatureRecord] {
        &self.records
    }

    pub fn tree(&self) -> &AntipoleTree<FeatureVector> {
        &self.tree
    }

    pub fn metric(&self) -> &CompositeMetric {
        &self.metric
    }

    pub fn extraction_config(&self) -> &ExtractionConfig {
        &self.manifest.config.extraction
    }

    /// Extracts and standardizes a query image with the catalog's own config.
    pub fn query_vector(&self, img: &Raster) -> Result<FeatureVector> {
        let f = extract_features(img, self.extraction_config())?;
        if !f.same_layout(&self.records[0].feature) {
            return Err(invalid("query features do not match the catalog layout"));
        }
        Ok(self.manifest.scale_factors.apply(&f))
    }

    pub fn query(&self, img: &Raster, mode: QueryMode) -> Result<QueryResult> {
        let q = self.query_vector(img)?;
        self.query_vector_search(&q, mode)
    }

    /// Searches with an already standardized query vector.
    pub fn query_vector_search(&self, q: &FeatureVector, mode: QueryMode) -> Result<QueryResult> {
        use crate::antipole::Metric;

        let (mut scored, calls): (Vec<(f64, usize)>, u64) = match mode {
            QueryMode::Range { t } => {
                let res = self.tree.range_search(q, t, &self.metric)?;
                let mut calls = res.distance_calls;
                let scored = res
                    .hits
                    .iter()
                    .map(|h| {
                        if h.exact {
                            (h.distance, h.index)
                        } else {
                            calls += 1;
                            (
                                self.metric.distance(q, &self.tree.points()[h.index].value),
                                h.index,
                            )
                        }
                    })
                    .collect();
                (scored, calls)
            }
            QueryMode::Knn { k } => {
                let res = self.tree.knn_search(q, k, &self.metric)?;
                (
                    res.neighbors
                        .iter()
                        .map(|n| (n.distance, n.index))
                        .collect(),
                    res.distance_calls,
                )
            }
        };
        scored.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(self.records[a.1].id.cmp(&self.records[b.1].id))
        });
        let entries = scored
            .into_iter()
            .map(|(distance, i)| QueryEntry {
                id: self.records[i].id,
                source_path: self.records[i].source_path.clone(),
                distance,
                rerank_score: None,
            })
            .collect();
        Ok(QueryResult {
            mode,
            rerank: None,
            entries,
            distance_calls: calls,
        })
    }

    pub fn source_path(&self, rec: &FeatureRecord) -> PathBuf {
        Path::new(&self.manifest.source_root).join(&rec.source_path)
    }

    /// Reorders `result` by a secondary similarity. Hausdorff re-ranking
    /// re-reads candidate images from the catalog's source root.
    pub fn rerank(&self, query: &Raster, result: &mut QueryResult, how: Rerank) -> Result<()> {
        let config = self.extraction_config();
        let by_id: HashMap<PointId, &FeatureRecord> =
            self.records.iter().map(|r| (r.id, r)).collect();
        match how {
            Rerank::Intersection => {
                let qf = extract_features(query, config)?;
                for e in &mut result.entries {
                    let rec = by_id[&e.id];
                    e.rerank_score = Some(hist_intersection(&qf.color, &rec.feature.color)?);
                }
                result.entries.sort_by(|a, b| {
                    b.rerank_score
                        .unwrap_or(0.0)
                        .total_cmp(&a.rerank_score.unwrap_or(0.0))
                        .then(a.distance.total_cmp(&b.distance))
                        .then(a.id.cmp(&b.id))
                });
            }
            Rerank::Hausdorff => {
                let qe = extract_edges(query, config)?.coordinates();
                for e in &mut result.entries {
                    let img = Raster::open(self.source_path(by_id[&e.id]))?;
                    let ce = extract_edges(&img, config)?.coordinates();
                    e.rerank_score = match (qe.is_empty(), ce.is_empty()) {
                        (true, true) => Some(0.0),
                        (false, false) => Some(hausdorff(&qe, &ce)?),
                        _ => None,
                    };
                }
                result.entries.sort_by(|a, b| {
                    a.rerank_score
                        .unwrap_or(f64::INFINITY)
                        .total_cmp(&b.rerank_score.unwrap_or(f64::INFINITY))
                        .then(a.distance.total_cmp(&b.distance))
                        .then(a.id.cmp(&b.id))
                });
            }
        }
        result.rerank = Some(how);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_tone(w: usize, h: usize, split: usize, lo: u8, hi: u8) -> Raster {
        Raster::gray_from_fn(w, h, |x, _| if x < split { lo } else { hi }).unwrap()
    }

    #[test]
    fn config_hash_tracks_changes() {
        let a = ExtractionConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.orientation_bins = 18;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn config_validation() {
        let mut c = ExtractionConfig::default();
        c.color_size = 100;
        assert!(c.validate().is_err());
        let mut c = ExtractionConfig::default();
        c.color = ColorMode::Rgb {
            bins_per_channel: 20,
        };
        assert!(c.validate().is_err());
        let mut c = ExtractionConfig::default();
        c.cooccurrence_offsets.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn constant_image_features() {
        let img = Raster::gray(40, 30, vec![90; 1200]).unwrap();
        let f = extract_features(&img, &ExtractionConfig::default()).unwrap();
        assert_eq!(f.dimension(), 256 + 4 + 10 + 36);
        assert_eq!(f.color[90], 1.0);
        assert_eq!(f.texture.contrast, 0.0);
        assert!(f.wavelet.details().iter().all(|&v| v.abs() < 1e-9));
        assert!(f.orientation.iter().all(|&v| v == 0.0));
        assert_eq!(
            extract_features(&img, &ExtractionConfig::default()).unwrap(),
            f
        );
    }

    #[test]
    fn rgb_mode_on_gray_input() {
        let img = Raster::gray(16, 16, vec![200; 256]).unwrap();
        let config = ExtractionConfig {
            color: ColorMode::Rgb {
                bins_per_channel: 4,
            },
            color_size: 64,
            ..ExtractionConfig::default()
        };
        let f = extract_features(&img, &config).unwrap();
        assert_eq!(f.color.len(), 64);
        assert_eq!(f.color[(3 * 4 + 3) * 4 + 3], 1.0);
    }

    #[test]
    fn describe_includes_auxiliary_descriptors() {
        let img = two_tone(64, 64, 32, 20, 220);
        let config = ExtractionConfig {
            color_size: 64,
            edge_size: 32,
            ..ExtractionConfig::default()
        };
        let r = describe(&img, &config).unwrap();
        assert!(r.edge_points > 0);
        let dh = r.distance_histogram.unwrap();
        assert_eq!(dh.counts.iter().sum::<u64>(), 32 * 32);
        assert_eq!(r.correlogram.distances(), &[1, 3, 5, 7]);

        let flat = describe(&Raster::gray(8, 8, vec![5; 64]).unwrap(), &config).unwrap();
        assert_eq!(flat.edge_points, 0);
        assert!(flat.distance_histogram.is_none());
    }

    #[test]
    fn tree_lines_reject_truncation() {
        let path = Path::new("tree.jsonl");
        let ids: HashMap<PointId, usize> = [(0, 0), (1, 1)].into_iter().collect();
        let internal = r#"{"kind":"internal","a":0,"b":1,"rad_a":0.0,"rad_b":0.0}"#.to_string();
        let leaf0 = r#"{"kind":"leaf","centroid":0,"radius":0.0,"members":[[0,0.0]]}"#.to_string();
        let leaf1 = r#"{"kind":"leaf","centroid":1,"radius":0.0,"members":[[1,0.0]]}"#.to_string();
        let nodes = parse_tree(
            path,
            &[internal.clone(), leaf0.clone(), leaf1.clone()],
            &ids,
        )
        .unwrap();
        assert!(matches!(
            nodes[0],
            Node::Internal {
                left: 1,
                right: 2,
                ..
            }
        ));
        assert!(parse_tree(path, &[internal.clone(), leaf0.clone()], &ids).is_err());
        assert!(parse_tree(path, &[leaf0.clone(), leaf1.clone()], &ids).is_err());
        let unknown =
            r#"{"kind":"leaf","centroid":7,"radius":0.0,"members":[[7,0.0]]}"#.to_string();
        assert!(parse_tree(path, &[unknown], &ids).is_err());
    }
}
