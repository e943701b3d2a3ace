//! Dataset generation, on-disk layout, and loading.
//!
//! A generated dataset directory contains:
//!
//! * `params.csv` — `id,b,c,d,e`, one row per cell, shortest-round-trip
//!   float formatting;
//! * `spectra.csv` — `id,f_GHz_1,…,f_GHz_F`, absorption per grid point,
//!   printed with 17 significant digits so values reparse bit-exactly;
//! * `cell_<id>.pgm` — the label map of each cell, plain-text PGM;
//! * `manifest.json` — format version, full generation config, train/test
//!   split, per-sample metadata with SHA-256 checksums, and a global
//!   checksum over the data files. No timestamps: regenerating with the
//!   same seed reproduces every byte.
//!
//! The split shuffles sample indices once with a seeded ChaCha8 generator,
//! takes the first 80% (floor) as training set, and stores both sides
//! sorted ascending.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::em::{absorption_batch, EmError, FrequencyGrid, LayerStack, Spectrum};
use crate::geometry::{
    parameter_grid, rasterize, CellConfig, GeometryError, LabelImage, UnitCellParams,
};

/// File name of the dataset manifest.
pub const MANIFEST_FILE: &str = "manifest.json";
/// File name of the parameter table.
pub const PARAMS_FILE: &str = "params.csv";
/// File name of the spectra table.
pub const SPECTRA_FILE: &str = "spectra.csv";

/// Errors from dataset generation or loading.
#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Em(#[from] EmError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("{file}:{line}: {msg}")]
    Csv {
        file: String,
        line: usize,
        msg: String,
    },
    #[error("checksum mismatch for {what}: recorded {recorded}, computed {computed}")]
    Checksum {
        what: String,
        recorded: String,
        computed: String,
    },
    #[error("dataset is marked partial; regenerate it before use")]
    Partial,
    #[error("split requires at least 5 samples, got {0}")]
    TooFewSamples(usize),
    #[error("no valid jittered cell after {attempts} attempts")]
    JitterExhausted { attempts: usize },
}

fn io_err(path: &Path, source: io::Error) -> DatasetError {
    DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Train/test partition of sample ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndex {
    pub seed: u64,
    /// Training ids, sorted ascending.
    pub train: Vec<usize>,
    /// Held-out ids, sorted ascending.
    pub test: Vec<usize>,
}

/// Shuffle `0..n` with ChaCha8 seeded by `seed`, take the first
/// `floor(0.8 n)` indices for training, and return both sides sorted.
pub fn split_indices(n: usize, seed: u64) -> Result<SplitIndex, DatasetError> {
    if n < 5 {
        return Err(DatasetError::TooFewSamples(n));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_train = n * 8 / 10;
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndex { seed, train, test })
}

/// Everything needed to regenerate a dataset deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub cell: CellConfig<f64>,
    pub stack: LayerStack<f64>,
    pub grid: FrequencyGrid<f64>,
    pub seed: u64,
    /// Number of extra cells jittered off the catalogued sweep.
    pub extra_jitter: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            cell: CellConfig::default(),
            stack: LayerStack::default(),
            grid: FrequencyGrid::default(),
            seed: 42,
            extra_jitter: 0,
        }
    }
}

/// Per-sample entry of the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSample {
    pub id: usize,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub caps_merged: bool,
    /// Image file name, relative to the dataset directory.
    pub image: String,
    /// SHA-256 (hex) of the image file bytes.
    pub sha256: String,
}

/// Dataset manifest, serialized as pretty JSON in declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub config: DatasetConfig,
    pub params_file: String,
    pub spectra_file: String,
    /// SHA-256 (hex) over `params.csv` bytes, then `spectra.csv` bytes,
    /// then every image's bytes in id order.
    pub checksum: String,
    /// True when generation aborted mid-write; such a directory must be
    /// regenerated, not loaded.
    pub partial: bool,
    pub split: SplitIndex,
    pub samples: Vec<ManifestSample>,
}

const MANIFEST_VERSION: u32 = 1;

/// One fully materialized sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: usize,
    pub params: UnitCellParams<f64>,
    pub caps_merged: bool,
    pub spectrum: Spectrum<f64>,
    pub image: LabelImage,
}

/// A loaded dataset: samples in id order plus the stored split.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub split: SplitIndex,
    pub manifest: Manifest,
}

impl Dataset {
    pub fn train_samples(&self) -> Vec<&Sample> {
        self.split.train.iter().map(|&i| &self.samples[i]).collect()
    }

    pub fn test_samples(&self) -> Vec<&Sample> {
        self.split.test.iter().map(|&i| &self.samples[i]).collect()
    }
}

fn hex_digest(bytes_chunks: &[&[u8]]) -> String {
    let mut hasher = Sha256::new();
    for chunk in bytes_chunks {
        hasher.update(chunk);
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        let _ = write!(out, "{byte:02x}");
    }
    out
}

fn image_file_name(id: usize) -> String {
    format!("cell_{id}.pgm")
}

/// Draw the cell list: the full catalogued sweep followed by
/// `extra_jitter` cells, each a random catalogued cell with every parameter
/// scaled by an independent uniform factor in `[0.9, 1.1)` (redrawn until
/// the result passes validation).
fn draw_cells(config: &DatasetConfig) -> Result<Vec<UnitCellParams<f64>>, DatasetError> {
    let mut cells = parameter_grid();
    let base = cells.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    const MAX_ATTEMPTS: usize = 1000;
    for _ in 0..config.extra_jitter {
        let mut accepted = None;
        for _ in 0..MAX_ATTEMPTS {
            let origin = base[rng.gen_range(0..base.len())];
            let candidate = UnitCellParams::new(
                origin.b * rng.gen_range(0.9..1.1),
                origin.c * rng.gen_range(0.9..1.1),
                origin.d * rng.gen_range(0.9..1.1),
                origin.e * rng.gen_range(0.9..1.1),
            );
            if candidate.validate(&config.cell).is_ok() {
                accepted = Some(candidate);
                break;
            }
        }
        cells.push(accepted.ok_or(DatasetError::JitterExhausted {
            attempts: MAX_ATTEMPTS,
        })?);
    }
    Ok(cells)
}

fn render_params_csv(cells: &[UnitCellParams<f64>]) -> String {
    let mut out = String::from("id,b,c,d,e\n");
    for (id, p) in cells.iter().enumerate() {
        let _ = writeln!(out, "{id},{},{},{},{}", p.b, p.c, p.d, p.e);
    }
    out
}

fn render_spectra_csv(spectra: &[Spectrum<f64>], grid_len: usize) -> String {
    let mut out = String::from("id");
    for i in 1..=grid_len {
        let _ = write!(out, ",f_GHz_{i}");
    }
    out.push('\n');
    for (id, s) in spectra.iter().enumerate() {
        let _ = write!(out, "{id}");
        for v in s.values() {
            // 17 significant digits: reparses to the identical f64.
            let _ = write!(out, ",{v:.16e}");
        }
        out.push('\n');
    }
    out
}

/// Generate a dataset into `dir` (created if missing).
///
/// Every artifact is a pure function of `config`, so repeated runs produce
/// byte-identical files. If writing a data file fails, a manifest with
/// `partial: true` covering the files written so far is left behind and the
/// original error is returned.
pub fn generate(dir: &Path, config: &DatasetConfig) -> Result<Manifest, DatasetError> {
    config.cell.validate()?;
    config.stack.validate()?;
    // Round-trip the grid through its constructor to reject hand-built
    // configs with out-of-band edges.
    FrequencyGrid::new(config.grid.f_min(), config.grid.f_max(), config.grid.len())?;

    let cells = draw_cells(config)?;
    let spectra = absorption_batch(&cells, &config.stack, &config.cell, &config.grid)?;
    let images: Vec<LabelImage> = {
        use rayon::prelude::*;
        let results: Vec<Result<LabelImage, GeometryError>> = cells
            .par_iter()
            .map(|p| rasterize(p, &config.cell))
            .collect();
        results.into_iter().collect::<Result<_, _>>()?
    };

    let params_csv = render_params_csv(&cells);
    let spectra_csv = render_spectra_csv(&spectra, config.grid.len());
    let pgm_texts: Vec<String> = images.iter().map(LabelImage::to_pgm).collect();

    let mut global_chunks: Vec<&[u8]> = vec![params_csv.as_bytes(), spectra_csv.as_bytes()];
    global_chunks.extend(pgm_texts.iter().map(|t| t.as_bytes()));
    let checksum = hex_digest(&global_chunks);

    let samples: Vec<ManifestSample> = cells
        .iter()
        .enumerate()
        .map(|(id, p)| ManifestSample {
            id,
            b: p.b,
            c: p.c,
            d: p.d,
            e: p.e,
            caps_merged: p.caps_merged(),
            image: image_file_name(id),
            sha256: hex_digest(&[pgm_texts[id].as_bytes()]),
        })
        .collect();

    let split = split_indices(cells.len(), config.seed)?;
    let manifest = Manifest {
        format_version: MANIFEST_VERSION,
        config: config.clone(),
        params_file: PARAMS_FILE.to_string(),
        spectra_file: SPECTRA_FILE.to_string(),
        checksum,
        partial: false,
        split,
        samples,
    };

    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;

    // Write data files; on failure leave a partial manifest behind so the
    // directory is recognizably incomplete.
    let mut written = 0usize;
    let mut write_data = || -> Result<(), DatasetError> {
        for (id, text) in pgm_texts.iter().enumerate() {
            let path = dir.join(image_file_name(id));
            fs::write(&path, text).map_err(|e| io_err(&path, e))?;
            written = id + 1;
        }
        let p = dir.join(PARAMS_FILE);
        fs::write(&p, &params_csv).map_err(|e| io_err(&p, e))?;
        let s = dir.join(SPECTRA_FILE);
        fs::write(&s, &spectra_csv).map_err(|e| io_err(&s, e))?;
        Ok(())
    };
    if let Err(e) = write_data() {
        let mut partial = manifest;
        partial.partial = true;
        partial.samples.truncate(written);
        let text = serde_json::to_string_pretty(&partial).expect("manifest serializes") + "\n";
        // Best effort: the original error matters more than this write.
        let _ = fs::write(dir.join(MANIFEST_FILE), text);
        return Err(e);
    }

    let manifest_path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    fs::write(&manifest_path, text).map_err(|e| io_err(&manifest_path, e))?;
    Ok(manifest)
}

fn parse_f64(file: &str, line: usize, field: &str, tok: &str) -> Result<f64, DatasetError> {
    tok.parse::<f64>().map_err(|_| DatasetError::Csv {
        file: file.to_string(),
        line,
        msg: format!("bad {field}: `{tok}`"),
    })
}

fn csv_err(file: &str, line: usize, msg: impl Into<String>) -> DatasetError {
    DatasetError::Csv {
        file: file.to_string(),
        line,
        msg: msg.into(),
    }
}

fn parse_params_csv(
    text: &str,
    expected_rows: usize,
) -> Result<Vec<UnitCellParams<f64>>, DatasetError> {
    let file = PARAMS_FILE;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "id,b,c,d,e")) => {}
        Some((_, other)) => return Err(csv_err(file, 1, format!("bad header `{other}`"))),
        None => return Err(csv_err(file, 1, "empty file")),
    }
    let mut out = Vec::with_capacity(expected_rows);
    for (idx, line) in lines {
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(csv_err(
                file,
                line_no,
                format!("expected 5 fields, got {}", fields.len()),
            ));
        }
        let id: usize = fields[0]
            .parse()
            .map_err(|_| csv_err(file, line_no, format!("bad id `{}`", fields[0])))?;
        if id != out.len() {
            return Err(csv_err(
                file,
                line_no,
                format!("expected id {}, got {id}", out.len()),
            ));
        }
        out.push(UnitCellParams::new(
            parse_f64(file, line_no, "b", fields[1])?,
            parse_f64(file, line_no, "c", fields[2])?,
            parse_f64(file, line_no, "d", fields[3])?,
            parse_f64(file, line_no, "e", fields[4])?,
        ));
    }
    if out.len() != expected_rows {
        return Err(csv_err(
            file,
            text.lines().count(),
            format!("expected {expected_rows} rows, got {}", out.len()),
        ));
    }
    Ok(out)
}

fn parse_spectra_csv(
    text: &str,
    expected_rows: usize,
    grid_len: usize,
) -> Result<Vec<Spectrum<f64>>, DatasetError> {
    let file = SPECTRA_FILE;
    let mut expected_header = String::from("id");
    for i in 1..=grid_len {
        let _ = write!(expected_header, ",f_GHz_{i}");
    }
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == expected_header => {}
        Some((_, other)) => return Err(csv_err(file, 1, format!("bad header `{other}`"))),
        None => return Err(csv_err(file, 1, "empty file")),
    }
    let mut out = Vec::with_capacity(expected_rows);
    for (idx, line) in lines {
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != grid_len + 1 {
            return Err(csv_err(
                file,
                line_no,
                format!("expected {} fields, got {}", grid_len + 1, fields.len()),
            ));
        }
        let id: usize = fields[0]
            .parse()
            .map_err(|_| csv_err(file, line_no, format!("bad id `{}`", fields[0])))?;
        if id != out.len() {
            return Err(csv_err(
                file,
                line_no,
                format!("expected id {}, got {id}", out.len()),
            ));
        }
        let mut values = Vec::with_capacity(grid_len);
        for (k, tok) in fields[1..].iter().enumerate() {
            values.push(parse_f64(file, line_no, &format!("f_GHz_{}", k + 1), tok)?);
        }
        let spectrum = Spectrum::new(values)
            .map_err(|e| csv_err(file, line_no, format!("invalid absorption values: {e}")))?;
        out.push(spectrum);
    }
    if out.len() != expected_rows {
        return Err(csv_err(
            file,
            text.lines().count(),
            format!("expected {expected_rows} rows, got {}", out.len()),
        ));
    }
    Ok(out)
}

/// Load and verify a dataset directory.
///
/// Checks the manifest version and partial flag, every per-image checksum,
/// the global checksum, CSV structure, and that stored values are
/// internally consistent (ids sequential, merged flags matching the
/// parameters, split covering exactly the sample set).
pub fn load(dir: &Path) -> Result<Dataset, DatasetError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest_text =
        fs::read_to_string(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&manifest_text)
        .map_err(|e| DatasetError::Manifest(format!("parse error: {e}")))?;

    if manifest.format_version != MANIFEST_VERSION {
        return Err(DatasetError::Manifest(format!(
            "unsupported format version {}",
            manifest.format_version
        )));
    }
    if manifest.partial {
        return Err(DatasetError::Partial);
    }
    manifest.config.cell.validate()?;
    manifest.config.stack.validate()?;
    FrequencyGrid::new(
        manifest.config.grid.f_min(),
        manifest.config.grid.f_max(),
        manifest.config.grid.len(),
    )?;

    let n = manifest.samples.len();
    for (i, s) in manifest.samples.iter().enumerate() {
        if s.id != i {
            return Err(DatasetError::Manifest(format!(
                "sample entries out of order: position {i} holds id {}",
                s.id
            )));
        }
    }

    let params_path = dir.join(&manifest.params_file);
    let params_text = fs::read_to_string(&params_path).map_err(|e| io_err(&params_path, e))?;
    let spectra_path = dir.join(&manifest.spectra_file);
    let spectra_text = fs::read_to_string(&spectra_path).map_err(|e| io_err(&spectra_path, e))?;

    let mut image_texts: Vec<String> = Vec::with_capacity(n);
    for s in &manifest.samples {
        let path = dir.join(&s.image);
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        let digest = hex_digest(&[text.as_bytes()]);
        if digest != s.sha256 {
            return Err(DatasetError::Checksum {
                what: s.image.clone(),
                recorded: s.sha256.clone(),
                computed: digest,
            });
        }
        image_texts.push(text);
    }

    let mut global_chunks: Vec<&[u8]> = vec![params_text.as_bytes(), spectra_text.as_bytes()];
    global_chunks.extend(image_texts.iter().map(|t| t.as_bytes()));
    let global = hex_digest(&global_chunks);
    if global != manifest.checksum {
        return Err(DatasetError::Checksum {
            what: "dataset".to_string(),
            recorded: manifest.checksum.clone(),
            computed: global,
        });
    }

    let cells = parse_params_csv(&params_text, n)?;
    let spectra = parse_spectra_csv(&spectra_text, n, manifest.config.grid.len())?;

    let mut samples = Vec::with_capacity(n);
    for (((id, params), spectrum), image_text) in (0..n).zip(cells).zip(spectra).zip(&image_texts) {
        let image = LabelImage::from_pgm(image_text)?;
        if image.side() != manifest.config.cell.n {
            return Err(DatasetError::Manifest(format!(
                "image {} has side {}, config says {}",
                manifest.samples[id].image,
                image.side(),
                manifest.config.cell.n
            )));
        }
        let entry = &manifest.samples[id];
        let stored = UnitCellParams::new(entry.b, entry.c, entry.d, entry.e);
        if stored != params {
            return Err(DatasetError::Manifest(format!(
                "sample {id}: params.csv {params:?} disagrees with manifest {stored:?}"
            )));
        }
        let caps_merged = params.caps_merged();
        if caps_merged != entry.caps_merged {
            return Err(DatasetError::Manifest(format!(
                "sample {id}: merged flag {} does not match parameters",
                entry.caps_merged
            )));
        }
        samples.push(Sample {
            id,
            params,
            caps_merged,
            spectrum,
            image: image.clone(),
        });
    }

    let split = manifest.split.clone();
    let mut seen = vec![false; n];
    for &i in split.train.iter().chain(&split.test) {
        if i >= n {
            return Err(DatasetError::Manifest(format!(
                "split references id {i} outside 0..{n}"
            )));
        }
        if seen[i] {
            return Err(DatasetError::Manifest(format!("split repeats id {i}")));
        }
        seen[i] = true;
    }
    if !seen.iter().all(|&s| s) {
        return Err(DatasetError::Manifest(
            "split does not cover every sample".to_string(),
        ));
    }

    Ok(Dataset {
        samples,
        split,
        manifest,
    })
}

/// Path of the manifest inside a dataset directory.
pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join(MANIFEST_FILE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn small_config() -> DatasetConfig {
        DatasetConfig {
            cell: CellConfig::with_resolution(16),
            ..DatasetConfig::default()
        }
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let a = split_indices(378, 42).unwrap();
        let b = split_indices(378, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.train.len(), 302);
        assert_eq!(a.test.len(), 76);
        assert!(a.train.windows(2).all(|w| w[0] < w[1]));
        assert!(a.test.windows(2).all(|w| w[0] < w[1]));
        let mut all: Vec<usize> = a.train.iter().chain(&a.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..378).collect::<Vec<_>>());

        let c = split_indices(378, 43).unwrap();
        assert_ne!(a.train, c.train, "different seeds should differ");
    }

    #[test]
    fn split_needs_five_samples() {
        assert!(matches!(
            split_indices(4, 0),
            Err(DatasetError::TooFewSamples(4))
        ));
        let s = split_indices(5, 0).unwrap();
        assert_eq!(s.train.len(), 4);
        assert_eq!(s.test.len(), 1);
    }

    #[test]
    fn generate_load_round_trip() {
        let tmp = TempDir::new().unwrap();
        let config = small_config();
        let manifest = generate(tmp.path(), &config).unwrap();
        assert_eq!(manifest.samples.len(), 378);
        assert!(!manifest.partial);

        let ds = load(tmp.path()).unwrap();
        assert_eq!(ds.samples.len(), 378);
        assert_eq!(ds.manifest, manifest);
        // Spot-check bit-exact round trips of floats through the CSVs.
        let grid = parameter_grid();
        for (sample, cell) in ds.samples.iter().zip(&grid) {
            assert_eq!(sample.params, *cell);
        }
        let expected =
            crate::em::absorption_spectrum(&grid[100], &config.stack, &config.cell, &config.grid)
                .unwrap();
        assert_eq!(ds.samples[100].spectrum, expected);
        let img = rasterize(&grid[100], &config.cell).unwrap();
        assert_eq!(ds.samples[100].image, img);
    }

    #[test]
    fn regeneration_is_byte_identical() {
        let tmp_a = TempDir::new().unwrap();
        let tmp_b = TempDir::new().unwrap();
        let config = DatasetConfig {
            extra_jitter: 3,
            ..small_config()
        };
        generate(tmp_a.path(), &config).unwrap();
        generate(tmp_b.path(), &config).unwrap();
        for name in [
            MANIFEST_FILE,
            PARAMS_FILE,
            SPECTRA_FILE,
            "cell_0.pgm",
            "cell_380.pgm",
        ] {
            let a = fs::read(tmp_a.path().join(name)).unwrap();
            let b = fs::read(tmp_b.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} must be byte-identical across runs");
        }
    }

    #[test]
    fn jitter_extends_the_catalogue() {
        let tmp = TempDir::new().unwrap();
        let config = DatasetConfig {
            extra_jitter: 5,
            ..small_config()
        };
        let manifest = generate(tmp.path(), &config).unwrap();
        assert_eq!(manifest.samples.len(), 383);
        let ds = load(tmp.path()).unwrap();
        for s in &ds.samples[378..] {
            s.params.validate(&config.cell).unwrap();
            // Every jittered value stays within 10% of some catalogued value.
            let near =
                |v: f64, grid: &[f64]| grid.iter().any(|&g| (v / g - 1.0).abs() < 0.1 + 1e-12);
            assert!(near(s.params.b, &crate::geometry::GRID_B));
            assert!(near(s.params.c, &crate::geometry::GRID_C));
            assert!(near(s.params.d, &crate::geometry::GRID_D));
            assert!(near(s.params.e, &crate::geometry::GRID_E));
        }

        let other = DatasetConfig {
            seed: 7,
            ..config.clone()
        };
        let tmp2 = TempDir::new().unwrap();
        generate(tmp2.path(), &other).unwrap();
        let ds2 = load(tmp2.path()).unwrap();
        assert_eq!(ds.samples[0].params, ds2.samples[0].params);
        assert_ne!(
            ds.samples[378].params, ds2.samples[378].params,
            "jitter must follow the seed"
        );
    }

    #[test]
    fn tampered_spectra_are_rejected() {
        let tmp = TempDir::new().unwrap();
        generate(tmp.path(), &small_config()).unwrap();
        let path = tmp.path().join(SPECTRA_FILE);
        let mut text = fs::read_to_string(&path).unwrap();
        text.push_str("tail\n");
        fs::write(&path, text).unwrap();
        assert!(matches!(
            load(tmp.path()),
            Err(DatasetError::Checksum { what, .. }) if what == "dataset"
        ));
    }

    #[test]
    fn tampered_image_is_rejected_by_name() {
        let tmp = TempDir::new().unwrap();
        generate(tmp.path(), &small_config()).unwrap();
        let path = tmp.path().join("cell_7.pgm");
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, text.replacen('2', "1", 1)).unwrap();
        assert!(matches!(
            load(tmp.path()),
            Err(DatasetError::Checksum { what, .. }) if what == "cell_7.pgm"
        ));
    }

    #[test]
    fn partial_manifest_is_rejected() {
        let tmp = TempDir::new().unwrap();
        generate(tmp.path(), &small_config()).unwrap();
        let path = manifest_path(tmp.path());
        let text = fs::read_to_string(&path).unwrap();
        fs::write(
            &path,
            text.replace("\"partial\": false", "\"partial\": true"),
        )
        .unwrap();
        assert!(matches!(load(tmp.path()), Err(DatasetError::Partial)));
    }

    #[test]
    fn missing_files_surface_as_io_errors() {
        let tmp = TempDir::new().unwrap();
        assert!(matches!(load(tmp.path()), Err(DatasetError::Io { .. })));

        generate(tmp.path(), &small_config()).unwrap();
        fs::remove_file(tmp.path().join("cell_100.pgm")).unwrap();
        assert!(matches!(load(tmp.path()), Err(DatasetError::Io { .. })));
    }

    #[test]
    fn train_and_test_views_follow_the_split() {
        let tmp = TempDir::new().unwrap();
        generate(tmp.path(), &small_config()).unwrap();
        let ds = load(tmp.path()).unwrap();
        let train = ds.train_samples();
        assert_eq!(train.len(), 302);
        for (&idx, sample) in ds.split.train.iter().zip(&train) {
            assert_eq!(sample.id, idx);
        }
    }
}
