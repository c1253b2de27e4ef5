use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::MlError;

/// Columns every dataset CSV must carry, in canonical order.
pub const REQUIRED_COLUMNS: [&str; 8] = [
    "plant_id",
    "compound_leaf_id",
    "leaflet_id",
    "nnd_mm",
    "resolution_px",
    "exposure_time_s",
    "iso",
    "nitrate_ppm",
];
/// Optional grouping column used by the group tests.
pub const FERTILIZER_COLUMN: &str = "fertilizer_level";

/// Model inputs of the classifier, in feature order.
pub const CLASSIFIER_FEATURES: [&str; 3] = ["nnd_mm", "resolution_px", "exposure_time_s"];
/// Model inputs of the regressor, in feature order.
pub const REGRESSOR_FEATURES: [&str; 3] = ["nitrate_ppm", "resolution_px", "exposure_time_s"];

/// One analyzed image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub plant_id: String,
    pub compound_leaf_id: String,
    pub leaflet_id: String,
    /// Mean nearest-neighbor distance, mm.
    pub nnd: f64,
    /// Total pixel count of the source image.
    pub resolution: f64,
    pub exposure_time: f64,
    pub iso: f64,
    pub nitrate_ppm: f64,
    pub fertilizer_level: Option<String>,
}

impl SampleRecord {
    /// Key of the compound leaf this image belongs to.
    pub fn leaf_key(&self) -> (String, String) {
        (self.plant_id.clone(), self.compound_leaf_id.clone())
    }

    pub fn leaflet_key(&self) -> (String, String, String) {
        (
            self.plant_id.clone(),
            self.compound_leaf_id.clone(),
            self.leaflet_id.clone(),
        )
    }

    pub fn classifier_features(&self) -> [f64; 3] {
        [self.nnd, self.resolution, self.exposure_time]
    }

    pub fn regressor_features(&self) -> [f64; 3] {
        [self.nitrate_ppm, self.resolution, self.exposure_time]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub records: Vec<SampleRecord>,
}

fn schema(row: usize, column: &str, message: impl Into<String>) -> MlError {
    MlError::Schema {
        row,
        column: column.to_string(),
        message: message.into(),
    }
}

impl Dataset {
    pub fn new(records: Vec<SampleRecord>) -> Self {
        Self { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn has_fertilizer_levels(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.fertilizer_level.is_some())
    }

    /// Record indices per compound leaf, keys sorted.
    pub fn leaf_groups(&self) -> BTreeMap<(String, String), Vec<usize>> {
        let mut groups: BTreeMap<_, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.records.iter().enumerate() {
            groups.entry(r.leaf_key()).or_default().push(i);
        }
        groups
    }

    /// Record indices per leaflet, keys sorted.
    pub fn leaflet_groups(&self) -> BTreeMap<(String, String, String), Vec<usize>> {
        let mut groups: BTreeMap<_, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.records.iter().enumerate() {
            groups.entry(r.leaflet_key()).or_default().push(i);
        }
        groups
    }

    /// Checks value ranges and that nitrate is constant within each compound
    /// leaf. Rows are numbered from 1 as in the CSV body.
    pub fn validate(&self) -> Result<(), MlError> {
        for (i, r) in self.records.iter().enumerate() {
            let row = i + 1;
            let checks = [
                ("nnd_mm", r.nnd, r.nnd > 0.0),
                ("resolution_px", r.resolution, r.resolution > 0.0),
                ("exposure_time_s", r.exposure_time, r.exposure_time > 0.0),
                ("iso", r.iso, r.iso > 0.0),
                ("nitrate_ppm", r.nitrate_ppm, r.nitrate_ppm >= 0.0),
            ];
            for (col, v, ok) in checks {
                if !v.is_finite() || !ok {
                    return Err(schema(row, col, format!("value {v} out of range")));
                }
            }
        }
        let mut seen: BTreeMap<(String, String), f64> = BTreeMap::new();
        for (i, r) in self.records.iter().enumerate() {
            let first = *seen.entry(r.leaf_key()).or_insert(r.nitrate_ppm);
            if first != r.nitrate_ppm {
                return Err(schema(
                    i + 1,
                    "nitrate_ppm",
                    format!(
                        "compound leaf {}/{} has conflicting nitrate values {first} and {}",
                        r.plant_id, r.compound_leaf_id, r.nitrate_ppm
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Reads and validates a dataset CSV. Extra columns are ignored.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, MlError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| schema(0, "header", e.to_string()))?.clone();
        let find = |name: &str| headers.iter().position(|h| h == name);
        let mut idx = [0usize; 8];
        for (slot, name) in idx.iter_mut().zip(REQUIRED_COLUMNS) {
            *slot = find(name).ok_or_else(|| schema(0, name, "missing column"))?;
        }
        let fert = find(FERTILIZER_COLUMN);

        let mut records = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 1;
            let rec = rec.map_err(|e| schema(row, "record", e.to_string()))?;
            let text = |k: usize| -> Result<String, MlError> {
                let name = REQUIRED_COLUMNS[k];
                let v = rec.get(idx[k]).ok_or_else(|| schema(row, name, "missing field"))?;
                if v.is_empty() {
                    return Err(schema(row, name, "empty field"));
                }
                Ok(v.to_string())
            };
            let num = |k: usize| -> Result<f64, MlError> {
                let name = REQUIRED_COLUMNS[k];
                let v = text(k)?;
                v.parse::<f64>()
                    .map_err(|_| schema(row, name, format!("cannot parse {v:?} as a number")))
            };
            records.push(SampleRecord {
                plant_id: text(0)?,
                compound_leaf_id: text(1)?,
                leaflet_id: text(2)?,
                nnd: num(3)?,
                resolution: num(4)?,
                exposure_time: num(5)?,
                iso: num(6)?,
                nitrate_ppm: num(7)?,
                fertilizer_level: fert
                    .and_then(|k| rec.get(k))
                    .filter(|v| !v.is_empty())
                    .map(str::to_string),
            });
        }
        let ds = Self { records };
        ds.validate()?;
        Ok(ds)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), MlError> {
        let with_fert = self.records.iter().any(|r| r.fertilizer_level.is_some());
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| MlError::Io(e.to_string());
        let mut header: Vec<&str> = REQUIRED_COLUMNS.to_vec();
        if with_fert {
            header.push(FERTILIZER_COLUMN);
        }
        w.write_record(&header).map_err(io)?;
        for r in &self.records {
            let mut row = vec![
                r.plant_id.clone(),
                r.compound_leaf_id.clone(),
                r.leaflet_id.clone(),
                r.nnd.to_string(),
                r.resolution.to_string(),
                r.exposure_time.to_string(),
                r.iso.to_string(),
                r.nitrate_ppm.to_string(),
            ];
            if with_fert {
                row.push(r.fertilizer_level.clone().unwrap_or_default());
            }
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| MlError::Io(e.to_string()))
    }
}
