//! Black-box oracles selectable from the config.

use std::collections::HashMap;
use std::path::Path;

use rdopt::device::{toy_cavity, ToyConfig};
use rdopt::objective::ModeResult;
use rdopt::{DesignPoint, DESIGN_DIM, PARAMETER_NAMES};

use crate::config::OracleConfig;
use crate::CliError;

const OUTPUT_COLUMNS: [&str; 3] = ["lambda_c", "fp", "eta_smf"];

/// Precomputed evaluations keyed by the exact parameter bits.
#[derive(Clone, Debug)]
pub struct ExternalTable {
    rows: Vec<(DesignPoint, ModeResult)>,
    index: HashMap<[u64; DESIGN_DIM], usize>,
}

impl ExternalTable {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let err = |m: String| CliError::Config(format!("{}: {m}", path.display()));
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_path(path).map_err(|e| err(e.to_string()))?;
        let headers = reader.headers().map_err(|e| err(e.to_string()))?.clone();
        let expected: Vec<&str> = PARAMETER_NAMES.iter().chain(OUTPUT_COLUMNS.iter()).copied().collect();
        let got: Vec<&str> = headers.iter().collect();
        if got != expected {
            return Err(err(format!("header must be {}", expected.join(","))));
        }
        let mut rows = Vec::new();
        let mut index = HashMap::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| err(e.to_string()))?;
            let v: Vec<f64> = record
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| err(format!("row {}: {e}", line + 1)))?;
            let p = DesignPoint::from_slice(&v[..DESIGN_DIM]).expect("seven columns");
            let m = ModeResult::new(v[7], v[8], v[9]);
            if index.insert(key(&p), rows.len()).is_some() {
                return Err(err(format!("row {} duplicates an earlier parameter row", line + 1)));
            }
            rows.push((p, m));
        }
        if rows.is_empty() {
            return Err(err("table has no rows".into()));
        }
        Ok(Self { rows, index })
    }

    pub fn rows(&self) -> &[(DesignPoint, ModeResult)] {
        &self.rows
    }

    pub fn lookup(&self, p: &DesignPoint) -> Result<ModeResult, String> {
        self.index.get(&key(p)).map(|i| self.rows[*i].1).ok_or_else(|| format!("no table row for {p:?}"))
    }
}

fn key(p: &DesignPoint) -> [u64; DESIGN_DIM] {
    p.to_array().map(|v| (v + 0.0).to_bits())
}

pub enum Oracle {
    Toy(ToyConfig),
    Table(ExternalTable),
}

impl Oracle {
    pub fn from_config(cfg: &OracleConfig) -> Result<Self, CliError> {
        Ok(match cfg {
            OracleConfig::Toy { params } => Oracle::Toy(params.clone()),
            OracleConfig::Table { path } => Oracle::Table(ExternalTable::load(path)?),
        })
    }

    pub fn evaluate(&self, p: &DesignPoint) -> Result<ModeResult, String> {
        p.validate().map_err(|e| e.to_string())?;
        match self {
            Oracle::Toy(c) => Ok(toy_cavity(p, c).mode()),
            Oracle::Table(t) => t.lookup(p),
        }
    }
}
