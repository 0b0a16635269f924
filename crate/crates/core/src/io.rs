//! JSON forms: matrices as row-major nested arrays of `[re, im]`, density
//! matrices validated on load, channels as `{label, kraus}`.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::channels::QuantumChannel;
use crate::error::{Error, Result};
use crate::linalg::{c, ComplexMatrix};
use crate::state::DensityMatrix;

pub type MatrixRows = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_rows(m: &ComplexMatrix) -> MatrixRows {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn matrix_from_rows(rows: &MatrixRows) -> Result<ComplexMatrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    if n == 0 || m == 0 {
        return Err(Error::InvalidRecord("matrix is empty".into()));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != m) {
        return Err(Error::InvalidRecord(format!(
            "matrix row {i} has {} entries, expected {m}",
            rows[i].len()
        )));
    }
    if rows.iter().flatten().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidRecord("matrix has non-finite entries".into()));
    }
    Ok(ComplexMatrix::from_fn(n, m, |i, j| {
        c(rows[i][j][0], rows[i][j][1])
    }))
}

/// `#[serde(with = "complex_matrix")]` adapter.
pub mod complex_matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &ComplexMatrix, s: S) -> Result<S::Ok, S::Error> {
        matrix_to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ComplexMatrix, D::Error> {
        let rows = MatrixRows::deserialize(d)?;
        matrix_from_rows(&rows).map_err(D::Error::custom)
    }
}

/// `#[serde(with = "complex_matrices")]` adapter for lists of matrices.
pub mod complex_matrices {
    use super::*;

    pub fn serialize<S: Serializer>(ms: &[ComplexMatrix], s: S) -> Result<S::Ok, S::Error> {
        ms.iter().map(matrix_to_rows).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<ComplexMatrix>, D::Error> {
        let all = Vec::<MatrixRows>::deserialize(d)?;
        all.iter()
            .map(|rows| matrix_from_rows(rows).map_err(D::Error::custom))
            .collect()
    }
}

impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        matrix_to_rows(self.matrix()).serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let m = complex_matrix::deserialize(d)?;
        DensityMatrix::new(m).map_err(D::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct ChannelRepr {
    label: String,
    #[serde(with = "complex_matrices")]
    kraus: Vec<ComplexMatrix>,
    #[serde(default, skip_deserializing)]
    trace_preserving: bool,
}

impl Serialize for QuantumChannel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ChannelRepr {
            label: self.label().to_string(),
            kraus: self.kraus().to_vec(),
            trace_preserving: self.is_trace_preserving(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for QuantumChannel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = ChannelRepr::deserialize(d)?;
        QuantumChannel::new(repr.label, repr.kraus).map_err(D::Error::custom)
    }
}

/// Parses a `{label, kraus}` channel document.
pub fn channel_from_json(text: &str) -> Result<QuantumChannel> {
    Ok(serde_json::from_str(text)?)
}
