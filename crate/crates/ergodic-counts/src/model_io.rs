//! JSON ingestion of model documents.
//!
//! A model document carries `dimension`, optionally `hamiltonian` and
//! `jump_operators` (a continuous-time model), and optionally
//! `kraus_operators` (a discrete-time family). Complex numbers are
//! two-element `[re, im]` arrays; matrices are row-major nested arrays.
//!
//! ```json
//! {
//!   "dimension": 2,
//!   "hamiltonian": [[[0.0, 0.0], [0.5, 0.0]], [[0.5, 0.0], [0.0, 0.0]]],
//!   "jump_operators": [[[[0.0, 0.0], [1.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]]
//! }
//! ```

use num_complex::Complex64;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::kraus::KrausFamily;
use crate::linalg::CMat;
use crate::lindblad::{ComplexOperator, LindbladModel};

/// A parsed model document: at least one of the two model kinds is present.
#[derive(Clone, Debug)]
pub struct ModelDocument {
    pub dimension: usize,
    pub lindblad: Option<LindbladModel>,
    pub kraus: Option<KrausFamily>,
}

impl ModelDocument {
    pub fn require_lindblad(&self) -> Result<&LindbladModel> {
        self.lindblad.as_ref().ok_or_else(|| {
            Error::Config(
                "this command needs 'hamiltonian' and 'jump_operators' in the model".into(),
            )
        })
    }

    pub fn require_kraus(&self) -> Result<&KrausFamily> {
        self.kraus.as_ref().ok_or_else(|| {
            Error::Config("this command needs 'kraus_operators' in the model".into())
        })
    }
}

fn parse_complex(v: &Value, path: &str) -> Result<Complex64> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Parse(format!("{path}: expected a [re, im] pair")))?;
    if arr.len() != 2 {
        return Err(Error::Parse(format!(
            "{path}: expected exactly two entries [re, im]"
        )));
    }
    let re = arr[0]
        .as_f64()
        .ok_or_else(|| Error::Parse(format!("{path}[0]: expected a number")))?;
    let im = arr[1]
        .as_f64()
        .ok_or_else(|| Error::Parse(format!("{path}[1]: expected a number")))?;
    Ok(Complex64::new(re, im))
}

fn parse_matrix(v: &Value, dim: usize, path: &str) -> Result<CMat> {
    let rows = v
        .as_array()
        .ok_or_else(|| Error::Parse(format!("{path}: expected a matrix (array of rows)")))?;
    if rows.len() != dim {
        return Err(Error::Parse(format!(
            "{path}: expected {dim} rows, found {}",
            rows.len()
        )));
    }
    let mut m = CMat::zeros(dim, dim);
    for (i, row) in rows.iter().enumerate() {
        let cells = row
            .as_array()
            .ok_or_else(|| Error::Parse(format!("{path}[{i}]: expected an array of entries")))?;
        if cells.len() != dim {
            return Err(Error::Parse(format!(
                "{path}[{i}]: expected {dim} entries, found {}",
                cells.len()
            )));
        }
        for (j, cell) in cells.iter().enumerate() {
            m[(i, j)] = parse_complex(cell, &format!("{path}[{i}][{j}]"))?;
        }
    }
    Ok(m)
}

/// Parse a model document from JSON text.
pub fn parse_model_document(text: &str) -> Result<ModelDocument> {
    let root: Value =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("model JSON: {e}")))?;
    parse_model_value(&root)
}

/// Parse a model document from an already-decoded JSON value.
pub fn parse_model_value(root: &Value) -> Result<ModelDocument> {
    let obj = root
        .as_object()
        .ok_or_else(|| Error::Parse("model: expected a JSON object".into()))?;
    let dimension = obj
        .get("dimension")
        .ok_or_else(|| Error::Parse("model.dimension: missing".into()))?
        .as_u64()
        .ok_or_else(|| Error::Parse("model.dimension: expected a positive integer".into()))?
        as usize;
    if dimension == 0 {
        return Err(Error::Parse("model.dimension: must be at least 1".into()));
    }

    let lindblad = match (obj.get("hamiltonian"), obj.get("jump_operators")) {
        (None, None) => None,
        (Some(_), None) => {
            return Err(Error::Parse(
                "model.jump_operators: missing (hamiltonian given)".into(),
            ))
        }
        (None, Some(_)) => {
            return Err(Error::Parse(
                "model.hamiltonian: missing (jump_operators given)".into(),
            ))
        }
        (Some(h), Some(js)) => {
            let hmat = parse_matrix(h, dimension, "model.hamiltonian")?;
            let hamiltonian = ComplexOperator::hermitian(hmat)
                .map_err(|e| Error::Parse(format!("model.hamiltonian: {e}")))?;
            let jump_arr = js.as_array().ok_or_else(|| {
                Error::Parse("model.jump_operators: expected an array of matrices".into())
            })?;
            let mut jumps = Vec::with_capacity(jump_arr.len());
            for (k, jv) in jump_arr.iter().enumerate() {
                let m = parse_matrix(jv, dimension, &format!("model.jump_operators[{k}]"))?;
                jumps.push(
                    ComplexOperator::new(m)
                        .map_err(|e| Error::Parse(format!("model.jump_operators[{k}]: {e}")))?,
                );
            }
            Some(
                LindbladModel::new(hamiltonian, jumps)
                    .map_err(|e| Error::Parse(format!("model: {e}")))?,
            )
        }
    };

    let kraus = match obj.get("kraus_operators") {
        None => None,
        Some(ks) => {
            let arr = ks.as_array().ok_or_else(|| {
                Error::Parse("model.kraus_operators: expected an array of matrices".into())
            })?;
            let mut ops = Vec::with_capacity(arr.len());
            for (k, kv) in arr.iter().enumerate() {
                let m = parse_matrix(kv, dimension, &format!("model.kraus_operators[{k}]"))?;
                ops.push(
                    ComplexOperator::new(m)
                        .map_err(|e| Error::Parse(format!("model.kraus_operators[{k}]: {e}")))?,
                );
            }
            Some(KrausFamily::new(ops).map_err(|e| Error::Parse(format!("model: {e}")))?)
        }
    };

    if lindblad.is_none() && kraus.is_none() {
        return Err(Error::Parse(
            "model: needs 'hamiltonian' + 'jump_operators' and/or 'kraus_operators'".into(),
        ));
    }
    Ok(ModelDocument {
        dimension,
        lindblad,
        kraus,
    })
}

fn matrix_to_json(m: &CMat) -> Value {
    Value::Array(
        (0..m.rows())
            .map(|i| {
                Value::Array(
                    (0..m.cols())
                        .map(|j| json!([m[(i, j)].re, m[(i, j)].im]))
                        .collect(),
                )
            })
            .collect(),
    )
}

/// Serialize a document back into the wire format (used to echo the model in
/// result headers).
pub fn model_document_to_json(doc: &ModelDocument) -> Value {
    let mut obj = serde_json::Map::new();
    obj.insert("dimension".into(), json!(doc.dimension));
    if let Some(model) = &doc.lindblad {
        obj.insert(
            "hamiltonian".into(),
            matrix_to_json(model.hamiltonian().matrix()),
        );
        obj.insert(
            "jump_operators".into(),
            Value::Array(
                model
                    .jump_ops()
                    .iter()
                    .map(|v| matrix_to_json(v.matrix()))
                    .collect(),
            ),
        );
    }
    if let Some(fam) = &doc.kraus {
        obj.insert(
            "kraus_operators".into(),
            Value::Array(
                fam.ops()
                    .iter()
                    .map(|a| matrix_to_json(a.matrix()))
                    .collect(),
            ),
        );
    }
    Value::Object(obj)
}
