//! File formats: dataset CSV and posterior draw directories.
//!
//! A dataset CSV has a `group` column (`case` or `control`) and one 0/1 column
//! per pathogen, named in the header. A posterior directory holds one CSV per
//! parameter block, each row keyed by `chain,draw`, plus `manifest.json`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::{Draw, PosteriorSamples};
use crate::model::{BinaryMatrix, Dataset, ModelParams, RateMatrix};

pub const GROUP_COLUMN: &str = "group";

pub fn read_dataset(path: &Path, include_other_cause: bool) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path)?;
    read_dataset_from(&mut reader, include_other_cause)
}

pub fn read_dataset_from<R: std::io::Read>(reader: &mut csv::Reader<R>, include_other_cause: bool) -> Result<Dataset> {
    let headers = reader.headers()?.clone();
    let group_col = headers
        .iter()
        .position(|h| h.trim() == GROUP_COLUMN)
        .ok_or_else(|| Error::Format(format!("dataset has no '{GROUP_COLUMN}' column")))?;
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != group_col)
        .map(|(_, h)| h.trim().to_string())
        .collect();
    let mut cases = Vec::new();
    let mut controls = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let mut row = Vec::with_capacity(names.len());
        for (i, field) in rec.iter().enumerate() {
            if i == group_col {
                continue;
            }
            row.push(match field.trim() {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::Format(format!(
                        "row {}: measurement '{other}' is not 0 or 1",
                        line + 2
                    )))
                }
            });
        }
        match rec.get(group_col).map(str::trim) {
            Some("case") => cases.push(row),
            Some("control") => controls.push(row),
            other => {
                return Err(Error::Format(format!(
                    "row {}: group {:?} is neither 'case' nor 'control'",
                    line + 2,
                    other
                )))
            }
        }
    }
    let to_matrix = |rows: &[Vec<u8>], what: &str| -> Result<BinaryMatrix> {
        if rows.is_empty() {
            return Err(Error::Format(format!("dataset has no {what} rows")));
        }
        BinaryMatrix::from_rows(rows)
    };
    Dataset::new(
        to_matrix(&cases, "case")?,
        to_matrix(&controls, "control")?,
        names,
        include_other_cause,
    )
}

/// Cases first, then controls.
pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![GROUP_COLUMN.to_string()];
    header.extend(dataset.pathogens().iter().cloned());
    w.write_record(&header)?;
    for (label, m) in [("case", dataset.cases()), ("control", dataset.controls())] {
        for r in m.rows() {
            let mut rec = vec![label.to_string()];
            rec.extend(r.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorManifest {
    pub n_chains: usize,
    pub draws_per_chain: usize,
    pub n_dims: usize,
    pub n_subclasses: usize,
    pub class_names: Vec<String>,
    pub n_cases: usize,
    pub n_controls: usize,
    /// Free-form provenance: seeds, config hash, versions.
    #[serde(default)]
    pub provenance: BTreeMap<String, serde_json::Value>,
}

const FILES: [&str; 9] = [
    "pi.csv",
    "theta.csv",
    "psi.csv",
    "eta.csv",
    "nu.csv",
    "alpha.csv",
    "case_class.csv",
    "case_subclass.csv",
    "control_subclass.csv",
];

fn block_writer(dir: &Path, file: &str, columns: Vec<String>) -> Result<csv::Writer<std::fs::File>> {
    let mut w = csv::Writer::from_path(dir.join(file))?;
    let mut header = vec!["chain".to_string(), "draw".to_string()];
    header.extend(columns);
    w.write_record(&header)?;
    Ok(w)
}

/// Write draws as per-block CSVs plus a manifest.
pub fn write_posterior(
    posterior: &PosteriorSamples,
    dir: &Path,
    provenance: BTreeMap<String, serde_json::Value>,
) -> Result<PosteriorManifest> {
    std::fs::create_dir_all(dir)?;
    let first = &posterior.chains()[0][0];
    let (jd, k) = (posterior.n_dims(), posterior.n_subclasses());
    let rate_cols = |name: &str| -> Vec<String> {
        (0..jd)
            .flat_map(|j| (0..k).map(move |s| (j, s)))
            .map(|(j, s)| format!("{name}[{j},{s}]"))
            .collect()
    };
    let idx_cols = |name: &str, n: usize| (0..n).map(|i| format!("{name}[{i}]")).collect::<Vec<_>>();
    let mut writers = [
        block_writer(dir, FILES[0], posterior.class_names().to_vec())?,
        block_writer(dir, FILES[1], rate_cols("theta"))?,
        block_writer(dir, FILES[2], rate_cols("psi"))?,
        block_writer(dir, FILES[3], idx_cols("eta", k))?,
        block_writer(dir, FILES[4], idx_cols("nu", k))?,
        block_writer(dir, FILES[5], vec!["alpha0".into(), "alpha1".into()])?,
        block_writer(dir, FILES[6], idx_cols("I", first.case_class.len()))?,
        block_writer(dir, FILES[7], idx_cols("Z", first.case_subclass.len()))?,
        block_writer(dir, FILES[8], idx_cols("Z0", first.control_subclass.len()))?,
    ];
    let floats = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>();
    let ints = |v: &[u16]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    for (c, chain) in posterior.chains().iter().enumerate() {
        for (t, d) in chain.iter().enumerate() {
            let p = &d.params;
            let blocks = [
                floats(&p.pi),
                floats(p.theta.values()),
                floats(p.psi.values()),
                floats(&p.eta),
                floats(&p.nu),
                floats(&[p.alpha0, p.alpha1]),
                ints(&d.case_class),
                ints(&d.case_subclass),
                ints(&d.control_subclass),
            ];
            for (w, block) in writers.iter_mut().zip(blocks) {
                let mut rec = vec![c.to_string(), t.to_string()];
                rec.extend(block);
                w.write_record(&rec)?;
            }
        }
    }
    for w in &mut writers {
        w.flush()?;
    }
    let manifest = PosteriorManifest {
        n_chains: posterior.n_chains(),
        draws_per_chain: posterior.draws_per_chain(),
        n_dims: jd,
        n_subclasses: k,
        class_names: posterior.class_names().to_vec(),
        n_cases: first.case_class.len(),
        n_controls: first.control_subclass.len(),
        provenance,
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

fn read_block<T: std::str::FromStr>(dir: &Path, file: &str, manifest: &PosteriorManifest, width: usize) -> Result<Vec<Vec<T>>> {
    let mut r = csv::Reader::from_path(dir.join(file))?;
    let mut out = Vec::with_capacity(manifest.n_chains * manifest.draws_per_chain);
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != width + 2 {
            return Err(Error::Format(format!(
                "{file}: expected {} fields, found {}",
                width + 2,
                rec.len()
            )));
        }
        let row = rec
            .iter()
            .skip(2)
            .map(|s| s.parse::<T>().map_err(|_| Error::Format(format!("{file}: bad value '{s}'"))))
            .collect::<Result<Vec<T>>>()?;
        out.push(row);
    }
    if out.len() != manifest.n_chains * manifest.draws_per_chain {
        return Err(Error::Format(format!(
            "{file}: expected {} rows, found {}",
            manifest.n_chains * manifest.draws_per_chain,
            out.len()
        )));
    }
    Ok(out)
}

pub fn read_manifest(dir: &Path) -> Result<PosteriorManifest> {
    Ok(serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?)
}

/// Inverse of [`write_posterior`].
pub fn read_posterior(dir: &Path) -> Result<PosteriorSamples> {
    let m = read_manifest(dir)?;
    let (jd, k, l) = (m.n_dims, m.n_subclasses, m.class_names.len());
    let pi = read_block::<f64>(dir, FILES[0], &m, l)?;
    let theta = read_block::<f64>(dir, FILES[1], &m, jd * k)?;
    let psi = read_block::<f64>(dir, FILES[2], &m, jd * k)?;
    let eta = read_block::<f64>(dir, FILES[3], &m, k)?;
    let nu = read_block::<f64>(dir, FILES[4], &m, k)?;
    let alpha = read_block::<f64>(dir, FILES[5], &m, 2)?;
    let ic = read_block::<u16>(dir, FILES[6], &m, m.n_cases)?;
    let zc = read_block::<u16>(dir, FILES[7], &m, m.n_cases)?;
    let z0 = read_block::<u16>(dir, FILES[8], &m, m.n_controls)?;
    let mut chains = vec![Vec::with_capacity(m.draws_per_chain); m.n_chains];
    for g in 0..m.n_chains * m.draws_per_chain {
        let params = ModelParams {
            pi: pi[g].clone(),
            theta: RateMatrix::new(jd, k, theta[g].clone())?,
            psi: RateMatrix::new(jd, k, psi[g].clone())?,
            eta: eta[g].clone(),
            nu: nu[g].clone(),
            alpha0: alpha[g][0],
            alpha1: alpha[g][1],
        };
        chains[g / m.draws_per_chain].push(Draw {
            params,
            case_class: ic[g].clone(),
            case_subclass: zc[g].clone(),
            control_subclass: z0[g].clone(),
        });
    }
    PosteriorSamples::new(chains, m.class_names)
}
