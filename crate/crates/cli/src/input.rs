use std::io::Read;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use nalgebra::Vector3;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use wrenchlab::{contact_at, ContactSpec, FrictionModel, PongConfig, Surface, UncertaintyField, WrenchSet};

pub const SCHEMA: u32 = 1;

const CSV_HEADER: [&str; 6] = ["fx", "fy", "fz", "tx", "ty", "tz"];

/// Raw input bytes with their SHA-256 fingerprint.
pub struct Source {
    pub bytes: Vec<u8>,
    pub fingerprint: String,
}

impl Source {
    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        if path == Path::new("-") {
            std::io::stdin().read_to_end(&mut bytes).context("reading stdin")?;
        } else {
            bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        }
        let fingerprint = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        Ok(Self { bytes, fingerprint })
    }

    pub fn is_json(&self) -> bool {
        self.bytes.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'{')
    }

    /// Parses a versioned JSON document.
    pub fn json<T: DeserializeOwned>(&self) -> Result<T> {
        let value: serde_json::Value = serde_json::from_slice(&self.bytes).context("parsing JSON")?;
        match value.get("schema") {
            None => {}
            Some(v) if v.as_u64() == Some(SCHEMA as u64) => {}
            Some(v) => bail!("unsupported schema {v}, expected {SCHEMA}"),
        }
        serde_json::from_value(value).context("invalid document")
    }

    /// Wrench rows from CSV with the header `fx,fy,fz,tx,ty,tz`.
    pub fn wrenches(&self) -> Result<WrenchSet> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(self.bytes.as_slice());
        let header = rdr.headers().context("reading CSV header")?;
        ensure!(header.iter().eq(CSV_HEADER), "CSV header must be {}", CSV_HEADER.join(","));
        let mut rows = Vec::new();
        for (k, rec) in rdr.deserialize::<[f64; 6]>().enumerate() {
            let row = rec.with_context(|| format!("CSV row {}", k + 1))?;
            ensure!(row.iter().all(|v| v.is_finite()), "CSV row {} is not finite", k + 1);
            rows.push(row);
        }
        ensure!(!rows.is_empty(), "no wrenches in CSV");
        Ok(WrenchSet::from_arrays(&rows))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactInput {
    pub x: [f64; 3],
    #[serde(default)]
    pub n_bar: Option<[f64; 3]>,
    #[serde(default)]
    pub sigma1_sq: Option<f64>,
    #[serde(default)]
    pub sigma2_sq: Option<f64>,
}

/// Contact-spec document. Contacts without `n_bar` are placed on `surface`;
/// variances come from the contact, else from `field`, else zero.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraspInput {
    // checked by `Source::json`
    #[serde(default, rename = "schema")]
    _schema: Option<u32>,
    pub contacts: Vec<ContactInput>,
    pub friction: FrictionModel,
    #[serde(default)]
    pub surface: Option<Surface>,
    #[serde(default)]
    pub field: Option<UncertaintyField>,
    #[serde(default)]
    pub pong: PongConfig,
}

impl GraspInput {
    pub fn resolve(&self) -> Result<Vec<ContactSpec>> {
        self.friction.validate()?;
        ensure!(!self.contacts.is_empty(), "no contacts");
        self.contacts
            .iter()
            .enumerate()
            .map(|(i, c)| self.contact(c).with_context(|| format!("contact {i}")))
            .collect()
    }

    fn contact(&self, c: &ContactInput) -> Result<ContactSpec> {
        let x = Vector3::from(c.x);
        let placed = match (&self.surface, c.n_bar) {
            (Some(s), None) => Some(contact_at(s, &self.field.unwrap_or(UncertaintyField::Constant { sigma_sq: 0.0 }), &x)?),
            (None, None) => bail!("n_bar is required without a surface"),
            (_, Some(_)) => None,
        };
        let field_var = match (&self.surface, &self.field, c.n_bar) {
            (Some(s), Some(f), Some(_)) => Some(f.variances(s, &x)?),
            _ => None,
        };
        let base = placed.map(|p| [p.sigma1_sq, p.sigma2_sq]).or(field_var).unwrap_or([0.0; 2]);
        let s1 = c.sigma1_sq.unwrap_or(base[0]);
        let s2 = c.sigma2_sq.unwrap_or(base[1]);
        Ok(match (placed, c.n_bar) {
            (Some(p), _) => ContactSpec::with_frame(p.x, p.n_bar, p.t1, p.t2, s1, s2)?,
            (None, Some(n)) => ContactSpec::new(x, Vector3::from(n), s1, s2)?,
            (None, None) => unreachable!(),
        })
    }
}
