//! On-disk cache of basis tables.
//!
//! An entry is one file: the hex SHA-256 of the body on the first line, then
//! the JSON body `{key, value}`. Stores go through a temporary file in the
//! cache directory followed by a rename, so readers never see a partial
//! entry.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Identity of a cached table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheKey {
    pub model: String,
    pub level: usize,
    /// Hash of the grid specification the table was built for.
    pub grid_hash: String,
}

impl CacheKey {
    pub fn new(model: impl Into<String>, level: usize, grid_spec: &str) -> Self {
        CacheKey { model: model.into(), level, grid_hash: sha256_hex(grid_spec.as_bytes()) }
    }

    fn file_name(&self) -> String {
        let id = format!("{}\n{}\n{}", self.model, self.level, self.grid_hash);
        format!("{}.entry", &sha256_hex(id.as_bytes())[..32])
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize, Deserialize)]
struct Entry<T> {
    key: CacheKey,
    value: T,
}

/// Outcome of a lookup.
#[derive(Debug, PartialEq)]
pub enum Lookup<T> {
    Hit(T),
    Miss,
    /// The entry exists but failed its checksum or did not parse.
    Corrupt(String),
}

#[derive(Clone, Debug)]
pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Cache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(key.file_name())
    }

    pub fn lookup<T: DeserializeOwned>(&self, key: &CacheKey) -> Lookup<T> {
        let path = self.path(key);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Lookup::Miss,
            Err(e) => return Lookup::Corrupt(format!("{}: {e}", path.display())),
        };
        let Some(split) = bytes.iter().position(|&b| b == b'\n') else {
            return Lookup::Corrupt(format!("{}: missing checksum line", path.display()));
        };
        let (sum, body) = (&bytes[..split], &bytes[split + 1..]);
        if sum != sha256_hex(body).as_bytes() {
            return Lookup::Corrupt(format!("{}: checksum mismatch", path.display()));
        }
        match serde_json::from_slice::<Entry<T>>(body) {
            // A different key under the same file name is a hash collision;
            // treat it as a miss so the store overwrites it.
            Ok(e) if e.key == *key => Lookup::Hit(e.value),
            Ok(_) => Lookup::Miss,
            Err(e) => Lookup::Corrupt(format!("{}: {e}", path.display())),
        }
    }

    pub fn store<T: Serialize>(&self, key: &CacheKey, value: &T) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(&self.dir)?;
        let body = serde_json::to_vec(&Entry { key: key.clone(), value })?;
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(sha256_hex(&body).as_bytes())?;
        tmp.write_all(b"\n")?;
        tmp.write_all(&body)?;
        tmp.as_file().sync_all()?;
        let path = self.path(key);
        tmp.persist(&path).map_err(|e| e.error)?;
        Ok(path)
    }

    /// Returns the cached value or computes, stores and returns it. Corrupt
    /// entries are reported through `warn` and replaced.
    pub fn get_or_compute<T, E>(
        &self,
        key: &CacheKey,
        compute: impl FnOnce() -> Result<T, E>,
        mut warn: impl FnMut(&str),
    ) -> Result<(T, bool), E>
    where
        T: Serialize + DeserializeOwned,
    {
        match self.lookup(key) {
            Lookup::Hit(v) => return Ok((v, true)),
            Lookup::Miss => {}
            Lookup::Corrupt(msg) => warn(&format!("cache entry rejected, recomputing ({msg})")),
        }
        let v = compute()?;
        if let Err(e) = self.store(key, &v) {
            warn(&format!("cannot write cache entry: {e}"));
        }
        Ok((v, false))
    }
}
