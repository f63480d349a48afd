use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use aoi_core::kv::KvDoc;

use crate::CliError;

/// Sidecar describing how an output file was produced. Arguments are kept
/// one per line so `aoi replay` can rerun them verbatim.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub subcommand: String,
    pub args: Vec<String>,
    pub config: String,
    pub seed: Option<u64>,
    pub version: String,
    pub outputs: Vec<PathBuf>,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

impl RunManifest {
    pub fn new(subcommand: &str, args: &[String], config: String, seed: Option<u64>) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            args: args.to_vec(),
            config,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: Vec::new(),
            started_unix_s: unix_now(),
            finished_unix_s: 0.0,
        }
    }

    pub fn to_kv(&self) -> KvDoc {
        let mut kv = KvDoc::new();
        kv.push("subcommand", &self.subcommand)
            .push("version", &self.version)
            .push("config", &self.config);
        if let Some(seed) = self.seed {
            kv.push("seed", seed);
        }
        for (i, out) in self.outputs.iter().enumerate() {
            kv.push(format!("output.{i}"), out.display());
        }
        kv.push("started_unix_s", format!("{:.6}", self.started_unix_s))
            .push("finished_unix_s", format!("{:.6}", self.finished_unix_s))
            .push("argc", self.args.len());
        for (i, a) in self.args.iter().enumerate() {
            kv.push(format!("arg.{i}"), a);
        }
        kv
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let kv = KvDoc::parse(text).map_err(|e| CliError::config(format!("manifest: {e}")))?;
        let get = |k: &str| {
            kv.get(k)
                .map(str::to_string)
                .ok_or_else(|| CliError::config(format!("manifest: missing `{k}`")))
        };
        let argc: usize = get("argc")?
            .parse()
            .map_err(|_| CliError::config("manifest: bad argc"))?;
        let args = (0..argc)
            .map(|i| get(&format!("arg.{i}")))
            .collect::<Result<_, _>>()?;
        let outputs = (0..)
            .map_while(|i| kv.get(&format!("output.{i}")).map(PathBuf::from))
            .collect();
        let num = |k: &str| {
            get(k)
                .ok()
                .and_then(|v| v.parse::<f64>().ok())
                .unwrap_or(0.0)
        };
        Ok(Self {
            subcommand: get("subcommand")?,
            args,
            config: get("config")?,
            seed: kv.get("seed").and_then(|s| s.parse().ok()),
            version: get("version")?,
            outputs,
            started_unix_s: num("started_unix_s"),
            finished_unix_s: num("finished_unix_s"),
        })
    }

    /// Writes `<output>.manifest` next to every output.
    pub fn finish(mut self, outputs: &[&Path]) -> Result<(), CliError> {
        self.outputs = outputs.iter().map(|p| p.to_path_buf()).collect();
        self.finished_unix_s = unix_now();
        let text = self.to_kv().render();
        for out in outputs {
            write_atomic(&manifest_path(out), text.as_bytes())?;
        }
        Ok(())
    }
}

pub fn manifest_path(output: &Path) -> PathBuf {
    sidecar(output, "manifest")
}

pub fn sidecar(output: &Path, ext: &str) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Replaces `path` in one step so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .map_err(|e| CliError::Runtime(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut m = RunManifest::new(
            "sim",
            &[
                "sim".into(),
                "--rho".into(),
                "0.5".into(),
                "--label=a=b".into(),
            ],
            "cfg".into(),
            Some(7),
        );
        m.outputs = vec![PathBuf::from("out/t.csv")];
        m.finished_unix_s = m.started_unix_s + 1.0;
        let back = RunManifest::parse(&m.to_kv().render()).unwrap();
        assert_eq!(back.args, m.args);
        assert_eq!(back.outputs, m.outputs);
        assert_eq!(back.seed, Some(7));
        assert_eq!(back.subcommand, "sim");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(manifest_path(&p), dir.path().join("x.csv.manifest"));
    }
}
