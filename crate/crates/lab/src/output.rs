//! Result files: CSV tables, JSON reports and a plot script that reads the
//! tables back. Every file is written atomically.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use solitonlab_core::io::write_atomic;

use crate::error::{LabError, Result};

pub struct OutputSet {
    dir: PathBuf,
    prefix: String,
    written: Vec<PathBuf>,
    tables: Vec<(String, Vec<String>)>,
}

impl OutputSet {
    pub fn new(dir: &Path, prefix: &str) -> Self {
        OutputSet {
            dir: dir.to_path_buf(),
            prefix: prefix.to_string(),
            written: vec![],
            tables: vec![],
        }
    }

    fn path(&self, name: &str, ext: &str) -> PathBuf {
        self.dir.join(format!("{}_{name}.{ext}", self.prefix))
    }

    fn put(&mut self, path: PathBuf, bytes: &[u8]) -> Result<()> {
        write_atomic(&path, bytes).map_err(|e| LabError::Io(e.to_string()))?;
        self.written.push(path);
        Ok(())
    }

    /// Header row, then one line per row. Numbers use the shortest
    /// representation that reads back exactly.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<PathBuf> {
        let mut text = header.join(",");
        text.push('\n');
        for row in rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        let path = self.path(name, "csv");
        self.put(path.clone(), text.as_bytes())?;
        self.tables.push((
            file_name(&path),
            header.iter().map(|s| s.to_string()).collect(),
        ));
        Ok(path)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        let path = self.path(name, "json");
        self.put(path.clone(), text.as_bytes())?;
        Ok(path)
    }

    pub fn raw(&mut self, name: &str, ext: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.path(name, ext);
        self.put(path.clone(), bytes)?;
        Ok(path)
    }

    /// Writes the plot script `<prefix>_<name>.py` and returns every path
    /// written, script last.
    pub fn finish(mut self, name: &str) -> Result<Vec<PathBuf>> {
        let script = plot_script(&self.tables);
        let path = self.path(name, "py");
        self.put(path, script.as_bytes())?;
        Ok(self.written)
    }
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// One figure per table, first column on the horizontal axis. Columns whose
/// name starts with `distance` or `error` go on a log scale.
fn plot_script(tables: &[(String, Vec<String>)]) -> String {
    let mut s = String::new();
    s.push_str("import csv\nimport os\n\nimport matplotlib\nmatplotlib.use(\"Agg\")\nimport matplotlib.pyplot as plt\n\n");
    s.push_str("HERE = os.path.dirname(os.path.abspath(__file__))\nTABLES = [\n");
    for (file, cols) in tables {
        let quoted: Vec<String> = cols.iter().map(|c| format!("{c:?}")).collect();
        let _ = writeln!(s, "    ({file:?}, [{}]),", quoted.join(", "));
    }
    s.push_str("]\n\n");
    s.push_str(
        r#"
def load(name):
    with open(os.path.join(HERE, name), newline="") as f:
        rows = list(csv.reader(f))
    return [[float(v) for v in r] for r in rows[1:]]


for name, cols in TABLES:
    rows = load(name)
    if not rows:
        continue
    fig, ax = plt.subplots()
    x = [r[0] for r in rows]
    for k, col in enumerate(cols[1:], start=1):
        ax.plot(x, [r[k] for r in rows], label=col)
    if all(c.startswith(("distance", "error")) for c in cols[1:]):
        ax.set_yscale("log")
    ax.set_xlabel(cols[0])
    ax.legend()
    fig.savefig(os.path.join(HERE, os.path.splitext(name)[0] + ".png"), dpi=120)
    plt.close(fig)
"#,
    );
    s
}
