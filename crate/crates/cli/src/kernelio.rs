//! Kernel export as coordinate-format sparse matrix text:
//! a header line `%%edlab coo K K nnz`, then `row col re im` per entry
//! (0-based, accumulated duplicates).

use anyhow::Result;
use edlab_core::operator::KernelOperator;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

pub fn export_coo(op: &KernelOperator, path: &Path) -> Result<()> {
    let mut entries: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    op.for_each_entry(|i, j, v| {
        let e = entries.entry((i, j)).or_insert((0.0, 0.0));
        e.0 += v.re;
        e.1 += v.im;
    });
    entries.retain(|_, (re, im)| re.abs() > 0.0 || im.abs() > 0.0);
    let k = op.space.len();
    let mut body = String::new();
    writeln!(body, "%%edlab coo {k} {k} {}", entries.len()).unwrap();
    for ((i, j), (re, im)) in entries {
        writeln!(body, "{i} {j} {re:e} {im:e}").unwrap();
    }
    std::fs::write(path, body)?;
    Ok(())
}
