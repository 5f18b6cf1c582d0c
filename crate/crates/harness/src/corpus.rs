use std::fs;
use std::io;
use std::path::Path;

/// A benchmark program. Its top-level code runs once; the function named
/// by the experiment's entry is then called repeatedly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Benchmark {
    pub name: String,
    pub source: String,
}

const BUILTIN: [(&str, &str); 9] = [
    ("sum", include_str!("../../../corpus/sum.js")),
    ("bits_in_byte", include_str!("../../../corpus/bits_in_byte.js")),
    ("globals_bitwise_and", include_str!("../../../corpus/globals_bitwise_and.js")),
    ("recursive_fib", include_str!("../../../corpus/recursive_fib.js")),
    ("float_mix", include_str!("../../../corpus/float_mix.js")),
    ("string_concat_loop", include_str!("../../../corpus/string_concat_loop.js")),
    ("array_sum", include_str!("../../../corpus/array_sum.js")),
    ("closure_counter", include_str!("../../../corpus/closure_counter.js")),
    ("polymorphic_null_object", include_str!("../../../corpus/polymorphic_null_object.js")),
];

/// The corpus shipped with the crate.
pub fn builtin() -> Vec<Benchmark> {
    BUILTIN.iter().map(|(n, s)| Benchmark { name: n.to_string(), source: s.to_string() }).collect()
}

pub fn find(name: &str) -> Option<Benchmark> {
    builtin().into_iter().find(|b| b.name == name)
}

/// Loads every `.js` file of `dir`, sorted by name.
pub fn load_dir(dir: &Path) -> io::Result<Vec<Benchmark>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "js") {
            let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            out.push(Benchmark { name, source: fs::read_to_string(&path)? });
        }
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(out)
}
