use std::fmt;

use super::LoadError;

/// Scalar stand-ins for what a module load costs beyond its bytes: source
/// location preallocation, template specializations, vtable emission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostModel {
    pub per_module_overhead_bytes: u64,
    pub per_module_overhead_ticks: u64,
    /// Bytes processed per tick. Zero makes byte traffic free in ticks.
    pub bytes_per_tick: u64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            per_module_overhead_bytes: 16384,
            per_module_overhead_ticks: 100,
            bytes_per_tick: 4096,
        }
    }
}

impl CostModel {
    pub fn ticks_for(&self, bytes: u64) -> u64 {
        if self.bytes_per_tick == 0 {
            0
        } else {
            bytes.div_ceil(self.bytes_per_tick)
        }
    }

    pub fn set(&mut self, key: &str, value: u64) -> Result<(), LoadError> {
        match key {
            "per_module_overhead_bytes" | "overhead_bytes" => {
                self.per_module_overhead_bytes = value
            }
            "per_module_overhead_ticks" | "overhead_ticks" => {
                self.per_module_overhead_ticks = value
            }
            "bytes_per_tick" => self.bytes_per_tick = value,
            _ => return Err(LoadError::CostSetting(format!("unknown cost key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply(&mut self, assignment: &str) -> Result<(), LoadError> {
        let (k, v) = assignment.split_once('=').ok_or_else(|| {
            LoadError::CostSetting(format!("expected key=value, got `{assignment}`"))
        })?;
        let v: u64 = v
            .trim()
            .parse()
            .map_err(|_| LoadError::CostSetting(format!("`{v}` is not a non-negative integer")))?;
        self.set(k.trim(), v)
    }
}

/// Cumulative, deterministic cost counters of a session.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadStats {
    /// Module names in load order (imports before their importers).
    pub modules_loaded: Vec<String>,
    pub decls_deserialized: u64,
    pub bytes_read: u64,
    pub headers_parsed: u64,
    pub sim_memory_bytes: u64,
    pub ticks: u64,
    pub lookups: u64,
    /// Candidate modules a lookup loaded that were not credited with its result.
    pub false_positive_loads: u64,
}

impl LoadStats {
    pub fn module_count(&self) -> usize {
        self.modules_loaded.len()
    }

    /// What happened between `earlier` and `self`; `earlier` must be a
    /// snapshot of the same session.
    pub fn since(&self, earlier: &LoadStats) -> LoadStats {
        LoadStats {
            modules_loaded: self.modules_loaded[earlier.modules_loaded.len()..].to_vec(),
            decls_deserialized: self.decls_deserialized - earlier.decls_deserialized,
            bytes_read: self.bytes_read - earlier.bytes_read,
            headers_parsed: self.headers_parsed - earlier.headers_parsed,
            sim_memory_bytes: self.sim_memory_bytes - earlier.sim_memory_bytes,
            ticks: self.ticks - earlier.ticks,
            lookups: self.lookups - earlier.lookups,
            false_positive_loads: self.false_positive_loads - earlier.false_positive_loads,
        }
    }

    /// Field-wise sum; module lists are concatenated.
    pub fn plus(&self, other: &LoadStats) -> LoadStats {
        let mut modules_loaded = self.modules_loaded.clone();
        modules_loaded.extend_from_slice(&other.modules_loaded);
        LoadStats {
            modules_loaded,
            decls_deserialized: self.decls_deserialized + other.decls_deserialized,
            bytes_read: self.bytes_read + other.bytes_read,
            headers_parsed: self.headers_parsed + other.headers_parsed,
            sim_memory_bytes: self.sim_memory_bytes + other.sim_memory_bytes,
            ticks: self.ticks + other.ticks,
            lookups: self.lookups + other.lookups,
            false_positive_loads: self.false_positive_loads + other.false_positive_loads,
        }
    }
}

impl fmt::Display for LoadStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "modules_loaded={}", self.module_count())?;
        writeln!(f, "decls_deserialized={}", self.decls_deserialized)?;
        writeln!(f, "bytes_read={}", self.bytes_read)?;
        writeln!(f, "headers_parsed={}", self.headers_parsed)?;
        writeln!(f, "sim_memory_bytes={}", self.sim_memory_bytes)?;
        writeln!(f, "ticks={}", self.ticks)?;
        writeln!(f, "lookups={}", self.lookups)?;
        write!(f, "false_positive_loads={}", self.false_positive_loads)
    }
}
