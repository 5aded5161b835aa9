//! Tolerant PE parser feeding the feature extractor.
//!
//! Parsing is total: malformed input degrades to [`ParseOutcome::Degraded`]
//! with a reason code, it never errors out. Degraded files are still scanned
//! through their byte-level features downstream.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Windows loader refuses images with more sections than this; we parse up
/// to the cap and flag anything beyond it as degenerate.
pub const MAX_SECTIONS: usize = 96;

const DOS_MAGIC: &[u8; 2] = b"MZ";
const PE_SIGNATURE: &[u8; 4] = b"PE\0\0";
const MAGIC_PE32: u16 = 0x10B;
const MAGIC_PE32_PLUS: u16 = 0x20B;

/// Canonical names for the first 15 data directories (the 16th slot is
/// reserved and excluded from features).
pub const DATA_DIRECTORY_NAMES: [&str; 15] = [
    "EXPORT",
    "IMPORT",
    "RESOURCE",
    "EXCEPTION",
    "CERTIFICATE",
    "BASERELOC",
    "DEBUG",
    "ARCHITECTURE",
    "GLOBALPTR",
    "TLS",
    "LOAD_CONFIG",
    "BOUND_IMPORT",
    "IAT",
    "DELAY_IMPORT",
    "CLR_RUNTIME",
];

pub const DIR_EXPORT: usize = 0;
pub const DIR_IMPORT: usize = 1;
pub const DIR_RESOURCE: usize = 2;
pub const DIR_CERTIFICATE: usize = 4;
pub const DIR_BASERELOC: usize = 5;
pub const DIR_DEBUG: usize = 6;
pub const DIR_TLS: usize = 9;

/// Section characteristics bits we name for hashed-flag features.
pub const SECTION_FLAG_NAMES: [(u32, &str); 8] = [
    (0x0000_0020, "CNT_CODE"),
    (0x0000_0040, "CNT_INITIALIZED_DATA"),
    (0x0000_0080, "CNT_UNINITIALIZED_DATA"),
    (0x0200_0000, "MEM_DISCARDABLE"),
    (0x0400_0000, "MEM_NOT_CACHED"),
    (0x2000_0000, "MEM_EXECUTE"),
    (0x4000_0000, "MEM_READ"),
    (0x8000_0000, "MEM_WRITE"),
];

pub const SCN_MEM_EXECUTE: u32 = 0x2000_0000;
pub const SCN_MEM_READ: u32 = 0x4000_0000;
pub const SCN_MEM_WRITE: u32 = 0x8000_0000;

/// COFF file characteristics names used for hashed-flag features.
pub const COFF_FLAG_NAMES: [(u16, &str); 8] = [
    (0x0001, "RELOCS_STRIPPED"),
    (0x0002, "EXECUTABLE_IMAGE"),
    (0x0020, "LARGE_ADDRESS_AWARE"),
    (0x0100, "32BIT_MACHINE"),
    (0x0200, "DEBUG_STRIPPED"),
    (0x1000, "SYSTEM"),
    (0x2000, "DLL"),
    (0x4000, "UP_SYSTEM_ONLY"),
];

/// DLL characteristics names used for hashed-flag features.
pub const DLL_FLAG_NAMES: [(u16, &str); 8] = [
    (0x0020, "HIGH_ENTROPY_VA"),
    (0x0040, "DYNAMIC_BASE"),
    (0x0080, "FORCE_INTEGRITY"),
    (0x0100, "NX_COMPAT"),
    (0x0400, "NO_SEH"),
    (0x0800, "NO_BIND"),
    (0x2000, "WDM_DRIVER"),
    (0x8000, "TERMINAL_SERVER_AWARE"),
];

/// A raw file plus its identity digest.
#[derive(Debug, Clone)]
pub struct RawBinary {
    pub bytes: Vec<u8>,
    pub source_path: String,
    pub sha256: [u8; 32],
}

impl RawBinary {
    pub fn new(bytes: Vec<u8>, source_path: impl Into<String>) -> Self {
        let sha256 = sha256_digest(&bytes);
        Self {
            bytes,
            source_path: source_path.into(),
            sha256,
        }
    }

    pub fn from_file(path: &std::path::Path) -> std::io::Result<Self> {
        let bytes = std::fs::read(path)?;
        Ok(Self::new(bytes, path.to_string_lossy()))
    }

    pub fn sha256_hex(&self) -> String {
        hex::encode(self.sha256)
    }
}

pub fn sha256_digest(bytes: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoffHeader {
    pub machine: u16,
    pub number_of_sections: u32,
    pub timestamp: u32,
    pub characteristics: u16,
    pub number_of_symbols: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OptionalHeaderInfo {
    pub magic: u16,
    pub subsystem: u16,
    pub dll_characteristics: u16,
    pub size_of_code: u64,
    pub size_of_headers: u64,
    pub size_of_image: u64,
    pub size_of_heap_commit: u64,
    pub entry_point: u32,
    pub major_image_version: u16,
    pub minor_image_version: u16,
    pub major_linker_version: u8,
    pub minor_linker_version: u8,
    pub major_os_version: u16,
    pub minor_os_version: u16,
    pub major_subsystem_version: u16,
    pub minor_subsystem_version: u16,
}

impl OptionalHeaderInfo {
    pub fn is_pe32(&self) -> bool {
        self.magic == MAGIC_PE32
    }

    pub fn is_pe32_plus(&self) -> bool {
        self.magic == MAGIC_PE32_PLUS
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionInfo {
    pub name: String,
    pub raw_size: u64,
    pub virtual_size: u64,
    pub entropy: f64,
    pub characteristics: u32,
    pub is_entry_section: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportEntry {
    /// Lower-cased DLL name.
    pub library: String,
    /// Function name, or `ordinal<N>` for by-ordinal imports.
    pub symbol: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataDirectory {
    pub name: String,
    pub virtual_address: u32,
    pub size: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedPe {
    pub dos_ok: bool,
    pub coff: CoffHeader,
    pub optional: OptionalHeaderInfo,
    pub sections: Vec<SectionInfo>,
    pub imports: Vec<ImportEntry>,
    pub exports: Vec<String>,
    /// Exactly 16 entries; absent directories are zero-filled.
    pub data_directories: Vec<DataDirectory>,
    pub overlay_size: u64,
}

impl ParsedPe {
    pub fn directory(&self, index: usize) -> Option<&DataDirectory> {
        self.data_directories.get(index)
    }

    pub fn has_directory(&self, index: usize) -> bool {
        self.data_directories
            .get(index)
            .map(|d| d.virtual_address != 0 || d.size != 0)
            .unwrap_or(false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegradeReason {
    EmptyFile,
    TruncatedDosHeader,
    NotMz,
    /// The PE signature offset is missing or unresolvable.
    TruncatedPeHeader,
    BadPeSignature,
    TruncatedCoffHeader,
    TruncatedOptionalHeader,
    BadOptionalMagic,
    /// Section count exceeds the loader cap of 96.
    DegenerateSectionCount,
    TruncatedSectionTable,
}

/// Partial parse result for malformed files. Carries whatever headers were
/// recoverable; structured features are zeroed for these downstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseDegraded {
    pub reason: DegradeReason,
    pub file_size: u64,
    pub coff: Option<CoffHeader>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ParseOutcome {
    Parsed(ParsedPe),
    Degraded(ParseDegraded),
}

impl ParseOutcome {
    pub fn parsed(&self) -> Option<&ParsedPe> {
        match self {
            ParseOutcome::Parsed(pe) => Some(pe),
            ParseOutcome::Degraded(_) => None,
        }
    }

    pub fn is_parsed(&self) -> bool {
        self.parsed().is_some()
    }
}

fn read_u16(bytes: &[u8], off: usize) -> Option<u16> {
    Some(u16::from_le_bytes(bytes.get(off..off + 2)?.try_into().ok()?))
}

fn read_u32(bytes: &[u8], off: usize) -> Option<u32> {
    Some(u32::from_le_bytes(bytes.get(off..off + 4)?.try_into().ok()?))
}

fn read_u64(bytes: &[u8], off: usize) -> Option<u64> {
    Some(u64::from_le_bytes(bytes.get(off..off + 8)?.try_into().ok()?))
}

/// Shannon entropy in bits over byte-value frequencies. Empty input is 0.
pub fn section_entropy(bytes: &[u8]) -> f64 {
    if bytes.is_empty() {
        return 0.0;
    }
    let mut counts = [0u64; 256];
    for &b in bytes {
        counts[b as usize] += 1;
    }
    let total = bytes.len() as f64;
    let mut h = 0.0;
    for &c in &counts {
        if c > 0 {
            let p = c as f64 / total;
            h -= p * p.log2();
        }
    }
    h
}

struct SectionSpan {
    virtual_address: u32,
    virtual_size: u32,
    raw_offset: u32,
    raw_size: u32,
}

/// Parse raw bytes into a structured PE view, degrading on malformed input.
pub fn parse_pe(raw: &RawBinary) -> ParseOutcome {
    let bytes = &raw.bytes;
    let file_size = bytes.len() as u64;
    let degraded = |reason, coff| {
        ParseOutcome::Degraded(ParseDegraded {
            reason,
            file_size,
            coff,
        })
    };

    if bytes.is_empty() {
        return degraded(DegradeReason::EmptyFile, None);
    }
    if bytes.len() < 0x40 {
        return degraded(DegradeReason::TruncatedDosHeader, None);
    }
    if &bytes[0..2] != DOS_MAGIC {
        return degraded(DegradeReason::NotMz, None);
    }
    let e_lfanew = read_u32(bytes, 0x3C).unwrap() as usize;
    // An offset inside the DOS header or past the file cannot hold a
    // signature; treat both as an unresolvable PE header.
    if e_lfanew < 0x40 || e_lfanew.saturating_add(4) > bytes.len() {
        return degraded(DegradeReason::TruncatedPeHeader, None);
    }
    if &bytes[e_lfanew..e_lfanew + 4] != PE_SIGNATURE {
        return degraded(DegradeReason::BadPeSignature, None);
    }

    let coff_off = e_lfanew + 4;
    if coff_off + 20 > bytes.len() {
        return degraded(DegradeReason::TruncatedCoffHeader, None);
    }
    let coff = CoffHeader {
        machine: read_u16(bytes, coff_off).unwrap(),
        number_of_sections: read_u16(bytes, coff_off + 2).unwrap() as u32,
        timestamp: read_u32(bytes, coff_off + 4).unwrap(),
        number_of_symbols: read_u32(bytes, coff_off + 12).unwrap(),
        characteristics: read_u16(bytes, coff_off + 18).unwrap(),
    };
    let size_of_optional = read_u16(bytes, coff_off + 16).unwrap() as usize;
    if coff.number_of_sections as usize > MAX_SECTIONS {
        return degraded(DegradeReason::DegenerateSectionCount, Some(coff));
    }

    let opt_off = coff_off + 20;
    if size_of_optional < 2 || opt_off + size_of_optional > bytes.len() {
        return degraded(DegradeReason::TruncatedOptionalHeader, Some(coff));
    }
    let magic = read_u16(bytes, opt_off).unwrap();
    if magic != MAGIC_PE32 && magic != MAGIC_PE32_PLUS {
        return degraded(DegradeReason::BadOptionalMagic, Some(coff));
    }
    let is_plus = magic == MAGIC_PE32_PLUS;
    // Field offsets diverge after BaseOfCode because PE32 has BaseOfData
    // and PE32+ widens ImageBase to 8 bytes.
    let (min_opt, subsystem_off, dll_off, heap_commit_off, dirs_count_off) = if is_plus {
        (112, 68, 70, 96, 108)
    } else {
        (96, 68, 70, 84, 92)
    };
    if size_of_optional < min_opt {
        return degraded(DegradeReason::TruncatedOptionalHeader, Some(coff));
    }
    let optional = OptionalHeaderInfo {
        magic,
        major_linker_version: bytes[opt_off + 2],
        minor_linker_version: bytes[opt_off + 3],
        size_of_code: read_u32(bytes, opt_off + 4).unwrap() as u64,
        entry_point: read_u32(bytes, opt_off + 16).unwrap(),
        major_os_version: read_u16(bytes, opt_off + 40).unwrap(),
        minor_os_version: read_u16(bytes, opt_off + 42).unwrap(),
        major_image_version: read_u16(bytes, opt_off + 44).unwrap(),
        minor_image_version: read_u16(bytes, opt_off + 46).unwrap(),
        major_subsystem_version: read_u16(bytes, opt_off + 48).unwrap(),
        minor_subsystem_version: read_u16(bytes, opt_off + 50).unwrap(),
        size_of_image: read_u32(bytes, opt_off + 56).unwrap() as u64,
        size_of_headers: read_u32(bytes, opt_off + 60).unwrap() as u64,
        subsystem: read_u16(bytes, opt_off + subsystem_off).unwrap(),
        dll_characteristics: read_u16(bytes, opt_off + dll_off).unwrap(),
        size_of_heap_commit: if is_plus {
            read_u64(bytes, opt_off + heap_commit_off).unwrap_or(0)
        } else {
            read_u32(bytes, opt_off + heap_commit_off).unwrap_or(0) as u64
        },
    };

    let mut data_directories: Vec<DataDirectory> = (0..16)
        .map(|i| DataDirectory {
            name: DATA_DIRECTORY_NAMES
                .get(i)
                .copied()
                .unwrap_or("RESERVED")
                .to_string(),
            virtual_address: 0,
            size: 0,
        })
        .collect();
    let declared_dirs = read_u32(bytes, opt_off + dirs_count_off).unwrap_or(0) as usize;
    let dirs_off = opt_off + dirs_count_off + 4;
    for (i, dir) in data_directories
        .iter_mut()
        .enumerate()
        .take(declared_dirs.min(16))
    {
        let off = dirs_off + i * 8;
        if off + 8 > opt_off + size_of_optional {
            break;
        }
        dir.virtual_address = read_u32(bytes, off).unwrap_or(0);
        dir.size = read_u32(bytes, off + 4).unwrap_or(0);
    }

    let sect_off = opt_off + size_of_optional;
    let n_sections = coff.number_of_sections as usize;
    if sect_off + n_sections * 40 > bytes.len() {
        return degraded(DegradeReason::TruncatedSectionTable, Some(coff));
    }
    let mut sections = Vec::with_capacity(n_sections);
    let mut spans = Vec::with_capacity(n_sections);
    let mut data_end = optional.size_of_headers.min(file_size);
    for i in 0..n_sections {
        let off = sect_off + i * 40;
        let name_raw = &bytes[off..off + 8];
        let name_end = name_raw.iter().position(|&b| b == 0).unwrap_or(8);
        let name = String::from_utf8_lossy(&name_raw[..name_end]).into_owned();
        let virtual_size = read_u32(bytes, off + 8).unwrap();
        let virtual_address = read_u32(bytes, off + 12).unwrap();
        let declared_raw = read_u32(bytes, off + 16).unwrap();
        let raw_offset = read_u32(bytes, off + 20).unwrap();
        let characteristics = read_u32(bytes, off + 36).unwrap();
        // Clamp the raw slice to the file so entropy reflects bytes we
        // actually read.
        let avail = bytes.len().saturating_sub(raw_offset as usize);
        let read_size = (declared_raw as usize).min(avail);
        let slice = &bytes[raw_offset as usize..raw_offset as usize + read_size];
        let span_end = raw_offset as u64 + read_size as u64;
        if read_size > 0 {
            data_end = data_end.max(span_end);
        }
        let extent = virtual_size.max(declared_raw);
        let is_entry_section = optional.entry_point >= virtual_address
            && (optional.entry_point as u64) < virtual_address as u64 + extent as u64;
        sections.push(SectionInfo {
            name,
            raw_size: read_size as u64,
            virtual_size: virtual_size as u64,
            entropy: section_entropy(slice),
            characteristics,
            is_entry_section,
        });
        spans.push(SectionSpan {
            virtual_address,
            virtual_size,
            raw_offset,
            raw_size: read_size as u32,
        });
    }

    let imports = parse_imports(bytes, &data_directories, &spans, is_plus);
    let exports = parse_exports(bytes, &data_directories, &spans);
    let overlay_size = file_size.saturating_sub(data_end);

    ParseOutcome::Parsed(ParsedPe {
        dos_ok: true,
        coff,
        optional,
        sections,
        imports,
        exports,
        data_directories,
        overlay_size,
    })
}

fn rva_to_offset(rva: u32, spans: &[SectionSpan]) -> Option<usize> {
    for s in spans {
        let extent = s.virtual_size.max(s.raw_size);
        if rva >= s.virtual_address && rva < s.virtual_address.saturating_add(extent) {
            let delta = rva - s.virtual_address;
            if delta < s.raw_size {
                return Some((s.raw_offset + delta) as usize);
            }
            return None;
        }
    }
    None
}

fn read_cstr(bytes: &[u8], off: usize, max: usize) -> Option<String> {
    let slice = bytes.get(off..)?;
    let end = slice.iter().take(max).position(|&b| b == 0)?;
    if end == 0 {
        return None;
    }
    Some(String::from_utf8_lossy(&slice[..end]).into_owned())
}

const MAX_IMPORT_DESCRIPTORS: usize = 1024;
const MAX_IMPORTS_PER_DLL: usize = 4096;
const MAX_EXPORT_NAMES: usize = 16384;

fn parse_imports(
    bytes: &[u8],
    dirs: &[DataDirectory],
    spans: &[SectionSpan],
    is_plus: bool,
) -> Vec<ImportEntry> {
    let mut out = Vec::new();
    let dir = &dirs[DIR_IMPORT];
    if dir.virtual_address == 0 {
        return out;
    }
    for desc_idx in 0..MAX_IMPORT_DESCRIPTORS {
        let desc_rva = dir.virtual_address.wrapping_add((desc_idx * 20) as u32);
        let Some(off) = rva_to_offset(desc_rva, spans) else {
            break;
        };
        let (Some(original_first_thunk), Some(name_rva), Some(first_thunk)) = (
            read_u32(bytes, off),
            read_u32(bytes, off + 12),
            read_u32(bytes, off + 16),
        ) else {
            break;
        };
        if original_first_thunk == 0 && name_rva == 0 && first_thunk == 0 {
            break;
        }
        let Some(name_off) = rva_to_offset(name_rva, spans) else {
            continue;
        };
        let Some(library) = read_cstr(bytes, name_off, 256) else {
            continue;
        };
        let library = library.to_ascii_lowercase();
        let thunk_rva = if original_first_thunk != 0 {
            original_first_thunk
        } else {
            first_thunk
        };
        let thunk_width = if is_plus { 8 } else { 4 };
        for i in 0..MAX_IMPORTS_PER_DLL {
            let Some(toff) = rva_to_offset(thunk_rva.wrapping_add((i * thunk_width) as u32), spans)
            else {
                break;
            };
            let entry = if is_plus {
                read_u64(bytes, toff)
            } else {
                read_u32(bytes, toff).map(|v| v as u64)
            };
            let Some(entry) = entry else { break };
            if entry == 0 {
                break;
            }
            let ordinal_bit = if is_plus { 1u64 << 63 } else { 1u64 << 31 };
            let symbol = if entry & ordinal_bit != 0 {
                format!("ordinal{}", entry & 0xFFFF)
            } else {
                // Hint/name table: u16 hint then the symbol string.
                let Some(hn_off) = rva_to_offset(entry as u32, spans) else {
                    continue;
                };
                match read_cstr(bytes, hn_off + 2, 512) {
                    Some(s) => s,
                    None => continue,
                }
            };
            out.push(ImportEntry {
                library: library.clone(),
                symbol,
            });
        }
    }
    out
}

fn parse_exports(bytes: &[u8], dirs: &[DataDirectory], spans: &[SectionSpan]) -> Vec<String> {
    let mut out = Vec::new();
    let dir = &dirs[DIR_EXPORT];
    if dir.virtual_address == 0 {
        return out;
    }
    let Some(off) = rva_to_offset(dir.virtual_address, spans) else {
        return out;
    };
    let (Some(number_of_names), Some(names_rva)) =
        (read_u32(bytes, off + 24), read_u32(bytes, off + 32))
    else {
        return out;
    };
    for i in 0..(number_of_names as usize).min(MAX_EXPORT_NAMES) {
        let Some(ptr_off) = rva_to_offset(names_rva.wrapping_add((i * 4) as u32), spans) else {
            break;
        };
        let Some(name_rva) = read_u32(bytes, ptr_off) else {
            break;
        };
        let Some(name_off) = rva_to_offset(name_rva, spans) else {
            continue;
        };
        if let Some(name) = read_cstr(bytes, name_off, 512) {
            out.push(name);
        }
    }
    out
}
