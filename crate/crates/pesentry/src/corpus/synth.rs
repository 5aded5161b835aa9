//! Synthetic PE writer and corpus generator.
//!
//! The builder emits structurally valid minimal PE files from an explicit
//! declaration of sections, imports and exports; round-tripping those
//! declarations through the parser is the fixture contract used across the
//! test suite. The generator layers class-conditional content on top so the
//! resulting corpus is learnably separable at desk scale.

use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::manifest::{Family, Label, ManifestEntry};
use super::CorpusError;
use crate::features::hashing::fnv1a64;
use crate::pe::sha256_digest;

const FILE_ALIGN: u32 = 0x200;
const SECTION_ALIGN: u32 = 0x1000;
const E_LFANEW: u32 = 0x80;

pub const SCN_CODE_RX: u32 = 0x6000_0020; // CNT_CODE | MEM_EXECUTE | MEM_READ
pub const SCN_DATA_RW: u32 = 0xC000_0040; // CNT_INITIALIZED_DATA | MEM_READ | MEM_WRITE
pub const SCN_DATA_R: u32 = 0x4000_0040; // CNT_INITIALIZED_DATA | MEM_READ

fn align(v: u32, a: u32) -> u32 {
    v.div_ceil(a) * a
}

#[derive(Debug, Clone)]
pub struct SectionSpec {
    pub name: String,
    pub data: Vec<u8>,
    pub characteristics: u32,
}

/// Declarative PE writer. Field defaults produce a plain PE32 console
/// executable; every header knob the feature extractor reads is settable.
#[derive(Debug, Clone)]
pub struct PeBuilder {
    pub pe32_plus: bool,
    pub machine: u16,
    pub timestamp: u32,
    pub coff_characteristics: u16,
    pub number_of_symbols: u32,
    pub subsystem: u16,
    pub dll_characteristics: u16,
    pub linker_version: (u8, u8),
    pub image_version: (u16, u16),
    pub os_version: (u16, u16),
    pub subsystem_version: (u16, u16),
    pub size_of_heap_commit: u32,
    pub sections: Vec<SectionSpec>,
    /// (lower-case dll name, symbols) in declaration order.
    pub imports: Vec<(String, Vec<String>)>,
    pub exports: Vec<String>,
    /// Index into `sections` holding the entry point.
    pub entry_section: usize,
    pub overlay: Vec<u8>,
}

impl Default for PeBuilder {
    fn default() -> Self {
        Self {
            pe32_plus: false,
            machine: 0x014C,
            timestamp: 0x5F00_0000,
            coff_characteristics: 0x0102, // EXECUTABLE_IMAGE | 32BIT_MACHINE
            number_of_symbols: 0,
            subsystem: 3, // WINDOWS_CUI
            dll_characteristics: 0x0140,  // DYNAMIC_BASE | NX_COMPAT
            linker_version: (14, 29),
            image_version: (1, 0),
            os_version: (6, 0),
            subsystem_version: (6, 0),
            size_of_heap_commit: 0x1000,
            sections: Vec::new(),
            imports: Vec::new(),
            exports: Vec::new(),
            entry_section: 0,
            overlay: Vec::new(),
        }
    }
}

fn put_u16(buf: &mut [u8], off: usize, v: u16) {
    buf[off..off + 2].copy_from_slice(&v.to_le_bytes());
}

fn put_u32(buf: &mut [u8], off: usize, v: u32) {
    buf[off..off + 4].copy_from_slice(&v.to_le_bytes());
}

fn put_u64(buf: &mut [u8], off: usize, v: u64) {
    buf[off..off + 8].copy_from_slice(&v.to_le_bytes());
}

struct ImportBlob {
    bytes: Vec<u8>,
    /// Size of the descriptor array (reported in the data directory).
    directory_size: u32,
}

fn build_import_blob(
    imports: &[(String, Vec<String>)],
    base_va: u32,
    is_plus: bool,
) -> ImportBlob {
    let thunk = if is_plus { 8 } else { 4 };
    let n_dlls = imports.len();
    let desc_size = (n_dlls + 1) * 20;
    // Layout: descriptors | per-dll ILT | per-dll IAT | hint/name | names.
    let mut ilt_offsets = Vec::with_capacity(n_dlls);
    let mut cursor = desc_size;
    for (_, syms) in imports {
        ilt_offsets.push(cursor);
        cursor += (syms.len() + 1) * thunk;
    }
    let mut iat_offsets = Vec::with_capacity(n_dlls);
    for (_, syms) in imports {
        iat_offsets.push(cursor);
        cursor += (syms.len() + 1) * thunk;
    }
    let mut hint_offsets: Vec<Vec<usize>> = Vec::with_capacity(n_dlls);
    for (_, syms) in imports {
        let mut per = Vec::with_capacity(syms.len());
        for s in syms {
            per.push(cursor);
            cursor += 2 + s.len() + 1;
        }
        hint_offsets.push(per);
    }
    let mut name_offsets = Vec::with_capacity(n_dlls);
    for (dll, _) in imports {
        name_offsets.push(cursor);
        cursor += dll.len() + 1;
    }
    let mut bytes = vec![0u8; cursor];
    for (i, (dll, syms)) in imports.iter().enumerate() {
        let d = i * 20;
        put_u32(&mut bytes, d, base_va + ilt_offsets[i] as u32);
        put_u32(&mut bytes, d + 12, base_va + name_offsets[i] as u32);
        put_u32(&mut bytes, d + 16, base_va + iat_offsets[i] as u32);
        for (j, sym) in syms.iter().enumerate() {
            let hn = base_va as u64 + hint_offsets[i][j] as u64;
            for table in [ilt_offsets[i], iat_offsets[i]] {
                let t = table + j * thunk;
                if is_plus {
                    put_u64(&mut bytes, t, hn);
                } else {
                    put_u32(&mut bytes, t, hn as u32);
                }
            }
            bytes[hint_offsets[i][j] + 2..hint_offsets[i][j] + 2 + sym.len()]
                .copy_from_slice(sym.as_bytes());
        }
        bytes[name_offsets[i]..name_offsets[i] + dll.len()].copy_from_slice(dll.as_bytes());
    }
    ImportBlob {
        bytes,
        directory_size: desc_size as u32,
    }
}

fn build_export_blob(exports: &[String], base_va: u32, module_name: &str) -> Vec<u8> {
    let n = exports.len();
    let dir = 40;
    let functions_off = dir;
    let names_off = functions_off + n * 4;
    let ordinals_off = names_off + n * 4;
    let mut cursor = ordinals_off + n * 2;
    let module_off = cursor;
    cursor += module_name.len() + 1;
    let mut string_offsets = Vec::with_capacity(n);
    for name in exports {
        string_offsets.push(cursor);
        cursor += name.len() + 1;
    }
    let mut bytes = vec![0u8; cursor];
    put_u32(&mut bytes, 12, base_va + module_off as u32);
    put_u32(&mut bytes, 16, 1); // ordinal base
    put_u32(&mut bytes, 20, n as u32);
    put_u32(&mut bytes, 24, n as u32);
    put_u32(&mut bytes, 28, base_va + functions_off as u32);
    put_u32(&mut bytes, 32, base_va + names_off as u32);
    put_u32(&mut bytes, 36, base_va + ordinals_off as u32);
    for i in 0..n {
        put_u32(&mut bytes, functions_off + i * 4, base_va + 0x10);
        put_u32(&mut bytes, names_off + i * 4, base_va + string_offsets[i] as u32);
        put_u16(&mut bytes, ordinals_off + i * 2, i as u16);
        bytes[string_offsets[i]..string_offsets[i] + exports[i].len()]
            .copy_from_slice(exports[i].as_bytes());
    }
    bytes[module_off..module_off + module_name.len()].copy_from_slice(module_name.as_bytes());
    bytes
}

impl PeBuilder {
    /// Serialize to bytes. Panics if no sections were declared.
    pub fn build(&self) -> Vec<u8> {
        assert!(!self.sections.is_empty(), "a PE needs at least one section");
        let is_plus = self.pe32_plus;
        let opt_size: u32 = if is_plus { 0xF0 } else { 0xE0 };

        // Final section list: user sections, then generated import/export
        // sections whose contents are filled once their VAs are known.
        let mut sections: Vec<SectionSpec> = self.sections.clone();
        let idata_index = if self.imports.is_empty() {
            None
        } else {
            sections.push(SectionSpec {
                name: ".idata".into(),
                data: Vec::new(),
                characteristics: SCN_DATA_R,
            });
            Some(sections.len() - 1)
        };
        let edata_index = if self.exports.is_empty() {
            None
        } else {
            sections.push(SectionSpec {
                name: ".edata".into(),
                data: Vec::new(),
                characteristics: SCN_DATA_R,
            });
            Some(sections.len() - 1)
        };

        // Pass 1: sizes and placement.
        let import_size = if self.imports.is_empty() {
            0
        } else {
            build_import_blob(&self.imports, 0, is_plus).bytes.len() as u32
        };
        let export_size = if self.exports.is_empty() {
            0
        } else {
            build_export_blob(&self.exports, 0, "module.dll").len() as u32
        };
        let header_end = E_LFANEW + 4 + 20 + opt_size + sections.len() as u32 * 40;
        let size_of_headers = align(header_end, FILE_ALIGN);

        let mut va = SECTION_ALIGN;
        let mut file_off = size_of_headers;
        let mut placements = Vec::with_capacity(sections.len());
        for (i, s) in sections.iter().enumerate() {
            let vsize = if Some(i) == idata_index {
                import_size
            } else if Some(i) == edata_index {
                export_size
            } else {
                s.data.len() as u32
            };
            let raw = align(vsize.max(1), FILE_ALIGN);
            placements.push((va, vsize, file_off, raw));
            va += align(vsize.max(1), SECTION_ALIGN);
            file_off += raw;
        }
        let size_of_image = va;

        // Pass 2: blobs at their real VAs.
        if let Some(i) = idata_index {
            let blob = build_import_blob(&self.imports, placements[i].0, is_plus);
            sections[i].data = blob.bytes;
        }
        if let Some(i) = edata_index {
            sections[i].data = build_export_blob(&self.exports, placements[i].0, "module.dll");
        }

        let total_size = file_off as usize + self.overlay.len();
        let mut out = vec![0u8; total_size];
        out[0] = b'M';
        out[1] = b'Z';
        put_u32(&mut out, 0x3C, E_LFANEW);
        let pe = E_LFANEW as usize;
        out[pe..pe + 4].copy_from_slice(b"PE\0\0");
        let coff = pe + 4;
        put_u16(&mut out, coff, self.machine);
        put_u16(&mut out, coff + 2, sections.len() as u16);
        put_u32(&mut out, coff + 4, self.timestamp);
        put_u32(&mut out, coff + 12, self.number_of_symbols);
        put_u16(&mut out, coff + 16, opt_size as u16);
        put_u16(&mut out, coff + 18, self.coff_characteristics);

        let opt = coff + 20;
        put_u16(&mut out, opt, if is_plus { 0x20B } else { 0x10B });
        out[opt + 2] = self.linker_version.0;
        out[opt + 3] = self.linker_version.1;
        let size_of_code: u32 = sections
            .iter()
            .zip(&placements)
            .filter(|(s, _)| s.characteristics & 0x20 != 0)
            .map(|(_, p)| p.3)
            .sum();
        put_u32(&mut out, opt + 4, size_of_code);
        let entry_va = placements[self.entry_section.min(placements.len() - 1)].0 + 0x10;
        put_u32(&mut out, opt + 16, entry_va);
        put_u32(&mut out, opt + 20, placements[0].0);
        if is_plus {
            put_u64(&mut out, opt + 24, 0x0000_0001_4000_0000);
        } else {
            put_u32(&mut out, opt + 24, placements[0].0);
            put_u32(&mut out, opt + 28, 0x0040_0000);
        }
        put_u32(&mut out, opt + 32, SECTION_ALIGN);
        put_u32(&mut out, opt + 36, FILE_ALIGN);
        put_u16(&mut out, opt + 40, self.os_version.0);
        put_u16(&mut out, opt + 42, self.os_version.1);
        put_u16(&mut out, opt + 44, self.image_version.0);
        put_u16(&mut out, opt + 46, self.image_version.1);
        put_u16(&mut out, opt + 48, self.subsystem_version.0);
        put_u16(&mut out, opt + 50, self.subsystem_version.1);
        put_u32(&mut out, opt + 56, size_of_image);
        put_u32(&mut out, opt + 60, size_of_headers);
        put_u16(&mut out, opt + 68, self.subsystem);
        put_u16(&mut out, opt + 70, self.dll_characteristics);
        if is_plus {
            put_u64(&mut out, opt + 72, 0x10_0000);
            put_u64(&mut out, opt + 80, 0x1000);
            put_u64(&mut out, opt + 88, 0x10_0000);
            put_u64(&mut out, opt + 96, self.size_of_heap_commit as u64);
            put_u32(&mut out, opt + 108, 16);
        } else {
            put_u32(&mut out, opt + 72, 0x10_0000);
            put_u32(&mut out, opt + 76, 0x1000);
            put_u32(&mut out, opt + 80, 0x10_0000);
            put_u32(&mut out, opt + 84, self.size_of_heap_commit);
            put_u32(&mut out, opt + 92, 16);
        }
        let dirs = opt + if is_plus { 112 } else { 96 };
        if let Some(i) = edata_index {
            put_u32(&mut out, dirs, placements[i].0);
            put_u32(&mut out, dirs + 4, sections[i].data.len() as u32);
        }
        if let Some(i) = idata_index {
            let desc_size = build_import_blob(&self.imports, 0, is_plus).directory_size;
            put_u32(&mut out, dirs + 8, placements[i].0);
            put_u32(&mut out, dirs + 12, desc_size);
        }

        let sect_table = opt + opt_size as usize;
        for (i, (s, p)) in sections.iter().zip(&placements).enumerate() {
            let h = sect_table + i * 40;
            let name_bytes = s.name.as_bytes();
            out[h..h + name_bytes.len().min(8)]
                .copy_from_slice(&name_bytes[..name_bytes.len().min(8)]);
            put_u32(&mut out, h + 8, p.1);
            put_u32(&mut out, h + 12, p.0);
            put_u32(&mut out, h + 16, p.3);
            put_u32(&mut out, h + 20, p.2);
            put_u32(&mut out, h + 36, s.characteristics);
            let start = p.2 as usize;
            out[start..start + s.data.len()].copy_from_slice(&s.data);
        }
        let overlay_start = file_off as usize;
        out[overlay_start..].copy_from_slice(&self.overlay);
        out
    }
}

/// Per-class file counts for the synthetic corpus.
#[derive(Debug, Clone, Copy, Default)]
pub struct CorpusProfile {
    pub n_benign: usize,
    pub n_trojan: usize,
    pub n_worm: usize,
    pub n_backdoor: usize,
    pub n_ransomware: usize,
    pub n_other: usize,
}

impl CorpusProfile {
    pub fn balanced(per_class: usize) -> Self {
        Self {
            n_benign: per_class,
            n_trojan: per_class,
            n_worm: per_class,
            n_backdoor: per_class,
            n_ransomware: per_class,
            n_other: per_class,
        }
    }
}

struct ClassProfile {
    name: &'static str,
    label: Label,
    family: Option<Family>,
    /// Always-present import; its hashed bucket is the class's designated
    /// marker feature.
    marker_import: (&'static str, &'static str),
    section_names: &'static [&'static str],
    /// Fraction of random (high-entropy) bytes in the code section.
    noise: f64,
    strings: &'static [&'static str],
}

/// Designated marker import per class, exposed so tests can locate the
/// marker feature bucket.
pub fn marker_import(class: &str) -> Option<(&'static str, &'static str)> {
    CLASS_PROFILES
        .iter()
        .find(|p| p.name == class)
        .map(|p| p.marker_import)
}

const CLASS_PROFILES: [ClassProfile; 6] = [
    ClassProfile {
        name: "benign",
        label: Label::Benign,
        family: None,
        marker_import: ("comctl32.dll", "InitCommonControlsEx"),
        section_names: &[".text", ".data", ".rsrc"],
        noise: 0.15,
        strings: &["Copyright (c) contoso", "Program files runtime", "version resource"],
    },
    ClassProfile {
        name: "trojan",
        label: Label::Malicious,
        family: Some(Family::Trojan),
        marker_import: ("wininet.dll", "InternetOpenA"),
        section_names: &[".text", ".data", ".tro"],
        noise: 0.45,
        strings: &["C:\\Users\\victim\\AppData", "cmd.exe /c start", "C:\\temp\\drop.exe"],
    },
    ClassProfile {
        name: "worm",
        label: Label::Malicious,
        family: Some(Family::Worm),
        marker_import: ("ws2_32.dll", "WSAStartup"),
        section_names: &[".text", ".wdata", ".net"],
        noise: 0.35,
        strings: &["http://spread.invalid/w", "https://relay.invalid/x", "smtp relay open"],
    },
    ClassProfile {
        name: "backdoor",
        label: Label::Malicious,
        family: Some(Family::Backdoor),
        marker_import: ("dnsapi.dll", "DnsQuery_A"),
        section_names: &[".text", ".bdoor", ".data"],
        noise: 0.55,
        strings: &["shell bind port 4444", "http://c2.invalid/beacon", "remote pty ready"],
    },
    ClassProfile {
        name: "ransomware",
        label: Label::Malicious,
        family: Some(Family::Ransomware),
        marker_import: ("advapi32.dll", "CryptEncrypt"),
        section_names: &[".text", ".locked", ".note"],
        noise: 0.92,
        strings: &[
            "HKEY_LOCAL_MACHINE\\Software\\Locker",
            "your files are encrypted",
            "C:\\Users\\All Users\\README.txt",
        ],
    },
    ClassProfile {
        name: "other",
        label: Label::Malicious,
        family: Some(Family::Other),
        marker_import: ("shlwapi.dll", "PathFindFileNameA"),
        section_names: &[".text", ".misc", ".data"],
        noise: 0.30,
        strings: &["generic payload segment", "HKEY_CURRENT_USER\\Run", "loader stage two"],
    },
];

const SHARED_IMPORTS: [(&str, &[&str]); 3] = [
    (
        "kernel32.dll",
        &[
            "CreateFileW",
            "ReadFile",
            "WriteFile",
            "CloseHandle",
            "GetProcAddress",
            "LoadLibraryA",
            "VirtualAlloc",
            "ExitProcess",
        ],
    ),
    ("user32.dll", &["MessageBoxA", "GetDesktopWindow", "wsprintfA"]),
    ("msvcrt.dll", &["malloc", "free", "memcpy", "printf", "strlen"]),
];

fn class_code_section(rng: &mut ChaCha8Rng, noise: f64, len: usize) -> Vec<u8> {
    let mut data = Vec::with_capacity(len);
    while data.len() < len {
        if rng.random::<f64>() < noise {
            // high-entropy burst
            for _ in 0..64 {
                data.push(rng.random::<u8>());
            }
        } else {
            // low-entropy structured filler
            let b = *[0x90u8, 0x00, 0xCC, 0x55].choose(rng).unwrap();
            for _ in 0..64 {
                data.push(b);
            }
        }
    }
    data.truncate(len);
    data
}

fn build_class_file(profile: &ClassProfile, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let code_len = rng.random_range(2048..24_576);
    let mut data_section = Vec::new();
    for s in profile.strings {
        data_section.extend_from_slice(s.as_bytes());
        data_section.push(0);
        data_section.push(0);
    }
    // filler words so the strings block varies per file
    for _ in 0..rng.random_range(4..32) {
        let word_len = rng.random_range(5..14);
        for _ in 0..word_len {
            data_section.push(rng.random_range(b'a'..=b'z'));
        }
        data_section.push(0);
    }

    let mut imports: Vec<(String, Vec<String>)> = vec![(
        profile.marker_import.0.to_string(),
        vec![profile.marker_import.1.to_string()],
    )];
    for (dll, syms) in SHARED_IMPORTS {
        let take = rng.random_range(1..=syms.len());
        let mut picked: Vec<String> = syms.iter().map(|s| s.to_string()).collect();
        use rand::seq::SliceRandom;
        picked.shuffle(rng);
        picked.truncate(take);
        imports.push((dll.to_string(), picked));
    }

    let builder = PeBuilder {
        timestamp: rng.random_range(0x5000_0000..0x6500_0000),
        sections: vec![
            SectionSpec {
                name: profile.section_names[0].to_string(),
                data: class_code_section(rng, profile.noise, code_len),
                characteristics: SCN_CODE_RX,
            },
            SectionSpec {
                name: profile.section_names[rng.random_range(1..profile.section_names.len())]
                    .to_string(),
                data: data_section,
                characteristics: SCN_DATA_RW,
            },
        ],
        imports,
        ..Default::default()
    };
    builder.build()
}

/// Emit a deterministic synthetic corpus under `dir`: one PE per file plus
/// `manifest.jsonl`. Identical (profile, seed) yield byte-identical trees.
pub fn generate_synthetic_corpus(
    dir: &Path,
    profile: &CorpusProfile,
    seed: u64,
) -> Result<Vec<ManifestEntry>, CorpusError> {
    let files_dir = dir.join("files");
    std::fs::create_dir_all(&files_dir).map_err(|e| CorpusError::Io {
        path: files_dir.display().to_string(),
        source: e,
    })?;
    let counts = [
        profile.n_benign,
        profile.n_trojan,
        profile.n_worm,
        profile.n_backdoor,
        profile.n_ransomware,
        profile.n_other,
    ];
    let mut entries = Vec::new();
    for (class, &count) in CLASS_PROFILES.iter().zip(&counts) {
        for i in 0..count {
            let file_seed = seed ^ fnv1a64(&format!("{}/{}", class.name, i));
            let mut rng = ChaCha8Rng::seed_from_u64(file_seed);
            let bytes = build_class_file(class, &mut rng);
            let rel = format!("files/{}_{:04}.exe", class.name, i);
            let path = dir.join(&rel);
            std::fs::write(&path, &bytes).map_err(|e| CorpusError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            entries.push(ManifestEntry {
                path: rel,
                label: class.label,
                family: class.family,
                source: "synthetic".to_string(),
                sha256: hex::encode(sha256_digest(&bytes)),
            });
        }
    }
    super::manifest::write_manifest(&dir.join("manifest.jsonl"), &entries)?;
    Ok(entries)
}
