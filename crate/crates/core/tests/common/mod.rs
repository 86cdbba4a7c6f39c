//! Deterministic synthetic EMBER-style corpora for integration tests.
//!
//! Records are generated from a SplitMix64 stream so every test run sees
//! identical data. The field distributions deliberately cross every
//! derivation rule: standard and non-standard section names, entropies on
//! both sides of 7.0, import counts around 10, mapped and unmapped API
//! names, CLR directories, and resolvable/unresolvable entry points.

#![allow(dead_code)]

use peo_core::rng::SplitMix64;

const DLLS: &[&str] = &[
    "kernel32.dll",
    "advapi32.dll",
    "wininet.dll",
    "user32.dll",
    "ws2_32.dll",
];

const MAPPED_FUNCTIONS: &[&str] = &[
    "CreateFileA",
    "CreateFileW",
    "Sleep",
    "RegOpenKeyExA",
    "RegEnumValueW",
    "HttpSendRequestA",
    "ReadProcessMemory",
    "WriteProcessMemory",
    "CryptEncrypt",
    "CryptGenKey",
    "FtpOpenFileA",
    "CreateRemoteThread",
    "LoadLibraryW",
    "GetProcAddress",
    "CreateMutexA",
    "EnumWindows",
    "StartServiceA",
    "NetShareEnum",
    "GetDiskFreeSpaceExW",
    "CreateDirectoryW",
];

const UNMAPPED_FUNCTIONS: &[&str] = &[
    "TlsSetValue",
    "DeleteCriticalSection",
    "InitializeCriticalSection",
    "GetLastError",
    "HeapAlloc",
    "QueryPerformanceCounter",
];

const SECTION_NAMES: &[&str] = &[
    ".text", ".data", ".rdata", ".rsrc", "CODE", "DATA", "UPX0", ".evil", ".xyz", "",
];

const SECTION_PROPS: &[&[&str]] = &[
    &["CNT_CODE", "MEM_EXECUTE", "MEM_READ"],
    &["CNT_INITIALIZED_DATA", "MEM_READ"],
    &["CNT_INITIALIZED_DATA", "MEM_READ", "MEM_WRITE"],
    &["CNT_UNINITIALIZED_DATA", "MEM_READ", "MEM_WRITE"],
    &["MEM_READ", "MEM_WRITE", "MEM_EXECUTE"],
    &["CNT_CODE", "MEM_EXECUTE", "MEM_READ", "MEM_SHARED"],
    &[],
];

fn hex_sha(rng: &mut SplitMix64) -> String {
    (0..8).map(|_| format!("{:08x}", rng.next_u64() as u32)).collect()
}

fn pick<'a, T: ?Sized>(rng: &mut SplitMix64, items: &'a [&'a T]) -> &'a T {
    items[rng.next_below(items.len() as u64) as usize]
}

/// One synthetic record with the given label.
pub fn gen_record(rng: &mut SplitMix64, label: i8) -> String {
    let sha = hex_sha(rng);

    let section_count = rng.next_below(5) as usize;
    let mut sections = Vec::new();
    let mut section_names = Vec::new();
    for _ in 0..section_count {
        let name = pick(rng, SECTION_NAMES);
        // Entropy in [0, 8) with extra mass just around the 7.0 threshold.
        let entropy = match rng.next_below(4) {
            0 => 6.8 + (rng.next_below(400) as f64) / 1000.0,
            _ => (rng.next_below(8000) as f64) / 1000.0,
        };
        let props = pick(rng, SECTION_PROPS);
        section_names.push(name.to_string());
        sections.push(serde_json::json!({
            "name": name,
            "size": rng.next_below(1 << 20),
            "vsize": rng.next_below(1 << 20),
            "entropy": entropy,
            "props": props,
        }));
    }
    let entry = match rng.next_below(4) {
        0 => String::new(),
        1 => "missing_section".to_string(),
        _ if !section_names.is_empty() => {
            section_names[rng.next_below(section_names.len() as u64) as usize].clone()
        }
        _ => String::new(),
    };

    let mut imports = serde_json::Map::new();
    let dll_count = rng.next_below(4) as usize;
    let mut total_functions = 0u64;
    for _ in 0..dll_count {
        let dll = pick(rng, DLLS);
        let function_count = rng.next_below(6) as usize;
        let functions: Vec<&str> = (0..function_count)
            .map(|_| {
                if rng.next_below(3) == 0 {
                    pick(rng, UNMAPPED_FUNCTIONS)
                } else {
                    pick(rng, MAPPED_FUNCTIONS)
                }
            })
            .collect();
        total_functions += functions.len() as u64;
        imports.insert(dll.to_string(), serde_json::json!(functions));
    }
    // Mostly consistent with the import table, sometimes forced around the
    // LowImportsCount threshold.
    let imports_count = match rng.next_below(4) {
        0 => rng.next_below(22),
        _ => total_functions,
    };

    let mut datadirectories = vec![serde_json::json!({
        "name": "EXPORT_TABLE",
        "virtual_address": 0,
    })];
    if rng.next_below(3) == 0 {
        datadirectories.push(serde_json::json!({
            "name": "CLR_RUNTIME_HEADER",
            "virtual_address": if rng.next_below(2) == 0 { 0 } else { 8192 },
            "size": 72,
        }));
    }

    let characteristics = if rng.next_below(5) == 0 {
        vec!["EXECUTABLE_IMAGE", "DLL"]
    } else {
        vec!["EXECUTABLE_IMAGE", "CHARA_32BIT_MACHINE"]
    };

    let record = serde_json::json!({
        "sha256": sha,
        "label": label,
        "general": {
            "size": rng.next_below(1 << 22),
            "vsize": rng.next_below(1 << 22),
            "has_debug": rng.next_below(2),
            "exports": rng.next_below(4),
            "imports": imports_count,
            "has_relocations": rng.next_below(2),
            "has_resources": rng.next_below(2),
            "has_signature": rng.next_below(2),
            "has_tls": rng.next_below(2),
            "symbols": if rng.next_below(8) == 0 { rng.next_below(3) } else { 0 },
        },
        "strings": {
            "numstrings": rng.next_below(10_000),
            "avlength": (rng.next_below(4_000) as f64) / 10.0,
            "printables": rng.next_below(100_000),
            "entropy": (rng.next_below(8_000) as f64) / 1000.0,
            "paths": rng.next_below(4),
            "urls": rng.next_below(6),
            "registry": rng.next_below(3),
            "MZ": rng.next_below(4),
        },
        "header": {
            "coff": {
                "timestamp": rng.next_below(1 << 31),
                "machine": "I386",
                "characteristics": characteristics,
            },
            "optional": {
                "subsystem": "WINDOWS_GUI",
                "dll_characteristics": [],
                "magic": "PE32",
            },
        },
        "section": { "entry": entry, "sections": sections },
        "imports": imports,
        "exports": [],
        "datadirectories": datadirectories,
    });
    serde_json::to_string(&record).expect("record serializes")
}

/// `n` records with labels alternating 1/0 (balanced for even `n`).
pub fn gen_balanced_corpus(seed: u64, n: usize) -> Vec<String> {
    let mut rng = SplitMix64::new(seed);
    (0..n)
        .map(|i| gen_record(&mut rng, if i % 2 == 0 { 1 } else { 0 }))
        .collect()
}

/// `n` records with roughly one unlabeled record in eight.
pub fn gen_mixed_corpus(seed: u64, n: usize) -> Vec<String> {
    let mut rng = SplitMix64::new(seed);
    (0..n)
        .map(|i| {
            let label = if i % 8 == 7 { -1 } else { (i % 2) as i8 };
            gen_record(&mut rng, label)
        })
        .collect()
}

pub fn write_corpus(path: &std::path::Path, lines: &[String]) {
    let mut text = lines.join("\n");
    text.push('\n');
    std::fs::write(path, text).expect("corpus written");
}
