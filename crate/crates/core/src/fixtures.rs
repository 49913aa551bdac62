// SPDX-License-Identifier: Apache-2.0

//! Example designs compiled into the binary, used by `hlsforge demo`.

use std::fs;
use std::io;
use std::path::Path;

use crate::optdsl::{RENDERED_FILE, TEMPLATE_FILE};

/// A design shipped with the crate: its name and `(file name, contents)` pairs.
pub struct BundledDesign {
    pub name: &'static str,
    pub files: [(&'static str, &'static str); 5],
}

macro_rules! bundled {
    ($name:literal) => {
        BundledDesign {
            name: $name,
            files: [
                (concat!($name, ".cpp"), include_str!(concat!("../fixtures/designs/", $name, "/", $name, ".cpp"))),
                ("dataset_hls.tcl", include_str!(concat!("../fixtures/designs/", $name, "/dataset_hls.tcl"))),
                ("dataset_hls_ip_export.tcl", include_str!(concat!("../fixtures/designs/", $name, "/dataset_hls_ip_export.tcl"))),
                ("mock_manifest.json", include_str!(concat!("../fixtures/designs/", $name, "/mock_manifest.json"))),
                (TEMPLATE_FILE, include_str!(concat!("../fixtures/designs/", $name, "/opt_template.tcl"))),
            ],
        }
    };
}

pub const BUNDLED_DESIGNS: &[BundledDesign] = &[
    bundled!("atax"),
    bundled!("bicg"),
    bundled!("fir"),
    bundled!("gemm"),
    bundled!("gesummv"),
    bundled!("jacobi1d"),
    bundled!("k2mm"),
    bundled!("mvt"),
    bundled!("spmv"),
    bundled!("stencil2d"),
    bundled!("vscale"),
];

/// Writes every bundled design under `dir/<name>/`.
pub fn write_bundled_designs(dir: &Path) -> io::Result<Vec<&'static str>> {
    for design in BUNDLED_DESIGNS {
        let d = dir.join(design.name);
        fs::create_dir_all(&d)?;
        for (file, text) in design.files {
            fs::write(d.join(file), text)?;
        }
    }
    Ok(BUNDLED_DESIGNS.iter().map(|d| d.name).collect())
}

/// Writes the bundled designs with no directives at all: the template is
/// dropped and `opt.tcl` is empty, so each one passes through the frontend
/// as a single unoptimized design.
pub fn write_base_designs(dir: &Path) -> io::Result<Vec<&'static str>> {
    for design in BUNDLED_DESIGNS {
        let d = dir.join(design.name);
        fs::create_dir_all(&d)?;
        for (file, text) in design.files.iter().filter(|(f, _)| *f != TEMPLATE_FILE) {
            fs::write(d.join(file), text)?;
        }
        fs::write(d.join(RENDERED_FILE), "\n")?;
    }
    Ok(BUNDLED_DESIGNS.iter().map(|d| d.name).collect())
}
