//! Report data types and the json/markdown/csv writers.  All containers
//! are ordered, so identical runs produce byte-identical artifacts.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Md,
    Csv,
}

impl core::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Format::Json),
            "md" => Ok(Format::Md),
            "csv" => Ok(Format::Csv),
            other => Err(format!("unknown format {:?} (json|md|csv)", other)),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct TablesReport {
    pub command: String,
    pub p: u64,
    pub seed: u64,
    pub n_max: u32,
    pub rows: Vec<TableRow>,
    pub all_ok: bool,
}

#[derive(Debug, Serialize)]
pub struct TableRow {
    pub c1: u32,
    pub c2: u32,
    pub conductor: u32,
    pub dims: Vec<u64>,
    pub conductor_ok: bool,
    pub dims_ok: bool,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub command: String,
    pub suite: String,
    pub p: u64,
    pub seed: u64,
    pub samples: u32,
    pub properties: Vec<Property>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub certificates: Vec<CertificateJson>,
    pub all_ok: bool,
}

#[derive(Debug, Serialize)]
pub struct Property {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct CertificateJson {
    pub i: u32,
    pub n: u32,
    pub b: String,
    pub k: String,
    pub g: String,
}

#[derive(Debug, Serialize)]
pub struct ClassifyReport {
    pub command: String,
    pub p: u64,
    pub seed: u64,
    pub n_max: u32,
    pub mu1: ResolvedMu1,
    pub mu2: ResolvedMu2,
    pub class: ClassTag,
    pub full_conductor: u32,
    pub full_dims: Vec<u64>,
    pub constituents: Vec<ConstituentJson>,
    pub checks: Checks,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub newform: Option<NewformJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<DeltaJson>,
}

#[derive(Debug, Serialize)]
pub struct ResolvedMu1 {
    pub c1: u32,
    pub pi: String,
}

#[derive(Debug, Serialize)]
pub struct ResolvedMu2 {
    pub c2: u32,
}

#[derive(Debug, Serialize)]
pub struct ClassTag {
    /// "IRRED", "R1", "R2" or "R3".
    pub r: String,
    /// "ramified", "RU1", "RU2", "RU3" or "unramified".
    pub refinement: String,
}

#[derive(Debug, Serialize)]
pub struct ConstituentJson {
    pub label: String,
    pub generic: bool,
    pub conductor: Option<u32>,
    pub dims: Vec<u64>,
}

#[derive(Debug, Serialize)]
pub struct Checks {
    pub additivity: bool,
    pub profile: bool,
}

#[derive(Debug, Serialize)]
pub struct NewformJson {
    pub conductor: u32,
    pub vector: String,
    pub model_swapped: bool,
    pub steinberg: bool,
}

#[derive(Debug, Serialize)]
pub struct DeltaJson {
    pub functional: String,
    pub kernel_vector: String,
    pub kernel_condition_ok: bool,
}

// ---------------------------------------------------------------------------
// Writers.
// ---------------------------------------------------------------------------

pub fn tables_to_md(r: &TablesReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("# Conductor/dimension table (p = {})\n\n", r.p));
    let header: Vec<String> = (0..=r.n_max).map(|n| format!("dim V({})", n)).collect();
    out.push_str(&format!("| c1 | c2 | N | {} | ok |\n", header.join(" | ")));
    out.push_str(&format!("|----|----|---|{}----|\n", "-----|".repeat(header.len())));
    for row in &r.rows {
        let dims: Vec<String> = row.dims.iter().map(|d| d.to_string()).collect();
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n",
            row.c1,
            row.c2,
            row.conductor,
            dims.join(" | "),
            if row.conductor_ok && row.dims_ok { "yes" } else { "NO" }
        ));
    }
    out.push_str(&format!(
        "\nall checks: {}\n",
        if r.all_ok { "pass" } else { "FAIL" }
    ));
    out
}

pub fn tables_to_csv(r: &TablesReport) -> String {
    let mut out = String::new();
    let header: Vec<String> = (0..=r.n_max).map(|n| format!("dim_{}", n)).collect();
    out.push_str(&format!("c1,c2,conductor,{},ok\n", header.join(",")));
    for row in &r.rows {
        let dims: Vec<String> = row.dims.iter().map(|d| d.to_string()).collect();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.c1,
            row.c2,
            row.conductor,
            dims.join(","),
            row.conductor_ok && row.dims_ok
        ));
    }
    out
}

pub fn verify_to_md(r: &VerifyReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "# Verify `{}` (p = {}, seed = {}, samples = {})\n\n",
        r.suite, r.p, r.seed, r.samples
    ));
    out.push_str("| property | result | detail |\n|---|---|---|\n");
    for p in &r.properties {
        out.push_str(&format!(
            "| {} | {} | {} |\n",
            p.name,
            if p.pass { "pass" } else { "FAIL" },
            p.detail
        ));
    }
    out.push_str(&format!(
        "\nsummary: {}\n",
        if r.all_ok { "pass" } else { "FAIL" }
    ));
    out
}

pub fn verify_to_csv(r: &VerifyReport) -> String {
    let mut out = String::from("property,pass,detail\n");
    for p in &r.properties {
        out.push_str(&format!("{},{},\"{}\"\n", p.name, p.pass, p.detail));
    }
    out
}

pub fn classify_to_md(r: &ClassifyReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "# Classification (p = {}): {} / {}\n\n",
        r.p, r.class.r, r.class.refinement
    ));
    out.push_str(&format!(
        "mu1: conductor {}, pi = {}; mu2: conductor {}\n\n",
        r.mu1.c1, r.mu1.pi, r.mu2.c2
    ));
    out.push_str(&format!("full induced conductor N = {}\n\n", r.full_conductor));
    out.push_str("| constituent | generic | N | dims |\n|---|---|---|---|\n");
    for c in &r.constituents {
        let dims: Vec<String> = c.dims.iter().map(|d| d.to_string()).collect();
        out.push_str(&format!(
            "| {} | {} | {} | {} |\n",
            c.label,
            c.generic,
            c.conductor.map_or("-".to_string(), |v| v.to_string()),
            dims.join(",")
        ));
    }
    out.push_str(&format!(
        "\nchecks: additivity {}, profile {}\n",
        if r.checks.additivity { "pass" } else { "FAIL" },
        if r.checks.profile { "pass" } else { "FAIL" }
    ));
    if let Some(nf) = &r.newform {
        out.push_str(&format!(
            "\nnewform (N = {}): {}{}{}\n",
            nf.conductor,
            nf.vector,
            if nf.steinberg { " [Steinberg delta-kernel]" } else { "" },
            if nf.model_swapped { " [in the companion model]" } else { "" },
        ));
    }
    if let Some(d) = &r.delta {
        out.push_str(&format!(
            "\ndelta functional: {}\nkernel vector: {}\nkernel condition: {}\n",
            d.functional,
            d.kernel_vector,
            if d.kernel_condition_ok { "pass" } else { "FAIL" }
        ));
    }
    out
}

pub fn classify_to_csv(r: &ClassifyReport) -> String {
    let mut out = String::from("label,generic,conductor,dims\n");
    for c in &r.constituents {
        let dims: Vec<String> = c.dims.iter().map(|d| d.to_string()).collect();
        out.push_str(&format!(
            "{},{},{},\"{}\"\n",
            c.label,
            c.generic,
            c.conductor.map_or("-".to_string(), |v| v.to_string()),
            dims.join(",")
        ));
    }
    out
}
