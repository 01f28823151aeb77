//! End-to-end release pipeline: load inputs, synthesize, mitigate, run the
//! four checks and write every artifact.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affix::AffixRule;
use crate::checks::{
    self, check_disclosure, check_documentation, check_labelling, check_structure, codes, generate_documentation,
    CheckError, CheckOutcome, DisclosureInputs, DocBundle, DocStatus, Finding, ReleasePolicy, Severity,
    SingletonFinding, SynthesisSummary, Verdict,
};
use crate::config::{MitigationStep, PipelineConfig};
use crate::dataset::{read_csv_path, CsvOptions, Dataset, DatasetError};
use crate::fidelity::{fidelity_table, MarginComparison};
use crate::risk::{classify_risky_records, RiskClass, RiskError, RiskReport};
use crate::schema::{diff_schemas, infer_schema, parse_schema, SchemaError, TableSchema};
use crate::sdc::{self, AuditTrail, SdcError};
use crate::synthesis::{synthesize, Method, SynthesisError};
use crate::transform::TransformSpec;

/// Upper bound on remove → reclassify passes per removal step.
pub const MAX_REMOVAL_ITERATIONS: usize = 10;

pub const SYNTHETIC_TOKEN: &str = "synthetic";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Read { path: PathBuf, source: DatasetError },
    #[error("{context}: {source}")]
    Schema { context: String, source: SchemaError },
    #[error("synthesis failed: {0}")]
    Synthesis(#[from] SynthesisError),
    #[error("mitigation failed: {0}")]
    Mitigation(#[from] SdcError),
    #[error("risk assessment failed: {0}")]
    Risk(#[from] RiskError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error("cannot serialize report: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("{0}")]
    Input(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so a crash never leaves a truncated artifact.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), PipelineError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(contents).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| PipelineError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

/// Appends "_synthetic" unless the stem already says so.
pub fn synthetic_stem(stem: &str) -> String {
    if stem.to_lowercase().contains(SYNTHETIC_TOKEN) {
        stem.to_string()
    } else {
        format!("{stem}_{SYNTHETIC_TOKEN}")
    }
}

/// Where each artifact of a run goes.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFiles {
    pub data: PathBuf,
    pub schema: PathBuf,
    pub documentation: PathBuf,
    pub documentation_human: PathBuf,
    pub report: PathBuf,
    pub report_human: PathBuf,
    pub risk: PathBuf,
    pub fidelity: PathBuf,
}

impl OutputFiles {
    pub fn for_config(config: &PipelineConfig) -> OutputFiles {
        let stem = config
            .paths
            .output_stem
            .clone()
            .or_else(|| {
                config
                    .paths
                    .original_data
                    .as_ref()
                    .or(config.paths.original_metadata.as_ref())
                    .and_then(|p| p.file_stem())
                    .map(|s| s.to_string_lossy().into_owned())
            })
            .unwrap_or_else(|| "data".to_string());
        let stem = synthetic_stem(&stem);
        let dir = &config.paths.output_dir;
        OutputFiles {
            data: dir.join(format!("{stem}.csv")),
            schema: dir.join(format!("{stem}.schema.toml")),
            documentation: dir.join(format!("{stem}_documentation.toml")),
            documentation_human: dir.join(format!("{stem}_documentation.md")),
            report: dir.join(format!("{stem}_report.toml")),
            report_human: dir.join(format!("{stem}_report.md")),
            risk: dir.join(format!("{stem}_risk.toml")),
            fidelity: dir.join(format!("{stem}_fidelity.toml")),
        }
    }
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

/// The original side of a run.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub original: Option<Dataset>,
    pub original_schema: TableSchema,
    /// Pointer recorded in synthetic metadata and documentation.
    pub original_reference: String,
}

pub fn csv_options(config: &PipelineConfig) -> CsvOptions {
    CsvOptions {
        missing_token: config.missing_token.clone(),
    }
}

pub fn read_dataset(path: &Path, options: &CsvOptions, schema: Option<&TableSchema>) -> Result<Dataset, PipelineError> {
    read_csv_path(path, options, schema).map_err(|source| PipelineError::Read {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_schema_file(path: &Path) -> Result<crate::schema::ParsedSchema, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_schema(&text).map_err(|source| PipelineError::Schema {
        context: path.display().to_string(),
        source,
    })
}

pub fn load_inputs(config: &PipelineConfig) -> Result<Inputs, PipelineError> {
    let options = csv_options(config);
    let metadata = match &config.paths.original_metadata {
        Some(path) => Some(read_schema_file(path)?.schema),
        None => None,
    };
    let original = match &config.paths.original_data {
        Some(path) => Some(read_dataset(path, &options, metadata.as_ref())?),
        None => None,
    };
    let (original_schema, original_reference) = match (metadata, &original) {
        (Some(schema), _) => (
            schema,
            config.paths.original_metadata.as_ref().map(|p| file_name(p)).unwrap_or_default(),
        ),
        (None, Some(data)) => {
            let schema = infer_schema(data).map_err(|source| PipelineError::Schema {
                context: "inferring the original schema".to_string(),
                source,
            })?;
            let reference = config.paths.original_data.as_ref().map(|p| file_name(p)).unwrap_or_default();
            (schema, format!("{reference} (schema inferred from the data)"))
        }
        (None, None) => return Err(PipelineError::Input("no original data or metadata given".into())),
    };
    Ok(Inputs {
        original,
        original_schema,
        original_reference,
    })
}

/// Schema of the released data: the original's, renamed, with every
/// mitigation applied.
pub fn derive_synth_schema(
    original_schema: &TableSchema,
    trail: &AuditTrail,
    n_rows: usize,
    affix: &AffixRule,
    original_reference: &str,
) -> TableSchema {
    let mut schema = original_schema.clone();
    for column in &mut schema.columns {
        column.name = affix.apply(&column.name);
    }
    for action in trail.iter() {
        sdc::apply_to_schema(&mut schema, action);
    }
    schema.header.is_synthetic = true;
    schema.header.row_count = n_rows;
    schema.header.source_metadata_reference = Some(original_reference.to_string());
    schema
}

fn step_column(synth: &Dataset, column: &str, affix: &AffixRule) -> String {
    if affix.has(column) && synth.column(column).is_some() {
        column.to_string()
    } else {
        affix.apply(column)
    }
}

/// Result of applying the declared mitigations.
#[derive(Debug, Clone)]
pub struct Mitigated {
    pub data: Dataset,
    pub trail: AuditTrail,
    /// Classes whose removal loop hit the iteration bound with records left.
    pub exhausted: Vec<RiskClass>,
}

/// Applies the configured mitigation steps in order.
pub fn apply_mitigations(config: &PipelineConfig, inputs: &Inputs, synth: Dataset) -> Result<Mitigated, PipelineError> {
    let affix = &config.synthesis.affix;
    let mut data = synth;
    let mut trail = AuditTrail::new();
    let mut exhausted = Vec::new();
    let released = |trail: &AuditTrail| -> Result<Option<Dataset>, SdcError> {
        inputs
            .original
            .as_ref()
            .map(|o| checks::released_view_of_original(o, trail, affix))
            .transpose()
    };
    for step in &config.mitigations {
        match step {
            MitigationStep::ReducePrecision { column, unit } => {
                let name = step_column(&data, column, affix);
                let (next, action) = sdc::reduce_precision(&data, &name, *unit)?;
                data = next;
                trail.record(action);
            }
            MitigationStep::TopBottomCode { column, .. } => {
                let mode = step.coding_mode().expect("validated config");
                let name = step_column(&data, column, affix);
                let bare = affix.strip(&name).unwrap_or(&name).to_string();
                let reference = released(&trail)?.and_then(|o| o.column(&bare).map(|c| c.cells.clone()));
                let (next, action) = match reference {
                    Some(cells) => sdc::top_bottom_code_with_reference(&data, &name, mode, &cells)?,
                    None => sdc::top_bottom_code(&data, &name, mode)?,
                };
                data = next;
                trail.record(action);
            }
            MitigationStep::PoolCategories {
                column,
                threshold,
                pooled_label,
            } => {
                let name = step_column(&data, column, affix);
                let bare = affix.strip(&name).unwrap_or(&name).to_string();
                let original = released(&trail)?
                    .ok_or_else(|| PipelineError::Input("pooling needs the original data".into()))?;
                let counts = original
                    .column(&bare)
                    .map(sdc::category_counts)
                    .ok_or_else(|| SdcError::UnknownColumn(bare.clone()))?;
                let (next, action) = sdc::pool_categories(&data, &name, &counts, *threshold, pooled_label)?;
                data = next;
                trail.record(action);
            }
            MitigationStep::CoarsenKey { column, mapping } => {
                let name = step_column(&data, column, affix);
                let bare = affix.strip(&name).unwrap_or(&name).to_string();
                if let Some(spec) = inputs.original_schema.column(&bare) {
                    let targets: Vec<&String> = mapping.values().collect();
                    if let Some(label) = spec
                        .categories
                        .iter()
                        .find(|c| !mapping.contains_key(*c) && !targets.contains(c))
                    {
                        return Err(SdcError::PartialMapping {
                            column: name,
                            label: label.clone(),
                        }
                        .into());
                    }
                }
                let (next, action) = sdc::coarsen_key(&data, &name, mapping)?;
                data = next;
                trail.record(action);
            }
            MitigationStep::RemoveRecords { class } => {
                let class = class.unwrap_or(config.policy.gating_class);
                let mut cleared = false;
                let mut passes = 0;
                loop {
                    let original = released(&trail)?
                        .ok_or_else(|| PipelineError::Input("removing records needs the original data".into()))?;
                    let report = classify_risky_records(
                        &data,
                        &original,
                        &config.keys,
                        affix,
                        config.policy.synth_count_threshold,
                    )?;
                    if report.rows(class).is_empty() {
                        cleared = true;
                        break;
                    }
                    if passes == MAX_REMOVAL_ITERATIONS {
                        break;
                    }
                    let (next, action) = sdc::remove_records(&data, &report, class)?;
                    data = next;
                    trail.record(action);
                    passes += 1;
                }
                if !cleared {
                    exhausted.push(class);
                }
            }
        }
    }
    Ok(Mitigated { data, trail, exhausted })
}

/// Everything a run produced, as written to the report file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullReport {
    pub overall: Verdict,
    pub method: Method,
    pub synthetic_rows: usize,
    pub labelling: CheckOutcome,
    pub disclosure: CheckOutcome,
    pub structure: CheckOutcome,
    pub documentation: CheckOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk: Option<RiskReport>,
    #[serde(default)]
    pub singletons: Vec<SingletonFinding>,
    pub policy: ReleasePolicy,
    #[serde(default)]
    pub policy_overrides: Vec<String>,
    #[serde(default)]
    pub trail: AuditTrail,
    #[serde(default)]
    pub fidelity: Vec<MarginComparison>,
    /// Artifact file names, relative to the output directory.
    #[serde(default)]
    pub outputs: BTreeMap<String, String>,
}

impl FullReport {
    pub fn outcomes(&self) -> [&CheckOutcome; 4] {
        [&self.labelling, &self.disclosure, &self.structure, &self.documentation]
    }

    pub fn passed(&self) -> bool {
        self.overall == Verdict::Pass
    }

    pub fn to_toml(&self) -> Result<String, toml::ser::Error> {
        toml::to_string(self)
    }

    pub fn from_toml(text: &str) -> Result<FullReport, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!(
            "# Release check report\n\nOverall: **{}** ({}, {} synthetic rows)\n\n",
            self.overall, self.method, self.synthetic_rows
        );
        out.push_str("| check | verdict |\n|---|---|\n");
        for o in self.outcomes() {
            out.push_str(&format!("| {} | {} |\n", o.check_id, o.verdict));
        }
        for o in self.outcomes() {
            out.push_str(&format!("\n## {} — {}\n\n", o.check_id, o.verdict));
            if o.findings.is_empty() {
                out.push_str("No findings.\n");
            }
            for f in &o.findings {
                let at = f.location.as_deref().map(|l| format!(" ({l})")).unwrap_or_default();
                out.push_str(&format!("- [{}] {}: {}{at}\n", f.severity, f.code, f.message));
            }
        }
        out.push_str("\n## Policy\n\n");
        out.push_str(&format!(
            "- gating class: {}\n- max replicated-unique proportion: {}\n- max unique-in-original proportion: {}\n- synthetic count threshold: {}\n- rarity threshold: {}\n",
            self.policy.gating_class,
            self.policy.max_replicated_unique_proportion,
            self.policy.max_unique_in_original_proportion,
            self.policy.synth_count_threshold,
            self.policy.rarity_threshold,
        ));
        out.push_str("\nThese thresholds are release policy chosen by the data controller, not fixed rules.\n");
        for o in &self.policy_overrides {
            out.push_str(&format!("- override: {o}\n"));
        }
        out.push_str("\n## Mitigations\n\n");
        if self.trail.is_empty() {
            out.push_str("None.\n");
        }
        for a in self.trail.actions() {
            out.push_str(&format!("{}. {}\n", a.applied_at + 1, a.action));
        }
        if !self.fidelity.is_empty() {
            out.push_str("\n## Univariate fidelity (total variation distance)\n\n| column | TVD |\n|---|---|\n");
            for m in &self.fidelity {
                out.push_str(&format!("| {} | {:.4} |\n", m.column, m.value));
            }
        }
        out
    }
}

/// The synthetic side handed to the checks.
pub struct Release<'a> {
    pub data: &'a Dataset,
    pub data_file_name: String,
    pub schema: &'a TableSchema,
    pub schema_has_banner: bool,
    pub trail: &'a AuditTrail,
    pub exhausted: &'a [RiskClass],
    /// A documentation bundle supplied with the release, if any.
    pub documentation: Option<DocBundle>,
}

pub fn synthesis_summary(config: &PipelineConfig, n_rows: usize) -> SynthesisSummary {
    let s = &config.synthesis;
    SynthesisSummary {
        method: s.method,
        n_synth: n_rows,
        seed: s.seed,
        affix: s.affix.token().to_string(),
        metadata_missing_rate: (s.method == Method::FromMetadata).then_some(s.metadata_missing_rate),
        transforms: s.transforms.iter().map(TransformSpec::label).collect(),
    }
}

/// Runs checks 1–4 and assembles the report and documentation.
pub fn run_checks(
    config: &PipelineConfig,
    inputs: &Inputs,
    release: Release<'_>,
) -> Result<(FullReport, DocBundle), PipelineError> {
    let policy = &config.policy;
    let affix = &config.synthesis.affix;
    let names = release.data.column_names();
    let labelling = check_labelling(
        &release.data_file_name,
        release.schema,
        release.schema_has_banner,
        &names,
        policy,
    );

    let disclosure = check_disclosure(
        &DisclosureInputs {
            synth: release.data,
            synth_schema: release.schema,
            original: inputs.original.as_ref(),
            original_schema: &inputs.original_schema,
            keys: &config.keys,
            trail: release.trail,
            affix,
            method: Some(config.synthesis.method),
        },
        policy,
    )?;
    let mut disclosure_outcome = disclosure.outcome;
    for class in release.exhausted {
        disclosure_outcome.findings.push(Finding::new(
            Severity::Fail,
            codes::RISK_MITIGATION_EXHAUSTED,
            format!("{class} records remained after {MAX_REMOVAL_ITERATIONS} removal passes"),
        ));
    }
    let disclosure_outcome = CheckOutcome::from_findings(disclosure_outcome.check_id, disclosure_outcome.findings);

    let structure = check_structure(&inputs.original_schema, release.schema, release.data, release.trail, policy);

    let mut bundle = match release.documentation {
        Some(bundle) => bundle,
        None => {
            let diff = diff_schemas(&inputs.original_schema, release.schema, affix).unwrap_or_default();
            generate_documentation(
                Some(&inputs.original_reference),
                synthesis_summary(config, release.data.n_rows()),
                diff,
                release.trail.clone(),
                policy,
            )?
        }
    };
    let documentation = check_documentation(&bundle, &inputs.original_schema, release.schema, release.trail, affix);

    let all_pass = labelling.passed() && disclosure_outcome.passed() && structure.passed() && documentation.passed();
    bundle.status = if all_pass { DocStatus::Final } else { DocStatus::Draft };
    let fidelity = inputs
        .original
        .as_ref()
        .map(|o| fidelity_table(o, release.data, affix))
        .unwrap_or_default();
    let report = FullReport {
        overall: if all_pass { Verdict::Pass } else { Verdict::Fail },
        method: config.synthesis.method,
        synthetic_rows: release.data.n_rows(),
        labelling,
        disclosure: disclosure_outcome,
        structure,
        documentation,
        risk: disclosure.risk,
        singletons: disclosure.singletons,
        policy: policy.clone(),
        policy_overrides: policy.overrides(),
        trail: release.trail.clone(),
        fidelity,
        outputs: BTreeMap::new(),
    };
    Ok((report, bundle))
}

/// Synthesizes without mitigation and writes the CSV and its schema.
pub fn run_synth(config: &PipelineConfig) -> Result<(Dataset, TableSchema, OutputFiles), PipelineError> {
    config.validate().map_err(PipelineError::Config)?;
    let inputs = load_inputs(config)?;
    let data = synthesize(&inputs.original_schema, inputs.original.as_ref(), &config.synthesis)?;
    let schema = derive_synth_schema(
        &inputs.original_schema,
        &AuditTrail::new(),
        data.n_rows(),
        &config.synthesis.affix,
        &inputs.original_reference,
    );
    let files = OutputFiles::for_config(config);
    write_data_and_schema(&files, &data, &schema)?;
    Ok((data, schema, files))
}

fn write_data_and_schema(files: &OutputFiles, data: &Dataset, schema: &TableSchema) -> Result<(), PipelineError> {
    let csv = data.to_csv_string().map_err(|source| PipelineError::Read {
        path: files.data.clone(),
        source,
    })?;
    write_atomic(&files.data, csv.as_bytes())?;
    let text = schema.to_text().map_err(|source| PipelineError::Schema {
        context: files.schema.display().to_string(),
        source,
    })?;
    write_atomic(&files.schema, text.as_bytes())
}

fn write_reports(
    config: &PipelineConfig,
    files: &OutputFiles,
    report: &mut FullReport,
    bundle: &DocBundle,
    include_release: bool,
) -> Result<(), PipelineError> {
    let format = config.report.format;
    let mut outputs = BTreeMap::new();
    if include_release {
        outputs.insert("synthetic_data".to_string(), file_name(&files.data));
        outputs.insert("synthetic_schema".to_string(), file_name(&files.schema));
    }
    if format.structured() {
        outputs.insert("documentation".to_string(), file_name(&files.documentation));
        outputs.insert("report".to_string(), file_name(&files.report));
    }
    if format.human() {
        outputs.insert("documentation_human".to_string(), file_name(&files.documentation_human));
        outputs.insert("report_human".to_string(), file_name(&files.report_human));
    }
    report.outputs = outputs;
    if format.structured() {
        write_atomic(&files.documentation, bundle.to_toml()?.as_bytes())?;
        write_atomic(&files.report, report.to_toml()?.as_bytes())?;
    }
    if format.human() {
        write_atomic(&files.documentation_human, bundle.to_markdown().as_bytes())?;
        write_atomic(&files.report_human, report.to_markdown().as_bytes())?;
    }
    Ok(())
}

/// Outcome of a pipeline or check run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub report: FullReport,
    pub documentation: DocBundle,
    pub files: OutputFiles,
}

/// Synthesis → mitigations → checks 1–4, writing every artifact.
pub fn run_all(config: &PipelineConfig) -> Result<RunResult, PipelineError> {
    config.validate().map_err(PipelineError::Config)?;
    let inputs = load_inputs(config)?;
    let synth = synthesize(&inputs.original_schema, inputs.original.as_ref(), &config.synthesis)?;
    let mitigated = apply_mitigations(config, &inputs, synth)?;
    let schema = derive_synth_schema(
        &inputs.original_schema,
        &mitigated.trail,
        mitigated.data.n_rows(),
        &config.synthesis.affix,
        &inputs.original_reference,
    );
    let files = OutputFiles::for_config(config);
    write_data_and_schema(&files, &mitigated.data, &schema)?;
    // Check 1 looks at the artifacts as written.
    let written = read_schema_file(&files.schema)?;
    let (mut report, bundle) = run_checks(
        config,
        &inputs,
        Release {
            data: &mitigated.data,
            data_file_name: file_name(&files.data),
            schema: &written.schema,
            schema_has_banner: written.has_banner,
            trail: &mitigated.trail,
            exhausted: &mitigated.exhausted,
            documentation: None,
        },
    )?;
    write_reports(config, &files, &mut report, &bundle, true)?;
    Ok(RunResult {
        report,
        documentation: bundle,
        files,
    })
}

fn parse_bundle(path: &Path) -> Result<DocBundle, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    DocBundle::from_toml(&text).map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))
}

/// Locates existing synthetic artifacts: explicit paths first, then the
/// pipeline's own output names.
pub fn existing_release_paths(config: &PipelineConfig) -> (PathBuf, PathBuf, Option<PathBuf>) {
    let files = OutputFiles::for_config(config);
    let data = config.paths.synthetic_data.clone().unwrap_or(files.data);
    let schema = config.paths.synthetic_schema.clone().unwrap_or(files.schema);
    let docs = config
        .paths
        .synthetic_documentation
        .clone()
        .or_else(|| files.documentation.exists().then_some(files.documentation));
    (data, schema, docs)
}

/// Runs checks 1–4 on synthetic artifacts that already exist. The
/// mitigation trail is taken from the supplied documentation, if any.
pub fn run_check(config: &PipelineConfig) -> Result<RunResult, PipelineError> {
    config.validate().map_err(PipelineError::Config)?;
    let inputs = load_inputs(config)?;
    let (data_path, schema_path, docs_path) = existing_release_paths(config);
    let parsed = read_schema_file(&schema_path)?;
    let data = read_dataset(&data_path, &csv_options(config), Some(&parsed.schema))?;
    let documentation = docs_path.as_deref().map(parse_bundle).transpose()?;
    let trail = documentation.as_ref().map(|d| d.trail.clone()).unwrap_or_default();
    let (mut report, bundle) = run_checks(
        config,
        &inputs,
        Release {
            data: &data,
            data_file_name: file_name(&data_path),
            schema: &parsed.schema,
            schema_has_banner: parsed.has_banner,
            trail: &trail,
            exhausted: &[],
            documentation,
        },
    )?;
    let files = OutputFiles::for_config(config);
    write_reports(config, &files, &mut report, &bundle, false)?;
    Ok(RunResult {
        report,
        documentation: bundle,
        files,
    })
}

/// Loads an existing release and the original side for standalone risk or
/// fidelity runs.
pub fn load_release(config: &PipelineConfig) -> Result<(Inputs, Dataset, AuditTrail), PipelineError> {
    config.validate().map_err(PipelineError::Config)?;
    let inputs = load_inputs(config)?;
    let (data_path, schema_path, docs_path) = existing_release_paths(config);
    let schema = if schema_path.exists() {
        Some(read_schema_file(&schema_path)?.schema)
    } else {
        None
    };
    let data = read_dataset(&data_path, &csv_options(config), schema.as_ref())?;
    let trail = match docs_path {
        Some(p) => parse_bundle(&p)?.trail,
        None => AuditTrail::new(),
    };
    Ok((inputs, data, trail))
}

/// Classifies an existing release and writes the risk report.
pub fn run_risk(config: &PipelineConfig) -> Result<(RiskReport, PathBuf), PipelineError> {
    let (inputs, data, trail) = load_release(config)?;
    let original = inputs
        .original
        .as_ref()
        .ok_or_else(|| PipelineError::Input("risk assessment needs paths.original_data".into()))?;
    let released = checks::released_view_of_original(original, &trail, &config.synthesis.affix)?;
    let report = classify_risky_records(
        &data,
        &released,
        &config.keys,
        &config.synthesis.affix,
        config.policy.synth_count_threshold,
    )?;
    let path = OutputFiles::for_config(config).risk;
    write_atomic(&path, toml::to_string(&report)?.as_bytes())?;
    Ok((report, path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub margins: Vec<MarginComparison>,
}

/// Compares every released column's margin with the original and writes
/// the table.
pub fn run_fidelity(config: &PipelineConfig) -> Result<(FidelityReport, PathBuf), PipelineError> {
    let (inputs, data, _) = load_release(config)?;
    let original = inputs
        .original
        .as_ref()
        .ok_or_else(|| PipelineError::Input("fidelity needs paths.original_data".into()))?;
    let report = FidelityReport {
        margins: fidelity_table(original, &data, &config.synthesis.affix),
    };
    let path = OutputFiles::for_config(config).fidelity;
    write_atomic(&path, toml::to_string(&report)?.as_bytes())?;
    Ok((report, path))
}
