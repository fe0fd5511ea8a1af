//! Command-line driver: build generator matrices, analyze stored ones,
//! verify the whole parameter table, and print class-group reports.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use delpezzo::code::{self, CodeError, GeneratorMatrix, DEFAULT_BUDGET};
use delpezzo::families::{
    build_instance, expected_parameters, validate_instance, BuildOptions, FamilyError, FamilyId,
};
use delpezzo::lattice::class_group_report;

const EXIT_FAIL: u8 = 1;
const EXIT_BAD_REQUEST: u8 = 2;
const EXIT_MALFORMED: u8 = 3;
const EXIT_BUDGET: u8 = 4;

#[derive(Parser)]
#[command(name = "delpezzo", about = "Evaluation codes from weak del Pezzo surfaces")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a generator matrix and write it to a file.
    Build {
        /// family name, e.g. deg6-a1
        #[arg(long)]
        family: String,
        #[arg(long)]
        q: u64,
        /// deg4-d5 only: nonzero cubic coefficient, as an F_q element code
        #[arg(long)]
        alpha: Option<u64>,
        /// deg4-d5 only: direction parameter, as an F_q element code
        #[arg(long)]
        beta: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Load a stored matrix, measure it, and print a JSON report.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// enumeration budget in scalar-class messages
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u128,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
    },
    /// Build and check every (family, q) cell; one PASS/FAIL/SKIP line each.
    Verify {
        /// comma-separated family names; default: all eight
        #[arg(long)]
        families: Option<String>,
        /// comma-separated field orders; default: 2,3,4,5,7,8,9
        #[arg(long)]
        q: Option<String>,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u128,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
    },
    /// Print the Cartier/Weil class-group report for one or all families.
    Classgroup {
        #[arg(long)]
        family: Option<String>,
    },
}

fn default_jobs() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Family(#[from] FamilyError),
    #[error("{0}")]
    Code(#[from] CodeError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("malformed input: {0}")]
    Parse(String),
}

fn exit_code_for(e: &CliError) -> ExitCode {
    let code = match e {
        CliError::Family(FamilyError::UnknownFamily(_))
        | CliError::Family(FamilyError::NotPrimePower(_))
        | CliError::Family(FamilyError::ExcludedFieldOrder { .. })
        | CliError::Family(FamilyError::BadOption(_)) => EXIT_BAD_REQUEST,
        CliError::Family(_) => EXIT_FAIL,
        CliError::Code(CodeError::BudgetExceeded { .. }) => EXIT_BUDGET,
        CliError::Code(CodeError::Malformed(_)) | CliError::Parse(_) => EXIT_MALFORMED,
        CliError::Code(_) => EXIT_FAIL,
        CliError::Io(_) => EXIT_MALFORMED,
    };
    ExitCode::from(code)
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.cmd {
        Cmd::Build {
            family,
            q,
            alpha,
            beta,
            out,
            format,
        } => {
            let id = FamilyId::parse(&family)?;
            let opts = BuildOptions {
                alpha,
                beta,
                seed: None,
            };
            let inst = build_instance(id, q, &opts)?;
            let m = GeneratorMatrix::from_instance(&inst)?;
            let text = match format {
                Format::Json => serde_json::to_string_pretty(&m)
                    .map_err(|e| CliError::Parse(e.to_string()))?,
                Format::Csv => to_csv(&m),
            };
            std::fs::write(&out, text + "\n")?;
            println!(
                "wrote {} [{}x{}] over F_{} to {}",
                m.family,
                m.k,
                m.n,
                m.q,
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Analyze {
            input,
            format,
            budget,
            jobs,
        } => {
            let text = std::fs::read_to_string(&input)?;
            let m = match format {
                Format::Json => serde_json::from_str::<GeneratorMatrix>(&text)
                    .map_err(|e| CliError::Parse(e.to_string()))?,
                Format::Csv => from_csv(&text)?,
            };
            m.validate_shape()?;
            let id = FamilyId::parse(&m.family)?;
            let expected = expected_parameters(id, m.q)?;
            let report = code::analyze(&m, &expected, budget, jobs)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).map_err(|e| CliError::Parse(e.to_string()))?
            );
            Ok(if report.is_ok() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAIL)
            })
        }
        Cmd::Verify {
            families,
            q,
            budget,
            jobs,
        } => {
            let ids = match families {
                Some(s) => s
                    .split(',')
                    .map(FamilyId::parse)
                    .collect::<Result<Vec<_>, _>>()?,
                None => FamilyId::ALL.to_vec(),
            };
            let qs: Vec<u64> = match q {
                Some(s) => s
                    .split(',')
                    .map(|x| {
                        x.trim()
                            .parse::<u64>()
                            .map_err(|e| CliError::Parse(e.to_string()))
                    })
                    .collect::<Result<Vec<_>, _>>()?,
                None => vec![2, 3, 4, 5, 7, 8, 9],
            };
            let mut any_fail = false;
            for id in &ids {
                for &q in &qs {
                    let (status, detail) = verify_cell(*id, q, budget, jobs);
                    println!("{:<9} q={:<3} {} {}", id.name(), q, status, detail);
                    if status == "FAIL" {
                        any_fail = true;
                    }
                }
            }
            Ok(if any_fail {
                ExitCode::from(EXIT_FAIL)
            } else {
                ExitCode::SUCCESS
            })
        }
        Cmd::Classgroup { family } => {
            let ids = match family {
                Some(s) => vec![FamilyId::parse(&s)?],
                None => FamilyId::ALL.to_vec(),
            };
            let mut out = serde_json::Map::new();
            for id in ids {
                let report = class_group_report(&id.lattice_descriptor())
                    .map_err(|e| CliError::Parse(e.to_string()))?;
                let ok = id.expected_class_group().matches(&report);
                let mut obj = serde_json::to_value(&report)
                    .map_err(|e| CliError::Parse(e.to_string()))?;
                obj["matches_expected"] = serde_json::Value::Bool(ok);
                out.insert(id.name().to_string(), obj);
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::Value::Object(out))
                    .map_err(|e| CliError::Parse(e.to_string()))?
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn verify_cell(id: FamilyId, q: u64, budget: u128, jobs: usize) -> (&'static str, String) {
    let expected = match expected_parameters(id, q) {
        Ok(e) => e,
        Err(FamilyError::ExcludedFieldOrder { .. }) => {
            return ("SKIP", "field order excluded".into())
        }
        Err(e) => return ("FAIL", e.to_string()),
    };
    let inst = match build_instance(id, q, &BuildOptions::default()) {
        Ok(i) => i,
        Err(e) => return ("FAIL", e.to_string()),
    };
    let v = validate_instance(&inst);
    if !v.is_ok() {
        let bad: Vec<_> = v.checks.iter().filter(|c| !c.pass).map(|c| &c.name).collect();
        return ("FAIL", format!("validation: {bad:?}"));
    }
    let m = match GeneratorMatrix::from_instance(&inst) {
        Ok(m) => m,
        Err(e) => return ("FAIL", e.to_string()),
    };
    match code::analyze(&m, &expected, budget, jobs) {
        Ok(r) if r.is_ok() => (
            "PASS",
            format!(
                "n={} k={} d={}",
                r.n,
                r.k,
                r.min_distance.unwrap_or(0)
            ),
        ),
        Ok(r) => {
            let bad: Vec<_> = r.checks.iter().filter(|c| !c.pass).map(|c| &c.detail).collect();
            ("FAIL", format!("{bad:?}"))
        }
        Err(CodeError::BudgetExceeded { needed, budget }) => (
            "SKIP",
            format!("enumeration needs {needed} > budget {budget}"),
        ),
        Err(e) => ("FAIL", e.to_string()),
    }
}

/// Self-describing CSV layout: `key,value` header lines (numbers space
/// separated inside a value, lists `;`-separated), then one `row,...` line
/// per matrix row with comma-separated base-p element codes.
fn to_csv(m: &GeneratorMatrix) -> String {
    let mut s = String::new();
    let mut line = |k: &str, v: String| {
        s.push_str(k);
        s.push(',');
        s.push_str(&v);
        s.push('\n');
    };
    line("family", m.family.clone());
    line("q", m.q.to_string());
    line("p", m.p.to_string());
    line("e", m.e.to_string());
    line(
        "modulus",
        m.modulus
            .iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(" "),
    );
    line("k", m.k.to_string());
    line("n", m.n.to_string());
    line("columns", m.column_kinds.join(";"));
    line(
        "constants",
        m.constants
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";"),
    );
    let mut out = s;
    for row in &m.rows {
        out.push_str("row,");
        out.push_str(
            &row.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        out.push('\n');
    }
    out.pop();
    out
}

fn from_csv(text: &str) -> Result<GeneratorMatrix, CliError> {
    let bad = |msg: &str| CliError::Parse(msg.to_string());
    let mut fields = std::collections::HashMap::new();
    let mut rows: Vec<Vec<u64>> = vec![];
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once(',').ok_or_else(|| bad("line without comma"))?;
        if key == "row" {
            rows.push(
                value
                    .split(',')
                    .map(|x| x.trim().parse::<u64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| bad(&format!("bad row entry: {e}")))?,
            );
        } else {
            fields.insert(key.to_string(), value.to_string());
        }
    }
    let get = |k: &str| {
        fields
            .get(k)
            .cloned()
            .ok_or_else(|| bad(&format!("missing header '{k}'")))
    };
    let num = |k: &str| -> Result<u64, CliError> {
        get(k)?
            .trim()
            .parse::<u64>()
            .map_err(|e| bad(&format!("bad header '{k}': {e}")))
    };
    let modulus = get("modulus")?
        .split_whitespace()
        .map(|x| x.parse::<u64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| bad(&format!("bad modulus: {e}")))?;
    let constants = {
        let raw = get("constants")?;
        let mut out = vec![];
        for part in raw.split(';').filter(|s| !s.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| bad("constant without '='"))?;
            out.push((
                k.to_string(),
                v.parse::<u64>()
                    .map_err(|e| bad(&format!("bad constant: {e}")))?,
            ));
        }
        out
    };
    Ok(GeneratorMatrix {
        family: get("family")?,
        q: num("q")?,
        p: num("p")?,
        e: num("e")? as usize,
        modulus,
        k: num("k")? as usize,
        n: num("n")? as usize,
        rows,
        column_kinds: get("columns")?
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| s.to_string())
            .collect(),
        constants,
    })
}
