use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "fractal-forms", version, about = "Renormalization fixed points and effective resistances on self-similar networks")]
pub struct Cli {
    /// Report format on standard output.
    #[arg(long, value_enum, default_value_t = OutputFormat::Text, global = true)]
    pub output: OutputFormat,

    /// Directory whose `<name>.json` files replace the built-in schemas.
    #[arg(long, global = true, value_name = "DIR")]
    pub catalog_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the built-in structures with |V0|, |V1| and the number of cells.
    List,
    /// Find the self-similar form by power iteration.
    Solve {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Effective resistance on the level-n network.
    Resist {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, default_value_t = 0)]
        level: usize,
        /// Two node labels separated by a comma; all boundary pairs when omitted.
        #[arg(long, value_delimiter = ',', value_name = "A,B")]
        pair: Option<Vec<String>>,
        /// Override a conductance class, e.g. `--set side=2`.
        #[arg(long = "set", value_name = "CLASS=VALUE")]
        set: Vec<String>,
    },
    /// Harmonic extension of boundary values to the level-n network.
    Extend {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, default_value_t = 1)]
        level: usize,
        /// Boundary value, e.g. `--value v4=1`; every boundary node needs one.
        #[arg(long = "value", value_name = "NODE=VALUE", required = true)]
        values: Vec<String>,
        #[arg(long = "set", value_name = "CLASS=VALUE")]
        set: Vec<String>,
    },
    /// Run the acceptance table against the catalog.
    Verify {
        /// Replace every check tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Seed for the randomized property suites.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write the level-n network.
    Export {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, default_value_t = 0)]
        level: usize,
        #[arg(long, value_enum, default_value_t = ExportFormat::Edgelist)]
        format: ExportFormat,
        /// Destination file; standard output when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[arg(long = "set", value_name = "CLASS=VALUE")]
        set: Vec<String>,
    },
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct SourceArgs {
    /// Built-in structure name.
    #[arg(long)]
    pub builtin: Option<String>,
    /// Schema JSON file.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0.0)]
    pub damping: f64,
    #[arg(long)]
    pub no_symmetrize: bool,
    /// 0 starts from unit conductances.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Edge held at conductance 1, as `A,B`.
    #[arg(long, value_delimiter = ',', value_name = "A,B")]
    pub normalize: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Dot,
    Edgelist,
    Json,
}

/// Splits `key=value` with a numeric value.
pub fn parse_assignment(text: &str) -> Result<(String, f64), String> {
    let (key, value) = text
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VALUE, got `{text}`"))?;
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|_| format!("`{value}` is not a number in `{text}`"))?;
    Ok((key.trim().to_string(), value))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assignments() {
        assert_eq!(parse_assignment("v4=1").unwrap(), ("v4".into(), 1.0));
        assert_eq!(parse_assignment(" side = 2.5").unwrap(), ("side".into(), 2.5));
        assert!(parse_assignment("v4").is_err());
        assert!(parse_assignment("v4=x").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
