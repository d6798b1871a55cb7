use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use fractal_forms::network::NetworkError;
use fractal_forms::solver::SolveError;

/// What a command printed, plus enough context to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Arguments after the program name.
    pub command: Vec<String>,
    /// Hex SHA-256 of the schema text the command ran on.
    pub input_sha256: Option<String>,
    pub result: Value,
    pub wall_time_s: f64,
}

impl RunReport {
    /// Key-sorted, pretty JSON.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        serde_json::to_string_pretty(&value).expect("value serializes")
    }
}

pub fn fingerprint(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug)]
pub enum CliError {
    Core(fractal_forms::Error),
    Io(String),
    Usage(String),
}

impl From<fractal_forms::Error> for CliError {
    fn from(e: fractal_forms::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<fractal_forms::network::NetworkError> for CliError {
    fn from(e: NetworkError) -> Self {
        CliError::Core(e.into())
    }
}

impl From<fractal_forms::SchemaError> for CliError {
    fn from(e: fractal_forms::SchemaError) -> Self {
        CliError::Core(e.into())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(m) | CliError::Usage(m) => f.write_str(m),
        }
    }
}

impl CliError {
    /// 1 invalid input, 2 no convergence, 3 singular interior.
    /// Verification mismatches (4) are reported through [`crate::commands::Outcome`].
    pub fn exit_code(&self) -> i32 {
        use fractal_forms::Error;
        match self {
            CliError::Core(Error::Solve(SolveError::NotConverged { .. } | SolveError::SupportEscaped { .. })) => 2,
            CliError::Core(Error::Network(
                NetworkError::FloatingInterior { .. } | NetworkError::InfiniteResistance { .. },
            )) => 3,
            _ => 1,
        }
    }

    pub fn hint(&self) -> Option<&'static str> {
        match self.exit_code() {
            2 => Some("the iteration may oscillate; try --damping 0.5"),
            3 => Some("some interior node is not connected to the boundary"),
            _ => None,
        }
    }
}

/// `x` with 12 significant digits.
pub fn sig12(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if (-5..12).contains(&mag) {
        let decimals = (11 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.11e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(sig12(0.6), "0.600000000000");
        assert_eq!(sig12(1.2599210498948732), "1.25992104989");
        assert_eq!(sig12(-3.0864197530864197), "-3.08641975309");
        assert_eq!(sig12(1234.5), "1234.50000000");
        assert_eq!(sig12(1.8e-13), "1.80000000000e-13");
        assert_eq!(sig12(0.0), "0");
    }

    #[test]
    fn keys_are_sorted() {
        let r = RunReport {
            command: vec!["list".into()],
            input_sha256: None,
            result: serde_json::json!({"zeta": 1, "alpha": 2}),
            wall_time_s: 0.5,
        };
        let text = r.to_json();
        assert!(text.find("\"alpha\"").unwrap() < text.find("\"zeta\"").unwrap());
        assert!(text.find("\"command\"").unwrap() < text.find("\"wall_time_s\"").unwrap());
        let back: RunReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn fingerprint_is_sha256() {
        assert_eq!(
            fingerprint(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
