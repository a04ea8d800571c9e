use std::fmt;

/// Anything that stops a command, tagged with its process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Exit code 2.
    Config(String),
    /// Exit code 3.
    Infeasible(String),
    /// Exit code 4. Partial output has already been written.
    Budget(String),
    /// Exit code 1.
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Config(_) => 2,
            Failure::Infeasible(_) => 3,
            Failure::Budget(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Infeasible(m) | Failure::Budget(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<squats::Error> for Failure {
    fn from(e: squats::Error) -> Self {
        use squats::Error as E;
        let msg = e.to_string();
        match e {
            E::Infeasible(_) => Failure::Infeasible(msg),
            E::BudgetExceeded { .. } => Failure::Budget(msg),
            E::InvalidParameter(_) | E::DimensionMismatch(_) | E::Network(_) | E::Format(_) | E::Json(_) => {
                Failure::Config(msg)
            }
            _ => Failure::Runtime(msg),
        }
    }
}
