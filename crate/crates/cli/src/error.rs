use std::fmt;

/// Bad input: malformed or inconsistent configs and arguments. Exits 2.
#[derive(Debug)]
pub struct ValidationError(pub String);

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ValidationError {}

pub fn invalid(msg: impl fmt::Display) -> anyhow::Error {
    ValidationError(msg.to_string()).into()
}

/// `2` for validation failures, `1` for everything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.chain().any(|e| e.is::<ValidationError>()) {
        2
    } else {
        1
    }
}

/// Library errors that describe bad configuration rather than a failed
/// computation.
pub fn classify_core(e: rppg_core::Error) -> anyhow::Error {
    use rppg_core::Error as E;
    match e {
        E::Json(_)
        | E::Invalid { .. }
        | E::MissingParam(_)
        | E::UnexpectedParam(_)
        | E::Shape { .. } => invalid(e),
        other => other.into(),
    }
}

pub fn classify_synth(e: rppg_synth::Error) -> anyhow::Error {
    use rppg_synth::Error as E;
    match e {
        E::Params(_) | E::Json(_) => invalid(e),
        other => other.into(),
    }
}
