use serde::{Deserialize, Serialize};

/// A value together with the non-fatal diagnostics collected while producing it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WithWarnings<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

impl<T> WithWarnings<T> {
    pub fn new(value: T, warnings: Vec<String>) -> Self {
        Self { value, warnings }
    }

    pub fn clean(value: T) -> Self {
        Self { value, warnings: Vec::new() }
    }

    pub fn into_value(self) -> T {
        self.value
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> WithWarnings<U> {
        WithWarnings { value: f(self.value), warnings: self.warnings }
    }
}
