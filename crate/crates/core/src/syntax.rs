//! Tiny call-expression syntax shared by actions, predicates, effects and goals.
//!
//! Grammar: `name` | `name()` | `name(arg, arg, ...)`. Arguments are bare tokens;
//! a `key=value` argument is kept verbatim and split by the consumer.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed expression `{text}`: {reason}")]
pub struct SyntaxError {
    pub text: String,
    pub reason: String,
}

impl SyntaxError {
    fn new(text: &str, reason: impl Into<String>) -> Self {
        Self {
            text: text.to_string(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Call {
    pub name: String,
    pub args: Vec<String>,
}

impl Call {
    pub fn parse(text: &str) -> Result<Self, SyntaxError> {
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Err(SyntaxError::new(text, "empty"));
        }
        let (name, rest) = match trimmed.find('(') {
            None => (trimmed, None),
            Some(open) => {
                if !trimmed.ends_with(')') {
                    return Err(SyntaxError::new(text, "missing closing parenthesis"));
                }
                (&trimmed[..open], Some(&trimmed[open + 1..trimmed.len() - 1]))
            }
        };
        let name = name.trim();
        if !is_token(name) {
            return Err(SyntaxError::new(text, format!("invalid name `{name}`")));
        }
        let mut args = Vec::new();
        if let Some(inner) = rest {
            if inner.contains('(') || inner.contains(')') {
                return Err(SyntaxError::new(text, "nested parentheses"));
            }
            if !inner.trim().is_empty() {
                for raw in inner.split(',') {
                    let arg = raw.trim();
                    let ok = match arg.split_once('=') {
                        Some((k, v)) => is_token(k.trim()) && is_token(v.trim()),
                        None => is_token(arg),
                    };
                    if !ok {
                        return Err(SyntaxError::new(text, format!("invalid argument `{arg}`")));
                    }
                    args.push(match arg.split_once('=') {
                        Some((k, v)) => format!("{}={}", k.trim(), v.trim()),
                        None => arg.to_string(),
                    });
                }
            }
        }
        Ok(Self {
            name: name.to_string(),
            args,
        })
    }
}

impl fmt::Display for Call {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, self.args.join(", "))
    }
}

/// Identifier-ish token: letters, digits, `_`, `-`, `.`, `:`, `?`, `!`, `$`, `#`.
pub fn is_token(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | ':' | '?' | '!' | '$' | '#'))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_calls() {
        let c = Call::parse("insert(?c:capsule, coffee_machine)").unwrap();
        assert_eq!(c.name, "insert");
        assert_eq!(c.args, vec!["?c:capsule", "coffee_machine"]);
        assert_eq!(Call::parse("wait").unwrap().args.len(), 0);
        assert_eq!(Call::parse("wait()").unwrap().args.len(), 0);
        let kv = Call::parse("state(?m, loaded = false)").unwrap();
        assert_eq!(kv.args[1], "loaded=false");
    }

    #[test]
    fn rejects_garbage() {
        assert!(Call::parse("").is_err());
        assert!(Call::parse("open(machine").is_err());
        assert!(Call::parse("open(a(b))").is_err());
        assert!(Call::parse("open(a,)").is_err());
        assert!(Call::parse("op en(a)").is_err());
    }
}
