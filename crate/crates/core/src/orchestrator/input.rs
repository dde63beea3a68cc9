//! User input: scripted follow-ups in batch mode, a blocking reader in
//! interactive mode.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InputError {
    #[error("end of input")]
    EndOfInput,
    #[error("cannot read input: {0}")]
    Io(String),
}

pub trait UserInput {
    fn read(&mut self, prompt: &str) -> Result<String, InputError>;
}

/// Returns the scripted replies in order, then `EndOfInput`.
#[derive(Debug, Default, Clone)]
pub struct ScriptedInput {
    replies: VecDeque<String>,
    pub prompts: Vec<String>,
}

impl ScriptedInput {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedInput {
            replies: replies.into_iter().map(Into::into).collect(),
            prompts: Vec::new(),
        }
    }

    /// No replies at all.
    pub fn empty() -> Self {
        Self::default()
    }
}

impl UserInput for ScriptedInput {
    fn read(&mut self, prompt: &str) -> Result<String, InputError> {
        self.prompts.push(prompt.to_string());
        self.replies.pop_front().ok_or(InputError::EndOfInput)
    }
}

/// Prompts on `output` and reads one line from `input`. Blank lines are
/// rejected with a re-prompt; end of stream is `EndOfInput`.
pub struct LineInput<R, W> {
    input: R,
    output: W,
}

impl<R: BufRead, W: Write> LineInput<R, W> {
    pub fn new(input: R, output: W) -> Self {
        LineInput { input, output }
    }

    pub fn into_inner(self) -> (R, W) {
        (self.input, self.output)
    }
}

impl<R: BufRead, W: Write> UserInput for LineInput<R, W> {
    fn read(&mut self, prompt: &str) -> Result<String, InputError> {
        let io = |e: std::io::Error| InputError::Io(e.to_string());
        let mut current = prompt.to_string();
        loop {
            write!(self.output, "{current} > ").map_err(io)?;
            self.output.flush().map_err(io)?;
            let mut line = String::new();
            if self.input.read_line(&mut line).map_err(io)? == 0 {
                return Err(InputError::EndOfInput);
            }
            let reply = line.trim();
            if !reply.is_empty() {
                return Ok(reply.to_string());
            }
            current = "Please type a reply (or `quit`).".to_string();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_exhausts_to_end_of_input() {
        let mut s = ScriptedInput::new(["a"]);
        assert_eq!(s.read("q").unwrap(), "a");
        assert_eq!(s.read("q"), Err(InputError::EndOfInput));
        assert_eq!(s.prompts.len(), 2);
    }

    #[test]
    fn line_input_echoes_and_reprompts_on_blank() {
        let mut li = LineInput::new("\n  \nhello\n".as_bytes(), Vec::new());
        assert_eq!(li.read("Question?").unwrap(), "hello");
        let (_, out) = li.into_inner();
        let out = String::from_utf8(out).unwrap();
        assert!(out.starts_with("Question? > "));
        assert_eq!(out.matches("Please type a reply").count(), 2);
    }

    #[test]
    fn line_input_eof() {
        let mut li = LineInput::new("".as_bytes(), Vec::new());
        assert_eq!(li.read("x"), Err(InputError::EndOfInput));
    }
}
