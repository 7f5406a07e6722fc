//! Reader for the gateway's Server-Sent Events streams. Every record is
//! exactly `event: <type>\n` then `data: <one line>\n` then a blank line.

use std::io::BufRead;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SseEvent {
    pub event: String,
    pub data: String,
}

fn field<'a>(line: &'a str, name: &str) -> Result<&'a str, String> {
    line.strip_prefix(name)
        .and_then(|rest| rest.strip_prefix(": "))
        .ok_or_else(|| format!("expected `{name}: ` line, got {line:?}"))
}

/// Parse a complete stream, rejecting anything outside the record grammar.
pub fn parse_stream(text: &str) -> Result<Vec<SseEvent>, String> {
    let mut reader = SseReader::new(text.as_bytes());
    let mut events = Vec::new();
    while let Some(event) = reader.next_event()? {
        events.push(event);
    }
    Ok(events)
}

pub struct SseReader<R> {
    inner: R,
}

impl<R: BufRead> SseReader<R> {
    pub fn new(inner: R) -> Self {
        SseReader { inner }
    }

    /// `Ok(None)` at a clean end of stream (between records).
    fn line(&mut self, at_boundary: bool) -> Result<Option<String>, String> {
        let mut line = String::new();
        let n = self.inner.read_line(&mut line).map_err(|e| e.to_string())?;
        if n == 0 {
            return if at_boundary { Ok(None) } else { Err("stream ended inside a record".into()) };
        }
        match line.strip_suffix('\n') {
            Some(body) if !body.contains('\r') => Ok(Some(body.to_string())),
            _ => Err(format!("bad line terminator in {line:?}")),
        }
    }

    pub fn next_event(&mut self) -> Result<Option<SseEvent>, String> {
        let Some(first) = self.line(true)? else {
            return Ok(None);
        };
        let event = field(&first, "event")?.to_string();
        if event.is_empty() {
            return Err("empty event type".into());
        }
        let second = self.line(false)?.unwrap_or_default();
        let data = field(&second, "data")?.to_string();
        let blank = self.line(false)?.unwrap_or_default();
        if !blank.is_empty() {
            return Err(format!("expected blank line after data, got {blank:?}"));
        }
        Ok(Some(SseEvent { event, data }))
    }
}

impl<R: BufRead> Iterator for SseReader<R> {
    type Item = Result<SseEvent, String>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_event().transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_records_and_rejects_deviations() {
        let text = "event: status\ndata: {\"status\":\"running\"}\n\nevent: done\ndata: {}\n\n";
        let events = parse_stream(text).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(events[1], SseEvent { event: "done".into(), data: "{}".into() });
        assert!(parse_stream("event: a\ndata: x\n").is_err());
        assert!(parse_stream("event: a\r\ndata: x\r\n\r\n").is_err());
        assert!(parse_stream("data: x\n\n").is_err());
        assert!(parse_stream("event: a\ndata: x\nextra\n").is_err());
        assert!(parse_stream("").unwrap().is_empty());
    }
}
