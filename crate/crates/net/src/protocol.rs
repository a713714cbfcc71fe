//! Chat-completions wire types shared by the client and the mock endpoint.

use serde::{Deserialize, Serialize};

pub const COMPLETIONS_PATH: &str = "/v1/chat/completions";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamOptions {
    #[serde(default)]
    pub include_usage: bool,
    /// Ask for cumulative usage on every chunk, not just the last.
    #[serde(default)]
    pub continuous_usage_stats: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    #[serde(default)]
    pub stream: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stream_options: Option<StreamOptions>,
}

impl ChatRequest {
    pub fn streaming(model: &str, prompt: String, max_tokens: u64) -> Self {
        Self {
            model: model.to_string(),
            messages: vec![ChatMessage {
                role: "user".into(),
                content: prompt,
            }],
            stream: true,
            max_tokens: Some(max_tokens),
            stream_options: Some(StreamOptions {
                include_usage: true,
                continuous_usage_stats: true,
            }),
        }
    }

    /// Whitespace-delimited words across all messages.
    pub fn prompt_words(&self) -> u64 {
        self.messages.iter().map(|m| word_count(&m.content)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    #[serde(default)]
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkChoice {
    #[serde(default)]
    pub index: u32,
    #[serde(default)]
    pub delta: Delta,
    #[serde(default)]
    pub finish_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatChunk {
    #[serde(default)]
    pub id: String,
    #[serde(default)]
    pub object: String,
    #[serde(default)]
    pub model: String,
    #[serde(default)]
    pub choices: Vec<ChunkChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
}

impl ChatChunk {
    pub fn content(&self) -> Option<&str> {
        self.choices.first()?.delta.content.as_deref()
    }

    pub fn finish_reason(&self) -> Option<&str> {
        self.choices.iter().find_map(|c| c.finish_reason.as_deref())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub message: String,
    #[serde(rename = "type")]
    pub kind: String,
}

pub fn parse_chat_request(body: &[u8]) -> Result<ChatRequest, String> {
    let req: ChatRequest = serde_json::from_slice(body).map_err(|e| e.to_string())?;
    if req.messages.is_empty() {
        return Err("messages must not be empty".into());
    }
    if req.max_tokens == Some(0) {
        return Err("max_tokens must be at least 1".into());
    }
    Ok(req)
}

pub fn parse_chunk(data: &str) -> Result<ChatChunk, String> {
    serde_json::from_str(data).map_err(|e| e.to_string())
}

const FILLER: [&str; 16] = [
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india", "juliet",
    "kilo", "lima", "mike", "november", "oscar", "papa",
];

/// A prompt of exactly `words` whitespace-delimited words. Request `id`
/// rotates the starting word so prompts differ between requests but never
/// between runs.
pub fn filler_prompt(id: u64, words: u64) -> String {
    let mut s = String::with_capacity(words as usize * 7);
    for i in 0..words {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(FILLER[((id + i) % FILLER.len() as u64) as usize]);
    }
    s
}

pub fn word_count(s: &str) -> u64 {
    s.split_whitespace().count() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filler_has_requested_length() {
        for n in [0, 1, 7, 1000] {
            assert_eq!(word_count(&filler_prompt(3, n)), n);
        }
        assert_eq!(filler_prompt(5, 40), filler_prompt(5, 40));
    }

    #[test]
    fn request_roundtrip_and_validation() {
        let r = ChatRequest::streaming("m", filler_prompt(0, 12), 4);
        let bytes = serde_json::to_vec(&r).unwrap();
        let back = parse_chat_request(&bytes).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.prompt_words(), 12);
        assert!(parse_chat_request(b"{\"model\":\"m\",\"messages\":[]}").is_err());
        assert!(parse_chat_request(b"not json").is_err());
    }

    #[test]
    fn chunk_accessors() {
        let c = parse_chunk(
            r#"{"id":"x","choices":[{"index":0,"delta":{"content":"hi"},"finish_reason":"length"}],"usage":{"prompt_tokens":3,"completion_tokens":2}}"#,
        )
        .unwrap();
        assert_eq!(c.content(), Some("hi"));
        assert_eq!(c.finish_reason(), Some("length"));
        assert_eq!(c.usage.unwrap().completion_tokens, 2);
    }
}
