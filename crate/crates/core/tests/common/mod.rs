#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

const EN: &[&str] = &[
    "I deposited money at the bank yesterday.",
    "We walked along the river bank in the evening.",
    "The bank approved my loan quickly.",
    "She opened an account at a new bank.",
    "The children played near the bank of the river.",
    "He keeps his savings in the bank.",
    "Apple released a new phone today.",
    "The weather is nice.",
    "I deposited money at the bank yesterday.",
    "the the the the the the",
    "The river flooded the bank after the storm.",
    "My phone fell into the river.",
    "She borrowed money from her brother.",
    "The loan was repaid within a year.",
    "They fished from the bank of the river all day.",
    "Apple opened a new store in the city.",
];

const ZH: &[&str] = &[
    "我昨天在银行存了钱。",
    "晚上我们沿着河岸散步。",
    "银行很快批准了我的贷款。",
    "她在一家新银行开了账户。",
    "孩子们在河岸附近玩耍。",
    "他把积蓄存在银行里。",
    "苹果公司今天发布了新手机。",
    "天气很好。",
    "我昨天在银行存了钱。",
    "的的的的的的",
    "暴风雨过后河水淹没了河岸。",
    "我的手机掉进了河里。",
    "她向哥哥借了钱。",
    "这笔贷款在一年内还清了。",
    "他们整天在河岸上钓鱼。",
    "苹果公司在城里开了一家新店。",
];

const QE: &[&str] = &[
    "90", "85", "80", "75", "70", "65", "60", "55", "90", "95", "88", "72", "66", "39", "81", "77",
];

const DICT: &str = "bank\t银行\tn\tbank.n.01\ta financial institution
bank\t河岸\tn\tbank.n.02\tsloping land beside a body of water
bank\t库\tn\tbank.n.03\ta supply held in reserve
bank\t堤\tn\tbank.n.04\tan embankment
money\t钱\tn\tmoney.n.01\tthe most common medium of exchange
loan\t贷款\tn\tloan.n.01\tmoney lent at interest
river\t河\tn\triver.n.01\ta large natural stream of water
phone\t手机\tn\tphone.n.01\ta telephone
storm\t暴风雨\tn\tstorm.n.01\ta violent weather condition
";

const ENTITIES: &str = "Apple\t苹果公司\n";

const RESPONSES: &str = r#"{"index":0,"sense_id":"bank.n.03","response":"Source: The hospital runs a blood bank.\nTarget: 医院经营着一个血库。"}
{"index":1,"sense_id":"bank.n.04","response":"I cannot help with that."}
"#;

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn lines(items: &[&str]) -> String {
    let mut s = items.join("\n");
    s.push('\n');
    s
}

/// Writes a small en-zh project into `dir` and returns the config path.
/// `extra` is appended to the generated config.
pub fn write_mini_project(dir: &Path, extra: &str) -> PathBuf {
    write(dir, "train.en", &lines(EN));
    write(dir, "train.zh", &lines(ZH));
    write(dir, "qe.txt", &lines(QE));
    write(dir, "dict.tsv", DICT);
    write(dir, "entities.tsv", ENTITIES);
    write(dir, "responses.jsonl", RESPONSES);
    let config = format!(
        r#"seed = 42
out_dir = "out"

[corpus]
source = "train.en"
target = "train.zh"
langs = "en-zh"
scores = "qe.txt"
score_scale = "percent"

[resources]
dictionary = "dict.tsv"
entities = "entities.tsv"

[match]
k = 2

[augment]
responses = "responses.jsonl"

[stats]
ks = [1, 2, 3]
{extra}"#
    );
    write(dir, "lexmatcher.toml", &config)
}

/// A one-thread HTTP server on localhost that answers every request with
/// a fixed chat-completion body and counts connections.
pub struct StubServer {
    pub url: String,
    pub connections: Arc<AtomicUsize>,
}

impl StubServer {
    pub fn start(reply: &str) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let connections = Arc::new(AtomicUsize::new(0));
        let counter = connections.clone();
        let body = serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": reply}}]
        })
        .to_string();
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                counter.fetch_add(1, Ordering::SeqCst);
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut length = 0usize;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 {
                        break;
                    }
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        length = v.trim().parse().unwrap_or(0);
                    }
                    if line == "\r\n" {
                        break;
                    }
                }
                let mut buf = vec![0u8; length];
                let _ = reader.read_exact(&mut buf);
                let response = format!(
                    "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                    body.len(),
                    body
                );
                let _ = stream.write_all(response.as_bytes());
            }
        });
        Self {
            url: format!("http://{addr}/v1/chat/completions"),
            connections,
        }
    }

    pub fn count(&self) -> usize {
        self.connections.load(Ordering::SeqCst)
    }
}
