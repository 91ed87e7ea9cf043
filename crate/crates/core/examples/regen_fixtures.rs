//! Regenerates the deterministic fixtures under `fixtures/`:
//!
//! * `diffs/corpus/*.diff`: 50 unified diffs across the nine languages
//! * `github/replay/`, `github/ratelimited/`: recorded API responses for the crawler
//! * `dataset/synthetic.jsonl`: 3545 labelled records
//!
//! Run with `cargo run -p codeagent-core --example regen_fixtures`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use base64::Engine as _;
use chrono::{NaiveDate, TimeZone, Utc};
use codeagent::crawl::{CrawlQuery, Crawler};
use codeagent::dataset::{write_dataset, DatasetRecord, Polarity, RevisionLabel, TaskLabels};
use codeagent::github::{ClientConfig, GitHubClient, DEFAULT_API_BASE};
use codeagent::http::{HttpRequest, HttpResponse, HttpTransport, RecordingTransport, TransportError};
use codeagent::language::Language;
use codeagent::PrStatus;
use serde_json::json;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

// ---------------------------------------------------------------- diffs

fn ext(lang: Language) -> &'static str {
    match lang {
        Language::Python => "py",
        Language::Java => "java",
        Language::Go => "go",
        Language::Cpp => "cpp",
        Language::JavaScript => "js",
        Language::C => "c",
        Language::CSharp => "cs",
        Language::Php => "php",
        Language::Ruby => "rb",
    }
}

/// A short function body in the language's style, `n` selects names.
fn body(lang: Language, n: usize) -> Vec<String> {
    let f = format!("step{n}");
    let lines: Vec<String> = match lang {
        Language::Python => vec![
            format!("def {f}(items):"),
            "    total = 0".into(),
            "    for item in items:".into(),
            "        total += item.size".into(),
            "    return total".into(),
            "".into(),
        ],
        Language::Ruby => vec![
            format!("def {f}(items)"),
            "  total = 0".into(),
            "  items.each { |i| total += i.size }".into(),
            "  total".into(),
            "end".into(),
            "".into(),
        ],
        Language::Go => vec![
            format!("func {f}(items []Item) int {{"),
            "\ttotal := 0".into(),
            "\tfor _, it := range items {".into(),
            "\t\ttotal += it.Size".into(),
            "\t}".into(),
            "\treturn total".into(),
            "}".into(),
        ],
        Language::Php => vec![
            format!("function {f}(array $items): int {{"),
            "    $total = 0;".into(),
            "    foreach ($items as $it) {".into(),
            "        $total += $it->size;".into(),
            "    }".into(),
            "    return $total;".into(),
            "}".into(),
        ],
        Language::JavaScript => vec![
            format!("function {f}(items) {{"),
            "  let total = 0;".into(),
            "  for (const it of items) {".into(),
            "    total += it.size;".into(),
            "  }".into(),
            "  return total;".into(),
            "}".into(),
        ],
        Language::C | Language::Cpp => vec![
            format!("int {f}(const struct item *items, int n) {{"),
            "    int total = 0;".into(),
            "    for (int i = 0; i < n; i++) {".into(),
            "        total += items[i].size;".into(),
            "    }".into(),
            "    return total;".into(),
            "}".into(),
        ],
        Language::Java | Language::CSharp => vec![
            format!("    static int {f}(Item[] items) {{"),
            "        int total = 0;".into(),
            "        for (Item it : items) {".into(),
            "            total += it.size;".into(),
            "        }".into(),
            "        return total;".into(),
            "    }".into(),
        ],
    };
    lines
}

fn comment(lang: Language) -> &'static str {
    match lang {
        Language::Python | Language::Ruby => "#",
        _ => "//",
    }
}

struct Hunk {
    old_start: usize,
    new_start: usize,
    section: String,
    lines: Vec<(char, String)>,
    no_newline_last: bool,
}

impl Hunk {
    fn render(&self, out: &mut String) {
        let old = self.lines.iter().filter(|(t, _)| *t != '+').count();
        let new = self.lines.iter().filter(|(t, _)| *t != '-').count();
        let range = |start: usize, len: usize| {
            if len == 1 {
                format!("{start}")
            } else {
                format!("{start},{len}")
            }
        };
        out.push_str(&format!("@@ -{} +{} @@", range(self.old_start, old), range(self.new_start, new)));
        if !self.section.is_empty() {
            out.push(' ');
            out.push_str(&self.section);
        }
        out.push('\n');
        for (t, text) in &self.lines {
            out.push(*t);
            out.push_str(text);
            out.push('\n');
        }
        if self.no_newline_last {
            out.push_str("\\ No newline at end of file\n");
        }
    }
}

fn git_header(old: &str, new: &str, extra: &[&str]) -> String {
    let mut s = format!("diff --git a/{old} b/{new}\n");
    for e in extra {
        s.push_str(e);
        s.push('\n');
    }
    s
}

fn modify_hunk(lang: Language, n: usize, start: usize, section: &str) -> Hunk {
    let b = body(lang, n);
    let mut lines: Vec<(char, String)> = Vec::new();
    lines.push((' ', b[0].clone()));
    lines.push((' ', b[1].clone()));
    lines.push(('-', b[2].clone()));
    lines.push(('+', format!("{} {}", b[2], comment(lang))));
    lines.push(('+', b[2].replace("total", "count")));
    for l in &b[3..] {
        lines.push((' ', l.clone()));
    }
    Hunk {
        old_start: start,
        new_start: start,
        section: section.into(),
        lines,
        no_newline_last: false,
    }
}

fn whole_file(lang: Language, n: usize, tag: char) -> Hunk {
    let lines: Vec<(char, String)> = body(lang, n).into_iter().map(|l| (tag, l)).collect();
    Hunk {
        old_start: if tag == '+' { 0 } else { 1 },
        new_start: if tag == '+' { 1 } else { 0 },
        section: String::new(),
        lines,
        no_newline_last: false,
    }
}

fn corpus_diff(lang: Language, variant: usize, idx: usize) -> String {
    let e = ext(lang);
    let file = format!("src/mod{idx}.{e}");
    let mut out = String::new();
    match variant {
        0 => {
            out += &git_header(&file, &file, &["index 1a2b3c4..5d6e7f8 100644"]);
            out += &format!("--- a/{file}\n+++ b/{file}\n");
            modify_hunk(lang, idx, 10, "").render(&mut out);
        }
        1 => {
            out += &git_header(&file, &file, &["index 0000001..0000002 100644"]);
            out += &format!("--- a/{file}\n+++ b/{file}\n");
            let first = body(lang, idx)[0].trim().to_string();
            modify_hunk(lang, idx, 3, &first).render(&mut out);
            modify_hunk(lang, idx + 1, 40, "").render(&mut out);
        }
        2 => {
            out += &git_header(&file, &file, &["new file mode 100644", "index 0000000..abcdef1"]);
            out += &format!("--- /dev/null\n+++ b/{file}\n");
            whole_file(lang, idx, '+').render(&mut out);
        }
        3 => {
            out += &git_header(&file, &file, &["deleted file mode 100644", "index abcdef1..0000000"]);
            out += &format!("--- a/{file}\n+++ /dev/null\n");
            let mut h = whole_file(lang, idx, '-');
            h.no_newline_last = true;
            h.render(&mut out);
        }
        _ => {
            let renamed = format!("lib/mod{idx}_core.{e}");
            out += &git_header(&file, &file, &["index 1111111..2222222 100644"]);
            out += &format!("--- a/{file}\n+++ b/{file}\n");
            modify_hunk(lang, idx, 1, "").render(&mut out);
            out += &git_header(
                &file.replace("mod", "old"),
                &renamed,
                &[
                    "similarity index 88%",
                    &format!("rename from {}", file.replace("mod", "old")),
                    &format!("rename to {renamed}"),
                    "index 3333333..4444444 100644",
                ],
            );
            out += &format!("--- a/{}\n+++ b/{renamed}\n", file.replace("mod", "old"));
            let mut h = modify_hunk(lang, idx + 2, 7, "");
            h.no_newline_last = true;
            h.render(&mut out);
        }
    }
    out
}

/// Five odd shapes on top of the per-language variants.
fn extra_diffs() -> Vec<(String, String)> {
    let mut v = vec![(
        "pure_rename".to_string(),
        "diff --git a/app/old_name.rb b/app/new_name.rb\nsimilarity index 100%\nrename from app/old_name.rb\nrename to app/new_name.rb\n"
            .to_string(),
    )];
    v.push((
        "mode_change_then_edit".to_string(),
        "diff --git a/bin/run.sh b/bin/run.sh\nold mode 100644\nnew mode 100755\n\
diff --git a/cmd/main.go b/cmd/main.go\nindex 9f9f9f9..8e8e8e8 100644\n--- a/cmd/main.go\n+++ b/cmd/main.go\n\
@@ -4,3 +4,3 @@ func main() {\n \tcfg := load()\n-\trun(cfg)\n+\tmust(run(cfg))\n \tlog.Println(\"done\")\n"
            .to_string(),
    ));
    v.push((
        "plain_with_timestamps".to_string(),
        "--- lib/util.c\t2023-05-01 10:00:00.000000000 +0200\n+++ lib/util.c\t2023-05-02 11:30:00.000000000 +0200\n\
@@ -1,4 +1,4 @@\n #include <stdio.h>\n-int util(void) { return 0; }\n+int util(void) { return 1; }\n \n int other(void);\n"
            .to_string(),
    ));
    v.push((
        "dashed_body_lines".to_string(),
        "diff --git a/db/schema.php b/db/schema.php\n--- a/db/schema.php\n+++ b/db/schema.php\n\
@@ -1,3 +1,3 @@\n <?php\n--- legacy marker\n+++ current marker\n $x = 1;\n"
            .to_string(),
    ));
    v.push((
        "single_line_counts".to_string(),
        "diff --git a/src/Main.java b/src/Main.java\n--- a/src/Main.java\n+++ b/src/Main.java\n\
@@ -7 +7 @@ class Main {\n-    int limit = 10;\n+    int limit = 20;\n@@ -20,0 +21,2 @@\n+    // added\n+    void noop() {}\n"
            .to_string(),
    ));
    v
}

fn malformed_diffs() -> Vec<(&'static str, &'static str)> {
    vec![
        (
            "bad_hunk_header",
            "--- a/x.py\n+++ b/x.py\n@@ -1,x +1 @@\n-a\n+b\n",
        ),
        ("orphan_hunk", "@@ -1 +1 @@\n-a\n+b\n"),
        (
            "short_body",
            "--- a/x.js\n+++ b/x.js\n@@ -1,3 +1,3 @@\n const a = 1;\n-let b = 2;\n+let b = 3;\nnot a diff line\n",
        ),
        (
            "long_body",
            "--- a/y.go\n+++ b/y.go\n@@ -1,2 +1,2 @@\n x := 1\n-y := 2\n+y := 3\n+z := 4\n",
        ),
        (
            "truncated",
            "diff --git a/k.rb b/k.rb\n--- a/k.rb\n+++ b/k.rb\n@@ -1,4 +1,4 @@\n a = 1\n-b = 2\n",
        ),
        ("no_header", "just some text\nwithout any diff\n"),
    ]
}

fn write_diffs() {
    let corpus = root().join("diffs/corpus");
    let malformed = root().join("diffs/malformed");
    let _ = fs::remove_dir_all(&corpus);
    fs::create_dir_all(&corpus).unwrap();
    fs::create_dir_all(&malformed).unwrap();
    let mut idx = 0;
    for lang in Language::ALL {
        for variant in 0..5 {
            let name = format!("{:02}_{}_{variant}.diff", idx, ext(lang));
            fs::write(corpus.join(name), corpus_diff(lang, variant, idx)).unwrap();
            idx += 1;
        }
    }
    for (name, text) in extra_diffs() {
        fs::write(corpus.join(format!("{idx:02}_{name}.diff")), text).unwrap();
        idx += 1;
    }
    for (name, text) in malformed_diffs() {
        fs::write(malformed.join(format!("{name}.diff")), text).unwrap();
    }
    println!("wrote {idx} corpus diffs");
}

// ---------------------------------------------------------------- github

/// In-memory API answering by exact URL.
struct FakeApi {
    routes: BTreeMap<String, HttpResponse>,
}

impl FakeApi {
    fn ok(&mut self, path: &str, body: serde_json::Value) {
        self.routes.insert(
            format!("{DEFAULT_API_BASE}{path}"),
            HttpResponse {
                status: 200,
                headers: [("content-type".to_string(), "application/json".to_string())].into(),
                body: serde_json::to_string_pretty(&body).unwrap(),
            },
        );
    }
}

impl HttpTransport for FakeApi {
    fn send(&self, req: &HttpRequest) -> Result<HttpResponse, TransportError> {
        self.routes.get(&req.url).cloned().ok_or_else(|| TransportError::Network(format!("no route for {}", req.url)))
    }
}

struct FakePr {
    repo: &'static str,
    number: u64,
    created: &'static str,
    merged: bool,
    title: &'static str,
    /// (status, filename, previous filename, patch, base content)
    files: Vec<(&'static str, &'static str, Option<&'static str>, &'static str, &'static str)>,
}

const PER_PAGE: u32 = 3;

fn search_path(lang: &str, since: NaiveDate, page: u32) -> String {
    let q = format!("is:pr is:closed language:{lang} created:>={since}");
    format!(
        "/search/issues?q={}&sort=created&order=asc&per_page={PER_PAGE}&page={page}",
        codeagent::github::encode_component(&q)
    )
}

fn fake_prs() -> Vec<FakePr> {
    vec![
        FakePr {
            repo: "acme/calc",
            number: 11,
            created: "2023-04-03T09:00:00Z",
            merged: true,
            title: "Guard average() against empty input",
            files: vec![(
                "modified",
                "calc/stats.py",
                None,
                "@@ -1,2 +1,4 @@\n def average(values):\n+    if not values:\n+        return 0.0\n     return sum(values) / len(values)",
                "def average(values):\n    return sum(values) / len(values)\n",
            )],
        },
        FakePr {
            repo: "acme/web",
            number: 12,
            created: "2023-04-10T12:30:00Z",
            merged: true,
            title: "Debounce search input",
            files: vec![(
                "modified",
                "web/search.js",
                None,
                "@@ -1 +1 @@\n-input.on('keyup', search);\n+input.on('keyup', debounce(search, 200));\n",
                "input.on('keyup', search);\n",
            )],
        },
        FakePr {
            repo: "acme/calc",
            number: 13,
            created: "2023-05-02T08:15:00Z",
            merged: false,
            title: "Try caching the parser",
            files: vec![(
                "modified",
                "calc/parse.py",
                None,
                "@@ -1,2 +1,3 @@\n+import functools\n def parse(text):\n     return text.split()\n",
                "def parse(text):\n    return text.split()\n",
            )],
        },
        FakePr {
            repo: "acme/tools",
            number: 14,
            created: "2023-05-20T16:45:00Z",
            merged: true,
            title: "Share retry settings between commands",
            files: vec![
                (
                    "modified",
                    "tools/cli.py",
                    None,
                    "@@ -1,2 +1,2 @@\n-RETRIES = 3\n+from tools.settings import RETRIES\n def main():\n",
                    "RETRIES = 3\ndef main():\n",
                ),
                (
                    "modified",
                    "tools/settings.py",
                    None,
                    "@@ -1 +1,2 @@\n TIMEOUT = 30\n+RETRIES = 3\n",
                    "TIMEOUT = 30\n",
                ),
            ],
        },
        FakePr {
            repo: "acme/calc",
            number: 15,
            created: "2023-06-05T10:00:00Z",
            merged: true,
            title: "Move helpers into a util module",
            files: vec![(
                "renamed",
                "calc/util.py",
                Some("calc/helpers.py"),
                "@@ -1 +1 @@\n-def clamp(x, lo, hi): return max(lo, min(x, hi))\n+def clamp(x, lo, hi):\n",
                "def clamp(x, lo, hi): return max(lo, min(x, hi))\n",
            )],
        },
        FakePr {
            repo: "acme/svc",
            number: 16,
            created: "2023-06-18T11:20:00Z",
            merged: true,
            title: "Close response bodies",
            files: vec![(
                "modified",
                "svc/client.go",
                None,
                "@@ -1,2 +1,3 @@\n resp, err := http.Get(url)\n+defer resp.Body.Close()\n return resp, err\n",
                "resp, err := http.Get(url)\nreturn resp, err\n",
            )],
        },
        FakePr {
            repo: "acme/calc",
            number: 17,
            created: "2023-07-01T07:05:00Z",
            merged: false,
            title: "Add a median helper",
            files: vec![(
                "added",
                "calc/median.py",
                None,
                "@@ -0,0 +1,3 @@\n+def median(values):\n+    s = sorted(values)\n+    return s[len(s) // 2]\n",
                "",
            )],
        },
    ]
}

fn register_pr(api: &mut FakeApi, pr: &FakePr) {
    let base = format!("base{:036}", pr.number);
    api.ok(
        &format!("/repos/{}/pulls/{}", pr.repo, pr.number),
        json!({
            "number": pr.number,
            "title": pr.title,
            "body": format!("Closes #{}.", pr.number + 100),
            "state": "closed",
            "merged_at": if pr.merged { json!("2023-08-01T00:00:00Z") } else { json!(null) },
            "created_at": pr.created,
            "head": {"sha": format!("{:040x}", pr.number * 7919)},
            "base": {"sha": base},
        }),
    );
    let files: Vec<_> = pr
        .files
        .iter()
        .map(|(status, name, prev, patch, _)| {
            let mut f = json!({"filename": name, "status": status, "patch": patch});
            if let Some(p) = prev {
                f["previous_filename"] = json!(p);
            }
            f
        })
        .collect();
    api.ok(
        &format!("/repos/{}/pulls/{}/files?per_page={PER_PAGE}&page=1", pr.repo, pr.number),
        json!(files),
    );
    for (status, name, prev, _, content) in &pr.files {
        if *status == "added" {
            continue;
        }
        let path = prev.unwrap_or(name);
        let encoded = base64::engine::general_purpose::STANDARD.encode(content);
        // the contents API wraps base64 at 60 columns
        let wrapped: Vec<String> = encoded.as_bytes().chunks(60).map(|c| String::from_utf8_lossy(c).into_owned()).collect();
        api.ok(
            &format!("/repos/{}/contents/{path}?ref={base}", pr.repo),
            json!({"path": path, "encoding": "base64", "content": wrapped.join("\n")}),
        );
    }
}

fn search_item(pr: &FakePr) -> serde_json::Value {
    json!({
        "number": pr.number,
        "repository_url": format!("{DEFAULT_API_BASE}/repos/{}", pr.repo),
        "created_at": pr.created,
        "pull_request": {},
    })
}

fn write_github() {
    let prs = fake_prs();
    let mut api = FakeApi { routes: BTreeMap::new() };
    for pr in &prs {
        register_pr(&mut api, pr);
    }
    let early = NaiveDate::from_ymd_opt(2023, 4, 1).unwrap();
    let late = NaiveDate::from_ymd_opt(2023, 6, 1).unwrap();
    // every PR regardless of language: language filtering is client-side
    for (page, chunk) in prs.chunks(PER_PAGE as usize).enumerate() {
        let items: Vec<_> = chunk.iter().map(search_item).collect();
        api.ok(&search_path("python", early, page as u32 + 1), json!({"total_count": prs.len(), "items": items}));
    }
    // a stale index returns one hit older than the requested date
    let mut late_items = vec![search_item(&prs[3])];
    late_items.extend(prs[4..].iter().map(search_item));
    api.ok(&search_path("python", late, 1), json!({"total_count": 4, "items": late_items[..3]}));
    api.ok(&search_path("python", late, 2), json!({"total_count": 4, "items": late_items[3..]}));

    let dir = root().join("github/replay");
    let _ = fs::remove_dir_all(&dir);
    let transport = Arc::new(RecordingTransport::new(api, &dir));
    let config = ClientConfig {
        per_page: PER_PAGE,
        ..Default::default()
    };
    let client = GitHubClient::new(config, transport);
    for since in [early, late] {
        let q = CrawlQuery::new(Language::Python, since, usize::MAX, false).unwrap();
        let n = Crawler::new(&client, q).collect::<Result<Vec<_>, _>>().unwrap().len();
        println!("crawl since {since}: {n} records");
    }

    let limited = root().join("github/ratelimited");
    let _ = fs::remove_dir_all(&limited);
    let req = HttpRequest::get(format!("{DEFAULT_API_BASE}{}", search_path("go", early, 1)));
    codeagent::http::Fixture {
        request: req,
        response: HttpResponse {
            status: 403,
            headers: [
                ("retry-after".to_string(), "7".to_string()),
                ("x-ratelimit-remaining".to_string(), "0".to_string()),
            ]
            .into(),
            body: r#"{"message":"API rate limit exceeded"}"#.into(),
        },
    }
    .write(&limited)
    .unwrap();
}

// ---------------------------------------------------------------- dataset

struct LangRow {
    lang: Language,
    merged: usize,
    merged_confirmed: usize,
    closed: usize,
    closed_confirmed: usize,
}

fn va_rows() -> Vec<LangRow> {
    let r = |lang, merged, merged_confirmed, closed, closed_confirmed| LangRow {
        lang,
        merged,
        merged_confirmed,
        closed,
        closed_confirmed,
    };
    vec![
        r(Language::Python, 1057, 148, 248, 45),
        r(Language::Java, 287, 17, 97, 10),
        r(Language::Go, 133, 11, 74, 5),
        r(Language::Cpp, 138, 19, 56, 13),
        r(Language::JavaScript, 280, 34, 112, 16),
        r(Language::C, 114, 9, 146, 26),
        r(Language::CSharp, 206, 21, 62, 7),
        r(Language::Php, 173, 28, 105, 15),
        r(Language::Ruby, 202, 20, 55, 5),
    ]
}

/// Spreads `negatives` over `n` slots: slot i is negative when the running
/// quota crosses an integer, so negatives are spaced evenly.
fn evenly(i: usize, n: usize, negatives: usize) -> bool {
    (i + 1) * negatives / n > i * negatives / n
}

fn write_dataset_fixture() {
    // CA / FA negatives per status
    let (ca_neg_m, ca_neg_c) = (501, 135);
    let (fa_neg_m, fa_neg_c) = (352, 94);
    let mut records = Vec::new();
    let mut counters = [0usize; 2];
    let totals = [2590usize, 955];
    let base = Utc.with_ymd_and_hms(2023, 4, 1, 0, 0, 0).unwrap();
    let mut seq = 0usize;
    for row in va_rows() {
        for (status, n, confirmed) in [
            (PrStatus::Merged, row.merged, row.merged_confirmed),
            (PrStatus::Closed, row.closed, row.closed_confirmed),
        ] {
            let s = usize::from(status == PrStatus::Closed);
            let (ca_neg, fa_neg) = if s == 0 { (ca_neg_m, fa_neg_m) } else { (ca_neg_c, fa_neg_c) };
            for j in 0..n {
                let i = counters[s];
                counters[s] += 1;
                let pol = |neg: bool| if neg { Polarity::Negative } else { Polarity::Positive };
                let e = ext(row.lang);
                let file = format!("src/unit{seq}.{e}");
                let b = body(row.lang, seq);
                let old = b[2].clone();
                let new = format!("{old} {} checked", comment(row.lang));
                let diff = format!("--- a/{file}\n+++ b/{file}\n@@ -3 +3 @@\n-{old}\n+{new}\n");
                let revision = seq.is_multiple_of(100).then(|| RevisionLabel {
                    source: old.clone(),
                    target: old.replace("total", "sum"),
                });
                records.push(DatasetRecord {
                    sha: format!("{:040x}", 0x5eed_0000_u64 + seq as u64),
                    repo: format!("synthetic/{}", row.lang.query_name().replace(['+', '#'], "x")),
                    pr_number: Some(seq as u64 + 1),
                    language: row.lang,
                    pr_status: status,
                    task_labels: TaskLabels {
                        consistency: Some(pol(evenly(i, totals[s], ca_neg))),
                        vulnerability: Some(j < confirmed),
                        format: Some(pol(evenly((i * 11 + 3) % totals[s], totals[s], fa_neg))),
                        revision,
                    },
                    commit_message: format!("Annotate loop in unit {seq}"),
                    diff,
                    original_files: Vec::new(),
                    created_at: base + chrono::Duration::minutes(seq as i64 * 97),
                });
                seq += 1;
            }
        }
    }
    let dir = root().join("dataset");
    fs::create_dir_all(&dir).unwrap();
    write_dataset(&dir.join("synthetic.jsonl"), &records).unwrap();
    println!("wrote {} dataset records", records.len());
}

fn main() {
    write_diffs();
    write_github();
    write_dataset_fixture();
}
