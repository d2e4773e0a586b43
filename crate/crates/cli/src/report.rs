use serde_json::{Map, Value};

/// Ordered key-value report, printed as `key = value` lines or one JSON object.
#[derive(Debug, Default)]
pub struct Report {
    entries: Vec<(String, Value)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.entries.push((key.to_string(), value.into()));
        self
    }

    pub fn render(&self, json: bool) -> String {
        if json {
            let map: Map<String, Value> = self.entries.iter().cloned().collect();
            return format!("{}\n", Value::Object(map));
        }
        let mut out = String::new();
        for (k, v) in &self.entries {
            let text = match v {
                Value::String(s) => s.clone(),
                Value::Array(items) => items.iter().map(plain).collect::<Vec<_>>().join(" "),
                other => plain(other),
            };
            out += &format!("{k} = {text}\n");
        }
        out
    }
}

fn plain(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            Some(f) if n.is_f64() => format!("{f:e}"),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_and_json() {
        let mut r = Report::new();
        r.add("loss", 0.25).add("iterations", 7).add("branch", "specular").add("samples", vec![0.5, 1.0]);
        assert_eq!(
            r.render(false),
            "loss = 2.5e-1\niterations = 7\nbranch = specular\nsamples = 5e-1 1e0\n"
        );
        let v: Value = serde_json::from_str(&r.render(true)).unwrap();
        assert_eq!(v["iterations"], 7);
        assert_eq!(v["samples"][1], 1.0);
    }
}
