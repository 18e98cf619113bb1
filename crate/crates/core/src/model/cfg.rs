use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CfgError {
    #[error("missing [net] section")]
    MissingNet,
    #[error("line {line}: [net] must be the first section")]
    NetNotFirst { line: usize },
    #[error("line {line}: duplicate [net] section")]
    DuplicateNet { line: usize },
    #[error("line {line}: unsupported layer type [{name}]")]
    UnsupportedSection { name: String, line: usize },
    #[error("line {line}: duplicate key `{key}` within section")]
    DuplicateKey { key: String, line: usize },
    #[error("line {line}: expected `key=value`, got `{content}`")]
    Malformed { line: usize, content: String },
    #[error("line {line}: `key=value` before any section header")]
    OutsideSection { line: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SectionKind {
    Net,
    Convolutional,
    Maxpool,
    Region,
}

impl SectionKind {
    pub fn name(&self) -> &'static str {
        match self {
            SectionKind::Net => "net",
            SectionKind::Convolutional => "convolutional",
            SectionKind::Maxpool => "maxpool",
            SectionKind::Region => "region",
        }
    }
}

/// One cfg section: its kind plus the key/value pairs in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub kind: SectionKind,
    pub attributes: Vec<(String, String)>,
}

impl LayerSpec {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.attributes
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

/// Parses Darknet-style cfg text into ordered sections. Comment lines
/// (starting `#` or `;`) and blank lines are ignored; keys and values are
/// trimmed of surrounding whitespace.
pub fn parse_cfg(text: &str) -> Result<Vec<LayerSpec>, CfgError> {
    let mut specs: Vec<LayerSpec> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with(';') {
            continue;
        }
        if let Some(name) = trimmed.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| CfgError::Malformed {
                    line,
                    content: trimmed.to_string(),
                })?
                .trim();
            let kind = match name {
                "net" | "network" => SectionKind::Net,
                "convolutional" | "conv" => SectionKind::Convolutional,
                "maxpool" => SectionKind::Maxpool,
                "region" => SectionKind::Region,
                other => {
                    return Err(CfgError::UnsupportedSection {
                        name: other.to_string(),
                        line,
                    });
                }
            };
            if kind == SectionKind::Net {
                if !specs.is_empty() {
                    return Err(CfgError::DuplicateNet { line });
                }
            } else if specs.is_empty() {
                return Err(CfgError::NetNotFirst { line });
            }
            specs.push(LayerSpec {
                kind,
                attributes: Vec::new(),
            });
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(CfgError::Malformed {
                line,
                content: trimmed.to_string(),
            });
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        let Some(section) = specs.last_mut() else {
            return Err(CfgError::OutsideSection { line });
        };
        if section.attributes.iter().any(|(k, _)| *k == key) {
            return Err(CfgError::DuplicateKey { key, line });
        }
        section.attributes.push((key, value));
    }
    if specs.is_empty() {
        return Err(CfgError::MissingNet);
    }
    Ok(specs)
}

/// Renders sections back to cfg text. `parse_cfg(serialize_cfg(parse_cfg(t)))`
/// is a fixed point of the section model.
pub fn serialize_cfg(specs: &[LayerSpec]) -> String {
    let mut out = String::new();
    for spec in specs {
        out.push('[');
        out.push_str(spec.kind.name());
        out.push_str("]\n");
        for (k, v) in &spec.attributes {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out.push('\n');
    }
    out
}
