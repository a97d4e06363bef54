//! Job postings, the categorical skill dictionary, and skill extraction.

use std::collections::HashMap;
use std::io::{BufRead, Read, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::taxonomy::{CriteriaCategory, CriteriaLabel};

pub type SkillId = usize;

/// One row of the skill dictionary source.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct DictionaryRecord {
    pub skill: String,
    pub category: String,
    #[serde(default, deserialize_with = "split_aliases")]
    pub aliases: Vec<String>,
}

impl DictionaryRecord {
    pub fn new(skill: &str, category: &str) -> Self {
        DictionaryRecord {
            skill: skill.to_string(),
            category: category.to_string(),
            aliases: Vec::new(),
        }
    }

    pub fn with_aliases(mut self, aliases: &[&str]) -> Self {
        self.aliases = aliases.iter().map(|a| a.to_string()).collect();
        self
    }
}

fn split_aliases<'de, D>(de: D) -> std::result::Result<Vec<String>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    let raw: Option<String> = Option::deserialize(de)?;
    Ok(raw
        .unwrap_or_default()
        .split('|')
        .map(str::trim)
        .filter(|a| !a.is_empty())
        .map(String::from)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkillEntry {
    pub name: String,
    pub category: usize,
    pub aliases: Vec<String>,
}

/// Bijective skill-name/skill-id mapping plus the skill → category function.
#[derive(Debug, Clone)]
pub struct SkillDictionary {
    skills: Vec<SkillEntry>,
    categories: Vec<String>,
    lookup: HashMap<String, SkillId>,
    matcher: AliasMatcher,
}

/// Lowercase, trim, and collapse internal whitespace.
pub fn normalize_name(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

impl SkillDictionary {
    /// Builds a dictionary, assigning dense skill and category ids in
    /// first-seen order.
    pub fn from_records<I>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = DictionaryRecord>,
    {
        let mut skills = Vec::new();
        let mut categories: Vec<String> = Vec::new();
        let mut category_ids: HashMap<String, usize> = HashMap::new();
        let mut lookup: HashMap<String, SkillId> = HashMap::new();

        for rec in records {
            let name = normalize_name(&rec.skill);
            if name.is_empty() {
                return Err(Error::MalformedRecord {
                    line: skills.len() + 1,
                    reason: "empty skill name".into(),
                });
            }
            let cat_key = normalize_name(&rec.category);
            if cat_key.is_empty() {
                return Err(Error::MalformedRecord {
                    line: skills.len() + 1,
                    reason: format!("skill `{}` has no category", rec.skill),
                });
            }
            let category = *category_ids.entry(cat_key).or_insert_with(|| {
                categories.push(rec.category.trim().to_string());
                categories.len() - 1
            });

            let id = skills.len();
            if lookup.insert(name.clone(), id).is_some() {
                return Err(Error::DuplicateSkill(name));
            }
            let mut aliases = Vec::new();
            for alias in &rec.aliases {
                let a = normalize_name(alias);
                if a.is_empty() || a == name || aliases.contains(&a) {
                    continue;
                }
                if lookup.insert(a.clone(), id).is_some() {
                    return Err(Error::DuplicateSkill(a));
                }
                aliases.push(a);
            }
            skills.push(SkillEntry {
                name: rec.skill.trim().to_string(),
                category,
                aliases,
            });
        }
        if skills.is_empty() {
            return Err(Error::EmptyDictionary);
        }
        let matcher = AliasMatcher::new(&lookup);
        Ok(SkillDictionary {
            skills,
            categories,
            lookup,
            matcher,
        })
    }

    /// Reads the `skill,category,aliases` CSV format.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let mut records = Vec::new();
        for row in rdr.deserialize() {
            records.push(row?);
        }
        Self::from_records(records)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    /// A dictionary with generated names (`s0`, `s1`, ...) over a given
    /// skill → category assignment. Used for synthetic corpora.
    pub fn synthetic(skill_categories: &[usize]) -> Result<Self> {
        Self::from_records(
            skill_categories
                .iter()
                .enumerate()
                .map(|(s, &l)| DictionaryRecord::new(&format!("s{s}"), &format!("c{l}"))),
        )
    }

    pub fn num_skills(&self) -> usize {
        self.skills.len()
    }

    pub fn num_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn skill(&self, id: SkillId) -> Option<&SkillEntry> {
        self.skills.get(id)
    }

    pub fn skill_name(&self, id: SkillId) -> Option<&str> {
        self.skills.get(id).map(|s| s.name.as_str())
    }

    pub fn category_of(&self, id: SkillId) -> Option<usize> {
        self.skills.get(id).map(|s| s.category)
    }

    pub fn category_name(&self, category: usize) -> Option<&str> {
        self.categories.get(category).map(String::as_str)
    }

    pub fn category_names(&self) -> &[String] {
        &self.categories
    }

    /// `l_s` for every skill, indexed by skill id.
    pub fn skill_categories(&self) -> Vec<usize> {
        self.skills.iter().map(|s| s.category).collect()
    }

    pub fn skill_names(&self) -> Vec<String> {
        self.skills.iter().map(|s| s.name.clone()).collect()
    }

    /// Resolves a canonical name or alias.
    pub fn lookup(&self, name: &str) -> Option<SkillId> {
        self.lookup.get(&normalize_name(name)).copied()
    }

    /// Stable content hash over names, categories and aliases.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for (id, s) in self.skills.iter().enumerate() {
            h.update(format!("{id}\t{}\t{}", s.name, self.categories[s.category]).as_bytes());
            for a in &s.aliases {
                h.update(b"\t");
                h.update(a.as_bytes());
            }
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    /// Finds dictionary skills mentioned in free text. Matching is
    /// case-insensitive, anchored at word boundaries, and greedy
    /// leftmost-longest, so "JavaScript" is never read as "Java".
    /// Multiplicity is preserved, in order of appearance.
    pub fn extract_skills(&self, text: &str) -> Vec<SkillId> {
        self.matcher.find_all(text)
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '+' || c == '#'
}

#[derive(Debug, Clone)]
struct AliasMatcher {
    // First char of alias -> (alias chars, skill), longest alias first.
    by_first: HashMap<char, Vec<(Vec<char>, SkillId)>>,
}

impl AliasMatcher {
    fn new(lookup: &HashMap<String, SkillId>) -> Self {
        let mut by_first: HashMap<char, Vec<(Vec<char>, SkillId)>> = HashMap::new();
        for (alias, &id) in lookup {
            let chars: Vec<char> = alias.chars().collect();
            if !chars.iter().any(|&c| is_word_char(c)) {
                continue;
            }
            by_first.entry(chars[0]).or_default().push((chars, id));
        }
        for list in by_first.values_mut() {
            list.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        }
        AliasMatcher { by_first }
    }

    fn find_all(&self, text: &str) -> Vec<SkillId> {
        let chars: Vec<char> = normalize_name(text).chars().collect();
        let mut found = Vec::new();
        let mut pos = 0;
        while pos < chars.len() {
            let at_boundary = pos == 0 || !is_word_char(chars[pos - 1]);
            if at_boundary {
                if let Some(len) = self.match_at(&chars, pos, &mut found) {
                    pos += len;
                    continue;
                }
            }
            pos += 1;
        }
        found
    }

    fn match_at(&self, chars: &[char], pos: usize, found: &mut Vec<SkillId>) -> Option<usize> {
        let candidates = self.by_first.get(&chars[pos])?;
        for (alias, id) in candidates {
            let end = pos + alias.len();
            if end > chars.len() || chars[pos..end] != alias[..] {
                continue;
            }
            if end < chars.len() && is_word_char(chars[end]) && is_word_char(alias[alias.len() - 1])
            {
                continue;
            }
            found.push(*id);
            return Some(alias.len());
        }
        None
    }
}

/// Criteria labels of one posting, at most one per category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct PostingLabels([Option<CriteriaLabel>; 5]);

impl PostingLabels {
    pub fn get(&self, category: CriteriaCategory) -> Option<CriteriaLabel> {
        self.0[category as usize]
    }

    pub fn set(&mut self, label: CriteriaLabel) {
        self.0[label.category() as usize] = Some(label);
    }

    pub fn iter(&self) -> impl Iterator<Item = CriteriaLabel> + '_ {
        self.0.iter().flatten().copied()
    }

    pub fn len(&self) -> usize {
        self.iter().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, label: CriteriaLabel) -> bool {
        self.get(label.category()) == Some(label)
    }

    /// Global label indices, ascending.
    pub fn indices(&self) -> Vec<usize> {
        self.iter().map(CriteriaLabel::index).collect()
    }
}

impl FromIterator<CriteriaLabel> for PostingLabels {
    fn from_iter<I: IntoIterator<Item = CriteriaLabel>>(iter: I) -> Self {
        let mut labels = PostingLabels::default();
        for l in iter {
            labels.set(l);
        }
        labels
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JobPosting {
    pub post_id: String,
    pub labels: PostingLabels,
    /// Skill mentions with multiplicity, in order of appearance.
    pub skills: Vec<SkillId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ParseReport {
    pub records: usize,
    pub parsed: usize,
    pub dropped_no_skills: usize,
    pub malformed: usize,
    pub unknown_skill_names: usize,
}

#[derive(Debug, Deserialize)]
struct RawPosting {
    post_id: Value,
    #[serde(default)]
    company_scale: Option<Value>,
    #[serde(default)]
    salary: Option<Value>,
    #[serde(default)]
    location: Option<Value>,
    #[serde(default)]
    financing_round: Option<Value>,
    #[serde(default)]
    work_type: Option<Value>,
    #[serde(default)]
    description: Option<String>,
    #[serde(default)]
    skills: Option<Vec<String>>,
}

/// Monthly salary to band. Bands are half-open: `[30k, ∞)` is very high,
/// `[20k, 30k)` high, `[10k, 20k)` medium, `[5k, 10k)` low, below 5k very low.
pub fn salary_band(monthly: f64) -> CriteriaLabel {
    let slug = match monthly {
        m if m >= 30_000.0 => "very_high",
        m if m >= 20_000.0 => "high",
        m if m >= 10_000.0 => "medium",
        m if m >= 5_000.0 => "low",
        _ => "very_low",
    };
    CriteriaLabel::from_value(CriteriaCategory::Salary, slug).unwrap()
}

/// Employee count to scale band, half-open at 2000, 500, 100 and 50.
pub fn scale_band(employees: f64) -> CriteriaLabel {
    let slug = match employees {
        e if e >= 2000.0 => "very_big",
        e if e >= 500.0 => "big",
        e if e >= 100.0 => "medium",
        e if e >= 50.0 => "small",
        _ => "very_small",
    };
    CriteriaLabel::from_value(CriteriaCategory::CompanyScale, slug).unwrap()
}

/// Leading number of a field such as "25k/month", "500-2000" or "2000+".
/// Ranges resolve to their lower bound.
fn leading_amount(s: &str) -> Option<f64> {
    let s = s.trim().to_lowercase();
    let start = s.find(|c: char| c.is_ascii_digit())?;
    let rest = &s[start..];
    let end = rest
        .find(|c: char| !(c.is_ascii_digit() || c == '.' || c == ','))
        .unwrap_or(rest.len());
    let mut value: f64 = rest[..end].replace(',', "").parse().ok()?;
    let suffix = rest[end..].trim_start();
    if suffix.starts_with('k') {
        value *= 1_000.0;
    } else if suffix.starts_with('w') || suffix.starts_with('万') {
        value *= 10_000.0;
    }
    Some(value)
}

fn is_missing(v: &Option<Value>) -> bool {
    match v {
        None | Some(Value::Null) => true,
        Some(Value::String(s)) => {
            let t = s.trim().to_lowercase();
            t.is_empty() || t == "unknown" || t == "null" || t == "n/a" || t == "-"
        }
        _ => false,
    }
}

fn value_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn parse_numeric_field(
    v: &Option<Value>,
    category: CriteriaCategory,
    band: fn(f64) -> CriteriaLabel,
    monthly: bool,
) -> std::result::Result<Option<CriteriaLabel>, String> {
    if is_missing(v) {
        return Ok(None);
    }
    let raw = value_text(v.as_ref().unwrap());
    if let Some(label) = CriteriaLabel::from_value(category, &raw) {
        return Ok(Some(label));
    }
    let mut amount = leading_amount(&raw)
        .ok_or_else(|| format!("unparseable {} value `{raw}`", category.slug()))?;
    let lower = raw.to_lowercase();
    if monthly && (lower.contains("year") || lower.contains("annual") || lower.contains("/y")) {
        amount /= 12.0;
    }
    Ok(Some(band(amount)))
}

fn parse_categorical_field(
    v: &Option<Value>,
    category: CriteriaCategory,
) -> std::result::Result<Option<CriteriaLabel>, String> {
    if is_missing(v) {
        return Ok(None);
    }
    let raw = value_text(v.as_ref().unwrap());
    CriteriaLabel::from_value(category, &raw)
        .map(Some)
        .ok_or_else(|| format!("unknown {} value `{raw}`", category.slug()))
}

enum LineOutcome {
    Posting(JobPosting),
    NoSkills,
    Malformed(String),
}

fn parse_line(line: &str, dict: &SkillDictionary, unknown: &mut usize) -> LineOutcome {
    // Objects only: the derived deserializer would also accept a JSON
    // array as a positional record.
    let raw: RawPosting = match serde_json::from_str::<Value>(line) {
        Ok(v @ Value::Object(_)) => match serde_json::from_value(v) {
            Ok(r) => r,
            Err(e) => return LineOutcome::Malformed(e.to_string()),
        },
        Ok(_) => return LineOutcome::Malformed("record is not a JSON object".into()),
        Err(e) => return LineOutcome::Malformed(e.to_string()),
    };
    let post_id = match &raw.post_id {
        Value::String(s) if !s.is_empty() => s.clone(),
        Value::Number(n) => n.to_string(),
        _ => return LineOutcome::Malformed("missing post_id".into()),
    };

    let mut labels = PostingLabels::default();
    let fields = [
        parse_numeric_field(&raw.salary, CriteriaCategory::Salary, salary_band, true),
        parse_numeric_field(
            &raw.company_scale,
            CriteriaCategory::CompanyScale,
            scale_band,
            false,
        ),
        parse_categorical_field(&raw.location, CriteriaCategory::Location),
        parse_categorical_field(&raw.work_type, CriteriaCategory::WorkType),
    ];
    for f in fields {
        match f {
            Ok(Some(l)) => labels.set(l),
            Ok(None) => {}
            Err(reason) => return LineOutcome::Malformed(reason),
        }
    }
    // Missing financing is an explicit taxonomy value, not an absent label.
    let financing = if is_missing(&raw.financing_round) {
        CriteriaLabel::from_value(CriteriaCategory::FinancingRound, "unknown")
    } else {
        match parse_categorical_field(&raw.financing_round, CriteriaCategory::FinancingRound) {
            Ok(l) => l,
            Err(reason) => return LineOutcome::Malformed(reason),
        }
    };
    labels.set(financing.expect("financing label"));

    let skills = match (&raw.skills, &raw.description) {
        (Some(names), _) => names
            .iter()
            .filter_map(|n| {
                let id = dict.lookup(n);
                if id.is_none() {
                    *unknown += 1;
                }
                id
            })
            .collect(),
        (None, Some(desc)) => dict.extract_skills(desc),
        (None, None) => Vec::new(),
    };
    if skills.is_empty() {
        return LineOutcome::NoSkills;
    }
    LineOutcome::Posting(JobPosting {
        post_id,
        labels,
        skills,
    })
}

/// Parses line-delimited posting records. Malformed lines are skipped and
/// counted; postings without any dictionary skill are dropped and counted.
/// Output order follows input order.
pub fn parse_postings<R: BufRead>(
    reader: R,
    dict: &SkillDictionary,
) -> Result<(Vec<JobPosting>, ParseReport)> {
    let mut report = ParseReport::default();
    let mut postings = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        report.records += 1;
        match parse_line(&line, dict, &mut report.unknown_skill_names) {
            LineOutcome::Posting(p) => postings.push(p),
            LineOutcome::NoSkills => report.dropped_no_skills += 1,
            LineOutcome::Malformed(reason) => {
                warn!("skipping malformed posting at line {}: {reason}", i + 1);
                report.malformed += 1;
            }
        }
    }
    report.parsed = postings.len();
    Ok((postings, report))
}

pub fn parse_postings_path(
    path: impl AsRef<Path>,
    dict: &SkillDictionary,
) -> Result<(Vec<JobPosting>, ParseReport)> {
    let file = std::fs::File::open(path)?;
    parse_postings(std::io::BufReader::new(file), dict)
}

impl JobPosting {
    /// The posting in the input record shape, with labels as value slugs
    /// and skills as canonical names.
    pub fn to_record(&self, dict: &SkillDictionary) -> Value {
        let field = |c: CriteriaCategory| {
            self.labels
                .get(c)
                .map(|l| Value::String(l.value_slug().to_string()))
                .unwrap_or(Value::Null)
        };
        let skills: Vec<Value> = self
            .skills
            .iter()
            .map(|&s| Value::String(dict.skill_name(s).unwrap_or_default().to_string()))
            .collect();
        serde_json::json!({
            "post_id": self.post_id,
            "company_scale": field(CriteriaCategory::CompanyScale),
            "salary": field(CriteriaCategory::Salary),
            "location": field(CriteriaCategory::Location),
            "financing_round": field(CriteriaCategory::FinancingRound),
            "work_type": field(CriteriaCategory::WorkType),
            "skills": skills,
        })
    }
}

pub fn write_postings<W: Write>(
    mut out: W,
    postings: &[JobPosting],
    dict: &SkillDictionary,
) -> Result<()> {
    for p in postings {
        serde_json::to_writer(&mut out, &p.to_record(dict))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
