//! The fixed job-criteria taxonomy.
//!
//! Twenty-three labels in five categories. Each label owns a stable global
//! index in `[0, 23)`, which doubles as the index of the topic bound to it.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Number of criteria labels, and therefore topics, in the full taxonomy.
pub const NUM_LABELS: usize = 23;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CriteriaCategory {
    Salary,
    CompanyScale,
    Location,
    FinancingRound,
    WorkType,
}

impl CriteriaCategory {
    pub const ALL: [CriteriaCategory; 5] = [
        CriteriaCategory::Salary,
        CriteriaCategory::CompanyScale,
        CriteriaCategory::Location,
        CriteriaCategory::FinancingRound,
        CriteriaCategory::WorkType,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            CriteriaCategory::Salary => "salary",
            CriteriaCategory::CompanyScale => "company_scale",
            CriteriaCategory::Location => "location",
            CriteriaCategory::FinancingRound => "financing",
            CriteriaCategory::WorkType => "work_type",
        }
    }

    pub fn from_slug(slug: &str) -> Option<Self> {
        match normalize_token(slug).as_str() {
            "salary" => Some(CriteriaCategory::Salary),
            "company_scale" | "scale" | "company" => Some(CriteriaCategory::CompanyScale),
            "location" | "city" => Some(CriteriaCategory::Location),
            "financing" | "financing_round" | "financial_round" => {
                Some(CriteriaCategory::FinancingRound)
            }
            "work_type" | "worktype" | "type" => Some(CriteriaCategory::WorkType),
            _ => None,
        }
    }

    /// Global index of the first label in this category.
    fn offset(self) -> usize {
        match self {
            CriteriaCategory::Salary => 0,
            CriteriaCategory::CompanyScale => 5,
            CriteriaCategory::Location => 10,
            CriteriaCategory::FinancingRound => 13,
            CriteriaCategory::WorkType => 20,
        }
    }

    pub fn labels(self) -> impl Iterator<Item = CriteriaLabel> {
        let start = self.offset();
        let len = VALUE_SLUGS[self as usize].len();
        (start..start + len).map(|i| CriteriaLabel(i as u8))
    }
}

impl fmt::Display for CriteriaCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

const VALUE_SLUGS: [&[&str]; 5] = [
    &["very_high", "high", "medium", "low", "very_low"],
    &["very_big", "big", "medium", "small", "very_small"],
    &["huge_cities", "big_cities", "normal_cities"],
    &["angel", "a", "b", "c", "d", "listed", "unknown"],
    &["fulltime", "part_time", "intern"],
];

const DISPLAY_NAMES: [&str; NUM_LABELS] = [
    "Very High Salary",
    "High Salary",
    "Medium Salary",
    "Low Salary",
    "Very Low Salary",
    "Very Big Company",
    "Big Company",
    "Medium Company",
    "Small Company",
    "Very Small Company",
    "Huge Cities",
    "Big Cities",
    "Normal Cities",
    "Angel Round",
    "A Round",
    "B Round",
    "C Round",
    "D Round",
    "Listed",
    "Unknown Financing",
    "Fulltime",
    "Part-time",
    "Intern",
];

/// One criteria label, identified by its global index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CriteriaLabel(u8);

impl CriteriaLabel {
    pub fn all() -> impl Iterator<Item = CriteriaLabel> {
        (0..NUM_LABELS as u8).map(CriteriaLabel)
    }

    pub fn from_index(index: usize) -> Option<Self> {
        (index < NUM_LABELS).then_some(CriteriaLabel(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn category(self) -> CriteriaCategory {
        let i = self.index();
        *CriteriaCategory::ALL
            .iter()
            .rev()
            .find(|c| c.offset() <= i)
            .expect("index below first offset")
    }

    /// Value slug within the category, e.g. `very_high`.
    pub fn value_slug(self) -> &'static str {
        let c = self.category();
        VALUE_SLUGS[c as usize][self.index() - c.offset()]
    }

    /// Full `category=value` slug, e.g. `salary=very_high`.
    pub fn slug(self) -> String {
        format!("{}={}", self.category().slug(), self.value_slug())
    }

    pub fn display_name(self) -> &'static str {
        DISPLAY_NAMES[self.index()]
    }

    /// Looks up a value within a category. Accepts slugs and the display
    /// spellings used in posting data ("Very High", "A Round", "Part-time").
    pub fn from_value(category: CriteriaCategory, value: &str) -> Option<Self> {
        let mut v = normalize_token(value);
        match category {
            CriteriaCategory::FinancingRound => {
                for suffix in ["_round", "_financing"] {
                    if let Some(stripped) = v.strip_suffix(suffix) {
                        v = stripped.to_string();
                    }
                }
                if v == "ipo" || v == "public" {
                    v = "listed".into();
                }
            }
            CriteriaCategory::Location => {
                if !v.ends_with("_cities") {
                    let stem = v.strip_suffix("_city").unwrap_or(&v).to_string();
                    v = format!("{stem}_cities");
                }
            }
            CriteriaCategory::WorkType => {
                v = match v.as_str() {
                    "full_time" | "fulltime" => "fulltime".into(),
                    "parttime" | "part_time" => "part_time".into(),
                    "intern" | "internship" => "intern".into(),
                    _ => v,
                };
            }
            CriteriaCategory::CompanyScale => {
                if let Some(stripped) = v.strip_suffix("_company") {
                    v = stripped.to_string();
                }
            }
            CriteriaCategory::Salary => {
                if let Some(stripped) = v.strip_suffix("_salary") {
                    v = stripped.to_string();
                }
            }
        }
        VALUE_SLUGS[category as usize]
            .iter()
            .position(|s| *s == v)
            .map(|p| CriteriaLabel((category.offset() + p) as u8))
    }

    /// Valid `category=value` slugs for one category, for error messages.
    pub fn valid_slugs(category: CriteriaCategory) -> Vec<String> {
        category.labels().map(|l| l.slug()).collect()
    }
}

impl fmt::Display for CriteriaLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.slug())
    }
}

impl FromStr for CriteriaLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let (cat, value) = s
            .split_once('=')
            .ok_or_else(|| Error::UnknownLabel(format!("{s} (expected category=value)")))?;
        let category = CriteriaCategory::from_slug(cat).ok_or_else(|| {
            let cats: Vec<_> = CriteriaCategory::ALL.iter().map(|c| c.slug()).collect();
            Error::UnknownLabel(format!("{s}; valid categories: {}", cats.join(", ")))
        })?;
        CriteriaLabel::from_value(category, value).ok_or_else(|| {
            Error::UnknownLabel(format!(
                "{s}; valid values: {}",
                CriteriaLabel::valid_slugs(category).join(", ")
            ))
        })
    }
}

/// Lowercases and maps runs of non-alphanumerics to a single `_`.
pub(crate) fn normalize_token(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending = false;
    for ch in s.trim().chars() {
        if ch.is_alphanumeric() {
            if pending && !out.is_empty() {
                out.push('_');
            }
            pending = false;
            out.extend(ch.to_lowercase());
        } else {
            pending = true;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taxonomy_has_23_labels_with_expected_category_sizes() {
        let sizes: Vec<usize> = CriteriaCategory::ALL
            .iter()
            .map(|c| c.labels().count())
            .collect();
        assert_eq!(sizes, vec![5, 5, 3, 7, 3]);
        assert_eq!(CriteriaLabel::all().count(), NUM_LABELS);
    }

    #[test]
    fn global_index_is_a_bijection() {
        let mut seen = [false; NUM_LABELS];
        for c in CriteriaCategory::ALL {
            for l in c.labels() {
                assert_eq!(l.category(), c);
                assert!(!seen[l.index()]);
                seen[l.index()] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn slugs_round_trip() {
        for l in CriteriaLabel::all() {
            assert_eq!(l.slug().parse::<CriteriaLabel>().unwrap(), l);
        }
    }

    #[test]
    fn display_spellings_parse() {
        use CriteriaCategory::*;
        let cases = [
            (Salary, "Very High", "salary=very_high"),
            (CompanyScale, "Very Big", "company_scale=very_big"),
            (Location, "Huge Cities", "location=huge_cities"),
            (Location, "normal city", "location=normal_cities"),
            (FinancingRound, "A Round", "financing=a"),
            (FinancingRound, "Listed", "financing=listed"),
            (WorkType, "Part-time", "work_type=part_time"),
            (WorkType, "Fulltime", "work_type=fulltime"),
        ];
        for (cat, raw, slug) in cases {
            assert_eq!(CriteriaLabel::from_value(cat, raw).unwrap().slug(), slug);
        }
    }

    #[test]
    fn unknown_value_lists_valid_values() {
        let err = "salary=ultra".parse::<CriteriaLabel>().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("salary=very_high"), "{msg}");
        assert!(matches!(err, Error::UnknownLabel(_)));
    }
}
