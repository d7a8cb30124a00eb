//! Monthly pageview counts: a live client for the Wikimedia REST endpoint
//! and a fixture-file client for offline runs and tests.

use super::CurationError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// A calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn next(self) -> YearMonth {
        if self.month == 12 {
            YearMonth { year: self.year + 1, month: 1 }
        } else {
            YearMonth { year: self.year, month: self.month + 1 }
        }
    }

    fn days(self) -> u32 {
        match self.month {
            1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
            4 | 6 | 9 | 11 => 30,
            _ => {
                let leap = (self.year % 4 == 0 && self.year % 100 != 0) || self.year % 400 == 0;
                if leap {
                    29
                } else {
                    28
                }
            }
        }
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (y, m) = s.split_once('-').ok_or_else(|| format!("expected YYYY-MM, got {s:?}"))?;
        let year: i32 = y.parse().map_err(|_| format!("bad year in {s:?}"))?;
        let month: u32 = m.parse().map_err(|_| format!("bad month in {s:?}"))?;
        if !(1..=12).contains(&month) {
            return Err(format!("month out of range in {s:?}"));
        }
        Ok(YearMonth { year, month })
    }
}

/// An inclusive month range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthRange {
    pub start: YearMonth,
    pub end: YearMonth,
}

impl MonthRange {
    pub fn new(start: YearMonth, end: YearMonth) -> Result<Self, String> {
        if start > end {
            return Err(format!("window start {start} is after end {end}"));
        }
        Ok(Self { start, end })
    }

    /// Parses `YYYY-MM:YYYY-MM`.
    pub fn parse(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once(':').ok_or_else(|| format!("expected YYYY-MM:YYYY-MM, got {s:?}"))?;
        Self::new(a.parse()?, b.parse()?)
    }

    pub fn months(&self) -> impl Iterator<Item = YearMonth> {
        let end = self.end;
        let mut current = Some(self.start);
        std::iter::from_fn(move || {
            let m = current?;
            current = if m < end { Some(m.next()) } else { None };
            Some(m)
        })
    }
}

impl fmt::Display for MonthRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start, self.end)
    }
}

/// Source of monthly view counts for a page. Months with no data are simply
/// absent from the result.
pub trait PageviewsClient: Send + Sync {
    fn monthly_views(
        &self,
        page: &str,
        window: &MonthRange,
    ) -> Result<BTreeMap<YearMonth, u64>, CurationError>;
}

/// Fixture-backed client: a JSON object mapping page title to
/// `{"YYYY-MM": views}`.
#[derive(Debug, Clone, Default)]
pub struct FixturePageviews {
    pages: BTreeMap<String, BTreeMap<String, u64>>,
}

impl FixturePageviews {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, CurationError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| CurationError::Read { path: path.display().to_string(), source })?;
        let pages = serde_json::from_str(&text)
            .map_err(|source| CurationError::Format { path: path.display().to_string(), source })?;
        Ok(Self { pages })
    }

    pub fn from_map(pages: BTreeMap<String, BTreeMap<String, u64>>) -> Self {
        Self { pages }
    }
}

impl PageviewsClient for FixturePageviews {
    fn monthly_views(
        &self,
        page: &str,
        window: &MonthRange,
    ) -> Result<BTreeMap<YearMonth, u64>, CurationError> {
        let months = self
            .pages
            .get(page)
            .ok_or_else(|| CurationError::PageNotFound(page.to_string()))?;
        let mut out = BTreeMap::new();
        for m in window.months() {
            if let Some(&views) = months.get(&m.to_string()) {
                out.insert(m, views);
            }
        }
        Ok(out)
    }
}

/// Client for the Wikimedia pageviews REST endpoint (per-article, monthly
/// granularity, user traffic), with the same transient-retry policy as the
/// LLM gateway.
pub struct LivePageviews {
    base_url: String,
    project: String,
    http: reqwest::blocking::Client,
    max_retries: u32,
}

#[derive(Deserialize)]
struct PageviewsReply {
    items: Vec<PageviewsItem>,
}

#[derive(Deserialize)]
struct PageviewsItem {
    timestamp: String,
    views: u64,
}

impl LivePageviews {
    pub fn new(base_url: impl Into<String>, project: impl Into<String>) -> Result<Self, CurationError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(30))
            .user_agent("tabgen/0.1 (benchmark curation)")
            .build()
            .map_err(|e| CurationError::Endpoint(e.to_string()))?;
        Ok(Self { base_url: base_url.into(), project: project.into(), http, max_retries: 3 })
    }

    fn url_for(&self, page: &str, window: &MonthRange) -> String {
        let article: String = page.replace(' ', "_");
        let encoded: String = article
            .bytes()
            .map(|b| match b {
                b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'_' | b'-' | b'.' | b'~' => {
                    (b as char).to_string()
                }
                other => format!("%{other:02X}"),
            })
            .collect();
        let last_day = window.end.days();
        format!(
            "{}/metrics/pageviews/per-article/{}/all-access/user/{}/monthly/{:04}{:02}01/{:04}{:02}{:02}",
            self.base_url.trim_end_matches('/'),
            self.project,
            encoded,
            window.start.year,
            window.start.month,
            window.end.year,
            window.end.month,
            last_day,
        )
    }
}

impl PageviewsClient for LivePageviews {
    fn monthly_views(
        &self,
        page: &str,
        window: &MonthRange,
    ) -> Result<BTreeMap<YearMonth, u64>, CurationError> {
        let url = self.url_for(page, window);
        let mut last_error = String::new();
        for attempt in 0..=self.max_retries {
            match self.http.get(&url).send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.as_u16() == 404 {
                        return Err(CurationError::PageNotFound(page.to_string()));
                    }
                    if status.is_success() {
                        let reply: PageviewsReply = resp
                            .json()
                            .map_err(|e| CurationError::Endpoint(e.to_string()))?;
                        let mut out = BTreeMap::new();
                        for item in reply.items {
                            if item.timestamp.len() >= 6 {
                                let year: i32 =
                                    item.timestamp[..4].parse().map_err(|_| {
                                        CurationError::Endpoint(format!("bad timestamp {:?}", item.timestamp))
                                    })?;
                                let month: u32 =
                                    item.timestamp[4..6].parse().map_err(|_| {
                                        CurationError::Endpoint(format!("bad timestamp {:?}", item.timestamp))
                                    })?;
                                out.insert(YearMonth { year, month }, item.views);
                            }
                        }
                        return Ok(out);
                    }
                    last_error = format!("status {status}");
                    if !(status.as_u16() == 429 || status.is_server_error()) {
                        break;
                    }
                }
                Err(e) => last_error = e.to_string(),
            }
            if attempt < self.max_retries {
                std::thread::sleep(std::time::Duration::from_millis(250 << attempt.min(4)));
            }
        }
        Err(CurationError::Endpoint(last_error))
    }
}

#[cfg(test)]
mod tests {
    use super::super::popularity;
    use super::*;

    fn fixture(entries: &[(&str, u64)]) -> FixturePageviews {
        let mut months = BTreeMap::new();
        for (m, v) in entries {
            months.insert(m.to_string(), *v);
        }
        let mut pages = BTreeMap::new();
        pages.insert("Test Page".to_string(), months);
        FixturePageviews::from_map(pages)
    }

    fn window(s: &str) -> MonthRange {
        MonthRange::parse(s).unwrap()
    }

    #[test]
    fn mean_over_full_window() {
        let client = fixture(&[("2023-01", 100), ("2023-02", 200), ("2023-03", 300)]);
        let p = popularity("Test Page", &client, &window("2023-01:2023-03")).unwrap();
        assert_eq!(p, 200.0);
    }

    #[test]
    fn missing_months_are_excluded() {
        let client = fixture(&[("2023-01", 100), ("2023-03", 300)]);
        let p = popularity("Test Page", &client, &window("2023-01:2023-03")).unwrap();
        assert_eq!(p, 200.0);
    }

    #[test]
    fn unknown_page_errors() {
        let client = fixture(&[("2023-01", 100)]);
        let err = popularity("Nope", &client, &window("2023-01:2023-01")).unwrap_err();
        assert!(matches!(err, CurationError::PageNotFound(_)));
    }

    #[test]
    fn empty_window_data_errors() {
        let client = fixture(&[("2020-01", 100)]);
        let err = popularity("Test Page", &client, &window("2023-01:2023-02")).unwrap_err();
        assert!(matches!(err, CurationError::AllMonthsMissing { .. }));
    }

    #[test]
    fn month_range_iterates_inclusively() {
        let months: Vec<String> =
            window("2022-11:2023-02").months().map(|m| m.to_string()).collect();
        assert_eq!(months, vec!["2022-11", "2022-12", "2023-01", "2023-02"]);
    }

    #[test]
    fn live_url_shape() {
        let client = LivePageviews::new("https://wikimedia.example/api/rest_v1", "en.wikipedia").unwrap();
        let url = client.url_for("Susen Tiedtke", &window("2023-01:2023-02"));
        assert_eq!(
            url,
            "https://wikimedia.example/api/rest_v1/metrics/pageviews/per-article/en.wikipedia/all-access/user/Susen_Tiedtke/monthly/20230101/20230228"
        );
    }
}
