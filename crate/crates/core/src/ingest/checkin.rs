//! Check-in records and the tab-separated line format they are stored in.

use chrono::{Datelike, NaiveDate, NaiveDateTime, NaiveTime, Timelike, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::geo::GeoPoint;

/// Number of columns in a check-in line.
pub const FIELD_COUNT: usize = 11;

/// Column names in the default on-disk order.
pub const DEFAULT_HEADER: [&str; FIELD_COUNT] =
    ["U", "P", "PC", "PCN", "LO", "LA", "W", "Y", "M", "D", "T"];

const MONTHS: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: expected {expected} fields, found {found}")]
    MalformedLine {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: field `{field}` is empty")]
    EmptyField { line: usize, field: &'static str },
    #[error("line {line}: invalid coordinate in field `{field}`: {value:?}")]
    InvalidCoordinate {
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("line {line}: invalid date in field `{field}`: {value:?}")]
    InvalidDate {
        line: usize,
        field: &'static str,
        value: String,
    },
}

impl ParseError {
    pub fn line(&self) -> usize {
        match *self {
            ParseError::MalformedLine { line, .. }
            | ParseError::EmptyField { line, .. }
            | ParseError::InvalidCoordinate { line, .. }
            | ParseError::InvalidDate { line, .. } => line,
        }
    }
}

/// One check-in event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckIn {
    pub user_id: String,
    pub poi_id: String,
    pub category_id: String,
    pub category_name: String,
    /// Degrees in [-90, 90].
    pub latitude: f64,
    /// Degrees in [-180, 180].
    pub longitude: f64,
    /// Recorded local clock time; no timezone is attached.
    pub timestamp: NaiveDateTime,
}

impl CheckIn {
    pub fn hour(&self) -> u32 {
        self.timestamp.hour()
    }

    pub fn point(&self) -> GeoPoint {
        GeoPoint::new(self.latitude, self.longitude)
    }

    pub fn year_month(&self) -> (i32, u32) {
        (self.timestamp.year(), self.timestamp.month())
    }

    /// Serializes back into the default column order.
    pub fn to_line(&self) -> String {
        let ts = &self.timestamp;
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:02}\t{}",
            self.user_id,
            self.poi_id,
            self.category_id,
            self.category_name,
            self.latitude,
            self.longitude,
            ts.weekday(),
            ts.year(),
            MONTHS[ts.month0() as usize],
            ts.day(),
            ts.time().format("%H:%M:%S"),
        )
    }
}

/// Semantic fields of a check-in line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    User,
    Poi,
    Category,
    CategoryName,
    Latitude,
    Longitude,
    Weekday,
    Year,
    Month,
    Day,
    Time,
}

impl Field {
    fn name(self) -> &'static str {
        match self {
            Field::User => "user",
            Field::Poi => "poi",
            Field::Category => "category",
            Field::CategoryName => "category_name",
            Field::Latitude => "latitude",
            Field::Longitude => "longitude",
            Field::Weekday => "weekday",
            Field::Year => "year",
            Field::Month => "month",
            Field::Day => "day",
            Field::Time => "time",
        }
    }
}

/// Column order of a check-in file.
///
/// The default follows the published sample layout. Its fifth column is
/// labelled `LO` but holds values such as `40.7` for New York, so it is read
/// as latitude and the sixth as longitude.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckInSchema {
    columns: [Field; FIELD_COUNT],
}

impl Default for CheckInSchema {
    fn default() -> Self {
        Self {
            columns: [
                Field::User,
                Field::Poi,
                Field::Category,
                Field::CategoryName,
                Field::Latitude,
                Field::Longitude,
                Field::Weekday,
                Field::Year,
                Field::Month,
                Field::Day,
                Field::Time,
            ],
        }
    }
}

impl CheckInSchema {
    /// Builds a schema from any permutation of the fields.
    pub fn new(columns: [Field; FIELD_COUNT]) -> Option<Self> {
        let all = CheckInSchema::default().columns;
        all.iter()
            .all(|f| columns.iter().filter(|c| *c == f).count() == 1)
            .then_some(Self { columns })
    }

    fn position(&self, field: Field) -> usize {
        self.columns
            .iter()
            .position(|f| *f == field)
            .expect("schema holds every field")
    }

    /// A header row is recognised by a non-numeric year column.
    pub fn is_header(&self, line: &str) -> bool {
        line.split('\t')
            .nth(self.position(Field::Year))
            .map(|y| y.trim().parse::<i32>().is_err())
            .unwrap_or(false)
    }
}

/// Parses one tab-separated check-in line; `line_no` is 1-based and only
/// used for error reporting.
pub fn parse_checkin_line(
    line: &str,
    line_no: usize,
    schema: &CheckInSchema,
) -> Result<CheckIn, ParseError> {
    let raw: Vec<&str> = line.trim_end_matches(['\r', '\n']).split('\t').collect();
    if raw.len() != FIELD_COUNT {
        return Err(ParseError::MalformedLine {
            line: line_no,
            expected: FIELD_COUNT,
            found: raw.len(),
        });
    }
    let get = |field: Field| raw[schema.position(field)].trim();
    let text = |field: Field| -> Result<String, ParseError> {
        let v = get(field);
        if v.is_empty() {
            Err(ParseError::EmptyField {
                line: line_no,
                field: field.name(),
            })
        } else {
            Ok(v.to_string())
        }
    };

    let coord = |field: Field, limit: f64| -> Result<f64, ParseError> {
        let v = get(field);
        match v.parse::<f64>() {
            Ok(x) if x.is_finite() && x.abs() <= limit => Ok(x),
            _ => Err(ParseError::InvalidCoordinate {
                line: line_no,
                field: field.name(),
                value: v.to_string(),
            }),
        }
    };
    let bad_date = |field: Field| ParseError::InvalidDate {
        line: line_no,
        field: field.name(),
        value: get(field).to_string(),
    };

    let latitude = coord(Field::Latitude, 90.0)?;
    let longitude = coord(Field::Longitude, 180.0)?;

    let year: i32 = get(Field::Year)
        .parse()
        .map_err(|_| bad_date(Field::Year))?;
    let month = parse_month(get(Field::Month)).ok_or_else(|| bad_date(Field::Month))?;
    let day: u32 = get(Field::Day).parse().map_err(|_| bad_date(Field::Day))?;
    let date = NaiveDate::from_ymd_opt(year, month, day).ok_or_else(|| bad_date(Field::Day))?;
    let weekday: Weekday = get(Field::Weekday)
        .parse()
        .map_err(|_| bad_date(Field::Weekday))?;
    if weekday != date.weekday() {
        return Err(bad_date(Field::Weekday));
    }
    let time = NaiveTime::parse_from_str(get(Field::Time), "%H:%M:%S")
        .map_err(|_| bad_date(Field::Time))?;

    Ok(CheckIn {
        user_id: text(Field::User)?,
        poi_id: text(Field::Poi)?,
        category_id: text(Field::Category)?,
        category_name: get(Field::CategoryName).to_string(),
        latitude,
        longitude,
        timestamp: date.and_time(time),
    })
}

fn parse_month(s: &str) -> Option<u32> {
    if let Ok(n) = s.parse::<u32>() {
        return (1..=12).contains(&n).then_some(n);
    }
    MONTHS
        .iter()
        .position(|m| m.eq_ignore_ascii_case(s))
        .map(|i| i as u32 + 1)
}
