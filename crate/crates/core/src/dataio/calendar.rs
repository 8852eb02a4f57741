use chrono::{Datelike, Duration, NaiveDate};

use super::{Observation, TimeSeries};
use crate::error::{Error, Result};

pub fn month_start(date: NaiveDate) -> NaiveDate {
    date.with_day(1).expect("day 1 exists in every month")
}

pub fn next_month(date: NaiveDate) -> NaiveDate {
    let (y, m) = if date.month() == 12 { (date.year() + 1, 1) } else { (date.year(), date.month() + 1) };
    NaiveDate::from_ymd_opt(y, m, 1).expect("valid month start")
}

/// First-of-month dates from `month_start(from)` through `month_start(to)` inclusive.
pub fn months_in_range(from: NaiveDate, to: NaiveDate) -> Vec<NaiveDate> {
    let mut out = Vec::new();
    let mut m = month_start(from);
    let last = month_start(to);
    while m <= last {
        out.push(m);
        m = next_month(m);
    }
    out
}

/// Reduces a daily series to one value per month, dated on the first.
///
/// The value for a month is the observation on the 1st when one exists,
/// otherwise the most recent earlier observation no more than
/// `lookback_days` before the 1st. The output covers every month whose first
/// day falls inside the observed date range.
pub fn align_to_month_start(daily: &TimeSeries, lookback_days: i64) -> Result<TimeSeries> {
    let points = daily.points();
    let first = daily.first_date();
    let first_month = if first.day() == 1 { first } else { next_month(first) };
    let mut out = Vec::new();
    let mut cursor = 0usize;
    for m in months_in_range(first_month, daily.last_date()) {
        // advance to the last observation dated on or before m
        while cursor + 1 < points.len() && points[cursor + 1].date <= m {
            cursor += 1;
        }
        let obs = points[cursor];
        if obs.date > m || m - obs.date > Duration::days(lookback_days) {
            return Err(Error::EmptyMonth(m));
        }
        out.push(Observation { date: m, value: obs.value });
    }
    if out.is_empty() {
        return Err(Error::EmptyAfterCleaning(daily.name().to_string()));
    }
    let mut series = TimeSeries::new(daily.name(), out)?
        .with_provenance(format!("month_start_prior_trading_day(lookback={lookback_days}d)"));
    if let Some(u) = daily.units() {
        series = series.with_units(u);
    }
    Ok(series)
}

/// Re-dates a series with at most one observation per month to month starts.
pub fn to_monthly(series: &TimeSeries) -> Result<TimeSeries> {
    let points: Vec<Observation> = series
        .points()
        .iter()
        .map(|p| Observation { date: month_start(p.date), value: p.value })
        .collect();
    let mut out = TimeSeries::new(series.name(), points)?.with_provenance("native_monthly");
    if let Some(u) = series.units() {
        out = out.with_units(u);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Weekday;
    use proptest::prelude::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn weekdays(from: NaiveDate, to: NaiveDate) -> Vec<NaiveDate> {
        from.iter_days()
            .take_while(|x| *x <= to)
            .filter(|x| !matches!(x.weekday(), Weekday::Sat | Weekday::Sun))
            .collect()
    }

    #[test]
    fn weekend_first_takes_prior_friday() {
        // 2000-04-01 is a Saturday; 2000-03-31 is the Friday before.
        assert_eq!(d(2000, 4, 1).weekday(), Weekday::Sat);
        let days = weekdays(d(2000, 3, 1), d(2000, 4, 10));
        let values: Vec<f64> = days.iter().map(|x| x.ordinal() as f64).collect();
        let s = TimeSeries::from_values("idx", &days, &values).unwrap();
        let m = align_to_month_start(&s, 7).unwrap();
        assert_eq!(m.dates(), vec![d(2000, 3, 1), d(2000, 4, 1)]);
        assert_eq!(m.values()[1], d(2000, 3, 31).ordinal() as f64);
    }

    #[test]
    fn weekday_first_is_used_unchanged() {
        // 2000-03-01 is a Wednesday.
        assert_eq!(d(2000, 3, 1).weekday(), Weekday::Wed);
        let s = TimeSeries::from_values("idx", &[d(2000, 2, 29), d(2000, 3, 1)], &[5.0, 7.5]).unwrap();
        let m = align_to_month_start(&s, 7).unwrap();
        assert_eq!(m.values(), vec![7.5]);
    }

    #[test]
    fn gap_longer_than_lookback_is_empty_month() {
        let s = TimeSeries::from_values(
            "idx",
            &[d(2000, 1, 3), d(2000, 1, 20), d(2000, 2, 15)],
            &[1.0, 2.0, 3.0],
        )
        .unwrap();
        assert!(matches!(align_to_month_start(&s, 7), Err(Error::EmptyMonth(m)) if m == d(2000, 2, 1)));
    }

    #[test]
    fn holiday_gap_within_lookback() {
        // Only Dec 29 before Jan 1 2001 (Monday holiday).
        let s = TimeSeries::from_values("idx", &[d(2000, 12, 29), d(2001, 1, 2)], &[1.0, 2.0]).unwrap();
        let m = align_to_month_start(&s, 7).unwrap();
        assert_eq!(m.dates(), vec![d(2001, 1, 1)]);
        assert_eq!(m.values(), vec![1.0]);
    }

    #[test]
    fn months_in_range_counts() {
        assert_eq!(months_in_range(d(2000, 1, 1), d(2019, 12, 1)).len(), 240);
        assert_eq!(months_in_range(d(2000, 1, 15), d(2000, 1, 20)).len(), 1);
    }

    proptest! {
        #[test]
        fn aligned_length_is_month_starts_in_span(start in 0i64..3000, span in 40i64..1500) {
            let from = d(1995, 1, 1) + Duration::days(start);
            let to = from + Duration::days(span);
            let days = weekdays(from, to);
            let values: Vec<f64> = (0..days.len()).map(|i| i as f64).collect();
            let s = TimeSeries::from_values("w", &days, &values).unwrap();
            let m = align_to_month_start(&s, 7).unwrap();
            let first = s.first_date();
            let expected = from.iter_days()
                .take_while(|x| *x <= s.last_date())
                .filter(|x| x.day() == 1 && *x >= first)
                .count();
            prop_assert_eq!(m.len(), expected);
        }
    }
}
