//! GTFS feed ingestion and calibration of travel, headway and waiting-time
//! distributions.
//!
//! Each `(route, direction)` pair becomes one directed line following its
//! most frequent stop pattern in the time window. Segment travel times are
//! shifted lognormals: the shift is the distance at the speed limit and the
//! density peaks at the scheduled gap.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{
    discretize_lognormal, propagate_headway, waiting_from_headway, BundleMeta, DiscretePmf, DistributionBundle,
    HeadwayModel, LognormalSpec, TimeGrid,
};
use crate::error::{Error, Result};
use crate::network::{LineSpec, NetworkSpec, StationSpec, SCHEMA};

const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Half-open window of departure times, seconds after midnight.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: u32,
    pub end: u32,
}

impl TimeWindow {
    /// Parses `HH:MM-HH:MM` (seconds optional).
    pub fn parse(text: &str) -> Result<Self> {
        let (a, b) = text
            .split_once('-')
            .ok_or_else(|| Error::InvalidParameter(format!("window `{text}` is not of the form HH:MM-HH:MM")))?;
        let start = parse_time(a).ok_or_else(|| Error::InvalidParameter(format!("bad window start `{a}`")))?;
        let end = parse_time(b).ok_or_else(|| Error::InvalidParameter(format!("bad window end `{b}`")))?;
        if end <= start {
            return Err(Error::InvalidParameter(format!("window `{text}` is empty")));
        }
        Ok(TimeWindow { start, end })
    }

    pub fn contains(&self, seconds: u32) -> bool {
        self.start <= seconds && seconds < self.end
    }
}

/// `H:MM[:SS]` to seconds; hours may exceed 24.
pub fn parse_time(text: &str) -> Option<u32> {
    let mut parts = text.trim().split(':');
    let h: u32 = parts.next()?.parse().ok()?;
    let m: u32 = parts.next()?.parse().ok()?;
    let s: u32 = match parts.next() {
        Some(p) => p.parse().ok()?,
        None => 0,
    };
    if parts.next().is_some() || m >= 60 || s >= 60 {
        return None;
    }
    Some(h * 3600 + m * 60 + s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    /// Segment σ is drawn uniformly from this closed range.
    pub sigma_range: (f64, f64),
    pub road_speed_kmh: f64,
    pub rail_speed_kmh: f64,
    /// Per-route speed limits, km/h.
    #[serde(default)]
    pub route_speeds: BTreeMap<String, f64>,
    pub seed: u64,
    pub window: TimeWindow,
    /// `YYYYMMDD`; when set, trips are filtered by calendar.txt and calendar_dates.txt.
    #[serde(default)]
    pub service_date: Option<String>,
    pub delta_seconds: f64,
    pub horizon_ticks: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            sigma_range: (0.25, 0.5),
            road_speed_kmh: 50.0,
            rail_speed_kmh: 80.0,
            route_speeds: BTreeMap::new(),
            seed: 0,
            window: TimeWindow {
                start: 6 * 3600,
                end: 10 * 3600,
            },
            service_date: None,
            delta_seconds: 15.0,
            horizon_ticks: 240,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.sigma_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma range [{lo}, {hi}] is not valid"
            )));
        }
        for (what, v) in [("road speed", self.road_speed_kmh), ("rail speed", self.rail_speed_kmh)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{what} must be positive, got {v}")));
            }
        }
        TimeGrid::new(self.delta_seconds, self.horizon_ticks).map(|_| ())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.delta_seconds, self.horizon_ticks)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GtfsStop {
    pub id: String,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GtfsRoute {
    pub id: String,
    pub name: String,
    pub route_type: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopTime {
    pub stop_id: String,
    pub sequence: u32,
    pub arrival: u32,
    pub departure: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GtfsTrip {
    pub id: String,
    pub route_id: String,
    pub direction: u8,
    pub service_id: String,
    /// Ordered by stop sequence.
    pub stop_times: Vec<StopTime>,
}

impl GtfsTrip {
    pub fn first_departure(&self) -> Option<u32> {
        self.stop_times.first().map(|s| s.departure)
    }
}

/// Feed tables restricted to the service date and time window.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GtfsSlice {
    pub stops: Vec<GtfsStop>,
    pub routes: Vec<GtfsRoute>,
    pub trips: Vec<GtfsTrip>,
    pub warnings: Vec<String>,
}

#[derive(Deserialize)]
struct StopRow {
    stop_id: String,
    #[serde(default)]
    stop_name: String,
    stop_lat: String,
    stop_lon: String,
}

#[derive(Deserialize)]
struct RouteRow {
    route_id: String,
    #[serde(default)]
    route_short_name: String,
    #[serde(default)]
    route_long_name: String,
    route_type: String,
}

#[derive(Deserialize)]
struct TripRow {
    route_id: String,
    service_id: String,
    trip_id: String,
    #[serde(default)]
    direction_id: String,
}

#[derive(Deserialize)]
struct StopTimeRow {
    trip_id: String,
    arrival_time: String,
    departure_time: String,
    stop_id: String,
    stop_sequence: String,
}

#[derive(Deserialize)]
struct CalendarRow {
    service_id: String,
    monday: u8,
    tuesday: u8,
    wednesday: u8,
    thursday: u8,
    friday: u8,
    saturday: u8,
    sunday: u8,
    start_date: String,
    end_date: String,
}

#[derive(Deserialize)]
struct CalendarDateRow {
    service_id: String,
    date: String,
    exception_type: u8,
}

fn read_table<T: for<'de> Deserialize<'de>>(dir: &Path, name: &str, required: bool) -> Result<Option<Vec<(u64, T)>>> {
    let path = dir.join(name);
    if !path.exists() {
        if required {
            return Err(Error::Gtfs(format!("missing required table {name}")));
        }
        return Ok(None);
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(&path)
        .map_err(|e| Error::Gtfs(format!("{name}: {e}")))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Gtfs(format!("{name}: {e}")))?
        .clone();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Gtfs(format!("{name}: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        let row: T = record
            .deserialize(Some(&headers))
            .map_err(|e| Error::Gtfs(format!("{name} row {line}: {e}")))?;
        rows.push((line, row));
    }
    Ok(Some(rows))
}

fn parse_field<T: std::str::FromStr>(table: &str, row: u64, field: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Gtfs(format!("{table} row {row}: unparsable {field} `{value}`")))
}

fn weekday(date: &str) -> Option<usize> {
    // Sakamoto's day-of-week, 0 = Monday.
    if date.len() != 8 {
        return None;
    }
    let y: i32 = date[0..4].parse().ok()?;
    let m: usize = date[4..6].parse().ok()?;
    let d: i32 = date[6..8].parse().ok()?;
    if !(1..=12).contains(&m) {
        return None;
    }
    const T: [i32; 12] = [0, 3, 2, 5, 0, 3, 5, 1, 4, 6, 2, 4];
    let y = if m < 3 { y - 1 } else { y };
    let sunday_based = (y + y / 4 - y / 100 + y / 400 + T[m - 1] + d).rem_euclid(7);
    Some(((sunday_based + 6) % 7) as usize)
}

fn active_services(dir: &Path, date: &str) -> Result<Option<Vec<String>>> {
    let day = weekday(date).ok_or_else(|| Error::InvalidParameter(format!("service date `{date}` is not YYYYMMDD")))?;
    let calendar = read_table::<CalendarRow>(dir, "calendar.txt", false)?;
    let dates = read_table::<CalendarDateRow>(dir, "calendar_dates.txt", false)?;
    if calendar.is_none() && dates.is_none() {
        return Ok(None);
    }
    let mut active: BTreeMap<String, bool> = BTreeMap::new();
    for (_, c) in calendar.unwrap_or_default() {
        let flags = [
            c.monday,
            c.tuesday,
            c.wednesday,
            c.thursday,
            c.friday,
            c.saturday,
            c.sunday,
        ];
        let on = flags[day] == 1 && c.start_date.as_str() <= date && date <= c.end_date.as_str();
        active.insert(c.service_id, on);
    }
    for (_, d) in dates.unwrap_or_default() {
        if d.date == date {
            active.insert(d.service_id, d.exception_type == 1);
        }
    }
    Ok(Some(active.into_iter().filter(|(_, on)| *on).map(|(s, _)| s).collect()))
}

/// Reads a feed directory, keeping trips whose first departure lies in the
/// window (and whose service runs on the configured date).
pub fn load_slice(dir: impl AsRef<Path>, config: &CalibrationConfig) -> Result<GtfsSlice> {
    let dir = dir.as_ref();
    let mut warnings = Vec::new();
    let stop_rows = read_table::<StopRow>(dir, "stops.txt", true)?.unwrap_or_default();
    let route_rows = read_table::<RouteRow>(dir, "routes.txt", true)?.unwrap_or_default();
    let trip_rows = read_table::<TripRow>(dir, "trips.txt", true)?.unwrap_or_default();
    let time_rows = read_table::<StopTimeRow>(dir, "stop_times.txt", true)?.unwrap_or_default();

    let mut stops = Vec::with_capacity(stop_rows.len());
    for (row, s) in stop_rows {
        if s.stop_lat.is_empty() && s.stop_lon.is_empty() {
            // Entrances and other nodes without coordinates carry no service.
            continue;
        }
        stops.push(GtfsStop {
            lat: parse_field("stops.txt", row, "stop_lat", &s.stop_lat)?,
            lon: parse_field("stops.txt", row, "stop_lon", &s.stop_lon)?,
            id: s.stop_id,
            name: s.stop_name,
        });
    }
    let stop_ids: HashMap<&str, ()> = stops.iter().map(|s| (s.id.as_str(), ())).collect();

    let mut routes = Vec::with_capacity(route_rows.len());
    for (row, r) in route_rows {
        let name = if r.route_short_name.is_empty() {
            r.route_long_name
        } else {
            r.route_short_name
        };
        routes.push(GtfsRoute {
            route_type: parse_field("routes.txt", row, "route_type", &r.route_type)?,
            id: r.route_id,
            name,
        });
    }
    let route_ids: HashMap<&str, ()> = routes.iter().map(|r| (r.id.as_str(), ())).collect();

    let services = match &config.service_date {
        Some(date) => active_services(dir, date)?,
        None => None,
    };

    let mut trips: BTreeMap<String, GtfsTrip> = BTreeMap::new();
    for (row, t) in trip_rows {
        if !route_ids.contains_key(t.route_id.as_str()) {
            return Err(Error::Gtfs(format!(
                "trips.txt row {row}: unknown route `{}`",
                t.route_id
            )));
        }
        if let Some(active) = &services {
            if !active.contains(&t.service_id) {
                continue;
            }
        }
        let direction = if t.direction_id.is_empty() {
            0
        } else {
            parse_field("trips.txt", row, "direction_id", &t.direction_id)?
        };
        trips.insert(
            t.trip_id.clone(),
            GtfsTrip {
                id: t.trip_id,
                route_id: t.route_id,
                direction,
                service_id: t.service_id,
                stop_times: Vec::new(),
            },
        );
    }

    for (row, st) in time_rows {
        let Some(trip) = trips.get_mut(&st.trip_id) else {
            continue;
        };
        if !stop_ids.contains_key(st.stop_id.as_str()) {
            return Err(Error::Gtfs(format!(
                "stop_times.txt row {row}: unknown stop `{}`",
                st.stop_id
            )));
        }
        let time = |field: &str, v: &str| {
            parse_time(v).ok_or_else(|| Error::Gtfs(format!("stop_times.txt row {row}: unparsable {field} `{v}`")))
        };
        let (arrival, departure) = match (st.arrival_time.is_empty(), st.departure_time.is_empty()) {
            (true, true) => {
                warnings.push(format!("stop_times.txt row {row}: untimed stop skipped"));
                continue;
            }
            (false, true) => {
                let a = time("arrival_time", &st.arrival_time)?;
                (a, a)
            }
            (true, false) => {
                let d = time("departure_time", &st.departure_time)?;
                (d, d)
            }
            (false, false) => (
                time("arrival_time", &st.arrival_time)?,
                time("departure_time", &st.departure_time)?,
            ),
        };
        trip.stop_times.push(StopTime {
            stop_id: st.stop_id,
            sequence: parse_field("stop_times.txt", row, "stop_sequence", &st.stop_sequence)?,
            arrival,
            departure,
        });
    }

    let mut kept = Vec::new();
    for (_, mut trip) in trips {
        trip.stop_times.sort_by_key(|s| s.sequence);
        if trip.stop_times.windows(2).any(|w| w[0].sequence == w[1].sequence) {
            return Err(Error::Gtfs(format!("trip `{}` repeats a stop_sequence value", trip.id)));
        }
        if trip.stop_times.len() < 2 {
            continue;
        }
        if trip.first_departure().is_some_and(|d| config.window.contains(d)) {
            kept.push(trip);
        }
    }
    if kept.is_empty() {
        warnings.push("no trips depart inside the window".into());
    }
    Ok(GtfsSlice {
        stops,
        routes,
        trips: kept,
        warnings,
    })
}

/// Great-circle distance in metres.
pub fn haversine_m(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (lat1, lon1) = (a.0.to_radians(), a.1.to_radians());
    let (lat2, lon2) = (b.0.to_radians(), b.1.to_radians());
    let h = ((lat2 - lat1) / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * ((lon2 - lon1) / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().asin()
}

/// Lognormal for one segment. The shift is the distance at the speed limit
/// rounded up to whole ticks (at least one); the density peaks at the
/// scheduled gap minus the shift, clamped to one tick with a warning.
pub fn calibrate_segment(
    distance_m: f64,
    scheduled_gap_s: f64,
    speed_kmh: f64,
    sigma: f64,
    grid: &TimeGrid,
) -> Result<(LognormalSpec, Vec<String>)> {
    let mut warnings = Vec::new();
    if !(distance_m.is_finite() && distance_m >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "segment distance {distance_m} is not valid"
        )));
    }
    let min_seconds = distance_m / (speed_kmh / 3.6);
    let mut shift = (min_seconds / grid.delta_seconds).ceil() as usize;
    if shift == 0 {
        warnings.push("zero-length segment, minimum time floored to one tick".into());
        shift = 1;
    }
    let mut mode = scheduled_gap_s - grid.seconds(shift);
    if mode <= 0.0 {
        warnings.push(format!(
            "scheduled gap {scheduled_gap_s}s does not exceed the minimum {}s, mode clamped to one tick",
            grid.seconds(shift)
        ));
        mode = grid.delta_seconds;
    }
    Ok((LognormalSpec::from_mode(mode, sigma, shift)?, warnings))
}

/// Mean gap between consecutive departures, in seconds.
pub fn mean_headway_seconds(departures: &[u32]) -> Option<f64> {
    if departures.len() < 2 {
        return None;
    }
    let mut d = departures.to_vec();
    d.sort_unstable();
    Some(f64::from(d[d.len() - 1] - d[0]) / (d.len() - 1) as f64)
}

/// Mean departure gap rounded to the nearest tick (at least one).
pub fn estimate_origin_headway(departures: &[u32], grid: &TimeGrid) -> Result<usize> {
    let mean = mean_headway_seconds(departures)
        .ok_or_else(|| Error::Gtfs(format!("{} departures cannot define a headway", departures.len())))?;
    Ok(((mean / grid.delta_seconds).round() as usize).max(1))
}

/// Per-line record of what calibration did.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineReport {
    pub line: String,
    pub trips: usize,
    pub headway_seconds: f64,
    pub headway_ticks: usize,
    pub segments: Vec<LognormalSpec>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub lines: Vec<LineReport>,
    pub dropped: Vec<String>,
    pub warnings: Vec<String>,
}

/// Network, bundle and report produced from one slice.
#[derive(Clone, Debug, PartialEq)]
pub struct IngestOutput {
    pub spec: NetworkSpec,
    pub bundle: DistributionBundle,
    pub report: CalibrationReport,
}

/// Calibrates every line of the slice. Lines are processed in id order and
/// σ draws come from one seeded stream, so equal inputs give equal bytes.
pub fn build_bundle(slice: &GtfsSlice, config: &CalibrationConfig) -> Result<IngestOutput> {
    config.validate()?;
    let grid = config.grid()?;
    if slice.trips.is_empty() {
        return Err(Error::Gtfs("the slice holds no trips".into()));
    }
    let stops: HashMap<&str, &GtfsStop> = slice.stops.iter().map(|s| (s.id.as_str(), s)).collect();
    let routes: HashMap<&str, &GtfsRoute> = slice.routes.iter().map(|r| (r.id.as_str(), r)).collect();

    let mut groups: BTreeMap<(String, u8), Vec<&GtfsTrip>> = BTreeMap::new();
    for trip in &slice.trips {
        groups
            .entry((trip.route_id.clone(), trip.direction))
            .or_default()
            .push(trip);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut report = CalibrationReport {
        warnings: slice.warnings.clone(),
        ..Default::default()
    };
    let mut bundle = DistributionBundle::new(grid);
    let mut lines = Vec::new();
    let mut used: BTreeSet<String> = BTreeSet::new();
    for ((route_id, direction), trips) in groups {
        let id = format!("{route_id}:{direction}");
        let mut patterns: BTreeMap<Vec<&str>, Vec<&GtfsTrip>> = BTreeMap::new();
        for t in &trips {
            patterns
                .entry(t.stop_times.iter().map(|s| s.stop_id.as_str()).collect())
                .or_default()
                .push(t);
        }
        let (pattern, chosen) = patterns
            .into_iter()
            .max_by(|a, b| a.1.len().cmp(&b.1.len()).then_with(|| b.0.cmp(&a.0)))
            .expect("group is nonempty");
        let mut distinct = pattern.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() != pattern.len() {
            report.dropped.push(format!("{id}: stop pattern visits a stop twice"));
            continue;
        }
        let departures: Vec<u32> = chosen.iter().filter_map(|t| t.first_departure()).collect();
        let Some(headway_seconds) = mean_headway_seconds(&departures) else {
            report.dropped.push(format!("{id}: fewer than two trips in the window"));
            continue;
        };
        let h = estimate_origin_headway(&departures, &grid)?;
        let speed = config.route_speeds.get(&route_id).copied().unwrap_or_else(|| {
            match routes.get(route_id.as_str()).map(|r| r.route_type) {
                Some(0..=2) | Some(12) => config.rail_speed_kmh,
                _ => config.road_speed_kmh,
            }
        });
        let (lo, hi) = config.sigma_range;
        let mut segments = Vec::new();
        let mut travel = Vec::new();
        for k in 0..pattern.len() - 1 {
            let (a, b) = (stops[pattern[k]], stops[pattern[k + 1]]);
            let gap = chosen
                .iter()
                .map(|t| f64::from(t.stop_times[k + 1].departure) - f64::from(t.stop_times[k].departure))
                .sum::<f64>()
                / chosen.len() as f64;
            let sigma = if lo == hi { lo } else { rng.gen_range(lo..=hi) };
            let (spec, warns) =
                calibrate_segment(haversine_m((a.lat, a.lon), (b.lat, b.lon)), gap, speed, sigma, &grid)?;
            report
                .warnings
                .extend(warns.into_iter().map(|w| format!("{id} {}→{}: {w}", a.id, b.id)));
            travel.push(discretize_lognormal(&spec, &grid)?);
            segments.push(spec);
        }
        let mut line_warnings = Vec::new();
        let mut waiting = Vec::new();
        let mut from_origin = DiscretePmf::point(&grid, 0);
        for k in 0..pattern.len() - 1 {
            let model = if k == 0 {
                HeadwayModel::deterministic(&grid, h)
            } else {
                match propagate_headway(h, &from_origin) {
                    Ok(cdf) => HeadwayModel::from_cdf(h, cdf),
                    Err(e) => {
                        line_warnings.push(format!("{id}: headway at stop {} failed: {e}", pattern[k]));
                        break;
                    }
                }
            };
            waiting.push(waiting_from_headway(&model)?);
            from_origin = from_origin.convolve(&travel[k])?;
        }
        if waiting.len() != travel.len() {
            report.dropped.push(line_warnings.join("; "));
            continue;
        }
        let mut spec = LineSpec {
            id: id.clone(),
            stops: pattern.iter().map(|s| s.to_string()).collect(),
            travel: Vec::new(),
            waiting: Vec::new(),
        };
        for (k, (x, w)) in travel.into_iter().zip(waiting).enumerate() {
            let (t_id, w_id) = (format!("travel/{id}/{k}"), format!("wait/{id}/{k}"));
            bundle.insert(&t_id, x)?;
            bundle.insert(&w_id, w)?;
            spec.travel.push(t_id);
            spec.waiting.push(w_id);
        }
        for s in &pattern {
            used.insert(s.to_string());
        }
        report.lines.push(LineReport {
            line: id,
            trips: chosen.len(),
            headway_seconds,
            headway_ticks: h,
            segments,
        });
        lines.push(spec);
    }
    if lines.is_empty() {
        return Err(Error::Gtfs(format!(
            "no line survived calibration: {}",
            report.dropped.join("; ")
        )));
    }
    let stations = used
        .iter()
        .map(|id| {
            let s = stops[id.as_str()];
            StationSpec {
                id: s.id.clone(),
                name: s.name.clone(),
                lat: Some(s.lat),
                lon: Some(s.lon),
            }
        })
        .collect();
    bundle.meta = Some(BundleMeta {
        source: Some("gtfs".into()),
        seed: Some(config.seed),
        warnings: report.warnings.clone(),
    });
    Ok(IngestOutput {
        spec: NetworkSpec {
            schema: SCHEMA.into(),
            stations,
            lines,
            grid: Some(grid),
            bundle: None,
        },
        bundle,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn times_and_windows() {
        assert_eq!(parse_time("08:45:00"), Some(31_500));
        assert_eq!(parse_time("25:10"), Some(90_600));
        assert_eq!(parse_time("8:61:00"), None);
        assert_eq!(parse_time("x"), None);
        let w = TimeWindow::parse("06:00-10:00").unwrap();
        assert!(w.contains(6 * 3600));
        assert!(!w.contains(10 * 3600));
        assert!(TimeWindow::parse("10:00-06:00").is_err());
    }

    #[test]
    fn headway_is_mean_gap() {
        let g = TimeGrid::new(15.0, 240).unwrap();
        let deps = [
            parse_time("8:45").unwrap(),
            parse_time("8:55").unwrap(),
            parse_time("9:10").unwrap(),
        ];
        assert_eq!(mean_headway_seconds(&deps), Some(750.0));
        assert_eq!(estimate_origin_headway(&deps, &g).unwrap(), 50);
        assert_eq!(estimate_origin_headway(&[0, 600, 1200, 1800], &g).unwrap(), 40);
        assert_eq!(estimate_origin_headway(&[100, 460], &g).unwrap(), 24);
        assert!(estimate_origin_headway(&[100], &g).is_err());
    }

    #[test]
    fn segment_calibration() {
        let g = TimeGrid::new(15.0, 240).unwrap();
        // 5 km at 60 km/h is 5 minutes; a 15 minute gap leaves a 10 minute mode.
        let (spec, warns) = calibrate_segment(5000.0, 900.0, 60.0, 0.25, &g).unwrap();
        assert!(warns.is_empty());
        assert_eq!(spec.shift, 20);
        assert!((spec.mode_seconds() - 600.0).abs() < 1e-9);
        assert!((spec.mu - (600f64.ln() + 0.0625)).abs() < 1e-12);
        let (spec, warns) = calibrate_segment(0.0, 120.0, 50.0, 0.3, &g).unwrap();
        assert_eq!(spec.shift, 1);
        assert_eq!(warns.len(), 1);
        let (spec, warns) = calibrate_segment(5000.0, 200.0, 60.0, 0.3, &g).unwrap();
        assert!((spec.mode_seconds() - 15.0).abs() < 1e-9);
        assert_eq!(warns.len(), 1);
    }

    #[test]
    fn weekdays() {
        assert_eq!(weekday("20240101"), Some(0));
        assert_eq!(weekday("20241013"), Some(6));
        assert_eq!(weekday("2024"), None);
    }

    #[test]
    fn distances() {
        let d = haversine_m((41.8781, -87.6298), (41.8781, -87.6298));
        assert_eq!(d, 0.0);
        // One degree of latitude is about 111.2 km.
        let d = haversine_m((41.0, -87.0), (42.0, -87.0));
        assert!((d - 111_195.0).abs() < 50.0, "{d}");
    }
}
